//! Exact log-space combinatorics shared by every description-length term.
//!
//! All values are natural logarithms. Factorials come from a compensated
//! cumulative table; restricted partition counts `q(m, n)` come from the
//! recurrence `q(m, n) = q(m, n - 1) + q(m - n, n)` evaluated in log space.

use std::sync::{OnceLock, RwLock};

use statrs::function::gamma::ln_gamma;

use crate::error::{Error, Result};

/// Cumulative table of `ln m!`.
#[derive(Debug, Clone)]
pub struct LogFactorialTable {
    values: Vec<f64>,
    // Neumaier compensation carried between extensions.
    comp: f64,
}

impl LogFactorialTable {
    pub fn new(max: usize) -> Self {
        let mut table = LogFactorialTable {
            values: vec![0.0],
            comp: 0.0,
        };
        table.extend_to(max);
        table
    }

    pub fn extend_to(&mut self, max: usize) {
        let mut sum = *self.values.last().unwrap();
        let mut comp = self.comp;
        self.values.reserve(max.saturating_sub(self.values.len() - 1));
        for m in self.values.len()..=max {
            let term = (m as f64).ln();
            let t = sum + term;
            if sum.abs() >= term.abs() {
                comp += (sum - t) + term;
            } else {
                comp += (term - t) + sum;
            }
            sum = t;
            self.values.push(sum + comp);
        }
        self.comp = comp;
    }

    pub fn max(&self) -> usize {
        self.values.len() - 1
    }

    /// `ln m!`, falling back to log-gamma past the end of the table.
    #[inline]
    pub fn get(&self, m: u64) -> f64 {
        match self.values.get(m as usize) {
            Some(v) => *v,
            None => ln_gamma(m as f64 + 1.0),
        }
    }
}

const FACTORIAL_TABLE_SIZE: usize = 1 << 20;

fn factorial_table() -> &'static LogFactorialTable {
    static TABLE: OnceLock<LogFactorialTable> = OnceLock::new();
    TABLE.get_or_init(|| LogFactorialTable::new(FACTORIAL_TABLE_SIZE))
}

/// `ln m!`.
#[inline]
pub fn ln_factorial(m: u64) -> f64 {
    factorial_table().get(m)
}

/// `ln C(n, k)`; zero when `k > n` is not allowed and returns `-inf`.
#[inline]
pub fn ln_binom(n: u64, k: u64) -> f64 {
    if k > n {
        return f64::NEG_INFINITY;
    }
    ln_factorial(n) - ln_factorial(k) - ln_factorial(n - k)
}

/// Unchecked `ln multiset(m, k) = ln C(m + k - 1, k)`.
///
/// Returns 0 for `k = 0` (including `m = 0`) and `+inf` for `m = 0, k > 0`.
#[inline]
pub fn lmultiset(m: u64, k: u64) -> f64 {
    if k == 0 {
        0.0
    } else if m == 0 {
        f64::INFINITY
    } else {
        ln_factorial(m + k - 1) - ln_factorial(k) - ln_factorial(m - 1)
    }
}

/// Number of ways to distribute `k` indistinguishable items among `m` bins, in log space.
pub fn log_multiset(m: u64, k: u64) -> Result<f64> {
    if m == 0 && k > 0 {
        return Err(Error::Domain(format!(
            "cannot distribute {k} items into zero bins"
        )));
    }
    Ok(lmultiset(m, k))
}

/// `ln(exp(a) + exp(b))`.
#[inline]
pub fn log_add_exp(a: f64, b: f64) -> f64 {
    if a == f64::NEG_INFINITY {
        return b;
    }
    if b == f64::NEG_INFINITY {
        return a;
    }
    let (hi, lo) = if a > b { (a, b) } else { (b, a) };
    hi + (lo - hi).exp().ln_1p()
}

/// Exact count of partitions of `m` into at most `n` parts, or `None` on u128 overflow.
pub fn q_count(m: u64, n: u64) -> Option<u128> {
    if m == 0 {
        return Some(1);
    }
    if n == 0 {
        return Some(0);
    }
    let n = n.min(m) as usize;
    let m = m as usize;
    // col[k] holds q(k, j) for the current j.
    let mut col = vec![1u128; m + 1];
    for j in 2..=n {
        for k in j..=m {
            col[k] = col[k].checked_add(col[k - j])?;
        }
    }
    Some(col[m])
}

/// Memoized `ln q(m, n)` over a rectangular region that grows on demand.
///
/// Storage is column-major: `cols[j - 1][m] = ln q(m, j)`. Growth happens
/// under an exclusive lock; lookups take a shared lock. Requests that would
/// push the table past `budget` cells are answered by the asymptotic
/// expansion instead.
#[derive(Debug)]
pub struct RestrictedPartitionTable {
    inner: RwLock<QTable>,
    budget: usize,
}

#[derive(Debug, Default)]
struct QTable {
    cols: Vec<Vec<f64>>,
    mlen: usize,
}

impl QTable {
    fn lookup(&self, m: usize, n: usize) -> Option<f64> {
        if n <= self.cols.len() && m < self.mlen {
            Some(self.cols[n - 1][m])
        } else {
            None
        }
    }

    fn rebuild(&mut self, mlen: usize, ncols: usize) {
        let mut cols: Vec<Vec<f64>> = Vec::with_capacity(ncols);
        cols.push(vec![0.0; mlen]);
        for j in 2..=ncols {
            let prev = &cols[j - 2];
            let mut col = prev.clone();
            for k in j..mlen {
                col[k] = log_add_exp(prev[k], col[k - j]);
            }
            cols.push(col);
        }
        self.cols = cols;
        self.mlen = mlen;
    }
}

/// Default cell budget for the shared table (about 64 MiB of f64).
pub const Q_TABLE_BUDGET: usize = 1 << 23;

impl RestrictedPartitionTable {
    pub fn new(budget: usize) -> Self {
        RestrictedPartitionTable {
            inner: RwLock::new(QTable::default()),
            budget,
        }
    }

    /// `ln q(m, n)` for `n >= 1`.
    pub fn log_q(&self, m: u64, n: u64) -> f64 {
        assert!(n >= 1, "q(m, n) requires n >= 1");
        if m <= 1 || n == 1 {
            return 0.0;
        }
        let n = n.min(m) as usize;
        let m = m as usize;
        if let Some(v) = self.inner.read().unwrap().lookup(m, n) {
            return v;
        }
        let mut table = self.inner.write().unwrap();
        if let Some(v) = table.lookup(m, n) {
            return v;
        }
        let want_m = table.mlen.max((m + 1).next_power_of_two());
        let want_n = table.cols.len().max(n.next_power_of_two()).min(want_m);
        let (new_m, new_n) = if want_m.saturating_mul(want_n) <= self.budget {
            (want_m, want_n)
        } else {
            (table.mlen.max(m + 1), table.cols.len().max(n))
        };
        if new_m.saturating_mul(new_n) > self.budget {
            drop(table);
            return log_q_asymptotic(m as u64, n as u64);
        }
        table.rebuild(new_m, new_n);
        table.lookup(m, n).unwrap()
    }

    /// True when `(m, n)` is answered from the exact table (or is trivially exact).
    pub fn is_exact(&self, m: u64, n: u64) -> bool {
        if m <= 1 || n <= 1 {
            return true;
        }
        let n = n.min(m) as usize;
        let m = m as usize;
        let table = self.inner.read().unwrap();
        if table.lookup(m, n).is_some() {
            return true;
        }
        let need_m = table.mlen.max(m + 1);
        let need_n = table.cols.len().max(n);
        need_m.saturating_mul(need_n) <= self.budget
    }
}

fn shared_q_table() -> &'static RestrictedPartitionTable {
    static TABLE: OnceLock<RestrictedPartitionTable> = OnceLock::new();
    TABLE.get_or_init(|| RestrictedPartitionTable::new(Q_TABLE_BUDGET))
}

/// `ln q(m, n)`: log of the number of partitions of `m` into at most `n` parts.
pub fn log_q(m: u64, n: u64) -> f64 {
    shared_q_table().log_q(m, n)
}

/// Dilogarithm `Li2(x)` on `[0, 1]`.
pub fn dilog(x: f64) -> f64 {
    debug_assert!((0.0..=1.0).contains(&x));
    if x == 0.0 {
        return 0.0;
    }
    if x == 1.0 {
        return std::f64::consts::PI.powi(2) / 6.0;
    }
    if x > 0.5 {
        return std::f64::consts::PI.powi(2) / 6.0 - x.ln() * (-x).ln_1p() - dilog(1.0 - x);
    }
    let mut sum = 0.0;
    let mut pow = x;
    let mut k = 1.0f64;
    loop {
        let term = pow / (k * k);
        sum += term;
        if term < 1e-18 * sum {
            break;
        }
        pow *= x;
        k += 1.0;
    }
    sum
}

/// Szekeres' uniform asymptotic expansion of `ln q(m, n)`.
pub fn log_q_asymptotic(m: u64, n: u64) -> f64 {
    let n = n.min(m);
    let mf = m as f64;
    let nf = n as f64;
    if nf < mf.powf(0.25) {
        return ln_binom(m - 1, n - 1) - ln_factorial(n);
    }
    let u = nf / mf.sqrt();
    let mut v = u;
    for _ in 0..10_000 {
        let next = u * dilog(-(-v).exp_m1()).sqrt();
        let done = (next - v).abs() < 1e-13 * v.max(1.0);
        v = next;
        if done {
            break;
        }
    }
    let ev = (-v).exp();
    let f = v / (2f64.powf(1.5) * std::f64::consts::PI * u) / (1.0 - (1.0 + u * u / 2.0) * ev).sqrt();
    let g = 2.0 * v / u - u * (-ev).ln_1p();
    f.ln() - mf.ln() + mf.sqrt() * g
}

#[cfg(test)]
mod tests {
    use super::*;

    fn brute_partitions(m: u64, max_part: u64, parts_left: u64) -> u64 {
        if m == 0 {
            return 1;
        }
        if parts_left == 0 {
            return 0;
        }
        (1..=max_part.min(m))
            .map(|p| brute_partitions(m - p, p, parts_left - 1))
            .sum()
    }

    #[test]
    fn factorial_table_steps() {
        let t = LogFactorialTable::new(1000);
        assert_eq!(t.get(0), 0.0);
        for m in 1..=1000u64 {
            let step = t.get(m) - t.get(m - 1);
            assert!((step - (m as f64).ln()).abs() < 1e-12, "m = {m}");
        }
        let beyond = t.get(5000);
        assert!((beyond - ln_gamma(5001.0)).abs() < 1e-9);
    }

    #[test]
    fn multiset_values() {
        assert!((log_multiset(2, 3).unwrap() - 4f64.ln()).abs() < 1e-12);
        assert_eq!(log_multiset(5, 0).unwrap(), 0.0);
        assert!(log_multiset(0, 3).is_err());
        assert_eq!(log_multiset(0, 0).unwrap(), 0.0);
    }

    #[test]
    fn q_small_values() {
        assert!((log_q(4, 2) - 3f64.ln()).abs() < 1e-12);
        assert!((log_q(5, 5) - 7f64.ln()).abs() < 1e-12);
        assert_eq!(log_q(17, 1), 0.0);
        assert_eq!(log_q(0, 4), 0.0);
        assert_eq!(q_count(4, 2), Some(3));
        assert_eq!(q_count(5, 5), Some(7));
        assert_eq!(q_count(100, 100), Some(190_569_292));
    }

    #[test]
    fn q_count_matches_brute_force() {
        for m in 0..=30u64 {
            for n in 1..=12u64 {
                assert_eq!(q_count(m, n), Some(brute_partitions(m, m, n) as u128), "({m},{n})");
            }
        }
    }

    #[test]
    fn log_q_matches_integer_mode() {
        for m in (0..=400u64).step_by(7) {
            for n in [1u64, 2, 3, 5, 8, 13, 50, 400] {
                let exact = q_count(m, n).unwrap() as f64;
                let lq = log_q(m, n);
                assert!((lq - exact.ln()).abs() < 1e-12 * exact.ln().max(1.0), "({m},{n})");
            }
        }
    }

    #[test]
    fn q_recurrence_and_symmetry() {
        for m in 0..60u64 {
            assert_eq!(q_count(m, 1), Some(1));
            assert_eq!(q_count(m, m + 5), q_count(m, m));
            for n in 2..=m {
                assert_eq!(
                    q_count(m, n).unwrap(),
                    q_count(m, n - 1).unwrap() + q_count(m - n, n).unwrap()
                );
            }
        }
    }

    #[test]
    fn asymptotic_is_close_for_large_arguments() {
        // relative error of the expansion shrinks with m; compare against the exact table
        let table = RestrictedPartitionTable::new(1 << 24);
        for (m, n) in [(4000u64, 40u64), (4000, 200), (3000, 3000), (2000, 5)] {
            let exact = table.log_q(m, n);
            let approx = log_q_asymptotic(m, n);
            assert!(((approx - exact) / exact).abs() < 0.01, "({m},{n}) {exact} {approx}");
        }
    }

    #[test]
    fn tiny_budget_falls_back() {
        let table = RestrictedPartitionTable::new(16);
        assert!(!table.is_exact(1000, 100));
        let v = table.log_q(1000, 100);
        assert!((v - log_q_asymptotic(1000, 100)).abs() < 1e-12);
    }
}
