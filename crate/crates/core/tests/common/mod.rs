//! Independent oracles shared by the integration tests.
#![allow(dead_code)]

use seqblock::combinatorics::{lmultiset, ln_factorial};
use seqblock::edges::EdgeStream;

/// Every set partition of `n` items as a restricted growth string.
pub fn set_partitions(n: usize) -> Vec<Vec<u32>> {
    fn rec(prefix: &mut Vec<u32>, n: usize, max: u32, out: &mut Vec<Vec<u32>>) {
        if prefix.len() == n {
            out.push(prefix.clone());
            return;
        }
        let top = if prefix.is_empty() { 0 } else { max + 1 };
        for g in 0..=top {
            prefix.push(g);
            rec(prefix, n, max.max(g), out);
            prefix.pop();
        }
    }
    let mut out = Vec::new();
    rec(&mut Vec::new(), n, 0, &mut out);
    out
}

pub fn logsumexp(xs: &[f64]) -> f64 {
    let m = xs.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    m + xs.iter().map(|x| (x - m).exp()).sum::<f64>().ln()
}

/// `ln` of the Gamma-exponential marginal
/// `int_0^inf lambda^k e^(-lambda delta) Gamma(lambda; alpha, beta) d lambda`
/// by the trapezoidal rule in `u = ln lambda`, where the integrand is smooth
/// and decays on both sides.
pub fn wait_evidence_quadrature(k: u64, delta: f64, alpha: f64, beta: f64) -> f64 {
    let a = k as f64 + alpha;
    let rate = beta + delta;
    let log_f = |u: f64| alpha * beta.ln() - statrs::function::gamma::ln_gamma(alpha) + a * u - rate * u.exp();
    let peak = (a / rate).ln();
    let lo = peak - 45.0 / a - 10.0;
    let hi = peak + 6.0;
    let n = 20_000;
    let h = (hi - lo) / n as f64;
    let vals: Vec<f64> = (0..=n)
        .map(|i| {
            let w = if i == 0 || i == n { 0.5 } else { 1.0 };
            log_f(lo + i as f64 * h) + (w * h as f64).ln()
        })
        .collect();
    logsumexp(&vals)
}

/// `-ln P(edges | labels)` of the temporal model written directly from the
/// events: for each label the edge ends are placed on nodes in proportion to
/// their degrees,
/// `P = prod_i d_i! prod_r 2^(m_rr - loops_r) / prod_r e_r!`, times a uniform
/// prior on the degrees within each group.
pub fn edges_given_labels(stream: &EdgeStream, groups: &[u32]) -> f64 {
    let n = stream.num_nodes();
    let directed = stream.directed();
    let mut d_out = vec![0u64; n];
    let mut d_in = vec![0u64; n];
    let mut diag = std::collections::HashMap::<u32, u64>::new();
    for &(i, j) in stream.events() {
        d_out[i as usize] += 1;
        d_in[j as usize] += 1;
        if !directed && groups[i as usize] == groups[j as usize] && i != j {
            *diag.entry(groups[i as usize]).or_insert(0) += 1;
        }
    }
    let c = groups.iter().max().map_or(0, |&g| g as usize + 1);
    let mut size = vec![0u64; c];
    let mut e_out = vec![0u64; c];
    let mut e_in = vec![0u64; c];
    let mut lp = 0.0;
    for i in 0..n {
        let g = groups[i] as usize;
        size[g] += 1;
        if directed {
            e_out[g] += d_out[i];
            e_in[g] += d_in[i];
            lp += ln_factorial(d_out[i]) + ln_factorial(d_in[i]);
        } else {
            let d = d_out[i] + d_in[i];
            e_out[g] += d;
            lp += ln_factorial(d);
        }
    }
    lp += diag.values().map(|&m| m as f64 * std::f64::consts::LN_2).sum::<f64>();
    for g in 0..c {
        if size[g] == 0 {
            continue;
        }
        lp -= ln_factorial(e_out[g]) + lmultiset(size[g], e_out[g]);
        if directed {
            lp -= ln_factorial(e_in[g]) + lmultiset(size[g], e_in[g]);
        }
    }
    -lp
}

/// Label token of every event over the full label alphabet of `C` dense
/// groups (`r <= s` when undirected), in lexicographic order.
pub fn label_tokens(stream: &EdgeStream, groups: &[u32]) -> (Vec<u32>, usize) {
    let mut ids: Vec<u32> = groups.to_vec();
    ids.sort_unstable();
    ids.dedup();
    let c = ids.len() as u32;
    let dense = |g: u32| ids.binary_search(&g).unwrap() as u32;
    let mut names = Vec::new();
    for r in 0..c {
        for s in 0..c {
            if stream.directed() || r <= s {
                names.push((r, s));
            }
        }
    }
    let tokens = stream
        .events()
        .iter()
        .map(|&(i, j)| {
            let (mut r, mut s) = (dense(groups[i as usize]), dense(groups[j as usize]));
            if !stream.directed() && r > s {
                std::mem::swap(&mut r, &mut s);
            }
            names.iter().position(|&p| p == (r, s)).unwrap() as u32
        })
        .collect();
    (tokens, names.len())
}
