use rand::Rng;
use rustc_hash::FxHashMap;

use super::{BlockState, Occupancy};
use crate::chain::ChainCounts;
use crate::combinatorics::{ln_binom, ln_factorial, lmultiset, log_q};
use crate::dl::{compact_labels, total_dl, DLBreakdown, KPrior, Partition, PriorConfig};
use crate::error::{Error, Result};
use crate::waits::{gamma_evidence, wait_term, WaitMode, WaitStats};

/// Token/memory partition of a chain with incrementally maintained block
/// counts.
///
/// Items `0..N` are tokens. In the bipartite mode items `N..N+M` are
/// memories with their own labels; in the unified mode only tokens are
/// items and each memory `[x]` follows token `x`.
#[derive(Debug, Clone)]
pub struct ChainState<'a> {
    chain: &'a ChainCounts,
    prior: PriorConfig,
    unified: bool,
    waits: Option<(&'a WaitStats, WaitMode)>,
    memory_of_token: Vec<Option<u32>>,
    tok: Vec<u32>,
    mem: Vec<u32>,
    tocc: Occupancy,
    mocc: Occupancy,
    e_tok: Vec<u64>,
    e_mem: Vec<u64>,
    wsum: Vec<f64>,
    hist: Vec<FxHashMap<u64, u64>>,
    /// Multiplicities of the nonzero memory-group margins.
    es_hist: FxHashMap<u64, u64>,
    out_rows: Vec<FxHashMap<u32, u64>>,
    in_rows: Vec<FxHashMap<u32, u64>>,
    cells: FxHashMap<(u32, u32), i64>,
    const_seq: f64,
}

/// Which items a move relocates: `(token, from, to)` and `(memory, from, to)`.
#[derive(Debug, Clone, Copy)]
struct MoveSpec {
    tok: Option<(u32, u32, u32)>,
    mem: Option<(u32, u32, u32)>,
}

impl<'a> ChainState<'a> {
    /// State at `part`; waiting-time statistics are only needed for
    /// [`WaitMode::PerGroup`] pressure, but either mode is reported.
    pub fn new(
        chain: &'a ChainCounts,
        part: &Partition,
        prior: PriorConfig,
        waits: Option<(&'a WaitStats, WaitMode)>,
    ) -> Result<Self> {
        if part.token_groups.len() != chain.num_tokens() {
            return Err(Error::Invariant("partition does not cover the tokens".into()));
        }
        if !part.unified && part.memory_groups.len() != chain.num_memories() {
            return Err(Error::Invariant("partition does not cover the memories".into()));
        }
        if part.unified && chain.order() != 1 {
            return Err(Error::Config("unified partitions require order 1".into()));
        }
        if let Some((w, _)) = waits {
            if w.memory_counts.len() != chain.num_memories() {
                return Err(Error::Invariant("wait statistics do not match the chain".into()));
            }
        }
        let memory_of_token = if part.unified {
            (0..chain.num_tokens() as u32)
                .map(|x| chain.memory_of_token(x))
                .collect()
        } else {
            Vec::new()
        };
        let mut state = ChainState {
            chain,
            prior,
            unified: part.unified,
            waits,
            memory_of_token,
            tok: Vec::new(),
            mem: Vec::new(),
            tocc: Occupancy::default(),
            mocc: Occupancy::default(),
            e_tok: Vec::new(),
            e_mem: Vec::new(),
            wsum: Vec::new(),
            hist: Vec::new(),
            es_hist: FxHashMap::default(),
            out_rows: Vec::new(),
            in_rows: Vec::new(),
            cells: FxHashMap::default(),
            const_seq: -chain.token_counts().iter().map(|&k| ln_factorial(k)).sum::<f64>(),
        };
        let mut labels = compact_labels(&part.token_groups);
        if !part.unified {
            labels.extend(compact_labels(&part.memory_groups));
        }
        state.rebuild(&labels);
        Ok(state)
    }

    /// Every token and memory alone (unified: every token alone).
    pub fn singletons(
        chain: &'a ChainCounts,
        unified: bool,
        prior: PriorConfig,
        waits: Option<(&'a WaitStats, WaitMode)>,
    ) -> Result<Self> {
        let part = if unified {
            Partition::unified(chain, (0..chain.num_tokens() as u32).collect())?
        } else {
            Partition::singletons(chain)
        };
        Self::new(chain, &part, prior, waits)
    }

    pub fn chain(&self) -> &'a ChainCounts {
        self.chain
    }

    pub fn is_unified(&self) -> bool {
        self.unified
    }

    pub fn num_token_groups(&self) -> usize {
        self.tocc.count()
    }

    pub fn num_memory_groups(&self) -> usize {
        if self.unified {
            self.tocc.count()
        } else {
            self.mocc.count()
        }
    }

    pub fn token_group(&self, x: u32) -> u32 {
        self.tok[x as usize]
    }

    pub fn memory_group(&self, m: u32) -> u32 {
        self.mem[m as usize]
    }

    /// Item id of memory `m` (bipartite mode only).
    pub fn memory_item(&self, m: u32) -> usize {
        self.chain.num_tokens() + m as usize
    }

    /// Current assignment with compact labels.
    pub fn partition(&self) -> Partition {
        let tokens = compact_labels(&self.tok);
        if self.unified {
            Partition::unified(self.chain, tokens).expect("order checked at construction")
        } else {
            Partition::new(tokens, compact_labels(&self.mem))
        }
    }

    /// Full breakdown recomputed from scratch, including the wait term.
    pub fn breakdown(&self) -> Result<DLBreakdown> {
        let part = self.partition();
        let mut b = total_dl(self.chain, &part, &self.prior)?;
        if let Some((w, mode)) = self.waits {
            b.wait_term = Some(wait_term(w, &part, mode)?);
            b = b.with_total();
        }
        Ok(b)
    }

    fn wait_per_group(&self) -> Option<&'a WaitStats> {
        match self.waits {
            Some((w, WaitMode::PerGroup)) => Some(w),
            _ => None,
        }
    }

    fn ensure_token_label(&mut self, g: u32) {
        while self.e_tok.len() <= g as usize {
            self.e_tok.push(0);
            self.hist.push(FxHashMap::default());
            self.out_rows.push(FxHashMap::default());
            if self.unified {
                self.push_memory_label();
            }
        }
    }

    fn ensure_memory_label(&mut self, g: u32) {
        while self.e_mem.len() <= g as usize {
            self.push_memory_label();
        }
    }

    fn push_memory_label(&mut self) {
        self.e_mem.push(0);
        self.wsum.push(0.0);
        self.in_rows.push(FxHashMap::default());
    }

    fn rebuild(&mut self, labels: &[u32]) {
        let n = self.chain.num_tokens();
        let m = self.chain.num_memories();
        self.tok = labels[..n].to_vec();
        self.mem = if self.unified {
            self.chain
                .memories()
                .iter()
                .map(|key| self.tok[key.0[0] as usize])
                .collect()
        } else {
            labels[n..n + m].to_vec()
        };
        let bt = self.tok.iter().max().map_or(0, |&g| g as usize + 1);
        let bm = self.mem.iter().max().map_or(0, |&g| g as usize + 1);
        self.tocc = Occupancy::new(bt);
        self.mocc = Occupancy::new(if self.unified { 0 } else { bm });
        self.e_tok.clear();
        self.hist.clear();
        self.out_rows.clear();
        self.e_mem.clear();
        self.wsum.clear();
        self.in_rows.clear();
        self.es_hist.clear();
        if bt > 0 {
            self.ensure_token_label(bt as u32 - 1);
        }
        if bm > 0 {
            self.ensure_memory_label(bm as u32 - 1);
        }
        for (x, &r) in self.tok.iter().enumerate() {
            self.tocc.add(r);
            let k = self.chain.token_count(x as u32);
            self.e_tok[r as usize] += k;
            *self.hist[r as usize].entry(k).or_insert(0) += 1;
        }
        for (mi, &s) in self.mem.iter().enumerate() {
            if !self.unified {
                self.mocc.add(s);
            }
            self.e_mem[s as usize] += self.chain.memory_count(mi as u32);
            if let Some((w, _)) = self.waits {
                self.wsum[s as usize] += w.memory_totals[mi];
            }
        }
        for &e in &self.e_mem {
            if e > 0 {
                *self.es_hist.entry(e).or_insert(0) += 1;
            }
        }
        for (x, mi, c) in self.chain.transitions() {
            let r = self.tok[x as usize];
            let s = self.mem[mi as usize];
            *self.out_rows[r as usize].entry(s).or_insert(0) += c;
            *self.in_rows[s as usize].entry(r).or_insert(0) += c;
        }
    }

    fn cell(&self, r: u32, s: u32) -> u64 {
        self.out_rows
            .get(r as usize)
            .and_then(|row| row.get(&s))
            .copied()
            .unwrap_or(0)
    }

    fn add_cell(&mut self, r: u32, s: u32, d: i64) {
        if d == 0 {
            return;
        }
        let row = &mut self.out_rows[r as usize];
        let v = row.entry(s).or_insert(0);
        *v = (*v as i64 + d) as u64;
        if *v == 0 {
            row.remove(&s);
        }
        let col = &mut self.in_rows[s as usize];
        let v = col.entry(r).or_insert(0);
        *v = (*v as i64 + d) as u64;
        if *v == 0 {
            col.remove(&r);
        }
    }

    fn move_spec(&self, item: usize, to: u32) -> MoveSpec {
        let n = self.chain.num_tokens();
        if item < n {
            let from = self.tok[item];
            let mem = if self.unified {
                self.memory_of_token[item].map(|m| (m, from, to))
            } else {
                None
            };
            MoveSpec {
                tok: Some((item as u32, from, to)),
                mem,
            }
        } else {
            let m = (item - n) as u32;
            MoveSpec {
                tok: None,
                mem: Some((m, self.mem[m as usize], to)),
            }
        }
    }

    /// Fills `self.cells` with the block-count changes of `spec`.
    fn collect_cells(&mut self, spec: MoveSpec) {
        self.cells.clear();
        let chain = self.chain;
        if let Some((x, r, w)) = spec.tok {
            for &(m, c) in chain.token_neighbors(x) {
                let s_old = self.mem[m as usize];
                let s_new = match spec.mem {
                    Some((mm, _, t)) if mm == m => t,
                    _ => s_old,
                };
                *self.cells.entry((r, s_old)).or_insert(0) -= c as i64;
                *self.cells.entry((w, s_new)).or_insert(0) += c as i64;
            }
        }
        if let Some((m, s, t)) = spec.mem {
            for &(x, c) in chain.memory_neighbors(m) {
                if matches!(spec.tok, Some((tx, _, _)) if tx == x) {
                    continue;
                }
                let r = self.tok[x as usize];
                *self.cells.entry((r, s)).or_insert(0) -= c as i64;
                *self.cells.entry((r, t)).or_insert(0) += c as i64;
            }
        }
    }

    fn group_k_term(&self, n: u64, e: u64, hist_lnf: f64) -> f64 {
        match self.prior.k_prior {
            KPrior::Uniform => lmultiset(n, e),
            KPrior::Hyperprior => {
                if n == 0 {
                    0.0
                } else {
                    ln_factorial(n) - hist_lnf + log_q(e, n)
                }
            }
        }
    }

    /// Change of one group's frequency prior when `(n, e)` becomes
    /// `(n2, e2)` and the histogram term changes by `dhist`.
    fn group_k_delta(&self, n: u64, e: u64, n2: u64, e2: u64, dhist: f64) -> f64 {
        match self.prior.k_prior {
            KPrior::Uniform => lmultiset(n2, e2) - lmultiset(n, e),
            KPrior::Hyperprior => {
                let q = |e: u64, n: u64| if n == 0 { 0.0 } else { log_q(e, n) };
                ln_factorial(n2) - ln_factorial(n) - dhist + q(e2, n2) - q(e, n)
            }
        }
    }

    fn hist_count(&self, r: u32, k: u64) -> u64 {
        self.hist[r as usize].get(&k).copied().unwrap_or(0)
    }

    fn delta_spec(&mut self, spec: MoveSpec) -> f64 {
        self.collect_cells(spec);
        let mut d = 0.0;
        for (&(r, s), &dc) in &self.cells {
            if dc != 0 {
                let e = self.cell(r, s);
                d -= ln_factorial((e as i64 + dc) as u64) - ln_factorial(e);
            }
        }
        let bn = self.tocc.count() as u64;
        let bm = self.num_memory_groups() as u64;
        let mut bn_new = bn;
        let mut bm_new = bm;
        if let Some((x, r, w)) = spec.tok {
            let k = self.chain.token_count(x);
            let (er, ew) = (self.e_tok[r as usize], self.e_tok[w as usize]);
            d += ln_factorial(er - k) - ln_factorial(er) + ln_factorial(ew + k) - ln_factorial(ew);
            let (nr, nw) = (self.tocc.size(r), self.tocc.size(w));
            let cr = self.hist_count(r, k);
            let cw = self.hist_count(w, k);
            let hr = ln_factorial(cr - 1) - ln_factorial(cr);
            let hw = ln_factorial(cw + 1) - ln_factorial(cw);
            d += self.group_k_delta(nr, er, nr - 1, er - k, hr);
            d += self.group_k_delta(nw, ew, nw + 1, ew + k, hw);
            d += ln_factorial(nr) - ln_factorial(nr - 1) + ln_factorial(nw) - ln_factorial(nw + 1);
            bn_new = bn - u64::from(nr == 1) + u64::from(nw == 0);
            let n_items = self.chain.num_tokens() as u64;
            d += ln_binom(n_items - 1, bn_new - 1) - ln_binom(n_items - 1, bn - 1);
            if self.unified {
                bm_new = bn_new;
            }
        }
        let mut margin_changes: [(u64, u64); 2] = [(0, 0); 2];
        let mut n_changes = 0;
        if let Some((m, s, t)) = spec.mem {
            let a = self.chain.memory_count(m);
            let (es, et) = (self.e_mem[s as usize], self.e_mem[t as usize]);
            d += ln_factorial(es - a) - ln_factorial(es) + ln_factorial(et + a) - ln_factorial(et);
            margin_changes = [(es, es - a), (et, et + a)];
            n_changes = 2;
            if let Some(w) = self.wait_per_group() {
                let dm = w.memory_totals[m as usize];
                let (ws, wt) = (self.wsum[s as usize], self.wsum[t as usize]);
                d += gamma_evidence(es - a, (ws - dm).max(0.0), w.alpha, w.beta)
                    - gamma_evidence(es, ws, w.alpha, w.beta)
                    + gamma_evidence(et + a, wt + dm, w.alpha, w.beta)
                    - gamma_evidence(et, wt, w.alpha, w.beta);
            }
            if !self.unified {
                let (ns, nt) = (self.mocc.size(s), self.mocc.size(t));
                d += ln_factorial(ns) - ln_factorial(ns - 1) + ln_factorial(nt) - ln_factorial(nt + 1);
                bm_new = bm - u64::from(ns == 1) + u64::from(nt == 0);
                let m_items = self.chain.num_memories() as u64;
                d += ln_binom(m_items - 1, bm_new - 1) - ln_binom(m_items - 1, bm - 1);
            }
        }
        if bn_new != bn {
            for (&e, &c) in &self.es_hist {
                d += c as f64 * (lmultiset(bn_new, e) - lmultiset(bn, e));
            }
        }
        for &(old, new) in &margin_changes[..n_changes] {
            d += lmultiset(bn_new, new) - lmultiset(bn_new, old);
        }
        if bm_new != bm {
            let e = self.chain.total();
            d += lmultiset(bm_new, e) - lmultiset(bm, e);
        }
        d
    }

    fn apply_spec(&mut self, spec: MoveSpec) {
        self.collect_cells(spec);
        let cells: Vec<((u32, u32), i64)> = self.cells.iter().map(|(&k, &v)| (k, v)).collect();
        for ((r, s), dc) in cells {
            self.add_cell(r, s, dc);
        }
        if let Some((x, r, w)) = spec.tok {
            let k = self.chain.token_count(x);
            self.e_tok[r as usize] -= k;
            self.e_tok[w as usize] += k;
            self.tocc.remove(r);
            self.tocc.add(w);
            let cr = self.hist_count(r, k);
            if cr == 1 {
                self.hist[r as usize].remove(&k);
            } else {
                self.hist[r as usize].insert(k, cr - 1);
            }
            let cw = self.hist_count(w, k);
            self.hist[w as usize].insert(k, cw + 1);
            self.tok[x as usize] = w;
        }
        if let Some((m, s, t)) = spec.mem {
            let a = self.chain.memory_count(m);
            for (g, new) in [(s, self.e_mem[s as usize] - a), (t, self.e_mem[t as usize] + a)] {
                let old = self.e_mem[g as usize];
                if old > 0 {
                    let c = self.es_hist.get_mut(&old).unwrap();
                    *c -= 1;
                    if *c == 0 {
                        self.es_hist.remove(&old);
                    }
                }
                if new > 0 {
                    *self.es_hist.entry(new).or_insert(0) += 1;
                }
                self.e_mem[g as usize] = new;
            }
            if let Some((w, _)) = self.waits {
                let dm = w.memory_totals[m as usize];
                self.wsum[s as usize] = (self.wsum[s as usize] - dm).max(0.0);
                self.wsum[t as usize] += dm;
                if self.e_mem[s as usize] == 0 {
                    self.wsum[s as usize] = 0.0;
                }
            }
            if !self.unified {
                self.mocc.remove(s);
                self.mocc.add(t);
            }
            self.mem[m as usize] = t;
        }
    }

    /// Objective from the aggregates, equal to `breakdown().total`.
    pub fn aggregate_total(&self) -> f64 {
        let bn = self.tocc.count() as u64;
        let bm = self.num_memory_groups() as u64;
        let mut seq = self.const_seq;
        let mut k = 0.0;
        for &r in self.tocc.nonempty() {
            let r = r as usize;
            seq += ln_factorial(self.e_tok[r]);
            let hist_lnf: f64 = self.hist[r].values().map(|&c| ln_factorial(c)).sum();
            k += self.group_k_term(self.tocc.size(r as u32), self.e_tok[r], hist_lnf);
            for &e in self.out_rows[r].values() {
                seq -= ln_factorial(e);
            }
        }
        let mut ers = 0.0;
        for (&e, &c) in &self.es_hist {
            seq += c as f64 * ln_factorial(e);
            ers += c as f64 * lmultiset(bn, e);
        }
        let es = lmultiset(bm, self.chain.total());
        let part_tok = partition_prior(self.chain.num_tokens() as u64, self.tocc.sizes(), bn);
        let part_mem = if self.unified {
            0.0
        } else {
            partition_prior(self.chain.num_memories() as u64, self.mocc.sizes(), bm)
        };
        let wait = match self.waits {
            Some((w, WaitMode::PerGroup)) => self
                .e_mem
                .iter()
                .zip(&self.wsum)
                .map(|(&e, &d)| gamma_evidence(e, d, w.alpha, w.beta))
                .sum(),
            Some((w, WaitMode::PerMemory)) => {
                crate::waits::wait_evidence_per_memory(w).unwrap_or(f64::NAN)
            }
            None => 0.0,
        };
        seq + k + ers + es + part_tok + part_mem + wait
    }
}

fn partition_prior(m: u64, sizes: &[u64], b: u64) -> f64 {
    if m == 0 || b == 0 {
        return 0.0;
    }
    let sum: f64 = sizes.iter().map(|&n| ln_factorial(n)).sum();
    ln_factorial(m) - sum + ln_binom(m - 1, b - 1)
}

impl BlockState for ChainState<'_> {
    fn num_items(&self) -> usize {
        if self.unified {
            self.chain.num_tokens()
        } else {
            self.chain.num_tokens() + self.chain.num_memories()
        }
    }

    fn num_sides(&self) -> usize {
        if self.unified {
            1
        } else {
            2
        }
    }

    fn side(&self, item: usize) -> usize {
        usize::from(item >= self.chain.num_tokens())
    }

    fn group(&self, item: usize) -> u32 {
        let n = self.chain.num_tokens();
        if item < n {
            self.tok[item]
        } else {
            self.mem[item - n]
        }
    }

    fn groups(&self, side: usize) -> &[u32] {
        if side == 0 {
            self.tocc.nonempty()
        } else {
            self.mocc.nonempty()
        }
    }

    fn group_size(&self, side: usize, g: u32) -> u64 {
        if side == 0 {
            self.tocc.size(g)
        } else {
            self.mocc.size(g)
        }
    }

    fn fresh_group(&mut self, side: usize) -> u32 {
        if side == 0 {
            let (g, _) = self.tocc.fresh();
            self.ensure_token_label(g);
            g
        } else {
            let (g, _) = self.mocc.fresh();
            self.ensure_memory_label(g);
            g
        }
    }

    fn item_degree(&self, item: usize) -> u64 {
        let n = self.chain.num_tokens();
        if item < n {
            let mut d = self.chain.token_count(item as u32);
            if self.unified {
                if let Some(m) = self.memory_of_token[item] {
                    d += self.chain.memory_count(m);
                }
            }
            d
        } else {
            self.chain.memory_count((item - n) as u32)
        }
    }

    fn for_each_neighbor(&self, item: usize, f: &mut dyn FnMut(u32, u64)) {
        let n = self.chain.num_tokens();
        if item < n {
            for &(m, c) in self.chain.token_neighbors(item as u32) {
                f(self.mem[m as usize], c);
            }
            if self.unified {
                if let Some(m) = self.memory_of_token[item] {
                    for &(x, c) in self.chain.memory_neighbors(m) {
                        f(self.tok[x as usize], c);
                    }
                }
            }
        } else {
            for &(x, c) in self.chain.memory_neighbors((item - n) as u32) {
                f(self.tok[x as usize], c);
            }
        }
    }

    fn block_count(&self, side: usize, w: u32, t: u32) -> u64 {
        if self.unified {
            self.cell(w, t) + self.cell(t, w)
        } else if side == 0 {
            self.cell(w, t)
        } else {
            self.cell(t, w)
        }
    }

    fn block_degree(&self, side: usize, t: u32) -> u64 {
        if self.unified {
            self.e_tok[t as usize] + self.e_mem[t as usize]
        } else if side == 0 {
            self.e_mem[t as usize]
        } else {
            self.e_tok[t as usize]
        }
    }

    fn sample_block<R: Rng + ?Sized>(&self, side: usize, t: u32, rng: &mut R) -> u32 {
        let total = self.block_degree(side, t);
        let mut u = rng.random_range(0..total);
        let (first, second): (&FxHashMap<u32, u64>, Option<&FxHashMap<u32, u64>>) = if self.unified {
            (&self.in_rows[t as usize], Some(&self.out_rows[t as usize]))
        } else if side == 0 {
            (&self.in_rows[t as usize], None)
        } else {
            (&self.out_rows[t as usize], None)
        };
        for (&g, &c) in first.iter().chain(second.into_iter().flatten()) {
            if u < c {
                return g;
            }
            u -= c;
        }
        unreachable!("block degree disagrees with its rows")
    }

    fn delta(&mut self, item: usize, to: u32) -> f64 {
        if self.group(item) == to {
            return 0.0;
        }
        let spec = self.move_spec(item, to);
        self.delta_spec(spec)
    }

    fn apply(&mut self, item: usize, to: u32) {
        if self.group(item) == to {
            return;
        }
        if self.side(item) == 0 {
            self.ensure_token_label(to);
        } else {
            self.ensure_memory_label(to);
        }
        let spec = self.move_spec(item, to);
        self.apply_spec(spec);
    }

    fn total(&self) -> f64 {
        self.aggregate_total()
    }

    fn labels(&self) -> Vec<u32> {
        let mut l = self.tok.clone();
        if !self.unified {
            l.extend_from_slice(&self.mem);
        }
        l
    }

    fn restore(&mut self, labels: &[u32]) {
        self.rebuild(labels);
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::chain::{build_chain, ChainOptions};
    use crate::sequence::Sequence;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn chain(tokens: Vec<u32>, n_tok: usize, order: usize) -> ChainCounts {
        build_chain(&Sequence::from_ids(tokens, n_tok).unwrap(), order, ChainOptions::default()).unwrap()
    }

    fn random_tokens(rng: &mut ChaCha8Rng, len: usize, n: u32) -> Vec<u32> {
        (0..len).map(|_| rng.random_range(0..n)).collect()
    }

    #[test]
    fn aggregate_total_matches_scratch() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        for order in 1..=2 {
            let c = chain(random_tokens(&mut rng, 80, 5), 5, order);
            let part = Partition::new(
                (0..5).map(|x| x % 2).collect(),
                (0..c.num_memories() as u32).map(|m| m % 3).collect(),
            );
            for prior in [KPrior::Uniform, KPrior::Hyperprior] {
                let cfg = PriorConfig { k_prior: prior };
                let st = ChainState::new(&c, &part, cfg, None).unwrap();
                let scratch = total_dl(&c, &part, &cfg).unwrap().total;
                assert!((st.total() - scratch).abs() < 1e-9, "{} vs {}", st.total(), scratch);
            }
        }
    }

    #[test]
    fn random_moves_match_scratch() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        for unified in [false, true] {
            let c = chain(random_tokens(&mut rng, 60, 6), 6, 1);
            let mut st = ChainState::singletons(&c, unified, PriorConfig::default(), None).unwrap();
            for _ in 0..400 {
                let item = rng.random_range(0..st.num_items());
                let side = st.side(item);
                let to = if rng.random_bool(0.2) {
                    st.fresh_group(side)
                } else {
                    let gs = st.groups(side);
                    gs[rng.random_range(0..gs.len())]
                };
                let before = st.breakdown().unwrap().total;
                let d = st.delta(item, to);
                st.apply(item, to);
                let after = st.breakdown().unwrap().total;
                assert!((after - before - d).abs() < 1e-9, "delta {d} vs {}", after - before);
                assert!((st.total() - after).abs() < 1e-8);
            }
        }
    }

    #[test]
    fn no_op_move_is_zero() {
        let c = chain(vec![0, 1, 0, 1, 2], 3, 1);
        let mut st = ChainState::singletons(&c, false, PriorConfig::default(), None).unwrap();
        let g = st.group(1);
        assert_eq!(st.delta(1, g), 0.0);
    }
}
