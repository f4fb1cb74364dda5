use rand::Rng;
use rustc_hash::FxHashMap;

use crate::combinatorics::{ln_binom, ln_factorial, lmultiset};
use crate::dl::compact_labels;
use crate::edges::EdgeStream;
use crate::inference::{BlockState, Occupancy};

const LN_2: f64 = std::f64::consts::LN_2;

/// Node partition of an aggregated multigraph with incrementally maintained
/// group-pair edge counts. The objective is the static term plus the node
/// partition prior.
#[derive(Debug, Clone)]
pub struct NodeState<'a> {
    stream: &'a EdgeStream,
    directed: bool,
    /// Neighbors other than the node itself: all of them when undirected,
    /// out-neighbors when directed.
    out_adj: Vec<Vec<(u32, u64)>>,
    /// In-neighbors other than the node itself (directed only).
    in_adj: Vec<Vec<(u32, u64)>>,
    self_loops: Vec<u64>,
    c: Vec<u32>,
    occ: Occupancy,
    /// `m_rs`; undirected rows are symmetric with `m_rr` on the diagonal.
    out_rows: Vec<FxHashMap<u32, u64>>,
    in_rows: Vec<FxHashMap<u32, u64>>,
    e_out: Vec<u64>,
    e_in: Vec<u64>,
    group_loops: Vec<u64>,
    cells: FxHashMap<(u32, u32), i64>,
    const_term: f64,
}

impl<'a> NodeState<'a> {
    /// State at `groups`; labels are kept as given.
    pub fn new(stream: &'a EdgeStream, groups: &[u32]) -> Self {
        let n = stream.num_nodes();
        let directed = stream.directed();
        let mut out_adj = vec![Vec::new(); n];
        let mut in_adj = vec![Vec::new(); n];
        let mut self_loops = vec![0u64; n];
        let mut agg: Vec<((u32, u32), u64)> = stream.aggregated().iter().map(|(&k, &v)| (k, v)).collect();
        agg.sort_unstable();
        for ((i, j), a) in agg {
            if i == j {
                self_loops[i as usize] += a;
            } else if directed {
                out_adj[i as usize].push((j, a));
                in_adj[j as usize].push((i, a));
            } else {
                out_adj[i as usize].push((j, a));
                out_adj[j as usize].push((i, a));
            }
        }
        let degrees: f64 = (0..n as u32)
            .map(|i| {
                if directed {
                    ln_factorial(stream.out_degree(i)) + ln_factorial(stream.in_degree(i))
                } else {
                    ln_factorial(stream.degree(i))
                }
            })
            .sum();
        let mut st = NodeState {
            stream,
            directed,
            out_adj,
            in_adj,
            self_loops,
            c: Vec::new(),
            occ: Occupancy::default(),
            out_rows: Vec::new(),
            in_rows: Vec::new(),
            e_out: Vec::new(),
            e_in: Vec::new(),
            group_loops: Vec::new(),
            cells: FxHashMap::default(),
            const_term: -degrees,
        };
        st.rebuild(groups);
        st
    }

    pub fn singletons(stream: &'a EdgeStream) -> Self {
        let groups: Vec<u32> = (0..stream.num_nodes() as u32).collect();
        Self::new(stream, &groups)
    }

    pub fn stream(&self) -> &'a EdgeStream {
        self.stream
    }

    pub fn num_groups(&self) -> usize {
        self.occ.count()
    }

    pub fn groups_of_nodes(&self) -> Vec<u32> {
        compact_labels(&self.c)
    }

    fn ensure_label(&mut self, g: u32) {
        while self.e_out.len() <= g as usize {
            self.out_rows.push(FxHashMap::default());
            self.in_rows.push(FxHashMap::default());
            self.e_out.push(0);
            self.e_in.push(0);
            self.group_loops.push(0);
        }
    }

    fn rebuild(&mut self, labels: &[u32]) {
        self.c = labels.to_vec();
        let b = labels.iter().max().map_or(0, |&g| g as usize + 1);
        self.occ = Occupancy::new(b);
        self.out_rows.clear();
        self.in_rows.clear();
        self.e_out.clear();
        self.e_in.clear();
        self.group_loops.clear();
        if b > 0 {
            self.ensure_label(b as u32 - 1);
        }
        for (i, &g) in self.c.iter().enumerate() {
            self.occ.add(g);
            let i = i as u32;
            if self.directed {
                self.e_out[g as usize] += self.stream.out_degree(i);
                self.e_in[g as usize] += self.stream.in_degree(i);
            } else {
                self.e_out[g as usize] += self.stream.degree(i);
            }
            self.group_loops[g as usize] += self.self_loops[i as usize];
        }
        let agg: Vec<((u32, u32), u64)> = self.stream.aggregated().iter().map(|(&k, &v)| (k, v)).collect();
        for ((i, j), a) in agg {
            let (r, s) = (self.c[i as usize], self.c[j as usize]);
            self.add_cell(r, s, a as i64);
        }
    }

    fn canonical(&self, r: u32, s: u32) -> (u32, u32) {
        if self.directed || r <= s {
            (r, s)
        } else {
            (s, r)
        }
    }

    /// `m_rs`; for undirected graphs `m_rs = m_sr`.
    pub fn m(&self, r: u32, s: u32) -> u64 {
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
        let (r, s) = self.canonical(r, s);
        let bump = |row: &mut FxHashMap<u32, u64>, k: u32| {
            let v = row.entry(k).or_insert(0);
            *v = (*v as i64 + d) as u64;
            if *v == 0 {
                row.remove(&k);
            }
        };
        bump(&mut self.out_rows[r as usize], s);
        if self.directed {
            bump(&mut self.in_rows[s as usize], r);
        } else if r != s {
            bump(&mut self.out_rows[s as usize], r);
        }
    }

    fn collect_cells(&mut self, i: usize, a: u32, b: u32) {
        self.cells.clear();
        for &(j, m) in &self.out_adj[i] {
            let g = self.c[j as usize];
            let old = self.canonical(a, g);
            let new = self.canonical(b, g);
            *self.cells.entry(old).or_insert(0) -= m as i64;
            *self.cells.entry(new).or_insert(0) += m as i64;
        }
        for &(j, m) in &self.in_adj[i] {
            let g = self.c[j as usize];
            *self.cells.entry((g, a)).or_insert(0) -= m as i64;
            *self.cells.entry((g, b)).or_insert(0) += m as i64;
        }
        let l = self.self_loops[i] as i64;
        if l > 0 {
            *self.cells.entry((a, a)).or_insert(0) -= l;
            *self.cells.entry((b, b)).or_insert(0) += l;
        }
    }

    fn pair_labels(&self, c: u64) -> u64 {
        if self.directed {
            c * c
        } else {
            c * (c + 1) / 2
        }
    }

    /// Degree-prior and margin terms of one group.
    fn group_terms(&self, n: u64, e_out: u64, e_in: u64) -> f64 {
        if self.directed {
            ln_factorial(e_out) + ln_factorial(e_in) + lmultiset(n, e_out) + lmultiset(n, e_in)
        } else {
            ln_factorial(e_out) + lmultiset(n, e_out)
        }
    }

    fn node_degrees(&self, i: usize) -> (u64, u64) {
        let i = i as u32;
        if self.directed {
            (self.stream.out_degree(i), self.stream.in_degree(i))
        } else {
            (self.stream.degree(i), 0)
        }
    }

    /// Static term of the current partition, excluding the node partition prior.
    pub fn static_total(&self) -> f64 {
        let mut s = self.const_term;
        for &r in self.occ.nonempty() {
            let ri = r as usize;
            s += self.group_terms(self.occ.size(r), self.e_out[ri], self.e_in[ri]);
            for (&t, &m) in &self.out_rows[ri] {
                if self.directed || t >= r {
                    s -= ln_factorial(m);
                }
            }
            if !self.directed {
                s -= LN_2 * (self.m(r, r) - self.group_loops[ri]) as f64;
            }
        }
        let c = self.occ.count() as u64;
        s + lmultiset(self.pair_labels(c), self.stream.len() as u64)
    }

    pub fn partition_prior(&self) -> f64 {
        let n = self.c.len() as u64;
        let b = self.occ.count() as u64;
        if n == 0 {
            return 0.0;
        }
        let sum: f64 = self.occ.sizes().iter().map(|&s| ln_factorial(s)).sum();
        ln_factorial(n) - sum + ln_binom(n - 1, b - 1)
    }
}

impl BlockState for NodeState<'_> {
    fn num_items(&self) -> usize {
        self.c.len()
    }

    fn num_sides(&self) -> usize {
        1
    }

    fn side(&self, _item: usize) -> usize {
        0
    }

    fn group(&self, item: usize) -> u32 {
        self.c[item]
    }

    fn groups(&self, _side: usize) -> &[u32] {
        self.occ.nonempty()
    }

    fn group_size(&self, _side: usize, g: u32) -> u64 {
        self.occ.size(g)
    }

    fn fresh_group(&mut self, _side: usize) -> u32 {
        let (g, _) = self.occ.fresh();
        self.ensure_label(g);
        g
    }

    fn item_degree(&self, item: usize) -> u64 {
        let out: u64 = self.out_adj[item].iter().map(|&(_, m)| m).sum();
        let inn: u64 = self.in_adj[item].iter().map(|&(_, m)| m).sum();
        out + inn + self.self_loops[item]
    }

    fn for_each_neighbor(&self, item: usize, f: &mut dyn FnMut(u32, u64)) {
        for &(j, m) in self.out_adj[item].iter().chain(&self.in_adj[item]) {
            f(self.c[j as usize], m);
        }
        if self.self_loops[item] > 0 {
            f(self.c[item], self.self_loops[item]);
        }
    }

    fn block_count(&self, _side: usize, w: u32, t: u32) -> u64 {
        if self.directed {
            self.m(w, t) + self.m(t, w)
        } else if w == t {
            2 * self.m(t, t)
        } else {
            self.m(w, t)
        }
    }

    fn block_degree(&self, _side: usize, t: u32) -> u64 {
        self.e_out[t as usize] + self.e_in[t as usize]
    }

    fn sample_block<R: Rng + ?Sized>(&self, side: usize, t: u32, rng: &mut R) -> u32 {
        let total = self.block_degree(side, t);
        let mut u = rng.random_range(0..total);
        let ti = t as usize;
        let rows: [&FxHashMap<u32, u64>; 2] = [&self.out_rows[ti], &self.in_rows[ti]];
        for row in rows {
            for (&g, &m) in row {
                let w = if !self.directed && g == t { 2 * m } else { m };
                if u < w {
                    return g;
                }
                u -= w;
            }
        }
        unreachable!("block degree disagrees with its rows")
    }

    fn delta(&mut self, item: usize, to: u32) -> f64 {
        let a = self.c[item];
        if a == to {
            return 0.0;
        }
        self.ensure_label(to);
        let b = to;
        self.collect_cells(item, a, b);
        let mut d = 0.0;
        let mut diag = [0i64; 2];
        for (&(r, s), &dm) in &self.cells {
            if dm == 0 {
                continue;
            }
            let m = self.m(r, s);
            d -= ln_factorial((m as i64 + dm) as u64) - ln_factorial(m);
            if r == s {
                if r == a {
                    diag[0] += dm;
                } else if r == b {
                    diag[1] += dm;
                }
            }
        }
        if !self.directed {
            let l = self.self_loops[item] as i64;
            // 2^(m_rr - loops_r) changes by the diagonal change minus the loop change
            d -= LN_2 * ((diag[0] + l) + (diag[1] - l)) as f64;
        }
        let (dout, din) = self.node_degrees(item);
        let (na, nb) = (self.occ.size(a), self.occ.size(b));
        let (ai, bi) = (a as usize, b as usize);
        d += self.group_terms(na - 1, self.e_out[ai] - dout, self.e_in[ai] - din)
            - self.group_terms(na, self.e_out[ai], self.e_in[ai]);
        d += self.group_terms(nb + 1, self.e_out[bi] + dout, self.e_in[bi] + din)
            - self.group_terms(nb, self.e_out[bi], self.e_in[bi]);
        let c = self.occ.count() as u64;
        let c2 = c - u64::from(na == 1) + u64::from(nb == 0);
        if c2 != c {
            let e = self.stream.len() as u64;
            d += lmultiset(self.pair_labels(c2), e) - lmultiset(self.pair_labels(c), e);
        }
        let n = self.c.len() as u64;
        d += ln_factorial(na) - ln_factorial(na - 1) + ln_factorial(nb) - ln_factorial(nb + 1);
        d += ln_binom(n - 1, c2 - 1) - ln_binom(n - 1, c - 1);
        d
    }

    fn apply(&mut self, item: usize, to: u32) {
        let a = self.c[item];
        if a == to {
            return;
        }
        self.ensure_label(to);
        self.collect_cells(item, a, to);
        let cells: Vec<((u32, u32), i64)> = self.cells.iter().map(|(&k, &v)| (k, v)).collect();
        for ((r, s), dm) in cells {
            self.add_cell(r, s, dm);
        }
        let (dout, din) = self.node_degrees(item);
        self.e_out[a as usize] -= dout;
        self.e_in[a as usize] -= din;
        self.e_out[to as usize] += dout;
        self.e_in[to as usize] += din;
        let l = self.self_loops[item];
        self.group_loops[a as usize] -= l;
        self.group_loops[to as usize] += l;
        self.occ.remove(a);
        self.occ.add(to);
        self.c[item] = to;
    }

    fn total(&self) -> f64 {
        self.static_total() + self.partition_prior()
    }

    fn labels(&self) -> Vec<u32> {
        self.c.clone()
    }

    fn restore(&mut self, labels: &[u32]) {
        self.rebuild(labels);
    }
}
