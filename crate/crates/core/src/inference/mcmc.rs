use rand::seq::SliceRandom;
use rand::Rng;
use rustc_hash::{FxHashMap, FxHashSet};

use super::{BlockState, FitConfig};

/// Greedy moves must lower the objective by more than this.
const GREEDY_TOLERANCE: f64 = 1e-10;
/// A candidate must beat the incumbent by more than this to replace it.
const BEST_TOLERANCE: f64 = 1e-9;

#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct SweepStats {
    pub attempted: u64,
    pub accepted: u64,
    /// Sum of the accepted deltas.
    pub delta: f64,
}

impl SweepStats {
    fn absorb(&mut self, other: SweepStats) {
        self.attempted += other.attempted;
        self.accepted += other.accepted;
        self.delta += other.delta;
    }
}

fn uniform_target<S: BlockState, R: Rng + ?Sized>(s: &mut S, side: usize, rng: &mut R) -> u32 {
    let b = s.groups(side).len();
    let i = rng.random_range(0..=b);
    if i == b {
        s.fresh_group(side)
    } else {
        s.groups(side)[i]
    }
}

/// Draws a target group for `item`.
///
/// A random edge of the item leads to a neighbor in group `t`. With
/// probability `eps B / (d_t + eps B)` the target is uniform over the `B`
/// groups of the item's side plus one empty group; otherwise it is `w` with
/// probability `e_wt / d_t`.
pub fn sample_proposal<S: BlockState, R: Rng + ?Sized>(
    s: &mut S,
    item: usize,
    eps: f64,
    rng: &mut R,
) -> u32 {
    let side = s.side(item);
    let deg = s.item_degree(item);
    if deg == 0 {
        return uniform_target(s, side, rng);
    }
    let mut u = rng.random_range(0..deg);
    let mut t = None;
    s.for_each_neighbor(item, &mut |g, c| {
        if t.is_none() {
            if u < c {
                t = Some(g);
            } else {
                u -= c;
            }
        }
    });
    let t = t.expect("item degree disagrees with its neighbors");
    let b = s.groups(side).len() as f64;
    let dt = s.block_degree(side, t) as f64;
    let rho = eps * b / (dt + eps * b);
    if rng.random::<f64>() < rho {
        uniform_target(s, side, rng)
    } else {
        s.sample_block(side, t, rng)
    }
}

/// Probability that [`sample_proposal`] returns `target` (any empty label
/// stands for the single fresh-group option).
pub fn proposal_probability<S: BlockState>(s: &S, item: usize, target: u32, eps: f64) -> f64 {
    let side = s.side(item);
    let b = s.groups(side).len() as f64;
    let fresh = s.group_size(side, target) == 0;
    let deg = s.item_degree(item);
    if deg == 0 {
        return 1.0 / (b + 1.0);
    }
    let mut p = 0.0;
    s.for_each_neighbor(item, &mut |t, c| {
        let dt = s.block_degree(side, t) as f64;
        let rho = eps * b / (dt + eps * b);
        let mut q = rho / (b + 1.0);
        if !fresh {
            q += (1.0 - rho) * s.block_count(side, target, t) as f64 / dt;
        }
        p += c as f64 / deg as f64 * q;
    });
    p
}

/// One Metropolis-Hastings step for `item` at inverse temperature `beta`
/// (`None` accepts only strict improvements). Returns the accepted delta.
pub fn mh_step<S: BlockState, R: Rng + ?Sized>(
    s: &mut S,
    item: usize,
    eps: f64,
    beta: Option<f64>,
    rng: &mut R,
) -> Option<f64> {
    let side = s.side(item);
    let r = s.group(item);
    let w = sample_proposal(s, item, eps, rng);
    if w == r || (s.group_size(side, r) == 1 && s.group_size(side, w) == 0) {
        return None;
    }
    let d = s.delta(item, w);
    match beta {
        None => {
            if d < -GREEDY_TOLERANCE {
                s.apply(item, w);
                Some(d)
            } else {
                None
            }
        }
        Some(beta) => {
            let forward = proposal_probability(s, item, w, eps);
            s.apply(item, w);
            let backward = proposal_probability(s, item, r, eps);
            let log_a = -beta * d + backward.ln() - forward.ln();
            if log_a >= 0.0 || rng.random::<f64>().ln() < log_a {
                Some(d)
            } else {
                s.apply(item, r);
                None
            }
        }
    }
}

/// One pass over every item in random order.
pub fn mh_sweep<S: BlockState, R: Rng + ?Sized>(
    s: &mut S,
    eps: f64,
    beta: Option<f64>,
    rng: &mut R,
) -> SweepStats {
    let mut order: Vec<usize> = (0..s.num_items()).collect();
    order.shuffle(rng);
    let mut stats = SweepStats::default();
    for item in order {
        stats.attempted += 1;
        if let Some(d) = mh_step(s, item, eps, beta, rng) {
            stats.accepted += 1;
            stats.delta += d;
        }
    }
    stats
}

#[derive(Debug, Clone)]
pub struct SearchOutcome {
    pub labels: Vec<u32>,
    pub total: f64,
    /// Best objective after each level, nonincreasing.
    pub trace: Vec<f64>,
    pub sweeps: SweepStats,
}

struct Best {
    labels: Vec<u32>,
    total: f64,
}

impl Best {
    fn offer<S: BlockState>(&mut self, s: &S) -> bool {
        let t = s.total();
        if t < self.total - BEST_TOLERANCE {
            self.total = t;
            self.labels = s.labels();
            true
        } else {
            false
        }
    }
}

fn sweeps_at_level<S: BlockState, R: Rng + ?Sized>(
    s: &mut S,
    cfg: &FitConfig,
    count: usize,
    rng: &mut R,
) -> SweepStats {
    let mut stats = SweepStats::default();
    for _ in 0..count {
        let st = mh_sweep(s, cfg.epsilon, cfg.beta, rng);
        stats.absorb(st);
        if cfg.beta.is_none() && st.accepted == 0 {
            break;
        }
    }
    stats
}

/// Change of the objective when every item of `members` joins group `to`.
/// The state is left unchanged.
pub(crate) fn merge_delta<S: BlockState>(s: &mut S, members: &[usize], to: u32) -> f64 {
    let from = s.group(members[0]);
    let mut d = 0.0;
    for &i in members {
        d += s.delta(i, to);
        s.apply(i, to);
    }
    for &i in members.iter().rev() {
        s.apply(i, from);
    }
    d
}

fn members_by_group<S: BlockState>(s: &S, side: usize) -> FxHashMap<u32, Vec<usize>> {
    let mut members: FxHashMap<u32, Vec<usize>> = FxHashMap::default();
    for i in 0..s.num_items() {
        if s.side(i) == side {
            members.entry(s.group(i)).or_default().push(i);
        }
    }
    members
}

/// For every group of `side`, the best of a few sampled merge targets, as
/// `(delta, group, target)` sorted by increasing delta.
fn merge_candidates<S: BlockState, R: Rng + ?Sized>(
    s: &mut S,
    side: usize,
    members: &FxHashMap<u32, Vec<usize>>,
    cfg: &FitConfig,
    rng: &mut R,
) -> Vec<(f64, u32, u32)> {
    let mut groups: Vec<u32> = s.groups(side).to_vec();
    groups.sort_unstable();
    let mut candidates: Vec<(f64, u32, u32)> = Vec::with_capacity(groups.len());
    for &g in &groups {
        let mem = &members[&g];
        let mut tried: Vec<u32> = Vec::new();
        for _ in 0..2 * cfg.merge_candidates {
            if tried.len() >= cfg.merge_candidates {
                break;
            }
            let item = mem[rng.random_range(0..mem.len())];
            let h = sample_proposal(s, item, cfg.epsilon, rng);
            if h != g && s.group_size(side, h) > 0 && !tried.contains(&h) {
                tried.push(h);
            }
        }
        if tried.is_empty() {
            let h = groups[rng.random_range(0..groups.len())];
            if h == g {
                continue;
            }
            tried.push(h);
        }
        let mut best: Option<(f64, u32)> = None;
        for h in tried {
            let d = merge_delta(s, mem, h);
            if best.is_none_or(|(bd, _)| d < bd) {
                best = Some((d, h));
            }
        }
        if let Some((d, h)) = best {
            candidates.push((d, g, h));
        }
    }
    candidates.sort_by(|a, b| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1)).then(a.2.cmp(&b.2)));
    candidates
}

/// Merges groups of `side` until at most `target` remain, choosing each
/// group's best sampled merge and applying the cheapest merges first.
pub(crate) fn merge_down<S: BlockState, R: Rng + ?Sized>(
    s: &mut S,
    side: usize,
    target: usize,
    cfg: &FitConfig,
    rng: &mut R,
) {
    let mut rounds = 0;
    while s.groups(side).len() > target.max(1) && rounds < 16 {
        rounds += 1;
        let members = members_by_group(s, side);
        let candidates = merge_candidates(s, side, &members, cfg, rng);
        let needed = s.groups(side).len() - target.max(1);
        let mut sources: FxHashSet<u32> = FxHashSet::default();
        let mut targets: FxHashSet<u32> = FxHashSet::default();
        let mut done = 0;
        for (_, g, h) in candidates {
            if done >= needed {
                break;
            }
            if sources.contains(&g) || targets.contains(&g) || sources.contains(&h) {
                continue;
            }
            for &i in &members[&g] {
                s.apply(i, h);
            }
            sources.insert(g);
            targets.insert(h);
            done += 1;
        }
    }
}

/// Applies sampled merges that lower the objective, re-checking each one
/// against the current state, alternated with greedy sweeps. Returns the
/// number of merges applied.
pub(crate) fn merge_polish<S: BlockState, R: Rng + ?Sized>(s: &mut S, cfg: &FitConfig, rng: &mut R) -> usize {
    let mut applied = 0;
    for _ in 0..64 {
        let mut round = 0;
        for side in 0..s.num_sides() {
            if s.groups(side).len() <= 1 {
                continue;
            }
            let members = members_by_group(s, side);
            let candidates = merge_candidates(s, side, &members, cfg, rng);
            let mut gone: FxHashSet<u32> = FxHashSet::default();
            for (d, g, h) in candidates {
                if d >= -GREEDY_TOLERANCE {
                    break;
                }
                if gone.contains(&g) || gone.contains(&h) {
                    continue;
                }
                if merge_delta(s, &members[&g], h) < -GREEDY_TOLERANCE {
                    for &i in &members[&g] {
                        s.apply(i, h);
                    }
                    gone.insert(g);
                    round += 1;
                }
            }
        }
        if round == 0 {
            break;
        }
        applied += round;
        sweeps_at_level(s, &FitConfig { beta: None, ..cfg.clone() }, cfg.sweeps_per_level, rng);
    }
    applied
}

/// Moves each item of `movable` to the group of its side with the lowest
/// objective (staying put included), then runs greedy sweeps over those
/// items only. Every other item keeps its group.
pub fn restricted_fit<S: BlockState, R: Rng + ?Sized>(s: &mut S, movable: &[usize], cfg: &FitConfig, rng: &mut R) {
    for &i in movable {
        let here = s.group(i);
        let groups = s.groups(s.side(i)).to_vec();
        let mut best = (0.0, here);
        for g in groups {
            if g != here {
                let d = s.delta(i, g);
                if d < best.0 - GREEDY_TOLERANCE {
                    best = (d, g);
                }
            }
        }
        if best.1 != here {
            s.apply(i, best.1);
        }
    }
    let mut order = movable.to_vec();
    for _ in 0..cfg.refine_sweeps {
        order.shuffle(rng);
        let accepted = order
            .iter()
            .filter(|&&i| mh_step(s, i, cfg.epsilon, None, rng).is_some())
            .count();
        if accepted == 0 {
            break;
        }
    }
}

/// Multilevel search: sweeps at each level of a geometric ladder of group
/// counts, starting from the state as given (usually all singletons), then a
/// refinement of the best state found. The state is left at the returned
/// labels. `on_level` sees the state after each level's sweeps.
pub fn agglomerative_search<S: BlockState, R: Rng + ?Sized>(
    s: &mut S,
    cfg: &FitConfig,
    rng: &mut R,
    mut on_level: impl FnMut(&S),
) -> SearchOutcome {
    let mut best = Best {
        labels: s.labels(),
        total: s.total(),
    };
    let mut trace = Vec::new();
    let mut sweeps = SweepStats::default();
    loop {
        sweeps.absorb(sweeps_at_level(s, cfg, cfg.sweeps_per_level, rng));
        best.offer(s);
        on_level(s);
        trace.push(best.total);
        let sides = s.num_sides();
        if (0..sides).all(|side| s.groups(side).len() <= 1) {
            break;
        }
        for side in 0..sides {
            let b = s.groups(side).len();
            if b > 1 {
                let target = ((b as f64 / cfg.sigma_levels).ceil() as usize).min(b - 1);
                merge_down(s, side, target, cfg, rng);
            }
        }
    }
    s.restore(&best.labels);
    if let Some((b0, b1)) = cfg.beta_anneal {
        let steps = cfg.refine_sweeps.max(2);
        for k in 0..steps {
            let f = k as f64 / (steps - 1) as f64;
            let beta = b0 * (b1 / b0).powf(f);
            sweeps.absorb(mh_sweep(s, cfg.epsilon, Some(beta), rng));
            best.offer(s);
        }
        s.restore(&best.labels);
    }
    for _ in 0..cfg.refine_sweeps {
        let st = mh_sweep(s, cfg.epsilon, None, rng);
        sweeps.absorb(st);
        if st.accepted == 0 {
            break;
        }
    }
    merge_polish(s, cfg, rng);
    best.offer(s);
    s.restore(&best.labels);
    trace.push(best.total);
    SearchOutcome {
        labels: best.labels,
        total: best.total,
        trace,
        sweeps,
    }
}
