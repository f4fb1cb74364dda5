use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::{label_correction, label_sequence, temporal_dl, LabelChain, NodeState};
use crate::chain::ChainCounts;
use crate::dl::{compact_labels, total_dl, DLBreakdown, Partition, PriorConfig};
use crate::edges::EdgeStream;
use crate::error::{input, Error, Result};
use crate::inference::{agglomerative_search, fit_chain, mh_sweep, restart_seed, BlockState, FitConfig};

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct TemporalConfig {
    /// Order of the label chain; 0 is the static model.
    pub order: usize,
    /// Search settings, shared by the node and the label searches.
    /// `fit.unified` selects a unified label partition; `fit.order` is ignored.
    pub fit: FitConfig,
    /// Rounds of alternating node and label refinement.
    pub rounds: usize,
}

impl Default for TemporalConfig {
    fn default() -> Self {
        TemporalConfig {
            order: 1,
            fit: FitConfig::default(),
            rounds: 3,
        }
    }
}

impl TemporalConfig {
    fn label_fit(&self) -> FitConfig {
        FitConfig {
            order: self.order.max(1),
            ..self.fit.clone()
        }
    }

    fn validate(&self) -> Result<()> {
        self.label_fit().validate()?;
        if self.fit.unified && self.order != 1 {
            return Err(Error::Config("unified label partitions require order 1".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct TemporalFit {
    pub order: usize,
    pub node_groups: Vec<u32>,
    pub num_node_groups: usize,
    /// Partition of the label chain; `None` for order 0.
    pub label_partition: Option<Partition>,
    /// Label names `r-s`, indexed like the label partition's tokens.
    pub label_names: Vec<String>,
    pub breakdown: DLBreakdown,
    pub seed: u64,
    pub restarts: usize,
}

impl TemporalFit {
    pub fn num_label_token_groups(&self) -> usize {
        self.label_partition.as_ref().map_or(1, |p| p.num_token_groups())
    }

    pub fn num_label_memory_groups(&self) -> usize {
        self.label_partition.as_ref().map_or(1, |p| p.num_memory_groups())
    }
}

/// Best node partition of the static objective over parallel restarts, with
/// the ladder snapshots of the winning restart.
fn static_search(stream: &EdgeStream, cfg: &FitConfig) -> (Vec<u32>, f64, Vec<Vec<u32>>) {
    let runs: Vec<_> = (0..cfg.restarts)
        .into_par_iter()
        .map(|r| {
            let mut rng = ChaCha8Rng::seed_from_u64(restart_seed(cfg.seed, r));
            let mut st = NodeState::singletons(stream);
            let mut snaps = Vec::new();
            let out = agglomerative_search(&mut st, cfg, &mut rng, |s| snaps.push(compact_labels(&s.labels())));
            (compact_labels(&out.labels), out.total, snaps)
        })
        .collect();
    runs.into_iter()
        .reduce(|a, b| if b.1 < a.1 { b } else { a })
        .expect("at least one restart")
}

/// Degree-corrected block model fit of the aggregated multigraph; the
/// returned description length is that of the order-0 temporal model.
pub fn static_fit(stream: &EdgeStream, cfg: &TemporalConfig) -> Result<TemporalFit> {
    cfg.validate()?;
    if stream.is_empty() {
        return input("the edge stream is empty");
    }
    let (groups, _, _) = static_search(stream, &cfg.fit);
    let breakdown = temporal_dl(stream, &groups, 0, None, &cfg.fit.prior)?;
    Ok(TemporalFit {
        order: 0,
        num_node_groups: count(&groups),
        node_groups: groups,
        label_partition: None,
        label_names: Vec::new(),
        breakdown,
        seed: cfg.fit.seed,
        restarts: cfg.fit.restarts,
    })
}

fn count(groups: &[u32]) -> usize {
    groups.iter().max().map_or(0, |&g| g as usize + 1)
}

struct Candidate {
    groups: Vec<u32>,
    part: Partition,
    total: f64,
}

fn fit_labels(stream: &EdgeStream, groups: &[u32], cfg: &TemporalConfig) -> Result<Candidate> {
    let labels = label_sequence(stream, groups)?;
    let chain = labels.chain(cfg.order)?;
    let fit = fit_chain(&chain, None, &cfg.label_fit())?;
    let total = temporal_dl(stream, groups, cfg.order, Some(&fit.partition), &cfg.fit.prior)?.total;
    Ok(Candidate {
        groups: groups.to_vec(),
        part: fit.partition,
        total,
    })
}

/// Joint fit of the node partition and the label-chain partition.
///
/// The node ladder of a static fit supplies starting points; each is paired
/// with a fitted label partition and the best pair is refined by alternating
/// node sweeps (which relabel the affected edges) with label refits.
pub fn joint_fit(stream: &EdgeStream, cfg: &TemporalConfig) -> Result<TemporalFit> {
    if cfg.order == 0 {
        return static_fit(stream, cfg);
    }
    cfg.validate()?;
    if stream.len() <= cfg.order {
        return input(format!(
            "an edge stream of {} events is too short for order {}",
            stream.len(),
            cfg.order
        ));
    }
    let (best_static, _, mut snaps) = static_search(stream, &cfg.fit);
    snaps.push(best_static);
    snaps.sort();
    snaps.dedup();
    let cands = snaps
        .par_iter()
        .map(|g| fit_labels(stream, g, cfg))
        .collect::<Result<Vec<_>>>()?;
    let mut best = cands
        .into_iter()
        .reduce(|a, b| if b.total < a.total { b } else { a })
        .expect("at least one snapshot");

    let mut rng = ChaCha8Rng::seed_from_u64(restart_seed(cfg.fit.seed, usize::MAX >> 1));
    for _ in 0..cfg.rounds {
        let mut js = JointNodes::new(stream, &best.groups, best.part.clone(), cfg)?;
        for _ in 0..cfg.fit.refine_sweeps.min(20) {
            if mh_sweep(&mut js, cfg.fit.epsilon, None, &mut rng).accepted == 0 {
                break;
            }
        }
        let groups = compact_labels(&js.ns.labels());
        let carried = Candidate {
            total: temporal_dl(stream, &groups, cfg.order, Some(&js.part), &cfg.fit.prior)?.total,
            groups: groups.clone(),
            part: js.part.clone(),
        };
        let refit = fit_labels(stream, &groups, cfg)?;
        let round_best = if refit.total < carried.total { refit } else { carried };
        if round_best.total < best.total - 1e-9 {
            best = round_best;
        } else {
            break;
        }
    }

    let labels = label_sequence(stream, &best.groups)?;
    let breakdown = temporal_dl(stream, &best.groups, cfg.order, Some(&best.part), &cfg.fit.prior)?;
    Ok(TemporalFit {
        order: cfg.order,
        num_node_groups: count(&best.groups),
        node_groups: best.groups,
        label_partition: Some(best.part),
        label_names: labels.sequence.alphabet.entries().to_vec(),
        breakdown,
        seed: cfg.fit.seed,
        restarts: cfg.fit.restarts,
    })
}

/// Label partition for a relabeled stream: each new label token takes the
/// group of the old token at its first position, each new memory the group
/// of the old memory at its first emission. Unobserved labels keep the group
/// of the old label with the same index.
pub(crate) fn carry_partition(
    old: &LabelChain,
    old_chain: &ChainCounts,
    old_part: &Partition,
    new: &LabelChain,
    new_chain: &ChainCounts,
) -> Result<Partition> {
    const UNSET: u32 = u32::MAX;
    let mut tokens = vec![UNSET; new.pairs.len()];
    for (&x_new, &x_old) in new.sequence.tokens.iter().zip(&old.sequence.tokens) {
        if tokens[x_new as usize] == UNSET {
            tokens[x_new as usize] = old_part.token_groups[x_old as usize];
        }
    }
    // labels that no edge carries keep the group of the same-index old label
    for (x, g) in tokens.iter_mut().enumerate() {
        if *g == UNSET {
            *g = old_part.token_groups.get(x).copied().unwrap_or(old_part.token_groups[0]);
        }
    }
    if old_part.unified {
        return Ok(Partition::unified(new_chain, tokens)?.compacted());
    }
    let mut memories = vec![UNSET; new_chain.num_memories()];
    for (e_new, e_old) in new_chain.emissions().iter().zip(old_chain.emissions()) {
        if memories[e_new.memory as usize] == UNSET {
            memories[e_new.memory as usize] = old_part.memory_groups[e_old.memory as usize];
        }
    }
    Ok(Partition::new(tokens, memories).compacted())
}

struct Evaluated {
    item: usize,
    to: u32,
    labels: LabelChain,
    chain: ChainCounts,
    part: Partition,
    dynamic: f64,
}

/// Node moves under the joint objective. Each proposal relabels the stream
/// and carries the label partition over; the label chain is recounted.
struct JointNodes<'a> {
    ns: NodeState<'a>,
    order: usize,
    prior: PriorConfig,
    labels: LabelChain,
    chain: ChainCounts,
    part: Partition,
    /// Label-chain description length plus the label-count correction.
    dynamic: f64,
    pending: Option<Evaluated>,
}

impl<'a> JointNodes<'a> {
    fn new(stream: &'a EdgeStream, groups: &[u32], part: Partition, cfg: &TemporalConfig) -> Result<Self> {
        let ns = NodeState::new(stream, groups);
        let labels = label_sequence(stream, groups)?;
        let chain = labels.chain(cfg.order)?;
        let dynamic = dynamic_term(&labels, &chain, &part, groups, &cfg.fit.prior, stream.directed())?;
        Ok(JointNodes {
            ns,
            order: cfg.order,
            prior: cfg.fit.prior,
            labels,
            chain,
            part,
            dynamic,
            pending: None,
        })
    }

    fn evaluate(&self, item: usize, to: u32) -> Result<Evaluated> {
        let mut groups = self.ns.labels();
        groups[item] = to;
        let stream = self.ns.stream();
        let labels = label_sequence(stream, &groups)?;
        let chain = labels.chain(self.order)?;
        let part = carry_partition(&self.labels, &self.chain, &self.part, &labels, &chain)?;
        let dynamic = dynamic_term(&labels, &chain, &part, &groups, &self.prior, stream.directed())?;
        Ok(Evaluated {
            item,
            to,
            labels,
            chain,
            part,
            dynamic,
        })
    }
}

fn dynamic_term(
    labels: &LabelChain,
    chain: &ChainCounts,
    part: &Partition,
    groups: &[u32],
    prior: &PriorConfig,
    directed: bool,
) -> Result<f64> {
    let c = {
        let mut g = groups.to_vec();
        g.sort_unstable();
        g.dedup();
        g.len() as u64
    };
    Ok(total_dl(chain, part, prior)?.total + label_correction(labels, c, directed))
}

impl BlockState for JointNodes<'_> {
    fn num_items(&self) -> usize {
        self.ns.num_items()
    }

    fn num_sides(&self) -> usize {
        1
    }

    fn side(&self, _item: usize) -> usize {
        0
    }

    fn group(&self, item: usize) -> u32 {
        self.ns.group(item)
    }

    fn groups(&self, side: usize) -> &[u32] {
        self.ns.groups(side)
    }

    fn group_size(&self, side: usize, g: u32) -> u64 {
        self.ns.group_size(side, g)
    }

    fn fresh_group(&mut self, side: usize) -> u32 {
        self.ns.fresh_group(side)
    }

    fn item_degree(&self, item: usize) -> u64 {
        self.ns.item_degree(item)
    }

    fn for_each_neighbor(&self, item: usize, f: &mut dyn FnMut(u32, u64)) {
        self.ns.for_each_neighbor(item, f)
    }

    fn block_count(&self, side: usize, w: u32, t: u32) -> u64 {
        self.ns.block_count(side, w, t)
    }

    fn block_degree(&self, side: usize, t: u32) -> u64 {
        self.ns.block_degree(side, t)
    }

    fn sample_block<R: Rng + ?Sized>(&self, side: usize, t: u32, rng: &mut R) -> u32 {
        self.ns.sample_block(side, t, rng)
    }

    fn delta(&mut self, item: usize, to: u32) -> f64 {
        if self.ns.group(item) == to {
            return 0.0;
        }
        let d_static = self.ns.delta(item, to);
        match self.evaluate(item, to) {
            Ok(ev) => {
                let d = d_static + ev.dynamic - self.dynamic;
                self.pending = Some(ev);
                d
            }
            Err(_) => f64::INFINITY,
        }
    }

    fn apply(&mut self, item: usize, to: u32) {
        if self.ns.group(item) == to {
            return;
        }
        let ev = match self.pending.take() {
            Some(ev) if ev.item == item && ev.to == to => ev,
            _ => self.evaluate(item, to).expect("a move evaluated before must re-evaluate"),
        };
        self.ns.apply(item, to);
        self.labels = ev.labels;
        self.chain = ev.chain;
        self.part = ev.part;
        self.dynamic = ev.dynamic;
    }

    fn total(&self) -> f64 {
        self.ns.total() + self.dynamic
    }

    fn labels(&self) -> Vec<u32> {
        self.ns.labels()
    }

    fn restore(&mut self, labels: &[u32]) {
        let stream = self.ns.stream();
        let new = label_sequence(stream, labels).expect("labels cover the stream");
        let chain = new.chain(self.order).expect("stream long enough for the order");
        let part = carry_partition(&self.labels, &self.chain, &self.part, &new, &chain)
            .expect("carried partition is consistent");
        self.dynamic = dynamic_term(&new, &chain, &part, labels, &self.prior, stream.directed())
            .expect("carried partition is consistent");
        self.ns.restore(labels);
        self.labels = new;
        self.chain = chain;
        self.part = part;
        self.pending = None;
    }
}
