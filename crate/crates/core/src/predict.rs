//! Held-out predictive bounds.
//!
//! With `b*` fitted on a training prefix and `b'` the partition of items
//! first seen in the validation part,
//! `ln P(validation | training, b*) >= -(Sigma(full; b*, b') - Sigma(train; b*))`
//! for any `b'`; the search over `b'` only tightens the bound.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rustc_hash::FxHashMap;
use serde::{Deserialize, Serialize};

use crate::chain::{build_chain, ChainCounts, MemoryKey};
use crate::dl::{Partition, PriorConfig};
use crate::edges::EdgeStream;
use crate::error::{input, Error, Result};
use crate::inference::{fit_chain, restart_seed, restricted_fit, ChainState, FitConfig};
use crate::sequence::Sequence;
use crate::temporal::{joint_fit, label_sequence, temporal_dl, NodeState, TemporalConfig};

/// Contiguous split: the first `fraction` of the events is the training set.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SplitSpec {
    pub fraction: f64,
}

impl SplitSpec {
    pub fn new(fraction: f64) -> Result<Self> {
        if !(fraction > 0.0 && fraction <= 1.0) {
            return Err(Error::Config(format!("split fraction {fraction} is outside (0, 1]")));
        }
        Ok(SplitSpec { fraction })
    }

    /// Length of the training prefix of `len` events, at least 1.
    pub fn boundary(&self, len: usize) -> usize {
        ((len as f64 * self.fraction).round() as usize).clamp(1, len.max(1))
    }
}

impl Default for SplitSpec {
    fn default() -> Self {
        SplitSpec { fraction: 0.5 }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Holdout {
    /// `Sigma(full) - Sigma(train)` in nats.
    pub delta_sigma: f64,
    /// `-delta_sigma`, a lower bound on the log predictive likelihood.
    pub log_bound: f64,
    /// `log_bound` per validation event.
    pub per_event: f64,
    pub train_total: f64,
    pub full_total: f64,
    pub validation_events: usize,
    /// Items (tokens, memories or nodes) first seen in the validation part.
    pub new_items: usize,
}

impl Holdout {
    fn new(train_total: f64, full_total: f64, validation_events: usize, new_items: usize) -> Self {
        let delta_sigma = full_total - train_total;
        Holdout {
            delta_sigma,
            log_bound: -delta_sigma,
            per_event: if validation_events == 0 {
                0.0
            } else {
                -delta_sigma / validation_events as f64
            },
            train_total,
            full_total,
            validation_events,
            new_items,
        }
    }
}

/// Labels for items first seen in the full data: consecutive fresh groups
/// after the largest existing one.
fn fill_fresh(groups: &mut [Option<u32>]) -> (Vec<u32>, Vec<usize>) {
    let mut next = groups.iter().flatten().max().map_or(0, |&g| g + 1);
    let mut fresh = Vec::new();
    let out = groups
        .iter()
        .enumerate()
        .map(|(i, g)| {
            g.unwrap_or_else(|| {
                fresh.push(i);
                next += 1;
                next - 1
            })
        })
        .collect();
    (out, fresh)
}

/// Extends a training partition to the full chain. `token_map[x']` is the
/// full id of training token `x'`. Returns the partition and the movable
/// (new) state items.
pub(crate) fn extend_partition(
    train: &ChainCounts,
    train_part: &Partition,
    token_map: &[u32],
    full: &ChainCounts,
) -> Result<(Partition, Vec<usize>)> {
    let mut tokens: Vec<Option<u32>> = vec![None; full.num_tokens()];
    for (x, &g) in train_part.token_groups.iter().enumerate() {
        tokens[token_map[x] as usize] = Some(g);
    }
    let (tokens, new_tokens) = fill_fresh(&mut tokens);
    if train_part.unified {
        return Ok((Partition::unified(full, tokens)?, new_tokens));
    }
    let mut memories: Vec<Option<u32>> = vec![None; full.num_memories()];
    for (m, key) in train.memories().iter().enumerate() {
        let mapped = MemoryKey(key.0.iter().map(|&x| token_map[x as usize]).collect());
        let id = full
            .memory_id(&mapped)
            .ok_or_else(|| Error::Invariant("a training memory is missing from the full chain".into()))?;
        memories[id as usize] = Some(train_part.memory_groups[m]);
    }
    let (memories, new_memories) = fill_fresh(&mut memories);
    let n = full.num_tokens();
    let movable = new_tokens.into_iter().chain(new_memories.into_iter().map(|m| n + m)).collect();
    Ok((Partition::new(tokens, memories), movable))
}

/// Held-out bound for a token sequence at order `cfg.order`.
pub fn holdout_bound(seq: &Sequence, split: SplitSpec, cfg: &FitConfig) -> Result<Holdout> {
    cfg.validate()?;
    let t_star = split.boundary(seq.len());
    if t_star <= cfg.order {
        return input(format!(
            "training prefix of {t_star} tokens is too short for order {}",
            cfg.order
        ));
    }
    let (train, back) = seq.prefix(t_star);
    let train_chain = build_chain(&train, cfg.order, cfg.chain)?;
    let fit = fit_chain(&train_chain, None, cfg)?;
    let train_total = fit.breakdown.total;
    if t_star == seq.len() {
        return Ok(Holdout::new(train_total, train_total, 0, 0));
    }
    let full_chain = build_chain(seq, cfg.order, cfg.chain)?;
    let (part, movable) = extend_partition(&train_chain, &fit.partition, &back, &full_chain)?;
    let mut st = ChainState::new(&full_chain, &part, cfg.prior, None)?;
    let mut rng = ChaCha8Rng::seed_from_u64(restart_seed(cfg.seed, usize::MAX >> 2));
    restricted_fit(&mut st, &movable, cfg, &mut rng);
    let full_total = st.breakdown()?.total;
    Ok(Holdout::new(
        train_total,
        full_total,
        (full_chain.total() - train_chain.total()) as usize,
        movable.len(),
    ))
}

/// Held-out bound for a temporal network at label-chain order `cfg.order`
/// (0 for the static model). New nodes are placed by the static objective,
/// new label memories by the label chain.
pub fn temporal_holdout_bound(stream: &EdgeStream, split: SplitSpec, cfg: &TemporalConfig) -> Result<Holdout> {
    if stream.is_empty() {
        return input("the edge stream is empty");
    }
    let t_star = split.boundary(stream.len());
    let (train, back) = stream.prefix(t_star);
    let fit = joint_fit(&train, cfg)?;
    let train_total = fit.breakdown.total;
    if t_star == stream.len() {
        return Ok(Holdout::new(train_total, train_total, 0, 0));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(restart_seed(cfg.fit.seed, usize::MAX >> 2));

    let mut nodes: Vec<Option<u32>> = vec![None; stream.num_nodes()];
    for (i, &g) in fit.node_groups.iter().enumerate() {
        nodes[back[i] as usize] = Some(g);
    }
    let (init, new_nodes) = fill_fresh(&mut nodes);
    let mut ns = NodeState::new(stream, &init);
    restricted_fit(&mut ns, &new_nodes, &cfg.fit, &mut rng);
    let groups = crate::inference::BlockState::labels(&ns);
    let validation_events = stream.len() - t_star;

    let Some(train_part) = fit.label_partition.as_ref() else {
        let full_total = temporal_dl(stream, &groups, 0, None, &cfg.fit.prior)?.total;
        return Ok(Holdout::new(train_total, full_total, validation_events, new_nodes.len()));
    };
    let train_labels = label_sequence(&train, &fit.node_groups)?;
    let train_chain = train_labels.chain(cfg.order)?;
    let full_labels = label_sequence(stream, &groups)?;
    let full_chain = full_labels.chain(cfg.order)?;
    // training groups keep their ids, so a label pair names the same label in both
    let by_pair: FxHashMap<(u32, u32), u32> = full_labels
        .pairs
        .iter()
        .enumerate()
        .map(|(x, &p)| (p, x as u32))
        .collect();
    let token_map: Vec<u32> = train_labels.pairs.iter().map(|p| by_pair[p]).collect();
    let (part, movable) = extend_partition(&train_chain, train_part, &token_map, &full_chain)?;
    let prior: PriorConfig = cfg.fit.prior;
    let mut st = ChainState::new(&full_chain, &part, prior, None)?;
    restricted_fit(&mut st, &movable, &cfg.fit, &mut rng);
    let full_total = temporal_dl(stream, &groups, cfg.order, Some(&st.partition()), &prior)?.total;
    Ok(Holdout::new(
        train_total,
        full_total,
        validation_events,
        new_nodes.len() + movable.len(),
    ))
}
