//! Temporal networks: a degree-corrected block model for the aggregated
//! multigraph combined with a block chain over the sequence of edge labels.
//!
//! An edge `(i, j)` at time `t` carries the label `(c_i, c_j)`. The joint
//! description length factorizes into a static part, which depends on the
//! edges only through the group-pair counts `m_rs`, and a dynamic part, the
//! description length of the label chain.

mod fit;
mod node_state;

pub use fit::{joint_fit, static_fit, TemporalConfig, TemporalFit};
pub use node_state::NodeState;

use rustc_hash::FxHashMap;

use crate::chain::{build_chain, ChainCounts, ChainOptions};
use crate::combinatorics::{ln_factorial, lmultiset};
use crate::dl::{partition_prior, total_dl, DLBreakdown, Partition, PriorConfig};
use crate::edges::EdgeStream;
use crate::error::{input, Error, Result};
use crate::sequence::{Sequence, TokenAlphabet};

/// The edge labels of a stream under a node partition.
#[derive(Debug, Clone)]
pub struct LabelChain {
    /// One token per edge event; token `x` stands for the group pair `pairs[x]`.
    pub sequence: Sequence,
    pub pairs: Vec<(u32, u32)>,
}

impl LabelChain {
    /// Number of edges carrying each label (`m_rs`).
    pub fn label_counts(&self) -> Vec<u64> {
        let mut m = vec![0u64; self.pairs.len()];
        for &x in &self.sequence.tokens {
            m[x as usize] += 1;
        }
        m
    }

    pub fn chain(&self, order: usize) -> Result<ChainCounts> {
        build_chain(&self.sequence, order, ChainOptions::default())
    }
}

fn check_groups(stream: &EdgeStream, groups: &[u32]) -> Result<()> {
    if groups.len() != stream.num_nodes() {
        return input(format!(
            "node partition covers {} nodes but the stream has {}",
            groups.len(),
            stream.num_nodes()
        ));
    }
    Ok(())
}

fn num_groups(groups: &[u32]) -> u64 {
    let mut g = groups.to_vec();
    g.sort_unstable();
    g.dedup();
    g.len() as u64
}

/// Number of distinct labels `C` groups can produce.
pub(crate) fn label_space(c: u64, directed: bool) -> u64 {
    if directed {
        c * c
    } else {
        c * (c + 1) / 2
    }
}

/// Maps every edge `(i, j)` to `(c_i, c_j)`, canonical `(min, max)` when
/// undirected. Groups are renumbered `0..C` by increasing id. The label
/// alphabet is every label `C` groups can produce, named `r-s`, in
/// lexicographic order; unobserved labels are tokens with zero count.
pub fn label_sequence(stream: &EdgeStream, groups: &[u32]) -> Result<LabelChain> {
    check_groups(stream, groups)?;
    let mut ids = groups.to_vec();
    ids.sort_unstable();
    ids.dedup();
    let dense: FxHashMap<u32, u32> = ids.iter().enumerate().map(|(i, &g)| (g, i as u32)).collect();
    let c = ids.len() as u32;
    let directed = stream.directed();
    let mut pairs = Vec::new();
    let mut alphabet = TokenAlphabet::new();
    for r in 0..c {
        for s in if directed { 0 } else { r }..c {
            pairs.push((r, s));
            alphabet.intern(&format!("{r}-{s}"));
        }
    }
    let index = |r: u32, s: u32| -> u32 {
        if directed {
            r * c + s
        } else {
            let (r, s) = if r <= s { (r, s) } else { (s, r) };
            // rows r' < r hold c - r' labels each
            r * c - r * (r.saturating_sub(1)) / 2 + (s - r)
        }
    };
    let tokens: Vec<u32> = stream
        .events()
        .iter()
        .map(|&(i, j)| index(dense[&groups[i as usize]], dense[&groups[j as usize]]))
        .collect();
    Ok(LabelChain {
        sequence: Sequence {
            alphabet,
            tokens,
            waits: None,
            epochs: None,
        },
        pairs,
    })
}

/// Static term of the aggregated multigraph:
/// `-ln[(prod m_rs! 2^(m_rr - loops_r) / prod e_r!) prod d_i! P(d|c) P(m)]`
/// with uniform multiset priors for the degrees and for `m_rs`.
pub fn static_term(stream: &EdgeStream, groups: &[u32]) -> Result<f64> {
    check_groups(stream, groups)?;
    if stream.is_empty() {
        return Ok(0.0);
    }
    let directed = stream.directed();
    let c = num_groups(groups);
    let mut m: FxHashMap<(u32, u32), u64> = FxHashMap::default();
    let mut loops: FxHashMap<u32, u64> = FxHashMap::default();
    for &(i, j) in stream.events() {
        let (r, s) = (groups[i as usize], groups[j as usize]);
        let key = if directed || r <= s { (r, s) } else { (s, r) };
        *m.entry(key).or_insert(0) += 1;
        if i == j {
            *loops.entry(r).or_insert(0) += 1;
        }
    }
    let mut sizes: FxHashMap<u32, u64> = FxHashMap::default();
    let mut e_out: FxHashMap<u32, u64> = FxHashMap::default();
    let mut e_in: FxHashMap<u32, u64> = FxHashMap::default();
    let mut dl = 0.0;
    for (i, &g) in groups.iter().enumerate() {
        let i = i as u32;
        *sizes.entry(g).or_insert(0) += 1;
        if directed {
            *e_out.entry(g).or_insert(0) += stream.out_degree(i);
            *e_in.entry(g).or_insert(0) += stream.in_degree(i);
            dl -= ln_factorial(stream.out_degree(i)) + ln_factorial(stream.in_degree(i));
        } else {
            *e_out.entry(g).or_insert(0) += stream.degree(i);
            dl -= ln_factorial(stream.degree(i));
        }
    }
    for (&(r, s), &count) in &m {
        dl -= ln_factorial(count);
        if !directed && r == s {
            dl -= std::f64::consts::LN_2 * (count - loops.get(&r).copied().unwrap_or(0)) as f64;
        }
    }
    for (g, &n) in &sizes {
        for margins in [&e_out, &e_in] {
            if let Some(&e) = margins.get(g) {
                dl += ln_factorial(e) + lmultiset(n, e);
            }
        }
    }
    Ok(dl + lmultiset(label_space(c, directed), stream.len() as u64))
}

/// Description length of a temporal network.
///
/// For `order >= 1` the label chain at that order is described under
/// `label_part`, and `seq_term` carries, besides the chain's own sequence
/// term, the correction `sum ln m_rs! + ln P(m)` that removes the label
/// counts already described by the static term. For `order == 0` the labels
/// are an exchangeable sequence given their counts and `seq_term` is `ln E!`.
pub fn temporal_dl(
    stream: &EdgeStream,
    groups: &[u32],
    order: usize,
    label_part: Option<&Partition>,
    prior: &PriorConfig,
) -> Result<DLBreakdown> {
    check_groups(stream, groups)?;
    if stream.is_empty() {
        return Ok(DLBreakdown::default());
    }
    let static_net = static_term(stream, groups)?;
    let node_prior = partition_prior(&crate::dl::compact_labels(groups))?;
    let e = stream.len() as u64;
    let mut out = if order == 0 {
        DLBreakdown {
            seq_term: ln_factorial(e),
            ..Default::default()
        }
    } else {
        let labels = label_sequence(stream, groups)?;
        let chain = labels.chain(order)?;
        let part = label_part.ok_or_else(|| Error::Usage("a label partition is required for order >= 1".into()))?;
        let mut b = total_dl(&chain, part, prior)?;
        b.seq_term += label_correction(&labels, num_groups(groups), stream.directed());
        b
    };
    out.static_net_term = Some(static_net);
    out.node_partition_prior = Some(node_prior);
    Ok(out.with_total())
}

/// `sum ln m_rs! - ln multiset(labels, E)`: what the static term already
/// charges for the label counts.
pub(crate) fn label_correction(labels: &LabelChain, c: u64, directed: bool) -> f64 {
    let e = labels.sequence.len() as u64;
    let m: f64 = labels.label_counts().iter().map(|&k| ln_factorial(k)).sum();
    m - lmultiset(label_space(c, directed), e)
}

/// Maximized log-likelihood of the degree-corrected block model in its
/// standard form, `sum_rs M_rs ln(M_rs / (K_r K_s))`, where `M_rs` counts edge
/// ends between groups (twice the internal edges on the diagonal) and `K_r`
/// is the total degree of group `r`. Undirected streams only.
pub fn dcsbm_loglik(stream: &EdgeStream, groups: &[u32]) -> Result<f64> {
    check_groups(stream, groups)?;
    if stream.directed() {
        return Err(Error::Usage("dcsbm_loglik expects an undirected stream".into()));
    }
    let mut mm: FxHashMap<(u32, u32), f64> = FxHashMap::default();
    let mut k: FxHashMap<u32, f64> = FxHashMap::default();
    for &(i, j) in stream.events() {
        let (r, s) = (groups[i as usize], groups[j as usize]);
        *mm.entry((r, s)).or_insert(0.0) += 1.0;
        *mm.entry((s, r)).or_insert(0.0) += 1.0;
        *k.entry(r).or_insert(0.0) += 1.0;
        *k.entry(s).or_insert(0.0) += 1.0;
    }
    Ok(mm.iter().map(|(&(r, s), &v)| v * (v / (k[&r] * k[&s])).ln()).sum())
}
