//! Description length of the community Markov chain, evaluated from scratch.
//!
//! All quantities are in nats. The sequence term is the microcanonical
//! likelihood
//!
//! ```text
//! -ln [ prod_{r,s} e_rs! * prod_x k_x! / (prod_r e_r! * prod_s e_s!) ]
//! ```
//!
//! where the product runs over every token-group by memory-group pair.

use std::collections::BTreeMap;

use rustc_hash::FxHashMap;
use serde::{Deserialize, Serialize};

use crate::chain::ChainCounts;
use crate::combinatorics::{ln_binom, ln_factorial, lmultiset, log_q};
use crate::error::{Error, Result};

/// Prior on the token emission counts `k_x` within each token group.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
pub enum KPrior {
    /// Flat over all count vectors: `multiset(n_r, e_r)^-1`.
    Uniform,
    /// Two-level hierarchy through the degree histogram of each group.
    #[default]
    Hyperprior,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
pub struct PriorConfig {
    pub k_prior: KPrior,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
pub enum Units {
    #[default]
    Nats,
    Bits,
}

impl Units {
    pub fn convert(self, nats: f64) -> f64 {
        match self {
            Units::Nats => nats,
            Units::Bits => nats / std::f64::consts::LN_2,
        }
    }
}

/// Group assignments of tokens and memories.
///
/// In unified mode (order 1 only) the memory `[x]` always shares the group
/// of token `x`; `memory_groups` is derived from `token_groups`.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Partition {
    pub token_groups: Vec<u32>,
    pub memory_groups: Vec<u32>,
    pub unified: bool,
}

impl Partition {
    pub fn new(token_groups: Vec<u32>, memory_groups: Vec<u32>) -> Self {
        Partition {
            token_groups,
            memory_groups,
            unified: false,
        }
    }

    /// Unified partition; memory groups follow their token.
    pub fn unified(chain: &ChainCounts, token_groups: Vec<u32>) -> Result<Self> {
        if chain.order() != 1 {
            return Err(Error::Usage("unified partitions require order 1".into()));
        }
        let memory_groups = chain
            .memories()
            .iter()
            .map(|m| token_groups[m.0[0] as usize])
            .collect();
        Ok(Partition {
            token_groups,
            memory_groups,
            unified: true,
        })
    }

    /// Every token in group 0 and every memory in group 0.
    pub fn trivial(chain: &ChainCounts, unified: bool) -> Result<Self> {
        let tokens = vec![0; chain.num_tokens()];
        if unified {
            Self::unified(chain, tokens)
        } else {
            Ok(Self::new(tokens, vec![0; chain.num_memories()]))
        }
    }

    /// Every token and memory in its own group (the plain-chain limit).
    pub fn singletons(chain: &ChainCounts) -> Self {
        Self::new(
            (0..chain.num_tokens() as u32).collect(),
            (0..chain.num_memories() as u32).collect(),
        )
    }

    pub fn num_token_groups(&self) -> usize {
        count_groups(&self.token_groups)
    }

    pub fn num_memory_groups(&self) -> usize {
        if self.unified {
            self.num_token_groups()
        } else {
            count_groups(&self.memory_groups)
        }
    }

    /// Relabels groups to `0..B` in order of first appearance.
    pub fn compacted(&self) -> Partition {
        let tokens = compact_labels(&self.token_groups);
        if self.unified {
            let mut map = FxHashMap::default();
            for (&old, &new) in self.token_groups.iter().zip(&tokens) {
                map.insert(old, new);
            }
            let memories = self.memory_groups.iter().map(|g| map[g]).collect();
            Partition {
                token_groups: tokens,
                memory_groups: memories,
                unified: true,
            }
        } else {
            Partition {
                token_groups: tokens,
                memory_groups: compact_labels(&self.memory_groups),
                unified: false,
            }
        }
    }

    pub fn validate(&self, chain: &ChainCounts) -> Result<()> {
        if self.token_groups.len() != chain.num_tokens() {
            return Err(Error::Invariant(format!(
                "partition covers {} tokens, chain has {}",
                self.token_groups.len(),
                chain.num_tokens()
            )));
        }
        if self.memory_groups.len() != chain.num_memories() {
            return Err(Error::Invariant(format!(
                "partition covers {} memories, chain has {}",
                self.memory_groups.len(),
                chain.num_memories()
            )));
        }
        check_contiguous(&self.token_groups)?;
        if self.unified {
            if chain.order() != 1 {
                return Err(Error::Invariant("unified partition on order > 1".into()));
            }
            for (m, key) in chain.memories().iter().enumerate() {
                if self.memory_groups[m] != self.token_groups[key.0[0] as usize] {
                    return Err(Error::Invariant(format!(
                        "unified memory {m} is not in its token's group"
                    )));
                }
            }
        } else {
            check_contiguous(&self.memory_groups)?;
        }
        Ok(())
    }
}

pub(crate) fn count_groups(labels: &[u32]) -> usize {
    let mut seen: Vec<u32> = labels.to_vec();
    seen.sort_unstable();
    seen.dedup();
    seen.len()
}

pub(crate) fn compact_labels(labels: &[u32]) -> Vec<u32> {
    let mut map: FxHashMap<u32, u32> = FxHashMap::default();
    labels
        .iter()
        .map(|&g| {
            let next = map.len() as u32;
            *map.entry(g).or_insert(next)
        })
        .collect()
}

fn check_contiguous(labels: &[u32]) -> Result<()> {
    let b = labels.iter().copied().max().map_or(0, |m| m as usize + 1);
    let mut occupied = vec![false; b];
    for &g in labels {
        occupied[g as usize] = true;
    }
    if let Some(g) = occupied.iter().position(|o| !o) {
        return Err(Error::Invariant(format!("group {g} is empty")));
    }
    Ok(())
}

/// Per-term description length in nats.
#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize)]
pub struct DLBreakdown {
    pub seq_term: f64,
    pub k_prior: f64,
    pub ers_prior: f64,
    pub es_prior: f64,
    pub token_partition_prior: f64,
    pub memory_partition_prior: f64,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub static_net_term: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub node_partition_prior: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub wait_term: Option<f64>,
    pub total: f64,
}

impl DLBreakdown {
    pub fn sum_of_terms(&self) -> f64 {
        self.seq_term
            + self.k_prior
            + self.ers_prior
            + self.es_prior
            + self.token_partition_prior
            + self.memory_partition_prior
            + self.static_net_term.unwrap_or(0.0)
            + self.node_partition_prior.unwrap_or(0.0)
            + self.wait_term.unwrap_or(0.0)
    }

    pub fn with_total(mut self) -> Self {
        self.total = self.sum_of_terms();
        self
    }

    /// Flat `term -> value` record in the requested units.
    pub fn to_record(&self, units: Units) -> BTreeMap<String, f64> {
        let mut out = BTreeMap::new();
        let mut put = |k: &str, v: f64| {
            out.insert(k.to_string(), units.convert(v));
        };
        put("seq_term", self.seq_term);
        put("k_prior", self.k_prior);
        put("ers_prior", self.ers_prior);
        put("es_prior", self.es_prior);
        put("token_partition_prior", self.token_partition_prior);
        put("memory_partition_prior", self.memory_partition_prior);
        if let Some(v) = self.static_net_term {
            put("static_net_term", v);
        }
        if let Some(v) = self.node_partition_prior {
            put("node_partition_prior", v);
        }
        if let Some(v) = self.wait_term {
            put("wait_term", v);
        }
        put("total", self.total);
        out
    }
}

/// Block-level aggregates of a chain under a partition.
#[derive(Debug, Clone)]
pub struct BlockSummary {
    pub num_token_groups: usize,
    pub num_memory_groups: usize,
    pub e_rs: FxHashMap<(u32, u32), u64>,
    pub e_r: Vec<u64>,
    pub e_s: Vec<u64>,
    pub n_r: Vec<u64>,
    pub n_s: Vec<u64>,
    /// Token degree histogram per token group: `k -> n^r_k`.
    pub hist: Vec<BTreeMap<u64, u64>>,
    pub total: u64,
}

impl BlockSummary {
    pub fn new(chain: &ChainCounts, part: &Partition) -> Result<Self> {
        part.validate(chain)?;
        let bn = part.num_token_groups();
        let bm = part.num_memory_groups();
        let mut e_rs: FxHashMap<(u32, u32), u64> = FxHashMap::default();
        let mut e_r = vec![0u64; bn];
        let mut e_s = vec![0u64; bm];
        let mut n_r = vec![0u64; bn];
        let mut n_s = vec![0u64; bm];
        let mut hist = vec![BTreeMap::new(); bn];
        for (x, m, c) in chain.transitions() {
            let r = part.token_groups[x as usize];
            let s = part.memory_groups[m as usize];
            *e_rs.entry((r, s)).or_insert(0) += c;
            e_s[s as usize] += c;
        }
        for (x, &r) in part.token_groups.iter().enumerate() {
            n_r[r as usize] += 1;
            let k = chain.token_count(x as u32);
            e_r[r as usize] += k;
            *hist[r as usize].entry(k).or_insert(0) += 1;
        }
        for &s in &part.memory_groups {
            n_s[s as usize] += 1;
        }
        let sum_rs: u64 = e_rs.values().sum();
        let sum_r: u64 = e_r.iter().sum();
        let sum_s: u64 = e_s.iter().sum();
        if sum_rs != chain.total() || sum_r != chain.total() || sum_s != chain.total() {
            return Err(Error::Invariant("block margins do not sum to E".into()));
        }
        Ok(BlockSummary {
            num_token_groups: bn,
            num_memory_groups: bm,
            e_rs,
            e_r,
            e_s,
            n_r,
            n_s,
            hist,
            total: chain.total(),
        })
    }
}

/// Microcanonical sequence term.
pub fn seq_term(chain: &ChainCounts, part: &Partition) -> Result<f64> {
    let b = BlockSummary::new(chain, part)?;
    Ok(seq_term_from(chain, &b))
}

fn seq_term_from(chain: &ChainCounts, b: &BlockSummary) -> f64 {
    let num: f64 = b.e_rs.values().map(|&e| ln_factorial(e)).sum::<f64>()
        + chain.token_counts().iter().map(|&k| ln_factorial(k)).sum::<f64>();
    let den: f64 = b.e_r.iter().map(|&e| ln_factorial(e)).sum::<f64>()
        + b.e_s.iter().map(|&e| ln_factorial(e)).sum::<f64>();
    den - num
}

/// Hyperprior contribution of one token group.
pub(crate) fn hyper_group_term<'a>(
    n_r: u64,
    e_r: u64,
    hist: impl Iterator<Item = &'a u64>,
) -> f64 {
    if n_r == 0 {
        return 0.0;
    }
    let hist_sum: f64 = hist.map(|&c| ln_factorial(c)).sum();
    ln_factorial(n_r) - hist_sum + log_q(e_r, n_r)
}

/// Prior on the token counts `{k_x}`.
pub fn k_prior(chain: &ChainCounts, part: &Partition, config: &PriorConfig) -> Result<f64> {
    let b = BlockSummary::new(chain, part)?;
    Ok(k_prior_from(&b, config))
}

fn k_prior_from(b: &BlockSummary, config: &PriorConfig) -> f64 {
    match config.k_prior {
        KPrior::Uniform => b
            .n_r
            .iter()
            .zip(&b.e_r)
            .map(|(&n, &e)| lmultiset(n, e))
            .sum(),
        KPrior::Hyperprior => (0..b.num_token_groups)
            .map(|r| hyper_group_term(b.n_r[r], b.e_r[r], b.hist[r].values()))
            .sum(),
    }
}

/// Prior on the block matrix given memory-group totals.
pub fn ers_prior(chain: &ChainCounts, part: &Partition) -> Result<f64> {
    let b = BlockSummary::new(chain, part)?;
    Ok(ers_prior_from(&b))
}

fn ers_prior_from(b: &BlockSummary) -> f64 {
    b.e_s
        .iter()
        .map(|&e| lmultiset(b.num_token_groups as u64, e))
        .sum()
}

/// Prior on memory-group totals `{e_s}`.
pub fn es_prior(chain: &ChainCounts, part: &Partition) -> Result<f64> {
    Ok(lmultiset(part.num_memory_groups() as u64, chain.total()))
}

/// Two-level partition prior: uniform over assignments given group sizes,
/// and uniform over group-size compositions.
pub fn partition_prior(assignments: &[u32]) -> Result<f64> {
    check_contiguous(assignments)?;
    let m = assignments.len() as u64;
    if m == 0 {
        return Ok(0.0);
    }
    let b = assignments.iter().copied().max().unwrap() as usize + 1;
    let mut sizes = vec![0u64; b];
    for &g in assignments {
        sizes[g as usize] += 1;
    }
    Ok(partition_prior_from_sizes(m, &sizes))
}

pub(crate) fn partition_prior_from_sizes(m: u64, sizes: &[u64]) -> f64 {
    let b = sizes.iter().filter(|&&n| n > 0).count() as u64;
    if m == 0 || b == 0 {
        return 0.0;
    }
    let sum: f64 = sizes.iter().map(|&n| ln_factorial(n)).sum();
    ln_factorial(m) - sum + ln_binom(m - 1, b - 1)
}

/// Every chain term of the joint description length.
pub fn total_dl(chain: &ChainCounts, part: &Partition, config: &PriorConfig) -> Result<DLBreakdown> {
    let b = BlockSummary::new(chain, part)?;
    let token_partition_prior = partition_prior_from_sizes(chain.num_tokens() as u64, &b.n_r);
    let memory_partition_prior = if part.unified {
        0.0
    } else {
        partition_prior_from_sizes(chain.num_memories() as u64, &b.n_s)
    };
    Ok(DLBreakdown {
        seq_term: seq_term_from(chain, &b),
        k_prior: k_prior_from(&b, config),
        ers_prior: ers_prior_from(&b),
        es_prior: lmultiset(b.num_memory_groups as u64, chain.total()),
        token_partition_prior,
        memory_partition_prior,
        ..Default::default()
    }
    .with_total())
}

/// Evidence of the plain Bayesian chain with flat Dirichlet priors
/// (every token and memory in its own group).
pub fn baseline_plain_dl(chain: &ChainCounts) -> f64 {
    let n = chain.num_tokens() as u64;
    let mut dl = 0.0;
    for m in 0..chain.num_memories() as u32 {
        let a = chain.memory_count(m);
        if a == 0 {
            continue;
        }
        dl += ln_factorial(a + n - 1) - ln_factorial(n - 1);
        dl -= chain
            .memory_neighbors(m)
            .iter()
            .map(|&(_, c)| ln_factorial(c))
            .sum::<f64>();
    }
    dl
}

/// Maximum log-likelihood `sum a ln(a / a_m)` of the plain chain.
pub fn mle_loglik(chain: &ChainCounts) -> f64 {
    chain
        .transitions()
        .map(|(_, m, c)| {
            let c = c as f64;
            c * (c / chain.memory_count(m) as f64).ln()
        })
        .sum()
}

/// Maximum log-likelihood of the block chain with its parameters profiled
/// out: `sum_rs e_rs ln(e_rs / (e_r e_s)) + sum_x k_x ln k_x`.
pub fn block_mle_loglik(chain: &ChainCounts, part: &Partition) -> Result<f64> {
    let b = BlockSummary::new(chain, part)?;
    let xlnx = |v: u64| if v == 0 { 0.0 } else { v as f64 * (v as f64).ln() };
    let blocks: f64 = b
        .e_rs
        .iter()
        .map(|(&(r, s), &e)| {
            let e = e as f64;
            e * (e / (b.e_r[r as usize] as f64 * b.e_s[s as usize] as f64)).ln()
        })
        .sum();
    Ok(blocks + chain.token_counts().iter().map(|&k| xlnx(k)).sum::<f64>())
}

/// Plug-in conditional entropy `H(X | memory)` in nats.
pub fn conditional_entropy(chain: &ChainCounts) -> f64 {
    if chain.total() == 0 {
        return 0.0;
    }
    -mle_loglik(chain) / chain.total() as f64
}
