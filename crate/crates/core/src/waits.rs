//! Waiting-time evidence for continuous-time chains.
//!
//! Each memory (or memory group) emits after an exponential wait with rate
//! `lambda`, and `lambda` has a Gamma(alpha, beta) prior. Integrating the rate
//! out gives the closed form evidence used here.

use serde::{Deserialize, Serialize};
use statrs::function::gamma::ln_gamma;

use crate::chain::ChainCounts;
use crate::dl::Partition;
use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
pub enum WaitMode {
    #[default]
    PerMemory,
    PerGroup,
}

/// Per-memory waiting-time totals and counts with the Gamma hyperparameters.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct WaitStats {
    pub alpha: f64,
    pub beta: f64,
    pub memory_totals: Vec<f64>,
    pub memory_counts: Vec<u64>,
}

fn check_hyper(alpha: f64, beta: f64) -> Result<()> {
    if !(alpha > 0.0) || !alpha.is_finite() {
        return Err(Error::Config(format!(
            "alpha must be positive (got {alpha}); the alpha = 0 limit is improper"
        )));
    }
    if !(beta > 0.0) || !beta.is_finite() {
        return Err(Error::Config(format!("beta must be positive (got {beta})")));
    }
    Ok(())
}

impl WaitStats {
    pub fn new(memory_totals: Vec<f64>, memory_counts: Vec<u64>, alpha: f64, beta: f64) -> Result<Self> {
        check_hyper(alpha, beta)?;
        if memory_totals.len() != memory_counts.len() {
            return Err(Error::Invariant("wait totals and counts differ in length".into()));
        }
        if let Some(i) = memory_totals.iter().position(|&d| !(d >= 0.0)) {
            return Err(Error::Input(format!("memory {i} has a negative wait total")));
        }
        Ok(WaitStats {
            alpha,
            beta,
            memory_totals,
            memory_counts,
        })
    }

    /// Accumulates `waits` over the emissions of `chain`.
    ///
    /// `waits[t - 1]` is the wait before token `t`; `beta = None` sets beta by
    /// [`estimate_beta`].
    pub fn from_chain(chain: &ChainCounts, waits: &[f64], alpha: f64, beta: Option<f64>) -> Result<Self> {
        if chain.emissions().is_empty() && chain.total() > 0 {
            return Err(Error::Usage("chain has no emission trace for waiting times".into()));
        }
        let mut totals = vec![0.0; chain.num_memories()];
        let mut counts = vec![0u64; chain.num_memories()];
        for e in chain.emissions() {
            if e.position == 0 {
                return Err(Error::Usage("cyclic chains cannot carry waiting times".into()));
            }
            let d = *waits.get(e.position - 1).ok_or_else(|| {
                Error::Input(format!("no waiting time for position {}", e.position))
            })?;
            if !(d >= 0.0) {
                return Err(Error::Input(format!("negative waiting time at {}", e.position - 1)));
            }
            totals[e.memory as usize] += d;
            counts[e.memory as usize] += 1;
        }
        let beta = match beta {
            Some(b) => b,
            None => estimate_beta(&totals, &counts, alpha)?,
        };
        Self::new(totals, counts, alpha, beta)
    }

    pub fn total_count(&self) -> u64 {
        self.memory_counts.iter().sum()
    }

    /// Totals `(Delta_r, e_r)` per memory group.
    pub fn group_totals(&self, memory_groups: &[u32]) -> (Vec<f64>, Vec<u64>) {
        let b = memory_groups.iter().copied().max().map_or(0, |g| g as usize + 1);
        let mut totals = vec![0.0; b];
        let mut counts = vec![0u64; b];
        for (m, &g) in memory_groups.iter().enumerate() {
            totals[g as usize] += self.memory_totals[m];
            counts[g as usize] += self.memory_counts[m];
        }
        (totals, counts)
    }
}

/// Negative log evidence of `k` exponential waits summing to `delta`.
pub fn gamma_evidence(k: u64, delta: f64, alpha: f64, beta: f64) -> f64 {
    let k = k as f64;
    -(alpha * beta.ln() + ln_gamma(k + alpha) - ln_gamma(alpha) - (k + alpha) * (delta + beta).ln())
}

/// Evidence with one independent rate per memory.
pub fn wait_evidence_per_memory(stats: &WaitStats) -> Result<f64> {
    check_hyper(stats.alpha, stats.beta)?;
    Ok(stats
        .memory_counts
        .iter()
        .zip(&stats.memory_totals)
        .map(|(&k, &d)| gamma_evidence(k, d, stats.alpha, stats.beta))
        .sum())
}

/// Evidence with one rate per memory group of `part`.
pub fn wait_evidence_per_group(stats: &WaitStats, part: &Partition) -> Result<f64> {
    check_hyper(stats.alpha, stats.beta)?;
    if part.memory_groups.len() != stats.memory_counts.len() {
        return Err(Error::Invariant("partition does not cover the wait statistics".into()));
    }
    let (totals, counts) = stats.group_totals(&part.memory_groups);
    Ok(counts
        .iter()
        .zip(&totals)
        .map(|(&k, &d)| gamma_evidence(k, d, stats.alpha, stats.beta))
        .sum())
}

pub fn wait_term(stats: &WaitStats, part: &Partition, mode: WaitMode) -> Result<f64> {
    match mode {
        WaitMode::PerMemory => wait_evidence_per_memory(stats),
        WaitMode::PerGroup => wait_evidence_per_group(stats, part),
    }
}

/// Maps Pareto-distributed waits to exponential ones: `mu = ln(delta / delta_m)`.
pub fn bursty_transform(waits: &[f64], delta_m: f64) -> Result<Vec<f64>> {
    if !(delta_m > 0.0) {
        return Err(Error::Config(format!("delta_m must be positive (got {delta_m})")));
    }
    waits
        .iter()
        .enumerate()
        .map(|(i, &d)| {
            if d < delta_m {
                Err(Error::Input(format!("wait {i} ({d}) is below delta_m ({delta_m})")))
            } else {
                Ok((d / delta_m).ln())
            }
        })
        .collect()
}

/// Smallest positive wait, the default `delta_m`.
pub fn default_delta_m(waits: &[f64]) -> Option<f64> {
    waits.iter().copied().filter(|&d| d > 0.0).reduce(f64::min)
}

/// Empirical-Bayes `beta`: the prior mean rate `alpha / beta` equals the
/// average plug-in rate `k / delta` over memories with `k >= 1, delta > 0`.
pub fn estimate_beta(totals: &[f64], counts: &[u64], alpha: f64) -> Result<f64> {
    let rates: Vec<f64> = counts
        .iter()
        .zip(totals)
        .filter(|&(&k, &d)| k >= 1 && d > 0.0)
        .map(|(&k, &d)| k as f64 / d)
        .collect();
    if rates.is_empty() {
        return Err(Error::Config(
            "no memory with a positive total wait; pass beta explicitly".into(),
        ));
    }
    let mean = rates.iter().sum::<f64>() / rates.len() as f64;
    Ok(alpha / mean)
}
