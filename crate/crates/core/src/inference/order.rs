use std::ops::RangeInclusive;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::{agglomerative_search, restart_seed, ChainState, FitConfig, FitResult};
use crate::chain::{build_chain, ChainCounts};
use crate::dl::baseline_plain_dl;
use crate::error::{Error, Result};
use crate::sequence::{Sequence, DEFAULT_WAIT_FLOOR};
use crate::waits::{bursty_transform, default_delta_m, WaitMode, WaitStats};

/// How waiting times enter a fit.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct WaitConfig {
    pub mode: WaitMode,
    pub alpha: f64,
    /// `None` sets beta from the data.
    pub beta: Option<f64>,
    pub bursty: bool,
    /// Floor of the bursty transform; defaults to the smallest positive wait.
    pub delta_m: Option<f64>,
}

impl Default for WaitConfig {
    fn default() -> Self {
        WaitConfig {
            mode: WaitMode::PerMemory,
            alpha: 1.0,
            beta: None,
            bursty: false,
            delta_m: None,
        }
    }
}

impl WaitConfig {
    /// The waits as they enter the evidence: zeros floored, then optionally
    /// log-transformed.
    pub fn prepare(&self, waits: &[f64]) -> Result<Vec<f64>> {
        if !self.bursty {
            return Ok(waits.to_vec());
        }
        let floored: Vec<f64> = waits.iter().map(|&d| d.max(DEFAULT_WAIT_FLOOR)).collect();
        let delta_m = match self.delta_m {
            Some(m) => m,
            None => default_delta_m(&floored)
                .ok_or_else(|| Error::Config("no positive waiting time for delta_m".into()))?,
        };
        bursty_transform(&floored, delta_m)
    }

    pub fn stats(&self, chain: &ChainCounts, seq: &Sequence) -> Result<WaitStats> {
        let waits = seq
            .waits
            .as_ref()
            .ok_or_else(|| Error::Usage("waiting-time model requested but the sequence has no waits".into()))?;
        WaitStats::from_chain(chain, &self.prepare(waits)?, self.alpha, self.beta)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct OrderRow {
    pub order: usize,
    pub num_token_groups: usize,
    pub num_memory_groups: usize,
    pub total: f64,
    pub baseline: f64,
}

/// Best-of-restarts fit of one chain.
pub fn fit_chain(
    chain: &ChainCounts,
    waits: Option<(&WaitStats, WaitMode)>,
    cfg: &FitConfig,
) -> Result<FitResult> {
    cfg.validate()?;
    if chain.total() == 0 {
        return Err(Error::Input("the chain has no transitions to fit".into()));
    }
    if cfg.unified && chain.order() != 1 {
        return Err(Error::Config("unified partitions require order 1".into()));
    }
    let runs: Vec<_> = (0..cfg.restarts)
        .into_par_iter()
        .map(|r| -> Result<_> {
            let mut rng = ChaCha8Rng::seed_from_u64(restart_seed(cfg.seed, r));
            let mut st = ChainState::singletons(chain, cfg.unified, cfg.prior, waits)?;
            let out = agglomerative_search(&mut st, cfg, &mut rng, |_| {});
            Ok((out, st.partition()))
        })
        .collect::<Result<Vec<_>>>()?;
    let (attempted, accepted) = runs.iter().fold((0u64, 0u64), |(a, b), (o, _)| {
        (a + o.sweeps.attempted, b + o.sweeps.accepted)
    });
    let (best, partition) = runs
        .into_iter()
        .reduce(|a, b| if b.0.total < a.0.total { b } else { a })
        .expect("at least one restart");
    let st = ChainState::new(chain, &partition, cfg.prior, waits)?;
    let breakdown = st.breakdown()?;
    if (breakdown.total - best.total).abs() > 1e-6 {
        return Err(Error::Invariant(format!(
            "search total {} disagrees with recomputed total {}",
            best.total, breakdown.total
        )));
    }
    Ok(FitResult {
        order: chain.order(),
        num_token_groups: st.num_token_groups(),
        num_memory_groups: st.num_memory_groups(),
        partition,
        breakdown,
        accept_rate: if attempted == 0 {
            0.0
        } else {
            accepted as f64 / attempted as f64
        },
        baseline: baseline_plain_dl(chain),
        order_table: None,
        seed: cfg.seed,
        restarts: cfg.restarts,
        trace: best.trace,
    })
}

/// Fits `seq` at `cfg.order`, with waiting times when `wait` is given.
pub fn fit_sequence(seq: &Sequence, cfg: &FitConfig, wait: Option<&WaitConfig>) -> Result<FitResult> {
    cfg.validate()?;
    let chain = build_chain(seq, cfg.order, cfg.chain)?;
    match wait {
        Some(wc) => {
            let stats = wc.stats(&chain, seq)?;
            fit_chain(&chain, Some((&stats, wc.mode)), cfg)
        }
        None => fit_chain(&chain, None, cfg),
    }
}

/// Fits every order in `orders` and returns the minimum-description-length
/// fit with the per-order table attached. Ties go to the lower order.
///
/// Every order conditions on the same leading tokens, so all fits describe
/// the same emissions and their description lengths are comparable.
pub fn order_scan(
    seq: &Sequence,
    orders: RangeInclusive<usize>,
    cfg: &FitConfig,
    wait: Option<&WaitConfig>,
) -> Result<FitResult> {
    let (lo, hi) = (*orders.start(), *orders.end());
    if lo == 0 || hi < lo {
        return Err(Error::Config(format!("invalid order range {lo}..{hi}")));
    }
    if cfg.unified && hi > 1 {
        return Err(Error::Config("unified partitions require order 1".into()));
    }
    if seq.len() <= hi {
        return Err(Error::Input(format!(
            "sequence of length {} is too short for order {hi}",
            seq.len()
        )));
    }
    let fits: Vec<FitResult> = orders
        .into_par_iter()
        .map(|n| {
            let mut c = FitConfig {
                order: n,
                ..cfg.clone()
            };
            c.chain.prefix = c.chain.prefix.max(hi);
            fit_sequence(seq, &c, wait)
        })
        .collect::<Result<Vec<_>>>()?;
    let table: Vec<OrderRow> = fits
        .iter()
        .map(|f| OrderRow {
            order: f.order,
            num_token_groups: f.num_token_groups,
            num_memory_groups: f.num_memory_groups,
            total: f.breakdown.total,
            baseline: f.baseline,
        })
        .collect();
    let mut best = fits
        .into_iter()
        .reduce(|a, b| if b.breakdown.total < a.breakdown.total { b } else { a })
        .expect("nonempty order range");
    best.order_table = Some(table);
    Ok(best)
}
