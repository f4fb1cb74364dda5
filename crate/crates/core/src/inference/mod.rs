//! Description-length minimization over group assignments.
//!
//! The search is generic over [`BlockState`], implemented by the chain state
//! (tokens and memories) and by the node state of temporal networks.

mod chain_state;
mod mcmc;
mod order;

pub use chain_state::ChainState;
pub use mcmc::{
    agglomerative_search, mh_step, mh_sweep, proposal_probability, restricted_fit, sample_proposal,
    SearchOutcome, SweepStats,
};
pub use order::{fit_chain, fit_sequence, order_scan, OrderRow, WaitConfig};

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::chain::ChainOptions;
use crate::dl::{DLBreakdown, Partition, PriorConfig};
use crate::error::{Error, Result};

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct FitConfig {
    pub seed: u64,
    pub sweeps_per_level: usize,
    /// Weight of uniform proposals relative to neighbor-block proposals.
    pub epsilon: f64,
    /// Ratio between consecutive group counts of the merge ladder.
    pub sigma_levels: f64,
    pub restarts: usize,
    /// Inverse temperature of the sweeps; `None` is greedy descent.
    pub beta: Option<f64>,
    /// Optional `(start, end)` inverse temperatures for an annealed refinement.
    pub beta_anneal: Option<(f64, f64)>,
    pub unified: bool,
    pub order: usize,
    pub prior: PriorConfig,
    pub chain: ChainOptions,
    /// Distinct merge targets tried per group.
    pub merge_candidates: usize,
    /// Upper bound on refinement sweeps after the ladder.
    pub refine_sweeps: usize,
}

impl Default for FitConfig {
    fn default() -> Self {
        FitConfig {
            seed: 42,
            sweeps_per_level: 10,
            epsilon: 1.0,
            sigma_levels: 2.0,
            restarts: 4,
            beta: None,
            beta_anneal: None,
            unified: false,
            order: 1,
            prior: PriorConfig::default(),
            chain: ChainOptions::default(),
            merge_candidates: 8,
            refine_sweeps: 100,
        }
    }
}

impl FitConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.epsilon > 0.0) {
            return Err(Error::Config("epsilon must be positive".into()));
        }
        if !(self.sigma_levels > 1.0) {
            return Err(Error::Config("sigma_levels must exceed 1".into()));
        }
        if self.restarts == 0 {
            return Err(Error::Config("restarts must be at least 1".into()));
        }
        if self.sweeps_per_level == 0 {
            return Err(Error::Config("sweeps_per_level must be at least 1".into()));
        }
        if self.merge_candidates == 0 {
            return Err(Error::Config("merge_candidates must be at least 1".into()));
        }
        if let Some(b) = self.beta {
            if !(b > 0.0) {
                return Err(Error::Config("beta must be positive".into()));
            }
        }
        if let Some((a, b)) = self.beta_anneal {
            if !(a > 0.0 && b > 0.0) {
                return Err(Error::Config("annealing temperatures must be positive".into()));
            }
        }
        if self.order == 0 {
            return Err(Error::Config("chain order must be at least 1".into()));
        }
        if self.unified && self.order != 1 {
            return Err(Error::Config("unified partitions require order 1".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct FitResult {
    pub order: usize,
    pub partition: Partition,
    pub num_token_groups: usize,
    pub num_memory_groups: usize,
    pub breakdown: DLBreakdown,
    pub accept_rate: f64,
    /// Plain-chain evidence at the same order, for comparison.
    pub baseline: f64,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub order_table: Option<Vec<OrderRow>>,
    pub seed: u64,
    pub restarts: usize,
    /// Running best description length, one entry per ladder level.
    pub trace: Vec<f64>,
}

/// Occupancy of group labels on one side, with O(1) access to the
/// nonempty labels and a lazily cleaned stack of empty ones.
#[derive(Debug, Clone, Default)]
pub(crate) struct Occupancy {
    size: Vec<u64>,
    nonempty: Vec<u32>,
    pos: Vec<u32>,
    empties: Vec<u32>,
    in_stack: Vec<bool>,
}

const NOT_LISTED: u32 = u32::MAX;

impl Occupancy {
    pub(crate) fn new(labels: usize) -> Self {
        let mut occ = Occupancy::default();
        for _ in 0..labels {
            occ.grow();
        }
        occ
    }

    pub(crate) fn size(&self, g: u32) -> u64 {
        self.size.get(g as usize).copied().unwrap_or(0)
    }

    pub(crate) fn count(&self) -> usize {
        self.nonempty.len()
    }

    pub(crate) fn nonempty(&self) -> &[u32] {
        &self.nonempty
    }

    pub(crate) fn sizes(&self) -> &[u64] {
        &self.size
    }

    /// Appends a new empty label.
    pub(crate) fn grow(&mut self) -> u32 {
        let g = self.size.len() as u32;
        self.size.push(0);
        self.pos.push(NOT_LISTED);
        self.in_stack.push(true);
        self.empties.push(g);
        g
    }

    pub(crate) fn add(&mut self, g: u32) {
        let i = g as usize;
        self.size[i] += 1;
        if self.size[i] == 1 {
            self.pos[i] = self.nonempty.len() as u32;
            self.nonempty.push(g);
        }
    }

    pub(crate) fn remove(&mut self, g: u32) {
        let i = g as usize;
        self.size[i] -= 1;
        if self.size[i] == 0 {
            let p = self.pos[i] as usize;
            let last = *self.nonempty.last().unwrap();
            self.nonempty.swap_remove(p);
            if last != g {
                self.pos[last as usize] = p as u32;
            }
            self.pos[i] = NOT_LISTED;
            if !self.in_stack[i] {
                self.in_stack[i] = true;
                self.empties.push(g);
            }
        }
    }

    /// An empty label, reusing one when available. The second value is true
    /// when a new label was appended.
    pub(crate) fn fresh(&mut self) -> (u32, bool) {
        while let Some(&g) = self.empties.last() {
            if self.size[g as usize] == 0 {
                return (g, false);
            }
            self.empties.pop();
            self.in_stack[g as usize] = false;
        }
        (self.grow(), true)
    }
}

/// A partition state the generic search can move items around in.
///
/// Items live on one or more sides; each side has its own group labels.
/// Labels are stable while occupied; empty labels may be reused.
pub trait BlockState {
    fn num_items(&self) -> usize;
    fn num_sides(&self) -> usize;
    fn side(&self, item: usize) -> usize;
    fn group(&self, item: usize) -> u32;
    /// Nonempty labels of `side`.
    fn groups(&self, side: usize) -> &[u32];
    fn group_size(&self, side: usize, g: u32) -> u64;
    /// A label of `side` with no members, allocated if needed.
    fn fresh_group(&mut self, side: usize) -> u32;

    /// Total multiplicity of the item's edges in the proposal multigraph.
    fn item_degree(&self, item: usize) -> u64;
    /// Calls `f(group, multiplicity)` for every edge of `item`, with the
    /// neighbor's current group.
    fn for_each_neighbor(&self, item: usize, f: &mut dyn FnMut(u32, u64));
    /// Edge count between group `w` of `side` and neighbor group `t`.
    fn block_count(&self, side: usize, w: u32, t: u32) -> u64;
    /// Sum of `block_count(side, w, t)` over `w`.
    fn block_degree(&self, side: usize, t: u32) -> u64;
    /// Draws `w` with probability `block_count(side, w, t) / block_degree(side, t)`.
    fn sample_block<R: Rng + ?Sized>(&self, side: usize, t: u32, rng: &mut R) -> u32;

    /// Change of the objective when moving `item` to group `to`.
    fn delta(&mut self, item: usize, to: u32) -> f64;
    fn apply(&mut self, item: usize, to: u32);
    /// Objective evaluated from the maintained aggregates.
    fn total(&self) -> f64;
    fn labels(&self) -> Vec<u32>;
    fn restore(&mut self, labels: &[u32]);
}

/// Derives a per-restart seed from the run seed.
pub(crate) fn restart_seed(seed: u64, restart: usize) -> u64 {
    // splitmix64 step
    let mut z = seed.wrapping_add((restart as u64 + 1).wrapping_mul(0x9E37_79B9_7F4A_7C15));
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}
