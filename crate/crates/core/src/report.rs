//! Machine-readable run reports and TSV dumps.
//!
//! Numbers are written in their shortest round-trip form, so a report read
//! back is bit-identical to the one written.

use std::collections::BTreeMap;
use std::fmt::Write as _;

use serde::{Deserialize, Serialize};

use crate::chain::{build_chain, ChainCounts};
use crate::dl::{DLBreakdown, Partition, Units};
use crate::edges::EdgeStream;
use crate::error::{Error, Result};
use crate::inference::{ChainState, FitConfig, FitResult, OrderRow, WaitConfig};
use crate::predict::{Holdout, SplitSpec};
use crate::sequence::{Sequence, TokenAlphabet};
use crate::temporal::{temporal_dl, TemporalFit};

/// Relative tolerance used when a stored total is checked against a recompute.
pub const VERIFY_TOLERANCE: f64 = 1e-9;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DatasetDigest {
    /// Tokens of the sequence or events of the stream.
    pub items: usize,
    /// Distinct tokens, or nodes for a stream.
    pub alphabet_size: usize,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub transitions: Option<u64>,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub memories: Option<usize>,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub directed: Option<bool>,
}

impl DatasetDigest {
    pub fn of_chain(seq: &Sequence, chain: &ChainCounts) -> Self {
        DatasetDigest {
            items: seq.len(),
            alphabet_size: seq.num_tokens(),
            transitions: Some(chain.total()),
            memories: Some(chain.num_memories()),
            directed: None,
        }
    }

    pub fn of_stream(stream: &EdgeStream) -> Self {
        DatasetDigest {
            items: stream.len(),
            alphabet_size: stream.num_nodes(),
            transitions: None,
            memories: None,
            directed: Some(stream.directed()),
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ReportConfig {
    pub fit: FitConfig,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub waits: Option<WaitConfig>,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub split: Option<SplitSpec>,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub order_range: Option<(usize, usize)>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct RunReport {
    pub command: Vec<String>,
    pub subcommand: String,
    pub seed: u64,
    pub config: ReportConfig,
    pub dataset: DatasetDigest,
    pub units: Units,
    pub order: usize,
    /// Raw terms in nats; the source of truth for verification.
    pub breakdown: DLBreakdown,
    pub dl_nats: BTreeMap<String, f64>,
    pub dl_bits: BTreeMap<String, f64>,
    /// Total in the requested units.
    pub total: f64,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub num_token_groups: Option<usize>,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub num_memory_groups: Option<usize>,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub num_node_groups: Option<usize>,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub baseline: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub accept_rate: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub order_table: Option<Vec<OrderRow>>,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub partition: Option<Partition>,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub node_groups: Option<Vec<u32>>,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub label_names: Option<Vec<String>>,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub holdout: Option<Holdout>,
    pub restarts: usize,
    pub wall_seconds: f64,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub profile: Option<BTreeMap<String, f64>>,
}

impl RunReport {
    fn base(
        subcommand: &str,
        command: Vec<String>,
        config: ReportConfig,
        dataset: DatasetDigest,
        units: Units,
        order: usize,
        breakdown: DLBreakdown,
    ) -> Self {
        RunReport {
            command,
            subcommand: subcommand.to_string(),
            seed: config.fit.seed,
            restarts: config.fit.restarts,
            config,
            dataset,
            units,
            order,
            dl_nats: breakdown.to_record(Units::Nats),
            dl_bits: breakdown.to_record(Units::Bits),
            total: units.convert(breakdown.total),
            breakdown,
            num_token_groups: None,
            num_memory_groups: None,
            num_node_groups: None,
            baseline: None,
            accept_rate: None,
            order_table: None,
            partition: None,
            node_groups: None,
            label_names: None,
            holdout: None,
            wall_seconds: 0.0,
            profile: None,
        }
    }

    pub fn from_fit(
        command: Vec<String>,
        config: ReportConfig,
        dataset: DatasetDigest,
        units: Units,
        fit: &FitResult,
    ) -> Self {
        let mut r = Self::base("fit", command, config, dataset, units, fit.order, fit.breakdown);
        r.num_token_groups = Some(fit.num_token_groups);
        r.num_memory_groups = Some(fit.num_memory_groups);
        r.baseline = Some(fit.baseline);
        r.accept_rate = Some(fit.accept_rate);
        r.order_table = fit.order_table.clone();
        r.partition = Some(fit.partition.clone());
        r
    }

    /// Label-chain fields are present only for order >= 1.
    pub fn from_temporal(
        command: Vec<String>,
        config: ReportConfig,
        dataset: DatasetDigest,
        units: Units,
        fit: &TemporalFit,
    ) -> Self {
        let mut r = Self::base("temporal", command, config, dataset, units, fit.order, fit.breakdown);
        r.num_node_groups = Some(fit.num_node_groups);
        r.node_groups = Some(fit.node_groups.clone());
        if let Some(p) = &fit.label_partition {
            r.num_token_groups = Some(fit.num_label_token_groups());
            r.num_memory_groups = Some(fit.num_label_memory_groups());
            r.partition = Some(p.clone());
            r.label_names = Some(fit.label_names.clone());
        }
        r
    }

    /// The breakdown holds the training fit; the holdout carries the bound.
    pub fn from_holdout(
        command: Vec<String>,
        config: ReportConfig,
        dataset: DatasetDigest,
        units: Units,
        order: usize,
        holdout: Holdout,
    ) -> Self {
        let breakdown = DLBreakdown {
            total: holdout.train_total,
            ..Default::default()
        };
        let mut r = Self::base("predict", command, config, dataset, units, order, breakdown);
        r.dl_nats = BTreeMap::from([("train_total".to_string(), holdout.train_total)]);
        r.dl_bits = BTreeMap::from([("train_total".to_string(), Units::Bits.convert(holdout.train_total))]);
        r.holdout = Some(holdout);
        r
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }

    /// Parses a report and checks that its totals are self-consistent.
    pub fn from_json(text: &str) -> Result<Self> {
        let r: RunReport = serde_json::from_str(text)?;
        r.check_totals()?;
        Ok(r)
    }

    /// Stored totals against the stored terms; no data needed.
    pub fn check_totals(&self) -> Result<()> {
        let b = &self.breakdown;
        if self.holdout.is_none() && !close(b.sum_of_terms(), b.total) {
            return Err(Error::Invariant(format!(
                "report terms sum to {} but the total is {}",
                b.sum_of_terms(),
                b.total
            )));
        }
        if let Some(h) = &self.holdout {
            if !close(h.full_total - h.train_total, h.delta_sigma) || h.log_bound != -h.delta_sigma {
                return Err(Error::Invariant("holdout fields are inconsistent".into()));
            }
        }
        if !close(self.units.convert(b.total), self.total) {
            return Err(Error::Invariant("total in report units disagrees with the breakdown".into()));
        }
        Ok(())
    }

    /// Recomputes the description length of a sequence fit from scratch.
    pub fn verify_sequence(&self, seq: &Sequence) -> Result<f64> {
        let part = self
            .partition
            .as_ref()
            .ok_or_else(|| Error::Input("the report holds no partition".into()))?;
        let chain = build_chain(seq, self.order, self.config.fit.chain)?;
        let stats = match &self.config.waits {
            Some(w) => Some((w.stats(&chain, seq)?, w.mode)),
            None => None,
        };
        let st = ChainState::new(&chain, part, self.config.fit.prior, stats.as_ref().map(|(s, m)| (s, *m)))?;
        let total = st.breakdown()?.total;
        self.compare(total)
    }

    /// Recomputes the description length of a temporal fit from scratch.
    pub fn verify_stream(&self, stream: &EdgeStream) -> Result<f64> {
        let groups = self
            .node_groups
            .as_ref()
            .ok_or_else(|| Error::Input("the report holds no node groups".into()))?;
        let total = temporal_dl(stream, groups, self.order, self.partition.as_ref(), &self.config.fit.prior)?.total;
        self.compare(total)
    }

    fn compare(&self, total: f64) -> Result<f64> {
        if !close(total, self.breakdown.total) {
            return Err(Error::Invariant(format!(
                "recomputed total {total} differs from the reported {}",
                self.breakdown.total
            )));
        }
        Ok(total)
    }
}

fn close(a: f64, b: f64) -> bool {
    (a - b).abs() <= VERIFY_TOLERANCE * a.abs().max(b.abs()).max(1.0)
}

fn memory_name(alphabet: &TokenAlphabet, key: &[u32]) -> String {
    key.iter().map(|&x| alphabet.name(x)).collect::<Vec<_>>().join(",")
}

/// `item<TAB>group` rows: `token:NAME` for tokens and `memory:A,B` for
/// memories (most recent first).
pub fn partition_tsv(chain: &ChainCounts, part: &Partition, alphabet: &TokenAlphabet) -> String {
    let mut out = String::from("item\tgroup\n");
    for (x, g) in part.token_groups.iter().enumerate() {
        let _ = writeln!(out, "token:{}\t{g}", alphabet.name(x as u32));
    }
    for (key, g) in chain.memories().iter().zip(&part.memory_groups) {
        let _ = writeln!(out, "memory:{}\t{g}", memory_name(alphabet, &key.0));
    }
    out
}

/// `node:NAME` rows, then the label partition (`label:r-s`) when present.
pub fn temporal_partition_tsv(stream: &EdgeStream, fit: &TemporalFit) -> String {
    let mut out = String::from("item\tgroup\n");
    for (i, g) in fit.node_groups.iter().enumerate() {
        let _ = writeln!(out, "node:{}\t{g}", stream.nodes().name(i as u32));
    }
    if let Some(p) = &fit.label_partition {
        for (name, g) in fit.label_names.iter().zip(&p.token_groups) {
            let _ = writeln!(out, "label:{name}\t{g}");
        }
    }
    out
}

pub fn order_table_tsv(rows: &[OrderRow], units: Units) -> String {
    let mut out = String::from("order\tB_N\tB_M\ttotal\tbaseline\n");
    for r in rows {
        let _ = writeln!(
            out,
            "{}\t{}\t{}\t{}\t{}",
            r.order,
            r.num_token_groups,
            r.num_memory_groups,
            units.convert(r.total),
            units.convert(r.baseline)
        );
    }
    out
}
