//! Token registries, sequences, and the plain-text input formats.

use std::collections::HashMap;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{input, Error, Result};

/// Reserved string used for the record separator token.
pub const SEPARATOR: &str = "§";

/// Default floor applied to zero waiting times, in seconds.
pub const DEFAULT_WAIT_FLOOR: f64 = 1e-6;

/// Whether records are joined with a separator token.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum SeparatorPolicy {
    InsertSeparator,
    None,
}

/// Dense registry of token strings.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct TokenAlphabet {
    entries: Vec<String>,
    #[serde(skip)]
    index: HashMap<String, u32>,
    separator: Option<u32>,
    /// For epoch-annotated alphabets: the (original token, epoch) behind each entry.
    pairs: Option<Vec<(String, u32)>>,
}

impl TokenAlphabet {
    pub fn new() -> Self {
        Self::default()
    }

    /// Alphabet `"0", "1", ..., "n-1"`, used for synthetic data.
    pub fn numbered(n: usize) -> Self {
        let mut a = Self::new();
        for i in 0..n {
            a.intern(&i.to_string());
        }
        a
    }

    pub fn intern(&mut self, token: &str) -> u32 {
        if let Some(&id) = self.index.get(token) {
            return id;
        }
        let id = self.entries.len() as u32;
        self.entries.push(token.to_string());
        self.index.insert(token.to_string(), id);
        id
    }

    pub fn id(&self, token: &str) -> Option<u32> {
        self.index.get(token).copied()
    }

    pub fn name(&self, id: u32) -> &str {
        &self.entries[id as usize]
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn separator_id(&self) -> Option<u32> {
        self.separator
    }

    pub fn entries(&self) -> &[String] {
        &self.entries
    }

    /// `(original token, epoch)` for an annotated entry.
    pub fn pair(&self, id: u32) -> Option<(&str, u32)> {
        self.pairs
            .as_ref()
            .map(|p| (p[id as usize].0.as_str(), p[id as usize].1))
    }

    /// Rebuilds the lookup index after deserialization.
    pub fn reindex(&mut self) {
        self.index = self
            .entries
            .iter()
            .enumerate()
            .map(|(i, s)| (s.clone(), i as u32))
            .collect();
    }
}

/// A discrete token sequence with optional waiting times and epoch labels.
///
/// `waits[t - 1]` is the real time elapsed between tokens `t - 1` and `t`,
/// so a sequence of `T` tokens carries `T - 1` waits.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Sequence {
    pub alphabet: TokenAlphabet,
    pub tokens: Vec<u32>,
    pub waits: Option<Vec<f64>>,
    pub epochs: Option<Vec<u32>>,
}

impl Sequence {
    pub fn from_ids(tokens: Vec<u32>, num_tokens: usize) -> Result<Self> {
        if let Some(&bad) = tokens.iter().find(|&&t| t as usize >= num_tokens) {
            return input(format!("token id {bad} outside alphabet of size {num_tokens}"));
        }
        Ok(Sequence {
            alphabet: TokenAlphabet::numbered(num_tokens),
            tokens,
            waits: None,
            epochs: None,
        })
    }

    pub fn len(&self) -> usize {
        self.tokens.len()
    }

    pub fn is_empty(&self) -> bool {
        self.tokens.is_empty()
    }

    pub fn num_tokens(&self) -> usize {
        self.alphabet.len()
    }

    /// Attaches waiting times; `waits.len()` must equal `len() - 1`.
    pub fn with_waits(mut self, waits: Vec<f64>) -> Result<Self> {
        if waits.len() + 1 != self.tokens.len() {
            return input(format!(
                "expected {} waiting times for {} tokens, got {}",
                self.tokens.len().saturating_sub(1),
                self.tokens.len(),
                waits.len()
            ));
        }
        if let Some(i) = waits.iter().position(|w| !w.is_finite() || *w < 0.0) {
            return input(format!("waiting time {i} is negative or not finite"));
        }
        self.waits = Some(waits);
        Ok(self)
    }

    /// Replaces zero waits by `floor`.
    pub fn floor_waits(&mut self, floor: f64) {
        if let Some(w) = self.waits.as_mut() {
            for x in w.iter_mut().filter(|x| **x == 0.0) {
                *x = floor;
            }
        }
    }

    /// Reorders every run of simultaneous tokens (joined by zero waits) by
    /// token name. Without this the input order of such runs is kept.
    pub fn sort_simultaneous(&mut self) {
        let Some(w) = self.waits.as_ref() else { return };
        let mut start = 0;
        for end in 1..=self.tokens.len() {
            if end < self.tokens.len() && w[end - 1] == 0.0 {
                continue;
            }
            if end - start > 1 {
                let mut run: Vec<(u32, Option<u32>)> = (start..end)
                    .map(|i| (self.tokens[i], self.epochs.as_ref().map(|e| e[i])))
                    .collect();
                run.sort_by(|a, b| self.alphabet.name(a.0).cmp(self.alphabet.name(b.0)));
                for (i, (t, e)) in (start..end).zip(run) {
                    self.tokens[i] = t;
                    if let (Some(ep), Some(e)) = (self.epochs.as_mut(), e) {
                        ep[i] = e;
                    }
                }
            }
            start = end;
        }
    }

    /// The contiguous prefix of the first `len` tokens, re-indexed over the
    /// tokens it actually uses. Returns the prefix and the map from new ids to
    /// ids in `self`.
    pub fn prefix(&self, len: usize) -> (Sequence, Vec<u32>) {
        let len = len.min(self.tokens.len());
        let mut alphabet = TokenAlphabet::new();
        let mut back = Vec::new();
        let mut forward: HashMap<u32, u32> = HashMap::new();
        let tokens = self.tokens[..len]
            .iter()
            .map(|&t| {
                *forward.entry(t).or_insert_with(|| {
                    back.push(t);
                    alphabet.intern(self.alphabet.name(t))
                })
            })
            .collect();
        if let Some(sep) = self.alphabet.separator {
            alphabet.separator = forward.get(&sep).copied();
        }
        let waits = self
            .waits
            .as_ref()
            .map(|w| w[..len.saturating_sub(1)].to_vec());
        let epochs = self.epochs.as_ref().map(|e| e[..len].to_vec());
        (
            Sequence {
                alphabet,
                tokens,
                waits,
                epochs,
            },
            back,
        )
    }
}

/// Concatenates records into a single sequence.
pub fn tokenize_records<S: AsRef<str>>(
    records: &[Vec<S>],
    policy: SeparatorPolicy,
) -> Result<Sequence> {
    if records.is_empty() {
        return input("no records to tokenize");
    }
    let mut alphabet = TokenAlphabet::new();
    let mut tokens = Vec::new();
    for (r, record) in records.iter().enumerate() {
        for tok in record {
            let tok = tok.as_ref();
            if tok.is_empty() {
                return input(format!("empty token in record {r}"));
            }
            if policy == SeparatorPolicy::InsertSeparator && tok == SEPARATOR {
                return input(format!(
                    "record {r} contains the reserved separator token {SEPARATOR:?}"
                ));
            }
            tokens.push(alphabet.intern(tok));
        }
        if policy == SeparatorPolicy::InsertSeparator {
            let sep = alphabet.intern(SEPARATOR);
            alphabet.separator = Some(sep);
            tokens.push(sep);
        }
    }
    Ok(Sequence {
        alphabet,
        tokens,
        waits: None,
        epochs: None,
    })
}

/// Replaces each token `x` by the pair `(x, epoch)`.
pub fn annotate_epochs(seq: &Sequence, epoch_labels: &[u32]) -> Result<Sequence> {
    if epoch_labels.len() != seq.tokens.len() {
        return input(format!(
            "{} epoch labels for {} tokens",
            epoch_labels.len(),
            seq.tokens.len()
        ));
    }
    let max = epoch_labels.iter().copied().max().unwrap_or(0) as usize;
    let mut used = vec![false; max + 1];
    for &e in epoch_labels {
        used[e as usize] = true;
    }
    if seq.tokens.is_empty() || used.iter().any(|u| !u) {
        return input("epoch labels must cover 0..T without gaps");
    }
    let mut alphabet = TokenAlphabet::new();
    let mut pairs = Vec::new();
    let tokens = seq
        .tokens
        .iter()
        .zip(epoch_labels)
        .map(|(&t, &e)| {
            let base = seq.alphabet.name(t);
            let before = alphabet.len();
            let id = alphabet.intern(&format!("{base}@{e}"));
            if alphabet.len() > before {
                pairs.push((base.to_string(), e));
            }
            id
        })
        .collect();
    alphabet.pairs = Some(pairs);
    Ok(Sequence {
        alphabet,
        tokens,
        waits: seq.waits.clone(),
        epochs: Some(epoch_labels.to_vec()),
    })
}

/// Parses the sequence format: one record per line, whitespace-separated tokens.
pub fn parse_records(text: &str) -> Vec<Vec<&str>> {
    text.lines()
        .map(|l| l.split_whitespace().collect::<Vec<_>>())
        .filter(|r| !r.is_empty())
        .collect()
}

pub fn read_sequence_file(path: &Path, policy: SeparatorPolicy) -> Result<Sequence> {
    let text = std::fs::read_to_string(path)?;
    tokenize_records(&parse_records(&text), policy)
}

/// One decimal value (seconds) per line; blank lines are skipped.
pub fn parse_waits(text: &str) -> Result<Vec<f64>> {
    text.lines()
        .enumerate()
        .filter(|(_, l)| !l.trim().is_empty())
        .map(|(i, l)| {
            l.trim()
                .parse::<f64>()
                .map_err(|e| Error::Input(format!("waits line {}: {e}", i + 1)))
        })
        .collect()
}

/// Whitespace-separated epoch labels, mapped to dense ids in order of first appearance.
pub fn parse_epochs(text: &str) -> Vec<u32> {
    let mut ids: HashMap<&str, u32> = HashMap::new();
    text.split_whitespace()
        .map(|s| {
            let next = ids.len() as u32;
            *ids.entry(s).or_insert(next)
        })
        .collect()
}

/// Writes tokens space-separated; separator tokens become line breaks.
pub fn write_sequence(seq: &Sequence) -> String {
    let sep = seq.alphabet.separator_id();
    let mut out = String::new();
    let mut line_start = true;
    for &t in &seq.tokens {
        if Some(t) == sep {
            out.push('\n');
            line_start = true;
            continue;
        }
        if !line_start {
            out.push(' ');
        }
        out.push_str(seq.alphabet.name(t));
        line_start = false;
    }
    if !line_start {
        out.push('\n');
    }
    out
}
