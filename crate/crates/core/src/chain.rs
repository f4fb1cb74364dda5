//! Sufficient statistics of an order-`n` chain over a token sequence.

use rustc_hash::FxHashMap;
use serde::{Deserialize, Serialize};

use crate::error::{input, Result};
use crate::sequence::Sequence;

/// How the first `n` tokens are handled.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
pub enum Boundary {
    /// The first `n` tokens seed the initial memory and are not emissions.
    #[default]
    ConditionOnPrefix,
    /// The sequence wraps around; every token is an emission.
    Cyclic,
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct ChainOptions {
    pub boundary: Boundary,
    /// Truncate memories at separator tokens: older positions are replaced by the separator.
    pub reset_at_separator: bool,
    /// Leading tokens held out as context when conditioning on the prefix;
    /// the effective prefix is `max(n, prefix)`. Lets chains of different
    /// orders describe the same emissions.
    pub prefix: usize,
}

/// The `n` most recent tokens, most recent first.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct MemoryKey(pub Vec<u32>);

impl MemoryKey {
    pub fn order(&self) -> usize {
        self.0.len()
    }

    /// The memory that follows after emitting `token`.
    pub fn shifted(&self, token: u32) -> MemoryKey {
        let mut w = Vec::with_capacity(self.0.len());
        w.push(token);
        w.extend_from_slice(&self.0[..self.0.len() - 1]);
        MemoryKey(w)
    }
}

/// One observed transition: `memory -> token` at sequence position `position`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct Emission {
    pub position: usize,
    pub token: u32,
    pub memory: u32,
}

/// Sparse transition counts `a(x, m)` with per-token and per-memory totals.
#[derive(Debug, Clone)]
pub struct ChainCounts {
    order: usize,
    num_tokens: usize,
    memories: Vec<MemoryKey>,
    memory_index: FxHashMap<MemoryKey, u32>,
    token_adj: Vec<Vec<(u32, u64)>>,
    memory_adj: Vec<Vec<(u32, u64)>>,
    k: Vec<u64>,
    a_mem: Vec<u64>,
    total: u64,
    emissions: Vec<Emission>,
}

fn window(seq: &Sequence, t: usize, n: usize, opts: ChainOptions) -> Vec<u32> {
    let len = seq.tokens.len();
    let sep = if opts.reset_at_separator {
        seq.alphabet.separator_id()
    } else {
        None
    };
    let mut w = Vec::with_capacity(n);
    let mut hit_sep = false;
    for i in 1..=n {
        let pos = (t + len * n - i) % len;
        if hit_sep {
            w.push(sep.unwrap());
            continue;
        }
        let tok = seq.tokens[pos];
        if Some(tok) == sep {
            hit_sep = true;
        }
        w.push(tok);
    }
    w
}

/// Counts every `(memory, token)` transition of `seq` at order `n`.
pub fn build_chain(seq: &Sequence, n: usize, opts: ChainOptions) -> Result<ChainCounts> {
    if n == 0 {
        return input("chain order must be at least 1");
    }
    let len = seq.tokens.len();
    let start = match opts.boundary {
        Boundary::ConditionOnPrefix => {
            let start = n.max(opts.prefix);
            if len <= start {
                return input(format!(
                    "sequence of length {len} is too short for order {n}"
                ));
            }
            start
        }
        Boundary::Cyclic => {
            if len == 0 {
                return input("empty sequence");
            }
            0
        }
    };
    let mut memory_index: FxHashMap<MemoryKey, u32> = FxHashMap::default();
    let mut memories = Vec::new();
    let mut emissions = Vec::with_capacity(len - start);
    for t in start..len {
        let key = MemoryKey(window(seq, t, n, opts));
        let m = match memory_index.get(&key) {
            Some(&m) => m,
            None => {
                let m = memories.len() as u32;
                memories.push(key.clone());
                memory_index.insert(key, m);
                m
            }
        };
        emissions.push(Emission {
            position: t,
            token: seq.tokens[t],
            memory: m,
        });
    }
    let mut pairs: FxHashMap<(u32, u32), u64> = FxHashMap::default();
    for e in &emissions {
        *pairs.entry((e.token, e.memory)).or_insert(0) += 1;
    }
    let mut triples: Vec<(u32, u32, u64)> = pairs.into_iter().map(|((x, m), c)| (x, m, c)).collect();
    triples.sort_unstable();
    let mut chain = ChainCounts::assemble(n, seq.num_tokens(), memories, memory_index, &triples);
    chain.emissions = emissions;
    Ok(chain)
}

impl ChainCounts {
    fn assemble(
        order: usize,
        num_tokens: usize,
        memories: Vec<MemoryKey>,
        memory_index: FxHashMap<MemoryKey, u32>,
        triples: &[(u32, u32, u64)],
    ) -> Self {
        let mut token_adj = vec![Vec::new(); num_tokens];
        let mut memory_adj = vec![Vec::new(); memories.len()];
        let mut k = vec![0u64; num_tokens];
        let mut a_mem = vec![0u64; memories.len()];
        let mut total = 0;
        for &(x, m, c) in triples {
            if c == 0 {
                continue;
            }
            token_adj[x as usize].push((m, c));
            memory_adj[m as usize].push((x, c));
            k[x as usize] += c;
            a_mem[m as usize] += c;
            total += c;
        }
        for adj in token_adj.iter_mut().chain(memory_adj.iter_mut()) {
            adj.sort_unstable();
        }
        ChainCounts {
            order,
            num_tokens,
            memories,
            memory_index,
            token_adj,
            memory_adj,
            k,
            a_mem,
            total,
            emissions: Vec::new(),
        }
    }

    /// Builds counts directly from `(token, memory, count)` triples.
    ///
    /// No emission trace is recorded, so waiting-time statistics and
    /// generation seeds are unavailable for such chains.
    pub fn from_transitions(
        num_tokens: usize,
        memories: Vec<MemoryKey>,
        triples: &[(u32, u32, u64)],
    ) -> Result<Self> {
        let order = memories.first().map_or(1, |m| m.order());
        let mut memory_index = FxHashMap::default();
        for (i, m) in memories.iter().enumerate() {
            if m.order() != order {
                return input("memories of mixed order");
            }
            if memory_index.insert(m.clone(), i as u32).is_some() {
                return input("duplicate memory key");
            }
        }
        let mut merged: FxHashMap<(u32, u32), u64> = FxHashMap::default();
        for &(x, m, c) in triples {
            if x as usize >= num_tokens || m as usize >= memories.len() {
                return input(format!("transition ({x}, {m}) out of range"));
            }
            *merged.entry((x, m)).or_insert(0) += c;
        }
        let mut triples: Vec<_> = merged.into_iter().map(|((x, m), c)| (x, m, c)).collect();
        triples.sort_unstable();
        Ok(Self::assemble(order, num_tokens, memories, memory_index, &triples))
    }

    pub fn order(&self) -> usize {
        self.order
    }

    pub fn num_tokens(&self) -> usize {
        self.num_tokens
    }

    pub fn num_memories(&self) -> usize {
        self.memories.len()
    }

    /// Total number of transitions `E`.
    pub fn total(&self) -> u64 {
        self.total
    }

    pub fn memory(&self, m: u32) -> &MemoryKey {
        &self.memories[m as usize]
    }

    pub fn memories(&self) -> &[MemoryKey] {
        &self.memories
    }

    pub fn memory_id(&self, key: &MemoryKey) -> Option<u32> {
        self.memory_index.get(key).copied()
    }

    /// Emission count `k_x`.
    pub fn token_count(&self, x: u32) -> u64 {
        self.k[x as usize]
    }

    pub fn token_counts(&self) -> &[u64] {
        &self.k
    }

    /// Outgoing total `a_m`.
    pub fn memory_count(&self, m: u32) -> u64 {
        self.a_mem[m as usize]
    }

    pub fn memory_counts(&self) -> &[u64] {
        &self.a_mem
    }

    /// `(memory, count)` pairs for transitions into token `x`.
    pub fn token_neighbors(&self, x: u32) -> &[(u32, u64)] {
        &self.token_adj[x as usize]
    }

    /// `(token, count)` pairs for transitions out of memory `m`.
    pub fn memory_neighbors(&self, m: u32) -> &[(u32, u64)] {
        &self.memory_adj[m as usize]
    }

    pub fn count(&self, x: u32, m: u32) -> u64 {
        let adj = &self.memory_adj[m as usize];
        match adj.binary_search_by_key(&x, |&(y, _)| y) {
            Ok(i) => adj[i].1,
            Err(_) => 0,
        }
    }

    /// All `(token, memory, count)` triples with nonzero count.
    pub fn transitions(&self) -> impl Iterator<Item = (u32, u32, u64)> + '_ {
        self.memory_adj
            .iter()
            .enumerate()
            .flat_map(|(m, adj)| adj.iter().map(move |&(x, c)| (x, m as u32, c)))
    }

    pub fn emissions(&self) -> &[Emission] {
        &self.emissions
    }

    /// For order 1: the memory index whose key is `[x]`, if observed.
    pub fn memory_of_token(&self, x: u32) -> Option<u32> {
        if self.order != 1 {
            return None;
        }
        self.memory_index.get(&MemoryKey(vec![x])).copied()
    }

    /// Recounts every total from the sparse transition map.
    pub fn check_consistency(&self) -> bool {
        let mut k = vec![0u64; self.num_tokens];
        let mut a = vec![0u64; self.memories.len()];
        let mut total = 0;
        for (x, m, c) in self.transitions() {
            k[x as usize] += c;
            a[m as usize] += c;
            total += c;
        }
        let from_tokens: u64 = self
            .token_adj
            .iter()
            .flat_map(|adj| adj.iter().map(|&(_, c)| c))
            .sum();
        k == self.k && a == self.a_mem && total == self.total && from_tokens == total
    }
}
