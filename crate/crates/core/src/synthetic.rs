//! Generators of data with planted structure, for examples and tests.

use rand::seq::IndexedRandom;
use rand::Rng;

use crate::edges::EdgeStream;
use crate::error::{input, Result};
use crate::sequence::Sequence;

/// How a memory (most recent token first) maps to its planted group:
/// the sum of `table[x]` over the memory, modulo `modulus`.
#[derive(Debug, Clone, PartialEq)]
pub struct MemoryRule {
    pub table: Vec<u32>,
    pub modulus: u32,
}

impl MemoryRule {
    pub fn group(&self, memory: &[u32]) -> u32 {
        memory.iter().map(|&x| self.table[x as usize]).sum::<u32>() % self.modulus
    }
}

/// A block chain with planted token groups and a memory rule.
///
/// Given a memory in group `s`, the next token's group is drawn from row `s`
/// of `affinity` and the token uniformly within that group.
#[derive(Debug, Clone)]
pub struct PlantedChain {
    pub order: usize,
    pub token_groups: Vec<u32>,
    pub memory_rule: MemoryRule,
    /// Unnormalized weights, `affinity[s][r]`.
    pub affinity: Vec<Vec<f64>>,
}

impl PlantedChain {
    /// Ten tokens in groups `{0..4}` and `{5..9}`, memories grouped by the
    /// parity of the last token, which favors the matching token group by
    /// `ratio : 1`.
    pub fn two_by_two(ratio: f64) -> Self {
        PlantedChain {
            order: 1,
            token_groups: (0..10).map(|x| u32::from(x >= 5)).collect(),
            memory_rule: MemoryRule {
                table: (0..10).map(|x| x % 2).collect(),
                modulus: 2,
            },
            affinity: vec![vec![ratio, 1.0], vec![1.0, ratio]],
        }
    }

    /// Order-2 chain over the same ten tokens: the memory group is the XOR
    /// of the groups of the last two tokens, so neither token alone says
    /// anything about the next one.
    pub fn xor_order2(ratio: f64) -> Self {
        let token_groups: Vec<u32> = (0..10).map(|x| u32::from(x >= 5)).collect();
        PlantedChain {
            order: 2,
            memory_rule: MemoryRule {
                table: token_groups.clone(),
                modulus: 2,
            },
            token_groups,
            affinity: vec![vec![ratio, 1.0], vec![1.0, ratio]],
        }
    }

    pub fn num_tokens(&self) -> usize {
        self.token_groups.len()
    }

    fn members(&self) -> Vec<Vec<u32>> {
        let b = self.token_groups.iter().max().map_or(0, |&g| g as usize + 1);
        let mut m = vec![Vec::new(); b];
        for (x, &g) in self.token_groups.iter().enumerate() {
            m[g as usize].push(x as u32);
        }
        m
    }

    pub fn sample<R: Rng + ?Sized>(&self, len: usize, rng: &mut R) -> Sequence {
        let members = self.members();
        let n = self.num_tokens() as u32;
        let mut tokens: Vec<u32> = (0..self.order.min(len)).map(|_| rng.random_range(0..n)).collect();
        let mut memory = Vec::with_capacity(self.order);
        while tokens.len() < len {
            memory.clear();
            memory.extend(tokens.iter().rev().take(self.order));
            let row = &self.affinity[self.memory_rule.group(&memory) as usize];
            let r = weighted(row, rng);
            let group = &members[r];
            tokens.push(group[rng.random_range(0..group.len())]);
        }
        Sequence::from_ids(tokens, self.num_tokens()).expect("generated ids are in range")
    }
}

fn weighted<R: Rng + ?Sized>(w: &[f64], rng: &mut R) -> usize {
    let total: f64 = w.iter().sum();
    let mut u = rng.random::<f64>() * total;
    for (i, &x) in w.iter().enumerate() {
        if u < x {
            return i;
        }
        u -= x;
    }
    w.len() - 1
}

/// Exponential draw with the given mean.
pub fn exponential<R: Rng + ?Sized>(mean: f64, rng: &mut R) -> f64 {
    -mean * (1.0 - rng.random::<f64>()).ln()
}

/// Waits whose mean depends on the planted group of the preceding memory:
/// `waits[t - 1]` has mean `scales[rule.group(memory before t)]`. The first
/// `order - 1` waits use the truncated memory.
pub fn planted_waits<R: Rng + ?Sized>(
    seq: &Sequence,
    order: usize,
    rule: &MemoryRule,
    scales: &[f64],
    rng: &mut R,
) -> Vec<f64> {
    (1..seq.len())
        .map(|t| {
            let lo = t.saturating_sub(order);
            let memory: Vec<u32> = seq.tokens[lo..t].iter().rev().copied().collect();
            exponential(scales[rule.group(&memory) as usize], rng)
        })
        .collect()
}

/// Uniform i.i.d. tokens whose waits depend on the last two tokens only, so
/// that the order-2 signal is carried by timing alone. The rate switches
/// between `scales[0]` and `scales[1]` by the XOR of the two tokens' parity.
pub fn timing_order2<R: Rng + ?Sized>(num_tokens: usize, len: usize, scales: [f64; 2], rng: &mut R) -> Sequence {
    let tokens: Vec<u32> = (0..len).map(|_| rng.random_range(0..num_tokens as u32)).collect();
    let seq = Sequence::from_ids(tokens, num_tokens).expect("generated ids are in range");
    let rule = MemoryRule {
        table: (0..num_tokens as u32).map(|x| x % 2).collect(),
        modulus: 2,
    };
    let waits = planted_waits(&seq, 2, &rule, &scales, rng);
    seq.with_waits(waits).expect("one wait per transition")
}

/// Uniformly random undirected edges between distinct nodes, in random order.
pub fn random_stream<R: Rng + ?Sized>(num_nodes: usize, num_edges: usize, rng: &mut R) -> Result<EdgeStream> {
    if num_nodes < 2 {
        return input("a random stream needs at least two nodes");
    }
    let n = num_nodes as u32;
    let pairs = (0..num_edges)
        .map(|_| {
            let i = rng.random_range(0..n);
            let j = (i + rng.random_range(1..n)) % n;
            (i, j)
        })
        .collect();
    EdgeStream::from_indices(num_nodes, pairs, false)
}

/// Two equal assortative node groups whose edge labels follow a sticky
/// chain: internal-0, internal-1 and cross edges come in runs, the next label
/// repeating the last one with probability `stay`.
pub fn planted_stream<R: Rng + ?Sized>(
    num_nodes: usize,
    num_edges: usize,
    stay: f64,
    rng: &mut R,
) -> Result<(EdgeStream, Vec<u32>)> {
    if num_nodes < 4 {
        return input("a planted stream needs at least four nodes");
    }
    let half = num_nodes / 2;
    let groups: Vec<u32> = (0..num_nodes).map(|i| u32::from(i >= half)).collect();
    let sides = [(0..half as u32).collect::<Vec<_>>(), (half as u32..num_nodes as u32).collect()];
    let pick = |side: usize, rng: &mut R| *sides[side].choose(rng).expect("nonempty side");
    // labels: 0 = (0,0), 1 = (1,1), 2 = (0,1); internal edges twice as likely
    let weights = [2.0, 2.0, 1.0];
    let mut label = weighted(&weights, rng);
    let mut pairs = Vec::with_capacity(num_edges);
    for _ in 0..num_edges {
        if !rng.random_bool(stay) {
            label = weighted(&weights, rng);
        }
        let (i, j) = match label {
            0 | 1 => loop {
                let (i, j) = (pick(label, rng), pick(label, rng));
                if i != j {
                    break (i, j);
                }
            },
            _ => (pick(0, rng), pick(1, rng)),
        };
        pairs.push((i, j));
    }
    Ok((EdgeStream::from_indices(num_nodes, pairs, false)?, groups))
}
