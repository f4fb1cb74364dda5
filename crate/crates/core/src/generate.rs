//! Sampling sequences with exactly prescribed block counts, and shuffles.

use rand::seq::SliceRandom;
use rand::Rng;
use rustc_hash::FxHashMap;
use serde::{Deserialize, Serialize};

use crate::chain::{ChainCounts, MemoryKey};
use crate::dl::Partition;
use crate::error::{input, Error, Result};
use crate::sequence::{Sequence, TokenAlphabet};

/// Hard constraints of the sequential sampler: block counts `e_rs`, token
/// counts `k_x`, the group of every memory the sampler may visit, and the
/// initial memory.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct Constraints {
    pub order: usize,
    pub alphabet: TokenAlphabet,
    pub token_groups: Vec<u32>,
    /// Memories with known groups; unknown memories are dead ends unless
    /// there is a single memory group.
    pub memory_groups: Vec<(MemoryKey, u32)>,
    /// `ers[r][s]`.
    pub ers: Vec<Vec<u64>>,
    pub k: Vec<u64>,
    pub initial: MemoryKey,
}

impl Constraints {
    /// The constraint signature of a fitted chain; the initial memory is the
    /// memory of the first emission.
    pub fn from_fit(chain: &ChainCounts, part: &Partition, alphabet: &TokenAlphabet) -> Result<Self> {
        part.validate(chain)?;
        let bn = part.num_token_groups();
        let bm = part.num_memory_groups();
        let mut ers = vec![vec![0u64; bm]; bn];
        for (x, m, c) in chain.transitions() {
            ers[part.token_groups[x as usize] as usize][part.memory_groups[m as usize] as usize] += c;
        }
        let mut memory_groups: Vec<(MemoryKey, u32)> = chain
            .memories()
            .iter()
            .cloned()
            .zip(part.memory_groups.iter().copied())
            .collect();
        if part.unified {
            for (x, &g) in part.token_groups.iter().enumerate() {
                let key = MemoryKey(vec![x as u32]);
                if chain.memory_id(&key).is_none() {
                    memory_groups.push((key, g));
                }
            }
        }
        let first = chain
            .emissions()
            .first()
            .ok_or_else(|| Error::Input("the chain has no recorded emissions".into()))?;
        Ok(Constraints {
            order: chain.order(),
            alphabet: alphabet.clone(),
            token_groups: part.token_groups.clone(),
            memory_groups,
            ers,
            k: chain.token_counts().to_vec(),
            initial: chain.memory(first.memory).clone(),
        })
    }

    pub fn total(&self) -> u64 {
        self.k.iter().sum()
    }

    fn validate(&self) -> Result<()> {
        let n = self.alphabet.len();
        if self.k.len() != n || self.token_groups.len() != n {
            return input("token counts and groups must cover the alphabet");
        }
        if self.initial.order() != self.order || self.initial.0.iter().any(|&x| x as usize >= n) {
            return input("initial memory does not match the order or alphabet");
        }
        let bn = self.ers.len();
        let mut e_r = vec![0u64; bn];
        for (x, &g) in self.token_groups.iter().enumerate() {
            if g as usize >= bn {
                return input(format!("token group {g} has no block counts"));
            }
            e_r[g as usize] += self.k[x];
        }
        for (r, row) in self.ers.iter().enumerate() {
            if row.iter().sum::<u64>() != e_r[r] {
                return input(format!("block counts of token group {r} disagree with its token counts"));
            }
        }
        Ok(())
    }
}

/// Samples a sequence by the sequential process: from a memory in group `s`
/// the next token's group `r` is drawn with probability `e_rs / e_s` and the
/// token with probability `k_x / e_r`, all counts being decremented as they
/// are used. The result uses every count exactly.
///
/// A run that reaches a memory with no emissions left, or a memory with no
/// group, is restarted; after `max_attempts` restarts the call fails.
pub fn generate_sequence<R: Rng + ?Sized>(c: &Constraints, max_attempts: usize, rng: &mut R) -> Result<Sequence> {
    c.validate()?;
    let groups: FxHashMap<&MemoryKey, u32> = c.memory_groups.iter().map(|(k, g)| (k, *g)).collect();
    let bm = c.ers.first().map_or(0, |row| row.len());
    let group_of = |key: &MemoryKey| -> Option<u32> {
        groups.get(key).copied().or(if bm == 1 { Some(0) } else { None })
    };
    if group_of(&c.initial).is_none() {
        return input("the initial memory has no group");
    }
    let mut members: Vec<Vec<u32>> = vec![Vec::new(); c.ers.len()];
    for (x, &g) in c.token_groups.iter().enumerate() {
        if c.k[x] > 0 {
            members[g as usize].push(x as u32);
        }
    }
    let total = c.total() as usize;
    for _ in 0..max_attempts.max(1) {
        if let Some(tokens) = attempt(c, &members, &group_of, total, rng) {
            return Ok(Sequence {
                alphabet: c.alphabet.clone(),
                tokens,
                waits: None,
                epochs: None,
            });
        }
    }
    Err(Error::Domain(format!(
        "generation reached a dead end in all {} attempts",
        max_attempts.max(1)
    )))
}

fn attempt<R: Rng + ?Sized>(
    c: &Constraints,
    members: &[Vec<u32>],
    group_of: &dyn Fn(&MemoryKey) -> Option<u32>,
    total: usize,
    rng: &mut R,
) -> Option<Vec<u32>> {
    let mut ers = c.ers.clone();
    let bm = ers.first().map_or(0, |row| row.len());
    let mut e_s: Vec<u64> = (0..bm).map(|s| ers.iter().map(|row| row[s]).sum()).collect();
    let mut e_r: Vec<u64> = ers.iter().map(|row| row.iter().sum()).collect();
    let mut k = c.k.clone();
    let mut memory = c.initial.clone();
    let mut tokens: Vec<u32> = memory.0.iter().rev().copied().collect();
    tokens.reserve(total);
    for _ in 0..total {
        let s = group_of(&memory)? as usize;
        if e_s[s] == 0 {
            return None;
        }
        let mut u = rng.random_range(0..e_s[s]);
        let mut r = 0;
        while u >= ers[r][s] {
            u -= ers[r][s];
            r += 1;
        }
        let mut v = rng.random_range(0..e_r[r]);
        let mut x = 0;
        for &y in &members[r] {
            if v < k[y as usize] {
                x = y;
                break;
            }
            v -= k[y as usize];
        }
        ers[r][s] -= 1;
        e_s[s] -= 1;
        e_r[r] -= 1;
        k[x as usize] -= 1;
        tokens.push(x);
        if c.order > 0 {
            memory = memory.shifted(x);
        }
    }
    Some(tokens)
}

/// Uniformly random permutation of the tokens. A wait travels with the
/// token it precedes; the wait left without a token goes to the token that
/// had none.
pub fn shuffle_null<R: Rng + ?Sized>(seq: &Sequence, rng: &mut R) -> Result<Sequence> {
    if seq.is_empty() {
        return input("cannot shuffle an empty sequence");
    }
    let mut perm: Vec<usize> = (0..seq.len()).collect();
    perm.shuffle(rng);
    let tokens = perm.iter().map(|&j| seq.tokens[j]).collect();
    let waits = seq.waits.as_ref().map(|w| {
        let orphan = if perm[0] == 0 { None } else { Some(w[perm[0] - 1]) };
        perm[1..]
            .iter()
            .map(|&j| if j == 0 { orphan.expect("token 0 placed after position 0") } else { w[j - 1] })
            .collect()
    });
    let epochs = seq.epochs.as_ref().map(|e| perm.iter().map(|&j| e[j]).collect());
    Ok(Sequence {
        alphabet: seq.alphabet.clone(),
        tokens,
        waits,
        epochs,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::chain::{build_chain, ChainOptions};
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn abab_constraints_are_exhausted() {
        let seq = Sequence::from_ids(vec![0, 1, 0, 1], 2).unwrap();
        let chain = build_chain(&seq, 1, ChainOptions::default()).unwrap();
        let part = Partition::trivial(&chain, false).unwrap();
        let c = Constraints::from_fit(&chain, &part, &seq.alphabet).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        for _ in 0..50 {
            let s = generate_sequence(&c, 100, &mut rng).unwrap();
            assert_eq!(s.tokens[0], 0);
            let mut counts = [0; 2];
            for &x in &s.tokens[1..] {
                counts[x as usize] += 1;
            }
            assert_eq!(counts, [1, 2]);
        }
    }

    #[test]
    fn shuffle_keeps_multisets() {
        let seq = Sequence::from_ids(vec![0, 1, 2, 2, 1, 0, 3], 4)
            .unwrap()
            .with_waits(vec![1.0, 2.0, 3.0, 4.0, 5.0, 6.0])
            .unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let s = shuffle_null(&seq, &mut rng).unwrap();
        let mut a = s.tokens.clone();
        a.sort_unstable();
        assert_eq!(a, vec![0, 0, 1, 1, 2, 2, 3]);
        let mut w = s.waits.unwrap();
        w.sort_by(f64::total_cmp);
        assert_eq!(w, vec![1.0, 2.0, 3.0, 4.0, 5.0, 6.0]);
    }

    #[test]
    fn inconsistent_constraints_rejected() {
        let c = Constraints {
            order: 1,
            alphabet: TokenAlphabet::numbered(2),
            token_groups: vec![0, 0],
            memory_groups: vec![(MemoryKey(vec![0]), 0)],
            ers: vec![vec![3]],
            k: vec![1, 1],
            initial: MemoryKey(vec![0]),
        };
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        assert!(generate_sequence(&c, 10, &mut rng).is_err());
    }
}
