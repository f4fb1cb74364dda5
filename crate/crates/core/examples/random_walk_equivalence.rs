//! A graph's adjacency counts read as order-1 transitions: the chain's block
//! likelihood and the degree-corrected block model differ by a constant.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use seqblock::chain::{ChainCounts, MemoryKey};
use seqblock::dl::{block_mle_loglik, Partition};
use seqblock::edges::EdgeStream;
use seqblock::temporal::dcsbm_loglik;

fn main() -> seqblock::Result<()> {
    let mut rng = ChaCha8Rng::seed_from_u64(1);
    let n = 12usize;
    let pairs: Vec<(u32, u32)> = (0..60)
        .map(|_| (rng.random_range(0..n as u32), rng.random_range(0..n as u32)))
        .collect();
    let stream = EdgeStream::from_indices(n, pairs.clone(), false)?;
    let mut triples = Vec::new();
    for &(i, j) in &pairs {
        triples.push((j, i, 1));
        triples.push((i, j, 1));
    }
    let memories = (0..n as u32).map(|x| MemoryKey(vec![x])).collect();
    let chain = ChainCounts::from_transitions(n, memories, &triples)?;

    for _ in 0..5 {
        let b = rng.random_range(1..5u32);
        let groups: Vec<u32> = (0..n).map(|_| rng.random_range(0..b)).collect();
        let part = Partition::unified(&chain, groups.clone())?.compacted();
        let groups = part.token_groups.clone();
        let chain_ll = block_mle_loglik(&chain, &part)?;
        let graph_ll = dcsbm_loglik(&stream, &groups)?;
        println!("{chain_ll:>10.4} - {graph_ll:>10.4} = {:.9}", chain_ll - graph_ll);
    }
    Ok(())
}
