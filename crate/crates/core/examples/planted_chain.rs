//! Recovering planted token and memory groups from a sampled sequence.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use seqblock::chain::build_chain;
use seqblock::inference::{fit_sequence, FitConfig};
use seqblock::metrics::nmi;
use seqblock::synthetic::PlantedChain;

fn main() -> seqblock::Result<()> {
    let mut rng = ChaCha8Rng::seed_from_u64(7);
    let planted = PlantedChain::two_by_two(9.0);
    let seq = planted.sample(10_000, &mut rng);

    let cfg = FitConfig::default();
    let fit = fit_sequence(&seq, &cfg, None)?;
    let chain = build_chain(&seq, 1, cfg.chain)?;
    let truth: Vec<u32> = chain.memories().iter().map(|m| planted.memory_rule.group(&m.0)).collect();

    println!("B_N = {}, B_M = {}", fit.num_token_groups, fit.num_memory_groups);
    println!("token groups  {:?}", fit.partition.token_groups);
    println!("NMI tokens    {:.3}", nmi(&fit.partition.token_groups, &planted.token_groups));
    println!("NMI memories  {:.3}", nmi(&fit.partition.memory_groups, &truth));
    println!("Sigma = {:.1} nats, plain chain = {:.1} nats", fit.breakdown.total, fit.baseline);
    Ok(())
}
