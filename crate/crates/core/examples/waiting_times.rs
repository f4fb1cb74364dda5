//! Continuous time: memories with very different mean waits.
//!
//! Transitions carry no signal here; only the waits separate the memories.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use seqblock::chain::build_chain;
use seqblock::inference::{fit_sequence, order_scan, FitConfig, WaitConfig};
use seqblock::metrics::nmi;
use seqblock::synthetic::{planted_waits, timing_order2, MemoryRule, PlantedChain};
use seqblock::waits::WaitMode;

fn main() -> seqblock::Result<()> {
    let mut rng = ChaCha8Rng::seed_from_u64(11);
    let planted = PlantedChain::two_by_two(1.0);
    let seq = planted.sample(5_000, &mut rng);
    let rule = MemoryRule {
        table: (0..10).map(|x| x % 2).collect(),
        modulus: 2,
    };
    let waits = planted_waits(&seq, 1, &rule, &[1e-3, 1.0], &mut rng);
    let seq = seq.with_waits(waits)?;

    let cfg = FitConfig::default();
    let wc = WaitConfig {
        mode: WaitMode::PerGroup,
        ..Default::default()
    };
    let discrete = fit_sequence(&seq, &cfg, None)?;
    let timed = fit_sequence(&seq, &cfg, Some(&wc))?;
    let chain = build_chain(&seq, 1, cfg.chain)?;
    let truth: Vec<u32> = chain.memories().iter().map(|m| rule.group(&m.0)).collect();
    println!("without waits: B_M = {}", discrete.num_memory_groups);
    println!(
        "with waits:    B_M = {}, NMI = {:.3}, wait term = {:.1} nats",
        timed.num_memory_groups,
        nmi(&timed.partition.memory_groups, &truth),
        timed.breakdown.wait_term.unwrap_or(0.0)
    );

    // timing alone carries an order-2 signal
    let seq = timing_order2(4, 5_000, [0.01, 1.0], &mut rng);
    let plain = order_scan(&seq, 1..=3, &cfg, None)?;
    let timed = order_scan(&seq, 1..=3, &cfg, Some(&wc))?;
    println!("order without waits: {}, with waits: {}", plain.order, timed.order);
    Ok(())
}
