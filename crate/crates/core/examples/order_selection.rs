//! Choosing the Markov order: an order-2 chain, and the same tokens shuffled.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use seqblock::generate::shuffle_null;
use seqblock::inference::{order_scan, FitConfig};
use seqblock::sequence::Sequence;
use seqblock::synthetic::PlantedChain;

fn scan(label: &str, seq: &Sequence) -> seqblock::Result<()> {
    let fit = order_scan(seq, 1..=3, &FitConfig::default(), None)?;
    println!("{label}: best n = {}", fit.order);
    for row in fit.order_table.unwrap_or_default() {
        println!(
            "  n={} B_N={:<3} B_M={:<3} Sigma={:>9.1} plain={:>9.1}",
            row.order, row.num_token_groups, row.num_memory_groups, row.total, row.baseline
        );
    }
    Ok(())
}

fn main() -> seqblock::Result<()> {
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    let seq = PlantedChain::xor_order2(9.0).sample(10_000, &mut rng);
    scan("order-2 data", &seq)?;
    scan("shuffled", &shuffle_null(&seq, &mut rng)?)?;
    Ok(())
}
