//! Sampling sequences that match a fit's block counts exactly, then refitting.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use seqblock::chain::build_chain;
use seqblock::generate::{generate_sequence, Constraints};
use seqblock::inference::{fit_sequence, FitConfig};
use seqblock::metrics::nmi;
use seqblock::synthetic::PlantedChain;

fn main() -> seqblock::Result<()> {
    let mut rng = ChaCha8Rng::seed_from_u64(9);
    let planted = PlantedChain::two_by_two(9.0);
    let seq = planted.sample(5_000, &mut rng);
    let cfg = FitConfig::default();
    let fit = fit_sequence(&seq, &cfg, None)?;
    let chain = build_chain(&seq, 1, cfg.chain)?;
    let constraints = Constraints::from_fit(&chain, &fit.partition, &seq.alphabet)?;
    println!("block counts e_rs = {:?}", constraints.ers);

    let sample = generate_sequence(&constraints, 1_000, &mut rng)?;
    let again = fit_sequence(&sample, &cfg, None)?;
    println!(
        "generated {} tokens; refit B_N={} B_M={} NMI={:.3}",
        sample.len(),
        again.num_token_groups,
        again.num_memory_groups,
        nmi(&again.partition.token_groups, &planted.token_groups)
    );
    Ok(())
}
