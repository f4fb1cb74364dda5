//! Lower bounds on the held-out log-likelihood for static and dynamic models.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use seqblock::inference::FitConfig;
use seqblock::predict::{holdout_bound, temporal_holdout_bound, SplitSpec};
use seqblock::synthetic::{planted_stream, PlantedChain};
use seqblock::temporal::TemporalConfig;

fn main() -> seqblock::Result<()> {
    let mut rng = ChaCha8Rng::seed_from_u64(2);
    let split = SplitSpec::new(0.5)?;

    let seq = PlantedChain::two_by_two(9.0).sample(4_000, &mut rng);
    let h = holdout_bound(&seq, split, &FitConfig::default())?;
    println!("sequence: -dSigma = {:.1} nats ({:.3} per event)", h.log_bound, h.per_event);

    let (stream, _) = planted_stream(30, 2_000, 0.9, &mut rng)?;
    for order in [0, 1] {
        let cfg = TemporalConfig {
            order,
            ..Default::default()
        };
        let h = temporal_holdout_bound(&stream, split, &cfg)?;
        println!("stream n={order}: -dSigma = {:.1} nats ({:.3} per event)", h.log_bound, h.per_event);
    }
    Ok(())
}
