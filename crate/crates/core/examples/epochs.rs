//! Epoch annotation: tokens become (token, epoch) pairs, so a change of
//! regime shows up in the token partition.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use seqblock::inference::{fit_sequence, FitConfig};
use seqblock::sequence::{annotate_epochs, Sequence};
use seqblock::synthetic::PlantedChain;

fn main() -> seqblock::Result<()> {
    let mut rng = ChaCha8Rng::seed_from_u64(4);
    // same tokens, opposite affinities in the two halves
    let a = PlantedChain::two_by_two(9.0).sample(3_000, &mut rng);
    let b = PlantedChain::two_by_two(1.0 / 9.0).sample(3_000, &mut rng);
    let tokens: Vec<u32> = a.tokens.iter().chain(&b.tokens).copied().collect();
    let seq = Sequence::from_ids(tokens, 10)?;
    let epochs: Vec<u32> = (0..seq.len()).map(|t| u32::from(t >= 3_000)).collect();
    let annotated = annotate_epochs(&seq, &epochs)?;

    let cfg = FitConfig::default();
    let plain = fit_sequence(&seq, &cfg, None)?;
    let timed = fit_sequence(&annotated, &cfg, None)?;
    println!("plain:     N={:<3} Sigma={:.1}", seq.num_tokens(), plain.breakdown.total);
    println!("annotated: N={:<3} Sigma={:.1}", annotated.num_tokens(), timed.breakdown.total);
    Ok(())
}
