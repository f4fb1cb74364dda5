//! Temporal network: node groups plus a chain over edge labels.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use seqblock::metrics::nmi;
use seqblock::synthetic::{planted_stream, random_stream};
use seqblock::temporal::{joint_fit, TemporalConfig};

fn main() -> seqblock::Result<()> {
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    let (stream, truth) = planted_stream(40, 3_000, 0.9, &mut rng)?;
    for order in [0, 1, 2] {
        let cfg = TemporalConfig {
            order,
            ..Default::default()
        };
        let fit = joint_fit(&stream, &cfg)?;
        println!(
            "n={order}: C={} B_N={} B_M={} Sigma={:.1} NMI={:.3}",
            fit.num_node_groups,
            fit.num_label_token_groups(),
            fit.num_label_memory_groups(),
            fit.breakdown.total,
            nmi(&fit.node_groups, &truth)
        );
    }

    let stream = random_stream(50, 2_000, &mut rng)?;
    let fit = joint_fit(&stream, &TemporalConfig::default())?;
    println!(
        "random stream: C={} B_N={} B_M={}",
        fit.num_node_groups,
        fit.num_label_token_groups(),
        fit.num_label_memory_groups()
    );
    Ok(())
}
