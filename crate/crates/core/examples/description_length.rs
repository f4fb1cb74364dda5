//! Description length of a fixed partition, term by term.

use seqblock::chain::{build_chain, ChainOptions};
use seqblock::dl::{total_dl, Partition, PriorConfig, Units};
use seqblock::sequence::{tokenize_records, SeparatorPolicy};

fn main() -> seqblock::Result<()> {
    let seq = tokenize_records(&[vec!["a", "b", "a", "b"]], SeparatorPolicy::None)?;
    let chain = build_chain(&seq, 1, ChainOptions::default())?;
    println!("E = {}, M = {}", chain.total(), chain.num_memories());

    for (name, part) in [
        ("one group", Partition::trivial(&chain, false)?),
        ("singletons", Partition::singletons(&chain)),
    ] {
        let dl = total_dl(&chain, &part, &PriorConfig::default())?;
        println!("{name}:");
        for (term, v) in dl.to_record(Units::Bits) {
            println!("  {term:<24} {v:>8.4} bits");
        }
    }
    Ok(())
}
