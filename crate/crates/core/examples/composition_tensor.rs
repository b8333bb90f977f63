//! Builds the composition tensor for a bundled partition and reports its sparsity.
//!
//! `cargo run --release --example composition_tensor -- [edc|double_cross] [SAMPLES] [SEED]`

use std::time::Instant;

use qslam::composition::{build_tensor, CompositionMode};
use qslam::partition::SpacePartition;

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let args: Vec<String> = std::env::args().collect();
    let name = args.get(1).map(String::as_str).unwrap_or("edc");
    let samples: u64 = args.get(2).map(|s| s.parse()).transpose()?.unwrap_or(2000);
    let seed: u64 = args.get(3).map(|s| s.parse()).transpose()?.unwrap_or(7);
    let partition = SpacePartition::bundled(name)?;
    let start = Instant::now();
    let tensor = build_tensor(&partition, samples, CompositionMode::Probabilistic, seed)?;
    let d = tensor.d;
    println!(
        "{name}: d = {d}, {} entries, {} nonzero, built in {:.1?}",
        d * d * d,
        tensor.nonzero_count(),
        start.elapsed()
    );
    Ok(())
}
