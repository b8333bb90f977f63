//! Estimates an unseen triplet from two solved ones through the tensor.
//!
//! `cargo run --release --example composition_study -- [COUNT] [SAMPLES]`

use qslam::cli_io::commands::composition_study;
use qslam::composition::{build_tensor, CompositionMode};
use qslam::metrics::{median, quantile};
use qslam::models::NoiseConfig;
use qslam::partition::SpacePartition;
use qslam::solver::{SolverParams, SolverVariant};

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let count: usize = std::env::args().nth(1).map(|s| s.parse()).transpose()?.unwrap_or(200);
    let samples: u64 = std::env::args().nth(2).map(|s| s.parse()).transpose()?.unwrap_or(1000);
    let p = SpacePartition::edc();
    let tensor = build_tensor(&p, samples, CompositionMode::Probabilistic, 7)?;
    let noise = NoiseConfig::from_degrees(2.0, 5.0)?;
    let study = composition_study(count, noise, 3, &tensor, &p, SolverVariant::Fast, &SolverParams::default(), 21)?;
    println!(
        "unseen triplet over {count} scenarios: dmse {:.3}/{:.3}/{:.3}, median rating {}",
        quantile(&study.dmse, 0.25),
        median(&study.dmse),
        quantile(&study.dmse, 0.75),
        median(&study.gt_rating)
    );
    Ok(())
}
