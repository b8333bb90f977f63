//! Correlation of predicted (topology) and measured information scores.
//!
//! `cargo run --release --example decay_study -- [GRAPHS] [SAMPLES]`

use qslam::cli_io::commands::decay_study;
use qslam::composition::{build_tensor, CompositionMode};
use qslam::factor_graph::DEFAULT_ALPHA;
use qslam::models::NoiseConfig;
use qslam::partition::SpacePartition;
use qslam::simulation::GraphConfig;
use qslam::solver::{SolverParams, SolverVariant};

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let count: usize = std::env::args().nth(1).map(|s| s.parse()).transpose()?.unwrap_or(200);
    let samples: u64 = std::env::args().nth(2).map(|s| s.parse()).transpose()?.unwrap_or(1000);
    let p = SpacePartition::edc();
    let tensor = build_tensor(&p, samples, CompositionMode::Probabilistic, 7)?;
    let noise = NoiseConfig::from_degrees(2.0, 5.0)?;
    let s = decay_study(
        count,
        &GraphConfig::default(),
        noise,
        &tensor,
        &p,
        SolverVariant::Fast,
        &SolverParams::default(),
        DEFAULT_ALPHA,
        31,
    )?;
    println!("{} variables", s.isc.len());
    println!("spearman: tsc {:.3}, tsc (seen = 1) {:.3}, normalized cl {:.3}", s.rho_tsc(), s.rho_tsc_selection(), s.rho_cl());
    for (b, m) in s.bin_medians().iter().enumerate() {
        let m = m.map_or("-".to_string(), |v| format!("{v:.3}"));
        println!("  tsc [{:.1}, {:.1}): median isc {m}", b as f64 / 10.0, (b + 1) as f64 / 10.0);
    }
    Ok(())
}
