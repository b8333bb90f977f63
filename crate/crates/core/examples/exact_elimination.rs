//! Compares propagated beliefs with exact marginals on a single-factor graph.
//!
//! `cargo run --release --example exact_elimination -- [SAMPLES]`

use qslam::composition::{build_tensor, CompositionMode};
use qslam::factor_graph::QualitativeFactorGraph;
use qslam::partition::{SpacePartition, StateVector};

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let samples: u64 = std::env::args().nth(1).map(|s| s.parse()).transpose()?.unwrap_or(300);
    let p = SpacePartition::edc();
    let tensor = build_tensor(&p, samples, CompositionMode::Probabilistic, 7)?;
    let mut g = QualitativeFactorGraph::new(p.d());
    g.add_variable(1, (1, 2, 3))?;
    g.add_variable(2, (2, 3, 4))?;
    g.add_variable(3, (1, 2, 4))?;
    g.add_factor([1, 2, 3])?;
    let peaked = |m: usize| StateVector::new((1..=p.d()).map(|s| if s == m { 10.0 } else { 1.0 }).collect()).normalized();
    g.set_unary(1, peaked(4))?;
    g.set_unary(2, peaked(12))?;
    let exact = g.eliminate_exact(&tensor)?;
    g.propagate(&tensor)?;
    let diff = exact[&3]
        .values
        .iter()
        .zip(&g.variables[&3].belief.values)
        .map(|(a, b)| (a - b).abs())
        .fold(0.0, f64::max);
    println!("unseen variable: MAP {} , max |exact - propagated| = {diff:.2e}", exact[&3].argmax());
    Ok(())
}
