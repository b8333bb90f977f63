//! Solves the seen triplets of one random factor graph, propagates their
//! beliefs and prints per-variable scores.
//!
//! `cargo run --release --example graph_propagation -- [SEED] [SAMPLES]`

use qslam::composition::{build_tensor, CompositionMode};
use qslam::factor_graph::DEFAULT_ALPHA;
use qslam::metrics::dmse;
use qslam::models::NoiseConfig;
use qslam::partition::SpacePartition;
use qslam::simulation::{gen_graph_scenario, solve_seen, stream_rng, triplet_state, GraphConfig};
use qslam::solver::{SolverParams, SolverVariant};

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let seed: u64 = std::env::args().nth(1).map(|s| s.parse()).transpose()?.unwrap_or(0);
    let samples: u64 = std::env::args().nth(2).map(|s| s.parse()).transpose()?.unwrap_or(500);
    let p = SpacePartition::edc();
    let tensor = build_tensor(&p, samples, CompositionMode::Probabilistic, 7)?;
    let noise = NoiseConfig::from_degrees(2.0, 5.0)?;
    let mut gs = gen_graph_scenario(&GraphConfig::default(), noise, p.d(), seed, &mut stream_rng(seed, 0))?;
    solve_seen(&mut gs, SolverVariant::Fast, &p, &SolverParams::default(), seed)?;
    let report = gs.graph.propagate(&tensor)?;
    gs.graph.topology_score(DEFAULT_ALPHA, false)?;
    gs.graph.composition_level()?;
    println!(
        "{} variables, {} factors, {} rounds, connectivity {:.3}",
        gs.graph.variables.len(),
        gs.graph.composition_factors.len(),
        report.iterations,
        gs.graph.connectivity_score()
    );
    println!("  id  triplet   seen  cl   isc    tsc    dmse");
    for v in gs.graph.variables.values() {
        let gt = triplet_state(&gs.scenario, v.triplet, &p)?;
        println!(
            "{:>4}  {:?}  {:>5} {:>3}  {:.3}  {:.3}  {:.3}",
            v.id,
            v.triplet,
            v.seen,
            v.cl.map_or("-".to_string(), |c| c.to_string()),
            v.isc,
            v.tsc,
            dmse(&v.belief, gt)
        );
    }
    Ok(())
}
