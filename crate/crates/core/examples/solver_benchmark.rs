//! Median accuracy and run time of every solver over a batch of scenarios.
//!
//! `cargo run --release --example solver_benchmark -- [COUNT] [SIGMA_V_DEG] [SIGMA_W_DEG]`

use std::time::Instant;

use qslam::metrics::{median, MetricReport};
use qslam::models::NoiseConfig;
use qslam::partition::SpacePartition;
use qslam::simulation::{gen_triplet_scenario, stream_rng, triplet_view};
use qslam::solver::{solve, SolverParams, SolverVariant};

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let args: Vec<String> = std::env::args().collect();
    let count: u64 = args.get(1).map(|s| s.parse()).transpose()?.unwrap_or(100);
    let sv: f64 = args.get(2).map(|s| s.parse()).transpose()?.unwrap_or(2.0);
    let sw: f64 = args.get(3).map(|s| s.parse()).transpose()?.unwrap_or(5.0);
    let noise = NoiseConfig::from_degrees(sv, sw)?;
    let p = SpacePartition::edc();
    let params = SolverParams::default();
    let cases = (0..count)
        .map(|k| {
            let s = gen_triplet_scenario(noise, 3, k, &mut stream_rng(1, k))?;
            let (obs, actions, truth) = triplet_view(&s, (1, 2, 3))?;
            Ok((obs, actions, p.classify(truth.landmark_c)))
        })
        .collect::<qslam::Result<Vec<_>>>()?;
    for variant in SolverVariant::ALL {
        let start = Instant::now();
        let mut reports = Vec::new();
        for (k, (obs, actions, gt)) in cases.iter().enumerate() {
            let post = solve(variant, obs, actions, &noise, &p, &params, &mut stream_rng(2, k as u64))?;
            reports.push(MetricReport::evaluate(&post.landmark_state, *gt, &p));
        }
        let col = |f: fn(&MetricReport) -> f64| median(&reports.iter().map(f).collect::<Vec<_>>());
        println!(
            "{variant:>8}: dmse {:.3}  gmd {:.3}  entropy {:.3}  {:.2?}",
            col(|m| m.dmse),
            col(|m| m.gmd),
            col(|m| m.entropy),
            start.elapsed()
        );
    }
    Ok(())
}
