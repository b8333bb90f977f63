//! Simulates one triplet scenario and compares the three solvers on it.
//!
//! `cargo run --release --example triplet_solve -- [SEED] [SIGMA_V_DEG] [SIGMA_W_DEG] [VIEWS]`

use qslam::metrics::MetricReport;
use qslam::models::NoiseConfig;
use qslam::partition::SpacePartition;
use qslam::simulation::{gen_triplet_scenario, stream_rng, triplet_view};
use qslam::solver::{solve, SolverParams, SolverVariant};

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let args: Vec<String> = std::env::args().collect();
    let arg = |i: usize, d: f64| args.get(i).map(|s| s.parse()).transpose().map(|v| v.unwrap_or(d));
    let seed = arg(1, 0.0)? as u64;
    let noise = NoiseConfig::from_degrees(arg(2, 2.0)?, arg(3, 5.0)?)?;
    let views = arg(4, 3.0)? as usize;
    let p = SpacePartition::edc();
    let scenario = gen_triplet_scenario(noise, views, seed, &mut stream_rng(seed, 0))?;
    let (obs, actions, truth) = triplet_view(&scenario, (1, 2, 3))?;
    let gt = p.classify(truth.landmark_c);
    println!("C in AB frame: ({:.3}, {:.3}), state {gt}", truth.landmark_c.x, truth.landmark_c.y);
    for variant in SolverVariant::ALL {
        let post = solve(variant, &obs, &actions, &noise, &p, &SolverParams::default(), &mut stream_rng(seed, 1))?;
        let m = MetricReport::evaluate(&post.landmark_state, gt, &p);
        println!(
            "{variant:>8}: map {:>2}  P(gt) {:.3}  dmse {:.3}  gmd {:.3}  entropy {:.3}  hypotheses {:?}",
            post.landmark_state.argmax(),
            m.gt_likelihood,
            m.dmse,
            m.gmd,
            m.entropy,
            post.hypothesis_counts
        );
    }
    Ok(())
}
