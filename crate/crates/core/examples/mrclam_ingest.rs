//! Ingests an MRCLAM dataset directory and solves every emitted triplet.
//! Without a directory argument a synthetic dataset is written and used.
//!
//! `cargo run --release --example mrclam_ingest -- [DATASET_DIR]`

use std::path::PathBuf;

use qslam::cli_io::commands::{solve_scenarios, SolveOptions};
use qslam::cli_io::mrclam::{ingest_mrclam, read_mrclam_dir, synthetic_bundle, write_mrclam_dir, IngestConfig, SyntheticConfig};
use qslam::metrics::median;
use qslam::models::NoiseConfig;
use qslam::partition::SpacePartition;
use qslam::simulation::stream_rng;
use qslam::solver::{SolverParams, SolverVariant};

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let dir = match std::env::args().nth(1) {
        Some(d) => PathBuf::from(d),
        None => {
            let d = std::env::temp_dir().join("qslam-synthetic-mrclam");
            let config = SyntheticConfig {
                sigma_bearing: 1f64.to_radians(),
                ..SyntheticConfig::default()
            };
            write_mrclam_dir(&synthetic_bundle(&config, &mut stream_rng(5, 0)), &d)?;
            println!("synthetic dataset in {}", d.display());
            d
        }
    };
    let bundle = read_mrclam_dir(&dir)?;
    let noise = NoiseConfig::from_degrees(2.0, 5.0)?;
    let (scenarios, report) = ingest_mrclam(&bundle, noise, &IngestConfig::default())?;
    println!("{report:?}");
    let p = SpacePartition::edc();
    let options = SolveOptions {
        variants: vec![SolverVariant::Fast, SolverVariant::Baseline],
        params: SolverParams::default(),
        seed: 0,
        timing: false,
    };
    let (rows, _) = solve_scenarios(&scenarios, &p, &options)?;
    for v in &options.variants {
        let pick = |f: fn(&qslam::cli_io::ResultRow) -> f64| {
            median(&rows.iter().filter(|r| r.solver_variant == v.name()).map(f).collect::<Vec<_>>())
        };
        println!("{v:>8}: dmse {:.3}  gmd {:.3}  entropy {:.3}", pick(|r| r.dmse), pick(|r| r.gmd), pick(|r| r.entropy));
    }
    Ok(())
}
