//! Builds a small tensor, writes it as QCT1 and JSON, and reads it back.
//!
//! `cargo run --release --example tensor_file -- [OUT_DIR] [SAMPLES]`

use std::path::PathBuf;

use qslam::cli_io::tensor_file::{load_or_build, read_tensor, to_json};
use qslam::cli_io::write_json;
use qslam::composition::CompositionMode;
use qslam::partition::SpacePartition;

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let out = PathBuf::from(std::env::args().nth(1).unwrap_or_else(|| "out".into()));
    let samples: u64 = std::env::args().nth(2).map(|s| s.parse()).transpose()?.unwrap_or(200);
    let p = SpacePartition::edc();
    let (tensor, path, cached) = load_or_build(&out, &p, CompositionMode::Probabilistic, samples, 7)?;
    println!("{} ({}), {} nonzero", path.display(), if cached { "cached" } else { "built" }, tensor.nonzero_count());
    let back = read_tensor(&path)?;
    assert_eq!(back, tensor);
    let json = path.with_extension("json");
    write_json(&json, &to_json(&tensor))?;
    println!("JSON export at {}", json.display());
    Ok(())
}
