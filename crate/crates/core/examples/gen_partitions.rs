//! Regenerates the bundled partition definition files.
//!
//! `cargo run --example gen_partitions -- [OUT_DIR]`

use qslam::partition::build::{double_cross, extended_double_cross, EdcParams};

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let out = std::env::args().nth(1).unwrap_or_else(|| "crates/core/data".to_string());
    std::fs::create_dir_all(&out)?;
    let edc = extended_double_cross(&EdcParams::default());
    std::fs::write(format!("{out}/edc.json"), serde_json::to_string_pretty(&edc)?)?;
    std::fs::write(format!("{out}/double_cross.json"), serde_json::to_string_pretty(&double_cross())?)?;
    println!("wrote {} EDC pieces to {out}", edc.regions.len());
    Ok(())
}
