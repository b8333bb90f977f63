//! Metric values of the uninformed (uniform) estimate on the bundled partitions.
//!
//! `cargo run --example uniform_metrics`

use qslam::metrics::{median, MetricReport};
use qslam::partition::{SpacePartition, StateVector};

fn main() -> Result<(), Box<dyn std::error::Error>> {
    for p in [SpacePartition::edc(), SpacePartition::double_cross()] {
        let u = StateVector::uniform(p.d());
        let reports: Vec<MetricReport> = (1..=p.d()).map(|gt| MetricReport::evaluate(&u, gt, &p)).collect();
        let gmd: Vec<f64> = reports.iter().map(|r| r.gmd).collect();
        println!(
            "{}: d = {}, dmse {:.4}, entropy {:.4}, gmd median over states {:.3}",
            p.name,
            p.d(),
            reports[0].dmse,
            reports[0].entropy,
            median(&gmd)
        );
    }
    Ok(())
}
