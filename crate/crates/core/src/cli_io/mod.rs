//! File formats and command orchestration. Angles are degrees in every file.

pub mod commands;
pub mod mrclam;
pub mod tensor_file;

use std::collections::BTreeMap;
use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::factor_graph::QualitativeFactorGraph;
use crate::geometry::{Point2, Pose2};
use crate::metrics::{quantile, MetricReport};
use crate::models::{Action, NoiseConfig, Observation, TripletId};
use crate::partition::StateVector;
use crate::simulation::{GraphScenario, Scenario};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NoiseFile {
    pub sigma_v_deg: f64,
    pub sigma_w_deg: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PoseFile {
    pub x: f64,
    pub y: f64,
    pub alpha_deg: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ObservationFile {
    pub time_index: usize,
    pub triplet: [u32; 3],
    pub bearings_deg: [f64; 3],
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ActionFile {
    pub time_index: usize,
    pub psi_deg: f64,
}

/// A scenario as stored on disk.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScenarioFile {
    pub seed: u64,
    pub noise: NoiseFile,
    pub landmarks: BTreeMap<u32, [f64; 2]>,
    pub trajectory: Vec<PoseFile>,
    pub observations: Vec<ObservationFile>,
    pub actions: Vec<ActionFile>,
}

impl From<&Scenario> for ScenarioFile {
    fn from(s: &Scenario) -> Self {
        Self {
            seed: s.seed,
            noise: NoiseFile {
                sigma_v_deg: s.noise.sigma_v_deg(),
                sigma_w_deg: s.noise.sigma_w_deg(),
            },
            landmarks: s.landmarks.iter().map(|(id, p)| (*id, [p.x, p.y])).collect(),
            trajectory: s
                .trajectory
                .iter()
                .map(|p| PoseFile {
                    x: p.x,
                    y: p.y,
                    alpha_deg: p.alpha.to_degrees(),
                })
                .collect(),
            observations: s
                .observations
                .iter()
                .map(|o| ObservationFile {
                    time_index: o.time_index,
                    triplet: [o.triplet.0, o.triplet.1, o.triplet.2],
                    bearings_deg: o.bearings.map(f64::to_degrees),
                })
                .collect(),
            actions: s
                .actions
                .iter()
                .map(|a| ActionFile {
                    time_index: a.time_index,
                    psi_deg: a.psi.to_degrees(),
                })
                .collect(),
        }
    }
}

impl TryFrom<&ScenarioFile> for Scenario {
    type Error = Error;

    fn try_from(f: &ScenarioFile) -> Result<Self> {
        Ok(Scenario {
            landmarks: f.landmarks.iter().map(|(id, p)| (*id, Point2::new(p[0], p[1]))).collect(),
            trajectory: f.trajectory.iter().map(|p| Pose2::new(p.x, p.y, p.alpha_deg.to_radians())).collect(),
            observations: f
                .observations
                .iter()
                .map(|o| Observation {
                    time_index: o.time_index,
                    triplet: (o.triplet[0], o.triplet[1], o.triplet[2]),
                    bearings: o.bearings_deg.map(f64::to_radians),
                })
                .collect(),
            actions: f
                .actions
                .iter()
                .map(|a| Action {
                    time_index: a.time_index,
                    psi: a.psi_deg.to_radians(),
                })
                .collect(),
            noise: NoiseConfig::from_degrees(f.noise.sigma_v_deg, f.noise.sigma_w_deg)?,
            seed: f.seed,
        })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScenarioSetFile {
    pub scenarios: Vec<ScenarioFile>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GraphScenarioFile {
    pub scenario: ScenarioFile,
    pub graph: QualitativeFactorGraph,
    pub coverage_rate: f64,
    pub connectivity: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GraphScenarioSetFile {
    pub graph_scenarios: Vec<GraphScenarioFile>,
}

/// One row of the results table; one per (scenario, triplet, solver).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ResultRow {
    pub scenario_id: usize,
    pub triplet: String,
    pub solver_variant: String,
    pub sigma_v_deg: f64,
    pub sigma_w_deg: f64,
    pub views: usize,
    pub dmse: f64,
    pub gmd: f64,
    pub entropy: f64,
    pub gt_rating: usize,
    pub gt_likelihood: f64,
    pub gt_likelihood_ratio: f64,
    pub likelihood_ratio: f64,
    /// Zero unless timing was requested, so result files stay reproducible.
    pub wall_time_ms: f64,
}

impl ResultRow {
    pub fn metrics(&self) -> MetricReport {
        MetricReport {
            dmse: self.dmse,
            gmd: self.gmd,
            entropy: self.entropy,
            gt_rating: self.gt_rating,
            gt_likelihood: self.gt_likelihood,
            gt_likelihood_ratio: self.gt_likelihood_ratio,
            likelihood_ratio: self.likelihood_ratio,
        }
    }
}

/// Posterior of one triplet as written by `solve`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PosteriorRecord {
    pub scenario_id: usize,
    pub triplet: [u32; 3],
    pub solver_variant: String,
    pub landmark_state: StateVector,
    pub camera_states: Vec<StateVector>,
    pub hypothesis_count: usize,
    pub hypothesis_counts: Vec<usize>,
    pub degraded: bool,
}

pub fn triplet_label(t: TripletId) -> String {
    format!("{}-{}-{}", t.0, t.1, t.2)
}

fn read_text(path: &Path) -> Result<String> {
    fs::read_to_string(path).map_err(|e| {
        Error::Io(std::io::Error::new(e.kind(), format!("{}: {e}", path.display())))
    })
}

fn parse_json<T: for<'de> Deserialize<'de>>(path: &Path) -> Result<T> {
    let text = read_text(path)?;
    serde_json::from_str(&text).map_err(|e| Error::from_json(&path.display().to_string(), e))
}

pub fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<()> {
    let mut text = serde_json::to_string_pretty(value).map_err(|e| Error::InvalidArgument(e.to_string()))?;
    text.push('\n');
    fs::write(path, text)?;
    Ok(())
}

pub fn write_scenarios(path: &Path, scenarios: &[Scenario]) -> Result<()> {
    write_json(
        path,
        &ScenarioSetFile {
            scenarios: scenarios.iter().map(ScenarioFile::from).collect(),
        },
    )
}

pub fn read_scenarios(path: &Path) -> Result<Vec<Scenario>> {
    let set: ScenarioSetFile = parse_json(path)?;
    set.scenarios.iter().map(Scenario::try_from).collect()
}

pub fn write_graph_scenarios(path: &Path, scenarios: &[GraphScenario]) -> Result<()> {
    write_json(
        path,
        &GraphScenarioSetFile {
            graph_scenarios: scenarios
                .iter()
                .map(|g| GraphScenarioFile {
                    scenario: ScenarioFile::from(&g.scenario),
                    graph: g.graph.clone(),
                    coverage_rate: g.coverage_rate,
                    connectivity: g.connectivity,
                })
                .collect(),
        },
    )
}

pub fn read_graph_scenarios(path: &Path) -> Result<Vec<GraphScenario>> {
    let set: GraphScenarioSetFile = parse_json(path)?;
    set.graph_scenarios
        .iter()
        .map(|g| {
            Ok(GraphScenario {
                scenario: Scenario::try_from(&g.scenario)?,
                graph: g.graph.clone(),
                coverage_rate: g.coverage_rate,
                connectivity: g.connectivity,
            })
        })
        .collect()
}

pub fn write_posteriors(path: &Path, records: &[PosteriorRecord]) -> Result<()> {
    write_json(path, &records)
}

pub fn read_posteriors(path: &Path) -> Result<Vec<PosteriorRecord>> {
    parse_json(path)
}

pub fn write_csv<T: Serialize>(path: &Path, rows: &[T]) -> Result<()> {
    let mut w = csv::Writer::from_path(path)?;
    for r in rows {
        w.serialize(r)?;
    }
    w.flush()?;
    Ok(())
}

pub fn read_results(path: &Path) -> Result<Vec<ResultRow>> {
    let mut r = csv::Reader::from_path(path)?;
    r.deserialize().map(|row| row.map_err(Error::from)).collect()
}

pub const TABLE_METRICS: [&str; 7] = [
    "dmse",
    "gmd",
    "entropy",
    "gt_rating",
    "gt_likelihood",
    "gt_likelihood_ratio",
    "likelihood_ratio",
];

/// 25th, 50th and 75th percentile of every metric for one group of rows.
#[derive(Debug, Clone, PartialEq)]
pub struct PercentileRow {
    pub solver_variant: String,
    pub sigma_v_deg: f64,
    pub sigma_w_deg: f64,
    pub count: usize,
    /// `[p25, p50, p75]` in `TABLE_METRICS` order.
    pub metrics: Vec<[f64; 3]>,
    /// Per-row wall time percentiles.
    pub wall_time_ms: [f64; 3],
}

fn metric_columns(r: &ResultRow) -> [f64; 7] {
    [
        r.dmse,
        r.gmd,
        r.entropy,
        r.gt_rating as f64,
        r.gt_likelihood,
        r.gt_likelihood_ratio,
        r.likelihood_ratio,
    ]
}

/// Groups rows by solver and noise cell (in first-seen order) and reports percentiles.
pub fn percentile_table(rows: &[ResultRow]) -> Vec<PercentileRow> {
    let mut keys: Vec<(String, u64, u64)> = Vec::new();
    let mut groups: Vec<Vec<&ResultRow>> = Vec::new();
    for r in rows {
        let key = (r.solver_variant.clone(), r.sigma_v_deg.to_bits(), r.sigma_w_deg.to_bits());
        match keys.iter().position(|k| *k == key) {
            Some(i) => groups[i].push(r),
            None => {
                keys.push(key);
                groups.push(vec![r]);
            }
        }
    }
    groups
        .into_iter()
        .map(|g| {
            let cols: Vec<[f64; 7]> = g.iter().map(|r| metric_columns(r)).collect();
            let pct = |v: &[f64]| [quantile(v, 0.25), quantile(v, 0.5), quantile(v, 0.75)];
            let metrics = (0..TABLE_METRICS.len())
                .map(|m| pct(&cols.iter().map(|c| c[m]).collect::<Vec<_>>()))
                .collect();
            let times: Vec<f64> = g.iter().map(|r| r.wall_time_ms).collect();
            PercentileRow {
                solver_variant: g[0].solver_variant.clone(),
                sigma_v_deg: g[0].sigma_v_deg,
                sigma_w_deg: g[0].sigma_w_deg,
                count: g.len(),
                metrics,
                wall_time_ms: pct(&times),
            }
        })
        .collect()
}

/// Writes the percentile table as CSV with six decimals.
pub fn write_percentile_table(path: &Path, table: &[PercentileRow]) -> Result<()> {
    let mut w = csv::Writer::from_path(path)?;
    let mut header = vec!["solver_variant".to_string(), "sigma_v_deg".into(), "sigma_w_deg".into(), "count".into()];
    for m in TABLE_METRICS.iter().chain(["wall_time_ms"].iter()) {
        for p in ["p25", "p50", "p75"] {
            header.push(format!("{m}_{p}"));
        }
    }
    w.write_record(&header)?;
    for row in table {
        let mut rec = vec![
            row.solver_variant.clone(),
            format!("{}", row.sigma_v_deg),
            format!("{}", row.sigma_w_deg),
            row.count.to_string(),
        ];
        for vals in row.metrics.iter().chain(std::iter::once(&row.wall_time_ms)) {
            rec.extend(vals.iter().map(|v| format!("{v:.6}")));
        }
        w.write_record(&rec)?;
    }
    w.flush()?;
    Ok(())
}
