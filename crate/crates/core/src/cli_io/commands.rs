//! Batch drivers behind the command-line subcommands and the experiment studies.

use std::time::Instant;

use rand::Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::{triplet_label, PosteriorRecord, ResultRow};
use crate::composition::{CompositionTensor, Slot};
use crate::error::{Error, Result};
use crate::factor_graph::CONNECTIVITY_BINS;
use crate::metrics::{binned_medians, dmse, gt_rating, spearman, MetricReport};
use crate::models::{NoiseConfig, TripletId};
use crate::partition::{SpacePartition, StateVector};
use crate::simulation::{
    gen_composition_scenario, gen_graph_scenario, gen_triplet_scenario, solve_seen, stream_rng, triplet_state,
    triplet_view, GraphConfig, GraphScenario, Scenario,
};
use crate::solver::{solve, SolverParams, SolverVariant, TripletPosterior};

/// Runs `f` on a pool with `threads` workers (all cores when `None`).
pub fn with_threads<T: Send>(threads: Option<usize>, f: impl FnOnce() -> T + Send) -> Result<T> {
    let mut builder = rayon::ThreadPoolBuilder::new();
    if let Some(n) = threads {
        builder = builder.num_threads(n);
    }
    let pool = builder.build().map_err(|e| Error::Config(e.to_string()))?;
    Ok(pool.install(f))
}

/// `count` single-triplet scenarios; scenario `k` uses stream `k` of `seed`.
pub fn generate_triplets(count: usize, views: usize, noise: NoiseConfig, seed: u64) -> Result<Vec<Scenario>> {
    (0..count as u64)
        .into_par_iter()
        .map(|k| gen_triplet_scenario(noise, views, k, &mut stream_rng(seed, k)))
        .collect()
}

pub fn generate_graphs(count: usize, config: &GraphConfig, noise: NoiseConfig, d: usize, seed: u64) -> Result<Vec<GraphScenario>> {
    (0..count as u64)
        .into_par_iter()
        .map(|k| gen_graph_scenario(config, noise, d, k, &mut stream_rng(seed, k)))
        .collect()
}

pub fn generate_compositions(count: usize, views: usize, noise: NoiseConfig, d: usize, seed: u64) -> Result<Vec<GraphScenario>> {
    (0..count as u64)
        .into_par_iter()
        .map(|k| gen_composition_scenario(noise, views, d, k, &mut stream_rng(seed, k)))
        .collect()
}

#[derive(Debug, Clone, PartialEq)]
pub struct SolveOptions {
    pub variants: Vec<SolverVariant>,
    pub params: SolverParams,
    pub seed: u64,
    /// Record wall time per row; otherwise it is written as zero.
    pub timing: bool,
}

fn fallback(variant: SolverVariant, d: usize) -> TripletPosterior {
    TripletPosterior {
        landmark_state: StateVector::uniform(d),
        camera_states: Vec::new(),
        hypothesis_count: 0,
        hypothesis_counts: Vec::new(),
        solver_variant: variant,
        degraded: true,
    }
}

/// Solves every triplet of every scenario with every requested variant. Rows
/// come out in (scenario, triplet, variant) order. Triplet `t` of scenario
/// `s` uses the same RNG stream for all variants. Degenerate inputs yield a
/// uniform posterior flagged `degraded`.
pub fn solve_scenarios(
    scenarios: &[Scenario],
    partition: &SpacePartition,
    options: &SolveOptions,
) -> Result<(Vec<ResultRow>, Vec<PosteriorRecord>)> {
    let mut jobs: Vec<(usize, usize, TripletId, SolverVariant)> = Vec::new();
    for (s, scenario) in scenarios.iter().enumerate() {
        for (t, triplet) in scenario.triplets().into_iter().enumerate() {
            for v in &options.variants {
                jobs.push((s, t, triplet, *v));
            }
        }
    }
    let out: Vec<(ResultRow, PosteriorRecord)> = jobs
        .par_iter()
        .map(|&(s, t, triplet, variant)| -> Result<_> {
            let scenario = &scenarios[s];
            let (obs, actions, _) = triplet_view(scenario, triplet)?;
            let gt = triplet_state(scenario, triplet, partition)?;
            let mut rng = stream_rng(options.seed, ((s as u64) << 20) | t as u64);
            let start = Instant::now();
            let post = match solve(variant, &obs, &actions, &scenario.noise, partition, &options.params, &mut rng) {
                Ok(p) => p,
                Err(Error::DegenerateGeometry(_) | Error::NoIntersection) => fallback(variant, partition.d()),
                Err(e) => return Err(e),
            };
            let elapsed = start.elapsed().as_secs_f64() * 1e3;
            let m = MetricReport::evaluate(&post.landmark_state, gt, partition);
            let row = ResultRow {
                scenario_id: s,
                triplet: triplet_label(triplet),
                solver_variant: variant.name().to_string(),
                sigma_v_deg: scenario.noise.sigma_v_deg(),
                sigma_w_deg: scenario.noise.sigma_w_deg(),
                views: obs.len(),
                dmse: m.dmse,
                gmd: m.gmd,
                entropy: m.entropy,
                gt_rating: m.gt_rating,
                gt_likelihood: m.gt_likelihood,
                gt_likelihood_ratio: m.gt_likelihood_ratio,
                likelihood_ratio: m.likelihood_ratio,
                wall_time_ms: if options.timing { elapsed } else { 0.0 },
            };
            let record = PosteriorRecord {
                scenario_id: s,
                triplet: [triplet.0, triplet.1, triplet.2],
                solver_variant: variant.name().to_string(),
                landmark_state: post.landmark_state,
                camera_states: post.camera_states,
                hypothesis_count: post.hypothesis_count,
                hypothesis_counts: post.hypothesis_counts,
                degraded: post.degraded,
            };
            Ok((row, record))
        })
        .collect::<Result<_>>()?;
    Ok(out.into_iter().unzip())
}

/// Joins posteriors with the ground truth of their scenarios.
pub fn evaluate_posteriors(
    scenarios: &[Scenario],
    posteriors: &[PosteriorRecord],
    partition: &SpacePartition,
) -> Result<Vec<ResultRow>> {
    posteriors
        .iter()
        .map(|p| {
            let scenario = scenarios.get(p.scenario_id).ok_or_else(|| {
                Error::InvalidArgument(format!("posterior refers to missing scenario {}", p.scenario_id))
            })?;
            let triplet = (p.triplet[0], p.triplet[1], p.triplet[2]);
            if p.landmark_state.len() != partition.d() {
                return Err(Error::InvalidArgument(format!(
                    "posterior has {} states, partition has {}",
                    p.landmark_state.len(),
                    partition.d()
                )));
            }
            let gt = triplet_state(scenario, triplet, partition)?;
            let views = scenario.observations.iter().filter(|o| o.triplet == triplet).count();
            let m = MetricReport::evaluate(&p.landmark_state, gt, partition);
            Ok(ResultRow {
                scenario_id: p.scenario_id,
                triplet: triplet_label(triplet),
                solver_variant: p.solver_variant.clone(),
                sigma_v_deg: scenario.noise.sigma_v_deg(),
                sigma_w_deg: scenario.noise.sigma_w_deg(),
                views,
                dmse: m.dmse,
                gmd: m.gmd,
                entropy: m.entropy,
                gt_rating: m.gt_rating,
                gt_likelihood: m.gt_likelihood,
                gt_likelihood_ratio: m.gt_likelihood_ratio,
                likelihood_ratio: m.likelihood_ratio,
                wall_time_ms: 0.0,
            })
        })
        .collect()
}

/// Per-variable outcome of propagation.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct IscRow {
    pub scenario_id: usize,
    pub variable: usize,
    pub triplet: String,
    pub seen: bool,
    pub updated: bool,
    pub isc: f64,
    pub gt_state: usize,
    pub map_state: usize,
    pub gt_rating: usize,
    pub dmse: f64,
}

/// Seed of the seen-triplet solves of graph `k`.
fn graph_solve_seed(seed: u64, k: usize) -> u64 {
    stream_rng(seed, k as u64).random()
}

/// Solves the seen triplets of every graph and propagates beliefs through
/// the composition factors.
pub fn propagate_graphs(
    graphs: &[GraphScenario],
    tensor: &CompositionTensor,
    partition: &SpacePartition,
    variant: SolverVariant,
    params: &SolverParams,
    seed: u64,
) -> Result<(Vec<GraphScenario>, Vec<IscRow>)> {
    if tensor.d != partition.d() {
        return Err(Error::InvalidArgument(format!(
            "tensor has d = {}, partition has {} regions",
            tensor.d,
            partition.d()
        )));
    }
    let out: Vec<(GraphScenario, Vec<IscRow>)> = graphs
        .par_iter()
        .enumerate()
        .map(|(k, gs)| -> Result<_> {
            let mut gs = gs.clone();
            solve_seen(&mut gs, variant, partition, params, graph_solve_seed(seed, k))?;
            gs.graph.propagate(tensor)?;
            let rows = gs
                .graph
                .variables
                .values()
                .map(|v| {
                    let gt = triplet_state(&gs.scenario, v.triplet, partition)?;
                    Ok(IscRow {
                        scenario_id: k,
                        variable: v.id,
                        triplet: triplet_label(v.triplet),
                        seen: v.seen,
                        updated: v.updated,
                        isc: v.isc,
                        gt_state: gt,
                        map_state: v.belief.argmax(),
                        gt_rating: gt_rating(&v.belief, gt),
                        dmse: dmse(&v.belief, gt),
                    })
                })
                .collect::<Result<Vec<_>>>()?;
            Ok((gs, rows))
        })
        .collect::<Result<_>>()?;
    let (graphs, rows): (Vec<_>, Vec<_>) = out.into_iter().unzip();
    Ok((graphs, rows.into_iter().flatten().collect()))
}

/// Topology score and composition level of one variable.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScoreRow {
    pub scenario_id: usize,
    pub variable: usize,
    pub triplet: String,
    pub seen: bool,
    pub isc: f64,
    pub tsc: f64,
    /// Empty when the variable is unreachable.
    pub cl: Option<u32>,
    pub normalized_cl: f64,
}

/// Scores every graph in place. With `selection` seen variables start at 1
/// instead of their information score.
pub fn score_graphs(graphs: &mut [GraphScenario], alpha: f64, selection: bool) -> Result<Vec<ScoreRow>> {
    let mut rows = Vec::new();
    for (k, gs) in graphs.iter_mut().enumerate() {
        let g = &mut gs.graph;
        g.topology_score(alpha, selection)?;
        g.composition_level()?;
        let ncl = g.normalized_composition_level();
        for v in g.variables.values() {
            rows.push(ScoreRow {
                scenario_id: k,
                variable: v.id,
                triplet: triplet_label(v.triplet),
                seen: v.seen,
                isc: v.isc,
                tsc: v.tsc,
                cl: v.cl,
                normalized_cl: ncl[&v.id],
            });
        }
        gs.connectivity = g.connectivity_score();
    }
    Ok(rows)
}

/// Unseen-triplet estimates of the single-factor composition study.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct CompositionStudy {
    pub dmse: Vec<f64>,
    pub gt_rating: Vec<f64>,
}

/// Two seen triplets per scenario are solved and the third is estimated by
/// contracting the tensor with their posteriors.
pub fn composition_study(
    count: usize,
    noise: NoiseConfig,
    views: usize,
    tensor: &CompositionTensor,
    partition: &SpacePartition,
    variant: SolverVariant,
    params: &SolverParams,
    seed: u64,
) -> Result<CompositionStudy> {
    let out: Vec<(f64, f64)> = (0..count)
        .into_par_iter()
        .map(|k| -> Result<_> {
            let mut gs = gen_composition_scenario(noise, views, tensor.d, k as u64, &mut stream_rng(seed, k as u64))?;
            solve_seen(&mut gs, variant, partition, params, graph_solve_seed(seed, k))?;
            let f = gs.graph.composition_factors[0].variables;
            let slot = (0..3)
                .find(|s| !gs.graph.variables[&f[*s]].seen)
                .ok_or_else(|| Error::Generation("composition scenario has no unseen triplet".into()))?;
            let others: Vec<&StateVector> =
                (0..3).filter(|o| *o != slot).map(|o| &gs.graph.variables[&f[o]].belief).collect();
            let est = tensor.marginal_for(Slot::ALL[slot], others[0], others[1])?.state;
            let gt = triplet_state(&gs.scenario, gs.graph.variables[&f[slot]].triplet, partition)?;
            Ok((dmse(&est, gt), gt_rating(&est, gt) as f64))
        })
        .collect::<Result<_>>()?;
    let (dmse, gt_rating) = out.into_iter().unzip();
    Ok(CompositionStudy { dmse, gt_rating })
}

/// Node-level scores of the information-decay study, one entry per variable.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct DecayStudy {
    pub tsc: Vec<f64>,
    /// Topology score with seen variables starting at 1.
    pub tsc_selection: Vec<f64>,
    pub normalized_cl: Vec<f64>,
    pub isc: Vec<f64>,
}

impl DecayStudy {
    pub fn rho_tsc(&self) -> f64 {
        spearman(&self.tsc, &self.isc)
    }

    pub fn rho_tsc_selection(&self) -> f64 {
        spearman(&self.tsc_selection, &self.isc)
    }

    pub fn rho_cl(&self) -> f64 {
        spearman(&self.normalized_cl, &self.isc)
    }

    /// Median information score per topology-score bin.
    pub fn bin_medians(&self) -> Vec<Option<f64>> {
        binned_medians(&self.tsc, &self.isc, CONNECTIVITY_BINS)
    }
}

/// Generates, solves and propagates `count` graph scenarios and collects the
/// predicted and measured information scores of every variable.
pub fn decay_study(
    count: usize,
    config: &GraphConfig,
    noise: NoiseConfig,
    tensor: &CompositionTensor,
    partition: &SpacePartition,
    variant: SolverVariant,
    params: &SolverParams,
    alpha: f64,
    seed: u64,
) -> Result<DecayStudy> {
    let graphs = generate_graphs(count, config, noise, tensor.d, seed)?;
    let (mut graphs, _) = propagate_graphs(&graphs, tensor, partition, variant, params, seed)?;
    let selection = score_graphs(&mut graphs.clone(), alpha, true)?;
    let rows = score_graphs(&mut graphs, alpha, false)?;
    Ok(DecayStudy {
        tsc: rows.iter().map(|r| r.tsc).collect(),
        tsc_selection: selection.iter().map(|r| r.tsc).collect(),
        normalized_cl: rows.iter().map(|r| r.normalized_cl).collect(),
        isc: rows.iter().map(|r| r.isc).collect(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::composition::{build_tensor, CompositionMode};

    #[test]
    fn zero_noise_solve_is_exact() {
        let p = SpacePartition::edc();
        let scenarios = generate_triplets(3, 3, NoiseConfig::new(0.0, 0.0).unwrap(), 5).unwrap();
        let opts = SolveOptions {
            variants: vec![SolverVariant::Full],
            params: SolverParams::default(),
            seed: 1,
            timing: false,
        };
        let (rows, posts) = solve_scenarios(&scenarios, &p, &opts).unwrap();
        assert_eq!(rows.len(), 3);
        for r in &rows {
            assert!(r.dmse < 1e-6, "{r:?}");
            assert_eq!(r.wall_time_ms, 0.0);
        }
        assert_eq!(evaluate_posteriors(&scenarios, &posts, &p).unwrap(), rows);
    }

    #[test]
    fn thread_count_does_not_change_results() {
        let p = SpacePartition::edc();
        let noise = NoiseConfig::from_degrees(2.0, 5.0).unwrap();
        let opts = SolveOptions {
            variants: vec![SolverVariant::Fast, SolverVariant::Baseline],
            params: SolverParams::default(),
            seed: 3,
            timing: false,
        };
        let run = |threads| {
            with_threads(Some(threads), || {
                let s = generate_triplets(4, 3, noise, 8).unwrap();
                solve_scenarios(&s, &p, &opts).unwrap()
            })
            .unwrap()
        };
        assert_eq!(run(1), run(3));
    }

    #[test]
    fn propagation_and_scores_cover_every_variable() {
        let p = SpacePartition::edc();
        let t = build_tensor(&p, 20, CompositionMode::Probabilistic, 7).unwrap();
        let noise = NoiseConfig::from_degrees(1.0, 2.0).unwrap();
        let graphs = generate_graphs(2, &GraphConfig::default(), noise, 20, 4).unwrap();
        let (mut out, rows) = propagate_graphs(&graphs, &t, &p, SolverVariant::Fast, &SolverParams::default(), 9).unwrap();
        let total: usize = graphs.iter().map(|g| g.graph.variables.len()).sum();
        assert_eq!(rows.len(), total);
        assert!(rows.iter().all(|r| (0.0..=1.0).contains(&r.isc)));
        let scores = score_graphs(&mut out, 0.5, false).unwrap();
        assert_eq!(scores.len(), total);
        for s in scores.iter().filter(|s| s.seen) {
            assert_eq!(s.cl, Some(0));
            assert_eq!(s.tsc, s.isc);
        }
    }
}
