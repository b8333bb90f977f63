//! Random scenario generation for triplet estimation and factor-graph studies.

use std::collections::BTreeMap;

use rand::seq::{IndexedRandom, SliceRandom};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::factor_graph::{QualitativeFactorGraph, DEFAULT_ALPHA};
use crate::geometry::{PairFrame, Point2, Pose2};
use crate::models::{sample_action, sample_observation, Action, NoiseConfig, Observation, TripletId};
use crate::partition::SpacePartition;
use crate::solver::{solve, SolverParams, SolverVariant};

pub const X_RANGE: (f64, f64) = (-3.0, 3.0);
pub const Y_RANGE: (f64, f64) = (-3.0, 4.0);
pub const MIN_DISTANCE: f64 = 0.01;
const MAX_DRAWS: usize = 10_000;

/// Ground truth plus simulated measurements, in world coordinates.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Scenario {
    pub landmarks: BTreeMap<u32, Point2>,
    pub trajectory: Vec<Pose2>,
    pub observations: Vec<Observation>,
    /// `actions[k]` is the heading of the move from `trajectory[actions[k].time_index]`
    /// to the next pose.
    pub actions: Vec<Action>,
    pub noise: NoiseConfig,
    pub seed: u64,
}

impl Scenario {
    pub fn landmark(&self, id: u32) -> Result<Point2> {
        self.landmarks
            .get(&id)
            .copied()
            .ok_or_else(|| Error::InvalidArgument(format!("unknown landmark {id}")))
    }

    /// Triplets with at least one observation, in first-seen order.
    pub fn triplets(&self) -> Vec<TripletId> {
        let mut out: Vec<TripletId> = Vec::new();
        for o in &self.observations {
            if !out.contains(&o.triplet) {
                out.push(o.triplet);
            }
        }
        out
    }
}

fn random_point<R: Rng + ?Sized>(rng: &mut R) -> Point2 {
    Point2::new(rng.random_range(X_RANGE.0..X_RANGE.1), rng.random_range(Y_RANGE.0..Y_RANGE.1))
}

/// Draws `count` points inside the bounds that keep `MIN_DISTANCE` from each
/// other and from `existing`.
pub fn draw_separated<R: Rng + ?Sized>(count: usize, existing: &[Point2], rng: &mut R) -> Result<Vec<Point2>> {
    let mut placed: Vec<Point2> = Vec::with_capacity(count);
    let mut draws = 0;
    while placed.len() < count {
        draws += 1;
        if draws > MAX_DRAWS {
            return Err(Error::Generation(format!(
                "could not place {count} separated points in {MAX_DRAWS} draws"
            )));
        }
        let p = random_point(rng);
        if existing.iter().chain(&placed).all(|q| q.distance(p) >= MIN_DISTANCE) {
            placed.push(p);
        }
    }
    Ok(placed)
}

/// One triplet `(1, 2, 3)` observed from `views` random poses.
pub fn gen_triplet_scenario<R: Rng + ?Sized>(noise: NoiseConfig, views: usize, seed: u64, rng: &mut R) -> Result<Scenario> {
    if views == 0 {
        return Err(Error::InvalidArgument("views must be at least 1".into()));
    }
    let lm = draw_separated(3, &[], rng)?;
    let positions = draw_separated(views, &lm, rng)?;
    let trajectory: Vec<Pose2> = positions
        .iter()
        .map(|p| Pose2::from_point(*p, rng.random_range(-std::f64::consts::PI..std::f64::consts::PI)))
        .collect();
    let triplet = (1, 2, 3);
    let landmarks: BTreeMap<u32, Point2> = [(1, lm[0]), (2, lm[1]), (3, lm[2])].into_iter().collect();
    let observations = trajectory
        .iter()
        .enumerate()
        .map(|(t, pose)| sample_observation(pose, [lm[0], lm[1], lm[2]], t, triplet, &noise, rng))
        .collect();
    let actions = trajectory
        .windows(2)
        .enumerate()
        .map(|(t, w)| sample_action(&w[0], &w[1], t, &noise, rng))
        .collect();
    Ok(Scenario {
        landmarks,
        trajectory,
        observations,
        actions,
        noise,
        seed,
    })
}

/// RNG for item `index` of a seeded batch; independent of batch order.
pub fn stream_rng(seed: u64, index: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(index);
    rng
}

/// Noise levels of the default experiment grid, in degrees: six bearing
/// levels, each paired with six heading levels.
pub fn default_noise_grid() -> Vec<(f64, f64)> {
    let sv = [0.0, 1.0, 2.0, 4.0, 7.0, 10.0];
    let sw = [0.0, 2.0, 4.0, 8.0, 14.0, 20.0];
    sv.iter().flat_map(|v| sw.iter().map(move |w| (*v, *w))).collect()
}

/// `scenarios_per_cell` triplet scenarios for every `(sigma_v, sigma_w)` cell
/// (degrees). Scenario `n` of the batch uses RNG stream `n` of `seed`.
pub fn gen_experiment_grid(noise_grid: &[(f64, f64)], scenarios_per_cell: usize, views: usize, seed: u64) -> Result<Vec<Scenario>> {
    let mut out = Vec::with_capacity(noise_grid.len() * scenarios_per_cell);
    for (cell, (sv, sw)) in noise_grid.iter().enumerate() {
        let noise = NoiseConfig::from_degrees(*sv, *sw)?;
        for k in 0..scenarios_per_cell {
            let index = (cell * scenarios_per_cell + k) as u64;
            let mut rng = stream_rng(seed, index);
            out.push(gen_triplet_scenario(noise, views, index, &mut rng)?);
        }
    }
    Ok(out)
}

/// Ground truth of one triplet expressed in its own `AB` frame.
#[derive(Debug, Clone, PartialEq)]
pub struct TripletTruth {
    pub landmark_c: Point2,
    pub poses: Vec<Pose2>,
}

/// Rotates the world-frame actions of the poses that observed `triplet` into
/// its `AB` frame. Returns observations, actions and the ground truth.
pub fn triplet_view(scenario: &Scenario, triplet: TripletId) -> Result<(Vec<Observation>, Vec<Action>, TripletTruth)> {
    let (a, b, c) = (scenario.landmark(triplet.0)?, scenario.landmark(triplet.1)?, scenario.landmark(triplet.2)?);
    let frame = PairFrame::new(a, b)?;
    let observations: Vec<Observation> = scenario.observations.iter().filter(|o| o.triplet == triplet).copied().collect();
    let poses = observations
        .iter()
        .map(|o| {
            scenario
                .trajectory
                .get(o.time_index)
                .map(|p| frame.pose_to_local(p))
                .ok_or_else(|| Error::InvalidArgument(format!("observation at missing time {}", o.time_index)))
        })
        .collect::<Result<Vec<_>>>()?;
    // Headings between consecutive views of this triplet.
    let mut actions = Vec::new();
    for w in observations.windows(2) {
        let (t0, t1) = (w[0].time_index, w[1].time_index);
        let psi = if t1 == t0 + 1 {
            scenario.actions.iter().find(|a| a.time_index == t0).map(|a| a.psi)
        } else {
            None
        };
        let psi = match psi {
            Some(p) => p,
            None => {
                let (p0, p1) = (scenario.trajectory[t0].position(), scenario.trajectory[t1].position());
                crate::geometry::azimuth(p0, p1)
            }
        };
        actions.push(Action {
            time_index: t0,
            psi: frame.heading_to_local(psi),
        });
    }
    Ok((
        observations,
        actions,
        TripletTruth {
            landmark_c: frame.to_local(c),
            poses,
        },
    ))
}

/// Size and selection knobs of a random factor-graph scenario.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GraphConfig {
    pub landmark_count: usize,
    pub factor_count: usize,
    /// Fraction of the graph's triplets that receive observations.
    pub coverage_rate: f64,
    /// Random graphs drawn; the one with the highest connectivity score is kept.
    pub candidates: usize,
    pub views: usize,
}

impl Default for GraphConfig {
    fn default() -> Self {
        Self {
            landmark_count: 6,
            factor_count: 8,
            coverage_rate: 0.5,
            candidates: 20,
            views: 3,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GraphScenario {
    pub scenario: Scenario,
    pub graph: QualitativeFactorGraph,
    pub coverage_rate: f64,
    pub connectivity: f64,
}

/// Every composition pattern `(AB:C, BC:D, AB:D)` over ordered landmark quadruples.
fn all_factor_patterns(landmark_count: usize) -> Vec<[TripletId; 3]> {
    let ids: Vec<u32> = (1..=landmark_count as u32).collect();
    let mut out = Vec::new();
    for &a in &ids {
        for &b in &ids {
            for &c in &ids {
                for &d in &ids {
                    if a == b || a == c || a == d || b == c || b == d || c == d {
                        continue;
                    }
                    out.push([(a, b, c), (b, c, d), (a, b, d)]);
                }
            }
        }
    }
    out
}

/// Graph of `factor_count` random composition factors with a random seen
/// subset of `round(n_v * coverage_rate)` variables (`d` states per variable).
fn random_graph<R: Rng + ?Sized>(
    patterns: &[[TripletId; 3]],
    config: &GraphConfig,
    d: usize,
    rng: &mut R,
) -> Result<QualitativeFactorGraph> {
    let chosen: Vec<&[TripletId; 3]> = patterns.choose_multiple(rng, config.factor_count).collect();
    let mut graph = QualitativeFactorGraph::new(d);
    let mut ids: BTreeMap<TripletId, usize> = BTreeMap::new();
    for pattern in &chosen {
        for t in pattern.iter() {
            if !ids.contains_key(t) {
                let id = ids.len() + 1;
                ids.insert(*t, id);
                graph.add_variable(id, *t)?;
            }
        }
    }
    for pattern in &chosen {
        graph.add_factor(pattern.map(|t| ids[&t]))?;
    }
    let n_v = graph.variables.len();
    let n_seen = ((n_v as f64 * config.coverage_rate).round() as usize).min(n_v);
    let order = shuffled(n_v, rng);
    for k in &order[..n_seen] {
        graph.mark_seen(k + 1)?;
    }
    Ok(graph)
}

/// Random factor-graph scenario: the candidate graph with the highest
/// connectivity score, plus landmarks and `views` random poses observing each
/// seen triplet.
pub fn gen_graph_scenario<R: Rng + ?Sized>(
    config: &GraphConfig,
    noise: NoiseConfig,
    d: usize,
    seed: u64,
    rng: &mut R,
) -> Result<GraphScenario> {
    if config.candidates == 0 || config.views == 0 {
        return Err(Error::InvalidArgument("candidates and views must be at least 1".into()));
    }
    if !(0.0..=1.0).contains(&config.coverage_rate) {
        return Err(Error::InvalidArgument(format!("coverage rate {} outside [0, 1]", config.coverage_rate)));
    }
    let patterns = all_factor_patterns(config.landmark_count);
    if config.factor_count == 0 || config.factor_count > patterns.len() {
        return Err(Error::Generation(format!(
            "{} factors requested, {} landmarks allow {}",
            config.factor_count,
            config.landmark_count,
            patterns.len()
        )));
    }
    let lm = draw_separated(config.landmark_count, &[], rng)?;
    let mut best: Option<(f64, QualitativeFactorGraph)> = None;
    for _ in 0..config.candidates {
        let mut g = random_graph(&patterns, config, d, rng)?;
        g.topology_score(DEFAULT_ALPHA, true)?;
        let score = g.connectivity_score();
        if best.as_ref().is_none_or(|(b, _)| score > *b) {
            best = Some((score, g));
        }
    }
    let (connectivity, graph) = best.expect("at least one candidate");

    let landmarks: BTreeMap<u32, Point2> = lm.iter().enumerate().map(|(i, p)| (i as u32 + 1, *p)).collect();
    let mut trajectory: Vec<Pose2> = Vec::new();
    let mut observations = Vec::new();
    for var in graph.variables.values().filter(|v| v.seen) {
        let (a, b, c) = var.triplet;
        let pts = [landmarks[&a], landmarks[&b], landmarks[&c]];
        let mut occupied = lm.clone();
        occupied.extend(trajectory.iter().map(|p| p.position()));
        for p in draw_separated(config.views, &occupied, rng)? {
            let pose = Pose2::from_point(p, rng.random_range(-std::f64::consts::PI..std::f64::consts::PI));
            observations.push(sample_observation(&pose, pts, trajectory.len(), var.triplet, &noise, rng));
            trajectory.push(pose);
        }
    }
    let actions = trajectory
        .windows(2)
        .enumerate()
        .map(|(t, w)| sample_action(&w[0], &w[1], t, &noise, rng))
        .collect();
    Ok(GraphScenario {
        scenario: Scenario {
            landmarks,
            trajectory,
            observations,
            actions,
            noise,
            seed,
        },
        graph,
        coverage_rate: config.coverage_rate,
        connectivity,
    })
}

/// Three triplets `(1,2,3)`, `(2,3,4)`, `(1,2,4)` joined by one composition
/// factor; two of them (chosen at random) are observed.
pub fn gen_composition_scenario<R: Rng + ?Sized>(noise: NoiseConfig, views: usize, d: usize, seed: u64, rng: &mut R) -> Result<GraphScenario> {
    let config = GraphConfig {
        landmark_count: 4,
        factor_count: 1,
        coverage_rate: 2.0 / 3.0,
        candidates: 1,
        views,
    };
    let mut gs = gen_graph_scenario(&config, noise, d, seed, rng)?;
    // Keep the canonical landmark naming regardless of the drawn quadruple.
    let f = gs.graph.composition_factors[0].variables;
    let (a, b, c) = gs.graph.variables[&f[0]].triplet;
    let d4 = gs.graph.variables[&f[1]].triplet.2;
    let rename: BTreeMap<u32, u32> = [(a, 1), (b, 2), (c, 3), (d4, 4)].into_iter().collect();
    gs.scenario.landmarks = gs.scenario.landmarks.iter().map(|(id, p)| (rename[id], *p)).collect();
    for o in &mut gs.scenario.observations {
        o.triplet = (rename[&o.triplet.0], rename[&o.triplet.1], rename[&o.triplet.2]);
    }
    for v in gs.graph.variables.values_mut() {
        v.triplet = (rename[&v.triplet.0], rename[&v.triplet.1], rename[&v.triplet.2]);
    }
    Ok(gs)
}

/// Ground-truth state of `triplet` in its own `AB` frame.
pub fn triplet_state(scenario: &Scenario, triplet: TripletId, partition: &SpacePartition) -> Result<usize> {
    let frame = PairFrame::new(scenario.landmark(triplet.0)?, scenario.landmark(triplet.1)?)?;
    Ok(partition.classify(frame.to_local(scenario.landmark(triplet.2)?)))
}

/// Solves every seen triplet of the graph and installs the landmark
/// posteriors as unary factors. Triplet `n` in id order uses RNG stream `n`
/// of `seed`.
pub fn solve_seen(
    gs: &mut GraphScenario,
    variant: SolverVariant,
    partition: &SpacePartition,
    params: &SolverParams,
    seed: u64,
) -> Result<()> {
    let seen: Vec<(usize, TripletId)> = gs.graph.variables.values().filter(|v| v.seen).map(|v| (v.id, v.triplet)).collect();
    for (id, triplet) in seen {
        let (obs, actions, _) = triplet_view(&gs.scenario, triplet)?;
        let mut rng = stream_rng(seed, id as u64);
        let post = solve(variant, &obs, &actions, &gs.scenario.noise, partition, params, &mut rng)?;
        gs.graph.set_unary(id, post.landmark_state)?;
    }
    Ok(())
}

/// Random order of `0..n`.
pub fn shuffled<R: Rng + ?Sized>(n: usize, rng: &mut R) -> Vec<usize> {
    let mut v: Vec<usize> = (0..n).collect();
    v.shuffle(rng);
    v
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn bounds_and_separation_hold() {
        let noise = NoiseConfig::from_degrees(2.0, 5.0).unwrap();
        for n in 0..10_000u64 {
            let mut rng = stream_rng(11, n);
            let s = gen_triplet_scenario(noise, 3, n, &mut rng).unwrap();
            let mut pts: Vec<Point2> = s.landmarks.values().copied().collect();
            pts.extend(s.trajectory.iter().map(|p| p.position()));
            for (i, p) in pts.iter().enumerate() {
                assert!(p.x >= X_RANGE.0 && p.x <= X_RANGE.1 && p.y >= Y_RANGE.0 && p.y <= Y_RANGE.1);
                for q in &pts[i + 1..] {
                    assert!(p.distance(*q) >= MIN_DISTANCE);
                }
            }
            assert_eq!(s.observations.len(), 3);
            assert_eq!(s.actions.len(), 2);
        }
    }

    #[test]
    fn generation_is_reproducible() {
        let noise = NoiseConfig::from_degrees(2.0, 5.0).unwrap();
        let a = gen_triplet_scenario(noise, 3, 0, &mut stream_rng(5, 0)).unwrap();
        let b = gen_triplet_scenario(noise, 3, 0, &mut stream_rng(5, 0)).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn grid_sizes() {
        assert_eq!(default_noise_grid().len(), 36);
        let grid = [(0.0, 0.0), (1.0, 2.0)];
        let g = [grid[0], grid[1], (2.0, 4.0), (3.0, 6.0)];
        let s = gen_experiment_grid(&g, 5, 3, 1).unwrap();
        assert_eq!(s.len(), 20);
        assert!((s[19].noise.sigma_v_deg() - 3.0).abs() < 1e-12);
        assert!((s[0].noise.sigma_w_deg()).abs() < 1e-12);
    }

    #[test]
    fn triplet_view_is_in_ab_frame() {
        let noise = NoiseConfig::default();
        let s = gen_triplet_scenario(noise, 3, 0, &mut stream_rng(6, 0)).unwrap();
        let (obs, acts, truth) = triplet_view(&s, (1, 2, 3)).unwrap();
        for (o, pose) in obs.iter().zip(&truth.poses) {
            assert!((o.bearings[0] - pose.bearing_to(Point2::new(0.0, 0.0))).abs() < 1e-9);
            assert!((o.bearings[1] - pose.bearing_to(Point2::new(0.0, 1.0))).abs() < 1e-9);
            assert!((o.bearings[2] - pose.bearing_to(truth.landmark_c)).abs() < 1e-9);
        }
        for (a, w) in acts.iter().zip(truth.poses.windows(2)) {
            let az = crate::geometry::azimuth(w[0].position(), w[1].position());
            assert!(crate::geometry::wrap_angle(a.psi - az).abs() < 1e-9);
        }
    }

    #[test]
    fn graph_scenarios_follow_the_config() {
        let noise = NoiseConfig::from_degrees(1.0, 2.0).unwrap();
        let config = GraphConfig::default();
        for n in 0..20u64 {
            let gs = gen_graph_scenario(&config, noise, 20, n, &mut stream_rng(12, n)).unwrap();
            let g = &gs.graph;
            let n_v = g.variables.len();
            assert_eq!(g.seen_ids().len(), (n_v as f64 * 0.5).round() as usize);
            assert_eq!(g.composition_factors.len(), config.factor_count);
            for f in &g.composition_factors {
                let [t1, t2, t3] = f.variables.map(|v| g.variables[&v].triplet);
                assert_eq!((t2.0, t2.1), (t1.1, t1.2));
                assert_eq!((t3.0, t3.1, t3.2), (t1.0, t1.1, t2.2));
            }
            for id in g.seen_ids() {
                let t = g.variables[&id].triplet;
                assert_eq!(gs.scenario.observations.iter().filter(|o| o.triplet == t).count(), 3);
            }
            let mut again = g.clone();
            again.topology_score(DEFAULT_ALPHA, true).unwrap();
            assert_eq!(again.connectivity_score(), gs.connectivity);
        }
        let a = gen_graph_scenario(&config, noise, 20, 1, &mut stream_rng(12, 1)).unwrap();
        let b = gen_graph_scenario(&config, noise, 20, 1, &mut stream_rng(12, 1)).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn full_coverage_has_zero_connectivity() {
        let config = GraphConfig {
            coverage_rate: 1.0,
            ..GraphConfig::default()
        };
        let gs = gen_graph_scenario(&config, NoiseConfig::default(), 20, 0, &mut stream_rng(13, 0)).unwrap();
        assert_eq!(gs.connectivity, 0.0);
        let too_many = GraphConfig {
            landmark_count: 4,
            factor_count: 25,
            ..GraphConfig::default()
        };
        assert!(matches!(
            gen_graph_scenario(&too_many, NoiseConfig::default(), 20, 0, &mut stream_rng(13, 0)),
            Err(Error::Generation(_))
        ));
    }

    #[test]
    fn composition_scenario_layout() {
        let p = SpacePartition::edc();
        let gs = gen_composition_scenario(NoiseConfig::default(), 3, 20, 0, &mut stream_rng(14, 0)).unwrap();
        let g = &gs.graph;
        let f = g.composition_factors[0].variables;
        assert_eq!(g.variables[&f[0]].triplet, (1, 2, 3));
        assert_eq!(g.variables[&f[1]].triplet, (2, 3, 4));
        assert_eq!(g.variables[&f[2]].triplet, (1, 2, 4));
        assert_eq!(g.seen_ids().len(), 2);
        for id in g.seen_ids() {
            let t = g.variables[&id].triplet;
            let (_, _, truth) = triplet_view(&gs.scenario, t).unwrap();
            assert_eq!(triplet_state(&gs.scenario, t, &p).unwrap(), p.classify(truth.landmark_c));
        }
    }

}
