//! Sample-based posterior estimation of the qualitative states of one landmark
//! triplet `AB:C` and of the camera poses that observed it.
//!
//! Every trajectory hypothesis starts from a first camera pose on (or near)
//! the locus circle of the first view, is extended through the later views by
//! the motion headings, and is scored by how well the triangulated landmark
//! `C` explains the bearings towards it.

use rand::Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geometry::{
    azimuth, intersect_motion_ray, locus_from_bearings, orientation_on_circle, triangulate, wrap_angle, LocusCircle,
    Point2, Pose2,
};
use crate::models::{gaussian_loglik, Action, NoiseConfig, Observation};
use crate::partition::{SpacePartition, StateVector};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum SolverVariant {
    Full,
    Fast,
    Baseline,
}

impl SolverVariant {
    pub const ALL: [SolverVariant; 3] = [SolverVariant::Baseline, SolverVariant::Full, SolverVariant::Fast];

    pub fn name(self) -> &'static str {
        match self {
            SolverVariant::Full => "full",
            SolverVariant::Fast => "fast",
            SolverVariant::Baseline => "baseline",
        }
    }
}

impl std::str::FromStr for SolverVariant {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "full" => Ok(SolverVariant::Full),
            "fast" => Ok(SolverVariant::Fast),
            "baseline" => Ok(SolverVariant::Baseline),
            other => Err(Error::InvalidArgument(format!("unknown solver '{other}'"))),
        }
    }
}

impl std::fmt::Display for SolverVariant {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.pad(self.name())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SolverParams {
    /// First-pose samples, and pose samples per later view arc (full solver).
    pub pose_samples: usize,
    /// First-pose samples of the fast solver.
    pub fast_pose_samples: usize,
    /// Pose samples per view arc of the baseline.
    pub baseline_pose_samples: usize,
    /// Motion matches are kept within this many heading sigmas.
    pub gate_sigmas: f64,
    /// Hypotheses lighter than this fraction of the heaviest are dropped.
    pub prune_ratio: f64,
    pub max_hypotheses: usize,
    /// Lower bound on the sigmas used for weighting, so noise-free input
    /// still yields finite weights.
    pub sigma_floor: f64,
    /// Cell refinement kicks in while the effective sample size is below this.
    pub min_effective_samples: f64,
    pub refine_rounds: usize,
    /// Ranking sigma of the first refinement round.
    pub refine_start_sigma: f64,
    /// Log-likelihood window below the best in which local peaks get refined.
    pub refine_window: f64,
    /// A peak counts as resolved once its neighbours are within this many nats.
    pub refine_resolution: f64,
    pub refine_cells: usize,
    pub refine_split: usize,
    /// Landmark samples per pose along the line of sight when only one view exists.
    pub line_of_sight_samples: usize,
    /// Landmark candidates per view for the baseline.
    pub baseline_candidates: usize,
}

impl Default for SolverParams {
    fn default() -> Self {
        Self {
            pose_samples: 800,
            fast_pose_samples: 200,
            baseline_pose_samples: 200,
            gate_sigmas: 3.0,
            prune_ratio: 1e-3,
            max_hypotheses: 5000,
            sigma_floor: 1e-6,
            min_effective_samples: 8.0,
            refine_rounds: 16,
            refine_start_sigma: 0.1,
            refine_window: 200.0,
            refine_resolution: 1.0,
            refine_cells: 16,
            refine_split: 8,
            line_of_sight_samples: 10,
            baseline_candidates: 100,
        }
    }
}

/// Measurements of one triplet in its `AB` frame.
#[derive(Debug, Clone, PartialEq)]
pub struct TripletProblem {
    /// `(phi_A, phi_B, phi_C)` per view, in time order.
    pub bearings: Vec<[f64; 3]>,
    /// `headings[i]` is the `AB`-frame heading from view `i` to view `i + 1`.
    pub headings: Vec<f64>,
}

impl TripletProblem {
    /// Collects the bearings of `observations` (sorted by time) and the
    /// heading for every gap between consecutive views. Headings are looked
    /// up by the time index of the earlier view; missing ones are an error
    /// only when `require_actions` is set.
    pub fn new(observations: &[Observation], actions: &[Action], require_actions: bool) -> Result<Self> {
        if observations.is_empty() {
            return Err(Error::InvalidArgument("at least one observation is required".into()));
        }
        let mut obs = observations.to_vec();
        obs.sort_by_key(|o| o.time_index);
        let triplet = obs[0].triplet;
        if obs.iter().any(|o| o.triplet != triplet) {
            return Err(Error::InvalidArgument("observations mix different triplets".into()));
        }
        let mut headings = Vec::new();
        for w in obs.windows(2) {
            match actions.iter().find(|a| a.time_index == w[0].time_index) {
                Some(a) => headings.push(a.psi),
                None if require_actions => {
                    return Err(Error::InvalidArgument(format!(
                        "no action between times {} and {}",
                        w[0].time_index, w[1].time_index
                    )))
                }
                None => {}
            }
        }
        Ok(Self {
            bearings: obs.iter().map(|o| o.bearings).collect(),
            headings,
        })
    }

    pub fn views(&self) -> usize {
        self.bearings.len()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TripletPosterior {
    pub landmark_state: StateVector,
    pub camera_states: Vec<StateVector>,
    pub hypothesis_count: usize,
    /// Live hypotheses after each view (entry 0 is the first-pose sample count).
    pub hypothesis_counts: Vec<usize>,
    pub solver_variant: SolverVariant,
    /// Set when no hypothesis survived and the states fell back to uniform.
    pub degraded: bool,
}

/// One trajectory hypothesis with its log weights.
#[derive(Debug, Clone, PartialEq)]
pub struct TrajectoryHypothesis {
    pub poses: Vec<Pose2>,
    pub landmark_c: Point2,
    /// `motion_weights[i]` belongs to the move into view `i + 1`.
    pub motion_weights: Vec<f64>,
    pub resection_weights: Vec<f64>,
    /// Log prior mass of the first-pose cell the hypothesis grew from.
    log_cell: f64,
    cell: usize,
    /// Squared bearing and heading residuals, for re-weighting with other sigmas.
    sq_bearing: f64,
    sq_motion: f64,
}

impl TrajectoryHypothesis {
    /// `ln(wr_1 * prod(wm_i * wr_i))` plus the first-pose cell mass.
    pub fn log_weight(&self) -> f64 {
        self.log_cell + self.motion_weights.iter().sum::<f64>() + self.resection_weights.iter().sum::<f64>()
    }

    pub fn total_weight(&self) -> f64 {
        self.log_weight().exp()
    }

    fn tempered_weight(&self, sigma_v: f64, sigma_w: f64) -> f64 {
        self.log_cell - 0.5 * self.sq_bearing / (sigma_v * sigma_v) - 0.5 * self.sq_motion / (sigma_w * sigma_w)
    }
}

/// A first-pose parameter cell: a locus circle and an arc interval.
#[derive(Debug, Clone, Copy)]
struct Cell {
    circle: LocusCircle,
    phi_a: f64,
    /// Sample point inside `[lo, lo + width]`.
    t: f64,
    lo: f64,
    width: f64,
    /// Cells of one family share a circle and tile one stretch of its arc.
    family: usize,
    split: bool,
}

impl Cell {
    fn pose(&self) -> Option<Pose2> {
        let p = self.circle.point_at(self.t);
        orientation_on_circle(p, self.phi_a).ok().map(|a| Pose2::from_point(p, a))
    }
}

struct Context<'a> {
    problem: &'a TripletProblem,
    params: &'a SolverParams,
    sigma_v: f64,
    sigma_w: f64,
    nominal: Vec<Option<LocusCircle>>,
}

impl<'a> Context<'a> {
    fn new(problem: &'a TripletProblem, noise: &NoiseConfig, params: &'a SolverParams) -> Self {
        Self {
            problem,
            params,
            sigma_v: noise.sigma_v.max(params.sigma_floor),
            sigma_w: noise.sigma_w.max(params.sigma_floor),
            nominal: problem
                .bearings
                .iter()
                .map(|b| locus_from_bearings(b[0], b[1]).ok())
                .collect(),
        }
    }

    /// Poses where the motion ray from `from` meets the nominal circle of `view`.
    fn exact_successors(&self, from: &Pose2, view: usize) -> Vec<Pose2> {
        let Some(circle) = self.nominal[view] else {
            return Vec::new();
        };
        intersect_motion_ray(from, self.problem.headings[view - 1], &circle)
            .into_iter()
            .filter_map(|p| {
                orientation_on_circle(p, self.problem.bearings[view][0])
                    .ok()
                    .map(|a| Pose2::from_point(p, a))
            })
            .collect()
    }

    /// Triangulates `C` from all poses and scores every view's bearing to it.
    fn resect(&self, poses: &[Pose2]) -> Option<(Point2, Vec<f64>, f64)> {
        let n = poses.len();
        let phis: Vec<f64> = self.problem.bearings[..n].iter().map(|b| b[2]).collect();
        let c = triangulate(poses, &phis).ok()?;
        if poses.iter().any(|p| p.position() == c) {
            return None;
        }
        let residuals: Vec<f64> = poses.iter().zip(&phis).map(|(pose, phi)| wrap_angle(phi - pose.bearing_to(c))).collect();
        let wr = residuals.iter().map(|r| gaussian_loglik(*r, self.sigma_v)).collect();
        Some((c, wr, residuals.iter().map(|r| r * r).sum()))
    }

    /// Extends every hypothesis into `view`: exact motion-ray successors on
    /// the nominal circle plus, unless `exact_only`, the gated pose samples.
    /// Each extension is re-resected; failed resections are dropped.
    fn extend(
        &self,
        hyps: &[TrajectoryHypothesis],
        view: usize,
        samples: &[Pose2],
        exact_only: bool,
    ) -> Vec<TrajectoryHypothesis> {
        let psi = self.problem.headings[view - 1];
        let gate = self.params.gate_sigmas * self.sigma_w;
        let mut out = Vec::new();
        for h in hyps {
            let last = h.poses[h.poses.len() - 1];
            let mut candidates: Vec<(Pose2, f64)> =
                self.exact_successors(&last, view).into_iter().map(|p| (p, 0.0)).collect();
            if !exact_only {
                for pose in samples {
                    if pose.position() == last.position() {
                        continue;
                    }
                    let r = wrap_angle(psi - azimuth(last.position(), pose.position()));
                    if r.abs() <= gate {
                        candidates.push((*pose, r));
                    }
                }
            }
            for (pose, r) in candidates {
                let mut poses = h.poses.clone();
                poses.push(pose);
                let Some((c, wr, sq_bearing)) = self.resect(&poses) else {
                    continue;
                };
                let mut wm = h.motion_weights.clone();
                wm.push(gaussian_loglik(r, self.sigma_w));
                out.push(TrajectoryHypothesis {
                    poses,
                    landmark_c: c,
                    motion_weights: wm,
                    resection_weights: wr,
                    log_cell: h.log_cell,
                    cell: h.cell,
                    sq_bearing,
                    sq_motion: h.sq_motion + r * r,
                });
            }
        }
        out
    }

    /// Hypotheses of one first-pose cell carried through views `1..=upto`.
    fn grow(&self, cell_id: usize, cell: &Cell, samples: &[Vec<Pose2>], upto: usize, exact_only: bool) -> Vec<TrajectoryHypothesis> {
        let Some(first) = cell.pose() else {
            return Vec::new();
        };
        let mut hyps = vec![seed_hypothesis(cell_id, cell, first)];
        for view in 1..=upto {
            hyps = self.extend(&hyps, view, &samples[view], exact_only);
        }
        hyps
    }
}

fn seed_hypothesis(cell_id: usize, cell: &Cell, first: Pose2) -> TrajectoryHypothesis {
    TrajectoryHypothesis {
        poses: vec![first],
        landmark_c: first.position(),
        motion_weights: Vec::new(),
        resection_weights: Vec::new(),
        log_cell: cell.width.ln(),
        cell: cell_id,
        sq_bearing: 0.0,
        sq_motion: 0.0,
    }
}

/// Splits the heaviest first-pose cells into finer cells and regrows them
/// through `view`, while the weight is concentrated on too few hypotheses.
/// Cells are ranked with sigmas widened to `refine_start_sigma` and narrowed
/// by the split factor each round, so every separate solution keeps cells
/// until the cells are fine enough for the true sigmas.
fn refine(
    ctx: &Context<'_>,
    cells: &mut Vec<Cell>,
    hyps: &mut Vec<TrajectoryHypothesis>,
    samples: &[Vec<Pose2>],
    view: usize,
    exact_only: bool,
) {
    let params = ctx.params;
    if hyps.is_empty() || effective_samples(hyps) >= params.min_effective_samples {
        return;
    }
    let k = params.refine_split.max(2);
    let sigma_min = ctx.sigma_v.min(ctx.sigma_w);
    let mut tau = params.refine_start_sigma;
    for _ in 0..params.refine_rounds {
        let (tv, tw) = (ctx.sigma_v.max(tau), ctx.sigma_w.max(tau));
        let chosen = refinement_cells(cells, hyps, tv, tw, tau <= sigma_min, params);
        if chosen.is_empty() {
            break;
        }
        hyps.retain(|h| !chosen.contains(&h.cell));
        for &id in &chosen {
            cells[id].split = true;
            let parent = cells[id];
            let width = parent.width / k as f64;
            for j in 0..k {
                let lo = parent.lo + j as f64 * width;
                let t = lo + 0.5 * width;
                cells.push(Cell { t, lo, width, split: false, ..parent });
                let child = cells.len() - 1;
                hyps.extend(ctx.grow(child, &cells[child], samples, view, exact_only));
            }
        }
        prune(hyps, 0.0, params.max_hypotheses);
        tau /= k as f64;
    }
}

/// Picks the cells to split: every local maximum (along its family's arc)
/// of the tempered likelihood that comes within `refine_window` of the best,
/// together with its two arc neighbours, so each separate solution stays
/// bracketed however flat or steep it is. With `unresolved_only`, peaks whose
/// neighbours are within `refine_resolution` of them are left alone.
fn refinement_cells(
    cells: &[Cell],
    hyps: &[TrajectoryHypothesis],
    tv: f64,
    tw: f64,
    unresolved_only: bool,
    params: &SolverParams,
) -> Vec<usize> {
    let mut score = vec![f64::NEG_INFINITY; cells.len()];
    for h in hyps {
        let s = h.tempered_weight(tv, tw) - h.log_cell;
        if s > score[h.cell] {
            score[h.cell] = s;
        }
    }
    let best = score.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    if !best.is_finite() {
        return Vec::new();
    }
    let mut leaves: Vec<usize> = (0..cells.len()).filter(|&i| !cells[i].split).collect();
    leaves.sort_by(|&a, &b| cells[a].family.cmp(&cells[b].family).then(cells[a].lo.total_cmp(&cells[b].lo)));
    let neighbour = |pos: usize, offset: isize| -> Option<usize> {
        let j = pos.checked_add_signed(offset)?;
        let id = *leaves.get(j)?;
        (cells[id].family == cells[leaves[pos]].family).then_some(id)
    };
    let mut peaks: Vec<(usize, usize)> = Vec::new();
    for (pos, &id) in leaves.iter().enumerate() {
        let s = score[id];
        if s < best - params.refine_window {
            continue;
        }
        let left = neighbour(pos, -1).map_or(f64::NEG_INFINITY, |n| score[n]);
        let right = neighbour(pos, 1).map_or(f64::NEG_INFINITY, |n| score[n]);
        if s >= left && s >= right && (!unresolved_only || s - left.min(right) > params.refine_resolution) {
            peaks.push((pos, id));
        }
    }
    peaks.sort_by(|a, b| score[b.1].total_cmp(&score[a.1]).then(a.1.cmp(&b.1)));
    peaks.truncate(params.refine_cells);
    let mut chosen = Vec::new();
    for (pos, id) in peaks {
        for c in [neighbour(pos, -1), Some(id), neighbour(pos, 1)].into_iter().flatten() {
            if !chosen.contains(&c) {
                chosen.push(c);
            }
        }
    }
    chosen
}

/// Gives cells that share a circle and orientation one family id.
fn assign_families(cells: &mut [Cell]) {
    for i in 0..cells.len() {
        cells[i].family = (0..i)
            .find(|&j| cells[j].circle == cells[i].circle && cells[j].phi_a == cells[i].phi_a)
            .map_or(i, |j| cells[j].family);
    }
}

/// Pose sample from the circle of perturbed bearings to `A` and `B`.
/// The pose sits at a uniform point of the arc interval `[lo, lo + width]`.
fn vicinity_cell<R: Rng + ?Sized>(bearings: [f64; 3], sigma_v: f64, lo: f64, width: f64, rng: &mut R) -> Option<Cell> {
    let (pa, pb) = if sigma_v > 0.0 {
        let n = Normal::new(0.0, sigma_v).expect("finite sigma");
        (bearings[0] + n.sample(rng), bearings[1] + n.sample(rng))
    } else {
        (bearings[0], bearings[1])
    };
    let circle = locus_from_bearings(pa, pb).ok()?;
    Some(Cell {
        circle,
        phi_a: pa,
        t: lo + rng.random::<f64>() * width,
        lo,
        width,
        family: 0,
        split: false,
    })
}

fn prune(hyps: &mut Vec<TrajectoryHypothesis>, ratio: f64, cap: usize) {
    hyps.retain(|h| h.log_weight().is_finite());
    let Some(max) = hyps.iter().map(|h| h.log_weight()).reduce(f64::max) else {
        return;
    };
    let floor = max + ratio.ln();
    hyps.retain(|h| h.log_weight() >= floor);
    if hyps.len() > cap {
        // Stable: equal weights keep generation order.
        hyps.sort_by(|a, b| b.log_weight().total_cmp(&a.log_weight()));
        hyps.truncate(cap);
    }
}

fn effective_samples(hyps: &[TrajectoryHypothesis]) -> f64 {
    let Some(max) = hyps.iter().map(|h| h.log_weight()).reduce(f64::max) else {
        return 0.0;
    };
    let w: Vec<f64> = hyps.iter().map(|h| (h.log_weight() - max).exp()).collect();
    let s: f64 = w.iter().sum();
    let s2: f64 = w.iter().map(|x| x * x).sum();
    s * s / s2
}

fn aggregate(
    partition: &SpacePartition,
    views: usize,
    weighted: &[(f64, Point2, Vec<Point2>)],
) -> (StateVector, Vec<StateVector>, bool) {
    let d = partition.d();
    let Some(max) = weighted.iter().map(|w| w.0).reduce(f64::max).filter(|m| m.is_finite()) else {
        return (StateVector::uniform(d), vec![StateVector::uniform(d); views], true);
    };
    let mut landmark = vec![0.0; d];
    let mut cameras = vec![vec![0.0; d]; views];
    for (lw, c, poses) in weighted {
        let w = (lw - max).exp();
        landmark[partition.classify(*c) - 1] += w;
        for (cam, p) in cameras.iter_mut().zip(poses) {
            cam[partition.classify(*p) - 1] += w;
        }
    }
    let landmark = StateVector::new(landmark).normalized();
    let cameras = cameras.into_iter().map(|c| StateVector::new(c).normalized()).collect();
    (landmark, cameras, false)
}

fn posterior_from(
    partition: &SpacePartition,
    problem: &TripletProblem,
    hyps: &[TrajectoryHypothesis],
    counts: Vec<usize>,
    variant: SolverVariant,
) -> TripletPosterior {
    let weighted: Vec<(f64, Point2, Vec<Point2>)> = hyps
        .iter()
        .map(|h| (h.log_weight(), h.landmark_c, h.poses.iter().map(|p| p.position()).collect()))
        .collect();
    let (landmark_state, camera_states, degraded) = aggregate(partition, problem.views(), &weighted);
    TripletPosterior {
        landmark_state,
        camera_states,
        hypothesis_count: hyps.len(),
        hypothesis_counts: counts,
        solver_variant: variant,
        degraded,
    }
}

/// Landmark hypotheses along each first-pose line of sight, for a single view.
fn single_view<R: Rng + ?Sized>(
    partition: &SpacePartition,
    problem: &TripletProblem,
    cells: &[Cell],
    params: &SolverParams,
    variant: SolverVariant,
    rng: &mut R,
) -> TripletPosterior {
    let phi_c = problem.bearings[0][2];
    let b = partition.borders;
    let reach = Point2::new(b.xmax - b.xmin, b.ymax - b.ymin).norm();
    let q = params.line_of_sight_samples.max(1);
    let mut weighted = Vec::new();
    for cell in cells {
        let Some(pose) = cell.pose() else {
            continue;
        };
        let dir = Point2::from_angle(pose.alpha + phi_c);
        let far = pose.position().norm() + reach;
        let lw = (cell.width / q as f64).ln();
        for _ in 0..q {
            let s: f64 = rng.random::<f64>() * far;
            weighted.push((lw, pose.position() + dir * s, vec![pose.position()]));
        }
    }
    let (landmark_state, camera_states, degraded) = aggregate(partition, 1, &weighted);
    TripletPosterior {
        landmark_state,
        camera_states,
        hypothesis_count: weighted.len(),
        hypothesis_counts: vec![cells.len()],
        solver_variant: variant,
        degraded,
    }
}

fn check_problem(problem: &TripletProblem) -> Result<()> {
    if problem.views() == 0 {
        return Err(Error::InvalidArgument("at least one view is required".into()));
    }
    if problem.headings.len() + 1 < problem.views() {
        return Err(Error::InvalidArgument(format!(
            "{} views need {} headings, got {}",
            problem.views(),
            problem.views() - 1,
            problem.headings.len()
        )));
    }
    Ok(())
}

/// Full sampler: first poses and per-view pose samples near the locus
/// circles (perturbed bearings), motion-gated matching, resection weighting,
/// pruning, and local refinement of under-resolved first-pose cells.
fn full_impl<R: Rng + ?Sized>(
    problem: &TripletProblem,
    noise: &NoiseConfig,
    partition: &SpacePartition,
    params: &SolverParams,
    rng: &mut R,
) -> Result<TripletPosterior> {
    check_problem(problem)?;
    let ctx = Context::new(problem, noise, params);
    let n = problem.views();
    let m = params.pose_samples.max(1);
    let mut cells: Vec<Cell> = (0..m)
        .filter_map(|k| vicinity_cell(problem.bearings[0], noise.sigma_v, k as f64 / m as f64, 1.0 / m as f64, rng))
        .collect();
    assign_families(&mut cells);
    if n == 1 {
        return Ok(single_view(partition, problem, &cells, params, SolverVariant::Full, rng));
    }
    let samples: Vec<Vec<Pose2>> = (0..n)
        .map(|view| {
            if view == 0 {
                return Vec::new();
            }
            (0..m)
                .filter_map(|_| vicinity_cell(problem.bearings[view], noise.sigma_v, 0.0, 1.0, rng).and_then(|c| c.pose()))
                .collect()
        })
        .collect();

    let mut counts = vec![cells.len()];
    let mut hyps: Vec<TrajectoryHypothesis> = cells
        .iter()
        .enumerate()
        .filter_map(|(id, c)| c.pose().map(|p| seed_hypothesis(id, c, p)))
        .collect();
    for view in 1..n {
        hyps = ctx.extend(&hyps, view, &samples[view], false);
        refine(&ctx, &mut cells, &mut hyps, &samples, view, true);
        let cap = params.max_hypotheses.min(*counts.last().expect("non-empty"));
        prune(&mut hyps, params.prune_ratio, cap);
        counts.push(hyps.len());
    }
    Ok(posterior_from(partition, problem, &hyps, counts, SolverVariant::Full))
}

/// Fast variant: first poses on the exact locus circle, later poses only at
/// the exact intersections of the motion rays with the later circles.
fn fast_impl<R: Rng + ?Sized>(
    problem: &TripletProblem,
    noise: &NoiseConfig,
    partition: &SpacePartition,
    params: &SolverParams,
    rng: &mut R,
) -> Result<TripletPosterior> {
    check_problem(problem)?;
    let ctx = Context::new(problem, noise, params);
    let n = problem.views();
    let m = params.fast_pose_samples.max(1);
    let cells: Vec<Cell> = match ctx.nominal[0] {
        Some(circle) => (0..m)
            .map(|k| Cell {
                circle,
                phi_a: problem.bearings[0][0],
                t: (k as f64 + rng.random::<f64>()) / m as f64,
                lo: k as f64 / m as f64,
                width: 1.0 / m as f64,
                family: 0,
                split: false,
            })
            .collect(),
        None => Vec::new(),
    };
    if n == 1 {
        return Ok(single_view(partition, problem, &cells, params, SolverVariant::Fast, rng));
    }
    let mut counts = vec![cells.len()];
    let mut hyps: Vec<TrajectoryHypothesis> = cells
        .iter()
        .enumerate()
        .filter_map(|(id, c)| c.pose().map(|p| seed_hypothesis(id, c, p)))
        .collect();
    for view in 1..n {
        hyps = ctx.extend(&hyps, view, &[], true);
        let cap = params.max_hypotheses.min(*counts.last().expect("non-empty"));
        prune(&mut hyps, params.prune_ratio, cap);
        counts.push(hyps.len());
    }
    Ok(posterior_from(partition, problem, &hyps, counts, SolverVariant::Fast))
}

/// Baseline without a motion model: views are independent; landmark
/// candidates along every view's line of sight are scored by the product over
/// views of the bearing likelihood averaged over that view's pose samples.
fn baseline_impl<R: Rng + ?Sized>(
    problem: &TripletProblem,
    noise: &NoiseConfig,
    partition: &SpacePartition,
    params: &SolverParams,
    rng: &mut R,
) -> Result<TripletPosterior> {
    if problem.views() == 0 {
        return Err(Error::InvalidArgument("at least one view is required".into()));
    }
    let n = problem.views();
    let m = params.baseline_pose_samples.max(1);
    // Kernel width of the per-view sample sums: one sample spacing.
    let h = std::f64::consts::TAU / m as f64;
    let sigma_v = noise.sigma_v.hypot(h).max(params.sigma_floor);
    let view_samples: Vec<Vec<Pose2>> = problem
        .bearings
        .iter()
        .map(|b| {
            (0..m)
                .filter_map(|k| vicinity_cell(*b, noise.sigma_v, k as f64 / m as f64, 1.0 / m as f64, rng).and_then(|c| c.pose()))
                .collect()
        })
        .collect();
    let borders = partition.borders.polygon();
    let mut candidates: Vec<Point2> = Vec::new();
    for (view, poses) in view_samples.iter().enumerate() {
        if poses.is_empty() {
            continue;
        }
        let phi_c = problem.bearings[view][2];
        for _ in 0..params.baseline_candidates {
            let pose = poses[rng.random_range(0..poses.len())];
            let dir = Point2::from_angle(pose.alpha + phi_c);
            if let Some((s0, s1)) = ray_span(&borders, pose.position(), dir) {
                let s = s0 + rng.random::<f64>() * (s1 - s0);
                candidates.push(pose.position() + dir * s);
            }
        }
    }
    let ln_m: Vec<f64> = view_samples.iter().map(|s| (s.len().max(1) as f64).ln()).collect();
    let scored: Vec<(f64, Point2)> = candidates
        .iter()
        .map(|c| {
            let mut total = 0.0;
            for (view, poses) in view_samples.iter().enumerate() {
                let phi_c = problem.bearings[view][2];
                let terms: Vec<f64> = poses
                    .iter()
                    .filter(|p| p.position() != *c)
                    .map(|p| gaussian_loglik(phi_c - p.bearing_to(*c), sigma_v))
                    .collect();
                total += log_sum_exp(&terms) - ln_m[view];
            }
            (total, *c)
        })
        .collect();
    // Camera states: each pose sample weighted by its agreement with the scored candidates.
    let cmax = scored.iter().map(|s| s.0).fold(f64::NEG_INFINITY, f64::max);
    let mut weighted: Vec<(f64, Point2, Vec<Point2>)> = scored.iter().map(|(w, c)| (*w, *c, Vec::new())).collect();
    let (landmark_state, _, degraded) = aggregate(partition, 0, &weighted);
    let d = partition.d();
    let mut camera_states = Vec::with_capacity(n);
    for (view, poses) in view_samples.iter().enumerate() {
        let phi_c = problem.bearings[view][2];
        let mut v = vec![0.0; d];
        if cmax.is_finite() {
            for p in poses {
                let w: f64 = scored
                    .iter()
                    .filter(|(_, c)| *c != p.position())
                    .map(|(lw, c)| ((lw - cmax) + gaussian_loglik(phi_c - p.bearing_to(*c), sigma_v)).exp())
                    .sum();
                v[partition.classify(p.position()) - 1] += w;
            }
        }
        camera_states.push(StateVector::new(v).normalized());
    }
    weighted.clear();
    Ok(TripletPosterior {
        landmark_state,
        camera_states,
        hypothesis_count: scored.len(),
        hypothesis_counts: view_samples.iter().map(|s| s.len()).collect(),
        solver_variant: SolverVariant::Baseline,
        degraded,
    })
}

fn log_sum_exp(terms: &[f64]) -> f64 {
    let max = terms.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    if !max.is_finite() {
        return f64::NEG_INFINITY;
    }
    max + terms.iter().map(|t| (t - max).exp()).sum::<f64>().ln()
}

/// Parameter range `[s0, s1]` (with `s0 >= 0`) of the ray `origin + s*dir` inside a convex polygon.
fn ray_span(poly: &crate::partition::ConvexPolygon, origin: Point2, dir: Point2) -> Option<(f64, f64)> {
    let (mut lo, mut hi) = (0.0f64, f64::INFINITY);
    let n = poly.vertices.len();
    for i in 0..n {
        let a = poly.vertices[i];
        let e = poly.vertices[(i + 1) % n] - a;
        // Inside: e x (p - a) >= 0.
        let f0 = e.cross(origin - a);
        let fd = e.cross(dir);
        if fd.abs() < 1e-15 {
            if f0 < 0.0 {
                return None;
            }
            continue;
        }
        let s = -f0 / fd;
        if fd > 0.0 {
            lo = lo.max(s);
        } else {
            hi = hi.min(s);
        }
    }
    (hi > lo).then_some((lo, hi))
}

pub fn solve_full<R: Rng + ?Sized>(
    observations: &[Observation],
    actions: &[Action],
    noise: &NoiseConfig,
    partition: &SpacePartition,
    params: &SolverParams,
    rng: &mut R,
) -> Result<TripletPosterior> {
    full_impl(&TripletProblem::new(observations, actions, true)?, noise, partition, params, rng)
}

pub fn solve_fast<R: Rng + ?Sized>(
    observations: &[Observation],
    actions: &[Action],
    noise: &NoiseConfig,
    partition: &SpacePartition,
    params: &SolverParams,
    rng: &mut R,
) -> Result<TripletPosterior> {
    fast_impl(&TripletProblem::new(observations, actions, true)?, noise, partition, params, rng)
}

/// Actions are not used by the baseline.
pub fn solve_baseline<R: Rng + ?Sized>(
    observations: &[Observation],
    noise: &NoiseConfig,
    partition: &SpacePartition,
    params: &SolverParams,
    rng: &mut R,
) -> Result<TripletPosterior> {
    baseline_impl(&TripletProblem::new(observations, &[], false)?, noise, partition, params, rng)
}

/// Dispatches to the requested solver.
pub fn solve<R: Rng + ?Sized>(
    variant: SolverVariant,
    observations: &[Observation],
    actions: &[Action],
    noise: &NoiseConfig,
    partition: &SpacePartition,
    params: &SolverParams,
    rng: &mut R,
) -> Result<TripletPosterior> {
    match variant {
        SolverVariant::Full => solve_full(observations, actions, noise, partition, params, rng),
        SolverVariant::Fast => solve_fast(observations, actions, noise, partition, params, rng),
        SolverVariant::Baseline => solve_baseline(observations, noise, partition, params, rng),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::metrics::{entropy, gt_rating};
    use crate::simulation::{gen_triplet_scenario, stream_rng, triplet_view};

    fn case(k: u64, sv: f64, sw: f64, views: usize) -> (Vec<Observation>, Vec<Action>, Point2, NoiseConfig) {
        let noise = NoiseConfig::from_degrees(sv, sw).unwrap();
        let s = gen_triplet_scenario(noise, views, k, &mut stream_rng(1, k)).unwrap();
        let (obs, acts, truth) = triplet_view(&s, (1, 2, 3)).unwrap();
        (obs, acts, truth.landmark_c, noise)
    }

    fn run(variant: SolverVariant, k: u64, sv: f64, sw: f64) -> (TripletPosterior, usize) {
        let p = SpacePartition::edc();
        let (obs, acts, c, noise) = case(k, sv, sw, 3);
        let post = solve(variant, &obs, &acts, &noise, &p, &SolverParams::default(), &mut stream_rng(2, k)).unwrap();
        (post, p.classify(c))
    }

    #[test]
    fn posteriors_are_normalized() {
        for variant in SolverVariant::ALL {
            for k in 0..3 {
                let (post, _) = run(variant, k, 2.0, 5.0);
                assert!((post.landmark_state.sum() - 1.0).abs() < 1e-9);
                assert_eq!(post.camera_states.len(), 3);
                for cam in &post.camera_states {
                    assert!((cam.sum() - 1.0).abs() < 1e-9, "{variant}");
                }
            }
        }
    }

    #[test]
    fn same_seed_same_posterior() {
        for variant in SolverVariant::ALL {
            assert_eq!(run(variant, 4, 2.0, 5.0).0, run(variant, 4, 2.0, 5.0).0);
        }
    }

    #[test]
    fn hypothesis_counts_never_grow() {
        for variant in [SolverVariant::Full, SolverVariant::Fast] {
            for k in 0..5 {
                let (post, _) = run(variant, k, 2.0, 5.0);
                assert_eq!(post.hypothesis_counts.len(), 3);
                assert!(post.hypothesis_counts.windows(2).all(|w| w[1] <= w[0]), "{:?}", post.hypothesis_counts);
            }
        }
    }

    #[test]
    fn single_view_spreads_along_the_ray() {
        let p = SpacePartition::edc();
        let (obs, _, _, noise) = case(3, 0.0, 0.0, 1);
        for variant in [SolverVariant::Full, SolverVariant::Fast] {
            let post = solve(variant, &obs, &[], &noise, &p, &SolverParams::default(), &mut stream_rng(2, 3)).unwrap();
            assert!(entropy(&post.landmark_state) > 0.0);
        }
    }

    #[test]
    fn zero_noise_recovers_the_state() {
        for k in 0..10 {
            let (full, gt) = run(SolverVariant::Full, k, 0.0, 0.0);
            assert!(full.landmark_state.get(gt) >= 1.0 - 1e-6, "scenario {k}: {:?}", full.landmark_state);
            let (fast, _) = run(SolverVariant::Fast, k, 0.0, 0.0);
            assert_eq!(fast.landmark_state.argmax(), full.landmark_state.argmax(), "scenario {k}");
        }
    }

    #[test]
    fn baseline_ranks_truth_high_without_noise() {
        let ratings: Vec<usize> = (0..20)
            .map(|k| {
                let (post, gt) = run(SolverVariant::Baseline, k, 0.0, 0.0);
                gt_rating(&post.landmark_state, gt)
            })
            .collect();
        let top3 = ratings.iter().filter(|r| **r <= 3).count();
        assert!(top3 >= 16, "{ratings:?}");
    }

    #[test]
    fn missing_headings_are_rejected() {
        let p = SpacePartition::edc();
        let (obs, acts, _, noise) = case(0, 1.0, 1.0, 3);
        let r = solve_full(&obs, &acts[..1], &noise, &p, &SolverParams::default(), &mut stream_rng(0, 0));
        assert!(r.is_err());
        assert!(solve_baseline(&obs, &noise, &p, &SolverParams::default(), &mut stream_rng(0, 0)).is_ok());
    }

    #[test]
    fn ray_span_of_unit_square() {
        let sq = crate::partition::ConvexPolygon::new(vec![
            Point2::new(0.0, 0.0),
            Point2::new(1.0, 0.0),
            Point2::new(1.0, 1.0),
            Point2::new(0.0, 1.0),
        ]);
        let (a, b) = ray_span(&sq, Point2::new(-1.0, 0.5), Point2::new(1.0, 0.0)).unwrap();
        assert!((a - 1.0).abs() < 1e-12 && (b - 2.0).abs() < 1e-12);
        assert!(ray_span(&sq, Point2::new(-1.0, 0.5), Point2::new(-1.0, 0.0)).is_none());
    }
}
