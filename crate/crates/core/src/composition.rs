//! Probabilistic composition of three triplets sharing landmarks pairwise.
//!
//! For triplets `AB:C`, `BC:D` and `AB:D` the tensor entry `T(i, j, k)` is the
//! (normalized) expected area of `AB:D` region `k` that is also inside `BC:D`
//! region `j`, with `C` drawn uniformly from `AB:C` region `i`. Areas are
//! measured in the `AB` frame within the integration borders of both frames.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geometry::{PairFrame, Point2, LANDMARK_B};
use crate::partition::{ConvexPolygon, SpacePartition, StateVector};

/// Intersections smaller than this fraction of the border area count as touching.
const AREA_EPS: f64 = 1e-13;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum CompositionMode {
    Probabilistic,
    Deterministic,
}

impl CompositionMode {
    pub fn code(self) -> u8 {
        match self {
            CompositionMode::Probabilistic => 0,
            CompositionMode::Deterministic => 1,
        }
    }

    pub fn from_code(code: u8) -> Option<Self> {
        match code {
            0 => Some(CompositionMode::Probabilistic),
            1 => Some(CompositionMode::Deterministic),
            _ => None,
        }
    }
}

impl std::str::FromStr for CompositionMode {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "prob" | "probabilistic" => Ok(CompositionMode::Probabilistic),
            "det" | "deterministic" => Ok(CompositionMode::Deterministic),
            other => Err(Error::InvalidArgument(format!("unknown composition mode '{other}'"))),
        }
    }
}

/// Which slot of a composition factor a marginal is computed for.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Slot {
    First,
    Second,
    Third,
}

impl Slot {
    pub const ALL: [Slot; 3] = [Slot::First, Slot::Second, Slot::Third];

    pub fn index(self) -> usize {
        match self {
            Slot::First => 0,
            Slot::Second => 1,
            Slot::Third => 2,
        }
    }
}

/// `d x d x d` composition tensor with 0-based dense storage.
#[derive(Debug, Clone, PartialEq)]
pub struct CompositionTensor {
    pub d: usize,
    pub partition_name: String,
    pub mode: CompositionMode,
    pub samples_per_region: u64,
    pub seed: u64,
    values: Vec<f64>,
}

/// Result of contracting the tensor onto one slot.
#[derive(Debug, Clone, PartialEq)]
pub struct Marginal {
    pub state: StateVector,
    /// `false` when the contraction carried no mass and the state is uniform.
    pub informative: bool,
}

impl CompositionTensor {
    pub fn from_dense(
        d: usize,
        partition_name: &str,
        mode: CompositionMode,
        samples_per_region: u64,
        seed: u64,
        values: Vec<f64>,
    ) -> Result<Self> {
        if values.len() != d * d * d {
            return Err(Error::InvalidArgument(format!(
                "dense tensor needs {} values, got {}",
                d * d * d,
                values.len()
            )));
        }
        if values.iter().any(|v| !v.is_finite() || *v < 0.0) {
            return Err(Error::InvalidArgument("tensor entries must be finite and nonnegative".into()));
        }
        Ok(Self {
            d,
            partition_name: partition_name.to_string(),
            mode,
            samples_per_region,
            seed,
            values,
        })
    }

    fn offset(&self, i: usize, j: usize, k: usize) -> usize {
        (i * self.d + j) * self.d + k
    }

    /// Entry at 1-based indices.
    pub fn get(&self, i: usize, j: usize, k: usize) -> Result<f64> {
        let d = self.d;
        if [i, j, k].iter().any(|&x| x == 0 || x > d) {
            return Err(Error::InvalidArgument(format!("index ({i}, {j}, {k}) outside 1..={d}")));
        }
        Ok(self.values[self.offset(i - 1, j - 1, k - 1)])
    }

    pub fn dense(&self) -> &[f64] {
        &self.values
    }

    /// Nonzero entries as 1-based `(i, j, k, value)` in row-major order.
    pub fn nonzeros(&self) -> impl Iterator<Item = (usize, usize, usize, f64)> + '_ {
        let d = self.d;
        self.values
            .iter()
            .enumerate()
            .filter(|(_, v)| **v > 0.0)
            .map(move |(n, v)| (n / (d * d) + 1, (n / d) % d + 1, n % d + 1, *v))
    }

    pub fn nonzero_count(&self) -> usize {
        self.values.iter().filter(|v| **v > 0.0).count()
    }

    pub fn total(&self) -> f64 {
        self.values.iter().sum()
    }

    /// Unnormalized joint weight `v1(i) v2(j) v3(k) T(i, j, k)` at 1-based indices.
    pub fn joint_probability(
        &self,
        v1: &StateVector,
        v2: &StateVector,
        v3: &StateVector,
        (i, j, k): (usize, usize, usize),
    ) -> Result<f64> {
        self.check_len(&[v1, v2, v3])?;
        let t = self.get(i, j, k)?;
        Ok(v1.get(i) * v2.get(j) * v3.get(k) * t)
    }

    fn check_len(&self, vs: &[&StateVector]) -> Result<()> {
        for v in vs {
            if v.len() != self.d {
                return Err(Error::InvalidArgument(format!(
                    "state vector of length {} against a tensor of dimension {}",
                    v.len(),
                    self.d
                )));
            }
        }
        Ok(())
    }

    /// Marginal of the first slot given beliefs on the second and third.
    pub fn marginal(&self, v2: &StateVector, v3: &StateVector) -> Result<Marginal> {
        self.marginal_for(Slot::First, v2, v3)
    }

    /// Marginal of `slot` given beliefs on the other two slots, passed in
    /// slot order (e.g. for `Slot::Second` they belong to slots 1 and 3).
    pub fn marginal_for(&self, slot: Slot, a: &StateVector, b: &StateVector) -> Result<Marginal> {
        self.check_len(&[a, b])?;
        let d = self.d;
        let mut out = vec![0.0; d];
        for i in 0..d {
            for j in 0..d {
                let row = &self.values[(i * d + j) * d..(i * d + j + 1) * d];
                match slot {
                    Slot::First => {
                        let wj = a.values[j];
                        if wj == 0.0 {
                            continue;
                        }
                        let s: f64 = row.iter().zip(&b.values).map(|(t, w)| t * w).sum();
                        out[i] += wj * s;
                    }
                    Slot::Second => {
                        let wi = a.values[i];
                        if wi == 0.0 {
                            continue;
                        }
                        let s: f64 = row.iter().zip(&b.values).map(|(t, w)| t * w).sum();
                        out[j] += wi * s;
                    }
                    Slot::Third => {
                        let w = a.values[i] * b.values[j];
                        if w == 0.0 {
                            continue;
                        }
                        for (o, t) in out.iter_mut().zip(row) {
                            *o += w * t;
                        }
                    }
                }
            }
        }
        let mut state = StateVector::new(out);
        let informative = state.normalize();
        Ok(Marginal { state, informative })
    }
}

/// Builds the composition tensor by sampling `C` uniformly in every first-slot
/// region and accumulating exact polygon intersection areas.
pub fn build_tensor(
    partition: &SpacePartition,
    samples_per_region: u64,
    mode: CompositionMode,
    seed: u64,
) -> Result<CompositionTensor> {
    if samples_per_region == 0 {
        return Err(Error::InvalidArgument("samples_per_region must be at least 1".into()));
    }
    let d = partition.d();
    let cover = RegionCover::new(partition);
    let area_eps = AREA_EPS * partition.borders.area();
    let slices: Vec<Vec<f64>> = (0..d)
        .into_par_iter()
        .map(|i| -> Result<Vec<f64>> {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            rng.set_stream(i as u64);
            let mut acc = vec![0.0; d * d];
            let mut drawn = 0u64;
            while drawn < samples_per_region {
                let c = partition.sample_region(i + 1, 1, &mut rng)?[0];
                if c.distance(LANDMARK_B) < 1e-6 {
                    continue;
                }
                drawn += 1;
                cover.accumulate(c, area_eps, &mut acc);
            }
            Ok(acc)
        })
        .collect::<Result<_>>()?;
    let mut values: Vec<f64> = slices.into_iter().flatten().collect();
    if mode == CompositionMode::Deterministic {
        for v in &mut values {
            *v = if *v > 0.0 { 1.0 } else { 0.0 };
        }
    }
    let total: f64 = values.iter().sum();
    if total <= 0.0 {
        return Err(Error::Config("composition produced no overlapping area".into()));
    }
    for v in &mut values {
        *v /= total;
    }
    CompositionTensor::from_dense(d, &partition.name, mode, samples_per_region, seed, values)
}

/// Fused region polygons with bounding boxes, for fast overlap queries.
struct RegionCover {
    polys: Vec<(usize, ConvexPolygon, Point2, Point2)>,
}

impl RegionCover {
    fn new(partition: &SpacePartition) -> Self {
        let mut polys = Vec::new();
        for (r, list) in partition.fused_polygons().into_iter().enumerate() {
            for poly in list {
                let (lo, hi) = poly.bounding_box().expect("non-empty polygon");
                polys.push((r, poly, lo, hi));
            }
        }
        Self { polys }
    }

    /// Adds the `AB`-frame overlap areas of every `BC:D` region `j` (placed
    /// by the frame `B -> (0,0)`, `C -> (0,1)`) with every `AB:D` region `k`.
    fn accumulate(&self, c: Point2, area_eps: f64, acc: &mut [f64]) {
        let d = (acc.len() as f64).sqrt().round() as usize;
        let frame = PairFrame::new(LANDMARK_B, c).expect("C is away from B");
        for (j, poly, _, _) in &self.polys {
            let mapped = poly.map(|p| frame.to_world(p));
            let (lo, hi) = mapped.bounding_box().expect("non-empty polygon");
            for (k, target, tlo, thi) in &self.polys {
                if hi.x <= tlo.x || lo.x >= thi.x || hi.y <= tlo.y || lo.y >= thi.y {
                    continue;
                }
                let a = mapped.intersection_area(target);
                if a > area_eps {
                    acc[j * d + k] += a;
                }
            }
        }
    }
}

/// Dense-grid feasibility check of one combination: is there a placement of
/// `C` in region `i` and a point `D` in both region `k` (AB frame) and region
/// `j` (BC frame), all inside the borders? Grid resolution `nx x ny` per frame.
pub fn grid_feasible(partition: &SpacePartition, (i, j, k): (usize, usize, usize), nx: usize, ny: usize) -> bool {
    let b = partition.borders;
    let cell = |n: usize, m: usize| {
        Point2::new(
            b.xmin + (n as f64 + 0.5) * (b.xmax - b.xmin) / nx as f64,
            b.ymin + (m as f64 + 0.5) * (b.ymax - b.ymin) / ny as f64,
        )
    };
    let cs: Vec<Point2> = (0..nx)
        .flat_map(|n| (0..ny).map(move |m| (n, m)))
        .map(|(n, m)| cell(n, m))
        .filter(|p| partition.classify(*p) == i && p.distance(LANDMARK_B) > 1e-6)
        .collect();
    let ds: Vec<Point2> = (0..nx)
        .flat_map(|n| (0..ny).map(move |m| (n, m)))
        .map(|(n, m)| cell(n, m))
        .filter(|p| partition.classify(*p) == k)
        .collect();
    cs.iter().any(|c| {
        let frame = PairFrame::new(LANDMARK_B, *c).expect("C is away from B");
        ds.iter().any(|p| {
            let q = frame.to_local(*p);
            b.contains(q) && partition.classify(q) == j
        })
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;
    use rand::Rng;

    fn random_state(d: usize, rng: &mut ChaCha8Rng) -> StateVector {
        StateVector::new((0..d).map(|_| rng.random::<f64>()).collect()).normalized()
    }

    fn small_tensor() -> CompositionTensor {
        build_tensor(&SpacePartition::double_cross(), 200, CompositionMode::Probabilistic, 1).unwrap()
    }

    #[test]
    fn entries_sum_to_one() {
        let t = small_tensor();
        assert_abs_diff_eq!(t.total(), 1.0, epsilon = 1e-9);
        let det = build_tensor(&SpacePartition::double_cross(), 50, CompositionMode::Deterministic, 1).unwrap();
        assert_abs_diff_eq!(det.total(), 1.0, epsilon = 1e-9);
        let c = det.nonzeros().next().unwrap().3;
        assert!(det.nonzeros().all(|(_, _, _, v)| (v - c).abs() < 1e-15));
    }

    #[test]
    fn build_is_reproducible() {
        assert_eq!(small_tensor(), small_tensor());
    }

    #[test]
    fn zero_samples_rejected() {
        assert!(build_tensor(&SpacePartition::double_cross(), 0, CompositionMode::Probabilistic, 1).is_err());
    }

    #[test]
    fn marginal_matches_triple_loop() {
        let t = small_tensor();
        let d = t.d;
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        for _ in 0..20 {
            let (v1, v2, v3) = (random_state(d, &mut rng), random_state(d, &mut rng), random_state(d, &mut rng));
            for slot in Slot::ALL {
                let mut naive = vec![0.0; d];
                for i in 1..=d {
                    for j in 1..=d {
                        for k in 1..=d {
                            let w = t.get(i, j, k).unwrap();
                            match slot {
                                Slot::First => naive[i - 1] += w * v2.get(j) * v3.get(k),
                                Slot::Second => naive[j - 1] += w * v1.get(i) * v3.get(k),
                                Slot::Third => naive[k - 1] += w * v1.get(i) * v2.get(j),
                            }
                        }
                    }
                }
                let naive = StateVector::new(naive).normalized();
                let (a, b) = match slot {
                    Slot::First => (&v2, &v3),
                    Slot::Second => (&v1, &v3),
                    Slot::Third => (&v1, &v2),
                };
                let m = t.marginal_for(slot, a, b).unwrap();
                for (x, y) in m.state.values.iter().zip(&naive.values) {
                    assert!((x - y).abs() < 1e-12);
                }
            }
        }
    }

    #[test]
    fn delta_marginal_is_normalized_slice() {
        let t = small_tensor();
        let d = t.d;
        let (j, k) = t.nonzeros().map(|(_, j, k, _)| (j, k)).next().unwrap();
        let m = t.marginal(&StateVector::delta(d, j), &StateVector::delta(d, k)).unwrap();
        let slice: Vec<f64> = (1..=d).map(|i| t.get(i, j, k).unwrap()).collect();
        let s: f64 = slice.iter().sum();
        for (x, y) in m.state.values.iter().zip(&slice) {
            assert_abs_diff_eq!(*x, y / s, epsilon = 1e-12);
        }
    }

    #[test]
    fn empty_contraction_flags_no_information() {
        let d = 2;
        let mut values = vec![0.0; 8];
        values[0] = 1.0;
        let t = CompositionTensor::from_dense(d, "toy", CompositionMode::Probabilistic, 1, 0, values).unwrap();
        let m = t.marginal(&StateVector::delta(2, 2), &StateVector::delta(2, 2)).unwrap();
        assert!(!m.informative);
        assert_eq!(m.state, StateVector::uniform(2));
    }

    #[test]
    fn joint_probability_reductions() {
        let t = small_tensor();
        let d = t.d;
        let u = StateVector::uniform(d);
        let mut total = 0.0;
        for i in 1..=d {
            for j in 1..=d {
                for k in 1..=d {
                    total += t.joint_probability(&u, &u, &u, (i, j, k)).unwrap();
                }
            }
        }
        assert_abs_diff_eq!(total, 1.0 / (d * d * d) as f64, epsilon = 1e-12);
        let (i, j, k, v) = t.nonzeros().next().unwrap();
        let p = t
            .joint_probability(&StateVector::delta(d, i), &StateVector::delta(d, j), &StateVector::delta(d, k), (i, j, k))
            .unwrap();
        assert_abs_diff_eq!(p, v);
        assert!(t.joint_probability(&u, &u, &u, (0, 1, 1)).is_err());
    }

    #[test]
    fn marginal_independent_of_contraction_order() {
        let t = small_tensor();
        let d = t.d;
        let mut rng = ChaCha8Rng::seed_from_u64(10);
        let (v2, v3) = (random_state(d, &mut rng), random_state(d, &mut rng));
        let a = t.marginal(&v2, &v3).unwrap().state;
        // Contract the third slot first.
        let mut b = vec![0.0; d];
        for i in 1..=d {
            for j in 1..=d {
                let inner: f64 = (1..=d).map(|k| t.get(i, j, k).unwrap() * v3.get(k)).sum();
                b[i - 1] += inner * v2.get(j);
            }
        }
        let b = StateVector::new(b).normalized();
        for (x, y) in a.values.iter().zip(&b.values) {
            assert!((x - y).abs() < 1e-12);
        }
    }
}
