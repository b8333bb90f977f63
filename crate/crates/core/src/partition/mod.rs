//! Qualitative partitions of the `AB` frame.
//!
//! A partition is a list of regions, each stored as one or more convex
//! pieces. A piece is a vertex chain, optionally opened up by two rays so it
//! can extend to infinity. All areas, centroids and samples are taken over
//! the pieces clipped to the partition's integration borders.

pub mod build;
pub mod polygon;

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geometry::Point2;
pub use polygon::{ConvexPolygon, HalfPlane};

const EDC_JSON: &str = include_str!("../../data/edc.json");
const DOUBLE_CROSS_JSON: &str = include_str!("../../data/double_cross.json");

/// Tolerance used for closed-boundary membership tests.
const MEMBERSHIP_TOL: f64 = 1e-10;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Borders {
    pub xmin: f64,
    pub xmax: f64,
    pub ymin: f64,
    pub ymax: f64,
}

impl Borders {
    pub fn area(&self) -> f64 {
        (self.xmax - self.xmin) * (self.ymax - self.ymin)
    }

    pub fn polygon(&self) -> ConvexPolygon {
        ConvexPolygon::rectangle(self.xmin, self.xmax, self.ymin, self.ymax)
    }

    pub fn contains(&self, p: Point2) -> bool {
        p.x >= self.xmin && p.x <= self.xmax && p.y >= self.ymin && p.y <= self.ymax
    }
}

/// On-disk partition definition.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PartitionFile {
    pub name: String,
    pub borders: Borders,
    /// Convex pieces; several entries may share an index.
    pub regions: Vec<PieceFile>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PieceFile {
    /// 1-based region index.
    pub index: usize,
    pub vertices: Vec<[f64; 2]>,
    /// Either empty (bounded piece) or `[incoming, outgoing]`: the boundary
    /// arrives at the first vertex from infinity along `-incoming` and leaves
    /// the last vertex towards infinity along `outgoing`.
    #[serde(default)]
    pub rays: Vec<[f64; 2]>,
}

/// Convex, possibly unbounded piece of a region.
#[derive(Debug, Clone)]
pub struct ConvexPiece {
    pub vertices: Vec<Point2>,
    pub rays: Option<(Point2, Point2)>,
    planes: Vec<HalfPlane>,
    /// Axis-aligned extent, infinite along ray directions.
    extent: [f64; 4],
    pub clipped: ConvexPolygon,
}

impl ConvexPiece {
    fn new(vertices: Vec<Point2>, rays: Option<(Point2, Point2)>, borders: &Borders) -> Result<Self> {
        if vertices.is_empty() || (rays.is_none() && vertices.len() < 3) {
            return Err(Error::Config("piece needs three vertices or one vertex with two rays".into()));
        }
        let mut planes = Vec::new();
        let n = vertices.len();
        match rays {
            None => {
                for i in 0..n {
                    let (a, b) = (vertices[i], vertices[(i + 1) % n]);
                    if a != b {
                        planes.push(HalfPlane::new(a, b - a));
                    }
                }
            }
            Some((r_in, r_out)) => {
                if r_in.norm() == 0.0 || r_out.norm() == 0.0 {
                    return Err(Error::Config("zero-length ray".into()));
                }
                planes.push(HalfPlane::new(vertices[0], -r_in));
                for i in 0..n - 1 {
                    let (a, b) = (vertices[i], vertices[i + 1]);
                    if a != b {
                        planes.push(HalfPlane::new(a, b - a));
                    }
                }
                planes.push(HalfPlane::new(vertices[n - 1], r_out));
            }
        }
        let mut extent = vertices.iter().fold(
            [f64::INFINITY, f64::NEG_INFINITY, f64::INFINITY, f64::NEG_INFINITY],
            |e, p| [e[0].min(p.x), e[1].max(p.x), e[2].min(p.y), e[3].max(p.y)],
        );
        if let Some((r_in, r_out)) = rays {
            for r in [r_in, r_out] {
                if r.x < 0.0 {
                    extent[0] = f64::NEG_INFINITY;
                }
                if r.x > 0.0 {
                    extent[1] = f64::INFINITY;
                }
                if r.y < 0.0 {
                    extent[2] = f64::NEG_INFINITY;
                }
                if r.y > 0.0 {
                    extent[3] = f64::INFINITY;
                }
            }
            // Two opposite rays bound a half-plane, open in the perpendicular direction too.
            let left = r_out.perp();
            if (-r_in).cross(r_out).abs() < 1e-12 && (-r_in).dot(r_out) > 0.0 {
                if left.x < 0.0 {
                    extent[0] = f64::NEG_INFINITY;
                }
                if left.x > 0.0 {
                    extent[1] = f64::INFINITY;
                }
                if left.y < 0.0 {
                    extent[2] = f64::NEG_INFINITY;
                }
                if left.y > 0.0 {
                    extent[3] = f64::INFINITY;
                }
            }
        }
        let clipped = borders.polygon().clip_all(&planes);
        Ok(Self {
            vertices,
            rays,
            planes,
            extent,
            clipped,
        })
    }

    pub fn planes(&self) -> &[HalfPlane] {
        &self.planes
    }

    /// Closed membership test.
    pub fn contains(&self, p: Point2, tol: f64) -> bool {
        if p.x < self.extent[0] - tol || p.x > self.extent[1] + tol || p.y < self.extent[2] - tol || p.y > self.extent[3] + tol {
            return false;
        }
        self.planes.iter().all(|h| h.signed_distance(p) >= -tol)
    }

    /// Largest violation of any bounding half-plane; zero inside.
    fn violation(&self, p: Point2) -> f64 {
        self.planes
            .iter()
            .map(|h| -h.signed_distance(p))
            .fold(0.0, f64::max)
    }
}

#[derive(Debug, Clone)]
pub struct Region {
    /// 1-based index.
    pub index: usize,
    pub pieces: Vec<ConvexPiece>,
    pub clipped_area: f64,
    pub centroid: Option<Point2>,
}

impl Region {
    /// Border-clipped convex polygons of this region.
    pub fn clipped_polygons(&self) -> impl Iterator<Item = &ConvexPolygon> {
        self.pieces.iter().map(|p| &p.clipped).filter(|p| !p.is_empty())
    }
}

/// A named partition of the `AB` frame into `d` regions.
#[derive(Debug, Clone)]
pub struct SpacePartition {
    pub name: String,
    pub borders: Borders,
    pub regions: Vec<Region>,
}

impl SpacePartition {
    /// The bundled 20-region extended double cross.
    pub fn edc() -> Self {
        Self::from_json_str("edc.json", EDC_JSON).expect("bundled partition is valid")
    }

    /// The bundled double cross.
    pub fn double_cross() -> Self {
        Self::from_json_str("double_cross.json", DOUBLE_CROSS_JSON).expect("bundled partition is valid")
    }

    /// Loads a bundled partition by name.
    pub fn bundled(name: &str) -> Result<Self> {
        match name {
            "edc" => Ok(Self::edc()),
            "double_cross" | "dc" => Ok(Self::double_cross()),
            other => Err(Error::Config(format!("unknown bundled partition '{other}'"))),
        }
    }

    /// Resolves a bundled name or a path to a partition definition file.
    pub fn load(name_or_path: &str) -> Result<Self> {
        match Self::bundled(name_or_path) {
            Ok(p) => Ok(p),
            Err(_) => {
                let text = std::fs::read_to_string(name_or_path)?;
                Self::from_json_str(name_or_path, &text)
            }
        }
    }

    pub fn from_json_str(source_name: &str, text: &str) -> Result<Self> {
        let file: PartitionFile = serde_json::from_str(text).map_err(|e| Error::from_json(source_name, e))?;
        Self::from_file(&file)
    }

    pub fn from_file(file: &PartitionFile) -> Result<Self> {
        let b = file.borders;
        if !(b.xmin < b.xmax && b.ymin < b.ymax) {
            return Err(Error::Config("borders must have positive extent".into()));
        }
        let d = file.regions.iter().map(|r| r.index).max().unwrap_or(0);
        if d == 0 || file.regions.iter().any(|r| r.index == 0) {
            return Err(Error::Config("region indices must start at 1".into()));
        }
        let mut regions: Vec<Region> = (1..=d)
            .map(|index| Region {
                index,
                pieces: Vec::new(),
                clipped_area: 0.0,
                centroid: None,
            })
            .collect();
        for piece in &file.regions {
            let vertices = piece.vertices.iter().map(|v| Point2::new(v[0], v[1])).collect();
            let rays = match piece.rays.as_slice() {
                [] => None,
                [a, b] => Some((Point2::new(a[0], a[1]), Point2::new(b[0], b[1]))),
                _ => {
                    return Err(Error::Config(format!(
                        "region {} piece must have zero or two rays",
                        piece.index
                    )))
                }
            };
            regions[piece.index - 1].pieces.push(ConvexPiece::new(vertices, rays, &b)?);
        }
        for region in &mut regions {
            if region.pieces.is_empty() {
                return Err(Error::Config(format!("region {} has no pieces", region.index)));
            }
            let (mut area, mut mx, mut my) = (0.0, 0.0, 0.0);
            for poly in region.clipped_polygons() {
                let a = poly.area();
                if let Some(c) = poly.centroid() {
                    area += a;
                    mx += a * c.x;
                    my += a * c.y;
                }
            }
            region.clipped_area = area;
            region.centroid = (area > 0.0).then(|| Point2::new(mx / area, my / area));
        }
        Ok(Self {
            name: file.name.clone(),
            borders: b,
            regions,
        })
    }

    pub fn d(&self) -> usize {
        self.regions.len()
    }

    pub fn region(&self, index: usize) -> Result<&Region> {
        if index == 0 || index > self.d() {
            return Err(Error::InvalidArgument(format!("region index {index} outside 1..={}", self.d())));
        }
        Ok(&self.regions[index - 1])
    }

    /// Region containing `p`. Boundary points go to the lowest index.
    pub fn classify(&self, p: Point2) -> usize {
        let tol = MEMBERSHIP_TOL * p.norm().max(1.0);
        for region in &self.regions {
            if region.pieces.iter().any(|piece| piece.contains(p, tol)) {
                return region.index;
            }
        }
        // Numerical gaps between pieces: fall back to the least violated piece.
        let mut best = (f64::INFINITY, 1);
        for region in &self.regions {
            for piece in &region.pieces {
                let v = piece.violation(p);
                if v < best.0 {
                    best = (v, region.index);
                }
            }
        }
        best.1
    }

    /// Area centroid of the border-clipped region.
    pub fn region_centroid(&self, index: usize) -> Result<Point2> {
        self.region(index)?
            .centroid
            .ok_or_else(|| Error::Config(format!("region {index} has no area inside the borders")))
    }

    /// Uniform samples over the border-clipped region.
    pub fn sample_region<R: Rng + ?Sized>(&self, index: usize, count: usize, rng: &mut R) -> Result<Vec<Point2>> {
        if count == 0 {
            return Err(Error::InvalidArgument("sample count must be at least 1".into()));
        }
        let region = self.region(index)?;
        if region.clipped_area <= 0.0 {
            return Err(Error::Config(format!("region {index} has no area inside the borders")));
        }
        let polys: Vec<&ConvexPolygon> = region.clipped_polygons().collect();
        let areas: Vec<f64> = polys.iter().map(|p| p.area()).collect();
        let mut out = Vec::with_capacity(count);
        let mut attempts = 0usize;
        while out.len() < count {
            attempts += 1;
            if attempts > 1000 * count + 1000 {
                return Err(Error::Config(format!("region {index} rejects every sample")));
            }
            let mut target = rng.random::<f64>() * region.clipped_area;
            let mut k = polys.len() - 1;
            for (i, a) in areas.iter().enumerate() {
                if target < *a {
                    k = i;
                    break;
                }
                target -= a;
            }
            let Some(p) = polys[k].sample_uniform(rng.random(), rng.random(), rng.random()) else {
                continue;
            };
            // Shared edges belong to the lower index.
            if self.classify(p) == index {
                out.push(p);
            }
        }
        Ok(out)
    }

    /// Border-clipped region polygons with adjacent pieces fused wherever
    /// their union stays convex. Covers exactly the same area as the pieces.
    pub fn fused_polygons(&self) -> Vec<Vec<ConvexPolygon>> {
        self.regions
            .iter()
            .map(|r| {
                let mut polys: Vec<ConvexPolygon> = r.clipped_polygons().cloned().collect();
                loop {
                    let mut merged = false;
                    'outer: for a in 0..polys.len() {
                        for b in (a + 1)..polys.len() {
                            let (pa, pb) = (&polys[a], &polys[b]);
                            let mut pts = pa.vertices.clone();
                            pts.extend_from_slice(&pb.vertices);
                            let hull = ConvexPolygon::hull(&pts);
                            let sum = pa.area() + pb.area();
                            if (hull.area() - sum).abs() <= 1e-9 * sum.max(1e-12) {
                                polys[a] = hull;
                                polys.swap_remove(b);
                                merged = true;
                                break 'outer;
                            }
                        }
                    }
                    if !merged {
                        break;
                    }
                }
                polys
            })
            .collect()
    }

    pub fn centroids(&self) -> Result<Vec<Point2>> {
        (1..=self.d()).map(|i| self.region_centroid(i)).collect()
    }

    /// Sum of all clipped region areas.
    pub fn clipped_area(&self) -> f64 {
        self.regions.iter().map(|r| r.clipped_area).sum()
    }
}

/// Discrete probability vector over the regions of a partition.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct StateVector {
    pub values: Vec<f64>,
}

impl StateVector {
    pub fn new(values: Vec<f64>) -> Self {
        Self { values }
    }

    pub fn uniform(d: usize) -> Self {
        Self::new(vec![1.0 / d as f64; d])
    }

    /// One-hot vector on the 1-based `index`.
    pub fn delta(d: usize, index: usize) -> Self {
        let mut values = vec![0.0; d];
        values[index - 1] = 1.0;
        Self::new(values)
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    /// 1-based accessor.
    pub fn get(&self, index: usize) -> f64 {
        self.values[index - 1]
    }

    pub fn sum(&self) -> f64 {
        self.values.iter().sum()
    }

    /// Rescales to unit sum. Returns `false` and leaves a uniform vector when
    /// the mass is zero or not finite.
    pub fn normalize(&mut self) -> bool {
        let s = self.sum();
        if s > 0.0 && s.is_finite() {
            for v in &mut self.values {
                *v /= s;
            }
            true
        } else {
            let d = self.values.len();
            self.values.fill(1.0 / d as f64);
            false
        }
    }

    pub fn normalized(mut self) -> Self {
        self.normalize();
        self
    }

    /// 1-based index of the most probable state, lowest index on ties.
    pub fn argmax(&self) -> usize {
        let mut best = 0;
        for (i, v) in self.values.iter().enumerate() {
            if *v > self.values[best] {
                best = i;
            }
        }
        best + 1
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn bundled() -> [SpacePartition; 2] {
        [SpacePartition::edc(), SpacePartition::double_cross()]
    }

    #[test]
    fn edc_has_twenty_regions() {
        assert_eq!(SpacePartition::edc().d(), 20);
        assert_eq!(SpacePartition::double_cross().d(), 6);
    }

    #[test]
    fn clipped_areas_cover_borders() {
        for p in bundled() {
            let rel = (p.clipped_area() - p.borders.area()).abs() / p.borders.area();
            assert!(rel < 1e-6, "{}: relative area error {rel}", p.name);
            for r in &p.regions {
                assert!(r.clipped_area > 0.0, "{} region {} empty", p.name, r.index);
                assert!(p.borders.contains(r.centroid.unwrap()));
            }
        }
    }

    #[test]
    fn classify_matches_brute_force_membership() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        for p in bundled() {
            let b = p.borders;
            for _ in 0..10_000 {
                let q = Point2::new(
                    b.xmin + rng.random::<f64>() * (b.xmax - b.xmin),
                    b.ymin + rng.random::<f64>() * (b.ymax - b.ymin),
                );
                let expected = p
                    .regions
                    .iter()
                    .find(|r| r.clipped_polygons().any(|poly| poly.contains(q, 1e-10)))
                    .map(|r| r.index)
                    .unwrap();
                assert_eq!(p.classify(q), expected);
            }
        }
    }

    #[test]
    fn coverage_has_single_owner() {
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        let p = SpacePartition::edc();
        let b = p.borders;
        let mut ambiguous = 0;
        let n = 100_000;
        for _ in 0..n {
            let q = Point2::new(
                b.xmin + rng.random::<f64>() * (b.xmax - b.xmin),
                b.ymin + rng.random::<f64>() * (b.ymax - b.ymin),
            );
            let owners = p
                .regions
                .iter()
                .filter(|r| r.pieces.iter().any(|piece| piece.contains(q, MEMBERSHIP_TOL)))
                .count();
            assert!(owners >= 1, "{q:?} classified {}", p.classify(q));
            if owners > 1 {
                ambiguous += 1;
            }
        }
        assert!((ambiguous as f64) < 1e-3 * n as f64);
    }

    #[test]
    fn far_points_classify_consistently() {
        let p = SpacePartition::edc();
        for k in 0..72 {
            let dir = Point2::from_angle(k as f64 * 5.0_f64.to_radians() + 0.01);
            let near = p.classify(Point2::new(0.0, 0.5) + dir * 1e3);
            let far = p.classify(Point2::new(0.0, 0.5) + dir * 1e6);
            assert_eq!(near, far);
        }
    }

    #[test]
    fn shared_edge_goes_to_lower_index() {
        let p = SpacePartition::double_cross();
        // Points on the line x = 0 are shared by a right and a left region.
        let i = p.classify(Point2::new(0.0, 0.5));
        let right = p.classify(Point2::new(1e-3, 0.5));
        let left = p.classify(Point2::new(-1e-3, 0.5));
        assert_eq!(i, right.min(left));
    }

    #[test]
    fn rectangle_piece_centroid() {
        let file = PartitionFile {
            name: "square".into(),
            borders: Borders { xmin: 0.0, xmax: 1.0, ymin: 0.0, ymax: 1.0 },
            regions: vec![PieceFile {
                index: 1,
                vertices: vec![[0.0, 0.0], [1.0, 0.0], [1.0, 1.0], [0.0, 1.0]],
                rays: vec![],
            }],
        };
        let p = SpacePartition::from_file(&file).unwrap();
        let c = p.region_centroid(1).unwrap();
        assert_abs_diff_eq!(c.x, 0.5, epsilon = 1e-12);
        assert_abs_diff_eq!(c.y, 0.5, epsilon = 1e-12);
    }

    #[test]
    fn centroids_match_sample_means() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let p = SpacePartition::edc();
        for i in 1..=p.d() {
            let pts = p.sample_region(i, 100_000, &mut rng).unwrap();
            let mean = pts.iter().fold(Point2::new(0.0, 0.0), |a, q| a + *q) / pts.len() as f64;
            let c = p.region_centroid(i).unwrap();
            assert!(mean.distance(c) < 1e-2, "region {i}: {mean:?} vs {c:?}");
            assert!(pts.iter().all(|q| p.classify(*q) == i));
        }
    }

    #[test]
    fn fused_polygons_keep_area() {
        let p = SpacePartition::edc();
        for (r, polys) in p.regions.iter().zip(p.fused_polygons()) {
            let a: f64 = polys.iter().map(|q| q.area()).sum();
            assert_abs_diff_eq!(a, r.clipped_area, epsilon = 1e-9);
            assert!(polys.len() <= r.clipped_polygons().count());
        }
    }

    #[test]
    fn zero_samples_rejected() {
        let mut rng = ChaCha8Rng::seed_from_u64(6);
        assert!(SpacePartition::edc().sample_region(1, 0, &mut rng).is_err());
    }

    #[test]
    fn samples_are_uniform_over_a_rectangle() {
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        let p = SpacePartition::double_cross();
        // Region between the perpendiculars on the right: x in (0,1), y in (0,1).
        let i = p.classify(Point2::new(0.5, 0.5));
        let pts = p.sample_region(i, 40_000, &mut rng).unwrap();
        let mut cells = [0.0f64; 4];
        for q in &pts {
            let k = usize::from(q.x > 0.5) + 2 * usize::from(q.y > 0.5);
            cells[k] += 1.0;
        }
        let expected = pts.len() as f64 / 4.0;
        let chi2: f64 = cells.iter().map(|c| (c - expected).powi(2) / expected).sum();
        // 3 degrees of freedom, p = 0.01.
        assert!(chi2 < 11.345, "chi2 = {chi2}");
    }

    #[test]
    fn state_vector_normalizes() {
        let mut v = StateVector::new(vec![1.0, 3.0]);
        assert!(v.normalize());
        assert_abs_diff_eq!(v.sum(), 1.0, epsilon = 1e-12);
        let mut z = StateVector::new(vec![0.0; 4]);
        assert!(!z.normalize());
        assert_eq!(z, StateVector::uniform(4));
    }
}
