//! Construction of partition definition files from line/circle descriptions.
//!
//! A region is described by a side of the `AB` line, a horizontal band and a
//! set of inside/outside constraints on circles centred on the `AB` line.
//! Circles are replaced by polylines and every region is cut into horizontal
//! slabs, each of which is convex and possibly unbounded.

use std::f64::consts::PI;

use crate::geometry::Point2;

use super::{Borders, PartitionFile, PieceFile};

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Side {
    /// `x > 0`, right of the directed line from `A` to `B`.
    Right,
    Left,
}

/// Circle centred on the `x = 0` axis, replaced by a polyline with
/// `segments` edges per half circle.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CircleSpec {
    pub center_y: f64,
    pub radius: f64,
    pub segments: usize,
}

impl CircleSpec {
    /// Vertices of the right half, bottom to top.
    fn right_half(&self) -> Vec<Point2> {
        (0..=self.segments)
            .map(|k| {
                let theta = -PI / 2.0 + PI * k as f64 / self.segments as f64;
                let mut p = Point2::new(self.radius * theta.cos(), self.center_y + self.radius * theta.sin());
                if k == 0 || k == self.segments {
                    p.x = 0.0;
                }
                p
            })
            .collect()
    }

    fn y_range(&self) -> (f64, f64) {
        (self.center_y - self.radius, self.center_y + self.radius)
    }

    /// Polyline `x` at height `y`, or `None` outside the circle's span.
    fn x_at(&self, y: f64) -> Option<f64> {
        let (lo, hi) = self.y_range();
        if y < lo || y > hi {
            return None;
        }
        let pts = self.right_half();
        for w in pts.windows(2) {
            let (a, b) = (w[0], w[1]);
            if y >= a.y && y <= b.y {
                if b.y == a.y {
                    return Some(a.x.max(b.x));
                }
                let t = (y - a.y) / (b.y - a.y);
                return Some(a.x + t * (b.x - a.x));
            }
        }
        None
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct RegionSpec {
    pub side: Side,
    pub y_lo: Option<f64>,
    pub y_hi: Option<f64>,
    /// Indices into the circle list the region must lie inside.
    pub inside: Vec<usize>,
    /// Indices into the circle list the region must lie outside.
    pub outside: Vec<usize>,
}

/// Straight boundary `x = x0 + slope * (y - y0)`.
#[derive(Debug, Clone, Copy)]
struct Edge {
    y0: f64,
    x0: f64,
    slope: f64,
}

impl Edge {
    fn vertical(x: f64) -> Self {
        Edge { y0: 0.0, x0: x, slope: 0.0 }
    }

    fn through(y_lo: f64, x_lo: f64, y_hi: f64, x_hi: f64) -> Self {
        Edge {
            y0: y_lo,
            x0: x_lo,
            slope: (x_hi - x_lo) / (y_hi - y_lo),
        }
    }

    fn x_at(&self, y: f64) -> f64 {
        self.x0 + self.slope * (y - self.y0)
    }
}

/// A directed boundary line, interior on the left.
#[derive(Debug, Clone, Copy)]
struct Boundary {
    point: Point2,
    dir: Point2,
}

fn meet(a: &Boundary, b: &Boundary) -> Point2 {
    let denom = a.dir.cross(b.dir);
    let t = (b.point - a.point).cross(b.dir) / denom;
    a.point + a.dir * t
}

/// Converts one convex slab `{y_lo < y < y_hi, left(y) < x < right(y)}` into
/// vertex/ray form. `None` bounds are infinite.
fn slab_piece(y_lo: Option<f64>, y_hi: Option<f64>, left: Option<Edge>, right: Option<Edge>) -> (Vec<Point2>, Vec<Point2>) {
    let edge_boundary = |e: &Edge, upward: bool| {
        let p = Point2::new(e.x0, e.y0);
        let d = Point2::new(e.slope, 1.0);
        Boundary { point: p, dir: if upward { d } else { -d } }
    };
    // Counter-clockwise order: bottom, right, top, left.
    let cycle: [Option<Boundary>; 4] = [
        y_lo.map(|y| Boundary { point: Point2::new(0.0, y), dir: Point2::new(1.0, 0.0) }),
        right.map(|e| edge_boundary(&e, true)),
        y_hi.map(|y| Boundary { point: Point2::new(0.0, y), dir: Point2::new(-1.0, 0.0) }),
        left.map(|e| edge_boundary(&e, false)),
    ];
    let present: Vec<usize> = (0..4).filter(|&i| cycle[i].is_some()).collect();
    assert!(!present.is_empty(), "slab without any boundary");
    if present.len() == 4 {
        let mut verts = Vec::with_capacity(4);
        for i in 0..4 {
            let p = meet(cycle[i].as_ref().unwrap(), cycle[(i + 1) % 4].as_ref().unwrap());
            if verts.last().is_none_or(|q: &Point2| q.distance(p) > 1e-14) {
                verts.push(p);
            }
        }
        if verts.len() > 1 && verts[0].distance(*verts.last().unwrap()) <= 1e-14 {
            verts.pop();
        }
        return (verts, Vec::new());
    }
    // Start the chain right after the (single) run of missing boundaries.
    let start = (0..4)
        .find(|&i| cycle[i].is_some() && cycle[(i + 3) % 4].is_none())
        .expect("at least one boundary is missing");
    let chain: Vec<Boundary> = (0..4)
        .map(|k| cycle[(start + k) % 4])
        .take_while(|b| b.is_some())
        .map(|b| b.unwrap())
        .collect();
    assert_eq!(chain.len(), present.len(), "unbounded slab must have a single open side");
    let mut verts: Vec<Point2> = chain.windows(2).map(|w| meet(&w[0], &w[1])).collect();
    if verts.is_empty() {
        verts.push(chain[0].point);
    }
    let rays = vec![-chain[0].dir, chain[chain.len() - 1].dir];
    (verts, rays)
}

fn mirror(verts: &[Point2], rays: &[Point2]) -> (Vec<Point2>, Vec<Point2>) {
    let flip = |p: &Point2| Point2::new(-p.x, p.y);
    let v = verts.iter().rev().map(flip).collect();
    let r = if rays.is_empty() {
        Vec::new()
    } else {
        vec![flip(&rays[1]), flip(&rays[0])]
    };
    (v, r)
}

fn linear_crossing(a: &Edge, b: &Edge, y_lo: f64, y_hi: f64) -> Option<f64> {
    let (fa, fb) = (a.x_at(y_lo) - b.x_at(y_lo), a.x_at(y_hi) - b.x_at(y_hi));
    if fa * fb < 0.0 {
        Some(y_lo + (y_hi - y_lo) * fa / (fa - fb))
    } else {
        None
    }
}

/// Slab decomposition of one region into `(vertices, rays)` pieces.
pub fn region_pieces(spec: &RegionSpec, circles: &[CircleSpec]) -> Vec<(Vec<Point2>, Vec<Point2>)> {
    for c in spec.inside.iter().chain(&spec.outside) {
        assert!(*c < circles.len(), "unknown circle {c}");
    }
    let involved: Vec<&CircleSpec> = spec.inside.iter().chain(&spec.outside).map(|&i| &circles[i]).collect();
    let mut breaks: Vec<f64> = Vec::new();
    for c in &involved {
        breaks.extend(c.right_half().iter().map(|p| p.y));
    }
    breaks.extend(spec.y_lo);
    breaks.extend(spec.y_hi);
    breaks.retain(|y| spec.y_lo.is_none_or(|lo| *y >= lo) && spec.y_hi.is_none_or(|hi| *y <= hi));
    breaks.sort_by(f64::total_cmp);
    breaks.dedup_by(|a, b| (*a - *b).abs() < 1e-12);

    // Bounded slabs between consecutive break points, unbounded ones at the ends.
    let mut slabs: Vec<(Option<f64>, Option<f64>)> = Vec::new();
    if spec.y_lo.is_none() {
        slabs.push((None, breaks.first().copied()));
    }
    for w in breaks.windows(2) {
        slabs.push((Some(w[0]), Some(w[1])));
    }
    if spec.y_hi.is_none() {
        slabs.push((breaks.last().copied(), None));
    }
    if breaks.is_empty() {
        slabs = vec![(spec.y_lo, spec.y_hi)];
    }

    let mut pieces = Vec::new();
    for (lo, hi) in slabs {
        let (Some(ylo), Some(yhi)) = (lo, hi) else {
            // Unbounded slabs lie outside every circle span.
            if !spec.inside.is_empty() {
                continue;
            }
            let (v, r) = slab_piece(lo, hi, Some(Edge::vertical(0.0)), None);
            pieces.push((v, r));
            continue;
        };
        let edge_of = |c: &CircleSpec| -> Option<Edge> {
            let (clo, chi) = c.y_range();
            if ylo < clo - 1e-12 || yhi > chi + 1e-12 {
                return None;
            }
            Some(Edge::through(ylo, c.x_at(ylo)?, yhi, c.x_at(yhi)?))
        };
        let mut inner: Vec<Edge> = vec![Edge::vertical(0.0)];
        inner.extend(spec.outside.iter().filter_map(|&i| edge_of(&circles[i])));
        let mut outer: Vec<Edge> = Vec::new();
        let mut feasible = true;
        for &i in &spec.inside {
            match edge_of(&circles[i]) {
                Some(e) => outer.push(e),
                None => feasible = false,
            }
        }
        if !feasible {
            continue;
        }
        // Split the slab wherever two candidate boundaries cross.
        let mut cuts = vec![ylo, yhi];
        for set in [&inner, &outer] {
            for a in 0..set.len() {
                for b in (a + 1)..set.len() {
                    cuts.extend(linear_crossing(&set[a], &set[b], ylo, yhi));
                }
            }
        }
        cuts.sort_by(f64::total_cmp);
        cuts.dedup_by(|a, b| (*a - *b).abs() < 1e-12);
        for w in cuts.windows(2) {
            let (a, b) = (w[0], w[1]);
            let mid = 0.5 * (a + b);
            let pick = |set: &[Edge], max: bool| -> Option<Edge> {
                set.iter()
                    .copied()
                    .max_by(|p, q| {
                        let o = p.x_at(mid).total_cmp(&q.x_at(mid));
                        if max { o } else { o.reverse() }
                    })
                    .map(|e| Edge::through(a, e.x_at(a), b, e.x_at(b)))
            };
            let left = pick(&inner, true).unwrap();
            let right = pick(&outer, false);
            if let Some(r) = right {
                let width_lo = r.x_at(a) - left.x_at(a);
                let width_hi = r.x_at(b) - left.x_at(b);
                if width_lo <= 1e-12 && width_hi <= 1e-12 {
                    continue;
                }
            }
            pieces.push(slab_piece(Some(a), Some(b), Some(left), right));
        }
    }
    if spec.side == Side::Left {
        pieces = pieces.iter().map(|(v, r)| mirror(v, r)).collect();
    }
    pieces
}

/// Assembles a partition file; region `k` of `regions` gets index `k + 1`.
pub fn partition_file(name: &str, borders: Borders, circles: &[CircleSpec], regions: &[RegionSpec]) -> PartitionFile {
    let round = |p: &Point2| [p.x, p.y];
    let mut out = Vec::new();
    for (k, spec) in regions.iter().enumerate() {
        for (verts, rays) in region_pieces(spec, circles) {
            out.push(PieceFile {
                index: k + 1,
                vertices: verts.iter().map(round).collect(),
                rays: rays.iter().map(round).collect(),
            });
        }
    }
    PartitionFile {
        name: name.to_string(),
        borders,
        regions: out,
    }
}

fn band(side: Side, y_lo: Option<f64>, y_hi: Option<f64>, inside: &[usize], outside: &[usize]) -> RegionSpec {
    RegionSpec {
        side,
        y_lo,
        y_hi,
        inside: inside.to_vec(),
        outside: outside.to_vec(),
    }
}

/// Freksa's double cross with the line and point relations absorbed into the
/// six two-dimensional regions.
pub fn double_cross() -> PartitionFile {
    let mut regions = Vec::new();
    for side in [Side::Right, Side::Left] {
        regions.push(band(side, None, Some(0.0), &[], &[]));
        regions.push(band(side, Some(0.0), Some(1.0), &[], &[]));
        regions.push(band(side, Some(1.0), None, &[], &[]));
    }
    partition_file(
        "double_cross",
        Borders { xmin: -1.0, xmax: 1.0, ymin: -1.0, ymax: 2.0 },
        &[],
        &regions,
    )
}

/// Parameters of the extended double cross: the double cross plus the
/// perpendicular bisector of `AB` and near/far circles around both landmarks.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EdcParams {
    pub radius: f64,
    pub segments: usize,
    pub borders: Borders,
}

impl Default for EdcParams {
    fn default() -> Self {
        Self {
            radius: 1.45,
            segments: 24,
            borders: Borders { xmin: -3.0, xmax: 3.0, ymin: -3.0, ymax: 4.0 },
        }
    }
}

pub fn extended_double_cross(params: &EdcParams) -> PartitionFile {
    let circles = [
        CircleSpec { center_y: 0.0, radius: params.radius, segments: params.segments },
        CircleSpec { center_y: 1.0, radius: params.radius, segments: params.segments },
    ];
    const A: usize = 0;
    const B: usize = 1;
    let mut regions = Vec::new();
    for side in [Side::Right, Side::Left] {
        regions.push(band(side, None, Some(0.0), &[A], &[]));
        regions.push(band(side, None, Some(0.0), &[], &[A]));
        regions.push(band(side, Some(0.0), Some(0.5), &[A, B], &[]));
        regions.push(band(side, Some(0.0), Some(0.5), &[A], &[B]));
        regions.push(band(side, Some(0.0), Some(0.5), &[], &[A, B]));
        regions.push(band(side, Some(0.5), Some(1.0), &[A, B], &[]));
        regions.push(band(side, Some(0.5), Some(1.0), &[B], &[A]));
        regions.push(band(side, Some(0.5), Some(1.0), &[], &[A, B]));
        regions.push(band(side, Some(1.0), None, &[B], &[]));
        regions.push(band(side, Some(1.0), None, &[], &[B]));
    }
    partition_file("edc", params.borders, &circles, &regions)
}
