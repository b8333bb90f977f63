//! Convex polygon clipping (Sutherland-Hodgman) and area moments.

use crate::geometry::Point2;

/// A convex polygon with counter-clockwise vertices. May be empty.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct ConvexPolygon {
    pub vertices: Vec<Point2>,
}

/// Closed half-plane to the left of the directed line through `point` along `dir`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct HalfPlane {
    pub point: Point2,
    pub dir: Point2,
}

impl HalfPlane {
    pub fn new(point: Point2, dir: Point2) -> Self {
        let n = dir.norm();
        Self {
            point,
            dir: dir / n,
        }
    }

    /// Signed distance, positive inside.
    pub fn signed_distance(&self, p: Point2) -> f64 {
        self.dir.cross(p - self.point)
    }
}

impl ConvexPolygon {
    pub fn new(vertices: Vec<Point2>) -> Self {
        Self { vertices }
    }

    pub fn rectangle(xmin: f64, xmax: f64, ymin: f64, ymax: f64) -> Self {
        Self::new(vec![
            Point2::new(xmin, ymin),
            Point2::new(xmax, ymin),
            Point2::new(xmax, ymax),
            Point2::new(xmin, ymax),
        ])
    }

    /// Convex hull of a point set (monotone chain), counter-clockwise.
    pub fn hull(points: &[Point2]) -> Self {
        let mut pts = points.to_vec();
        pts.sort_by(|a, b| a.x.total_cmp(&b.x).then(a.y.total_cmp(&b.y)));
        pts.dedup();
        if pts.len() < 3 {
            return Self::default();
        }
        let mut lower: Vec<Point2> = Vec::new();
        for &p in &pts {
            while lower.len() >= 2 && (lower[lower.len() - 1] - lower[lower.len() - 2]).cross(p - lower[lower.len() - 2]) <= 0.0 {
                lower.pop();
            }
            lower.push(p);
        }
        let mut upper: Vec<Point2> = Vec::new();
        for &p in pts.iter().rev() {
            while upper.len() >= 2 && (upper[upper.len() - 1] - upper[upper.len() - 2]).cross(p - upper[upper.len() - 2]) <= 0.0 {
                upper.pop();
            }
            upper.push(p);
        }
        lower.pop();
        upper.pop();
        lower.extend(upper);
        if lower.len() < 3 {
            return Self::default();
        }
        Self::new(lower)
    }

    pub fn is_empty(&self) -> bool {
        self.vertices.len() < 3
    }

    pub fn area(&self) -> f64 {
        let n = self.vertices.len();
        if n < 3 {
            return 0.0;
        }
        let mut twice = 0.0;
        for i in 0..n {
            twice += self.vertices[i].cross(self.vertices[(i + 1) % n]);
        }
        0.5 * twice
    }

    /// Area centroid; `None` for degenerate polygons.
    pub fn centroid(&self) -> Option<Point2> {
        let n = self.vertices.len();
        if n < 3 {
            return None;
        }
        // Shift to the first vertex to keep the moment sums well conditioned.
        let o = self.vertices[0];
        let (mut a2, mut cx, mut cy) = (0.0, 0.0, 0.0);
        for i in 0..n {
            let p = self.vertices[i] - o;
            let q = self.vertices[(i + 1) % n] - o;
            let c = p.cross(q);
            a2 += c;
            cx += (p.x + q.x) * c;
            cy += (p.y + q.y) * c;
        }
        if a2.abs() <= f64::MIN_POSITIVE {
            return None;
        }
        Some(o + Point2::new(cx / (3.0 * a2), cy / (3.0 * a2)))
    }

    pub fn bounding_box(&self) -> Option<(Point2, Point2)> {
        let first = *self.vertices.first()?;
        Some(self.vertices.iter().fold((first, first), |(lo, hi), p| {
            (
                Point2::new(lo.x.min(p.x), lo.y.min(p.y)),
                Point2::new(hi.x.max(p.x), hi.y.max(p.y)),
            )
        }))
    }

    pub fn clip(&self, plane: &HalfPlane) -> ConvexPolygon {
        let n = self.vertices.len();
        if n == 0 {
            return ConvexPolygon::default();
        }
        let mut out = Vec::with_capacity(n + 2);
        for i in 0..n {
            let cur = self.vertices[i];
            let next = self.vertices[(i + 1) % n];
            let dc = plane.signed_distance(cur);
            let dn = plane.signed_distance(next);
            if dc >= 0.0 {
                out.push(cur);
            }
            if (dc >= 0.0) != (dn >= 0.0) {
                let t = dc / (dc - dn);
                out.push(cur + (next - cur) * t);
            }
        }
        if out.len() < 3 {
            out.clear();
        }
        ConvexPolygon::new(out)
    }

    pub fn clip_all<'a>(&self, planes: impl IntoIterator<Item = &'a HalfPlane>) -> ConvexPolygon {
        let mut poly = self.clone();
        for plane in planes {
            if poly.is_empty() {
                break;
            }
            poly = poly.clip(plane);
        }
        poly
    }

    /// Intersection with another convex polygon.
    pub fn intersect(&self, other: &ConvexPolygon) -> ConvexPolygon {
        if self.is_empty() || other.is_empty() {
            return ConvexPolygon::default();
        }
        let n = other.vertices.len();
        let mut poly = self.clone();
        for i in 0..n {
            if poly.is_empty() {
                break;
            }
            let a = other.vertices[i];
            let b = other.vertices[(i + 1) % n];
            if a == b {
                continue;
            }
            poly = poly.clip(&HalfPlane::new(a, b - a));
        }
        poly
    }

    /// Area of the intersection with `other` without materialising the polygon twice.
    pub fn intersection_area(&self, other: &ConvexPolygon) -> f64 {
        self.intersect(other).area().max(0.0)
    }

    pub fn map(&self, f: impl Fn(Point2) -> Point2) -> ConvexPolygon {
        ConvexPolygon::new(self.vertices.iter().map(|&p| f(p)).collect())
    }

    /// Closed containment test with an absolute tolerance.
    pub fn contains(&self, p: Point2, tol: f64) -> bool {
        let n = self.vertices.len();
        if n < 3 {
            return false;
        }
        (0..n).all(|i| {
            let a = self.vertices[i];
            let b = self.vertices[(i + 1) % n];
            let e = b - a;
            let len = e.norm();
            len == 0.0 || e.cross(p - a) / len >= -tol
        })
    }

    /// Maps a point of the unit square onto the polygon with uniform density,
    /// using an area-weighted triangle fan. `u` selects the triangle, `(v, w)`
    /// place the point inside it.
    pub fn sample_uniform(&self, u: f64, v: f64, w: f64) -> Option<Point2> {
        let n = self.vertices.len();
        if n < 3 {
            return None;
        }
        let o = self.vertices[0];
        let areas: Vec<f64> = (1..n - 1)
            .map(|i| 0.5 * (self.vertices[i] - o).cross(self.vertices[i + 1] - o))
            .collect();
        let total: f64 = areas.iter().sum();
        if total <= 0.0 {
            return None;
        }
        let mut target = u * total;
        let mut tri = areas.len() - 1;
        for (i, a) in areas.iter().enumerate() {
            if target < *a {
                tri = i;
                break;
            }
            target -= a;
        }
        let (mut s, mut t) = (v, w);
        if s + t > 1.0 {
            s = 1.0 - s;
            t = 1.0 - t;
        }
        let b = self.vertices[tri + 1];
        let c = self.vertices[tri + 2];
        Some(o + (b - o) * s + (c - o) * t)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    #[test]
    fn unit_square_moments() {
        let sq = ConvexPolygon::rectangle(0.0, 1.0, 0.0, 1.0);
        assert_abs_diff_eq!(sq.area(), 1.0);
        let c = sq.centroid().unwrap();
        assert_abs_diff_eq!(c.x, 0.5);
        assert_abs_diff_eq!(c.y, 0.5);
    }

    #[test]
    fn overlapping_squares() {
        let a = ConvexPolygon::rectangle(0.0, 2.0, 0.0, 2.0);
        let b = ConvexPolygon::rectangle(1.0, 3.0, 1.5, 4.0);
        assert_abs_diff_eq!(a.intersection_area(&b), 0.5, epsilon = 1e-12);
        let far = ConvexPolygon::rectangle(5.0, 6.0, 5.0, 6.0);
        assert_eq!(a.intersection_area(&far), 0.0);
    }

    #[test]
    fn touching_squares_have_no_area() {
        let a = ConvexPolygon::rectangle(0.0, 1.0, 0.0, 1.0);
        let b = ConvexPolygon::rectangle(1.0, 2.0, 0.0, 1.0);
        assert_abs_diff_eq!(a.intersection_area(&b), 0.0, epsilon = 1e-15);
    }

    #[test]
    fn triangle_clip_by_halfplane() {
        let tri = ConvexPolygon::new(vec![
            Point2::new(0.0, 0.0),
            Point2::new(2.0, 0.0),
            Point2::new(0.0, 2.0),
        ]);
        // Left of the upward line x = 1 keeps x <= 1.
        let clipped = tri.clip(&HalfPlane::new(Point2::new(1.0, 0.0), Point2::new(0.0, 1.0)));
        assert_abs_diff_eq!(clipped.area(), 1.5, epsilon = 1e-12);
    }

    #[test]
    fn hull_drops_interior_points() {
        let pts = [
            Point2::new(0.0, 0.0),
            Point2::new(1.0, 0.0),
            Point2::new(0.5, 0.5),
            Point2::new(1.0, 1.0),
            Point2::new(0.0, 1.0),
            Point2::new(0.5, 1.0),
        ];
        let h = ConvexPolygon::hull(&pts);
        assert_eq!(h.vertices.len(), 4);
        assert_abs_diff_eq!(h.area(), 1.0, epsilon = 1e-12);
    }

    #[test]
    fn fan_sampling_stays_inside() {
        let poly = ConvexPolygon::new(vec![
            Point2::new(0.0, 0.0),
            Point2::new(3.0, 0.0),
            Point2::new(4.0, 2.0),
            Point2::new(1.0, 3.0),
        ]);
        for i in 0..20 {
            for j in 0..20 {
                let p = poly
                    .sample_uniform(i as f64 / 20.0, j as f64 / 20.0, (19 - j) as f64 / 20.0)
                    .unwrap();
                assert!(poly.contains(p, 1e-12));
            }
        }
    }
}
