//! Planar bearing geometry in the landmark-relative AB frame.
//!
//! Landmark `A` sits at the origin and `B` at `(0, 1)`. Bearings are body-frame
//! angles: a camera with heading `alpha` that measures `phi` towards a landmark
//! sees it along the global direction `alpha + phi`.

use std::f64::consts::{PI, TAU};
use std::ops::{Add, Div, Mul, Neg, Sub};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Below this magnitude a cross product or sine is treated as zero.
const DEGENERATE_EPS: f64 = 1e-12;

#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct Point2 {
    pub x: f64,
    pub y: f64,
}

impl Point2 {
    pub const fn new(x: f64, y: f64) -> Self {
        Self { x, y }
    }

    pub fn dot(self, other: Point2) -> f64 {
        self.x * other.x + self.y * other.y
    }

    /// z-component of the 3D cross product.
    pub fn cross(self, other: Point2) -> f64 {
        self.x * other.y - self.y * other.x
    }

    pub fn norm(self) -> f64 {
        self.x.hypot(self.y)
    }

    pub fn norm_sq(self) -> f64 {
        self.dot(self)
    }

    pub fn distance(self, other: Point2) -> f64 {
        (self - other).norm()
    }

    /// Counter-clockwise rotation by 90 degrees.
    pub fn perp(self) -> Point2 {
        Point2::new(-self.y, self.x)
    }

    pub fn from_angle(angle: f64) -> Point2 {
        Point2::new(angle.cos(), angle.sin())
    }

    pub fn is_finite(self) -> bool {
        self.x.is_finite() && self.y.is_finite()
    }
}

impl Add for Point2 {
    type Output = Point2;
    fn add(self, rhs: Point2) -> Point2 {
        Point2::new(self.x + rhs.x, self.y + rhs.y)
    }
}

impl Sub for Point2 {
    type Output = Point2;
    fn sub(self, rhs: Point2) -> Point2 {
        Point2::new(self.x - rhs.x, self.y - rhs.y)
    }
}

impl Mul<f64> for Point2 {
    type Output = Point2;
    fn mul(self, rhs: f64) -> Point2 {
        Point2::new(self.x * rhs, self.y * rhs)
    }
}

impl Div<f64> for Point2 {
    type Output = Point2;
    fn div(self, rhs: f64) -> Point2 {
        Point2::new(self.x / rhs, self.y / rhs)
    }
}

impl Neg for Point2 {
    type Output = Point2;
    fn neg(self) -> Point2 {
        Point2::new(-self.x, -self.y)
    }
}

pub const LANDMARK_A: Point2 = Point2::new(0.0, 0.0);
pub const LANDMARK_B: Point2 = Point2::new(0.0, 1.0);

/// Wraps an angle into `(-pi, pi]`.
pub fn wrap_angle(angle: f64) -> f64 {
    let mut a = angle.rem_euclid(TAU);
    if a > PI {
        a -= TAU;
    }
    a
}

/// Global direction from `from` to `to`.
pub fn azimuth(from: Point2, to: Point2) -> f64 {
    let d = to - from;
    d.y.atan2(d.x)
}

/// 2D camera pose. `alpha` is the heading, always kept in `(-pi, pi]`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Pose2 {
    pub x: f64,
    pub y: f64,
    pub alpha: f64,
}

impl Pose2 {
    pub fn new(x: f64, y: f64, alpha: f64) -> Self {
        Self {
            x,
            y,
            alpha: wrap_angle(alpha),
        }
    }

    pub fn from_point(p: Point2, alpha: f64) -> Self {
        Self::new(p.x, p.y, alpha)
    }

    pub fn position(&self) -> Point2 {
        Point2::new(self.x, self.y)
    }

    /// Body-frame bearing from this pose to `target`.
    pub fn bearing_to(&self, target: Point2) -> f64 {
        wrap_angle(azimuth(self.position(), target) - self.alpha)
    }
}

/// The circle through `A` and `B` on which a camera measuring a given
/// bearing difference to the two landmarks must lie.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LocusCircle {
    pub center: Point2,
    pub radius: f64,
    /// `+1.0` when the camera is right of the directed line `AB` (x > 0), `-1.0` when left.
    pub side: f64,
    /// Angle (around `center`) where the valid arc starts.
    pub arc_start: f64,
    /// Counter-clockwise angular extent of the valid arc, in `(0, 2*pi)`.
    pub arc_sweep: f64,
}

impl LocusCircle {
    /// Point at fraction `t` in `[0, 1]` along the valid arc; `t = 0` and
    /// `t = 1` are the landmarks themselves.
    pub fn point_at(&self, t: f64) -> Point2 {
        self.center + Point2::from_angle(self.arc_start + t * self.arc_sweep) * self.radius
    }

    pub fn arc_length(&self) -> f64 {
        self.radius * self.arc_sweep
    }

    pub fn on_valid_arc(&self, p: Point2) -> bool {
        p.x * self.side > 0.0
    }

    /// Arc fraction of `p` (assumed to lie on the circle), or `None` when it
    /// is outside the valid arc.
    pub fn arc_parameter(&self, p: Point2) -> Option<f64> {
        let beta = azimuth(self.center, p);
        let t = (beta - self.arc_start).rem_euclid(TAU) / self.arc_sweep;
        (t > 0.0 && t < 1.0).then_some(t)
    }
}

/// Solves the two-point resection locus for body-frame bearings to `A` and `B`.
pub fn locus_from_bearings(phi_a: f64, phi_b: f64) -> Result<LocusCircle> {
    // Signed angle at the camera from the ray towards A to the ray towards B.
    let theta = wrap_angle(phi_b - phi_a);
    let sin = theta.sin();
    if sin.abs() < DEGENERATE_EPS {
        return Err(Error::DegenerateGeometry(format!(
            "bearing difference {theta} puts the camera on the line AB"
        )));
    }
    // A clockwise turn from A to B means the camera is right of AB.
    let side = if theta < 0.0 { 1.0 } else { -1.0 };
    let inscribed = theta.abs();
    let ab_len = LANDMARK_A.distance(LANDMARK_B);
    let radius = ab_len / (2.0 * inscribed.sin());
    let mid = (LANDMARK_A + LANDMARK_B) * 0.5;
    // Center sits on the perpendicular bisector, same side as the arc for acute angles.
    let center = Point2::new(side * 0.5 * ab_len / inscribed.tan(), mid.y);

    let beta_a = azimuth(center, LANDMARK_A);
    let beta_b = azimuth(center, LANDMARK_B);
    let (arc_start, arc_sweep) = if side > 0.0 {
        (beta_a, (beta_b - beta_a).rem_euclid(TAU))
    } else {
        (beta_b, (beta_a - beta_b).rem_euclid(TAU))
    };
    Ok(LocusCircle {
        center,
        radius,
        side,
        arc_start,
        arc_sweep,
    })
}

/// Camera heading implied by a position and the body-frame bearing to `A`.
pub fn orientation_on_circle(p: Point2, phi_a: f64) -> Result<f64> {
    if p.distance(LANDMARK_A) < DEGENERATE_EPS || p.distance(LANDMARK_B) < DEGENERATE_EPS {
        return Err(Error::DegenerateGeometry(
            "camera coincides with a frame landmark".into(),
        ));
    }
    Ok(wrap_angle(azimuth(p, LANDMARK_A) - phi_a))
}

/// Intersection of two forward rays, if both parameters are positive.
pub fn ray_intersection(p: Point2, dir_p: Point2, q: Point2, dir_q: Point2) -> Option<Point2> {
    let denom = dir_p.cross(dir_q);
    if denom.abs() < DEGENERATE_EPS * dir_p.norm() * dir_q.norm() {
        return None;
    }
    let w = q - p;
    let t = w.cross(dir_q) / denom;
    let s = w.cross(dir_p) / denom;
    (t > 0.0 && s > 0.0).then(|| p + dir_p * t)
}

/// Centroid of all pairwise forward intersections of the lines of sight
/// `pose.alpha + bearing`.
pub fn triangulate(poses: &[Pose2], bearings: &[f64]) -> Result<Point2> {
    if poses.len() != bearings.len() {
        return Err(Error::InvalidArgument(format!(
            "{} poses but {} bearings",
            poses.len(),
            bearings.len()
        )));
    }
    if poses.len() < 2 {
        return Err(Error::InvalidArgument(
            "triangulation needs at least two views".into(),
        ));
    }
    let dirs: Vec<Point2> = poses
        .iter()
        .zip(bearings)
        .map(|(pose, b)| Point2::from_angle(pose.alpha + b))
        .collect();
    let mut sum = Point2::default();
    let mut count = 0usize;
    for i in 0..poses.len() {
        for j in (i + 1)..poses.len() {
            if let Some(p) =
                ray_intersection(poses[i].position(), dirs[i], poses[j].position(), dirs[j])
            {
                sum = sum + p;
                count += 1;
            }
        }
    }
    if count == 0 {
        return Err(Error::NoIntersection);
    }
    Ok(sum / count as f64)
}

/// All intersections of the full line `origin + t*dir` with the circle,
/// as `(t, point)` pairs sorted by `t`. Tangency yields a single point.
pub fn line_circle_intersections(
    origin: Point2,
    dir: Point2,
    center: Point2,
    radius: f64,
) -> Vec<(f64, Point2)> {
    let d = dir / dir.norm();
    let f = origin - center;
    let b = f.dot(d);
    let c = f.norm_sq() - radius * radius;
    let disc = b * b - c;
    let tol = 1e-12 * radius * radius;
    if disc < -tol {
        Vec::new()
    } else if disc <= tol {
        let t = -b;
        vec![(t, origin + d * t)]
    } else {
        let root = disc.sqrt();
        let (t0, t1) = (-b - root, -b + root);
        vec![(t0, origin + d * t0), (t1, origin + d * t1)]
    }
}

/// Forward intersections of the motion ray from `origin` with heading `psi`
/// (AB-frame global heading) with the valid arc of `circle`.
pub fn intersect_motion_ray(origin: &Pose2, psi: f64, circle: &LocusCircle) -> Vec<Point2> {
    line_circle_intersections(
        origin.position(),
        Point2::from_angle(psi),
        circle.center,
        circle.radius,
    )
    .into_iter()
    .filter(|(t, p)| *t > 0.0 && circle.on_valid_arc(*p))
    .map(|(_, p)| p)
    .collect()
}

/// Similarity transform from world coordinates into the frame defined by an
/// ordered landmark pair: the first maps to `(0, 0)` and the second to `(0, 1)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PairFrame {
    origin: Point2,
    axis: Point2,
}

impl PairFrame {
    pub fn new(first: Point2, second: Point2) -> Result<Self> {
        let axis = second - first;
        if axis.norm() < DEGENERATE_EPS {
            return Err(Error::DegenerateGeometry(
                "frame landmarks coincide".into(),
            ));
        }
        Ok(Self {
            origin: first,
            axis,
        })
    }

    pub fn scale(&self) -> f64 {
        self.axis.norm()
    }

    /// World direction of the local x-axis, as an angle.
    pub fn rotation(&self) -> f64 {
        (-self.axis.x).atan2(self.axis.y)
    }

    pub fn to_local(&self, p: Point2) -> Point2 {
        let d = p - self.origin;
        let s2 = self.axis.norm_sq();
        let x_axis = Point2::new(self.axis.y, -self.axis.x);
        Point2::new(d.dot(x_axis) / s2, d.dot(self.axis) / s2)
    }

    pub fn to_world(&self, p: Point2) -> Point2 {
        let x_axis = Point2::new(self.axis.y, -self.axis.x);
        self.origin + x_axis * p.x + self.axis * p.y
    }

    pub fn heading_to_local(&self, heading: f64) -> f64 {
        wrap_angle(heading - self.rotation())
    }

    pub fn pose_to_local(&self, pose: &Pose2) -> Pose2 {
        Pose2::from_point(
            self.to_local(pose.position()),
            self.heading_to_local(pose.alpha),
        )
    }
}
