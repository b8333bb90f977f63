//! Gaussian bearing and heading models.

use rand::Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geometry::{azimuth, wrap_angle, Point2, Pose2};

const LN_SQRT_2PI: f64 = 0.918_938_533_204_672_8;

/// Noise standard deviations in radians.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct NoiseConfig {
    pub sigma_v: f64,
    pub sigma_w: f64,
}

impl NoiseConfig {
    pub fn new(sigma_v: f64, sigma_w: f64) -> Result<Self> {
        if !(sigma_v >= 0.0 && sigma_w >= 0.0) {
            return Err(Error::InvalidArgument(format!(
                "noise must be nonnegative, got sigma_v={sigma_v}, sigma_w={sigma_w}"
            )));
        }
        Ok(Self { sigma_v, sigma_w })
    }

    pub fn from_degrees(sigma_v_deg: f64, sigma_w_deg: f64) -> Result<Self> {
        Self::new(sigma_v_deg.to_radians(), sigma_w_deg.to_radians())
    }

    pub fn sigma_v_deg(&self) -> f64 {
        self.sigma_v.to_degrees()
    }

    pub fn sigma_w_deg(&self) -> f64 {
        self.sigma_w.to_degrees()
    }
}

/// Landmark ids of a triplet `(A, B, C)`.
pub type TripletId = (u32, u32, u32);

/// Body-frame bearings to the three landmarks of a triplet at one time step.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Observation {
    pub time_index: usize,
    pub triplet: TripletId,
    /// `(phi_A, phi_B, phi_C)`, each in `(-pi, pi]`.
    pub bearings: [f64; 3],
}

/// Heading of the motion that starts at `time_index` and ends at the next step.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Action {
    pub time_index: usize,
    pub psi: f64,
}

/// Log density of a zero-mean Gaussian at the wrapped `residual`. A zero
/// sigma is a point mass: `0` at zero residual, `-inf` elsewhere.
pub fn gaussian_loglik(residual: f64, sigma: f64) -> f64 {
    let r = wrap_angle(residual);
    if sigma == 0.0 {
        return if r == 0.0 { 0.0 } else { f64::NEG_INFINITY };
    }
    -0.5 * (r / sigma).powi(2) - sigma.ln() - LN_SQRT_2PI
}

/// Log likelihood of measuring body-frame bearing `phi` to `landmark` from `pose`.
pub fn bearing_loglik(phi: f64, landmark: Point2, pose: &Pose2, sigma_v: f64) -> Result<f64> {
    if landmark == pose.position() {
        return Err(Error::DegenerateGeometry("camera coincides with landmark".into()));
    }
    Ok(gaussian_loglik(phi - pose.bearing_to(landmark), sigma_v))
}

/// Log likelihood of the heading `psi` for a move from `prev` to `next`.
/// Orientations play no part.
pub fn motion_loglik(prev: &Pose2, next: &Pose2, psi: f64, sigma_w: f64) -> Result<f64> {
    if prev.position() == next.position() {
        return Err(Error::DegenerateGeometry("consecutive poses coincide".into()));
    }
    Ok(gaussian_loglik(psi - azimuth(prev.position(), next.position()), sigma_w))
}

fn noisy<R: Rng + ?Sized>(value: f64, sigma: f64, rng: &mut R) -> f64 {
    if sigma == 0.0 {
        return wrap_angle(value);
    }
    let n = Normal::new(0.0, sigma).expect("finite sigma");
    wrap_angle(value + n.sample(rng))
}

/// Noisy bearings from `pose` to the landmark positions `[A, B, C]`.
pub fn sample_observation<R: Rng + ?Sized>(
    pose: &Pose2,
    landmarks: [Point2; 3],
    time_index: usize,
    triplet: TripletId,
    noise: &NoiseConfig,
    rng: &mut R,
) -> Observation {
    let bearings = landmarks.map(|l| noisy(pose.bearing_to(l), noise.sigma_v, rng));
    Observation {
        time_index,
        triplet,
        bearings,
    }
}

/// Noisy heading of the move from `prev` to `next`.
pub fn sample_action<R: Rng + ?Sized>(
    prev: &Pose2,
    next: &Pose2,
    time_index: usize,
    noise: &NoiseConfig,
    rng: &mut R,
) -> Action {
    Action {
        time_index,
        psi: noisy(azimuth(prev.position(), next.position()), noise.sigma_w, rng),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;
    use std::f64::consts::{PI, TAU};

    #[test]
    fn mode_value() {
        let s = 2f64.to_radians();
        let pose = Pose2::new(1.0, 0.5, 0.3);
        let l = Point2::new(-1.0, 2.0);
        let v = bearing_loglik(pose.bearing_to(l), l, &pose, s).unwrap();
        assert_abs_diff_eq!(v, (1.0 / ((2.0 * PI).sqrt() * s)).ln(), epsilon = 1e-12);
    }

    #[test]
    fn wrapped_residuals_are_symmetric() {
        let s = 0.1;
        let eps = 0.02;
        assert_abs_diff_eq!(gaussian_loglik(TAU - eps, s), gaussian_loglik(eps, s), epsilon = 1e-9);
        assert_abs_diff_eq!(gaussian_loglik(0.3 + TAU, s), gaussian_loglik(0.3, s), epsilon = 1e-9);
    }

    #[test]
    fn closed_form_density() {
        let s = 2f64.to_radians();
        let r = 1f64.to_radians();
        let expected = (1.0 / (s * (2.0 * PI).sqrt()) * (-(r * r) / (2.0 * s * s)).exp()).ln();
        assert_abs_diff_eq!(gaussian_loglik(r, s), expected, epsilon = 1e-12);
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        for _ in 0..100 {
            let prev = Pose2::new(rng.random_range(-3.0..3.0), rng.random_range(-3.0..3.0), rng.random_range(-3.0..3.0));
            let next = Pose2::new(rng.random_range(-3.0..3.0), rng.random_range(-3.0..3.0), rng.random_range(-3.0..3.0));
            let psi = rng.random_range(-PI..PI);
            let sw = rng.random_range(0.01..0.3);
            let d = next.position() - prev.position();
            let mut res = psi - d.y.atan2(d.x);
            while res > PI {
                res -= TAU;
            }
            while res <= -PI {
                res += TAU;
            }
            let expected = -0.5 * (res / sw).powi(2) - (sw * (2.0 * PI).sqrt()).ln();
            approx::assert_relative_eq!(motion_loglik(&prev, &next, psi, sw).unwrap(), expected, max_relative = 1e-12);
        }
    }

    #[test]
    fn zero_sigma_is_point_mass() {
        assert_eq!(gaussian_loglik(0.0, 0.0), 0.0);
        assert_eq!(gaussian_loglik(1e-6, 0.0), f64::NEG_INFINITY);
    }

    #[test]
    fn motion_ignores_orientation() {
        let a = Pose2::new(0.0, 0.0, 0.0);
        let b = Pose2::new(1.0, 1.0, 0.0);
        let b2 = Pose2::new(1.0, 1.0, 2.0);
        let a2 = Pose2::new(0.0, 0.0, -1.0);
        let psi = PI / 4.0;
        let v = motion_loglik(&a, &b, psi, 0.1).unwrap();
        assert_eq!(v, motion_loglik(&a2, &b2, psi, 0.1).unwrap());
        assert_abs_diff_eq!(v, gaussian_loglik(0.0, 0.1), epsilon = 1e-12);
        assert!(motion_loglik(&a, &a2, psi, 0.1).is_err());
    }

    #[test]
    fn density_integrates_to_one() {
        for deg in [0.5, 2.0, 10.0] {
            let s = f64::to_radians(deg);
            let n = 200_000;
            let h = TAU / n as f64;
            let total: f64 = (0..n).map(|k| gaussian_loglik(-PI + (k as f64 + 0.5) * h, s).exp() * h).sum();
            assert_abs_diff_eq!(total, 1.0, epsilon = 1e-6);
        }
    }

    #[test]
    fn noise_free_sampling_is_exact() {
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let pose = Pose2::new(1.0, 0.5, 0.2);
        let next = Pose2::new(2.0, -0.5, 0.0);
        let lm = [Point2::new(0.0, 0.0), Point2::new(0.0, 1.0), Point2::new(-1.0, 0.3)];
        let noise = NoiseConfig::default();
        let obs = sample_observation(&pose, lm, 0, (1, 2, 3), &noise, &mut rng);
        for (b, l) in obs.bearings.iter().zip(lm) {
            assert_eq!(*b, pose.bearing_to(l));
        }
        let act = sample_action(&pose, &next, 0, &noise, &mut rng);
        assert_eq!(act.psi, azimuth(pose.position(), next.position()));
    }

    #[test]
    fn sampled_residual_spread_matches_sigma() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let noise = NoiseConfig::from_degrees(2.0, 5.0).unwrap();
        let pose = Pose2::new(1.0, 0.5, 0.2);
        let next = Pose2::new(2.0, -0.5, 0.0);
        let lm = [Point2::new(0.0, 0.0), Point2::new(0.0, 1.0), Point2::new(-1.0, 0.3)];
        let n = 100_000;
        let (mut sv, mut sw) = (0.0, 0.0);
        let (mut ll_true, mut ll_shift) = (0.0, 0.0);
        for _ in 0..n {
            let obs = sample_observation(&pose, lm, 0, (1, 2, 3), &noise, &mut rng);
            let r = wrap_angle(obs.bearings[0] - pose.bearing_to(lm[0]));
            sv += r * r;
            ll_true += bearing_loglik(obs.bearings[0], lm[0], &pose, noise.sigma_v).unwrap();
            ll_shift += bearing_loglik(obs.bearings[0] + 5.0 * noise.sigma_v, lm[0], &pose, noise.sigma_v).unwrap();
            let a = sample_action(&pose, &next, 0, &noise, &mut rng);
            let r = wrap_angle(a.psi - azimuth(pose.position(), next.position()));
            sw += r * r;
        }
        let (sv, sw) = ((sv / n as f64).sqrt(), (sw / n as f64).sqrt());
        assert!((sv / noise.sigma_v - 1.0).abs() < 0.02);
        assert!((sw / noise.sigma_w - 1.0).abs() < 0.02);
        assert!(ll_true > ll_shift);
    }
}
