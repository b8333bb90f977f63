//! Accuracy and confidence metrics of a state estimate against a known state.

use serde::{Deserialize, Serialize};

use crate::partition::{SpacePartition, StateVector};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MetricReport {
    pub dmse: f64,
    pub gmd: f64,
    pub entropy: f64,
    pub gt_rating: usize,
    pub gt_likelihood: f64,
    pub gt_likelihood_ratio: f64,
    pub likelihood_ratio: f64,
}

impl MetricReport {
    /// All metrics of `est` for the 1-based ground-truth state `gt`.
    pub fn evaluate(est: &StateVector, gt: usize, partition: &SpacePartition) -> Self {
        Self {
            dmse: dmse(est, gt),
            gmd: gmd(est, gt, partition),
            entropy: entropy(est),
            gt_rating: gt_rating(est, gt),
            gt_likelihood: gt_likelihood(est, gt),
            gt_likelihood_ratio: gt_likelihood_ratio(est, gt),
            likelihood_ratio: likelihood_ratio(est),
        }
    }
}

/// Euclidean distance between `est` and the one-hot vector of `gt`.
pub fn dmse(est: &StateVector, gt: usize) -> f64 {
    est.values
        .iter()
        .enumerate()
        .map(|(i, v)| {
            let target = if i + 1 == gt { 1.0 } else { 0.0 };
            (v - target).powi(2)
        })
        .sum::<f64>()
        .sqrt()
}

/// Expected distance between the centroid of the estimated state and the
/// centroid of `gt`, in units of `|AB|`.
pub fn gmd(est: &StateVector, gt: usize, partition: &SpacePartition) -> f64 {
    let Ok(c_gt) = partition.region_centroid(gt) else {
        return f64::NAN;
    };
    est.values
        .iter()
        .enumerate()
        .filter(|(_, v)| **v > 0.0)
        .map(|(i, v)| v * partition.region_centroid(i + 1).map(|c| c.distance(c_gt)).unwrap_or(f64::NAN))
        .sum()
}

/// Shannon entropy in nats.
pub fn entropy(est: &StateVector) -> f64 {
    let h = -est.values.iter().filter(|v| **v > 0.0).map(|v| v * v.ln()).sum::<f64>();
    h.max(0.0) + 0.0
}

/// Rank of `gt` by descending probability, 1 = most likely. States tied with
/// `gt` do not push it down.
pub fn gt_rating(est: &StateVector, gt: usize) -> usize {
    let p = est.get(gt);
    1 + est.values.iter().filter(|v| **v > p).count()
}

pub fn gt_likelihood(est: &StateVector, gt: usize) -> f64 {
    est.get(gt)
}

/// `est(gt) / max(est)`.
pub fn gt_likelihood_ratio(est: &StateVector, gt: usize) -> f64 {
    let max = est.values.iter().copied().fold(0.0, f64::max);
    if max > 0.0 {
        est.get(gt) / max
    } else {
        0.0
    }
}

/// Second-highest over highest probability.
pub fn likelihood_ratio(est: &StateVector) -> f64 {
    let (mut first, mut second) = (0.0f64, 0.0f64);
    for &v in &est.values {
        if v > first {
            second = first;
            first = v;
        } else if v > second {
            second = v;
        }
    }
    if first > 0.0 {
        second / first
    } else {
        0.0
    }
}

/// Normalized entropy distance from uniform: 1 for a delta, 0 for uniform.
pub fn information_score(est: &StateVector) -> f64 {
    let d = est.len();
    if d < 2 {
        return 1.0;
    }
    let h_max = (d as f64).ln();
    ((h_max - entropy(est)) / h_max).clamp(0.0, 1.0)
}

/// `q`-quantile (0..=1) with linear interpolation; NaNs are ignored.
pub fn quantile(values: &[f64], q: f64) -> f64 {
    let mut v: Vec<f64> = values.iter().copied().filter(|x| !x.is_nan()).collect();
    if v.is_empty() {
        return f64::NAN;
    }
    v.sort_by(f64::total_cmp);
    let pos = q.clamp(0.0, 1.0) * (v.len() - 1) as f64;
    let lo = pos.floor() as usize;
    let hi = pos.ceil() as usize;
    v[lo] + (v[hi] - v[lo]) * (pos - lo as f64)
}

pub fn median(values: &[f64]) -> f64 {
    quantile(values, 0.5)
}

/// Ranks starting at 0, ties sharing their average rank.
fn ranks(values: &[f64]) -> Vec<f64> {
    let mut idx: Vec<usize> = (0..values.len()).collect();
    idx.sort_by(|a, b| values[*a].total_cmp(&values[*b]));
    let mut out = vec![0.0; values.len()];
    let mut i = 0;
    while i < idx.len() {
        let mut j = i;
        while j + 1 < idx.len() && values[idx[j + 1]] == values[idx[i]] {
            j += 1;
        }
        for k in &idx[i..=j] {
            out[*k] = (i + j) as f64 / 2.0;
        }
        i = j + 1;
    }
    out
}

/// Spearman rank correlation. NaN when either input is constant.
pub fn spearman(a: &[f64], b: &[f64]) -> f64 {
    assert_eq!(a.len(), b.len(), "spearman needs paired samples");
    let (ra, rb) = (ranks(a), ranks(b));
    let n = a.len() as f64;
    let (ma, mb) = (ra.iter().sum::<f64>() / n, rb.iter().sum::<f64>() / n);
    let cov: f64 = ra.iter().zip(&rb).map(|(x, y)| (x - ma) * (y - mb)).sum();
    let va: f64 = ra.iter().map(|x| (x - ma).powi(2)).sum();
    let vb: f64 = rb.iter().map(|y| (y - mb).powi(2)).sum();
    cov / (va * vb).sqrt()
}

/// Median of `y` within each of `bins` equal-width bins of `x` over `[0, 1]`.
/// Empty bins give `None`.
pub fn binned_medians(x: &[f64], y: &[f64], bins: usize) -> Vec<Option<f64>> {
    let mut groups = vec![Vec::new(); bins];
    for (xv, yv) in x.iter().zip(y) {
        let b = ((xv * bins as f64).floor().max(0.0) as usize).min(bins - 1);
        groups[b].push(*yv);
    }
    groups.iter().map(|g| (!g.is_empty()).then(|| median(g))).collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    #[test]
    fn one_hot_is_perfect() {
        let p = SpacePartition::edc();
        let est = StateVector::delta(20, 7);
        let r = MetricReport::evaluate(&est, 7, &p);
        assert_eq!(r.dmse, 0.0);
        assert_eq!(r.gmd, 0.0);
        assert_eq!(r.entropy, 0.0);
        assert_eq!(r.gt_rating, 1);
        assert_eq!(r.gt_likelihood, 1.0);
        assert_eq!(r.gt_likelihood_ratio, 1.0);
        assert_eq!(r.likelihood_ratio, 0.0);
    }

    #[test]
    fn spearman_handles_ties_and_order() {
        let a = [1.0, 2.0, 3.0, 4.0];
        assert_abs_diff_eq!(spearman(&a, &[10.0, 20.0, 30.0, 40.0]), 1.0, epsilon = 1e-12);
        assert_abs_diff_eq!(spearman(&a, &[4.0, 3.0, 2.0, 1.0]), -1.0, epsilon = 1e-12);
        assert_abs_diff_eq!(spearman(&[1.0, 1.0, 2.0, 3.0], &[1.0, 1.0, 2.0, 3.0]), 1.0, epsilon = 1e-12);
        let m = binned_medians(&[0.05, 0.06, 0.95, 1.0], &[1.0, 3.0, 5.0, 7.0], 10);
        assert_eq!(m[0], Some(2.0));
        assert_eq!(m[5], None);
        assert_eq!(m[9], Some(6.0));
    }

    #[test]
    fn uniform_constants() {
        let u = StateVector::uniform(20);
        assert_abs_diff_eq!(dmse(&u, 3), 0.95f64.sqrt(), epsilon = 1e-12);
        assert_abs_diff_eq!(entropy(&u), 20f64.ln(), epsilon = 1e-12);
        assert_abs_diff_eq!(information_score(&u), 0.0, epsilon = 1e-12);
        let p = SpacePartition::edc();
        let mean: f64 = (1..=20).map(|g| gmd(&u, g, &p)).sum::<f64>() / 20.0;
        assert!((mean - 2.2).abs() <= 0.3, "uniform gmd {mean}");
    }

    #[test]
    fn dmse_matches_naive_formula() {
        let est = StateVector::new(vec![0.1, 0.2, 0.3, 0.4]);
        let naive = ((0.1f64).powi(2) + 0.8f64.powi(2) + 0.3f64.powi(2) + 0.4f64.powi(2)).sqrt();
        assert_abs_diff_eq!(dmse(&est, 2), naive, epsilon = 1e-12);
        assert!(dmse(&StateVector::delta(4, 1), 2) <= 2f64.sqrt() + 1e-12);
    }

    #[test]
    fn rating_and_ratios() {
        let est = StateVector::new(vec![0.1, 0.5, 0.3, 0.1]);
        assert_eq!(gt_rating(&est, 3), 2);
        assert_eq!(gt_rating(&est, 2), 1);
        assert_eq!(gt_rating(&est, 1), 3);
        assert_eq!(gt_rating(&est, 4), 3);
        assert_abs_diff_eq!(gt_likelihood_ratio(&est, 3), 0.6, epsilon = 1e-12);
        assert_abs_diff_eq!(likelihood_ratio(&est), 0.6, epsilon = 1e-12);
        assert_eq!(gt_rating(&est, est.argmax()), 1);
        assert_abs_diff_eq!(
            information_score(&StateVector::new(vec![0.5, 0.5, 0.0, 0.0])),
            1.0 - 2f64.ln() / 4f64.ln(),
            epsilon = 1e-12
        );
    }

    #[test]
    fn gmd_is_linear_in_mass() {
        let p = SpacePartition::edc();
        let c = p.centroids().unwrap();
        let gt = 6;
        let (a, b) = (1, 11);
        let da = c[a - 1].distance(c[gt - 1]);
        let db = c[b - 1].distance(c[gt - 1]);
        let mut v1 = vec![0.0; 20];
        v1[gt - 1] = 0.5;
        v1[a - 1] = 0.3;
        v1[b - 1] = 0.2;
        let mut v2 = v1.clone();
        v2.swap(a - 1, b - 1);
        let g1 = gmd(&StateVector::new(v1), gt, &p);
        let g2 = gmd(&StateVector::new(v2), gt, &p);
        assert_abs_diff_eq!(g1 - g2, 0.1 * (da - db), epsilon = 1e-12);
    }

    #[test]
    fn quantiles() {
        let v = [3.0, 1.0, 2.0, 4.0];
        assert_abs_diff_eq!(median(&v), 2.5);
        assert_abs_diff_eq!(quantile(&v, 0.0), 1.0);
        assert_abs_diff_eq!(quantile(&v, 1.0), 4.0);
    }
}
