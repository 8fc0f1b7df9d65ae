//! Robust fundamental-matrix verification.
//!
//! Hypotheses come from the normalized 8-point algorithm on random minimal
//! samples; support is the number of correspondences whose Sampson distance
//! is within the pixel threshold. The iteration budget adapts to the best
//! inlier ratio seen so far and is capped at `max_iters`. The winning model is
//! re-estimated once from all of its inliers and kept if support does not drop.

use nalgebra::{Matrix3, SMatrix, SymmetricEigen, Vector3};
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::datamodel::CorrespondenceSet;
use crate::seed::rng_for;

pub const MIN_MATCHES: usize = 8;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RansacParams {
    pub threshold_px: f64,
    pub confidence: f64,
    pub max_iters: usize,
    pub seed: u64,
}

impl Default for RansacParams {
    fn default() -> Self {
        RansacParams {
            threshold_px: 3.0,
            confidence: 0.99,
            max_iters: 1000,
            seed: 0,
        }
    }
}

impl RansacParams {
    pub fn with_seed(seed: u64) -> Self {
        RansacParams {
            seed,
            ..Default::default()
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct GeometryScore {
    pub inlier_count: usize,
    pub n_tentative: usize,
    pub model_found: bool,
}

impl GeometryScore {
    fn none(n: usize) -> Self {
        GeometryScore {
            inlier_count: 0,
            n_tentative: n,
            model_found: false,
        }
    }
}

/// Full RANSAC output, including the model and inlier mask.
#[derive(Debug, Clone)]
pub struct RansacFit {
    pub fundamental: Matrix3<f64>,
    pub inliers: Vec<bool>,
    pub iterations: usize,
}

pub fn ransac_inlier_count(c: &CorrespondenceSet, params: &RansacParams) -> GeometryScore {
    let n = c.len();
    match ransac_fundamental(c, params) {
        Some(fit) => GeometryScore {
            inlier_count: fit.inliers.iter().filter(|&&b| b).count(),
            n_tentative: n,
            model_found: true,
        },
        None => GeometryScore::none(n),
    }
}

pub fn ransac_fundamental(c: &CorrespondenceSet, params: &RansacParams) -> Option<RansacFit> {
    let n = c.len();
    if n < MIN_MATCHES {
        return None;
    }
    let p1: Vec<[f64; 2]> = c.matches.iter().map(|m| [m[0], m[1]]).collect();
    let p2: Vec<[f64; 2]> = c.matches.iter().map(|m| [m[2], m[3]]).collect();
    let (t1, n1) = hartley(&p1);
    let (t2, n2) = hartley(&p2);
    let thr2 = params.threshold_px * params.threshold_px;

    let mut rng = rng_for(params.seed, "ransac");
    let mut best: Option<(Matrix3<f64>, usize)> = None;
    let mut needed = params.max_iters;
    let mut iterations = 0;
    let mut sample = [0usize; MIN_MATCHES];
    let mut scratch: Vec<usize> = (0..n).collect();

    while iterations < needed.min(params.max_iters) {
        iterations += 1;
        // partial Fisher-Yates over a reused index buffer
        for k in 0..MIN_MATCHES {
            let j = rng.gen_range(k..n);
            scratch.swap(k, j);
            sample[k] = scratch[k];
        }
        let Some(f_norm) = eight_point(sample.iter().map(|&i| (n1[i], n2[i]))) else {
            continue;
        };
        let f = t2.transpose() * f_norm * t1;
        let count = count_inliers(&f, &p1, &p2, thr2);
        if best.is_none_or(|(_, b)| count > b) {
            best = Some((f, count));
            needed = adaptive_iterations(count, n, params.confidence, params.max_iters);
        }
    }

    let (mut f, mut count) = best?;
    if count < MIN_MATCHES {
        return None;
    }
    let inlier_idx: Vec<usize> = (0..n)
        .filter(|&i| sampson_sq(&f, p1[i], p2[i]) <= thr2)
        .collect();
    let sub1: Vec<[f64; 2]> = inlier_idx.iter().map(|&i| p1[i]).collect();
    let sub2: Vec<[f64; 2]> = inlier_idx.iter().map(|&i| p2[i]).collect();
    let (s1, m1) = hartley(&sub1);
    let (s2, m2) = hartley(&sub2);
    if let Some(refit_norm) = eight_point(m1.iter().copied().zip(m2.iter().copied())) {
        let refit = s2.transpose() * refit_norm * s1;
        let refit_count = count_inliers(&refit, &p1, &p2, thr2);
        if refit_count >= count {
            f = refit;
            count = refit_count;
        }
    }
    let inliers: Vec<bool> = (0..n).map(|i| sampson_sq(&f, p1[i], p2[i]) <= thr2).collect();
    debug_assert_eq!(inliers.iter().filter(|&&b| b).count(), count);
    Some(RansacFit {
        fundamental: f,
        inliers,
        iterations,
    })
}

fn adaptive_iterations(inliers: usize, n: usize, confidence: f64, cap: usize) -> usize {
    let w = inliers as f64 / n as f64;
    let p_good = w.powi(MIN_MATCHES as i32);
    if p_good >= 1.0 {
        return 1;
    }
    if p_good <= 0.0 {
        return cap;
    }
    let k = (1.0 - confidence).ln() / (1.0 - p_good).ln();
    if !k.is_finite() || k > cap as f64 {
        cap
    } else {
        (k.ceil() as usize).max(1)
    }
}

fn count_inliers(f: &Matrix3<f64>, p1: &[[f64; 2]], p2: &[[f64; 2]], thr2: f64) -> usize {
    p1.iter()
        .zip(p2)
        .filter(|(a, b)| sampson_sq(f, **a, **b) <= thr2)
        .count()
}

/// Squared Sampson distance of `x2^T F x1 = 0`, in squared pixels.
pub fn sampson_sq(f: &Matrix3<f64>, x1: [f64; 2], x2: [f64; 2]) -> f64 {
    let a = Vector3::new(x1[0], x1[1], 1.0);
    let b = Vector3::new(x2[0], x2[1], 1.0);
    let fa = f * a;
    let ftb = f.transpose() * b;
    let e = b.dot(&fa);
    let den = fa[0] * fa[0] + fa[1] * fa[1] + ftb[0] * ftb[0] + ftb[1] * ftb[1];
    if den <= f64::MIN_POSITIVE {
        return if e.abs() <= 1e-12 { 0.0 } else { f64::INFINITY };
    }
    e * e / den
}

/// Similarity transform moving the centroid to the origin with mean distance sqrt(2).
fn hartley(points: &[[f64; 2]]) -> (Matrix3<f64>, Vec<[f64; 2]>) {
    let n = points.len().max(1) as f64;
    let cx = points.iter().map(|p| p[0]).sum::<f64>() / n;
    let cy = points.iter().map(|p| p[1]).sum::<f64>() / n;
    let mean_dist = points
        .iter()
        .map(|p| ((p[0] - cx).powi(2) + (p[1] - cy).powi(2)).sqrt())
        .sum::<f64>()
        / n;
    let s = if mean_dist > 1e-12 {
        std::f64::consts::SQRT_2 / mean_dist
    } else {
        1.0
    };
    let t = Matrix3::new(s, 0.0, -s * cx, 0.0, s, -s * cy, 0.0, 0.0, 1.0);
    let normed = points
        .iter()
        .map(|p| [s * (p[0] - cx), s * (p[1] - cy)])
        .collect();
    (t, normed)
}

/// Linear 8-point estimate (least squares for more than eight points) with
/// rank-2 enforcement. Inputs should already be normalized.
pub fn eight_point(pairs: impl Iterator<Item = ([f64; 2], [f64; 2])>) -> Option<Matrix3<f64>> {
    let mut ata = SMatrix::<f64, 9, 9>::zeros();
    let mut count = 0;
    for (a, b) in pairs {
        let row = SMatrix::<f64, 9, 1>::from_column_slice(&[
            b[0] * a[0],
            b[0] * a[1],
            b[0],
            b[1] * a[0],
            b[1] * a[1],
            b[1],
            a[0],
            a[1],
            1.0,
        ]);
        ata += row * row.transpose();
        count += 1;
    }
    if count < MIN_MATCHES {
        return None;
    }
    let eig = SymmetricEigen::new(ata);
    let (min_idx, _) = eig
        .eigenvalues
        .iter()
        .enumerate()
        .min_by(|a, b| a.1.partial_cmp(b.1).unwrap_or(std::cmp::Ordering::Equal))?;
    let v = eig.eigenvectors.column(min_idx);
    let f = Matrix3::new(v[0], v[1], v[2], v[3], v[4], v[5], v[6], v[7], v[8]);
    if !f.iter().all(|x| x.is_finite()) {
        return None;
    }
    let svd = f.svd(true, true);
    let (u, v_t) = (svd.u?, svd.v_t?);
    let mut s = svd.singular_values;
    // singular values come back sorted in descending order
    let (imin, _) = s
        .iter()
        .enumerate()
        .min_by(|a, b| a.1.partial_cmp(b.1).unwrap_or(std::cmp::Ordering::Equal))?;
    s[imin] = 0.0;
    let f2 = u * Matrix3::from_diagonal(&s) * v_t;
    let norm = f2.norm();
    if norm <= 0.0 || !norm.is_finite() {
        return None;
    }
    Some(f2 / norm)
}
