//! Pearson and Spearman correlation with significance estimates.

use serde::{Deserialize, Serialize};
use statrs::distribution::{ContinuousCDF, StudentsT};

use crate::error::{Error, Result};

fn check_pair(x: &[f64], y: &[f64], min_n: usize) -> Result<()> {
    if x.len() != y.len() {
        return Err(Error::DimensionMismatch(format!(
            "correlation inputs differ in length: {} vs {}",
            x.len(),
            y.len()
        )));
    }
    if x.len() < min_n {
        return Err(Error::Degenerate(format!(
            "correlation needs at least {min_n} points, got {}",
            x.len()
        )));
    }
    if x.iter().chain(y).any(|v| !v.is_finite()) {
        return Err(Error::Degenerate("correlation inputs must be finite".into()));
    }
    Ok(())
}

/// Sample Pearson correlation. Zero variance in either input is an error.
pub fn pearson(x: &[f64], y: &[f64]) -> Result<f64> {
    check_pair(x, y, 2)?;
    let n = x.len() as f64;
    let mx = x.iter().sum::<f64>() / n;
    let my = y.iter().sum::<f64>() / n;
    let (mut sxy, mut sxx, mut syy) = (0.0, 0.0, 0.0);
    for (a, b) in x.iter().zip(y) {
        let (dx, dy) = (a - mx, b - my);
        sxy += dx * dy;
        sxx += dx * dx;
        syy += dy * dy;
    }
    if sxx == 0.0 || syy == 0.0 {
        return Err(Error::Degenerate("zero variance in correlation input".into()));
    }
    Ok((sxy / (sxx.sqrt() * syy.sqrt())).clamp(-1.0, 1.0))
}

/// Pearson correlation, or `None` when either input is constant.
pub fn pearson_or_undefined(x: &[f64], y: &[f64]) -> Option<f64> {
    pearson(x, y).ok()
}

/// 1-based ranks with ties given their average rank.
pub fn mid_ranks(x: &[f64]) -> Vec<f64> {
    let mut order: Vec<usize> = (0..x.len()).collect();
    order.sort_by(|&i, &j| x[i].total_cmp(&x[j]));
    let mut ranks = vec![0.0; x.len()];
    let mut start = 0;
    while start < order.len() {
        let mut end = start + 1;
        while end < order.len() && x[order[end]] == x[order[start]] {
            end += 1;
        }
        let avg = (start + end + 1) as f64 / 2.0;
        for &k in &order[start..end] {
            ranks[k] = avg;
        }
        start = end;
    }
    ranks
}

/// Spearman's rho with the two-sided t-approximation p-value (only for n ≥ 4).
pub fn spearman(x: &[f64], y: &[f64]) -> Result<(f64, Option<f64>)> {
    check_pair(x, y, 2)?;
    let rho = pearson(&mid_ranks(x), &mid_ranks(y))
        .map_err(|_| Error::Degenerate("spearman input is entirely tied".into()))?;
    let p = (x.len() >= 4).then(|| spearman_p_approx(rho, x.len()));
    Ok((rho, p))
}

/// Two-sided p-value of `t = ρ·sqrt((n−2)/(1−ρ²))` under Student's t with n−2
/// degrees of freedom. Kept strictly positive so that `|ρ| = 1` stays in (0, 1].
pub fn spearman_p_approx(rho: f64, n: usize) -> f64 {
    assert!(n >= 3, "t approximation needs n >= 3");
    let df = (n - 2) as f64;
    let denom = 1.0 - rho * rho;
    if denom <= 0.0 {
        return f64::MIN_POSITIVE;
    }
    let t = rho.abs() * (df / denom).sqrt();
    let dist = StudentsT::new(0.0, 1.0, df).expect("df > 0");
    (2.0 * (1.0 - dist.cdf(t))).clamp(f64::MIN_POSITIVE, 1.0)
}

/// Exact two-sided permutation p-value of Spearman's rho, enumerating all n!
/// orderings of `y`. Limited to n ≤ 10.
pub fn spearman_exact_p(x: &[f64], y: &[f64]) -> Result<f64> {
    check_pair(x, y, 2)?;
    if x.len() > 10 {
        return Err(Error::InvalidParameter(format!(
            "exact permutation test is limited to n <= 10, got {}",
            x.len()
        )));
    }
    let rx = mid_ranks(x);
    let mut ry = mid_ranks(y);
    let observed = pearson(&rx, &ry)
        .map_err(|_| Error::Degenerate("spearman input is entirely tied".into()))?
        .abs();
    let n = rx.len() as f64;
    let mean = (n + 1.0) / 2.0;
    let cx: Vec<f64> = rx.iter().map(|r| r - mean).collect();
    let sxx: f64 = cx.iter().map(|v| v * v).sum();
    let syy: f64 = ry.iter().map(|r| (r - mean) * (r - mean)).sum();
    let scale = (sxx * syy).sqrt();
    let tol = 1e-12;
    let (mut hits, mut total) = (0u64, 0u64);
    let mut count = |perm: &[f64]| {
        let s: f64 = cx.iter().zip(perm).map(|(a, b)| a * (b - mean)).sum();
        total += 1;
        if (s / scale).abs() >= observed - tol {
            hits += 1;
        }
    };
    // Heap's algorithm, iterative form
    let k = ry.len();
    let mut c = vec![0usize; k];
    count(&ry);
    let mut i = 0;
    while i < k {
        if c[i] < i {
            if i % 2 == 0 {
                ry.swap(0, i);
            } else {
                ry.swap(c[i], i);
            }
            count(&ry);
            c[i] += 1;
            i = 0;
        } else {
            c[i] = 0;
            i += 1;
        }
    }
    Ok(hits as f64 / total as f64)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CorrelationReport {
    pub pearson_r: f64,
    pub spearman_rho: f64,
    pub spearman_p_approx: Option<f64>,
    pub n: usize,
}

pub fn correlation_report(x: &[f64], y: &[f64]) -> Result<CorrelationReport> {
    let pearson_r = pearson(x, y)?;
    let (spearman_rho, spearman_p_approx) = spearman(x, y)?;
    Ok(CorrelationReport {
        pearson_r,
        spearman_rho,
        spearman_p_approx,
        n: x.len(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn perfect_lines() {
        let x: Vec<f64> = (0..10).map(f64::from).collect();
        let y: Vec<f64> = x.iter().map(|v| 2.0 * v + 3.0).collect();
        assert!((pearson(&x, &y).unwrap() - 1.0).abs() < 1e-15);
        let neg: Vec<f64> = x.iter().map(|v| -v).collect();
        assert!((pearson(&x, &neg).unwrap() + 1.0).abs() < 1e-15);
        let cube: Vec<f64> = x.iter().map(|v| (v - 4.0).powi(3)).collect();
        assert_eq!(spearman(&x, &cube).unwrap().0, 1.0);
    }

    #[test]
    fn constant_input_is_degenerate() {
        assert!(pearson(&[1.0, 2.0, 3.0], &[4.0, 4.0, 4.0]).is_err());
        assert!(spearman(&[1.0; 5], &[1.0, 2.0, 3.0, 4.0, 5.0]).is_err());
        assert!(pearson(&[1.0], &[2.0]).is_err());
        assert!(pearson(&[1.0, 2.0], &[2.0]).is_err());
    }

    #[test]
    fn mid_rank_example() {
        assert_eq!(mid_ranks(&[10.0, 20.0, 10.0, 30.0, 20.0, 10.0]), vec![2.0, 4.5, 2.0, 6.0, 4.5, 2.0]);
    }

    #[test]
    fn p_only_from_four_points() {
        assert!(spearman(&[1.0, 2.0, 3.0], &[1.0, 3.0, 2.0]).unwrap().1.is_none());
        assert!(spearman(&[1.0, 2.0, 3.0, 4.0], &[1.0, 3.0, 2.0, 4.0]).unwrap().1.is_some());
    }

    #[test]
    fn reported_significance() {
        let p = spearman_p_approx(0.768, 15);
        assert!((p - 8.3e-4).abs() / 8.3e-4 < 0.05, "{p}");
    }

    #[test]
    fn p_in_unit_interval() {
        for rho in [-1.0, -0.5, 0.0, 0.3, 1.0] {
            let p = spearman_p_approx(rho, 8);
            assert!(p > 0.0 && p <= 1.0);
        }
        assert_eq!(spearman_p_approx(0.0, 10), 1.0);
    }

    #[test]
    fn exact_p_small_case() {
        // n = 4, identity ordering: only the identity and its reversal reach |rho| = 1
        let x = [1.0, 2.0, 3.0, 4.0];
        let p = spearman_exact_p(&x, &x).unwrap();
        assert!((p - 2.0 / 24.0).abs() < 1e-15);
    }

    proptest! {
        #[test]
        fn spearman_invariant_under_monotone_maps(v in proptest::collection::vec((-10.0f64..10.0, -10.0f64..10.0), 4..30)) {
            let x: Vec<f64> = v.iter().map(|p| p.0).collect();
            let y: Vec<f64> = v.iter().map(|p| p.1).collect();
            prop_assume!(spearman(&x, &y).is_ok());
            let fx: Vec<f64> = x.iter().map(|t| t.exp()).collect();
            let fy: Vec<f64> = y.iter().map(|t| t.powi(3) + t).collect();
            prop_assert_eq!(spearman(&x, &y).unwrap(), spearman(&fx, &fy).unwrap());
        }

        #[test]
        fn pearson_invariant_under_positive_affine(
            v in proptest::collection::vec((-10.0f64..10.0, -10.0f64..10.0), 3..30),
            s in 0.1f64..10.0, t in -5.0f64..5.0,
        ) {
            let x: Vec<f64> = v.iter().map(|p| p.0).collect();
            let y: Vec<f64> = v.iter().map(|p| p.1).collect();
            prop_assume!(pearson(&x, &y).is_ok());
            let ax: Vec<f64> = x.iter().map(|u| s * u + t).collect();
            prop_assert!((pearson(&x, &y).unwrap() - pearson(&ax, &y).unwrap()).abs() < 1e-12);
        }

        #[test]
        fn bounded(v in proptest::collection::vec((-1e3f64..1e3, -1e3f64..1e3), 2..40)) {
            let x: Vec<f64> = v.iter().map(|p| p.0).collect();
            let y: Vec<f64> = v.iter().map(|p| p.1).collect();
            if let Ok(r) = pearson(&x, &y) {
                prop_assert!(r.abs() <= 1.0);
            }
        }
    }
}
