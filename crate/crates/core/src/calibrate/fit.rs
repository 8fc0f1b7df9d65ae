//! Correlation-maximizing fusion fits.

use log::debug;
use rand::Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::optimize::{maximize_in_box, NelderMeadOptions};
use super::stats::{correlation_report, pearson_or_undefined, CorrelationReport};
use crate::aggregate::{fit_scoped, normalize_records, NormalizedVariant, StatsTable};
use crate::datamodel::{NormalizationScope, VariantRecord};
use crate::error::{Error, Result};
use crate::fusion::{evaluate_fusion, FusionEquation, FusionModel, InputTransform, UnitScaling};
use crate::seed::{derive_seed, rng_for};

/// One variant as seen by the fitter.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FitPoint {
    pub g_hat: f64,
    pub a_hat: f64,
    pub y: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FitResult {
    pub model: FusionModel,
    /// Best correlation reached from each start, by start index; `None` when the
    /// fused predictor was constant everywhere the start explored.
    pub per_start_scores: Vec<Option<f64>>,
    pub best_start_seed: u64,
}

/// Pearson r of a fusion's predictions against `y`; `None` for a constant or
/// non-finite predictor.
pub fn fused_correlation(
    eq: FusionEquation,
    params: &[f64],
    points: &[FitPoint],
    scaling: Option<&UnitScaling>,
) -> Option<f64> {
    let mut pred = Vec::with_capacity(points.len());
    for p in points {
        pred.push(evaluate_fusion(eq, params, p.g_hat, p.a_hat, scaling).ok()?);
    }
    let y: Vec<f64> = points.iter().map(|p| p.y).collect();
    let r = pearson_or_undefined(&pred, &y)?;
    // Predictors that vary only by rounding noise are treated as constant.
    let spread = pred.iter().fold(f64::NEG_INFINITY, |m, v| m.max(*v))
        - pred.iter().fold(f64::INFINITY, |m, v| m.min(*v));
    let scale = pred.iter().fold(0.0f64, |m, v| m.max(v.abs())).max(1e-300);
    (spread > 1e-12 * scale).then_some(r)
}

pub fn start_seed(seed: u64, index: usize) -> u64 {
    derive_seed(seed, &format!("fit/start/{index}"))
}

/// Multi-start bounded maximization of Pearson r between the fused score and `y`.
pub fn fit_fusion(eq: FusionEquation, points: &[FitPoint], n_starts: usize, seed: u64) -> Result<FitResult> {
    if points.len() < 3 {
        return Err(Error::Degenerate(format!(
            "fusion fit needs at least 3 variants, got {}",
            points.len()
        )));
    }
    if n_starts == 0 {
        return Err(Error::InvalidParameter("n_starts must be positive".into()));
    }
    let y0 = points[0].y;
    if points.iter().all(|p| p.y == y0) {
        return Err(Error::Degenerate("downstream scores are constant".into()));
    }
    let scaling = match eq.input_transform() {
        InputTransform::MinmaxUnit => {
            let pts: Vec<(f64, f64)> = points.iter().map(|p| (p.g_hat, p.a_hat)).collect();
            Some(UnitScaling::fit(&pts)?)
        }
        _ => None,
    };
    let bounds = eq.bounds();
    let opts = NelderMeadOptions::default();
    let outcomes: Vec<(Option<f64>, Vec<f64>)> = (0..n_starts)
        .into_par_iter()
        .map(|i| {
            let mut rng = rng_for(start_seed(seed, i), "draw");
            let x0: Vec<f64> = bounds.iter().map(|[lo, hi]| rng.gen_range(*lo..=*hi)).collect();
            let objective = |x: &[f64]| {
                fused_correlation(eq, x, points, scaling.as_ref()).unwrap_or(f64::NEG_INFINITY)
            };
            let found = maximize_in_box(objective, &x0, &bounds, &opts);
            let score = found.value.is_finite().then_some(found.value);
            (score, found.x)
        })
        .collect();

    let mut best: Option<usize> = None;
    for (i, (score, _)) in outcomes.iter().enumerate() {
        if let Some(s) = score {
            if best.is_none_or(|b| *s > outcomes[b].0.expect("scored")) {
                best = Some(i);
            }
        }
    }
    let Some(best) = best else {
        return Err(Error::Degenerate(format!(
            "all {n_starts} starts of {eq} produced a constant predictor over {} variants",
            points.len()
        )));
    };
    let (score, params) = outcomes[best].clone();
    debug!("{eq}: best start {best} r={:?} params={params:?}", score);
    let mut model = FusionModel::new(eq, params)?.with_scaling(scaling);
    model.fitted_corr = score;
    Ok(FitResult {
        model,
        per_start_scores: outcomes.into_iter().map(|o| o.0).collect(),
        best_start_seed: start_seed(seed, best),
    })
}

/// Normalization, fit, and correlation report for one set of variants.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Calibration {
    pub stats: StatsTable,
    pub variants: Vec<NormalizedVariant>,
    pub fit: FitResult,
    pub report: CorrelationReport,
}

pub fn fit_points(variants: &[NormalizedVariant]) -> Result<Vec<FitPoint>> {
    variants
        .iter()
        .map(|v| {
            let y = v.downstream_score.ok_or_else(|| {
                Error::Validation(format!("variant '{}' has no downstream score", v.variant_id))
            })?;
            Ok(FitPoint {
                g_hat: v.g_hat,
                a_hat: v.a_hat,
                y,
            })
        })
        .collect()
}

/// Fits normalization (unless `stats` is given) and fusion on `records`.
pub fn calibrate_records(
    records: &[VariantRecord],
    scope: NormalizationScope,
    eq: FusionEquation,
    n_starts: usize,
    seed: u64,
    stats: Option<&StatsTable>,
) -> Result<Calibration> {
    let stats = match stats {
        Some(s) => s.clone(),
        None => fit_scoped(records, scope)?,
    };
    let variants = normalize_records(records, &stats)?;
    let points = fit_points(&variants)?;
    let fit = fit_fusion(eq, &points, n_starts, seed)?;
    let pred: Vec<f64> = points
        .iter()
        .map(|p| fit.model.predict(p.g_hat, p.a_hat))
        .collect::<Result<_>>()?;
    let y: Vec<f64> = points.iter().map(|p| p.y).collect();
    let report = correlation_report(&pred, &y)?;
    Ok(Calibration {
        stats,
        variants,
        fit,
        report,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn planted(n: usize, noise: f64, seed: u64) -> Vec<FitPoint> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        (0..n)
            .map(|_| {
                let g = rng.gen_range(-1.5..1.5);
                let a = rng.gen_range(-1.5..1.5);
                FitPoint {
                    g_hat: g,
                    a_hat: a,
                    y: 2.0 * g + a + 3.0 * g * a + rng.gen_range(-noise..=noise),
                }
            })
            .collect()
    }

    #[test]
    fn recovers_planted_bilinear() {
        let pts = planted(15, 1e-6, 5);
        let fit = fit_fusion(FusionEquation::ConstrainedPolynomial, &pts, 60, 1).unwrap();
        assert!(fit.model.fitted_corr.unwrap() >= 0.9999);
        let p = &fit.model.params;
        let (a, c) = (p[0] / p[1], p[2] / p[1]);
        assert!((a - 2.0).abs() / 2.0 < 0.02 && (c - 3.0).abs() / 3.0 < 0.02, "{p:?}");
    }

    #[test]
    fn constant_target_rejected() {
        let mut pts = planted(10, 0.0, 1);
        for p in &mut pts {
            p.y = 0.4;
        }
        assert!(fit_fusion(FusionEquation::ConstrainedPolynomial, &pts, 5, 1).is_err());
        assert!(fit_fusion(FusionEquation::ConstrainedPolynomial, &planted(2, 0.0, 1), 5, 1).is_err());
    }

    #[test]
    fn deterministic_and_bounded() {
        let pts = planted(12, 0.3, 9);
        for eq in FusionEquation::ALL {
            let f1 = fit_fusion(eq, &pts, 8, 77).unwrap();
            let f2 = fit_fusion(eq, &pts, 8, 77).unwrap();
            assert_eq!(f1, f2, "{eq}");
            eq.check_params(&f1.model.params).unwrap();
            let best = f1.per_start_scores.iter().flatten().fold(f64::NEG_INFINITY, |m, v| m.max(*v));
            assert_eq!(f1.model.fitted_corr, Some(best));
        }
    }

    #[test]
    fn more_starts_never_worse() {
        let pts = planted(15, 0.5, 3);
        let one = fit_fusion(FusionEquation::LogsumexpBlend, &pts, 1, 4).unwrap();
        let many = fit_fusion(FusionEquation::LogsumexpBlend, &pts, 400, 4).unwrap();
        assert!(many.model.fitted_corr.unwrap() >= one.model.fitted_corr.unwrap());
    }

    #[test]
    fn constant_predictor_is_undefined() {
        let pts = planted(6, 0.0, 2);
        assert_eq!(fused_correlation(FusionEquation::ConstrainedPolynomial, &[0.0, 0.0, 0.0], &pts, None), None);
    }
}
