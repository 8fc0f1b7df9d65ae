//! Scalar fusion of normalized geometry and appearance scores.
//!
//! The primary model is the constrained bilinear form `aĜ + bÂ + cĜÂ`. The
//! remaining equations form an ablation zoo sharing one parametric interface,
//! so every one of them can be fitted by the same correlation maximizer.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Lower end of the unit range used by `minmax_unit` inputs.
pub const UNIT_EPS: f64 = 1e-3;
const DENOM_FLOOR: f64 = 1e-12;
/// Below this |p| the generalized mean is evaluated as its geometric limit.
const GEOMETRIC_LIMIT: f64 = 1e-9;

/// Scores the released bilinear model: `aĜ + bÂ + cĜÂ` with nonnegative coefficients.
pub fn sadge_score(g_hat: f64, a_hat: f64, a: f64, b: f64, c: f64) -> Result<f64> {
    if a < 0.0 || b < 0.0 || c < 0.0 {
        return Err(Error::InvalidParameter(format!(
            "constrained fusion needs nonnegative coefficients, got a={a} b={b} c={c}"
        )));
    }
    Ok(a * g_hat + b * a_hat + c * g_hat * a_hat)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum FusionEquation {
    ConstrainedPolynomial,
    InteractionPolynomial,
    SadgeLinear,
    WeightedHarmonic,
    GeneralizedMean,
    FbetaScore,
    TverskyIndex,
    EccvSynergisticGating,
    GeneralizedMeanSoftplus,
    FbetaSoftplus,
    TverskySoftplus,
    SoftplusLinear,
    RobustSaturatingSum,
    AtanBlend,
    LogsumexpBlend,
    GatedBlend,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum InputTransform {
    RawZ,
    SoftplusZ,
    MinmaxUnit,
}

use FusionEquation::*;

impl FusionEquation {
    pub const ALL: [FusionEquation; 16] = [
        ConstrainedPolynomial,
        InteractionPolynomial,
        SadgeLinear,
        WeightedHarmonic,
        GeneralizedMean,
        FbetaScore,
        TverskyIndex,
        EccvSynergisticGating,
        GeneralizedMeanSoftplus,
        FbetaSoftplus,
        TverskySoftplus,
        SoftplusLinear,
        RobustSaturatingSum,
        AtanBlend,
        LogsumexpBlend,
        GatedBlend,
    ];

    pub fn id(self) -> &'static str {
        match self {
            ConstrainedPolynomial => "constrained_polynomial",
            InteractionPolynomial => "interaction_polynomial",
            SadgeLinear => "sadge_linear",
            WeightedHarmonic => "weighted_harmonic",
            GeneralizedMean => "generalized_mean",
            FbetaScore => "fbeta_score",
            TverskyIndex => "tversky_index",
            EccvSynergisticGating => "eccv_synergistic_gating",
            GeneralizedMeanSoftplus => "generalized_mean_softplus",
            FbetaSoftplus => "fbeta_softplus",
            TverskySoftplus => "tversky_softplus",
            SoftplusLinear => "softplus_linear",
            RobustSaturatingSum => "robust_saturating_sum",
            AtanBlend => "atan_blend",
            LogsumexpBlend => "logsumexp_blend",
            GatedBlend => "gated_blend",
        }
    }

    pub fn param_names(self) -> &'static [&'static str] {
        match self {
            ConstrainedPolynomial | InteractionPolynomial => &["a", "b", "c"],
            SadgeLinear | WeightedHarmonic | SoftplusLinear | RobustSaturatingSum | AtanBlend => &["w"],
            GeneralizedMean | GeneralizedMeanSoftplus => &["w", "p"],
            FbetaScore | FbetaSoftplus => &["beta"],
            TverskyIndex | TverskySoftplus => &["alpha", "beta"],
            EccvSynergisticGating | GatedBlend => &["tau"],
            LogsumexpBlend => &["w", "tau"],
        }
    }

    pub fn arity(self) -> usize {
        self.param_names().len()
    }

    /// Closed parameter boxes. Open lower ends such as `τ > 0` are represented
    /// by a small positive floor.
    pub fn bounds(self) -> Vec<[f64; 2]> {
        match self {
            ConstrainedPolynomial => vec![[0.0, 2.0]; 3],
            InteractionPolynomial => vec![[-2.0, 2.0]; 3],
            SadgeLinear | WeightedHarmonic | SoftplusLinear | RobustSaturatingSum | AtanBlend => {
                vec![[0.0, 1.0]]
            }
            GeneralizedMean | GeneralizedMeanSoftplus => vec![[0.0, 1.0], [-2.0, 2.0]],
            FbetaScore | FbetaSoftplus => vec![[0.01, 4.0]],
            TverskyIndex | TverskySoftplus => vec![[0.0, 2.0]; 2],
            EccvSynergisticGating | GatedBlend => vec![[0.05, 8.0]],
            LogsumexpBlend => vec![[0.0, 1.0], [0.05, 8.0]],
        }
    }

    pub fn input_transform(self) -> InputTransform {
        match self {
            WeightedHarmonic | GeneralizedMean | FbetaScore | TverskyIndex => InputTransform::MinmaxUnit,
            GeneralizedMeanSoftplus | FbetaSoftplus | TverskySoftplus | SoftplusLinear => {
                InputTransform::SoftplusZ
            }
            _ => InputTransform::RawZ,
        }
    }

    /// The closed form on already-transformed inputs `(g, a)`.
    pub fn closed_form(self, p: &[f64], g: f64, a: f64) -> Result<f64> {
        if p.len() != self.arity() {
            return Err(Error::InvalidParameter(format!(
                "{} takes {} parameters, got {}",
                self.id(),
                self.arity(),
                p.len()
            )));
        }
        let v = match self {
            ConstrainedPolynomial | InteractionPolynomial => p[0] * g + p[1] * a + p[2] * g * a,
            SadgeLinear | SoftplusLinear => p[0] * g + (1.0 - p[0]) * a,
            WeightedHarmonic => ratio_form(g, a, || ratio(1.0, weighted(p[0], g) + weighted(1.0 - p[0], a)))?,
            GeneralizedMean | GeneralizedMeanSoftplus => generalized_mean(p[0], p[1], g, a),
            FbetaScore | FbetaSoftplus => {
                let b2 = p[0] * p[0];
                ratio_form(g, a, || ratio(1.0 + b2, weighted(b2, a) + 1.0 / g))?
            }
            TverskyIndex | TverskySoftplus => ratio_form(g, a, || {
                let den = 1.0
                    + weighted(p[0], a) * (1.0 - a).max(0.0)
                    + weighted(p[1], g) * (1.0 - g).max(0.0);
                ratio(1.0, den)
            })?,
            EccvSynergisticGating => a * logistic(g / p[0]) + g * logistic(a / p[0]),
            RobustSaturatingSum => p[0] * g.tanh() + (1.0 - p[0]) * a.tanh(),
            AtanBlend => p[0] * g.atan() + (1.0 - p[0]) * a.atan(),
            LogsumexpBlend => {
                let (w, tau) = (p[0], p[1]);
                let u = w * g / tau;
                let v = (1.0 - w) * a / tau;
                let m = u.max(v);
                tau * (m + ((u - m).exp() + (v - m).exp()).ln())
            }
            GatedBlend => a + logistic(a / p[0]) * g,
        };
        if !v.is_finite() {
            return Err(Error::Degenerate(format!(
                "{} produced a non-finite value at g={g}, a={a}",
                self.id()
            )));
        }
        Ok(v)
    }

    pub fn check_params(self, params: &[f64]) -> Result<()> {
        let bounds = self.bounds();
        if params.len() != bounds.len() {
            return Err(Error::InvalidParameter(format!(
                "{} takes {} parameters, got {}",
                self.id(),
                bounds.len(),
                params.len()
            )));
        }
        for ((name, v), [lo, hi]) in self.param_names().iter().zip(params).zip(bounds) {
            if !(lo..=hi).contains(v) {
                return Err(Error::InvalidParameter(format!(
                    "{}: parameter {name}={v} outside [{lo}, {hi}]",
                    self.id()
                )));
            }
        }
        Ok(())
    }
}

impl fmt::Display for FusionEquation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.id())
    }
}

impl FromStr for FusionEquation {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        FusionEquation::ALL
            .iter()
            .copied()
            .find(|e| e.id() == s)
            .ok_or_else(|| Error::InvalidParameter(format!("unknown fusion equation '{s}'")))
    }
}

fn ratio(num: f64, den: f64) -> Result<f64> {
    if den.abs() < DENOM_FLOOR {
        if num == 0.0 {
            return Ok(0.0);
        }
        return Err(Error::Degenerate(format!(
            "fusion denominator {den:e} underflows with numerator {num:e}"
        )));
    }
    Ok(num / den)
}

/// Ratio forms are evaluated divided through by `g·a`, which keeps them
/// well-conditioned for tiny positive inputs. A zero input gives the limit 0.
fn ratio_form(g: f64, a: f64, f: impl FnOnce() -> Result<f64>) -> Result<f64> {
    if g == 0.0 || a == 0.0 {
        return Ok(0.0);
    }
    if g < 0.0 || a < 0.0 {
        return Err(Error::InvalidParameter(format!(
            "ratio fusion needs nonnegative inputs, got g={g}, a={a}"
        )));
    }
    f()
}

fn weighted(w: f64, x: f64) -> f64 {
    if w == 0.0 {
        0.0
    } else {
        w / x
    }
}

fn generalized_mean(w: f64, p: f64, g: f64, a: f64) -> f64 {
    if p.abs() < GEOMETRIC_LIMIT {
        (w * g.ln() + (1.0 - w) * a.ln()).exp()
    } else {
        (w * g.powf(p) + (1.0 - w) * a.powf(p)).powf(1.0 / p)
    }
}

pub fn logistic(x: f64) -> f64 {
    if x >= 0.0 {
        1.0 / (1.0 + (-x).exp())
    } else {
        let e = x.exp();
        e / (1.0 + e)
    }
}

/// `ln(1 + e^x)` without overflow.
pub fn softplus(x: f64) -> f64 {
    x.max(0.0) + (-x.abs()).exp().ln_1p()
}

/// Per-axis affine map of the calibration set onto `[UNIT_EPS, 1]`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct UnitScaling {
    pub g_min: f64,
    pub g_max: f64,
    pub a_min: f64,
    pub a_max: f64,
}

impl UnitScaling {
    /// Fits from calibration points given as `(Ĝ, Â)`.
    pub fn fit(points: &[(f64, f64)]) -> Result<Self> {
        if points.is_empty() {
            return Err(Error::Degenerate("cannot fit unit scaling on no points".into()));
        }
        let mut s = UnitScaling {
            g_min: f64::INFINITY,
            g_max: f64::NEG_INFINITY,
            a_min: f64::INFINITY,
            a_max: f64::NEG_INFINITY,
        };
        for &(g, a) in points {
            s.g_min = s.g_min.min(g);
            s.g_max = s.g_max.max(g);
            s.a_min = s.a_min.min(a);
            s.a_max = s.a_max.max(a);
        }
        Ok(s)
    }

    fn map(x: f64, lo: f64, hi: f64) -> f64 {
        if hi <= lo {
            return 1.0;
        }
        (UNIT_EPS + (1.0 - UNIT_EPS) * (x - lo) / (hi - lo)).clamp(UNIT_EPS, 1.0)
    }

    pub fn apply(&self, g: f64, a: f64) -> (f64, f64) {
        (
            Self::map(g, self.g_min, self.g_max),
            Self::map(a, self.a_min, self.a_max),
        )
    }
}

/// Applies `eq`'s input transform and closed form to one `(Ĝ, Â)` point.
/// `minmax_unit` equations require the calibration-set scaling.
pub fn evaluate_fusion(
    eq: FusionEquation,
    params: &[f64],
    g_hat: f64,
    a_hat: f64,
    scaling: Option<&UnitScaling>,
) -> Result<f64> {
    let (g, a) = match eq.input_transform() {
        InputTransform::RawZ => (g_hat, a_hat),
        InputTransform::SoftplusZ => (softplus(g_hat), softplus(a_hat)),
        InputTransform::MinmaxUnit => scaling
            .ok_or_else(|| {
                Error::InvalidParameter(format!("{} needs a fitted unit scaling", eq.id()))
            })?
            .apply(g_hat, a_hat),
    };
    eq.closed_form(params, g, a)
}

/// A fitted (or hand-specified) fusion, serializable as a JSON record.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FusionModel {
    pub equation_id: FusionEquation,
    pub params: Vec<f64>,
    pub bounds: Vec<[f64; 2]>,
    pub input_transform: InputTransform,
    pub fitted_corr: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub scaling: Option<UnitScaling>,
}

impl FusionModel {
    pub fn new(eq: FusionEquation, params: Vec<f64>) -> Result<Self> {
        eq.check_params(&params)?;
        Ok(FusionModel {
            equation_id: eq,
            params,
            bounds: eq.bounds(),
            input_transform: eq.input_transform(),
            fitted_corr: None,
            scaling: None,
        })
    }

    /// The bilinear model with the published coefficients.
    pub fn released() -> Self {
        FusionModel::new(ConstrainedPolynomial, vec![0.0, 1.8548, 1.3399]).expect("in bounds")
    }

    pub fn with_scaling(mut self, scaling: Option<UnitScaling>) -> Self {
        self.scaling = scaling;
        self
    }

    pub fn validate(&self) -> Result<()> {
        self.equation_id.check_params(&self.params)?;
        if self.bounds != self.equation_id.bounds() || self.input_transform != self.equation_id.input_transform() {
            return Err(Error::InvalidParameter(format!(
                "{}: bounds or input transform disagree with the equation",
                self.equation_id
            )));
        }
        if self.input_transform == InputTransform::MinmaxUnit && self.scaling.is_none() {
            return Err(Error::InvalidParameter(format!(
                "{} model is missing its unit scaling",
                self.equation_id
            )));
        }
        Ok(())
    }

    pub fn predict(&self, g_hat: f64, a_hat: f64) -> Result<f64> {
        evaluate_fusion(self.equation_id, &self.params, g_hat, a_hat, self.scaling.as_ref())
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string(self).expect("fusion model serializes")
    }

    pub fn from_json(s: &str) -> Result<Self> {
        let m: FusionModel = serde_json::from_str(s)
            .map_err(|e| Error::InvalidParameter(format!("bad fusion model record: {e}")))?;
        m.validate()?;
        Ok(m)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    /// Direct transcriptions of the documented formulas, with no numerical care.
    fn naive(eq: FusionEquation, p: &[f64], gz: f64, az: f64, s: &UnitScaling) -> f64 {
        let sp = |x: f64| (1.0 + x.exp()).ln();
        let sig = |x: f64| 1.0 / (1.0 + (-x).exp());
        let unit = |x: f64, lo: f64, hi: f64| (1e-3 + 0.999 * (x - lo) / (hi - lo)).clamp(1e-3, 1.0);
        let (ug, ua) = (unit(gz, s.g_min, s.g_max), unit(az, s.a_min, s.a_max));
        let gm = |w: f64, q: f64, g: f64, a: f64| {
            if q == 0.0 {
                g.powf(w) * a.powf(1.0 - w)
            } else {
                (w * g.powf(q) + (1.0 - w) * a.powf(q)).powf(1.0 / q)
            }
        };
        let fb = |b: f64, g: f64, a: f64| (1.0 + b * b) * g * a / (b * b * g + a);
        let tv = |al: f64, be: f64, g: f64, a: f64| {
            let (cg, ca) = (if g < 1.0 { 1.0 - g } else { 0.0 }, if a < 1.0 { 1.0 - a } else { 0.0 });
            g * a / (g * a + al * g * ca + be * a * cg)
        };
        match eq {
            ConstrainedPolynomial | InteractionPolynomial => p[0] * gz + p[1] * az + p[2] * gz * az,
            SadgeLinear => p[0] * gz + (1.0 - p[0]) * az,
            WeightedHarmonic => 1.0 / (p[0] / ug + (1.0 - p[0]) / ua),
            GeneralizedMean => gm(p[0], p[1], ug, ua),
            FbetaScore => fb(p[0], ug, ua),
            TverskyIndex => tv(p[0], p[1], ug, ua),
            EccvSynergisticGating => az * sig(gz / p[0]) + gz * sig(az / p[0]),
            GeneralizedMeanSoftplus => gm(p[0], p[1], sp(gz), sp(az)),
            FbetaSoftplus => fb(p[0], sp(gz), sp(az)),
            TverskySoftplus => tv(p[0], p[1], sp(gz), sp(az)),
            SoftplusLinear => p[0] * sp(gz) + (1.0 - p[0]) * sp(az),
            RobustSaturatingSum => p[0] * gz.tanh() + (1.0 - p[0]) * az.tanh(),
            AtanBlend => p[0] * gz.atan() + (1.0 - p[0]) * az.atan(),
            LogsumexpBlend => p[1] * ((p[0] * gz / p[1]).exp() + ((1.0 - p[0]) * az / p[1]).exp()).ln(),
            GatedBlend => az + sig(az / p[0]) * gz,
        }
    }

    #[test]
    fn released_example() {
        let v = sadge_score(1.0, 1.0, 0.0, 1.8548, 1.3399).unwrap();
        assert!((v - 3.1947).abs() < 1e-12);
        assert_eq!(sadge_score(0.0, 0.0, 0.7, 0.2, 1.1).unwrap(), 0.0);
        assert_eq!(sadge_score(-0.4, 2.5, 1.0, 0.0, 0.0).unwrap(), -0.4);
        assert!(sadge_score(1.0, 1.0, -0.1, 1.0, 1.0).is_err());
    }

    #[test]
    fn released_model_predicts() {
        let m = FusionModel::released();
        assert!((m.predict(1.0, 1.0).unwrap() - 3.1947).abs() < 1e-12);
    }

    #[test]
    fn arities() {
        let got: Vec<usize> = FusionEquation::ALL.iter().map(|e| e.arity()).collect();
        assert_eq!(got, vec![3, 3, 1, 1, 2, 1, 2, 1, 2, 1, 2, 1, 1, 1, 2, 1]);
        for e in FusionEquation::ALL {
            assert_eq!(e.bounds().len(), e.arity());
            assert!(e.bounds().iter().all(|b| b[0].is_finite() && b[1].is_finite() && b[0] < b[1]));
            assert_eq!(e.id().parse::<FusionEquation>().unwrap(), e);
        }
    }

    #[test]
    fn simple_cases() {
        for x in [-1.3, 0.0, 0.4, 2.0] {
            let v = evaluate_fusion(SadgeLinear, &[0.5], x, x, None).unwrap();
            assert!((v - x).abs() < 1e-15);
        }
        assert!((FbetaScore.closed_form(&[1.0], 0.5, 0.5).unwrap() - 0.5).abs() < 1e-15);
        let c0 = ConstrainedPolynomial.closed_form(&[0.3, 0.9, 0.0], 1.7, -0.6).unwrap();
        assert_eq!(c0, 0.3 * 1.7 + 0.9 * -0.6);
    }

    #[test]
    fn ratio_limits() {
        assert_eq!(FbetaScore.closed_form(&[1.0], 0.0, 0.0).unwrap(), 0.0);
        assert_eq!(WeightedHarmonic.closed_form(&[0.5], 0.0, 0.0).unwrap(), 0.0);
        assert_eq!(TverskyIndex.closed_form(&[1.0, 1.0], 0.0, 0.0).unwrap(), 0.0);
        assert!(ratio(1.0, 1e-14).is_err());
    }

    #[test]
    fn minmax_requires_scaling() {
        assert!(evaluate_fusion(FbetaScore, &[1.0], 0.0, 0.0, None).is_err());
        let s = UnitScaling::fit(&[(-1.0, -2.0), (1.0, 2.0)]).unwrap();
        assert_eq!(s.apply(-1.0, 2.0), (UNIT_EPS, 1.0));
        assert_eq!(s.apply(-5.0, 9.0), (UNIT_EPS, 1.0));
    }

    #[test]
    fn grid_matches_naive_forms() {
        let mut rng = ChaCha8Rng::seed_from_u64(2024);
        let scaling = UnitScaling { g_min: -2.5, g_max: 2.5, a_min: -2.0, a_max: 3.0 };
        for eq in FusionEquation::ALL {
            for _ in 0..100 {
                let gz = rng.gen_range(-2.5..2.5);
                let az = rng.gen_range(-2.0..3.0);
                let p: Vec<f64> = eq.bounds().iter().map(|b| rng.gen_range(b[0]..=b[1])).collect();
                let got = evaluate_fusion(eq, &p, gz, az, Some(&scaling)).unwrap();
                let want = naive(eq, &p, gz, az, &scaling);
                assert!(
                    (got - want).abs() <= 1e-9 * want.abs().max(1.0),
                    "{eq} p={p:?} g={gz} a={az}: {got} vs {want}"
                );
            }
        }
    }

    #[test]
    fn generalized_mean_is_continuous_at_zero() {
        let a = generalized_mean(0.3, 1e-10, 0.2, 0.9);
        let b = generalized_mean(0.3, 1e-7, 0.2, 0.9);
        assert!((a - b).abs() < 1e-6);
    }

    #[test]
    fn softplus_inputs_make_ratios_total() {
        for eq in [FbetaSoftplus, TverskySoftplus, GeneralizedMeanSoftplus] {
            for &(g, a) in &[(-40.0, -40.0), (30.0, -30.0), (0.0, 0.0), (5.0, 5.0)] {
                let p: Vec<f64> = eq.bounds().iter().map(|b| b[0]).collect();
                assert!(evaluate_fusion(eq, &p, g, a, None).unwrap().is_finite());
                let p: Vec<f64> = eq.bounds().iter().map(|b| b[1]).collect();
                assert!(evaluate_fusion(eq, &p, g, a, None).unwrap().is_finite());
            }
        }
    }

    #[test]
    fn model_json_round_trip() {
        let m = FusionModel::new(TverskyIndex, vec![0.4, 1.2])
            .unwrap()
            .with_scaling(Some(UnitScaling { g_min: -1.0, g_max: 1.0, a_min: 0.0, a_max: 2.0 }));
        let back = FusionModel::from_json(&m.to_json()).unwrap();
        assert_eq!(back, m);
        assert!(FusionModel::new(ConstrainedPolynomial, vec![-0.1, 0.0, 0.0]).is_err());
        assert!(FusionModel::new(SadgeLinear, vec![0.1, 0.2]).is_err());
        assert!(FusionModel::from_json(&FusionModel::new(FbetaScore, vec![1.0]).unwrap().to_json()).is_err());
    }

    proptest! {
        #[test]
        fn bilinear_monotone_on_positive_quadrant(
            a in 0.0f64..2.0, b in 0.0f64..2.0, c in 0.0f64..2.0,
            g in 0.0f64..5.0, x in 0.0f64..5.0, dg in 0.0f64..1.0, dx in 0.0f64..1.0,
        ) {
            let base = sadge_score(g, x, a, b, c).unwrap();
            prop_assert!(sadge_score(g + dg, x, a, b, c).unwrap() >= base);
            prop_assert!(sadge_score(g, x + dx, a, b, c).unwrap() >= base);
        }

        #[test]
        fn evaluation_is_batch_independent(points in proptest::collection::vec((-3.0f64..3.0, -3.0f64..3.0), 1..30)) {
            let m = FusionModel::released();
            let forward: Vec<u64> = points.iter().map(|&(g, a)| m.predict(g, a).unwrap().to_bits()).collect();
            let backward: Vec<u64> = points.iter().rev().map(|&(g, a)| m.predict(g, a).unwrap().to_bits()).collect();
            prop_assert_eq!(forward, backward.into_iter().rev().collect::<Vec<_>>());
        }

        #[test]
        fn softplus_positive(x in -700.0f64..700.0) {
            prop_assert!(softplus(x) > 0.0 || x < -700.0);
            prop_assert!(softplus(x) >= x);
        }
    }
}
