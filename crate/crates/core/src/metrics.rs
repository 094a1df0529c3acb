//! Regression and calibration measures on `(μ, σ, y)` triples.
//!
//! Calibration is judged through the normalized residuals
//! `r_i = (μ_i - y_i) / σ_i`, which are standard normal for a perfectly
//! calibrated Gaussian predictor. [`ece`] compares bin occupancies in
//! quantile space, [`ws1`] is the 1-Wasserstein distance to `N(0, 1)`
//! (unbounded, grows linearly with miscalibration), [`etl`] averages the
//! worst 1% and [`ks`] is the Kolmogorov-Smirnov statistic.

use alloc::vec::Vec;
use serde::{Deserialize, Serialize};

use crate::linalg::Matrix;
use crate::math::{self, std_normal_cdf, std_normal_pdf, std_normal_quantile, std_normal_sf};
use crate::uncertainty::PredictiveDistribution;

/// σ values below this are raised to it before dividing.
pub const SIGMA_FLOOR: f64 = 1e-12;
/// Bin count used for ECE unless configured otherwise.
pub const DEFAULT_BINS: usize = 10;
/// Tail quantile for ETL.
pub const DEFAULT_TAIL_QUANTILE: f64 = 0.99;

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum MetricError {
    #[error("no points to evaluate")]
    Empty,
    #[error("length mismatch: {0} vs {1}")]
    Length(usize, usize),
    #[error("ECE needs at least 2 bins, got {0}")]
    TooFewBins(usize),
    #[error("non-finite residual at index {0}")]
    NonFinite(usize),
    #[error("quantile must lie in (0, 1), got {0}")]
    BadQuantile(f64),
    #[error("sigma must be non-negative")]
    NegativeSigma,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NormalizedResiduals {
    pub values: Vec<f64>,
    /// Points whose σ was raised to [`SIGMA_FLOOR`].
    pub floor_hits: usize,
}

impl NormalizedResiduals {
    pub fn from_values(values: Vec<f64>) -> Self {
        Self { values, floor_hits: 0 }
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }
}

fn check_lengths(mu: &[f64], sigma: &[f64], y: &[f64]) -> Result<(), MetricError> {
    if mu.len() != y.len() {
        return Err(MetricError::Length(mu.len(), y.len()));
    }
    if sigma.len() != y.len() {
        return Err(MetricError::Length(sigma.len(), y.len()));
    }
    if y.is_empty() {
        return Err(MetricError::Empty);
    }
    Ok(())
}

pub fn residuals(mu: &[f64], sigma: &[f64], y: &[f64]) -> Result<NormalizedResiduals, MetricError> {
    check_lengths(mu, sigma, y)?;
    let mut floor_hits = 0;
    let values = mu
        .iter()
        .zip(sigma)
        .zip(y)
        .map(|((&m, &s), &t)| {
            if s < SIGMA_FLOOR {
                floor_hits += 1;
            }
            (m - t) / s.max(SIGMA_FLOOR)
        })
        .collect();
    Ok(NormalizedResiduals { values, floor_hits })
}

pub fn rmse(mu: &[f64], y: &[f64]) -> Result<f64, MetricError> {
    if mu.len() != y.len() {
        return Err(MetricError::Length(mu.len(), y.len()));
    }
    if y.is_empty() {
        return Err(MetricError::Empty);
    }
    let sq: f64 = mu.iter().zip(y).map(|(m, t)| (m - t) * (m - t)).sum();
    Ok(math::sqrt(sq / y.len() as f64))
}

/// Mean of `log σ + (μ - y)² / (2σ²)`, constant dropped, σ floored.
pub fn mean_nll(mu: &[f64], sigma: &[f64], y: &[f64]) -> Result<f64, MetricError> {
    check_lengths(mu, sigma, y)?;
    let total: f64 = mu
        .iter()
        .zip(sigma)
        .zip(y)
        .map(|((&m, &s), &t)| {
            let s = s.max(SIGMA_FLOOR);
            math::ln(s) + (m - t) * (m - t) / (2.0 * s * s)
        })
        .sum();
    Ok(total / y.len() as f64)
}

/// Expected calibration error over `bins` equal-width bins of `Φ(r)`.
/// Bins are half-open except the last, which is closed.
pub fn ece(r: &NormalizedResiduals, bins: usize) -> Result<f64, MetricError> {
    if bins < 2 {
        return Err(MetricError::TooFewBins(bins));
    }
    if r.is_empty() {
        return Err(MetricError::Empty);
    }
    let mut counts = alloc::vec![0usize; bins];
    for (i, &v) in r.values.iter().enumerate() {
        if v.is_nan() {
            return Err(MetricError::NonFinite(i));
        }
        let u = std_normal_cdf(v);
        let j = (math::floor(u * bins as f64) as usize).min(bins - 1);
        counts[j] += 1;
    }
    // Σ |c_j / N - 1/B| = Σ |B c_j - N| / (B N); the numerator is an exact
    // integer, so e.g. a single occupied bin gives 2(B - 1)/B correctly rounded.
    let n = r.len() as u128;
    let b = bins as u128;
    let num: u128 = counts.iter().map(|&c| (b * c as u128).abs_diff(n)).sum();
    Ok(num as f64 / (b * n) as f64)
}

/// `∫_{-∞}^{t} Φ(s) ds`.
#[inline]
fn cdf_integral_below(t: f64) -> f64 {
    t * std_normal_cdf(t) + std_normal_pdf(t)
}

/// `∫_{t}^{∞} (1 - Φ(s)) ds`.
#[inline]
fn sf_integral_above(t: f64) -> f64 {
    std_normal_pdf(t) - t * std_normal_sf(t)
}

/// `∫_a^b Φ(t) dt` for `a ≤ b`, using whichever antiderivative is accurate.
fn cdf_integral(a: f64, b: f64) -> f64 {
    if a >= 0.0 {
        (b - a) - (sf_integral_above(a) - sf_integral_above(b))
    } else if b <= 0.0 {
        cdf_integral_below(b) - cdf_integral_below(a)
    } else {
        cdf_integral(a, 0.0) + cdf_integral(0.0, b)
    }
}

/// `∫_a^b |c - Φ(t)| dt` for a constant level `c ∈ (0, 1)`.
fn level_gap_integral(c: f64, a: f64, b: f64) -> f64 {
    if b <= a {
        return 0.0;
    }
    let cross = std_normal_quantile(c).expect("level strictly inside (0, 1)");
    let below = |a: f64, b: f64| c * (b - a) - cdf_integral(a, b);
    if cross <= a {
        -below(a, b)
    } else if cross >= b {
        below(a, b)
    } else {
        below(a, cross) - below(cross, b)
    }
    .max(0.0)
}

/// Exact 1-Wasserstein distance between the empirical distribution of `r`
/// and `N(0, 1)`: `∫ |F_emp(t) - Φ(t)| dt`, integrated piecewise between
/// the sorted residuals with closed-form antiderivatives of `Φ`.
pub fn ws1(r: &NormalizedResiduals) -> Result<f64, MetricError> {
    if r.is_empty() {
        return Err(MetricError::Empty);
    }
    if let Some(i) = r.values.iter().position(|v| !v.is_finite()) {
        return Err(MetricError::NonFinite(i));
    }
    let mut s = r.values.clone();
    s.sort_by(f64::total_cmp);
    let n = s.len();
    let mut total = cdf_integral_below(s[0]) + sf_integral_above(s[n - 1]);
    for k in 1..n {
        total += level_gap_integral(k as f64 / n as f64, s[k - 1], s[k]);
    }
    Ok(total)
}

/// Expected tail loss: mean of the `⌈(1 - q)·N⌉` largest `|r_i|`.
pub fn etl(r: &NormalizedResiduals, q: f64) -> Result<f64, MetricError> {
    if !(q > 0.0 && q < 1.0) {
        return Err(MetricError::BadQuantile(q));
    }
    if r.is_empty() {
        return Err(MetricError::Empty);
    }
    let n = r.len();
    // The epsilon keeps e.g. (1 - 0.99) * 100 = 1.0000000000000009 at 1.
    let k = (math::ceil((1.0 - q) * n as f64 - 1e-9) as usize).clamp(1, n);
    let mut abs: Vec<f64> = r.values.iter().map(|v| v.abs()).collect();
    if k < n {
        abs.select_nth_unstable_by(n - k, f64::total_cmp);
    }
    // After selection the k largest occupy the tail.
    let tail = &abs[n - k..];
    Ok(tail.iter().sum::<f64>() / k as f64)
}

/// Kolmogorov-Smirnov distance `sup_t |F_emp(t) - Φ(t)|`, evaluated on
/// both sides of every jump.
pub fn ks(r: &NormalizedResiduals) -> Result<f64, MetricError> {
    if r.is_empty() {
        return Err(MetricError::Empty);
    }
    let mut s = r.values.clone();
    s.sort_by(f64::total_cmp);
    let n = s.len() as f64;
    Ok(s.iter()
        .enumerate()
        .map(|(i, &v)| {
            let c = std_normal_cdf(v);
            (c - i as f64 / n).abs().max(((i + 1) as f64 / n - c).abs())
        })
        .fold(0.0, f64::max))
}

/// Per-fold bundle of every measure.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvalReport {
    pub rmse: f64,
    pub nll: f64,
    pub ece: f64,
    pub ws: f64,
    pub etl: f64,
    pub ks: f64,
    pub n_points: usize,
    pub sigma_floor_hits: usize,
}

impl EvalReport {
    pub const METRICS: [&'static str; 6] = ["rmse", "nll", "ece", "ws", "etl", "ks"];

    pub fn metric(&self, name: &str) -> Option<f64> {
        Some(match name {
            "rmse" => self.rmse,
            "nll" => self.nll,
            "ece" => self.ece,
            "ws" => self.ws,
            "etl" => self.etl,
            "ks" => self.ks,
            _ => return None,
        })
    }
}

/// All measures for flat `(μ, σ, y)` slices.
pub fn evaluate_triples(mu: &[f64], sigma: &[f64], y: &[f64], bins: usize) -> Result<EvalReport, MetricError> {
    check_lengths(mu, sigma, y)?;
    if sigma.iter().any(|s| *s < 0.0) {
        return Err(MetricError::NegativeSigma);
    }
    let r = residuals(mu, sigma, y)?;
    Ok(EvalReport {
        rmse: rmse(mu, y)?,
        nll: mean_nll(mu, sigma, y)?,
        ece: ece(&r, bins)?,
        ws: ws1(&r)?,
        etl: etl(&r, DEFAULT_TAIL_QUANTILE)?,
        ks: ks(&r)?,
        n_points: y.len(),
        sigma_floor_hits: r.floor_hits,
    })
}

/// All measures for a predictive distribution; output coordinates are pooled.
pub fn evaluate(pred: &PredictiveDistribution, y: &Matrix, bins: usize) -> Result<EvalReport, MetricError> {
    if pred.mu.shape() != y.shape() {
        return Err(MetricError::Length(pred.mu.as_slice().len(), y.as_slice().len()));
    }
    evaluate_triples(pred.mu.as_slice(), pred.sigma.as_slice(), y.as_slice(), bins)
}

/// Distances of `N(μ, σ)` from `N(0, 1)`, the reference curves behind the
/// WS-versus-ECE comparison.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CurvePoint {
    /// 1-Wasserstein distance, numerically integrated.
    pub ws1: f64,
    /// 2-Wasserstein distance, numerically integrated.
    pub ws2: f64,
    /// 2-Wasserstein distance from the Gaussian closed form.
    pub ws2_closed: f64,
    /// ECE of an infinite sample, from exact bin probabilities.
    pub ece: f64,
}

/// Composite Simpson rule on `[a, b]` with `n` (even) panels.
fn simpson(f: impl Fn(f64) -> f64, a: f64, b: f64, n: usize) -> f64 {
    if b <= a {
        return 0.0;
    }
    let n = n + n % 2;
    let h = (b - a) / n as f64;
    let mut acc = f(a) + f(b);
    for i in 1..n {
        let w = if i % 2 == 1 { 4.0 } else { 2.0 };
        acc += w * f(a + i as f64 * h);
    }
    acc * h / 3.0
}

pub fn analytic_curves(mu: f64, sigma: f64, bins: usize) -> Result<CurvePoint, MetricError> {
    if !(sigma >= 0.0) {
        return Err(MetricError::NegativeSigma);
    }
    if bins < 2 {
        return Err(MetricError::TooFewBins(bins));
    }
    // Monotone coupling in 1D: X = μ + σZ against Z, so the distances are
    // moments of the affine gap μ + (σ - 1)Z under the standard normal.
    const SPAN: f64 = 12.0;
    const PANELS: usize = 4000;
    let slope = sigma - 1.0;
    let gap = |z: f64| mu + slope * z;
    let abs_moment = |z: f64| gap(z).abs() * std_normal_pdf(z);
    let ws1 = if slope != 0.0 {
        let kink = (-mu / slope).clamp(-SPAN, SPAN);
        simpson(abs_moment, -SPAN, kink, PANELS) + simpson(abs_moment, kink, SPAN, PANELS)
    } else {
        mu.abs()
    };
    let ws2 = math::sqrt(simpson(|z| gap(z) * gap(z) * std_normal_pdf(z), -SPAN, SPAN, 2 * PANELS));
    let ws2_closed = math::sqrt(mu * mu + slope * slope);

    let edge = |j: usize| -> f64 {
        if j == 0 {
            f64::NEG_INFINITY
        } else if j == bins {
            f64::INFINITY
        } else {
            std_normal_quantile(j as f64 / bins as f64).expect("interior edge")
        }
    };
    let mass_below = |t: f64| -> f64 {
        if sigma == 0.0 {
            if mu < t {
                1.0
            } else {
                0.0
            }
        } else {
            std_normal_cdf((t - mu) / sigma)
        }
    };
    let target = 1.0 / bins as f64;
    let ece = (0..bins).map(|j| (mass_below(edge(j + 1)) - mass_below(edge(j)) - target).abs()).sum();
    Ok(CurvePoint { ws1, ws2, ws2_closed, ece })
}

#[cfg(test)]
mod tests {
    use super::*;
    use alloc::vec;

    fn r(values: &[f64]) -> NormalizedResiduals {
        NormalizedResiduals::from_values(values.to_vec())
    }

    /// Midpoint-rule integration of |F_emp - Φ| between consecutive jump
    /// points, so the integrand is continuous on every segment.
    fn ws1_oracle(values: &[f64]) -> f64 {
        let mut s = values.to_vec();
        s.sort_by(f64::total_cmp);
        let mut cuts = vec![s[0].min(0.0) - 12.0];
        cuts.extend_from_slice(&s);
        cuts.push(s[s.len() - 1].max(0.0) + 12.0);
        let f = |t: f64| {
            let cnt = s.partition_point(|&v| v <= t) as f64 / s.len() as f64;
            (cnt - std_normal_cdf(t)).abs()
        };
        let mut acc = 0.0;
        for w in cuts.windows(2) {
            let (a, b, n) = (w[0], w[1], 20_000);
            let h = (b - a) / n as f64;
            acc += (0..n).map(|i| f(a + (i as f64 + 0.5) * h)).sum::<f64>() * h;
        }
        acc
    }

    #[test]
    fn residual_examples() {
        assert_eq!(residuals(&[1.0, 2.0], &[1.0, 3.0], &[1.0, 2.0]).unwrap().values, vec![0.0, 0.0]);
        assert_eq!(residuals(&[3.0], &[1.0], &[1.0]).unwrap().values, vec![2.0]);
        let floored = residuals(&[1.0], &[0.0], &[0.0]).unwrap();
        assert_eq!(floored.values, vec![1e12]);
        assert_eq!(floored.floor_hits, 1);
    }

    #[test]
    fn rmse_and_nll_examples() {
        assert_eq!(rmse(&[1.0, 2.0], &[1.0, 2.0]).unwrap(), 0.0);
        assert!((rmse(&[3.0, 4.0], &[0.0, 0.0]).unwrap() - 12.5f64.sqrt()).abs() < 1e-15);
        assert!((rmse(&[1.5, -0.5], &[1.0, -1.0]).unwrap() - 0.5).abs() < 1e-15);
        assert_eq!(rmse(&[], &[]), Err(MetricError::Empty));
        assert_eq!(mean_nll(&[1.0], &[1.0], &[1.0]).unwrap(), 0.0);
        assert_eq!(mean_nll(&[2.0], &[1.0], &[0.0]).unwrap(), 2.0);
        assert!((mean_nll(&[0.0], &[core::f64::consts::E], &[0.0]).unwrap() - 1.0).abs() < 1e-15);
    }

    #[test]
    fn ece_examples() {
        assert!((ece(&r(&[10.0; 50]), 10).unwrap() - 1.8).abs() < 1e-12);
        let mids: Vec<f64> =
            (0..10).flat_map(|j| vec![std_normal_quantile((j as f64 + 0.5) / 10.0).unwrap(); 3]).collect();
        assert!(ece(&r(&mids), 10).unwrap().abs() < 1e-12);
        assert_eq!(ece(&r(&[0.0]), 1), Err(MetricError::TooFewBins(1)));
    }

    #[test]
    fn ws1_examples() {
        let point = ws1(&r(&[0.0])).unwrap();
        assert!((point - (2.0 / core::f64::consts::PI).sqrt()).abs() < 1e-12);
        let two = ws1(&r(&[-1.0, 1.0])).unwrap();
        let oracle = ws1_oracle(&[-1.0, 1.0]);
        assert!((two - oracle).abs() < 1e-6, "{two} vs {oracle}");
        assert!((two - 0.535).abs() < 5e-4, "{two}");
        assert_eq!(ws1(&r(&[f64::NAN])), Err(MetricError::NonFinite(0)));
    }

    #[test]
    fn ws1_matches_oracle_on_irregular_samples() {
        let samples = [vec![-3.0, -0.2, 0.1, 0.1, 2.5, 7.0], vec![5.0, 6.0], vec![-9.0, -8.5, -0.3]];
        for s in &samples {
            let exact = ws1(&r(s)).unwrap();
            let oracle = ws1_oracle(s);
            assert!((exact - oracle).abs() < 1e-5, "{s:?}: {exact} vs {oracle}");
        }
    }

    #[test]
    fn etl_examples() {
        let ramp: Vec<f64> = (1..=100).map(|v| v as f64).collect();
        assert_eq!(etl(&r(&ramp), 0.99).unwrap(), 100.0);
        assert_eq!(etl(&r(&[-2.5; 40]), 0.99).unwrap(), 2.5);
        let two_tail: Vec<f64> = (1..=200).map(|v| -(v as f64)).collect();
        assert_eq!(etl(&r(&two_tail), 0.99).unwrap(), 199.5);
        assert_eq!(etl(&r(&[1.0]), 1.0), Err(MetricError::BadQuantile(1.0)));
    }

    #[test]
    fn ks_examples() {
        assert!((ks(&r(&[0.0])).unwrap() - 0.5).abs() < 1e-15);
        assert!((ks(&r(&[10.0; 4])).unwrap() - 1.0).abs() < 1e-12);
    }

    #[test]
    fn curves_special_points() {
        let shift = analytic_curves(3.0, 1.0, 10).unwrap();
        assert!((shift.ws1 - 3.0).abs() < 1e-12);
        let same = analytic_curves(0.0, 1.0, 10).unwrap();
        assert!(same.ws1.abs() < 1e-12 && same.ws2.abs() < 1e-12 && same.ece.abs() < 1e-12);
        let collapsed = analytic_curves(0.0, 0.0, 10).unwrap();
        assert!((collapsed.ws1 - (2.0 / core::f64::consts::PI).sqrt()).abs() < 1e-8);
        assert!((collapsed.ws2 - 1.0).abs() < 1e-8);
        assert_eq!(collapsed.ws2_closed, 1.0);
        assert!((collapsed.ece - 1.8).abs() < 1e-12);
    }

    #[test]
    fn curves_ws1_matches_folded_normal() {
        // E|a + bZ| for Z ~ N(0,1), b ≠ 0.
        let folded = |a: f64, b: f64| {
            let s = b.abs();
            let k = a / s;
            s * ((2.0 / core::f64::consts::PI).sqrt() * (-0.5 * k * k).exp() + k * (1.0 - 2.0 * std_normal_cdf(-k)))
        };
        for &(mu, sigma) in &[(0.5, 0.3), (-1.2, 2.0), (0.0, 4.0), (2.0, 0.05)] {
            let p = analytic_curves(mu, sigma, 10).unwrap();
            assert!((p.ws1 - folded(mu, sigma - 1.0)).abs() < 1e-8, "({mu},{sigma})");
            assert!((p.ws2 - p.ws2_closed).abs() < 1e-8);
        }
    }
}
