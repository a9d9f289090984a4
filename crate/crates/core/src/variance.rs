//! Variance estimators and confidence intervals for the weighted estimator.

use std::fmt;

use serde::{Deserialize, Serialize, Serializer};

use crate::error::{Error, Result};
use crate::estimators::{resolve_scheme, weighted_difference};
use crate::model::{differences_for, Estimand, MpcrDataset, PairDifference, Response, WeightScheme};
use crate::special::{normal_quantile, t_quantile};

/// `m / ((m - 1) n^2) * sum_k (w~_k D_k - n psi / m)^2`.
pub fn sigma_hat(diffs: &[PairDifference], n: f64) -> f64 {
    cross_hat(diffs, diffs, n)
}

/// Cross-product form of [`sigma_hat`] for two series sharing weights.
pub fn cross_hat(a: &[PairDifference], b: &[PairDifference], n: f64) -> f64 {
    let m = a.len() as f64;
    let pa = weighted_difference(a);
    let pb = weighted_difference(b);
    let s: f64 = a
        .iter()
        .zip(b)
        .map(|(x, y)| {
            (x.normalized_weight * x.observed_difference - n * pa / m)
                * (y.normalized_weight * y.observed_difference - n * pb / m)
        })
        .sum();
    m / ((m - 1.0) * n * n) * s
}

/// `(sum_k w~_k^2 / n^3) * sum_k w~_k (D_k - psi)^2`.
pub fn delta_hat(diffs: &[PairDifference], n: f64) -> f64 {
    let psi = weighted_difference(diffs);
    let sw2: f64 = diffs.iter().map(|d| d.normalized_weight * d.normalized_weight).sum();
    let s: f64 = diffs
        .iter()
        .map(|d| d.normalized_weight * (d.observed_difference - psi).powi(2))
        .sum();
    sw2 / (n * n * n) * s
}

pub(crate) fn variance_for(dataset: &MpcrDataset, scheme: &WeightScheme, response: Response) -> Result<f64> {
    dataset.require_pairs(2)?;
    let diffs = differences_for(dataset, scheme, response)?;
    Ok(sigma_hat(&diffs, dataset.n() as f64))
}

/// Design-based variance estimator for [`crate::estimators::point_estimate`].
///
/// Unbiased for UATE and PATE; an upper bound in expectation for SATE and
/// CATE.
pub fn variance_estimate(dataset: &MpcrDataset, estimand: Estimand, scheme: Option<&WeightScheme>) -> Result<f64> {
    estimand.check(dataset)?;
    variance_for(dataset, &resolve_scheme(estimand, scheme), Response::Outcome)
}

/// The variance estimator customarily paired with harmonic weights.
pub fn harmonic_variance_estimate(dataset: &MpcrDataset, scheme: &WeightScheme) -> Result<f64> {
    dataset.require_pairs(2)?;
    let diffs = differences_for(dataset, scheme, Response::Outcome)?;
    Ok(delta_hat(&diffs, dataset.n() as f64))
}

/// Reference distribution for confidence intervals.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CiRegime {
    /// Normal quantiles; many pairs.
    ManyPairs,
    /// t with `m - 1` degrees of freedom; few pairs of large clusters.
    #[default]
    FewPairsManyUnits,
    /// t with `m - 1` degrees of freedom; few pairs of small clusters, with
    /// normally distributed outcomes assumed.
    FewPairsFewUnits,
}

impl CiRegime {
    pub fn uses_t(self) -> bool {
        !matches!(self, CiRegime::ManyPairs)
    }

    pub fn dof(self, m: usize) -> Dof {
        if self.uses_t() {
            Dof::T(m.saturating_sub(1) as u64)
        } else {
            Dof::Normal
        }
    }
}

/// Degrees of freedom behind a critical value.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Dof {
    Normal,
    T(u64),
}

impl fmt::Display for Dof {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Dof::Normal => f.write_str("normal"),
            Dof::T(d) => write!(f, "{d}"),
        }
    }
}

impl Serialize for Dof {
    fn serialize<S: Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        match self {
            Dof::Normal => s.serialize_str("normal"),
            Dof::T(d) => s.serialize_u64(*d),
        }
    }
}

/// Two-sided critical value for confidence level `level`.
pub fn critical_value(m: usize, level: f64, regime: CiRegime) -> Result<f64> {
    if !(level > 0.0 && level < 1.0) {
        return Err(Error::InvalidArgument(format!(
            "confidence level must lie in (0, 1), got {level}"
        )));
    }
    let p = 1.0 - (1.0 - level) / 2.0;
    match regime.dof(m) {
        Dof::Normal => normal_quantile(p),
        Dof::T(d) => {
            if d < 1 {
                return Err(Error::TooFewPairs { needed: 2, got: m });
            }
            t_quantile(d, p)
        }
    }
}

/// `point -/+ q sqrt(variance)`, with `q` from the normal or the t
/// distribution on `m - 1` degrees of freedom.
pub fn confidence_interval(point: f64, variance: f64, m: usize, level: f64, regime: CiRegime) -> Result<(f64, f64)> {
    if !(variance >= 0.0 && variance.is_finite()) {
        return Err(Error::InvalidArgument(format!(
            "variance must be finite and nonnegative, got {variance}"
        )));
    }
    let half = critical_value(m, level, regime)? * variance.sqrt();
    Ok((point - half, point + half))
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct EstimateReport {
    pub estimand: Estimand,
    pub scheme: String,
    pub point: f64,
    pub variance: f64,
    pub std_error: f64,
    pub ci_lower: f64,
    pub ci_upper: f64,
    pub confidence_level: f64,
    pub regime: CiRegime,
    pub dof: Dof,
    /// The variance is an upper bound rather than an unbiased estimate.
    pub conservative: bool,
    pub m: usize,
    pub n: usize,
}

/// Point estimate, variance and confidence interval in one report.
pub fn analyze(
    dataset: &MpcrDataset,
    estimand: Estimand,
    scheme: Option<&WeightScheme>,
    level: f64,
    regime: CiRegime,
) -> Result<EstimateReport> {
    estimand.check(dataset)?;
    dataset.require_pairs(2)?;
    let scheme = resolve_scheme(estimand, scheme);
    let diffs = differences_for(dataset, &scheme, Response::Outcome)?;
    let n = dataset.n();
    let point = weighted_difference(&diffs);
    let variance = sigma_hat(&diffs, n as f64);
    let (ci_lower, ci_upper) = confidence_interval(point, variance, dataset.m(), level, regime)?;
    Ok(EstimateReport {
        estimand,
        scheme: scheme.name().to_string(),
        point,
        variance,
        std_error: variance.sqrt(),
        ci_lower,
        ci_upper,
        confidence_level: level,
        regime,
        dof: regime.dof(dataset.m()),
        conservative: estimand.is_conservative(),
        m: dataset.m(),
        n,
    })
}
