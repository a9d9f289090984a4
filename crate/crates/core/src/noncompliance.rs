//! Encouragement designs: intention-to-treat effects on receipt, the
//! complier average causal effect and its delta-method variance.

use serde::Serialize;

use crate::error::{Error, Result};
use crate::estimators::estimate_for;
use crate::model::{differences_for, MpcrDataset, Response, WeightScheme};
use crate::variance::{confidence_interval, cross_hat, variance_for, CiRegime, Dof};

/// Identifying assumptions behind the complier effect. They concern potential
/// receipts and outcomes and cannot be checked from observed data.
pub const ASSUMPTIONS: [&str; 3] = [
    "no interference between units: receipt and outcomes depend only on the unit's own cluster assignment and receipt",
    "exclusion restriction: cluster-level encouragement affects outcomes only through unit-level receipt",
    "monotonicity: no unit takes the treatment when not encouraged yet refuses it when encouraged",
];

/// Below this magnitude the effect on receipt is treated as zero.
const TAU_EPS: f64 = 1e-12;

/// Weighted estimator applied to receipts instead of outcomes.
pub fn receipt_itt_estimate(dataset: &MpcrDataset, scheme: &WeightScheme) -> Result<f64> {
    dataset.require_receipts()?;
    estimate_for(dataset, scheme, Response::Receipt)
}

fn nonzero_tau(tau: f64) -> Result<f64> {
    if tau.abs() <= TAU_EPS {
        Err(Error::NoCompliers)
    } else {
        Ok(tau)
    }
}

/// Instrumental-variable estimator `psi_hat / tau_hat`.
pub fn cace_estimate(dataset: &MpcrDataset, scheme: &WeightScheme) -> Result<f64> {
    let tau = nonzero_tau(receipt_itt_estimate(dataset, scheme)?)?;
    Ok(estimate_for(dataset, scheme, Response::Outcome)? / tau)
}

/// Covariance estimator between the outcome and receipt estimators.
pub fn covariance_estimate(dataset: &MpcrDataset, scheme: &WeightScheme) -> Result<f64> {
    dataset.require_receipts()?;
    dataset.require_pairs(2)?;
    let y = differences_for(dataset, scheme, Response::Outcome)?;
    let r = differences_for(dataset, scheme, Response::Receipt)?;
    Ok(cross_hat(&y, &r, dataset.n() as f64))
}

/// First-order variance of a ratio `psi / tau`, clamped at zero.
///
/// The bracket `tau^2 var_y + psi^2 var_r - 2 psi tau cov` is a quadratic form
/// in `(tau, -psi)`; it only turns negative when the three second moments are
/// mutually inconsistent or through rounding. The flag reports the clamp.
pub fn delta_method_variance(psi: f64, tau: f64, var_y: f64, var_r: f64, cov: f64) -> (f64, bool) {
    let v = (tau * tau * var_y + psi * psi * var_r - 2.0 * psi * tau * cov) / tau.powi(4);
    if v < 0.0 {
        (0.0, true)
    } else {
        (v, false)
    }
}

/// Plug-in delta-method variance of [`cace_estimate`] and the clamp flag.
pub fn cace_variance(dataset: &MpcrDataset, scheme: &WeightScheme) -> Result<(f64, bool)> {
    let parts = CaceParts::compute(dataset, scheme)?;
    Ok(parts.variance())
}

struct CaceParts {
    psi: f64,
    tau: f64,
    var_y: f64,
    var_r: f64,
    cov: f64,
}

impl CaceParts {
    fn compute(dataset: &MpcrDataset, scheme: &WeightScheme) -> Result<Self> {
        dataset.require_receipts()?;
        dataset.require_pairs(2)?;
        let tau = nonzero_tau(estimate_for(dataset, scheme, Response::Receipt)?)?;
        Ok(Self {
            psi: estimate_for(dataset, scheme, Response::Outcome)?,
            tau,
            var_y: variance_for(dataset, scheme, Response::Outcome)?,
            var_r: variance_for(dataset, scheme, Response::Receipt)?,
            cov: covariance_estimate(dataset, scheme)?,
        })
    }

    fn variance(&self) -> (f64, bool) {
        delta_method_variance(self.psi, self.tau, self.var_y, self.var_r, self.cov)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct ComplianceShares {
    pub p_always: f64,
    pub p_never: f64,
    pub p_complier: f64,
}

/// Compliance-type shares under monotonicity. Control-cluster receipt
/// identifies always-takers and treated-cluster non-receipt never-takers;
/// pairs are weighted by the scheme's `w_k`.
pub fn compliance_shares(dataset: &MpcrDataset, scheme: &WeightScheme) -> Result<ComplianceShares> {
    dataset.require_receipts()?;
    let w = scheme.weights(dataset)?;
    let total: f64 = w.iter().sum();
    let mut treated = 0.0;
    let mut control = 0.0;
    for (p, wk) in dataset.pairs().iter().zip(&w) {
        treated += wk * p.treated().mean_receipt().ok_or(Error::MissingReceipts)?;
        control += wk * p.control().mean_receipt().ok_or(Error::MissingReceipts)?;
    }
    let p_always = control / total;
    let p_never = 1.0 - treated / total;
    Ok(ComplianceShares {
        p_always,
        p_never,
        p_complier: 1.0 - p_always - p_never,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ComplianceReport {
    pub scheme: String,
    pub p_always: f64,
    pub p_never: f64,
    pub p_complier: f64,
    /// Effect of encouragement on the outcome.
    pub itt_outcome: f64,
    /// Effect of encouragement on receipt.
    pub itt_receipt: f64,
    pub itt_outcome_variance: f64,
    pub itt_receipt_variance: f64,
    pub covariance: f64,
    pub cace: f64,
    pub cace_variance: f64,
    pub cace_std_error: f64,
    pub ci_lower: f64,
    pub ci_upper: f64,
    pub confidence_level: f64,
    pub regime: CiRegime,
    pub dof: Dof,
    /// The delta-method variance was negative and has been clamped to zero.
    pub truncated: bool,
    pub assumptions: Vec<String>,
    pub m: usize,
    pub n: usize,
}

/// Full complier-effect analysis with a confidence interval for the CACE.
pub fn analyze_compliance(
    dataset: &MpcrDataset,
    scheme: &WeightScheme,
    level: f64,
    regime: CiRegime,
) -> Result<ComplianceReport> {
    let parts = CaceParts::compute(dataset, scheme)?;
    let shares = compliance_shares(dataset, scheme)?;
    let (cace_variance, truncated) = parts.variance();
    let cace = parts.psi / parts.tau;
    let (ci_lower, ci_upper) = confidence_interval(cace, cace_variance, dataset.m(), level, regime)?;
    Ok(ComplianceReport {
        scheme: scheme.name().to_string(),
        p_always: shares.p_always,
        p_never: shares.p_never,
        p_complier: shares.p_complier,
        itt_outcome: parts.psi,
        itt_receipt: parts.tau,
        itt_outcome_variance: parts.var_y,
        itt_receipt_variance: parts.var_r,
        covariance: parts.cov,
        cace,
        cace_variance,
        cace_std_error: cace_variance.sqrt(),
        ci_lower,
        ci_upper,
        confidence_level: level,
        regime,
        dof: regime.dof(dataset.m()),
        truncated,
        assumptions: ASSUMPTIONS.iter().map(|s| s.to_string()).collect(),
        m: dataset.m(),
        n: dataset.n(),
    })
}
