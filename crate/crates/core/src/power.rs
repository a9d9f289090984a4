//! Design planning: power, sample size, minimum detectable effect, relative
//! efficiency against the unmatched design, pair correlations and the
//! break-even correlation.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::estimators::resolve_scheme;
use crate::model::{differences_for, Estimand, MpcrDataset, Response, Slot, WeightScheme};
use crate::special::{noncentral_t_cdf, t_quantile};

/// Absolute tolerance of every root-find on a continuous variable.
const ROOT_TOL: f64 = 1e-10;

/// Largest number of pairs the sample-size search will consider.
const MAX_PAIRS: usize = 100_000_000;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum PowerMode {
    /// Sampling of clusters only; the effect is standardized by the
    /// between-pair standard deviation of the pair difference.
    Uate,
    /// Sampling of clusters and of units within them; within-cluster noise
    /// enters through `pi` and `nbar`.
    Pate,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PowerSpec {
    /// Size of the two-sided test.
    pub alpha: f64,
    /// Number of pairs.
    pub m: usize,
    /// Standardized effect.
    pub effect: f64,
    /// Ratio of summed mean within-cluster variances to the between-pair
    /// variance of the pair difference.
    pub pi: Option<f64>,
    /// Mean sampled cluster size `n / (2m)`.
    pub nbar: Option<f64>,
}

fn check_alpha(alpha: f64) -> Result<()> {
    if alpha > 0.0 && alpha < 1.0 {
        Ok(())
    } else {
        Err(Error::InvalidArgument(format!("alpha must lie in (0, 1), got {alpha}")))
    }
}

fn check_target(alpha: f64, target: f64) -> Result<()> {
    check_alpha(alpha)?;
    if !(target > 0.0 && target < 1.0) {
        return Err(Error::InvalidArgument(format!(
            "target power must lie in (0, 1), got {target}"
        )));
    }
    if target <= alpha {
        return Err(Error::InvalidArgument(format!(
            "target power {target} does not exceed the test size {alpha}"
        )));
    }
    Ok(())
}

/// Multiplier turning `d sqrt(m)` into the noncentrality parameter.
fn attenuation(mode: PowerMode, pi: Option<f64>, nbar: Option<f64>) -> Result<f64> {
    match mode {
        PowerMode::Uate => Ok(1.0),
        PowerMode::Pate => {
            let pi = pi.ok_or_else(|| Error::InvalidArgument("PATE power needs pi".into()))?;
            let nbar = nbar.ok_or_else(|| Error::InvalidArgument("PATE power needs nbar".into()))?;
            if !(pi >= 0.0 && pi.is_finite()) {
                return Err(Error::InvalidArgument(format!("pi must be nonnegative, got {pi}")));
            }
            if !(nbar > 0.0) {
                return Err(Error::InvalidArgument(format!("nbar must be positive, got {nbar}")));
            }
            Ok(1.0 / (1.0 + pi / nbar).sqrt())
        }
    }
}

/// Two-sided power of the t test with `dof` degrees of freedom at
/// noncentrality `lambda`.
pub fn t_test_power(alpha: f64, dof: u64, lambda: f64) -> Result<f64> {
    check_alpha(alpha)?;
    let tc = t_quantile(dof, 1.0 - alpha / 2.0)?;
    let p = 1.0 + noncentral_t_cdf(-tc, dof, lambda) - noncentral_t_cdf(tc, dof, lambda);
    Ok(p.clamp(0.0, 1.0))
}

fn power_with(alpha: f64, m: usize, effect: f64, scale: f64) -> Result<f64> {
    if m < 2 {
        return Err(Error::TooFewPairs { needed: 2, got: m });
    }
    if !effect.is_finite() {
        return if effect.is_nan() {
            Err(Error::InvalidArgument("effect is not a number".into()))
        } else {
            Ok(1.0)
        };
    }
    t_test_power(alpha, (m - 1) as u64, effect * (m as f64).sqrt() * scale)
}

/// Power for UATE: noncentrality `d sqrt(m)` on `m - 1` degrees of freedom.
pub fn power_uate(spec: &PowerSpec) -> Result<f64> {
    power_with(spec.alpha, spec.m, spec.effect, 1.0)
}

/// Power for PATE: noncentrality `d sqrt(m) / sqrt(1 + pi / nbar)`.
pub fn power_pate(spec: &PowerSpec) -> Result<f64> {
    let scale = attenuation(PowerMode::Pate, spec.pi, spec.nbar)?;
    power_with(spec.alpha, spec.m, spec.effect, scale)
}

pub fn power(spec: &PowerSpec, mode: PowerMode) -> Result<f64> {
    match mode {
        PowerMode::Uate => power_uate(spec),
        PowerMode::Pate => power_pate(spec),
    }
}

/// Smallest `m >= 2` whose power reaches `target`.
pub fn sample_size(
    alpha: f64,
    target: f64,
    effect: f64,
    mode: PowerMode,
    pi: Option<f64>,
    nbar: Option<f64>,
) -> Result<usize> {
    check_target(alpha, target)?;
    let scale = attenuation(mode, pi, nbar)?;
    if effect == 0.0 || effect.is_nan() {
        return Err(Error::UnreachablePower(
            "a zero effect never exceeds the test size".into(),
        ));
    }
    let reaches = |m: usize| -> Result<bool> { Ok(power_with(alpha, m, effect, scale)? >= target) };
    if reaches(2)? {
        return Ok(2);
    }
    // Invariant: power(lo) < target <= power(hi).
    let mut lo = 2;
    let mut hi = 4;
    while !reaches(hi)? {
        lo = hi;
        hi *= 2;
        if hi > MAX_PAIRS {
            return Err(Error::UnreachablePower(format!(
                "more than {MAX_PAIRS} pairs would be needed"
            )));
        }
    }
    while hi - lo > 1 {
        let mid = lo + (hi - lo) / 2;
        if reaches(mid)? {
            hi = mid;
        } else {
            lo = mid;
        }
    }
    Ok(hi)
}

/// Bisection for the smallest `x >= 0` with `f(x) >= target`, assuming `f`
/// is increasing. Returns the upper end of the final bracket.
fn increasing_root(f: impl Fn(f64) -> Result<f64>, target: f64, start: f64) -> Result<f64> {
    let mut lo = 0.0;
    let mut hi = start;
    let mut grow = 0;
    while f(hi)? < target {
        lo = hi;
        hi *= 2.0;
        grow += 1;
        if grow > 200 {
            return Err(Error::Convergence("no bracket for the root".into()));
        }
    }
    while hi - lo > ROOT_TOL {
        let mid = 0.5 * (lo + hi);
        if f(mid)? >= target {
            hi = mid;
        } else {
            lo = mid;
        }
    }
    Ok(hi)
}

/// Smallest standardized effect detected with power `target` using `m` pairs.
pub fn minimum_detectable_effect(
    alpha: f64,
    target: f64,
    m: usize,
    mode: PowerMode,
    pi: Option<f64>,
    nbar: Option<f64>,
) -> Result<f64> {
    check_target(alpha, target)?;
    let scale = attenuation(mode, pi, nbar)?;
    if m < 2 {
        return Err(Error::TooFewPairs { needed: 2, got: m });
    }
    increasing_root(|d| power_with(alpha, m, d, scale), target, 1.0)
}

/// Noncentrality at which the two-sided t test on `dof` degrees of freedom
/// reaches power `target`.
pub fn required_noncentrality(alpha: f64, target: f64, dof: u64) -> Result<f64> {
    check_target(alpha, target)?;
    increasing_root(|l| t_test_power(alpha, dof, l), target, 1.0)
}

/// Smallest within-pair correlation at which `m` matched pairs detect an
/// effect no larger than `2m` unmatched clusters do, at equal power.
///
/// With between-cluster variance `s^2`, the matched test uses `m - 1`
/// degrees of freedom and pair-difference variance `2 s^2 (1 - rho)`; the
/// unmatched two-sample test uses `2m - 2` degrees of freedom and variance
/// `2 s^2`. Setting the two detectable effects equal gives
/// `rho = 1 - (lambda_{2m-2} / lambda_{m-1})^2`, where `lambda_v` is the
/// noncentrality reaching the target power on `v` degrees of freedom. The
/// value here is found by a root-find on `rho` rather than the closed form.
pub fn break_even_correlation(m: usize, alpha: f64, target: f64) -> Result<f64> {
    if m < 2 {
        return Err(Error::TooFewPairs { needed: 2, got: m });
    }
    let lam_matched = required_noncentrality(alpha, target, (m - 1) as u64)?;
    let lam_unmatched = required_noncentrality(alpha, target, (2 * m - 2) as u64)?;
    // Effects in units of sqrt(2 s^2 / m).
    let mde_matched = |rho: f64| lam_matched * (1.0 - rho).sqrt();
    let mde_unmatched = lam_unmatched;

    let (mut lo, mut hi) = (0.0f64, 1.0f64);
    if mde_matched(lo) <= mde_unmatched {
        return Ok(0.0);
    }
    while hi - lo > ROOT_TOL {
        let mid = 0.5 * (lo + hi);
        if mde_matched(mid) <= mde_unmatched {
            hi = mid;
        } else {
            lo = mid;
        }
    }
    Ok(hi)
}

/// Sample estimate of the variance of the unmatched design relative to the
/// matched one.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct EfficiencyReport {
    /// `1 / (1 - 2 cov / (var1 + var0))`; `None` when the denominator
    /// vanishes, i.e. the matched design's variance is estimated as zero.
    pub ratio: Option<f64>,
    /// `2 cov / (var1 + var0)`.
    pub cov_share: f64,
    pub covariance_term: f64,
    /// Sample variances of the weighted treated and control cluster means.
    pub variance_terms: (f64, f64),
    /// Every pair has equal sample sizes, as the formula's derivation assumes.
    pub equal_sizes: bool,
    pub estimand: Estimand,
    pub scheme: String,
}

fn sample_var(x: &[f64]) -> f64 {
    sample_cov(x, x)
}

fn sample_cov(x: &[f64], y: &[f64]) -> f64 {
    let m = x.len() as f64;
    let mx = x.iter().sum::<f64>() / m;
    let my = y.iter().sum::<f64>() / m;
    x.iter().zip(y).map(|(a, b)| (a - mx) * (b - my)).sum::<f64>() / (m - 1.0)
}

/// `(w~_k * treated mean, w~_k * control mean)` series across pairs.
fn weighted_arm_means(dataset: &MpcrDataset, scheme: &WeightScheme) -> Result<(Vec<f64>, Vec<f64>)> {
    let diffs = differences_for(dataset, scheme, Response::Outcome)?;
    Ok(dataset
        .pairs()
        .iter()
        .zip(&diffs)
        .map(|(p, d)| {
            (
                d.normalized_weight * p.treated().mean_outcome(),
                d.normalized_weight * p.control().mean_outcome(),
            )
        })
        .unzip())
}

pub fn relative_efficiency_estimate(dataset: &MpcrDataset, estimand: Estimand) -> Result<EfficiencyReport> {
    estimand.check(dataset)?;
    dataset.require_pairs(2)?;
    let scheme = resolve_scheme(estimand, None);
    let (t, c) = weighted_arm_means(dataset, &scheme)?;
    let v1 = sample_var(&t);
    let v0 = sample_var(&c);
    if v1 + v0 == 0.0 {
        return Err(Error::Degenerate(
            "weighted cluster means do not vary across pairs".into(),
        ));
    }
    let cov = sample_cov(&t, &c);
    let share = 2.0 * cov / (v1 + v0);
    let ratio = (1.0 - share > 1e-12).then(|| 1.0 / (1.0 - share));
    Ok(EfficiencyReport {
        ratio,
        cov_share: share,
        covariance_term: cov,
        variance_terms: (v1, v0),
        equal_sizes: dataset
            .pairs()
            .iter()
            .all(|p| p.cluster(Slot::First).sample_size() == p.cluster(Slot::Second).sample_size()),
        estimand,
        scheme: scheme.name().to_string(),
    })
}

/// Pearson correlation across pairs between treated and control cluster
/// means, optionally after multiplying both by the normalized pair weight
/// (population sizes when known, sample sizes otherwise).
pub fn pair_correlation(dataset: &MpcrDataset, weighted: bool) -> Result<f64> {
    dataset.require_pairs(2)?;
    let (t, c) = if weighted {
        let scheme = if dataset.has_populations() {
            WeightScheme::ArithmeticPopulation
        } else {
            WeightScheme::ArithmeticSample
        };
        weighted_arm_means(dataset, &scheme)?
    } else {
        dataset
            .pairs()
            .iter()
            .map(|p| (p.treated().mean_outcome(), p.control().mean_outcome()))
            .unzip()
    };
    let (vt, vc) = (sample_var(&t), sample_var(&c));
    if vt <= 0.0 || vc <= 0.0 {
        return Err(Error::Degenerate(
            "cluster means do not vary across pairs in one arm".into(),
        ));
    }
    Ok((sample_cov(&t, &c) / (vt * vc).sqrt()).clamp(-1.0, 1.0))
}

/// Plug-in estimate of `pi`: summed (over slots) mean within-cluster
/// variance divided by the across-pair variance of `D_k`. Unbiased sample
/// variances throughout.
pub fn estimate_pi(dataset: &MpcrDataset) -> Result<f64> {
    dataset.require_pairs(2)?;
    let m = dataset.m() as f64;
    let mut within = 0.0;
    for slot in [Slot::First, Slot::Second] {
        let mut s = 0.0;
        for p in dataset.pairs() {
            s += p.cluster(slot).outcome_variance().ok_or_else(|| {
                Error::InvalidArgument(format!(
                    "pair {}, slot {slot}: within-cluster variance needs at least 2 units",
                    p.pair_id
                ))
            })?;
        }
        within += s / m;
    }
    let d: Vec<f64> = dataset
        .pairs()
        .iter()
        .map(|p| p.treated().mean_outcome() - p.control().mean_outcome())
        .collect();
    let vd = sample_var(&d);
    if vd <= 0.0 {
        return Err(Error::Degenerate("pair differences do not vary".into()));
    }
    Ok(within / vd)
}
