use std::fmt;

use itertools::Itertools;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::potential::{assignment_bits, PotentialDataset, PotentialPair, PotentialUnit, Series};
use crate::error::{Error, Result};
use crate::estimators::estimate_for;
use crate::model::{Estimand, MpcrDataset, Response, WeightScheme};
use crate::noncompliance::{cace_estimate, covariance_estimate, receipt_itt_estimate};
use crate::oracle::potential::true_estimand;
use crate::variance::{harmonic_variance_estimate, variance_for};

/// A statistic of the observed data, evaluated under each assignment.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Statistic {
    /// Weighted difference in means.
    Psi(WeightScheme),
    /// Its design-based variance estimator.
    Sigma(WeightScheme),
    /// The variance estimator customarily paired with harmonic weights.
    Delta(WeightScheme),
    /// Effect on receipt.
    Tau(WeightScheme),
    /// Outcome/receipt covariance estimator.
    Nu(WeightScheme),
    Cace(WeightScheme),
    Constant(f64),
}

impl Statistic {
    pub fn evaluate(&self, ds: &MpcrDataset) -> Result<f64> {
        match self {
            Statistic::Psi(s) => estimate_for(ds, s, Response::Outcome),
            Statistic::Sigma(s) => variance_for(ds, s, Response::Outcome),
            Statistic::Delta(s) => harmonic_variance_estimate(ds, s),
            Statistic::Tau(s) => receipt_itt_estimate(ds, s),
            Statistic::Nu(s) => covariance_estimate(ds, s),
            Statistic::Cace(s) => cace_estimate(ds, s),
            Statistic::Constant(c) => Ok(*c),
        }
    }
}

/// Limits on exhaustive enumeration.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(default)]
pub struct EnumerationOptions {
    /// Largest number of pairs accepted at all.
    pub cap: usize,
    /// Required above 16 pairs.
    pub allow_large: bool,
}

impl Default for EnumerationOptions {
    fn default() -> Self {
        Self {
            cap: 20,
            allow_large: false,
        }
    }
}

const LARGE_M: usize = 16;

impl EnumerationOptions {
    fn check(&self, m: usize) -> Result<()> {
        if m > self.cap {
            return Err(Error::EnumerationCap { m, cap: self.cap });
        }
        if m > LARGE_M && !self.allow_large {
            return Err(Error::InvalidArgument(format!(
                "enumerating 2^{m} assignments needs allow_large"
            )));
        }
        Ok(())
    }
}

/// Distribution of a statistic under the uniform law on all `2^m`
/// assignment vectors.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ExactLaw {
    m: usize,
    values: Vec<f64>,
    mean: f64,
    variance: f64,
}

impl ExactLaw {
    pub fn from_values(m: usize, values: Vec<f64>) -> Result<Self> {
        if values.len() as u64 != 1u64 << m {
            return Err(Error::InvalidArgument(format!(
                "{} values for 2^{m} assignments",
                values.len()
            )));
        }
        let len = values.len() as f64;
        let mean = values.iter().sum::<f64>() / len;
        let variance = values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / len;
        Ok(Self {
            m,
            values,
            mean,
            variance,
        })
    }

    /// Values indexed by assignment, bit `k` of the index being `Z_k`.
    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn entries(&self) -> impl Iterator<Item = (Vec<u8>, f64)> + '_ {
        self.values
            .iter()
            .enumerate()
            .map(|(i, &v)| (assignment_bits(i as u64, self.m), v))
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn mean(&self) -> f64 {
        self.mean
    }

    pub fn variance(&self) -> f64 {
        self.variance
    }
}

pub fn exact_law(pd: &PotentialDataset, statistic: &Statistic) -> Result<ExactLaw> {
    exact_law_with(pd, statistic, &EnumerationOptions::default())
}

pub fn exact_law_with(pd: &PotentialDataset, statistic: &Statistic, options: &EnumerationOptions) -> Result<ExactLaw> {
    let m = pd.m();
    options.check(m)?;
    let values = (0..1u64 << m)
        .into_par_iter()
        .map(|i| statistic.evaluate(&pd.observe_index(i)?))
        .collect::<Result<Vec<f64>>>()?;
    ExactLaw::from_values(m, values)
}

/// More sample draws than this per pair are not enumerated.
const MAX_PAIR_OUTCOMES: usize = 1 << 20;

/// First two moments of `D_k` over `Z_k` and simple random samples of the
/// stated sizes within each cluster.
#[derive(Debug, Clone, Copy, PartialEq)]
struct PairMoments {
    mean: f64,
    second: f64,
}

fn binomial(n: usize, k: usize) -> usize {
    (0..k).fold(1usize, |acc, i| acc.saturating_mul(n - i) / (i + 1))
}

fn pair_sampling_moments(pair: &PotentialPair) -> Result<PairMoments> {
    let [a, b] = &pair.clusters;
    let count = binomial(a.population_size(), a.sample_size())
        .saturating_mul(binomial(b.population_size(), b.sample_size()))
        .saturating_mul(2);
    if count > MAX_PAIR_OUTCOMES {
        return Err(Error::IdentityInapplicable(format!(
            "pair {} has {count} sampling outcomes, more than {MAX_PAIR_OUTCOMES}",
            pair.pair_id
        )));
    }
    let subsets = |c: &super::potential::PotentialCluster| -> Vec<Vec<PotentialUnit>> {
        c.units.iter().copied().combinations(c.sample_size()).collect()
    };
    let (sa, sb) = (subsets(a), subsets(b));
    let (mut sum, mut sum2, mut k) = (0.0, 0.0, 0usize);
    for s1 in &sa {
        for s2 in &sb {
            for z in [0u8, 1] {
                let d = pair.observe_with(z, [s1, s2], false)?.difference(Response::Outcome)?;
                sum += d;
                sum2 += d * d;
                k += 1;
            }
        }
    }
    Ok(PairMoments {
        mean: sum / k as f64,
        second: sum2 / k as f64,
    })
}

/// Exact mean and variance of the point estimator under assignment and
/// simple random sampling of units within clusters.
///
/// Pairs are independent, so only per-pair moments of `w~_k D_k` are needed.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct SampledMoments {
    pub psi_mean: f64,
    pub psi_variance: f64,
    pub sigma_mean: f64,
}

pub fn sampled_moments(pd: &PotentialDataset, scheme: &WeightScheme) -> Result<SampledMoments> {
    let wt = normalized_weights(pd, scheme)?;
    let moments = pd
        .pairs()
        .par_iter()
        .map(pair_sampling_moments)
        .collect::<Result<Vec<_>>>()?;
    let n = pd.n() as f64;
    let m = pd.m() as f64;
    let mu: Vec<f64> = moments.iter().zip(&wt).map(|(p, w)| w * p.mean).collect();
    let sq: Vec<f64> = moments.iter().zip(&wt).map(|(p, w)| w * w * p.second).collect();
    let sum_mu: f64 = mu.iter().sum();
    let sum_mu2: f64 = mu.iter().map(|x| x * x).sum();
    let sum_sq: f64 = sq.iter().sum();
    let psi_mean = sum_mu / n;
    let psi_variance = (sum_sq - sum_mu2) / (n * n);
    // E sum (a_k - abar)^2 = sum E a_k^2 - (1/m) E (sum a_k)^2
    let e_ss = sum_sq - (sum_sq + sum_mu * sum_mu - sum_mu2) / m;
    let sigma_mean = if pd.m() >= 2 {
        m / ((m - 1.0) * n * n) * e_ss
    } else {
        f64::NAN
    };
    Ok(SampledMoments {
        psi_mean,
        psi_variance,
        sigma_mean,
    })
}

/// Closed-form bias and moment identities, checked against enumeration.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Identity {
    /// Bias of the point estimator with weights `n_1k + n_2k` for SATE.
    PsiBias,
    /// Bias of the point estimator with weights `N_1k + N_2k` for CATE under
    /// unit sampling.
    PsiBiasSampled,
    /// Bias of `sigma_hat` relative to the randomization variance.
    SigmaBias,
    /// The same under unit sampling.
    SigmaBiasSampled,
    /// Expectation of `delta_hat`.
    DeltaExpectation,
    /// Expectation of the outcome/receipt covariance estimator.
    NuExpectation,
}

impl Identity {
    pub const ALL: [Identity; 6] = [
        Identity::PsiBias,
        Identity::PsiBiasSampled,
        Identity::SigmaBias,
        Identity::SigmaBiasSampled,
        Identity::DeltaExpectation,
        Identity::NuExpectation,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Identity::PsiBias => "psi_bias",
            Identity::PsiBiasSampled => "psi_bias_sampled",
            Identity::SigmaBias => "sigma_bias",
            Identity::SigmaBiasSampled => "sigma_bias_sampled",
            Identity::DeltaExpectation => "delta_expectation",
            Identity::NuExpectation => "nu_expectation",
        }
    }

    pub fn default_scheme(self) -> WeightScheme {
        match self {
            Identity::PsiBias | Identity::SigmaBias | Identity::NuExpectation => WeightScheme::ArithmeticSample,
            Identity::PsiBiasSampled | Identity::SigmaBiasSampled => WeightScheme::ArithmeticPopulation,
            Identity::DeltaExpectation => WeightScheme::HarmonicSample,
        }
    }
}

impl fmt::Display for Identity {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl std::str::FromStr for Identity {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let norm = s.replace('-', "_").to_ascii_lowercase();
        Identity::ALL
            .into_iter()
            .find(|i| i.name() == norm)
            .ok_or_else(|| Error::InvalidArgument(format!("unknown identity {s:?}")))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct IdentityCheck {
    pub identity: Identity,
    pub scheme: String,
    /// Enumerated side.
    pub lhs: f64,
    /// Closed-form side.
    pub rhs: f64,
    pub residual: f64,
}

pub fn check_identity(pd: &PotentialDataset, identity: Identity) -> Result<IdentityCheck> {
    check_identity_with(pd, identity, None, &EnumerationOptions::default())
}

/// `scheme` overrides the identity's default weights where the identity
/// holds for arbitrary fixed weights.
pub fn check_identity_with(
    pd: &PotentialDataset,
    identity: Identity,
    scheme: Option<&WeightScheme>,
    options: &EnumerationOptions,
) -> Result<IdentityCheck> {
    let default = identity.default_scheme();
    let scheme = match (identity, scheme) {
        (Identity::PsiBias | Identity::PsiBiasSampled, Some(s)) if *s != default => {
            return Err(Error::IdentityInapplicable(format!(
                "{identity} holds only for {} weights",
                default.name()
            )))
        }
        (_, s) => s.cloned().unwrap_or(default),
    };
    let variance_identity = !matches!(identity, Identity::PsiBias | Identity::PsiBiasSampled);
    if variance_identity && pd.m() < 2 {
        return Err(Error::IdentityInapplicable(format!(
            "{identity} needs at least two pairs"
        )));
    }
    if identity == Identity::NuExpectation && !pd.has_receipts() {
        return Err(Error::IdentityInapplicable(format!(
            "{identity} needs potential receipts"
        )));
    }
    let (lhs, rhs) = match identity {
        Identity::PsiBias => {
            let law = exact_law_with(pd, &Statistic::Psi(scheme.clone()), options)?;
            (
                law.mean() - true_estimand(pd, Estimand::Sate)?,
                psi_bias_closed(pd, false),
            )
        }
        Identity::PsiBiasSampled => {
            let sm = sampled_moments(pd, &scheme)?;
            (
                sm.psi_mean - true_estimand(pd, Estimand::Cate)?,
                psi_bias_closed(pd, true),
            )
        }
        Identity::SigmaBias => {
            let psi = exact_law_with(pd, &Statistic::Psi(scheme.clone()), options)?;
            let sigma = exact_law_with(pd, &Statistic::Sigma(scheme.clone()), options)?;
            (sigma.mean() - psi.variance(), sigma_bias_closed(pd, &scheme, false)?)
        }
        Identity::SigmaBiasSampled => {
            let sm = sampled_moments(pd, &scheme)?;
            (sm.sigma_mean - sm.psi_variance, sigma_bias_closed(pd, &scheme, true)?)
        }
        Identity::DeltaExpectation => {
            let law = exact_law_with(pd, &Statistic::Delta(scheme.clone()), options)?;
            (law.mean(), delta_expectation_closed(pd, &scheme)?)
        }
        Identity::NuExpectation => {
            let law = exact_law_with(pd, &Statistic::Nu(scheme.clone()), options)?;
            (law.mean(), nu_expectation_closed(pd, &scheme)?)
        }
    };
    Ok(IdentityCheck {
        identity,
        scheme: scheme.name().to_string(),
        lhs,
        rhs,
        residual: (lhs - rhs).abs(),
    })
}

// Closed forms below work from potential outcomes directly and share no
// code with the estimators.

fn raw_weights(pd: &PotentialDataset, scheme: &WeightScheme) -> Result<Vec<f64>> {
    let sizes = |p: &PotentialPair| (p.clusters[0].sample_size() as f64, p.clusters[1].sample_size() as f64);
    let w: Vec<f64> = match scheme {
        WeightScheme::ArithmeticSample => pd.pairs().iter().map(|p| p.sample_size() as f64).collect(),
        WeightScheme::ArithmeticPopulation => pd.pairs().iter().map(|p| p.population_size() as f64).collect(),
        WeightScheme::HarmonicSample => pd
            .pairs()
            .iter()
            .map(|p| {
                let (a, b) = sizes(p);
                a * b / (a + b)
            })
            .collect(),
        WeightScheme::Constant => vec![1.0; pd.m()],
        WeightScheme::Custom(w) if w.len() == pd.m() && w.iter().all(|x| x.is_finite() && *x > 0.0) => w.clone(),
        WeightScheme::Custom(_) => {
            return Err(Error::InvalidWeights(format!(
                "custom weights must be {} positive numbers",
                pd.m()
            )))
        }
    };
    Ok(w)
}

/// `w~_k = n w_k / sum(w)`.
pub(crate) fn normalized_weights(pd: &PotentialDataset, scheme: &WeightScheme) -> Result<Vec<f64>> {
    let w = raw_weights(pd, scheme)?;
    let total: f64 = w.iter().sum();
    let n = pd.n() as f64;
    Ok(w.into_iter().map(|x| n * x / total).collect())
}

fn sample_var(xs: &[f64]) -> f64 {
    sample_cov(xs, xs)
}

fn sample_cov(xs: &[f64], ys: &[f64]) -> f64 {
    let k = xs.len() as f64;
    let mx = xs.iter().sum::<f64>() / k;
    let my = ys.iter().sum::<f64>() / k;
    xs.iter().zip(ys).map(|(x, y)| (x - mx) * (y - my)).sum::<f64>() / (k - 1.0)
}

/// Fixed-sample `(D_k(1), D_k(0))`, or their expectations over unit sampling
/// when `sampled`, which are the same differences taken over every listed
/// unit.
fn pair_potentials(pd: &PotentialDataset, series: Series, sampled: bool) -> Vec<(f64, f64)> {
    pd.pairs()
        .iter()
        .map(|p| {
            let units = if sampled { p.population() } else { p.fixed_sample() };
            PotentialPair::potential_differences(units, series)
        })
        .collect()
}

/// `(1/n) sum_k sum_j ((n_1k + n_2k)/2 - n_jk) tau_jk`, with `tau_jk` the
/// cluster's average effect; with `sampled`, population sizes and effects and
/// `N` in place of `n`.
fn psi_bias_closed(pd: &PotentialDataset, sampled: bool) -> f64 {
    let mut total = 0.0;
    let mut size = 0.0;
    for p in pd.pairs() {
        let units = if sampled { p.population() } else { p.fixed_sample() };
        let nk = (units[0].len() + units[1].len()) as f64;
        size += nk;
        for u in units {
            let tau = u.iter().map(|x| x.y1 - x.y0).sum::<f64>() / u.len() as f64;
            total += (nk / 2.0 - u.len() as f64) * tau;
        }
    }
    total / size
}

/// `(m / 4n^2) var{w~_k (D_k(1) + D_k(0))}` with an `m - 1` denominator.
fn sigma_bias_closed(pd: &PotentialDataset, scheme: &WeightScheme, sampled: bool) -> Result<f64> {
    let wt = normalized_weights(pd, scheme)?;
    let s: Vec<f64> = pair_potentials(pd, Series::Outcome, sampled)
        .iter()
        .zip(&wt)
        .map(|((d1, d0), w)| w * (d1 + d0))
        .collect();
    let (m, n) = (pd.m() as f64, pd.n() as f64);
    Ok(m / (4.0 * n * n) * sample_var(&s))
}

/// `(1/4n^2) sum_k w~_k^2 (D_k(1) - D_k(0))^2`.
pub fn randomization_variance_closed(pd: &PotentialDataset, scheme: &WeightScheme) -> Result<f64> {
    let wt = normalized_weights(pd, scheme)?;
    let n = pd.n() as f64;
    Ok(pair_potentials(pd, Series::Outcome, false)
        .iter()
        .zip(&wt)
        .map(|((d1, d0), w)| w * w * (d1 - d0).powi(2))
        .sum::<f64>()
        / (4.0 * n * n))
}

/// `(sum w~^2 / 2n^3) [ sum_k (1 - w~_k/n) w~_k (D_k(1)^2 + D_k(0)^2)
///   - (1/2n) sum_{k != k'} w~_k w~_k' (D_k(1) + D_k(0)) (D_k'(1) + D_k'(0)) ]`.
fn delta_expectation_closed(pd: &PotentialDataset, scheme: &WeightScheme) -> Result<f64> {
    let wt = normalized_weights(pd, scheme)?;
    let d = pair_potentials(pd, Series::Outcome, false);
    let n = pd.n() as f64;
    let sw2: f64 = wt.iter().map(|w| w * w).sum();
    let own: f64 = d
        .iter()
        .zip(&wt)
        .map(|((d1, d0), w)| (1.0 - w / n) * w * (d1 * d1 + d0 * d0))
        .sum();
    let mut cross = 0.0;
    for (k, ((a1, a0), wa)) in d.iter().zip(&wt).enumerate() {
        for (l, ((b1, b0), wb)) in d.iter().zip(&wt).enumerate() {
            if k != l {
                cross += wa * wb * (a1 + a0) * (b1 + b0);
            }
        }
    }
    Ok(sw2 / (2.0 * n.powi(3)) * (own - cross / (2.0 * n)))
}

/// `Cov_a + (m/4n^2) cov{w~_k (D_k(1) + D_k(0)), w~_k (G_k(1) + G_k(0))}`
/// where `Cov_a = (1/4n^2) sum_k w~_k^2 (D_k(1) - D_k(0)) (G_k(1) - G_k(0))`
/// and `G` is `D` computed on receipts.
fn nu_expectation_closed(pd: &PotentialDataset, scheme: &WeightScheme) -> Result<f64> {
    let wt = normalized_weights(pd, scheme)?;
    let d = pair_potentials(pd, Series::Outcome, false);
    let g = pair_potentials(pd, Series::Receipt, false);
    let (m, n) = (pd.m() as f64, pd.n() as f64);
    let cov_a: f64 = d
        .iter()
        .zip(&g)
        .zip(&wt)
        .map(|(((d1, d0), (g1, g0)), w)| w * w * (d1 - d0) * (g1 - g0))
        .sum::<f64>()
        / (4.0 * n * n);
    let sd: Vec<f64> = d.iter().zip(&wt).map(|((a, b), w)| w * (a + b)).collect();
    let sg: Vec<f64> = g.iter().zip(&wt).map(|((a, b), w)| w * (a + b)).collect();
    Ok(cov_a + m / (4.0 * n * n) * sample_cov(&sd, &sg))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::oracle::potential::fixtures::*;
    use crate::oracle::potential::PotentialCluster;

    #[test]
    fn canonical_laws() {
        let pd = ds_p();
        let psi = exact_law(&pd, &Statistic::Psi(WeightScheme::ArithmeticSample)).unwrap();
        assert_eq!(psi.len(), 4);
        assert_eq!((psi.mean(), psi.variance()), (3.0, 0.0));
        let sigma = exact_law(&pd, &Statistic::Sigma(WeightScheme::ArithmeticSample)).unwrap();
        assert!((sigma.mean() - 4.0).abs() < 1e-12);
        let c = exact_law(&pd, &Statistic::Constant(7.5)).unwrap();
        assert_eq!((c.mean(), c.variance()), (7.5, 0.0));
        let check = check_identity(&pd, Identity::SigmaBias).unwrap();
        assert!((check.rhs - 4.0).abs() < 1e-12 && check.residual < 1e-10);
    }

    #[test]
    fn entries_match_observed_assignments() {
        let pd = ds_p();
        let s = Statistic::Psi(WeightScheme::Constant);
        let law = exact_law(&pd, &s).unwrap();
        for (z, v) in law.entries() {
            assert_eq!(v, s.evaluate(&pd.observe(&z).unwrap()).unwrap());
        }
    }

    #[test]
    fn enumeration_caps() {
        let pairs: Vec<_> = (0..17)
            .map(|k| simple_pair(&k.to_string(), units(&[0.0], &[1.0]), units(&[0.0], &[1.0])))
            .collect();
        let pd = PotentialDataset::new(pairs).unwrap();
        let s = Statistic::Constant(0.0);
        assert!(matches!(exact_law(&pd, &s), Err(Error::InvalidArgument(_))));
        let tight = EnumerationOptions {
            cap: 10,
            allow_large: true,
        };
        assert_eq!(
            exact_law_with(&pd, &s, &tight).unwrap_err(),
            Error::EnumerationCap { m: 17, cap: 10 }
        );
        let open = EnumerationOptions {
            cap: 20,
            allow_large: true,
        };
        assert_eq!(exact_law_with(&pd, &s, &open).unwrap().len(), 1 << 17);
    }

    #[test]
    fn inapplicable_shapes() {
        let one = PotentialDataset::new(vec![simple_pair("a", units(&[0.0], &[1.0]), units(&[0.0], &[2.0]))]).unwrap();
        assert!(matches!(
            check_identity(&one, Identity::SigmaBias),
            Err(Error::IdentityInapplicable(_))
        ));
        assert!(check_identity(&one, Identity::PsiBias).is_ok());
        assert!(matches!(
            check_identity(&ds_p(), Identity::NuExpectation),
            Err(Error::IdentityInapplicable(_))
        ));
        assert!(matches!(
            check_identity_with(
                &ds_p(),
                Identity::PsiBias,
                Some(&WeightScheme::Constant),
                &EnumerationOptions::default()
            ),
            Err(Error::IdentityInapplicable(_))
        ));
    }

    #[test]
    fn sampled_moments_without_sampling_match_enumeration() {
        let pd = PotentialDataset::new(vec![
            simple_pair("a", units(&[1.0, 4.0], &[3.0, 3.0]), units(&[0.0], &[2.0])),
            simple_pair("b", units(&[2.0, 2.0, 5.0], &[1.0, 6.0, 5.0]), units(&[7.0], &[7.5])),
            simple_pair("c", units(&[0.0], &[0.0]), units(&[1.0, 1.0], &[4.0, -1.0])),
        ])
        .unwrap();
        let scheme = WeightScheme::ArithmeticPopulation;
        let sm = sampled_moments(&pd, &scheme).unwrap();
        let psi = exact_law(&pd, &Statistic::Psi(scheme.clone())).unwrap();
        let sigma = exact_law(&pd, &Statistic::Sigma(scheme.clone())).unwrap();
        assert!((sm.psi_mean - psi.mean()).abs() < 1e-12);
        assert!((sm.psi_variance - psi.variance()).abs() < 1e-12);
        assert!((sm.sigma_mean - sigma.mean()).abs() < 1e-12);
        assert!((randomization_variance_closed(&pd, &scheme).unwrap() - psi.variance()).abs() < 1e-12);
    }

    #[test]
    fn identity_names_round_trip() {
        for i in Identity::ALL {
            assert_eq!(i.name().parse::<Identity>().unwrap(), i);
        }
        assert_eq!("sigma-bias".parse::<Identity>().unwrap(), Identity::SigmaBias);
        assert!("bogus".parse::<Identity>().is_err());
    }

    #[test]
    fn sampled_bias_nonzero_with_unit_sampling() {
        let c = |y1: &[f64]| PotentialCluster::sampled(units(&[0.0, 0.0, 0.0], y1), 2);
        let pd = PotentialDataset::new(vec![
            PotentialPair::new("a", c(&[1.0, 2.0, 9.0]), c(&[0.0, 0.0, 3.0])),
            PotentialPair::new("b", c(&[4.0, 4.0, 4.0]), c(&[-2.0, 5.0, 3.0])),
        ])
        .unwrap();
        let check = check_identity(&pd, Identity::SigmaBiasSampled).unwrap();
        assert!(check.rhs > 0.0 && check.residual < 1e-10, "{check:?}");
    }
}
