use std::sync::OnceLock;

use rand::Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::exact::{exact_law, Statistic};
use super::potential::{true_estimand, PotentialCluster, PotentialDataset, PotentialPair, PotentialUnit};
use super::rng::{coin, normal, stream};
use crate::error::{Error, Result};
use crate::estimators::weighted_difference;
use crate::model::{differences_for, ClusterData, Estimand, MatchedPair, MpcrDataset, Response, Slot, WeightScheme};
use crate::variance::{confidence_interval, delta_hat, sigma_hat, CiRegime};

/// Two clusters' sizes, outcome means and outcome standard deviations.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PairProfile {
    pub sizes: [usize; 2],
    pub means: [f64; 2],
    pub sds: [f64; 2],
}

/// Synthetic profiles with heterogeneous variances and larger mean gaps in
/// larger pairs.
pub fn bundled_profiles() -> &'static [PairProfile] {
    static PROFILES: OnceLock<Vec<PairProfile>> = OnceLock::new();
    PROFILES.get_or_init(|| {
        serde_json::from_str(include_str!("../../data/pair_profiles.json")).expect("bundled profiles parse")
    })
}

/// Data-generating process for coverage runs. Each replicate draws `m`
/// profiles with replacement, one fair coin per pair, and normal unit
/// outcomes; cluster effects are `effect` plus normal noise of sd
/// `effect_sd`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct DgpConfig {
    pub m: usize,
    pub replicates: usize,
    pub seed: u64,
    pub level: f64,
    pub regime: CiRegime,
    pub effect: f64,
    pub effect_sd: f64,
    /// Multiplies every profile's cluster sizes; results are rounded and at
    /// least 1.
    pub size_scale: f64,
    /// Defaults to [`bundled_profiles`].
    pub profiles: Option<Vec<PairProfile>>,
}

impl Default for DgpConfig {
    fn default() -> Self {
        Self {
            m: 100,
            replicates: 5000,
            seed: 20_090_000,
            level: 0.90,
            regime: CiRegime::FewPairsManyUnits,
            effect: 1.0,
            effect_sd: 0.0,
            size_scale: 1.0,
            profiles: None,
        }
    }
}

impl DgpConfig {
    pub fn validate(&self) -> Result<()> {
        let bad = |s: String| Err(Error::InvalidArgument(s));
        if self.m < 2 {
            return bad(format!("m must be at least 2, got {}", self.m));
        }
        if self.replicates < 1 {
            return bad("replicates must be at least 1".into());
        }
        if !(self.level > 0.0 && self.level < 1.0) {
            return bad(format!("level must lie in (0, 1), got {}", self.level));
        }
        if !(self.effect.is_finite() && self.effect_sd.is_finite() && self.effect_sd >= 0.0) {
            return bad("effect and effect_sd must be finite, effect_sd nonnegative".into());
        }
        if !(self.size_scale.is_finite() && self.size_scale > 0.0) {
            return bad(format!("size_scale must be positive, got {}", self.size_scale));
        }
        let profiles = self.profiles();
        if profiles.is_empty() {
            return bad("profile list is empty".into());
        }
        for (i, p) in profiles.iter().enumerate() {
            let ok = p.sizes.iter().all(|&s| s >= 1)
                && p.means.iter().all(|x| x.is_finite())
                && p.sds.iter().all(|x| x.is_finite() && *x >= 0.0);
            if !ok {
                return bad(format!(
                    "profile {i} needs positive sizes, finite means and nonnegative sds"
                ));
            }
        }
        Ok(())
    }

    pub fn profiles(&self) -> &[PairProfile] {
        self.profiles.as_deref().unwrap_or_else(|| bundled_profiles())
    }

    fn size(&self, s: usize) -> usize {
        ((s as f64 * self.size_scale).round() as usize).max(1)
    }

    /// Observed data of replicate `r` and its SATE.
    pub fn replicate(&self, r: u64) -> Result<(MpcrDataset, f64)> {
        let profiles = self.profiles();
        let mut rng = stream(self.seed, r);
        let mut pairs = Vec::with_capacity(self.m);
        let (mut effect_sum, mut units) = (0.0, 0usize);
        for k in 0..self.m {
            let p = &profiles[rng.random_range(0..profiles.len())];
            let z = coin(&mut rng);
            let id = k.to_string();
            let mut clusters = Vec::with_capacity(2);
            for (j, slot) in [Slot::First, Slot::Second].into_iter().enumerate() {
                let n = self.size(p.sizes[j]);
                let tau = normal(&mut rng, self.effect, self.effect_sd);
                let treated = (j == 0) == (z == 1);
                let shift = if treated { tau } else { 0.0 };
                let ys = (0..n).map(|_| normal(&mut rng, p.means[j], p.sds[j]) + shift).collect();
                effect_sum += tau * n as f64;
                units += n;
                clusters.push(ClusterData::new(id.clone(), slot, ys, None, None)?);
            }
            let second = clusters.pop().expect("two clusters");
            let first = clusters.pop().expect("two clusters");
            pairs.push(MatchedPair::new(id, z, first, second)?);
        }
        Ok((MpcrDataset::new(pairs)?, effect_sum / units as f64))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CoverageMethod {
    /// Weights `n_1k + n_2k` with `sigma_hat`.
    SigmaHat,
    /// Harmonic weights with `delta_hat`.
    DeltaHat,
}

impl CoverageMethod {
    fn scheme(self) -> WeightScheme {
        match self {
            CoverageMethod::SigmaHat => WeightScheme::ArithmeticSample,
            CoverageMethod::DeltaHat => WeightScheme::HarmonicSample,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CoverageSummary {
    pub method: CoverageMethod,
    pub m: usize,
    pub replicates: usize,
    pub level: f64,
    pub covered: usize,
    pub coverage: f64,
    /// Binomial standard error of `coverage`.
    pub std_error: f64,
    pub mean_width: f64,
    pub mean_bias: f64,
}

/// Absorbs rounding when an interval has zero width.
const COVER_SLACK: f64 = 1e-9;

pub fn coverage_simulation(cfg: &DgpConfig, method: CoverageMethod) -> Result<CoverageSummary> {
    cfg.validate()?;
    let scheme = method.scheme();
    let rows = (0..cfg.replicates as u64)
        .into_par_iter()
        .map(|r| {
            let (ds, truth) = cfg.replicate(r)?;
            let diffs = differences_for(&ds, &scheme, Response::Outcome)?;
            let n = ds.n() as f64;
            let point = weighted_difference(&diffs);
            let var = match method {
                CoverageMethod::SigmaHat => sigma_hat(&diffs, n),
                CoverageMethod::DeltaHat => delta_hat(&diffs, n),
            };
            let (lo, hi) = confidence_interval(point, var.max(0.0), cfg.m, cfg.level, cfg.regime)?;
            let slack = COVER_SLACK * truth.abs().max(1.0);
            Ok((lo - slack <= truth && truth <= hi + slack, hi - lo, point - truth))
        })
        .collect::<Result<Vec<_>>>()?;
    let reps = rows.len() as f64;
    let covered = rows.iter().filter(|r| r.0).count();
    let coverage = covered as f64 / reps;
    Ok(CoverageSummary {
        method,
        m: cfg.m,
        replicates: cfg.replicates,
        level: cfg.level,
        covered,
        coverage,
        std_error: (coverage * (1.0 - coverage) / reps).sqrt(),
        mean_width: rows.iter().map(|r| r.1).sum::<f64>() / reps,
        mean_bias: rows.iter().map(|r| r.2).sum::<f64>() / reps,
    })
}

/// Monte Carlo estimate of a statistic's mean and variance under random
/// assignment, with standard errors of both.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct MonteCarloLaw {
    pub draws: usize,
    pub mean: f64,
    pub mean_se: f64,
    pub variance: f64,
    pub variance_se: f64,
}

fn moments_with_se(xs: &[f64]) -> MonteCarloLaw {
    let r = xs.len() as f64;
    let mean = xs.iter().sum::<f64>() / r;
    let sq: Vec<f64> = xs.iter().map(|x| (x - mean).powi(2)).collect();
    let variance = sq.iter().sum::<f64>() / (r - 1.0);
    let var_sq = sq.iter().map(|s| (s - variance).powi(2)).sum::<f64>() / (r - 1.0);
    MonteCarloLaw {
        draws: xs.len(),
        mean,
        mean_se: (variance / r).sqrt(),
        variance,
        variance_se: (var_sq / r).sqrt(),
    }
}

pub fn monte_carlo_law(pd: &PotentialDataset, statistic: &Statistic, draws: usize, seed: u64) -> Result<MonteCarloLaw> {
    if draws < 2 {
        return Err(Error::InvalidArgument("need at least two draws".into()));
    }
    let values = (0..draws as u64)
        .into_par_iter()
        .map(|r| {
            let mut rng = stream(seed, r);
            let z: Vec<u8> = (0..pd.m()).map(|_| coin(&mut rng)).collect();
            statistic.evaluate(&pd.observe(&z)?)
        })
        .collect::<Result<Vec<f64>>>()?;
    Ok(moments_with_se(&values))
}

/// Pairs drawn with replacement from a finite super-population, then
/// randomized.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SuperPopulationConfig {
    pub m: usize,
    pub replicates: usize,
    pub seed: u64,
    pub scheme: WeightScheme,
}

impl Default for SuperPopulationConfig {
    fn default() -> Self {
        Self {
            m: 10,
            replicates: 200_000,
            seed: 7,
            scheme: WeightScheme::ArithmeticSample,
        }
    }
}

/// Monte Carlo comparison of `E[sigma_hat]` with `Var(psi_hat)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct SuperPopulationSummary {
    pub replicates: usize,
    pub mean_psi: f64,
    pub mean_sigma: f64,
    pub psi_variance: f64,
    /// `mean_sigma - psi_variance`.
    pub difference: f64,
    /// Standard error of `difference`, from the per-replicate influence
    /// values `sigma_r - (psi_r - mean_psi)^2`.
    pub std_error: f64,
}

pub fn superpopulation_check(
    population: &PotentialDataset,
    cfg: &SuperPopulationConfig,
) -> Result<SuperPopulationSummary> {
    if cfg.m < 2 || cfg.replicates < 2 {
        return Err(Error::InvalidArgument(
            "need at least two pairs and two replicates".into(),
        ));
    }
    let pop = population.pairs();
    let draws = (0..cfg.replicates as u64)
        .into_par_iter()
        .map(|r| {
            let mut rng = stream(cfg.seed, r);
            let pairs = (0..cfg.m)
                .map(|k| {
                    let p = &pop[rng.random_range(0..pop.len())];
                    let z = coin(&mut rng);
                    let mut p = p.clone();
                    p.pair_id = k.to_string();
                    p.observe_with(z, p.fixed_sample(), false)
                })
                .collect::<Result<Vec<_>>>()?;
            let ds = MpcrDataset::new(pairs)?;
            let diffs = differences_for(&ds, &cfg.scheme, Response::Outcome)?;
            Ok((weighted_difference(&diffs), sigma_hat(&diffs, ds.n() as f64)))
        })
        .collect::<Result<Vec<(f64, f64)>>>()?;
    let r = draws.len() as f64;
    let mean_psi = draws.iter().map(|d| d.0).sum::<f64>() / r;
    let mean_sigma = draws.iter().map(|d| d.1).sum::<f64>() / r;
    let psi_variance = draws.iter().map(|d| (d.0 - mean_psi).powi(2)).sum::<f64>() / (r - 1.0);
    let q: Vec<f64> = draws.iter().map(|d| d.1 - (d.0 - mean_psi).powi(2)).collect();
    let q_law = moments_with_se(&q);
    Ok(SuperPopulationSummary {
        replicates: cfg.replicates,
        mean_psi,
        mean_sigma,
        psi_variance,
        difference: mean_sigma - psi_variance,
        std_error: q_law.mean_se,
    })
}

/// Deterministic family of designs with growing within-pair size imbalance.
///
/// Pair `k` (from 0) has clusters of `base_size + imbalance * k` and
/// `base_size` units. Unit effects are `effect + effect_slope * n_jk`, the
/// second cluster's control mean sits `gap_slope * (n_1k - n_2k)` above the
/// first's, and control outcomes spread as -1, 0, 1 around the mean.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ImbalanceSweep {
    pub m: usize,
    pub base_size: usize,
    pub imbalances: Vec<usize>,
    pub effect: f64,
    pub effect_slope: f64,
    pub gap_slope: f64,
}

impl Default for ImbalanceSweep {
    fn default() -> Self {
        Self {
            m: 6,
            base_size: 2,
            imbalances: vec![0, 1, 2, 4],
            effect: 1.0,
            effect_slope: 0.5,
            gap_slope: 0.0,
        }
    }
}

impl ImbalanceSweep {
    pub fn dataset(&self, imbalance: usize) -> Result<PotentialDataset> {
        if self.m < 2 || self.base_size < 1 {
            return Err(Error::InvalidArgument(
                "sweep needs at least two pairs and clusters of at least one unit".into(),
            ));
        }
        let cluster = |n: usize, mean: f64| {
            let tau = self.effect + self.effect_slope * n as f64;
            PotentialCluster::new(
                (0..n)
                    .map(|i| {
                        let y0 = mean + (i % 3) as f64 - 1.0;
                        PotentialUnit::new(y0, y0 + tau)
                    })
                    .collect(),
            )
        };
        let pairs = (0..self.m)
            .map(|k| {
                let n1 = self.base_size + imbalance * k;
                let n2 = self.base_size;
                let gap = self.gap_slope * (n1 - n2) as f64;
                PotentialPair::new(k.to_string(), cluster(n1, 0.0), cluster(n2, gap))
            })
            .collect();
        PotentialDataset::new(pairs)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct BiasVarianceRow {
    pub imbalance: usize,
    pub estimator: String,
    pub squared_bias: f64,
    pub variance: f64,
    pub mse: f64,
}

/// Exact randomization bias against SATE, variance and MSE of the
/// arithmetic- and harmonic-weighted estimators at each sweep point.
pub fn bias_variance_profile(sweep: &ImbalanceSweep) -> Result<Vec<BiasVarianceRow>> {
    let mut rows = Vec::new();
    for &imbalance in &sweep.imbalances {
        let pd = sweep.dataset(imbalance)?;
        let truth = true_estimand(&pd, Estimand::Sate)?;
        for (name, scheme) in [
            ("arithmetic", WeightScheme::ArithmeticSample),
            ("harmonic", WeightScheme::HarmonicSample),
        ] {
            let law = exact_law(&pd, &Statistic::Psi(scheme))?;
            let b2 = (law.mean() - truth).powi(2);
            rows.push(BiasVarianceRow {
                imbalance,
                estimator: name.to_string(),
                squared_bias: b2,
                variance: law.variance(),
                mse: b2 + law.variance(),
            });
        }
    }
    Ok(rows)
}
