//! Point estimators for matched-pair and unmatched cluster-randomized designs.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::{differences_for, Estimand, MpcrDataset, PairDifference, Response, WeightScheme};

/// `sum(w_k D_k) / sum(w_k)` over precomputed pair differences.
pub fn weighted_difference(diffs: &[PairDifference]) -> f64 {
    let num: f64 = diffs.iter().map(|d| d.raw_weight * d.observed_difference).sum();
    let den: f64 = diffs.iter().map(|d| d.raw_weight).sum();
    num / den
}

pub(crate) fn resolve_scheme(estimand: Estimand, scheme: Option<&WeightScheme>) -> WeightScheme {
    scheme.cloned().unwrap_or_else(|| estimand.default_scheme())
}

pub(crate) fn estimate_for(dataset: &MpcrDataset, scheme: &WeightScheme, response: Response) -> Result<f64> {
    Ok(weighted_difference(&differences_for(dataset, scheme, response)?))
}

/// Weighted difference-in-means estimator `psi_hat(w)`.
///
/// Without an explicit scheme, SATE and UATE use `n_1k + n_2k` and CATE and
/// PATE use `N_1k + N_2k`.
pub fn point_estimate(dataset: &MpcrDataset, estimand: Estimand, scheme: Option<&WeightScheme>) -> Result<f64> {
    estimand.check(dataset)?;
    estimate_for(dataset, &resolve_scheme(estimand, scheme), Response::Outcome)
}

/// Unweighted mean of the pair differences, i.e. the estimator that treats
/// each cluster mean as a single observation.
pub fn cluster_level_estimate(dataset: &MpcrDataset) -> f64 {
    let diffs: Vec<f64> = dataset
        .pairs()
        .iter()
        .map(|p| p.treated().mean_outcome() - p.control().mean_outcome())
        .collect();
    diffs.iter().sum::<f64>() / diffs.len() as f64
}

/// Known group membership for the mixture estimator: pair id to label.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct GroupLabeling(BTreeMap<String, String>);

impl GroupLabeling {
    pub fn new(labels: BTreeMap<String, String>) -> Self {
        Self(labels)
    }

    pub fn label(&self, pair_id: &str) -> Option<&str> {
        self.0.get(pair_id).map(String::as_str)
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    fn check(&self, dataset: &MpcrDataset) -> Result<()> {
        if self.0.is_empty() {
            return Err(Error::InvalidArgument("empty group label set".into()));
        }
        for id in self.0.keys() {
            if dataset.pair(id).is_none() {
                return Err(Error::UnknownPair(id.clone()));
            }
        }
        for p in dataset.pairs() {
            if !self.0.contains_key(&p.pair_id) {
                return Err(Error::InvalidArgument(format!("pair {} has no group label", p.pair_id)));
            }
        }
        Ok(())
    }
}

/// Mixture estimator for a CATE-type target when pairs fall into known
/// homogeneous groups.
///
/// Within each group the pair differences are combined with harmonic weights
/// `n_1k n_2k / (n_1k + n_2k)`; group means are then averaged with weights
/// `(N_1k + N_2k) / N`.
pub fn mixture_estimate(dataset: &MpcrDataset, groups: &GroupLabeling) -> Result<f64> {
    Estimand::Cate.check(dataset)?;
    groups.check(dataset)?;
    let diffs = differences_for(dataset, &WeightScheme::HarmonicSample, Response::Outcome)?;

    let mut sums: BTreeMap<&str, (f64, f64)> = BTreeMap::new();
    for (p, d) in dataset.pairs().iter().zip(&diffs) {
        let label = groups.label(&p.pair_id).unwrap_or_default();
        let e = sums.entry(label).or_insert((0.0, 0.0));
        e.0 += d.raw_weight * d.observed_difference;
        e.1 += d.raw_weight;
    }
    let total = dataset.total_population().unwrap_or(0) as f64;
    let mut out = 0.0;
    for p in dataset.pairs() {
        let (num, den) = sums[groups.label(&p.pair_id).unwrap_or_default()];
        let size = p.population_size().unwrap_or(0);
        out += size as f64 * num / den;
    }
    Ok(out / total)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct UmcrCluster {
    /// `Z_j`: 1 for treated.
    pub assignment: u8,
    pub outcomes: Vec<f64>,
    pub population_size: Option<u64>,
}

impl UmcrCluster {
    fn mean(&self) -> f64 {
        crate::model::mean(&self.outcomes)
    }
}

/// Unmatched cluster-randomized design: `2m` clusters, `m` of them treated.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct UmcrDataset {
    clusters: Vec<UmcrCluster>,
}

impl UmcrDataset {
    pub fn new(clusters: Vec<UmcrCluster>) -> Result<Self> {
        if clusters.is_empty() || !clusters.len().is_multiple_of(2) {
            return Err(Error::InvalidArgument(format!(
                "an unmatched design needs an even, positive number of clusters, got {}",
                clusters.len()
            )));
        }
        for (j, c) in clusters.iter().enumerate() {
            if c.outcomes.is_empty() {
                return Err(Error::InvalidArgument(format!("cluster {j} is empty")));
            }
            if c.assignment > 1 {
                return Err(Error::InvalidArgument(format!(
                    "cluster {j}: assignment must be 0 or 1"
                )));
            }
            if let Some(pop) = c.population_size {
                if pop < c.outcomes.len() as u64 {
                    return Err(Error::InvalidArgument(format!(
                        "cluster {j}: population size below sample size"
                    )));
                }
            }
        }
        let treated = clusters.iter().filter(|c| c.assignment == 1).count();
        if 2 * treated != clusters.len() {
            return Err(Error::InvalidArgument(format!(
                "{treated} of {} clusters treated; exactly half must be",
                clusters.len()
            )));
        }
        let with_pop = clusters.iter().filter(|c| c.population_size.is_some()).count();
        if with_pop != 0 && with_pop != clusters.len() {
            return Err(Error::PartialPopulations);
        }
        Ok(Self { clusters })
    }

    pub fn clusters(&self) -> &[UmcrCluster] {
        &self.clusters
    }

    pub fn n(&self) -> usize {
        self.clusters.iter().map(|c| c.outcomes.len()).sum()
    }

    fn has_populations(&self) -> bool {
        self.clusters[0].population_size.is_some()
    }
}

/// Weighted estimator for the unmatched design. Weights are `n_j` for SATE
/// and UATE and proportional to `N_j` for CATE and PATE, normalized to sum to
/// `n`.
pub fn umcr_point_estimate(umcr: &UmcrDataset, estimand: Estimand) -> Result<f64> {
    let n = umcr.n() as f64;
    let raw: Vec<f64> = if estimand.requires_populations() {
        if !umcr.has_populations() {
            return Err(Error::PopulationsRequired(estimand));
        }
        umcr.clusters
            .iter()
            .map(|c| c.population_size.unwrap_or(0) as f64)
            .collect()
    } else {
        umcr.clusters.iter().map(|c| c.outcomes.len() as f64).collect()
    };
    let total: f64 = raw.iter().sum();
    let sum: f64 = umcr
        .clusters
        .iter()
        .zip(&raw)
        .map(|(c, w)| {
            let w_tilde = n * w / total;
            let sign = if c.assignment == 1 { 1.0 } else { -1.0 };
            sign * w_tilde * c.mean()
        })
        .sum();
    Ok(2.0 * sum / n)
}

/// Difference of pooled unit means between the treated and control arms.
pub fn umcr_kappa(umcr: &UmcrDataset) -> Result<f64> {
    let arm = |z: u8| {
        let (s, c) = umcr
            .clusters
            .iter()
            .filter(|c| c.assignment == z)
            .fold((0.0, 0usize), |(s, n), c| {
                (s + c.outcomes.iter().sum::<f64>(), n + c.outcomes.len())
            });
        (c > 0).then(|| s / c as f64)
    };
    match (arm(1), arm(0)) {
        (Some(t), Some(c)) => Ok(t - c),
        _ => Err(Error::Degenerate("all clusters are in the same arm".into())),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::fixtures::*;

    #[test]
    fn point_estimates_on_canonical_data() {
        assert_eq!(point_estimate(&ds_a(), Estimand::Sate, None).unwrap(), 3.0);
        let v = point_estimate(&ds_c(), Estimand::Sate, Some(&WeightScheme::HarmonicSample)).unwrap();
        assert!((v - 26.0 / 7.0).abs() < 1e-15);
        // Equal cluster means within each pair.
        let flat = MpcrDataset::new(vec![
            pair("1", 1, (&[2.0, 2.0], None), (&[1.0, 3.0], None), None),
            pair("2", 0, (&[4.0], None), (&[4.0, 4.0, 4.0], None), None),
        ])
        .unwrap();
        assert_eq!(point_estimate(&flat, Estimand::Sate, None).unwrap(), 0.0);
    }

    #[test]
    fn population_estimands_need_populations() {
        let ds = MpcrDataset::new(vec![pair("1", 1, (&[1.0], None), (&[2.0], None), None)]).unwrap();
        for e in [Estimand::Cate, Estimand::Pate] {
            assert_eq!(
                point_estimate(&ds, e, Some(&WeightScheme::Constant)),
                Err(Error::PopulationsRequired(e))
            );
        }
    }

    #[test]
    fn cluster_level() {
        assert_eq!(cluster_level_estimate(&ds_a()), 3.0);
        assert_eq!(cluster_level_estimate(&ds_c()), 3.5);
        assert_eq!(
            cluster_level_estimate(&ds_c()),
            point_estimate(&ds_c(), Estimand::Sate, Some(&WeightScheme::Constant)).unwrap()
        );
    }

    fn labels(pairs: &[(&str, &str)]) -> GroupLabeling {
        GroupLabeling::new(pairs.iter().map(|(a, b)| (a.to_string(), b.to_string())).collect())
    }

    #[test]
    fn mixture_on_canonical_data() {
        let one = labels(&[("1", "g"), ("2", "g")]);
        let own = labels(&[("1", "a"), ("2", "b")]);
        assert_eq!(mixture_estimate(&ds_a(), &one).unwrap(), 3.0);
        assert_eq!(mixture_estimate(&ds_a(), &own).unwrap(), 3.0);
        assert_eq!(mixture_estimate(&ds_c(), &own).unwrap(), 3.5);

        assert!(mixture_estimate(&ds_a(), &labels(&[])).is_err());
        assert!(mixture_estimate(&ds_a(), &labels(&[("1", "a")])).is_err());
        assert_eq!(
            mixture_estimate(&ds_a(), &labels(&[("1", "a"), ("2", "a"), ("9", "a")])),
            Err(Error::UnknownPair("9".into()))
        );
    }

    #[test]
    fn mixture_nesting() {
        // One group: the harmonic-weight estimator.
        let one = labels(&[("1", "g"), ("2", "g")]);
        let harmonic = point_estimate(&ds_c(), Estimand::Cate, Some(&WeightScheme::HarmonicSample)).unwrap();
        assert!((mixture_estimate(&ds_c(), &one).unwrap() - harmonic).abs() < 1e-15);
        // One group per pair: the population-weight estimator.
        let own = labels(&[("1", "a"), ("2", "b")]);
        let arith = point_estimate(&ds_c(), Estimand::Cate, None).unwrap();
        assert!((mixture_estimate(&ds_c(), &own).unwrap() - arith).abs() < 1e-15);
    }

    fn umcr(outcomes: &[&[f64]], z: &[u8]) -> UmcrDataset {
        UmcrDataset::new(
            outcomes
                .iter()
                .zip(z)
                .map(|(y, &z)| UmcrCluster {
                    assignment: z,
                    outcomes: y.to_vec(),
                    population_size: None,
                })
                .collect(),
        )
        .unwrap()
    }

    fn ds_u() -> UmcrDataset {
        umcr(&[&[2.0, 4.0], &[1.0, 3.0], &[5.0, 7.0], &[0.0, 2.0]], &[1, 0, 1, 0])
    }

    #[test]
    fn umcr_estimates() {
        assert_eq!(umcr_point_estimate(&ds_u(), Estimand::Sate).unwrap(), 3.0);
        assert_eq!(umcr_kappa(&ds_u()).unwrap(), 3.0);
        let zeros = umcr(&[&[0.0], &[0.0, 0.0]], &[1, 0]);
        assert_eq!(umcr_point_estimate(&zeros, Estimand::Uate).unwrap(), 0.0);
        let two = umcr(&[&[1.0, 6.0], &[2.0, 2.0]], &[0, 1]);
        assert_eq!(umcr_point_estimate(&two, Estimand::Sate).unwrap(), 2.0 - 3.5);
        let constant = umcr(&[&[4.0], &[4.0, 4.0], &[4.0, 4.0, 4.0], &[4.0]], &[0, 1, 1, 0]);
        assert_eq!(umcr_kappa(&constant).unwrap(), 0.0);
        assert!(matches!(
            umcr_point_estimate(&ds_u(), Estimand::Pate),
            Err(Error::PopulationsRequired(_))
        ));
    }

    #[test]
    fn umcr_validation() {
        let bad = |z: &[u8]| {
            UmcrDataset::new(
                z.iter()
                    .map(|&z| UmcrCluster {
                        assignment: z,
                        outcomes: vec![1.0],
                        population_size: None,
                    })
                    .collect(),
            )
        };
        assert!(bad(&[1, 1, 0]).is_err());
        assert!(bad(&[1, 1, 1, 0]).is_err());
        assert!(bad(&[]).is_err());
        assert!(bad(&[1, 0]).is_ok());
    }

    #[test]
    fn umcr_population_weights() {
        let mut clusters = ds_u().clusters().to_vec();
        for (c, pop) in clusters.iter_mut().zip([4, 2, 2, 4]) {
            c.population_size = Some(pop);
        }
        let ds = UmcrDataset::new(clusters).unwrap();
        // Normalized weights n N_j / sum(N) = (8/3, 4/3, 4/3, 8/3).
        let want = 2.0 / 8.0 * (8.0 / 3.0 * 3.0 - 4.0 / 3.0 * 2.0 + 4.0 / 3.0 * 6.0 - 8.0 / 3.0 * 1.0);
        assert!((umcr_point_estimate(&ds, Estimand::Cate).unwrap() - want).abs() < 1e-14);
    }
}
