use std::collections::HashSet;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::{ClusterData, Estimand, MatchedPair, MpcrDataset, Slot};

/// Both potential outcomes of one unit, and optionally both potential
/// receipts `(R(0), R(1))`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PotentialUnit {
    pub y0: f64,
    pub y1: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub receipts: Option<(bool, bool)>,
}

impl PotentialUnit {
    pub fn new(y0: f64, y1: f64) -> Self {
        Self { y0, y1, receipts: None }
    }

    pub fn with_receipts(y0: f64, y1: f64, r0: bool, r1: bool) -> Self {
        Self {
            y0,
            y1,
            receipts: Some((r0, r1)),
        }
    }

    fn value(&self, arm: Arm, series: Series) -> f64 {
        match (series, arm) {
            (Series::Outcome, Arm::Control) => self.y0,
            (Series::Outcome, Arm::Treated) => self.y1,
            (Series::Receipt, Arm::Control) => self.receipts.map_or(f64::NAN, |r| r.0 as u8 as f64),
            (Series::Receipt, Arm::Treated) => self.receipts.map_or(f64::NAN, |r| r.1 as u8 as f64),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub(crate) enum Arm {
    Control,
    Treated,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub(crate) enum Series {
    Outcome,
    Receipt,
}

/// The listed units form the cluster population. The first `sample_size` of
/// them are the fixed sample; under unit sampling every subset of that size
/// is equally likely instead.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PotentialCluster {
    pub units: Vec<PotentialUnit>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub sample_size: Option<usize>,
}

impl PotentialCluster {
    /// Every unit sampled.
    pub fn new(units: Vec<PotentialUnit>) -> Self {
        Self {
            units,
            sample_size: None,
        }
    }

    pub fn sampled(units: Vec<PotentialUnit>, sample_size: usize) -> Self {
        Self {
            units,
            sample_size: Some(sample_size),
        }
    }

    /// `n_jk`
    pub fn sample_size(&self) -> usize {
        self.sample_size.unwrap_or(self.units.len())
    }

    /// `N_jk`
    pub fn population_size(&self) -> usize {
        self.units.len()
    }

    pub(crate) fn sample(&self) -> &[PotentialUnit] {
        &self.units[..self.sample_size()]
    }

    pub(crate) fn mean(units: &[PotentialUnit], arm: Arm, series: Series) -> f64 {
        units.iter().map(|u| u.value(arm, series)).sum::<f64>() / units.len() as f64
    }

    pub(crate) fn observe_units(
        units: &[PotentialUnit],
        pair_id: &str,
        slot: Slot,
        arm: Arm,
        population: usize,
        receipts: bool,
    ) -> Result<ClusterData> {
        let outcomes = units.iter().map(|u| u.value(arm, Series::Outcome)).collect();
        let r = receipts.then(|| units.iter().map(|u| u.value(arm, Series::Receipt) == 1.0).collect());
        ClusterData::new(pair_id, slot, outcomes, r, Some(population as u64))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PotentialPair {
    pub pair_id: String,
    pub clusters: [PotentialCluster; 2],
}

impl PotentialPair {
    pub fn new(pair_id: impl Into<String>, first: PotentialCluster, second: PotentialCluster) -> Self {
        Self {
            pair_id: pair_id.into(),
            clusters: [first, second],
        }
    }

    pub fn sample_size(&self) -> usize {
        self.clusters[0].sample_size() + self.clusters[1].sample_size()
    }

    pub fn population_size(&self) -> usize {
        self.clusters[0].population_size() + self.clusters[1].population_size()
    }

    /// Observed pair under `Z_k = z` given the sampled units of each slot.
    pub(crate) fn observe_with(&self, z: u8, samples: [&[PotentialUnit]; 2], receipts: bool) -> Result<MatchedPair> {
        let arm = |slot: usize| {
            if (slot == 0) == (z == 1) {
                Arm::Treated
            } else {
                Arm::Control
            }
        };
        let first = PotentialCluster::observe_units(
            samples[0],
            &self.pair_id,
            Slot::First,
            arm(0),
            self.clusters[0].population_size(),
            receipts,
        )?;
        let second = PotentialCluster::observe_units(
            samples[1],
            &self.pair_id,
            Slot::Second,
            arm(1),
            self.clusters[1].population_size(),
            receipts,
        )?;
        MatchedPair::new(self.pair_id.clone(), z, first, second)
    }

    /// `(D_k(1), D_k(0))` computed from the given unit sets.
    pub(crate) fn potential_differences(samples: [&[PotentialUnit]; 2], series: Series) -> (f64, f64) {
        let m = PotentialCluster::mean;
        (
            m(samples[0], Arm::Treated, series) - m(samples[1], Arm::Control, series),
            m(samples[1], Arm::Treated, series) - m(samples[0], Arm::Control, series),
        )
    }

    pub(crate) fn fixed_sample(&self) -> [&[PotentialUnit]; 2] {
        [self.clusters[0].sample(), self.clusters[1].sample()]
    }

    pub(crate) fn population(&self) -> [&[PotentialUnit]; 2] {
        [&self.clusters[0].units, &self.clusters[1].units]
    }
}

/// Potential outcomes for a whole matched-pair experiment.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "Vec<PotentialPair>", into = "Vec<PotentialPair>")]
pub struct PotentialDataset {
    pairs: Vec<PotentialPair>,
    receipts: bool,
}

impl TryFrom<Vec<PotentialPair>> for PotentialDataset {
    type Error = Error;

    fn try_from(pairs: Vec<PotentialPair>) -> Result<Self> {
        Self::new(pairs)
    }
}

impl From<PotentialDataset> for Vec<PotentialPair> {
    fn from(pd: PotentialDataset) -> Self {
        pd.pairs
    }
}

impl PotentialDataset {
    pub fn new(pairs: Vec<PotentialPair>) -> Result<Self> {
        if pairs.is_empty() {
            return Err(Error::EmptyDesign);
        }
        let mut seen = HashSet::new();
        let mut with_receipts = 0usize;
        let mut units = 0usize;
        for p in &pairs {
            if !seen.insert(p.pair_id.as_str()) {
                return Err(Error::DuplicatePair(p.pair_id.clone()));
            }
            for (j, c) in p.clusters.iter().enumerate() {
                let slot = j as u8 + 1;
                if c.units.is_empty() || c.sample_size() == 0 {
                    return Err(Error::EmptyCluster {
                        pair_id: p.pair_id.clone(),
                        slot,
                    });
                }
                if c.sample_size() > c.units.len() {
                    return Err(Error::PopulationTooSmall {
                        pair_id: p.pair_id.clone(),
                        slot,
                        population: c.units.len() as u64,
                        sample: c.sample_size(),
                    });
                }
                for u in &c.units {
                    units += 1;
                    if !(u.y0.is_finite() && u.y1.is_finite()) {
                        return Err(Error::InvalidArgument(format!(
                            "non-finite potential outcome in pair {}, slot {slot}",
                            p.pair_id
                        )));
                    }
                    if let Some((r0, r1)) = u.receipts {
                        with_receipts += 1;
                        if r0 && !r1 {
                            return Err(Error::InvalidArgument(format!(
                                "monotonicity violated in pair {}, slot {slot}: R(1) < R(0)",
                                p.pair_id
                            )));
                        }
                    }
                }
            }
        }
        if with_receipts != 0 && with_receipts != units {
            return Err(Error::PartialReceipts);
        }
        Ok(Self {
            pairs,
            receipts: with_receipts != 0,
        })
    }

    pub fn pairs(&self) -> &[PotentialPair] {
        &self.pairs
    }

    pub fn m(&self) -> usize {
        self.pairs.len()
    }

    /// Total number of sampled units.
    pub fn n(&self) -> usize {
        self.pairs.iter().map(PotentialPair::sample_size).sum()
    }

    /// Total number of population units.
    pub fn population_size(&self) -> usize {
        self.pairs.iter().map(PotentialPair::population_size).sum()
    }

    pub fn has_receipts(&self) -> bool {
        self.receipts
    }

    /// True when some cluster samples fewer units than it lists.
    pub fn has_unit_sampling(&self) -> bool {
        self.pairs
            .iter()
            .flat_map(|p| &p.clusters)
            .any(|c| c.sample_size() < c.population_size())
    }

    /// Observed data for assignment vector `z` using the fixed samples.
    /// Population sizes are always attached.
    pub fn observe(&self, z: &[u8]) -> Result<MpcrDataset> {
        if z.len() != self.m() {
            return Err(Error::InvalidArgument(format!(
                "{} assignments for {} pairs",
                z.len(),
                self.m()
            )));
        }
        let pairs = self
            .pairs
            .iter()
            .zip(z)
            .map(|(p, &zk)| p.observe_with(zk, p.fixed_sample(), self.receipts))
            .collect::<Result<Vec<_>>>()?;
        MpcrDataset::new(pairs)
    }

    /// Observed data for the assignment encoded in the low `m` bits of
    /// `index`, bit `k` being `Z_k`.
    pub fn observe_index(&self, index: u64) -> Result<MpcrDataset> {
        self.observe(&assignment_bits(index, self.m()))
    }
}

pub(crate) fn assignment_bits(index: u64, m: usize) -> Vec<u8> {
    (0..m).map(|k| ((index >> k) & 1) as u8).collect()
}

/// The finite-sample average effect: SATE over the fixed samples, CATE over
/// every listed unit.
pub fn true_estimand(pd: &PotentialDataset, estimand: Estimand) -> Result<f64> {
    let units: Vec<&PotentialUnit> = match estimand {
        Estimand::Sate => pd.pairs.iter().flat_map(|p| p.fixed_sample()).flatten().collect(),
        Estimand::Cate => pd.pairs.iter().flat_map(|p| p.population()).flatten().collect(),
        other => {
            return Err(Error::InvalidArgument(format!(
                "{other} is a super-population quantity; only SATE and CATE are defined on a finite dataset"
            )))
        }
    };
    Ok(units.iter().map(|u| u.y1 - u.y0).sum::<f64>() / units.len() as f64)
}


#[cfg(test)]
mod tests {
    use super::fixtures::*;
    use super::*;

    #[test]
    fn estimands() {
        let pd = ds_p();
        assert_eq!(true_estimand(&pd, Estimand::Sate).unwrap(), 3.0);
        assert_eq!(true_estimand(&pd, Estimand::Cate).unwrap(), 3.0);
        assert!(true_estimand(&pd, Estimand::Pate).is_err());

        let shifted = PotentialDataset::new(vec![
            simple_pair("a", units(&[1.0, 5.0], &[3.5, 7.5]), units(&[0.0], &[2.5])),
            simple_pair("b", units(&[2.0], &[4.5]), units(&[9.0, 1.0, 2.0], &[11.5, 3.5, 4.5])),
        ])
        .unwrap();
        assert!((true_estimand(&shifted, Estimand::Sate).unwrap() - 2.5).abs() < 1e-15);
        let null = PotentialDataset::new(vec![simple_pair("a", units(&[1.0], &[1.0]), units(&[4.0], &[4.0]))]).unwrap();
        assert_eq!(true_estimand(&null, Estimand::Sate).unwrap(), 0.0);
    }

    #[test]
    fn sampled_estimands_differ() {
        let c = PotentialCluster::sampled(units(&[0.0, 0.0], &[1.0, 3.0]), 1);
        let pd = PotentialDataset::new(vec![PotentialPair::new("a", c.clone(), c)]).unwrap();
        assert!(pd.has_unit_sampling());
        assert_eq!((pd.n(), pd.population_size()), (2, 4));
        assert_eq!(true_estimand(&pd, Estimand::Sate).unwrap(), 1.0);
        assert_eq!(true_estimand(&pd, Estimand::Cate).unwrap(), 2.0);
    }

    #[test]
    fn observation() {
        let pd = ds_p();
        let ds = pd.observe(&[1, 0]).unwrap();
        assert_eq!(ds.pairs()[0].treated().outcomes(), &[2.0, 4.0]);
        assert_eq!(ds.pairs()[0].control().outcomes(), &[1.0, 3.0]);
        assert_eq!(ds.pairs()[1].treated().slot, Slot::Second);
        assert_eq!(ds.total_population(), Some(8));
        assert_eq!(pd.observe_index(0b01).unwrap(), ds);
        assert!(pd.observe(&[1]).is_err());
    }

    #[test]
    fn receipts_observed_by_arm() {
        let u = PotentialUnit::with_receipts;
        let pd = PotentialDataset::new(vec![PotentialPair::new(
            "a",
            PotentialCluster::new(vec![u(0.0, 1.0, false, true), u(0.0, 1.0, true, true)]),
            PotentialCluster::new(vec![u(0.0, 1.0, false, false)]),
        )])
        .unwrap();
        let ds = pd.observe(&[0]).unwrap();
        assert_eq!(ds.pairs()[0].cluster(Slot::First).receipts(), Some(&[false, true][..]));
        assert_eq!(ds.pairs()[0].cluster(Slot::Second).receipts(), Some(&[false][..]));
    }

    #[test]
    fn rejects_bad_shapes() {
        let u = PotentialUnit::with_receipts;
        let defier = PotentialDataset::new(vec![simple_pair(
            "a",
            vec![u(0.0, 0.0, true, false)],
            vec![u(0.0, 0.0, true, true)],
        )]);
        assert!(matches!(defier, Err(Error::InvalidArgument(_))));
        let partial = PotentialDataset::new(vec![simple_pair(
            "a",
            vec![u(0.0, 0.0, false, true)],
            units(&[0.0], &[0.0]),
        )]);
        assert_eq!(partial, Err(Error::PartialReceipts));
        let oversampled = PotentialDataset::new(vec![PotentialPair::new(
            "a",
            PotentialCluster::sampled(units(&[0.0], &[0.0]), 2),
            PotentialCluster::new(units(&[0.0], &[0.0])),
        )]);
        assert!(matches!(oversampled, Err(Error::PopulationTooSmall { .. })));
        assert!(matches!(
            PotentialDataset::new(vec![simple_pair("a", vec![], units(&[0.0], &[0.0]))]),
            Err(Error::EmptyCluster { .. })
        ));
    }

    #[test]
    fn json_round_trip() {
        let pd = ds_p();
        let s = serde_json::to_string(&pd).unwrap();
        let back: PotentialDataset = serde_json::from_str(&s).unwrap();
        assert_eq!(back, pd);
    }
}
