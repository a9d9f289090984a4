//! Matched-pair cluster-randomized datasets.
//!
//! A dataset holds `m` pairs of clusters. Within pair `k` the assignment
//! `Z_k` decides which slot is treated: slot 1 when `Z_k = 1`, slot 2 when
//! `Z_k = 0`. Treatment status is never stored per unit.

use std::collections::{BTreeMap, HashMap, HashSet};
use std::fmt;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Position of a cluster within its pair.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum Slot {
    First,
    Second,
}

impl Slot {
    pub fn from_number(n: i64) -> Option<Slot> {
        match n {
            1 => Some(Slot::First),
            2 => Some(Slot::Second),
            _ => None,
        }
    }

    pub fn number(self) -> u8 {
        match self {
            Slot::First => 1,
            Slot::Second => 2,
        }
    }

    pub fn other(self) -> Slot {
        match self {
            Slot::First => Slot::Second,
            Slot::Second => Slot::First,
        }
    }

    fn index(self) -> usize {
        self.number() as usize - 1
    }
}

impl fmt::Display for Slot {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.number())
    }
}

/// One observed unit: outcome `Y_ijk` and optional receipt `R_ijk`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct UnitRecord {
    pub pair_id: String,
    pub slot: Slot,
    pub outcome: f64,
    pub receipt: Option<u8>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ClusterData {
    pub pair_id: String,
    pub slot: Slot,
    outcomes: Vec<f64>,
    receipts: Option<Vec<bool>>,
    population_size: Option<u64>,
}

impl ClusterData {
    pub fn new(
        pair_id: impl Into<String>,
        slot: Slot,
        outcomes: Vec<f64>,
        receipts: Option<Vec<bool>>,
        population_size: Option<u64>,
    ) -> Result<Self> {
        let pair_id = pair_id.into();
        if outcomes.is_empty() {
            return Err(Error::EmptyCluster {
                pair_id,
                slot: slot.number(),
            });
        }
        if let Some(r) = &receipts {
            if r.len() != outcomes.len() {
                return Err(Error::PartialReceipts);
            }
        }
        if let Some(pop) = population_size {
            if pop < outcomes.len() as u64 {
                return Err(Error::PopulationTooSmall {
                    pair_id,
                    slot: slot.number(),
                    population: pop,
                    sample: outcomes.len(),
                });
            }
        }
        Ok(Self {
            pair_id,
            slot,
            outcomes,
            receipts,
            population_size,
        })
    }

    pub fn outcomes(&self) -> &[f64] {
        &self.outcomes
    }

    pub fn receipts(&self) -> Option<&[bool]> {
        self.receipts.as_deref()
    }

    /// `n_jk`, the number of sampled units.
    pub fn sample_size(&self) -> usize {
        self.outcomes.len()
    }

    /// `N_jk`, when known.
    pub fn population_size(&self) -> Option<u64> {
        self.population_size
    }

    pub fn mean_outcome(&self) -> f64 {
        mean(&self.outcomes)
    }

    pub fn mean_receipt(&self) -> Option<f64> {
        self.receipts
            .as_ref()
            .map(|r| r.iter().filter(|&&x| x).count() as f64 / r.len() as f64)
    }

    /// Unbiased within-cluster sample variance of the outcome; `None` for a
    /// single-unit cluster.
    pub fn outcome_variance(&self) -> Option<f64> {
        let n = self.outcomes.len();
        if n < 2 {
            return None;
        }
        let mu = self.mean_outcome();
        let ss: f64 = self.outcomes.iter().map(|y| (y - mu) * (y - mu)).sum();
        Some(ss / (n - 1) as f64)
    }

    pub(crate) fn mean_of(&self, response: Response) -> Result<f64> {
        match response {
            Response::Outcome => Ok(self.mean_outcome()),
            Response::Receipt => self.mean_receipt().ok_or(Error::MissingReceipts),
        }
    }

    fn map_outcomes(&self, f: &impl Fn(f64) -> f64) -> ClusterData {
        ClusterData {
            outcomes: self.outcomes.iter().map(|&y| f(y)).collect(),
            ..self.clone()
        }
    }
}

pub(crate) fn mean(xs: &[f64]) -> f64 {
    xs.iter().sum::<f64>() / xs.len() as f64
}

/// Which observed series a pair-level computation reads.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub(crate) enum Response {
    Outcome,
    Receipt,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MatchedPair {
    pub pair_id: String,
    assignment: u8,
    clusters: [ClusterData; 2],
}

impl MatchedPair {
    /// `assignment` is `Z_k`: 1 treats slot 1, 0 treats slot 2.
    pub fn new(pair_id: impl Into<String>, assignment: u8, first: ClusterData, second: ClusterData) -> Result<Self> {
        let pair_id = pair_id.into();
        if assignment > 1 {
            return Err(Error::InvalidAssignment {
                pair_id,
                value: assignment as i64,
            });
        }
        if first.slot != Slot::First || second.slot != Slot::Second {
            return Err(Error::MalformedPair {
                pair_id,
                detail: "clusters must occupy slots 1 and 2".into(),
            });
        }
        if first.pair_id != pair_id || second.pair_id != pair_id {
            return Err(Error::MalformedPair {
                pair_id,
                detail: "cluster pair ids do not match".into(),
            });
        }
        if first.receipts.is_some() != second.receipts.is_some() {
            return Err(Error::PartialReceipts);
        }
        if first.population_size.is_some() != second.population_size.is_some() {
            return Err(Error::PartialPopulations);
        }
        Ok(Self {
            pair_id,
            assignment,
            clusters: [first, second],
        })
    }

    pub fn assignment(&self) -> u8 {
        self.assignment
    }

    pub fn cluster(&self, slot: Slot) -> &ClusterData {
        &self.clusters[slot.index()]
    }

    pub fn treated_slot(&self) -> Slot {
        if self.assignment == 1 {
            Slot::First
        } else {
            Slot::Second
        }
    }

    pub fn treated(&self) -> &ClusterData {
        self.cluster(self.treated_slot())
    }

    pub fn control(&self) -> &ClusterData {
        self.cluster(self.treated_slot().other())
    }

    pub fn sample_size(&self) -> usize {
        self.clusters[0].sample_size() + self.clusters[1].sample_size()
    }

    /// `N_1k + N_2k`, when known.
    pub fn population_size(&self) -> Option<u64> {
        Some(self.clusters[0].population_size? + self.clusters[1].population_size?)
    }

    /// `D_k` for the requested series: treated mean minus control mean.
    pub(crate) fn difference(&self, response: Response) -> Result<f64> {
        Ok(self.treated().mean_of(response)? - self.control().mean_of(response)?)
    }

    /// The same pair with slot labels exchanged and `Z_k` flipped.
    pub fn relabeled(&self) -> MatchedPair {
        let [a, b] = self.clusters.clone();
        let swap = |mut c: ClusterData| {
            c.slot = c.slot.other();
            c
        };
        MatchedPair {
            pair_id: self.pair_id.clone(),
            assignment: 1 - self.assignment,
            clusters: [swap(b), swap(a)],
        }
    }
}

/// A validated matched-pair dataset.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MpcrDataset {
    pairs: Vec<MatchedPair>,
}

impl MpcrDataset {
    pub fn new(pairs: Vec<MatchedPair>) -> Result<Self> {
        if pairs.is_empty() {
            return Err(Error::EmptyDesign);
        }
        let mut seen = HashSet::new();
        for p in &pairs {
            if !seen.insert(p.pair_id.as_str()) {
                return Err(Error::DuplicatePair(p.pair_id.clone()));
            }
        }
        let with_pop = pairs.iter().filter(|p| p.clusters[0].population_size.is_some()).count();
        if with_pop != 0 && with_pop != pairs.len() {
            return Err(Error::PartialPopulations);
        }
        let with_receipts = pairs.iter().filter(|p| p.clusters[0].receipts.is_some()).count();
        if with_receipts != 0 && with_receipts != pairs.len() {
            return Err(Error::PartialReceipts);
        }
        Ok(Self { pairs })
    }

    pub fn pairs(&self) -> &[MatchedPair] {
        &self.pairs
    }

    /// Number of pairs `m`.
    pub fn m(&self) -> usize {
        self.pairs.len()
    }

    /// Total sampled units `n`.
    pub fn n(&self) -> usize {
        self.pairs.iter().map(MatchedPair::sample_size).sum()
    }

    /// Total population `N`, when population sizes are known.
    pub fn total_population(&self) -> Option<u64> {
        self.pairs.iter().map(MatchedPair::population_size).sum()
    }

    pub fn has_populations(&self) -> bool {
        self.pairs[0].clusters[0].population_size.is_some()
    }

    pub fn has_receipts(&self) -> bool {
        self.pairs[0].clusters[0].receipts.is_some()
    }

    pub fn pair(&self, pair_id: &str) -> Option<&MatchedPair> {
        self.pairs.iter().find(|p| p.pair_id == pair_id)
    }

    /// Cluster-level treatment listing, for [`validate_design`].
    pub fn design(&self) -> Vec<ClusterAssignment> {
        self.pairs
            .iter()
            .flat_map(|p| {
                [Slot::First, Slot::Second].map(|slot| ClusterAssignment {
                    pair_id: p.pair_id.clone(),
                    slot: slot.number() as i64,
                    treated: (p.treated_slot() == slot) as i64,
                })
            })
            .collect()
    }

    pub fn validate(&self) -> ValidationReport {
        validate_design(&self.design())
    }

    /// Applies `f` to every outcome, leaving the design untouched.
    pub fn map_outcomes(&self, f: impl Fn(f64) -> f64) -> MpcrDataset {
        MpcrDataset {
            pairs: self
                .pairs
                .iter()
                .map(|p| MatchedPair {
                    clusters: [p.clusters[0].map_outcomes(&f), p.clusters[1].map_outcomes(&f)],
                    ..p.clone()
                })
                .collect(),
        }
    }

    /// Replaces outcomes with receipts (as 0/1 reals). Fails without receipts.
    pub fn receipts_as_outcomes(&self) -> Result<MpcrDataset> {
        let mut pairs = Vec::with_capacity(self.m());
        for p in &self.pairs {
            let conv = |c: &ClusterData| -> Result<ClusterData> {
                let r = c.receipts.as_ref().ok_or(Error::MissingReceipts)?;
                Ok(ClusterData {
                    outcomes: r.iter().map(|&x| if x { 1.0 } else { 0.0 }).collect(),
                    ..c.clone()
                })
            };
            pairs.push(MatchedPair {
                clusters: [conv(&p.clusters[0])?, conv(&p.clusters[1])?],
                ..p.clone()
            });
        }
        Ok(MpcrDataset { pairs })
    }

    /// The same dataset with every pair relabeled (slots swapped, `Z_k` flipped).
    pub fn relabeled(&self) -> MpcrDataset {
        MpcrDataset {
            pairs: self.pairs.iter().map(MatchedPair::relabeled).collect(),
        }
    }

    pub(crate) fn require_pairs(&self, needed: usize) -> Result<()> {
        if self.m() < needed {
            return Err(Error::TooFewPairs { needed, got: self.m() });
        }
        Ok(())
    }

    pub(crate) fn require_receipts(&self) -> Result<()> {
        if self.has_receipts() {
            Ok(())
        } else {
            Err(Error::MissingReceipts)
        }
    }
}

/// Builds a dataset from unit rows, optional population sizes and per-pair
/// assignments `Z_k`.
///
/// Pairs appear in order of first occurrence in `units`.
pub fn load_dataset(
    units: &[UnitRecord],
    populations: Option<&BTreeMap<(String, Slot), u64>>,
    assignments: &BTreeMap<String, i64>,
) -> Result<MpcrDataset> {
    struct Acc {
        outcomes: Vec<f64>,
        receipts: Vec<Option<u8>>,
    }
    let mut order: Vec<String> = Vec::new();
    let mut clusters: HashMap<(String, Slot), Acc> = HashMap::new();
    for u in units {
        if let Some(r) = u.receipt {
            if r > 1 {
                return Err(Error::InvalidReceipt {
                    pair_id: u.pair_id.clone(),
                    slot: u.slot.number(),
                });
            }
        }
        if !order.contains(&u.pair_id) {
            order.push(u.pair_id.clone());
        }
        let acc = clusters.entry((u.pair_id.clone(), u.slot)).or_insert_with(|| Acc {
            outcomes: Vec::new(),
            receipts: Vec::new(),
        });
        acc.outcomes.push(u.outcome);
        acc.receipts.push(u.receipt);
    }

    let any_receipt = units.iter().any(|u| u.receipt.is_some());
    if any_receipt && units.iter().any(|u| u.receipt.is_none()) {
        return Err(Error::PartialReceipts);
    }

    for id in assignments.keys() {
        if !order.contains(id) {
            return Err(Error::UnknownPair(id.clone()));
        }
    }
    if let Some(pops) = populations {
        for (id, slot) in pops.keys() {
            if !clusters.contains_key(&(id.clone(), *slot)) {
                return Err(Error::UnknownCluster {
                    pair_id: id.clone(),
                    slot: slot.number(),
                });
            }
        }
        if pops.len() != clusters.len() {
            return Err(Error::PartialPopulations);
        }
    }

    let mut pairs = Vec::with_capacity(order.len());
    for id in order {
        let z = *assignments
            .get(&id)
            .ok_or_else(|| Error::MissingAssignment(id.clone()))?;
        if z != 0 && z != 1 {
            return Err(Error::InvalidAssignment { pair_id: id, value: z });
        }
        let mut build = |slot: Slot| -> Result<ClusterData> {
            let acc = clusters
                .remove(&(id.clone(), slot))
                .ok_or_else(|| Error::MalformedPair {
                    pair_id: id.clone(),
                    detail: format!("missing cluster in slot {slot}"),
                })?;
            let receipts = any_receipt.then(|| acc.receipts.iter().map(|r| r == &Some(1)).collect::<Vec<bool>>());
            let pop = populations.and_then(|p| p.get(&(id.clone(), slot)).copied());
            ClusterData::new(id.clone(), slot, acc.outcomes, receipts, pop)
        };
        let first = build(Slot::First)?;
        let second = build(Slot::Second)?;
        pairs.push(MatchedPair::new(id.clone(), z as u8, first, second)?);
    }
    MpcrDataset::new(pairs)
}

/// Raw cluster-level treatment indicator `T_jk`, before any validation.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ClusterAssignment {
    pub pair_id: String,
    pub slot: i64,
    pub treated: i64,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct ValidationReport {
    pub violations: Vec<String>,
    pub warnings: Vec<String>,
}

impl ValidationReport {
    pub fn is_consistent(&self) -> bool {
        self.violations.is_empty()
    }
}

/// Structural checks of a matched-pair design: two clusters per pair in
/// slots 1 and 2, binary treatment, exactly one treated cluster per pair.
pub fn validate_design(design: &[ClusterAssignment]) -> ValidationReport {
    let mut report = ValidationReport::default();
    let mut by_pair: BTreeMap<&str, Vec<&ClusterAssignment>> = BTreeMap::new();
    let mut order: Vec<&str> = Vec::new();
    for c in design {
        if !by_pair.contains_key(c.pair_id.as_str()) {
            order.push(&c.pair_id);
        }
        by_pair.entry(&c.pair_id).or_default().push(c);
    }
    for id in &order {
        let cs = &by_pair[id];
        if cs.len() != 2 {
            report
                .violations
                .push(format!("pair {id}: expected 2 clusters, found {}", cs.len()));
        }
        let mut slots: Vec<i64> = cs.iter().map(|c| c.slot).collect();
        slots.sort_unstable();
        if cs.len() == 2 && slots != [1, 2] {
            report
                .violations
                .push(format!("pair {id}: clusters must occupy slots 1 and 2"));
        }
        for c in cs {
            if c.treated != 0 && c.treated != 1 {
                report.violations.push(format!(
                    "pair {id}, slot {}: treatment indicator {} is not binary",
                    c.slot, c.treated
                ));
            }
        }
        let treated = cs.iter().filter(|c| c.treated == 1).count();
        if cs.iter().all(|c| c.treated == 0 || c.treated == 1) && treated != 1 {
            report.violations.push(format!(
                "pair {id}: exactly one cluster must be treated, found {treated}"
            ));
        }
    }
    if order.len() == 1 {
        report
            .warnings
            .push("variance unavailable: a single pair supports point estimation only".into());
    }
    report
}

/// Outcome of [`drop_incomplete_pairs`].
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DropReport {
    pub dropped_pairs: Vec<String>,
    pub validation: ValidationReport,
}

/// Removes every pair that lost a cluster, keeping the rest of the design
/// intact.
pub fn drop_incomplete_pairs(dataset: &MpcrDataset, lost: &[(String, Slot)]) -> Result<(MpcrDataset, DropReport)> {
    for (id, slot) in lost {
        if dataset.pair(id).is_none() {
            return Err(Error::UnknownCluster {
                pair_id: id.clone(),
                slot: slot.number(),
            });
        }
    }
    let lost_ids: HashSet<&str> = lost.iter().map(|(id, _)| id.as_str()).collect();
    let (dropped, kept): (Vec<&MatchedPair>, Vec<&MatchedPair>) = dataset
        .pairs()
        .iter()
        .partition(|p| lost_ids.contains(p.pair_id.as_str()));
    if kept.is_empty() {
        return Err(Error::EmptyDesign);
    }
    let ds = MpcrDataset::new(kept.into_iter().cloned().collect())?;
    let validation = ds.validate();
    Ok((
        ds,
        DropReport {
            dropped_pairs: dropped.iter().map(|p| p.pair_id.clone()).collect(),
            validation,
        },
    ))
}

/// Target of inference.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "UPPERCASE")]
pub enum Estimand {
    Sate,
    Cate,
    Uate,
    Pate,
}

impl Estimand {
    pub fn requires_populations(self) -> bool {
        matches!(self, Estimand::Cate | Estimand::Pate)
    }

    pub fn default_scheme(self) -> WeightScheme {
        if self.requires_populations() {
            WeightScheme::ArithmeticPopulation
        } else {
            WeightScheme::ArithmeticSample
        }
    }

    /// SATE and CATE variances are not identified; the reported variance is
    /// an upper bound.
    pub fn is_conservative(self) -> bool {
        matches!(self, Estimand::Sate | Estimand::Cate)
    }

    pub(crate) fn check(self, dataset: &MpcrDataset) -> Result<()> {
        if self.requires_populations() && !dataset.has_populations() {
            return Err(Error::PopulationsRequired(self));
        }
        Ok(())
    }
}

impl fmt::Display for Estimand {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Estimand::Sate => "SATE",
            Estimand::Cate => "CATE",
            Estimand::Uate => "UATE",
            Estimand::Pate => "PATE",
        })
    }
}

impl std::str::FromStr for Estimand {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "sate" => Ok(Estimand::Sate),
            "cate" => Ok(Estimand::Cate),
            "uate" => Ok(Estimand::Uate),
            "pate" => Ok(Estimand::Pate),
            _ => Err(Error::InvalidArgument(format!("unknown estimand {s:?}"))),
        }
    }
}

/// Rule producing the pair weight `w_k`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum WeightScheme {
    /// `n_1k + n_2k`
    ArithmeticSample,
    /// `N_1k + N_2k`
    ArithmeticPopulation,
    /// `n_1k n_2k / (n_1k + n_2k)`
    HarmonicSample,
    Constant,
    /// One positive weight per pair, in dataset order.
    Custom(Vec<f64>),
}

impl WeightScheme {
    pub fn name(&self) -> &'static str {
        match self {
            WeightScheme::ArithmeticSample => "arithmetic_sample",
            WeightScheme::ArithmeticPopulation => "arithmetic_population",
            WeightScheme::HarmonicSample => "harmonic_sample",
            WeightScheme::Constant => "constant",
            WeightScheme::Custom(_) => "custom",
        }
    }

    /// Raw weights `w_k`, one per pair.
    pub fn weights(&self, dataset: &MpcrDataset) -> Result<Vec<f64>> {
        let pairs = dataset.pairs();
        let w: Vec<f64> = match self {
            WeightScheme::ArithmeticSample => pairs.iter().map(|p| p.sample_size() as f64).collect(),
            WeightScheme::ArithmeticPopulation => {
                if !dataset.has_populations() {
                    return Err(Error::InvalidWeights("population weights need population sizes".into()));
                }
                pairs.iter().map(|p| p.population_size().unwrap_or(0) as f64).collect()
            }
            WeightScheme::HarmonicSample => pairs
                .iter()
                .map(|p| {
                    let a = p.clusters[0].sample_size() as f64;
                    let b = p.clusters[1].sample_size() as f64;
                    a * b / (a + b)
                })
                .collect(),
            WeightScheme::Constant => vec![1.0; pairs.len()],
            WeightScheme::Custom(w) => {
                if w.len() != pairs.len() {
                    return Err(Error::InvalidWeights(format!(
                        "{} custom weights for {} pairs",
                        w.len(),
                        pairs.len()
                    )));
                }
                w.clone()
            }
        };
        if let Some(bad) = w.iter().find(|x| !(x.is_finite() && **x > 0.0)) {
            return Err(Error::InvalidWeights(format!(
                "weights must be positive and finite, got {bad}"
            )));
        }
        Ok(w)
    }
}

/// Per-pair ingredients of every estimator.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PairDifference {
    pub pair_id: String,
    /// `w_k`
    pub raw_weight: f64,
    /// `n w_k / sum(w)`
    pub normalized_weight: f64,
    /// `D_k`, treated-cluster mean minus control-cluster mean.
    pub observed_difference: f64,
}

pub fn pair_differences(dataset: &MpcrDataset, scheme: &WeightScheme) -> Result<Vec<PairDifference>> {
    differences_for(dataset, scheme, Response::Outcome)
}

pub(crate) fn differences_for(
    dataset: &MpcrDataset,
    scheme: &WeightScheme,
    response: Response,
) -> Result<Vec<PairDifference>> {
    let w = scheme.weights(dataset)?;
    let total: f64 = w.iter().sum();
    let n = dataset.n() as f64;
    dataset
        .pairs()
        .iter()
        .zip(w)
        .map(|(p, wk)| {
            Ok(PairDifference {
                pair_id: p.pair_id.clone(),
                raw_weight: wk,
                normalized_weight: n * wk / total,
                observed_difference: p.difference(response)?,
            })
        })
        .collect()
}
