use thiserror::Error;

use crate::model::Estimand;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("malformed pair {pair_id}: {detail}")]
    MalformedPair { pair_id: String, detail: String },

    #[error("empty cluster in pair {pair_id}, slot {slot}")]
    EmptyCluster { pair_id: String, slot: u8 },

    #[error("receipt for pair {pair_id}, slot {slot} must be 0 or 1")]
    InvalidReceipt { pair_id: String, slot: u8 },

    #[error("partial receipts: receipts must be given for every unit or for none")]
    PartialReceipts,

    #[error("partial populations: population sizes must be given for every cluster or for none")]
    PartialPopulations,

    #[error("population size {population} of pair {pair_id}, slot {slot} is below its sample size {sample}")]
    PopulationTooSmall {
        pair_id: String,
        slot: u8,
        population: u64,
        sample: usize,
    },

    #[error("no assignment given for pair {0}")]
    MissingAssignment(String),

    #[error("assignment given for unknown pair {0}")]
    UnknownPair(String),

    #[error("assignment for pair {pair_id} must be 0 or 1, got {value}")]
    InvalidAssignment { pair_id: String, value: i64 },

    #[error("duplicate pair id {0}")]
    DuplicatePair(String),

    #[error("estimand {0} requires population sizes for every cluster")]
    PopulationsRequired(Estimand),

    #[error("invalid weights: {0}")]
    InvalidWeights(String),

    #[error("need at least {needed} pairs, got {got}")]
    TooFewPairs { needed: usize, got: usize },

    #[error("receipts are required for this analysis")]
    MissingReceipts,

    #[error("no identified compliers: estimated effect on receipt is zero")]
    NoCompliers,

    #[error("empty design: every pair was dropped")]
    EmptyDesign,

    #[error("unknown cluster: pair {pair_id}, slot {slot}")]
    UnknownCluster { pair_id: String, slot: u8 },

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("degenerate data: {0}")]
    Degenerate(String),

    #[error("unreachable power: {0}")]
    UnreachablePower(String),

    #[error("enumeration over 2^{m} assignments exceeds the configured cap of {cap} pairs")]
    EnumerationCap { m: usize, cap: usize },

    #[error("identity not applicable: {0}")]
    IdentityInapplicable(String),

    #[error("odd count: {0} clusters cannot be perfectly paired")]
    OddClusterCount(usize),

    #[error("{0} clusters exceeds the exhaustive-search cap of 16; use greedy")]
    TooManyClusters(usize),

    #[error("duplicate cluster id {0}")]
    DuplicateCluster(String),

    #[error("covariate arity mismatch for cluster {0}")]
    ArityMismatch(String),

    #[error("root finding failed: {0}")]
    Convergence(String),
}

impl Error {
    /// True for errors caused by malformed input rather than by a computation
    /// that cannot be carried out on otherwise valid data.
    pub fn is_validation(&self) -> bool {
        !matches!(
            self,
            Error::TooFewPairs { .. }
                | Error::NoCompliers
                | Error::EmptyDesign
                | Error::Degenerate(_)
                | Error::UnreachablePower(_)
                | Error::EnumerationCap { .. }
                | Error::IdentityInapplicable(_)
                | Error::Convergence(_)
        )
    }
}
