//! Verification engine: exact enumeration of every assignment vector on
//! potential-outcome data, closed-form bias identities, and seeded Monte
//! Carlo simulations.

mod exact;
mod potential;
pub mod rng;
mod simulate;

pub use exact::{
    check_identity, check_identity_with, exact_law, exact_law_with, randomization_variance_closed, sampled_moments,
    EnumerationOptions, ExactLaw, Identity, IdentityCheck, SampledMoments, Statistic,
};
pub use potential::{true_estimand, PotentialCluster, PotentialDataset, PotentialPair, PotentialUnit};
pub use simulate::{
    bias_variance_profile, bundled_profiles, coverage_simulation, monte_carlo_law, superpopulation_check,
    BiasVarianceRow, CoverageMethod, CoverageSummary, DgpConfig, ImbalanceSweep, MonteCarloLaw, PairProfile,
    SuperPopulationConfig, SuperPopulationSummary,
};
