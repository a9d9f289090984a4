use std::path::PathBuf;

use clap::{Args, Parser, Subcommand, ValueEnum};
use mpcr_core::model::{Estimand, WeightScheme};
use mpcr_core::power::PowerMode;
use mpcr_core::variance::CiRegime;

#[derive(Debug, Parser)]
#[command(
    name = "mpcr",
    version,
    about = "Matched-pair cluster-randomized experiments: estimation, inference and design"
)]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Point estimate, variance and confidence interval.
    Estimate(EstimateArgs),
    /// Complier average causal effect for encouragement designs.
    Cace(CaceArgs),
    /// Power of the matched-pair t test.
    Power(PowerArgs),
    /// Smallest number of pairs reaching a target power.
    Samplesize(SampleSizeArgs),
    /// Minimum detectable standardized effect.
    Mde(MdeArgs),
    /// Efficiency of the matched design relative to an unmatched one.
    Efficiency(EfficiencyArgs),
    /// Within-pair correlation of cluster means, and the plug-in pi.
    Correlation(CorrelationArgs),
    /// Within-pair correlation at which matching starts to pay off.
    Breakeven(BreakevenArgs),
    /// Form pairs from cluster profiles and randomize within them.
    Pair(PairArgs),
    /// Coverage and bias/variance simulations.
    Simulate(SimulateArgs),
    /// Check the closed-form bias identities against exact enumeration.
    CheckIdentities(CheckArgs),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Format {
    Json,
    Tsv,
}

#[derive(Debug, Clone, Args)]
pub struct Output {
    /// Write the report here instead of standard output.
    #[arg(long)]
    pub out: Option<PathBuf>,
    #[arg(long, value_enum, default_value_t = Format::Json)]
    pub format: Format,
}

#[derive(Debug, Args)]
pub struct DataArgs {
    /// pair_id,cluster_slot,outcome[,receipt]
    #[arg(long)]
    pub units: PathBuf,
    /// pair_id,z
    #[arg(long)]
    pub assign: PathBuf,
    /// pair_id,cluster_slot,population_size
    #[arg(long)]
    pub clusters: Option<PathBuf>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum EstimandArg {
    Sate,
    Cate,
    Uate,
    Pate,
}

impl From<EstimandArg> for Estimand {
    fn from(e: EstimandArg) -> Self {
        match e {
            EstimandArg::Sate => Estimand::Sate,
            EstimandArg::Cate => Estimand::Cate,
            EstimandArg::Uate => Estimand::Uate,
            EstimandArg::Pate => Estimand::Pate,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum WeightsArg {
    Arith,
    Pop,
    Harmonic,
    Const,
}

impl From<WeightsArg> for WeightScheme {
    fn from(w: WeightsArg) -> Self {
        match w {
            WeightsArg::Arith => WeightScheme::ArithmeticSample,
            WeightsArg::Pop => WeightScheme::ArithmeticPopulation,
            WeightsArg::Harmonic => WeightScheme::HarmonicSample,
            WeightsArg::Const => WeightScheme::Constant,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum RegimeArg {
    /// Normal critical values.
    Normal,
    /// t critical values on m - 1 degrees of freedom.
    T,
}

impl From<RegimeArg> for CiRegime {
    fn from(r: RegimeArg) -> Self {
        match r {
            RegimeArg::Normal => CiRegime::ManyPairs,
            RegimeArg::T => CiRegime::FewPairsManyUnits,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum ModeArg {
    Uate,
    Pate,
}

impl From<ModeArg> for PowerMode {
    fn from(m: ModeArg) -> Self {
        match m {
            ModeArg::Uate => PowerMode::Uate,
            ModeArg::Pate => PowerMode::Pate,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum DesignArg {
    Matched,
    /// Unmatched design: each `pair_id` names one cluster, all in slot 1.
    Umcr,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum MethodArg {
    Greedy,
    Optimal,
}

#[derive(Debug, Args)]
pub struct InferenceArgs {
    #[arg(long, default_value_t = 0.95)]
    pub level: f64,
    #[arg(long, value_enum, default_value_t = RegimeArg::T)]
    pub regime: RegimeArg,
}

#[derive(Debug, Args)]
pub struct EstimateArgs {
    #[command(flatten)]
    pub data: DataArgs,
    #[arg(long, value_enum, default_value_t = EstimandArg::Sate)]
    pub estimand: EstimandArg,
    #[arg(long, value_enum)]
    pub weights: Option<WeightsArg>,
    #[command(flatten)]
    pub inference: InferenceArgs,
    /// pair_id,cluster_slot rows of clusters lost after randomization; their
    /// pairs are dropped.
    #[arg(long)]
    pub lost: Option<PathBuf>,
    /// pair_id,group rows; adds the mixture estimate.
    #[arg(long)]
    pub groups: Option<PathBuf>,
    #[arg(long, value_enum, default_value_t = DesignArg::Matched)]
    pub design: DesignArg,
    #[command(flatten)]
    pub output: Output,
}

#[derive(Debug, Args)]
pub struct CaceArgs {
    #[command(flatten)]
    pub data: DataArgs,
    #[arg(long, value_enum, default_value_t = EstimandArg::Sate)]
    pub estimand: EstimandArg,
    #[arg(long, value_enum)]
    pub weights: Option<WeightsArg>,
    #[command(flatten)]
    pub inference: InferenceArgs,
    #[command(flatten)]
    pub output: Output,
}

#[derive(Debug, Args)]
pub struct PlanArgs {
    #[arg(long, value_enum, default_value_t = ModeArg::Uate)]
    pub mode: ModeArg,
    #[arg(long, default_value_t = 0.05)]
    pub alpha: f64,
    /// Required in pate mode.
    #[arg(long)]
    pub pi: Option<f64>,
    /// Mean cluster size; required in pate mode.
    #[arg(long)]
    pub nbar: Option<f64>,
}

#[derive(Debug, Args)]
pub struct PowerArgs {
    #[command(flatten)]
    pub plan: PlanArgs,
    #[arg(long)]
    pub effect: f64,
    #[arg(long)]
    pub pairs: usize,
    #[command(flatten)]
    pub output: Output,
}

#[derive(Debug, Args)]
pub struct SampleSizeArgs {
    #[command(flatten)]
    pub plan: PlanArgs,
    #[arg(long, default_value_t = 0.8)]
    pub power: f64,
    #[arg(long)]
    pub effect: f64,
    #[command(flatten)]
    pub output: Output,
}

#[derive(Debug, Args)]
pub struct MdeArgs {
    #[command(flatten)]
    pub plan: PlanArgs,
    #[arg(long, default_value_t = 0.8)]
    pub power: f64,
    #[arg(long)]
    pub pairs: usize,
    #[command(flatten)]
    pub output: Output,
}

#[derive(Debug, Args)]
pub struct EfficiencyArgs {
    #[command(flatten)]
    pub data: DataArgs,
    #[arg(long, value_enum, default_value_t = EstimandArg::Sate)]
    pub estimand: EstimandArg,
    #[command(flatten)]
    pub output: Output,
}

#[derive(Debug, Args)]
pub struct CorrelationArgs {
    #[command(flatten)]
    pub data: DataArgs,
    /// Multiply cluster means by normalized pair weights first.
    #[arg(long)]
    pub weighted: bool,
    #[command(flatten)]
    pub output: Output,
}

#[derive(Debug, Args)]
pub struct BreakevenArgs {
    #[arg(long)]
    pub pairs: usize,
    #[arg(long, default_value_t = 0.05)]
    pub alpha: f64,
    #[arg(long, default_value_t = 0.8)]
    pub power: f64,
    #[command(flatten)]
    pub output: Output,
}

#[derive(Debug, Args)]
pub struct PairArgs {
    /// cluster_id,size[,cov_1..cov_p]
    #[arg(long)]
    pub profiles: PathBuf,
    #[arg(long, value_enum, default_value_t = MethodArg::Greedy)]
    pub method: MethodArg,
    /// Use cluster size as a matching dimension.
    #[arg(long)]
    pub include_size: bool,
    #[arg(long, default_value_t = 1)]
    pub seed: u64,
    #[command(flatten)]
    pub output: Output,
}

#[derive(Debug, Args)]
pub struct SimulateArgs {
    /// TOML file with optional [coverage] and [sweep] tables.
    #[arg(long)]
    pub config: Option<PathBuf>,
    /// Overrides the coverage table's m.
    #[arg(long)]
    pub pairs: Option<usize>,
    #[arg(long)]
    pub replicates: Option<usize>,
    #[arg(long)]
    pub seed: Option<u64>,
    #[arg(long)]
    pub level: Option<f64>,
    #[command(flatten)]
    pub output: Output,
}

#[derive(Debug, Args)]
pub struct CheckArgs {
    /// JSON list of pairs with potential outcomes.
    #[arg(long)]
    pub potential: PathBuf,
    /// Weights for the identities that hold under any fixed weights.
    #[arg(long, value_enum)]
    pub weights: Option<WeightsArg>,
    #[command(flatten)]
    pub output: Output,
}
