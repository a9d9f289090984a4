use std::collections::BTreeMap;
use std::path::Path;

use mpcr_core::estimators::{
    mixture_estimate, umcr_kappa, umcr_point_estimate, GroupLabeling, UmcrCluster, UmcrDataset,
};
use mpcr_core::model::{drop_incomplete_pairs, load_dataset, Estimand, MpcrDataset, Slot, UnitRecord, WeightScheme};
use mpcr_core::noncompliance::analyze_compliance;
use mpcr_core::oracle::{
    bias_variance_profile, check_identity_with, coverage_simulation, CoverageMethod, DgpConfig, EnumerationOptions,
    Identity, ImbalanceSweep, PotentialDataset,
};
use mpcr_core::pairing::{assign_within_pairs, pair_clusters_greedy, pair_clusters_optimal, Pairing};
use mpcr_core::power::{
    break_even_correlation, estimate_pi, minimum_detectable_effect, pair_correlation, power,
    relative_efficiency_estimate, sample_size, PowerMode, PowerSpec,
};
use mpcr_core::variance::{analyze, CiRegime};
use mpcr_core::Error;
use serde::{Deserialize, Serialize};
use serde_json::{json, Value};

use crate::args::*;
use crate::io;
use crate::report::{object, to_value, Inputs, Report};
use crate::CliError;

/// Largest residual `check-identities` accepts.
pub const IDENTITY_TOLERANCE: f64 = 1e-10;

struct Outcome {
    result: Value,
    config: Value,
    warnings: Vec<String>,
    status: i32,
}

impl Outcome {
    fn ok(result: Value, config: Value, warnings: Vec<String>) -> Self {
        Self {
            result,
            config,
            warnings,
            status: 0,
        }
    }
}

pub(crate) fn dispatch(command: Command) -> Result<i32, CliError> {
    let mut inputs = Inputs::default();
    let (name, output, outcome) = match command {
        Command::Estimate(a) => ("estimate", a.output.clone(), estimate(&a, &mut inputs)?),
        Command::Cace(a) => ("cace", a.output.clone(), cace(&a, &mut inputs)?),
        Command::Power(a) => ("power", a.output.clone(), power_cmd(&a)?),
        Command::Samplesize(a) => ("samplesize", a.output.clone(), samplesize(&a)?),
        Command::Mde(a) => ("mde", a.output.clone(), mde(&a)?),
        Command::Efficiency(a) => ("efficiency", a.output.clone(), efficiency(&a, &mut inputs)?),
        Command::Correlation(a) => ("correlation", a.output.clone(), correlation(&a, &mut inputs)?),
        Command::Breakeven(a) => ("breakeven", a.output.clone(), breakeven(&a)?),
        Command::Pair(a) => ("pair", a.output.clone(), pair(&a, &mut inputs)?),
        Command::Simulate(a) => ("simulate", a.output.clone(), simulate(&a, &mut inputs)?),
        Command::CheckIdentities(a) => ("check-identities", a.output.clone(), check(&a, &mut inputs)?),
    };
    let mut config = outcome.config;
    if let Value::Object(map) = &mut config {
        map.insert("format".into(), json!(output.format_name()));
        map.insert("out".into(), path_value(output.out.as_deref()));
    }
    let report = Report {
        command: name.to_string(),
        provenance: inputs.provenance(config),
        result: outcome.result,
        warnings: outcome.warnings,
    };
    report.write(&output)?;
    Ok(outcome.status)
}

impl Output {
    fn format_name(&self) -> &'static str {
        match self.format {
            Format::Json => "json",
            Format::Tsv => "tsv",
        }
    }
}

fn path_value(p: Option<&Path>) -> Value {
    p.map_or(Value::Null, |p| json!(p.display().to_string()))
}

fn regime_name(r: CiRegime) -> &'static str {
    if r.uses_t() {
        "t"
    } else {
        "normal"
    }
}

fn mode_name(m: PowerMode) -> &'static str {
    match m {
        PowerMode::Uate => "uate",
        PowerMode::Pate => "pate",
    }
}

/// Hashes a file into the provenance and returns its text.
fn input(inputs: &mut Inputs, role: &str, path: &Path) -> Result<(String, String), CliError> {
    let bytes = inputs.add(role, path)?;
    let text = String::from_utf8(bytes).map_err(|e| CliError::Validation(format!("{}: {e}", path.display())))?;
    Ok((path.display().to_string(), text))
}

fn read_dataset(data: &DataArgs, inputs: &mut Inputs) -> Result<MpcrDataset, CliError> {
    let (units, assign, pops) = read_tables(data, inputs)?;
    Ok(load_dataset(&units, pops.as_ref(), &assign)?)
}

type Tables = (
    Vec<UnitRecord>,
    BTreeMap<String, i64>,
    Option<BTreeMap<(String, Slot), u64>>,
);

fn read_tables(data: &DataArgs, inputs: &mut Inputs) -> Result<Tables, CliError> {
    let (name, text) = input(inputs, "units", &data.units)?;
    let units = io::parse_units_csv(&name, &text)?;
    let (name, text) = input(inputs, "assign", &data.assign)?;
    let assign = io::parse_assignments_csv(&name, &text)?;
    let pops = match &data.clusters {
        Some(p) => {
            let (name, text) = input(inputs, "clusters", p)?;
            Some(io::parse_clusters_csv(&name, &text)?)
        }
        None => None,
    };
    Ok((units, assign, pops))
}
fn data_config(data: &DataArgs) -> Vec<(&'static str, Value)> {
    vec![
        ("units", path_value(Some(&data.units))),
        ("assign", path_value(Some(&data.assign))),
        ("clusters", path_value(data.clusters.as_deref())),
    ]
}

/// Population weights target population estimands and sample weights
/// sample estimands; mixing them is rejected.
fn resolve_weights(estimand: Estimand, weights: Option<WeightsArg>) -> Result<WeightScheme, CliError> {
    match weights {
        None => Ok(estimand.default_scheme()),
        Some(WeightsArg::Pop) if !estimand.requires_populations() => Err(CliError::Validation(format!(
            "estimand/weight mismatch: --weights pop targets CATE or PATE, not {estimand}"
        ))),
        Some(WeightsArg::Arith) if estimand.requires_populations() => Err(CliError::Validation(format!(
            "estimand/weight mismatch: --weights arith targets SATE or UATE, not {estimand}"
        ))),
        Some(w) => Ok(w.into()),
    }
}

fn check_level(level: f64) -> Result<(), CliError> {
    if level > 0.0 && level < 1.0 {
        Ok(())
    } else {
        Err(CliError::Validation(format!("--level must lie in (0, 1), got {level}")))
    }
}

fn estimate(a: &EstimateArgs, inputs: &mut Inputs) -> Result<Outcome, CliError> {
    check_level(a.inference.level)?;
    let estimand: Estimand = a.estimand.into();
    let regime: CiRegime = a.inference.regime.into();
    if a.design == DesignArg::Umcr {
        return estimate_umcr(a, estimand, inputs);
    }
    let scheme = resolve_weights(estimand, a.weights)?;
    let mut ds = read_dataset(&a.data, inputs)?;
    let mut warnings = ds.validate().warnings;
    let mut extra = Vec::new();
    if let Some(path) = &a.lost {
        let (name, text) = input(inputs, "lost", path)?;
        let lost = io::parse_lost_csv(&name, &text)?;
        let (kept, drop) = drop_incomplete_pairs(&ds, &lost)?;
        for id in &drop.dropped_pairs {
            warnings.push(format!("pair {id} dropped after losing a cluster"));
        }
        warnings.extend(drop.validation.warnings.iter().cloned());
        extra.push(("dropped_pairs", json!(drop.dropped_pairs)));
        ds = kept;
    }
    let report = analyze(&ds, estimand, Some(&scheme), a.inference.level, regime)?;
    if report.conservative {
        warnings.push(format!(
            "the {estimand} variance is not identified; the reported variance is an upper bound"
        ));
    }
    if let Some(path) = &a.groups {
        let (name, text) = input(inputs, "groups", path)?;
        let groups = GroupLabeling::new(io::parse_groups_csv(&name, &text)?);
        extra.push(("mixture", json!(mixture_estimate(&ds, &groups)?)));
    }
    let mut result = to_value(&report);
    if let Value::Object(map) = &mut result {
        for (k, v) in extra {
            map.insert(k.to_string(), v);
        }
    }
    let mut config = data_config(&a.data);
    config.extend([
        ("design", json!("matched")),
        ("estimand", json!(estimand.to_string())),
        ("weights", json!(scheme.name())),
        ("level", json!(a.inference.level)),
        ("regime", json!(regime_name(regime))),
        ("lost", path_value(a.lost.as_deref())),
        ("groups", path_value(a.groups.as_deref())),
    ]);
    Ok(Outcome::ok(result, object(config), warnings))
}

/// Unmatched design: every `pair_id` names one cluster, listed in slot 1.
fn estimate_umcr(a: &EstimateArgs, estimand: Estimand, inputs: &mut Inputs) -> Result<Outcome, CliError> {
    if a.weights.is_some() || a.lost.is_some() || a.groups.is_some() {
        return Err(CliError::Validation(
            "--design umcr takes no --weights, --lost or --groups".into(),
        ));
    }
    let (units, assign, pops) = read_tables(&a.data, inputs)?;
    let mut order: Vec<String> = Vec::new();
    let mut outcomes: BTreeMap<String, Vec<f64>> = BTreeMap::new();
    for u in &units {
        if u.slot != Slot::First {
            return Err(CliError::Validation(format!(
                "--design umcr expects every unit in cluster_slot 1; cluster {} uses slot 2",
                u.pair_id
            )));
        }
        if !outcomes.contains_key(&u.pair_id) {
            order.push(u.pair_id.clone());
        }
        outcomes.entry(u.pair_id.clone()).or_default().push(u.outcome);
    }
    for id in assign.keys() {
        if !outcomes.contains_key(id) {
            return Err(Error::UnknownPair(id.clone()).into());
        }
    }
    let mut clusters = Vec::with_capacity(order.len());
    for id in &order {
        let z = *assign.get(id).ok_or_else(|| Error::MissingAssignment(id.clone()))?;
        if z != 0 && z != 1 {
            return Err(Error::InvalidAssignment {
                pair_id: id.clone(),
                value: z,
            }
            .into());
        }
        clusters.push(UmcrCluster {
            assignment: z as u8,
            outcomes: outcomes.remove(id).unwrap_or_default(),
            population_size: pops.as_ref().and_then(|p| p.get(&(id.clone(), Slot::First)).copied()),
        });
    }
    let umcr = UmcrDataset::new(clusters)?;
    let point = umcr_point_estimate(&umcr, estimand)?;
    let kappa = umcr_kappa(&umcr)?;
    let result = json!({
        "estimand": estimand,
        "point": point,
        "kappa": kappa,
        "clusters": umcr.clusters().len(),
        "n": umcr.n(),
    });
    let mut config = data_config(&a.data);
    config.extend([("design", json!("umcr")), ("estimand", json!(estimand.to_string()))]);
    Ok(Outcome::ok(result, object(config), Vec::new()))
}

fn cace(a: &CaceArgs, inputs: &mut Inputs) -> Result<Outcome, CliError> {
    check_level(a.inference.level)?;
    let estimand: Estimand = a.estimand.into();
    let regime: CiRegime = a.inference.regime.into();
    let scheme = resolve_weights(estimand, a.weights)?;
    let ds = read_dataset(&a.data, inputs)?;
    let mut warnings = ds.validate().warnings;
    let report = analyze_compliance(&ds, &scheme, a.inference.level, regime)?;
    if report.truncated {
        warnings.push("delta-method variance was negative and has been set to zero".into());
    }
    let mut config = data_config(&a.data);
    config.extend([
        ("estimand", json!(estimand.to_string())),
        ("weights", json!(scheme.name())),
        ("level", json!(a.inference.level)),
        ("regime", json!(regime_name(regime))),
    ]);
    Ok(Outcome::ok(to_value(&report), object(config), warnings))
}

fn plan_config(p: &PlanArgs) -> Vec<(&'static str, Value)> {
    vec![
        ("mode", json!(mode_name(p.mode.into()))),
        ("alpha", json!(p.alpha)),
        ("pi", json!(p.pi)),
        ("nbar", json!(p.nbar)),
    ]
}

fn power_cmd(a: &PowerArgs) -> Result<Outcome, CliError> {
    let spec = PowerSpec {
        alpha: a.plan.alpha,
        m: a.pairs,
        effect: a.effect,
        pi: a.plan.pi,
        nbar: a.plan.nbar,
    };
    let p = power(&spec, a.plan.mode.into())?;
    let mut config = plan_config(&a.plan);
    config.extend([("effect", json!(a.effect)), ("pairs", json!(a.pairs))]);
    let result = json!({ "power": p, "dof": a.pairs.saturating_sub(1) });
    Ok(Outcome::ok(result, object(config), Vec::new()))
}

fn samplesize(a: &SampleSizeArgs) -> Result<Outcome, CliError> {
    let mode: PowerMode = a.plan.mode.into();
    let m = sample_size(a.plan.alpha, a.power, a.effect, mode, a.plan.pi, a.plan.nbar)?;
    let spec = PowerSpec {
        alpha: a.plan.alpha,
        m,
        effect: a.effect,
        pi: a.plan.pi,
        nbar: a.plan.nbar,
    };
    let achieved = power(&spec, mode)?;
    let mut config = plan_config(&a.plan);
    config.extend([("power", json!(a.power)), ("effect", json!(a.effect))]);
    let result = json!({ "pairs": m, "achieved_power": achieved });
    Ok(Outcome::ok(result, object(config), Vec::new()))
}

fn mde(a: &MdeArgs) -> Result<Outcome, CliError> {
    let d = minimum_detectable_effect(
        a.plan.alpha,
        a.power,
        a.pairs,
        a.plan.mode.into(),
        a.plan.pi,
        a.plan.nbar,
    )?;
    let mut config = plan_config(&a.plan);
    config.extend([("power", json!(a.power)), ("pairs", json!(a.pairs))]);
    Ok(Outcome::ok(json!({ "effect": d }), object(config), Vec::new()))
}

fn efficiency(a: &EfficiencyArgs, inputs: &mut Inputs) -> Result<Outcome, CliError> {
    let estimand: Estimand = a.estimand.into();
    let ds = read_dataset(&a.data, inputs)?;
    let mut warnings = ds.validate().warnings;
    let report = relative_efficiency_estimate(&ds, estimand)?;
    if !report.equal_sizes {
        warnings.push("within-pair sample sizes differ; the efficiency formula assumes equal sizes".into());
    }
    if report.ratio.is_none() {
        warnings.push("matched-design variance estimated as zero; the ratio is unbounded".into());
    }
    let mut config = data_config(&a.data);
    config.push(("estimand", json!(estimand.to_string())));
    Ok(Outcome::ok(to_value(&report), object(config), warnings))
}

fn correlation(a: &CorrelationArgs, inputs: &mut Inputs) -> Result<Outcome, CliError> {
    let ds = read_dataset(&a.data, inputs)?;
    let mut warnings = ds.validate().warnings;
    let rho = pair_correlation(&ds, a.weighted)?;
    let pi = match estimate_pi(&ds) {
        Ok(pi) => Some(pi),
        Err(e) => {
            warnings.push(format!("pi not computed: {e}"));
            None
        }
    };
    let mut config = data_config(&a.data);
    config.push(("weighted", json!(a.weighted)));
    let result = json!({ "correlation": rho, "pi": pi, "m": ds.m() });
    Ok(Outcome::ok(result, object(config), warnings))
}

fn breakeven(a: &BreakevenArgs) -> Result<Outcome, CliError> {
    let rho = break_even_correlation(a.pairs, a.alpha, a.power)?;
    let config = object(vec![
        ("pairs", json!(a.pairs)),
        ("alpha", json!(a.alpha)),
        ("power", json!(a.power)),
    ]);
    Ok(Outcome::ok(json!({ "correlation": rho }), config, Vec::new()))
}

fn pair(a: &PairArgs, inputs: &mut Inputs) -> Result<Outcome, CliError> {
    let (name, text) = input(inputs, "profiles", &a.profiles)?;
    let profiles = io::parse_profiles_csv(&name, &text)?;
    let pairing = match a.method {
        MethodArg::Greedy => pair_clusters_greedy(&profiles, a.include_size)?,
        MethodArg::Optimal => pair_clusters_optimal(&profiles, a.include_size)?,
    };
    let z = assign_within_pairs(&pairing, a.seed);
    let pairs: Vec<Value> = pairing
        .pairs
        .iter()
        .enumerate()
        .map(|(k, (first, second))| {
            let id = Pairing::pair_id(k);
            json!({ "pair_id": id, "first": first, "second": second, "z": z[&id] })
        })
        .collect();
    let config = object(vec![
        ("profiles", path_value(Some(&a.profiles))),
        (
            "method",
            json!(match a.method {
                MethodArg::Greedy => "greedy",
                MethodArg::Optimal => "optimal",
            }),
        ),
        ("include_size", json!(a.include_size)),
        ("seed", json!(a.seed)),
    ]);
    let result = json!({ "pairs": pairs, "total_distance": pairing.total_distance });
    Ok(Outcome::ok(result, config, pairing.warnings))
}

#[derive(Debug, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct SimulationFile {
    methods: Option<Vec<CoverageMethod>>,
    coverage: Option<DgpConfig>,
    sweep: Option<ImbalanceSweep>,
}

fn read_simulation_file(path: &Path, inputs: &mut Inputs) -> Result<SimulationFile, CliError> {
    let (_, text) = input(inputs, "config", path)?;
    toml::from_str(&text).map_err(|e: toml::de::Error| {
        let line = e
            .span()
            .map(|span| format!(" at line {}", text[..span.start].matches('\n').count() + 1))
            .unwrap_or_default();
        CliError::Validation(format!("{}{line}: {}", path.display(), e.message().replace('\n', " ")))
    })
}

fn simulate(a: &SimulateArgs, inputs: &mut Inputs) -> Result<Outcome, CliError> {
    let mut file = match &a.config {
        Some(path) => read_simulation_file(path, inputs)?,
        None => SimulationFile::default(),
    };
    let overridden = a.pairs.is_some() || a.replicates.is_some() || a.seed.is_some() || a.level.is_some();
    if file.coverage.is_none() && (overridden || file.sweep.is_none()) {
        file.coverage = Some(DgpConfig::default());
    }
    if let Some(cov) = &mut file.coverage {
        if let Some(m) = a.pairs {
            cov.m = m;
        }
        if let Some(r) = a.replicates {
            cov.replicates = r;
        }
        if let Some(s) = a.seed {
            cov.seed = s;
        }
        if let Some(l) = a.level {
            cov.level = l;
        }
        cov.validate()?;
    }
    let methods = file
        .methods
        .get_or_insert_with(|| vec![CoverageMethod::SigmaHat, CoverageMethod::DeltaHat])
        .clone();
    let mut coverage = Vec::new();
    if let Some(cov) = &file.coverage {
        for &method in &methods {
            coverage.push(to_value(&coverage_simulation(cov, method)?));
        }
    }
    let sweep = match &file.sweep {
        Some(s) => to_value(&bias_variance_profile(s)?),
        None => json!([]),
    };
    let mut config = to_value(&file);
    if let Value::Object(map) = &mut config {
        map.insert("config".into(), path_value(a.config.as_deref()));
    }
    let result = json!({ "coverage": coverage, "sweep": sweep });
    Ok(Outcome::ok(result, config, Vec::new()))
}

fn check(a: &CheckArgs, inputs: &mut Inputs) -> Result<Outcome, CliError> {
    let (_, text) = input(inputs, "potential", &a.potential)?;
    let pd: PotentialDataset =
        serde_json::from_str(&text).map_err(|e| CliError::Validation(format!("{}: {e}", a.potential.display())))?;
    let scheme: Option<WeightScheme> = a.weights.map(Into::into);
    let opts = EnumerationOptions::default();
    let mut checks = Vec::new();
    let mut failed = Vec::new();
    for id in Identity::ALL {
        match check_identity_with(&pd, id, scheme.as_ref(), &opts) {
            Ok(c) => {
                let pass = c.residual < IDENTITY_TOLERANCE;
                if !pass {
                    failed.push(format!("{id} residual {:e}", c.residual));
                }
                checks.push(json!({
                    "identity": id.name(),
                    "applicable": true,
                    "scheme": c.scheme,
                    "lhs": c.lhs,
                    "rhs": c.rhs,
                    "residual": c.residual,
                    "pass": pass,
                }));
            }
            Err(Error::IdentityInapplicable(reason)) => checks.push(json!({
                "identity": id.name(),
                "applicable": false,
                "reason": reason,
            })),
            Err(e) => return Err(e.into()),
        }
    }
    let config = object(vec![
        ("potential", path_value(Some(&a.potential))),
        ("weights", json!(scheme.as_ref().map(|s| s.name()))),
    ]);
    let result = json!({
        "m": pd.m(),
        "n": pd.n(),
        "tolerance": IDENTITY_TOLERANCE,
        "all_pass": failed.is_empty(),
        "checks": checks,
    });
    let mut outcome = Outcome::ok(result, config, Vec::new());
    if !failed.is_empty() {
        eprintln!("error: identity check failed: {}", failed.join("; "));
        outcome.status = 2;
    }
    Ok(outcome)
}
