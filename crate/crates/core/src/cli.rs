//! Command-line front end. Every report is a JSON document on stdout.
//!
//! Exit codes: 0 success, 1 input or usage error, 2 infeasible instance.

use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};
use std::str::FromStr;

use clap::{Args, Parser, Subcommand};
use serde::Serialize;
use serde_json::{json, Value};

use crate::cost::{weighted_cost_spec, CostPair, CostSpec};
use crate::dataset::{load_csv, synth_miscalibrated, write_csv, GroupData, ScoreDistribution, SynthSpec};
use crate::eo::{eo_calibration_damage, flipped_group, solve_eo, EoStatus};
use crate::error::{Error, Result};
use crate::impossibility::{approximate_bound, build_matrix, exact_impossibility_check};
use crate::metrics::{analytic_rates, calibration_gap, linearity_residual, Binning};
use crate::parity::{
    apply_monte_carlo, mixture_calibration_gap, plan_withholding, ApplicationMode,
};
use crate::scene::{build_scene, ScenePoint};

pub const EXIT_OK: i32 = 0;
pub const EXIT_USAGE: i32 = 1;
pub const EXIT_INFEASIBLE: i32 = 2;

#[derive(Debug, Parser)]
#[command(name = "calparity", version, about = "Calibration-preserving cost parity for binary classifiers")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Per-group base rate, generalized rates, calibration gap and linearity residual.
    Stats(CommonArgs),
    /// Per-group calibration report (bins and gap).
    CalibrateCheck(CommonArgs),
    /// Equalize costs by withholding predictions from the cheaper group.
    PostprocessCalibrated(PostprocessArgs),
    /// Equalized Odds flip-probability baseline.
    PostprocessEo(EoArgs),
    /// Impossibility check for two equal-cost constraints.
    Diagnose(DiagnoseArgs),
    /// FP/FN-plane scene as JSON.
    PlotData(PlotArgs),
    /// Generate a synthetic CSV.
    Synth(SynthArgs),
}

#[derive(Debug, Clone, Args)]
pub struct CommonArgs {
    #[arg(long)]
    pub input: PathBuf,
    /// `exact` or `fixed:B`.
    #[arg(long, default_value = "exact")]
    pub binning: String,
}

#[derive(Debug, Clone, Args)]
#[group(id = "cost_form", required = true, multiple = false, args = ["cost", "weighted_cost"])]
pub struct CostArgs {
    /// Coefficients `a1,b1,a2,b2` for group 1 and group 2.
    #[arg(long)]
    pub cost: Option<String>,
    /// Per-sample weights `rfp,rfn`, resolved against each group's base rate.
    #[arg(long)]
    pub weighted_cost: Option<String>,
}

#[derive(Debug, Clone, Args)]
pub struct PostprocessArgs {
    #[command(flatten)]
    pub common: CommonArgs,
    #[command(flatten)]
    pub cost: CostArgs,
    /// Name of the group treated as G1 (defaults to the first group in the file).
    #[arg(long)]
    pub group1: Option<String>,
    /// `deterministic` or `mc`.
    #[arg(long, default_value = "deterministic")]
    pub mode: String,
    #[arg(long)]
    pub seed: Option<u64>,
    #[arg(long)]
    pub output: Option<PathBuf>,
}

#[derive(Debug, Clone, Args)]
pub struct EoArgs {
    #[command(flatten)]
    pub common: CommonArgs,
    #[arg(long)]
    pub group1: Option<String>,
    #[arg(long)]
    pub output: Option<PathBuf>,
}

#[derive(Debug, Clone, Args)]
pub struct DiagnoseArgs {
    #[command(flatten)]
    pub common: CommonArgs,
    #[command(flatten)]
    pub cost: CostArgs,
    /// Second constraint, `a1,b1,a2,b2`.
    #[arg(long)]
    pub cost_prime: String,
    #[arg(long)]
    pub group1: Option<String>,
    /// Tolerance for the exact check.
    #[arg(long, default_value_t = 1e-6)]
    pub tol: f64,
    /// Asserted bound on entry magnitudes of the constraint matrix.
    #[arg(long = "m")]
    pub m: Option<f64>,
    /// Asserted common denominator of the constraint matrix entries.
    #[arg(long = "d")]
    pub d: Option<u64>,
    /// Calibration slack; defaults to the larger measured gap.
    #[arg(long)]
    pub delta_cal: Option<f64>,
    /// Cost slack; defaults to the larger measured cost difference.
    #[arg(long)]
    pub delta_cost: Option<f64>,
}

#[derive(Debug, Clone, Args)]
pub struct PlotArgs {
    #[command(flatten)]
    pub common: CommonArgs,
    #[command(flatten)]
    pub cost: CostArgs,
    #[arg(long)]
    pub group1: Option<String>,
    #[arg(long)]
    pub output: Option<PathBuf>,
}

#[derive(Debug, Clone, Args)]
pub struct SynthArgs {
    /// `NAME=DIST` or `NAME=DIST@SHIFT`, where DIST is `point:P`,
    /// `grid:P1,P2,..` or `beta:A,B`. Repeat per group.
    #[arg(long = "group", required = true)]
    pub groups: Vec<String>,
    #[arg(long)]
    pub n: usize,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    #[arg(long)]
    pub output: PathBuf,
}

/// The cost specification in one of its two accepted forms.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum CostForm {
    Coefficients([f64; 4]),
    Weighted { r_fp: f64, r_fn: f64 },
}

impl CostForm {
    fn from_args(args: &CostArgs) -> Result<Self> {
        match (&args.cost, &args.weighted_cost) {
            (Some(c), None) => Ok(CostForm::Coefficients(parse_numbers::<4>(c, "--cost")?)),
            (None, Some(w)) => {
                let [r_fp, r_fn] = parse_numbers::<2>(w, "--weighted-cost")?;
                Ok(CostForm::Weighted { r_fp, r_fn })
            }
            _ => Err(Error::Usage("pass exactly one of --cost or --weighted-cost".into())),
        }
    }

    /// Specs for `(g1, g2)` in that role order.
    pub fn resolve(&self, g1: &GroupData, g2: &GroupData) -> Result<CostPair> {
        match *self {
            CostForm::Coefficients([a1, b1, a2, b2]) => {
                Ok(CostPair::new(CostSpec::new(a1, b1)?, CostSpec::new(a2, b2)?))
            }
            CostForm::Weighted { r_fp, r_fn } => Ok(CostPair::new(
                weighted_cost_spec(r_fp, r_fn, g1.base_rate())?,
                weighted_cost_spec(r_fp, r_fn, g2.base_rate())?,
            )),
        }
    }
}

fn parse_numbers<const N: usize>(text: &str, flag: &str) -> Result<[f64; N]> {
    let values: Vec<f64> = text
        .split(',')
        .map(|v| v.trim().parse::<f64>())
        .collect::<std::result::Result<_, _>>()
        .map_err(|_| Error::Usage(format!("{flag}: cannot parse `{text}`")))?;
    values
        .try_into()
        .map_err(|_| Error::Usage(format!("{flag}: expected {N} comma-separated numbers")))
}

/// Resolved settings shared by the subcommands.
#[derive(Debug, Clone)]
pub struct RunConfig {
    pub input: PathBuf,
    pub group1: Option<String>,
    pub cost: Option<CostForm>,
    pub binning: Binning,
    pub mode: ApplicationMode,
    pub output: Option<PathBuf>,
}

impl RunConfig {
    fn new(common: &CommonArgs) -> Result<Self> {
        Ok(Self {
            input: common.input.clone(),
            group1: None,
            cost: None,
            binning: Binning::from_str(&common.binning)?,
            mode: ApplicationMode::DeterministicMixture,
            output: None,
        })
    }

    fn cost(&self) -> Result<CostForm> {
        self.cost
            .ok_or_else(|| Error::Usage("a cost specification is required".into()))
    }
}

fn parse_mode(mode: &str, seed: Option<u64>) -> Result<ApplicationMode> {
    match (mode, seed) {
        ("deterministic", _) => Ok(ApplicationMode::DeterministicMixture),
        ("mc", Some(seed)) => Ok(ApplicationMode::MonteCarlo { seed }),
        ("mc", None) => Err(Error::Usage("--mode mc requires --seed".into())),
        (other, _) => Err(Error::Usage(format!(
            "--mode must be `deterministic` or `mc`, got `{other}`"
        ))),
    }
}

/// Rounds every float in a JSON document to 12 significant digits.
pub fn round_json(value: &mut Value) {
    match value {
        Value::Number(n) if n.is_f64() => {
            if let Some(x) = n.as_f64() {
                let rounded: f64 = format!("{x:.11e}").parse().unwrap_or(x);
                if let Some(num) = serde_json::Number::from_f64(rounded) {
                    *n = num;
                }
            }
        }
        Value::Array(items) => items.iter_mut().for_each(round_json),
        Value::Object(map) => map.values_mut().for_each(round_json),
        _ => {}
    }
}

fn emit(out: &mut dyn Write, report: impl Serialize) -> Result<()> {
    let mut value = serde_json::to_value(report).map_err(|e| Error::Usage(e.to_string()))?;
    round_json(&mut value);
    serde_json::to_writer_pretty(&mut *out, &value).map_err(|e| Error::Usage(e.to_string()))?;
    writeln!(out)?;
    Ok(())
}

/// Picks `(G1, G2)`: the named group first, otherwise file order.
fn select_pair(groups: Vec<GroupData>, group1: Option<&str>) -> Result<(GroupData, GroupData)> {
    if groups.len() != 2 {
        return Err(Error::Usage(format!(
            "expected exactly two groups, found {}",
            groups.len()
        )));
    }
    let mut it = groups.into_iter();
    let (a, b) = (it.next().unwrap(), it.next().unwrap());
    match group1 {
        None => Ok((a, b)),
        Some(name) if a.id() == name => Ok((a, b)),
        Some(name) if b.id() == name => Ok((b, a)),
        Some(name) => Err(Error::Usage(format!("group `{name}` not found in input"))),
    }
}

pub fn cmd_stats(config: &RunConfig, out: &mut dyn Write) -> Result<i32> {
    let groups = load_csv(&config.input)?;
    let rows: Vec<Value> = groups
        .iter()
        .map(|g| -> Result<Value> {
            let rates = g.rates();
            let analytic = analytic_rates(g.samples())?;
            let report = calibration_gap(g.samples(), config.binning)?;
            Ok(json!({
                "group": g.id(),
                "n": g.len(),
                "base_rate": g.base_rate(),
                "c_fp": rates.c_fp,
                "c_fn": rates.c_fn,
                "analytic_c_fp": analytic.c_fp,
                "analytic_c_fn": analytic.c_fn,
                "calibration_gap": report.gap,
                "linearity_residual": linearity_residual(g.samples())?,
            }))
        })
        .collect::<Result<_>>()?;
    emit(out, json!({ "binning": config.binning.to_string(), "groups": rows }))?;
    Ok(EXIT_OK)
}

pub fn cmd_calibrate_check(config: &RunConfig, out: &mut dyn Write) -> Result<i32> {
    let groups = load_csv(&config.input)?;
    let rows: Vec<Value> = groups
        .iter()
        .map(|g| -> Result<Value> {
            let report = calibration_gap(g.samples(), config.binning)?;
            Ok(json!({ "group": g.id(), "gap": report.gap, "bin_edges": report.bin_edges, "bins": report.bins }))
        })
        .collect::<Result<_>>()?;
    emit(out, json!({ "binning": config.binning.to_string(), "groups": rows }))?;
    Ok(EXIT_OK)
}

fn write_rows<I>(path: &Path, header: [&str; 4], rows: I) -> Result<()>
where
    I: IntoIterator<Item = [String; 4]>,
{
    let mut wtr = csv::Writer::from_writer(BufWriter::new(File::create(path)?));
    wtr.write_record(header)?;
    for row in rows {
        wtr.write_record(&row)?;
    }
    wtr.flush()?;
    Ok(())
}

pub fn cmd_postprocess_calibrated(config: &RunConfig, out: &mut dyn Write) -> Result<i32> {
    let groups = load_csv(&config.input)?;
    let file_order: Vec<String> = groups.iter().map(|g| g.id().to_string()).collect();
    let (mut h1, mut h2) = select_pair(groups, config.group1.as_deref())?;
    let mut pair = config.cost()?.resolve(&h1, &h2)?;

    // The higher-cost group is the reference; the other one gets degraded.
    let swapped = pair.group1.evaluate(h1.rates()) < pair.group2.evaluate(h2.rates());
    if swapped {
        std::mem::swap(&mut h1, &mut h2);
        pair = pair.swapped();
    }
    let outcome = plan_withholding(&h1, &pair.group1, &h2, &pair.group2, config.mode)?;
    let roles = json!({ "reference": h1.id(), "degraded": h2.id(), "swapped": swapped });

    if !outcome.verdict.feasible {
        emit(out, json!({ "status": "infeasible", "groups": roles, "verdict": outcome.verdict }))?;
        return Ok(EXIT_INFEASIBLE);
    }
    let Some(plan) = outcome.plan else {
        emit(out, json!({
            "status": "already_trivial",
            "groups": roles,
            "verdict": outcome.verdict,
            "alpha": Value::Null,
        }))?;
        return Ok(EXIT_OK);
    };

    let gap = |g: &GroupData| calibration_gap(g.samples(), config.binning).map(|r| r.gap);
    let mut report = json!({
        "status": "ok",
        "groups": roles,
        "verdict": outcome.verdict,
        "alpha": plan.alpha(),
        "plan": plan,
        "costs": {
            "reference": outcome.verdict.g1_cost,
            "degraded_before": outcome.verdict.g2_cost,
            "degraded_after": outcome.post_cost,
            "trivial": outcome.verdict.trivial2_cost,
        },
        "rates": {
            "reference": h1.rates(),
            "degraded_before": h2.rates(),
            "degraded_after": outcome.post_rates,
        },
        "calibration_gap": {
            "binning": config.binning.to_string(),
            "reference": gap(&h1)?,
            "degraded_before": gap(&h2)?,
            "degraded_after_analytic": mixture_calibration_gap(&h2, &plan),
        },
    });

    let realization = match plan.mode() {
        ApplicationMode::MonteCarlo { .. } => Some(apply_monte_carlo(&h2, &plan)?),
        ApplicationMode::DeterministicMixture => None,
    };
    if let Some(r) = &realization {
        let rates = r.group.rates();
        let withheld = r.withheld.iter().filter(|&&w| w).count();
        report["realized"] = json!({
            "rates": rates,
            "cost": pair.group2.evaluate(rates),
            "calibration_gap": gap(&r.group)?,
            "withheld": withheld,
            "withheld_fraction": withheld as f64 / r.withheld.len() as f64,
        });
    }

    if let Some(path) = &config.output {
        let mut rows: Vec<[String; 4]> = Vec::with_capacity(h1.len() + h2.len());
        for id in &file_order {
            if id == h1.id() {
                rows.extend(h1.samples().iter().map(|s| {
                    [id.clone(), s.score.to_string(), s.label.to_string(), "0".to_string()]
                }));
            } else if let Some(r) = &realization {
                rows.extend(r.group.samples().iter().zip(&r.withheld).map(|(s, &w)| {
                    [id.clone(), s.score.to_string(), s.label.to_string(), u8::from(w).to_string()]
                }));
            } else {
                rows.extend(h2.samples().iter().map(|s| {
                    [id.clone(), s.score.to_string(), s.label.to_string(), plan.alpha().to_string()]
                }));
            }
        }
        let header = if realization.is_some() {
            ["group", "score", "label", "withheld"]
        } else {
            ["group", "score", "label", "withhold_probability"]
        };
        write_rows(path, header, rows)?;
        report["output"] = json!(path.display().to_string());
    }
    emit(out, report)?;
    Ok(EXIT_OK)
}

pub fn cmd_postprocess_eo(config: &RunConfig, out: &mut dyn Write) -> Result<i32> {
    let groups = load_csv(&config.input)?;
    let file_order: Vec<String> = groups.iter().map(|g| g.id().to_string()).collect();
    let (h1, h2) = select_pair(groups, config.group1.as_deref())?;
    let solution = solve_eo(&h1, &h2);
    let roles = json!({ "group1": h1.id(), "group2": h2.id() });
    let Some(plan) = solution.plan.filter(|_| solution.status == EoStatus::Optimal) else {
        emit(out, json!({ "groups": roles, "solution": solution }))?;
        return Ok(EXIT_INFEASIBLE);
    };
    let mut report = json!({
        "groups": roles,
        "solution": solution,
        "calibration_gap_before": [h1.calibration_gap(), h2.calibration_gap()],
        "calibration_damage": [
            eo_calibration_damage(&h1, &plan.group1),
            eo_calibration_damage(&h2, &plan.group2),
        ],
    });
    if let Some(path) = &config.output {
        let f1 = flipped_group(&h1, &plan.group1);
        let f2 = flipped_group(&h2, &plan.group2);
        let ordered: Vec<GroupData> = file_order
            .iter()
            .map(|id| if id == f1.id() { f1.clone() } else { f2.clone() })
            .collect();
        write_csv(&ordered, BufWriter::new(File::create(path)?))?;
        report["output"] = json!(path.display().to_string());
    }
    emit(out, report)?;
    Ok(EXIT_OK)
}

pub fn cmd_diagnose(config: &RunConfig, args: &DiagnoseArgs, out: &mut dyn Write) -> Result<i32> {
    let groups = load_csv(&config.input)?;
    let (h1, h2) = select_pair(groups, config.group1.as_deref())?;
    let pair = config.cost()?.resolve(&h1, &h2)?;
    let pair_prime = CostForm::Coefficients(parse_numbers::<4>(&args.cost_prime, "--cost-prime")?)
        .resolve(&h1, &h2)?;
    let matrix = build_matrix(h1.base_rate(), h2.base_rate(), &pair, &pair_prime)?;
    if !matrix.distinct {
        return Err(Error::NonDistinctConstraints);
    }
    let exact = exact_impossibility_check(&h1, &h2, &pair, &pair_prime, args.tol)?;

    let (r1, r2) = (h1.rates(), h2.rates());
    let delta_cal = args
        .delta_cal
        .unwrap_or_else(|| h1.calibration_gap().max(h2.calibration_gap()));
    let delta_cost = args.delta_cost.unwrap_or_else(|| {
        pair.difference(r1, r2).abs().max(pair_prime.difference(r1, r2).abs())
    });
    let bound = match (args.m, args.d) {
        (Some(m), Some(d)) => {
            let b = approximate_bound(&matrix, delta_cal, delta_cost, m, d)?;
            json!({ "bound": b, "respected": b.admits(r1, r2) })
        }
        _ => Value::Null,
    };
    emit(out, json!({
        "groups": { "group1": h1.id(), "group2": h2.id() },
        "matrix": matrix,
        "exact": exact,
        "approximate": bound,
    }))?;
    Ok(EXIT_OK)
}

pub fn cmd_plot_data(config: &RunConfig, out: &mut dyn Write) -> Result<i32> {
    let groups = load_csv(&config.input)?;
    let (mut h1, mut h2) = select_pair(groups, config.group1.as_deref())?;
    let mut pair = config.cost()?.resolve(&h1, &h2)?;
    if pair.group1.evaluate(h1.rates()) < pair.group2.evaluate(h2.rates()) {
        std::mem::swap(&mut h1, &mut h2);
        pair = pair.swapped();
    }
    let outcome = plan_withholding(&h1, &pair.group1, &h2, &pair.group2, ApplicationMode::DeterministicMixture)?;
    let extra: Vec<ScenePoint> = outcome
        .post_rates
        .map(|rate| ScenePoint::new("post_processed", h2.id(), rate))
        .into_iter()
        .collect();
    let scene = build_scene(&[h1, h2], &[pair.group1, pair.group2], &extra)?;
    if let Some(path) = &config.output {
        let mut value = scene.to_json();
        round_json(&mut value);
        let mut f = BufWriter::new(File::create(path)?);
        serde_json::to_writer_pretty(&mut f, &value).map_err(|e| Error::Usage(e.to_string()))?;
        writeln!(f)?;
    }
    emit(out, &scene)?;
    Ok(EXIT_OK)
}

pub fn cmd_synth(args: &SynthArgs, out: &mut dyn Write) -> Result<i32> {
    let mut groups = Vec::with_capacity(args.groups.len());
    for (i, entry) in args.groups.iter().enumerate() {
        let (name, rest) = entry
            .split_once('=')
            .ok_or_else(|| Error::Usage(format!("--group expects NAME=DIST, got `{entry}`")))?;
        let (dist, shift) = match rest.split_once('@') {
            Some((d, s)) => (
                d,
                s.parse::<f64>()
                    .map_err(|_| Error::Usage(format!("bad shift `{s}`")))?,
            ),
            None => (rest, 0.0),
        };
        let spec = SynthSpec::new(name, args.n, ScoreDistribution::from_str(dist)?, args.seed.wrapping_add(i as u64))
            .with_shift(shift);
        groups.push(synth_miscalibrated(&spec)?);
    }
    write_csv(&groups, BufWriter::new(File::create(&args.output)?))?;
    let summary: Vec<Value> = groups
        .iter()
        .map(|g| json!({ "group": g.id(), "n": g.len(), "base_rate": g.base_rate() }))
        .collect();
    emit(out, json!({ "output": args.output.display().to_string(), "groups": summary }))?;
    Ok(EXIT_OK)
}

/// Runs a parsed command, writing the report to `out`. Returns the exit code.
pub fn run(cli: Cli, out: &mut dyn Write) -> Result<i32> {
    match cli.command {
        Command::Stats(common) => cmd_stats(&RunConfig::new(&common)?, out),
        Command::CalibrateCheck(common) => cmd_calibrate_check(&RunConfig::new(&common)?, out),
        Command::PostprocessCalibrated(args) => {
            let mut config = RunConfig::new(&args.common)?;
            config.cost = Some(CostForm::from_args(&args.cost)?);
            config.group1 = args.group1;
            config.mode = parse_mode(&args.mode, args.seed)?;
            config.output = args.output;
            cmd_postprocess_calibrated(&config, out)
        }
        Command::PostprocessEo(args) => {
            let mut config = RunConfig::new(&args.common)?;
            config.group1 = args.group1;
            config.output = args.output;
            cmd_postprocess_eo(&config, out)
        }
        Command::Diagnose(args) => {
            let mut config = RunConfig::new(&args.common)?;
            config.cost = Some(CostForm::from_args(&args.cost)?);
            config.group1 = args.group1.clone();
            cmd_diagnose(&config, &args, out)
        }
        Command::PlotData(args) => {
            let mut config = RunConfig::new(&args.common)?;
            config.cost = Some(CostForm::from_args(&args.cost)?);
            config.group1 = args.group1;
            config.output = args.output;
            cmd_plot_data(&config, out)
        }
        Command::Synth(args) => cmd_synth(&args, out),
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn rounds_to_twelve_digits() {
        let mut v = json!({ "x": 0.1 + 0.2, "n": 3, "nested": [1.0 / 3.0] });
        round_json(&mut v);
        assert_eq!(v["x"], json!(0.3));
        assert_eq!(v["n"], json!(3));
        assert_eq!(v["nested"][0], json!(0.333333333333));
    }

    #[test]
    fn parses_cost_forms() {
        let args = CostArgs { cost: Some("1,0.5,2,0".into()), weighted_cost: None };
        assert_eq!(CostForm::from_args(&args).unwrap(), CostForm::Coefficients([1.0, 0.5, 2.0, 0.0]));
        let args = CostArgs { cost: None, weighted_cost: Some("1,3".into()) };
        assert_eq!(CostForm::from_args(&args).unwrap(), CostForm::Weighted { r_fp: 1.0, r_fn: 3.0 });
        let args = CostArgs { cost: Some("1,2,3".into()), weighted_cost: None };
        assert!(CostForm::from_args(&args).is_err());
    }

    #[test]
    fn mode_requires_seed_for_monte_carlo() {
        assert!(parse_mode("mc", None).is_err());
        assert_eq!(parse_mode("mc", Some(4)).unwrap(), ApplicationMode::MonteCarlo { seed: 4 });
        assert!(parse_mode("random", Some(4)).is_err());
    }
}
