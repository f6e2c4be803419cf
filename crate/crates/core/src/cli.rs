//! Command-line front end of the `epdic` binary.
//!
//! Every subcommand accepts `--config FILE` (flat `key = value` lines whose
//! keys are the long flag names), `--out DIR` and `--seed N`. Flags given on
//! the command line override the config file. Each run writes its result
//! files plus `<command>_manifest.json` into `--out`.
//!
//! Exit codes: 0 success, 1 usage or input error, 2 numerical failure.

use std::collections::BTreeMap;
use std::ffi::OsString;
use std::fs;
use std::path::{Path, PathBuf};

use clap::{Args, CommandFactory, Parser, Subcommand, ValueEnum};
use nalgebra::{DMatrix, DVector};
use serde::Serialize;

use crate::criteria::{boundedness_scan, criterion, influence_value, CriterionKind, GridSpec};
use crate::divergence::TuningTriple;
use crate::error::{Error, Result};
use crate::estimation::{fit, EstimatorKind, FitOptions, RegressionProblem};
use crate::io::{
    fmt_num, load_config, load_csv, write_csv_rows, ColumnKind, ColumnSpec, DataManifest, Manifest,
    Schema,
};
use crate::neural::{
    preset_nn_tuning, select_architecture, ClassificationData, TrainOptions, NN_TOP_K,
};
use crate::panel::{
    fit_panel, panel_criterion, panel_from_dataset, preset_wage_tuning, simulate_panel, PanelData,
    PanelFitOptions, PanelScorer,
};
use crate::selection::{
    consolidate, enumerate_and_rank, lasso_screen, RegressionScorer, SubsetScorer,
};
use crate::simulation::{
    generate, preset_tuning, replication_rng, run_study, LeverageMode, Scheme, SimConfig,
    TuningSource,
};
use crate::tuning::{select_tuning, TuningFamily, TuningGrid, TuningMap};

#[derive(Debug, Parser)]
#[command(
    name = "epdic",
    version,
    about = "Robust estimation and information criteria with the EPD family"
)]
#[command(args_override_self = true)]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Monte Carlo study on contaminated regression data.
    Simulate(SimulateArgs),
    /// Fit one estimator and report all criteria it admits.
    Fit(FitArgs),
    /// Select tuning parameters by score matching.
    Tune(TuneArgs),
    /// Subset selection with consolidated criterion rankings.
    Select(SelectArgs),
    /// Influence-function scan of a fitted criterion.
    Influence(InfluenceArgs),
    /// Random-intercept panel fit.
    Panel(PanelArgs),
    /// Neural architecture selection.
    Nn(NnArgs),
}

#[derive(Debug, Clone, Args, Serialize)]
pub struct CommonArgs {
    /// Flat key = value file with defaults for the other flags.
    #[arg(long)]
    #[serde(skip)]
    pub config: Option<PathBuf>,
    /// Output directory.
    #[arg(long, default_value = ".")]
    pub out: PathBuf,
    #[arg(long, default_value_t = 2024)]
    pub seed: u64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum EstimatorArg {
    Mle,
    Dpde,
    Epde,
}

impl From<EstimatorArg> for EstimatorKind {
    fn from(e: EstimatorArg) -> Self {
        match e {
            EstimatorArg::Mle => EstimatorKind::Mle,
            EstimatorArg::Dpde => EstimatorKind::Dpde,
            EstimatorArg::Epde => EstimatorKind::Epde,
        }
    }
}

/// Regression data: a CSV file, or a simulated draw when `--data` is absent.
#[derive(Debug, Clone, Args, Serialize)]
pub struct DataArgs {
    #[arg(long)]
    pub data: Option<PathBuf>,
    #[arg(long, default_value = "y")]
    pub response: String,
    /// Comma-separated covariate columns (default: every other column).
    #[arg(long)]
    pub covariates: Option<String>,
    /// Standardize covariates read from `--data`.
    #[arg(long)]
    pub standardize: bool,
    /// Do not add an intercept column to `--data` covariates.
    #[arg(long)]
    pub no_intercept: bool,
    /// Simulated data: 0/pure, 1/error, 2/covariate.
    #[arg(long, default_value = "pure")]
    pub scheme: String,
    #[arg(long, default_value_t = 0.0)]
    pub delta: f64,
    #[arg(long, default_value_t = 150)]
    pub n: usize,
}

#[derive(Debug, Clone, Args, Serialize)]
pub struct TuningArgs {
    #[arg(long, default_value_t = 0.1)]
    pub alpha: f64,
    #[arg(long, default_value_t = 0.7)]
    pub beta: f64,
    #[arg(long, default_value_t = 0.3)]
    pub gamma: f64,
}

#[derive(Debug, Clone, Args, Serialize)]
pub struct SimulateArgs {
    #[command(flatten)]
    pub common: CommonArgs,
    #[arg(long, default_value = "1")]
    pub scheme: String,
    #[arg(long, default_value_t = 0.093)]
    pub delta: f64,
    #[arg(long, default_value_t = 200)]
    pub reps: usize,
    #[arg(long, default_value_t = 150)]
    pub n: usize,
    #[arg(long, default_value_t = 0.5)]
    pub rho: f64,
    #[arg(long, default_value_t = 1.0)]
    pub sigma: f64,
    /// Redraw a single coordinate of each leverage row instead of all.
    #[arg(long)]
    pub single_coordinate: bool,
    /// Re-select tuning by score matching in every replication.
    #[arg(long)]
    pub gsm: bool,
    /// Explicit triples; the reference preset for (scheme, delta) otherwise.
    #[arg(long)]
    pub alpha: Option<f64>,
    #[arg(long)]
    pub beta: Option<f64>,
    #[arg(long)]
    pub gamma: Option<f64>,
    #[arg(long)]
    pub dpd_gamma: Option<f64>,
}

#[derive(Debug, Clone, Args, Serialize)]
pub struct FitArgs {
    #[command(flatten)]
    pub common: CommonArgs,
    #[command(flatten)]
    pub data: DataArgs,
    #[command(flatten)]
    pub tuning: TuningArgs,
    #[arg(long, value_enum, default_value = "epde")]
    pub estimator: EstimatorArg,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum FamilyArg {
    Dpd,
    Epd,
}

#[derive(Debug, Clone, Args, Serialize)]
pub struct TuneArgs {
    #[command(flatten)]
    pub common: CommonArgs,
    #[command(flatten)]
    pub data: DataArgs,
    #[arg(long, value_enum, default_value = "dpd")]
    pub family: FamilyArg,
}

#[derive(Debug, Clone, Args, Serialize)]
pub struct SelectArgs {
    #[command(flatten)]
    pub common: CommonArgs,
    /// Wage panel CSV; a simulated regression when absent.
    #[arg(long)]
    pub data: Option<PathBuf>,
    /// `all` or a comma list of epdic, dpdic, mlic.
    #[arg(long, default_value = "all")]
    pub criteria: String,
    #[arg(long, default_value_t = 15)]
    pub top_k: usize,
    /// Skip screening and enumerate only these covariates.
    #[arg(long)]
    pub covariates: Option<String>,
    /// Periods per individual when the file has no id/year columns.
    #[arg(long, default_value_t = 7)]
    pub periods: usize,
    #[arg(long, default_value = "1")]
    pub scheme: String,
    #[arg(long, default_value_t = 0.093)]
    pub delta: f64,
}

#[derive(Debug, Clone, Args, Serialize)]
pub struct InfluenceArgs {
    #[command(flatten)]
    pub common: CommonArgs,
    #[command(flatten)]
    pub data: DataArgs,
    #[command(flatten)]
    pub tuning: TuningArgs,
    #[arg(long, value_enum, default_value = "epde")]
    pub estimator: EstimatorArg,
    /// Contamination covariate point (default: column means of the design).
    #[arg(long)]
    pub x: Option<String>,
    /// Half-width of the emitted curve in units of σ̂.
    #[arg(long, default_value_t = 20.0)]
    pub half_width: f64,
    #[arg(long, default_value_t = 401)]
    pub points: usize,
}

#[derive(Debug, Clone, Args, Serialize)]
pub struct PanelArgs {
    #[command(flatten)]
    pub common: CommonArgs,
    /// Wage panel CSV; a simulated panel when absent.
    #[arg(long)]
    pub data: Option<PathBuf>,
    #[arg(long)]
    pub covariates: Option<String>,
    #[arg(long, default_value_t = 7)]
    pub periods: usize,
    #[arg(long, value_enum, default_value = "epde")]
    pub estimator: EstimatorArg,
    #[arg(long)]
    pub alpha: Option<f64>,
    #[arg(long)]
    pub beta: Option<f64>,
    #[arg(long)]
    pub gamma: Option<f64>,
    #[arg(long, default_value_t = 100)]
    pub individuals: usize,
    #[arg(long, default_value_t = 0.5)]
    pub sigma_alpha: f64,
    #[arg(long, default_value_t = 1.0)]
    pub sigma_u: f64,
}

#[derive(Debug, Clone, Args, Serialize)]
pub struct NnArgs {
    #[command(flatten)]
    pub common: CommonArgs,
    /// Predictive-maintenance CSV; simulated features when absent.
    #[arg(long)]
    pub data: Option<PathBuf>,
    #[arg(long, default_value = "all")]
    pub criteria: String,
    #[arg(long, default_value_t = NN_TOP_K)]
    pub top_k: usize,
    #[arg(long, default_value_t = 500)]
    pub epochs: usize,
    #[arg(long, default_value_t = 0.05)]
    pub step: f64,
    #[arg(long, default_value_t = 400)]
    pub samples: usize,
}

/// Process-level failure with its exit code.
#[derive(Debug)]
struct Failure {
    code: i32,
    message: String,
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        let code = match e {
            Error::InvalidConfig(_)
            | Error::MissingColumn(_)
            | Error::MissingCell { .. }
            | Error::NonNumericCell { .. }
            | Error::EmptyFile
            | Error::UnbalancedPanel(_)
            | Error::Io(_)
            | Error::KindMismatch(_)
            | Error::ShapeMismatch(_)
            | Error::IndexOutOfRange { .. }
            | Error::TooManyCovariates { .. } => 1,
            _ => 2,
        };
        Failure {
            code,
            message: e.to_string(),
        }
    }
}

/// Parses `argv` (program name first), runs the command and returns the
/// process exit code.
pub fn cli_dispatch<I, T>(argv: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let argv: Vec<OsString> = argv.into_iter().map(Into::into).collect();
    let argv = match expand_config(argv) {
        Ok(a) => a,
        Err(e) => {
            eprintln!("error: {e}");
            return 1;
        }
    };
    let cli = match Cli::try_parse_from(&argv) {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return match e.kind() {
                clap::error::ErrorKind::DisplayHelp | clap::error::ErrorKind::DisplayVersion => 0,
                _ => 1,
            };
        }
    };
    match run(cli.command) {
        Ok(()) => 0,
        Err(f) => {
            eprintln!("error: {}", f.message);
            f.code
        }
    }
}

/// Inserts `--key value` pairs from `--config FILE` right after the
/// subcommand so that explicit flags, parsed later, win.
fn expand_config(argv: Vec<OsString>) -> Result<Vec<OsString>> {
    let strs: Vec<String> = argv
        .iter()
        .map(|a| a.to_string_lossy().into_owned())
        .collect();
    let Some(pos) = strs
        .iter()
        .position(|a| a == "--config" || a.starts_with("--config="))
    else {
        return Ok(argv);
    };
    let path = match strs[pos].strip_prefix("--config=") {
        Some(p) => p.to_string(),
        None => match strs.get(pos + 1) {
            Some(p) => p.clone(),
            None => return Ok(argv),
        },
    };
    let Some(sub_pos) = strs
        .iter()
        .skip(1)
        .position(|a| !a.starts_with('-'))
        .map(|p| p + 1)
    else {
        return Ok(argv);
    };
    let cmd = Cli::command();
    let Some(sub) = cmd.find_subcommand(&strs[sub_pos]) else {
        return Ok(argv);
    };
    let args: Vec<(String, bool)> = sub
        .get_arguments()
        .filter_map(|a| {
            a.get_long()
                .map(|l| (l.to_string(), a.get_action().takes_values()))
        })
        .filter(|(l, _)| l != "config" && l != "help")
        .collect();
    let allowed: Vec<&str> = args.iter().map(|(l, _)| l.as_str()).collect();
    let allowed_underscore: Vec<String> = allowed.iter().map(|l| l.replace('-', "_")).collect();
    let mut all: Vec<&str> = allowed.clone();
    all.extend(allowed_underscore.iter().map(String::as_str));
    let cfg = load_config(&path, &all)?;
    let mut injected = Vec::new();
    for (k, v) in cfg {
        let long = k.replace('_', "-");
        let takes_value = args
            .iter()
            .find(|(l, _)| *l == long)
            .map(|(_, t)| *t)
            .unwrap_or(true);
        if takes_value {
            injected.push(OsString::from(format!("--{long}")));
            injected.push(OsString::from(v));
        } else {
            match v.as_str() {
                "true" | "1" | "yes" => injected.push(OsString::from(format!("--{long}"))),
                "false" | "0" | "no" => {}
                other => {
                    return Err(Error::InvalidConfig(format!(
                        "`{k}` expects true or false, got `{other}`"
                    )));
                }
            }
        }
    }
    let mut out = argv[..=sub_pos].to_vec();
    out.extend(injected);
    out.extend(argv[sub_pos + 1..].iter().cloned());
    Ok(out)
}

fn run(cmd: Command) -> std::result::Result<(), Failure> {
    match cmd {
        Command::Simulate(a) => cmd_simulate(&a),
        Command::Fit(a) => cmd_fit(&a),
        Command::Tune(a) => cmd_tune(&a),
        Command::Select(a) => cmd_select(&a),
        Command::Influence(a) => cmd_influence(&a),
        Command::Panel(a) => cmd_panel(&a),
        Command::Nn(a) => cmd_nn(&a),
    }
    .map_err(Failure::from)
}

fn config_map<T: Serialize>(args: &T) -> Result<BTreeMap<String, String>> {
    let v = serde_json::to_value(args)?;
    let mut out = BTreeMap::new();
    flatten_json("", &v, &mut out);
    Ok(out)
}

fn flatten_json(prefix: &str, v: &serde_json::Value, out: &mut BTreeMap<String, String>) {
    match v {
        serde_json::Value::Object(m) => {
            for (k, x) in m {
                // flattened clap groups nest one level; keep leaf names only
                let _ = prefix;
                flatten_json(k, x, out);
            }
        }
        serde_json::Value::Null => {
            out.insert(prefix.to_string(), String::new());
        }
        serde_json::Value::String(s) => {
            out.insert(prefix.to_string(), s.clone());
        }
        other => {
            out.insert(prefix.to_string(), other.to_string());
        }
    }
}

struct Output<'a> {
    dir: &'a Path,
    manifest: Manifest,
}

impl<'a> Output<'a> {
    fn new<T: Serialize>(command: &str, common: &'a CommonArgs, args: &T) -> Result<Self> {
        fs::create_dir_all(&common.out)?;
        Ok(Self {
            dir: &common.out,
            manifest: Manifest::new(command, common.seed, config_map(args)?),
        })
    }

    fn path(&mut self, name: &str) -> PathBuf {
        self.manifest.outputs.push(name.to_string());
        self.dir.join(name)
    }

    fn csv_with<F: FnOnce(fs::File) -> Result<()>>(&mut self, name: &str, f: F) -> Result<()> {
        let path = self.path(name);
        f(fs::File::create(path)?)
    }

    fn json<T: Serialize>(&mut self, name: &str, value: &T) -> Result<()> {
        let path = self.path(name);
        let mut text = serde_json::to_string_pretty(value)?;
        text.push('\n');
        fs::write(path, text)?;
        Ok(())
    }

    fn finish(self) -> Result<()> {
        let cmd = self.manifest.command.clone();
        self.manifest
            .write(self.dir.join(format!("{cmd}_manifest.json")))
    }
}

fn split_list(s: &str) -> Vec<String> {
    s.split(',')
        .map(|x| x.trim().to_string())
        .filter(|x| !x.is_empty())
        .collect()
}

fn parse_criteria(s: &str) -> Result<Vec<CriterionKind>> {
    if s.eq_ignore_ascii_case("all") {
        return Ok(CriterionKind::ALL.to_vec());
    }
    let kinds = split_list(s)
        .iter()
        .map(|k| CriterionKind::parse(k))
        .collect::<Result<Vec<_>>>()?;
    if kinds.is_empty() {
        return Err(Error::InvalidConfig("no criteria given".into()));
    }
    Ok(kinds)
}

fn csv_header(path: &Path) -> Result<Vec<String>> {
    let mut rdr = csv::Reader::from_path(path)?;
    Ok(rdr
        .headers()?
        .iter()
        .map(|h| h.trim().to_string())
        .collect())
}

/// Loads the regression problem described by `a`.
fn load_problem(a: &DataArgs, seed: u64) -> Result<(RegressionProblem, Option<DataManifest>)> {
    let Some(path) = &a.data else {
        let cfg = SimConfig {
            n: a.n,
            scheme: Scheme::parse(&a.scheme)?,
            delta: a.delta,
            reps: 1,
            base_seed: seed,
            ..SimConfig::default()
        };
        return Ok((generate(&cfg, 0)?, None));
    };
    let covs = match &a.covariates {
        Some(c) => split_list(c),
        None => csv_header(path)?
            .into_iter()
            .filter(|h| *h != a.response)
            .collect(),
    };
    let kind = if a.standardize {
        ColumnKind::Standardized
    } else {
        ColumnKind::Numeric
    };
    let mut cols = vec![ColumnSpec::new(&a.response, ColumnKind::Numeric)];
    cols.extend(covs.iter().map(|c| ColumnSpec::new(c, kind)));
    let ds = load_csv(path, &Schema::new(cols))?;
    let names: Vec<&str> = covs.iter().map(String::as_str).collect();
    let mut x = ds.matrix(&names)?;
    let mut labels = covs.clone();
    if !a.no_intercept {
        x = x.insert_column(0, 1.0);
        labels.insert(0, "intercept".into());
    }
    let problem = RegressionProblem::with_names(x, ds.column(&a.response)?, labels)?;
    let dm = DataManifest {
        path: path.display().to_string(),
        rows: ds.n_rows(),
        columns: ds.summary().to_vec(),
    };
    Ok((problem, Some(dm)))
}

fn cmd_simulate(a: &SimulateArgs) -> Result<()> {
    let scheme = Scheme::parse(&a.scheme)?;
    let cfg = SimConfig {
        n: a.n,
        rho: a.rho,
        sigma: a.sigma,
        scheme,
        delta: a.delta,
        reps: a.reps,
        base_seed: a.common.seed,
        leverage_mode: if a.single_coordinate {
            LeverageMode::SingleCoordinate
        } else {
            LeverageMode::AllCoordinates
        },
        ..SimConfig::default()
    };
    let source = if a.gsm {
        TuningSource::Gsm {
            dpd: TuningGrid::default_dpd(),
            epd: TuningGrid::default_epd(),
        }
    } else {
        let preset = preset_tuning(scheme, a.delta).unwrap_or(TuningMap {
            dpd: TuningTriple::dpd(0.5)?,
            epd: TuningTriple::new(0.1, 0.7, 0.3)?,
        });
        let epd = TuningTriple::new(
            a.alpha.unwrap_or(preset.epd.alpha()),
            a.beta.unwrap_or(preset.epd.beta()),
            a.gamma.unwrap_or(preset.epd.gamma()),
        )?;
        let dpd = a
            .dpd_gamma
            .map(TuningTriple::dpd)
            .transpose()?
            .unwrap_or(preset.dpd);
        TuningSource::Fixed(TuningMap { dpd, epd })
    };
    let summary = run_study(&cfg, &source, &FitOptions::default())?;
    let mut out = Output::new("simulate", &a.common, a)?;
    out.csv_with("simulate_records.csv", |f| summary.write_csv(f))?;
    out.json(
        "simulate_summary.json",
        &(&summary.estimators, &summary.failures),
    )?;
    out.finish()
}

#[derive(Serialize)]
struct FitReport {
    estimator: String,
    tuning: TuningTriple,
    names: Vec<String>,
    coef: Vec<f64>,
    sigma: f64,
    objective: f64,
    iterations: usize,
    converged: bool,
    criteria: BTreeMap<String, [f64; 3]>,
}

fn cmd_fit(a: &FitArgs) -> Result<()> {
    let (problem, dm) = load_problem(&a.data, a.common.seed)?;
    let kind: EstimatorKind = a.estimator.into();
    let t = match kind {
        EstimatorKind::Dpde => TuningTriple::dpd(a.tuning.gamma)?,
        _ => TuningTriple::new(a.tuning.alpha, a.tuning.beta, a.tuning.gamma)?,
    };
    let f = fit(&problem, &t, kind, None, &FitOptions::default())?;
    let mut crit = BTreeMap::new();
    for k in CriterionKind::ALL {
        if let Ok(r) = criterion(&problem, &f, k) {
            crit.insert(k.label().to_string(), [r.fit_term, r.penalty, r.total]);
        }
    }
    let rep = FitReport {
        estimator: kind.label().into(),
        tuning: f.tuning,
        names: problem.names().to_vec(),
        coef: f.params.coef.iter().copied().collect(),
        sigma: f.params.sigma(),
        objective: f.objective_value,
        iterations: f.iterations,
        converged: f.converged,
        criteria: crit,
    };
    let mut out = Output::new("fit", &a.common, a)?;
    out.manifest.data = dm;
    out.json("fit_result.json", &rep)?;
    out.finish()
}

fn cmd_tune(a: &TuneArgs) -> Result<()> {
    let (problem, dm) = load_problem(&a.data, a.common.seed)?;
    let (family, grid) = match a.family {
        FamilyArg::Dpd => (TuningFamily::Dpd, TuningGrid::default_dpd()),
        FamilyArg::Epd => (TuningFamily::Epd, TuningGrid::default_epd()),
    };
    let sel = select_tuning(&problem, &grid, family, &FitOptions::default())?;
    let mut out = Output::new("tune", &a.common, a)?;
    out.manifest.data = dm;
    let rows: Vec<Vec<String>> = sel
        .table
        .iter()
        .map(|(t, s)| {
            vec![
                fmt_num(t.alpha()),
                fmt_num(t.beta()),
                fmt_num(t.gamma()),
                fmt_num(*s),
            ]
        })
        .collect();
    let path = out.path("tune_table.csv");
    write_csv_rows(path, &["alpha", "beta", "gamma", "S_n"], &rows)?;
    out.json("tune_best.json", &sel.best)?;
    out.finish()
}

fn load_wage_panel(
    path: &Path,
    periods: usize,
) -> Result<(crate::io::Dataset, PanelData, Vec<String>)> {
    let header = csv_header(path)?;
    let mut schema = Schema::wage_panel();
    let has_ids = header.iter().any(|h| h == "id") && header.iter().any(|h| h == "year");
    if !has_ids {
        schema
            .columns
            .retain(|c| c.name != "id" && c.name != "year");
    }
    let ds = load_csv(path, &schema)?;
    let covs = ds.covariate_names(&["id", "year", "lwage"]);
    let cov_refs: Vec<&str> = covs.iter().map(String::as_str).collect();
    let data = if has_ids {
        panel_from_dataset(&ds, "id", "year", "lwage", &cov_refs)?
    } else {
        // rows are individual-major with `periods` consecutive years each
        if periods == 0 || ds.n_rows() % periods != 0 {
            return Err(Error::UnbalancedPanel(format!(
                "{} rows are not a multiple of {periods} periods",
                ds.n_rows()
            )));
        }
        let x = ds.matrix(&cov_refs)?;
        let y = ds.column("lwage")?;
        let n = ds.n_rows() / periods;
        let xs = (0..n)
            .map(|i| {
                DMatrix::from_fn(periods, covs.len() + 1, |t, j| {
                    if j == 0 {
                        1.0
                    } else {
                        x[(i * periods + t, j - 1)]
                    }
                })
            })
            .collect();
        let ys = (0..n)
            .map(|i| DVector::from_fn(periods, |t, _| y[i * periods + t]))
            .collect();
        let mut names = vec!["intercept".to_string()];
        names.extend(covs.iter().cloned());
        let blocks = PanelData::random_intercept(xs, ys)?;
        PanelData::new(blocks.blocks().to_vec(), names)?
    };
    Ok((ds, data, covs))
}

fn covariate_mask(list: &str, names: &[String]) -> Result<Vec<usize>> {
    split_list(list)
        .iter()
        .map(|c| {
            names
                .iter()
                .position(|n| n == c)
                .ok_or_else(|| Error::MissingColumn(c.clone()))
        })
        .collect()
}

fn cmd_select(a: &SelectArgs) -> Result<()> {
    let kinds = parse_criteria(&a.criteria)?;
    let mut out = Output::new("select", &a.common, a)?;
    let lists = match &a.data {
        Some(path) => {
            let (ds, data, covs) = load_wage_panel(path, a.periods)?;
            out.manifest.data = Some(DataManifest {
                path: path.display().to_string(),
                rows: ds.n_rows(),
                columns: ds.summary().to_vec(),
            });
            let tunings = preset_wage_tuning();
            let scorer = PanelScorer::new(data.clone());
            let names = scorer.candidate_names();
            let mask: Vec<usize> = match &a.covariates {
                Some(c) => covariate_mask(c, &names)?,
                None => {
                    // screening runs on the pooled regression; a covariate is
                    // kept when every estimator keeps it
                    let pooled = data.pooled_problem()?;
                    let mut keep: Option<Vec<usize>> = None;
                    let mut rows = Vec::new();
                    for kind in EstimatorKind::ALL {
                        let scr = lasso_screen(&pooled, &tunings.for_kind(kind), kind, None)?;
                        for (l, size, ic) in &scr.path {
                            rows.push(vec![
                                kind.label().to_string(),
                                fmt_num(*l),
                                size.to_string(),
                                fmt_num(*ic),
                            ]);
                        }
                        let act: Vec<usize> = scr.active.iter().map(|j| j - 1).collect();
                        keep = Some(match keep {
                            None => act,
                            Some(k) => k.into_iter().filter(|j| act.contains(j)).collect(),
                        });
                    }
                    let path = out.path("select_lasso_path.csv");
                    write_csv_rows(path, &["estimator", "lambda", "active", "criterion"], &rows)?;
                    let keep = keep.unwrap_or_default();
                    if keep.is_empty() {
                        return Err(Error::EmptyActiveSet { lambda: 0.0 });
                    }
                    keep
                }
            };
            let _ = covs;
            enumerate_and_rank(&scorer, &mask, &kinds, &tunings)?.lists
        }
        None => {
            let scheme = Scheme::parse(&a.scheme)?;
            let cfg = SimConfig {
                scheme,
                delta: a.delta,
                reps: 1,
                base_seed: a.common.seed,
                ..SimConfig::default()
            };
            let problem = generate(&cfg, 0)?;
            let tunings = preset_tuning(scheme, a.delta)
                .unwrap_or(preset_tuning(Scheme::Pure, 0.0).expect("preset"));
            let scorer = RegressionScorer::new(problem);
            let mask: Vec<usize> = match &a.covariates {
                Some(c) => covariate_mask(c, &scorer.candidate_names())?,
                None => (0..scorer.candidates.len()).collect(),
            };
            enumerate_and_rank(&scorer, &mask, &kinds, &tunings)?.lists
        }
    };
    for l in &lists {
        let name = format!("select_ranked_{}.csv", l.kind.label().to_ascii_lowercase());
        out.csv_with(&name, |f| l.write_csv(f))?;
    }
    if lists.len() >= 2 {
        let cons = consolidate(&lists, a.top_k)?;
        out.csv_with("select_consolidated.csv", |f| cons.write_csv(f))?;
    }
    out.finish()
}

fn cmd_influence(a: &InfluenceArgs) -> Result<()> {
    let (problem, dm) = load_problem(&a.data, a.common.seed)?;
    let kind: EstimatorKind = a.estimator.into();
    let t = match kind {
        EstimatorKind::Dpde => TuningTriple::dpd(a.tuning.gamma)?,
        _ => TuningTriple::new(a.tuning.alpha, a.tuning.beta, a.tuning.gamma)?,
    };
    let f = fit(&problem, &t, kind, None, &FitOptions::default())?;
    let x_pt = match &a.x {
        Some(s) => {
            let v = split_list(s)
                .iter()
                .map(|c| {
                    c.parse::<f64>()
                        .map_err(|_| Error::InvalidConfig(format!("bad --x entry `{c}`")))
                })
                .collect::<Result<Vec<_>>>()?;
            DVector::from_vec(v)
        }
        None => DVector::from_fn(problem.p(), |j, _| problem.design().column(j).mean()),
    };
    let scan = boundedness_scan(&f, &x_pt, &GridSpec::default())?;
    let mode = x_pt.dot(&f.params.coef);
    let sigma = f.params.sigma();
    let pts = a.points.max(3) | 1;
    let rows = (0..pts)
        .map(|k| {
            let u = -1.0 + 2.0 * k as f64 / (pts - 1) as f64;
            let y = mode + u * a.half_width * sigma;
            Ok(vec![fmt_num(y), fmt_num(influence_value(&f, y, &x_pt)?)])
        })
        .collect::<Result<Vec<_>>>()?;
    let mut out = Output::new("influence", &a.common, a)?;
    out.manifest.data = dm;
    let path = out.path("influence_curve.csv");
    write_csv_rows(path, &["y", "influence"], &rows)?;
    out.json("influence_scan.json", &scan)?;
    out.finish()
}

#[derive(Serialize)]
struct PanelReport {
    estimator: String,
    tuning: TuningTriple,
    names: Vec<String>,
    coef: Vec<f64>,
    sigma_alpha: f64,
    sigma_u: f64,
    objective: f64,
    converged: bool,
    criterion: Option<[f64; 3]>,
}

fn cmd_panel(a: &PanelArgs) -> Result<()> {
    let mut out = Output::new("panel", &a.common, a)?;
    let (data, default_t) = match &a.data {
        Some(path) => {
            let (ds, data, covs) = load_wage_panel(path, a.periods)?;
            out.manifest.data = Some(DataManifest {
                path: path.display().to_string(),
                rows: ds.n_rows(),
                columns: ds.summary().to_vec(),
            });
            let data = match &a.covariates {
                Some(c) => {
                    let mut cols = vec![0];
                    for name in split_list(c) {
                        let j = covs
                            .iter()
                            .position(|n| *n == name)
                            .ok_or(Error::MissingColumn(name))?;
                        cols.push(j + 1);
                    }
                    data.subset(&cols)?
                }
                None => data,
            };
            (data, preset_wage_tuning())
        }
        None => {
            let mut rng = replication_rng(a.common.seed, 0);
            let coef = DVector::from_vec(vec![1.0, 0.5, -0.5]);
            let d = simulate_panel(
                &mut rng,
                a.individuals,
                a.periods,
                &coef,
                true,
                a.sigma_alpha,
                a.sigma_u,
            )?;
            (d, preset_wage_tuning())
        }
    };
    let kind: EstimatorKind = a.estimator.into();
    let base = default_t.for_kind(kind);
    let t = match kind {
        EstimatorKind::Mle => base,
        EstimatorKind::Dpde => TuningTriple::dpd(a.gamma.unwrap_or(base.gamma()))?,
        EstimatorKind::Epde => TuningTriple::new(
            a.alpha.unwrap_or(base.alpha()),
            a.beta.unwrap_or(base.beta()),
            a.gamma.unwrap_or(base.gamma()),
        )?,
    };
    let f = fit_panel(&data, &t, kind, None, &PanelFitOptions::default())?;
    let ck = match kind {
        EstimatorKind::Mle => CriterionKind::Mlic,
        EstimatorKind::Dpde => CriterionKind::Dpdic,
        EstimatorKind::Epde => CriterionKind::Epdic,
    };
    let crit = panel_criterion(&data, &f, ck)
        .ok()
        .map(|r| [r.fit_term, r.penalty, r.total]);
    let rep = PanelReport {
        estimator: kind.label().into(),
        tuning: f.tuning,
        names: data.names().to_vec(),
        coef: f.params.coef.iter().copied().collect(),
        sigma_alpha: f.params.sigma_alpha(),
        sigma_u: f.params.sigma_u(),
        objective: f.objective_value,
        converged: f.converged,
        criterion: crit,
    };
    out.json("panel_fit.json", &rep)?;
    out.finish()
}

/// Two-feature logistic toy data for runs without `--data`.
fn toy_classification(n: usize, seed: u64) -> Result<ClassificationData> {
    use rand::Rng;
    let mut rng = replication_rng(seed, 0);
    let x = DMatrix::from_fn(n, 3, |_, _| {
        rng.sample::<f64, _>(rand_distr::StandardNormal)
    });
    let y = (0..n)
        .map(|i| {
            let eta = 1.5 * x[(i, 0)] - x[(i, 1)] * x[(i, 2)];
            u8::from(rng.random::<f64>() < 1.0 / (1.0 + (-eta).exp()))
        })
        .collect();
    ClassificationData::standardized(x, y)
}

fn cmd_nn(a: &NnArgs) -> Result<()> {
    let kinds = parse_criteria(&a.criteria)?;
    let mut out = Output::new("nn", &a.common, a)?;
    let data = match &a.data {
        Some(path) => {
            let ds = load_csv(path, &Schema::ai4i())?;
            out.manifest.data = Some(DataManifest {
                path: path.display().to_string(),
                rows: ds.n_rows(),
                columns: ds.summary().to_vec(),
            });
            let feats = ds.covariate_names(&["Machine failure"]);
            let refs: Vec<&str> = feats.iter().map(String::as_str).collect();
            ClassificationData::from_dataset(&ds, &refs, "Machine failure")?
        }
        None => toy_classification(a.samples, a.common.seed)?,
    };
    let opts = TrainOptions {
        seed: a.common.seed,
        max_epochs: a.epochs,
        step: a.step,
        ..TrainOptions::default()
    };
    let sel = select_architecture(&data, &preset_nn_tuning(), &kinds, &opts, a.top_k)?;
    out.csv_with("nn_ranking.csv", |f| {
        sel.consolidated.write_csv_labeled(f, "architecture")
    })?;
    out.json("nn_scores.json", &sel.scores)?;
    out.finish()
}
