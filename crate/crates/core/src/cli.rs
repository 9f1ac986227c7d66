//! `stochcap` command-line interface.
//!
//! Exit codes: 0 success, 2 usage, 3 parse/validation, 4 non-identifiable
//! data, 5 optimiser did not converge.

use std::fs::File;
use std::io::{BufReader, BufWriter, Write};
use std::path::{Path, PathBuf};

use clap::{Parser, Subcommand, ValueEnum};
use serde::Serialize;

use crate::capacity::WeibullCapacity;
use crate::error::{Error, Result};
use crate::io::{read_profile_csv, read_results_csv, write_profile_csv, write_results_csv, ProfileTable};
use crate::metrics::{curve_pair_for_cdf, curve_pair_for_cfb, MetricReport};
use crate::mle::{fit, predicted_breakdowns, EstimateResult, FitOptions};
use crate::plot::{Chart, Series, SeriesStyle};
use crate::regression::{fit_model, parse_model_list, screen_models, Variable};
use crate::study::{
    cell_profiles, run_study, summarize, to_regression_observations, CellSummary, Response, StudyConfig, StudySummary,
    SCHEMA_VERSION,
};
use crate::synthetic::{
    calibrate_base_profile, cumulative_frequency, expected_breakdowns, generate_dataset, rescale_profile,
    CalibrationSpec, CfbFlavor,
};

pub const EXIT_OK: i32 = 0;
pub const EXIT_USAGE: i32 = 2;
pub const EXIT_INVALID: i32 = 3;
pub const EXIT_NON_IDENTIFIABLE: i32 = 4;
pub const EXIT_NON_CONVERGED: i32 = 5;

#[derive(Debug, Parser)]
#[command(
    name = "stochcap",
    version,
    about = "Stochastic capacity estimation and reliability studies"
)]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Fit a Weibull capacity distribution to a profile CSV with breakdowns.
    Estimate(EstimateArgs),
    /// Generate a pseudo-empirical dataset CSV.
    Synth(SynthArgs),
    /// Run the Monte Carlo reliability study.
    Study(StudyArgs),
    /// Fit regression models of estimation error to study results.
    Regress(RegressArgs),
    /// Plot study results as SVG plus a CSV of the plotted points.
    Plot(PlotArgs),
}

#[derive(Debug, clap::Args)]
pub struct EstimateArgs {
    #[arg(long)]
    pub input: PathBuf,
    #[arg(long)]
    pub fixed_shape: Option<f64>,
    /// Known true distribution as "scale,shape"; adds error metrics.
    #[arg(long)]
    pub truth: Option<String>,
    #[arg(long, default_value_t = 5)]
    pub multistart: usize,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
}

#[derive(Debug, clap::Args)]
pub struct SynthArgs {
    /// Demand profile CSV (`intensity,records`).
    #[arg(long, conflicts_with = "calibrate", required_unless_present = "calibrate")]
    pub profile: Option<PathBuf>,
    /// Build a synthetic base profile: "total=7447,target=52[,min=20,max=250,step=1]".
    #[arg(long)]
    pub calibrate: Option<String>,
    /// True capacity distribution as "scale,shape".
    #[arg(long)]
    pub dist: String,
    #[arg(long)]
    pub seed: u64,
    /// Rescale record counts to this many expected breakdowns first.
    #[arg(long)]
    pub target_breakdowns: Option<f64>,
    /// Output file (standard output when omitted).
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, clap::Args)]
pub struct StudyArgs {
    /// Study configuration JSON (defaults when omitted).
    #[arg(long)]
    pub config: Option<PathBuf>,
    #[arg(long)]
    pub out: PathBuf,
    #[arg(long)]
    pub summary: Option<PathBuf>,
    /// Worker threads (0 = all cores).
    #[arg(long, default_value_t = 0)]
    pub jobs: usize,
}

#[derive(Debug, Clone, Copy, ValueEnum)]
pub enum ResponseArg {
    CdfAwre,
    CfbAwre,
}

impl From<ResponseArg> for Response {
    fn from(r: ResponseArg) -> Self {
        match r {
            ResponseArg::CdfAwre => Response::CdfAwre,
            ResponseArg::CfbAwre => Response::CfbAwre,
        }
    }
}

#[derive(Debug, clap::Args)]
pub struct RegressArgs {
    #[arg(long)]
    pub results: PathBuf,
    #[arg(long, value_enum, default_value = "cdf-awre")]
    pub response: ResponseArg,
    /// Semicolon-separated regressor subsets, e.g. "x5;x3,x4;x3,x4,x5".
    #[arg(long, default_value = "x5;x3,x4;x3,x4,x5", allow_hyphen_values = true)]
    pub models: String,
}

#[derive(Debug, Clone, Copy, ValueEnum)]
pub enum PlotKind {
    AwreVsBreakdowns,
    CfbCurves,
}

#[derive(Debug, clap::Args)]
pub struct PlotArgs {
    #[arg(long)]
    pub results: PathBuf,
    #[arg(long)]
    pub out: PathBuf,
    #[arg(long, value_enum)]
    pub kind: PlotKind,
    /// Row of the results file to draw (cfb-curves).
    #[arg(long, default_value_t = 0)]
    pub run: usize,
    /// Study configuration that produced the results (cfb-curves).
    #[arg(long)]
    pub config: Option<PathBuf>,
}

/// Parses and runs a command line, returning the process exit code.
pub fn run<I, T>(args: I, stdout: &mut dyn Write, stderr: &mut dyn Write) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<std::ffi::OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { EXIT_USAGE } else { EXIT_OK };
            if code == EXIT_OK {
                let _ = write!(stdout, "{e}");
            } else {
                let _ = write!(stderr, "{e}");
            }
            return code;
        }
    };
    let outcome = match cli.command {
        Command::Estimate(a) => cmd_estimate(&a, stdout),
        Command::Synth(a) => cmd_synth(&a, stdout),
        Command::Study(a) => cmd_study(&a, stderr),
        Command::Regress(a) => cmd_regress(&a, stdout, stderr),
        Command::Plot(a) => cmd_plot(&a),
    };
    match outcome {
        Ok(code) => code,
        Err(e) => {
            let _ = writeln!(stderr, "error: {e}");
            match e {
                Error::NonIdentifiable(_) => EXIT_NON_IDENTIFIABLE,
                _ => EXIT_INVALID,
            }
        }
    }
}

fn open(path: &Path) -> Result<BufReader<File>> {
    File::open(path)
        .map(BufReader::new)
        .map_err(|e| Error::domain(format!("cannot open {}: {e}", path.display())))
}

fn create(path: &Path) -> Result<BufWriter<File>> {
    File::create(path)
        .map(BufWriter::new)
        .map_err(|e| Error::domain(format!("cannot create {}: {e}", path.display())))
}

/// Parses "scale,shape".
pub fn parse_dist(s: &str) -> Result<WeibullCapacity> {
    let parts: Vec<&str> = s.split(',').map(str::trim).collect();
    let [scale, shape] = parts.as_slice() else {
        return Err(Error::domain(format!("expected \"scale,shape\", got '{s}'")));
    };
    let num = |v: &str| {
        v.parse::<f64>()
            .map_err(|_| Error::domain(format!("'{v}' is not a number")))
    };
    WeibullCapacity::new(num(scale)?, num(shape)?)
}

/// Parses "total=..,target=..[,min=..,max=..,step=..]".
pub fn parse_calibration(s: &str, dist: WeibullCapacity) -> Result<CalibrationSpec> {
    let mut spec = CalibrationSpec {
        dist,
        ..Default::default()
    };
    let (mut total, mut target) = (false, false);
    for item in s.split(',').map(str::trim).filter(|x| !x.is_empty()) {
        let (key, value) = item
            .split_once('=')
            .ok_or_else(|| Error::domain(format!("calibration item '{item}' is not key=value")))?;
        let v: f64 = value
            .trim()
            .parse()
            .map_err(|_| Error::domain(format!("calibration value '{value}' is not a number")))?;
        match key.trim() {
            "total" => (spec.total_records, total) = (v, true),
            "target" => (spec.target_expected_breakdowns, target) = (v, true),
            "min" => spec.level_min = v,
            "max" => spec.level_max = v,
            "step" => spec.level_step = v,
            other => return Err(Error::domain(format!("unknown calibration key '{other}'"))),
        }
    }
    if !(total && target) {
        return Err(Error::domain("calibration needs both total= and target="));
    }
    Ok(spec)
}

#[derive(Debug, Serialize)]
pub struct MetricsJson {
    pub cdf: MetricReport,
    pub cfb: MetricReport,
    pub cfb_empirical: MetricReport,
}

#[derive(Debug, Serialize)]
pub struct ResultJson {
    pub schema_version: u32,
    pub fitted: WeibullCapacity,
    pub log_likelihood: f64,
    pub converged: bool,
    pub iterations: usize,
    pub fixed_shape: Option<f64>,
    pub predicted_breakdowns: f64,
    pub recorded_breakdowns: u64,
    pub total_records: f64,
    pub metrics: Option<MetricsJson>,
}

pub fn cmd_estimate(args: &EstimateArgs, stdout: &mut dyn Write) -> Result<i32> {
    let table = read_profile_csv(open(&args.input)?)?;
    let histogram = table.histogram()?;
    let truth = args.truth.as_deref().map(parse_dist).transpose()?;
    let options = FitOptions {
        fixed_shape: args.fixed_shape,
        multistart_count: args.multistart,
        seed: args.seed,
        ..Default::default()
    };
    let EstimateResult {
        fitted,
        log_likelihood,
        converged,
        iterations,
        fixed_shape,
    } = fit(&histogram, &options)?;

    let metrics = match truth {
        Some(t) => {
            let profile = table.profile()?;
            let b = histogram.breakdowns();
            Some(MetricsJson {
                cdf: MetricReport::of(&curve_pair_for_cdf(&fitted, &t, &profile)?),
                cfb: MetricReport::of(&curve_pair_for_cfb(&fitted, &t, &profile, b, CfbFlavor::Theoretical)?),
                cfb_empirical: MetricReport::of(&curve_pair_for_cfb(&fitted, &t, &profile, b, CfbFlavor::Empirical)?),
            })
        }
        None => None,
    };
    let out = ResultJson {
        schema_version: SCHEMA_VERSION,
        fitted,
        log_likelihood,
        converged,
        iterations,
        fixed_shape,
        predicted_breakdowns: predicted_breakdowns(&histogram, &fitted),
        recorded_breakdowns: histogram.total_breakdowns(),
        total_records: histogram.total_records(),
        metrics,
    };
    serde_json::to_writer_pretty(&mut *stdout, &out)?;
    writeln!(stdout)?;
    Ok(if converged { EXIT_OK } else { EXIT_NON_CONVERGED })
}

pub fn cmd_synth(args: &SynthArgs, stdout: &mut dyn Write) -> Result<i32> {
    let dist = parse_dist(&args.dist)?;
    let mut profile = match (&args.profile, &args.calibrate) {
        (Some(path), _) => read_profile_csv(open(path)?)?.profile()?,
        (None, Some(spec)) => calibrate_base_profile(&parse_calibration(spec, dist)?)?.profile,
        (None, None) => return Err(Error::domain("either --profile or --calibrate is required")),
    };
    if let Some(target) = args.target_breakdowns {
        profile = rescale_profile(&profile, &dist, target)?;
    }
    let dataset = generate_dataset(&profile, &dist, args.seed)?;
    let table = ProfileTable::from_dataset(&dataset);
    match &args.out {
        Some(path) => write_profile_csv(create(path)?, &table)?,
        None => write_profile_csv(&mut *stdout, &table)?,
    }
    Ok(EXIT_OK)
}

#[derive(Debug, Serialize)]
pub struct SummaryJson<'a> {
    pub schema_version: u32,
    pub config: &'a StudyConfig,
    pub summary: StudySummary,
    pub cells: &'a [CellSummary],
}

pub fn load_config(path: Option<&Path>) -> Result<StudyConfig> {
    let config: StudyConfig = match path {
        Some(p) => serde_json::from_reader(open(p)?).map_err(|e| Error::Config {
            field: "config".into(),
            message: e.to_string(),
        })?,
        None => StudyConfig::default(),
    };
    config.validate()?;
    Ok(config)
}

pub fn cmd_study(args: &StudyArgs, stderr: &mut dyn Write) -> Result<i32> {
    let config = load_config(args.config.as_deref())?;
    let results = run_study(&config, args.jobs)?;
    write_results_csv(create(&args.out)?, &results.runs)?;
    let summary = summarize(&results);
    writeln!(
        stderr,
        "{} runs, {} non-identifiable, {} not converged, {} fits off calibration by >0.5%",
        summary.runs, summary.non_identifiable_runs, summary.non_converged_runs, summary.calibration_warnings
    )?;
    if let Some(path) = &args.summary {
        let doc = SummaryJson {
            schema_version: SCHEMA_VERSION,
            config: &config,
            summary,
            cells: &results.cells,
        };
        let mut w = create(path)?;
        serde_json::to_writer_pretty(&mut w, &doc)?;
        writeln!(w)?;
    }
    Ok(EXIT_OK)
}

#[derive(Debug, Serialize)]
struct ModelEntry {
    variables: Vec<Variable>,
    status: &'static str,
    #[serde(skip_serializing_if = "Option::is_none")]
    model: Option<crate::regression::FittedModel>,
    #[serde(skip_serializing_if = "Vec::is_empty")]
    insignificant: Vec<Variable>,
    #[serde(skip_serializing_if = "Option::is_none")]
    error: Option<String>,
}

#[derive(Debug, Serialize)]
struct RegressJson {
    schema_version: u32,
    response: Response,
    observations: usize,
    excluded_non_identifiable: usize,
    models: Vec<ModelEntry>,
    /// Labels of models passing the significance rule, best R² first.
    ranking: Vec<String>,
}

pub fn cmd_regress(args: &RegressArgs, stdout: &mut dyn Write, stderr: &mut dyn Write) -> Result<i32> {
    let runs = read_results_csv(open(&args.results)?)?;
    let response: Response = args.response.into();
    let observations = to_regression_observations(&runs, response);
    let candidates = parse_model_list(&args.models)?;
    let screening = screen_models(&observations, &candidates);

    let mut models = Vec::new();
    for m in &screening.ranked {
        models.push(ModelEntry {
            variables: m.regressors.clone(),
            status: "ranked",
            model: Some(m.clone()),
            insignificant: vec![],
            error: None,
        });
    }
    for f in &screening.flagged {
        models.push(ModelEntry {
            variables: f.model.regressors.clone(),
            status: "flagged",
            model: Some(f.model.clone()),
            insignificant: f.insignificant.clone(),
            error: None,
        });
    }
    for f in &screening.failed {
        models.push(ModelEntry {
            variables: f.variables.clone(),
            status: "failed",
            model: None,
            insignificant: vec![],
            error: Some(f.error.clone()),
        });
    }
    let doc = RegressJson {
        schema_version: SCHEMA_VERSION,
        response,
        observations: observations.len(),
        excluded_non_identifiable: runs.len() - observations.len(),
        ranking: screening.ranked.iter().map(|m| m.label()).collect(),
        models,
    };
    serde_json::to_writer_pretty(&mut *stdout, &doc)?;
    writeln!(stdout)?;

    writeln!(
        stderr,
        "{:<4} {:<16} {:>8} {:>8}  coefficients (p-value)",
        "rank", "model", "R2", "n"
    )?;
    let rows = screening.ranked.iter().map(|m| (m, "", vec![])).chain(
        screening
            .flagged
            .iter()
            .map(|f| (&f.model, "flag", f.insignificant.clone())),
    );
    let mut rank = 0;
    for (m, flag, bad) in rows {
        let label = if flag.is_empty() {
            rank += 1;
            rank.to_string()
        } else {
            "-".to_string()
        };
        let coefs: Vec<String> = m
            .variables
            .iter()
            .zip(m.coefficients.iter().zip(&m.p_values))
            .map(|(n, (c, p))| format!("{n}={c:.5} ({p:.3e})"))
            .collect();
        write!(
            stderr,
            "{label:<4} {:<16} {:>8.4} {:>8}  {}",
            m.label(),
            m.r_squared,
            m.n,
            coefs.join(" ")
        )?;
        if !bad.is_empty() {
            let names: Vec<&str> = bad.iter().map(|v| v.name()).collect();
            write!(stderr, "  [p >= 0.05: {}]", names.join(","))?;
        }
        writeln!(stderr)?;
    }
    for f in &screening.failed {
        let names: Vec<&str> = f.variables.iter().map(|v| v.name()).collect();
        writeln!(stderr, "fail {:<16} {}", names.join(","), f.error)?;
    }
    Ok(if screening.ranked.is_empty() && screening.flagged.is_empty() {
        EXIT_INVALID
    } else {
        EXIT_OK
    })
}

/// Companion CSV path: the SVG path with a `.csv` extension.
pub fn companion_path(svg: &Path) -> PathBuf {
    svg.with_extension("csv")
}

pub fn cmd_plot(args: &PlotArgs) -> Result<i32> {
    let runs = read_results_csv(open(&args.results)?)?;
    if runs.is_empty() {
        return Err(Error::domain("no runs to plot"));
    }
    let companion = companion_path(&args.out);
    let chart = match args.kind {
        PlotKind::AwreVsBreakdowns => {
            let observations = to_regression_observations(&runs, Response::CdfAwre);
            if observations.is_empty() {
                return Err(Error::domain("no runs to plot"));
            }
            let model = fit_model(&observations, &[Variable::LnBreakdowns])?;
            let (a, b) = (model.coefficients[0], model.coefficients[1]);
            let mut w = csv::Writer::from_writer(create(&companion)?);
            w.write_record(["recorded_breakdowns", "cdf_awre", "fitted_awre"])?;
            let mut points = Vec::with_capacity(observations.len());
            for o in &observations {
                let x = o.recorded_breakdowns as f64;
                let curve = a + b * x.ln();
                w.write_record([
                    o.recorded_breakdowns.to_string(),
                    o.response.to_string(),
                    curve.to_string(),
                ])?;
                points.push((x, o.response));
            }
            w.flush()?;
            let mut xs: Vec<f64> = points.iter().map(|p| p.0).collect();
            xs.sort_by(f64::total_cmp);
            xs.dedup();
            Chart {
                title: "Capacity CDF AWRE vs recorded breakdowns".into(),
                x_label: "recorded breakdowns".into(),
                y_label: "AWRE (capacity CDF)".into(),
                series: vec![
                    Series {
                        name: "runs".into(),
                        points,
                        style: SeriesStyle::Markers,
                        color: "#1f77b4",
                    },
                    Series {
                        name: format!("{a:.4} {b:+.5}·ln B"),
                        points: xs.iter().map(|&x| (x, a + b * x.ln())).collect(),
                        style: SeriesStyle::Line,
                        color: "#d62728",
                    },
                ],
            }
        }
        PlotKind::CfbCurves => {
            let row = runs.get(args.run).ok_or_else(|| {
                Error::domain(format!(
                    "results have {} rows; --run {} is out of range",
                    runs.len(),
                    args.run
                ))
            })?;
            let fitted = row
                .fitted()
                .ok_or_else(|| Error::domain(format!("run {} is not identifiable; nothing was fitted", args.run)))?;
            let config = load_config(args.config.as_deref())?;
            let profiles = cell_profiles(&config)?;
            let profile = profiles
                .get(row.dist_index)
                .and_then(|p| p.get(row.size_index))
                .ok_or_else(|| Error::domain("results row does not match the study configuration"))?;
            if ((profile.total_records() - row.total_records) / row.total_records).abs() > 1e-9 {
                return Err(Error::domain("results row does not match the study configuration"));
            }
            let truth = row.truth()?;
            let dataset = generate_dataset(profile, &truth, row.seed)?;
            let theoretical = cumulative_frequency(&expected_breakdowns(profile, &truth));
            let empirical = dataset.empirical_cfb().cumulative;
            let estimated = cumulative_frequency(&expected_breakdowns(profile, &fitted));
            let x: Vec<f64> = profile.levels().iter().map(|l| l.value()).collect();

            let mut w = csv::Writer::from_writer(create(&companion)?);
            w.write_record(["intensity", "theoretical", "empirical", "estimated"])?;
            for j in 0..x.len() {
                w.write_record([
                    x[j].to_string(),
                    theoretical[j].to_string(),
                    empirical[j].to_string(),
                    estimated[j].to_string(),
                ])?;
            }
            w.flush()?;
            let line = |name: &str, ys: &[f64], color: &'static str| Series {
                name: name.into(),
                points: x.iter().copied().zip(ys.iter().copied()).collect(),
                style: SeriesStyle::Line,
                color,
            };
            Chart {
                title: format!(
                    "CF_B, run {} (W({}, {}), {} breakdowns)",
                    args.run, row.true_scale, row.true_shape, row.recorded_breakdowns
                ),
                x_label: "traffic-flow intensity".into(),
                y_label: "cumulative breakdowns".into(),
                series: vec![
                    line("theoretical", &theoretical, "#2ca02c"),
                    line("empirical", &empirical, "#1f77b4"),
                    line("estimated", &estimated, "#d62728"),
                ],
            }
        }
    };
    let mut w = create(&args.out)?;
    w.write_all(chart.to_svg().as_bytes())?;
    w.flush()?;
    Ok(EXIT_OK)
}
