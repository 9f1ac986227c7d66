//! Monte Carlo reliability study.
//!
//! For every capacity distribution and every target sample size the base
//! demand profile is rescaled so the expected breakdown count hits the
//! target; each replication then draws a pseudo-empirical dataset, fits it
//! and scores the fit against the known truth.

use std::collections::BTreeMap;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::capacity::WeibullCapacity;
use crate::error::{Error, Result};
use crate::metrics::{curve_pair_for_cdf, curve_pair_for_cfb, MetricReport};
use crate::mle::{fit, predicted_breakdowns, FitOptions};
use crate::regression::RegressionObservation;
use crate::synthetic::{
    calibrate_base_profile, generate_dataset, rescale_profile, total_expected_breakdowns, CalibrationSpec, CfbFlavor,
    IntensityProfile,
};

pub const SCHEMA_VERSION: u32 = 1;

/// Relative predicted-vs-recorded gap above which a fit is counted as poorly calibrated.
pub const CALIBRATION_WARN: f64 = 0.005;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DistributionSpec {
    pub scale: f64,
    pub shape: f64,
    /// Multiplier applied to the base profile's records before exact rescaling.
    pub profile_scale: f64,
}

impl DistributionSpec {
    pub fn capacity(&self) -> Result<WeibullCapacity> {
        WeibullCapacity::new(self.scale, self.shape)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct StudyConfig {
    pub distributions: Vec<DistributionSpec>,
    pub target_breakdowns: Vec<f64>,
    pub replications: usize,
    pub master_seed: u64,
    pub estimator: FitOptions,
    pub base_profile: CalibrationSpec,
}

impl Default for StudyConfig {
    fn default() -> Self {
        Self {
            distributions: vec![
                DistributionSpec {
                    scale: 150.0,
                    shape: 6.5,
                    profile_scale: 1.0,
                },
                DistributionSpec {
                    scale: 160.0,
                    shape: 7.0,
                    profile_scale: 2.0,
                },
                DistributionSpec {
                    scale: 183.0,
                    shape: 7.5,
                    profile_scale: 8.0,
                },
            ],
            target_breakdowns: vec![13.0, 26.0, 52.0, 78.0, 104.0, 156.0, 208.0, 260.0],
            replications: 15,
            master_seed: 20_260_218,
            estimator: FitOptions::default(),
            base_profile: CalibrationSpec::default(),
        }
    }
}

fn config_err(field: &str, message: impl Into<String>) -> Error {
    Error::Config {
        field: field.to_string(),
        message: message.into(),
    }
}

impl StudyConfig {
    pub fn validate(&self) -> Result<()> {
        if self.distributions.is_empty() {
            return Err(config_err("distributions", "at least one distribution is required"));
        }
        for (i, d) in self.distributions.iter().enumerate() {
            d.capacity()
                .map_err(|e| config_err(&format!("distributions[{i}]"), e.to_string()))?;
            if !(d.profile_scale > 0.0 && d.profile_scale.is_finite()) {
                return Err(config_err(&format!("distributions[{i}].profile_scale"), "must be > 0"));
            }
        }
        if self.target_breakdowns.is_empty() {
            return Err(config_err("target_breakdowns", "at least one target is required"));
        }
        if self.target_breakdowns.iter().any(|t| !(*t > 0.0 && t.is_finite())) {
            return Err(config_err("target_breakdowns", "targets must be positive"));
        }
        if self.target_breakdowns.windows(2).any(|w| w[1] <= w[0]) {
            return Err(config_err("target_breakdowns", "targets must be strictly ascending"));
        }
        if self.replications == 0 {
            return Err(config_err("replications", "must be >= 1"));
        }
        if self.estimator.multistart_count == 0 {
            return Err(config_err("estimator.multistart_count", "must be >= 1"));
        }
        Ok(())
    }

    pub fn total_runs(&self) -> usize {
        self.distributions.len() * self.target_breakdowns.len() * self.replications
    }
}

fn splitmix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Stable seed for one run, independent of execution order.
pub fn run_seed(master_seed: u64, dist: usize, size: usize, rep: usize) -> u64 {
    [dist as u64, size as u64, rep as u64]
        .into_iter()
        .fold(splitmix64(master_seed), |h, k| splitmix64(h ^ splitmix64(k)))
}

/// One fitted replication. Fit-dependent fields are empty for
/// non-identifiable runs.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunRecord {
    pub schema_version: u32,
    pub dist_index: usize,
    pub true_scale: f64,
    pub true_shape: f64,
    pub size_index: usize,
    pub target_breakdowns: f64,
    pub replication: usize,
    pub seed: u64,
    pub total_records: f64,
    pub theoretical_breakdowns: f64,
    pub recorded_breakdowns: u64,
    pub clamped_levels: usize,
    pub identifiable: bool,
    pub converged: bool,
    pub fitted_scale: Option<f64>,
    pub fitted_shape: Option<f64>,
    pub log_likelihood: Option<f64>,
    pub predicted_breakdowns: Option<f64>,
    pub iterations: Option<usize>,
    pub cdf_rmse: Option<f64>,
    pub cdf_are: Option<f64>,
    pub cdf_awre: Option<f64>,
    pub cfb_rmse: Option<f64>,
    pub cfb_are: Option<f64>,
    pub cfb_awre: Option<f64>,
    pub cfb_emp_rmse: Option<f64>,
    pub cfb_emp_are: Option<f64>,
    pub cfb_emp_awre: Option<f64>,
}

impl RunRecord {
    pub fn fitted(&self) -> Option<WeibullCapacity> {
        WeibullCapacity::new(self.fitted_scale?, self.fitted_shape?).ok()
    }

    pub fn truth(&self) -> Result<WeibullCapacity> {
        WeibullCapacity::new(self.true_scale, self.true_shape)
    }

    /// Named numeric fields available for cell summaries.
    pub fn numeric_fields(&self) -> [(&'static str, Option<f64>); 15] {
        [
            ("recorded_breakdowns", Some(self.recorded_breakdowns as f64)),
            ("fitted_scale", self.fitted_scale),
            ("fitted_shape", self.fitted_shape),
            ("predicted_breakdowns", self.predicted_breakdowns),
            ("log_likelihood", self.log_likelihood),
            ("cdf_rmse", self.cdf_rmse),
            ("cdf_are", self.cdf_are),
            ("cdf_awre", self.cdf_awre),
            ("cfb_rmse", self.cfb_rmse),
            ("cfb_are", self.cfb_are),
            ("cfb_awre", self.cfb_awre),
            ("cfb_emp_rmse", self.cfb_emp_rmse),
            ("cfb_emp_are", self.cfb_emp_are),
            ("cfb_emp_awre", self.cfb_emp_awre),
            ("iterations", self.iterations.map(|i| i as f64)),
        ]
    }
}

/// Empirical summary of one quantity over a cell's replications.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Stat {
    pub count: usize,
    pub mean: f64,
    pub sd: f64,
    pub min: f64,
    pub q1: f64,
    pub median: f64,
    pub q3: f64,
    pub max: f64,
}

/// Linear-interpolation quantile of sorted data.
fn quantile_sorted(sorted: &[f64], q: f64) -> f64 {
    let h = (sorted.len() - 1) as f64 * q;
    let lo = h.floor() as usize;
    let hi = h.ceil() as usize;
    sorted[lo] + (h - lo as f64) * (sorted[hi] - sorted[lo])
}

impl Stat {
    pub fn of(values: &[f64]) -> Option<Self> {
        if values.is_empty() {
            return None;
        }
        let n = values.len() as f64;
        let mean = values.iter().sum::<f64>() / n;
        let sd = if values.len() > 1 {
            (values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1.0)).sqrt()
        } else {
            0.0
        };
        let mut sorted = values.to_vec();
        sorted.sort_by(f64::total_cmp);
        Some(Self {
            count: values.len(),
            mean,
            sd,
            min: sorted[0],
            q1: quantile_sorted(&sorted, 0.25),
            median: quantile_sorted(&sorted, 0.5),
            q3: quantile_sorted(&sorted, 0.75),
            max: sorted[sorted.len() - 1],
        })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CellSummary {
    pub dist_index: usize,
    pub size_index: usize,
    pub target_breakdowns: f64,
    pub total_records: f64,
    pub theoretical_breakdowns: f64,
    pub runs: usize,
    pub identifiable_runs: usize,
    pub stats: BTreeMap<String, Stat>,
}

impl CellSummary {
    fn of(runs: &[RunRecord]) -> Self {
        let first = &runs[0];
        let mut stats = BTreeMap::new();
        for (k, (name, _)) in first.numeric_fields().iter().enumerate() {
            let values: Vec<f64> = runs.iter().filter_map(|r| r.numeric_fields()[k].1).collect();
            if let Some(s) = Stat::of(&values) {
                stats.insert(name.to_string(), s);
            }
        }
        Self {
            dist_index: first.dist_index,
            size_index: first.size_index,
            target_breakdowns: first.target_breakdowns,
            total_records: first.total_records,
            theoretical_breakdowns: first.theoretical_breakdowns,
            runs: runs.len(),
            identifiable_runs: runs.iter().filter(|r| r.identifiable).count(),
            stats,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct StudyResults {
    pub runs: Vec<RunRecord>,
    pub cells: Vec<CellSummary>,
}

impl StudyResults {
    pub fn from_runs(runs: Vec<RunRecord>) -> Self {
        let mut cells = Vec::new();
        let mut start = 0;
        while start < runs.len() {
            let key = (runs[start].dist_index, runs[start].size_index);
            let end = start
                + runs[start..]
                    .iter()
                    .take_while(|r| (r.dist_index, r.size_index) == key)
                    .count();
            cells.push(CellSummary::of(&runs[start..end]));
            start = end;
        }
        Self { runs, cells }
    }
}

/// Profile for every (distribution, target) cell, indexed `[dist][size]`.
pub fn cell_profiles(config: &StudyConfig) -> Result<Vec<Vec<IntensityProfile>>> {
    let base = calibrate_base_profile(&config.base_profile)
        .map_err(|e| config_err("base_profile", e.to_string()))?
        .profile;
    config
        .distributions
        .iter()
        .map(|d| {
            let dist = d.capacity()?;
            let scaled = base.scaled(d.profile_scale)?;
            config
                .target_breakdowns
                .iter()
                .map(|&t| rescale_profile(&scaled, &dist, t))
                .collect()
        })
        .collect()
}

/// Generates, fits and scores one replication.
pub fn run_one(
    config: &StudyConfig,
    profile: &IntensityProfile,
    dist_index: usize,
    size_index: usize,
    replication: usize,
) -> Result<RunRecord> {
    let spec = config.distributions[dist_index];
    let truth = spec.capacity()?;
    let seed = run_seed(config.master_seed, dist_index, size_index, replication);
    let dataset = generate_dataset(profile, &truth, seed)?;
    let mut record = RunRecord {
        schema_version: SCHEMA_VERSION,
        dist_index,
        true_scale: spec.scale,
        true_shape: spec.shape,
        size_index,
        target_breakdowns: config.target_breakdowns[size_index],
        replication,
        seed,
        total_records: profile.total_records(),
        theoretical_breakdowns: total_expected_breakdowns(profile, &truth),
        recorded_breakdowns: dataset.total_breakdowns(),
        clamped_levels: dataset.clamped_levels,
        identifiable: false,
        converged: false,
        fitted_scale: None,
        fitted_shape: None,
        log_likelihood: None,
        predicted_breakdowns: None,
        iterations: None,
        cdf_rmse: None,
        cdf_are: None,
        cdf_awre: None,
        cfb_rmse: None,
        cfb_are: None,
        cfb_awre: None,
        cfb_emp_rmse: None,
        cfb_emp_are: None,
        cfb_emp_awre: None,
    };

    let histogram = dataset.histogram();
    let options = FitOptions {
        seed: splitmix64(seed),
        ..config.estimator
    };
    let estimate = match fit(&histogram, &options) {
        Ok(e) => e,
        Err(Error::NonIdentifiable(_)) => return Ok(record),
        Err(e) => return Err(e),
    };
    let fitted = estimate.fitted;
    let cdf = MetricReport::of(&curve_pair_for_cdf(&fitted, &truth, profile)?);
    let cfb = MetricReport::of(&curve_pair_for_cfb(
        &fitted,
        &truth,
        profile,
        &dataset.breakdowns,
        CfbFlavor::Theoretical,
    )?);
    let emp = MetricReport::of(&curve_pair_for_cfb(
        &fitted,
        &truth,
        profile,
        &dataset.breakdowns,
        CfbFlavor::Empirical,
    )?);

    record.identifiable = true;
    record.converged = estimate.converged;
    record.fitted_scale = Some(fitted.scale());
    record.fitted_shape = Some(fitted.shape());
    record.log_likelihood = Some(estimate.log_likelihood);
    record.predicted_breakdowns = Some(predicted_breakdowns(&histogram, &fitted));
    record.iterations = Some(estimate.iterations);
    (record.cdf_rmse, record.cdf_are, record.cdf_awre) = (Some(cdf.rmse), Some(cdf.are), Some(cdf.awre));
    (record.cfb_rmse, record.cfb_are, record.cfb_awre) = (Some(cfb.rmse), Some(cfb.are), Some(cfb.awre));
    (record.cfb_emp_rmse, record.cfb_emp_are, record.cfb_emp_awre) = (Some(emp.rmse), Some(emp.are), Some(emp.awre));
    Ok(record)
}

/// Runs the full study on `jobs` worker threads (0 = rayon's default).
/// Results are ordered by (distribution, size, replication) regardless of `jobs`.
pub fn run_study(config: &StudyConfig, jobs: usize) -> Result<StudyResults> {
    config.validate()?;
    let profiles = cell_profiles(config)?;
    let items: Vec<(usize, usize, usize)> = (0..config.distributions.len())
        .flat_map(|d| {
            (0..config.target_breakdowns.len()).flat_map(move |s| (0..config.replications).map(move |r| (d, s, r)))
        })
        .collect();

    let work = || -> Result<Vec<RunRecord>> {
        items
            .par_iter()
            .map(|&(d, s, r)| {
                run_one(config, &profiles[d][s], d, s, r).map_err(|e| Error::Run {
                    dist: d,
                    size: s,
                    rep: r,
                    message: e.to_string(),
                })
            })
            .collect()
    };
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(jobs)
        .build()
        .map_err(|e| config_err("jobs", e.to_string()))?;
    let runs = pool.install(work)?;
    Ok(StudyResults::from_runs(runs))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Response {
    #[serde(rename = "cdf-awre")]
    CdfAwre,
    #[serde(rename = "cfb-awre")]
    CfbAwre,
}

impl std::str::FromStr for Response {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "cdf-awre" => Ok(Response::CdfAwre),
            "cfb-awre" => Ok(Response::CfbAwre),
            other => Err(Error::domain(format!(
                "unknown response '{other}' (cdf-awre | cfb-awre)"
            ))),
        }
    }
}

/// One regression observation per identifiable run.
pub fn to_regression_observations(runs: &[RunRecord], response: Response) -> Vec<RegressionObservation> {
    runs.iter()
        .filter(|r| r.identifiable)
        .filter_map(|r| {
            let y = match response {
                Response::CdfAwre => r.cdf_awre,
                Response::CfbAwre => r.cfb_awre,
            }?;
            Some(RegressionObservation {
                total_records: r.total_records,
                recorded_breakdowns: r.recorded_breakdowns,
                response: y,
            })
        })
        .collect()
}

/// Average ranks (ties share the mean rank).
fn ranks(values: &[f64]) -> Vec<f64> {
    let mut idx: Vec<usize> = (0..values.len()).collect();
    idx.sort_by(|&a, &b| values[a].total_cmp(&values[b]));
    let mut out = vec![0.0; values.len()];
    let mut i = 0;
    while i < idx.len() {
        let mut j = i;
        while j + 1 < idx.len() && values[idx[j + 1]] == values[idx[i]] {
            j += 1;
        }
        let rank = 0.5 * (i + j) as f64 + 1.0;
        for &k in &idx[i..=j] {
            out[k] = rank;
        }
        i = j + 1;
    }
    out
}

pub fn pearson(x: &[f64], y: &[f64]) -> f64 {
    let n = x.len() as f64;
    let mx = x.iter().sum::<f64>() / n;
    let my = y.iter().sum::<f64>() / n;
    let (mut sxy, mut sxx, mut syy) = (0.0, 0.0, 0.0);
    for (a, b) in x.iter().zip(y) {
        sxy += (a - mx) * (b - my);
        sxx += (a - mx).powi(2);
        syy += (b - my).powi(2);
    }
    if sxx == 0.0 || syy == 0.0 {
        return 0.0;
    }
    sxy / (sxx * syy).sqrt()
}

pub fn spearman(x: &[f64], y: &[f64]) -> f64 {
    pearson(&ranks(x), &ranks(y))
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ScatterPoint {
    pub recorded_breakdowns: u64,
    pub cdf_awre: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CellTrend {
    pub dist_index: usize,
    pub size_index: usize,
    pub target_breakdowns: f64,
    pub mean_recorded_breakdowns: f64,
    pub cdf_awre: Stat,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StudySummary {
    pub schema_version: u32,
    pub runs: usize,
    pub non_identifiable_runs: usize,
    pub non_converged_runs: usize,
    pub clamped_levels: usize,
    /// Fits whose predicted breakdowns miss the recorded count by more than 0.5%.
    pub calibration_warnings: usize,
    /// Spearman correlation between ln(recorded breakdowns) and CDF AWRE.
    pub spearman_ln_breakdowns_vs_awre: f64,
    /// Pearson correlation between CF_B AWRE and CDF AWRE.
    pub pearson_cfb_vs_cdf_awre: f64,
    pub points: Vec<ScatterPoint>,
    pub cell_trend: Vec<CellTrend>,
}

pub fn summarize(results: &StudyResults) -> StudySummary {
    let fitted: Vec<&RunRecord> = results.runs.iter().filter(|r| r.identifiable).collect();
    let points: Vec<ScatterPoint> = fitted
        .iter()
        .filter_map(|r| {
            Some(ScatterPoint {
                recorded_breakdowns: r.recorded_breakdowns,
                cdf_awre: r.cdf_awre?,
            })
        })
        .collect();
    let ln_b: Vec<f64> = points.iter().map(|p| (p.recorded_breakdowns as f64).ln()).collect();
    let awre: Vec<f64> = points.iter().map(|p| p.cdf_awre).collect();
    let cfb: Vec<f64> = fitted.iter().filter_map(|r| r.cfb_awre).collect();
    let calibration_warnings = fitted
        .iter()
        .filter(|r| {
            let b = r.recorded_breakdowns as f64;
            r.predicted_breakdowns
                .is_some_and(|p| (p - b).abs() / b > CALIBRATION_WARN)
        })
        .count();
    let cell_trend = results
        .cells
        .iter()
        .filter_map(|c| {
            Some(CellTrend {
                dist_index: c.dist_index,
                size_index: c.size_index,
                target_breakdowns: c.target_breakdowns,
                mean_recorded_breakdowns: c.stats.get("recorded_breakdowns")?.mean,
                cdf_awre: *c.stats.get("cdf_awre")?,
            })
        })
        .collect();
    StudySummary {
        schema_version: SCHEMA_VERSION,
        runs: results.runs.len(),
        non_identifiable_runs: results.runs.len() - fitted.len(),
        non_converged_runs: fitted.iter().filter(|r| !r.converged).count(),
        clamped_levels: results.runs.iter().map(|r| r.clamped_levels).sum(),
        calibration_warnings,
        spearman_ln_breakdowns_vs_awre: if points.len() > 1 { spearman(&ln_b, &awre) } else { 0.0 },
        pearson_cfb_vs_cdf_awre: if cfb.len() > 1 && cfb.len() == awre.len() {
            pearson(&cfb, &awre)
        } else {
            0.0
        },
        points,
        cell_trend,
    }
}

/// Mean CDF AWRE over all identifiable runs with the given target, pooled
/// across distributions.
pub fn mean_cdf_awre_at_target(results: &StudyResults, target: f64) -> Option<f64> {
    let v: Vec<f64> = results
        .runs
        .iter()
        .filter(|r| r.target_breakdowns == target)
        .filter_map(|r| r.cdf_awre)
        .collect();
    (!v.is_empty()).then(|| v.iter().sum::<f64>() / v.len() as f64)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn tiny() -> StudyConfig {
        StudyConfig {
            distributions: vec![DistributionSpec {
                scale: 150.0,
                shape: 6.5,
                profile_scale: 1.0,
            }],
            target_breakdowns: vec![52.0],
            replications: 1,
            ..Default::default()
        }
    }

    #[test]
    fn default_config_shape() {
        let c = StudyConfig::default();
        c.validate().unwrap();
        assert_eq!(c.total_runs(), 360);
    }

    #[test]
    fn validation_names_fields() {
        let mut c = tiny();
        c.replications = 0;
        assert!(c.validate().unwrap_err().to_string().contains("replications"));
        let mut c = tiny();
        c.target_breakdowns = vec![26.0, 13.0];
        assert!(c.validate().unwrap_err().to_string().contains("target_breakdowns"));
        let mut c = tiny();
        c.distributions[0].shape = -1.0;
        assert!(c.validate().unwrap_err().to_string().contains("distributions[0]"));
        let mut c = tiny();
        c.distributions.clear();
        assert!(c.validate().is_err());
    }

    #[test]
    fn config_json_defaults_and_unknown_fields() {
        let c: StudyConfig = serde_json::from_str("{}").unwrap();
        assert_eq!(c, StudyConfig::default());
        let c: StudyConfig = serde_json::from_str(r#"{"replications": 3}"#).unwrap();
        assert_eq!(c.replications, 3);
        assert!(serde_json::from_str::<StudyConfig>(r#"{"replicates": 3}"#).is_err());
    }

    #[test]
    fn seeds_are_distinct_and_stable() {
        let mut seen = std::collections::HashSet::new();
        for d in 0..3 {
            for s in 0..8 {
                for r in 0..15 {
                    assert!(seen.insert(run_seed(7, d, s, r)));
                }
            }
        }
        assert_eq!(run_seed(7, 1, 2, 3), run_seed(7, 1, 2, 3));
        assert_ne!(run_seed(7, 1, 2, 3), run_seed(8, 1, 2, 3));
    }

    #[test]
    fn single_run_study() {
        let res = run_study(&tiny(), 1).unwrap();
        assert_eq!(res.runs.len(), 1);
        assert_eq!(res.cells.len(), 1);
        let r = &res.runs[0];
        assert!((r.theoretical_breakdowns - 52.0).abs() < 1e-9);
        assert!(r.identifiable && r.converged);
        assert!(r.cdf_awre.unwrap() >= 0.0);
    }

    #[test]
    fn run_order_does_not_matter() {
        let mut c = tiny();
        c.target_breakdowns = vec![13.0, 52.0];
        c.replications = 3;
        let res = run_study(&c, 2).unwrap();
        let profiles = cell_profiles(&c).unwrap();
        // run the last item first, in isolation
        let alone = run_one(&c, &profiles[0][1], 0, 1, 2).unwrap();
        assert_eq!(&alone, res.runs.last().unwrap());
    }

    #[test]
    fn zero_breakdown_runs_are_flagged_not_fatal() {
        let mut c = tiny();
        // expected 0.05 breakdowns: almost every replication draws none
        c.target_breakdowns = vec![0.05];
        c.replications = 10;
        let res = run_study(&c, 1).unwrap();
        assert_eq!(res.runs.len(), 10);
        let flagged = res.runs.iter().filter(|r| !r.identifiable).count();
        assert!(flagged > 0);
        for r in res.runs.iter().filter(|r| !r.identifiable) {
            assert_eq!(r.recorded_breakdowns, 0);
            assert!(r.fitted_scale.is_none() && r.cdf_awre.is_none());
        }
        assert_eq!(res.cells[0].identifiable_runs, 10 - flagged);
        assert_eq!(
            to_regression_observations(&res.runs, Response::CdfAwre).len(),
            10 - flagged
        );
        assert_eq!(summarize(&res).non_identifiable_runs, flagged);
    }

    #[test]
    fn stats_and_quartiles() {
        let s = Stat::of(&[1.0, 2.0, 3.0, 4.0]).unwrap();
        assert_eq!((s.min, s.q1, s.median, s.q3, s.max), (1.0, 1.75, 2.5, 3.25, 4.0));
        assert!((s.sd - (5.0f64 / 3.0).sqrt()).abs() < 1e-12);
        let z = Stat::of(&[0.3; 5]).unwrap();
        assert_eq!((z.sd, z.min, z.max), (0.0, 0.3, 0.3));
        assert!(Stat::of(&[]).is_none());
    }

    #[test]
    fn rank_correlations() {
        assert!((spearman(&[1.0, 2.0, 3.0], &[10.0, 20.0, 1000.0]) - 1.0).abs() < 1e-12);
        assert!((spearman(&[1.0, 2.0, 3.0], &[3.0, 2.0, 1.0]) + 1.0).abs() < 1e-12);
        assert_eq!(ranks(&[5.0, 1.0, 5.0]), vec![2.5, 1.0, 2.5]);
        assert_eq!(pearson(&[1.0, 1.0], &[1.0, 2.0]), 0.0);
    }

    #[test]
    fn empty_runs_give_no_observations() {
        assert!(to_regression_observations(&[], Response::CfbAwre).is_empty());
        let empty = StudyResults::from_runs(vec![]);
        assert!(empty.cells.is_empty());
    }
}
