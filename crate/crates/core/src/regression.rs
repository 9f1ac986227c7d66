//! Ordinary least squares models of estimation error against dataset size.
//!
//! Candidate regressors, computed per run from the total record weight
//! `x1 = sum r_j` and the recorded breakdowns `x2 = CF_B(I_max)`:
//!
//! | name | value        |
//! |------|--------------|
//! | x1   | sum r_j      |
//! | x2   | CF_B(I_max)  |
//! | x3   | x1 / x2      |
//! | x4   | ln x1        |
//! | x5   | ln x2        |
//! | x6   | ln x3        |
//!
//! The design always carries an intercept. Least squares is solved through a
//! Householder QR factorisation; t-tests use the regularised incomplete beta
//! function.

use std::fmt;
use std::str::FromStr;

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};
use statrs::distribution::{ContinuousCDF, StudentsT};
use statrs::function::beta::beta_reg;

use crate::error::{Error, Result};

/// Relative size of a QR pivot below which a column counts as collinear.
const RANK_TOLERANCE: f64 = 1e-10;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum Variable {
    #[serde(rename = "x1")]
    TotalRecords,
    #[serde(rename = "x2")]
    Breakdowns,
    #[serde(rename = "x3")]
    RecordsPerBreakdown,
    #[serde(rename = "x4")]
    LnTotalRecords,
    #[serde(rename = "x5")]
    LnBreakdowns,
    #[serde(rename = "x6")]
    LnRecordsPerBreakdown,
}

impl Variable {
    pub const ALL: [Variable; 6] = [
        Variable::TotalRecords,
        Variable::Breakdowns,
        Variable::RecordsPerBreakdown,
        Variable::LnTotalRecords,
        Variable::LnBreakdowns,
        Variable::LnRecordsPerBreakdown,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Variable::TotalRecords => "x1",
            Variable::Breakdowns => "x2",
            Variable::RecordsPerBreakdown => "x3",
            Variable::LnTotalRecords => "x4",
            Variable::LnBreakdowns => "x5",
            Variable::LnRecordsPerBreakdown => "x6",
        }
    }

    fn needs_breakdowns(self) -> bool {
        matches!(
            self,
            Variable::RecordsPerBreakdown | Variable::LnBreakdowns | Variable::LnRecordsPerBreakdown
        )
    }

    pub fn value(self, obs: &RegressionObservation) -> f64 {
        let x1 = obs.total_records;
        let x2 = obs.recorded_breakdowns as f64;
        match self {
            Variable::TotalRecords => x1,
            Variable::Breakdowns => x2,
            Variable::RecordsPerBreakdown => x1 / x2,
            Variable::LnTotalRecords => x1.ln(),
            Variable::LnBreakdowns => x2.ln(),
            Variable::LnRecordsPerBreakdown => (x1 / x2).ln(),
        }
    }
}

impl fmt::Display for Variable {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Variable {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        Variable::ALL
            .into_iter()
            .find(|v| v.name().eq_ignore_ascii_case(s.trim()))
            .ok_or_else(|| Error::domain(format!("unknown regressor '{s}' (expected x1..x6)")))
    }
}

/// Parses `"x5;x3,x4;x3,x4,x5"` into variable subsets. An empty string is the
/// intercept-only model.
pub fn parse_model_list(spec: &str) -> Result<Vec<Vec<Variable>>> {
    spec.split(';')
        .map(|model| {
            model
                .split(',')
                .map(str::trim)
                .filter(|s| !s.is_empty())
                .map(Variable::from_str)
                .collect()
        })
        .collect()
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RegressionObservation {
    pub total_records: f64,
    pub recorded_breakdowns: u64,
    pub response: f64,
}

#[derive(Debug, Clone)]
pub struct Design {
    pub variables: Vec<Variable>,
    /// Intercept column first, then `variables` in order.
    pub matrix: DMatrix<f64>,
    pub response: DVector<f64>,
    /// Indices of observations dropped because a requested regressor was undefined.
    pub rejected_rows: Vec<usize>,
}

impl Design {
    pub fn column_names(&self) -> Vec<String> {
        std::iter::once("intercept".to_string())
            .chain(self.variables.iter().map(|v| v.name().to_string()))
            .collect()
    }
}

pub fn build_design(observations: &[RegressionObservation], variables: &[Variable]) -> Result<Design> {
    let needs_b = variables.iter().any(|v| v.needs_breakdowns());
    let mut rows = Vec::new();
    let mut rejected_rows = Vec::new();
    for (i, obs) in observations.iter().enumerate() {
        if !(obs.total_records > 0.0 && obs.total_records.is_finite()) || !obs.response.is_finite() {
            return Err(Error::domain(format!("observation {i} has invalid totals or response")));
        }
        if needs_b && obs.recorded_breakdowns == 0 {
            rejected_rows.push(i);
        } else {
            rows.push(obs);
        }
    }
    let cols = variables.len() + 1;
    let matrix = DMatrix::from_fn(rows.len(), cols, |r, c| {
        if c == 0 {
            1.0
        } else {
            variables[c - 1].value(rows[r])
        }
    });
    let response = DVector::from_iterator(rows.len(), rows.iter().map(|o| o.response));
    Ok(Design {
        variables: variables.to_vec(),
        matrix,
        response,
        rejected_rows,
    })
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct FittedModel {
    /// Column names, `"intercept"` first.
    pub variables: Vec<String>,
    pub n: usize,
    pub df: usize,
    pub coefficients: Vec<f64>,
    pub standard_errors: Vec<f64>,
    pub t_values: Vec<f64>,
    pub p_values: Vec<f64>,
    pub ci_lower: Vec<f64>,
    pub ci_upper: Vec<f64>,
    pub r_squared: f64,
    pub sse: f64,
    pub sst: f64,
    pub rejected_rows: usize,
    #[serde(skip)]
    pub regressors: Vec<Variable>,
    #[serde(skip)]
    pub fitted_values: Vec<f64>,
    #[serde(skip)]
    pub residuals: Vec<f64>,
}

impl FittedModel {
    /// Non-intercept regressors whose p-value is not below `alpha`.
    pub fn insignificant(&self, alpha: f64) -> Vec<Variable> {
        self.regressors
            .iter()
            .zip(&self.p_values[1..])
            .filter(|(_, &p)| p.is_nan() || p >= alpha)
            .map(|(&v, _)| v)
            .collect()
    }

    pub fn label(&self) -> String {
        if self.regressors.is_empty() {
            "intercept-only".to_string()
        } else {
            self.regressors.iter().map(|v| v.name()).collect::<Vec<_>>().join(",")
        }
    }
}

/// Two-sided p-value of a t statistic with `df` degrees of freedom:
/// `I_{df/(df+t^2)}(df/2, 1/2)`.
pub fn t_two_sided_p(t: f64, df: f64) -> f64 {
    if !t.is_finite() {
        return if t.is_nan() { f64::NAN } else { 0.0 };
    }
    beta_reg(0.5 * df, 0.5, df / (df + t * t))
}

/// Upper `q` quantile of Student's t with `df` degrees of freedom.
pub fn t_quantile(q: f64, df: f64) -> f64 {
    StudentsT::new(0.0, 1.0, df).expect("df > 0").inverse_cdf(q)
}

pub fn ols_fit(design: &Design) -> Result<FittedModel> {
    let x = &design.matrix;
    let y = &design.response;
    let (n, p) = x.shape();
    if n <= p {
        return Err(Error::domain(format!(
            "need more rows than columns (rows = {n}, columns = {p})"
        )));
    }
    let names = design.column_names();

    let qr = x.clone().qr();
    let r = qr.r();
    for k in 0..p {
        let norm = x.column(k).norm();
        if r[(k, k)].abs() <= RANK_TOLERANCE * norm.max(f64::MIN_POSITIVE) {
            return Err(singular_column(x, k, &names));
        }
    }
    let qty = qr.q().transpose() * y;
    let beta = r
        .solve_upper_triangular(&qty)
        .ok_or_else(|| Error::domain("triangular solve failed"))?;
    let fitted = x * &beta;
    let residuals = y - &fitted;
    let sse = residuals.norm_squared();
    let mean = y.mean();
    let sst = y.iter().map(|v| (v - mean).powi(2)).sum::<f64>();
    let r_squared = if sst > 0.0 {
        1.0 - sse / sst
    } else if sse == 0.0 {
        1.0
    } else {
        0.0
    };

    let df = n - p;
    let sigma2 = sse / df as f64;
    let r_inv = r
        .solve_upper_triangular(&DMatrix::identity(p, p))
        .ok_or_else(|| Error::domain("triangular solve failed"))?;
    // (X'X)^-1 = R^-1 R^-T, so its diagonal is the squared row norms of R^-1
    let standard_errors: Vec<f64> = (0..p).map(|i| (sigma2 * r_inv.row(i).norm_squared()).sqrt()).collect();
    let coefficients: Vec<f64> = beta.iter().copied().collect();
    let t_values: Vec<f64> = coefficients
        .iter()
        .zip(&standard_errors)
        .map(|(b, se)| if *se > 0.0 { b / se } else { f64::INFINITY.copysign(*b) })
        .collect();
    let p_values = t_values.iter().map(|&t| t_two_sided_p(t, df as f64)).collect();
    let t_crit = t_quantile(0.975, df as f64);
    let ci_lower = coefficients
        .iter()
        .zip(&standard_errors)
        .map(|(b, se)| b - t_crit * se)
        .collect();
    let ci_upper = coefficients
        .iter()
        .zip(&standard_errors)
        .map(|(b, se)| b + t_crit * se)
        .collect();

    Ok(FittedModel {
        variables: names,
        n,
        df,
        coefficients,
        standard_errors,
        t_values,
        p_values,
        ci_lower,
        ci_upper,
        r_squared,
        sse,
        sst,
        rejected_rows: design.rejected_rows.len(),
        regressors: design.variables.clone(),
        fitted_values: fitted.iter().copied().collect(),
        residuals: residuals.iter().copied().collect(),
    })
}

/// Explains which earlier columns reproduce column `k`.
fn singular_column(x: &DMatrix<f64>, k: usize, names: &[String]) -> Error {
    let with = if k == 0 {
        vec![]
    } else {
        let lead = x.columns(0, k).into_owned();
        let target = x.column(k).into_owned();
        let coef = lead
            .svd(true, true)
            .solve(&target, 1e-12)
            .unwrap_or_else(|_| DVector::zeros(k));
        let scale = coef.amax().max(f64::MIN_POSITIVE);
        (0..k)
            .filter(|&i| coef[i].abs() > 1e-8 * scale)
            .map(|i| names[i].clone())
            .collect()
    };
    Error::SingularDesign {
        column: names[k].clone(),
        with,
    }
}

pub fn fit_model(observations: &[RegressionObservation], variables: &[Variable]) -> Result<FittedModel> {
    ols_fit(&build_design(observations, variables)?)
}

pub fn predict(model: &FittedModel, obs: &RegressionObservation) -> Result<f64> {
    if obs.recorded_breakdowns == 0 && model.regressors.iter().any(|v| v.needs_breakdowns()) {
        return Err(Error::domain("regressor undefined for zero recorded breakdowns"));
    }
    Ok(model.coefficients[0]
        + model
            .regressors
            .iter()
            .zip(&model.coefficients[1..])
            .map(|(v, b)| b * v.value(obs))
            .sum::<f64>())
}

#[derive(Debug, Clone, Serialize)]
pub struct FlaggedModel {
    pub model: FittedModel,
    pub insignificant: Vec<Variable>,
}

#[derive(Debug, Clone, Serialize)]
pub struct FailedModel {
    pub variables: Vec<Variable>,
    pub error: String,
}

#[derive(Debug, Clone, Serialize)]
pub struct Screening {
    /// Models whose every regressor is significant, best R² first.
    pub ranked: Vec<FittedModel>,
    /// Models with at least one insignificant regressor, best R² first.
    pub flagged: Vec<FlaggedModel>,
    pub failed: Vec<FailedModel>,
}

pub const SIGNIFICANCE: f64 = 0.05;

pub fn screen_models(observations: &[RegressionObservation], candidates: &[Vec<Variable>]) -> Screening {
    let mut ranked = Vec::new();
    let mut flagged = Vec::new();
    let mut failed = Vec::new();
    for vars in candidates {
        match fit_model(observations, vars) {
            Ok(model) => {
                let insignificant = model.insignificant(SIGNIFICANCE);
                if insignificant.is_empty() {
                    ranked.push(model);
                } else {
                    flagged.push(FlaggedModel { model, insignificant });
                }
            }
            Err(e) => failed.push(FailedModel {
                variables: vars.clone(),
                error: e.to_string(),
            }),
        }
    }
    ranked.sort_by(|a, b| b.r_squared.total_cmp(&a.r_squared));
    flagged.sort_by(|a, b| b.model.r_squared.total_cmp(&a.model.r_squared));
    Screening {
        ranked,
        flagged,
        failed,
    }
}
