//! Censored-data maximum likelihood for the Weibull capacity distribution.
//!
//! Each flow record either precedes a breakdown (uncensored) or does not
//! (censored: capacity exceeded the observed intensity). Records are grouped
//! by intensity level, so the per-observation log-likelihood
//!
//! ```text
//! l = sum_i [ d_i * ln F(I_i) + (1 - d_i) * ln(1 - F(I_i)) ]
//! ```
//!
//! becomes `sum_j [ b_j ln F(I_j) + (r_j - b_j) ln(1 - F(I_j)) ]` with `r_j`
//! records and `b_j` breakdowns at level `j`.
//!
//! The maximiser runs Nelder-Mead in `(ln scale, ln shape)` from several
//! jittered starts and keeps the best.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::capacity::{check_increasing, IntensityLevel, WeibullCapacity};
use crate::error::{Error, Result, Unidentifiable};
use crate::optimize::{nelder_mead, SimplexOptions};

/// Flow records and realised breakdowns grouped by intensity level.
#[derive(Debug, Clone, PartialEq)]
pub struct CensoredHistogram {
    levels: Vec<IntensityLevel>,
    records: Vec<f64>,
    breakdowns: Vec<u64>,
}

impl CensoredHistogram {
    pub fn new(levels: Vec<IntensityLevel>, records: Vec<f64>, breakdowns: Vec<u64>) -> Result<Self> {
        if levels.len() != records.len() || levels.len() != breakdowns.len() {
            return Err(Error::domain(format!(
                "histogram columns differ in length: {} levels, {} records, {} breakdowns",
                levels.len(),
                records.len(),
                breakdowns.len()
            )));
        }
        check_increasing(&levels)?;
        for (j, (&r, &b)) in records.iter().zip(&breakdowns).enumerate() {
            if !(r.is_finite() && r >= 0.0) {
                return Err(Error::domain(format!(
                    "records at level {j} must be finite and >= 0, got {r}"
                )));
            }
            if b as f64 > r.ceil() {
                return Err(Error::domain(format!(
                    "breakdowns at level {j} ({b}) exceed ceil(records) ({})",
                    r.ceil()
                )));
            }
        }
        if records.iter().sum::<f64>() <= 0.0 {
            return Err(Error::domain("histogram has no records"));
        }
        Ok(Self {
            levels,
            records,
            breakdowns,
        })
    }

    pub fn levels(&self) -> &[IntensityLevel] {
        &self.levels
    }

    pub fn records(&self) -> &[f64] {
        &self.records
    }

    pub fn breakdowns(&self) -> &[u64] {
        &self.breakdowns
    }

    pub fn total_records(&self) -> f64 {
        self.records.iter().sum()
    }

    pub fn total_breakdowns(&self) -> u64 {
        self.breakdowns.iter().sum()
    }

    /// Censored weight `r_j - b_j`, floored at zero for fractional records.
    #[inline]
    fn survivals(&self, j: usize) -> f64 {
        (self.records[j] - self.breakdowns[j] as f64).max(0.0)
    }

    fn identifiability(&self) -> Result<()> {
        if self.total_breakdowns() == 0 {
            return Err(Error::NonIdentifiable(Unidentifiable::NoBreakdowns));
        }
        if (0..self.levels.len()).all(|j| self.survivals(j) <= 0.0) {
            return Err(Error::NonIdentifiable(Unidentifiable::NoSurvivals));
        }
        Ok(())
    }
}

/// Log-likelihood of `dist` given the grouped censored data.
pub fn log_likelihood(data: &CensoredHistogram, dist: &WeibullCapacity) -> f64 {
    let mut ll = 0.0;
    for (j, &level) in data.levels.iter().enumerate() {
        let b = data.breakdowns[j];
        if b > 0 {
            ll += b as f64 * dist.log_breakdown_probability(level);
        }
        let s = data.survivals(j);
        if s > 0.0 {
            ll += s * dist.log_survival(level);
        }
    }
    ll
}

/// Expected breakdown count under `dist`: `sum_j r_j F(I_j)`.
pub fn predicted_breakdowns(data: &CensoredHistogram, dist: &WeibullCapacity) -> f64 {
    data.levels
        .iter()
        .zip(&data.records)
        .map(|(&l, &r)| r * dist.breakdown_probability(l))
        .sum()
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct FitOptions {
    /// Hold the shape parameter fixed and fit only the scale.
    pub fixed_shape: Option<f64>,
    pub multistart_count: usize,
    /// Objective spread below which a simplex counts as converged.
    pub tolerance: f64,
    /// Simplex diameter (in log-parameter space) below which it counts as converged.
    pub simplex_tolerance: f64,
    pub max_iterations: usize,
    /// Seed for the multistart jitter.
    pub seed: u64,
}

impl Default for FitOptions {
    fn default() -> Self {
        Self {
            fixed_shape: None,
            multistart_count: 5,
            tolerance: 1e-10,
            simplex_tolerance: 1e-8,
            max_iterations: 10_000,
            seed: 0,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EstimateResult {
    pub fitted: WeibullCapacity,
    pub log_likelihood: f64,
    pub converged: bool,
    pub iterations: usize,
    pub fixed_shape: Option<f64>,
}

const DEFAULT_START_SHAPE: f64 = 6.0;
const START_JITTER: f64 = 0.3;
const INITIAL_STEP: f64 = 0.2;
const POLISH_STEP: f64 = 0.02;

/// Intensity at which the empirical cumulative breakdown count first exceeds
/// 63% of its total.
fn seed_scale(data: &CensoredHistogram) -> f64 {
    let total = data.total_breakdowns() as f64;
    let mut cum = 0.0;
    for (level, &b) in data.levels.iter().zip(&data.breakdowns) {
        cum += b as f64;
        if cum > 0.63 * total {
            return level.value();
        }
    }
    data.levels.last().map(|l| l.value()).unwrap_or(1.0)
}

/// Maximum likelihood fit of a Weibull capacity distribution.
pub fn fit(data: &CensoredHistogram, options: &FitOptions) -> Result<EstimateResult> {
    data.identifiability()?;
    if let Some(shape) = options.fixed_shape {
        if !(shape.is_finite() && shape > 0.0) {
            return Err(Error::domain(format!("fixed shape must be > 0, got {shape}")));
        }
    }
    let starts = options.multistart_count.max(1);
    let simplex = SimplexOptions {
        diameter_tolerance: options.simplex_tolerance,
        value_tolerance: options.tolerance,
        max_iterations: options.max_iterations,
    };

    let objective = |x: &[f64]| -> f64 {
        let scale = x[0].exp();
        let shape = match options.fixed_shape {
            Some(s) => s,
            None => x[1].exp(),
        };
        match WeibullCapacity::new(scale, shape) {
            Ok(d) => -log_likelihood(data, &d),
            Err(_) => f64::INFINITY,
        }
    };

    let base = [seed_scale(data).ln(), DEFAULT_START_SHAPE.ln()];
    let dims = if options.fixed_shape.is_some() { 1 } else { 2 };
    let mut rng = ChaCha8Rng::seed_from_u64(options.seed);

    let mut best: Option<(Vec<f64>, f64, usize, bool)> = None;
    for k in 0..starts {
        let mut x0 = base[..dims].to_vec();
        if k > 0 {
            for x in x0.iter_mut() {
                *x += rng.random_range(1.0 - START_JITTER..1.0 + START_JITTER).ln();
            }
        }
        let first = nelder_mead(objective, &x0, INITIAL_STEP, &simplex);
        // restart from the converged point to guard against a collapsed simplex
        let polished = nelder_mead(objective, &first.x, POLISH_STEP, &simplex);
        let iterations = first.iterations + polished.iterations;
        let (x, value, converged) = if polished.value <= first.value {
            (polished.x, polished.value, first.converged && polished.converged)
        } else {
            (first.x, first.value, first.converged && polished.converged)
        };
        if best.as_ref().is_none_or(|b| value < b.1) {
            best = Some((x, value, iterations, converged));
        }
    }

    let (x, value, iterations, converged) = best.expect("at least one start");
    let shape = options.fixed_shape.unwrap_or_else(|| x[1].exp());
    let fitted = WeibullCapacity::new(x[0].exp(), shape)?;
    let log_likelihood = -value;
    Ok(EstimateResult {
        fitted,
        log_likelihood,
        converged: converged && log_likelihood.is_finite(),
        iterations,
        fixed_shape: options.fixed_shape,
    })
}

/// Exhaustive evaluation of a `steps x steps` grid of (scale, shape) values.
/// Used as an oracle for [`fit`].
pub fn grid_search(
    data: &CensoredHistogram,
    scale_range: (f64, f64),
    shape_range: (f64, f64),
    steps: usize,
) -> Result<(WeibullCapacity, f64)> {
    for (name, (lo, hi)) in [("scale", scale_range), ("shape", shape_range)] {
        if !(lo > 0.0 && hi >= lo && hi.is_finite()) {
            return Err(Error::domain(format!("invalid {name} range [{lo}, {hi}]")));
        }
    }
    if steps < 2 {
        return Err(Error::domain("grid needs at least 2 steps per axis"));
    }
    let at = |(lo, hi): (f64, f64), k: usize| lo + (hi - lo) * k as f64 / (steps - 1) as f64;

    let mut best: Option<(WeibullCapacity, f64)> = None;
    for i in 0..steps {
        for j in 0..steps {
            let d = WeibullCapacity::new(at(scale_range, i), at(shape_range, j))?;
            let ll = log_likelihood(data, &d);
            if best.is_none_or(|(_, b)| ll > b) {
                best = Some((d, ll));
            }
        }
    }
    Ok(best.expect("non-empty grid"))
}
