//! Deviation of an estimated curve from its ground truth: RMSE, average
//! relative error (ARE) and average relative error weighted by expected
//! breakdowns (AWRE). Relative errors are fractions, not percentages.

use serde::{Deserialize, Serialize};

use crate::capacity::{IntensityLevel, WeibullCapacity};
use crate::error::{Error, Result};
use crate::synthetic::{cumulative_frequency, expected_breakdowns, CfbFlavor, IntensityProfile};

/// Estimated and true curve values on a common set of levels.
#[derive(Debug, Clone, PartialEq)]
pub struct CurvePair {
    pub levels: Vec<IntensityLevel>,
    pub estimated: Vec<f64>,
    pub truth: Vec<f64>,
    pub weights: Vec<f64>,
}

impl CurvePair {
    pub fn new(levels: Vec<IntensityLevel>, estimated: Vec<f64>, truth: Vec<f64>, weights: Vec<f64>) -> Result<Self> {
        let n = levels.len();
        if estimated.len() != n || truth.len() != n || weights.len() != n {
            return Err(Error::domain("curve pair columns differ in length"));
        }
        if n == 0 {
            return Err(Error::domain("no levels to compare"));
        }
        if truth.iter().any(|&t| !(t > 0.0 && t.is_finite())) {
            return Err(Error::domain("truth values must be positive on compared levels"));
        }
        if weights.iter().any(|&w| !(w >= 0.0 && w.is_finite())) || weights.iter().sum::<f64>() <= 0.0 {
            return Err(Error::domain("weights must be non-negative with a positive sum"));
        }
        Ok(Self {
            levels,
            estimated,
            truth,
            weights,
        })
    }

    fn relative_errors(&self) -> impl Iterator<Item = f64> + '_ {
        self.estimated.iter().zip(&self.truth).map(|(e, t)| (e - t).abs() / t)
    }

    pub fn len(&self) -> usize {
        self.levels.len()
    }

    pub fn is_empty(&self) -> bool {
        self.levels.is_empty()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MetricReport {
    pub rmse: f64,
    pub are: f64,
    pub awre: f64,
    pub levels_compared: usize,
}

impl MetricReport {
    pub fn of(pair: &CurvePair) -> Self {
        Self {
            rmse: rmse(pair),
            are: are(pair),
            awre: awre(pair),
            levels_compared: pair.len(),
        }
    }
}

pub fn rmse(pair: &CurvePair) -> f64 {
    let sse: f64 = pair
        .estimated
        .iter()
        .zip(&pair.truth)
        .map(|(e, t)| (e - t).powi(2))
        .sum();
    (sse / pair.len() as f64).sqrt()
}

pub fn are(pair: &CurvePair) -> f64 {
    pair.relative_errors().sum::<f64>() / pair.len() as f64
}

/// Relative error averaged with the pair's weights, using absolute deviations.
pub fn awre(pair: &CurvePair) -> f64 {
    let total: f64 = pair.weights.iter().sum();
    pair.relative_errors()
        .zip(&pair.weights)
        .map(|(e, w)| e * w)
        .sum::<f64>()
        / total
}

/// Fitted vs true capacity CDF on profile levels with records, weighted by
/// expected breakdowns under the true distribution.
pub fn curve_pair_for_cdf(
    fitted: &WeibullCapacity,
    truth: &WeibullCapacity,
    profile: &IntensityProfile,
) -> Result<CurvePair> {
    let (mut levels, mut est, mut tru, mut w) = (vec![], vec![], vec![], vec![]);
    for (&level, &r) in profile.levels().iter().zip(profile.records()) {
        let f_true = truth.breakdown_probability(level);
        if r > 0.0 && f_true > 0.0 {
            levels.push(level);
            est.push(fitted.breakdown_probability(level));
            tru.push(f_true);
            w.push(r * f_true);
        }
    }
    CurvePair::new(levels, est, tru, w)
}

/// CF_B implied by the fitted CDF vs either the theoretical CF_B under the
/// true distribution or the realised (`breakdowns`) CF_B.
pub fn curve_pair_for_cfb(
    fitted: &WeibullCapacity,
    truth: &WeibullCapacity,
    profile: &IntensityProfile,
    breakdowns: &[u64],
    flavor: CfbFlavor,
) -> Result<CurvePair> {
    if breakdowns.len() != profile.levels().len() {
        return Err(Error::domain("breakdown counts are not aligned with the profile"));
    }
    let weights = expected_breakdowns(profile, truth);
    let estimated = cumulative_frequency(&expected_breakdowns(profile, fitted));
    let reference = match flavor {
        CfbFlavor::Theoretical => cumulative_frequency(&weights),
        CfbFlavor::Empirical => {
            let counts: Vec<f64> = breakdowns.iter().map(|&b| b as f64).collect();
            cumulative_frequency(&counts)
        }
    };
    let (mut levels, mut est, mut tru, mut w) = (vec![], vec![], vec![], vec![]);
    for j in 0..reference.len() {
        if reference[j] > 0.0 {
            levels.push(profile.levels()[j]);
            est.push(estimated[j]);
            tru.push(reference[j]);
            w.push(weights[j]);
        }
    }
    CurvePair::new(levels, est, tru, w)
}
