//! Weibull capacity distribution.
//!
//! The capacity CDF doubles as the breakdown probability: a breakdown happens
//! when the flow intensity exceeds the current capacity realisation, so
//! `P(breakdown at I) = F_C(I) = 1 - exp(-(I/scale)^shape)`.
//!
//! Intensities are in whatever unit the records use (vehicles per aggregation
//! interval in practice); nothing here converts them.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Below this value of `t = (I/scale)^shape` the log-CDF switches from the
/// complement formulation to its series expansion.
const SERIES_SWITCH: f64 = 1e-8;

/// A traffic-flow intensity level. Always strictly positive.
#[derive(Debug, Clone, Copy, PartialEq, PartialOrd, Serialize, Deserialize)]
#[serde(try_from = "f64", into = "f64")]
pub struct IntensityLevel(f64);

impl IntensityLevel {
    pub fn new(intensity: f64) -> Result<Self> {
        if intensity.is_finite() && intensity > 0.0 {
            Ok(Self(intensity))
        } else {
            Err(Error::domain(format!(
                "intensity must be a positive finite number, got {intensity}"
            )))
        }
    }

    #[inline]
    pub fn value(self) -> f64 {
        self.0
    }
}

impl TryFrom<f64> for IntensityLevel {
    type Error = Error;
    fn try_from(v: f64) -> Result<Self> {
        Self::new(v)
    }
}

impl From<IntensityLevel> for f64 {
    fn from(level: IntensityLevel) -> f64 {
        level.0
    }
}

/// Checks that levels are strictly increasing.
pub(crate) fn check_increasing(levels: &[IntensityLevel]) -> Result<()> {
    for (i, w) in levels.windows(2).enumerate() {
        if w[1].0 <= w[0].0 {
            return Err(Error::domain(format!(
                "intensity levels must be strictly increasing (level {} = {} follows {})",
                i + 1,
                w[1].0,
                w[0].0
            )));
        }
    }
    Ok(())
}

/// Weibull capacity distribution `W(scale, shape)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "RawWeibull", into = "RawWeibull")]
pub struct WeibullCapacity {
    scale: f64,
    shape: f64,
}

#[derive(Serialize, Deserialize)]
struct RawWeibull {
    scale: f64,
    shape: f64,
}

impl TryFrom<RawWeibull> for WeibullCapacity {
    type Error = Error;
    fn try_from(raw: RawWeibull) -> Result<Self> {
        WeibullCapacity::new(raw.scale, raw.shape)
    }
}

impl From<WeibullCapacity> for RawWeibull {
    fn from(w: WeibullCapacity) -> Self {
        RawWeibull {
            scale: w.scale,
            shape: w.shape,
        }
    }
}

impl WeibullCapacity {
    pub fn new(scale: f64, shape: f64) -> Result<Self> {
        if !(scale.is_finite() && scale > 0.0) {
            return Err(Error::domain(format!("Weibull scale must be > 0, got {scale}")));
        }
        if !(shape.is_finite() && shape > 0.0) {
            return Err(Error::domain(format!("Weibull shape must be > 0, got {shape}")));
        }
        Ok(Self { scale, shape })
    }

    #[inline]
    pub fn scale(&self) -> f64 {
        self.scale
    }

    #[inline]
    pub fn shape(&self) -> f64 {
        self.shape
    }

    /// `ln t` where `t = (I/scale)^shape`.
    #[inline]
    fn log_hazard_exponent(&self, intensity: IntensityLevel) -> f64 {
        self.shape * (intensity.0 / self.scale).ln()
    }

    /// Breakdown probability `F_C(I)`.
    pub fn breakdown_probability(&self, intensity: IntensityLevel) -> f64 {
        let t = self.log_hazard_exponent(intensity).exp();
        -(-t).exp_m1()
    }

    /// `ln(1 - F_C(I)) = -(I/scale)^shape`, with no cancellation.
    pub fn log_survival(&self, intensity: IntensityLevel) -> f64 {
        -self.log_hazard_exponent(intensity).exp()
    }

    /// `ln F_C(I)`, finite for every positive intensity.
    ///
    /// For tiny `t` the CDF itself underflows long before its logarithm does,
    /// so the series `ln t - t/2 + t^2/24` is used there.
    pub fn log_breakdown_probability(&self, intensity: IntensityLevel) -> f64 {
        let log_t = self.log_hazard_exponent(intensity);
        let t = log_t.exp();
        if t < SERIES_SWITCH {
            log_t - 0.5 * t + t * t / 24.0
        } else {
            log1mexp(t)
        }
    }

    /// Intensity at which the breakdown probability equals `p`.
    pub fn quantile(&self, p: f64) -> Result<f64> {
        if !(p > 0.0 && p < 1.0) {
            return Err(Error::domain(format!("probability must lie in (0, 1), got {p}")));
        }
        // -ln(1-p) via ln_1p keeps precision for small p.
        let t = -(-p).ln_1p();
        Ok(self.scale * t.powf(1.0 / self.shape))
    }
}

/// `ln(1 - e^{-t})` for `t > 0`.
pub fn log1mexp(t: f64) -> f64 {
    if t <= std::f64::consts::LN_2 {
        (-(-t).exp_m1()).ln()
    } else {
        (-(-t).exp()).ln_1p()
    }
}
