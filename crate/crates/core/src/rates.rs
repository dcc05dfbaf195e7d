//! Transition rates of the three-state illness-death model.
//!
//! The model has states Non-diseased (1), Diseased (2) and Dead (3) with
//! transitions 1→2 (incidence), 1→3 (background mortality) and 2→3
//! (mortality of the diseased). The parametric family implemented here is
//!
//! - incidence `c12(t) = slope · max(0, t − onset_age)`,
//! - background mortality `c13(t) = exp(−10.7 + 0.1 t)` (fixed, known),
//! - diseased mortality `c23(t) = ratio · c13(t)`.
//!
//! All rates are per year with `t` in years.

use crate::error::{Error, Result};

/// Gompertz coefficients of the fixed background mortality.
const C13_INTERCEPT: f64 = -10.7;
const C13_SLOPE: f64 = 0.1;

/// The three-dimensional parameter of the rate family.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ThetaParams {
    /// Age at which incidence becomes positive (years).
    pub onset_age: f64,
    /// Slope of the incidence rate above the onset age (per year²). Must be ≥ 0.
    pub incidence_slope: f64,
    /// Ratio of diseased to background mortality (dimensionless). Must be > 0.
    pub mortality_rate_ratio: f64,
}

impl ThetaParams {
    pub fn new(onset_age: f64, incidence_slope: f64, mortality_rate_ratio: f64) -> Result<Self> {
        if !onset_age.is_finite() || !incidence_slope.is_finite() || !mortality_rate_ratio.is_finite()
        {
            return Err(Error::InvalidParameter("theta components must be finite".into()));
        }
        if incidence_slope < 0.0 {
            return Err(Error::InvalidParameter(format!(
                "incidence slope must be >= 0, got {incidence_slope}"
            )));
        }
        if mortality_rate_ratio <= 0.0 {
            return Err(Error::InvalidParameter(format!(
                "mortality rate ratio must be > 0, got {mortality_rate_ratio}"
            )));
        }
        Ok(Self { onset_age, incidence_slope, mortality_rate_ratio })
    }

    /// The parameter vector behind the built-in simulation defaults:
    /// onset at 30 years, slope 1/2000 per year², mortality ratio e^0.7.
    pub fn reference() -> Self {
        Self {
            onset_age: 30.0,
            incidence_slope: 1.0 / 2000.0,
            mortality_rate_ratio: 0.7f64.exp(),
        }
    }

    pub fn as_array(&self) -> [f64; 3] {
        [self.onset_age, self.incidence_slope, self.mortality_rate_ratio]
    }
}

/// Evaluator contract for the three transition rates. All rates must be
/// nonnegative for t ≥ 0; the background mortality is a fixed, known
/// function (the identifying assumption of the estimation problem).
pub trait RateModel {
    /// 1→2 rate at time `t`.
    fn incidence(&self, t: f64) -> f64;
    /// 1→3 rate at time `t`.
    fn background_mortality(&self, t: f64) -> f64;
    /// 2→3 rate at time `t`.
    fn diseased_mortality(&self, t: f64) -> f64;

    /// The system matrix A(t) of p' = A(t) p, in row-major order:
    /// row 1 = (−c12−c13, 0, 0); row 2 = (c12, −c23, 0); row 3 = (c13, c23, 0).
    /// Every column sums to zero.
    fn system_matrix(&self, t: f64) -> [[f64; 3]; 3] {
        let c12 = self.incidence(t);
        let c13 = self.background_mortality(t);
        let c23 = self.diseased_mortality(t);
        [
            [-c12 - c13, 0.0, 0.0],
            [c12, -c23, 0.0],
            [c13, c23, 0.0],
        ]
    }
}

impl RateModel for ThetaParams {
    fn incidence(&self, t: f64) -> f64 {
        incidence_rate(self, t)
    }

    fn background_mortality(&self, t: f64) -> f64 {
        background_mortality(t)
    }

    fn diseased_mortality(&self, t: f64) -> f64 {
        diseased_mortality(self, t)
    }
}

/// Incidence rate `c12(t) = slope · max(0, t − onset_age)`. Continuous,
/// piecewise linear, identically zero up to the onset age.
pub fn incidence_rate(theta: &ThetaParams, t: f64) -> f64 {
    theta.incidence_slope * (t - theta.onset_age).max(0.0)
}

/// Background mortality `c13(t) = exp(−10.7 + 0.1 t)`, strictly positive
/// and strictly increasing.
pub fn background_mortality(t: f64) -> f64 {
    (C13_INTERCEPT + C13_SLOPE * t).exp()
}

/// Mortality of the diseased, `c23(t) = ratio · c13(t)`.
pub fn diseased_mortality(theta: &ThetaParams, t: f64) -> f64 {
    theta.mortality_rate_ratio * background_mortality(t)
}

/// Integral of the background mortality over `[a, b]`, in closed form.
pub(crate) fn background_mortality_integral(a: f64, b: f64) -> f64 {
    (background_mortality(b) - background_mortality(a)) / C13_SLOPE
}

/// Integral of the incidence rate over `[a, b]`, in closed form.
pub(crate) fn incidence_integral(theta: &ThetaParams, a: f64, b: f64) -> f64 {
    let ra = (a - theta.onset_age).max(0.0);
    let rb = (b - theta.onset_age).max(0.0);
    0.5 * theta.incidence_slope * (rb * rb - ra * ra)
}
