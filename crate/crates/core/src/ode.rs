//! Fixed-step classical Runge–Kutta (RK4) solvers for the illness-death
//! system p' = A(t) p and for the scalar prevalence equation
//! π' = (1 − π)(c12 − π(c23 − c13)).
//!
//! Output times must land exactly on the step grid; no interpolation is
//! performed. Components that undershoot zero by at most 1e−12 from
//! rounding are clamped to zero on output; anything worse is an error.

use crate::error::{Error, Result};
use crate::rates::RateModel;

/// Tolerance on the simplex residual |p1 + p2 + p3 − 1| of solver output.
pub const SIMPLEX_TOL: f64 = 1e-9;

/// Largest negative undershoot that is clamped instead of rejected.
const CLAMP_TOL: f64 = 1e-12;

/// Relative tolerance when matching an output time to a step index.
const GRID_TOL: f64 = 1e-9;

/// A point on the 3-simplex: fractions in the states Non-diseased,
/// Diseased and Dead.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct StateFractions {
    pub non_diseased: f64,
    pub diseased: f64,
    pub dead: f64,
}

impl StateFractions {
    /// Everyone alive and disease-free: the initial condition p(0) = (1, 0, 0).
    pub const INITIAL: StateFractions =
        StateFractions { non_diseased: 1.0, diseased: 0.0, dead: 0.0 };

    pub fn new(non_diseased: f64, diseased: f64, dead: f64) -> Result<Self> {
        let p = Self { non_diseased, diseased, dead };
        p.check_simplex()?;
        Ok(p)
    }

    pub fn as_array(&self) -> [f64; 3] {
        [self.non_diseased, self.diseased, self.dead]
    }

    pub fn sum(&self) -> f64 {
        self.non_diseased + self.diseased + self.dead
    }

    /// Prevalence among the living, p2 / (p1 + p2).
    pub fn prevalence(&self) -> f64 {
        self.diseased / (self.non_diseased + self.diseased)
    }

    fn check_simplex(&self) -> Result<()> {
        let arr = self.as_array();
        if arr.iter().any(|x| !x.is_finite()) {
            return Err(Error::NonSimplex(format!("non-finite component in {arr:?}")));
        }
        if arr.iter().any(|&x| !(-CLAMP_TOL..=1.0 + CLAMP_TOL).contains(&x)) {
            return Err(Error::NonSimplex(format!("component outside [0, 1] in {arr:?}")));
        }
        if (self.sum() - 1.0).abs() > SIMPLEX_TOL {
            return Err(Error::NonSimplex(format!("components sum to {} in {arr:?}", self.sum())));
        }
        Ok(())
    }
}

/// A solution evaluated on a set of output times.
#[derive(Debug, Clone)]
pub struct SolutionPath {
    times: Vec<f64>,
    values: Vec<StateFractions>,
}

impl SolutionPath {
    fn new(times: Vec<f64>, values: Vec<StateFractions>) -> Result<Self> {
        if times.len() != values.len() {
            return Err(Error::LengthMismatch(format!(
                "{} times vs {} values",
                times.len(),
                values.len()
            )));
        }
        if times.windows(2).any(|w| w[0] >= w[1]) {
            return Err(Error::InvalidParameter("times must be strictly increasing".into()));
        }
        Ok(Self { times, values })
    }

    pub fn times(&self) -> &[f64] {
        &self.times
    }

    pub fn values(&self) -> &[StateFractions] {
        &self.values
    }

    pub fn len(&self) -> usize {
        self.times.len()
    }

    pub fn is_empty(&self) -> bool {
        self.times.is_empty()
    }

    pub fn iter(&self) -> impl Iterator<Item = (f64, &StateFractions)> {
        self.times.iter().copied().zip(self.values.iter())
    }
}

/// Maps each output time to its step index, rejecting times off the grid
/// or outside [t0, t_end]. Also validates step and ordering.
fn grid_indices(t0: f64, t_end: f64, step: f64, output_times: &[f64]) -> Result<Vec<usize>> {
    if !(step > 0.0) || !step.is_finite() {
        return Err(Error::InvalidParameter(format!("step must be > 0, got {step}")));
    }
    if output_times.is_empty() {
        return Err(Error::InvalidParameter("output_times must be nonempty".into()));
    }
    if output_times.windows(2).any(|w| w[0] >= w[1]) {
        return Err(Error::InvalidParameter("output_times must be strictly increasing".into()));
    }
    output_times
        .iter()
        .map(|&t| {
            if t < t0 - GRID_TOL || t > t_end + GRID_TOL {
                return Err(Error::GridAlignment(format!(
                    "output time {t} outside [{t0}, {t_end}]"
                )));
            }
            let k = ((t - t0) / step).round();
            let miss = (t0 + k * step - t).abs();
            if miss > GRID_TOL * t.abs().max(1.0) {
                return Err(Error::GridAlignment(format!(
                    "output time {t} is not a multiple of step {step} from {t0}"
                )));
            }
            Ok(k as usize)
        })
        .collect()
}

fn clamp_component(x: f64) -> Result<f64> {
    if x >= 0.0 {
        Ok(x)
    } else if x >= -CLAMP_TOL {
        Ok(0.0)
    } else {
        Err(Error::NonSimplex(format!("component undershoots zero: {x}")))
    }
}

/// Right-hand side A(t)·p of the illness-death system, written out.
fn idm_rhs(rates: &impl RateModel, t: f64, p: [f64; 3]) -> [f64; 3] {
    let c12 = rates.incidence(t);
    let c13 = rates.background_mortality(t);
    let c23 = rates.diseased_mortality(t);
    [
        -(c12 + c13) * p[0],
        c12 * p[0] - c23 * p[1],
        c13 * p[0] + c23 * p[1],
    ]
}

/// Solves p' = A(t) p with RK4 at fixed step `step` on [t0, t_end],
/// returning the fractions at each requested output time.
///
/// Every output time must be an integer multiple of `step` away from `t0`.
pub fn solve_idm(
    rates: &impl RateModel,
    p0: StateFractions,
    t0: f64,
    t_end: f64,
    step: f64,
    output_times: &[f64],
) -> Result<SolutionPath> {
    p0.check_simplex()?;
    let indices = grid_indices(t0, t_end, step, output_times)?;
    let last = *indices.last().expect("output_times nonempty");

    let mut values = Vec::with_capacity(output_times.len());
    let mut p = p0.as_array();
    let mut next_out = 0;

    for k in 0..=last {
        if indices[next_out] == k {
            values.push(StateFractions {
                non_diseased: clamp_component(p[0])?,
                diseased: clamp_component(p[1])?,
                dead: clamp_component(p[2])?,
            });
            next_out += 1;
            if next_out == indices.len() {
                break;
            }
        }
        let t = t0 + k as f64 * step;
        p = rk4_step(|t, p| idm_rhs(rates, t, p), t, p, step);
    }

    let path = SolutionPath::new(output_times.to_vec(), values)?;
    for (t, v) in path.iter() {
        if (v.sum() - 1.0).abs() > SIMPLEX_TOL {
            return Err(Error::NonSimplex(format!("solution left the simplex at t = {t}")));
        }
    }
    Ok(path)
}

/// Solves the scalar prevalence equation
/// π' = (1 − π)(c12 − π(c23 − c13)) with RK4, same grid rules as
/// [`solve_idm`].
pub fn solve_prevalence(
    rates: &impl RateModel,
    pi0: f64,
    t0: f64,
    t_end: f64,
    step: f64,
    output_times: &[f64],
) -> Result<Vec<f64>> {
    if !(0.0..=1.0).contains(&pi0) {
        return Err(Error::InvalidParameter(format!("pi0 must be in [0, 1], got {pi0}")));
    }
    let indices = grid_indices(t0, t_end, step, output_times)?;
    let last = *indices.last().expect("output_times nonempty");

    let rhs = |t: f64, pi: [f64; 1]| -> [f64; 1] {
        let c12 = rates.incidence(t);
        let c13 = rates.background_mortality(t);
        let c23 = rates.diseased_mortality(t);
        [(1.0 - pi[0]) * (c12 - pi[0] * (c23 - c13))]
    };

    let mut out = Vec::with_capacity(output_times.len());
    let mut pi = [pi0];
    let mut next_out = 0;
    for k in 0..=last {
        if indices[next_out] == k {
            out.push(clamp_component(pi[0])?);
            next_out += 1;
            if next_out == indices.len() {
                break;
            }
        }
        let t = t0 + k as f64 * step;
        pi = rk4_step(rhs, t, pi, step);
    }
    Ok(out)
}

/// One classical RK4 step for y' = f(t, y) with y an N-vector.
fn rk4_step<const N: usize>(
    f: impl Fn(f64, [f64; N]) -> [f64; N],
    t: f64,
    y: [f64; N],
    h: f64,
) -> [f64; N] {
    let k1 = f(t, y);
    let k2 = f(t + 0.5 * h, axpy(y, 0.5 * h, k1));
    let k3 = f(t + 0.5 * h, axpy(y, 0.5 * h, k2));
    let k4 = f(t + h, axpy(y, h, k3));
    let mut out = y;
    for i in 0..N {
        out[i] += h / 6.0 * (k1[i] + 2.0 * k2[i] + 2.0 * k3[i] + k4[i]);
    }
    out
}

fn axpy<const N: usize>(y: [f64; N], a: f64, x: [f64; N]) -> [f64; N] {
    let mut out = y;
    for i in 0..N {
        out[i] += a * x[i];
    }
    out
}
