//! Least-squares and maximum-likelihood estimation of the rate parameters
//! from a count table, via derivative-free Nelder–Mead search.
//!
//! Both objectives evaluate the model path by solving the illness-death
//! system from p(0) = (1, 0, 0) at the observation times. The search runs
//! on the transformed coordinates (onset, ln slope, ln ratio) so the
//! positivity constraints hold by construction; the onset age is kept in
//! [0, 100] by clamping inside the objective plus a quadratic penalty.

use statrs::function::gamma::ln_gamma;

use crate::error::{Error, Result};
use crate::ode::{solve_idm, SolutionPath, StateFractions};
use crate::rates::ThetaParams;
use crate::sampling::{observed_fractions, AcsTable};

/// Which objective a fit optimizes.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ObjectiveKind {
    LeastSquares,
    MaxLikelihood,
}

impl ObjectiveKind {
    pub fn label(&self) -> &'static str {
        match self {
            ObjectiveKind::LeastSquares => "ls",
            ObjectiveKind::MaxLikelihood => "ml",
        }
    }
}

/// Tuning knobs for [`fit`].
#[derive(Debug, Clone, Copy)]
pub struct FitOptions {
    /// Convergence threshold on the simplex's objective spread
    /// (worst − best).
    pub tol: f64,
    /// Objective-evaluation budget.
    pub max_evals: usize,
    /// Step of the RK4 solve behind the objective (years).
    pub ode_step: f64,
}

impl FitOptions {
    pub fn for_kind(kind: ObjectiveKind) -> Self {
        let tol = match kind {
            ObjectiveKind::LeastSquares => 1e-10,
            ObjectiveKind::MaxLikelihood => 1e-8,
        };
        Self { tol, max_evals: 5_000, ode_step: 0.1 }
    }
}

/// Starting point used by the command-line front end when no initial
/// guess is configured.
pub fn default_initial_theta() -> ThetaParams {
    ThetaParams { onset_age: 40.0, incidence_slope: 1e-3, mortality_rate_ratio: 1.5 }
}

/// Outcome of a fit.
#[derive(Debug, Clone, Copy)]
pub struct EstimationResult {
    pub theta_hat: ThetaParams,
    /// The raw objective (sum of squares, or log-likelihood negated)
    /// re-evaluated at `theta_hat`, penalty-free.
    pub objective_value: f64,
    pub objective_kind: ObjectiveKind,
    pub n_evaluations: usize,
    pub converged: bool,
    pub initial_theta: ThetaParams,
}

/// Onset-age window enforced during fitting.
const ONSET_RANGE: (f64, f64) = (0.0, 100.0);
/// Weight of the quadratic penalty on onset ages outside the window.
const ONSET_PENALTY_WEIGHT: f64 = 1e4;

fn model_path(theta: &ThetaParams, visit_times: &[f64], ode_step: f64) -> Result<SolutionPath> {
    let t_end = *visit_times.last().expect("visit_times nonempty");
    solve_idm(theta, StateFractions::INITIAL, 0.0, t_end.max(ode_step), ode_step, visit_times)
}

/// Sum over visits and components of the squared difference between the
/// model path and the observed fractions (the least-squares objective).
pub fn ls_objective(
    theta: &ThetaParams,
    fractions: &[StateFractions],
    visit_times: &[f64],
    ode_step: f64,
) -> Result<f64> {
    if fractions.len() != visit_times.len() || fractions.is_empty() {
        return Err(Error::LengthMismatch(format!(
            "{} fractions vs {} visit times",
            fractions.len(),
            visit_times.len()
        )));
    }
    let path = model_path(theta, visit_times, ode_step)?;
    Ok(path
        .values()
        .iter()
        .zip(fractions)
        .map(|(model, obs)| {
            let m = model.as_array();
            let o = obs.as_array();
            (0..3).map(|j| (m[j] - o[j]).powi(2)).sum::<f64>()
        })
        .sum())
}

/// Log mass of one multinomial cross-section:
/// ln(n!) + Σ_j (x_j ln p_j − ln(x_j!)), with the convention that a zero
/// count contributes nothing regardless of p_j, and −∞ when a positive
/// count meets a nonpositive probability.
pub fn multinomial_log_mass(counts: [u64; 3], probs: [f64; 3]) -> f64 {
    let n: u64 = counts.iter().sum();
    let mut ll = ln_gamma(n as f64 + 1.0);
    for (&x, &p) in counts.iter().zip(probs.iter()) {
        if x == 0 {
            continue;
        }
        if p <= 0.0 {
            return f64::NEG_INFINITY;
        }
        ll += x as f64 * p.ln() - ln_gamma(x as f64 + 1.0);
    }
    ll
}

/// Multinomial log-likelihood of the table under the model path at
/// `theta`: the sum of [`multinomial_log_mass`] over visits. Returns −∞
/// for parameters that put zero probability on an observed state.
pub fn log_likelihood(theta: &ThetaParams, table: &AcsTable, ode_step: f64) -> Result<f64> {
    if table.totals().iter().any(|&n| n == 0) {
        return Err(Error::InvalidParameter("log-likelihood requires positive totals".into()));
    }
    let path = model_path(theta, table.visit_times(), ode_step)?;
    Ok((0..table.n_visits())
        .map(|k| multinomial_log_mass(table.counts(k), path.values()[k].as_array()))
        .sum())
}

/// The data-dependent part of [`log_likelihood`]: Σ_k Σ_j x_{k,j} ln p_j,
/// i.e. the log-likelihood stripped of the factorial terms that do not
/// depend on the parameter. Maximizing either function gives the same
/// estimate.
pub fn log_likelihood_data_term(
    theta: &ThetaParams,
    table: &AcsTable,
    ode_step: f64,
) -> Result<f64> {
    if table.totals().iter().any(|&n| n == 0) {
        return Err(Error::InvalidParameter("log-likelihood requires positive totals".into()));
    }
    let path = model_path(theta, table.visit_times(), ode_step)?;
    let mut ll = 0.0;
    for k in 0..table.n_visits() {
        let probs = path.values()[k].as_array();
        for (&x, &p) in table.counts(k).iter().zip(probs.iter()) {
            if x == 0 {
                continue;
            }
            if p <= 0.0 {
                return Ok(f64::NEG_INFINITY);
            }
            ll += x as f64 * p.ln();
        }
    }
    Ok(ll)
}

/// Options for the generic Nelder–Mead minimizer.
#[derive(Debug, Clone, Copy)]
pub struct NelderMeadOptions {
    /// Convergence threshold on worst − best over the simplex.
    pub tol: f64,
    pub max_evals: usize,
}

/// Outcome of a Nelder–Mead run.
#[derive(Debug, Clone)]
pub struct NelderMeadResult {
    pub x: Vec<f64>,
    pub fx: f64,
    pub n_evaluations: usize,
    pub converged: bool,
    /// Best objective value after each iteration; nonincreasing.
    pub history: Vec<f64>,
}

/// Derivative-free simplex minimization with the standard coefficients
/// (reflection 1, expansion 2, contraction 0.5, shrink 0.5). The initial
/// simplex perturbs each coordinate of `x0` by 10% (or by 0.1 where the
/// coordinate is zero). Non-finite objective values are treated as +∞.
pub fn nelder_mead(
    mut f: impl FnMut(&[f64]) -> f64,
    x0: &[f64],
    opts: &NelderMeadOptions,
) -> NelderMeadResult {
    const ALPHA: f64 = 1.0; // reflection
    const GAMMA: f64 = 2.0; // expansion
    const RHO: f64 = 0.5; // contraction
    const SIGMA: f64 = 0.5; // shrink

    let dim = x0.len();
    assert!(dim >= 1, "nelder_mead needs at least one coordinate");

    let mut n_evals = 0usize;
    let mut eval = |x: &[f64], n_evals: &mut usize| -> f64 {
        *n_evals += 1;
        let v = f(x);
        if v.is_nan() {
            f64::INFINITY
        } else {
            v
        }
    };

    // simplex of dim+1 vertices
    let mut simplex: Vec<Vec<f64>> = Vec::with_capacity(dim + 1);
    simplex.push(x0.to_vec());
    for i in 0..dim {
        let mut v = x0.to_vec();
        v[i] = if v[i] != 0.0 { v[i] * 1.1 } else { 0.1 };
        simplex.push(v);
    }
    let mut fvals: Vec<f64> = simplex.iter().map(|v| eval(v, &mut n_evals)).collect();

    let mut history = Vec::new();
    let mut converged = false;

    loop {
        // ascending by objective
        let mut order: Vec<usize> = (0..=dim).collect();
        order.sort_by(|&a, &b| fvals[a].total_cmp(&fvals[b]));
        let (best, worst, second_worst) = (order[0], order[dim], order[dim - 1]);
        history.push(fvals[best]);

        if fvals[worst] - fvals[best] < opts.tol {
            converged = true;
            break;
        }
        if n_evals >= opts.max_evals {
            break;
        }

        // centroid of all vertices but the worst
        let mut centroid = vec![0.0; dim];
        for (i, v) in simplex.iter().enumerate() {
            if i == worst {
                continue;
            }
            for (c, &x) in centroid.iter_mut().zip(v) {
                *c += x;
            }
        }
        for c in &mut centroid {
            *c /= dim as f64;
        }

        let blend = |a: &[f64], coeff: f64, b: &[f64]| -> Vec<f64> {
            a.iter().zip(b).map(|(&ai, &bi)| ai + coeff * (ai - bi)).collect()
        };

        let reflected = blend(&centroid, ALPHA, &simplex[worst]);
        let f_reflected = eval(&reflected, &mut n_evals);

        if f_reflected < fvals[best] {
            let expanded = blend(&centroid, GAMMA, &simplex[worst]);
            let f_expanded = eval(&expanded, &mut n_evals);
            if f_expanded < f_reflected {
                simplex[worst] = expanded;
                fvals[worst] = f_expanded;
            } else {
                simplex[worst] = reflected;
                fvals[worst] = f_reflected;
            }
            continue;
        }
        if f_reflected < fvals[second_worst] {
            simplex[worst] = reflected;
            fvals[worst] = f_reflected;
            continue;
        }

        // contraction, outside or inside of the reflected point
        let contracted = if f_reflected < fvals[worst] {
            centroid.iter().zip(&reflected).map(|(&c, &r)| c + RHO * (r - c)).collect::<Vec<_>>()
        } else {
            centroid
                .iter()
                .zip(&simplex[worst])
                .map(|(&c, &w)| c + RHO * (w - c))
                .collect::<Vec<_>>()
        };
        let f_contracted = eval(&contracted, &mut n_evals);
        if f_contracted < fvals[worst].min(f_reflected) {
            simplex[worst] = contracted;
            fvals[worst] = f_contracted;
            continue;
        }

        // shrink toward the best vertex
        let best_vertex = simplex[best].clone();
        for i in 0..=dim {
            if i == best {
                continue;
            }
            for (x, &b) in simplex[i].iter_mut().zip(&best_vertex) {
                *x = b + SIGMA * (*x - b);
            }
            fvals[i] = eval(&simplex[i], &mut n_evals);
            if n_evals >= opts.max_evals {
                break;
            }
        }
    }

    let best = (0..=dim).min_by(|&a, &b| fvals[a].total_cmp(&fvals[b])).unwrap();
    NelderMeadResult {
        x: simplex[best].clone(),
        fx: fvals[best],
        n_evaluations: n_evals,
        converged,
        history,
    }
}

fn to_search_coords(theta: &ThetaParams) -> Result<[f64; 3]> {
    if theta.incidence_slope <= 0.0 {
        return Err(Error::InvalidParameter(
            "fit requires a strictly positive initial incidence slope".into(),
        ));
    }
    Ok([theta.onset_age, theta.incidence_slope.ln(), theta.mortality_rate_ratio.ln()])
}

fn from_search_coords(z: &[f64]) -> ThetaParams {
    ThetaParams {
        onset_age: z[0],
        incidence_slope: z[1].exp(),
        mortality_rate_ratio: z[2].exp(),
    }
}

/// Penalized objective on search coordinates: the raw objective at the
/// onset-clamped parameter, plus a quadratic penalty for leaving the
/// onset window. Parameters where the solver fails count as infeasible.
fn penalized(raw: &impl Fn(&ThetaParams) -> Result<f64>, z: &[f64]) -> f64 {
    let theta = from_search_coords(z);
    let clamped_onset = theta.onset_age.clamp(ONSET_RANGE.0, ONSET_RANGE.1);
    let excess = theta.onset_age - clamped_onset;
    let theta_eval = ThetaParams { onset_age: clamped_onset, ..theta };
    match raw(&theta_eval) {
        Ok(v) => v + ONSET_PENALTY_WEIGHT * excess * excess,
        Err(_) => f64::INFINITY,
    }
}

fn run_fit(
    raw: impl Fn(&ThetaParams) -> Result<f64>,
    kind: ObjectiveKind,
    initial: ThetaParams,
    options: &FitOptions,
) -> Result<EstimationResult> {
    let z0 = to_search_coords(&initial)?;

    // surface real errors (grid misalignment, bad table) from the start
    // point; afterwards failures mean "infeasible parameter"
    let f0 = raw(&initial)?;
    if !f0.is_finite() {
        return Err(Error::NonFiniteObjective(format!(
            "objective is {f0} at the initial point {initial:?}"
        )));
    }

    let nm = nelder_mead(
        |z| penalized(&raw, z),
        &z0,
        &NelderMeadOptions { tol: options.tol, max_evals: options.max_evals },
    );

    let theta_best = from_search_coords(&nm.x);
    let theta_hat = ThetaParams {
        onset_age: theta_best.onset_age.clamp(ONSET_RANGE.0, ONSET_RANGE.1),
        ..theta_best
    };
    let objective_value = raw(&theta_hat)?;
    Ok(EstimationResult {
        theta_hat,
        objective_value,
        objective_kind: kind,
        n_evaluations: nm.n_evaluations,
        converged: nm.converged,
        initial_theta: initial,
    })
}

/// Fits the parameter to a count table by the requested objective.
pub fn fit(
    kind: ObjectiveKind,
    table: &AcsTable,
    initial: ThetaParams,
    options: &FitOptions,
) -> Result<EstimationResult> {
    match kind {
        ObjectiveKind::LeastSquares => {
            let fractions = observed_fractions(table)?;
            fit_ls_fractions(&fractions, table.visit_times(), initial, options)
        }
        ObjectiveKind::MaxLikelihood => {
            let step = options.ode_step;
            run_fit(|theta| log_likelihood(theta, table, step).map(|ll| -ll), kind, initial, options)
        }
    }
}

/// Least-squares fit directly on observed fractions (the natural entry
/// point when fractions are available without counts).
pub fn fit_ls_fractions(
    fractions: &[StateFractions],
    visit_times: &[f64],
    initial: ThetaParams,
    options: &FitOptions,
) -> Result<EstimationResult> {
    let step = options.ode_step;
    let fractions = fractions.to_vec();
    let times = visit_times.to_vec();
    run_fit(
        move |theta| ls_objective(theta, &fractions, &times, step),
        ObjectiveKind::LeastSquares,
        initial,
        options,
    )
}
