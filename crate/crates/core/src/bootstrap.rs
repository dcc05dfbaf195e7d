//! Schema-preserving parametric bootstrap.
//!
//! Each replicate re-simulates a fresh population at the supplied
//! parameter, re-applies the visit schema, and re-runs both estimators.
//! The schema — not the realized participation mask — is what is
//! mimicked by default: masks are redrawn Bernoulli(`p_part`) per
//! replicate, matching how the original table came about. A fixed-mask
//! mode reuses the realized mask instead, for designs where the same
//! people attend the same visits.
//!
//! Replicate `b` draws everything from seeds derived from
//! `(master_seed, b)`, so the full run set is a pure function of its
//! inputs no matter how many workers execute it.

use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::estimate::{fit, EstimationResult, FitOptions, ObjectiveKind};
use crate::microsim::{derive_seed, simulate_population, RngStream};
use crate::rates::ThetaParams;
use crate::sampling::{aggregate_acs, draw_visit_plan, VisitPlan};

/// How each replicate reproduces the participation schema.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SchemaMode {
    /// Redraw a fresh Bernoulli mask per replicate (default).
    Redraw,
    /// Reuse the template's realized mask in every replicate.
    FixedMask,
}

/// Settings for a bootstrap batch.
#[derive(Debug, Clone)]
pub struct BootstrapSettings {
    /// Per-visit participation probability used in `Redraw` mode.
    pub p_part: f64,
    pub mode: SchemaMode,
    /// Horizon of the per-replicate microsimulation; must cover the last
    /// visit time.
    pub horizon: f64,
    /// Starting point of every per-replicate fit.
    pub initial_theta: ThetaParams,
    pub ls_options: FitOptions,
    pub ml_options: FitOptions,
}

impl BootstrapSettings {
    pub fn new(p_part: f64, horizon: f64, initial_theta: ThetaParams) -> Self {
        Self {
            p_part,
            mode: SchemaMode::Redraw,
            horizon,
            initial_theta,
            ls_options: FitOptions::for_kind(ObjectiveKind::LeastSquares),
            ml_options: FitOptions::for_kind(ObjectiveKind::MaxLikelihood),
        }
    }
}

/// Both estimates from one bootstrap replicate. A replicate whose fit
/// failed outright carries NaN estimates and a false converged flag; it
/// never aborts the batch.
#[derive(Debug, Clone, Copy)]
pub struct BootstrapRun {
    pub b_index: usize,
    pub theta_ls: ThetaParams,
    pub theta_ml: ThetaParams,
    pub ls_converged: bool,
    pub ml_converged: bool,
    /// Seed of this replicate, derived from (master seed, b_index).
    pub seed: u64,
}

impl BootstrapRun {
    pub fn theta(&self, kind: ObjectiveKind) -> ThetaParams {
        match kind {
            ObjectiveKind::LeastSquares => self.theta_ls,
            ObjectiveKind::MaxLikelihood => self.theta_ml,
        }
    }

    pub fn converged(&self, kind: ObjectiveKind) -> bool {
        match kind {
            ObjectiveKind::LeastSquares => self.ls_converged,
            ObjectiveKind::MaxLikelihood => self.ml_converged,
        }
    }
}

fn failed_theta() -> ThetaParams {
    ThetaParams { onset_age: f64::NAN, incidence_slope: f64::NAN, mortality_rate_ratio: f64::NAN }
}

fn flatten_fit(res: Result<EstimationResult>) -> (ThetaParams, bool) {
    match res {
        Ok(r) => (r.theta_hat, r.converged),
        Err(_) => (failed_theta(), false),
    }
}

fn one_replicate(
    b: usize,
    theta_star: &ThetaParams,
    template: &VisitPlan,
    settings: &BootstrapSettings,
    seed: u64,
) -> Result<BootstrapRun> {
    let sim_seed = derive_seed(seed, 0);
    let trajectories =
        simulate_population(template.n_subjects(), theta_star, settings.horizon, sim_seed)?;

    let plan = match settings.mode {
        SchemaMode::FixedMask => template.clone(),
        SchemaMode::Redraw => {
            let mut rng = RngStream::new(derive_seed(seed, 1));
            draw_visit_plan(
                template.n_subjects(),
                template.visit_times(),
                settings.p_part,
                &mut rng,
            )?
        }
    };

    let table = aggregate_acs(&trajectories, &plan)?;
    let (theta_ls, ls_converged) = flatten_fit(fit(
        ObjectiveKind::LeastSquares,
        &table,
        settings.initial_theta,
        &settings.ls_options,
    ));
    let (theta_ml, ml_converged) = flatten_fit(fit(
        ObjectiveKind::MaxLikelihood,
        &table,
        settings.initial_theta,
        &settings.ml_options,
    ));
    Ok(BootstrapRun { b_index: b, theta_ls, theta_ml, ls_converged, ml_converged, seed })
}

/// Runs `b_total` replicates in parallel. The result is identical for any
/// worker count; per-replicate hard failures (zero-participation visits
/// and the like) are recorded as non-converged runs.
pub fn run_bootstrap(
    theta_star: &ThetaParams,
    plan_template: &VisitPlan,
    settings: &BootstrapSettings,
    b_total: usize,
    master_seed: u64,
) -> Result<Vec<BootstrapRun>> {
    if b_total == 0 {
        return Err(Error::InvalidParameter("bootstrap needs at least one replicate".into()));
    }
    if settings.horizon < *plan_template.visit_times().last().expect("visit times nonempty") {
        return Err(Error::InvalidParameter(
            "bootstrap horizon must cover the last visit time".into(),
        ));
    }
    Ok((0..b_total)
        .into_par_iter()
        .map(|b| {
            let seed = derive_seed(master_seed, b as u64);
            one_replicate(b, theta_star, plan_template, settings, seed).unwrap_or(BootstrapRun {
                b_index: b,
                theta_ls: failed_theta(),
                theta_ml: failed_theta(),
                ls_converged: false,
                ml_converged: false,
                seed,
            })
        })
        .collect())
}

/// Empirical quantiles of one parameter component.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ComponentQuantiles {
    pub q025: f64,
    pub median: f64,
    pub q975: f64,
}

/// Per-component quantile summary over the converged runs of one
/// estimator.
#[derive(Debug, Clone, Copy)]
pub struct QuantileSummary {
    pub onset_age: ComponentQuantiles,
    pub incidence_slope: ComponentQuantiles,
    pub mortality_rate_ratio: ComponentQuantiles,
    pub b_total: usize,
    pub n_converged: usize,
}

impl QuantileSummary {
    pub fn component(&self, j: usize) -> ComponentQuantiles {
        match j {
            0 => self.onset_age,
            1 => self.incidence_slope,
            2 => self.mortality_rate_ratio,
            _ => panic!("component index {j} out of range"),
        }
    }
}

/// Empirical quantile with linear interpolation between order statistics:
/// for sorted x of length n, q(p) interpolates between the floor and ceil
/// neighbors of h = p·(n−1).
pub fn empirical_quantile(sorted: &[f64], p: f64) -> f64 {
    assert!(!sorted.is_empty(), "quantile of an empty sample");
    assert!((0.0..=1.0).contains(&p), "quantile level {p} outside [0, 1]");
    let h = p * (sorted.len() - 1) as f64;
    let lo = h.floor() as usize;
    let hi = h.ceil() as usize;
    if lo == hi {
        sorted[lo]
    } else {
        sorted[lo] + (h - lo as f64) * (sorted[hi] - sorted[lo])
    }
}

fn component_quantiles(values: &mut Vec<f64>) -> ComponentQuantiles {
    values.sort_by(f64::total_cmp);
    ComponentQuantiles {
        q025: empirical_quantile(values, 0.025),
        median: empirical_quantile(values, 0.5),
        q975: empirical_quantile(values, 0.975),
    }
}

/// Summarizes the converged runs of the requested estimator by empirical
/// (2.5, 50, 97.5)% quantiles per component. Non-converged runs are
/// excluded and counted via `n_converged`.
pub fn quantile_summary(runs: &[BootstrapRun], which: ObjectiveKind) -> Result<QuantileSummary> {
    let converged: Vec<ThetaParams> =
        runs.iter().filter(|r| r.converged(which)).map(|r| r.theta(which)).collect();
    if converged.is_empty() {
        return Err(Error::NoConvergedRuns);
    }
    let col = |f: fn(&ThetaParams) -> f64| -> ComponentQuantiles {
        let mut v: Vec<f64> = converged.iter().map(f).collect();
        component_quantiles(&mut v)
    };
    Ok(QuantileSummary {
        onset_age: col(|t| t.onset_age),
        incidence_slope: col(|t| t.incidence_slope),
        mortality_rate_ratio: col(|t| t.mortality_rate_ratio),
        b_total: runs.len(),
        n_converged: converged.len(),
    })
}
