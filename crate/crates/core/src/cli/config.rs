//! Run configuration: a flat key-value file plus flag overrides.
//!
//! Every default matches the built-in study design: 600 invited
//! subjects, visits at 0, 10, …, 100 years, 50% participation per visit,
//! 1000 bootstrap replicates, RK4 step 0.1 years.

use std::fmt::Write as _;
use std::path::Path;

use crate::error::{Error, Result};
use crate::estimate::default_initial_theta;
use crate::rates::ThetaParams;

/// Which objective(s) a run estimates.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ObjectiveChoice {
    Ls,
    Ml,
    Both,
}

impl ObjectiveChoice {
    pub fn parse(s: &str) -> Result<Self> {
        match s.trim().to_ascii_lowercase().as_str() {
            "ls" => Ok(Self::Ls),
            "ml" => Ok(Self::Ml),
            "both" => Ok(Self::Both),
            other => Err(Error::Config(format!("objective must be ls, ml or both, got `{other}`"))),
        }
    }

    pub fn includes_ls(&self) -> bool {
        matches!(self, Self::Ls | Self::Both)
    }

    pub fn includes_ml(&self) -> bool {
        matches!(self, Self::Ml | Self::Both)
    }
}

#[derive(Debug, Clone)]
pub struct RunConfig {
    pub theta_true: ThetaParams,
    pub theta_initial: ThetaParams,
    /// Generator of the bootstrap replicates; falls back to `theta_true`
    /// when not set.
    pub theta_star: Option<ThetaParams>,
    pub n_subjects: usize,
    pub visit_times: Vec<f64>,
    pub p_part: f64,
    pub b_replicates: usize,
    pub master_seed: u64,
    pub ode_step: f64,
    pub objective: ObjectiveChoice,
}

impl Default for RunConfig {
    fn default() -> Self {
        Self {
            theta_true: ThetaParams::reference(),
            theta_initial: default_initial_theta(),
            theta_star: None,
            n_subjects: 600,
            visit_times: (0..=10).map(|k| 10.0 * k as f64).collect(),
            p_part: 0.5,
            b_replicates: 1000,
            master_seed: 42,
            ode_step: 0.1,
            objective: ObjectiveChoice::Both,
        }
    }
}

impl RunConfig {
    /// Simulation horizon: the last visit time.
    pub fn horizon(&self) -> f64 {
        *self.visit_times.last().expect("visit_times nonempty")
    }

    pub fn bootstrap_generator(&self) -> ThetaParams {
        self.theta_star.unwrap_or(self.theta_true)
    }

    /// Loads a key-value config file over the defaults. Lines are
    /// `key = value`; `#` starts a comment; unknown keys are rejected.
    pub fn from_file(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)?;
        let mut config = Self::default();
        for (idx, raw) in text.lines().enumerate() {
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let (key, value) = line.split_once('=').ok_or_else(|| {
                Error::Config(format!("{}:{}: expected `key = value`", path.display(), idx + 1))
            })?;
            config
                .apply(key.trim(), value.trim())
                .map_err(|e| Error::Config(format!("{}:{}: {e}", path.display(), idx + 1)))?;
        }
        config.validate()?;
        Ok(config)
    }

    fn apply(&mut self, key: &str, value: &str) -> Result<()> {
        match key {
            "theta_true" => self.theta_true = parse_theta(value)?,
            "theta_initial" => self.theta_initial = parse_theta(value)?,
            "theta_star" => self.theta_star = Some(parse_theta(value)?),
            "n_subjects" => self.n_subjects = parse_num(key, value)?,
            "visit_times" => self.visit_times = parse_f64_list(value)?,
            "p_part" => self.p_part = parse_num(key, value)?,
            "b_replicates" => self.b_replicates = parse_num(key, value)?,
            "master_seed" => self.master_seed = parse_num(key, value)?,
            "ode_step" => self.ode_step = parse_num(key, value)?,
            "objective" => self.objective = ObjectiveChoice::parse(value)?,
            other => return Err(Error::Config(format!("unknown key `{other}`"))),
        }
        Ok(())
    }

    pub fn validate(&self) -> Result<()> {
        let fail = |msg: String| Err(Error::Config(msg));
        if self.n_subjects == 0 {
            return fail("n_subjects must be >= 1".into());
        }
        if self.visit_times.is_empty() {
            return fail("visit_times must be nonempty".into());
        }
        if self.visit_times.iter().any(|t| !t.is_finite() || *t < 0.0) {
            return fail("visit times must be finite and >= 0".into());
        }
        if self.visit_times.windows(2).any(|w| w[0] >= w[1]) {
            return fail("visit times must be strictly increasing".into());
        }
        if !(0.0..=1.0).contains(&self.p_part) {
            return fail(format!("p_part must be in [0, 1], got {}", self.p_part));
        }
        if !(self.ode_step > 0.0) {
            return fail(format!("ode_step must be > 0, got {}", self.ode_step));
        }
        for (name, theta) in [("theta_true", &self.theta_true), ("theta_initial", &self.theta_initial)]
        {
            ThetaParams::new(theta.onset_age, theta.incidence_slope, theta.mortality_rate_ratio)
                .map_err(|e| Error::Config(format!("{name}: {e}")))?;
        }
        Ok(())
    }

    /// Renders the effective configuration in the config-file syntax.
    pub fn render(&self) -> String {
        let mut out = String::new();
        let theta = |t: &ThetaParams| format!("{},{},{}", t.onset_age, t.incidence_slope, t.mortality_rate_ratio);
        let _ = writeln!(out, "theta_true = {}", theta(&self.theta_true));
        let _ = writeln!(out, "theta_initial = {}", theta(&self.theta_initial));
        if let Some(star) = &self.theta_star {
            let _ = writeln!(out, "theta_star = {}", theta(star));
        }
        let _ = writeln!(out, "n_subjects = {}", self.n_subjects);
        let times: Vec<String> = self.visit_times.iter().map(|t| t.to_string()).collect();
        let _ = writeln!(out, "visit_times = {}", times.join(","));
        let _ = writeln!(out, "p_part = {}", self.p_part);
        let _ = writeln!(out, "b_replicates = {}", self.b_replicates);
        let _ = writeln!(out, "master_seed = {}", self.master_seed);
        let _ = writeln!(out, "ode_step = {}", self.ode_step);
        let kind = match self.objective {
            ObjectiveChoice::Ls => "ls",
            ObjectiveChoice::Ml => "ml",
            ObjectiveChoice::Both => "both",
        };
        let _ = writeln!(out, "objective = {kind}");
        out
    }
}

pub fn parse_theta(s: &str) -> Result<ThetaParams> {
    let parts = parse_f64_list(s)?;
    if parts.len() != 3 {
        return Err(Error::Config(format!("expected 3 comma-separated values, got {}", parts.len())));
    }
    ThetaParams::new(parts[0], parts[1], parts[2])
        .map_err(|e| Error::Config(format!("invalid theta: {e}")))
}

fn parse_f64_list(s: &str) -> Result<Vec<f64>> {
    s.split(',')
        .map(|p| {
            p.trim()
                .parse::<f64>()
                .map_err(|_| Error::Config(format!("`{}` is not a number", p.trim())))
        })
        .collect()
}

fn parse_num<T: std::str::FromStr>(key: &str, value: &str) -> Result<T> {
    value
        .parse::<T>()
        .map_err(|_| Error::Config(format!("`{value}` is not a valid value for {key}")))
}
