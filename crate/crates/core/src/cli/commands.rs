//! The four batch commands behind the binary: simulate, estimate,
//! bootstrap, report. Each is a plain function over a configuration and
//! file paths so the whole surface is testable in-process.

use std::path::{Path, PathBuf};

use crate::bootstrap::{
    quantile_summary, run_bootstrap, BootstrapSettings, QuantileSummary, SchemaMode,
};
use crate::cli::config::{ObjectiveChoice, RunConfig};
use crate::cli::csvio;
use crate::error::{Error, Result};
use crate::estimate::{fit, EstimationResult, FitOptions, ObjectiveKind};
use crate::microsim::{derive_seed, simulate_population, RngStream};
use crate::ode::{solve_idm, StateFractions};
use crate::rates::ThetaParams;
use crate::sampling::{aggregate_acs, draw_visit_plan, visit_histogram, VisitPlan};

/// Display scale of the incidence slope in the human-readable summary.
const SLOPE_DISPLAY_SCALE: f64 = 10_000.0;

pub struct OutPaths {
    dir: PathBuf,
}

impl OutPaths {
    pub fn new(dir: &Path) -> Result<Self> {
        std::fs::create_dir_all(dir)?;
        Ok(Self { dir: dir.to_path_buf() })
    }

    pub fn file(&self, name: &str) -> PathBuf {
        self.dir.join(name)
    }
}

/// Simulates a cohort and its visit schema, writing the count table and
/// the visits-attended histogram. Deterministic in the configured seed,
/// which is echoed to stdout.
pub fn cmd_simulate(config: &RunConfig, out: &OutPaths) -> Result<()> {
    config.validate()?;
    let trajectories = simulate_population(
        config.n_subjects,
        &config.theta_true,
        config.horizon(),
        derive_seed(config.master_seed, 0),
    )?;
    let mut plan_rng = RngStream::new(derive_seed(config.master_seed, 1));
    let plan =
        draw_visit_plan(config.n_subjects, &config.visit_times, config.p_part, &mut plan_rng)?;

    let table = aggregate_acs(&trajectories, &plan)?;
    csvio::write_acs_table(&out.file("acs_table.csv"), &table)?;
    csvio::write_visit_histogram(&out.file("visit_histogram.csv"), &visit_histogram(&plan))?;

    println!("seed: {}", config.master_seed);
    println!("wrote {}", out.file("acs_table.csv").display());
    println!("wrote {}", out.file("visit_histogram.csv").display());
    Ok(())
}

fn requested_kinds(choice: ObjectiveChoice) -> Vec<ObjectiveKind> {
    let mut kinds = Vec::new();
    if choice.includes_ls() {
        kinds.push(ObjectiveKind::LeastSquares);
    }
    if choice.includes_ml() {
        kinds.push(ObjectiveKind::MaxLikelihood);
    }
    kinds
}

/// Fits the requested objectives to a count table file and writes the
/// estimates plus the data behind the fitted-curve figure.
pub fn cmd_estimate(config: &RunConfig, acs_path: &Path, out: &OutPaths) -> Result<()> {
    config.validate()?;
    let table = csvio::read_acs_table(acs_path)?;
    if table.n_visits() < 2 {
        return Err(Error::InvalidParameter(format!(
            "estimation needs at least 2 visits, the table has {}",
            table.n_visits()
        )));
    }
    if let Some(k) = table.totals().iter().position(|&n| n == 0) {
        return Err(Error::ZeroTotalVisit { visit_index: k, time: table.visit_times()[k] });
    }

    let mut results: Vec<EstimationResult> = Vec::new();
    for kind in requested_kinds(config.objective) {
        let mut options = FitOptions::for_kind(kind);
        options.ode_step = config.ode_step;
        results.push(fit(kind, &table, config.theta_initial, &options)?);
    }
    csvio::write_estimates(&out.file("estimates.csv"), &results)?;

    // one curve per estimate, dense on whole years over the visit span
    let t_end = *table.visit_times().last().expect("nonempty");
    let curve_times: Vec<f64> = (0..=(t_end.round() as usize)).map(|t| t as f64).collect();
    let curves: Vec<(ObjectiveKind, Vec<(f64, [f64; 3])>)> = results
        .iter()
        .map(|r| {
            let path = solve_idm(
                &r.theta_hat,
                StateFractions::INITIAL,
                0.0,
                t_end,
                config.ode_step,
                &curve_times,
            )?;
            Ok((
                r.objective_kind,
                path.iter().map(|(t, p)| (t, p.as_array())).collect::<Vec<_>>(),
            ))
        })
        .collect::<Result<_>>()?;
    csvio::write_model_curves(&out.file("model_curves.csv"), &curves)?;
    csvio::write_observed_points(&out.file("observed_points.csv"), &table)?;

    for r in &results {
        let t = r.theta_hat;
        println!(
            "{}: onset {:.2} y, slope {:.3} per 10,000/y², mortality ratio {:.3} ({} evals, converged: {})",
            r.objective_kind.label(),
            t.onset_age,
            t.incidence_slope * SLOPE_DISPLAY_SCALE,
            t.mortality_rate_ratio,
            r.n_evaluations,
            r.converged
        );
    }
    Ok(())
}

/// Runs the schema-preserving bootstrap at the configured generator and
/// writes replicate-level estimates plus the quantile summary.
pub fn cmd_bootstrap(config: &RunConfig, out: &OutPaths) -> Result<()> {
    config.validate()?;
    if config.b_replicates == 0 {
        return Err(Error::Config("b_replicates must be >= 1".into()));
    }
    let theta_star = config.bootstrap_generator();
    ThetaParams::new(
        theta_star.onset_age,
        theta_star.incidence_slope,
        theta_star.mortality_rate_ratio,
    )
    .map_err(|e| Error::Config(format!("theta_star: {e}")))?;

    // the template carries the schema (n, visit times); masks are redrawn
    // per replicate
    let template = VisitPlan::new(
        config.n_subjects,
        config.visit_times.clone(),
        vec![false; config.n_subjects * config.visit_times.len()],
    )?;
    let mut settings =
        BootstrapSettings::new(config.p_part, config.horizon(), config.theta_initial);
    settings.mode = SchemaMode::Redraw;
    settings.ls_options.ode_step = config.ode_step;
    settings.ml_options.ode_step = config.ode_step;

    let runs = run_bootstrap(
        &theta_star,
        &template,
        &settings,
        config.b_replicates,
        config.master_seed,
    )?;
    csvio::write_replicates(&out.file("replicates.csv"), &runs)?;

    let ls = quantile_summary(&runs, ObjectiveKind::LeastSquares);
    let ml = quantile_summary(&runs, ObjectiveKind::MaxLikelihood);
    if ls.is_err() && ml.is_err() {
        return Err(Error::NoConvergedRuns);
    }
    write_summary(&out.file("summary.csv"), &theta_star, ls.as_ref().ok(), ml.as_ref().ok())?;

    println!("seed: {}", config.master_seed);
    print_summary(&theta_star, ls.as_ref().ok(), ml.as_ref().ok());
    Ok(())
}

fn summary_cells(s: Option<&QuantileSummary>, j: usize, scale: f64) -> String {
    match s {
        Some(s) => {
            let c = s.component(j);
            format!("{},{},{}", c.median * scale, c.q025 * scale, c.q975 * scale)
        }
        None => ",,".into(),
    }
}

/// The quantile summary in the shape of the published table: one row per
/// component, LS and ML medians with their 95% bands. The slope row is
/// scaled per 10,000 and named accordingly; replicate-level output stays
/// in natural units.
fn write_summary(
    path: &Path,
    theta_star: &ThetaParams,
    ls: Option<&QuantileSummary>,
    ml: Option<&QuantileSummary>,
) -> Result<()> {
    let mut out = String::from(
        "parameter,reference,ls_median,ls_q025,ls_q975,ml_median,ml_q025,ml_q975\n",
    );
    let rows = [
        ("theta1", theta_star.onset_age, 1.0),
        ("theta2_per_10000", theta_star.incidence_slope, SLOPE_DISPLAY_SCALE),
        ("theta3", theta_star.mortality_rate_ratio, 1.0),
    ];
    for (j, (name, reference, scale)) in rows.into_iter().enumerate() {
        out.push_str(&format!(
            "{},{},{},{}\n",
            name,
            reference * scale,
            summary_cells(ls, j, scale),
            summary_cells(ml, j, scale)
        ));
    }
    std::fs::write(path, out)?;
    Ok(())
}

fn print_summary(
    theta_star: &ThetaParams,
    ls: Option<&QuantileSummary>,
    ml: Option<&QuantileSummary>,
) {
    let fmt = |s: Option<&QuantileSummary>, j: usize, scale: f64| -> String {
        match s {
            Some(s) => {
                let c = s.component(j);
                format!("{:.3} ({:.3}, {:.3})", c.median * scale, c.q025 * scale, c.q975 * scale)
            }
            None => "no converged runs".into(),
        }
    };
    println!("parameter            generator   LS median (95% band)        ML median (95% band)");
    let rows = [
        ("theta1", theta_star.onset_age, 1.0),
        ("theta2 (per 10,000)", theta_star.incidence_slope, SLOPE_DISPLAY_SCALE),
        ("theta3", theta_star.mortality_rate_ratio, 1.0),
    ];
    for (j, (name, reference, scale)) in rows.into_iter().enumerate() {
        println!(
            "{:<20} {:<11.4} {:<27} {:<27}",
            name,
            reference * scale,
            fmt(ls, j, scale),
            fmt(ml, j, scale)
        );
    }
    if let (Some(ls), Some(ml)) = (ls, ml) {
        println!(
            "converged: ls {}/{}, ml {}/{}",
            ls.n_converged, ls.b_total, ml.n_converged, ml.b_total
        );
    }
}

/// Freedman–Diaconis histogram of one replicate column: returns
/// (bin left edge, count) pairs covering [min, max]. A constant column
/// collapses to a single occupied bin.
pub fn fd_histogram(values: &[f64]) -> Vec<(f64, u64)> {
    assert!(!values.is_empty(), "histogram of an empty column");
    let mut sorted = values.to_vec();
    sorted.sort_by(f64::total_cmp);
    let n = sorted.len();
    let (min, max) = (sorted[0], sorted[n - 1]);
    let iqr = crate::bootstrap::empirical_quantile(&sorted, 0.75)
        - crate::bootstrap::empirical_quantile(&sorted, 0.25);
    let width = 2.0 * iqr / (n as f64).cbrt();
    if width <= 0.0 || max == min {
        return vec![(min, n as u64)];
    }
    let nbins = ((max - min) / width).ceil().max(1.0) as usize;
    let mut counts = vec![0u64; nbins];
    for &x in &sorted {
        let idx = (((x - min) / width) as usize).min(nbins - 1);
        counts[idx] += 1;
    }
    counts.into_iter().enumerate().map(|(i, c)| (min + i as f64 * width, c)).collect()
}

/// Bins each component of each estimator's converged replicates into
/// plot-ready histogram files (`hist_<kind>_theta<j>.csv`).
pub fn cmd_report(replicates_path: &Path, out: &OutPaths) -> Result<()> {
    let cols = csvio::read_replicates(replicates_path)?;
    let mut wrote_any = false;
    for (kind, rows) in [("ls", &cols.ls), ("ml", &cols.ml)] {
        if rows.is_empty() {
            continue;
        }
        for j in 0..3 {
            let values: Vec<f64> = rows.iter().map(|r| r[j]).collect();
            let hist = fd_histogram(&values);
            let mut text = String::from("bin_left,count\n");
            for (left, count) in &hist {
                text.push_str(&format!("{left},{count}\n"));
            }
            let name = format!("hist_{}_theta{}.csv", kind, j + 1);
            std::fs::write(out.file(&name), text)?;
            wrote_any = true;
        }
    }
    if !wrote_any {
        return Err(Error::InvalidParameter(
            "replicates file contains no converged rows".into(),
        ));
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use tempfile::tempdir;

    fn tiny_config() -> RunConfig {
        let mut c = RunConfig::default();
        c.n_subjects = 60;
        c.b_replicates = 2;
        c
    }

    #[test]
    fn simulate_writes_both_tables() {
        let dir = tempdir().unwrap();
        let out = OutPaths::new(dir.path()).unwrap();
        cmd_simulate(&tiny_config(), &out).unwrap();
        let table = csvio::read_acs_table(&out.file("acs_table.csv")).unwrap();
        assert_eq!(table.n_visits(), 11);
        let hist = std::fs::read_to_string(out.file("visit_histogram.csv")).unwrap();
        assert!(hist.starts_with("visits,0,1,2,3,4,5,6,7,8,9,10,11\n"));
    }

    #[test]
    fn simulate_full_participation_totals_constant() {
        let dir = tempdir().unwrap();
        let out = OutPaths::new(dir.path()).unwrap();
        let mut config = tiny_config();
        config.p_part = 1.0;
        cmd_simulate(&config, &out).unwrap();
        let table = csvio::read_acs_table(&out.file("acs_table.csv")).unwrap();
        assert!(table.totals().iter().all(|&n| n == 60));
    }

    #[test]
    fn simulate_is_byte_deterministic() {
        let d1 = tempdir().unwrap();
        let d2 = tempdir().unwrap();
        let config = tiny_config();
        cmd_simulate(&config, &OutPaths::new(d1.path()).unwrap()).unwrap();
        cmd_simulate(&config, &OutPaths::new(d2.path()).unwrap()).unwrap();
        for name in ["acs_table.csv", "visit_histogram.csv"] {
            let a = std::fs::read(d1.path().join(name)).unwrap();
            let b = std::fs::read(d2.path().join(name)).unwrap();
            assert_eq!(a, b, "{name} differs between identical runs");
        }
    }

    #[test]
    fn estimate_rejects_zero_total_and_single_visit() {
        let dir = tempdir().unwrap();
        let out = OutPaths::new(dir.path()).unwrap();
        let acs = dir.path().join("acs.csv");
        std::fs::write(&acs, "state,0,10\nNon-diseased,5,0\nDiseased,0,0\nDead,0,0\n").unwrap();
        assert!(matches!(
            cmd_estimate(&tiny_config(), &acs, &out),
            Err(Error::ZeroTotalVisit { visit_index: 1, .. })
        ));
        std::fs::write(&acs, "state,0\nNon-diseased,5\nDiseased,0\nDead,0\n").unwrap();
        assert!(cmd_estimate(&tiny_config(), &acs, &out).is_err());
    }

    #[test]
    fn report_constant_column_single_bin() {
        let dir = tempdir().unwrap();
        let out = OutPaths::new(dir.path()).unwrap();
        let reps = dir.path().join("reps.csv");
        let mut text = String::from("b,kind,theta1,theta2,theta3,converged\n");
        for b in 0..5 {
            text.push_str(&format!("{b},ls,33.0,0.0006,2.2,true\n"));
        }
        std::fs::write(&reps, text).unwrap();
        cmd_report(&reps, &out).unwrap();
        let hist = std::fs::read_to_string(out.file("hist_ls_theta1.csv")).unwrap();
        assert_eq!(hist, "bin_left,count\n33,5\n");
    }

    #[test]
    fn fd_histogram_counts_partition_sample() {
        let mut rng = crate::microsim::RngStream::new(9);
        let values: Vec<f64> = (0..500).map(|_| rng.uniform()).collect();
        let hist = fd_histogram(&values);
        assert!(hist.len() > 3);
        assert_eq!(hist.iter().map(|(_, c)| c).sum::<u64>(), 500);
    }
}
