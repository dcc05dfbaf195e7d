//! C ABI for the idmacs pipeline.
//!
//! Everything crosses the boundary as plain C data: parameter vectors as
//! a small value struct, count tables and bootstrap batches as opaque
//! handles with accessor functions, failures as status codes. The last
//! error message is kept per thread and can be copied out with
//! [`idmacs_last_error_message`].
//!
//! The matching header is generated into `include/idmacs.h` at build
//! time (cbindgen).

use std::cell::RefCell;
use std::os::raw::c_char;
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::ptr;
use std::slice;

use idmacs::bootstrap::{run_bootstrap, BootstrapRun, BootstrapSettings, SchemaMode};
use idmacs::estimate::{default_initial_theta, fit, FitOptions, ObjectiveKind};
use idmacs::microsim::{derive_seed, simulate_population, RngStream};
use idmacs::ode::{solve_idm, StateFractions};
use idmacs::rates::ThetaParams;
use idmacs::sampling::{aggregate_acs, draw_visit_plan, AcsTable, VisitPlan};

thread_local! {
    static LAST_ERROR: RefCell<String> = const { RefCell::new(String::new()) };
}

fn set_error(message: impl Into<String>) {
    LAST_ERROR.with(|slot| *slot.borrow_mut() = message.into());
}

/// Status codes returned by every fallible function.
#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum IdmacsStatus {
    Ok = 0,
    NullPointer = 1,
    InvalidArgument = 2,
    NumericalError = 3,
    BufferTooSmall = 4,
    Panic = 5,
}

fn status_of(err: &idmacs::Error) -> IdmacsStatus {
    match err {
        idmacs::Error::RootSolve(_) | idmacs::Error::NonFiniteObjective(_) => {
            IdmacsStatus::NumericalError
        }
        _ => IdmacsStatus::InvalidArgument,
    }
}

fn guard(body: impl FnOnce() -> IdmacsStatus) -> IdmacsStatus {
    match catch_unwind(AssertUnwindSafe(body)) {
        Ok(status) => status,
        Err(_) => {
            set_error("internal panic");
            IdmacsStatus::Panic
        }
    }
}

/// Copies the message of the most recent error on this thread into
/// `buffer` (NUL-terminated, truncated to `len`). Returns the full
/// message length in bytes, excluding the terminator.
///
/// # Safety
/// `buffer` must point to `len` writable bytes, or be NULL (only the
/// required length is returned then).
#[no_mangle]
pub unsafe extern "C" fn idmacs_last_error_message(buffer: *mut c_char, len: usize) -> usize {
    LAST_ERROR.with(|slot| {
        let message = slot.borrow();
        let bytes = message.as_bytes();
        if !buffer.is_null() && len > 0 {
            let n = bytes.len().min(len - 1);
            ptr::copy_nonoverlapping(bytes.as_ptr(), buffer.cast::<u8>(), n);
            *buffer.add(n) = 0;
        }
        bytes.len()
    })
}

/// The three-dimensional rate parameter: onset age (years), incidence
/// slope (per year²), mortality rate ratio.
#[repr(C)]
#[derive(Debug, Clone, Copy)]
pub struct IdmacsTheta {
    pub onset_age: f64,
    pub incidence_slope: f64,
    pub mortality_rate_ratio: f64,
}

impl IdmacsTheta {
    fn to_params(self) -> Result<ThetaParams, idmacs::Error> {
        ThetaParams::new(self.onset_age, self.incidence_slope, self.mortality_rate_ratio)
    }
}

impl From<ThetaParams> for IdmacsTheta {
    fn from(t: ThetaParams) -> Self {
        Self {
            onset_age: t.onset_age,
            incidence_slope: t.incidence_slope,
            mortality_rate_ratio: t.mortality_rate_ratio,
        }
    }
}

/// The parameter vector behind the built-in simulation defaults
/// (onset 30, slope 1/2000, ratio e^0.7).
#[no_mangle]
pub extern "C" fn idmacs_theta_reference() -> IdmacsTheta {
    ThetaParams::reference().into()
}

/// Which objective a fit optimizes.
#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum IdmacsObjective {
    LeastSquares = 0,
    MaxLikelihood = 1,
}

impl From<IdmacsObjective> for ObjectiveKind {
    fn from(o: IdmacsObjective) -> Self {
        match o {
            IdmacsObjective::LeastSquares => ObjectiveKind::LeastSquares,
            IdmacsObjective::MaxLikelihood => ObjectiveKind::MaxLikelihood,
        }
    }
}

/// Opaque per-visit count table.
pub struct IdmacsAcsTable {
    inner: AcsTable,
}

/// Evaluates the model fractions p(t) at `n_times` output times, writing
/// `3 * n_times` values (p1, p2, p3 per time, row-major) to `out`.
/// Output times must be multiples of `step` and increasing.
///
/// # Safety
/// `times` must point to `n_times` readable f64; `out` to `3 * n_times`
/// writable f64.
#[no_mangle]
pub unsafe extern "C" fn idmacs_solve_fractions(
    theta: IdmacsTheta,
    times: *const f64,
    n_times: usize,
    step: f64,
    out: *mut f64,
) -> IdmacsStatus {
    if times.is_null() || out.is_null() {
        set_error("times/out must not be NULL");
        return IdmacsStatus::NullPointer;
    }
    let times = slice::from_raw_parts(times, n_times);
    let out = slice::from_raw_parts_mut(out, 3 * n_times);
    guard(|| {
        let params = match theta.to_params() {
            Ok(p) => p,
            Err(e) => {
                set_error(e.to_string());
                return IdmacsStatus::InvalidArgument;
            }
        };
        let t_end = times.last().copied().unwrap_or(0.0).max(step);
        match solve_idm(&params, StateFractions::INITIAL, 0.0, t_end, step, times) {
            Ok(path) => {
                for (k, p) in path.values().iter().enumerate() {
                    out[3 * k..3 * k + 3].copy_from_slice(&p.as_array());
                }
                IdmacsStatus::Ok
            }
            Err(e) => {
                set_error(e.to_string());
                status_of(&e)
            }
        }
    })
}

/// Simulates a cohort of `n_subjects` through the model, samples each
/// subject at each visit with probability `p_part`, and returns the
/// aggregated count table as an opaque handle in `out_table` (free with
/// [`idmacs_acs_free`]). Deterministic in `seed`.
///
/// # Safety
/// `visit_times` must point to `n_visits` readable f64; `out_table` to a
/// writable pointer slot.
#[no_mangle]
pub unsafe extern "C" fn idmacs_simulate_acs(
    theta: IdmacsTheta,
    n_subjects: usize,
    visit_times: *const f64,
    n_visits: usize,
    p_part: f64,
    seed: u64,
    out_table: *mut *mut IdmacsAcsTable,
) -> IdmacsStatus {
    if visit_times.is_null() || out_table.is_null() {
        set_error("visit_times/out_table must not be NULL");
        return IdmacsStatus::NullPointer;
    }
    let visit_times = slice::from_raw_parts(visit_times, n_visits);
    guard(|| {
        let build = || -> Result<AcsTable, idmacs::Error> {
            let params = theta.to_params()?;
            let horizon = *visit_times.last().ok_or_else(|| {
                idmacs::Error::InvalidParameter("visit_times must be nonempty".into())
            })?;
            let trajectories =
                simulate_population(n_subjects, &params, horizon, derive_seed(seed, 0))?;
            let mut rng = RngStream::new(derive_seed(seed, 1));
            let plan = draw_visit_plan(n_subjects, visit_times, p_part, &mut rng)?;
            aggregate_acs(&trajectories, &plan)
        };
        match build() {
            Ok(table) => {
                *out_table = Box::into_raw(Box::new(IdmacsAcsTable { inner: table }));
                IdmacsStatus::Ok
            }
            Err(e) => {
                set_error(e.to_string());
                status_of(&e)
            }
        }
    })
}

/// Builds a count table from raw arrays: `counts` holds `3 * n_visits`
/// values (non-diseased, diseased, dead per visit, row-major).
///
/// # Safety
/// `visit_times` must point to `n_visits` readable f64, `counts` to
/// `3 * n_visits` readable u64, `out_table` to a writable pointer slot.
#[no_mangle]
pub unsafe extern "C" fn idmacs_acs_from_counts(
    visit_times: *const f64,
    counts: *const u64,
    n_visits: usize,
    out_table: *mut *mut IdmacsAcsTable,
) -> IdmacsStatus {
    if visit_times.is_null() || counts.is_null() || out_table.is_null() {
        set_error("visit_times/counts/out_table must not be NULL");
        return IdmacsStatus::NullPointer;
    }
    let visit_times = slice::from_raw_parts(visit_times, n_visits);
    let counts = slice::from_raw_parts(counts, 3 * n_visits);
    guard(|| {
        let rows: Vec<[u64; 3]> = counts.chunks_exact(3).map(|c| [c[0], c[1], c[2]]).collect();
        match AcsTable::new(visit_times.to_vec(), rows) {
            Ok(table) => {
                *out_table = Box::into_raw(Box::new(IdmacsAcsTable { inner: table }));
                IdmacsStatus::Ok
            }
            Err(e) => {
                set_error(e.to_string());
                status_of(&e)
            }
        }
    })
}

/// Number of visits in the table.
///
/// # Safety
/// `table` must be a live handle from this library.
#[no_mangle]
pub unsafe extern "C" fn idmacs_acs_n_visits(table: *const IdmacsAcsTable) -> usize {
    if table.is_null() {
        return 0;
    }
    (*table).inner.n_visits()
}

/// Copies the visit's counts (non-diseased, diseased, dead) into `out3`.
///
/// # Safety
/// `table` must be a live handle; `out3` must point to 3 writable u64.
#[no_mangle]
pub unsafe extern "C" fn idmacs_acs_counts(
    table: *const IdmacsAcsTable,
    visit: usize,
    out3: *mut u64,
) -> IdmacsStatus {
    if table.is_null() || out3.is_null() {
        set_error("table/out3 must not be NULL");
        return IdmacsStatus::NullPointer;
    }
    let inner = &(*table).inner;
    if visit >= inner.n_visits() {
        set_error(format!("visit {visit} out of range (n = {})", inner.n_visits()));
        return IdmacsStatus::InvalidArgument;
    }
    let counts = inner.counts(visit);
    slice::from_raw_parts_mut(out3, 3).copy_from_slice(&counts);
    IdmacsStatus::Ok
}

/// The visit time of column `visit`, or NaN when out of range.
///
/// # Safety
/// `table` must be a live handle from this library.
#[no_mangle]
pub unsafe extern "C" fn idmacs_acs_visit_time(table: *const IdmacsAcsTable, visit: usize) -> f64 {
    if table.is_null() {
        return f64::NAN;
    }
    let inner = &(*table).inner;
    if visit >= inner.n_visits() {
        return f64::NAN;
    }
    inner.visit_times()[visit]
}

/// Releases a table handle. NULL is a no-op.
///
/// # Safety
/// `table` must be NULL or a handle not freed before.
#[no_mangle]
pub unsafe extern "C" fn idmacs_acs_free(table: *mut IdmacsAcsTable) {
    if !table.is_null() {
        drop(Box::from_raw(table));
    }
}

/// Result of one fit.
#[repr(C)]
#[derive(Debug, Clone, Copy)]
pub struct IdmacsFitResult {
    pub theta: IdmacsTheta,
    /// Sum of squares (least squares) or negated log-likelihood.
    pub objective_value: f64,
    pub n_evaluations: usize,
    pub converged: bool,
}

/// Fits the parameter to a count table. `initial` may be NULL for the
/// default starting point; `ode_step` ≤ 0 selects the default 0.1.
///
/// # Safety
/// `table` must be a live handle; `out` must point to a writable result;
/// `initial`, when non-NULL, to a readable IdmacsTheta.
#[no_mangle]
pub unsafe extern "C" fn idmacs_fit(
    table: *const IdmacsAcsTable,
    objective: IdmacsObjective,
    initial: *const IdmacsTheta,
    ode_step: f64,
    out: *mut IdmacsFitResult,
) -> IdmacsStatus {
    if table.is_null() || out.is_null() {
        set_error("table/out must not be NULL");
        return IdmacsStatus::NullPointer;
    }
    let inner = &(*table).inner;
    let start =
        if initial.is_null() { Ok(default_initial_theta()) } else { (*initial).to_params() };
    guard(|| {
        let start = match start {
            Ok(s) => s,
            Err(e) => {
                set_error(e.to_string());
                return IdmacsStatus::InvalidArgument;
            }
        };
        let kind: ObjectiveKind = objective.into();
        let mut options = FitOptions::for_kind(kind);
        if ode_step > 0.0 {
            options.ode_step = ode_step;
        }
        match fit(kind, inner, start, &options) {
            Ok(r) => {
                *out = IdmacsFitResult {
                    theta: r.theta_hat.into(),
                    objective_value: r.objective_value,
                    n_evaluations: r.n_evaluations,
                    converged: r.converged,
                };
                IdmacsStatus::Ok
            }
            Err(e) => {
                set_error(e.to_string());
                status_of(&e)
            }
        }
    })
}

/// Opaque batch of bootstrap replicates.
pub struct IdmacsBootstrap {
    runs: Vec<BootstrapRun>,
}

/// Runs `b_total` schema-preserving bootstrap replicates at `theta_star`
/// (fresh Bernoulli masks per replicate) and returns an opaque batch in
/// `out_batch` (free with [`idmacs_bootstrap_free`]). Deterministic in
/// `master_seed` regardless of thread count.
///
/// # Safety
/// `visit_times` must point to `n_visits` readable f64; `out_batch` to a
/// writable pointer slot.
#[no_mangle]
pub unsafe extern "C" fn idmacs_bootstrap_run(
    theta_star: IdmacsTheta,
    n_subjects: usize,
    visit_times: *const f64,
    n_visits: usize,
    p_part: f64,
    b_total: usize,
    master_seed: u64,
    out_batch: *mut *mut IdmacsBootstrap,
) -> IdmacsStatus {
    if visit_times.is_null() || out_batch.is_null() {
        set_error("visit_times/out_batch must not be NULL");
        return IdmacsStatus::NullPointer;
    }
    let visit_times = slice::from_raw_parts(visit_times, n_visits);
    guard(|| {
        let build = || -> Result<Vec<BootstrapRun>, idmacs::Error> {
            let star = theta_star.to_params()?;
            let horizon = *visit_times.last().ok_or_else(|| {
                idmacs::Error::InvalidParameter("visit_times must be nonempty".into())
            })?;
            let template = VisitPlan::new(
                n_subjects,
                visit_times.to_vec(),
                vec![false; n_subjects * n_visits],
            )?;
            let mut settings = BootstrapSettings::new(p_part, horizon, default_initial_theta());
            settings.mode = SchemaMode::Redraw;
            run_bootstrap(&star, &template, &settings, b_total, master_seed)
        };
        match build() {
            Ok(runs) => {
                *out_batch = Box::into_raw(Box::new(IdmacsBootstrap { runs }));
                IdmacsStatus::Ok
            }
            Err(e) => {
                set_error(e.to_string());
                status_of(&e)
            }
        }
    })
}

/// Number of replicates in the batch.
///
/// # Safety
/// `batch` must be a live handle from this library.
#[no_mangle]
pub unsafe extern "C" fn idmacs_bootstrap_len(batch: *const IdmacsBootstrap) -> usize {
    if batch.is_null() {
        return 0;
    }
    (*batch).runs.len()
}

/// Copies replicate `b`'s estimate of the requested kind into
/// `out_theta` and its convergence flag into `out_converged`.
///
/// # Safety
/// `batch` must be a live handle; `out_theta` and `out_converged` must
/// be writable.
#[no_mangle]
pub unsafe extern "C" fn idmacs_bootstrap_get(
    batch: *const IdmacsBootstrap,
    b: usize,
    objective: IdmacsObjective,
    out_theta: *mut IdmacsTheta,
    out_converged: *mut bool,
) -> IdmacsStatus {
    if batch.is_null() || out_theta.is_null() || out_converged.is_null() {
        set_error("batch/out pointers must not be NULL");
        return IdmacsStatus::NullPointer;
    }
    let runs = &(*batch).runs;
    if b >= runs.len() {
        set_error(format!("replicate {b} out of range (B = {})", runs.len()));
        return IdmacsStatus::InvalidArgument;
    }
    let kind: ObjectiveKind = objective.into();
    *out_theta = runs[b].theta(kind).into();
    *out_converged = runs[b].converged(kind);
    IdmacsStatus::Ok
}

/// Per-component empirical quantiles over the converged replicates of
/// one estimator: arrays are indexed by component (onset age, incidence
/// slope, mortality rate ratio).
#[repr(C)]
#[derive(Debug, Clone, Copy)]
pub struct IdmacsQuantiles {
    pub q025: [f64; 3],
    pub median: [f64; 3],
    pub q975: [f64; 3],
    pub n_converged: usize,
    pub b_total: usize,
}

/// Summarizes a batch by empirical quantiles.
///
/// # Safety
/// `batch` must be a live handle; `out` must point to a writable
/// IdmacsQuantiles.
#[no_mangle]
pub unsafe extern "C" fn idmacs_bootstrap_quantiles(
    batch: *const IdmacsBootstrap,
    objective: IdmacsObjective,
    out: *mut IdmacsQuantiles,
) -> IdmacsStatus {
    if batch.is_null() || out.is_null() {
        set_error("batch/out must not be NULL");
        return IdmacsStatus::NullPointer;
    }
    let runs = &(*batch).runs;
    guard(|| match idmacs::bootstrap::quantile_summary(runs, objective.into()) {
        Ok(s) => {
            let mut q = IdmacsQuantiles {
                q025: [0.0; 3],
                median: [0.0; 3],
                q975: [0.0; 3],
                n_converged: s.n_converged,
                b_total: s.b_total,
            };
            for j in 0..3 {
                let c = s.component(j);
                q.q025[j] = c.q025;
                q.median[j] = c.median;
                q.q975[j] = c.q975;
            }
            *out = q;
            IdmacsStatus::Ok
        }
        Err(e) => {
            set_error(e.to_string());
            status_of(&e)
        }
    })
}

/// Releases a bootstrap batch. NULL is a no-op.
///
/// # Safety
/// `batch` must be NULL or a handle not freed before.
#[no_mangle]
pub unsafe extern "C" fn idmacs_bootstrap_free(batch: *mut IdmacsBootstrap) {
    if !batch.is_null() {
        drop(Box::from_raw(batch));
    }
}
