//! Exercises the C surface the way a foreign caller would: through raw
//! pointers and status codes.

use std::ptr;

use idmacs_ffi::*;

fn decade_times() -> Vec<f64> {
    (0..=10).map(|k| 10.0 * k as f64).collect()
}

fn last_error() -> String {
    let mut buf = vec![0i8; 256];
    let n = unsafe { idmacs_last_error_message(buf.as_mut_ptr(), buf.len()) };
    let bytes: Vec<u8> = buf[..n.min(255)].iter().map(|&c| c as u8).collect();
    String::from_utf8_lossy(&bytes).into_owned()
}

#[test]
fn solve_fractions_fills_simplex_rows() {
    let times = decade_times();
    let mut out = vec![0.0f64; 3 * times.len()];
    let status = unsafe {
        idmacs_solve_fractions(
            idmacs_theta_reference(),
            times.as_ptr(),
            times.len(),
            0.1,
            out.as_mut_ptr(),
        )
    };
    assert_eq!(status, IdmacsStatus::Ok);
    assert_eq!(out[0], 1.0);
    for row in out.chunks_exact(3) {
        let sum: f64 = row.iter().sum();
        assert!((sum - 1.0).abs() < 1e-9);
    }
    // dead fraction at t = 100 dominates
    assert!(out[3 * 10 + 2] > 0.9);
}

#[test]
fn simulate_fit_bootstrap_roundtrip() {
    let times = decade_times();
    let mut table: *mut IdmacsAcsTable = ptr::null_mut();
    let status = unsafe {
        idmacs_simulate_acs(
            idmacs_theta_reference(),
            600,
            times.as_ptr(),
            times.len(),
            0.5,
            42,
            &mut table,
        )
    };
    assert_eq!(status, IdmacsStatus::Ok);
    assert!(!table.is_null());
    assert_eq!(unsafe { idmacs_acs_n_visits(table) }, 11);
    assert_eq!(unsafe { idmacs_acs_visit_time(table, 3) }, 30.0);

    let mut first = [0u64; 3];
    assert_eq!(unsafe { idmacs_acs_counts(table, 0, first.as_mut_ptr()) }, IdmacsStatus::Ok);
    assert_eq!(first[1] + first[2], 0, "everyone starts non-diseased");
    assert!(first[0] > 250 && first[0] < 350, "t = 0 total {first:?}");

    let mut fit_out = IdmacsFitResult {
        theta: idmacs_theta_reference(),
        objective_value: 0.0,
        n_evaluations: 0,
        converged: false,
    };
    let status = unsafe {
        idmacs_fit(table, IdmacsObjective::LeastSquares, ptr::null(), 0.0, &mut fit_out)
    };
    assert_eq!(status, IdmacsStatus::Ok);
    assert!(fit_out.converged);
    assert!(fit_out.theta.mortality_rate_ratio > 1.0);

    let mut batch: *mut IdmacsBootstrap = ptr::null_mut();
    let status = unsafe {
        idmacs_bootstrap_run(
            fit_out.theta,
            600,
            times.as_ptr(),
            times.len(),
            0.5,
            8,
            99,
            &mut batch,
        )
    };
    assert_eq!(status, IdmacsStatus::Ok);
    assert_eq!(unsafe { idmacs_bootstrap_len(batch) }, 8);

    let mut theta = idmacs_theta_reference();
    let mut converged = false;
    assert_eq!(
        unsafe {
            idmacs_bootstrap_get(batch, 3, IdmacsObjective::MaxLikelihood, &mut theta, &mut converged)
        },
        IdmacsStatus::Ok
    );
    assert!(converged);

    let mut quantiles = IdmacsQuantiles {
        q025: [0.0; 3],
        median: [0.0; 3],
        q975: [0.0; 3],
        n_converged: 0,
        b_total: 0,
    };
    assert_eq!(
        unsafe { idmacs_bootstrap_quantiles(batch, IdmacsObjective::LeastSquares, &mut quantiles) },
        IdmacsStatus::Ok
    );
    assert_eq!(quantiles.b_total, 8);
    for j in 0..3 {
        assert!(quantiles.q025[j] <= quantiles.median[j]);
        assert!(quantiles.median[j] <= quantiles.q975[j]);
    }

    unsafe {
        idmacs_bootstrap_free(batch);
        idmacs_acs_free(table);
    }
}

#[test]
fn null_pointers_and_bad_arguments_are_reported() {
    let times = decade_times();
    let status = unsafe {
        idmacs_solve_fractions(idmacs_theta_reference(), ptr::null(), 0, 0.1, ptr::null_mut())
    };
    assert_eq!(status, IdmacsStatus::NullPointer);

    // invalid theta (negative slope)
    let mut table: *mut IdmacsAcsTable = ptr::null_mut();
    let bad = IdmacsTheta { onset_age: 30.0, incidence_slope: -1.0, mortality_rate_ratio: 2.0 };
    let status = unsafe {
        idmacs_simulate_acs(bad, 10, times.as_ptr(), times.len(), 0.5, 1, &mut table)
    };
    assert_eq!(status, IdmacsStatus::InvalidArgument);
    assert!(last_error().contains("slope"), "got: {}", last_error());

    // counts accessor range check
    let counts: Vec<u64> = vec![5, 0, 0, 3, 1, 1];
    let two_times = [0.0, 10.0];
    let status = unsafe {
        idmacs_acs_from_counts(two_times.as_ptr(), counts.as_ptr(), 2, &mut table)
    };
    assert_eq!(status, IdmacsStatus::Ok);
    let mut out3 = [0u64; 3];
    assert_eq!(
        unsafe { idmacs_acs_counts(table, 5, out3.as_mut_ptr()) },
        IdmacsStatus::InvalidArgument
    );
    assert!(unsafe { idmacs_acs_visit_time(table, 5) }.is_nan());
    unsafe { idmacs_acs_free(table) };

    // freeing NULL is a no-op
    unsafe {
        idmacs_acs_free(ptr::null_mut());
        idmacs_bootstrap_free(ptr::null_mut());
    }
}

#[test]
fn determinism_across_identical_calls() {
    let times = decade_times();
    let collect = || -> Vec<[u64; 3]> {
        let mut table: *mut IdmacsAcsTable = ptr::null_mut();
        let status = unsafe {
            idmacs_simulate_acs(
                idmacs_theta_reference(),
                150,
                times.as_ptr(),
                times.len(),
                0.5,
                12345,
                &mut table,
            )
        };
        assert_eq!(status, IdmacsStatus::Ok);
        let n = unsafe { idmacs_acs_n_visits(table) };
        let mut rows = Vec::new();
        for k in 0..n {
            let mut row = [0u64; 3];
            assert_eq!(
                unsafe { idmacs_acs_counts(table, k, row.as_mut_ptr()) },
                IdmacsStatus::Ok
            );
            rows.push(row);
        }
        unsafe { idmacs_acs_free(table) };
        rows
    };
    assert_eq!(collect(), collect());
}
