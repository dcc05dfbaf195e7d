//! Shared test helpers: independent numerical oracles and fixtures.
//!
//! Everything here deliberately avoids the library's own solution paths:
//! the Euler marcher and the matrix exponential are separate
//! implementations against which the production code is checked.

// each test target uses its own subset of these helpers
#![allow(dead_code)]

use idmacs::rates::RateModel;
use idmacs::sampling::AcsTable;

/// Explicit Euler on p' = A(t) p at a fixed (fine) step. Records the
/// state at each requested output time, which must be step multiples.
pub fn euler_idm(
    rates: &impl RateModel,
    p0: [f64; 3],
    t0: f64,
    step: f64,
    output_times: &[f64],
) -> Vec<[f64; 3]> {
    let indices: Vec<usize> =
        output_times.iter().map(|&t| ((t - t0) / step).round() as usize).collect();
    let last = *indices.iter().max().unwrap();
    let mut out = Vec::with_capacity(output_times.len());
    let mut p = p0;
    let mut next = 0;
    for k in 0..=last {
        while next < indices.len() && indices[next] == k {
            out.push(p);
            next += 1;
        }
        if next == indices.len() {
            break;
        }
        let t = t0 + k as f64 * step;
        let a = rates.system_matrix(t);
        let mut dp = [0.0; 3];
        for (i, dpi) in dp.iter_mut().enumerate() {
            for (j, &pj) in p.iter().enumerate() {
                *dpi += a[i][j] * pj;
            }
        }
        for i in 0..3 {
            p[i] += step * dp[i];
        }
    }
    out
}

/// 3×3 matrix exponential exp(M) by scaling-and-squaring with a Taylor
/// series on the scaled matrix.
pub fn expm3(m: [[f64; 3]; 3]) -> [[f64; 3]; 3] {
    let norm: f64 =
        m.iter().map(|row| row.iter().map(|x| x.abs()).sum::<f64>()).fold(0.0, f64::max);
    let squarings = if norm > 0.5 { (norm / 0.5).log2().ceil() as u32 } else { 0 };
    let scale = 0.5f64.powi(squarings as i32);
    let scaled = map3(m, |x| x * scale);

    // Taylor: I + S + S²/2! + ...
    let mut result = identity3();
    let mut term = identity3();
    for k in 1..=30 {
        term = matmul3(term, scaled);
        term = map3(term, |x| x / k as f64);
        result = add3(result, term);
    }
    for _ in 0..squarings {
        result = matmul3(result, result);
    }
    result
}

fn identity3() -> [[f64; 3]; 3] {
    [[1.0, 0.0, 0.0], [0.0, 1.0, 0.0], [0.0, 0.0, 1.0]]
}

fn map3(m: [[f64; 3]; 3], f: impl Fn(f64) -> f64) -> [[f64; 3]; 3] {
    let mut out = m;
    for row in &mut out {
        for x in row {
            *x = f(*x);
        }
    }
    out
}

fn add3(a: [[f64; 3]; 3], b: [[f64; 3]; 3]) -> [[f64; 3]; 3] {
    let mut out = a;
    for i in 0..3 {
        for j in 0..3 {
            out[i][j] += b[i][j];
        }
    }
    out
}

fn matmul3(a: [[f64; 3]; 3], b: [[f64; 3]; 3]) -> [[f64; 3]; 3] {
    let mut out = [[0.0; 3]; 3];
    for i in 0..3 {
        for j in 0..3 {
            for (k, bk) in b.iter().enumerate() {
                out[i][j] += a[i][k] * bk[j];
            }
        }
    }
    out
}

pub fn matvec3(a: [[f64; 3]; 3], v: [f64; 3]) -> [f64; 3] {
    let mut out = [0.0; 3];
    for (i, row) in a.iter().enumerate() {
        for (j, &x) in v.iter().enumerate() {
            out[i] += row[j] * x;
        }
    }
    out
}

/// Upper tail probability of a chi-squared statistic.
pub fn chi_square_pvalue(statistic: f64, dof: f64) -> f64 {
    use statrs::distribution::{ChiSquared, ContinuousCDF};
    1.0 - ChiSquared::new(dof).unwrap().cdf(statistic)
}

/// Goodness-of-fit statistic against expected bin counts, pooling bins
/// with expectation below 5 into their neighbors from both ends.
pub fn chi_square_gof(observed: &[f64], expected: &[f64]) -> (f64, f64) {
    assert_eq!(observed.len(), expected.len());
    let mut obs = Vec::new();
    let mut exp = Vec::new();
    let (mut o_acc, mut e_acc) = (0.0, 0.0);
    for (&o, &e) in observed.iter().zip(expected) {
        o_acc += o;
        e_acc += e;
        if e_acc >= 5.0 {
            obs.push(o_acc);
            exp.push(e_acc);
            o_acc = 0.0;
            e_acc = 0.0;
        }
    }
    // leftover tail mass joins the final bin
    if e_acc > 0.0 {
        if let (Some(lo), Some(le)) = (obs.last_mut(), exp.last_mut()) {
            *lo += o_acc;
            *le += e_acc;
        } else {
            obs.push(o_acc);
            exp.push(e_acc);
        }
    }
    let statistic: f64 =
        obs.iter().zip(&exp).map(|(&o, &e)| (o - e).powi(2) / e).sum();
    let dof = (obs.len() - 1) as f64;
    (statistic, dof)
}

/// The published example count table (states × decades), with the
/// column totals recomputed from the state counts.
pub fn example_table() -> AcsTable {
    let non_diseased = [325u64, 285, 300, 291, 275, 262, 233, 155, 68, 16, 0];
    let diseased = [0u64, 0, 0, 0, 7, 15, 43, 63, 41, 8, 0];
    let dead = [0u64, 0, 1, 1, 4, 8, 27, 81, 184, 260, 298];
    let counts = (0..11).map(|k| [non_diseased[k], diseased[k], dead[k]]).collect();
    AcsTable::new(decade_times(), counts).unwrap()
}

pub fn decade_times() -> Vec<f64> {
    (0..=10).map(|k| 10.0 * k as f64).collect()
}
