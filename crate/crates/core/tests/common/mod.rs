//! Independent reference implementations shared by the integration tests.
#![allow(dead_code)]

use nalgebra::DMatrix;
use trilevel::ModelParams;

/// Cyclic Jacobi rotations on a symmetric 3×3 matrix; ascending eigenvalues.
pub fn jacobi3(mut a: [[f64; 3]; 3]) -> [f64; 3] {
    for _sweep in 0..64 {
        let off = a[0][1].powi(2) + a[0][2].powi(2) + a[1][2].powi(2);
        let diag = a[0][0].powi(2) + a[1][1].powi(2) + a[2][2].powi(2);
        if off <= 1e-36 * diag.max(f64::MIN_POSITIVE) {
            break;
        }
        for (p, q) in [(0, 1), (0, 2), (1, 2)] {
            if a[p][q] == 0.0 {
                continue;
            }
            let theta = (a[q][q] - a[p][p]) / (2.0 * a[p][q]);
            let t = theta.signum() / (theta.abs() + (theta * theta + 1.0).sqrt());
            let t = if theta == 0.0 { 1.0 } else { t };
            let c = 1.0 / (t * t + 1.0).sqrt();
            let s = t * c;
            for k in 0..3 {
                let (akp, akq) = (a[k][p], a[k][q]);
                a[k][p] = c * akp - s * akq;
                a[k][q] = s * akp + c * akq;
            }
            for k in 0..3 {
                let (apk, aqk) = (a[p][k], a[q][k]);
                a[p][k] = c * apk - s * aqk;
                a[q][k] = s * apk + c * aqk;
            }
        }
    }
    let mut e = [a[0][0], a[1][1], a[2][2]];
    e.sort_by(f64::total_cmp);
    e
}

/// `M(y)` written out by hand; `a + a† = √2·y`.
pub fn level_matrix(e: [f64; 3], u: f64, v: f64, y: f64) -> [[f64; 3]; 3] {
    let (a, b) = (2f64.sqrt() * u * y, 2f64.sqrt() * v * y);
    [[e[0], a, 0.0], [a, e[1], b], [0.0, b, e[2]]]
}

/// Depressed-cubic coefficients from the textbook symmetric functions of
/// `M(y)`: with `m = tr/3`, `ε³ − αε = β` where `α = 3m² − c1` and
/// `β = c0 − c1·m + c2·m² − m³`.
pub fn textbook_cubic(e: [f64; 3], u: f64, v: f64, y: f64) -> (f64, f64) {
    let a = level_matrix(e, u, v, y);
    let c2 = a[0][0] + a[1][1] + a[2][2];
    let c1 = a[0][0] * a[1][1] - a[0][1] * a[1][0] + a[0][0] * a[2][2] - a[0][2] * a[2][0] + a[1][1] * a[2][2]
        - a[1][2] * a[2][1];
    let c0 = a[0][0] * (a[1][1] * a[2][2] - a[1][2] * a[2][1]) - a[0][1] * (a[1][0] * a[2][2] - a[1][2] * a[2][0])
        + a[0][2] * (a[1][0] * a[2][1] - a[1][1] * a[2][0]);
    let m = c2 / 3.0;
    (3.0 * m * m - c1, c0 - c1 * m + c2 * m * m - m * m * m)
}

/// Full-basis Hamiltonian `E ⊗ 1 + 1 ⊗ a†a + (Uσ12 + Vσ23) ⊗ (a + a†)`
/// assembled from Kronecker products on oscillator states `0..=n_max`.
/// Basis index `3·n + level`; energies not shifted.
pub fn kronecker_hamiltonian(p: &ModelParams, n_max: usize) -> DMatrix<f64> {
    let k = n_max + 1;
    let mut levels = DMatrix::<f64>::zeros(3, 3);
    let e = p.energies();
    for j in 0..3 {
        levels[(j, j)] = e[j];
    }
    let mut s12 = DMatrix::<f64>::zeros(3, 3);
    s12[(0, 1)] = 1.0;
    s12[(1, 0)] = 1.0;
    let mut s23 = DMatrix::<f64>::zeros(3, 3);
    s23[(1, 2)] = 1.0;
    s23[(2, 1)] = 1.0;
    let mut number = DMatrix::<f64>::zeros(k, k);
    let mut x = DMatrix::<f64>::zeros(k, k);
    for n in 0..k {
        number[(n, n)] = n as f64;
        if n + 1 < k {
            let r = ((n + 1) as f64).sqrt();
            x[(n, n + 1)] = r;
            x[(n + 1, n)] = r;
        }
    }
    let id3 = DMatrix::<f64>::identity(3, 3);
    let idk = DMatrix::<f64>::identity(k, k);
    idk.kronecker(&levels)
        + number.kronecker(&id3)
        + x.kronecker(&(s12 * p.u()))
        + x.kronecker(&(s23 * p.v()))
}

pub fn sorted(mut v: Vec<f64>) -> Vec<f64> {
    v.sort_by(f64::total_cmp);
    v
}
