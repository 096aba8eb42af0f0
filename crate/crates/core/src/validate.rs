//! Desk-scale invariant suite, shared by the `validate` command and the
//! acceptance tests.

use std::time::{Duration, Instant};

use crate::dressed_levels::{resonance_contour, wkb_levels, RaySet, DEFAULT_WKB_NODES};
use crate::error::Result;
use crate::fock_window::{build_hamiltonian, dense_from_rules, eigen_near, FockWindow, Sector};
use crate::rotation_coupling::{
    coupling_functions_analytic, derivative_product, v_matrix_element, ElementMethod, MatrixElementRequest,
};
use crate::trilevel_core::{eigenvalues_at, Level, ModelParams};

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct ValidateOptions {
    /// Perturb one upper-triangle entry of the assembled Hamiltonian before
    /// the symmetry check.
    pub inject_symmetry_fault: bool,
}

#[derive(Debug, Clone, PartialEq)]
pub struct CheckResult {
    pub name: &'static str,
    pub passed: bool,
    pub detail: String,
    pub elapsed: Duration,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ValidationReport {
    pub checks: Vec<CheckResult>,
}

impl ValidationReport {
    pub fn passed(&self) -> bool {
        self.checks.iter().all(|c| c.passed)
    }
}

type Outcome = Result<(bool, String)>;

fn sample_params() -> Vec<ModelParams> {
    [(0.5, 0.5), (0.3, 0.9), (1.0, 0.15), (0.05, 0.7)]
        .iter()
        .map(|&(g1, g2)| ModelParams::from_dimensionless([0.0, 11.0, 24.0], g1, g2, 400).unwrap())
        .collect()
}

const SAMPLE_Y: [f64; 6] = [0.37, 1.9, 4.2, 11.5, 20.0, 27.3];

fn antisymmetry() -> Outcome {
    let mut worst = 0.0f64;
    for p in sample_params() {
        for &y in &SAMPLE_Y {
            for y in [y, -y] {
                let d = derivative_product(&p, y, 1e-4)?;
                let scale = d.amax().max(1e-12);
                worst = worst.max((d + d.transpose()).amax() / scale);
            }
        }
    }
    Ok((worst <= 1e-6, format!("max |P + Pᵀ|/max|P| = {worst:.3e}")))
}

fn parity_selection() -> Outcome {
    let p = ModelParams::from_dimensionless([0.0, 11.0, 24.0], 0.6, 0.4, 60).unwrap();
    let mut forbidden = 0.0f64;
    let mut allowed = f64::INFINITY;
    for (j, k, n) in [(Level::ONE, Level::TWO, 60u64), (Level::TWO, Level::THREE, 55), (Level::ONE, Level::THREE, 58)] {
        // F12, F23 even in y: only odd n − m survive; F13 odd: only even
        let even_coupling = k.number() - j.number() == 1;
        for dm in 1..=8u64 {
            let v = v_matrix_element(&p, &MatrixElementRequest::new(j, n, k, n - dm, ElementMethod::HermiteQuadrature))?;
            if (dm % 2 == 1) == even_coupling {
                allowed = allowed.min(v.abs());
            } else {
                forbidden = forbidden.max(v.abs());
            }
        }
    }
    Ok((forbidden <= 1e-12 && allowed > 1e-9, format!("forbidden max {forbidden:.2e}, allowed min {allowed:.2e}")))
}

fn trace() -> Outcome {
    let mut worst = 0.0f64;
    for p in sample_params() {
        let sum: f64 = p.energies().iter().sum();
        for &y in &SAMPLE_Y {
            let e = eigenvalues_at(&p, y)?;
            worst = worst.max((e.iter().sum::<f64>() - sum).abs() / sum.abs().max(1.0));
        }
        let w = wkb_levels(&p, p.n0(), DEFAULT_WKB_NODES)?;
        worst = worst.max((w.iter().sum::<f64>() - sum).abs() / sum.abs().max(1.0));
    }
    Ok((worst <= 1e-10, format!("max relative trace error {worst:.2e}")))
}

fn even_y() -> Outcome {
    let mut worst_e = 0.0f64;
    let mut worst_f = 0.0f64;
    for p in sample_params() {
        for &y in &SAMPLE_Y {
            let a = eigenvalues_at(&p, y)?;
            let b = eigenvalues_at(&p, -y)?;
            worst_e = worst_e.max((0..3).map(|j| (a[j] - b[j]).abs()).fold(0.0, f64::max));
            let f = coupling_functions_analytic(&p, y)?;
            let g = coupling_functions_analytic(&p, -y)?;
            worst_f = worst_f.max((f.f12 - g.f12).abs()).max((f.f23 - g.f23).abs()).max((f.f13 + g.f13).abs());
        }
    }
    Ok((worst_e == 0.0 && worst_f <= 1e-14, format!("E_j mismatch {worst_e:.1e}, F parity mismatch {worst_f:.1e}")))
}

fn block_decoupling() -> Outcome {
    let p = ModelParams::from_dimensionless([0.0, 11.0, 24.0], 0.7, 0.6, 60).unwrap();
    let w = FockWindow::new(60, 30)?;
    let full = build_hamiltonian(&p, w, Sector::Full)?;
    let dense = full.matrix().to_dense();
    let labels = full.labels();
    let mut leak = 0.0f64;
    for a in 0..labels.len() {
        for b in 0..labels.len() {
            if Sector::of(labels[a].0, labels[a].1) != Sector::of(labels[b].0, labels[b].1) {
                leak = leak.max(dense[(a, b)].abs());
            }
        }
    }
    let mut split: Vec<f64> = Vec::new();
    for s in [Sector::Even, Sector::Odd] {
        let h = build_hamiltonian(&p, w, s)?;
        split.extend(h.matrix().to_dense().symmetric_eigenvalues().iter());
    }
    let mut whole: Vec<f64> = dense.symmetric_eigenvalues().iter().copied().collect();
    split.sort_by(f64::total_cmp);
    whole.sort_by(f64::total_cmp);
    let diff = split.iter().zip(&whole).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max);
    Ok((leak == 0.0 && diff <= 1e-9, format!("cross-sector entries {leak:.1e}, spectrum mismatch {diff:.2e}")))
}

fn gauge_shift() -> Outcome {
    let c = 7.3;
    let mut worst = 0.0f64;
    for p in sample_params() {
        let q = p.shifted(c)?;
        for &y in &SAMPLE_Y {
            let a = eigenvalues_at(&p, y)?;
            let b = eigenvalues_at(&q, y)?;
            worst = worst.max((0..3).map(|j| (b[j] - a[j] - c).abs() / b[j].abs().max(1.0)).fold(0.0, f64::max));
        }
    }
    let p = ModelParams::from_dimensionless([0.0, 11.0, 24.0], 0.5, 0.5, 400).unwrap();
    let w = FockWindow::new(400, 40)?;
    let a = eigen_near(&build_hamiltonian(&p, w, Sector::Even)?, 0.0, 6)?;
    let b = eigen_near(&build_hamiltonian(&p.shifted(c)?, w, Sector::Even)?, c, 6)?;
    for (x, y) in a.iter().zip(&b) {
        worst = worst.max((y.value - x.value - c).abs() / y.value.abs().max(1.0));
    }
    Ok((worst <= 1e-10, format!("max relative shift error {worst:.2e}")))
}

fn determinism() -> Outcome {
    let p = ModelParams::reference_ladder(0.0, 0.0)?;
    let rays = RaySet { samples: 60, refine: 8, ..RaySet::quadrant(7, 1.0) };
    let a = resonance_contour(&p, Level::ONE, Level::TWO, 13, &rays)?;
    let b = resonance_contour(&p, Level::ONE, Level::TWO, 13, &rays)?;
    let q = ModelParams::reference_ladder(0.5, 0.5)?;
    let w = FockWindow::new(q.n0(), 100)?;
    let h = build_hamiltonian(&q, w, Sector::Odd)?;
    let same = a == b && eigen_near(&h, 0.3, 5)? == eigen_near(&h, 0.3, 5)?;
    Ok((same, format!("{} contour points, repeated runs bitwise {}", a.points.len(), if same { "equal" } else { "different" })))
}

fn symmetry(opts: &ValidateOptions) -> Outcome {
    let p = ModelParams::reference_ladder(0.8, 0.4)?;
    let h = build_hamiltonian(&p, FockWindow::new(p.n0(), 24)?, Sector::Even)?;
    let mut m = h.matrix().to_dense();
    if opts.inject_symmetry_fault {
        m[(3, 5)] += 1e-3;
    }
    let rules = dense_from_rules(&h);
    let asym = (&m - m.transpose()).amax();
    let mismatch = (&m - &rules).amax();
    Ok((asym == 0.0 && mismatch == 0.0, format!("max |H − Hᵀ| = {asym:.1e}, deviation from element rules {mismatch:.1e}")))
}

fn timed(name: &'static str, f: impl FnOnce() -> Outcome) -> CheckResult {
    let start = Instant::now();
    let (passed, detail) = match f() {
        Ok(r) => r,
        Err(e) => (false, format!("error: {e}")),
    };
    CheckResult { name, passed, detail, elapsed: start.elapsed() }
}

pub fn run_validation(opts: &ValidateOptions) -> ValidationReport {
    let checks = vec![
        timed("antisymmetry of U^T U'", antisymmetry),
        timed("parity selection of V elements", parity_selection),
        timed("trace preservation", trace),
        timed("even-y symmetry", even_y),
        timed("parity block decoupling", block_decoupling),
        timed("gauge shift", gauge_shift),
        timed("determinism", determinism),
        timed("hamiltonian symmetry", || symmetry(opts)),
    ];
    ValidationReport { checks }
}
