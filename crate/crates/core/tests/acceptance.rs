//! Acceptance suite: one PASS/FAIL line per criterion, with its runtime.
//!
//! Run with `cargo test -p trilevel-core --test acceptance`. Criteria known to
//! be unattainable with this model are evaluated in full and reported as
//! FAIL; they are listed in `EXPECTED_FAILURES` so the process exit status
//! reflects only unexpected regressions.

mod common;

use std::process::ExitCode;
use std::time::{Duration, Instant};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use trilevel::dressed_levels::{
    h0_level_fd, resonance_contour, wkb_dressed_energy, wkb_levels, FdGrid, DEFAULT_WKB_NODES,
};
use trilevel::fock_window::{
    build_hamiltonian, eigen_near, exact_dressed_energies_checked, nearest_odd, product_state,
};
use trilevel::rotation_coupling::v_matrix_element;
use trilevel::splittings::compare_splittings;
use trilevel::trilevel_core::eigenvalues_at;
use trilevel::validate::{run_validation, ValidateOptions};
use trilevel::{
    ElementMethod, FockWindow, Level, MatrixElementRequest, ModelParams, OscillatorStates, RaySet, Sector,
    SplittingSettings,
};

const LADDER: [f64; 3] = [0.0, 11.0, 24.0];

// criterion 1
const CUBIC_INSTANCES: usize = 10_000;
const CUBIC_RTOL: f64 = 1e-10;
// criterion 2
const SMALL_N0: u64 = 50;
const SMALL_TOL: f64 = 1e-10;
// criterion 3
const SAMPLE_GRID: [f64; 5] = [0.1, 0.25, 0.4, 0.55, 0.7];
const RESONANCE_CLEARANCE: f64 = 0.3;
const NUDGE_STEP: f64 = 0.004;
const NUDGE_RINGS: i32 = 12;
const DRESSED_TOL: f64 = 0.1;
// criterion 4
const ORIGIN_TOL: f64 = 1e-3;
// criterion 5
const PERIOD_TOL: f64 = 1e-6;
// criterion 6
const FD_NS: [u64; 3] = [100, 400, 1000];
const FD_TOL: f64 = 1e-2;
// criterion 7
const WIDE_BAND: (f64, f64) = (0.5, 2.0);
const NARROW_BAND: (f64, f64) = (0.8, 1.25);
const NARROW_FRACTION: f64 = 0.75;
// criterion 9
const ELEMENT_RTOL: f64 = 1e-6;

/// Unattainable with this model; the analysis is kept with the project notes.
const EXPECTED_FAILURES: [u32; 3] = [3, 7, 8];

struct Outcome {
    passed: bool,
    detail: String,
}

impl Outcome {
    fn new(passed: bool, detail: impl Into<String>) -> Self {
        Outcome { passed, detail: detail.into() }
    }
}

type Check = fn() -> Result<Outcome, String>;

fn err<E: std::fmt::Display>(e: E) -> String {
    e.to_string()
}

fn cubic_oracle() -> Result<Outcome, String> {
    let mut rng = ChaCha8Rng::seed_from_u64(0x7e11);
    let mut worst = 0.0f64;
    for _ in 0..CUBIC_INSTANCES {
        let e1 = rng.gen_range(-20.0..20.0);
        let e2 = e1 + rng.gen_range(0.1..20.0);
        let e3 = e2 + rng.gen_range(0.1..20.0);
        let (u, v) = (rng.gen_range(0.0..2.0), rng.gen_range(0.0..2.0));
        let y = rng.gen_range(-30.0..30.0);
        let p = ModelParams::new([e1, e2, e3], u, v, 1).map_err(err)?;
        let got = eigenvalues_at(&p, y).map_err(err)?;
        let want = common::jacobi3(common::level_matrix([e1, e2, e3], u, v, y));
        for j in 0..3 {
            worst = worst.max((got[j] - want[j]).abs() / want[j].abs().max(1.0));
        }
    }
    Ok(Outcome::new(
        worst <= CUBIC_RTOL,
        format!("{CUBIC_INSTANCES} instances vs Jacobi, max scaled error {worst:.2e} (tol {CUBIC_RTOL:.0e})"),
    ))
}

fn small_basis() -> Result<Outcome, String> {
    let p = ModelParams::from_dimensionless(LADDER, 0.7, 0.9, SMALL_N0).map_err(err)?;
    let h = build_hamiltonian(&p, FockWindow::new(SMALL_N0, SMALL_N0).map_err(err)?, Sector::Full).map_err(err)?;
    let oracle = common::kronecker_hamiltonian(&p, 2 * SMALL_N0 as usize);
    let shift = SMALL_N0 as f64;
    let want = common::sorted(oracle.symmetric_eigenvalues().iter().map(|x| x - shift).collect());
    let got: Vec<f64> = eigen_near(&h, 0.0, h.dim()).map_err(err)?.iter().map(|q| q.value).collect();
    if got.len() != want.len() {
        return Ok(Outcome::new(false, format!("dimension {} vs oracle {}", got.len(), want.len())));
    }
    let diff = got.iter().zip(&want).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max);
    Ok(Outcome::new(
        diff <= SMALL_TOL,
        format!("n0 = {SMALL_N0}, dim {}: max eigenvalue deviation {diff:.2e} (tol {SMALL_TOL:.0e})", got.len()),
    ))
}

/// Distance of the WKB transition energies from the nearest resonance:
/// odd Δn for 1→2 and 2→3, even Δn for 1→3.
fn resonance_distance(p: &ModelParams) -> Result<f64, String> {
    let e = wkb_levels(p, p.n0(), DEFAULT_WKB_NODES).map_err(err)?;
    let odd = |t: f64| (t - nearest_odd(t) as f64).abs();
    let even = |t: f64| (t - 2.0 * (0.5 * t).round()).abs();
    Ok(odd(e[1] - e[0]).min(odd(e[2] - e[1])).min(even(e[2] - e[0])))
}

fn nudge(template: &ModelParams, g1: f64, g2: f64) -> Result<Option<(f64, f64, f64)>, String> {
    let mut offsets: Vec<(i32, i32)> =
        (-NUDGE_RINGS..=NUDGE_RINGS).flat_map(|i| (-NUDGE_RINGS..=NUDGE_RINGS).map(move |j| (i, j))).collect();
    offsets.sort_by_key(|&(i, j)| (i * i + j * j, i, j));
    for (i, j) in offsets {
        let (a, b) = (g1 + NUDGE_STEP * i as f64, g2 + NUDGE_STEP * j as f64);
        let d = resonance_distance(&template.with_dimensionless(a, b).map_err(err)?)?;
        if d >= RESONANCE_CLEARANCE {
            return Ok(Some((a, b, d)));
        }
    }
    Ok(None)
}

fn dressed_accuracy() -> Result<Outcome, String> {
    let template = ModelParams::reference_ladder(0.0, 0.0).map_err(err)?;
    let window = FockWindow::new(template.n0(), 400).map_err(err)?;
    // (max |WKB − exact| over j, g1, g2, E2 − E1)
    let mut points: Vec<(f64, f64, f64, f64)> = Vec::new();
    let mut largest_shift = 0.0f64;
    let mut lowest_overlap = 1.0f64;
    for &g1 in &SAMPLE_GRID {
        for &g2 in &SAMPLE_GRID {
            let Some((a, b, _)) = nudge(&template, g1, g2)? else {
                return Ok(Outcome::new(false, format!("no point ≥ {RESONANCE_CLEARANCE} off resonance near ({g1}, {g2})")));
            };
            let p = template.with_dimensionless(a, b).map_err(err)?;
            let wkb = wkb_levels(&p, p.n0(), DEFAULT_WKB_NODES).map_err(err)?;
            let (exact, change) = exact_dressed_energies_checked(&p, window).map_err(err)?;
            largest_shift = largest_shift.max(change);
            let mut d = 0.0f64;
            for j in 0..3 {
                lowest_overlap = lowest_overlap.min(exact[j].overlap);
                d = d.max((wkb[j] - exact[j].energy).abs());
            }
            points.push((d, a, b, wkb[1] - wkb[0]));
        }
    }
    let worst = points.iter().copied().fold((0.0, 0.0, 0.0, 0.0), |m, q| if q.0 > m.0 { q } else { m });
    let over: Vec<String> = points
        .iter()
        .filter(|q| q.0 > DRESSED_TOL)
        .map(|q| format!("({:.3}, {:.3}) err {:.3} with E2−E1 = {:.2}", q.1, q.2, q.0, q.3))
        .collect();
    let rest = points.iter().filter(|q| q.0 <= DRESSED_TOL).map(|q| q.0).fold(0.0, f64::max);
    Ok(Outcome::new(
        over.is_empty(),
        format!(
            "{} points, max |WKB − exact| {:.4} at ({:.3}, {:.3}) (tol {DRESSED_TOL}); {} over tol [{}], others ≤ {rest:.4}; window shift {largest_shift:.1e}, min overlap {lowest_overlap:.3}",
            points.len(),
            worst.0,
            worst.1,
            worst.2,
            over.len(),
            over.join("; ")
        ),
    ))
}

fn contour_origin() -> Result<Outcome, String> {
    let p = ModelParams::reference_ladder(0.0, 0.0).map_err(err)?;
    let rays = RaySet::quadrant(91, 1.25);
    let mut parts = Vec::new();
    let mut ok = true;
    for (lower, upper, dn) in [(Level::ONE, Level::TWO, 11), (Level::TWO, Level::THREE, 13)] {
        let c = resonance_contour(&p, lower, upper, dn, &rays).map_err(err)?;
        let closest = c.points.iter().map(|q| q.radius).fold(f64::INFINITY, f64::min);
        ok &= closest <= ORIGIN_TOL;
        parts.push(format!("{lower}→{upper} Δn = {dn}: g_min {closest:.2e}"));
    }
    Ok(Outcome::new(ok, format!("{} (tol {ORIGIN_TOL:.0e})", parts.join(", "))))
}

fn periodicity() -> Result<Outcome, String> {
    let p = ModelParams::reference_ladder(0.5, 0.5).map_err(err)?;
    let n0 = p.n0();
    let window = FockWindow::new(n0, 400).map_err(err)?;
    let wkb = wkb_levels(&p, n0, DEFAULT_WKB_NODES).map_err(err)?;
    let mut worst = 0.0f64;
    for level in Level::all() {
        let h = build_hamiltonian(&p, window, Sector::of(level, n0)).map_err(err)?;
        let mut energies = Vec::new();
        for n in [n0 - 2, n0, n0 + 2] {
            let state = product_state(&h, level, n).map_err(err)?;
            let target = wkb[level.index()] + (n as f64 - n0 as f64);
            let pairs = eigen_near(&h, target, 8).map_err(err)?;
            let best = pairs
                .iter()
                .max_by(|a, b| {
                    let o = |q: &trilevel::fock_window::EigenPair| {
                        q.vector.iter().zip(&state).map(|(x, y)| x * y).sum::<f64>().abs()
                    };
                    o(a).total_cmp(&o(b))
                })
                .ok_or("no eigenpairs")?;
            energies.push(best.value);
        }
        worst = worst.max((energies[1] - energies[0] - 2.0).abs()).max((energies[2] - energies[1] - 2.0).abs());
    }
    Ok(Outcome::new(
        worst <= PERIOD_TOL,
        format!("max |E(n+2) − E(n) − 2| = {worst:.2e} over levels 1–3, n0 ± 2 (tol {PERIOD_TOL:.0e})"),
    ))
}

fn wkb_vs_fd() -> Result<Outcome, String> {
    let mut errors = Vec::new();
    for n in FD_NS {
        let p = ModelParams::from_dimensionless(LADDER, 0.5, 0.5, n).map_err(err)?;
        let mut worst = 0.0f64;
        for level in Level::all() {
            let w = wkb_dressed_energy(&p, level, n, DEFAULT_WKB_NODES).map_err(err)?;
            let f = h0_level_fd(&p, level, n, &FdGrid::default()).map_err(err)?;
            worst = worst.max((w.energy - f.energy).abs());
        }
        errors.push(worst);
    }
    let decreasing = errors.windows(2).all(|w| w[1] < w[0]);
    let last = *errors.last().unwrap();
    Ok(Outcome::new(
        decreasing && last <= FD_TOL,
        format!(
            "max |WKB − FD| at n = 100/400/1000: {:.2e} / {:.2e} / {:.2e} (decreasing: {decreasing}, tol {FD_TOL:.0e})",
            errors[0], errors[1], errors[2]
        ),
    ))
}

fn benign_line() -> Result<Outcome, String> {
    let p = ModelParams::reference_ladder(0.0, 0.0).map_err(err)?;
    let dns: Vec<u32> = (13..=27).step_by(2).collect();
    let recs = compare_splittings(&p, 0.3, &dns, Level::ONE, Level::TWO, &SplittingSettings::default());
    if let Some(bad) = recs.iter().find(|r| !r.is_valid()) {
        return Ok(Outcome::new(false, format!("Δn = {}: {}", bad.delta_n, bad.error.as_deref().unwrap_or(""))));
    }
    let ratios: Vec<f64> = recs.iter().map(|r| r.ratio_pt_exact()).collect();
    let wide = ratios.iter().all(|r| (WIDE_BAND.0..=WIDE_BAND.1).contains(r));
    let narrow = ratios.iter().filter(|r| (NARROW_BAND.0..=NARROW_BAND.1).contains(*r)).count();
    let narrow_ok = narrow as f64 >= NARROW_FRACTION * ratios.len() as f64;
    let monotone = recs.windows(2).all(|w| w[1].exact < w[0].exact);
    let listing: Vec<String> =
        recs.iter().map(|r| format!("{}:{:.3e}/{:.3}", r.delta_n, r.exact, r.ratio_pt_exact())).collect();
    Ok(Outcome::new(
        wide && narrow_ok && monotone,
        format!(
            "all in [0.5, 2]: {wide}; {narrow}/{} in [0.8, 1.25]; exact gap decreasing in Δn: {monotone} [Δn:gap/ratio {}]",
            ratios.len(),
            listing.join(" ")
        ),
    ))
}

fn interference() -> Result<Outcome, String> {
    let p = ModelParams::reference_ladder(0.0, 0.0).map_err(err)?;
    let recs = compare_splittings(&p, 0.1, &[23, 25], Level::ONE, Level::TWO, &SplittingSettings::default());
    let r = &recs[0];
    if !r.is_valid() {
        return Ok(Outcome::new(false, format!("Δn = 23: {}", r.error.as_deref().unwrap_or(""))));
    }
    let ratio = r.ratio_pt_exact();
    let outside = !(NARROW_BAND.0..=NARROW_BAND.1).contains(&ratio);
    let context = &recs[1];
    Ok(Outcome::new(
        r.minima >= 2 && outside,
        format!(
            "Δn = 23: {} exact minimum(s), PT/exact {ratio:.3} (outside band: {outside}); for reference Δn = 25: {} minimum(s), ratio {:.3}",
            r.minima,
            context.minima,
            context.ratio_pt_exact()
        ),
    ))
}

fn element_methods() -> Result<Outcome, String> {
    let p = ModelParams::from_dimensionless(LADDER, 0.5, 0.15, 500).map_err(err)?;
    let n = 500;
    let mut worst = 0.0f64;
    let mut checked = 0;
    for states in [OscillatorStates::Harmonic, OscillatorStates::Dressed] {
        for dn in 11..=21u64 {
            let value = |method| {
                let req = MatrixElementRequest::new(Level::ONE, n, Level::TWO, n - dn, method).with_states(states);
                v_matrix_element(&p, &req)
            };
            let a = value(ElementMethod::HermiteQuadrature).map_err(err)?;
            let b = value(ElementMethod::FockWindow).map_err(err)?;
            let scale = a.abs().max(b.abs());
            if dn % 2 == 0 {
                // parity-forbidden: both must vanish
                worst = worst.max(if scale <= 1e-14 { 0.0 } else { f64::INFINITY });
            } else {
                worst = worst.max((a - b).abs() / scale);
            }
            checked += 1;
        }
    }
    Ok(Outcome::new(
        worst <= ELEMENT_RTOL,
        format!("{checked} elements ⟨1,500|V̂|2,500−Δn⟩, Δn 11–21, harmonic and dressed: max relative difference {worst:.2e} (tol {ELEMENT_RTOL:.0e})"),
    ))
}

fn invariants() -> Result<Outcome, String> {
    let report = run_validation(&ValidateOptions::default());
    let failed: Vec<&str> = report.checks.iter().filter(|c| !c.passed).map(|c| c.name).collect();
    Ok(Outcome::new(
        failed.is_empty(),
        if failed.is_empty() {
            format!("{} checks passed", report.checks.len())
        } else {
            format!("failed: {}", failed.join(", "))
        },
    ))
}

fn main() -> ExitCode {
    let criteria: [(u32, &str, Duration, Check); 10] = [
        (1, "cubic vs dense 3×3 oracle", Duration::from_secs(5), cubic_oracle),
        (2, "small-basis exactness", Duration::from_secs(10), small_basis),
        (3, "dressed-energy accuracy", Duration::from_secs(300), dressed_accuracy),
        (4, "zero-coupling resonance orders", Duration::MAX, contour_origin),
        (5, "spectral periodicity", Duration::MAX, periodicity),
        (6, "WKB vs finite differences", Duration::from_secs(120), wkb_vs_fd),
        (7, "splittings on g2 = 0.3·g1", Duration::from_secs(600), benign_line),
        (8, "interference on g2 = 0.1·g1", Duration::MAX, interference),
        (9, "V̂ method cross-check", Duration::MAX, element_methods),
        (10, "invariant suite", Duration::from_secs(180), invariants),
    ];
    let only: Option<u32> = std::env::args().skip(1).find_map(|a| a.parse().ok());
    let mut unexpected = Vec::new();
    for (id, name, budget, check) in criteria {
        if only.is_some_and(|o| o != id) {
            continue;
        }
        let start = Instant::now();
        let outcome = check().unwrap_or_else(|e| Outcome::new(false, format!("error: {e}")));
        let elapsed = start.elapsed();
        let in_time = elapsed <= budget;
        let passed = outcome.passed && in_time;
        let timing = if in_time { String::new() } else { format!(" [over budget {}s]", budget.as_secs()) };
        let note = if !passed && EXPECTED_FAILURES.contains(&id) { " (expected)" } else { "" };
        println!(
            "criterion {id:>2} {} {:>8.2}s  {name}: {}{timing}{note}",
            if passed { "PASS" } else { "FAIL" },
            elapsed.as_secs_f64(),
            outcome.detail
        );
        if !passed && !EXPECTED_FAILURES.contains(&id) {
            unexpected.push(id);
        }
    }
    if unexpected.is_empty() {
        ExitCode::SUCCESS
    } else {
        println!("unexpected failures: {unexpected:?}");
        ExitCode::FAILURE
    }
}
