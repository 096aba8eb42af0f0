//! Dressed (oscillator-averaged) level energies.
//!
//! Away from resonances the exact spectrum near quantum number `n` is
//! `E_{j,n} ≈ E_j(g1, g2) + n` (ħω₀ = 1). Two routes to `E_j`:
//!
//! * WKB: the average of `E_j(y)` over the classical orbit,
//!   `(1/π)∫ E_j(y)/√(ε−y²) dy` with `ε = 2n+1`, by Chebyshev–Gauss quadrature;
//! * finite differences: the `n`-th eigenvalue of
//!   `−½d²/dy² + ½y² + E_j(y)` minus `n + ½`, Richardson-extrapolated in the
//!   grid spacing.
//!
//! Resonance contours `E_k − E_j = Δn` are traced along rays in the
//! `(g1, g2)` quadrant.

use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::linalg::{inverse_iteration, SymBand, Tridiagonal};
use crate::trilevel_core::{eigenvalues_at, Level, ModelParams};

pub const DEFAULT_WKB_NODES: usize = 256;
const MAX_WKB_NODES: usize = 1 << 20;
const WKB_TOL: f64 = 1e-9;

/// Largest quantum number accepted by the finite-difference solver.
pub const FD_MAX_N: u64 = 2000;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum DressedMethod {
    Wkb,
    Fd,
}

/// Dressed energy of one level (the `n·ħω₀` ladder removed).
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DressedLevel {
    pub level: Level,
    pub n: u64,
    pub energy: f64,
    pub method: DressedMethod,
}

fn chebyshev_average(params: &ModelParams, n: u64, nodes: usize) -> Result<[f64; 3]> {
    let r = (2.0 * n as f64 + 1.0).sqrt();
    let step = std::f64::consts::PI / (2 * nodes) as f64;
    let mut sum = [0.0; 3];
    // E_j(y) is even and the nodes are symmetric, so half the nodes suffice.
    let (count, weight) = if nodes % 2 == 0 { (nodes / 2, 2.0) } else { (nodes, 1.0) };
    for k in 0..count {
        let y = r * (step * (2 * k + 1) as f64).cos();
        let e = eigenvalues_at(params, y)?;
        for j in 0..3 {
            sum[j] += e[j];
        }
    }
    Ok(sum.map(|s| weight * s / nodes as f64))
}

/// All three WKB dressed energies, starting at `nodes` and doubling until
/// each changes by at most 1e-9.
pub fn wkb_levels(params: &ModelParams, n: u64, nodes: usize) -> Result<[f64; 3]> {
    if nodes < 16 {
        return Err(Error::InvalidArgument(format!("need at least 16 quadrature nodes, got {nodes}")));
    }
    let mut nodes = nodes;
    let mut prev = chebyshev_average(params, n, nodes)?;
    loop {
        nodes *= 2;
        let next = chebyshev_average(params, n, nodes)?;
        let change = (0..3).map(|j| (next[j] - prev[j]).abs()).fold(0.0, f64::max);
        if change <= WKB_TOL {
            return Ok(next);
        }
        if nodes >= MAX_WKB_NODES {
            return Err(Error::NonConvergence { what: "Chebyshev–Gauss quadrature", change });
        }
        prev = next;
    }
}

pub fn wkb_dressed_energy(params: &ModelParams, level: Level, n: u64, nodes: usize) -> Result<DressedLevel> {
    let e = wkb_levels(params, n, nodes)?;
    Ok(DressedLevel { level, n, energy: e[level.index()], method: DressedMethod::Wkb })
}

/// `E_k − E_j` from the WKB energies at quantum number `n`.
pub fn dressed_transition(params: &ModelParams, j: Level, k: Level, n: u64) -> Result<f64> {
    if j == k {
        return Ok(0.0);
    }
    let e = wkb_levels(params, n, DEFAULT_WKB_NODES)?;
    Ok(e[k.index()] - e[j.index()])
}

/// Finite-difference grid for the 1-D problem.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FdGrid {
    /// Coarsest spacing; refinements halve it.
    pub spacing: f64,
    /// Extent beyond each turning point, in units of `√(2n+1)`
    /// (never less than 8 in absolute terms).
    pub extent: f64,
    /// Number of spacings used for Richardson extrapolation.
    pub levels: usize,
    /// Upper limit on `levels` when refining for accuracy.
    pub max_levels: usize,
    /// Required agreement between the last two extrapolants.
    pub tolerance: f64,
}

impl Default for FdGrid {
    fn default() -> Self {
        FdGrid { spacing: 0.02, extent: 1.5, levels: 4, max_levels: 6, tolerance: 1e-6 }
    }
}

fn fd_matrix(potential: &dyn Fn(f64) -> Result<f64>, half_length: f64, points: usize) -> Result<Tridiagonal> {
    let h = 2.0 * half_length / points as f64;
    let inner = points - 1;
    let mut d = Vec::with_capacity(inner);
    for i in 1..=inner {
        let y = -half_length + i as f64 * h;
        d.push(1.0 / (h * h) + 0.5 * y * y + potential(y)?);
    }
    Ok(Tridiagonal { d, e: vec![-0.5 / (h * h); inner - 1] })
}

fn count_sign_changes(v: &[f64]) -> u64 {
    let big = v.iter().fold(0.0f64, |m, x| m.max(x.abs()));
    let mut last = 0.0;
    let mut changes = 0;
    for &x in v {
        if x.abs() <= 1e-9 * big {
            continue;
        }
        if last != 0.0 && x.signum() != last {
            changes += 1;
        }
        last = x.signum();
    }
    changes
}

/// `n`-th eigenvalue of `−½d²/dy² + ½y² + V(y)` (Dirichlet box), by three-point
/// differences with Richardson extrapolation in the spacing. The state is
/// confirmed to have exactly `n` sign changes on the coarsest grid.
pub fn schrodinger_fd_level(potential: &dyn Fn(f64) -> Result<f64>, n: u64, grid: &FdGrid) -> Result<f64> {
    if !(grid.spacing > 0.0 && grid.spacing <= 0.02) {
        return Err(Error::InvalidArgument(format!("grid spacing must lie in (0, 0.02], got {}", grid.spacing)));
    }
    if grid.extent < 1.5 || grid.levels < 2 || grid.max_levels < grid.levels {
        return Err(Error::InvalidArgument("grid extent must be ≥ 1.5 and levels ≥ 2".into()));
    }
    let r = (2.0 * n as f64 + 1.0).sqrt();
    let half_length = r + (grid.extent * r).max(8.0);
    let coarse_points = (2.0 * half_length / grid.spacing).ceil() as usize;

    let mut table: Vec<Vec<f64>> = Vec::new();
    let mut level = 0;
    loop {
        let points = coarse_points << level;
        let t = fd_matrix(potential, half_length, points)?;
        if (n as usize) >= t.dim() {
            return Err(Error::InvalidArgument("grid has fewer points than the requested state index".into()));
        }
        let lambda = t.eigenvalue(n as usize);
        if level == 0 {
            let mut band = SymBand::zeros(t.dim(), 1);
            for i in 0..t.dim() {
                band.set(i, i, t.d[i]);
                if i + 1 < t.dim() {
                    band.set(i + 1, i, t.e[i]);
                }
            }
            let v = inverse_iteration(&band, &[lambda]).pop().unwrap();
            let found = count_sign_changes(&v);
            if found != n {
                return Err(Error::NodeCountMismatch { expected: n, found });
            }
        }
        let mut row = vec![lambda];
        for m in 1..=level {
            let f = 4f64.powi(m as i32);
            let prev = &table[level - 1];
            row.push(row[m - 1] + (row[m - 1] - prev[m - 1]) / (f - 1.0));
        }
        table.push(row);
        level += 1;
        if level >= grid.levels {
            let last = table[level - 1][level - 1];
            let before = table[level - 2][level - 2];
            let change = (last - before).abs();
            if change <= grid.tolerance {
                return Ok(last);
            }
            if level >= grid.max_levels {
                return Err(Error::GridTooCoarse { change });
            }
        }
    }
}

/// Dressed energy of `level` at quantum number `n` from the 1-D problem
/// `(E + ½)u = [E_j(y) + ½(−d²/dy² + y²)]u`: eigenvalue minus `n + ½`.
pub fn h0_level_fd(params: &ModelParams, level: Level, n: u64, grid: &FdGrid) -> Result<DressedLevel> {
    if n > FD_MAX_N {
        return Err(Error::InvalidArgument(format!("finite differences limited to n ≤ {FD_MAX_N}, got {n}")));
    }
    let potential = |y: f64| eigenvalues_at(params, y).map(|e| e[level.index()]);
    let lambda = schrodinger_fd_level(&potential, n, grid)?;
    Ok(DressedLevel { level, n, energy: lambda - 0.5 - n as f64, method: DressedMethod::Fd })
}

/// Rays from the origin of the `(g1, g2)` quadrant.
#[derive(Debug, Clone, PartialEq)]
pub struct RaySet {
    /// Polar angles in `[0, π/2]`; `g = t·(cos φ, sin φ)`.
    pub angles: Vec<f64>,
    pub g_max: f64,
    /// Uniform samples along each ray used to bracket roots.
    pub samples: usize,
    /// Extra rays inserted by angular bisection where the number of roots
    /// changes between neighbouring rays.
    pub refine: usize,
}

impl RaySet {
    pub fn quadrant(count: usize, g_max: f64) -> Self {
        let count = count.max(2);
        let angles = (0..count).map(|i| std::f64::consts::FRAC_PI_2 * i as f64 / (count - 1) as f64).collect();
        RaySet { angles, g_max, samples: 200, refine: 40 }
    }
}

impl Default for RaySet {
    fn default() -> Self {
        RaySet::quadrant(181, 1.25)
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ContourPoint {
    pub g1: f64,
    pub g2: f64,
    pub angle: f64,
    pub radius: f64,
    /// `E_k − E_j − Δn` recomputed with doubled quadrature nodes.
    pub residual: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ResonanceContour {
    pub lower: Level,
    pub upper: Level,
    pub delta_n: u32,
    /// Ordered by angle, then radius.
    pub points: Vec<ContourPoint>,
    /// Base rays that the contour does not cross.
    pub rays_without_root: Vec<f64>,
    /// Base rays crossed more than once.
    pub rays_with_multiple_roots: Vec<f64>,
}

/// Δn for which `Φ_{j,n}` and `Φ_{k,n−Δn}` share a parity sector.
pub fn check_parity(lower: Level, upper: Level, delta_n: u32) -> Result<()> {
    if lower >= upper {
        return Err(Error::InvalidArgument(format!("transition needs lower < upper, got {lower}→{upper}")));
    }
    if (upper.number() as u32 - lower.number() as u32 + delta_n) % 2 != 0 {
        return Err(Error::ParityForbidden { lower: lower.number(), upper: upper.number(), delta_n });
    }
    Ok(())
}

const CONTOUR_TOL: f64 = 1e-6;

struct RayProblem<'a> {
    template: &'a ModelParams,
    lower: Level,
    upper: Level,
    delta_n: f64,
}

impl RayProblem<'_> {
    fn residual(&self, angle: f64, t: f64, nodes: usize) -> Result<f64> {
        let p = self.template.with_dimensionless(t * angle.cos(), t * angle.sin())?;
        let e = wkb_levels(&p, p.n0(), nodes)?;
        Ok(e[self.upper.index()] - e[self.lower.index()] - self.delta_n)
    }

    fn roots(&self, angle: f64, rays: &RaySet) -> Result<Vec<ContourPoint>> {
        let g = rays.g_max;
        let mut ts: Vec<f64> = (0..12).map(|i| g * 1e-4 * (200f64).powf(i as f64 / 11.0)).collect();
        let start = g * 0.02;
        ts.extend((1..=rays.samples).map(|i| start + (g - start) * i as f64 / rays.samples as f64));
        let fs = ts.iter().map(|&t| self.residual(angle, t, DEFAULT_WKB_NODES)).collect::<Result<Vec<_>>>()?;
        let mut out = Vec::new();
        for i in 0..ts.len() {
            let root = if fs[i] == 0.0 {
                Some(ts[i])
            } else if i + 1 < ts.len() && fs[i] * fs[i + 1] < 0.0 {
                Some(self.bisect(angle, ts[i], fs[i], ts[i + 1])?)
            } else {
                None
            };
            if let Some(t) = root {
                let residual = self.residual(angle, t, 2 * DEFAULT_WKB_NODES)?;
                if residual.abs() <= CONTOUR_TOL {
                    out.push(ContourPoint { g1: t * angle.cos(), g2: t * angle.sin(), angle, radius: t, residual });
                }
            }
        }
        Ok(out)
    }

    fn bisect(&self, angle: f64, mut a: f64, fa: f64, mut b: f64) -> Result<f64> {
        for _ in 0..200 {
            let m = 0.5 * (a + b);
            let fm = self.residual(angle, m, DEFAULT_WKB_NODES)?;
            if fm.abs() <= 0.01 * CONTOUR_TOL || b - a <= 1e-15 * b {
                return Ok(m);
            }
            if (fm < 0.0) == (fa < 0.0) {
                a = m;
            } else {
                b = m;
            }
        }
        Ok(0.5 * (a + b))
    }
}

/// Trace `E_k − E_j = Δn` (WKB energies at `n = n0`) across the quadrant.
pub fn resonance_contour(
    template: &ModelParams,
    lower: Level,
    upper: Level,
    delta_n: u32,
    rays: &RaySet,
) -> Result<ResonanceContour> {
    check_parity(lower, upper, delta_n)?;
    let problem = RayProblem { template, lower, upper, delta_n: delta_n as f64 };
    let base: Vec<Vec<ContourPoint>> =
        rays.angles.par_iter().map(|&a| problem.roots(a, rays)).collect::<Result<Vec<_>>>()?;

    let mut points: Vec<ContourPoint> = base.iter().flatten().copied().collect();
    let rays_without_root = rays.angles.iter().zip(&base).filter(|(_, r)| r.is_empty()).map(|(a, _)| *a).collect();
    let rays_with_multiple_roots =
        rays.angles.iter().zip(&base).filter(|(_, r)| r.len() > 1).map(|(a, _)| *a).collect();

    // Where neighbouring rays see different root counts the contour ends or
    // folds between them; bisect in angle to follow it there.
    let pairs: Vec<usize> = (0..base.len().saturating_sub(1)).filter(|&i| base[i].len() != base[i + 1].len()).collect();
    let extra: Vec<Vec<ContourPoint>> = pairs
        .par_iter()
        .map(|&i| {
            let (mut a, mut b) = (rays.angles[i], rays.angles[i + 1]);
            let count_a = base[i].len();
            let mut found = Vec::new();
            for _ in 0..rays.refine {
                if b - a <= 1e-13 {
                    break;
                }
                let m = 0.5 * (a + b);
                let r = problem.roots(m, rays)?;
                let same_as_a = r.len() == count_a;
                found.extend(r);
                if same_as_a {
                    a = m;
                } else {
                    b = m;
                }
            }
            Ok(found)
        })
        .collect::<Result<Vec<_>>>()?;
    points.extend(extra.into_iter().flatten());
    points.sort_by(|p, q| p.angle.total_cmp(&q.angle).then(p.radius.total_cmp(&q.radius)));
    Ok(ResonanceContour { lower, upper, delta_n, points, rays_without_root, rays_with_multiple_roots })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn ladder(g1: f64, g2: f64) -> ModelParams {
        ModelParams::reference_ladder(g1, g2).unwrap()
    }

    #[test]
    fn uncoupled_wkb_is_bare() {
        let p = ladder(0.0, 0.0);
        assert_eq!(wkb_levels(&p, p.n0(), 256).unwrap(), [0.0, 11.0, 24.0]);
    }

    #[test]
    fn sum_rule_and_ordering() {
        for (g1, g2) in [(0.5, 0.5), (0.2, 0.9), (1.0, 0.1)] {
            let p = ladder(g1, g2);
            let e = wkb_levels(&p, p.n0(), 256).unwrap();
            assert!((e.iter().sum::<f64>() - 35.0).abs() < 1e-9);
            assert!(e[0] <= e[1] && e[1] <= e[2]);
        }
    }

    #[test]
    fn weak_coupling_transitions() {
        let p = ladder(1e-4, 1e-4);
        assert!((dressed_transition(&p, Level::ONE, Level::TWO, p.n0()).unwrap() - 11.0).abs() < 1e-6);
        assert!((dressed_transition(&p, Level::TWO, Level::THREE, p.n0()).unwrap() - 13.0).abs() < 1e-6);
        assert_eq!(dressed_transition(&p, Level::TWO, Level::TWO, p.n0()).unwrap(), 0.0);
    }

    #[test]
    fn strong_upper_coupling_pulls_level_two_down() {
        let p = ladder(0.1, 1.0);
        assert!(dressed_transition(&p, Level::ONE, Level::TWO, p.n0()).unwrap() < 11.0);
    }

    #[test]
    fn fd_recovers_bare_levels() {
        let p = ModelParams::new([0.0, 11.0, 24.0], 0.0, 0.0, 20).unwrap();
        for level in Level::all() {
            let d = h0_level_fd(&p, level, 20, &FdGrid::default()).unwrap();
            assert!((d.energy - p.energy(level)).abs() < 1e-6, "{:?}", d);
        }
    }

    #[test]
    fn fd_two_level_reduction() {
        let u = 0.07;
        let p = ModelParams::new([0.0, 11.0, 24.0], u, 0.0, 100).unwrap();
        let closed = |y: f64| Ok(5.5 - (30.25 + 2.0 * u * u * y * y).sqrt());
        let direct = h0_level_fd(&p, Level::ONE, 100, &FdGrid::default()).unwrap().energy;
        let reduced = schrodinger_fd_level(&closed, 100, &FdGrid::default()).unwrap() - 100.5;
        assert!((direct - reduced).abs() < 1e-8, "{direct} vs {reduced}");
    }

    #[test]
    fn even_delta_n_rejected() {
        let p = ladder(0.1, 0.1);
        let r = resonance_contour(&p, Level::ONE, Level::TWO, 12, &RaySet::quadrant(3, 1.0));
        assert!(matches!(r, Err(Error::ParityForbidden { .. })));
        assert!(check_parity(Level::ONE, Level::THREE, 12).is_ok());
    }
}
