//! Exact reference solver: the full Hamiltonian
//!
//! ```text
//! H = Σ_i e_i|i⟩⟨i| + N + U(|1⟩⟨2| + |2⟩⟨1|)(a + a†) + V(|2⟩⟨3| + |3⟩⟨2|)(a + a†)
//! ```
//!
//! on a Fock window `[n0 − W, n0 + W]`. `(i + n) mod 2` is conserved, so each
//! parity sector is a banded matrix of bandwidth 2 when states are ordered by
//! `n`, then `i`.
//!
//! Diagonal entries are stored relative to `n0·ħω₀` (i.e. `e_i + n − n0`), so
//! eigenvalues near the window centre keep full precision even at `n0 = 10⁸`.
//! Add [`FockWindowHamiltonian::offset`] to recover absolute energies.

use nalgebra::{DMatrix, DVector, SymmetricEigen};
use rayon::prelude::*;

use crate::dressed_levels::{check_parity, wkb_levels, DEFAULT_WKB_NODES};
use crate::error::{Error, Result};
use crate::linalg::{assign_max, inverse_iteration, residual, SymBand};
use crate::oscillator::{dressed_state_window, FockRange};
use crate::trilevel_core::{eigenbasis_at, Level, ModelParams};

pub const DEFAULT_HALF_WIDTH: u64 = 400;
pub const MIN_HALF_WIDTH: u64 = 8;

/// Largest dimension handled by the dense fallback.
pub const DENSE_LIMIT: usize = 6000;

/// Central eigenvalues may move by at most this much when `W` doubles.
pub const WINDOW_TOLERANCE: f64 = 1e-8;

/// Inverse resonance magnitudes are capped here.
pub const SHARPNESS_CAP: f64 = 1e6;

const RESIDUAL_RTOL: f64 = 1e-9;
const ORTHO_TOL: f64 = 1e-10;
const LABEL_PAD: u64 = 64;
const MAX_REFINE_DEPTH: usize = 12;

/// Which `(i, n)` states a Hamiltonian block contains.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Sector {
    /// `i + n` even (levels numbered 1..=3).
    Even,
    Odd,
    /// No parity restriction (bandwidth 4).
    Full,
}

impl Sector {
    pub fn of(level: Level, n: u64) -> Sector {
        if (level.number() as u64 + n) % 2 == 0 {
            Sector::Even
        } else {
            Sector::Odd
        }
    }

    pub fn contains(self, level: Level, n: u64) -> bool {
        match self {
            Sector::Full => true,
            s => Sector::of(level, n) == s,
        }
    }
}

/// Fock window `[center − half_width, center + half_width]`.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct FockWindow {
    pub center: u64,
    pub half_width: u64,
}

impl FockWindow {
    pub fn new(center: u64, half_width: u64) -> Result<Self> {
        if half_width < MIN_HALF_WIDTH {
            return Err(Error::InvalidArgument(format!("half-width must be ≥ {MIN_HALF_WIDTH}, got {half_width}")));
        }
        if center < half_width {
            return Err(Error::WindowUnderflow { n0: center, half_width });
        }
        Ok(FockWindow { center, half_width })
    }

    pub fn lo(&self) -> u64 {
        self.center - self.half_width
    }

    pub fn hi(&self) -> u64 {
        self.center + self.half_width
    }

    /// Twice the half-width, clipped so the window stays at `n ≥ 0`.
    pub fn doubled(&self) -> FockWindow {
        FockWindow { center: self.center, half_width: (2 * self.half_width).min(self.center) }
    }
}

/// `⟨a|H|b⟩ − n0·δ_ab` straight from the element rules.
pub fn hamiltonian_element(params: &ModelParams, center: u64, a: (Level, u64), b: (Level, u64)) -> f64 {
    let ((i, n), (j, m)) = (a, b);
    if a == b {
        return params.energy(i) + (n as f64 - center as f64);
    }
    if n.abs_diff(m) != 1 {
        return 0.0;
    }
    let root = (n.max(m) as f64).sqrt();
    match (i.number().min(j.number()), i.number().max(j.number())) {
        (1, 2) => params.u() * root,
        (2, 3) => params.v() * root,
        _ => 0.0,
    }
}

/// One parity block (or the unsplit matrix) on a Fock window.
#[derive(Debug, Clone)]
pub struct FockWindowHamiltonian {
    pub params: ModelParams,
    pub window: FockWindow,
    pub sector: Sector,
    labels: Vec<(Level, u64)>,
    /// Index of the first label with quantum number `lo + k`.
    first: Vec<usize>,
    matrix: SymBand,
}

impl FockWindowHamiltonian {
    pub fn dim(&self) -> usize {
        self.labels.len()
    }

    pub fn labels(&self) -> &[(Level, u64)] {
        &self.labels
    }

    pub fn matrix(&self) -> &SymBand {
        &self.matrix
    }

    /// Energy to add to eigenvalues to obtain absolute energies.
    pub fn offset(&self) -> f64 {
        self.window.center as f64
    }

    pub fn index_of(&self, level: Level, n: u64) -> Option<usize> {
        if n < self.window.lo() || n > self.window.hi() || !self.sector.contains(level, n) {
            return None;
        }
        let base = self.first[(n - self.window.lo()) as usize];
        let before = Level::all().iter().filter(|l| **l < level && self.sector.contains(**l, n)).count();
        Some(base + before)
    }
}

pub fn build_hamiltonian(params: &ModelParams, window: FockWindow, sector: Sector) -> Result<FockWindowHamiltonian> {
    let window = FockWindow::new(window.center, window.half_width)?;
    let mut labels = Vec::new();
    let mut first = Vec::new();
    for n in window.lo()..=window.hi() {
        first.push(labels.len());
        labels.extend(Level::all().into_iter().filter(|l| sector.contains(*l, n)).map(|l| (l, n)));
    }
    let bw = if sector == Sector::Full { 4 } else { 2 };
    let mut matrix = SymBand::zeros(labels.len(), bw);
    let mut h = FockWindowHamiltonian { params: *params, window, sector, labels, first, matrix: SymBand::zeros(0, bw) };
    for (k, &(level, n)) in h.labels.iter().enumerate() {
        matrix.set(k, k, hamiltonian_element(params, window.center, (level, n), (level, n)));
        for other in Level::all() {
            if let Some(j) = h.index_of(other, n + 1) {
                let value = hamiltonian_element(params, window.center, (level, n), (other, n + 1));
                if value != 0.0 {
                    matrix.set(j, k, value);
                }
            }
        }
    }
    h.matrix = matrix;
    Ok(h)
}

/// Eigenvalue (relative to `n0·ħω₀`) with its unit eigenvector.
#[derive(Debug, Clone, PartialEq)]
pub struct EigenPair {
    pub value: f64,
    pub vector: Vec<f64>,
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

fn acceptable(h: &SymBand, pairs: &[EigenPair]) -> bool {
    let tol = RESIDUAL_RTOL * h.norm_inf().max(1.0);
    if pairs.iter().any(|p| !(residual(h, p.value, &p.vector) <= tol)) {
        return false;
    }
    for (a, p) in pairs.iter().enumerate() {
        for q in &pairs[a..] {
            let want = if std::ptr::eq(p, q) { 1.0 } else { 0.0 };
            if !((dot(&p.vector, &q.vector) - want).abs() <= ORTHO_TOL) {
                return false;
            }
        }
    }
    true
}

fn dense_near(h: &SymBand, target: f64, count: usize) -> Vec<EigenPair> {
    let eig = SymmetricEigen::new(h.to_dense());
    let mut order: Vec<usize> = (0..h.dim()).collect();
    order.sort_by(|&a, &b| {
        (eig.eigenvalues[a] - target).abs().total_cmp(&(eig.eigenvalues[b] - target).abs()).then(a.cmp(&b))
    });
    order.truncate(count);
    order.sort_by(|&a, &b| eig.eigenvalues[a].total_cmp(&eig.eigenvalues[b]));
    order
        .into_iter()
        .map(|i| EigenPair { value: eig.eigenvalues[i], vector: eig.eigenvectors.column(i).iter().copied().collect() })
        .collect()
}

/// The `count` eigenpairs nearest `target` (relative energy), ascending.
///
/// Band → tridiagonal reduction, Sturm bisection and inverse iteration;
/// results that miss the residual or orthonormality bounds are recomputed
/// densely when the dimension allows.
pub fn eigen_near(h: &FockWindowHamiltonian, target: f64, count: usize) -> Result<Vec<EigenPair>> {
    let a = h.matrix();
    let n = a.dim();
    if count > n {
        return Err(Error::InvalidArgument(format!("asked for {count} eigenpairs of a {n}-dimensional matrix")));
    }
    if a.is_diagonal() {
        let d = a.diagonal();
        let mut order: Vec<usize> = (0..n).collect();
        order.sort_by(|&x, &y| (d[x] - target).abs().total_cmp(&(d[y] - target).abs()).then(x.cmp(&y)));
        order.truncate(count);
        order.sort_by(|&x, &y| d[x].total_cmp(&d[y]).then(x.cmp(&y)));
        return Ok(order
            .into_iter()
            .map(|i| {
                let mut vector = vec![0.0; n];
                vector[i] = 1.0;
                EigenPair { value: d[i], vector }
            })
            .collect());
    }
    let values: Vec<f64> = a.tridiagonalize().nearest(target, count).into_iter().map(|(_, v)| v).collect();
    let vectors = inverse_iteration(a, &values);
    let pairs: Vec<EigenPair> =
        values.into_iter().zip(vectors).map(|(value, vector)| EigenPair { value, vector }).collect();
    if acceptable(a, &pairs) {
        return Ok(pairs);
    }
    if n > DENSE_LIMIT {
        return Err(Error::Eigensolver(format!("inverse iteration failed and dimension {n} exceeds the dense limit")));
    }
    let dense = dense_near(a, target, count);
    if acceptable(a, &dense) {
        Ok(dense)
    } else {
        Err(Error::Eigensolver("dense fallback missed the residual bound".into()))
    }
}

/// Eigenvalues only, nearest `target`, ascending.
pub fn eigenvalues_near(h: &FockWindowHamiltonian, target: f64, count: usize) -> Vec<f64> {
    let a = h.matrix();
    if a.is_diagonal() {
        let mut d = a.diagonal();
        d.sort_by(|x, y| (x - target).abs().total_cmp(&(y - target).abs()));
        d.truncate(count);
        d.sort_by(f64::total_cmp);
        return d;
    }
    a.tridiagonalize().nearest(target, count).into_iter().map(|(_, v)| v).collect()
}

/// The adiabatic product state `u_j(y)·χ_{j,n}(y)` expanded on the sector
/// basis of `h` (components outside the window or sector dropped).
pub fn product_state(h: &FockWindowHamiltonian, level: Level, n: u64) -> Result<Vec<f64>> {
    let params = &h.params;
    let pad = LABEL_PAD.min(n);
    let range = FockRange::around(n, n, pad);
    let spectrum = range.position_spectrum();
    let estimate = wkb_levels(params, n, DEFAULT_WKB_NODES)?[level.index()];
    let chi = dressed_state_window(params, level, n, &spectrum, estimate)?;
    let at_nodes = spectrum.project(&chi.coeffs);
    let mut columns = Vec::with_capacity(spectrum.nodes.len());
    for &y in &spectrum.nodes {
        columns.push(eigenbasis_at(params, y, None)?.column(level));
    }
    let mut out = vec![0.0; h.dim()];
    for i in Level::all() {
        let weights = DVector::from_iterator(columns.len(), columns.iter().zip(at_nodes.iter()).map(|(c, x)| c[i.index()] * x));
        let coeffs = &spectrum.vectors * weights;
        for (k, c) in coeffs.iter().enumerate() {
            if let Some(idx) = h.index_of(i, range.lo + k as u64) {
                out[idx] = *c;
            }
        }
    }
    Ok(out)
}

/// Exact dressed energy of one level, identified by overlap with its
/// adiabatic product state.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ExactDressed {
    pub level: Level,
    /// Eigenvalue minus the bare ladder position `n − n0`.
    pub energy: f64,
    /// `|⟨product state|eigenvector⟩|`.
    pub overlap: f64,
}

const LABEL_CANDIDATES: usize = 8;

fn label_in(h: &FockWindowHamiltonian, level: Level, n: u64) -> Result<(ExactDressed, EigenPair)> {
    let state = product_state(h, level, n)?;
    let estimate = wkb_levels(&h.params, n, DEFAULT_WKB_NODES)?[level.index()] + (n as f64 - h.window.center as f64);
    let pairs = eigen_near(h, estimate, LABEL_CANDIDATES.min(h.dim()))?;
    let (best, overlap) = pairs
        .iter()
        .map(|p| dot(&p.vector, &state).abs())
        .enumerate()
        .max_by(|a, b| a.1.total_cmp(&b.1))
        .ok_or_else(|| Error::Eigensolver("no candidate eigenpairs".into()))?;
    let pair = pairs[best].clone();
    let energy = pair.value - (n as f64 - h.window.center as f64);
    Ok((ExactDressed { level, energy, overlap }, pair))
}

/// Exact dressed energies `E_j` for the three states `(j, n0)` at the window
/// centre.
pub fn exact_dressed_energies(params: &ModelParams, window: FockWindow) -> Result<[ExactDressed; 3]> {
    let even = build_hamiltonian(params, window, Sector::Even)?;
    let odd = build_hamiltonian(params, window, Sector::Odd)?;
    let pick = |level: Level| {
        let h = if Sector::of(level, window.center) == Sector::Even { &even } else { &odd };
        label_in(h, level, window.center).map(|r| r.0)
    };
    Ok([pick(Level::ONE)?, pick(Level::TWO)?, pick(Level::THREE)?])
}

/// [`exact_dressed_energies`] plus a window-doubling check; returns the
/// largest change.
pub fn exact_dressed_energies_checked(params: &ModelParams, window: FockWindow) -> Result<([ExactDressed; 3], f64)> {
    let base = exact_dressed_energies(params, window)?;
    let wide = exact_dressed_energies(params, window.doubled())?;
    let change = (0..3).map(|j| (base[j].energy - wide[j].energy).abs()).fold(0.0, f64::max);
    if change > WINDOW_TOLERANCE {
        return Err(Error::WindowNonConvergence { change });
    }
    Ok((base, change))
}

/// `(g1, g2) = s·direction` for `s` in `[start, end]`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LineSegment {
    pub direction: (f64, f64),
    pub start: f64,
    pub end: f64,
}

impl LineSegment {
    /// The line `g2 = ratio·g1`, parameterized by `g1`.
    pub fn ratio(ratio: f64, start: f64, end: f64) -> Self {
        LineSegment { direction: (1.0, ratio), start, end }
    }

    pub fn point(&self, s: f64) -> (f64, f64) {
        (self.direction.0 * s, self.direction.1 * s)
    }

    pub fn params(&self, template: &ModelParams, s: f64) -> Result<ModelParams> {
        let (g1, g2) = self.point(s);
        template.with_dimensionless(g1, g2)
    }
}

/// Two tracked labels swapping energy order between consecutive points.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RelabelEvent {
    pub from: f64,
    pub to: f64,
    pub first: (Level, u64),
    pub second: (Level, u64),
}

#[derive(Debug, Clone, PartialEq)]
pub struct TrackedLevels {
    pub labels: Vec<(Level, u64)>,
    pub points: Vec<f64>,
    /// `energies[p][l]`: eigenvalue (relative to `n0·ħω₀`) of label `l` at
    /// point `p`.
    pub energies: Vec<Vec<f64>>,
    /// `overlaps[p][a][b]`: `|⟨label a at point p|label b at point p+1⟩|`,
    /// labels within one sector only (zero across sectors).
    pub overlaps: Vec<Vec<Vec<f64>>>,
    pub relabel_events: Vec<RelabelEvent>,
    /// Points inserted by automatic refinement.
    pub refinements: usize,
}

struct SectorTrack {
    members: Vec<usize>,
    sector: Sector,
    vectors: Vec<Vec<f64>>,
    values: Vec<f64>,
}

fn step_sector(
    template: &ModelParams,
    line: &LineSegment,
    window: FockWindow,
    track: &SectorTrack,
    s: f64,
) -> Result<(Vec<f64>, Vec<Vec<f64>>, Vec<f64>)> {
    let h = build_hamiltonian(&line.params(template, s)?, window, track.sector)?;
    let target = track.values.iter().sum::<f64>() / track.values.len() as f64;
    let spread = track.values.iter().map(|v| (v - target).abs()).fold(0.0, f64::max);
    let count = (track.members.len() + 6 + (2.0 * spread) as usize).min(h.dim());
    let pairs = eigen_near(&h, target, count)?;
    let weights: Vec<Vec<f64>> =
        track.vectors.iter().map(|v| pairs.iter().map(|p| dot(v, &p.vector).abs()).collect()).collect();
    let pick = assign_max(&weights);
    let best: Vec<f64> = pick.iter().enumerate().map(|(r, &c)| weights[r][c]).collect();
    let second: Vec<f64> = weights
        .iter()
        .zip(&pick)
        .map(|(row, &c)| row.iter().enumerate().filter(|(k, _)| *k != c).map(|(_, w)| *w).fold(0.0, f64::max))
        .collect();
    let values = pick.iter().map(|&c| pairs[c].value).collect();
    let vectors = pick.iter().map(|&c| pairs[c].vector.clone()).collect();
    let quality = best.iter().zip(&second).map(|(b, s)| if b - s <= 1e-3 { -1.0 } else { *b }).collect();
    Ok((values, vectors, quality))
}

fn advance(
    template: &ModelParams,
    line: &LineSegment,
    window: FockWindow,
    track: &mut SectorTrack,
    from: f64,
    to: f64,
    depth: usize,
    refinements: &mut usize,
) -> Result<()> {
    let (values, vectors, quality) = step_sector(template, line, window, track, to)?;
    let worst = quality.iter().copied().fold(f64::INFINITY, f64::min);
    if worst > 0.5 {
        track.values = values;
        track.vectors = vectors;
        return Ok(());
    }
    if depth >= MAX_REFINE_DEPTH {
        if worst < 0.0 {
            return Err(Error::LabelAmbiguity { t: to, first: 0.5, second: 0.5 });
        }
        return Err(Error::LabelAmbiguity { t: to, first: worst, second: 0.5 });
    }
    let mid = 0.5 * (from + to);
    *refinements += 1;
    advance(template, line, window, track, from, mid, depth + 1, refinements)?;
    advance(template, line, window, track, mid, to, depth + 1, refinements)
}

/// Follow the eigenstates that start as the adiabatic states `labels` at the
/// first point, by maximal eigenvector overlap between consecutive points.
/// Steps whose overlaps fall to 0.5 or below are bisected automatically.
pub fn track_levels(
    template: &ModelParams,
    line: &LineSegment,
    points: &[f64],
    window: FockWindow,
    labels: &[(Level, u64)],
) -> Result<TrackedLevels> {
    let mut out = TrackedLevels {
        labels: labels.to_vec(),
        points: points.to_vec(),
        energies: Vec::new(),
        overlaps: Vec::new(),
        relabel_events: Vec::new(),
        refinements: 0,
    };
    if points.is_empty() || labels.is_empty() {
        return Ok(out);
    }
    for (i, a) in labels.iter().enumerate() {
        if labels[..i].contains(a) {
            return Err(Error::InvalidArgument(format!("label ({}, {}) repeated", a.0, a.1)));
        }
    }

    let first = line.params(template, points[0])?;
    let mut tracks: Vec<SectorTrack> = Vec::new();
    for sector in [Sector::Even, Sector::Odd] {
        let members: Vec<usize> = (0..labels.len()).filter(|&i| Sector::of(labels[i].0, labels[i].1) == sector).collect();
        if members.is_empty() {
            continue;
        }
        let h = build_hamiltonian(&first, window, sector)?;
        let mut vectors = Vec::new();
        let mut values = Vec::new();
        for &m in &members {
            let (level, n) = labels[m];
            if h.index_of(level, n).is_none() {
                return Err(Error::InvalidArgument(format!("label ({level}, {n}) outside the window")));
            }
            let (_, pair) = label_in(&h, level, n)?;
            if vectors.iter().any(|v: &Vec<f64>| dot(v, &pair.vector).abs() > 0.5) {
                return Err(Error::LabelAmbiguity { t: points[0], first: 1.0, second: 1.0 });
            }
            values.push(pair.value);
            vectors.push(pair.vector);
        }
        tracks.push(SectorTrack { members, sector, vectors, values });
    }

    let record = |tracks: &[SectorTrack]| {
        let mut e = vec![0.0; labels.len()];
        for t in tracks {
            for (slot, &m) in t.members.iter().enumerate() {
                e[m] = t.values[slot];
            }
        }
        e
    };
    out.energies.push(record(&tracks));

    for w in points.windows(2) {
        let (from, to) = (w[0], w[1]);
        let before: Vec<Vec<Vec<f64>>> = tracks.iter().map(|t| t.vectors.clone()).collect();
        let order_before: Vec<Vec<f64>> = tracks.iter().map(|t| t.values.clone()).collect();
        for t in tracks.iter_mut() {
            advance(template, line, window, t, from, to, 0, &mut out.refinements)?;
        }
        let mut overlap = vec![vec![0.0; labels.len()]; labels.len()];
        for (t, old) in tracks.iter().zip(&before) {
            for (a, &ma) in t.members.iter().enumerate() {
                for (b, &mb) in t.members.iter().enumerate() {
                    overlap[ma][mb] = dot(&old[a], &t.vectors[b]).abs();
                }
            }
        }
        out.overlaps.push(overlap);
        for (t, old) in tracks.iter().zip(&order_before) {
            for a in 0..t.members.len() {
                for b in a + 1..t.members.len() {
                    if (old[a] < old[b]) != (t.values[a] < t.values[b]) {
                        out.relabel_events.push(RelabelEvent {
                            from,
                            to,
                            first: labels[t.members[a]],
                            second: labels[t.members[b]],
                        });
                    }
                }
            }
        }
        out.energies.push(record(&tracks));
    }
    Ok(out)
}

/// Search settings for [`anticrossing_gap`].
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GapSearch {
    pub scan_points: usize,
    /// Golden-section stops once the bracket is narrower than this (in `s`).
    pub tolerance: f64,
    /// Largest relative change of the gap allowed when `W` doubles.
    pub window_rtol: f64,
}

impl Default for GapSearch {
    fn default() -> Self {
        GapSearch { scan_points: 101, tolerance: 1e-10, window_rtol: 0.01 }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GapMinimum {
    pub location: f64,
    pub g1: f64,
    pub g2: f64,
    pub gap: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct AnticrossingGap {
    pub lower: Level,
    pub upper: Level,
    pub delta_n: u32,
    /// The smallest of the local minima.
    pub best: GapMinimum,
    /// Every local minimum found by the scan, ordered by location.
    pub minima: Vec<GapMinimum>,
    /// Relative change of the best gap when the window was doubled.
    pub window_change: f64,
}

struct GapProblem<'a> {
    template: &'a ModelParams,
    line: &'a LineSegment,
    lower: Level,
    upper: Level,
    delta_n: u32,
    window: FockWindow,
}

const GAP_CANDIDATES: usize = 6;

impl GapProblem<'_> {
    /// Spacing of the two exact levels carrying the most weight of the
    /// product states `(lower, n0)` and `(upper, n0 − Δn)`, and those levels.
    /// Third states passing through the pair do not hijack the gap.
    fn gap_with(&self, s: f64, window: FockWindow) -> Result<(f64, [f64; 2])> {
        let p = self.line.params(self.template, s)?;
        let n0 = window.center;
        let target = wkb_levels(&p, n0, DEFAULT_WKB_NODES)?[self.lower.index()];
        let h = build_hamiltonian(&p, window, Sector::of(self.lower, n0))?;
        let a = product_state(&h, self.lower, n0)?;
        let b = product_state(&h, self.upper, n0 - self.delta_n as u64)?;
        let pairs = eigen_near(&h, target, GAP_CANDIDATES.min(h.dim()))?;
        let mut ranked: Vec<(f64, f64)> = pairs
            .iter()
            .map(|q| (dot(&q.vector, &a).powi(2) + dot(&q.vector, &b).powi(2), q.value))
            .collect();
        ranked.sort_by(|x, y| y.0.total_cmp(&x.0));
        if ranked.len() < 2 {
            return Err(Error::Eigensolver("window too small for a gap".into()));
        }
        let (lo, hi) = (ranked[0].1.min(ranked[1].1), ranked[0].1.max(ranked[1].1));
        Ok((hi - lo, [lo, hi]))
    }

    fn gap(&self, s: f64) -> Result<f64> {
        self.gap_with(s, self.window).map(|g| g.0)
    }

    fn golden(&self, mut a: f64, mut b: f64, tol: f64) -> Result<(f64, f64)> {
        let r = 0.5 * (5f64.sqrt() - 1.0);
        let mut c = b - r * (b - a);
        let mut d = a + r * (b - a);
        let mut fc = self.gap(c)?;
        let mut fd = self.gap(d)?;
        while b - a > tol {
            if fc <= fd {
                b = d;
                d = c;
                fd = fc;
                c = b - r * (b - a);
                fc = self.gap(c)?;
            } else {
                a = c;
                c = d;
                fc = fd;
                d = a + r * (b - a);
                fd = self.gap(d)?;
            }
        }
        Ok(if fc <= fd { (c, fc) } else { (d, fd) })
    }
}

/// Minimum spacing between the two exact levels that anticross at the
/// `(lower, upper, Δn)` resonance on `line`: a uniform scan, golden-section
/// refinement of every interior local minimum, and a window-doubling check
/// on the smallest.
pub fn anticrossing_gap(
    template: &ModelParams,
    line: &LineSegment,
    lower: Level,
    upper: Level,
    delta_n: u32,
    window: FockWindow,
    search: &GapSearch,
) -> Result<AnticrossingGap> {
    check_parity(lower, upper, delta_n)?;
    let window = FockWindow::new(window.center, window.half_width)?;
    if search.scan_points < 3 || !(line.end > line.start) {
        return Err(Error::InvalidArgument("gap scan needs ≥ 3 points on a non-empty segment".into()));
    }
    let problem = GapProblem { template, line, lower, upper, delta_n, window };
    let m = search.scan_points;
    let ss: Vec<f64> = (0..m).map(|i| line.start + (line.end - line.start) * i as f64 / (m - 1) as f64).collect();
    let gs = ss.iter().map(|&s| problem.gap(s)).collect::<Result<Vec<_>>>()?;
    let interior: Vec<usize> = (1..m - 1).filter(|&i| gs[i] < gs[i - 1] && gs[i] <= gs[i + 1]).collect();
    if interior.is_empty() {
        return Err(Error::NoBracket(format!(
            "no interior gap minimum for {lower}→{upper}, Δn = {delta_n} on s ∈ [{}, {}]",
            line.start, line.end
        )));
    }
    let mut minima = Vec::new();
    for i in interior {
        let (s, gap) = problem.golden(ss[i - 1], ss[i + 1], search.tolerance)?;
        let (g1, g2) = line.point(s);
        minima.push(GapMinimum { location: s, g1, g2, gap });
    }
    let best = *minima.iter().min_by(|a, b| a.gap.total_cmp(&b.gap)).unwrap();

    let (narrow, ev) = problem.gap_with(best.location, window)?;
    let (wide, ev_wide) = problem.gap_with(best.location, window.doubled())?;
    let shift = (ev[0] - ev_wide[0]).abs().max((ev[1] - ev_wide[1]).abs());
    let change = (wide - narrow).abs();
    let window_change = if narrow > 0.0 { change / narrow } else { change };
    if change > search.window_rtol * narrow + 1e-12 || shift > WINDOW_TOLERANCE {
        return Err(Error::WindowNonConvergence { change: window_change.max(shift) });
    }
    Ok(AnticrossingGap { lower, upper, delta_n, best, minima, window_change })
}

/// Rectangular `(g1, g2)` grid, endpoints included.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MapGrid {
    pub g1: (f64, f64),
    pub g2: (f64, f64),
    pub g1_points: usize,
    pub g2_points: usize,
}

impl MapGrid {
    fn axis(range: (f64, f64), count: usize, k: usize) -> f64 {
        if count == 1 {
            range.0
        } else {
            range.0 + (range.1 - range.0) * k as f64 / (count - 1) as f64
        }
    }

    /// Points in row-major order (`g2` outer, `g1` inner).
    pub fn points(&self) -> Vec<(f64, f64)> {
        (0..self.g2_points)
            .flat_map(|j| {
                (0..self.g1_points)
                    .map(move |i| (Self::axis(self.g1, self.g1_points, i), Self::axis(self.g2, self.g2_points, j)))
            })
            .collect()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SharpnessPoint {
    pub g1: f64,
    pub g2: f64,
    /// Exact dressed `E_k − E_j`; NaN when the point failed.
    pub transition: f64,
    /// Nearest odd multiple of ħω₀.
    pub delta_n: u32,
    pub distance: f64,
    /// `min(1/distance, cap)`.
    pub inverse: f64,
    pub error: Option<String>,
}

impl SharpnessPoint {
    pub fn is_valid(&self) -> bool {
        self.error.is_none()
    }
}

/// Nearest odd positive integer to `x`.
pub fn nearest_odd(x: f64) -> u32 {
    if x <= 1.0 {
        return 1;
    }
    (2.0 * ((x - 1.0) / 2.0).round() + 1.0) as u32
}

fn sharpness_at(template: &ModelParams, lower: Level, upper: Level, window: FockWindow, g: (f64, f64)) -> SharpnessPoint {
    let run = || -> Result<f64> {
        let p = template.with_dimensionless(g.0, g.1)?;
        let e = exact_dressed_energies(&p, window)?;
        Ok(e[upper.index()].energy - e[lower.index()].energy)
    };
    match run() {
        Ok(t) => {
            let dn = nearest_odd(t);
            let distance = (t - dn as f64).abs();
            let inverse = if distance > 1.0 / SHARPNESS_CAP { 1.0 / distance } else { SHARPNESS_CAP };
            SharpnessPoint { g1: g.0, g2: g.1, transition: t, delta_n: dn, distance, inverse, error: None }
        }
        Err(e) => SharpnessPoint {
            g1: g.0,
            g2: g.1,
            transition: f64::NAN,
            delta_n: 0,
            distance: f64::NAN,
            inverse: f64::NAN,
            error: Some(e.to_string()),
        },
    }
}

/// `|E_k − E_j − Δn|⁻¹` over a grid, from exact dressed energies, with `Δn`
/// the nearest odd integer. Failed points are marked and the map continues.
pub fn resonance_sharpness_map(
    template: &ModelParams,
    grid: &MapGrid,
    lower: Level,
    upper: Level,
    window: FockWindow,
) -> Result<Vec<SharpnessPoint>> {
    if lower >= upper {
        return Err(Error::InvalidArgument(format!("transition needs lower < upper, got {lower}→{upper}")));
    }
    let inside = |r: (f64, f64), max: f64| 0.0 <= r.0 && r.0 <= r.1 && r.1 <= max;
    if !inside(grid.g1, 1.0) || !inside(grid.g2, 1.25) || grid.g1_points == 0 || grid.g2_points == 0 {
        return Err(Error::InvalidArgument("map grid must be ordered and lie within [0,1]×[0,1.25]".into()));
    }
    let window = FockWindow::new(window.center, window.half_width)?;
    // one convergence check at the strongest-coupling corner
    let corner = template.with_dimensionless(grid.g1.1, grid.g2.1)?;
    exact_dressed_energies_checked(&corner, window)?;
    Ok(grid.points().par_iter().map(|&g| sharpness_at(template, lower, upper, window, g)).collect())
}

/// Dense matrix of `h` in its own basis, built element by element from
/// [`hamiltonian_element`] (independent of the band assembly).
pub fn dense_from_rules(h: &FockWindowHamiltonian) -> DMatrix<f64> {
    let n = h.dim();
    DMatrix::from_fn(n, n, |a, b| hamiltonian_element(&h.params, h.window.center, h.labels[a], h.labels[b]))
}
