//! Harmonic-oscillator machinery: normalized Hermite functions, Gauss–Hermite
//! rules, windowed Fock-space operators, and dressed oscillator states (the
//! eigenfunctions of `−½d²/dy² + ½y² + E_j(y)`).

use nalgebra::{DMatrix, DVector, SymmetricEigen};

use crate::error::{Error, Result};
use crate::linalg::Tridiagonal;
use crate::trilevel_core::{eigenvalues_at, Level, ModelParams};

const RESCALE: f64 = 1e150;

fn scaled_value(psi: f64, log_scale: f64) -> f64 {
    if psi == 0.0 {
        0.0
    } else {
        psi.signum() * (psi.abs().ln() + log_scale).exp()
    }
}

/// `φ_lo(y) … φ_hi(y)` by the upward recurrence
/// `φ_{k+1} = √(2/(k+1))·y·φ_k − √(k/(k+1))·φ_{k−1}`, carried with a separate
/// logarithmic scale so nothing under- or overflows for large `|y|`.
pub fn hermite_functions(y: f64, lo: usize, hi: usize) -> Vec<f64> {
    assert!(lo <= hi);
    let mut out = Vec::with_capacity(hi - lo + 1);
    let mut log_scale = -0.5 * y * y - 0.25 * std::f64::consts::PI.ln();
    let (mut prev, mut cur) = (0.0f64, 1.0f64);
    for k in 0..=hi {
        if k >= lo {
            out.push(scaled_value(cur, log_scale));
        }
        let kf = k as f64;
        let next = (2.0 / (kf + 1.0)).sqrt() * y * cur - (kf / (kf + 1.0)).sqrt() * prev;
        prev = cur;
        cur = next;
        if cur.abs() > RESCALE {
            prev /= RESCALE;
            cur /= RESCALE;
            log_scale += RESCALE.ln();
        }
    }
    out
}

/// `(φ_N(y), φ_{N−1}(y))` sharing one scale factor; only the ratio and the
/// scale-free value of `φ_{N−1}` are needed by the rule construction.
fn last_two(y: f64, n: usize) -> (f64, f64, f64) {
    let mut log_scale = -0.5 * y * y - 0.25 * std::f64::consts::PI.ln();
    let (mut prev, mut cur) = (0.0f64, 1.0f64);
    for k in 0..n {
        let kf = k as f64;
        let next = (2.0 / (kf + 1.0)).sqrt() * y * cur - (kf / (kf + 1.0)).sqrt() * prev;
        prev = cur;
        cur = next;
        if cur.abs() > RESCALE {
            prev /= RESCALE;
            cur /= RESCALE;
            log_scale += RESCALE.ln();
        }
    }
    (cur, prev, log_scale)
}

/// Gauss–Hermite rule for plain integrals: `∫ f(y) dy ≈ Σ wᵢ f(yᵢ)`, exact
/// when `f = e^{−y²}·p(y)` with `deg p < 2N`.
#[derive(Debug, Clone)]
pub struct GaussHermite {
    pub nodes: Vec<f64>,
    pub weights: Vec<f64>,
}

impl GaussHermite {
    pub fn new(order: usize) -> Result<Self> {
        if order == 0 {
            return Err(Error::InvalidArgument("Gauss–Hermite order must be positive".into()));
        }
        let jacobi = Tridiagonal { d: vec![0.0; order], e: (1..order).map(|k| (k as f64 / 2.0).sqrt()).collect() };
        let mut nodes = jacobi.eigenvalues_all()?;
        let nf = order as f64;
        let mut weights = Vec::with_capacity(order);
        for y in nodes.iter_mut() {
            // Newton polish on φ_N; φ_N′ = −y·φ_N + √(2N)·φ_{N−1}
            for _ in 0..3 {
                let (pn, pm, _) = last_two(*y, order);
                let d = -*y * pn + (2.0 * nf).sqrt() * pm;
                if d == 0.0 {
                    break;
                }
                let step = pn / d;
                *y -= step;
                if step.abs() <= 1e-16 * y.abs().max(1.0) {
                    break;
                }
            }
            let (_, pm, ls) = last_two(*y, order);
            let phi = scaled_value(pm, ls);
            weights.push(1.0 / (nf * phi * phi));
        }
        Ok(GaussHermite { nodes, weights })
    }

    pub fn order(&self) -> usize {
        self.nodes.len()
    }
}

/// Contiguous block of Fock states `lo..=hi`.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct FockRange {
    pub lo: u64,
    pub hi: u64,
}

impl FockRange {
    /// `[min(n,m) − pad, max(n,m) + pad]`, clipped at zero.
    pub fn around(n: u64, m: u64, pad: u64) -> Self {
        FockRange { lo: n.min(m).saturating_sub(pad), hi: n.max(m) + pad }
    }

    pub fn len(&self) -> usize {
        (self.hi - self.lo + 1) as usize
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    pub fn index(&self, n: u64) -> usize {
        debug_assert!(n >= self.lo && n <= self.hi);
        (n - self.lo) as usize
    }

    /// Position operator `y = (a + a†)/√2` restricted to the range.
    pub fn position(&self) -> DMatrix<f64> {
        let l = self.len();
        let mut y = DMatrix::zeros(l, l);
        for i in 0..l - 1 {
            let k = (self.lo + i as u64 + 1) as f64;
            y[(i, i + 1)] = (k / 2.0).sqrt();
            y[(i + 1, i)] = (k / 2.0).sqrt();
        }
        y
    }

    /// Apply `d/dy = (a − a†)/√2` to a coefficient vector (truncated).
    pub fn apply_derivative(&self, c: &DVector<f64>) -> DVector<f64> {
        let l = self.len();
        let mut out = DVector::zeros(l);
        for i in 0..l {
            let k = (self.lo + i as u64) as f64;
            // d/dy|k⟩ = √(k/2)|k−1⟩ − √((k+1)/2)|k+1⟩
            if i > 0 {
                out[i - 1] += (k / 2.0).sqrt() * c[i];
            }
            if i + 1 < l {
                out[i + 1] -= ((k + 1.0) / 2.0).sqrt() * c[i];
            }
        }
        out
    }

    /// Eigen-decomposition of the windowed position operator: its eigenvalues
    /// act as quadrature abscissae for functions of `y`.
    pub fn position_spectrum(&self) -> WindowSpectrum {
        let eig = SymmetricEigen::new(self.position());
        WindowSpectrum { range: *self, nodes: eig.eigenvalues.iter().copied().collect(), vectors: eig.eigenvectors }
    }
}

/// Eigenpairs of the windowed position operator.
#[derive(Debug, Clone)]
pub struct WindowSpectrum {
    pub range: FockRange,
    pub nodes: Vec<f64>,
    /// Columns are eigenvectors.
    pub vectors: DMatrix<f64>,
}

impl WindowSpectrum {
    /// `Q·diag(f(yᵢ))·Qᵀ`.
    pub fn function_matrix(&self, values: &[f64]) -> DMatrix<f64> {
        let mut scaled = self.vectors.clone();
        for (j, v) in values.iter().enumerate() {
            scaled.column_mut(j).scale_mut(*v);
        }
        &scaled * self.vectors.transpose()
    }

    /// Coefficients in the eigenbasis: `Qᵀ·c`.
    pub fn project(&self, c: &DVector<f64>) -> DVector<f64> {
        self.vectors.tr_mul(c)
    }
}

/// An oscillator state expanded on a Fock range.
#[derive(Debug, Clone)]
pub struct OscillatorState {
    pub range: FockRange,
    pub coeffs: DVector<f64>,
    /// For dressed states: eigenvalue of `N + E_j(y)` minus `n` (the dressed
    /// energy); zero for harmonic states.
    pub dressed_energy: f64,
}

impl OscillatorState {
    pub fn harmonic(range: FockRange, n: u64) -> Self {
        let mut coeffs = DVector::zeros(range.len());
        coeffs[range.index(n)] = 1.0;
        OscillatorState { range, coeffs, dressed_energy: 0.0 }
    }
}

/// Pick the eigenvector of `h` whose eigenvalue is nearest `target` and fix
/// its sign so the `n` component (or failing that the largest) is positive.
fn pick_state(h: DMatrix<f64>, range: FockRange, n: u64, target: f64) -> Result<OscillatorState> {
    let eig = SymmetricEigen::new(h);
    let (best, value) = eig
        .eigenvalues
        .iter()
        .copied()
        .enumerate()
        .min_by(|a, b| (a.1 - target).abs().total_cmp(&(b.1 - target).abs()))
        .ok_or_else(|| Error::Eigensolver("empty window".into()))?;
    if (value - target).abs() > 0.5 {
        return Err(Error::Eigensolver(format!(
            "no dressed state within 0.5 of the estimate {target} (nearest {value})"
        )));
    }
    let mut c = eig.eigenvectors.column(best).into_owned();
    let pivot = c[range.index(n)];
    let sign = if pivot.abs() > 1e-3 {
        pivot.signum()
    } else {
        c.iter().copied().fold(0.0f64, |m, x| if x.abs() > m.abs() { x } else { m }).signum()
    };
    c *= sign;
    Ok(OscillatorState { range, coeffs: c, dressed_energy: value })
}

/// Dressed state for `level` with quantum number `n`: eigenvector of
/// `(N − n) + E_j(Y)` on the Fock range, with `E_j(Y)` formed through the
/// spectrum of the windowed position operator.
pub fn dressed_state_window(
    params: &ModelParams,
    level: Level,
    n: u64,
    spectrum: &WindowSpectrum,
    estimate: f64,
) -> Result<OscillatorState> {
    let range = spectrum.range;
    let values = spectrum
        .nodes
        .iter()
        .map(|&y| eigenvalues_at(params, y).map(|e| e[level.index()]))
        .collect::<Result<Vec<_>>>()?;
    let mut h = spectrum.function_matrix(&values);
    for i in 0..range.len() {
        h[(i, i)] += (range.lo + i as u64) as f64 - n as f64;
    }
    pick_state(h, range, n, estimate)
}

/// Values (and derivatives) of Fock-range states at Gauss–Hermite nodes,
/// each pre-multiplied by `√wᵢ`.
#[derive(Debug, Clone)]
pub struct HermiteTable {
    pub range: FockRange,
    /// Row i, column k: `√wᵢ·φ_{lo+k}(yᵢ)`.
    pub values: DMatrix<f64>,
    /// Row i, column k: `√wᵢ·φ′_{lo+k}(yᵢ)`.
    pub derivatives: DMatrix<f64>,
}

impl HermiteTable {
    pub fn new(rule: &GaussHermite, range: FockRange) -> Self {
        let l = range.len();
        let nn = rule.order();
        let mut values = DMatrix::zeros(nn, l);
        let mut derivatives = DMatrix::zeros(nn, l);
        let first = range.lo.saturating_sub(1) as usize;
        let last = range.hi as usize + 1;
        for (i, (&y, &w)) in rule.nodes.iter().zip(&rule.weights).enumerate() {
            let sw = w.sqrt();
            let phi = hermite_functions(y, first, last);
            let at = |k: u64| -> f64 {
                if (k as usize) < first {
                    0.0
                } else {
                    phi[k as usize - first]
                }
            };
            for c in 0..l {
                let k = range.lo + c as u64;
                let kf = k as f64;
                values[(i, c)] = sw * at(k);
                let down = if k > 0 { (kf / 2.0).sqrt() * at(k - 1) } else { 0.0 };
                derivatives[(i, c)] = sw * (down - ((kf + 1.0) / 2.0).sqrt() * at(k + 1));
            }
        }
        HermiteTable { range, values, derivatives }
    }
}

/// Dressed state on a Fock range with `⟨k|E_j(y)|l⟩` from Gauss–Hermite
/// quadrature.
pub fn dressed_state_hermite(
    params: &ModelParams,
    level: Level,
    n: u64,
    rule: &GaussHermite,
    table: &HermiteTable,
    estimate: f64,
) -> Result<OscillatorState> {
    let range = table.range;
    let energies = rule
        .nodes
        .iter()
        .map(|&y| eigenvalues_at(params, y).map(|e| e[level.index()]))
        .collect::<Result<Vec<_>>>()?;
    let mut weighted = table.values.clone();
    for (i, e) in energies.iter().enumerate() {
        weighted.row_mut(i).scale_mut(*e);
    }
    let mut h = table.values.tr_mul(&weighted);
    h = (&h + h.transpose()) * 0.5;
    for i in 0..range.len() {
        h[(i, i)] += (range.lo + i as u64) as f64 - n as f64;
    }
    pick_state(h, range, n, estimate)
}
