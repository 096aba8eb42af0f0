//! Rotated-frame residual operators.
//!
//! `F = 𝒰ᵀ·d𝒰/dy` is antisymmetric; its upper entries `F12, F13, F23` are
//! the coupling functions. From them:
//!
//! * `V̂ = −½(F·d/dy + d/dy·F)` couples different levels and drives the
//!   anticrossings;
//! * `Ŵ = −½F²` is a small diagonal correction.
//!
//! Oscillator matrix elements are evaluated either on a Gauss–Hermite grid
//! (moderate `n`) or on a window of Fock states around `n` (any `n`, including
//! `n ≈ 10⁸`). Both use the symmetric form
//! `⟨a|V̂|b⟩ = −½∫F·(a·b′ − a′·b) dy`.

use std::fmt;
use std::str::FromStr;

use nalgebra::{DVector, Matrix3};

use crate::dressed_levels::wkb_dressed_energy;
use crate::error::{Error, Result};
use crate::oscillator::{
    dressed_state_hermite, dressed_state_window, FockRange, GaussHermite, HermiteTable, OscillatorState,
};
use crate::trilevel_core::{eigenbasis_at, Level, ModelParams};

/// Largest quantum number accepted by the Gauss–Hermite route.
pub const HERMITE_MAX_N: u64 = 5000;

const CONVERGENCE_RTOL: f64 = 1e-8;

/// Coupling functions at one coordinate.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CouplingSample {
    pub y: f64,
    pub f12: f64,
    pub f13: f64,
    pub f23: f64,
    /// Finite-difference step (0 for the analytic route).
    pub step: f64,
    /// Richardson estimate of the truncation error in the values above.
    pub error_estimate: f64,
}

impl CouplingSample {
    /// Entry `F_jk` of the antisymmetric matrix.
    pub fn get(&self, j: Level, k: Level) -> f64 {
        self.matrix()[(j.index(), k.index())]
    }

    pub fn matrix(&self) -> Matrix3<f64> {
        Matrix3::new(0.0, self.f12, self.f13, -self.f12, 0.0, self.f23, -self.f13, -self.f23, 0.0)
    }
}

/// Default finite-difference step `10⁻⁴·max(1, |y|)`.
pub fn default_step(y: f64) -> f64 {
    1e-4 * y.abs().max(1.0)
}

/// All nine entries of `𝒰ᵀ(y)·(𝒰(y+h) − 𝒰(y−h))/(2h)`.
pub fn derivative_product(params: &ModelParams, y: f64, h: f64) -> Result<Matrix3<f64>> {
    if !(h > 0.0) {
        return Err(Error::InvalidArgument(format!("step must be positive, got {h}")));
    }
    let centre = eigenbasis_at(params, y, None)?;
    let plus = eigenbasis_at(params, y + h, Some(&centre.basis))?;
    let minus = eigenbasis_at(params, y - h, Some(&centre.basis))?;
    Ok(centre.basis.transpose() * (plus.basis - minus.basis) / (2.0 * h))
}

/// Coupling functions by central differences of the eigenbasis, with a
/// Richardson (h vs h/2) error estimate. Refuses results whose estimated
/// error exceeds 1% of the largest coupling.
pub fn coupling_functions(params: &ModelParams, y: f64, step: f64) -> Result<CouplingSample> {
    let full = derivative_product(params, y, step)?;
    let half = derivative_product(params, y, step / 2.0)?;
    let pick = |m: &Matrix3<f64>| [m[(0, 1)], m[(0, 2)], m[(1, 2)]];
    let a = pick(&full);
    let b = pick(&half);
    let estimate = a.iter().zip(&b).map(|(x, y)| (x - y).abs() * 4.0 / 3.0).fold(0.0, f64::max);
    let magnitude = a.iter().fold(0.0f64, |m, x| m.max(x.abs()));
    if estimate > magnitude || estimate > 0.01 * magnitude {
        return Err(Error::StepTooSmall { y, estimate, value: magnitude });
    }
    Ok(CouplingSample { y, f12: a[0], f13: a[1], f23: a[2], step, error_estimate: estimate })
}

/// Coupling functions from first-order perturbation of the eigenvectors,
/// `F_jk = u_jᵀ·M′·u_k / (E_k − E_j)`, in the same gauge as
/// [`eigenbasis_at`].
pub fn coupling_functions_analytic(params: &ModelParams, y: f64) -> Result<CouplingSample> {
    let pt = eigenbasis_at(params, y, None)?;
    let g = pt.basis.transpose() * params.matrix_derivative() * pt.basis;
    let e = pt.levels;
    Ok(CouplingSample {
        y,
        f12: g[(0, 1)] / (e[1] - e[0]),
        f13: g[(0, 2)] / (e[2] - e[0]),
        f23: g[(1, 2)] / (e[2] - e[1]),
        step: 0.0,
        error_estimate: 0.0,
    })
}

/// How oscillator integrals are discretized.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ElementMethod {
    HermiteQuadrature,
    FockWindow,
}

impl FromStr for ElementMethod {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "hermite-quadrature" => Ok(ElementMethod::HermiteQuadrature),
            "fock-window" => Ok(ElementMethod::FockWindow),
            other => Err(Error::UnsupportedMethod(other.to_string())),
        }
    }
}

impl fmt::Display for ElementMethod {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            ElementMethod::HermiteQuadrature => "hermite-quadrature",
            ElementMethod::FockWindow => "fock-window",
        })
    }
}

/// Which oscillator functions accompany each level in the product states.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum OscillatorStates {
    /// Bare harmonic-oscillator eigenfunctions `φ_n(y)`.
    Harmonic,
    /// Eigenfunctions `u_{j,n}(y)` of `−½d²/dy² + ½y² + E_j(y)`.
    Dressed,
}

/// `⟨Φ_{j,n}|V̂|Φ_{k,m}⟩` request.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MatrixElementRequest {
    pub bra: (Level, u64),
    pub ket: (Level, u64),
    pub method: ElementMethod,
    pub states: OscillatorStates,
    /// Fock padding on each side; defaults to `4·|n−m| + 64`.
    pub padding: Option<u64>,
}

impl MatrixElementRequest {
    pub fn new(j: Level, n: u64, k: Level, m: u64, method: ElementMethod) -> Self {
        MatrixElementRequest { bra: (j, n), ket: (k, m), method, states: OscillatorStates::Harmonic, padding: None }
    }

    pub fn with_states(mut self, states: OscillatorStates) -> Self {
        self.states = states;
        self
    }

    fn default_padding(&self) -> u64 {
        self.padding.unwrap_or(4 * self.bra.1.abs_diff(self.ket.1) + 64)
    }
}

/// Node values `√w·a(y)`, `√w·a′(y)` for one state on a quadrature.
struct NodeValues {
    value: Vec<f64>,
    slope: Vec<f64>,
}

/// One discretization of `∫ g(y)·[...] dy`: abscissae plus, per state, node
/// values and slopes (weights folded in).
struct Discretization {
    nodes: Vec<f64>,
    bra: NodeValues,
    ket: NodeValues,
}

impl Discretization {
    fn antisymmetric_integral(&self, f: &[f64]) -> f64 {
        -0.5 * (0..self.nodes.len())
            .map(|i| f[i] * (self.bra.value[i] * self.ket.slope[i] - self.bra.slope[i] * self.ket.value[i]))
            .sum::<f64>()
    }
}

fn wkb_estimate(params: &ModelParams, level: Level, n: u64) -> Result<f64> {
    Ok(wkb_dressed_energy(params, level, n, 256)?.energy)
}

fn window_discretization(
    params: &ModelParams,
    bra: (Level, u64),
    ket: (Level, u64),
    states: OscillatorStates,
    pad: u64,
) -> Result<Discretization> {
    let range = FockRange::around(bra.1, ket.1, pad);
    let spectrum = range.position_spectrum();
    let state = |(lvl, n): (Level, u64)| -> Result<OscillatorState> {
        match states {
            OscillatorStates::Harmonic => Ok(OscillatorState::harmonic(range, n)),
            OscillatorStates::Dressed => dressed_state_window(params, lvl, n, &spectrum, wkb_estimate(params, lvl, n)?),
        }
    };
    let values = |s: &OscillatorState| NodeValues {
        value: spectrum.project(&s.coeffs).iter().copied().collect(),
        slope: spectrum.project(&range.apply_derivative(&s.coeffs)).iter().copied().collect(),
    };
    let a = state(bra)?;
    let b = state(ket)?;
    Ok(Discretization { nodes: spectrum.nodes.clone(), bra: values(&a), ket: values(&b) })
}

fn hermite_discretization(
    params: &ModelParams,
    bra: (Level, u64),
    ket: (Level, u64),
    states: OscillatorStates,
    pad: u64,
    order: Option<usize>,
) -> Result<Discretization> {
    let range = match states {
        OscillatorStates::Harmonic => FockRange::around(bra.1, ket.1, 0),
        OscillatorStates::Dressed => FockRange::around(bra.1, ket.1, pad),
    };
    let order = order.unwrap_or(2 * range.hi as usize + 64);
    let rule = GaussHermite::new(order)?;
    let table = HermiteTable::new(&rule, range);
    let state = |(lvl, n): (Level, u64)| -> Result<OscillatorState> {
        match states {
            OscillatorStates::Harmonic => Ok(OscillatorState::harmonic(range, n)),
            OscillatorStates::Dressed => {
                dressed_state_hermite(params, lvl, n, &rule, &table, wkb_estimate(params, lvl, n)?)
            }
        }
    };
    let values = |s: &OscillatorState| -> NodeValues {
        NodeValues {
            value: (&table.values * &s.coeffs).iter().copied().collect(),
            slope: (&table.derivatives * &s.coeffs).iter().copied().collect(),
        }
    };
    let a = state(bra)?;
    let b = state(ket)?;
    Ok(Discretization { nodes: rule.nodes.clone(), bra: values(&a), ket: values(&b) })
}

fn coupling_values(params: &ModelParams, nodes: &[f64], j: Level, k: Level) -> Result<Vec<f64>> {
    nodes.iter().map(|&y| coupling_functions_analytic(params, y).map(|s| s.get(j, k))).collect()
}

fn element_once(params: &ModelParams, req: &MatrixElementRequest, pad: u64, order: Option<usize>) -> Result<f64> {
    let d = match req.method {
        ElementMethod::FockWindow => window_discretization(params, req.bra, req.ket, req.states, pad)?,
        ElementMethod::HermiteQuadrature => {
            hermite_discretization(params, req.bra, req.ket, req.states, pad, order)?
        }
    };
    let f = coupling_values(params, &d.nodes, req.bra.0, req.ket.0)?;
    Ok(d.antisymmetric_integral(&f))
}

fn check_converged(what: &'static str, coarse: f64, fine: f64) -> Result<f64> {
    let change = (fine - coarse).abs();
    if change <= CONVERGENCE_RTOL * fine.abs().max(coarse.abs()) + 1e-14 {
        Ok(fine)
    } else {
        Err(Error::NonConvergence { what, change: change / fine.abs().max(f64::MIN_POSITIVE) })
    }
}

/// `⟨Φ_{j,n}|V̂|Φ_{k,m}⟩` in units of ħω₀. Converged by doubling the Fock
/// padding (window method) or the node count (quadrature method).
pub fn v_matrix_element(params: &ModelParams, req: &MatrixElementRequest) -> Result<f64> {
    let (j, n) = req.bra;
    let (k, m) = req.ket;
    if j == k {
        return Err(Error::InvalidArgument("V̂ couples distinct levels only".into()));
    }
    let pad = req.default_padding();
    match req.method {
        ElementMethod::FockWindow => {
            let coarse = element_once(params, req, pad, None)?;
            let fine = element_once(params, req, 2 * pad, None)?;
            check_converged("fock-window padding", coarse, fine)
        }
        ElementMethod::HermiteQuadrature => {
            if n.max(m) > HERMITE_MAX_N {
                return Err(Error::UnsupportedMethod(format!(
                    "hermite-quadrature limited to n ≤ {HERMITE_MAX_N}, got {}",
                    n.max(m)
                )));
            }
            let hi = match req.states {
                OscillatorStates::Harmonic => n.max(m),
                OscillatorStates::Dressed => n.max(m) + pad,
            } as usize;
            let order = 2 * hi + 64;
            let coarse = element_once(params, req, pad, Some(order))?;
            let fine = element_once(params, req, 2 * pad, Some(2 * order))?;
            check_converged("hermite-quadrature nodes", coarse, fine)
        }
    }
}

/// `⟨Φ_{j,n}|Ŵ|Φ_{j,n}⟩ = ½⟨φ_n|Σ_k F_jk²|φ_n⟩` for j = 1, 2, 3.
pub fn w_expectation(params: &ModelParams, n: u64, method: ElementMethod) -> Result<[f64; 3]> {
    let once = |scale: u64| -> Result<[f64; 3]> {
        let (nodes, weights): (Vec<f64>, Vec<f64>) = match method {
            ElementMethod::FockWindow => {
                let range = FockRange::around(n, n, 64 * scale);
                let sp = range.position_spectrum();
                let row = sp.vectors.row(range.index(n));
                (sp.nodes.clone(), row.iter().map(|q| q * q).collect())
            }
            ElementMethod::HermiteQuadrature => {
                if n > HERMITE_MAX_N {
                    return Err(Error::UnsupportedMethod(format!(
                        "hermite-quadrature limited to n ≤ {HERMITE_MAX_N}, got {n}"
                    )));
                }
                let rule = GaussHermite::new((2 * n as usize + 64) * scale as usize)?;
                let w = rule
                    .nodes
                    .iter()
                    .zip(&rule.weights)
                    .map(|(&y, &w)| {
                        let phi = crate::oscillator::hermite_functions(y, n as usize, n as usize)[0];
                        w * phi * phi
                    })
                    .collect();
                (rule.nodes, w)
            }
        };
        let mut out = [0.0; 3];
        for (y, w) in nodes.iter().zip(&weights) {
            let s = coupling_functions_analytic(params, *y)?;
            let (a, b, c) = (s.f12 * s.f12, s.f13 * s.f13, s.f23 * s.f23);
            out[0] += 0.5 * w * (a + b);
            out[1] += 0.5 * w * (a + c);
            out[2] += 0.5 * w * (b + c);
        }
        Ok(out)
    };
    let coarse = once(1)?;
    let fine = once(2)?;
    let mut out = [0.0; 3];
    for i in 0..3 {
        out[i] = check_converged("w expectation", coarse[i], fine[i])?;
    }
    Ok(out)
}

/// Coefficient vector helper for tests and diagnostics.
pub fn harmonic_coefficients(range: FockRange, n: u64) -> DVector<f64> {
    OscillatorState::harmonic(range, n).coeffs
}
