//! Diagonalization of the 3×3 level block at a fixed oscillator coordinate `y`.
//!
//! The block is
//!
//! ```text
//!        ⎡ E1     √2·U·y   0      ⎤
//! M(y) = ⎢ √2·U·y   E2     √2·V·y ⎥
//!        ⎣ 0      √2·V·y   E3     ⎦
//! ```
//!
//! Eigenvalues come from the trigonometric solution of the depressed cubic
//! `ε³ − αε = β`; eigenvectors from cofactors of `M − E·I`.

use std::fmt;

use nalgebra::{Matrix3, Vector3};

use crate::error::{Error, Result};

/// Default floor on the bare level spacings.
pub const DEFAULT_MIN_GAP: f64 = 1e-6;

/// Two adiabatic levels closer than this are treated as degenerate when an
/// eigenbasis is requested.
pub const DEGENERACY_GUARD: f64 = 1e-8;

const ARCSIN_SLACK: f64 = 1e-10;

/// One of the three levels, numbered 1..=3 from the bottom.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct Level(u8);

impl Level {
    pub const ONE: Level = Level(1);
    pub const TWO: Level = Level(2);
    pub const THREE: Level = Level(3);

    pub fn new(j: u8) -> Result<Self> {
        if (1..=3).contains(&j) {
            Ok(Level(j))
        } else {
            Err(Error::InvalidArgument(format!("level {j} is not in 1..=3")))
        }
    }

    /// 1-based level number.
    pub fn number(self) -> u8 {
        self.0
    }

    /// 0-based index into `[E1, E2, E3]`.
    pub fn index(self) -> usize {
        (self.0 - 1) as usize
    }

    pub fn all() -> [Level; 3] {
        [Level::ONE, Level::TWO, Level::THREE]
    }
}

impl fmt::Display for Level {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.0)
    }
}

/// Bare energies, couplings and reference quantum number. Energies are in
/// units of ħω₀.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ModelParams {
    e: [f64; 3],
    u: f64,
    v: f64,
    n0: u64,
}

impl ModelParams {
    pub fn new(energies: [f64; 3], u: f64, v: f64, n0: u64) -> Result<Self> {
        Self::with_min_gap(energies, u, v, n0, DEFAULT_MIN_GAP)
    }

    /// Like [`ModelParams::new`] with an explicit floor on `e2−e1`, `e3−e2`.
    pub fn with_min_gap(energies: [f64; 3], u: f64, v: f64, n0: u64, min_gap: f64) -> Result<Self> {
        let [e1, e2, e3] = energies;
        if !energies.iter().all(|e| e.is_finite()) || !u.is_finite() || !v.is_finite() {
            return Err(Error::InvalidParams("non-finite energy or coupling".into()));
        }
        if !(min_gap > 0.0) {
            return Err(Error::InvalidParams(format!("minimum gap {min_gap} must be positive")));
        }
        if e2 - e1 < min_gap || e3 - e2 < min_gap {
            return Err(Error::InvalidParams(format!(
                "energies must satisfy e1 < e2 < e3 with spacing ≥ {min_gap:e}, got ({e1}, {e2}, {e3})"
            )));
        }
        if u < 0.0 || v < 0.0 {
            return Err(Error::InvalidParams(format!("couplings must be non-negative, got u = {u}, v = {v}")));
        }
        if n0 < 1 {
            return Err(Error::InvalidParams("n0 must be at least 1".into()));
        }
        Ok(ModelParams { e: energies, u, v, n0 })
    }

    /// Build from dimensionless couplings `g1 = U√n0/(e2−e1)`, `g2 = V√n0/(e3−e2)`.
    pub fn from_dimensionless(energies: [f64; 3], g1: f64, g2: f64, n0: u64) -> Result<Self> {
        if n0 < 1 {
            return Err(Error::InvalidParams("n0 must be at least 1".into()));
        }
        let s = (n0 as f64).sqrt();
        Self::new(energies, g1 * (energies[1] - energies[0]) / s, g2 * (energies[2] - energies[1]) / s, n0)
    }

    /// The ladder with bare spacings 11 and 13 (E = 0, 11, 24) at n0 = 10⁸.
    pub fn reference_ladder(g1: f64, g2: f64) -> Result<Self> {
        Self::from_dimensionless([0.0, 11.0, 24.0], g1, g2, 100_000_000)
    }

    /// Same energies and n0, new dimensionless couplings.
    pub fn with_dimensionless(&self, g1: f64, g2: f64) -> Result<Self> {
        Self::from_dimensionless(self.e, g1, g2, self.n0)
    }

    pub fn with_couplings(&self, u: f64, v: f64) -> Result<Self> {
        Self::with_min_gap(self.e, u, v, self.n0, f64::MIN_POSITIVE)
    }

    /// Same energies and dimensionless couplings at a different n0.
    pub fn with_n0(&self, n0: u64) -> Result<Self> {
        Self::from_dimensionless(self.e, self.g1(), self.g2(), n0)
    }

    /// Add `c` to all three bare energies.
    pub fn shifted(&self, c: f64) -> Result<Self> {
        Self::with_min_gap([self.e[0] + c, self.e[1] + c, self.e[2] + c], self.u, self.v, self.n0, f64::MIN_POSITIVE)
    }

    pub fn energies(&self) -> [f64; 3] {
        self.e
    }

    pub fn energy(&self, level: Level) -> f64 {
        self.e[level.index()]
    }

    pub fn u(&self) -> f64 {
        self.u
    }

    pub fn v(&self) -> f64 {
        self.v
    }

    pub fn n0(&self) -> u64 {
        self.n0
    }

    pub fn g1(&self) -> f64 {
        self.u * (self.n0 as f64).sqrt() / (self.e[1] - self.e[0])
    }

    pub fn g2(&self) -> f64 {
        self.v * (self.n0 as f64).sqrt() / (self.e[2] - self.e[1])
    }

    pub fn mean_energy(&self) -> f64 {
        (self.e[0] + self.e[1] + self.e[2]) / 3.0
    }

    /// The 3×3 block M(y).
    pub fn matrix(&self, y: f64) -> Matrix3<f64> {
        let b1 = std::f64::consts::SQRT_2 * self.u * y;
        let b2 = std::f64::consts::SQRT_2 * self.v * y;
        Matrix3::new(self.e[0], b1, 0.0, b1, self.e[1], b2, 0.0, b2, self.e[2])
    }

    /// dM/dy (independent of y).
    pub fn matrix_derivative(&self) -> Matrix3<f64> {
        let b1 = std::f64::consts::SQRT_2 * self.u;
        let b2 = std::f64::consts::SQRT_2 * self.v;
        Matrix3::new(0.0, b1, 0.0, b1, 0.0, b2, 0.0, b2, 0.0)
    }
}

/// Coefficients of the depressed cubic `ε³ − αε = β` with `ε = E − mean`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CubicCoefficients {
    pub alpha: f64,
    pub beta: f64,
    /// `A = √(4α/3)`.
    pub amp: f64,
    /// `θ = arcsin(−4β/A³)`, argument clamped to [−1, 1].
    pub theta: f64,
}

pub fn cubic_coefficients(params: &ModelParams, y: f64) -> Result<CubicCoefficients> {
    let mean = params.mean_energy();
    let [d1, d2, d3] = params.e.map(|e| e - mean);
    let [e1, e2, e3] = params.e;
    let u2 = params.u * params.u * y * y;
    let v2 = params.v * params.v * y * y;
    // Written in mean-shifted form; algebraically the same as the expanded
    // symmetric-function expressions, but free of cancellation when the
    // energies carry a large common offset.
    let alpha = ((e1 - e2).powi(2) + (e1 - e3).powi(2) + (e2 - e3).powi(2)) / 6.0 + 2.0 * u2 + 2.0 * v2;
    let beta = d1 * d2 * d3 - 2.0 * u2 * d3 - 2.0 * v2 * d1;
    let amp = (4.0 * alpha / 3.0).sqrt();
    if !(amp >= 1e-12) {
        return Err(Error::DegenerateCubic { y, amp });
    }
    let arg = -4.0 * beta / (amp * amp * amp);
    if arg.abs() > 1.0 + ARCSIN_SLACK || !arg.is_finite() {
        return Err(Error::ArcsinDomain { y, value: arg });
    }
    Ok(CubicCoefficients { alpha, beta, amp, theta: arg.clamp(-1.0, 1.0).asin() })
}

/// The three adiabatic energies `E1(y) ≤ E2(y) ≤ E3(y)`.
pub fn eigenvalues_at(params: &ModelParams, y: f64) -> Result<[f64; 3]> {
    if params.u * y == 0.0 && params.v * y == 0.0 {
        return Ok(params.e);
    }
    let c = cubic_coefficients(params, y)?;
    let mean = params.mean_energy();
    let tau = std::f64::consts::TAU;
    let mut eps = [0, 1, 2].map(|k| c.amp * ((c.theta + tau * k as f64) / 3.0).sin());
    for x in eps.iter_mut() {
        *x = polish_root(*x, c.alpha, c.beta);
    }
    eps.sort_by(f64::total_cmp);
    Ok(eps.map(|x| mean + x))
}

/// A couple of guarded Newton steps on the cubic; the trigonometric formula
/// loses digits when θ is near ±π/2.
fn polish_root(mut x: f64, alpha: f64, beta: f64) -> f64 {
    let p = |x: f64| (x * x - alpha) * x - beta;
    let mut px = p(x);
    for _ in 0..2 {
        let dp = 3.0 * x * x - alpha;
        if dp == 0.0 || px == 0.0 {
            break;
        }
        let next = x - px / dp;
        let pn = p(next);
        if pn.abs() < px.abs() {
            x = next;
            px = pn;
        } else {
            break;
        }
    }
    x
}

/// `det(M(y) − E·I)`.
pub fn characteristic_residual(params: &ModelParams, y: f64, energy: f64) -> f64 {
    (params.matrix(y) - Matrix3::identity() * energy).determinant()
}

/// Adiabatic energies and eigenbasis at one coordinate.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AdiabaticPoint {
    pub y: f64,
    pub levels: [f64; 3],
    /// Columns are eigenvectors in level order.
    pub basis: Matrix3<f64>,
}

impl AdiabaticPoint {
    pub fn column(&self, level: Level) -> Vector3<f64> {
        self.basis.column(level.index()).into_owned()
    }

    /// Flip column signs so each column has non-negative overlap with the
    /// matching column of `reference`.
    pub fn align_to(&mut self, reference: &Matrix3<f64>) {
        for k in 0..3 {
            if self.basis.column(k).dot(&reference.column(k)) < 0.0 {
                self.basis.column_mut(k).neg_mut();
            }
        }
    }
}

/// Eigenbasis of M(y).
///
/// Without a reference the gauge is anchored at `y = 0` (basis = I) and
/// continued smoothly: for `y > 0` the first structurally non-zero component
/// of each column is positive, and `𝒰(−y) = S·𝒰(y)·S` with `S = diag(1,−1,1)`.
/// This keeps `det = +1` and makes the basis differentiable in `y`. With a
/// reference, column signs are then flipped to maximize overlap with it.
pub fn eigenbasis_at(params: &ModelParams, y: f64, reference: Option<&Matrix3<f64>>) -> Result<AdiabaticPoint> {
    let levels = eigenvalues_at(params, y)?;
    let gap = (levels[1] - levels[0]).min(levels[2] - levels[1]);
    if gap < DEGENERACY_GUARD {
        return Err(Error::NearDegeneracy { y, gap });
    }
    let mut basis = positive_branch_basis(params, y.abs(), &levels);
    if y < 0.0 {
        let s = Matrix3::from_diagonal(&Vector3::new(1.0, -1.0, 1.0));
        basis = s * basis * s;
    }
    let mut point = AdiabaticPoint { y, levels, basis };
    if let Some(r) = reference {
        point.align_to(r);
    }
    Ok(point)
}

fn positive_branch_basis(params: &ModelParams, y: f64, levels: &[f64; 3]) -> Matrix3<f64> {
    let [e1, e2, e3] = params.e;
    let b1 = std::f64::consts::SQRT_2 * params.u * y;
    let b2 = std::f64::consts::SQRT_2 * params.v * y;
    if b1 == 0.0 && b2 == 0.0 {
        return Matrix3::identity();
    }
    let mut basis = Matrix3::zeros();
    let mut isolated = None;
    for (k, &en) in levels.iter().enumerate() {
        let r1 = Vector3::new(e1 - en, b1, 0.0);
        let r2 = Vector3::new(b1, e2 - en, b2);
        let r3 = Vector3::new(0.0, b2, e3 - en);
        let mut v = [r1.cross(&r2), r1.cross(&r3), r2.cross(&r3)]
            .into_iter()
            .max_by(|a, b| a.norm_squared().total_cmp(&b.norm_squared()))
            .unwrap();
        v /= v.norm();
        // Gauge reference: a cofactor vector whose leading component is
        // structurally positive for y > 0. Its direction need only be
        // accurate to within 90°.
        let gauge = if b1 > 0.0 && b2 > 0.0 {
            Vector3::new(b1 * b2, (en - e1) * b2, (en - e1) * (en - e2) - b1 * b1)
        } else if b1 > 0.0 {
            if v[0] == 0.0 && v[1] == 0.0 {
                isolated = Some(k);
                v = Vector3::z();
            }
            Vector3::new(b1, en - e1, 0.0)
        } else {
            if v[1] == 0.0 && v[2] == 0.0 {
                isolated = Some(k);
                v = Vector3::x();
            }
            Vector3::new(0.0, b2, en - e2)
        };
        if isolated != Some(k) && v.dot(&gauge) < 0.0 {
            v = -v;
        }
        basis.set_column(k, &v);
    }
    // A decoupled bare level that has crossed the coupled pair permutes the
    // columns; restore det = +1 on the isolated column.
    if basis.determinant() < 0.0 {
        let k = isolated.unwrap_or(2);
        basis.column_mut(k).neg_mut();
    }
    basis
}
