use thiserror::Error;

/// Errors produced by the numerical routines.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("invalid parameters: {0}")]
    InvalidParams(String),

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("degenerate cubic at y = {y}: amplitude {amp:e} below 1e-12")]
    DegenerateCubic { y: f64, amp: f64 },

    #[error("arcsin argument {value} out of range at y = {y}")]
    ArcsinDomain { y: f64, value: f64 },

    #[error("near-degeneracy at y = {y}: levels {gap:e} apart")]
    NearDegeneracy { y: f64, gap: f64 },

    #[error("finite-difference step too small at y = {y}: error estimate {estimate:e} vs value {value:e}")]
    StepTooSmall { y: f64, estimate: f64, value: f64 },

    #[error("unsupported method: {0}")]
    UnsupportedMethod(String),

    #[error("{what} did not converge (last change {change:e})")]
    NonConvergence { what: &'static str, change: f64 },

    #[error("node count mismatch: wanted {expected} sign changes, found {found}")]
    NodeCountMismatch { expected: u64, found: u64 },

    #[error("grid too coarse: refinement changed eigenvalue by {change:e}")]
    GridTooCoarse { change: f64 },

    #[error("Δn = {delta_n} forbidden by parity for transition {lower}→{upper}")]
    ParityForbidden { lower: u8, upper: u8, delta_n: u32 },

    #[error("window underflow: n0 = {n0} < half-width {half_width}")]
    WindowUnderflow { n0: u64, half_width: u64 },

    #[error("eigensolver failure: {0}")]
    Eigensolver(String),

    #[error("label ambiguity at t = {t}: overlaps {first} and {second} within 1e-3")]
    LabelAmbiguity { t: f64, first: f64, second: f64 },

    #[error("no bracket: {0}")]
    NoBracket(String),

    #[error("window non-convergence: gap changed by {change:e} (relative) when W doubled")]
    WindowNonConvergence { change: f64 },

    #[error("point is off resonance: residual {residual:e} exceeds {tolerance:e}")]
    OffResonance { residual: f64, tolerance: f64 },
}

pub type Result<T> = std::result::Result<T, Error>;
