//! Anticrossing splittings: the degenerate-perturbation estimate
//! `δE = 2|⟨Φ_{j,n}|V̂|Φ_{k,n−Δn}⟩|` against exact gap minima.

use rayon::prelude::*;

use crate::dressed_levels::{check_parity, dressed_transition};
use crate::error::{Error, Result};
use crate::fock_window::{anticrossing_gap, FockWindow, GapSearch, LineSegment, DEFAULT_HALF_WIDTH};
use crate::rotation_coupling::{
    v_matrix_element, ElementMethod, MatrixElementRequest, OscillatorStates, HERMITE_MAX_N,
};
use crate::trilevel_core::{Level, ModelParams};

/// Largest `|E_k − E_j − Δn|` accepted as "on resonance".
pub const RESONANCE_TOLERANCE: f64 = 1e-4;

/// Quadrature for moderate `n`, Fock window beyond.
pub fn default_method(n: u64) -> ElementMethod {
    if n <= HERMITE_MAX_N {
        ElementMethod::HermiteQuadrature
    } else {
        ElementMethod::FockWindow
    }
}

/// `2|⟨Φ_{j,n}|V̂|Φ_{k,n−Δn}⟩|` with dressed oscillator states. `params` must
/// sit on the WKB resonance contour.
pub fn pt_splitting(
    params: &ModelParams,
    lower: Level,
    upper: Level,
    delta_n: u32,
    n: u64,
    method: ElementMethod,
) -> Result<f64> {
    check_parity(lower, upper, delta_n)?;
    if n < delta_n as u64 {
        return Err(Error::InvalidArgument(format!("n = {n} is smaller than Δn = {delta_n}")));
    }
    let residual = dressed_transition(params, lower, upper, n)? - delta_n as f64;
    if residual.abs() > RESONANCE_TOLERANCE {
        return Err(Error::OffResonance { residual, tolerance: RESONANCE_TOLERANCE });
    }
    let req = MatrixElementRequest::new(lower, n, upper, n - delta_n as u64, method)
        .with_states(OscillatorStates::Dressed);
    Ok(2.0 * v_matrix_element(params, &req)?.abs())
}

#[derive(Debug, Clone, PartialEq)]
pub struct SplittingRecord {
    pub lower: Level,
    pub upper: Level,
    pub delta_n: u32,
    /// `g2/g1` of the line.
    pub ratio: f64,
    /// `g1` where the line meets the WKB contour (PT evaluated here).
    pub g_contour: f64,
    /// `g1` of the smallest exact gap.
    pub g_exact: f64,
    pub pt: f64,
    pub exact: f64,
    /// Number of exact local minima near the contour crossing.
    pub minima: usize,
    /// Locations (in `g1`) of every exact minimum.
    pub minima_locations: Vec<f64>,
    /// Several exact minima, or PT/exact outside [0.8, 1.25].
    pub anomalous: bool,
    pub error: Option<String>,
}

impl SplittingRecord {
    pub fn ratio_pt_exact(&self) -> f64 {
        self.pt / self.exact
    }

    pub fn is_valid(&self) -> bool {
        self.error.is_none()
    }

    fn failed(lower: Level, upper: Level, delta_n: u32, ratio: f64, e: Error) -> Self {
        SplittingRecord {
            lower,
            upper,
            delta_n,
            ratio,
            g_contour: f64::NAN,
            g_exact: f64::NAN,
            pt: f64::NAN,
            exact: f64::NAN,
            minima: 0,
            minima_locations: Vec::new(),
            anomalous: false,
            error: Some(e.to_string()),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SplittingSettings {
    pub half_width: u64,
    pub method: Option<ElementMethod>,
    pub search: GapSearch,
    /// Exact minima are sought within this relative distance of the contour
    /// crossing.
    pub bracket: f64,
    /// Largest `g1` searched for the contour crossing.
    pub g_max: f64,
    pub samples: usize,
}

impl Default for SplittingSettings {
    fn default() -> Self {
        SplittingSettings {
            half_width: DEFAULT_HALF_WIDTH,
            method: None,
            search: GapSearch::default(),
            bracket: 0.03,
            g_max: 1.25,
            samples: 250,
        }
    }
}

/// First crossing of `E_k − E_j = Δn` (WKB, `n = n0`) along `g2 = ratio·g1`.
pub fn contour_crossing(
    template: &ModelParams,
    ratio: f64,
    lower: Level,
    upper: Level,
    delta_n: u32,
    g_max: f64,
    samples: usize,
) -> Result<f64> {
    check_parity(lower, upper, delta_n)?;
    let f = |s: f64| -> Result<f64> {
        let p = template.with_dimensionless(s, ratio * s)?;
        Ok(dressed_transition(&p, lower, upper, p.n0())? - delta_n as f64)
    };
    let samples = samples.max(2);
    let mut a = 1e-6 * g_max;
    let mut fa = f(a)?;
    for i in 1..=samples {
        let b = g_max * i as f64 / samples as f64;
        let fb = f(b)?;
        if fa == 0.0 {
            return Ok(a);
        }
        if fa * fb < 0.0 {
            let (mut lo, mut hi, flo) = (a, b, fa);
            for _ in 0..200 {
                let mid = 0.5 * (lo + hi);
                let fm = f(mid)?;
                if fm.abs() <= 1e-10 || hi - lo <= 1e-15 * hi {
                    return Ok(mid);
                }
                if (fm < 0.0) == (flo < 0.0) {
                    lo = mid;
                } else {
                    hi = mid;
                }
            }
            return Ok(0.5 * (lo + hi));
        }
        a = b;
        fa = fb;
    }
    Err(Error::NoBracket(format!("g2 = {ratio}·g1 does not reach the {lower}→{upper}, Δn = {delta_n} contour")))
}

fn one_record(
    template: &ModelParams,
    ratio: f64,
    lower: Level,
    upper: Level,
    delta_n: u32,
    settings: &SplittingSettings,
) -> Result<SplittingRecord> {
    let n0 = template.n0();
    let s = contour_crossing(template, ratio, lower, upper, delta_n, settings.g_max, settings.samples)?;
    let line = LineSegment::ratio(ratio, s * (1.0 - settings.bracket), s * (1.0 + settings.bracket));
    let window = FockWindow::new(n0, settings.half_width.min(n0))?;
    let gap = anticrossing_gap(template, &line, lower, upper, delta_n, window, &settings.search)?;
    let at = template.with_dimensionless(s, ratio * s)?;
    let method = settings.method.unwrap_or_else(|| default_method(n0));
    let pt = pt_splitting(&at, lower, upper, delta_n, n0, method)?;
    let exact = gap.best.gap;
    let r = pt / exact;
    Ok(SplittingRecord {
        lower,
        upper,
        delta_n,
        ratio,
        g_contour: s,
        g_exact: gap.best.location,
        pt,
        exact,
        minima: gap.minima.len(),
        minima_locations: gap.minima.iter().map(|m| m.location).collect(),
        anomalous: gap.minima.len() > 1 || !(0.8..=1.25).contains(&r),
        error: None,
    })
}

/// PT and exact splittings along `g2 = ratio·g1` for each Δn, sorted by Δn.
/// Failures become records carrying the error.
pub fn compare_splittings(
    template: &ModelParams,
    ratio: f64,
    delta_ns: &[u32],
    lower: Level,
    upper: Level,
    settings: &SplittingSettings,
) -> Vec<SplittingRecord> {
    let mut out: Vec<SplittingRecord> = delta_ns
        .par_iter()
        .map(|&dn| {
            one_record(template, ratio, lower, upper, dn, settings)
                .unwrap_or_else(|e| SplittingRecord::failed(lower, upper, dn, ratio, e))
        })
        .collect();
    out.sort_by_key(|r| r.delta_n);
    out
}
