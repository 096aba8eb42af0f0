//! Checks that tie the adiabatic picture to the exact spectrum at the
//! reference ladder (n0 = 10⁸).

use trilevel::dressed_levels::{dressed_transition, wkb_levels, DEFAULT_WKB_NODES};
use trilevel::fock_window::{anticrossing_gap, exact_dressed_energies, track_levels};
use trilevel::splittings::{contour_crossing, pt_splitting};
use trilevel::{ElementMethod, FockWindow, GapSearch, Level, LineSegment, ModelParams};

#[test]
fn benign_anticrossing_sits_on_the_contour() {
    let p = ModelParams::reference_ladder(0.0, 0.0).unwrap();
    let n0 = p.n0();
    let s = contour_crossing(&p, 0.3, Level::ONE, Level::TWO, 13, 1.25, 250).unwrap();
    let line = LineSegment::ratio(0.3, 0.97 * s, 1.03 * s);
    let window = FockWindow::new(n0, 400).unwrap();
    let gap = anticrossing_gap(&p, &line, Level::ONE, Level::TWO, 13, window, &GapSearch::default()).unwrap();
    assert_eq!(gap.minima.len(), 1);
    assert!((gap.best.location - s).abs() <= 0.02 * s, "{} vs {s}", gap.best.location);
    assert!(gap.window_change <= 0.01);

    let at = p.with_dimensionless(s, 0.3 * s).unwrap();
    let pt = pt_splitting(&at, Level::ONE, Level::TWO, 13, n0, ElementMethod::FockWindow).unwrap();
    let ratio = pt / gap.best.gap;
    // frozen from an earlier run: gap 1.3926e-4, PT/exact 1.108
    assert!((gap.best.gap - 1.3926e-4).abs() <= 1e-3 * 1.3926e-4, "{}", gap.best.gap);
    assert!((ratio - 1.108).abs() <= 5e-3, "{ratio}");

    // coarse steps jump the anticrossing diabatically: the tracked states
    // swap energy order once, in the step containing the minimum
    let ss: Vec<f64> = (0..9).map(|i| gap.best.location - 1.875e-3 + 5e-4 * i as f64).collect();
    let labels = [(Level::ONE, n0), (Level::TWO, n0 - 13)];
    let track = track_levels(&p, &line, &ss, window, &labels).unwrap();
    assert_eq!(track.relabel_events.len(), 1, "{:?}", track.relabel_events);
    let ev = track.relabel_events[0];
    assert!(ev.from <= gap.best.location && gap.best.location <= ev.to);
}

#[test]
fn exact_levels_follow_wkb_off_resonance() {
    // (0.25, 0.55) is ≥ 0.3 from every odd 1–2 / 2–3 and even 1–3 resonance
    let p = ModelParams::reference_ladder(0.25, 0.55).unwrap();
    let wkb = wkb_levels(&p, p.n0(), DEFAULT_WKB_NODES).unwrap();
    let exact = exact_dressed_energies(&p, FockWindow::new(p.n0(), 200).unwrap()).unwrap();
    for j in 0..3 {
        assert!((wkb[j] - exact[j].energy).abs() <= 0.1, "level {}: {} vs {}", j + 1, wkb[j], exact[j].energy);
        assert!(exact[j].overlap > 0.9);
    }
    let t12 = dressed_transition(&p, Level::ONE, Level::TWO, p.n0()).unwrap();
    assert!((t12 - (exact[1].energy - exact[0].energy)).abs() <= 0.2);
}

#[test]
fn exact_energies_independent_of_window_centre_shift() {
    // moving the window centre by two quanta within a sector changes nothing
    // but the reference: energies are reported relative to the centre
    let p = ModelParams::reference_ladder(0.5, 0.5).unwrap();
    let a = exact_dressed_energies(&p, FockWindow::new(p.n0(), 300).unwrap()).unwrap();
    let b = exact_dressed_energies(&p, FockWindow::new(p.n0() + 2, 300).unwrap()).unwrap();
    for j in 0..3 {
        assert!((a[j].energy - b[j].energy).abs() <= 1e-6);
    }
}
