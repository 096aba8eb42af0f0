use std::path::{Path, PathBuf};

use anyhow::{bail, Context, Result};
use rayon::prelude::*;
use trilevel::dressed_levels::{resonance_contour, wkb_levels, DEFAULT_WKB_NODES};
use trilevel::fock_window::{exact_dressed_energies, resonance_sharpness_map, DEFAULT_HALF_WIDTH};
use trilevel::splittings::compare_splittings;
use trilevel::trilevel_core::eigenvalues_at;
use trilevel::validate::{run_validation, ValidateOptions};
use trilevel::{FockWindow, GapSearch, MapGrid, RaySet, SplittingSettings};

use crate::config::ExperimentConfig;
use crate::output::Table;

pub struct Invocation<'a> {
    pub command: &'static str,
    pub config_path: &'a Path,
    pub config: &'a ExperimentConfig,
    pub out: &'a Path,
}

fn header(ctx: &Invocation, table: &mut Table) -> Result<()> {
    let m = ctx.config.model()?;
    let p = m.params;
    let tag = |derived: bool| if derived { " (derived)" } else { "" };
    table.note(format!("trilevel {} {}", env!("CARGO_PKG_VERSION"), ctx.command));
    table.note(format!("config: {}", ctx.config_path.display()));
    let [e1, e2, e3] = p.energies();
    table.note(format!("e1 = {}, e2 = {}, e3 = {}, n0 = {}", table.num(e1), table.num(e2), table.num(e3), p.n0()));
    table.note(format!("u = {}{}, g1 = {}{}", table.num(p.u()), tag(m.u_derived), table.num(p.g1()), tag(!m.u_derived)));
    table.note(format!("v = {}{}, g2 = {}{}", table.num(p.v()), tag(m.v_derived), table.num(p.g2()), tag(!m.v_derived)));
    table.note("energies in units of hbar*omega0");
    Ok(())
}

fn grid(cfg: &ExperimentConfig, default_points: (usize, usize)) -> Result<Option<MapGrid>> {
    let r = &cfg.run;
    if r.g1_range.is_none() && r.g2_range.is_none() {
        return Ok(None);
    }
    let g1 = r.g1_range.context("run.g2_range given without run.g1_range")?;
    let g2 = r.g2_range.context("run.g1_range given without run.g2_range")?;
    let g1_points = r.g1_points.unwrap_or(default_points.0);
    let g2_points = r.g2_points.unwrap_or(default_points.1);
    if g1_points == 0 || g2_points == 0 {
        bail!("run.g1_points and run.g2_points must be positive");
    }
    Ok(Some(MapGrid { g1: (g1[0], g1[1]), g2: (g2[0], g2[1]), g1_points, g2_points }))
}

fn window(cfg: &ExperimentConfig, n0: u64) -> Result<FockWindow> {
    let w = cfg.run.half_width.unwrap_or(DEFAULT_HALF_WIDTH).min(n0);
    Ok(FockWindow::new(n0, w)?)
}

pub fn levels(ctx: &Invocation) -> Result<Vec<PathBuf>> {
    let cfg = ctx.config;
    let p = cfg.model()?.params;
    let reach = 1.1 * (2.0 * p.n0() as f64 + 1.0).sqrt();
    let lo = cfg.run.y_min.unwrap_or(-reach);
    let hi = cfg.run.y_max.unwrap_or(reach);
    let count = cfg.run.y_points.unwrap_or(401).max(2);
    let mut t = Table::new(&["y", "E1", "E2", "E3"], cfg.output.precision);
    header(ctx, &mut t)?;
    let ys: Vec<f64> = (0..count).map(|i| lo + (hi - lo) * i as f64 / (count - 1) as f64).collect();
    let rows = ys.par_iter().map(|&y| eigenvalues_at(&p, y).map(|e| (y, e))).collect::<Result<Vec<_>, _>>()?;
    for (y, e) in rows {
        t.push(vec![t.num(y), t.num(e[0]), t.num(e[1]), t.num(e[2])]);
    }
    Ok(vec![t.write(ctx.out, "levels.csv")?])
}

pub fn wkb(ctx: &Invocation) -> Result<Vec<PathBuf>> {
    let cfg = ctx.config;
    let p = cfg.model()?.params;
    let compare = match cfg.run.compare.as_deref().unwrap_or("none") {
        "none" => false,
        "exact" => true,
        other => bail!("run.compare must be \"none\" or \"exact\", got {other:?}"),
    };
    let nodes = cfg.run.quadrature_nodes.unwrap_or(DEFAULT_WKB_NODES);
    let points = match grid(cfg, (11, 11))? {
        Some(g) => g.points(),
        None => vec![(p.g1(), p.g2())],
    };
    let w = if compare { Some(window(cfg, p.n0())?) } else { None };
    let mut cols = vec!["g1", "g2", "E1", "E2", "E3", "E2-E1", "E3-E2"];
    if compare {
        cols.extend(["E1_exact", "E2_exact", "E3_exact", "overlap1", "overlap2", "overlap3"]);
    }
    let mut t = Table::new(&cols, cfg.output.precision);
    header(ctx, &mut t)?;
    t.note(format!("quantum number n = n0; Chebyshev nodes start at {nodes}"));
    if let Some(w) = w {
        t.note(format!("exact: Fock window half-width {}", w.half_width));
    }
    let rows = points
        .par_iter()
        .map(|&(g1, g2)| -> Result<Vec<f64>> {
            let q = p.with_dimensionless(g1, g2)?;
            let e = wkb_levels(&q, q.n0(), nodes)?;
            let mut row = vec![g1, g2, e[0], e[1], e[2], e[1] - e[0], e[2] - e[1]];
            if let Some(w) = w {
                let x = exact_dressed_energies(&q, w)?;
                row.extend(x.iter().map(|d| d.energy));
                row.extend(x.iter().map(|d| d.overlap));
            }
            Ok(row)
        })
        .collect::<Result<Vec<_>>>()?;
    for r in rows {
        let cells = r.iter().map(|x| t.num(*x)).collect();
        t.push(cells);
    }
    Ok(vec![t.write(ctx.out, "wkb.csv")?])
}

pub fn contours(ctx: &Invocation) -> Result<Vec<PathBuf>> {
    let cfg = ctx.config;
    let p = cfg.model()?.params;
    let (lower, upper) = cfg.transition([1, 2])?;
    let dns = cfg.run.delta_n.clone().unwrap_or_else(|| vec![11]);
    let mut rays = RaySet::quadrant(cfg.run.rays.unwrap_or(181), cfg.run.g_max.unwrap_or(1.25));
    if let Some(s) = cfg.run.ray_samples {
        rays.samples = s;
    }
    let mut t = Table::new(&["lower", "upper", "delta_n", "g1", "g2", "residual"], cfg.output.precision);
    header(ctx, &mut t)?;
    t.note(format!("{} rays, g_max = {}, {} samples per ray", rays.angles.len(), t.num(rays.g_max), rays.samples));
    for dn in dns {
        let c = resonance_contour(&p, lower, upper, dn, &rays)
            .with_context(|| format!("contour {lower}->{upper}, delta_n = {dn}"))?;
        t.note(format!(
            "delta_n = {dn}: {} points, {} rays without a crossing",
            c.points.len(),
            c.rays_without_root.len()
        ));
        for pt in &c.points {
            t.push(vec![lower.to_string(), upper.to_string(), dn.to_string(), t.num(pt.g1), t.num(pt.g2), t.num(pt.residual)]);
        }
    }
    Ok(vec![t.write(ctx.out, "contours.csv")?])
}

pub fn resonance_map(ctx: &Invocation) -> Result<Vec<PathBuf>> {
    let cfg = ctx.config;
    let p = cfg.model()?.params;
    let (lower, upper) = cfg.transition([1, 2])?;
    let g = grid(cfg, (21, 26))?.unwrap_or(MapGrid { g1: (0.0, 1.0), g2: (0.0, 1.25), g1_points: 21, g2_points: 26 });
    let w = window(cfg, p.n0())?;
    let map = resonance_sharpness_map(&p, &g, lower, upper, w)?;
    let mut t = Table::new(
        &["g1", "g2", "transition", "delta_n", "distance", "inverse", "valid", "error"],
        cfg.output.precision,
    );
    header(ctx, &mut t)?;
    t.note(format!("transition {lower}->{upper}; Fock window half-width {}; inverse capped at 1e6", w.half_width));
    let invalid = map.iter().filter(|m| !m.is_valid()).count();
    t.note(format!("{} points, {invalid} invalid", map.len()));
    for m in &map {
        t.push(vec![
            t.num(m.g1),
            t.num(m.g2),
            t.num(m.transition),
            m.delta_n.to_string(),
            t.num(m.distance),
            t.num(m.inverse),
            m.is_valid().to_string(),
            m.error.clone().unwrap_or_default(),
        ]);
    }
    Ok(vec![t.write(ctx.out, "resonance_map.csv")?])
}

pub fn splittings(ctx: &Invocation) -> Result<Vec<PathBuf>> {
    let cfg = ctx.config;
    let p = cfg.model()?.params;
    let (lower, upper) = cfg.transition([1, 2])?;
    let dns = cfg.run.delta_n.clone().unwrap_or_else(|| (13..=27).step_by(2).collect());
    let ratios = cfg.run.line_ratios.clone().unwrap_or_else(|| vec![0.3]);
    let mut settings = SplittingSettings { method: cfg.method()?, ..SplittingSettings::default() };
    settings.half_width = cfg.run.half_width.unwrap_or(DEFAULT_HALF_WIDTH);
    if let Some(b) = cfg.run.bracket {
        settings.bracket = b;
    }
    if let Some(g) = cfg.run.g_max {
        settings.g_max = g;
    }
    if let Some(n) = cfg.run.scan_points {
        settings.search = GapSearch { scan_points: n, ..settings.search };
    }
    let mut t = Table::new(
        &[
            "lower",
            "upper",
            "line_ratio",
            "delta_n",
            "g_contour",
            "g_exact",
            "dE_pt",
            "dE_exact",
            "ratio",
            "minima",
            "minima_g1",
            "anomalous",
            "valid",
            "error",
        ],
        cfg.output.precision,
    );
    header(ctx, &mut t)?;
    t.note(format!(
        "Fock window half-width {}; gap scan {} points over +-{} of the contour crossing",
        settings.half_width,
        settings.search.scan_points,
        t.num(settings.bracket)
    ));
    for r in ratios {
        for rec in compare_splittings(&p, r, &dns, lower, upper, &settings) {
            let locs: Vec<String> = rec.minima_locations.iter().map(|x| t.num(*x)).collect();
            t.push(vec![
                lower.to_string(),
                upper.to_string(),
                t.num(r),
                rec.delta_n.to_string(),
                t.num(rec.g_contour),
                t.num(rec.g_exact),
                t.num(rec.pt),
                t.num(rec.exact),
                t.num(rec.ratio_pt_exact()),
                rec.minima.to_string(),
                locs.join(";"),
                rec.anomalous.to_string(),
                rec.is_valid().to_string(),
                rec.error.clone().unwrap_or_default(),
            ]);
        }
    }
    Ok(vec![t.write(ctx.out, "splittings.csv")?])
}

/// Returns the written report and whether every check passed.
pub fn validate(ctx: &Invocation) -> Result<(Vec<PathBuf>, bool)> {
    let cfg = ctx.config;
    let opts = ValidateOptions { inject_symmetry_fault: cfg.run.inject_fault.unwrap_or(false) };
    let report = run_validation(&opts);
    let mut t = Table::new(&["check", "passed", "seconds", "detail"], cfg.output.precision);
    header(ctx, &mut t)?;
    for c in &report.checks {
        println!(
            "{:<34} {}  {:>8.3}s  {}",
            c.name,
            if c.passed { "PASS" } else { "FAIL" },
            c.elapsed.as_secs_f64(),
            c.detail
        );
        t.push(vec![c.name.to_string(), c.passed.to_string(), format!("{:.3}", c.elapsed.as_secs_f64()), c.detail.clone()]);
    }
    Ok((vec![t.write(ctx.out, "validate.csv")?], report.passed()))
}
