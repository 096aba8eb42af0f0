//! Experiment configuration: a TOML file with `[model]`, `[run]` and
//! `[output]` tables.

use std::path::{Path, PathBuf};

use anyhow::{bail, Context, Result};
use serde::Deserialize;
use trilevel::{ElementMethod, Level, ModelParams};

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ModelBlock {
    pub e1: f64,
    pub e2: f64,
    pub e3: f64,
    pub u: Option<f64>,
    pub g1: Option<f64>,
    pub v: Option<f64>,
    pub g2: Option<f64>,
    pub n0: u64,
}

#[derive(Debug, Clone, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunBlock {
    // levels
    pub y_min: Option<f64>,
    pub y_max: Option<f64>,
    pub y_points: Option<usize>,
    // grids (wkb, resonance-map)
    pub g1_range: Option<[f64; 2]>,
    pub g2_range: Option<[f64; 2]>,
    pub g1_points: Option<usize>,
    pub g2_points: Option<usize>,
    /// `"none"` or `"exact"` (wkb).
    pub compare: Option<String>,
    // transitions
    pub transition: Option<[u8; 2]>,
    pub delta_n: Option<Vec<u32>>,
    // contours
    pub rays: Option<usize>,
    pub g_max: Option<f64>,
    pub ray_samples: Option<usize>,
    // splittings
    pub line_ratios: Option<Vec<f64>>,
    pub method: Option<String>,
    pub bracket: Option<f64>,
    pub scan_points: Option<usize>,
    // exact solver
    pub half_width: Option<u64>,
    pub quadrature_nodes: Option<usize>,
    // validate
    pub inject_fault: Option<bool>,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OutputBlock {
    pub directory: Option<PathBuf>,
    #[serde(default = "default_precision")]
    pub precision: usize,
}

fn default_precision() -> usize {
    15
}

impl Default for OutputBlock {
    fn default() -> Self {
        OutputBlock { directory: None, precision: default_precision() }
    }
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub model: ModelBlock,
    #[serde(default)]
    pub run: RunBlock,
    #[serde(default)]
    pub output: OutputBlock,
}

/// Model parameters plus which couplings were derived from the others.
#[derive(Debug, Clone, Copy)]
pub struct ResolvedModel {
    pub params: ModelParams,
    pub u_derived: bool,
    pub v_derived: bool,
}

impl ExperimentConfig {
    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).with_context(|| format!("reading config {}", path.display()))?;
        Self::parse(&text).with_context(|| format!("in config {}", path.display()))
    }

    pub fn parse(text: &str) -> Result<Self> {
        let cfg: ExperimentConfig = toml::from_str(text)?;
        cfg.check()?;
        Ok(cfg)
    }

    fn check(&self) -> Result<()> {
        let r = &self.run;
        let positive = |name: &str, v: Option<f64>| -> Result<()> {
            match v {
                Some(x) if !(x > 0.0) => bail!("run.{name} must be positive, got {x}"),
                _ => Ok(()),
            }
        };
        positive("g_max", r.g_max)?;
        positive("bracket", r.bracket)?;
        for (name, range) in [("g1_range", r.g1_range), ("g2_range", r.g2_range)] {
            if let Some([lo, hi]) = range {
                if !(lo <= hi) {
                    bail!("run.{name} must be ordered, got [{lo}, {hi}]");
                }
            }
        }
        if let (Some(lo), Some(hi)) = (r.y_min, r.y_max) {
            if !(lo < hi) {
                bail!("run.y_min must be below run.y_max, got {lo} ≥ {hi}");
            }
        }
        if self.output.precision == 0 || self.output.precision > 17 {
            bail!("output.precision must lie in 1..=17, got {}", self.output.precision);
        }
        self.model()?;
        Ok(())
    }

    pub fn model(&self) -> Result<ResolvedModel> {
        let m = &self.model;
        let e = [m.e1, m.e2, m.e3];
        let root = (m.n0 as f64).sqrt();
        let (u, u_derived) = match (m.u, m.g1) {
            (Some(u), None) => (u, false),
            (None, Some(g)) => (g * (m.e2 - m.e1) / root, true),
            _ => bail!("model: give exactly one of `u` and `g1`"),
        };
        let (v, v_derived) = match (m.v, m.g2) {
            (Some(v), None) => (v, false),
            (None, Some(g)) => (g * (m.e3 - m.e2) / root, true),
            _ => bail!("model: give exactly one of `v` and `g2`"),
        };
        let params = ModelParams::new(e, u, v, m.n0).context("model")?;
        Ok(ResolvedModel { params, u_derived, v_derived })
    }

    pub fn transition(&self, default: [u8; 2]) -> Result<(Level, Level)> {
        let [a, b] = self.run.transition.unwrap_or(default);
        let lower = Level::new(a).context("run.transition")?;
        let upper = Level::new(b).context("run.transition")?;
        if lower >= upper {
            bail!("run.transition must be [lower, upper] with lower < upper, got [{a}, {b}]");
        }
        Ok((lower, upper))
    }

    pub fn method(&self) -> Result<Option<ElementMethod>> {
        self.run.method.as_deref().map(|s| s.parse().context("run.method")).transpose()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    const BASE: &str = "[model]\ne1 = 0.0\ne2 = 11.0\ne3 = 24.0\nn0 = 100\n";

    #[test]
    fn derives_missing_coupling() {
        let cfg = ExperimentConfig::parse(&format!("{BASE}g1 = 0.5\nv = 0.2\n")).unwrap();
        let m = cfg.model().unwrap();
        assert!(m.u_derived && !m.v_derived);
        assert!((m.params.u() - 0.55).abs() < 1e-15);
        assert!((m.params.g2() - 0.2 * 10.0 / 13.0).abs() < 1e-15);
    }

    #[test]
    fn rejects_both_or_neither() {
        assert!(ExperimentConfig::parse(&format!("{BASE}g1 = 0.5\nu = 0.1\nv = 0.2\n")).is_err());
        assert!(ExperimentConfig::parse(&format!("{BASE}v = 0.2\n")).is_err());
    }

    #[test]
    fn unknown_keys_are_errors() {
        let e = ExperimentConfig::parse(&format!("{BASE}g1 = 0.5\ng2 = 0.5\n[run]\nbogus = 1\n")).unwrap_err();
        assert!(format!("{e:#}").contains("bogus"));
    }

    #[test]
    fn unordered_range_rejected() {
        let t = format!("{BASE}g1 = 0.5\ng2 = 0.5\n[run]\ng1_range = [0.5, 0.1]\n");
        assert!(ExperimentConfig::parse(&t).is_err());
    }
}
