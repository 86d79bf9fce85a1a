//! Persistence experiments described by a TOML case file.
//!
//! ```toml
//! samples = 41                    # default per case, at least 20
//! tolerance = 0.1                 # on the dilation exponent
//!
//! [[case]]
//! name = "indicator-1d"
//! dim = 1
//! n = 8192
//! half_width = 16.0
//! profile = { shape = "indicator" }
//! scale = 1.0                     # optional frequency scale A
//! boost = [0.0, 0.0]              # optional grid frequency ξ₀
//!
//! [[sweep]]
//! name = "bump-dilation"
//! dim = 1
//! n = 8192
//! half_width = 16.0
//! profile = { shape = "bump", center = [0.5, 0.0], width = 0.6, frequency = [0.5, 0.0] }
//! scales = [1.0, 2.0, 4.0, 8.0]
//! ```

use std::collections::BTreeSet;
use std::path::Path;

use blowscope::diagnostics::{RateFit, Verdict};
use blowscope::lemma_lab::{
    make_case, rescaled_persistence, run_persistence, CaseParams, PersistenceTable, Shape, MIN_SAMPLES,
};
use blowscope::spectral::Grid;
use serde::{Deserialize, Serialize};

use crate::error::{HarnessError, Result};
use crate::scenario::{toml_error, DEFAULT_TOLERANCE};

/// Predicted exponent of the persistence time against the frequency scale.
pub const DILATION_EXPONENT: f64 = -2.0;

fn default_samples() -> usize {
    41
}

fn unit() -> f64 {
    1.0
}

#[derive(Debug, Clone, PartialEq, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct LemmaConfig {
    #[serde(default = "default_samples")]
    pub samples: usize,
    pub tolerance: Option<f64>,
    #[serde(default, rename = "case")]
    pub cases: Vec<LemmaCase>,
    #[serde(default, rename = "sweep")]
    pub sweeps: Vec<LemmaSweep>,
}

#[derive(Debug, Clone, PartialEq, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct LemmaCase {
    pub name: String,
    pub dim: usize,
    pub n: usize,
    pub half_width: f64,
    pub profile: Shape,
    #[serde(default = "unit")]
    pub scale: f64,
    #[serde(default)]
    pub boost: [f64; 2],
    pub samples: Option<usize>,
}

#[derive(Debug, Clone, PartialEq, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct LemmaSweep {
    pub name: String,
    pub dim: usize,
    pub n: usize,
    pub half_width: f64,
    pub profile: Shape,
    #[serde(default)]
    pub boost: [f64; 2],
    pub scales: Vec<f64>,
    pub samples: Option<usize>,
}

fn config_error(path: &Path, message: String) -> HarnessError {
    HarnessError::Config {
        path: path.to_path_buf(),
        line: None,
        column: None,
        message,
    }
}

fn valid_name(name: &str) -> bool {
    !name.is_empty() && name.chars().all(|c| c.is_ascii_alphanumeric() || c == '-' || c == '_')
}

pub fn parse_lemma_config(path: &Path, source: &str) -> Result<LemmaConfig> {
    let cfg: LemmaConfig = toml::from_str(source).map_err(|e| toml_error(path, source, &e))?;
    if cfg.cases.is_empty() && cfg.sweeps.is_empty() {
        return Err(config_error(path, "no [[case]] or [[sweep]] entries".into()));
    }
    let mut names = BTreeSet::new();
    let entries = cfg
        .cases
        .iter()
        .map(|c| (&c.name, c.dim, c.n, c.half_width, c.samples))
        .chain(cfg.sweeps.iter().map(|s| (&s.name, s.dim, s.n, s.half_width, s.samples)));
    for (name, dim, n, half_width, samples) in entries {
        if !valid_name(name) {
            return Err(config_error(
                path,
                format!("name `{name}` must be non-empty ASCII letters, digits, '-' or '_'"),
            ));
        }
        if !names.insert(name.clone()) {
            return Err(config_error(path, format!("duplicate name `{name}`")));
        }
        Grid::new(dim, n, half_width).map_err(|e| config_error(path, format!("`{name}`: {e}")))?;
        let samples = samples.unwrap_or(cfg.samples);
        if samples < MIN_SAMPLES {
            return Err(config_error(
                path,
                format!("`{name}`: {samples} samples, need at least {MIN_SAMPLES}"),
            ));
        }
    }
    for s in &cfg.sweeps {
        if s.scales.len() < 2 {
            return Err(config_error(path, format!("`{}`: a sweep needs at least two scales", s.name)));
        }
    }
    if let Some(t) = cfg.tolerance {
        if !(t.is_finite() && t > 0.0) {
            return Err(config_error(path, format!("tolerance = {t} must be positive")));
        }
    }
    Ok(cfg)
}

pub fn load_lemma_config(path: &Path) -> Result<LemmaConfig> {
    let source = std::fs::read_to_string(path).map_err(|e| HarnessError::io(path, e))?;
    parse_lemma_config(path, &source)
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CaseReport {
    pub name: String,
    pub dim: usize,
    pub n: usize,
    pub half_width: f64,
    pub params: CaseParams,
    pub window_side: f64,
    pub window_cells: usize,
    pub table: PersistenceTable,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SweepReport {
    pub name: String,
    pub dim: usize,
    pub n: usize,
    pub half_width: f64,
    pub verdict: Verdict,
    /// Every table passes.
    pub persistence_verdict: Verdict,
    /// `|fitted exponent − (−2)| ≤ tolerance`.
    pub exponent_verdict: Verdict,
    pub scales: Vec<f64>,
    pub persistence_fit: Option<RateFit>,
    pub normalized_fail_times: Vec<Option<f64>>,
    pub tables: Vec<PersistenceTable>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct LemmaReport {
    pub report: &'static str,
    pub verdict: Verdict,
    pub tolerance: f64,
    pub cases: Vec<CaseReport>,
    pub sweeps: Vec<SweepReport>,
}

/// Runs every case and sweep of the configuration.
pub fn run_lemma(cfg: &LemmaConfig) -> blowscope::Result<LemmaReport> {
    let tolerance = cfg.tolerance.unwrap_or(DEFAULT_TOLERANCE);
    let mut verdicts = Vec::new();
    let mut cases = Vec::with_capacity(cfg.cases.len());
    for c in &cfg.cases {
        let grid = Grid::new(c.dim, c.n, c.half_width)?;
        let params = CaseParams {
            shape: c.profile.clone(),
            scale: c.scale,
            boost: c.boost,
        };
        let case = make_case(&params, &grid)?;
        let table = run_persistence(&case, c.samples.unwrap_or(cfg.samples))?;
        verdicts.push(table.verdict);
        cases.push(CaseReport {
            name: c.name.clone(),
            dim: c.dim,
            n: c.n,
            half_width: c.half_width,
            params,
            window_side: case.window_side,
            window_cells: case.window_cells,
            table,
        });
    }
    let mut sweeps = Vec::with_capacity(cfg.sweeps.len());
    for s in &cfg.sweeps {
        let grid = Grid::new(s.dim, s.n, s.half_width)?;
        let base = CaseParams {
            shape: s.profile.clone(),
            scale: 1.0,
            boost: s.boost,
        };
        let r = rescaled_persistence(&base, &grid, &s.scales, s.samples.unwrap_or(cfg.samples))?;
        let exponent_verdict = Verdict::from_bool(
            r.persistence_fit
                .as_ref()
                .is_some_and(|f| (f.exponent - DILATION_EXPONENT).abs() <= tolerance),
        );
        let verdict = Verdict::combine(&[r.verdict, exponent_verdict]);
        verdicts.push(verdict);
        sweeps.push(SweepReport {
            name: s.name.clone(),
            dim: s.dim,
            n: s.n,
            half_width: s.half_width,
            verdict,
            persistence_verdict: r.verdict,
            exponent_verdict,
            scales: r.scales,
            persistence_fit: r.persistence_fit,
            normalized_fail_times: r.normalized_fail_times,
            tables: r.tables,
        });
    }
    Ok(LemmaReport {
        report: "lemma",
        verdict: Verdict::combine(&verdicts),
        tolerance,
        cases,
        sweeps,
    })
}

impl SweepReport {
    /// `scale,t,captured_mass,threshold` over all tables.
    pub fn write_csv<W: std::io::Write>(&self, w: &mut W) -> std::io::Result<()> {
        writeln!(w, "scale,t,captured_mass,threshold")?;
        for table in &self.tables {
            for r in &table.rows {
                writeln!(w, "{},{},{},{}", table.scale, r.t, r.captured_mass, r.threshold)?;
            }
        }
        Ok(())
    }
}
