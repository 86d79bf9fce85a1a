//! Scenario files: TOML documents describing one simulation and its analysis.
//!
//! ```toml
//! name = "pseudoconformal-1d"
//! output = "runs/pc1d"            # relative to this file; `--out` overrides
//!
//! [equation]
//! dim = 1
//! sign = "focusing"               # or "defocusing"
//!
//! [initial]
//! kind = "exact-family"           # "gaussian" | "file"
//! family = "pseudoconformal"      # or "soliton"
//! t_star = 1.0
//! evaluate = "integrate"          # or "formula" to sample the exact solution
//!
//! [grid]
//! n = 8192
//! half_width = 16.0
//!
//! [step]                          # required when integrating
//! dt_init = 1e-3
//! dt_min = 1e-10
//! safety = 0.0025
//! m_stop = 4.2
//! rho_tail = 1e-6
//!
//! [schedule]
//! t_end = 1.0
//! cadence = 1e-3                  # uniform spacing
//! snapshot_every = 4
//!
//! [diagnostics]                   # every key optional
//! eta = 0.5
//! eps_fraction = 0.25             # or eps_level = <absolute mass>
//! tolerance = 0.1
//! window = [0.5, 0.95]
//! scales = { rule = "geometric", min = 0.05, max = 2.0, count = 8 }
//! ```

use std::path::{Path, PathBuf};

use blowscope::diagnostics::RateFunction;
use blowscope::integrator::{EquationSpec, Schedule, Sign, StepControl};
use blowscope::solutions::blowup_times;
use blowscope::spectral::Grid;
use serde::{Deserialize, Serialize};

use crate::error::{HarnessError, Result};

pub const DEFAULT_ETA: f64 = 0.5;
pub const DEFAULT_EPS_FRACTION: f64 = 0.25;
pub const DEFAULT_TOLERANCE: f64 = 0.1;
pub const DEFAULT_WINDOW: [f64; 2] = [0.5, 0.95];
pub const DEFAULT_SIGMA_TILDE: f64 = 0.5;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Scenario {
    pub name: String,
    #[serde(default)]
    pub output: Option<PathBuf>,
    pub equation: EquationSection,
    pub initial: InitialData,
    pub grid: GridSection,
    #[serde(default)]
    pub step: Option<StepSection>,
    pub schedule: ScheduleSection,
    #[serde(default)]
    pub diagnostics: DiagnosticsPlan,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct EquationSection {
    pub dim: usize,
    pub sign: Sign,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Family {
    Soliton,
    Pseudoconformal,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Evaluate {
    #[default]
    Integrate,
    Formula,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case", deny_unknown_fields)]
pub enum InitialData {
    ExactFamily {
        family: Family,
        #[serde(default = "one")]
        t_star: f64,
        #[serde(default)]
        evaluate: Evaluate,
    },
    Gaussian {
        amplitude: f64,
        width: f64,
        #[serde(default)]
        center: [f64; 2],
    },
    /// A field in the binary snapshot format; relative paths resolve against
    /// the scenario file.
    File { path: PathBuf },
}

fn one() -> f64 {
    1.0
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GridSection {
    pub n: usize,
    pub half_width: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct StepSection {
    pub dt_init: f64,
    pub dt_min: f64,
    pub safety: f64,
    pub m_stop: f64,
    pub rho_tail: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Spacing {
    #[default]
    Uniform,
    /// `T* − t` geometric, for exact-formula sampling only.
    Geometric,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScheduleSection {
    #[serde(default)]
    pub t_start: f64,
    pub t_end: f64,
    #[serde(default)]
    pub cadence: Option<f64>,
    #[serde(default)]
    pub records: Option<usize>,
    #[serde(default)]
    pub spacing: Spacing,
    #[serde(default = "one_usize")]
    pub snapshot_every: usize,
}

fn one_usize() -> usize {
    1
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "rule", rename_all = "lowercase", deny_unknown_fields)]
pub enum ScalesRule {
    Geometric { min: f64, max: f64, count: usize },
    List { values: Vec<f64> },
}

impl ScalesRule {
    pub fn scales(&self) -> Vec<f64> {
        match self {
            ScalesRule::List { values } => values.clone(),
            ScalesRule::Geometric { min, max, count } => {
                if *count <= 1 {
                    return vec![*min];
                }
                let r = (max / min).ln() / (*count - 1) as f64;
                (0..*count).map(|k| min * (r * k as f64).exp()).collect()
            }
        }
    }

    /// Eight scales from `2h` to the half-width.
    pub fn default_for(grid: &Grid) -> Self {
        ScalesRule::Geometric {
            min: 2.0 * grid.spacing(),
            max: grid.half_width(),
            count: 8,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DiagnosticsPlan {
    pub scales: Option<ScalesRule>,
    pub eta: Option<f64>,
    /// Absolute concentration level; overrides `eps_fraction`.
    pub eps_level: Option<f64>,
    /// Level as a fraction of the initial mass.
    pub eps_fraction: Option<f64>,
    pub tolerance: Option<f64>,
    /// Analysis window as fractions of `T*`.
    pub window: Option<[f64; 2]>,
    /// Known blow-up time; otherwise exact-formula runs use the family's and
    /// simulated runs their own estimate.
    pub t_star: Option<f64>,
    /// Concentration exponent hypothesis; defaults to the measured one.
    pub alpha: Option<f64>,
    /// Strichartz rate hypothesis `‖u‖ ~ (T* − t)^{−β}`; defaults to the measured one.
    pub beta: Option<f64>,
    pub rate: Option<RateFunction>,
    pub sigma_tilde: Option<f64>,
    /// Also estimate α under the frequency projection with the κ(ε) cutoff.
    #[serde(default)]
    pub projected_alpha: bool,
}

/// A parsed scenario together with its source text and location.
#[derive(Debug, Clone)]
pub struct LoadedScenario {
    pub path: PathBuf,
    pub source: String,
    pub scenario: Scenario,
}

/// Line and column (1-based) of a byte offset.
fn line_col(src: &str, offset: usize) -> (usize, usize) {
    let before = &src[..offset.min(src.len())];
    let line = before.matches('\n').count() + 1;
    let col = before.rfind('\n').map_or(before.len(), |i| before.len() - i - 1) + 1;
    (line, col)
}

/// Line of `key = …` inside `[table]` (the root table when `table` is empty).
fn locate(src: &str, table: &str, key: &str) -> Option<usize> {
    let mut current = String::new();
    let mut table_line = None;
    for (i, raw) in src.lines().enumerate() {
        let line = raw.trim();
        if let Some(rest) = line.strip_prefix('[') {
            current = rest.trim_end_matches(']').trim().to_string();
            if current == table {
                table_line = Some(i + 1);
            }
            continue;
        }
        if current == table {
            if let Some((k, _)) = line.split_once('=') {
                if k.trim() == key {
                    return Some(i + 1);
                }
            }
        }
    }
    table_line
}

/// Line of the offending key when a whole table is reported for an unknown
/// field.
fn unknown_key_line(src: &str, message: &str, span: std::ops::Range<usize>) -> Option<usize> {
    let rest = message.split("unknown field `").nth(1)?;
    let key = &rest[..rest.find('`')?];
    let first = line_col(src, span.start).0;
    src.lines()
        .enumerate()
        .skip(first)
        .take_while(|(_, l)| !l.trim_start().starts_with('['))
        .find_map(|(i, l)| {
            let (k, _) = l.split_once('=')?;
            (k.trim() == key).then_some(i + 1)
        })
}

/// A TOML parse error located in its source.
pub(crate) fn toml_error(path: &Path, source: &str, e: &toml::de::Error) -> HarnessError {
    let (line, column) = match e.span() {
        Some(span) => match unknown_key_line(source, e.message(), span.clone()) {
            Some(l) => (Some(l), Some(1)),
            None => {
                let (l, c) = line_col(source, span.start);
                (Some(l), Some(c))
            }
        },
        None => (None, None),
    };
    HarnessError::Config {
        path: path.to_path_buf(),
        line,
        column,
        message: e.message().trim().to_string(),
    }
}

struct Checker<'a> {
    path: &'a Path,
    src: &'a str,
}

impl Checker<'_> {
    fn fail(&self, table: &str, key: &str, message: impl Into<String>) -> HarnessError {
        HarnessError::Config {
            path: self.path.to_path_buf(),
            line: locate(self.src, table, key),
            column: None,
            message: message.into(),
        }
    }

    fn ensure(&self, ok: bool, table: &str, key: &str, message: impl FnOnce() -> String) -> Result<()> {
        if ok {
            Ok(())
        } else {
            Err(self.fail(table, key, message()))
        }
    }
}

impl Scenario {
    pub fn equation(&self) -> blowscope::Result<EquationSpec> {
        EquationSpec::new(self.equation.dim, self.equation.sign)
    }

    pub fn grid(&self) -> blowscope::Result<Grid> {
        Grid::new(self.equation.dim, self.grid.n, self.grid.half_width)
    }

    pub fn step_control(&self) -> Option<StepControl> {
        self.step.map(|s| StepControl {
            dt_init: s.dt_init,
            dt_min: s.dt_min,
            safety: s.safety,
            m_stop: s.m_stop,
            rho_tail: s.rho_tail,
        })
    }

    /// Uniform output schedule for the integrator.
    pub fn schedule(&self) -> Option<Schedule> {
        Some(Schedule {
            t_start: self.schedule.t_start,
            t_end: self.schedule.t_end,
            cadence: self.schedule.cadence?,
            snapshot_every: self.schedule.snapshot_every,
        })
    }

    /// Record times for exact-formula sampling.
    pub fn sample_times(&self) -> blowscope::Result<Vec<f64>> {
        let s = &self.schedule;
        match s.spacing {
            Spacing::Geometric => {
                let t_star = self.family_t_star().unwrap_or(1.0);
                blowup_times(t_star, s.t_end, s.records.unwrap_or(2))
            }
            Spacing::Uniform => {
                let cadence = s.cadence.unwrap_or(f64::NAN);
                let count = ((s.t_end - s.t_start) / cadence * (1.0 + 1e-12)).floor() as usize;
                let mut times: Vec<f64> = (0..=count).map(|k| s.t_start + k as f64 * cadence).collect();
                if times.last().is_some_and(|&t| t < s.t_end) {
                    times.push(s.t_end);
                }
                Ok(times)
            }
        }
    }

    pub fn evaluate(&self) -> Evaluate {
        match self.initial {
            InitialData::ExactFamily { evaluate, .. } => evaluate,
            _ => Evaluate::Integrate,
        }
    }

    fn family_t_star(&self) -> Option<f64> {
        match self.initial {
            InitialData::ExactFamily {
                family: Family::Pseudoconformal,
                t_star,
                ..
            } => Some(t_star),
            _ => None,
        }
    }

    /// Blow-up time to seed the analysis with, if any.
    pub fn seeded_t_star(&self) -> Option<f64> {
        self.diagnostics.t_star.or(match self.evaluate() {
            Evaluate::Formula => self.family_t_star(),
            Evaluate::Integrate => None,
        })
    }

    pub fn scales_rule(&self, grid: &Grid) -> ScalesRule {
        self.diagnostics
            .scales
            .clone()
            .unwrap_or_else(|| ScalesRule::default_for(grid))
    }

    fn validate(&self, ck: &Checker, base: Option<&Path>) -> Result<()> {
        let eq = self
            .equation()
            .map_err(|e| ck.fail("equation", "dim", e.to_string()))?;
        let grid = Grid::new(eq.dim(), self.grid.n, self.grid.half_width).map_err(|e| {
            let key = if self.grid.n < 8 || !self.grid.n.is_power_of_two() { "n" } else { "half_width" };
            ck.fail("grid", key, e.to_string())
        })?;
        ck.ensure(!self.name.trim().is_empty(), "", "name", || "name must not be empty".into())?;

        match &self.initial {
            InitialData::ExactFamily { family, t_star, evaluate } => {
                ck.ensure(t_star.is_finite() && *t_star > 0.0, "initial", "t_star", || {
                    format!("t_star = {t_star} must be positive")
                })?;
                if *family == Family::Pseudoconformal {
                    ck.ensure(eq.sign() == Sign::Focusing, "equation", "sign", || {
                        "the pseudoconformal family solves the focusing equation".into()
                    })?;
                    ck.ensure(self.schedule.t_end < *t_star, "schedule", "t_end", || {
                        format!("t_end = {} must precede t_star = {t_star}", self.schedule.t_end)
                    })?;
                }
                if *family == Family::Soliton {
                    ck.ensure(eq.sign() == Sign::Focusing, "equation", "sign", || {
                        "solitons solve the focusing equation".into()
                    })?;
                }
                if *evaluate == Evaluate::Formula {
                    ck.ensure(*family == Family::Pseudoconformal, "initial", "evaluate", || {
                        "formula evaluation is available for the pseudoconformal family".into()
                    })?;
                }
            }
            InitialData::Gaussian { amplitude, width, .. } => {
                ck.ensure(amplitude.is_finite(), "initial", "amplitude", || {
                    format!("amplitude {amplitude} must be finite")
                })?;
                ck.ensure(width.is_finite() && *width > 0.0, "initial", "width", || {
                    format!("width {width} must be positive")
                })?;
            }
            InitialData::File { path } => {
                if let Some(base) = base {
                    let full = base.join(path);
                    ck.ensure(full.is_file(), "initial", "path", || {
                        format!("initial-data file {} does not exist", full.display())
                    })?;
                }
            }
        }

        let s = &self.schedule;
        ck.ensure(s.snapshot_every >= 1, "schedule", "snapshot_every", || {
            "snapshot_every must be at least 1".into()
        })?;
        ck.ensure(s.t_end > s.t_start && s.t_start >= 0.0, "schedule", "t_end", || {
            format!("need 0 <= t_start < t_end, got {} and {}", s.t_start, s.t_end)
        })?;
        match (self.evaluate(), s.spacing) {
            (Evaluate::Integrate, Spacing::Geometric) => {
                return Err(ck.fail("schedule", "spacing", "geometric spacing is only available with evaluate = \"formula\""));
            }
            (_, Spacing::Geometric) => {
                ck.ensure(s.records.is_some_and(|r| r >= 2), "schedule", "records", || {
                    "geometric spacing needs records >= 2".into()
                })?;
            }
            (_, Spacing::Uniform) => {
                ck.ensure(s.cadence.is_some_and(|c| c > 0.0 && c.is_finite()), "schedule", "cadence", || {
                    "uniform spacing needs a positive cadence".into()
                })?;
            }
        }
        if self.evaluate() == Evaluate::Integrate {
            let ctl = self
                .step_control()
                .ok_or_else(|| ck.fail("step", "dt_init", "a [step] table is required to integrate"))?;
            ctl.validate().map_err(|e| ck.fail("step", "dt_init", e.to_string()))?;
        } else {
            ck.ensure(s.spacing == Spacing::Uniform || s.t_start == 0.0, "schedule", "t_start", || {
                "geometric sampling starts at t = 0".into()
            })?;
            self.sample_times().map_err(|e| ck.fail("schedule", "t_end", e.to_string()))?;
        }

        let d = &self.diagnostics;
        let h = grid.spacing();
        let scales = self.scales_rule(&grid).scales();
        ck.ensure(!scales.is_empty(), "diagnostics", "scales", || "no scales".into())?;
        for s in &scales {
            ck.ensure(s.is_finite() && *s >= h * (1.0 - 1e-12), "diagnostics", "scales", || {
                format!("scale {s} is below the grid spacing {h}")
            })?;
        }
        if let Some(eta) = d.eta {
            ck.ensure(eta.is_finite() && eta > 0.0, "diagnostics", "eta", || format!("eta = {eta} must be positive"))?;
        }
        if let Some(e) = d.eps_level {
            ck.ensure(e.is_finite() && e > 0.0, "diagnostics", "eps_level", || {
                format!("eps_level = {e} must be positive")
            })?;
        }
        if let Some(f) = d.eps_fraction {
            ck.ensure(f > 0.0 && f <= 1.0, "diagnostics", "eps_fraction", || {
                format!("eps_fraction = {f} must lie in (0, 1]")
            })?;
        }
        if let Some(t) = d.tolerance {
            ck.ensure(t.is_finite() && t > 0.0, "diagnostics", "tolerance", || {
                format!("tolerance = {t} must be positive")
            })?;
        }
        if let Some(w) = d.window {
            ck.ensure(w[0] >= 0.0 && w[0] < w[1] && w[1] < 1.0, "diagnostics", "window", || {
                format!("window {w:?} must satisfy 0 <= lo < hi < 1")
            })?;
        }
        if let Some(t) = d.t_star {
            ck.ensure(t.is_finite() && t > 0.0, "diagnostics", "t_star", || format!("t_star = {t} must be positive"))?;
        }
        for (key, v) in [("alpha", d.alpha), ("beta", d.beta)] {
            if let Some(v) = v {
                ck.ensure(v.is_finite() && v > 0.0, "diagnostics", key, || format!("{key} = {v} must be positive"))?;
            }
        }
        if let Some(r) = &d.rate {
            r.validate().map_err(|e| ck.fail("diagnostics", "rate", e.to_string()))?;
        }
        if let Some(s) = d.sigma_tilde {
            ck.ensure((0.0..=1.0).contains(&s), "diagnostics", "sigma_tilde", || {
                format!("sigma_tilde = {s} must lie in [0, 1]")
            })?;
        }
        Ok(())
    }
}

/// Parses and validates scenario text; `path` is used for messages and to
/// resolve relative file references.
pub fn parse_scenario(path: &Path, source: &str) -> Result<Scenario> {
    parse_with(path, source, Some(path.parent().unwrap_or(Path::new("."))))
}

/// Parses a scenario copied into a run directory; referenced input files are
/// not required to exist any more.
pub fn parse_stored_scenario(path: &Path, source: &str) -> Result<Scenario> {
    parse_with(path, source, None)
}

fn parse_with(path: &Path, source: &str, base: Option<&Path>) -> Result<Scenario> {
    let scenario: Scenario = toml::from_str(source).map_err(|e| toml_error(path, source, &e))?;
    scenario.validate(&Checker { path, src: source }, base)?;
    Ok(scenario)
}

pub fn load_scenario(path: &Path) -> Result<LoadedScenario> {
    let source = std::fs::read_to_string(path).map_err(|e| HarnessError::io(path, e))?;
    let scenario = parse_scenario(path, &source)?;
    Ok(LoadedScenario {
        path: path.to_path_buf(),
        source,
        scenario,
    })
}

impl LoadedScenario {
    /// Directory relative references resolve against.
    pub fn base_dir(&self) -> &Path {
        self.path.parent().filter(|p| !p.as_os_str().is_empty()).unwrap_or(Path::new("."))
    }

    pub fn output_dir(&self) -> Option<PathBuf> {
        self.scenario.output.as_ref().map(|o| self.base_dir().join(o))
    }
}
