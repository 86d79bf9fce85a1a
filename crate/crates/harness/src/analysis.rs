//! Reports computed from stored runs: concentration scans, fitted rates and
//! the two-way experiment linking the Strichartz rate with the window size.

use blowscope::diagnostics::checks::{
    check_local_estimate, check_log_lower_bound, estimate_alpha, thickened_concentration_fraction,
    window_concentration, AlphaEstimate, Analysis, BlowupReference, LocalEstimateReport, LogBoundReport,
    ThickReport, Verdict, WindowConcentration, WindowRule,
};
use blowscope::diagnostics::{
    concentration_scan, eta_partition, fit_power_law, fit_power_law_with_offset, gap_fit, smallest_capturing_scale,
    strichartz_exponent, EtaPartition, KappaParams, RateFit, RateFunction, Record,
};
use blowscope::integrator::RunResult;
use blowscope::{Error, Result};
use serde::Serialize;

use crate::scenario::{Scenario, DEFAULT_EPS_FRACTION, DEFAULT_ETA, DEFAULT_SIGMA_TILDE, DEFAULT_TOLERANCE, DEFAULT_WINDOW};

/// Range searched for the exponent of the accumulated norm.
pub const F_GAMMA_RANGE: [f64; 2] = [-3.0, 1.0];

/// Analysis parameters with scenario overrides applied.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Settings {
    pub eta: f64,
    pub eps_level: f64,
    pub initial_mass: f64,
    pub tolerance: f64,
    pub window: [f64; 2],
    pub t_star: Option<f64>,
    pub alpha: Option<f64>,
    pub beta: Option<f64>,
    pub rate: Option<RateFunction>,
    pub sigma_tilde: f64,
    pub projected_alpha: bool,
    pub scales: Vec<f64>,
}

impl Settings {
    pub fn resolve(sc: &Scenario, run: &RunResult) -> Result<Self> {
        let d = &sc.diagnostics;
        let initial_mass = run
            .diagnostics
            .records()
            .first()
            .map(|r| r.mass)
            .ok_or_else(|| Error::InsufficientSampling("the run has no records".into()))?;
        let grid = sc.grid()?;
        Ok(Self {
            eta: d.eta.unwrap_or(DEFAULT_ETA),
            eps_level: d
                .eps_level
                .unwrap_or(d.eps_fraction.unwrap_or(DEFAULT_EPS_FRACTION) * initial_mass),
            initial_mass,
            tolerance: d.tolerance.unwrap_or(DEFAULT_TOLERANCE),
            window: d.window.unwrap_or(DEFAULT_WINDOW),
            t_star: sc.seeded_t_star(),
            alpha: d.alpha,
            beta: d.beta,
            rate: d.rate.clone(),
            sigma_tilde: d.sigma_tilde.unwrap_or(DEFAULT_SIGMA_TILDE),
            projected_alpha: d.projected_alpha,
            scales: sc.scales_rule(&grid).scales(),
        })
    }

    /// Seeded when the blow-up time is known, estimated otherwise.
    pub fn analysis<'a>(&self, run: &'a RunResult) -> Result<Analysis<'a>> {
        match self.t_star {
            Some(t) => Analysis::seeded(run, t, self.window),
            None => Analysis::estimated(run, self.window),
        }
    }
}

/// Result of one computation inside a report.
#[derive(Debug, Clone, PartialEq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum Outcome<T> {
    Ok(T),
    Error(String),
}

impl<T> Outcome<T> {
    pub fn ok(&self) -> Option<&T> {
        match self {
            Outcome::Ok(v) => Some(v),
            Outcome::Error(_) => None,
        }
    }
}

impl<T> From<Result<T>> for Outcome<T> {
    fn from(r: Result<T>) -> Self {
        match r {
            Ok(v) => Outcome::Ok(v),
            Err(e) => Outcome::Error(e.to_string()),
        }
    }
}

/// One line of a check summary.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CheckLine {
    pub name: &'static str,
    pub relation: &'static str,
    pub verdict: Verdict,
    pub summary: String,
}

impl CheckLine {
    fn new(name: &'static str, relation: &'static str, verdict: Verdict, summary: String) -> Self {
        Self {
            name,
            relation,
            verdict,
            summary,
        }
    }

    fn failed(name: &'static str, relation: &'static str, e: impl std::fmt::Display) -> Self {
        Self::new(name, relation, Verdict::Fail, e.to_string())
    }

    pub fn line(&self) -> String {
        let v = match self.verdict {
            Verdict::Pass => "PASS",
            Verdict::Fail => "FAIL",
            Verdict::NotApplicable => "NOT_APPLICABLE",
        };
        format!("{v:<14} {:<28} {}", self.name, self.summary)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ScanRow {
    pub t: f64,
    pub scale: f64,
    pub width: f64,
    pub cells: usize,
    pub max_mass: f64,
    pub fraction: f64,
    pub corner_i: usize,
    pub corner_j: usize,
    pub x0: f64,
    pub x1: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SnapshotScan {
    pub t: f64,
    pub mass: f64,
    /// Smallest cube side capturing `eps_level`, when one exists.
    pub capturing_width: Option<f64>,
    pub capturing_mass: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ScanReport {
    pub report: &'static str,
    pub name: String,
    pub eps_level: f64,
    pub scales: Vec<f64>,
    pub snapshots: Vec<SnapshotScan>,
    #[serde(skip)]
    pub rows: Vec<ScanRow>,
}

impl ScanReport {
    pub fn write_csv<W: std::io::Write>(&self, w: W) -> csv::Result<()> {
        let mut out = csv::Writer::from_writer(w);
        for row in &self.rows {
            out.serialize(row)?;
        }
        out.flush()?;
        Ok(())
    }
}

/// Scans every stored snapshot at every scale of the plan.
pub fn scan_report(name: &str, run: &RunResult, settings: &Settings) -> Result<ScanReport> {
    let mut rows = Vec::new();
    let mut snapshots = Vec::with_capacity(run.snapshots.len());
    for snap in &run.snapshots {
        let mass = snap.field.mass();
        for &s in &settings.scales {
            let r = concentration_scan(&snap.field, s, None)?;
            rows.push(ScanRow {
                t: snap.t,
                scale: r.scale,
                width: r.width,
                cells: r.cells,
                max_mass: r.max_mass,
                fraction: if mass > 0.0 { r.max_mass / mass } else { 0.0 },
                corner_i: r.corner[0],
                corner_j: r.corner[1],
                x0: r.corner_position[0],
                x1: r.corner_position[1],
            });
        }
        let smallest = smallest_capturing_scale(&snap.field, settings.eps_level, None)?;
        snapshots.push(SnapshotScan {
            t: snap.t,
            mass,
            capturing_width: smallest.as_ref().map(|r| r.width),
            capturing_mass: smallest.as_ref().map(|r| r.max_mass),
        });
    }
    Ok(ScanReport {
        report: "scan",
        name: name.to_string(),
        eps_level: settings.eps_level,
        scales: settings.scales.clone(),
        snapshots,
        rows,
    })
}

/// Direction from the Strichartz rate to concentration at the predicted scale.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RateToWindow {
    pub verdict: Verdict,
    /// Fit of `F ≈ F∞ + C (T* − t)^γ`.
    pub f_fit: RateFit,
    /// `β̂ = −γ / q` for the diagonal norm `F^{1/q}`.
    pub beta_hat: f64,
    /// β used for the prediction: the hypothesis when given, else `β̂`.
    pub beta: f64,
    pub predicted_window_exponent: f64,
    pub concentration: WindowConcentration,
}

/// Direction from window shrinkage to growth of `F′`.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct WindowToRate {
    pub verdict: Verdict,
    pub alpha_hat: f64,
    pub alpha_r_squared: f64,
    /// α used for the prediction: the hypothesis when given, else `α̂`.
    pub alpha: f64,
    /// Fit of the Strichartz density, which is `F′`.
    pub density_fit: RateFit,
    /// `density exponent ≤ bound` is the checked inequality.
    pub bound: f64,
    /// `|density exponent + 2α| ≤ tolerance`.
    pub exponent_equality: bool,
    pub local_estimate: LocalEstimateReport,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Bidirectional {
    pub verdict: Verdict,
    pub reference: Option<BlowupReference>,
    pub rate_to_window: Option<RateToWindow>,
    pub window_to_rate: Option<WindowToRate>,
}

fn window_points(an: &Analysis, t_star: f64, value: impl Fn(&Record) -> f64) -> Vec<(f64, f64)> {
    an.records().iter().map(|r| (t_star - r.t, value(r))).collect()
}

fn rate_to_window(an: &Analysis, s: &Settings) -> Result<RateToWindow> {
    let r = *an.reference().expect("reference present");
    let f_fit = fit_power_law_with_offset(&window_points(an, r.t_star, |rec| rec.f), F_GAMMA_RANGE)?;
    let q = strichartz_exponent(an.run().diagnostics.dim());
    let beta_hat = -f_fit.exponent / q;
    let beta = s.beta.unwrap_or(beta_hat);
    let exponent = (1.0 + beta) / 2.0;
    let concentration = window_concentration(
        an,
        s.eps_level,
        &WindowRule::Power {
            exponent,
            prefactor: 1.0,
        },
    )?;
    Ok(RateToWindow {
        verdict: concentration.verdict,
        f_fit,
        beta_hat,
        beta,
        predicted_window_exponent: exponent,
        concentration,
    })
}

fn window_to_rate(an: &Analysis, s: &Settings, est: &AlphaEstimate) -> Result<WindowToRate> {
    let r = *an.reference().expect("reference present");
    let density_fit = fit_power_law(&window_points(an, r.t_star, |rec| rec.density))?;
    let alpha = s.alpha.unwrap_or(est.fit.exponent);
    let bound = -2.0 * alpha + s.tolerance;
    let local_estimate = check_local_estimate(an, alpha, s.eps_level, s.tolerance)?;
    let verdict = Verdict::combine(&[
        Verdict::from_bool(density_fit.exponent <= bound),
        local_estimate.verdict,
    ]);
    Ok(WindowToRate {
        verdict,
        alpha_hat: est.fit.exponent,
        alpha_r_squared: est.fit.r_squared,
        alpha,
        exponent_equality: (density_fit.exponent + 2.0 * alpha).abs() <= s.tolerance,
        density_fit,
        bound,
        local_estimate,
    })
}

fn not_applicable() -> Bidirectional {
    Bidirectional {
        verdict: Verdict::NotApplicable,
        reference: None,
        rate_to_window: None,
        window_to_rate: None,
    }
}

/// Both implications on one run: the measured rate predicts a window that
/// must capture `eps_level`, and the measured window shrinkage bounds the
/// growth of `F′`. Runs without a blow-up time are not applicable.
pub fn experiment_bidirectional(run: &RunResult, s: &Settings) -> Result<Bidirectional> {
    let an = s.analysis(run)?;
    let Some(reference) = an.reference().copied() else {
        return Ok(not_applicable());
    };
    let alpha = estimate_alpha(&an, s.eps_level, None)?;
    let i = rate_to_window(&an, s)?;
    let ii = window_to_rate(&an, s, &alpha)?;
    Ok(Bidirectional {
        verdict: Verdict::combine(&[i.verdict, ii.verdict]),
        reference: Some(reference),
        rate_to_window: Some(i),
        window_to_rate: Some(ii),
    })
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct GapReport {
    pub verdict: Verdict,
    pub eta: f64,
    pub intervals: usize,
    pub fit: RateFit,
    /// `1 + qβ`, the exponent of `t_{n+1} − t_n` when `F ~ (T* − t)^{−qβ}`.
    pub expected: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ProjectedAlpha {
    pub verdict: Verdict,
    /// Exponent the projected estimate is compared with.
    pub reference_alpha: f64,
    pub estimate: Outcome<AlphaEstimate>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RatesReport {
    pub report: &'static str,
    pub name: String,
    pub verdict: Verdict,
    pub checks: Vec<CheckLine>,
    pub settings: Settings,
    pub reference: Option<BlowupReference>,
    pub alpha: Option<Outcome<AlphaEstimate>>,
    pub bidirectional: Option<Outcome<Bidirectional>>,
    pub gaps: Option<Outcome<GapReport>>,
    pub log_bound: Option<Outcome<LogBoundReport>>,
    pub projected_alpha: Option<ProjectedAlpha>,
    pub thickened: Option<Outcome<ThickReport>>,
    #[serde(skip)]
    pub partition: Option<EtaPartition>,
}

const STRICHARTZ_TO_WINDOW: (&str, &str) = ("strichartz_to_window", "L4bound2 => Mass2");
const WINDOW_TO_STRICHARTZ: (&str, &str) = ("window_to_strichartz", "Mass1Sup => L4boundSup");
const INTERVAL_GAPS: (&str, &str) = ("interval_gaps", "t-dependence");
const LOG_LOWER_BOUND: (&str, &str) = ("log_lower_bound", "C:log");
const PROJECTED_ALPHA: (&str, &str) = ("projected_alpha", "Mass1Sup under P_L(t)");
const THICKENED: (&str, &str) = ("thickened_concentration", "rate-function window");

fn gap_report(an: &Analysis, run: &RunResult, s: &Settings, beta: f64) -> Result<(GapReport, EtaPartition)> {
    let r = *an.reference().expect("reference present");
    let part = eta_partition(&run.diagnostics, s.eta)?;
    let fit = gap_fit(&part, r.t_star, r.window)?;
    let expected = 1.0 + strichartz_exponent(run.diagnostics.dim()) * beta;
    Ok((
        GapReport {
            verdict: Verdict::from_bool((fit.exponent - expected).abs() <= s.tolerance),
            eta: s.eta,
            intervals: part.complete_intervals(),
            fit,
            expected,
        },
        part,
    ))
}

fn fmt_opt(v: Option<f64>) -> String {
    v.map_or_else(|| "n/a".into(), |x| format!("{x:.4}"))
}

/// Fits the rates of a run and evaluates every relation as a check line.
pub fn rates_report(name: &str, run: &RunResult, s: &Settings) -> Result<RatesReport> {
    let an = s.analysis(run)?;
    let mut report = RatesReport {
        report: "rates",
        name: name.to_string(),
        verdict: Verdict::NotApplicable,
        checks: Vec::new(),
        settings: s.clone(),
        reference: an.reference().copied(),
        alpha: None,
        bidirectional: None,
        gaps: None,
        log_bound: None,
        projected_alpha: None,
        thickened: None,
        partition: None,
    };
    let mut named = vec![STRICHARTZ_TO_WINDOW, WINDOW_TO_STRICHARTZ, INTERVAL_GAPS, LOG_LOWER_BOUND];
    if s.projected_alpha {
        named.push(PROJECTED_ALPHA);
    }
    if s.rate.is_some() {
        named.push(THICKENED);
    }
    if an.reference().is_none() {
        report.checks = named
            .into_iter()
            .map(|(n, rel)| CheckLine::new(n, rel, Verdict::NotApplicable, "no blow-up detected".into()))
            .collect();
        return Ok(report);
    }

    let alpha = estimate_alpha(&an, s.eps_level, None);
    let bi: Outcome<Bidirectional> = match &alpha {
        Ok(_) => experiment_bidirectional(run, s).into(),
        Err(e) => Outcome::Error(e.to_string()),
    };
    report.alpha = Some(alpha.into());
    match bi.ok() {
        Some(b) => {
            let i = b.rate_to_window.as_ref().expect("blow-up run");
            let ii = b.window_to_rate.as_ref().expect("blow-up run");
            report.checks.push(CheckLine::new(
                STRICHARTZ_TO_WINDOW.0,
                STRICHARTZ_TO_WINDOW.1,
                i.verdict,
                format!(
                    "beta_hat = {:.4}, window exponent {:.4}, min captured {:.4} vs level {:.4}",
                    i.beta_hat, i.predicted_window_exponent, i.concentration.min_captured, s.eps_level
                ),
            ));
            report.checks.push(CheckLine::new(
                WINDOW_TO_STRICHARTZ.0,
                WINDOW_TO_STRICHARTZ.1,
                ii.verdict,
                format!(
                    "alpha_hat = {:.4}, F' exponent {:.4} <= {:.4}",
                    ii.alpha_hat, ii.density_fit.exponent, ii.bound
                ),
            ));
        }
        None => {
            let e = match &bi {
                Outcome::Error(e) => e.clone(),
                Outcome::Ok(_) => unreachable!(),
            };
            report.checks.push(CheckLine::failed(STRICHARTZ_TO_WINDOW.0, STRICHARTZ_TO_WINDOW.1, &e));
            report.checks.push(CheckLine::failed(WINDOW_TO_STRICHARTZ.0, WINDOW_TO_STRICHARTZ.1, &e));
        }
    }
    let beta = bi
        .ok()
        .and_then(|b| b.rate_to_window.as_ref())
        .map(|i| i.beta)
        .or(s.beta);
    report.bidirectional = Some(bi);

    let gaps: Outcome<GapReport> = match beta {
        Some(beta) => match gap_report(&an, run, s, beta) {
            Ok((g, part)) => {
                report.partition = Some(part);
                Outcome::Ok(g)
            }
            Err(e) => Outcome::Error(e.to_string()),
        },
        None => Outcome::Error("no rate exponent available".into()),
    };
    report.checks.push(match &gaps {
        Outcome::Ok(g) => CheckLine::new(
            INTERVAL_GAPS.0,
            INTERVAL_GAPS.1,
            g.verdict,
            format!("gap exponent {:.4}, expected {:.4}, {} intervals", g.fit.exponent, g.expected, g.intervals),
        ),
        Outcome::Error(e) => CheckLine::failed(INTERVAL_GAPS.0, INTERVAL_GAPS.1, e),
    });
    report.gaps = Some(gaps);

    let log: Outcome<LogBoundReport> = check_log_lower_bound(&an).into();
    report.checks.push(match &log {
        Outcome::Ok(l) => CheckLine::new(
            LOG_LOWER_BOUND.0,
            LOG_LOWER_BOUND.1,
            l.verdict,
            format!("c dominating {}, c fit {}", fmt_opt(l.c_dominating), fmt_opt(l.c_fit)),
        ),
        Outcome::Error(e) => CheckLine::failed(LOG_LOWER_BOUND.0, LOG_LOWER_BOUND.1, e),
    });
    report.log_bound = Some(log);

    if s.projected_alpha {
        let unprojected = report.alpha.as_ref().and_then(|a| a.ok()).map(|a| a.fit.exponent);
        let reference_alpha = s.alpha.or(unprojected).unwrap_or(1.0);
        let estimate: Outcome<AlphaEstimate> = KappaParams::new(
            s.eps_level,
            s.initial_mass.sqrt(),
            run.diagnostics.dim(),
            reference_alpha,
        )
        .and_then(|kp| estimate_alpha(&an, s.eps_level, Some(&kp)))
        .into();
        let (verdict, summary) = match &estimate {
            Outcome::Ok(e) => (
                Verdict::from_bool((e.fit.exponent - reference_alpha).abs() <= s.tolerance),
                format!(
                    "projected alpha {:.4} vs {reference_alpha:.4}, kappa {}",
                    e.fit.exponent,
                    fmt_opt(e.kappa)
                ),
            ),
            Outcome::Error(e) => (Verdict::Fail, e.clone()),
        };
        report
            .checks
            .push(CheckLine::new(PROJECTED_ALPHA.0, PROJECTED_ALPHA.1, verdict, summary));
        report.projected_alpha = Some(ProjectedAlpha {
            verdict,
            reference_alpha,
            estimate,
        });
    }

    if let Some(rate) = &s.rate {
        let thick: Outcome<ThickReport> = eta_partition(&run.diagnostics, s.eta)
            .and_then(|part| {
                thickened_concentration_fraction(
                    &an,
                    &part,
                    s.eps_level,
                    &WindowRule::Rate {
                        rate: rate.clone(),
                        prefactor: 1.0,
                    },
                    s.sigma_tilde,
                )
            })
            .into();
        report.checks.push(match &thick {
            Outcome::Ok(t) => CheckLine::new(
                THICKENED.0,
                THICKENED.1,
                Verdict::from_bool(t.min_fraction > 0.0),
                format!("min fraction {:.4}, median {:.4}", t.min_fraction, t.median_fraction),
            ),
            Outcome::Error(e) => CheckLine::failed(THICKENED.0, THICKENED.1, e),
        });
        report.thickened = Some(thick);
    }

    report.verdict = Verdict::combine(&report.checks.iter().map(|c| c.verdict).collect::<Vec<_>>());
    Ok(report)
}

#[derive(Debug, Clone, PartialEq, Serialize)]
struct WindowRow {
    t: f64,
    distance: f64,
    scale: f64,
    captured: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
struct PartitionRow {
    start: f64,
    end: f64,
    norm: f64,
}

impl RatesReport {
    /// `t,distance,scale,captured` for the window-shrinkage estimate.
    pub fn write_window_csv<W: std::io::Write>(&self, w: W) -> csv::Result<bool> {
        let Some(est) = self.alpha.as_ref().and_then(|a| a.ok()) else {
            return Ok(false);
        };
        let mut out = csv::Writer::from_writer(w);
        for s in &est.samples {
            out.serialize(WindowRow {
                t: s.t,
                distance: s.distance,
                scale: s.scale,
                captured: s.captured,
            })?;
        }
        out.flush()?;
        Ok(true)
    }

    /// `start,end,norm` of the η-intervals.
    pub fn write_partition_csv<W: std::io::Write>(&self, w: W) -> csv::Result<bool> {
        let Some(part) = &self.partition else {
            return Ok(false);
        };
        let mut out = csv::Writer::from_writer(w);
        for ((start, end), &norm) in part.intervals().into_iter().zip(&part.norms) {
            out.serialize(PartitionRow { start, end, norm })?;
        }
        out.flush()?;
        Ok(true)
    }
}
