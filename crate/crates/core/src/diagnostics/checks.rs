//! Exponent estimates and inequality checks on a run near its blow-up time.
//!
//! Checks compare fitted exponents against the predicted ones with a fixed
//! tolerance and report the measured constants; the constants themselves are
//! never judged.

use serde::Serialize;

use super::fit::{fit_power_law, fit_power_law_with_offset, fit_through_origin, linear_fit, RateFit};
use super::functionals::strichartz_exponent;
use super::kappa::KappaParams;
use super::partition::EtaPartition;
use super::rates::{predicted_window, RateFunction};
use super::scan::{concentration_scan, smallest_capturing_scale};
use super::series::Record;
use crate::integrator::{RunResult, Snapshot};
use crate::spectral::{FreqRegion, Grid};
use crate::{Error, Result};

/// Default tolerance on fitted exponents.
pub const EXPONENT_TOLERANCE: f64 = 0.1;

/// Minimum snapshots per interval for the thickened-time fractions.
pub const MIN_SNAPSHOTS_PER_INTERVAL: usize = 8;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "SCREAMING_SNAKE_CASE")]
pub enum Verdict {
    Pass,
    Fail,
    NotApplicable,
}

impl Verdict {
    pub fn from_bool(ok: bool) -> Self {
        if ok {
            Verdict::Pass
        } else {
            Verdict::Fail
        }
    }

    /// `Fail` dominates, then `Pass`; all-`NotApplicable` stays so.
    pub fn combine(items: &[Verdict]) -> Self {
        if items.contains(&Verdict::Fail) {
            Verdict::Fail
        } else if items.contains(&Verdict::Pass) {
            Verdict::Pass
        } else {
            Verdict::NotApplicable
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum TstarSource {
    Seeded,
    Estimated,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct BlowupReference {
    pub t_star: f64,
    pub source: TstarSource,
    /// Analysis window in absolute time, already clipped to trusted times.
    pub window: [f64; 2],
}

/// A run together with the blow-up time used to analyse it.
#[derive(Debug, Clone, Copy)]
pub struct Analysis<'a> {
    run: &'a RunResult,
    reference: Option<BlowupReference>,
}

fn clip_window(run: &RunResult, t_star: f64, fraction: [f64; 2]) -> Result<[f64; 2]> {
    if !(fraction[0] < fraction[1] && fraction[0] >= 0.0 && fraction[1] < 1.0) {
        return Err(Error::InvalidParameter(format!(
            "window fractions {fraction:?} must satisfy 0 <= lo < hi < 1"
        )));
    }
    let lo = fraction[0] * t_star;
    let hi = (fraction[1] * t_star).min(run.trusted_until);
    if !(hi > lo) {
        return Err(Error::InsufficientWindow(format!(
            "trusted data ends at t = {} before the analysis window starts at {lo}",
            run.trusted_until
        )));
    }
    Ok([lo, hi])
}

impl<'a> Analysis<'a> {
    /// Uses a known blow-up time, as for exact families.
    pub fn seeded(run: &'a RunResult, t_star: f64, fraction: [f64; 2]) -> Result<Self> {
        if !(t_star.is_finite() && t_star > 0.0) {
            return Err(Error::InvalidParameter(format!("T* must be positive, got {t_star}")));
        }
        let window = clip_window(run, t_star, fraction)?;
        Ok(Self {
            run,
            reference: Some(BlowupReference {
                t_star,
                source: TstarSource::Seeded,
                window,
            }),
        })
    }

    /// Uses the run's fitted blow-up time; without detected blow-up there is
    /// no reference and the checks are not applicable.
    pub fn estimated(run: &'a RunResult, fraction: [f64; 2]) -> Result<Self> {
        let reference = match (run.termination.is_blowup(), run.tstar) {
            (true, Some(est)) => Some(BlowupReference {
                t_star: est.value,
                source: TstarSource::Estimated,
                window: clip_window(run, est.value, fraction)?,
            }),
            _ => None,
        };
        Ok(Self { run, reference })
    }

    pub fn run(&self) -> &RunResult {
        self.run
    }

    pub fn reference(&self) -> Option<&BlowupReference> {
        self.reference.as_ref()
    }

    fn require(&self) -> Result<&BlowupReference> {
        self.reference
            .as_ref()
            .ok_or_else(|| Error::NoBlowupTrend("no blow-up time available for this run".into()))
    }

    fn inside(&self, t: f64) -> bool {
        self.reference
            .map_or(false, |r| t >= r.window[0] && t <= r.window[1] && t < r.t_star)
    }

    /// Records inside the analysis window.
    pub fn records(&self) -> Vec<&'a Record> {
        self.run
            .diagnostics
            .records()
            .iter()
            .filter(|r| self.inside(r.t))
            .collect()
    }

    /// Snapshots inside the analysis window.
    pub fn snapshots(&self) -> Vec<&'a Snapshot> {
        self.run.snapshots.iter().filter(|s| self.inside(s.t)).collect()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct AlphaSample {
    pub t: f64,
    /// `T* − t`.
    pub distance: f64,
    /// Smallest capturing cube side.
    pub scale: f64,
    pub captured: f64,
    /// Projection radius `L(t)`, when projecting.
    pub cutoff: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct AlphaEstimate {
    pub fit: RateFit,
    pub eps_level: f64,
    pub projected: bool,
    pub kappa: Option<f64>,
    pub t_star: f64,
    pub t_star_source: TstarSource,
    pub samples: Vec<AlphaSample>,
}

/// Largest `|ξ|` present on the grid.
fn max_frequency(grid: &Grid) -> f64 {
    grid.nyquist() * (grid.dim() as f64).sqrt()
}

/// Fits the smallest cube side capturing `eps_level` against `T* − t` over the
/// window snapshots. With `kp`, the field is first restricted to
/// `|ξ| ≤ L(t)`; a ball containing every grid frequency is skipped, so that
/// case reproduces the unprojected estimate exactly.
pub fn estimate_alpha(an: &Analysis, eps_level: f64, kp: Option<&KappaParams>) -> Result<AlphaEstimate> {
    let r = *an.require()?;
    let snaps = an.snapshots();
    let mut samples = Vec::with_capacity(snaps.len());
    let mut missing = Vec::new();
    for snap in &snaps {
        let cutoff = kp.map(|k| k.cutoff(snap.t, r.t_star)).transpose()?;
        let region = match cutoff {
            Some(l) if l < max_frequency(snap.field.grid()) => Some(FreqRegion::ball([0.0; 2], l)?),
            _ => None,
        };
        match smallest_capturing_scale(&snap.field, eps_level, region.as_ref())? {
            Some(scan) => samples.push(AlphaSample {
                t: snap.t,
                distance: r.t_star - snap.t,
                scale: scan.width,
                captured: scan.max_mass,
                cutoff,
            }),
            None => missing.push(snap.t),
        }
    }
    if !missing.is_empty() {
        return Err(Error::ConcentrationAbsent(format!(
            "level {eps_level} is not captured even by the whole box at {} of {} snapshots (first at t = {})",
            missing.len(),
            snaps.len(),
            missing[0]
        )));
    }
    let points: Vec<(f64, f64)> = samples.iter().map(|s| (s.distance, s.scale)).collect();
    let fit = fit_power_law(&points)?;
    Ok(AlphaEstimate {
        fit,
        eps_level,
        projected: kp.is_some(),
        kappa: kp.map(|k| k.kappa()),
        t_star: r.t_star,
        t_star_source: r.source,
        samples,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize)]
#[serde(tag = "form", rename_all = "lowercase")]
pub enum IntegratedForm {
    /// `F(t) ≈ A (T* − t)^γ + C` compared with `γ ≤ 1 − 2α`.
    Power { fit: RateFit, predicted: f64, verdict: Verdict },
    /// `F(t) ≈ c |ln(T* − t)| + C` with `c > 0`.
    Log { coefficient: f64, r_squared: f64, verdict: Verdict },
    /// `α < 1/2`: no integrated statement.
    None { verdict: Verdict },
}

impl IntegratedForm {
    fn verdict(&self) -> Verdict {
        match self {
            IntegratedForm::Power { verdict, .. }
            | IntegratedForm::Log { verdict, .. }
            | IntegratedForm::None { verdict } => *verdict,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct LocalEstimateReport {
    pub check: &'static str,
    pub verdict: Verdict,
    pub alpha: f64,
    pub eps_level: f64,
    pub tolerance: f64,
    pub t_star: f64,
    pub t_star_source: TstarSource,
    /// Fit of centred differences of `F` against `T* − t`.
    pub derivative_fit: RateFit,
    pub predicted_exponent: f64,
    /// Measured constant `e^{intercept}` of the derivative law.
    pub derivative_constant: f64,
    pub integrated: IntegratedForm,
}

/// Compares the growth of `F′` with `(T* − t)^{−2α}`, and of `F` with its
/// integrated form.
pub fn check_local_estimate(
    an: &Analysis,
    alpha: f64,
    eps_level: f64,
    tolerance: f64,
) -> Result<LocalEstimateReport> {
    if !(alpha.is_finite() && alpha > 0.0) {
        return Err(Error::InvalidParameter(format!("alpha must be positive, got {alpha}")));
    }
    let r = *an.require()?;
    let all = an.run.diagnostics.records();
    let mut deriv = Vec::new();
    let mut integral = Vec::new();
    for i in 1..all.len().saturating_sub(1) {
        let rec = &all[i];
        if !an.inside(rec.t) || all[i + 1].t > an.run.trusted_until {
            continue;
        }
        let df = (all[i + 1].f - all[i - 1].f) / (all[i + 1].t - all[i - 1].t);
        deriv.push((r.t_star - rec.t, df));
        integral.push((r.t_star - rec.t, rec.f));
    }
    if deriv.len() < 8 {
        return Err(Error::InsufficientWindow(format!(
            "{} trusted records in the window, need at least 8",
            deriv.len()
        )));
    }
    let derivative_fit = fit_power_law(&deriv)?;
    let predicted_exponent = -2.0 * alpha;
    let d_verdict = Verdict::from_bool(derivative_fit.exponent <= predicted_exponent + tolerance);
    let integrated = if (alpha - 0.5).abs() < 1e-12 {
        let xs: Vec<f64> = integral.iter().map(|p| p.0.ln().abs()).collect();
        let ys: Vec<f64> = integral.iter().map(|p| p.1).collect();
        let line = linear_fit(&xs, &ys)?;
        IntegratedForm::Log {
            coefficient: line.slope,
            r_squared: line.r_squared,
            verdict: Verdict::from_bool(line.slope > 0.0),
        }
    } else if alpha > 0.5 {
        let predicted = 1.0 - 2.0 * alpha;
        let positive: Vec<(f64, f64)> = integral.iter().copied().filter(|p| p.1 > 0.0).collect();
        let fit = fit_power_law_with_offset(&positive, [predicted - 3.0, 2.0])?;
        IntegratedForm::Power {
            verdict: Verdict::from_bool(fit.exponent <= predicted + tolerance),
            fit,
            predicted,
        }
    } else {
        IntegratedForm::None {
            verdict: Verdict::NotApplicable,
        }
    };
    Ok(LocalEstimateReport {
        check: "local_estimate",
        verdict: Verdict::combine(&[d_verdict, integrated.verdict()]),
        alpha,
        eps_level,
        tolerance,
        t_star: r.t_star,
        t_star_source: r.source,
        derivative_constant: derivative_fit.intercept.exp(),
        derivative_fit,
        predicted_exponent,
        integrated,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct LogBoundReport {
    pub check: &'static str,
    pub verdict: Verdict,
    pub t_star: Option<f64>,
    pub t_star_source: Option<TstarSource>,
    pub window: Option<[f64; 2]>,
    pub samples: usize,
    /// Least-squares `c` in `‖u‖ ≈ c |ln(T* − t)|`.
    pub c_fit: Option<f64>,
    /// Largest `c` dominated at every sample.
    pub c_dominating: Option<f64>,
    /// Log-log slope of `‖u‖ / |ln(T* − t)|` against `|ln(T* − t)|`,
    /// reported only.
    pub ratio_trend: Option<f64>,
}

/// Checks that the diagonal Strichartz norm `F^{d/(2(d+2))}` dominates
/// `c |ln(T* − t)|` at every window record for some `c > 0`.
pub fn check_log_lower_bound(an: &Analysis) -> Result<LogBoundReport> {
    let Some(r) = an.reference().copied() else {
        return Ok(LogBoundReport {
            check: "log_lower_bound",
            verdict: Verdict::NotApplicable,
            t_star: None,
            t_star_source: None,
            window: None,
            samples: 0,
            c_fit: None,
            c_dominating: None,
            ratio_trend: None,
        });
    };
    let q = strichartz_exponent(an.run.diagnostics.dim());
    let pts: Vec<(f64, f64)> = an
        .records()
        .iter()
        .map(|rec| ((r.t_star - rec.t).ln().abs(), rec.f.max(0.0).powf(1.0 / q)))
        .filter(|p| p.0 > 0.0)
        .collect();
    if pts.len() < 8 {
        return Err(Error::InsufficientWindow(format!(
            "{} usable records, need at least 8",
            pts.len()
        )));
    }
    let xs: Vec<f64> = pts.iter().map(|p| p.0).collect();
    let ys: Vec<f64> = pts.iter().map(|p| p.1).collect();
    let c_fit = fit_through_origin(&xs, &ys)?;
    let c_dom = pts.iter().map(|p| p.1 / p.0).fold(f64::INFINITY, f64::min);
    let trend = if c_dom > 0.0 {
        let lx: Vec<f64> = xs.iter().map(|x| x.ln()).collect();
        let lr: Vec<f64> = pts.iter().map(|p| (p.1 / p.0).ln()).collect();
        Some(linear_fit(&lx, &lr)?.slope)
    } else {
        None
    };
    let ok = c_dom > 0.0;
    Ok(LogBoundReport {
        check: "log_lower_bound",
        verdict: Verdict::from_bool(ok),
        t_star: Some(r.t_star),
        t_star_source: Some(r.source),
        window: Some(r.window),
        samples: pts.len(),
        c_fit: Some(c_fit),
        c_dominating: Some(c_dom),
        ratio_trend: trend,
    })
}

/// Cube side as a function of `T* − t`.
#[derive(Debug, Clone, PartialEq, Serialize)]
#[serde(tag = "rule", rename_all = "lowercase")]
pub enum WindowRule {
    /// `prefactor · (T* − t)^exponent`.
    Power { exponent: f64, prefactor: f64 },
    /// `prefactor ·` the window predicted by a rate function.
    Rate { rate: RateFunction, prefactor: f64 },
}

impl WindowRule {
    pub fn scale(&self, distance: f64) -> Result<f64> {
        match self {
            WindowRule::Power { exponent, prefactor } => Ok(prefactor * distance.powf(*exponent)),
            WindowRule::Rate { rate, prefactor } => Ok(prefactor * predicted_window(rate, distance)?),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct WindowSample {
    pub t: f64,
    pub scale: f64,
    pub captured: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct WindowConcentration {
    pub verdict: Verdict,
    pub eps_level: f64,
    pub rule: WindowRule,
    pub min_captured: f64,
    pub samples: Vec<WindowSample>,
}

/// Mass captured at the rule's scale at every window snapshot; `Pass` when
/// each reaches `eps_level`. Scales beyond the box are clipped to the box.
pub fn window_concentration(an: &Analysis, eps_level: f64, rule: &WindowRule) -> Result<WindowConcentration> {
    let r = *an.require()?;
    let snaps = an.snapshots();
    if snaps.is_empty() {
        return Err(Error::InsufficientWindow("no snapshots in the analysis window".into()));
    }
    let mut samples = Vec::with_capacity(snaps.len());
    for snap in snaps {
        let scale = rule.scale(r.t_star - snap.t)?.min(snap.field.grid().side());
        let scan = concentration_scan(&snap.field, scale, None)?;
        samples.push(WindowSample {
            t: snap.t,
            scale,
            captured: scan.max_mass,
        });
    }
    let min_captured = samples.iter().map(|s| s.captured).fold(f64::INFINITY, f64::min);
    Ok(WindowConcentration {
        verdict: Verdict::from_bool(min_captured >= eps_level),
        eps_level,
        rule: rule.clone(),
        min_captured,
        samples,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct IntervalFraction {
    pub start: f64,
    pub end: f64,
    pub snapshots: usize,
    pub captured: usize,
    pub fraction: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ThickReport {
    pub check: &'static str,
    pub eps_level: f64,
    pub sigma_tilde: f64,
    pub threshold: f64,
    pub rule: WindowRule,
    pub intervals: Vec<IntervalFraction>,
    pub min_fraction: f64,
    pub median_fraction: f64,
}

/// For every partition interval inside the analysis window, the fraction of
/// snapshots whose scan at the rule's scale captures `(1 − σ̃) ε_level`.
pub fn thickened_concentration_fraction(
    an: &Analysis,
    part: &EtaPartition,
    eps_level: f64,
    rule: &WindowRule,
    sigma_tilde: f64,
) -> Result<ThickReport> {
    if !(0.0..=1.0).contains(&sigma_tilde) {
        return Err(Error::InvalidParameter(format!("sigma must lie in [0, 1], got {sigma_tilde}")));
    }
    let r = *an.require()?;
    let threshold = (1.0 - sigma_tilde) * eps_level;
    let snaps = an.snapshots();
    let mut intervals = Vec::new();
    for (start, end) in part.intervals() {
        if start < r.window[0] || end > r.window[1] {
            continue;
        }
        let inside: Vec<&&Snapshot> = snaps.iter().filter(|s| s.t >= start && s.t < end).collect();
        if inside.len() < MIN_SNAPSHOTS_PER_INTERVAL {
            return Err(Error::InsufficientSampling(format!(
                "interval [{start}, {end}) holds {} snapshots, need {MIN_SNAPSHOTS_PER_INTERVAL}",
                inside.len()
            )));
        }
        let mut captured = 0;
        for snap in &inside {
            let scale = rule.scale(r.t_star - snap.t)?.min(snap.field.grid().side());
            if concentration_scan(&snap.field, scale, None)?.max_mass >= threshold {
                captured += 1;
            }
        }
        intervals.push(IntervalFraction {
            start,
            end,
            snapshots: inside.len(),
            captured,
            fraction: captured as f64 / inside.len() as f64,
        });
    }
    if intervals.is_empty() {
        return Err(Error::InsufficientWindow(
            "no partition interval lies inside the analysis window".into(),
        ));
    }
    let mut fr: Vec<f64> = intervals.iter().map(|i| i.fraction).collect();
    fr.sort_by(f64::total_cmp);
    let median = if fr.len() % 2 == 1 {
        fr[fr.len() / 2]
    } else {
        0.5 * (fr[fr.len() / 2 - 1] + fr[fr.len() / 2])
    };
    Ok(ThickReport {
        check: "thickened_concentration",
        eps_level,
        sigma_tilde,
        threshold,
        rule: rule.clone(),
        min_fraction: fr[0],
        median_fraction: median,
        intervals,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::diagnostics::TimeSeries;
    use crate::integrator::Termination;

    fn synthetic(f: impl Fn(f64) -> f64) -> RunResult {
        let records: Vec<Record> = (0..400)
            .map(|i| {
                let t = 0.4 + 0.58 * i as f64 / 399.0;
                let mut r = Record::new(t, 1.0, 0.0, 1.0, 0.0);
                r.f = f(t);
                r
            })
            .collect();
        RunResult {
            snapshots: Vec::new(),
            diagnostics: TimeSeries::from_records(1, records).unwrap(),
            termination: Termination::TimeLimit,
            tstar: None,
            trusted_until: 1.0,
            steps: 0,
        }
    }

    #[test]
    fn exact_law_passes_local_estimate() {
        let run = synthetic(|t| 4.08 * (1.0 / (1.0 - t) - 1.0));
        let an = Analysis::seeded(&run, 1.0, [0.5, 0.95]).unwrap();
        let rep = check_local_estimate(&an, 1.0, 1.0, EXPONENT_TOLERANCE).unwrap();
        assert_eq!(rep.verdict, Verdict::Pass);
        assert!((rep.derivative_fit.exponent + 2.0).abs() < 0.01);
        assert!((rep.derivative_constant - 4.08).abs() < 0.05);
        let half = check_local_estimate(&an, 0.5, 1.0, EXPONENT_TOLERANCE).unwrap();
        assert_eq!(half.verdict, Verdict::Pass);
        assert!(matches!(half.integrated, IntegratedForm::Log { verdict: Verdict::Pass, .. }));
    }

    #[test]
    fn constant_density_fails_local_estimate() {
        let run = synthetic(|t| 2.0 * t);
        let an = Analysis::seeded(&run, 1.0, [0.5, 0.95]).unwrap();
        let rep = check_local_estimate(&an, 1.0, 1.0, EXPONENT_TOLERANCE).unwrap();
        assert_eq!(rep.verdict, Verdict::Fail);
        assert!(rep.derivative_fit.exponent.abs() < 1e-6);
    }

    #[test]
    fn log_bound_equality_case() {
        let run = synthetic(|t| (1.0 - t).ln().abs().powi(6));
        let an = Analysis::seeded(&run, 1.0, [0.5, 0.95]).unwrap();
        let rep = check_log_lower_bound(&an).unwrap();
        assert_eq!(rep.verdict, Verdict::Pass);
        assert!((rep.c_fit.unwrap() - 1.0).abs() < 1e-9);
        let no_blowup = Analysis::estimated(&run, [0.5, 0.95]).unwrap();
        assert_eq!(
            check_log_lower_bound(&no_blowup).unwrap().verdict,
            Verdict::NotApplicable
        );
        let vanishing = synthetic(|_| 0.0);
        let an = Analysis::seeded(&vanishing, 1.0, [0.5, 0.95]).unwrap();
        assert_eq!(check_log_lower_bound(&an).unwrap().verdict, Verdict::Fail);
    }

    #[test]
    fn too_few_records() {
        let mut run = synthetic(|t| t);
        run.trusted_until = 0.505;
        let an = Analysis::seeded(&run, 1.0, [0.5, 0.95]).unwrap();
        assert!(matches!(
            check_local_estimate(&an, 1.0, 1.0, 0.1),
            Err(Error::InsufficientWindow(_))
        ));
    }

    #[test]
    fn verdict_serialization() {
        assert_eq!(serde_json::to_string(&Verdict::NotApplicable).unwrap(), "\"NOT_APPLICABLE\"");
        assert_eq!(Verdict::combine(&[Verdict::Pass, Verdict::NotApplicable]), Verdict::Pass);
        assert_eq!(Verdict::combine(&[Verdict::Pass, Verdict::Fail]), Verdict::Fail);
    }
}
