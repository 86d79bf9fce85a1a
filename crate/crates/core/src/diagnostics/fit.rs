//! Least-squares exponent fits.

use serde::Serialize;

use crate::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct LineFit {
    pub slope: f64,
    pub intercept: f64,
    pub var_slope: f64,
    pub var_intercept: f64,
    pub cov: f64,
    pub r_squared: f64,
}

/// Ordinary least squares `y ≈ intercept + slope·x` with parameter
/// (co)variances estimated from the residuals.
pub fn linear_fit(xs: &[f64], ys: &[f64]) -> Result<LineFit> {
    let n = xs.len();
    if n != ys.len() || n < 2 {
        return Err(Error::InvalidParameter(format!(
            "linear fit needs at least two paired samples, got {} and {}",
            xs.len(),
            ys.len()
        )));
    }
    let nf = n as f64;
    let mx = xs.iter().sum::<f64>() / nf;
    let my = ys.iter().sum::<f64>() / nf;
    let sxx: f64 = xs.iter().map(|x| (x - mx) * (x - mx)).sum();
    let sxy: f64 = xs.iter().zip(ys).map(|(x, y)| (x - mx) * (y - my)).sum();
    let syy: f64 = ys.iter().map(|y| (y - my) * (y - my)).sum();
    if sxx == 0.0 {
        return Err(Error::Degenerate("all abscissae coincide".into()));
    }
    let slope = sxy / sxx;
    let intercept = my - slope * mx;
    let rss: f64 = xs
        .iter()
        .zip(ys)
        .map(|(x, y)| {
            let r = y - intercept - slope * x;
            r * r
        })
        .sum();
    let s2 = if n > 2 { rss / (nf - 2.0) } else { 0.0 };
    let var_slope = s2 / sxx;
    let var_intercept = s2 * (1.0 / nf + mx * mx / sxx);
    let cov = -mx * s2 / sxx;
    let r_squared = if syy == 0.0 { 1.0 } else { 1.0 - rss / syy };
    Ok(LineFit {
        slope,
        intercept,
        var_slope,
        var_intercept,
        cov,
        r_squared,
    })
}

/// Fitted law `y ≈ e^{intercept} s^{exponent} (+ offset)` over `s ∈ window`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct RateFit {
    pub exponent: f64,
    /// Natural log of the prefactor (of its magnitude for offset fits).
    pub intercept: f64,
    /// Additive constant of an offset fit; `None` for a plain power law.
    pub offset: Option<f64>,
    pub window: [f64; 2],
    pub r_squared: f64,
    pub samples: usize,
}

fn check_samples(samples: &[(f64, f64)]) -> Result<()> {
    if samples.len() < 8 {
        return Err(Error::InsufficientWindow(format!(
            "{} samples, need at least 8",
            samples.len()
        )));
    }
    if let Some(&(s, y)) = samples
        .iter()
        .find(|&&(s, y)| !(s > 0.0 && y > 0.0 && s.is_finite() && y.is_finite()))
    {
        return Err(Error::InvalidParameter(format!(
            "power-law samples must be positive and finite, found ({s}, {y})"
        )));
    }
    Ok(())
}

fn window(samples: &[(f64, f64)]) -> [f64; 2] {
    let lo = samples.iter().map(|s| s.0).fold(f64::INFINITY, f64::min);
    let hi = samples.iter().map(|s| s.0).fold(f64::NEG_INFINITY, f64::max);
    [lo, hi]
}

/// Least squares on `(ln s, ln y)`.
pub fn fit_power_law(samples: &[(f64, f64)]) -> Result<RateFit> {
    check_samples(samples)?;
    let xs: Vec<f64> = samples.iter().map(|s| s.0.ln()).collect();
    let ys: Vec<f64> = samples.iter().map(|s| s.1.ln()).collect();
    let line = linear_fit(&xs, &ys)?;
    Ok(RateFit {
        exponent: line.slope,
        intercept: line.intercept,
        offset: None,
        window: window(samples),
        r_squared: line.r_squared,
        samples: samples.len(),
    })
}

/// Weighted residual of the best `(A, C)` in `y ≈ A s^γ + C` for fixed `γ`,
/// with relative weights `1/y²`.
fn offset_residual(samples: &[(f64, f64)], gamma: f64) -> (f64, f64, f64) {
    let (mut saa, mut sac, mut scc, mut say, mut scy) = (0.0, 0.0, 0.0, 0.0, 0.0);
    for &(s, y) in samples {
        let w = 1.0 / (y * y);
        let a = s.powf(gamma);
        saa += w * a * a;
        sac += w * a;
        scc += w;
        say += w * a * y;
        scy += w * y;
    }
    let det = saa * scc - sac * sac;
    if det.abs() <= 1e-300 {
        return (f64::INFINITY, 0.0, 0.0);
    }
    let amp = (say * scc - sac * scy) / det;
    let c = (saa * scy - sac * say) / det;
    let rss: f64 = samples
        .iter()
        .map(|&(s, y)| {
            let r = (amp * s.powf(gamma) + c - y) / y;
            r * r
        })
        .sum();
    (rss, amp, c)
}

/// Fits `y ≈ A s^γ + C` by a grid search over `γ ∈ [γ_lo, γ_hi]` followed by
/// golden-section refinement; `(A, C)` are linear least squares with relative
/// weights. `R²` compares the weighted residual to that of a constant.
pub fn fit_power_law_with_offset(samples: &[(f64, f64)], gamma_range: [f64; 2]) -> Result<RateFit> {
    check_samples(samples)?;
    let [g_lo, g_hi] = gamma_range;
    if !(g_lo < g_hi) {
        return Err(Error::InvalidParameter("empty exponent range".into()));
    }
    let steps = 400;
    let h = (g_hi - g_lo) / steps as f64;
    let mut best = (f64::INFINITY, g_lo);
    for i in 0..=steps {
        let g = g_lo + i as f64 * h;
        if g == 0.0 {
            continue;
        }
        let (rss, _, _) = offset_residual(samples, g);
        if rss < best.0 {
            best = (rss, g);
        }
    }
    let (mut a, mut b) = ((best.1 - h).max(g_lo), (best.1 + h).min(g_hi));
    let phi = 0.5 * (5f64.sqrt() - 1.0);
    let mut c = b - phi * (b - a);
    let mut d = a + phi * (b - a);
    let f = |g: f64| offset_residual(samples, g).0;
    let (mut fc, mut fd) = (f(c), f(d));
    for _ in 0..200 {
        if (b - a).abs() < 1e-13 {
            break;
        }
        if fc < fd {
            b = d;
            d = c;
            fd = fc;
            c = b - phi * (b - a);
            fc = f(c);
        } else {
            a = c;
            c = d;
            fc = fd;
            d = a + phi * (b - a);
            fd = f(d);
        }
    }
    let gamma = 0.5 * (a + b);
    let (rss, amp, offset) = offset_residual(samples, gamma);
    let w_mean = {
        let (sw, swy) = samples
            .iter()
            .fold((0.0, 0.0), |(sw, swy), &(_, y)| (sw + 1.0 / (y * y), swy + 1.0 / y));
        swy / sw
    };
    let tss: f64 = samples
        .iter()
        .map(|&(_, y)| ((y - w_mean) / y).powi(2))
        .sum();
    Ok(RateFit {
        exponent: gamma,
        intercept: amp.abs().ln(),
        offset: Some(offset),
        window: window(samples),
        r_squared: if tss == 0.0 { 1.0 } else { 1.0 - rss / tss },
        samples: samples.len(),
    })
}

/// Least-squares slope of `y ≈ c·x` through the origin.
pub fn fit_through_origin(xs: &[f64], ys: &[f64]) -> Result<f64> {
    let sxx: f64 = xs.iter().map(|x| x * x).sum();
    if xs.len() != ys.len() || sxx == 0.0 {
        return Err(Error::Degenerate("no usable abscissae".into()));
    }
    Ok(xs.iter().zip(ys).map(|(x, y)| x * y).sum::<f64>() / sxx)
}
