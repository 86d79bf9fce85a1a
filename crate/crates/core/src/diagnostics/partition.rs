//! Decomposition of the time axis into intervals of equal diagonal
//! Strichartz norm.

use serde::Serialize;

use super::fit::{fit_power_law, RateFit};
use super::functionals::strichartz_exponent;
use super::series::TimeSeries;
use crate::{Error, Result};

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct EtaPartition {
    pub eta: f64,
    /// `t_0 < t_1 < … < t_N`; interval `k` is `[t_k, t_{k+1})`, the last one
    /// ends at `end`.
    pub breakpoints: Vec<f64>,
    pub end: f64,
    /// Strichartz norm of each interval, the last (partial) one included when
    /// it has positive length.
    pub norms: Vec<f64>,
    pub warning: Option<String>,
}

impl EtaPartition {
    /// `(start, end)` of every interval.
    pub fn intervals(&self) -> Vec<(f64, f64)> {
        let mut out: Vec<(f64, f64)> = self.breakpoints.windows(2).map(|w| (w[0], w[1])).collect();
        if let Some(&last) = self.breakpoints.last() {
            if self.end > last {
                out.push((last, self.end));
            }
        }
        out
    }

    /// Intervals whose norm equals `η`, i.e. all but a trailing partial one.
    pub fn complete_intervals(&self) -> usize {
        self.breakpoints.len() - 1
    }
}

/// Linear interpolation of the first time at which the `F` column reaches
/// `target`; `None` beyond the last record.
fn crossing(times: &[f64], f: &[f64], target: f64, from: usize) -> Option<(f64, usize)> {
    let i = (from..f.len()).find(|&i| f[i] >= target)?;
    if i == 0 {
        return Some((times[0], 0));
    }
    let (f0, f1) = (f[i - 1], f[i]);
    let t = if f1 > f0 {
        times[i - 1] + (target - f0) / (f1 - f0) * (times[i] - times[i - 1])
    } else {
        times[i]
    };
    Some((t, i))
}

/// `t_k = inf{t : F(t) ≥ k η^{2(d+2)/d}}`, with `F` interpolated linearly
/// between records. `F` must already be accumulated.
pub fn eta_partition(ts: &TimeSeries, eta: f64) -> Result<EtaPartition> {
    if !(eta.is_finite() && eta > 0.0) {
        return Err(Error::InvalidParameter(format!("eta must be positive, got {eta}")));
    }
    if ts.len() < 2 {
        return Err(Error::InsufficientWindow("partition needs at least two records".into()));
    }
    let q = strichartz_exponent(ts.dim());
    let level = eta.powf(q);
    let times = ts.times();
    let f: Vec<f64> = ts.records().iter().map(|r| r.f).collect();
    let end = *times.last().unwrap();
    let f_end = *f.last().unwrap();
    let norm = |df: f64| df.max(0.0).powf(1.0 / q);
    if level > f_end {
        return Ok(EtaPartition {
            eta,
            breakpoints: vec![times[0]],
            end,
            norms: vec![norm(f_end - f[0])],
            warning: Some(format!(
                "eta^{q} = {level} exceeds F(end) = {f_end}; single interval"
            )),
        });
    }
    let mut breakpoints = vec![times[0]];
    let mut values = vec![f[0]];
    let mut from = 0;
    let mut k = 1.0;
    while let Some((t, i)) = crossing(&times, &f, f[0] + k * level, from) {
        if t > *breakpoints.last().unwrap() {
            breakpoints.push(t);
            values.push(f[0] + k * level);
        }
        from = i;
        k += 1.0;
    }
    let mut norms: Vec<f64> = values.windows(2).map(|w| norm(w[1] - w[0])).collect();
    if end > *breakpoints.last().unwrap() {
        norms.push(norm(f_end - values.last().unwrap()));
    }
    Ok(EtaPartition {
        eta,
        breakpoints,
        end,
        norms,
        warning: None,
    })
}

/// Fits `t_{k+1} − t_k` against `T* − t_k` over complete intervals starting
/// inside `window`.
pub fn gap_fit(part: &EtaPartition, t_star: f64, window: [f64; 2]) -> Result<RateFit> {
    let samples: Vec<(f64, f64)> = part
        .breakpoints
        .windows(2)
        .filter(|w| w[0] >= window[0] && w[0] <= window[1] && w[0] < t_star)
        .map(|w| (t_star - w[0], w[1] - w[0]))
        .collect();
    fit_power_law(&samples)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::diagnostics::{accumulate_f, Record};

    fn series(dim: usize, density: impl Fn(f64) -> f64, times: &[f64]) -> TimeSeries {
        let records = times
            .iter()
            .map(|&t| Record::new(t, 1.0, density(t), 1.0, 0.0))
            .collect();
        let mut ts = TimeSeries::from_records(dim, records).unwrap();
        accumulate_f(&mut ts);
        ts
    }

    #[test]
    fn constant_density_gives_uniform_gaps() {
        let times: Vec<f64> = (0..=1000).map(|i| i as f64 * 1e-3).collect();
        let ts = series(1, |_| 3.0, &times);
        let p = eta_partition(&ts, 0.5).unwrap();
        let gap = 0.5f64.powi(6) / 3.0;
        assert!(p.warning.is_none());
        for w in p.breakpoints.windows(2) {
            assert!((w[1] - w[0] - gap).abs() < 1e-12);
        }
        for &nrm in &p.norms[..p.complete_intervals()] {
            assert!((nrm - 0.5).abs() < 1e-12);
        }
        assert!(*p.norms.last().unwrap() <= 0.5 + 1e-12);
    }

    #[test]
    fn zero_density_is_one_interval() {
        let times: Vec<f64> = (0..10).map(|i| i as f64).collect();
        let ts = series(2, |_| 0.0, &times);
        let p = eta_partition(&ts, 0.1).unwrap();
        assert_eq!(p.breakpoints, vec![0.0]);
        assert_eq!(p.intervals(), vec![(0.0, 9.0)]);
        assert!(p.warning.is_some());
    }

    #[test]
    fn norms_recover_total() {
        let times: Vec<f64> = (0..500).map(|i| i as f64 * 0.0019).collect();
        let ts = series(1, |t| 1.0 / (1.0 - t).powi(2), &times);
        let p = eta_partition(&ts, 0.5).unwrap();
        let total: f64 = p.norms.iter().map(|n| n.powi(6)).sum();
        let f_end = ts.records().last().unwrap().f;
        assert!((total - f_end).abs() < 1e-10 * f_end.max(1.0));
    }
}
