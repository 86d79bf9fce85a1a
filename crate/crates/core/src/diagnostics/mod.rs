//! Blow-up functionals, concentration scans, rate functions, exponent fits
//! and inequality checks.

pub mod checks;
pub mod fit;
pub mod functionals;
mod kappa;
mod partition;
mod rates;
pub mod scan;
mod series;

pub use checks::{
    check_local_estimate, check_log_lower_bound, estimate_alpha, thickened_concentration_fraction,
    window_concentration, Analysis, TstarSource, Verdict, WindowRule,
};
pub use fit::{fit_power_law, fit_power_law_with_offset, RateFit};
pub use functionals::{mass, spectral_tail_fraction, strichartz_density, strichartz_exponent};
pub use kappa::KappaParams;
pub use partition::{eta_partition, gap_fit, EtaPartition};
pub use rates::{
    predicted_window, rate_neg_derivative, rate_value, rate_window, RateFunction, RateTable, WindowCase,
};
pub use scan::{concentration_scan, smallest_capturing_scale, CellMasses, ScanResult};
pub use series::{Record, ScanRecord, TimeSeries};

/// Fills the `F` column with the cumulative trapezoid integral of the density,
/// starting from `F = 0` at the first record.
pub fn accumulate_f(ts: &mut TimeSeries) {
    let recs = ts.records_mut();
    let mut acc = 0.0;
    for i in 0..recs.len() {
        if i > 0 {
            acc += 0.5 * (recs[i].t - recs[i - 1].t) * (recs[i].density + recs[i - 1].density);
        }
        recs[i].f = acc;
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn series(density: impl Fn(f64) -> f64, times: &[f64]) -> TimeSeries {
        let records = times
            .iter()
            .map(|&t| Record::new(t, 1.0, density(t), 1.0, 0.0))
            .collect();
        TimeSeries::from_records(1, records).unwrap()
    }

    #[test]
    fn trapezoid_is_exact_on_constants_and_linears() {
        let times: Vec<f64> = vec![0.0, 0.1, 0.35, 0.5, 0.9, 1.0];
        let mut ts = series(|_| 2.5, &times);
        accumulate_f(&mut ts);
        assert_eq!(ts.records()[0].f, 0.0);
        assert!((ts.records().last().unwrap().f - 2.5).abs() < 1e-15);
        let mut ts = series(|t| 3.0 * t + 1.0, &times);
        accumulate_f(&mut ts);
        assert!((ts.records().last().unwrap().f - 2.5).abs() < 1e-15);
        assert!(ts.records().windows(2).all(|w| w[1].f >= w[0].f));
    }
}
