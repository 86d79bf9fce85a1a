//! Divergence profiles `G(s)` of the Strichartz norm, `s = T* − t`, and the
//! concentration windows `(−G′(s))^{−1/2}` they induce.

use serde::{Deserialize, Serialize};

use crate::{Error, Result};

/// Knots of a tabulated profile, interpolated by a natural cubic spline in
/// `ln s`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "RawTable", into = "RawTable")]
pub struct RateTable {
    s: Vec<f64>,
    g: Vec<f64>,
    x: Vec<f64>,
    m: Vec<f64>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawTable {
    s: Vec<f64>,
    g: Vec<f64>,
}

impl TryFrom<RawTable> for RateTable {
    type Error = Error;
    fn try_from(raw: RawTable) -> Result<Self> {
        RateTable::new(raw.s, raw.g)
    }
}

impl From<RateTable> for RawTable {
    fn from(t: RateTable) -> Self {
        RawTable { s: t.s, g: t.g }
    }
}

impl RateTable {
    /// `s` strictly increasing inside `(0, 1)`, `g` strictly decreasing.
    pub fn new(s: Vec<f64>, g: Vec<f64>) -> Result<Self> {
        if s.len() != g.len() || s.len() < 4 {
            return Err(Error::InvalidParameter(
                "rate table needs at least four paired knots".into(),
            ));
        }
        if !s.iter().chain(&g).all(|v| v.is_finite()) || s[0] <= 0.0 || s[s.len() - 1] >= 1.0 {
            return Err(Error::InvalidParameter("rate table knots must be finite with s in (0, 1)".into()));
        }
        if !s.windows(2).all(|w| w[1] > w[0]) || !g.windows(2).all(|w| w[1] < w[0]) {
            return Err(Error::InvalidParameter(
                "rate table needs increasing s and decreasing G".into(),
            ));
        }
        let x: Vec<f64> = s.iter().map(|v| v.ln()).collect();
        let m = natural_spline_moments(&x, &g);
        Ok(Self { s, g, x, m })
    }

    pub fn knots(&self) -> (&[f64], &[f64]) {
        (&self.s, &self.g)
    }

    /// Spline value at `ln s`; linear extrapolation outside the knots.
    fn eval(&self, s: f64) -> f64 {
        let x = s.ln();
        let n = self.x.len();
        let (x0, xn) = (self.x[0], self.x[n - 1]);
        if x < x0 {
            return self.g[0] + (x - x0) * self.slope_at(0);
        }
        if x > xn {
            return self.g[n - 1] + (x - xn) * self.slope_at(n - 1);
        }
        let i = self.x.partition_point(|&v| v <= x).clamp(1, n - 1) - 1;
        let h = self.x[i + 1] - self.x[i];
        let a = (self.x[i + 1] - x) / h;
        let b = (x - self.x[i]) / h;
        a * self.g[i]
            + b * self.g[i + 1]
            + ((a * a * a - a) * self.m[i] + (b * b * b - b) * self.m[i + 1]) * h * h / 6.0
    }

    /// `dG/d(ln s)` at knot `i`.
    fn slope_at(&self, i: usize) -> f64 {
        let n = self.x.len();
        let j = i.min(n - 2);
        let h = self.x[j + 1] - self.x[j];
        let diff = (self.g[j + 1] - self.g[j]) / h;
        if i < n - 1 {
            diff - h * (2.0 * self.m[j] + self.m[j + 1]) / 6.0
        } else {
            diff + h * (self.m[j] + 2.0 * self.m[j + 1]) / 6.0
        }
    }
}

/// Second derivatives of the natural cubic spline through `(x, y)`.
fn natural_spline_moments(x: &[f64], y: &[f64]) -> Vec<f64> {
    let n = x.len();
    let mut m = vec![0.0; n];
    let mut c = vec![0.0; n];
    let mut d = vec![0.0; n];
    for i in 1..n - 1 {
        let h0 = x[i] - x[i - 1];
        let h1 = x[i + 1] - x[i];
        let a = h0 / 6.0;
        let b = (h0 + h1) / 3.0;
        let cc = h1 / 6.0;
        let r = (y[i + 1] - y[i]) / h1 - (y[i] - y[i - 1]) / h0;
        let denom = b - a * c[i - 1];
        c[i] = cc / denom;
        d[i] = (r - a * d[i - 1]) / denom;
    }
    for i in (1..n - 1).rev() {
        m[i] = d[i] - c[i] * m[i + 1];
    }
    m
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase", deny_unknown_fields)]
pub enum RateFunction {
    /// `G(s) = s^{−β}`.
    Power { beta: f64 },
    /// `G(s) = |ln s|^γ`.
    LogPower { gamma: f64 },
    /// `G(s) = ln|ln s|`.
    LogLog,
    Tabulated { table: RateTable },
}

/// Which window statement of the general-rate result applies.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum WindowCase {
    /// `G` grows at least like `|ln s|`: window `(−G′)^{−1/2}`.
    RateWindow,
    /// Slower growth: the parabolic window `s^{1/2}`.
    Parabolic,
}

fn check_domain(s: f64) -> Result<()> {
    if s > 0.0 && s < 1.0 {
        Ok(())
    } else {
        Err(Error::Domain(format!("rate functions are defined on (0, 1), got s = {s}")))
    }
}

impl RateFunction {
    pub fn validate(&self) -> Result<()> {
        match *self {
            RateFunction::Power { beta } if !(beta.is_finite() && beta > 0.0) => {
                Err(Error::InvalidParameter(format!("power rate needs beta > 0, got {beta}")))
            }
            RateFunction::LogPower { gamma } if !(gamma.is_finite() && gamma > 0.0) => {
                Err(Error::InvalidParameter(format!("log-power rate needs gamma > 0, got {gamma}")))
            }
            _ => Ok(()),
        }
    }

    pub fn case(&self) -> WindowCase {
        let log_growth = match self {
            RateFunction::Power { .. } => f64::INFINITY,
            RateFunction::LogPower { gamma } => *gamma,
            RateFunction::LogLog => 0.0,
            RateFunction::Tabulated { table } => {
                // d ln G / d ln|ln s| over the two smallest knots.
                let (s, g) = table.knots();
                if g[0] <= 0.0 || g[1] <= 0.0 {
                    0.0
                } else {
                    (g[0] / g[1]).ln() / (s[0].ln().abs() / s[1].ln().abs()).ln()
                }
            }
        };
        if log_growth >= 1.0 {
            WindowCase::RateWindow
        } else {
            WindowCase::Parabolic
        }
    }
}

/// `G(s)`.
pub fn rate_value(g: &RateFunction, s: f64) -> Result<f64> {
    check_domain(s)?;
    g.validate()?;
    Ok(match g {
        RateFunction::Power { beta } => s.powf(-beta),
        RateFunction::LogPower { gamma } => s.ln().abs().powf(*gamma),
        RateFunction::LogLog => s.ln().abs().ln(),
        RateFunction::Tabulated { table } => table.eval(s),
    })
}

/// Richardson-extrapolated centred difference of `G` at `s`.
fn centred_derivative(f: impl Fn(f64) -> f64, s: f64, h: f64) -> f64 {
    let d = |h: f64| (f(s + h) - f(s - h)) / (2.0 * h);
    let (d1, d2, d3) = (d(h), d(h / 2.0), d(h / 4.0));
    let r1 = (4.0 * d2 - d1) / 3.0;
    let r2 = (4.0 * d3 - d2) / 3.0;
    (16.0 * r2 - r1) / 15.0
}

/// `−G′(s)`.
pub fn rate_neg_derivative(g: &RateFunction, s: f64) -> Result<f64> {
    check_domain(s)?;
    g.validate()?;
    Ok(match g {
        RateFunction::Power { beta } => beta * s.powf(-beta - 1.0),
        RateFunction::LogPower { gamma } => gamma * s.ln().abs().powf(gamma - 1.0) / s,
        RateFunction::LogLog => 1.0 / (s * s.ln().abs()),
        RateFunction::Tabulated { table } => {
            // Keep the stencil inside one spline piece where possible.
            let x = s.ln();
            let i = table.x.partition_point(|&v| v <= x);
            let near = [i.checked_sub(1).map(|j| table.x[j]), table.x.get(i).copied()]
                .into_iter()
                .flatten()
                .map(|k| (x - k).abs())
                .filter(|&gap| gap > 0.0)
                .fold(f64::INFINITY, f64::min);
            let h = (s * 0.5 * near.clamp(1e-6, 0.05)).min(0.5 * (1.0 - s));
            -centred_derivative(|v| table.eval(v), s, h)
        }
    })
}

/// `(−G′(s))^{−1/2}`.
pub fn rate_window(g: &RateFunction, s: f64) -> Result<f64> {
    let d = rate_neg_derivative(g, s)?;
    if !(d > 0.0) {
        return Err(Error::Domain(format!("−G′({s}) = {d} is not positive")));
    }
    Ok(d.powf(-0.5))
}

/// Window predicted by the general-rate statement: `(−G′)^{−1/2}` in the
/// rate-window case, `s^{1/2}` otherwise.
pub fn predicted_window(g: &RateFunction, s: f64) -> Result<f64> {
    match g.case() {
        WindowCase::RateWindow => rate_window(g, s),
        WindowCase::Parabolic => {
            check_domain(s)?;
            Ok(s.sqrt())
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn points() -> Vec<f64> {
        (0..20).map(|i| 1e-6 * (0.9e6f64).powf(i as f64 / 19.0)).collect()
    }

    #[test]
    fn power_window_exponent() {
        for beta in [1.0 / 6.0, 0.5, 1.0, 2.0] {
            let g = RateFunction::Power { beta };
            for s in points() {
                let w = rate_window(&g, s).unwrap();
                let expect = beta.powf(-0.5) * s.powf((beta + 1.0) / 2.0);
                assert!((w / expect - 1.0).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn closed_forms_match_differences() {
        let kinds = [
            RateFunction::Power { beta: 0.7 },
            RateFunction::LogPower { gamma: 1.3 },
            RateFunction::LogLog,
        ];
        for g in &kinds {
            for s in [0.01, 0.1, 0.3] {
                let fd = -centred_derivative(|v| rate_value(g, v).unwrap(), s, 1e-3 * s);
                let exact = rate_neg_derivative(g, s).unwrap();
                assert!((fd / exact - 1.0).abs() < 1e-9, "{g:?} at {s}");
            }
        }
    }

    #[test]
    fn cases() {
        assert_eq!(RateFunction::Power { beta: 0.1 }.case(), WindowCase::RateWindow);
        assert_eq!(RateFunction::LogPower { gamma: 1.5 }.case(), WindowCase::RateWindow);
        assert_eq!(RateFunction::LogPower { gamma: 0.5 }.case(), WindowCase::Parabolic);
        assert_eq!(RateFunction::LogLog.case(), WindowCase::Parabolic);
        let s = 1e-4;
        assert_eq!(predicted_window(&RateFunction::LogLog, s).unwrap(), s.sqrt());
    }

    #[test]
    fn domain_errors() {
        let g = RateFunction::LogLog;
        for s in [0.0, 1.0, -0.5, 2.0, f64::NAN] {
            assert!(matches!(rate_value(&g, s), Err(Error::Domain(_))));
        }
        assert!(rate_value(&RateFunction::Power { beta: -1.0 }, 0.5).is_err());
    }

    #[test]
    fn tabulated_matches_spline_derivative() {
        let s: Vec<f64> = (0..40).map(|i| 1e-4 * (0.9e4f64).powf(i as f64 / 39.0)).collect();
        let g: Vec<f64> = s.iter().map(|v| v.powf(-0.5)).collect();
        let table = RateTable::new(s, g).unwrap();
        let kind = RateFunction::Tabulated { table: table.clone() };
        for s in [2e-4, 3.3e-3, 0.05, 0.4] {
            let x = f64::ln(s);
            let i = table.x.partition_point(|&v| v <= x) - 1;
            let h = table.x[i + 1] - table.x[i];
            let a = (table.x[i + 1] - x) / h;
            let b = 1.0 - a;
            let dgdx = (table.g[i + 1] - table.g[i]) / h
                + h * ((1.0 - 3.0 * a * a) * table.m[i] + (3.0 * b * b - 1.0) * table.m[i + 1]) / 6.0;
            let exact = -dgdx / s;
            let fd = rate_neg_derivative(&kind, s).unwrap();
            assert!((fd / exact - 1.0).abs() < 1e-8, "{s}: {fd} vs {exact}");
            let truth = 0.5 * s.powf(-1.5);
            assert!((fd / truth - 1.0).abs() < 1e-2);
        }
        assert_eq!(kind.case(), WindowCase::RateWindow);
    }

    #[test]
    fn table_validation_and_serde() {
        assert!(RateTable::new(vec![0.1, 0.2, 0.3], vec![3.0, 2.0, 1.0]).is_err());
        assert!(RateTable::new(vec![0.1, 0.2, 0.3, 0.4], vec![3.0, 2.0, 2.5, 1.0]).is_err());
        let g = RateFunction::Power { beta: 0.25 };
        let text = serde_json::to_string(&g).unwrap();
        assert_eq!(text, r#"{"kind":"power","beta":0.25}"#);
        let back: RateFunction = serde_json::from_str(&text).unwrap();
        assert_eq!(back, g);
    }
}
