//! Frequency cutoff `L(t)` of the projected concentration statement.

use serde::Serialize;

use crate::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct KappaParams {
    /// Concentration level `ε`.
    pub epsilon: f64,
    /// `‖u₀‖₂`.
    pub initial_norm: f64,
    pub dim: usize,
    pub alpha: f64,
}

impl KappaParams {
    pub fn new(epsilon: f64, initial_norm: f64, dim: usize, alpha: f64) -> Result<Self> {
        if !(epsilon.is_finite() && epsilon > 0.0) {
            return Err(Error::InvalidParameter(format!("epsilon must be positive, got {epsilon}")));
        }
        if !(initial_norm.is_finite() && initial_norm > 0.0) {
            return Err(Error::InvalidParameter(format!(
                "initial norm must be positive, got {initial_norm}"
            )));
        }
        if dim != 1 && dim != 2 {
            return Err(Error::InvalidParameter(format!("dimension {dim} is not 1 or 2")));
        }
        if !(alpha.is_finite() && alpha > 0.0) {
            return Err(Error::InvalidParameter(format!("alpha must be positive, got {alpha}")));
        }
        Ok(Self {
            epsilon,
            initial_norm,
            dim,
            alpha,
        })
    }

    /// `κ(ε) = 2^{−(d+2)} (ε ‖u₀‖₂^{−2} / 8)^{1/d}`.
    pub fn kappa(&self) -> f64 {
        let d = self.dim as f64;
        2f64.powf(-(d + 2.0)) * (self.epsilon / (self.initial_norm * self.initial_norm) / 8.0).powf(1.0 / d)
    }

    /// `L(t) = κ / (2 (T* − t)^α)`.
    pub fn cutoff(&self, t: f64, t_star: f64) -> Result<f64> {
        let s = t_star - t;
        if !(s > 0.0) {
            return Err(Error::Domain(format!("cutoff needs t < T*, got t = {t}, T* = {t_star}")));
        }
        Ok(self.kappa() / (2.0 * s.powf(self.alpha)))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn formula_and_growth() {
        let kp = KappaParams::new(0.5, 1.0, 1, 1.0).unwrap();
        assert!((kp.kappa() - 1.0 / 128.0).abs() < 1e-16);
        let kp2 = KappaParams::new(2.0, 2.0, 2, 1.0).unwrap();
        assert!((kp2.kappa() - (1.0 / 16.0) * (1.0f64 / 16.0).sqrt()).abs() < 1e-16);
        let a = kp.cutoff(0.5, 1.0).unwrap();
        let b = kp.cutoff(0.9, 1.0).unwrap();
        assert!(b > a && a > 0.0);
        assert!(kp.cutoff(1.0, 1.0).is_err());
        assert!(KappaParams::new(0.0, 1.0, 1, 1.0).is_err());
    }
}
