use crate::spectral::{dealias_cutoff, forward_transform, Field};
use crate::Result;

pub use crate::spectral::boundary_shell_fraction;

/// `Σ|u|² h^d`.
pub fn mass(u: &Field) -> f64 {
    u.mass()
}

/// Space-time Strichartz exponent `2(d+2)/d` of the L²-critical problem.
pub fn strichartz_exponent(d: usize) -> f64 {
    2.0 * (d as f64 + 2.0) / d as f64
}

/// `Σ|u|^{2(d+2)/d} h^d`, the integrand of `F'(t)`.
pub fn strichartz_density(u: &Field) -> f64 {
    let d = u.grid().dim();
    // |u|^{2(d+2)/d} = (|u|²)^{(d+2)/d}; integer powers for d = 1, 2.
    let s: f64 = if d == 1 {
        u.values().iter().map(|z| z.norm_sqr().powi(3)).sum()
    } else {
        u.values().iter().map(|z| z.norm_sqr().powi(2)).sum()
    };
    s * u.grid().cell_volume()
}

pub fn sup_norm(u: &Field) -> f64 {
    u.sup_norm()
}

/// First wavenumber counted as spectral tail: modes with
/// `max_i |k_i| > cutoff - cutoff/8` form the top eighth of the band kept by
/// dealiasing.
pub fn tail_start(n: usize, p: usize) -> usize {
    let cutoff = dealias_cutoff(n, p);
    cutoff - cutoff / 8
}

/// Fraction of spectral mass in modes with `max_i |k_i| > tail_start(n, p)`.
pub fn spectral_tail_fraction(u: &Field, p: usize) -> Result<f64> {
    let s = forward_transform(u)?;
    let grid = *u.grid();
    let start = tail_start(grid.n(), p) as i64;
    let mut tail = 0.0;
    let mut total = 0.0;
    for (i, c) in s.coeffs().iter().enumerate() {
        let w = c.norm_sqr();
        total += w;
        let [a, b] = grid.wavevector(i);
        if a.abs().max(b.abs()) > start {
            tail += w;
        }
    }
    Ok(if total == 0.0 { 0.0 } else { tail / total })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::solutions::{gaussian, ground_state, soliton};
    use crate::spectral::Grid;
    use num_complex::Complex64;

    #[test]
    fn zero_and_constant_fields() {
        for d in [1, 2] {
            let g = Grid::new(d, 16, 1.5).unwrap();
            assert_eq!(mass(&Field::zeros(g)), 0.0);
            assert_eq!(strichartz_density(&Field::zeros(g)), 0.0);
            let c = Complex64::new(0.6, -0.8) * 1.3;
            let f = Field::new(g, vec![c; g.len()]).unwrap();
            let v = g.volume();
            assert!((mass(&f) - c.norm_sqr() * v).abs() < 1e-12);
            let q = strichartz_exponent(d);
            assert!((strichartz_density(&f) - c.norm().powf(q) * v).abs() < 1e-12);
        }
    }

    #[test]
    fn soliton_mass() {
        let gs = ground_state(1).unwrap();
        let grid = Grid::new(1, 1024, 24.0).unwrap();
        let m = mass(&soliton(&gs, 0.0, &grid).unwrap());
        assert!((m - 3f64.sqrt() * std::f64::consts::PI / 2.0).abs() < 1e-6);
    }

    #[test]
    fn tail_fraction_of_smooth_and_rough_data() {
        let grid = Grid::new(1, 256, 8.0).unwrap();
        assert_eq!(tail_start(256, 5), 37);
        let smooth = gaussian(1.0, 2.0, [0.0; 2], &grid).unwrap();
        assert!(spectral_tail_fraction(&smooth, 5).unwrap() < 1e-20);
        let mut v = vec![Complex64::default(); 256];
        v[100] = Complex64::new(1.0, 0.0);
        let spike = Field::new(grid, v).unwrap();
        let frac = spectral_tail_fraction(&spike, 5).unwrap();
        assert!(frac > 0.5);
        assert_eq!(spectral_tail_fraction(&Field::zeros(grid), 5).unwrap(), 0.0);
    }
}
