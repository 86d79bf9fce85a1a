use std::f64::consts::PI;

use blowscope::integrator::{pde_residual, EquationSpec, Sign};
use blowscope::propagator::{boost, linear_flow, rescale, translate};
use blowscope::solutions::{gaussian, ground_state, soliton};
use blowscope::spectral::{Field, Grid};
use blowscope::Complex64;
use proptest::prelude::*;

fn random_field(grid: Grid) -> impl Strategy<Value = Field> {
    prop::collection::vec((-1.0f64..1.0, -1.0f64..1.0), grid.len()).prop_map(move |v| {
        Field::new(grid, v.into_iter().map(|(a, b)| Complex64::new(a, b)).collect()).unwrap()
    })
}

fn any_grid_field() -> impl Strategy<Value = Field> {
    prop_oneof![
        random_field(Grid::new(1, 128, 5.0).unwrap()),
        random_field(Grid::new(1, 512, 20.0).unwrap()),
        random_field(Grid::new(2, 32, 3.0).unwrap()),
    ]
}

/// Sum of Gaussians whose spectra are negligible beyond a quarter of the band.
fn smooth_field(grid: Grid, params: &[(f64, f64, f64, f64)]) -> Field {
    let mut values = vec![Complex64::default(); grid.len()];
    for &(amp, width, c0, c1) in params {
        let g = gaussian(amp, width, [c0, c1], &grid).unwrap();
        let phase = Complex64::from_polar(1.0, amp * 3.0);
        for (v, z) in values.iter_mut().zip(g.values()) {
            *v += phase * z;
        }
    }
    Field::new(grid, values).unwrap()
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(100))]

    #[test]
    fn free_flow_conserves_mass(f in any_grid_field(), t in -5.0f64..5.0) {
        let m0 = f.mass();
        let m1 = linear_flow(&f, t).unwrap().mass();
        prop_assert!((m1 - m0).abs() <= 1e-12 * m0);
    }

    #[test]
    fn free_flow_commutes_with_cell_shifts(
        f in random_field(Grid::new(2, 32, 3.0).unwrap()),
        t in -1.0f64..1.0,
        s0 in -20i32..20,
        s1 in -20i32..20,
    ) {
        let h = f.grid().spacing();
        let a = [s0 as f64 * h, s1 as f64 * h];
        let lhs = linear_flow(&translate(&f, a).unwrap(), t).unwrap();
        let rhs = translate(&linear_flow(&f, t).unwrap(), a).unwrap();
        prop_assert!(lhs.distance(&rhs).unwrap() <= 1e-12 * f.norm());
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]

    #[test]
    fn free_flow_scaling_covariance(
        params in prop::collection::vec((0.2f64..1.5, 2.0f64..3.0, -2.0f64..2.0, -2.0f64..2.0), 1..4),
        t in -0.05f64..0.05,
        up in any::<bool>(),
    ) {
        // λ^{d/2} v(λ²t, λx) solves the free equation when v does.
        let grid = Grid::new(1, 512, 32.0).unwrap();
        let f = smooth_field(grid, &params);
        let lambda = if up { 2.0 } else { 0.5 };
        let lhs = linear_flow(&rescale(&f, lambda).unwrap(), t).unwrap();
        let rhs = rescale(&linear_flow(&f, lambda * lambda * t).unwrap(), lambda).unwrap();
        prop_assert!(lhs.distance(&rhs).unwrap() <= 1e-10 * f.norm());
    }
}

#[test]
fn boosted_soliton_solves_the_equation() {
    let grid = Grid::new(1, 2048, 32.0).unwrap();
    let gs = ground_state(1).unwrap();
    let eq = EquationSpec::new(1, Sign::Focusing).unwrap();
    // v = 4π ξ₀ with ξ₀ = 8 Δξ.
    let v = 4.0 * PI * 8.0 * grid.freq_spacing();
    let (t, dt) = (0.3, 1e-4);
    let state = |t: f64| boost(&soliton(&gs, t, &grid).unwrap(), [v, 0.0], t).unwrap();
    let before = state(t);
    let after = state(t + dt);
    let r = pde_residual(&before, &after, dt, &eq).unwrap() / before.norm();
    assert!(r < 1e-6, "relative residual {r:e}");
    // A sign flip in the boost phase is not a solution.
    let wrong = |t: f64| {
        let b = state(t);
        let vals: Vec<Complex64> = b
            .values()
            .iter()
            .map(|z| z * Complex64::from_polar(1.0, 0.5 * v * v * t))
            .collect();
        Field::new(grid, vals).unwrap()
    };
    let r_wrong = pde_residual(&wrong(t), &wrong(t + dt), dt, &eq).unwrap() / before.norm();
    assert!(r_wrong > 100.0 * r);
}
