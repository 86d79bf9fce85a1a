//! Residual verification of the exact solutions.

use blowscope::diagnostics::Verdict;
use blowscope::integrator::{pde_residual, EquationSpec, Sign};
use blowscope::solutions::{
    ground_state, petviashvili, pseudoconformal_blowup, soliton, GroundState, PseudoconformalFamily,
};
use blowscope::spectral::{Field, Grid};
use blowscope::{Complex64, Result};
use serde::Serialize;

/// Relative tolerance of the equation residual of a sampled pair.
pub const PDE_TOLERANCE: f64 = 1e-6;
/// Relative tolerance of the cross-solver ground-state agreement.
pub const CROSS_SOLVER_TOLERANCE: f64 = 1e-4;
/// The negative control must miss the equation by this factor.
pub const CONTROL_FACTOR: f64 = 1e3;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, clap::ValueEnum)]
#[serde(rename_all = "lowercase")]
pub enum ExactKind {
    Soliton1d,
    Soliton2d,
    Pseudoconformal1d,
    Pseudoconformal2d,
}

impl ExactKind {
    pub fn dim(self) -> usize {
        match self {
            ExactKind::Soliton1d | ExactKind::Pseudoconformal1d => 1,
            ExactKind::Soliton2d | ExactKind::Pseudoconformal2d => 2,
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            ExactKind::Soliton1d => "soliton1d",
            ExactKind::Soliton2d => "soliton2d",
            ExactKind::Pseudoconformal1d => "pseudoconformal1d",
            ExactKind::Pseudoconformal2d => "pseudoconformal2d",
        }
    }

    fn is_soliton(self) -> bool {
        matches!(self, ExactKind::Soliton1d | ExactKind::Soliton2d)
    }

    /// Grid, time and step of the equation-residual check.
    fn residual_setup(self) -> (Grid, f64, f64) {
        let grid = match self {
            ExactKind::Soliton1d => Grid::new(1, 1024, 24.0),
            ExactKind::Soliton2d => Grid::new(2, 512, 24.0),
            ExactKind::Pseudoconformal1d => Grid::new(1, 8192, 16.0),
            ExactKind::Pseudoconformal2d => Grid::new(2, 512, 12.0),
        }
        .expect("fixed grids are valid");
        if self.is_soliton() {
            (grid, 0.5, 1e-4)
        } else {
            (grid, 0.5, 1e-5)
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ProfileSummary {
    pub mass: f64,
    pub peak: f64,
    pub closed_form: bool,
    /// Strichartz density constant of the blow-up family, `density · (T* − t)²`.
    pub density_constant: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct GridSummary {
    pub dim: usize,
    pub n: usize,
    pub half_width: f64,
}

impl From<&Grid> for GridSummary {
    fn from(g: &Grid) -> Self {
        Self {
            dim: g.dim(),
            n: g.n(),
            half_width: g.half_width(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ProfileResidual {
    pub verdict: Verdict,
    pub grid: GridSummary,
    pub residual: f64,
    pub tolerance: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CrossSolver {
    pub verdict: Verdict,
    pub grid: GridSummary,
    pub iterations: usize,
    pub mass_difference: f64,
    pub peak_difference: f64,
    pub tolerance: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct EquationResidual {
    pub verdict: Verdict,
    pub grid: GridSummary,
    pub t: f64,
    pub dt: f64,
    /// `pde_residual / ‖u‖₂`.
    pub relative: f64,
    /// The same with the phase or chirp reversed.
    pub control: f64,
    pub tolerance: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ExactReport {
    pub report: &'static str,
    pub family: ExactKind,
    pub dim: usize,
    pub profile: ProfileSummary,
    pub verdict: Verdict,
    pub profile_residual: Option<ProfileResidual>,
    pub cross_solver: Option<CrossSolver>,
    pub equation_residual: Option<EquationResidual>,
}

fn relative(a: f64, b: f64) -> f64 {
    (a - b).abs() / b.abs()
}

fn conjugate_phase(u: &Field, phase: impl Fn([f64; 2]) -> f64) -> Result<Field> {
    let g = *u.grid();
    let vals: Vec<Complex64> = u
        .values()
        .iter()
        .enumerate()
        .map(|(j, z)| z * Complex64::from_polar(1.0, phase(g.position(j))))
        .collect();
    Field::new(g, vals)
}

fn equation_residual(kind: ExactKind, gs: &GroundState) -> Result<EquationResidual> {
    let (grid, t, dt) = kind.residual_setup();
    let eq = EquationSpec::new(kind.dim(), Sign::Focusing)?;
    let (a, b, ca, cb) = if kind.is_soliton() {
        let a = soliton(gs, t, &grid)?;
        let b = soliton(gs, t + dt, &grid)?;
        let ca = soliton(gs, -t, &grid)?;
        let cb = soliton(gs, -t - dt, &grid)?;
        (a, b, ca, cb)
    } else {
        let fam = PseudoconformalFamily::new(gs.clone(), 1.0)?;
        let a = pseudoconformal_blowup(&fam, t, &grid)?;
        let b = pseudoconformal_blowup(&fam, t + dt, &grid)?;
        // Reversed chirp.
        let flip = |u: &Field, s: f64| conjugate_phase(u, |x| (x[0] * x[0] + x[1] * x[1]) / (2.0 * s));
        let ca = flip(&a, 1.0 - t)?;
        let cb = flip(&b, 1.0 - t - dt)?;
        (a, b, ca, cb)
    };
    let norm = a.norm();
    let relative = pde_residual(&a, &b, dt, &eq)? / norm;
    let control = pde_residual(&ca, &cb, dt, &eq)? / norm;
    Ok(EquationResidual {
        verdict: Verdict::from_bool(relative <= PDE_TOLERANCE && control > CONTROL_FACTOR * relative),
        grid: (&grid).into(),
        t,
        dt,
        relative,
        control,
        tolerance: PDE_TOLERANCE,
    })
}

fn cross_solver(gs: &GroundState) -> Result<CrossSolver> {
    let grid = Grid::new(2, 256, 16.0)?;
    let sol = petviashvili(&grid, gs.power(), 1e-12, 5000)?;
    let mass_difference = relative(sol.field.mass(), gs.mass());
    let peak_difference = relative(sol.field.sup_norm(), gs.peak());
    Ok(CrossSolver {
        verdict: Verdict::from_bool(
            mass_difference <= CROSS_SOLVER_TOLERANCE && peak_difference <= CROSS_SOLVER_TOLERANCE,
        ),
        grid: (&grid).into(),
        iterations: sol.iterations,
        mass_difference,
        peak_difference,
        tolerance: CROSS_SOLVER_TOLERANCE,
    })
}

/// Profile constants, and with `check` the residual verification.
pub fn exact_report(kind: ExactKind, check: bool) -> Result<ExactReport> {
    let gs = ground_state(kind.dim())?;
    let density_constant = if kind.is_soliton() {
        None
    } else {
        Some(PseudoconformalFamily::new(gs.clone(), 1.0)?.density_constant())
    };
    let mut report = ExactReport {
        report: "exact",
        family: kind,
        dim: kind.dim(),
        profile: ProfileSummary {
            mass: gs.mass(),
            peak: gs.peak(),
            closed_form: gs.is_closed_form(),
            density_constant,
        },
        verdict: Verdict::NotApplicable,
        profile_residual: None,
        cross_solver: None,
        equation_residual: None,
    };
    if !check {
        return Ok(report);
    }
    let (grid, tolerance) = gs.verification_grid();
    let residual = gs.residual(&grid)?;
    let pr = ProfileResidual {
        verdict: Verdict::from_bool(residual <= tolerance),
        grid: (&grid).into(),
        residual,
        tolerance,
    };
    let mut verdicts = vec![pr.verdict];
    report.profile_residual = Some(pr);
    if kind.dim() == 2 {
        let cs = cross_solver(&gs)?;
        verdicts.push(cs.verdict);
        report.cross_solver = Some(cs);
    }
    let er = equation_residual(kind, &gs)?;
    verdicts.push(er.verdict);
    report.equation_residual = Some(er);
    report.verdict = Verdict::combine(&verdicts);
    Ok(report)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn soliton1d_passes_every_check() {
        let r = exact_report(ExactKind::Soliton1d, true).unwrap();
        assert_eq!(r.verdict, Verdict::Pass);
        let er = r.equation_residual.unwrap();
        assert!(er.relative <= PDE_TOLERANCE, "{er:?}");
        assert!(r.cross_solver.is_none());
    }

    #[test]
    fn summary_without_check_has_no_verdict() {
        let r = exact_report(ExactKind::Pseudoconformal1d, false).unwrap();
        assert_eq!(r.verdict, Verdict::NotApplicable);
        assert!(r.profile.density_constant.unwrap() > 0.0);
        assert!(r.profile.closed_form);
    }
}
