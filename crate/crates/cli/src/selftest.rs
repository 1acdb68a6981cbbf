//! Quick built-in consistency checks.

use nmme_core::assemble::assemble_a;
use nmme_core::coefffuncs::{solve_cavity, verify_x21_translation_invariance, SolverPolicy};
use nmme_core::dynamics::{liouville_apply, observables, DensityMatrix, InitialState, NodeCoeffs, Scenario, ScenarioKind};
use nmme_core::green::{cavity_coeffs, exponential_kernel_u, solve_u};
use nmme_core::{sample_kernels, Grid, Result, Spectral, Temperature, C64};

pub struct Check {
    pub name: &'static str,
    pub passed: bool,
    pub detail: String,
}

fn check(name: &'static str, value: Result<f64>, limit: f64) -> Check {
    match value {
        Ok(v) => Check { name, passed: v <= limit, detail: format!("{v:.3e} (limit {limit:.1e})") },
        Err(e) => Check { name, passed: false, detail: e.to_string() },
    }
}

fn null_routes() -> Result<f64> {
    let grid = Grid::with_horizon(2.0, 40)?;
    let k = sample_kernels(&Spectral::Null, Temperature::Zero, &grid)?;
    let f = solve_cavity(&k, 1.0, &grid, None, &SolverPolicy::dense())?;
    let a = assemble_a(&k, 1.0, &f.x11, &f.x21, &f.y, &grid)?;
    let b = cavity_coeffs(&k, 1.0, &grid)?;
    let gap = (0..3)
        .flat_map(|j| a.column(j).iter().zip(b.column(j)).map(|(x, y)| (x - y).abs()).collect::<Vec<_>>())
        .fold(0.0, f64::max);
    Ok(gap)
}

fn closed_form() -> Result<f64> {
    let (rate, width, center) = (0.2, 1.0, 1.0);
    let grid = Grid::with_horizon(5.0, 1000)?;
    let k = sample_kernels(&Spectral::LorentzianExtended { rate, width, center }, Temperature::Zero, &grid)?;
    let u = solve_u(&k, 1.0, &grid)?;
    let amp = C64::new(rate * width / 2.0, 0.0);
    let decay = C64::new(width, center);
    Ok((0..grid.nodes())
        .map(|j| (u.get(j) - exponential_kernel_u(1.0, amp, decay, grid.time(j))).norm())
        .fold(0.0, f64::max))
}

fn traceless() -> Result<f64> {
    let d = 6;
    let mut worst = 0.0f64;
    for trial in 0..20 {
        let mut rho = DensityMatrix::zeros(d);
        for m in 0..d {
            for n in m..d {
                let s = (trial * 37 + m * 11 + n * 5) as f64;
                let z = C64::new(s.sin(), if m == n { 0.0 } else { (1.3 * s).cos() });
                rho.set(m, n, z);
                rho.set(n, m, z.conj());
            }
        }
        let c = C64::new(0.3, -0.2);
        let out = liouville_apply(&NodeCoeffs::Cavity { a1: 1.1, a2: 0.2, a3: 0.05, c, d: -c.conj() }, &rho)?;
        worst = worst.max(out.trace().norm()).max(out.hermiticity_defect());
    }
    Ok(worst)
}

fn coherent_number() -> Result<f64> {
    let s = Scenario {
        kind: ScenarioKind::Cavity,
        omega0: 1.0,
        model: Spectral::Null,
        temperature: Temperature::Zero,
        n_max: 20,
        initial: InitialState::Coherent(C64::new(1.0, 0.0)),
        drive: None,
    };
    Ok((observables(&s.initial_state(), ScenarioKind::Cavity).population - 1.0).abs())
}

fn translation() -> Result<f64> {
    let grid = Grid::with_horizon(4.0, 64)?;
    let k = sample_kernels(&Spectral::OhmicExp { coupling: 0.05, cutoff: 5.0 }, Temperature::Zero, &grid)?;
    let gap = verify_x21_translation_invariance(&k, 1.0, &grid, &SolverPolicy::dense())?;
    Ok(gap / (10.0 * grid.step() * grid.step()))
}

pub fn run_checks() -> Vec<Check> {
    vec![
        check("null kernel route gap", null_routes(), 1e-12),
        check("exponential-kernel closed form", closed_form(), 1e-6),
        check("generator trace and hermiticity", traceless(), 1e-12),
        check("coherent photon number", coherent_number(), 1e-8),
        check("x21 translation invariance / 10h²", translation(), 1.0),
    ]
}
