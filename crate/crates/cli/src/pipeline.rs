//! Kernels, coefficient functions, coefficients, propagation and reports.

use std::fs::{self, File};
use std::io::{self, BufWriter, Write};
use std::path::Path;
use std::time::Instant;

use nmme_core::assemble::{assemble_a, assemble_cd, assemble_rs, CavityCoeffs, DrivenCoeffs, TwoStateCoeffs};
use nmme_core::coefffuncs::{solve_cavity, solve_x_tsa};
use nmme_core::dynamics::{propagate, Generator, PropagateOptions, ScenarioKind, Trajectory};
use nmme_core::green;
use nmme_core::unravel::{run_ensemble, EnsembleOptions, EnsembleResult};
use nmme_core::{sample_kernels, Kernel};

use crate::config::{RouteKey, RunConfig};
use crate::RunError;

/// Coefficients of one route.
#[derive(Debug, Clone, PartialEq)]
pub enum Coefficients {
    Cavity { a: CavityCoeffs<f64>, drive: Option<DrivenCoeffs<f64>> },
    TwoState(TwoStateCoeffs<f64>),
}

impl Coefficients {
    pub fn generator(&self, omega0: f64) -> Generator<'_, f64> {
        match self {
            Coefficients::Cavity { a, drive } => Generator::Cavity { a, drive: drive.as_ref() },
            Coefficients::TwoState(rs) => Generator::TwoState { omega0, rs },
        }
    }

    /// Coefficient columns with their names.
    pub fn columns(&self) -> Vec<(&'static str, &[f64])> {
        match self {
            Coefficients::Cavity { a, .. } => vec![("1", &a.a1[..]), ("2", &a.a2[..]), ("3", &a.a3[..])],
            Coefficients::TwoState(rs) => vec![("R", &rs.r[..]), ("S", &rs.s[..])],
        }
    }

    fn write(&self, dir: &Path, stem: &str) -> io::Result<()> {
        match self {
            Coefficients::Cavity { a, drive } => {
                a.write_csv(create(dir, &format!("{stem}.csv"))?)?;
                if let Some(cd) = drive {
                    cd.write_csv(create(dir, "drive_coeffs.csv")?)?;
                }
                Ok(())
            }
            Coefficients::TwoState(rs) => rs.write_csv(create(dir, &format!("{stem}.csv"))?),
        }
    }
}

fn create(dir: &Path, name: &str) -> io::Result<BufWriter<File>> {
    Ok(BufWriter::new(File::create(dir.join(name))?))
}

fn kernel(cfg: &RunConfig) -> Result<Kernel, RunError> {
    Ok(sample_kernels(&cfg.scenario.model, cfg.scenario.temperature, &cfg.grid)?)
}

/// Volterra route; returns the coefficients and the wall time of the solve.
pub fn integral_route(cfg: &RunConfig, k: &Kernel, dump: Option<&Path>) -> Result<(Coefficients, f64), RunError> {
    let (grid, w0) = (&cfg.grid, cfg.scenario.omega0);
    let start = Instant::now();
    let coeffs = match cfg.scenario.kind {
        ScenarioKind::TwoState => {
            let x = solve_x_tsa(k, w0, grid, &cfg.policy)?;
            let rs = assemble_rs(k, &x, grid)?;
            if let Some(dir) = dump {
                x.write_csv(create(dir, "x_tsa.csv")?)?;
            }
            Coefficients::TwoState(rs)
        }
        kind => {
            let drive = match (&cfg.scenario.drive, kind) {
                (Some(d), ScenarioKind::DrivenCavity) => Some(d.sample(grid)),
                _ => None,
            };
            let f = solve_cavity(k, w0, grid, drive.as_deref(), &cfg.policy)?;
            let a = assemble_a(k, w0, &f.x11, &f.x21, &f.y, grid)?;
            let cd = match (&f.x13, &drive) {
                (Some(x13), Some(eps)) => Some(assemble_cd(k, x13, eps, grid)?),
                _ => None,
            };
            if let Some(dir) = dump {
                f.x11.write_csv(create(dir, "x11.csv")?)?;
                f.x21.write_csv(create(dir, "x21.csv")?)?;
                f.x12.write_csv(create(dir, "x12.csv")?)?;
                f.y.write_csv(create(dir, "y.csv")?)?;
                if let Some(x13) = &f.x13 {
                    x13.write_csv(create(dir, "x13.csv")?)?;
                }
            }
            Coefficients::Cavity { a, drive: cd }
        }
    };
    Ok((coeffs, start.elapsed().as_secs_f64()))
}

/// Green's-function route; returns the coefficients and the wall time.
pub fn green_route(cfg: &RunConfig, k: &Kernel, dump: Option<&Path>) -> Result<(Coefficients, f64), RunError> {
    let (grid, w0) = (&cfg.grid, cfg.scenario.omega0);
    let start = Instant::now();
    let coeffs = match cfg.scenario.kind {
        ScenarioKind::TwoState => {
            if let Some(dir) = dump {
                green::solve_two_state_amplitude(k, w0, grid)?.write_csv(create(dir, "w.csv")?)?;
            }
            Coefficients::TwoState(green::two_state_coeffs(k, w0, grid)?)
        }
        ScenarioKind::Cavity => {
            let sol = green::solve_green(k, w0, grid)?;
            let xbar = green::xbar_tables(&sol)?;
            let b = green::assemble_b(k, w0, &xbar, grid)?;
            if let Some(dir) = dump {
                sol.u.write_csv(create(dir, "u.csv")?)?;
                sol.v.write_csv(create(dir, "v.csv")?)?;
            }
            Coefficients::Cavity { a: b, drive: None }
        }
        ScenarioKind::DrivenCavity => {
            return Err(RunError::Config(crate::config::ConfigError::Invalid(
                "the green route does not cover the driven cavity".into(),
            )))
        }
    };
    Ok((coeffs, start.elapsed().as_secs_f64()))
}

/// Maximum gaps of one coefficient between the routes.
#[derive(Debug, Clone, PartialEq)]
pub struct Gap {
    pub name: String,
    pub max_abs: f64,
    /// `max_t |A - B| / max_t |B|`, or the absolute gap when `B ≡ 0`.
    pub max_rel: f64,
}

/// Both routes side by side.
#[derive(Debug, Clone)]
pub struct ComparisonReport {
    pub integral: Coefficients,
    pub green: Coefficients,
    pub gaps: Vec<Gap>,
    pub integral_seconds: f64,
    pub green_seconds: f64,
    pub steps: usize,
}

impl ComparisonReport {
    pub fn max_rel(&self) -> f64 {
        self.gaps.iter().fold(0.0, |m, g| m.max(g.max_rel))
    }

    pub fn max_abs(&self) -> f64 {
        self.gaps.iter().fold(0.0, |m, g| m.max(g.max_abs))
    }

    pub fn summary(&self) -> String {
        let mut s = format!("compare N={}:", self.steps);
        for g in &self.gaps {
            s.push_str(&format!(" {} abs={:.3e} rel={:.3e};", g.name, g.max_abs, g.max_rel));
        }
        s.push_str(&format!(
            " max abs={:.3e} max rel={:.3e}; integral {:.3}s, green {:.3}s",
            self.max_abs(),
            self.max_rel(),
            self.integral_seconds,
            self.green_seconds
        ));
        s
    }

    fn labels(&self, name: &str) -> (String, String) {
        match self.integral {
            Coefficients::Cavity { .. } => (format!("A{name}"), format!("B{name}")),
            Coefficients::TwoState(_) => (format!("{name}_integral"), format!("{name}_green")),
        }
    }

    /// `t,A1,B1,abs1,rel1,...` (`t,R_integral,R_green,absR,relR,...` for the atom).
    pub fn write_csv<W: Write>(&self, mut w: W) -> io::Result<()> {
        let a = self.integral.columns();
        let b = self.green.columns();
        let mut header = String::from("t");
        for (name, _) in &a {
            let (la, lb) = self.labels(name);
            header.push_str(&format!(",{la},{lb},abs{name},rel{name}"));
        }
        writeln!(w, "{header}")?;
        let scales: Vec<f64> = b.iter().map(|(_, col)| scale(col)).collect();
        for k in 0..self.steps + 1 {
            write!(w, "{:.14e}", k as f64 * grid_step(&self.integral))?;
            for (j, ((_, ca), (_, cb))) in a.iter().zip(&b).enumerate() {
                let gap = (ca[k] - cb[k]).abs();
                let rel = if scales[j] > 0.0 { gap / scales[j] } else { gap };
                write!(w, ",{:.14e},{:.14e},{:.14e},{:.14e}", ca[k], cb[k], gap, rel)?;
            }
            writeln!(w)?;
        }
        Ok(())
    }
}

fn grid_step(c: &Coefficients) -> f64 {
    match c {
        Coefficients::Cavity { a, .. } => a.grid.step(),
        Coefficients::TwoState(rs) => rs.grid.step(),
    }
}

fn scale(col: &[f64]) -> f64 {
    col.iter().fold(0.0, |m, v| m.max(v.abs()))
}

/// Runs both routes on the configured scenario.
pub fn compare_methods(cfg: &RunConfig) -> Result<ComparisonReport, RunError> {
    let k = kernel(cfg)?;
    compare_with_kernel(cfg, &k, None)
}

fn compare_with_kernel(cfg: &RunConfig, k: &Kernel, dump: Option<&Path>) -> Result<ComparisonReport, RunError> {
    let (integral, integral_seconds) = integral_route(cfg, k, dump)?;
    let (green, green_seconds) = green_route(cfg, k, dump)?;
    let gaps = integral
        .columns()
        .into_iter()
        .zip(green.columns())
        .map(|((name, ca), (_, cb))| {
            let max_abs = ca.iter().zip(cb).fold(0.0f64, |m, (x, y)| m.max((x - y).abs()));
            let s = scale(cb);
            Gap { name: name.to_string(), max_abs, max_rel: if s > 0.0 { max_abs / s } else { max_abs } }
        })
        .collect();
    Ok(ComparisonReport { integral, green, gaps, integral_seconds, green_seconds, steps: cfg.grid.steps() })
}

/// What a run produces.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Action {
    Coeffs,
    Propagate,
    Compare,
    Unravel,
}

/// Outcome of [`run`].
#[derive(Debug, Clone, Default)]
pub struct RunSummary {
    pub files: Vec<String>,
    pub lines: Vec<String>,
}

fn propagate_to(cfg: &RunConfig, coeffs: &Coefficients, dir: &Path, name: &str) -> Result<Trajectory<f64>, RunError> {
    let traj = propagate(&cfg.scenario, &coeffs.generator(cfg.scenario.omega0), &cfg.grid, PropagateOptions::default())?;
    traj.write_csv(create(dir, name)?)?;
    Ok(traj)
}

fn ensemble(cfg: &RunConfig) -> Result<EnsembleResult<f64>, RunError> {
    Ok(run_ensemble(&cfg.scenario, &cfg.grid, cfg.n_traj, cfg.seed, EnsembleOptions { omit_cross: cfg.omit_cross })?)
}

/// Executes `action` and writes its CSV files into `cfg.out_dir`.
pub fn run(cfg: &RunConfig, action: Action) -> Result<RunSummary, RunError> {
    let dir = cfg.out_dir.as_path();
    fs::create_dir_all(dir)?;
    let dump = cfg.dump_tables.then_some(dir);
    let mut out = RunSummary::default();
    let route = match action {
        Action::Compare => RouteKey::Both,
        Action::Unravel => RouteKey::Unravel,
        _ => cfg.route,
    };
    if route == RouteKey::Unravel {
        if action == Action::Coeffs {
            return Err(RunError::Config(crate::config::ConfigError::Invalid(
                "route = \"unravel\" has no coefficient tables; choose integral, green or both".into(),
            )));
        }
        let r = ensemble(cfg)?;
        r.write_csv(create(dir, "ensemble.csv")?)?;
        out.files.push("ensemble.csv".into());
        out.lines.push(format!("unravel: {} of {} trajectories used (seed {})", r.n_used, r.n_traj, r.seed));
        return Ok(out);
    }
    let k = kernel(cfg)?;
    let primary = match route {
        RouteKey::Integral => {
            let (c, secs) = integral_route(cfg, &k, dump)?;
            out.lines.push(format!("integral route: {secs:.3}s"));
            c
        }
        RouteKey::Green => {
            let (c, secs) = green_route(cfg, &k, dump)?;
            out.lines.push(format!("green route: {secs:.3}s"));
            c
        }
        RouteKey::Both => {
            let report = compare_with_kernel(cfg, &k, dump)?;
            report.write_csv(create(dir, "compare.csv")?)?;
            report.green.write(dir, "coeffs_green")?;
            out.files.extend(["compare.csv".to_string(), "coeffs_green.csv".to_string()]);
            out.lines.push(report.summary());
            if action == Action::Propagate {
                propagate_to(cfg, &report.green, dir, "observables_green.csv")?;
                out.files.push("observables_green.csv".into());
            }
            report.integral
        }
        RouteKey::Unravel => unreachable!(),
    };
    primary.write(dir, "coeffs")?;
    out.files.push("coeffs.csv".into());
    if matches!(primary, Coefficients::Cavity { drive: Some(_), .. }) {
        out.files.push("drive_coeffs.csv".into());
    }
    if action == Action::Propagate {
        let traj = propagate_to(cfg, &primary, dir, "observables.csv")?;
        out.files.push("observables.csv".into());
        out.lines.push(format!(
            "propagate: max trace drift {:.3e}, max hermiticity defect {:.3e}",
            traj.max_trace_drift, traj.max_hermiticity_defect
        ));
    }
    if dump.is_some() {
        out.lines.push("coefficient-function tables written".into());
    }
    Ok(out)
}
