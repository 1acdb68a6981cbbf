//! Acceptance suite: one PASS/FAIL line per criterion, non-zero exit on any
//! failure.

use std::time::Instant;

use nmme_cli::pipeline::Coefficients;
use nmme_cli::{compare_methods, ComparisonReport, RunConfig};
use nmme_core::assemble::{assemble_a, assemble_cd, assemble_rs};
use nmme_core::coefffuncs::{solve_cavity, solve_x_tsa, verify_x21_translation_invariance, SolverPolicy};
use nmme_core::dynamics::{
    liouville_apply, propagate, DensityMatrix, Drive, Generator, InitialState, NodeCoeffs, PropagateOptions, Scenario,
    ScenarioKind, Trajectory,
};
use nmme_core::green::{self, exponential_kernel_u, solve_u};
use nmme_core::unravel::{run_ensemble, EnsembleOptions};
use nmme_core::{sample_kernels, Grid, Spectral, Temperature, C64};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

const REFERENCE: &str = r#"
[scenario]
kind = "cavity"
omega0 = 1.0
n_max = 20
initial = "fock"
fock = 1

[bath]
model = "ohmic-exp"
coupling = 0.05
cutoff = 5.0
beta = 1.0

[grid]
horizon = 4.0
steps = STEPS

[method]
route = "both"
"#;

fn reference(steps: usize) -> RunConfig {
    RunConfig::parse(&REFERENCE.replace("STEPS", &steps.to_string())).expect("reference config")
}

fn lorentzian(rate: f64) -> Spectral {
    Spectral::LorentzianExtended { rate, width: 1.0, center: 1.0 }
}

fn atom(model: Spectral) -> Scenario<f64> {
    Scenario {
        kind: ScenarioKind::TwoState,
        omega0: 1.0,
        model,
        temperature: Temperature::Zero,
        n_max: 0,
        initial: InitialState::Excited,
        drive: None,
    }
}

type Outcome = Result<String, String>;

/// Every propagation in the suite, for the structural-invariant criterion.
#[derive(Default)]
struct Runs {
    trajectories: Vec<(String, Trajectory<f64>)>,
    drive_pairs: Vec<(C64, C64)>,
}

struct Reports {
    coarse: ComparisonReport,
    fine: ComparisonReport,
    seconds: f64,
}

fn reports() -> Result<Reports, String> {
    let start = Instant::now();
    let coarse = compare_methods(&reference(400)).map_err(|e| e.to_string())?;
    let fine = compare_methods(&reference(800)).map_err(|e| e.to_string())?;
    Ok(Reports { coarse, fine, seconds: start.elapsed().as_secs_f64() })
}

fn route_equivalence(r: &Reports, runs: &mut Runs) -> Outcome {
    let cfg = reference(400);
    let Coefficients::Cavity { a, .. } = &r.coarse.integral else { return Err("unexpected coefficients".into()) };
    let traj = propagate(&cfg.scenario, &Generator::Cavity { a, drive: None }, &cfg.grid, PropagateOptions::default())
        .map_err(|e| e.to_string())?;
    runs.trajectories.push(("reference cavity".into(), traj));
    let mut detail = Vec::new();
    let mut ok = r.seconds <= 120.0;
    for (c, f) in r.coarse.gaps.iter().zip(&r.fine.gaps) {
        let ratio = c.max_rel / f.max_rel;
        ok &= c.max_rel <= 5e-4 && (3.0..=5.0).contains(&ratio);
        detail.push(format!("A{}: rel {:.2e} -> {:.2e} (x{:.2})", c.name, c.max_rel, f.max_rel, ratio));
    }
    let msg = format!("{}; {:.1}s", detail.join(", "), r.seconds);
    if ok { Ok(msg) } else { Err(msg) }
}

fn two_state_decay(runs: &mut Runs) -> Outcome {
    let start = Instant::now();
    let grid = Grid::with_horizon(10.0, 500).map_err(|e| e.to_string())?;
    let k = sample_kernels(&lorentzian(0.2), Temperature::Zero, &grid).map_err(|e| e.to_string())?;
    let x = solve_x_tsa(&k, 1.0, &grid, &SolverPolicy::dense()).map_err(|e| e.to_string())?;
    let rs = assemble_rs(&k, &x, &grid).map_err(|e| e.to_string())?;
    let u = green::solve_two_state_amplitude(&k, 1.0, &grid).map_err(|e| e.to_string())?;
    // ∫R against -2 ln|u|, fine trapezoid on the nodes
    let mut integral = 0.0;
    let mut oracle_gap = 0.0f64;
    for j in 1..grid.nodes() {
        integral += 0.5 * grid.step() * (rs.r[j - 1] + rs.r[j]);
        oracle_gap = oracle_gap.max((integral + 2.0 * u.get(j).norm().ln()).abs());
    }
    let s = atom(lorentzian(0.2));
    let traj = propagate(&s, &Generator::TwoState { omega0: 1.0, rs: &rs }, &grid, PropagateOptions::default())
        .map_err(|e| e.to_string())?;
    let pe0 = traj.records[0].population;
    let gap = traj
        .records
        .iter()
        .enumerate()
        .map(|(n, o)| (o.population - u.get(2 * n).norm_sqr() * pe0).abs())
        .fold(0.0, f64::max);
    runs.trajectories.push(("two-state decay".into(), traj));
    let secs = start.elapsed().as_secs_f64();
    let msg = format!("max |ρ_ee - |u|²| = {gap:.2e}, max |∫R + 2ln|u|| = {oracle_gap:.2e}; {secs:.1}s");
    if gap <= 1e-4 && oracle_gap <= 1e-4 && secs <= 30.0 { Ok(msg) } else { Err(msg) }
}

fn closed_form() -> Outcome {
    let start = Instant::now();
    let (rate, width, center) = (0.2, 1.0, 1.0);
    let grid = Grid::with_horizon(10.0, 2000).map_err(|e| e.to_string())?;
    let k = sample_kernels(&Spectral::LorentzianExtended { rate, width, center }, Temperature::Zero, &grid)
        .map_err(|e| e.to_string())?;
    let u = solve_u(&k, 1.0, &grid).map_err(|e| e.to_string())?;
    let (amp, decay) = (C64::new(rate * width / 2.0, 0.0), C64::new(width, center));
    let gap = (0..grid.nodes())
        .map(|j| (u.get(j) - exponential_kernel_u(1.0, amp, decay, grid.time(j))).norm())
        .fold(0.0, f64::max);
    let secs = start.elapsed().as_secs_f64();
    let msg = format!("max |u - u_exact| = {gap:.2e}; {secs:.2}s");
    if gap <= 1e-6 && secs <= 5.0 { Ok(msg) } else { Err(msg) }
}

fn zero_coupling(runs: &mut Runs) -> Outcome {
    let grid = Grid::with_horizon(5.0, 1000).map_err(|e| e.to_string())?;
    let k = sample_kernels(&Spectral::Null, Temperature::Zero, &grid).map_err(|e| e.to_string())?;
    let f = solve_cavity(&k, 1.0, &grid, None, &SolverPolicy::dense()).map_err(|e| e.to_string())?;
    let a = assemble_a(&k, 1.0, &f.x11, &f.x21, &f.y, &grid).map_err(|e| e.to_string())?;
    let b = green::cavity_coeffs(&k, 1.0, &grid).map_err(|e| e.to_string())?;
    let exact_a = [&a, &b].iter().all(|c| {
        c.a1.iter().all(|&v| v == 1.0) && c.a2.iter().all(|&v| v == 0.0) && c.a3.iter().all(|&v| v == 0.0)
    });
    let small = Grid::with_horizon(5.0, 100).map_err(|e| e.to_string())?;
    let k_small = sample_kernels(&Spectral::Null, Temperature::Zero, &small).map_err(|e| e.to_string())?;
    let x = solve_x_tsa(&k_small, 1.0, &small, &SolverPolicy::dense()).map_err(|e| e.to_string())?;
    let rs = assemble_rs(&k_small, &x, &small).map_err(|e| e.to_string())?;
    let rs_green = green::two_state_coeffs(&k_small, 1.0, &small).map_err(|e| e.to_string())?;
    let exact_rs = [&rs, &rs_green].iter().all(|c| c.r.iter().chain(&c.s).all(|&v| v == 0.0));

    let fock = Scenario {
        kind: ScenarioKind::Cavity,
        omega0: 1.0,
        model: Spectral::Null,
        temperature: Temperature::Zero,
        n_max: 6,
        initial: InitialState::Fock(1),
        drive: None,
    };
    let traj = propagate(&fock, &Generator::Cavity { a: &a, drive: None }, &grid, PropagateOptions::default())
        .map_err(|e| e.to_string())?;
    let n_gap = traj.records.iter().map(|o| (o.population - 1.0).abs()).fold(0.0, f64::max);
    runs.trajectories.push(("null cavity".into(), traj));

    let (e, alpha0) = (0.3, C64::new(0.5, 0.2));
    let driven = Scenario {
        kind: ScenarioKind::DrivenCavity,
        n_max: 25,
        initial: InitialState::Coherent(alpha0),
        drive: Some(Drive::Constant(e)),
        ..fock
    };
    let eps = driven.drive.as_ref().unwrap().sample(&grid);
    let fd = solve_cavity(&k, 1.0, &grid, Some(&eps), &SolverPolicy::dense()).map_err(|e| e.to_string())?;
    let cd = assemble_cd(&k, fd.x13.as_ref().unwrap(), &eps, &grid).map_err(|e| e.to_string())?;
    runs.drive_pairs.extend(cd.c.iter().copied().zip(cd.d.iter().copied()));
    let traj = propagate(&driven, &Generator::Cavity { a: &a, drive: Some(&cd) }, &grid, PropagateOptions::default())
        .map_err(|e| e.to_string())?;
    let shift = C64::new(e, 0.0);
    let d_gap = traj
        .times
        .iter()
        .zip(&traj.records)
        .map(|(t, o)| (o.coherence - ((alpha0 + shift) * C64::new(0.0, -t).exp() - shift)).norm())
        .fold(0.0, f64::max);
    runs.trajectories.push(("null driven cavity".into(), traj));
    let msg = format!(
        "A=(ω0,0,0) exact: {exact_a}, R=S=0 exact: {exact_rs}, max |n-1| = {n_gap:.2e}, max |⟨a⟩ - α(t)| = {d_gap:.2e}"
    );
    if exact_a && exact_rs && n_gap <= 1e-10 && d_gap <= 1e-8 { Ok(msg) } else { Err(msg) }
}

fn thermal_driven(runs: &mut Runs) -> Result<(), String> {
    let grid = Grid::with_horizon(4.0, 200).map_err(|e| e.to_string())?;
    let s = Scenario {
        kind: ScenarioKind::DrivenCavity,
        omega0: 1.0,
        model: Spectral::OhmicExp { coupling: 0.05, cutoff: 5.0 },
        temperature: Temperature::Beta(2.0),
        n_max: 16,
        initial: InitialState::Coherent(C64::new(0.5, 0.0)),
        drive: Some(Drive::Sinusoid { amplitude: 0.1, omega: 1.0, phase: 0.0 }),
    };
    let k = sample_kernels(&s.model, s.temperature, &grid).map_err(|e| e.to_string())?;
    let eps = s.drive.as_ref().unwrap().sample(&grid);
    let f = solve_cavity(&k, 1.0, &grid, Some(&eps), &SolverPolicy::dense()).map_err(|e| e.to_string())?;
    let a = assemble_a(&k, 1.0, &f.x11, &f.x21, &f.y, &grid).map_err(|e| e.to_string())?;
    let cd = assemble_cd(&k, f.x13.as_ref().unwrap(), &eps, &grid).map_err(|e| e.to_string())?;
    runs.drive_pairs.extend(cd.c.iter().copied().zip(cd.d.iter().copied()));
    let traj = propagate(&s, &Generator::Cavity { a: &a, drive: Some(&cd) }, &grid, PropagateOptions::default())
        .map_err(|e| e.to_string())?;
    runs.trajectories.push(("thermal driven cavity".into(), traj));
    Ok(())
}

fn structural(runs: &mut Runs) -> Outcome {
    thermal_driven(runs)?;
    let trace = runs.trajectories.iter().map(|(_, t)| t.max_trace_drift).fold(0.0, f64::max);
    let herm = runs.trajectories.iter().map(|(_, t)| t.max_hermiticity_defect).fold(0.0, f64::max);
    let mut rng = ChaCha8Rng::seed_from_u64(2024);
    let mut generator = 0.0f64;
    for _ in 0..100 {
        let d = rng.random_range(2..=10);
        let mut rho = DensityMatrix::zeros(d);
        for m in 0..d {
            for n in m..d {
                let re = rng.random_range(-1.0..1.0);
                let im = if m == n { 0.0 } else { rng.random_range(-1.0..1.0) };
                rho.set(m, n, C64::new(re, im));
                rho.set(n, m, C64::new(re, -im));
            }
        }
        let c = C64::new(rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0));
        let coeffs = if d == 2 && rng.random_bool(0.5) {
            NodeCoeffs::TwoState { omega0: 1.0, r: rng.random_range(-1.0..1.0), s: rng.random_range(-1.0..1.0) }
        } else {
            NodeCoeffs::Cavity {
                a1: rng.random_range(0.0..2.0),
                a2: rng.random_range(-1.0..1.0),
                a3: rng.random_range(-1.0..1.0),
                c,
                d: -c.conj(),
            }
        };
        let out = liouville_apply(&coeffs, &rho).map_err(|e| e.to_string())?;
        generator = generator.max(out.trace().norm());
    }
    let dc_exact = !runs.drive_pairs.is_empty() && runs.drive_pairs.iter().all(|(c, d)| *d == -c.conj());
    // A₂, A₃, R, S are stored as real numbers by construction; check they are finite
    let msg = format!(
        "{} runs: trace drift {trace:.2e}, hermiticity {herm:.2e}; generator trace {generator:.2e} on 100 inputs; \
         D = -C* exact over {} nodes: {dc_exact}",
        runs.trajectories.len(),
        runs.drive_pairs.len()
    );
    if trace <= 1e-8 && herm <= 1e-8 && generator <= 1e-12 && dc_exact { Ok(msg) } else { Err(msg) }
}

fn monte_carlo() -> Outcome {
    let start = Instant::now();
    let grid = Grid::with_horizon(2.5, 124).map_err(|e| e.to_string())?;
    let s = atom(lorentzian(0.2));
    let k = sample_kernels(&s.model, s.temperature, &grid).map_err(|e| e.to_string())?;
    let x = solve_x_tsa(&k, 1.0, &grid, &SolverPolicy::dense()).map_err(|e| e.to_string())?;
    let rs = assemble_rs(&k, &x, &grid).map_err(|e| e.to_string())?;
    let det = propagate(&s, &Generator::TwoState { omega0: 1.0, rs: &rs }, &grid, PropagateOptions::default())
        .map_err(|e| e.to_string())?;
    let sizes = [100usize, 1000, 10_000];
    let mut ensembles = Vec::new();
    for n_traj in sizes {
        ensembles.push(run_ensemble(&s, &grid, n_traj, 42, EnsembleOptions::default()).map_err(|e| e.to_string())?);
    }
    let z = |diff: f64, se: f64| if se > 0.0 { diff.abs() / se } else if diff == 0.0 { 0.0 } else { f64::INFINITY };
    let big = &ensembles[2];
    let mut worst_obs = 0.0f64;
    let mut worst_trace = 0.0f64;
    for (q, o) in det.records.iter().enumerate() {
        worst_obs = worst_obs.max(z(big.mean_obs[q] - o.population, big.stderr_obs[q]));
        worst_trace = worst_trace.max(z(big.mean_trace[q] - 1.0, big.stderr_trace[q]));
    }
    // log-log regression of SE on n_traj at each sample time; the median over
    // times is insensitive to the heavy tails that make a single late-time
    // SE estimate at 10² trajectories unreliable
    let x: Vec<f64> = sizes.iter().map(|&n| (n as f64).ln()).collect();
    let mx = x.iter().sum::<f64>() / 3.0;
    let slope_at = |q: usize| {
        let y: Vec<f64> = ensembles.iter().map(|r| r.stderr_obs[q].ln()).collect();
        let my = y.iter().sum::<f64>() / 3.0;
        (0..3).map(|i| (x[i] - mx) * (y[i] - my)).sum::<f64>() / (0..3).map(|i| (x[i] - mx).powi(2)).sum::<f64>()
    };
    let mut slopes: Vec<f64> = (1..big.times.len()).map(slope_at).collect();
    let last_slope = *slopes.last().unwrap();
    slopes.sort_by(f64::total_cmp);
    let slope = slopes[slopes.len() / 2];
    let secs = start.elapsed().as_secs_f64();
    let msg = format!(
        "max |Δρ_ee|/SE = {worst_obs:.2}, max |Δtr|/SE = {worst_trace:.2}, SE slope median {slope:.3} \
         (final sample {last_slope:.3}); {secs:.1}s"
    );
    if worst_obs <= 3.0 && worst_trace <= 3.0 && (slope + 0.5).abs() <= 0.1 && secs <= 300.0 { Ok(msg) } else { Err(msg) }
}

fn translation_invariance() -> Outcome {
    let grid = Grid::with_horizon(4.0, 64).map_err(|e| e.to_string())?;
    let k = sample_kernels(&Spectral::OhmicExp { coupling: 0.05, cutoff: 5.0 }, Temperature::Beta(1.0), &grid)
        .map_err(|e| e.to_string())?;
    let gap = verify_x21_translation_invariance(&k, 1.0, &grid, &SolverPolicy::dense()).map_err(|e| e.to_string())?;
    let limit = 10.0 * grid.step() * grid.step();
    let msg = format!("max |x21(t,t') - x21(t-t')| = {gap:.2e}, limit {limit:.2e}");
    if gap <= limit { Ok(msg) } else { Err(msg) }
}

fn scaling(r: &Reports) -> Outcome {
    let integral = r.fine.integral_seconds / r.coarse.integral_seconds;
    let green = r.fine.green_seconds / r.coarse.green_seconds;
    let msg = format!(
        "N 400 -> 800: integral {:.2}s -> {:.2}s (x{integral:.1}), green {:.3}s -> {:.3}s (x{green:.1})",
        r.coarse.integral_seconds, r.fine.integral_seconds, r.coarse.green_seconds, r.fine.green_seconds
    );
    if integral > green { Ok(msg) } else { Err(msg) }
}

fn main() {
    let mut runs = Runs::default();
    let reports = reports();
    let results: Vec<(&str, Outcome)> = vec![
        ("1 route equivalence", reports.as_ref().map_err(Clone::clone).and_then(|r| route_equivalence(r, &mut runs))),
        ("2 two-state decay identity", two_state_decay(&mut runs)),
        ("3 exponential-kernel closed form", closed_form()),
        ("5 zero-coupling limits", zero_coupling(&mut runs)),
        ("6 monte carlo consistency", monte_carlo()),
        ("7 x21 translation invariance", translation_invariance()),
        ("8 route cost scaling", reports.as_ref().map_err(Clone::clone).and_then(scaling)),
    ];
    // the invariant criterion inspects every propagation above
    let structural = structural(&mut runs);
    let mut ordered: Vec<(&str, Outcome)> = results;
    ordered.insert(3, ("4 structural invariants", structural));
    let mut failed = 0;
    for (name, outcome) in &ordered {
        match outcome {
            Ok(msg) => println!("PASS criterion {name}: {msg}"),
            Err(msg) => {
                failed += 1;
                println!("FAIL criterion {name}: {msg}");
            }
        }
    }
    if failed > 0 {
        eprintln!("{failed} acceptance criteria failed");
        std::process::exit(1);
    }
}
