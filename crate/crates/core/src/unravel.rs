//! Monte Carlo integration of the stochastic Liouville equation.
//!
//! Each trajectory draws eight real white noises `ν_{nk}` (`n = 1..4`,
//! `k = 1, 2`) with variance `1/h` per sample, filters them through the
//! response kernels into the colored fields `ḡ₁, ḡ₂`, and advances a random
//! density matrix by Euler-Maruyama steps in the Itô sense. Couplings are
//! `f₁ = a`, `f₂ = a†` (`σ⁻`, `σ⁺` for the atom). The ensemble mean
//! approximates the reduced state.

use std::io::{self, Write};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use rayon::prelude::*;

use crate::dynamics::{DensityMatrix, Drive, Ladder, Scenario, ScenarioKind};
use crate::error::{Error, Result};
use crate::grid::TimeGrid;
use crate::kernels::{sample_kernels, ResponseKernel};
use crate::scalar::{cx, czero, pairwise_sum, Cx, Real};

/// Smallest admissible ensemble.
pub const MIN_TRAJECTORIES: usize = 100;
/// Largest tolerated fraction of diverged trajectories.
pub const EXCLUSION_BUDGET: f64 = 0.01;
/// Entry magnitude at which a trajectory counts as diverged.
pub const DIVERGENCE_LIMIT: f64 = 1e100;

/// White-noise samples `ν_{nk}[j]`, `j = 0..N-1`.
#[derive(Debug, Clone, PartialEq)]
pub struct NoisePath<T> {
    grid: TimeGrid<T>,
    /// `nu[k-1][n-1][j]`.
    nu: [[Vec<T>; 4]; 2],
}

impl<T: Real> NoisePath<T> {
    pub fn zeros(grid: &TimeGrid<T>) -> Self {
        let z = || vec![T::zero(); grid.steps()];
        Self { grid: *grid, nu: [[z(), z(), z(), z()], [z(), z(), z(), z()]] }
    }

    pub fn sample<R: Rng + ?Sized>(grid: &TimeGrid<T>, rng: &mut R) -> Self {
        let sd = T::one() / grid.step().sqrt();
        let mut path = Self::zeros(grid);
        for j in 0..grid.steps() {
            for k in 0..2 {
                for n in 0..4 {
                    let x: f64 = rng.sample(StandardNormal);
                    path.nu[k][n][j] = T::lit(x) * sd;
                }
            }
        }
        path
    }

    pub fn grid(&self) -> &TimeGrid<T> {
        &self.grid
    }

    /// `ν_{nk}` with the one-based indices used in the equations.
    pub fn channel(&self, n: usize, k: usize) -> &[T] {
        &self.nu[k - 1][n - 1]
    }

    pub fn channel_mut(&mut self, n: usize, k: usize) -> &mut [T] {
        &mut self.nu[k - 1][n - 1]
    }

    /// Wiener increments over step `j`.
    pub fn increments(&self, j: usize) -> Increments<T> {
        let h = self.grid.step();
        let at = |n: usize, k: usize| self.nu[k - 1][n - 1][j];
        let w1 = |k| cx(at(1, k), at(4, k)) * h;
        let w2 = |k| cx(at(2, k), at(3, k)) * h;
        Increments { dw1: [w1(1), w1(2)], dw2: [w2(1), w2(2)] }
    }
}

/// `ΔW₁k = (ν₁k + iν₄k)h`, `ΔW₂k = (ν₂k + iν₃k)h`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Increments<T> {
    pub dw1: [Cx<T>; 2],
    pub dw2: [Cx<T>; 2],
}

impl<T: Real> Increments<T> {
    pub fn zero() -> Self {
        Self { dw1: [czero(); 2], dw2: [czero(); 2] }
    }
}

/// Colored fields on every node:
///
/// ```text
/// ḡ₁[j] =  (i/2) Σ_{j'<j} h {α₁(t_j - t_j')(ν₂₂ + iν₃₂) - α₂(t_j - t_j')(iν₁₂ + ν₄₂)}
/// ḡ₂[j] = -(i/2) Σ_{j'<j} h {α₁*(t_j - t_j')(ν₂₁ + iν₃₁) + α₂*(t_j - t_j')(iν₁₁ + ν₄₁)}
/// ```
pub fn sample_gbar<T: Real>(
    kernel: &ResponseKernel<T>,
    noise: &NoisePath<T>,
    grid: &TimeGrid<T>,
) -> Result<(Vec<Cx<T>>, Vec<Cx<T>>)> {
    kernel.grid().ensure_same(grid)?;
    noise.grid().ensure_same(grid)?;
    let (a1, a2) = (kernel.a1(), kernel.a2());
    let h = grid.step();
    let n = grid.steps();
    let x1: Vec<Cx<T>> = (0..n).map(|j| cx(noise.nu[1][1][j], noise.nu[1][2][j])).collect();
    let y1: Vec<Cx<T>> = (0..n).map(|j| cx(noise.nu[1][3][j], noise.nu[1][0][j])).collect();
    let x2: Vec<Cx<T>> = (0..n).map(|j| cx(noise.nu[0][1][j], noise.nu[0][2][j])).collect();
    let y2: Vec<Cx<T>> = (0..n).map(|j| cx(noise.nu[0][3][j], noise.nu[0][0][j])).collect();
    let half_i = cx(T::zero(), h / T::lit(2.0));
    let mut g1 = vec![czero(); n + 1];
    let mut g2 = vec![czero(); n + 1];
    for j in 1..=n {
        let (mut s1, mut s2) = (czero::<T>(), czero::<T>());
        for jp in 0..j {
            let (k1, k2) = (a1[j - jp], a2[j - jp]);
            s1 += k1 * x1[jp] - k2 * y1[jp];
            s2 += k1.conj() * x2[jp] + k2.conj() * y2[jp];
        }
        g1[j] = half_i * s1;
        g2[j] = -half_i * s2;
    }
    Ok((g1, g2))
}

/// Bare system Hamiltonian of the stochastic equation.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum SystemHamiltonian<T> {
    /// `ω₀ a†a + ε (a + a†)`.
    Cavity { omega0: T, drive: T },
    /// `-ω₀ σ_z / 2` in the basis `(|g⟩, |e⟩)`.
    TwoState { omega0: T },
}

impl<T: Real> SystemHamiltonian<T> {
    fn energy(&self, m: usize) -> T {
        match *self {
            SystemHamiltonian::Cavity { omega0, .. } => omega0 * T::from_usize_lossy(m),
            SystemHamiltonian::TwoState { omega0 } => {
                let half = omega0 / T::lit(2.0);
                if m == 0 { half } else { -half }
            }
        }
    }

    fn drive(&self) -> T {
        match *self {
            SystemHamiltonian::Cavity { drive, .. } => drive,
            SystemHamiltonian::TwoState { .. } => T::zero(),
        }
    }
}

/// One Euler-Maruyama step
///
/// ```text
/// ρ' = ρ - ih[H + ḡ₁f₁ + ḡ₂f₂, ρ] - i Σ_k {(ΔW₁k/2)[f_k, ρ] + (i/2)ΔW₂k* {f_k, ρ}}
/// ```
///
/// With `omit_cross` the `ρf₁` and `f₂ρ` noise terms are dropped, which
/// leaves the zero-temperature atom's mean dynamics unchanged.
pub fn step_sde<T: Real>(
    system: &SystemHamiltonian<T>,
    rho: &DensityMatrix<T>,
    gbar: (Cx<T>, Cx<T>),
    inc: &Increments<T>,
    h: T,
    omit_cross: bool,
) -> DensityMatrix<T> {
    let d = rho.dim();
    let ladder = Ladder::new(d);
    let half = T::lit(0.5);
    let i = cx(T::zero(), T::one());
    let eps = cx(system.drive(), T::zero());
    let (c1, c2) = (gbar.0 + eps, gbar.1 + eps);
    let mut left = [czero::<T>(); 2];
    let mut right = [czero::<T>(); 2];
    for k in 0..2 {
        let anti = i * inc.dw2[k].conj() * half;
        left[k] = inc.dw1[k] * half + anti;
        right[k] = -inc.dw1[k] * half + anti;
    }
    if omit_cross {
        right[0] = czero();
        left[1] = czero();
    }
    let ih = i * h;
    let coef_a_rho = -(ih * c1) - i * left[0];
    let coef_rho_a = ih * c1 - i * right[0];
    let coef_ad_rho = -(ih * c2) - i * left[1];
    let coef_rho_ad = ih * c2 - i * right[1];
    let mut out = DensityMatrix::zeros(d);
    for m in 0..d {
        for n in 0..d {
            let r = rho.get(m, n);
            let mut v = r - ih * r * (system.energy(m) - system.energy(n));
            v += ladder.a_rho(rho, m, n) * coef_a_rho + ladder.rho_a(rho, m, n) * coef_rho_a;
            v += ladder.ad_rho(rho, m, n) * coef_ad_rho + ladder.rho_ad(rho, m, n) * coef_rho_ad;
            out.set(m, n, v);
        }
    }
    out
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub struct EnsembleOptions {
    /// Drop the `η₁₂`, `η₂₁` channels (zero-temperature atom only).
    pub omit_cross: bool,
}

/// Ensemble statistics at every second node.
#[derive(Debug, Clone, PartialEq)]
pub struct EnsembleResult<T> {
    pub times: Vec<T>,
    /// `⟨a†a⟩` for the cavity, `ρ_ee` for the atom.
    pub mean_obs: Vec<T>,
    pub stderr_obs: Vec<T>,
    pub mean_trace: Vec<T>,
    pub stderr_trace: Vec<T>,
    pub n_traj: usize,
    pub n_used: usize,
    pub seed: u64,
}

impl<T: Real> EnsembleResult<T> {
    pub const HEADER: &'static str = "t,mean_obs,stderr_obs,mean_trace,stderr_trace,n_used";

    pub fn excluded(&self) -> usize {
        self.n_traj - self.n_used
    }

    pub fn write_csv<W: Write>(&self, mut w: W) -> io::Result<()> {
        writeln!(w, "{}", Self::HEADER)?;
        for k in 0..self.times.len() {
            writeln!(
                w,
                "{:.14e},{:.14e},{:.14e},{:.14e},{:.14e},{}",
                self.times[k].as_f64(),
                self.mean_obs[k].as_f64(),
                self.stderr_obs[k].as_f64(),
                self.mean_trace[k].as_f64(),
                self.stderr_trace[k].as_f64(),
                self.n_used
            )?;
        }
        Ok(())
    }
}

fn sample_point<T: Real>(rho: &DensityMatrix<T>, kind: ScenarioKind) -> (T, T) {
    let d = rho.dim();
    let obs = if kind.is_cavity() {
        (0..d).fold(T::zero(), |a, m| a + rho.get(m, m).re * T::from_usize_lossy(m))
    } else {
        rho.get(1, 1).re
    };
    (obs, rho.trace().re)
}

fn diverged<T: Real>(rho: &DensityMatrix<T>) -> bool {
    let limit = T::lit(DIVERGENCE_LIMIT);
    rho.entries().iter().any(|z| !(z.re.abs() < limit && z.im.abs() < limit))
}

struct Run<'a, T> {
    kind: ScenarioKind,
    omega0: T,
    drive: Option<&'a Drive<T>>,
    kernel: &'a ResponseKernel<T>,
    grid: &'a TimeGrid<T>,
    initial: &'a DensityMatrix<T>,
    options: EnsembleOptions,
}

impl<T: Real> Run<'_, T> {
    /// Samples `(observable, trace)` at even nodes, or `None` on divergence.
    fn trajectory(&self, seed: u64, index: u64) -> Option<Vec<(T, T)>> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        rng.set_stream(index);
        let noise = NoisePath::sample(self.grid, &mut rng);
        let (g1, g2) = sample_gbar(self.kernel, &noise, self.grid).ok()?;
        let h = self.grid.step();
        let mut rho = self.initial.clone();
        let mut out = Vec::with_capacity(self.grid.steps() / 2 + 1);
        out.push(sample_point(&rho, self.kind));
        for j in 0..self.grid.steps() {
            let system = match self.kind {
                ScenarioKind::TwoState => SystemHamiltonian::TwoState { omega0: self.omega0 },
                _ => SystemHamiltonian::Cavity {
                    omega0: self.omega0,
                    drive: self.drive.map_or(T::zero(), |d| d.value(self.grid.time(j))),
                },
            };
            rho = step_sde(&system, &rho, (g1[j], g2[j]), &noise.increments(j), h, self.options.omit_cross);
            if diverged(&rho) {
                return None;
            }
            if (j + 1) % 2 == 0 {
                out.push(sample_point(&rho, self.kind));
            }
        }
        Some(out)
    }
}

/// Mean and standard error of the mean.
fn mean_stderr<T: Real>(xs: &[T]) -> (T, T) {
    let n = T::from_usize_lossy(xs.len());
    let mean = pairwise_sum(xs) / n;
    let dev: Vec<T> = xs.iter().map(|&x| (x - mean) * (x - mean)).collect();
    let var = pairwise_sum(&dev) / (n - T::one());
    (mean, (var / n).sqrt())
}

/// Runs `n_traj` independent trajectories on the current rayon pool.
/// Trajectory `i` draws from the ChaCha8 stream `i` of `seed`, and results
/// are reduced in index order, so the output does not depend on the thread
/// count.
pub fn run_ensemble<T: Real>(
    scenario: &Scenario<T>,
    grid: &TimeGrid<T>,
    n_traj: usize,
    seed: u64,
    options: EnsembleOptions,
) -> Result<EnsembleResult<T>> {
    scenario.validate()?;
    if n_traj < MIN_TRAJECTORIES {
        return Err(Error::InvalidScenario(format!("n_traj must be at least {MIN_TRAJECTORIES}, got {n_traj}")));
    }
    if options.omit_cross && !(scenario.kind == ScenarioKind::TwoState && scenario.temperature.is_zero()) {
        return Err(Error::InvalidScenario("channel omission applies to the zero-temperature atom only".into()));
    }
    let kernel = sample_kernels(&scenario.model, scenario.temperature, grid)?;
    let initial = scenario.initial_state();
    let run = Run {
        kind: scenario.kind,
        omega0: scenario.omega0,
        drive: scenario.drive.as_ref(),
        kernel: &kernel,
        grid,
        initial: &initial,
        options,
    };
    let paths: Vec<Option<Vec<(T, T)>>> =
        (0..n_traj as u64).into_par_iter().map(|i| run.trajectory(seed, i)).collect();
    let used: Vec<&Vec<(T, T)>> = paths.iter().flatten().collect();
    let excluded = n_traj - used.len();
    if excluded as f64 > EXCLUSION_BUDGET * n_traj as f64 || used.len() < 2 {
        return Err(Error::EnsembleDiverged { excluded, total: n_traj });
    }
    let samples = grid.steps() / 2 + 1;
    let mut result = EnsembleResult {
        times: (0..samples).map(|s| grid.time(2 * s)).collect(),
        mean_obs: Vec::with_capacity(samples),
        stderr_obs: Vec::with_capacity(samples),
        mean_trace: Vec::with_capacity(samples),
        stderr_trace: Vec::with_capacity(samples),
        n_traj,
        n_used: used.len(),
        seed,
    };
    let mut column = vec![T::zero(); used.len()];
    for s in 0..samples {
        for (slot, p) in column.iter_mut().zip(&used) {
            *slot = p[s].0;
        }
        let (m, e) = mean_stderr(&column);
        result.mean_obs.push(m);
        result.stderr_obs.push(e);
        for (slot, p) in column.iter_mut().zip(&used) {
            *slot = p[s].1;
        }
        let (m, e) = mean_stderr(&column);
        result.mean_trace.push(m);
        result.stderr_trace.push(e);
    }
    Ok(result)
}
