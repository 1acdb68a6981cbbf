//! Reduced density matrix propagation under the time-local master equations.
//!
//! Cavity (with optional drive):
//!
//! ```text
//! ρ̇ = [-iA₁ a†a + C a + D a†, ρ] + A₂(2aρa† - a†aρ - ρa†a)
//!     + A₃(a†ρa + aρa† - ½{a†a + aa†, ρ})
//! ```
//!
//! The `A₃` anticommutator is the symmetrized form of `a†aρ + ρaa†`; both
//! agree in the untruncated space, where `aa† = a†a + 1`, but only the
//! symmetric one keeps the generator Hermiticity-preserving once the Fock
//! space is cut at `n_max`.
//!
//! Two-state atom, basis `(|g⟩, |e⟩)`, `H_s = -ω₀σ_z/2`:
//!
//! ```text
//! ρ̇ = -i[H_s, ρ] - i(S/2)[σ⁺σ⁻, ρ] + R(σ⁻ρσ⁺ - ½{σ⁺σ⁻, ρ})
//! ```
//!
//! Both share one implementation: `σ⁻` is the truncated annihilation
//! operator of a two-level ladder.

use std::io::{self, Write};

use crate::assemble::{CavityCoeffs, DrivenCoeffs, TwoStateCoeffs};
use crate::error::{Error, Result};
use crate::grid::TimeGrid;
use crate::kernels::{SpectralModel, Temperature};
use crate::scalar::{cx, czero, Cx, Real};

/// Population of the top Fock level that counts as a truncation breach.
pub const TRUNCATION_LIMIT: f64 = 1e-6;
/// Trace drift that aborts a propagation.
pub const TRACE_DRIFT_LIMIT: f64 = 1e-6;

/// Square complex matrix in row-major order. Individual stochastic
/// trajectories need neither Hermiticity nor unit trace.
#[derive(Debug, Clone, PartialEq)]
pub struct DensityMatrix<T> {
    dim: usize,
    data: Vec<Cx<T>>,
}

impl<T: Real> DensityMatrix<T> {
    pub fn zeros(dim: usize) -> Self {
        Self { dim, data: vec![czero(); dim * dim] }
    }

    pub fn from_entries(dim: usize, data: Vec<Cx<T>>) -> Result<Self> {
        if data.len() != dim * dim {
            return Err(Error::DimensionMismatch { expected: dim * dim, found: data.len() });
        }
        Ok(Self { dim, data })
    }

    /// `|ψ⟩⟨ψ|`.
    pub fn pure(psi: &[Cx<T>]) -> Self {
        let d = psi.len();
        let mut out = Self::zeros(d);
        for m in 0..d {
            for n in 0..d {
                out.data[m * d + n] = psi[m] * psi[n].conj();
            }
        }
        out
    }

    /// `I/d`.
    pub fn maximally_mixed(dim: usize) -> Self {
        let mut out = Self::zeros(dim);
        let p = T::one() / T::from_usize_lossy(dim);
        for m in 0..dim {
            out.data[m * dim + m] = cx(p, T::zero());
        }
        out
    }

    #[inline]
    pub fn dim(&self) -> usize {
        self.dim
    }

    #[inline]
    pub fn get(&self, m: usize, n: usize) -> Cx<T> {
        self.data[m * self.dim + n]
    }

    #[inline]
    pub fn set(&mut self, m: usize, n: usize, v: Cx<T>) {
        self.data[m * self.dim + n] = v;
    }

    pub fn entries(&self) -> &[Cx<T>] {
        &self.data
    }

    pub fn trace(&self) -> Cx<T> {
        (0..self.dim).fold(czero(), |a, m| a + self.get(m, m))
    }

    /// `tr ρ²`.
    pub fn purity(&self) -> T {
        let d = self.dim;
        let mut acc = czero::<T>();
        for m in 0..d {
            for n in 0..d {
                acc += self.get(m, n) * self.get(n, m);
            }
        }
        acc.re
    }

    /// `max |ρ - ρ†|`.
    pub fn hermiticity_defect(&self) -> T {
        let d = self.dim;
        let mut worst = T::zero();
        for m in 0..d {
            for n in m..d {
                worst = worst.max((self.get(m, n) - self.get(n, m).conj()).norm());
            }
        }
        worst
    }

    pub fn dagger(&self) -> Self {
        let d = self.dim;
        let mut out = Self::zeros(d);
        for m in 0..d {
            for n in 0..d {
                out.data[n * d + m] = self.get(m, n).conj();
            }
        }
        out
    }

    pub fn is_finite(&self) -> bool {
        self.data.iter().all(|z| z.re.is_finite() && z.im.is_finite())
    }

    /// `self + s·other`.
    pub fn add_scaled(&self, s: Cx<T>, other: &Self) -> Self {
        debug_assert_eq!(self.dim, other.dim);
        Self { dim: self.dim, data: self.data.iter().zip(&other.data).map(|(a, b)| *a + *b * s).collect() }
    }

    pub(crate) fn axpy_mut(&mut self, s: Cx<T>, other: &Self) {
        for (a, b) in self.data.iter_mut().zip(&other.data) {
            *a += *b * s;
        }
    }
}

/// Ladder-operator products by index shifts on a `d`-level space with
/// `a|m⟩ = √m |m-1⟩` and `a†|d-1⟩ = 0`.
pub(crate) struct Ladder<T> {
    sq: Vec<T>,
}

impl<T: Real> Ladder<T> {
    pub(crate) fn new(dim: usize) -> Self {
        Self { sq: (0..=dim).map(|k| T::from_usize_lossy(k).sqrt()).collect() }
    }

    fn d(&self) -> usize {
        self.sq.len() - 1
    }

    /// `(aρ)_{mn} = √(m+1) ρ_{m+1,n}`.
    #[inline]
    pub(crate) fn a_rho(&self, r: &DensityMatrix<T>, m: usize, n: usize) -> Cx<T> {
        if m + 1 < self.d() { r.get(m + 1, n) * self.sq[m + 1] } else { czero() }
    }

    /// `(ρa)_{mn} = √n ρ_{m,n-1}`.
    #[inline]
    pub(crate) fn rho_a(&self, r: &DensityMatrix<T>, m: usize, n: usize) -> Cx<T> {
        if n >= 1 { r.get(m, n - 1) * self.sq[n] } else { czero() }
    }

    /// `(a†ρ)_{mn} = √m ρ_{m-1,n}`.
    #[inline]
    pub(crate) fn ad_rho(&self, r: &DensityMatrix<T>, m: usize, n: usize) -> Cx<T> {
        if m >= 1 { r.get(m - 1, n) * self.sq[m] } else { czero() }
    }

    /// `(ρa†)_{mn} = √(n+1) ρ_{m,n+1}`.
    #[inline]
    pub(crate) fn rho_ad(&self, r: &DensityMatrix<T>, m: usize, n: usize) -> Cx<T> {
        if n + 1 < self.d() { r.get(m, n + 1) * self.sq[n + 1] } else { czero() }
    }

    /// `(aρa†)_{mn}`.
    #[inline]
    fn a_rho_ad(&self, r: &DensityMatrix<T>, m: usize, n: usize) -> Cx<T> {
        if m + 1 < self.d() && n + 1 < self.d() {
            r.get(m + 1, n + 1) * (self.sq[m + 1] * self.sq[n + 1])
        } else {
            czero()
        }
    }

    /// `(a†ρa)_{mn}`.
    #[inline]
    fn ad_rho_a(&self, r: &DensityMatrix<T>, m: usize, n: usize) -> Cx<T> {
        if m >= 1 && n >= 1 { r.get(m - 1, n - 1) * (self.sq[m] * self.sq[n]) } else { czero() }
    }

    /// Diagonal of `aa†` in the truncated space.
    #[inline]
    fn aad(&self, m: usize) -> T {
        if m + 1 < self.d() { T::from_usize_lossy(m + 1) } else { T::zero() }
    }
}

/// Generator parameters in a common form: diagonal Hamiltonian `E`, drive
/// pair `(C, D)`, emission rate `γ` multiplying `2aρa† - {n,ρ}`, and thermal
/// rate `A₃`.
struct Params<'a, T> {
    energies: &'a [T],
    c: Cx<T>,
    d: Cx<T>,
    emission: T,
    thermal: T,
}

fn generator<T: Real>(p: &Params<'_, T>, ladder: &Ladder<T>, r: &DensityMatrix<T>) -> DensityMatrix<T> {
    let d = r.dim();
    let mut out = DensityMatrix::zeros(d);
    let two = T::lit(2.0);
    let half = T::lit(0.5);
    let has_drive = p.c != czero() || p.d != czero();
    for m in 0..d {
        let nm = T::from_usize_lossy(m);
        for n in 0..d {
            let nn = T::from_usize_lossy(n);
            let rho = r.get(m, n);
            let mut v = rho * cx(T::zero(), p.energies[n] - p.energies[m]);
            if has_drive {
                v += (ladder.a_rho(r, m, n) - ladder.rho_a(r, m, n)) * p.c;
                v += (ladder.ad_rho(r, m, n) - ladder.rho_ad(r, m, n)) * p.d;
            }
            if p.emission != T::zero() {
                v += (ladder.a_rho_ad(r, m, n) * two - rho * (nm + nn)) * p.emission;
            }
            if p.thermal != T::zero() {
                let anti = nm + nn + ladder.aad(m) + ladder.aad(n);
                v += (ladder.ad_rho_a(r, m, n) + ladder.a_rho_ad(r, m, n) - rho * (anti * half)) * p.thermal;
            }
            out.set(m, n, v);
        }
    }
    out
}

/// Master-equation coefficients at one node.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum NodeCoeffs<T> {
    Cavity { a1: T, a2: T, a3: T, c: Cx<T>, d: Cx<T> },
    TwoState { omega0: T, r: T, s: T },
}

/// Right-hand side `dρ/dt` of the master equation selected by `coeffs`.
pub fn liouville_apply<T: Real>(coeffs: &NodeCoeffs<T>, rho: &DensityMatrix<T>) -> Result<DensityMatrix<T>> {
    let d = rho.dim();
    let ladder = Ladder::new(d);
    match *coeffs {
        NodeCoeffs::Cavity { a1, a2, a3, c, d: dd } => {
            let energies: Vec<T> = (0..d).map(|m| a1 * T::from_usize_lossy(m)).collect();
            Ok(generator(&Params { energies: &energies, c, d: dd, emission: a2, thermal: a3 }, &ladder, rho))
        }
        NodeCoeffs::TwoState { omega0, r, s } => {
            if d != 2 {
                return Err(Error::DimensionMismatch { expected: 2, found: d });
            }
            let half = T::lit(0.5);
            let energies = [omega0 * half, -omega0 * half + s * half];
            let p = Params { energies: &energies, c: czero(), d: czero(), emission: r * half, thermal: T::zero() };
            Ok(generator(&p, &ladder, rho))
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ScenarioKind {
    Cavity,
    DrivenCavity,
    TwoState,
}

impl ScenarioKind {
    pub fn is_cavity(self) -> bool {
        !matches!(self, ScenarioKind::TwoState)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum InitialState<T> {
    Fock(usize),
    Coherent(Cx<T>),
    Excited,
    Ground,
    /// `cos(θ/2)|e⟩ + e^{iφ} sin(θ/2)|g⟩`.
    Bloch { theta: T, phi: T },
}

/// External field `ε(t)`.
#[derive(Debug, Clone, PartialEq)]
pub enum Drive<T> {
    Constant(T),
    /// `A·cos(ω_d t + φ)`.
    Sinusoid { amplitude: T, omega: T, phase: T },
    /// Linear interpolation, held constant beyond the samples.
    Tabulated { times: Vec<T>, values: Vec<T> },
}

impl<T: Real> Drive<T> {
    pub fn validate(&self) -> Result<()> {
        match self {
            Drive::Tabulated { times, values } => {
                if times.is_empty() || times.len() != values.len() {
                    return Err(Error::InvalidScenario("tabulated drive needs matching, non-empty columns".into()));
                }
                if times.windows(2).any(|w| !(w[1] > w[0])) {
                    return Err(Error::InvalidScenario("tabulated drive times must ascend".into()));
                }
                Ok(())
            }
            _ => Ok(()),
        }
    }

    pub fn value(&self, t: T) -> T {
        match self {
            Drive::Constant(e) => *e,
            Drive::Sinusoid { amplitude, omega, phase } => *amplitude * (*omega * t + *phase).cos(),
            Drive::Tabulated { times, values } => {
                let last = times.len() - 1;
                if t <= times[0] {
                    return values[0];
                }
                if t >= times[last] {
                    return values[last];
                }
                let k = times.partition_point(|&s| s <= t) - 1;
                let s = (t - times[k]) / (times[k + 1] - times[k]);
                values[k] + s * (values[k + 1] - values[k])
            }
        }
    }

    pub fn sample(&self, grid: &TimeGrid<T>) -> Vec<T> {
        grid.times().into_iter().map(|t| self.value(t)).collect()
    }
}

/// Physical setup of one run.
#[derive(Debug, Clone, PartialEq)]
pub struct Scenario<T> {
    pub kind: ScenarioKind,
    pub omega0: T,
    pub model: SpectralModel<T>,
    pub temperature: Temperature<T>,
    /// Fock cutoff for cavity kinds; ignored for the two-state atom.
    pub n_max: usize,
    pub initial: InitialState<T>,
    pub drive: Option<Drive<T>>,
}

impl<T: Real> Scenario<T> {
    pub fn dim(&self) -> usize {
        if self.kind.is_cavity() { self.n_max + 1 } else { 2 }
    }

    pub fn validate(&self) -> Result<()> {
        self.model.validate()?;
        let bad = |msg: String| Err(Error::InvalidScenario(msg));
        if !(self.omega0 > T::zero()) || !self.omega0.is_finite() {
            return bad(format!("ω₀ must be positive, got {}", self.omega0));
        }
        match self.kind {
            ScenarioKind::Cavity | ScenarioKind::DrivenCavity => {
                if self.n_max < 2 {
                    return bad(format!("n_max must be at least 2, got {}", self.n_max));
                }
                match &self.initial {
                    InitialState::Fock(n) if *n > self.n_max => {
                        return bad(format!("Fock state {n} exceeds n_max = {}", self.n_max))
                    }
                    InitialState::Coherent(alpha)
                        if alpha.norm_sqr() > T::from_usize_lossy(self.n_max) / T::lit(4.0) =>
                    {
                        return bad(format!("coherent |α|² = {} exceeds n_max/4", alpha.norm_sqr()))
                    }
                    InitialState::Fock(_) | InitialState::Coherent(_) => {}
                    other => return bad(format!("{other:?} is not a cavity state")),
                }
            }
            ScenarioKind::TwoState => {
                if !self.temperature.is_zero() {
                    return bad("the two-state atom decays into the vacuum; use zero temperature".into());
                }
                if matches!(self.initial, InitialState::Fock(_) | InitialState::Coherent(_)) {
                    return bad(format!("{:?} is not a two-state initial state", self.initial));
                }
            }
        }
        match (self.kind, &self.drive) {
            (ScenarioKind::DrivenCavity, None) => bad("driven cavity requires a drive".into()),
            (ScenarioKind::DrivenCavity, Some(d)) => d.validate(),
            (_, Some(_)) => bad("only the driven cavity takes a drive".into()),
            _ => Ok(()),
        }
    }

    pub fn initial_state(&self) -> DensityMatrix<T> {
        let d = self.dim();
        let mut psi = vec![czero::<T>(); d];
        match &self.initial {
            InitialState::Fock(n) => psi[*n] = cx(T::one(), T::zero()),
            InitialState::Coherent(alpha) => {
                let mut c = cx((-alpha.norm_sqr() / T::lit(2.0)).exp(), T::zero());
                for (n, slot) in psi.iter_mut().enumerate() {
                    if n > 0 {
                        c = c * *alpha / T::from_usize_lossy(n).sqrt();
                    }
                    *slot = c;
                }
                let norm = psi.iter().map(|z| z.norm_sqr()).sum::<T>().sqrt();
                for z in &mut psi {
                    *z /= norm;
                }
            }
            InitialState::Excited => psi[1] = cx(T::one(), T::zero()),
            InitialState::Ground => psi[0] = cx(T::one(), T::zero()),
            InitialState::Bloch { theta, phi } => {
                let half = *theta / T::lit(2.0);
                psi[1] = cx(half.cos(), T::zero());
                psi[0] = cx(phi.cos(), phi.sin()) * half.sin();
            }
        }
        DensityMatrix::pure(&psi)
    }
}

/// Coefficient tables driving a propagation.
#[derive(Debug, Clone, Copy)]
pub enum Generator<'a, T> {
    Cavity { a: &'a CavityCoeffs<T>, drive: Option<&'a DrivenCoeffs<T>> },
    TwoState { omega0: T, rs: &'a TwoStateCoeffs<T> },
}

impl<'a, T: Real> Generator<'a, T> {
    pub fn grid(&self) -> &TimeGrid<T> {
        match self {
            Generator::Cavity { a, .. } => &a.grid,
            Generator::TwoState { rs, .. } => &rs.grid,
        }
    }

    pub fn at(&self, k: usize) -> NodeCoeffs<T> {
        match self {
            Generator::Cavity { a, drive } => {
                let (c, d) = drive.map_or((czero(), czero()), |cd| (cd.c[k], cd.d[k]));
                NodeCoeffs::Cavity { a1: a.a1[k], a2: a.a2[k], a3: a.a3[k], c, d }
            }
            Generator::TwoState { omega0, rs } => NodeCoeffs::TwoState { omega0: *omega0, r: rs.r[k], s: rs.s[k] },
        }
    }
}

/// Observables of one state.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Observables<T> {
    pub trace: T,
    pub purity: T,
    /// `⟨a†a⟩` for the cavity, `ρ_ee` for the atom.
    pub population: T,
    /// `⟨a⟩` for the cavity, `ρ_eg` for the atom.
    pub coherence: Cx<T>,
}

pub fn observables<T: Real>(rho: &DensityMatrix<T>, kind: ScenarioKind) -> Observables<T> {
    let d = rho.dim();
    let (population, coherence) = if kind.is_cavity() {
        let n = (0..d).fold(T::zero(), |a, m| a + rho.get(m, m).re * T::from_usize_lossy(m));
        let coh = (0..d - 1).fold(czero(), |a, m| a + rho.get(m + 1, m) * T::from_usize_lossy(m + 1).sqrt());
        (n, coh)
    } else {
        (rho.get(1, 1).re, rho.get(1, 0))
    };
    Observables { trace: rho.trace().re, purity: rho.purity(), population, coherence }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Trajectory<T> {
    pub times: Vec<T>,
    pub records: Vec<Observables<T>>,
    pub snapshots: Option<Vec<DensityMatrix<T>>>,
    /// Largest `|tr ρ - 1|` seen.
    pub max_trace_drift: T,
    /// Largest `max |ρ - ρ†|` seen.
    pub max_hermiticity_defect: T,
}

impl<T: Real> Trajectory<T> {
    pub const HEADER: &'static str = "t,trace,purity,n_or_pe,re_coh,im_coh";

    pub fn write_csv<W: Write>(&self, mut w: W) -> io::Result<()> {
        writeln!(w, "{}", Self::HEADER)?;
        for (t, o) in self.times.iter().zip(&self.records) {
            writeln!(
                w,
                "{:.14e},{:.14e},{:.14e},{:.14e},{:.14e},{:.14e}",
                t.as_f64(),
                o.trace.as_f64(),
                o.purity.as_f64(),
                o.population.as_f64(),
                o.coherence.re.as_f64(),
                o.coherence.im.as_f64()
            )?;
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, Default)]
pub struct PropagateOptions {
    pub keep_snapshots: bool,
}

fn check_state<T: Real>(rho: &DensityMatrix<T>, kind: ScenarioKind, t: T) -> Result<()> {
    let drift = (rho.trace() - cx(T::one(), T::zero())).norm();
    if !(drift <= T::lit(TRACE_DRIFT_LIMIT)) {
        return Err(Error::TraceDrift { t: t.as_f64(), drift: drift.as_f64() });
    }
    if kind.is_cavity() {
        let top = rho.dim() - 1;
        let pop = rho.get(top, top).re;
        if pop > T::lit(TRUNCATION_LIMIT) {
            return Err(Error::TruncationBreach { t: t.as_f64(), population: pop.as_f64(), n_max: top });
        }
    }
    Ok(())
}

/// Classical RK4 with step `2h`, coefficients read at nodes `k, k+1, k+2`.
pub fn propagate<T: Real>(
    scenario: &Scenario<T>,
    generator: &Generator<'_, T>,
    grid: &TimeGrid<T>,
    options: PropagateOptions,
) -> Result<Trajectory<T>> {
    scenario.validate()?;
    generator.grid().ensure_same(grid)?;
    match (scenario.kind, generator) {
        (ScenarioKind::TwoState, Generator::TwoState { .. }) => {}
        (ScenarioKind::Cavity | ScenarioKind::DrivenCavity, Generator::Cavity { .. }) => {}
        _ => return Err(Error::InvalidScenario("coefficients do not match the scenario kind".into())),
    }
    let kind = scenario.kind;
    let h = grid.step();
    let mut rho = scenario.initial_state();
    check_state(&rho, kind, T::zero())?;
    let mut traj = Trajectory {
        times: Vec::with_capacity(grid.steps() / 2 + 1),
        records: Vec::with_capacity(grid.steps() / 2 + 1),
        snapshots: options.keep_snapshots.then(Vec::new),
        max_trace_drift: T::zero(),
        max_hermiticity_defect: T::zero(),
    };
    let record = |rho: &DensityMatrix<T>, t: T, traj: &mut Trajectory<T>| {
        let obs = observables(rho, kind);
        traj.max_trace_drift = traj.max_trace_drift.max((rho.trace() - cx(T::one(), T::zero())).norm());
        traj.max_hermiticity_defect = traj.max_hermiticity_defect.max(rho.hermiticity_defect());
        traj.times.push(t);
        traj.records.push(obs);
        if let Some(s) = traj.snapshots.as_mut() {
            s.push(rho.clone());
        }
    };
    record(&rho, T::zero(), &mut traj);
    let (hc, two_h) = (cx(h, T::zero()), cx(h + h, T::zero()));
    let sixth = cx((h + h) / T::lit(6.0), T::zero());
    let two = cx(T::lit(2.0), T::zero());
    let mut k = 0;
    while k + 2 <= grid.steps() {
        let (c0, c1, c2) = (generator.at(k), generator.at(k + 1), generator.at(k + 2));
        let k1 = liouville_apply(&c0, &rho)?;
        let k2 = liouville_apply(&c1, &rho.add_scaled(hc, &k1))?;
        let k3 = liouville_apply(&c1, &rho.add_scaled(hc, &k2))?;
        let k4 = liouville_apply(&c2, &rho.add_scaled(two_h, &k3))?;
        let mut incr = k1;
        incr.axpy_mut(two, &k2);
        incr.axpy_mut(two, &k3);
        incr.axpy_mut(cx(T::one(), T::zero()), &k4);
        rho.axpy_mut(sixth, &incr);
        k += 2;
        let t = grid.time(k);
        check_state(&rho, kind, t)?;
        record(&rho, t, &mut traj);
    }
    Ok(traj)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::assemble::Route;
    use proptest::prelude::*;

    fn random_hermitian(d: usize, seed: &[f64]) -> DensityMatrix<f64> {
        let mut r = DensityMatrix::zeros(d);
        let mut it = seed.iter().cycle();
        for m in 0..d {
            for n in m..d {
                let re = *it.next().unwrap();
                let im = if m == n { 0.0 } else { *it.next().unwrap() };
                r.set(m, n, cx(re, im));
                r.set(n, m, cx(re, -im));
            }
        }
        r
    }

    fn cavity(n_max: usize, initial: InitialState<f64>) -> Scenario<f64> {
        Scenario {
            kind: ScenarioKind::Cavity,
            omega0: 1.0,
            model: SpectralModel::Null,
            temperature: Temperature::Zero,
            n_max,
            initial,
            drive: None,
        }
    }

    #[test]
    fn vacuum_is_stationary_without_thermal_term() {
        let rho = cavity(5, InitialState::Fock(0)).initial_state();
        let c = NodeCoeffs::Cavity { a1: 1.0, a2: 0.3, a3: 0.0, c: czero(), d: czero() };
        let out = liouville_apply(&c, &rho).unwrap();
        assert!(out.entries().iter().all(|z| z.norm() == 0.0));
    }

    #[test]
    fn excited_state_decays_at_rate_r() {
        let mut rho = DensityMatrix::<f64>::zeros(2);
        rho.set(1, 1, cx(1.0, 0.0));
        let out = liouville_apply(&NodeCoeffs::TwoState { omega0: 1.0, r: 0.37, s: 0.2 }, &rho).unwrap();
        assert!((out.get(1, 1).re + 0.37).abs() < 1e-15);
        assert!((out.get(0, 0).re - 0.37).abs() < 1e-15);
        assert!(liouville_apply(&NodeCoeffs::TwoState { omega0: 1.0, r: 0.1, s: 0.0 }, &DensityMatrix::zeros(3))
            .is_err());
    }

    #[test]
    fn observables_of_simple_states() {
        let o = observables(&DensityMatrix::<f64>::maximally_mixed(4), ScenarioKind::Cavity);
        assert!((o.purity - 0.25).abs() < 1e-15);
        let mut e = DensityMatrix::zeros(2);
        e.set(1, 1, cx(1.0, 0.0));
        assert_eq!(observables(&e, ScenarioKind::TwoState).population, 1.0);
        let coh = cavity(20, InitialState::Coherent(cx(1.0, 0.0))).initial_state();
        let o = observables(&coh, ScenarioKind::Cavity);
        // direct series Σ n |c_n|² for |α|² = 1
        let mut c2 = (-1.0f64).exp();
        let (mut norm, mut n_mean): (f64, f64) = (c2, 0.0);
        for n in 1..=20 {
            c2 /= n as f64;
            norm += c2;
            n_mean += n as f64 * c2;
        }
        assert!((o.population - n_mean / norm).abs() < 1e-12);
        assert!((o.population - 1.0).abs() < 1e-8);
        assert!((o.coherence - cx(1.0, 0.0)).norm() < 1e-8);
    }

    #[test]
    fn bloch_state_orientation() {
        let s = Scenario {
            kind: ScenarioKind::TwoState,
            initial: InitialState::Bloch { theta: 0.0, phi: 0.3 },
            n_max: 0,
            ..cavity(2, InitialState::Fock(0))
        };
        assert_eq!(s.initial_state().get(1, 1).re, 1.0);
    }

    #[test]
    fn fock_state_is_stationary_without_coupling() {
        let s = cavity(4, InitialState::Fock(1));
        let g = TimeGrid::with_horizon(5.0, 100).unwrap();
        let a = CavityCoeffs { grid: g, route: Route::Integral, a1: vec![1.0; 101], a2: vec![0.0; 101], a3: vec![0.0; 101] };
        let t = propagate(&s, &Generator::Cavity { a: &a, drive: None }, &g, PropagateOptions::default()).unwrap();
        assert_eq!(t.times.len(), 51);
        assert!(t.records.iter().all(|o| (o.population - 1.0).abs() < 1e-10));
    }

    #[test]
    fn truncation_breach_is_reported() {
        let s = cavity(3, InitialState::Fock(2));
        let g = TimeGrid::with_horizon(2.0, 40).unwrap();
        // pure thermal pumping populates the top level
        let a = CavityCoeffs { grid: g, route: Route::Integral, a1: vec![1.0; 41], a2: vec![0.0; 41], a3: vec![0.5; 41] };
        let e = propagate(&s, &Generator::Cavity { a: &a, drive: None }, &g, PropagateOptions::default()).unwrap_err();
        assert!(matches!(e, Error::TruncationBreach { n_max: 3, .. }), "{e:?}");
    }

    #[test]
    fn invalid_scenarios() {
        assert!(cavity(1, InitialState::Fock(0)).validate().is_err());
        assert!(cavity(4, InitialState::Coherent(cx(1.5, 0.0))).validate().is_err());
        assert!(cavity(4, InitialState::Excited).validate().is_err());
        let mut s = cavity(4, InitialState::Fock(0));
        s.kind = ScenarioKind::DrivenCavity;
        assert!(s.validate().is_err());
        s.drive = Some(Drive::Constant(0.1));
        assert!(s.validate().is_ok());
    }

    #[test]
    fn drive_evaluation() {
        let d = Drive::Tabulated { times: vec![0.0, 1.0, 2.0], values: vec![0.0, 2.0, 0.0] };
        assert_eq!(d.value(0.5), 1.0);
        assert_eq!(d.value(5.0), 0.0);
        assert_eq!(d.value(-1.0), 0.0);
        let s = Drive::Sinusoid { amplitude: 2.0, omega: 1.0, phase: 0.0 };
        assert_eq!(s.value(0.0), 2.0);
    }

    proptest! {
        #[test]
        fn generator_preserves_hermiticity_and_trace(
            seed in proptest::collection::vec(-1.0f64..1.0, 60),
            a1 in 0.0f64..3.0, a2 in -0.5f64..0.5, a3 in -0.5f64..0.5,
            cr in -1.0f64..1.0, ci in -1.0f64..1.0,
        ) {
            let rho = random_hermitian(6, &seed);
            let c = cx(cr, ci);
            let coeffs = NodeCoeffs::Cavity { a1, a2, a3, c, d: -c.conj() };
            let out = liouville_apply(&coeffs, &rho).unwrap();
            prop_assert!(out.hermiticity_defect() <= 1e-12);
            prop_assert!(out.trace().norm() <= 1e-12);
            let rho2 = random_hermitian(2, &seed);
            let out2 = liouville_apply(&NodeCoeffs::TwoState { omega0: a1, r: a2, s: a3 }, &rho2).unwrap();
            prop_assert!(out2.hermiticity_defect() <= 1e-12);
            prop_assert!(out2.trace().norm() <= 1e-12);
        }
    }
}
