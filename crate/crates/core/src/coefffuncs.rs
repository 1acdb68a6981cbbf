//! Coefficient functions of the time-local master equations.
//!
//! Every two-variable equation solved here has, for a fixed outer time
//! `t = t_i`, the structure
//!
//! ```text
//! f(t') = g(t') + ∫_{t'}^{t} dt₁ e^{-iν(t₁-t')} ∫_0^{t₁} dt₂ κ(t₁-t₂) f(t₂)
//! ```
//!
//! with `ν = ω₀, κ = α₁` for `x₁₁`, `x₁₂`, `x₁₃` and `ν = -ω₀, κ = α` for
//! the two-state function `x`. Only the source `g` differs. After composite
//! trapezoid discretization each row is a dense linear system
//! `(I - K) f = g` over nodes `0..=i`.
//!
//! `x₂₁` depends on the time difference only and is solved in its
//! one-variable form by forward substitution.

use std::io::{self, Write};

use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::grid::{trapezoid_weight, TimeGrid};
use crate::kernels::ResponseKernel;
use crate::linalg::Lu;
use crate::scalar::{cis, cone, cx, czero, Cx, Real};

/// Lower-triangular table `f(t_i, t_j)`, `0 ≤ j ≤ i ≤ N`.
#[derive(Debug, Clone, PartialEq)]
pub struct TwoVarTable<T> {
    grid: TimeGrid<T>,
    data: Vec<Cx<T>>,
}

#[inline]
fn row_offset(i: usize) -> usize {
    i * (i + 1) / 2
}

impl<T: Real> TwoVarTable<T> {
    pub fn zeros(grid: TimeGrid<T>) -> Self {
        let n = grid.nodes();
        Self { grid, data: vec![czero(); row_offset(n)] }
    }

    /// Builds a table from rows; row `i` must hold `i + 1` entries.
    pub fn from_rows(grid: TimeGrid<T>, rows: Vec<Vec<Cx<T>>>) -> Result<Self> {
        if rows.len() != grid.nodes() {
            return Err(Error::DimensionMismatch { expected: grid.nodes(), found: rows.len() });
        }
        let mut data = Vec::with_capacity(row_offset(grid.nodes()));
        for (i, row) in rows.into_iter().enumerate() {
            if row.len() != i + 1 {
                return Err(Error::DimensionMismatch { expected: i + 1, found: row.len() });
            }
            data.extend(row);
        }
        Ok(Self { grid, data })
    }

    pub fn grid(&self) -> &TimeGrid<T> {
        &self.grid
    }

    /// `f(t_i, t_j)`. Panics when `j > i`.
    #[inline]
    pub fn get(&self, i: usize, j: usize) -> Cx<T> {
        assert!(j <= i, "two-variable table accessed above the diagonal ({i}, {j})");
        self.data[row_offset(i) + j]
    }

    #[inline]
    pub fn row(&self, i: usize) -> &[Cx<T>] {
        &self.data[row_offset(i)..row_offset(i) + i + 1]
    }

    pub fn rows(&self) -> impl Iterator<Item = &[Cx<T>]> + '_ {
        (0..self.grid.nodes()).map(move |i| self.row(i))
    }

    pub fn map(&self, f: impl Fn(Cx<T>) -> Cx<T>) -> Self {
        Self { grid: self.grid, data: self.data.iter().map(|&z| f(z)).collect() }
    }

    /// Elementwise conjugate.
    pub fn conj(&self) -> Self {
        self.map(|z| z.conj())
    }

    pub fn zip_with(&self, other: &Self, f: impl Fn(Cx<T>, Cx<T>) -> Cx<T>) -> Result<Self> {
        self.grid.ensure_same(&other.grid)?;
        let data = self.data.iter().zip(&other.data).map(|(&a, &b)| f(a, b)).collect();
        Ok(Self { grid: self.grid, data })
    }

    /// Max-norm of the elementwise difference.
    pub fn max_abs_diff(&self, other: &Self) -> Result<T> {
        self.grid.ensure_same(&other.grid)?;
        Ok(self.data.iter().zip(&other.data).fold(T::zero(), |m, (a, b)| m.max((*a - *b).norm())))
    }

    /// CSV with columns `i,j,t_i,t_j,re,im`.
    pub fn write_csv<W: Write>(&self, mut w: W) -> io::Result<()> {
        writeln!(w, "i,j,t_i,t_j,re,im")?;
        for i in 0..self.grid.nodes() {
            let ti = self.grid.time(i).as_f64();
            for (j, z) in self.row(i).iter().enumerate() {
                let tj = self.grid.time(j).as_f64();
                writeln!(w, "{i},{j},{ti:.14e},{tj:.14e},{:.14e},{:.14e}", z.re.as_f64(), z.im.as_f64())?;
            }
        }
        Ok(())
    }
}

/// One-variable table `g(s_k)`, `s_k = k·h`.
#[derive(Debug, Clone, PartialEq)]
pub struct OneVarTable<T> {
    grid: TimeGrid<T>,
    values: Vec<Cx<T>>,
}

impl<T: Real> OneVarTable<T> {
    pub fn new(grid: TimeGrid<T>, values: Vec<Cx<T>>) -> Result<Self> {
        if values.len() != grid.nodes() {
            return Err(Error::DimensionMismatch { expected: grid.nodes(), found: values.len() });
        }
        Ok(Self { grid, values })
    }

    pub fn grid(&self) -> &TimeGrid<T> {
        &self.grid
    }

    #[inline]
    pub fn get(&self, k: usize) -> Cx<T> {
        self.values[k]
    }

    pub fn values(&self) -> &[Cx<T>] {
        &self.values
    }

    /// CSV with columns `k,s,re,im`.
    pub fn write_csv<W: Write>(&self, mut w: W) -> io::Result<()> {
        writeln!(w, "k,s,re,im")?;
        for (k, z) in self.values.iter().enumerate() {
            let s = self.grid.time(k).as_f64();
            writeln!(w, "{k},{s:.14e},{:.14e},{:.14e}", z.re.as_f64(), z.im.as_f64())?;
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum SolveMethod {
    /// Direct LU solve of each row system.
    #[default]
    DenseCollocation,
    /// Relaxed fixed-point iteration `f ← (1-r)·f + r·(g + K f)`.
    Picard,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SolverPolicy<T> {
    pub method: SolveMethod,
    pub picard_tol: T,
    pub picard_max_iter: usize,
    pub relaxation: T,
}

impl<T: Real> Default for SolverPolicy<T> {
    fn default() -> Self {
        Self {
            method: SolveMethod::DenseCollocation,
            picard_tol: T::lit(1e-10),
            picard_max_iter: 200,
            relaxation: T::one(),
        }
    }
}

impl<T: Real> SolverPolicy<T> {
    pub fn dense() -> Self {
        Self::default()
    }

    pub fn picard() -> Self {
        Self { method: SolveMethod::Picard, ..Self::default() }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.picard_tol > T::zero()) {
            return Err(Error::InvalidScenario("picard tolerance must be positive".into()));
        }
        if self.picard_max_iter == 0 {
            return Err(Error::InvalidScenario("picard iteration budget must be positive".into()));
        }
        if !(self.relaxation > T::zero() && self.relaxation <= T::one()) {
            return Err(Error::InvalidScenario("relaxation must lie in (0, 1]".into()));
        }
        Ok(())
    }
}

/// Consecutive growing updates after which picard is declared divergent.
const DIVERGENCE_RUN: usize = 10;

/// Discretized integral operator of one row `i`.
struct RowOperator<'a, T> {
    h: T,
    i: usize,
    kernel: &'a [Cx<T>],
    /// `e^{-iν·h·d}` for `d = 0..=N`.
    lag_phase: &'a [Cx<T>],
}

impl<'a, T: Real> RowOperator<'a, T> {
    fn dim(&self) -> usize {
        self.i + 1
    }

    /// `q_j = Σ_{m=j}^{i} W^{(j,i)}_m e^{-iν(t_m - t_j)} q_m`.
    fn outer(&self, q: &[Cx<T>]) -> Vec<Cx<T>> {
        let i = self.i;
        (0..=i)
            .map(|j| {
                let mut acc = czero();
                for m in j..=i {
                    let w = trapezoid_weight(self.h, j, i, m);
                    acc += self.lag_phase[m - j] * q[m] * w;
                }
                acc
            })
            .collect()
    }

    /// `K f`, evaluated as a Volterra convolution followed by [`Self::outer`].
    fn apply(&self, f: &[Cx<T>]) -> Vec<Cx<T>> {
        let q: Vec<Cx<T>> = (0..=self.i)
            .map(|m| {
                let mut acc = czero();
                for l in 0..=m {
                    acc += self.kernel[m - l] * f[l] * trapezoid_weight(self.h, 0, m, l);
                }
                acc
            })
            .collect();
        self.outer(&q)
    }

    /// Row-major `K` in `O(n²)` via running column sums of
    /// `P_{m,l} = e^{-iνt_m} w^{(0,m)}_l κ(t_m - t_l)`.
    fn matrix(&self) -> Vec<Cx<T>> {
        let (h, i, n) = (self.h, self.i, self.dim());
        let half = h / T::lit(2.0);
        let phase = |m: usize| self.lag_phase[m];
        let p_row = |m: usize, out: &mut Vec<Cx<T>>| {
            out.clear();
            let ph = phase(m);
            out.extend((0..=m).map(|l| ph * self.kernel[m - l] * trapezoid_weight(h, 0, m, l)));
        };
        let mut k = vec![czero(); n * n];
        let mut p_top = Vec::with_capacity(n);
        p_row(i, &mut p_top);
        let mut acc = p_top.clone();
        let mut p = Vec::with_capacity(n);
        for j in (0..i).rev() {
            p_row(j, &mut p);
            // e^{+iνt_j}
            let back = phase(j).conj();
            let row = &mut k[j * n..(j + 1) * n];
            for l in 0..n {
                let own = if l <= j { p[l] * half } else { czero() };
                row[l] = back * (acc[l] * h + own - p_top[l] * half);
            }
            for l in 0..=j {
                acc[l] += p[l];
            }
        }
        k
    }
}

fn lag_phases<T: Real>(nu: T, grid: &TimeGrid<T>) -> Vec<Cx<T>> {
    (0..grid.nodes()).map(|d| cis(-nu * grid.time(d))).collect()
}

fn picard<T: Real>(k: &[Cx<T>], g: &[Cx<T>], policy: &SolverPolicy<T>, t: T) -> Result<Vec<Cx<T>>> {
    let n = g.len();
    let r = policy.relaxation;
    let keep = T::one() - r;
    let mut f = g.to_vec();
    let mut last = T::infinity();
    let mut growing = 0usize;
    for it in 1..=policy.picard_max_iter {
        let mut update = T::zero();
        let next: Vec<Cx<T>> = (0..n)
            .map(|j| {
                let row = &k[j * n..(j + 1) * n];
                let kf = row.iter().zip(&f).fold(czero(), |a, (x, y)| a + *x * *y);
                f[j] * keep + (g[j] + kf) * r
            })
            .collect();
        for (a, b) in next.iter().zip(&f) {
            update = update.max((*a - *b).norm());
        }
        f = next;
        if !update.is_finite() {
            return Err(Error::PicardDiverged { t: t.as_f64(), iterations: it, update: f64::INFINITY });
        }
        if update <= policy.picard_tol {
            return Ok(f);
        }
        growing = if update > last { growing + 1 } else { 0 };
        if growing >= DIVERGENCE_RUN {
            return Err(Error::PicardDiverged { t: t.as_f64(), iterations: it, update: update.as_f64() });
        }
        last = update;
    }
    Err(Error::PicardStalled { t: t.as_f64(), iterations: policy.picard_max_iter, update: last.as_f64() })
}

/// Solves `(I - K) f = g` for each source of one row.
fn solve_row<T: Real>(
    op: &RowOperator<'_, T>,
    sources: &[Vec<Cx<T>>],
    policy: &SolverPolicy<T>,
    t: T,
) -> Result<Vec<Vec<Cx<T>>>> {
    let n = op.dim();
    let k = op.matrix();
    match policy.method {
        SolveMethod::DenseCollocation => {
            let mut a: Vec<Cx<T>> = k.into_iter().map(|z| -z).collect();
            for d in 0..n {
                a[d * n + d] += cone();
            }
            let lu = Lu::factor(a, n).map_err(|_| Error::SingularSystem { t: t.as_f64() })?;
            Ok(sources.iter().map(|g| lu.solve(g)).collect())
        }
        SolveMethod::Picard => sources.iter().map(|g| picard(&k, g, policy, t)).collect(),
    }
}

/// Source family of a row system.
#[derive(Clone, Copy)]
enum Source<'a, T> {
    /// `e^{-iν(t_i - t_j)}`.
    Free,
    /// `-∫_{t'}^{t} dt₁ e^{-iω₀(t₁-t')} ∫_0^{t} dt₂ α₂(t₁-t₂) x₂₁(t-t₂)`.
    Thermal { x21: &'a OneVarTable<T> },
    /// `-2i ∫_{t'}^{t} dt₁ e^{-iω₀(t₁-t')} ε(t₁)`.
    Drive { eps: &'a [T] },
}

struct Problem<'a, T> {
    kernel: &'a ResponseKernel<T>,
    grid: TimeGrid<T>,
    kappa: &'a [Cx<T>],
    lag_phase: Vec<Cx<T>>,
}

impl<'a, T: Real> Problem<'a, T> {
    fn new(kernel: &'a ResponseKernel<T>, grid: &TimeGrid<T>, nu: T, kappa: &'a [Cx<T>]) -> Result<Self> {
        kernel.grid().ensure_same(grid)?;
        Ok(Self { kernel, grid: *grid, kappa, lag_phase: lag_phases(nu, grid) })
    }

    fn row(&self, i: usize) -> RowOperator<'_, T> {
        RowOperator { h: self.grid.step(), i, kernel: self.kappa, lag_phase: &self.lag_phase }
    }

    fn source(&self, op: &RowOperator<'_, T>, src: Source<'_, T>) -> Vec<Cx<T>> {
        let i = op.i;
        match src {
            Source::Free => (0..=i).map(|j| self.lag_phase[i - j]).collect(),
            Source::Thermal { x21 } => {
                let q: Vec<Cx<T>> = (0..=i)
                    .map(|m| {
                        let mut acc = czero();
                        for l in 0..=i {
                            let w = trapezoid_weight(self.grid.step(), 0, i, l);
                            acc += self.kernel.a2_lag(m as isize - l as isize) * x21.get(i - l) * w;
                        }
                        acc
                    })
                    .collect();
                op.outer(&q).into_iter().map(|z| -z).collect()
            }
            Source::Drive { eps } => {
                let q: Vec<Cx<T>> = eps[..=i].iter().map(|&e| cx(e, T::zero())).collect();
                let scale = cx(T::zero(), T::lit(-2.0));
                op.outer(&q).into_iter().map(|z| z * scale).collect()
            }
        }
    }

    /// Solves every row for each source; returns one table per source.
    fn solve(&self, sources: &[Source<'_, T>], policy: &SolverPolicy<T>) -> Result<Vec<TwoVarTable<T>>> {
        policy.validate()?;
        let rows: Vec<Vec<Vec<Cx<T>>>> = (0..self.grid.nodes())
            .into_par_iter()
            .map(|i| {
                let op = self.row(i);
                let g: Vec<Vec<Cx<T>>> = sources.iter().map(|&s| self.source(&op, s)).collect();
                solve_row(&op, &g, policy, self.grid.time(i))
            })
            .collect::<Result<_>>()?;
        let mut per_source: Vec<Vec<Vec<Cx<T>>>> = vec![Vec::with_capacity(rows.len()); sources.len()];
        for row in rows {
            for (s, f) in row.into_iter().enumerate() {
                per_source[s].push(f);
            }
        }
        per_source.into_iter().map(|r| TwoVarTable::from_rows(self.grid, r)).collect()
    }

    /// Max over all entries of `|f - g - K f|`.
    fn residual(&self, table: &TwoVarTable<T>, src: Source<'_, T>) -> Result<T> {
        self.grid.ensure_same(table.grid())?;
        let worst = (0..self.grid.nodes())
            .into_par_iter()
            .map(|i| {
                let op = self.row(i);
                let f = table.row(i);
                let g = self.source(&op, src);
                let kf = op.apply(f);
                (0..=i).fold(T::zero(), |m, j| m.max((f[j] - g[j] - kf[j]).norm()))
            })
            .reduce(T::zero, |a, b| a.max(b));
        Ok(worst)
    }
}

fn check_drive<T: Real>(drive: &[T], grid: &TimeGrid<T>) -> Result<()> {
    if drive.len() != grid.nodes() {
        return Err(Error::DimensionMismatch { expected: grid.nodes(), found: drive.len() });
    }
    Ok(())
}

fn check_x21<T: Real>(x21: &OneVarTable<T>, grid: &TimeGrid<T>) -> Result<()> {
    grid.ensure_same(x21.grid())
}

/// `x₁₁(t, t')`.
pub fn solve_x11<T: Real>(
    kernel: &ResponseKernel<T>,
    omega0: T,
    grid: &TimeGrid<T>,
    policy: &SolverPolicy<T>,
) -> Result<TwoVarTable<T>> {
    let p = Problem::new(kernel, grid, omega0, kernel.a1())?;
    Ok(p.solve(&[Source::Free], policy)?.remove(0))
}

/// `x₂₁(s)` from its translation-invariant form
///
/// ```text
/// x₂₁(s) = e^{-iω₀s} - ∫_0^s dt₁ ∫_{t₁}^s dt₂ e^{-iω₀t₁} α₁*(t₂-t₁) x₂₁(s-t₂)
/// ```
///
/// The discrete system is triangular, so forward substitution is exact and
/// the policy is only validated.
pub fn solve_x21<T: Real>(
    kernel: &ResponseKernel<T>,
    omega0: T,
    grid: &TimeGrid<T>,
    policy: &SolverPolicy<T>,
) -> Result<OneVarTable<T>> {
    kernel.grid().ensure_same(grid)?;
    policy.validate()?;
    let h = grid.step();
    let a1c: Vec<Cx<T>> = kernel.a1().iter().map(|z| z.conj()).collect();
    let phase = lag_phases(omega0, grid);
    let quarter = h * h / T::lit(4.0);
    let mut x: Vec<Cx<T>> = Vec::with_capacity(grid.nodes());
    x.push(cone());
    for k in 1..grid.nodes() {
        let mut s = czero();
        for a in 0..=k {
            let mut inner = czero();
            let first = if a == 0 { 1 } else { a };
            for b in first..=k {
                inner += a1c[b - a] * x[k - b] * trapezoid_weight(h, a, k, b);
            }
            s += phase[a] * inner * trapezoid_weight(h, 0, k, a);
        }
        let diag = cone::<T>() + a1c[0] * quarter;
        if !(diag.norm() > T::epsilon()) {
            return Err(Error::SingularSystem { t: grid.time(k).as_f64() });
        }
        x.push((phase[k] - s) / diag);
    }
    OneVarTable::new(*grid, x)
}

/// Residual of the discretized one-variable `x₂₁` equation.
pub fn residual_x21<T: Real>(kernel: &ResponseKernel<T>, omega0: T, x21: &OneVarTable<T>) -> Result<T> {
    let grid = *kernel.grid();
    check_x21(x21, &grid)?;
    let h = grid.step();
    let phase = lag_phases(omega0, &grid);
    let x = x21.values();
    let mut worst = T::zero();
    for k in 0..grid.nodes() {
        let mut s = czero();
        for a in 0..=k {
            let mut inner = czero();
            for b in a..=k {
                inner += kernel.a1()[b - a].conj() * x[k - b] * trapezoid_weight(h, a, k, b);
            }
            s += phase[a] * inner * trapezoid_weight(h, 0, k, a);
        }
        worst = worst.max((x[k] - phase[k] + s).norm());
    }
    Ok(worst)
}

/// Solves the two-variable form of the `x₂₁` equation
///
/// ```text
/// x₂₁(t,t') = e^{-iω₀(t-t')} - ∫_{t'}^t dt₁ ∫_{t₁}^t dt₂ e^{-iω₀(t₁-t')} α₁*(t₂-t₁) x₂₁(t,t₂)
/// ```
///
/// by dense collocation and returns `max |x₂₁(t_i,t_j) - x₂₁(t_i - t_j)|`
/// against the one-variable solution. Limited to `N ≤ 100`.
pub fn verify_x21_translation_invariance<T: Real>(
    kernel: &ResponseKernel<T>,
    omega0: T,
    grid: &TimeGrid<T>,
    policy: &SolverPolicy<T>,
) -> Result<T> {
    if grid.steps() > 100 {
        return Err(Error::InvalidGrid(format!(
            "translation-invariance check is limited to N ≤ 100, got {}",
            grid.steps()
        )));
    }
    let x1d = solve_x21(kernel, omega0, grid, policy)?;
    let h = grid.step();
    let phase = lag_phases(omega0, grid);
    let a1c: Vec<Cx<T>> = kernel.a1().iter().map(|z| z.conj()).collect();
    let mut worst = T::zero();
    for i in 0..grid.nodes() {
        let n = i + 1;
        let mut a = vec![czero(); n * n];
        for j in 0..n {
            a[j * n + j] += cone();
            for m in j..n {
                let wm = trapezoid_weight(h, j, i, m) ;
                if wm == T::zero() {
                    continue;
                }
                let outer = phase[m - j] * wm;
                for b in m..n {
                    a[j * n + b] += outer * a1c[b - m] * trapezoid_weight(h, m, i, b);
                }
            }
        }
        let g: Vec<Cx<T>> = (0..n).map(|j| phase[i - j]).collect();
        let lu = Lu::factor(a, n).map_err(|_| Error::SingularSystem { t: grid.time(i).as_f64() })?;
        let f = lu.solve(&g);
        for (j, fj) in f.iter().enumerate() {
            worst = worst.max((*fj - x1d.get(i - j)).norm());
        }
    }
    Ok(worst)
}

/// `x₁₂(t, t')`; its source runs the inner integral over the full `[0, t]`,
/// so `α₂` is needed at negative lags.
pub fn solve_x12<T: Real>(
    kernel: &ResponseKernel<T>,
    omega0: T,
    grid: &TimeGrid<T>,
    x21: &OneVarTable<T>,
    policy: &SolverPolicy<T>,
) -> Result<TwoVarTable<T>> {
    check_x21(x21, grid)?;
    let p = Problem::new(kernel, grid, omega0, kernel.a1())?;
    Ok(p.solve(&[Source::Thermal { x21 }], policy)?.remove(0))
}

/// `y = x₁₁ + x₁₂`.
pub fn compute_y<T: Real>(x11: &TwoVarTable<T>, x12: &TwoVarTable<T>) -> Result<TwoVarTable<T>> {
    x11.zip_with(x12, |a, b| a + b)
}

/// `x₁₃(t, t')` for a drive sampled at the grid nodes.
pub fn solve_x13<T: Real>(
    kernel: &ResponseKernel<T>,
    omega0: T,
    drive: &[T],
    grid: &TimeGrid<T>,
    policy: &SolverPolicy<T>,
) -> Result<TwoVarTable<T>> {
    check_drive(drive, grid)?;
    let p = Problem::new(kernel, grid, omega0, kernel.a1())?;
    Ok(p.solve(&[Source::Drive { eps: drive }], policy)?.remove(0))
}

/// Two-state function `x(t, t')`, discretized with the exponents as
/// printed for it:
///
/// ```text
/// x(t,t') = e^{-iω₀(t'-t)} + ∫_{t'}^t dt₁ ∫_0^{t₁} dt₂ e^{-iω₀(t'-t₁)} α(t₁-t₂) x(t,t₂)
/// ```
pub fn solve_x_tsa<T: Real>(
    kernel: &ResponseKernel<T>,
    omega0: T,
    grid: &TimeGrid<T>,
    policy: &SolverPolicy<T>,
) -> Result<TwoVarTable<T>> {
    if !kernel.is_zero_temperature() {
        return Err(Error::NotZeroTemperature);
    }
    let p = Problem::new(kernel, grid, -omega0, kernel.a1())?;
    Ok(p.solve(&[Source::Free], policy)?.remove(0))
}

/// All cavity coefficient functions from one factorization per row.
#[derive(Debug, Clone)]
pub struct CavityFunctions<T> {
    pub x11: TwoVarTable<T>,
    pub x21: OneVarTable<T>,
    pub x12: TwoVarTable<T>,
    pub y: TwoVarTable<T>,
    pub x13: Option<TwoVarTable<T>>,
}

pub fn solve_cavity<T: Real>(
    kernel: &ResponseKernel<T>,
    omega0: T,
    grid: &TimeGrid<T>,
    drive: Option<&[T]>,
    policy: &SolverPolicy<T>,
) -> Result<CavityFunctions<T>> {
    if let Some(d) = drive {
        check_drive(d, grid)?;
    }
    let x21 = solve_x21(kernel, omega0, grid, policy)?;
    let p = Problem::new(kernel, grid, omega0, kernel.a1())?;
    let mut sources = vec![Source::Free, Source::Thermal { x21: &x21 }];
    if let Some(eps) = drive {
        sources.push(Source::Drive { eps });
    }
    let mut tables = p.solve(&sources, policy)?.into_iter();
    let x11 = tables.next().expect("x11 table");
    let x12 = tables.next().expect("x12 table");
    let x13 = tables.next();
    let y = compute_y(&x11, &x12)?;
    Ok(CavityFunctions { x11, x21, x12, y, x13 })
}

/// Residual of the discretized `x₁₁` equation.
pub fn residual_x11<T: Real>(kernel: &ResponseKernel<T>, omega0: T, x11: &TwoVarTable<T>) -> Result<T> {
    Problem::new(kernel, kernel.grid(), omega0, kernel.a1())?.residual(x11, Source::Free)
}

pub fn residual_x12<T: Real>(
    kernel: &ResponseKernel<T>,
    omega0: T,
    x21: &OneVarTable<T>,
    x12: &TwoVarTable<T>,
) -> Result<T> {
    check_x21(x21, kernel.grid())?;
    Problem::new(kernel, kernel.grid(), omega0, kernel.a1())?.residual(x12, Source::Thermal { x21 })
}

pub fn residual_x13<T: Real>(
    kernel: &ResponseKernel<T>,
    omega0: T,
    drive: &[T],
    x13: &TwoVarTable<T>,
) -> Result<T> {
    check_drive(drive, kernel.grid())?;
    Problem::new(kernel, kernel.grid(), omega0, kernel.a1())?.residual(x13, Source::Drive { eps: drive })
}

pub fn residual_x_tsa<T: Real>(kernel: &ResponseKernel<T>, omega0: T, x: &TwoVarTable<T>) -> Result<T> {
    Problem::new(kernel, kernel.grid(), -omega0, kernel.a1())?.residual(x, Source::Free)
}
