//! Master-equation coefficients from coefficient-function tables.
//!
//! All integrals over `[0, t_i]` use the same composite trapezoid weights as
//! the solvers, so integral-route and Green-route coefficients differ only
//! through their tables.

use std::io::{self, Write};

use crate::coefffuncs::{OneVarTable, TwoVarTable};
use crate::error::{Error, Result};
use crate::grid::{trapezoid_weight, TimeGrid};
use crate::kernels::ResponseKernel;
use crate::scalar::{cx, czero, Cx, Real};

/// Which construction produced a cavity series.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Route {
    /// Integral equations; columns `A1..A3`.
    Integral,
    /// Green's functions; columns `B1..B3`.
    Green,
}

/// Cavity coefficients: frequency `A₁`, dissipation `A₂`, fluctuation `A₃`.
#[derive(Debug, Clone, PartialEq)]
pub struct CavityCoeffs<T> {
    pub grid: TimeGrid<T>,
    pub route: Route,
    pub a1: Vec<T>,
    pub a2: Vec<T>,
    pub a3: Vec<T>,
}

/// Drive coefficients `C(t)` and `D(t)` of the driven cavity.
#[derive(Debug, Clone, PartialEq)]
pub struct DrivenCoeffs<T> {
    pub grid: TimeGrid<T>,
    pub c: Vec<Cx<T>>,
    pub d: Vec<Cx<T>>,
}

/// Two-state decay rate `R(t)` and shift `S(t)`.
#[derive(Debug, Clone, PartialEq)]
pub struct TwoStateCoeffs<T> {
    pub grid: TimeGrid<T>,
    pub r: Vec<T>,
    pub s: Vec<T>,
}

fn write_rows<T: Real, W: Write>(
    mut w: W,
    header: &str,
    grid: &TimeGrid<T>,
    row: impl Fn(usize) -> Vec<T>,
) -> io::Result<()> {
    writeln!(w, "{header}")?;
    for k in 0..grid.nodes() {
        write!(w, "{:.14e}", grid.time(k).as_f64())?;
        for v in row(k) {
            write!(w, ",{:.14e}", v.as_f64())?;
        }
        writeln!(w)?;
    }
    Ok(())
}

impl<T: Real> CavityCoeffs<T> {
    pub fn header(&self) -> &'static str {
        match self.route {
            Route::Integral => "t,A1,A2,A3",
            Route::Green => "t,B1,B2,B3",
        }
    }

    /// `(A₁, A₂, A₃)` at node `k`.
    #[inline]
    pub fn at(&self, k: usize) -> [T; 3] {
        [self.a1[k], self.a2[k], self.a3[k]]
    }

    pub fn column(&self, j: usize) -> &[T] {
        match j {
            0 => &self.a1,
            1 => &self.a2,
            2 => &self.a3,
            _ => panic!("cavity coefficient index {j} out of range"),
        }
    }

    pub fn write_csv<W: Write>(&self, w: W) -> io::Result<()> {
        write_rows(w, self.header(), &self.grid, |k| self.at(k).to_vec())
    }
}

impl<T: Real> DrivenCoeffs<T> {
    pub fn header(&self) -> &'static str {
        "t,ReC,ImC,ReD,ImD"
    }

    pub fn write_csv<W: Write>(&self, w: W) -> io::Result<()> {
        write_rows(w, self.header(), &self.grid, |k| {
            vec![self.c[k].re, self.c[k].im, self.d[k].re, self.d[k].im]
        })
    }

    /// Zero drive coefficients, as for an undriven cavity.
    pub fn zeros(grid: TimeGrid<T>) -> Self {
        Self { grid, c: vec![czero(); grid.nodes()], d: vec![czero(); grid.nodes()] }
    }
}

impl<T: Real> TwoStateCoeffs<T> {
    pub fn header(&self) -> &'static str {
        "t,R,S"
    }

    pub fn write_csv<W: Write>(&self, w: W) -> io::Result<()> {
        write_rows(w, self.header(), &self.grid, |k| vec![self.r[k], self.s[k]])
    }
}

/// `Σ_l W^{(0,i)}_l g(l)`.
#[inline]
fn trapezoid_sum<T: Real>(h: T, i: usize, g: impl Fn(usize) -> Cx<T>) -> Cx<T> {
    let mut acc = czero();
    for l in 0..=i {
        acc += g(l) * trapezoid_weight(h, 0, i, l);
    }
    acc
}

/// Cavity coefficients from the conjugated tables
/// `p(i,l) = x₁₁*(t_i,t_l)`, `q(s) = x₂₁*(s)`, `r(i,l) = y*(t_i,t_l)`.
pub(crate) fn cavity_coefficients<T: Real>(
    kernel: &ResponseKernel<T>,
    omega0: T,
    route: Route,
    p: impl Fn(usize, usize) -> Cx<T> + Sync,
    q: impl Fn(usize) -> Cx<T> + Sync,
    r: impl Fn(usize, usize) -> Cx<T> + Sync,
) -> CavityCoeffs<T> {
    let grid = *kernel.grid();
    let h = grid.step();
    let (a1s, a2s) = (kernel.a1(), kernel.a2());
    let mut out = CavityCoeffs {
        grid,
        route,
        a1: Vec::with_capacity(grid.nodes()),
        a2: Vec::with_capacity(grid.nodes()),
        a3: Vec::with_capacity(grid.nodes()),
    };
    for i in 0..grid.nodes() {
        let i1 = trapezoid_sum(h, i, |l| a1s[i - l].conj() * p(i, l));
        let fluct = trapezoid_sum(h, i, |l| a2s[i - l].conj() * q(i - l));
        let yterm = trapezoid_sum(h, i, |l| a1s[i - l].conj() * r(i, l));
        out.a1.push(omega0 + i1.im);
        out.a2.push(i1.re);
        out.a3.push(fluct.re - yterm.re);
    }
    out
}

fn check_tables<T: Real>(grid: &TimeGrid<T>, kernel: &ResponseKernel<T>, tables: &[&TimeGrid<T>]) -> Result<()> {
    kernel.grid().ensure_same(grid)?;
    tables.iter().try_for_each(|g| grid.ensure_same(g))
}

/// `A₁ = ω₀ + Im I`, `A₂ = Re I` with `I = ∫_0^t α₁*(t-t') x₁₁*(t,t') dt'`, and
/// `A₃ = Re ∫ α₂*(t-t') x₂₁*(t-t') dt' - Re ∫ α₁*(t-t') y*(t,t') dt'`.
pub fn assemble_a<T: Real>(
    kernel: &ResponseKernel<T>,
    omega0: T,
    x11: &TwoVarTable<T>,
    x21: &OneVarTable<T>,
    y: &TwoVarTable<T>,
    grid: &TimeGrid<T>,
) -> Result<CavityCoeffs<T>> {
    check_tables(grid, kernel, &[x11.grid(), x21.grid(), y.grid()])?;
    Ok(cavity_coefficients(
        kernel,
        omega0,
        Route::Integral,
        |i, l| x11.get(i, l).conj(),
        |s| x21.get(s).conj(),
        |i, l| y.get(i, l).conj(),
    ))
}

/// `C = -iε + ½∫ α₁(t-t') x₁₃(t,t') dt'`,
/// `D = -iε - ½∫ α₁*(t-t') x₁₃*(t,t') dt'`.
pub fn assemble_cd<T: Real>(
    kernel: &ResponseKernel<T>,
    x13: &TwoVarTable<T>,
    drive: &[T],
    grid: &TimeGrid<T>,
) -> Result<DrivenCoeffs<T>> {
    check_tables(grid, kernel, &[x13.grid()])?;
    if drive.len() != grid.nodes() {
        return Err(Error::DimensionMismatch { expected: grid.nodes(), found: drive.len() });
    }
    let h = grid.step();
    let a1 = kernel.a1();
    let half = T::lit(0.5);
    let mut c = Vec::with_capacity(grid.nodes());
    let mut d = Vec::with_capacity(grid.nodes());
    for i in 0..grid.nodes() {
        let direct = cx(T::zero(), -drive[i]);
        let sc = trapezoid_sum(h, i, |l| a1[i - l] * x13.get(i, l));
        let sd = trapezoid_sum(h, i, |l| a1[i - l].conj() * x13.get(i, l).conj());
        c.push(direct + sc * half);
        d.push(direct - sd * half);
    }
    Ok(DrivenCoeffs { grid: *grid, c, d })
}

/// `R + iS = 2∫_0^t α*(t-t') x*(t,t') dt'` for a zero-temperature kernel.
pub fn assemble_rs<T: Real>(
    kernel: &ResponseKernel<T>,
    x: &TwoVarTable<T>,
    grid: &TimeGrid<T>,
) -> Result<TwoStateCoeffs<T>> {
    if !kernel.is_zero_temperature() {
        return Err(Error::NotZeroTemperature);
    }
    check_tables(grid, kernel, &[x.grid()])?;
    Ok(two_state_coefficients(kernel, |i, l| x.get(i, l).conj()))
}

/// Two-state coefficients from the conjugated table `p(i,l) = x*(t_i,t_l)`.
pub(crate) fn two_state_coefficients<T: Real>(
    kernel: &ResponseKernel<T>,
    p: impl Fn(usize, usize) -> Cx<T>,
) -> TwoStateCoeffs<T> {
    let grid = *kernel.grid();
    let h = grid.step();
    let a = kernel.a1();
    let two = T::lit(2.0);
    let (mut r, mut s) = (Vec::with_capacity(grid.nodes()), Vec::with_capacity(grid.nodes()));
    for i in 0..grid.nodes() {
        let z = trapezoid_sum(h, i, |l| a[i - l].conj() * p(i, l)) * two;
        r.push(z.re);
        s.push(z.im);
    }
    TwoStateCoeffs { grid, r, s }
}
