//! Green's-function route.
//!
//! ```text
//! u̇(τ) + iω₀u(τ) + ∫_0^τ α₁*(τ-t') u(t') dt' = 0,                      u(0) = 1
//! v̇(τ) + iω₀v(τ) + ∫_0^τ α₁*(τ-t') v(t') dt'
//!        = ½ ∫_0^t [α₂*(τ-t') - α₁*(τ-t')] u*(t-t') dt',               v(0) = 0
//! ```
//!
//! The `v` source integrates up to the final time `t`, so `v` is solved once
//! per final-time node. From `u` and `v`:
//!
//! ```text
//! x̄₁₁(t,t') = u(t')/u(t)
//! x̄₂₁(s)    = u*(s)
//! ȳ(t,t')   = u*(t-t') - 2[u(t')/u(t)·v(t) - v(t')]
//! ```

use rayon::prelude::*;

use crate::assemble::{cavity_coefficients, two_state_coefficients, CavityCoeffs, Route, TwoStateCoeffs};
use crate::coefffuncs::{OneVarTable, TwoVarTable};
use crate::error::{Error, Result};
use crate::grid::{trapezoid_weight, TimeGrid};
use crate::kernels::ResponseKernel;
use crate::scalar::{cone, cx, czero, Cx, Real};

/// `|u|` below this is treated as a zero of `u`.
pub const SINGULARITY_THRESHOLD: f64 = 1e-8;

/// Corrector passes for the newest history point.
const CORRECTOR_PASSES: usize = 2;

/// Integrates `ẋ = -iω₀x - ∫_0^τ κ(τ-s) x(s) ds + S(τ)` on `source.len()`
/// nodes with step `h`.
///
/// Classical RK4 per step; the history integral is a trapezoid sum, linear
/// in time between nodes, and its newest term comes from an explicit Euler
/// predictor refined by repeated RK4 passes. The source is interpolated
/// linearly at midpoints.
pub fn solve_memory<T: Real>(
    h: T,
    omega0: T,
    kappa: &[Cx<T>],
    source: &[Cx<T>],
    x0: Cx<T>,
) -> Result<Vec<Cx<T>>> {
    let n = source.len();
    assert!(kappa.len() >= n, "kernel shorter than the integration range");
    let mut x = Vec::with_capacity(n);
    if n == 0 {
        return Ok(x);
    }
    x.push(x0);
    let half = T::lit(0.5);
    let sixth = h / T::lit(6.0);
    let minus_iw = cx(T::zero(), -omega0);
    let rhs = |u: Cx<T>, hist: Cx<T>, s: Cx<T>| minus_iw * u - hist + s;
    let mut hist_k: Cx<T> = czero();
    for k in 0..n - 1 {
        // history at t_{k+1} without its newest term
        let mut partial: Cx<T> = czero();
        for l in 0..=k {
            partial += kappa[k + 1 - l] * x[l] * trapezoid_weight(h, 0, k + 1, l);
        }
        let newest = kappa[0] * (h * half);
        let (xk, sk, sk1) = (x[k], source[k], source[k + 1]);
        let smid = (sk + sk1) * half;
        let mut next = xk + rhs(xk, hist_k, sk) * h;
        for _ in 0..CORRECTOR_PASSES {
            let hist_k1 = partial + newest * next;
            let hmid = (hist_k + hist_k1) * half;
            let k1 = rhs(xk, hist_k, sk);
            let k2 = rhs(xk + k1 * (h * half), hmid, smid);
            let k3 = rhs(xk + k2 * (h * half), hmid, smid);
            let k4 = rhs(xk + k3 * h, hist_k1, sk1);
            next = xk + (k1 + (k2 + k3) * T::lit(2.0) + k4) * sixth;
        }
        if !(next.re.is_finite() && next.im.is_finite()) {
            return Err(Error::Overflow { t: (T::from_usize_lossy(k + 1) * h).as_f64() });
        }
        hist_k = partial + newest * next;
        x.push(next);
    }
    Ok(x)
}

/// `u(τ)` on every grid node.
pub fn solve_u<T: Real>(kernel: &ResponseKernel<T>, omega0: T, grid: &TimeGrid<T>) -> Result<OneVarTable<T>> {
    kernel.grid().ensure_same(grid)?;
    let kappa: Vec<Cx<T>> = kernel.a1().iter().map(|z| z.conj()).collect();
    let u = solve_memory(grid.step(), omega0, &kappa, &vec![czero(); grid.nodes()], cone())?;
    OneVarTable::new(*grid, u)
}

/// `v(t_i; τ_k)` for `k ≤ i`, one memory solve per final time `t_i`.
pub fn solve_v<T: Real>(
    kernel: &ResponseKernel<T>,
    omega0: T,
    grid: &TimeGrid<T>,
    u: &OneVarTable<T>,
) -> Result<TwoVarTable<T>> {
    kernel.grid().ensure_same(grid)?;
    grid.ensure_same(u.grid())?;
    let h = grid.step();
    let kappa: Vec<Cx<T>> = kernel.a1().iter().map(|z| z.conj()).collect();
    let half = T::lit(0.5);
    let rows = (0..grid.nodes())
        .into_par_iter()
        .map(|i| {
            let src: Vec<Cx<T>> = (0..=i)
                .map(|k| {
                    let mut acc = czero();
                    for l in 0..=i {
                        let d = k as isize - l as isize;
                        let diff = (kernel.a2_lag(d) - kernel.a1_lag(d)).conj();
                        acc += diff * u.get(i - l).conj() * trapezoid_weight(h, 0, i, l);
                    }
                    acc * half
                })
                .collect();
            solve_memory(h, omega0, &kappa, &src, czero())
        })
        .collect::<Result<Vec<_>>>()?;
    TwoVarTable::from_rows(*grid, rows)
}

/// `u` and the `v` table.
#[derive(Debug, Clone)]
pub struct GreenSolution<T> {
    pub grid: TimeGrid<T>,
    pub u: OneVarTable<T>,
    pub v: TwoVarTable<T>,
}

pub fn solve_green<T: Real>(kernel: &ResponseKernel<T>, omega0: T, grid: &TimeGrid<T>) -> Result<GreenSolution<T>> {
    let u = solve_u(kernel, omega0, grid)?;
    let v = solve_v(kernel, omega0, grid, &u)?;
    Ok(GreenSolution { grid: *grid, u, v })
}

/// The tables `x̄₁₁`, `x̄₂₁`, `ȳ`.
#[derive(Debug, Clone)]
pub struct XBar<T> {
    pub x11: TwoVarTable<T>,
    pub x21: OneVarTable<T>,
    pub y: TwoVarTable<T>,
}

fn check_nonsingular<T: Real>(u: &OneVarTable<T>) -> Result<()> {
    let threshold = T::lit(SINGULARITY_THRESHOLD);
    match u.values().iter().position(|z| !(z.norm() >= threshold)) {
        None => Ok(()),
        Some(k) => Err(Error::GreenSingularity {
            t: u.grid().time(k).as_f64(),
            magnitude: u.get(k).norm().as_f64(),
        }),
    }
}

pub fn xbar_tables<T: Real>(sol: &GreenSolution<T>) -> Result<XBar<T>> {
    check_nonsingular(&sol.u)?;
    let (u, v) = (&sol.u, &sol.v);
    let two = T::lit(2.0);
    let n = sol.grid.nodes();
    let x11_rows: Vec<Vec<Cx<T>>> = (0..n).map(|i| (0..=i).map(|j| u.get(j) / u.get(i)).collect()).collect();
    let y_rows: Vec<Vec<Cx<T>>> = (0..n)
        .map(|i| {
            (0..=i)
                .map(|j| u.get(i - j).conj() - (u.get(j) / u.get(i) * v.get(i, i) - v.get(i, j)) * two)
                .collect()
        })
        .collect();
    Ok(XBar {
        x11: TwoVarTable::from_rows(sol.grid, x11_rows)?,
        x21: OneVarTable::new(sol.grid, u.values().iter().map(|z| z.conj()).collect())?,
        y: TwoVarTable::from_rows(sol.grid, y_rows)?,
    })
}

/// `B₁..B₃`, the Green-route counterparts of `A₁..A₃`.
pub fn assemble_b<T: Real>(
    kernel: &ResponseKernel<T>,
    omega0: T,
    xbar: &XBar<T>,
    grid: &TimeGrid<T>,
) -> Result<CavityCoeffs<T>> {
    kernel.grid().ensure_same(grid)?;
    for g in [xbar.x11.grid(), xbar.x21.grid(), xbar.y.grid()] {
        grid.ensure_same(g)?;
    }
    Ok(cavity_coefficients(
        kernel,
        omega0,
        Route::Green,
        |i, l| xbar.x11.get(i, l),
        |s| xbar.x21.get(s),
        |i, l| xbar.y.get(i, l),
    ))
}

/// Green-route cavity coefficients in one call.
pub fn cavity_coeffs<T: Real>(kernel: &ResponseKernel<T>, omega0: T, grid: &TimeGrid<T>) -> Result<CavityCoeffs<T>> {
    let sol = solve_green(kernel, omega0, grid)?;
    let xbar = xbar_tables(&sol)?;
    assemble_b(kernel, omega0, &xbar, grid)
}

/// Two-state amplitude `w`: the `u` equation with the kernel `α` in place
/// of `α*`, i.e. [`solve_u`] on the conjugated kernel.
pub fn solve_two_state_amplitude<T: Real>(
    kernel: &ResponseKernel<T>,
    omega0: T,
    grid: &TimeGrid<T>,
) -> Result<OneVarTable<T>> {
    solve_u(&kernel.conj(), omega0, grid)
}

/// `R` and `S` from `x(t,t') = w(t')/w(t)`.
pub fn two_state_coeffs<T: Real>(
    kernel: &ResponseKernel<T>,
    omega0: T,
    grid: &TimeGrid<T>,
) -> Result<TwoStateCoeffs<T>> {
    if !kernel.is_zero_temperature() {
        return Err(Error::NotZeroTemperature);
    }
    let w = solve_two_state_amplitude(kernel, omega0, grid)?;
    check_nonsingular(&w)?;
    Ok(two_state_coefficients(kernel, |i, l| (w.get(l) / w.get(i)).conj()))
}

/// Exact `u(τ)` for an exponential kernel `κ(τ) = A·e^{-zτ}` in
/// `u̇ = -iω₀u - ∫_0^τ κ(τ-s) u(s) ds`, via the auxiliary variable
/// `w = ∫κ u` and the 2×2 matrix exponential of `[[-iω₀, -1], [A, -z]]`.
pub fn exponential_kernel_u<T: Real>(omega0: T, amplitude: Cx<T>, decay: Cx<T>, tau: T) -> Cx<T> {
    let m00 = cx(T::zero(), -omega0);
    let m11 = -decay;
    let half = T::lit(0.5);
    let s = (m00 + m11) * half;
    let d = ((m00 - m11) * (m00 - m11) * T::lit(0.25) - amplitude).sqrt();
    let dt = d * tau;
    let sinh_over_d = if dt.norm() < T::lit(1e-6) {
        // series of sinh(dτ)/d
        cx(tau, T::zero()) * (cone::<T>() + dt * dt / T::lit(6.0))
    } else {
        dt.sinh() / d
    };
    (s * tau).exp() * (dt.cosh() + sinh_over_d * (m00 - s))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::kernels::{sample_kernels, SpectralModel, Temperature};
    use crate::scalar::cis;

    fn lorentzian(g: &TimeGrid<f64>) -> ResponseKernel<f64> {
        sample_kernels(&SpectralModel::LorentzianExtended { rate: 0.2, width: 1.0, center: 1.0 }, Temperature::Zero, g)
            .unwrap()
    }

    #[test]
    fn null_kernel_is_free_rotation() {
        let g = TimeGrid::with_horizon(3.0, 60).unwrap();
        let k = sample_kernels(&SpectralModel::Null, Temperature::Beta(1.0), &g).unwrap();
        let sol = solve_green(&k, 1.0, &g).unwrap();
        assert_eq!(sol.u.get(0), cone());
        for (kk, t) in g.times().iter().enumerate() {
            assert!((sol.u.get(kk) - cis(-t)).norm() < 1e-6);
        }
        assert!(sol.v.rows().flatten().all(|z| z.norm() == 0.0));
        let xb = xbar_tables(&sol).unwrap();
        for i in 0..g.nodes() {
            assert!((xb.x11.get(i, i) - cone()).norm() < 1e-15);
            assert!((xb.y.get(i, i) - cone()).norm() < 1e-15);
            for j in 0..=i {
                assert!((xb.y.get(i, j) - cis(g.time(i) - g.time(j))).norm() < 1e-6);
            }
        }
        assert_eq!(xb.x21.get(0), cone());
        let b = assemble_b(&k, 1.0, &xb, &g).unwrap();
        assert!(b.a1.iter().all(|&v| v == 1.0));
        assert!(b.a2.iter().chain(&b.a3).all(|&v| v == 0.0));
    }

    #[test]
    fn zero_temperature_has_no_v() {
        let g = TimeGrid::with_horizon(2.0, 40).unwrap();
        let k = sample_kernels(&SpectralModel::OhmicExp { coupling: 0.05, cutoff: 5.0 }, Temperature::Zero, &g)
            .unwrap();
        let sol = solve_green(&k, 1.0, &g).unwrap();
        assert!(sol.v.rows().flatten().all(|z| z.norm() == 0.0));
        let xb = xbar_tables(&sol).unwrap();
        for i in 0..g.nodes() {
            for j in 0..=i {
                assert_eq!(xb.y.get(i, j), sol.u.get(i - j).conj());
            }
        }
    }

    #[test]
    fn lorentzian_u_matches_closed_form() {
        let g = TimeGrid::with_horizon(5.0, 1000).unwrap();
        let k = lorentzian(&g);
        let u = solve_u(&k, 1.0, &g).unwrap();
        // u uses α*: amplitude γ₀λ/2, decay λ + iΩ
        let mut worst: f64 = 0.0;
        for (kk, t) in g.times().iter().enumerate() {
            let exact = exponential_kernel_u(1.0, cx(0.1, 0.0), cx(1.0, 1.0), *t);
            worst = worst.max((u.get(kk) - exact).norm());
        }
        assert!(worst < 1e-6, "{worst}");
    }

    #[test]
    fn closed_form_reduces_to_free_rotation() {
        let z = exponential_kernel_u(1.0, cx(0.0, 0.0), cx(1.0, 0.0), 2.0);
        assert!((z - cis(-2.0)).norm() < 1e-14);
        // degenerate eigenvalues: d = 0
        let z = exponential_kernel_u(0.0, cx(0.25, 0.0), cx(1.0, 0.0), 1.5);
        let exact = (-0.5f64 * 1.5).exp() * (1.0 + 0.5 * 1.5);
        assert!((z - cx(exact, 0.0)).norm() < 1e-12, "{z}");
    }

    #[test]
    fn u_is_contractive_for_passive_kernel() {
        let g = TimeGrid::with_horizon(4.0, 200).unwrap();
        let k = sample_kernels(&SpectralModel::OhmicExp { coupling: 0.05, cutoff: 5.0 }, Temperature::Beta(1.0), &g)
            .unwrap();
        let u = solve_u(&k, 1.0, &g).unwrap();
        assert!(u.values().iter().all(|z| z.norm() <= 1.0 + 10.0 * g.step()));
    }

    #[test]
    fn v_converges_at_second_order() {
        let model = SpectralModel::OhmicExp { coupling: 0.05, cutoff: 5.0 };
        let at = |n: usize| {
            let g = TimeGrid::with_horizon(2.0, n).unwrap();
            let k = sample_kernels(&model, Temperature::Beta(1.0), &g).unwrap();
            let sol = solve_green(&k, 1.0, &g).unwrap();
            let s = n / 20;
            (0..=20).flat_map(|i| (0..=i).map(move |j| (i, j))).map(|(i, j)| sol.v.get(i * s, j * s)).collect::<Vec<_>>()
        };
        let (a, b, c) = (at(20), at(40), at(80));
        let d1 = a.iter().zip(&b).fold(0.0f64, |m, (x, y)| m.max((x - y).norm()));
        let d2 = b.iter().zip(&c).fold(0.0f64, |m, (x, y)| m.max((x - y).norm()));
        assert!(d1 / d2 <= 4.5 && d1 / d2 >= 3.5, "ratio {}", d1 / d2);
    }

    #[test]
    fn singular_u_is_reported() {
        // strong coupling drives u through zero
        let g = TimeGrid::with_horizon(10.0, 200).unwrap();
        let k = sample_kernels(&SpectralModel::OhmicExp { coupling: 2.0, cutoff: 5.0 }, Temperature::Zero, &g)
            .unwrap();
        let mut sol = solve_green(&k, 1.0, &g).unwrap();
        let mut vals = sol.u.values().to_vec();
        vals[17] = cx(1e-9, 0.0);
        sol.u = OneVarTable::new(g, vals).unwrap();
        match xbar_tables(&sol) {
            Err(Error::GreenSingularity { t, .. }) => assert!((t - g.time(17)).abs() < 1e-12),
            other => panic!("expected singularity, got {other:?}"),
        }
    }

    #[test]
    fn two_state_requires_zero_temperature() {
        let g = TimeGrid::with_horizon(1.0, 10).unwrap();
        let k = sample_kernels(&SpectralModel::OhmicExp { coupling: 0.05, cutoff: 5.0 }, Temperature::Beta(1.0), &g)
            .unwrap();
        assert_eq!(two_state_coeffs(&k, 1.0, &g).unwrap_err(), Error::NotZeroTemperature);
    }
}
