//! Spectral densities and the bath response kernels
//!
//! ```text
//! α₁(t) = ∫₀^∞ dω J(ω) e^{iωt}
//! α₂(t) = ∫₀^∞ dω J(ω) coth(βω/2) e^{iωt}
//! ```
//!
//! with ħ = k_B = 1. The kernels use the `e^{+iωt}` sign convention
//! throughout; conjugates are taken explicitly wherever the coefficient
//! equations call for them. Both kernels are Hermitian in time,
//! `α(−t) = conj(α(t))`, because `J` is real.

use crate::error::{Error, Result};
use crate::grid::TimeGrid;
use crate::quadrature::{integrate_pieces, QuadratureOptions};
use crate::scalar::{cis, cx, czero, Cx, Real};

/// Parametric description of the bath spectral density `J(ω)`.
#[derive(Debug, Clone, PartialEq)]
pub enum SpectralModel<T> {
    /// `J(ω) = η·ω·exp(−ω/ω_c)`.
    OhmicExp { coupling: T, cutoff: T },
    /// Defined through its kernel `α(t) = (γ₀λ/2)·exp(iΩt − λ|t|)`, the
    /// full-line transform of a Lorentzian of width `λ` centred at `Ω`.
    /// Only the zero-temperature kernel exists for this model.
    LorentzianExtended { rate: T, width: T, center: T },
    /// `J(ω) = γ/π` on `[0, ω_max]`.
    FlatCutoff { density: T, cutoff: T },
    /// Piecewise-linear interpolation of samples; zero outside them.
    Tabulated { omega: Vec<T>, density: Vec<T> },
    /// `J ≡ 0`.
    Null,
}

/// Bath temperature, as an inverse temperature or the zero-temperature
/// limit in which `coth ≡ 1` and the two kernels coincide.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Temperature<T> {
    Zero,
    Beta(T),
}

impl<T: Real> Temperature<T> {
    pub fn is_zero(&self) -> bool {
        matches!(self, Temperature::Zero)
    }

    fn validate(&self) -> Result<()> {
        match *self {
            Temperature::Zero => Ok(()),
            Temperature::Beta(b) if b > T::zero() && b.is_finite() => Ok(()),
            Temperature::Beta(b) => {
                Err(Error::InvalidModel(format!("inverse temperature must be positive, got {b}")))
            }
        }
    }
}

fn positive<T: Real>(name: &str, v: T) -> Result<()> {
    if v > T::zero() && v.is_finite() {
        Ok(())
    } else {
        Err(Error::InvalidModel(format!("{name} must be positive and finite, got {v}")))
    }
}

impl<T: Real> SpectralModel<T> {
    pub fn validate(&self) -> Result<()> {
        match self {
            SpectralModel::OhmicExp { coupling, cutoff } => {
                positive("coupling", *coupling)?;
                positive("cutoff", *cutoff)
            }
            SpectralModel::LorentzianExtended { rate, width, center } => {
                positive("rate", *rate)?;
                positive("width", *width)?;
                positive("center", *center)
            }
            SpectralModel::FlatCutoff { density, cutoff } => {
                positive("density", *density)?;
                positive("cutoff", *cutoff)
            }
            SpectralModel::Tabulated { omega, density } => {
                if omega.len() != density.len() || omega.len() < 2 {
                    return Err(Error::InvalidModel(
                        "tabulated density needs at least two (ω, J) samples of equal length".into(),
                    ));
                }
                if omega[0] < T::zero() {
                    return Err(Error::InvalidModel("tabulated frequencies must be non-negative".into()));
                }
                if omega.windows(2).any(|w| !(w[1] > w[0])) {
                    return Err(Error::InvalidModel("tabulated frequencies must be strictly ascending".into()));
                }
                if density.iter().any(|j| !(*j >= T::zero()) || !j.is_finite()) {
                    return Err(Error::InvalidModel("tabulated density must be finite and non-negative".into()));
                }
                if omega[0] == T::zero() && density[0] != T::zero() {
                    return Err(Error::InvalidModel(
                        "J(ω)/ω must stay bounded at ω → 0: J(0) must vanish".into(),
                    ));
                }
                Ok(())
            }
            SpectralModel::Null => Ok(()),
        }
    }

    /// `J(ω)` for `ω ≥ 0`. For the extended Lorentzian this is the Lorentzian
    /// whose full-line transform is its kernel.
    pub fn density(&self, w: T) -> T {
        match self {
            SpectralModel::OhmicExp { coupling, cutoff } => *coupling * w * (-w / *cutoff).exp(),
            SpectralModel::LorentzianExtended { rate, width, center } => {
                let d = w - *center;
                *rate * *width * *width / (T::lit(2.0) * T::PI() * (d * d + *width * *width))
            }
            SpectralModel::FlatCutoff { density, cutoff } => {
                if w >= T::zero() && w <= *cutoff {
                    *density / T::PI()
                } else {
                    T::zero()
                }
            }
            SpectralModel::Tabulated { omega, density } => interpolate(omega, density, w),
            SpectralModel::Null => T::zero(),
        }
    }

    /// `J(ω)/ω`, evaluated without cancellation where a closed form exists.
    fn density_over_omega(&self, w: T) -> T {
        match self {
            SpectralModel::OhmicExp { coupling, cutoff } => *coupling * (-w / *cutoff).exp(),
            _ => self.density(w) / w,
        }
    }

    /// Breakpoints of the truncated integration range `[0, ω_up]`, where
    /// beyond `ω_up` the density is below `1e-16·max J`.
    fn support(&self) -> Vec<T> {
        match self {
            SpectralModel::OhmicExp { cutoff, .. } => {
                // x·e^{-x} = 1e-16·e^{-1} on the decreasing branch, x = ω/ω_c
                let target = T::lit(1e-16) * T::lit(-1.0).exp();
                let g = |x: T| x * (-x).exp() - target;
                let (mut lo, mut hi) = (T::one(), T::lit(2.0));
                while g(hi) > T::zero() {
                    lo = hi;
                    hi *= T::lit(2.0);
                }
                for _ in 0..80 {
                    let mid = T::lit(0.5) * (lo + hi);
                    if g(mid) > T::zero() {
                        lo = mid;
                    } else {
                        hi = mid;
                    }
                }
                vec![T::zero(), hi * *cutoff]
            }
            SpectralModel::FlatCutoff { cutoff, .. } => vec![T::zero(), *cutoff],
            SpectralModel::Tabulated { omega, .. } => {
                let mut b = Vec::with_capacity(omega.len() + 1);
                if omega[0] > T::zero() {
                    b.push(T::zero());
                }
                b.extend_from_slice(omega);
                b
            }
            SpectralModel::LorentzianExtended { .. } | SpectralModel::Null => vec![],
        }
    }
}

fn interpolate<T: Real>(xs: &[T], ys: &[T], x: T) -> T {
    if xs.is_empty() || x < xs[0] || x > xs[xs.len() - 1] {
        return T::zero();
    }
    let k = xs.partition_point(|&v| v <= x).saturating_sub(1).min(xs.len() - 2);
    let (x0, x1) = (xs[k], xs[k + 1]);
    let s = (x - x0) / (x1 - x0);
    ys[k] + s * (ys[k + 1] - ys[k])
}

/// `x·coth(x)`, with its Taylor series near the origin.
pub fn x_coth_x<T: Real>(x: T) -> T {
    if x.abs() < T::lit(1e-2) {
        let x2 = x * x;
        T::one() + x2 / T::lit(3.0) - x2 * x2 / T::lit(45.0)
            + T::lit(2.0) * x2 * x2 * x2 / T::lit(945.0)
    } else {
        x / x.tanh()
    }
}

fn quadrature_options<T: Real>() -> QuadratureOptions<T> {
    QuadratureOptions::default()
}

fn fourier<T: Real, G: Fn(T) -> T>(weight: G, breaks: &[T], t: T) -> Result<Cx<T>> {
    let est = integrate_pieces(|w| cis(w * t) * weight(w), breaks, quadrature_options())?;
    Ok(est.value)
}

/// `α₁(t) = ∫₀^∞ J(ω) e^{iωt} dω`.
pub fn alpha1<T: Real>(model: &SpectralModel<T>, t: T) -> Result<Cx<T>> {
    model.validate()?;
    alpha1_unchecked(model, t)
}

fn alpha1_unchecked<T: Real>(model: &SpectralModel<T>, t: T) -> Result<Cx<T>> {
    if t < T::zero() {
        return Ok(alpha1_unchecked(model, -t)?.conj());
    }
    match model {
        SpectralModel::Null => Ok(czero()),
        SpectralModel::OhmicExp { coupling, cutoff } => {
            let d = cx(T::one(), -*cutoff * t);
            Ok(cx(*coupling * *cutoff * *cutoff, T::zero()) / (d * d))
        }
        SpectralModel::LorentzianExtended { rate, width, center } => {
            Ok(cis(*center * t) * (*rate * *width / T::lit(2.0) * (-*width * t).exp()))
        }
        SpectralModel::FlatCutoff { .. } | SpectralModel::Tabulated { .. } => {
            fourier(|w| model.density(w), &model.support(), t)
        }
    }
}

/// `α₂(t) = ∫₀^∞ J(ω) coth(βω/2) e^{iωt} dω`; equals [`alpha1`] at zero
/// temperature.
pub fn alpha2<T: Real>(model: &SpectralModel<T>, temperature: Temperature<T>, t: T) -> Result<Cx<T>> {
    model.validate()?;
    temperature.validate()?;
    let beta = match temperature {
        Temperature::Zero => return alpha1_unchecked(model, t),
        Temperature::Beta(b) => b,
    };
    check_thermal_support(model)?;
    alpha2_unchecked(model, beta, t)
}

fn check_thermal_support<T: Real>(model: &SpectralModel<T>) -> Result<()> {
    match model {
        SpectralModel::LorentzianExtended { .. } => Err(Error::InvalidModel(
            "the extended Lorentzian is defined by its zero-temperature kernel only".into(),
        )),
        SpectralModel::FlatCutoff { .. } => Err(Error::InvalidModel(
            "flat density violates boundedness of J(ω)/ω at ω → 0; thermal kernel diverges".into(),
        )),
        _ => Ok(()),
    }
}

fn alpha2_unchecked<T: Real>(model: &SpectralModel<T>, beta: T, t: T) -> Result<Cx<T>> {
    if t < T::zero() {
        return Ok(alpha2_unchecked(model, beta, -t)?.conj());
    }
    if matches!(model, SpectralModel::Null) {
        return Ok(czero());
    }
    let two = T::lit(2.0);
    let split = two / beta;
    let mut breaks = model.support();
    if breaks.last().is_some_and(|&top| split < top) {
        let pos = breaks.partition_point(|&w| w < split);
        if breaks[pos] != split {
            breaks.insert(pos, split);
        }
    }
    let weight = |w: T| {
        let x = beta * w / two;
        if x < T::one() {
            // J(ω)·coth(x) = (J(ω)/ω)·(2/β)·x·coth(x): finite as ω → 0
            model.density_over_omega(w) * split * x_coth_x(x)
        } else {
            model.density(w) / x.tanh()
        }
    };
    fourier(weight, &breaks, t)
}

/// Response kernels sampled on a grid at non-negative lags `t_k = k·h`.
#[derive(Debug, Clone, PartialEq)]
pub struct ResponseKernel<T> {
    grid: TimeGrid<T>,
    a1: Vec<Cx<T>>,
    a2: Vec<Cx<T>>,
    temperature: Temperature<T>,
}

impl<T: Real> ResponseKernel<T> {
    /// Builds a kernel from explicit samples (`N + 1` of each). A zero
    /// temperature flag requires identical samples.
    pub fn from_samples(
        grid: TimeGrid<T>,
        a1: Vec<Cx<T>>,
        a2: Vec<Cx<T>>,
        temperature: Temperature<T>,
    ) -> Result<Self> {
        let n = grid.nodes();
        if a1.len() != n {
            return Err(Error::DimensionMismatch { expected: n, found: a1.len() });
        }
        if a2.len() != n {
            return Err(Error::DimensionMismatch { expected: n, found: a2.len() });
        }
        if temperature.is_zero() && a1 != a2 {
            return Err(Error::InvalidModel("zero-temperature kernels must coincide".into()));
        }
        Ok(Self { grid, a1, a2, temperature })
    }

    pub fn grid(&self) -> &TimeGrid<T> {
        &self.grid
    }

    pub fn temperature(&self) -> Temperature<T> {
        self.temperature
    }

    pub fn is_zero_temperature(&self) -> bool {
        self.temperature.is_zero()
    }

    /// Samples `α₁(k·h)`, `k = 0..=N`.
    pub fn a1(&self) -> &[Cx<T>] {
        &self.a1
    }

    /// Samples `α₂(k·h)`, `k = 0..=N`.
    pub fn a2(&self) -> &[Cx<T>] {
        &self.a2
    }

    /// `α₁(d·h)` for a signed lag, via conjugate symmetry when `d < 0`.
    #[inline]
    pub fn a1_lag(&self, d: isize) -> Cx<T> {
        lag(&self.a1, d)
    }

    #[inline]
    pub fn a2_lag(&self, d: isize) -> Cx<T> {
        lag(&self.a2, d)
    }

    /// Kernel with every sample conjugated (time-reversed bath).
    pub fn conj(&self) -> Self {
        Self {
            grid: self.grid,
            a1: self.a1.iter().map(|z| z.conj()).collect(),
            a2: self.a2.iter().map(|z| z.conj()).collect(),
            temperature: self.temperature,
        }
    }

    pub fn is_null(&self) -> bool {
        self.a1.iter().chain(&self.a2).all(|z| z.re == T::zero() && z.im == T::zero())
    }
}

#[inline]
fn lag<T: Real>(samples: &[Cx<T>], d: isize) -> Cx<T> {
    if d >= 0 {
        samples[d as usize]
    } else {
        samples[d.unsigned_abs()].conj()
    }
}

/// Tabulates `α₁` and `α₂` on every grid node.
pub fn sample_kernels<T: Real>(
    model: &SpectralModel<T>,
    temperature: Temperature<T>,
    grid: &TimeGrid<T>,
) -> Result<ResponseKernel<T>> {
    model.validate()?;
    temperature.validate()?;
    let times = grid.times();
    let a1 = times.iter().map(|&t| alpha1_unchecked(model, t)).collect::<Result<Vec<_>>>()?;
    let a2 = match temperature {
        Temperature::Zero => a1.clone(),
        Temperature::Beta(beta) => {
            check_thermal_support(model)?;
            use rayon::prelude::*;
            times.par_iter().map(|&t| alpha2_unchecked(model, beta, t)).collect::<Result<Vec<_>>>()?
        }
    };
    Ok(ResponseKernel { grid: *grid, a1, a2, temperature })
}
