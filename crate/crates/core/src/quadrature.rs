//! Globally adaptive Gauss–Kronrod (7/15) quadrature for complex integrands.

use crate::error::{Error, Result};
use crate::scalar::{czero, Cx, Real};

// 15-point Kronrod abscissae (non-negative half) and weights, with the
// embedded 7-point Gauss weights on the odd-indexed abscissae.
const XGK: [f64; 8] = [
    0.991_455_371_120_812_639_206_854_697_526_329,
    0.949_107_912_342_758_524_526_189_684_047_851,
    0.864_864_423_359_769_072_789_712_788_640_926,
    0.741_531_185_599_394_439_863_864_773_280_788,
    0.586_087_235_467_691_130_294_144_845_693_013,
    0.405_845_151_377_397_166_906_606_412_076_961,
    0.207_784_955_007_898_467_600_689_403_773_245,
    0.000_000_000_000_000_000_000_000_000_000_000,
];
const WGK: [f64; 8] = [
    0.022_935_322_010_529_224_963_732_008_058_970,
    0.063_092_092_629_978_553_290_700_663_189_204,
    0.104_790_010_322_250_183_839_876_322_541_518,
    0.140_653_259_715_525_918_745_189_590_510_238,
    0.169_004_726_639_267_902_826_583_426_598_550,
    0.190_350_578_064_785_409_913_256_402_421_014,
    0.204_432_940_075_298_892_414_161_999_234_649,
    0.209_482_141_084_727_828_012_999_174_891_714,
];
const WG: [f64; 4] = [
    0.129_484_966_168_869_693_270_611_432_679_082,
    0.279_705_391_489_276_667_901_467_771_423_780,
    0.381_830_050_505_118_944_950_369_775_488_975,
    0.417_959_183_673_469_387_755_102_040_816_327,
];

/// Tolerances for [`integrate`].
#[derive(Debug, Clone, Copy)]
pub struct QuadratureOptions<T> {
    pub rel_tol: T,
    /// Absolute floor relative to the integral of `|f|`; keeps oscillatory
    /// integrals with near-zero value from chasing rounding noise.
    pub abs_floor_rel: T,
    pub max_intervals: usize,
}

impl<T: Real> Default for QuadratureOptions<T> {
    fn default() -> Self {
        Self { rel_tol: T::lit(1e-10), abs_floor_rel: T::lit(1e-14), max_intervals: 4000 }
    }
}

/// Integral value with its error estimate.
#[derive(Debug, Clone, Copy)]
pub struct Estimate<T> {
    pub value: Cx<T>,
    pub error: T,
}

struct Panel<T> {
    a: T,
    b: T,
    value: Cx<T>,
    error: T,
    magnitude: T,
}

fn gk15<T: Real, F: Fn(T) -> Cx<T>>(f: &F, a: T, b: T) -> Panel<T> {
    let half = T::lit(0.5);
    let center = half * (a + b);
    let radius = half * (b - a);
    let fc = f(center);
    let mut kronrod = fc * T::lit(WGK[7]);
    let mut gauss = fc * T::lit(WG[3]);
    let mut magnitude = fc.norm() * T::lit(WGK[7]);
    for j in 0..7 {
        let dx = radius * T::lit(XGK[j]);
        let f1 = f(center - dx);
        let f2 = f(center + dx);
        let s = f1 + f2;
        kronrod += s * T::lit(WGK[j]);
        magnitude += (f1.norm() + f2.norm()) * T::lit(WGK[j]);
        if j % 2 == 1 {
            gauss += s * T::lit(WG[j / 2]);
        }
    }
    let value = kronrod * radius;
    let error = ((kronrod - gauss) * radius).norm();
    Panel { a, b, value, error, magnitude: magnitude * radius.abs() }
}

/// Integrates `f` over `[a, b]`, bisecting the panel with the largest error
/// estimate until the total estimate meets the tolerance.
pub fn integrate<T, F>(f: F, a: T, b: T, opts: QuadratureOptions<T>) -> Result<Estimate<T>>
where
    T: Real,
    F: Fn(T) -> Cx<T>,
{
    integrate_pieces(f, &[a, b], opts)
}

/// Like [`integrate`] but starts from the given breakpoints (ascending).
pub fn integrate_pieces<T, F>(f: F, breaks: &[T], opts: QuadratureOptions<T>) -> Result<Estimate<T>>
where
    T: Real,
    F: Fn(T) -> Cx<T>,
{
    if breaks.len() < 2 {
        return Ok(Estimate { value: czero(), error: T::zero() });
    }
    let mut panels: Vec<Panel<T>> =
        breaks.windows(2).filter(|w| w[1] > w[0]).map(|w| gk15(&f, w[0], w[1])).collect();
    loop {
        let value = panels.iter().fold(czero(), |s, p| s + p.value);
        let error = panels.iter().fold(T::zero(), |s, p| s + p.error);
        let magnitude = panels.iter().fold(T::zero(), |s, p| s + p.magnitude);
        let target = (opts.rel_tol * value.norm()).max(opts.abs_floor_rel * magnitude);
        if error <= target {
            return Ok(Estimate { value, error });
        }
        if panels.len() >= opts.max_intervals {
            return Err(Error::Quadrature { estimate: error.as_f64(), target: target.as_f64() });
        }
        let worst = panels
            .iter()
            .enumerate()
            .max_by(|x, y| x.1.error.partial_cmp(&y.1.error).unwrap_or(std::cmp::Ordering::Equal))
            .map(|(k, _)| k)
            .unwrap_or(0);
        let p = panels.swap_remove(worst);
        let mid = T::lit(0.5) * (p.a + p.b);
        if !(mid > p.a && mid < p.b) {
            // panel cannot be split further in this precision
            return Err(Error::Quadrature { estimate: error.as_f64(), target: target.as_f64() });
        }
        panels.push(gk15(&f, p.a, mid));
        panels.push(gk15(&f, mid, p.b));
    }
}
