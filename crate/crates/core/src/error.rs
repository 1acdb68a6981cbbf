use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

/// Failures reported by the engine. Payloads are converted to `f64`
/// regardless of the scalar type the computation ran in.
#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("invalid spectral model: {0}")]
    InvalidModel(String),

    #[error("invalid time grid: {0}")]
    InvalidGrid(String),

    #[error("invalid scenario: {0}")]
    InvalidScenario(String),

    #[error("grid mismatch: expected (h={}, N={}), found (h={}, N={})", expected.0, expected.1, found.0, found.1)]
    GridMismatch { expected: (f64, usize), found: (f64, usize) },

    #[error("dimension mismatch: expected {expected}, found {found}")]
    DimensionMismatch { expected: usize, found: usize },

    #[error("kernels: quadrature did not converge (estimated error {estimate:e}, target {target:e})")]
    Quadrature { estimate: f64, target: f64 },

    #[error(
        "coefffuncs: picard iteration diverged at t = {t} after {iterations} iterations \
         (update norm {update:e}); use the dense-collocation method"
    )]
    PicardDiverged { t: f64, iterations: usize, update: f64 },

    #[error(
        "coefffuncs: picard iteration did not reach tolerance at t = {t} within {iterations} \
         iterations (last update {update:e})"
    )]
    PicardStalled { t: f64, iterations: usize, update: f64 },

    #[error("coefffuncs: singular collocation system at t = {t}")]
    SingularSystem { t: f64 },

    #[error("coefffuncs: a zero-temperature kernel is required")]
    NotZeroTemperature,

    #[error("green: |u(t)| = {magnitude:e} fell below the singularity threshold at t = {t}")]
    GreenSingularity { t: f64, magnitude: f64 },

    #[error("green: non-finite value in the memory-equation solution at t = {t}")]
    Overflow { t: f64 },

    #[error(
        "dynamics: Fock level {n_max} reached population {population:e} at t = {t}; increase n_max"
    )]
    TruncationBreach { t: f64, population: f64, n_max: usize },

    #[error("dynamics: trace drifted by {drift:e} at t = {t}; reduce the time step")]
    TraceDrift { t: f64, drift: f64 },

    #[error("unravel: {excluded} of {total} trajectories diverged (budget 1%)")]
    EnsembleDiverged { excluded: usize, total: usize },
}
