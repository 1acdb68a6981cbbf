//! Configuration-driven runner for the `nmme` engine.
//!
//! | exit | meaning |
//! |------|---------|
//! | 0 | success |
//! | 1 | I/O failure |
//! | 2 | configuration error |
//! | 3 | solver non-convergence |
//! | 4 | Green's-function singularity |
//! | 5 | Fock truncation breach |
//! | 6 | trace drift |
//! | 7 | Monte Carlo ensemble divergence |
//! | 8 | self-test failure |

pub mod config;
pub mod pipeline;
pub mod selftest;

use nmme_core::Error as CoreError;

pub use config::{ConfigError, RunConfig};
pub use pipeline::{compare_methods, run, Action, ComparisonReport, RunSummary};

#[derive(Debug, thiserror::Error)]
pub enum RunError {
    #[error(transparent)]
    Config(#[from] ConfigError),
    #[error(transparent)]
    Core(#[from] CoreError),
    #[error("i/o: {0}")]
    Io(#[from] std::io::Error),
    #[error("selftest: {failed} check(s) failed")]
    SelfTest { failed: usize },
}

impl RunError {
    pub fn exit_code(&self) -> i32 {
        match self {
            RunError::Io(_) => 1,
            RunError::Config(ConfigError::Read { .. }) => 1,
            RunError::Config(_) => 2,
            RunError::SelfTest { .. } => 8,
            RunError::Core(e) => match e {
                CoreError::InvalidModel(_)
                | CoreError::InvalidGrid(_)
                | CoreError::InvalidScenario(_)
                | CoreError::GridMismatch { .. }
                | CoreError::DimensionMismatch { .. }
                | CoreError::NotZeroTemperature => 2,
                CoreError::Quadrature { .. }
                | CoreError::PicardDiverged { .. }
                | CoreError::PicardStalled { .. }
                | CoreError::SingularSystem { .. } => 3,
                CoreError::GreenSingularity { .. } | CoreError::Overflow { .. } => 4,
                CoreError::TruncationBreach { .. } => 5,
                CoreError::TraceDrift { .. } => 6,
                CoreError::EnsembleDiverged { .. } => 7,
            },
        }
    }
}
