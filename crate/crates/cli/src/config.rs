//! TOML run configuration.
//!
//! ```toml
//! [scenario]
//! kind = "cavity"            # cavity | driven-cavity | two-state
//! omega0 = 1.0
//! n_max = 12
//! initial = "fock"           # fock | coherent | excited | ground | bloch
//! fock = 1
//!
//! [bath]
//! model = "ohmic-exp"        # ohmic-exp | lorentzian | flat | tabulated | null
//! coupling = 0.05
//! cutoff = 5.0
//! beta = 1.0                 # omit for zero temperature
//!
//! [grid]
//! horizon = 4.0
//! steps = 400
//!
//! [method]
//! route = "both"             # integral | green | both | unravel
//!
//! [output]
//! dir = "out"
//! ```

use std::path::{Path, PathBuf};

use nmme_core::coefffuncs::{SolveMethod, SolverPolicy};
use nmme_core::dynamics::{Drive, InitialState, Scenario, ScenarioKind};
use nmme_core::{Grid, Spectral, Temperature, C64};
use serde::Deserialize;

#[derive(Debug, thiserror::Error)]
pub enum ConfigError {
    #[error("cannot read {path}: {source}")]
    Read { path: PathBuf, source: std::io::Error },
    #[error("malformed config: {0}")]
    Parse(#[from] toml::de::Error),
    #[error("config: {0}")]
    Invalid(String),
    #[error("config: {0}")]
    Core(#[from] nmme_core::Error),
}

fn invalid<T>(msg: impl Into<String>) -> Result<T, ConfigError> {
    Err(ConfigError::Invalid(msg.into()))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum KindKey {
    Cavity,
    DrivenCavity,
    TwoState,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum InitialKey {
    Fock,
    Coherent,
    Excited,
    Ground,
    Bloch,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum DriveKey {
    Constant,
    Sinusoid,
    Tabulated,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScenarioSection {
    pub kind: KindKey,
    pub omega0: f64,
    #[serde(default = "default_n_max")]
    pub n_max: usize,
    pub initial: InitialKey,
    #[serde(default)]
    pub fock: usize,
    /// `[re, im]`.
    #[serde(default)]
    pub alpha: [f64; 2],
    #[serde(default)]
    pub theta: f64,
    #[serde(default)]
    pub phi: f64,
    pub drive: Option<DriveKey>,
    #[serde(default)]
    pub drive_amplitude: f64,
    #[serde(default)]
    pub drive_omega: f64,
    #[serde(default)]
    pub drive_phase: f64,
    #[serde(default)]
    pub drive_times: Vec<f64>,
    #[serde(default)]
    pub drive_values: Vec<f64>,
}

fn default_n_max() -> usize {
    10
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ModelKey {
    OhmicExp,
    Lorentzian,
    Flat,
    Tabulated,
    Null,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BathSection {
    pub model: ModelKey,
    pub coupling: Option<f64>,
    pub cutoff: Option<f64>,
    pub rate: Option<f64>,
    pub width: Option<f64>,
    pub center: Option<f64>,
    pub density: Option<f64>,
    #[serde(default)]
    pub omega: Vec<f64>,
    #[serde(default)]
    pub values: Vec<f64>,
    pub beta: Option<f64>,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GridSection {
    pub horizon: f64,
    pub steps: usize,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum RouteKey {
    Integral,
    Green,
    Both,
    Unravel,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum SolverKey {
    Dense,
    Picard,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MethodSection {
    pub route: RouteKey,
    #[serde(default = "default_solver")]
    pub solver: SolverKey,
    pub picard_tol: Option<f64>,
    pub picard_max_iter: Option<usize>,
    pub relaxation: Option<f64>,
    #[serde(default = "default_n_traj")]
    pub n_traj: usize,
    #[serde(default)]
    pub seed: u64,
    #[serde(default)]
    pub omit_cross: bool,
}

fn default_solver() -> SolverKey {
    SolverKey::Dense
}

fn default_n_traj() -> usize {
    1000
}

#[derive(Debug, Clone, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OutputSection {
    pub dir: Option<PathBuf>,
    #[serde(default)]
    pub dump_tables: bool,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RawConfig {
    pub scenario: ScenarioSection,
    pub bath: BathSection,
    pub grid: GridSection,
    pub method: MethodSection,
    #[serde(default)]
    pub output: OutputSection,
}

/// Validated run configuration.
#[derive(Debug, Clone)]
pub struct RunConfig {
    pub scenario: Scenario<f64>,
    pub grid: Grid,
    pub route: RouteKey,
    pub policy: SolverPolicy<f64>,
    pub n_traj: usize,
    pub seed: u64,
    pub omit_cross: bool,
    pub out_dir: PathBuf,
    pub dump_tables: bool,
}

impl RunConfig {
    pub fn load(path: &Path) -> Result<Self, ConfigError> {
        let text = std::fs::read_to_string(path).map_err(|source| ConfigError::Read { path: path.into(), source })?;
        Self::parse(&text)
    }

    pub fn parse(text: &str) -> Result<Self, ConfigError> {
        let raw: RawConfig = toml::from_str(text)?;
        Self::from_raw(raw)
    }

    pub fn from_raw(raw: RawConfig) -> Result<Self, ConfigError> {
        let model = spectral(&raw.bath)?;
        let temperature = match raw.bath.beta {
            None => Temperature::Zero,
            Some(b) if b > 0.0 && b.is_finite() => Temperature::Beta(b),
            Some(b) => return invalid(format!("beta must be positive and finite, got {b}")),
        };
        let s = &raw.scenario;
        let kind = match s.kind {
            KindKey::Cavity => ScenarioKind::Cavity,
            KindKey::DrivenCavity => ScenarioKind::DrivenCavity,
            KindKey::TwoState => ScenarioKind::TwoState,
        };
        let initial = match s.initial {
            InitialKey::Fock => InitialState::Fock(s.fock),
            InitialKey::Coherent => InitialState::Coherent(C64::new(s.alpha[0], s.alpha[1])),
            InitialKey::Excited => InitialState::Excited,
            InitialKey::Ground => InitialState::Ground,
            InitialKey::Bloch => InitialState::Bloch { theta: s.theta, phi: s.phi },
        };
        let drive = s.drive.map(|d| match d {
            DriveKey::Constant => Drive::Constant(s.drive_amplitude),
            DriveKey::Sinusoid => Drive::Sinusoid { amplitude: s.drive_amplitude, omega: s.drive_omega, phase: s.drive_phase },
            DriveKey::Tabulated => Drive::Tabulated { times: s.drive_times.clone(), values: s.drive_values.clone() },
        });
        let scenario = Scenario { kind, omega0: s.omega0, model, temperature, n_max: s.n_max, initial, drive };
        scenario.validate()?;
        let grid = Grid::with_horizon(raw.grid.horizon, raw.grid.steps)?;

        let m = &raw.method;
        let mut policy = match m.solver {
            SolverKey::Dense => SolverPolicy::dense(),
            SolverKey::Picard => SolverPolicy::picard(),
        };
        if let Some(t) = m.picard_tol {
            policy.picard_tol = t;
        }
        if let Some(n) = m.picard_max_iter {
            policy.picard_max_iter = n;
        }
        if let Some(r) = m.relaxation {
            policy.relaxation = r;
        }
        policy.validate()?;
        if policy.method == SolveMethod::Picard && m.route == RouteKey::Green {
            return invalid("the picard solver applies to the integral route only");
        }
        match (m.route, kind) {
            (RouteKey::Green | RouteKey::Both, ScenarioKind::DrivenCavity) => {
                return invalid("the green route does not cover the driven cavity; use route = \"integral\"")
            }
            (RouteKey::Integral | RouteKey::Green | RouteKey::Both, ScenarioKind::TwoState) if !temperature.is_zero() => {
                return invalid("the two-state atom requires zero temperature")
            }
            _ => {}
        }
        if m.route == RouteKey::Unravel && m.n_traj < nmme_core::unravel::MIN_TRAJECTORIES {
            return invalid(format!("n_traj must be at least {}", nmme_core::unravel::MIN_TRAJECTORIES));
        }
        if m.omit_cross && kind != ScenarioKind::TwoState {
            return invalid("omit_cross applies to the two-state atom only");
        }
        Ok(Self {
            scenario,
            grid,
            route: m.route,
            policy,
            n_traj: m.n_traj,
            seed: m.seed,
            omit_cross: m.omit_cross,
            out_dir: raw.output.dir.unwrap_or_else(|| PathBuf::from("out")),
            dump_tables: raw.output.dump_tables,
        })
    }
}

fn require(v: Option<f64>, model: &str, key: &str) -> Result<f64, ConfigError> {
    v.ok_or_else(|| ConfigError::Invalid(format!("bath model {model} requires `{key}`")))
}

fn spectral(b: &BathSection) -> Result<Spectral, ConfigError> {
    let model = match b.model {
        ModelKey::OhmicExp => Spectral::OhmicExp {
            coupling: require(b.coupling, "ohmic-exp", "coupling")?,
            cutoff: require(b.cutoff, "ohmic-exp", "cutoff")?,
        },
        ModelKey::Lorentzian => Spectral::LorentzianExtended {
            rate: require(b.rate, "lorentzian", "rate")?,
            width: require(b.width, "lorentzian", "width")?,
            center: require(b.center, "lorentzian", "center")?,
        },
        ModelKey::Flat => Spectral::FlatCutoff {
            density: require(b.density, "flat", "density")?,
            cutoff: require(b.cutoff, "flat", "cutoff")?,
        },
        ModelKey::Tabulated => Spectral::Tabulated { omega: b.omega.clone(), density: b.values.clone() },
        ModelKey::Null => Spectral::Null,
    };
    model.validate()?;
    Ok(model)
}

#[cfg(test)]
mod tests {
    use super::*;

    const BASE: &str = r#"
[scenario]
kind = "cavity"
omega0 = 1.0
n_max = 8
initial = "fock"
fock = 1

[bath]
model = "ohmic-exp"
coupling = 0.05
cutoff = 5.0
beta = 1.0

[grid]
horizon = 4.0
steps = 40

[method]
route = "both"
"#;

    #[test]
    fn parses_reference_layout() {
        let c = RunConfig::parse(BASE).unwrap();
        assert_eq!(c.grid.steps(), 40);
        assert_eq!(c.route, RouteKey::Both);
        assert_eq!(c.out_dir, PathBuf::from("out"));
        assert!(!c.scenario.temperature.is_zero());
    }

    #[test]
    fn rejects_bad_input() {
        assert!(matches!(RunConfig::parse("not toml ["), Err(ConfigError::Parse(_))));
        let unknown = BASE.replace("fock = 1", "fock = 1\nspin = 2");
        assert!(matches!(RunConfig::parse(&unknown), Err(ConfigError::Parse(_))));
        let missing = BASE.replace("cutoff = 5.0\n", "");
        assert!(matches!(RunConfig::parse(&missing), Err(ConfigError::Invalid(_))));
        let odd = BASE.replace("steps = 40", "steps = 41");
        assert!(matches!(RunConfig::parse(&odd), Err(ConfigError::Core(_))));
        let small = BASE.replace("n_max = 8", "n_max = 1");
        assert!(RunConfig::parse(&small).is_err());
    }

    #[test]
    fn driven_cavity_needs_integral_route() {
        let driven = BASE.replace("kind = \"cavity\"", "kind = \"driven-cavity\"\ndrive = \"constant\"\ndrive_amplitude = 0.1");
        assert!(matches!(RunConfig::parse(&driven), Err(ConfigError::Invalid(_))));
        let ok = driven.replace("route = \"both\"", "route = \"integral\"");
        assert!(RunConfig::parse(&ok).is_ok());
    }
}
