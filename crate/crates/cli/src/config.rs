//! Scenario files: TOML with every table closed to unknown keys.

use std::path::Path;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::CliError;

#[derive(Debug, Clone, PartialEq, Deserialize, Serialize)]
#[serde(deny_unknown_fields)]
pub struct ScenarioConfig {
    pub name: String,
    #[serde(default)]
    pub seed: u64,
    pub universe: UniverseConfig,
    #[serde(default, rename = "analysis")]
    pub analyses: Vec<AnalysisConfig>,
    #[serde(default)]
    pub output: OutputConfig,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Deserialize, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Constructor {
    DoubleConstrainedState,
    Universe3plus1,
    OscillatorUniverse,
    KgUniverse,
    DiracUniverse,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Deserialize, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum BranchKey {
    #[default]
    Positive,
    Negative,
    Both,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Deserialize, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum FrameKey {
    #[default]
    Approximate,
    Exact,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Deserialize, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum ClockModeKey {
    #[default]
    Exact,
    ContinuousOnly,
}

/// Universe block. Keys follow the constructor parameters; unused keys for
/// a constructor are rejected at build time.
#[derive(Debug, Clone, PartialEq, Deserialize, Serialize)]
#[serde(deny_unknown_fields)]
pub struct UniverseConfig {
    pub constructor: Constructor,
    /// Spatial axes; 1 unless given (3 for `universe_3plus1`).
    pub axes: Option<usize>,
    /// System levels per axis.
    pub d: Option<usize>,
    /// Lowest system momentum.
    pub p0: Option<f64>,
    /// Spatial period `L`.
    pub period: Option<f64>,
    pub rod_mass: Option<f64>,
    pub sys_mass: Option<f64>,
    /// Rod mass in units of the system mass; overrides `rod_mass`.
    pub mass_ratio: Option<f64>,
    /// Particle mass of relativistic systems.
    pub mass: Option<f64>,
    pub branch: Option<BranchKey>,
    pub frame: Option<FrameKey>,
    pub clock_mode: Option<ClockModeKey>,
    /// Equally spaced clock ladder with this many levels.
    pub clock_levels: Option<usize>,
    /// Real parts of the coefficients; drawn from the seed when absent.
    pub coefficients: Option<Vec<f64>>,
    pub coefficients_im: Option<Vec<f64>>,
    pub rod_frequency: Option<f64>,
    pub sys_frequency: Option<f64>,
    pub center: Option<f64>,
    pub sigma: Option<f64>,
    pub truncation: Option<usize>,
    pub quadrature_points: Option<usize>,
    pub half_width_sigmas: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Deserialize, Serialize)]
#[serde(tag = "op", rename_all = "snake_case", deny_unknown_fields)]
pub enum AnalysisConfig {
    /// `P(y_l | x_j, t_m)` on a `(t_m, y_l - x_j)` grid.
    ConditionalProbDiscrete { name: String, clock_points: usize, rod_points: usize, sys_points: usize, rod_index: usize },
    DensityDistribution { name: String, x: Vec<f64>, t: Option<f64> },
    /// Random coefficient sets (`samples`) on the configured spectra.
    SpeedLimitReport { name: String, samples: usize },
    SpatialResolution { name: String, samples: usize, threshold: f64 },
    Covariance { name: String, x_a: Vec<f64>, x_b: Vec<f64>, t_a: f64, t_b: f64 },
    SchrodingerFd { name: String, t: f64, spacing: Vec<f64> },
    /// Two-time probabilities for every reading pair at clock indices `first` and `second`.
    TwoTime { name: String, first: usize, second: usize },
    HeavyReferenceResidual { name: String, t: f64, x: Vec<f64>, spacing: f64 },
    KgResidual { name: String, t: Vec<f64>, x: Vec<f64>, spacing: f64 },
    DiracResidual { name: String, t: Vec<f64>, x: Vec<f64>, spacing: f64 },
}

impl AnalysisConfig {
    pub fn name(&self) -> &str {
        match self {
            AnalysisConfig::ConditionalProbDiscrete { name, .. }
            | AnalysisConfig::DensityDistribution { name, .. }
            | AnalysisConfig::SpeedLimitReport { name, .. }
            | AnalysisConfig::SpatialResolution { name, .. }
            | AnalysisConfig::Covariance { name, .. }
            | AnalysisConfig::SchrodingerFd { name, .. }
            | AnalysisConfig::TwoTime { name, .. }
            | AnalysisConfig::HeavyReferenceResidual { name, .. }
            | AnalysisConfig::KgResidual { name, .. }
            | AnalysisConfig::DiracResidual { name, .. } => name,
        }
    }

    pub fn op(&self) -> &'static str {
        match self {
            AnalysisConfig::ConditionalProbDiscrete { .. } => "conditional_prob_discrete",
            AnalysisConfig::DensityDistribution { .. } => "density_distribution",
            AnalysisConfig::SpeedLimitReport { .. } => "speed_limit_report",
            AnalysisConfig::SpatialResolution { .. } => "spatial_resolution",
            AnalysisConfig::Covariance { .. } => "covariance",
            AnalysisConfig::SchrodingerFd { .. } => "schrodinger_fd",
            AnalysisConfig::TwoTime { .. } => "two_time",
            AnalysisConfig::HeavyReferenceResidual { .. } => "heavy_reference_residual",
            AnalysisConfig::KgResidual { .. } => "kg_residual",
            AnalysisConfig::DiracResidual { .. } => "dirac_residual",
        }
    }

    fn spacing_mut(&mut self) -> Option<&mut f64> {
        match self {
            AnalysisConfig::HeavyReferenceResidual { spacing, .. }
            | AnalysisConfig::KgResidual { spacing, .. }
            | AnalysisConfig::DiracResidual { spacing, .. } => Some(spacing),
            _ => None,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Deserialize, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Format {
    Csv,
    Json,
}

#[derive(Debug, Clone, PartialEq, Deserialize, Serialize)]
#[serde(deny_unknown_fields)]
pub struct OutputConfig {
    #[serde(default = "default_directory")]
    pub directory: String,
    #[serde(default = "default_formats")]
    pub formats: Vec<Format>,
    /// Fixed decimals; shortest round-trip when absent.
    pub precision: Option<usize>,
}

fn default_directory() -> String {
    "paw-out".into()
}

fn default_formats() -> Vec<Format> {
    vec![Format::Csv, Format::Json]
}

impl Default for OutputConfig {
    fn default() -> Self {
        OutputConfig { directory: default_directory(), formats: default_formats(), precision: None }
    }
}

/// Keys accepted by `sweep`.
pub const SWEEPABLE: &[&str] = &["mass_ratio", "spacing"];

#[derive(Debug, Clone)]
pub struct LoadedConfig {
    pub config: ScenarioConfig,
    /// Hex SHA-256 of the file bytes.
    pub hash: String,
}

pub fn parse(text: &str) -> Result<ScenarioConfig, CliError> {
    let cfg: ScenarioConfig = toml::from_str(text).map_err(|e| CliError::Config(e.to_string()))?;
    validate(&cfg)?;
    Ok(cfg)
}

pub fn load(path: &Path) -> Result<LoadedConfig, CliError> {
    let bytes = std::fs::read(path).map_err(|e| CliError::Config(format!("{}: {e}", path.display())))?;
    let text = String::from_utf8(bytes.clone()).map_err(|_| CliError::Config(format!("{}: not UTF-8", path.display())))?;
    let config = parse(&text).map_err(|e| match e {
        CliError::Config(m) => CliError::Config(format!("{}: {m}", path.display())),
        other => other,
    })?;
    Ok(LoadedConfig { config, hash: hash_bytes(&bytes) })
}

pub fn hash_bytes(bytes: &[u8]) -> String {
    hex::encode(Sha256::digest(bytes))
}

fn positive(key: &str, v: Option<f64>) -> Result<(), CliError> {
    match v {
        Some(x) if !(x > 0.0 && x.is_finite()) => Err(CliError::Config(format!("universe.{key} must be positive, got {x}"))),
        _ => Ok(()),
    }
}

fn validate(cfg: &ScenarioConfig) -> Result<(), CliError> {
    let u = &cfg.universe;
    for (k, v) in [
        ("period", u.period),
        ("rod_mass", u.rod_mass),
        ("sys_mass", u.sys_mass),
        ("mass_ratio", u.mass_ratio),
        ("rod_frequency", u.rod_frequency),
        ("sys_frequency", u.sys_frequency),
        ("sigma", u.sigma),
        ("half_width_sigmas", u.half_width_sigmas),
    ] {
        positive(k, v)?;
    }
    if let Some(m) = u.mass {
        if !(m >= 0.0 && m.is_finite()) {
            return Err(CliError::Config(format!("universe.mass must be non-negative, got {m}")));
        }
    }
    if u.d == Some(0) {
        return Err(CliError::Config("universe.d must be at least 1".into()));
    }
    let mut names: Vec<&str> = cfg.analyses.iter().map(|a| a.name()).collect();
    names.sort_unstable();
    if let Some(w) = names.windows(2).find(|w| w[0] == w[1]) {
        return Err(CliError::Config(format!("analysis name {:?} used twice", w[0])));
    }
    for n in &names {
        if n.is_empty() || !n.chars().all(|c| c.is_ascii_alphanumeric() || c == '_' || c == '-') {
            return Err(CliError::Config(format!("analysis name {n:?} must be [A-Za-z0-9_-]+")));
        }
    }
    if cfg.output.formats.is_empty() {
        return Err(CliError::Config("output.formats is empty".into()));
    }
    Ok(())
}

/// Copy of `cfg` with the sweep key set to `value`.
pub fn with_override(cfg: &ScenarioConfig, key: &str, value: f64) -> Result<ScenarioConfig, CliError> {
    let mut out = cfg.clone();
    match key {
        "mass_ratio" => {
            out.universe.mass_ratio = Some(value);
        }
        "spacing" => {
            let mut hit = false;
            for a in &mut out.analyses {
                if let Some(s) = a.spacing_mut() {
                    *s = value;
                    hit = true;
                }
            }
            if !hit {
                return Err(CliError::Config("no analysis in this scenario takes a spacing".into()));
            }
        }
        other => return Err(CliError::Config(format!("{other:?} is not sweepable (expected one of {SWEEPABLE:?})"))),
    }
    validate(&out)?;
    Ok(out)
}
