//! Run configuration: a TOML file with four sections plus `--set` overrides.

use std::fmt;
use std::path::PathBuf;

use serde::{Deserialize, Serialize};
use skm_core::experiments::SweepConfig;
use skm_core::sim::{
    DiffusionSpec, DriftKind, DriftSpec, InitialState, Model, NoiseSpec, PiecewiseLinear, SimGrid,
};
use skm_core::spectral::{dirichlet_eigens, SpectralField};

pub const DEFAULT_CONFIG: &str = include_str!("../default.toml");

/// Invalid or unreadable configuration (exit code 2).
#[derive(Debug)]
pub struct ConfigError(pub String);

impl fmt::Display for ConfigError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "config error: {}", self.0)
    }
}

impl std::error::Error for ConfigError {}

fn fail<T>(msg: impl Into<String>) -> Result<T, ConfigError> {
    Err(ConfigError(msg.into()))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum OneOrMany {
    One(f64),
    Many(Vec<f64>),
}

impl OneOrMany {
    pub fn values(&self) -> Vec<f64> {
        match self {
            OneOrMany::One(x) => vec![*x],
            OneOrMany::Many(xs) => xs.clone(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Geometry {
    #[serde(rename = "L")]
    pub length: f64,
    pub n_modes: usize,
    pub collocation_size: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum DriftConfig {
    Zero,
    Linear { a: f64 },
    Sine { a: f64 },
    Table { x: Vec<f64>, y: Vec<f64> },
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum DiffusionConfig {
    Additive,
    Nemytskii { a: f64 },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "law", rename_all = "snake_case", deny_unknown_fields)]
pub enum NoiseConfig {
    Power { r: f64 },
    Explicit { lambda: Vec<f64> },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Physics {
    pub mu: OneOrMany,
    pub eps: OneOrMany,
    pub drift: DriftConfig,
    pub diffusion: DiffusionConfig,
    pub noise: NoiseConfig,
    /// Leading coefficients of `u₀` as `[re, im]` pairs; the rest are zero.
    #[serde(default)]
    pub u0: Vec<[f64; 2]>,
    #[serde(default)]
    pub v0: Vec<[f64; 2]>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Simulation {
    #[serde(rename = "T")]
    pub t_final: f64,
    pub dt: f64,
    pub p: f64,
    #[serde(rename = "M")]
    pub paths: usize,
    pub master_seed: u64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Format {
    Csv,
    Json,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Output {
    pub directory: PathBuf,
    pub formats: Vec<Format>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    pub geometry: Geometry,
    pub physics: Physics,
    pub simulation: Simulation,
    pub output: Output,
}

/// Parse a `--set` value as a TOML literal, falling back to a bare string.
fn parse_literal(raw: &str) -> toml::Value {
    match toml::from_str::<toml::Table>(&format!("v = {raw}")) {
        Ok(mut t) => t.remove("v").unwrap_or_else(|| toml::Value::String(raw.into())),
        Err(_) => toml::Value::String(raw.into()),
    }
}

fn apply_override(root: &mut toml::Table, assignment: &str) -> Result<(), ConfigError> {
    let Some((path, raw)) = assignment.split_once('=') else {
        return fail(format!("override `{assignment}` is not of the form key=value"));
    };
    let keys: Vec<&str> = path.trim().split('.').collect();
    if keys.iter().any(|k| k.is_empty()) {
        return fail(format!("bad key path `{path}`"));
    }
    let (last, parents) = keys.split_last().expect("split yields one key");
    let mut table = root;
    for k in parents {
        let entry = table
            .entry(k.to_string())
            .or_insert_with(|| toml::Value::Table(toml::Table::new()));
        table = match entry {
            toml::Value::Table(t) => t,
            _ => return fail(format!("`{k}` in `{path}` is not a section")),
        };
    }
    table.insert(last.to_string(), parse_literal(raw.trim()));
    Ok(())
}

impl RunConfig {
    /// Parse `text`, then apply `key.path=value` overrides.
    pub fn load(text: &str, overrides: &[String]) -> Result<Self, ConfigError> {
        // parse once from text so errors carry line numbers
        toml::from_str::<RunConfig>(text).map_err(|e| ConfigError(e.to_string()))?;
        let mut root: toml::Table = toml::from_str(text).map_err(|e| ConfigError(e.to_string()))?;
        for o in overrides {
            apply_override(&mut root, o)?;
        }
        toml::Value::Table(root)
            .try_into()
            .map_err(|e: toml::de::Error| ConfigError(format!("after overrides: {e}")))
    }

    pub fn mus(&self) -> Vec<f64> {
        self.physics.mu.values()
    }

    pub fn epss(&self) -> Vec<f64> {
        self.physics.eps.values()
    }

    /// Checks every command shares; command-specific ones live with the command.
    pub fn validate(&self) -> Result<(), ConfigError> {
        let g = &self.geometry;
        if !(g.length > 0.0) || !g.length.is_finite() {
            return fail(format!("geometry.L must be positive, got {}", g.length));
        }
        let mus = self.mus();
        let epss = self.epss();
        if mus.is_empty() || epss.is_empty() {
            return fail("physics.mu and physics.eps need at least one value");
        }
        if let Some(m) = mus.iter().find(|m| !(**m > 0.0) || !m.is_finite()) {
            return fail(format!("physics.mu must be positive, got {m}"));
        }
        if let Some(e) = epss.iter().find(|e| !(**e >= 0.0) || !e.is_finite()) {
            return fail(format!("physics.eps must be nonnegative, got {e}"));
        }
        let s = &self.simulation;
        let min_mu = mus.iter().cloned().fold(f64::INFINITY, f64::min);
        if s.dt > min_mu / 10.0 {
            return fail(format!("simulation.dt = {} exceeds μ/10 = {} for μ = {min_mu}", s.dt, min_mu / 10.0));
        }
        if s.paths == 0 {
            return fail("simulation.M must be at least 1");
        }
        if self.physics.u0.len() > g.n_modes || self.physics.v0.len() > g.n_modes {
            return fail("more initial coefficients than modes");
        }
        if self.output.formats.is_empty() {
            return fail("output.formats is empty");
        }
        self.grid()?;
        self.model()?;
        Ok(())
    }

    pub fn grid(&self) -> Result<SimGrid, ConfigError> {
        let s = &self.simulation;
        SimGrid::new(s.t_final, s.dt, self.geometry.n_modes, self.geometry.collocation_size, s.p)
            .map_err(|e| ConfigError(e.to_string()))
    }

    pub fn model(&self) -> Result<Model, ConfigError> {
        let g = &self.geometry;
        let err = |e: skm_core::Error| ConfigError(e.to_string());
        let eig = dirichlet_eigens(g.length, g.n_modes).map_err(err)?;
        let drift = match &self.physics.drift {
            DriftConfig::Zero => DriftSpec::zero(),
            DriftConfig::Linear { a } => DriftSpec::linear(*a),
            DriftConfig::Sine { a } => DriftSpec::sine(*a),
            DriftConfig::Table { x, y } => DriftSpec::autonomous(DriftKind::Table {
                table: PiecewiseLinear::new(x.clone(), y.clone()).map_err(err)?,
            }),
        };
        let diffusion = match self.physics.diffusion {
            DiffusionConfig::Additive => DiffusionSpec::AdditiveIdentity,
            DiffusionConfig::Nemytskii { a } => DiffusionSpec::DiagonalNemytskii { a },
        };
        let noise = match &self.physics.noise {
            NoiseConfig::Power { r } => NoiseSpec::power(*r, g.n_modes, &eig).map_err(err)?,
            NoiseConfig::Explicit { lambda } => {
                if lambda.len() != g.n_modes {
                    return fail(format!("{} noise weights for {} modes", lambda.len(), g.n_modes));
                }
                NoiseSpec::explicit(lambda.clone()).map_err(err)?
            }
        };
        Model::new(eig, drift, diffusion, noise, g.collocation_size).map_err(err)
    }

    fn field(&self, leading: &[[f64; 2]]) -> Result<SpectralField, ConfigError> {
        let mut c = leading.to_vec();
        c.resize(self.geometry.n_modes, [0.0, 0.0]);
        SpectralField::from_coeffs(c).map_err(|e| ConfigError(e.to_string()))
    }

    pub fn initial_state(&self) -> Result<InitialState, ConfigError> {
        Ok(InitialState {
            u0: self.field(&self.physics.u0)?,
            v0: self.field(&self.physics.v0)?,
        })
    }

    pub fn sweep_config(&self) -> Result<SweepConfig, ConfigError> {
        Ok(SweepConfig {
            model: self.model()?,
            init: self.initial_state()?,
            grid: self.grid()?,
            master_seed: self.simulation.master_seed,
        })
    }

    pub fn wants(&self, f: Format) -> bool {
        self.output.formats.contains(&f)
    }
}
