//! Flat TOML run configuration.
//!
//! Frequencies are ordinary frequencies (`f` means `f` MHz or kHz as the key
//! suffix says); they are converted to rad/µs only when parameters are built.

use std::fmt;
use std::path::Path;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::experiments::{linspace, SweepGrid, SweepOptions};
use crate::model::{angular, CouplingModel, ProtocolKind};
use crate::{BlochAngle, Params};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Command {
    Dynamics,
    BlochSweep,
    NoiseHeatmap,
    ThermalSweep,
    Validate,
}

impl Command {
    pub const ALL: [Command; 5] =
        [Self::Dynamics, Self::BlochSweep, Self::NoiseHeatmap, Self::ThermalSweep, Self::Validate];

    pub fn name(self) -> &'static str {
        match self {
            Self::Dynamics => "dynamics",
            Self::BlochSweep => "bloch-sweep",
            Self::NoiseHeatmap => "noise-heatmap",
            Self::ThermalSweep => "thermal-sweep",
            Self::Validate => "validate",
        }
    }

    fn sweeps_coupling(self) -> bool {
        matches!(self, Self::NoiseHeatmap | Self::ThermalSweep)
    }
}

impl fmt::Display for Command {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Command {
    type Err = ConfigError;

    fn from_str(s: &str) -> Result<Self, ConfigError> {
        Self::ALL
            .into_iter()
            .find(|c| c.name() == s)
            .ok_or_else(|| ConfigError(format!("unknown command `{s}`")))
    }
}

#[derive(Clone, Debug, PartialEq, Eq, thiserror::Error)]
#[error("{0}")]
pub struct ConfigError(pub String);

/// Keys accepted in a config file or via `--set`.
#[derive(Clone, Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
struct ConfigFile {
    command: Option<Command>,
    kind: Option<ProtocolKind>,
    coupling: Option<CouplingModel>,
    lambda_mhz: Option<f64>,
    lambda_i_mhz: Option<f64>,
    lambda_sq_mhz: Option<f64>,
    omega_mhz: Option<f64>,
    omega_tilde_mhz: Option<f64>,
    delta_mhz: Option<f64>,
    detuning_over_lambda: Option<f64>,
    kappa_mhz: Option<f64>,
    gamma_r_khz: Option<f64>,
    gamma_s_khz: Option<f64>,
    gamma_sq_khz: Option<f64>,
    gamma_phi_khz: Option<f64>,
    nbar: Option<f64>,
    fock_dim: Option<usize>,
    theta_rad: Option<f64>,
    phi_rad: Option<f64>,
    theta_steps: Option<usize>,
    phi_steps: Option<usize>,
    lambda_over_kappa_min: Option<f64>,
    lambda_over_kappa_max: Option<f64>,
    lambda_over_kappa_points: Option<usize>,
    omega_over_kappa_min: Option<f64>,
    omega_over_kappa_max: Option<f64>,
    omega_over_kappa_points: Option<usize>,
    omega_over_lambda: Option<f64>,
    nbar_list: Option<Vec<f64>>,
    workers: Option<usize>,
}

/// Fully resolved configuration; every key is explicit, so its TOML echo
/// parses back to the same value.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct RunConfig {
    pub command: Command,
    pub kind: ProtocolKind,
    pub coupling: CouplingModel,
    pub lambda_i_mhz: f64,
    pub lambda_sq_mhz: f64,
    pub omega_mhz: f64,
    pub omega_tilde_mhz: f64,
    pub delta_mhz: f64,
    pub detuning_over_lambda: f64,
    pub kappa_mhz: f64,
    pub gamma_r_khz: f64,
    pub gamma_s_khz: f64,
    pub gamma_sq_khz: f64,
    pub gamma_phi_khz: f64,
    pub nbar: f64,
    pub fock_dim: usize,
    pub theta_rad: f64,
    pub phi_rad: f64,
    pub theta_steps: usize,
    pub phi_steps: usize,
    pub lambda_over_kappa_min: f64,
    pub lambda_over_kappa_max: f64,
    pub lambda_over_kappa_points: usize,
    pub omega_over_kappa_min: f64,
    pub omega_over_kappa_max: f64,
    pub omega_over_kappa_points: usize,
    pub omega_over_lambda: f64,
    pub nbar_list: Vec<f64>,
    pub workers: usize,
}

fn parse_table(text: &str, origin: &str) -> Result<toml::Table, ConfigError> {
    text.parse::<toml::Table>().map_err(|e| ConfigError(format!("{origin}: {e}")))
}

/// Applies one `key=value` override; values are read as TOML, falling back
/// to a bare string.
pub fn apply_override(table: &mut toml::Table, assignment: &str) -> Result<(), ConfigError> {
    let (key, value) = assignment
        .split_once('=')
        .ok_or_else(|| ConfigError(format!("override `{assignment}` is not key=value")))?;
    let key = key.trim();
    if key.is_empty() {
        return Err(ConfigError(format!("override `{assignment}` has an empty key")));
    }
    let value = value.trim();
    let parsed = format!("v = {value}")
        .parse::<toml::Table>()
        .ok()
        .and_then(|mut t| t.remove("v"))
        .unwrap_or_else(|| toml::Value::String(value.to_string()));
    table.insert(key.to_string(), parsed);
    Ok(())
}

fn nonnegative(name: &str, value: f64) -> Result<f64, ConfigError> {
    if !value.is_finite() || value < 0.0 {
        return Err(ConfigError(format!("{name} must be a finite value >= 0, got {value}")));
    }
    Ok(value)
}

fn positive(name: &str, value: f64) -> Result<f64, ConfigError> {
    if !value.is_finite() || value <= 0.0 {
        return Err(ConfigError(format!("{name} must be > 0, got {value}")));
    }
    Ok(value)
}

impl RunConfig {
    /// Parses config text plus overrides for `command`.
    pub fn parse(command: Command, text: &str, overrides: &[String]) -> Result<Self, ConfigError> {
        let mut table = parse_table(text, "config")?;
        for o in overrides {
            apply_override(&mut table, o)?;
        }
        let file: ConfigFile = toml::Value::Table(table)
            .try_into()
            .map_err(|e: toml::de::Error| ConfigError(format!("config: {}", e.message())))?;
        Self::resolve(command, file)
    }

    pub fn load(command: Command, path: &Path, overrides: &[String]) -> Result<Self, ConfigError> {
        let text = std::fs::read_to_string(path).map_err(|e| ConfigError(format!("{}: {e}", path.display())))?;
        Self::parse(command, &text, overrides)
    }

    fn resolve(command: Command, f: ConfigFile) -> Result<Self, ConfigError> {
        if let Some(c) = f.command {
            if c != command {
                return Err(ConfigError(format!("config is for `{c}`, but `{command}` was requested")));
            }
        }
        let kind = f.kind.ok_or_else(|| ConfigError("missing required key `kind`".into()))?;
        let sweeps = command.sweeps_coupling();
        let required = |name: &str, v: Option<f64>| -> Result<f64, ConfigError> {
            match v {
                Some(v) => Ok(v),
                None if sweeps => Ok(0.0),
                None => Err(ConfigError(format!("missing required key `{name}`"))),
            }
        };
        let lambda = f.lambda_mhz;
        let lambda_i = nonnegative("lambda_i_mhz", required("lambda_mhz", f.lambda_i_mhz.or(lambda))?)?;
        let lambda_sq = nonnegative("lambda_sq_mhz", required("lambda_mhz", f.lambda_sq_mhz.or(lambda))?)?;
        let omega = nonnegative("omega_mhz", required("omega_mhz", f.omega_mhz)?)?;
        let omega_tilde = nonnegative("omega_tilde_mhz", f.omega_tilde_mhz.unwrap_or(3.0 * omega))?;
        let detuning_over_lambda = f.detuning_over_lambda.unwrap_or(12.0);
        if !detuning_over_lambda.is_finite() {
            return Err(ConfigError("detuning_over_lambda must be finite".into()));
        }
        let delta = match (f.delta_mhz, kind) {
            (Some(d), _) => d,
            (None, ProtocolKind::Dispersive) => detuning_over_lambda * lambda_i,
            (None, ProtocolKind::Resonant) => 0.0,
        };
        if !delta.is_finite() {
            return Err(ConfigError("delta_mhz must be finite".into()));
        }
        let kappa = nonnegative("kappa_mhz", f.kappa_mhz.unwrap_or(0.0))?;
        if sweeps && kappa <= 0.0 {
            return Err(ConfigError(format!("`{command}` needs kappa_mhz > 0")));
        }
        let nbar = nonnegative("nbar", f.nbar.unwrap_or(0.0))?;
        let nbar_list = f.nbar_list.unwrap_or_else(|| vec![0.0, 0.6]);
        for &n in &nbar_list {
            nonnegative("nbar_list entry", n)?;
        }
        let thermal = nbar > 0.0 || (command == Command::ThermalSweep && nbar_list.iter().any(|&n| n > 0.0));
        let fock_dim = f.fock_dim.unwrap_or(if thermal { Params::THERMAL_FOCK_DIM } else { Params::DEFAULT_FOCK_DIM });
        if fock_dim < 2 {
            return Err(ConfigError(format!("fock_dim must be >= 2, got {fock_dim}")));
        }
        let cfg = Self {
            command,
            kind,
            coupling: f.coupling.unwrap_or_default(),
            lambda_i_mhz: lambda_i,
            lambda_sq_mhz: lambda_sq,
            omega_mhz: omega,
            omega_tilde_mhz: omega_tilde,
            delta_mhz: delta,
            detuning_over_lambda,
            kappa_mhz: kappa,
            gamma_r_khz: nonnegative("gamma_r_khz", f.gamma_r_khz.unwrap_or(0.0))?,
            gamma_s_khz: nonnegative("gamma_s_khz", f.gamma_s_khz.unwrap_or(0.0))?,
            gamma_sq_khz: nonnegative("gamma_sq_khz", f.gamma_sq_khz.unwrap_or(0.0))?,
            gamma_phi_khz: nonnegative("gamma_phi_khz", f.gamma_phi_khz.unwrap_or(0.0))?,
            nbar,
            fock_dim,
            theta_rad: f.theta_rad.unwrap_or(0.0),
            phi_rad: f.phi_rad.unwrap_or(0.0),
            theta_steps: f.theta_steps.unwrap_or(SweepGrid::DEFAULT_THETA_STEPS),
            phi_steps: f.phi_steps.unwrap_or(SweepGrid::DEFAULT_PHI_STEPS),
            lambda_over_kappa_min: f.lambda_over_kappa_min.unwrap_or(match command {
                Command::ThermalSweep => 1.0,
                _ => 0.5,
            }),
            lambda_over_kappa_max: f.lambda_over_kappa_max.unwrap_or(12.0),
            lambda_over_kappa_points: f.lambda_over_kappa_points.unwrap_or(match command {
                Command::ThermalSweep => 23,
                _ => 40,
            }),
            omega_over_kappa_min: f.omega_over_kappa_min.unwrap_or(0.5),
            omega_over_kappa_max: f.omega_over_kappa_max.unwrap_or(40.0),
            omega_over_kappa_points: f.omega_over_kappa_points.unwrap_or(40),
            omega_over_lambda: positive("omega_over_lambda", f.omega_over_lambda.unwrap_or(3.0))?,
            nbar_list,
            workers: f.workers.unwrap_or(1).max(1),
        };
        for (name, v) in [("theta_rad", cfg.theta_rad), ("phi_rad", cfg.phi_rad)] {
            if !v.is_finite() {
                return Err(ConfigError(format!("{name} must be finite")));
            }
        }
        cfg.params().validate().map_err(|e| ConfigError(e.to_string()))?;
        cfg.grid()?;
        Ok(cfg)
    }

    /// Model parameters in rad/µs.
    pub fn params(&self) -> Params {
        Params {
            lambda_i: angular(self.lambda_i_mhz),
            lambda_sq: angular(self.lambda_sq_mhz),
            omega_laser: angular(self.omega_mhz),
            omega_laser_tilde: angular(self.omega_tilde_mhz),
            delta: angular(self.delta_mhz),
            kappa: angular(self.kappa_mhz),
            gamma_r: angular(self.gamma_r_khz * 1e-3),
            gamma_s: angular(self.gamma_s_khz * 1e-3),
            gamma_sq: angular(self.gamma_sq_khz * 1e-3),
            gamma_phi: angular(self.gamma_phi_khz * 1e-3),
            nbar: self.nbar,
            fock_dim: self.fock_dim,
        }
    }

    pub fn bloch(&self) -> BlochAngle<f64> {
        BlochAngle::new(self.theta_rad, self.phi_rad)
    }

    pub fn sweep_options(&self) -> SweepOptions {
        SweepOptions {
            workers: self.workers,
            detuning_over_lambda: self.detuning_over_lambda,
            omega_over_lambda: self.omega_over_lambda,
            omega_tilde_over_omega: if self.omega_mhz > 0.0 { self.omega_tilde_mhz / self.omega_mhz } else { 3.0 },
        }
    }

    /// Grid for the sweep commands; `None` for the others.
    pub fn grid(&self) -> Result<Option<SweepGrid>, ConfigError> {
        let tag = format!("{}:{}", self.command, self.kind);
        let lambda_axis =
            || linspace(self.lambda_over_kappa_min, self.lambda_over_kappa_max, self.lambda_over_kappa_points);
        let grid = match self.command {
            Command::BlochSweep => SweepGrid::bloch(self.theta_steps, self.phi_steps),
            Command::NoiseHeatmap => SweepGrid::heatmap(
                lambda_axis(),
                linspace(self.omega_over_kappa_min, self.omega_over_kappa_max, self.omega_over_kappa_points),
            ),
            Command::ThermalSweep => SweepGrid::thermal(self.nbar_list.clone(), lambda_axis()),
            Command::Dynamics | Command::Validate => return Ok(None),
        };
        grid.map(|g| Some(g.with_scenario(tag))).map_err(|e| ConfigError(e.to_string()))
    }

    /// TOML text that parses back to `self`.
    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("plain config serializes")
    }
}
