//! Flat TOML run configuration.
//!
//! Every key is optional; missing keys take the defaults below, which
//! reproduce the reference parameter table. Unknown keys are rejected.

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::experiments::{linspace, InitialState, ProtocolConfig};
use crate::lindblad::PopulationVector;
use crate::model::{ExcitedZeeman, ModelParams, NonSpinConservingRates};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, clap::ValueEnum)]
#[serde(rename_all = "kebab-case")]
pub enum Command {
    Simulate,
    Ness,
    SweepGamma,
    SweepToff,
    SweepEntropy,
    Ledger,
}

impl Command {
    pub fn name(self) -> &'static str {
        match self {
            Command::Simulate => "simulate",
            Command::Ness => "ness",
            Command::SweepGamma => "sweep-gamma",
            Command::SweepToff => "sweep-toff",
            Command::SweepEntropy => "sweep-entropy",
            Command::Ledger => "ledger",
        }
    }
}

macro_rules! default_fns {
    ($($name:ident: $t:ty = $v:expr;)*) => {
        $(fn $name() -> $t { $v })*
    };
}

default_fns! {
    d_g_mhz: f64 = 2.87e3;
    d_e_mhz: f64 = 1.40e3;
    delta_eg_mhz: f64 = 4.7e8;
    delta_ig_mhz: f64 = 1.69e8;
    d_i_mhz: f64 = 2.88e8;
    gyro_mhz_per_tesla: f64 = 2.80e4;
    gamma_mhz: f64 = 77.0;
    gamma_p: f64 = 1.0;
    gamma_nsc_mhz: f64 = 0.25;
    kappa_ei_4_mhz: f64 = 0.0;
    kappa_ei_56_mhz: f64 = 15.0;
    kappa_i_mhz: f64 = 1.0e3;
    kappa_ig_mhz: f64 = 1.0;
    t_off_us: f64 = 10.0;
    sample_count: usize = 601;
    ness_tol: f64 = 1e-8;
    gamma_max: f64 = 5.0;
    gamma_points: usize = 101;
    toff_max_us: f64 = 10.0;
    toff_points: usize = 100;
    decomposition_gammas: Vec<f64> = vec![0.5, 1.0, 2.0];
}

/// Fully resolved configuration. Field names are the file's key vocabulary.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub command: Option<Command>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub out_dir: Option<PathBuf>,
    #[serde(default)]
    pub plot: bool,
    /// Log-scaled Γ_p axes in plots.
    #[serde(default)]
    pub plot_log_x: bool,
    /// Turn warnings into a non-zero exit.
    #[serde(default)]
    pub strict: bool,

    #[serde(default = "d_g_mhz")]
    pub d_g_mhz: f64,
    #[serde(default = "d_e_mhz")]
    pub d_e_mhz: f64,
    #[serde(default = "delta_eg_mhz")]
    pub delta_eg_mhz: f64,
    #[serde(default = "delta_ig_mhz")]
    pub delta_ig_mhz: f64,
    #[serde(default = "d_i_mhz")]
    pub d_i_mhz: f64,
    #[serde(default = "gyro_mhz_per_tesla")]
    pub gyro_mhz_per_tesla: f64,
    #[serde(default)]
    pub b_z_tesla: f64,
    #[serde(default = "gamma_mhz")]
    pub gamma_mhz: f64,
    #[serde(default = "gamma_p")]
    pub gamma_p: f64,
    #[serde(default = "gamma_nsc_mhz")]
    pub gamma_42_mhz: f64,
    #[serde(default = "gamma_nsc_mhz")]
    pub gamma_43_mhz: f64,
    #[serde(default = "gamma_nsc_mhz")]
    pub gamma_51_mhz: f64,
    #[serde(default = "gamma_nsc_mhz")]
    pub gamma_61_mhz: f64,
    #[serde(default = "kappa_ei_4_mhz")]
    pub kappa_ei_4_mhz: f64,
    #[serde(default = "kappa_ei_56_mhz")]
    pub kappa_ei_5_mhz: f64,
    #[serde(default = "kappa_ei_56_mhz")]
    pub kappa_ei_6_mhz: f64,
    #[serde(default = "kappa_i_mhz")]
    pub kappa_i_mhz: f64,
    #[serde(default = "kappa_ig_mhz")]
    pub kappa_ig_1_mhz: f64,
    #[serde(default = "kappa_ig_mhz")]
    pub kappa_ig_2_mhz: f64,
    #[serde(default = "kappa_ig_mhz")]
    pub kappa_ig_3_mhz: f64,
    #[serde(default)]
    pub excited_zeeman: ExcitedZeeman,

    #[serde(default = "t_off_us")]
    pub t_off_us: f64,
    /// Defaults to `t_off_us + 20`.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub t_end_us: Option<f64>,
    #[serde(default = "sample_count")]
    pub sample_count: usize,
    #[serde(default = "ness_tol")]
    pub ness_tol: f64,
    /// Explicit initial populations; uniform on G when absent.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub initial_populations: Option<[f64; 8]>,

    #[serde(default)]
    pub gamma_min: f64,
    #[serde(default = "gamma_max")]
    pub gamma_max: f64,
    #[serde(default = "gamma_points")]
    pub gamma_points: usize,
    /// The t_off grid is `toff_max_us · k / toff_points`, `k = 1..=toff_points`.
    #[serde(default = "toff_max_us")]
    pub toff_max_us: f64,
    #[serde(default = "toff_points")]
    pub toff_points: usize,
    #[serde(default = "decomposition_gammas")]
    pub decomposition_gammas: Vec<f64>,
}

impl Default for RunConfig {
    fn default() -> Self {
        toml::from_str("").expect("empty config deserializes")
    }
}

/// Maps a validation field name to its config key.
fn key_of(field: &str) -> String {
    match field {
        "gyro" => "gyro_mhz_per_tesla".into(),
        "b_z" => "b_z_tesla".into(),
        "t_off" | "t_end" => format!("{field}_us"),
        "d_g" | "d_e" | "delta_eg" | "delta_ig" | "d_i" | "gamma" | "kappa_i" => {
            format!("{field}_mhz")
        }
        f if f.starts_with("gamma_4")
            || f.starts_with("gamma_5")
            || f.starts_with("gamma_6")
            || f.starts_with("kappa_") =>
        {
            format!("{f}_mhz")
        }
        f => f.into(),
    }
}

/// 1-based line on which `key` is assigned, if any.
fn line_of(src: &str, key: &str) -> Option<usize> {
    src.lines().position(|l| {
        l.split_once('=')
            .map(|(k, _)| k.trim().trim_matches('"') == key)
            .unwrap_or(false)
    })
    .map(|i| i + 1)
}

fn line_at(src: &str, offset: usize) -> usize {
    src[..offset.min(src.len())].matches('\n').count() + 1
}

fn config_error(src: &str, key: Option<String>, msg: impl Into<String>) -> Error {
    let line = key.as_deref().and_then(|k| line_of(src, k));
    Error::Config {
        key,
        line,
        msg: msg.into(),
    }
}

impl RunConfig {
    /// Parses and validates configuration text, applying defaults.
    pub fn parse(src: &str) -> Result<Self> {
        let mut cfg: RunConfig = toml::from_str(src).map_err(|e| {
            let line = e.span().map(|s| line_at(src, s.start));
            let key = e
                .message()
                .split('`')
                .nth(1)
                .filter(|_| e.message().starts_with("unknown field"))
                .map(str::to_owned)
                .or_else(|| {
                    line.and_then(|l| src.lines().nth(l - 1))
                        .and_then(|t| t.split_once('='))
                        .map(|(k, _)| k.trim().trim_matches('"').to_owned())
                });
            Error::Config {
                key,
                line,
                msg: e.message().trim().to_owned(),
            }
        })?;
        cfg.t_end_us.get_or_insert(cfg.t_off_us + 20.0);
        cfg.validate().map_err(|e| match e {
            Error::InvalidParameter { field, reason } => {
                config_error(src, Some(key_of(field)), reason)
            }
            Error::Config { .. } => e,
            other => config_error(src, None, other.to_string()),
        })?;
        Ok(cfg)
    }

    pub fn from_file(path: &Path) -> Result<Self> {
        let src = std::fs::read_to_string(path).map_err(|e| Error::Config {
            key: None,
            line: None,
            msg: format!("cannot read {}: {e}", path.display()),
        })?;
        Self::parse(&src)
    }

    /// TOML text listing every resolved value.
    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("config serializes")
    }

    pub fn validate(&self) -> Result<()> {
        self.model_params().validate()?;
        self.protocol()?.validate()?;
        if !(self.gamma_min.is_finite() && self.gamma_min >= 0.0) {
            return Err(Error::invalid("gamma_min", "must be finite and >= 0"));
        }
        if !(self.gamma_max.is_finite() && self.gamma_max > self.gamma_min) {
            return Err(Error::invalid("gamma_max", "must exceed gamma_min"));
        }
        if self.gamma_points < 2 {
            return Err(Error::invalid("gamma_points", "must be >= 2"));
        }
        if !(self.toff_max_us.is_finite() && self.toff_max_us > 0.0) {
            return Err(Error::invalid("toff_max_us", "must be > 0"));
        }
        if self.toff_points < 1 {
            return Err(Error::invalid("toff_points", "must be >= 1"));
        }
        if self
            .decomposition_gammas
            .iter()
            .any(|g| !(g.is_finite() && *g >= 0.0))
        {
            return Err(Error::invalid("decomposition_gammas", "values must be finite and >= 0"));
        }
        Ok(())
    }

    pub fn model_params(&self) -> ModelParams {
        ModelParams {
            d_g: self.d_g_mhz,
            d_e: self.d_e_mhz,
            delta_eg: self.delta_eg_mhz,
            delta_ig: self.delta_ig_mhz,
            d_i: self.d_i_mhz,
            gyro: self.gyro_mhz_per_tesla,
            b_z: self.b_z_tesla,
            gamma: self.gamma_mhz,
            gamma_p: self.gamma_p,
            gamma_nsc: NonSpinConservingRates {
                g42: self.gamma_42_mhz,
                g43: self.gamma_43_mhz,
                g51: self.gamma_51_mhz,
                g61: self.gamma_61_mhz,
            },
            kappa_ei: [self.kappa_ei_4_mhz, self.kappa_ei_5_mhz, self.kappa_ei_6_mhz],
            kappa_i: self.kappa_i_mhz,
            kappa_ig: [self.kappa_ig_1_mhz, self.kappa_ig_2_mhz, self.kappa_ig_3_mhz],
            excited_zeeman: self.excited_zeeman,
        }
    }

    pub fn protocol(&self) -> Result<ProtocolConfig> {
        let initial_state = match self.initial_populations {
            None => InitialState::UniformGround,
            Some(p) => InitialState::Explicit(
                PopulationVector::new(p)
                    .map_err(|e| Error::invalid("initial_populations", e.to_string()))?,
            ),
        };
        Ok(ProtocolConfig {
            gamma_p: self.gamma_p,
            t_off: self.t_off_us,
            t_end: self.t_end_us.unwrap_or(self.t_off_us + 20.0),
            sample_count: self.sample_count,
            b_z: self.b_z_tesla,
            ness_tol: self.ness_tol,
            initial_state,
        })
    }

    pub fn gamma_grid(&self) -> Vec<f64> {
        linspace(self.gamma_min, self.gamma_max, self.gamma_points)
    }

    pub fn toff_grid(&self) -> Vec<f64> {
        (1..=self.toff_points)
            .map(|k| self.toff_max_us * k as f64 / self.toff_points as f64)
            .collect()
    }

    pub fn decomposition_configs(&self) -> Result<Vec<ProtocolConfig>> {
        let base = self.protocol()?;
        Ok(self
            .decomposition_gammas
            .iter()
            .map(|g| base.clone().with_gamma_p(*g))
            .collect())
    }
}
