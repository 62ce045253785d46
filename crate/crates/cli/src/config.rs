//! Run configuration: JSON files with per-command sections, overridden by
//! command-line flags.

use std::path::Path;

use anyhow::{bail, Context, Result};
use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};

pub const SCHEMA_VERSION: u64 = 1;

/// Top level of a configuration file. Every section is optional.
#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FileConfig {
    pub schema_version: u64,
    #[serde(default)]
    pub seed: Option<u64>,
    #[serde(default)]
    pub compete: Option<serde_json::Value>,
    #[serde(default)]
    pub born: Option<serde_json::Value>,
    #[serde(default)]
    pub trajectory: Option<serde_json::Value>,
    #[serde(default)]
    pub billiard: Option<serde_json::Value>,
    #[serde(default, rename = "stability-map")]
    pub stability_map: Option<serde_json::Value>,
    #[serde(default)]
    pub analysis: Option<serde_json::Value>,
    #[serde(default)]
    pub synth: Option<serde_json::Value>,
}

impl FileConfig {
    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
        let cfg: FileConfig = serde_json::from_str(&text).with_context(|| format!("parsing {}", path.display()))?;
        if cfg.schema_version != SCHEMA_VERSION {
            bail!(
                "{}: schema_version {} is not supported (expected {SCHEMA_VERSION})",
                path.display(),
                cfg.schema_version
            );
        }
        Ok(cfg)
    }
}

/// Deserialises a command section, falling back to defaults.
pub fn section<T: DeserializeOwned + Default>(value: Option<&serde_json::Value>, name: &str) -> Result<T> {
    match value {
        None => Ok(T::default()),
        Some(v) => serde_json::from_value(v.clone()).with_context(|| format!("invalid `{name}` section")),
    }
}

/// Copies every flag that was given on the command line into the config.
macro_rules! apply_flags {
    ($cfg:expr, $args:expr; $($field:ident),* $(,)?) => {
        $( if let Some(v) = $args.$field.clone() { $cfg.$field = v.into(); } )*
    };
}
pub(crate) use apply_flags;

/// Mode-system parameters shared by `compete` and `trajectory`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SystemConfig {
    pub modes: usize,
    /// Gains per mode; a single value applies to every mode.
    pub gains: Vec<f64>,
    pub losses: Vec<f64>,
    pub noise: Vec<f64>,
    pub beta_diag: f64,
    pub beta_off: f64,
    /// Total initial population; defaults to `2 eta / gamma` of mode 0.
    pub z_total: Option<f64>,
    /// Initial population fractions; equal split by default.
    pub fractions: Option<Vec<f64>>,
    /// Step size as a fraction of `1 / max(gamma)`.
    pub rate_step: f64,
    /// Integration horizon (s); estimated from pilot runs when absent.
    pub t_end: Option<f64>,
    pub record_stride: usize,
    pub pilots: u64,
}

impl Default for SystemConfig {
    fn default() -> Self {
        SystemConfig {
            modes: 2,
            gains: vec![1.28e11],
            losses: vec![6.4e10],
            noise: vec![4e11],
            beta_diag: 1e-5,
            beta_off: 2e-5,
            z_total: None,
            fractions: None,
            rate_step: 0.01,
            t_end: None,
            record_stride: 10,
            pilots: 8,
        }
    }
}

fn broadcast(name: &str, v: &[f64], m: usize) -> Result<Vec<f64>> {
    match v.len() {
        1 => Ok(vec![v[0]; m]),
        n if n == m => Ok(v.to_vec()),
        n => bail!("`{name}` has {n} entries; expected 1 or {m}"),
    }
}

impl SystemConfig {
    pub fn mode_system(&self) -> Result<photon_chaos::sde::ModeSystem> {
        let m = self.modes;
        if m == 0 {
            bail!("`modes` must be at least 1");
        }
        Ok(photon_chaos::sde::ModeSystem::with_shared_saturation(
            broadcast("gains", &self.gains, m)?,
            broadcast("losses", &self.losses, m)?,
            broadcast("noise", &self.noise, m)?,
            self.beta_diag,
            self.beta_off,
        )?)
    }

    pub fn total_population(&self, sys: &photon_chaos::sde::ModeSystem) -> Result<f64> {
        match self.z_total {
            Some(z) => Ok(z),
            None => {
                let gamma = sys.net_gain(0);
                if !(gamma > 0.0) {
                    bail!("`z_total` is required when mode 0 has no net gain");
                }
                Ok(2.0 * sys.noise_strengths()[0] / gamma)
            }
        }
    }

    pub fn fractions(&self) -> Result<Vec<f64>> {
        let m = self.modes;
        let f = self.fractions.clone().unwrap_or_else(|| vec![1.0 / m as f64; m]);
        if f.len() != m {
            bail!("`fractions` has {} entries; expected {m}", f.len());
        }
        if f.iter().any(|x| !(*x >= 0.0)) || f.iter().sum::<f64>() <= 0.0 {
            bail!("`fractions` must be non-negative with a positive sum");
        }
        let s: f64 = f.iter().sum();
        Ok(f.iter().map(|x| x / s).collect())
    }
}
