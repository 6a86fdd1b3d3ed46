//! Experiment configuration: a strict key-value TOML file mapped onto
//! [`ExperimentConfig`]. Unknown keys are rejected and missing keys are
//! reported by name; dB/dBm quantities are converted to linear exactly once,
//! in [`ExperimentConfig::resolve`].

use std::fmt;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Downlink transmission schemes the harness can evaluate.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Method {
    #[serde(rename = "MRT")]
    Mrt,
    #[serde(rename = "FD-MMSE")]
    FdMmse,
    #[serde(rename = "OBS-HP")]
    ObsHp,
    #[serde(rename = "NOAS-HP")]
    NoasHp,
}

impl Method {
    pub const ALL: [Method; 4] = [Method::Mrt, Method::FdMmse, Method::ObsHp, Method::NoasHp];

    pub fn name(&self) -> &'static str {
        match self {
            Method::Mrt => "MRT",
            Method::FdMmse => "FD-MMSE",
            Method::ObsHp => "OBS-HP",
            Method::NoasHp => "NOAS-HP",
        }
    }
}

impl fmt::Display for Method {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

/// Full Monte-Carlo scenario description.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    /// Array size M.
    pub num_antennas: usize,
    /// User count K.
    pub num_users: usize,
    /// Multipath count P per user.
    pub paths_per_user: usize,
    /// Angular spread in degrees.
    pub angular_spread_deg: f64,
    /// Beam-grid oversampling V for the rotated schemes.
    pub oversampling: usize,
    /// Relative magnitude threshold for significant beams.
    pub beam_threshold: f64,
    /// RF-chain budget; defaults to the user count.
    #[serde(default)]
    pub rf_chains: Option<usize>,
    pub carrier_freq_mhz: f64,
    pub cell_radius_m: f64,
    pub min_distance_m: f64,
    pub shadowing_sigma_db: f64,
    pub dl_power_dbm: f64,
    pub user_noise_dbm: f64,
    /// Uplink training SNR points in dB; sum-rate runs use the first entry.
    pub ul_snr_db: Vec<f64>,
    pub trials: usize,
    pub seed: u64,
    pub methods: Vec<Method>,
    /// Array sizes for the orthogonality study.
    #[serde(default = "default_antenna_sweep")]
    pub antenna_sweep: Vec<usize>,
}

fn default_antenna_sweep() -> Vec<usize> {
    vec![16, 64, 256, 1024]
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        Self {
            num_antennas: 64,
            num_users: 4,
            paths_per_user: 20,
            angular_spread_deg: 1.0,
            oversampling: 4,
            beam_threshold: 0.5,
            rf_chains: None,
            carrier_freq_mhz: 3700.0,
            cell_radius_m: 1000.0,
            min_distance_m: 35.0,
            shadowing_sigma_db: 4.0,
            dl_power_dbm: 50.0,
            user_noise_dbm: -92.0,
            ul_snr_db: vec![25.0],
            trials: 500,
            seed: 1,
            methods: Method::ALL.to_vec(),
            antenna_sweep: default_antenna_sweep(),
        }
    }
}

impl ExperimentConfig {
    pub fn from_toml(text: &str) -> Result<Self> {
        let cfg: ExperimentConfig = toml::from_str(text).map_err(|e| Error::Config {
            path: "<inline>".into(),
            message: e.to_string(),
        })?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn to_toml(&self) -> String {
        toml::to_string_pretty(self).expect("config serializes")
    }

    pub fn validate(&self) -> Result<()> {
        for (name, value) in [
            ("num_antennas", self.num_antennas as f64),
            ("num_users", self.num_users as f64),
            ("paths_per_user", self.paths_per_user as f64),
            ("oversampling", self.oversampling as f64),
            ("beam_threshold", self.beam_threshold),
            ("carrier_freq_mhz", self.carrier_freq_mhz),
            ("cell_radius_m", self.cell_radius_m),
            ("trials", self.trials as f64),
        ] {
            if value.is_nan() || value <= 0.0 {
                return Err(Error::NonPositive { name, value });
            }
        }
        if self.angular_spread_deg < 0.0 {
            return Err(Error::NonPositive {
                name: "angular_spread_deg",
                value: self.angular_spread_deg,
            });
        }
        if self.min_distance_m <= 0.0 || self.min_distance_m >= self.cell_radius_m {
            return Err(Error::Config {
                path: "min_distance_m".into(),
                message: "must satisfy 0 < min_distance_m < cell_radius_m".into(),
            });
        }
        if self.shadowing_sigma_db < 0.0 {
            return Err(Error::NonPositive {
                name: "shadowing_sigma_db",
                value: self.shadowing_sigma_db,
            });
        }
        let rf = self.rf_budget();
        if rf < self.num_users || rf > self.num_antennas {
            return Err(Error::Config {
                path: "rf_chains".into(),
                message: format!(
                    "need num_users <= rf_chains <= num_antennas, got {rf} for K={} M={}",
                    self.num_users, self.num_antennas
                ),
            });
        }
        if self.num_users > self.num_antennas {
            return Err(Error::Config {
                path: "num_users".into(),
                message: "more users than antennas".into(),
            });
        }
        if self.ul_snr_db.is_empty() {
            return Err(Error::Config {
                path: "ul_snr_db".into(),
                message: "need at least one SNR point".into(),
            });
        }
        if self.methods.is_empty() {
            return Err(Error::Config {
                path: "methods".into(),
                message: "need at least one method".into(),
            });
        }
        let mut seen = std::collections::HashSet::new();
        if !self.methods.iter().all(|m| seen.insert(m)) {
            return Err(Error::Config {
                path: "methods".into(),
                message: "duplicate method entry".into(),
            });
        }
        if self.antenna_sweep.len() < 2 {
            return Err(Error::Config {
                path: "antenna_sweep".into(),
                message: "need at least two array sizes".into(),
            });
        }
        Ok(())
    }

    /// RF-chain budget, defaulting to one chain per user.
    pub fn rf_budget(&self) -> usize {
        self.rf_chains.unwrap_or(self.num_users)
    }

    /// Converts the dB/dBm fields to linear scale.
    pub fn resolve(&self) -> Scenario {
        Scenario {
            num_antennas: self.num_antennas,
            num_users: self.num_users,
            paths_per_user: self.paths_per_user,
            spread_rad: self.angular_spread_deg.to_radians(),
            oversampling: self.oversampling,
            beam_threshold: self.beam_threshold,
            rf_budget: self.rf_budget(),
            carrier_freq_mhz: self.carrier_freq_mhz,
            cell_radius_m: self.cell_radius_m,
            min_distance_m: self.min_distance_m,
            shadowing_sigma_db: self.shadowing_sigma_db,
            dl_power_dbm: self.dl_power_dbm,
            user_noise_dbm: self.user_noise_dbm,
            dl_power_mw: dbm_to_mw(self.dl_power_dbm),
            user_noise_mw: dbm_to_mw(self.user_noise_dbm),
            ul_snr_db: self.ul_snr_db.clone(),
            trials: self.trials,
            seed: self.seed,
            methods: self.methods.clone(),
            antenna_sweep: self.antenna_sweep.clone(),
        }
    }
}

/// Linear-scale view of a config, produced once by [`ExperimentConfig::resolve`].
#[derive(Debug, Clone)]
pub struct Scenario {
    pub num_antennas: usize,
    pub num_users: usize,
    pub paths_per_user: usize,
    pub spread_rad: f64,
    pub oversampling: usize,
    pub beam_threshold: f64,
    pub rf_budget: usize,
    pub carrier_freq_mhz: f64,
    pub cell_radius_m: f64,
    pub min_distance_m: f64,
    pub shadowing_sigma_db: f64,
    pub dl_power_dbm: f64,
    pub user_noise_dbm: f64,
    /// Downlink power budget in mW.
    pub dl_power_mw: f64,
    /// Per-user noise power in mW.
    pub user_noise_mw: f64,
    pub ul_snr_db: Vec<f64>,
    pub trials: usize,
    pub seed: u64,
    pub methods: Vec<Method>,
    pub antenna_sweep: Vec<usize>,
}

pub fn dbm_to_mw(dbm: f64) -> f64 {
    10f64.powf(dbm / 10.0)
}

/// Loads and validates a config file.
pub fn load_config<P: AsRef<Path>>(path: P) -> Result<ExperimentConfig> {
    let path = path.as_ref();
    let text = std::fs::read_to_string(path)?;
    let cfg: ExperimentConfig = toml::from_str(&text).map_err(|e| Error::Config {
        path: path.display().to_string(),
        message: e.to_string(),
    })?;
    cfg.validate().map_err(|e| match e {
        Error::Config { message, .. } => Error::Config {
            path: path.display().to_string(),
            message,
        },
        other => other,
    })?;
    Ok(cfg)
}

/// Writes a config file that `load_config` reads back identically.
pub fn save_config<P: AsRef<Path>>(cfg: &ExperimentConfig, path: P) -> Result<()> {
    std::fs::write(path, cfg.to_toml())?;
    Ok(())
}
