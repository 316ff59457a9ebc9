//! Experiment configuration and its TOML file form.
//!
//! The file is a flat table; every key is optional except `n_rx`, `n_users`
//! and `snr_db`, and unknown keys are rejected.
//!
//! ```toml
//! n_rx = 64
//! n_users = 32
//! channel = "kronecker"        # or "rayleigh" (default)
//! rho = 0.6                    # kronecker only
//! modulation = 16              # or one order per user: [16, 16, 64, ...]
//! snr_db = [12.0, 14.0, 16.0]  # `inf` means noiseless
//! trials = 1000
//! vectors_per_channel = 1
//! detectors = ["mmse", "langevin"]
//! seed = 7
//! output = "sweep.csv"
//! record_wall_time = true
//! langevin_levels = 20
//! langevin_iterations = 70
//! langevin_epsilon = 3e-5
//! langevin_tau = 0.5
//! langevin_trajectories = 20
//! langevin_sigma_first = 1.0
//! langevin_sigma_last = 0.01
//! langevin_schedule = "geometric"  # or "linear"
//! ```

use std::path::{Path, PathBuf};

use serde::Deserialize;

use crate::baselines::DetectorKind;
use crate::constellation::ModulationPlan;
use crate::error::{Error, Result};
use crate::langevin::{LangevinConfig, ScheduleKind};

/// Channel model of a sweep.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum ChannelModel {
    Rayleigh,
    /// Exponential correlation with coefficient `rho` on both sides.
    Kronecker { rho: f64 },
}

/// Per-user modulation of a sweep.
#[derive(Debug, Clone, PartialEq, Deserialize)]
#[serde(untagged)]
pub enum Modulation {
    /// Every user transmits this QAM order.
    Uniform(usize),
    /// One QAM order per user.
    PerUser(Vec<usize>),
}

impl Modulation {
    pub fn plan(&self, n_users: usize) -> Result<ModulationPlan> {
        let orders = match self {
            Modulation::Uniform(k) => vec![*k; n_users],
            Modulation::PerUser(list) => list.clone(),
        };
        ModulationPlan::from_orders(&orders).map_err(|e| Error::config("modulation", e.to_string()))
    }
}

/// A validated experiment description.
#[derive(Debug, Clone, PartialEq)]
pub struct ExperimentConfig {
    pub n_rx: usize,
    pub n_users: usize,
    pub channel: ChannelModel,
    pub modulation: Modulation,
    pub snr_db: Vec<f64>,
    /// Channel realizations per SNR point.
    pub trials: usize,
    /// Symbol vectors sent over each channel realization.
    pub vectors_per_channel: usize,
    pub detectors: Vec<DetectorKind>,
    pub seed: u64,
    pub output: Option<PathBuf>,
    /// When false, the wall-time column is written as zero so that output
    /// files are byte-reproducible.
    pub record_wall_time: bool,
}

impl ExperimentConfig {
    /// Defaults for everything except the dimensions and SNR grid.
    pub fn new(n_rx: usize, n_users: usize, snr_db: Vec<f64>) -> Self {
        Self {
            n_rx,
            n_users,
            channel: ChannelModel::Rayleigh,
            modulation: Modulation::Uniform(16),
            snr_db,
            trials: 1000,
            vectors_per_channel: 1,
            detectors: vec![DetectorKind::Mmse, DetectorKind::Langevin(LangevinConfig::default())],
            seed: 0,
            output: None,
            record_wall_time: true,
        }
    }

    /// Checks every field; errors name the offending one.
    pub fn validate(&self) -> Result<ModulationPlan> {
        if self.n_users == 0 {
            return Err(Error::config("n_users", "must be at least 1"));
        }
        if self.n_rx < self.n_users {
            return Err(Error::config(
                "n_rx",
                format!("must be at least n_users ({}), got {}", self.n_users, self.n_rx),
            ));
        }
        if self.trials == 0 {
            return Err(Error::config("trials", "must be at least 1"));
        }
        if self.vectors_per_channel == 0 {
            return Err(Error::config("vectors_per_channel", "must be at least 1"));
        }
        if self.snr_db.is_empty() {
            return Err(Error::config("snr_db", "must list at least one SNR"));
        }
        if let Some(bad) = self.snr_db.iter().find(|s| s.is_nan() || **s == f64::NEG_INFINITY) {
            return Err(Error::config("snr_db", format!("invalid value {bad}")));
        }
        if let ChannelModel::Kronecker { rho } = self.channel {
            if !(0.0..1.0).contains(&rho) {
                return Err(Error::config("rho", format!("must lie in [0, 1), got {rho}")));
            }
        }
        if let Modulation::PerUser(list) = &self.modulation {
            if list.len() != self.n_users {
                return Err(Error::config(
                    "modulation",
                    format!("lists {} orders for {} users", list.len(), self.n_users),
                ));
            }
        }
        if self.detectors.is_empty() {
            return Err(Error::config("detectors", "must list at least one detector"));
        }
        let plan = self.modulation.plan(self.n_users)?;
        for d in &self.detectors {
            d.check(&plan).map_err(|e| match e {
                e @ Error::Config { .. } => e,
                other => Error::config("detectors", format!("{}: {other}", d.name())),
            })?;
        }
        Ok(plan)
    }

    /// Reads and validates a TOML config file.
    pub fn from_file(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|source| Error::Io {
            path: path.to_path_buf(),
            source,
        })?;
        Self::from_toml_str(&text).map_err(|e| match e {
            Error::Parse { reason, .. } => Error::Parse {
                path: path.to_path_buf(),
                reason,
            },
            other => other,
        })
    }

    pub fn from_toml_str(text: &str) -> Result<Self> {
        let raw: RawConfig = toml::from_str(text).map_err(|e| Error::Parse {
            path: PathBuf::from("<config>"),
            reason: e.message().to_string(),
        })?;
        raw.into_config()
    }
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawConfig {
    n_rx: usize,
    n_users: usize,
    snr_db: Vec<f64>,
    channel: Option<String>,
    rho: Option<f64>,
    modulation: Option<Modulation>,
    trials: Option<usize>,
    vectors_per_channel: Option<usize>,
    detectors: Option<Vec<String>>,
    seed: Option<u64>,
    output: Option<PathBuf>,
    record_wall_time: Option<bool>,
    langevin_levels: Option<usize>,
    langevin_iterations: Option<usize>,
    langevin_epsilon: Option<f64>,
    langevin_tau: Option<f64>,
    langevin_trajectories: Option<usize>,
    langevin_sigma_first: Option<f64>,
    langevin_sigma_last: Option<f64>,
    langevin_schedule: Option<ScheduleKind>,
}

impl RawConfig {
    fn into_config(self) -> Result<ExperimentConfig> {
        let channel = match (self.channel.as_deref().unwrap_or("rayleigh"), self.rho) {
            ("rayleigh", None) => ChannelModel::Rayleigh,
            ("rayleigh", Some(_)) => {
                return Err(Error::config("rho", "only valid with channel = \"kronecker\""))
            }
            ("kronecker", Some(rho)) => ChannelModel::Kronecker { rho },
            ("kronecker", None) => return Err(Error::config("rho", "required for the kronecker channel")),
            (other, _) => {
                return Err(Error::config(
                    "channel",
                    format!("unknown channel `{other}` (expected rayleigh or kronecker)"),
                ))
            }
        };
        let d = LangevinConfig::default();
        let langevin = LangevinConfig {
            levels: self.langevin_levels.unwrap_or(d.levels),
            iterations: self.langevin_iterations.unwrap_or(d.iterations),
            epsilon: self.langevin_epsilon.unwrap_or(d.epsilon),
            tau: self.langevin_tau.unwrap_or(d.tau),
            trajectories: self.langevin_trajectories.unwrap_or(d.trajectories),
            sigma_first: self.langevin_sigma_first.unwrap_or(d.sigma_first),
            sigma_last: self.langevin_sigma_last.unwrap_or(d.sigma_last),
            schedule: self.langevin_schedule.unwrap_or(d.schedule),
        };
        let names = self
            .detectors
            .unwrap_or_else(|| vec!["mmse".to_string(), "langevin".to_string()]);
        let detectors = names
            .iter()
            .map(|n| DetectorKind::from_name(n, &langevin))
            .collect::<Result<Vec<_>>>()?;
        let mut cfg = ExperimentConfig::new(self.n_rx, self.n_users, self.snr_db);
        cfg.channel = channel;
        cfg.detectors = detectors;
        if let Some(m) = self.modulation {
            cfg.modulation = m;
        }
        if let Some(t) = self.trials {
            cfg.trials = t;
        }
        if let Some(v) = self.vectors_per_channel {
            cfg.vectors_per_channel = v;
        }
        if let Some(s) = self.seed {
            cfg.seed = s;
        }
        if let Some(w) = self.record_wall_time {
            cfg.record_wall_time = w;
        }
        cfg.output = self.output;
        cfg.validate()?;
        Ok(cfg)
    }
}
