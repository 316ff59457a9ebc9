//! Monte-Carlo SER experiments.
//!
//! Every detector of a sweep is evaluated on the same instances: for each
//! SNR point and trial the harness draws one channel, then for each symbol
//! vector one transmission, and hands the identical `(y, H, σ₀)` to every
//! detector. Randomness comes from [`SeedTree`] streams addressed by
//! `(snr index, trial index, purpose)`, so results do not depend on how many
//! worker threads run the trials.

use std::collections::hash_map::DefaultHasher;
use std::hash::{Hash, Hasher};
use std::time::Instant;

use rand::{Rng, SeedableRng};
use rayon::prelude::*;

use crate::baselines::DetectorKind;
use crate::channel::{db_to_linear, kronecker_channel, rayleigh_channel, sigma0_from_snr, ComplexChannel, RealSystem};
use crate::constellation::{sample_symbols, ErrorCount, ModulationPlan, SymbolVector};
use crate::error::{Error, Result};
use crate::langevin::LangevinConfig;
use crate::rng::{Purpose, SeedTree, StreamRng};

mod config;
pub mod csv;

pub use config::{ChannelModel, ExperimentConfig, Modulation};
pub use csv::{read_csv, to_csv_string, write_csv};

/// Errors among users sharing one constellation.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct GroupCount {
    /// Constellation label, e.g. `16qam`.
    pub label: String,
    pub count: ErrorCount,
}

/// Outcome of one detector at one SNR point.
#[derive(Debug, Clone, PartialEq)]
pub struct SweepRow {
    pub snr_db: f64,
    pub detector: String,
    pub params_digest: String,
    pub num_symbols: u64,
    pub num_errors: u64,
    /// Exactly `num_errors / num_symbols`.
    pub ser: f64,
    /// Summed duration of this detector's calls (zero when not recorded).
    pub wall_time_seconds: f64,
    /// Breakdown by constellation, in order of first appearance in the plan.
    pub groups: Vec<GroupCount>,
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct SweepResult {
    pub rows: Vec<SweepRow>,
}

impl SweepResult {
    /// Rows of one detector name, in SNR order.
    pub fn detector_rows<'a>(&'a self, detector: &'a str) -> impl Iterator<Item = &'a SweepRow> + 'a {
        self.rows.iter().filter(move |r| r.detector == detector)
    }

    /// Rows whose parameter digest matches, in SNR order.
    pub fn digest_rows<'a>(&'a self, digest: &'a str) -> impl Iterator<Item = &'a SweepRow> + 'a {
        self.rows.iter().filter(move |r| r.params_digest == digest)
    }
}

/// What one detector saw and scored on one instance.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct TrialEvent {
    pub snr_index: usize,
    pub trial: usize,
    pub vector: usize,
    pub detector: usize,
    /// Hash of the bits of `(H, y, σ₀)` handed to the detector.
    pub instance: u64,
    pub count: ErrorCount,
}

/// Hash of the exact bits of a system's channel, observation and noise level.
pub fn instance_fingerprint(system: &RealSystem) -> u64 {
    let mut h = DefaultHasher::new();
    for v in system.h().iter().chain(system.y().iter()) {
        v.to_bits().hash(&mut h);
    }
    system.sigma0().to_bits().hash(&mut h);
    h.finish()
}

fn draw_channel(cfg: &ExperimentConfig, rng: &mut StreamRng) -> Result<ComplexChannel> {
    match cfg.channel {
        ChannelModel::Rayleigh => rayleigh_channel(cfg.n_rx, cfg.n_users, rng),
        ChannelModel::Kronecker { rho } => kronecker_channel(cfg.n_rx, cfg.n_users, rho, rng),
    }
}

/// Label of each user's group and the ordered list of distinct labels.
fn groups_of(plan: &ModulationPlan) -> (Vec<usize>, Vec<String>) {
    let mut labels: Vec<String> = Vec::new();
    let member = plan
        .constellations()
        .map(|c| match labels.iter().position(|l| l == c.name()) {
            Some(g) => g,
            None => {
                labels.push(c.name().to_string());
                labels.len() - 1
            }
        })
        .collect();
    (member, labels)
}

/// Per-detector accumulation within one SNR point.
#[derive(Debug, Clone, Default)]
struct Tally {
    total: ErrorCount,
    groups: Vec<ErrorCount>,
    seconds: f64,
}

fn score(est: &SymbolVector, truth: &SymbolVector, member: &[usize], n_groups: usize) -> (ErrorCount, Vec<ErrorCount>) {
    let mut groups = vec![ErrorCount::default(); n_groups];
    let mut total = ErrorCount::default();
    for (j, (a, b)) in est.indices().iter().zip(truth.indices()).enumerate() {
        let wrong = u64::from(a != b);
        total.errors += wrong;
        total.symbols += 1;
        groups[member[j]].errors += wrong;
        groups[member[j]].symbols += 1;
    }
    (total, groups)
}

#[allow(clippy::too_many_arguments)]
fn run_trial(
    cfg: &ExperimentConfig,
    plan: &ModulationPlan,
    tree: &SeedTree,
    snr_index: usize,
    trial: usize,
    sigma0: f64,
    member: &[usize],
    n_groups: usize,
    observer: &(dyn Fn(&TrialEvent) + Sync),
) -> Result<Vec<Tally>> {
    let mut channel_rng = tree.stream(snr_index, trial, Purpose::Channel);
    let mut symbol_rng = tree.stream(snr_index, trial, Purpose::Symbols);
    let mut noise_rng = tree.stream(snr_index, trial, Purpose::Noise);
    let mut traj_rng = tree.stream(snr_index, trial, Purpose::Trajectories);

    let channel = draw_channel(cfg, &mut channel_rng)?;
    let h = channel.real_embedding();
    let mut tallies = vec![
        Tally {
            groups: vec![ErrorCount::default(); n_groups],
            ..Default::default()
        };
        cfg.detectors.len()
    ];
    let mut decomposed: Option<RealSystem> = None;
    for vector in 0..cfg.vectors_per_channel {
        let x = sample_symbols(plan, &mut symbol_rng);
        let y = crate::channel::transmit(&h, &x, sigma0, &mut noise_rng)?;
        let system = match decomposed.take() {
            Some(prev) => prev.with_observation(y)?,
            None => RealSystem::new(h.clone(), y, sigma0)?,
        };
        let fingerprint = instance_fingerprint(&system);
        // Every Langevin detector starts from the same seed (common random numbers).
        let traj_seed: u64 = traj_rng.random();
        for (d, detector) in cfg.detectors.iter().enumerate() {
            let mut rng = StreamRng::seed_from_u64(traj_seed);
            let start = cfg.record_wall_time.then(Instant::now);
            let est = detector.detect(&system, plan, &mut rng)?;
            if let Some(start) = start {
                tallies[d].seconds += start.elapsed().as_secs_f64();
            }
            let (total, groups) = score(&est, &x, member, n_groups);
            observer(&TrialEvent {
                snr_index,
                trial,
                vector,
                detector: d,
                instance: fingerprint,
                count: total,
            });
            tallies[d].total.add(total);
            for (acc, g) in tallies[d].groups.iter_mut().zip(groups) {
                acc.add(g);
            }
        }
        decomposed = Some(system);
    }
    Ok(tallies)
}

/// Runs every configured detector over the SNR grid.
pub fn run_sweep(cfg: &ExperimentConfig) -> Result<SweepResult> {
    run_sweep_observed(cfg, &|_| {})
}

/// [`run_sweep`] that reports every (instance, detector) evaluation.
///
/// The observer may be called from several threads and in any order.
pub fn run_sweep_observed(cfg: &ExperimentConfig, observer: &(dyn Fn(&TrialEvent) + Sync)) -> Result<SweepResult> {
    let plan = cfg.validate()?;
    let (member, labels) = groups_of(&plan);
    let tree = SeedTree::new(cfg.seed);
    let mut rows = Vec::with_capacity(cfg.snr_db.len() * cfg.detectors.len());
    for (snr_index, &snr_db) in cfg.snr_db.iter().enumerate() {
        let sigma0 = sigma0_from_snr(db_to_linear(snr_db), cfg.n_rx, cfg.n_users)?;
        let per_trial: Vec<Vec<Tally>> = (0..cfg.trials)
            .into_par_iter()
            .map(|t| run_trial(cfg, &plan, &tree, snr_index, t, sigma0, &member, labels.len(), observer))
            .collect::<Result<_>>()?;
        for (d, detector) in cfg.detectors.iter().enumerate() {
            let mut acc = Tally {
                groups: vec![ErrorCount::default(); labels.len()],
                ..Default::default()
            };
            for trial in &per_trial {
                acc.total.add(trial[d].total);
                acc.seconds += trial[d].seconds;
                for (a, g) in acc.groups.iter_mut().zip(&trial[d].groups) {
                    a.add(*g);
                }
            }
            rows.push(SweepRow {
                snr_db,
                detector: detector.name().to_string(),
                params_digest: detector.params_digest(),
                num_symbols: acc.total.symbols,
                num_errors: acc.total.errors,
                ser: acc.total.ser(),
                wall_time_seconds: acc.seconds,
                groups: labels
                    .iter()
                    .zip(acc.groups)
                    .map(|(label, count)| GroupCount {
                        label: label.clone(),
                        count,
                    })
                    .collect(),
            });
        }
    }
    Ok(SweepResult { rows })
}

/// Langevin hyperparameter varied by an ablation.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum AblationAxis {
    Levels,
    Trajectories,
    Temperature,
}

impl std::str::FromStr for AblationAxis {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "levels" | "L" => Ok(AblationAxis::Levels),
            "trajectories" | "M" => Ok(AblationAxis::Trajectories),
            "tau" | "temperature" => Ok(AblationAxis::Temperature),
            other => Err(Error::config(
                "axis",
                format!("unknown axis `{other}` (expected levels, trajectories or tau)"),
            )),
        }
    }
}

impl AblationAxis {
    /// `base` with this axis set to `value`.
    pub fn apply(self, base: &LangevinConfig, value: f64) -> Result<LangevinConfig> {
        let count = || -> Result<usize> {
            if value >= 1.0 && value.fract() == 0.0 && value <= u32::MAX as f64 {
                Ok(value as usize)
            } else {
                Err(Error::config("values", format!("{value} is not a positive integer")))
            }
        };
        let mut c = base.clone();
        match self {
            AblationAxis::Levels => c.levels = count()?,
            AblationAxis::Trajectories => c.trajectories = count()?,
            AblationAxis::Temperature => c.tau = value,
        }
        c.validate()?;
        Ok(c)
    }
}

/// One Langevin variant per axis value, evaluated in a single paired sweep
/// alongside the config's other detectors.
///
/// The base Langevin parameters are those of the first `langevin` detector
/// in `cfg`, or the defaults if there is none.
pub fn run_ablation(cfg: &ExperimentConfig, axis: AblationAxis, values: &[f64]) -> Result<SweepResult> {
    if values.is_empty() {
        return Err(Error::config("values", "must list at least one value"));
    }
    let base = cfg
        .detectors
        .iter()
        .find_map(|d| match d {
            DetectorKind::Langevin(c) => Some(c.clone()),
            _ => None,
        })
        .unwrap_or_default();
    let mut detectors: Vec<DetectorKind> = cfg
        .detectors
        .iter()
        .filter(|d| !matches!(d, DetectorKind::Langevin(_)))
        .cloned()
        .collect();
    for &v in values {
        detectors.push(DetectorKind::Langevin(axis.apply(&base, v)?));
    }
    let mut ablation = cfg.clone();
    ablation.detectors = detectors;
    run_sweep(&ablation)
}
