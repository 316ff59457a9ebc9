//! Annealed Langevin detection.
//!
//! Each trajectory starts from a uniform draw in `[-1, 1]` in spectral
//! coordinates, runs `T` noisy score-ascent steps at each of the `L` noise
//! levels, and projects its final iterate onto the constellation. A detection
//! call runs `M` independent trajectories and keeps the candidate with the
//! smallest residual `‖y − H x‖²`.
//!
//! Per iteration the cost is two `2N_u × 2N_u` matrix-vector products plus
//! `O(K N_u)` for the posterior-mean denoiser; the SVD is paid once per
//! channel.

use rand::Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::channel::{ComplexChannel, RealSystem};
use crate::constellation::{ModulationPlan, SymbolVector};
use crate::error::{Error, Result};
use crate::rng::indexed_stream;

mod sampler;
mod schedule;
pub mod score;

pub use sampler::{run_trajectory, run_trajectory_observed, StepRecord, TrajectoryObserver, DIVERGENCE_BOUND};
pub use schedule::{geometric_schedule, linear_schedule, NoiseSchedule, ScheduleKind};
pub use score::{likelihood_score, posterior_score, step_matrix, step_size, ScoreCase};

/// All knobs of the annealed Langevin detector.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct LangevinConfig {
    /// Number of noise levels `L`.
    pub levels: usize,
    /// Iterations per level `T`.
    pub iterations: usize,
    /// Base step size `ε`.
    pub epsilon: f64,
    /// Temperature `τ`; zero gives deterministic drift.
    pub tau: f64,
    /// Independent trajectories `M`.
    pub trajectories: usize,
    pub sigma_first: f64,
    pub sigma_last: f64,
    pub schedule: ScheduleKind,
}

impl Default for LangevinConfig {
    fn default() -> Self {
        Self {
            levels: 20,
            iterations: 70,
            epsilon: 3e-5,
            tau: 0.5,
            trajectories: 20,
            sigma_first: 1.0,
            sigma_last: 0.01,
            schedule: ScheduleKind::Geometric,
        }
    }
}

impl LangevinConfig {
    pub fn validate(&self) -> Result<()> {
        let bad = |field: &str, reason: String| Err(Error::config(format!("langevin.{field}"), reason));
        if self.levels == 0 {
            return bad("levels", "must be at least 1".into());
        }
        if self.iterations == 0 {
            return bad("iterations", "must be at least 1".into());
        }
        if self.trajectories == 0 {
            return bad("trajectories", "must be at least 1".into());
        }
        if !(self.epsilon > 0.0 && self.epsilon.is_finite()) {
            return bad("epsilon", format!("must be positive, got {}", self.epsilon));
        }
        if !(self.tau >= 0.0 && self.tau.is_finite()) {
            return bad("tau", format!("must be nonnegative, got {}", self.tau));
        }
        if !(self.sigma_last > 0.0 && self.sigma_last.is_finite()) {
            return bad("sigma_last", format!("must be positive, got {}", self.sigma_last));
        }
        if self.levels > 1 && !(self.sigma_first > self.sigma_last && self.sigma_first.is_finite()) {
            return bad(
                "sigma_first",
                format!("must exceed sigma_last ({}), got {}", self.sigma_last, self.sigma_first),
            );
        }
        Ok(())
    }

    /// The annealing ladder. A single level runs at `sigma_last` only.
    pub fn schedule(&self) -> Result<NoiseSchedule> {
        if self.levels == 1 {
            return NoiseSchedule::from_levels(vec![self.sigma_last]);
        }
        match self.schedule {
            ScheduleKind::Geometric => geometric_schedule(self.sigma_first, self.sigma_last, self.levels),
            ScheduleKind::Linear => linear_schedule(self.sigma_first, self.sigma_last, self.levels),
        }
    }

    /// Compact description without commas, e.g.
    /// `L20-T70-eps3e-5-tau0.5-M20-s1-0.01-geometric`.
    pub fn digest(&self) -> String {
        let schedule = match self.schedule {
            ScheduleKind::Geometric => "geometric",
            ScheduleKind::Linear => "linear",
        };
        format!(
            "L{}-T{}-eps{:e}-tau{}-M{}-s{}-{}-{}",
            self.levels,
            self.iterations,
            self.epsilon,
            self.tau,
            self.trajectories,
            self.sigma_first,
            self.sigma_last,
            schedule
        )
    }
}

/// Runs trajectories `0..M` with streams `indexed_stream(base_seed, m)`.
///
/// Trajectories run in parallel; the output is ordered by trajectory index.
pub fn run_candidates(
    system: &RealSystem,
    config: &LangevinConfig,
    plan: &ModulationPlan,
    base_seed: u64,
) -> Vec<Result<SymbolVector>> {
    (0..config.trajectories)
        .into_par_iter()
        .map(|m| run_trajectory(system, config, plan, &mut indexed_stream(base_seed, m)))
        .collect()
}

/// Index of the candidate with the smallest residual. Failed trajectories
/// are skipped; ties go to the lowest index.
pub fn select_candidate(system: &RealSystem, candidates: &[Result<SymbolVector>]) -> Result<usize> {
    let mut best: Option<(usize, f64)> = None;
    for (m, c) in candidates.iter().enumerate() {
        let Ok(x) = c else { continue };
        let r = system.residual(x.real());
        if best.is_none_or(|(_, b)| r < b) {
            best = Some((m, r));
        }
    }
    best.map(|(m, _)| m).ok_or(Error::AllTrajectoriesFailed {
        count: candidates.len(),
    })
}

/// Detection on an already decomposed system. One `u64` is drawn from `rng`
/// as the base seed of the trajectory streams.
pub fn detect_with_system<R: Rng + ?Sized>(
    system: &RealSystem,
    config: &LangevinConfig,
    plan: &ModulationPlan,
    rng: &mut R,
) -> Result<SymbolVector> {
    config.validate()?;
    let base_seed: u64 = rng.random();
    let mut candidates = run_candidates(system, config, plan, base_seed);
    let best = select_candidate(system, &candidates)?;
    candidates.swap_remove(best)
}

/// Detects the symbols behind observation `y` (real-embedded, length
/// `2N_r`) sent over `channel` with per-component noise level `sigma0`.
pub fn detect<R: Rng + ?Sized>(
    y: nalgebra::DVector<f64>,
    channel: &ComplexChannel,
    sigma0: f64,
    config: &LangevinConfig,
    plan: &ModulationPlan,
    rng: &mut R,
) -> Result<SymbolVector> {
    let system = RealSystem::from_channel(channel, y, sigma0)?;
    detect_with_system(&system, config, plan, rng)
}
