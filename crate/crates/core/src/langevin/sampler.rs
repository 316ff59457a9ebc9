use nalgebra::DVector;
use rand::Rng;
use rand_distr::StandardNormal;

use super::score::{likelihood_coefficient, step_size, ScoreCase};
use super::LangevinConfig;
use crate::channel::RealSystem;
use crate::constellation::{project, ModulationPlan, SymbolVector};
use crate::error::{Error, Result};

/// Iterates with any entry above this magnitude are abandoned.
pub const DIVERGENCE_BOUND: f64 = 1e3;

/// One update `χ ← χ + Λ ∘ score + noise`, as seen by an observer.
#[derive(Debug)]
pub struct StepRecord<'a> {
    /// Zero-based level.
    pub level: usize,
    /// Zero-based iteration within the level.
    pub iteration: usize,
    pub chi: &'a [f64],
    pub score: &'a [f64],
    pub step: &'a [f64],
    /// The already-scaled noise summand `√(2Λτ) ∘ w`.
    pub noise: &'a [f64],
}

/// Instrumentation hook called before every update is applied.
pub trait TrajectoryObserver {
    fn on_step(&mut self, record: &StepRecord<'_>);
}

impl TrajectoryObserver for () {
    fn on_step(&mut self, _: &StepRecord<'_>) {}
}

impl<F: FnMut(&StepRecord<'_>)> TrajectoryObserver for F {
    fn on_step(&mut self, record: &StepRecord<'_>) {
        self(record)
    }
}

/// Per-level constants, computed once per level.
struct Level {
    sigma: f64,
    step: Vec<f64>,
    noise_scale: Vec<f64>,
    lik_coef: Vec<f64>,
    use_lik: Vec<bool>,
    use_prior: Vec<bool>,
    any_prior: bool,
}

impl Level {
    fn new(system: &RealSystem, config: &LangevinConfig, sigma: f64, sigma_last: f64) -> Self {
        let sigma0 = system.sigma0();
        let s = system.singular_values();
        let step: Vec<f64> = s
            .iter()
            .map(|&sj| step_size(sigma, sigma_last, sj, sigma0, config.epsilon))
            .collect();
        let noise_scale = step.iter().map(|&l| (2.0 * l * config.tau).sqrt()).collect();
        let lik_coef = s
            .iter()
            .map(|&sj| likelihood_coefficient(sj, sigma, sigma0))
            .collect();
        let cases: Vec<ScoreCase> = s
            .iter()
            .map(|&sj| ScoreCase::classify(sj, sigma, sigma0))
            .collect();
        let use_prior: Vec<bool> = cases.iter().map(|c| c.uses_prior()).collect();
        Self {
            sigma,
            step,
            noise_scale,
            lik_coef,
            use_lik: cases.iter().map(|c| c.uses_likelihood()).collect(),
            any_prior: use_prior.iter().any(|&p| p),
            use_prior,
        }
    }
}

/// `out = A b` for a square column-major `a`.
fn mat_vec(a: &[f64], b: &[f64], out: &mut [f64]) {
    let n = out.len();
    out.fill(0.0);
    for (col, &bk) in a.chunks_exact(n).zip(b) {
        for (o, &c) in out.iter_mut().zip(col) {
            *o += c * bk;
        }
    }
}

/// `out = Aᵀ b` for a square column-major `a`.
fn mat_tr_vec(a: &[f64], b: &[f64], out: &mut [f64]) {
    let n = out.len();
    for (o, col) in out.iter_mut().zip(a.chunks_exact(n)) {
        let mut acc = [0.0; 4];
        let mut c4 = col.chunks_exact(4);
        let mut b4 = b.chunks_exact(4);
        for (c, d) in (&mut c4).zip(&mut b4) {
            for i in 0..4 {
                acc[i] += c[i] * d[i];
            }
        }
        let tail: f64 = c4.remainder().iter().zip(b4.remainder()).map(|(c, d)| c * d).sum();
        *o = (acc[0] + acc[1]) + (acc[2] + acc[3]) + tail;
    }
}

/// Runs one annealed Langevin trajectory and projects the final iterate
/// `V χ` onto the plan's constellations.
pub fn run_trajectory<R: Rng + ?Sized>(
    system: &RealSystem,
    config: &LangevinConfig,
    plan: &ModulationPlan,
    rng: &mut R,
) -> Result<SymbolVector> {
    run_trajectory_observed(system, config, plan, rng, &mut ())
}

/// [`run_trajectory`] with a hook that sees every update.
pub fn run_trajectory_observed<R, O>(
    system: &RealSystem,
    config: &LangevinConfig,
    plan: &ModulationPlan,
    rng: &mut R,
    observer: &mut O,
) -> Result<SymbolVector>
where
    R: Rng + ?Sized,
    O: TrajectoryObserver + ?Sized,
{
    config.validate()?;
    let n = system.dim();
    if 2 * plan.n_users() != n {
        return Err(Error::DimensionMismatch {
            context: "modulation plan",
            expected: n / 2,
            found: plan.n_users(),
        });
    }
    let schedule = config.schedule()?;
    let v = system.v();
    let s = system.singular_values();
    let eta = system.eta();

    let mut chi = DVector::from_fn(n, |_, _| rng.random_range(-1.0..=1.0));
    let v_cols = v.as_slice();
    let mut x = vec![0.0; n];
    let mut mean = vec![0.0; n];
    let mut prior = vec![0.0; n];
    let mut prior_spec = vec![0.0; n];
    let mut score = vec![0.0; n];
    let mut noise = vec![0.0; n];

    for (level, &sigma) in schedule.sigmas().iter().enumerate() {
        let lv = Level::new(system, config, sigma, schedule.last());
        let inv_var = (lv.sigma * lv.sigma).recip();
        for iteration in 0..config.iterations {
            for w in noise.iter_mut() {
                *w = rng.sample(StandardNormal);
            }
            if lv.any_prior {
                mat_vec(v_cols, chi.as_slice(), &mut x);
                plan.denoise_into(&x, lv.sigma, &mut mean);
                for i in 0..n {
                    prior[i] = (mean[i] - x[i]) * inv_var;
                }
                mat_tr_vec(v_cols, &prior, &mut prior_spec);
            }
            for j in 0..n {
                let mut g = 0.0;
                if lv.use_lik[j] {
                    g += lv.lik_coef[j] * (eta[j] - s[j] * chi[j]);
                }
                if lv.use_prior[j] {
                    g += prior_spec[j];
                }
                score[j] = g;
                noise[j] *= lv.noise_scale[j];
            }
            observer.on_step(&StepRecord {
                level,
                iteration,
                chi: chi.as_slice(),
                score: &score,
                step: &lv.step,
                noise: &noise,
            });
            let mut diverged = false;
            for j in 0..n {
                let c = chi[j] + lv.step[j] * score[j] + noise[j];
                diverged |= !(c.abs() <= DIVERGENCE_BOUND);
                chi[j] = c;
            }
            if diverged {
                return Err(Error::Diverged { level, iteration });
            }
        }
    }
    let estimate = v * &chi;
    project(estimate.as_slice(), plan)
}
