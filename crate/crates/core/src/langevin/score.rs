//! Spectral-domain scores and per-level step sizes.
//!
//! With `H = U Σ Vᵀ`, `χ = Vᵀ x̃` and `η = Uᵀ y`, the annealed likelihood is
//! a product of independent Gaussians over the spectral entries, with
//! variance `|σ₀² − σ_l² s_j²|` on entry `j`.

use nalgebra::DVector;

use super::NoiseSchedule;
use crate::channel::RealSystem;
use crate::constellation::{prior_score, ModulationPlan};
use crate::error::{Error, Result};

/// Spectral variances below this are treated as zero by the pseudo-inverse.
pub const PINV_THRESHOLD: f64 = 1e-12;

/// Which score terms drive spectral entry `j` at a given level.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ScoreCase {
    /// `σ₀ ≥ σ_l s_j`, `s_j > 0`: likelihood plus prior.
    Joint,
    /// `σ₀ < σ_l s_j`: the prior is negligible.
    LikelihoodOnly,
    /// `s_j = 0`: the observation carries no information.
    PriorOnly,
}

impl ScoreCase {
    pub fn classify(s_j: f64, sigma_l: f64, sigma0: f64) -> Self {
        if s_j == 0.0 {
            ScoreCase::PriorOnly
        } else if sigma0 >= sigma_l * s_j {
            ScoreCase::Joint
        } else {
            ScoreCase::LikelihoodOnly
        }
    }

    pub fn uses_likelihood(self) -> bool {
        !matches!(self, ScoreCase::PriorOnly)
    }

    pub fn uses_prior(self) -> bool {
        !matches!(self, ScoreCase::LikelihoodOnly)
    }
}

/// One diagonal entry of the step matrix `Λ_l`.
///
/// ```text
/// (ε σ_l²/σ_L²)(1 − σ_l² s_j²/σ₀²)   if σ_l s_j ≤ σ₀
/// (ε/σ_L²)(σ_l² − σ₀²/s_j²)          otherwise
/// ```
///
/// `s_j = 0` takes the first branch, which reduces to `ε σ_l²/σ_L²`.
/// Rounding below zero is clamped.
pub fn step_size(sigma_l: f64, sigma_last: f64, s_j: f64, sigma0: f64, epsilon: f64) -> f64 {
    let base = epsilon / (sigma_last * sigma_last);
    let value = if s_j == 0.0 {
        base * sigma_l * sigma_l
    } else if sigma_l * s_j <= sigma0 {
        base * sigma_l * sigma_l * (1.0 - (sigma_l * sigma_l * s_j * s_j) / (sigma0 * sigma0))
    } else {
        base * (sigma_l * sigma_l - (sigma0 * sigma0) / (s_j * s_j))
    };
    value.max(0.0)
}

/// `Λ_l` for zero-based `level` of `schedule`.
pub fn step_matrix(
    schedule: &NoiseSchedule,
    level: usize,
    singular_values: &[f64],
    sigma0: f64,
    epsilon: f64,
) -> DVector<f64> {
    let sigma_l = schedule.sigmas()[level];
    let sigma_last = schedule.last();
    DVector::from_iterator(
        singular_values.len(),
        singular_values
            .iter()
            .map(|&s| step_size(sigma_l, sigma_last, s, sigma0, epsilon)),
    )
}

/// Multiplier `s_j / |σ₀² − σ_l² s_j²|` (zero when the variance is below the
/// pseudo-inverse threshold), so the likelihood score is
/// `coef_j (η_j − s_j χ_j)`.
pub(crate) fn likelihood_coefficient(s_j: f64, sigma_l: f64, sigma0: f64) -> f64 {
    let var = (sigma0 * sigma0 - sigma_l * sigma_l * s_j * s_j).abs();
    if var < PINV_THRESHOLD {
        0.0
    } else {
        s_j / var
    }
}

fn check_chi(chi: &DVector<f64>, system: &RealSystem) -> Result<()> {
    if chi.len() != system.dim() {
        return Err(Error::DimensionMismatch {
            context: "spectral iterate",
            expected: system.dim(),
            found: chi.len(),
        });
    }
    Ok(())
}

/// Score of the annealed likelihood, `Σᵀ |σ₀² I − σ_l² ΣΣᵀ|† (η − Σχ)`.
pub fn likelihood_score(chi: &DVector<f64>, system: &RealSystem, sigma_l: f64) -> Result<DVector<f64>> {
    check_chi(chi, system)?;
    let s = system.singular_values();
    let eta = system.eta();
    let sigma0 = system.sigma0();
    Ok(DVector::from_fn(chi.len(), |j, _| {
        likelihood_coefficient(s[j], sigma_l, sigma0) * (eta[j] - s[j] * chi[j])
    }))
}

/// Entrywise posterior score: likelihood and/or `Vᵀ ∇ log p_σ(Vχ)`
/// according to [`ScoreCase`].
pub fn posterior_score(
    chi: &DVector<f64>,
    system: &RealSystem,
    sigma_l: f64,
    plan: &ModulationPlan,
) -> Result<DVector<f64>> {
    let likelihood = likelihood_score(chi, system, sigma_l)?;
    let x = system.v() * chi;
    let prior = system.v().tr_mul(&prior_score(x.as_slice(), sigma_l, plan)?);
    let s = system.singular_values();
    Ok(DVector::from_fn(chi.len(), |j, _| {
        let case = ScoreCase::classify(s[j], sigma_l, system.sigma0());
        let mut g = 0.0;
        if case.uses_likelihood() {
            g += likelihood[j];
        }
        if case.uses_prior() {
            g += prior[j];
        }
        g
    }))
}
