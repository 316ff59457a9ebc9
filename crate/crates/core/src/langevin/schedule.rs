use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// How the intermediate noise levels are spaced between the endpoints.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ScheduleKind {
    /// Constant ratio between consecutive levels.
    #[default]
    Geometric,
    /// Constant difference between consecutive levels.
    Linear,
}

/// Strictly decreasing annealing noise levels `σ₁ > … > σ_L > 0`.
#[derive(Debug, Clone, PartialEq)]
pub struct NoiseSchedule {
    sigmas: Vec<f64>,
}

impl NoiseSchedule {
    /// Wraps explicit levels after checking they are positive and strictly
    /// decreasing.
    pub fn from_levels(sigmas: Vec<f64>) -> Result<Self> {
        if sigmas.is_empty() {
            return Err(Error::invalid("sigmas", "schedule has no levels"));
        }
        if sigmas.iter().any(|s| !(s.is_finite() && *s > 0.0)) {
            return Err(Error::invalid("sigmas", "levels must be positive and finite"));
        }
        if sigmas.windows(2).any(|w| w[1] >= w[0]) {
            return Err(Error::invalid("sigmas", "levels must be strictly decreasing"));
        }
        Ok(Self { sigmas })
    }

    pub fn sigmas(&self) -> &[f64] {
        &self.sigmas
    }

    pub fn len(&self) -> usize {
        self.sigmas.len()
    }

    pub fn is_empty(&self) -> bool {
        self.sigmas.is_empty()
    }

    pub fn first(&self) -> f64 {
        self.sigmas[0]
    }

    /// The smallest level, `σ_L`.
    pub fn last(&self) -> f64 {
        self.sigmas[self.sigmas.len() - 1]
    }
}

fn check_endpoints(first: f64, last: f64, levels: usize) -> Result<()> {
    if !(last > 0.0 && first > last && first.is_finite()) {
        return Err(Error::invalid(
            "sigma",
            format!("need sigma_first > sigma_last > 0, got {first} and {last}"),
        ));
    }
    if levels < 2 {
        return Err(Error::invalid("levels", format!("need at least 2 levels, got {levels}")));
    }
    Ok(())
}

/// `σ_l = σ₁ (σ_L/σ₁)^{(l−1)/(L−1)}`, with both endpoints reproduced exactly.
pub fn geometric_schedule(first: f64, last: f64, levels: usize) -> Result<NoiseSchedule> {
    check_endpoints(first, last, levels)?;
    let ratio = last / first;
    let n = (levels - 1) as f64;
    let mut sigmas: Vec<f64> = (0..levels).map(|l| first * ratio.powf(l as f64 / n)).collect();
    sigmas[0] = first;
    sigmas[levels - 1] = last;
    NoiseSchedule::from_levels(sigmas)
}

pub fn linear_schedule(first: f64, last: f64, levels: usize) -> Result<NoiseSchedule> {
    check_endpoints(first, last, levels)?;
    let n = (levels - 1) as f64;
    let mut sigmas: Vec<f64> = (0..levels)
        .map(|l| first + (last - first) * (l as f64 / n))
        .collect();
    sigmas[levels - 1] = last;
    NoiseSchedule::from_levels(sigmas)
}
