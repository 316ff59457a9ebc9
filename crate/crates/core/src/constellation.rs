//! QAM alphabets, per-user modulation plans, symbol sampling, hard
//! projection, and the Gaussian-smoothed prior (posterior-mean denoiser and
//! its score).
//!
//! Symbol vectors of `n` complex users have a real embedding of length `2n`:
//! real parts first, then imaginary parts. User `j` therefore owns the real
//! coordinates `j` and `j + n`.

use std::sync::Arc;

use nalgebra::DVector;
use num_complex::Complex64;
use rand::Rng;

use crate::error::{Error, Result};

/// Softmax weights below this are treated as exactly zero.
const WEIGHT_FLOOR: f64 = 1e-300;

#[derive(Debug, Clone, PartialEq)]
enum Layout {
    /// Square grid: point `i * m + j` is `levels[i] + i·levels[j]`.
    Grid { levels: Vec<f64> },
    General,
}

/// A finite symbol alphabet normalized to unit average power.
#[derive(Debug, Clone, PartialEq)]
pub struct Constellation {
    points: Vec<Complex64>,
    layout: Layout,
    name: String,
}

impl Constellation {
    /// Square QAM of order 4, 16 or 64.
    ///
    /// Points are ordered with the real part as the slow index and both axes
    /// ascending, so for QPSK index 0 is `(-1-1i)/√2` and index 3 is
    /// `(1+1i)/√2`.
    pub fn qam(order: usize) -> Result<Self> {
        let side = match order {
            4 => 2,
            16 => 4,
            64 => 8,
            other => return Err(Error::UnsupportedOrder(other)),
        };
        let raw: Vec<f64> = (0..side).map(|i| (2 * i) as f64 - (side - 1) as f64).collect();
        // Per-axis mean of squares; two axes give the total power.
        let axis_power = raw.iter().map(|a| a * a).sum::<f64>() / side as f64;
        let scale = (2.0 * axis_power).sqrt().recip();
        let levels: Vec<f64> = raw.iter().map(|a| a * scale).collect();
        let points = levels
            .iter()
            .flat_map(|&re| levels.iter().map(move |&im| Complex64::new(re, im)))
            .collect();
        Ok(Self {
            points,
            layout: Layout::Grid { levels },
            name: format!("{order}qam"),
        })
    }

    /// Arbitrary alphabet, rescaled to unit average power.
    pub fn from_points(points: &[Complex64]) -> Result<Self> {
        if points.is_empty() {
            return Err(Error::invalid("points", "constellation is empty"));
        }
        if points.iter().any(|p| !p.re.is_finite() || !p.im.is_finite()) {
            return Err(Error::invalid("points", "non-finite point"));
        }
        for (i, a) in points.iter().enumerate() {
            if points[..i].contains(a) {
                return Err(Error::invalid("points", format!("duplicate point {a}")));
            }
        }
        let power = points.iter().map(|p| p.norm_sqr()).sum::<f64>() / points.len() as f64;
        if power <= 0.0 {
            return Err(Error::invalid("points", "zero average power"));
        }
        let scale = power.sqrt().recip();
        Ok(Self {
            points: points.iter().map(|p| p * scale).collect(),
            layout: Layout::General,
            name: format!("custom{}", points.len()),
        })
    }

    pub fn order(&self) -> usize {
        self.points.len()
    }

    pub fn points(&self) -> &[Complex64] {
        &self.points
    }

    pub fn point(&self, index: usize) -> Complex64 {
        self.points[index]
    }

    /// Short label such as `16qam`.
    pub fn name(&self) -> &str {
        &self.name
    }

    pub fn mean_power(&self) -> f64 {
        self.points.iter().map(|p| p.norm_sqr()).sum::<f64>() / self.points.len() as f64
    }

    /// Index of the point nearest to `z`; ties go to the lowest index.
    pub fn nearest(&self, z: Complex64) -> usize {
        let mut best = 0;
        let mut best_dist = f64::INFINITY;
        for (k, p) in self.points.iter().enumerate() {
            let d = (z - p).norm_sqr();
            if d < best_dist {
                best_dist = d;
                best = k;
            }
        }
        best
    }

    /// Posterior mean of a uniformly drawn point given `z = x + n`,
    /// `n ~ N(0, σ² I₂)`, evaluated jointly over the 2-D points.
    pub fn posterior_mean_joint(&self, z: Complex64, sigma: f64) -> Complex64 {
        let inv = 0.5 / (sigma * sigma);
        let min = self
            .points
            .iter()
            .map(|p| (z - p).norm_sqr())
            .fold(f64::INFINITY, f64::min);
        let mut num = Complex64::new(0.0, 0.0);
        let mut den = 0.0;
        for p in &self.points {
            let w = flush((-((z - p).norm_sqr() - min) * inv).exp());
            num += p * w;
            den += w;
        }
        num / den
    }

    /// Same as [`posterior_mean_joint`](Self::posterior_mean_joint); square
    /// grids factor into two 1-D mixtures and take the cheaper route.
    pub fn posterior_mean(&self, z: Complex64, sigma: f64) -> Complex64 {
        match &self.layout {
            Layout::Grid { levels } => {
                let inv = 0.5 / (sigma * sigma);
                let step = levels[1] - levels[0];
                let q = (-2.0 * step * step * inv).exp();
                Complex64::new(
                    axis_mean(levels, step, q, z.re, inv),
                    axis_mean(levels, step, q, z.im, inv),
                )
            }
            Layout::General => self.posterior_mean_joint(z, sigma),
        }
    }
}

fn flush(w: f64) -> f64 {
    if w < WEIGHT_FLOOR {
        0.0
    } else {
        w
    }
}

/// 1-D posterior mean over equally spaced `levels`.
///
/// Weights relative to the nearest level follow `w_{k+1} = w_k u_k` with
/// `u_{k+1} = u_k q`, `q = exp(-2Δ²/(2σ²))`, so only the first ratio on each
/// side needs an `exp`. Every ratio is at most one.
fn axis_mean(levels: &[f64], step: f64, q: f64, r: f64, inv_two_var: f64) -> f64 {
    let last = levels.len() - 1;
    let nearest = ((r - levels[0]) / step).round().clamp(0.0, last as f64) as usize;
    let d = r - levels[nearest];
    let mut num = levels[nearest];
    let mut den = 1.0;

    let mut w = 1.0;
    let mut u = ((2.0 * d - step) * step * inv_two_var).exp();
    for &a in &levels[nearest + 1..] {
        w = flush(w * u);
        if w == 0.0 {
            break;
        }
        num += a * w;
        den += w;
        u *= q;
    }
    let mut w = 1.0;
    let mut u = ((-2.0 * d - step) * step * inv_two_var).exp();
    for &a in levels[..nearest].iter().rev() {
        w = flush(w * u);
        if w == 0.0 {
            break;
        }
        num += a * w;
        den += w;
        u *= q;
    }
    num / den
}

/// The constellation used by each complex user.
#[derive(Debug, Clone, PartialEq)]
pub struct ModulationPlan {
    per_user: Vec<Arc<Constellation>>,
}

impl ModulationPlan {
    pub fn new(per_user: Vec<Arc<Constellation>>) -> Result<Self> {
        if per_user.is_empty() {
            return Err(Error::invalid("plan", "no users"));
        }
        Ok(Self { per_user })
    }

    /// Every user transmits the same constellation.
    pub fn uniform(constellation: Constellation, n_users: usize) -> Result<Self> {
        let shared = Arc::new(constellation);
        Self::new(vec![shared; n_users])
    }

    /// One QAM order per user; equal orders share one alphabet.
    pub fn from_orders(orders: &[usize]) -> Result<Self> {
        let mut cache: Vec<(usize, Arc<Constellation>)> = Vec::new();
        let mut per_user = Vec::with_capacity(orders.len());
        for &order in orders {
            let c = match cache.iter().find(|(o, _)| *o == order) {
                Some((_, c)) => c.clone(),
                None => {
                    let c = Arc::new(Constellation::qam(order)?);
                    cache.push((order, c.clone()));
                    c
                }
            };
            per_user.push(c);
        }
        Self::new(per_user)
    }

    pub fn n_users(&self) -> usize {
        self.per_user.len()
    }

    pub fn user(&self, j: usize) -> &Constellation {
        &self.per_user[j]
    }

    pub fn constellations(&self) -> impl Iterator<Item = &Constellation> {
        self.per_user.iter().map(|c| c.as_ref())
    }

    /// Size of the product alphabet, saturating at `u128::MAX`.
    pub fn product_size(&self) -> u128 {
        self.per_user
            .iter()
            .fold(1u128, |acc, c| acc.saturating_mul(c.order() as u128))
    }

    /// Builds the symbol vector with the given per-user point indices.
    pub fn symbols_from_indices(&self, indices: Vec<usize>) -> Result<SymbolVector> {
        if indices.len() != self.n_users() {
            return Err(Error::DimensionMismatch {
                context: "symbol indices",
                expected: self.n_users(),
                found: indices.len(),
            });
        }
        for (j, &k) in indices.iter().enumerate() {
            if k >= self.user(j).order() {
                return Err(Error::invalid(
                    "indices",
                    format!("index {k} out of range for user {j}"),
                ));
            }
        }
        let symbols = indices
            .iter()
            .enumerate()
            .map(|(j, &k)| self.user(j).point(k))
            .collect();
        Ok(SymbolVector::from_parts(indices, symbols))
    }

    fn check_real_len(&self, context: &'static str, len: usize) -> Result<()> {
        if len != 2 * self.n_users() {
            return Err(Error::DimensionMismatch {
                context,
                expected: 2 * self.n_users(),
                found: len,
            });
        }
        Ok(())
    }

    /// Allocation-free posterior mean used by the sampler's inner loop.
    pub(crate) fn denoise_into(&self, x: &[f64], sigma: f64, out: &mut [f64]) {
        let n = self.n_users();
        for (j, c) in self.per_user.iter().enumerate() {
            let m = c.posterior_mean(Complex64::new(x[j], x[j + n]), sigma);
            out[j] = m.re;
            out[j + n] = m.im;
        }
    }
}

/// Transmitted (or detected) symbols of all users.
#[derive(Debug, Clone, PartialEq)]
pub struct SymbolVector {
    indices: Vec<usize>,
    symbols: Vec<Complex64>,
    real: DVector<f64>,
}

impl SymbolVector {
    fn from_parts(indices: Vec<usize>, symbols: Vec<Complex64>) -> Self {
        let real = embed_complex(&symbols);
        Self {
            indices,
            symbols,
            real,
        }
    }

    /// Point index of each user within its constellation.
    pub fn indices(&self) -> &[usize] {
        &self.indices
    }

    pub fn symbols(&self) -> &[Complex64] {
        &self.symbols
    }

    /// `[Re(x)ᵀ Im(x)ᵀ]ᵀ`.
    pub fn real(&self) -> &DVector<f64> {
        &self.real
    }

    pub fn n_users(&self) -> usize {
        self.symbols.len()
    }
}

/// Stacks real parts over imaginary parts.
pub fn embed_complex(v: &[Complex64]) -> DVector<f64> {
    let n = v.len();
    DVector::from_fn(2 * n, |i, _| if i < n { v[i].re } else { v[i - n].im })
}

/// Inverse of [`embed_complex`]. `v` must have even length.
pub fn unembed_real(v: &[f64]) -> Vec<Complex64> {
    let n = v.len() / 2;
    (0..n).map(|j| Complex64::new(v[j], v[j + n])).collect()
}

/// Draws each user's symbol uniformly from its own constellation.
pub fn sample_symbols<R: Rng + ?Sized>(plan: &ModulationPlan, rng: &mut R) -> SymbolVector {
    let indices: Vec<usize> = plan
        .constellations()
        .map(|c| rng.random_range(0..c.order()))
        .collect();
    let symbols = indices
        .iter()
        .enumerate()
        .map(|(j, &k)| plan.user(j).point(k))
        .collect();
    SymbolVector::from_parts(indices, symbols)
}

/// Nearest point of each user's constellation to a continuous real-embedded
/// estimate.
pub fn project(x: &[f64], plan: &ModulationPlan) -> Result<SymbolVector> {
    plan.check_real_len("project", x.len())?;
    let n = plan.n_users();
    let indices: Vec<usize> = plan
        .constellations()
        .enumerate()
        .map(|(j, c)| c.nearest(Complex64::new(x[j], x[j + n])))
        .collect();
    let symbols = indices
        .iter()
        .enumerate()
        .map(|(j, &k)| plan.user(j).point(k))
        .collect();
    Ok(SymbolVector::from_parts(indices, symbols))
}

fn check_sigma(sigma: f64) -> Result<()> {
    if !(sigma > 0.0 && sigma.is_finite()) {
        return Err(Error::invalid("sigma", format!("must be positive and finite, got {sigma}")));
    }
    Ok(())
}

/// Posterior mean `E_σ[x | x̃]` under a uniform prior on each user's
/// constellation and Gaussian smoothing of standard deviation `sigma`.
pub fn conditional_mean(x_tilde: &[f64], sigma: f64, plan: &ModulationPlan) -> Result<DVector<f64>> {
    plan.check_real_len("conditional_mean", x_tilde.len())?;
    check_sigma(sigma)?;
    let mut out = DVector::zeros(x_tilde.len());
    plan.denoise_into(x_tilde, sigma, out.as_mut_slice());
    Ok(out)
}

/// Score of the Gaussian-smoothed prior via Tweedie's identity:
/// `(E_σ[x | x̃] − x̃) / σ²`.
pub fn prior_score(x_tilde: &[f64], sigma: f64, plan: &ModulationPlan) -> Result<DVector<f64>> {
    let mean = conditional_mean(x_tilde, sigma, plan)?;
    let inv_var = (sigma * sigma).recip();
    Ok(DVector::from_fn(x_tilde.len(), |i, _| (mean[i] - x_tilde[i]) * inv_var))
}

/// Symbol error counts over a batch.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub struct ErrorCount {
    pub errors: u64,
    pub symbols: u64,
}

impl ErrorCount {
    pub fn ser(&self) -> f64 {
        if self.symbols == 0 {
            0.0
        } else {
            self.errors as f64 / self.symbols as f64
        }
    }

    pub fn add(&mut self, other: ErrorCount) {
        self.errors += other.errors;
        self.symbols += other.symbols;
    }
}

/// Counts user-symbols of `est` that differ from `truth`.
pub fn count_errors(est: &SymbolVector, truth: &SymbolVector) -> Result<ErrorCount> {
    if est.n_users() != truth.n_users() {
        return Err(Error::DimensionMismatch {
            context: "symbol vectors",
            expected: truth.n_users(),
            found: est.n_users(),
        });
    }
    let errors = est
        .symbols
        .iter()
        .zip(&truth.symbols)
        .filter(|(a, b)| a != b)
        .count();
    Ok(ErrorCount {
        errors: errors as u64,
        symbols: truth.n_users() as u64,
    })
}

/// Symbol error rate over a batch, with the raw counts.
pub fn symbol_error_rate(est: &[SymbolVector], truth: &[SymbolVector]) -> Result<ErrorCount> {
    if est.len() != truth.len() {
        return Err(Error::DimensionMismatch {
            context: "batch",
            expected: truth.len(),
            found: est.len(),
        });
    }
    let mut total = ErrorCount::default();
    for (e, t) in est.iter().zip(truth) {
        total.add(count_errors(e, t)?);
    }
    Ok(total)
}
