//! Channel generation, the real-valued embedding, the SVD-based system the
//! sampler consumes, SNR calibration, and forward transmission.

use nalgebra::{DMatrix, DVector, SymmetricEigen, SVD};
use num_complex::Complex64;
use rand::Rng;
use rand_distr::StandardNormal;

use crate::constellation::SymbolVector;
use crate::error::{Error, Result};

pub mod io;

const SVD_EPS: f64 = f64::EPSILON;

/// Complex `N_r × N_u` channel: rows are receive antennas, columns users.
#[derive(Debug, Clone, PartialEq)]
pub struct ComplexChannel {
    entries: DMatrix<Complex64>,
}

impl ComplexChannel {
    pub fn new(entries: DMatrix<Complex64>) -> Result<Self> {
        if entries.nrows() == 0 || entries.ncols() == 0 {
            return Err(Error::invalid("channel", "empty matrix"));
        }
        if entries.iter().any(|h| !h.re.is_finite() || !h.im.is_finite()) {
            return Err(Error::invalid("channel", "non-finite entry"));
        }
        Ok(Self { entries })
    }

    pub fn entries(&self) -> &DMatrix<Complex64> {
        &self.entries
    }

    pub fn n_rx(&self) -> usize {
        self.entries.nrows()
    }

    pub fn n_users(&self) -> usize {
        self.entries.ncols()
    }

    /// `[[Re H, −Im H], [Im H, Re H]]`.
    pub fn real_embedding(&self) -> DMatrix<f64> {
        real_embedding(&self.entries)
    }
}

/// Block embedding of a complex matrix, so that
/// `embed(H) · [Re x; Im x] = [Re Hx; Im Hx]`.
pub fn real_embedding(h: &DMatrix<Complex64>) -> DMatrix<f64> {
    let (r, c) = h.shape();
    DMatrix::from_fn(2 * r, 2 * c, |i, j| {
        let z = h[(i % r, j % c)];
        match (i < r, j < c) {
            (true, true) | (false, false) => z.re,
            (true, false) => -z.im,
            (false, true) => z.im,
        }
    })
}

fn check_dims(n_rx: usize, n_users: usize) -> Result<()> {
    if n_users == 0 {
        return Err(Error::invalid("n_users", "must be at least 1"));
    }
    if n_rx < n_users {
        return Err(Error::invalid(
            "n_rx",
            format!("{n_rx} receive antennas cannot separate {n_users} users"),
        ));
    }
    Ok(())
}

/// I.i.d. `CN(0, 1/N_r)` entries.
pub fn rayleigh_channel<R: Rng + ?Sized>(
    n_rx: usize,
    n_users: usize,
    rng: &mut R,
) -> Result<ComplexChannel> {
    check_dims(n_rx, n_users)?;
    let std = (2.0 * n_rx as f64).sqrt().recip();
    // Column-major fill order, re then im per entry.
    let entries = DMatrix::from_fn(n_rx, n_users, |_, _| {
        let re: f64 = rng.sample(StandardNormal);
        let im: f64 = rng.sample(StandardNormal);
        Complex64::new(re * std, im * std)
    });
    ComplexChannel::new(entries)
}

/// Exponential correlation matrix `R_ij = ρ^|i−j|`.
pub fn exp_correlation(n: usize, rho: f64) -> Result<DMatrix<f64>> {
    if !(0.0..1.0).contains(&rho) {
        return Err(Error::invalid("rho", format!("must lie in [0, 1), got {rho}")));
    }
    Ok(DMatrix::from_fn(n, n, |i, j| rho.powi(i.abs_diff(j) as i32)))
}

/// Symmetric square root of a symmetric positive semidefinite matrix.
///
/// Eigenvalues in `[-1e-10, 0)` are clamped to zero; anything more negative
/// is rejected.
pub fn matrix_sqrt_psd(r: &DMatrix<f64>) -> Result<DMatrix<f64>> {
    if !r.is_square() {
        return Err(Error::DimensionMismatch {
            context: "matrix_sqrt_psd",
            expected: r.nrows(),
            found: r.ncols(),
        });
    }
    let scale = r.amax().max(1.0);
    let asymmetry = (r - r.transpose()).amax();
    if asymmetry > 1e-12 * scale {
        return Err(Error::NotSymmetric { asymmetry });
    }
    let eig = SymmetricEigen::new(r.clone());
    let mut roots = eig.eigenvalues.clone();
    for lambda in roots.iter_mut() {
        if *lambda < -1e-10 {
            return Err(Error::Indefinite { eigenvalue: *lambda });
        }
        *lambda = lambda.max(0.0).sqrt();
    }
    let q = &eig.eigenvectors;
    let s = q * DMatrix::from_diagonal(&roots) * q.transpose();
    // Symmetrize away rounding.
    Ok((&s + s.transpose()) * 0.5)
}

/// Kronecker-correlated channel `R_r^{1/2} H_e R_u^{1/2}` with exponential
/// correlation on both sides. `rho = 0` returns the Rayleigh draw unchanged.
pub fn kronecker_channel<R: Rng + ?Sized>(
    n_rx: usize,
    n_users: usize,
    rho: f64,
    rng: &mut R,
) -> Result<ComplexChannel> {
    let rx_corr = exp_correlation(n_rx, rho)?;
    let tx_corr = exp_correlation(n_users, rho)?;
    let he = rayleigh_channel(n_rx, n_users, rng)?;
    if rho == 0.0 {
        return Ok(he);
    }
    let to_complex = |m: DMatrix<f64>| m.map(|v| Complex64::new(v, 0.0));
    let rx_sqrt = to_complex(matrix_sqrt_psd(&rx_corr)?);
    let tx_sqrt = to_complex(matrix_sqrt_psd(&tx_corr)?);
    ComplexChannel::new(rx_sqrt * he.entries() * tx_sqrt)
}

pub fn db_to_linear(db: f64) -> f64 {
    10f64.powf(db / 10.0)
}

/// Per-real-component noise standard deviation for a target SNR
/// `E‖Hx‖² / E‖z‖²`, with `E‖Hx‖² = N_u` for unit-power symbols over a
/// `CN(0, 1/N_r)` channel and `E‖z‖² = 2 N_r σ₀²`.
///
/// An infinite SNR gives `σ₀ = 0`.
pub fn sigma0_from_snr(snr_linear: f64, n_rx: usize, n_users: usize) -> Result<f64> {
    if snr_linear.is_nan() || snr_linear <= 0.0 {
        return Err(Error::invalid("snr", format!("must be positive, got {snr_linear}")));
    }
    check_dims(n_rx, n_users)?;
    Ok((n_users as f64 / (2.0 * n_rx as f64 * snr_linear)).sqrt())
}

/// `y = H x + z` with `z ~ N(0, σ₀² I)` per real component.
pub fn transmit<R: Rng + ?Sized>(
    h: &DMatrix<f64>,
    x: &SymbolVector,
    sigma0: f64,
    rng: &mut R,
) -> Result<DVector<f64>> {
    if h.ncols() != x.real().len() {
        return Err(Error::DimensionMismatch {
            context: "transmit",
            expected: h.ncols(),
            found: x.real().len(),
        });
    }
    if !(sigma0 >= 0.0 && sigma0.is_finite()) {
        return Err(Error::invalid("sigma0", format!("must be finite and nonnegative, got {sigma0}")));
    }
    let mut y = h * x.real();
    for v in y.iter_mut() {
        let w: f64 = rng.sample(StandardNormal);
        *v += sigma0 * w;
    }
    Ok(y)
}

/// Real-embedded system with its economy SVD and spectral observation.
#[derive(Debug, Clone)]
pub struct RealSystem {
    h: DMatrix<f64>,
    u: DMatrix<f64>,
    s: DVector<f64>,
    v: DMatrix<f64>,
    y: DVector<f64>,
    eta: DVector<f64>,
    sigma0: f64,
}

impl RealSystem {
    /// Decomposes the real channel `h` (`2N_r × 2N_u`, `N_r ≥ N_u`).
    pub fn new(h: DMatrix<f64>, y: DVector<f64>, sigma0: f64) -> Result<Self> {
        if h.nrows() < h.ncols() || h.ncols() == 0 {
            return Err(Error::invalid(
                "channel",
                format!("expected a tall matrix, got {}x{}", h.nrows(), h.ncols()),
            ));
        }
        if y.len() != h.nrows() {
            return Err(Error::DimensionMismatch {
                context: "observation",
                expected: h.nrows(),
                found: y.len(),
            });
        }
        if !(sigma0 >= 0.0 && sigma0.is_finite()) {
            return Err(Error::invalid("sigma0", format!("must be finite and nonnegative, got {sigma0}")));
        }
        if h.iter().chain(y.iter()).any(|v| !v.is_finite()) {
            return Err(Error::Decomposition("non-finite input"));
        }
        let svd = SVD::try_new(h.clone(), true, true, SVD_EPS, 0)
            .ok_or(Error::Decomposition("did not converge"))?;
        let u = svd.u.ok_or(Error::Decomposition("missing U"))?;
        let v = svd.v_t.ok_or(Error::Decomposition("missing V"))?.transpose();
        let s = svd.singular_values;
        let eta = u.tr_mul(&y);
        Ok(Self {
            h,
            u,
            s,
            v,
            y,
            eta,
            sigma0,
        })
    }

    /// Same channel and noise level, new observation. Reuses the SVD.
    pub fn with_observation(mut self, y: DVector<f64>) -> Result<Self> {
        if y.len() != self.h.nrows() {
            return Err(Error::DimensionMismatch {
                context: "observation",
                expected: self.h.nrows(),
                found: y.len(),
            });
        }
        if y.iter().any(|v| !v.is_finite()) {
            return Err(Error::Decomposition("non-finite input"));
        }
        self.eta = self.u.tr_mul(&y);
        self.y = y;
        Ok(self)
    }

    pub fn from_channel(channel: &ComplexChannel, y: DVector<f64>, sigma0: f64) -> Result<Self> {
        Self::new(channel.real_embedding(), y, sigma0)
    }

    /// Transmits `x` over `channel` and decomposes the result.
    pub fn simulate<R: Rng + ?Sized>(
        channel: &ComplexChannel,
        x: &SymbolVector,
        sigma0: f64,
        rng: &mut R,
    ) -> Result<Self> {
        let h = channel.real_embedding();
        let y = transmit(&h, x, sigma0, rng)?;
        Self::new(h, y, sigma0)
    }

    pub fn h(&self) -> &DMatrix<f64> {
        &self.h
    }

    /// Left singular vectors, `2N_r × 2N_u`.
    pub fn u(&self) -> &DMatrix<f64> {
        &self.u
    }

    /// Singular values, nonincreasing.
    pub fn singular_values(&self) -> &DVector<f64> {
        &self.s
    }

    /// Right singular vectors, `2N_u × 2N_u`.
    pub fn v(&self) -> &DMatrix<f64> {
        &self.v
    }

    pub fn y(&self) -> &DVector<f64> {
        &self.y
    }

    /// `Uᵀ y`.
    pub fn eta(&self) -> &DVector<f64> {
        &self.eta
    }

    pub fn sigma0(&self) -> f64 {
        self.sigma0
    }

    /// Number of real unknowns, `2N_u`.
    pub fn dim(&self) -> usize {
        self.h.ncols()
    }

    pub fn n_users(&self) -> usize {
        self.h.ncols() / 2
    }

    /// `‖y − H x‖²` for a real-embedded `x`.
    pub fn residual(&self, x: &DVector<f64>) -> f64 {
        (&self.y - &self.h * x).norm_squared()
    }
}

/// Per-entry standard deviation `sqrt(|σ₀² − σ_l² s_j²|)` of the annealed
/// spectral noise `ζ − Σν_l` at every level of a schedule.
#[derive(Debug, Clone, PartialEq)]
pub struct AnnealedNoiseModel {
    variances: Vec<Vec<f64>>,
}

impl AnnealedNoiseModel {
    pub fn new(singular_values: &[f64], sigma0: f64, sigmas: &[f64]) -> Self {
        let variances = sigmas
            .iter()
            .map(|&sl| {
                singular_values
                    .iter()
                    .map(|&sj| (sigma0 * sigma0 - sl * sl * sj * sj).abs())
                    .collect()
            })
            .collect();
        Self { variances }
    }

    /// Variances of level `l` (zero-based).
    pub fn variances(&self, level: usize) -> &[f64] {
        &self.variances[level]
    }

    pub fn std(&self, level: usize, j: usize) -> f64 {
        self.variances[level][j].sqrt()
    }
}
