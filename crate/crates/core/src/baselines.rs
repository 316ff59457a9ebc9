//! Classical reference detectors and the detector dispatch used by the
//! harness.
//!
//! The linear detectors reuse the SVD of [`RealSystem`]:
//! ZF is `V Σ⁻¹ Uᵀ y`, MMSE is `V (Σ² + σ₀² I)⁻¹ Σ Uᵀ y`, which equals
//! `(HᵀH + σ₀² I)⁻¹ Hᵀ y` without forming the normal matrix.

use nalgebra::DVector;
use num_complex::Complex64;
use rand::Rng;

use crate::channel::RealSystem;
use crate::constellation::{project, ModulationPlan, SymbolVector};
use crate::error::{Error, Result};
use crate::langevin::{self, LangevinConfig};

/// Singular values at or below this make `H` rank deficient.
pub const RANK_TOLERANCE: f64 = 1e-10;

/// Largest product alphabet the exhaustive search accepts.
pub const ML_CANDIDATE_CAP: u128 = 1 << 20;

/// A detector and its parameters.
#[derive(Debug, Clone, PartialEq)]
pub enum DetectorKind {
    Zf,
    Mmse,
    MlExhaustive,
    Langevin(LangevinConfig),
}

impl DetectorKind {
    /// Name used in configs and result files: `zf`, `mmse`, `ml`, `langevin`.
    pub fn name(&self) -> &'static str {
        match self {
            DetectorKind::Zf => "zf",
            DetectorKind::Mmse => "mmse",
            DetectorKind::MlExhaustive => "ml",
            DetectorKind::Langevin(_) => "langevin",
        }
    }

    /// Parameter summary for result rows; `-` for parameter-free detectors.
    pub fn params_digest(&self) -> String {
        match self {
            DetectorKind::Langevin(c) => c.digest(),
            _ => "-".to_string(),
        }
    }

    /// Parses a detector name, attaching `langevin` parameters when needed.
    pub fn from_name(name: &str, langevin: &LangevinConfig) -> Result<Self> {
        match name {
            "zf" => Ok(DetectorKind::Zf),
            "mmse" => Ok(DetectorKind::Mmse),
            "ml" => Ok(DetectorKind::MlExhaustive),
            "langevin" => Ok(DetectorKind::Langevin(langevin.clone())),
            other => Err(Error::config(
                "detectors",
                format!("unknown detector `{other}` (expected zf, mmse, ml or langevin)"),
            )),
        }
    }

    /// Checks that the detector can run on systems using `plan`.
    pub fn check(&self, plan: &ModulationPlan) -> Result<()> {
        match self {
            DetectorKind::MlExhaustive => check_ml_size(plan),
            DetectorKind::Langevin(c) => c.validate(),
            _ => Ok(()),
        }
    }

    /// Runs the detector. Only `Langevin` consumes randomness.
    pub fn detect<R: Rng + ?Sized>(
        &self,
        system: &RealSystem,
        plan: &ModulationPlan,
        rng: &mut R,
    ) -> Result<SymbolVector> {
        match self {
            DetectorKind::Zf => zf_detect(system, plan),
            DetectorKind::Mmse => mmse_detect(system, plan),
            DetectorKind::MlExhaustive => ml_exhaustive(system, plan),
            DetectorKind::Langevin(c) => langevin::detect_with_system(system, c, plan, rng),
        }
    }
}

fn check_plan(system: &RealSystem, plan: &ModulationPlan) -> Result<()> {
    if system.n_users() != plan.n_users() {
        return Err(Error::DimensionMismatch {
            context: "modulation plan",
            expected: system.n_users(),
            found: plan.n_users(),
        });
    }
    Ok(())
}

/// Unprojected zero-forcing estimate `H† y`.
pub fn zf_estimate(system: &RealSystem) -> Result<DVector<f64>> {
    let s = system.singular_values();
    let smallest = s.min();
    if smallest <= RANK_TOLERANCE {
        return Err(Error::RankDeficient { smallest });
    }
    let z = system.eta().component_div(s);
    Ok(system.v() * z)
}

/// Unprojected MMSE estimate `(HᵀH + σ₀² I)⁻¹ Hᵀ y`.
pub fn mmse_estimate(system: &RealSystem) -> Result<DVector<f64>> {
    let s = system.singular_values();
    let var = system.sigma0() * system.sigma0();
    if var == 0.0 {
        return zf_estimate(system);
    }
    let z = DVector::from_fn(s.len(), |j, _| s[j] * system.eta()[j] / (s[j] * s[j] + var));
    Ok(system.v() * z)
}

pub fn zf_detect(system: &RealSystem, plan: &ModulationPlan) -> Result<SymbolVector> {
    check_plan(system, plan)?;
    project(zf_estimate(system)?.as_slice(), plan)
}

pub fn mmse_detect(system: &RealSystem, plan: &ModulationPlan) -> Result<SymbolVector> {
    check_plan(system, plan)?;
    project(mmse_estimate(system)?.as_slice(), plan)
}

fn check_ml_size(plan: &ModulationPlan) -> Result<()> {
    let size = plan.product_size();
    if size > ML_CANDIDATE_CAP {
        return Err(Error::AlphabetTooLarge {
            size,
            cap: ML_CANDIDATE_CAP,
        });
    }
    Ok(())
}

/// Exact `argmin ‖y − Hx‖²` over the product alphabet by depth-first
/// enumeration. Candidates are visited in lexicographic order of point
/// indices (user 0 slowest) and only a strictly smaller residual replaces
/// the incumbent.
pub fn ml_exhaustive(system: &RealSystem, plan: &ModulationPlan) -> Result<SymbolVector> {
    check_plan(system, plan)?;
    check_ml_size(plan)?;
    let h = system.h();
    let n = plan.n_users();
    let rows = h.nrows();

    // Column contribution of each (user, point): H[:, j] Re p + H[:, j+n] Im p.
    let contrib: Vec<Vec<DVector<f64>>> = (0..n)
        .map(|j| {
            plan.user(j)
                .points()
                .iter()
                .map(|p: &Complex64| h.column(j) * p.re + h.column(j + n) * p.im)
                .collect()
        })
        .collect();

    // partial[d] is y minus the contributions of users 0..d.
    let mut partial: Vec<DVector<f64>> = vec![DVector::zeros(rows); n + 1];
    partial[0].copy_from(system.y());
    let mut idx = vec![0usize; n];
    let mut best = (f64::INFINITY, vec![0usize; n]);
    let mut depth = 0;
    loop {
        if depth == n {
            let r = partial[n].norm_squared();
            if r < best.0 {
                best = (r, idx.clone());
            }
            // Backtrack to the deepest user with points left.
            loop {
                if depth == 0 {
                    return plan.symbols_from_indices(best.1);
                }
                depth -= 1;
                idx[depth] += 1;
                if idx[depth] < plan.user(depth).order() {
                    break;
                }
                idx[depth] = 0;
            }
        }
        let (head, tail) = partial.split_at_mut(depth + 1);
        tail[0].copy_from(&head[depth]);
        tail[0] -= &contrib[depth][idx[depth]];
        depth += 1;
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::channel::{rayleigh_channel, ComplexChannel};
    use crate::constellation::{sample_symbols, Constellation};
    use nalgebra::DMatrix;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn qpsk(n: usize) -> ModulationPlan {
        ModulationPlan::uniform(Constellation::qam(4).unwrap(), n).unwrap()
    }

    fn brute_force(system: &RealSystem, plan: &ModulationPlan) -> Vec<usize> {
        let n = plan.n_users();
        let total = plan.product_size() as usize;
        let mut best = (f64::INFINITY, vec![]);
        for code in 0..total {
            let mut rem = code;
            let mut idx = vec![0; n];
            for j in (0..n).rev() {
                let k = plan.user(j).order();
                idx[j] = rem % k;
                rem /= k;
            }
            let x = plan.symbols_from_indices(idx.clone()).unwrap();
            let r = system.residual(x.real());
            if r < best.0 {
                best = (r, idx);
            }
        }
        best.1
    }

    #[test]
    fn noiseless_recovery() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let plan = ModulationPlan::from_orders(&[16, 4, 64]).unwrap();
        for _ in 0..20 {
            let ch = rayleigh_channel(6, 3, &mut rng).unwrap();
            let x = sample_symbols(&plan, &mut rng);
            let sys = RealSystem::simulate(&ch, &x, 0.0, &mut rng).unwrap();
            assert_eq!(zf_detect(&sys, &plan).unwrap(), x);
            assert_eq!(mmse_detect(&sys, &plan).unwrap(), x);
            assert_eq!(ml_exhaustive(&sys, &plan).unwrap(), x);
        }
    }

    #[test]
    fn ml_matches_brute_force() {
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let plan = ModulationPlan::from_orders(&[4, 16, 4]).unwrap();
        for _ in 0..30 {
            let ch = rayleigh_channel(4, 3, &mut rng).unwrap();
            let x = sample_symbols(&plan, &mut rng);
            let sys = RealSystem::simulate(&ch, &x, 0.4, &mut rng).unwrap();
            assert_eq!(ml_exhaustive(&sys, &plan).unwrap().indices(), brute_force(&sys, &plan));
        }
    }

    #[test]
    fn single_user_ml_is_metric_nearest() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let plan = qpsk(1);
        let ch = rayleigh_channel(3, 1, &mut rng).unwrap();
        let x = sample_symbols(&plan, &mut rng);
        let sys = RealSystem::simulate(&ch, &x, 0.5, &mut rng).unwrap();
        let got = ml_exhaustive(&sys, &plan).unwrap();
        let best = (0..4)
            .min_by(|&a, &b| {
                let ra = sys.residual(plan.symbols_from_indices(vec![a]).unwrap().real());
                let rb = sys.residual(plan.symbols_from_indices(vec![b]).unwrap().real());
                ra.partial_cmp(&rb).unwrap()
            })
            .unwrap();
        assert_eq!(got.indices(), &[best]);
    }

    #[test]
    fn orthogonal_channel_zf_is_matched_filter() {
        let n = 4;
        let f = DMatrix::from_fn(n, 2, |r, c| {
            let t = 2.0 * std::f64::consts::PI * (r * c) as f64 / n as f64;
            Complex64::from_polar(0.5, t)
        });
        let ch = ComplexChannel::new(f).unwrap();
        let plan = qpsk(2);
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        for _ in 0..10 {
            let x = sample_symbols(&plan, &mut rng);
            let sys = RealSystem::simulate(&ch, &x, 0.3, &mut rng).unwrap();
            let mf = sys.h().tr_mul(sys.y());
            assert_eq!(zf_detect(&sys, &plan).unwrap(), project(mf.as_slice(), &plan).unwrap());
        }
    }

    #[test]
    fn mmse_equals_zf_without_noise() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let ch = rayleigh_channel(8, 4, &mut rng).unwrap();
        let h = ch.real_embedding();
        let y = DVector::from_fn(16, |_, _| rng.random_range(-1.0..1.0));
        let sys = RealSystem::new(h.clone(), y.clone(), 0.0).unwrap();
        let zf = zf_estimate(&sys).unwrap();
        let mmse = mmse_estimate(&sys).unwrap();
        assert!((&zf - &mmse).amax() < 1e-10);
        // Against the normal equations solved directly.
        let direct = (h.transpose() * &h).lu().solve(&(h.transpose() * &y)).unwrap();
        assert!((zf - direct).amax() < 1e-10);

        let sys = RealSystem::new(h.clone(), y.clone(), 0.3).unwrap();
        let reg = h.transpose() * &h + DMatrix::identity(8, 8) * 0.09;
        let direct = reg.lu().solve(&(h.transpose() * &y)).unwrap();
        assert!((mmse_estimate(&sys).unwrap() - direct).amax() < 1e-10);
    }

    #[test]
    fn mmse_huge_noise_goes_to_tie_break() {
        let mut rng = ChaCha8Rng::seed_from_u64(6);
        let plan = ModulationPlan::uniform(Constellation::qam(16).unwrap(), 2).unwrap();
        let ch = rayleigh_channel(4, 2, &mut rng).unwrap();
        let x = sample_symbols(&plan, &mut rng);
        let sys = RealSystem::simulate(&ch, &x, 1e9, &mut ChaCha8Rng::seed_from_u64(0)).unwrap();
        let est = mmse_estimate(&sys).unwrap();
        assert!(est.amax() < 1e-6);
        let sys0 = RealSystem::new(sys.h().clone(), DVector::zeros(8), 1e9).unwrap();
        // Exact zero estimate sits at the centre of four points; lowest index wins.
        assert_eq!(mmse_detect(&sys0, &plan).unwrap().indices(), &[5, 5]);
    }

    #[test]
    fn rank_deficiency() {
        let mut h = DMatrix::zeros(4, 4);
        h[(0, 0)] = 1.0;
        h[(2, 2)] = 1.0;
        let plan = qpsk(2);
        let sys = RealSystem::new(h.clone(), DVector::zeros(4), 0.0).unwrap();
        assert!(matches!(zf_detect(&sys, &plan), Err(Error::RankDeficient { .. })));
        assert!(matches!(mmse_detect(&sys, &plan), Err(Error::RankDeficient { .. })));
        let sys = RealSystem::new(h, DVector::zeros(4), 0.1).unwrap();
        assert!(mmse_detect(&sys, &plan).is_ok());
    }

    #[test]
    fn ml_cap() {
        let plan = ModulationPlan::uniform(Constellation::qam(64).unwrap(), 4).unwrap();
        assert_eq!(plan.product_size(), 1 << 24);
        let kind = DetectorKind::MlExhaustive;
        assert!(matches!(kind.check(&plan), Err(Error::AlphabetTooLarge { .. })));
        let ok = ModulationPlan::uniform(Constellation::qam(4).unwrap(), 10).unwrap();
        assert!(kind.check(&ok).is_ok());
    }

    #[test]
    fn names_round_trip() {
        let lc = LangevinConfig::default();
        for name in ["zf", "mmse", "ml", "langevin"] {
            assert_eq!(DetectorKind::from_name(name, &lc).unwrap().name(), name);
        }
        assert!(DetectorKind::from_name("vblast", &lc).is_err());
    }
}
