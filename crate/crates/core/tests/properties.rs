use langevin_mimo::baselines::{ml_exhaustive, mmse_estimate, zf_estimate};
use langevin_mimo::channel::{db_to_linear, rayleigh_channel, sigma0_from_snr, RealSystem};
use langevin_mimo::constellation::{conditional_mean, prior_score, project, sample_symbols};
use langevin_mimo::langevin::{
    geometric_schedule, likelihood_score, posterior_score, run_trajectory_observed, step_size, ScoreCase, StepRecord,
};
use langevin_mimo::{Constellation, DetectorKind, LangevinConfig, ModulationPlan};
use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;
use proptest::prelude::*;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

fn plan_of(order: usize, n: usize) -> ModulationPlan {
    ModulationPlan::uniform(Constellation::qam(order).unwrap(), n).unwrap()
}

fn random_system(seed: u64, n_rx: usize, plan: &ModulationPlan, snr_db: f64) -> (RealSystem, DVector<f64>) {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let n_users = plan.n_users();
    let h = rayleigh_channel(n_rx, n_users, &mut rng).unwrap();
    let x = sample_symbols(plan, &mut rng);
    let sigma0 = sigma0_from_snr(db_to_linear(snr_db), n_rx, n_users).unwrap();
    let sys = RealSystem::simulate(&h, &x, sigma0, &mut rng).unwrap();
    (sys, x.real().clone())
}

/// log (1/K) Σ_k N(z; c_k, σ² I) for one complex user, up to a constant.
fn mixture_log_density(points: &[Complex64], z: Complex64, sigma: f64) -> f64 {
    let e: Vec<f64> = points.iter().map(|c| -(z - c).norm_sqr() / (2.0 * sigma * sigma)).collect();
    let m = e.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    m + e.iter().map(|v| (v - m).exp()).sum::<f64>().ln()
}

fn rel_err(a: f64, b: f64) -> f64 {
    (a - b).abs() / b.abs().max(1.0)
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(100))]

    #[test]
    fn prior_score_matches_mixture_gradient(
        order in prop::sample::select(vec![4usize, 16, 64]),
        re in -1.5f64..1.5,
        im in -1.5f64..1.5,
        sigma in 0.01f64..1.0,
    ) {
        let plan = plan_of(order, 1);
        let points = plan.user(0).points().to_vec();
        // Central differences with a step well inside the softmax transition width.
        let h = 1e-4 * sigma;
        let g = prior_score(&[re, im], sigma, &plan).unwrap();
        let d_re = (mixture_log_density(&points, Complex64::new(re + h, im), sigma)
            - mixture_log_density(&points, Complex64::new(re - h, im), sigma)) / (2.0 * h);
        let d_im = (mixture_log_density(&points, Complex64::new(re, im + h), sigma)
            - mixture_log_density(&points, Complex64::new(re, im - h), sigma)) / (2.0 * h);
        prop_assert!(rel_err(g[0], d_re) < 1e-4, "{} vs {}", g[0], d_re);
        prop_assert!(rel_err(g[1], d_im) < 1e-4, "{} vs {}", g[1], d_im);
    }

    #[test]
    fn likelihood_score_matches_gradient(seed in any::<u64>(), sigma_l in 0.0f64..1.0, snr in 0.0f64..20.0) {
        let plan = plan_of(16, 4);
        let (sys, _) = random_system(seed, 8, &plan, snr);
        let mut rng = ChaCha8Rng::seed_from_u64(seed ^ 1);
        let chi = DVector::from_fn(8, |_, _| rand::Rng::random_range(&mut rng, -1.0..1.0));
        let s = sys.singular_values();
        let eta = sys.eta();
        let var = |j: usize| (sys.sigma0().powi(2) - sigma_l.powi(2) * s[j] * s[j]).abs();
        let loglik = |c: &DVector<f64>| -> f64 {
            (0..8).filter(|&j| var(j) >= 1e-12).map(|j| -0.5 * (eta[j] - s[j] * c[j]).powi(2) / var(j)).sum()
        };
        let g = likelihood_score(&chi, &sys, sigma_l).unwrap();
        for j in 0..8 {
            if var(j) < 1e-12 {
                prop_assert_eq!(g[j], 0.0);
                continue;
            }
            let h = 1e-6 * var(j).sqrt().max(1e-3);
            let mut up = chi.clone();
            up[j] += h;
            let mut dn = chi.clone();
            dn[j] -= h;
            let fd = (loglik(&up) - loglik(&dn)) / (2.0 * h);
            prop_assert!((g[j] - fd).abs() / fd.abs().max(1e-3 * g[j].abs()).max(1.0) < 1e-5, "{j}: {} vs {fd}", g[j]);
        }
    }

    #[test]
    fn svd_invariants(seed in any::<u64>()) {
        let plan = plan_of(16, 32);
        let (sys, _) = random_system(seed, 64, &plan, 10.0);
        let s = sys.singular_values();
        let sigma = DMatrix::from_diagonal(s);
        let rebuilt = sys.u() * sigma * sys.v().transpose();
        prop_assert!((sys.h() - rebuilt).amax() < 1e-10);
        prop_assert!((sys.u().tr_mul(sys.u()) - DMatrix::identity(64, 64)).amax() < 1e-10);
        prop_assert!((sys.v().tr_mul(sys.v()) - DMatrix::identity(64, 64)).amax() < 1e-10);
        prop_assert!((sys.v() * sys.v().transpose() - DMatrix::identity(64, 64)).amax() < 1e-10);
        prop_assert!(s.iter().all(|&v| v >= 0.0));
        prop_assert!(s.as_slice().windows(2).all(|w| w[0] >= w[1]));
        prop_assert_eq!(sys.eta(), &sys.u().tr_mul(sys.y()));
    }

    #[test]
    fn projection_is_idempotent(xs in prop::collection::vec(-2.0f64..2.0, 6)) {
        let plan = ModulationPlan::from_orders(&[4, 16, 64]).unwrap();
        let once = project(&xs, &plan).unwrap();
        let twice = project(once.real().as_slice(), &plan).unwrap();
        prop_assert_eq!(&once, &twice);
        for (j, &k) in once.indices().iter().enumerate() {
            prop_assert_eq!(once.symbols()[j], plan.user(j).point(k));
        }
    }

    #[test]
    fn conditional_mean_in_convex_hull(xs in prop::collection::vec(-3.0f64..3.0, 6), sigma in 1e-3f64..10.0) {
        let plan = ModulationPlan::from_orders(&[4, 16, 64]).unwrap();
        let m = conditional_mean(&xs, sigma, &plan).unwrap();
        for j in 0..3 {
            // Square grids: the hull is the box spanned by the outermost levels.
            let bound = plan.user(j).points().iter().map(|p| p.re.abs()).fold(0.0, f64::max);
            prop_assert!(m[j].abs() <= bound + 1e-12);
            prop_assert!(m[j + 3].abs() <= bound + 1e-12);
        }
    }

    #[test]
    fn conditional_mean_converges_monotonically(
        order in prop::sample::select(vec![4usize, 16, 64]),
        k in 0usize..64,
        dre in -0.45f64..0.45,
        dim in -0.45f64..0.45,
    ) {
        let plan = plan_of(order, 1);
        let c = plan.user(0);
        let k = k % c.order();
        let p = c.point(k);
        // Half the minimum spacing, so 0.45 of it keeps x̃ inside the cell.
        let half = c.points().iter().map(|q| (q.re - p.re).abs()).filter(|&d| d > 0.0).fold(f64::INFINITY, f64::min) / 2.0;
        let x = [p.re + dre * half, p.im + dim * half];
        let ladder = geometric_schedule(1.0, 0.01, 40).unwrap();
        let mut last = f64::INFINITY;
        // Above this the mean still swings in from the alphabet centroid and
        // can overshoot inner points (see `inner_point_overshoot`).
        for &sigma in ladder.sigmas().iter().filter(|&&s| s <= half / 2.0) {
            let m = conditional_mean(&x, sigma, &plan).unwrap();
            let d = ((m[0] - p.re).powi(2) + (m[1] - p.im).powi(2)).sqrt();
            prop_assert!(d <= last + 1e-12, "sigma {sigma}: {d} > {last}");
            last = d;
        }
    }

    #[test]
    fn step_sizes_nonnegative_and_continuous(
        sigma_l in 1e-3f64..2.0,
        s_j in 0.0f64..5.0,
        sigma0 in 0.0f64..1.0,
    ) {
        let l = step_size(sigma_l, 0.01, s_j, sigma0, 3e-5);
        prop_assert!(l >= 0.0 && l.is_finite());
        if s_j > 0.0 {
            // On the crossover both branches vanish.
            let at = step_size(sigma_l, 0.01, sigma0 / sigma_l, sigma0, 3e-5);
            prop_assert!(at < 1e-15);
        }
    }

    #[test]
    fn score_cases_partition(s_j in 0.0f64..5.0, sigma_l in 1e-3f64..2.0, sigma0 in 0.0f64..1.0) {
        let case = ScoreCase::classify(s_j, sigma_l, sigma0);
        let joint = s_j > 0.0 && sigma0 >= sigma_l * s_j;
        let lik_only = s_j > 0.0 && sigma0 < sigma_l * s_j;
        let prior_only = s_j == 0.0;
        prop_assert_eq!([joint, lik_only, prior_only].iter().filter(|&&b| b).count(), 1);
        prop_assert_eq!(case == ScoreCase::Joint, joint);
        prop_assert_eq!(case == ScoreCase::LikelihoodOnly, lik_only);
        prop_assert_eq!(case == ScoreCase::PriorOnly, prior_only);
    }

    #[test]
    fn mmse_equals_zf_noiseless(seed in any::<u64>()) {
        let plan = plan_of(16, 4);
        let (sys, _) = random_system(seed, 8, &plan, f64::INFINITY);
        prop_assert_eq!(sys.sigma0(), 0.0);
        let zf = zf_estimate(&sys).unwrap();
        let mmse = mmse_estimate(&sys).unwrap();
        prop_assert!((zf - mmse).amax() < 1e-10);
    }
}

#[test]
fn inner_point_overshoot() {
    // Inner 16-QAM point: the distance to it dips near σ ≈ 0.49, rises
    // again, and only then converges.
    let plan = plan_of(16, 1);
    let p = plan.user(0).point(9);
    let x = [p.re, p.im - 0.2 * 10f64.sqrt().recip()];
    let dist = |sigma: f64| {
        let m = conditional_mean(&x, sigma, &plan).unwrap();
        ((m[0] - p.re).powi(2) + (m[1] - p.im).powi(2)).sqrt()
    };
    assert!(dist(0.49) < dist(0.35));
    assert!(dist(0.35) > dist(0.1));
}

#[test]
fn posterior_score_case_oracle() {
    let plan = ModulationPlan::from_orders(&[4, 16, 16, 64]).unwrap();
    let (sys, _) = random_system(11, 6, &plan, 5.0);
    let s = sys.singular_values().clone();
    // A level between the extreme singular values puts entries on both sides.
    let sigma_l = sys.sigma0() / s[3];
    let mut rng = ChaCha8Rng::seed_from_u64(2);
    let chi = DVector::from_fn(8, |_, _| rand::Rng::random_range(&mut rng, -1.0..1.0));
    let got = posterior_score(&chi, &sys, sigma_l, &plan).unwrap();

    let x = sys.v() * &chi;
    let prior = sys.v().transpose() * DVector::from_vec(prior_score(x.as_slice(), sigma_l, &plan).unwrap().as_slice().to_vec());
    let mut seen = [false; 2];
    for j in 0..8 {
        let var = (sys.sigma0().powi(2) - sigma_l.powi(2) * s[j].powi(2)).abs();
        let lik = if var < 1e-12 { 0.0 } else { s[j] * (sys.eta()[j] - s[j] * chi[j]) / var };
        let want = if sys.sigma0() >= sigma_l * s[j] {
            seen[0] = true;
            lik + prior[j]
        } else {
            seen[1] = true;
            lik
        };
        assert!((got[j] - want).abs() <= 1e-12 * want.abs().max(1.0), "{j}: {} vs {want}", got[j]);
    }
    assert_eq!(seen, [true, true]);
}

#[test]
fn posterior_score_limits() {
    let plan = plan_of(4, 2);
    let (sys, _) = random_system(5, 4, &plan, 10.0);
    let chi = DVector::from_element(4, 0.2);
    // σ_l so large that every entry is likelihood-only.
    let huge = posterior_score(&chi, &sys, 1e6, &plan).unwrap();
    assert_eq!(huge, likelihood_score(&chi, &sys, 1e6).unwrap());

    // Zero channel: every entry is prior-only.
    let zero = RealSystem::new(DMatrix::zeros(4, 4), DVector::zeros(4), 0.1).unwrap();
    let g = posterior_score(&chi, &zero, 0.5, &plan).unwrap();
    let x = zero.v() * &chi;
    let want = zero.v().transpose() * prior_score(x.as_slice(), 0.5, &plan).unwrap();
    assert!((g - want).amax() < 1e-14);
}

#[derive(Default)]
struct Trace {
    chi: Vec<Vec<f64>>,
    score: Vec<Vec<f64>>,
    step: Vec<Vec<f64>>,
    noise: Vec<Vec<f64>>,
    sigma_level: Vec<usize>,
}

fn traced(sys: &RealSystem, plan: &ModulationPlan, config: &LangevinConfig, seed: u64) -> Trace {
    let mut t = Trace::default();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut obs = |r: &StepRecord<'_>| {
        t.chi.push(r.chi.to_vec());
        t.score.push(r.score.to_vec());
        t.step.push(r.step.to_vec());
        t.noise.push(r.noise.to_vec());
        t.sigma_level.push(r.level);
    };
    run_trajectory_observed(sys, config, plan, &mut rng, &mut obs).unwrap();
    t
}

#[test]
fn temperature_replay_contract() {
    let plan = plan_of(16, 4);
    let (sys, _) = random_system(21, 8, &plan, 12.0);
    let base = LangevinConfig {
        levels: 6,
        iterations: 15,
        ..Default::default()
    };
    let schedule = base.schedule().unwrap();
    let unit = traced(&sys, &plan, &LangevinConfig { tau: 1.0, ..base.clone() }, 9);
    for tau in [0.0, 0.25, 0.5, 2.0] {
        let t = traced(&sys, &plan, &LangevinConfig { tau, ..base.clone() }, 9);
        assert_eq!(t.chi[0], unit.chi[0], "same initial draw");
        let mut chi = DVector::from_vec(t.chi[0].clone());
        for k in 0..t.chi.len() {
            let sigma_l = schedule.sigmas()[t.sigma_level[k]];
            // Independent score evaluation at the replayed iterate.
            let score = posterior_score(&chi, &sys, sigma_l, &plan).unwrap();
            for j in 0..8 {
                let scaled = tau.sqrt() * unit.noise[k][j];
                assert!((t.noise[k][j] - scaled).abs() <= 1e-12 * scaled.abs().max(1e-300), "noise {k},{j}");
                chi[j] += t.step[k][j] * score[j] + scaled;
            }
            if k + 1 < t.chi.len() {
                let next = DVector::from_vec(t.chi[k + 1].clone());
                assert!((&chi - &next).amax() < 1e-8 * next.amax().max(1.0), "tau {tau}, step {k}");
                // Replays from the recorded state so rounding does not compound.
                chi = next;
            }
        }
    }
}

#[test]
fn ml_residual_dominance() {
    let langevin = DetectorKind::Langevin(LangevinConfig {
        levels: 8,
        iterations: 20,
        trajectories: 3,
        ..Default::default()
    });
    let others = [DetectorKind::Zf, DetectorKind::Mmse, langevin];
    for i in 0..200u64 {
        let plan = if i % 4 == 0 {
            ModulationPlan::from_orders(&[16, 16, 4, 4]).unwrap()
        } else {
            plan_of(4, 4)
        };
        let (sys, _) = random_system(1000 + i, 6, &plan, 2.0 + (i % 10) as f64 * 2.0);
        let ml = ml_exhaustive(&sys, &plan).unwrap();
        let r_ml = sys.residual(ml.real());
        let mut rng = ChaCha8Rng::seed_from_u64(i);
        for d in &others {
            let est = d.detect(&sys, &plan, &mut rng).unwrap();
            assert!(r_ml <= sys.residual(est.real()), "instance {i}, {}", d.name());
        }
        if plan.product_size() == 256 {
            // Brute-force enumeration oracle.
            let mut best = f64::INFINITY;
            for code in 0..256usize {
                let idx: Vec<usize> = (0..4).map(|u| (code >> (2 * (3 - u))) & 3).collect();
                let cand = plan.symbols_from_indices(idx).unwrap();
                best = best.min(sys.residual(cand.real()));
            }
            assert_eq!(r_ml, best, "instance {i}");
        }
    }
}
