//! Massive-MIMO symbol detection by annealed Langevin dynamics.
//!
//! The detector samples the posterior of the transmitted QAM symbols by
//! running noisy score ascent in the spectral domain of the channel, lowering
//! an artificial noise level from `σ₁` to `σ_L` as it goes. Classical
//! zero-forcing, MMSE and exhaustive maximum-likelihood detectors are
//! provided for comparison, along with a Monte-Carlo harness that measures
//! symbol error rates over paired channel realizations.
//!
//! ```
//! use langevin_mimo::{channel, constellation, langevin, rng::SeedTree, rng::Purpose};
//! use langevin_mimo::{ModulationPlan, Constellation, RealSystem, LangevinConfig};
//!
//! let tree = SeedTree::new(7);
//! let mut rng = tree.stream(0, 0, Purpose::Channel);
//! let plan = ModulationPlan::uniform(Constellation::qam(4).unwrap(), 4).unwrap();
//! let h = channel::rayleigh_channel(8, 4, &mut rng).unwrap();
//! let x = constellation::sample_symbols(&plan, &mut rng);
//! let sigma0 = channel::sigma0_from_snr(channel::db_to_linear(20.0), 8, 4).unwrap();
//! let system = RealSystem::simulate(&h, &x, sigma0, &mut rng).unwrap();
//!
//! let config = LangevinConfig { levels: 10, iterations: 30, trajectories: 4, ..Default::default() };
//! let est = langevin::detect_with_system(&system, &config, &plan, &mut rng).unwrap();
//! assert_eq!(est.n_users(), 4);
//! ```

pub mod baselines;
pub mod channel;
pub mod constellation;
pub mod error;
pub mod harness;
pub mod langevin;
pub mod rng;

pub use baselines::DetectorKind;
pub use channel::{ComplexChannel, RealSystem};
pub use constellation::{Constellation, ModulationPlan, SymbolVector};
pub use error::{Error, Result};
pub use harness::{ExperimentConfig, SweepResult, SweepRow};
pub use langevin::LangevinConfig;

// Compile and run the guide's snippets as doc-tests.
#[cfg(doctest)]
mod book {
    #[doc = include_str!("../../../book/src/introduction.md")]
    mod introduction {}
    #[doc = include_str!("../../../book/src/constellations.md")]
    mod constellations {}
    #[doc = include_str!("../../../book/src/channels.md")]
    mod channels {}
    #[doc = include_str!("../../../book/src/langevin.md")]
    mod langevin {}
    #[doc = include_str!("../../../book/src/baselines.md")]
    mod baselines {}
    #[doc = include_str!("../../../book/src/experiments.md")]
    mod experiments {}
    #[doc = include_str!("../../../book/src/reproducibility.md")]
    mod reproducibility {}
}
