//! Seeded Monte-Carlo harness: synthetic users, attack-game estimators,
//! timing and report emission.
//!
//! Every trial draws from its own generator, seeded by [`trial_seed`], so
//! results do not depend on thread count or scheduling.

pub mod acceptance;
mod estimators;
mod model;
mod report;
mod timing;

use rand::{RngCore, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

pub use estimators::{estimate_fmr, estimate_rate_auth, estimate_rate_link, estimate_rate_rec};
pub use model::SyntheticUserModel;
pub use report::{emit_report, write_report, ExperimentReport, Metric, ReportFormat, TimingStat, TrialRow, CSV_HEADER};
pub use timing::{run_timing_bench, TIMED_OPERATIONS};

use crate::bioencoding::PublicParams;
use crate::cryptanalysis::DEFAULT_BUDGET;
use crate::error::{Error, Result};
use crate::vault::FakePolicy;

/// Environment variable capping the worker thread count.
pub const THREADS_ENV: &str = "CBV_THREADS";

/// Seed of substream `index` under master seed `seed`.
pub fn trial_seed(seed: u64, index: u64) -> u64 {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(index);
    rng.next_u64()
}

/// Generator for a seed produced by [`trial_seed`].
pub fn seeded_rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

/// Sizes the global thread pool from `CBV_THREADS` when set. Has no effect
/// once the pool exists.
pub fn configure_threads() -> Result<()> {
    let Ok(raw) = std::env::var(THREADS_ENV) else {
        return Ok(());
    };
    let threads: usize = raw
        .trim()
        .parse()
        .map_err(|_| Error::InvalidParams(format!("{THREADS_ENV} must be a positive integer, got {raw:?}")))?;
    if threads == 0 {
        return Err(Error::InvalidParams(format!("{THREADS_ENV} must be at least 1")));
    }
    let _ = rayon::ThreadPoolBuilder::new().num_threads(threads).build_global();
    Ok(())
}

/// Settings shared by the vault-level experiments.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrialConfig {
    pub params: PublicParams,
    pub key_len: usize,
    pub fake_policy: FakePolicy,
    pub trials: usize,
    /// Digest evaluations allowed beyond the first pass.
    pub budget: u64,
    pub seed: u64,
    /// Per-bit flip rate of the capture presented at release.
    pub noise_rate: f64,
    /// Record wall-clock times. Off keeps reports bit-for-bit reproducible.
    pub timing: bool,
}

impl TrialConfig {
    pub fn new(params: PublicParams, key_len: usize, fake_policy: FakePolicy, trials: usize, seed: u64) -> Self {
        TrialConfig {
            params,
            key_len,
            fake_policy,
            trials,
            budget: DEFAULT_BUDGET,
            seed,
            noise_rate: 0.0,
            timing: false,
        }
    }

    pub fn validate(&self) -> Result<()> {
        self.params.geometry.validate(false)?;
        if self.trials == 0 {
            return Err(Error::InvalidParams("trials must be at least 1".into()));
        }
        if self.key_len == 0 {
            return Err(Error::InvalidParams("key length must be at least 1".into()));
        }
        if !(0.0..=0.5).contains(&self.noise_rate) {
            return Err(Error::InvalidParams(format!(
                "noise rate must lie in [0, 0.5], got {}",
                self.noise_rate
            )));
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn substreams_are_distinct_and_stable() {
        assert_eq!(trial_seed(42, 0), trial_seed(42, 0));
        assert_ne!(trial_seed(42, 0), trial_seed(42, 1));
        assert_ne!(trial_seed(42, 0), trial_seed(43, 0));
    }

    #[test]
    fn config_validation() {
        let params = PublicParams::with_default_tau(crate::Geometry::new(32, 3, 5).unwrap());
        let mut cfg = TrialConfig::new(params, 16, FakePolicy::SharedRandom, 1, 0);
        assert!(cfg.validate().is_ok());
        cfg.trials = 0;
        assert!(cfg.validate().is_err());
        cfg.trials = 1;
        cfg.noise_rate = 0.6;
        assert!(cfg.validate().is_err());
    }
}
