use rand::Rng;
use serde::{Deserialize, Serialize};

use super::{seeded_rng, trial_seed};
use crate::bitcore::BitString;
use crate::error::{Error, Result};

/// A fixed population of uniformly random templates with i.i.d. capture
/// noise.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SyntheticUserModel {
    pub n: usize,
    pub population: u64,
    pub noise_rate: f64,
    pub seed: u64,
}

impl SyntheticUserModel {
    pub fn new(n: usize, population: u64, noise_rate: f64, seed: u64) -> Result<Self> {
        if n == 0 {
            return Err(Error::InvalidParams("template length must be at least 1".into()));
        }
        if population < 2 {
            return Err(Error::InvalidParams("population needs at least two users".into()));
        }
        if !(0.0..=0.5).contains(&noise_rate) {
            return Err(Error::InvalidParams(format!(
                "noise rate must lie in [0, 0.5], got {noise_rate}"
            )));
        }
        Ok(SyntheticUserModel {
            n,
            population,
            noise_rate,
            seed,
        })
    }

    /// Enrolled template of user `u`; a pure function of `(seed, u)`.
    pub fn template(&self, u: u64) -> BitString {
        BitString::random(self.n, &mut seeded_rng(trial_seed(self.seed, u)))
    }

    /// Fresh capture of user `u`: the template with each bit flipped with
    /// probability `noise_rate`.
    pub fn capture<R: Rng + ?Sized>(&self, u: u64, rng: &mut R) -> BitString {
        let mut x = self.template(u);
        if self.noise_rate > 0.0 {
            for i in 0..self.n {
                if rng.gen_bool(self.noise_rate) {
                    x.flip(i);
                }
            }
        }
        x
    }

    pub fn sample_user<R: Rng + ?Sized>(&self, rng: &mut R) -> u64 {
        rng.gen_range(0..self.population)
    }

    /// Two distinct users.
    pub fn sample_pair<R: Rng + ?Sized>(&self, rng: &mut R) -> (u64, u64) {
        let u = self.sample_user(rng);
        let step = rng.gen_range(1..self.population);
        let v = ((u as u128 + step as u128) % self.population as u128) as u64;
        (u, v)
    }
}
