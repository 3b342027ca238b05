//! ε-greedy training on a bandit with deterministic arm payoffs.

use super::{tally_tendency, TendencyCheck};
use crate::error::{Error, Result};
use crate::power::estimate::{sum_samples, EstimateWithCI, Sampling};
use crate::power::orbit::OrbitMode;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

#[derive(Clone, Debug, PartialEq)]
pub struct BanditConfig {
    pub utilities: Vec<f64>,
    pub epsilon: f64,
    pub trials: usize,
}

impl BanditConfig {
    pub fn new(utilities: Vec<f64>, epsilon: f64, trials: usize) -> Result<Self> {
        let c = BanditConfig { utilities, epsilon, trials };
        c.validate()?;
        Ok(c)
    }

    pub fn validate(&self) -> Result<()> {
        if self.utilities.len() < 2 || self.utilities.iter().any(|u| !u.is_finite()) {
            return Err(Error::input("a bandit needs at least two arms with finite utilities"));
        }
        if !(self.epsilon > 0.0 && self.epsilon < 1.0) {
            return Err(Error::input(format!("exploration rate must lie in (0, 1), got {}", self.epsilon)));
        }
        Ok(())
    }

    pub fn arms(&self) -> usize {
        self.utilities.len()
    }
}

fn argmax_set(q: &[f64]) -> Vec<usize> {
    let m = q.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    (0..q.len()).filter(|&i| q[i] == m).collect()
}

/// One training run. Writes each arm's probability under the final greedy policy
/// (uniform over tied estimates) into `out`.
fn train_once(cfg: &BanditConfig, rng: &mut ChaCha8Rng, out: &mut [f64]) {
    let k = cfg.arms();
    let mut q = vec![0.0; k];
    for _ in 0..cfg.trials {
        let best = argmax_set(&q);
        let greedy = best[rng.random_range(0..best.len())];
        let arm = if rng.random::<f64>() < cfg.epsilon {
            let other = rng.random_range(0..k - 1);
            if other >= greedy {
                other + 1
            } else {
                other
            }
        } else {
            greedy
        };
        // learning rate 1 on a deterministic payoff
        q[arm] = cfg.utilities[arm];
    }
    let best = argmax_set(&q);
    for &i in &best {
        out[i] = 1.0 / best.len() as f64;
    }
}

/// Probability that each arm is chosen by the policy learned after `trials` steps.
pub fn bandit_train_prob(cfg: &BanditConfig, sampling: &Sampling) -> Result<Vec<EstimateWithCI>> {
    cfg.validate()?;
    sampling.validate()?;
    let sums = sum_samples(sampling.samples, cfg.arms(), |i, out| {
        let mut rng = ChaCha8Rng::seed_from_u64(sampling.seed);
        rng.set_stream(i);
        train_once(cfg, &mut rng, out);
        Ok(())
    })?;
    Ok(sums
        .into_iter()
        .map(|s| EstimateWithCI::from_mean(s / sampling.samples as f64, sampling, 1.0))
        .collect())
}

/// Orbit tally for `A = {first arm}` against `B = {other arms}`; every orbit element
/// reuses the same run seeds.
pub fn bandit_orbit_check(cfg: &BanditConfig, n: usize, mode: OrbitMode, sampling: &Sampling) -> Result<TendencyCheck> {
    cfg.validate()?;
    tally_tendency(&cfg.utilities, n, mode, |u| {
        let c = BanditConfig { utilities: u.to_vec(), ..cfg.clone() };
        let p = bandit_train_prob(&c, sampling)?;
        let fa = p[0].estimate;
        let fb: f64 = p[1..].iter().map(|e| e.estimate).sum();
        Ok((fa, fb))
    })
}
