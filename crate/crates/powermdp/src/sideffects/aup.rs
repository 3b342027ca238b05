//! Attainable-utility-preservation rewards.

use crate::error::{Error, Result};
use crate::mdp::{optimal_q, RewardFunction, RewardlessMdp};
use crate::power::RewardDistributionSpec;

#[derive(Clone, Debug, PartialEq)]
pub struct AupConfig {
    pub lambda: f64,
    /// State-based auxiliary rewards.
    pub aux: Vec<Vec<f64>>,
    pub noop: usize,
    pub gamma: f64,
}

impl AupConfig {
    /// `count` auxiliary rewards drawn uniformly from `[0, 1]^S`, one sample stream each.
    pub fn with_uniform_aux(n_states: usize, lambda: f64, count: usize, noop: usize, gamma: f64, seed: u64) -> Self {
        let spec = RewardDistributionSpec::uniform();
        let aux = (0..count as u64).map(|i| spec.sample(n_states, seed, i)).collect();
        AupConfig { lambda, aux, noop, gamma }
    }

    pub fn validate(&self, mdp: &RewardlessMdp) -> Result<()> {
        if !(self.lambda.is_finite() && self.lambda >= 0.0) {
            return Err(Error::input(format!("penalty coefficient must be finite and non-negative, got {}", self.lambda)));
        }
        if self.lambda > 0.0 && self.aux.is_empty() {
            return Err(Error::input("a positive penalty needs at least one auxiliary reward"));
        }
        if self.noop >= mdp.n_actions() {
            return Err(Error::input(format!("no-op action index {} out of range", self.noop)));
        }
        if self.aux.iter().any(|r| r.len() != mdp.n_states()) {
            return Err(Error::input("auxiliary rewards must have one entry per state"));
        }
        if !(0.0..1.0).contains(&self.gamma) {
            return Err(Error::domain(format!("AUP discount must lie in [0, 1), got {}", self.gamma)));
        }
        Ok(())
    }
}

/// Optimal action values of every auxiliary reward.
pub fn auxiliary_q(mdp: &RewardlessMdp, cfg: &AupConfig) -> Result<Vec<Vec<Vec<f64>>>> {
    cfg.aux.iter().map(|r| optimal_q(mdp, &RewardFunction::state(r.clone()), cfg.gamma)).collect()
}

/// `penalty[s][a] = (λ/|ℛ|) Σ_i |Q_i(s, a) − Q_i(s, ∅)|`.
pub fn aup_penalty(mdp: &RewardlessMdp, cfg: &AupConfig) -> Result<Vec<Vec<f64>>> {
    cfg.validate(mdp)?;
    let (ns, na) = (mdp.n_states(), mdp.n_actions());
    if cfg.aux.is_empty() {
        return Ok(vec![vec![0.0; na]; ns]);
    }
    let qs = auxiliary_q(mdp, cfg)?;
    let scale = cfg.lambda / qs.len() as f64;
    Ok((0..ns)
        .map(|s| {
            (0..na)
                .map(|a| scale * qs.iter().map(|q| (q[s][a] - q[s][cfg.noop]).abs()).sum::<f64>())
                .collect()
        })
        .collect())
}

pub fn build_aup_reward(mdp: &RewardlessMdp, r_env: &RewardFunction, cfg: &AupConfig) -> Result<RewardFunction> {
    r_env.check(mdp)?;
    let pen = aup_penalty(mdp, cfg)?;
    RewardFunction::state_action(
        pen.iter()
            .enumerate()
            .map(|(s, row)| row.iter().enumerate().map(|(a, p)| r_env.at(s, a) - p).collect())
            .collect(),
    )
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    fn line() -> RewardlessMdp {
        // actions: left, right, stay
        RewardlessMdp::deterministic(
            vec!["a".into(), "b".into(), "c".into()],
            vec!["left".into(), "right".into(), "stay".into()],
            &[vec![0, 1, 0], vec![0, 2, 1], vec![1, 2, 2]],
        )
        .unwrap()
    }

    #[test]
    fn zero_lambda_keeps_reward() {
        let m = line();
        let cfg = AupConfig::with_uniform_aux(3, 0.0, 4, 2, 0.9, 1);
        let env = RewardFunction::state(vec![0.0, 0.5, 1.0]);
        let r = build_aup_reward(&m, &env, &cfg).unwrap();
        for s in 0..3 {
            for a in 0..3 {
                assert_eq!(r.at(s, a), env.at(s, a));
            }
        }
    }

    #[test]
    fn penalty_nonnegative_and_zero_at_noop() {
        let m = line();
        let cfg = AupConfig::with_uniform_aux(3, 0.3, 5, 2, 0.9, 4);
        let pen = aup_penalty(&m, &cfg).unwrap();
        for row in &pen {
            assert_eq!(row[2], 0.0);
            assert!(row.iter().all(|&p| p >= 0.0));
        }
    }

    #[test]
    fn affine_aux_scales_penalty() {
        let m = line();
        let cfg = AupConfig::with_uniform_aux(3, 0.3, 5, 2, 0.9, 4);
        let (c, b) = (2.5, -0.7);
        let moved = AupConfig {
            aux: cfg.aux.iter().map(|r| r.iter().map(|x| c * x + b).collect()).collect(),
            ..cfg.clone()
        };
        let p0 = aup_penalty(&m, &cfg).unwrap();
        let p1 = aup_penalty(&m, &moved).unwrap();
        for (r0, r1) in p0.iter().zip(&p1) {
            for (x, y) in r0.iter().zip(r1) {
                assert_abs_diff_eq!(c * x, y, epsilon = 1e-9);
            }
        }
    }

    #[test]
    fn bad_noop_rejected() {
        let m = line();
        let cfg = AupConfig { lambda: 0.1, aux: vec![vec![0.0; 3]], noop: 3, gamma: 0.9 };
        assert!(matches!(aup_penalty(&m, &cfg), Err(Error::Input(_))));
    }
}
