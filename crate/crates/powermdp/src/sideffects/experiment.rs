//! Vanilla-versus-AUP comparison on the side-effect gridworlds.

use super::aup::{build_aup_reward, AupConfig};
use super::gridworld::{build_gridworld, GridworldEnv};
use super::qlearn::{greedy_policy, greedy_rollout, q_learning, QLearningConfig};
use crate::error::{Error, Result};
use crate::mdp::{dot, optimal_solution, optimal_value, state_distributions, unit, Policy, RewardFunction};
use crate::power::estimate::sum_samples;
use serde::Serialize;

#[derive(Clone, Debug, PartialEq)]
pub struct ExperimentConfig {
    pub gamma: f64,
    pub lambda: f64,
    pub aux_count: usize,
    pub qlearning: QLearningConfig,
    /// Step at which the true reward is revealed when scoring.
    pub t_correct: usize,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        ExperimentConfig {
            gamma: 0.996,
            lambda: 0.01,
            aux_count: 20,
            qlearning: QLearningConfig::default(),
            t_correct: 10,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum Condition {
    Vanilla,
    Aup,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
pub enum ScoreDist {
    #[serde(rename = "rand")]
    Rand,
    #[serde(rename = "true")]
    True,
    #[serde(rename = "true-inv")]
    TrueInv,
}

/// One CSV row. `residual` is this condition's score minus the vanilla score.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct ExperimentRow {
    pub seed: u64,
    pub condition: Condition,
    pub dist: ScoreDist,
    pub score: f64,
    pub residual: f64,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct RolloutSummary {
    pub reached_goal: bool,
    pub side_effect: bool,
}

#[derive(Clone, Debug, PartialEq)]
pub struct SeedOutcome {
    pub seed: u64,
    pub vanilla: RolloutSummary,
    pub aup: RolloutSummary,
    pub aup_policy: Policy,
    pub rows: Vec<ExperimentRow>,
}

#[derive(Clone, Debug, PartialEq)]
pub struct ExperimentReport {
    pub env: String,
    pub vanilla_policy: Policy,
    pub seeds: Vec<SeedOutcome>,
}

impl ExperimentReport {
    pub fn rows(&self) -> impl Iterator<Item = &ExperimentRow> {
        self.seeds.iter().flat_map(|s| s.rows.iter())
    }

    /// Mean AUP residual for one scoring distribution.
    pub fn mean_residual(&self, dist: ScoreDist) -> f64 {
        let xs: Vec<f64> = self
            .rows()
            .filter(|r| r.condition == Condition::Aup && r.dist == dist)
            .map(|r| r.residual)
            .collect();
        xs.iter().sum::<f64>() / xs.len().max(1) as f64
    }
}

pub fn summarize_rollout(env: &GridworldEnv, pi: &Policy) -> RolloutSummary {
    let path = greedy_rollout(&env.mdp, pi, env.start, env.horizon);
    RolloutSummary {
        reached_goal: path.iter().any(|&s| env.at_goal[s]),
        side_effect: path.iter().any(|&s| env.side_effect[s]),
    }
}

/// Delayed-specification scores of several policies under one finitely supported distribution.
fn score_policies(
    env: &GridworldEnv,
    policies: &[&Policy],
    atoms: &[(f64, Vec<f64>)],
    gamma: f64,
    t: usize,
) -> Result<Vec<f64>> {
    let ns = env.n_states();
    let dists: Vec<Vec<Vec<f64>>> =
        policies.iter().map(|pi| state_distributions(&env.mdp, pi, &unit(ns, env.start), t)).collect();
    sum_samples(atoms.len(), policies.len(), |i, out| {
        let (w, r) = &atoms[i as usize];
        let v = optimal_value(&env.mdp, &RewardFunction::state(r.clone()), gamma)?;
        for (o, d) in out.iter_mut().zip(&dists) {
            let mut g = 1.0;
            let mut total = 0.0;
            for di in &d[..t] {
                total += g * dot(di, r);
                g *= gamma;
            }
            *o = w * (total + g * dot(&d[t], &v));
        }
        Ok(())
    })
}

pub fn run_experiment(env_name: &str, seeds: &[u64], cfg: &ExperimentConfig) -> Result<ExperimentReport> {
    if seeds.is_empty() {
        return Err(Error::input("need at least one seed"));
    }
    let env = build_gridworld(env_name)?;
    let r_env = RewardFunction::state(env.env_reward(cfg.gamma));
    let vanilla_policy = optimal_solution(&env.mdp, &r_env, cfg.gamma, None)?.policy;
    let vanilla = summarize_rollout(&env, &vanilla_policy);
    let mut out = Vec::with_capacity(seeds.len());
    for &seed in seeds {
        let aup_cfg = AupConfig::with_uniform_aux(env.n_states(), cfg.lambda, cfg.aux_count, env.noop, cfg.gamma, seed);
        let r_aup = build_aup_reward(&env.mdp, &r_env, &aup_cfg)?;
        let q = q_learning(&env.mdp, env.start, &r_aup, cfg.gamma, &cfg.qlearning, seed)?;
        let aup_policy = greedy_policy(&q);
        let aup = summarize_rollout(&env, &aup_policy);
        let truth = env.ground_truth(seed);
        let mut rows = Vec::with_capacity(6);
        for (dist, spec) in [(ScoreDist::Rand, &truth.rand), (ScoreDist::True, &truth.truth), (ScoreDist::TrueInv, &truth.truth_inv)] {
            let atoms = spec.finite_support().ok_or_else(|| Error::input("scoring distributions must be finite"))?;
            let s = score_policies(&env, &[&vanilla_policy, &aup_policy], &atoms, cfg.gamma, cfg.t_correct)?;
            rows.push(ExperimentRow { seed, condition: Condition::Vanilla, dist, score: s[0], residual: 0.0 });
            rows.push(ExperimentRow { seed, condition: Condition::Aup, dist, score: s[1], residual: s[1] - s[0] });
        }
        out.push(SeedOutcome { seed, vanilla, aup, aup_policy, rows });
    }
    Ok(ExperimentReport { env: env.name.clone(), vanilla_policy, seeds: out })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::sideffects::delayed::delayed_spec_score;
    use crate::power::Sampling;

    #[test]
    fn shared_scoring_matches_single_policy_scoring() {
        let env = build_gridworld("damage").unwrap();
        let pi = Policy::constant(&env.mdp, 3);
        let truth = env.ground_truth(0);
        let atoms = truth.truth.finite_support().unwrap();
        let s = score_policies(&env, &[&pi], &atoms, 0.9, 4).unwrap();
        let e = delayed_spec_score(&env.mdp, &pi, env.start, &truth.truth, 0.9, 4, &Sampling::new(1, 0)).unwrap();
        assert!((s[0] - e.estimate).abs() < 1e-9);
    }
}
