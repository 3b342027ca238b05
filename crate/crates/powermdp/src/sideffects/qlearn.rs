//! Tabular ε-greedy Q-learning over a finite MDP.

use crate::error::{Error, Result};
use crate::mdp::{Policy, RewardFunction, RewardlessMdp};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

#[derive(Clone, Debug, PartialEq)]
pub struct QLearningConfig {
    pub episodes: usize,
    pub horizon: usize,
    pub epsilon: f64,
    pub alpha: f64,
    /// Initial action value; `None` uses the optimistic bound `max r / (1 − γ)`.
    pub q_init: Option<f64>,
}

impl Default for QLearningConfig {
    fn default() -> Self {
        QLearningConfig { episodes: 5000, horizon: 20, epsilon: 0.1, alpha: 1.0, q_init: None }
    }
}

fn sample_next(mdp: &RewardlessMdp, s: usize, a: usize, rng: &mut ChaCha8Rng) -> usize {
    let row = mdp.row(s, a);
    let u: f64 = rng.random();
    let mut acc = 0.0;
    for (t, p) in row.iter().enumerate() {
        acc += p;
        if u < acc {
            return t;
        }
    }
    row.iter().rposition(|&p| p > 0.0).unwrap_or(s)
}

fn greedy(q: &[f64]) -> usize {
    let mut best = 0;
    for a in 1..q.len() {
        if q[a] > q[best] {
            best = a;
        }
    }
    best
}

/// Learn `Q` from episodes that all start at `start`; the returned table is indexed `[s][a]`.
pub fn q_learning(
    mdp: &RewardlessMdp,
    start: usize,
    r: &RewardFunction,
    gamma: f64,
    cfg: &QLearningConfig,
    seed: u64,
) -> Result<Vec<Vec<f64>>> {
    r.check(mdp)?;
    if start >= mdp.n_states() {
        return Err(Error::input(format!("start state {start} out of range")));
    }
    if !(0.0..1.0).contains(&gamma) {
        return Err(Error::domain(format!("discount {gamma} outside [0, 1)")));
    }
    if !(0.0..=1.0).contains(&cfg.epsilon) || !(cfg.alpha > 0.0 && cfg.alpha <= 1.0) {
        return Err(Error::input("need ε in [0, 1] and learning rate in (0, 1]"));
    }
    let (ns, na) = (mdp.n_states(), mdp.n_actions());
    let init = cfg.q_init.unwrap_or_else(|| {
        let top = (0..ns)
            .flat_map(|s| (0..na).map(move |a| (s, a)))
            .map(|(s, a)| r.at(s, a))
            .fold(f64::NEG_INFINITY, f64::max);
        top / (1.0 - gamma)
    });
    let mut q = vec![vec![init; na]; ns];
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    for _ in 0..cfg.episodes {
        let mut s = start;
        for _ in 0..cfg.horizon {
            let a = if rng.random::<f64>() < cfg.epsilon { rng.random_range(0..na) } else { greedy(&q[s]) };
            let next = sample_next(mdp, s, a, &mut rng);
            let target = r.at(s, a) + gamma * q[next].iter().copied().fold(f64::NEG_INFINITY, f64::max);
            q[s][a] += cfg.alpha * (target - q[s][a]);
            s = next;
        }
    }
    Ok(q)
}

/// Greedy policy of a Q table, lowest action index on ties.
pub fn greedy_policy(q: &[Vec<f64>]) -> Policy {
    Policy(q.iter().map(|row| greedy(row)).collect())
}

/// States visited by following `pi` for `steps` steps from `start` (deterministic transitions).
pub fn greedy_rollout(mdp: &RewardlessMdp, pi: &Policy, start: usize, steps: usize) -> Vec<usize> {
    let mut out = vec![start];
    let mut s = start;
    for _ in 0..steps {
        let row = mdp.row(s, pi.0[s]);
        s = (0..row.len()).max_by(|&x, &y| row[x].total_cmp(&row[y])).unwrap_or(s);
        out.push(s);
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::mdp::optimal_q;

    #[test]
    fn chain_converges_to_optimal_q() {
        let m = RewardlessMdp::deterministic(
            vec!["a".into(), "b".into(), "c".into()],
            vec!["back".into(), "fwd".into()],
            &[vec![0, 1], vec![0, 2], vec![1, 2]],
        )
        .unwrap();
        let r = RewardFunction::state(vec![0.0, 0.2, 1.0]);
        let cfg = QLearningConfig { episodes: 500, q_init: Some(0.0), ..QLearningConfig::default() };
        let q = q_learning(&m, 0, &r, 0.5, &cfg, 3).unwrap();
        let star = optimal_q(&m, &r, 0.5).unwrap();
        for s in 0..3 {
            for a in 0..2 {
                assert!((q[s][a] - star[s][a]).abs() < 1e-9, "({s},{a}): {} vs {}", q[s][a], star[s][a]);
            }
        }
    }

    #[test]
    fn zero_reward_stays_zero() {
        let m = RewardlessMdp::deterministic(vec!["a".into(), "b".into()], vec!["x".into(), "y".into()], &[vec![0, 1], vec![1, 0]])
            .unwrap();
        let q = q_learning(&m, 0, &RewardFunction::state(vec![0.0; 2]), 0.9, &QLearningConfig::default(), 0).unwrap();
        assert!(q.iter().flatten().all(|&x| x == 0.0));
    }
}
