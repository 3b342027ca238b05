#![allow(dead_code)]

use powermdp::RewardlessMdp;
use rand::Rng;
use rand_chacha::ChaCha8Rng;

pub fn names(prefix: &str, n: usize) -> Vec<String> {
    (0..n).map(|i| format!("{prefix}{i}")).collect()
}

/// Random MDP with `1..=max_states` states and `1..=max_actions` actions.
/// Deterministic rows when `deterministic`, otherwise a mix of point masses and dense rows.
pub fn random_mdp(rng: &mut ChaCha8Rng, max_states: usize, max_actions: usize, deterministic: bool) -> RewardlessMdp {
    let ns = rng.random_range(1..=max_states);
    let na = rng.random_range(1..=max_actions);
    let trans = (0..ns)
        .map(|_| {
            (0..na)
                .map(|_| {
                    let mut row = vec![0.0; ns];
                    if deterministic || rng.random_bool(0.5) {
                        row[rng.random_range(0..ns)] = 1.0;
                    } else {
                        let w: Vec<f64> = (0..ns).map(|_| rng.random::<f64>() + 0.05).collect();
                        let total: f64 = w.iter().sum();
                        row.iter_mut().zip(&w).for_each(|(r, x)| *r = x / total);
                    }
                    row
                })
                .collect()
        })
        .collect();
    RewardlessMdp::new(names("s", ns), names("a", na), trans).expect("valid random MDP")
}

pub fn random_reward(rng: &mut ChaCha8Rng, n: usize) -> Vec<f64> {
    (0..n).map(|_| rng.random::<f64>()).collect()
}
