use super::laurent::blackwell_optimal;
use super::linalg::solve_discounted;
use super::{Policy, RewardFunction, RewardlessMdp};
use crate::error::{Error, Result};
use nalgebra::DMatrix;

/// Absolute tolerance on Q-gaps when deciding optimality.
pub const DEFAULT_TOL: f64 = 1e-9;
const MAX_PI_ITERS: usize = 100_000;

/// Column-stochastic `T^π`: column `s` is `T(s, π(s))`.
pub fn policy_matrix(mdp: &RewardlessMdp, pi: &Policy) -> Result<DMatrix<f64>> {
    pi.check(mdp)?;
    Ok(pi.rows(mdp).transpose())
}

fn check_discount(gamma: f64) -> Result<()> {
    if !(0.0..1.0).contains(&gamma) {
        return Err(Error::domain(format!(
            "discount {gamma} outside [0, 1); use the normalized limit operations for γ = 1"
        )));
    }
    Ok(())
}

pub(crate) fn policy_reward(mdp: &RewardlessMdp, pi: &Policy, r: &RewardFunction) -> Vec<f64> {
    (0..mdp.n_states()).map(|s| r.at(s, pi.0[s])).collect()
}

pub fn evaluate_policy(
    mdp: &RewardlessMdp,
    pi: &Policy,
    r: &RewardFunction,
    gamma: f64,
) -> Result<Vec<f64>> {
    check_discount(gamma)?;
    pi.check(mdp)?;
    r.check(mdp)?;
    solve_discounted(&pi.rows(mdp), gamma, &policy_reward(mdp, pi, r))
}

/// `Q(s, a) = r(s, a) + γ E[v(s')]`.
pub fn q_from_values(
    mdp: &RewardlessMdp,
    r: &RewardFunction,
    gamma: f64,
    v: &[f64],
) -> Vec<Vec<f64>> {
    (0..mdp.n_states())
        .map(|s| {
            (0..mdp.n_actions())
                .map(|a| r.at(s, a) + gamma * mdp.expect(s, a, v))
                .collect()
        })
        .collect()
}

#[derive(Clone, Debug)]
pub struct OptimalSolution {
    pub values: Vec<f64>,
    pub q: Vec<Vec<f64>>,
    pub policy: Policy,
}

/// Policy iteration with exact evaluation. `warm` seeds the first policy.
pub fn optimal_solution(
    mdp: &RewardlessMdp,
    r: &RewardFunction,
    gamma: f64,
    warm: Option<&Policy>,
) -> Result<OptimalSolution> {
    check_discount(gamma)?;
    r.check(mdp)?;
    let ns = mdp.n_states();
    let mut pi = match warm {
        Some(p) => {
            p.check(mdp)?;
            p.clone()
        }
        None => Policy(
            (0..ns)
                .map(|s| argmax((0..mdp.n_actions()).map(|a| r.at(s, a))))
                .collect(),
        ),
    };
    for _ in 0..MAX_PI_ITERS {
        let v = solve_discounted(&pi.rows(mdp), gamma, &policy_reward(mdp, &pi, r))?;
        let q = q_from_values(mdp, r, gamma, &v);
        let scale = 1.0 + v.iter().fold(0.0f64, |m, x| m.max(x.abs()));
        let mut changed = false;
        for s in 0..ns {
            let best = argmax(q[s].iter().copied());
            if q[s][best] > q[s][pi.0[s]] + 1e-12 * scale {
                pi.0[s] = best;
                changed = true;
            }
        }
        if !changed {
            return Ok(OptimalSolution { values: v, q, policy: pi });
        }
    }
    Err(Error::Numerical("policy iteration did not converge".into()))
}

pub fn optimal_value(mdp: &RewardlessMdp, r: &RewardFunction, gamma: f64) -> Result<Vec<f64>> {
    Ok(optimal_solution(mdp, r, gamma, None)?.values)
}

pub fn optimal_q(mdp: &RewardlessMdp, r: &RewardFunction, gamma: f64) -> Result<Vec<Vec<f64>>> {
    Ok(optimal_solution(mdp, r, gamma, None)?.q)
}

pub(crate) fn argmax(it: impl Iterator<Item = f64>) -> usize {
    let mut best = 0;
    let mut best_v = f64::NEG_INFINITY;
    for (i, v) in it.enumerate() {
        if v > best_v {
            best = i;
            best_v = v;
        }
    }
    best
}

/// Per-state sets of (near-)optimal actions.
#[derive(Clone, Debug, PartialEq)]
pub struct PolicySetReport {
    pub actions: Vec<Vec<usize>>,
    pub tol: f64,
    pub gamma: f64,
}

impl PolicySetReport {
    pub fn contains(&self, pi: &Policy) -> bool {
        pi.0.iter().zip(&self.actions).all(|(a, set)| set.contains(a))
    }

    pub fn is_subset_of(&self, other: &PolicySetReport) -> bool {
        self.actions
            .iter()
            .zip(&other.actions)
            .all(|(mine, theirs)| mine.iter().all(|a| theirs.contains(a)))
    }
}

fn within_of_max(values: &[f64], tol: f64) -> Vec<usize> {
    let best = values.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    (0..values.len()).filter(|&a| values[a] >= best - tol).collect()
}

pub fn optimal_actions(
    mdp: &RewardlessMdp,
    r: &RewardFunction,
    gamma: f64,
    tol: f64,
) -> Result<PolicySetReport> {
    if !(tol > 0.0) {
        return Err(Error::input("tolerance must be positive"));
    }
    let sol = optimal_solution(mdp, r, gamma, None)?;
    Ok(PolicySetReport {
        actions: sol.q.iter().map(|q| within_of_max(q, tol)).collect(),
        tol,
        gamma,
    })
}

/// `lim_{γ*→γ} (1-γ*) V*(·, γ*)` for γ in [0, 1].
pub fn normalized_optimal_values(
    mdp: &RewardlessMdp,
    r: &RewardFunction,
    gamma: f64,
) -> Result<Vec<f64>> {
    r.check(mdp)?;
    if gamma == 0.0 {
        Ok((0..mdp.n_states())
            .map(|s| (0..mdp.n_actions()).map(|a| r.at(s, a)).fold(f64::NEG_INFINITY, f64::max))
            .collect())
    } else if gamma == 1.0 {
        Ok(blackwell_optimal(mdp, r)?.gain().to_vec())
    } else if gamma > 0.0 && gamma < 1.0 {
        Ok(optimal_value(mdp, r, gamma)?.into_iter().map(|v| (1.0 - gamma) * v).collect())
    } else {
        Err(Error::domain(format!("discount {gamma} outside [0, 1]")))
    }
}

/// Normalized on-policy value, with the γ ∈ {0, 1} limits.
pub fn normalized_policy_values(
    mdp: &RewardlessMdp,
    pi: &Policy,
    r: &RewardFunction,
    gamma: f64,
) -> Result<Vec<f64>> {
    pi.check(mdp)?;
    r.check(mdp)?;
    let rp = policy_reward(mdp, pi, r);
    if gamma == 0.0 {
        Ok(rp)
    } else if gamma == 1.0 {
        let limits = super::laurent::ChainLimits::new(&pi.rows(mdp))?;
        Ok((limits.cesaro() * nalgebra::DVector::from_vec(rp)).as_slice().to_vec())
    } else if gamma > 0.0 && gamma < 1.0 {
        Ok(solve_discounted(&pi.rows(mdp), gamma, &rp)?
            .into_iter()
            .map(|v| (1.0 - gamma) * v)
            .collect())
    } else {
        Err(Error::domain(format!("discount {gamma} outside [0, 1]")))
    }
}

/// Actions whose expected normalized next-state optimal value is within `eps` of the best.
pub fn eps_optimal_actions(
    mdp: &RewardlessMdp,
    r: &RewardFunction,
    gamma: f64,
    eps: f64,
) -> Result<PolicySetReport> {
    if !(eps >= 0.0) {
        return Err(Error::input("ε must be non-negative"));
    }
    let v = normalized_optimal_values(mdp, r, gamma)?;
    let actions = (0..mdp.n_states())
        .map(|s| {
            let vals: Vec<f64> = (0..mdp.n_actions()).map(|a| mdp.expect(s, a, &v)).collect();
            within_of_max(&vals, eps + DEFAULT_TOL)
        })
        .collect();
    Ok(PolicySetReport { actions, tol: eps, gamma })
}

/// State reward whose optimal policies at `gamma_star` are those of `r` at `gamma`.
pub fn transfer_reward(
    mdp: &RewardlessMdp,
    r: &RewardFunction,
    gamma: f64,
    gamma_star: f64,
) -> Result<RewardFunction> {
    for g in [gamma, gamma_star] {
        if !(g > 0.0 && g < 1.0) {
            return Err(Error::domain(format!("transfer needs discounts in (0, 1), got {g}")));
        }
    }
    if r.as_state().is_none() {
        return Err(Error::input("transfer_reward needs a state-based reward"));
    }
    let v = optimal_value(mdp, r, gamma)?;
    Ok(RewardFunction::State(
        (0..mdp.n_states())
            .map(|s| {
                let best = (0..mdp.n_actions())
                    .map(|a| mdp.expect(s, a, &v))
                    .fold(f64::NEG_INFINITY, f64::max);
                v[s] - gamma_star * best
            })
            .collect(),
    ))
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    fn sharp_bound() -> RewardlessMdp {
        // s1 -left-> s3 (absorbing), s1 -right-> s2, s2 -> s1
        RewardlessMdp::deterministic(
            vec!["s1".into(), "s2".into(), "s3".into()],
            vec!["left".into(), "right".into()],
            &[vec![2, 1], vec![0, 0], vec![2, 2]],
        )
        .unwrap()
    }

    #[test]
    fn self_loop_geometric_series() {
        let m = RewardlessMdp::deterministic(vec!["s".into()], vec!["stay".into()], &[vec![0]]).unwrap();
        let pi = Policy(vec![0]);
        assert_eq!(policy_matrix(&m, &pi).unwrap()[(0, 0)], 1.0);
        let v = evaluate_policy(&m, &pi, &RewardFunction::state(vec![1.0]), 0.5).unwrap();
        assert_abs_diff_eq!(v[0], 2.0, epsilon = 1e-12);
        assert!(matches!(
            evaluate_policy(&m, &pi, &RewardFunction::state(vec![1.0]), 1.0),
            Err(Error::Domain(_))
        ));
    }

    #[test]
    fn sharp_bound_values() {
        let m = sharp_bound();
        let r = RewardFunction::state(vec![0.0, 0.5, 1.0]);
        let right = Policy(vec![1, 0, 0]);
        let tm = policy_matrix(&m, &right).unwrap();
        assert_eq!(tm.column(0).as_slice(), &[0.0, 1.0, 0.0]);
        assert_eq!(tm.column(1).as_slice(), &[1.0, 0.0, 0.0]);
        // 2-cycle s1 s2 s1 ...: (0 + γ/2) / (1 - γ²)
        let v = evaluate_policy(&m, &right, &r, 0.5).unwrap();
        assert_abs_diff_eq!(v[0], 0.25 / 0.75, epsilon = 1e-12);
        let vstar = optimal_value(&m, &r, 0.5).unwrap();
        assert_abs_diff_eq!(vstar[0], 1.0, epsilon = 1e-12);
    }

    #[test]
    fn constant_reward_everything_optimal() {
        let m = sharp_bound();
        let r = RewardFunction::state(vec![3.0; 3]);
        let v = optimal_value(&m, &r, 0.75).unwrap();
        for x in v {
            assert_abs_diff_eq!(x, 12.0, epsilon = 1e-9);
        }
        let rep = optimal_actions(&m, &r, 0.75, DEFAULT_TOL).unwrap();
        assert!(rep.actions.iter().all(|a| a.len() == 2));
    }

    #[test]
    fn eps_sets_nest_and_cover() {
        let m = sharp_bound();
        let r = RewardFunction::state(vec![0.0, 0.5, 1.0]);
        for gamma in [0.0, 0.3, 0.9, 1.0] {
            let e0 = eps_optimal_actions(&m, &r, gamma, 0.0).unwrap();
            let e1 = eps_optimal_actions(&m, &r, gamma, 0.1).unwrap();
            let all = eps_optimal_actions(&m, &r, gamma, 1.0).unwrap();
            assert!(e0.is_subset_of(&e1));
            assert!(all.actions.iter().all(|a| a.len() == 2));
        }
        let e0 = eps_optimal_actions(&m, &r, 0.5, 0.0).unwrap();
        let opt = optimal_actions(&m, &r, 0.5, DEFAULT_TOL).unwrap();
        assert_eq!(e0.actions, opt.actions);
    }

    #[test]
    fn transfer_preserves_optimal_sets() {
        let m = sharp_bound();
        let r = RewardFunction::state(vec![0.0, 0.9, 1.0]);
        for (g, gs) in [(0.9, 0.2), (0.2, 0.9), (0.5, 0.5)] {
            let rp = transfer_reward(&m, &r, g, gs).unwrap();
            assert_eq!(
                optimal_actions(&m, &rp, gs, DEFAULT_TOL).unwrap().actions,
                optimal_actions(&m, &r, g, DEFAULT_TOL).unwrap().actions
            );
        }
        assert!(transfer_reward(&m, &r, 0.0, 0.5).is_err());
    }
}
