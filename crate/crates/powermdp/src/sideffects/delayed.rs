//! Delayed-specification planning: the agent follows a prefix policy until the true
//! reward is revealed at a random correction time, then acts optimally.

use crate::error::{Error, Result};
use crate::mdp::{
    evaluate_policy, optimal_actions, optimal_solution, optimal_value, state_distributions, unit, Policy,
    PolicySetReport, RewardFunction, RewardlessMdp, DEFAULT_TOL,
};
use crate::power::estimate::{mean_samples, sum_samples};
use crate::power::{EstimateWithCI, RewardDistributionSpec, Sampling};

/// Tail mass below which a geometric correction time is truncated.
pub const GEOMETRIC_TAIL: f64 = 1e-12;

/// Distribution of the correction time `T`.
#[derive(Clone, Debug, PartialEq)]
pub enum CorrectionTime {
    /// `P(T = t) = p (1 − p)^(t−1)` for `t ≥ 1`.
    Geometric { p: f64 },
    /// `P(T = t)` for `t = 0, 1, …`.
    Table(Vec<f64>),
}

impl CorrectionTime {
    pub fn validate(&self) -> Result<()> {
        match self {
            CorrectionTime::Geometric { p } if !(*p > 0.0 && *p < 1.0) => {
                Err(Error::input(format!("geometric parameter must lie in (0, 1), got {p}")))
            }
            CorrectionTime::Table(w) => {
                if w.is_empty() || w.iter().any(|x| !(x.is_finite() && *x >= 0.0)) {
                    return Err(Error::input("correction-time table needs non-negative weights"));
                }
                if (w.iter().sum::<f64>() - 1.0).abs() > 1e-9 {
                    return Err(Error::input("correction-time weights must sum to 1"));
                }
                Ok(())
            }
            _ => Ok(()),
        }
    }

    /// Explicit table; geometric times are cut once the remaining mass drops below [`GEOMETRIC_TAIL`].
    pub fn table(&self) -> Result<Vec<f64>> {
        self.validate()?;
        match self {
            CorrectionTime::Table(w) => Ok(w.clone()),
            CorrectionTime::Geometric { p } => {
                let mut w = vec![0.0];
                let mut tail = 1.0;
                while tail >= GEOMETRIC_TAIL {
                    w.push(p * tail);
                    tail *= 1.0 - p;
                }
                Ok(w)
            }
        }
    }
}

/// Per-state means over the reward distribution, all taken from the same draws.
#[derive(Clone, Debug, PartialEq)]
pub struct ValueMoments {
    pub gamma: f64,
    /// `E[R(s)]`
    pub mean_reward: Vec<f64>,
    /// `E[V*_R(s, γ)]`
    pub mean_value: Vec<f64>,
    pub exact: bool,
}

impl ValueMoments {
    pub fn compute(mdp: &RewardlessMdp, spec: &RewardDistributionSpec, gamma: f64, sampling: &Sampling) -> Result<Self> {
        check_open_discount(gamma)?;
        let ns = mdp.n_states();
        spec.validate(ns)?;
        let value = |r: &[f64]| optimal_value(mdp, &RewardFunction::state(r.to_vec()), gamma);
        if let Some(atoms) = spec.finite_support() {
            let mut mr = vec![0.0; ns];
            let mut mv = vec![0.0; ns];
            for (w, r) in &atoms {
                let v = value(r)?;
                for s in 0..ns {
                    mr[s] += w * r[s];
                    mv[s] += w * v[s];
                }
            }
            return Ok(ValueMoments { gamma, mean_reward: mr, mean_value: mv, exact: true });
        }
        sampling.validate()?;
        let sums = sum_samples(sampling.samples, 2 * ns, |i, out| {
            let r = spec.sample(ns, sampling.seed, i);
            let v = value(&r)?;
            out[..ns].copy_from_slice(&r);
            out[ns..].copy_from_slice(&v);
            Ok(())
        })?;
        let n = sampling.samples as f64;
        Ok(ValueMoments {
            gamma,
            mean_reward: sums[..ns].iter().map(|x| x / n).collect(),
            mean_value: sums[ns..].iter().map(|x| x / n).collect(),
            exact: false,
        })
    }

    /// `POWER(s, γ) = (1 − γ)/γ · (E[V*(s)] − E[R(s)])`.
    pub fn power(&self) -> Vec<f64> {
        let k = (1.0 - self.gamma) / self.gamma;
        self.mean_value.iter().zip(&self.mean_reward).map(|(v, r)| k * (v - r)).collect()
    }
}

fn check_open_discount(gamma: f64) -> Result<()> {
    if !(gamma > 0.0 && gamma < 1.0) {
        return Err(Error::domain(format!("delayed specification needs a discount in (0, 1), got {gamma}")));
    }
    Ok(())
}

fn check_state(mdp: &RewardlessMdp, s: usize) -> Result<()> {
    if s >= mdp.n_states() {
        return Err(Error::input(format!("state index {s} out of range")));
    }
    Ok(())
}

fn prefix_score(mdp: &RewardlessMdp, dists: &[Vec<f64>], gamma: f64, r: &[f64], v_star: &[f64]) -> f64 {
    let t = dists.len() - 1;
    let mut total = 0.0;
    let mut g = 1.0;
    for d in &dists[..t] {
        total += g * crate::mdp::dot(d, r);
        g *= gamma;
    }
    let _ = mdp;
    total + g * crate::mdp::dot(&dists[t], v_star)
}

/// Return of `pi` for the first `t_correct` steps plus the optimal value afterwards,
/// averaged over rewards drawn from `spec`. State distributions are propagated exactly.
pub fn delayed_spec_score(
    mdp: &RewardlessMdp,
    pi: &Policy,
    start: usize,
    spec: &RewardDistributionSpec,
    gamma: f64,
    t_correct: usize,
    sampling: &Sampling,
) -> Result<EstimateWithCI> {
    check_open_discount(gamma)?;
    check_state(mdp, start)?;
    pi.check(mdp)?;
    let ns = mdp.n_states();
    spec.validate(ns)?;
    let dists = state_distributions(mdp, pi, &unit(ns, start), t_correct);
    let one = |r: &[f64]| -> Result<f64> {
        let v = optimal_value(mdp, &RewardFunction::state(r.to_vec()), gamma)?;
        Ok(prefix_score(mdp, &dists, gamma, r, &v))
    };
    if let Some(atoms) = spec.finite_support() {
        let mut total = 0.0;
        for (w, r) in &atoms {
            total += w * one(r)?;
        }
        return Ok(EstimateWithCI::exact(total, sampling.seed));
    }
    sampling.validate()?;
    let (b, c) = spec.bounds();
    if !(b.is_finite() && c.is_finite()) {
        return Err(Error::input("reward distribution must have bounded support"));
    }
    let mean = mean_samples(sampling.samples, |i| one(&spec.sample(ns, sampling.seed, i)))?;
    Ok(EstimateWithCI::from_mean(mean, sampling, (c - b) / (1.0 - gamma)))
}

/// Expected value of following `pi` until the correction time and acting optimally after it.
pub fn expected_switch_value(
    mdp: &RewardlessMdp,
    pi: &Policy,
    start: usize,
    moments: &ValueMoments,
    time: &CorrectionTime,
) -> Result<f64> {
    check_state(mdp, start)?;
    pi.check(mdp)?;
    time.validate()?;
    let gamma = moments.gamma;
    match time {
        CorrectionTime::Geometric { p } => {
            let r = surrogate_reward(moments, *p);
            let v = evaluate_policy(mdp, pi, &RewardFunction::state(r), (1.0 - p) * gamma)?;
            Ok((v[start] - p * moments.mean_value[start]) / (1.0 - p))
        }
        CorrectionTime::Table(w) => {
            let dists = state_distributions(mdp, pi, &unit(mdp.n_states(), start), w.len() - 1);
            let mut total = 0.0;
            for (t, &pt) in w.iter().enumerate() {
                if pt > 0.0 {
                    total += pt * prefix_score(mdp, &dists[..=t], gamma, &moments.mean_reward, &moments.mean_value);
                }
            }
            Ok(total)
        }
    }
}

/// The normalized switch value and its split into a mean-reward part and a POWER part.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct SwitchDecomposition {
    /// `(1 − γ)` times the expected switch value.
    pub direct: f64,
    /// `(1 − γ) E_t[Σ_{i ≤ t} γ^i E[R̄(s_i)]]`
    pub reward_term: f64,
    /// `E_t[γ^(t+1) E[POWER(s_t)]]`
    pub power_term: f64,
}

pub fn switch_decomposition(
    mdp: &RewardlessMdp,
    pi: &Policy,
    start: usize,
    moments: &ValueMoments,
    table: &[f64],
) -> Result<SwitchDecomposition> {
    let time = CorrectionTime::Table(table.to_vec());
    let gamma = moments.gamma;
    let direct = (1.0 - gamma) * expected_switch_value(mdp, pi, start, moments, &time)?;
    let dists = state_distributions(mdp, pi, &unit(mdp.n_states(), start), table.len() - 1);
    let power = moments.power();
    let (mut reward_term, mut power_term) = (0.0, 0.0);
    for (t, &pt) in table.iter().enumerate() {
        let mut g = 1.0;
        let mut partial = 0.0;
        for d in &dists[..=t] {
            partial += g * crate::mdp::dot(d, &moments.mean_reward);
            g *= gamma;
        }
        reward_term += pt * (1.0 - gamma) * partial;
        power_term += pt * g * crate::mdp::dot(&dists[t], &power);
    }
    Ok(SwitchDecomposition { direct, reward_term, power_term })
}

/// `R'(s) = (1 − p) E[R(s)] + p E[V*(s)]`.
pub fn surrogate_reward(moments: &ValueMoments, p: f64) -> Vec<f64> {
    moments.mean_reward.iter().zip(&moments.mean_value).map(|(r, v)| (1.0 - p) * r + p * v).collect()
}

#[derive(Clone, Debug)]
pub struct DelayedSolution {
    pub surrogate: Vec<f64>,
    /// `(1 − p) γ`
    pub gamma_aup: f64,
    pub policy: Policy,
    /// Every action optimal for the surrogate, per state.
    pub optimal: PolicySetReport,
    pub moments: ValueMoments,
}

/// Optimal prefix policy for a geometric correction time with parameter `p`.
pub fn solve_delayed_geometric(
    mdp: &RewardlessMdp,
    spec: &RewardDistributionSpec,
    p: f64,
    gamma: f64,
    sampling: &Sampling,
) -> Result<DelayedSolution> {
    CorrectionTime::Geometric { p }.validate()?;
    let moments = ValueMoments::compute(mdp, spec, gamma, sampling)?;
    solve_with_moments(mdp, moments, p)
}

pub fn solve_with_moments(mdp: &RewardlessMdp, moments: ValueMoments, p: f64) -> Result<DelayedSolution> {
    CorrectionTime::Geometric { p }.validate()?;
    let gamma_aup = (1.0 - p) * moments.gamma;
    let surrogate = surrogate_reward(&moments, p);
    let r = RewardFunction::state(surrogate.clone());
    let policy = optimal_solution(mdp, &r, gamma_aup, None)?.policy;
    let optimal = optimal_actions(mdp, &r, gamma_aup, DEFAULT_TOL)?;
    Ok(DelayedSolution { surrogate, gamma_aup, policy, optimal, moments })
}

/// Reward whose optimal prefix policies match the geometric solution, written as mean reward
/// minus `p/(1 − p)` times the optimal-value shortfall against a baseline policy.
#[derive(Clone, Debug, PartialEq)]
pub struct AssistReward {
    /// `p / (1 − p)`
    pub lambda: f64,
    pub gamma_aup: f64,
    /// `R̄(s) + λ E[V*(s)]`: the part that depends on the agent's own state.
    pub stationary: Vec<f64>,
    /// `E[V*]` at the baseline's step-`i` state distribution, for `i` up to the horizon asked for.
    pub baseline_terms: Vec<f64>,
    /// `λ Σ_i γ_aup^i E[V*(s_i^∅)]`, the policy-independent offset.
    pub baseline_offset: f64,
}

impl AssistReward {
    /// `R^A(s | step i)`.
    pub fn at(&self, i: usize, s: usize, moments: &ValueMoments) -> f64 {
        moments.mean_reward[s] - self.lambda * (self.baseline_terms[i] - moments.mean_value[s])
    }

    /// Discounted `R^A` return of `pi` from `start`.
    pub fn objective(&self, mdp: &RewardlessMdp, pi: &Policy, start: usize) -> Result<f64> {
        let v = evaluate_policy(mdp, pi, &RewardFunction::state(self.stationary.clone()), self.gamma_aup)?;
        Ok(v[start] - self.baseline_offset)
    }

    pub fn optimal_actions(&self, mdp: &RewardlessMdp, tol: f64) -> Result<PolicySetReport> {
        optimal_actions(mdp, &RewardFunction::state(self.stationary.clone()), self.gamma_aup, tol)
    }
}

pub fn assist_alternate_reward(
    mdp: &RewardlessMdp,
    moments: &ValueMoments,
    p: f64,
    baseline: &Policy,
    start: usize,
    horizon: usize,
) -> Result<AssistReward> {
    CorrectionTime::Geometric { p }.validate()?;
    check_state(mdp, start)?;
    baseline.check(mdp)?;
    let lambda = p / (1.0 - p);
    let gamma_aup = (1.0 - p) * moments.gamma;
    let stationary = moments
        .mean_reward
        .iter()
        .zip(&moments.mean_value)
        .map(|(r, v)| r + lambda * v)
        .collect();
    let baseline_terms = state_distributions(mdp, baseline, &unit(mdp.n_states(), start), horizon)
        .iter()
        .map(|d| crate::mdp::dot(d, &moments.mean_value))
        .collect();
    let vb = evaluate_policy(mdp, baseline, &RewardFunction::state(moments.mean_value.clone()), gamma_aup)?;
    Ok(AssistReward { lambda, gamma_aup, stationary, baseline_terms, baseline_offset: lambda * vb[start] })
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    fn loop3() -> RewardlessMdp {
        RewardlessMdp::deterministic(
            vec!["a".into(), "b".into(), "c".into()],
            vec!["x".into(), "y".into()],
            &[vec![1, 2], vec![0, 1], vec![2, 0]],
        )
        .unwrap()
    }

    #[test]
    fn zero_correction_time_scores_average_value() {
        let m = loop3();
        let spec = RewardDistributionSpec::uniform();
        let s = Sampling::new(400, 5);
        let mom = ValueMoments::compute(&m, &spec, 0.8, &s).unwrap();
        for pi in Policy::enumerate(&m) {
            let e = delayed_spec_score(&m, &pi, 0, &spec, 0.8, 0, &s).unwrap();
            assert_abs_diff_eq!(e.estimate, mom.mean_value[0], epsilon = 1e-12);
            let v = expected_switch_value(&m, &pi, 0, &mom, &CorrectionTime::Table(vec![1.0])).unwrap();
            assert_abs_diff_eq!(v, mom.mean_value[0], epsilon = 1e-12);
        }
    }

    #[test]
    fn optimal_prefix_scores_optimal_value() {
        let m = loop3();
        let r = vec![0.1, 0.9, 0.4];
        let sol = optimal_solution(&m, &RewardFunction::state(r.clone()), 0.7, None).unwrap();
        let spec = RewardDistributionSpec::Degenerate(r);
        let e = delayed_spec_score(&m, &sol.policy, 0, &spec, 0.7, 6, &Sampling::new(1, 0)).unwrap();
        assert!(e.exact);
        assert_abs_diff_eq!(e.estimate, sol.values[0], epsilon = 1e-12);
    }

    #[test]
    fn geometric_table_matches_closed_form() {
        let m = loop3();
        let spec = RewardDistributionSpec::Degenerate(vec![0.3, -0.2, 0.8]);
        let mom = ValueMoments::compute(&m, &spec, 0.9, &Sampling::new(1, 0)).unwrap();
        let geo = CorrectionTime::Geometric { p: 0.3 };
        let table = CorrectionTime::Table(geo.table().unwrap());
        for pi in Policy::enumerate(&m) {
            let a = expected_switch_value(&m, &pi, 0, &mom, &geo).unwrap();
            let b = expected_switch_value(&m, &pi, 0, &mom, &table).unwrap();
            assert_abs_diff_eq!(a, b, epsilon = 1e-9);
        }
    }

    #[test]
    fn odds_coefficient() {
        let m = loop3();
        let mom = ValueMoments::compute(&m, &RewardDistributionSpec::Degenerate(vec![0.0, 1.0, 0.0]), 0.5, &Sampling::new(1, 0))
            .unwrap();
        let a = assist_alternate_reward(&m, &mom, 0.5, &Policy(vec![0, 0, 0]), 0, 4).unwrap();
        assert_eq!(a.lambda, 1.0);
        assert_eq!(a.baseline_terms.len(), 5);
        assert!(solve_delayed_geometric(&m, &RewardDistributionSpec::uniform(), 1.0, 0.5, &Sampling::new(5, 0)).is_err());
    }
}
