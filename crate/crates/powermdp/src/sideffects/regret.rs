//! Proportional regret of (possibly corrected) policies.

use crate::error::{Error, Result};
use crate::mdp::{dot, evaluate_policy, optimal_value, state_distributions, unit, Policy, RewardFunction, RewardlessMdp};

/// Slack allowed when checking the regret inequalities.
pub const REGRET_TOL: f64 = 1e-9;
/// Value ranges narrower than this fraction of the largest reward magnitude count as empty.
pub const DEGENERATE_REL: f64 = 1e-10;

#[derive(Clone, Debug, PartialEq)]
pub enum PolicySpec {
    Stationary(Policy),
    /// Follow `prefix` for `steps` steps, then act optimally for the reward being scored.
    Switch { prefix: Policy, steps: usize },
}

impl PolicySpec {
    fn prefix(&self) -> &Policy {
        match self {
            PolicySpec::Stationary(p) => p,
            PolicySpec::Switch { prefix, .. } => prefix,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct RegretReport {
    pub pregret: f64,
    /// Normalized optimal value.
    pub v_star: f64,
    /// Normalized value of the scored policy.
    pub v_pi: f64,
    /// Normalized minimal value, `−V̂*_{−R}`.
    pub v_min: f64,
    /// Every policy attains the same value up to rounding; `pregret` is then 0.
    pub degenerate: bool,
}

impl RegretReport {
    pub fn is_degenerate(&self) -> bool {
        self.degenerate
    }
}

fn check_args(mdp: &RewardlessMdp, r: &RewardFunction, s: usize, gamma: f64) -> Result<()> {
    r.check(mdp)?;
    if s >= mdp.n_states() {
        return Err(Error::input(format!("state index {s} out of range")));
    }
    if !(0.0..1.0).contains(&gamma) {
        return Err(Error::domain(format!("proportional regret needs a discount in [0, 1), got {gamma}")));
    }
    Ok(())
}

/// Unnormalized value of `spec` from `s`.
pub fn policy_spec_value(mdp: &RewardlessMdp, spec: &PolicySpec, r: &RewardFunction, s: usize, gamma: f64) -> Result<f64> {
    check_args(mdp, r, s, gamma)?;
    spec.prefix().check(mdp)?;
    match spec {
        PolicySpec::Stationary(pi) => Ok(evaluate_policy(mdp, pi, r, gamma)?[s]),
        PolicySpec::Switch { prefix, steps } => {
            let v_star = optimal_value(mdp, r, gamma)?;
            let r_pi: Vec<f64> = (0..mdp.n_states()).map(|x| r.at(x, prefix.0[x])).collect();
            let dists = state_distributions(mdp, prefix, &unit(mdp.n_states(), s), *steps);
            let mut total = 0.0;
            let mut g = 1.0;
            for d in &dists[..*steps] {
                total += g * dot(d, &r_pi);
                g *= gamma;
            }
            Ok(total + g * dot(&dists[*steps], &v_star))
        }
    }
}

pub fn proportional_regret(
    mdp: &RewardlessMdp,
    spec: &PolicySpec,
    r: &RewardFunction,
    s: usize,
    gamma: f64,
) -> Result<RegretReport> {
    let v_pi = policy_spec_value(mdp, spec, r, s, gamma)?;
    let v_star = optimal_value(mdp, r, gamma)?[s];
    let v_min = -optimal_value(mdp, &r.negated(), gamma)?[s];
    let k = 1.0 - gamma;
    let (v_star, v_pi, v_min) = (k * v_star, k * v_pi, k * v_min);
    let denom = v_star - v_min;
    let scale = (0..mdp.n_states())
        .flat_map(|x| (0..mdp.n_actions()).map(move |a| (x, a)))
        .map(|(x, a)| r.at(x, a).abs())
        .fold(0.0, f64::max);
    let degenerate = denom <= DEGENERATE_REL * scale;
    let pregret = if degenerate { 0.0 } else { ((v_star - v_pi) / denom).clamp(0.0, 1.0) };
    Ok(RegretReport { pregret, v_star, v_pi, v_min, degenerate })
}

/// Steps needed to reach `target` with probability one under the best policy, per state.
pub fn almost_sure_return_steps(mdp: &RewardlessMdp, target: usize) -> Vec<Option<usize>> {
    let ns = mdp.n_states();
    let mut steps = vec![None; ns];
    steps[target] = Some(0);
    for n in 1..=ns {
        let inside: Vec<bool> = steps.iter().map(Option::is_some).collect();
        let mut grew = false;
        for x in 0..ns {
            if steps[x].is_none() && (0..mdp.n_actions()).any(|a| mdp.successors(x, a).all(|y| inside[y])) {
                steps[x] = Some(n);
                grew = true;
            }
        }
        if !grew {
            break;
        }
    }
    steps
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct CorrigibilityCheck {
    pub report: RegretReport,
    /// Worst almost-sure return time to the start over the states occupied at the correction step.
    pub return_steps: Option<usize>,
    /// `1 − γ^(t+k)`, or 1 when the start cannot be regained.
    pub bound: f64,
    pub holds: bool,
}

/// Regret of following `prefix` for `t` steps before correction, against the return-time bound.
pub fn corrigibility_bound_check(
    mdp: &RewardlessMdp,
    prefix: &Policy,
    r: &RewardFunction,
    s: usize,
    gamma: f64,
    t: usize,
) -> Result<CorrigibilityCheck> {
    let spec = PolicySpec::Switch { prefix: prefix.clone(), steps: t };
    let report = proportional_regret(mdp, &spec, r, s, gamma)?;
    let back = almost_sure_return_steps(mdp, s);
    let dt = state_distributions(mdp, prefix, &unit(mdp.n_states(), s), t).pop().unwrap_or_default();
    let mut k = Some(0);
    for (x, &mass) in dt.iter().enumerate() {
        if mass > 0.0 {
            k = match (k, back[x]) {
                (Some(a), Some(b)) => Some(a.max(b)),
                _ => None,
            };
        }
    }
    let bound = match k {
        Some(k) => 1.0 - gamma.powi((t + k) as i32),
        None => 1.0,
    };
    Ok(CorrigibilityCheck { report, return_steps: k, bound, holds: report.pregret <= bound + REGRET_TOL })
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct NoFreeLunchCheck {
    pub regret: RegretReport,
    pub negated: RegretReport,
    pub worst: f64,
    pub holds: bool,
}

/// A fixed policy cannot keep its regret under one half for both `R` and `−R`.
///
/// Corrected policies are excluded on purpose: after the switch they track whichever
/// reward is being scored, so both regrets can vanish.
pub fn no_free_lunch_check(
    mdp: &RewardlessMdp,
    pi: &Policy,
    r: &RewardFunction,
    s: usize,
    gamma: f64,
) -> Result<NoFreeLunchCheck> {
    let spec = PolicySpec::Stationary(pi.clone());
    let regret = proportional_regret(mdp, &spec, r, s, gamma)?;
    let negated = proportional_regret(mdp, &spec, &r.negated(), s, gamma)?;
    let worst = regret.pregret.max(negated.pregret);
    let holds = regret.is_degenerate() || worst >= 0.5 - REGRET_TOL;
    Ok(NoFreeLunchCheck { regret, negated, worst, holds })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::mdp::optimal_solution;
    use approx::assert_abs_diff_eq;

    /// s1 ↔ s2, s1 → s3, s3 loops; actions left, right, stay.
    fn sharp() -> RewardlessMdp {
        RewardlessMdp::deterministic(
            vec!["s1".into(), "s2".into(), "s3".into()],
            vec!["left".into(), "right".into(), "stay".into()],
            &[vec![2, 1, 2], vec![0, 0, 0], vec![2, 2, 2]],
        )
        .unwrap()
    }

    #[test]
    fn sharp_bound_is_attained() {
        let m = sharp();
        let r = RewardFunction::state(vec![0.0, 0.5, 1.0]);
        for g in [0.25, 0.5, 0.75] {
            let c = corrigibility_bound_check(&m, &Policy(vec![1, 0, 2]), &r, 0, g, 1).unwrap();
            assert_eq!(c.return_steps, Some(1));
            assert_abs_diff_eq!(c.report.pregret, 1.0 - g * g, epsilon = 1e-12);
            assert_abs_diff_eq!(c.bound, 1.0 - g * g, epsilon = 1e-15);
            assert!(c.holds);
        }
    }

    #[test]
    fn optimal_policy_has_no_regret() {
        let m = sharp();
        let r = RewardFunction::state(vec![0.3, 0.9, 0.1]);
        let pi = optimal_solution(&m, &r, 0.6, None).unwrap().policy;
        let rep = proportional_regret(&m, &PolicySpec::Stationary(pi), &r, 0, 0.6).unwrap();
        assert_abs_diff_eq!(rep.pregret, 0.0, epsilon = 1e-12);
    }

    #[test]
    fn negation_flips() {
        let m = sharp();
        let r = RewardFunction::state(vec![0.3, 0.9, 0.1]);
        let c = no_free_lunch_check(&m, &Policy(vec![0, 0, 2]), &r, 0, 0.6).unwrap();
        assert_abs_diff_eq!(c.negated.pregret, 1.0 - c.regret.pregret, epsilon = 1e-12);
        assert!(c.holds);
    }

    #[test]
    fn zero_discount_is_degenerate() {
        let m = sharp();
        let r = RewardFunction::state(vec![0.3, 0.9, 0.1]);
        let rep = proportional_regret(&m, &PolicySpec::Stationary(Policy(vec![0, 0, 2])), &r, 0, 0.0).unwrap();
        assert!(rep.is_degenerate());
        assert_eq!(rep.pregret, 0.0);
    }

    #[test]
    fn unreachable_start_gives_trivial_bound() {
        let m = sharp();
        let r = RewardFunction::state(vec![0.0, 0.5, 1.0]);
        let c = corrigibility_bound_check(&m, &Policy(vec![0, 0, 2]), &r, 0, 0.5, 1).unwrap();
        assert_eq!(c.return_steps, None);
        assert_eq!(c.bound, 1.0);
    }
}
