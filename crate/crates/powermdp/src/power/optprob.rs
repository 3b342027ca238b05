//! Probability that an action, a set of visit functions, or a set of recurrent
//! distributions is optimal under a reward distribution.

use super::dist::RewardDistributionSpec;
use super::estimate::{mean_samples, EstimateWithCI, Sampling};
use crate::error::{Error, Result};
use crate::mdp::laurent::{lex_cmp, ChainLimits};
use crate::mdp::{dot, Policy, RewardlessMdp};
use crate::visit::{enumerate_visit_functions_with, rsd_set, EnumOptions};
use std::cmp::Ordering;

/// Relative tolerance on value gaps when deciding per-sample optimality.
pub const OPT_TOL: f64 = 1e-9;

#[derive(Clone, Debug, PartialEq)]
pub enum OptTarget {
    Action(usize),
    /// Visit functions from the start state, given by policies inducing them.
    VisitSubset(Vec<Policy>),
    /// Recurrent state distributions; decided by average optimality.
    RsdSubset(Vec<Vec<f64>>),
}

/// Candidates with coefficient rows; a candidate's value for `r` is the row-wise
/// dot products, compared lexicographically.
pub(crate) struct LexTable {
    rows: Vec<Vec<Vec<f64>>>,
    in_target: Vec<bool>,
}

impl LexTable {
    pub(crate) fn build(
        mdp: &RewardlessMdp,
        s: usize,
        target: &OptTarget,
        gamma: f64,
    ) -> Result<LexTable> {
        if !(0.0..=1.0).contains(&gamma) {
            return Err(Error::domain(format!("discount {gamma} outside [0, 1]")));
        }
        if s >= mdp.n_states() {
            return Err(Error::input(format!("state index {s} out of range")));
        }
        let mut rows = Vec::new();
        let mut in_target = Vec::new();
        match target {
            OptTarget::Action(a) => {
                if *a >= mdp.n_actions() {
                    return Err(Error::input(format!("action index {a} out of range")));
                }
                let forced = EnumOptions { forced: vec![(s, *a)], ..EnumOptions::default() };
                for f in enumerate_visit_functions_with(mdp, s, &forced)?.functions {
                    rows.push(function_rows(mdp, &f.policy, s, gamma)?);
                    in_target.push(true);
                }
                for f in enumerate_visit_functions_with(mdp, s, &EnumOptions::default())?.functions {
                    if mdp.equivalent_actions(s, f.policy.0[s], *a) {
                        continue;
                    }
                    rows.push(function_rows(mdp, &f.policy, s, gamma)?);
                    in_target.push(false);
                }
            }
            OptTarget::VisitSubset(policies) => {
                if policies.is_empty() {
                    return Err(Error::input("empty target set"));
                }
                for pi in policies {
                    pi.check(mdp)?;
                    rows.push(function_rows(mdp, pi, s, gamma)?);
                    in_target.push(true);
                }
                for f in enumerate_visit_functions_with(mdp, s, &EnumOptions::default())?.functions {
                    rows.push(function_rows(mdp, &f.policy, s, gamma)?);
                    in_target.push(false);
                }
            }
            OptTarget::RsdSubset(ds) => {
                if ds.is_empty() {
                    return Err(Error::input("empty target set"));
                }
                if gamma != 1.0 {
                    return Err(Error::domain("recurrent-distribution targets are decided at discount 1"));
                }
                let all = rsd_set(mdp, s)?;
                for d in ds {
                    if !all
                        .iter()
                        .any(|x| x.dist.iter().zip(d).all(|(p, q)| (p - q).abs() <= 1e-9))
                    {
                        return Err(Error::input(format!("{d:?} is not a recurrent distribution of this state")));
                    }
                    rows.push(vec![d.clone()]);
                    in_target.push(true);
                }
                for x in all {
                    rows.push(vec![x.dist]);
                    in_target.push(false);
                }
            }
        }
        Ok(LexTable { rows, in_target })
    }

    fn key(&self, i: usize, r: &[f64]) -> Vec<f64> {
        self.rows[i].iter().map(|row| dot(row, r)).collect()
    }

    /// Whether some target candidate attains the lexicographic maximum for `r`.
    pub(crate) fn target_optimal(&self, r: &[f64]) -> bool {
        let mut best_all: Option<Vec<f64>> = None;
        let mut best_target: Option<Vec<f64>> = None;
        for i in 0..self.rows.len() {
            let k = self.key(i, r);
            let slot = if self.in_target[i] { &mut best_target } else { &mut best_all };
            if slot.as_ref().is_none_or(|b| lex_cmp(&k, b, OPT_TOL) == Ordering::Greater) {
                *slot = Some(k);
            }
        }
        let bt = best_target.expect("target is non-empty");
        match best_all {
            None => true,
            Some(ba) => lex_cmp(&bt, &ba, OPT_TOL) != Ordering::Less,
        }
    }
}

/// Value coefficients of `f^π_s` at `γ`: the vector itself inside (0, 1), the Taylor rows
/// `(P^k)[s, ·]` at 0, and the Laurent rows at 1.
fn function_rows(mdp: &RewardlessMdp, pi: &Policy, s: usize, gamma: f64) -> Result<Vec<Vec<f64>>> {
    let ns = mdp.n_states();
    let order = 2 * ns + 1;
    let p = pi.rows(mdp);
    if gamma == 0.0 {
        // row 0 is e_s for every function and carries no information
        let mut out = Vec::with_capacity(order);
        let mut cur: Vec<f64> = p.row(s).iter().copied().collect();
        for _ in 0..order {
            let next = (0..ns).map(|t| (0..ns).map(|u| cur[u] * p[(u, t)]).sum()).collect();
            out.push(std::mem::replace(&mut cur, next));
        }
        Ok(out)
    } else if gamma == 1.0 {
        let limits = ChainLimits::new(&p)?;
        Ok(limits
            .series_matrices(order)
            .iter()
            .map(|m| m.row(s).iter().copied().collect())
            .collect())
    } else {
        Ok(vec![crate::visit::visit_distribution(mdp, pi, s, gamma)?])
    }
}

pub fn optimality_probability(
    mdp: &RewardlessMdp,
    s: usize,
    target: &OptTarget,
    gamma: f64,
    spec: &RewardDistributionSpec,
    sampling: &Sampling,
) -> Result<EstimateWithCI> {
    spec.validate(mdp.n_states())?;
    sampling.validate()?;
    let table = LexTable::build(mdp, s, target, gamma)?;
    if let Some(atoms) = spec.finite_support() {
        let p = atoms
            .iter()
            .filter(|(_, r)| table.target_optimal(r))
            .map(|(w, _)| w)
            .sum();
        return Ok(EstimateWithCI::exact(p, sampling.seed));
    }
    let ns = mdp.n_states();
    let mean = mean_samples(sampling.samples, |i| {
        let r = spec.sample(ns, sampling.seed, i);
        Ok(if table.target_optimal(&r) { 1.0 } else { 0.0 })
    })?;
    Ok(EstimateWithCI::from_mean(mean, sampling, 1.0))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn fork() -> RewardlessMdp {
        // s0 -> s1 or s2, both absorbing
        RewardlessMdp::deterministic(
            vec!["s0".into(), "s1".into(), "s2".into()],
            vec!["l".into(), "r".into()],
            &[vec![1, 2], vec![1, 1], vec![2, 2]],
        )
        .unwrap()
    }

    #[test]
    fn symmetric_fork_is_half() {
        let m = fork();
        for g in [0.0, 0.5, 1.0] {
            let e = optimality_probability(
                &m,
                0,
                &OptTarget::Action(0),
                g,
                &RewardDistributionSpec::uniform(),
                &Sampling::new(20_000, 3),
            )
            .unwrap();
            assert!((e.estimate - 0.5).abs() <= e.radius, "γ={g}: {e}");
        }
    }

    #[test]
    fn degenerate_is_exact() {
        let m = fork();
        let spec = RewardDistributionSpec::Degenerate(vec![0.0, 1.0, 0.0]);
        let e = optimality_probability(&m, 0, &OptTarget::Action(0), 0.5, &spec, &Sampling::new(10, 0)).unwrap();
        assert!(e.exact);
        assert_eq!(e.estimate, 1.0);
        // ties count as optimal for both
        let flat = RewardDistributionSpec::Degenerate(vec![0.0, 0.0, 0.0]);
        let e = optimality_probability(&m, 0, &OptTarget::Action(1), 0.5, &flat, &Sampling::new(10, 0)).unwrap();
        assert_eq!(e.estimate, 1.0);
    }

    #[test]
    fn empty_target_rejected() {
        let m = fork();
        let err = optimality_probability(
            &m,
            0,
            &OptTarget::VisitSubset(vec![]),
            0.5,
            &RewardDistributionSpec::uniform(),
            &Sampling::new(10, 0),
        )
        .unwrap_err();
        assert!(matches!(err, Error::Input(_)));
    }
}
