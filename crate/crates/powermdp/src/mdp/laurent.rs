//! Long-run limits of finite Markov chains and Blackwell-optimal control.
//!
//! For a policy with row-stochastic `P`, Cesàro limit `P*` and deviation matrix
//! `H = (I - P + P*)^{-1} (I - P*)`, the discounted value with `γ = 1/(1+ρ)`
//! expands as `V = (1+ρ) Σ_{n≥-1} ρ^n y_n` where `y_{-1} = P* r` and
//! `y_n = (-1)^n H^{n+1} r`. Comparing the coefficient sequences
//! lexicographically orders policies for all discounts close enough to 1.

use super::linalg::{inverse, solve, solve_matrix};
use super::solve::{argmax, policy_reward};
use super::{Policy, RewardFunction, RewardlessMdp};
use crate::error::{Error, Result};
use nalgebra::{DMatrix, DVector};
use petgraph::algo::tarjan_scc;
use petgraph::graph::DiGraph;
use std::cmp::Ordering;

/// Relative tolerance for comparing expansion coefficients.
pub const SERIES_TOL: f64 = 1e-9;

#[derive(Clone, Debug)]
pub struct ChainLimits {
    cesaro: DMatrix<f64>,
    deviation: DMatrix<f64>,
}

impl ChainLimits {
    pub fn new(p: &DMatrix<f64>) -> Result<Self> {
        let cesaro = cesaro_limit(p)?;
        let n = p.nrows();
        let id = DMatrix::<f64>::identity(n, n);
        let fundamental = inverse(&id - p + &cesaro)?;
        let deviation = fundamental * (&id - &cesaro);
        Ok(ChainLimits { cesaro, deviation })
    }

    /// `P* = lim (1/N) Σ_{k<N} P^k`; row `s` is the recurrent state distribution from `s`.
    pub fn cesaro(&self) -> &DMatrix<f64> {
        &self.cesaro
    }

    pub fn deviation(&self) -> &DMatrix<f64> {
        &self.deviation
    }

    /// Matrices `M_{-1} = P*`, `M_n = (-1)^n H^{n+1}` for n = 0..=order, so that `y_n = M_n r`.
    pub fn series_matrices(&self, order: usize) -> Vec<DMatrix<f64>> {
        let mut out = Vec::with_capacity(order + 2);
        out.push(self.cesaro.clone());
        let mut power = self.deviation.clone();
        for n in 0..=order {
            if n > 0 {
                power = &power * &self.deviation;
            }
            out.push(if n % 2 == 0 { power.clone() } else { -power.clone() });
        }
        out
    }

    /// Coefficients `y_{-1}, ..., y_order` for reward vector `r`.
    pub fn coefficients(&self, r: &[f64], order: usize) -> Vec<Vec<f64>> {
        let r = DVector::from_column_slice(r);
        let mut out = Vec::with_capacity(order + 2);
        out.push((&self.cesaro * &r).as_slice().to_vec());
        let mut cur = &self.deviation * &r;
        for n in 0..=order {
            if n > 0 {
                cur = &self.deviation * &cur;
            }
            let sign = if n % 2 == 0 { 1.0 } else { -1.0 };
            out.push(cur.iter().map(|x| sign * x).collect());
        }
        out
    }
}

pub fn cesaro_limit(p: &DMatrix<f64>) -> Result<DMatrix<f64>> {
    let n = p.nrows();
    let mut g = DiGraph::<(), ()>::with_capacity(n, n * n);
    let nodes: Vec<_> = (0..n).map(|_| g.add_node(())).collect();
    for s in 0..n {
        for t in 0..n {
            if p[(s, t)] > 0.0 {
                g.add_edge(nodes[s], nodes[t], ());
            }
        }
    }
    let mut class_of = vec![usize::MAX; n];
    let mut classes: Vec<Vec<usize>> = Vec::new();
    for comp in tarjan_scc(&g) {
        let members: Vec<usize> = comp.iter().map(|v| v.index()).collect();
        let closed = members
            .iter()
            .all(|&s| (0..n).all(|t| p[(s, t)] <= 0.0 || members.contains(&t)));
        if closed {
            let mut members = members;
            members.sort_unstable();
            for &s in &members {
                class_of[s] = classes.len();
            }
            classes.push(members);
        }
    }

    let mut stationary: Vec<Vec<f64>> = Vec::with_capacity(classes.len());
    for members in &classes {
        let k = members.len();
        // π (P_C - I) = 0 with the last equation replaced by Σ π = 1
        let mut a = DMatrix::<f64>::zeros(k, k);
        for (i, &s) in members.iter().enumerate() {
            for (j, &t) in members.iter().enumerate() {
                a[(j, i)] = p[(s, t)] - if s == t { 1.0 } else { 0.0 };
            }
        }
        let mut b = vec![0.0; k];
        for i in 0..k {
            a[(k - 1, i)] = 1.0;
        }
        b[k - 1] = 1.0;
        stationary.push(solve(a, &b)?);
    }

    let transient: Vec<usize> = (0..n).filter(|&s| class_of[s] == usize::MAX).collect();
    let mut pstar = DMatrix::<f64>::zeros(n, n);
    for (c, members) in classes.iter().enumerate() {
        for &s in members {
            for (j, &t) in members.iter().enumerate() {
                pstar[(s, t)] = stationary[c][j];
            }
        }
    }
    if !transient.is_empty() {
        let m = transient.len();
        let mut a = DMatrix::<f64>::identity(m, m);
        for (i, &s) in transient.iter().enumerate() {
            for (j, &t) in transient.iter().enumerate() {
                a[(i, j)] -= p[(s, t)];
            }
        }
        // one-step probability of entering each recurrent class
        let mut b = DMatrix::<f64>::zeros(m, classes.len());
        for (i, &s) in transient.iter().enumerate() {
            for t in 0..n {
                if class_of[t] != usize::MAX {
                    b[(i, class_of[t])] += p[(s, t)];
                }
            }
        }
        let absorb = solve_matrix(a, &b)?;
        for (i, &s) in transient.iter().enumerate() {
            for (c, members) in classes.iter().enumerate() {
                let w = absorb[(i, c)];
                for (j, &t) in members.iter().enumerate() {
                    pstar[(s, t)] += w * stationary[c][j];
                }
            }
        }
    }
    Ok(pstar)
}

/// Lexicographic comparison with a per-coefficient relative tolerance.
pub fn lex_cmp(a: &[f64], b: &[f64], tol: f64) -> Ordering {
    for (x, y) in a.iter().zip(b) {
        if (x - y).abs() > tol * (1.0 + x.abs().max(y.abs())) {
            return x.partial_cmp(y).unwrap_or(Ordering::Equal);
        }
    }
    Ordering::Equal
}

#[derive(Clone, Debug)]
pub struct BlackwellSolution {
    pub policy: Policy,
    /// `y_{-1}, ..., y_N` of the Blackwell-optimal value expansion.
    pub coefficients: Vec<Vec<f64>>,
    /// Actions whose advantage expansion vanishes, per state.
    pub action_sets: Vec<Vec<usize>>,
}

impl BlackwellSolution {
    /// Optimal average reward per state.
    pub fn gain(&self) -> &[f64] {
        &self.coefficients[0]
    }
}

/// Advantage expansion of taking `a` once in `s`, then following the policy with coefficients `y`.
fn advantage_series(
    mdp: &RewardlessMdp,
    r: &RewardFunction,
    y: &[Vec<f64>],
    s: usize,
    a: usize,
) -> Vec<f64> {
    let mut out = Vec::with_capacity(y.len());
    out.push(mdp.expect(s, a, &y[0]) - y[0][s]);
    for k in 1..y.len() {
        let mut c = mdp.expect(s, a, &y[k]) - y[k][s] - y[k - 1][s];
        if k == 1 {
            c += r.at(s, a);
        }
        out.push(c);
    }
    out
}

/// Veinott-style policy iteration on the Laurent expansion; returns a Blackwell-optimal policy.
pub fn blackwell_optimal(mdp: &RewardlessMdp, r: &RewardFunction) -> Result<BlackwellSolution> {
    r.check(mdp)?;
    let ns = mdp.n_states();
    let na = mdp.n_actions();
    let order = ns;
    let mut pi = Policy(
        (0..ns)
            .map(|s| argmax((0..na).map(|a| r.at(s, a))))
            .collect(),
    );
    for _ in 0..10_000 {
        let limits = ChainLimits::new(&pi.rows(mdp))?;
        let y = limits.coefficients(&policy_reward(mdp, &pi, r), order);
        let zero = vec![0.0; y.len()];
        let mut changed = false;
        let mut sets = Vec::with_capacity(ns);
        for s in 0..ns {
            let adv: Vec<Vec<f64>> = (0..na).map(|a| advantage_series(mdp, r, &y, s, a)).collect();
            let mut best = pi.0[s];
            for a in 0..na {
                if lex_cmp(&adv[a], &adv[best], SERIES_TOL) == Ordering::Greater
                    && lex_cmp(&adv[a], &zero, SERIES_TOL) == Ordering::Greater
                {
                    best = a;
                }
            }
            if best != pi.0[s] {
                pi.0[s] = best;
                changed = true;
            }
            sets.push(
                (0..na)
                    .filter(|&a| lex_cmp(&adv[a], &zero, SERIES_TOL) == Ordering::Equal)
                    .collect(),
            );
        }
        if !changed {
            return Ok(BlackwellSolution { policy: pi, coefficients: y, action_sets: sets });
        }
    }
    Err(Error::Numerical("Blackwell policy iteration did not converge".into()))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::mdp::linalg::solve_discounted;
    use approx::assert_abs_diff_eq;

    fn mat(rows: &[&[f64]]) -> DMatrix<f64> {
        DMatrix::from_fn(rows.len(), rows.len(), |i, j| rows[i][j])
    }

    #[test]
    fn cesaro_of_periodic_and_transient_chain() {
        // 0 -> {1,2} 50/50, 1 <-> 2 two-cycle, 3 absorbing reached from nowhere
        let p = mat(&[
            &[0.0, 0.5, 0.5, 0.0],
            &[0.0, 0.0, 1.0, 0.0],
            &[0.0, 1.0, 0.0, 0.0],
            &[0.0, 0.0, 0.0, 1.0],
        ]);
        let lim = ChainLimits::new(&p).unwrap();
        let ps = lim.cesaro();
        for s in 0..3 {
            assert_abs_diff_eq!(ps[(s, 1)], 0.5, epsilon = 1e-12);
            assert_abs_diff_eq!(ps[(s, 2)], 0.5, epsilon = 1e-12);
        }
        assert_abs_diff_eq!(ps[(3, 3)], 1.0, epsilon = 1e-12);
        // P* P = P P* = P*, and P* H = 0
        assert!((ps * &p - ps).abs().max() < 1e-12);
        assert!((ps * lim.deviation()).abs().max() < 1e-12);
    }

    #[test]
    fn splits_between_absorbing_classes() {
        let p = mat(&[&[0.2, 0.3, 0.5], &[0.0, 1.0, 0.0], &[0.0, 0.0, 1.0]]);
        let ps = ChainLimits::new(&p).unwrap().cesaro().clone();
        assert_abs_diff_eq!(ps[(0, 1)], 0.3 / 0.8, epsilon = 1e-12);
        assert_abs_diff_eq!(ps[(0, 2)], 0.5 / 0.8, epsilon = 1e-12);
    }

    #[test]
    fn expansion_matches_discounted_values_near_one() {
        let p = mat(&[&[0.1, 0.6, 0.3], &[0.5, 0.0, 0.5], &[0.2, 0.2, 0.6]]);
        let r = [1.0, -0.5, 0.25];
        let lim = ChainLimits::new(&p).unwrap();
        let y = lim.coefficients(&r, 4);
        let gamma: f64 = 0.99;
        let rho = (1.0 - gamma) / gamma;
        let v = solve_discounted(&p, gamma, &r).unwrap();
        for s in 0..3 {
            let mut approx = 0.0;
            for (k, coef) in y.iter().enumerate() {
                approx += rho.powi(k as i32 - 1) * coef[s];
            }
            assert_abs_diff_eq!((1.0 + rho) * approx, v[s], epsilon = 1e-8);
        }
    }

    #[test]
    fn blackwell_prefers_shorter_route_to_same_loop() {
        // s0 -a-> s1 -> s2 (loop), s0 -b-> s2 directly; reward only at s2
        let m = RewardlessMdp::deterministic(
            vec!["s0".into(), "s1".into(), "s2".into()],
            vec!["a".into(), "b".into()],
            &[vec![1, 2], vec![2, 2], vec![2, 2]],
        )
        .unwrap();
        let r = RewardFunction::state(vec![0.0, 0.0, 1.0]);
        let sol = blackwell_optimal(&m, &r).unwrap();
        for g in sol.gain() {
            assert_abs_diff_eq!(*g, 1.0, epsilon = 1e-12);
        }
        assert_eq!(sol.action_sets[0], vec![1]);
        assert_eq!(sol.action_sets[1], vec![0, 1]);
    }
}
