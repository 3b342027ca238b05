//! Visit distribution functions, recurrent state distributions and child distributions.

pub mod lp;

use crate::error::{Error, Result};
use crate::mdp::laurent::cesaro_limit;
use crate::mdp::{unit, Policy, RewardlessMdp};
use lp::{classify_all, Dominance};
use nalgebra::{DMatrix, DVector};

/// Discounts at which two visit functions must agree to be treated as the same function.
pub const WITNESS_GAMMAS: [f64; 3] = [0.25, 0.5, 0.75];
pub const DEDUP_TOL: f64 = 1e-10;
pub const DEFAULT_CAP: f64 = 1e6;
/// Discount at which non-domination of visit functions is decided.
pub const ND_GAMMA: f64 = 0.5;

/// `f^π_s(γ) = (I - γ (T^π)ᵀ)^{-1} e_s` for row-stochastic `T^π`.
pub fn visit_distribution(mdp: &RewardlessMdp, pi: &Policy, s: usize, gamma: f64) -> Result<Vec<f64>> {
    pi.check(mdp)?;
    if s >= mdp.n_states() {
        return Err(Error::input(format!("state index {s} out of range")));
    }
    if !(0.0..1.0).contains(&gamma) {
        return Err(Error::domain(format!(
            "visit distributions need a discount in [0, 1), got {gamma}; use the recurrent state distribution at 1"
        )));
    }
    Ok(visit_from_rows(&pi.rows(mdp), s, gamma))
}

fn visit_from_rows(p: &DMatrix<f64>, s: usize, gamma: f64) -> Vec<f64> {
    let n = p.nrows();
    let a = DMatrix::identity(n, n) - p.transpose() * gamma;
    // I - γPᵀ is strictly diagonally dominant by columns for γ < 1, so LU never fails
    a.lu()
        .solve(&DVector::from_vec(unit(n, s)))
        .expect("I - γPᵀ is nonsingular")
        .as_slice()
        .to_vec()
}

#[derive(Clone, Debug)]
pub struct VisitFunction {
    pub policy: Policy,
    pub start: usize,
    /// Values at each of [`WITNESS_GAMMAS`].
    pub witness: Vec<Vec<f64>>,
}

impl VisitFunction {
    fn new(mdp: &RewardlessMdp, policy: Policy, start: usize) -> Self {
        let p = policy.rows(mdp);
        let witness = WITNESS_GAMMAS.iter().map(|&g| visit_from_rows(&p, start, g)).collect();
        VisitFunction { policy, start, witness }
    }

    pub fn eval(&self, mdp: &RewardlessMdp, gamma: f64) -> Result<Vec<f64>> {
        visit_distribution(mdp, &self.policy, self.start, gamma)
    }

    /// The function evaluated at `γ = 1/2`.
    pub fn at_half(&self) -> &[f64] {
        &self.witness[1]
    }

    fn agrees_with(&self, other: &VisitFunction) -> bool {
        self.witness.iter().zip(&other.witness).all(|(a, b)| {
            a.iter().zip(b).all(|(x, y)| (x - y).abs() <= DEDUP_TOL)
        })
    }
}

#[derive(Clone, Debug)]
pub struct VisitSet {
    pub start: usize,
    pub functions: Vec<VisitFunction>,
    pub witness_gammas: [f64; 3],
}

impl VisitSet {
    pub fn len(&self) -> usize {
        self.functions.len()
    }

    pub fn is_empty(&self) -> bool {
        self.functions.is_empty()
    }

    /// Members whose classification is non-dominated.
    pub fn select(&self, status: &[Dominance]) -> VisitSet {
        VisitSet {
            start: self.start,
            functions: self
                .functions
                .iter()
                .zip(status)
                .filter(|(_, d)| d.is_non_dominated())
                .map(|(f, _)| f.clone())
                .collect(),
            witness_gammas: self.witness_gammas,
        }
    }
}

/// Enumeration settings: a cap on the branching product and optional forced choices.
#[derive(Clone, Debug)]
pub struct EnumOptions {
    pub cap: f64,
    /// `(state, action)` pairs every enumerated policy must respect.
    pub forced: Vec<(usize, usize)>,
}

impl Default for EnumOptions {
    fn default() -> Self {
        EnumOptions { cap: DEFAULT_CAP, forced: Vec::new() }
    }
}

/// Upper bound on the number of distinct policies that matter from `s`.
pub fn branching_bound(mdp: &RewardlessMdp, s: usize) -> f64 {
    mdp.reachable_from(s)
        .iter()
        .enumerate()
        .filter(|(_, r)| **r)
        .map(|(u, _)| mdp.distinct_actions(u).len() as f64)
        .product()
}

pub fn enumerate_visit_functions(mdp: &RewardlessMdp, s: usize) -> Result<VisitSet> {
    enumerate_visit_functions_with(mdp, s, &EnumOptions::default())
}

pub fn enumerate_visit_functions_with(
    mdp: &RewardlessMdp,
    s: usize,
    opts: &EnumOptions,
) -> Result<VisitSet> {
    let policies = enumerate_policies(mdp, s, opts)?;
    let functions: Vec<VisitFunction> =
        policies.into_iter().map(|pi| VisitFunction::new(mdp, pi, s)).collect();
    Ok(VisitSet { start: s, functions: dedup(functions), witness_gammas: WITNESS_GAMMAS })
}

/// Policies that differ on the part of the state space they actually reach from `s`.
/// States never visited keep action 0 unless forced.
pub fn enumerate_policies(mdp: &RewardlessMdp, s: usize, opts: &EnumOptions) -> Result<Vec<Policy>> {
    let ns = mdp.n_states();
    if s >= ns {
        return Err(Error::input(format!("state index {s} out of range")));
    }
    let mut forced: Vec<Option<usize>> = vec![None; ns];
    for &(fs, fa) in &opts.forced {
        if fs >= ns || fa >= mdp.n_actions() {
            return Err(Error::input(format!("forced choice ({fs}, {fa}) out of range")));
        }
        if forced[fs].is_some_and(|prev| prev != fa) {
            return Err(Error::input(format!("conflicting forced actions at state {fs}")));
        }
        forced[fs] = Some(fa);
    }
    let choices: Vec<Vec<usize>> = (0..ns)
        .map(|u| match forced[u] {
            Some(a) => vec![a],
            None => mdp.distinct_actions(u),
        })
        .collect();
    let reach = mdp.reachable_from(s);
    let bound: f64 = (0..ns).filter(|&u| reach[u]).map(|u| choices[u].len() as f64).product();
    if bound > opts.cap {
        return Err(Error::size_cap(
            format!("policy enumeration from state '{}'", mdp.state_names()[s]),
            bound,
            opts.cap,
        ));
    }

    let mut out = Vec::new();
    let mut assigned: Vec<Option<usize>> = vec![None; ns];
    dfs(mdp, s, &choices, &forced, &mut assigned, &mut out);
    Ok(out)
}

fn dfs(
    mdp: &RewardlessMdp,
    s: usize,
    choices: &[Vec<usize>],
    forced: &[Option<usize>],
    assigned: &mut Vec<Option<usize>>,
    out: &mut Vec<Policy>,
) {
    // first state reachable under the partial policy that still lacks an action
    let open = {
        let mut seen = vec![false; mdp.n_states()];
        let mut queue = std::collections::VecDeque::from([s]);
        seen[s] = true;
        let mut found = None;
        while let Some(u) = queue.pop_front() {
            match assigned[u] {
                None => {
                    found = Some(u);
                    break;
                }
                Some(a) => {
                    for t in mdp.successors(u, a) {
                        if !seen[t] {
                            seen[t] = true;
                            queue.push_back(t);
                        }
                    }
                }
            }
        }
        found
    };
    match open {
        None => {
            let acts = (0..mdp.n_states())
                .map(|u| assigned[u].or(forced[u]).unwrap_or(0))
                .collect();
            out.push(Policy(acts));
        }
        Some(u) => {
            for &a in &choices[u] {
                assigned[u] = Some(a);
                dfs(mdp, s, choices, forced, assigned, out);
            }
            assigned[u] = None;
        }
    }
}

fn dedup(functions: Vec<VisitFunction>) -> Vec<VisitFunction> {
    let key = |f: &VisitFunction| f.at_half().first().copied().unwrap_or(0.0);
    let mut order: Vec<usize> = (0..functions.len()).collect();
    order.sort_by(|&a, &b| key(&functions[a]).total_cmp(&key(&functions[b])).then(a.cmp(&b)));
    let mut kept: Vec<usize> = Vec::new();
    for &i in &order {
        let ki = key(&functions[i]);
        let dup = kept
            .iter()
            .rev()
            .take_while(|&&j| ki - key(&functions[j]) <= DEDUP_TOL)
            .any(|&j| functions[i].agrees_with(&functions[j]));
        if !dup {
            kept.push(i);
        }
    }
    // restore enumeration order
    kept.sort_unstable();
    let mut slots: Vec<Option<VisitFunction>> = functions.into_iter().map(Some).collect();
    kept.into_iter().map(|i| slots[i].take().unwrap()).collect()
}

/// Classify every member by the strict-optimality test at `γ = 1/2`.
pub fn non_dominated(set: &VisitSet) -> Result<Vec<Dominance>> {
    let vecs: Vec<Vec<f64>> = set.functions.iter().map(|f| f.at_half().to_vec()).collect();
    classify_all(&vecs)
}

/// The non-dominated subset `Fnd(s)`. Errors if any member is indeterminate.
pub fn non_dominated_set(set: &VisitSet) -> Result<VisitSet> {
    let status = non_dominated(set)?;
    if let Some((i, d)) = status.iter().enumerate().find(|(_, d)| matches!(d, Dominance::Indeterminate { .. })) {
        return Err(Error::Numerical(format!(
            "visit function {i} has a degenerate optimality margin {:.3e}",
            d.margin()
        )));
    }
    Ok(set.select(&status))
}

#[derive(Clone, Debug, PartialEq)]
pub struct Rsd {
    pub dist: Vec<f64>,
    pub policy: Policy,
    pub start: usize,
}

/// Long-run state distribution of `π` from `s`: row `s` of the Cesàro limit.
pub fn rsd(mdp: &RewardlessMdp, pi: &Policy, s: usize) -> Result<Rsd> {
    pi.check(mdp)?;
    if s >= mdp.n_states() {
        return Err(Error::input(format!("state index {s} out of range")));
    }
    let star = cesaro_limit(&pi.rows(mdp))?;
    let dist = star.row(s).iter().copied().collect();
    Ok(Rsd { dist, policy: pi.clone(), start: s })
}

pub fn rsd_set(mdp: &RewardlessMdp, s: usize) -> Result<Vec<Rsd>> {
    rsd_set_with(mdp, s, &EnumOptions::default())
}

pub fn rsd_set_with(mdp: &RewardlessMdp, s: usize, opts: &EnumOptions) -> Result<Vec<Rsd>> {
    let mut out: Vec<Rsd> = Vec::new();
    for pi in enumerate_policies(mdp, s, opts)? {
        let d = rsd(mdp, &pi, s)?;
        let dup = out
            .iter()
            .any(|o| o.dist.iter().zip(&d.dist).all(|(x, y)| (x - y).abs() <= DEDUP_TOL));
        if !dup {
            out.push(d);
        }
    }
    Ok(out)
}

pub fn rsd_nondominated(mdp: &RewardlessMdp, s: usize) -> Result<Vec<(Rsd, Dominance)>> {
    let set = rsd_set(mdp, s)?;
    let vecs: Vec<Vec<f64>> = set.iter().map(|d| d.dist.clone()).collect();
    Ok(set.into_iter().zip(classify_all(&vecs)?).collect())
}

#[derive(Clone, Debug, PartialEq)]
pub struct ChildDistribution {
    pub dist: Vec<f64>,
    /// All actions at the state producing this distribution.
    pub actions: Vec<usize>,
}

impl ChildDistribution {
    pub fn action(&self) -> usize {
        self.actions[0]
    }
}

pub fn child_distributions(mdp: &RewardlessMdp, s: usize) -> Vec<ChildDistribution> {
    mdp.distinct_actions(s)
        .into_iter()
        .map(|rep| ChildDistribution {
            dist: mdp.row(s, rep).to_vec(),
            actions: (0..mdp.n_actions()).filter(|&a| mdp.equivalent_actions(s, a, rep)).collect(),
        })
        .collect()
}

pub fn classify_child_distributions(
    mdp: &RewardlessMdp,
    s: usize,
) -> Result<Vec<(ChildDistribution, Dominance)>> {
    let ch = child_distributions(mdp, s);
    let vecs: Vec<Vec<f64>> = ch.iter().map(|c| c.dist.clone()).collect();
    Ok(ch.into_iter().zip(classify_all(&vecs)?).collect())
}

pub fn nd_child_distributions(mdp: &RewardlessMdp, s: usize) -> Result<Vec<ChildDistribution>> {
    let mut out = Vec::new();
    for (c, d) in classify_child_distributions(mdp, s)? {
        match d {
            Dominance::NonDominated { .. } => out.push(c),
            Dominance::Dominated { .. } => {}
            Dominance::Indeterminate { margin, .. } => {
                return Err(Error::Numerical(format!(
                    "child distribution of action '{}' has a degenerate optimality margin {margin:.3e}",
                    mdp.action_names()[c.action()]
                )))
            }
        }
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    fn two_cycle() -> RewardlessMdp {
        RewardlessMdp::deterministic(
            vec!["a".into(), "b".into()],
            vec!["go".into()],
            &[vec![1], vec![0]],
        )
        .unwrap()
    }

    #[test]
    fn self_loop_geometric() {
        let m = RewardlessMdp::deterministic(vec!["s".into()], vec!["stay".into()], &[vec![0]]).unwrap();
        let f = visit_distribution(&m, &Policy(vec![0]), 0, 0.5).unwrap();
        assert_abs_diff_eq!(f[0], 2.0, epsilon = 1e-12);
    }

    #[test]
    fn two_cycle_neumann() {
        let m = two_cycle();
        let g = 0.7;
        let f = visit_distribution(&m, &Policy(vec![0, 0]), 0, g).unwrap();
        assert_abs_diff_eq!(f[0], 1.0 / (1.0 - g * g), epsilon = 1e-12);
        assert_abs_diff_eq!(f[1], g / (1.0 - g * g), epsilon = 1e-12);
    }

    #[test]
    fn discount_one_rejected() {
        let m = two_cycle();
        let err = visit_distribution(&m, &Policy(vec![0, 0]), 0, 1.0).unwrap_err();
        assert!(matches!(err, Error::Domain(_)));
    }

    #[test]
    fn cap_is_enforced() {
        let m = RewardlessMdp::deterministic(
            vec!["a".into(), "b".into()],
            vec!["x".into(), "y".into()],
            &[vec![0, 1], vec![0, 1]],
        )
        .unwrap();
        let opts = EnumOptions { cap: 3.0, forced: vec![] };
        let err = enumerate_visit_functions_with(&m, 0, &opts).unwrap_err();
        assert!(matches!(err, Error::SizeCap { .. }));
        assert_eq!(enumerate_visit_functions(&m, 0).unwrap().len(), 3);
    }

    #[test]
    fn forced_choice_restricts() {
        let m = RewardlessMdp::deterministic(
            vec!["a".into(), "b".into()],
            vec!["x".into(), "y".into()],
            &[vec![0, 1], vec![0, 1]],
        )
        .unwrap();
        let opts = EnumOptions { cap: DEFAULT_CAP, forced: vec![(0, 1)] };
        let set = enumerate_visit_functions_with(&m, 0, &opts).unwrap();
        assert_eq!(set.len(), 2);
        assert!(set.functions.iter().all(|f| f.policy.0[0] == 1));
    }

    #[test]
    fn bifurcated_action_is_dominated() {
        let m = RewardlessMdp::new(
            vec!["s1".into(), "s2".into(), "s3".into()],
            vec!["l".into(), "r".into(), "mix".into()],
            vec![
                vec![vec![0.0, 1.0, 0.0], vec![0.0, 0.0, 1.0], vec![0.0, 0.5, 0.5]],
                vec![vec![0.0, 1.0, 0.0]; 3],
                vec![vec![0.0, 0.0, 1.0]; 3],
            ],
        )
        .unwrap();
        let cls = classify_child_distributions(&m, 0).unwrap();
        assert!(cls[0].1.is_non_dominated());
        assert!(cls[1].1.is_non_dominated());
        assert!(matches!(cls[2].1, Dominance::Dominated { .. }));
        assert_eq!(nd_child_distributions(&m, 0).unwrap().len(), 2);
    }

    #[test]
    fn rsd_of_cycle_is_average() {
        let d = rsd(&two_cycle(), &Policy(vec![0, 0]), 0).unwrap();
        assert_abs_diff_eq!(d.dist[0], 0.5, epsilon = 1e-12);
        assert_abs_diff_eq!(d.dist[1], 0.5, epsilon = 1e-12);
    }
}
