//! Finite rewardless MDPs, reward functions and deterministic stationary policies.

mod io;
pub mod laurent;
pub(crate) mod linalg;
mod solve;

pub use solve::{
    eps_optimal_actions, evaluate_policy, normalized_optimal_values, normalized_policy_values,
    optimal_actions, optimal_q, optimal_solution, optimal_value, policy_matrix, q_from_values,
    transfer_reward, OptimalSolution, PolicySetReport, DEFAULT_TOL,
};

use crate::error::{Error, Result};

/// Row-sum slack accepted when loading transition data.
pub const ROW_SUM_TOL: f64 = 1e-9;
/// Two actions are equivalent when their rows agree entrywise within this.
pub const EQUIV_TOL: f64 = 1e-12;

#[derive(Clone, Debug, PartialEq)]
pub struct RewardlessMdp {
    states: Vec<String>,
    actions: Vec<String>,
    // indexed by (s * |A| + a) * |S| + s'
    trans: Vec<f64>,
}

impl RewardlessMdp {
    /// `transitions[s][a]` is the next-state distribution for taking `a` in `s`.
    pub fn new(
        states: Vec<String>,
        actions: Vec<String>,
        transitions: Vec<Vec<Vec<f64>>>,
    ) -> Result<Self> {
        let ns = states.len();
        let na = actions.len();
        if ns == 0 || na == 0 {
            return Err(Error::input("an MDP needs at least one state and one action"));
        }
        check_unique(&states, "state")?;
        check_unique(&actions, "action")?;
        if transitions.len() != ns {
            return Err(Error::input(format!(
                "expected transitions for {ns} states, got {}",
                transitions.len()
            )));
        }
        let mut trans = Vec::with_capacity(ns * na * ns);
        for (s, per_action) in transitions.iter().enumerate() {
            if per_action.len() != na {
                return Err(Error::input(format!(
                    "state {}: expected {na} actions, got {}",
                    states[s],
                    per_action.len()
                )));
            }
            for (a, row) in per_action.iter().enumerate() {
                if row.len() != ns {
                    return Err(Error::input(format!(
                        "transition ({}, {}) has length {}, expected {ns}",
                        states[s],
                        actions[a],
                        row.len()
                    )));
                }
                check_row(row).map_err(|m| {
                    Error::input(format!("transition ({}, {}): {m}", states[s], actions[a]))
                })?;
                trans.extend_from_slice(row);
            }
        }
        Ok(RewardlessMdp { states, actions, trans })
    }

    /// Deterministic MDP from a successor table `succ[s][a]`.
    pub fn deterministic(
        states: Vec<String>,
        actions: Vec<String>,
        succ: &[Vec<usize>],
    ) -> Result<Self> {
        let ns = states.len();
        let rows = succ
            .iter()
            .map(|per| {
                per.iter()
                    .map(|&t| {
                        if t >= ns {
                            return Err(Error::input(format!("successor index {t} out of range")));
                        }
                        let mut row = vec![0.0; ns];
                        row[t] = 1.0;
                        Ok(row)
                    })
                    .collect::<Result<Vec<_>>>()
            })
            .collect::<Result<Vec<_>>>()?;
        Self::new(states, actions, rows)
    }

    pub fn n_states(&self) -> usize {
        self.states.len()
    }

    pub fn n_actions(&self) -> usize {
        self.actions.len()
    }

    pub fn state_names(&self) -> &[String] {
        &self.states
    }

    pub fn action_names(&self) -> &[String] {
        &self.actions
    }

    pub fn state_index(&self, name: &str) -> Result<usize> {
        self.states
            .iter()
            .position(|s| s == name)
            .ok_or_else(|| Error::input(format!("unknown state '{name}'")))
    }

    pub fn action_index(&self, name: &str) -> Result<usize> {
        self.actions
            .iter()
            .position(|a| a == name)
            .ok_or_else(|| Error::input(format!("unknown action '{name}'")))
    }

    #[inline]
    pub fn row(&self, s: usize, a: usize) -> &[f64] {
        let ns = self.n_states();
        let start = (s * self.n_actions() + a) * ns;
        &self.trans[start..start + ns]
    }

    /// Expected value of `v` at the successor of `(s, a)`.
    #[inline]
    pub fn expect(&self, s: usize, a: usize, v: &[f64]) -> f64 {
        self.row(s, a).iter().zip(v).map(|(p, x)| p * x).sum()
    }

    pub fn equivalent_actions(&self, s: usize, a: usize, b: usize) -> bool {
        self.row(s, a)
            .iter()
            .zip(self.row(s, b))
            .all(|(x, y)| (x - y).abs() <= EQUIV_TOL)
    }

    /// One representative action per equivalence class at `s`, lowest index first.
    pub fn distinct_actions(&self, s: usize) -> Vec<usize> {
        let mut reps: Vec<usize> = Vec::new();
        for a in 0..self.n_actions() {
            if !reps.iter().any(|&b| self.equivalent_actions(s, a, b)) {
                reps.push(a);
            }
        }
        reps
    }

    pub fn successors(&self, s: usize, a: usize) -> impl Iterator<Item = usize> + '_ {
        self.row(s, a)
            .iter()
            .enumerate()
            .filter(|(_, p)| **p > 0.0)
            .map(|(t, _)| t)
    }

    /// States reachable from `s` under some sequence of actions (including `s`).
    pub fn reachable_from(&self, s: usize) -> Vec<bool> {
        let mut seen = vec![false; self.n_states()];
        let mut stack = vec![s];
        seen[s] = true;
        while let Some(u) = stack.pop() {
            for a in 0..self.n_actions() {
                for t in self.successors(u, a) {
                    if !seen[t] {
                        seen[t] = true;
                        stack.push(t);
                    }
                }
            }
        }
        seen
    }

    /// Fewest steps needed to reach `target` from every state; `None` if unreachable.
    pub fn distances_to(&self, target: usize) -> Vec<Option<usize>> {
        let ns = self.n_states();
        let mut dist = vec![None; ns];
        dist[target] = Some(0);
        let mut frontier = vec![target];
        let mut d = 0;
        while !frontier.is_empty() {
            d += 1;
            let mut next = Vec::new();
            for u in 0..ns {
                if dist[u].is_some() {
                    continue;
                }
                let hit = (0..self.n_actions())
                    .any(|a| self.successors(u, a).any(|t| frontier.contains(&t)));
                if hit {
                    dist[u] = Some(d);
                    next.push(u);
                }
            }
            frontier = next;
        }
        dist
    }

    pub fn is_locally_deterministic(&self, s: usize) -> bool {
        (0..self.n_actions()).all(|a| self.row(s, a).iter().any(|&p| p == 1.0))
    }
}

fn check_unique(names: &[String], what: &str) -> Result<()> {
    for (i, n) in names.iter().enumerate() {
        if names[..i].contains(n) {
            return Err(Error::input(format!("duplicate {what} name '{n}'")));
        }
    }
    Ok(())
}

fn check_row(row: &[f64]) -> std::result::Result<(), String> {
    for &p in row {
        if !p.is_finite() || !(0.0..=1.0).contains(&p) {
            return Err(format!("probability {p} outside [0, 1]"));
        }
    }
    let sum: f64 = row.iter().sum();
    if (sum - 1.0).abs() > ROW_SUM_TOL {
        return Err(format!("row sums to {sum}"));
    }
    Ok(())
}

/// State-based or state-action reward.
#[derive(Clone, Debug, PartialEq)]
pub enum RewardFunction {
    State(Vec<f64>),
    StateAction { n_actions: usize, values: Vec<f64> },
}

impl RewardFunction {
    pub fn state(values: Vec<f64>) -> Self {
        RewardFunction::State(values)
    }

    /// `values[s][a]`.
    pub fn state_action(values: Vec<Vec<f64>>) -> Result<Self> {
        let n_actions = values.first().map_or(0, |r| r.len());
        if values.iter().any(|r| r.len() != n_actions) {
            return Err(Error::input("ragged state-action reward table"));
        }
        Ok(RewardFunction::StateAction { n_actions, values: values.concat() })
    }

    #[inline]
    pub fn at(&self, s: usize, a: usize) -> f64 {
        match self {
            RewardFunction::State(v) => v[s],
            RewardFunction::StateAction { n_actions, values } => values[s * n_actions + a],
        }
    }

    pub fn as_state(&self) -> Option<&[f64]> {
        match self {
            RewardFunction::State(v) => Some(v),
            RewardFunction::StateAction { .. } => None,
        }
    }

    pub fn negated(&self) -> Self {
        match self {
            RewardFunction::State(v) => RewardFunction::State(v.iter().map(|x| -x).collect()),
            RewardFunction::StateAction { n_actions, values } => RewardFunction::StateAction {
                n_actions: *n_actions,
                values: values.iter().map(|x| -x).collect(),
            },
        }
    }

    pub fn check(&self, mdp: &RewardlessMdp) -> Result<()> {
        let (len, expected) = match self {
            RewardFunction::State(v) => (v.len(), mdp.n_states()),
            RewardFunction::StateAction { n_actions, values } => {
                if *n_actions != mdp.n_actions() {
                    return Err(Error::input("reward action count does not match the MDP"));
                }
                (values.len(), mdp.n_states() * mdp.n_actions())
            }
        };
        if len != expected {
            return Err(Error::input(format!(
                "reward has {len} entries, expected {expected}"
            )));
        }
        let finite = match self {
            RewardFunction::State(v) => v.iter().all(|x| x.is_finite()),
            RewardFunction::StateAction { values, .. } => values.iter().all(|x| x.is_finite()),
        };
        if !finite {
            return Err(Error::input("reward entries must be finite"));
        }
        Ok(())
    }
}

/// Deterministic stationary policy: `actions[s]` is taken in state `s`.
#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub struct Policy(pub Vec<usize>);

impl Policy {
    pub fn constant(mdp: &RewardlessMdp, a: usize) -> Self {
        Policy(vec![a; mdp.n_states()])
    }

    pub fn check(&self, mdp: &RewardlessMdp) -> Result<()> {
        if self.0.len() != mdp.n_states() {
            return Err(Error::input(format!(
                "policy covers {} states, MDP has {}",
                self.0.len(),
                mdp.n_states()
            )));
        }
        if let Some(&a) = self.0.iter().find(|&&a| a >= mdp.n_actions()) {
            return Err(Error::input(format!("unknown action index {a} in policy")));
        }
        Ok(())
    }

    /// Every deterministic stationary policy, in odometer order.
    pub fn enumerate(mdp: &RewardlessMdp) -> impl Iterator<Item = Policy> {
        let ns = mdp.n_states();
        let na = mdp.n_actions();
        let total = (na as u64).checked_pow(ns as u32).unwrap_or(u64::MAX);
        (0..total).map(move |mut k| {
            let mut acts = vec![0; ns];
            for slot in acts.iter_mut() {
                *slot = (k % na as u64) as usize;
                k /= na as u64;
            }
            Policy(acts)
        })
    }

    /// Row-stochastic transition matrix `P[s][s'] = T(s, π(s), s')`.
    pub(crate) fn rows(&self, mdp: &RewardlessMdp) -> nalgebra::DMatrix<f64> {
        let ns = mdp.n_states();
        nalgebra::DMatrix::from_fn(ns, ns, |s, t| mdp.row(s, self.0[s])[t])
    }
}

/// Propagate a state distribution `steps` times under `pi`; returns d_0..=d_steps.
pub fn state_distributions(
    mdp: &RewardlessMdp,
    pi: &Policy,
    start: &[f64],
    steps: usize,
) -> Vec<Vec<f64>> {
    let ns = mdp.n_states();
    let mut out = Vec::with_capacity(steps + 1);
    out.push(start.to_vec());
    for _ in 0..steps {
        let cur = out.last().unwrap();
        let mut next = vec![0.0; ns];
        for (s, &mass) in cur.iter().enumerate() {
            if mass == 0.0 {
                continue;
            }
            for (t, p) in mdp.row(s, pi.0[s]).iter().enumerate() {
                next[t] += mass * p;
            }
        }
        out.push(next);
    }
    out
}

pub fn unit(n: usize, i: usize) -> Vec<f64> {
    let mut v = vec![0.0; n];
    v[i] = 1.0;
    v
}

pub fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

#[cfg(test)]
mod tests {
    use super::*;

    fn chain() -> RewardlessMdp {
        RewardlessMdp::deterministic(
            vec!["s1".into(), "s2".into()],
            vec!["go".into()],
            &[vec![1], vec![1]],
        )
        .unwrap()
    }

    #[test]
    fn rejects_bad_rows() {
        let err = RewardlessMdp::new(
            vec!["a".into()],
            vec!["x".into()],
            vec![vec![vec![0.9]]],
        );
        assert!(matches!(err, Err(Error::Input(_))));
        let dup = RewardlessMdp::new(
            vec!["a".into(), "a".into()],
            vec!["x".into()],
            vec![vec![vec![1.0, 0.0]], vec![vec![0.0, 1.0]]],
        );
        assert!(dup.is_err());
    }

    #[test]
    fn reachability_and_distances() {
        let m = chain();
        assert_eq!(m.reachable_from(0), vec![true, true]);
        assert_eq!(m.reachable_from(1), vec![false, true]);
        assert_eq!(m.distances_to(1), vec![Some(1), Some(0)]);
        assert_eq!(m.distances_to(0), vec![Some(0), None]);
    }

    #[test]
    fn enumerates_all_policies() {
        let m = RewardlessMdp::deterministic(
            vec!["a".into(), "b".into(), "c".into()],
            vec!["x".into(), "y".into()],
            &[vec![0, 1], vec![1, 2], vec![2, 0]],
        )
        .unwrap();
        let all: Vec<_> = Policy::enumerate(&m).collect();
        assert_eq!(all.len(), 8);
        assert_eq!(all[1], Policy(vec![1, 0, 0]));
        assert_eq!(m.distinct_actions(0), vec![0, 1]);
    }

    #[test]
    fn distributions_propagate() {
        let m = chain();
        let d = state_distributions(&m, &Policy(vec![0, 0]), &[1.0, 0.0], 2);
        assert_eq!(d[1], vec![0.0, 1.0]);
        assert_eq!(d[2], vec![0.0, 1.0]);
    }
}
