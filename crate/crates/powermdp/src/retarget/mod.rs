//! Retargetable decision rules: closed-form rule probabilities, orbit-level tendency
//! counts, and an ε-greedy bandit trainer.

pub mod bandit;
pub mod rules;

pub use bandit::{bandit_orbit_check, bandit_train_prob, BanditConfig};
pub use rules::{decision_prob, expected_utility, quantilize_prob, DecisionRule, OutcomeProblem};

use crate::error::{Error, Result};
use crate::power::orbit::OrbitMode;
use itertools::Itertools;
use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use std::collections::HashSet;

/// Largest parameter dimension whose orbit is enumerated in full.
pub const MAX_ORBIT_DIM: usize = 8;

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct TendencyCheck {
    /// Orbit elements with `f(B | u') > f(A | u')`.
    pub b_greater: usize,
    pub a_greater: usize,
    pub ties: usize,
    pub orbit_size: usize,
    /// False when the counts come from sampled permutations.
    pub exhaustive: bool,
    pub n: usize,
    pub holds: bool,
}

/// Distinct permutations of `u`, or `count` sampled ones (duplicates kept) in sampled mode.
pub fn utility_orbit(u: &[f64], mode: OrbitMode) -> Result<(Vec<Vec<f64>>, bool)> {
    let d = u.len();
    match mode {
        OrbitMode::Exact => {
            if d > MAX_ORBIT_DIM {
                let size: f64 = (1..=d).map(|k| k as f64).product();
                return Err(Error::size_cap("utility orbit (d!)", size, 40_320.0));
            }
            let mut seen = HashSet::new();
            let mut out = Vec::new();
            for p in (0..d).permutations(d) {
                let v: Vec<f64> = p.iter().map(|&i| u[i]).collect();
                if seen.insert(v.iter().map(|x| x.to_bits()).collect::<Vec<_>>()) {
                    out.push(v);
                }
            }
            Ok((out, true))
        }
        OrbitMode::Sampled { permutations, seed } => {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let out = (0..permutations)
                .map(|_| {
                    let mut v = u.to_vec();
                    v.shuffle(&mut rng);
                    v
                })
                .collect();
            Ok((out, false))
        }
    }
}

/// Count orbit elements by which of `f(A | u')`, `f(B | u')` (as returned by `eval`) is larger.
pub fn tally_tendency<F>(u: &[f64], n: usize, mode: OrbitMode, eval: F) -> Result<TendencyCheck>
where
    F: Fn(&[f64]) -> Result<(f64, f64)>,
{
    let (orbit, exhaustive) = utility_orbit(u, mode)?;
    let mut t = TendencyCheck {
        b_greater: 0,
        a_greater: 0,
        ties: 0,
        orbit_size: orbit.len(),
        exhaustive,
        n,
        holds: false,
    };
    for v in &orbit {
        let (fa, fb) = eval(v)?;
        if fb > fa {
            t.b_greater += 1;
        } else if fa > fb {
            t.a_greater += 1;
        } else {
            t.ties += 1;
        }
    }
    t.holds = t.b_greater >= n * t.a_greater;
    Ok(t)
}

/// Compare `f(B | ·)` against `f(A | ·)` over the permutation orbit of `u`.
pub fn orbit_tendency_check(
    rule: &DecisionRule,
    problem: &OutcomeProblem,
    u: &[f64],
    n: usize,
    mode: OrbitMode,
) -> Result<TendencyCheck> {
    problem.validate()?;
    rule.validate(problem)?;
    problem.utilities(u)?;
    tally_tendency(u, n, mode, |v| {
        Ok((decision_prob(rule, &problem.a, problem, v)?, decision_prob(rule, &problem.b, problem, v)?))
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn orbit_dedups_repeated_entries() {
        let (o, ex) = utility_orbit(&[1.0, 1.0, 2.0], OrbitMode::Exact).unwrap();
        assert!(ex);
        assert_eq!(o.len(), 3);
        let (o, _) = utility_orbit(&[0.0; 9], OrbitMode::Sampled { permutations: 5, seed: 1 }).unwrap();
        assert_eq!(o.len(), 5);
        assert!(matches!(utility_orbit(&[0.0; 9], OrbitMode::Exact), Err(Error::SizeCap { .. })));
    }

    #[test]
    fn stubborn_never_retargets() {
        let p = OutcomeProblem::cards();
        let t = orbit_tendency_check(&DecisionRule::Stubborn { index: 2 }, &p, &[10.0, 5.0, 0.0], 1, OrbitMode::Exact)
            .unwrap();
        assert_eq!((t.b_greater, t.a_greater), (0, 6));
        assert!(!t.holds);
    }
}
