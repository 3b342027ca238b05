//! Per-sample evaluation of optimal values for state-based rewards.

use crate::error::{Error, Result};
use crate::mdp::{dot, optimal_value, unit, RewardFunction, RewardlessMdp};
use crate::visit::lp::{classify_all, Dominance};
use crate::visit::{child_distributions, enumerate_visit_functions, rsd_set};

/// What an oracle reports for a sampled reward `r` at state `s`.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Quantity {
    /// `V*_r(s, γ)`; needs `γ < 1`.
    Value,
    /// `(1-γ) V*_r(s, γ)` with its limits at 0 and 1.
    NormalizedValue,
    /// `(1-γ)/γ · (V*_r(s, γ) - r(s))` with its limits at 0 and 1.
    Power,
}

pub struct StateOracle<'a> {
    kind: Kind<'a>,
}

enum Kind<'a> {
    /// `max_i c_i · r`
    Table(Vec<Vec<f64>>),
    Solve { mdp: &'a RewardlessMdp, s: usize, gamma: f64, quantity: Quantity },
}

impl<'a> StateOracle<'a> {
    pub fn new(mdp: &'a RewardlessMdp, s: usize, gamma: f64, quantity: Quantity) -> Result<Self> {
        if !(0.0..=1.0).contains(&gamma) {
            return Err(Error::domain(format!("discount {gamma} outside [0, 1]")));
        }
        let ns = mdp.n_states();
        let vecs = if gamma == 1.0 {
            match quantity {
                Quantity::Value => {
                    return Err(Error::domain("the unnormalized optimal value diverges at discount 1"))
                }
                _ => rsd_set(mdp, s)?.into_iter().map(|d| d.dist).collect(),
            }
        } else if gamma == 0.0 {
            match quantity {
                Quantity::Power => child_distributions(mdp, s).into_iter().map(|c| c.dist).collect(),
                _ => vec![unit(ns, s)],
            }
        } else {
            let set = match enumerate_visit_functions(mdp, s) {
                Ok(set) => set,
                Err(Error::SizeCap { .. }) => {
                    return Ok(StateOracle { kind: Kind::Solve { mdp, s, gamma, quantity } })
                }
                Err(e) => return Err(e),
            };
            let mut vecs = Vec::with_capacity(set.len());
            for f in &set.functions {
                let v = f.eval(mdp, gamma)?;
                vecs.push(match quantity {
                    Quantity::Value => v,
                    Quantity::NormalizedValue => v.iter().map(|x| (1.0 - gamma) * x).collect(),
                    Quantity::Power => {
                        let k = (1.0 - gamma) / gamma;
                        v.iter()
                            .enumerate()
                            .map(|(t, x)| k * (x - if t == s { 1.0 } else { 0.0 }))
                            .collect()
                    }
                });
            }
            vecs
        };
        Ok(StateOracle { kind: Kind::Table(prune(vecs)?) })
    }

    /// Candidate vectors when the oracle is table-based.
    pub fn candidates(&self) -> Option<&[Vec<f64>]> {
        match &self.kind {
            Kind::Table(v) => Some(v),
            Kind::Solve { .. } => None,
        }
    }

    pub fn eval(&self, r: &[f64]) -> Result<f64> {
        match &self.kind {
            Kind::Table(vecs) => Ok(vecs.iter().map(|c| dot(c, r)).fold(f64::NEG_INFINITY, f64::max)),
            Kind::Solve { mdp, s, gamma, quantity } => {
                let v = optimal_value(mdp, &RewardFunction::state(r.to_vec()), *gamma)?;
                Ok(match quantity {
                    Quantity::Value => v[*s],
                    Quantity::NormalizedValue => (1.0 - gamma) * v[*s],
                    Quantity::Power => (1.0 - gamma) / gamma * (v[*s] - r[*s]),
                })
            }
        }
    }
}

/// Drop duplicates and vectors that can never be strictly optimal.
fn prune(vecs: Vec<Vec<f64>>) -> Result<Vec<Vec<f64>>> {
    let mut uniq: Vec<Vec<f64>> = Vec::with_capacity(vecs.len());
    for v in vecs {
        if !uniq.iter().any(|u| u.iter().zip(&v).all(|(a, b)| (a - b).abs() <= 1e-12)) {
            uniq.push(v);
        }
    }
    if uniq.len() <= 2 {
        return Ok(uniq);
    }
    let status = classify_all(&uniq)?;
    Ok(uniq
        .into_iter()
        .zip(status)
        .filter(|(_, d)| !matches!(d, Dominance::Dominated { .. }))
        .map(|(v, _)| v)
        .collect())
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    #[test]
    fn table_agrees_with_policy_iteration() {
        // s0 -> {s1, s2}; s1 loops; s2 -> s0 or loops
        let m = RewardlessMdp::deterministic(
            vec!["s0".into(), "s1".into(), "s2".into()],
            vec!["a".into(), "b".into()],
            &[vec![1, 2], vec![1, 1], vec![0, 2]],
        )
        .unwrap();
        let r = [0.3, 0.1, 0.9];
        for q in [Quantity::Value, Quantity::NormalizedValue, Quantity::Power] {
            let o = StateOracle::new(&m, 0, 0.6, q).unwrap();
            assert!(o.candidates().is_some());
            let solve = StateOracle { kind: Kind::Solve { mdp: &m, s: 0, gamma: 0.6, quantity: q } };
            assert_abs_diff_eq!(o.eval(&r).unwrap(), solve.eval(&r).unwrap(), epsilon = 1e-12);
        }
    }
}
