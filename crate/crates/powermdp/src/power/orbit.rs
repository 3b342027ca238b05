//! Tallies of a comparison across the permutation orbit of a reward distribution.

use super::dist::{RewardDistributionSpec, StatePermutation};
use super::estimate::{sum_samples, Sampling};
use super::optprob::{LexTable, OptTarget};
use super::oracle::{Quantity, StateOracle};
use crate::error::{Error, Result};
use crate::mdp::RewardlessMdp;
use itertools::Itertools;
use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use std::collections::HashSet;

/// Largest state count whose full orbit is enumerated.
pub const MAX_EXACT_STATES: usize = 10;
pub const VOTE_TOL: f64 = 1e-9;

#[derive(Clone, Debug, PartialEq)]
pub enum OrbitQuantity {
    /// `POWER(first, γ)` against `POWER(second, γ)`.
    Power { first: usize, second: usize, gamma: f64 },
    /// Optimality probability of two targets at the same state.
    OptProb { state: usize, first: OptTarget, second: OptTarget, gamma: f64 },
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub enum OrbitMode {
    /// Every permutation of the state indices.
    Exact,
    /// This many uniformly drawn permutations.
    Sampled { permutations: usize, seed: u64 },
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct OrbitTally {
    /// Orbit elements where the first quantity is larger.
    pub greater: usize,
    pub less: usize,
    pub equal: usize,
    pub orbit_size: usize,
    pub exhaustive: bool,
}

impl OrbitTally {
    /// First quantity at least as large for at least `n` times as many elements as the reverse.
    pub fn at_least_n_times(&self, n: usize) -> bool {
        self.greater >= n * self.less
    }
}

type Stat<'a> = Box<dyn Fn(&[f64]) -> Result<f64> + Sync + 'a>;

fn quantity_stats<'a>(mdp: &'a RewardlessMdp, q: &OrbitQuantity) -> Result<(Stat<'a>, Stat<'a>)> {
    match q {
        OrbitQuantity::Power { first, second, gamma } => {
            let a = StateOracle::new(mdp, *first, *gamma, Quantity::Power)?;
            let b = StateOracle::new(mdp, *second, *gamma, Quantity::Power)?;
            Ok((Box::new(move |r| a.eval(r)), Box::new(move |r| b.eval(r))))
        }
        OrbitQuantity::OptProb { state, first, second, gamma } => {
            let a = LexTable::build(mdp, *state, first, *gamma)?;
            let b = LexTable::build(mdp, *state, second, *gamma)?;
            let ind = |x: bool| if x { 1.0 } else { 0.0 };
            Ok((
                Box::new(move |r| Ok(ind(a.target_optimal(r)))),
                Box::new(move |r| Ok(ind(b.target_optimal(r)))),
            ))
        }
    }
}

fn orbit_permutations(spec: &RewardDistributionSpec, n: usize, mode: OrbitMode) -> Result<(Vec<StatePermutation>, bool)> {
    if spec.is_iid() {
        return Ok((vec![StatePermutation::identity(n)], true));
    }
    match mode {
        OrbitMode::Exact => {
            if n > MAX_EXACT_STATES {
                let size: f64 = (1..=n).map(|k| k as f64).product();
                return Err(Error::size_cap("exact orbit enumeration (|S|!)", size, 3_628_800.0));
            }
            let all = (0..n).permutations(n).map(|p| StatePermutation::new(p).expect("permutation"));
            // discrete distributions: keep one permutation per distinct pushforward
            match spec.finite_support() {
                Some(atoms) => {
                    let mut seen = HashSet::new();
                    let mut keep = Vec::new();
                    for phi in all {
                        let mut key: Vec<(u64, Vec<u64>)> = atoms
                            .iter()
                            .map(|(w, v)| (w.to_bits(), phi.apply(v).iter().map(|x| x.to_bits()).collect()))
                            .collect();
                        key.sort();
                        if seen.insert(key) {
                            keep.push(phi);
                        }
                    }
                    Ok((keep, true))
                }
                None => Ok((all.collect(), true)),
            }
        }
        OrbitMode::Sampled { permutations, seed } => {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let perms = (0..permutations)
                .map(|_| {
                    let mut p: Vec<usize> = (0..n).collect();
                    p.shuffle(&mut rng);
                    StatePermutation::new(p).expect("permutation")
                })
                .collect();
            Ok((perms, false))
        }
    }
}

/// Evaluate both quantities under every orbit element `φ·D`, sharing samples within an element.
pub fn orbit_vote(
    mdp: &RewardlessMdp,
    quantity: &OrbitQuantity,
    spec: &RewardDistributionSpec,
    mode: OrbitMode,
    sampling: &Sampling,
) -> Result<OrbitTally> {
    let ns = mdp.n_states();
    spec.validate(ns)?;
    sampling.validate()?;
    let (fa, fb) = quantity_stats(mdp, quantity)?;
    let (perms, exhaustive) = orbit_permutations(spec, ns, mode)?;
    let atoms = spec.finite_support();
    let mut tally = OrbitTally { greater: 0, less: 0, equal: 0, orbit_size: perms.len(), exhaustive };
    for phi in &perms {
        let diff = match &atoms {
            Some(atoms) => {
                let mut d = 0.0;
                for (w, v) in atoms {
                    let r = phi.apply(v);
                    d += w * (fa(&r)? - fb(&r)?);
                }
                d
            }
            None => {
                let sums = sum_samples(sampling.samples, 1, |i, out| {
                    let r = phi.apply(&spec.sample(ns, sampling.seed, i));
                    out[0] = fa(&r)? - fb(&r)?;
                    Ok(())
                })?;
                sums[0] / sampling.samples as f64
            }
        };
        if diff > VOTE_TOL {
            tally.greater += 1;
        } else if diff < -VOTE_TOL {
            tally.less += 1;
        } else {
            tally.equal += 1;
        }
    }
    Ok(tally)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn iid_orbit_has_one_element() {
        let m = RewardlessMdp::deterministic(
            vec!["a".into(), "b".into()],
            vec!["x".into()],
            &[vec![0], vec![1]],
        )
        .unwrap();
        let q = OrbitQuantity::Power { first: 0, second: 1, gamma: 0.5 };
        let t = orbit_vote(&m, &q, &RewardDistributionSpec::uniform(), OrbitMode::Exact, &Sampling::new(500, 0))
            .unwrap();
        assert_eq!(t.orbit_size, 1);
        assert_eq!(t.greater + t.less + t.equal, 1);
    }

    #[test]
    fn degenerate_orbit_is_deduplicated() {
        let m = RewardlessMdp::deterministic(
            vec!["a".into(), "b".into(), "c".into()],
            vec!["x".into()],
            &[vec![0], vec![1], vec![2]],
        )
        .unwrap();
        let spec = RewardDistributionSpec::Degenerate(vec![1.0, 0.0, 0.0]);
        let q = OrbitQuantity::Power { first: 0, second: 1, gamma: 0.5 };
        let t = orbit_vote(&m, &q, &spec, OrbitMode::Exact, &Sampling::new(1, 0)).unwrap();
        assert_eq!(t.orbit_size, 3);
        assert_eq!((t.greater, t.less, t.equal), (1, 1, 1));
    }
}
