//! POWER, optimality probability and attainable-utility distance under reward distributions.

pub mod copies;
pub mod dist;
pub mod estimate;
pub mod optprob;
pub mod oracle;
pub mod orbit;

pub use dist::{Marginal, RewardDistributionSpec, StatePermutation};
pub use estimate::{EstimateWithCI, Sampling};
pub use optprob::{optimality_probability, OptTarget};

use crate::error::{Error, Result};
use crate::mdp::RewardlessMdp;
use estimate::{mean_samples, sum_samples};
use oracle::{Quantity, StateOracle};

fn check_state(mdp: &RewardlessMdp, s: usize) -> Result<()> {
    if s >= mdp.n_states() {
        return Err(Error::input(format!("state index {s} out of range")));
    }
    Ok(())
}

fn support_width(spec: &RewardDistributionSpec) -> Result<f64> {
    let (b, c) = spec.bounds();
    if !(b.is_finite() && c.is_finite()) {
        return Err(Error::input("reward distribution must have bounded support"));
    }
    Ok(c - b)
}

/// Mean of `g(r)` over the distribution: exact for discrete specs, sampled otherwise.
fn expect_over<G>(
    spec: &RewardDistributionSpec,
    ns: usize,
    sampling: &Sampling,
    width: f64,
    g: G,
) -> Result<EstimateWithCI>
where
    G: Fn(&[f64]) -> Result<f64> + Sync,
{
    if let Some(atoms) = spec.finite_support() {
        let mut total = 0.0;
        for (w, r) in &atoms {
            total += w * g(r)?;
        }
        return Ok(EstimateWithCI::exact(total, sampling.seed));
    }
    let mean = mean_samples(sampling.samples, |i| g(&spec.sample(ns, sampling.seed, i)))?;
    Ok(EstimateWithCI::from_mean(mean, sampling, width))
}

fn prepare(mdp: &RewardlessMdp, spec: &RewardDistributionSpec, sampling: &Sampling) -> Result<f64> {
    spec.validate(mdp.n_states())?;
    sampling.validate()?;
    support_width(spec)
}

/// `E[V*_R(s, γ)]` for `γ ∈ (0, 1)`.
pub fn average_optimal_value(
    mdp: &RewardlessMdp,
    s: usize,
    gamma: f64,
    spec: &RewardDistributionSpec,
    sampling: &Sampling,
) -> Result<EstimateWithCI> {
    check_state(mdp, s)?;
    if !(gamma > 0.0 && gamma < 1.0) {
        return Err(Error::domain(format!("average optimal value needs a discount in (0, 1), got {gamma}")));
    }
    let width = prepare(mdp, spec, sampling)? / (1.0 - gamma);
    let oracle = StateOracle::new(mdp, s, gamma, Quantity::Value)?;
    expect_over(spec, mdp.n_states(), sampling, width, |r| oracle.eval(r))
}

/// `POWER(s, γ) = E[(1-γ)/γ · (V*_R(s, γ) - R(s))]`; at γ = 0 or 1 this is [`power_limit`].
pub fn power(
    mdp: &RewardlessMdp,
    s: usize,
    gamma: f64,
    spec: &RewardDistributionSpec,
    sampling: &Sampling,
) -> Result<EstimateWithCI> {
    check_state(mdp, s)?;
    if gamma == 0.0 || gamma == 1.0 {
        return power_limit(mdp, s, gamma, spec, sampling);
    }
    if !(gamma > 0.0 && gamma < 1.0) {
        return Err(Error::domain(format!("discount {gamma} outside [0, 1]")));
    }
    let width = prepare(mdp, spec, sampling)?;
    let oracle = StateOracle::new(mdp, s, gamma, Quantity::Power)?;
    expect_over(spec, mdp.n_states(), sampling, width, |r| oracle.eval(r))
}

/// POWER at γ = 0 (best child distribution) or γ = 1 (best recurrent distribution).
pub fn power_limit(
    mdp: &RewardlessMdp,
    s: usize,
    end: f64,
    spec: &RewardDistributionSpec,
    sampling: &Sampling,
) -> Result<EstimateWithCI> {
    check_state(mdp, s)?;
    if end != 0.0 && end != 1.0 {
        return Err(Error::domain(format!("limit must be taken at 0 or 1, got {end}")));
    }
    let width = prepare(mdp, spec, sampling)?;
    let oracle = StateOracle::new(mdp, s, end, Quantity::Power)?;
    if spec.is_uniform_iid() {
        if let Some(k) = oracle.candidates().and_then(distinct_basis_count) {
            return Ok(EstimateWithCI::exact(k as f64 / (k as f64 + 1.0), sampling.seed));
        }
    }
    expect_over(spec, mdp.n_states(), sampling, width, |r| oracle.eval(r))
}

/// `k` when the vectors are exactly `k` distinct standard basis vectors.
fn distinct_basis_count(vecs: &[Vec<f64>]) -> Option<usize> {
    let mut hits = Vec::new();
    for v in vecs {
        let ones: Vec<usize> = v.iter().enumerate().filter(|(_, x)| **x != 0.0).map(|(i, _)| i).collect();
        if ones.len() != 1 || (v[ones[0]] - 1.0).abs() > 1e-12 || hits.contains(&ones[0]) {
            return None;
        }
        hits.push(ones[0]);
    }
    Some(hits.len())
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Verdict {
    Greater,
    Less,
    /// The interval contains zero.
    Unresolved,
}

impl Verdict {
    pub fn label(&self) -> &'static str {
        match self {
            Verdict::Greater => "greater",
            Verdict::Less => "less",
            Verdict::Unresolved => "unresolved",
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct Comparison {
    pub first: EstimateWithCI,
    pub second: EstimateWithCI,
    /// `first - second` under common samples.
    pub difference: EstimateWithCI,
    pub verdict: Verdict,
}

fn verdict(diff: &EstimateWithCI) -> Verdict {
    let slack = if diff.exact { 1e-12 } else { diff.radius };
    if diff.estimate > slack {
        Verdict::Greater
    } else if diff.estimate < -slack {
        Verdict::Less
    } else {
        Verdict::Unresolved
    }
}

/// Does taking `a` at `s` lead to more expected POWER than `b`, under common random numbers?
pub fn power_seeking_compare(
    mdp: &RewardlessMdp,
    s: usize,
    a: usize,
    b: usize,
    gamma: f64,
    spec: &RewardDistributionSpec,
    sampling: &Sampling,
) -> Result<Comparison> {
    check_state(mdp, s)?;
    for x in [a, b] {
        if x >= mdp.n_actions() {
            return Err(Error::input(format!("action index {x} out of range")));
        }
    }
    let width = prepare(mdp, spec, sampling)?;
    let ns = mdp.n_states();
    let mut succ: Vec<usize> = mdp.successors(s, a).chain(mdp.successors(s, b)).collect();
    succ.sort_unstable();
    succ.dedup();
    let oracles: Vec<(usize, StateOracle)> = succ
        .iter()
        .map(|&t| Ok((t, StateOracle::new(mdp, t, gamma, Quantity::Power)?)))
        .collect::<Result<_>>()?;
    let pa = mdp.row(s, a);
    let pb = mdp.row(s, b);
    let stats = |r: &[f64], out: &mut [f64]| -> Result<()> {
        let (mut ea, mut eb) = (0.0, 0.0);
        for (t, o) in &oracles {
            let v = o.eval(r)?;
            ea += pa[*t] * v;
            eb += pb[*t] * v;
        }
        out[0] = ea;
        out[1] = eb;
        out[2] = ea - eb;
        Ok(())
    };
    let (first, second, difference) = if let Some(atoms) = spec.finite_support() {
        let mut tot = [0.0; 3];
        let mut buf = [0.0; 3];
        for (w, r) in &atoms {
            stats(r, &mut buf)?;
            for k in 0..3 {
                tot[k] += w * buf[k];
            }
        }
        let ex = |v| EstimateWithCI::exact(v, sampling.seed);
        (ex(tot[0]), ex(tot[1]), ex(tot[2]))
    } else {
        let sums = sum_samples(sampling.samples, 3, |i, out| stats(&spec.sample(ns, sampling.seed, i), out))?;
        let n = sampling.samples as f64;
        (
            EstimateWithCI::from_mean(sums[0] / n, sampling, width),
            EstimateWithCI::from_mean(sums[1] / n, sampling, width),
            EstimateWithCI::from_mean(sums[2] / n, sampling, 2.0 * width),
        )
    };
    let verdict = verdict(&difference);
    Ok(Comparison { first, second, difference, verdict })
}

fn check_distribution(d: &[f64], ns: usize) -> Result<()> {
    if d.len() != ns {
        return Err(Error::input(format!("state distribution has {} entries for {ns} states", d.len())));
    }
    if d.iter().any(|p| !(0.0..=1.0).contains(p)) || (d.iter().sum::<f64>() - 1.0).abs() > 1e-9 {
        return Err(Error::input("state distribution must be non-negative and sum to 1"));
    }
    Ok(())
}

fn au_common(
    mdp: &RewardlessMdp,
    delta: &[f64],
    delta2: &[f64],
    gamma: f64,
    quantity: Quantity,
    spec: &RewardDistributionSpec,
    sampling: &Sampling,
    width: f64,
) -> Result<EstimateWithCI> {
    let ns = mdp.n_states();
    check_distribution(delta, ns)?;
    check_distribution(delta2, ns)?;
    let oracles: Vec<(usize, StateOracle)> = (0..ns)
        .filter(|&t| delta[t] > 0.0 || delta2[t] > 0.0)
        .map(|t| Ok((t, StateOracle::new(mdp, t, gamma, quantity)?)))
        .collect::<Result<_>>()?;
    expect_over(spec, ns, sampling, width, |r| {
        let mut diff = 0.0;
        for (t, o) in &oracles {
            let w = delta[*t] - delta2[*t];
            if w != 0.0 {
                diff += w * o.eval(r)?;
            }
        }
        Ok(diff.abs())
    })
}

/// `E_R |E_{Δ} V*_R - E_{Δ'} V*_R|` for `γ ∈ (0, 1)`.
pub fn au_distance(
    mdp: &RewardlessMdp,
    delta: &[f64],
    delta2: &[f64],
    gamma: f64,
    spec: &RewardDistributionSpec,
    sampling: &Sampling,
) -> Result<EstimateWithCI> {
    if !(gamma > 0.0 && gamma < 1.0) {
        return Err(Error::domain(format!(
            "attainable utility distance needs a discount in (0, 1), got {gamma}; use the normalized form"
        )));
    }
    let width = prepare(mdp, spec, sampling)? / (1.0 - gamma);
    au_common(mdp, delta, delta2, gamma, Quantity::Value, spec, sampling, width)
}

/// `(1-γ)` times [`au_distance`], extended to γ ∈ {0, 1} by its limits.
pub fn au_distance_normalized(
    mdp: &RewardlessMdp,
    delta: &[f64],
    delta2: &[f64],
    gamma: f64,
    spec: &RewardDistributionSpec,
    sampling: &Sampling,
) -> Result<EstimateWithCI> {
    if !(0.0..=1.0).contains(&gamma) {
        return Err(Error::domain(format!("discount {gamma} outside [0, 1]")));
    }
    let width = prepare(mdp, spec, sampling)?;
    au_common(mdp, delta, delta2, gamma, Quantity::NormalizedValue, spec, sampling, width)
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    fn fork() -> RewardlessMdp {
        RewardlessMdp::deterministic(
            vec!["s0".into(), "s1".into(), "s2".into()],
            vec!["l".into(), "r".into()],
            &[vec![1, 2], vec![1, 1], vec![2, 2]],
        )
        .unwrap()
    }

    #[test]
    fn constant_reward_power_is_constant() {
        let m = fork();
        let spec = RewardDistributionSpec::Degenerate(vec![0.4; 3]);
        for g in [0.0, 0.3, 0.9, 1.0] {
            let e = power(&m, 0, g, &spec, &Sampling::new(10, 0)).unwrap();
            assert!(e.exact);
            assert_abs_diff_eq!(e.estimate, 0.4, epsilon = 1e-12);
        }
    }

    #[test]
    fn two_terminal_choices_give_two_thirds() {
        let m = fork();
        let e = power(&m, 0, 1.0, &RewardDistributionSpec::uniform(), &Sampling::new(10, 0)).unwrap();
        assert!(e.exact);
        assert_abs_diff_eq!(e.estimate, 2.0 / 3.0);
        let e = power(&m, 0, 0.5, &RewardDistributionSpec::uniform(), &Sampling::new(50_000, 1)).unwrap();
        assert!(e.covers(2.0 / 3.0), "{e}");
    }

    #[test]
    fn identical_actions_compare_equal() {
        let m = fork();
        let c = power_seeking_compare(&m, 0, 1, 1, 0.5, &RewardDistributionSpec::uniform(), &Sampling::new(2000, 0))
            .unwrap();
        assert_eq!(c.difference.estimate, 0.0);
        assert_eq!(c.verdict, Verdict::Unresolved);
    }

    #[test]
    fn au_distance_to_self_is_zero() {
        let m = fork();
        let d = [0.0, 0.5, 0.5];
        let e = au_distance(&m, &d, &d, 0.5, &RewardDistributionSpec::uniform(), &Sampling::new(1000, 0)).unwrap();
        assert_eq!(e.estimate, 0.0);
    }

    #[test]
    fn unit_discount_rejected_for_raw_values() {
        let m = fork();
        let spec = RewardDistributionSpec::uniform();
        assert!(average_optimal_value(&m, 0, 1.0, &spec, &Sampling::new(10, 0)).is_err());
        assert!(au_distance(&m, &[1.0, 0.0, 0.0], &[0.0, 1.0, 0.0], 1.0, &spec, &Sampling::new(10, 0)).is_err());
    }
}
