//! Recomputes the reference values of the bundled toy MDPs and compares them to their targets.

use crate::bundled;
use crate::error::Result;
use crate::mdp::{Policy, RewardFunction, RewardlessMdp};
use crate::power::{optimality_probability, power, EstimateWithCI, OptTarget, RewardDistributionSpec, Sampling};
use crate::sideffects::regret::corrigibility_bound_check;

/// Absolute tolerance for sampled reference values.
pub const SAMPLED_TOL: f64 = 0.005;
/// Tolerance for values computed in closed form.
pub const EXACT_TOL: f64 = 1e-12;

#[derive(Clone, Debug, PartialEq)]
pub struct FigureCheck {
    pub figure: &'static str,
    pub quantity: String,
    pub gamma: f64,
    pub value: EstimateWithCI,
    pub target: f64,
    pub tolerance: f64,
}

impl FigureCheck {
    pub fn error(&self) -> f64 {
        (self.value.estimate - self.target).abs()
    }

    pub fn passes(&self) -> bool {
        self.error() <= self.tolerance
    }
}

fn state(m: &RewardlessMdp, name: &str) -> Result<usize> {
    m.state_index(name)
}

fn action(m: &RewardlessMdp, name: &str) -> Result<usize> {
    m.action_index(name)
}

/// Every pinned value; `sampling` drives the Monte Carlo ones.
pub fn pinned_figures(sampling: &Sampling) -> Result<Vec<FigureCheck>> {
    let uni = RewardDistributionSpec::uniform();
    let mut out = Vec::new();
    let mut push = |figure, quantity: String, gamma, value: EstimateWithCI, target, tolerance| {
        out.push(FigureCheck { figure, quantity, gamma, value, target, tolerance });
    };

    let m = bundled::load("case_study")?;
    for g in [0.1, 0.5, 0.9] {
        let targets = [("empty", 0.5), ("r_se", 2.0 / 3.0), ("l_sw", (2.0 / 3.0 + g / 2.0) / (1.0 + g))];
        for (name, target) in targets {
            let v = power(&m, state(&m, name)?, g, &uni, sampling)?;
            push("case_study", format!("POWER({name})"), g, v, target, SAMPLED_TOL);
        }
    }

    let m = bundled::load("power_not_ic")?;
    for (name, target) in [("s2", 0.75), ("s3", 2.0 / 3.0)] {
        let v = power(&m, state(&m, name)?, 1.0, &uni, sampling)?;
        push("power_not_ic", format!("POWER({name})"), 1.0, v, target, 0.0);
    }
    for (name, target) in [("N", 1.0 / 3.0), ("NE", 2.0 / 3.0)] {
        let t = OptTarget::Action(action(&m, name)?);
        let v = optimality_probability(&m, state(&m, "s1")?, &t, 1.0, &uni, sampling)?;
        push("power_not_ic", format!("P(s1,{name})"), 1.0, v, target, SAMPLED_TOL);
    }

    let m = bundled::load("opt_prob_half_prob")?;
    let t = OptTarget::Action(action(&m, "right")?);
    let v = optimality_probability(&m, state(&m, "s")?, &t, 1.0, &uni, sampling)?;
    push("opt_prob_half_prob", "P(s,right)".into(), 1.0, v, 0.4, SAMPLED_TOL);

    let m = bundled::load("impossibility_graphical")?;
    let sq = RewardDistributionSpec::parse("cdfpow:2", &m)?;
    let t = OptTarget::Action(action(&m, "up")?);
    let v = optimality_probability(&m, state(&m, "s1")?, &t, 0.5, &sq, sampling)?;
    push("impossibility_graphical", "P(s1,up)".into(), 0.5, v, 0.5375, SAMPLED_TOL);

    let m = bundled::load("power_calc")?;
    let fac = RewardDistributionSpec::parse("indep:uniform01,uniform01,cdfpow:2,uniform01", &m)?;
    for g in [0.3, 0.7] {
        let v = power(&m, state(&m, "s0")?, g, &fac, sampling)?;
        push("power_calc", "POWER(s0)".into(), g, v, 0.8, SAMPLED_TOL);
    }

    let m = bundled::load("uniform")?;
    for g in [0.1, 0.5, 0.9] {
        let v = power(&m, state(&m, "s1")?, g, &uni, sampling)?;
        let target = (1.0 - g) * (2.0 / 3.0 + 0.75 * g) + g * g / 2.0;
        push("uniform", "POWER(s1)".into(), g, v, target, SAMPLED_TOL);
    }

    let m = bundled::load("sharp_bound")?;
    let r = RewardFunction::state(vec![0.0, 0.5, 1.0]);
    let right = action(&m, "right")?;
    let pi = Policy(vec![right; m.n_states()]);
    for g in [0.25, 0.5, 0.75] {
        let c = corrigibility_bound_check(&m, &pi, &r, state(&m, "s1")?, g, 1)?;
        let v = EstimateWithCI::exact(c.report.pregret, sampling.seed);
        push("sharp_bound", "pregret(switch@1)".into(), g, v, 1.0 - g * g, EXACT_TOL);
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn exact_rows_pass_with_few_samples() {
        let rows = pinned_figures(&Sampling::new(2000, 1)).unwrap();
        assert_eq!(rows.len(), 9 + 4 + 1 + 1 + 2 + 3 + 3);
        for r in rows.iter().filter(|r| r.tolerance <= EXACT_TOL) {
            assert!(r.passes(), "{r:?}");
        }
    }
}
