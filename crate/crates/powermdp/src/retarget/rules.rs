//! Decision rules over a finite set of outcome lotteries, parameterized by a utility vector.

use crate::error::{Error, Result};
use serde::{Deserialize, Serialize};

/// Outcome lotteries `C` split into two disjoint labelled parts `A` and `B`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct OutcomeProblem {
    pub vectors: Vec<Vec<f64>>,
    pub a: Vec<usize>,
    pub b: Vec<usize>,
}

impl OutcomeProblem {
    pub fn new(vectors: Vec<Vec<f64>>, a: Vec<usize>, b: Vec<usize>) -> Result<Self> {
        let p = OutcomeProblem { vectors, a, b };
        p.validate()?;
        Ok(p)
    }

    /// Three unit vectors over (spade, heart, diamond); `A` holds the diamond.
    pub fn cards() -> Self {
        let e = |i: usize| (0..3).map(|k| if k == i { 1.0 } else { 0.0 }).collect();
        OutcomeProblem { vectors: vec![e(0), e(1), e(2)], a: vec![2], b: vec![0, 1] }
    }

    pub fn validate(&self) -> Result<()> {
        let d = self.dim();
        if self.vectors.is_empty() || d == 0 {
            return Err(Error::input("need at least one non-empty outcome vector"));
        }
        if self.vectors.iter().any(|v| v.len() != d || v.iter().any(|x| !x.is_finite())) {
            return Err(Error::input(format!("outcome vectors must be finite and of length {d}")));
        }
        if self.a.is_empty() || self.b.is_empty() {
            return Err(Error::input("both A and B must be non-empty"));
        }
        let mut seen = vec![0u8; self.vectors.len()];
        for &i in self.a.iter().chain(&self.b) {
            if i >= self.vectors.len() {
                return Err(Error::input(format!("outcome index {i} out of range")));
            }
            seen[i] += 1;
        }
        if seen.iter().any(|&c| c != 1) {
            return Err(Error::input("A and B must partition the outcome vectors"));
        }
        Ok(())
    }

    pub fn dim(&self) -> usize {
        self.vectors.first().map_or(0, Vec::len)
    }

    pub fn len(&self) -> usize {
        self.vectors.len()
    }

    pub fn is_empty(&self) -> bool {
        self.vectors.is_empty()
    }

    /// Expected utility of every outcome under `u`.
    pub fn utilities(&self, u: &[f64]) -> Result<Vec<f64>> {
        if u.len() != self.dim() || u.iter().any(|x| !x.is_finite()) {
            return Err(Error::input(format!("utility must be a finite vector of length {}", self.dim())));
        }
        Ok(self.vectors.iter().map(|x| expected_utility(x, u)).collect())
    }
}

/// `xᵀu` with the products summed in sorted order, so jointly permuting `x` and `u`
/// gives the same bits.
pub fn expected_utility(x: &[f64], u: &[f64]) -> f64 {
    let mut terms: Vec<f64> = x.iter().zip(u).map(|(a, b)| a * b).collect();
    terms.sort_by(f64::total_cmp);
    terms.iter().sum()
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "rule", rename_all = "kebab-case")]
pub enum DecisionRule {
    /// 1 when some element of `X` attains the maximum expected utility.
    Argmax,
    /// Share of the argmax set lying in `X`.
    FractionOptimal,
    /// 1 when some element of `X` attains the minimum expected utility.
    AntiArgmax,
    Boltzmann { temperature: f64 },
    /// Uniform over outcomes with utility at least `threshold`; all zero when none qualify.
    Satisfice { threshold: f64 },
    /// Draw `k` outcomes uniformly with replacement and pick uniformly among the best drawn.
    BestOfK { k: u32 },
    /// Top `q`-quantile of `base` (uniform over `C` when absent).
    Quantilizer { q: f64, base: Option<Vec<f64>> },
    UniformRandom,
    /// Always the outcome with this index.
    Stubborn { index: usize },
}

impl DecisionRule {
    pub fn validate(&self, problem: &OutcomeProblem) -> Result<()> {
        match self {
            DecisionRule::Boltzmann { temperature } if !(temperature.is_finite() && *temperature > 0.0) => {
                Err(Error::input(format!("temperature must be positive, got {temperature}")))
            }
            DecisionRule::Satisfice { threshold } if !threshold.is_finite() => {
                Err(Error::input("satisficing threshold must be finite"))
            }
            DecisionRule::BestOfK { k } if *k == 0 => Err(Error::input("best-of-k needs k >= 1")),
            DecisionRule::Quantilizer { q, base } => {
                check_quantile(*q)?;
                if let Some(p) = base {
                    check_base(p, problem.len())?;
                }
                Ok(())
            }
            DecisionRule::Stubborn { index } if *index >= problem.len() => {
                Err(Error::input(format!("stubborn index {index} out of range")))
            }
            _ => Ok(()),
        }
    }

    /// Whether the output depends on `u` only through the expected utilities.
    pub fn is_eu_determined(&self) -> bool {
        !matches!(self, DecisionRule::Stubborn { .. } | DecisionRule::UniformRandom)
    }
}

fn check_quantile(q: f64) -> Result<()> {
    if !(q > 0.0 && q <= 1.0) {
        return Err(Error::input(format!("quantile q must lie in (0, 1], got {q}")));
    }
    Ok(())
}

fn check_base(p: &[f64], n: usize) -> Result<()> {
    if p.len() != n || p.iter().any(|w| !(w.is_finite() && *w >= 0.0)) {
        return Err(Error::input(format!("base distribution needs {n} non-negative weights")));
    }
    if (p.iter().sum::<f64>() - 1.0).abs() > 1e-9 {
        return Err(Error::input("base distribution weights must sum to 1"));
    }
    Ok(())
}

fn check_subset(x: &[usize], n: usize) -> Result<Vec<bool>> {
    let mut mask = vec![false; n];
    for &i in x {
        if i >= n {
            return Err(Error::input(format!("outcome index {i} out of range")));
        }
        mask[i] = true;
    }
    Ok(mask)
}

/// Probability that `rule` picks an element of `X` (given as outcome indices) under `u`.
pub fn decision_prob(rule: &DecisionRule, x: &[usize], problem: &OutcomeProblem, u: &[f64]) -> Result<f64> {
    rule.validate(problem)?;
    let v = problem.utilities(u)?;
    let n = v.len();
    let inx = check_subset(x, n)?;
    let count = |pred: &dyn Fn(usize) -> bool| (0..n).filter(|&i| pred(i)).count();
    let hit = |pred: &dyn Fn(usize) -> bool| if (0..n).any(|i| inx[i] && pred(i)) { 1.0 } else { 0.0 };
    let max = v.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let min = v.iter().copied().fold(f64::INFINITY, f64::min);
    Ok(match rule {
        DecisionRule::Argmax => hit(&|i| v[i] == max),
        DecisionRule::AntiArgmax => hit(&|i| v[i] == min),
        DecisionRule::FractionOptimal => {
            count(&|i| inx[i] && v[i] == max) as f64 / count(&|i| v[i] == max) as f64
        }
        DecisionRule::Boltzmann { temperature } => {
            let w: Vec<f64> = v.iter().map(|x| ((x - max) / temperature).exp()).collect();
            let num: f64 = (0..n).filter(|&i| inx[i]).map(|i| w[i]).sum();
            num / w.iter().sum::<f64>()
        }
        DecisionRule::Satisfice { threshold } => {
            let ok = count(&|i| v[i] >= *threshold);
            if ok == 0 {
                0.0
            } else {
                count(&|i| inx[i] && v[i] >= *threshold) as f64 / ok as f64
            }
        }
        DecisionRule::BestOfK { k } => best_of_k(&v, &inx, *k),
        DecisionRule::Quantilizer { q, base } => {
            let uniform = vec![1.0 / n as f64; n];
            quantile_mass(*q, base.as_deref().unwrap_or(&uniform), &v, &inx)
        }
        DecisionRule::UniformRandom => count(&|i| inx[i]) as f64 / n as f64,
        DecisionRule::Stubborn { index } => {
            if inx[*index] {
                1.0
            } else {
                0.0
            }
        }
    })
}

/// Within one utility level every outcome is equally likely to be among those drawn, so
/// the expected fraction is `|X ∩ level| / |level|` times the chance that level is the best drawn.
fn best_of_k(v: &[f64], inx: &[bool], k: u32) -> f64 {
    let n = v.len() as f64;
    let mut levels: Vec<f64> = v.to_vec();
    levels.sort_by(f64::total_cmp);
    levels.dedup();
    let mut below = 0usize;
    let mut total = 0.0;
    for level in levels {
        let members: Vec<usize> = (0..v.len()).filter(|&i| v[i] == level).collect();
        let upto = below + members.len();
        let p_top = (upto as f64 / n).powi(k as i32) - (below as f64 / n).powi(k as i32);
        let share = members.iter().filter(|&&i| inx[i]).count() as f64 / members.len() as f64;
        total += p_top * share;
        below = upto;
    }
    total
}

fn quantile_mass(q: f64, p: &[f64], v: &[f64], inx: &[bool]) -> f64 {
    const MASS_TOL: f64 = 1e-12;
    let above = |m: f64| -> f64 { (0..v.len()).filter(|&i| v[i] > m).map(|i| p[i]).sum() };
    // the infimum is -inf only when the whole base mass fits in the quantile
    let mut levels: Vec<f64> = v.to_vec();
    levels.sort_by(f64::total_cmp);
    levels.dedup();
    let threshold = if q >= 1.0 { None } else { levels.into_iter().find(|&m| above(m) <= q + MASS_TOL) };
    let (p_above, p_at) = match threshold {
        None => (0.0, 0.0),
        Some(m) => (above(m), (0..v.len()).filter(|&i| v[i] == m).map(|i| p[i]).sum()),
    };
    let mut total = 0.0;
    for i in (0..v.len()).filter(|&i| inx[i] && p[i] > 0.0) {
        let term = match threshold {
            None => 1.0,
            Some(m) if v[i] > m => 1.0,
            Some(m) if v[i] == m => (q - p_above) / p_at,
            Some(_) => 0.0,
        };
        total += p[i] / q * term;
    }
    total
}

/// Quantilizer probability for an explicit base distribution over `C`.
pub fn quantilize_prob(q: f64, base: &[f64], x: &[usize], problem: &OutcomeProblem, u: &[f64]) -> Result<f64> {
    check_quantile(q)?;
    check_base(base, problem.len())?;
    let v = problem.utilities(u)?;
    let inx = check_subset(x, v.len())?;
    Ok(quantile_mass(q, base, &v, &inx))
}
