//! Reward-function distributions over state rewards.

use crate::error::{Error, Result};
use crate::mdp::RewardlessMdp;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use std::fmt;

/// A distribution on `[0, 1]` (or on the span of a quantile table).
#[derive(Clone, Debug, PartialEq)]
pub enum Marginal {
    Uniform,
    /// CDF `F(x) = x^k` on `[0, 1]`.
    CdfPower(f64),
    /// Piecewise-linear quantile function through equally spaced probability levels.
    Quantiles(Vec<f64>),
}

impl Marginal {
    pub fn validate(&self) -> Result<()> {
        match self {
            Marginal::Uniform => Ok(()),
            Marginal::CdfPower(k) if k.is_finite() && *k > 0.0 => Ok(()),
            Marginal::CdfPower(k) => Err(Error::input(format!("cdfpow exponent must be positive, got {k}"))),
            Marginal::Quantiles(q) => {
                if q.len() < 2 {
                    return Err(Error::input("a quantile table needs at least two entries"));
                }
                if q.iter().any(|x| !x.is_finite() || !(0.0..=1.0).contains(x)) {
                    return Err(Error::input("quantile table entries must lie in [0, 1]"));
                }
                if q.windows(2).any(|w| w[1] < w[0]) {
                    return Err(Error::input("quantile table must be non-decreasing"));
                }
                Ok(())
            }
        }
    }

    pub fn bounds(&self) -> (f64, f64) {
        match self {
            Marginal::Quantiles(q) => (q[0], *q.last().unwrap()),
            _ => (0.0, 1.0),
        }
    }

    pub fn mean(&self) -> f64 {
        match self {
            Marginal::Uniform => 0.5,
            Marginal::CdfPower(k) => k / (k + 1.0),
            Marginal::Quantiles(q) => {
                let m = (q.len() - 1) as f64;
                q.windows(2).map(|w| 0.5 * (w[0] + w[1])).sum::<f64>() / m
            }
        }
    }

    /// Inverse-CDF transform of a uniform variate.
    pub fn quantile(&self, u: f64) -> f64 {
        match self {
            Marginal::Uniform => u,
            Marginal::CdfPower(k) => u.powf(1.0 / k),
            Marginal::Quantiles(q) => {
                let m = (q.len() - 1) as f64;
                let pos = (u * m).min(m);
                let i = (pos.floor() as usize).min(q.len() - 2);
                let t = pos - i as f64;
                q[i] + t * (q[i + 1] - q[i])
            }
        }
    }

    /// `P(X ≤ x)`.
    pub fn cdf(&self, x: f64) -> f64 {
        match self {
            Marginal::Uniform => x.clamp(0.0, 1.0),
            Marginal::CdfPower(k) => x.clamp(0.0, 1.0).powf(*k),
            Marginal::Quantiles(q) => {
                if x < q[0] {
                    return 0.0;
                }
                if x >= *q.last().unwrap() {
                    return 1.0;
                }
                let m = (q.len() - 1) as f64;
                // last segment whose start is ≤ x
                let i = q.iter().rposition(|&v| v <= x).unwrap().min(q.len() - 2);
                let width = q[i + 1] - q[i];
                let t = if width > 0.0 { (x - q[i]) / width } else { 1.0 };
                (i as f64 + t) / m
            }
        }
    }

    fn draw(&self, rng: &mut ChaCha8Rng) -> f64 {
        self.quantile(rng.random::<f64>())
    }
}

impl fmt::Display for Marginal {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Marginal::Uniform => write!(f, "uniform01"),
            Marginal::CdfPower(k) => write!(f, "cdfpow:{k}"),
            Marginal::Quantiles(q) => {
                let parts: Vec<String> = q.iter().map(|x| x.to_string()).collect();
                write!(f, "quantiles:{}", parts.join(";"))
            }
        }
    }
}

/// A bijection on state indices acting on vectors by `(φ·v)[φ(i)] = v[i]`.
#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub struct StatePermutation(Vec<usize>);

impl StatePermutation {
    pub fn new(map: Vec<usize>) -> Result<Self> {
        let mut seen = vec![false; map.len()];
        for &j in &map {
            if j >= map.len() || seen[j] {
                return Err(Error::input(format!("{map:?} is not a permutation")));
            }
            seen[j] = true;
        }
        Ok(StatePermutation(map))
    }

    pub fn identity(n: usize) -> Self {
        StatePermutation((0..n).collect())
    }

    pub fn transposition(n: usize, i: usize, j: usize) -> Self {
        let mut map: Vec<usize> = (0..n).collect();
        map.swap(i, j);
        StatePermutation(map)
    }

    /// Build from disjoint cycles, e.g. `[[0, 1], [2, 4, 3]]`.
    pub fn from_cycles(n: usize, cycles: &[Vec<usize>]) -> Result<Self> {
        let mut map: Vec<usize> = (0..n).collect();
        let mut touched = vec![false; n];
        for cyc in cycles {
            for (k, &i) in cyc.iter().enumerate() {
                if i >= n {
                    return Err(Error::input(format!("cycle entry {i} out of range")));
                }
                if touched[i] {
                    return Err(Error::input(format!("index {i} appears in two cycles")));
                }
                touched[i] = true;
                map[i] = cyc[(k + 1) % cyc.len()];
            }
        }
        Ok(StatePermutation(map))
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn image(&self, i: usize) -> usize {
        self.0[i]
    }

    pub fn as_slice(&self) -> &[usize] {
        &self.0
    }

    pub fn apply(&self, v: &[f64]) -> Vec<f64> {
        let mut out = vec![0.0; v.len()];
        for (i, &x) in v.iter().enumerate() {
            out[self.0[i]] = x;
        }
        out
    }

    pub fn compose(&self, inner: &StatePermutation) -> StatePermutation {
        StatePermutation(inner.0.iter().map(|&j| self.0[j]).collect())
    }

    pub fn inverse(&self) -> StatePermutation {
        let mut inv = vec![0; self.0.len()];
        for (i, &j) in self.0.iter().enumerate() {
            inv[j] = i;
        }
        StatePermutation(inv)
    }

    pub fn is_involution(&self) -> bool {
        self.0.iter().enumerate().all(|(i, &j)| self.0[j] == i)
    }

    pub fn is_identity(&self) -> bool {
        self.0.iter().enumerate().all(|(i, &j)| i == j)
    }

    /// Disjoint cycles of length ≥ 2.
    pub fn cycles(&self) -> Vec<Vec<usize>> {
        let mut seen = vec![false; self.0.len()];
        let mut out = Vec::new();
        for start in 0..self.0.len() {
            if seen[start] || self.0[start] == start {
                continue;
            }
            let mut cyc = vec![start];
            seen[start] = true;
            let mut j = self.0[start];
            while j != start {
                seen[j] = true;
                cyc.push(j);
                j = self.0[j];
            }
            out.push(cyc);
        }
        out
    }
}

#[derive(Clone, Debug, PartialEq)]
pub enum RewardDistributionSpec {
    Iid(Marginal),
    /// One independent marginal per state.
    Independent(Vec<Marginal>),
    Degenerate(Vec<f64>),
    Mixture(Vec<(f64, RewardDistributionSpec)>),
    Permuted(Box<RewardDistributionSpec>, StatePermutation),
}

pub const WEIGHT_TOL: f64 = 1e-9;

impl RewardDistributionSpec {
    pub fn uniform() -> Self {
        RewardDistributionSpec::Iid(Marginal::Uniform)
    }

    pub fn permuted(self, phi: StatePermutation) -> Self {
        RewardDistributionSpec::Permuted(Box::new(self), phi)
    }

    pub fn validate(&self, n_states: usize) -> Result<()> {
        use RewardDistributionSpec::*;
        match self {
            Iid(m) => m.validate(),
            Independent(ms) => {
                if ms.len() != n_states {
                    return Err(Error::input(format!(
                        "{} marginals given for {n_states} states",
                        ms.len()
                    )));
                }
                ms.iter().try_for_each(Marginal::validate)
            }
            Degenerate(r) => {
                if r.len() != n_states {
                    return Err(Error::input(format!(
                        "reward vector has {} entries for {n_states} states",
                        r.len()
                    )));
                }
                if r.iter().any(|x| !x.is_finite()) {
                    return Err(Error::input("reward vector entries must be finite"));
                }
                Ok(())
            }
            Mixture(parts) => {
                if parts.is_empty() {
                    return Err(Error::input("empty mixture"));
                }
                if parts.iter().any(|(w, _)| !w.is_finite() || *w < 0.0) {
                    return Err(Error::input("mixture weights must be non-negative"));
                }
                let total: f64 = parts.iter().map(|(w, _)| w).sum();
                if (total - 1.0).abs() > WEIGHT_TOL {
                    return Err(Error::input(format!("mixture weights sum to {total}, not 1")));
                }
                parts.iter().try_for_each(|(_, p)| p.validate(n_states))
            }
            Permuted(inner, phi) => {
                if phi.len() != n_states {
                    return Err(Error::input(format!(
                        "permutation acts on {} states, MDP has {n_states}",
                        phi.len()
                    )));
                }
                inner.validate(n_states)
            }
        }
    }

    /// Support bounds `[b, c]` on every state's reward.
    pub fn bounds(&self) -> (f64, f64) {
        use RewardDistributionSpec::*;
        let fold = |it: &mut dyn Iterator<Item = (f64, f64)>| {
            it.fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), (b, c)| (lo.min(b), hi.max(c)))
        };
        match self {
            Iid(m) => m.bounds(),
            Independent(ms) => fold(&mut ms.iter().map(Marginal::bounds)),
            Degenerate(r) => fold(&mut r.iter().map(|&x| (x, x))),
            Mixture(parts) => fold(&mut parts.iter().map(|(_, p)| p.bounds())),
            Permuted(inner, _) => inner.bounds(),
        }
    }

    /// `E[R]`, the expected reward vector.
    pub fn mean(&self, n_states: usize) -> Vec<f64> {
        use RewardDistributionSpec::*;
        match self {
            Iid(m) => vec![m.mean(); n_states],
            Independent(ms) => ms.iter().map(Marginal::mean).collect(),
            Degenerate(r) => r.clone(),
            Mixture(parts) => {
                let mut out = vec![0.0; n_states];
                for (w, p) in parts {
                    for (o, x) in out.iter_mut().zip(p.mean(n_states)) {
                        *o += w * x;
                    }
                }
                out
            }
            Permuted(inner, phi) => phi.apply(&inner.mean(n_states)),
        }
    }

    pub fn is_iid(&self) -> bool {
        matches!(self, RewardDistributionSpec::Iid(_))
    }

    pub fn is_uniform_iid(&self) -> bool {
        matches!(self, RewardDistributionSpec::Iid(Marginal::Uniform))
    }

    /// True when every draw is the same vector.
    pub fn is_deterministic(&self) -> bool {
        self.finite_support().is_some_and(|s| s.len() == 1)
    }

    /// Atoms and their probabilities when the distribution is discrete.
    pub fn finite_support(&self) -> Option<Vec<(f64, Vec<f64>)>> {
        use RewardDistributionSpec::*;
        match self {
            Degenerate(r) => Some(vec![(1.0, r.clone())]),
            Mixture(parts) => {
                let mut out: Vec<(f64, Vec<f64>)> = Vec::new();
                for (w, p) in parts {
                    if *w == 0.0 {
                        continue;
                    }
                    for (q, v) in p.finite_support()? {
                        match out.iter_mut().find(|(_, u)| *u == v) {
                            Some(slot) => slot.0 += w * q,
                            None => out.push((w * q, v)),
                        }
                    }
                }
                Some(out)
            }
            Permuted(inner, phi) => Some(
                inner
                    .finite_support()?
                    .into_iter()
                    .map(|(w, v)| (w, phi.apply(&v)))
                    .collect(),
            ),
            Iid(_) | Independent(_) => None,
        }
    }

    /// One reward vector, determined by `(seed, index)` alone.
    pub fn sample(&self, n_states: usize, seed: u64, index: u64) -> Vec<f64> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        rng.set_stream(index);
        self.draw(n_states, &mut rng)
    }

    fn draw(&self, n: usize, rng: &mut ChaCha8Rng) -> Vec<f64> {
        use RewardDistributionSpec::*;
        match self {
            Iid(m) => (0..n).map(|_| m.draw(rng)).collect(),
            Independent(ms) => ms.iter().map(|m| m.draw(rng)).collect(),
            Degenerate(r) => r.clone(),
            Mixture(parts) => {
                let u: f64 = rng.random();
                let mut acc = 0.0;
                for (w, p) in parts {
                    acc += w;
                    if u < acc {
                        return p.draw(n, rng);
                    }
                }
                parts.last().unwrap().1.draw(n, rng)
            }
            Permuted(inner, phi) => phi.apply(&inner.draw(n, rng)),
        }
    }

    /// Parse the distribution mini-language; state names in cycles resolve against `mdp`.
    ///
    /// `uniform01 | cdfpow:k | quantiles:q0;q1;… | indep:m1,m2,… | degenerate:<file> |
    ///  vec:r1,r2,… | mix:w1*spec1+w2*spec2 | perm:(a b)(c d)*spec`
    pub fn parse(text: &str, mdp: &RewardlessMdp) -> Result<Self> {
        parse_spec(text.trim(), mdp)
    }
}

impl fmt::Display for RewardDistributionSpec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        use RewardDistributionSpec::*;
        match self {
            Iid(m) => write!(f, "{m}"),
            Independent(ms) => {
                let parts: Vec<String> = ms.iter().map(|m| m.to_string()).collect();
                write!(f, "indep:{}", parts.join(","))
            }
            Degenerate(r) => {
                let parts: Vec<String> = r.iter().map(|x| x.to_string()).collect();
                write!(f, "vec:{}", parts.join(","))
            }
            Mixture(parts) => {
                let items: Vec<String> = parts.iter().map(|(w, p)| format!("{w}*{p}")).collect();
                write!(f, "mix:{}", items.join("+"))
            }
            Permuted(inner, phi) => {
                let cyc: String = phi
                    .cycles()
                    .iter()
                    .map(|c| {
                        let s: Vec<String> = c.iter().map(|i| i.to_string()).collect();
                        format!("({})", s.join(" "))
                    })
                    .collect();
                let cyc = if cyc.is_empty() { "()".to_string() } else { cyc };
                write!(f, "perm:{cyc}*{inner}")
            }
        }
    }
}

fn parse_marginal(text: &str) -> Result<Marginal> {
    let m = if text == "uniform01" || text == "uniform" {
        Marginal::Uniform
    } else if let Some(k) = text.strip_prefix("cdfpow:") {
        Marginal::CdfPower(parse_num(k)?)
    } else if let Some(q) = text.strip_prefix("quantiles:") {
        Marginal::Quantiles(q.split(';').map(parse_num).collect::<Result<_>>()?)
    } else {
        return Err(Error::input(format!("unknown marginal '{text}'")));
    };
    m.validate()?;
    Ok(m)
}

fn parse_num(text: &str) -> Result<f64> {
    text.trim()
        .parse::<f64>()
        .map_err(|_| Error::input(format!("expected a number, got '{text}'")))
}

/// Split at `sep` outside parentheses.
fn split_top(text: &str, sep: char) -> Vec<&str> {
    let mut depth = 0i32;
    let mut out = Vec::new();
    let mut last = 0;
    for (i, ch) in text.char_indices() {
        match ch {
            '(' => depth += 1,
            ')' => depth -= 1,
            c if c == sep && depth == 0 => {
                out.push(&text[last..i]);
                last = i + c.len_utf8();
            }
            _ => {}
        }
    }
    out.push(&text[last..]);
    out
}

fn parse_spec(text: &str, mdp: &RewardlessMdp) -> Result<RewardDistributionSpec> {
    use RewardDistributionSpec::*;
    let n = mdp.n_states();
    let spec = if let Some(rest) = text.strip_prefix("mix:") {
        let mut parts = Vec::new();
        for item in split_top(rest, '+') {
            let (w, sub) = item
                .split_once('*')
                .ok_or_else(|| Error::input(format!("mixture item '{item}' must look like w*spec")))?;
            parts.push((parse_num(w)?, parse_spec(sub.trim(), mdp)?));
        }
        Mixture(parts)
    } else if let Some(rest) = text.strip_prefix("perm:") {
        let close = rest
            .rfind(")*")
            .ok_or_else(|| Error::input("permutation must look like perm:(a b)(c d)*spec"))?;
        let cycles = parse_cycles(&rest[..=close], mdp)?;
        let phi = StatePermutation::from_cycles(n, &cycles)?;
        Permuted(Box::new(parse_spec(rest[close + 2..].trim(), mdp)?), phi)
    } else if let Some(path) = text.strip_prefix("degenerate:") {
        let body = std::fs::read_to_string(path.trim())
            .map_err(|e| Error::input(format!("cannot read reward file {path}: {e}")))?;
        Degenerate(parse_vector_text(&body, mdp)?)
    } else if let Some(list) = text.strip_prefix("vec:") {
        Degenerate(list.split(',').map(parse_num).collect::<Result<_>>()?)
    } else if let Some(list) = text.strip_prefix("indep:") {
        Independent(list.split(',').map(|m| parse_marginal(m.trim())).collect::<Result<_>>()?)
    } else {
        Iid(parse_marginal(text)?)
    };
    spec.validate(n)?;
    Ok(spec)
}

fn parse_cycles(text: &str, mdp: &RewardlessMdp) -> Result<Vec<Vec<usize>>> {
    let mut out = Vec::new();
    let mut rest = text.trim();
    while !rest.is_empty() {
        let body = rest
            .strip_prefix('(')
            .and_then(|r| r.split_once(')'))
            .ok_or_else(|| Error::input(format!("malformed cycle notation '{text}'")))?;
        let cyc: Vec<usize> = body
            .0
            .split(|c: char| c == ',' || c.is_whitespace())
            .filter(|t| !t.is_empty())
            .map(|t| resolve_state(t, mdp))
            .collect::<Result<_>>()?;
        if cyc.len() > 1 {
            out.push(cyc);
        }
        rest = body.1.trim_start();
    }
    Ok(out)
}

fn resolve_state(token: &str, mdp: &RewardlessMdp) -> Result<usize> {
    mdp.state_index(token).or_else(|e| match token.parse::<usize>() {
        Ok(i) if i < mdp.n_states() => Ok(i),
        _ => Err(e),
    })
}

/// A reward vector from text: a JSON array, a JSON object keyed by state name, or
/// whitespace/comma separated numbers.
pub fn parse_vector_text(body: &str, mdp: &RewardlessMdp) -> Result<Vec<f64>> {
    let trimmed = body.trim();
    if trimmed.starts_with('{') {
        let map: std::collections::BTreeMap<String, f64> = serde_json::from_str(trimmed)
            .map_err(|e| Error::input(format!("reward object: {e}")))?;
        let mut out = vec![0.0; mdp.n_states()];
        for (k, v) in map {
            out[mdp.state_index(&k)?] = v;
        }
        return Ok(out);
    }
    if trimmed.starts_with('[') {
        return serde_json::from_str(trimmed).map_err(|e| Error::input(format!("reward array: {e}")));
    }
    trimmed
        .split(|c: char| c == ',' || c.is_whitespace())
        .filter(|t| !t.is_empty())
        .map(parse_num)
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    fn tiny() -> RewardlessMdp {
        RewardlessMdp::deterministic(
            vec!["a".into(), "b".into(), "c".into()],
            vec!["x".into()],
            &[vec![1], vec![2], vec![0]],
        )
        .unwrap()
    }

    #[test]
    fn degenerate_is_constant() {
        let d = RewardDistributionSpec::Degenerate(vec![0.1, 0.2, 0.3]);
        for i in 0..5 {
            assert_eq!(d.sample(3, 7, i), vec![0.1, 0.2, 0.3]);
        }
        assert!(d.is_deterministic());
    }

    #[test]
    fn uniform_mean_converges() {
        let d = RewardDistributionSpec::uniform();
        let n = 100_000;
        let mut sums = [0.0; 3];
        for i in 0..n {
            for (s, x) in sums.iter_mut().zip(d.sample(3, 1, i)) {
                *s += x;
            }
        }
        for s in sums {
            assert!((s / n as f64 - 0.5).abs() < 0.01);
        }
    }

    #[test]
    fn permuted_draw_is_pushforward() {
        let base = RewardDistributionSpec::uniform();
        let phi = StatePermutation::from_cycles(3, &[vec![0, 2, 1]]).unwrap();
        let pushed = base.clone().permuted(phi.clone());
        for i in 0..20 {
            assert_eq!(pushed.sample(3, 3, i), phi.apply(&base.sample(3, 3, i)));
        }
    }

    #[test]
    fn permutation_algebra() {
        let phi = StatePermutation::from_cycles(4, &[vec![0, 1, 2]]).unwrap();
        assert!(!phi.is_involution());
        assert!(phi.compose(&phi.inverse()).is_identity());
        let v = [1.0, 2.0, 3.0, 4.0];
        assert_eq!(phi.apply(&v), vec![3.0, 1.0, 2.0, 4.0]);
        assert_eq!(phi.compose(&phi).apply(&v), phi.apply(&phi.apply(&v)));
        assert!(StatePermutation::transposition(4, 1, 3).is_involution());
        assert!(StatePermutation::new(vec![0, 0]).is_err());
    }

    #[test]
    fn cdf_power_sampling_matches_mean() {
        let m = Marginal::CdfPower(2.0);
        assert_abs_diff_eq!(m.mean(), 2.0 / 3.0);
        let d = RewardDistributionSpec::Iid(m);
        let n = 50_000;
        let mean: f64 = (0..n).map(|i| d.sample(1, 5, i)[0]).sum::<f64>() / n as f64;
        assert!((mean - 2.0 / 3.0).abs() < 0.01);
    }

    #[test]
    fn quantile_table_round_trips() {
        let m = Marginal::Quantiles(vec![0.0, 0.2, 1.0]);
        assert_abs_diff_eq!(m.quantile(0.25), 0.1);
        assert_abs_diff_eq!(m.cdf(0.1), 0.25);
        assert_abs_diff_eq!(m.cdf(0.6), 0.75);
        assert_abs_diff_eq!(m.mean(), 0.35);
    }

    #[test]
    fn parses_mini_language() {
        let m = tiny();
        let s = RewardDistributionSpec::parse("mix:0.25*vec:1,0,0+0.75*perm:(a b)*vec:1,0,0", &m).unwrap();
        let support = s.finite_support().unwrap();
        assert_eq!(support.len(), 2);
        assert_abs_diff_eq!(support[1].0, 0.75);
        assert_eq!(support[1].1, vec![0.0, 1.0, 0.0]);
        assert_eq!(s.mean(3), vec![0.25, 0.75, 0.0]);
        let again = RewardDistributionSpec::parse(&s.to_string(), &m).unwrap();
        assert_eq!(s, again);
        assert!(RewardDistributionSpec::parse("mix:0.5*uniform01+0.4*uniform01", &m).is_err());
        assert!(RewardDistributionSpec::parse("cdfpow:-1", &m).is_err());
        assert!(RewardDistributionSpec::parse("indep:uniform01,cdfpow:2", &m).is_err());
        assert!(RewardDistributionSpec::parse("indep:uniform01,cdfpow:2,uniform01", &m).is_ok());
    }
}
