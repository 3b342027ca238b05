//! Strict-optimality test: is a candidate vector the unique maximizer of `x·r` for some `r` in
//! the box `[-1, 1]^d`? Solved as `max ε s.t. (c - o)·r ≥ ε for every other o`, by a dense
//! tableau simplex with Bland's rule.

use crate::error::{Error, Result};

/// Margins above this count as strictly optimal.
pub const STRICT_MARGIN: f64 = 1e-9;
/// Margins at or below this count as dominated; anything in between is indeterminate.
pub const ZERO_MARGIN: f64 = 1e-12;
const PIVOT_EPS: f64 = 1e-12;

#[derive(Clone, Debug, PartialEq)]
pub enum Dominance {
    NonDominated { margin: f64, witness: Vec<f64> },
    Dominated { margin: f64 },
    Indeterminate { margin: f64, witness: Vec<f64> },
}

impl Dominance {
    pub fn margin(&self) -> f64 {
        match self {
            Dominance::NonDominated { margin, .. }
            | Dominance::Dominated { margin }
            | Dominance::Indeterminate { margin, .. } => *margin,
        }
    }

    pub fn is_non_dominated(&self) -> bool {
        matches!(self, Dominance::NonDominated { .. })
    }

    pub fn label(&self) -> &'static str {
        match self {
            Dominance::NonDominated { .. } => "nondominated",
            Dominance::Dominated { .. } => "dominated",
            Dominance::Indeterminate { .. } => "indeterminate",
        }
    }
}

/// Maximize `c·x` subject to `A x ≤ b`, `x ≥ 0`, with `b ≥ 0` so the slack basis is feasible.
pub fn maximize(c: &[f64], a: &[Vec<f64>], b: &[f64]) -> Result<(f64, Vec<f64>)> {
    let n = c.len();
    let m = a.len();
    if b.iter().any(|&x| x < 0.0) {
        return Err(Error::Numerical("simplex needs a non-negative right-hand side".into()));
    }
    let width = n + m + 1;
    // rows 0..m are constraints, row m is the objective (reduced costs)
    let mut t = vec![0.0; (m + 1) * width];
    for i in 0..m {
        t[i * width..i * width + n].copy_from_slice(&a[i]);
        t[i * width + n + i] = 1.0;
        t[i * width + width - 1] = b[i];
    }
    for j in 0..n {
        t[m * width + j] = -c[j];
    }
    let mut basis: Vec<usize> = (n..n + m).collect();

    let max_iters = 50 * (n + m + 10) * (n + m + 10);
    for _ in 0..max_iters {
        // Bland: lowest-index column with negative reduced cost
        let Some(col) = (0..n + m).find(|&j| t[m * width + j] < -PIVOT_EPS) else {
            let mut x = vec![0.0; n + m];
            for (i, &bv) in basis.iter().enumerate() {
                x[bv] = t[i * width + width - 1];
            }
            x.truncate(n);
            return Ok((t[m * width + width - 1], x));
        };
        let mut row = None;
        let mut best = f64::INFINITY;
        for i in 0..m {
            let aij = t[i * width + col];
            if aij > PIVOT_EPS {
                let ratio = t[i * width + width - 1] / aij;
                let better = match row {
                    None => true,
                    Some(r) => ratio < best - 1e-15 || (ratio <= best + 1e-15 && basis[i] < basis[r]),
                };
                if better {
                    best = ratio;
                    row = Some(i);
                }
            }
        }
        let Some(r) = row else {
            return Err(Error::Numerical("linear program is unbounded".into()));
        };
        let piv = t[r * width + col];
        for j in 0..width {
            t[r * width + j] /= piv;
        }
        for i in 0..=m {
            if i == r {
                continue;
            }
            let f = t[i * width + col];
            if f != 0.0 {
                for j in 0..width {
                    t[i * width + j] -= f * t[r * width + j];
                }
            }
        }
        basis[r] = col;
    }
    Err(Error::Numerical("simplex iteration limit reached".into()))
}

/// Largest `ε` such that some `r ∈ [-1,1]^d` makes `candidate·r ≥ other·r + ε` for all others.
pub fn strict_optimality_margin(candidate: &[f64], others: &[&[f64]]) -> Result<(f64, Vec<f64>)> {
    let d = candidate.len();
    if others.is_empty() {
        return Ok((f64::INFINITY, vec![0.0; d]));
    }
    // r = x - 1 with x ∈ [0, 2]; ε = e - big with e ≥ 0
    let diffs: Vec<Vec<f64>> = others
        .iter()
        .map(|o| candidate.iter().zip(o.iter()).map(|(c, x)| c - x).collect())
        .collect();
    let big = diffs
        .iter()
        .map(|dv| dv.iter().sum::<f64>().abs())
        .fold(0.0f64, f64::max)
        + diffs.iter().map(|dv| dv.iter().map(|x| x.abs()).sum::<f64>()).fold(0.0, f64::max)
        + 1.0;
    let nvar = d + 1;
    let mut a = Vec::with_capacity(diffs.len() + d);
    let mut b = Vec::with_capacity(diffs.len() + d);
    for dv in &diffs {
        // e - dv·x ≤ big - dv·1
        let mut row = vec![0.0; nvar];
        for i in 0..d {
            row[i] = -dv[i];
        }
        row[d] = 1.0;
        a.push(row);
        b.push(big - dv.iter().sum::<f64>());
    }
    for i in 0..d {
        let mut row = vec![0.0; nvar];
        row[i] = 1.0;
        a.push(row);
        b.push(2.0);
    }
    let mut c = vec![0.0; nvar];
    c[d] = 1.0;
    let (_, x) = maximize(&c, &a, &b)?;
    let eps = x[d] - big;
    let witness: Vec<f64> = x[..d].iter().map(|v| v - 1.0).collect();
    Ok((eps, witness))
}

pub fn classify(candidate: &[f64], others: &[&[f64]]) -> Result<Dominance> {
    let (margin, witness) = strict_optimality_margin(candidate, others)?;
    Ok(if margin > STRICT_MARGIN {
        Dominance::NonDominated { margin, witness }
    } else if margin <= ZERO_MARGIN {
        Dominance::Dominated { margin }
    } else {
        Dominance::Indeterminate { margin, witness }
    })
}

/// Classify every member of `set` against the rest.
pub fn classify_all(set: &[Vec<f64>]) -> Result<Vec<Dominance>> {
    (0..set.len())
        .map(|i| {
            let others: Vec<&[f64]> = set
                .iter()
                .enumerate()
                .filter(|(j, _)| *j != i)
                .map(|(_, v)| v.as_slice())
                .collect();
            classify(&set[i], &others)
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    #[test]
    fn small_lp() {
        // max x + y s.t. x + 2y ≤ 4, 3x + y ≤ 6
        let (v, x) = maximize(&[1.0, 1.0], &[vec![1.0, 2.0], vec![3.0, 1.0]], &[4.0, 6.0]).unwrap();
        assert_abs_diff_eq!(v, 2.8, epsilon = 1e-12);
        assert_abs_diff_eq!(x[0], 1.6, epsilon = 1e-12);
        assert_abs_diff_eq!(x[1], 1.2, epsilon = 1e-12);
    }

    #[test]
    fn basis_vectors_are_strict_and_midpoints_are_not() {
        let e1 = vec![1.0, 0.0];
        let e2 = vec![0.0, 1.0];
        let mid = vec![0.5, 0.5];
        let set = vec![e1.clone(), e2.clone(), mid];
        let cls = classify_all(&set).unwrap();
        assert!(cls[0].is_non_dominated());
        assert!(cls[1].is_non_dominated());
        assert!(matches!(cls[2], Dominance::Dominated { .. }));
        // e1 vs e2 alone: best margin is 2 at r = (1, -1)
        let (m, w) = strict_optimality_margin(&e1, &[&e2]).unwrap();
        assert_abs_diff_eq!(m, 2.0, epsilon = 1e-12);
        assert_eq!(w, vec![1.0, -1.0]);
    }

    #[test]
    fn witness_verifies() {
        let set = vec![vec![1.0, 0.2, 0.0], vec![0.3, 0.3, 0.3], vec![0.0, 0.0, 1.5]];
        for (i, c) in classify_all(&set).unwrap().into_iter().enumerate() {
            if let Dominance::NonDominated { margin, witness } = c {
                let mine: f64 = set[i].iter().zip(&witness).map(|(a, b)| a * b).sum();
                for (j, o) in set.iter().enumerate() {
                    if j != i {
                        let theirs: f64 = o.iter().zip(&witness).map(|(a, b)| a * b).sum();
                        assert!(mine - theirs >= margin - 1e-9);
                    }
                }
            }
        }
    }
}
