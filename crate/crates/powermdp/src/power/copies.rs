//! Involution search for set containment up to a coordinate swap.

use super::dist::StatePermutation;
use crate::error::{Error, Result};

pub const DEFAULT_INDEX_CAP: usize = 12;
const MEMBER_TOL: f64 = 1e-9;

#[derive(Clone, Debug, PartialEq)]
pub struct CopyConstraints {
    /// Indices every involution must fix.
    pub fixed: Vec<usize>,
    pub cap: usize,
}

impl Default for CopyConstraints {
    fn default() -> Self {
        CopyConstraints { fixed: Vec::new(), cap: DEFAULT_INDEX_CAP }
    }
}

/// All involutions on `0..n` that fix the flagged indices, identity first.
pub fn involutions(n: usize, fixed: &[bool]) -> Vec<StatePermutation> {
    fn go(i: usize, map: &mut Vec<usize>, open: &mut Vec<bool>, fixed: &[bool], out: &mut Vec<StatePermutation>) {
        let n = map.len();
        let Some(i) = (i..n).find(|&k| open[k]) else {
            out.push(StatePermutation::new(map.clone()).expect("involution"));
            return;
        };
        open[i] = false;
        map[i] = i;
        go(i + 1, map, open, fixed, out);
        if !fixed[i] {
            for j in i + 1..n {
                if open[j] && !fixed[j] {
                    open[j] = false;
                    map[i] = j;
                    map[j] = i;
                    go(i + 1, map, open, fixed, out);
                    map[j] = j;
                    map[i] = i;
                    open[j] = true;
                }
            }
        }
        open[i] = true;
    }
    let mut out = Vec::new();
    go(0, &mut (0..n).collect(), &mut vec![true; n], fixed, &mut out);
    out
}

/// Apply `φ` to each length-`dim` block of `v`.
pub fn apply_blocks(phi: &StatePermutation, v: &[f64], dim: usize) -> Vec<f64> {
    v.chunks(dim).flat_map(|b| phi.apply(b)).collect()
}

fn member(v: &[f64], set: &[Vec<f64>]) -> bool {
    set.iter().any(|u| u.iter().zip(v).all(|(a, b)| (a - b).abs() <= MEMBER_TOL))
}

fn image(phi: &StatePermutation, set: &[Vec<f64>], dim: usize) -> Vec<Vec<f64>> {
    set.iter().map(|v| apply_blocks(phi, v, dim)).collect()
}

fn set_eq(a: &[Vec<f64>], b: &[Vec<f64>]) -> bool {
    a.iter().all(|v| member(v, b)) && b.iter().all(|v| member(v, a))
}

fn check_dims(sets: &[&[Vec<f64>]], dim: usize, c: &CopyConstraints) -> Result<Vec<bool>> {
    if dim == 0 {
        return Err(Error::input("vector dimension must be positive"));
    }
    if dim > c.cap {
        return Err(Error::size_cap("involution search index count", dim as f64, c.cap as f64));
    }
    for set in sets {
        if set.iter().any(|v| v.is_empty() || v.len() % dim != 0) {
            return Err(Error::input(format!("every vector must have a length divisible by {dim}")));
        }
    }
    let mut fixed = vec![false; dim];
    for &i in &c.fixed {
        if i >= dim {
            return Err(Error::input(format!("fixed index {i} out of range")));
        }
        fixed[i] = true;
    }
    Ok(fixed)
}

/// Involutions `φ` with `φ·small ⊆ big`. Vectors may stack several blocks of length `dim`
/// (e.g. a visit function at several discounts); `φ` acts on each block.
pub fn check_copy_containment(
    big: &[Vec<f64>],
    small: &[Vec<f64>],
    dim: usize,
    constraints: &CopyConstraints,
) -> Result<Vec<StatePermutation>> {
    let fixed = check_dims(&[big, small], dim, constraints)?;
    Ok(involutions(dim, &fixed)
        .into_iter()
        .filter(|phi| small.iter().all(|v| member(&apply_blocks(phi, v, dim), big)))
        .collect())
}

/// `n` involutions showing that `b` contains `n` copies of `a`: each `φ_i·a ⊆ b`, the images
/// are distinct, and `φ_i` maps every other image `φ_j·a` onto itself.
pub fn find_copies(
    a: &[Vec<f64>],
    b: &[Vec<f64>],
    n: usize,
    dim: usize,
    constraints: &CopyConstraints,
) -> Result<Option<Vec<StatePermutation>>> {
    let witnesses = check_copy_containment(b, a, dim, constraints)?;
    let images: Vec<Vec<Vec<f64>>> = witnesses.iter().map(|phi| image(phi, a, dim)).collect();
    let compatible = |i: usize, j: usize| {
        !set_eq(&images[i], &images[j])
            && set_eq(&image(&witnesses[i], &images[j], dim), &images[j])
            && set_eq(&image(&witnesses[j], &images[i], dim), &images[i])
    };
    fn extend(
        chosen: &mut Vec<usize>,
        start: usize,
        n: usize,
        total: usize,
        ok: &dyn Fn(usize, usize) -> bool,
    ) -> bool {
        if chosen.len() == n {
            return true;
        }
        for k in start..total {
            if chosen.iter().all(|&c| ok(c, k)) {
                chosen.push(k);
                if extend(chosen, k + 1, n, total, ok) {
                    return true;
                }
                chosen.pop();
            }
        }
        false
    }
    let mut chosen = Vec::new();
    if n == 0 || extend(&mut chosen, 0, n, witnesses.len(), &compatible) {
        Ok(Some(chosen.into_iter().map(|k| witnesses[k].clone()).collect()))
    } else {
        Ok(None)
    }
}

/// Largest `n` for which [`find_copies`] succeeds.
pub fn max_copies(a: &[Vec<f64>], b: &[Vec<f64>], dim: usize, constraints: &CopyConstraints) -> Result<usize> {
    let mut n = 0;
    while find_copies(a, b, n + 1, dim, constraints)?.is_some() {
        n += 1;
    }
    Ok(n)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::mdp::unit;

    #[test]
    fn involution_counts() {
        // telephone numbers 1, 1, 2, 4, 10, 26
        let counts: Vec<usize> = (0..6).map(|n| involutions(n, &vec![false; n]).len()).collect();
        assert_eq!(counts, vec![1, 1, 2, 4, 10, 26]);
        assert_eq!(involutions(4, &[true, false, false, false]).len(), 4);
        assert!(involutions(5, &[false; 5]).iter().all(|p| p.is_involution()));
    }

    #[test]
    fn subset_has_identity_witness() {
        let x = vec![unit(3, 0), unit(3, 1)];
        let w = check_copy_containment(&x, &x[..1], 3, &CopyConstraints::default()).unwrap();
        assert!(w[0].is_identity());
    }

    #[test]
    fn cards_have_two_copies() {
        // indices: 0 spade, 1 heart, 2 diamond
        let a = vec![unit(3, 2)];
        let b = vec![unit(3, 0), unit(3, 1)];
        let c = CopyConstraints::default();
        let phis = find_copies(&a, &b, 2, 3, &c).unwrap().unwrap();
        assert_eq!(phis.len(), 2);
        assert_eq!(max_copies(&a, &b, 3, &c).unwrap(), 2);
        assert!(find_copies(&b, &a, 1, 3, &c).unwrap().is_none());
    }

    #[test]
    fn cap_enforced() {
        let v = vec![vec![0.0; 13]];
        let err = check_copy_containment(&v, &v, 13, &CopyConstraints::default()).unwrap_err();
        assert!(matches!(err, Error::SizeCap { .. }));
    }
}
