use crate::error::{Error, Result};
use rayon::prelude::*;
use std::fmt;

/// Samples per parallel work unit. Fixed so reductions do not depend on the thread count.
const CHUNK: usize = 1024;

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Sampling {
    pub samples: usize,
    pub seed: u64,
    /// Two-sided confidence level of reported intervals, e.g. 0.95.
    pub confidence: f64,
}

impl Sampling {
    pub fn new(samples: usize, seed: u64) -> Self {
        Sampling { samples, seed, confidence: 0.95 }
    }

    pub fn with_confidence(mut self, confidence: f64) -> Self {
        self.confidence = confidence;
        self
    }

    pub fn validate(&self) -> Result<()> {
        if self.samples == 0 {
            return Err(Error::input("sample count must be at least 1"));
        }
        if !(self.confidence > 0.0 && self.confidence < 1.0) {
            return Err(Error::input(format!(
                "confidence must lie strictly between 0 and 1, got {}",
                self.confidence
            )));
        }
        Ok(())
    }

    /// Hoeffding radius for the mean of `samples` draws bounded in an interval of width `width`.
    pub fn radius(&self, width: f64) -> f64 {
        hoeffding_radius(self.samples, width, self.confidence)
    }
}

impl Default for Sampling {
    fn default() -> Self {
        Sampling::new(100_000, 0)
    }
}

pub fn hoeffding_radius(n: usize, width: f64, confidence: f64) -> f64 {
    let delta = 1.0 - confidence;
    width * ((2.0 / delta).ln() / (2.0 * n as f64)).sqrt()
}

#[derive(Clone, Debug, PartialEq)]
pub struct EstimateWithCI {
    pub estimate: f64,
    pub n: usize,
    pub radius: f64,
    pub confidence: f64,
    pub seed: u64,
    /// Computed in closed form or from a deterministic distribution; `radius` is 0.
    pub exact: bool,
}

impl EstimateWithCI {
    pub fn exact(value: f64, seed: u64) -> Self {
        EstimateWithCI { estimate: value, n: 1, radius: 0.0, confidence: 1.0, seed, exact: true }
    }

    pub fn from_mean(mean: f64, sampling: &Sampling, width: f64) -> Self {
        EstimateWithCI {
            estimate: mean,
            n: sampling.samples,
            radius: sampling.radius(width),
            confidence: sampling.confidence,
            seed: sampling.seed,
            exact: false,
        }
    }

    pub fn lower(&self) -> f64 {
        self.estimate - self.radius
    }

    pub fn upper(&self) -> f64 {
        self.estimate + self.radius
    }

    pub fn covers(&self, truth: f64) -> bool {
        (self.estimate - truth).abs() <= self.radius
    }
}

impl fmt::Display for EstimateWithCI {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.exact {
            write!(f, "{:.6} (exact)", self.estimate)
        } else {
            write!(f, "{:.6} ± {:.6} ({}% CI, n={})", self.estimate, self.radius, self.confidence * 100.0, self.n)
        }
    }
}

/// Sum `k` per-sample statistics over sample indices `0..n`.
///
/// Work is split into fixed chunks whose partial sums are added in index order,
/// so the result is bit-identical for any number of threads.
pub fn sum_samples<F>(n: usize, k: usize, f: F) -> Result<Vec<f64>>
where
    F: Fn(u64, &mut [f64]) -> Result<()> + Sync,
{
    let chunks = n.div_ceil(CHUNK);
    let partial: Vec<Vec<f64>> = (0..chunks)
        .into_par_iter()
        .map(|c| {
            let mut acc = vec![0.0; k];
            let mut buf = vec![0.0; k];
            for i in c * CHUNK..((c + 1) * CHUNK).min(n) {
                buf.iter_mut().for_each(|x| *x = 0.0);
                f(i as u64, &mut buf)?;
                for (a, b) in acc.iter_mut().zip(&buf) {
                    *a += b;
                }
            }
            Ok(acc)
        })
        .collect::<Result<_>>()?;
    let mut total = vec![0.0; k];
    for p in partial {
        for (t, x) in total.iter_mut().zip(p) {
            *t += x;
        }
    }
    Ok(total)
}

/// Mean of one per-sample statistic.
pub fn mean_samples<F>(n: usize, f: F) -> Result<f64>
where
    F: Fn(u64) -> Result<f64> + Sync,
{
    let s = sum_samples(n, 1, |i, out| {
        out[0] = f(i)?;
        Ok(())
    })?;
    Ok(s[0] / n as f64)
}
