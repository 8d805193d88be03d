//! Self-similar subsets of [0,1] with known Hausdorff dimension, and samples
//! from their natural (self-similar) probability measures.

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::fbm::TimeGrid;
use crate::rng::aux_rng;

/// Default cap on the number of interval records a construction may create.
pub const DEFAULT_MAX_INTERVALS: usize = 1 << 24;

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Interval {
    pub lo: f64,
    pub hi: f64,
}

impl Interval {
    #[inline]
    pub fn contains(&self, t: f64) -> bool {
        self.lo <= t && t <= self.hi
    }

    #[inline]
    pub fn len(&self) -> f64 {
        self.hi - self.lo
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "kebab-case", deny_unknown_fields)]
pub enum SetKind {
    FullInterval,
    MiddleThirds,
    GeneralizedCantor { m: u32, r: f64 },
}

/// Generation-`k` approximation of a self-similar set: a sorted union of
/// disjoint closed intervals.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct FractalSet {
    pub kind: SetKind,
    pub generation: u32,
    pub theoretical_dim: f64,
    pub intervals: Vec<Interval>,
}

pub fn full_interval() -> FractalSet {
    FractalSet {
        kind: SetKind::FullInterval,
        generation: 0,
        theoretical_dim: 1.0,
        intervals: vec![Interval { lo: 0.0, hi: 1.0 }],
    }
}

pub fn middle_thirds_cantor(k: u32) -> Result<FractalSet> {
    middle_thirds_cantor_capped(k, DEFAULT_MAX_INTERVALS)
}

pub fn middle_thirds_cantor_capped(k: u32, cap: usize) -> Result<FractalSet> {
    let intervals = cantor_intervals(2, 1.0 / 3.0, k, cap)?;
    Ok(FractalSet {
        kind: SetKind::MiddleThirds,
        generation: k,
        theoretical_dim: 2f64.ln() / 3f64.ln(),
        intervals,
    })
}

/// `m` equally spaced copies scaled by `r` per generation; dimension `ln m / ln(1/r)`.
pub fn generalized_cantor(m: u32, r: f64, k: u32) -> Result<FractalSet> {
    generalized_cantor_capped(m, r, k, DEFAULT_MAX_INTERVALS)
}

pub fn generalized_cantor_capped(m: u32, r: f64, k: u32, cap: usize) -> Result<FractalSet> {
    let intervals = cantor_intervals(m, r, k, cap)?;
    Ok(FractalSet {
        kind: SetKind::GeneralizedCantor { m, r },
        generation: k,
        theoretical_dim: cantor_dimension(m, r),
        intervals,
    })
}

/// Ratio giving a two-branch Cantor set of dimension `dim`.
pub fn two_branch_ratio_for_dim(dim: f64) -> Result<f64> {
    if !(dim > 0.0 && dim < 1.0) {
        return Err(Error::InvalidArgument(format!("target dimension {dim} outside (0,1)")));
    }
    Ok(2f64.powf(-1.0 / dim))
}

#[inline]
pub fn cantor_dimension(m: u32, r: f64) -> f64 {
    f64::from(m).ln() / (1.0 / r).ln()
}

fn cantor_intervals(m: u32, r: f64, k: u32, cap: usize) -> Result<Vec<Interval>> {
    if m < 2 || !(r > 0.0) || f64::from(m) * r >= 1.0 {
        return Err(Error::InvalidRatio { m, r });
    }
    let count = u128::from(m).checked_pow(k).unwrap_or(u128::MAX);
    if count > cap as u128 {
        return Err(Error::GenerationTooLarge { generation: k, intervals: count, cap });
    }
    let mut intervals = vec![Interval { lo: 0.0, hi: 1.0 }];
    for _ in 0..k {
        let mut next = Vec::with_capacity(intervals.len() * m as usize);
        for iv in &intervals {
            let len = iv.len();
            let child = len * r;
            let gap = len * (1.0 - r) / f64::from(m - 1);
            for j in 0..m {
                let lo = iv.lo + f64::from(j) * gap;
                // last child shares the parent's right endpoint exactly
                let hi = if j == m - 1 { iv.hi } else { lo + child };
                next.push(Interval { lo, hi });
            }
        }
        intervals = next;
    }
    Ok(intervals)
}

impl FractalSet {
    pub fn contains(&self, t: f64) -> bool {
        self.component_of(t).is_some()
    }

    /// Index of the interval containing `t`.
    pub fn component_of(&self, t: f64) -> Option<usize> {
        let i = self.intervals.partition_point(|iv| iv.hi < t);
        (i < self.intervals.len() && self.intervals[i].contains(t)).then_some(i)
    }

    pub fn total_length(&self) -> f64 {
        self.intervals.iter().map(Interval::len).sum()
    }

    /// Indices of grid points inside the set, each tagged with its interval.
    pub fn grid_points(&self, grid: &TimeGrid) -> Vec<(usize, usize)> {
        grid.times()
            .iter()
            .enumerate()
            .filter_map(|(i, &t)| self.component_of(t).map(|c| (i, c)))
            .collect()
    }
}

/// Discrete probability measure on [0,1].
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct WeightedTimeSet {
    times: Vec<f64>,
    weights: Vec<f64>,
}

impl WeightedTimeSet {
    pub fn new(times: Vec<f64>, weights: Vec<f64>) -> Result<Self> {
        if times.len() != weights.len() || times.is_empty() {
            return Err(Error::InvalidArgument("times and weights must be non-empty and of equal length".into()));
        }
        if times.iter().any(|t| !(0.0..=1.0).contains(t)) {
            return Err(Error::InvalidArgument("times must lie in [0,1]".into()));
        }
        if weights.iter().any(|w| !(*w >= 0.0)) {
            return Err(Error::InvalidArgument("weights must be non-negative".into()));
        }
        let total: f64 = weights.iter().sum();
        if (total - 1.0).abs() > 1e-12 {
            return Err(Error::InvalidArgument(format!("weights sum to {total}, not 1")));
        }
        Ok(Self { times, weights })
    }

    pub fn uniform(times: Vec<f64>) -> Result<Self> {
        let n = times.len().max(1);
        let weights = vec![1.0 / n as f64; times.len()];
        Self::new(times, weights)
    }

    pub fn times(&self) -> &[f64] {
        &self.times
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    pub fn len(&self) -> usize {
        self.times.len()
    }

    pub fn is_empty(&self) -> bool {
        self.times.is_empty()
    }
}

/// `n` i.i.d. draws from the natural measure of the generation-k set: a
/// uniformly chosen interval (every interval carries mass `m^{-k}`), then a
/// uniform point inside it. Times are returned sorted, weights are `1/n`.
pub fn sample_natural_measure(set: &FractalSet, n: usize, seed: u64) -> Result<WeightedTimeSet> {
    if n == 0 {
        return Err(Error::InvalidArgument("need at least one sample".into()));
    }
    let mut rng = aux_rng(seed, 0);
    let count = set.intervals.len();
    let mut times: Vec<f64> = (0..n)
        .map(|_| {
            let iv = set.intervals[rng.random_range(0..count)];
            let u: f64 = rng.random();
            (iv.lo + u * iv.len()).clamp(iv.lo, iv.hi)
        })
        .collect();
    times.sort_by(f64::total_cmp);
    WeightedTimeSet::uniform(times)
}
