//! Exact Gaussian simulation of fractional Brownian motion and of the mixed
//! process `Z = B^H + B^{α'}` built from two independent fBms.
//!
//! Paths are produced by simulating increments and summing them. Uniform
//! grids starting at 0 use circulant embedding of fractional Gaussian noise;
//! every other grid (and uniform grids whose embedding fails) goes through a
//! dense Cholesky factor of the increment covariance.

use std::fmt;
use std::sync::Arc;

use nalgebra::DMatrix;
use rand::Rng;
use rand_distr::StandardNormal;
use rayon::prelude::*;
use rustfft::num_complex::Complex;
use rustfft::{Fft, FftPlanner};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::{cholesky_psd, LowerTriangular};
use crate::rng::{path_stream, stream_rng};

/// Largest grid accepted by the dense sampler.
pub const CHOLESKY_MAX_POINTS: usize = 4096;

/// Negative circulant eigenvalues smaller than this fraction of the largest
/// one are rounding noise and get clamped to zero.
pub const CIRCULANT_CLAMP_REL: f64 = 1e-8;

/// A Hurst index in the open interval (0, 1).
#[derive(Clone, Copy, Debug, PartialEq, PartialOrd, Serialize, Deserialize)]
#[serde(try_from = "f64", into = "f64")]
pub struct HurstIndex(f64);

impl HurstIndex {
    pub fn new(value: f64) -> Result<Self> {
        if value > 0.0 && value < 1.0 {
            Ok(Self(value))
        } else {
            Err(Error::InvalidHurst(value))
        }
    }

    #[inline]
    pub fn value(self) -> f64 {
        self.0
    }
}

impl TryFrom<f64> for HurstIndex {
    type Error = Error;
    fn try_from(value: f64) -> Result<Self> {
        Self::new(value)
    }
}

impl From<HurstIndex> for f64 {
    fn from(h: HurstIndex) -> f64 {
        h.0
    }
}

impl fmt::Display for HurstIndex {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        self.0.fmt(f)
    }
}

/// Strictly increasing sample times in [0, 1].
#[derive(Clone, Debug, PartialEq)]
pub struct TimeGrid {
    times: Vec<f64>,
    uniform: bool,
}

/// Compact description of a grid, as stored in output envelopes.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "kebab-case")]
pub enum GridSpec {
    /// `steps + 1` points `j / steps`.
    Uniform { steps: usize },
    Explicit { times: Vec<f64> },
}

impl TimeGrid {
    /// `steps + 1` equally spaced points `0, 1/steps, …, 1`.
    pub fn uniform(steps: usize) -> Result<Self> {
        if steps == 0 {
            return Err(Error::InvalidGrid("a uniform grid needs at least one step".into()));
        }
        let n = steps as f64;
        let times = (0..=steps).map(|j| j as f64 / n).collect();
        Ok(Self { times, uniform: true })
    }

    pub fn from_times(times: Vec<f64>) -> Result<Self> {
        if times.is_empty() {
            return Err(Error::InvalidGrid("no times".into()));
        }
        if let Some(bad) = times.iter().find(|t| !(0.0..=1.0).contains(*t)) {
            return Err(Error::InvalidGrid(format!("time {bad} outside [0,1]")));
        }
        if times.windows(2).any(|w| w[1] <= w[0]) {
            return Err(Error::InvalidGrid("times must be strictly increasing".into()));
        }
        Ok(Self { times, uniform: false })
    }

    pub fn from_spec(spec: &GridSpec) -> Result<Self> {
        match spec {
            GridSpec::Uniform { steps } => Self::uniform(*steps),
            GridSpec::Explicit { times } => Self::from_times(times.clone()),
        }
    }

    pub fn spec(&self) -> GridSpec {
        if self.uniform {
            GridSpec::Uniform { steps: self.times.len() - 1 }
        } else {
            GridSpec::Explicit { times: self.times.clone() }
        }
    }

    #[inline]
    pub fn times(&self) -> &[f64] {
        &self.times
    }

    #[inline]
    pub fn len(&self) -> usize {
        self.times.len()
    }

    #[inline]
    pub fn is_empty(&self) -> bool {
        self.times.is_empty()
    }

    #[inline]
    pub fn is_uniform(&self) -> bool {
        self.uniform
    }

    /// Position of `t` on the grid: index `i` and weight `w` such that the
    /// linear interpolant is `(1-w) v[i] + w v[i+1]`. `None` outside the grid.
    pub fn locate(&self, t: f64) -> Option<(usize, f64)> {
        let first = self.times[0];
        let last = *self.times.last().unwrap();
        if !(first..=last).contains(&t) {
            return None;
        }
        if self.times.len() == 1 {
            return Some((0, 0.0));
        }
        let i = if self.uniform {
            let steps = self.times.len() - 1;
            ((t * steps as f64).floor() as usize).min(steps - 1)
        } else {
            self.times.partition_point(|&s| s <= t).saturating_sub(1).min(self.times.len() - 2)
        };
        let (a, b) = (self.times[i], self.times[i + 1]);
        Some((i, ((t - a) / (b - a)).clamp(0.0, 1.0)))
    }
}

/// `E[B(s)B(t)] = ½(|s|^{2H} + |t|^{2H} − |t−s|^{2H})`.
#[inline]
pub fn fbm_covariance(s: f64, t: f64, hurst: HurstIndex) -> f64 {
    let two_h = 2.0 * hurst.value();
    0.5 * (s.abs().powf(two_h) + t.abs().powf(two_h) - (t - s).abs().powf(two_h))
}

/// Covariance of one coordinate of `Z = B^H + B^{α'}`.
#[inline]
pub fn mixed_covariance(s: f64, t: f64, hurst: HurstIndex, alpha_prime: HurstIndex) -> f64 {
    fbm_covariance(s, t, hurst) + fbm_covariance(s, t, alpha_prime)
}

pub fn build_covariance_matrix(grid: &TimeGrid, hurst: HurstIndex) -> DMatrix<f64> {
    let t = grid.times();
    let n = t.len();
    let mut m = DMatrix::zeros(n, n);
    for i in 0..n {
        for j in 0..=i {
            let c = fbm_covariance(t[i], t[j], hurst);
            m[(i, j)] = c;
            m[(j, i)] = c;
        }
    }
    m
}

/// Autocovariance of unit-step fractional Gaussian noise at lag `k`.
#[inline]
fn fgn_autocovariance(k: usize, two_h: f64) -> f64 {
    let k = k as f64;
    0.5 * ((k + 1.0).powf(two_h) - 2.0 * k.powf(two_h) + (k - 1.0).abs().powf(two_h))
}

/// Covariance of the increments between consecutive points of `points`.
fn increment_covariance(points: &[f64], hurst: HurstIndex) -> DMatrix<f64> {
    let two_h = 2.0 * hurst.value();
    let p = |a: f64, b: f64| (a - b).abs().powf(two_h);
    let n = points.len() - 1;
    let mut m = DMatrix::zeros(n, n);
    for i in 0..n {
        for j in 0..=i {
            let c = 0.5
                * (p(points[i + 1], points[j]) + p(points[i], points[j + 1])
                    - p(points[i + 1], points[j + 1])
                    - p(points[i], points[j]));
            m[(i, j)] = c;
            m[(j, i)] = c;
        }
    }
    m
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum SamplerKind {
    Circulant,
    Cholesky,
}

struct CirculantNoise {
    steps: usize,
    sqrt_eig: Vec<f64>,
    fft: Arc<dyn Fft<f64>>,
    scale: f64,
}

impl CirculantNoise {
    fn new(hurst: HurstIndex, steps: usize) -> Result<Self> {
        let two_h = 2.0 * hurst.value();
        let m = steps.next_power_of_two();
        let size = 2 * m;
        let mut row: Vec<Complex<f64>> = Vec::with_capacity(size);
        for k in 0..=m {
            row.push(Complex::new(fgn_autocovariance(k, two_h), 0.0));
        }
        for k in (1..m).rev() {
            row.push(Complex::new(fgn_autocovariance(k, two_h), 0.0));
        }
        let fft = FftPlanner::new().plan_fft_forward(size);
        fft.process(&mut row);

        let max = row.iter().map(|c| c.re).fold(f64::NEG_INFINITY, f64::max);
        let min = row.iter().map(|c| c.re).fold(f64::INFINITY, f64::min);
        if min < 0.0 && -min > CIRCULANT_CLAMP_REL * max {
            return Err(Error::CirculantNotPsd { min, max });
        }
        let sqrt_eig = row.iter().map(|c| (c.re.max(0.0) / size as f64).sqrt()).collect();
        Ok(Self {
            steps,
            sqrt_eig,
            fft,
            scale: (1.0 / steps as f64).powf(hurst.value()),
        })
    }

    fn increments<R: Rng + ?Sized>(&self, rng: &mut R) -> Vec<f64> {
        let mut buf: Vec<Complex<f64>> = self
            .sqrt_eig
            .iter()
            .map(|&s| {
                let re: f64 = rng.sample(StandardNormal);
                let im: f64 = rng.sample(StandardNormal);
                Complex::new(re * s, im * s)
            })
            .collect();
        self.fft.process(&mut buf);
        buf[..self.steps].iter().map(|c| c.re * self.scale).collect()
    }
}

struct CholeskyIncrements {
    factor: LowerTriangular,
    // grid does not contain 0, so the first increment starts from a virtual origin
    virtual_origin: bool,
}

impl CholeskyIncrements {
    fn new(hurst: HurstIndex, grid: &TimeGrid) -> Result<Self> {
        if grid.len() > CHOLESKY_MAX_POINTS {
            return Err(Error::InvalidGrid(format!(
                "{} points exceed the dense sampler limit of {CHOLESKY_MAX_POINTS}",
                grid.len()
            )));
        }
        let virtual_origin = grid.times()[0] > 0.0;
        let mut points = Vec::with_capacity(grid.len() + 1);
        if virtual_origin {
            points.push(0.0);
        }
        points.extend_from_slice(grid.times());
        let factor = if points.len() > 1 {
            cholesky_psd(&increment_covariance(&points, hurst))?
        } else {
            cholesky_psd(&DMatrix::zeros(0, 0))?
        };
        Ok(Self { factor, virtual_origin })
    }

    fn increments<R: Rng + ?Sized>(&self, rng: &mut R) -> Vec<f64> {
        let z: Vec<f64> = (0..self.factor.dim()).map(|_| rng.sample(StandardNormal)).collect();
        self.factor.mul(&z)
    }
}

enum Method {
    Circulant(CirculantNoise),
    Cholesky(CholeskyIncrements),
}

/// Reusable exact sampler for one `(H, grid)` pair.
pub struct FbmSampler {
    hurst: HurstIndex,
    grid: TimeGrid,
    method: Method,
}

impl FbmSampler {
    pub fn new(hurst: HurstIndex, grid: &TimeGrid) -> Result<Self> {
        let method = if grid.is_uniform() && grid.len() > 1 {
            match CirculantNoise::new(hurst, grid.len() - 1) {
                Ok(c) => Method::Circulant(c),
                Err(Error::CirculantNotPsd { .. }) => {
                    Method::Cholesky(CholeskyIncrements::new(hurst, grid)?)
                }
                Err(e) => return Err(e),
            }
        } else {
            Method::Cholesky(CholeskyIncrements::new(hurst, grid)?)
        };
        Ok(Self { hurst, grid: grid.clone(), method })
    }

    /// Dense sampler regardless of grid shape.
    pub fn new_cholesky(hurst: HurstIndex, grid: &TimeGrid) -> Result<Self> {
        Ok(Self {
            hurst,
            grid: grid.clone(),
            method: Method::Cholesky(CholeskyIncrements::new(hurst, grid)?),
        })
    }

    pub fn kind(&self) -> SamplerKind {
        match self.method {
            Method::Circulant(_) => SamplerKind::Circulant,
            Method::Cholesky(_) => SamplerKind::Cholesky,
        }
    }

    pub fn hurst(&self) -> HurstIndex {
        self.hurst
    }

    pub fn grid(&self) -> &TimeGrid {
        &self.grid
    }

    /// One scalar fBm path on the grid.
    pub fn sample_coordinate<R: Rng + ?Sized>(&self, rng: &mut R) -> Vec<f64> {
        let mut values = Vec::with_capacity(self.grid.len());
        let mut acc = 0.0;
        match &self.method {
            Method::Circulant(c) => {
                values.push(0.0);
                for dx in c.increments(rng) {
                    acc += dx;
                    values.push(acc);
                }
            }
            Method::Cholesky(c) => {
                if !c.virtual_origin {
                    values.push(0.0);
                }
                for dx in c.increments(rng) {
                    acc += dx;
                    values.push(acc);
                }
            }
        }
        debug_assert_eq!(values.len(), self.grid.len());
        values
    }

    /// `d` independent coordinates drawn from the streams of `component`.
    pub fn sample_coordinates(&self, d: usize, seed: u64, component: u32) -> Vec<Vec<f64>> {
        (0..d)
            .into_par_iter()
            .map(|j| {
                let mut rng = stream_rng(seed, path_stream(component, j as u32));
                self.sample_coordinate(&mut rng)
            })
            .collect()
    }

    pub fn path(&self, d: usize, seed: u64) -> SamplePath {
        SamplePath {
            grid: self.grid.clone(),
            values: self.sample_coordinates(d, seed, 0),
            hurst_components: vec![self.hurst],
            seeds: vec![seed],
        }
    }
}

/// Values of a d-dimensional process on a grid.
#[derive(Clone, Debug, PartialEq)]
pub struct SamplePath {
    pub grid: TimeGrid,
    /// One array per coordinate, each as long as the grid.
    pub values: Vec<Vec<f64>>,
    /// `[H]` for plain fBm, `[H, α']` for the mixed process.
    pub hurst_components: Vec<HurstIndex>,
    /// One seed per component.
    pub seeds: Vec<u64>,
}

impl SamplePath {
    pub fn dim(&self) -> usize {
        self.values.len()
    }

    pub fn len(&self) -> usize {
        self.grid.len()
    }

    pub fn is_empty(&self) -> bool {
        self.grid.is_empty()
    }

    /// Value vector at grid index `i`.
    pub fn point(&self, i: usize) -> Vec<f64> {
        self.values.iter().map(|c| c[i]).collect()
    }

    /// Linear interpolation at an arbitrary time inside the grid range.
    pub fn value_at(&self, t: f64) -> Option<Vec<f64>> {
        let (i, w) = self.grid.locate(t)?;
        Some(
            self.values
                .iter()
                .map(|c| if w == 0.0 { c[i] } else { (1.0 - w) * c[i] + w * c[i + 1] })
                .collect(),
        )
    }

    pub fn envelope(&self) -> PathEnvelope {
        PathEnvelope {
            hurst: self.hurst_components[0],
            alpha_prime: self.hurst_components.get(1).copied(),
            seed: self.seeds[0],
            drift_seed: self.seeds.get(1).copied(),
            d: self.dim(),
            grid: self.grid.spec(),
        }
    }
}

/// Metadata written next to a path CSV.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PathEnvelope {
    pub hurst: HurstIndex,
    pub alpha_prime: Option<HurstIndex>,
    pub seed: u64,
    pub drift_seed: Option<u64>,
    pub d: usize,
    pub grid: GridSpec,
}

fn check_dim(d: usize) -> Result<()> {
    if d == 0 {
        Err(Error::InvalidArgument("dimension d must be at least 1".into()))
    } else {
        Ok(())
    }
}

/// d-dimensional fBm with independent coordinates; a pure function of its inputs.
pub fn generate_fbm_path(hurst: HurstIndex, grid: &TimeGrid, d: usize, seed: u64) -> Result<SamplePath> {
    check_dim(d)?;
    Ok(FbmSampler::new(hurst, grid)?.path(d, seed))
}

/// Sampler pair for `Z = B^H + B^{α'}`, reusable across seed pairs.
pub struct MixedSampler {
    main: FbmSampler,
    drift: FbmSampler,
}

impl MixedSampler {
    pub fn new(hurst: HurstIndex, alpha_prime: HurstIndex, grid: &TimeGrid) -> Result<Self> {
        Ok(Self {
            main: FbmSampler::new(hurst, grid)?,
            drift: FbmSampler::new(alpha_prime, grid)?,
        })
    }

    pub fn path(&self, d: usize, seeds: (u64, u64)) -> SamplePath {
        let a = self.main.sample_coordinates(d, seeds.0, 0);
        let b = self.drift.sample_coordinates(d, seeds.1, 1);
        let values = a
            .into_iter()
            .zip(b)
            .map(|(x, y)| x.iter().zip(&y).map(|(u, v)| u + v).collect())
            .collect();
        SamplePath {
            grid: self.main.grid.clone(),
            values,
            hurst_components: vec![self.main.hurst, self.drift.hurst],
            seeds: vec![seeds.0, seeds.1],
        }
    }
}

pub fn generate_mixed_path(
    hurst: HurstIndex,
    alpha_prime: HurstIndex,
    grid: &TimeGrid,
    d: usize,
    seeds: (u64, u64),
) -> Result<SamplePath> {
    check_dim(d)?;
    Ok(MixedSampler::new(hurst, alpha_prime, grid)?.path(d, seeds))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn h(v: f64) -> HurstIndex {
        HurstIndex::new(v).unwrap()
    }

    #[test]
    fn hurst_bounds() {
        assert!(HurstIndex::new(0.0).is_err());
        assert!(HurstIndex::new(1.0).is_err());
        assert!(HurstIndex::new(f64::NAN).is_err());
        assert_eq!(h(0.3).value(), 0.3);
        let parsed: std::result::Result<HurstIndex, _> = serde_json::from_str("1.5");
        assert!(parsed.is_err());
    }

    #[test]
    fn covariance_examples() {
        assert_eq!(fbm_covariance(1.0, 1.0, h(0.5)), 1.0);
        assert_eq!(fbm_covariance(0.0, 0.7, h(0.3)), 0.0);
        assert!((fbm_covariance(0.25, 0.75, h(0.5)) - 0.25).abs() < 1e-15);
        assert_eq!(fbm_covariance(0.2, 0.9, h(0.7)), fbm_covariance(0.9, 0.2, h(0.7)));
    }

    #[test]
    fn mixed_covariance_examples() {
        assert!((mixed_covariance(1.0, 1.0, h(0.5), h(0.3)) - 2.0).abs() < 1e-15);
        assert_eq!(mixed_covariance(0.0, 0.4, h(0.5), h(0.3)), 0.0);
        assert!((mixed_covariance(0.5, 1.0, h(0.5), h(0.25)) - 1.0).abs() < 1e-15);
    }

    #[test]
    fn covariance_matrix_examples() {
        let g = TimeGrid::from_times(vec![0.3]).unwrap();
        let m = build_covariance_matrix(&g, h(0.7));
        assert!((m[(0, 0)] - 0.3f64.powf(1.4)).abs() < 1e-15);
        let g = TimeGrid::from_times(vec![0.5, 1.0]).unwrap();
        let m = build_covariance_matrix(&g, h(0.5));
        let want = DMatrix::from_row_slice(2, 2, &[0.5, 0.5, 0.5, 1.0]);
        assert!((m - want).abs().max() < 1e-15);
    }

    #[test]
    fn grid_validation() {
        assert!(TimeGrid::uniform(0).is_err());
        assert!(TimeGrid::from_times(vec![]).is_err());
        assert!(TimeGrid::from_times(vec![0.2, 0.2]).is_err());
        assert!(TimeGrid::from_times(vec![0.5, 0.1]).is_err());
        assert!(TimeGrid::from_times(vec![0.0, 1.5]).is_err());
        let g = TimeGrid::uniform(4).unwrap();
        assert_eq!(g.times(), &[0.0, 0.25, 0.5, 0.75, 1.0]);
        assert_eq!(TimeGrid::from_spec(&g.spec()).unwrap(), g);
    }

    #[test]
    fn locate_interpolation_weights() {
        let g = TimeGrid::uniform(4).unwrap();
        assert_eq!(g.locate(0.0), Some((0, 0.0)));
        assert_eq!(g.locate(1.0), Some((3, 1.0)));
        let (i, w) = g.locate(0.3).unwrap();
        assert_eq!(i, 1);
        assert!((w - 0.2).abs() < 1e-12);
        assert_eq!(g.locate(1.1), None);
        let g = TimeGrid::from_times(vec![0.1, 0.4, 0.9]).unwrap();
        assert_eq!(g.locate(0.05), None);
        let (i, w) = g.locate(0.65).unwrap();
        assert_eq!(i, 1);
        assert!((w - 0.5).abs() < 1e-12);
    }

    #[test]
    fn path_starts_at_zero_and_replays() {
        for grid in [TimeGrid::uniform(100).unwrap(), TimeGrid::from_times(vec![0.0, 0.1, 0.5, 0.55, 1.0]).unwrap()] {
            let p = generate_fbm_path(h(0.3), &grid, 3, 11).unwrap();
            assert_eq!(p.dim(), 3);
            for c in &p.values {
                assert_eq!(c.len(), grid.len());
                assert_eq!(c[0], 0.0);
            }
            let q = generate_fbm_path(h(0.3), &grid, 3, 11).unwrap();
            assert_eq!(p, q);
            let r = generate_fbm_path(h(0.3), &grid, 3, 12).unwrap();
            assert_ne!(p, r);
        }
    }

    #[test]
    fn uniform_grids_use_circulant() {
        for hv in [0.1, 0.5, 0.9, 0.99] {
            let s = FbmSampler::new(h(hv), &TimeGrid::uniform(1000).unwrap()).unwrap();
            assert_eq!(s.kind(), SamplerKind::Circulant);
        }
        let s = FbmSampler::new(h(0.5), &TimeGrid::from_times(vec![0.2, 0.7]).unwrap()).unwrap();
        assert_eq!(s.kind(), SamplerKind::Cholesky);
    }

    #[test]
    fn grid_without_origin_keeps_length() {
        let grid = TimeGrid::from_times(vec![0.25, 0.5, 1.0]).unwrap();
        let p = generate_fbm_path(h(0.6), &grid, 2, 5).unwrap();
        assert_eq!(p.values[0].len(), 3);
        assert_ne!(p.values[0][0], 0.0);
    }

    #[test]
    fn coordinates_are_order_independent() {
        // coordinate j of a d=3 path equals coordinate j of a d=5 path
        let grid = TimeGrid::uniform(64).unwrap();
        let a = generate_fbm_path(h(0.4), &grid, 3, 9).unwrap();
        let b = generate_fbm_path(h(0.4), &grid, 5, 9).unwrap();
        assert_eq!(a.values[..], b.values[..3]);
    }

    #[test]
    fn mixed_path_is_sum_of_components() {
        let grid = TimeGrid::uniform(128).unwrap();
        let z = generate_mixed_path(h(0.7), h(0.3), &grid, 2, (1, 2)).unwrap();
        let b = FbmSampler::new(h(0.7), &grid).unwrap().sample_coordinates(2, 1, 0);
        let f = FbmSampler::new(h(0.3), &grid).unwrap().sample_coordinates(2, 2, 1);
        for j in 0..2 {
            assert_eq!(z.values[j][0], 0.0);
            for i in 0..grid.len() {
                assert_eq!(z.values[j][i], b[j][i] + f[j][i]);
            }
        }
        assert_eq!(z.envelope().alpha_prime, Some(h(0.3)));
        assert_eq!(z.envelope().drift_seed, Some(2));
    }

    #[test]
    fn zero_dimension_rejected() {
        let grid = TimeGrid::uniform(8).unwrap();
        assert!(generate_fbm_path(h(0.5), &grid, 0, 1).is_err());
    }

    #[test]
    fn oversized_dense_grid_rejected() {
        let times: Vec<f64> = (1..=CHOLESKY_MAX_POINTS + 1).map(|i| i as f64 / (CHOLESKY_MAX_POINTS + 1) as f64).collect();
        let grid = TimeGrid::from_times(times).unwrap();
        assert!(matches!(FbmSampler::new(h(0.5), &grid), Err(Error::InvalidGrid(_))));
    }

    #[test]
    fn circulant_and_cholesky_agree_in_law() {
        // sample variance of B(1) for both samplers on the same 32-step grid
        let grid = TimeGrid::uniform(32).unwrap();
        let circ = FbmSampler::new(h(0.8), &grid).unwrap();
        let chol = FbmSampler::new_cholesky(h(0.8), &grid).unwrap();
        let n = 4000;
        let var = |s: &FbmSampler| {
            (0..n)
                .map(|seed| {
                    let v = s.sample_coordinate(&mut stream_rng(seed, 0))[32];
                    v * v
                })
                .sum::<f64>()
                / n as f64
        };
        // standard error of the variance estimate is sqrt(2/n) ≈ 0.022
        assert!((var(&circ) - 1.0).abs() < 0.09);
        assert!((var(&chol) - 1.0).abs() < 0.09);
    }
}
