//! Empirical dimension estimators: parabolic box counting with log-log
//! regression, discrete energy integrals in the `ρ_H` metric, and Monte Carlo
//! evaluation of the kernel expectation `E[max(t^H, t^α‖N‖_∞)^{-γ/H}]`.

use rand::Rng;
use rand_distr::StandardNormal;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::fbm::{HurstIndex, SamplePath};
use crate::fractal::{FractalSet, WeightedTimeSet};
use crate::parabolic::SpaceTimePoint;
use crate::rng::aux_rng;
use crate::stats::linear_fit;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum GraphSource {
    FunctionGraph,
    FbmGraph,
    DriftedFbmGraph,
}

/// Finite sample of a graph `{(t, f(t)) : t ∈ A}`.
///
/// Points are ordered by time. `breaks` lists the indices that start a new
/// continuous piece: consecutive points on either side of a break are not
/// joined when the graph is interpolated.
#[derive(Clone, Debug, PartialEq)]
pub struct GraphCloud {
    pub points: Vec<SpaceTimePoint>,
    pub source: GraphSource,
    pub h_context: HurstIndex,
    pub breaks: Vec<usize>,
}

impl GraphCloud {
    pub fn new(points: Vec<SpaceTimePoint>, source: GraphSource, h_context: HurstIndex) -> Result<Self> {
        Self::with_breaks(points, source, h_context, Vec::new())
    }

    pub fn with_breaks(
        points: Vec<SpaceTimePoint>,
        source: GraphSource,
        h_context: HurstIndex,
        breaks: Vec<usize>,
    ) -> Result<Self> {
        let Some(first) = points.first() else {
            return Err(Error::InvalidArgument("graph cloud is empty".into()));
        };
        let d = first.x.len();
        if d == 0 {
            return Err(Error::InvalidArgument("graph points need at least one value coordinate".into()));
        }
        if points.iter().any(|p| !(0.0..=1.0).contains(&p.t) || p.x.len() != d) {
            return Err(Error::InvalidArgument("graph points need times in [0,1] and a common dimension".into()));
        }
        if breaks.windows(2).any(|w| w[1] <= w[0]) || breaks.last().is_some_and(|&b| b >= points.len()) {
            return Err(Error::InvalidArgument("breaks must be increasing indices into the cloud".into()));
        }
        Ok(Self { points, source, h_context, breaks })
    }

    /// Whole sampled path as one continuous piece.
    pub fn from_path(path: &SamplePath, source: GraphSource, h_context: HurstIndex) -> Result<Self> {
        let points = (0..path.len())
            .map(|i| SpaceTimePoint::new(path.grid.times()[i], path.point(i)))
            .collect();
        Self::new(points, source, h_context)
    }

    /// Grid points of `path` lying in `set`. Pieces break wherever the set's
    /// interval changes or grid points are skipped.
    pub fn from_path_on_set(path: &SamplePath, set: &FractalSet, source: GraphSource, h_context: HurstIndex) -> Result<Self> {
        let members = set.grid_points(&path.grid);
        let mut points = Vec::with_capacity(members.len());
        let mut breaks = Vec::new();
        let mut prev: Option<(usize, usize)> = None;
        for &(i, comp) in &members {
            if let Some((pi, pc)) = prev {
                if pc != comp || i != pi + 1 {
                    breaks.push(points.len());
                }
            }
            points.push(SpaceTimePoint::new(path.grid.times()[i], path.point(i)));
            prev = Some((i, comp));
        }
        Self::with_breaks(points, source, h_context, breaks)
    }

    pub fn dim(&self) -> usize {
        self.points[0].x.len()
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    fn value_origin(&self) -> Vec<f64> {
        (0..self.dim())
            .map(|j| self.points.iter().map(|p| p.x[j]).fold(f64::INFINITY, f64::min))
            .collect()
    }

    fn value_extent(&self) -> Vec<f64> {
        let lo = self.value_origin();
        (0..self.dim())
            .map(|j| self.points.iter().map(|p| p.x[j]).fold(f64::NEG_INFINITY, f64::max) - lo[j])
            .collect()
    }

    /// Index ranges of the continuous pieces.
    fn pieces(&self) -> impl Iterator<Item = std::ops::Range<usize>> + '_ {
        let starts = std::iter::once(0).chain(self.breaks.iter().copied());
        let ends = self.breaks.iter().copied().chain(std::iter::once(self.points.len()));
        starts.zip(ends).map(|(a, b)| a..b)
    }
}

/// How a cloud is turned into occupied boxes.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum CountMode {
    /// Boxes containing a sample point.
    #[default]
    Points,
    /// Boxes met by the piecewise-linear interpolant of each continuous piece.
    Interpolated,
    /// In each time cell, every box meeting the bounding box of each
    /// continuous piece (the Hölder cover of the graph).
    Envelope,
}

/// Box grid placement. Time cells are anchored at 0; value cells at the
/// cloud minimum shifted down by `value_offset` cells.
#[derive(Clone, Copy, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct BoxGrid {
    pub value_offset: f64,
}

struct CellIndexer {
    delta: f64,
    side: f64,
    time_cells: i64,
    origin: Vec<f64>,
}

impl CellIndexer {
    fn new(cloud: &GraphCloud, delta: f64, hurst: HurstIndex, grid: BoxGrid) -> Self {
        let side = delta.powf(hurst.value());
        let origin = cloud
            .value_origin()
            .into_iter()
            .map(|o| o - grid.value_offset * side)
            .collect();
        Self { delta, side, time_cells: (1.0 / delta).ceil() as i64, origin }
    }

    fn time_cell(&self, t: f64) -> i64 {
        ((t / self.delta).floor() as i64).clamp(0, self.time_cells - 1)
    }

    /// Keys of every box in time cell `cell` meeting `∏[lo_j, hi_j]`.
    fn push_block(&self, cell: i64, lo: &[f64], hi: &[f64], keys: &mut Vec<i64>) {
        let ranges: Vec<(i64, i64)> = lo
            .iter()
            .zip(hi)
            .zip(&self.origin)
            .map(|((l, h), o)| (((l - o) / self.side).floor() as i64, ((h - o) / self.side).floor() as i64))
            .collect();
        let mut cur: Vec<i64> = ranges.iter().map(|r| r.0).collect();
        loop {
            keys.push(cell);
            keys.extend_from_slice(&cur);
            let mut j = 0;
            loop {
                if j == cur.len() {
                    return;
                }
                if cur[j] < ranges[j].1 {
                    cur[j] += 1;
                    break;
                }
                cur[j] = ranges[j].0;
                j += 1;
            }
        }
    }

    #[inline]
    fn push_key(&self, t: f64, x: &[f64], keys: &mut Vec<i64>) {
        // [0,1] is split into ceil(1/δ) cells; t = 1 belongs to the last one
        keys.push(self.time_cell(t));
        for (v, o) in x.iter().zip(&self.origin) {
            keys.push(((v - o) / self.side).floor() as i64);
        }
    }
}

fn count_distinct(keys: Vec<i64>, stride: usize) -> usize {
    if keys.is_empty() {
        return 0;
    }
    // pack into u64 when the index ranges allow it
    let mut bits = Vec::with_capacity(stride);
    for axis in 0..stride {
        let (lo, hi) = keys
            .iter()
            .skip(axis)
            .step_by(stride)
            .fold((i64::MAX, i64::MIN), |(a, b), &k| (a.min(k), b.max(k)));
        let span = (hi - lo) as u64 + 1;
        bits.push((lo, 64 - span.leading_zeros()));
    }
    let total: u32 = bits.iter().map(|b| b.1).sum();
    if total <= 64 {
        let mut packed: Vec<u64> = keys
            .chunks_exact(stride)
            .map(|k| {
                k.iter().zip(&bits).fold(0u64, |acc, (&v, &(lo, b))| {
                    let shifted = if b == 64 { acc } else { acc << b };
                    shifted | (v - lo) as u64
                })
            })
            .collect();
        packed.sort_unstable();
        packed.dedup();
        packed.len()
    } else {
        let mut rows: Vec<&[i64]> = keys.chunks_exact(stride).collect();
        rows.sort_unstable();
        rows.dedup();
        rows.len()
    }
}

/// Number of anchored parabolic grid boxes `[iδ,(i+1)δ] × ∏[k_jδ^H,(k_j+1)δ^H]`
/// that contain a point of the cloud.
pub fn parabolic_box_count(cloud: &GraphCloud, delta: f64, hurst: HurstIndex) -> Result<usize> {
    parabolic_box_count_with(cloud, delta, hurst, CountMode::Points, BoxGrid::default())
}

pub fn parabolic_box_count_with(
    cloud: &GraphCloud,
    delta: f64,
    hurst: HurstIndex,
    mode: CountMode,
    grid: BoxGrid,
) -> Result<usize> {
    if !(delta > 0.0 && delta <= 1.0) {
        return Err(Error::InvalidArgument(format!("box scale {delta} outside (0,1]")));
    }
    let idx = CellIndexer::new(cloud, delta, hurst, grid);
    let stride = cloud.dim() + 1;
    let mut keys = Vec::with_capacity(cloud.len() * stride);
    match mode {
        CountMode::Points => {
            for p in &cloud.points {
                idx.push_key(p.t, &p.x, &mut keys);
            }
        }
        CountMode::Interpolated => {
            let mut buf = vec![0.0; cloud.dim()];
            for piece in cloud.pieces() {
                let pts = &cloud.points[piece];
                for w in pts.windows(2) {
                    let (a, b) = (&w[0], &w[1]);
                    let mut cells = (b.t - a.t).abs() / idx.delta;
                    for (u, v) in a.x.iter().zip(&b.x) {
                        cells = cells.max((v - u).abs() / idx.side);
                    }
                    // half-cell steps so consecutive probes fall in adjacent cells
                    let steps = ((2.0 * cells).ceil() as usize).max(1);
                    for s in 0..steps {
                        let f = s as f64 / steps as f64;
                        for (j, slot) in buf.iter_mut().enumerate() {
                            *slot = a.x[j] + f * (b.x[j] - a.x[j]);
                        }
                        idx.push_key(a.t + f * (b.t - a.t), &buf, &mut keys);
                    }
                }
                if let Some(last) = pts.last() {
                    idx.push_key(last.t, &last.x, &mut keys);
                }
            }
        }
        CountMode::Envelope => {
            let d = cloud.dim();
            let mut lo = vec![0.0; d];
            let mut hi = vec![0.0; d];
            for piece in cloud.pieces() {
                let pts = &cloud.points[piece];
                let mut cell = idx.time_cell(pts[0].t);
                lo.copy_from_slice(&pts[0].x);
                hi.copy_from_slice(&pts[0].x);
                for w in pts.windows(2) {
                    let (a, b) = (&w[0], &w[1]);
                    let next = idx.time_cell(b.t);
                    while cell < next {
                        // close the current cell at its right edge
                        let edge = (cell + 1) as f64 * idx.delta;
                        let f = ((edge - a.t) / (b.t - a.t)).clamp(0.0, 1.0);
                        for j in 0..d {
                            let v = a.x[j] + f * (b.x[j] - a.x[j]);
                            lo[j] = lo[j].min(v);
                            hi[j] = hi[j].max(v);
                        }
                        idx.push_block(cell, &lo, &hi, &mut keys);
                        cell += 1;
                        for j in 0..d {
                            let v = a.x[j] + f * (b.x[j] - a.x[j]);
                            lo[j] = v;
                            hi[j] = v;
                        }
                    }
                    for j in 0..d {
                        lo[j] = lo[j].min(b.x[j]);
                        hi[j] = hi[j].max(b.x[j]);
                    }
                }
                idx.push_block(cell, &lo, &hi, &mut keys);
            }
        }
    }
    Ok(count_distinct(keys, stride))
}

/// Upper bound on the count implied by the extent of the cloud.
pub fn box_count_upper_bound(cloud: &GraphCloud, delta: f64, hurst: HurstIndex) -> f64 {
    let side = delta.powf(hurst.value());
    let grid_bound = (1.0 / delta).ceil()
        * cloud.value_extent().iter().map(|r| (r / side).floor() + 1.0).product::<f64>();
    grid_bound.min(cloud.len() as f64)
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct BoxCountCurve {
    pub deltas: Vec<f64>,
    pub counts: Vec<usize>,
}

impl BoxCountCurve {
    pub fn is_monotone(&self) -> bool {
        let mut pairs: Vec<(f64, usize)> = self.deltas.iter().copied().zip(self.counts.iter().copied()).collect();
        pairs.sort_by(|a, b| b.0.total_cmp(&a.0));
        pairs.windows(2).all(|w| w[1].1 >= w[0].1)
    }

    pub fn to_csv(&self) -> String {
        let mut out = String::from("delta,count\n");
        for (d, c) in self.deltas.iter().zip(&self.counts) {
            out.push_str(&format!("{d},{c}\n"));
        }
        out
    }
}

/// `δ = 2^{-k}` for `k` in `coarse..=fine`, largest first.
pub fn dyadic_deltas(coarse: u32, fine: u32) -> Vec<f64> {
    (coarse..=fine).map(|k| 2f64.powi(-(k as i32))).collect()
}

pub fn box_count_curve(
    cloud: &GraphCloud,
    deltas: &[f64],
    hurst: HurstIndex,
    mode: CountMode,
    grid: BoxGrid,
) -> Result<BoxCountCurve> {
    let mut deltas = deltas.to_vec();
    deltas.sort_by(|a, b| b.total_cmp(a));
    let counts = deltas
        .par_iter()
        .map(|&d| parabolic_box_count_with(cloud, d, hurst, mode, grid))
        .collect::<Result<Vec<_>>>()?;
    Ok(BoxCountCurve { deltas, counts })
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DimensionEstimate {
    pub exponent: f64,
    pub intercept: f64,
    pub r_squared: f64,
    pub fit_range: (f64, f64),
    pub n_points_used: usize,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct EstimatorOptions {
    pub mode: CountMode,
    pub grid: BoxGrid,
    /// Octaves dropped at each end of the scale range before fitting.
    pub trim_octaves: f64,
}

impl Default for EstimatorOptions {
    fn default() -> Self {
        Self { mode: CountMode::Points, grid: BoxGrid::default(), trim_octaves: 1.0 }
    }
}

fn check_scales(deltas: &[f64]) -> Result<()> {
    if deltas.len() < 4 {
        return Err(Error::InvalidArgument(format!("need at least 4 scales, got {}", deltas.len())));
    }
    if deltas.iter().any(|d| !(*d > 0.0 && *d <= 1.0)) {
        return Err(Error::InvalidArgument("scales must lie in (0,1]".into()));
    }
    let max = deltas.iter().copied().fold(f64::MIN, f64::max);
    let min = deltas.iter().copied().fold(f64::MAX, f64::min);
    if max / min < 4.0 * (1.0 - 1e-12) {
        return Err(Error::InvalidArgument("scales must span at least two octaves".into()));
    }
    Ok(())
}

/// Slope of `ln N(δ)` against `ln(1/δ)` over the trimmed scale range. Falls
/// back to the full range when trimming would leave fewer than three scales.
pub fn fit_curve(curve: &BoxCountCurve, trim_octaves: f64) -> Result<DimensionEstimate> {
    check_scales(&curve.deltas)?;
    let max = curve.deltas.iter().copied().fold(f64::MIN, f64::max);
    let min = curve.deltas.iter().copied().fold(f64::MAX, f64::min);
    let factor = 2f64.powf(trim_octaves);
    let slack = 1.0 + 1e-9;
    let mut used: Vec<(f64, usize)> = curve
        .deltas
        .iter()
        .copied()
        .zip(curve.counts.iter().copied())
        .filter(|&(d, _)| d <= max / factor * slack && d * slack >= min * factor)
        .collect();
    if used.len() < 3 {
        used = curve.deltas.iter().copied().zip(curve.counts.iter().copied()).collect();
    }
    if used.iter().all(|&(_, c)| c == used[0].1) {
        return Err(Error::DegenerateRange);
    }
    let x: Vec<f64> = used.iter().map(|(d, _)| -d.ln()).collect();
    let y: Vec<f64> = used.iter().map(|&(_, c)| (c as f64).ln()).collect();
    let fit = linear_fit(&x, &y).ok_or(Error::DegenerateRange)?;
    let lo = used.iter().map(|u| u.0).fold(f64::MAX, f64::min);
    let hi = used.iter().map(|u| u.0).fold(f64::MIN, f64::max);
    Ok(DimensionEstimate {
        exponent: fit.slope,
        intercept: fit.intercept,
        r_squared: fit.r_squared,
        fit_range: (lo, hi),
        n_points_used: used.len(),
    })
}

/// Box-counting proxy for `dim_{Ψ,H}` of the cloud. The raw slope is
/// returned; feasibility against `[0, 1 + Hd]` is the caller's concern.
pub fn estimate_parabolic_dimension(cloud: &GraphCloud, deltas: &[f64], hurst: HurstIndex) -> Result<DimensionEstimate> {
    estimate_parabolic_dimension_with(cloud, deltas, hurst, &EstimatorOptions::default())
}

pub fn estimate_parabolic_dimension_with(
    cloud: &GraphCloud,
    deltas: &[f64],
    hurst: HurstIndex,
    opts: &EstimatorOptions,
) -> Result<DimensionEstimate> {
    check_scales(deltas)?;
    let curve = box_count_curve(cloud, deltas, hurst, opts.mode, opts.grid)?;
    fit_curve(&curve, opts.trim_octaves)
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct EnergyOptions {
    /// Largest point count summed over all pairs.
    pub exact_limit: usize,
    /// Random pairs drawn above `exact_limit`.
    pub sampled_pairs: usize,
    pub seed: u64,
}

impl Default for EnergyOptions {
    fn default() -> Self {
        Self { exact_limit: 4096, sampled_pairs: 1_000_000, seed: 0 }
    }
}

#[inline]
fn rho_kernel(ti: f64, xi: &[f64], tj: f64, xj: &[f64], h: f64, power: f64) -> f64 {
    let mut r = (ti - tj).abs().powf(h);
    for (a, b) in xi.iter().zip(xj) {
        r = r.max((a - b).abs());
    }
    r.powf(-power)
}

/// `Σ_{i≠j} w_i w_j ρ_H(u_i, u_j)^{-γ/H}` over the weighted graph points.
pub fn energy_integral_mc(measure: &WeightedTimeSet, values: &[Vec<f64>], gamma: f64, hurst: HurstIndex) -> Result<f64> {
    energy_integral_with(measure, values, gamma, hurst, &EnergyOptions::default())
}

pub fn energy_integral_with(
    measure: &WeightedTimeSet,
    values: &[Vec<f64>],
    gamma: f64,
    hurst: HurstIndex,
    opts: &EnergyOptions,
) -> Result<f64> {
    let n = measure.len();
    if values.len() != n {
        return Err(Error::InvalidArgument(format!("{} value vectors for {n} points", values.len())));
    }
    if n < 2 {
        return Err(Error::InvalidArgument("energy needs at least two points".into()));
    }
    if !(gamma > 0.0) {
        return Err(Error::InvalidArgument(format!("gamma={gamma} must be positive")));
    }
    let (t, w) = (measure.times(), measure.weights());
    let h = hurst.value();
    let power = gamma / h;
    if n <= opts.exact_limit {
        // fixed row order keeps the floating sum reproducible under any schedule
        let rows: Vec<f64> = (0..n)
            .into_par_iter()
            .map(|i| {
                (i + 1..n)
                    .map(|j| w[i] * w[j] * rho_kernel(t[i], &values[i], t[j], &values[j], h, power))
                    .sum::<f64>()
            })
            .collect();
        Ok(2.0 * rows.iter().sum::<f64>())
    } else {
        const CHUNK: usize = 1 << 16;
        let m = opts.sampled_pairs.max(1);
        let chunks = m.div_ceil(CHUNK);
        let sums: Vec<f64> = (0..chunks)
            .into_par_iter()
            .map(|c| {
                let mut rng = aux_rng(opts.seed, 1 + c as u64);
                let len = CHUNK.min(m - c * CHUNK);
                (0..len)
                    .map(|_| {
                        let i = rng.random_range(0..n);
                        let mut j = rng.random_range(0..n - 1);
                        if j >= i {
                            j += 1;
                        }
                        w[i] * w[j] * rho_kernel(t[i], &values[i], t[j], &values[j], h, power)
                    })
                    .sum::<f64>()
            })
            .collect();
        Ok(sums.iter().sum::<f64>() / m as f64 * (n as f64) * (n as f64 - 1.0))
    }
}

/// Default exclusion band around `γ = Hd`, where both scaling regimes break down.
pub const KERNEL_GAMMA_MARGIN: f64 = 1e-3;

/// Monte Carlo mean of `max(t^H, t^α‖N‖_∞)^{-γ/H}` over `n` standard normal
/// vectors `N` in `R^d`.
pub fn kernel_expectation_mc(
    t: f64,
    alpha: HurstIndex,
    hurst: HurstIndex,
    gamma: f64,
    d: usize,
    n: usize,
    seed: u64,
) -> Result<f64> {
    kernel_expectation_with_margin(t, alpha, hurst, gamma, d, n, seed, KERNEL_GAMMA_MARGIN)
}

#[allow(clippy::too_many_arguments)]
pub fn kernel_expectation_with_margin(
    t: f64,
    alpha: HurstIndex,
    hurst: HurstIndex,
    gamma: f64,
    d: usize,
    n: usize,
    seed: u64,
    margin: f64,
) -> Result<f64> {
    let (a, h) = (alpha.value(), hurst.value());
    if !(t > 0.0 && t <= 1.0) {
        return Err(Error::InvalidArgument(format!("t={t} outside (0,1]")));
    }
    if a > h {
        return Err(Error::AlphaExceedsH { alpha: a, hurst: h });
    }
    if d == 0 || n == 0 || !(gamma > 0.0) {
        return Err(Error::InvalidArgument("need d ≥ 1, n ≥ 1 and gamma > 0".into()));
    }
    let hd = h * d as f64;
    if (gamma - hd).abs() < margin {
        return Err(Error::GammaAtBoundary { gamma, hd, margin });
    }
    let floor = t.powf(h);
    let spread = t.powf(a);
    let power = gamma / h;
    const CHUNK: usize = 1 << 15;
    let chunks = n.div_ceil(CHUNK);
    let sums: Vec<f64> = (0..chunks)
        .into_par_iter()
        .map(|c| {
            let mut rng = aux_rng(seed, c as u64);
            let len = CHUNK.min(n - c * CHUNK);
            (0..len)
                .map(|_| {
                    let norm = (0..d)
                        .map(|_| rng.sample::<f64, _>(StandardNormal).abs())
                        .fold(0.0, f64::max);
                    floor.max(spread * norm).powf(-power)
                })
                .sum::<f64>()
        })
        .collect();
    Ok(sums.iter().sum::<f64>() / n as f64)
}

/// Predicted exponent of `t` in the kernel expectation as `t → 0`.
pub fn kernel_scaling_exponent(alpha: HurstIndex, hurst: HurstIndex, gamma: f64, d: usize) -> f64 {
    let (a, h) = (alpha.value(), hurst.value());
    if gamma < h * d as f64 {
        -gamma * a / h
    } else {
        d as f64 * (h - a) - gamma
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fbm::{generate_fbm_path, TimeGrid};
    use crate::fractal::{full_interval, middle_thirds_cantor};

    fn h(v: f64) -> HurstIndex {
        HurstIndex::new(v).unwrap()
    }

    fn cloud(points: &[(f64, &[f64])]) -> GraphCloud {
        GraphCloud::new(
            points.iter().map(|(t, x)| SpaceTimePoint::new(*t, x.to_vec())).collect(),
            GraphSource::FunctionGraph,
            h(0.5),
        )
        .unwrap()
    }

    fn flat(n: usize) -> GraphCloud {
        let pts = (0..n).map(|i| SpaceTimePoint::new(i as f64 / (n - 1) as f64, vec![0.0])).collect();
        GraphCloud::new(pts, GraphSource::FunctionGraph, h(0.5)).unwrap()
    }

    #[test]
    fn single_point_counts_one() {
        let c = cloud(&[(0.4, &[1.0])]);
        assert_eq!(parabolic_box_count(&c, 0.1, h(0.5)).unwrap(), 1);
    }

    #[test]
    fn separated_points_count_two() {
        let c = cloud(&[(0.1, &[0.0]), (0.9, &[0.8])]);
        assert_eq!(parabolic_box_count(&c, 0.25, h(0.5)).unwrap(), 2);
    }

    #[test]
    fn flat_graph_quarter_scale() {
        let c = flat(1024);
        for hv in [0.1, 0.5, 0.9] {
            assert_eq!(parabolic_box_count(&c, 0.25, h(hv)).unwrap(), 4);
        }
    }

    #[test]
    fn flat_graph_exact_slope() {
        let c = flat(1 << 14);
        let e = estimate_parabolic_dimension(&c, &dyadic_deltas(2, 10), h(0.5)).unwrap();
        assert!((e.exponent - 1.0).abs() < 1e-12);
        assert!((e.r_squared - 1.0).abs() < 1e-12);
        assert_eq!(e.n_points_used, 7);
        assert_eq!(e.fit_range, (2f64.powi(-9), 2f64.powi(-3)));
    }

    #[test]
    fn scale_preconditions() {
        let c = flat(64);
        assert!(estimate_parabolic_dimension(&c, &[0.5, 0.25, 0.2], h(0.5)).is_err());
        assert!(estimate_parabolic_dimension(&c, &[0.5, 0.45, 0.4, 0.35], h(0.5)).is_err());
        assert!(parabolic_box_count(&c, 0.0, h(0.5)).is_err());
        assert!(parabolic_box_count(&c, 1.5, h(0.5)).is_err());
    }

    #[test]
    fn constant_counts_are_degenerate() {
        let c = cloud(&[(0.5, &[0.0])]);
        assert!(matches!(
            estimate_parabolic_dimension(&c, &dyadic_deltas(1, 6), h(0.5)),
            Err(Error::DegenerateRange)
        ));
    }

    #[test]
    fn lipschitz_line_dimension() {
        // f(t) = t: the value extent per column is δ ≤ δ^H, so N(δ) ≈ 1/δ
        let n = 1 << 16;
        let pts = (0..n)
            .map(|i| {
                let t = i as f64 / (n - 1) as f64;
                SpaceTimePoint::new(t, vec![t])
            })
            .collect();
        let c = GraphCloud::new(pts, GraphSource::FunctionGraph, h(0.5)).unwrap();
        let e = estimate_parabolic_dimension(&c, &dyadic_deltas(4, 12), h(0.5)).unwrap();
        assert!((e.exponent - 1.0).abs() < 0.05, "{e:?}");
    }

    #[test]
    fn interpolation_fills_gaps() {
        // two points far apart in value, same time column
        let c = cloud(&[(0.0, &[0.0]), (0.01, &[1.0])]);
        let pts = parabolic_box_count_with(&c, 0.25, h(0.5), CountMode::Points, BoxGrid::default()).unwrap();
        let fill = parabolic_box_count_with(&c, 0.25, h(0.5), CountMode::Interpolated, BoxGrid::default()).unwrap();
        assert_eq!(pts, 2);
        assert_eq!(fill, 3);
    }

    #[test]
    fn interpolation_respects_breaks() {
        let pts: Vec<SpaceTimePoint> =
            [(0.0, 0.0), (0.01, 1.0)].iter().map(|&(t, x)| SpaceTimePoint::new(t, vec![x])).collect();
        let c = GraphCloud::with_breaks(pts, GraphSource::FunctionGraph, h(0.5), vec![1]).unwrap();
        assert_eq!(parabolic_box_count_with(&c, 0.25, h(0.5), CountMode::Interpolated, BoxGrid::default()).unwrap(), 2);
    }

    #[test]
    fn envelope_covers_bounding_box() {
        let c = cloud(&[(0.0, &[0.0, 0.0]), (0.01, &[1.0, 1.0])]);
        let env = parabolic_box_count_with(&c, 0.25, h(0.5), CountMode::Envelope, BoxGrid::default()).unwrap();
        assert_eq!(env, 9);
    }

    #[test]
    fn envelope_splits_at_time_cells() {
        let c = cloud(&[(0.2, &[0.0]), (0.3, &[1.0])]);
        let env = parabolic_box_count_with(&c, 0.25, h(0.5), CountMode::Envelope, BoxGrid::default()).unwrap();
        assert_eq!(env, 4);
    }

    #[test]
    fn count_modes_are_nested() {
        let grid = TimeGrid::uniform(2048).unwrap();
        let p = generate_fbm_path(h(0.3), &grid, 2, 11).unwrap();
        let c = GraphCloud::from_path(&p, GraphSource::FbmGraph, h(0.6)).unwrap();
        for d in dyadic_deltas(2, 10) {
            let n = |m| parabolic_box_count_with(&c, d, h(0.6), m, BoxGrid::default()).unwrap();
            let (pts, fill, env) = (n(CountMode::Points), n(CountMode::Interpolated), n(CountMode::Envelope));
            assert!(pts <= fill && fill <= env, "{pts} {fill} {env}");
        }
    }

    #[test]
    fn count_within_bounds() {
        let grid = TimeGrid::uniform(4096).unwrap();
        let p = generate_fbm_path(h(0.4), &grid, 2, 3).unwrap();
        let c = GraphCloud::from_path(&p, GraphSource::FbmGraph, h(0.6)).unwrap();
        for d in dyadic_deltas(0, 10) {
            let n = parabolic_box_count(&c, d, h(0.6)).unwrap();
            assert!(n >= 1);
            assert!(n as f64 <= box_count_upper_bound(&c, d, h(0.6)));
        }
    }

    #[test]
    fn cloud_on_cantor_set_breaks_between_intervals() {
        let grid = TimeGrid::uniform(729).unwrap();
        let p = generate_fbm_path(h(0.5), &grid, 1, 1).unwrap();
        let set = middle_thirds_cantor(2).unwrap();
        let c = GraphCloud::from_path_on_set(&p, &set, GraphSource::FbmGraph, h(0.5)).unwrap();
        assert_eq!(c.breaks.len(), 3);
        assert!(c.points.iter().all(|q| set.contains(q.t)));
        let full = GraphCloud::from_path_on_set(&p, &full_interval(), GraphSource::FbmGraph, h(0.5)).unwrap();
        assert!(full.breaks.is_empty());
        assert_eq!(full.len(), 730);
    }

    #[test]
    fn invalid_clouds() {
        assert!(GraphCloud::new(vec![], GraphSource::FbmGraph, h(0.5)).is_err());
        assert!(GraphCloud::new(vec![SpaceTimePoint::new(1.5, vec![0.0])], GraphSource::FbmGraph, h(0.5)).is_err());
        let pts = vec![SpaceTimePoint::new(0.1, vec![0.0]), SpaceTimePoint::new(0.2, vec![0.0, 1.0])];
        assert!(GraphCloud::new(pts, GraphSource::FbmGraph, h(0.5)).is_err());
    }

    #[test]
    fn energy_two_points() {
        let m = WeightedTimeSet::new(vec![0.0, 1.0], vec![0.5, 0.5]).unwrap();
        let vals = vec![vec![0.0], vec![0.0]];
        for g in [0.1, 0.7, 2.0] {
            let e = energy_integral_mc(&m, &vals, g, h(0.5)).unwrap();
            assert!((e - 0.5).abs() < 1e-15);
        }
    }

    #[test]
    fn energy_monotone_in_gamma() {
        let m = WeightedTimeSet::uniform(vec![0.1, 0.2, 0.35, 0.5]).unwrap();
        let vals = vec![vec![0.0], vec![0.1], vec![-0.2], vec![0.05]];
        let e1 = energy_integral_mc(&m, &vals, 0.3, h(0.5)).unwrap();
        let e2 = energy_integral_mc(&m, &vals, 0.6, h(0.5)).unwrap();
        assert!(e2 > e1);
    }

    #[test]
    fn energy_sampled_matches_exact() {
        let grid = TimeGrid::uniform(1000).unwrap();
        let p = generate_fbm_path(h(0.5), &grid, 1, 4).unwrap();
        let m = WeightedTimeSet::uniform(grid.times().to_vec()).unwrap();
        let vals: Vec<Vec<f64>> = (0..grid.len()).map(|i| p.point(i)).collect();
        let exact = energy_integral_mc(&m, &vals, 0.5, h(0.5)).unwrap();
        let opts = EnergyOptions { exact_limit: 10, sampled_pairs: 2_000_000, seed: 3 };
        let sampled = energy_integral_with(&m, &vals, 0.5, h(0.5), &opts).unwrap();
        assert!((sampled / exact - 1.0).abs() < 0.02, "{sampled} vs {exact}");
    }

    #[test]
    fn energy_errors() {
        let m = WeightedTimeSet::uniform(vec![0.5]).unwrap();
        assert!(energy_integral_mc(&m, &[vec![0.0]], 0.5, h(0.5)).is_err());
        let m = WeightedTimeSet::uniform(vec![0.1, 0.5]).unwrap();
        assert!(energy_integral_mc(&m, &[vec![0.0]], 0.5, h(0.5)).is_err());
        assert!(energy_integral_mc(&m, &[vec![0.0], vec![1.0]], 0.0, h(0.5)).is_err());
    }

    #[test]
    fn kernel_at_unit_time_is_at_most_one() {
        let v = kernel_expectation_mc(1.0, h(0.5), h(0.5), 0.3, 2, 10_000, 1).unwrap();
        assert!(v <= 1.0 && v > 0.0);
    }

    #[test]
    fn kernel_errors() {
        assert!(matches!(
            kernel_expectation_mc(0.5, h(0.5), h(0.5), 1.0, 2, 10, 1),
            Err(Error::GammaAtBoundary { .. })
        ));
        assert!(matches!(
            kernel_expectation_mc(0.5, h(0.7), h(0.5), 0.3, 1, 10, 1),
            Err(Error::AlphaExceedsH { .. })
        ));
        assert!(kernel_expectation_mc(0.0, h(0.5), h(0.5), 0.3, 1, 10, 1).is_err());
        assert!(kernel_expectation_mc(1.5, h(0.5), h(0.5), 0.3, 1, 10, 1).is_err());
    }

    #[test]
    fn kernel_is_deterministic() {
        let a = kernel_expectation_mc(0.25, h(0.3), h(0.6), 0.2, 1, 100_000, 9).unwrap();
        let b = kernel_expectation_mc(0.25, h(0.3), h(0.6), 0.2, 1, 100_000, 9).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn kernel_exponent_branches() {
        assert!((kernel_scaling_exponent(h(0.3), h(0.6), 0.3, 1) + 0.15).abs() < 1e-12);
        assert!((kernel_scaling_exponent(h(0.3), h(0.6), 0.9, 1) + 0.6).abs() < 1e-12);
    }
}
