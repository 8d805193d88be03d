//! Occupation measures of a drifted path over a time set: discretized as
//! histograms on a uniform cell grid, with the L² density diagnostic and a
//! finite-resolution witness for non-empty interior of the image.

use std::collections::{BTreeMap, HashMap, HashSet};

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::fbm::SamplePath;
use crate::fractal::WeightedTimeSet;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct WeightedPoint {
    pub weight: f64,
    pub value: Vec<f64>,
}

/// Values of `path + drift` at the sample times, by linear interpolation on
/// the shared grid. Weights are passed through unchanged.
pub fn drifted_image(path: &SamplePath, drift: &[Vec<f64>], samples: &WeightedTimeSet) -> Result<Vec<WeightedPoint>> {
    if drift.len() != path.dim() {
        return Err(Error::GridMismatch(format!(
            "drift has {} coordinates, path has {}",
            drift.len(),
            path.dim()
        )));
    }
    if let Some(bad) = drift.iter().find(|c| c.len() != path.len()) {
        return Err(Error::GridMismatch(format!(
            "drift coordinate has {} values on a grid of {}",
            bad.len(),
            path.len()
        )));
    }
    samples
        .times()
        .iter()
        .zip(samples.weights())
        .map(|(&t, &weight)| {
            let (i, w) = path
                .grid
                .locate(t)
                .ok_or_else(|| Error::GridMismatch(format!("sample time {t} outside the path grid")))?;
            let value = path
                .values
                .iter()
                .zip(drift)
                .map(|(p, f)| {
                    let at = |k: usize| p[k] + f[k];
                    if w == 0.0 {
                        at(i)
                    } else {
                        (1.0 - w) * at(i) + w * at(i + 1)
                    }
                })
                .collect();
            Ok(WeightedPoint { weight, value })
        })
        .collect()
}

/// Mass per cell of the grid `origin + ε·ℤ^d`. Masses are normalized to sum to 1.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct OccupationHistogram {
    pub cell_size: f64,
    pub origin: Vec<f64>,
    pub cells: BTreeMap<Vec<i64>, f64>,
    pub total_mass: f64,
}

impl OccupationHistogram {
    pub fn dim(&self) -> usize {
        self.origin.len()
    }

    pub fn cell_of(&self, x: &[f64]) -> Vec<i64> {
        x.iter()
            .zip(&self.origin)
            .map(|(v, o)| ((v - o) / self.cell_size).floor() as i64)
            .collect()
    }

    pub fn occupied(&self) -> usize {
        self.cells.values().filter(|&&m| m > 0.0).count()
    }

    /// Sparse CSV `i1,…,id,mass`, optionally preceded by a `#` comment line.
    pub fn to_csv(&self, comment: Option<&str>) -> String {
        let mut out = String::new();
        if let Some(c) = comment {
            out.push_str(&format!("# {c}\n"));
        }
        let header: Vec<String> = (1..=self.dim()).map(|j| format!("i{j}")).collect();
        out.push_str(&header.join(","));
        out.push_str(",mass\n");
        for (cell, mass) in &self.cells {
            let idx: Vec<String> = cell.iter().map(i64::to_string).collect();
            out.push_str(&format!("{},{mass}\n", idx.join(",")));
        }
        out
    }
}

pub fn occupation_histogram(image: &[WeightedPoint], epsilon: f64) -> Result<OccupationHistogram> {
    let d = image.first().map_or(0, |p| p.value.len());
    occupation_histogram_with_origin(image, epsilon, &vec![0.0; d])
}

pub fn occupation_histogram_with_origin(image: &[WeightedPoint], epsilon: f64, origin: &[f64]) -> Result<OccupationHistogram> {
    if !(epsilon > 0.0) {
        return Err(Error::InvalidArgument(format!("cell size {epsilon} must be positive")));
    }
    if image.is_empty() {
        return Err(Error::InvalidArgument("empty image".into()));
    }
    if image.iter().any(|p| p.value.len() != origin.len()) {
        return Err(Error::InvalidArgument("image points must match the origin dimension".into()));
    }
    let total: f64 = image.iter().map(|p| p.weight).sum();
    if !(total > 0.0) {
        return Err(Error::InvalidArgument("image carries no mass".into()));
    }
    let mut hist = OccupationHistogram {
        cell_size: epsilon,
        origin: origin.to_vec(),
        cells: BTreeMap::new(),
        total_mass: 1.0,
    };
    for p in image {
        let key = hist.cell_of(&p.value);
        *hist.cells.entry(key).or_insert(0.0) += p.weight / total;
    }
    Ok(hist)
}

/// Lebesgue-measure proxy: `ε^d` times the number of cells whose density
/// `mass / ε^d` is at least `density_floor`.
pub fn positive_measure_estimate(hist: &OccupationHistogram, density_floor: f64) -> Result<f64> {
    if !(density_floor >= 0.0) {
        return Err(Error::InvalidArgument(format!("floor {density_floor} must be non-negative")));
    }
    let volume = hist.cell_size.powi(hist.dim() as i32);
    let threshold = density_floor * volume;
    let count = hist.cells.values().filter(|&&m| m >= threshold).count();
    Ok(count as f64 * volume)
}

fn euclid_sq(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum()
}

/// Neighbor offsets `{-1,0,1}^d`.
fn unit_offsets(d: usize) -> Vec<Vec<i64>> {
    (0..3usize.pow(d as u32))
        .map(|mut code| {
            (0..d)
                .map(|_| {
                    let o = (code % 3) as i64 - 1;
                    code /= 3;
                    o
                })
                .collect()
        })
        .collect()
}

/// Weighted mass of ordered pairs `i ≠ j` with `‖y_i − y_j‖ < r`.
fn close_pair_mass(image: &[WeightedPoint], r: f64) -> f64 {
    let d = image[0].value.len();
    let mut buckets: HashMap<Vec<i64>, Vec<usize>> = HashMap::new();
    for (i, p) in image.iter().enumerate() {
        let key: Vec<i64> = p.value.iter().map(|v| (v / r).floor() as i64).collect();
        buckets.entry(key).or_default().push(i);
    }
    let offsets = unit_offsets(d);
    let r2 = r * r;
    let per_point: Vec<f64> = image
        .par_iter()
        .enumerate()
        .map(|(i, p)| {
            let base: Vec<i64> = p.value.iter().map(|v| (v / r).floor() as i64).collect();
            let mut acc = 0.0;
            let mut key = base.clone();
            for off in &offsets {
                for k in 0..d {
                    key[k] = base[k] + off[k];
                }
                if let Some(members) = buckets.get(&key) {
                    for &j in members {
                        if j > i && euclid_sq(&p.value, &image[j].value) < r2 {
                            acc += image[j].weight;
                        }
                    }
                }
            }
            p.weight * acc
        })
        .collect();
    2.0 * per_point.iter().sum::<f64>()
}

/// `r^{-d}` times the weighted fraction of off-diagonal pairs (pooled over
/// the ensemble) whose images lie within Euclidean distance `r`.
pub fn l2_density_diagnostic(images: &[Vec<WeightedPoint>], radii: &[f64]) -> Result<Vec<f64>> {
    if images.is_empty() || images.iter().any(|im| im.len() < 2) {
        return Err(Error::InvalidArgument("each ensemble member needs at least two points".into()));
    }
    if radii.iter().any(|r| !(*r > 0.0)) {
        return Err(Error::InvalidArgument("radii must be positive".into()));
    }
    let d = images[0][0].value.len();
    let pair_mass: f64 = images
        .iter()
        .map(|im| {
            let w: f64 = im.iter().map(|p| p.weight).sum();
            w * w - im.iter().map(|p| p.weight * p.weight).sum::<f64>()
        })
        .sum();
    Ok(radii
        .iter()
        .map(|&r| {
            let close: f64 = images.iter().map(|im| close_pair_mass(im, r)).sum();
            r.powi(-(d as i32)) * close / pair_mass
        })
        .collect())
}

/// Cells whose whole ℓ∞ neighbourhood of radius `radius_cells` is occupied.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct InteriorReport {
    pub cell_size: f64,
    pub radius_cells: usize,
    pub interior_cells: Vec<Vec<i64>>,
    /// 1 or 0 for a single histogram; seed fraction for an aggregate.
    pub fraction_of_seeds_with_interior: f64,
}

pub fn interior_probe(hist: &OccupationHistogram, radius_cells: usize) -> Result<InteriorReport> {
    if radius_cells == 0 {
        return Err(Error::InvalidArgument("radius must be at least one cell".into()));
    }
    let d = hist.dim();
    let occupied: HashSet<&Vec<i64>> = hist.cells.iter().filter(|(_, &m)| m > 0.0).map(|(k, _)| k).collect();
    let r = radius_cells as i64;
    let side = (2 * radius_cells + 1) as u64;
    let count = side.pow(d as u32);
    let interior_cells: Vec<Vec<i64>> = hist
        .cells
        .keys()
        .filter(|c| occupied.contains(c))
        .filter(|c| {
            let mut probe = vec![0i64; d];
            (0..count).all(|mut code| {
                for (k, slot) in probe.iter_mut().enumerate() {
                    *slot = c[k] + (code % side) as i64 - r;
                    code /= side;
                }
                occupied.contains(&probe)
            })
        })
        .cloned()
        .collect();
    let fraction = if interior_cells.is_empty() { 0.0 } else { 1.0 };
    Ok(InteriorReport {
        cell_size: hist.cell_size,
        radius_cells,
        interior_cells,
        fraction_of_seeds_with_interior: fraction,
    })
}

/// Seed-ordered aggregate of per-seed interior probes.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct InteriorSummary {
    pub cell_size: f64,
    pub radius_cells: usize,
    pub seeds: usize,
    pub seeds_with_interior: usize,
    pub fraction_of_seeds_with_interior: f64,
    pub interior_cell_counts: Vec<usize>,
}

pub fn aggregate_interior(reports: &[InteriorReport]) -> Result<InteriorSummary> {
    let Some(first) = reports.first() else {
        return Err(Error::InvalidArgument("no reports to aggregate".into()));
    };
    let counts: Vec<usize> = reports.iter().map(|r| r.interior_cells.len()).collect();
    let with = counts.iter().filter(|&&c| c > 0).count();
    Ok(InteriorSummary {
        cell_size: first.cell_size,
        radius_cells: first.radius_cells,
        seeds: reports.len(),
        seeds_with_interior: with,
        fraction_of_seeds_with_interior: with as f64 / reports.len() as f64,
        interior_cell_counts: counts,
    })
}
