//! Configuration-driven experiment suite.
//!
//! A suite config is JSON with a schema version, a seed base, a seed-fraction
//! threshold and a list of experiments. Each experiment expands into cells;
//! each cell produces one `ReportRow`. Rows are appended to `report.csv` as
//! soon as they are complete, in config order. Wall-clock times go to a
//! separate `timings.csv` so that rows are identical across reruns.

use std::path::Path;
use std::time::Instant;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use serde_json::{json, Value};
use sha2::{Digest, Sha256};

use crate::error::{Error, Result};
use crate::estimators::{
    dyadic_deltas, estimate_parabolic_dimension_with, BoxGrid, kernel_expectation_mc, kernel_scaling_exponent, CountMode,
    DimensionEstimate, EstimatorOptions, GraphCloud, GraphSource,
};
use crate::fbm::{generate_fbm_path, FbmSampler, HurstIndex, SamplePath, TimeGrid};
use crate::fractal::{
    full_interval, generalized_cantor, middle_thirds_cantor, sample_natural_measure, two_branch_ratio_for_dim, FractalSet,
};
use crate::io::{write_atomic, AppendFile};
use crate::occupation::{drifted_image, interior_probe, l2_density_diagnostic, occupation_histogram, WeightedPoint};
use crate::parabolic::{comparison_bounds, holder_graph_bounds, theoretical_graph_dimension};
use crate::stats::{linear_fit, median};

pub const SCHEMA_VERSION: u32 = 1;

fn default_seed_base() -> u64 {
    1
}
fn default_threshold() -> f64 {
    0.9
}
fn default_grid_steps() -> usize {
    1 << 14
}
fn default_samples() -> usize {
    1 << 14
}
fn default_seeds() -> usize {
    20
}
fn default_count_mode() -> CountMode {
    CountMode::Envelope
}
fn default_tolerance() -> f64 {
    0.1
}
fn default_tolerance_multi_d() -> f64 {
    0.15
}
fn default_min_r_squared() -> f64 {
    0.98
}
fn default_slack() -> f64 {
    0.1
}
fn default_k_min() -> u32 {
    1
}
fn default_k_max() -> u32 {
    8
}
fn default_kernel_samples() -> usize {
    1_000_000
}
fn default_rel_tolerance() -> f64 {
    0.05
}
fn default_radius_coarse() -> u32 {
    4
}
fn default_radius_fine() -> u32 {
    10
}
fn default_max_ratio() -> f64 {
    3.0
}
fn default_true() -> bool {
    true
}
fn default_radius_cells() -> usize {
    2
}
fn default_control_max_fraction() -> f64 {
    0.1
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SuiteConfig {
    pub schema_version: u32,
    #[serde(default = "default_seed_base")]
    pub seed_base: u64,
    /// Seed fraction required for almost-sure statements.
    #[serde(default = "default_threshold")]
    pub threshold: f64,
    pub experiments: Vec<Experiment>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum Experiment {
    DimFormula(DimFormulaConfig),
    HolderBounds(HolderBoundsConfig),
    ComparisonBounds(ComparisonBoundsConfig),
    KernelScaling(KernelScalingConfig),
    OccupationL2(OccupationL2Config),
    Interior(InteriorConfig),
    Theorem41(Theorem41Config),
}

impl Experiment {
    pub fn kind(&self) -> &'static str {
        match self {
            Experiment::DimFormula(_) => "dim-formula",
            Experiment::HolderBounds(_) => "holder-bounds",
            Experiment::ComparisonBounds(_) => "comparison-bounds",
            Experiment::KernelScaling(_) => "kernel-scaling",
            Experiment::OccupationL2(_) => "occupation-l2",
            Experiment::Interior(_) => "interior",
            Experiment::Theorem41(_) => "theorem41",
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "kebab-case", deny_unknown_fields)]
pub enum SetSpec {
    FullInterval,
    MiddleThirds { generation: u32 },
    GeneralizedCantor { m: u32, r: f64, generation: u32 },
    /// Two-branch Cantor set with the given dimension.
    TwoBranchCantor { dim: f64, generation: u32 },
}

impl SetSpec {
    pub fn build(&self) -> Result<FractalSet> {
        match *self {
            SetSpec::FullInterval => Ok(full_interval()),
            SetSpec::MiddleThirds { generation } => middle_thirds_cantor(generation),
            SetSpec::GeneralizedCantor { m, r, generation } => generalized_cantor(m, r, generation),
            SetSpec::TwoBranchCantor { dim, generation } => generalized_cantor(2, two_branch_ratio_for_dim(dim)?, generation),
        }
    }
}

/// Drift `f` added to the path before taking images.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "kebab-case", deny_unknown_fields)]
pub enum DriftSpec {
    Zero,
    /// `f(t) = t·slopes`.
    Linear { slopes: Vec<f64> },
    /// An independent fBm sample.
    Fbm { hurst: HurstIndex },
}

impl DriftSpec {
    fn values(&self, grid: &TimeGrid, d: usize, seed: u64) -> Result<Vec<Vec<f64>>> {
        match self {
            DriftSpec::Zero => Ok(vec![vec![0.0; grid.len()]; d]),
            DriftSpec::Linear { slopes } => {
                if slopes.len() != d {
                    return Err(Error::Config(format!("linear drift has {} slopes for d={d}", slopes.len())));
                }
                Ok(slopes.iter().map(|c| grid.times().iter().map(|t| c * t).collect()).collect())
            }
            // stream component 1 keeps the drift independent of the path
            DriftSpec::Fbm { hurst } => Ok(FbmSampler::new(*hurst, grid)?.sample_coordinates(d, seed, 1)),
        }
    }
}

/// Function whose graph is measured by the bounds experiments.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "kebab-case", deny_unknown_fields)]
pub enum FunctionSpec {
    /// A sample of fBm with index `alpha`, one per seed.
    Fbm { alpha: HurstIndex },
    /// `f(t) = t·slopes`; Lipschitz, so α-Hölder for every α ≤ 1.
    Linear { slopes: Vec<f64> },
}

impl FunctionSpec {
    fn dim(&self, d: usize) -> usize {
        match self {
            FunctionSpec::Fbm { .. } => d,
            FunctionSpec::Linear { slopes } => slopes.len(),
        }
    }

    /// Hölder exponent used for the theoretical bounds under index `hurst`.
    fn holder_exponent(&self, hurst: HurstIndex) -> HurstIndex {
        match self {
            FunctionSpec::Fbm { alpha } => *alpha,
            FunctionSpec::Linear { .. } => hurst,
        }
    }

    fn path(&self, grid: &TimeGrid, d: usize, seed: u64) -> Result<SamplePath> {
        match self {
            FunctionSpec::Fbm { alpha } => generate_fbm_path(*alpha, grid, d, seed),
            FunctionSpec::Linear { slopes } => Ok(SamplePath {
                grid: grid.clone(),
                values: slopes.iter().map(|c| grid.times().iter().map(|t| c * t).collect()).collect(),
                hurst_components: vec![HurstIndex::new(0.5)?],
                seeds: vec![seed],
            }),
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScaleRange {
    /// Coarsest scale `2^-coarse`.
    pub coarse: u32,
    /// Finest scale `2^-fine`.
    pub fine: u32,
    #[serde(default = "default_trim")]
    pub trim_octaves: f64,
}

fn default_trim() -> f64 {
    1.0
}

impl Default for ScaleRange {
    fn default() -> Self {
        Self { coarse: 4, fine: 12, trim_octaves: 1.0 }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct AlphaH {
    pub alpha: HurstIndex,
    pub hurst: HurstIndex,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DimFormulaConfig {
    pub pairs: Vec<AlphaH>,
    pub dims: Vec<usize>,
    pub sets: Vec<SetSpec>,
    #[serde(default = "default_grid_steps")]
    pub grid_steps: usize,
    #[serde(default)]
    pub scales: ScaleRange,
    #[serde(default = "default_seeds")]
    pub seeds: usize,
    #[serde(default = "default_count_mode")]
    pub count_mode: CountMode,
    /// Tolerance for d = 1.
    #[serde(default = "default_tolerance")]
    pub tolerance: f64,
    /// Tolerance for d ≥ 2.
    #[serde(default = "default_tolerance_multi_d")]
    pub tolerance_multi_d: f64,
    #[serde(default = "default_min_r_squared")]
    pub min_r_squared: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct HolderBoundsConfig {
    pub functions: Vec<FunctionSpec>,
    pub hursts: Vec<HurstIndex>,
    /// Ignored by linear functions, which carry their own dimension.
    pub dims: Vec<usize>,
    pub sets: Vec<SetSpec>,
    #[serde(default = "default_grid_steps")]
    pub grid_steps: usize,
    #[serde(default)]
    pub scales: ScaleRange,
    #[serde(default = "default_seeds")]
    pub seeds: usize,
    #[serde(default = "default_count_mode")]
    pub count_mode: CountMode,
    #[serde(default = "default_slack")]
    pub slack: f64,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ComparisonTriple {
    pub alpha: HurstIndex,
    pub hurst: HurstIndex,
    pub hurst_prime: HurstIndex,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ComparisonBoundsConfig {
    pub triples: Vec<ComparisonTriple>,
    pub dims: Vec<usize>,
    pub sets: Vec<SetSpec>,
    #[serde(default = "default_grid_steps")]
    pub grid_steps: usize,
    #[serde(default)]
    pub scales: ScaleRange,
    #[serde(default = "default_seeds")]
    pub seeds: usize,
    #[serde(default = "default_count_mode")]
    pub count_mode: CountMode,
    #[serde(default = "default_slack")]
    pub slack: f64,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct KernelCell {
    pub alpha: HurstIndex,
    pub hurst: HurstIndex,
    pub gamma: f64,
    pub d: usize,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct KernelScalingConfig {
    pub cells: Vec<KernelCell>,
    /// Times `t = 2^-k` for `k_min ≤ k ≤ k_max`.
    #[serde(default = "default_k_min")]
    pub k_min: u32,
    #[serde(default = "default_k_max")]
    pub k_max: u32,
    #[serde(default = "default_kernel_samples")]
    pub samples: usize,
    /// Allowed relative deviation of the slope from the predicted exponent.
    #[serde(default = "default_rel_tolerance")]
    pub rel_tolerance: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OccupationL2Config {
    pub hurst: HurstIndex,
    pub d: usize,
    pub set: SetSpec,
    pub drifts: Vec<DriftSpec>,
    /// Radii `2^-k` for `radius_coarse ≤ k ≤ radius_fine`.
    #[serde(default = "default_radius_coarse")]
    pub radius_coarse: u32,
    #[serde(default = "default_radius_fine")]
    pub radius_fine: u32,
    #[serde(default = "default_grid_steps")]
    pub grid_steps: usize,
    #[serde(default = "default_samples")]
    pub samples: usize,
    #[serde(default = "default_seeds")]
    pub seeds: usize,
    /// Bound on max/min of the diagnostic over the radii.
    #[serde(default = "default_max_ratio")]
    pub max_ratio: f64,
    /// Adds a constant-path row whose diagnostic must scale like `r^-d`.
    #[serde(default = "default_true")]
    pub constant_control: bool,
    #[serde(default = "default_tolerance")]
    pub control_rel_tolerance: f64,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Expectation {
    Interior,
    NoInterior,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct InteriorConfig {
    pub hurst: HurstIndex,
    pub d: usize,
    pub set: SetSpec,
    pub drift: DriftSpec,
    /// Cell size `2^-epsilon_exp`.
    pub epsilon_exp: u32,
    pub expect: Expectation,
    #[serde(default = "default_radius_cells")]
    pub radius_cells: usize,
    #[serde(default = "default_grid_steps")]
    pub grid_steps: usize,
    #[serde(default = "default_samples")]
    pub samples: usize,
    #[serde(default = "default_seeds")]
    pub seeds: usize,
    /// Largest seed fraction accepted when no interior is expected.
    #[serde(default = "default_control_max_fraction")]
    pub control_max_fraction: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Theorem41Config {
    pub hurst: HurstIndex,
    /// Hölder exponent the drift is required to exceed.
    pub alpha: HurstIndex,
    /// Index of the fBm sample used as drift.
    pub alpha_prime: HurstIndex,
    pub d: usize,
    pub set: SetSpec,
    pub epsilon_exp: u32,
    #[serde(default = "default_radius_cells")]
    pub radius_cells: usize,
    #[serde(default = "default_grid_steps")]
    pub grid_steps: usize,
    #[serde(default = "default_samples")]
    pub samples: usize,
    #[serde(default = "default_seeds")]
    pub seeds: usize,
}

/// One line of `report.csv`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ReportRow {
    pub experiment: usize,
    pub cell: usize,
    pub kind: String,
    pub config_hash: String,
    pub params: Value,
    pub theory: Option<f64>,
    pub lower: Option<f64>,
    pub upper: Option<f64>,
    pub estimate: f64,
    pub tolerance: Option<f64>,
    pub pass: bool,
    pub r_squared: Option<f64>,
    pub seeds: usize,
    pub threshold: f64,
    pub diagnostics: Value,
}

pub const REPORT_HEADER: &str =
    "experiment,cell,kind,config_hash,params,theory,lower,upper,estimate,tolerance,pass,r_squared,seeds,threshold,diagnostics\n";

fn opt(v: Option<f64>) -> String {
    v.map(|x| x.to_string()).unwrap_or_default()
}

impl ReportRow {
    pub fn to_csv_line(&self) -> String {
        let mut w = csv::Writer::from_writer(Vec::new());
        w.write_record([
            self.experiment.to_string(),
            self.cell.to_string(),
            self.kind.clone(),
            self.config_hash.clone(),
            self.params.to_string(),
            opt(self.theory),
            opt(self.lower),
            opt(self.upper),
            self.estimate.to_string(),
            opt(self.tolerance),
            self.pass.to_string(),
            opt(self.r_squared),
            self.seeds.to_string(),
            self.threshold.to_string(),
            self.diagnostics.to_string(),
        ])
        .expect("in-memory csv write");
        String::from_utf8(w.into_inner().expect("in-memory csv flush")).expect("csv output is utf-8")
    }
}

impl SuiteConfig {
    pub fn from_json(text: &str) -> Result<Self> {
        let cfg: SuiteConfig = serde_json::from_str(text).map_err(|e| Error::Config(e.to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    /// Compact JSON of the parsed config with defaults filled in.
    pub fn canonical_json(&self) -> String {
        serde_json::to_string(self).expect("config serializes")
    }

    pub fn hash(&self) -> String {
        hex::encode(Sha256::digest(self.canonical_json().as_bytes()))
    }

    pub fn validate(&self) -> Result<()> {
        if self.schema_version != SCHEMA_VERSION {
            return Err(Error::Config(format!(
                "schema_version {} is not supported (expected {SCHEMA_VERSION})",
                self.schema_version
            )));
        }
        if !(self.threshold > 0.0 && self.threshold <= 1.0) {
            return Err(Error::Config(format!("threshold {} outside (0,1]", self.threshold)));
        }
        for (i, e) in self.experiments.iter().enumerate() {
            validate_experiment(e).map_err(|m| Error::Config(format!("experiment {i} ({}): {m}", e.kind())))?;
        }
        Ok(())
    }
}

fn validate_experiment(e: &Experiment) -> std::result::Result<(), String> {
    let seeds_ok = |s: usize| if s >= 1 { Ok(()) } else { Err("seeds must be at least 1".to_string()) };
    let dims_ok = |ds: &[usize]| {
        if ds.is_empty() || ds.contains(&0) {
            Err("dims must be non-empty and positive".to_string())
        } else {
            Ok(())
        }
    };
    let scales_ok = |s: &ScaleRange| {
        if s.fine < s.coarse + 3 {
            Err(format!("scale range 2^-{}..2^-{} needs at least four scales", s.coarse, s.fine))
        } else {
            Ok(())
        }
    };
    let grid_ok = |n: usize| if n >= 2 { Ok(()) } else { Err("grid_steps must be at least 2".to_string()) };
    match e {
        Experiment::DimFormula(c) => {
            seeds_ok(c.seeds)?;
            dims_ok(&c.dims)?;
            scales_ok(&c.scales)?;
            grid_ok(c.grid_steps)?;
            if let Some(p) = c.pairs.iter().find(|p| p.alpha.value() > p.hurst.value()) {
                return Err(format!("alpha {} exceeds H {}", p.alpha, p.hurst));
            }
        }
        Experiment::HolderBounds(c) => {
            seeds_ok(c.seeds)?;
            scales_ok(&c.scales)?;
            grid_ok(c.grid_steps)?;
            for f in &c.functions {
                match f {
                    FunctionSpec::Fbm { alpha } => {
                        dims_ok(&c.dims)?;
                        if let Some(h) = c.hursts.iter().find(|h| alpha.value() > h.value()) {
                            return Err(format!("alpha {alpha} exceeds H {h}"));
                        }
                    }
                    FunctionSpec::Linear { slopes } if slopes.is_empty() => return Err("linear function needs slopes".into()),
                    FunctionSpec::Linear { .. } => {}
                }
            }
        }
        Experiment::ComparisonBounds(c) => {
            seeds_ok(c.seeds)?;
            dims_ok(&c.dims)?;
            scales_ok(&c.scales)?;
            grid_ok(c.grid_steps)?;
            for t in &c.triples {
                if t.alpha.value() > t.hurst.value() || t.hurst.value() >= t.hurst_prime.value() {
                    return Err(format!("need alpha ≤ H < H' in ({}, {}, {})", t.alpha, t.hurst, t.hurst_prime));
                }
            }
        }
        Experiment::KernelScaling(c) => {
            if c.k_min == 0 || c.k_max < c.k_min + 1 {
                return Err("need 1 ≤ k_min < k_max".into());
            }
            if c.samples == 0 {
                return Err("samples must be positive".into());
            }
            for k in &c.cells {
                if k.alpha.value() > k.hurst.value() || k.d == 0 || !(k.gamma > 0.0) {
                    return Err(format!("invalid kernel cell {k:?}"));
                }
            }
        }
        Experiment::OccupationL2(c) => {
            seeds_ok(c.seeds)?;
            dims_ok(&[c.d])?;
            grid_ok(c.grid_steps)?;
            if c.radius_fine <= c.radius_coarse {
                return Err("radius_fine must exceed radius_coarse".into());
            }
            if c.samples < 2 {
                return Err("samples must be at least 2".into());
            }
        }
        Experiment::Interior(c) => {
            seeds_ok(c.seeds)?;
            dims_ok(&[c.d])?;
            grid_ok(c.grid_steps)?;
            if c.radius_cells == 0 || c.samples == 0 {
                return Err("radius_cells and samples must be positive".into());
            }
        }
        Experiment::Theorem41(c) => {
            seeds_ok(c.seeds)?;
            dims_ok(&[c.d])?;
            grid_ok(c.grid_steps)?;
            if c.radius_cells == 0 || c.samples == 0 {
                return Err("radius_cells and samples must be positive".into());
            }
        }
    }
    Ok(())
}

/// Shared per-run values stamped into every row.
#[derive(Clone, Debug)]
pub struct RunContext {
    pub seed_base: u64,
    pub threshold: f64,
    pub config_hash: String,
    pub experiment: usize,
}

impl RunContext {
    pub fn new(cfg: &SuiteConfig) -> Self {
        Self { seed_base: cfg.seed_base, threshold: cfg.threshold, config_hash: cfg.hash(), experiment: 0 }
    }

    fn seed(&self, s: usize) -> u64 {
        self.seed_base.wrapping_add(s as u64)
    }

    #[allow(clippy::too_many_arguments)]
    fn row(
        &self,
        kind: &str,
        cell: usize,
        params: Value,
        theory: Option<f64>,
        bounds: (Option<f64>, Option<f64>),
        estimate: f64,
        tolerance: Option<f64>,
        pass: bool,
        r_squared: Option<f64>,
        seeds: usize,
        diagnostics: Value,
    ) -> ReportRow {
        ReportRow {
            experiment: self.experiment,
            cell,
            kind: kind.to_string(),
            config_hash: self.config_hash.clone(),
            params,
            theory,
            lower: bounds.0,
            upper: bounds.1,
            estimate,
            tolerance,
            pass,
            r_squared,
            seeds,
            threshold: self.threshold,
            diagnostics,
        }
    }
}

type Sink<'a> = dyn FnMut(ReportRow) -> Result<()> + 'a;

fn options(mode: CountMode, scales: &ScaleRange) -> (EstimatorOptions, Vec<f64>) {
    let opts = EstimatorOptions { mode, trim_octaves: scales.trim_octaves, ..Default::default() };
    (opts, dyadic_deltas(scales.coarse, scales.fine))
}

/// Box-dimension estimates of `Gr_A(f)` for each seed and each (index, options) variant.
fn graph_estimates(
    function: &FunctionSpec,
    d: usize,
    set: &FractalSet,
    grid: &TimeGrid,
    variants: &[(HurstIndex, EstimatorOptions)],
    deltas: &[f64],
    seeds: usize,
    ctx: &RunContext,
) -> Result<Vec<Vec<DimensionEstimate>>> {
    (0..seeds)
        .into_par_iter()
        .map(|s| {
            let path = function.path(grid, d, ctx.seed(s))?;
            variants
                .iter()
                .map(|(h, opts)| {
                    let cloud = GraphCloud::from_path_on_set(&path, set, GraphSource::FbmGraph, *h)?;
                    estimate_parabolic_dimension_with(&cloud, deltas, *h, opts)
                })
                .collect()
        })
        .collect()
}

fn summary(estimates: &[DimensionEstimate]) -> (f64, f64, f64) {
    let ex: Vec<f64> = estimates.iter().map(|e| e.exponent).collect();
    let r2: Vec<f64> = estimates.iter().map(|e| e.r_squared).collect();
    let min_r2 = r2.iter().copied().fold(f64::INFINITY, f64::min);
    (median(&ex).unwrap_or(f64::NAN), min_r2, median(&r2).unwrap_or(f64::NAN))
}

fn run_dim_formula(c: &DimFormulaConfig, ctx: &RunContext, emit: &mut Sink) -> Result<()> {
    let grid = TimeGrid::uniform(c.grid_steps)?;
    let (opts, deltas) = options(c.count_mode, &c.scales);
    let mut cell = 0;
    for p in &c.pairs {
        for &d in &c.dims {
            for spec in &c.sets {
                let set = spec.build()?;
                let theory = theoretical_graph_dimension(p.alpha, p.hurst, set.theoretical_dim, d)?;
                let f = FunctionSpec::Fbm { alpha: p.alpha };
                // second variant re-anchors the value axes half a cell down
                let shifted = EstimatorOptions { grid: BoxGrid { value_offset: 0.5 }, ..opts };
                let est = graph_estimates(&f, d, &set, &grid, &[(p.hurst, opts), (p.hurst, shifted)], &deltas, c.seeds, ctx)?;
                let (per_seed, per_seed_shifted): (Vec<DimensionEstimate>, Vec<DimensionEstimate>) =
                    est.into_iter().map(|v| (v[0].clone(), v[1].clone())).unzip();
                let (med, min_r2, med_r2) = summary(&per_seed);
                let (med_shifted, _, _) = summary(&per_seed_shifted);
                let tol = if d == 1 { c.tolerance } else { c.tolerance_multi_d };
                let pass = (med - theory).abs() <= tol && min_r2 >= c.min_r_squared;
                emit(ctx.row(
                    "dim-formula",
                    cell,
                    json!({"alpha": p.alpha, "hurst": p.hurst, "d": d, "set": spec, "grid_steps": c.grid_steps,
                           "scales": c.scales, "count_mode": c.count_mode}),
                    Some(theory),
                    (None, None),
                    med,
                    Some(tol),
                    pass,
                    Some(min_r2),
                    c.seeds,
                    json!({"median_r_squared": med_r2, "min_r_squared_required": c.min_r_squared,
                           "exponents": per_seed.iter().map(|e| e.exponent).collect::<Vec<_>>(),
                           "fit_range": per_seed[0].fit_range, "dim_a": set.theoretical_dim,
                           "half_cell_anchor_median": med_shifted, "anchor_shift": med_shifted - med}),
                ))?;
                cell += 1;
            }
        }
    }
    Ok(())
}

fn run_holder_bounds(c: &HolderBoundsConfig, ctx: &RunContext, emit: &mut Sink) -> Result<()> {
    let grid = TimeGrid::uniform(c.grid_steps)?;
    let (opts, deltas) = options(c.count_mode, &c.scales);
    let mut cell = 0;
    for f in &c.functions {
        let dims: Vec<usize> = match f {
            FunctionSpec::Fbm { .. } => c.dims.clone(),
            FunctionSpec::Linear { slopes } => vec![slopes.len()],
        };
        for &hurst in &c.hursts {
            for &d in &dims {
                for spec in &c.sets {
                    let set = spec.build()?;
                    let alpha = f.holder_exponent(hurst);
                    let (lower, upper) = holder_graph_bounds(alpha, hurst, set.theoretical_dim, f.dim(d))?;
                    let seeds = if matches!(f, FunctionSpec::Linear { .. }) { 1 } else { c.seeds };
                    let est = graph_estimates(f, d, &set, &grid, &[(hurst, opts)], &deltas, seeds, ctx)?;
                    let per_seed: Vec<DimensionEstimate> = est.into_iter().map(|mut v| v.remove(0)).collect();
                    let (med, min_r2, _) = summary(&per_seed);
                    let pass = med >= lower - c.slack && med <= upper + c.slack;
                    emit(ctx.row(
                        "holder-bounds",
                        cell,
                        json!({"function": f, "hurst": hurst, "d": f.dim(d), "set": spec, "grid_steps": c.grid_steps,
                               "scales": c.scales, "count_mode": c.count_mode}),
                        None,
                        (Some(lower), Some(upper)),
                        med,
                        Some(c.slack),
                        pass,
                        Some(min_r2),
                        seeds,
                        json!({"holder_exponent": alpha,
                               "exponents": per_seed.iter().map(|e| e.exponent).collect::<Vec<_>>()}),
                    ))?;
                    cell += 1;
                }
            }
        }
    }
    Ok(())
}

fn run_comparison_bounds(c: &ComparisonBoundsConfig, ctx: &RunContext, emit: &mut Sink) -> Result<()> {
    let grid = TimeGrid::uniform(c.grid_steps)?;
    let (opts, deltas) = options(c.count_mode, &c.scales);
    let mut cell = 0;
    for t in &c.triples {
        for &d in &c.dims {
            for spec in &c.sets {
                let set = spec.build()?;
                let f = FunctionSpec::Fbm { alpha: t.alpha };
                let est = graph_estimates(&f, d, &set, &grid, &[(t.hurst, opts), (t.hurst_prime, opts)], &deltas, c.seeds, ctx)?;
                let mut inside = 0;
                let mut lows = Vec::new();
                let mut highs = Vec::new();
                let mut primes = Vec::new();
                for pair in &est {
                    let (lo, hi) = comparison_bounds(pair[0].exponent.max(0.0), t.hurst, t.hurst_prime, d)?;
                    let e = pair[1].exponent;
                    if e >= lo - c.slack && e <= hi + c.slack {
                        inside += 1;
                    }
                    lows.push(lo);
                    highs.push(hi);
                    primes.push(e);
                }
                let fraction = inside as f64 / c.seeds as f64;
                emit(ctx.row(
                    "comparison-bounds",
                    cell,
                    json!({"alpha": t.alpha, "hurst": t.hurst, "hurst_prime": t.hurst_prime, "d": d, "set": spec,
                           "grid_steps": c.grid_steps, "scales": c.scales, "count_mode": c.count_mode}),
                    None,
                    (median(&lows), median(&highs)),
                    median(&primes).unwrap_or(f64::NAN),
                    Some(c.slack),
                    fraction >= ctx.threshold,
                    None,
                    c.seeds,
                    json!({"fraction_within_bounds": fraction,
                           "exponents_h": est.iter().map(|p| p[0].exponent).collect::<Vec<_>>(),
                           "exponents_h_prime": primes}),
                ))?;
                cell += 1;
            }
        }
    }
    Ok(())
}

/// Slope of `ln E[kernel]` against `ln t` over `t = 2^-k`.
pub fn kernel_scaling_slope(cell: &KernelCell, k_min: u32, k_max: u32, samples: usize, seed: u64) -> Result<(f64, f64, Vec<f64>)> {
    let ts: Vec<f64> = (k_min..=k_max).map(|k| 2f64.powi(-(k as i32))).collect();
    let values = ts
        .iter()
        .map(|&t| kernel_expectation_mc(t, cell.alpha, cell.hurst, cell.gamma, cell.d, samples, seed))
        .collect::<Result<Vec<f64>>>()?;
    let x: Vec<f64> = ts.iter().map(|t| t.ln()).collect();
    let y: Vec<f64> = values.iter().map(|v| v.ln()).collect();
    let fit = linear_fit(&x, &y).ok_or(Error::DegenerateRange)?;
    Ok((fit.slope, fit.r_squared, values))
}

fn run_kernel_scaling(c: &KernelScalingConfig, ctx: &RunContext, emit: &mut Sink) -> Result<()> {
    for (cell, k) in c.cells.iter().enumerate() {
        let theory = kernel_scaling_exponent(k.alpha, k.hurst, k.gamma, k.d);
        let (slope, r2, values) = kernel_scaling_slope(k, c.k_min, c.k_max, c.samples, ctx.seed_base)?;
        let tol = c.rel_tolerance * theory.abs();
        emit(ctx.row(
            "kernel-scaling",
            cell,
            json!({"alpha": k.alpha, "hurst": k.hurst, "gamma": k.gamma, "d": k.d, "k_min": c.k_min, "k_max": c.k_max,
                   "samples": c.samples}),
            Some(theory),
            (None, None),
            slope,
            Some(tol),
            (slope - theory).abs() <= tol,
            Some(r2),
            1,
            json!({"expectations": values, "rel_tolerance": c.rel_tolerance}),
        ))?;
    }
    Ok(())
}

/// Image of `(B^H + f)` over samples of the natural measure of `set`.
fn image_for_seed(
    hurst: HurstIndex,
    d: usize,
    set: &FractalSet,
    drift: &DriftSpec,
    grid: &TimeGrid,
    samples: usize,
    seed: u64,
) -> Result<Vec<WeightedPoint>> {
    let path = generate_fbm_path(hurst, grid, d, seed)?;
    let f = drift.values(grid, d, seed)?;
    let times = sample_natural_measure(set, samples, seed)?;
    drifted_image(&path, &f, &times)
}

/// Ratio max/min of the diagnostic and its values over the radii.
pub fn l2_ratio(values: &[f64]) -> f64 {
    let max = values.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let min = values.iter().copied().fold(f64::INFINITY, f64::min);
    max / min
}

fn run_occupation_l2(c: &OccupationL2Config, ctx: &RunContext, emit: &mut Sink) -> Result<()> {
    let grid = TimeGrid::uniform(c.grid_steps)?;
    let set = c.set.build()?;
    let radii: Vec<f64> = (c.radius_coarse..=c.radius_fine).map(|k| 2f64.powi(-(k as i32))).collect();
    let mut cell = 0;
    for drift in &c.drifts {
        let images = (0..c.seeds)
            .into_par_iter()
            .map(|s| image_for_seed(c.hurst, c.d, &set, drift, &grid, c.samples, ctx.seed(s)))
            .collect::<Result<Vec<_>>>()?;
        let values = l2_density_diagnostic(&images, &radii)?;
        let ratio = l2_ratio(&values);
        emit(ctx.row(
            "occupation-l2",
            cell,
            json!({"hurst": c.hurst, "d": c.d, "set": c.set, "drift": drift, "radius_coarse": c.radius_coarse,
                   "radius_fine": c.radius_fine, "grid_steps": c.grid_steps, "samples": c.samples}),
            None,
            (None, Some(c.max_ratio)),
            ratio,
            None,
            ratio.is_finite() && ratio <= c.max_ratio,
            None,
            c.seeds,
            json!({"radii": radii, "diagnostic": values, "dim_a": set.theoretical_dim,
                   "hd": c.hurst.value() * c.d as f64}),
        ))?;
        cell += 1;
    }
    if c.constant_control {
        // the value is exact for any point count; a small image keeps the pair count low
        let n = c.samples.min(256);
        let image: Vec<WeightedPoint> = (0..n)
            .map(|_| WeightedPoint { weight: 1.0 / n as f64, value: vec![0.0; c.d] })
            .collect();
        let values = l2_density_diagnostic(&vec![image; c.seeds], &radii)?;
        let x: Vec<f64> = radii.iter().map(|r| r.ln()).collect();
        let y: Vec<f64> = values.iter().map(|v| v.ln()).collect();
        let fit = linear_fit(&x, &y).ok_or(Error::DegenerateRange)?;
        let theory = -(c.d as f64);
        let tol = c.control_rel_tolerance * c.d as f64;
        emit(ctx.row(
            "occupation-l2",
            cell,
            json!({"control": "constant-path", "d": c.d, "radius_coarse": c.radius_coarse, "radius_fine": c.radius_fine}),
            Some(theory),
            (None, None),
            fit.slope,
            Some(tol),
            (fit.slope - theory).abs() <= tol,
            Some(fit.r_squared),
            c.seeds,
            json!({"radii": radii, "diagnostic": values}),
        ))?;
    }
    Ok(())
}

/// Per-seed interior cell counts for `(B^H + f)(A)` at cell size `2^-epsilon_exp`.
#[allow(clippy::too_many_arguments)]
pub fn interior_counts(
    hurst: HurstIndex,
    d: usize,
    set: &FractalSet,
    drift: &DriftSpec,
    grid: &TimeGrid,
    samples: usize,
    epsilon_exp: u32,
    radius_cells: usize,
    seeds: usize,
    seed_base: u64,
) -> Result<Vec<usize>> {
    let eps = 2f64.powi(-(epsilon_exp as i32));
    (0..seeds)
        .into_par_iter()
        .map(|s| {
            let seed = seed_base.wrapping_add(s as u64);
            let image = image_for_seed(hurst, d, set, drift, grid, samples, seed)?;
            let hist = occupation_histogram(&image, eps)?;
            Ok(interior_probe(&hist, radius_cells)?.interior_cells.len())
        })
        .collect()
}

fn interior_row(
    ctx: &RunContext,
    kind: &str,
    params: Value,
    counts: &[usize],
    expect: Expectation,
    control_max: f64,
) -> ReportRow {
    let with = counts.iter().filter(|&&c| c > 0).count();
    let fraction = with as f64 / counts.len() as f64;
    let (bounds, pass) = match expect {
        Expectation::Interior => ((Some(ctx.threshold), None), fraction >= ctx.threshold),
        Expectation::NoInterior => ((None, Some(control_max)), fraction <= control_max),
    };
    ctx.row(
        kind,
        0,
        params,
        None,
        bounds,
        fraction,
        None,
        pass,
        None,
        counts.len(),
        json!({"interior_cell_counts": counts, "expect": expect}),
    )
}

fn run_interior(c: &InteriorConfig, ctx: &RunContext, emit: &mut Sink) -> Result<()> {
    let grid = TimeGrid::uniform(c.grid_steps)?;
    let set = c.set.build()?;
    let counts = interior_counts(
        c.hurst,
        c.d,
        &set,
        &c.drift,
        &grid,
        c.samples,
        c.epsilon_exp,
        c.radius_cells,
        c.seeds,
        ctx.seed_base,
    )?;
    let params = json!({"hurst": c.hurst, "d": c.d, "set": c.set, "drift": c.drift, "epsilon_exp": c.epsilon_exp,
                        "radius_cells": c.radius_cells, "grid_steps": c.grid_steps, "samples": c.samples,
                        "dim_a": set.theoretical_dim, "hd": c.hurst.value() * c.d as f64});
    emit(interior_row(ctx, "interior", params, &counts, c.expect, c.control_max_fraction))
}

/// Checks `0 < dim A ≤ Hd` and `α < α′ < dim A / d`.
pub fn check_theorem41(c: &Theorem41Config, dim_a: f64) -> Result<()> {
    let hd = c.hurst.value() * c.d as f64;
    if !(dim_a > 0.0 && dim_a <= hd) {
        return Err(Error::InfeasibleParameters(format!("need 0 < dim A ≤ Hd, got dim A = {dim_a}, Hd = {hd}")));
    }
    let (a, ap) = (c.alpha.value(), c.alpha_prime.value());
    if !(a < ap && ap * (c.d as f64) < dim_a) {
        return Err(Error::InfeasibleParameters(format!(
            "need alpha < alpha' < dim A / d, got alpha = {a}, alpha' = {ap}, dim A / d = {}",
            dim_a / c.d as f64
        )));
    }
    Ok(())
}

fn run_theorem41(c: &Theorem41Config, ctx: &RunContext, emit: &mut Sink) -> Result<()> {
    let grid = TimeGrid::uniform(c.grid_steps)?;
    let set = c.set.build()?;
    check_theorem41(c, set.theoretical_dim)?;
    let drift = DriftSpec::Fbm { hurst: c.alpha_prime };
    let counts = interior_counts(
        c.hurst,
        c.d,
        &set,
        &drift,
        &grid,
        c.samples,
        c.epsilon_exp,
        c.radius_cells,
        c.seeds,
        ctx.seed_base,
    )?;
    let params = json!({"hurst": c.hurst, "alpha": c.alpha, "alpha_prime": c.alpha_prime, "d": c.d, "set": c.set,
                        "epsilon_exp": c.epsilon_exp, "radius_cells": c.radius_cells, "grid_steps": c.grid_steps,
                        "samples": c.samples, "dim_a": set.theoretical_dim});
    emit(interior_row(ctx, "theorem41", params, &counts, Expectation::Interior, 0.0))
}

/// Runs one experiment, handing each row to `emit` as soon as it is ready.
pub fn run_experiment(e: &Experiment, ctx: &RunContext, emit: &mut Sink) -> Result<()> {
    match e {
        Experiment::DimFormula(c) => run_dim_formula(c, ctx, emit),
        Experiment::HolderBounds(c) => run_holder_bounds(c, ctx, emit),
        Experiment::ComparisonBounds(c) => run_comparison_bounds(c, ctx, emit),
        Experiment::KernelScaling(c) => run_kernel_scaling(c, ctx, emit),
        Experiment::OccupationL2(c) => run_occupation_l2(c, ctx, emit),
        Experiment::Interior(c) => run_interior(c, ctx, emit),
        Experiment::Theorem41(c) => run_theorem41(c, ctx, emit),
    }
}

/// Collects the rows of one experiment.
pub fn collect_rows(e: &Experiment, ctx: &RunContext) -> Result<Vec<ReportRow>> {
    let mut rows = Vec::new();
    run_experiment(e, ctx, &mut |r| {
        rows.push(r);
        Ok(())
    })?;
    Ok(rows)
}

/// Runs the whole suite into `out_dir`: `config.json` (canonical echo),
/// `report.csv` (one synced append per row), `timings.csv`.
pub fn run_suite(cfg: &SuiteConfig, out_dir: &Path) -> Result<Vec<ReportRow>> {
    cfg.validate()?;
    write_atomic(&out_dir.join("config.json"), cfg.canonical_json().as_bytes())?;
    let mut report = AppendFile::create(&out_dir.join("report.csv"), REPORT_HEADER)?;
    let mut timings = AppendFile::create(&out_dir.join("timings.csv"), "experiment,kind,seconds\n")?;
    let mut ctx = RunContext::new(cfg);
    let mut all = Vec::new();
    for (i, e) in cfg.experiments.iter().enumerate() {
        ctx.experiment = i;
        let start = Instant::now();
        run_experiment(e, &ctx, &mut |row| {
            report.append(&row.to_csv_line())?;
            all.push(row);
            Ok(())
        })?;
        timings.append(&format!("{i},{},{}\n", e.kind(), start.elapsed().as_secs_f64()))?;
    }
    Ok(all)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn h(v: f64) -> HurstIndex {
        HurstIndex::new(v).unwrap()
    }

    const SMALL: &str = r#"{
        "schema_version": 1,
        "seed_base": 3,
        "experiments": [
            {"kind": "dim-formula", "pairs": [{"alpha": 0.5, "hurst": 0.5}], "dims": [1],
             "sets": [{"type": "full-interval"}], "grid_steps": 4096, "seeds": 3,
             "scales": {"coarse": 2, "fine": 9}},
            {"kind": "interior", "hurst": 0.5, "d": 1, "set": {"type": "full-interval"},
             "drift": {"type": "zero"}, "epsilon_exp": 5, "expect": "interior", "seeds": 3,
             "grid_steps": 1024, "samples": 2048}
        ]
    }"#;

    #[test]
    fn parse_fills_defaults() {
        let cfg = SuiteConfig::from_json(SMALL).unwrap();
        assert_eq!(cfg.threshold, 0.9);
        let Experiment::DimFormula(d) = &cfg.experiments[0] else { panic!() };
        assert_eq!(d.count_mode, CountMode::Envelope);
        assert_eq!(d.scales.trim_octaves, 1.0);
        assert_eq!(d.tolerance, 0.1);
    }

    #[test]
    fn unknown_keys_rejected() {
        let bad = SMALL.replace("\"seed_base\"", "\"seed_bse\"");
        assert!(matches!(SuiteConfig::from_json(&bad), Err(Error::Config(_))));
        let bad = SMALL.replace("\"grid_steps\": 4096", "\"grid_step\": 4096");
        assert!(matches!(SuiteConfig::from_json(&bad), Err(Error::Config(_))));
        let bad = SMALL.replace("\"hurst\": 0.5}]", "\"hurst\": 1.5}]");
        assert!(SuiteConfig::from_json(&bad).is_err());
    }

    #[test]
    fn invalid_values_rejected() {
        let bad = SMALL.replace("\"seeds\": 3,\n             \"scales\"", "\"seeds\": 0,\n             \"scales\"");
        assert!(SuiteConfig::from_json(&bad).is_err());
        let bad = SMALL.replace("\"alpha\": 0.5", "\"alpha\": 0.7");
        assert!(SuiteConfig::from_json(&bad).is_err());
        let bad = SMALL.replace("\"schema_version\": 1", "\"schema_version\": 2");
        assert!(SuiteConfig::from_json(&bad).is_err());
    }

    #[test]
    fn hash_is_stable_and_sensitive() {
        let a = SuiteConfig::from_json(SMALL).unwrap();
        let b = SuiteConfig::from_json(&SMALL.replace("  ", " ")).unwrap();
        assert_eq!(a.hash(), b.hash());
        assert_eq!(a.hash().len(), 64);
        let c = SuiteConfig::from_json(&SMALL.replace("\"seed_base\": 3", "\"seed_base\": 4")).unwrap();
        assert_ne!(a.hash(), c.hash());
    }

    #[test]
    fn suite_rows_are_reproducible() {
        let cfg = SuiteConfig::from_json(SMALL).unwrap();
        let dir = tempfile::tempdir().unwrap();
        let rows = run_suite(&cfg, dir.path()).unwrap();
        assert_eq!(rows.len(), 2);
        assert!(rows.iter().all(|r| r.config_hash == cfg.hash()));
        let first = std::fs::read_to_string(dir.path().join("report.csv")).unwrap();
        run_suite(&cfg, dir.path()).unwrap();
        let second = std::fs::read_to_string(dir.path().join("report.csv")).unwrap();
        assert_eq!(first, second);
        assert!(first.starts_with(REPORT_HEADER));
        assert_eq!(first.lines().count(), 3);
        let echo = std::fs::read_to_string(dir.path().join("config.json")).unwrap();
        assert_eq!(SuiteConfig::from_json(&echo).unwrap(), cfg);
    }

    #[test]
    fn pass_flag_matches_tolerance() {
        let cfg = SuiteConfig::from_json(SMALL).unwrap();
        let ctx = RunContext::new(&cfg);
        for r in collect_rows(&cfg.experiments[0], &ctx).unwrap() {
            let within = (r.estimate - r.theory.unwrap()).abs() <= r.tolerance.unwrap();
            assert!(!r.pass || within);
        }
    }

    #[test]
    fn rows_before_a_failure_stay_on_disk() {
        let text = SMALL.replace(
            "\"experiments\": [",
            r#""experiments": [
            {"kind": "kernel-scaling", "cells": [{"alpha": 0.5, "hurst": 0.9, "gamma": 0.36, "d": 4}], "samples": 2000},
            {"kind": "theorem41", "hurst": 0.5, "alpha": 0.2, "alpha_prime": 0.4, "d": 1,
             "set": {"type": "full-interval"}, "epsilon_exp": 4},"#,
        );
        let cfg = SuiteConfig::from_json(&text).unwrap();
        let dir = tempfile::tempdir().unwrap();
        let err = run_suite(&cfg, dir.path()).unwrap_err();
        assert!(matches!(err, Error::InfeasibleParameters(_)));
        let report = std::fs::read_to_string(dir.path().join("report.csv")).unwrap();
        assert_eq!(report.lines().count(), 2);
        assert!(report.lines().nth(1).unwrap().contains("kernel-scaling"));
    }

    #[test]
    fn theorem41_feasibility() {
        let mut c = Theorem41Config {
            hurst: h(0.8),
            alpha: h(0.5),
            alpha_prime: h(0.6),
            d: 1,
            set: SetSpec::TwoBranchCantor { dim: 0.7, generation: 8 },
            epsilon_exp: 6,
            radius_cells: 2,
            grid_steps: 1024,
            samples: 1024,
            seeds: 1,
        };
        assert!(check_theorem41(&c, 0.7).is_ok());
        c.alpha_prime = h(0.75);
        assert!(matches!(check_theorem41(&c, 0.7), Err(Error::InfeasibleParameters(_))));
        c.alpha_prime = h(0.6);
        assert!(check_theorem41(&c, 0.9).is_err());
    }

    #[test]
    fn csv_line_quotes_json() {
        let cfg = SuiteConfig::from_json(SMALL).unwrap();
        let ctx = RunContext::new(&cfg);
        let row = ctx.row("x", 0, json!({"a": 1, "b": [1, 2]}), None, (None, None), 1.5, None, true, None, 1, json!({}));
        let line = row.to_csv_line();
        let mut r = csv::ReaderBuilder::new().has_headers(false).from_reader(line.as_bytes());
        let rec = r.records().next().unwrap().unwrap();
        assert_eq!(rec.len(), 15);
        assert_eq!(&rec[4], r#"{"a":1,"b":[1,2]}"#);
        assert_eq!(&rec[5], "");
    }

    #[test]
    fn linear_drift_dimension_checked() {
        let grid = TimeGrid::uniform(8).unwrap();
        let d = DriftSpec::Linear { slopes: vec![1.0] };
        assert!(d.values(&grid, 2, 0).is_err());
        assert_eq!(d.values(&grid, 1, 0).unwrap()[0][8], 1.0);
    }
}
