//! Exact finite-dimensional Gaussian computations: conditional variances by
//! Schur complement, covariance determinants and the local nondeterminism
//! ratios for fBm and for the mixed process.

use nalgebra::DMatrix;
use rand::Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::fbm::{fbm_covariance, mixed_covariance, HurstIndex};
use crate::rng::aux_rng;

/// Relative singularity tolerance for conditioning blocks.
pub const CONDITIONING_REL_TOL: f64 = 1e-12;

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "kebab-case")]
pub enum Kernel {
    Fbm { hurst: HurstIndex },
    Mixed { hurst: HurstIndex, alpha_prime: HurstIndex },
}

impl Kernel {
    pub fn covariance(&self, s: f64, t: f64) -> f64 {
        match *self {
            Kernel::Fbm { hurst } => fbm_covariance(s, t, hurst),
            Kernel::Mixed { hurst, alpha_prime } => mixed_covariance(s, t, hurst, alpha_prime),
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct GaussianVectorSpec {
    times: Vec<f64>,
    kernel: Kernel,
    covariance: DMatrix<f64>,
}

impl GaussianVectorSpec {
    pub fn new(times: Vec<f64>, kernel: Kernel) -> Result<Self> {
        if times.is_empty() {
            return Err(Error::InvalidArgument("a Gaussian vector needs at least one time".into()));
        }
        if let Some(t) = times.iter().find(|t| !(**t > 0.0 && **t <= 1.0)) {
            return Err(Error::InvalidArgument(format!("time {t} outside (0,1]")));
        }
        let n = times.len();
        let covariance = DMatrix::from_fn(n, n, |i, j| kernel.covariance(times[i], times[j]));
        Ok(Self { times, kernel, covariance })
    }

    pub fn fbm(times: Vec<f64>, hurst: HurstIndex) -> Result<Self> {
        Self::new(times, Kernel::Fbm { hurst })
    }

    pub fn mixed(times: Vec<f64>, hurst: HurstIndex, alpha_prime: HurstIndex) -> Result<Self> {
        Self::new(times, Kernel::Mixed { hurst, alpha_prime })
    }

    pub fn times(&self) -> &[f64] {
        &self.times
    }

    pub fn kernel(&self) -> Kernel {
        self.kernel
    }

    pub fn covariance(&self) -> &DMatrix<f64> {
        &self.covariance
    }

    pub fn len(&self) -> usize {
        self.times.len()
    }

    pub fn is_empty(&self) -> bool {
        self.times.is_empty()
    }
}

/// `Var(Z_target | Z_given)` by symmetric-pivoted elimination of the given
/// block. Clamped into `[0, Var(Z_target)]`.
pub fn conditional_variance(spec: &GaussianVectorSpec, target: usize, given: &[usize]) -> Result<f64> {
    let n = spec.len();
    if target >= n || given.iter().any(|&g| g >= n) {
        return Err(Error::InvalidArgument("index out of range".into()));
    }
    let k = &spec.covariance;
    let prior = k[(target, target)];
    if given.contains(&target) {
        return Ok(0.0);
    }
    let mut idx: Vec<usize> = given.to_vec();
    idx.sort_unstable();
    idx.dedup();
    if idx.is_empty() {
        return Ok(prior);
    }
    // Working matrix over given ∪ {target}, target last.
    idx.push(target);
    let m = idx.len();
    let mut a: Vec<f64> = Vec::with_capacity(m * m);
    for &i in &idx {
        for &j in &idx {
            a.push(k[(i, j)]);
        }
    }
    let trace: f64 = (0..m - 1).map(|i| a[i * m + i]).sum();
    let tol = CONDITIONING_REL_TOL * trace.abs();
    let mut remaining: Vec<usize> = (0..m - 1).collect();
    while !remaining.is_empty() {
        let (pos, &p) = remaining
            .iter()
            .enumerate()
            .max_by(|x, y| a[x.1 * m + x.1].total_cmp(&a[y.1 * m + y.1]))
            .unwrap();
        let pivot = a[p * m + p];
        if !(pivot > tol) {
            return Err(Error::SingularConditioning { pivot, tolerance: tol });
        }
        remaining.swap_remove(pos);
        let col: Vec<f64> = (0..m).map(|r| a[r * m + p]).collect();
        let rows: Vec<usize> = remaining.iter().copied().chain(std::iter::once(m - 1)).collect();
        for &r in &rows {
            let f = col[r] / pivot;
            for &c in &rows {
                a[r * m + c] -= f * col[c];
            }
        }
    }
    Ok(a[m * m - 1].clamp(0.0, prior))
}

/// Determinant by LU, and `Var(Z_1)·∏ Var(Z_k | Z_1…Z_{k−1})` by conditioning.
pub fn detcov_chain_identity(spec: &GaussianVectorSpec) -> Result<(f64, f64)> {
    let det = spec.covariance.clone().lu().determinant();
    let mut chain = 1.0;
    for k in 0..spec.len() {
        let given: Vec<usize> = (0..k).collect();
        chain *= conditional_variance(spec, k, &given)?;
    }
    Ok((det, chain))
}

/// `detCov / ∏_j min_{0≤i<j} |t_j − t_i|^{2H}` with `t_0 = 0`, times taken in
/// the order given.
pub fn verify_detcov_lower_bound(times: &[f64], hurst: HurstIndex) -> Result<f64> {
    check_distinct(times)?;
    let spec = GaussianVectorSpec::fbm(times.to_vec(), hurst)?;
    let det = spec.covariance.clone().lu().determinant();
    let two_h = 2.0 * hurst.value();
    let mut bound = 1.0;
    for (j, &tj) in times.iter().enumerate() {
        let gap = times[..j].iter().fold(tj, |m, &ti| m.min((tj - ti).abs()));
        bound *= gap.powf(two_h);
    }
    if det <= 0.0 {
        return Err(Error::SingularConditioning { pivot: det, tolerance: 0.0 });
    }
    Ok(det / bound)
}

fn check_distinct(times: &[f64]) -> Result<()> {
    let mut s = times.to_vec();
    s.sort_by(f64::total_cmp);
    if s.windows(2).any(|w| w[0] == w[1]) {
        return Err(Error::InvalidArgument("times must be distinct".into()));
    }
    Ok(())
}

/// `Var(Z(u) | Z(t_1)…Z(t_n)) / (m^{2α′} + m^{2H})` where `m` is the distance
/// from `u` to `{0, t_1, …, t_n}`.
pub fn lnd_margin(hurst: HurstIndex, alpha_prime: HurstIndex, u: f64, conditioning_times: &[f64]) -> Result<f64> {
    if alpha_prime.value() > hurst.value() {
        return Err(Error::AlphaExceedsH { alpha: alpha_prime.value(), hurst: hurst.value() });
    }
    if conditioning_times.contains(&u) {
        return Err(Error::InvalidArgument(format!("u={u} is among the conditioning times")));
    }
    let mut times = conditioning_times.to_vec();
    times.push(u);
    check_distinct(&times)?;
    let spec = GaussianVectorSpec::mixed(times, hurst, alpha_prime)?;
    let n = conditioning_times.len();
    let given: Vec<usize> = (0..n).collect();
    let var = conditional_variance(&spec, n, &given)?;
    let gap = conditioning_times.iter().fold(u, |m, &t| m.min((u - t).abs()));
    let bracket = gap.powf(2.0 * alpha_prime.value()) + gap.powf(2.0 * hurst.value());
    Ok(var / bracket)
}

/// `E(Z(t) − Z(s))² = |t−s|^{2H} + |t−s|^{2α′}`.
pub fn mixed_increment_variance(s: f64, t: f64, hurst: HurstIndex, alpha_prime: HurstIndex) -> Result<f64> {
    if alpha_prime.value() > hurst.value() {
        return Err(Error::AlphaExceedsH { alpha: alpha_prime.value(), hurst: hurst.value() });
    }
    let h = (t - s).abs();
    Ok(h.powf(2.0 * hurst.value()) + h.powf(2.0 * alpha_prime.value()))
}

/// Random draw of `n` distinct times in `[lo, hi]`, unsorted.
fn random_times<R: Rng>(rng: &mut R, n: usize, lo: f64, hi: f64) -> Vec<f64> {
    let mut out: Vec<f64> = Vec::with_capacity(n);
    while out.len() < n {
        let t = rng.random_range(lo..=hi);
        if !out.contains(&t) {
            out.push(t);
        }
    }
    out
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SweepRow {
    pub index: usize,
    pub hurst: f64,
    pub times: Vec<f64>,
    pub value: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SweepSummary {
    pub rows: Vec<SweepRow>,
    pub min_value: f64,
    pub argmin: usize,
    pub singular: usize,
}

impl SweepSummary {
    fn from_rows(rows: Vec<Option<SweepRow>>) -> Self {
        let singular = rows.iter().filter(|r| r.is_none()).count();
        let rows: Vec<SweepRow> = rows.into_iter().flatten().collect();
        let (argmin, min_value) = rows
            .iter()
            .map(|r| (r.index, r.value))
            .fold((0, f64::INFINITY), |a, b| if b.1 < a.1 { b } else { a });
        Self { rows, min_value, argmin, singular }
    }

    pub fn to_csv(&self, config_hash: &str) -> String {
        let mut out = String::from("config_hash,index,hurst,n,times,value\n");
        for r in &self.rows {
            let times: Vec<String> = r.times.iter().map(f64::to_string).collect();
            out.push_str(&format!(
                "{config_hash},{},{},{},{},{}\n",
                r.index,
                r.hurst,
                r.times.len(),
                times.join(" "),
                r.value
            ));
        }
        out
    }
}

/// Determinant margins over `configs` random tuples of `1..=max_n` times in
/// `(0,1]`, with `H` cycled through `hursts`. Singular draws are counted and
/// dropped.
pub fn detcov_sweep(configs: usize, max_n: usize, hursts: &[HurstIndex], sorted: bool, seed: u64) -> Result<SweepSummary> {
    if max_n == 0 || hursts.is_empty() {
        return Err(Error::InvalidArgument("sweep needs max_n ≥ 1 and at least one H".into()));
    }
    let rows: Vec<Option<SweepRow>> = (0..configs)
        .into_par_iter()
        .map(|i| {
            let mut rng = aux_rng(seed, i as u64);
            let n = rng.random_range(1..=max_n);
            let mut times = random_times(&mut rng, n, f64::EPSILON, 1.0);
            if sorted {
                times.sort_by(f64::total_cmp);
            }
            let hurst = hursts[i % hursts.len()];
            verify_detcov_lower_bound(&times, hurst)
                .ok()
                .map(|value| SweepRow { index: i, hurst: hurst.value(), times, value })
        })
        .collect();
    Ok(SweepSummary::from_rows(rows))
}

/// LND ratios for random `u` and `1..=max_n` conditioning times in `[lo, hi]`.
/// When `min_gap` is set, conditioning times are redrawn to lie at distance
/// at least `min_gap` from `u`.
#[allow(clippy::too_many_arguments)]
pub fn lnd_sweep(
    configs: usize,
    max_n: usize,
    hurst: HurstIndex,
    alpha_prime: HurstIndex,
    interval: (f64, f64),
    min_gap: Option<f64>,
    seed: u64,
) -> Result<SweepSummary> {
    let (lo, hi) = interval;
    if !(lo > 0.0 && lo < hi && hi <= 1.0) {
        return Err(Error::InvalidArgument(format!("interval [{lo},{hi}] must lie in (0,1]")));
    }
    if max_n == 0 {
        return Err(Error::InvalidArgument("max_n must be at least 1".into()));
    }
    if let Some(r) = min_gap {
        if !(r > 0.0 && 2.0 * r < hi - lo) {
            return Err(Error::InvalidArgument(format!("gap {r} too large for the interval")));
        }
    }
    let rows: Vec<Option<SweepRow>> = (0..configs)
        .into_par_iter()
        .map(|i| {
            let mut rng = aux_rng(seed, i as u64);
            let n = rng.random_range(1..=max_n);
            let u = rng.random_range(lo..=hi);
            let mut times = Vec::with_capacity(n);
            let mut attempts = 0;
            while times.len() < n && attempts < 1000 {
                attempts += 1;
                let t: f64 = rng.random_range(lo..=hi);
                let far = min_gap.is_none_or(|r| (t - u).abs() >= r);
                if far && t != u && !times.contains(&t) {
                    times.push(t);
                }
            }
            if times.is_empty() {
                return None;
            }
            let value = lnd_margin(hurst, alpha_prime, u, &times).ok()?;
            let mut all = vec![u];
            all.extend(times);
            Some(SweepRow { index: i, hurst: hurst.value(), times: all, value })
        })
        .collect();
    Ok(SweepSummary::from_rows(rows))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn h(v: f64) -> HurstIndex {
        HurstIndex::new(v).unwrap()
    }

    #[test]
    fn conditional_variance_examples() {
        let s = GaussianVectorSpec::fbm(vec![0.5, 1.0], h(0.5)).unwrap();
        assert!((conditional_variance(&s, 1, &[]).unwrap() - 1.0).abs() < 1e-15);
        assert!((conditional_variance(&s, 1, &[0]).unwrap() - 0.5).abs() < 1e-14);
        let s = GaussianVectorSpec::fbm(vec![0.5, 1.0], h(0.25)).unwrap();
        let expect = 1.0 - 0.25 / 0.5f64.sqrt();
        assert!((conditional_variance(&s, 1, &[0]).unwrap() - expect).abs() < 1e-12);
        assert!((expect - 0.64645).abs() < 1e-5);
        let s = GaussianVectorSpec::fbm(vec![0.3], h(0.7)).unwrap();
        assert!((conditional_variance(&s, 0, &[]).unwrap() - 0.3f64.powf(1.4)).abs() < 1e-15);
    }

    #[test]
    fn conditioning_on_self_is_zero() {
        let s = GaussianVectorSpec::fbm(vec![0.5, 1.0], h(0.5)).unwrap();
        assert_eq!(conditional_variance(&s, 1, &[0, 1]).unwrap(), 0.0);
    }

    #[test]
    fn conditioning_is_monotone() {
        let times: Vec<f64> = (1..=8).map(|k| k as f64 / 8.0 - 0.03).collect();
        let s = GaussianVectorSpec::fbm(times, h(0.3)).unwrap();
        let mut last = f64::INFINITY;
        for k in 0..7 {
            let given: Vec<usize> = (0..k).collect();
            let v = conditional_variance(&s, 7, &given).unwrap();
            assert!(v <= last + 1e-14);
            last = v;
        }
    }

    #[test]
    fn singular_given_block() {
        let s = GaussianVectorSpec::fbm(vec![0.5, 0.5, 1.0], h(0.5)).unwrap();
        assert!(matches!(conditional_variance(&s, 2, &[0, 1]), Err(Error::SingularConditioning { .. })));
    }

    #[test]
    fn chain_identity_examples() {
        let s = GaussianVectorSpec::fbm(vec![0.4], h(0.3)).unwrap();
        let (d, c) = detcov_chain_identity(&s).unwrap();
        assert!((d - 0.4f64.powf(0.6)).abs() < 1e-15 && (c - d).abs() < 1e-15);
        let s = GaussianVectorSpec::fbm(vec![0.5, 1.0], h(0.5)).unwrap();
        let (d, c) = detcov_chain_identity(&s).unwrap();
        assert!((d - 0.25).abs() < 1e-14);
        assert!((c - 0.25).abs() < 1e-14);
    }

    #[test]
    fn chain_identity_mixed_kernel() {
        let s = GaussianVectorSpec::mixed(vec![0.2, 0.9, 0.5, 0.7], h(0.7), h(0.4)).unwrap();
        let (d, c) = detcov_chain_identity(&s).unwrap();
        assert!(((d - c) / d).abs() < 1e-10);
    }

    #[test]
    fn detcov_bound_examples() {
        let m = verify_detcov_lower_bound(&[0.5, 1.0], h(0.5)).unwrap();
        assert!((m - 1.0).abs() < 1e-12);
        let m = verify_detcov_lower_bound(&[0.37], h(0.8)).unwrap();
        assert!((m - 1.0).abs() < 1e-12);
        assert!(verify_detcov_lower_bound(&[0.3, 0.3], h(0.5)).is_err());
    }

    #[test]
    fn brownian_sorted_margin_is_one() {
        // Independent increments: the bound is attained for increasing times.
        let m = verify_detcov_lower_bound(&[0.1, 0.35, 0.4, 0.8, 0.95], h(0.5)).unwrap();
        assert!((m - 1.0).abs() < 1e-10);
    }

    #[test]
    fn lnd_examples() {
        let r = lnd_margin(h(0.7), h(0.4), 0.6, &[]).unwrap();
        assert!((r - 1.0).abs() < 1e-14);
        let r = lnd_margin(h(0.6), h(0.3), 0.5, &[0.2, 0.9]).unwrap();
        assert!(r > 0.0);
        assert!(matches!(lnd_margin(h(0.3), h(0.6), 0.5, &[]), Err(Error::AlphaExceedsH { .. })));
        assert!(lnd_margin(h(0.6), h(0.3), 0.5, &[0.5]).is_err());
    }

    #[test]
    fn lnd_equal_indices_reduce_to_fbm() {
        // With α′=H the process is √2·B^H in law.
        let (u, cond) = (0.55, [0.2, 0.4, 0.9]);
        let r = lnd_margin(h(0.5), h(0.5), u, &cond).unwrap();
        let mut times = cond.to_vec();
        times.push(u);
        let s = GaussianVectorSpec::fbm(times, h(0.5)).unwrap();
        let v = conditional_variance(&s, 3, &[0, 1, 2]).unwrap();
        let gap: f64 = 0.15;
        assert!((r - 2.0 * v / (2.0 * gap)).abs() < 1e-12);
    }

    #[test]
    fn increment_variance_examples() {
        assert_eq!(mixed_increment_variance(0.3, 0.3, h(0.6), h(0.3)).unwrap(), 0.0);
        assert!((mixed_increment_variance(0.0, 1.0, h(0.6), h(0.3)).unwrap() - 2.0).abs() < 1e-15);
        let v = mixed_increment_variance(0.2, 0.7, h(0.6), h(0.3)).unwrap();
        assert!((v - 1.09503).abs() < 1e-5);
        assert!(v >= 0.5f64.powf(0.6) && v <= 2.0 * 0.5f64.powf(0.6));
        assert!(mixed_increment_variance(0.2, 0.7, h(0.3), h(0.6)).is_err());
    }

    #[test]
    fn sweeps_are_deterministic() {
        let a = detcov_sweep(200, 5, &[h(0.3), h(0.7)], false, 4).unwrap();
        let b = detcov_sweep(200, 5, &[h(0.3), h(0.7)], false, 4).unwrap();
        assert_eq!(a, b);
        let l = lnd_sweep(200, 6, h(0.6), h(0.3), (0.1, 1.0), None, 4).unwrap();
        assert!(l.min_value > 0.0);
        let csv = l.to_csv("abc");
        assert!(csv.starts_with("config_hash,index"));
    }
}
