//! The parabolic metric `ρ_H`, parabolic boxes, and closed-form dimension
//! formulas and bounds for graphs of Hölder functions and of fBm.
//!
//! These functions are the oracles for the estimators, so they return domain
//! errors instead of clamping their inputs.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::fbm::HurstIndex;

/// A point `(t, x)` of space-time.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SpaceTimePoint {
    pub t: f64,
    pub x: Vec<f64>,
}

impl SpaceTimePoint {
    pub fn new(t: f64, x: Vec<f64>) -> Self {
        Self { t, x }
    }
}

/// `[a, a+δ] × ∏_j [b_j, b_j + δ^H]`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ParabolicBox {
    pub a: f64,
    pub delta: f64,
    pub b: Vec<f64>,
    pub hurst: HurstIndex,
}

impl ParabolicBox {
    pub fn new(a: f64, delta: f64, b: Vec<f64>, hurst: HurstIndex) -> Result<Self> {
        if !(delta > 0.0 && delta <= 1.0) {
            return Err(Error::InvalidArgument(format!("box scale {delta} outside (0,1]")));
        }
        Ok(Self { a, delta, b, hurst })
    }

    pub fn side(&self) -> f64 {
        self.delta.powf(self.hurst.value())
    }

    pub fn contains(&self, p: &SpaceTimePoint) -> bool {
        let side = self.side();
        (self.a..=self.a + self.delta).contains(&p.t)
            && p.x.len() == self.b.len()
            && p.x.iter().zip(&self.b).all(|(x, b)| (*b..=b + side).contains(x))
    }

    /// Diameter in `ρ_H`, which is `δ^H` for every box.
    pub fn rho_diameter(&self) -> f64 {
        self.side()
    }
}

/// `ρ_H((s,x),(t,y)) = max{|s−t|^H, ‖x−y‖_∞}`.
pub fn rho_h(u: &SpaceTimePoint, v: &SpaceTimePoint, hurst: HurstIndex) -> f64 {
    let time = (u.t - v.t).abs().powf(hurst.value());
    u.x.iter().zip(&v.x).fold(time, |m, (a, b)| m.max((a - b).abs()))
}

fn check_dim_a(dim_a: f64) -> Result<()> {
    if (0.0..=1.0).contains(&dim_a) {
        Ok(())
    } else {
        Err(Error::InvalidArgument(format!("dim(A)={dim_a} outside [0,1]")))
    }
}

fn check_space_dim(d: usize) -> Result<()> {
    if d == 0 {
        Err(Error::InvalidArgument("dimension d must be at least 1".into()))
    } else {
        Ok(())
    }
}

/// Parabolic dimension of `Gr_A(B^α)` measured with index `H ≥ α`:
/// `min((H/α)·dim A, dim A + d(H−α))`.
pub fn theoretical_graph_dimension(alpha: HurstIndex, hurst: HurstIndex, dim_a: f64, d: usize) -> Result<f64> {
    let (a, h) = (alpha.value(), hurst.value());
    if a > h {
        return Err(Error::AlphaExceedsH { alpha: a, hurst: h });
    }
    check_dim_a(dim_a)?;
    check_space_dim(d)?;
    Ok(((h / a) * dim_a).min(dim_a + d as f64 * (h - a)))
}

/// Range of `dim_{Ψ,H'}(F)` allowed by the value of `dim_{Ψ,H}(F)`, `H < H'`.
pub fn comparison_bounds(dim_psi_h: f64, hurst: HurstIndex, hurst_prime: HurstIndex, d: usize) -> Result<(f64, f64)> {
    let (h, hp) = (hurst.value(), hurst_prime.value());
    if h >= hp {
        return Err(Error::HOrderViolation { hurst: h, hurst_prime: hp });
    }
    check_space_dim(d)?;
    if !(dim_psi_h >= 0.0) {
        return Err(Error::InvalidArgument(format!("dimension {dim_psi_h} is negative")));
    }
    let ratio = hp / h;
    let lower = dim_psi_h.max(ratio * dim_psi_h + 1.0 - ratio);
    let upper = (ratio * dim_psi_h).min(dim_psi_h + (hp - h) * d as f64);
    Ok((lower, upper))
}

/// Bounds on `dim_{Ψ,H}(Gr_A(f))` for an α-Hölder `f`, `α ≤ H`.
pub fn holder_graph_bounds(alpha: HurstIndex, hurst: HurstIndex, dim_a: f64, d: usize) -> Result<(f64, f64)> {
    let upper = theoretical_graph_dimension(alpha, hurst, dim_a, d)?;
    Ok((dim_a, upper))
}

/// `dim_{Ψ,H} = H · dim_{ρ_H}`.
pub fn psi_dim_from_metric_dim(dim_rho: f64, hurst: HurstIndex) -> Result<f64> {
    if !(dim_rho >= 0.0) {
        return Err(Error::InvalidArgument(format!("dimension {dim_rho} is negative")));
    }
    Ok(hurst.value() * dim_rho)
}

pub fn metric_dim_from_psi_dim(dim_psi: f64, hurst: HurstIndex) -> Result<f64> {
    if !(dim_psi >= 0.0) {
        return Err(Error::InvalidArgument(format!("dimension {dim_psi} is negative")));
    }
    Ok(dim_psi / hurst.value())
}
