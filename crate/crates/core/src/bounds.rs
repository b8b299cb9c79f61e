//! Closed-form risk bounds and bit-budget thresholds.
//!
//! Thresholds written as `Ω(log …)` are returned at their equality point,
//! i.e. with the hidden constant set to one, and clamped at zero. Every
//! logarithm inside a bound is natural; every `log` that counts bits is
//! base two.

use serde::{Deserialize, Serialize};

use crate::codes::CodeKind;
use crate::error::{Error, Result};

/// Inputs of the bound formulas. `bits` may be `f64::INFINITY` for the
/// infinite-budget limit. `lambda`, `k_upper` and `d` are only needed by
/// some codes.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BoundParams {
    pub bits: f64,
    pub sigma: f64,
    pub c: f64,
    pub sigma_min: f64,
    pub sigma_max: f64,
    pub lambda: Option<f64>,
    pub k_upper: Option<f64>,
    pub d: Option<usize>,
}

impl BoundParams {
    pub fn new(bits: f64, sigma: f64, c: f64, sigma_min: f64, sigma_max: f64) -> Self {
        BoundParams { bits, sigma, c, sigma_min, sigma_max, lambda: None, k_upper: None, d: None }
    }

    pub fn with_lambda(mut self, lambda: f64) -> Self {
        self.lambda = Some(lambda);
        self
    }

    pub fn with_k_upper(mut self, k_upper: f64) -> Self {
        self.k_upper = Some(k_upper);
        self
    }

    pub fn with_d(mut self, d: usize) -> Self {
        self.d = Some(d);
        self
    }

    /// Signal-to-noise ratio `ω² = c²/σ²`.
    pub fn omega_sq(&self) -> f64 {
        self.c * self.c / (self.sigma * self.sigma)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.bits > 0.0) {
            return Err(Error::InvalidBudget(self.bits));
        }
        let positive = |name: &str, v: f64| {
            if v > 0.0 && v.is_finite() {
                Ok(())
            } else {
                Err(Error::Config(format!("{name} must be positive, got {v}")))
            }
        };
        if !(self.sigma >= 0.0) || !self.sigma.is_finite() {
            return Err(Error::Config(format!("sigma must be non-negative, got {}", self.sigma)));
        }
        positive("c", self.c)?;
        positive("sigma_min", self.sigma_min)?;
        positive("sigma_max", self.sigma_max)?;
        if self.sigma_min > self.sigma_max {
            return Err(Error::Config(format!(
                "sigma_min {} exceeds sigma_max {}",
                self.sigma_min, self.sigma_max
            )));
        }
        if let Some(l) = self.lambda {
            if !(l >= 1.0) {
                return Err(Error::Config(format!("lambda must be >= 1, got {l}")));
            }
        }
        Ok(())
    }

    fn quantization_factor(&self, exponent_scale: f64) -> f64 {
        (-2.0 * self.bits / exponent_scale).exp2()
    }
}

/// `c²σ_a²`-style ratio `c^{2p} s² / (σ² + c² s²)` used by every bound.
fn ratio(c_sq: f64, sigma: f64, s: f64, numerator: f64) -> f64 {
    numerator / (sigma * sigma + c_sq * s * s)
}

/// Asymptotic minimax lower bound
/// `c²σ²/(σ² + c²σ_M²) + c⁴σ_m²/(σ² + c²σ_m²) · 2^{−2B}`.
pub fn minimax_lower_bound(p: &BoundParams) -> Result<f64> {
    p.validate()?;
    let c_sq = p.c * p.c;
    let estimation = ratio(c_sq, p.sigma, p.sigma_max, c_sq * p.sigma * p.sigma);
    let quantization = ratio(c_sq, p.sigma, p.sigma_min, c_sq * c_sq * p.sigma_min * p.sigma_min);
    Ok(estimation + quantization * p.quantization_factor(1.0))
}

/// Non-asymptotic lower bound at dimension `d`, maximized over a grid of
/// prior shrink factors `δ`. The Gaussian prior `N(0, c²δ²I)` is a proxy
/// for radius `cδ`, so the asymptotic bound is evaluated at `c → cδ`; the
/// prior's mass outside the ball costs
/// `2√2·exp(−d(1−δ²)²/(16δ⁴)) + 2c²·exp(−d(1−δ²)²/(8δ⁴))`.
pub fn finite_d_lower_bound(p: &BoundParams, delta_grid: &[f64]) -> Result<f64> {
    p.validate()?;
    let d = p.d.ok_or(Error::MissingParameter("d"))? as f64;
    if delta_grid.is_empty() {
        return Err(Error::EmptyGrid);
    }
    let mut best = f64::NEG_INFINITY;
    for &delta in delta_grid {
        if !(delta > 0.0 && delta < 1.0) {
            return Err(Error::Config(format!("delta must lie in (0, 1), got {delta}")));
        }
        let shrunk = BoundParams { c: p.c * delta, ..*p };
        let gap = (1.0 - delta * delta).powi(2) / delta.powi(4);
        let penalty = 2.0 * std::f64::consts::SQRT_2 * (-d * gap / 16.0).exp()
            + 2.0 * p.c * p.c * (-d * gap / 8.0).exp();
        best = best.max(minimax_lower_bound(&shrunk)? - penalty);
    }
    Ok(best.max(0.0))
}

fn require<T>(value: Option<T>, name: &'static str) -> Result<T> {
    value.ok_or(Error::MissingParameter(name))
}

/// High-probability risk guarantee of a code with its `O(1/√d)` slack term
/// dropped. DQ needs `k_upper` and `lambda`; NDQ needs `lambda` and `d`;
/// Naive needs `d`.
pub fn upper_bound(kind: CodeKind, p: &BoundParams) -> Result<f64> {
    p.validate()?;
    let c_sq = p.c * p.c;
    let s2 = p.sigma * p.sigma;
    let estimation = ratio(c_sq, p.sigma, p.sigma_min, c_sq * s2);
    let tail = ratio(c_sq, p.sigma, p.sigma_max, c_sq * c_sq * p.sigma_max * p.sigma_max);
    Ok(match kind {
        CodeKind::Naive => {
            let d = require(p.d, "d")? as f64;
            2.0 * estimation + 2.0 * d * tail * p.quantization_factor(1.0)
        }
        CodeKind::Rcm => estimation + tail * p.quantization_factor(1.0),
        CodeKind::Dq => {
            let k = require(p.k_upper, "k_upper")?;
            let lambda = require(p.lambda, "lambda")?;
            2.0 * estimation + 16.0 * k * k * tail * p.quantization_factor(lambda)
        }
        CodeKind::Ndq => {
            let lambda = require(p.lambda, "lambda")?;
            let d = require(p.d, "d")? as f64;
            2.0 * estimation + 64.0 * (2.0 * lambda * d).ln() * tail * p.quantization_factor(lambda)
        }
    })
}

/// `(1 + ω²σ_M²)/(1 + ω²σ_m²)`, the conditioning ratio in every threshold.
fn conditioning(p: &BoundParams) -> f64 {
    let w = p.omega_sq();
    (1.0 + w * p.sigma_max * p.sigma_max) / (1.0 + w * p.sigma_min * p.sigma_min)
}

fn half_log2_clamped(argument: f64) -> f64 {
    (0.5 * argument.log2()).max(0.0)
}

/// Budget `½log₂(ω²σ_m²(1 + ω²σ_M²)/(1 + ω²σ_m²))` below which quantization
/// dominates the minimax risk; clamped at zero.
pub fn threshold_budget(p: &BoundParams) -> Result<f64> {
    p.validate()?;
    let w = p.omega_sq();
    Ok(half_log2_clamped(w * p.sigma_min * p.sigma_min * conditioning(p)))
}

/// Budget above which a code's guarantee is within slack `k` of the
/// unquantized risk: `½log₂(a·(k − r)⁻¹)` with `r` the conditioning ratio
/// and `a` equal to `dω²σ_M²` (Naive), `ω²σ_M²` (RCM), `8K_u²ω²σ_M²` (DQ)
/// or `32ω²σ_M² ln(2λd)` (NDQ).
pub fn code_threshold_budget(kind: CodeKind, p: &BoundParams, k: f64) -> Result<f64> {
    p.validate()?;
    let r = conditioning(p);
    if !(k > r) {
        return Err(Error::InvalidSlackConstant { k, min: r });
    }
    let base = p.omega_sq() * p.sigma_max * p.sigma_max;
    let scale = match kind {
        CodeKind::Naive => require(p.d, "d")? as f64,
        CodeKind::Rcm => 1.0,
        CodeKind::Dq => {
            let ku = require(p.k_upper, "k_upper")?;
            8.0 * ku * ku
        }
        CodeKind::Ndq => {
            let lambda = require(p.lambda, "lambda")?;
            32.0 * (2.0 * lambda * require(p.d, "d")? as f64).ln()
        }
    };
    Ok(half_log2_clamped(scale * base / (k - r)))
}

/// Bits per parameter sufficient for output error `ε` on a two-layer network
/// with `m` hidden units and input dimension `d`:
/// `log₂(4/ε) + ½log₂m + ½log₂log₂(md)`.
pub fn nn_bit_budget(eps: f64, m: usize, d: usize) -> Result<f64> {
    if !(eps > 0.0) {
        return Err(Error::InvalidScale(format!("epsilon must be positive, got {eps}")));
    }
    let md = m as f64 * d as f64;
    if md < 2.0 {
        return Err(Error::InvalidScale(format!("m*d = {md} must be at least 2")));
    }
    Ok((4.0 / eps).log2() + 0.5 * (m as f64).log2() + 0.5 * md.log2().log2())
}
