//! The four learning codes: Naive, RCM, DQ and NDQ.
//!
//! Every code shares the magnitude stage (estimate `b̂²`, round it to the
//! magnitude codebook) and differs only in how the unit direction
//! `s* = W⁺X/‖W⁺X‖₂` is encoded. The shared pipeline lives in the default
//! methods of [`LearningCode`]; implementations supply the direction coder
//! and, for RCM, a different scale factor. Codes are looked up by name in a
//! [`CodeRegistry`].
//!
//! Payload layout, big-endian bit order:
//! `[magnitude index k−1 : ⌈log₂K⌉ bits][direction payload : direction_bits()]`.
//! The direction payload is a mixed-radix packed index stream for the
//! scalar-quantizer codes and a fixed-width codeword index for RCM.

mod design;
mod embedded;
mod naive;
mod rcm;

use std::collections::BTreeMap;
use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::bounds::{self, BoundParams};
use crate::embeddings::KashinParams;
use crate::error::{Error, Result};
use crate::frames::FrameKind;
use crate::linalg::{dist_sq, norm2};
use crate::quantizers::bits::{BitReader, BitWriter};
use crate::quantizers::MagnitudeCodebook;
use crate::rng::{derive_seed, gaussian_vec, rng_from_seed};

pub use design::DesignMatrix;
pub use embedded::{DemocraticCode, NearDemocraticCode};
pub use naive::NaiveCode;
pub use rcm::{RcmCode, RCM_MAX_BITS};

/// Which of the four schemes a code implements.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum CodeKind {
    Naive,
    Rcm,
    Dq,
    Ndq,
}

impl CodeKind {
    pub const ALL: [CodeKind; 4] = [CodeKind::Naive, CodeKind::Rcm, CodeKind::Dq, CodeKind::Ndq];

    pub fn name(self) -> &'static str {
        match self {
            CodeKind::Naive => "naive",
            CodeKind::Rcm => "rcm",
            CodeKind::Dq => "dq",
            CodeKind::Ndq => "ndq",
        }
    }
}

impl fmt::Display for CodeKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for CodeKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "naive" => Ok(CodeKind::Naive),
            "rcm" => Ok(CodeKind::Rcm),
            "dq" => Ok(CodeKind::Dq),
            "ndq" => Ok(CodeKind::Ndq),
            _ => Err(Error::UnknownCode(s.to_string())),
        }
    }
}

/// Scale factor applied by RCM to its decoded codeword.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RcmScaling {
    /// `√(d b̃⁴ (1−2^{−2B}) / (b̃² + σ²ξ/d))`, the form the risk analysis uses.
    #[default]
    Quartic,
    /// `√(d b̃² (1−2^{−2B}) / (b̃² + σ²ξ/d))`.
    Quadratic,
}

fn default_lambda() -> f64 {
    1.0
}

/// Parameters shared by every code. Seeds are decoder-side shared
/// randomness and are not charged against the bit budget.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CodeConfig {
    #[serde(rename = "B")]
    pub bits: f64,
    pub c: f64,
    pub sigma: f64,
    #[serde(default = "default_lambda")]
    pub lambda: f64,
    /// Frame family for DQ/NDQ; `None` picks the code's default
    /// (orthonormal for DQ, Hadamard for NDQ).
    #[serde(default)]
    pub frame_kind: Option<FrameKind>,
    #[serde(default)]
    pub frame_seed: u64,
    #[serde(default)]
    pub kashin: KashinParams,
    #[serde(default)]
    pub rcm_seed: u64,
    #[serde(default)]
    pub prune_seed: u64,
    #[serde(default)]
    pub rcm_scaling: RcmScaling,
    /// Spacing of the magnitude codebook; `None` means `1/√d`.
    #[serde(default)]
    pub magnitude_step: Option<f64>,
}

impl CodeConfig {
    pub fn new(bits: f64, c: f64, sigma: f64) -> Self {
        CodeConfig {
            bits,
            c,
            sigma,
            lambda: 1.0,
            frame_kind: None,
            frame_seed: 0,
            kashin: KashinParams::default(),
            rcm_seed: 0,
            prune_seed: 0,
            rcm_scaling: RcmScaling::default(),
            magnitude_step: None,
        }
    }

    /// Point every shared-randomness seed at streams derived from `seed`.
    pub fn with_seed(mut self, seed: u64) -> Self {
        self.frame_seed = derive_seed(seed, &[1]);
        self.rcm_seed = derive_seed(seed, &[2]);
        self.prune_seed = derive_seed(seed, &[3]);
        self
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.bits > 0.0) || !self.bits.is_finite() {
            return Err(Error::InvalidBudget(self.bits));
        }
        if !(self.c > 0.0) || !self.c.is_finite() {
            return Err(Error::Config(format!("c must be positive, got {}", self.c)));
        }
        if !(self.sigma >= 0.0) || !self.sigma.is_finite() {
            return Err(Error::Config(format!("sigma must be non-negative, got {}", self.sigma)));
        }
        if !(self.lambda >= 1.0) || !self.lambda.is_finite() {
            return Err(Error::Config(format!("lambda must be >= 1, got {}", self.lambda)));
        }
        self.kashin.validate()
    }
}

/// Encoder output: the bit string plus the sizes of its two fields.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Payload {
    pub bytes: Vec<u8>,
    pub magnitude_bits: u64,
    pub direction_bits: u64,
    /// Set when `W⁺X = 0`; the bits are then all zero and decode to `θ̃ = 0`.
    pub zero_observation: bool,
}

impl Payload {
    pub fn total_bits(&self) -> u64 {
        self.magnitude_bits + self.direction_bits
    }
}

/// Result of running the decoder on a payload.
#[derive(Debug, Clone, PartialEq)]
pub struct Decoded {
    pub theta_tilde: Vec<f64>,
    pub btilde_sq: f64,
    pub scaling: f64,
}

/// Quantized model plus its exact bit cost.
#[derive(Debug, Clone, PartialEq)]
pub struct LearningCodeOutput {
    pub theta_tilde: Vec<f64>,
    pub direction_bits: u64,
    pub magnitude_bits: u64,
    pub total_bits: u64,
    pub btilde_sq: f64,
    pub scaling: f64,
    pub zero_observation: bool,
    pub payload: Payload,
}

/// `b̂² = (1/d)‖W⁺X‖₂² − (σ²/d)ξ`. May be negative under noise.
pub fn estimate_magnitude(x: &[f64], dm: &DesignMatrix, sigma: f64) -> Result<f64> {
    let z = dm.pinv_apply(x)?;
    let d = dm.d() as f64;
    Ok(norm2(&z).powi(2) / d - sigma * sigma * dm.xi() / d)
}

/// `γ′ = √(d b̃⁴ / (b̃² + σ²ξ/d))`, the shrinkage applied to the decoded
/// direction by Naive, DQ and NDQ.
pub fn gamma_prime(btilde_sq: f64, sigma: f64, xi: f64, d: usize) -> f64 {
    let d = d as f64;
    (d * btilde_sq * btilde_sq / (btilde_sq + sigma * sigma * xi / d)).sqrt()
}

/// A learning code: encoder `E` from observations to bits and decoder `D`
/// from bits back to a model, for a fixed dimension `d`.
pub trait LearningCode: Send + Sync {
    fn kind(&self) -> CodeKind;

    fn config(&self) -> &CodeConfig;

    fn dim(&self) -> usize;

    /// Frame aspect ratio `λ = D/d` actually used (1 for codes without a frame).
    fn lambda(&self) -> f64 {
        1.0
    }

    /// Exact size of the direction field.
    fn direction_bits(&self) -> u64;

    /// Append the direction field for the unit vector `direction`.
    fn encode_direction(&self, direction: &[f64], out: &mut BitWriter) -> Result<()>;

    /// Read the direction field and return the decoded direction `X̃`.
    fn decode_direction(&self, input: &mut BitReader<'_>) -> Result<Vec<f64>>;

    /// Scale factor applied to `X̃`.
    fn scaling(&self, btilde_sq: f64, dm: &DesignMatrix) -> f64 {
        gamma_prime(btilde_sq, self.config().sigma, dm.xi(), self.dim())
    }

    fn magnitude_codebook(&self) -> Result<MagnitudeCodebook> {
        let cfg = self.config();
        match cfg.magnitude_step {
            Some(step) => MagnitudeCodebook::with_step(cfg.c, self.dim(), step),
            None => MagnitudeCodebook::new(cfg.c, self.dim()),
        }
    }

    fn encode(&self, x: &[f64], dm: &DesignMatrix) -> Result<Payload> {
        check_design(self.dim(), dm)?;
        let codebook = self.magnitude_codebook()?;
        let magnitude_bits = codebook.index_bits();
        let direction_bits = self.direction_bits();
        let z = dm.pinv_apply(x)?;
        let norm = norm2(&z);
        if norm == 0.0 {
            let total = (magnitude_bits + direction_bits) as usize;
            return Ok(Payload {
                bytes: vec![0; total.div_ceil(8)],
                magnitude_bits,
                direction_bits,
                zero_observation: true,
            });
        }
        let d = self.dim() as f64;
        let sigma = self.config().sigma;
        let bhat_sq = norm * norm / d - sigma * sigma * dm.xi() / d;
        let (k, _) = codebook.quantize(bhat_sq);
        let mut out = BitWriter::new();
        out.push_u64(k - 1, magnitude_bits);
        let direction: Vec<f64> = z.iter().map(|v| v / norm).collect();
        self.encode_direction(&direction, &mut out)?;
        debug_assert_eq!(out.len(), magnitude_bits + direction_bits);
        Ok(Payload { bytes: out.into_bytes(), magnitude_bits, direction_bits, zero_observation: false })
    }

    fn decode(&self, payload: &Payload, dm: &DesignMatrix) -> Result<Decoded> {
        check_design(self.dim(), dm)?;
        if payload.zero_observation {
            return Ok(Decoded { theta_tilde: vec![0.0; self.dim()], btilde_sq: 0.0, scaling: 0.0 });
        }
        let codebook = self.magnitude_codebook()?;
        if payload.magnitude_bits != codebook.index_bits() || payload.direction_bits != self.direction_bits() {
            return Err(Error::Payload(format!(
                "field sizes ({}, {}) do not match this code ({}, {})",
                payload.magnitude_bits,
                payload.direction_bits,
                codebook.index_bits(),
                self.direction_bits()
            )));
        }
        let mut input = BitReader::new(&payload.bytes);
        let k = input.read_u64(payload.magnitude_bits)? + 1;
        let btilde_sq = codebook.level(k)?;
        let direction = self.decode_direction(&mut input)?;
        let scaling = self.scaling(btilde_sq, dm);
        let theta_tilde = direction.iter().map(|v| scaling * v).collect();
        Ok(Decoded { theta_tilde, btilde_sq, scaling })
    }

    /// Encode then decode, reporting the model together with its bit cost.
    fn quantize(&self, x: &[f64], dm: &DesignMatrix) -> Result<LearningCodeOutput> {
        let payload = self.encode(x, dm)?;
        let decoded = self.decode(&payload, dm)?;
        Ok(LearningCodeOutput {
            theta_tilde: decoded.theta_tilde,
            direction_bits: payload.direction_bits,
            magnitude_bits: payload.magnitude_bits,
            total_bits: payload.total_bits(),
            btilde_sq: decoded.btilde_sq,
            scaling: decoded.scaling,
            zero_observation: payload.zero_observation,
            payload,
        })
    }

    /// Worst-case risk guarantee of this code on `dm`, without the
    /// `O(1/√d)` slack term.
    fn upper_bound(&self, dm: &DesignMatrix) -> Result<f64> {
        let cfg = self.config();
        let params = BoundParams::new(cfg.bits, cfg.sigma, cfg.c, dm.sigma_min(), dm.sigma_max())
            .with_d(self.dim())
            .with_lambda(self.lambda())
            .with_k_upper(cfg.kashin.k_upper());
        bounds::upper_bound(self.kind(), &params)
    }
}

fn check_design(d: usize, dm: &DesignMatrix) -> Result<()> {
    if dm.d() != d {
        return Err(Error::DimensionMismatch { expected: d, actual: dm.d() });
    }
    Ok(())
}

/// Builds a code for dimension `d` from a configuration.
pub type CodeFactory = fn(&CodeConfig, usize) -> Result<Box<dyn LearningCode>>;

/// Name → constructor table for learning codes.
#[derive(Clone)]
pub struct CodeRegistry {
    factories: BTreeMap<String, CodeFactory>,
}

impl Default for CodeRegistry {
    fn default() -> Self {
        Self::with_builtin()
    }
}

impl CodeRegistry {
    pub fn empty() -> Self {
        CodeRegistry { factories: BTreeMap::new() }
    }

    /// `naive`, `rcm`, `dq`, `ndq`, and `ndq-orthonormal` (NDQ forced onto
    /// a random orthonormal frame).
    pub fn with_builtin() -> Self {
        let mut reg = Self::empty();
        reg.register("naive", |cfg, d| Ok(Box::new(NaiveCode::new(cfg.clone(), d)?)));
        reg.register("rcm", |cfg, d| Ok(Box::new(RcmCode::new(cfg.clone(), d)?)));
        reg.register("dq", |cfg, d| Ok(Box::new(DemocraticCode::new(cfg.clone(), d)?)));
        reg.register("ndq", |cfg, d| Ok(Box::new(NearDemocraticCode::new(cfg.clone(), d)?)));
        reg.register("ndq-orthonormal", |cfg, d| {
            let mut cfg = cfg.clone();
            cfg.frame_kind = Some(FrameKind::RandomOrthonormal);
            Ok(Box::new(NearDemocraticCode::new(cfg, d)?))
        });
        reg
    }

    pub fn register(&mut self, name: &str, factory: CodeFactory) {
        self.factories.insert(name.to_ascii_lowercase(), factory);
    }

    pub fn names(&self) -> impl Iterator<Item = &str> {
        self.factories.keys().map(String::as_str)
    }

    pub fn build(&self, name: &str, cfg: &CodeConfig, d: usize) -> Result<Box<dyn LearningCode>> {
        let factory = self
            .factories
            .get(&name.to_ascii_lowercase())
            .ok_or_else(|| Error::UnknownCode(name.to_string()))?;
        factory(cfg, d)
    }
}

/// Build one of the built-in codes by name.
pub fn build_code(name: &str, cfg: &CodeConfig, d: usize) -> Result<Box<dyn LearningCode>> {
    CodeRegistry::with_builtin().build(name, cfg, d)
}

/// Monte-Carlo mean and sample standard deviation of a per-trial loss.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RiskEstimate {
    pub mean: f64,
    pub std: f64,
}

impl RiskEstimate {
    pub fn from_samples(samples: &[f64]) -> Self {
        let n = samples.len() as f64;
        let mean = samples.iter().sum::<f64>() / n;
        let std = if samples.len() > 1 {
            (samples.iter().map(|s| (s - mean).powi(2)).sum::<f64>() / (n - 1.0)).sqrt()
        } else {
            0.0
        };
        RiskEstimate { mean, std }
    }
}

/// Monte-Carlo estimate of `E[(1/d)‖θ̃ − θ‖₂²]` with fresh noise
/// `v ~ N(0, σ²I)` drawn from `(seed, trial)` for each trial.
pub fn code_risk(
    code: &dyn LearningCode,
    dm: &DesignMatrix,
    theta: &[f64],
    n_trials: usize,
    seed: u64,
) -> Result<RiskEstimate> {
    if n_trials == 0 {
        return Err(Error::Config("n_trials must be positive".into()));
    }
    let d = dm.d();
    if theta.len() != d {
        return Err(Error::DimensionMismatch { expected: d, actual: theta.len() });
    }
    let clean = dm.apply(theta)?;
    let sigma = code.config().sigma;
    let losses = (0..n_trials as u64)
        .map(|trial| {
            let mut rng = rng_from_seed(derive_seed(seed, &[trial]));
            let x: Vec<f64> = if sigma > 0.0 {
                let noise = gaussian_vec(&mut rng, clean.len());
                clean.iter().zip(&noise).map(|(c, v)| c + sigma * v).collect()
            } else {
                clean.clone()
            };
            let out = code.quantize(&x, dm)?;
            Ok(dist_sq(&out.theta_tilde, theta) / d as f64)
        })
        .collect::<Result<Vec<f64>>>()?;
    Ok(RiskEstimate::from_samples(&losses))
}
