//! Democratic (ℓ∞-minimal) and near-democratic (ℓ2-minimal) embeddings of a
//! vector `y ∈ R^d` with respect to a Parseval frame `S`, i.e. solutions `x`
//! of `S x = y` that spread the energy of `y` evenly over `D` coordinates.

mod simplex;

pub use simplex::{minimize as lp_minimize, LpSolution};

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::frames::Frame;
use crate::linalg::{norm2, norm_inf};

/// Largest `d` accepted by [`democratic_embed_exact`].
pub const EXACT_MAX_D: usize = 16;
/// Largest `D` accepted by [`democratic_embed_exact`].
pub const EXACT_MAX_BIG_D: usize = 32;

/// Uncertainty-principle parameters of a frame and the derived Kashin
/// constants, plus the iteration controls of the democratic solver.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct KashinParams {
    pub eta: f64,
    pub delta: f64,
    pub max_iters: usize,
    /// Termination threshold on `‖y − Sx‖₂`, relative to `‖y‖₂`.
    pub residual_tol: f64,
    /// Doublings of the exponent `p` in the ℓp refinement stage (0 disables it).
    #[serde(default = "default_refine_powers")]
    pub refine_powers: usize,
    /// Newton iterations per exponent in the refinement stage.
    #[serde(default = "default_refine_newton")]
    pub refine_newton: usize,
}

fn default_refine_powers() -> usize {
    10
}

fn default_refine_newton() -> usize {
    30
}

impl Default for KashinParams {
    fn default() -> Self {
        KashinParams {
            eta: 0.75,
            delta: 0.25,
            max_iters: 64,
            residual_tol: 1e-9,
            refine_powers: default_refine_powers(),
            refine_newton: default_refine_newton(),
        }
    }
}

impl KashinParams {
    pub fn new(eta: f64, delta: f64) -> Result<Self> {
        let p = KashinParams { eta, delta, ..Default::default() };
        p.validate()?;
        Ok(p)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.eta > 0.0 && self.eta < 1.0) || !(self.delta > 0.0 && self.delta < 1.0) {
            return Err(Error::Config(format!(
                "Kashin parameters need eta, delta in (0, 1), got eta = {}, delta = {}",
                self.eta, self.delta
            )));
        }
        if self.max_iters == 0 || !(self.residual_tol > 0.0) {
            return Err(Error::Config("max_iters and residual_tol must be positive".into()));
        }
        Ok(())
    }

    /// Upper Kashin constant `η / ((1 − η)·√δ)` of a Parseval frame.
    pub fn k_upper(&self) -> f64 {
        self.eta / ((1.0 - self.eta) * self.delta.sqrt())
    }

    /// Lower Kashin constant; `1` for Parseval frames.
    pub fn k_lower(&self) -> f64 {
        1.0
    }
}

/// Minimum-ℓ2 solution of `S x = y`; for a Parseval frame this is `Sᵀ y`.
pub fn near_democratic_embed(frame: &Frame, y: &[f64]) -> Result<Vec<f64>> {
    frame.adjoint(y)
}

/// Approximate minimum-ℓ∞ solution of `S x = y` by truncated descent.
///
/// Starting from `x = 0`, each step adds the coordinatewise clip of `Sᵀr` at
/// level `L` to `x` and removes its image from the residual `r`; the level
/// starts at `‖y‖₂/√(δD)` and shrinks by `η` per step. Under the uncertainty
/// principle with `(η, δ)` the residual contracts by `η` per step and
/// `‖x‖∞ ≤ ‖y‖₂ / ((1 − η)√(δD))`.
///
/// The descent point is then tightened by minimizing `Σ|xᵢ|^p` over
/// `{S x = y}` with equality-constrained Newton steps, doubling `p` from 4
/// (`‖x‖_p` approaches `‖x‖∞` within a factor `D^(1/p)`). The point with the
/// smallest `‖x‖∞` seen is returned; each iterate is re-projected onto the
/// affine set, so feasibility is kept.
pub fn democratic_embed(frame: &Frame, y: &[f64], params: &KashinParams) -> Result<Vec<f64>> {
    params.validate()?;
    if y.len() != frame.d() {
        return Err(Error::DimensionMismatch { expected: frame.d(), actual: y.len() });
    }
    let big_d = frame.big_d();
    let y_norm = norm2(y);
    let mut x = vec![0.0; big_d];
    if y_norm == 0.0 {
        return Ok(x);
    }
    let tol = params.residual_tol * y_norm;
    let mut r = y.to_vec();
    let mut level = y_norm / (params.delta * big_d as f64).sqrt();
    let mut residual = y_norm;
    for _ in 0..params.max_iters {
        if residual <= tol {
            break;
        }
        let mut a = frame.adjoint(&r)?;
        a.iter_mut().for_each(|v| *v = v.clamp(-level, level));
        let sa = frame.apply(&a)?;
        x.iter_mut().zip(&a).for_each(|(xi, ai)| *xi += ai);
        r.iter_mut().zip(&sa).for_each(|(ri, si)| *ri -= si);
        residual = norm2(&r);
        level *= params.eta;
    }
    if residual > tol {
        return Err(Error::NoConvergence { residual, iters: params.max_iters });
    }
    refine_lp_norm(frame, y, x, params)
}

fn refine_lp_norm(frame: &Frame, y: &[f64], start: Vec<f64>, params: &KashinParams) -> Result<Vec<f64>> {
    if params.refine_powers == 0 {
        return Ok(start);
    }
    let s = frame.to_dense();
    let (d, big_d) = s.shape();
    let project_affine = |z: &mut [f64]| -> Result<()> {
        let sz = frame.apply(z)?;
        let r: Vec<f64> = sz.iter().zip(y).map(|(a, b)| a - b).collect();
        let corr = frame.adjoint(&r)?;
        z.iter_mut().zip(&corr).for_each(|(zi, ci)| *zi -= ci);
        Ok(())
    };
    let mut best_norm = norm_inf(&start);
    let mut best = start.clone();
    let mut x = start;
    let mut p = 4.0f64;
    for _ in 0..params.refine_powers {
        for _ in 0..params.refine_newton {
            let scale = norm_inf(&x);
            if scale == 0.0 {
                return Ok(x);
            }
            let u: Vec<f64> = x.iter().map(|v| v / scale).collect();
            // Objective Σ|u|^p / p: gradient and diagonal Hessian.
            let grad: Vec<f64> = u.iter().map(|v| v.signum() * v.abs().powf(p - 1.0)).collect();
            let floor = (p - 1.0) * 1e-12;
            let hinv: Vec<f64> =
                u.iter().map(|v| 1.0 / ((p - 1.0) * v.abs().powf(p - 2.0)).max(floor)).collect();
            // Reduced KKT system (S H⁻¹ Sᵀ) ν = −S H⁻¹ g.
            let mut m = DMatrix::zeros(d, d);
            let mut rhs = nalgebra::DVector::zeros(d);
            for i in 0..d {
                for k in 0..big_d {
                    rhs[i] -= s[(i, k)] * hinv[k] * grad[k];
                }
                for j in i..d {
                    let v: f64 = (0..big_d).map(|k| s[(i, k)] * hinv[k] * s[(j, k)]).sum();
                    m[(i, j)] = v;
                    m[(j, i)] = v;
                }
            }
            let Some(nu) = m.cholesky().map(|c| c.solve(&rhs)) else { break };
            let mut step = vec![0.0; big_d];
            for k in 0..big_d {
                let stn: f64 = (0..d).map(|i| s[(i, k)] * nu[i]).sum();
                step[k] = -hinv[k] * (grad[k] + stn);
            }
            let slope: f64 = grad.iter().zip(&step).map(|(g, st)| g * st).sum();
            let f0: f64 = u.iter().map(|v| v.abs().powf(p)).sum::<f64>() / p;
            if -slope <= 1e-14 * f0.max(f64::MIN_POSITIVE) {
                break;
            }
            let mut t = 1.0;
            let mut moved = false;
            for _ in 0..50 {
                let f1: f64 =
                    u.iter().zip(&step).map(|(v, st)| (v + t * st).abs().powf(p)).sum::<f64>() / p;
                if f1 <= f0 + 0.25 * t * slope {
                    moved = true;
                    break;
                }
                t *= 0.5;
            }
            if !moved {
                break;
            }
            x.iter_mut()
                .zip(u.iter().zip(&step))
                .for_each(|(xi, (ui, st))| *xi = scale * (ui + t * st));
            project_affine(&mut x)?;
            let n = norm_inf(&x);
            if n < best_norm {
                best_norm = n;
                best.copy_from_slice(&x);
            }
        }
        p *= 2.0;
    }
    Ok(best)
}

/// Exact minimum-ℓ∞ solution of `S x = y` via the epigraph linear program
/// `min t  s.t.  S x = y,  −t ≤ xᵢ ≤ t`, for small instances only.
///
/// The program is posed in equality form over `z = x + t·1 ≥ 0`, slacks
/// `s = 2t − z ≥ 0` and `t ≥ 0`.
pub fn democratic_embed_exact(frame: &Frame, y: &[f64]) -> Result<Vec<f64>> {
    let (d, big_d) = (frame.d(), frame.big_d());
    if d > EXACT_MAX_D || big_d > EXACT_MAX_BIG_D {
        return Err(Error::ScaleTooLarge(format!(
            "exact democratic embedding supports d <= {EXACT_MAX_D}, D <= {EXACT_MAX_BIG_D}; got d = {d}, D = {big_d}"
        )));
    }
    if y.len() != d {
        return Err(Error::DimensionMismatch { expected: d, actual: y.len() });
    }
    linf_min_exact(&frame.to_dense(), y)
}

/// Minimum-ℓ∞ solution of `S x = y` for an arbitrary full-row-rank `S`.
pub fn linf_min_exact(s: &DMatrix<f64>, y: &[f64]) -> Result<Vec<f64>> {
    let (d, big_d) = s.shape();
    let nvars = 2 * big_d + 1;
    let t_col = 2 * big_d;
    let mut a = DMatrix::zeros(d + big_d, nvars);
    let mut b = vec![0.0; d + big_d];
    for i in 0..d {
        let mut row_sum = 0.0;
        for j in 0..big_d {
            a[(i, j)] = s[(i, j)];
            row_sum += s[(i, j)];
        }
        a[(i, t_col)] = -row_sum;
        b[i] = y[i];
    }
    for j in 0..big_d {
        a[(d + j, j)] = 1.0;
        a[(d + j, big_d + j)] = 1.0;
        a[(d + j, t_col)] = -2.0;
    }
    let mut c = vec![0.0; nvars];
    c[t_col] = 1.0;
    let sol = simplex::minimize(&c, &a, &b)?;
    let t = sol.x[t_col];
    Ok((0..big_d).map(|j| sol.x[j] - t).collect())
}

/// `‖x‖∞`, exposed for callers comparing embeddings.
pub fn dynamic_range(x: &[f64]) -> f64 {
    norm_inf(x)
}
