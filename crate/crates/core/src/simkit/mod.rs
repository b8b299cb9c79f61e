//! Problem generators and the seeded Monte-Carlo experiment runner.
//!
//! Seeding: the design matrix comes from `(master, "design")`; trial `t`
//! draws `θ` and the noise from `(master, "theta"/"noise", t)`, shared by
//! every code and budget so that comparisons between them are paired; a
//! code's own randomness (frame, codebook, prune mask) comes from
//! `(master, code, B, t)`. No stream depends on the order of `B_grid` or
//! `codes`.

mod report;

use nalgebra::{DMatrix, DVector};
use rayon::prelude::*;
use rand_distr::{Distribution, StandardNormal, StudentT};
use serde::{Deserialize, Serialize};

use crate::bounds::{minimax_lower_bound, BoundParams};
use crate::codes::{CodeConfig, CodeRegistry, DesignMatrix, RcmScaling, RiskEstimate, RCM_MAX_BITS};
use crate::error::{Error, Result};
use crate::frames::FrameKind;
use crate::linalg::{dist_sq, norm2};
use crate::rng::{derive_seed, gaussian_vec, rng_from_seed, tag};

pub use report::{emit_csv, emit_svg, parse_csv, write_csv, write_svg, CSV_HEADER};

/// Smallest singular value allowed after perturbing the spectrum.
pub const SINGULAR_FLOOR: f64 = 0.1;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", tag = "kind")]
pub enum WKind {
    Identity,
    /// `U Σ̃ Vᵀ` from the SVD of a Gaussian matrix with
    /// `Σ̃ᵢᵢ = max(sᵢ + N(0, pert_std²), 0.1)`, where `sᵢ` is the Gaussian
    /// spectrum, or 1 when `unit_spectrum` is set.
    PerturbedOrthonormal {
        pert_std: f64,
        #[serde(default)]
        unit_spectrum: bool,
    },
    Gaussian,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ThetaDist {
    GaussianNormalized,
    StudentT1,
    GaussianCubed,
}

fn default_lambda() -> f64 {
    1.0
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExperimentConfig {
    pub n: usize,
    pub d: usize,
    pub c: f64,
    pub sigma: f64,
    #[serde(rename = "W_kind", alias = "w_kind")]
    pub w_kind: WKind,
    pub theta_dist: ThetaDist,
    #[serde(rename = "B_grid", alias = "b_grid")]
    pub b_grid: Vec<f64>,
    /// Registry names, e.g. `"ndq"` or `"ndq-orthonormal"`.
    pub codes: Vec<String>,
    pub n_trials: usize,
    #[serde(default)]
    pub master_seed: u64,
    #[serde(default)]
    pub frame_kind: Option<FrameKind>,
    #[serde(default = "default_lambda")]
    pub lambda: f64,
    /// Draw `θ` once per experiment instead of once per trial.
    #[serde(default)]
    pub fixed_theta: bool,
    #[serde(default)]
    pub rcm_scaling: RcmScaling,
}

impl ExperimentConfig {
    /// The desk-scale setting of the identity-design experiment:
    /// `n = d = 128`, `c = σ = 1`, normalized Gaussian `θ`, 50 trials.
    pub fn identity_baseline(codes: &[&str], b_grid: &[f64], master_seed: u64) -> Self {
        ExperimentConfig {
            n: 128,
            d: 128,
            c: 1.0,
            sigma: 1.0,
            w_kind: WKind::Identity,
            theta_dist: ThetaDist::GaussianNormalized,
            b_grid: b_grid.to_vec(),
            codes: codes.iter().map(|s| s.to_string()).collect(),
            n_trials: 50,
            master_seed,
            frame_kind: None,
            lambda: 1.0,
            fixed_theta: false,
            rcm_scaling: RcmScaling::default(),
        }
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let cfg: Self = serde_json::from_str(text).map_err(|e| Error::Config(e.to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn validate(&self) -> Result<()> {
        let fail = |msg: String| Err(Error::Config(msg));
        if self.d == 0 || self.n < self.d {
            return fail(format!("need n >= d >= 1, got n = {}, d = {}", self.n, self.d));
        }
        if matches!(self.w_kind, WKind::Identity) && self.n != self.d {
            return fail(format!("identity design needs n = d, got n = {}, d = {}", self.n, self.d));
        }
        if let WKind::PerturbedOrthonormal { pert_std, .. } = self.w_kind {
            if !(pert_std >= 0.0) {
                return fail(format!("pert_std must be non-negative, got {pert_std}"));
            }
        }
        if !(self.c > 0.0) || !(self.sigma >= 0.0) {
            return fail(format!("need c > 0 and sigma >= 0, got c = {}, sigma = {}", self.c, self.sigma));
        }
        if self.n_trials == 0 {
            return fail("n_trials must be at least 1".into());
        }
        if self.b_grid.is_empty() {
            return fail("B_grid is empty".into());
        }
        if self.b_grid.iter().any(|b| !(*b > 0.0) || !b.is_finite()) {
            return fail(format!("B_grid entries must be positive, got {:?}", self.b_grid));
        }
        if self.b_grid.windows(2).any(|w| w[0] >= w[1]) {
            return fail(format!("B_grid must be strictly increasing, got {:?}", self.b_grid));
        }
        if self.codes.is_empty() {
            return fail("no codes requested".into());
        }
        let registry = CodeRegistry::with_builtin();
        for name in &self.codes {
            if !registry.names().any(|n| n == name.to_ascii_lowercase()) {
                return fail(format!("unknown code `{name}`; known: {}", registry.names().collect::<Vec<_>>().join(", ")));
            }
            let worst = self.d as f64 * self.b_grid[self.b_grid.len() - 1];
            if name.eq_ignore_ascii_case("rcm") && worst > RCM_MAX_BITS {
                return fail(format!("rcm needs d*B <= {RCM_MAX_BITS} on the whole grid, got {worst}"));
            }
        }
        if !(self.lambda >= 1.0) {
            return fail(format!("lambda must be >= 1, got {}", self.lambda));
        }
        Ok(())
    }

    fn code_config(&self, bits: f64, seed: u64) -> CodeConfig {
        let mut cfg = CodeConfig::new(bits, self.c, self.sigma).with_seed(seed);
        cfg.lambda = self.lambda;
        cfg.frame_kind = self.frame_kind;
        cfg.rcm_scaling = self.rcm_scaling;
        cfg
    }
}

pub fn gen_design_matrix(kind: WKind, n: usize, d: usize, seed: u64) -> Result<DesignMatrix> {
    if d == 0 || n < d {
        return Err(Error::InvalidDimensions(format!("need n >= d >= 1, got n = {n}, d = {d}")));
    }
    let mut rng = rng_from_seed(seed);
    match kind {
        WKind::Identity => {
            if n != d {
                return Err(Error::InvalidDimensions(format!("identity design needs n = d, got {n} x {d}")));
            }
            DesignMatrix::identity(d)
        }
        WKind::Gaussian => DesignMatrix::from_matrix(DMatrix::from_vec(n, d, gaussian_vec(&mut rng, n * d))),
        WKind::PerturbedOrthonormal { pert_std, unit_spectrum } => {
            let g = DMatrix::from_vec(n, d, gaussian_vec(&mut rng, n * d));
            let svd = g.svd(true, true);
            let noise = gaussian_vec(&mut rng, d);
            let spectrum = svd.singular_values.iter().zip(&noise).map(|(s, z)| {
                let base = if unit_spectrum { 1.0 } else { *s };
                (base + pert_std * z).max(SINGULAR_FLOOR)
            });
            let sigma = DMatrix::from_diagonal(&DVector::from_iterator(d, spectrum));
            let w = svd.u.expect("u requested") * sigma * svd.v_t.expect("v_t requested");
            DesignMatrix::from_matrix(w)
        }
    }
}

/// Draw a model and rescale it to `(1/d)‖θ‖₂² = c²`.
pub fn gen_model(dist: ThetaDist, d: usize, c: f64, seed: u64) -> Vec<f64> {
    let mut rng = rng_from_seed(seed);
    loop {
        let raw: Vec<f64> = match dist {
            ThetaDist::GaussianNormalized => gaussian_vec(&mut rng, d),
            ThetaDist::StudentT1 => {
                let t = StudentT::new(1.0).expect("one degree of freedom is valid");
                (0..d).map(|_| t.sample(&mut rng)).collect()
            }
            ThetaDist::GaussianCubed => (0..d)
                .map(|_| {
                    let g: f64 = StandardNormal.sample(&mut rng);
                    g * g * g
                })
                .collect(),
        };
        let norm = norm2(&raw);
        if norm > 0.0 && norm.is_finite() {
            let s = c * (d as f64).sqrt() / norm;
            return raw.iter().map(|v| v * s).collect();
        }
    }
}

/// One `(code, B)` point of a risk-versus-budget curve.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RiskRow {
    pub code: String,
    pub bits: f64,
    pub mean_risk: f64,
    pub std_risk: f64,
    pub n_trials: usize,
    pub lower_bound: f64,
    pub upper_bound: f64,
}

impl RiskRow {
    /// Standard error of the mean.
    pub fn std_error(&self) -> f64 {
        self.std_risk / (self.n_trials as f64).sqrt()
    }
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct RiskCurve {
    pub rows: Vec<RiskRow>,
}

impl RiskCurve {
    pub fn for_code<'a>(&'a self, code: &'a str) -> impl Iterator<Item = &'a RiskRow> + 'a {
        self.rows.iter().filter(move |r| r.code == code)
    }

    pub fn get(&self, code: &str, bits: f64) -> Option<&RiskRow> {
        self.rows.iter().find(|r| r.code == code && r.bits == bits)
    }
}

/// Run every `(code, B)` pair of the grid; rows come out code-major in the
/// order of `cfg.codes` and `cfg.b_grid`.
pub fn run_experiment(cfg: &ExperimentConfig) -> Result<RiskCurve> {
    cfg.validate()?;
    let registry = CodeRegistry::with_builtin();
    let dm = gen_design_matrix(cfg.w_kind, cfg.n, cfg.d, derive_seed(cfg.master_seed, &[tag("design")]))?;
    let fixed = cfg
        .fixed_theta
        .then(|| gen_model(cfg.theta_dist, cfg.d, cfg.c, derive_seed(cfg.master_seed, &[tag("theta")])));
    let mut rows = Vec::with_capacity(cfg.codes.len() * cfg.b_grid.len());
    for name in &cfg.codes {
        let name = name.to_ascii_lowercase();
        for &bits in &cfg.b_grid {
            let code_seed = |trial: u64| derive_seed(cfg.master_seed, &[tag(&name), bits.to_bits(), trial]);
            let losses = (0..cfg.n_trials as u64)
                .into_par_iter()
                .map(|trial| {
                    let theta = match &fixed {
                        Some(t) => t.clone(),
                        None => gen_model(
                            cfg.theta_dist,
                            cfg.d,
                            cfg.c,
                            derive_seed(cfg.master_seed, &[tag("theta"), trial]),
                        ),
                    };
                    let x = observe(&dm, &theta, cfg.sigma, derive_seed(cfg.master_seed, &[tag("noise"), trial]))?;
                    let code = registry.build(&name, &cfg.code_config(bits, code_seed(trial)), cfg.d)?;
                    let out = code.quantize(&x, &dm)?;
                    Ok(dist_sq(&out.theta_tilde, &theta) / cfg.d as f64)
                })
                .collect::<Result<Vec<f64>>>()?;
            let estimate = RiskEstimate::from_samples(&losses);
            let reference = registry.build(&name, &cfg.code_config(bits, code_seed(0)), cfg.d)?;
            let lower_bound =
                minimax_lower_bound(&BoundParams::new(bits, cfg.sigma, cfg.c, dm.sigma_min(), dm.sigma_max()))?;
            rows.push(RiskRow {
                code: name.clone(),
                bits,
                mean_risk: estimate.mean,
                std_risk: estimate.std,
                n_trials: cfg.n_trials,
                lower_bound,
                upper_bound: reference.upper_bound(&dm)?,
            });
        }
    }
    Ok(RiskCurve { rows })
}

/// `X = Wθ + v` with `v ~ N(0, σ²I)` drawn from `seed`.
pub fn observe(dm: &DesignMatrix, theta: &[f64], sigma: f64, seed: u64) -> Result<Vec<f64>> {
    let mut x = dm.apply(theta)?;
    if sigma > 0.0 {
        let noise = gaussian_vec(&mut rng_from_seed(seed), x.len());
        x.iter_mut().zip(noise).for_each(|(xi, v)| *xi += sigma * v);
    }
    Ok(x)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn small(codes: &[&str], grid: &[f64]) -> ExperimentConfig {
        ExperimentConfig {
            n: 16,
            d: 16,
            n_trials: 6,
            ..ExperimentConfig::identity_baseline(codes, grid, 17)
        }
    }

    #[test]
    fn identity_design_statistics() {
        let dm = gen_design_matrix(WKind::Identity, 4, 4, 0).unwrap();
        assert_eq!((dm.sigma_min(), dm.sigma_max(), dm.xi()), (1.0, 1.0, 4.0));
        assert!(matches!(gen_design_matrix(WKind::Identity, 5, 4, 0), Err(Error::InvalidDimensions(_))));
    }

    #[test]
    fn zero_perturbation_keeps_gaussian_spectrum() {
        let kind = WKind::PerturbedOrthonormal { pert_std: 0.0, unit_spectrum: false };
        let a = gen_design_matrix(kind, 12, 6, 3).unwrap();
        let g = DMatrix::from_vec(12, 6, gaussian_vec(&mut rng_from_seed(3), 72));
        let mut want: Vec<f64> = g.singular_values().iter().map(|s| s.max(SINGULAR_FLOOR)).collect();
        let mut got = a.singular_values().to_vec();
        want.sort_by(f64::total_cmp);
        got.sort_by(f64::total_cmp);
        for (x, y) in want.iter().zip(&got) {
            assert!((x - y).abs() < 1e-9);
        }
    }

    #[test]
    fn perturbed_design_is_reproducible() {
        let kind = WKind::PerturbedOrthonormal { pert_std: 0.05, unit_spectrum: false };
        let a = gen_design_matrix(kind, 128, 128, 9).unwrap();
        let b = gen_design_matrix(kind, 128, 128, 9).unwrap();
        assert_eq!(a.sigma_max() / a.sigma_min(), b.sigma_max() / b.sigma_min());
        let unit = WKind::PerturbedOrthonormal { pert_std: 0.05, unit_spectrum: true };
        let u = gen_design_matrix(unit, 64, 32, 1).unwrap();
        assert!(u.sigma_max() / u.sigma_min() < 1.5);
    }

    #[test]
    fn models_are_normalized_and_deterministic() {
        for dist in [ThetaDist::GaussianNormalized, ThetaDist::StudentT1, ThetaDist::GaussianCubed] {
            let t = gen_model(dist, 64, 1.5, 8);
            assert!((norm2(&t).powi(2) / 64.0 - 2.25).abs() < 1e-12);
            assert_eq!(t, gen_model(dist, 64, 1.5, 8));
        }
    }

    #[test]
    fn student_t_is_heavy_tailed() {
        let heavy = (0..50)
            .filter(|&seed| {
                let mut a: Vec<f64> = gen_model(ThetaDist::StudentT1, 128, 1.0, seed).iter().map(|v| v.abs()).collect();
                a.sort_by(f64::total_cmp);
                a[127] / a[64] > 10.0
            })
            .count();
        assert!(heavy > 25, "{heavy}");
    }

    #[test]
    fn noiseless_single_trial_has_zero_spread() {
        let cfg = ExperimentConfig { sigma: 0.0, n_trials: 1, ..small(&["ndq"], &[12.0]) };
        let curve = run_experiment(&cfg).unwrap();
        assert_eq!(curve.rows.len(), 1);
        assert_eq!(curve.rows[0].std_risk, 0.0);
    }

    #[test]
    fn rows_cover_grid_and_ignore_order() {
        let cfg = small(&["naive", "ndq", "dq"], &[1.0, 2.0, 3.0]);
        let curve = run_experiment(&cfg).unwrap();
        assert_eq!(curve.rows.len(), 9);
        let reordered = run_experiment(&ExperimentConfig { b_grid: vec![2.0, 3.0], codes: vec!["ndq".into()], ..cfg })
            .unwrap();
        for row in &reordered.rows {
            assert_eq!(curve.get("ndq", row.bits).unwrap(), row);
        }
    }

    #[test]
    fn config_errors_are_reported() {
        let bad = [
            ExperimentConfig { b_grid: vec![], ..small(&["ndq"], &[1.0]) },
            ExperimentConfig { b_grid: vec![2.0, 1.0], ..small(&["ndq"], &[1.0]) },
            ExperimentConfig { n_trials: 0, ..small(&["ndq"], &[1.0]) },
            ExperimentConfig { n: 8, ..small(&["ndq"], &[1.0]) },
            small(&["lattice"], &[1.0]),
            small(&["rcm"], &[2.0]),
        ];
        for cfg in bad {
            assert!(matches!(run_experiment(&cfg), Err(Error::Config(_))), "{cfg:?}");
        }
    }

    #[test]
    fn json_config_parses() {
        let text = r#"{"n": 8, "d": 8, "c": 1.0, "sigma": 0.5, "W_kind": {"kind": "identity"},
            "theta_dist": "student_t1", "B_grid": [1, 2], "codes": ["naive", "ndq"], "n_trials": 3,
            "master_seed": 4}"#;
        let cfg = ExperimentConfig::from_json(text).unwrap();
        assert_eq!(cfg.theta_dist, ThetaDist::StudentT1);
        assert_eq!(cfg.lambda, 1.0);
        assert!(matches!(ExperimentConfig::from_json("{"), Err(Error::Config(_))));
    }
}
