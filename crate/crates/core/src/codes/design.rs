use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};

#[derive(Debug, Clone)]
enum Structure {
    Identity,
    Dense { w: DMatrix<f64>, u: DMatrix<f64>, v: DMatrix<f64>, pinv: DMatrix<f64> },
}

/// Measurement matrix `W ∈ R^{n×d}` of the planted model `X = Wθ + v`, with
/// its SVD, pseudoinverse `W⁺ = (WᵀW)⁻¹Wᵀ`, extreme singular values and
/// `ξ = Σ σᵢ⁻²` computed once.
#[derive(Debug, Clone)]
pub struct DesignMatrix {
    n: usize,
    d: usize,
    structure: Structure,
    singular_values: Vec<f64>,
    sigma_min: f64,
    sigma_max: f64,
    xi: f64,
}

impl DesignMatrix {
    /// `W = I_d`, without materializing the matrix.
    pub fn identity(d: usize) -> Result<Self> {
        if d == 0 {
            return Err(Error::InvalidDimensions("design matrix needs d >= 1".into()));
        }
        Ok(DesignMatrix {
            n: d,
            d,
            structure: Structure::Identity,
            singular_values: vec![1.0; d],
            sigma_min: 1.0,
            sigma_max: 1.0,
            xi: d as f64,
        })
    }

    pub fn from_matrix(w: DMatrix<f64>) -> Result<Self> {
        let (n, d) = w.shape();
        if d == 0 || n < d {
            return Err(Error::InvalidDimensions(format!(
                "design matrix must be n x d with n >= d >= 1, got {n} x {d}"
            )));
        }
        let svd = w.clone().svd(true, true);
        let sv: Vec<f64> = svd.singular_values.iter().copied().collect();
        let sigma_max = sv.iter().copied().fold(0.0, f64::max);
        let sigma_min = sv.iter().copied().fold(f64::INFINITY, f64::min);
        if !(sigma_max > 0.0) || sigma_min < 1e-12 * sigma_max {
            return Err(Error::RankDeficient { sigma_min, sigma_max });
        }
        let u = svd.u.expect("u requested");
        let v = svd.v_t.expect("v_t requested").transpose();
        let inv = DMatrix::from_diagonal(&DVector::from_iterator(d, sv.iter().map(|s| 1.0 / s)));
        let pinv = &v * inv * u.transpose();
        let xi = sv.iter().map(|s| s.powi(-2)).sum();
        Ok(DesignMatrix {
            n,
            d,
            structure: Structure::Dense { w, u, v, pinv },
            singular_values: sv,
            sigma_min,
            sigma_max,
            xi,
        })
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn d(&self) -> usize {
        self.d
    }

    pub fn is_identity(&self) -> bool {
        matches!(self.structure, Structure::Identity)
    }

    pub fn singular_values(&self) -> &[f64] {
        &self.singular_values
    }

    pub fn sigma_min(&self) -> f64 {
        self.sigma_min
    }

    pub fn sigma_max(&self) -> f64 {
        self.sigma_max
    }

    /// `ξ = Σᵢ σᵢ⁻²`.
    pub fn xi(&self) -> f64 {
        self.xi
    }

    /// `W θ`.
    pub fn apply(&self, theta: &[f64]) -> Result<Vec<f64>> {
        check(self.d, theta.len())?;
        Ok(match &self.structure {
            Structure::Identity => theta.to_vec(),
            Structure::Dense { w, .. } => (w * DVector::from_column_slice(theta)).as_slice().to_vec(),
        })
    }

    /// `W⁺ x`.
    pub fn pinv_apply(&self, x: &[f64]) -> Result<Vec<f64>> {
        check(self.n, x.len())?;
        Ok(match &self.structure {
            Structure::Identity => x.to_vec(),
            Structure::Dense { pinv, .. } => (pinv * DVector::from_column_slice(x)).as_slice().to_vec(),
        })
    }

    pub fn matrix(&self) -> DMatrix<f64> {
        match &self.structure {
            Structure::Identity => DMatrix::identity(self.d, self.d),
            Structure::Dense { w, .. } => w.clone(),
        }
    }

    pub fn pinv(&self) -> DMatrix<f64> {
        match &self.structure {
            Structure::Identity => DMatrix::identity(self.d, self.d),
            Structure::Dense { pinv, .. } => pinv.clone(),
        }
    }

    /// Thin left singular vectors (`n x d`) and right singular vectors (`d x d`).
    pub fn svd_factors(&self) -> (DMatrix<f64>, DMatrix<f64>) {
        match &self.structure {
            Structure::Identity => (DMatrix::identity(self.d, self.d), DMatrix::identity(self.d, self.d)),
            Structure::Dense { u, v, .. } => (u.clone(), v.clone()),
        }
    }
}

fn check(expected: usize, actual: usize) -> Result<()> {
    if expected != actual {
        return Err(Error::DimensionMismatch { expected, actual });
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::{gaussian_vec, rng_from_seed};

    #[test]
    fn identity_statistics() {
        let dm = DesignMatrix::identity(4).unwrap();
        assert_eq!((dm.sigma_min(), dm.sigma_max(), dm.xi()), (1.0, 1.0, 4.0));
        let dense = DesignMatrix::from_matrix(DMatrix::identity(4, 4)).unwrap();
        assert!((dense.xi() - 4.0).abs() < 1e-12);
    }

    #[test]
    fn pinv_is_left_inverse_and_xi_is_sandwiched() {
        let mut rng = rng_from_seed(12);
        let w = DMatrix::from_vec(9, 5, gaussian_vec(&mut rng, 45));
        let dm = DesignMatrix::from_matrix(w.clone()).unwrap();
        let id = dm.pinv() * &w;
        for i in 0..5 {
            for j in 0..5 {
                let t = if i == j { 1.0 } else { 0.0 };
                assert!((id[(i, j)] - t).abs() < 1e-8);
            }
        }
        let d = 5.0;
        assert!(dm.xi() >= d / dm.sigma_max().powi(2) - 1e-12);
        assert!(dm.xi() <= d / dm.sigma_min().powi(2) + 1e-12);
        let theta = [1.0, -2.0, 0.5, 0.0, 3.0];
        let back = dm.pinv_apply(&dm.apply(&theta).unwrap()).unwrap();
        for (a, b) in theta.iter().zip(&back) {
            assert!((a - b).abs() < 1e-10);
        }
    }

    #[test]
    fn rejects_bad_shapes() {
        assert!(matches!(
            DesignMatrix::from_matrix(DMatrix::zeros(2, 3)),
            Err(Error::InvalidDimensions(_))
        ));
        let mut w = DMatrix::zeros(3, 2);
        w[(0, 0)] = 1.0;
        w[(1, 0)] = 1.0;
        assert!(matches!(DesignMatrix::from_matrix(w), Err(Error::RankDeficient { .. })));
        let dm = DesignMatrix::identity(3).unwrap();
        assert!(matches!(dm.pinv_apply(&[1.0]), Err(Error::DimensionMismatch { .. })));
    }
}
