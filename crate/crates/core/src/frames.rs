//! Parseval frames `S` (d x D, `S Sᵀ = I_d`) used to embed directions before
//! uniform quantization.
//!
//! Two constructions are supported:
//!
//! * **Randomized Hadamard** `S = P·D·H`: `H` is the normalized Sylvester
//!   Hadamard matrix (entries `±1/√D`), `D` a random ±1 diagonal and `P`
//!   selects `d` of the `D` rows. Applied in `O(D log D)` with [`fwht`].
//! * **Random orthonormal**: `d` random rows of `U Vᵀ`, where `U Σ Vᵀ` is the
//!   SVD of a `D x D` standard Gaussian matrix. Stored densely.

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::rng::{gaussian_vec, rng_from_seed, sample_indices};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum FrameKind {
    RandomOrthonormal,
    RandomizedHadamard,
}

impl std::str::FromStr for FrameKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "random_orthonormal" | "orthonormal" => Ok(FrameKind::RandomOrthonormal),
            "randomized_hadamard" | "hadamard" => Ok(FrameKind::RandomizedHadamard),
            other => Err(Error::Parse(format!("unknown frame kind `{other}`"))),
        }
    }
}

/// In-place normalized fast Walsh-Hadamard transform (Sylvester ordering).
pub fn fwht_in_place(v: &mut [f64]) -> Result<()> {
    let n = v.len();
    if !n.is_power_of_two() {
        return Err(Error::DimensionNotPowerOfTwo(n));
    }
    let mut h = 1;
    while h < n {
        for block in v.chunks_exact_mut(2 * h) {
            let (lo, hi) = block.split_at_mut(h);
            for (a, b) in lo.iter_mut().zip(hi.iter_mut()) {
                let (x, y) = (*a, *b);
                *a = x + y;
                *b = x - y;
            }
        }
        h *= 2;
    }
    let scale = 1.0 / (n as f64).sqrt();
    v.iter_mut().for_each(|x| *x *= scale);
    Ok(())
}

/// Returns `H·v` for the normalized `D x D` Hadamard matrix `H`.
pub fn fwht(v: &[f64]) -> Result<Vec<f64>> {
    let mut out = v.to_vec();
    fwht_in_place(&mut out)?;
    Ok(out)
}

#[derive(Debug, Clone, PartialEq)]
enum Repr {
    Hadamard { rows: Vec<usize>, signs: Vec<f64> },
    Dense(DMatrix<f64>),
}

/// An immutable `d x D` Parseval frame.
#[derive(Debug, Clone, PartialEq)]
pub struct Frame {
    d: usize,
    big_d: usize,
    kind: FrameKind,
    seed: u64,
    repr: Repr,
}

impl Frame {
    pub fn new(kind: FrameKind, d: usize, big_d: usize, seed: u64) -> Result<Self> {
        if d == 0 || big_d < d {
            return Err(Error::InvalidDimensions(format!(
                "frame needs 1 <= d <= D, got d = {d}, D = {big_d}"
            )));
        }
        let mut rng = rng_from_seed(seed);
        let repr = match kind {
            FrameKind::RandomizedHadamard => {
                if !big_d.is_power_of_two() {
                    return Err(Error::DimensionNotPowerOfTwo(big_d));
                }
                let rows = sample_indices(&mut rng, big_d, d);
                let signs = (0..big_d)
                    .map(|_| if rand::Rng::random::<bool>(&mut rng) { 1.0 } else { -1.0 })
                    .collect();
                Repr::Hadamard { rows, signs }
            }
            FrameKind::RandomOrthonormal => {
                let g = DMatrix::from_vec(big_d, big_d, gaussian_vec(&mut rng, big_d * big_d));
                let svd = g.svd(true, true);
                let q = svd.u.expect("u requested") * svd.v_t.expect("v_t requested");
                let rows = sample_indices(&mut rng, big_d, d);
                Repr::Dense(q.select_rows(rows.iter()))
            }
        };
        Ok(Frame { d, big_d, kind, seed, repr })
    }

    /// Rows of `S`.
    pub fn d(&self) -> usize {
        self.d
    }

    /// Columns of `S` (the embedding dimension).
    pub fn big_d(&self) -> usize {
        self.big_d
    }

    pub fn kind(&self) -> FrameKind {
        self.kind
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    /// Aspect ratio `D / d`.
    pub fn lambda(&self) -> f64 {
        self.big_d as f64 / self.d as f64
    }

    /// Selected rows of the Hadamard construction, `None` for dense frames.
    pub fn row_selection(&self) -> Option<&[usize]> {
        match &self.repr {
            Repr::Hadamard { rows, .. } => Some(rows),
            Repr::Dense(_) => None,
        }
    }

    pub fn signs(&self) -> Option<&[f64]> {
        match &self.repr {
            Repr::Hadamard { signs, .. } => Some(signs),
            Repr::Dense(_) => None,
        }
    }

    /// `S·x` for `x` of length `D`.
    pub fn apply(&self, x: &[f64]) -> Result<Vec<f64>> {
        check_len(self.big_d, x.len())?;
        match &self.repr {
            Repr::Hadamard { rows, signs } => {
                let mut v = fwht(x)?;
                v.iter_mut().zip(signs).for_each(|(a, s)| *a *= s);
                Ok(rows.iter().map(|&r| v[r]).collect())
            }
            Repr::Dense(s) => Ok((0..self.d)
                .map(|i| s.row(i).iter().zip(x).map(|(a, b)| a * b).sum())
                .collect()),
        }
    }

    /// `Sᵀ·y` for `y` of length `d`.
    pub fn adjoint(&self, y: &[f64]) -> Result<Vec<f64>> {
        check_len(self.d, y.len())?;
        match &self.repr {
            Repr::Hadamard { rows, signs } => {
                let mut v = vec![0.0; self.big_d];
                for (&r, &val) in rows.iter().zip(y) {
                    v[r] = val * signs[r];
                }
                fwht_in_place(&mut v)?;
                Ok(v)
            }
            Repr::Dense(s) => {
                let mut out = vec![0.0; self.big_d];
                for (i, &yi) in y.iter().enumerate() {
                    for (o, a) in out.iter_mut().zip(s.row(i).iter()) {
                        *o += a * yi;
                    }
                }
                Ok(out)
            }
        }
    }

    /// Materialize `S` as a dense `d x D` matrix.
    pub fn to_dense(&self) -> DMatrix<f64> {
        match &self.repr {
            Repr::Dense(s) => s.clone(),
            Repr::Hadamard { .. } => {
                let mut m = DMatrix::zeros(self.d, self.big_d);
                let mut e = vec![0.0; self.big_d];
                for j in 0..self.big_d {
                    e[j] = 1.0;
                    let col = self.apply(&e).expect("length checked");
                    m.column_mut(j).copy_from_slice(&col);
                    e[j] = 0.0;
                }
                m
            }
        }
    }

    /// `max |S Sᵀ − I|` over all entries.
    pub fn parseval_error(&self) -> f64 {
        let s = self.to_dense();
        let g = &s * s.transpose();
        let mut worst: f64 = 0.0;
        for i in 0..self.d {
            for j in 0..self.d {
                let target = if i == j { 1.0 } else { 0.0 };
                worst = worst.max((g[(i, j)] - target).abs());
            }
        }
        worst
    }
}

fn check_len(expected: usize, actual: usize) -> Result<()> {
    if expected != actual {
        return Err(Error::DimensionMismatch { expected, actual });
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::{gaussian_vec, rng_from_seed, unit_sphere};

    fn dense_hadamard(n: usize) -> DMatrix<f64> {
        let mut h = DMatrix::from_element(1, 1, 1.0);
        while h.nrows() < n {
            let k = h.nrows();
            let mut next = DMatrix::zeros(2 * k, 2 * k);
            next.view_mut((0, 0), (k, k)).copy_from(&h);
            next.view_mut((0, k), (k, k)).copy_from(&h);
            next.view_mut((k, 0), (k, k)).copy_from(&h);
            next.view_mut((k, k), (k, k)).copy_from(&(-&h));
            h = next;
        }
        h / (n as f64).sqrt()
    }

    #[test]
    fn fwht_small_examples() {
        let s = std::f64::consts::FRAC_1_SQRT_2;
        let out = fwht(&[1.0, 0.0]).unwrap();
        assert!((out[0] - s).abs() < 1e-15 && (out[1] - s).abs() < 1e-15);
        assert_eq!(fwht(&[1.0, 0.0, 0.0, 0.0]).unwrap(), vec![0.5; 4]);
        assert!(matches!(fwht(&[1.0, 2.0, 3.0]), Err(Error::DimensionNotPowerOfTwo(3))));
    }

    #[test]
    fn fwht_matches_dense_hadamard() {
        let mut rng = rng_from_seed(1);
        for k in 0..=6 {
            let n = 1 << k;
            let h = dense_hadamard(n);
            let v = gaussian_vec(&mut rng, n);
            let fast = fwht(&v).unwrap();
            let slow = &h * nalgebra::DVector::from_vec(v);
            for i in 0..n {
                assert!((fast[i] - slow[i]).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn fwht_involution_and_norm() {
        let mut rng = rng_from_seed(2);
        for trial in 0..1000 {
            let n = 1 << (1 + trial % 10);
            let v = gaussian_vec(&mut rng, n);
            let once = fwht(&v).unwrap();
            let twice = fwht(&once).unwrap();
            let err = v.iter().zip(&twice).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max);
            assert!(err < 1e-12, "involution error {err} at D = {n}");
            let n0: f64 = v.iter().map(|x| x * x).sum::<f64>().sqrt();
            let n1: f64 = once.iter().map(|x| x * x).sum::<f64>().sqrt();
            assert!(((n1 - n0) / n0).abs() < 1e-12);
        }
    }

    #[test]
    fn full_selection_hadamard_is_orthogonal() {
        let f = Frame::new(FrameKind::RandomizedHadamard, 4, 4, 0).unwrap();
        assert!(f.parseval_error() < 1e-12);
    }

    #[test]
    fn square_orthonormal_has_unit_determinant() {
        let f = Frame::new(FrameKind::RandomOrthonormal, 2, 2, 7).unwrap();
        let det = f.to_dense().determinant();
        assert!((det.abs() - 1.0).abs() < 1e-10);
    }

    #[test]
    fn adjoint_preserves_norm() {
        let f = Frame::new(FrameKind::RandomizedHadamard, 3, 4, 1).unwrap();
        let mut rng = rng_from_seed(9);
        for _ in 0..20 {
            let y = unit_sphere(&mut rng, 3);
            let x = f.adjoint(&y).unwrap();
            let n: f64 = x.iter().map(|a| a * a).sum::<f64>().sqrt();
            assert!((n - 1.0).abs() < 1e-10);
        }
        let f = Frame::new(FrameKind::RandomizedHadamard, 64, 64, 5).unwrap();
        let y = unit_sphere(&mut rng, 64);
        let n: f64 = f.adjoint(&y).unwrap().iter().map(|a| a * a).sum::<f64>().sqrt();
        assert!((n - 1.0).abs() < 1e-10);
    }

    #[test]
    fn all_plus_signs_apply_gives_hadamard_column() {
        let mut f = Frame::new(FrameKind::RandomizedHadamard, 8, 8, 0).unwrap();
        f.repr = Repr::Hadamard { rows: (0..8).collect(), signs: vec![1.0; 8] };
        let mut e1 = vec![0.0; 8];
        e1[0] = 1.0;
        let col = f.apply(&e1).unwrap();
        let h = dense_hadamard(8);
        for i in 0..8 {
            assert!((col[i] - h[(i, 0)]).abs() < 1e-15);
        }
        // Sᵀ e₁ for the full selection is a signed Hadamard row: entries ±1/√D.
        let g = Frame::new(FrameKind::RandomizedHadamard, 8, 8, 4).unwrap();
        let row = g.adjoint(&e1).unwrap();
        assert!(row.iter().all(|v| (v.abs() - 1.0 / 8f64.sqrt()).abs() < 1e-15));
    }

    #[test]
    fn apply_adjoint_right_inverse_and_linearity() {
        let mut rng = rng_from_seed(4);
        for kind in [FrameKind::RandomizedHadamard, FrameKind::RandomOrthonormal] {
            let f = Frame::new(kind, 12, 16, 3).unwrap();
            let y = gaussian_vec(&mut rng, 12);
            let back = f.apply(&f.adjoint(&y).unwrap()).unwrap();
            for (a, b) in y.iter().zip(&back) {
                assert!((a - b).abs() < 1e-10);
            }
            assert!(f.apply(&vec![0.0; 16]).unwrap().iter().all(|v| *v == 0.0));
            assert!(f.adjoint(&vec![0.0; 12]).unwrap().iter().all(|v| *v == 0.0));
        }
        let f = Frame::new(FrameKind::RandomizedHadamard, 8, 8, 3).unwrap();
        assert!(f.apply(&[0.0; 8]).unwrap().iter().all(|v| *v == 0.0));
    }

    #[test]
    fn rows_have_unit_norm() {
        for kind in [FrameKind::RandomizedHadamard, FrameKind::RandomOrthonormal] {
            let s = Frame::new(kind, 5, 8, 21).unwrap().to_dense();
            for i in 0..5 {
                assert!((s.row(i).norm() - 1.0).abs() < 1e-10);
            }
        }
    }

    #[test]
    fn construction_is_deterministic() {
        for kind in [FrameKind::RandomizedHadamard, FrameKind::RandomOrthonormal] {
            let a = Frame::new(kind, 6, 8, 99).unwrap();
            let b = Frame::new(kind, 6, 8, 99).unwrap();
            assert_eq!(a, b);
            assert_ne!(a, Frame::new(kind, 6, 8, 100).unwrap());
        }
    }

    #[test]
    fn invalid_shapes_rejected() {
        assert!(matches!(
            Frame::new(FrameKind::RandomOrthonormal, 5, 4, 0),
            Err(Error::InvalidDimensions(_))
        ));
        assert!(matches!(
            Frame::new(FrameKind::RandomizedHadamard, 5, 6, 0),
            Err(Error::DimensionNotPowerOfTwo(6))
        ));
        let f = Frame::new(FrameKind::RandomizedHadamard, 2, 4, 0).unwrap();
        assert!(matches!(f.apply(&[1.0]), Err(Error::DimensionMismatch { .. })));
        assert!(matches!(f.adjoint(&[1.0; 3]), Err(Error::DimensionMismatch { .. })));
    }
}
