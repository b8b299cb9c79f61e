//! Scalar quantizers: the uniform quantizer with a configurable symmetric
//! dynamic range, the magnitude codebook and sub-one-bit random pruning.

pub mod bits;

use crate::error::{Error, Result};
use crate::rng::{rng_from_seed, sample_indices};

/// Number of levels `⌊2^bits⌋` used for a (possibly fractional) budget.
pub fn levels_for_bits(bits: f64) -> u64 {
    // The relative nudge keeps exact powers of two from rounding down.
    (bits.exp2() * (1.0 + 1e-12)).floor().max(1.0) as u64
}

/// Uniform scalar quantizer on `[−R, R]` with `M = ⌊2^B⌋` midpoint levels
/// `u_i = −R + (2i − 1)Δ/2`, `Δ = 2R/M`, indexed `1..=M`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct UniformQuantizer {
    bits: f64,
    range: f64,
    levels: u64,
}

impl UniformQuantizer {
    pub fn new(bits: f64, range: f64) -> Result<Self> {
        if !(bits > 0.0) || !bits.is_finite() {
            return Err(Error::InvalidBudget(bits));
        }
        if !(range > 0.0) || !range.is_finite() {
            return Err(Error::Config(format!("quantizer range must be positive, got {range}")));
        }
        Ok(UniformQuantizer { bits, range, levels: levels_for_bits(bits) })
    }

    pub fn bits(&self) -> f64 {
        self.bits
    }

    pub fn range(&self) -> f64 {
        self.range
    }

    pub fn levels(&self) -> u64 {
        self.levels
    }

    /// Resolution `Δ = 2R/M`.
    pub fn resolution(&self) -> f64 {
        2.0 * self.range / self.levels as f64
    }

    /// Level `u_i` for a 1-based index.
    pub fn level(&self, index: u64) -> Result<f64> {
        if index == 0 || index > self.levels {
            return Err(Error::IndexOutOfRange { index, levels: self.levels });
        }
        Ok(-self.range + (2 * index - 1) as f64 * self.resolution() / 2.0)
    }

    /// Index of the level nearest to `clamp(z, −R, R)`; ties go to the lower index.
    pub fn index_of(&self, z: f64) -> u64 {
        let z = z.clamp(-self.range, self.range);
        let pos = ((z + self.range) / self.resolution()).ceil();
        (pos as u64).clamp(1, self.levels)
    }

    pub fn quantize(&self, z: &[f64]) -> (Vec<u64>, Vec<f64>) {
        let indices: Vec<u64> = z.iter().map(|&v| self.index_of(v)).collect();
        let values = indices.iter().map(|&i| self.level(i).expect("in range")).collect();
        (indices, values)
    }

    pub fn dequantize(&self, indices: &[u64]) -> Result<Vec<f64>> {
        indices.iter().map(|&i| self.level(i)).collect()
    }

    /// Bits used by the packed index stream of `n` coordinates.
    pub fn stream_bits(&self, n: usize) -> u64 {
        bits::packed_bits(self.levels, n)
    }
}

/// Codebook `{k·step : k = 1..=K}` for the squared per-coordinate magnitude
/// `b² = ‖θ‖₂²/d`, with `step = 1/√d` and `K = ⌈c²√d⌉` by default.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MagnitudeCodebook {
    c: f64,
    d: usize,
    step: f64,
    count: u64,
}

impl MagnitudeCodebook {
    pub fn new(c: f64, d: usize) -> Result<Self> {
        Self::with_step(c, d, 1.0 / (d as f64).sqrt())
    }

    /// Same codebook family with a custom spacing between levels.
    pub fn with_step(c: f64, d: usize, step: f64) -> Result<Self> {
        if !(c > 0.0) || d == 0 || !(step > 0.0) {
            return Err(Error::Config(format!(
                "magnitude codebook needs c > 0, d > 0, step > 0 (c = {c}, d = {d}, step = {step})"
            )));
        }
        // Same nudge as `levels_for_bits`: exact products must not round up.
        let count = ((c * c / step) * (1.0 - 1e-12)).ceil().max(1.0) as u64;
        Ok(MagnitudeCodebook { c, d, step, count })
    }

    pub fn c(&self) -> f64 {
        self.c
    }

    pub fn d(&self) -> usize {
        self.d
    }

    pub fn len(&self) -> u64 {
        self.count
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    pub fn step(&self) -> f64 {
        self.step
    }

    /// Bits for one codebook index: `⌈log₂ K⌉`.
    pub fn index_bits(&self) -> u64 {
        bits::index_bits(self.count)
    }

    pub fn level(&self, index: u64) -> Result<f64> {
        if index == 0 || index > self.count {
            return Err(Error::IndexOutOfRange { index, levels: self.count });
        }
        Ok(index as f64 * self.step)
    }

    /// Nearest level to `max(b̂², step)`, ties toward the smaller level.
    /// Returns the 1-based index and the level value.
    pub fn quantize(&self, bhat_sq: f64) -> (u64, f64) {
        let x = bhat_sq.max(self.step) / self.step;
        let lower = x.floor();
        let k = if x - lower > 0.5 { lower + 1.0 } else { lower };
        let k = (k as u64).clamp(1, self.count);
        (k, k as f64 * self.step)
    }
}

/// Keep `⌊B·d⌋` coordinates chosen uniformly without replacement (sorted
/// indices). The mask is a function of `(d, B, seed)` only, so a decoder
/// sharing the seed rebuilds it without side information.
pub fn prune_mask(d: usize, bits: f64, seed: u64) -> Result<Vec<usize>> {
    if !(bits > 0.0 && bits < 1.0) {
        return Err(Error::InvalidBudget(bits));
    }
    let keep = ((bits * d as f64) * (1.0 + 1e-12)).floor() as usize;
    let mut rng = rng_from_seed(seed);
    Ok(sample_indices(&mut rng, d, keep))
}

/// Zero every coordinate of `v` outside [`prune_mask`].
pub fn subbit_prune(v: &[f64], bits: f64, seed: u64) -> Result<Vec<f64>> {
    let mask = prune_mask(v.len(), bits, seed)?;
    let mut out = vec![0.0; v.len()];
    for i in mask {
        out[i] = v[i];
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::rng_from_seed;
    use proptest::prelude::*;
    use rand::Rng;

    #[test]
    fn one_and_two_bit_examples() {
        let q = UniformQuantizer::new(1.0, 1.0).unwrap();
        assert_eq!(q.quantize(&[0.3, -0.9]).1, vec![0.5, -0.5]);
        assert_eq!(q.dequantize(&[1, 2]).unwrap(), vec![-0.5, 0.5]);
        let q = UniformQuantizer::new(2.0, 1.0).unwrap();
        assert_eq!(q.dequantize(&[1, 2, 3, 4]).unwrap(), vec![-0.75, -0.25, 0.25, 0.75]);
        assert_eq!(q.quantize(&[0.3]).1, vec![0.25]);
    }

    #[test]
    fn levels_scale_with_range() {
        // K_u = 3, D = 4: R = 1.5.
        let q = UniformQuantizer::new(2.0, 3.0 / 4f64.sqrt()).unwrap();
        assert_eq!(q.dequantize(&[1, 2, 3, 4]).unwrap(), vec![-1.125, -0.375, 0.375, 1.125]);
    }

    #[test]
    fn three_bit_error_within_half_resolution() {
        let q = UniformQuantizer::new(3.0, 1.0).unwrap();
        let mut rng = rng_from_seed(0);
        let z: Vec<f64> = (0..100_000).map(|_| rng.random_range(-1.0..=1.0)).collect();
        let (_, v) = q.quantize(&z);
        let worst = z.iter().zip(&v).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max);
        assert!(worst <= 0.125 + 1e-15, "{worst}");
    }

    #[test]
    fn ties_go_to_lower_index_and_out_of_range_clamps() {
        let q = UniformQuantizer::new(1.0, 1.0).unwrap();
        assert_eq!(q.index_of(0.0), 1);
        assert_eq!(q.index_of(5.0), 2);
        assert_eq!(q.index_of(-5.0), 1);
        let q = UniformQuantizer::new(2.0, 1.0).unwrap();
        assert_eq!(q.index_of(0.5), 3);
        assert_eq!(q.index_of(-0.5), 1);
    }

    #[test]
    fn fractional_budgets_floor_the_level_count() {
        assert_eq!(UniformQuantizer::new(2.5, 1.0).unwrap().levels(), 5);
        assert_eq!(UniformQuantizer::new(0.5, 1.0).unwrap().levels(), 1);
        assert_eq!(UniformQuantizer::new(3.0, 1.0).unwrap().levels(), 8);
        assert!(matches!(UniformQuantizer::new(0.0, 1.0), Err(Error::InvalidBudget(_))));
        assert!(matches!(UniformQuantizer::new(-1.0, 1.0), Err(Error::InvalidBudget(_))));
    }

    #[test]
    fn dequantize_rejects_bad_indices() {
        let q = UniformQuantizer::new(2.0, 1.0).unwrap();
        assert!(matches!(q.dequantize(&[0]), Err(Error::IndexOutOfRange { .. })));
        assert!(matches!(q.dequantize(&[5]), Err(Error::IndexOutOfRange { .. })));
    }

    #[test]
    fn indices_are_fixed_points() {
        for b in 1..=8 {
            let q = UniformQuantizer::new(b as f64, 0.7).unwrap();
            let idx: Vec<u64> = (1..=q.levels()).collect();
            let vals = q.dequantize(&idx).unwrap();
            assert_eq!(q.quantize(&vals).0, idx);
        }
    }

    #[test]
    fn stream_bits_for_power_of_two_levels() {
        let q = UniformQuantizer::new(3.0, 1.0).unwrap();
        assert_eq!(q.stream_bits(17), 51);
    }

    #[test]
    fn magnitude_examples() {
        let cb = MagnitudeCodebook::new(1.0, 4).unwrap();
        assert_eq!(cb.len(), 2);
        assert_eq!(cb.index_bits(), 1);
        assert_eq!(cb.quantize(0.6), (1, 0.5));
        assert_eq!(cb.quantize(-0.2), (1, 0.5));
        assert_eq!(cb.quantize(7.0), (2, 1.0));
        let cb = MagnitudeCodebook::new(1.0, 100).unwrap();
        assert_eq!(cb.len(), 10);
        let (k, v) = cb.quantize(0.84);
        assert_eq!(k, 8);
        assert!((v - 0.8).abs() < 1e-15);
        assert_eq!(MagnitudeCodebook::new(1.0, 128).unwrap().index_bits(), 4);
    }

    #[test]
    fn prune_examples() {
        let v = [1.0, 2.0, 3.0, 4.0];
        let out = subbit_prune(&v, 0.5, 3).unwrap();
        assert_eq!(out.iter().filter(|x| **x != 0.0).count(), 2);
        assert!(subbit_prune(&[0.0; 4], 0.5, 9).unwrap().iter().all(|x| *x == 0.0));
        let a = prune_mask(128, 0.25, 42).unwrap();
        assert_eq!(a.len(), 32);
        assert_eq!(a, prune_mask(128, 0.25, 42).unwrap());
        assert!(matches!(prune_mask(4, 1.0, 0), Err(Error::InvalidBudget(_))));
        assert!(matches!(prune_mask(4, 0.0, 0), Err(Error::InvalidBudget(_))));
    }

    proptest! {
        #[test]
        fn level_set_symmetric(b in 0.1f64..10.0, r in 0.01f64..10.0) {
            let q = UniformQuantizer::new(b, r).unwrap();
            let m = q.levels();
            for i in 1..=m.min(64) {
                let lo = q.level(i).unwrap();
                let hi = q.level(m + 1 - i).unwrap();
                prop_assert!((lo + hi).abs() <= 1e-12 * r);
            }
        }

        #[test]
        fn worst_case_l2_bound(b in 1u32..9, r in 0.01f64..5.0, seed in any::<u64>(), n in 1usize..200) {
            let q = UniformQuantizer::new(b as f64, r).unwrap();
            let mut rng = rng_from_seed(seed);
            let z: Vec<f64> = (0..n).map(|_| rng.random_range(-r..=r)).collect();
            let (_, v) = q.quantize(&z);
            let err: f64 = z.iter().zip(&v).map(|(a, b)| (a - b).powi(2)).sum::<f64>().sqrt();
            prop_assert!(err <= r / q.levels() as f64 * (n as f64).sqrt() * (1.0 + 1e-12));
        }

        #[test]
        fn monotone_in_input(b in 0.5f64..8.0, x in -3.0f64..3.0, y in -3.0f64..3.0) {
            let q = UniformQuantizer::new(b, 1.3).unwrap();
            let (lo, hi) = if x <= y { (x, y) } else { (y, x) };
            prop_assert!(q.index_of(lo) <= q.index_of(hi));
        }
    }
}
