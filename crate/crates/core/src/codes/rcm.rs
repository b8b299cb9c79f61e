use std::sync::OnceLock;

use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};
use crate::linalg::dot;
use crate::quantizers::bits::{index_bits, BitReader, BitWriter};
use crate::quantizers::levels_for_bits;
use crate::rng::{rng_from_seed, unit_sphere};

use super::{CodeConfig, CodeKind, DesignMatrix, LearningCode, RcmScaling};

/// Largest `dB` for which the codebook is enumerated.
pub const RCM_MAX_BITS: f64 = 30.0;

/// Codebooks up to this many stored reals are materialized once.
const CACHE_LIMIT: u64 = 1 << 22;

/// Random codebook matching: `⌊2^{dB}⌋` shared codewords uniform on the unit
/// sphere, the encoder sends the index of the one best aligned with `W⁺X`.
///
/// Codeword `i` is drawn from its own ChaCha stream `i` under `rcm_seed`,
/// so the decoder regenerates a single codeword without the rest.
#[derive(Debug)]
pub struct RcmCode {
    cfg: CodeConfig,
    d: usize,
    size: u64,
    cache: OnceLock<Vec<f64>>,
}

impl RcmCode {
    pub fn new(cfg: CodeConfig, d: usize) -> Result<Self> {
        cfg.validate()?;
        let total = d as f64 * cfg.bits;
        if total > RCM_MAX_BITS {
            return Err(Error::BudgetTooLarge(total));
        }
        Ok(RcmCode { size: levels_for_bits(total), cfg, d, cache: OnceLock::new() })
    }

    /// Number of codewords `M`.
    pub fn size(&self) -> u64 {
        self.size
    }

    pub fn codeword(&self, index: u64) -> Result<Vec<f64>> {
        if index >= self.size {
            return Err(Error::IndexOutOfRange { index, levels: self.size });
        }
        if let Some(book) = self.cached() {
            let i = index as usize * self.d;
            return Ok(book[i..i + self.d].to_vec());
        }
        Ok(self.draw(index))
    }

    fn draw(&self, index: u64) -> Vec<f64> {
        let mut rng: ChaCha8Rng = rng_from_seed(self.cfg.rcm_seed);
        rng.set_stream(index);
        unit_sphere(&mut rng, self.d)
    }

    fn cached(&self) -> Option<&[f64]> {
        if self.size * self.d as u64 > CACHE_LIMIT {
            return None;
        }
        Some(self.cache.get_or_init(|| (0..self.size).flat_map(|i| self.draw(i)).collect()))
    }

    /// Index of the codeword with the largest inner product; ties go to the
    /// lowest index.
    pub fn best_index(&self, target: &[f64]) -> u64 {
        let mut best = (0, f64::NEG_INFINITY);
        let mut consider = |i: u64, word: &[f64]| {
            let score = dot(word, target);
            if score > best.1 {
                best = (i, score);
            }
        };
        match self.cached() {
            Some(book) => {
                for (i, word) in book.chunks_exact(self.d).enumerate() {
                    consider(i as u64, word);
                }
            }
            None => {
                for i in 0..self.size {
                    consider(i, &self.draw(i));
                }
            }
        }
        best.0
    }
}

impl LearningCode for RcmCode {
    fn kind(&self) -> CodeKind {
        CodeKind::Rcm
    }

    fn config(&self) -> &CodeConfig {
        &self.cfg
    }

    fn dim(&self) -> usize {
        self.d
    }

    fn direction_bits(&self) -> u64 {
        index_bits(self.size)
    }

    fn encode_direction(&self, direction: &[f64], out: &mut BitWriter) -> Result<()> {
        out.push_u64(self.best_index(direction), self.direction_bits());
        Ok(())
    }

    fn decode_direction(&self, input: &mut BitReader<'_>) -> Result<Vec<f64>> {
        let index = input.read_u64(self.direction_bits())?;
        self.codeword(index)
    }

    fn scaling(&self, btilde_sq: f64, dm: &DesignMatrix) -> f64 {
        let d = self.d as f64;
        let sigma = self.cfg.sigma;
        let numerator = match self.cfg.rcm_scaling {
            RcmScaling::Quartic => btilde_sq * btilde_sq,
            RcmScaling::Quadratic => btilde_sq,
        };
        let shrink = 1.0 - (-2.0 * self.cfg.bits).exp2();
        (d * numerator * shrink / (btilde_sq + sigma * sigma * dm.xi() / d)).sqrt()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linalg::norm2;
    use crate::rng::rng_from_seed;

    #[test]
    fn four_codewords_and_argmax() {
        let dm = DesignMatrix::identity(2).unwrap();
        let mut cfg = CodeConfig::new(1.0, 1.0, 0.0);
        cfg.rcm_seed = 42;
        let code = RcmCode::new(cfg, 2).unwrap();
        assert_eq!(code.size(), 4);
        let x = [0.3, -0.8];
        let out = code.quantize(&x, &dm).unwrap();
        let direction: Vec<f64> = out.theta_tilde.iter().map(|v| v / out.scaling).collect();
        let words: Vec<_> = (0..4).map(|i| code.codeword(i).unwrap()).collect();
        assert!(words.iter().any(|w| w.iter().zip(&direction).all(|(a, b)| (a - b).abs() < 1e-12)));
        let chosen = dot(&direction, &x);
        assert!(words.iter().all(|w| dot(w, &x) <= chosen + 1e-12));
        for w in &words {
            assert!((norm2(w) - 1.0).abs() < 1e-12);
        }
    }

    #[test]
    fn deterministic_and_random_access() {
        let mut cfg = CodeConfig::new(2.0, 1.0, 0.0);
        cfg.rcm_seed = 5;
        let a = RcmCode::new(cfg.clone(), 6).unwrap();
        let b = RcmCode::new(cfg, 6).unwrap();
        assert_eq!(a.codeword(17).unwrap(), b.draw(17));
        let t = unit_sphere(&mut rng_from_seed(0), 6);
        assert_eq!(a.best_index(&t), b.best_index(&t));
    }

    #[test]
    fn enumeration_cap() {
        assert_eq!(RcmCode::new(CodeConfig::new(3.75, 1.0, 0.0), 8).unwrap().direction_bits(), 30);
        assert!(matches!(RcmCode::new(CodeConfig::new(4.0, 1.0, 0.0), 8), Err(Error::BudgetTooLarge(_))));
    }

    #[test]
    fn scaling_forms() {
        let dm = DesignMatrix::identity(4).unwrap();
        let mut cfg = CodeConfig::new(1.0, 1.0, 0.0);
        let quartic = RcmCode::new(cfg.clone(), 4).unwrap().scaling(0.25, &dm);
        cfg.rcm_scaling = RcmScaling::Quadratic;
        let quadratic = RcmCode::new(cfg, 4).unwrap().scaling(0.25, &dm);
        assert!((quartic - (4.0 * 0.25 * 0.75f64).sqrt()).abs() < 1e-12);
        assert!((quadratic - (4.0 * 0.75f64).sqrt()).abs() < 1e-12);
    }
}
