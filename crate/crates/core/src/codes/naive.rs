use crate::error::Result;
use crate::quantizers::bits::{packed_bits, BitReader, BitWriter};
use crate::quantizers::{prune_mask, UniformQuantizer};

use super::{CodeConfig, CodeKind, LearningCode};

/// Coordinate-wise uniform quantization of the unit direction on `[−1, 1]`.
/// Below one bit per dimension a shared random mask keeps `⌊Bd⌋`
/// coordinates, each sent with one bit.
#[derive(Debug, Clone)]
pub struct NaiveCode {
    cfg: CodeConfig,
    d: usize,
    quantizer: UniformQuantizer,
    kept: Option<Vec<usize>>,
}

impl NaiveCode {
    pub fn new(cfg: CodeConfig, d: usize) -> Result<Self> {
        cfg.validate()?;
        let (quantizer, kept) = if cfg.bits < 1.0 {
            (UniformQuantizer::new(1.0, 1.0)?, Some(prune_mask(d, cfg.bits, cfg.prune_seed)?))
        } else {
            (UniformQuantizer::new(cfg.bits, 1.0)?, None)
        };
        Ok(NaiveCode { cfg, d, quantizer, kept })
    }
}

impl LearningCode for NaiveCode {
    fn kind(&self) -> CodeKind {
        CodeKind::Naive
    }

    fn config(&self) -> &CodeConfig {
        &self.cfg
    }

    fn dim(&self) -> usize {
        self.d
    }

    fn direction_bits(&self) -> u64 {
        let n = self.kept.as_ref().map_or(self.d, Vec::len);
        packed_bits(self.quantizer.levels(), n)
    }

    fn encode_direction(&self, direction: &[f64], out: &mut BitWriter) -> Result<()> {
        let values: Vec<f64> = match &self.kept {
            Some(kept) => kept.iter().map(|&i| direction[i]).collect(),
            None => direction.to_vec(),
        };
        let (indices, _) = self.quantizer.quantize(&values);
        let zero_based: Vec<u64> = indices.iter().map(|i| i - 1).collect();
        out.push_indices(&zero_based, self.quantizer.levels());
        Ok(())
    }

    fn decode_direction(&self, input: &mut BitReader<'_>) -> Result<Vec<f64>> {
        let n = self.kept.as_ref().map_or(self.d, Vec::len);
        let indices: Vec<u64> = input.read_indices(n, self.quantizer.levels())?.iter().map(|i| i + 1).collect();
        let values = self.quantizer.dequantize(&indices)?;
        Ok(match &self.kept {
            Some(kept) => {
                let mut full = vec![0.0; self.d];
                for (&i, v) in kept.iter().zip(values) {
                    full[i] = v;
                }
                full
            }
            None => values,
        })
    }
}
