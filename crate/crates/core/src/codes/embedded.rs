//! Frame-embedded codes: the direction is lifted to `R^D` by a Parseval
//! frame, quantized coordinate-wise there with `dB/D` bits per coordinate,
//! and mapped back by `S`.

use crate::embeddings::{democratic_embed, near_democratic_embed, KashinParams};
use crate::error::Result;
use crate::frames::{Frame, FrameKind};
use crate::quantizers::bits::{packed_bits, BitReader, BitWriter};
use crate::quantizers::{prune_mask, UniformQuantizer};

use super::{CodeConfig, CodeKind, LearningCode};

/// Quantizer stage shared by DQ and NDQ. When the per-coordinate budget
/// `dB/D` drops below one bit, a shared random mask keeps `⌊dB⌋` embedded
/// coordinates at one bit each.
#[derive(Debug, Clone)]
struct EmbeddedStage {
    frame: Frame,
    quantizer: UniformQuantizer,
    kept: Option<Vec<usize>>,
}

impl EmbeddedStage {
    fn new(cfg: &CodeConfig, frame: Frame, range: f64) -> Result<Self> {
        let big_d = frame.big_d();
        let per_coord = cfg.bits * frame.d() as f64 / big_d as f64;
        let (quantizer, kept) = if per_coord * (1.0 + 1e-12) >= 1.0 {
            (UniformQuantizer::new(per_coord, range)?, None)
        } else {
            (UniformQuantizer::new(1.0, range)?, Some(prune_mask(big_d, per_coord, cfg.prune_seed)?))
        };
        Ok(EmbeddedStage { frame, quantizer, kept })
    }

    fn coords(&self) -> usize {
        self.kept.as_ref().map_or(self.frame.big_d(), Vec::len)
    }

    fn bits(&self) -> u64 {
        packed_bits(self.quantizer.levels(), self.coords())
    }

    fn encode(&self, embedded: &[f64], out: &mut BitWriter) {
        let values: Vec<f64> = match &self.kept {
            Some(kept) => kept.iter().map(|&i| embedded[i]).collect(),
            None => embedded.to_vec(),
        };
        let (indices, _) = self.quantizer.quantize(&values);
        let zero_based: Vec<u64> = indices.iter().map(|i| i - 1).collect();
        out.push_indices(&zero_based, self.quantizer.levels());
    }

    fn decode(&self, input: &mut BitReader<'_>) -> Result<Vec<f64>> {
        let indices: Vec<u64> =
            input.read_indices(self.coords(), self.quantizer.levels())?.iter().map(|i| i + 1).collect();
        let values = self.quantizer.dequantize(&indices)?;
        let embedded = match &self.kept {
            Some(kept) => {
                let mut full = vec![0.0; self.frame.big_d()];
                for (&i, v) in kept.iter().zip(values) {
                    full[i] = v;
                }
                full
            }
            None => values,
        };
        self.frame.apply(&embedded)
    }
}

fn rounded_dim(lambda: f64, d: usize) -> usize {
    ((lambda * d as f64).round() as usize).max(d)
}

fn hadamard_dim(lambda: f64, d: usize) -> usize {
    ((lambda * d as f64 - 1e-9).ceil() as usize).max(d).next_power_of_two()
}

/// Democratic quantization (DQ): Kashin embedding, range `K_u/√D`.
#[derive(Debug, Clone)]
pub struct DemocraticCode {
    cfg: CodeConfig,
    stage: EmbeddedStage,
    kashin: KashinParams,
}

impl DemocraticCode {
    pub fn new(cfg: CodeConfig, d: usize) -> Result<Self> {
        cfg.validate()?;
        let kind = cfg.frame_kind.unwrap_or(FrameKind::RandomOrthonormal);
        let big_d = match kind {
            FrameKind::RandomOrthonormal => rounded_dim(cfg.lambda, d),
            FrameKind::RandomizedHadamard => hadamard_dim(cfg.lambda, d),
        };
        let frame = Frame::new(kind, d, big_d, cfg.frame_seed)?;
        let range = cfg.kashin.k_upper() / (big_d as f64).sqrt();
        let stage = EmbeddedStage::new(&cfg, frame, range)?;
        Ok(DemocraticCode { kashin: cfg.kashin.clone(), cfg, stage })
    }

    pub fn frame(&self) -> &Frame {
        &self.stage.frame
    }

    pub fn quantizer(&self) -> &UniformQuantizer {
        &self.stage.quantizer
    }
}

impl LearningCode for DemocraticCode {
    fn kind(&self) -> CodeKind {
        CodeKind::Dq
    }

    fn config(&self) -> &CodeConfig {
        &self.cfg
    }

    fn dim(&self) -> usize {
        self.stage.frame.d()
    }

    fn lambda(&self) -> f64 {
        self.stage.frame.lambda()
    }

    fn direction_bits(&self) -> u64 {
        self.stage.bits()
    }

    fn encode_direction(&self, direction: &[f64], out: &mut BitWriter) -> Result<()> {
        let embedded = democratic_embed(&self.stage.frame, direction, &self.kashin)?;
        self.stage.encode(&embedded, out);
        Ok(())
    }

    fn decode_direction(&self, input: &mut BitReader<'_>) -> Result<Vec<f64>> {
        self.stage.decode(input)
    }
}

/// Near-democratic quantization (NDQ): embedding `Sᵀs`, range
/// `2√(ln(2D)/D)` for Hadamard frames and `2√(λ ln(2D)/D)` for orthonormal ones.
#[derive(Debug, Clone)]
pub struct NearDemocraticCode {
    cfg: CodeConfig,
    stage: EmbeddedStage,
}

impl NearDemocraticCode {
    pub fn new(cfg: CodeConfig, d: usize) -> Result<Self> {
        cfg.validate()?;
        let kind = cfg.frame_kind.unwrap_or(FrameKind::RandomizedHadamard);
        let big_d = match kind {
            FrameKind::RandomOrthonormal => rounded_dim(cfg.lambda, d),
            FrameKind::RandomizedHadamard => hadamard_dim(cfg.lambda, d),
        };
        let frame = Frame::new(kind, d, big_d, cfg.frame_seed)?;
        let range = ndq_range(kind, frame.lambda(), big_d);
        let stage = EmbeddedStage::new(&cfg, frame, range)?;
        Ok(NearDemocraticCode { cfg, stage })
    }

    pub fn frame(&self) -> &Frame {
        &self.stage.frame
    }

    pub fn quantizer(&self) -> &UniformQuantizer {
        &self.stage.quantizer
    }
}

/// High-probability bound on `‖Sᵀs‖∞` for a unit `s`.
pub fn ndq_range(kind: FrameKind, lambda: f64, big_d: usize) -> f64 {
    let big_d = big_d as f64;
    let base = (2.0 * big_d).ln() / big_d;
    match kind {
        FrameKind::RandomizedHadamard => 2.0 * base.sqrt(),
        FrameKind::RandomOrthonormal => 2.0 * (lambda * base).sqrt(),
    }
}

impl LearningCode for NearDemocraticCode {
    fn kind(&self) -> CodeKind {
        CodeKind::Ndq
    }

    fn config(&self) -> &CodeConfig {
        &self.cfg
    }

    fn dim(&self) -> usize {
        self.stage.frame.d()
    }

    fn lambda(&self) -> f64 {
        self.stage.frame.lambda()
    }

    fn direction_bits(&self) -> u64 {
        self.stage.bits()
    }

    fn encode_direction(&self, direction: &[f64], out: &mut BitWriter) -> Result<()> {
        let embedded = near_democratic_embed(&self.stage.frame, direction)?;
        self.stage.encode(&embedded, out);
        Ok(())
    }

    fn decode_direction(&self, input: &mut BitReader<'_>) -> Result<Vec<f64>> {
        self.stage.decode(input)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::codes::DesignMatrix;
    use crate::linalg::{dist_sq, norm2};
    use crate::quantizers::bits::BitWriter;
    use crate::rng::{rng_from_seed, unit_sphere};

    fn direction_error<C: LearningCode>(code: &C, s: &[f64]) -> f64 {
        let mut w = BitWriter::new();
        code.encode_direction(s, &mut w).unwrap();
        let bytes = w.into_bytes();
        let back = code.decode_direction(&mut BitReader::new(&bytes)).unwrap();
        dist_sq(&back, s).sqrt()
    }

    #[test]
    fn dq_square_frame_fine_budget() {
        let mut cfg = CodeConfig::new(10.0, 1.0, 0.0);
        cfg.frame_seed = 3;
        let code = DemocraticCode::new(cfg.clone(), 16).unwrap();
        let mut rng = rng_from_seed(8);
        for _ in 0..20 {
            let s = unit_sphere(&mut rng, 16);
            assert!(direction_error(&code, &s) <= 2f64.powf(1.0 - 10.0) * cfg.kashin.k_upper());
        }
    }

    #[test]
    fn dq_worst_case_at_lambda_two() {
        let mut cfg = CodeConfig::new(4.0, 1.0, 0.0);
        cfg.lambda = 2.0;
        cfg.frame_seed = 11;
        let code = DemocraticCode::new(cfg.clone(), 64).unwrap();
        assert_eq!(code.frame().big_d(), 128);
        assert_eq!(code.quantizer().levels(), 4);
        let mut rng = rng_from_seed(2);
        let bound = 2f64.powf(1.0 - 2.0) * cfg.kashin.k_upper();
        for _ in 0..25 {
            let s = unit_sphere(&mut rng, 64);
            assert!(direction_error(&code, &s) <= bound);
        }
    }

    #[test]
    fn ndq_noiseless_reconstruction() {
        let dm = DesignMatrix::identity(4).unwrap();
        let code = NearDemocraticCode::new(CodeConfig::new(12.0, 1.0, 0.0).with_seed(1), 4).unwrap();
        assert_eq!(code.frame().big_d(), 4);
        let h = 0.5f64.sqrt();
        let theta = [h, -h, h, h];
        let out = code.quantize(&theta, &dm).unwrap();
        assert!(dist_sq(&out.theta_tilde, &theta).sqrt() / norm2(&theta) <= 0.05);
    }

    #[test]
    fn ndq_accounting_at_d128() {
        let dm = DesignMatrix::identity(128).unwrap();
        let code = NearDemocraticCode::new(CodeConfig::new(2.0, 1.0, 0.0), 128).unwrap();
        let out = code.quantize(&vec![1.0; 128], &dm).unwrap();
        assert!(out.direction_bits <= 256);
        assert!(out.magnitude_bits <= 4);
    }

    #[test]
    fn sub_bit_embedding_prunes_to_floor_db() {
        // d = 100 → D = 128, one bit per dimension gives 100/128 < 1 per coordinate.
        let code = NearDemocraticCode::new(CodeConfig::new(1.0, 1.0, 0.0).with_seed(2), 100).unwrap();
        assert_eq!(code.direction_bits(), 100);
        let code = DemocraticCode::new(
            CodeConfig { lambda: 1.5, ..CodeConfig::new(0.5, 1.0, 0.0).with_seed(2) },
            20,
        )
        .unwrap();
        assert_eq!(code.direction_bits(), 10);
    }

    #[test]
    fn orthonormal_range_includes_lambda() {
        assert!((ndq_range(FrameKind::RandomOrthonormal, 2.0, 8) - 2.0 * (2.0 * 16f64.ln() / 8.0).sqrt()).abs() < 1e-12);
        assert!((ndq_range(FrameKind::RandomizedHadamard, 2.0, 8) - 2.0 * (16f64.ln() / 8.0).sqrt()).abs() < 1e-12);
    }
}
