//! Post-training quantization of two-layer scalar-output ReLU networks.
//!
//! A network `f(x) = Σⱼ wⱼ (W̃ⱼ·x + b̃ⱼ)₊ + b₂` is stored in the equivalent
//! form `Σⱼ sⱼ (Wⱼ·x + b₁ⱼ)₊ + b₂` with `Wⱼ = |wⱼ| W̃ⱼ`, `b₁ⱼ = |wⱼ| b̃ⱼ` and
//! `sⱼ = sign(wⱼ)`. The signs are sent exactly; `W`, `b₁` and `b₂` are
//! flattened row-major, cut into power-of-two blocks and each block is sent
//! with the NDQ code on a square randomized Hadamard frame.
//!
//! Binary container (little-endian):
//! `b"LMQNET01" | m: u64 | d: u64 | has_bias: u8 | W (m·d f64) | signs (m f64) | [b1 (m f64) | b2 (f64)]`.

use std::io::{Read, Write};
use std::path::Path;

use rayon::prelude::*;
use serde::Serialize;

use crate::codes::{build_code, CodeConfig, DesignMatrix};
use crate::error::{Error, Result};
use crate::frames::FrameKind;
use crate::linalg::{dot, norm2};
use crate::rng::{derive_seed, tag};

const MAGIC: &[u8; 8] = b"LMQNET01";

/// Bits spent per block on the integer radius `⌈b²⌉` of its magnitude codebook.
pub const BLOCK_HEADER_BITS: u64 = 32;

#[derive(Debug, Clone, PartialEq)]
pub struct TwoLayerNet {
    m: usize,
    d: usize,
    /// Row-major `m x d`.
    w1: Vec<f64>,
    signs: Vec<f64>,
    b1: Option<Vec<f64>>,
    b2: Option<f64>,
}

impl TwoLayerNet {
    /// Build from the reparametrized weights directly.
    pub fn new(
        m: usize,
        d: usize,
        w1: Vec<f64>,
        signs: Vec<f64>,
        b1: Option<Vec<f64>>,
        b2: Option<f64>,
    ) -> Result<Self> {
        if m == 0 || d == 0 {
            return Err(Error::InvalidDimensions(format!("network needs m, d >= 1, got {m}, {d}")));
        }
        expect_len(m * d, w1.len())?;
        expect_len(m, signs.len())?;
        if signs.iter().any(|s| s.abs() != 1.0) {
            return Err(Error::Config("second-layer signs must be +1 or -1".into()));
        }
        if let Some(b) = &b1 {
            expect_len(m, b.len())?;
        }
        Ok(TwoLayerNet { m, d, w1, signs, b1, b2 })
    }

    /// Reparametrize `Σⱼ wⱼ (W̃ⱼ·x + b̃ⱼ)₊ + b₂`.
    pub fn from_dense(
        m: usize,
        d: usize,
        w_hidden: &[f64],
        w_out: &[f64],
        b_hidden: Option<&[f64]>,
        b_out: Option<f64>,
    ) -> Result<Self> {
        expect_len(m * d, w_hidden.len())?;
        expect_len(m, w_out.len())?;
        let w1 = w_hidden
            .chunks_exact(d)
            .zip(w_out)
            .flat_map(|(row, w)| row.iter().map(move |v| v * w.abs()))
            .collect();
        let signs = w_out.iter().map(|w| if *w < 0.0 { -1.0 } else { 1.0 }).collect();
        let b1 = match b_hidden {
            Some(b) => {
                expect_len(m, b.len())?;
                Some(b.iter().zip(w_out).map(|(b, w)| b * w.abs()).collect())
            }
            None => None,
        };
        Self::new(m, d, w1, signs, b1, b_out)
    }

    pub fn m(&self) -> usize {
        self.m
    }

    pub fn d(&self) -> usize {
        self.d
    }

    pub fn w1(&self) -> &[f64] {
        &self.w1
    }

    pub fn signs(&self) -> &[f64] {
        &self.signs
    }

    pub fn b1(&self) -> Option<&[f64]> {
        self.b1.as_deref()
    }

    pub fn b2(&self) -> Option<f64> {
        self.b2
    }

    pub fn has_bias(&self) -> bool {
        self.b1.is_some() || self.b2.is_some()
    }

    /// `Σⱼ sⱼ max(Wⱼ·x + b₁ⱼ, 0) + b₂`.
    pub fn forward(&self, x: &[f64]) -> Result<f64> {
        expect_len(self.d, x.len())?;
        let hidden: f64 = self
            .w1
            .chunks_exact(self.d)
            .enumerate()
            .map(|(j, row)| {
                let bias = self.b1.as_ref().map_or(0.0, |b| b[j]);
                self.signs[j] * (dot(row, x) + bias).max(0.0)
            })
            .sum();
        Ok(hidden + self.b2.unwrap_or(0.0))
    }

    pub fn write_to(&self, out: &mut impl Write) -> Result<()> {
        out.write_all(MAGIC)?;
        out.write_all(&(self.m as u64).to_le_bytes())?;
        out.write_all(&(self.d as u64).to_le_bytes())?;
        out.write_all(&[self.has_bias() as u8])?;
        let mut put = |vals: &[f64]| -> Result<()> {
            for v in vals {
                out.write_all(&v.to_le_bytes())?;
            }
            Ok(())
        };
        put(&self.w1)?;
        put(&self.signs)?;
        if self.has_bias() {
            put(self.b1.as_deref().unwrap_or(&vec![0.0; self.m]))?;
            put(&[self.b2.unwrap_or(0.0)])?;
        }
        Ok(())
    }

    pub fn read_from(input: &mut impl Read) -> Result<Self> {
        let mut magic = [0u8; 8];
        input.read_exact(&mut magic)?;
        if &magic != MAGIC {
            return Err(Error::Parse("not a network file (bad magic)".into()));
        }
        let mut word = [0u8; 8];
        let mut read_u64 = |input: &mut dyn Read| -> Result<u64> {
            input.read_exact(&mut word)?;
            Ok(u64::from_le_bytes(word))
        };
        let m = read_u64(input)? as usize;
        let d = read_u64(input)? as usize;
        let mut flag = [0u8; 1];
        input.read_exact(&mut flag)?;
        let read_f64s = |input: &mut dyn Read, n: usize| -> Result<Vec<f64>> {
            let mut buf = vec![0u8; n * 8];
            input.read_exact(&mut buf)?;
            Ok(buf.chunks_exact(8).map(|b| f64::from_le_bytes(b.try_into().expect("8 bytes"))).collect())
        };
        let w1 = read_f64s(input, m.checked_mul(d).ok_or_else(|| Error::Parse("size overflow".into()))?)?;
        let signs = read_f64s(input, m)?;
        let (b1, b2) = match flag[0] {
            0 => (None, None),
            1 => (Some(read_f64s(input, m)?), Some(read_f64s(input, 1)?[0])),
            other => return Err(Error::Parse(format!("bad has_bias flag {other}"))),
        };
        Self::new(m, d, w1, signs, b1, b2)
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        let mut file = std::io::BufWriter::new(std::fs::File::create(path)?);
        self.write_to(&mut file)?;
        file.flush()?;
        Ok(())
    }

    pub fn load(path: &Path) -> Result<Self> {
        Self::read_from(&mut std::io::BufReader::new(std::fs::File::open(path)?))
    }
}

fn expect_len(expected: usize, actual: usize) -> Result<()> {
    if expected != actual {
        return Err(Error::DimensionMismatch { expected, actual });
    }
    Ok(())
}

/// Powers of two in the binary expansion of `n`, largest first.
pub fn power2_partition(n: usize) -> Vec<usize> {
    (0..usize::BITS).rev().map(|k| 1usize << k).filter(|p| n & p != 0).collect()
}

/// Bit and error accounting for one quantized network.
#[derive(Debug, Clone, Default, PartialEq, Serialize)]
pub struct NnReport {
    pub blocks: usize,
    pub direction_bits: u64,
    pub magnitude_bits: u64,
    pub header_bits: u64,
    pub sign_bits: u64,
    pub total_bits: u64,
    pub weight_frobenius_error: f64,
    pub b1_l1_error: f64,
    pub b2_error: f64,
    /// How block norms are carried; they are not part of the scalar NDQ analysis.
    pub scale_scheme: &'static str,
}

#[derive(Default)]
struct BlockTally {
    direction_bits: u64,
    magnitude_bits: u64,
    header_bits: u64,
    blocks: usize,
}

/// Quantize one flat parameter vector block by block.
fn quantize_flat(values: &[f64], bits: f64, seed: u64, stream: &str) -> Result<(Vec<f64>, BlockTally)> {
    let mut offsets = Vec::new();
    let mut start = 0;
    for len in power2_partition(values.len()) {
        offsets.push((start, len));
        start += len;
    }
    let results = offsets
        .par_iter()
        .enumerate()
        .map(|(i, &(start, len))| {
            quantize_block(&values[start..start + len], bits, derive_seed(seed, &[tag(stream), i as u64]))
        })
        .collect::<Result<Vec<_>>>()?;
    let mut out = Vec::with_capacity(values.len());
    let mut tally = BlockTally::default();
    for (block, direction_bits, magnitude_bits) in results {
        out.extend(block);
        tally.direction_bits += direction_bits;
        tally.magnitude_bits += magnitude_bits;
        tally.header_bits += BLOCK_HEADER_BITS;
        tally.blocks += 1;
    }
    Ok((out, tally))
}

/// NDQ on a power-of-two block. The block norm is carried by the magnitude
/// codebook with radius `c² = ⌈‖v‖²/n⌉` (sent in the block header) and
/// spacing `2^{−B}/√n`, so the scale resolution tracks the direction budget.
fn quantize_block(block: &[f64], bits: f64, seed: u64) -> Result<(Vec<f64>, u64, u64)> {
    let n = block.len();
    let b_sq = norm2(block).powi(2) / n as f64;
    let c_sq = b_sq.ceil();
    if c_sq == 0.0 {
        return Ok((vec![0.0; n], 0, 0));
    }
    let mut cfg = CodeConfig::new(bits, c_sq.sqrt(), 0.0).with_seed(seed);
    cfg.frame_kind = Some(FrameKind::RandomizedHadamard);
    cfg.magnitude_step = Some((-bits).exp2() / (n as f64).sqrt());
    let code = build_code("ndq", &cfg, n)?;
    let out = code.quantize(block, &DesignMatrix::identity(n)?)?;
    Ok((out.theta_tilde, out.direction_bits, out.magnitude_bits))
}

/// Quantize `W`, `b₁` and `b₂` at `bits` per parameter; signs stay exact.
pub fn quantize_net(net: &TwoLayerNet, bits: f64, seed: u64) -> Result<(TwoLayerNet, NnReport)> {
    if !(bits > 0.0) || !bits.is_finite() {
        return Err(Error::InvalidBudget(bits));
    }
    let (w1, mut tally) = quantize_flat(&net.w1, bits, seed, "w1")?;
    let b1 = match &net.b1 {
        Some(b) => {
            let (q, t) = quantize_flat(b, bits, seed, "b1")?;
            tally.direction_bits += t.direction_bits;
            tally.magnitude_bits += t.magnitude_bits;
            tally.header_bits += t.header_bits;
            tally.blocks += t.blocks;
            Some(q)
        }
        None => None,
    };
    let b2 = match net.b2 {
        Some(b) => {
            let (q, t) = quantize_flat(&[b], bits, seed, "b2")?;
            tally.direction_bits += t.direction_bits;
            tally.magnitude_bits += t.magnitude_bits;
            tally.header_bits += t.header_bits;
            tally.blocks += t.blocks;
            Some(q[0])
        }
        None => None,
    };
    let quantized = TwoLayerNet::new(net.m, net.d, w1, net.signs.clone(), b1, b2)?;
    let (b1_l1_error, b2_error) = bias_errors(net, &quantized);
    let sign_bits = net.m as u64;
    let report = NnReport {
        blocks: tally.blocks,
        direction_bits: tally.direction_bits,
        magnitude_bits: tally.magnitude_bits,
        header_bits: tally.header_bits,
        sign_bits,
        total_bits: tally.direction_bits + tally.magnitude_bits + tally.header_bits + sign_bits,
        weight_frobenius_error: frobenius_distance(net, &quantized),
        b1_l1_error,
        b2_error,
        scale_scheme: "per-block magnitude codebook, radius ceil(|v|^2/n), step 2^-B/sqrt(n)",
    };
    Ok((quantized, report))
}

fn frobenius_distance(a: &TwoLayerNet, b: &TwoLayerNet) -> f64 {
    a.w1.iter().zip(&b.w1).map(|(x, y)| (x - y).powi(2)).sum::<f64>().sqrt()
}

fn bias_errors(a: &TwoLayerNet, b: &TwoLayerNet) -> (f64, f64) {
    let zeros = vec![0.0; a.m];
    let b1a = a.b1.as_deref().unwrap_or(&zeros);
    let b1b = b.b1.as_deref().unwrap_or(&zeros);
    let l1 = b1a.iter().zip(b1b).map(|(x, y)| (x - y).abs()).sum();
    (l1, (a.b2.unwrap_or(0.0) - b.b2.unwrap_or(0.0)).abs())
}

/// `√m‖W − Ŵ‖_F‖x‖₂ + ‖b₁ − b̂₁‖₁ + |b₂ − b̂₂|`, an upper bound on
/// `|f̂(x) − f(x)|` when both nets share their second-layer signs.
pub fn output_error_bound(net: &TwoLayerNet, quantized: &TwoLayerNet, x: &[f64]) -> Result<f64> {
    expect_len(net.m, quantized.m)?;
    expect_len(net.d, quantized.d)?;
    expect_len(net.d, x.len())?;
    if net.signs != quantized.signs {
        return Err(Error::Config("networks differ in their second-layer signs".into()));
    }
    let (b1, b2) = bias_errors(net, quantized);
    Ok((net.m as f64).sqrt() * frobenius_distance(net, quantized) * norm2(x) + b1 + b2)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::{gaussian_vec, rng_from_seed, unit_sphere};
    use proptest::prelude::*;

    fn random_net(m: usize, d: usize, seed: u64, bias: bool) -> TwoLayerNet {
        let mut rng = rng_from_seed(seed);
        let wh = gaussian_vec(&mut rng, m * d);
        let wo = gaussian_vec(&mut rng, m);
        let bh = gaussian_vec(&mut rng, m);
        if bias {
            TwoLayerNet::from_dense(m, d, &wh, &wo, Some(&bh), Some(0.3)).unwrap()
        } else {
            TwoLayerNet::from_dense(m, d, &wh, &wo, None, None).unwrap()
        }
    }

    #[test]
    fn forward_examples() {
        let zero = TwoLayerNet::new(2, 3, vec![0.0; 6], vec![1.0, -1.0], None, None).unwrap();
        assert_eq!(zero.forward(&[1.0, 2.0, 3.0]).unwrap(), 0.0);
        let one = TwoLayerNet::new(1, 2, vec![1.0, 0.0], vec![1.0], None, None).unwrap();
        assert_eq!(one.forward(&[2.0, 5.0]).unwrap(), 2.0);
        assert_eq!(one.forward(&[-2.0, 5.0]).unwrap(), 0.0);
        let pair = TwoLayerNet::new(2, 2, vec![1.0, 0.0, 1.0, 0.0], vec![1.0, -1.0], None, None).unwrap();
        assert_eq!(pair.forward(&[3.0, 0.0]).unwrap(), 0.0);
        assert!(matches!(one.forward(&[1.0]), Err(Error::DimensionMismatch { .. })));
    }

    #[test]
    fn reparametrization_preserves_function() {
        let mut rng = rng_from_seed(3);
        let (m, d) = (5, 3);
        let wh = gaussian_vec(&mut rng, m * d);
        let wo = gaussian_vec(&mut rng, m);
        let bh = gaussian_vec(&mut rng, m);
        let net = TwoLayerNet::from_dense(m, d, &wh, &wo, Some(&bh), Some(-0.7)).unwrap();
        for _ in 0..20 {
            let x = gaussian_vec(&mut rng, d);
            let direct: f64 = (0..m)
                .map(|j| wo[j] * (dot(&wh[j * d..(j + 1) * d], &x) + bh[j]).max(0.0))
                .sum::<f64>()
                - 0.7;
            assert!((net.forward(&x).unwrap() - direct).abs() < 1e-12);
        }
    }

    #[test]
    fn partition_examples() {
        assert_eq!(power2_partition(12), vec![8, 4]);
        assert_eq!(power2_partition(1), vec![1]);
        assert_eq!(power2_partition(37), vec![32, 4, 1]);
    }

    #[test]
    fn partition_exhaustive() {
        for n in 1..=(1usize << 16) {
            let parts = power2_partition(n);
            assert_eq!(parts.iter().sum::<usize>(), n);
            assert!(parts.windows(2).all(|w| w[0] > w[1]));
            assert!(parts.iter().all(|p| p.is_power_of_two()));
        }
    }

    #[test]
    fn high_budget_is_near_lossless() {
        let net = random_net(16, 8, 1, true);
        let (q, _) = quantize_net(&net, 16.0, 5).unwrap();
        let mut rng = rng_from_seed(9);
        for _ in 0..100 {
            let x = unit_sphere(&mut rng, 8);
            let (f, g) = (net.forward(&x).unwrap(), q.forward(&x).unwrap());
            assert!((f - g).abs() <= 1e-2 * f.abs().max(1e-12) || (f - g).abs() < 1e-9, "{f} vs {g}");
        }
    }

    #[test]
    fn zero_network_stays_zero() {
        let net = TwoLayerNet::new(3, 5, vec![0.0; 15], vec![1.0; 3], Some(vec![0.0; 3]), Some(0.0)).unwrap();
        let (q, report) = quantize_net(&net, 3.0, 1).unwrap();
        assert_eq!(q, net);
        assert_eq!(report.weight_frobenius_error, 0.0);
    }

    #[test]
    fn single_block_accounting() {
        let net = random_net(4, 4, 2, false);
        for b in 1..=6 {
            let (_, report) = quantize_net(&net, b as f64, 0).unwrap();
            assert_eq!(report.blocks, 1);
            assert_eq!(report.direction_bits, 16 * b);
            assert_eq!(report.sign_bits, 4);
        }
    }

    #[test]
    fn deterministic_under_seed() {
        let net = random_net(6, 7, 4, true);
        assert_eq!(quantize_net(&net, 3.0, 8).unwrap(), quantize_net(&net, 3.0, 8).unwrap());
    }

    #[test]
    fn frobenius_error_shrinks_with_budget() {
        let net = random_net(12, 10, 6, false);
        let errors: Vec<f64> =
            (1..=10).map(|b| quantize_net(&net, b as f64, 2).unwrap().1.weight_frobenius_error).collect();
        for w in errors.windows(2) {
            assert!(w[1] <= 1.05 * w[0], "{errors:?}");
        }
    }

    #[test]
    fn bound_examples() {
        let net = random_net(4, 3, 7, true);
        assert_eq!(output_error_bound(&net, &net, &[1.0, 2.0, 3.0]).unwrap(), 0.0);
        let (q, report) = quantize_net(&net, 2.0, 1).unwrap();
        assert_eq!(output_error_bound(&net, &q, &[0.0; 3]).unwrap(), report.b1_l1_error + report.b2_error);
    }

    #[test]
    fn binary_round_trip() {
        for bias in [false, true] {
            let net = random_net(3, 4, 11, bias);
            let mut buf = Vec::new();
            net.write_to(&mut buf).unwrap();
            assert_eq!(buf.len(), 8 + 16 + 1 + 8 * (12 + 3 + if bias { 4 } else { 0 }));
            assert_eq!(TwoLayerNet::read_from(&mut buf.as_slice()).unwrap(), net);
        }
        assert!(matches!(TwoLayerNet::read_from(&mut &b"NOTANET0"[..]), Err(Error::Parse(_))));
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(48))]
        #[test]
        fn output_error_within_bound(seed in 0u64..1000, m in 1usize..40, d in 1usize..12, b in 1u32..6, bias: bool) {
            let net = random_net(m, d, seed, bias);
            let (q, _) = quantize_net(&net, b as f64, seed).unwrap();
            let mut rng = rng_from_seed(seed ^ 0xabc);
            for _ in 0..20 {
                let x = gaussian_vec(&mut rng, d);
                let gap = (q.forward(&x).unwrap() - net.forward(&x).unwrap()).abs();
                prop_assert!(gap <= output_error_bound(&net, &q, &x).unwrap() + 1e-9);
            }
        }
    }
}
