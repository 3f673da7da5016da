//! Random linear network coding over GF(2⁸).
//!
//! A generation of `f` equal-length packets is sent as random linear
//! combinations. Any `f` combinations with linearly independent coefficient
//! vectors recover the generation by Gauss-Jordan elimination.

pub mod gf256;

use rand::{Rng, RngCore};

use crate::error::{Error, Result};
pub use gf256::{gf_mul, mul_slow, Gf256};

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Generation {
    packets: Vec<Vec<u8>>,
}

impl Generation {
    pub fn new(packets: Vec<Vec<u8>>) -> Result<Self> {
        if packets.is_empty() {
            return Err(Error::Empty("generation"));
        }
        let len = packets[0].len();
        if packets.iter().any(|p| p.len() != len) {
            return Err(Error::PayloadLength);
        }
        Ok(Self { packets })
    }

    /// `size` packets of `packet_len` uniformly random bytes.
    pub fn random<R: RngCore>(size: usize, packet_len: usize, rng: &mut R) -> Result<Self> {
        let packets = (0..size)
            .map(|_| {
                let mut p = vec![0u8; packet_len];
                rng.fill_bytes(&mut p);
                p
            })
            .collect();
        Self::new(packets)
    }

    pub fn size(&self) -> usize {
        self.packets.len()
    }

    pub fn packet_len(&self) -> usize {
        self.packets[0].len()
    }

    pub fn packets(&self) -> &[Vec<u8>] {
        &self.packets
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct CodedPacket {
    pub coefficients: Vec<Gf256>,
    pub payload: Vec<u8>,
}

/// Combines the generation with the given coefficients.
pub fn encode_with(gen: &Generation, coefficients: &[Gf256]) -> Result<CodedPacket> {
    if coefficients.len() != gen.size() {
        return Err(Error::Dimension {
            expected: gen.size(),
            got: coefficients.len(),
        });
    }
    let mut payload = vec![0u8; gen.packet_len()];
    for (c, p) in coefficients.iter().zip(gen.packets()) {
        gf256::mul_add_slice(&mut payload, p, *c);
    }
    Ok(CodedPacket {
        coefficients: coefficients.to_vec(),
        payload,
    })
}

/// One coded packet with coefficients drawn uniformly from GF(2⁸).
pub fn encode<R: Rng + ?Sized>(gen: &Generation, rng: &mut R) -> CodedPacket {
    let coefficients: Vec<Gf256> = (0..gen.size()).map(|_| Gf256(rng.random())).collect();
    encode_with(gen, &coefficients).expect("coefficient count matches generation")
}

/// Rank over GF(2⁸) of the given coefficient rows.
pub fn rank(rows: &[Vec<Gf256>]) -> Result<usize> {
    if rows.is_empty() {
        return Ok(0);
    }
    let width = rows[0].len();
    if rows.iter().any(|r| r.len() != width) {
        return Err(Error::Dimension {
            expected: width,
            got: 0,
        });
    }
    let mut m: Vec<Vec<Gf256>> = rows.to_vec();
    let mut r = 0;
    for col in 0..width {
        let Some(p) = (r..m.len()).find(|&k| !m[k][col].is_zero()) else {
            continue;
        };
        m.swap(r, p);
        let inv = m[r][col].inverse().expect("pivot is nonzero");
        for k in r + 1..m.len() {
            let factor = m[k][col] * inv;
            if factor.is_zero() {
                continue;
            }
            for c in col..width {
                let v = m[r][c];
                m[k][c] += factor * v;
            }
        }
        r += 1;
        if r == m.len() {
            break;
        }
    }
    Ok(r)
}

/// Recovers the generation from coded packets by Gauss-Jordan elimination.
pub fn decode(packets: &[CodedPacket], generation_size: usize) -> Result<Generation> {
    if packets.is_empty() {
        return Err(Error::Empty("coded packets"));
    }
    let len = packets[0].payload.len();
    if packets.iter().any(|p| p.payload.len() != len) {
        return Err(Error::PayloadLength);
    }
    if let Some(p) = packets
        .iter()
        .find(|p| p.coefficients.len() != generation_size)
    {
        return Err(Error::Dimension {
            expected: generation_size,
            got: p.coefficients.len(),
        });
    }
    let mut coeffs: Vec<Vec<Gf256>> = packets.iter().map(|p| p.coefficients.clone()).collect();
    let mut data: Vec<Vec<u8>> = packets.iter().map(|p| p.payload.clone()).collect();

    let mut r = 0;
    for col in 0..generation_size {
        let Some(p) = (r..coeffs.len()).find(|&k| !coeffs[k][col].is_zero()) else {
            continue;
        };
        coeffs.swap(r, p);
        data.swap(r, p);
        let inv = coeffs[r][col].inverse().expect("pivot is nonzero");
        for c in coeffs[r].iter_mut() {
            *c *= inv;
        }
        gf256::scale_slice(&mut data[r], inv);
        let (pivot_c, pivot_d) = (coeffs[r].clone(), data[r].clone());
        for k in 0..coeffs.len() {
            if k == r {
                continue;
            }
            let factor = coeffs[k][col];
            if factor.is_zero() {
                continue;
            }
            for (c, pc) in coeffs[k].iter_mut().zip(&pivot_c) {
                *c += factor * *pc;
            }
            gf256::mul_add_slice(&mut data[k], &pivot_d, factor);
        }
        r += 1;
    }
    if r < generation_size {
        return Err(Error::InsufficientRank {
            rank: r,
            needed: generation_size,
        });
    }
    // Pivot columns were visited in order, so row `c` now holds packet `c`.
    data.truncate(generation_size);
    Generation::new(data)
}

/// `Π_{j=1..n} (1 − q^{−j})` with `q = 256`: the probability that an
/// `n × n` matrix with uniform GF(2⁸) entries is invertible.
pub fn full_rank_probability(n: usize) -> f64 {
    (1..=n as i32).map(|j| 1.0 - 256f64.powi(-j)).product()
}

/// How many of `trials` random `n × n` coefficient matrices are invertible.
pub fn count_full_rank<R: Rng + ?Sized>(n: usize, trials: usize, rng: &mut R) -> usize {
    (0..trials)
        .filter(|_| {
            let rows: Vec<Vec<Gf256>> = (0..n)
                .map(|_| (0..n).map(|_| Gf256(rng.random())).collect())
                .collect();
            rank(&rows).expect("rows are square") == n
        })
        .count()
}

/// Encodes a random generation, collects coded packets until they span it
/// and reports whether decoding recovers the source exactly.
pub fn round_trip<R: RngCore>(size: usize, packet_len: usize, rng: &mut R) -> Result<bool> {
    let gen = Generation::random(size, packet_len, rng)?;
    let mut packets: Vec<CodedPacket> = Vec::with_capacity(size);
    loop {
        packets.push(encode(&gen, rng));
        if packets.len() >= size {
            let rows: Vec<Vec<Gf256>> = packets.iter().map(|p| p.coefficients.clone()).collect();
            if rank(&rows)? == size {
                break;
            }
        }
    }
    Ok(decode(&packets, size)? == gen)
}

/// Independent packet erasures with a fixed loss probability.
///
/// How per-user rates map onto erasure probabilities is left to the caller.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ErasureChannel {
    pub loss_probability: f64,
}

impl ErasureChannel {
    pub fn transmit<R: Rng + ?Sized>(
        &self,
        packets: &[CodedPacket],
        rng: &mut R,
    ) -> Vec<CodedPacket> {
        packets
            .iter()
            .filter(|_| rng.random::<f64>() >= self.loss_probability)
            .cloned()
            .collect()
    }
}
