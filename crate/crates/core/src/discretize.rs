//! Entropy-parameter discretization to CDF table indices.
//!
//! The parameter network emits 16-bit fixed-point values with step `2^-6`.
//! Standard deviations are mapped to 65 levels: 9 binary-logarithmic major
//! levels between 0.125 and 32, each split into 8 linear minor steps. Means
//! split into an integer part (applied as a symbol shift) and a 6-bit
//! fractional index. Neither mapping executes floating point.

use serde::{Deserialize, Serialize};

use crate::{Error, Result};

/// Quantized sigma clip range, `[0.125, 32]` at step `2^-6`.
pub const SIGMA_Q_MIN: i32 = 8;
pub const SIGMA_Q_MAX: i32 = 2048;
/// Number of sigma levels (`8 * 8 + 1`).
pub const SIGMA_LEVELS: usize = 65;
/// Number of mean fraction levels (one per representable `2^-6` step).
pub const MU_LEVELS: usize = 64;
/// `log2` of the inverse parameter step.
pub const PARAM_STEP_LOG2: u32 = 6;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DiscretizationConfig {
    pub sigma_min: f32,
    pub sigma_max: f32,
    pub major_levels: u32,
    pub minors_per_major: u32,
    pub param_step: f32,
    pub sigma_q_min: i32,
    pub sigma_q_max: i32,
    pub mu_levels: u32,
}

impl Default for DiscretizationConfig {
    fn default() -> Self {
        Self {
            sigma_min: 0.125,
            sigma_max: 32.0,
            major_levels: 9,
            minors_per_major: 8,
            param_step: 1.0 / 64.0,
            sigma_q_min: SIGMA_Q_MIN,
            sigma_q_max: SIGMA_Q_MAX,
            mu_levels: MU_LEVELS as u32,
        }
    }
}

impl DiscretizationConfig {
    /// Only the fixed setting is supported; anything else is rejected.
    pub fn validate(&self) -> Result<()> {
        if *self != Self::default() {
            return Err(Error::InvalidArgument(
                "unsupported discretization config".into(),
            ));
        }
        Ok(())
    }
}

/// Combined sigma index with its major/minor decomposition.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct SigmaIndex {
    pub major: u8,
    /// Minor index in `0..=8`; 8 aliases the next major level.
    pub minor: u8,
}

impl SigmaIndex {
    /// `8 * major + minor`, in `0..=64`.
    #[inline]
    pub fn combined(self) -> u8 {
        8 * self.major + self.minor
    }

    /// Canonical decomposition of a combined index.
    pub fn from_combined(idx: u8) -> Result<Self> {
        if idx as usize >= SIGMA_LEVELS {
            return Err(Error::Range(alloc::format!("sigma index {idx} > 64")));
        }
        Ok(Self {
            major: idx / 8,
            minor: idx % 8,
        })
    }
}

/// Mean split into `floor(mu)` and a fraction index `0..64`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct MuIndex {
    pub floor_mu: i32,
    pub fraction: u8,
}

/// `floor(log2(q))` through a fixed 5-step branch-free ladder.
#[inline]
pub fn int_log2(q: i32) -> Result<u32> {
    if q <= 0 {
        return Err(Error::Domain(alloc::format!("log2 of non-positive {q}")));
    }
    Ok(int_log2_unchecked(q as u32))
}

/// Ladder body; `x` must be non-zero.
#[inline(always)]
fn int_log2_unchecked(mut x: u32) -> u32 {
    let mut r = 0;
    let s = ((x > 0xFFFF) as u32) << 4;
    x >>= s;
    r |= s;
    let s = ((x > 0xFF) as u32) << 3;
    x >>= s;
    r |= s;
    let s = ((x > 0xF) as u32) << 2;
    x >>= s;
    r |= s;
    let s = ((x > 0x3) as u32) << 1;
    x >>= s;
    r |= s;
    r | (x >> 1)
}

/// Binary logarithm discretization with interpolation; total over `i16`.
#[inline]
pub fn sigma_index(q: i16) -> SigmaIndex {
    let q = (q as i32).clamp(SIGMA_Q_MIN, SIGMA_Q_MAX) as u32;
    let b = int_log2_unchecked(q);
    let e1 = 1u32 << b;
    let e2 = 1u32 << (b - 3);
    // round-up division by the power of two e2
    let minor = (q - e1 + e2 - 1) >> (b - 3);
    SigmaIndex {
        major: (b - 3) as u8,
        minor: minor as u8,
    }
}

/// Combined sigma index for a batch; same arithmetic as [`sigma_index`],
/// laid out so the loop vectorizes.
pub fn sigma_index_batch(q: &[i16], out: &mut [u8]) {
    for (o, &v) in out.iter_mut().zip(q) {
        let q = (v as i32).clamp(SIGMA_Q_MIN, SIGMA_Q_MAX) as u32;
        let b = int_log2_unchecked(q);
        let k = b - 3;
        let minor = (q - (1 << b) + (1 << k) - 1) >> k;
        *o = (8 * k + minor) as u8;
    }
}

/// Reconstructed `sigma_min * (2^i + j * 2^(i-3))`, exact in `f64`.
///
/// Offline and test use only.
pub fn sigma_reconstruct(idx: SigmaIndex) -> f64 {
    // 0.125 * 2^i * (1 + j/8) = (8 + j) * 2^i / 64
    ((8u64 + idx.minor as u64) << idx.major) as f64 / 64.0
}

/// Reconstructed sigma for a combined index.
pub fn sigma_level(idx: u8) -> Result<f64> {
    SigmaIndex::from_combined(idx).map(sigma_reconstruct)
}

/// Mean discretization: floor division by 64 and the remainder.
#[inline]
pub fn mu_index(q: i16) -> MuIndex {
    let q = q as i32;
    MuIndex {
        floor_mu: q >> PARAM_STEP_LOG2,
        fraction: (q & 63) as u8,
    }
}

/// Reconstructed levels `0..=63` used by comparison-based discretization.
pub fn comparison_table() -> [f32; SIGMA_LEVELS - 1] {
    let mut t = [0.0; SIGMA_LEVELS - 1];
    for (i, v) in t.iter_mut().enumerate() {
        *v = sigma_level(i as u8).expect("index below 64") as f32;
    }
    t
}

/// Comparison-based discretization: the number of table levels strictly
/// below the (clipped, dequantized) sigma.
pub fn sigma_index_oracle(q: i16, table: &[f32; SIGMA_LEVELS - 1]) -> u8 {
    let sigma = (q as i32).clamp(SIGMA_Q_MIN, SIGMA_Q_MAX) as f32 / 64.0;
    table.iter().map(|&t| (sigma > t) as u8).sum()
}

/// Comparison-based discretization, vectorized over the table.
pub fn sigma_index_compare_batch(q: &[i16], table: &[f32; SIGMA_LEVELS - 1], out: &mut [u8]) {
    for (o, &v) in out.iter_mut().zip(q) {
        let sigma = (v as i32).clamp(SIGMA_Q_MIN, SIGMA_Q_MAX) as f32 / 64.0;
        let mut count = 0u32;
        for &t in table {
            count += (sigma > t) as u32;
        }
        *o = count as u8;
    }
}

/// Comparison-based discretization as a scalar scan with early exit.
pub fn sigma_index_compare_loop(q: &[i16], table: &[f32; SIGMA_LEVELS - 1], out: &mut [u8]) {
    for (o, &v) in out.iter_mut().zip(q) {
        let sigma = (v as i32).clamp(SIGMA_Q_MIN, SIGMA_Q_MAX) as f32 / 64.0;
        let mut idx = 0;
        while idx < table.len() && sigma > table[idx] {
            idx += 1;
        }
        *o = idx as u8;
    }
}
