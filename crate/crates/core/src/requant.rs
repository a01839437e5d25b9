//! Offline-constrained dyadic requantization.
//!
//! A layer's 32-bit accumulation `acc` is mapped back to `B` bits with
//!
//! ```text
//! out = clip(rid(m0 * clip(acc + p_u, q_min, q_max), n), -2^(B-1), 2^(B-1)-1)
//! ```
//!
//! where `n = 32 - B`, `m0 = floor(2^n * m)` and the clip bounds are the
//! largest range whose rescaled values still fit the output grid. Clipping
//! first bounds `|m0 * q| <= 2^31`, so the multiply never leaves 32 bits.

use alloc::format;
use alloc::vec::Vec;

use serde::{Deserialize, Serialize};

use crate::quant::{QuantizedTensor, QuantizerSpec};
use crate::round::{rid, round_f64};
use crate::{Error, Result};

/// Dyadic constants for one sign branch of the requantization.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DyadicBranch {
    /// Real scale factor this branch approximates (offline only).
    pub m: f32,
    pub m0: i32,
    /// Pre-scaling zero point `round(z / m)`.
    pub p_u: i32,
    pub q_min: i32,
    pub q_max: i32,
}

impl DyadicBranch {
    fn derive(m: f64, z_next: i32, bits: u32, shift: u32) -> Result<Self> {
        let pos_limit = ((1i64 << (bits - 1)) - 1) as f64;
        let neg_limit = -((1i64 << (bits - 1)) as f64);
        let m0 = libm::floor(m * (1u64 << shift) as f64) as i64;
        let mut q_max = (libm::floor(pos_limit / m) as i64).min(i32::MAX as i64);
        let mut q_min = (libm::ceil(neg_limit / m) as i64).max(i32::MIN as i64);
        if q_min > q_max {
            return Err(Error::DegenerateRequant { m: m as f32, bits });
        }
        // Float division can land a hair past an integer boundary; pull the
        // bounds in until the products are provably in range.
        while m0 * q_max > i32::MAX as i64 {
            q_max -= 1;
        }
        while m0 * q_min < i32::MIN as i64 {
            q_min += 1;
        }
        let p_u = round_f64(z_next as f64 / m);
        if !(p_u >= i32::MIN as f64 && p_u <= i32::MAX as f64) {
            return Err(Error::InvalidArgument(format!(
                "pre-scaling zero point {p_u} exceeds 32 bits"
            )));
        }
        Ok(Self {
            m: m as f32,
            m0: m0 as i32,
            p_u: p_u as i32,
            q_min: q_min as i32,
            q_max: q_max as i32,
        })
    }

    #[inline]
    fn apply(&self, acc: i32, shift: u32, lo: i32, hi: i32) -> i32 {
        let q = acc.saturating_add(self.p_u).clamp(self.q_min, self.q_max);
        rid(self.m0 * q, shift).clamp(lo, hi)
    }
}

/// Per-channel requantization constants.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RequantParams {
    pub bit_width: u32,
    /// Shift `n = 32 - B`, shared by both branches.
    pub shift: u32,
    pub positive: DyadicBranch,
    /// Folded Leaky-ReLU branch used for negative accumulations.
    pub negative: Option<NegativeBranch>,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct NegativeBranch {
    pub slope: f32,
    pub branch: DyadicBranch,
}

impl RequantParams {
    pub fn m(&self) -> f32 {
        self.positive.m
    }

    pub fn m0(&self) -> i32 {
        self.positive.m0
    }

    pub fn p_u(&self) -> i32 {
        self.positive.p_u
    }

    pub fn q_min(&self) -> i32 {
        self.positive.q_min
    }

    pub fn q_max(&self) -> i32 {
        self.positive.q_max
    }

    fn out_range(&self) -> (i32, i32) {
        let half = 1i64 << (self.bit_width - 1);
        (-half as i32, (half - 1) as i32)
    }

    /// Requantize one accumulation through the positive branch.
    #[inline]
    pub fn requantize_one(&self, acc: i32) -> i32 {
        let (lo, hi) = self.out_range();
        self.positive.apply(acc, self.shift, lo, hi)
    }

    /// Requantize one accumulation, selecting the branch by the sign of
    /// `acc` before the zero point is added.
    #[inline]
    pub fn requantize_leaky_one(&self, acc: i32) -> Result<i32> {
        let neg = self
            .negative
            .as_ref()
            .ok_or_else(|| Error::Contract("leaky requantization without negative branch".into()))?;
        let (lo, hi) = self.out_range();
        Ok(if acc >= 0 {
            self.positive.apply(acc, self.shift, lo, hi)
        } else {
            neg.branch.apply(acc, self.shift, lo, hi)
        })
    }

    /// Re-validate constants loaded from outside (overflow bound, shift).
    pub fn check(&self) -> Result<()> {
        for b in core::iter::once(&self.positive).chain(self.negative.as_ref().map(|n| &n.branch))
        {
            let hi = b.m0 as i64 * b.q_max as i64;
            let lo = b.m0 as i64 * b.q_min as i64;
            if b.m0 < 0 || hi > i32::MAX as i64 || lo < i32::MIN as i64 || b.q_min > b.q_max {
                return Err(Error::InvalidArgument(format!(
                    "requant constants m0={} q=[{}, {}] can overflow 32 bits",
                    b.m0, b.q_min, b.q_max
                )));
            }
        }
        if !matches!(self.bit_width, 8 | 16) || self.shift != 32 - self.bit_width {
            return Err(Error::InvalidArgument(format!(
                "shift {} does not match bit width {}",
                self.shift, self.bit_width
            )));
        }
        Ok(())
    }
}

/// Derive requantization constants from a real scale factor `m`.
pub fn derive_requant_from_m(
    m: f32,
    z_next: i32,
    bits: u32,
    leaky_slope: Option<f32>,
) -> Result<RequantParams> {
    if !(m.is_finite() && m > 0.0) {
        return Err(Error::InvalidScale(m));
    }
    if !matches!(bits, 8 | 16) {
        return Err(Error::InvalidArgument(format!(
            "requant bit width {bits} not in {{8, 16}}"
        )));
    }
    if m as f64 >= (1u64 << (bits - 1)) as f64 {
        return Err(Error::DegenerateRequant { m, bits });
    }
    let shift = 32 - bits;
    let positive = DyadicBranch::derive(m as f64, z_next, bits, shift)?;
    let negative = match leaky_slope {
        None => None,
        Some(slope) => {
            if !(slope > 0.0 && slope <= 1.0) {
                return Err(Error::InvalidArgument(format!(
                    "leaky slope {slope} outside (0, 1]"
                )));
            }
            let branch = DyadicBranch::derive(slope as f64 * m as f64, z_next, bits, shift)?;
            Some(NegativeBranch { slope, branch })
        }
    };
    Ok(RequantParams {
        bit_width: bits,
        shift,
        positive,
        negative,
    })
}

/// Derive requantization constants for `m = s_w * s_v / s_next`.
pub fn derive_requant(
    s_w: f32,
    s_v: f32,
    s_next: f32,
    z_next: i32,
    bits: u32,
    leaky_slope: Option<f32>,
) -> Result<RequantParams> {
    for s in [s_w, s_v, s_next] {
        if !(s.is_finite() && s > 0.0) {
            return Err(Error::InvalidScale(s));
        }
    }
    let m = (s_w as f64 * s_v as f64 / s_next as f64) as f32;
    derive_requant_from_m(m, z_next, bits, leaky_slope)
}

fn output_tensor(data: Vec<i32>, params: &RequantParams, out: &QuantizerSpec) -> Result<QuantizedTensor> {
    if out.bit_width() != params.bit_width {
        return Err(Error::Contract(format!(
            "output spec has {} bits, requant produces {}",
            out.bit_width(),
            params.bit_width
        )));
    }
    let len = data.len();
    QuantizedTensor::new(alloc::vec![len], data, out.clone())
}

/// Requantize a flat accumulation tensor through the positive branch.
pub fn requantize(acc: &[i32], params: &RequantParams, out: &QuantizerSpec) -> Result<QuantizedTensor> {
    let data = acc.iter().map(|&a| params.requantize_one(a)).collect();
    output_tensor(data, params, out)
}

/// Requantize with the folded Leaky-ReLU.
pub fn requantize_leaky(
    acc: &[i32],
    params: &RequantParams,
    out: &QuantizerSpec,
) -> Result<QuantizedTensor> {
    let data = acc
        .iter()
        .map(|&a| params.requantize_leaky_one(a))
        .collect::<Result<Vec<_>>>()?;
    output_tensor(data, params, out)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn out8() -> QuantizerSpec {
        QuantizerSpec::symmetric(8, 1.0).unwrap()
    }

    #[test]
    fn derive_examples() {
        let p = derive_requant_from_m(0.5, 0, 8, None).unwrap();
        assert_eq!(p.shift, 24);
        assert_eq!(p.m0(), 8_388_608);
        assert_eq!(p.q_max(), 254);
        assert_eq!(p.q_min(), -256);

        let p = derive_requant_from_m(1.0, 0, 8, None).unwrap();
        assert_eq!(p.m0(), 1 << 24);
        assert_eq!(p.q_max(), 127);
        assert_eq!(p.q_min(), -128);

        let p = derive_requant_from_m(0.5, 10, 8, None).unwrap();
        assert_eq!(p.p_u(), 20);
        assert!(p.negative.is_none());
    }

    #[test]
    fn derive_from_scales() {
        let p = derive_requant(0.25, 0.5, 0.25, 0, 8, Some(0.1)).unwrap();
        assert_eq!(p.m(), 0.5);
        let neg = p.negative.unwrap();
        assert_eq!(neg.branch.m0, (((1u64 << 24) as f64) * 0.1f32 as f64 * 0.5) as i32);
    }

    #[test]
    fn derive_errors() {
        assert!(matches!(derive_requant_from_m(0.0, 0, 8, None), Err(Error::InvalidScale(_))));
        assert!(matches!(derive_requant_from_m(-1.0, 0, 8, None), Err(Error::InvalidScale(_))));
        assert!(matches!(
            derive_requant_from_m(128.0, 0, 8, None),
            Err(Error::DegenerateRequant { .. })
        ));
        assert!(derive_requant_from_m(127.9, 0, 8, None).is_ok());
        assert!(derive_requant(0.0, 1.0, 1.0, 0, 8, None).is_err());
        assert!(derive_requant_from_m(0.5, 0, 8, Some(0.0)).is_err());
    }

    #[test]
    fn requantize_examples() {
        let p = derive_requant_from_m(0.5, 0, 8, None).unwrap();
        assert_eq!(requantize(&[100], &p, &out8()).unwrap().data(), &[50]);
        assert_eq!(requantize(&[0], &p, &out8()).unwrap().data(), &[0]);
        assert_eq!(requantize(&[1_000_000], &p, &out8()).unwrap().data(), &[127]);
        assert_eq!(requantize(&[i32::MIN], &p, &out8()).unwrap().data(), &[-128]);
        assert_eq!(requantize(&[i32::MAX], &p, &out8()).unwrap().data(), &[127]);
    }

    #[test]
    fn leaky_examples() {
        let p = derive_requant_from_m(0.5, 0, 8, Some(0.25)).unwrap();
        let neg = p.negative.unwrap();
        assert_eq!(neg.branch.m0, 2_097_152);
        assert_eq!(requantize_leaky(&[-64], &p, &out8()).unwrap().data(), &[-8]);
        assert_eq!(requantize_leaky(&[64], &p, &out8()).unwrap().data(), &[32]);
        assert_eq!(requantize_leaky(&[0], &p, &out8()).unwrap().data(), &[0]);

        let plain = derive_requant_from_m(0.5, 0, 8, None).unwrap();
        assert!(matches!(
            requantize_leaky(&[1], &plain, &out8()),
            Err(Error::Contract(_))
        ));
    }

    #[test]
    fn leaky_branch_absorbs_zero_point() {
        // Float reference: leaky(m * acc) + z with m = 0.5, slope 0.25, z = 10.
        let p = derive_requant_from_m(0.5, 10, 8, Some(0.25)).unwrap();
        for acc in [-200, -64, -1, 0, 1, 64, 200] {
            let real = if acc >= 0 { 0.5 * acc as f64 } else { 0.125 * acc as f64 };
            let want = (round_f64(real) as i64 + 10).clamp(-128, 127) as i32;
            let got = p.requantize_leaky_one(acc).unwrap();
            assert!((got - want).abs() <= 1, "acc={acc} got={got} want={want}");
        }
    }

    #[test]
    fn sixteen_bit_output() {
        let p = derive_requant_from_m(0.75, 0, 16, None).unwrap();
        assert_eq!(p.shift, 16);
        assert_eq!(p.q_max(), (32767.0f64 / 0.75) as i32);
        assert_eq!(p.requantize_one(1000), 750);
        assert_eq!(p.requantize_one(i32::MAX), 32767);
        assert_eq!(p.requantize_one(i32::MIN), -32768);
    }

    proptest::proptest! {
        #[test]
        fn products_never_wrap(m in 1e-4f32..127.0, z in -128i32..128, bits in proptest::sample::select(&[8u32, 16][..])) {
            let p = derive_requant_from_m(m, z, bits, Some(0.2)).unwrap();
            p.check().unwrap();
            for b in [p.positive, p.negative.unwrap().branch] {
                for q in [b.q_min, b.q_max, 0, 1, -1] {
                    let q = q.clamp(b.q_min, b.q_max);
                    proptest::prop_assert_eq!(b.m0.wrapping_mul(q) as i64, b.m0 as i64 * q as i64);
                }
            }
        }

        #[test]
        fn monotone_in_acc(m in 1e-3f32..100.0, z in -128i32..128, a in proptest::num::i32::ANY, d in 0i32..100_000) {
            let p = derive_requant_from_m(m, z, 8, Some(0.1)).unwrap();
            let b = a.saturating_add(d);
            proptest::prop_assert!(p.requantize_one(a) <= p.requantize_one(b));
            proptest::prop_assert!(p.requantize_leaky_one(a).unwrap() <= p.requantize_leaky_one(b).unwrap());
        }

        #[test]
        fn fidelity_within_one(m in 1e-3f32..100.0, t in 0.0f64..1.0) {
            let p = derive_requant_from_m(m, 0, 8, None).unwrap();
            let q = p.q_min() + ((p.q_max() - p.q_min()) as f64 * t) as i32;
            let dyadic = rid(p.m0() * q, p.shift);
            let exact = round_f64(m as f64 * q as f64) as i32;
            proptest::prop_assert!((dyadic - exact).abs() <= 1);
        }

        #[test]
        fn branch_depends_on_sign_only(m1 in 1e-3f32..10.0, m2 in 1e-3f32..10.0, acc in -100_000i32..100_000) {
            let p1 = derive_requant_from_m(m1, 0, 8, Some(0.5)).unwrap();
            let p2 = derive_requant_from_m(m2, 0, 8, Some(0.5)).unwrap();
            let s1 = p1.requantize_leaky_one(acc).unwrap().signum();
            let s2 = p2.requantize_leaky_one(acc).unwrap().signum();
            proptest::prop_assert!(s1 * s2 >= 0);
        }
    }
}
