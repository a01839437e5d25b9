//! Rounding primitives shared by every module.
//!
//! All rounding ties go away from zero, both for float operands (offline
//! quantizer work) and for the integer division used on the coding path.

/// Round half away from zero.
#[inline]
pub fn round_f32(x: f32) -> f32 {
    libm::roundf(x)
}

/// Round half away from zero.
#[inline]
pub fn round_f64(x: f64) -> f64 {
    libm::round(x)
}

/// Integer division by `2^shift` with rounding to nearest, ties away from
/// zero.
///
/// Only 32-bit operations are used and no intermediate can overflow, for any
/// `x` including `i32::MIN`. `shift` must be in `1..=31`.
#[inline]
pub fn rid(x: i32, shift: u32) -> i32 {
    debug_assert!((1..=31).contains(&shift));
    let floor = x >> shift;
    // floor << shift has the sign of x and |floor << shift| <= |x|, so the
    // subtraction lands in [0, 2^shift).
    let rem = x.wrapping_sub(floor << shift) as u32;
    let half = 1u32 << (shift - 1);
    let up = if x >= 0 { rem >= half } else { rem > half };
    floor + up as i32
}

#[cfg(test)]
mod tests {
    use super::*;

    fn rid_oracle(x: i32, shift: u32) -> i32 {
        let x = x as i64;
        let half = 1i64 << (shift - 1);
        let mag = (x.abs() + half) >> shift;
        (if x < 0 { -mag } else { mag }) as i32
    }

    #[test]
    fn rid_ties_go_away_from_zero() {
        assert_eq!(rid(3, 1), 2);
        assert_eq!(rid(-3, 1), -2);
        assert_eq!(rid(-2, 1), -1);
        assert_eq!(rid(-1, 1), -1);
        assert_eq!(rid(1, 1), 1);
        assert_eq!(rid(0, 5), 0);
    }

    #[test]
    fn rid_extremes() {
        for shift in 1..=31 {
            for x in [i32::MIN, i32::MIN + 1, -1, 0, 1, i32::MAX - 1, i32::MAX] {
                assert_eq!(rid(x, shift), rid_oracle(x, shift), "x={x} shift={shift}");
            }
        }
    }

    #[test]
    fn float_rounding_is_half_away() {
        assert_eq!(round_f32(2.5), 3.0);
        assert_eq!(round_f32(-2.5), -3.0);
        assert_eq!(round_f64(0.49999999999999994), 0.0);
    }

    proptest::proptest! {
        #[test]
        fn rid_matches_wide_oracle(x in proptest::num::i32::ANY, shift in 1u32..=31) {
            proptest::prop_assert_eq!(rid(x, shift), rid_oracle(x, shift));
        }
    }
}
