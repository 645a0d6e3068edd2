//! Scalar abstraction shared by the precision-sensitive paths.
//!
//! `f32` and `f64` implement [`Scalar`] directly. [`WideFloat`] wraps an
//! `astro_float::BigFloat` with a compile-time mantissa width, which is what the
//! radial orthogonalization needs once the monomial Gram matrices get close to
//! singular.

use std::cmp::Ordering;
use std::fmt;
use std::ops::{Add, Div, Mul, Neg, Sub};

use astro_float::{BigFloat, Consts, Radix, RoundingMode, Sign};
use num_traits::{One, Zero};

use crate::error::{param, Result};

/// Real scalar with the handful of transcendental functions used in the crate.
pub trait Scalar:
    Clone
    + fmt::Debug
    + PartialOrd
    + Send
    + Sync
    + 'static
    + Zero
    + One
    + Add<Output = Self>
    + Sub<Output = Self>
    + Mul<Output = Self>
    + Div<Output = Self>
    + Neg<Output = Self>
{
    /// Width of the significand in bits.
    const MANTISSA_BITS: usize;

    fn from_f64(x: f64) -> Self;
    fn to_f64(&self) -> f64;
    fn sqrt(&self) -> Self;
    fn exp(&self) -> Self;
    fn ln(&self) -> Self;
    fn sin(&self) -> Self;
    fn cos(&self) -> Self;
    fn abs(&self) -> Self;
    fn pi() -> Self;
    fn is_finite(&self) -> bool;
    /// Decimal representation that round-trips through [`Scalar::parse_decimal`].
    fn to_decimal(&self) -> String;
    fn parse_decimal(text: &str) -> Option<Self>;

    fn from_i64(x: i64) -> Self {
        Self::from_f64(x as f64)
    }

    /// Unit roundoff, `2^(1 - MANTISSA_BITS)`.
    fn epsilon() -> Self {
        Self::from_f64(2f64.powi(1 - Self::MANTISSA_BITS as i32))
    }

    /// Number of significant decimal digits.
    fn decimal_digits() -> f64 {
        Self::MANTISSA_BITS as f64 * std::f64::consts::LOG10_2
    }

    fn powi(&self, exponent: i32) -> Self {
        let mut base = if exponent < 0 {
            Self::one() / self.clone()
        } else {
            self.clone()
        };
        let mut e = exponent.unsigned_abs();
        let mut acc = Self::one();
        while e > 0 {
            if e & 1 == 1 {
                acc = acc * base.clone();
            }
            e >>= 1;
            if e > 0 {
                base = base.clone() * base;
            }
        }
        acc
    }

    /// `self^exponent` for positive `self`.
    fn powf(&self, exponent: &Self) -> Self {
        (self.ln() * exponent.clone()).exp()
    }

    fn max_of(a: Self, b: Self) -> Self {
        if a >= b {
            a
        } else {
            b
        }
    }
}

macro_rules! impl_native {
    ($t:ty, $bits:expr) => {
        impl Scalar for $t {
            const MANTISSA_BITS: usize = $bits;

            fn from_f64(x: f64) -> Self {
                x as $t
            }
            fn to_f64(&self) -> f64 {
                *self as f64
            }
            fn sqrt(&self) -> Self {
                <$t>::sqrt(*self)
            }
            fn exp(&self) -> Self {
                <$t>::exp(*self)
            }
            fn ln(&self) -> Self {
                <$t>::ln(*self)
            }
            fn sin(&self) -> Self {
                <$t>::sin(*self)
            }
            fn cos(&self) -> Self {
                <$t>::cos(*self)
            }
            fn abs(&self) -> Self {
                <$t>::abs(*self)
            }
            fn pi() -> Self {
                std::f64::consts::PI as $t
            }
            fn is_finite(&self) -> bool {
                <$t>::is_finite(*self)
            }
            fn to_decimal(&self) -> String {
                format!("{:e}", self)
            }
            fn parse_decimal(text: &str) -> Option<Self> {
                text.trim().parse().ok()
            }
            fn powi(&self, exponent: i32) -> Self {
                <$t>::powi(*self, exponent)
            }
            fn powf(&self, exponent: &Self) -> Self {
                <$t>::powf(*self, *exponent)
            }
        }
    };
}

impl_native!(f32, 24);
impl_native!(f64, 53);

const ROUNDING: RoundingMode = RoundingMode::ToEven;

/// Binary floating point number with a `BITS`-bit significand.
#[derive(Clone)]
pub struct WideFloat<const BITS: usize>(BigFloat);

impl<const BITS: usize> WideFloat<BITS> {
    fn wrap(value: BigFloat) -> Self {
        WideFloat(value)
    }

    fn consts() -> Consts {
        Consts::new().expect("astro-float constant cache")
    }

    pub fn inner(&self) -> &BigFloat {
        &self.0
    }
}

impl<const BITS: usize> fmt::Debug for WideFloat<BITS> {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "WideFloat<{}>({:e})", BITS, self.to_f64())
    }
}

impl<const BITS: usize> fmt::Display for WideFloat<BITS> {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.to_decimal())
    }
}

impl<const BITS: usize> PartialEq for WideFloat<BITS> {
    fn eq(&self, other: &Self) -> bool {
        self.0.cmp(&other.0) == Some(0)
    }
}

impl<const BITS: usize> PartialOrd for WideFloat<BITS> {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        self.0.cmp(&other.0).map(|c| c.cmp(&0))
    }
}

impl<const BITS: usize> Add for WideFloat<BITS> {
    type Output = Self;
    fn add(self, rhs: Self) -> Self {
        Self::wrap(self.0.add(&rhs.0, BITS, ROUNDING))
    }
}

impl<const BITS: usize> Sub for WideFloat<BITS> {
    type Output = Self;
    fn sub(self, rhs: Self) -> Self {
        Self::wrap(self.0.sub(&rhs.0, BITS, ROUNDING))
    }
}

impl<const BITS: usize> Mul for WideFloat<BITS> {
    type Output = Self;
    fn mul(self, rhs: Self) -> Self {
        Self::wrap(self.0.mul(&rhs.0, BITS, ROUNDING))
    }
}

impl<const BITS: usize> Div for WideFloat<BITS> {
    type Output = Self;
    fn div(self, rhs: Self) -> Self {
        Self::wrap(self.0.div(&rhs.0, BITS, ROUNDING))
    }
}

impl<const BITS: usize> Neg for WideFloat<BITS> {
    type Output = Self;
    fn neg(self) -> Self {
        Self::wrap(self.0.neg())
    }
}

impl<const BITS: usize> Zero for WideFloat<BITS> {
    fn zero() -> Self {
        Self::wrap(BigFloat::from_f64(0.0, BITS))
    }
    fn is_zero(&self) -> bool {
        self.0.is_zero()
    }
}

impl<const BITS: usize> One for WideFloat<BITS> {
    fn one() -> Self {
        Self::wrap(BigFloat::from_f64(1.0, BITS))
    }
}

impl<const BITS: usize> Scalar for WideFloat<BITS> {
    const MANTISSA_BITS: usize = BITS;

    fn from_f64(x: f64) -> Self {
        Self::wrap(BigFloat::from_f64(x, BITS))
    }

    fn to_f64(&self) -> f64 {
        if self.0.is_zero() {
            return 0.0;
        }
        if self.0.is_nan() {
            return f64::NAN;
        }
        let Some((words, _, sign, exponent, _)) = self.0.as_raw_parts() else {
            return if self.0.is_inf_neg() {
                f64::NEG_INFINITY
            } else {
                f64::INFINITY
            };
        };
        let len = words.len();
        let mut head = words[len - 1] as f64 * 2f64.powi(-64);
        if len > 1 {
            head += words[len - 2] as f64 * 2f64.powi(-128);
        }
        // Split the scaling so that subnormal results are not flushed early.
        let e = exponent as i32;
        let value = if e < -1000 {
            head * 2f64.powi(e + 600) * 2f64.powi(-600)
        } else {
            head * 2f64.powi(e)
        };
        if sign == Sign::Neg {
            -value
        } else {
            value
        }
    }

    fn sqrt(&self) -> Self {
        Self::wrap(self.0.sqrt(BITS, ROUNDING))
    }

    fn exp(&self) -> Self {
        Self::wrap(self.0.exp(BITS, ROUNDING, &mut Self::consts()))
    }

    fn ln(&self) -> Self {
        Self::wrap(self.0.ln(BITS, ROUNDING, &mut Self::consts()))
    }

    fn sin(&self) -> Self {
        Self::wrap(self.0.sin(BITS, ROUNDING, &mut Self::consts()))
    }

    fn cos(&self) -> Self {
        Self::wrap(self.0.cos(BITS, ROUNDING, &mut Self::consts()))
    }

    fn abs(&self) -> Self {
        Self::wrap(self.0.abs())
    }

    fn pi() -> Self {
        Self::wrap(Self::consts().pi(BITS, ROUNDING))
    }

    fn is_finite(&self) -> bool {
        !(self.0.is_nan() || self.0.is_inf())
    }

    fn to_decimal(&self) -> String {
        self.0
            .format(Radix::Dec, ROUNDING, &mut Self::consts())
            .unwrap_or_else(|_| "NaN".to_string())
    }

    fn parse_decimal(text: &str) -> Option<Self> {
        let value = BigFloat::parse(text.trim(), Radix::Dec, BITS, ROUNDING, &mut Self::consts());
        if value.is_nan() {
            None
        } else {
            Some(Self::wrap(value))
        }
    }

    fn powi(&self, exponent: i32) -> Self {
        let positive = Self::wrap(
            self.0
                .powi(exponent.unsigned_abs() as usize, BITS, ROUNDING),
        );
        if exponent < 0 {
            Self::one() / positive
        } else {
            positive
        }
    }
}

/// Mantissa widths reachable through [`with_precision!`](crate::with_precision).
pub const SUPPORTED_PRECISIONS: [usize; 8] = [53, 128, 192, 256, 320, 384, 448, 512];

/// Maps a requested mantissa width onto the smallest supported width that is at least as wide.
pub fn precision_class(bits: usize) -> Result<usize> {
    if bits < 53 {
        return Err(param(format!(
            "precision_bits must be at least 53, got {bits}"
        )));
    }
    SUPPORTED_PRECISIONS
        .iter()
        .copied()
        .find(|&p| p >= bits)
        .ok_or_else(|| {
            param(format!(
                "precision_bits above 512 is not supported, got {bits}"
            ))
        })
}

/// Runs `$body` with `$t` bound to the scalar type selected by a runtime
/// precision. Evaluates to `Result<_, Error>`.
#[macro_export]
macro_rules! with_precision {
    ($bits:expr, $t:ident => $body:expr) => {{
        match $crate::numkit::scalar::precision_class($bits) {
            Err(e) => Err(e),
            Ok(53) => {
                type $t = f64;
                Ok($body)
            }
            Ok(128) => {
                type $t = $crate::numkit::scalar::WideFloat<128>;
                Ok($body)
            }
            Ok(192) => {
                type $t = $crate::numkit::scalar::WideFloat<192>;
                Ok($body)
            }
            Ok(256) => {
                type $t = $crate::numkit::scalar::WideFloat<256>;
                Ok($body)
            }
            Ok(320) => {
                type $t = $crate::numkit::scalar::WideFloat<320>;
                Ok($body)
            }
            Ok(384) => {
                type $t = $crate::numkit::scalar::WideFloat<384>;
                Ok($body)
            }
            Ok(448) => {
                type $t = $crate::numkit::scalar::WideFloat<448>;
                Ok($body)
            }
            Ok(_) => {
                type $t = $crate::numkit::scalar::WideFloat<512>;
                Ok($body)
            }
        }
    }};
}

#[cfg(test)]
mod tests {
    use super::*;

    type W = WideFloat<256>;

    #[test]
    fn wide_round_trips_through_f64() {
        for x in [1.0, -2.5, 1e-300, 3.0e200, std::f64::consts::PI, 0.0] {
            assert_eq!(W::from_f64(x).to_f64(), x);
        }
    }

    #[test]
    fn wide_arithmetic_beats_double() {
        // (1 + 2^-80) - 1 is lost in double but kept at 256 bits.
        let tiny = W::from_f64(2f64.powi(-80));
        let diff = (W::one() + tiny.clone()) - W::one();
        assert_eq!(diff.to_f64(), 2f64.powi(-80));
    }

    #[test]
    fn wide_transcendentals() {
        let two = W::from_f64(2.0);
        assert!((two.sqrt().to_f64() - std::f64::consts::SQRT_2).abs() < 1e-16);
        assert!((two.ln().exp().to_f64() - 2.0).abs() < 1e-15);
        assert!((W::pi().to_f64() - std::f64::consts::PI).abs() < 1e-16);
        let x = W::from_f64(0.3);
        let unit = x.sin() * x.sin() + x.cos() * x.cos();
        assert!((unit - W::one()).abs().to_f64() < 1e-70);
    }

    #[test]
    fn decimal_round_trip() {
        let third = W::one() / W::from_f64(3.0);
        let back = W::parse_decimal(&third.to_decimal()).unwrap();
        assert!((back - third).abs().to_f64() < 1e-70);
    }

    #[test]
    fn powi_matches_repeated_product() {
        let x = W::from_f64(1.5);
        assert!((x.powi(5).to_f64() - 7.59375).abs() < 1e-15);
        assert!((x.powi(-2).to_f64() - 1.0 / 2.25).abs() < 1e-15);
        assert_eq!(2.0f64.powi(10), Scalar::powi(&2.0f64, 10));
    }

    #[test]
    fn precision_classes() {
        assert_eq!(precision_class(53).unwrap(), 53);
        assert_eq!(precision_class(100).unwrap(), 128);
        assert_eq!(precision_class(320).unwrap(), 320);
        assert!(precision_class(40).is_err());
        assert!(precision_class(600).is_err());
        let bits = with_precision!(200, T => T::MANTISSA_BITS).unwrap();
        assert_eq!(bits, 256);
    }
}
