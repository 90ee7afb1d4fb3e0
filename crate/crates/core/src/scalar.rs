//! Scalar modes: exact rationals and tolerance-qualified doubles.

use num::bigint::BigInt;
use num::rational::BigRational;
use num::{One, Signed, ToPrimitive, Zero};
use std::fmt::{Debug, Display};
use std::ops::{Add, Div, Mul, Neg, Sub};
use std::sync::atomic::{AtomicU64, Ordering};

/// Exact rational scalar.
pub type Rat = BigRational;

/// Default comparison tolerance for the double mode.
pub const DEFAULT_TOLERANCE: f64 = 1e-10;

static TOLERANCE_BITS: AtomicU64 = AtomicU64::new(0x3DDB7CDFD9D7BDBB); // 1e-10

/// Current double-mode tolerance.
pub fn tolerance() -> f64 {
    f64::from_bits(TOLERANCE_BITS.load(Ordering::Relaxed))
}

/// Sets the process-wide double-mode tolerance. Non-positive values are ignored.
pub fn set_tolerance(tol: f64) {
    if tol > 0.0 && tol.is_finite() {
        TOLERANCE_BITS.store(tol.to_bits(), Ordering::Relaxed);
    }
}

/// Field operations shared by both scalar modes.
pub trait Scalar:
    Clone
    + Debug
    + Display
    + PartialEq
    + PartialOrd
    + Send
    + Sync
    + 'static
    + Add<Output = Self>
    + Sub<Output = Self>
    + Mul<Output = Self>
    + Div<Output = Self>
    + Neg<Output = Self>
{
    /// True for the exact rational mode.
    const EXACT: bool;

    fn zero() -> Self;
    fn one() -> Self;
    fn from_i64(v: i64) -> Self;
    /// Exact conversion from a double; `None` for non-finite input.
    fn from_f64(v: f64) -> Option<Self>;
    fn to_f64(&self) -> f64;
    /// Conversion from an exact rational (rounded in double mode).
    fn from_rat(r: &Rat) -> Self;
    /// Exact zero test.
    fn is_zero(&self) -> bool;
    /// Zero test relative to `scale`: exact for rationals, tolerance-based for doubles.
    fn is_negligible(&self, scale: f64) -> bool;
    fn abs(&self) -> Self;
    /// Square root when it exists in the scalar field.
    fn sqrt(&self) -> Option<Self>;
    /// Sign as -1, 0 or 1 (exact comparison).
    fn signum_i32(&self) -> i32 {
        if self.is_zero() {
            0
        } else if *self > Self::zero() {
            1
        } else {
            -1
        }
    }
    fn powi(&self, e: u32) -> Self {
        let mut acc = Self::one();
        for _ in 0..e {
            acc = acc * self.clone();
        }
        acc
    }
}

impl Scalar for f64 {
    const EXACT: bool = false;

    fn zero() -> Self {
        0.0
    }
    fn one() -> Self {
        1.0
    }
    fn from_i64(v: i64) -> Self {
        v as f64
    }
    fn from_f64(v: f64) -> Option<Self> {
        v.is_finite().then_some(v)
    }
    fn to_f64(&self) -> f64 {
        *self
    }
    fn from_rat(r: &Rat) -> Self {
        rat_to_f64(r)
    }
    fn is_zero(&self) -> bool {
        *self == 0.0
    }
    fn is_negligible(&self, scale: f64) -> bool {
        f64::abs(*self) <= tolerance() * scale.max(1.0)
    }
    fn abs(&self) -> Self {
        f64::abs(*self)
    }
    fn sqrt(&self) -> Option<Self> {
        (*self >= 0.0).then(|| f64::sqrt(*self))
    }
}

impl Scalar for Rat {
    const EXACT: bool = true;

    fn zero() -> Self {
        Zero::zero()
    }
    fn one() -> Self {
        One::one()
    }
    fn from_i64(v: i64) -> Self {
        Rat::from_integer(BigInt::from(v))
    }
    fn from_f64(v: f64) -> Option<Self> {
        Rat::from_float(v)
    }
    fn to_f64(&self) -> f64 {
        rat_to_f64(self)
    }
    fn from_rat(r: &Rat) -> Self {
        r.clone()
    }
    fn is_zero(&self) -> bool {
        Zero::is_zero(self)
    }
    fn is_negligible(&self, _scale: f64) -> bool {
        Zero::is_zero(self)
    }
    fn abs(&self) -> Self {
        Signed::abs(self)
    }
    fn sqrt(&self) -> Option<Self> {
        if self.is_negative() {
            return None;
        }
        let n = self.numer().sqrt();
        let d = self.denom().sqrt();
        (&n * &n == *self.numer() && &d * &d == *self.denom()).then(|| Rat::new(n, d))
    }
}

/// Converts a rational to the nearest double, robust to huge numerators and denominators.
pub fn rat_to_f64(r: &Rat) -> f64 {
    if let Some(v) = ToPrimitive::to_f64(r) {
        if v.is_finite() && (v != 0.0 || Zero::is_zero(r)) {
            return v;
        }
    }
    let nb = r.numer().bits() as i64;
    let db = r.denom().bits() as i64;
    let shift = nb - db - 60;
    let scaled = if shift > 0 {
        Rat::new(r.numer().clone(), r.denom() << (shift as usize))
    } else {
        Rat::new(r.numer() << ((-shift) as usize), r.denom().clone())
    };
    scaled.to_integer().to_f64().unwrap_or(f64::NAN) * 2f64.powi(shift as i32)
}

/// Rational from a numerator/denominator pair of machine integers.
pub fn rat(n: i64, d: i64) -> Rat {
    Rat::new(BigInt::from(n), BigInt::from(d))
}

/// Formats a rational as `p/q` (or `p` when integral).
pub fn format_rat(r: &Rat) -> String {
    if r.is_integer() {
        r.numer().to_string()
    } else {
        format!("{}/{}", r.numer(), r.denom())
    }
}

/// Parses `p`, `p/q` or a decimal literal into an exact rational.
pub fn parse_rat(s: &str) -> Option<Rat> {
    let s = s.trim();
    if let Some((n, d)) = s.split_once('/') {
        let n: BigInt = n.trim().parse().ok()?;
        let d: BigInt = d.trim().parse().ok()?;
        if Zero::is_zero(&d) {
            return None;
        }
        return Some(Rat::new(n, d));
    }
    if let Ok(n) = s.parse::<BigInt>() {
        return Some(Rat::from_integer(n));
    }
    let (mantissa, exp) = match s.find(['e', 'E']) {
        Some(i) => (&s[..i], s[i + 1..].parse::<i32>().ok()?),
        None => (s, 0),
    };
    let (neg, body) = match mantissa.strip_prefix('-') {
        Some(rest) => (true, rest),
        None => (false, mantissa.strip_prefix('+').unwrap_or(mantissa)),
    };
    let (int_part, frac_part) = body.split_once('.').unwrap_or((body, ""));
    if int_part.is_empty() && frac_part.is_empty() {
        return None;
    }
    let digits = format!("{int_part}{frac_part}");
    if !digits.chars().all(|c| c.is_ascii_digit()) {
        return None;
    }
    let mut value = Rat::from_integer(digits.parse::<BigInt>().ok()?);
    let scale = exp - frac_part.len() as i32;
    let ten = Rat::from_integer(BigInt::from(10));
    if scale >= 0 {
        for _ in 0..scale {
            value *= ten.clone();
        }
    } else {
        for _ in 0..(-scale) {
            value /= ten.clone();
        }
    }
    Some(if neg { -value } else { value })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn default_tolerance_is_1e_10() {
        assert_eq!(f64::from_bits(0x3DDB7CDFD9D7BDBB), 1e-10);
        assert_eq!(DEFAULT_TOLERANCE, 1e-10);
    }

    #[test]
    fn rational_sqrt_only_for_squares() {
        assert_eq!(Scalar::sqrt(&rat(9, 4)), Some(rat(3, 2)));
        assert_eq!(Scalar::sqrt(&rat(3, 1)), None);
        assert_eq!(Scalar::sqrt(&rat(-1, 1)), None);
    }

    #[test]
    fn parse_and_format_round_trip() {
        assert_eq!(parse_rat("3/6"), Some(rat(1, 2)));
        assert_eq!(parse_rat("-0.25"), Some(rat(-1, 4)));
        assert_eq!(parse_rat("1.5e2"), Some(rat(150, 1)));
        assert_eq!(format_rat(&rat(-6, 4)), "-3/2");
        assert_eq!(format_rat(&rat(4, 2)), "2");
        assert!(parse_rat("1/0").is_none());
        assert!(parse_rat("abc").is_none());
    }

    #[test]
    fn huge_rationals_convert() {
        let big = Rat::new(BigInt::from(3) << 2000usize, BigInt::from(1) << 2000usize);
        assert_eq!(rat_to_f64(&big), 3.0);
    }
}
