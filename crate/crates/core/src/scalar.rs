//! Scalar types the group and flow arithmetic can run in.
//!
//! `f64` is the working precision. [`TwoFloat`] (double-double, about 32
//! significant digits) is used by the exactness checks: the gauge distance
//! takes a square root of the third coordinate, so a single rounding error
//! of size `ε` in `x3` already shows up as `√ε` in `d_G`.

use std::fmt::Debug;
use std::ops::{Add, Mul, Neg, Sub};

pub use twofloat::TwoFloat;

pub trait Real:
    Copy
    + Debug
    + PartialOrd
    + Add<Output = Self>
    + Sub<Output = Self>
    + Mul<Output = Self>
    + Neg<Output = Self>
    + Send
    + Sync
{
    fn from_f64(v: f64) -> Self;
    fn to_f64(self) -> f64;
    fn sqrt(self) -> Self;
    fn abs(self) -> Self;
    fn quot(self, rhs: Self) -> Self;
}

impl Real for f64 {
    #[inline]
    fn from_f64(v: f64) -> Self {
        v
    }
    #[inline]
    fn to_f64(self) -> f64 {
        self
    }
    #[inline]
    fn sqrt(self) -> Self {
        f64::sqrt(self)
    }
    #[inline]
    fn abs(self) -> Self {
        f64::abs(self)
    }
    #[inline]
    fn quot(self, rhs: Self) -> Self {
        self / rhs
    }
}

impl Real for TwoFloat {
    fn from_f64(v: f64) -> Self {
        TwoFloat::from(v)
    }
    fn to_f64(self) -> f64 {
        f64::from(self)
    }
    fn sqrt(self) -> Self {
        TwoFloat::sqrt(self)
    }
    fn abs(self) -> Self {
        TwoFloat::abs(&self)
    }
    /// Long division with three `f64` quotient digits. The crate's own `/`
    /// keeps only the leading word of the quotient.
    fn quot(self, rhs: Self) -> Self {
        let d = rhs.hi();
        let q1 = self.hi() / d;
        let r = self - rhs * q1;
        let q2 = r.hi() / d;
        let r = r - rhs * q2;
        let q3 = r.hi() / d;
        TwoFloat::from(q1) + q2 + q3
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn double_double_carries_extra_digits() {
        let third = TwoFloat::from_f64(1.0).quot(TwoFloat::from_f64(3.0));
        let back = third * TwoFloat::from_f64(3.0) - TwoFloat::from_f64(1.0);
        assert!(back.abs().to_f64() < 1e-30, "{back:?}");
        let q = TwoFloat::from_f64(0.7).quot(TwoFloat::from_f64(1.1));
        assert!((q * TwoFloat::from_f64(1.1) - TwoFloat::from_f64(0.7)).abs().to_f64() < 1e-30);
        assert_eq!(Real::sqrt(TwoFloat::from_f64(4.0)).to_f64(), 2.0);
        assert_eq!(Real::abs(-2.5f64), 2.5);
    }
}
