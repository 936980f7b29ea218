//! Scalar traits shared by every module.

use num_complex::Complex;
use num_traits::{Float, FromPrimitive, NumAssign};
use std::fmt::{Debug, Display};
use std::iter::Sum;
use std::ops::{Add, AddAssign, Mul, MulAssign, Neg, Sub, SubAssign};

/// Real scalar the library is generic over (`f32` or `f64`).
pub trait Real:
    Float + FromPrimitive + NumAssign + Sum + Debug + Display + Default + Send + Sync + 'static
{
    /// Converts an `f64` literal into the scalar.
    fn lit(x: f64) -> Self;
    /// Widens to `f64` for reporting.
    fn as_f64(self) -> f64;
    /// Machine epsilon.
    fn eps() -> Self {
        <Self as Float>::epsilon()
    }
}

impl Real for f32 {
    #[inline]
    fn lit(x: f64) -> Self {
        x as f32
    }
    #[inline]
    fn as_f64(self) -> f64 {
        self as f64
    }
}

impl Real for f64 {
    #[inline]
    fn lit(x: f64) -> Self {
        x
    }
    #[inline]
    fn as_f64(self) -> f64 {
        self
    }
}

/// Shorthand for `T::lit`.
#[inline]
pub fn lit<T: Real>(x: f64) -> T {
    T::lit(x)
}

/// A scalar field over a [`Real`]: the reals themselves or the complex numbers.
///
/// Division goes through [`Field::fdiv`], which uses Smith's algorithm on complex
/// operands so that purely real data produces bit-identical results on both paths.
pub trait Field:
    Copy
    + Debug
    + PartialEq
    + Send
    + Sync
    + 'static
    + Add<Output = Self>
    + Sub<Output = Self>
    + Mul<Output = Self>
    + Neg<Output = Self>
    + AddAssign
    + SubAssign
    + MulAssign
{
    type R: Real;
    fn zero() -> Self;
    fn one() -> Self;
    fn from_real(r: Self::R) -> Self;
    fn re(self) -> Self::R;
    fn im(self) -> Self::R;
    fn modulus(self) -> Self::R;
    fn conj(self) -> Self;
    fn fdiv(self, rhs: Self) -> Self;
    fn ln(self) -> Self;
    fn scale(self, r: Self::R) -> Self;
}

impl<T: Real> Field for T {
    type R = T;
    #[inline]
    fn zero() -> Self {
        T::zero()
    }
    #[inline]
    fn one() -> Self {
        T::one()
    }
    #[inline]
    fn from_real(r: T) -> Self {
        r
    }
    #[inline]
    fn re(self) -> T {
        self
    }
    #[inline]
    fn im(self) -> T {
        T::zero()
    }
    #[inline]
    fn modulus(self) -> T {
        self.abs()
    }
    #[inline]
    fn conj(self) -> Self {
        self
    }
    #[inline]
    fn fdiv(self, rhs: Self) -> Self {
        self / rhs
    }
    #[inline]
    fn ln(self) -> Self {
        Float::ln(self)
    }
    #[inline]
    fn scale(self, r: T) -> Self {
        self * r
    }
}

impl<T: Real> Field for Complex<T> {
    type R = T;
    #[inline]
    fn zero() -> Self {
        Complex::new(T::zero(), T::zero())
    }
    #[inline]
    fn one() -> Self {
        Complex::new(T::one(), T::zero())
    }
    #[inline]
    fn from_real(r: T) -> Self {
        Complex::new(r, T::zero())
    }
    #[inline]
    fn re(self) -> T {
        self.re
    }
    #[inline]
    fn im(self) -> T {
        self.im
    }
    #[inline]
    fn modulus(self) -> T {
        if self.im == T::zero() {
            self.re.abs()
        } else {
            self.re.hypot(self.im)
        }
    }
    #[inline]
    fn conj(self) -> Self {
        Complex::new(self.re, -self.im)
    }
    fn fdiv(self, rhs: Self) -> Self {
        let (a, b, c, d) = (self.re, self.im, rhs.re, rhs.im);
        if d == T::zero() {
            return Complex::new(a / c, b / c);
        }
        if c.abs() >= d.abs() {
            let r = d / c;
            let den = c + d * r;
            Complex::new((a + b * r) / den, (b - a * r) / den)
        } else {
            let r = c / d;
            let den = c * r + d;
            Complex::new((a * r + b) / den, (b * r - a) / den)
        }
    }
    fn ln(self) -> Self {
        if self.im == T::zero() && self.re > T::zero() {
            Complex::new(self.re.ln(), T::zero())
        } else {
            Complex::new(self.modulus().ln(), self.im.atan2(self.re))
        }
    }
    #[inline]
    fn scale(self, r: T) -> Self {
        Complex::new(self.re * r, self.im * r)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn smith_division_matches_real_division_on_real_data() {
        let a = Complex::new(0.3_f64, 0.0);
        let b = Complex::new(7.1_f64, 0.0);
        assert_eq!(a.fdiv(b).re, 0.3 / 7.1);
        assert_eq!(a.fdiv(b).im, 0.0);
    }

    #[test]
    fn smith_division_inverts_multiplication() {
        let a = Complex::new(1.5_f64, -2.0);
        let b = Complex::new(-0.25_f64, 3.5);
        let q = (a * b).fdiv(b);
        assert!((q - a).norm() < 1e-15);
        let q = (a * b).fdiv(a);
        assert!((q - b).norm() < 1e-15);
    }

    #[test]
    fn complex_log_of_positive_real_is_real_log() {
        let z = Complex::new(2.5_f64, 0.0);
        assert_eq!(Field::ln(z).re, 2.5_f64.ln());
        assert_eq!(Field::ln(z).im, 0.0);
    }
}
