//! Third-order forward-mode automatic differentiation in up to four variables.
//!
//! A [`Jet3`] carries a value together with its gradient, Hessian and third
//! derivative tensor. Arithmetic propagates all four by the Leibniz rule, and
//! elementary functions by the Faa di Bruno formula truncated at order three.

use crate::scalar::Real;
use std::ops::{Add, AddAssign, Div, Mul, MulAssign, Neg, Sub, SubAssign};

/// Maximum number of independent variables.
pub const MAX_VARS: usize = 4;

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Jet3<T> {
    pub n: usize,
    pub v: T,
    pub g: [T; MAX_VARS],
    pub h: [[T; MAX_VARS]; MAX_VARS],
    pub t: [[[T; MAX_VARS]; MAX_VARS]; MAX_VARS],
}

impl<T: Real> Jet3<T> {
    pub fn constant(n: usize, v: T) -> Self {
        debug_assert!(n <= MAX_VARS);
        let z = T::zero();
        Self { n, v, g: [z; MAX_VARS], h: [[z; MAX_VARS]; MAX_VARS], t: [[[z; MAX_VARS]; MAX_VARS]; MAX_VARS] }
    }

    /// The coordinate function `x_i` evaluated at `v`.
    pub fn var(n: usize, i: usize, v: T) -> Self {
        let mut j = Self::constant(n, v);
        j.g[i] = T::one();
        j
    }

    /// All coordinate functions at the point `x`.
    pub fn vars(x: &[T]) -> Vec<Self> {
        let n = x.len();
        (0..n).map(|i| Self::var(n, i, x[i])).collect()
    }

    /// Composes a scalar function with this jet given `f(v), f'(v), f''(v), f'''(v)`.
    pub fn chain(&self, f0: T, f1: T, f2: T, f3: T) -> Self {
        let n = self.n;
        let mut r = Self::constant(n, f0);
        for i in 0..n {
            r.g[i] = f1 * self.g[i];
        }
        for i in 0..n {
            for j in 0..n {
                r.h[i][j] = f2 * self.g[i] * self.g[j] + f1 * self.h[i][j];
            }
        }
        for i in 0..n {
            for j in 0..n {
                for k in 0..n {
                    let (a, h) = (&self.g, &self.h);
                    r.t[i][j][k] = f3 * a[i] * a[j] * a[k]
                        + f2 * (h[i][j] * a[k] + h[i][k] * a[j] + h[j][k] * a[i])
                        + f1 * self.t[i][j][k];
                }
            }
        }
        r
    }

    pub fn exp(&self) -> Self {
        let e = self.v.exp();
        self.chain(e, e, e, e)
    }

    pub fn ln(&self) -> Self {
        let x = self.v;
        let r = x.recip();
        self.chain(x.ln(), r, -r * r, T::lit(2.0) * r * r * r)
    }

    pub fn sqrt(&self) -> Self {
        self.powf(T::lit(0.5))
    }

    pub fn recip(&self) -> Self {
        let r = self.v.recip();
        self.chain(r, -r * r, T::lit(2.0) * r * r * r, T::lit(-6.0) * r * r * r * r)
    }

    pub fn powi(&self, k: i32) -> Self {
        let x = self.v;
        let kf = T::lit(k as f64);
        let p = |e: i32| if e < 0 && k >= 0 && x == T::zero() { T::zero() } else { x.powi(e) };
        let f1 = if k == 0 { T::zero() } else { kf * p(k - 1) };
        let f2 = if k == 0 || k == 1 { T::zero() } else { kf * (kf - T::one()) * p(k - 2) };
        let f3 = if (0..=2).contains(&k) {
            T::zero()
        } else {
            kf * (kf - T::one()) * (kf - T::lit(2.0)) * p(k - 3)
        };
        self.chain(x.powi(k), f1, f2, f3)
    }

    pub fn powf(&self, a: T) -> Self {
        let x = self.v;
        let one = T::one();
        let two = T::lit(2.0);
        self.chain(
            x.powf(a),
            a * x.powf(a - one),
            a * (a - one) * x.powf(a - two),
            a * (a - one) * (a - two) * x.powf(a - T::lit(3.0)),
        )
    }

    pub fn sin(&self) -> Self {
        let (s, c) = self.v.sin_cos();
        self.chain(s, c, -s, -c)
    }

    pub fn cos(&self) -> Self {
        let (s, c) = self.v.sin_cos();
        self.chain(c, -s, -c, s)
    }

    pub fn cosh(&self) -> Self {
        let (s, c) = (self.v.sinh(), self.v.cosh());
        self.chain(c, s, c, s)
    }

    pub fn sinh(&self) -> Self {
        let (s, c) = (self.v.sinh(), self.v.cosh());
        self.chain(s, c, s, c)
    }

    /// Largest asymmetry of the Hessian and third tensor under index swaps.
    pub fn symmetry_defect(&self) -> T {
        let n = self.n;
        let mut m = T::zero();
        for i in 0..n {
            for j in 0..n {
                m = m.max((self.h[i][j] - self.h[j][i]).abs());
                for k in 0..n {
                    let t = self.t[i][j][k];
                    for u in [self.t[j][i][k], self.t[i][k][j], self.t[k][j][i], self.t[j][k][i], self.t[k][i][j]] {
                        m = m.max((t - u).abs());
                    }
                }
            }
        }
        m
    }
}

impl<T: Real> Add for Jet3<T> {
    type Output = Self;
    fn add(mut self, o: Self) -> Self {
        self += o;
        self
    }
}

impl<T: Real> AddAssign for Jet3<T> {
    fn add_assign(&mut self, o: Self) {
        let n = self.n.max(o.n);
        self.n = n;
        self.v += o.v;
        for i in 0..n {
            self.g[i] += o.g[i];
            for j in 0..n {
                self.h[i][j] += o.h[i][j];
                for k in 0..n {
                    self.t[i][j][k] += o.t[i][j][k];
                }
            }
        }
    }
}

impl<T: Real> Sub for Jet3<T> {
    type Output = Self;
    fn sub(mut self, o: Self) -> Self {
        self -= o;
        self
    }
}

impl<T: Real> SubAssign for Jet3<T> {
    fn sub_assign(&mut self, o: Self) {
        *self += -o;
    }
}

impl<T: Real> Neg for Jet3<T> {
    type Output = Self;
    fn neg(self) -> Self {
        self * (-T::one())
    }
}

impl<T: Real> Mul for Jet3<T> {
    type Output = Self;
    fn mul(self, o: Self) -> Self {
        let n = self.n.max(o.n);
        let (a, b) = (&self, &o);
        let mut r = Self::constant(n, a.v * b.v);
        for i in 0..n {
            r.g[i] = a.g[i] * b.v + a.v * b.g[i];
            for j in 0..n {
                r.h[i][j] = a.h[i][j] * b.v + a.g[i] * b.g[j] + a.g[j] * b.g[i] + a.v * b.h[i][j];
                for k in 0..n {
                    r.t[i][j][k] = a.t[i][j][k] * b.v
                        + a.h[i][j] * b.g[k]
                        + a.h[i][k] * b.g[j]
                        + a.h[j][k] * b.g[i]
                        + a.g[i] * b.h[j][k]
                        + a.g[j] * b.h[i][k]
                        + a.g[k] * b.h[i][j]
                        + a.v * b.t[i][j][k];
                }
            }
        }
        r
    }
}

impl<T: Real> MulAssign for Jet3<T> {
    fn mul_assign(&mut self, o: Self) {
        *self = *self * o;
    }
}

impl<T: Real> Div for Jet3<T> {
    type Output = Self;
    #[allow(clippy::suspicious_arithmetic_impl)]
    fn div(self, o: Self) -> Self {
        self * o.recip()
    }
}

impl<T: Real> Add<T> for Jet3<T> {
    type Output = Self;
    fn add(mut self, c: T) -> Self {
        self.v += c;
        self
    }
}

impl<T: Real> Sub<T> for Jet3<T> {
    type Output = Self;
    fn sub(mut self, c: T) -> Self {
        self.v -= c;
        self
    }
}

impl<T: Real> Mul<T> for Jet3<T> {
    type Output = Self;
    fn mul(mut self, c: T) -> Self {
        let n = self.n;
        self.v *= c;
        for i in 0..n {
            self.g[i] *= c;
            for j in 0..n {
                self.h[i][j] *= c;
                for k in 0..n {
                    self.t[i][j][k] *= c;
                }
            }
        }
        self
    }
}

impl<T: Real> Div<T> for Jet3<T> {
    type Output = Self;
    fn div(self, c: T) -> Self {
        self * c.recip()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn quartic_derivatives() {
        // f = x^2/2 + x^4/4 at x = 1: f' = 2, f'' = 4, f''' = 6
        let x = Jet3::var(1, 0, 1.0_f64);
        let f = x.powi(2) * 0.5 + x.powi(4) * 0.25;
        assert_eq!(f.g[0], 2.0);
        assert_eq!(f.h[0][0], 4.0);
        assert_eq!(f.t[0][0][0], 6.0);
    }

    #[test]
    fn product_rule_on_mixed_monomial() {
        // f = x^2 y at (2, 3): f_xxy = 2, f_xy = 2x = 4
        let v = Jet3::vars(&[2.0_f64, 3.0]);
        let f = v[0] * v[0] * v[1];
        assert_eq!(f.v, 12.0);
        assert_eq!(f.h[0][1], 4.0);
        assert_eq!(f.t[0][0][1], 2.0);
        assert_eq!(f.t[1][0][0], 2.0);
        assert_eq!(f.t[1][1][0], 0.0);
    }

    #[test]
    fn log_exp_round_trip() {
        let v = Jet3::vars(&[0.3_f64, -0.7]);
        let u = (v[0] * 2.0 + v[1]).exp().ln();
        let w = v[0] * 2.0 + v[1];
        assert!((u.v - w.v).abs() < 1e-15);
        for i in 0..2 {
            assert!((u.g[i] - w.g[i]).abs() < 1e-14);
            for j in 0..2 {
                assert!(u.h[i][j].abs() < 1e-14);
                for k in 0..2 {
                    assert!(u.t[i][j][k].abs() < 1e-13);
                }
            }
        }
    }

    #[test]
    fn division_matches_reciprocal_series() {
        let x = Jet3::var(1, 0, 0.5_f64);
        let f = Jet3::constant(1, 1.0) / (x + 1.0);
        // 1/(1+x): derivatives -1/(1+x)^2, 2/(1+x)^3, -6/(1+x)^4
        let a = 1.5_f64;
        assert!((f.g[0] + 1.0 / (a * a)).abs() < 1e-15);
        assert!((f.h[0][0] - 2.0 / (a * a * a)).abs() < 1e-15);
        assert!((f.t[0][0][0] + 6.0 / (a * a * a * a)).abs() < 1e-14);
    }
}
