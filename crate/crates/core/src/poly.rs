//! Sparse multivariate polynomials with complex coefficients.

use crate::jet::MAX_VARS;
use crate::scalar::Real;
use num_complex::Complex;
use std::collections::BTreeMap;

pub type Exponent = [u8; MAX_VARS];

#[derive(Clone, Debug, PartialEq, Default)]
pub struct Poly<T> {
    terms: BTreeMap<Exponent, Complex<T>>,
}

impl<T: Real> Poly<T> {
    pub fn zero() -> Self {
        Self { terms: BTreeMap::new() }
    }

    pub fn constant(c: Complex<T>) -> Self {
        Self::monomial([0; MAX_VARS], c)
    }

    pub fn monomial(e: Exponent, c: Complex<T>) -> Self {
        let mut p = Self::zero();
        p.add_term(e, c);
        p
    }

    /// The coordinate `x_i`.
    pub fn var(i: usize) -> Self {
        let mut e = [0; MAX_VARS];
        e[i] = 1;
        Self::monomial(e, Complex::new(T::one(), T::zero()))
    }

    pub fn add_term(&mut self, e: Exponent, c: Complex<T>) {
        let entry = self.terms.entry(e).or_insert(Complex::new(T::zero(), T::zero()));
        *entry += c;
        if entry.re == T::zero() && entry.im == T::zero() {
            self.terms.remove(&e);
        }
    }

    pub fn terms(&self) -> impl Iterator<Item = (&Exponent, &Complex<T>)> {
        self.terms.iter()
    }

    pub fn is_zero(&self) -> bool {
        self.terms.is_empty()
    }

    pub fn degree(&self) -> u32 {
        self.terms.keys().map(|e| e.iter().map(|&d| d as u32).sum()).max().unwrap_or(0)
    }

    pub fn add(&self, o: &Self) -> Self {
        let mut r = self.clone();
        for (e, c) in &o.terms {
            r.add_term(*e, *c);
        }
        r
    }

    pub fn sub(&self, o: &Self) -> Self {
        self.add(&o.scale(Complex::new(-T::one(), T::zero())))
    }

    pub fn scale(&self, s: Complex<T>) -> Self {
        let mut r = Self::zero();
        for (e, c) in &self.terms {
            r.add_term(*e, *c * s);
        }
        r
    }

    pub fn mul(&self, o: &Self) -> Self {
        let mut r = Self::zero();
        for (ea, ca) in &self.terms {
            for (eb, cb) in &o.terms {
                let mut e = [0u8; MAX_VARS];
                for i in 0..MAX_VARS {
                    e[i] = ea[i] + eb[i];
                }
                r.add_term(e, *ca * *cb);
            }
        }
        r
    }

    /// Exact partial derivative in `x_i`.
    pub fn partial(&self, i: usize) -> Self {
        let mut r = Self::zero();
        for (e, c) in &self.terms {
            if e[i] == 0 {
                continue;
            }
            let mut d = *e;
            d[i] -= 1;
            r.add_term(d, *c * T::lit(e[i] as f64));
        }
        r
    }

    pub fn eval(&self, x: &[T]) -> Complex<T> {
        let mut s = Complex::new(T::zero(), T::zero());
        for (e, c) in &self.terms {
            let mut m = T::one();
            for (i, &xi) in x.iter().enumerate() {
                if e[i] > 0 {
                    m *= xi.powi(e[i] as i32);
                }
            }
            s += *c * m;
        }
        s
    }

    /// Value and gradient at `x`.
    pub fn eval_grad(&self, x: &[T]) -> (Complex<T>, Vec<Complex<T>>) {
        let g = (0..x.len()).map(|i| self.partial(i).eval(x)).collect();
        (self.eval(x), g)
    }

    /// Largest coefficient modulus.
    pub fn max_coeff(&self) -> T {
        self.terms.values().fold(T::zero(), |m, c| m.max(c.norm()))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn derivative_of_product() {
        let x = Poly::<f64>::var(0);
        let y = Poly::<f64>::var(1);
        let p = x.mul(&x).mul(&y);
        let dx = p.partial(0);
        assert_eq!(dx.eval(&[2.0, 3.0]).re, 12.0);
        assert!(p.partial(0).partial(1).sub(&p.partial(1).partial(0)).is_zero());
    }

    #[test]
    fn cancellation_removes_terms() {
        let x = Poly::<f64>::var(0);
        assert!(x.sub(&x).is_zero());
    }
}
