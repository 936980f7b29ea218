//! Dense complex exterior algebra on at most eight generators.
//!
//! Basis monomials are indexed by bitmask; a monomial `e_A` is the wedge of the
//! generators in `A` taken in ascending bit order.

use crate::scalar::Real;
use num_complex::Complex;

/// Largest supported number of generators.
pub const MAX_GENERATORS: usize = 8;

/// Sign of `e_A ∧ e_B` relative to `e_{A∪B}`; zero when `A ∩ B ≠ ∅`.
pub fn wedge_sign(a: u32, b: u32) -> i32 {
    if a & b != 0 {
        return 0;
    }
    let mut inversions = 0u32;
    let mut rest = b;
    while rest != 0 {
        let j = rest.trailing_zeros();
        inversions += (a >> (j + 1)).count_ones();
        rest &= rest - 1;
    }
    if inversions % 2 == 0 {
        1
    } else {
        -1
    }
}

/// Sign of the left contraction `ι_k e_A = sign · e_{A∖k}`; zero when `k ∉ A`.
pub fn contract_sign(k: usize, a: u32) -> i32 {
    if a & (1 << k) == 0 {
        return 0;
    }
    if (a & ((1u32 << k) - 1)).count_ones() % 2 == 0 {
        1
    } else {
        -1
    }
}

/// Element of the exterior algebra with complex coefficients.
#[derive(Clone, Debug, PartialEq)]
pub struct ExteriorVec<T> {
    m: usize,
    c: Vec<Complex<T>>,
}

impl<T: Real> ExteriorVec<T> {
    pub fn zero(m: usize) -> Self {
        assert!(m <= MAX_GENERATORS, "too many generators");
        Self { m, c: vec![Complex::new(T::zero(), T::zero()); 1 << m] }
    }

    pub fn basis(m: usize, mask: u32) -> Self {
        let mut v = Self::zero(m);
        v.c[mask as usize] = Complex::new(T::one(), T::zero());
        v
    }

    pub fn scalar(m: usize, s: Complex<T>) -> Self {
        let mut v = Self::zero(m);
        v.c[0] = s;
        v
    }

    pub fn generators(&self) -> usize {
        self.m
    }

    pub fn dim(&self) -> usize {
        self.c.len()
    }

    pub fn coeff(&self, mask: u32) -> Complex<T> {
        self.c[mask as usize]
    }

    pub fn coeff_mut(&mut self, mask: u32) -> &mut Complex<T> {
        &mut self.c[mask as usize]
    }

    pub fn coeffs(&self) -> &[Complex<T>] {
        &self.c
    }

    pub fn add(&self, o: &Self) -> Self {
        let mut r = self.clone();
        r.add_assign(o);
        r
    }

    pub fn add_assign(&mut self, o: &Self) {
        assert_eq!(self.m, o.m);
        for (a, b) in self.c.iter_mut().zip(&o.c) {
            *a += *b;
        }
    }

    pub fn add_scaled(&mut self, s: Complex<T>, o: &Self) {
        assert_eq!(self.m, o.m);
        for (a, b) in self.c.iter_mut().zip(&o.c) {
            *a += s * *b;
        }
    }

    pub fn sub(&self, o: &Self) -> Self {
        let mut r = self.clone();
        r.add_scaled(Complex::new(-T::one(), T::zero()), o);
        r
    }

    pub fn scale(&self, s: Complex<T>) -> Self {
        Self { m: self.m, c: self.c.iter().map(|x| *x * s).collect() }
    }

    pub fn wedge(&self, o: &Self) -> Self {
        assert_eq!(self.m, o.m);
        let mut r = Self::zero(self.m);
        let zero = Complex::new(T::zero(), T::zero());
        for (a, &ca) in self.c.iter().enumerate() {
            if ca == zero {
                continue;
            }
            for (b, &cb) in o.c.iter().enumerate() {
                if cb == zero {
                    continue;
                }
                let s = wedge_sign(a as u32, b as u32);
                if s != 0 {
                    r.c[a | b] += ca * cb * T::lit(s as f64);
                }
            }
        }
        r
    }

    /// `e_k ∧ self`.
    pub fn wedge_gen(&self, k: usize) -> Self {
        let mut r = Self::zero(self.m);
        let bit = 1u32 << k;
        for (a, &ca) in self.c.iter().enumerate() {
            let a = a as u32;
            if a & bit != 0 {
                continue;
            }
            let s = wedge_sign(bit, a);
            r.c[(a | bit) as usize] += ca * T::lit(s as f64);
        }
        r
    }

    /// Left contraction with the dual of generator `k`.
    pub fn contract_gen(&self, k: usize) -> Self {
        let mut r = Self::zero(self.m);
        let bit = 1u32 << k;
        for (a, &ca) in self.c.iter().enumerate() {
            let a = a as u32;
            if a & bit == 0 {
                continue;
            }
            let s = contract_sign(k, a);
            r.c[(a & !bit) as usize] += ca * T::lit(s as f64);
        }
        r
    }

    /// Keeps only monomials of the given total degree.
    pub fn degree_part(&self, deg: u32) -> Self {
        let mut r = Self::zero(self.m);
        for (a, &ca) in self.c.iter().enumerate() {
            if (a as u32).count_ones() == deg {
                r.c[a] = ca;
            }
        }
        r
    }

    /// Largest coefficient modulus.
    pub fn max_abs(&self) -> T {
        self.c.iter().fold(T::zero(), |m, x| m.max(x.norm()))
    }

    pub fn is_zero(&self) -> bool {
        self.c.iter().all(|x| x.re == T::zero() && x.im == T::zero())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn brute_sign(a: u32, b: u32) -> i32 {
        let mut seq: Vec<u32> = (0..8).filter(|i| a & (1 << i) != 0).collect();
        seq.extend((0..8).filter(|i| b & (1 << i) != 0));
        let mut sign = 1;
        for i in 0..seq.len() {
            for j in i + 1..seq.len() {
                if seq[i] == seq[j] {
                    return 0;
                }
                if seq[i] > seq[j] {
                    sign = -sign;
                }
            }
        }
        sign
    }

    #[test]
    fn wedge_sign_matches_permutation_count() {
        for a in 0..64u32 {
            for b in 0..64u32 {
                assert_eq!(wedge_sign(a, b), brute_sign(a, b), "a={a:b} b={b:b}");
            }
        }
    }

    #[test]
    fn contraction_is_graded_derivation() {
        let a = ExteriorVec::<f64>::basis(4, 0b0101);
        let b = ExteriorVec::<f64>::basis(4, 0b1010);
        // ι(a ∧ b) = ι(a) ∧ b + (-1)^{|a|} a ∧ ι(b)
        for k in 0..4 {
            let lhs = a.wedge(&b).contract_gen(k);
            let rhs = a.contract_gen(k).wedge(&b).add(&a.wedge(&b.contract_gen(k)));
            assert!(lhs.sub(&rhs).max_abs() < 1e-15);
        }
    }

    #[test]
    fn generator_squares_vanish() {
        let x = ExteriorVec::<f64>::basis(3, 0b011);
        for k in 0..3 {
            assert!(x.wedge_gen(k).wedge_gen(k).is_zero());
            assert!(x.contract_gen(k).contract_gen(k).is_zero());
        }
    }
}
