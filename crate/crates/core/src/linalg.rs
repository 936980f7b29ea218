//! Small dense matrices over a [`Field`].

use crate::scalar::{Field, Real};
use std::ops::{Index, IndexMut};

/// Row-major dense matrix.
#[derive(Clone, Debug, PartialEq)]
pub struct Mat<E> {
    rows: usize,
    cols: usize,
    data: Vec<E>,
}

impl<E: Field> Mat<E> {
    pub fn zeros(rows: usize, cols: usize) -> Self {
        Self { rows, cols, data: vec![E::zero(); rows * cols] }
    }

    pub fn identity(n: usize) -> Self {
        let mut m = Self::zeros(n, n);
        for i in 0..n {
            m[(i, i)] = E::one();
        }
        m
    }

    pub fn from_fn(rows: usize, cols: usize, mut f: impl FnMut(usize, usize) -> E) -> Self {
        let mut data = Vec::with_capacity(rows * cols);
        for i in 0..rows {
            for j in 0..cols {
                data.push(f(i, j));
            }
        }
        Self { rows, cols, data }
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn is_square(&self) -> bool {
        self.rows == self.cols
    }

    pub fn transpose(&self) -> Self {
        Self::from_fn(self.cols, self.rows, |i, j| self[(j, i)])
    }

    /// Conjugate transpose.
    pub fn adjoint(&self) -> Self {
        Self::from_fn(self.cols, self.rows, |i, j| self[(j, i)].conj())
    }

    pub fn matmul(&self, rhs: &Self) -> Self {
        assert_eq!(self.cols, rhs.rows, "matmul shape mismatch");
        let mut out = Self::zeros(self.rows, rhs.cols);
        for i in 0..self.rows {
            for k in 0..self.cols {
                let a = self[(i, k)];
                if a == E::zero() {
                    continue;
                }
                for j in 0..rhs.cols {
                    out.data[i * rhs.cols + j] += a * rhs.data[k * rhs.cols + j];
                }
            }
        }
        out
    }

    pub fn matvec(&self, v: &[E]) -> Vec<E> {
        assert_eq!(self.cols, v.len(), "matvec shape mismatch");
        (0..self.rows)
            .map(|i| {
                let mut s = E::zero();
                for j in 0..self.cols {
                    s += self[(i, j)] * v[j];
                }
                s
            })
            .collect()
    }

    pub fn add(&self, rhs: &Self) -> Self {
        assert_eq!((self.rows, self.cols), (rhs.rows, rhs.cols));
        Self::from_fn(self.rows, self.cols, |i, j| self[(i, j)] + rhs[(i, j)])
    }

    pub fn sub(&self, rhs: &Self) -> Self {
        assert_eq!((self.rows, self.cols), (rhs.rows, rhs.cols));
        Self::from_fn(self.rows, self.cols, |i, j| self[(i, j)] - rhs[(i, j)])
    }

    pub fn scale(&self, s: E) -> Self {
        Self::from_fn(self.rows, self.cols, |i, j| self[(i, j)] * s)
    }

    /// `AB - BA`.
    pub fn commutator(&self, rhs: &Self) -> Self {
        self.matmul(rhs).sub(&rhs.matmul(self))
    }

    /// Largest entry modulus.
    pub fn max_abs(&self) -> E::R {
        self.data
            .iter()
            .fold(<E::R as num_traits::Zero>::zero(), |m, x| num_traits::Float::max(m, x.modulus()))
    }

    pub fn trace(&self) -> E {
        let mut s = E::zero();
        for i in 0..self.rows.min(self.cols) {
            s += self[(i, i)];
        }
        s
    }

    pub fn as_slice(&self) -> &[E] {
        &self.data
    }

    /// LU factorisation with partial pivoting. `None` if exactly singular.
    pub fn lu(&self) -> Option<Lu<E>> {
        assert!(self.is_square(), "LU of a non-square matrix");
        let n = self.rows;
        let mut a = self.clone();
        let mut perm: Vec<usize> = (0..n).collect();
        let mut sign = 1i32;
        for k in 0..n {
            let mut p = k;
            let mut best = a[(k, k)].modulus();
            for i in k + 1..n {
                let m = a[(i, k)].modulus();
                if m > best {
                    best = m;
                    p = i;
                }
            }
            if best == <E::R as num_traits::Zero>::zero() {
                return None;
            }
            if p != k {
                for j in 0..n {
                    a.data.swap(k * n + j, p * n + j);
                }
                perm.swap(k, p);
                sign = -sign;
            }
            let piv = a[(k, k)];
            for i in k + 1..n {
                let l = a[(i, k)].fdiv(piv);
                a[(i, k)] = l;
                if l == E::zero() {
                    continue;
                }
                for j in k + 1..n {
                    let u = a[(k, j)];
                    a[(i, j)] -= l * u;
                }
            }
        }
        Some(Lu { a, perm, sign })
    }

    /// Determinant via LU; zero for singular input.
    pub fn det(&self) -> E {
        match self.lu() {
            Some(lu) => lu.det(),
            None => E::zero(),
        }
    }

    pub fn inverse(&self) -> Option<Self> {
        self.lu().map(|lu| lu.inverse())
    }
}

/// Packed LU factors of a square matrix.
#[derive(Clone, Debug)]
pub struct Lu<E> {
    a: Mat<E>,
    perm: Vec<usize>,
    sign: i32,
}

impl<E: Field> Lu<E> {
    pub fn det(&self) -> E {
        let mut d = if self.sign > 0 { E::one() } else { -E::one() };
        for i in 0..self.a.rows {
            d *= self.a[(i, i)];
        }
        d
    }

    pub fn solve(&self, b: &[E]) -> Vec<E> {
        let n = self.a.rows;
        let mut x: Vec<E> = self.perm.iter().map(|&p| b[p]).collect();
        for i in 0..n {
            for k in 0..i {
                let l = self.a[(i, k)];
                let xk = x[k];
                x[i] -= l * xk;
            }
        }
        for i in (0..n).rev() {
            for k in i + 1..n {
                let u = self.a[(i, k)];
                let xk = x[k];
                x[i] -= u * xk;
            }
            x[i] = x[i].fdiv(self.a[(i, i)]);
        }
        x
    }

    pub fn inverse(&self) -> Mat<E> {
        let n = self.a.rows;
        let mut inv = Mat::zeros(n, n);
        let mut e = vec![E::zero(); n];
        for j in 0..n {
            e.iter_mut().for_each(|v| *v = E::zero());
            e[j] = E::one();
            let col = self.solve(&e);
            for i in 0..n {
                inv[(i, j)] = col[i];
            }
        }
        inv
    }
}

impl<E> Index<(usize, usize)> for Mat<E> {
    type Output = E;
    #[inline]
    fn index(&self, (i, j): (usize, usize)) -> &E {
        &self.data[i * self.cols + j]
    }
}

impl<E> IndexMut<(usize, usize)> for Mat<E> {
    #[inline]
    fn index_mut(&mut self, (i, j): (usize, usize)) -> &mut E {
        &mut self.data[i * self.cols + j]
    }
}

impl<T: Real> Mat<T> {
    /// Lower Cholesky factor; `None` unless symmetric positive definite.
    pub fn cholesky(&self) -> Option<Mat<T>> {
        assert!(self.is_square());
        let n = self.rows;
        let mut l = Mat::zeros(n, n);
        for j in 0..n {
            let mut d = self[(j, j)];
            for k in 0..j {
                d -= l[(j, k)] * l[(j, k)];
            }
            if !(d > T::zero()) {
                return None;
            }
            let djj = d.sqrt();
            l[(j, j)] = djj;
            for i in j + 1..n {
                let mut s = self[(i, j)];
                for k in 0..j {
                    s -= l[(i, k)] * l[(j, k)];
                }
                l[(i, j)] = s / djj;
            }
        }
        Some(l)
    }

    /// Inverse of a symmetric positive definite matrix via Cholesky.
    pub fn spd_inverse(&self) -> Option<Mat<T>> {
        let l = self.cholesky()?;
        let n = self.rows;
        let mut inv = Mat::zeros(n, n);
        for c in 0..n {
            let mut y = vec![T::zero(); n];
            for i in 0..n {
                let mut s = if i == c { T::one() } else { T::zero() };
                for k in 0..i {
                    s -= l[(i, k)] * y[k];
                }
                y[i] = s / l[(i, i)];
            }
            for i in (0..n).rev() {
                let mut s = y[i];
                for k in i + 1..n {
                    s -= l[(k, i)] * inv[(k, c)];
                }
                inv[(i, c)] = s / l[(i, i)];
            }
        }
        for i in 0..n {
            for j in 0..i {
                let m = (inv[(i, j)] + inv[(j, i)]) * T::lit(0.5);
                inv[(i, j)] = m;
                inv[(j, i)] = m;
            }
        }
        Some(inv)
    }

    /// Eigenvalues of a symmetric matrix, ascending (cyclic Jacobi).
    pub fn sym_eigenvalues(&self) -> Vec<T> {
        assert!(self.is_square());
        let n = self.rows;
        if n == 1 {
            return vec![self[(0, 0)]];
        }
        if n == 2 {
            let (a, b, d) = (self[(0, 0)], self[(0, 1)], self[(1, 1)]);
            let h = (a - d) * T::lit(0.5);
            let r = h.hypot(b);
            let m = (a + d) * T::lit(0.5);
            let hi = m + r;
            let lo = if hi != T::zero() { (a * d - b * b) / hi } else { m - r };
            return if lo <= hi { vec![lo, hi] } else { vec![hi, lo] };
        }
        let mut a = self.clone();
        for _sweep in 0..100 {
            let mut off = T::zero();
            for i in 0..n {
                for j in i + 1..n {
                    off += a[(i, j)] * a[(i, j)];
                }
            }
            if off <= T::eps() * T::eps() * T::lit(1e-4) * a.max_abs().powi(2) {
                break;
            }
            for p in 0..n {
                for q in p + 1..n {
                    let apq = a[(p, q)];
                    if apq == T::zero() {
                        continue;
                    }
                    let theta = (a[(q, q)] - a[(p, p)]) / (T::lit(2.0) * apq);
                    let t = theta.signum() / (theta.abs() + (theta * theta + T::one()).sqrt());
                    let c = T::one() / (t * t + T::one()).sqrt();
                    let s = t * c;
                    for k in 0..n {
                        let akp = a[(k, p)];
                        let akq = a[(k, q)];
                        a[(k, p)] = c * akp - s * akq;
                        a[(k, q)] = s * akp + c * akq;
                    }
                    for k in 0..n {
                        let apk = a[(p, k)];
                        let aqk = a[(q, k)];
                        a[(p, k)] = c * apk - s * aqk;
                        a[(q, k)] = s * apk + c * aqk;
                    }
                }
            }
        }
        let mut ev: Vec<T> = (0..n).map(|i| a[(i, i)]).collect();
        ev.sort_by(|x, y| x.partial_cmp(y).unwrap_or(std::cmp::Ordering::Equal));
        ev
    }

    pub fn min_eigenvalue(&self) -> T {
        self.sym_eigenvalues()[0]
    }

    /// Singular values (square roots of eigenvalues of `AᵀA`), ascending.
    pub fn singular_values(&self) -> Vec<T> {
        self.transpose()
            .matmul(self)
            .sym_eigenvalues()
            .into_iter()
            .map(|l| l.max(T::zero()).sqrt())
            .collect()
    }

    /// `max |A - Aᵀ|`.
    pub fn asymmetry(&self) -> T {
        self.sub(&self.transpose()).max_abs()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use num_complex::Complex64;

    fn sample() -> Mat<f64> {
        Mat::from_fn(3, 3, |i, j| [[4.0, 1.0, 0.5], [1.0, 3.0, -0.2], [0.5, -0.2, 2.0]][i][j])
    }

    #[test]
    fn det_of_diagonal() {
        let m = Mat::from_fn(2, 2, |i, j| if i == j { [2.0, 1.0][i] } else { 0.0 });
        assert_eq!(m.det(), 2.0);
    }

    #[test]
    fn lu_inverse_round_trip() {
        let a = sample();
        let inv = a.inverse().unwrap();
        assert!(a.matmul(&inv).sub(&Mat::identity(3)).max_abs() < 1e-14);
    }

    #[test]
    fn cholesky_inverse_matches_lu_inverse() {
        let a = sample();
        let d = a.spd_inverse().unwrap().sub(&a.inverse().unwrap()).max_abs();
        assert!(d < 1e-14);
    }

    #[test]
    fn cholesky_rejects_indefinite() {
        let m = Mat::from_fn(2, 2, |i, j| if i == j { [1.0, -1.0][i] } else { 0.0 });
        assert!(m.cholesky().is_none());
    }

    #[test]
    fn jacobi_eigenvalues_sum_and_product() {
        let a = sample();
        let ev = a.sym_eigenvalues();
        let s: f64 = ev.iter().sum();
        let p: f64 = ev.iter().product();
        assert!((s - a.trace()).abs() < 1e-12);
        assert!((p - a.det()).abs() < 1e-12);
        assert!(ev[0] <= ev[1] && ev[1] <= ev[2]);
    }

    #[test]
    fn complex_det_of_rotation_like_matrix() {
        let i = Complex64::new(0.0, 1.0);
        let one = Complex64::new(1.0, 0.0);
        let m = Mat::from_fn(2, 2, |r, c| [[one, i], [-i, one]][r][c]);
        assert!((m.det() - Complex64::new(0.0, 0.0)).norm() < 1e-15);
        let m = Mat::from_fn(2, 2, |r, c| [[one + i, 0.0 * one], [0.0 * one, one + i]][r][c]);
        assert!((m.det() - Complex64::new(0.0, 2.0)).norm() < 1e-15);
    }
}
