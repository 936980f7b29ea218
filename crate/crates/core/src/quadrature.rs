//! One-dimensional rules and their tensor products.

use crate::scalar::Real;

/// Nodes and weights of a one-dimensional rule.
#[derive(Clone, Debug, PartialEq)]
pub struct Rule<T> {
    pub nodes: Vec<T>,
    pub weights: Vec<T>,
}

impl<T: Real> Rule<T> {
    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    /// Closed composite trapezoid rule with `m ≥ 2` equispaced nodes.
    pub fn trapezoid(lo: T, hi: T, m: usize) -> Self {
        assert!(m >= 2);
        let h = (hi - lo) / T::lit((m - 1) as f64);
        let nodes = (0..m).map(|k| lo + h * T::lit(k as f64)).collect();
        let weights = (0..m).map(|k| if k == 0 || k + 1 == m { h * T::lit(0.5) } else { h }).collect();
        Self { nodes, weights }
    }

    /// Periodic trapezoid rule on `[0, period)`, exact for trigonometric
    /// polynomials of degree below `m`.
    pub fn periodic(period: T, m: usize) -> Self {
        assert!(m >= 1);
        let h = period / T::lit(m as f64);
        Self { nodes: (0..m).map(|k| h * T::lit(k as f64)).collect(), weights: vec![h; m] }
    }

    /// Clenshaw-Curtis rule on the `m` Chebyshev-Gauss-Lobatto nodes of `[lo, hi]`.
    pub fn clenshaw_curtis(lo: T, hi: T, m: usize) -> Self {
        assert!(m >= 3);
        let nn = m - 1;
        let pi = T::lit(std::f64::consts::PI);
        let nf = T::lit(nn as f64);
        let theta: Vec<T> = (0..=nn).map(|k| pi * T::lit(k as f64) / nf).collect();
        let mut w = vec![T::zero(); m];
        let mut v = vec![T::one(); nn.saturating_sub(1)];
        if nn % 2 == 0 {
            let e = T::one() / (nf * nf - T::one());
            w[0] = e;
            w[nn] = e;
            for k in 1..nn / 2 {
                let kf = T::lit(k as f64);
                for (i, vi) in v.iter_mut().enumerate() {
                    *vi -= T::lit(2.0) * (T::lit(2.0) * kf * theta[i + 1]).cos() / (T::lit(4.0) * kf * kf - T::one());
                }
            }
            for (i, vi) in v.iter_mut().enumerate() {
                *vi -= (nf * theta[i + 1]).cos() / (nf * nf - T::one());
            }
        } else {
            let e = T::one() / (nf * nf);
            w[0] = e;
            w[nn] = e;
            for k in 1..=(nn - 1) / 2 {
                let kf = T::lit(k as f64);
                for (i, vi) in v.iter_mut().enumerate() {
                    *vi -= T::lit(2.0) * (T::lit(2.0) * kf * theta[i + 1]).cos() / (T::lit(4.0) * kf * kf - T::one());
                }
            }
        }
        for (i, vi) in v.iter().enumerate() {
            w[i + 1] = T::lit(2.0) * *vi / nf;
        }
        let half = (hi - lo) * T::lit(0.5);
        let nodes = theta.iter().map(|t| lo + (t.cos() + T::one()) * half).collect();
        let weights = w.into_iter().map(|x| x * half).collect();
        Self { nodes, weights }
    }
}

/// Spectral differentiation matrix on the Chebyshev-Gauss-Lobatto nodes of
/// `[lo, hi]`, in the node order of [`Rule::clenshaw_curtis`]. Row-major, `m × m`.
pub fn chebyshev_differentiation<T: Real>(lo: T, hi: T, m: usize) -> Vec<Vec<T>> {
    let nn = m - 1;
    let pi = T::lit(std::f64::consts::PI);
    let x: Vec<T> = (0..=nn).map(|k| (pi * T::lit(k as f64) / T::lit(nn as f64)).cos()).collect();
    let c: Vec<T> = (0..=nn)
        .map(|i| {
            let base = if i == 0 || i == nn { T::lit(2.0) } else { T::one() };
            if i % 2 == 0 {
                base
            } else {
                -base
            }
        })
        .collect();
    let scale = T::lit(2.0) / (hi - lo);
    let mut d = vec![vec![T::zero(); m]; m];
    for i in 0..m {
        let mut row = T::zero();
        for j in 0..m {
            if i != j {
                let v = c[i] / c[j] / (x[i] - x[j]);
                d[i][j] = v * scale;
                row += v;
            }
        }
        d[i][i] = -row * scale;
    }
    d
}

/// Tensor product of one-dimensional rules.
#[derive(Clone, Debug)]
pub struct TensorRule<T> {
    pub axes: Vec<Rule<T>>,
}

impl<T: Real> TensorRule<T> {
    pub fn new(axes: Vec<Rule<T>>) -> Self {
        Self { axes }
    }

    pub fn trapezoid_box(bounds: &[(T, T)], m: usize) -> Self {
        Self::new(bounds.iter().map(|(a, b)| Rule::trapezoid(*a, *b, m)).collect())
    }

    pub fn clenshaw_curtis_box(bounds: &[(T, T)], m: usize) -> Self {
        Self::new(bounds.iter().map(|(a, b)| Rule::clenshaw_curtis(*a, *b, m)).collect())
    }

    pub fn len(&self) -> usize {
        self.axes.iter().map(Rule::len).product()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    /// Multi-index of the flat point index `k` (last axis fastest).
    pub fn index(&self, mut k: usize) -> Vec<usize> {
        let mut idx = vec![0; self.axes.len()];
        for a in (0..self.axes.len()).rev() {
            let m = self.axes[a].len();
            idx[a] = k % m;
            k /= m;
        }
        idx
    }

    pub fn flat(&self, idx: &[usize]) -> usize {
        idx.iter().zip(&self.axes).fold(0, |acc, (&i, r)| acc * r.len() + i)
    }

    pub fn point(&self, k: usize) -> (Vec<T>, T) {
        let idx = self.index(k);
        let mut w = T::one();
        let x = idx
            .iter()
            .zip(&self.axes)
            .map(|(&i, r)| {
                w *= r.weights[i];
                r.nodes[i]
            })
            .collect();
        (x, w)
    }

    pub fn points(&self) -> impl Iterator<Item = (Vec<T>, T)> + '_ {
        (0..self.len()).map(move |k| self.point(k))
    }

    pub fn integrate<E>(&self, mut f: impl FnMut(&[T]) -> E) -> E
    where
        E: std::ops::Add<Output = E> + std::ops::Mul<T, Output = E> + Default,
    {
        let mut acc = E::default();
        for (x, w) in self.points() {
            acc = acc + f(&x) * w;
        }
        acc
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn clenshaw_curtis_integrates_polynomials() {
        let r = Rule::<f64>::clenshaw_curtis(-1.0, 2.0, 9);
        let s: f64 = r.nodes.iter().zip(&r.weights).map(|(x, w)| w * x.powi(6)).sum::<f64>();
        let exact = (2f64.powi(7) + 1.0) / 7.0_f64;
        assert!((s - exact).abs() < 1e-12);
    }

    #[test]
    fn chebyshev_derivative_of_polynomial_is_exact() {
        let m = 8;
        let r = Rule::<f64>::clenshaw_curtis(0.0, 1.0, m);
        let d = chebyshev_differentiation(0.0, 1.0, m);
        for i in 0..m {
            let deriv: f64 = (0..m).map(|j| d[i][j] * r.nodes[j].powi(5)).sum();
            assert!((deriv - 5.0 * r.nodes[i].powi(4)).abs() < 1e-11);
        }
    }

    #[test]
    fn periodic_rule_is_exact_for_trigonometric_polynomials() {
        let r = Rule::<f64>::periodic(2.0, 8);
        let s: f64 = r.nodes.iter().zip(&r.weights).map(|(x, w)| w * (std::f64::consts::PI * x).cos().powi(2)).sum();
        assert!((s - 1.0).abs() < 1e-14);
    }

    #[test]
    fn trapezoid_box_volume() {
        let t = TensorRule::<f64>::trapezoid_box(&[(0.0, 2.0), (-1.0, 1.0)], 5);
        let v: f64 = t.integrate(|_| 1.0);
        assert!((v - 4.0).abs() < 1e-15);
    }
}
