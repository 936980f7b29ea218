//! Domains, convex potentials, derivative frames, Legendre duality and the
//! metric, symplectic and holomorphic data on `M = TD/Λ` and `W = T*D/Λ*`.

use crate::grid::GridFunction;
use crate::jet::{Jet3, MAX_VARS};
use crate::linalg::Mat;
use crate::scalar::Real;
use num_complex::Complex;
use std::fmt;
use std::sync::Arc;
use thiserror::Error;

#[derive(Debug, Error)]
pub enum GeometryError {
    #[error("Hessian is not positive definite at {x:?}")]
    NonConvexAt { x: Vec<f64> },
    #[error("point {x:?} lies outside the domain")]
    OutOfDomain { x: Vec<f64> },
    #[error("Newton inversion of the gradient map failed at {p:?}")]
    NewtonDivergence { p: Vec<f64> },
    #[error("invalid domain: {0}")]
    InvalidDomain(String),
    #[error("parse error: {0}")]
    Parse(String),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

fn to_f64s<T: Real>(x: &[T]) -> Vec<f64> {
    x.iter().map(|v| v.as_f64()).collect()
}

/// Axis-aligned box `D ⊂ ℝⁿ` with the lattice and sampling data of the fibration.
#[derive(Clone, Debug, PartialEq)]
pub struct Domain<T> {
    pub n: usize,
    pub bounds: Vec<(T, T)>,
    pub grid_resolution: usize,
    pub lattice_covolume: T,
    pub fiber_resolution: usize,
}

impl<T: Real> Domain<T> {
    pub fn new(bounds: Vec<(T, T)>) -> Result<Self, GeometryError> {
        let d = Self {
            n: bounds.len(),
            bounds,
            grid_resolution: 33,
            lattice_covolume: T::one(),
            fiber_resolution: 16,
        };
        d.validate()?;
        Ok(d)
    }

    /// The cube `[lo, hi]ⁿ`.
    pub fn cube(n: usize, lo: T, hi: T) -> Result<Self, GeometryError> {
        Self::new(vec![(lo, hi); n])
    }

    pub fn with_grid_resolution(mut self, r: usize) -> Result<Self, GeometryError> {
        self.grid_resolution = r;
        self.validate()?;
        Ok(self)
    }

    pub fn with_covolume(mut self, c: T) -> Result<Self, GeometryError> {
        self.lattice_covolume = c;
        self.validate()?;
        Ok(self)
    }

    pub fn with_fiber_resolution(mut self, r: usize) -> Result<Self, GeometryError> {
        self.fiber_resolution = r;
        self.validate()?;
        Ok(self)
    }

    pub fn validate(&self) -> Result<(), GeometryError> {
        if self.n == 0 || self.n > MAX_VARS || self.bounds.len() != self.n {
            return Err(GeometryError::InvalidDomain(format!("dimension {} outside 1..=4", self.n)));
        }
        if self.bounds.iter().any(|(a, b)| !(b > a)) {
            return Err(GeometryError::InvalidDomain("axis interval must have positive length".into()));
        }
        if self.grid_resolution < 9 || self.grid_resolution % 2 == 0 {
            return Err(GeometryError::InvalidDomain("grid resolution must be an odd integer ≥ 9".into()));
        }
        if !(self.lattice_covolume > T::zero()) {
            return Err(GeometryError::InvalidDomain("lattice covolume must be positive".into()));
        }
        if self.fiber_resolution < 8 {
            return Err(GeometryError::InvalidDomain("fiber resolution must be at least 8".into()));
        }
        Ok(())
    }

    pub fn center(&self) -> Vec<T> {
        self.bounds.iter().map(|(a, b)| (*a + *b) * T::lit(0.5)).collect()
    }

    pub fn volume(&self) -> T {
        self.bounds.iter().fold(T::one(), |v, (a, b)| v * (*b - *a))
    }

    /// Strict interior membership.
    pub fn contains(&self, x: &[T]) -> bool {
        x.len() == self.n && x.iter().zip(&self.bounds).all(|(v, (a, b))| *v > *a && *v < *b)
    }

    /// The box shrunk towards its center by the factor `1 - margin` on every axis.
    pub fn shrunk(&self, margin: T) -> Self {
        let mut d = self.clone();
        for (a, b) in d.bounds.iter_mut() {
            let c = (*a + *b) * T::lit(0.5);
            let r = (*b - *a) * T::lit(0.5) * (T::one() - margin);
            *a = c - r;
            *b = c + r;
        }
        d
    }

    /// Deterministic low-discrepancy interior samples (Halton sequence) in the box
    /// shrunk by `margin`.
    pub fn halton_points(&self, count: usize, margin: T) -> Vec<Vec<T>> {
        const PRIMES: [u64; MAX_VARS] = [2, 3, 5, 7];
        let inner = self.shrunk(margin);
        (1..=count as u64)
            .map(|k| {
                (0..self.n)
                    .map(|a| {
                        let (lo, hi) = inner.bounds[a];
                        lo + (hi - lo) * T::lit(radical_inverse(k, PRIMES[a]))
                    })
                    .collect()
            })
            .collect()
    }
}

fn radical_inverse(mut k: u64, base: u64) -> f64 {
    let mut inv = 1.0 / base as f64;
    let mut r = 0.0;
    while k > 0 {
        r += (k % base) as f64 * inv;
        k /= base;
        inv /= base as f64;
    }
    r
}

/// Scalar function of the base coordinates, evaluated on third-order jets.
pub type JetFn<T> = Arc<dyn Fn(&[Jet3<T>]) -> Jet3<T> + Send + Sync>;

/// A smooth scalar function on the base with derivatives to order three.
#[derive(Clone)]
pub enum ScalarField<T: Real> {
    Analytic { n: usize, f: JetFn<T> },
    Grid(Arc<GridFunction<T>>),
    Dual(Arc<LegendreDual<T>>),
}

impl<T: Real> fmt::Debug for ScalarField<T> {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Self::Analytic { n, .. } => write!(f, "Analytic(n = {n})"),
            Self::Grid(g) => write!(f, "Grid(n = {}, resolution = {})", g.dim(), g.resolution()),
            Self::Dual(_) => write!(f, "LegendreDual"),
        }
    }
}

impl<T: Real> ScalarField<T> {
    pub fn analytic(n: usize, f: impl Fn(&[Jet3<T>]) -> Jet3<T> + Send + Sync + 'static) -> Self {
        Self::Analytic { n, f: Arc::new(f) }
    }

    pub fn zero(n: usize) -> Self {
        Self::analytic(n, move |_| Jet3::constant(n, T::zero()))
    }

    /// `½ xᵀ A x`.
    pub fn quadratic(a: Mat<T>) -> Self {
        let n = a.rows();
        Self::analytic(n, move |x| {
            let mut s = Jet3::constant(n, T::zero());
            for i in 0..n {
                for j in 0..n {
                    if a[(i, j)] != T::zero() {
                        s += x[i] * x[j] * (a[(i, j)] * T::lit(0.5));
                    }
                }
            }
            s
        })
    }

    /// Real part of a polynomial.
    pub fn polynomial(n: usize, p: crate::poly::Poly<T>) -> Self {
        Self::analytic(n, move |x| {
            let mut s = Jet3::constant(n, T::zero());
            for (e, c) in p.terms() {
                let mut m = Jet3::constant(n, c.re);
                for (i, xi) in x.iter().enumerate() {
                    if e[i] > 0 {
                        m *= xi.powi(e[i] as i32);
                    }
                }
                s += m;
            }
            s
        })
    }

    pub fn dim(&self) -> usize {
        match self {
            Self::Analytic { n, .. } => *n,
            Self::Grid(g) => g.dim(),
            Self::Dual(d) => d.dim(),
        }
    }

    pub fn jet3(&self, x: &[T]) -> Result<Jet3<T>, GeometryError> {
        if x.len() != self.dim() {
            return Err(GeometryError::OutOfDomain { x: to_f64s(x) });
        }
        match self {
            Self::Analytic { f, .. } => {
                let j = f(&Jet3::vars(x));
                if !j.v.is_finite() {
                    return Err(GeometryError::OutOfDomain { x: to_f64s(x) });
                }
                Ok(j)
            }
            Self::Grid(g) => g.jet3(x),
            Self::Dual(d) => d.jet3(x),
        }
    }

    pub fn value(&self, x: &[T]) -> Result<T, GeometryError> {
        Ok(self.jet3(x)?.v)
    }
}

/// Which family a potential belongs to.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum PotentialKind {
    Quadratic,
    Polynomial,
    Analytic,
    Grid,
    Legendre,
}

/// Strictly convex potential `φ` together with its Monge-Ampère constant `C`.
#[derive(Clone, Debug)]
pub struct Potential<T: Real> {
    pub kind: PotentialKind,
    pub field: ScalarField<T>,
    pub target_constant: T,
}

impl<T: Real> Potential<T> {
    pub fn new(kind: PotentialKind, field: ScalarField<T>, target_constant: T) -> Self {
        Self { kind, field, target_constant }
    }

    /// `½ xᵀ A x` with `C = det A`.
    pub fn quadratic(a: Mat<T>) -> Self {
        let c = a.det();
        Self::new(PotentialKind::Quadratic, ScalarField::quadratic(a), c)
    }

    /// `½ |x|²`.
    pub fn flat(n: usize) -> Self {
        Self::quadratic(Mat::identity(n))
    }

    /// `½ Σ a_j x_j²`.
    pub fn diagonal(a: &[T]) -> Self {
        let n = a.len();
        Self::quadratic(Mat::from_fn(n, n, |i, j| if i == j { a[i] } else { T::zero() }))
    }

    pub fn polynomial(n: usize, p: crate::poly::Poly<T>) -> Self {
        Self::new(PotentialKind::Polynomial, ScalarField::polynomial(n, p), T::one())
    }

    pub fn analytic(n: usize, f: impl Fn(&[Jet3<T>]) -> Jet3<T> + Send + Sync + 'static) -> Self {
        Self::new(PotentialKind::Analytic, ScalarField::analytic(n, f), T::one())
    }

    /// `Σ (½ x_j² + ¼ x_j⁴)`.
    pub fn quartic(n: usize) -> Self {
        Self::new(
            PotentialKind::Polynomial,
            ScalarField::analytic(n, move |x| {
                let mut s = Jet3::constant(n, T::zero());
                for xi in x {
                    s += xi.powi(2) * T::lit(0.5) + xi.powi(4) * T::lit(0.25);
                }
                s
            }),
            T::one(),
        )
    }

    /// `½ |x|² + a · exp(w · x)` with a fixed tilt `w`; non-quadratic with mixed third derivatives.
    pub fn exp_tilt(n: usize, a: T) -> Self {
        const W: [f64; MAX_VARS] = [0.5, 0.3, -0.2, 0.4];
        Self::analytic(n, move |x| {
            let mut s = Jet3::constant(n, T::zero());
            let mut lin = Jet3::constant(n, T::zero());
            for (i, xi) in x.iter().enumerate() {
                s += xi.powi(2) * T::lit(0.5);
                lin += *xi * T::lit(W[i]);
            }
            s + lin.exp() * a
        })
    }

    /// `½ |x|² + ¼ |x|⁴`, invariant under rotations about the origin.
    pub fn radial(n: usize) -> Self {
        Self::analytic(n, move |x| {
            let mut r2 = Jet3::constant(n, T::zero());
            for xi in x {
                r2 += *xi * *xi;
            }
            r2 * T::lit(0.5) + r2 * r2 * T::lit(0.25)
        })
    }

    /// An exact non-quadratic solution of `det D²φ = 1` on `x₁ < c`:
    /// `φ = s^{n+1}/((n+1)n) + Σ_{j≥2} x_j²/(2s)` with `s = c − x₁`.
    pub fn exact_ma(n: usize, c: T) -> Self {
        let nf = n as f64;
        let k = T::lit(1.0 / ((nf + 1.0) * nf.max(1.0)));
        Self::new(
            PotentialKind::Analytic,
            ScalarField::analytic(n, move |x| {
                let s = (-x[0]) + c;
                let mut v = if n == 1 { s.powi(2) * T::lit(0.5) } else { s.powi(n as i32 + 1) * k };
                let inv = s.recip();
                for xj in &x[1..] {
                    v += *xj * *xj * inv * T::lit(0.5);
                }
                v
            }),
            T::one(),
        )
    }

    pub fn grid(g: GridFunction<T>, target_constant: T) -> Self {
        Self::new(PotentialKind::Grid, ScalarField::Grid(Arc::new(g)), target_constant)
    }

    pub fn dim(&self) -> usize {
        self.field.dim()
    }

    /// Derivative frame at `x`; fails unless the Hessian is positive definite.
    pub fn jet_at(&self, x: &[T]) -> Result<JetFrame<T>, GeometryError> {
        JetFrame::from_jet(x, &self.field.jet3(x)?)
    }

    pub fn value(&self, x: &[T]) -> Result<T, GeometryError> {
        self.field.value(x)
    }

    pub fn gradient(&self, x: &[T]) -> Result<Vec<T>, GeometryError> {
        let j = self.field.jet3(x)?;
        Ok(j.g[..self.dim()].to_vec())
    }
}

/// Derivative frame of `φ` at `x`, the evaluation context for every operator.
#[derive(Clone, Debug, PartialEq)]
pub struct JetFrame<T> {
    pub point: Vec<T>,
    pub value: T,
    pub gradient: Vec<T>,
    pub hessian: Mat<T>,
    pub inverse_hessian: Mat<T>,
    third: Vec<T>,
    pub det_hessian: T,
}

impl<T: Real> JetFrame<T> {
    pub fn from_jet(x: &[T], j: &Jet3<T>) -> Result<Self, GeometryError> {
        let n = x.len();
        let hessian = Mat::from_fn(n, n, |a, b| (j.h[a][b] + j.h[b][a]) * T::lit(0.5));
        let inverse_hessian = hessian.spd_inverse().ok_or(GeometryError::NonConvexAt { x: to_f64s(x) })?;
        let mut third = Vec::with_capacity(n * n * n);
        for a in 0..n {
            for b in 0..n {
                for c in 0..n {
                    third.push(j.t[a][b][c]);
                }
            }
        }
        let det_hessian = hessian.det();
        Ok(Self {
            point: x.to_vec(),
            value: j.v,
            gradient: j.g[..n].to_vec(),
            hessian,
            inverse_hessian,
            third,
            det_hessian,
        })
    }

    /// Builds a frame directly from Hessian and third-derivative data.
    pub fn from_parts(point: Vec<T>, value: T, gradient: Vec<T>, hessian: Mat<T>, third: Vec<T>) -> Result<Self, GeometryError> {
        let n = point.len();
        assert_eq!(third.len(), n * n * n);
        let inverse_hessian = hessian.spd_inverse().ok_or(GeometryError::NonConvexAt { x: to_f64s(&point) })?;
        let det_hessian = hessian.det();
        Ok(Self { point, value, gradient, hessian, inverse_hessian, third, det_hessian })
    }

    pub fn dim(&self) -> usize {
        self.point.len()
    }

    /// `φ_abc`.
    #[inline]
    pub fn third(&self, a: usize, b: usize, c: usize) -> T {
        let n = self.dim();
        self.third[(a * n + b) * n + c]
    }

    pub fn third_slice(&self) -> &[T] {
        &self.third
    }

    /// `max |φ_jk φ^{kl} − δ_j^l|`.
    pub fn inverse_defect(&self) -> T {
        let n = self.dim();
        self.hessian.matmul(&self.inverse_hessian).sub(&Mat::identity(n)).max_abs()
    }
}

/// `det φ_jk − C`.
pub fn ma_residual<T: Real>(jet: &JetFrame<T>, c: T) -> T {
    jet.det_hessian - c
}

/// Derivative frame of `potential` at `x`, checked against the domain.
pub fn jet<T: Real>(potential: &Potential<T>, domain: &Domain<T>, x: &[T]) -> Result<JetFrame<T>, GeometryError> {
    if !domain.contains(x) {
        return Err(GeometryError::OutOfDomain { x: to_f64s(x) });
    }
    potential.jet_at(x)
}

/// Legendre transform `ψ` of a convex potential, evaluated by inverting `∇φ`.
#[derive(Clone, Debug)]
pub struct LegendreDual<T: Real> {
    potential: Potential<T>,
    start: Vec<T>,
    offset: T,
    max_newton: usize,
}

/// Damped Newton tolerance on the gradient-map residual, relative to the target.
fn newton_tolerance<T: Real>() -> T {
    T::eps() * T::lit(64.0)
}

impl<T: Real> LegendreDual<T> {
    /// Dual of `potential`, with Newton started from and `ψ` normalised at `start`.
    pub fn with_start(potential: Potential<T>, start: Vec<T>) -> Result<Self, GeometryError> {
        let mut d = Self { potential, start, offset: T::zero(), max_newton: 100 };
        let j0 = d.potential.jet_at(&d.start)?;
        let p0 = j0.gradient.clone();
        let raw = d.raw_value_at(&d.start, &p0, j0.value);
        d.offset = raw;
        Ok(d)
    }

    pub fn potential(&self) -> &Potential<T> {
        &self.potential
    }

    pub fn dim(&self) -> usize {
        self.start.len()
    }

    /// The point of `D` where the dual is normalised, and its image `∇φ` in `D*`.
    pub fn anchor(&self) -> (&[T], Vec<T>) {
        let p = self.potential.gradient(&self.start).unwrap_or_default();
        (&self.start, p)
    }

    fn raw_value_at(&self, x: &[T], p: &[T], phi: T) -> T {
        p.iter().zip(x).fold(T::zero(), |s, (a, b)| s + *a * *b) - phi
    }

    /// Solves `∇φ(x) = p` by damped Newton.
    pub fn inverse_gradient(&self, p: &[T]) -> Result<Vec<T>, GeometryError> {
        let n = self.dim();
        let fail = || GeometryError::NewtonDivergence { p: to_f64s(p) };
        let mut x = self.start.clone();
        let scale = p.iter().fold(T::one(), |m, v| m.max(v.abs()));
        let tol = newton_tolerance::<T>() * scale;
        let resid = |x: &[T]| -> Option<(JetFrame<T>, Vec<T>, T)> {
            let j = self.potential.jet_at(x).ok()?;
            let r: Vec<T> = (0..n).map(|a| j.gradient[a] - p[a]).collect();
            let norm = r.iter().fold(T::zero(), |m, v| m.max(v.abs()));
            Some((j, r, norm))
        };
        let (mut j, mut r, mut norm) = resid(&x).ok_or_else(fail)?;
        for _ in 0..self.max_newton {
            if norm <= tol {
                return Ok(x);
            }
            let step = j.inverse_hessian.matvec(&r);
            let mut lambda = T::one();
            let mut accepted = false;
            for _ in 0..40 {
                let trial: Vec<T> = (0..n).map(|a| x[a] - lambda * step[a]).collect();
                if let Some((tj, tr, tn)) = resid(&trial) {
                    if tn < norm || tn <= tol {
                        x = trial;
                        j = tj;
                        r = tr;
                        norm = tn;
                        accepted = true;
                        break;
                    }
                }
                lambda *= T::lit(0.5);
            }
            if !accepted {
                // Newton has stalled at the noise floor of the gradient evaluation.
                if norm <= tol * T::lit(1e4) {
                    return Ok(x);
                }
                return Err(fail());
            }
        }
        if norm <= tol * T::lit(1e4) {
            Ok(x)
        } else {
            Err(fail())
        }
    }

    /// `ψ(p) = ⟨p, x(p)⟩ − φ(x(p))`, shifted to vanish at the anchor.
    pub fn value(&self, p: &[T]) -> Result<T, GeometryError> {
        let x = self.inverse_gradient(p)?;
        let phi = self.potential.value(&x)?;
        Ok(self.raw_value_at(&x, p, phi) - self.offset)
    }

    /// Third-order jet of `ψ` at `p`: gradient `x(p)`, Hessian `φ⁻¹`, and
    /// third derivatives `−φ^{ai} φ^{bj} φ^{ck} φ_ijk`.
    pub fn jet3(&self, p: &[T]) -> Result<Jet3<T>, GeometryError> {
        let n = self.dim();
        let x = self.inverse_gradient(p)?;
        let f = self.potential.jet_at(&x)?;
        let inv = &f.inverse_hessian;
        let mut out = Jet3::constant(n, self.raw_value_at(&x, p, f.value) - self.offset);
        for a in 0..n {
            out.g[a] = x[a];
            for b in 0..n {
                out.h[a][b] = inv[(a, b)];
            }
        }
        // Contract one index at a time.
        let mut t1 = vec![T::zero(); n * n * n];
        for c in 0..n {
            for i in 0..n {
                for j in 0..n {
                    let mut s = T::zero();
                    for k in 0..n {
                        s += inv[(c, k)] * f.third(i, j, k);
                    }
                    t1[(i * n + j) * n + c] = s;
                }
            }
        }
        let mut t2 = vec![T::zero(); n * n * n];
        for b in 0..n {
            for i in 0..n {
                for c in 0..n {
                    let mut s = T::zero();
                    for j in 0..n {
                        s += inv[(b, j)] * t1[(i * n + j) * n + c];
                    }
                    t2[(i * n + b) * n + c] = s;
                }
            }
        }
        for a in 0..n {
            for b in 0..n {
                for c in 0..n {
                    let mut s = T::zero();
                    for i in 0..n {
                        s += inv[(a, i)] * t2[(i * n + b) * n + c];
                    }
                    out.t[a][b][c] = -s;
                }
            }
        }
        Ok(out)
    }

    /// Derivative frame of `ψ` at `p`.
    pub fn jet_at(&self, p: &[T]) -> Result<JetFrame<T>, GeometryError> {
        JetFrame::from_jet(p, &self.jet3(p)?)
    }

    /// `ψ` as a potential on `D*`, so that it can be dualised again.
    pub fn as_potential(self: &Arc<Self>) -> Potential<T> {
        let c = T::one() / self.potential.target_constant;
        Potential::new(PotentialKind::Legendre, ScalarField::Dual(Arc::clone(self)), c)
    }
}

/// Legendre dual of `potential`, normalised at the center of `domain`.
pub fn legendre_dual<T: Real>(potential: &Potential<T>, domain: &Domain<T>) -> Result<LegendreDual<T>, GeometryError> {
    let c = domain.center();
    if potential.jet_at(&c).is_err() {
        return Err(GeometryError::NonConvexAt { x: to_f64s(&c) });
    }
    LegendreDual::with_start(potential.clone(), c)
}

/// Metric, symplectic and holomorphic data on `M` and `W` at one point.
///
/// Real coordinates on `M` are ordered `(x¹..xⁿ, y¹..yⁿ)`; on `W` the chart
/// `(x¹..xⁿ, y₁..yₙ)` uses the base coordinates of `D` and the dual fiber
/// coordinates, and `*_dual` matrices use `(x₁..xₙ, y₁..yₙ)` with `x_j = ∂φ/∂x^j`.
#[derive(Clone, Debug, PartialEq)]
pub struct StructureTensors<T> {
    pub g_m: Mat<T>,
    pub omega_m: Mat<T>,
    pub j_m: Mat<T>,
    /// Coefficient of `Ω_M = dz¹∧⋯∧dzⁿ`, `z^j = x^j + i y^j`.
    pub omega_hol_m: Complex<T>,
    pub g_w: Mat<T>,
    pub omega_w: Mat<T>,
    pub omega_w_dual: Mat<T>,
    pub g_w_dual: Mat<T>,
    /// Coefficient of `Ω_W = dz₁∧⋯∧dzₙ`, `z_j = x_j + i y_j`.
    pub omega_hol_w: Complex<T>,
    pub fiber_volume: T,
    pub dual_fiber_volume: T,
}

fn block<T: Real>(n: usize, tl: &Mat<T>, tr: &Mat<T>, bl: &Mat<T>, br: &Mat<T>) -> Mat<T> {
    Mat::from_fn(2 * n, 2 * n, |i, j| match (i < n, j < n) {
        (true, true) => tl[(i, j)],
        (true, false) => tr[(i, j - n)],
        (false, true) => bl[(i - n, j)],
        (false, false) => br[(i - n, j - n)],
    })
}

/// Assembles [`StructureTensors`] from a frame and the lattice covolume.
pub fn structures<T: Real>(jet: &JetFrame<T>, covolume: T) -> StructureTensors<T> {
    let n = jet.dim();
    let z = Mat::zeros(n, n);
    let id = Mat::identity(n);
    let phi = &jet.hessian;
    let inv = &jet.inverse_hessian;
    let g_m = block(n, phi, &z, &z, phi);
    let j_m = block(n, &z, &id.scale(-T::one()), &id, &z);
    let omega_m = j_m.transpose().matmul(&g_m);
    let g_w = block(n, phi, &z, &z, inv);
    let omega_w = block(n, &z, phi, &phi.scale(-T::one()), &z);
    let omega_w_dual = block(n, &z, &id, &id.scale(-T::one()), &z);
    let g_w_dual = block(n, inv, &z, &z, inv);
    let sqrt_det = jet.det_hessian.sqrt();
    StructureTensors {
        g_m,
        omega_m,
        j_m,
        omega_hol_m: Complex::new(T::one(), T::zero()),
        g_w,
        omega_w,
        omega_w_dual,
        g_w_dual,
        omega_hol_w: Complex::new(T::one(), T::zero()),
        fiber_volume: sqrt_det * covolume,
        dual_fiber_volume: covolume / sqrt_det,
    }
}

impl<T: Real> StructureTensors<T> {
    /// Complex structure on `W` in the base chart, `J_W = −g_W⁻¹ ω_W`.
    pub fn j_w(&self) -> Mat<T> {
        let gi = self.g_w.spd_inverse().expect("g_W is positive definite");
        gi.matmul(&self.omega_w).scale(-T::one())
    }
}

/// `det g_t − det g_1` where `g_t = φ_jk((1/t) dx dx + t dy dy)`.
pub fn shrink_volume_check<T: Real>(potential: &Potential<T>, t: T, x: &[T]) -> Result<T, GeometryError> {
    let f = potential.jet_at(x)?;
    let n = f.dim();
    let z = Mat::zeros(n, n);
    let g = |s: T| block(n, &f.hessian.scale(T::one() / s), &z, &z, &f.hessian.scale(s)).det();
    Ok(g(t) - g(T::one()))
}

/// `φ + iη` with a complex Monge-Ampère constant.
#[derive(Clone, Debug)]
pub struct ComplexifiedPotential<T: Real> {
    pub phi: Potential<T>,
    pub eta: ScalarField<T>,
    pub target: Complex<T>,
}

impl<T: Real> ComplexifiedPotential<T> {
    pub fn new(phi: Potential<T>, eta: ScalarField<T>, target: Complex<T>) -> Self {
        Self { phi, eta, target }
    }

    /// `θ_jk = φ_jk + i η_jk` at `x`, after checking `Re θ > 0`.
    pub fn theta(&self, x: &[T]) -> Result<Mat<Complex<T>>, GeometryError> {
        let f = self.phi.jet_at(x)?;
        let e = self.eta.jet3(x)?;
        let n = f.dim();
        Ok(Mat::from_fn(n, n, |a, b| Complex::new(f.hessian[(a, b)], (e.h[a][b] + e.h[b][a]) * T::lit(0.5))))
    }
}

/// `det θ_jk − C`.
pub fn complexified_residual<T: Real>(cp: &ComplexifiedPotential<T>, x: &[T]) -> Result<Complex<T>, GeometryError> {
    Ok(cp.theta(x)?.det() - cp.target)
}

/// Antisymmetric part of `∂_l φ_jk` in `(l, j)`, from the third-derivative jet;
/// this is the coefficient of `dω_M` on `dx^l ∧ dx^j ∧ dy^k`.
pub fn omega_closedness_residual<T: Real>(jet: &JetFrame<T>) -> T {
    let n = jet.dim();
    let mut m = T::zero();
    for l in 0..n {
        for j in 0..n {
            for k in 0..n {
                m = m.max((jet.third(l, j, k) - jet.third(j, l, k)).abs());
            }
        }
    }
    m
}

/// Same closedness check with `∂_l φ_jk` taken by centered differences of the Hessian.
pub fn omega_closedness_fd<T: Real>(potential: &Potential<T>, x: &[T], h: T) -> Result<T, GeometryError> {
    let n = x.len();
    let mut d = vec![Mat::<T>::zeros(n, n); n];
    for l in 0..n {
        let mut xp = x.to_vec();
        let mut xm = x.to_vec();
        xp[l] += h;
        xm[l] -= h;
        let hp = potential.jet_at(&xp)?.hessian;
        let hm = potential.jet_at(&xm)?.hessian;
        d[l] = hp.sub(&hm).scale(T::one() / (T::lit(2.0) * h));
    }
    let mut m = T::zero();
    for l in 0..n {
        for j in 0..n {
            for k in 0..n {
                m = m.max((d[l][(j, k)] - d[j][(l, k)]).abs());
            }
        }
    }
    Ok(m)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn flat_jet_is_identity() {
        let p = Potential::<f64>::flat(2);
        let j = p.jet_at(&[0.3, -0.1]).unwrap();
        assert_eq!(j.hessian, Mat::identity(2));
        assert!(j.third_slice().iter().all(|&v| v == 0.0));
        assert_eq!(j.det_hessian, 1.0);
    }

    #[test]
    fn ma_residual_of_diag_two_one() {
        let p = Potential::<f64>::diagonal(&[2.0, 1.0]);
        let j = p.jet_at(&[0.1, 0.2]).unwrap();
        assert_eq!(ma_residual(&j, 1.0), 1.0);
    }

    #[test]
    fn exact_ma_potential_has_unit_determinant() {
        for n in 1..=4 {
            let p = Potential::<f64>::exact_ma(n, 3.0);
            let x: Vec<f64> = (0..n).map(|i| 0.2 - 0.15 * i as f64).collect();
            let j = p.jet_at(&x).unwrap();
            assert!((j.det_hessian - 1.0).abs() < 1e-12, "n = {n}: {}", j.det_hessian);
        }
    }

    #[test]
    fn non_convex_is_rejected() {
        let p = Potential::<f64>::diagonal(&[1.0, -1.0]);
        assert!(matches!(p.jet_at(&[0.0, 0.0]), Err(GeometryError::NonConvexAt { .. })));
    }

    #[test]
    fn jet_rejects_points_outside_domain() {
        let d = Domain::<f64>::cube(2, -1.0, 1.0).unwrap();
        let p = Potential::flat(2);
        assert!(matches!(jet(&p, &d, &[1.5, 0.0]), Err(GeometryError::OutOfDomain { .. })));
    }

    #[test]
    fn domain_validation() {
        assert!(Domain::<f64>::new(vec![(1.0, 0.0)]).is_err());
        let d = Domain::<f64>::cube(2, -1.0, 1.0).unwrap();
        assert!(d.clone().with_grid_resolution(10).is_err());
        assert!(d.clone().with_fiber_resolution(4).is_err());
        assert!(d.with_covolume(0.0).is_err());
    }
}
