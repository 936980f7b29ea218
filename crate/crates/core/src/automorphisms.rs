//! Automorphisms of `M` induced from diffeomorphisms of the base: the tangent
//! lift `f_B`, the cotangent lift `f_A` through the Legendre transform, and the
//! fiberwise dualisation exchanging them between `M` and `W`.

use crate::geometry::{Domain, GeometryError, ScalarField};
use crate::jet::Jet3;
use crate::linalg::Mat;
use crate::mirror::MirrorContext;
use crate::scalar::Real;
use num_complex::Complex;
use std::sync::Arc;
use thiserror::Error;

#[derive(Debug, Error)]
pub enum AutomorphismError {
    #[error("Jacobian is singular at {x:?}")]
    SingularJacobian { x: Vec<f64> },
    #[error("Newton inversion failed to reach {y:?}")]
    NotInvertible { y: Vec<f64> },
    #[error("image {x:?} leaves the domain")]
    OutOfDomain { x: Vec<f64> },
    #[error("map is not linear along fibers (defect {defect:e})")]
    NotFiberLinear { defect: f64 },
    #[error(transparent)]
    Geometry(#[from] GeometryError),
}

type Result<T> = std::result::Result<T, AutomorphismError>;

fn to_f64s<T: Real>(x: &[T]) -> Vec<f64> {
    x.iter().map(|v| v.as_f64()).collect()
}

/// Second-order jet of a map `Rⁿ → Rⁿ`: value, Jacobian `d[(k, a)] = ∂_a F^k`
/// and Hessians `dd[k][(a, b)] = ∂_a ∂_b F^k`.
#[derive(Clone, Debug, PartialEq)]
pub struct VJet2<T> {
    pub v: Vec<T>,
    pub d: Mat<T>,
    pub dd: Vec<Mat<T>>,
}

impl<T: Real> VJet2<T> {
    pub fn from_jets(js: &[Jet3<T>]) -> Self {
        let n = js.len();
        Self {
            v: js.iter().map(|j| j.v).collect(),
            d: Mat::from_fn(n, n, |k, a| js[k].g[a]),
            dd: js.iter().map(|j| Mat::from_fn(n, n, |a, b| j.h[a][b])).collect(),
        }
    }

    /// Jet of `∇f` from the third-order jet of a scalar `f`.
    pub fn gradient_of(j: &Jet3<T>) -> Self {
        let n = j.n;
        Self {
            v: j.g[..n].to_vec(),
            d: Mat::from_fn(n, n, |k, a| j.h[k][a]),
            dd: (0..n).map(|k| Mat::from_fn(n, n, |a, b| j.t[k][a][b])).collect(),
        }
    }

    /// Jet of `outer ∘ inner`, where `outer` is taken at `inner.v`.
    pub fn compose(outer: &Self, inner: &Self) -> Self {
        let n = inner.v.len();
        let d = outer.d.matmul(&inner.d);
        let dd = (0..outer.v.len())
            .map(|k| {
                let mut m = inner.d.transpose().matmul(&outer.dd[k]).matmul(&inner.d);
                for c in 0..n {
                    let s = outer.d[(k, c)];
                    if s != T::zero() {
                        m = m.add(&inner.dd[c].scale(s));
                    }
                }
                m
            })
            .collect();
        Self { v: outer.v.clone(), d, dd }
    }

    /// Jet of the local inverse at `self.v`, evaluated to return `x`.
    pub fn invert(&self, x: &[T]) -> Option<Self> {
        let n = x.len();
        let ai = self.d.inverse()?;
        let dd = (0..n)
            .map(|k| {
                let mut m = Mat::zeros(n, n);
                for c in 0..n {
                    let s = ai[(k, c)];
                    if s != T::zero() {
                        m = m.add(&ai.transpose().matmul(&self.dd[c]).matmul(&ai).scale(-s));
                    }
                }
                m
            })
            .collect();
        Some(Self { v: x.to_vec(), d: ai, dd })
    }

    pub fn max_second(&self) -> T {
        self.dd.iter().fold(T::zero(), |m, h| m.max(h.max_abs()))
    }
}

type MapFn<T> = Arc<dyn Fn(&[T]) -> Result<VJet2<T>> + Send + Sync>;

/// A diffeomorphism of the base with derivatives to order two.
#[derive(Clone)]
pub struct BaseMap<T: Real> {
    pub n: usize,
    f: MapFn<T>,
    /// `Some(true)` for maps known or detected to be affine.
    pub affine: Option<bool>,
}

impl<T: Real> std::fmt::Debug for BaseMap<T> {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "BaseMap(n = {}, affine = {:?})", self.n, self.affine)
    }
}

/// Second derivatives below this are treated as zero when detecting affine maps.
pub const AFFINE_THRESHOLD: f64 = 1e-12;

impl<T: Real> BaseMap<T> {
    pub fn from_jet_fn(n: usize, f: impl Fn(&[Jet3<T>]) -> Vec<Jet3<T>> + Send + Sync + 'static) -> Self {
        Self {
            n,
            f: Arc::new(move |x| Ok(VJet2::from_jets(&f(&Jet3::vars(x))))),
            affine: None,
        }
    }

    pub fn from_fn(n: usize, f: impl Fn(&[T]) -> Result<VJet2<T>> + Send + Sync + 'static) -> Self {
        Self { n, f: Arc::new(f), affine: None }
    }

    /// `x ↦ A x + b`.
    pub fn affine(a: Mat<T>, b: Vec<T>) -> Self {
        let n = b.len();
        Self {
            n,
            f: Arc::new(move |x| {
                let mut v = a.matvec(x);
                for (vi, bi) in v.iter_mut().zip(&b) {
                    *vi += *bi;
                }
                Ok(VJet2 { v, d: a.clone(), dd: vec![Mat::zeros(n, n); n] })
            }),
            affine: Some(true),
        }
    }

    pub fn identity(n: usize) -> Self {
        Self::affine(Mat::identity(n), vec![T::zero(); n])
    }

    pub fn jet(&self, x: &[T]) -> Result<VJet2<T>> {
        (self.f)(x)
    }

    pub fn value(&self, x: &[T]) -> Result<Vec<T>> {
        Ok(self.jet(x)?.v)
    }

    /// `self ∘ inner`.
    pub fn compose(&self, inner: &Self) -> Self {
        let (outer, inn) = (self.f.clone(), inner.f.clone());
        let affine = match (self.affine, inner.affine) {
            (Some(true), Some(true)) => Some(true),
            _ => None,
        };
        Self {
            n: self.n,
            f: Arc::new(move |x| {
                let i = inn(x)?;
                let o = outer(&i.v)?;
                Ok(VJet2::compose(&o, &i))
            }),
            affine,
        }
    }

    /// Sets the affine flag from the second derivatives at `points`.
    pub fn detect_affine(&mut self, points: &[Vec<T>]) -> Result<bool> {
        let mut worst = T::zero();
        for x in points {
            worst = worst.max(self.jet(x)?.max_second());
        }
        let affine = worst < T::lit(AFFINE_THRESHOLD);
        self.affine = Some(affine);
        Ok(affine)
    }

    /// Checks that `points` map into `domain` with nonsingular Jacobian.
    pub fn validate(&self, domain: &Domain<T>, points: &[Vec<T>]) -> Result<()> {
        for x in points {
            let j = self.jet(x)?;
            if !domain.contains(&j.v) {
                return Err(AutomorphismError::OutOfDomain { x: to_f64s(&j.v) });
            }
            if j.d.det().abs() < T::eps() * T::lit(1e3) {
                return Err(AutomorphismError::SingularJacobian { x: to_f64s(x) });
            }
        }
        Ok(())
    }

    /// Solves `self(x) = y` by damped Newton from `start`.
    pub fn solve(&self, y: &[T], start: &[T]) -> Result<Vec<T>> {
        let fail = || AutomorphismError::NotInvertible { y: to_f64s(y) };
        let norm = |j: &VJet2<T>| j.v.iter().zip(y).fold(T::zero(), |m, (a, b)| m.max((*a - *b).abs()));
        let scale = y.iter().fold(T::one(), |m, v| m.max(v.abs()));
        let tol = T::eps() * T::lit(64.0) * scale;
        let mut x = start.to_vec();
        let mut j = self.jet(&x).map_err(|_| fail())?;
        let mut r = norm(&j);
        for _ in 0..100 {
            if r <= tol {
                return Ok(x);
            }
            let lu = j.d.lu().ok_or_else(fail)?;
            let res: Vec<T> = j.v.iter().zip(y).map(|(a, b)| *a - *b).collect();
            let step = lu.solve(&res);
            let mut lambda = T::one();
            let mut accepted = false;
            for _ in 0..40 {
                let trial: Vec<T> = x.iter().zip(&step).map(|(a, s)| *a - lambda * *s).collect();
                if let Ok(tj) = self.jet(&trial) {
                    let tr = norm(&tj);
                    if tr < r || tr <= tol {
                        x = trial;
                        j = tj;
                        r = tr;
                        accepted = true;
                        break;
                    }
                }
                lambda *= T::lit(0.5);
            }
            if !accepted {
                break;
            }
        }
        if r <= tol * T::lit(1e4) {
            Ok(x)
        } else {
            Err(fail())
        }
    }

    /// The inverse map, evaluated by Newton started at `start`.
    pub fn inverse(&self, start: Vec<T>) -> Self {
        let me = self.clone();
        Self {
            n: self.n,
            f: Arc::new(move |y| {
                let x = me.solve(y, &start)?;
                let j = me.jet(&x)?;
                j.invert(&x).ok_or_else(|| AutomorphismError::SingularJacobian { x: to_f64s(&x) })
            }),
            affine: self.affine,
        }
    }
}

/// The gradient map `∇f` of a scalar field as a base map.
pub fn gradient_map<T: Real>(field: ScalarField<T>) -> BaseMap<T> {
    let n = field.dim();
    BaseMap::from_fn(n, move |x| Ok(VJet2::gradient_of(&field.jet3(x)?)))
}

/// Gradient maps of a potential and of its Legendre dual.
#[derive(Clone, Debug)]
pub struct LegendrePair<T: Real> {
    /// `∇φ : D → D*`.
    pub to_dual: BaseMap<T>,
    /// `∇ψ : D* → D`.
    pub from_dual: BaseMap<T>,
}

impl<T: Real> LegendrePair<T> {
    pub fn of(ctx: &MirrorContext<T>) -> Self {
        Self {
            to_dual: gradient_map(ctx.potential.field.clone()),
            from_dual: gradient_map(ScalarField::Dual(ctx.dual.clone())),
        }
    }

    /// The pair seen from `W`, whose base coordinates are those of `D*`.
    pub fn swapped(&self) -> Self {
        Self { to_dual: self.from_dual.clone(), from_dual: self.to_dual.clone() }
    }

    /// `∇φ ∘ f ∘ ∇ψ`, the map `f` written in dual coordinates.
    pub fn conjugate(&self, f: &BaseMap<T>) -> BaseMap<T> {
        let mut c = self.to_dual.compose(&f.compose(&self.from_dual));
        c.affine = None;
        c
    }

    /// `f̂ = ∇φ ∘ f⁻¹ ∘ ∇ψ` on `D*`, with `f⁻¹` by Newton from `start ∈ D`.
    pub fn hat(&self, f: &BaseMap<T>, start: Vec<T>) -> BaseMap<T> {
        self.conjugate(&f.inverse(start))
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Lift {
    /// `(x, y) ↦ (h(x), Dh(x) y)`.
    Tangent,
    /// `(x, y) ↦ (h(x), Dh(x)^{-T} y)`.
    Cotangent,
}

type LiftFn<T> = Arc<dyn Fn(&[T], &[T]) -> Result<(Vec<T>, Vec<T>)> + Send + Sync>;

/// A map of a torus-fibred space, evaluated in (base, fiber) coordinates.
#[derive(Clone)]
pub struct InducedMap<T: Real> {
    pub n: usize,
    pub lift: Option<Lift>,
    pub base: Option<BaseMap<T>>,
    eval: LiftFn<T>,
}

impl<T: Real> std::fmt::Debug for InducedMap<T> {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "InducedMap(n = {}, lift = {:?})", self.n, self.lift)
    }
}

impl<T: Real> InducedMap<T> {
    pub fn lift_of(h: BaseMap<T>, lift: Lift) -> Self {
        let hh = h.clone();
        let eval: LiftFn<T> = Arc::new(move |x, y| {
            let j = hh.jet(x)?;
            let m = match lift {
                Lift::Tangent => j.d,
                Lift::Cotangent => j
                    .d
                    .inverse()
                    .ok_or_else(|| AutomorphismError::SingularJacobian { x: to_f64s(x) })?
                    .transpose(),
            };
            Ok((j.v, m.matvec(y)))
        });
        Self { n: h.n, lift: Some(lift), base: Some(h), eval }
    }

    pub fn from_fn(n: usize, f: impl Fn(&[T], &[T]) -> Result<(Vec<T>, Vec<T>)> + Send + Sync + 'static) -> Self {
        Self { n, lift: None, base: None, eval: Arc::new(f) }
    }

    pub fn eval(&self, x: &[T], y: &[T]) -> Result<(Vec<T>, Vec<T>)> {
        (self.eval)(x, y)
    }

    /// `self ∘ inner`.
    pub fn compose(&self, inner: &Self) -> Self {
        let (a, b) = (self.eval.clone(), inner.eval.clone());
        let base = match (&self.base, &inner.base) {
            (Some(p), Some(q)) if self.lift == inner.lift => Some(p.compose(q)),
            _ => None,
        };
        let lift = if self.lift == inner.lift { self.lift } else { None };
        Self {
            n: self.n,
            lift,
            base,
            eval: Arc::new(move |x, y| {
                let (x1, y1) = b(x, y)?;
                a(&x1, &y1)
            }),
        }
    }

    /// `(h(x), M(x))` with the fiber action read off as `M(x) e_k`.
    pub fn fiber_matrix(&self, x: &[T]) -> Result<(Vec<T>, Mat<T>)> {
        let n = self.n;
        let (b0, f0) = self.eval(x, &vec![T::zero(); n])?;
        let mut m = Mat::zeros(n, n);
        for k in 0..n {
            let mut e = vec![T::zero(); n];
            e[k] = T::one();
            let (_, fk) = self.eval(x, &e)?;
            for a in 0..n {
                m[(a, k)] = fk[a] - f0[a];
            }
        }
        Ok((b0, m))
    }

    /// Largest violation of fiber linearity at `x` over the probe vectors.
    pub fn fiber_linearity_defect(&self, x: &[T], probes: &[Vec<T>]) -> Result<T> {
        let (b0, m) = self.fiber_matrix(x)?;
        let mut worst = T::zero();
        for y in probes {
            let (b, f) = self.eval(x, y)?;
            let my = m.matvec(y);
            for a in 0..self.n {
                worst = worst.max((b[a] - b0[a]).abs()).max((f[a] - my[a]).abs());
            }
        }
        Ok(worst)
    }
}

/// `f_B = df`, acting on `(x, y)`.
pub fn induce_b<T: Real>(f: &BaseMap<T>) -> InducedMap<T> {
    InducedMap::lift_of(f.clone(), Lift::Tangent)
}

/// `f_A`, the pullback of one-forms by `f̂`, acting on `(x_j, y^j)` with
/// `x_j = ∂φ/∂x^j`: the cotangent lift of `f̂⁻¹ = ∇φ ∘ f ∘ ∇ψ`.
pub fn induce_a<T: Real>(f: &BaseMap<T>, pair: &LegendrePair<T>) -> InducedMap<T> {
    InducedMap::lift_of(pair.conjugate(f), Lift::Cotangent)
}

/// `∂f_B/∂z̄(t)` at `(x, y)` for `z(t) = x/t + i y`.
#[derive(Clone, Debug)]
pub struct DbarB<T> {
    /// `t (i/2) Σ_j f^k_{jl} y^j`, indexed `(k, l)`.
    pub formula: Mat<Complex<T>>,
    /// Max deviation of a finite-difference evaluation from `formula`.
    pub fd_deviation: T,
}

fn stencil<T: Real>(g: impl Fn(T) -> Result<Vec<Complex<T>>>, h: T) -> Result<Vec<Complex<T>>> {
    let (p2, p1, m1, m2) = (g(T::lit(2.0) * h)?, g(h)?, g(-h)?, g(T::lit(-2.0) * h)?);
    let w = T::lit(12.0) * h;
    Ok((0..p1.len())
        .map(|k| (-p2[k] + p1[k] * T::lit(8.0) - m1[k] * T::lit(8.0) + m2[k]) / w)
        .collect())
}

pub fn dbar_b_residual<T: Real>(f: &BaseMap<T>, x: &[T], y: &[T], t: T) -> Result<DbarB<T>> {
    let n = f.n;
    let j = f.jet(x)?;
    let half_i = Complex::new(T::zero(), T::lit(0.5));
    let formula = Mat::from_fn(n, n, |k, l| {
        let s = (0..n).fold(T::zero(), |s, a| s + j.dd[k][(a, l)] * y[a]);
        half_i * (t * s)
    });
    // t ∂/∂z̄ = ½ (t ∂_x + i ∂_y) applied to f/t + i Df y, without dividing by t.
    let h = T::lit(1e-3);
    let i = Complex::new(T::zero(), T::one());
    let mut dev = T::zero();
    for l in 0..n {
        let dx = stencil(
            |s| {
                let mut xs = x.to_vec();
                xs[l] += s;
                let js = f.jet(&xs)?;
                let dy = js.d.matvec(y);
                Ok((0..n).map(|k| Complex::new(js.v[k], t * dy[k])).collect())
            },
            h,
        )?;
        let dy = stencil(
            |s| {
                let mut ys = y.to_vec();
                ys[l] += s;
                Ok(j.d.matvec(&ys).into_iter().map(|v| Complex::new(T::zero(), v)).collect())
            },
            h,
        )?;
        for k in 0..n {
            let fd = (dx[k] + i * dy[k]) * T::lit(0.5);
            dev = dev.max((fd - formula[(k, l)]).norm());
        }
    }
    Ok(DbarB { formula, fd_deviation: dev })
}

/// Symmetric part of the pullback of `ϖ = Σ dx_j ⊗ dy^j` under `f̂*`.
#[derive(Clone, Debug)]
pub struct VarpiResidual<T> {
    /// `Σ_k y^k ∂²f̂_k / ∂x_j ∂x_l`.
    pub formula: Mat<T>,
    /// Max deviation of the finite-difference pullback from `formula`.
    pub fd_deviation: T,
}

/// `ϖ`-defect of `f_A` at `(p, y)` in dual coordinates, given `f̂`.
pub fn varpi_residual<T: Real>(f_hat: &BaseMap<T>, p: &[T], y: &[T]) -> Result<VarpiResidual<T>> {
    let n = f_hat.n;
    let j = f_hat.jet(p)?;
    let formula = Mat::from_fn(n, n, |a, b| (0..n).fold(T::zero(), |s, k| s + y[k] * j.dd[k][(a, b)]));
    // f̂* sends y^j to Σ_k ∂_j f̂_k y^k; differentiate that along the base.
    let h = T::lit(1e-3);
    let mut dev = T::zero();
    for l in 0..n {
        let d = stencil(
            |s| {
                let mut ps = p.to_vec();
                ps[l] += s;
                let js = f_hat.jet(&ps)?;
                Ok(js.d.transpose().matvec(y).into_iter().map(|v| Complex::new(v, T::zero())).collect())
            },
            h,
        )?;
        for a in 0..n {
            dev = dev.max((d[a].re - formula[(a, l)]).abs());
        }
    }
    Ok(VarpiResidual { formula, fd_deviation: dev })
}

/// Finite-difference Jacobian of an induced map at `(x, y)`, `2n × 2n`.
pub fn fd_jacobian<T: Real>(f: &InducedMap<T>, x: &[T], y: &[T], h: T) -> Result<Mat<T>> {
    let n = f.n;
    let mut jac = Mat::zeros(2 * n, 2 * n);
    for c in 0..2 * n {
        let d = stencil(
            |s| {
                let (mut xs, mut ys) = (x.to_vec(), y.to_vec());
                if c < n {
                    xs[c] += s;
                } else {
                    ys[c - n] += s;
                }
                let (a, b) = f.eval(&xs, &ys)?;
                Ok(a.into_iter().chain(b).map(|v| Complex::new(v, T::zero())).collect())
            },
            h,
        )?;
        for r in 0..2 * n {
            jac[(r, c)] = d[r].re;
        }
    }
    Ok(jac)
}

/// `‖Jᵀ Ω J − Ω‖` for `ω = Σ dx_j ∧ dy^j`.
pub fn symplectic_residual<T: Real>(f: &InducedMap<T>, x: &[T], y: &[T]) -> Result<T> {
    let n = f.n;
    let omega = Mat::from_fn(2 * n, 2 * n, |a, b| {
        if b == a + n {
            T::one()
        } else if a == b + n {
            -T::one()
        } else {
            T::zero()
        }
    });
    let j = fd_jacobian(f, x, y, T::lit(1e-3))?;
    Ok(j.transpose().matmul(&omega).matmul(&j).sub(&omega).max_abs())
}

/// `‖Jᵀ G(F(x)) J − G(x)‖` for a block metric `G = diag(g(x), h(x))` on (base, fiber).
pub fn metric_pullback_residual<T: Real>(
    f: &InducedMap<T>,
    x: &[T],
    y: &[T],
    metric: impl Fn(&[T]) -> Result<(Mat<T>, Mat<T>)>,
) -> Result<T> {
    let n = f.n;
    let block = |x: &[T]| -> Result<Mat<T>> {
        let (g, h) = metric(x)?;
        Ok(Mat::from_fn(2 * n, 2 * n, |a, b| match (a < n, b < n) {
            (true, true) => g[(a, b)],
            (false, false) => h[(a - n, b - n)],
            _ => T::zero(),
        }))
    };
    let (fx, _) = f.eval(x, y)?;
    let j = fd_jacobian(f, x, y, T::lit(1e-3))?;
    Ok(j.transpose().matmul(&block(&fx)?).matmul(&j).sub(&block(x)?).max_abs())
}

/// Fiberwise dual of a fiber-linear map: `(x, ξ) ↦ (h(x), M(x)^{-T} ξ)`,
/// carrying flat connections on a fiber to the image fiber.
pub fn mirror_flip<T: Real>(f: &InducedMap<T>, samples: &[Vec<T>]) -> Result<InducedMap<T>> {
    let n = f.n;
    let probes: Vec<Vec<T>> = (0..n)
        .map(|k| (0..n).map(|a| T::lit(0.3 + 0.7 * ((a + 2 * k) % 3) as f64)).collect())
        .collect();
    let mut defect = T::zero();
    for x in samples {
        defect = defect.max(f.fiber_linearity_defect(x, &probes)?);
    }
    if defect > T::lit(1e-9) {
        return Err(AutomorphismError::NotFiberLinear { defect: defect.as_f64() });
    }
    let lift = f.lift.map(|l| match l {
        Lift::Tangent => Lift::Cotangent,
        Lift::Cotangent => Lift::Tangent,
    });
    let g = f.clone();
    Ok(InducedMap {
        n,
        lift,
        base: f.base.clone(),
        eval: Arc::new(move |x, y| {
            let (b, m) = g.fiber_matrix(x)?;
            let mi = m.inverse().ok_or_else(|| AutomorphismError::SingularJacobian { x: to_f64s(x) })?;
            Ok((b, mi.transpose().matvec(y)))
        }),
    })
}

/// Max distance between two induced maps over sample points.
pub fn map_distance<T: Real>(a: &InducedMap<T>, b: &InducedMap<T>, points: &[(Vec<T>, Vec<T>)]) -> Result<T> {
    let mut worst = T::zero();
    for (x, y) in points {
        let (ax, ay) = a.eval(x, y)?;
        let (bx, by) = b.eval(x, y)?;
        for k in 0..a.n {
            worst = worst.max((ax[k] - bx[k]).abs()).max((ay[k] - by[k]).abs());
        }
    }
    Ok(worst)
}

/// `f_A` rewritten in the coordinates `(x^j, y^j)` of `M = TD`.
pub fn a_in_base_coordinates<T: Real>(f_a: &InducedMap<T>, pair: &LegendrePair<T>) -> InducedMap<T> {
    let (fa, pair) = (f_a.clone(), pair.clone());
    InducedMap::from_fn(f_a.n, move |x, y| {
        let p = pair.to_dual.value(x)?;
        let (q, eta) = fa.eval(&p, y)?;
        Ok((pair.from_dual.value(&q)?, eta))
    })
}

/// `max ‖Dfᵀ g_D(f(x)) Df − g_D(x)‖` at `points`.
pub fn base_isometry_residual<T: Real>(f: &BaseMap<T>, ctx: &MirrorContext<T>, points: &[Vec<T>]) -> Result<T> {
    let mut worst = T::zero();
    for x in points {
        let j = f.jet(x)?;
        let g0 = ctx.potential.jet_at(x)?.hessian;
        let g1 = ctx.potential.jet_at(&j.v)?.hessian;
        worst = worst.max(j.d.transpose().matmul(&g1).matmul(&j.d).sub(&g0).max_abs());
    }
    Ok(worst)
}

/// `max |f_A − f_B|` in the coordinates of `M`, which vanishes for isometries of `g_D`.
pub fn isometry_bridge_residual<T: Real>(
    f: &BaseMap<T>,
    ctx: &MirrorContext<T>,
    points: &[(Vec<T>, Vec<T>)],
) -> Result<T> {
    let pair = LegendrePair::of(ctx);
    let fa = a_in_base_coordinates(&induce_a(f, &pair), &pair);
    map_distance(&fa, &induce_b(f), points)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::Potential;

    fn bump(eps: f64) -> BaseMap<f64> {
        BaseMap::from_jet_fn(1, move |x| vec![x[0] + x[0] * x[0] * eps])
    }

    fn ctx(p: Potential<f64>, n: usize) -> MirrorContext<f64> {
        MirrorContext::new(p, Domain::cube(n, -1.0, 1.0).unwrap()).unwrap()
    }

    #[test]
    fn affine_lift() {
        let a = Mat::from_fn(2, 2, |i, j| [[1.0, 0.5], [0.0, 1.0]][i][j]);
        let f = BaseMap::affine(a, vec![0.1, -0.2]);
        let (x, y) = induce_b(&f).eval(&[0.3, 0.4], &[1.0, 2.0]).unwrap();
        assert_eq!(x, vec![0.3 + 0.2 + 0.1, 0.4 - 0.2]);
        assert_eq!(y, vec![2.0, 2.0]);
    }

    #[test]
    fn dbar_of_quadratic_bump() {
        let (eps, y, t) = (0.2, 0.7, 0.5);
        let r = dbar_b_residual(&bump(eps), &[0.1], &[y], t).unwrap();
        // f'' = 2ε, so t (i/2) f'' y = t i ε y.
        assert!((r.formula[(0, 0)] - Complex::new(0.0, t * eps * y)).norm() < 1e-15);
        assert!(r.fd_deviation < 1e-8);
        let r0 = dbar_b_residual(&bump(eps), &[0.1], &[y], 0.0).unwrap();
        assert_eq!(r0.formula.max_abs(), 0.0);
        assert!(r0.fd_deviation < 1e-8);
    }

    #[test]
    fn affine_detection() {
        let pts: Vec<Vec<f64>> = (0..5).map(|k| vec![-0.5 + 0.25 * k as f64]).collect();
        let mut f = bump(0.0);
        assert!(f.detect_affine(&pts).unwrap());
        let mut g = bump(0.1);
        assert!(!g.detect_affine(&pts).unwrap());
    }

    #[test]
    fn hat_of_linear_map_on_flat_background_is_its_inverse() {
        let c = ctx(Potential::flat(2), 2);
        let pair = LegendrePair::of(&c);
        let a = Mat::from_fn(2, 2, |i, j| [[2.0, 1.0], [1.0, 1.0]][i][j]);
        let f = BaseMap::affine(a.clone(), vec![0.0, 0.0]);
        let fh = pair.hat(&f, vec![0.0, 0.0]);
        let j = fh.jet(&[0.3, -0.2]).unwrap();
        assert!(j.d.sub(&a.inverse().unwrap()).max_abs() < 1e-12);
        assert!(j.max_second() < 1e-12);
    }

    #[test]
    fn varpi_defect_of_bump() {
        let c = ctx(Potential::flat(1), 1);
        let pair = LegendrePair::of(&c);
        let fh = pair.hat(&bump(0.1), vec![0.0]);
        let p = [0.2];
        let r = varpi_residual(&fh, &p, &[0.8]).unwrap();
        // f̂ = f⁻¹, f̂'' = −f''/f'³ at f⁻¹(p).
        let x = (-1.0 + (1.0f64 + 0.4 * p[0]).sqrt()) / 0.2;
        let expected = 0.8 * (-0.2 / (1.0 + 0.2 * x).powi(3));
        assert!((r.formula[(0, 0)] - expected).abs() < 1e-12);
        assert!(r.fd_deviation < 1e-7);
        assert_eq!(varpi_residual(&fh, &p, &[0.0]).unwrap().formula.max_abs(), 0.0);
    }

    #[test]
    fn induced_a_is_symplectic() {
        let c = ctx(Potential::exp_tilt(1, 0.3), 1);
        let pair = LegendrePair::of(&c);
        let fa = induce_a(&bump(0.1), &pair);
        let p = pair.to_dual.value(&[0.1]).unwrap();
        assert!(symplectic_residual(&fa, &p, &[0.4]).unwrap() < 1e-8);
    }

    #[test]
    fn double_flip_is_identity() {
        let f = induce_b(&bump(0.1));
        let samples = vec![vec![0.1], vec![-0.3]];
        let ff = mirror_flip(&mirror_flip(&f, &samples).unwrap(), &samples).unwrap();
        let pts: Vec<_> = samples.iter().map(|x| (x.clone(), vec![0.6])).collect();
        assert!(map_distance(&f, &ff, &pts).unwrap() < 1e-10);
    }

    #[test]
    fn non_linear_fibers_are_rejected() {
        let f = InducedMap::from_fn(1, |x: &[f64], y: &[f64]| Ok((x.to_vec(), vec![y[0] * y[0]])));
        assert!(matches!(mirror_flip(&f, &[vec![0.0]]), Err(AutomorphismError::NotFiberLinear { .. })));
    }
}
