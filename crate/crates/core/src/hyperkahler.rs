//! The `Tⁿ`-invariant hyperkähler structure on `T*(TD)` at a point: metric,
//! the three Kähler forms and complex structures, and the Lefschetz operators
//! of the Kähler forms on the exterior algebra of the cotangent space.

use crate::exterior::ExteriorVec;
use crate::geometry::{GeometryError, JetFrame, Potential};
use crate::linalg::Mat;
use crate::scalar::Real;
use num_complex::Complex;
use thiserror::Error;

#[derive(Debug, Error)]
pub enum HyperkahlerError {
    #[error("exterior algebra of T*(TD) is materialised only for n <= 2, got n = {n}")]
    DimensionTooLarge { n: usize },
    #[error("sphere parameter has norm {norm}, expected 1")]
    NotUnit { norm: f64 },
    #[error("point has {found} coordinates, expected {expected}")]
    WrongPoint { expected: usize, found: usize },
    #[error(transparent)]
    Geometry(#[from] GeometryError),
}

/// Coordinate blocks of `T*(TD)`, in order `x, y, u, v`.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Block {
    X,
    Y,
    U,
    V,
}

/// Hyperkähler data at a point of `T*(TD)`. Two-forms are antisymmetric matrices
/// `Ω` with `ω(X, Y) = Xᵀ Ω Y`; complex structures satisfy `ω(X, Y) = g(IX, Y)`.
#[derive(Clone, Debug)]
pub struct HKFrame<T: Real> {
    pub n: usize,
    pub point: Vec<T>,
    pub g: Mat<T>,
    pub omega_i: Mat<T>,
    pub omega_j: Mat<T>,
    pub omega_k: Mat<T>,
    pub i: Mat<T>,
    pub j: Mat<T>,
    pub k: Mat<T>,
    /// `η_J = ω_I + i ω_K`.
    pub eta_j: Mat<Complex<T>>,
    hessian: Mat<T>,
    inverse_hessian: Mat<T>,
}

impl<T: Real> HKFrame<T> {
    pub fn index(&self, b: Block, j: usize) -> usize {
        index(self.n, b, j)
    }

    /// Inverse metric on covectors.
    pub fn cometric(&self) -> Mat<T> {
        self.g.spd_inverse().expect("metric is positive definite")
    }
}

fn index(n: usize, b: Block, j: usize) -> usize {
    let off = match b {
        Block::X => 0,
        Block::Y => n,
        Block::U => 2 * n,
        Block::V => 3 * n,
    };
    off + j
}

fn put<T: Real>(w: &mut Mat<T>, a: usize, b: usize, v: T) {
    w[(a, b)] += v;
    w[(b, a)] -= v;
}

/// Assembles the frame at `(x, y, u, v)`; the structure depends on `x` only,
/// through the jet of `φ`.
pub fn build<T: Real>(jet: &JetFrame<T>, point: &[T]) -> Result<HKFrame<T>, HyperkahlerError> {
    let n = jet.dim();
    if point.len() != 4 * n {
        return Err(HyperkahlerError::WrongPoint { expected: 4 * n, found: point.len() });
    }
    let m = 4 * n;
    let p = &jet.hessian;
    let pi = &jet.inverse_hessian;
    let ix = |b, j| index(n, b, j);
    let mut g = Mat::zeros(m, m);
    let mut wi = Mat::zeros(m, m);
    let mut wj = Mat::zeros(m, m);
    let mut wk = Mat::zeros(m, m);
    for a in 0..n {
        for b in 0..n {
            g[(ix(Block::X, a), ix(Block::X, b))] = p[(a, b)];
            g[(ix(Block::Y, a), ix(Block::Y, b))] = p[(a, b)];
            g[(ix(Block::U, a), ix(Block::U, b))] = pi[(a, b)];
            g[(ix(Block::V, a), ix(Block::V, b))] = pi[(a, b)];
            put(&mut wj, ix(Block::X, a), ix(Block::Y, b), p[(a, b)]);
            put(&mut wj, ix(Block::U, a), ix(Block::V, b), -pi[(a, b)]);
        }
        put(&mut wi, ix(Block::X, a), ix(Block::U, a), T::one());
        put(&mut wi, ix(Block::Y, a), ix(Block::V, a), T::one());
        put(&mut wk, ix(Block::X, a), ix(Block::V, a), T::one());
        put(&mut wk, ix(Block::Y, a), ix(Block::U, a), -T::one());
    }
    let ginv = g.spd_inverse().ok_or(GeometryError::NonConvexAt { x: jet.point.iter().map(|v| v.as_f64()).collect() })?;
    let raise = |w: &Mat<T>| ginv.matmul(w).scale(-T::one());
    let eta_j = Mat::from_fn(m, m, |a, b| Complex::new(wi[(a, b)], wk[(a, b)]));
    Ok(HKFrame {
        n,
        point: point.to_vec(),
        i: raise(&wi),
        j: raise(&wj),
        k: raise(&wk),
        g,
        omega_i: wi,
        omega_j: wj,
        omega_k: wk,
        eta_j,
        hessian: p.clone(),
        inverse_hessian: pi.clone(),
    })
}

/// `‖I² + 1‖, ‖J² + 1‖, ‖K² + 1‖, ‖IJK + 1‖` in max-norm.
pub fn quaternion_residuals<T: Real>(f: &HKFrame<T>) -> [T; 4] {
    let id = Mat::identity(4 * f.n);
    [
        f.i.matmul(&f.i).add(&id).max_abs(),
        f.j.matmul(&f.j).add(&id).max_abs(),
        f.k.matmul(&f.k).add(&id).max_abs(),
        f.i.matmul(&f.j).matmul(&f.k).add(&id).max_abs(),
    ]
}

/// `max ‖Sᵀ g S − g‖` over `S = I, J, K`.
pub fn compatibility_residual<T: Real>(f: &HKFrame<T>) -> T {
    [&f.i, &f.j, &f.k]
        .iter()
        .map(|s| s.transpose().matmul(&f.g).matmul(s).sub(&f.g).max_abs())
        .fold(T::zero(), |a, b| a.max(b))
}

/// `max ‖Re η_J − ω_I‖, ‖Im η_J − ω_K‖`.
pub fn eta_residual<T: Real>(f: &HKFrame<T>) -> T {
    let m = 4 * f.n;
    let mut worst = T::zero();
    for a in 0..m {
        for b in 0..m {
            worst = worst.max((f.eta_j[(a, b)].re - f.omega_i[(a, b)]).abs());
            worst = worst.max((f.eta_j[(a, b)].im - f.omega_k[(a, b)]).abs());
        }
    }
    worst
}

/// Point `t = (a, b, c)` of the unit sphere.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct SphereParam<T> {
    pub t: [T; 3],
}

impl<T: Real> SphereParam<T> {
    pub fn new(t: [T; 3]) -> Result<Self, HyperkahlerError> {
        let norm = (t[0] * t[0] + t[1] * t[1] + t[2] * t[2]).sqrt();
        if (norm - T::one()).abs() > T::lit(1e-14) {
            return Err(HyperkahlerError::NotUnit { norm: norm.as_f64() });
        }
        Ok(Self { t })
    }

    pub fn normalized(t: [T; 3]) -> Result<Self, HyperkahlerError> {
        let norm = (t[0] * t[0] + t[1] * t[1] + t[2] * t[2]).sqrt();
        Self::new([t[0] / norm, t[1] / norm, t[2] / norm])
    }
}

/// `ω_t = a ω_I + b ω_J + c ω_K`.
pub fn omega_t<T: Real>(f: &HKFrame<T>, t: &SphereParam<T>) -> Mat<T> {
    f.omega_i.scale(t.t[0]).add(&f.omega_j.scale(t.t[1])).add(&f.omega_k.scale(t.t[2]))
}

/// `(min singular value of ω_t, ‖(g⁻¹ω_t)² + 1‖)`.
pub fn kahler_family_check<T: Real>(f: &HKFrame<T>, t: &SphereParam<T>) -> (T, T) {
    let w = omega_t(f, t);
    let s = w.singular_values();
    let smin = s.iter().fold(T::infinity(), |a, b| a.min(*b));
    let e = f.cometric().matmul(&w);
    (smin, e.matmul(&e).add(&Mat::identity(4 * f.n)).max_abs())
}

/// Lefschetz operators of a frame on the exterior algebra of the `4n` covectors
/// `dx^j, dy^j, du_j, dv_j` (generator order as [`Block`]).
pub struct Lefschetz<T: Real> {
    m: usize,
    cometric: Mat<T>,
}

impl<T: Real> Lefschetz<T> {
    pub fn new(f: &HKFrame<T>) -> Result<Self, HyperkahlerError> {
        if f.n > 2 {
            return Err(HyperkahlerError::DimensionTooLarge { n: f.n });
        }
        Ok(Self { m: 4 * f.n, cometric: f.cometric() })
    }

    /// The two-form `½ Σ Ω_ab e^a ∧ e^b`.
    pub fn two_form(&self, w: &Mat<T>) -> ExteriorVec<T> {
        let mut v = ExteriorVec::zero(self.m);
        for a in 0..self.m {
            for b in a + 1..self.m {
                *v.coeff_mut((1 << a) | (1 << b)) = Complex::new(w[(a, b)], T::zero());
            }
        }
        v
    }

    /// `ω ∧ v`.
    pub fn lower(&self, w: &Mat<T>, v: &ExteriorVec<T>) -> ExteriorVec<T> {
        self.two_form(w).wedge(v)
    }

    /// Contraction with the vector dual to `e^a`.
    fn raise_contract(&self, a: usize, v: &ExteriorVec<T>) -> ExteriorVec<T> {
        let mut out = ExteriorVec::zero(self.m);
        for p in 0..self.m {
            let c = self.cometric[(a, p)];
            if c != T::zero() {
                out.add_scaled(Complex::new(c, T::zero()), &v.contract_gen(p));
            }
        }
        out
    }

    /// Metric adjoint of `ω ∧ ·`: `Σ_{a<b} Ω_ab ι(e^b♯) ι(e^a♯)`.
    pub fn dual(&self, w: &Mat<T>, v: &ExteriorVec<T>) -> ExteriorVec<T> {
        let mut out = ExteriorVec::zero(self.m);
        for a in 0..self.m {
            for b in a + 1..self.m {
                let c = w[(a, b)];
                if c != T::zero() {
                    let t = self.raise_contract(b, &self.raise_contract(a, v));
                    out.add_scaled(Complex::new(c, T::zero()), &t);
                }
            }
        }
        out
    }

    /// `[L_{w1}, Λ_{w2}] v`.
    pub fn commutator(&self, w1: &Mat<T>, w2: &Mat<T>, v: &ExteriorVec<T>) -> ExteriorVec<T> {
        self.lower(w1, &self.dual(w2, v)).sub(&self.dual(w2, &self.lower(w1, v)))
    }
}

/// Hard-Lefschetz triple of `ω`: max deviation of `[L, Λ]` from `H = deg − 2n`
/// and of `[H, L]` from `2L`, over all basis forms.
pub fn lefschetz_triple_residual<T: Real>(f: &HKFrame<T>, w: &Mat<T>) -> Result<T, HyperkahlerError> {
    let l = Lefschetz::new(f)?;
    let m = 4 * f.n;
    let h = |v: &ExteriorVec<T>| {
        let mut out = ExteriorVec::zero(m);
        for (mask, c) in v.coeffs().iter().enumerate() {
            let d = T::lit(mask.count_ones() as f64 - 2.0 * f.n as f64);
            *out.coeff_mut(mask as u32) = *c * d;
        }
        out
    };
    let mut worst = T::zero();
    for mask in 0..(1u32 << m) {
        let e = ExteriorVec::basis(m, mask);
        worst = worst.max(l.commutator(w, w, &e).sub(&h(&e)).max_abs());
        let le = l.lower(w, &e);
        let hl = h(&le).sub(&l.lower(w, &h(&e)));
        worst = worst.max(hl.sub(&le.scale(Complex::new(T::lit(2.0), T::zero()))).max_abs());
    }
    Ok(worst)
}

/// The one-forms `dx^j + i du^j` and `dy^j + i dv^j` with `du^j = Σ φ^{jk} du_k`.
pub fn holomorphic_one_forms<T: Real>(f: &HKFrame<T>, conjugate: bool) -> Vec<ExteriorVec<T>> {
    let n = f.n;
    let s = if conjugate { -T::one() } else { T::one() };
    let mut out = Vec::new();
    for (base, fiber) in [(Block::X, Block::U), (Block::Y, Block::V)] {
        for j in 0..n {
            let mut v = ExteriorVec::zero(4 * n);
            *v.coeff_mut(1 << f.index(base, j)) = Complex::new(T::one(), T::zero());
            for k in 0..n {
                *v.coeff_mut(1 << f.index(fiber, k)) += Complex::new(T::zero(), s * f.inverse_hessian[(j, k)]);
            }
            out.push(v);
        }
    }
    out
}

/// Expresses a one-form in the basis `dx^j, dy^j, du^j, dv^j` (with `du^j = φ^{jk}du_k`).
fn normalised_coefficients<T: Real>(f: &HKFrame<T>, v: &ExteriorVec<T>) -> Vec<Complex<T>> {
    let n = f.n;
    let mut out = Vec::with_capacity(4 * n);
    for b in [Block::X, Block::Y] {
        for j in 0..n {
            out.push(v.coeff(1 << f.index(b, j)));
        }
    }
    // du_k = φ_kj du^j, so the du^j coefficient is Σ_k c_k φ_kj.
    for b in [Block::U, Block::V] {
        for j in 0..n {
            let mut s = Complex::new(T::zero(), T::zero());
            for k in 0..n {
                s += v.coeff(1 << f.index(b, k)) * f.hessian[(k, j)];
            }
            out.push(s);
        }
    }
    out
}

fn max_diff<T: Real>(f: &HKFrame<T>, a: &ExteriorVec<T>, b: &ExteriorVec<T>) -> T {
    normalised_coefficients(f, &a.sub(b)).iter().fold(T::zero(), |w, c| w.max(c.norm()))
}

/// `[L_J, Λ_K]` on one-forms against multiplication by `i` on the `I`-holomorphic
/// forms `dx^j + i du^j`, `dy^j + i dv^j` and by `−i` on their conjugates;
/// returns the max coefficient deviation.
pub fn lj_lambdak_check<T: Real>(f: &HKFrame<T>) -> Result<T, HyperkahlerError> {
    let l = Lefschetz::new(f)?;
    let mut worst = T::zero();
    for (conj, s) in [(false, T::one()), (true, -T::one())] {
        for a in holomorphic_one_forms(f, conj) {
            let lhs = l.commutator(&f.omega_j, &f.omega_k, &a);
            worst = worst.max(max_diff(f, &lhs, &a.scale(Complex::new(T::zero(), s))));
        }
    }
    Ok(worst)
}

/// `[L_J, Λ_K]` on all one-forms against the action `α ↦ α ∘ I`.
pub fn lj_lambdak_action_residual<T: Real>(f: &HKFrame<T>) -> Result<T, HyperkahlerError> {
    let l = Lefschetz::new(f)?;
    let m = 4 * f.n;
    let mut worst = T::zero();
    for a in 0..m {
        let e = ExteriorVec::basis(m, 1 << a);
        let lhs = l.commutator(&f.omega_j, &f.omega_k, &e);
        // (e^a ∘ I)(e_b) = I_ab.
        let mut rhs = ExteriorVec::zero(m);
        for b in 0..m {
            *rhs.coeff_mut(1 << b) = Complex::new(f.i[(a, b)], T::zero());
        }
        worst = worst.max(lhs.sub(&rhs).max_abs());
    }
    Ok(worst)
}

/// Deviation of `[L_J, Λ_K](dx^j + i du^j)` from the conjugate form `i(dx^j − i du^j)`
/// (and likewise for `dy^j + i dv^j`).
pub fn lj_lambdak_flip_residual<T: Real>(f: &HKFrame<T>) -> Result<T, HyperkahlerError> {
    let l = Lefschetz::new(f)?;
    let mut worst = T::zero();
    for (a, b) in holomorphic_one_forms(f, false).iter().zip(holomorphic_one_forms(f, true)) {
        let lhs = l.commutator(&f.omega_j, &f.omega_k, a);
        worst = worst.max(max_diff(f, &lhs, &b.scale(Complex::new(T::zero(), T::one()))));
    }
    Ok(worst)
}

/// Exterior derivative of a two-form field `x ↦ Ω(x)` depending on the base
/// coordinates only, by fourth-order central differences.
pub fn exterior_derivative<T: Real>(
    n: usize,
    x: &[T],
    h: T,
    field: impl Fn(&[T]) -> Result<Mat<T>, HyperkahlerError>,
) -> Result<ExteriorVec<T>, HyperkahlerError> {
    let m = 4 * n;
    let mut d = ExteriorVec::zero(m);
    for l in 0..n {
        let at = |s: T| {
            let mut y = x.to_vec();
            y[l] += s * h;
            field(&y)
        };
        let (p2, p1, m1, m2) = (at(T::lit(2.0))?, at(T::one())?, at(-T::one())?, at(T::lit(-2.0))?);
        let dw = Mat::from_fn(m, m, |a, b| {
            (-p2[(a, b)] + T::lit(8.0) * p1[(a, b)] - T::lit(8.0) * m1[(a, b)] + m2[(a, b)]) / (T::lit(12.0) * h)
        });
        let mut two = ExteriorVec::zero(m);
        for a in 0..m {
            for b in a + 1..m {
                *two.coeff_mut((1 << a) | (1 << b)) = Complex::new(dw[(a, b)], T::zero());
            }
        }
        d.add_assign(&ExteriorVec::basis(m, 1 << l).wedge(&two));
    }
    Ok(d)
}

/// Finite-difference exterior derivatives of the three Kähler forms at a base point.
#[derive(Clone, Debug)]
pub struct Closedness<T> {
    pub d_omega_i: T,
    pub d_omega_k: T,
    /// Full `dω_J`.
    pub d_omega_j: T,
    /// `dω_J` restricted to `TD` (three-forms in `dx, dy` only).
    pub d_omega_j_base: T,
    /// `max |∂_l φ^{jk}|`, the analytic size of `d(φ^{jk} du_j ∧ dv_k)`.
    pub fiber_defect: T,
}

pub fn closedness<T: Real>(potential: &Potential<T>, x: &[T], h: T) -> Result<Closedness<T>, HyperkahlerError> {
    let n = potential.dim();
    let frame = |y: &[T]| -> Result<HKFrame<T>, HyperkahlerError> {
        let mut p = y.to_vec();
        p.resize(4 * n, T::zero());
        build(&potential.jet_at(y)?, &p)
    };
    let dj = exterior_derivative(n, x, h, |y| Ok(frame(y)?.omega_j))?;
    let base_mask = (1usize << (2 * n)) - 1;
    let mut base = T::zero();
    for (mask, c) in dj.coeffs().iter().enumerate() {
        if mask & !base_mask == 0 {
            base = base.max(c.norm());
        }
    }
    let jet = potential.jet_at(x)?;
    let pi = &jet.inverse_hessian;
    let mut defect = T::zero();
    for l in 0..n {
        let pl = Mat::from_fn(n, n, |a, b| jet.third(a, b, l));
        defect = defect.max(pi.matmul(&pl).matmul(pi).max_abs());
    }
    Ok(Closedness {
        d_omega_i: exterior_derivative(n, x, h, |y| Ok(frame(y)?.omega_i))?.max_abs(),
        d_omega_k: exterior_derivative(n, x, h, |y| Ok(frame(y)?.omega_k))?.max_abs(),
        d_omega_j: dj.max_abs(),
        d_omega_j_base: base,
        fiber_defect: defect,
    })
}

/// `max(‖g|_{TD} − g_M‖, ‖ω_J|_{TD} − ω_M‖)` against the base Calabi-Yau structures.
pub fn restriction_residual<T: Real>(f: &HKFrame<T>, jet: &JetFrame<T>, covolume: T) -> T {
    let s = crate::geometry::structures(jet, covolume);
    let m = 2 * f.n;
    let mut worst = T::zero();
    for a in 0..m {
        for b in 0..m {
            worst = worst.max((f.g[(a, b)] - s.g_m[(a, b)]).abs());
            worst = worst.max((f.omega_j[(a, b)] - s.omega_m[(a, b)]).abs());
        }
    }
    worst
}

#[cfg(test)]
mod tests {
    use super::*;

    fn frame(pot: &Potential<f64>, x: &[f64]) -> HKFrame<f64> {
        let n = x.len();
        let mut p = x.to_vec();
        p.extend((0..3 * n).map(|k| 0.1 * k as f64));
        build(&pot.jet_at(x).unwrap(), &p).unwrap()
    }

    #[test]
    fn flat_frame_is_standard_quaternions() {
        let f = frame(&Potential::flat(1), &[0.0]);
        assert_eq!(f.g, Mat::identity(4));
        // Order (x, y, u, v): I maps ∂x ↦ ∂u, J maps ∂x ↦ ∂y, K maps ∂x ↦ ∂v.
        assert_eq!(f.i[(2, 0)], 1.0);
        assert_eq!(f.j[(1, 0)], 1.0);
        assert_eq!(f.k[(3, 0)], 1.0);
        assert_eq!(quaternion_residuals(&f), [0.0; 4]);
    }

    #[test]
    fn scaled_frame() {
        let f = frame(&Potential::diagonal(&[2.0]), &[0.3]);
        let expected = Mat::from_fn(4, 4, |a, b| if a == b { [2.0, 2.0, 0.5, 0.5][a] } else { 0.0 });
        assert!(f.g.sub(&expected).max_abs() < 1e-15);
        assert!(f.j.matmul(&f.j).add(&Mat::identity(4)).max_abs() < 1e-14);
        assert_eq!(eta_residual(&f), 0.0);
    }

    #[test]
    fn quaternion_relations_on_curved_frames() {
        let pot = Potential::exp_tilt(2, 0.4);
        for x in [[0.1, -0.3], [0.4, 0.2], [-0.5, 0.5]] {
            let f = frame(&pot, &x);
            assert!(quaternion_residuals(&f).iter().all(|r| *r < 1e-12));
            assert!(compatibility_residual(&f) < 1e-12);
            assert!(restriction_residual(&f, &pot.jet_at(&x).unwrap(), 1.0) < 1e-15);
        }
    }

    #[test]
    fn sphere_of_kahler_forms() {
        let f = frame(&Potential::flat(2), &[0.0, 0.0]);
        let t = SphereParam::normalized([1.0, 1.0, 1.0]).unwrap();
        let (smin, sq) = kahler_family_check(&f, &t);
        assert!((smin - 1.0).abs() < 1e-12 && sq < 1e-12);
        let t = SphereParam::new([1.0, 0.0, 0.0]).unwrap();
        let (_, sq) = kahler_family_check(&f, &t);
        assert!(sq == f.i.matmul(&f.i).add(&Mat::identity(8)).max_abs());
        assert!(SphereParam::new([1.0, 1.0, 0.0]).is_err());
    }

    #[test]
    fn commutator_acts_as_i_on_holomorphic_one_forms() {
        let f = frame(&Potential::flat(1), &[0.0]);
        assert!(lj_lambdak_check(&f).unwrap() < 1e-15);
        assert!(lj_lambdak_action_residual(&f).unwrap() < 1e-15);
        assert!((lj_lambdak_flip_residual(&f).unwrap() - 2.0).abs() < 1e-14);
        for x in [[0.1, -0.3], [0.4, 0.2]] {
            let f = frame(&Potential::exp_tilt(2, 0.4), &x);
            assert!(lj_lambdak_check(&f).unwrap() < 1e-12);
            assert!(lj_lambdak_action_residual(&f).unwrap() < 1e-12);
        }
        let f = frame(&Potential::exp_tilt(3, 0.4), &[0.0, 0.0, 0.0]);
        assert!(matches!(lj_lambdak_check(&f), Err(HyperkahlerError::DimensionTooLarge { n: 3 })));
    }

    #[test]
    fn each_kahler_form_gives_a_lefschetz_triple() {
        let f = frame(&Potential::exp_tilt(2, 0.4), &[0.2, -0.1]);
        for w in [&f.omega_i, &f.omega_j, &f.omega_k] {
            assert!(lefschetz_triple_residual(&f, w).unwrap() < 1e-11);
        }
    }

    #[test]
    fn kahler_forms_are_closed() {
        let c = closedness(&Potential::exp_tilt(2, 0.4), &[0.1, 0.2], 1e-3).unwrap();
        assert_eq!(c.d_omega_i, 0.0);
        assert_eq!(c.d_omega_k, 0.0);
        assert!(c.d_omega_j_base < 1e-10);
        let c = closedness(&Potential::diagonal(&[2.0, 3.0]), &[0.1, 0.2], 1e-3).unwrap();
        assert!(c.d_omega_j < 1e-12);
    }

    #[test]
    fn fiber_part_of_omega_j_is_not_closed_on_curved_backgrounds() {
        let c = closedness(&Potential::<f64>::exp_tilt(2, 0.4), &[0.1, 0.2], 1e-3).unwrap();
        assert!(c.fiber_defect > 1e-2);
        assert!((c.d_omega_j - c.fiber_defect).abs() < 1e-9);
    }
}
