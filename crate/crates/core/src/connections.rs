//! A- and B-connections on the base, special Lagrangian sections and their
//! Fourier transforms to `U(1)` connections on `W`, the deformed harmonic
//! tangent transform, and correlation functions of cycles.

use crate::exterior::ExteriorVec;
use crate::forms::{dbar_vec, del_vec, dz, dzbar, FormError, FormJet, MultiIndex, Side, TnForm};
use crate::geometry::{GeometryError, JetFrame, Potential, ScalarField};
use crate::linalg::Mat;
use crate::mirror::{removal_sign, top_form_factor, transform_jet, MirrorContext};
use crate::scalar::Real;
use num_complex::Complex;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Flavor {
    A,
    B,
}

/// Torsion-free affine connection on the base by its Christoffel symbols
/// `Γ^j_{lm}`, stored at index `(j·n + l)·n + m`.
#[derive(Clone, Debug, PartialEq)]
pub struct Connection<T> {
    pub n: usize,
    pub flavor: Flavor,
    pub gamma: Vec<T>,
}

impl<T: Real> Connection<T> {
    pub fn christoffel(&self, j: usize, l: usize, m: usize) -> T {
        self.gamma[(j * self.n + l) * self.n + m]
    }

    pub fn from_fn(n: usize, flavor: Flavor, f: impl Fn(usize, usize, usize) -> T) -> Self {
        let mut gamma = Vec::with_capacity(n * n * n);
        for j in 0..n {
            for l in 0..n {
                for m in 0..n {
                    gamma.push(f(j, l, m));
                }
            }
        }
        Self { n, flavor, gamma }
    }

    /// `max |Γ^j_{lm} − Γ^j_{ml}|`.
    pub fn torsion(&self) -> T {
        let n = self.n;
        let mut worst = T::zero();
        for j in 0..n {
            for l in 0..n {
                for m in 0..n {
                    worst = worst.max((self.christoffel(j, l, m) - self.christoffel(j, m, l)).abs());
                }
            }
        }
        worst
    }

    pub fn max_abs(&self) -> T {
        self.gamma.iter().fold(T::zero(), |a, b| a.max(b.abs()))
    }
}

/// `Γ^j_{lm} = Σ_k φ^{jk} φ_{klm}`.
pub fn a_connection<T: Real>(jet: &JetFrame<T>) -> Connection<T> {
    let n = jet.dim();
    Connection::from_fn(n, Flavor::A, |j, l, m| (0..n).map(|k| jet.inverse_hessian[(j, k)] * jet.third(k, l, m)).sum())
}

/// The flat connection `d` in affine coordinates.
pub fn b_connection<T: Real>(n: usize) -> Connection<T> {
    Connection::from_fn(n, Flavor::B, |_, _, _| T::zero())
}

/// Levi-Civita connection of `g_D = Σ φ_jk dx^j dx^k` by the Koszul formula.
pub fn levi_civita<T: Real>(jet: &JetFrame<T>) -> Connection<T> {
    let n = jet.dim();
    // ∂_l g_km = φ_kml.
    let dg = |k: usize, m: usize, l: usize| jet.third(k, m, l);
    Connection::from_fn(n, Flavor::A, |j, l, m| {
        let mut s = T::zero();
        for k in 0..n {
            s += jet.inverse_hessian[(j, k)] * (dg(k, m, l) + dg(k, l, m) - dg(l, m, k));
        }
        s * T::lit(0.5)
    })
}

/// `max |(Γ_A + Γ_B)/2 − Γ_LC|`.
pub fn levi_civita_midpoint_residual<T: Real>(jet: &JetFrame<T>) -> T {
    let a = a_connection(jet);
    let b = b_connection::<T>(jet.dim());
    let lc = levi_civita(jet);
    let mut worst = T::zero();
    for k in 0..a.gamma.len() {
        worst = worst.max(((a.gamma[k] + b.gamma[k]) * T::lit(0.5) - lc.gamma[k]).abs());
    }
    worst
}

/// Curvature `R^j_{k,lm} = ∂_lΓ^j_{km} − ∂_mΓ^j_{kl} + Γ^j_{ls}Γ^s_{km} − Γ^j_{ms}Γ^s_{kl}`
/// of the A-connection at `x`, derivatives by fourth-order central differences
/// with step `h`; returns the largest component.
pub fn a_curvature_residual<T: Real>(potential: &Potential<T>, x: &[T], h: T) -> Result<T, GeometryError> {
    let n = potential.dim();
    let g0 = a_connection(&potential.jet_at(x)?);
    let mut dgamma = Vec::with_capacity(n);
    for l in 0..n {
        let at = |s: T| -> Result<Connection<T>, GeometryError> {
            let mut y = x.to_vec();
            y[l] += s * h;
            Ok(a_connection(&potential.jet_at(&y)?))
        };
        let (p2, p1, m1, m2) = (at(T::lit(2.0))?, at(T::one())?, at(-T::one())?, at(T::lit(-2.0))?);
        let d: Vec<T> = (0..g0.gamma.len())
            .map(|k| (-p2.gamma[k] + T::lit(8.0) * p1.gamma[k] - T::lit(8.0) * m1.gamma[k] + m2.gamma[k]) / (T::lit(12.0) * h))
            .collect();
        dgamma.push(d);
    }
    let idx = |j: usize, l: usize, m: usize| (j * n + l) * n + m;
    let mut worst = T::zero();
    for j in 0..n {
        for k in 0..n {
            for l in 0..n {
                for m in 0..n {
                    let mut r = dgamma[l][idx(j, k, m)] - dgamma[m][idx(j, k, l)];
                    for s in 0..n {
                        r += g0.christoffel(j, l, s) * g0.christoffel(s, k, m) - g0.christoffel(j, m, s) * g0.christoffel(s, k, l);
                    }
                    worst = worst.max(r.abs());
                }
            }
        }
    }
    Ok(worst)
}

/// Components of `∇ω_M = Σ φ_jkl dx^l⊗(dx^j∧dy^k) − Σ φ_sk Γ^s_{jl} dx^l⊗(dx^j∧dy^k)`
/// for a given connection; returns the largest.
pub fn nabla_omega_with<T: Real>(jet: &JetFrame<T>, conn: &Connection<T>) -> T {
    let n = jet.dim();
    let mut worst = T::zero();
    for l in 0..n {
        for j in 0..n {
            for k in 0..n {
                let mut r = jet.third(j, k, l);
                for s in 0..n {
                    r -= jet.hessian[(s, k)] * conn.christoffel(s, j, l);
                }
                worst = worst.max(r.abs());
            }
        }
    }
    worst
}

/// `∇ω_M` for the A-connection.
pub fn nabla_omega_residual<T: Real>(jet: &JetFrame<T>) -> T {
    nabla_omega_with(jet, &a_connection(jet))
}

/// Adds `ε` times a fixed pattern antisymmetric in the lower indices.
pub fn torsion_perturbation<T: Real>(conn: &Connection<T>, eps: T) -> Connection<T> {
    let n = conn.n;
    Connection::from_fn(n, conn.flavor, |j, l, m| {
        let sign = if l < m {
            T::one()
        } else if l > m {
            -T::one()
        } else {
            T::zero()
        };
        conn.christoffel(j, l, m) + eps * sign * T::lit((j + 1) as f64)
    })
}

/// Christoffel symbols of `conn` in the dual coordinates `x_p = ∂φ/∂x^p`:
/// `Γ̃^r_{pq} = φ_{ra}(Γ^a_{bc} φ^{bp} φ^{cq} + ψ_{apq})`, where `ψ_{apq}` are the
/// third derivatives of the Legendre dual potential at `x_p`.
pub fn to_dual_coordinates<T: Real>(conn: &Connection<T>, jet: &JetFrame<T>, dual_jet: &JetFrame<T>) -> Connection<T> {
    let n = jet.dim();
    let pinv = &jet.inverse_hessian;
    Connection::from_fn(n, conn.flavor, |r, p, q| {
        let mut s = T::zero();
        for a in 0..n {
            let mut inner = dual_jet.third(a, p, q);
            for b in 0..n {
                for c in 0..n {
                    inner += conn.christoffel(a, b, c) * pinv[(b, p)] * pinv[(c, q)];
                }
            }
            s += jet.hessian[(r, a)] * inner;
        }
        s
    })
}

/// `max |Γ̃|` for the A-connection written in dual coordinates; the transformed
/// connection is `d` there.
pub fn connection_duality_residual<T: Real>(jet: &JetFrame<T>, dual_jet: &JetFrame<T>) -> T {
    to_dual_coordinates(&a_connection(jet), jet, dual_jet).max_abs()
}

/// `max |Γ̃_B − Γ_A(ψ)|`: the B-connection in dual coordinates against the
/// A-connection regenerated from the dual potential.
pub fn b_to_a_residual<T: Real>(jet: &JetFrame<T>, dual_jet: &JetFrame<T>) -> T {
    let moved = to_dual_coordinates(&b_connection(jet.dim()), jet, dual_jet);
    let regenerated = a_connection(dual_jet);
    moved.gamma.iter().zip(&regenerated.gamma).fold(T::zero(), |w, (a, b)| w.max((*a - *b).abs()))
}

/// `Hess_A(f)_{lk} = f_lk − φ^{pq} φ_{lkp} f_q`.
pub fn hess_a<T: Real>(f_grad: &[T], f_hess: &Mat<T>, jet: &JetFrame<T>) -> Mat<T> {
    let n = jet.dim();
    let gamma = a_connection(jet);
    Mat::from_fn(n, n, |l, k| {
        let mut s = f_hess[(l, k)];
        for q in 0..n {
            s -= gamma.christoffel(q, l, k) * f_grad[q];
        }
        s
    })
}

/// Special Lagrangian section `y^j = Σ φ^{jk} ∂f/∂x^k` with flat fiber connection `d + i de`.
#[derive(Clone, Debug)]
pub struct SLagSection<T: Real> {
    pub f: ScalarField<T>,
    pub e: ScalarField<T>,
    pub theta: T,
}

impl<T: Real> SLagSection<T> {
    pub fn new(f: ScalarField<T>, theta: T) -> Self {
        let n = f.dim();
        Self { f, e: ScalarField::zero(n), theta }
    }

    pub fn with_connection(mut self, e: ScalarField<T>) -> Self {
        self.e = e;
        self
    }

    /// Fiber coordinates `y(x)`.
    pub fn section(&self, jet: &JetFrame<T>) -> Result<Vec<T>, GeometryError> {
        let fj = self.f.jet3(&jet.point)?;
        let g: Vec<T> = fj.g[..jet.dim()].to_vec();
        Ok(jet.inverse_hessian.matvec(&g))
    }

    /// `Hess_A(f)` at the jet's point.
    pub fn hessian(&self, jet: &JetFrame<T>) -> Result<Mat<T>, GeometryError> {
        let n = jet.dim();
        let fj = self.f.jet3(&jet.point)?;
        Ok(hess_a(&fj.g[..n], &Mat::from_fn(n, n, |a, b| fj.h[a][b]), jet))
    }
}

/// `det(φ_jk + i Hess_A(f)_jk)`.
pub fn slag_determinant<T: Real>(s: &SLagSection<T>, jet: &JetFrame<T>) -> Result<Complex<T>, GeometryError> {
    let n = jet.dim();
    let h = s.hessian(jet)?;
    Ok(Mat::from_fn(n, n, |a, b| Complex::new(jet.hessian[(a, b)], h[(a, b)])).det())
}

/// `|Im e^{iθ} det(φ_jk + i Hess_A(f)_jk)|`.
pub fn slag_phase_residual<T: Real>(s: &SLagSection<T>, jet: &JetFrame<T>) -> Result<T, GeometryError> {
    let d = slag_determinant(s, jet)?;
    Ok((Complex::new(s.theta.cos(), s.theta.sin()) * d).im.abs())
}

/// Phase `−arg` of the mean of `det(φ + i Hess_A f)` over the samples.
pub fn section_phase<T: Real>(f: &ScalarField<T>, potential: &Potential<T>, samples: &[Vec<T>]) -> Result<T, GeometryError> {
    let s = SLagSection::new(f.clone(), T::zero());
    let mut acc = Complex::new(T::zero(), T::zero());
    for x in samples {
        acc += slag_determinant(&s, &potential.jet_at(x)?)?;
    }
    Ok(-acc.im.atan2(acc.re))
}

/// `U(1)` connection `d + i(Σ b^j dy_j + Σ a_j dx_j)` on `W` at one base point,
/// in dual coordinates, with its curvature.
#[derive(Clone, Debug, PartialEq)]
pub struct UOneConnection<T> {
    pub n: usize,
    /// `a_j = ∂e/∂x_j`.
    pub a: Vec<T>,
    /// `b^j = y^j`.
    pub b: Vec<T>,
    /// `∂b^j/∂x_k` at `(k, j)`.
    pub db: Mat<T>,
    /// `∂a_j/∂x_k` at `(k, j)`.
    pub da: Mat<T>,
    /// Curvature in the real basis: bit `j` is `dx_j`, bit `n + j` is `dy_j`.
    pub curvature: ExteriorVec<T>,
}

impl<T: Real> UOneConnection<T> {
    /// Curvature in the complex basis `dz_j = dx_j + i dy_j` of `W`.
    pub fn curvature_complex(&self) -> ExteriorVec<T> {
        real_to_complex(&self.curvature, self.n)
    }

    /// `(2,0)` part of the curvature.
    pub fn f20(&self) -> ExteriorVec<T> {
        bidegree_part(&self.curvature_complex(), self.n, 2, 0)
    }

    /// `(0,2)` part of the curvature.
    pub fn f02(&self) -> ExteriorVec<T> {
        bidegree_part(&self.curvature_complex(), self.n, 0, 2)
    }
}

fn bidegree_part<T: Real>(v: &ExteriorVec<T>, n: usize, p: usize, q: usize) -> ExteriorVec<T> {
    let mut out = ExteriorVec::zero(2 * n);
    for (m, c) in v.coeffs().iter().enumerate() {
        let (i, j) = crate::forms::split_mask(n, m as u32);
        if i.len() == p && j.len() == q {
            *out.coeff_mut(m as u32) = *c;
        }
    }
    out
}

/// Rewrites a form by substituting a one-form for each generator, multiplicatively.
fn substitute<T: Real>(v: &ExteriorVec<T>, images: &[ExteriorVec<T>]) -> ExteriorVec<T> {
    let m = images.len();
    let mut out = ExteriorVec::zero(m);
    for (mask, c) in v.coeffs().iter().enumerate() {
        if c.re == T::zero() && c.im == T::zero() {
            continue;
        }
        let mut acc = ExteriorVec::scalar(m, *c);
        for (k, img) in images.iter().enumerate() {
            if mask & (1 << k) != 0 {
                acc = acc.wedge(img);
            }
        }
        out.add_assign(&acc);
    }
    out
}

/// Complex basis (`dz_j`, `dz̄_j`) to real basis (`dx_j`, `dy_j`).
pub fn complex_to_real<T: Real>(v: &ExteriorVec<T>, n: usize) -> ExteriorVec<T> {
    let i = Complex::new(T::zero(), T::one());
    let one = Complex::new(T::one(), T::zero());
    let mut images = vec![ExteriorVec::zero(2 * n); 2 * n];
    for j in 0..n {
        *images[dz(j)].coeff_mut(1 << j) = one;
        *images[dz(j)].coeff_mut(1 << (n + j)) = i;
        *images[dzbar(n, j)].coeff_mut(1 << j) = one;
        *images[dzbar(n, j)].coeff_mut(1 << (n + j)) = -i;
    }
    substitute(v, &images)
}

/// Real basis (`dx_j`, `dy_j`) to complex basis (`dz_j`, `dz̄_j`).
pub fn real_to_complex<T: Real>(v: &ExteriorVec<T>, n: usize) -> ExteriorVec<T> {
    let half = Complex::new(T::lit(0.5), T::zero());
    let mhalf_i = Complex::new(T::zero(), T::lit(-0.5));
    let mut images = vec![ExteriorVec::zero(2 * n); 2 * n];
    for j in 0..n {
        *images[j].coeff_mut(1 << dz(j)) = half;
        *images[j].coeff_mut(1 << dzbar(n, j)) = half;
        *images[n + j].coeff_mut(1 << dz(j)) = mhalf_i;
        *images[n + j].coeff_mut(1 << dzbar(n, j)) = -mhalf_i;
    }
    substitute(v, &images)
}

/// Fourier transform of the section at `x`: `b^j = y^j`, `a_j = ∂e/∂x_j`, and
/// the curvature `F = i(Σ db^j ∧ dy_j + Σ da_j ∧ dx_j)` by exterior differentiation.
pub fn fourier_transform_cycle<T: Real>(s: &SLagSection<T>, potential: &Potential<T>, x: &[T]) -> Result<UOneConnection<T>, GeometryError> {
    let jet = potential.jet_at(x)?;
    let n = jet.dim();
    let pinv = &jet.inverse_hessian;
    let fj = s.f.jet3(x)?;
    let ej = s.e.jet3(x)?;
    let b = jet.inverse_hessian.matvec(&fj.g[..n]);
    let a = jet.inverse_hessian.matvec(&ej.g[..n]);
    // ∂/∂x_k = Σ_m φ^{mk} ∂/∂x^m, and ∂_m(φ^{jl} u_l) = φ^{jl}u_lm − φ^{ja}φ_{abm}φ^{bl}u_l.
    let dual_derivative = |g: &[T], h: &[[T; 4]; 4]| -> Mat<T> {
        let mut d_base = Mat::zeros(n, n); // (m, j): ∂_m of component j
        for m in 0..n {
            for j in 0..n {
                let mut v = T::zero();
                for l in 0..n {
                    v += pinv[(j, l)] * h[l][m];
                    for a in 0..n {
                        for bb in 0..n {
                            v -= pinv[(j, a)] * jet.third(a, bb, m) * pinv[(bb, l)] * g[l];
                        }
                    }
                }
                d_base[(m, j)] = v;
            }
        }
        Mat::from_fn(n, n, |k, j| (0..n).map(|m| pinv[(m, k)] * d_base[(m, j)]).sum())
    };
    let db = dual_derivative(&fj.g[..n], &fj.h);
    let da = dual_derivative(&ej.g[..n], &ej.h);
    let i = Complex::new(T::zero(), T::one());
    let mut curvature = ExteriorVec::zero(2 * n);
    for k in 0..n {
        let dxk = ExteriorVec::basis(2 * n, 1 << k);
        for j in 0..n {
            curvature.add_scaled(i * db[(k, j)], &dxk.wedge(&ExteriorVec::basis(2 * n, 1 << (n + j))));
            curvature.add_scaled(i * da[(k, j)], &dxk.wedge(&ExteriorVec::basis(2 * n, 1 << j)));
        }
    }
    Ok(UOneConnection { n, a, b, db, da, curvature })
}

/// `ω_W = Σ φ^{jk} dx_j ∧ dy_k` in the real basis.
pub fn omega_w_real<T: Real>(jet: &JetFrame<T>) -> ExteriorVec<T> {
    let n = jet.dim();
    let mut w = ExteriorVec::zero(2 * n);
    for j in 0..n {
        for k in 0..n {
            *w.coeff_mut((1 << j) | (1 << (n + k))) += Complex::new(jet.inverse_hessian[(j, k)], T::zero());
        }
    }
    w
}

fn power<T: Real>(v: &ExteriorVec<T>, k: usize) -> ExteriorVec<T> {
    let mut acc = ExteriorVec::scalar(v.generators(), Complex::new(T::one(), T::zero()));
    for _ in 0..k {
        acc = acc.wedge(v);
    }
    acc
}

/// Coefficient of `dx₁∧dy₁∧⋯∧dxₙ∧dyₙ` in a top form of the real basis.
fn interleaved_top<T: Real>(v: &ExteriorVec<T>, n: usize) -> Complex<T> {
    let all = (1u32 << (2 * n)) - 1;
    v.coeff(all) * T::lit(crate::mirror::inversion_sign(n) as f64)
}

/// `|Im e^{iθ}(ω_W + F)^n|` as a multiple of `dx₁∧dy₁∧⋯∧dxₙ∧dyₙ`, divided by
/// `n! det(g_W)²` so that it is directly comparable with [`slag_phase_residual`].
pub fn dhym_residual<T: Real>(u: &UOneConnection<T>, theta: T, jet: &JetFrame<T>) -> T {
    let n = u.n;
    let top = interleaved_top(&power(&omega_w_real(jet).add(&u.curvature), n), n);
    let fact: f64 = (1..=n).map(|k| k as f64).product();
    let det_gw = T::one() / jet.det_hessian;
    let phase = Complex::new(theta.cos(), theta.sin());
    (phase * top).im.abs() / (T::lit(fact) * det_gw * det_gw)
}

/// `q`-form `Σ c_J dx^J` on a section, parametrised by base coordinates.
#[derive(Clone, Debug)]
pub struct CycleTangentForm<T: Real> {
    pub n: usize,
    pub q: usize,
    pub coefficients: Vec<(MultiIndex, ScalarField<T>)>,
}

impl<T: Real> CycleTangentForm<T> {
    pub fn new(n: usize, q: usize) -> Self {
        Self { n, q, coefficients: Vec::new() }
    }

    pub fn with(mut self, j: MultiIndex, c: ScalarField<T>) -> Result<Self, FormError> {
        if j.len() != self.q || j.0 >> self.n != 0 {
            return Err(FormError::BadMultiIndex(j.indices()));
        }
        self.coefficients.push((j, c));
        Ok(self)
    }

    /// `dx^j` with constant coefficient 1 (1-based `j`).
    pub fn dx(n: usize, j: usize) -> Self {
        Self::new(n, 1).with(MultiIndex(1 << (j - 1)), ScalarField::polynomial(n, crate::poly::Poly::constant(Complex::new(T::one(), T::zero())))).expect("valid index")
    }

    /// Value at `x` in the algebra on `dx¹, …, dxⁿ`.
    fn eval_real(&self, x: &[T]) -> Result<ExteriorVec<T>, GeometryError> {
        let mut v = ExteriorVec::zero(self.n);
        for (j, c) in &self.coefficients {
            *v.coeff_mut(j.0) += Complex::new(c.value(x)?, T::zero());
        }
        Ok(v)
    }
}

/// Image under `dx^j ↦ (i/2) Σ φ^{jk} dz̄_k`, a `(0, q)`-form on `W`.
pub fn tangent_transform<T: Real>(t: &CycleTangentForm<T>, ctx: &MirrorContext<T>) -> Result<TnForm<T>, FormError> {
    let n = t.n;
    let q = t.q;
    let all = MultiIndex((1u32 << n) - 1);
    // dz^{1..n} ∧ dz̄^J maps to ε · Φ(dz̄^J) under the mirror transform.
    let mut scale = Complex::new(T::lit(removal_sign(n, all) as f64), T::zero());
    for _ in 0..q {
        scale *= Complex::new(T::zero(), T::lit(0.5));
    }
    let coeffs = t.coefficients.clone();
    let pot = ctx.potential.clone();
    TnForm::from_fn(n, Side::W, 0, q, move |x| {
        let jet = pot.jet_at(x)?;
        let mut fj = FormJet::zero(n);
        for (j, c) in &coeffs {
            let cj = c.jet3(x)?;
            let mask = crate::forms::form_mask(n, all, *j);
            *fj.value.coeff_mut(mask) += Complex::new(cj.v, T::zero());
            for l in 0..n {
                *fj.grad[l].coeff_mut(mask) += Complex::new(cj.g[l], T::zero());
            }
        }
        Ok(transform_jet(&fj, &jet, false).scale(scale))
    })
}

/// `(sup |∂̄B|, sup |Im e^{iθ}(ω_W + F)^{n−q} ∧ ∂B|)` over the samples, the second
/// measured on real-basis coefficients. `F` comes from the section's Fourier transform.
pub fn deformed_harmonic_residual<T: Real>(
    b: &TnForm<T>,
    section: &SLagSection<T>,
    ctx: &MirrorContext<T>,
    samples: &[Vec<T>],
) -> Result<(T, T), FormError> {
    if b.side != Side::W || b.p != 0 {
        return Err(FormError::BidegreeMismatch);
    }
    let n = b.n;
    let phase = Complex::new(section.theta.cos(), section.theta.sin());
    let mut r1 = T::zero();
    let mut r2 = T::zero();
    for x in samples {
        let jet = ctx.jet(x)?;
        let fj = b.eval(x)?;
        r1 = r1.max(dbar_vec(&fj, &jet, Side::W)?.max_abs());
        let del = complex_to_real(&del_vec(&fj, &jet, Side::W)?, n);
        let u = fourier_transform_cycle(section, &ctx.potential, x)?;
        let form = power(&omega_w_real(&jet).add(&u.curvature), n - b.q).wedge(&del);
        for c in form.coeffs() {
            r2 = r2.max((phase * *c).im.abs());
        }
    }
    Ok((r1, r2))
}

/// `∫_C α₁∧⋯∧αₙ` over the base.
pub fn correlation_a<T: Real>(alphas: &[CycleTangentForm<T>], ctx: &MirrorContext<T>) -> Result<T, FormError> {
    let n = ctx.n();
    if alphas.len() != n || alphas.iter().any(|a| a.q != 1) {
        return Err(FormError::WrongArity { expected: n, found: alphas.len() });
    }
    let mut s = T::zero();
    for (x, w) in ctx.base_rule().points() {
        let mut v = ExteriorVec::scalar(n, Complex::new(T::one(), T::zero()));
        for a in alphas {
            v = v.wedge(&a.eval_real(&x)?);
        }
        s += v.coeff((1 << n) - 1).re * w;
    }
    Ok(s)
}

/// `∫_W Ω_W ∧ β₁∧⋯∧βₙ` with `β_i` the tangent transforms, in the orientation
/// `dx₁dy₁⋯dxₙdyₙ`, pulled back to the base (Jacobian `det φ`) over the dual
/// fiber of volume `1/covolume`.
pub fn correlation_b<T: Real>(alphas: &[CycleTangentForm<T>], ctx: &MirrorContext<T>) -> Result<Complex<T>, FormError> {
    let n = ctx.n();
    if alphas.len() != n || alphas.iter().any(|a| a.q != 1) {
        return Err(FormError::WrongArity { expected: n, found: alphas.len() });
    }
    let betas: Vec<TnForm<T>> = alphas.iter().map(|a| tangent_transform(a, ctx)).collect::<Result<_, _>>()?;
    let all = (1u32 << n) - 1;
    let top = crate::forms::form_mask(n, MultiIndex(all), MultiIndex(all));
    let factor = top_form_factor::<T>(n);
    let mut s = Complex::new(T::zero(), T::zero());
    for (x, w) in ctx.base_rule().points() {
        let jet = ctx.jet(&x)?;
        let mut v = ExteriorVec::basis(2 * n, all);
        for b in &betas {
            v = v.wedge(&b.eval(&x)?.value);
        }
        s += v.coeff(top) * factor * jet.det_hessian * w;
    }
    Ok(s / ctx.domain.lattice_covolume)
}

/// Ratio `_AΩ/_BΩ` on the flat background for `α_i = dx^i`.
pub fn correlation_calibration<T: Real>(n: usize) -> Result<Complex<T>, FormError> {
    let dom = crate::geometry::Domain::cube(n, -T::lit(0.5), T::lit(0.5))?.with_grid_resolution(9)?;
    let ctx = MirrorContext::new(Potential::flat(n), dom)?;
    let alphas: Vec<_> = (1..=n).map(|j| CycleTangentForm::dx(n, j)).collect();
    Ok(Complex::new(correlation_a(&alphas, &ctx)?, T::zero()) / correlation_b(&alphas, &ctx)?)
}

/// `|_AΩ − κ·_BΩ|` with `κ` from [`correlation_calibration`].
pub fn correlation_residual<T: Real>(alphas: &[CycleTangentForm<T>], ctx: &MirrorContext<T>) -> Result<T, FormError> {
    let kappa = correlation_calibration::<T>(ctx.n())?;
    let a = correlation_a(alphas, ctx)?;
    let b = correlation_b(alphas, ctx)?;
    Ok((Complex::new(a, T::zero()) - kappa * b).norm())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::Domain;
    use crate::poly::Poly;

    fn cubic(n: usize, seed: f64) -> ScalarField<f64> {
        let mut p = Poly::zero();
        let mut k = 0.0;
        for a in 0..n {
            let mut e = [0u8; 4];
            e[a] = 1;
            p.add_term(e, Complex::new((seed + k).sin(), 0.0));
            k += 1.0;
            for b in a..n {
                let mut e = [0u8; 4];
                e[a] += 1;
                e[b] += 1;
                p.add_term(e, Complex::new(0.7 * (seed * 1.3 + k).cos(), 0.0));
                k += 1.0;
                for c in b..n {
                    let mut e2 = e;
                    e2[c] += 1;
                    p.add_term(e2, Complex::new(0.3 * (seed * 0.7 + k).sin(), 0.0));
                    k += 1.0;
                }
            }
        }
        ScalarField::polynomial(n, p)
    }

    #[test]
    fn quadratic_has_vanishing_symbols() {
        let jet = Potential::diagonal(&[1.0, 2.0]).jet_at(&[0.3, 0.1]).unwrap();
        assert_eq!(a_connection(&jet).max_abs(), 0.0);
        assert_eq!(nabla_omega_residual(&jet), 0.0);
    }

    #[test]
    fn one_dimensional_symbol_matches_symbolic_derivative() {
        // φ = x²/2 + x⁴/12, φ'' = 1 + x², φ''' = 2x.
        let pot = Potential::analytic(1, |x| x[0].powi(2) * 0.5 + x[0].powi(4) * (1.0 / 12.0));
        for x in [-0.7f64, 0.0, 0.4, 1.3] {
            let g = a_connection(&pot.jet_at(&[x]).unwrap()).christoffel(0, 0, 0);
            assert!((g - 2.0 * x / (1.0 + x * x)).abs() < 1e-14);
        }
    }

    #[test]
    fn a_connection_is_flat() {
        for pot in [Potential::exp_tilt(2, 0.3), Potential::quartic(2), Potential::exp_tilt(3, 0.2)] {
            let x: Vec<f64> = (0..pot.dim()).map(|k| 0.2 - 0.1 * k as f64).collect();
            let r = a_curvature_residual(&pot, &x, 1e-3).unwrap();
            assert!(r < 1e-8, "{r}");
        }
    }

    #[test]
    fn a_connection_preserves_kahler_form() {
        let jet = Potential::exp_tilt(3, 0.4).jet_at(&[0.1, -0.2, 0.3]).unwrap();
        assert!(nabla_omega_residual(&jet) < 1e-12);
        let bent = torsion_perturbation(&a_connection(&jet), 1e-3);
        assert!(bent.torsion() > 0.0);
        assert!(nabla_omega_with(&jet, &bent) > 1e-4);
    }

    #[test]
    fn dual_coordinates_straighten_a_connection() {
        let pot = Potential::exp_tilt(2, 0.3);
        let dom = Domain::cube(2, -0.5, 0.5).unwrap();
        let dual = crate::geometry::legendre_dual(&pot, &dom).unwrap();
        for x in dom.halton_points(6, 0.1) {
            let jet = pot.jet_at(&x).unwrap();
            let dj = dual.jet_at(&jet.gradient).unwrap();
            assert!(connection_duality_residual(&jet, &dj) < 1e-9);
            assert!(b_to_a_residual(&jet, &dj) < 1e-8);
        }
        let jet = Potential::analytic(1, |x| x[0].exp()).jet_at(&[0.2]).unwrap();
        let dj = crate::geometry::legendre_dual(&Potential::analytic(1, |x| x[0].exp()), &Domain::cube(1, -1.0, 1.0).unwrap())
            .unwrap()
            .jet_at(&jet.gradient)
            .unwrap();
        assert!(connection_duality_residual(&jet, &dj) < 1e-9);
    }

    #[test]
    fn levi_civita_is_midpoint() {
        let jet = Potential::exp_tilt(3, 0.4).jet_at(&[0.1, -0.2, 0.3]).unwrap();
        assert!(levi_civita_midpoint_residual(&jet) < 1e-12);
    }

    #[test]
    fn covariant_hessian() {
        let flat = Potential::flat(2).jet_at(&[0.1, 0.2]).unwrap();
        let h = Mat::from_fn(2, 2, |a, b| (a + 2 * b) as f64);
        assert_eq!(hess_a(&[1.0, -1.0], &h, &flat), h);
        let pot = Potential::exp_tilt(2, 0.3);
        let jet = pot.jet_at(&[0.1, 0.2]).unwrap();
        let hp = hess_a(&jet.gradient, &jet.hessian, &jet);
        let gamma = a_connection(&jet);
        for l in 0..2 {
            for k in 0..2 {
                let expected = jet.hessian[(l, k)] - (0..2).map(|q| gamma.christoffel(q, l, k) * jet.gradient[q]).sum::<f64>();
                assert!((hp[(l, k)] - expected).abs() < 1e-15);
            }
        }
        let s = SLagSection::new(cubic(2, 0.4), 0.0);
        assert!(s.hessian(&jet).unwrap().asymmetry() < 1e-12);
    }

    #[test]
    fn slag_examples() {
        let jet = Potential::exp_tilt(2, 0.3).jet_at(&[0.1, 0.2]).unwrap();
        assert_eq!(slag_phase_residual(&SLagSection::new(ScalarField::zero(2), 0.0), &jet).unwrap(), 0.0);
        let flat = Potential::flat(3).jet_at(&[0.1, 0.2, 0.0]).unwrap();
        let half = ScalarField::quadratic(Mat::identity(3));
        let s = SLagSection::new(half, -3.0 * std::f64::consts::FRAC_PI_4);
        assert!(slag_phase_residual(&s, &flat).unwrap() < 1e-14);
    }

    #[test]
    fn fourier_transform_curvature() {
        let pot = Potential::exp_tilt(2, 0.3);
        let x = [0.1, -0.2];
        let mut lin = Poly::var(0);
        lin.add_term([0, 1, 0, 0], Complex::new(2.0, 0.0));
        let u = fourier_transform_cycle(&SLagSection::new(ScalarField::polynomial(2, lin), 0.0), &Potential::flat(2), &x).unwrap();
        assert!(u.curvature.max_abs() == 0.0);
        let s = SLagSection::new(cubic(2, 0.9), 0.0);
        let u0 = fourier_transform_cycle(&s, &pot, &x).unwrap();
        assert!(u0.f02().max_abs() < 1e-15 && u0.f20().max_abs() < 1e-15);
        let u1 = fourier_transform_cycle(&s.clone().with_connection(cubic(2, 2.1)), &pot, &x).unwrap();
        assert!(u1.a.iter().any(|v| v.abs() > 1e-3));
        assert!(u1.curvature.sub(&u0.curvature).max_abs() < 1e-14);
    }

    #[test]
    fn real_and_complex_bases_round_trip() {
        let mut v = ExteriorVec::<f64>::zero(4);
        for m in 0..16u32 {
            *v.coeff_mut(m) = Complex::new(m as f64 * 0.3 - 1.0, (m as f64).sin());
        }
        assert!(real_to_complex(&complex_to_real(&v, 2), 2).sub(&v).max_abs() < 1e-14);
    }

    #[test]
    fn dhym_agrees_with_slag_phase() {
        let dom = Domain::cube(2, -0.5, 0.5).unwrap();
        let samples = dom.halton_points(6, 0.1);
        for k in 0..6 {
            let pot = Potential::exp_tilt(2, 0.1 + 0.05 * k as f64);
            let f = cubic(2, k as f64);
            let theta = section_phase(&f, &pot, &samples).unwrap();
            let s = SLagSection::new(f, theta);
            for x in &samples {
                let jet = pot.jet_at(x).unwrap();
                let a = slag_phase_residual(&s, &jet).unwrap();
                let b = dhym_residual(&fourier_transform_cycle(&s, &pot, x).unwrap(), theta, &jet);
                assert!((a - b).abs() < 1e-12, "{a} {b}");
            }
        }
        let flat = Potential::flat(2);
        let s = SLagSection::new(ScalarField::quadratic(Mat::identity(2)), -std::f64::consts::FRAC_PI_2);
        let u = fourier_transform_cycle(&s, &flat, &[0.1, 0.1]).unwrap();
        assert!(dhym_residual(&u, s.theta, &flat.jet_at(&[0.1, 0.1]).unwrap()) < 1e-14);
    }

    fn context(pot: Potential<f64>) -> MirrorContext<f64> {
        let n = pot.dim();
        MirrorContext::new(pot, Domain::cube(n, -0.5, 0.5).unwrap().with_grid_resolution(17).unwrap()).unwrap()
    }

    #[test]
    fn tangent_transform_of_constant_one_form() {
        let ctx = context(Potential::flat(2));
        let b = tangent_transform(&CycleTangentForm::dx(2, 2), &ctx).unwrap();
        let v = b.eval(&[0.1, 0.0]).unwrap().value;
        let mut expected = ExteriorVec::zero(4);
        *expected.coeff_mut(1 << dzbar(2, 1)) = Complex::new(0.0, 0.5);
        assert!(v.sub(&expected).max_abs() < 1e-15);
        let zero = SLagSection::new(ScalarField::zero(2), 0.0);
        let s = ctx.domain.halton_points(4, 0.1);
        assert_eq!(deformed_harmonic_residual(&b, &zero, &ctx, &s).unwrap(), (0.0, 0.0));
    }

    #[test]
    fn harmonic_one_forms_map_to_deformed_harmonic() {
        let zero = SLagSection::new(ScalarField::zero(2), 0.0);
        // dh for h harmonic on the flat background: h = x² − y² and h = xy.
        let ctx = context(Potential::flat(2));
        let s = ctx.domain.halton_points(5, 0.1);
        let alpha = CycleTangentForm::new(2, 1)
            .with(MultiIndex(1), ScalarField::polynomial(2, Poly::var(0).scale(Complex::new(2.0, 0.0))))
            .unwrap()
            .with(MultiIndex(2), ScalarField::polynomial(2, Poly::var(1).scale(Complex::new(-2.0, 0.0))))
            .unwrap();
        let (a, b) = deformed_harmonic_residual(&tangent_transform(&alpha, &ctx).unwrap(), &zero, &ctx, &s).unwrap();
        assert!(a < 1e-8 && b < 1e-8);
        // dh for linear h on a Monge-Ampère background.
        let ctx = context(Potential::exact_ma(2, 3.0));
        let alpha = CycleTangentForm::dx(2, 1);
        let (a, b) = deformed_harmonic_residual(&tangent_transform(&alpha, &ctx).unwrap(), &zero, &ctx, &s).unwrap();
        assert!(a < 1e-8 && b < 1e-8, "{a} {b}");
        // A non-closed form breaks the first equation.
        let bad = CycleTangentForm::new(2, 1).with(MultiIndex(1), ScalarField::polynomial(2, Poly::var(1))).unwrap();
        let (a, _) = deformed_harmonic_residual(&tangent_transform(&bad, &ctx).unwrap(), &zero, &ctx, &s).unwrap();
        assert!(a > 1e-3);
    }

    #[test]
    fn correlation_functions() {
        let flat = context(Potential::flat(2));
        let alphas = vec![CycleTangentForm::dx(2, 1), CycleTangentForm::dx(2, 2)];
        assert!((correlation_a(&alphas, &flat).unwrap() - 1.0).abs() < 1e-13);
        assert!(correlation_residual(&alphas, &flat).unwrap() < 1e-13);
        let swapped = vec![alphas[1].clone(), alphas[0].clone()];
        assert!((correlation_a(&swapped, &flat).unwrap() + 1.0).abs() < 1e-13);
        assert!((correlation_b(&swapped, &flat).unwrap() + correlation_b(&alphas, &flat).unwrap()).norm() < 1e-13);
        let ctx = context(Potential::exp_tilt(2, 0.3));
        let varying = vec![
            CycleTangentForm::new(2, 1).with(MultiIndex(1), cubic(2, 0.2)).unwrap().with(MultiIndex(2), cubic(2, 1.2)).unwrap(),
            CycleTangentForm::new(2, 1).with(MultiIndex(2), cubic(2, 0.5)).unwrap(),
        ];
        assert!(correlation_residual(&varying, &ctx).unwrap() < 1e-6);
        assert!(correlation_a(&varying, &ctx).unwrap().abs() > 1e-3);
    }
}
