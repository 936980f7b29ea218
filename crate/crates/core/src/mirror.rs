//! The mirror transform between invariant forms on `M` and `W`, and the
//! quantities it identifies: moduli metrics, Yukawa couplings, prepotentials,
//! the fiber L² metric, and B-field invariance.

use crate::exterior::{wedge_sign, ExteriorVec};
use crate::forms::{
    dbar_vec, dz, dzbar, fiber_volume, form_mask, pointwise_pairing, split_mask, FormError, FormJet, ModuliVector,
    MultiIndex, Side, TnForm,
};
use crate::geometry::{ComplexifiedPotential, Domain, GeometryError, JetFrame, LegendreDual, Potential};
use crate::linalg::Mat;
use crate::quadrature::{chebyshev_differentiation, Rule, TensorRule};
use crate::scalar::Real;
use num_complex::Complex;
use std::sync::Arc;

fn c<T: Real>(re: T) -> Complex<T> {
    Complex::new(re, T::zero())
}

/// Geometry shared by the two sides of the mirror pair.
#[derive(Clone, Debug)]
pub struct MirrorContext<T: Real> {
    pub potential: Potential<T>,
    pub dual: Arc<LegendreDual<T>>,
    pub domain: Domain<T>,
    pub bfield: Option<ComplexifiedPotential<T>>,
}

impl<T: Real> MirrorContext<T> {
    pub fn new(potential: Potential<T>, domain: Domain<T>) -> Result<Self, GeometryError> {
        let dual = Arc::new(crate::geometry::legendre_dual(&potential, &domain)?);
        Ok(Self { potential, dual, domain, bfield: None })
    }

    pub fn with_bfield(mut self, cp: ComplexifiedPotential<T>) -> Self {
        self.bfield = Some(cp);
        self
    }

    pub fn n(&self) -> usize {
        self.domain.n
    }

    pub fn jet(&self, x: &[T]) -> Result<JetFrame<T>, GeometryError> {
        self.potential.jet_at(x)
    }

    /// `V_M = sqrt(det φ)·covolume` at `x`.
    pub fn volume_m(&self, x: &[T]) -> Result<T, GeometryError> {
        Ok(fiber_volume(&self.jet(x)?, Side::M, self.domain.lattice_covolume))
    }

    /// `V_W = covolume / sqrt(det φ)` at `x`.
    pub fn volume_w(&self, x: &[T]) -> Result<T, GeometryError> {
        Ok(fiber_volume(&self.jet(x)?, Side::W, self.domain.lattice_covolume))
    }

    /// Base quadrature: tensor trapezoid on `grid_resolution` nodes per axis.
    pub fn base_rule(&self) -> TensorRule<T> {
        TensorRule::trapezoid_box(&self.domain.bounds, self.domain.grid_resolution)
    }
}

/// Sign `(−1)^{Σ_{i∈I}(n−i)}` (1-based `i`) of removing `dz_i, i ∈ I` from `dz₁⋯dzₙ` left to right.
pub fn removal_sign(n: usize, i: MultiIndex) -> i32 {
    let s: usize = i.indices().iter().map(|&k| n - k).sum();
    if s % 2 == 0 {
        1
    } else {
        -1
    }
}

/// Image of `dz^I ∧ dz̄^J` with the antiholomorphic factors mapped by the rows of `p`
/// (`dz̄^j ↦ Σ_k p_jk dz̄_k`). With `dp = Some((r, p'))` the factor in position `r`
/// of `J` uses `p'` instead, which gives one term of the derivative in `p`.
fn transform_monomial<T: Real>(n: usize, mask: u32, p: &Mat<T>, dp: Option<(usize, &Mat<T>)>) -> ExteriorVec<T> {
    let (i, j) = split_mask(n, mask);
    let comp = MultiIndex(!i.0 & ((1 << n) - 1));
    let sign = removal_sign(n, i);
    let mut acc = ExteriorVec::basis(2 * n, comp.0);
    for (r, jj) in j.indices().into_iter().enumerate() {
        let row = jj - 1;
        let m = match dp {
            Some((pos, alt)) if pos == r => alt,
            _ => p,
        };
        let mut factor = ExteriorVec::zero(2 * n);
        for k in 0..n {
            let v = m[(row, k)];
            if v != T::zero() {
                *factor.coeff_mut(1 << dzbar(n, k)) += c(v);
            }
        }
        acc = acc.wedge(&factor);
    }
    acc.scale(c(T::lit(sign as f64)))
}

/// Applies the transform with antiholomorphic matrix `p` to every monomial of `v`.
pub fn transform_vec<T: Real>(v: &ExteriorVec<T>, p: &Mat<T>) -> ExteriorVec<T> {
    let n = p.rows();
    let mut out = ExteriorVec::zero(2 * n);
    for (mask, &x) in v.coeffs().iter().enumerate() {
        if x.re == T::zero() && x.im == T::zero() {
            continue;
        }
        out.add_scaled(x, &transform_monomial(n, mask as u32, p, None));
    }
    out
}

/// Directional derivative of [`transform_vec`] in `p` along `dp`, applied to `v`.
fn transform_vec_derivative<T: Real>(v: &ExteriorVec<T>, p: &Mat<T>, dp: &Mat<T>) -> ExteriorVec<T> {
    let n = p.rows();
    let mut out = ExteriorVec::zero(2 * n);
    for (mask, &x) in v.coeffs().iter().enumerate() {
        if x.re == T::zero() && x.im == T::zero() {
            continue;
        }
        let q = split_mask(n, mask as u32).1.len();
        for r in 0..q {
            out.add_scaled(x, &transform_monomial(n, mask as u32, p, Some((r, dp))));
        }
    }
    out
}

/// `T: M → W` at a point, with `dz̄^j ↦ Σ φ^{jk} dz̄_k`.
pub fn transform_at<T: Real>(v: &ExteriorVec<T>, jet: &JetFrame<T>) -> ExteriorVec<T> {
    transform_vec(v, &jet.inverse_hessian)
}

/// `T': W → M` at a point, with `dz̄_j ↦ Σ φ_jk dz̄^k`.
pub fn inverse_transform_at<T: Real>(v: &ExteriorVec<T>, jet: &JetFrame<T>) -> ExteriorVec<T> {
    transform_vec(v, &jet.hessian)
}

/// Matrix of `T` on the full algebra at a point.
pub fn transform_matrix<T: Real>(jet: &JetFrame<T>) -> Mat<Complex<T>> {
    let dim = 1usize << (2 * jet.dim());
    let mut m = Mat::zeros(dim, dim);
    for col in 0..dim {
        let img = transform_at(&ExteriorVec::basis(2 * jet.dim(), col as u32), jet);
        for (row, v) in img.coeffs().iter().enumerate() {
            m[(row, col)] = *v;
        }
    }
    m
}

/// `∂_p φ^{-1} = −φ^{-1} (∂_p φ) φ^{-1}`.
fn inverse_hessian_derivative<T: Real>(jet: &JetFrame<T>, p: usize) -> Mat<T> {
    let n = jet.dim();
    let d = Mat::from_fn(n, n, |a, b| jet.third(a, b, p));
    jet.inverse_hessian.matmul(&d).matmul(&jet.inverse_hessian).scale(-T::one())
}

/// `∂_p φ`.
fn hessian_derivative<T: Real>(jet: &JetFrame<T>, p: usize) -> Mat<T> {
    let n = jet.dim();
    Mat::from_fn(n, n, |a, b| jet.third(a, b, p))
}

/// Transformed form jet, derivatives by the product rule.
pub fn transform_jet<T: Real>(fj: &FormJet<T>, jet: &JetFrame<T>, inverse: bool) -> FormJet<T> {
    let p = if inverse { &jet.hessian } else { &jet.inverse_hessian };
    let value = transform_vec(&fj.value, p);
    let grad = if fj.has_derivatives() {
        (0..jet.dim())
            .map(|l| {
                let dp = if inverse { hessian_derivative(jet, l) } else { inverse_hessian_derivative(jet, l) };
                transform_vec(&fj.grad[l], p).add(&transform_vec_derivative(&fj.value, p, &dp))
            })
            .collect()
    } else {
        Vec::new()
    };
    FormJet { value, grad }
}

/// `T(a)` for a form on `M`; the result is an `(n − p, q)`-form on `W`.
pub fn transform<T: Real>(a: &TnForm<T>, ctx: &MirrorContext<T>) -> Result<TnForm<T>, FormError> {
    if a.side != Side::M {
        return Err(FormError::SideMismatch);
    }
    let src = a.clone();
    let pot = ctx.potential.clone();
    TnForm::from_fn(a.n, Side::W, a.n - a.p, a.q, move |x| {
        let jet = pot.jet_at(x)?;
        Ok(transform_jet(&src.eval(x)?, &jet, false))
    })
}

/// `T'(b)` for a form on `W`; the result is an `(n − p, q)`-form on `M`.
pub fn inverse_transform<T: Real>(b: &TnForm<T>, ctx: &MirrorContext<T>) -> Result<TnForm<T>, FormError> {
    if b.side != Side::W {
        return Err(FormError::SideMismatch);
    }
    let src = b.clone();
    let pot = ctx.potential.clone();
    TnForm::from_fn(b.n, Side::M, b.n - b.p, b.q, move |x| {
        let jet = pot.jet_at(x)?;
        Ok(transform_jet(&src.eval(x)?, &jet, true))
    })
}

/// Sign `(−1)^{n(n−1)/2}` with `T'T = ±id`.
pub fn inversion_sign(n: usize) -> i32 {
    if (n * (n.saturating_sub(1)) / 2) % 2 == 0 {
        1
    } else {
        -1
    }
}

/// Sign `s = (−1)ⁿ` in `∂̄_W T = s T ∂̄_M` for the left-wedge `∂̄`.
pub fn dbar_sign(n: usize) -> i32 {
    if n % 2 == 0 {
        1
    } else {
        -1
    }
}

/// `sup |∂̄T(a) − s T(∂̄a)|` over the sample points, `s` from [`dbar_sign`].
pub fn dbar_commutation_residual<T: Real>(a: &TnForm<T>, ctx: &MirrorContext<T>, samples: &[Vec<T>]) -> Result<T, FormError> {
    let n = a.n;
    let s = c(T::lit(dbar_sign(n) as f64));
    let mut worst = T::zero();
    for x in samples {
        let jet = ctx.jet(x)?;
        let fj = a.eval(x)?;
        let lhs = dbar_vec(&transform_jet(&fj, &jet, false), &jet, Side::W)?;
        let rhs = transform_at(&dbar_vec(&fj, &jet, Side::M)?, &jet).scale(s);
        worst = worst.max(lhs.sub(&rhs).max_abs());
    }
    Ok(worst)
}

/// Masks of bidegree `(p, q)` on `2n` generators.
fn bidegree_masks(n: usize, p: usize, q: usize) -> Vec<u32> {
    (0u32..1 << (2 * n))
        .filter(|&m| {
            let (i, j) = split_mask(n, m);
            i.len() == p && j.len() == q
        })
        .collect()
}

/// Spectral discretisation of `∂̄` on a Chebyshev-Lobatto tensor grid, with the
/// quadrature-weighted L² inner product of one side.
pub struct DiscreteDbar<T: Real> {
    n: usize,
    side: Side,
    rule: TensorRule<T>,
    diff: Vec<Vec<Vec<T>>>,
    jets: Vec<JetFrame<T>>,
    covolume: T,
}

impl<T: Real> DiscreteDbar<T> {
    pub fn new(ctx: &MirrorContext<T>, side: Side, nodes: usize) -> Result<Self, FormError> {
        let rule = TensorRule::clenshaw_curtis_box(&ctx.domain.bounds, nodes);
        let diff = ctx.domain.bounds.iter().map(|(a, b)| chebyshev_differentiation(*a, *b, nodes)).collect();
        let jets = rule.points().map(|(x, _)| ctx.jet(&x)).collect::<Result<Vec<_>, _>>()?;
        Ok(Self { n: ctx.n(), side, rule, diff, jets, covolume: ctx.domain.lattice_covolume })
    }

    pub fn nodes(&self) -> Vec<Vec<T>> {
        self.rule.points().map(|(x, _)| x).collect()
    }

    /// Samples a form at the grid nodes.
    pub fn sample(&self, a: &TnForm<T>) -> Result<Vec<ExteriorVec<T>>, FormError> {
        self.rule.points().map(|(x, _)| Ok(a.eval(&x)?.value)).collect()
    }

    fn partial(&self, u: &[ExteriorVec<T>], axis: usize, transpose: bool) -> Vec<ExteriorVec<T>> {
        let dim = 2 * self.n;
        let mut out = vec![ExteriorVec::zero(dim); u.len()];
        for (k, o) in out.iter_mut().enumerate() {
            let idx = self.rule.index(k);
            let mut j = idx.clone();
            for m in 0..self.rule.axes[axis].len() {
                j[axis] = m;
                let src = self.rule.flat(&j);
                let w = if transpose { self.diff[axis][m][idx[axis]] } else { self.diff[axis][idx[axis]][m] };
                if w != T::zero() {
                    o.add_scaled(c(w), &u[src]);
                }
            }
        }
        out
    }

    /// Discrete `∂̄`.
    pub fn apply(&self, u: &[ExteriorVec<T>]) -> Vec<ExteriorVec<T>> {
        let n = self.n;
        let d: Vec<Vec<ExteriorVec<T>>> = (0..n).map(|a| self.partial(u, a, false)).collect();
        (0..u.len())
            .map(|k| {
                let mut out = ExteriorVec::zero(2 * n);
                for p in 0..n {
                    let dp = match self.side {
                        Side::M => d[p][k].clone(),
                        Side::W => {
                            let mut s = ExteriorVec::zero(2 * n);
                            for q in 0..n {
                                s.add_scaled(c(self.jets[k].inverse_hessian[(q, p)]), &d[q][k]);
                            }
                            s
                        }
                    };
                    out.add_scaled(c(T::lit(0.5)), &dp.wedge_gen(dzbar(n, p)));
                }
                out
            })
            .collect()
    }

    /// Euclidean adjoint of [`DiscreteDbar::apply`] on nodal coefficient vectors.
    fn apply_transpose(&self, v: &[ExteriorVec<T>]) -> Vec<ExteriorVec<T>> {
        let n = self.n;
        let mut per_axis: Vec<Vec<ExteriorVec<T>>> = vec![vec![ExteriorVec::zero(2 * n); v.len()]; n];
        for k in 0..v.len() {
            for p in 0..n {
                let cp = v[k].contract_gen(dzbar(n, p)).scale(c(T::lit(0.5)));
                match self.side {
                    Side::M => per_axis[p][k].add_assign(&cp),
                    Side::W => {
                        for q in 0..n {
                            per_axis[q][k].add_scaled(c(self.jets[k].inverse_hessian[(q, p)]), &cp);
                        }
                    }
                }
            }
        }
        let mut out = vec![ExteriorVec::zero(2 * n); v.len()];
        for (a, comp) in per_axis.iter().enumerate() {
            for (o, t) in out.iter_mut().zip(self.partial(comp, a, true)) {
                o.add_assign(&t);
            }
        }
        out
    }

    fn weight(&self, k: usize) -> T {
        self.rule.point(k).1 * fiber_volume(&self.jets[k], self.side, self.covolume)
    }

    /// Gram matrix of the pointwise pairing on the given masks at node `k`.
    fn gram(&self, k: usize, masks: &[u32]) -> Mat<Complex<T>> {
        let dim = 2 * self.n;
        Mat::from_fn(masks.len(), masks.len(), |a, b| {
            pointwise_pairing(&ExteriorVec::basis(dim, masks[b]), &ExteriorVec::basis(dim, masks[a]), &self.jets[k], self.side)
        })
    }

    /// Discrete adjoint `∂̄* = G⁻¹ ∂̄ᴴ G` on forms of bidegree `(p, q)`, `q ≥ 1`.
    pub fn adjoint(&self, u: &[ExteriorVec<T>], p: usize, q: usize) -> Result<Vec<ExteriorVec<T>>, FormError> {
        let n = self.n;
        let src = bidegree_masks(n, p, q);
        let dst = bidegree_masks(n, p, q.saturating_sub(1));
        let weighted: Vec<ExteriorVec<T>> = (0..u.len())
            .map(|k| {
                let g = self.gram(k, &src);
                let coeffs: Vec<Complex<T>> = src.iter().map(|m| u[k].coeff(*m)).collect();
                let gu = g.matvec(&coeffs);
                let mut e = ExteriorVec::zero(2 * n);
                for (m, v) in src.iter().zip(gu) {
                    *e.coeff_mut(*m) = v * self.weight(k);
                }
                e
            })
            .collect();
        let back = self.apply_transpose(&weighted);
        back.iter()
            .enumerate()
            .map(|(k, b)| {
                let g = self.gram(k, &dst);
                let lu = g.lu().ok_or(FormError::QuadratureUnderResolved)?;
                let rhs: Vec<Complex<T>> = dst.iter().map(|m| b.coeff(*m) * (T::one() / self.weight(k))).collect();
                let sol = lu.solve(&rhs);
                let mut e = ExteriorVec::zero(2 * n);
                for (m, v) in dst.iter().zip(sol) {
                    *e.coeff_mut(*m) = v;
                }
                Ok(e)
            })
            .collect()
    }

    /// Weighted discrete inner product.
    pub fn inner(&self, a: &[ExteriorVec<T>], b: &[ExteriorVec<T>]) -> Complex<T> {
        let mut s = Complex::new(T::zero(), T::zero());
        for k in 0..a.len() {
            s += pointwise_pairing(&a[k], &b[k], &self.jets[k], self.side) * self.weight(k);
        }
        s
    }
}

/// Test-form mismatch of `T∂̄*a` against `s ∂̄*(Ta)` on Chebyshev-Lobatto grids
/// with `nodes` points per axis, `s` from [`dbar_sign`]. Test forms are basis forms
/// of the target bidegree on `W` times monomials of degree at most two, each
/// normalised to unit norm.
pub fn dbar_star_commutation_residual<T: Real>(a: &TnForm<T>, ctx: &MirrorContext<T>, nodes: usize) -> Result<T, FormError> {
    if a.side != Side::M {
        return Err(FormError::SideMismatch);
    }
    let n = a.n;
    if a.q == 0 {
        return Ok(T::zero());
    }
    let dm = DiscreteDbar::new(ctx, Side::M, nodes)?;
    let dw = DiscreteDbar::new(ctx, Side::W, nodes)?;
    let u = dm.sample(a)?;
    let star_m = dm.adjoint(&u, a.p, a.q)?;
    let lhs: Vec<ExteriorVec<T>> = star_m.iter().zip(&dm.jets).map(|(v, j)| transform_at(v, j)).collect();
    let tu: Vec<ExteriorVec<T>> = u.iter().zip(&dw.jets).map(|(v, j)| transform_at(v, j)).collect();
    let s = c(T::lit(dbar_sign(n) as f64));
    let rhs: Vec<ExteriorVec<T>> = dw.adjoint(&tu, n - a.p, a.q)?.into_iter().map(|v| v.scale(s)).collect();
    let mismatch: Vec<ExteriorVec<T>> = lhs.iter().zip(&rhs).map(|(x, y)| x.sub(y)).collect();
    let nodes_x = dw.nodes();
    let mut weights: Vec<Vec<usize>> = vec![vec![]];
    for p in 0..n {
        weights.push(vec![p]);
        for q in p..n {
            weights.push(vec![p, q]);
        }
    }
    let mut worst = T::zero();
    for mask in bidegree_masks(n, n - a.p, a.q - 1) {
        for mono in &weights {
            let t: Vec<ExteriorVec<T>> = nodes_x
                .iter()
                .map(|x| {
                    let f = mono.iter().fold(T::one(), |acc, &k| acc * x[k]);
                    ExteriorVec::basis(2 * n, mask).scale(c(f))
                })
                .collect();
            let norm = dw.inner(&t, &t).re.sqrt();
            worst = worst.max(dw.inner(&mismatch, &t).norm() / norm);
        }
    }
    Ok(worst)
}

/// `−ξ_jk φ^{kl}` at `x`.
pub fn moduli_map<T: Real>(xi: &ModuliVector<T>, ctx: &MirrorContext<T>, x: &[T]) -> Result<Mat<T>, FormError> {
    let n = xi.dim();
    let j = xi.xi.jet3(x)?;
    let xi_m = Mat::from_fn(n, n, |a, b| j.h[a][b]);
    Ok(xi_m.matmul(&ctx.jet(x)?.inverse_hessian).scale(-T::one()))
}

/// `−ξ_jk θ^{kl}` with `θ = φ + iη` from the context's B-field.
pub fn moduli_map_bfield<T: Real>(xi: &ModuliVector<T>, ctx: &MirrorContext<T>, x: &[T]) -> Result<Mat<Complex<T>>, FormError> {
    let cp = ctx
        .bfield
        .as_ref()
        .ok_or_else(|| FormError::Geometry(GeometryError::InvalidDomain("context has no B-field".into())))?;
    let n = xi.dim();
    let j = xi.xi.jet3(x)?;
    let theta_inv = cp.theta(x)?.inverse().ok_or(FormError::Geometry(GeometryError::NonConvexAt {
        x: x.iter().map(|v| v.as_f64()).collect(),
    }))?;
    let xi_m = Mat::from_fn(n, n, |a, b| c(j.h[a][b]));
    Ok(xi_m.matmul(&theta_inv).scale(c(-T::one())))
}

/// Reads the matrix `R_jl` of an `(n−1, 1)`-form `Σ R_jl ε_j dz_{ĵ} ∧ dz̄_l` on `W`,
/// where `ε_j` is the removal sign; this identifies the form with
/// `Σ R_jl ∂/∂z_j ⊗ dz̄_l` up to the contraction with `Ω_W`.
pub fn read_vector_valued<T: Real>(v: &ExteriorVec<T>, n: usize) -> Mat<Complex<T>> {
    let all = (1u32 << n) - 1;
    Mat::from_fn(n, n, |j, l| {
        let i = MultiIndex(all & !(1 << j));
        let mask = form_mask(n, i, MultiIndex(1 << l));
        let eps = removal_sign(n, MultiIndex(1 << j));
        v.coeff(mask) * T::lit(eps as f64)
    })
}

/// Maximum deviation between the moduli map and `i` times the matrix read back
/// from `T(iΣξ_jk dz^j dz̄^k)` at the sample points.
pub fn moduli_readback_residual<T: Real>(xi: &ModuliVector<T>, ctx: &MirrorContext<T>, samples: &[Vec<T>]) -> Result<T, FormError> {
    let n = xi.dim();
    let form = xi.form();
    let mut worst = T::zero();
    for x in samples {
        let jet = ctx.jet(x)?;
        let image = transform_at(&form.eval(x)?.value, &jet);
        let r = read_vector_valued(&image, n);
        let m = moduli_map(xi, ctx, x)?;
        for a in 0..n {
            for b in 0..n {
                let d = c(m[(a, b)]) - Complex::new(T::zero(), T::one()) * r[(a, b)];
                worst = worst.max(d.norm());
            }
        }
    }
    Ok(worst)
}

/// `⟨ξ, ζ⟩_M = 2 ∫ V_M φ^{jl} φ^{km} ξ_jk ζ_lm dx`.
pub fn moduli_metric_m<T: Real>(xi: &ModuliVector<T>, zeta: &ModuliVector<T>, ctx: &MirrorContext<T>) -> Result<T, FormError> {
    let n = xi.dim();
    let mut s = T::zero();
    for (x, w) in ctx.base_rule().points() {
        let jet = ctx.jet(&x)?;
        let a = xi.xi.jet3(&x)?;
        let b = zeta.xi.jet3(&x)?;
        let g = &jet.inverse_hessian;
        let mut v = T::zero();
        for j in 0..n {
            for k in 0..n {
                for l in 0..n {
                    for m in 0..n {
                        v += g[(j, l)] * g[(k, m)] * a.h[j][k] * b.h[l][m];
                    }
                }
            }
        }
        s += T::lit(2.0) * fiber_volume(&jet, Side::M, ctx.domain.lattice_covolume) * v * w;
    }
    Ok(s)
}

/// `⟨Tξ, Tζ⟩_W = 2 ∫ V_W A_jl B_pq φ^{jp} φ_lq dx` for the vector-valued images
/// `A = moduli_map(ξ)`, `B = moduli_map(ζ)`.
pub fn moduli_metric_w<T: Real>(xi: &ModuliVector<T>, zeta: &ModuliVector<T>, ctx: &MirrorContext<T>) -> Result<T, FormError> {
    let n = xi.dim();
    let mut s = T::zero();
    for (x, w) in ctx.base_rule().points() {
        let jet = ctx.jet(&x)?;
        let a = moduli_map(xi, ctx, &x)?;
        let b = moduli_map(zeta, ctx, &x)?;
        let mut v = T::zero();
        for j in 0..n {
            for l in 0..n {
                for p in 0..n {
                    for q in 0..n {
                        v += a[(j, l)] * b[(p, q)] * jet.inverse_hessian[(j, p)] * jet.hessian[(l, q)];
                    }
                }
            }
        }
        s += T::lit(2.0) * fiber_volume(&jet, Side::W, ctx.domain.lattice_covolume) * v * w;
    }
    Ok(s)
}

/// Ratio `V_M / V_W` at the domain centre; the overall constant relating the two metrics.
pub fn moduli_constant<T: Real>(ctx: &MirrorContext<T>) -> Result<T, FormError> {
    let x0 = ctx.domain.center();
    Ok(ctx.volume_m(&x0)? / ctx.volume_w(&x0)?)
}

/// `|⟨ξ,ζ⟩_M − κ⟨Tξ,Tζ⟩_W| / max(|⟨ξ,ζ⟩_M|, ε)` with `κ` from [`moduli_constant`].
pub fn moduli_isometry_residual<T: Real>(xi: &ModuliVector<T>, zeta: &ModuliVector<T>, ctx: &MirrorContext<T>) -> Result<T, FormError> {
    let m = moduli_metric_m(xi, zeta, ctx)?;
    let w = moduli_metric_w(xi, zeta, ctx)?;
    let kappa = moduli_constant(ctx)?;
    let floor = T::lit(1e-300).max(T::min_positive_value());
    Ok((m - kappa * w).abs() / m.abs().max(floor))
}

/// Which side a Yukawa coupling was computed on.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum YukawaSide {
    A,
    B,
}

#[derive(Clone, Debug, PartialEq)]
pub struct YukawaResult<T> {
    pub value: Complex<T>,
    pub side: YukawaSide,
    /// Integrand at each quadrature node.
    pub trace: Vec<Complex<T>>,
}

fn permutations(n: usize) -> Vec<(Vec<usize>, i32)> {
    fn rec(prefix: &mut Vec<usize>, used: &mut Vec<bool>, n: usize, out: &mut Vec<(Vec<usize>, i32)>) {
        if prefix.len() == n {
            let mut inv = 0;
            for i in 0..n {
                for j in i + 1..n {
                    if prefix[i] > prefix[j] {
                        inv += 1;
                    }
                }
            }
            out.push((prefix.clone(), if inv % 2 == 0 { 1 } else { -1 }));
            return;
        }
        for k in 0..n {
            if !used[k] {
                used[k] = true;
                prefix.push(k);
                rec(prefix, used, n, out);
                prefix.pop();
                used[k] = false;
            }
        }
    }
    let mut out = Vec::new();
    rec(&mut Vec::new(), &mut vec![false; n], n, &mut out);
    out
}

/// Coefficient matrix of the `dx^a ∧ dy^b` part of a `(1,1)`-form value
/// `Σ c_jk dz^j ∧ dz̄^k`: `−i(c_ab + c_ba)`.
pub fn real_dxdy_coefficients<T: Real>(v: &ExteriorVec<T>, n: usize) -> Mat<Complex<T>> {
    let cc = |a: usize, b: usize| v.coeff((1 << dz(a)) | (1 << dzbar(n, b)));
    let mi = Complex::new(T::zero(), -T::one());
    Mat::from_fn(n, n, |a, b| mi * (cc(a, b) + cc(b, a)))
}

fn closedness<T: Real>(forms: &[TnForm<T>], ctx: &MirrorContext<T>, tol: T) -> Result<(), FormError> {
    let samples = ctx.domain.halton_points(8, T::lit(0.1));
    for (index, f) in forms.iter().enumerate() {
        if f.side != Side::M || f.p != 1 || f.q != 1 {
            return Err(FormError::BidegreeMismatch);
        }
        let mut worst = T::zero();
        for x in &samples {
            let fj = f.eval(x)?;
            let jet = ctx.jet(x)?;
            let d = dbar_vec(&fj, &jet, Side::M)?.add(&crate::forms::del_vec(&fj, &jet, Side::M)?);
            worst = worst.max(d.max_abs());
        }
        if worst > tol {
            return Err(FormError::NotClosed { index, residual: worst.as_f64() });
        }
    }
    Ok(())
}

/// `V ∫_D Σ_{σ,τ} sgnσ sgnτ Π_r α^{(r)}_{σ(r)τ(r)} dx` with `α^{(r)}` the
/// `dx∧dy` coefficients of the inputs. Inputs must be closed `(1,1)`-forms on `M`.
pub fn yukawa_a<T: Real>(forms: &[TnForm<T>], ctx: &MirrorContext<T>) -> Result<YukawaResult<T>, FormError> {
    let n = ctx.n();
    if forms.len() != n {
        return Err(FormError::WrongArity { expected: n, found: forms.len() });
    }
    closedness(forms, ctx, T::lit(1e-8))?;
    let perms = permutations(n);
    let mut value = Complex::new(T::zero(), T::zero());
    let mut trace = Vec::new();
    for (x, w) in ctx.base_rule().points() {
        let jet = ctx.jet(&x)?;
        let mats: Vec<Mat<Complex<T>>> =
            forms.iter().map(|f| Ok(real_dxdy_coefficients(&f.eval(&x)?.value, n))).collect::<Result<_, FormError>>()?;
        let mut s = Complex::new(T::zero(), T::zero());
        for (sigma, ss) in &perms {
            for (tau, st) in &perms {
                let mut prod = Complex::new(T::lit((ss * st) as f64), T::zero());
                for r in 0..n {
                    prod *= mats[r][(sigma[r], tau[r])];
                }
                s += prod;
            }
        }
        let integrand = s * fiber_volume(&jet, Side::M, ctx.domain.lattice_covolume);
        trace.push(integrand);
        value += integrand * w;
    }
    Ok(YukawaResult { value, side: YukawaSide::A, trace })
}

/// `δ_B ω = Σ B_jl dz̄_l ∧ ι(∂/∂z_j) ω` on the `W` algebra.
fn delta<T: Real>(b: &Mat<Complex<T>>, v: &ExteriorVec<T>, n: usize) -> ExteriorVec<T> {
    let mut out = ExteriorVec::zero(2 * n);
    for j in 0..n {
        let cj = v.contract_gen(dz(j));
        for l in 0..n {
            let s = b[(j, l)];
            if s.re != T::zero() || s.im != T::zero() {
                out.add_scaled(s, &cj.wedge_gen(dzbar(n, l)));
            }
        }
    }
    out
}

/// Sign relating `dz₁⋯dzₙ dz̄₁⋯dz̄ₙ` to the product of the pairs `dz_j dz̄_j`.
fn interleave_sign(n: usize) -> i32 {
    inversion_sign(n)
}

/// Coefficient on `dx₁∧dy₁∧⋯∧dxₙ∧dyₙ` of `dz₁⋯dzₙ dz̄₁⋯dz̄ₙ` with `dz = dx + i dy`.
pub fn top_form_factor<T: Real>(n: usize) -> Complex<T> {
    // dz ∧ dz̄ = −2i dx ∧ dy for each pair.
    let mut f = Complex::new(T::lit(interleave_sign(n) as f64), T::zero());
    for _ in 0..n {
        f *= Complex::new(T::zero(), T::lit(-2.0));
    }
    f
}

/// `∫_W Ω_W ∧ δ_{β₁}⋯δ_{βₙ} Ω_W` for images `β_r` of `(1,1)`-forms, pulled back
/// to `D` (Jacobian `det φ`) and weighted by the dual fiber volume.
pub fn yukawa_b<T: Real>(images: &[TnForm<T>], ctx: &MirrorContext<T>) -> Result<YukawaResult<T>, FormError> {
    let n = ctx.n();
    if images.len() != n {
        return Err(FormError::WrongArity { expected: n, found: images.len() });
    }
    if images.iter().any(|f| f.side != Side::W || f.p + 1 != n || f.q != 1) {
        return Err(FormError::BidegreeMismatch);
    }
    let all = (1u32 << n) - 1;
    let omega = ExteriorVec::basis(2 * n, all);
    let top = form_mask(n, MultiIndex(all), MultiIndex(all));
    let factor = top_form_factor::<T>(n);
    let mut value = Complex::new(T::zero(), T::zero());
    let mut trace = Vec::new();
    for (x, w) in ctx.base_rule().points() {
        let jet = ctx.jet(&x)?;
        let mut v = omega.clone();
        for f in images.iter().rev() {
            let b = read_vector_valued(&f.eval(&x)?.value, n);
            v = delta(&b, &v, n);
        }
        let t = omega.wedge(&v).coeff(top) * factor;
        let integrand = t * jet.det_hessian * fiber_volume(&jet, Side::W, ctx.domain.lattice_covolume);
        trace.push(integrand);
        value += integrand * w;
    }
    Ok(YukawaResult { value, side: YukawaSide::B, trace })
}

/// `∫_M ω^n = n! · covolume · ∫_D det φ dx` in the orientation `dx¹dy¹⋯dxⁿdyⁿ`.
pub fn prepotential_a<T: Real>(ctx: &MirrorContext<T>) -> Result<T, FormError> {
    let n = ctx.n();
    let fact: f64 = (1..=n).map(|k| k as f64).product();
    let mut s = T::zero();
    for (x, w) in ctx.base_rule().points() {
        s += ctx.jet(&x)?.det_hessian * w;
    }
    Ok(s * T::lit(fact) * ctx.domain.lattice_covolume)
}

/// `∫_W Ω_W ∧ Ω̄_W` in the orientation `dx₁dy₁⋯dxₙdyₙ`: the constant top-form
/// coefficient times `vol(D*) / covolume`, with `vol(D*) = ∫_D det φ dx`.
pub fn prepotential_b<T: Real>(ctx: &MirrorContext<T>) -> Result<Complex<T>, FormError> {
    let n = ctx.n();
    let all = (1u32 << n) - 1;
    let omega = ExteriorVec::<T>::basis(2 * n, all);
    let omega_bar = ExteriorVec::<T>::basis(2 * n, all << n);
    let coeff = omega.wedge(&omega_bar).coeff(form_mask(n, MultiIndex(all), MultiIndex(all))) * top_form_factor::<T>(n);
    let mut s = T::zero();
    for (x, w) in ctx.base_rule().points() {
        s += ctx.jet(&x)?.det_hessian * w;
    }
    Ok(coeff * (s / ctx.domain.lattice_covolume))
}

/// Result of the fiber L² metric check at one base point.
#[derive(Clone, Debug, PartialEq)]
pub struct FiberMetricCheck<T> {
    /// `max_{j,l} |∫_C ⟨ι_j ω, ι_l ω⟩ − φ_jl vol(C)|` over base directions.
    pub base_residual: T,
    /// Largest entry of the base-fiber and fiber-fiber blocks.
    pub mixed_block: T,
}

/// L² metric of the deformations of the fiber `C` over `x`, by periodic quadrature
/// over the fiber torus (cubic lattice of the context's covolume).
pub fn fiber_l2_metric<T: Real>(ctx: &MirrorContext<T>, x: &[T]) -> Result<Mat<T>, FormError> {
    let n = ctx.n();
    let jet = ctx.jet(x)?;
    let s = crate::geometry::structures(&jet, ctx.domain.lattice_covolume);
    let side = ctx.domain.lattice_covolume.powf(T::one() / T::lit(n as f64));
    let rule = TensorRule::new((0..n).map(|_| Rule::periodic(side, ctx.domain.fiber_resolution)).collect());
    let sqrt_det = jet.det_hessian.sqrt();
    let mut out = Mat::zeros(2 * n, 2 * n);
    // Fiber one-forms ι_e ω restricted to C: the dy-components of each row of ω.
    let restricted = |a: usize| -> Vec<T> { (0..n).map(|k| s.omega_m[(a, n + k)]).collect() };
    for a in 0..2 * n {
        let ra = restricted(a);
        for b in 0..2 * n {
            let rb = restricted(b);
            let mut acc = T::zero();
            for (_y, w) in rule.points() {
                let mut v = T::zero();
                for k in 0..n {
                    for m in 0..n {
                        v += ra[k] * rb[m] * jet.inverse_hessian[(k, m)];
                    }
                }
                acc += v * sqrt_det * w;
            }
            out[(a, b)] = acc;
        }
    }
    Ok(out)
}

pub fn fiber_l2_metric_residual<T: Real>(ctx: &MirrorContext<T>, x: &[T]) -> Result<FiberMetricCheck<T>, FormError> {
    let n = ctx.n();
    let jet = ctx.jet(x)?;
    let m = fiber_l2_metric(ctx, x)?;
    let vol = jet.det_hessian.sqrt() * ctx.domain.lattice_covolume;
    let mut base = T::zero();
    let mut mixed = T::zero();
    for a in 0..2 * n {
        for b in 0..2 * n {
            if a < n && b < n {
                base = base.max((m[(a, b)] - jet.hessian[(a, b)] * vol).abs());
            } else {
                mixed = mixed.max(m[(a, b)].abs());
            }
        }
    }
    Ok(FiberMetricCheck { base_residual: base, mixed_block: mixed })
}

/// `Ω_W ∧ Ω̄_W` coefficient on `dx¹⋯dxⁿ dy₁⋯dyₙ` with `dz_j = θ_jk dx^k + i dy_j`.
pub fn omega_omega_bar<T: Real>(theta: &Mat<Complex<T>>) -> Complex<T> {
    let n = theta.rows();
    let i = Complex::new(T::zero(), T::one());
    let m = Mat::from_fn(2 * n, 2 * n, |r, col| match (r < n, col < n) {
        (true, true) => theta[(r, col)],
        (true, false) => {
            if col - n == r {
                i
            } else {
                Complex::new(T::zero(), T::zero())
            }
        }
        (false, true) => theta[(r - n, col)].conj(),
        (false, false) => {
            if col - n == r - n {
                -i
            } else {
                Complex::new(T::zero(), T::zero())
            }
        }
    });
    m.det()
}

/// Phase `θ = −arg(mean of det(φ_jk + iη_jk))` over the sample points.
pub fn bfield_phase<T: Real>(cp: &ComplexifiedPotential<T>, samples: &[Vec<T>]) -> Result<T, FormError> {
    let mut s = Complex::new(T::zero(), T::zero());
    for x in samples {
        s += cp.theta(x)?.det();
    }
    Ok(-s.im.atan2(s.re))
}

/// `(sup |Ω_WΩ̄_W(η) − Ω_WΩ̄_W(0)|, sup |Im e^{iθ} det(φ_jk + iη_jk)|)` over the samples.
pub fn gross_bfield_checks<T: Real>(cp: &ComplexifiedPotential<T>, samples: &[Vec<T>]) -> Result<(T, T, T), FormError> {
    let phase = bfield_phase(cp, samples)?;
    let rot = Complex::new(phase.cos(), phase.sin());
    let mut r1 = T::zero();
    let mut r2 = T::zero();
    for x in samples {
        let theta = cp.theta(x)?;
        let n = theta.rows();
        let real = Mat::from_fn(n, n, |a, b| c(theta[(a, b)].re));
        r1 = r1.max((omega_omega_bar(&theta) - omega_omega_bar(&real)).norm());
        r2 = r2.max((rot * theta.det()).im.abs());
    }
    Ok((r1, r2, phase))
}

/// `(−1)^{n−j}` generator rule for `T(dz^j)` (1-based `j`), as a basis image.
pub fn generator_image_dz<T: Real>(n: usize, j: usize) -> ExteriorVec<T> {
    let all = (1u32 << n) - 1;
    let sign = if (n - j) % 2 == 0 { T::one() } else { -T::one() };
    ExteriorVec::basis(2 * n, all & !(1 << (j - 1))).scale(c(sign))
}

/// `T(dz̄^j) = Σ_k φ^{jk} dz₁⋯dzₙ dz̄_k` (1-based `j`).
pub fn generator_image_dzbar<T: Real>(jet: &JetFrame<T>, j: usize) -> ExteriorVec<T> {
    let n = jet.dim();
    let all = (1u32 << n) - 1;
    let mut v = ExteriorVec::zero(2 * n);
    for k in 0..n {
        let mask = all | (1 << dzbar(n, k));
        *v.coeff_mut(mask) += c(jet.inverse_hessian[(j - 1, k)]);
    }
    v
}

/// Builds the transform multiplicatively from the generator rules: the image of
/// `dz^I ∧ dz̄^J` is `±` the contraction of `Ω_W` by the `∂/∂z_i` followed by the
/// `dz̄` images, independently of [`transform_vec`].
pub fn transform_from_generators<T: Real>(mask: u32, jet: &JetFrame<T>) -> ExteriorVec<T> {
    let n = jet.dim();
    let (i, j) = split_mask(n, mask);
    // Ω_W with the dz_i removed in order, via the dz generator rule.
    let mut hol = ExteriorVec::basis(2 * n, (1u32 << n) - 1);
    let mut first = true;
    for k in i.indices() {
        if first {
            hol = generator_image_dz(n, k);
            first = false;
        } else {
            // Remove dz_k from the current monomial by moving it to the end.
            let mut next = ExteriorVec::zero(2 * n);
            for (m, v) in hol.coeffs().iter().enumerate() {
                let m = m as u32;
                if v.re == T::zero() && v.im == T::zero() {
                    continue;
                }
                let bit = 1u32 << (k - 1);
                if m & bit == 0 {
                    continue;
                }
                let rest = m & !bit;
                let s = wedge_sign(rest, bit);
                *next.coeff_mut(rest) += *v * T::lit(s as f64);
            }
            hol = next;
        }
    }
    let mut acc = hol;
    for jj in j.indices() {
        let img = generator_image_dzbar(jet, jj);
        // Strip Ω_W from the generator image to keep only its dz̄ factor.
        let all = (1u32 << n) - 1;
        let mut factor = ExteriorVec::zero(2 * n);
        for (m, v) in img.coeffs().iter().enumerate() {
            if v.re != T::zero() || v.im != T::zero() {
                *factor.coeff_mut(m as u32 & !all) += *v;
            }
        }
        acc = acc.wedge(&factor);
    }
    acc
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::forms::{operator_matrix, OperatorTag};
    use crate::geometry::ScalarField;
    use crate::poly::Poly;

    fn moduli(n: usize, seed: f64) -> ModuliVector<f64> {
        let mut p = Poly::zero();
        for a in 0..n {
            for b in a..n {
                let mut e = [0u8; 4];
                e[a] += 1;
                e[b] += 1;
                p.add_term(e, Complex::new((seed * (1.0 + a as f64) + 0.37 * b as f64).sin(), 0.0));
            }
            let mut e = [0u8; 4];
            e[a] += 3;
            p.add_term(e, Complex::new(0.2 * (seed + a as f64).cos(), 0.0));
        }
        ModuliVector::new(ScalarField::polynomial(n, p))
    }

    fn context(pot: Potential<f64>, n: usize) -> MirrorContext<f64> {
        let dom = Domain::cube(n, -0.5, 0.5).unwrap().with_grid_resolution(17).unwrap();
        MirrorContext::new(pot, dom).unwrap()
    }

    fn sample_jet(n: usize) -> JetFrame<f64> {
        let x: Vec<f64> = (0..n).map(|k| 0.1 + 0.07 * k as f64).collect();
        Potential::exp_tilt(n, 0.3).jet_at(&x).unwrap()
    }

    fn form(n: usize, i: &[usize], j: &[usize]) -> TnForm<f64> {
        let mut coeff = Poly::var(0).mul(&Poly::var(n - 1));
        coeff.add_term([0, 0, 0, 0], Complex::new(0.3, 0.1));
        TnForm::monomial(n, Side::M, MultiIndex::new(n, i).unwrap(), MultiIndex::new(n, j).unwrap(), coeff).unwrap()
    }

    #[test]
    fn transform_matches_generator_construction() {
        for n in 1..=3 {
            let jet = sample_jet(n);
            for m in 0..(1u32 << (2 * n)) {
                let d = transform_from_generators(m, &jet).sub(&transform_at(&ExteriorVec::basis(2 * n, m), &jet));
                assert!(d.max_abs() < 1e-14, "n={n} mask={m}");
            }
        }
    }

    #[test]
    fn generator_rules() {
        let jet = sample_jet(2);
        // T(1) = dz₁dz₂, T(dz¹) = −dz₂, T(dz²) = dz₁.
        let one = transform_at(&ExteriorVec::scalar(4, Complex::new(1.0, 0.0)), &jet);
        assert_eq!(one.coeff(0b0011), Complex::new(1.0, 0.0));
        assert_eq!(transform_at(&ExteriorVec::basis(4, 0b0001), &jet).coeff(0b0010), Complex::new(-1.0, 0.0));
        assert_eq!(transform_at(&ExteriorVec::basis(4, 0b0010), &jet).coeff(0b0001), Complex::new(1.0, 0.0));
    }

    #[test]
    fn inverse_composes_to_sign() {
        for n in 1..=3 {
            let jet = sample_jet(n);
            let s = inversion_sign(n) as f64;
            for m in 0..(1u32 << (2 * n)) {
                let v = ExteriorVec::basis(2 * n, m);
                let back = inverse_transform_at(&transform_at(&v, &jet), &jet);
                assert!(back.sub(&v.scale(Complex::new(s, 0.0))).max_abs() < 1e-13);
            }
        }
    }

    #[test]
    fn transform_intertwines_operators() {
        use OperatorTag::*;
        for n in 1..=3 {
            let jet = sample_jet(n);
            let t = transform_matrix(&jet);
            for (w, m) in [(LA, LB), (LambdaA, LambdaB), (HA, HB), (LB, LA), (LambdaB, LambdaA), (HB, HA)] {
                let lhs = operator_matrix(w, &jet, Side::W).matmul(&t);
                let rhs = t.matmul(&operator_matrix(m, &jet, Side::M));
                assert!(lhs.sub(&rhs).max_abs() < 1e-12, "n={n} {w:?}/{m:?}");
            }
        }
    }

    #[test]
    fn dbar_commutes_up_to_sign() {
        for n in 1..=3 {
            let ctx = context(Potential::exp_tilt(n, 0.3), n);
            let samples = ctx.domain.halton_points(5, 0.1);
            for (i, j) in [(vec![], vec![]), (vec![1], vec![]), (vec![], vec![1]), (vec![1], vec![n])] {
                let r = dbar_commutation_residual(&form(n, &i, &j), &ctx, &samples).unwrap();
                assert!(r < 1e-12, "n={n} {i:?} {j:?}: {r}");
            }
        }
    }

    #[test]
    fn dbar_commutation_fails_with_wrong_sign() {
        let ctx = context(Potential::exp_tilt(1, 0.3), 1);
        let a = form(1, &[], &[]);
        let x = [0.2];
        let jet = ctx.jet(&x).unwrap();
        let fj = a.eval(&x).unwrap();
        let lhs = dbar_vec(&transform_jet(&fj, &jet, false), &jet, Side::W).unwrap();
        let rhs = transform_at(&dbar_vec(&fj, &jet, Side::M).unwrap(), &jet);
        assert!(lhs.sub(&rhs).max_abs() > 1e-2);
    }

    #[test]
    fn dbar_star_commutation_converges_spectrally() {
        let ctx = context(Potential::exp_tilt(2, 0.3), 2);
        let a = form(2, &[], &[1, 2]);
        let coarse = dbar_star_commutation_residual(&a, &ctx, 8).unwrap();
        let fine = dbar_star_commutation_residual(&a, &ctx, 14).unwrap();
        assert!(coarse > 1e-14);
        assert!(fine < 1e-12 && fine < coarse, "{coarse} {fine}");
    }

    #[test]
    fn discrete_adjoint_is_adjoint() {
        let ctx = context(Potential::exp_tilt(2, 0.3), 2);
        for side in [Side::M, Side::W] {
            let d = DiscreteDbar::new(&ctx, side, 9).unwrap();
            let u = d.sample(&form(2, &[1], &[])).unwrap();
            let v = d.apply(&d.sample(&form(2, &[1], &[2])).unwrap());
            let lhs = d.inner(&d.apply(&u), &v);
            let rhs = d.inner(&u, &d.adjoint(&v, 1, 1).unwrap());
            assert!((lhs - rhs).norm() < 1e-10 * lhs.norm().max(1.0));
        }
    }

    #[test]
    fn moduli_map_reads_back_from_transform() {
        for n in 2..=3 {
            let ctx = context(Potential::exp_tilt(n, 0.3), n);
            let s = ctx.domain.halton_points(5, 0.1);
            assert!(moduli_readback_residual(&moduli(n, 0.3), &ctx, &s).unwrap() < 1e-13);
        }
    }

    #[test]
    fn moduli_isometry_on_ma_backgrounds_only() {
        let exact = context(Potential::exact_ma(2, 3.0), 2);
        assert!(moduli_isometry_residual(&moduli(2, 0.3), &moduli(2, 1.7), &exact).unwrap() < 1e-12);
        let tilt = context(Potential::exp_tilt(2, 0.3), 2);
        assert!(moduli_isometry_residual(&moduli(2, 0.3), &moduli(2, 1.7), &tilt).unwrap() > 1e-3);
    }

    fn yukawa_ratios(ctx: &MirrorContext<f64>, n: usize) -> Vec<Complex<f64>> {
        (0..4)
            .map(|k| {
                let fs: Vec<_> = (0..n).map(|r| moduli(n, 0.5 + k as f64 + 0.9 * r as f64).form()).collect();
                let imgs: Vec<_> = fs.iter().map(|f| transform(f, ctx).unwrap()).collect();
                yukawa_a(&fs, ctx).unwrap().value / yukawa_b(&imgs, ctx).unwrap().value
            })
            .collect()
    }

    #[test]
    fn yukawa_ratio_constant_on_ma_backgrounds() {
        let r = yukawa_ratios(&context(Potential::exact_ma(2, 3.0), 2), 2);
        assert!(r.iter().all(|x| (x - r[0]).norm() < 1e-10 * r[0].norm()));
        let r = yukawa_ratios(&context(Potential::exp_tilt(2, 0.3), 2), 2);
        assert!(r.iter().any(|x| (x - r[0]).norm() > 1e-4));
    }

    #[test]
    fn yukawa_flat_value() {
        let ctx = context(Potential::flat(2), 2);
        let omega = TnForm::from_fn(2, Side::M, 1, 1, |_| {
            let mut v = ExteriorVec::zero(4);
            *v.coeff_mut(0b0101) = Complex::new(0.0, 0.5);
            *v.coeff_mut(0b1010) = Complex::new(0.0, 0.5);
            Ok(FormJet::constant(2, v))
        })
        .unwrap();
        let y = yukawa_a(&[omega.clone(), omega], &ctx).unwrap();
        assert!((y.value - Complex::new(2.0, 0.0)).norm() < 1e-13);
    }

    #[test]
    fn yukawa_rejects_open_forms() {
        let ctx = context(Potential::flat(2), 2);
        let a = form(2, &[1], &[2]);
        assert!(matches!(yukawa_a(&[a.clone(), a], &ctx), Err(FormError::NotClosed { .. })));
    }

    #[test]
    fn flat_prepotentials() {
        let dom = Domain::<f64>::cube(2, -0.5, 0.5).unwrap().with_grid_resolution(9).unwrap().with_covolume(2.0).unwrap();
        let ctx = MirrorContext::new(Potential::flat(2), dom).unwrap();
        assert!((prepotential_a(&ctx).unwrap() - 4.0).abs() < 1e-13);
        assert!((prepotential_b(&ctx).unwrap().norm() - 2.0).abs() < 1e-13);
    }

    #[test]
    fn fiber_metric_is_hessian_times_volume() {
        let ctx = context(Potential::exp_tilt(2, 0.3), 2);
        let r = fiber_l2_metric_residual(&ctx, &[0.1, -0.2]).unwrap();
        assert!(r.base_residual < 1e-12);
        assert_eq!(r.mixed_block, 0.0);
    }

    #[test]
    fn bfield_invariance_and_phase() {
        let t = 0.4;
        let eta = ScalarField::quadratic(Mat::from_fn(2, 2, |a, b| if a == b { t } else { 0.0 }));
        let cp = ComplexifiedPotential::new(Potential::flat(2), eta, Complex::new(1.0 - t * t, 2.0 * t));
        let s = Domain::cube(2, -0.5, 0.5).unwrap().halton_points(6, 0.1);
        let (r1, r2, _) = gross_bfield_checks(&cp, &s).unwrap();
        assert!(r1 < 1e-13 && r2 < 1e-13);
        let mut p = Poly::zero();
        p.add_term([3, 0, 0, 0], Complex::new(0.3, 0.0));
        let cp = ComplexifiedPotential::new(Potential::flat(2), ScalarField::polynomial(2, p), Complex::new(1.0, 0.0));
        let (r1, r2, _) = gross_bfield_checks(&cp, &s).unwrap();
        assert!(r1 < 1e-13 && r2 > 1e-3);
    }
}
