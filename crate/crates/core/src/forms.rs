//! T^n-invariant complex forms on `M` and `W`, the operators `∂̄`, `∂`, the two
//! `sl(2)` triples, and the Hermitian pairings.
//!
//! A form on either side lives in the exterior algebra on `2n` generators:
//! generator `j` is `dz^j` (on `W`, `dz_j`) and generator `n + j` is `dz̄^j`
//! (`dz̄_j`). Monomials are written with the holomorphic block first, both blocks
//! ascending.

use crate::exterior::ExteriorVec;
use crate::geometry::{Domain, GeometryError, JetFrame, Potential, ScalarField};
use crate::linalg::Mat;
use crate::poly::{Exponent, Poly};
use crate::quadrature::TensorRule;
use crate::scalar::Real;
use num_complex::Complex;
use serde::{Deserialize, Serialize};
use std::collections::BTreeMap;
use std::fmt;
use std::sync::Arc;
use thiserror::Error;

#[derive(Debug, Error)]
pub enum FormError {
    #[error("bidegree ({p}, {q}) exceeds n = {n}")]
    DegreeOverflow { p: usize, q: usize, n: usize },
    #[error("forms live on different sides")]
    SideMismatch,
    #[error("forms have different bidegrees or dimensions")]
    BidegreeMismatch,
    #[error("multi-index {0:?} is not strictly increasing within 1..=n")]
    BadMultiIndex(Vec<usize>),
    #[error("operation needs explicit polynomial coefficients")]
    NotExplicit,
    #[error("coefficient derivatives are not available for this form")]
    NoDerivatives,
    #[error("expected {expected} forms, found {found}")]
    WrongArity { expected: usize, found: usize },
    #[error("input {index} is not closed: residual {residual:e}")]
    NotClosed { index: usize, residual: f64 },
    #[error("quadrature grid too coarse for the coefficient variation")]
    QuadratureUnderResolved,
    #[error("serialisation: {0}")]
    Serde(String),
    #[error(transparent)]
    Geometry(#[from] GeometryError),
}

/// Which manifold a form lives on.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Side {
    M,
    W,
}

impl Side {
    pub fn other(self) -> Self {
        match self {
            Side::M => Side::W,
            Side::W => Side::M,
        }
    }
}

/// Strictly increasing subset of `{1..n}`, stored as a bitmask (bit `j − 1` for index `j`).
#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct MultiIndex(pub u32);

impl MultiIndex {
    pub fn empty() -> Self {
        Self(0)
    }

    /// From 1-based indices.
    pub fn new(n: usize, idx: &[usize]) -> Result<Self, FormError> {
        let mut mask = 0u32;
        let mut prev = 0usize;
        for &i in idx {
            if i <= prev || i > n {
                return Err(FormError::BadMultiIndex(idx.to_vec()));
            }
            mask |= 1 << (i - 1);
            prev = i;
        }
        Ok(Self(mask))
    }

    /// 1-based indices in ascending order.
    pub fn indices(self) -> Vec<usize> {
        (0..32).filter(|b| self.0 & (1 << b) != 0).map(|b| b + 1).collect()
    }

    pub fn len(self) -> usize {
        self.0.count_ones() as usize
    }

    pub fn is_empty(self) -> bool {
        self.0 == 0
    }
}

/// Combined exterior-algebra mask of `dz^I ∧ dz̄^J`.
#[inline]
pub fn form_mask(n: usize, i: MultiIndex, j: MultiIndex) -> u32 {
    i.0 | (j.0 << n)
}

/// Inverse of [`form_mask`].
#[inline]
pub fn split_mask(n: usize, mask: u32) -> (MultiIndex, MultiIndex) {
    let low = (1u32 << n) - 1;
    (MultiIndex(mask & low), MultiIndex(mask >> n))
}

/// Generator index of `dz^j` (0-based `j`).
#[inline]
pub fn dz(j: usize) -> usize {
    j
}

/// Generator index of `dz̄^j` (0-based `j`).
#[inline]
pub fn dzbar(n: usize, j: usize) -> usize {
    n + j
}

fn c<T: Real>(re: T) -> Complex<T> {
    Complex::new(re, T::zero())
}

fn i_unit<T: Real>() -> Complex<T> {
    Complex::new(T::zero(), T::one())
}

/// Pointwise value of a form with its first derivatives in the base coordinates.
///
/// `grad` is empty when derivatives are not available.
#[derive(Clone, Debug, PartialEq)]
pub struct FormJet<T> {
    pub value: ExteriorVec<T>,
    pub grad: Vec<ExteriorVec<T>>,
}

impl<T: Real> FormJet<T> {
    pub fn zero(n: usize) -> Self {
        Self { value: ExteriorVec::zero(2 * n), grad: vec![ExteriorVec::zero(2 * n); n] }
    }

    pub fn constant(n: usize, value: ExteriorVec<T>) -> Self {
        Self { value, grad: vec![ExteriorVec::zero(2 * n); n] }
    }

    pub fn has_derivatives(&self) -> bool {
        !self.grad.is_empty()
    }

    pub fn add(&self, o: &Self) -> Self {
        let grad = if self.has_derivatives() && o.has_derivatives() {
            self.grad.iter().zip(&o.grad).map(|(a, b)| a.add(b)).collect()
        } else {
            Vec::new()
        };
        Self { value: self.value.add(&o.value), grad }
    }

    pub fn scale(&self, s: Complex<T>) -> Self {
        Self { value: self.value.scale(s), grad: self.grad.iter().map(|g| g.scale(s)).collect() }
    }

    /// Wedge product with the Leibniz rule on derivatives.
    pub fn wedge(&self, o: &Self) -> Self {
        let value = self.value.wedge(&o.value);
        let grad = if self.has_derivatives() && o.has_derivatives() {
            self.grad
                .iter()
                .zip(&o.grad)
                .map(|(ga, gb)| ga.wedge(&o.value).add(&self.value.wedge(gb)))
                .collect()
        } else {
            Vec::new()
        };
        Self { value, grad }
    }
}

/// Operators of the two `sl(2)` triples.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum OperatorTag {
    LA,
    LambdaA,
    HA,
    LB,
    LambdaB,
    HB,
}

impl OperatorTag {
    pub const ALL: [OperatorTag; 6] =
        [OperatorTag::LA, OperatorTag::LambdaA, OperatorTag::HA, OperatorTag::LB, OperatorTag::LambdaB, OperatorTag::HB];

    /// Change of bidegree `(Δp, Δq)`.
    pub fn shift(self) -> (i32, i32) {
        match self {
            OperatorTag::LA => (1, 1),
            OperatorTag::LambdaA => (-1, -1),
            OperatorTag::LB => (-1, 1),
            OperatorTag::LambdaB => (1, -1),
            OperatorTag::HA | OperatorTag::HB => (0, 0),
        }
    }
}

/// Metric matrix raising form indices on the given side: `φ^{jk}` on `M`, `φ_jk` on `W`.
pub fn cometric<T: Real>(jet: &JetFrame<T>, side: Side) -> &Mat<T> {
    match side {
        Side::M => &jet.inverse_hessian,
        Side::W => &jet.hessian,
    }
}

/// Kähler-form coefficient matrix: `φ_jk` on `M`, `φ^{jk}` on `W`.
pub fn kahler_coefficients<T: Real>(jet: &JetFrame<T>, side: Side) -> &Mat<T> {
    match side {
        Side::M => &jet.hessian,
        Side::W => &jet.inverse_hessian,
    }
}

/// Applies one operator pointwise.
///
/// `L_A = Σ a_jk dz^j ∧ dz̄^k ∧ ·` with `a` the Kähler coefficients of the side,
/// `Λ_A = −Σ a^{jk} ι(dz̄^k) ι(dz^j)` with `a^{jk}` the inverse, so that
/// `[L_A, Λ_A] = n − (p + q)`. `L_B = Σ dz̄^j ∧ ι(dz^j)`, `Λ_B = −Σ dz^j ∧ ι(dz̄^j)`,
/// `[L_B, Λ_B] = p − q`.
pub fn apply_vec<T: Real>(op: OperatorTag, v: &ExteriorVec<T>, jet: &JetFrame<T>, side: Side) -> ExteriorVec<T> {
    let n = jet.dim();
    let mut out = ExteriorVec::zero(2 * n);
    match op {
        OperatorTag::LA => {
            let a = kahler_coefficients(jet, side);
            for j in 0..n {
                let wj = v.wedge_gen(dzbar(n, j));
                for k in 0..n {
                    let s = a[(k, j)];
                    if s != T::zero() {
                        out.add_scaled(c(s), &wj.wedge_gen(dz(k)));
                    }
                }
            }
        }
        OperatorTag::LambdaA => {
            let a = cometric(jet, side);
            for j in 0..n {
                let cj = v.contract_gen(dz(j));
                for k in 0..n {
                    let s = a[(j, k)];
                    if s != T::zero() {
                        out.add_scaled(c(-s), &cj.contract_gen(dzbar(n, k)));
                    }
                }
            }
        }
        OperatorTag::HA => {
            for (mask, x) in v.coeffs().iter().enumerate() {
                let d = (mask as u32).count_ones() as f64;
                *out.coeff_mut(mask as u32) = *x * T::lit(n as f64 - d);
            }
        }
        OperatorTag::LB => {
            for j in 0..n {
                out.add_assign(&v.contract_gen(dz(j)).wedge_gen(dzbar(n, j)));
            }
        }
        OperatorTag::LambdaB => {
            for j in 0..n {
                out.add_scaled(c(-T::one()), &v.contract_gen(dzbar(n, j)).wedge_gen(dz(j)));
            }
        }
        OperatorTag::HB => {
            let low = (1u32 << n) - 1;
            for (mask, x) in v.coeffs().iter().enumerate() {
                let m = mask as u32;
                let d = (m & low).count_ones() as f64 - (m >> n).count_ones() as f64;
                *out.coeff_mut(m) = *x * T::lit(d);
            }
        }
    }
    out
}

/// Matrix of an operator on the full `4ⁿ`-dimensional algebra (columns are images of basis monomials).
pub fn operator_matrix<T: Real>(op: OperatorTag, jet: &JetFrame<T>, side: Side) -> Mat<Complex<T>> {
    let dim = 1usize << (2 * jet.dim());
    let mut m = Mat::zeros(dim, dim);
    for col in 0..dim {
        let img = apply_vec(op, &ExteriorVec::basis(2 * jet.dim(), col as u32), jet, side);
        for (row, v) in img.coeffs().iter().enumerate() {
            m[(row, col)] = *v;
        }
    }
    m
}

/// Determinant of the submatrix of `2G` on rows `a` and columns `b` (0-based masks).
fn block_pairing<T: Real>(g: &Mat<T>, a: u32, b: u32) -> T {
    let ra: Vec<usize> = (0..32).filter(|i| a & (1 << i) != 0).collect();
    let rb: Vec<usize> = (0..32).filter(|i| b & (1 << i) != 0).collect();
    if ra.len() != rb.len() {
        return T::zero();
    }
    if ra.is_empty() {
        return T::one();
    }
    let k = ra.len();
    Mat::from_fn(k, k, |i, j| g[(ra[i], rb[j])] * T::lit(2.0)).det()
}

/// Pointwise Hermitian pairing `⟨a, b⟩`, conjugate-linear in `b`: every `dz` and
/// `dz̄` index is raised with twice the side's cometric.
pub fn pointwise_pairing<T: Real>(a: &ExteriorVec<T>, b: &ExteriorVec<T>, jet: &JetFrame<T>, side: Side) -> Complex<T> {
    let n = jet.dim();
    let g = cometric(jet, side);
    let mut s = Complex::new(T::zero(), T::zero());
    let zero = Complex::new(T::zero(), T::zero());
    for (ma, &ca) in a.coeffs().iter().enumerate() {
        if ca == zero {
            continue;
        }
        let (ia, ja) = split_mask(n, ma as u32);
        for (mb, &cb) in b.coeffs().iter().enumerate() {
            if cb == zero {
                continue;
            }
            let (ib, jb) = split_mask(n, mb as u32);
            if ia.len() != ib.len() || ja.len() != jb.len() {
                continue;
            }
            let w = block_pairing(g, ia.0, ib.0) * block_pairing(g, ja.0, jb.0);
            s += ca * cb.conj() * w;
        }
    }
    s
}

/// Base-coordinate derivative `D_p` on the side: `∂/∂x^p` on `M`, `∂/∂x_p = Σ φ^{qp} ∂/∂x^q` on `W`.
fn side_derivatives<T: Real>(fj: &FormJet<T>, jet: &JetFrame<T>, side: Side) -> Result<Vec<ExteriorVec<T>>, FormError> {
    if !fj.has_derivatives() {
        return Err(FormError::NoDerivatives);
    }
    let n = jet.dim();
    Ok(match side {
        Side::M => fj.grad.clone(),
        Side::W => (0..n)
            .map(|p| {
                let mut d = ExteriorVec::zero(2 * n);
                for q in 0..n {
                    d.add_scaled(c(jet.inverse_hessian[(q, p)]), &fj.grad[q]);
                }
                d
            })
            .collect(),
    })
}

/// `∂̄α = ½ Σ_p dz̄^p ∧ D_p α` at a point.
pub fn dbar_vec<T: Real>(fj: &FormJet<T>, jet: &JetFrame<T>, side: Side) -> Result<ExteriorVec<T>, FormError> {
    let n = jet.dim();
    let d = side_derivatives(fj, jet, side)?;
    let mut out = ExteriorVec::zero(2 * n);
    for (p, dp) in d.iter().enumerate() {
        out.add_scaled(c(T::lit(0.5)), &dp.wedge_gen(dzbar(n, p)));
    }
    Ok(out)
}

/// `∂α = ½ Σ_p dz^p ∧ D_p α` at a point.
pub fn del_vec<T: Real>(fj: &FormJet<T>, jet: &JetFrame<T>, side: Side) -> Result<ExteriorVec<T>, FormError> {
    let n = jet.dim();
    let d = side_derivatives(fj, jet, side)?;
    let mut out = ExteriorVec::zero(2 * n);
    for (p, dp) in d.iter().enumerate() {
        out.add_scaled(c(T::lit(0.5)), &dp.wedge_gen(dz(p)));
    }
    Ok(out)
}

/// Pointwise evaluator of a form given by a formula rather than polynomial coefficients.
pub type FormFn<T> = Arc<dyn Fn(&[T]) -> Result<FormJet<T>, FormError> + Send + Sync>;

#[derive(Clone)]
enum Repr<T: Real> {
    Explicit(BTreeMap<(MultiIndex, MultiIndex), Poly<T>>),
    Lazy(FormFn<T>),
}

/// A T^n-invariant `(p, q)`-form with coefficients depending on the base point.
#[derive(Clone)]
pub struct TnForm<T: Real> {
    pub n: usize,
    pub side: Side,
    pub p: usize,
    pub q: usize,
    repr: Repr<T>,
}

impl<T: Real> fmt::Debug for TnForm<T> {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let mut d = f.debug_struct("TnForm");
        d.field("n", &self.n).field("side", &self.side).field("p", &self.p).field("q", &self.q);
        match &self.repr {
            Repr::Explicit(m) => d.field("entries", m),
            Repr::Lazy(_) => d.field("entries", &"<formula>"),
        };
        d.finish()
    }
}

fn check_degree(n: usize, p: usize, q: usize) -> Result<(), FormError> {
    if p > n || q > n {
        Err(FormError::DegreeOverflow { p, q, n })
    } else {
        Ok(())
    }
}

impl<T: Real> TnForm<T> {
    pub fn zero(n: usize, side: Side, p: usize, q: usize) -> Result<Self, FormError> {
        check_degree(n, p, q)?;
        Ok(Self { n, side, p, q, repr: Repr::Explicit(BTreeMap::new()) })
    }

    /// `coeff · dz^I ∧ dz̄^J`.
    pub fn monomial(n: usize, side: Side, i: MultiIndex, j: MultiIndex, coeff: Poly<T>) -> Result<Self, FormError> {
        let mut f = Self::zero(n, side, i.len(), j.len())?;
        f.set(i, j, coeff)?;
        Ok(f)
    }

    /// Constant basis form `dz^I ∧ dz̄^J`.
    pub fn basis(n: usize, side: Side, i: MultiIndex, j: MultiIndex) -> Result<Self, FormError> {
        Self::monomial(n, side, i, j, Poly::constant(c(T::one())))
    }

    /// A form given pointwise by a closure.
    pub fn from_fn(
        n: usize,
        side: Side,
        p: usize,
        q: usize,
        f: impl Fn(&[T]) -> Result<FormJet<T>, FormError> + Send + Sync + 'static,
    ) -> Result<Self, FormError> {
        check_degree(n, p, q)?;
        Ok(Self { n, side, p, q, repr: Repr::Lazy(Arc::new(f)) })
    }

    pub fn is_explicit(&self) -> bool {
        matches!(self.repr, Repr::Explicit(_))
    }

    pub fn entries(&self) -> Result<&BTreeMap<(MultiIndex, MultiIndex), Poly<T>>, FormError> {
        match &self.repr {
            Repr::Explicit(m) => Ok(m),
            Repr::Lazy(_) => Err(FormError::NotExplicit),
        }
    }

    pub fn set(&mut self, i: MultiIndex, j: MultiIndex, coeff: Poly<T>) -> Result<(), FormError> {
        if i.len() != self.p || j.len() != self.q || i.0 >> self.n != 0 || j.0 >> self.n != 0 {
            return Err(FormError::BidegreeMismatch);
        }
        match &mut self.repr {
            Repr::Explicit(m) => {
                if coeff.is_zero() {
                    m.remove(&(i, j));
                } else {
                    m.insert((i, j), coeff);
                }
                Ok(())
            }
            Repr::Lazy(_) => Err(FormError::NotExplicit),
        }
    }

    /// Value and base derivatives at `x`.
    pub fn eval(&self, x: &[T]) -> Result<FormJet<T>, FormError> {
        match &self.repr {
            Repr::Explicit(m) => {
                let n = self.n;
                let mut fj = FormJet::zero(n);
                for ((i, j), poly) in m {
                    let mask = form_mask(n, *i, *j);
                    let (v, g) = poly.eval_grad(x);
                    *fj.value.coeff_mut(mask) += v;
                    for (p, gp) in g.into_iter().enumerate() {
                        *fj.grad[p].coeff_mut(mask) += gp;
                    }
                }
                Ok(fj)
            }
            Repr::Lazy(f) => f(x),
        }
    }

    pub fn add(&self, o: &Self) -> Result<Self, FormError> {
        if self.side != o.side {
            return Err(FormError::SideMismatch);
        }
        if (self.n, self.p, self.q) != (o.n, o.p, o.q) {
            return Err(FormError::BidegreeMismatch);
        }
        match (&self.repr, &o.repr) {
            (Repr::Explicit(a), Repr::Explicit(b)) => {
                let mut r = self.clone();
                for (k, v) in b {
                    let sum = a.get(k).map(|x| x.add(v)).unwrap_or_else(|| v.clone());
                    r.set(k.0, k.1, sum)?;
                }
                Ok(r)
            }
            _ => {
                let (a, b) = (self.clone(), o.clone());
                Self::from_fn(self.n, self.side, self.p, self.q, move |x| Ok(a.eval(x)?.add(&b.eval(x)?)))
            }
        }
    }

    pub fn scale(&self, s: Complex<T>) -> Self {
        match &self.repr {
            Repr::Explicit(m) => {
                let mut r = self.clone();
                r.repr = Repr::Explicit(m.iter().map(|(k, v)| (*k, v.scale(s))).collect());
                r
            }
            Repr::Lazy(_) => {
                let a = self.clone();
                Self::from_fn(self.n, self.side, self.p, self.q, move |x| Ok(a.eval(x)?.scale(s)))
                    .expect("degree already checked")
            }
        }
    }

    /// Wedge product; signs come from merging into the canonical order.
    pub fn wedge(&self, o: &Self) -> Result<Self, FormError> {
        if self.side != o.side {
            return Err(FormError::SideMismatch);
        }
        if self.n != o.n {
            return Err(FormError::BidegreeMismatch);
        }
        let (n, p, q) = (self.n, self.p + o.p, self.q + o.q);
        check_degree(n, p, q)?;
        match (&self.repr, &o.repr) {
            (Repr::Explicit(a), Repr::Explicit(b)) => {
                let mut r = Self::zero(n, self.side, p, q)?;
                let mut acc: BTreeMap<(MultiIndex, MultiIndex), Poly<T>> = BTreeMap::new();
                for ((ia, ja), ca) in a {
                    for ((ib, jb), cb) in b {
                        let s = crate::exterior::wedge_sign(form_mask(n, *ia, *ja), form_mask(n, *ib, *jb));
                        if s == 0 {
                            continue;
                        }
                        let key = (MultiIndex(ia.0 | ib.0), MultiIndex(ja.0 | jb.0));
                        let term = ca.mul(cb).scale(c(T::lit(s as f64)));
                        let e = acc.entry(key).or_insert_with(Poly::zero);
                        *e = e.add(&term);
                    }
                }
                for (k, v) in acc {
                    r.set(k.0, k.1, v)?;
                }
                Ok(r)
            }
            _ => {
                let (a, b) = (self.clone(), o.clone());
                Self::from_fn(n, self.side, p, q, move |x| Ok(a.eval(x)?.wedge(&b.eval(x)?)))
            }
        }
    }

    fn differential(&self, potential: Option<&Potential<T>>, holomorphic: bool) -> Result<Self, FormError> {
        let n = self.n;
        let (p, q) = if holomorphic { (self.p + 1, self.q) } else { (self.p, self.q + 1) };
        if p > n || q > n {
            return Self::zero(n, self.side, p.min(n), q.min(n));
        }
        if let (Side::M, Repr::Explicit(m)) = (self.side, &self.repr) {
            let mut acc: BTreeMap<(MultiIndex, MultiIndex), Poly<T>> = BTreeMap::new();
            for ((i, j), coeff) in m {
                for r in 0..n {
                    let gen = if holomorphic { dz(r) } else { dzbar(n, r) };
                    let mask = form_mask(n, *i, *j);
                    let s = crate::exterior::wedge_sign(1 << gen, mask);
                    if s == 0 {
                        continue;
                    }
                    let d = coeff.partial(r).scale(c(T::lit(0.5 * s as f64)));
                    let (ni, nj) = split_mask(n, mask | (1 << gen));
                    let e = acc.entry((ni, nj)).or_insert_with(Poly::zero);
                    *e = e.add(&d);
                }
            }
            let mut out = Self::zero(n, self.side, p, q)?;
            for (k, v) in acc {
                out.set(k.0, k.1, v)?;
            }
            return Ok(out);
        }
        let src = self.clone();
        let side = self.side;
        let pot = potential.cloned();
        if side == Side::W && pot.is_none() {
            return Err(FormError::Geometry(GeometryError::InvalidDomain(
                "a potential is required to differentiate forms on W".into(),
            )));
        }
        Self::from_fn(n, side, p, q, move |x| {
            let fj = src.eval(x)?;
            let jet = match &pot {
                Some(pt) => pt.jet_at(x)?,
                None => flat_jet(x),
            };
            let v = if holomorphic { del_vec(&fj, &jet, side)? } else { dbar_vec(&fj, &jet, side)? };
            Ok(FormJet { value: v, grad: Vec::new() })
        })
    }

    /// `∂̄` of the form. Exact on explicit `M`-side forms; otherwise pointwise,
    /// using `potential` for the dual-coordinate derivatives on `W`.
    pub fn dbar(&self, potential: Option<&Potential<T>>) -> Result<Self, FormError> {
        self.differential(potential, false)
    }

    /// `∂` of the form, as for [`TnForm::dbar`].
    pub fn del(&self, potential: Option<&Potential<T>>) -> Result<Self, FormError> {
        self.differential(potential, true)
    }

    /// Largest coefficient modulus at `x`.
    pub fn max_abs_at(&self, x: &[T]) -> Result<T, FormError> {
        Ok(self.eval(x)?.value.max_abs())
    }

    /// Largest polynomial coefficient over all entries of an explicit form.
    pub fn max_coefficient(&self) -> Result<T, FormError> {
        Ok(self.entries()?.values().fold(T::zero(), |m, p| m.max(p.max_coeff())))
    }
}

fn flat_jet<T: Real>(x: &[T]) -> JetFrame<T> {
    let n = x.len();
    JetFrame::from_parts(x.to_vec(), T::zero(), vec![T::zero(); n], Mat::identity(n), vec![T::zero(); n * n * n])
        .expect("identity is positive definite")
}

/// Applies an operator with the metric frozen at `jet`. Degree overflow annihilates.
pub fn apply<T: Real>(op: OperatorTag, a: &TnForm<T>, jet: &JetFrame<T>) -> Result<TnForm<T>, FormError> {
    let n = a.n;
    let (dp, dq) = op.shift();
    let p = a.p as i32 + dp;
    let q = a.q as i32 + dq;
    if p < 0 || q < 0 || p as usize > n || q as usize > n {
        return TnForm::zero(n, a.side, a.p, a.q);
    }
    let (p, q) = (p as usize, q as usize);
    match &a.repr {
        Repr::Explicit(m) => {
            let mut acc: BTreeMap<(MultiIndex, MultiIndex), Poly<T>> = BTreeMap::new();
            for ((i, j), coeff) in m {
                let img = apply_vec(op, &ExteriorVec::basis(2 * n, form_mask(n, *i, *j)), jet, a.side);
                for (mask, s) in img.coeffs().iter().enumerate() {
                    if s.re == T::zero() && s.im == T::zero() {
                        continue;
                    }
                    let key = split_mask(n, mask as u32);
                    let e = acc.entry(key).or_insert_with(Poly::zero);
                    *e = e.add(&coeff.scale(*s));
                }
            }
            let mut out = TnForm::zero(n, a.side, p, q)?;
            for (k, v) in acc {
                out.set(k.0, k.1, v)?;
            }
            Ok(out)
        }
        Repr::Lazy(_) => {
            let src = a.clone();
            let jet = jet.clone();
            let side = a.side;
            TnForm::from_fn(n, side, p, q, move |x| {
                let fj = src.eval(x)?;
                let value = apply_vec(op, &fj.value, &jet, side);
                let grad = fj.grad.iter().map(|g| apply_vec(op, g, &jet, side)).collect();
                Ok(FormJet { value, grad })
            })
        }
    }
}

/// `V · ∫_D ⟨a, b⟩ dx` with the fiber volume of the side at each point, by the
/// tensor trapezoid rule on `domain.grid_resolution` nodes per axis.
pub fn inner_product<T: Real>(
    a: &TnForm<T>,
    b: &TnForm<T>,
    potential: &Potential<T>,
    domain: &Domain<T>,
) -> Result<Complex<T>, FormError> {
    let rule = TensorRule::trapezoid_box(&domain.bounds, domain.grid_resolution);
    inner_product_with(a, b, potential, domain.lattice_covolume, &rule)
}

/// As [`inner_product`] with an explicit quadrature rule.
pub fn inner_product_with<T: Real>(
    a: &TnForm<T>,
    b: &TnForm<T>,
    potential: &Potential<T>,
    covolume: T,
    rule: &TensorRule<T>,
) -> Result<Complex<T>, FormError> {
    if a.side != b.side {
        return Err(FormError::SideMismatch);
    }
    if (a.n, a.p, a.q) != (b.n, b.p, b.q) {
        return Err(FormError::BidegreeMismatch);
    }
    let mut s = Complex::new(T::zero(), T::zero());
    for (x, w) in rule.points() {
        let jet = potential.jet_at(&x)?;
        let v = fiber_volume(&jet, a.side, covolume);
        let pa = a.eval(&x)?.value;
        let pb = b.eval(&x)?.value;
        s += pointwise_pairing(&pa, &pb, &jet, a.side) * (v * w);
    }
    Ok(s)
}

/// `sqrt(det φ)·covolume` on `M`, `covolume / sqrt(det φ)` on `W`.
pub fn fiber_volume<T: Real>(jet: &JetFrame<T>, side: Side, covolume: T) -> T {
    match side {
        Side::M => jet.det_hessian.sqrt() * covolume,
        Side::W => covolume / jet.det_hessian.sqrt(),
    }
}

/// Tangent vector to the moduli of complex structures induced by a potential `ξ`.
#[derive(Clone, Debug)]
pub struct ModuliVector<T: Real> {
    pub xi: ScalarField<T>,
}

impl<T: Real> ModuliVector<T> {
    pub fn new(xi: ScalarField<T>) -> Self {
        Self { xi }
    }

    pub fn dim(&self) -> usize {
        self.xi.dim()
    }

    /// `i Σ ξ_jk dz^j ∧ dz̄^k` on `M`.
    pub fn form(&self) -> TnForm<T> {
        let n = self.dim();
        let xi = self.xi.clone();
        TnForm::from_fn(n, Side::M, 1, 1, move |x| {
            let j = xi.jet3(x)?;
            let mut fj = FormJet::zero(n);
            for a in 0..n {
                for b in 0..n {
                    let mask = (1u32 << dz(a)) | (1u32 << dzbar(n, b));
                    *fj.value.coeff_mut(mask) = i_unit::<T>() * j.h[a][b];
                    for l in 0..n {
                        *fj.grad[l].coeff_mut(mask) = i_unit::<T>() * j.t[a][b][l];
                    }
                }
            }
            Ok(fj)
        })
        .expect("(1,1) fits every n ≥ 1")
    }
}

/// Harmonicity defect of a moduli vector at the sample points: per index,
/// `sup |Σ_k ξ_jkk|` (side `M`) or `sup |Σ_j ξ_jjk|` (side `W`).
pub fn vhs_harmonic_residual<T: Real>(xi: &ModuliVector<T>, side: Side, samples: &[Vec<T>]) -> Result<Vec<T>, FormError> {
    let n = xi.dim();
    let mut out = vec![T::zero(); n];
    for x in samples {
        let j = xi.xi.jet3(x)?;
        for (a, o) in out.iter_mut().enumerate() {
            let mut s = T::zero();
            for k in 0..n {
                s += match side {
                    Side::M => j.t[a][k][k],
                    Side::W => j.t[k][k][a],
                };
            }
            *o = o.max(s.abs());
        }
    }
    Ok(out)
}

/// One polynomial term in the serialised form format.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TermDto {
    pub exponents: Vec<u8>,
    pub re: f64,
    pub im: f64,
}

/// One entry `(I, J) → coefficient` in the serialised form format (1-based indices).
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EntryDto {
    #[serde(rename = "I")]
    pub i: Vec<usize>,
    #[serde(rename = "J")]
    pub j: Vec<usize>,
    pub coeff_spec: Vec<TermDto>,
}

/// Serialised explicit form: `{p, q, side, entries: [{I, J, coeff_spec}]}`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct FormDto {
    pub n: usize,
    pub p: usize,
    pub q: usize,
    pub side: Side,
    pub entries: Vec<EntryDto>,
}

impl<T: Real> TnForm<T> {
    pub fn to_dto(&self) -> Result<FormDto, FormError> {
        let entries = self
            .entries()?
            .iter()
            .map(|((i, j), poly)| EntryDto {
                i: i.indices(),
                j: j.indices(),
                coeff_spec: poly
                    .terms()
                    .map(|(e, c)| TermDto {
                        exponents: e[..self.n].to_vec(),
                        re: c.re.as_f64(),
                        im: c.im.as_f64(),
                    })
                    .collect(),
            })
            .collect();
        Ok(FormDto { n: self.n, p: self.p, q: self.q, side: self.side, entries })
    }

    pub fn from_dto(dto: &FormDto) -> Result<Self, FormError> {
        let mut f = Self::zero(dto.n, dto.side, dto.p, dto.q)?;
        for e in &dto.entries {
            let i = MultiIndex::new(dto.n, &e.i)?;
            let j = MultiIndex::new(dto.n, &e.j)?;
            let mut poly = Poly::zero();
            for t in &e.coeff_spec {
                if t.exponents.len() != dto.n {
                    return Err(FormError::Serde(format!("exponent vector of length {}", t.exponents.len())));
                }
                let mut ex: Exponent = [0; crate::jet::MAX_VARS];
                ex[..dto.n].copy_from_slice(&t.exponents);
                poly.add_term(ex, Complex::new(T::lit(t.re), T::lit(t.im)));
            }
            f.set(i, j, poly)?;
        }
        Ok(f)
    }
}
