//! Damped Newton solvers for the Dirichlet problem `det D²u = C` on a box grid,
//! for real `C` and for the complexified equation `det(φ_jk + iη_jk) = C`.

use crate::geometry::{ComplexifiedPotential, Domain, GeometryError, Potential, ScalarField};
use crate::grid::GridFunction;
use crate::linalg::Mat;
use crate::scalar::{Field, Real};
use num_complex::Complex;
use num_traits::Float;
use std::sync::Arc;
use thiserror::Error;

#[derive(Debug, Error)]
pub enum SolverError {
    #[error("no damped step kept the discrete Hessian positive definite (iteration {iteration})")]
    LostConvexity { iteration: usize },
    #[error("Newton stopped after {iterations} iterations with residual {residual:e}")]
    MaxIterations { iterations: usize, residual: f64 },
    #[error("homotopy step {step} of {steps} did not converge: {source}")]
    HomotopyStall {
        step: usize,
        steps: usize,
        #[source]
        source: Box<SolverError>,
    },
    #[error("invalid solver input: {0}")]
    InvalidInput(String),
    #[error(transparent)]
    Geometry(#[from] GeometryError),
}

/// Starting iterate for Newton.
#[derive(Clone, Debug, PartialEq)]
pub enum InitialGuess<T> {
    /// `½ C^{1/n} |x − x₀|²` shifted to match the mean of the boundary data.
    Quadratic,
    /// A Poisson solve followed (for `n = 2`) by fixed-point sweeps of
    /// `Δu = sqrt((u₁₁ − u₂₂)² + 4u₁₂² + 4C)`, which land in the convex cone.
    WarmStart,
    /// Explicit nodal values, row-major with the last axis fastest.
    Given(Vec<T>),
}

#[derive(Clone, Debug, PartialEq)]
pub struct SolverOptions<T> {
    pub max_iterations: usize,
    pub tolerance: T,
    pub backtrack: T,
    pub armijo: T,
    pub max_backtracks: usize,
    pub initial_guess: InitialGuess<T>,
    pub linear_tolerance: T,
    pub max_linear_iterations: usize,
    pub warm_start_sweeps: usize,
    pub warm_start_tolerance: T,
    pub homotopy_steps: usize,
}

impl<T: Real> Default for SolverOptions<T> {
    fn default() -> Self {
        Self {
            max_iterations: 60,
            tolerance: T::lit(1e-9),
            backtrack: T::lit(0.5),
            armijo: T::lit(1e-4),
            max_backtracks: 40,
            initial_guess: InitialGuess::WarmStart,
            linear_tolerance: T::lit(1e-12),
            max_linear_iterations: 20_000,
            warm_start_sweeps: 200,
            warm_start_tolerance: T::lit(1e-4),
            homotopy_steps: 5,
        }
    }
}

impl<T: Real> SolverOptions<T> {
    pub fn validate(&self) -> Result<(), SolverError> {
        if !(self.tolerance > T::zero()) {
            return Err(SolverError::InvalidInput("tolerance must be positive".into()));
        }
        if !(self.backtrack > T::zero() && self.backtrack < T::one()) {
            return Err(SolverError::InvalidInput("damping factor must lie in (0, 1)".into()));
        }
        Ok(())
    }
}

/// Output of a real solve.
#[derive(Clone, Debug)]
pub struct SolveResult<T> {
    pub grid: GridFunction<T>,
    /// Sup-norm of `det D²_h u − C` over interior nodes, one entry per Newton iterate.
    pub residual_history: Vec<T>,
    /// Smallest eigenvalue of the discrete Hessian per node; `NaN` on the boundary.
    pub min_eigenvalue: GridFunction<T>,
    pub converged: bool,
    pub iterations: usize,
    /// Newton steps that were accepted with a step length below one.
    pub damped_steps: usize,
}

impl<T: Real> SolveResult<T> {
    pub fn potential(&self, c: T) -> Potential<T> {
        Potential::grid(self.grid.clone(), c)
    }

    pub fn final_residual(&self) -> T {
        *self.residual_history.last().unwrap_or(&T::infinity())
    }

    /// Minimum of the eigenvalue field over interior nodes.
    pub fn min_interior_eigenvalue(&self) -> T {
        self.min_eigenvalue.values().iter().filter(|v| !v.is_nan()).fold(T::infinity(), |m, v| m.min(*v))
    }
}

/// Output of a complexified solve.
#[derive(Clone, Debug)]
pub struct ComplexSolveResult<T: Real> {
    pub phi: GridFunction<T>,
    pub eta: GridFunction<T>,
    pub target: Complex<T>,
    /// Residual history of each homotopy stage; stage 0 is the real start.
    pub stage_histories: Vec<Vec<T>>,
    pub converged: bool,
}

impl<T: Real> ComplexSolveResult<T> {
    pub fn complexified(&self) -> ComplexifiedPotential<T> {
        ComplexifiedPotential::new(
            Potential::grid(self.phi.clone(), self.target.norm()),
            ScalarField::Grid(Arc::new(self.eta.clone())),
            self.target,
        )
    }

    pub fn final_residual(&self) -> T {
        self.stage_histories.last().and_then(|h| h.last()).copied().unwrap_or(T::infinity())
    }
}

/// Index bookkeeping shared by all solver passes.
struct Stencil<T> {
    shape: GridFunction<T>,
    interior: Vec<usize>,
    strides: Vec<usize>,
    h: Vec<T>,
}

impl<T: Real> Stencil<T> {
    fn new(domain: &Domain<T>) -> Result<Self, SolverError> {
        let n = domain.n;
        let res = domain.grid_resolution;
        let shape = GridFunction::new(domain.bounds.clone(), res, vec![T::zero(); res.pow(n as u32)])?;
        let interior = (0..shape.len()).filter(|&k| !shape.is_boundary(&shape.unflatten(k))).collect();
        let strides = (0..n).map(|a| res.pow((n - 1 - a) as u32)).collect();
        let h = (0..n).map(|a| shape.spacing(a)).collect();
        Ok(Self { shape, interior, strides, h })
    }

    fn n(&self) -> usize {
        self.h.len()
    }

    fn hessian<E: Field<R = T>>(&self, u: &[E], k: usize) -> Mat<E> {
        let n = self.n();
        let mut m = Mat::zeros(n, n);
        let two = E::from_real(T::lit(2.0));
        for a in 0..n {
            let sa = self.strides[a];
            let ha = self.h[a];
            m[(a, a)] = (u[k + sa] - two * u[k] + u[k - sa]).scale(T::one() / (ha * ha));
            for b in 0..a {
                let sb = self.strides[b];
                let hb = self.h[b];
                let v = (u[k + sa + sb] - u[k + sa - sb] - u[k - sa + sb] + u[k - sa - sb])
                    .scale(T::one() / (T::lit(4.0) * ha * hb));
                m[(a, b)] = v;
                m[(b, a)] = v;
            }
        }
        m
    }

    /// `Σ A_ab D_ab δ` at node `k`.
    fn apply_trace<E: Field<R = T>>(&self, a: &Mat<E>, d: &[E], k: usize) -> E {
        let n = self.n();
        let mut s = E::zero();
        let two = E::from_real(T::lit(2.0));
        for p in 0..n {
            let sp = self.strides[p];
            let hp = self.h[p];
            s += a[(p, p)] * (d[k + sp] - two * d[k] + d[k - sp]).scale(T::one() / (hp * hp));
            for q in 0..p {
                let sq = self.strides[q];
                let hq = self.h[q];
                let mixed = (d[k + sp + sq] - d[k + sp - sq] - d[k - sp + sq] + d[k - sp - sq])
                    .scale(T::one() / (T::lit(4.0) * hp * hq));
                s += (a[(p, q)] + a[(q, p)]) * mixed;
            }
        }
        s
    }

    fn diag<E: Field<R = T>>(&self, a: &Mat<E>) -> E {
        let mut s = E::zero();
        for p in 0..self.n() {
            s += a[(p, p)].scale(T::lit(-2.0) / (self.h[p] * self.h[p]));
        }
        s
    }
}

fn min_real_eigenvalue<E: Field>(h: &Mat<E>) -> E::R {
    let n = h.rows();
    Mat::from_fn(n, n, |i, j| h[(i, j)].re()).min_eigenvalue()
}

fn norm_sqr<E: Field>(x: E) -> E::R {
    x.re() * x.re() + x.im() * x.im()
}

fn dot<E: Field>(a: &[E], b: &[E]) -> E {
    let mut s = E::zero();
    for (x, y) in a.iter().zip(b) {
        s += x.conj() * *y;
    }
    s
}

fn norm<E: Field>(a: &[E]) -> E::R {
    let mut s = <E::R as num_traits::Zero>::zero();
    for x in a {
        s += norm_sqr(*x);
    }
    s.sqrt()
}

/// Right-preconditioned BiCGStab with a diagonal preconditioner.
fn bicgstab<E: Field>(
    apply: &dyn Fn(&[E], &mut [E]),
    diag: &[E],
    b: &[E],
    tol: E::R,
    max_iter: usize,
) -> (Vec<E>, bool) {
    let m = b.len();
    let mut x = vec![E::zero(); m];
    let bnorm = norm(b);
    if bnorm == <E::R as num_traits::Zero>::zero() {
        return (x, true);
    }
    let mut r = b.to_vec();
    let rhat = r.clone();
    let (mut rho, mut alpha, mut omega) = (E::one(), E::one(), E::one());
    let mut v = vec![E::zero(); m];
    let mut p = vec![E::zero(); m];
    let mut y = vec![E::zero(); m];
    let mut z = vec![E::zero(); m];
    let mut s = vec![E::zero(); m];
    let mut t = vec![E::zero(); m];
    for _ in 0..max_iter {
        let rho_new = dot(&rhat, &r);
        if rho_new == E::zero() {
            break;
        }
        let beta = rho_new.fdiv(rho) * alpha.fdiv(omega);
        for i in 0..m {
            p[i] = r[i] + beta * (p[i] - omega * v[i]);
            y[i] = p[i].fdiv(diag[i]);
        }
        apply(&y, &mut v);
        alpha = rho_new.fdiv(dot(&rhat, &v));
        for i in 0..m {
            s[i] = r[i] - alpha * v[i];
        }
        if norm(&s) <= tol * bnorm {
            for i in 0..m {
                x[i] += alpha * y[i];
            }
            return (x, true);
        }
        for i in 0..m {
            z[i] = s[i].fdiv(diag[i]);
        }
        apply(&z, &mut t);
        omega = dot(&t, &s).fdiv(dot(&t, &t));
        for i in 0..m {
            x[i] += alpha * y[i] + omega * z[i];
            r[i] = s[i] - omega * t[i];
        }
        if norm(&r) <= tol * bnorm {
            return (x, true);
        }
        if omega == E::zero() {
            break;
        }
        rho = rho_new;
    }
    (x, false)
}

/// Per-iteration state of the nonlinear residual.
struct Eval<E: Field> {
    hess_inv: Vec<Mat<E>>,
    f: Vec<E>,
    sup_residual: E::R,
}

fn evaluate<E: Field>(st: &Stencil<E::R>, u: &[E], c: E, logc: E) -> Option<Eval<E>> {
    let mut hess_inv = Vec::with_capacity(st.interior.len());
    let mut f = Vec::with_capacity(st.interior.len());
    let mut sup = <E::R as num_traits::Zero>::zero();
    for &k in &st.interior {
        let h = st.hessian(u, k);
        if !(min_real_eigenvalue(&h) > <E::R as num_traits::Zero>::zero()) {
            return None;
        }
        let lu = h.lu()?;
        let det = lu.det();
        let r = (det - c).modulus();
        if r > sup || r.is_nan() {
            sup = r;
        }
        f.push(Field::ln(det) - logc);
        hess_inv.push(lu.inverse());
    }
    Some(Eval { hess_inv, f, sup_residual: sup })
}

fn merit<E: Field>(f: &[E]) -> E::R {
    let mut s = <E::R as num_traits::Zero>::zero();
    for x in f {
        s += norm_sqr(*x);
    }
    s
}

struct NewtonTrace<E: Field> {
    u: Vec<E>,
    history: Vec<E::R>,
    iterations: usize,
    damped: usize,
}

/// Damped Newton on `ln det D²_h u − ln C = 0` with Dirichlet data held in `u`.
fn newton<E: Field>(
    st: &Stencil<E::R>,
    mut u: Vec<E>,
    c: E,
    logc: E,
    opts: &SolverOptions<E::R>,
) -> Result<NewtonTrace<E>, SolverError> {
    let mut history = Vec::new();
    let mut damped = 0usize;
    let mut ev = evaluate(st, &u, c, logc).ok_or(SolverError::LostConvexity { iteration: 0 })?;
    let full = u.len();
    let m = st.interior.len();
    for iter in 0..=opts.max_iterations {
        history.push(ev.sup_residual);
        if ev.sup_residual <= opts.tolerance {
            return Ok(NewtonTrace { u, history, iterations: iter, damped });
        }
        if iter == opts.max_iterations {
            break;
        }
        let hi = &ev.hess_inv;
        let apply = |d: &[E], out: &mut [E]| {
            let mut padded = vec![E::zero(); full];
            for (i, &k) in st.interior.iter().enumerate() {
                padded[k] = d[i];
            }
            for (i, &k) in st.interior.iter().enumerate() {
                out[i] = st.apply_trace(&hi[i], &padded, k);
            }
        };
        let diag: Vec<E> = hi.iter().map(|a| st.diag(a)).collect();
        let rhs: Vec<E> = ev.f.iter().map(|x| -*x).collect();
        let (delta, _) = bicgstab(&apply, &diag, &rhs, opts.linear_tolerance, opts.max_linear_iterations);
        let m0 = merit(&ev.f);
        let mut lambda = <E::R as num_traits::One>::one();
        let mut accepted = None;
        let mut any_convex = false;
        for _ in 0..opts.max_backtracks {
            let mut trial = u.clone();
            for i in 0..m {
                trial[st.interior[i]] += delta[i].scale(lambda);
            }
            if let Some(te) = evaluate(st, &trial, c, logc) {
                any_convex = true;
                let two = <E::R as Real>::lit(2.0);
                if merit(&te.f) <= (<E::R as num_traits::One>::one() - two * opts.armijo * lambda) * m0 {
                    accepted = Some((trial, te));
                    break;
                }
            }
            lambda = lambda * opts.backtrack;
        }
        match accepted {
            Some((nu, ne)) => {
                if lambda < <E::R as num_traits::One>::one() {
                    damped += 1;
                }
                u = nu;
                ev = ne;
            }
            None if !any_convex => return Err(SolverError::LostConvexity { iteration: iter + 1 }),
            None => {
                return Err(SolverError::MaxIterations { iterations: iter + 1, residual: ev.sup_residual.as_f64() })
            }
        }
    }
    Err(SolverError::MaxIterations { iterations: opts.max_iterations, residual: ev.sup_residual.as_f64() })
}

/// Solves `Δu = rhs` (rhs per interior node) with the boundary values already in `u`.
fn poisson<T: Real>(st: &Stencil<T>, u: &mut [T], rhs: &[T], opts: &SolverOptions<T>) {
    let n = st.n();
    let id: Mat<T> = Mat::identity(n);
    let full = u.len();
    let mut base = u.to_vec();
    for &k in &st.interior {
        base[k] = T::zero();
    }
    let apply = |d: &[T], out: &mut [T]| {
        let mut padded = vec![T::zero(); full];
        for (i, &k) in st.interior.iter().enumerate() {
            padded[k] = d[i];
        }
        for (i, &k) in st.interior.iter().enumerate() {
            out[i] = st.apply_trace(&id, &padded, k);
        }
    };
    let b: Vec<T> = st
        .interior
        .iter()
        .enumerate()
        .map(|(i, &k)| rhs[i] - st.apply_trace(&id, &base, k))
        .collect();
    let diag = vec![st.diag(&id); st.interior.len()];
    let (x, _) = bicgstab(&apply, &diag, &b, opts.linear_tolerance, opts.max_linear_iterations);
    for (i, &k) in st.interior.iter().enumerate() {
        u[k] = x[i];
    }
}

fn initial_iterate<T: Real>(
    st: &Stencil<T>,
    c: T,
    boundary: &dyn Fn(&[T]) -> T,
    opts: &SolverOptions<T>,
) -> Result<Vec<T>, SolverError> {
    let g = &st.shape;
    let n = st.n();
    let total = g.len();
    let mut u = vec![T::zero(); total];
    let mut bsum = T::zero();
    let mut bcount = 0usize;
    for (k, uk) in u.iter_mut().enumerate() {
        let idx = g.unflatten(k);
        if g.is_boundary(&idx) {
            *uk = boundary(&g.node(&idx));
            bsum += *uk;
            bcount += 1;
        }
    }
    let a = c.powf(T::one() / T::lit(n as f64));
    match &opts.initial_guess {
        InitialGuess::Given(v) => {
            if v.len() != total {
                return Err(SolverError::InvalidInput(format!("initial guess has {} values, grid has {total}", v.len())));
            }
            for &k in &st.interior {
                u[k] = v[k];
            }
        }
        InitialGuess::Quadratic => {
            let center: Vec<T> = g.bounds().iter().map(|(lo, hi)| (*lo + *hi) * T::lit(0.5)).collect();
            let q = |x: &[T]| x.iter().zip(&center).fold(T::zero(), |s, (a, b)| s + (*a - *b) * (*a - *b)) * a * T::lit(0.5);
            let mut qsum = T::zero();
            for k in 0..total {
                let idx = g.unflatten(k);
                if g.is_boundary(&idx) {
                    qsum += q(&g.node(&idx));
                }
            }
            let shift = (bsum - qsum) / T::lit(bcount as f64);
            for &k in &st.interior {
                u[k] = q(&g.node(&g.unflatten(k))) + shift;
            }
        }
        InitialGuess::WarmStart => {
            let rhs = vec![a * T::lit(n as f64); st.interior.len()];
            poisson(st, &mut u, &rhs, opts);
            if n == 2 {
                for _ in 0..opts.warm_start_sweeps {
                    let rhs: Vec<T> = st
                        .interior
                        .iter()
                        .map(|&k| {
                            let h = st.hessian(&u, k);
                            let d = h[(0, 0)] - h[(1, 1)];
                            (d * d + T::lit(4.0) * h[(0, 1)] * h[(0, 1)] + T::lit(4.0) * c).sqrt()
                        })
                        .collect();
                    let prev = u.clone();
                    poisson(st, &mut u, &rhs, opts);
                    let change = u.iter().zip(&prev).fold(T::zero(), |m, (a, b)| m.max((*a - *b).abs()));
                    if change < opts.warm_start_tolerance {
                        break;
                    }
                }
            }
        }
    }
    Ok(u)
}

fn eigen_field<T: Real>(st: &Stencil<T>, u: &[T]) -> GridFunction<T> {
    let mut vals = vec![T::nan(); u.len()];
    for &k in &st.interior {
        vals[k] = st.hessian(u, k).min_eigenvalue();
    }
    GridFunction::new(st.shape.bounds().to_vec(), st.shape.resolution(), vals).expect("shape already validated")
}

/// Solves `det D²_h u = C` with `u = boundary` on `∂D`.
pub fn solve_real_ma<T: Real>(
    domain: &Domain<T>,
    c: T,
    boundary: &dyn Fn(&[T]) -> T,
    opts: &SolverOptions<T>,
) -> Result<SolveResult<T>, SolverError> {
    domain.validate()?;
    opts.validate()?;
    if !(c > T::zero()) {
        return Err(SolverError::InvalidInput("C must be positive".into()));
    }
    let st = Stencil::new(domain)?;
    let u0 = initial_iterate(&st, c, boundary, opts)?;
    let tr = newton(&st, u0, c, c.ln(), opts)?;
    let min_eigenvalue = eigen_field(&st, &tr.u);
    let grid = GridFunction::new(domain.bounds.clone(), domain.grid_resolution, tr.u)?;
    Ok(SolveResult {
        grid,
        residual_history: tr.history,
        min_eigenvalue,
        converged: true,
        iterations: tr.iterations,
        damped_steps: tr.damped,
    })
}

/// Solves `det(φ_jk + iη_jk) = C` with `φ = boundary`, `η = 0` on `∂D`, by
/// continuation in `arg C` from the real solution at `|C|`.
pub fn solve_complexified_ma<T: Real>(
    domain: &Domain<T>,
    c: Complex<T>,
    boundary: &dyn Fn(&[T]) -> T,
    opts: &SolverOptions<T>,
) -> Result<ComplexSolveResult<T>, SolverError> {
    domain.validate()?;
    opts.validate()?;
    let modulus = c.norm();
    if !(modulus > T::zero()) {
        return Err(SolverError::InvalidInput("C must be nonzero".into()));
    }
    let st = Stencil::new(domain)?;
    let real0 = initial_iterate(&st, modulus, boundary, opts)?;
    let mut u: Vec<Complex<T>> = real0.iter().map(|&v| Complex::new(v, T::zero())).collect();
    let tau = c.im.atan2(c.re);
    let steps = if tau == T::zero() { 0 } else { opts.homotopy_steps.max(1) };
    let mut stage_histories = Vec::new();
    for s in 0..=steps {
        let frac = if steps == 0 { T::zero() } else { T::lit(s as f64) / T::lit(steps as f64) };
        let (cs, logc) = if s == steps {
            (c, Complex::new(modulus.ln(), tau))
        } else {
            let ang = tau * frac;
            (Complex::new(modulus * ang.cos(), modulus * ang.sin()), Complex::new(modulus.ln(), ang))
        };
        let logc = if tau == T::zero() { Complex::new(modulus.ln(), T::zero()) } else { logc };
        match newton(&st, u.clone(), cs, logc, opts) {
            Ok(tr) => {
                u = tr.u;
                stage_histories.push(tr.history);
            }
            Err(e) => return Err(SolverError::HomotopyStall { step: s, steps, source: Box::new(e) }),
        }
    }
    let phi = GridFunction::new(domain.bounds.clone(), domain.grid_resolution, u.iter().map(|z| z.re).collect())?;
    let eta = GridFunction::new(domain.bounds.clone(), domain.grid_resolution, u.iter().map(|z| z.im).collect())?;
    Ok(ComplexSolveResult { phi, eta, target: c, stage_histories, converged: true })
}

/// Smallest eigenvalue of the discrete Hessian at every interior node; `NaN` on the boundary.
pub fn convexity_spectrum<T: Real>(grid: &GridFunction<T>) -> GridFunction<T> {
    let n = grid.dim();
    let res = grid.resolution();
    let strides = (0..n).map(|a| res.pow((n - 1 - a) as u32)).collect();
    let h = (0..n).map(|a| grid.spacing(a)).collect();
    let interior = (0..grid.len()).filter(|&k| !grid.is_boundary(&grid.unflatten(k))).collect();
    let st = Stencil { shape: grid.clone(), interior, strides, h };
    eigen_field(&st, grid.values())
}

/// Sup-norm of `det D²_h u − C` over interior nodes of an arbitrary grid function.
pub fn discrete_ma_residual<T: Real>(grid: &GridFunction<T>, c: T) -> T {
    let n = grid.dim();
    let res = grid.resolution();
    let strides = (0..n).map(|a| res.pow((n - 1 - a) as u32)).collect();
    let h = (0..n).map(|a| grid.spacing(a)).collect();
    let interior: Vec<usize> = (0..grid.len()).filter(|&k| !grid.is_boundary(&grid.unflatten(k))).collect();
    let st = Stencil { shape: grid.clone(), interior, strides, h };
    st.interior
        .iter()
        .fold(T::zero(), |m, &k| m.max((st.hessian(grid.values(), k).det() - c).abs()))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn square(res: usize) -> Domain<f64> {
        Domain::cube(2, -1.0, 1.0).unwrap().with_grid_resolution(res).unwrap()
    }

    #[test]
    fn quadratic_data_is_a_fixed_point() {
        let d = square(17);
        let q = |x: &[f64]| 0.5 * (x[0] * x[0] + x[1] * x[1]);
        let opts = SolverOptions { initial_guess: InitialGuess::Quadratic, ..Default::default() };
        let r = solve_real_ma(&d, 1.0, &q, &opts).unwrap();
        assert!(r.residual_history[0] < 1e-12);
        assert_eq!(r.iterations, 0);
    }

    #[test]
    fn zero_boundary_converges_with_positive_spectrum() {
        let d = square(17);
        let r = solve_real_ma(&d, 1.0, &|_| 0.0, &SolverOptions::default()).unwrap();
        assert!(r.final_residual() <= 1e-9);
        assert!(r.min_interior_eigenvalue() > 0.0);
    }

    #[test]
    fn one_dimensional_problem_is_solved_exactly() {
        let d = Domain::cube(1, 0.0, 1.0).unwrap().with_grid_resolution(17).unwrap();
        let r = solve_real_ma(&d, 2.0, &|_| 0.0, &SolverOptions::default()).unwrap();
        let g = &r.grid;
        for i in 0..17 {
            let x: f64 = g.coord(0, i);
            assert!((g.values()[i] - x * (x - 1.0)).abs() < 1e-10);
        }
    }

    #[test]
    fn convexity_spectrum_of_diag_quadratic() {
        let g = GridFunction::sample(vec![(-1.0, 1.0); 2], 9, |x: &[f64]| x[0] * x[0] + 0.5 * x[1] * x[1]).unwrap();
        let f = convexity_spectrum(&g);
        for (k, v) in f.values().iter().enumerate() {
            if g.is_boundary(&g.unflatten(k)) {
                assert!(v.is_nan());
            } else {
                assert!((v - 1.0).abs() < 1e-12);
            }
        }
    }
}
