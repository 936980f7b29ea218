use crate::config::{ConfigError, PotentialSpec, Suite, SuiteConfig};
use crate::report::CheckRecord;
use num_complex::Complex;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use semiflat::automorphisms::{self as auto, BaseMap, LegendrePair};
use semiflat::connections as conn;
use semiflat::forms::{operator_matrix, ModuliVector, MultiIndex, OperatorTag, Side};
use semiflat::hyperkahler as hk;
use semiflat::mirror as mir;
use semiflat::poly::Poly;
use semiflat::solver::{self, SolverError, SolverOptions};
use semiflat::{ComplexifiedPotential, Domain, GridFunction, JetFrame, Mat, MirrorContext, Potential, ScalarField};
use std::collections::BTreeMap;
use std::time::Instant;

type C64 = Complex<f64>;

/// Why a check produced no residual.
#[derive(Debug)]
pub enum Failure {
    Solver(String),
    Other(String),
}

macro_rules! other_failure {
    ($($t:ty),*) => {$(
        impl From<$t> for Failure {
            fn from(e: $t) -> Self {
                Failure::Other(e.to_string())
            }
        }
    )*};
}
other_failure!(
    semiflat::GeometryError,
    semiflat::forms::FormError,
    hk::HyperkahlerError,
    auto::AutomorphismError
);

impl From<SolverError> for Failure {
    fn from(e: SolverError) -> Self {
        Failure::Solver(e.to_string())
    }
}

struct Measure {
    residual: f64,
    samples: usize,
}

fn measured(residual: f64, samples: usize) -> Result<Measure, Failure> {
    Ok(Measure { residual, samples })
}

/// Background shared by every suite of one run.
pub struct Env {
    pub cfg: SuiteConfig,
    pub domain: Domain<f64>,
    pub potential: Potential<f64>,
    pub ctx: MirrorContext<f64>,
}

impl Env {
    pub fn new(cfg: &SuiteConfig) -> Result<Self, ConfigError> {
        cfg.validate()?;
        let domain = cfg.domain()?;
        let potential = cfg.potential()?;
        let ctx = MirrorContext::new(potential.clone(), domain.clone()).map_err(|e| ConfigError::Invalid(e.to_string()))?;
        Ok(Self { cfg: cfg.clone(), domain, potential, ctx })
    }

    fn n(&self) -> usize {
        self.cfg.n
    }

    fn is_grid(&self) -> bool {
        matches!(self.cfg.potential, PotentialSpec::Grid { .. })
    }

    fn is_analytic_ma(&self) -> bool {
        self.cfg.is_monge_ampere() && !self.is_grid()
    }

    /// The configured background when it solves Monge-Ampère analytically, else an exact solution on the same box.
    fn ma_context(&self) -> Result<MirrorContext<f64>, Failure> {
        if self.is_analytic_ma() {
            Ok(self.ctx.clone())
        } else {
            self.curved_ma_context()
        }
    }

    /// A non-quadratic exact Monge-Ampère background on the configured box.
    fn curved_ma_context(&self) -> Result<MirrorContext<f64>, Failure> {
        let c = self.domain.bounds[0].1 + 1.5;
        Ok(MirrorContext::new(Potential::exact_ma(self.n(), c), self.domain.clone())?)
    }

    /// Largest grid spacing of the configured box.
    fn spacing(&self) -> f64 {
        let r = (self.cfg.grid_resolution - 1) as f64;
        self.domain.bounds.iter().fold(0.0, |m, (a, b)| f64::max(m, (b - a) / r))
    }
}

/// Per-suite state: the RNG and the records collected so far.
pub struct Scope<'a> {
    suite: Suite,
    env: &'a Env,
    tol_override: Option<f64>,
    omit_timing: bool,
    rng: ChaCha8Rng,
    pub records: Vec<CheckRecord>,
    pub calibration: BTreeMap<String, f64>,
    pub solver_failed: bool,
}

fn fnv1a(s: &str) -> u64 {
    s.bytes().fold(0xcbf2_9ce4_8422_2325, |h, b| (h ^ b as u64).wrapping_mul(0x0000_0100_0000_01b3))
}

impl<'a> Scope<'a> {
    pub fn new(suite: Suite, env: &'a Env, seed: u64, tol_override: Option<f64>, omit_timing: bool) -> Self {
        Self {
            suite,
            env,
            tol_override,
            omit_timing,
            rng: ChaCha8Rng::seed_from_u64(seed ^ fnv1a(suite.name())),
            records: Vec::new(),
            calibration: BTreeMap::new(),
            solver_failed: false,
        }
    }

    fn tolerance(&self, check: &str, default: f64) -> f64 {
        let t = &self.env.cfg.tolerances;
        self.tol_override
            .or_else(|| t.get(&format!("{}/{}", self.suite, check)).copied())
            .or_else(|| t.get(self.suite.name()).copied())
            .unwrap_or(default)
    }

    fn check(&mut self, name: &str, anchor: &str, default_tol: f64, f: impl FnOnce(&mut Self) -> Result<Measure, Failure>) {
        let tol = self.tolerance(name, default_tol);
        let start = Instant::now();
        let out = f(self);
        let ms = if self.omit_timing { 0 } else { start.elapsed().as_millis() as u64 };
        let mut rec = match out {
            Ok(m) => CheckRecord::new(self.suite.name(), name, anchor, m.residual, tol, m.samples as u64),
            Err(e) => {
                let msg = match e {
                    Failure::Solver(m) => {
                        self.solver_failed = true;
                        m
                    }
                    Failure::Other(m) => m,
                };
                eprintln!("{}/{}: {}", self.suite, name, msg);
                CheckRecord::new(self.suite.name(), name, anchor, f64::MAX, tol, 0)
            }
        };
        rec.wall_time_ms = ms;
        self.records.push(rec);
    }

    /// Wall-clock budget check; with timing omitted a met budget is recorded as zero.
    fn timed(&mut self, name: &str, anchor: &str, budget: f64, seconds: Option<f64>) {
        let omit = self.omit_timing;
        self.check(name, anchor, budget, |_| match seconds {
            Some(s) => measured(if omit && s <= budget { 0.0 } else { s }, 1),
            None => Err(Failure::Other("timed step did not complete".into())),
        });
    }

    fn calibrate(&mut self, key: &str, v: f64) {
        self.calibration.insert(format!("{}/{}", self.suite, key), v);
    }

    fn point(&mut self, margin: f64) -> Vec<f64> {
        // Grid jets need two cells of collar on every side.
        let margin = if self.env.is_grid() { margin.max(4.0 / (self.env.cfg.grid_resolution - 1) as f64 + 0.05) } else { margin };
        let inner = self.env.domain.shrunk(margin);
        inner.bounds.iter().map(|&(lo, hi)| self.rng.gen_range(lo..hi)).collect()
    }

    fn points(&mut self, count: usize, margin: f64) -> Vec<Vec<f64>> {
        (0..count).map(|_| self.point(margin)).collect()
    }

    fn uniform_vec(&mut self, len: usize, r: f64) -> Vec<f64> {
        (0..len).map(|_| self.rng.gen_range(-r..r)).collect()
    }

    /// Random polynomial with linear, quadratic and cubic terms scaled by `s`.
    fn poly(&mut self, s: [f64; 3]) -> Poly<f64> {
        let n = self.env.n();
        let mut p = Poly::zero();
        for a in 0..n {
            let mut e = [0u8; 4];
            e[a] = 1;
            p.add_term(e, C64::new(s[0] * self.rng.gen_range(-1.0..1.0), 0.0));
            for b in a..n {
                let mut e2 = e;
                e2[b] += 1;
                p.add_term(e2, C64::new(s[1] * self.rng.gen_range(-1.0..1.0), 0.0));
                for c in b..n {
                    let mut e3 = e2;
                    e3[c] += 1;
                    p.add_term(e3, C64::new(s[2] * self.rng.gen_range(-1.0..1.0), 0.0));
                }
            }
        }
        p
    }

    fn field(&mut self, s: [f64; 3]) -> ScalarField<f64> {
        let p = self.poly(s);
        ScalarField::polynomial(self.env.n(), p)
    }

    fn moduli(&mut self) -> ModuliVector<f64> {
        ModuliVector::new(self.field([0.0, 1.0, 0.3]))
    }

    fn jets(&mut self, count: usize) -> Result<Vec<JetFrame<f64>>, Failure> {
        let pts = self.points(count, 0.1);
        Ok(pts.iter().map(|x| self.env.potential.jet_at(x)).collect::<Result<_, _>>()?)
    }
}

fn max_of(it: impl IntoIterator<Item = f64>) -> f64 {
    it.into_iter().fold(0.0, |m: f64, v| if v.is_nan() { f64::NAN } else { m.max(v) })
}

/// Runs one suite into its scope.
pub fn run_suite(s: &mut Scope) {
    match s.suite {
        Suite::Legendre => legendre(s),
        Suite::Ma => ma(s),
        Suite::MirrorForms => mirror_forms(s),
        Suite::Sl2 => sl2(s),
        Suite::Yukawa => yukawa(s),
        Suite::Moduli => moduli(s),
        Suite::Connections => connections(s),
        Suite::Cycles => cycles(s),
        Suite::Hyperkahler => hyperkahler(s),
        Suite::Automorphisms => automorphisms(s),
        Suite::Bfield => bfield(s),
    }
}

fn legendre(s: &mut Scope) {
    let env = s.env;
    let analytic_tol = if env.is_grid() { 5.0 * env.spacing().powi(2) } else { 1e-10 };
    let samples = s.points(20, 0.2);
    s.check("involution", "ψ* = φ, ∇ψ ∘ ∇φ = id", analytic_tol, |_| {
        let dual = std::sync::Arc::new(semiflat::legendre_dual(&env.potential, &env.domain)?);
        let x0 = env.domain.center();
        let p0 = env.potential.gradient(&x0)?;
        let twice = semiflat::LegendreDual::with_start(dual.as_potential(), p0)?;
        let phi0 = env.potential.value(&x0)?;
        let mut worst: f64 = 0.0;
        for x in &samples {
            let p = env.potential.gradient(x)?;
            let back = dual.inverse_gradient(&p)?;
            worst = worst.max(max_of(back.iter().zip(x).map(|(a, b)| (a - b).abs())));
            let v = twice.value(x)? - (env.potential.value(x)? - phi0);
            worst = worst.max(v.abs());
        }
        measured(worst, samples.len())
    });
    s.check("hessian-duality", "D²ψ(∇φ) D²φ = I", analytic_tol, |_| {
        let dual = semiflat::legendre_dual(&env.potential, &env.domain)?;
        let mut worst: f64 = 0.0;
        for x in &samples {
            let j = env.potential.jet_at(x)?;
            let dj = dual.jet_at(&j.gradient)?;
            worst = worst.max(dj.hessian.matmul(&j.hessian).sub(&Mat::identity(env.n())).max_abs());
        }
        measured(worst, samples.len())
    });
    if env.is_analytic_ma() {
        s.check("ma-duality", "det D²φ = C ⇒ det D²ψ = 1/C", 1e-10, |_| {
            let dual = semiflat::legendre_dual(&env.potential, &env.domain)?;
            let c = env.potential.target_constant;
            let mut worst: f64 = 0.0;
            for x in &samples {
                let p = env.potential.gradient(x)?;
                worst = worst.max((dual.jet_at(&p)?.det_hessian * c - 1.0).abs());
            }
            measured(worst, samples.len())
        });
    }
    s.check("shrink-volume", "det g_t = det g_1", 1e-12, |_| {
        let mut worst: f64 = 0.0;
        for x in &samples {
            let scale = env.potential.jet_at(x)?.det_hessian.powi(2).max(1.0);
            for t in [0.1, 10.0] {
                worst = worst.max(semiflat::shrink_volume_check(&env.potential, t, x)?.abs() / scale);
            }
        }
        measured(worst, 2 * samples.len())
    });
    s.check("omega-closedness", "dω_M = 0", 1e-10, |_| {
        let mut worst: f64 = 0.0;
        for x in &samples {
            worst = worst.max(semiflat::geometry::omega_closedness_residual(&env.potential.jet_at(x)?));
        }
        measured(worst, samples.len())
    });
}

/// `max |u − exact|` over the nodes of a solved grid.
fn nodal_error(g: &GridFunction<f64>, exact: &dyn Fn(&[f64]) -> f64) -> f64 {
    max_of((0..g.len()).map(|k| (g.values()[k] - exact(&g.node(&g.unflatten(k)))).abs()))
}

fn ma(s: &mut Scope) {
    let env = s.env;
    let n = env.n();
    s.check("quadratic-exactness", "½ xᵀAx solves det D²u = det A exactly", 1e-12, |_| {
        let a: Vec<f64> = [2.0, 1.0, 1.5, 1.0][..n].to_vec();
        let c: f64 = a.iter().product();
        let q = move |x: &[f64]| 0.5 * x.iter().zip(&a).map(|(v, w)| w * v * v).sum::<f64>();
        let opts = SolverOptions { tolerance: 1e-13, ..Default::default() };
        let r = solver::solve_real_ma(&env.domain, c, &q, &opts)?;
        let err = nodal_error(&r.grid, &q);
        measured(err.max(r.final_residual()), r.grid.len())
    });
    // Refinement order on an exact non-quadratic solution of the square.
    let square = |res: usize| Domain::cube(2, -0.5, 0.5).and_then(|d| d.with_grid_resolution(res));
    let exact = Potential::exact_ma(2, 2.0);
    let mut errors = Vec::new();
    let mut seconds_65 = None;
    for res in [17, 33, 65] {
        let bc = |x: &[f64]| exact.value(x).unwrap_or(f64::NAN);
        let t0 = Instant::now();
        let out = square(res).map_err(Failure::from).and_then(|d| Ok(solver::solve_real_ma(&d, 1.0, &bc, &SolverOptions::default())?));
        match out {
            Ok(r) => {
                if res == 65 {
                    seconds_65 = Some(t0.elapsed().as_secs_f64());
                    let resid = solver::discrete_ma_residual(&r.grid, 1.0);
                    let len = r.grid.len();
                    s.check("discrete-residual-65", "det D²_h u = C on 65²", 1e-9, |_| measured(resid, len));
                }
                errors.push(Some(nodal_error(&r.grid, &bc)));
            }
            Err(e) => {
                if let Failure::Solver(m) = &e {
                    eprintln!("ma/solve-{res}: {m}");
                    s.solver_failed = true;
                }
                errors.push(None);
            }
        }
    }
    for (k, (lo, hi)) in [(17, 33), (33, 65)].into_iter().enumerate() {
        let (e0, e1) = (errors[k], errors[k + 1]);
        s.check(&format!("refinement-{lo}-{hi}"), "max-norm error falls by 4 per halving of h", 0.8, |sc| match (e0, e1) {
            (Some(a), Some(b)) => {
                sc.calibrate(&format!("ratio-{lo}-{hi}"), a / b);
                measured((a / b - 4.0).abs(), 2)
            }
            _ => Err(Failure::Other("refinement solve failed".into())),
        });
    }
    s.timed("solve-65-seconds", "65² solve within budget", 30.0, seconds_65);
}

fn mirror_forms(s: &mut Scope) {
    let env = s.env;
    let t0 = Instant::now();
    let forms: Vec<_> = (0..10).map(|_| s.moduli().form()).collect();
    let samples = s.points(5, 0.1);
    s.check("dbar-commutation", "∂̄_W T = (−1)ⁿ T ∂̄_M", 1e-9, |_| {
        let mut worst: f64 = 0.0;
        for f in &forms {
            worst = worst.max(mir::dbar_commutation_residual(f, &env.ctx, &samples)?);
        }
        measured(worst, forms.len() * samples.len())
    });
    s.check("dbar-star-commutation", "∂̄*_W T = (−1)ⁿ T ∂̄*_M", 1e-6, |_| {
        let nodes = if env.n() <= 2 { 12 } else { 6 };
        let mut worst: f64 = 0.0;
        for f in &forms[..3] {
            worst = worst.max(mir::dbar_star_commutation_residual(f, &env.ctx, nodes)?);
        }
        measured(worst, 3)
    });
    let seconds = t0.elapsed().as_secs_f64();
    let jets = s.jets(5);
    s.check("inversion-sign", "T_W T_M = (−1)^{n(n−1)/2}", 1e-12, |_| {
        let jets = jets?;
        let n = env.n();
        let sign = C64::new(mir::inversion_sign(n) as f64, 0.0);
        let mut worst: f64 = 0.0;
        for j in &jets {
            let mut dual = j.clone();
            std::mem::swap(&mut dual.hessian, &mut dual.inverse_hessian);
            let tt = mir::transform_matrix(&dual).matmul(&mir::transform_matrix(j));
            worst = worst.max(tt.sub(&Mat::identity(1 << (2 * n)).scale(sign)).max_abs());
        }
        measured(worst, jets.len())
    });
    if env.n() == 2 {
        s.timed("runtime-seconds", "form commutation suite within budget", 10.0, Some(seconds));
    }
}

fn sl2(s: &mut Scope) {
    use OperatorTag::*;
    let jets = s.jets(10);
    let ops = |j: &JetFrame<f64>, side: Side| -> BTreeMap<u8, Mat<C64>> {
        OperatorTag::ALL.iter().enumerate().map(|(k, t)| (k as u8, operator_matrix(*t, j, side))).collect()
    };
    let idx = |t: OperatorTag| OperatorTag::ALL.iter().position(|x| *x == t).unwrap() as u8;
    let two = C64::new(2.0, 0.0);
    let bracket_check = |jets: &Result<Vec<JetFrame<f64>>, Failure>, triple: [OperatorTag; 3]| -> Result<Measure, Failure> {
        let jets = jets.as_ref().map_err(|e| Failure::Other(format!("{e:?}")))?;
        let [l, lam, h] = triple;
        let mut worst: f64 = 0.0;
        for j in jets {
            for side in [Side::M, Side::W] {
                let m = ops(j, side);
                let (l, lam, h) = (&m[&idx(l)], &m[&idx(lam)], &m[&idx(h)]);
                worst = worst.max(l.commutator(lam).sub(h).max_abs());
                worst = worst.max(h.commutator(l).add(&l.scale(two)).max_abs());
                worst = worst.max(h.commutator(lam).sub(&lam.scale(two)).max_abs());
            }
        }
        measured(worst, 6 * jets.len())
    };
    s.check("brackets-a", "[L_A, Λ_A] = H_A, [H_A, L_A] = −2L_A, [H_A, Λ_A] = 2Λ_A", 1e-10, |_| {
        bracket_check(&jets, [LA, LambdaA, HA])
    });
    s.check("brackets-b", "[L_B, Λ_B] = H_B, [H_B, L_B] = −2L_B, [H_B, Λ_B] = 2Λ_B", 1e-10, |_| {
        bracket_check(&jets, [LB, LambdaB, HB])
    });
    s.check("cross-commutators", "[X_A, Y_B] = 0", 1e-10, |_| {
        let jets = jets.as_ref().map_err(|e| Failure::Other(format!("{e:?}")))?;
        let mut worst: f64 = 0.0;
        for j in jets {
            for side in [Side::M, Side::W] {
                let m = ops(j, side);
                for p in [LA, LambdaA, HA] {
                    for q in [LB, LambdaB, HB] {
                        worst = worst.max(m[&idx(p)].commutator(&m[&idx(q)]).max_abs());
                    }
                }
            }
        }
        measured(worst, 18 * jets.len())
    });
    s.check("intertwining", "X_A T = T X_B, X_B T = T X_A", 1e-10, |_| {
        let jets = jets.as_ref().map_err(|e| Failure::Other(format!("{e:?}")))?;
        let mut worst: f64 = 0.0;
        for j in jets {
            let t = mir::transform_matrix(j);
            let (mw, mm) = (ops(j, Side::W), ops(j, Side::M));
            for (w, m) in [(LA, LB), (LambdaA, LambdaB), (HA, HB), (LB, LA), (LambdaB, LambdaA), (HB, HA)] {
                worst = worst.max(mw[&idx(w)].matmul(&t).sub(&t.matmul(&mm[&idx(m)])).max_abs());
            }
        }
        measured(worst, 6 * jets.len())
    });
}

/// Relative spread `stdev / |mean|` of the Yukawa ratio over random closed tuples.
fn yukawa_spread(s: &mut Scope, ctx: &MirrorContext<f64>, tuples: usize) -> Result<(f64, C64), Failure> {
    let n = s.env.n();
    let mut ratios = Vec::with_capacity(tuples);
    for _ in 0..tuples {
        let forms: Vec<_> = (0..n).map(|_| s.moduli().form()).collect();
        let images = forms.iter().map(|f| mir::transform(f, ctx)).collect::<Result<Vec<_>, _>>()?;
        ratios.push(mir::yukawa_a(&forms, ctx)?.value / mir::yukawa_b(&images, ctx)?.value);
    }
    let mean = ratios.iter().sum::<C64>() / tuples as f64;
    let var = ratios.iter().map(|r| (r - mean).norm_sqr()).sum::<f64>() / tuples as f64;
    Ok((var.sqrt() / mean.norm(), mean))
}

fn yukawa(s: &mut Scope) {
    let env = s.env;
    if env.is_analytic_ma() {
        s.check("ratio-constancy", "_AY / _BY is one constant", 1e-8, |sc| {
            let (spread, mean) = yukawa_spread(sc, &env.ctx, 10)?;
            sc.calibrate("ratio-re", mean.re);
            sc.calibrate("ratio-im", mean.im);
            measured(spread, 10)
        });
    }
    s.check("ratio-constancy-curved", "_AY / _BY is one constant on a curved solution", 1e-8, |sc| {
        let ctx = env.curved_ma_context()?;
        let (spread, mean) = yukawa_spread(sc, &ctx, 10)?;
        sc.calibrate("curved-ratio-re", mean.re);
        sc.calibrate("curved-ratio-im", mean.im);
        measured(spread, 10)
    });
}

fn moduli(s: &mut Scope) {
    let env = s.env;
    let samples = s.points(5, 0.1);
    let vectors: Vec<_> = (0..10).map(|_| s.moduli()).collect();
    s.check("readback", "moduli map read back from Tξ", 1e-12, |_| {
        let mut worst: f64 = 0.0;
        for v in &vectors {
            worst = worst.max(mir::moduli_readback_residual(v, &env.ctx, &samples)?);
        }
        measured(worst, vectors.len() * samples.len())
    });
    let pairs: Vec<_> = (0..10).map(|_| (s.moduli(), s.moduli())).collect();
    s.check("isometry", "⟨ξ, ζ⟩_M = κ ⟨Tξ, Tζ⟩_W", 1e-6, |sc| {
        let ctx = env.ma_context()?;
        sc.calibrate("kappa", mir::moduli_constant(&ctx)?);
        let mut worst: f64 = 0.0;
        for (a, b) in &pairs {
            worst = worst.max(mir::moduli_isometry_residual(a, b, &ctx)?);
        }
        measured(worst, pairs.len())
    });
    let mut mixed = Ok(0.0);
    s.check("fiber-l2-metric", "∫_C ⟨ι_j ω, ι_l ω⟩ = φ_jl vol(C)", 1e-8, |_| {
        let mut worst: f64 = 0.0;
        let mut m: f64 = 0.0;
        for x in &samples {
            let r = mir::fiber_l2_metric_residual(&env.ctx, x)?;
            worst = worst.max(r.base_residual);
            m = m.max(r.mixed_block);
        }
        mixed = Ok(m);
        measured(worst, samples.len())
    });
    s.check("fiber-l2-mixed-block", "fiber L² metric has no mixed block", 0.0, |_| match mixed {
        Ok(m) => measured(m, samples.len()),
        Err(e) => Err(e),
    });
    let n = env.n();
    if let Ok(v) = mir::prepotential_a(&env.ctx) {
        s.calibrate("prepotential-a", v);
    }
    if let Ok(v) = mir::prepotential_b(&env.ctx) {
        s.calibrate("prepotential-b-re", v.re);
        s.calibrate("prepotential-b-im", v.im);
    }
    let top = mir::top_form_factor::<f64>(n);
    s.calibrate("top-form-factor-re", top.re);
    s.calibrate("top-form-factor-im", top.im);
}

fn connections(s: &mut Scope) {
    let env = s.env;
    let samples = s.points(10, 0.2);
    let jets: Result<Vec<_>, Failure> = samples.iter().map(|x| Ok(env.potential.jet_at(x)?)).collect();
    let each = |jets: &Result<Vec<JetFrame<f64>>, Failure>, f: &dyn Fn(&JetFrame<f64>) -> Result<f64, Failure>| {
        let jets = jets.as_ref().map_err(|e| Failure::Other(format!("{e:?}")))?;
        let mut worst: f64 = 0.0;
        for j in jets {
            worst = worst.max(f(j)?);
        }
        measured(worst, jets.len())
    };
    s.check("a-curvature", "R(∇_A) = 0", 1e-8, |_| {
        let mut worst: f64 = 0.0;
        for x in &samples {
            worst = worst.max(conn::a_curvature_residual(&env.potential, x, 1e-3)?);
        }
        measured(worst, samples.len())
    });
    s.check("nabla-omega", "∇_A ω = 0", 1e-12, |_| each(&jets, &|j| Ok(conn::nabla_omega_residual(j))));
    let dual = semiflat::legendre_dual(&env.potential, &env.domain);
    let dual_jet = |j: &JetFrame<f64>| -> Result<JetFrame<f64>, Failure> {
        let d = dual.as_ref().map_err(|e| Failure::Other(e.to_string()))?;
        Ok(d.jet_at(&j.gradient)?)
    };
    s.check("duality", "∇_A has vanishing symbols in x_j = ∂φ/∂x^j", 1e-9, |_| {
        each(&jets, &|j| Ok(conn::connection_duality_residual(j, &dual_jet(j)?)))
    });
    s.check("b-to-a", "∇_B on D* is ∇_A on D", 1e-8, |_| each(&jets, &|j| Ok(conn::b_to_a_residual(j, &dual_jet(j)?))));
    s.check("levi-civita", "∇_LC = ½ (∇_A + ∇_B)", 1e-10, |_| {
        each(&jets, &|j| Ok(conn::levi_civita_midpoint_residual(j)))
    });
}

fn cycles(s: &mut Scope) {
    let env = s.env;
    let n = env.n();
    let phase_samples = env.domain.halton_points(6, 0.1);
    let triples: Vec<_> = (0..50).map(|_| (s.field([1.0, 0.7, 0.3]), s.point(0.2))).collect();
    let mut f02: Result<f64, Failure> = Ok(0.0);
    s.check("slag-dhym", "SLag phase ⇔ dHYM", 1e-9, |_| {
        let mut worst: f64 = 0.0;
        let mut worst02: f64 = 0.0;
        for (f, x) in &triples {
            let theta = conn::section_phase(f, &env.potential, &phase_samples)?;
            let sec = conn::SLagSection::new(f.clone(), theta);
            let jet = env.potential.jet_at(x)?;
            let a = conn::slag_phase_residual(&sec, &jet)?;
            let u = conn::fourier_transform_cycle(&sec, &env.potential, x)?;
            worst = worst.max((a - conn::dhym_residual(&u, theta, &jet)).abs());
            worst02 = worst02.max(u.f02().max_abs());
        }
        f02 = Ok(worst02);
        measured(worst, triples.len())
    });
    s.check("f02", "F^{0,2} = 0", 64.0 * f64::EPSILON, |_| match f02 {
        Ok(v) => measured(v, triples.len()),
        Err(e) => Err(e),
    });
    let samples = s.points(5, 0.1);
    s.check("deformed-harmonic", "T(dh) is deformed harmonic", 1e-8, |_| {
        let ctx = env.ma_context()?;
        let zero = conn::SLagSection::new(ScalarField::zero(n), 0.0);
        let mut worst: f64 = 0.0;
        for j in 1..=n {
            let b = conn::tangent_transform(&conn::CycleTangentForm::dx(n, j), &ctx)?;
            let (r1, r2) = conn::deformed_harmonic_residual(&b, &zero, &ctx, &samples)?;
            worst = worst.max(r1).max(r2);
        }
        measured(worst, n * samples.len())
    });
    let mut alphas = Vec::with_capacity(n);
    for _ in 0..n {
        let mut a = conn::CycleTangentForm::new(n, 1);
        for j in 1..=n {
            let f = s.field([1.0, 0.7, 0.3]);
            a = match a.with(MultiIndex(1 << (j - 1)), f) {
                Ok(a) => a,
                Err(_) => conn::CycleTangentForm::new(n, 1),
            };
        }
        alphas.push(a);
    }
    s.check("correlation", "_AΩ = κ _BΩ", 1e-6, |sc| {
        let kappa = conn::correlation_calibration::<f64>(n)?;
        sc.calibrate("correlation-kappa-re", kappa.re);
        sc.calibrate("correlation-kappa-im", kappa.im);
        measured(conn::correlation_residual(&alphas, &env.ctx)?, 1)
    });
}

fn hyperkahler(s: &mut Scope) {
    let env = s.env;
    let n = env.n();
    let frames: Result<Vec<(JetFrame<f64>, hk::HKFrame<f64>)>, Failure> = (0..20)
        .map(|_| {
            let x = s.point(0.1);
            let mut pt = x.clone();
            pt.extend(s.uniform_vec(3 * n, 1.0));
            let jet = env.potential.jet_at(&x)?;
            let f = hk::build(&jet, &pt)?;
            Ok((jet, f))
        })
        .collect();
    let spheres: Vec<[f64; 3]> = (0..20).map(|_| [0, 1, 2].map(|_| s.rng.gen_range(-1.0..1.0))).collect();
    let frames = frames.map_err(|e| format!("{e:?}"));
    let over = |f: &dyn Fn(&(JetFrame<f64>, hk::HKFrame<f64>), usize) -> Result<f64, Failure>| -> Result<Measure, Failure> {
        let fs = frames.as_ref().map_err(|e| Failure::Other(e.clone()))?;
        let mut worst: f64 = 0.0;
        for (k, fr) in fs.iter().enumerate() {
            worst = worst.max(f(fr, k)?);
        }
        measured(worst, fs.len())
    };
    s.check("quaternion", "I² = J² = K² = IJK = −1", 1e-12, |_| over(&|(_, f), _| Ok(max_of(hk::quaternion_residuals(f)))));
    s.check("compatibility", "g(X, Y) = g(IX, IY) and ω_I = g(I·, ·)", 1e-12, |_| {
        over(&|(_, f), _| Ok(hk::compatibility_residual(f)))
    });
    s.check("kahler-family", "(t₁I + t₂J + t₃K)² = −1 on S²", 1e-12, |_| {
        over(&|(_, f), k| {
            let t = hk::SphereParam::normalized(spheres[k])?;
            Ok(hk::kahler_family_check(f, &t).1)
        })
    });
    s.check("restriction", "ω_I, ω_J restrict to the mirror pair", 1e-12, |_| {
        over(&|(j, f), _| Ok(hk::restriction_residual(f, j, env.cfg.lattice_covolume)))
    });
    if n <= 2 {
        s.check("lj-lambdak", "[L_J, Λ_K] acts as i on holomorphic one-forms", 1e-10, |_| {
            over(&|(_, f), _| Ok(hk::lj_lambdak_check(f)?.max(hk::lj_lambdak_action_residual(f)?)))
        });
        s.check("lefschetz-triples", "each of ω_I, ω_J, ω_K generates sl(2)", 1e-10, |_| {
            over(&|(_, f), k| {
                if k >= 3 {
                    return Ok(0.0);
                }
                let mut worst: f64 = 0.0;
                for w in [&f.omega_i, &f.omega_j, &f.omega_k] {
                    worst = worst.max(hk::lefschetz_triple_residual(f, w)?);
                }
                Ok(worst)
            })
        });
        if let Ok(fs) = frames.as_ref() {
            let flip = fs.iter().filter_map(|(_, f)| hk::lj_lambdak_flip_residual(f).ok()).fold(0.0, f64::max);
            s.calibrate("lj-lambdak-literal-flip", flip);
        }
    }
    if n > 2 {
        return;
    }
    let pts = s.points(4, 0.2);
    let mut defect: f64 = 0.0;
    s.check("closedness", "dω_I = dω_K = 0 and d of the base part of ω_J = 0", 1e-10, |_| {
        let mut worst: f64 = 0.0;
        for x in &pts {
            let c = hk::closedness(&env.potential, x, 1e-3)?;
            worst = worst.max(c.d_omega_i).max(c.d_omega_k).max(c.d_omega_j_base);
            defect = defect.max(c.fiber_defect);
        }
        measured(worst, pts.len())
    });
    s.calibrate("omega-j-fiber-defect", defect);
}

fn affine_map(n: usize) -> BaseMap<f64> {
    let a = if n >= 2 {
        let (c, sn) = (0.4f64.cos(), 0.4f64.sin());
        Mat::from_fn(n, n, |i, j| match (i, j) {
            (0, 0) | (1, 1) => c,
            (0, 1) => -sn,
            (1, 0) => sn,
            _ if i == j => 1.0,
            _ => 0.0,
        })
    } else {
        Mat::identity(1).scale(0.9)
    };
    BaseMap::affine(a, vec![0.0; n])
}

fn shear_map(n: usize, e: f64) -> BaseMap<f64> {
    BaseMap::from_jet_fn(n, move |x| {
        let mut v = x.to_vec();
        if n >= 2 {
            v[0] = x[0] + x[1] * x[1] * e;
            v[1] = x[1] + x[0] * x[0] * (0.5 * e);
        } else {
            v[0] = x[0] + x[0] * x[0] * e;
        }
        v
    })
}

/// An isometry of the radial background.
fn radial_isometry(n: usize) -> BaseMap<f64> {
    if n >= 2 {
        affine_map(n)
    } else {
        BaseMap::affine(Mat::identity(1).scale(-1.0), vec![0.0])
    }
}

fn automorphisms(s: &mut Scope) {
    let env = s.env;
    let n = env.n();
    let pts: Vec<(Vec<f64>, Vec<f64>)> = (0..10).map(|_| (s.point(0.4), s.uniform_vec(n, 1.0))).collect();
    let base: Vec<Vec<f64>> = pts.iter().map(|(x, _)| x.clone()).collect();
    let maps = [(affine_map(n), true), (shear_map(n, 0.1), false)];
    s.check("holomorphy-dichotomy", "f_B holomorphic ⇔ f affine", 0.0, |_| {
        let mut wrong = 0.0;
        for (f, affine) in &maps {
            let mut formula: f64 = 0.0;
            for (x, y) in &pts {
                let r = auto::dbar_b_residual(f, x, y, 1.0)?;
                if r.fd_deviation >= 1e-7 {
                    wrong += 1.0;
                }
                formula = formula.max(r.formula.max_abs());
            }
            if (formula == 0.0) != *affine {
                wrong += 1.0;
            }
        }
        measured(wrong, 2 * pts.len())
    });
    let pair = LegendrePair::of(&env.ctx);
    s.check("varpi-dichotomy", "f_A preserves ϖ ⇔ f̂ affine", 0.0, |_| {
        let mut wrong = 0.0;
        for (f_hat, affine) in &maps {
            let mut formula: f64 = 0.0;
            for (x, y) in &pts {
                let p = pair.to_dual.value(x)?;
                let r = auto::varpi_residual(f_hat, &p, y)?;
                if r.fd_deviation >= 1e-7 {
                    wrong += 1.0;
                }
                formula = formula.max(r.formula.max_abs());
            }
            let detected = if *affine { formula == 0.0 } else { formula > auto::AFFINE_THRESHOLD };
            if !detected {
                wrong += 1.0;
            }
        }
        measured(wrong, 2 * pts.len())
    });
    let f_affine = affine_map(n).compose(&BaseMap::affine(Mat::identity(n).scale(0.9), vec![0.02; n]));
    s.check("flip-of-b-lift", "flip(f_B) = (f̌)_A on W", 1e-10, |_| {
        let flipped = auto::mirror_flip(&auto::induce_b(&f_affine), &base)?;
        let a_on_w = auto::induce_a(&pair.conjugate(&f_affine), &pair.swapped());
        measured(auto::map_distance(&flipped, &a_on_w, &pts)?, pts.len())
    });
    s.check("double-flip", "flip ∘ flip = id", 1e-10, |_| {
        let fb = auto::induce_b(&f_affine);
        let back = auto::mirror_flip(&auto::mirror_flip(&fb, &base)?, &base)?;
        measured(auto::map_distance(&back, &fb, &pts)?, pts.len())
    });
    let chain = [shear_map(n, 0.1), affine_map(n), shear_map(n, -0.05)];
    s.check("functoriality-b", "(f ∘ g)_B = f_B ∘ g_B", 1e-12, |_| {
        let composed = chain[0].compose(&chain[1]).compose(&chain[2]);
        let lifted = auto::induce_b(&chain[0]).compose(&auto::induce_b(&chain[1])).compose(&auto::induce_b(&chain[2]));
        measured(auto::map_distance(&auto::induce_b(&composed), &lifted, &pts)?, pts.len())
    });
    s.check("functoriality-a", "(f ∘ g)_A = f_A ∘ g_A", 1e-10, |_| {
        let composed = chain[0].compose(&chain[1]).compose(&chain[2]);
        let lifted = auto::induce_a(&chain[0], &pair)
            .compose(&auto::induce_a(&chain[1], &pair))
            .compose(&auto::induce_a(&chain[2], &pair));
        let dual_pts = pts.iter().map(|(x, y)| Ok((pair.to_dual.value(x)?, y.clone()))).collect::<Result<Vec<_>, Failure>>()?;
        measured(auto::map_distance(&auto::induce_a(&composed, &pair), &lifted, &dual_pts)?, pts.len())
    });
    s.check("symplectic", "f_A preserves ω_W", 1e-8, |_| {
        let fa = auto::induce_a(&shear_map(n, 0.1), &pair);
        let mut worst: f64 = 0.0;
        for (x, y) in &pts {
            worst = worst.max(auto::symplectic_residual(&fa, &pair.to_dual.value(x)?, y)?);
        }
        measured(worst, pts.len())
    });
    s.check("isometry-bridge", "f_A = f_B for isometries of g_D", 1e-9, |_| {
        let ctx = MirrorContext::new(Potential::radial(n), env.domain.clone())?;
        let f = radial_isometry(n);
        measured(auto::base_isometry_residual(&f, &ctx, &base)?.max(auto::isometry_bridge_residual(&f, &ctx, &pts)?), pts.len())
    });
}

fn bfield(s: &mut Scope) {
    let samples = s.points(8, 0.1);
    let square = Domain::cube(2, -0.5, 0.5).and_then(|d| d.with_grid_resolution(17));
    let mut solved = None;
    s.check("complexified-residual", "det(φ_jk + iη_jk) = e^{iτ}, τ = 0.05", 1e-8, |_| {
        let d = square.map_err(Failure::from)?;
        let c = C64::from_polar(1.0, 0.05);
        let bc = |x: &[f64]| 0.5 * (x[0] * x[0] + x[1] * x[1]);
        let r = solver::solve_complexified_ma(&d, c, &bc, &SolverOptions::default())?;
        let res = r.final_residual();
        let len = r.phi.len();
        solved = Some(r.complexified());
        measured(res, len)
    });
    let square2 = Domain::<f64>::cube(2, -0.5, 0.5).map(|d| d.halton_points(8, 0.3));
    s.check("gross-invariance", "Ω_W ∧ Ω̄_W is independent of η", 1e-12, |sc| {
        let cp = solved.ok_or_else(|| Failure::Other("no complexified solution".into()))?;
        let pts = square2.map_err(Failure::from)?;
        let (r1, _, phase) = mir::gross_bfield_checks(&cp, &pts)?;
        sc.calibrate("phase", phase);
        measured(r1, pts.len())
    });
    let n = s.env.n();
    s.check("quadratic-eta", "Ω_W ∧ Ω̄_W and the phase for η = t|x|²/2", 1e-12, |_| {
        let t = 0.4;
        let eta = ScalarField::quadratic(Mat::identity(n).scale(t));
        let target = C64::new(1.0, t).powu(n as u32);
        let cp = ComplexifiedPotential::new(Potential::flat(n), eta, target);
        let (r1, r2, _) = mir::gross_bfield_checks(&cp, &samples)?;
        measured(r1.max(r2), samples.len())
    });
}
