use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use semiflat::automorphisms::*;
use semiflat::{Domain, Mat, MirrorContext, Potential};

fn ctx(p: Potential<f64>) -> MirrorContext<f64> {
    MirrorContext::new(p, Domain::cube(2, -1.0, 1.0).unwrap()).unwrap()
}

fn shear(e: f64) -> BaseMap<f64> {
    BaseMap::from_jet_fn(2, move |x| vec![x[0] + x[1] * x[1] * e, x[1] + x[0] * x[0] * (0.5 * e)])
}

fn rotation(t: f64) -> BaseMap<f64> {
    let (c, s) = (t.cos(), t.sin());
    BaseMap::affine(Mat::from_fn(2, 2, |i, j| [[c, -s], [s, c]][i][j]), vec![0.0, 0.0])
}

fn samples(count: usize, seed: u64, r: f64) -> Vec<(Vec<f64>, Vec<f64>)> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..count)
        .map(|_| {
            let x = (0..2).map(|_| rng.gen_range(-r..r)).collect();
            let y = (0..2).map(|_| rng.gen_range(-1.0..1.0)).collect();
            (x, y)
        })
        .collect()
}

#[test]
fn b_lift_is_functorial() {
    let maps = [shear(0.1), rotation(0.4), shear(-0.05)];
    let chain = maps[0].compose(&maps[1]).compose(&maps[2]);
    let lifted = induce_b(&maps[0]).compose(&induce_b(&maps[1])).compose(&induce_b(&maps[2]));
    let d = map_distance(&induce_b(&chain), &lifted, &samples(100, 1, 0.4)).unwrap();
    assert!(d < 1e-12, "{d}");
}

#[test]
fn a_lift_is_functorial() {
    let c = ctx(Potential::exp_tilt(2, 0.3));
    let pair = LegendrePair::of(&c);
    let maps = [shear(0.1), rotation(0.3), shear(-0.05)];
    let chain = maps[0].compose(&maps[1]).compose(&maps[2]);
    let lifted = induce_a(&maps[0], &pair).compose(&induce_a(&maps[1], &pair)).compose(&induce_a(&maps[2], &pair));
    let pts: Vec<_> = samples(20, 2, 0.3).into_iter().map(|(x, y)| (pair.to_dual.value(&x).unwrap(), y)).collect();
    let d = map_distance(&induce_a(&chain, &pair), &lifted, &pts).unwrap();
    assert!(d < 1e-10, "{d}");
}

#[test]
fn holomorphy_dichotomy() {
    for (f, affine) in [(rotation(0.7), true), (shear(0.1), false)] {
        let mut worst: f64 = 0.0;
        for (x, y) in samples(10, 3, 0.5) {
            let r = dbar_b_residual(&f, &x, &y, 1.0).unwrap();
            assert!(r.fd_deviation < 1e-7);
            worst = worst.max(r.formula.max_abs());
        }
        assert_eq!(worst == 0.0, affine);
    }
}

#[test]
fn varpi_dichotomy() {
    let c = ctx(Potential::flat(2));
    let pair = LegendrePair::of(&c);
    for (f, affine) in [(rotation(0.7), true), (shear(0.1), false)] {
        let fh = pair.hat(&f, vec![0.0, 0.0]);
        let mut worst: f64 = 0.0;
        for (x, y) in samples(10, 4, 0.4) {
            let r = varpi_residual(&fh, &x, &y).unwrap();
            assert!(r.fd_deviation < 1e-7);
            worst = worst.max(r.formula.max_abs());
        }
        assert_eq!(worst < AFFINE_THRESHOLD, affine, "{worst}");
    }
}

#[test]
fn non_affine_a_lift_stays_symplectic() {
    let c = ctx(Potential::exp_tilt(2, 0.3));
    let pair = LegendrePair::of(&c);
    let fa = induce_a(&shear(0.1), &pair);
    for (x, y) in samples(5, 5, 0.3) {
        let p = pair.to_dual.value(&x).unwrap();
        assert!(symplectic_residual(&fa, &p, &y).unwrap() < 1e-8);
    }
}

#[test]
fn flip_of_b_lift_is_a_lift_of_dual_conjugate() {
    let c = ctx(Potential::exp_tilt(2, 0.3));
    let pair = LegendrePair::of(&c);
    let f = rotation(0.2).compose(&BaseMap::affine(Mat::identity(2).scale(0.9), vec![0.05, 0.0]));
    let pts = samples(20, 6, 0.3);
    let base: Vec<_> = pts.iter().map(|(x, _)| x.clone()).collect();
    let flipped = mirror_flip(&induce_b(&f), &base).unwrap();
    // On W the base coordinates are those of D*, and the A-lift runs through ∇ψ then ∇φ.
    let f_check = pair.conjugate(&f);
    let a_on_w = induce_a(&f_check, &pair.swapped());
    assert!(map_distance(&flipped, &a_on_w, &pts).unwrap() < 1e-10);
    let back = mirror_flip(&flipped, &base).unwrap();
    assert!(map_distance(&back, &induce_b(&f), &pts).unwrap() < 1e-10);
}

#[test]
fn isometries_give_equal_lifts_and_flip_to_isometries() {
    let c = ctx(Potential::radial(2));
    let f = rotation(0.6);
    let pts = samples(10, 7, 0.4);
    let base: Vec<_> = pts.iter().map(|(x, _)| x.clone()).collect();
    assert!(base_isometry_residual(&f, &c, &base).unwrap() < 1e-12);
    assert!(isometry_bridge_residual(&f, &c, &pts).unwrap() < 1e-9);
    let flipped = mirror_flip(&induce_b(&f), &base).unwrap();
    let g_w = |x: &[f64]| {
        let j = c.potential.jet_at(x)?;
        Ok((j.hessian, j.inverse_hessian))
    };
    for (x, y) in &pts {
        assert!(metric_pullback_residual(&flipped, x, y, g_w).unwrap() < 1e-8);
    }
    // A non-isometry fails both.
    assert!(isometry_bridge_residual(&shear(0.1), &c, &pts).unwrap() > 1e-3);
}

#[test]
fn out_of_domain_maps_are_rejected() {
    let d = Domain::cube(2, -1.0, 1.0).unwrap();
    let f = BaseMap::affine(Mat::identity(2).scale(3.0), vec![0.0, 0.0]);
    assert!(matches!(f.validate(&d, &[vec![0.5, 0.5]]), Err(AutomorphismError::OutOfDomain { .. })));
}
