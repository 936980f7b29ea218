use num_complex::Complex;
use proptest::prelude::*;
use semiflat::automorphisms::{BaseMap, VJet2};
use semiflat::exterior::ExteriorVec;
use semiflat::forms::{operator_matrix, OperatorTag, Side};
use semiflat::hyperkahler::{build, compatibility_residual, quaternion_residuals};
use semiflat::mirror::{inversion_sign, transform_matrix};
use semiflat::{Domain, Mat, Potential};

fn spd(n: usize, entries: &[f64]) -> Mat<f64> {
    let b = Mat::from_fn(n, n, |i, j| entries[i * n + j]);
    b.transpose().matmul(&b).add(&Mat::identity(n))
}

fn random_vec(m: usize, seed: &[f64]) -> ExteriorVec<f64> {
    let mut v = ExteriorVec::zero(m);
    for k in 0..1usize << m {
        let a = seed[k % seed.len()] * (1.0 + k as f64).sin();
        let b = seed[(k + 1) % seed.len()] * (2.0 + k as f64).cos();
        *v.coeff_mut(k as u32) = Complex::new(a, b);
    }
    v
}

fn point(n: usize) -> impl Strategy<Value = Vec<f64>> {
    prop::collection::vec(-0.8..0.8f64, n)
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(32))]

    #[test]
    fn legendre_dual_of_quadratic_has_inverse_hessian(e in prop::collection::vec(-1.0..1.0f64, 4), p in point(2)) {
        let a = spd(2, &e);
        let pot = Potential::quadratic(a.clone());
        let dual = semiflat::legendre_dual(&pot, &Domain::cube(2, -1.0, 1.0).unwrap()).unwrap();
        let j = dual.jet_at(&p).unwrap();
        prop_assert!(j.hessian.sub(&a.inverse().unwrap()).max_abs() < 1e-12);
    }

    #[test]
    fn legendre_gradients_are_inverse(a in 0.0..0.5f64, x in point(2)) {
        let pot = Potential::exp_tilt(2, a);
        let dual = semiflat::legendre_dual(&pot, &Domain::cube(2, -1.0, 1.0).unwrap()).unwrap();
        let p = pot.gradient(&x).unwrap();
        let back = dual.inverse_gradient(&p).unwrap();
        for k in 0..2 {
            prop_assert!((back[k] - x[k]).abs() < 1e-12);
        }
    }

    #[test]
    fn wedge_is_associative(s1 in prop::collection::vec(-1.0..1.0f64, 5), s2 in prop::collection::vec(-1.0..1.0f64, 5), s3 in prop::collection::vec(-1.0..1.0f64, 5)) {
        let (a, b, c) = (random_vec(4, &s1), random_vec(4, &s2), random_vec(4, &s3));
        let l = a.wedge(&b).wedge(&c);
        let r = a.wedge(&b.wedge(&c));
        prop_assert!(l.sub(&r).max_abs() < 1e-12);
    }

    #[test]
    fn contraction_is_adjoint_to_wedge(s1 in prop::collection::vec(-1.0..1.0f64, 5), s2 in prop::collection::vec(-1.0..1.0f64, 5), k in 0usize..4) {
        let (a, b) = (random_vec(4, &s1), random_vec(4, &s2));
        let pair = |u: &ExteriorVec<f64>, v: &ExteriorVec<f64>| {
            u.coeffs().iter().zip(v.coeffs()).fold(Complex::new(0.0, 0.0), |s, (x, y)| s + x.conj() * y)
        };
        let lhs = pair(&a.wedge_gen(k), &b);
        let rhs = pair(&a, &b.contract_gen(k));
        prop_assert!((lhs - rhs).norm() < 1e-12);
    }

    #[test]
    fn mirror_transform_squares_to_sign(a in 0.0..0.5f64, x in point(2)) {
        let jet = Potential::exp_tilt(2, a).jet_at(&x).unwrap();
        let t = transform_matrix(&jet);
        let mut inv = jet.clone();
        std::mem::swap(&mut inv.hessian, &mut inv.inverse_hessian);
        let tt = transform_matrix(&inv).matmul(&t);
        let s = Complex::new(inversion_sign(2) as f64, 0.0);
        prop_assert!(tt.sub(&Mat::identity(16).scale(s)).max_abs() < 1e-12);
    }

    #[test]
    fn mirror_transform_exchanges_the_two_triples(a in 0.0..0.5f64, x in point(2)) {
        let jet = Potential::exp_tilt(2, a).jet_at(&x).unwrap();
        let t = transform_matrix(&jet);
        let pairs = [
            (OperatorTag::LA, OperatorTag::LB),
            (OperatorTag::LambdaA, OperatorTag::LambdaB),
            (OperatorTag::HA, OperatorTag::HB),
            (OperatorTag::LB, OperatorTag::LA),
            (OperatorTag::LambdaB, OperatorTag::LambdaA),
            (OperatorTag::HB, OperatorTag::HA),
        ];
        for (w, m) in pairs {
            let lhs = operator_matrix(w, &jet, Side::W).matmul(&t);
            let rhs = t.matmul(&operator_matrix(m, &jet, Side::M));
            prop_assert!(lhs.sub(&rhs).max_abs() < 1e-11, "{:?}", w);
        }
    }

    #[test]
    fn sl2_triples_commute(a in 0.0..0.5f64, x in point(2)) {
        let jet = Potential::exp_tilt(2, a).jet_at(&x).unwrap();
        for side in [Side::M, Side::W] {
            for p in [OperatorTag::LA, OperatorTag::LambdaA, OperatorTag::HA] {
                for q in [OperatorTag::LB, OperatorTag::LambdaB, OperatorTag::HB] {
                    let c = operator_matrix(p, &jet, side).commutator(&operator_matrix(q, &jet, side));
                    prop_assert!(c.max_abs() < 1e-11);
                }
            }
        }
    }

    #[test]
    fn hyperkahler_relations_at_random_points(a in 0.0..0.5f64, x in point(2), fiber in prop::collection::vec(-2.0..2.0f64, 6)) {
        let jet = Potential::exp_tilt(2, a).jet_at(&x).unwrap();
        let mut pt = x.clone();
        pt.extend(fiber);
        let f = build(&jet, &pt).unwrap();
        prop_assert!(quaternion_residuals(&f).iter().all(|r| *r < 1e-12));
        prop_assert!(compatibility_residual(&f) < 1e-12);
    }

    #[test]
    fn jet_inverse_round_trips(e in prop::collection::vec(-0.3..0.3f64, 4), x in point(2)) {
        let f = BaseMap::from_jet_fn(2, move |v| vec![
            v[0] + v[0] * v[1] * e[0] + v[1] * e[1],
            v[1] + v[0] * v[0] * e[2] + v[0] * e[3],
        ]);
        let j = f.jet(&x).unwrap();
        let inv = j.invert(&x).unwrap();
        let id = VJet2::compose(&inv, &j);
        prop_assert!(id.d.sub(&Mat::identity(2)).max_abs() < 1e-12);
        prop_assert!(id.max_second() < 1e-12);
    }
}
