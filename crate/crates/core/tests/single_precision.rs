use semiflat::hyperkahler::{build, quaternion_residuals};
use semiflat::mirror::{inversion_sign, transform_matrix};
use semiflat::{ma_residual, Domain32, Mat32, Potential32};

#[test]
fn core_paths_instantiate_in_f32() {
    let pot = Potential32::exp_tilt(2, 0.3);
    let jet = pot.jet_at(&[0.1, -0.2]).unwrap();
    let d = Domain32::cube(2, -1.0, 1.0).unwrap();
    assert!(d.contains(&[0.1, -0.2]));
    assert!(jet.inverse_hessian.matmul(&jet.hessian).sub(&Mat32::identity(2)).max_abs() < 1e-6);
    assert!(ma_residual(&Potential32::flat(2).jet_at(&[0.0, 0.0]).unwrap(), 1.0) < 1e-6);

    let t = transform_matrix(&jet);
    let mut inv = jet.clone();
    std::mem::swap(&mut inv.hessian, &mut inv.inverse_hessian);
    let tt = transform_matrix(&inv).matmul(&t);
    let s = num_complex::Complex::new(inversion_sign(2) as f32, 0.0);
    assert!(tt.sub(&semiflat::Mat::identity(16).scale(s)).max_abs() < 1e-5);

    let f = build(&jet, &[0.1, -0.2, 0.0, 0.0, 0.3, 0.1, -0.4, 0.2]).unwrap();
    assert!(quaternion_residuals(&f).iter().all(|r| *r < 1e-5));
}
