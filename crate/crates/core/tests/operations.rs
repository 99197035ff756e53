use std::f64::consts::PI;

use hodge_proj::curves::{Chart, Curve, CurveSpec, Sheet, SurfacePoint};
use hodge_proj::kernel::{
    a_normalize, base_kernel, intrinsic_kernel, normalized_values, slice_periods,
};
use hodge_proj::make_curve;
use hodge_proj::moduli::eta_coefficient_genus1;
use hodge_proj::periods::period_matrices;
use hodge_proj::projective::{
    connection_difference, connection_from_kernel, schwarzian, uniformization_genus1, FnMap,
    JetConfig,
};
use hodge_proj::special::Modulus;
use hodge_proj::Error;
use num_complex::Complex64;

fn c(re: f64, im: f64) -> Complex64 {
    Complex64::new(re, im)
}

/// `eta1 = (pi^2 / 3) E2(tau)` with `E2 = 1 - 24 sum n q^n / (1 - q^n)`.
fn eta1_lambert(tau: Complex64) -> Complex64 {
    let q = (c(0.0, 2.0 * PI) * tau).exp();
    let mut sum = c(0.0, 0.0);
    let mut qn = q;
    for n in 1..400 {
        sum += qn * n as f64 / (c(1.0, 0.0) - qn);
        qn *= q;
    }
    (c(1.0, 0.0) - sum * 24.0) * (PI * PI / 3.0)
}

fn genus2() -> Curve {
    make_curve(&CurveSpec::Hyperelliptic {
        coeffs: vec![[0.0, 0.0], [4.0, 0.0], [0.0, 0.0], [-5.0, 0.0], [0.0, 0.0], [1.0, 0.0]],
    })
    .unwrap()
}

#[test]
fn curve_construction() {
    let t = make_curve(&CurveSpec::Elliptic { tau: [0.0, 1.0] }).unwrap();
    assert_eq!(t.genus(), 1);
    let h = genus2();
    assert_eq!(h.genus(), 2);
    let roots = h.as_hyperelliptic().unwrap().roots();
    for (r, e) in roots.iter().zip([-2.0, -1.0, 0.0, 1.0, 2.0]) {
        assert!((r - e).norm() < 1e-12);
    }
    // x^2 (x - 1) (x + 1) (x - 2)
    let double = make_curve(&CurveSpec::Hyperelliptic {
        coeffs: vec![[0.0, 0.0], [0.0, 0.0], [2.0, 0.0], [1.0, 0.0], [-2.0, 0.0], [0.0, 0.0]],
    });
    assert!(double.is_err());
    let double = Curve::hyperelliptic_from_roots(c(1.0, 0.0), &[-1.0, 0.0, 0.0, 1.0, 2.0].map(|e| c(e, 0.0)));
    assert!(matches!(double, Err(Error::DegenerateCurve(_))));
    assert!(matches!(
        make_curve(&CurveSpec::Elliptic { tau: [0.3, -1.0] }),
        Err(Error::BadModulus { .. })
    ));
}

#[test]
fn torus_connection_matches_eisenstein_series() {
    for tau in [c(0.0, 2.0), c(0.3, 1.1), c(-0.45, 0.95)] {
        let e = eta_coefficient_genus1(tau, &JetConfig::default()).unwrap();
        let oracle = (eta1_lambert(tau) - PI / tau.im) * 6.0;
        assert!((e.value - oracle).norm() < 1e-7, "{tau}: {} vs {oracle}", e.value);
    }
    let square = eta_coefficient_genus1(c(0.0, 1.0), &JetConfig::default()).unwrap();
    assert!(square.value.norm() < 1e-7);
    let off = eta_coefficient_genus1(c(0.0, 2.0), &JetConfig::default()).unwrap();
    assert!(off.value.norm() > 1.0);
}

#[test]
fn torus_connection_is_constant_and_differs_from_flat() {
    let tau = c(0.0, 2.0);
    let curve = Curve::elliptic(tau).unwrap();
    let pd = period_matrices(&curve).unwrap();
    let k = intrinsic_kernel(&curve, &pd).unwrap();
    let zs: Vec<Complex64> = (0..10).map(|s| c(0.09 * s as f64, 0.17 * s as f64)).collect();
    let pts: Vec<SurfacePoint> = zs.iter().map(|&z| SurfacePoint::Torus(z)).collect();
    let s = connection_from_kernel(&k, Chart::FlatZ, &pts, &JetConfig::default()).unwrap();
    let mean = s.iter().map(|x| x.value).sum::<Complex64>() / 10.0;
    let var = s.iter().map(|x| (x.value - mean).norm_sqr()).sum::<f64>() / 10.0;
    assert!(var < 1e-8);
    let flat = uniformization_genus1(&Modulus::new(tau).unwrap(), &zs);
    assert!(flat.iter().all(|x| x.value.norm() == 0.0));
    let oracle = (eta1_lambert(tau) - PI / 2.0) * 6.0;
    assert!((mean - flat[0].value - oracle).norm() < 1e-7);
}

#[test]
fn bergman_and_eta_connections_differ_by_hodge_term() {
    let curve = genus2();
    let pd = period_matrices(&curve).unwrap();
    let eta = intrinsic_kernel(&curve, &pd).unwrap();
    let bergman = a_normalize(&base_kernel(&curve).unwrap(), &pd).unwrap();
    let y_inv = pd.im_tau().try_inverse().unwrap();
    for x in [c(0.5, 1.3), c(3.0, 0.0), c(-1.2, -0.8)] {
        let p = curve.point_on_sheet(x, Sheet::Plus).unwrap();
        let q = connection_difference(&eta, &bergman, Chart::AffineX(Sheet::Plus), &p, &JetConfig::default())
            .unwrap();
        let v = normalized_values(&eta, &p, &pd).unwrap();
        let mut form = c(0.0, 0.0);
        for j in 0..2 {
            for l in 0..2 {
                form += v[j] * v[l] * y_inv[(j, l)];
            }
        }
        let expected = form * (-6.0 * PI);
        assert!((q.value - expected).norm() < 1e-6 * expected.norm().max(1.0), "{} vs {expected}", q.value);
    }
}

#[test]
fn slice_a_periods() {
    let curve = genus2();
    let pd = period_matrices(&curve).unwrap();
    let bergman = a_normalize(&base_kernel(&curve).unwrap(), &pd).unwrap();
    let eta = intrinsic_kernel(&curve, &pd).unwrap();
    let y_inv = pd.im_tau().try_inverse().unwrap();
    let p = curve.point_on_sheet(c(3.0, 0.0), Sheet::Plus).unwrap();
    let pv = slice_periods(&bergman, &p, &pd).unwrap();
    assert!(pv.a.iter().all(|a| a.norm() < 1e-6));
    let v = normalized_values(&eta, &p, &pd).unwrap();
    for i in 0..2 {
        assert!((pv.b[i] - c(0.0, 2.0 * PI) * v[i]).norm() < 1e-6);
    }
    let pv = slice_periods(&eta, &p, &pd).unwrap();
    for i in 0..2 {
        let expected: Complex64 = (0..2).map(|j| v[j] * y_inv[(i, j)]).sum::<Complex64>() * -PI;
        assert!((pv.a[i] - expected).norm() < 1e-6);
    }
    // Base points on a cycle are rejected.
    let on_cycle = curve.point_on_sheet(c(-1.5, 0.0), Sheet::Plus).unwrap();
    assert!(matches!(
        slice_periods(&eta, &on_cycle, &pd),
        Err(Error::PoleOnPath { .. })
    ));
}

#[test]
fn schwarzian_of_exponential() {
    let exp = FnMap {
        f: |w: Complex64| Ok(w.exp()),
        radius: 0.5,
    };
    for w in [c(0.0, 0.0), c(1.3, -0.4)] {
        assert!((schwarzian(&exp, w).unwrap() + 0.5).norm() < 1e-10);
    }
}
