use hodge_proj::curves::{Chart, Curve, Sheet, SurfacePoint};
use hodge_proj::kernel::{eval_kernel, holomorphy_residual, intrinsic_kernel};
use hodge_proj::moduli::eta_coefficient_genus1;
use hodge_proj::periods::{cup_product, period_matrices, PeriodVector};
use hodge_proj::projective::{schwarzian, FnMap, JetConfig};
use hodge_proj::special::{quasi_periods, weierstrass_p, Modulus};
use hodge_proj::Result;
use num_complex::Complex64;
use proptest::prelude::*;

fn c(re: f64, im: f64) -> Complex64 {
    Complex64::new(re, im)
}

fn upper_half_plane() -> impl Strategy<Value = Complex64> {
    (-3.0..3.0f64, 0.25..4.0f64).prop_map(|(re, im)| c(re, im))
}

fn unit_cell() -> impl Strategy<Value = (f64, f64)> {
    (0.05..0.95f64, 0.05..0.95f64)
}

fn complex_vec(n: usize) -> impl Strategy<Value = Vec<Complex64>> {
    prop::collection::vec((-5.0..5.0f64, -5.0..5.0f64).prop_map(|(a, b)| c(a, b)), n)
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(48))]

    #[test]
    fn legendre_relation(tau in upper_half_plane()) {
        let m = Modulus::new(tau).unwrap();
        prop_assert!(quasi_periods(&m).unwrap().legendre_residual(&m) < 1e-10);
    }

    #[test]
    fn wp_is_even_and_periodic(tau in upper_half_plane(), (s, t) in unit_cell()) {
        let m = Modulus::new(tau).unwrap();
        let z = tau * s + t;
        let p = weierstrass_p(z, &m).unwrap();
        let scale = p.norm().max(1.0);
        prop_assert!((weierstrass_p(-z, &m).unwrap() - p).norm() < 1e-10 * scale);
        prop_assert!((weierstrass_p(z + 1.0, &m).unwrap() - p).norm() < 1e-10 * scale);
        prop_assert!((weierstrass_p(z + tau, &m).unwrap() - p).norm() < 1e-10 * scale);
    }

    #[test]
    fn torus_kernel_is_symmetric(
        tau in (-0.5..0.5f64, 0.8..2.0f64).prop_map(|(a, b)| c(a, b)),
        (s1, t1) in unit_cell(),
        (s2, t2) in unit_cell(),
    ) {
        let curve = Curve::elliptic(tau).unwrap();
        let pd = period_matrices(&curve).unwrap();
        let k = intrinsic_kernel(&curve, &pd).unwrap();
        let p = SurfacePoint::Torus(tau * s1 + t1);
        let q = SurfacePoint::Torus(tau * s2 + t2 + 0.01);
        match (eval_kernel(&k, &p, &q, Chart::FlatZ), eval_kernel(&k, &q, &p, Chart::FlatZ)) {
            (Ok(a), Ok(b)) => prop_assert!((a - b).norm() < 1e-10 * a.norm().max(1.0)),
            // Points within the pole guard of each other are rejected on both orders.
            (Err(_), Err(_)) => {}
            other => prop_assert!(false, "inconsistent evaluation {other:?}"),
        }
    }

    #[test]
    fn cup_product_is_antisymmetric(a1 in complex_vec(2), b1 in complex_vec(2), a2 in complex_vec(2), b2 in complex_vec(2)) {
        let phi = PeriodVector { a: a1, b: b1 };
        let psi = PeriodVector { a: a2, b: b2 };
        let forward = cup_product(&phi, &psi);
        let backward = cup_product(&psi, &phi);
        prop_assert!((forward + backward).norm() < 1e-12 * forward.norm().max(1.0));
    }

    #[test]
    fn schwarzian_chain_rule(w in (-0.5..0.5f64, -0.5..0.5f64).prop_map(|(a, b)| c(a, b)), a in 0.2..1.5f64) {
        // f = exp, g(w) = w + a w^2; S(f o g) = S(f)(g) g'^2 + S(g).
        let composite = FnMap { f: |v: Complex64| -> Result<Complex64> { Ok((v + v * v * a).exp()) }, radius: 0.05 };
        let g = FnMap { f: |v: Complex64| -> Result<Complex64> { Ok(v + v * v * a) }, radius: 0.05 };
        let gp = w * (2.0 * a) + 1.0;
        prop_assume!(gp.norm() > 0.2);
        let lhs = schwarzian(&composite, w).unwrap();
        let rhs = gp * gp * -0.5 + schwarzian(&g, w).unwrap();
        prop_assert!((lhs - rhs).norm() < 1e-8 * rhs.norm().max(1.0), "{lhs} vs {rhs}");
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(12))]

    #[test]
    fn eta_coefficient_is_translation_invariant(tau in (-0.5..0.5f64, 0.8..2.0f64).prop_map(|(a, b)| c(a, b))) {
        let cfg = JetConfig::default();
        let here = eta_coefficient_genus1(tau, &cfg).unwrap().value;
        let shifted = eta_coefficient_genus1(tau + 1.0, &cfg).unwrap().value;
        prop_assert!((here - shifted).norm() < 1e-7 * here.norm().max(1.0));
    }

    #[test]
    fn eta_kernel_is_holomorphic_in_each_slot(
        x in (-2.5..2.5f64, 0.3..2.0f64).prop_map(|(a, b)| c(a, b)),
        y in (-2.5..2.5f64, -2.0..-0.3f64).prop_map(|(a, b)| c(a, b)),
        minus in any::<bool>(),
    ) {
        let curve = Curve::hyperelliptic_from_roots(
            c(1.0, 0.0),
            &[-2.0, -1.0, 0.0, 1.0, 2.0].map(|e| c(e, 0.0)),
        )
        .unwrap();
        let pd = period_matrices(&curve).unwrap();
        let k = intrinsic_kernel(&curve, &pd).unwrap();
        let sheet = if minus { Sheet::Minus } else { Sheet::Plus };
        let p = curve.point_on_sheet(x, sheet).unwrap();
        let q = curve.point_on_sheet(y, Sheet::Plus).unwrap();
        let r = holomorphy_residual(&k, &p, &q, Chart::AffineX(Sheet::Plus), 1e-5).unwrap();
        prop_assert!(r < 1e-6, "{r}");
    }
}
