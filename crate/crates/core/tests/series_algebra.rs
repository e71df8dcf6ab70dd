use num_complex::Complex64;
use proptest::prelude::*;
use qpresp::torus::{FourierSeries, Shape, Truncation};

const RHO: f64 = 0.3;

fn series() -> impl Strategy<Value = FourierSeries> {
    prop::collection::vec(((-4i32..=4, -4i32..=4), -1.0f64..1.0, -1.0f64..1.0), 0..12).prop_map(|terms| {
        let mut s = FourierSeries::zero(2, Shape::vector(1), RHO);
        for ((k1, k2), re, im) in terms {
            let prev = s.coeff(&[k1, k2]).map(|v| v[0]).unwrap_or_default();
            s.insert(&[k1, k2], &[prev + Complex64::new(re, im)]).unwrap();
        }
        s
    })
}

fn real_series() -> impl Strategy<Value = FourierSeries> {
    series().prop_map(|mut s| {
        s.realify();
        s
    })
}

fn angles() -> impl Strategy<Value = Vec<f64>> {
    prop::collection::vec(0.0f64..std::f64::consts::TAU, 2)
}

proptest! {
    #[test]
    fn norm_is_subadditive(a in series(), b in series()) {
        let sum = a.add(&b).unwrap().norm();
        prop_assert!(sum <= a.norm() + b.norm() + 1e-12);
    }

    #[test]
    fn norm_is_submultiplicative(a in series(), b in series()) {
        let prod = a.mul(&b, &Truncation::new(16, 0)).unwrap();
        prop_assert!(prod.norm() <= a.norm() * b.norm() * (1.0 + 1e-12) + 1e-14);
    }

    #[test]
    fn norm_dominates_sup_on_the_real_torus(a in series(), t in angles()) {
        let v = a.eval(&t)[0].norm();
        prop_assert!(v <= a.majorant_norm(0.0).unwrap() + 1e-12);
    }

    #[test]
    fn product_evaluates_pointwise(a in series(), b in series(), t in angles()) {
        let prod = a.mul(&b, &Truncation::new(16, 0)).unwrap();
        let lhs = prod.eval(&t)[0];
        let rhs = a.eval(&t)[0] * b.eval(&t)[0];
        prop_assert!((lhs - rhs).norm() <= 1e-12 * (1.0 + a.norm() * b.norm()));
    }

    #[test]
    fn addition_commutes(a in series(), b in series()) {
        let ab = a.add(&b).unwrap();
        let ba = b.add(&a).unwrap();
        prop_assert!(ab.max_coeff_distance(&ba) == 0.0);
    }

    #[test]
    fn realified_series_evaluate_real(a in real_series(), t in angles()) {
        prop_assert!(a.reality_defect() <= 1e-15);
        prop_assert!(a.eval(&t)[0].im.abs() <= 1e-12);
    }

    #[test]
    fn integration_inverts_the_derivative(a in series()) {
        let omega = [1.0, qpresp::demo::GOLDEN];
        let osc = a.oscillation();
        let u = osc.integrate_along(&omega, 1e-13).unwrap();
        let back = u.derivative_along(&omega);
        prop_assert!(back.max_coeff_distance(&osc) <= 1e-12 * (1.0 + osc.max_abs()));
        prop_assert!(u.mean()[0].norm() == 0.0);
    }

    #[test]
    fn truncation_bounds_the_support(a in series(), b in series(), k in 0u32..8) {
        let prod = a.mul(&b, &Truncation::new(k, 0)).unwrap();
        prop_assert!(prod.max_order() <= k);
    }

    #[test]
    fn record_round_trip_is_lossless(a in series()) {
        let text = serde_json::to_string(&a).unwrap();
        let back: FourierSeries = serde_json::from_str(&text).unwrap();
        prop_assert_eq!(back, a);
    }
}
