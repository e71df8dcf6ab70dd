use qpresp::kam::ledger::{varpi_majorant, varpi};

#[test]
fn varpi_at_unit_parameters_matches_closed_form() {
    let q = (-1.0f64).exp();
    let exact = 2.0 * q / (1.0 - q).powi(2);
    let v = varpi(1, 1.0, 1.0).unwrap();
    assert!((v.value - exact).abs() < 1e-12);
    assert!((v.value - 1.841347).abs() < 1e-6);
    assert!(v.tail < 1e-15);
}

#[test]
fn closed_form_majorant_at_unit_parameters() {
    let b = varpi_majorant(1, 1.0, 1.0).unwrap();
    assert!((b - 20.0 / (3.0 * std::f64::consts::E)).abs() < 1e-12);
    assert!(b >= varpi(1, 1.0, 1.0).unwrap().value);
}

#[test]
fn majorant_holds_on_the_parameter_grid() {
    for d in [1usize, 2] {
        for tau in [1.0, 2.0, 3.0] {
            for nu in [0.5, 1.0] {
                let v = varpi(d, tau, nu).unwrap().value;
                let b = varpi_majorant(d, tau, nu).unwrap();
                assert!(v <= b, "d={d} tau={tau} nu={nu}: {v} > {b}");
            }
        }
    }
}

#[test]
fn two_dimensional_sum_matches_brute_force() {
    let (tau, rho) = (1.5, 0.7);
    let mut brute = 0.0;
    for k1 in -120i32..=120 {
        for k2 in -120i32..=120 {
            let n = (k1.abs() + k2.abs()) as f64;
            if n > 0.0 {
                brute += (-rho * n).exp() * n.powf(tau);
            }
        }
    }
    let v = varpi(2, tau, rho).unwrap().value;
    assert!((v - brute).abs() < 1e-10 * brute, "{v} vs {brute}");
}

#[test]
fn varpi_decreases_in_rho() {
    let mut last = f64::INFINITY;
    for i in 1..20 {
        let v = varpi(2, 1.2, 0.1 * i as f64).unwrap().value;
        assert!(v < last);
        last = v;
    }
}
