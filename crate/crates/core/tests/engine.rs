use nalgebra::DMatrix;
use qpresp::demo;
use qpresp::kam::pipeline::{engine_for, solve};
use qpresp::system::SystemSpec;
use qpresp::torus::{FourierSeries, Truncation};
use qpresp::verify::{linear_fourier_oracle, residual};
use qpresp::Error;

fn spec(name: &str) -> SystemSpec {
    SystemSpec::from_record(&demo::by_name(name).unwrap()).unwrap()
}

fn forcing(spec: &SystemSpec) -> FourierSeries {
    spec.f.constant_term()
}

#[test]
fn linear_demo_matches_the_fourier_oracle() {
    let s = spec("elliptic");
    let sol = solve(&s, demo::DEMO_EPS, &[0.0, 0.0], &demo::options(s.rho)).unwrap();
    assert!(sol.report.converged);
    let x = sol.response_series(&Truncation::new(30, 4)).unwrap();
    let a = DMatrix::from_row_slice(2, 2, &[0.0, 1.0, -1.0, 0.0]);
    let oracle = linear_fourier_oracle(&a, &forcing(&s), demo::DEMO_EPS, &s.freq).unwrap();
    let dist = x.max_coeff_distance(&oracle);
    assert!(dist <= 1e-10, "coefficient distance {dist:e}");
    assert!(residual(&s, &oracle, demo::DEMO_EPS, 16).unwrap() <= 1e-12);
}

#[test]
fn nonlinear_demo_contracts_quadratically() {
    let s = spec("nonlinear");
    let mut opts = demo::options(s.rho);
    opts.engine.schedule.p_tol = 0.0;
    let (_, _, _, _, mut engine) = engine_for(&s, demo::DEMO_EPS, &[0.0, 0.0], &opts).unwrap();
    for _ in 0..6 {
        engine.step().unwrap();
    }
    let steps = engine.steps();
    for w in steps.windows(2) {
        assert!(w[1].p_decay < w[0].p_decay, "decay not decreasing at m = {}", w[1].m);
    }
    let c = steps.windows(2).map(|w| w[1].norm_p / (w[0].norm_p * w[0].norm_p)).fold(0.0, f64::max);
    assert!(c.is_finite() && c < 1e3, "contraction constant {c}");
}

#[test]
fn nonlinear_demo_residual_on_a_fine_grid() {
    let s = spec("nonlinear");
    let sol = solve(&s, demo::DEMO_EPS, &[0.0, 0.0], &demo::options(s.rho)).unwrap();
    assert!(sol.report.converged);
    let (abs, _) = sol.residual(64).unwrap();
    assert!(abs <= 1e-8, "residual {abs:e}");
    let x = sol.response_series(&Truncation::new(30, 4)).unwrap();
    assert!(residual(&s, &x, demo::DEMO_EPS, 64).unwrap() <= 1e-8);
}

#[test]
fn solver_residuals_and_conjugacy_at_every_step() {
    for name in ["elliptic", "nonlinear"] {
        let s = spec(name);
        let sol = solve(&s, demo::DEMO_EPS, &[0.0, 0.0], &demo::options(s.rho)).unwrap();
        for st in &sol.report.steps {
            assert!(st.homological_residual <= 1e-12, "{name} m={} hom {:e}", st.m, st.homological_residual);
            assert!(st.sylvester_residual <= 1e-12, "{name} m={} syl {:e}", st.m, st.sylvester_residual);
            let c = st.conjugacy_defect.expect("conjugacy sampled");
            assert!(c <= 1e-8, "{name} m={} conjugacy {c:e}", st.m);
        }
    }
}

#[test]
fn iteration_invariants() {
    let s = spec("nonlinear");
    let mut opts = demo::options(s.rho);
    opts.engine.schedule.p_tol = 0.0;
    opts.engine.keep_snapshots = true;
    let (_, _, _, _, mut engine) = engine_for(&s, demo::DEMO_EPS, &[0.0, 0.0], &opts).unwrap();
    for _ in 0..5 {
        engine.step().unwrap();
        let st = engine.state();
        let mean = st.b.mean();
        assert!(mean.iter().all(|c| c.norm() == 0.0), "B has a mean at m = {}", st.m);
    }
    let steps = engine.steps();
    for w in steps.windows(2) {
        assert!(w[1].r <= w[0].r);
        assert!(w[1].k_curv >= w[0].k_curv);
    }
    assert_eq!(engine.snapshots().len(), 5);
}

#[test]
fn reports_are_deterministic() {
    let s = spec("nonlinear");
    let opts = demo::options(s.rho);
    let a = solve(&s, demo::DEMO_EPS, &[0.0, 0.0], &opts).unwrap();
    let b = solve(&s, demo::DEMO_EPS, &[0.0, 0.0], &opts).unwrap();
    assert_eq!(serde_json::to_string(&a.report).unwrap(), serde_json::to_string(&b.report).unwrap());
}

#[test]
fn hyperbolic_demo_converges() {
    let s = spec("hyperbolic");
    let sol = solve(&s, 1e-2, &[0.0, 0.0], &demo::options(s.rho)).unwrap();
    assert!(sol.report.converged);
    assert!(sol.residual(16).unwrap().0 <= 1e-8);
}

#[test]
fn strict_ledger_surfaces_violations_as_errors() {
    let s = spec("nonlinear");
    let mut opts = demo::options(s.rho);
    opts.engine.strict_ledger = true;
    match solve(&s, demo::DEMO_EPS, &[0.0, 0.0], &opts) {
        Ok(sol) => assert!(sol.report.ledger.all_hold()),
        Err(e) => assert!(matches!(e, Error::LedgerViolation(_)), "{e}"),
    }
}
