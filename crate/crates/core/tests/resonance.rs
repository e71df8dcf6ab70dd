use num_complex::Complex64;
use proptest::prelude::*;
use qpresp::demo;
use qpresp::kam::Schedule;
use qpresp::resonance::{excluded_parameters, lipschitz_separation_check, lipschitz_separation_check_scaled, real_shift_measure, resonant_set_scan, ScanOptions};
use qpresp::system::SystemSpec;
use qpresp::torus::Frequency;

fn sched() -> Schedule {
    demo::schedule(0.25)
}

fn golden() -> Frequency {
    Frequency::new(vec![1.0, demo::GOLDEN], 0.1, 1.2).unwrap()
}

fn grid(lo: f64, hi: f64, n: usize) -> Vec<f64> {
    (0..n).map(|i| lo + (hi - lo) * (i as f64 + 0.5) / n as f64).collect()
}

#[test]
fn real_shift_is_never_flagged_below_its_own_size() {
    // |i<k,w> - eps| >= eps, and every threshold here is below 0.05
    let s = sched();
    let pts = resonant_set_scan(&golden(), |e| Complex64::new(e, 0.0), &s, 0, 30, &grid(0.05, 0.5, 500));
    assert!(pts.iter().all(|p| !p.flagged));
}

#[test]
fn single_mode_counter_case_flags_near_the_mode() {
    let freq = Frequency::new(vec![0.01], 0.1, 0.5).unwrap();
    let s = sched();
    let width = s.threshold(0, 1);
    let pts = resonant_set_scan(&freq, |e| Complex64::new(0.0, e), &s, 0, 1, &grid(0.0, 0.03, 3000));
    for p in &pts {
        assert_eq!(p.flagged, (p.eps - 0.01).abs() < width, "eps = {}", p.eps);
    }
    assert!(pts.iter().any(|p| p.flagged));
    let unit = Frequency::new(vec![1.0], 0.1, 0.5).unwrap();
    let pts = resonant_set_scan(&unit, |e| Complex64::new(0.0, e), &s, 0, 1, &grid(0.0, 0.9, 900));
    assert!(pts.iter().all(|p| !p.flagged));
}

#[test]
fn measure_shrinks_with_delta() {
    let s = sched();
    let mut last = f64::INFINITY;
    for delta in [0.4, 0.2, 0.1, 0.05, 0.01] {
        let m = real_shift_measure(&golden(), &s, delta, 30, 6);
        assert!(m <= last && m <= delta);
        last = m;
    }
    assert_eq!(real_shift_measure(&golden(), &s, 1e-4, 30, 6), 0.0);
}

#[test]
fn hyperbolic_demo_excludes_nothing() {
    let spec = SystemSpec::from_record(&demo::hyperbolic()).unwrap();
    let scan = excluded_parameters(&spec, 0.1, &demo::options(spec.rho), &ScanOptions { eps_lo: 0.0, cells: 64, m_cap: 12, x_init: vec![0.0, 0.0] }).unwrap();
    assert_eq!(scan.excluded_fraction, 0.0);
    assert_eq!(scan.cells.len(), 64);
}

#[test]
fn elliptic_demo_fraction_shrinks() {
    let spec = SystemSpec::from_record(&demo::elliptic()).unwrap();
    let opts = demo::options(spec.rho);
    let run = |eps1: f64| excluded_parameters(&spec, eps1, &opts, &ScanOptions { eps_lo: 0.0, cells: 256, m_cap: 12, x_init: vec![0.0, 0.0] }).unwrap();
    let (a, b) = (run(0.1), run(0.05));
    assert!(a.excluded_fraction > b.excluded_fraction, "{} vs {}", a.excluded_fraction, b.excluded_fraction);
    assert!(a.excluded_fraction < 0.2 && b.excluded_fraction < 0.2);
    let sum: f64 = a.cells.iter().map(|c| c.excluded).sum();
    assert!((sum - a.excluded_measure).abs() < 1e-15);
    assert!(a.excluded_measure <= a.eps1);
    for w in a.cells.windows(2) {
        assert_eq!(w[0].eps_hi, w[1].eps_lo);
    }
}

#[test]
fn separation_examples() {
    let eps: Vec<f64> = grid(0.01, 0.1, 20);
    let constant: Vec<_> = eps.iter().map(|&e| (e, Complex64::new(1.0, 0.0))).collect();
    assert!(lipschitz_separation_check(&constant, 1.0).unwrap().holds);
    let drifting: Vec<_> = eps.iter().map(|&e| (e, Complex64::new(0.0, 1.0 + 0.1 * e))).collect();
    assert!(lipschitz_separation_check(&drifting, 1.0).unwrap().holds);
    let pathological: Vec<_> = eps.iter().map(|&e| (e, Complex64::new(1.0 / e, 0.0))).collect();
    let v = lipschitz_separation_check(&pathological, 1.0).unwrap();
    assert!(!v.holds && v.worst_ratio < 1e-10);
    assert!(lipschitz_separation_check(&constant[..2], 1.0).is_err());
}

#[test]
fn scaled_separation_window() {
    let eps1: f64 = 0.1;
    let e: Vec<f64> = grid(0.0, 0.1, 200);
    // |d/de (e^2 * c / e)| = c, so the check needs c >= eps1^2 (a0 = 2)
    let good: Vec<_> = e.iter().map(|&x| (x, Complex64::new(0.5 / x, 0.0))).collect();
    assert!(lipschitz_separation_check_scaled(&good, 2.0, eps1, 1.5).unwrap().holds);
    let bad: Vec<_> = e.iter().map(|&x| (x, Complex64::new(1e-3 / x, 0.0))).collect();
    assert!(!lipschitz_separation_check_scaled(&bad, 2.0, eps1, 1.5).unwrap().holds);
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(48))]

    #[test]
    fn larger_mode_range_never_unflags(re in -0.2f64..0.2, im in -1.0f64..1.0, k in 1u32..15, extra in 1u32..10) {
        let s = sched();
        let g = grid(0.001, 0.2, 40);
        let phi = |e: f64| Complex64::new(re * e, im * e + 0.05);
        let small = resonant_set_scan(&golden(), phi, &s, 0, k, &g);
        let large = resonant_set_scan(&golden(), phi, &s, 0, k + extra, &g);
        for (a, b) in small.iter().zip(&large) {
            prop_assert!(!a.flagged || b.flagged);
        }
    }

    #[test]
    fn later_steps_flag_inside_the_first(re in -0.2f64..0.2, im in -1.0f64..1.0, m in 1usize..6) {
        let s = sched();
        let g = grid(0.001, 0.2, 40);
        let phi = |e: f64| Complex64::new(re * e, im * e + 0.05);
        let first = resonant_set_scan(&golden(), phi, &s, 0, 20, &g);
        let later = resonant_set_scan(&golden(), phi, &s, m, 20, &g);
        for (a, b) in first.iter().zip(&later) {
            prop_assert!(!b.flagged || a.flagged);
        }
    }
}
