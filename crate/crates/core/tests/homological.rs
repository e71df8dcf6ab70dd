use num_complex::Complex64;
use proptest::prelude::*;
use qpresp::averaging::{homological_bound, solve_homological};
use qpresp::demo::GOLDEN;
use qpresp::torus::{FourierSeries, Frequency, Shape, TaylorFourierField};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

const RHO: f64 = 0.25;
const R: f64 = 0.5;

/// Random real field on `T^2 x C^2` with `|f_{k,alpha}| <= e^{-|k|}`.
fn random_field(seed: u64) -> TaylorFourierField {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut f = TaylorFourierField::zero(2, 2, Shape::vector(2), 0, 2, 2.0 * RHO, R);
    for alpha in [[0, 0], [1, 0], [0, 1], [2, 0], [1, 1], [0, 2]] {
        let mut c = FourierSeries::zero(2, Shape::vector(2), 2.0 * RHO);
        for _ in 0..rng.gen_range(1..10) {
            let k = [rng.gen_range(-6..=6), rng.gen_range(-6..=6)];
            let decay = (-((k[0] as i32).abs() + (k[1] as i32).abs()) as f64).exp();
            let v: Vec<Complex64> = (0..2).map(|_| Complex64::new(rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0)) * decay).collect();
            c.insert(&k, &v).unwrap();
        }
        c.realify();
        f.insert(&alpha, &c).unwrap();
    }
    f
}

fn golden() -> Frequency {
    Frequency::new(vec![1.0, GOLDEN], 0.1, 1.2).unwrap()
}

#[test]
fn twenty_random_fields_respect_the_bound() {
    let freq = golden();
    for seed in 0..20 {
        let f = random_field(seed);
        let u = solve_homological(&f, &freq, 1e-13).unwrap();
        let b = homological_bound(&f, &u, &freq, RHO, R).unwrap();
        assert!(b.holds, "seed {seed}: |u| = {} > {}", b.u_norm, b.bound);
        assert!(b.u_norm > 0.0);
    }
}

#[test]
fn solution_has_zero_mean_and_solves_the_equation() {
    let freq = golden();
    let f = random_field(7);
    let u = solve_homological(&f, &freq, 1e-13).unwrap();
    assert_eq!(u.average().majorant_norm(RHO, R).unwrap(), 0.0);
    let back = u.derivative_along(&freq.omega);
    assert!(back.max_coeff_distance(&f.oscillation()) < 1e-13);
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn bound_holds_for_any_seed(seed in any::<u64>()) {
        let freq = golden();
        let f = random_field(seed);
        let u = solve_homological(&f, &freq, 1e-13).unwrap();
        prop_assert!(homological_bound(&f, &u, &freq, RHO, R).unwrap().holds);
    }
}
