use nalgebra::DMatrix;
use num_complex::Complex64;
use qpresp::spectra::{complex_norm_inf, diagonalize, perturbation_check, real_norm_inf};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

/// Real 3x3 matrix with eigenvalues `a +- ib` and `c`, moduli and gaps at
/// least 0.5, in a random well-conditioned basis.
fn random_base(rng: &mut ChaCha8Rng) -> DMatrix<f64> {
    let (a, b, c) = loop {
        let a = rng.gen_range(-2.0..2.0);
        let b = rng.gen_range(0.25..2.0);
        let c: f64 = rng.gen_range(-3.0..3.0);
        let pair = Complex64::new(a, b);
        if pair.norm() >= 0.5 && c.abs() >= 0.5 && (pair - c).norm() >= 0.5 {
            break (a, b, c);
        }
    };
    let block = DMatrix::from_row_slice(3, 3, &[a, b, 0.0, -b, a, 0.0, 0.0, 0.0, c]);
    let p = DMatrix::<f64>::identity(3, 3) + DMatrix::from_fn(3, 3, |_, _| rng.gen_range(-0.3..0.3));
    let p_inv = p.clone().try_inverse().unwrap();
    &p * block * p_inv
}

fn random_perturbation(rng: &mut ChaCha8Rng, radius: f64) -> DMatrix<f64> {
    let e = DMatrix::from_fn(3, 3, |_, _| rng.gen_range(-1.0..1.0));
    let scale = rng.gen_range(0.0..1.0) * radius / real_norm_inf(&e);
    e * scale
}

#[test]
fn perturbations_inside_alpha_keep_separation_and_conditioning() {
    let mut rng = ChaCha8Rng::seed_from_u64(2024);
    let mut failures = Vec::new();
    for base_idx in 0..100 {
        let a = random_base(&mut rng);
        let frame = diagonalize(&a, 0.8).unwrap();
        for pert_idx in 0..100 {
            let e = random_perturbation(&mut rng, frame.alpha);
            let a_new = &a + e;
            match perturbation_check(&frame, &a_new) {
                Ok(f) => {
                    let lambdas = &f.lambdas;
                    let separated = lambdas.iter().all(|l| l.norm() > frame.mu)
                        && (0..3).all(|i| (0..3).all(|j| i == j || (lambdas[i] - lambdas[j]).norm() > frame.mu));
                    let beta = complex_norm_inf(&f.c).max(complex_norm_inf(&f.c_inv));
                    if !separated || beta > 2.0 * frame.beta0 || f.diagonalization_defect() > 1e-10 {
                        failures.push((base_idx, pert_idx, "conclusion".to_string()));
                    }
                }
                Err(err) => failures.push((base_idx, pert_idx, err.to_string())),
            }
        }
    }
    assert!(failures.is_empty(), "{} failures, first: {:?}", failures.len(), failures.first());
}

#[test]
fn matrices_outside_the_ball_are_rejected() {
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    let a = random_base(&mut rng);
    let frame = diagonalize(&a, 0.8).unwrap();
    let mut e = DMatrix::zeros(3, 3);
    e[(0, 0)] = 1.5 * frame.alpha;
    assert!(perturbation_check(&frame, &(&a + e)).is_err());
}

#[test]
fn tracked_eigenvalues_move_continuously() {
    let mut rng = ChaCha8Rng::seed_from_u64(11);
    let a = random_base(&mut rng);
    let frame = diagonalize(&a, 0.8).unwrap();
    let e = random_perturbation(&mut rng, frame.alpha);
    let mut last = frame.lambdas.clone();
    for step in 1..=10 {
        let f = perturbation_check(&frame, &(&a + &e * (step as f64 / 10.0))).unwrap();
        for (l, l0) in f.lambdas.iter().zip(&last) {
            assert!((l - l0).norm() < frame.mu);
        }
        last = f.lambdas.clone();
    }
}
