use nalgebra::DMatrix;
use num_complex::Complex64;
use qpresp::averaging::AveragingOptions;
use qpresp::demo::GOLDEN;
use qpresp::reductions::{degenerate_scale, rescale_general, second_order_reduce, second_order_round_trip, DegenerateRecord, DegenerateSpec, SecondOrderRecord, SecondOrderSpec};
use qpresp::system::{CoeffRecord, EpsilonRecord, SystemRecord, SystemSpec};
use qpresp::torus::Truncation;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn rec(k: &[i32], alpha: &[u32], re: &[f64]) -> CoeffRecord {
    CoeffRecord { k: k.to_vec(), alpha: alpha.to_vec(), re: re.to_vec(), im: vec![] }
}

fn unit(n: usize, i: usize) -> Vec<u32> {
    let mut a = vec![0; n];
    a[i] = 1;
    a
}

/// `x'' = eps (DF0 x + cos theta_1 e_1 + 0.1 x_1 x_1') + eps^2 sin theta_2 e_2`.
fn second_order(df0: &DMatrix<f64>) -> SecondOrderSpec {
    let n = df0.nrows();
    let mut f = Vec::new();
    for j in 0..n {
        f.push(rec(&[0, 0], &unit(2 * n, j), &df0.column(j).iter().cloned().collect::<Vec<_>>()));
    }
    let mut e1 = vec![0.0; n];
    e1[0] = 0.5;
    f.push(rec(&[1, 0], &vec![0; 2 * n], &e1));
    f.push(rec(&[-1, 0], &vec![0; 2 * n], &e1));
    let mut alpha = vec![0; 2 * n];
    alpha[0] = 1;
    alpha[n] = 1;
    let mut q = vec![0.0; n];
    q[0] = 0.1;
    f.push(rec(&[0, 0], &alpha, &q));
    let mut s = vec![0.0; n];
    s[n - 1] = 0.5;
    let g = vec![EpsilonRecord {
        eps_power: 0.0,
        terms: vec![
            CoeffRecord { k: vec![0, 1], alpha: vec![0; 2 * n], re: vec![0.0; n], im: s.iter().map(|v| -v).collect() },
            CoeffRecord { k: vec![0, -1], alpha: vec![0; 2 * n], re: vec![0.0; n], im: s.clone() },
        ],
    }];
    let r = SecondOrderRecord { n, omega: vec![1.0, GOLDEN], gamma: 0.1, tau: 1.2, a: 1.0, b: 2.0, rho: 0.25, r: 0.5, center: None, f, g };
    SecondOrderSpec::from_record(&r).unwrap()
}

fn random_df0(rng: &mut ChaCha8Rng, n: usize) -> DMatrix<f64> {
    loop {
        let m = DMatrix::from_fn(n, n, |_, _| rng.gen_range(-2.0..2.0));
        let ev: Vec<Complex64> = m.complex_eigenvalues().iter().cloned().collect();
        let min_mod = ev.iter().map(|z| z.norm()).fold(f64::INFINITY, f64::min);
        let mut gap = f64::INFINITY;
        for i in 0..n {
            for j in i + 1..n {
                gap = gap.min((ev[i] - ev[j]).norm());
            }
        }
        if min_mod > 0.2 && gap > 0.2 {
            return m;
        }
    }
}

#[test]
fn doubled_spectra_are_square_roots() {
    let mut rng = ChaCha8Rng::seed_from_u64(99);
    for trial in 0..50 {
        let n = 2 + trial % 2;
        let df0 = random_df0(&mut rng, n);
        let so = second_order(&df0);
        let red = second_order_reduce(&so, &vec![0.0; n]).unwrap();
        assert!(red.branches.max_branch_error <= 1e-10, "trial {trial}: {:e}", red.branches.max_branch_error);
        let mu: Vec<Complex64> = df0.complex_eigenvalues().iter().cloned().collect();
        for l in &red.branches.doubled_eigenvalues {
            let sq = l * l;
            let miss = mu.iter().map(|m| (sq - m).norm()).fold(f64::INFINITY, f64::min);
            assert!(miss <= 1e-10 * df0.amax().max(1.0), "trial {trial}: lambda^2 = {sq} not in spec");
        }
        assert!((&red.df0 - &df0).amax() < 1e-12);
    }
}

#[test]
fn diagonal_case_gives_the_expected_branches() {
    let df0 = DMatrix::from_row_slice(2, 2, &[-1.0, 0.0, 0.0, -4.0]);
    let red = second_order_reduce(&second_order(&df0), &[0.0, 0.0]).unwrap();
    let mut got: Vec<(i64, i64)> = red.branches.doubled_eigenvalues.iter().map(|z| ((z.re * 1e9).round() as i64, (z.im * 1e9).round() as i64)).collect();
    got.sort();
    let want = vec![(0, -2_000_000_000), (0, -1_000_000_000), (0, 1_000_000_000), (0, 2_000_000_000)];
    assert_eq!(got, want);
    assert_eq!((red.first_order.a, red.first_order.b), (0.5, 1.0));
}

#[test]
fn second_order_round_trip_agrees() {
    let df0 = DMatrix::from_row_slice(2, 2, &[-1.0, 0.0, 0.0, -4.0]);
    let so = second_order(&df0);
    let red = second_order_reduce(&so, &[0.0, 0.0]).unwrap();
    let gap = second_order_round_trip(&so, &red, &[0.1, -0.05], &[0.02, 0.01], 0.01, 50.0, 0.01).unwrap();
    assert!(gap <= 1e-6, "round trip gap {gap:e}");
}

fn general_system(a: f64, b: f64) -> SystemSpec {
    let mut r = qpresp::demo::nonlinear();
    r.a = a;
    r.b = b;
    r.g = vec![
        EpsilonRecord { eps_power: 0.0, terms: vec![rec(&[0, 1], &[2, 0], &[0.0, 0.2]), rec(&[0, -1], &[2, 0], &[0.0, 0.2]), rec(&[0, 0], &[0, 0], &[0.1, 0.0])] },
        EpsilonRecord { eps_power: 1.0, terms: vec![rec(&[1, 1], &[0, 1], &[0.3, 0.0]), rec(&[-1, -1], &[0, 1], &[0.3, 0.0])] },
    ];
    SystemSpec::from_record(&r).unwrap()
}

fn samples(seed: u64, d: usize, n: usize, e_range: (f64, f64)) -> Vec<(Vec<f64>, Vec<f64>, f64)> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..16)
        .map(|_| {
            let theta = (0..d).map(|_| rng.gen_range(0.0..std::f64::consts::TAU)).collect();
            let y = (0..n).map(|_| rng.gen_range(-0.3..0.3)).collect();
            (theta, y, rng.gen_range(e_range.0..e_range.1))
        })
        .collect()
}

#[test]
fn rescaled_fields_match_the_pushforward() {
    let opts = AveragingOptions { trunc: Truncation::new(30, 6), neumann_terms: 8, divisor_floor: 1e-13 };
    for (a, b) in [(1.0, 2.0), (1.0, 1.5), (0.5, 2.5), (2.0, 3.0)] {
        let spec = general_system(a, b);
        let (plan, sys) = rescale_general(&spec, &opts).unwrap();
        let defect = sys.identity_defect(&samples(3, 2, 2, (0.01, 0.05))).unwrap();
        assert!(defect <= 1e-10, "(a, b) = ({a}, {b}), delta = {}: defect {defect:e}", plan.delta);
    }
}

fn degenerate() -> DegenerateSpec {
    let r = DegenerateRecord {
        n: 2,
        omega: vec![1.0, GOLDEN],
        gamma: 0.1,
        tau: 1.2,
        l: 3,
        rho: 0.25,
        r: 0.5,
        phi: vec![rec(&[0, 0], &[3, 0], &[-1.0, 0.0]), rec(&[0, 0], &[1, 2], &[0.5, -1.0]), rec(&[0, 0], &[0, 3], &[0.0, -2.0])],
        h: vec![rec(&[1, 0], &[4, 0], &[0.1, 0.0]), rec(&[-1, 0], &[4, 0], &[0.1, 0.0]), rec(&[0, 0], &[2, 3], &[0.0, 0.3])],
        f: vec![rec(&[1, 0], &[0, 0], &[0.5, 0.0]), rec(&[-1, 0], &[0, 0], &[0.5, 0.0]), rec(&[0, 1], &[1, 0], &[0.0, 0.2]), rec(&[0, -1], &[1, 0], &[0.0, 0.2]), rec(&[0, 0], &[0, 2], &[0.1, 0.0])],
    };
    DegenerateSpec::from_record(&r).unwrap()
}

#[test]
fn degenerate_scaling_identity() {
    let ds = degenerate();
    let sys = degenerate_scale(&ds, 1).unwrap();
    assert_eq!((sys.spec.a, sys.spec.b), (2.0, 3.0));
    assert!(sys.homogeneity_defect <= 1e-10);
    let defect = sys.identity_defect(&ds, &samples(4, 2, 2, (0.05, 0.5))).unwrap();
    assert!(defect <= 1e-10, "defect {defect:e}");
}

#[test]
fn non_homogeneous_phi_is_rejected() {
    let mut ds = degenerate();
    let extra = SystemSpec::from_record(&SystemRecord { f: vec![rec(&[0, 0], &[2, 0], &[1.0, 0.0])], ..qpresp::demo::elliptic() }).unwrap().f;
    ds.phi = ds.phi.add(&extra.with_rho(ds.phi.rho())).unwrap();
    assert!(degenerate_scale(&ds, 1).is_err());
}
