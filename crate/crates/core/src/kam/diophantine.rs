use num_complex::Complex64;

use super::schedule::Schedule;
use crate::torus::{modes_within, order, DivisorCheck, Frequency, Mode, Offender};

/// Nonzero modes with `|k| <= k_max`, their orders and `<k, w>`.
#[derive(Clone, Debug)]
pub struct ModeTable {
    pub modes: Vec<Mode>,
    pub orders: Vec<u32>,
    pub dots: Vec<f64>,
}

impl ModeTable {
    pub fn new(freq: &Frequency, k_max: u32) -> Self {
        let modes: Vec<Mode> = modes_within(freq.dim(), k_max).into_iter().filter(|k| order(k) > 0).collect();
        let orders = modes.iter().map(|k| order(k)).collect();
        let dots = modes.iter().map(|k| freq.dot(k)).collect();
        ModeTable { modes, orders, dots }
    }
}

fn scan<F>(table: &ModeTable, sched: &Schedule, m: usize, pairs: &[(usize, Option<usize>, Complex64)], mut lhs_of: F) -> DivisorCheck
where
    F: FnMut(f64, Complex64) -> f64,
{
    let mut worst: Option<Offender> = None;
    let mut worst_ratio = f64::INFINITY;
    for ((k, &n), &w) in table.modes.iter().zip(&table.orders).zip(&table.dots) {
        let rhs = sched.threshold(m, n);
        for &(i, j, shift) in pairs {
            let lhs = lhs_of(w, shift);
            let ratio = lhs / rhs;
            if ratio < worst_ratio {
                worst_ratio = ratio;
                worst = Some(Offender { k: k.to_vec(), i: Some(i), j, lhs, rhs });
            }
        }
    }
    DivisorCheck { passed: worst_ratio >= 1.0, worst, checked: table.modes.len() * pairs.len() }
}

/// `|i<k,w> - eps lambda_i| >= (gamma/2) |k|^{-tau_m} e^{-nu_m |k|}` for all
/// tabulated `k` and all `i`.
pub fn check_eigenvalues(table: &ModeTable, sched: &Schedule, m: usize, eps: f64, lambdas: &[Complex64]) -> DivisorCheck {
    let pairs: Vec<_> = lambdas.iter().enumerate().map(|(i, l)| (i, None, l * eps)).collect();
    scan(table, sched, m, &pairs, |w, shift| (Complex64::new(0.0, w) - shift).norm())
}

/// `|i<k,w> - eps (lambda_i - lambda_j)| >= (gamma/2) |k|^{-tau_m} e^{-nu_m |k|}`
/// for all tabulated `k` and all `i != j`.
pub fn check_differences(table: &ModeTable, sched: &Schedule, m: usize, eps: f64, lambdas: &[Complex64]) -> DivisorCheck {
    let mut pairs = Vec::new();
    for (i, a) in lambdas.iter().enumerate() {
        for (j, b) in lambdas.iter().enumerate() {
            if i != j {
                pairs.push((i, Some(j), (a - b) * eps));
            }
        }
    }
    scan(table, sched, m, &pairs, |w, shift| (Complex64::new(0.0, w) - shift).norm())
}
