//! Truncated Fourier series on the torus `T^d` and polynomial-in-state
//! fields with Fourier coefficients.
//!
//! Norms are weighted majorants: `|c|_rho = sum_k |c_k| e^{rho |k|}` with
//! `|k| = sum |k_j|`. Values carry a row-by-column shape and are measured in
//! the induced infinity norm (maximum absolute row sum), which reduces to the
//! max-abs norm for column vectors.

mod field;
mod series;

pub use field::{Exponent, TaylorFourierField};
pub use series::{FourierSeries, SeriesRecord};

use num_complex::Complex64;
use serde::{Deserialize, Serialize};
use smallvec::SmallVec;

use crate::error::{Error, Result};

/// An integer frequency vector `k` in `Z^d`.
pub type Mode = SmallVec<[i32; 4]>;

/// `|k| = sum_j |k_j|`.
pub fn order(k: &[i32]) -> u32 {
    k.iter().map(|c| c.unsigned_abs()).sum()
}

pub fn add_modes(a: &[i32], b: &[i32]) -> Mode {
    a.iter().zip(b).map(|(x, y)| x + y).collect()
}

pub fn neg_mode(k: &[i32]) -> Mode {
    k.iter().map(|c| -c).collect()
}

pub fn zero_mode(d: usize) -> Mode {
    SmallVec::from_elem(0, d)
}

pub fn is_zero_mode(k: &[i32]) -> bool {
    k.iter().all(|&c| c == 0)
}

/// `<k, w>`.
pub fn dot(k: &[i32], omega: &[f64]) -> f64 {
    k.iter().zip(omega).map(|(&c, &w)| c as f64 * w).sum()
}

/// Every mode with `|k| <= k_max` in `Z^d`, in lexicographic order.
pub fn modes_within(d: usize, k_max: u32) -> Vec<Mode> {
    fn rec(d: usize, budget: i32, prefix: &mut Mode, out: &mut Vec<Mode>) {
        if prefix.len() == d {
            out.push(prefix.clone());
            return;
        }
        for c in -budget..=budget {
            prefix.push(c);
            rec(d, budget - c.abs(), prefix, out);
            prefix.pop();
        }
    }
    let mut out = Vec::new();
    rec(d, k_max as i32, &mut Mode::new(), &mut out);
    out
}

/// Row-by-column shape of a series value.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct Shape {
    pub rows: usize,
    pub cols: usize,
}

impl Shape {
    pub const SCALAR: Shape = Shape { rows: 1, cols: 1 };

    pub fn vector(n: usize) -> Self {
        Shape { rows: n, cols: 1 }
    }

    pub fn matrix(n: usize) -> Self {
        Shape { rows: n, cols: n }
    }

    pub fn len(&self) -> usize {
        self.rows * self.cols
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn is_scalar(&self) -> bool {
        self.rows == 1 && self.cols == 1
    }
}

/// Induced infinity norm of a row-major block: maximum absolute row sum.
pub fn value_norm(v: &[Complex64], shape: Shape) -> f64 {
    (0..shape.rows)
        .map(|i| v[i * shape.cols..(i + 1) * shape.cols].iter().map(|c| c.norm()).sum::<f64>())
        .fold(0.0, f64::max)
}

/// Limits applied to every product: Fourier order, state degree, and a cap
/// on the number of stored modes.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Truncation {
    pub k_max: u32,
    pub deg_max: u32,
    pub mode_budget: usize,
}

impl Truncation {
    pub fn new(k_max: u32, deg_max: u32) -> Self {
        Truncation { k_max, deg_max, mode_budget: 200_000 }
    }
}

/// A mode at which some divisor came closest to (or below) its threshold.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Offender {
    pub k: Vec<i32>,
    pub i: Option<usize>,
    pub j: Option<usize>,
    pub lhs: f64,
    pub rhs: f64,
}

impl Offender {
    pub fn ratio(&self) -> f64 {
        self.lhs / self.rhs
    }
}

/// Outcome of a finite small-divisor check.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DivisorCheck {
    pub passed: bool,
    /// Mode minimising `lhs / rhs` (the first failure if any failed).
    pub worst: Option<Offender>,
    pub checked: usize,
}

/// Frequency vector with its Diophantine constants `(gamma, tau)`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Frequency {
    pub omega: Vec<f64>,
    pub gamma: f64,
    pub tau: f64,
}

impl Frequency {
    pub fn new(omega: Vec<f64>, gamma: f64, tau: f64) -> Result<Self> {
        let d = omega.len();
        if d == 0 {
            return Err(Error::InvalidInput("frequency vector is empty".into()));
        }
        if omega.iter().any(|w| !w.is_finite()) {
            return Err(Error::InvalidInput("frequency vector has non-finite entries".into()));
        }
        if !(gamma > 0.0) {
            return Err(Error::InvalidInput(format!("gamma must be positive, got {gamma}")));
        }
        if !(tau > d as f64 - 1.0) {
            return Err(Error::InvalidInput(format!("tau must exceed d - 1 = {}, got {tau}", d - 1)));
        }
        Ok(Frequency { omega, gamma, tau })
    }

    pub fn dim(&self) -> usize {
        self.omega.len()
    }

    pub fn dot(&self, k: &[i32]) -> f64 {
        dot(k, &self.omega)
    }

    /// Checks `|<k,w>| >= gamma |k|^{-tau}` for `0 < |k| <= k_check`.
    pub fn check_diophantine(&self, k_check: u32) -> DivisorCheck {
        let mut worst: Option<Offender> = None;
        let mut first_fail: Option<Offender> = None;
        let mut checked = 0;
        for k in modes_within(self.dim(), k_check) {
            let n = order(&k);
            if n == 0 {
                continue;
            }
            checked += 1;
            let lhs = self.dot(&k).abs();
            let rhs = self.gamma * (n as f64).powf(-self.tau);
            let off = Offender { k: k.to_vec(), i: None, j: None, lhs, rhs };
            if lhs < rhs && first_fail.is_none() {
                first_fail = Some(off.clone());
            }
            if worst.as_ref().is_none_or(|w| off.ratio() < w.ratio()) {
                worst = Some(off);
            }
        }
        DivisorCheck { passed: first_fail.is_none(), worst: first_fail.or(worst), checked }
    }
}
