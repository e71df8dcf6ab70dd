//! Lipschitz-in-`eps` data for the iteration, estimated by symmetric finite
//! differences across three runs at `eps - d`, `eps`, `eps + d`, and the
//! effective constants that make the Lipschitz recursions hold.
//!
//! For a quantity `X(eps)` the estimate is `|X(eps + d) - X(eps - d)| / (2d)`
//! in the norm of that quantity at step `m`.

use serde::{Deserialize, Serialize};

use super::StepSnapshot;
use crate::error::{Error, Result};
use crate::spectra::real_norm_inf;
use crate::torus::FourierSeries;

/// Finite-difference Lipschitz estimates at step `m`.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct LipschitzStep {
    pub m: usize,
    pub l_a: f64,
    pub l_b: f64,
    pub l_p: f64,
    pub l_h: f64,
    pub l_u: f64,
    pub l_a_star: f64,
    pub l_b_star: f64,
    pub l_p_star: f64,
    pub l_h_star: f64,
    pub l_s: f64,
    /// `max{L(A), L(eps^{2^m} B), L(eps^{2^m} p), L(h), 1}`.
    pub phi: f64,
}

/// Smallest constant for which one recursion holds at one step.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RecursionCheck {
    pub name: String,
    pub m: usize,
    /// Constant required by this step; `eps1 * required < 1` is the verdict.
    pub required: f64,
    pub holds: bool,
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct LipschitzLedger {
    pub eps: f64,
    pub delta: f64,
    pub eps1: f64,
    pub steps: Vec<LipschitzStep>,
    pub checks: Vec<RecursionCheck>,
    /// Effective `M_8` (largest required over all steps and recursions).
    pub m8: f64,
    /// Effective `M_9` from `phi_{m+1} <= M_9^{2^m} phi_m`.
    pub m9: f64,
}

impl LipschitzLedger {
    pub fn all_hold(&self) -> bool {
        self.checks.iter().all(|c| c.holds)
    }
}

fn series_diff(a: &FourierSeries, b: &FourierSeries, rho: f64) -> Result<f64> {
    let rho = rho.min(a.rho()).min(b.rho());
    a.sub(b)?.majorant_norm(rho)
}

/// Root of the nondecreasing `f` on `[lo, inf)` with `f(lo) <= 0`.
fn smallest_constant(f: impl Fn(f64) -> f64) -> f64 {
    if f(0.0) >= 0.0 {
        return 0.0;
    }
    let mut hi = 1.0;
    while f(hi) < 0.0 {
        hi *= 2.0;
        if hi > 1e300 {
            return f64::INFINITY;
        }
    }
    let mut lo = 0.0;
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if f(mid) < 0.0 {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    hi
}

/// Builds the ledger from snapshots of runs at `eps - delta` and `eps + delta`.
/// `rho` and `r` give the widths and radii at which differences are measured.
pub fn lipschitz_ledger(lo: &[StepSnapshot], hi: &[StepSnapshot], eps: f64, delta: f64, widths: &[(f64, f64)]) -> Result<LipschitzLedger> {
    if !(delta > 0.0) {
        return Err(Error::InvalidInput(format!("finite-difference step must be positive, got {delta}")));
    }
    let count = lo.len().min(hi.len()).min(widths.len());
    let mut steps = Vec::with_capacity(count);
    let scale = 1.0 / (2.0 * delta);
    for m in 0..count {
        let (a, b) = (&lo[m], &hi[m]);
        let (sigma, r) = widths[m];
        let rho = b.b_scaled.rho().min(a.b_scaled.rho());
        let h_rho = a.h.rho().min(b.h.rho());
        let l_h = a.h.sub(&b.h)?.majorant_norm(h_rho, r)? * scale;
        let hs_rho = a.h_star.rho().min(b.h_star.rho());
        let l_h_star = a.h_star.sub(&b.h_star)?.majorant_norm(hs_rho, r)? * scale;
        let l_a = real_norm_inf(&(&a.a - &b.a)) * scale;
        let l_b = series_diff(&a.b_scaled, &b.b_scaled, rho)? * scale;
        let l_p = series_diff(&a.p_scaled, &b.p_scaled, rho)? * scale;
        steps.push(LipschitzStep {
            m,
            l_a,
            l_b,
            l_p,
            l_h,
            l_u: series_diff(&a.u, &b.u, sigma)? * scale,
            l_a_star: real_norm_inf(&(&a.a_star - &b.a_star)) * scale,
            l_b_star: series_diff(&a.b_star_scaled, &b.b_star_scaled, sigma)? * scale,
            l_p_star: series_diff(&a.p_star_scaled, &b.p_star_scaled, sigma)? * scale,
            l_h_star,
            l_s: series_diff(&a.s_mat, &b.s_mat, a.s_mat.rho().min(b.s_mat.rho()))? * scale,
            phi: [l_a, l_b, l_p, l_h, 1.0].into_iter().fold(0.0, f64::max),
        });
    }

    let eps1 = eps + delta;
    let mut checks = Vec::new();
    let mut m8: f64 = 0.0;
    let mut m9: f64 = 0.0;
    for w in steps.windows(2) {
        let (cur, next) = (&w[0], &w[1]);
        let m = cur.m;
        let pow = 2f64.powi(m as i32);
        let big = cur.l_a + cur.l_b + cur.l_p + cur.l_h + 1.0;
        let mut push = |name: &str, required: f64| {
            m8 = m8.max(required);
            checks.push(RecursionCheck { name: name.into(), m, required, holds: eps1 * required < 1.0 });
        };
        // L(A_{m+1}) <= L(A_m) + M^{2^m} L(p) + (eps1 M)^{2^m} (...)
        push(
            "lipschitz_a",
            smallest_constant(|c| cur.l_a + c.powf(pow) * cur.l_p + (eps1 * c).powf(pow) * big - next.l_a),
        );
        // L(eps^{2^{m+1}} B_{m+1}) <= (eps1 M)^{2^m} (...)
        push("lipschitz_b", (next.l_b / big).powf(1.0 / pow) / eps1);
        push("lipschitz_p", (next.l_p / big).powf(1.0 / pow) / eps1);
        // L(h_{m+1}) <= (eps1 M)^{2^m}(L(A)+1) + M^{2^m}(L(B)+L(p)) + 6 L(h)
        push(
            "lipschitz_h",
            smallest_constant(|c| (eps1 * c).powf(pow) * (cur.l_a + 1.0) + c.powf(pow) * (cur.l_b + cur.l_p) + 6.0 * cur.l_h - next.l_h),
        );
        m9 = m9.max((next.phi / cur.phi).powf(1.0 / pow));
    }
    Ok(LipschitzLedger { eps, delta, eps1, steps, checks, m8, m9: m9.max(1.0) })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn smallest_constant_solves_monotone_inequality() {
        let c = smallest_constant(|c| c * c - 4.0);
        assert!((c - 2.0).abs() < 1e-12);
        assert_eq!(smallest_constant(|c| c + 1.0), 0.0);
    }
}
