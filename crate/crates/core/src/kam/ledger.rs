//! Numerical evaluation of the analytic constants of the iteration and
//! per-step inequality verdicts.
//!
//! `varpi(tau, rho) = sum_{k != 0} e^{-rho |k|} |k|^tau` is summed shell by
//! shell (`|k| = s`) with a rigorous geometric tail bound. Verdicts are
//! labelled `exact` when every quantity in them is computed, and
//! `effective` when they involve the unspecified constants `M~_i` or the
//! Cauchy-type functions `Delta_i`, for which configurable stand-ins are used.

use serde::{Deserialize, Serialize};

use super::schedule::Schedule;
use crate::error::{Error, Result};

/// Number of `k in Z^d` with `|k| = s >= 1`:
/// `sum_j 2^j C(d, j) C(s - 1, j - 1)`.
pub fn shell_count(d: usize, s: u64) -> f64 {
    if s == 0 {
        return 1.0;
    }
    let mut total = 0.0;
    let mut c_dj = 1.0; // C(d, j)
    let mut c_s = 1.0; // C(s - 1, j - 1)
    for j in 1..=d.min(s as usize) {
        c_dj *= (d - j + 1) as f64 / j as f64;
        if j > 1 {
            c_s *= (s as f64 - (j - 1) as f64) / (j - 1) as f64;
        }
        total += 2f64.powi(j as i32) * c_dj * c_s;
    }
    total
}

/// Value of `varpi` with the bound on the neglected tail.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Varpi {
    pub value: f64,
    pub tail: f64,
    pub shells: u64,
}

const MAX_SHELLS: u64 = 200_000_000;

/// `sum_{k in Z^d, k != 0} e^{-rho |k|} |k|^tau` for `rho > 0`, `tau >= 0`.
pub fn varpi(d: usize, tau: f64, rho: f64) -> Result<Varpi> {
    if d == 0 || !(rho > 0.0) || !(tau >= 0.0) || !rho.is_finite() || !tau.is_finite() {
        return Err(Error::InvalidInput(format!("varpi needs d >= 1, rho > 0, tau >= 0; got d = {d}, rho = {rho}, tau = {tau}")));
    }
    let term = |s: u64| (shell_count(d, s).ln() + tau * (s as f64).ln() - rho * s as f64).exp();
    // ratio bound t(s+1)/t(s) <= q(S) for all s >= S >= d
    let ratio = |big_s: u64| {
        let sf = big_s as f64;
        (sf / (sf - d as f64 + 1.0)) * (1.0 + 1.0 / sf).powf(tau) * (-rho).exp()
    };
    let peak = ((tau + d as f64 - 1.0) / rho).ceil() as u64 + d as u64;
    let mut sum = 0.0;
    let mut s = 1u64;
    loop {
        sum += term(s);
        if s >= peak {
            let q = ratio(s + 1);
            if q < 1.0 {
                let tail = term(s + 1) / (1.0 - q);
                if tail <= 1e-17 * sum {
                    return Ok(Varpi { value: sum, tail, shells: s });
                }
            }
        }
        s += 1;
        if s > MAX_SHELLS {
            return Err(Error::InvalidInput(format!("varpi({tau}, {rho}) needs more than {MAX_SHELLS} shells")));
        }
    }
}

/// Closed-form majorant of `varpi` valid for `0 < nu <= 1`, `tau >= 1`:
/// `20 d / (3 nu^{d+tau}) ((d+tau-1)/e)^{d+tau-1} sqrt(d+tau-1)`.
pub fn varpi_majorant(d: usize, tau: f64, nu: f64) -> Option<f64> {
    if !(nu > 0.0 && nu <= 1.0 && tau >= 1.0) {
        return None;
    }
    let q = d as f64 + tau - 1.0;
    let ln = (20.0 * d as f64 / 3.0).ln() - (d as f64 + tau) * nu.ln() + q * (q.ln() - 1.0) + 0.5 * q.ln();
    Some(ln.exp())
}

/// `L1 = 4 beta0^2 (1/mu + 2 eps varpi(tau_m, nu_m) / gamma)`.
pub fn l1(beta0: f64, mu: f64, eps: f64, gamma: f64, varpi_tau_nu: f64) -> f64 {
    4.0 * beta0 * beta0 * (1.0 / mu + 2.0 * eps * varpi_tau_nu / gamma)
}

/// `L2 = 32 beta0^4 varpi(tau_m, sigma_m - rho_{m+1} - nu_m) / gamma`.
pub fn l2(beta0: f64, gamma: f64, varpi_value: f64) -> f64 {
    32.0 * beta0.powi(4) * varpi_value / gamma
}

/// Cauchy-type factors `Delta_1`, `Delta_2` at ratio `x`; the stand-in used
/// is `(1 - x)^{-3}` for both.
pub fn delta_factor(x: f64) -> f64 {
    if x >= 1.0 {
        f64::INFINITY
    } else {
        (1.0 - x).powi(-3)
    }
}

/// Stand-ins for the unspecified constants of the Lipschitz estimates.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct LedgerConstants {
    pub m_tilde: [f64; 4],
}

impl Default for LedgerConstants {
    fn default() -> Self {
        LedgerConstants { m_tilde: [1.0; 4] }
    }
}

/// One evaluated `varpi` with its closed-form majorant.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct VarpiEntry {
    pub label: String,
    pub tau: f64,
    pub rho: f64,
    pub value: f64,
    pub tail: f64,
    pub closed_form: Option<f64>,
}

/// Widths, weights and constants of step `m`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct StepConstants {
    pub m: usize,
    pub rho: f64,
    pub sigma: f64,
    pub nu: f64,
    pub tau: f64,
    pub rho_next: f64,
    pub l1: f64,
    pub l2: f64,
    pub e: [f64; 4],
    pub varpi: Vec<VarpiEntry>,
}

fn varpi_entry(d: usize, label: &str, tau: f64, rho: f64) -> Result<VarpiEntry> {
    let v = varpi(d, tau, rho)?;
    Ok(VarpiEntry { label: label.into(), tau, rho, value: v.value, tail: v.tail, closed_form: varpi_majorant(d, tau, rho) })
}

pub fn step_constants(sched: &Schedule, d: usize, m: usize, beta0: f64, mu: f64, eps: f64, consts: &LedgerConstants) -> Result<StepConstants> {
    let st = sched.step(m);
    let w_l1 = varpi_entry(d, "tau_m,nu_m", st.tau, st.nu)?;
    let w_l2 = varpi_entry(d, "tau_m,sigma_m-rho_m+1-nu_m", st.tau, st.sigma - st.rho_next - st.nu)?;
    let w_e1 = varpi_entry(d, "2tau_m,rho_m-2nu_m-sigma_m", 2.0 * st.tau, st.rho - 2.0 * st.nu - st.sigma)?;
    let w_e2 = varpi_entry(d, "tau_m,rho_m-nu_m-sigma_m", st.tau, st.rho - st.nu - st.sigma)?;
    let w_e3 = varpi_entry(d, "2tau_m,sigma_m-rho_m+1-2nu_m", 2.0 * st.tau, st.sigma - st.rho_next - 2.0 * st.nu)?;
    let mt = consts.m_tilde;
    let e = [mt[0] * w_e1.value, mt[1] * w_e2.value, mt[2] * w_e3.value, mt[3] * w_l2.value];
    Ok(StepConstants {
        m,
        rho: st.rho,
        sigma: st.sigma,
        nu: st.nu,
        tau: st.tau,
        rho_next: st.rho_next,
        l1: l1(beta0, mu, eps, sched.gamma, w_l1.value),
        l2: l2(beta0, sched.gamma, w_l2.value),
        e,
        varpi: vec![w_l1, w_l2, w_e1, w_e2, w_e3],
    })
}

/// A single inequality `lhs <= rhs`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Check {
    pub name: String,
    pub lhs: f64,
    pub rhs: f64,
    pub holds: bool,
    pub effective: bool,
}

impl Check {
    pub fn le(name: &str, lhs: f64, rhs: f64) -> Self {
        Check { name: name.into(), lhs, rhs, holds: lhs <= rhs * (1.0 + 1e-12) + 1e-300, effective: false }
    }

    pub fn effective(mut self) -> Self {
        self.effective = true;
        self
    }
}

/// Norms measured during step `m`. Widths: `A` plain, `B, p` at `rho_m`,
/// `u, B*, p*` at `sigma_m`, `S` at `rho_{m+1}`.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct StepMeasurements {
    pub m: usize,
    pub eps: f64,
    /// `eps^{2^m}`.
    pub s: f64,
    pub beta0: f64,
    pub mu: f64,
    pub norm_a: f64,
    pub norm_b: f64,
    pub norm_p: f64,
    pub norm_u: f64,
    /// `K_m` carried by the curvature recursion.
    pub k_m: f64,
    /// Majorant of `|D_zz h_m|` on the ball of radius `r_m`.
    pub k_measured: f64,
    pub r: f64,
    pub norm_a_star: f64,
    pub norm_b_star: f64,
    pub norm_p_star: f64,
    pub k_star_measured: f64,
    pub r_star: f64,
    pub norm_s: f64,
    /// `|S_m| / eps^{2^m}`.
    pub norm_s_hat: f64,
    pub norm_a_next: f64,
    pub norm_b_next: f64,
    pub norm_p_next: f64,
    pub k_next: f64,
    pub k_next_measured: f64,
    pub r_next: f64,
}

/// Verdicts for the bounds that involve only step-`m` data.
pub fn step_checks(c: &StepConstants, x: &StepMeasurements) -> Vec<Check> {
    let (s, eps) = (x.s, x.eps);
    let (l1, l2, k) = (c.l1, c.l2, x.k_m);
    let es = eps * x.norm_s;
    let inv = 1.0 / (1.0 - es);
    let mut out = vec![
        Check::le("homological_bound", x.norm_u, s * x.norm_p * l1),
        Check::le("shift_a_bound", x.norm_a_star, x.norm_a + s * k * l1 * x.norm_p),
        Check::le("shift_b_bound", x.norm_b_star, x.norm_b + k * l1 * x.norm_p),
        Check::le("shift_b_bound_relaxed", x.norm_b_star, x.norm_b + 2.0 * k * l1 * x.norm_p),
        Check::le("shift_p_bound", x.norm_p_star, 0.5 * k * l1 * l1 * x.norm_p * x.norm_p + l1 * x.norm_b * x.norm_p),
        Check::le("shift_curvature_bound", x.k_star_measured, k),
        Check::le("shift_radius_positive", 0.0, x.r_star),
        Check::le("sylvester_bound", x.norm_s, s * x.norm_b_star * l2),
        Check::le("sylvester_half", x.norm_s, 0.5),
        Check::le("linear_a_bound", x.norm_a_next, x.norm_a_star + eps * s * x.norm_s * inv * x.norm_b_star),
        Check::le("linear_b_bound", x.norm_b_next, 2.0 * eps * x.norm_s_hat * inv * x.norm_b_star),
        Check::le("linear_p_bound", x.norm_p_next, inv * x.norm_p_star),
        Check::le("linear_curvature_bound", x.k_next_measured, x.k_next),
        Check::le("b_recursion", x.norm_b_next, 4.0 * eps * l2 * (x.norm_b + k * l1 * x.norm_p).powi(2)),
        Check::le("p_recursion", x.norm_p_next, k * l1 * l1 * x.norm_p * x.norm_p + 2.0 * l1 * x.norm_b * x.norm_p),
        Check::le("a_recursion", x.norm_a_next, x.norm_a + s * s * x.norm_b + s * (1.0 + 2.0 * eps) * k * l1 * x.norm_p),
    ];
    for v in &c.varpi {
        if let Some(b) = v.closed_form {
            out.push(Check::le(&format!("varpi_closed_form[{}]", v.label), v.value, b));
        }
    }
    out
}

/// Constants and verdicts of one step.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct StepLedger {
    pub constants: StepConstants,
    pub measured: StepMeasurements,
    pub checks: Vec<Check>,
}

/// Effective constants fitted over the steps of a run.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct EffectiveConstants {
    /// `sup_m L2_m^{1/2^m}`.
    pub m1: f64,
    /// `sup_m L1_m / L2_m`.
    pub c1: f64,
    /// `sup_m max(|B_m|, |p_m|)^{1/2^m}`.
    pub m2: f64,
    /// `sup_m (|S_m| / eps^{2^m})^{1/2^m}`, so that `|S_m| <= (eps M4)^{2^m}`.
    pub m4: f64,
    /// `sup_m max(E_i)^{1/2^m}`.
    pub m5: f64,
    /// Lower bound on `r_infinity` from the radius recursion.
    pub r_inf_lower: f64,
}

/// Ledger of a full run.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct BoundsLedger {
    pub steps: Vec<StepLedger>,
    pub effective: EffectiveConstants,
    pub failures: Vec<String>,
}

impl BoundsLedger {
    pub fn record(&mut self, step: StepLedger) {
        for c in &step.checks {
            if !c.holds {
                self.failures.push(format!("m={}: {} ({:e} > {:e})", step.measured.m, c.name, c.lhs, c.rhs));
            }
        }
        self.steps.push(step);
        self.refit();
    }

    fn refit(&mut self) {
        let mut eff = EffectiveConstants::default();
        let mut r0 = None;
        let mut prod = 1.0;
        let mut sum = 0.0;
        for st in &self.steps {
            let m = st.measured.m as i32;
            let root = |x: f64| if x > 0.0 { x.powf(0.5f64.powi(m)) } else { 0.0 };
            eff.m1 = eff.m1.max(root(st.constants.l2));
            eff.c1 = eff.c1.max(st.constants.l1 / st.constants.l2);
            eff.m2 = eff.m2.max(root(st.measured.norm_b.max(st.measured.norm_p)));
            eff.m4 = eff.m4.max(root(st.measured.norm_s_hat));
            eff.m5 = eff.m5.max(root(st.constants.e.iter().cloned().fold(0.0, f64::max)));
            r0.get_or_insert(st.measured.r);
            let f = 1.0 + st.measured.eps * st.measured.norm_s;
            prod /= f;
            sum += st.measured.norm_u / f;
        }
        eff.r_inf_lower = r0.unwrap_or(0.0) * prod - sum;
        self.effective = eff;
    }

    pub fn all_hold(&self) -> bool {
        self.failures.is_empty()
    }
}
