use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Width and exponent schedule of the iteration:
/// `rho_{m+1} = rho_m - rho0 / (4 (m+1)^2)`, `sigma_m = rho_m - rho0 / (8 (m+1)^2)`,
/// `nu_m = c0 rho0 / (4 (m+1)^2)`, `tau_m = tau kappa^m`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Schedule {
    pub rho0: f64,
    pub c0: f64,
    pub kappa: f64,
    pub tau: f64,
    pub gamma: f64,
    pub m_max: usize,
    pub p_tol: f64,
    pub k_trunc: u32,
    pub deg_max: u32,
}

/// Schedule values at one step.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct ScheduleStep {
    pub m: usize,
    pub rho: f64,
    pub sigma: f64,
    pub nu: f64,
    pub tau: f64,
    pub rho_next: f64,
}

impl Schedule {
    pub fn validate(&self) -> Result<()> {
        if !(self.c0 > 0.0 && self.c0 < 0.25) {
            return Err(Error::InvalidInput(format!("c0 must lie in (0, 1/4), got {}", self.c0)));
        }
        if !(self.kappa > 1.0 && self.kappa < 2.0) {
            return Err(Error::InvalidInput(format!("kappa must lie in (1, 2), got {}", self.kappa)));
        }
        if !(self.rho0 > 0.0 && self.gamma > 0.0 && self.tau > 0.0) {
            return Err(Error::InvalidInput("rho0, gamma and tau must be positive".into()));
        }
        if !(self.p_tol >= 0.0) {
            return Err(Error::InvalidInput("p_tol must be nonnegative".into()));
        }
        Ok(())
    }

    pub fn rho(&self, m: usize) -> f64 {
        let s: f64 = (1..=m).map(|j| 1.0 / (4.0 * (j * j) as f64)).sum();
        self.rho0 * (1.0 - s)
    }

    pub fn sigma(&self, m: usize) -> f64 {
        self.rho(m) - self.rho0 / (8.0 * ((m + 1) * (m + 1)) as f64)
    }

    pub fn nu(&self, m: usize) -> f64 {
        self.c0 * self.rho0 / (4.0 * ((m + 1) * (m + 1)) as f64)
    }

    pub fn tau_m(&self, m: usize) -> f64 {
        self.tau * self.kappa.powi(m as i32)
    }

    /// `lim rho_m = rho0 (1 - pi^2 / 24)`.
    pub fn rho_inf(&self) -> f64 {
        self.rho0 * (1.0 - std::f64::consts::PI.powi(2) / 24.0)
    }

    pub fn step(&self, m: usize) -> ScheduleStep {
        ScheduleStep { m, rho: self.rho(m), sigma: self.sigma(m), nu: self.nu(m), tau: self.tau_m(m), rho_next: self.rho(m + 1) }
    }

    /// Small-divisor threshold `(gamma / 2) |k|^{-tau_m} e^{-nu_m |k|}`.
    pub fn threshold(&self, m: usize, order: u32) -> f64 {
        let n = order as f64;
        0.5 * self.gamma * n.powf(-self.tau_m(m)) * (-self.nu(m) * n).exp()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn sched() -> Schedule {
        Schedule { rho0: 1.0, c0: 0.2, kappa: 1.5, tau: 1.2, gamma: 0.1, m_max: 12, p_tol: 1e-14, k_trunc: 30, deg_max: 4 }
    }

    #[test]
    fn first_widths() {
        let s = sched();
        assert_eq!(s.rho(1), 0.75);
        assert_eq!(s.sigma(0), 0.875);
        assert_eq!(s.nu(0), 0.05);
        assert!((s.tau_m(2) - 1.2 * 2.25).abs() < 1e-15);
    }

    #[test]
    fn widths_stay_ordered_and_positive() {
        let s = sched();
        for m in 0..200 {
            let st = s.step(m);
            assert!(st.rho > st.sigma && st.sigma > st.rho_next && st.rho_next > s.rho_inf());
            assert!(st.sigma - st.rho_next - 2.0 * st.nu > 0.0);
            assert!(st.rho - 2.0 * st.nu - st.sigma > 0.0);
        }
        assert!((s.rho(100_000) - s.rho_inf()).abs() < 1e-5);
    }

    #[test]
    fn constraints_are_enforced() {
        let mut s = sched();
        s.c0 = 0.25;
        assert!(s.validate().is_err());
        let mut s = sched();
        s.kappa = 2.0;
        assert!(s.validate().is_err());
    }
}
