//! End-to-end solve: averaging, equilibrium, normal form, iteration, and the
//! pull-back of the invariant torus to a response `x(theta)`.

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use super::lipschitz::{lipschitz_ledger, LipschitzLedger};
use super::{EngineConfig, KamEngine, KamReport, StepSnapshot};
use crate::averaging::{prepare, AveragingOptions, AveragingResult, AveragingSummary, Equilibrium, NormalForm};
use crate::error::{Error, Result};
use crate::spectra::{FrameSummary, SpectralFrame};
use crate::system::SystemSpec;
use crate::torus::{FourierSeries, Shape, Truncation};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SolveOptions {
    pub averaging: AveragingOptions,
    /// Fraction of the spectral separation used as the margin `mu`.
    pub margin_fraction: f64,
    pub engine: EngineConfig,
}

/// A converged (or partially converged) run with everything needed to
/// evaluate the response.
#[derive(Clone, Debug)]
pub struct Solution {
    pub spec: SystemSpec,
    pub eps: f64,
    pub avg: AveragingResult,
    pub eq: Equilibrium,
    pub frame: SpectralFrame,
    pub normal_form: NormalForm,
    pub report: KamReport,
    pub snapshots: Vec<StepSnapshot>,
}

/// Serializable summary of a solve.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SolveSummary {
    pub eps: f64,
    pub eps_hat: f64,
    pub x_star: Vec<f64>,
    pub equilibrium_residual: f64,
    pub averaging: AveragingSummary,
    pub frame: FrameSummary,
    pub report: KamReport,
}

/// Builds the engine for a prepared problem.
pub fn engine_for(spec: &SystemSpec, eps: f64, x_init: &[f64], opts: &SolveOptions) -> Result<(AveragingResult, Equilibrium, SpectralFrame, NormalForm, KamEngine)> {
    let (avg, eq, frame, nf) = prepare(spec, eps, x_init, &opts.averaging, opts.margin_fraction)?;
    let engine = KamEngine::new(&nf, frame.clone(), &spec.freq, opts.engine.clone())?;
    Ok((avg, eq, frame, nf, engine))
}

pub fn solve(spec: &SystemSpec, eps: f64, x_init: &[f64], opts: &SolveOptions) -> Result<Solution> {
    let (avg, eq, frame, nf, mut engine) = engine_for(spec, eps, x_init, opts)?;
    engine.run()?;
    Ok(Solution {
        spec: spec.clone(),
        eps,
        avg,
        eq,
        frame,
        normal_form: nf,
        report: engine.report(),
        snapshots: engine.snapshots().to_vec(),
    })
}

impl Solution {
    /// `Psi`, the torus in the averaged local coordinates relative to `x*`.
    pub fn psi(&self) -> &FourierSeries {
        &self.report.psi
    }

    /// `y(theta) = x* + Psi(theta)` in local coordinates `x - center`.
    pub fn averaged_torus(&self, theta: &[f64]) -> Vec<f64> {
        let psi = self.psi().eval_real(theta);
        self.eq.x.iter().zip(&psi).map(|(a, b)| a + b).collect()
    }

    /// The response `x(theta) = center + y + eps^a u(theta, y)`.
    pub fn response(&self, theta: &[f64]) -> Vec<f64> {
        let y = self.averaged_torus(theta);
        let u = self.avg.u.eval_real(theta, &y);
        (0..self.spec.n).map(|i| self.spec.center[i] + y[i] + self.avg.eps_hat * u[i]).collect()
    }

    /// Fourier series of the response, with `u(theta, y(theta))` expanded
    /// by substitution.
    pub fn response_series(&self, trunc: &Truncation) -> Result<FourierSeries> {
        let d = self.spec.dim();
        let n = self.spec.n;
        let rho = self.psi().rho();
        let base: Vec<f64> = self.eq.x.iter().zip(&self.spec.center).map(|(a, c)| a + c).collect();
        let y = self.psi().add(&FourierSeries::from_real_vector(d, &self.eq.x, rho))?;
        let zero = FourierSeries::zero(d, Shape::matrix(n), rho);
        let u = self.avg.u.substitute(&y, &zero, trunc)?.constant_term();
        let mut out = self.psi().add(&FourierSeries::from_real_vector(d, &base, rho))?.add(&u.scale(self.avg.eps_hat))?;
        out.realify();
        Ok(out)
    }

    /// `w . grad_theta x(theta)`.
    pub fn response_derivative(&self, theta: &[f64]) -> Vec<f64> {
        let omega = &self.spec.freq.omega;
        let n = self.spec.n;
        let y = self.averaged_torus(theta);
        let dpsi = self.psi().derivative_along(omega).eval_real(theta);
        let ut = self.avg.u.derivative_along(omega).eval_real(theta, &y);
        let du = self.avg.du.eval_real(theta, &y);
        let du = DMatrix::from_row_slice(n, n, &du);
        (0..n)
            .map(|i| {
                let chain: f64 = (0..n).map(|j| du[(i, j)] * dpsi[j]).sum();
                dpsi[i] + self.avg.eps_hat * (ut[i] + chain)
            })
            .collect()
    }

    /// Largest `|d/dt x - rhs(t, x)|` on a uniform grid with `per_axis`
    /// points per angle, relative to `max |d/dt x|` (absolute if that is 0).
    pub fn residual(&self, per_axis: usize) -> Result<(f64, f64)> {
        let d = self.spec.dim();
        if per_axis == 0 {
            return Err(Error::InvalidInput("residual grid needs at least one point per angle".into()));
        }
        let g = self.spec.g_at(self.eps)?;
        let total = per_axis.pow(d as u32);
        let mut worst: f64 = 0.0;
        let mut scale: f64 = 0.0;
        let mut theta = vec![0.0; d];
        for idx in 0..total {
            let mut rem = idx;
            for t in theta.iter_mut() {
                *t = std::f64::consts::TAU * (rem % per_axis) as f64 / per_axis as f64;
                rem /= per_axis;
            }
            let x = self.response(&theta);
            let lhs = self.response_derivative(&theta);
            let rhs = self.spec.rhs_at_angle(&g, &theta, &x, self.eps);
            for (a, b) in lhs.iter().zip(&rhs) {
                worst = worst.max((a - b).abs());
                scale = scale.max(a.abs());
            }
        }
        Ok((worst, if scale > 0.0 { worst / scale } else { worst }))
    }

    pub fn summary(&self) -> Result<SolveSummary> {
        Ok(SolveSummary {
            eps: self.eps,
            eps_hat: self.avg.eps_hat,
            x_star: self.eq.x.iter().zip(&self.spec.center).map(|(a, c)| a + c).collect(),
            equilibrium_residual: self.eq.residual,
            averaging: self.avg.summary(self.spec.rho, self.spec.r)?,
            frame: self.frame.summary(),
            report: self.report.clone(),
        })
    }
}

/// Runs at `eps - delta` and `eps + delta` with snapshots and returns the
/// finite-difference Lipschitz ledger.
pub fn lipschitz_study(spec: &SystemSpec, eps: f64, delta: f64, x_init: &[f64], opts: &SolveOptions) -> Result<LipschitzLedger> {
    if !(delta > 0.0 && delta < eps) {
        return Err(Error::InvalidInput(format!("need 0 < delta < eps, got delta = {delta}, eps = {eps}")));
    }
    let mut o = opts.clone();
    o.engine.keep_snapshots = true;
    o.engine.ledger = false;
    o.engine.conjugacy_samples = 0;
    let run = |e: f64| -> Result<Vec<StepSnapshot>> {
        let (_, _, _, _, mut engine) = engine_for(spec, e, x_init, &o)?;
        // partial runs still carry usable snapshots
        let _ = engine.run();
        Ok(engine.snapshots().to_vec())
    };
    let lo = run(eps - delta)?;
    let hi = run(eps + delta)?;
    let widths: Vec<(f64, f64)> = lo.iter().zip(&hi).map(|(a, b)| (o.engine.schedule.sigma(a.m), a.r.min(b.r))).collect();
    let eps_hat = |e: f64| e.powf(spec.a);
    let d_hat = 0.5 * (eps_hat(eps + delta) - eps_hat(eps - delta));
    let mut ledger = lipschitz_ledger(&lo, &hi, eps_hat(eps), d_hat, &widths)?;
    ledger.eps = eps;
    Ok(ledger)
}
