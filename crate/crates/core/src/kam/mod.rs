//! Quadratically convergent iteration on the normal form
//! `z' = eps (A_m + eps^{2^m} B_m) z + eps^{2^m+1} p_m + eps h_m`.
//!
//! Step `m` removes `p_m` by the translation `z = y + u_m` and the
//! oscillating part of `B_m` by the linear change `y = (I + eps S_m) z'`,
//! leaving remainders of order `eps^{2^{m+1}}`. Each step first checks the
//! small-divisor conditions for the current eigenvalues; failures abort with
//! the offending `m` and `k`.
//!
//! To keep the `eps`-scaled quantities free of overflow and cancellation the
//! engine stores `u^ = u_m / eps^{2^m}` and `S^ = S_m / eps^{2^m}`, and
//! evaluates `h(u) / eps^{2^{m+1}}` as `h(s z)/s^2` at `z = u^`.

pub mod diophantine;
pub mod ledger;
pub mod lipschitz;
pub mod pipeline;
pub mod schedule;

use nalgebra::DMatrix;
use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::averaging::NormalForm;
use crate::error::{DivisorKind, Error, Result};
use crate::spectra::{perturbation_check, real_norm_inf, FrameSummary, SpectralFrame};
use crate::torus::{DivisorCheck, FourierSeries, Frequency, Shape, TaylorFourierField, Truncation};
use diophantine::{check_differences, check_eigenvalues, ModeTable};
use ledger::{step_checks, step_constants, BoundsLedger, LedgerConstants, StepLedger, StepMeasurements};
pub use schedule::{Schedule, ScheduleStep};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EngineConfig {
    pub schedule: Schedule,
    pub neumann_terms: usize,
    pub strict_ledger: bool,
    /// Evaluate the bounds ledger at every step.
    pub ledger: bool,
    pub ledger_constants: LedgerConstants,
    /// Random `(theta, w)` samples for the per-step conjugacy check.
    pub conjugacy_samples: usize,
    pub seed: u64,
    /// Keep per-step objects for finite-difference Lipschitz estimates.
    pub keep_snapshots: bool,
    pub mode_budget: usize,
    /// Consecutive growth steps of `eps^{2^m+1} |p_m|` that count as divergence.
    pub divergence_window: usize,
}

impl EngineConfig {
    pub fn new(schedule: Schedule) -> Self {
        EngineConfig {
            schedule,
            neumann_terms: 8,
            strict_ledger: false,
            ledger: true,
            ledger_constants: LedgerConstants::default(),
            conjugacy_samples: 16,
            seed: 0,
            keep_snapshots: false,
            mode_budget: 200_000,
            divergence_window: 3,
        }
    }

    pub fn truncation(&self) -> Truncation {
        Truncation { k_max: self.schedule.k_trunc, deg_max: self.schedule.deg_max, mode_budget: self.mode_budget }
    }
}

/// State of the normal form at the start of step `m`.
#[derive(Clone, Debug, PartialEq)]
pub struct IterationState {
    pub m: usize,
    pub eps: f64,
    pub a: DMatrix<f64>,
    pub b: FourierSeries,
    pub p: FourierSeries,
    pub h: TaylorFourierField,
    pub r: f64,
    /// `K_m` from the curvature recursion.
    pub k_curv: f64,
    pub frame: SpectralFrame,
    /// `Phi_{m-1} = (I + eps S_0) ... (I + eps S_{m-1})`.
    pub phi: FourierSeries,
    /// `Psi_{m-1} = u_0 + sum_{j<m-1} Phi_j u_{j+1}`.
    pub psi: FourierSeries,
}

impl IterationState {
    /// `eps^{2^m}`.
    pub fn scale(&self) -> f64 {
        self.eps.powf(2f64.powi(self.m as i32))
    }

    /// `eps^{2^m+1} |p_m|_{rho_m}`.
    pub fn p_decay(&self) -> f64 {
        self.eps * self.scale() * self.p.norm()
    }

    /// `eps^{2^m} |B_m|_{rho_m}`.
    pub fn b_decay(&self) -> f64 {
        self.scale() * self.b.norm()
    }

    /// Right-hand side of the normal form at real `(theta, z)`.
    pub fn field(&self, theta: &[f64], z: &[f64]) -> Vec<f64> {
        let s = self.scale();
        let n = z.len();
        let bm = self.b.eval_real(theta);
        let pv = self.p.eval_real(theta);
        let hv = self.h.eval_real(theta, z);
        (0..n)
            .map(|i| {
                let lin: f64 = (0..n).map(|j| (self.a[(i, j)] + s * bm[i * n + j]) * z[j]).sum();
                self.eps * (lin + s * pv[i] + hv[i])
            })
            .collect()
    }
}

/// Per-step objects kept for finite-difference Lipschitz estimates.
#[derive(Clone, Debug, PartialEq)]
pub struct StepSnapshot {
    pub m: usize,
    pub a: DMatrix<f64>,
    pub a_star: DMatrix<f64>,
    /// `eps^{2^m} B_m`.
    pub b_scaled: FourierSeries,
    /// `eps^{2^m} p_m`.
    pub p_scaled: FourierSeries,
    /// `eps^{2^m} B*_m`.
    pub b_star_scaled: FourierSeries,
    /// `eps^{2^{m+1}} p*_m`.
    pub p_star_scaled: FourierSeries,
    pub u: FourierSeries,
    pub s_mat: FourierSeries,
    pub h: TaylorFourierField,
    pub h_star: TaylorFourierField,
    pub c: DMatrix<Complex64>,
    pub c_star: DMatrix<Complex64>,
    pub lambdas: Vec<Complex64>,
    pub lambdas_star: Vec<Complex64>,
    pub r: f64,
    pub norm_u: f64,
    pub norm_b: f64,
    pub norm_p: f64,
    pub norm_b_star: f64,
    pub norm_s: f64,
    pub k_curv: f64,
}

/// Serializable record of one step.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct StepRecord {
    pub m: usize,
    /// `eps^{2^m}`.
    pub s: f64,
    pub p_decay: f64,
    pub b_decay: f64,
    pub norm_p: f64,
    pub norm_b: f64,
    pub norm_u: f64,
    pub norm_s: f64,
    pub r: f64,
    pub k_curv: f64,
    /// Largest coefficient of `u' - eps A u - eps^{2^m+1} p`.
    pub homological_residual: f64,
    /// The same residual divided by `eps^{2^m+1} |p|`.
    pub homological_residual_rel: f64,
    /// Largest coefficient of `S' - eps (A* S - S A*) - eps^{2^m} B*`.
    pub sylvester_residual: f64,
    pub sylvester_residual_rel: f64,
    pub conjugacy_defect: Option<f64>,
    pub eigen_check: DivisorCheck,
    pub difference_check: DivisorCheck,
    pub frame: FrameSummary,
    pub frame_star: FrameSummary,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct FinalState {
    pub m: usize,
    pub s: f64,
    pub p_decay: f64,
    pub b_decay: f64,
    pub norm_p: f64,
    pub norm_b: f64,
    pub r: f64,
    pub k_curv: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct KamReport {
    pub eps: f64,
    pub converged: bool,
    /// Index of the final normal form.
    pub m_final: usize,
    pub p_decay_final: f64,
    /// Norms of the final normal form `m_final`.
    pub final_state: FinalState,
    pub steps: Vec<StepRecord>,
    pub ledger: BoundsLedger,
    pub a_final: Vec<Vec<f64>>,
    pub frame_final: FrameSummary,
    pub phi: FourierSeries,
    pub psi: FourierSeries,
    pub h_final: TaylorFourierField,
    pub warnings: Vec<String>,
}

/// Drives the iteration one step at a time.
pub struct KamEngine {
    cfg: EngineConfig,
    freq: Frequency,
    base: SpectralFrame,
    table: ModeTable,
    trunc: Truncation,
    state: IterationState,
    steps: Vec<StepRecord>,
    snapshots: Vec<StepSnapshot>,
    ledger: BoundsLedger,
    warnings: Vec<String>,
}

fn complex_matrix(a: &DMatrix<f64>) -> DMatrix<Complex64> {
    a.map(|x| Complex64::new(x, 0.0))
}

fn real_mean(s: &FourierSeries) -> DMatrix<f64> {
    s.mean_matrix().map(|c| c.re)
}

impl KamEngine {
    /// Starts from a normal form; a nonzero mean of `B` is moved into `A`.
    pub fn new(nf: &NormalForm, base: SpectralFrame, freq: &Frequency, cfg: EngineConfig) -> Result<Self> {
        cfg.schedule.validate()?;
        let trunc = cfg.truncation();
        let n = nf.a.nrows();
        let d = freq.dim();
        let rho0 = cfg.schedule.rho0;
        let mut warnings = Vec::new();
        let b_mean = real_mean(&nf.b);
        let a0 = &nf.a + b_mean.scale(nf.eps);
        if b_mean.amax() > 0.0 {
            warnings.push(format!("mean of B ({:e}) absorbed into A", b_mean.amax()));
        }
        let frame = if b_mean.amax() > 0.0 { perturbation_check(&base, &a0)? } else { base.clone() };
        let mut b = nf.b.oscillation().with_rho(rho0);
        b.truncate(trunc.k_max);
        let mut p = nf.p.clone().with_rho(rho0);
        p.truncate(trunc.k_max);
        let h = nf.h.clone().with_rho(rho0).with_radius(nf.r).degree_part(2, trunc.deg_max.max(2));
        let k_curv = h.curvature_bound(rho0, nf.r)?;
        let state = IterationState {
            m: 0,
            eps: nf.eps,
            a: a0,
            b,
            p,
            h,
            r: nf.r,
            k_curv,
            frame,
            phi: FourierSeries::identity(d, n, rho0),
            psi: FourierSeries::zero(d, Shape::vector(n), rho0),
        };
        let table = ModeTable::new(freq, trunc.k_max);
        Ok(KamEngine { cfg, freq: freq.clone(), base, table, trunc, state, steps: Vec::new(), snapshots: Vec::new(), ledger: BoundsLedger::default(), warnings })
    }

    pub fn state(&self) -> &IterationState {
        &self.state
    }

    pub fn steps(&self) -> &[StepRecord] {
        &self.steps
    }

    pub fn snapshots(&self) -> &[StepSnapshot] {
        &self.snapshots
    }

    pub fn ledger(&self) -> &BoundsLedger {
        &self.ledger
    }

    pub fn config(&self) -> &EngineConfig {
        &self.cfg
    }

    pub fn mode_table(&self) -> &ModeTable {
        &self.table
    }

    fn neumann<F>(&self, es: &FourierSeries, x: &F, mul: impl Fn(&FourierSeries, &F) -> Result<F>, add: impl Fn(&F, &F) -> Result<F>) -> Result<F>
    where
        F: Clone,
    {
        let minus = es.scale(-1.0);
        let mut acc = x.clone();
        let mut term = x.clone();
        for _ in 1..self.cfg.neumann_terms {
            term = mul(&minus, &term)?;
            acc = add(&acc, &term)?;
        }
        Ok(acc)
    }

    /// Performs step `m` and advances the state to `m + 1`.
    pub fn step(&mut self) -> Result<&StepRecord> {
        let st = self.state.clone();
        let m = st.m;
        let eps = st.eps;
        let s = st.scale();
        let sched = self.cfg.schedule.clone();
        let widths = sched.step(m);
        let trunc = self.trunc;
        let n = st.a.nrows();
        let d = self.freq.dim();
        let omega = self.freq.omega.clone();

        // small divisors for the translation
        let eigen_check = check_eigenvalues(&self.table, &sched, m, eps, &st.frame.lambdas);
        if !eigen_check.passed {
            return Err(resonance_error(m, DivisorKind::Eigenvalue, &eigen_check));
        }

        // translation: u^ solves u^' = eps A u^ + eps p
        let q = st.p.left_mul_matrix(&st.frame.c_inv)?;
        let lambdas = st.frame.lambdas.clone();
        let y = q.divide_entrywise(
            |k, i, _| {
                let w = crate::torus::dot(k, &omega);
                (Complex64::new(0.0, w) - lambdas[i] * eps) / eps
            },
            1e-300,
        )?;
        let mut u_hat = y.left_mul_matrix(&st.frame.c)?.with_rho(widths.sigma);
        u_hat.realify();
        let ac = complex_matrix(&st.a);
        let hom_res = u_hat
            .derivative_along(&omega)
            .sub(&u_hat.left_mul_matrix(&ac)?.scale(eps))?
            .sub(&st.p.scale(eps))?
            .max_abs();
        let p_scale = eps * st.p.max_abs();
        let u = u_hat.scale(s);
        let norm_u = u.majorant_norm(widths.sigma)?;

        // shift by u
        let h_red = st.h.scale_state_reduced(s, 2)?;
        let id = FourierSeries::identity(d, n, widths.sigma);
        let sub_red = h_red.substitute(&u_hat, &id, &trunc)?;
        let dh = sub_red.linear_matrix()?.with_rho(widths.sigma);
        let a_star = &st.a + real_mean(&dh).scale(s);
        let mut b_star = st.b.add(&dh.oscillation())?.with_rho(widths.sigma);
        b_star.realify();
        let mut p_star = st.b.mul(&u_hat, &trunc)?.add(&sub_red.constant_term())?.with_rho(widths.sigma);
        p_star.realify();
        let mut h_star = st.h.substitute(&u, &id, &trunc)?.degree_part(2, trunc.deg_max.max(2)).with_rho(widths.sigma);
        h_star.realify();
        let r_star = st.r - norm_u;
        if r_star <= 0.0 {
            return Err(Error::RadiusExhausted { m, r: r_star });
        }

        // frame of A* and small divisors for the linear change
        let frame_star = perturbation_check(&self.base, &a_star)?;
        let difference_check = check_differences(&self.table, &sched, m, eps, &frame_star.lambdas);
        if !difference_check.passed {
            return Err(resonance_error(m, DivisorKind::Difference, &difference_check));
        }

        // Sylvester: S^' = eps (A* S^ - S^ A*) + B*
        let b_star = b_star.oscillation();
        let rr = b_star.left_mul_matrix(&frame_star.c_inv)?.right_mul_matrix(&frame_star.c)?;
        let ls = frame_star.lambdas.clone();
        let gamma_hat = rr.divide_entrywise(
            |k, i, j| {
                let w = crate::torus::dot(k, &omega);
                Complex64::new(0.0, w) - (ls[i] - ls[j]) * eps
            },
            1e-300,
        )?;
        let mut s_hat = gamma_hat.left_mul_matrix(&frame_star.c)?.right_mul_matrix(&frame_star.c_inv)?.with_rho(widths.rho_next);
        s_hat.realify();
        let asc = complex_matrix(&a_star);
        let syl_res = s_hat
            .derivative_along(&omega)
            .sub(&s_hat.left_mul_matrix(&asc)?.sub(&s_hat.right_mul_matrix(&asc)?)?.scale(eps))?
            .sub(&b_star)?
            .max_abs();
        let b_scale = b_star.max_abs();
        let s_mat = s_hat.scale(s);
        let norm_s = s_mat.majorant_norm(widths.rho_next)?;
        let es_norm = eps * norm_s;
        if es_norm >= 1.0 {
            return Err(Error::NeumannDivergence { value: es_norm });
        }

        // linear change z = (I + eps S) z'
        let es = s_mat.scale(eps);
        let mul_s = |a: &FourierSeries, b: &FourierSeries| a.mul(b, &trunc);
        let add_s = |a: &FourierSeries, b: &FourierSeries| a.add(b);
        let calb = self.neumann(&es, &b_star.mul(&s_hat, &trunc)?, mul_s, add_s)?;
        let a_next = &a_star + real_mean(&calb).scale(eps * s * s);
        let mut b_next = calb.oscillation().scale(eps).with_rho(widths.rho_next);
        b_next.realify();
        let mut p_next = self.neumann(&es, &p_star, mul_s, add_s)?.with_rho(widths.rho_next);
        p_next.realify();
        let lin = FourierSeries::identity(d, n, widths.rho_next).add(&es)?;
        let zero = FourierSeries::zero(d, Shape::vector(n), widths.rho_next);
        let h_sub = h_star.substitute(&zero, &lin, &trunc)?;
        let mut h_next = self
            .neumann(&es, &h_sub, |a, f: &TaylorFourierField| f.left_mul_series(a, &trunc), |a, b| a.add(b))?
            .degree_part(2, trunc.deg_max.max(2))
            .with_rho(widths.rho_next);
        h_next.realify();
        let r_next = r_star / (1.0 + es_norm);
        let k_next = (1.0 + es_norm).powi(2) / (1.0 - es_norm) * st.k_curv;
        let h_next = h_next.with_radius(r_next);
        let frame_next = perturbation_check(&self.base, &a_next)?;

        // accumulators
        let psi = st.psi.add(&st.phi.mul(&u, &trunc)?)?;
        let phi = st.phi.mul(&lin, &trunc)?;

        let next = IterationState {
            m: m + 1,
            eps,
            a: a_next,
            b: b_next,
            p: p_next,
            h: h_next,
            r: r_next,
            k_curv: k_next,
            frame: frame_next,
            phi,
            psi,
        };

        let conjugacy_defect = if self.cfg.conjugacy_samples > 0 {
            Some(conjugacy_defect(&st, &next, &u, &s_mat, &omega, self.cfg.conjugacy_samples, self.cfg.seed.wrapping_add(m as u64))?)
        } else {
            None
        };

        let norm_b = st.b.majorant_norm(widths.rho)?;
        let norm_p = st.p.majorant_norm(widths.rho)?;
        let norm_b_star = b_star.majorant_norm(widths.sigma)?;
        if self.cfg.ledger {
            let constants = step_constants(&sched, d, m, self.base.beta0, self.base.mu, eps, &self.cfg.ledger_constants)?;
            let measured = StepMeasurements {
                m,
                eps,
                s,
                beta0: self.base.beta0,
                mu: self.base.mu,
                norm_a: real_norm_inf(&st.a),
                norm_b,
                norm_p,
                norm_u,
                k_m: st.k_curv,
                k_measured: st.h.curvature_bound(widths.rho, st.r)?,
                r: st.r,
                norm_a_star: real_norm_inf(&a_star),
                norm_b_star,
                norm_p_star: p_star.majorant_norm(widths.sigma)?,
                k_star_measured: h_star.curvature_bound(widths.sigma, r_star)?,
                r_star,
                norm_s,
                norm_s_hat: s_hat.majorant_norm(widths.rho_next)?,
                norm_a_next: real_norm_inf(&next.a),
                norm_b_next: next.b.majorant_norm(widths.rho_next)?,
                norm_p_next: next.p.majorant_norm(widths.rho_next)?,
                k_next,
                k_next_measured: next.h.curvature_bound(widths.rho_next, r_next)?,
                r_next,
            };
            let checks = step_checks(&constants, &measured);
            let failed: Vec<String> = checks.iter().filter(|c| !c.holds).map(|c| c.name.clone()).collect();
            self.ledger.record(StepLedger { constants, measured, checks });
            if self.cfg.strict_ledger {
                if let Some(name) = failed.first() {
                    return Err(Error::LedgerViolation(format!("m={m}: {name}")));
                }
            }
        }

        if self.cfg.keep_snapshots {
            self.snapshots.push(StepSnapshot {
                m,
                a: st.a.clone(),
                a_star: a_star.clone(),
                b_scaled: st.b.scale(s),
                p_scaled: st.p.scale(s),
                b_star_scaled: b_star.scale(s),
                p_star_scaled: p_star.scale(s * s),
                u: u.clone(),
                s_mat: s_mat.clone(),
                h: st.h.clone(),
                h_star: h_star.clone(),
                c: st.frame.c.clone(),
                c_star: frame_star.c.clone(),
                lambdas: st.frame.lambdas.clone(),
                lambdas_star: frame_star.lambdas.clone(),
                r: st.r,
                norm_u,
                norm_b,
                norm_p,
                norm_b_star,
                norm_s,
                k_curv: st.k_curv,
            });
        }

        self.steps.push(StepRecord {
            m,
            s,
            p_decay: st.p_decay(),
            b_decay: st.b_decay(),
            norm_p,
            norm_b,
            norm_u,
            norm_s,
            r: st.r,
            k_curv: st.k_curv,
            homological_residual: hom_res * s,
            homological_residual_rel: if p_scale > 0.0 { hom_res / p_scale } else { 0.0 },
            sylvester_residual: syl_res * s,
            sylvester_residual_rel: if b_scale > 0.0 { syl_res / b_scale } else { 0.0 },
            conjugacy_defect,
            eigen_check,
            difference_check,
            frame: st.frame.summary(),
            frame_star: frame_star.summary(),
        });
        self.state = next;
        Ok(self.steps.last().expect("a record was just pushed"))
    }

    /// Iterates until `eps^{2^m+1} |p_m| <= p_tol`.
    pub fn run(&mut self) -> Result<()> {
        let mut growth = 0;
        let mut last = f64::INFINITY;
        loop {
            let decay = self.state.p_decay();
            if decay <= self.cfg.schedule.p_tol {
                return Ok(());
            }
            if decay > last {
                growth += 1;
                if growth >= self.cfg.divergence_window {
                    return Err(Error::Divergence { m: self.state.m, window: self.cfg.divergence_window });
                }
            } else {
                growth = 0;
            }
            last = decay;
            if self.state.m >= self.cfg.schedule.m_max {
                return Err(Error::MaxIterations { m_max: self.cfg.schedule.m_max });
            }
            self.step()?;
        }
    }

    pub fn report(&self) -> KamReport {
        let st = &self.state;
        KamReport {
            eps: st.eps,
            converged: st.p_decay() <= self.cfg.schedule.p_tol,
            m_final: st.m,
            p_decay_final: st.p_decay(),
            final_state: FinalState {
                m: st.m,
                s: st.scale(),
                p_decay: st.p_decay(),
                b_decay: st.b_decay(),
                norm_p: st.p.norm(),
                norm_b: st.b.norm(),
                r: st.r,
                k_curv: st.k_curv,
            },
            steps: self.steps.clone(),
            ledger: self.ledger.clone(),
            a_final: (0..st.a.nrows()).map(|i| st.a.row(i).iter().cloned().collect()).collect(),
            frame_final: st.frame.summary(),
            phi: st.phi.clone(),
            psi: st.psi.clone(),
            h_final: st.h.clone(),
            warnings: self.warnings.iter().cloned().chain(self.ledger.failures.iter().map(|f| format!("ledger: {f}"))).collect(),
        }
    }
}

fn resonance_error(m: usize, kind: DivisorKind, check: &DivisorCheck) -> Error {
    let w = check.worst.clone().expect("a failed check names its mode");
    Error::Resonant { m, kind, k: w.k, i: w.i.unwrap_or(0), j: w.j, lhs: w.lhs, rhs: w.rhs }
}

/// Largest relative mismatch of
/// `F_m(theta, u + (I + eps S) w)` against
/// `w.grad u + eps (w.grad S) w + (I + eps S) F_{m+1}(theta, w)`.
fn conjugacy_defect(
    cur: &IterationState,
    next: &IterationState,
    u: &FourierSeries,
    s_mat: &FourierSeries,
    omega: &[f64],
    samples: usize,
    seed: u64,
) -> Result<f64> {
    let n = cur.a.nrows();
    let d = omega.len();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let du = u.derivative_along(omega);
    let ds = s_mat.derivative_along(omega);
    let radius = 0.5 * next.r;
    let mut worst: f64 = 0.0;
    for _ in 0..samples {
        let theta: Vec<f64> = (0..d).map(|_| rng.gen_range(0.0..std::f64::consts::TAU)).collect();
        let w: Vec<f64> = (0..n).map(|_| rng.gen_range(-radius..radius)).collect();
        let uv = u.eval_real(&theta);
        let sv = s_mat.eval_real(&theta);
        let z: Vec<f64> = (0..n).map(|i| uv[i] + w[i] + cur.eps * (0..n).map(|j| sv[i * n + j] * w[j]).sum::<f64>()).collect();
        let lhs = cur.field(&theta, &z);
        let f_next = next.field(&theta, &w);
        let duv = du.eval_real(&theta);
        let dsv = ds.eval_real(&theta);
        let rhs: Vec<f64> = (0..n)
            .map(|i| {
                duv[i]
                    + cur.eps * (0..n).map(|j| dsv[i * n + j] * w[j]).sum::<f64>()
                    + f_next[i]
                    + cur.eps * (0..n).map(|j| sv[i * n + j] * f_next[j]).sum::<f64>()
            })
            .collect();
        let scale = lhs.iter().map(|x| x.abs()).fold(0.0, f64::max).max(1e-300);
        let diff = lhs.iter().zip(&rhs).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max);
        worst = worst.max(diff / scale);
    }
    Ok(worst)
}
