//! First-order averaging: the homological equation `w . grad u = f~`, the
//! near-identity change `x = y + eps^a u(theta, y)`, the transformed
//! perturbation `g1`, and the normal form around an equilibrium of the
//! averaged field.
//!
//! The transformed field is `y' = eps^a fbar(y) + eps^{2a} g1(theta, y, eps)`
//! with
//! `g1 = (I + e Du)^{-1} [(f(y + e u) - f(y)) / e + s G] - Du (I + e Du)^{-1} fbar`,
//! where `e = eps^a`, `s = eps^b / e^2` and `G = g(theta, y + e u, eps)`.
//! The inverse is applied as a truncated Neumann series.

use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::kam::ledger::varpi;
use crate::spectra::{diagonalize, SpectralFrame};
use crate::system::SystemSpec;
use crate::torus::{FourierSeries, Frequency, Shape, TaylorFourierField, Truncation};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct AveragingOptions {
    pub trunc: Truncation,
    pub neumann_terms: usize,
    /// Divisors `|<k,w>|` below this are treated as exact resonances.
    pub divisor_floor: f64,
}

impl Default for AveragingOptions {
    fn default() -> Self {
        AveragingOptions { trunc: Truncation::new(30, 8), neumann_terms: 8, divisor_floor: 1e-13 }
    }
}

/// Angle average of the field.
pub fn compute_average(f: &TaylorFourierField) -> TaylorFourierField {
    f.average()
}

/// Zero-mean solution of `w . grad_theta u = f - fbar`, coefficient by coefficient.
pub fn solve_homological(f: &TaylorFourierField, freq: &Frequency, floor: f64) -> Result<TaylorFourierField> {
    f.oscillation().try_map_coeffs(f.shape(), |c| c.integrate_along(&freq.omega, floor))
}

/// Comparison of `|u|_rho` with `|f|_{2 rho} varpi(tau, rho) / gamma`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct HomologicalBound {
    pub u_norm: f64,
    pub f_norm: f64,
    pub varpi: f64,
    pub bound: f64,
    pub holds: bool,
}

pub fn homological_bound(f: &TaylorFourierField, u: &TaylorFourierField, freq: &Frequency, rho: f64, r: f64) -> Result<HomologicalBound> {
    let u_norm = u.majorant_norm(rho, r)?;
    let f_norm = f.oscillation().majorant_norm(2.0 * rho, r)?;
    let w = varpi(freq.dim(), freq.tau, rho)?.value;
    let bound = f_norm * w / freq.gamma;
    Ok(HomologicalBound { u_norm, f_norm, varpi: w, bound, holds: u_norm <= bound })
}

/// Output of the averaging change of variables at a fixed `eps`.
#[derive(Clone, Debug, PartialEq)]
pub struct AveragingResult {
    pub eps: f64,
    /// `eps^a`, the small parameter of the transformed system.
    pub eps_hat: f64,
    pub f_bar: TaylorFourierField,
    pub u: TaylorFourierField,
    pub du: TaylorFourierField,
    pub g1: TaylorFourierField,
    /// `|Du|_{rho, r}`.
    pub du_norm: f64,
    /// Bound on the Neumann truncation error relative to its input.
    pub neumann_tail: f64,
    pub homological: HomologicalBound,
}

/// Serializable digest of an [`AveragingResult`].
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct AveragingSummary {
    pub eps: f64,
    pub eps_hat: f64,
    pub du_norm: f64,
    pub eps_du: f64,
    pub neumann_tail: f64,
    pub u_norm: f64,
    pub g1_norm: f64,
    pub homological: HomologicalBound,
}

impl AveragingResult {
    pub fn summary(&self, rho: f64, r: f64) -> Result<AveragingSummary> {
        Ok(AveragingSummary {
            eps: self.eps,
            eps_hat: self.eps_hat,
            du_norm: self.du_norm,
            eps_du: self.eps_hat * self.du_norm,
            neumann_tail: self.neumann_tail,
            u_norm: self.u.majorant_norm(rho, r)?,
            g1_norm: self.g1.majorant_norm(rho, r)?,
            homological: self.homological.clone(),
        })
    }
}

fn neumann_apply(du: &TaylorFourierField, x: &TaylorFourierField, e: f64, terms: usize, trunc: &Truncation) -> Result<TaylorFourierField> {
    let mut acc = x.clone();
    let mut term = x.clone();
    for _ in 1..terms {
        term = du.mul(&term, trunc)?.scale(-e);
        if term.is_empty() {
            break;
        }
        acc = acc.add(&term)?;
    }
    Ok(acc)
}

/// Applies the averaging change of variables at `eps`.
pub fn averaging_transform(spec: &SystemSpec, eps: f64, opts: &AveragingOptions) -> Result<AveragingResult> {
    if !(eps > 0.0) {
        return Err(Error::InvalidInput(format!("eps must be positive, got {eps}")));
    }
    let trunc = &opts.trunc;
    let e = eps.powf(spec.a);
    let s = eps.powf(spec.b) / (e * e);
    let f = &spec.f;
    let f_bar = compute_average(f);
    let u = solve_homological(f, &spec.freq, opts.divisor_floor)?;
    let du = u.jacobian()?;
    let du_norm = du.majorant_norm(spec.rho, spec.r)?;
    if e * du_norm > 0.5 {
        return Err(Error::EpsilonTooLarge { value: e * du_norm });
    }
    let map: Vec<TaylorFourierField> = (0..spec.n)
        .map(|j| {
            let mut id = TaylorFourierField::zero(spec.n, spec.dim(), Shape::SCALAR, 0, trunc.deg_max, f.rho(), spec.r);
            let one = FourierSeries::constant(spec.dim(), Shape::SCALAR, vec![Complex64::new(1.0, 0.0)], f.rho())?;
            let mut alpha = crate::torus::Exponent::from_elem(0, spec.n);
            alpha[j] = 1;
            id.insert(&alpha, &one)?;
            id.axpy(e, &u.component(j))
        })
        .collect::<Result<_>>()?;
    let shifted = f.compose(&map, trunc)?;
    let delta = shifted.sub(f)?.scale(1.0 / e);
    let g_eps = spec.g_at(eps)?;
    let mut rhs = delta;
    if !g_eps.is_empty() {
        rhs = rhs.axpy(s, &g_eps.compose(&map, trunc)?)?;
    }
    let part1 = neumann_apply(&du, &rhs, e, opts.neumann_terms, trunc)?;
    let part2 = du.mul(&neumann_apply(&du, &f_bar, e, opts.neumann_terms, trunc)?, trunc)?;
    let mut g1 = part1.sub(&part2)?.with_rho(spec.rho).with_radius(spec.r);
    g1.realify();
    let q = e * du_norm;
    let neumann_tail = q.powi(opts.neumann_terms as i32) / (1.0 - q);
    let homological = homological_bound(f, &u, &spec.freq, spec.rho, spec.r)?;
    Ok(AveragingResult { eps, eps_hat: e, f_bar, u, du, g1, du_norm, neumann_tail, homological })
}

/// `(I + e Du)^{-1} (e f(theta, x) + eps^b g(theta, x, eps) - e w.grad u)` at
/// `x = y + e u(theta, y)`: the transformed field evaluated directly.
pub fn pushforward_rhs(spec: &SystemSpec, avg: &AveragingResult, g_eps: &TaylorFourierField, theta: &[f64], y: &[f64]) -> Result<Vec<f64>> {
    let e = avg.eps_hat;
    let n = spec.n;
    let u = avg.u.eval_real(theta, y);
    let x: Vec<f64> = y.iter().zip(&u).map(|(a, b)| a + e * b).collect();
    let f = spec.f.eval_real(theta, &x);
    let g = g_eps.eval_real(theta, &x);
    let ut = avg.u.derivative_along(&spec.freq.omega).eval_real(theta, y);
    let eb = avg.eps.powf(spec.b);
    let v = DVector::from_iterator(n, (0..n).map(|i| e * f[i] + eb * g[i] - e * ut[i]));
    let jac = avg.du.eval_real(theta, y);
    let m = DMatrix::from_fn(n, n, |i, j| if i == j { 1.0 } else { 0.0 } + e * jac[i * n + j]);
    let rhs = m.lu().solve(&v).ok_or_else(|| Error::InvalidInput("I + e Du is singular at a sample".into()))?;
    Ok(rhs.as_slice().to_vec())
}

/// Relative mismatch between the transformed field and the pushforward of
/// the original field under `x = y + e u`, at the given samples `(theta, y)`.
pub fn pushforward_defect(spec: &SystemSpec, avg: &AveragingResult, samples: &[(Vec<f64>, Vec<f64>)]) -> Result<f64> {
    let e = avg.eps_hat;
    let g_eps = spec.g_at(avg.eps)?;
    let mut worst: f64 = 0.0;
    for (theta, y) in samples {
        let fb = avg.f_bar.eval_real(theta, y);
        let g1 = avg.g1.eval_real(theta, y);
        let lhs: Vec<f64> = fb.iter().zip(&g1).map(|(a, b)| e * a + e * e * b).collect();
        let rhs = pushforward_rhs(spec, avg, &g_eps, theta, y)?;
        let scale = rhs.iter().map(|v| v.abs()).fold(0.0, f64::max).max(1e-300);
        let diff = lhs.iter().zip(&rhs).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max);
        worst = worst.max(diff / scale);
    }
    Ok(worst)
}

/// Equilibrium of the averaged field in local coordinates `x - center`.
#[derive(Clone, Debug, PartialEq)]
pub struct Equilibrium {
    pub x: Vec<f64>,
    pub jacobian: DMatrix<f64>,
    pub residual: f64,
    pub iterations: usize,
}

/// Newton's method on the averaged field from `x_init`.
///
/// Fails with `DegenerateJacobian` when the Jacobian at the root is
/// numerically singular, which also catches convergence to a multiple root.
pub fn find_equilibrium(f_bar: &TaylorFourierField, x_init: &[f64], tol: f64, max_iter: usize) -> Result<Equilibrium> {
    let n = f_bar.n();
    if x_init.len() != n {
        return Err(Error::ShapeMismatch(format!("x_init has length {}, expected {n}", x_init.len())));
    }
    let jac_field = f_bar.jacobian()?;
    let theta = vec![0.0; f_bar.dim()];
    let eval = |x: &[f64]| DVector::from_vec(f_bar.eval_real(&theta, x));
    let jac = |x: &[f64]| DMatrix::from_row_slice(n, n, &jac_field.eval_real(&theta, x));
    let sigma_floor = |j: &DMatrix<f64>| 1e-4 * j.amax().max(1.0);
    let mut x = DVector::from_column_slice(x_init);
    let mut res = eval(x.as_slice());
    let mut it = 0;
    while res.amax() > tol {
        if it == max_iter {
            return Err(Error::NoConvergence { iterations: it, residual: res.amax() });
        }
        let j = jac(x.as_slice());
        let step = j.clone().lu().solve(&(-&res));
        let step = match step {
            Some(s) if s.iter().all(|v| v.is_finite()) => s,
            _ => return Err(Error::DegenerateJacobian { sigma_min: 0.0 }),
        };
        x += step;
        res = eval(x.as_slice());
        it += 1;
    }
    let j = jac(x.as_slice());
    let sigma_min = j.clone().svd(false, false).singular_values.min();
    if sigma_min < sigma_floor(&j) {
        return Err(Error::DegenerateJacobian { sigma_min });
    }
    Ok(Equilibrium { x: x.as_slice().to_vec(), jacobian: j, residual: res.amax(), iterations: it })
}

/// `z' = e (A + e B(theta)) z + e^2 p(theta) + e h(theta, z)` around the
/// equilibrium `x*`, with `e = eps^a`.
#[derive(Clone, Debug, PartialEq)]
pub struct NormalForm {
    pub eps: f64,
    pub a: DMatrix<f64>,
    pub b: FourierSeries,
    pub p: FourierSeries,
    pub h: TaylorFourierField,
    pub rho: f64,
    pub r: f64,
    /// Equilibrium in local coordinates `x - center`.
    pub x_star: Vec<f64>,
}

pub fn to_normal_form(spec: &SystemSpec, avg: &AveragingResult, eq: &Equilibrium, trunc: &Truncation) -> Result<NormalForm> {
    let d = spec.dim();
    let n = spec.n;
    let shift = FourierSeries::from_real_vector(d, &eq.x, 2.0 * spec.rho);
    let id = FourierSeries::identity(d, n, 2.0 * spec.rho);
    let fb = avg.f_bar.substitute(&shift, &id, trunc)?;
    let g1 = avg.g1.substitute(&shift.clone().with_rho(spec.rho), &id.clone().with_rho(spec.rho), trunc)?;
    let a_mat = fb.linear_matrix()?.mean_matrix().map(|c| c.re);
    let mut p = g1.constant_term().with_rho(spec.rho);
    let mut b = g1.linear_matrix()?.with_rho(spec.rho);
    let deg_hi = trunc.deg_max.max(2);
    let h_f = fb.degree_part(2, deg_hi).with_rho(spec.rho);
    let h_g = g1.degree_part(2, deg_hi).with_rho(spec.rho);
    let mut h = h_f.axpy(avg.eps_hat, &h_g)?.with_radius(spec.r);
    p.realify();
    b.realify();
    h.realify();
    Ok(NormalForm { eps: avg.eps_hat, a: a_mat, b, p, h, rho: spec.rho, r: spec.r, x_star: eq.x.clone() })
}

/// Averages, finds the equilibrium and diagonalizes its linearization.
pub fn prepare(spec: &SystemSpec, eps: f64, x_init: &[f64], opts: &AveragingOptions, margin_fraction: f64) -> Result<(AveragingResult, Equilibrium, SpectralFrame, NormalForm)> {
    let avg = averaging_transform(spec, eps, opts)?;
    let local: Vec<f64> = x_init.iter().zip(&spec.center).map(|(x, c)| x - c).collect();
    let eq = find_equilibrium(&avg.f_bar, &local, 1e-13, 100)?;
    let frame = diagonalize(&eq.jacobian, margin_fraction)?;
    let nf = to_normal_form(spec, &avg, &eq, &opts.trunc)?;
    Ok((avg, eq, frame, nf))
}
