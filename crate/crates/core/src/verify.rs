//! Independent checks of computed responses: a residual on an angle grid,
//! the exact Fourier solution of forced linear systems, and fixed-step RK4
//! integration with a shadowing distance.

use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::system::SystemSpec;
use crate::torus::{dot, FourierSeries, Frequency, Shape};

/// Smallest residual grid accepted, per angle.
pub const MIN_GRID: usize = 8;

/// RK4 stability interval on the negative real axis.
const RK4_STABILITY: f64 = 2.78;

fn grid_points(d: usize, per_axis: usize) -> impl Iterator<Item = Vec<f64>> {
    let total = per_axis.pow(d as u32);
    (0..total).map(move |idx| {
        let mut rem = idx;
        (0..d)
            .map(|_| {
                let t = std::f64::consts::TAU * (rem % per_axis) as f64 / per_axis as f64;
                rem /= per_axis;
                t
            })
            .collect()
    })
}

/// `sup_theta |w . grad X - eps^a f(theta, X) - eps^b g(theta, X, eps)|` over a
/// uniform grid with `per_axis` points per angle.
pub fn residual(spec: &SystemSpec, candidate: &FourierSeries, eps: f64, per_axis: usize) -> Result<f64> {
    if per_axis < MIN_GRID {
        return Err(Error::InvalidInput(format!("residual grid needs at least {MIN_GRID} points per angle, got {per_axis}")));
    }
    if candidate.shape() != Shape::vector(spec.n) || candidate.dim() != spec.dim() {
        return Err(Error::ShapeMismatch(format!("candidate must be a {}-vector series on T^{}", spec.n, spec.dim())));
    }
    let g = spec.g_at(eps)?;
    let dx = candidate.derivative_along(&spec.freq.omega);
    let mut worst: f64 = 0.0;
    for theta in grid_points(spec.dim(), per_axis) {
        let x = candidate.eval_real(&theta);
        let lhs = dx.eval_real(&theta);
        let rhs = spec.rhs_at_angle(&g, &theta, &x, eps);
        for (a, b) in lhs.iter().zip(&rhs) {
            worst = worst.max((a - b).abs());
        }
    }
    Ok(worst)
}

/// Exact response of `x' = eps (A x + v(w t))`:
/// `x_k = eps (i <k, w> I - eps A)^{-1} v_k`.
pub fn linear_fourier_oracle(a: &DMatrix<f64>, v: &FourierSeries, eps: f64, freq: &Frequency) -> Result<FourierSeries> {
    let n = a.nrows();
    if a.ncols() != n || v.shape() != Shape::vector(n) || v.dim() != freq.dim() {
        return Err(Error::ShapeMismatch("oracle needs a square A and a matching vector series".into()));
    }
    let ac = a.map(|x| Complex64::new(x, 0.0));
    let mut coeffs = Vec::with_capacity(v.len());
    for (k, vk) in v.iter() {
        let w = dot(k, &freq.omega);
        let m = DMatrix::<Complex64>::identity(n, n) * Complex64::new(0.0, w) - ac.scale(eps);
        let rhs = DVector::from_iterator(n, vk.iter().map(|c| c * eps));
        let lu = m.lu();
        let x = lu.solve(&rhs).ok_or_else(|| Error::SmallDivisor { k: k.to_vec(), magnitude: 0.0, floor: 0.0 })?;
        if x.iter().any(|c| !c.re.is_finite() || !c.im.is_finite()) {
            return Err(Error::SmallDivisor { k: k.to_vec(), magnitude: 0.0, floor: 0.0 });
        }
        coeffs.push((k.clone(), x.iter().cloned().collect::<Vec<_>>()));
    }
    FourierSeries::from_coeffs(v.dim(), Shape::vector(n), v.rho(), v.is_real(), coeffs)
}

/// One classical RK4 step of `x' = f(t, x)`.
pub fn rk4_step<F>(f: &F, t: f64, x: &[f64], dt: f64) -> Vec<f64>
where
    F: Fn(f64, &[f64]) -> Vec<f64>,
{
    let axpy = |base: &[f64], k: &[f64], s: f64| base.iter().zip(k).map(|(a, b)| a + s * b).collect::<Vec<f64>>();
    let k1 = f(t, x);
    let k2 = f(t + 0.5 * dt, &axpy(x, &k1, 0.5 * dt));
    let k3 = f(t + 0.5 * dt, &axpy(x, &k2, 0.5 * dt));
    let k4 = f(t + dt, &axpy(x, &k3, dt));
    (0..x.len()).map(|i| x[i] + dt / 6.0 * (k1[i] + 2.0 * k2[i] + 2.0 * k3[i] + k4[i])).collect()
}

/// Fixed-step RK4 from `t = 0` to `t_end`, calling `observe(t, x)` after
/// every step. Fails on non-finite or very large states.
pub fn rk4_integrate<F, O>(f: F, x0: &[f64], t_end: f64, dt: f64, mut observe: O) -> Result<Vec<f64>>
where
    F: Fn(f64, &[f64]) -> Vec<f64>,
    O: FnMut(f64, &[f64]),
{
    if !(dt > 0.0 && t_end >= 0.0) {
        return Err(Error::InvalidInput(format!("need dt > 0 and t_end >= 0, got {dt} and {t_end}")));
    }
    let steps = (t_end / dt).round() as usize;
    let mut x = x0.to_vec();
    for i in 0..steps {
        let t = i as f64 * dt;
        x = rk4_step(&f, t, &x, dt);
        let t1 = t + dt;
        if x.iter().any(|v| !v.is_finite() || v.abs() > 1e12) {
            return Err(Error::BlowUp { t: t1 });
        }
        observe(t1, &x);
    }
    Ok(x)
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct IntegrationOptions {
    pub t_end: f64,
    pub dt: f64,
    /// Fraction of `[0, t_end]` ignored before measuring shadowing.
    pub discard_fraction: f64,
    /// Number of stored trajectory samples.
    pub samples: usize,
}

impl Default for IntegrationOptions {
    fn default() -> Self {
        IntegrationOptions { t_end: 1e3, dt: 0.05, discard_fraction: 0.2, samples: 200 }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Trajectory {
    pub times: Vec<f64>,
    pub states: Vec<Vec<f64>>,
    /// `max |x(t) - X(w t)|` after the transient, if a candidate was given.
    pub shadowing: Option<f64>,
    pub final_state: Vec<f64>,
    pub stability_bound: f64,
}

/// Upper bound on `|D_x rhs|` near `x0`, from the majorant norm of the
/// Jacobians on the ball of radius `max(r, |x0 - center|)`.
pub fn lipschitz_bound(spec: &SystemSpec, x0: &[f64], eps: f64) -> Result<f64> {
    let dist = x0.iter().zip(&spec.center).map(|(a, c)| (a - c).abs()).fold(0.0, f64::max);
    let radius = spec.r.max(dist);
    let jf = spec.f.jacobian()?.majorant_norm(0.0, radius)?;
    let g = spec.g_at(eps)?;
    let jg = if g.is_empty() { 0.0 } else { g.jacobian()?.majorant_norm(0.0, radius)? };
    Ok(eps.powf(spec.a) * jf + eps.powf(spec.b) * jg)
}

/// Integrates the system from `x0` and measures the distance to `candidate`.
pub fn integrate_oracle(spec: &SystemSpec, x0: &[f64], eps: f64, opts: &IntegrationOptions, candidate: Option<&FourierSeries>) -> Result<Trajectory> {
    if x0.len() != spec.n {
        return Err(Error::ShapeMismatch(format!("initial state has length {}, expected {}", x0.len(), spec.n)));
    }
    if !(0.0..1.0).contains(&opts.discard_fraction) {
        return Err(Error::InvalidInput(format!("discard fraction must lie in [0, 1), got {}", opts.discard_fraction)));
    }
    let lip = lipschitz_bound(spec, x0, eps)?;
    let bound = if lip > 0.0 { RK4_STABILITY / lip } else { f64::INFINITY };
    if opts.dt > bound {
        return Err(Error::StepRejected { dt: opts.dt, bound });
    }
    let g = spec.g_at(eps)?;
    let rhs = |t: f64, x: &[f64]| spec.rhs(&g, t, x, eps);
    let steps = (opts.t_end / opts.dt).round().max(1.0) as usize;
    let stride = (steps / opts.samples.max(1)).max(1);
    let t_start = opts.discard_fraction * opts.t_end;
    let mut times = Vec::new();
    let mut states = Vec::new();
    let mut worst: f64 = 0.0;
    let mut count = 0usize;
    let final_state = rk4_integrate(rhs, x0, opts.t_end, opts.dt, |t, x| {
        count += 1;
        if count % stride == 0 {
            times.push(t);
            states.push(x.to_vec());
        }
        if let Some(c) = candidate {
            if t >= t_start {
                let theta: Vec<f64> = spec.freq.omega.iter().map(|w| w * t).collect();
                let xc = c.eval_real(&theta);
                let dist = x.iter().zip(&xc).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max);
                worst = worst.max(dist);
            }
        }
    })?;
    Ok(Trajectory { times, states, shadowing: candidate.map(|_| worst), final_state, stability_bound: bound })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::demo;

    #[test]
    fn oracle_matches_hand_solve_at_first_harmonic() {
        let freq = Frequency::new(vec![1.0, demo::GOLDEN], 0.1, 1.2).unwrap();
        let a = DMatrix::from_row_slice(2, 2, &[0.0, 1.0, -1.0, 0.0]);
        let mut v = FourierSeries::zero(2, Shape::vector(2), 1.0);
        v.insert(&[1, 0], &[Complex64::new(0.5, 0.0), Complex64::new(0.0, 0.0)]).unwrap();
        v.insert(&[-1, 0], &[Complex64::new(0.5, 0.0), Complex64::new(0.0, 0.0)]).unwrap();
        let x = linear_fourier_oracle(&a, &v, 0.1, &freq).unwrap();
        // (i I - 0.1 A) x = (0.05, 0) by Cramer's rule
        let i = Complex64::new(0.0, 1.0);
        let det = i * i + 0.01;
        let x1 = 0.05 * i / det;
        let x2 = Complex64::new(-0.005, 0.0) / det;
        let got = x.coeff(&[1, 0]).unwrap();
        assert!((got[0] - x1).norm() < 1e-15);
        assert!((got[1] - x2).norm() < 1e-15);
    }

    #[test]
    fn constant_forcing_gives_stationary_balance() {
        let freq = Frequency::new(vec![1.0], 0.1, 0.5).unwrap();
        let a = DMatrix::from_row_slice(1, 1, &[-2.0]);
        let v = FourierSeries::from_real_vector(1, &[3.0], 1.0);
        let x = linear_fourier_oracle(&a, &v, 0.01, &freq).unwrap();
        assert!((x.mean()[0].re - 1.5).abs() < 1e-14);
    }

    #[test]
    fn small_grids_are_rejected() {
        let spec = SystemSpec::from_record(&demo::elliptic()).unwrap();
        let c = FourierSeries::zero(2, Shape::vector(2), 0.25);
        assert!(residual(&spec, &c, 1e-3, 4).is_err());
    }

    #[test]
    fn rk4_integrates_exponential() {
        let x = rk4_integrate(|_, x: &[f64]| vec![-x[0]], &[1.0], 1.0, 1e-3, |_, _| {}).unwrap();
        assert!((x[0] - (-1.0f64).exp()).abs() < 1e-12);
    }

    #[test]
    fn rk4_detects_blow_up() {
        let err = rk4_integrate(|_, x: &[f64]| vec![x[0] * x[0]], &[1.0], 2.0, 1e-3, |_, _| {}).unwrap_err();
        assert!(matches!(err, Error::BlowUp { .. }));
    }
}
