//! Preprocessing that brings other system classes to the standard form
//! `x' = eps^a f(w t, x) + eps^b g(w t, x, eps)`.
//!
//! - [`rescale_general`]: reparametrize `eps = e^delta` so that the averaged
//!   system has the form `y' = e^{a0} fbar(y) + e^{b0} g2(w t, y, e)`.
//! - [`second_order_reduce`]: `x'' = eps^a F(w t, x, x') + eps^b G` becomes a
//!   first-order system in `(x, y)` with `x' = eps^{a/2} y`.
//! - [`degenerate_scale`]: `x' = phi(x) + h(w t, x) + eps f(w t, x)` with
//!   `phi` homogeneous of degree `l` becomes a system in `t = eps^{1/l}`.

use nalgebra::DMatrix;
use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::averaging::{averaging_transform, find_equilibrium, pushforward_rhs, AveragingOptions, AveragingResult};
use crate::error::{Error, Result};
use crate::system::{field_from_records_with, field_records, CoeffRecord, EpsilonRecord, EpsilonTerm, SystemSpec};
use crate::torus::{Exponent, FourierSeries, Frequency, Shape, TaylorFourierField};

const EXPONENT_TOL: f64 = 1e-12;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Branch {
    /// `b >= 2a`: `b0 = 2 delta a`.
    AtLeastTwiceA,
    /// `b < 2a`: `b0 = delta b`.
    BelowTwiceA,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ExponentPlan {
    pub a: f64,
    pub b: f64,
    pub delta: f64,
    pub a0: f64,
    pub b0: f64,
    pub branch: Branch,
    /// Lower cutoff exponent of the window `(e1^{delta1}, e1)`; only for `a0 > 1`.
    pub delta1: Option<f64>,
}

impl ExponentPlan {
    /// Smallest admissible `delta >= 1`.
    pub fn new(a: f64, b: f64) -> Result<Self> {
        if !(a > 0.0 && b > a && b.is_finite()) {
            return Err(Error::InvalidExponents(format!("need b > a > 0, got a = {a}, b = {b}")));
        }
        let twice = (b - 2.0 * a).abs() <= EXPONENT_TOL * b.max(1.0);
        let delta = if twice {
            (1.0 / a).max(1.0)
        } else {
            [1.0, 1.0 / a, 1.0 / (b - 2.0 * a).abs(), 1.0 / (b - a)].into_iter().fold(0.0, f64::max)
        };
        let a0 = delta * a;
        let (b0, branch) = if twice || b > 2.0 * a { (2.0 * delta * a, Branch::AtLeastTwiceA) } else { (delta * b, Branch::BelowTwiceA) };
        let delta1 = if a0 > 1.0 + EXPONENT_TOL { Some(1.0 + 0.5 / (a0 - 1.0)) } else { None };
        Ok(ExponentPlan { a, b, delta, a0, b0, branch, delta1 })
    }
}

/// The averaged system written in the rescaled parameter `e`, evaluated
/// pointwise: `f1` and `g1` depend on `eps = e^delta` through the averaging
/// transform.
#[derive(Clone, Debug)]
pub struct RescaledSystem {
    pub plan: ExponentPlan,
    pub spec: SystemSpec,
    pub opts: AveragingOptions,
    unforced: SystemSpec,
}

/// Averaged pieces at one value of the original parameter.
pub struct RescaledParts {
    pub avg: AveragingResult,
    /// Second-order averaging remainder of `f`.
    pub f1: TaylorFourierField,
    /// Transformed `g`.
    pub g1: TaylorFourierField,
}

pub fn rescale_general(spec: &SystemSpec, opts: &AveragingOptions) -> Result<(ExponentPlan, RescaledSystem)> {
    let plan = ExponentPlan::new(spec.a, spec.b)?;
    let mut unforced = spec.clone();
    unforced.g.clear();
    Ok((plan.clone(), RescaledSystem { plan, spec: spec.clone(), opts: opts.clone(), unforced }))
}

impl RescaledSystem {
    pub fn parts(&self, e: f64) -> Result<RescaledParts> {
        let eps = e.powf(self.plan.delta);
        let avg = averaging_transform(&self.spec, eps, &self.opts)?;
        let f1 = averaging_transform(&self.unforced, eps, &self.opts)?.g1;
        // eps^{2a} g1_total = eps^{2a} f1 + eps^b g1
        let g1 = avg.g1.sub(&f1)?.scale(avg.eps_hat * avg.eps_hat / eps.powf(self.spec.b));
        Ok(RescaledParts { avg, f1, g1 })
    }

    /// `g2(theta, y, e)` at local `y`.
    pub fn g2(&self, parts: &RescaledParts, theta: &[f64], y: &[f64], e: f64) -> Vec<f64> {
        let p = &self.plan;
        let f1 = parts.f1.eval_real(theta, y);
        let g1 = parts.g1.eval_real(theta, y);
        let (cf, cg) = match p.branch {
            Branch::AtLeastTwiceA => (1.0, e.powf(p.delta * (p.b - 2.0 * p.a))),
            Branch::BelowTwiceA => (e.powf(p.delta * (2.0 * p.a - p.b)), 1.0),
        };
        f1.iter().zip(&g1).map(|(a, b)| cf * a + cg * b).collect()
    }

    /// `e^{a0} fbar(y) + e^{b0} g2(theta, y, e)` at local `y`.
    pub fn rhs(&self, theta: &[f64], y: &[f64], e: f64) -> Result<Vec<f64>> {
        let parts = self.parts(e)?;
        Ok(self.rhs_with(&parts, theta, y, e))
    }

    fn rhs_with(&self, parts: &RescaledParts, theta: &[f64], y: &[f64], e: f64) -> Vec<f64> {
        let fb = parts.avg.f_bar.eval_real(theta, y);
        let g2 = self.g2(parts, theta, y, e);
        let (ea, eb) = (e.powf(self.plan.a0), e.powf(self.plan.b0));
        fb.iter().zip(&g2).map(|(f, g)| ea * f + eb * g).collect()
    }

    /// Largest relative mismatch between [`Self::rhs`] and the original field
    /// pushed forward through the averaging change at `eps = e^delta`, over
    /// samples `(theta, y, e)`.
    pub fn identity_defect(&self, samples: &[(Vec<f64>, Vec<f64>, f64)]) -> Result<f64> {
        let mut worst: f64 = 0.0;
        for (theta, y, e) in samples {
            let parts = self.parts(*e)?;
            let lhs = self.rhs_with(&parts, theta, y, *e);
            let g_eps = self.spec.g_at(parts.avg.eps)?;
            let rhs = pushforward_rhs(&self.spec, &parts.avg, &g_eps, theta, y)?;
            worst = worst.max(relative_gap(&lhs, &rhs));
        }
        Ok(worst)
    }
}

fn relative_gap(a: &[f64], b: &[f64]) -> f64 {
    let scale = b.iter().map(|v| v.abs()).fold(0.0, f64::max).max(1e-300);
    a.iter().zip(b).map(|(x, y)| (x - y).abs()).fold(0.0, f64::max) / scale
}

/// `x'' = eps^a F(w t, x, x') + eps^b G(w t, x, x', eps)`. Fields have `2n`
/// state variables `(x - center, x')` and values in `C^n`.
#[derive(Clone, Debug, PartialEq)]
pub struct SecondOrderSpec {
    pub freq: Frequency,
    pub n: usize,
    pub a: f64,
    pub b: f64,
    pub rho: f64,
    pub r: f64,
    pub center: Vec<f64>,
    pub f: TaylorFourierField,
    pub g: Vec<EpsilonTerm>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SecondOrderRecord {
    pub n: usize,
    pub omega: Vec<f64>,
    pub gamma: f64,
    pub tau: f64,
    pub a: f64,
    pub b: f64,
    pub rho: f64,
    pub r: f64,
    #[serde(default)]
    pub center: Option<Vec<f64>>,
    pub f: Vec<CoeffRecord>,
    #[serde(default)]
    pub g: Vec<EpsilonRecord>,
}

impl SecondOrderSpec {
    pub fn from_record(rec: &SecondOrderRecord) -> Result<Self> {
        let freq = Frequency::new(rec.omega.clone(), rec.gamma, rec.tau)?;
        let (n, d) = (rec.n, freq.dim());
        let f = field_from_records_with(2 * n, n, d, 2.0 * rec.rho, rec.r, &rec.f, "f")?;
        let g = rec
            .g
            .iter()
            .enumerate()
            .map(|(i, e)| Ok(EpsilonTerm { power: e.eps_power, field: field_from_records_with(2 * n, n, d, 2.0 * rec.rho, rec.r, &e.terms, &format!("g[{i}]"))? }))
            .collect::<Result<_>>()?;
        let center = rec.center.clone().unwrap_or_else(|| vec![0.0; n]);
        if center.len() != n {
            return Err(Error::ShapeMismatch(format!("center has length {}, expected {n}", center.len())));
        }
        Ok(SecondOrderSpec { freq, n, a: rec.a, b: rec.b, rho: rec.rho, r: rec.r, center, f, g })
    }

    pub fn to_record(&self) -> SecondOrderRecord {
        SecondOrderRecord {
            n: self.n,
            omega: self.freq.omega.clone(),
            gamma: self.freq.gamma,
            tau: self.freq.tau,
            a: self.a,
            b: self.b,
            rho: self.rho,
            r: self.r,
            center: Some(self.center.clone()),
            f: field_records(&self.f),
            g: self.g.iter().map(|t| EpsilonRecord { eps_power: t.power, terms: field_records(&t.field) }).collect(),
        }
    }

    /// `x''` at time `t`, position `x` and velocity `v`.
    pub fn acceleration(&self, t: f64, x: &[f64], v: &[f64], eps: f64) -> Vec<f64> {
        let theta: Vec<f64> = self.freq.omega.iter().map(|w| w * t).collect();
        self.acceleration_at_angle(&theta, x, v, eps)
    }

    /// `x''` at angle `theta`, position `x` and velocity `v`.
    pub fn acceleration_at_angle(&self, theta: &[f64], x: &[f64], v: &[f64], eps: f64) -> Vec<f64> {
        let z: Vec<f64> = x.iter().zip(&self.center).map(|(a, c)| a - c).chain(v.iter().cloned()).collect();
        let mut out: Vec<f64> = self.f.eval_real(theta, &z).into_iter().map(|f| eps.powf(self.a) * f).collect();
        for term in &self.g {
            let gv = term.field.eval_real(theta, &z);
            let c = eps.powf(self.b + term.power);
            for (o, g) in out.iter_mut().zip(gv) {
                *o += c * g;
            }
        }
        out
    }
}

/// Spectra of `DF0` and of the doubled Jacobian `[[0, I], [DF0, 0]]`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct BranchReport {
    pub df0_eigenvalues: Vec<Complex64>,
    pub doubled_eigenvalues: Vec<Complex64>,
    /// Largest distance between a doubled eigenvalue and the nearest square
    /// root branch `+-sqrt(mu)`, in either direction.
    pub max_branch_error: f64,
    pub min_modulus: f64,
    pub min_gap: f64,
}

fn sorted_eigenvalues(m: &DMatrix<f64>) -> Vec<Complex64> {
    let mut ev: Vec<Complex64> = m.complex_eigenvalues().iter().cloned().collect();
    ev.sort_by(|a, b| a.re.total_cmp(&b.re).then(b.im.total_cmp(&a.im)));
    ev
}

fn min_gap(ev: &[Complex64]) -> f64 {
    let mut gap = f64::INFINITY;
    for i in 0..ev.len() {
        for j in i + 1..ev.len() {
            gap = gap.min((ev[i] - ev[j]).norm());
        }
    }
    gap
}

/// Compares the spectrum of `doubled` with the square-root branches of
/// `spec(df0)`; fails if `df0` has a zero or repeated eigenvalue.
pub fn doubled_spectrum(df0: &DMatrix<f64>, doubled: &DMatrix<f64>) -> Result<BranchReport> {
    let mu = sorted_eigenvalues(df0);
    let scale = df0.amax().max(1.0);
    let min_modulus = mu.iter().map(|z| z.norm()).fold(f64::INFINITY, f64::min);
    if min_modulus <= 1e-12 * scale {
        return Err(Error::Hypothesis(format!("DF0 has a zero eigenvalue (|mu| = {min_modulus:e})")));
    }
    let gap = min_gap(&mu);
    if gap <= 1e-9 * scale {
        return Err(Error::Hypothesis(format!("DF0 has a repeated eigenvalue (gap {gap:e})")));
    }
    let lam = sorted_eigenvalues(doubled);
    let roots: Vec<Complex64> = mu.iter().flat_map(|m| [m.sqrt(), -m.sqrt()]).collect();
    let dist = |z: &Complex64, set: &[Complex64]| set.iter().map(|w| (z - w).norm()).fold(f64::INFINITY, f64::min);
    let forward = lam.iter().map(|z| dist(z, &roots)).fold(0.0, f64::max);
    let backward = roots.iter().map(|z| dist(z, &lam)).fold(0.0, f64::max);
    Ok(BranchReport {
        df0_eigenvalues: mu,
        min_modulus: lam.iter().map(|z| z.norm()).fold(f64::INFINITY, f64::min),
        min_gap: min_gap(&lam),
        doubled_eigenvalues: lam,
        max_branch_error: forward.max(backward),
    })
}

/// `[[0, I], [DF0, 0]]`.
pub fn doubled_jacobian(df0: &DMatrix<f64>) -> DMatrix<f64> {
    let n = df0.nrows();
    let mut j = DMatrix::zeros(2 * n, 2 * n);
    for i in 0..n {
        j[(i, n + i)] = 1.0;
    }
    j.view_mut((n, 0), (n, n)).copy_from(df0);
    j
}

#[derive(Clone, Debug)]
pub struct SecondOrderReduction {
    /// First-order system in `(x, y)` with `x' = eps^{a/2} y`.
    pub first_order: SystemSpec,
    pub plan: ExponentPlan,
    /// Root of `F0bar` in global coordinates.
    pub x_star: Vec<f64>,
    pub df0: DMatrix<f64>,
    pub branches: BranchReport,
}

fn embed(c: &FourierSeries, offset: usize, total: usize) -> Result<FourierSeries> {
    c.map_values(
        |v| {
            let mut w = vec![Complex64::new(0.0, 0.0); total];
            w[offset..offset + v.len()].copy_from_slice(v);
            w
        },
        Shape::vector(total),
    )
}

fn add_term(terms: &mut Vec<EpsilonTerm>, power: f64, alpha: &Exponent, c: &FourierSeries, proto: &TaylorFourierField) -> Result<()> {
    let idx = match terms.iter().position(|t| (t.power - power).abs() <= EXPONENT_TOL) {
        Some(i) => i,
        None => {
            terms.push(EpsilonTerm { power, field: proto.clone() });
            terms.len() - 1
        }
    };
    terms[idx].field.insert(alpha, c)
}

/// Builds the first-order system, checks the spectral hypothesis at the root
/// of `F0bar` near `x_init`, and plans the parameter rescaling.
///
/// With `a' = a/2` and `b' = min(a, b - a/2)` the first-order system is
/// `f = (y, F(theta, x, 0))` and
/// `g = eps^{a-b'} F1 + eps^{b-a/2-b'} (0, G(theta, x, eps^{a/2} y, eps))`,
/// `F1 = eps^{-a/2} (F(theta, x, eps^{a/2} y) - F(theta, x, 0))`.
pub fn second_order_reduce(so: &SecondOrderSpec, x_init: &[f64]) -> Result<SecondOrderReduction> {
    let n = so.n;
    if !(so.a > 0.0 && so.b > so.a) {
        return Err(Error::InvalidExponents(format!("need b > a > 0, got a = {}, b = {}", so.a, so.b)));
    }
    if x_init.len() != n {
        return Err(Error::ShapeMismatch(format!("x_init has length {}, expected {n}", x_init.len())));
    }
    let d = so.freq.dim();
    let rho = so.f.rho();
    let a1 = 0.5 * so.a;
    let b1 = so.a.min(so.b - 0.5 * so.a);
    let deg_max = std::iter::once(&so.f).chain(so.g.iter().map(|t| &t.field)).map(|f| f.deg_max()).max().unwrap_or(1).max(1);
    let proto = TaylorFourierField::zero(2 * n, d, Shape::vector(2 * n), 0, deg_max, rho, so.r);

    let mut f = proto.clone();
    let mut f0 = TaylorFourierField::zero(n, d, Shape::vector(n), 0, deg_max, rho, so.r);
    for i in 0..n {
        let mut alpha = Exponent::from_elem(0, 2 * n);
        alpha[n + i] = 1;
        let mut e = vec![Complex64::new(0.0, 0.0); 2 * n];
        e[i] = Complex64::new(1.0, 0.0);
        f.insert(&alpha, &FourierSeries::constant(d, Shape::vector(2 * n), e, rho)?)?;
    }
    let mut g: Vec<EpsilonTerm> = Vec::new();
    for (alpha, c) in so.f.terms() {
        let j: u32 = alpha[n..].iter().sum();
        let lifted = embed(c, n, 2 * n)?;
        if j == 0 {
            f.insert(alpha, &lifted)?;
            f0.insert(&Exponent::from_slice(&alpha[..n]), c)?;
        } else {
            add_term(&mut g, so.a * (j as f64 - 1.0) / 2.0 + so.a - b1, alpha, &lifted, &proto)?;
        }
    }
    for term in &so.g {
        for (alpha, c) in term.field.terms() {
            let j: u32 = alpha[n..].iter().sum();
            let power = term.power + so.a * j as f64 / 2.0 + so.b - so.a / 2.0 - b1;
            add_term(&mut g, power, alpha, &embed(c, n, 2 * n)?, &proto)?;
        }
    }
    g.sort_by(|x, y| x.power.total_cmp(&y.power));

    let local: Vec<f64> = x_init.iter().zip(&so.center).map(|(x, c)| x - c).collect();
    let eq = find_equilibrium(&f0.average(), &local, 1e-13, 100)?;
    let center: Vec<f64> = so.center.iter().cloned().chain(std::iter::repeat(0.0).take(n)).collect();
    let first_order = SystemSpec { freq: so.freq.clone(), n: 2 * n, a: a1, b: b1, rho: so.rho, r: so.r, center, f, g };

    // doubled Jacobian read off the reduced averaged field
    let z_star: Vec<f64> = eq.x.iter().cloned().chain(std::iter::repeat(0.0).take(n)).collect();
    let jac = first_order.f.average().jacobian()?.eval_real(&vec![0.0; d], &z_star);
    let doubled = DMatrix::from_row_slice(2 * n, 2 * n, &jac);
    let branches = doubled_spectrum(&eq.jacobian, &doubled)?;
    let plan = ExponentPlan::new(a1, b1)?;
    let x_star = eq.x.iter().zip(&so.center).map(|(a, c)| a + c).collect();
    Ok(SecondOrderReduction { first_order, plan, x_star, df0: eq.jacobian, branches })
}

impl SecondOrderReduction {
    /// Largest relative mismatch of the first-order field at global `(x, y)`
    /// against `(eps^{a/2} y, eps^{-a/2} x''(theta, x, eps^{a/2} y))` over
    /// samples `(theta, (x - center, y), eps)`.
    pub fn identity_defect(&self, so: &SecondOrderSpec, samples: &[(Vec<f64>, Vec<f64>, f64)]) -> Result<f64> {
        let n = so.n;
        let spec = &self.first_order;
        let mut worst: f64 = 0.0;
        for (theta, z, eps) in samples {
            let g = spec.g_at(*eps)?;
            let zg: Vec<f64> = z.iter().zip(&spec.center).map(|(a, c)| a + c).collect();
            let lhs = spec.rhs_at_angle(&g, theta, &zg, *eps);
            let half = eps.powf(0.5 * so.a);
            let v: Vec<f64> = z[n..].iter().map(|y| half * y).collect();
            let acc = so.acceleration_at_angle(theta, &zg[..n], &v, *eps);
            let rhs: Vec<f64> = v.iter().cloned().chain(acc.iter().map(|a| a / half)).collect();
            worst = worst.max(relative_gap(&lhs, &rhs));
        }
        Ok(worst)
    }
}

/// Integrates the second-order system and its first-order reduction from
/// the same data and returns `max |x_direct(t) - x_reduced(t)|`.
pub fn second_order_round_trip(so: &SecondOrderSpec, red: &SecondOrderReduction, x0: &[f64], v0: &[f64], eps: f64, t_end: f64, dt: f64) -> Result<f64> {
    let n = so.n;
    let direct = |t: f64, s: &[f64]| {
        let acc = so.acceleration(t, &s[..n], &s[n..], eps);
        s[n..].iter().cloned().chain(acc).collect::<Vec<f64>>()
    };
    let mut xs = Vec::new();
    let s0: Vec<f64> = x0.iter().chain(v0).cloned().collect();
    crate::verify::rk4_integrate(direct, &s0, t_end, dt, |_, s| xs.push(s[..n].to_vec()))?;
    let spec = &red.first_order;
    let g = spec.g_at(eps)?;
    let scale = eps.powf(-0.5 * so.a);
    let z0: Vec<f64> = x0.iter().cloned().chain(v0.iter().map(|v| v * scale)).collect();
    let mut worst: f64 = 0.0;
    let mut idx = 0;
    crate::verify::rk4_integrate(|t, z: &[f64]| spec.rhs(&g, t, z, eps), &z0, t_end, dt, |_, z| {
        let d = z[..n].iter().zip(&xs[idx]).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max);
        worst = worst.max(d);
        idx += 1;
    })?;
    Ok(worst)
}

/// `x' = phi(x) + h(w t, x) + eps f(w t, x)` around the origin with `phi`
/// homogeneous of degree `l` and `h` of order at least `l + 1`.
#[derive(Clone, Debug, PartialEq)]
pub struct DegenerateSpec {
    pub freq: Frequency,
    pub n: usize,
    pub l: u32,
    pub rho: f64,
    pub r: f64,
    pub phi: TaylorFourierField,
    pub h: TaylorFourierField,
    pub f: TaylorFourierField,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DegenerateRecord {
    pub n: usize,
    pub omega: Vec<f64>,
    pub gamma: f64,
    pub tau: f64,
    pub l: u32,
    pub rho: f64,
    pub r: f64,
    pub phi: Vec<CoeffRecord>,
    #[serde(default)]
    pub h: Vec<CoeffRecord>,
    pub f: Vec<CoeffRecord>,
}

impl DegenerateSpec {
    pub fn from_record(rec: &DegenerateRecord) -> Result<Self> {
        let freq = Frequency::new(rec.omega.clone(), rec.gamma, rec.tau)?;
        let (n, d, rho) = (rec.n, freq.dim(), 2.0 * rec.rho);
        Ok(DegenerateSpec {
            n,
            l: rec.l,
            rho: rec.rho,
            r: rec.r,
            phi: field_from_records_with(n, n, d, rho, rec.r, &rec.phi, "phi")?,
            h: field_from_records_with(n, n, d, rho, rec.r, &rec.h, "h")?,
            f: field_from_records_with(n, n, d, rho, rec.r, &rec.f, "f")?,
            freq,
        })
    }

    /// `phi(x) + h(theta, x) + eps f(theta, x)`.
    pub fn rhs_at_angle(&self, theta: &[f64], x: &[f64], eps: f64) -> Vec<f64> {
        let p = self.phi.eval_real(theta, x);
        let h = self.h.eval_real(theta, x);
        let f = self.f.eval_real(theta, x);
        (0..self.n).map(|i| p[i] + h[i] + eps * f[i]).collect()
    }
}

#[derive(Clone, Debug)]
pub struct DegenerateSystem {
    /// System in the parameter `t = eps^{1/l}` with exponents `(l - 1, l)`.
    pub spec: SystemSpec,
    pub plan: ExponentPlan,
    pub l: u32,
    pub homogeneity_defect: f64,
}

const HOMOGENEITY_SAMPLES: usize = 32;
const HOMOGENEITY_TOL: f64 = 1e-10;

/// Largest relative `|phi(s x) - s^l phi(x)|` over random `(s, x)`.
pub fn homogeneity_defect(phi: &TaylorFourierField, l: u32, r: f64, seed: u64) -> Result<f64> {
    let n = phi.n();
    let theta = vec![0.0; phi.dim()];
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut worst: f64 = 0.0;
    for sample in 0..HOMOGENEITY_SAMPLES {
        let s: f64 = rng.gen_range(0.25..2.0) * if rng.gen_bool(0.5) { 1.0 } else { -1.0 };
        let x: Vec<f64> = (0..n).map(|_| rng.gen_range(-r..r)).collect();
        let sx: Vec<f64> = x.iter().map(|v| s * v).collect();
        let lhs = phi.eval_real(&theta, &sx);
        let rhs: Vec<f64> = phi.eval_real(&theta, &x).into_iter().map(|v| s.powi(l as i32) * v).collect();
        let defect = relative_gap(&lhs, &rhs);
        let defect = if rhs.iter().all(|v| *v == 0.0) { lhs.iter().map(|v| v.abs()).fold(0.0, f64::max) } else { defect };
        if defect > HOMOGENEITY_TOL {
            return Err(Error::Homogeneity { defect, sample });
        }
        worst = worst.max(defect);
    }
    Ok(worst)
}

/// Scales `x = t y`, `t = eps^{1/l}`:
/// `y' = t^{l-1} (phi(y) + f(theta, 0)) + t^l g(theta, y, t)` with
/// `g = t^{-(l+1)} h(theta, t y) + t^{-1} (f(theta, t y) - f(theta, 0))`.
pub fn degenerate_scale(ds: &DegenerateSpec, seed: u64) -> Result<DegenerateSystem> {
    let (n, d, l) = (ds.n, ds.freq.dim(), ds.l);
    if l < 2 {
        return Err(Error::InvalidExponents(format!("degree l must be at least 2, got {l}")));
    }
    if ds.phi.terms().any(|(_, c)| c.iter().any(|(k, _)| !crate::torus::is_zero_mode(k))) {
        return Err(Error::Hypothesis("phi must not depend on the angles".into()));
    }
    let homogeneity = homogeneity_defect(&ds.phi, l, ds.r, seed)?;
    if let Some((alpha, _)) = ds.h.terms().find(|(a, _)| a.iter().sum::<u32>() < l + 1) {
        return Err(Error::Hypothesis(format!("h has a term of degree {} below l + 1 = {}", alpha.iter().sum::<u32>(), l + 1)));
    }
    let rho = ds.phi.rho().min(ds.h.rho()).min(ds.f.rho());
    let deg_max = [ds.phi.deg_max(), ds.h.deg_max(), ds.f.deg_max()].into_iter().max().unwrap_or(0);
    let proto = TaylorFourierField::zero(n, d, Shape::vector(n), 0, deg_max, rho, ds.r);
    let mut f = proto.add(&ds.phi)?;
    let mut g: Vec<EpsilonTerm> = Vec::new();
    for (alpha, c) in ds.f.terms() {
        let j: u32 = alpha.iter().sum();
        if j == 0 {
            f.insert(alpha, c)?;
        } else {
            add_term(&mut g, (j - 1) as f64, alpha, c, &proto)?;
        }
    }
    for (alpha, c) in ds.h.terms() {
        let j: u32 = alpha.iter().sum();
        add_term(&mut g, (j - l - 1) as f64, alpha, c, &proto)?;
    }
    g.sort_by(|x, y| x.power.total_cmp(&y.power));
    let (a, b) = ((l - 1) as f64, l as f64);
    let spec = SystemSpec { freq: ds.freq.clone(), n, a, b, rho: ds.rho, r: ds.r, center: vec![0.0; n], f, g };
    Ok(DegenerateSystem { plan: ExponentPlan::new(a, b)?, spec, l, homogeneity_defect: homogeneity })
}

impl DegenerateSystem {
    /// Largest relative mismatch of `scaled(theta, y, t)` against
    /// `t^{-1} original(theta, t y, eps = t^l)` over samples `(theta, y, t)`.
    pub fn identity_defect(&self, ds: &DegenerateSpec, samples: &[(Vec<f64>, Vec<f64>, f64)]) -> Result<f64> {
        let mut worst: f64 = 0.0;
        for (theta, y, t) in samples {
            let g = self.spec.g_at(*t)?;
            let lhs = self.spec.rhs_at_angle(&g, theta, y, *t);
            let ty: Vec<f64> = y.iter().map(|v| t * v).collect();
            let rhs: Vec<f64> = ds.rhs_at_angle(theta, &ty, t.powi(self.l as i32)).into_iter().map(|v| v / t).collect();
            worst = worst.max(relative_gap(&lhs, &rhs));
        }
        Ok(worst)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn exponent_plans_match_minimal_delta() {
        let p = ExponentPlan::new(1.0, 2.0).unwrap();
        assert_eq!((p.delta, p.a0, p.b0, p.branch), (1.0, 1.0, 2.0, Branch::AtLeastTwiceA));
        assert!(p.delta1.is_none());
        let p = ExponentPlan::new(0.5, 1.0).unwrap();
        assert_eq!((p.delta, p.a0, p.b0, p.branch), (2.0, 1.0, 2.0, Branch::AtLeastTwiceA));
        let p = ExponentPlan::new(1.0, 1.5).unwrap();
        assert_eq!((p.delta, p.a0, p.b0, p.branch), (2.0, 2.0, 3.0, Branch::BelowTwiceA));
        assert_eq!(p.delta1, Some(1.5));
        assert!(ExponentPlan::new(1.0, 1.0).is_err());
    }

    #[test]
    fn diagonal_df0_gives_imaginary_branches() {
        let df0 = DMatrix::from_diagonal(&nalgebra::DVector::from_vec(vec![-1.0, -4.0]));
        let rep = doubled_spectrum(&df0, &doubled_jacobian(&df0)).unwrap();
        assert!(rep.max_branch_error < 1e-12);
        let mut ims: Vec<f64> = rep.doubled_eigenvalues.iter().map(|z| z.im).collect();
        ims.sort_by(f64::total_cmp);
        for (got, want) in ims.iter().zip([-2.0, -1.0, 1.0, 2.0]) {
            assert!((got - want).abs() < 1e-12);
        }
        assert!(rep.doubled_eigenvalues.iter().all(|z| z.re.abs() < 1e-12));
    }

    #[test]
    fn repeated_eigenvalue_is_rejected() {
        let df0 = DMatrix::from_diagonal(&nalgebra::DVector::from_vec(vec![-1.0, -1.0]));
        assert!(doubled_spectrum(&df0, &doubled_jacobian(&df0)).is_err());
    }
}
