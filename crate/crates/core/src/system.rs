//! Problem statement `x' = eps^a f(w t, x) + eps^b g(w t, x, eps)` and its
//! on-disk record format.
//!
//! `f` and each `g` term are polynomials in `x - center` with Fourier
//! coefficients. `g` is a finite sum `sum_j eps^{p_j} g_j(theta, x)` with real
//! exponents `p_j >= 0`.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::torus::{DivisorCheck, Exponent, FourierSeries, Frequency, Shape, TaylorFourierField};
use num_complex::Complex64;

/// One `eps^power * field` term of the perturbation `g`.
#[derive(Clone, Debug, PartialEq)]
pub struct EpsilonTerm {
    pub power: f64,
    pub field: TaylorFourierField,
}

#[derive(Clone, Debug, PartialEq)]
pub struct SystemSpec {
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

impl SystemSpec {
    pub fn dim(&self) -> usize {
        self.freq.dim()
    }

    /// Checks exponents, shapes, reality and the finite Diophantine condition.
    pub fn validate(&self, k_check: u32) -> Result<DivisorCheck> {
        if !(self.a > 0.0 && self.b > self.a) {
            return Err(Error::InvalidExponents(format!("need b > a > 0, got a = {}, b = {}", self.a, self.b)));
        }
        if !(self.rho > 0.0 && self.r > 0.0) {
            return Err(Error::InvalidInput(format!("rho and r must be positive, got {} and {}", self.rho, self.r)));
        }
        if self.center.len() != self.n {
            return Err(Error::ShapeMismatch(format!("center has length {}, expected {}", self.center.len(), self.n)));
        }
        let fields = std::iter::once(&self.f).chain(self.g.iter().map(|t| &t.field));
        for (idx, fld) in fields.enumerate() {
            if fld.n() != self.n || fld.dim() != self.dim() || fld.shape() != Shape::vector(self.n) {
                return Err(Error::ShapeMismatch(format!("field #{idx} does not map C^{} to C^{}", self.n, self.n)));
            }
            let scale = fld.terms().map(|(_, c)| c.max_abs()).fold(1.0, f64::max);
            if fld.reality_defect() > 1e-12 * scale {
                return Err(Error::InvalidInput(format!("field #{idx} is not real: c(-k) != conj(c(k))")));
            }
        }
        if self.g.iter().any(|t| !(t.power >= 0.0) || !t.power.is_finite()) {
            return Err(Error::InvalidExponents("eps powers in g must be finite and nonnegative".into()));
        }
        let check = self.freq.check_diophantine(k_check);
        if !check.passed {
            let w = check.worst.clone().expect("a failed check names its mode");
            return Err(Error::Hypothesis(format!(
                "frequency is not Diophantine on |k| <= {k_check}: |<k,w>| = {:e} < {:e} at k = {:?}",
                w.lhs, w.rhs, w.k
            )));
        }
        Ok(check)
    }

    /// `g(theta, x, eps) = sum_j eps^{p_j} g_j(theta, x)` as a single field.
    pub fn g_at(&self, eps: f64) -> Result<TaylorFourierField> {
        let mut out = TaylorFourierField::zero(self.n, self.dim(), Shape::vector(self.n), 0, self.f.deg_max(), self.f.rho(), self.r);
        for t in &self.g {
            out = out.axpy(eps.powf(t.power), &t.field)?;
        }
        Ok(out)
    }

    /// Right-hand side at time `t` and global state `x`.
    pub fn rhs(&self, g_eps: &TaylorFourierField, t: f64, x: &[f64], eps: f64) -> Vec<f64> {
        let theta: Vec<f64> = self.freq.omega.iter().map(|w| w * t).collect();
        self.rhs_at_angle(g_eps, &theta, x, eps)
    }

    /// Right-hand side at angle `theta` and global state `x`.
    pub fn rhs_at_angle(&self, g_eps: &TaylorFourierField, theta: &[f64], x: &[f64], eps: f64) -> Vec<f64> {
        let xi: Vec<f64> = x.iter().zip(&self.center).map(|(a, c)| a - c).collect();
        let ea = eps.powf(self.a);
        let eb = eps.powf(self.b);
        let fv = self.f.eval_real(theta, &xi);
        let gv = g_eps.eval_real(theta, &xi);
        fv.iter().zip(&gv).map(|(f, g)| ea * f + eb * g).collect()
    }

    pub fn to_record(&self) -> SystemRecord {
        SystemRecord {
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

    pub fn from_record(rec: &SystemRecord) -> Result<Self> {
        let freq = Frequency::new(rec.omega.clone(), rec.gamma, rec.tau)?;
        let center = rec.center.clone().unwrap_or_else(|| vec![0.0; rec.n]);
        let f = field_from_records(rec.n, freq.dim(), 2.0 * rec.rho, rec.r, &rec.f, "f")?;
        let g = rec
            .g
            .iter()
            .enumerate()
            .map(|(i, e)| {
                Ok(EpsilonTerm { power: e.eps_power, field: field_from_records(rec.n, freq.dim(), 2.0 * rec.rho, rec.r, &e.terms, &format!("g[{i}]"))? })
            })
            .collect::<Result<_>>()?;
        Ok(SystemSpec { freq, n: rec.n, a: rec.a, b: rec.b, rho: rec.rho, r: rec.r, center, f, g })
    }
}

/// One Fourier–Taylor coefficient: the value of `c_{k,alpha}` per component.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CoeffRecord {
    pub k: Vec<i32>,
    pub alpha: Vec<u32>,
    pub re: Vec<f64>,
    #[serde(default)]
    pub im: Vec<f64>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EpsilonRecord {
    pub eps_power: f64,
    pub terms: Vec<CoeffRecord>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SystemRecord {
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

pub fn field_records(field: &TaylorFourierField) -> Vec<CoeffRecord> {
    let mut out = Vec::new();
    for (alpha, c) in field.terms() {
        for (k, v) in c.iter() {
            out.push(CoeffRecord {
                k: k.to_vec(),
                alpha: alpha.to_vec(),
                re: v.iter().map(|z| z.re).collect(),
                im: v.iter().map(|z| z.im).collect(),
            });
        }
    }
    out
}

/// Builds a column-vector field from coefficient records. `what` names the
/// field in diagnostics.
pub fn field_from_records(n: usize, d: usize, rho: f64, r: f64, recs: &[CoeffRecord], what: &str) -> Result<TaylorFourierField> {
    field_from_records_with(n, n, d, rho, r, recs, what)
}

/// As [`field_from_records`] for a field of `vars` state variables with
/// values in `C^n`.
pub fn field_from_records_with(vars: usize, n: usize, d: usize, rho: f64, r: f64, recs: &[CoeffRecord], what: &str) -> Result<TaylorFourierField> {
    let deg_max = recs.iter().map(|c| c.alpha.iter().sum::<u32>()).max().unwrap_or(0);
    let mut field = TaylorFourierField::zero(vars, d, Shape::vector(n), 0, deg_max, rho, r);
    for (i, rec) in recs.iter().enumerate() {
        let ctx = |msg: String| Error::InvalidInput(format!("{what}[{i}]: {msg}"));
        if rec.k.len() != d {
            return Err(ctx(format!("k has length {}, expected {d}", rec.k.len())));
        }
        if rec.alpha.len() != vars {
            return Err(ctx(format!("alpha has length {}, expected {vars}", rec.alpha.len())));
        }
        if rec.re.len() != n || !(rec.im.is_empty() || rec.im.len() == n) {
            return Err(ctx(format!("re/im must have {n} entries")));
        }
        let v: Vec<Complex64> = (0..n).map(|j| Complex64::new(rec.re[j], rec.im.get(j).copied().unwrap_or(0.0))).collect();
        let mut c = FourierSeries::zero(d, Shape::vector(n), rho);
        c.insert(&rec.k, &v).map_err(|e| ctx(e.to_string()))?;
        field.insert(&Exponent::from_slice(&rec.alpha), &c).map_err(|e| ctx(e.to_string()))?;
    }
    let scale = field.terms().map(|(_, c)| c.max_abs()).fold(1.0, f64::max);
    let real = field.reality_defect() <= 1e-12 * scale;
    let field = field.map_coeffs(|c| {
        let mut c = c.clone();
        c.set_real(real);
        c
    });
    Ok(field)
}
