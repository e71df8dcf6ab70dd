use std::collections::BTreeMap;

use num_complex::Complex64;
use serde::{Deserialize, Serialize};
use smallvec::SmallVec;

use super::{FourierSeries, Shape, Truncation};
use crate::error::{Error, Result};

/// State multi-index `alpha`.
pub type Exponent = SmallVec<[u32; 4]>;

fn degree(alpha: &[u32]) -> u32 {
    alpha.iter().sum()
}

fn unit(n: usize, l: usize) -> Exponent {
    let mut e = SmallVec::from_elem(0, n);
    e[l] = 1;
    e
}

/// Polynomial in the state `z in C^n` with Fourier coefficients:
/// `F(theta, z) = sum_alpha c_alpha(theta) z^alpha`, restricted to
/// `deg_min <= |alpha| <= deg_max`.
///
/// Coefficients share the torus dimension, the value shape and the width
/// `rho`; `r` is the radius of the state ball the field is used on.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TaylorFourierField {
    n: usize,
    dim: usize,
    shape: Shape,
    deg_min: u32,
    deg_max: u32,
    rho: f64,
    r: f64,
    #[serde(with = "term_list")]
    terms: BTreeMap<Exponent, FourierSeries>,
}

/// Terms as a list of `(alpha, coefficient)` pairs, so that JSON keys stay strings.
mod term_list {
    use super::{Exponent, FourierSeries};
    use serde::{Deserialize, Deserializer, Serialize, Serializer};
    use std::collections::BTreeMap;

    pub fn serialize<S: Serializer>(terms: &BTreeMap<Exponent, FourierSeries>, ser: S) -> Result<S::Ok, S::Error> {
        let list: Vec<(&Exponent, &FourierSeries)> = terms.iter().collect();
        list.serialize(ser)
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(de: D) -> Result<BTreeMap<Exponent, FourierSeries>, D::Error> {
        let list: Vec<(Exponent, FourierSeries)> = Vec::deserialize(de)?;
        Ok(list.into_iter().collect())
    }
}

impl TaylorFourierField {
    pub fn zero(n: usize, dim: usize, shape: Shape, deg_min: u32, deg_max: u32, rho: f64, r: f64) -> Self {
        TaylorFourierField { n, dim, shape, deg_min, deg_max, rho, r, terms: BTreeMap::new() }
    }

    /// Adds `c` to the coefficient of `z^alpha`.
    pub fn insert(&mut self, alpha: &[u32], c: &FourierSeries) -> Result<()> {
        if alpha.len() != self.n {
            return Err(Error::ShapeMismatch(format!("exponent {alpha:?} has length {}, expected {}", alpha.len(), self.n)));
        }
        let deg = degree(alpha);
        if deg < self.deg_min || deg > self.deg_max {
            return Err(Error::InvalidInput(format!(
                "exponent {alpha:?} of degree {deg} is outside the window [{}, {}]",
                self.deg_min, self.deg_max
            )));
        }
        if c.dim() != self.dim || c.shape() != self.shape {
            return Err(Error::ShapeMismatch(format!(
                "coefficient on T^{} with shape {:?}, expected T^{} with {:?}",
                c.dim(),
                c.shape(),
                self.dim,
                self.shape
            )));
        }
        let c = c.clone().with_rho(self.rho);
        match self.terms.get_mut(alpha) {
            Some(slot) => *slot = slot.add(&c)?,
            None => {
                self.terms.insert(Exponent::from_slice(alpha), c);
            }
        }
        Ok(())
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn shape(&self) -> Shape {
        self.shape
    }

    pub fn deg_min(&self) -> u32 {
        self.deg_min
    }

    pub fn deg_max(&self) -> u32 {
        self.deg_max
    }

    pub fn rho(&self) -> f64 {
        self.rho
    }

    pub fn radius(&self) -> f64 {
        self.r
    }

    pub fn with_radius(mut self, r: f64) -> Self {
        self.r = r;
        self
    }

    pub fn with_rho(mut self, rho: f64) -> Self {
        self.rho = rho;
        for c in self.terms.values_mut() {
            c.set_rho(rho);
        }
        self
    }

    pub fn with_deg_max(mut self, deg_max: u32) -> Self {
        self.deg_max = deg_max;
        self.terms.retain(|a, _| degree(a) <= deg_max);
        self
    }

    pub fn terms(&self) -> impl Iterator<Item = (&Exponent, &FourierSeries)> {
        self.terms.iter()
    }

    pub fn term(&self, alpha: &[u32]) -> Option<&FourierSeries> {
        self.terms.get(alpha)
    }

    pub fn len(&self) -> usize {
        self.terms.len()
    }

    pub fn is_empty(&self) -> bool {
        self.terms.is_empty()
    }

    pub fn is_real(&self) -> bool {
        self.terms.values().all(|c| c.is_real())
    }

    pub fn reality_defect(&self) -> f64 {
        self.terms.values().map(|c| c.reality_defect()).fold(0.0, f64::max)
    }

    pub fn realify(&mut self) {
        for c in self.terms.values_mut() {
            c.realify();
        }
    }

    /// Highest degree with a stored coefficient.
    pub fn max_degree(&self) -> u32 {
        self.terms.keys().map(|a| degree(a)).max().unwrap_or(0)
    }

    /// Terms with `lo <= |alpha| <= hi`; the window becomes `[lo, hi]`.
    pub fn degree_part(&self, lo: u32, hi: u32) -> Self {
        let mut out = Self::zero(self.n, self.dim, self.shape, lo, hi, self.rho, self.r);
        out.terms = self.terms.iter().filter(|(a, _)| (lo..=hi).contains(&degree(a))).map(|(a, c)| (a.clone(), c.clone())).collect();
        out
    }

    /// Coefficient of `z^0`.
    pub fn constant_term(&self) -> FourierSeries {
        self.terms
            .get(&Exponent::from_elem(0, self.n))
            .cloned()
            .unwrap_or_else(|| FourierSeries::zero(self.dim, self.shape, self.rho))
    }

    /// The degree-one part as an `rows x n` matrix series (requires column values).
    pub fn linear_matrix(&self) -> Result<FourierSeries> {
        if self.shape.cols != 1 {
            return Err(Error::ShapeMismatch("linear part needs column-vector values".into()));
        }
        let rows = self.shape.rows;
        let mut entries = Vec::with_capacity(rows * self.n);
        for i in 0..rows {
            for l in 0..self.n {
                entries.push(match self.terms.get(&unit(self.n, l)) {
                    Some(c) => c.entry(i, 0),
                    None => FourierSeries::zero(self.dim, Shape::SCALAR, self.rho),
                });
            }
        }
        Ok(FourierSeries::from_entries(Shape { rows, cols: self.n }, &entries)?.with_rho(self.rho))
    }

    /// Jacobian `D_z F` as a field with `rows x n` values.
    pub fn jacobian(&self) -> Result<Self> {
        if self.shape.cols != 1 {
            return Err(Error::ShapeMismatch("Jacobian needs column-vector values".into()));
        }
        let rows = self.shape.rows;
        let shape = Shape { rows, cols: self.n };
        let mut out = Self::zero(self.n, self.dim, shape, self.deg_min.saturating_sub(1), self.deg_max.saturating_sub(1), self.rho, self.r);
        for (alpha, c) in &self.terms {
            for l in 0..self.n {
                if alpha[l] == 0 {
                    continue;
                }
                let mut beta = alpha.clone();
                beta[l] -= 1;
                let f = alpha[l] as f64;
                let block = c.map_values(
                    |v| {
                        let mut w = vec![Complex64::new(0.0, 0.0); rows * self.n];
                        for i in 0..rows {
                            w[i * self.n + l] = v[i] * f;
                        }
                        w
                    },
                    shape,
                )?;
                out.insert(&beta, &block)?;
            }
        }
        Ok(out)
    }

    /// Point evaluation at real angles and real state.
    pub fn eval(&self, theta: &[f64], z: &[f64]) -> Vec<Complex64> {
        let mut out = vec![Complex64::new(0.0, 0.0); self.shape.len()];
        for (alpha, c) in &self.terms {
            let mono: f64 = alpha.iter().zip(z).map(|(&a, &x)| x.powi(a as i32)).product();
            if mono == 0.0 {
                continue;
            }
            for (o, v) in out.iter_mut().zip(c.eval(theta)) {
                *o += v * mono;
            }
        }
        out
    }

    pub fn eval_real(&self, theta: &[f64], z: &[f64]) -> Vec<f64> {
        self.eval(theta, z).into_iter().map(|c| c.re).collect()
    }

    /// Angle average: each coefficient replaced by its mean.
    pub fn average(&self) -> Self {
        self.map_coeffs(|c| {
            let mut s = FourierSeries::zero(c.dim(), c.shape(), c.rho());
            s.insert(&super::zero_mode(c.dim()), &c.mean()).expect("mean has the coefficient shape");
            s
        })
    }

    /// Field minus its angle average.
    pub fn oscillation(&self) -> Self {
        self.map_coeffs(|c| c.oscillation())
    }

    /// Applies `f` to each coefficient; drops coefficients that become empty.
    pub fn map_coeffs<F>(&self, f: F) -> Self
    where
        F: Fn(&FourierSeries) -> FourierSeries,
    {
        let mut out = self.clone();
        out.terms = self.terms.iter().map(|(a, c)| (a.clone(), f(c))).filter(|(_, c)| !c.is_empty()).collect();
        out
    }

    pub fn try_map_coeffs<F>(&self, shape: Shape, f: F) -> Result<Self>
    where
        F: Fn(&FourierSeries) -> Result<FourierSeries>,
    {
        let mut out = self.clone();
        out.shape = shape;
        let mut terms = BTreeMap::new();
        for (a, c) in &self.terms {
            let d = f(c)?;
            if d.shape() != shape {
                return Err(Error::ShapeMismatch("mapped coefficient has the wrong shape".into()));
            }
            terms.insert(a.clone(), d);
        }
        out.terms = terms;
        Ok(out)
    }

    pub fn scale(&self, s: f64) -> Self {
        self.map_coeffs(|c| c.scale(s))
    }

    /// `F(theta, s z)`: term `alpha` multiplied by `s^{|alpha|}`.
    pub fn scale_state(&self, s: f64) -> Self {
        let mut out = self.clone();
        for (a, c) in out.terms.iter_mut() {
            *c = c.scale(s.powi(degree(a) as i32));
        }
        out
    }

    /// `F(theta, s z) / s^shift`, computed termwise without forming `1/s`.
    /// Requires `deg_min >= shift`.
    pub fn scale_state_reduced(&self, s: f64, shift: u32) -> Result<Self> {
        let mut out = self.clone();
        for (a, c) in out.terms.iter_mut() {
            let deg = degree(a);
            if deg < shift {
                return Err(Error::InvalidInput(format!("term of degree {deg} cannot be divided by s^{shift}")));
            }
            *c = c.scale(s.powi((deg - shift) as i32));
        }
        Ok(out)
    }

    pub fn add(&self, other: &Self) -> Result<Self> {
        self.axpy(1.0, other)
    }

    pub fn sub(&self, other: &Self) -> Result<Self> {
        self.axpy(-1.0, other)
    }

    /// `self + s * other`; the degree window becomes the union.
    pub fn axpy(&self, s: f64, other: &Self) -> Result<Self> {
        if self.n != other.n || self.dim != other.dim || self.shape != other.shape {
            return Err(Error::ShapeMismatch(format!(
                "fields (n={}, d={}, {:?}) and (n={}, d={}, {:?})",
                self.n, self.dim, self.shape, other.n, other.dim, other.shape
            )));
        }
        let mut out = self.clone();
        out.deg_min = self.deg_min.min(other.deg_min);
        out.deg_max = self.deg_max.max(other.deg_max);
        out.rho = self.rho.min(other.rho);
        out.r = self.r.min(other.r);
        for (a, c) in &other.terms {
            let c = c.scale(s);
            match out.terms.get_mut(a) {
                Some(slot) => *slot = slot.add(&c)?,
                None => {
                    out.terms.insert(a.clone(), c);
                }
            }
        }
        for c in out.terms.values_mut() {
            c.set_rho(out.rho);
        }
        Ok(out)
    }

    /// Product of two fields in the same state variables, truncated in
    /// Fourier order and state degree. Values multiply as
    /// [`FourierSeries::mul`] does.
    pub fn mul(&self, other: &Self, trunc: &Truncation) -> Result<Self> {
        if self.n != other.n || self.dim != other.dim {
            return Err(Error::ShapeMismatch("fields live on different spaces".into()));
        }
        let probe_a = FourierSeries::zero(self.dim, self.shape, 1.0);
        let probe_b = FourierSeries::zero(self.dim, other.shape, 1.0);
        let shape = probe_a.mul(&probe_b, trunc)?.shape();
        let deg_max = (self.deg_max + other.deg_max).min(trunc.deg_max);
        let mut out = Self::zero(self.n, self.dim, shape, (self.deg_min + other.deg_min).min(deg_max), deg_max, self.rho.min(other.rho), self.r.min(other.r));
        for (a, ca) in &self.terms {
            for (b, cb) in &other.terms {
                if degree(a) + degree(b) > deg_max {
                    continue;
                }
                let e: Exponent = a.iter().zip(b).map(|(x, y)| x + y).collect();
                let p = ca.mul(cb, trunc)?;
                if p.is_empty() {
                    continue;
                }
                out.insert(&e, &p)?;
            }
        }
        Ok(out)
    }

    /// Left multiplication of every coefficient by a series (angle-only factor).
    pub fn left_mul_series(&self, m: &FourierSeries, trunc: &Truncation) -> Result<Self> {
        let probe = m.mul(&FourierSeries::zero(self.dim, self.shape, 1.0), trunc)?;
        let mut out = self.try_map_coeffs(probe.shape(), |c| m.mul(c, trunc))?;
        out.rho = self.rho.min(m.rho());
        for c in out.terms.values_mut() {
            c.set_rho(out.rho);
        }
        Ok(out)
    }

    /// Scalar component `i` of a column-vector field.
    pub fn component(&self, i: usize) -> Self {
        let mut out = self.map_coeffs(|c| c.entry(i, 0));
        out.shape = Shape::SCALAR;
        out.terms.retain(|_, c| c.max_abs() > 0.0);
        out
    }

    /// Stacks scalar fields into a column-vector field.
    pub fn from_components(parts: &[Self]) -> Result<Self> {
        let first = parts.first().ok_or_else(|| Error::InvalidInput("no components".into()))?;
        let rows = parts.len();
        let mut out = Self::zero(
            first.n,
            first.dim,
            Shape::vector(rows),
            parts.iter().map(|p| p.deg_min).min().unwrap_or(0),
            parts.iter().map(|p| p.deg_max).max().unwrap_or(0),
            parts.iter().map(|p| p.rho).fold(f64::INFINITY, f64::min),
            parts.iter().map(|p| p.r).fold(f64::INFINITY, f64::min),
        );
        for (i, p) in parts.iter().enumerate() {
            if p.n != first.n || p.dim != first.dim || !p.shape.is_scalar() {
                return Err(Error::ShapeMismatch("components must be scalar fields on the same space".into()));
            }
            for (a, c) in &p.terms {
                let block = c.map_values(
                    |v| {
                        let mut w = vec![Complex64::new(0.0, 0.0); rows];
                        w[i] = v[0];
                        w
                    },
                    Shape::vector(rows),
                )?;
                out.insert(a, &block)?;
            }
        }
        Ok(out)
    }

    /// The scalar field `c(theta) + sum_l L_l(theta) z_l`.
    pub fn affine(n: usize, c: &FourierSeries, l: &[FourierSeries], deg_max: u32, r: f64) -> Result<Self> {
        let rho = l.iter().map(|x| x.rho()).fold(c.rho(), f64::min);
        let mut out = Self::zero(n, c.dim(), Shape::SCALAR, 0, deg_max.max(1), rho, r);
        if !c.is_empty() {
            out.insert(&Exponent::from_elem(0, n), c)?;
        }
        for (j, lj) in l.iter().enumerate() {
            if !lj.is_empty() {
                out.insert(&unit(n, j), lj)?;
            }
        }
        Ok(out)
    }

    /// `F(theta, map(theta, w))` where `map` lists one scalar field per state
    /// variable of `self`, all in the new variables `w`.
    pub fn compose(&self, map: &[Self], trunc: &Truncation) -> Result<Self> {
        if map.len() != self.n {
            return Err(Error::ShapeMismatch(format!("composition needs {} components, got {}", self.n, map.len())));
        }
        let first = map.first().ok_or_else(|| Error::InvalidInput("empty map".into()))?;
        let n_new = first.n;
        if map.iter().any(|m| m.n != n_new || m.dim != self.dim || !m.shape.is_scalar()) {
            return Err(Error::ShapeMismatch("map components must be scalar fields on the same space".into()));
        }
        let rho = map.iter().map(|m| m.rho).fold(self.rho, f64::min);
        let r = map.iter().map(|m| m.r).fold(f64::INFINITY, f64::min);
        let deg_max = trunc.deg_max;
        let one = {
            let mut s = FourierSeries::zero(self.dim, Shape::SCALAR, rho);
            s.insert(&super::zero_mode(self.dim), &[Complex64::new(1.0, 0.0)])?;
            let mut f = Self::zero(n_new, self.dim, Shape::SCALAR, 0, deg_max, rho, r);
            f.insert(&Exponent::from_elem(0, n_new), &s)?;
            f
        };
        // powers[j][e] = map_j^e
        let mut powers: Vec<Vec<Self>> = Vec::with_capacity(self.n);
        for (j, m) in map.iter().enumerate() {
            let top = self.terms.keys().map(|a| a[j]).max().unwrap_or(0);
            let mut p = vec![one.clone()];
            for e in 1..=top as usize {
                let next = p[e - 1].mul(m, trunc)?;
                p.push(next);
            }
            powers.push(p);
        }
        let mut out = Self::zero(n_new, self.dim, self.shape, 0, deg_max, rho, r);
        for (alpha, c) in &self.terms {
            let mut mono = one.clone();
            for (j, &e) in alpha.iter().enumerate() {
                if e > 0 {
                    mono = mono.mul(&powers[j][e as usize], trunc)?;
                }
            }
            for (beta, m) in &mono.terms {
                let block = c.mul(m, trunc)?;
                if !block.is_empty() {
                    out.insert(beta, &block.with_rho(rho))?;
                }
            }
        }
        Ok(out)
    }

    /// `F(theta, c(theta) + L(theta) z)` for a column series `c` and an
    /// `n x n` matrix series `L`.
    pub fn substitute(&self, c: &FourierSeries, l: &FourierSeries, trunc: &Truncation) -> Result<Self> {
        if c.shape() != Shape::vector(self.n) || l.shape() != Shape::matrix(self.n) {
            return Err(Error::ShapeMismatch(format!(
                "substitution needs a {0}-vector and a {0}x{0} matrix, got {1:?} and {2:?}",
                self.n,
                c.shape(),
                l.shape()
            )));
        }
        let map: Vec<Self> = (0..self.n)
            .map(|j| {
                let row: Vec<FourierSeries> = (0..self.n).map(|k| l.entry(j, k)).collect();
                Self::affine(self.n, &c.entry(j, 0), &row, trunc.deg_max, self.r)
            })
            .collect::<Result<_>>()?;
        self.compose(&map, trunc)
    }

    /// Majorant norm `sum_alpha |c_alpha|_rho r^{|alpha|}`.
    pub fn majorant_norm(&self, rho_eval: f64, r_eval: f64) -> Result<f64> {
        let mut total = 0.0;
        for (a, c) in &self.terms {
            total += c.majorant_norm(rho_eval)? * r_eval.powi(degree(a) as i32);
        }
        Ok(total)
    }

    /// Majorant bound on `sup |D_zz F|` over the ball of radius `r_eval`,
    /// using `sum_{l,m} |d_l d_m z^alpha| <= |alpha|(|alpha|-1) r^{|alpha|-2}`.
    pub fn curvature_bound(&self, rho_eval: f64, r_eval: f64) -> Result<f64> {
        let mut total = 0.0;
        for (a, c) in &self.terms {
            let deg = degree(a);
            if deg < 2 {
                continue;
            }
            total += c.majorant_norm(rho_eval)? * (deg * (deg - 1)) as f64 * r_eval.powi(deg as i32 - 2);
        }
        Ok(total)
    }

    /// `w . grad_theta F`.
    pub fn derivative_along(&self, omega: &[f64]) -> Self {
        self.map_coeffs(|c| c.derivative_along(omega))
    }

    /// Largest coefficientwise distance between two fields.
    pub fn max_coeff_distance(&self, other: &Self) -> f64 {
        let zero = FourierSeries::zero(self.dim, self.shape, self.rho);
        let mut worst: f64 = 0.0;
        for (a, c) in &self.terms {
            worst = worst.max(c.max_coeff_distance(other.terms.get(a).unwrap_or(&zero)));
        }
        for (a, c) in &other.terms {
            if !self.terms.contains_key(a) {
                worst = worst.max(c.max_abs());
            }
        }
        worst
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn c(re: f64) -> Complex64 {
        Complex64::new(re, 0.0)
    }

    fn scalar_const(d: usize, v: f64) -> FourierSeries {
        FourierSeries::constant(d, Shape::SCALAR, vec![c(v)], 1.0).unwrap()
    }

    fn sin1() -> FourierSeries {
        let mut s = FourierSeries::zero(1, Shape::SCALAR, 1.0);
        s.insert(&[1], &[Complex64::new(0.0, -0.5)]).unwrap();
        s.insert(&[-1], &[Complex64::new(0.0, 0.5)]).unwrap();
        s
    }

    #[test]
    fn substitute_sine_into_square() {
        // h(z) = z^2 at z = sin(theta) + w
        let mut h = TaylorFourierField::zero(1, 1, Shape::SCALAR, 2, 4, 1.0, 1.0);
        h.insert(&[2], &scalar_const(1, 1.0)).unwrap();
        let cvec = sin1().reshape(Shape::vector(1)).unwrap();
        let l = FourierSeries::identity(1, 1, 1.0);
        let out = h.substitute(&cvec, &l, &Truncation::new(10, 4)).unwrap();
        let c0 = out.constant_term();
        assert!((c0.mean()[0] - c(0.5)).norm() < 1e-16);
        assert!((c0.coeff(&[2]).unwrap()[0] - c(-0.25)).norm() < 1e-16);
        let lin = out.term(&[1]).unwrap();
        assert!((lin.coeff(&[1]).unwrap()[0] - Complex64::new(0.0, -1.0)).norm() < 1e-16);
        assert!((out.term(&[2]).unwrap().mean()[0] - c(1.0)).norm() < 1e-16);
    }

    #[test]
    fn jacobian_of_quadratic() {
        // F = (z2^2, z1 z2)
        let mut f = TaylorFourierField::zero(2, 1, Shape::vector(2), 0, 3, 1.0, 1.0);
        f.insert(&[0, 2], &FourierSeries::constant(1, Shape::vector(2), vec![c(1.0), c(0.0)], 1.0).unwrap()).unwrap();
        f.insert(&[1, 1], &FourierSeries::constant(1, Shape::vector(2), vec![c(0.0), c(1.0)], 1.0).unwrap()).unwrap();
        let j = f.jacobian().unwrap();
        let z = [0.3, -0.7];
        let v = j.eval_real(&[0.0], &z);
        assert_eq!(v, vec![0.0, 2.0 * z[1], z[1], z[0]]);
        assert_eq!(f.curvature_bound(1.0, 1.0).unwrap(), 4.0);
    }

    #[test]
    fn composition_matches_pointwise() {
        let mut f = TaylorFourierField::zero(1, 1, Shape::SCALAR, 0, 6, 1.0, 1.0);
        f.insert(&[3], &sin1()).unwrap();
        f.insert(&[1], &scalar_const(1, 2.0)).unwrap();
        let mut g = TaylorFourierField::zero(1, 1, Shape::SCALAR, 0, 6, 1.0, 1.0);
        g.insert(&[1], &scalar_const(1, 1.0)).unwrap();
        g.insert(&[2], &sin1()).unwrap();
        let fg = f.compose(&[g.clone()], &Truncation::new(20, 6)).unwrap();
        let (th, w) = ([0.4], [0.3]);
        let inner = g.eval_real(&th, &w)[0];
        let direct = f.eval_real(&th, &[inner])[0];
        assert!((fg.eval_real(&th, &w)[0] - direct).abs() < 1e-14);
    }
}
