use std::collections::BTreeMap;

use nalgebra::DMatrix;
use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use super::{add_modes, dot, is_zero_mode, neg_mode, order, value_norm, zero_mode, Mode, Shape, Truncation};
use crate::error::{Error, Result};

const ZERO: Complex64 = Complex64::new(0.0, 0.0);

/// Sparse truncated Fourier series `sum_k c_k e^{i<k,theta>}` whose
/// coefficients are `rows x cols` blocks stored row-major.
///
/// `rho` is the declared analyticity width; norms may only be evaluated at
/// `rho' <= rho`. `real` records that the series represents a real function,
/// i.e. `c_{-k} = conj(c_k)`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(into = "SeriesRecord", try_from = "SeriesRecord")]
pub struct FourierSeries {
    dim: usize,
    shape: Shape,
    rho: f64,
    real: bool,
    coeffs: BTreeMap<Mode, Vec<Complex64>>,
}

impl FourierSeries {
    pub fn zero(dim: usize, shape: Shape, rho: f64) -> Self {
        FourierSeries { dim, shape, rho, real: true, coeffs: BTreeMap::new() }
    }

    /// Angle-independent series with the given row-major value.
    pub fn constant(dim: usize, shape: Shape, value: Vec<Complex64>, rho: f64) -> Result<Self> {
        let mut s = Self::zero(dim, shape, rho);
        s.real = value.iter().all(|c| c.im == 0.0);
        s.insert(&zero_mode(dim), &value)?;
        Ok(s)
    }

    pub fn from_real_matrix(dim: usize, m: &DMatrix<f64>, rho: f64) -> Self {
        let shape = Shape { rows: m.nrows(), cols: m.ncols() };
        let value = (0..m.nrows())
            .flat_map(|i| (0..m.ncols()).map(move |j| (i, j)))
            .map(|(i, j)| Complex64::new(m[(i, j)], 0.0))
            .collect();
        Self::constant(dim, shape, value, rho).expect("shape is consistent by construction")
    }

    pub fn from_real_vector(dim: usize, v: &[f64], rho: f64) -> Self {
        let value = v.iter().map(|&x| Complex64::new(x, 0.0)).collect();
        Self::constant(dim, Shape::vector(v.len()), value, rho).expect("shape is consistent by construction")
    }

    pub fn identity(dim: usize, n: usize, rho: f64) -> Self {
        Self::from_real_matrix(dim, &DMatrix::identity(n, n), rho)
    }

    /// Builds a series from explicit coefficients; `real` is asserted by the
    /// caller and checked with [`FourierSeries::reality_defect`].
    pub fn from_coeffs<I>(dim: usize, shape: Shape, rho: f64, real: bool, coeffs: I) -> Result<Self>
    where
        I: IntoIterator<Item = (Mode, Vec<Complex64>)>,
    {
        let mut s = Self::zero(dim, shape, rho);
        s.real = real;
        for (k, v) in coeffs {
            s.insert(&k, &v)?;
        }
        Ok(s)
    }

    /// Adds `value` to the coefficient at `k`.
    pub fn insert(&mut self, k: &[i32], value: &[Complex64]) -> Result<()> {
        if k.len() != self.dim {
            return Err(Error::ShapeMismatch(format!("mode {k:?} has dimension {}, expected {}", k.len(), self.dim)));
        }
        if value.len() != self.shape.len() {
            return Err(Error::ShapeMismatch(format!(
                "coefficient has {} entries, expected {}x{}",
                value.len(),
                self.shape.rows,
                self.shape.cols
            )));
        }
        if value.iter().any(|c| !c.re.is_finite() || !c.im.is_finite()) {
            return Err(Error::InvalidInput(format!("non-finite coefficient at k = {k:?}")));
        }
        let slot = self.coeffs.entry(Mode::from_slice(k)).or_insert_with(|| vec![ZERO; value.len()]);
        for (a, b) in slot.iter_mut().zip(value) {
            *a += b;
        }
        Ok(())
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn shape(&self) -> Shape {
        self.shape
    }

    pub fn rho(&self) -> f64 {
        self.rho
    }

    pub fn is_real(&self) -> bool {
        self.real
    }

    pub fn set_real(&mut self, real: bool) {
        self.real = real;
    }

    pub fn with_rho(mut self, rho: f64) -> Self {
        self.rho = rho;
        self
    }

    pub fn set_rho(&mut self, rho: f64) {
        self.rho = rho;
    }

    pub fn len(&self) -> usize {
        self.coeffs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.coeffs.is_empty()
    }

    pub fn coeff(&self, k: &[i32]) -> Option<&[Complex64]> {
        self.coeffs.get(k).map(|v| v.as_slice())
    }

    pub fn iter(&self) -> impl Iterator<Item = (&Mode, &Vec<Complex64>)> {
        self.coeffs.iter()
    }

    pub fn max_order(&self) -> u32 {
        self.coeffs.keys().map(|k| order(k)).max().unwrap_or(0)
    }

    /// Largest modulus over all stored entries.
    pub fn max_abs(&self) -> f64 {
        self.coeffs.values().flatten().map(|c| c.norm()).fold(0.0, f64::max)
    }

    /// Zeroth Fourier coefficient.
    pub fn mean(&self) -> Vec<Complex64> {
        self.coeff(&zero_mode(self.dim)).map(|v| v.to_vec()).unwrap_or_else(|| vec![ZERO; self.shape.len()])
    }

    pub fn mean_matrix(&self) -> DMatrix<Complex64> {
        let m = self.mean();
        DMatrix::from_row_slice(self.shape.rows, self.shape.cols, &m)
    }

    /// The series with its zeroth coefficient removed.
    pub fn oscillation(&self) -> Self {
        let mut out = self.clone();
        out.coeffs.remove(&zero_mode(self.dim));
        out
    }

    /// `(mean, oscillation)` with `mean + oscillation = self`.
    pub fn average_split(&self) -> (Vec<Complex64>, Self) {
        (self.mean(), self.oscillation())
    }

    /// Weighted majorant norm at width `rho_eval <= rho`.
    pub fn majorant_norm(&self, rho_eval: f64) -> Result<f64> {
        if rho_eval > self.rho * (1.0 + 1e-12) {
            return Err(Error::WidthViolation { requested: rho_eval, declared: self.rho });
        }
        Ok(self.coeffs.iter().map(|(k, v)| value_norm(v, self.shape) * (rho_eval * order(k) as f64).exp()).fold(0.0, |acc, x| acc + x))
    }

    /// Majorant norm at the declared width.
    pub fn norm(&self) -> f64 {
        self.majorant_norm(self.rho).expect("declared width is always admissible")
    }

    /// Maximum of `|c(-k) - conj(c(k))|` over stored modes.
    pub fn reality_defect(&self) -> f64 {
        let zeros = vec![ZERO; self.shape.len()];
        let mut worst: f64 = 0.0;
        for (k, v) in &self.coeffs {
            let m = neg_mode(k);
            let w = self.coeffs.get(&m).unwrap_or(&zeros);
            for (a, b) in v.iter().zip(w) {
                worst = worst.max((b - a.conj()).norm());
            }
        }
        worst
    }

    /// Projects onto real functions by `c_k <- (c_k + conj(c_{-k})) / 2`.
    pub fn realify(&mut self) {
        let keys: Vec<Mode> = self.coeffs.keys().cloned().collect();
        let zeros = vec![ZERO; self.shape.len()];
        let mut out = BTreeMap::new();
        for k in keys.iter() {
            let m = neg_mode(k);
            let a = &self.coeffs[k];
            let b = self.coeffs.get(&m).unwrap_or(&zeros);
            let v: Vec<Complex64> = a.iter().zip(b).map(|(x, y)| (x + y.conj()) * 0.5).collect();
            out.insert(m.clone(), v.iter().map(|c| c.conj()).collect());
            out.insert(k.clone(), v);
        }
        self.coeffs = out;
        self.real = true;
    }

    /// Drops modes with `|k| > k_max`.
    pub fn truncate(&mut self, k_max: u32) {
        self.coeffs.retain(|k, _| order(k) <= k_max);
    }

    /// Drops coefficients whose entries all have modulus `<= tol`.
    pub fn prune(&mut self, tol: f64) {
        self.coeffs.retain(|_, v| v.iter().any(|c| c.norm() > tol));
    }

    fn check_compatible(&self, other: &Self) -> Result<()> {
        if self.dim != other.dim {
            return Err(Error::ShapeMismatch(format!("torus dimensions {} and {}", self.dim, other.dim)));
        }
        Ok(())
    }

    pub fn add(&self, other: &Self) -> Result<Self> {
        self.axpy(Complex64::new(1.0, 0.0), other)
    }

    pub fn sub(&self, other: &Self) -> Result<Self> {
        self.axpy(Complex64::new(-1.0, 0.0), other)
    }

    /// `self + s * other`.
    pub fn axpy(&self, s: Complex64, other: &Self) -> Result<Self> {
        self.check_compatible(other)?;
        if self.shape != other.shape {
            return Err(Error::ShapeMismatch(format!("cannot add {:?} and {:?}", self.shape, other.shape)));
        }
        let mut out = self.clone();
        out.rho = self.rho.min(other.rho);
        out.real = self.real && other.real && s.im == 0.0;
        for (k, v) in &other.coeffs {
            let slot = out.coeffs.entry(k.clone()).or_insert_with(|| vec![ZERO; v.len()]);
            for (a, b) in slot.iter_mut().zip(v) {
                *a += s * b;
            }
        }
        Ok(out)
    }

    pub fn scale(&self, s: f64) -> Self {
        self.map_values(|v| v.iter().map(|c| c * s).collect(), self.shape)
            .expect("scaling preserves shape")
    }

    pub fn scale_complex(&self, s: Complex64) -> Self {
        let mut out = self.map_values(|v| v.iter().map(|c| c * s).collect(), self.shape).expect("scaling preserves shape");
        out.real = self.real && s.im == 0.0;
        out
    }

    /// Applies `f` to every coefficient block; `f` must return blocks of `shape`.
    pub fn map_values<F>(&self, f: F, shape: Shape) -> Result<Self>
    where
        F: Fn(&[Complex64]) -> Vec<Complex64>,
    {
        let mut coeffs = BTreeMap::new();
        for (k, v) in &self.coeffs {
            let w = f(v);
            if w.len() != shape.len() {
                return Err(Error::ShapeMismatch("mapped block has the wrong size".into()));
            }
            coeffs.insert(k.clone(), w);
        }
        Ok(FourierSeries { dim: self.dim, shape, rho: self.rho, real: self.real, coeffs })
    }

    /// `M * self` for a constant matrix `M`.
    pub fn left_mul_matrix(&self, m: &DMatrix<Complex64>) -> Result<Self> {
        if m.ncols() != self.shape.rows {
            return Err(Error::ShapeMismatch(format!("{}x{} times {:?}", m.nrows(), m.ncols(), self.shape)));
        }
        let (r, c) = (m.nrows(), self.shape.cols);
        let inner = self.shape.rows;
        let mut out = self.map_values(
            |v| {
                let mut w = vec![ZERO; r * c];
                for i in 0..r {
                    for l in 0..inner {
                        let a = m[(i, l)];
                        if a == ZERO {
                            continue;
                        }
                        for j in 0..c {
                            w[i * c + j] += a * v[l * c + j];
                        }
                    }
                }
                w
            },
            Shape { rows: r, cols: c },
        )?;
        out.real = false;
        Ok(out)
    }

    /// `self * M` for a constant matrix `M`.
    pub fn right_mul_matrix(&self, m: &DMatrix<Complex64>) -> Result<Self> {
        if m.nrows() != self.shape.cols {
            return Err(Error::ShapeMismatch(format!("{:?} times {}x{}", self.shape, m.nrows(), m.ncols())));
        }
        let (r, c) = (self.shape.rows, m.ncols());
        let inner = self.shape.cols;
        let mut out = self.map_values(
            |v| {
                let mut w = vec![ZERO; r * c];
                for i in 0..r {
                    for l in 0..inner {
                        let a = v[i * inner + l];
                        if a == ZERO {
                            continue;
                        }
                        for j in 0..c {
                            w[i * c + j] += a * m[(l, j)];
                        }
                    }
                }
                w
            },
            Shape { rows: r, cols: c },
        )?;
        out.real = false;
        Ok(out)
    }

    /// Truncated product. Shapes multiply as matrices; a `1x1` factor
    /// broadcasts as a scalar.
    pub fn mul(&self, other: &Self, trunc: &Truncation) -> Result<Self> {
        self.check_compatible(other)?;
        let (a_shape, b_shape) = (self.shape, other.shape);
        let (shape, kind) = if a_shape.is_scalar() {
            (b_shape, 1)
        } else if b_shape.is_scalar() {
            (a_shape, 2)
        } else if a_shape.cols == b_shape.rows {
            (Shape { rows: a_shape.rows, cols: b_shape.cols }, 0)
        } else {
            return Err(Error::ShapeMismatch(format!("cannot multiply {a_shape:?} by {b_shape:?}")));
        };
        let mut coeffs: BTreeMap<Mode, Vec<Complex64>> = BTreeMap::new();
        for (ka, va) in &self.coeffs {
            for (kb, vb) in &other.coeffs {
                let k = add_modes(ka, kb);
                if order(&k) > trunc.k_max {
                    continue;
                }
                let slot = coeffs.entry(k).or_insert_with(|| vec![ZERO; shape.len()]);
                match kind {
                    1 => {
                        let s = va[0];
                        for (w, b) in slot.iter_mut().zip(vb) {
                            *w += s * b;
                        }
                    }
                    2 => {
                        let s = vb[0];
                        for (w, a) in slot.iter_mut().zip(va) {
                            *w += a * s;
                        }
                    }
                    _ => {
                        let (r, inner, c) = (a_shape.rows, a_shape.cols, b_shape.cols);
                        for i in 0..r {
                            for l in 0..inner {
                                let a = va[i * inner + l];
                                if a == ZERO {
                                    continue;
                                }
                                for j in 0..c {
                                    slot[i * c + j] += a * vb[l * c + j];
                                }
                            }
                        }
                    }
                }
            }
            if coeffs.len() > trunc.mode_budget {
                return Err(Error::TruncationOverflow { modes: coeffs.len(), budget: trunc.mode_budget });
            }
        }
        Ok(FourierSeries { dim: self.dim, shape, rho: self.rho.min(other.rho), real: self.real && other.real, coeffs })
    }

    /// Divides each coefficient entry `(i, j)` at mode `k` by `divisor(k, i, j)`.
    /// Fails if any divisor used has modulus below `floor`.
    pub fn divide_entrywise<F>(&self, divisor: F, floor: f64) -> Result<Self>
    where
        F: Fn(&[i32], usize, usize) -> Complex64,
    {
        let mut out = self.clone();
        out.real = false;
        let cols = self.shape.cols;
        for (k, v) in out.coeffs.iter_mut() {
            for (idx, c) in v.iter_mut().enumerate() {
                let d = divisor(k, idx / cols, idx % cols);
                if d.norm() < floor {
                    return Err(Error::SmallDivisor { k: k.to_vec(), magnitude: d.norm(), floor });
                }
                *c /= d;
            }
        }
        Ok(out)
    }

    /// Divides the coefficient at mode `k` by `divisor(k)`.
    pub fn divide_by_divisor<F>(&self, divisor: F, floor: f64) -> Result<Self>
    where
        F: Fn(&[i32]) -> Complex64,
    {
        self.divide_entrywise(|k, _, _| divisor(k), floor)
    }

    /// Solves `w . grad_theta v = self` for zero-mean `v`; requires zero mean.
    pub fn integrate_along(&self, omega: &[f64], floor: f64) -> Result<Self> {
        let mean = self.mean().iter().map(|c| c.norm()).fold(0.0, f64::max);
        if mean > 0.0 {
            return Err(Error::NonzeroMean { mean });
        }
        let mut out = self.divide_by_divisor(|k| Complex64::new(0.0, dot(k, omega)), floor)?;
        out.real = self.real;
        Ok(out)
    }

    /// `w . grad_theta self`.
    pub fn derivative_along(&self, omega: &[f64]) -> Self {
        let mut out = self.clone();
        for (k, v) in out.coeffs.iter_mut() {
            let f = Complex64::new(0.0, dot(k, omega));
            for c in v.iter_mut() {
                *c *= f;
            }
        }
        out.coeffs.retain(|k, _| !is_zero_mode(k));
        out
    }

    /// Point evaluation, row-major.
    pub fn eval(&self, theta: &[f64]) -> Vec<Complex64> {
        let mut out = vec![ZERO; self.shape.len()];
        for (k, v) in &self.coeffs {
            let e = Complex64::from_polar(1.0, dot(k, theta));
            for (o, c) in out.iter_mut().zip(v) {
                *o += c * e;
            }
        }
        out
    }

    /// Real part of [`FourierSeries::eval`].
    pub fn eval_real(&self, theta: &[f64]) -> Vec<f64> {
        self.eval(theta).into_iter().map(|c| c.re).collect()
    }

    pub fn eval_matrix(&self, theta: &[f64]) -> DMatrix<Complex64> {
        DMatrix::from_row_slice(self.shape.rows, self.shape.cols, &self.eval(theta))
    }

    /// Scalar series of entry `(i, j)`.
    pub fn entry(&self, i: usize, j: usize) -> Self {
        let idx = i * self.shape.cols + j;
        self.map_values(|v| vec![v[idx]], Shape::SCALAR).expect("entry block is scalar")
    }

    /// Assembles a `rows x cols` series from scalar entries in row-major order.
    pub fn from_entries(shape: Shape, entries: &[FourierSeries]) -> Result<Self> {
        if entries.len() != shape.len() || entries.is_empty() {
            return Err(Error::ShapeMismatch("wrong number of entries".into()));
        }
        let dim = entries[0].dim;
        let mut out = Self::zero(dim, shape, entries.iter().map(|e| e.rho).fold(f64::INFINITY, f64::min));
        out.real = entries.iter().all(|e| e.real);
        for (idx, e) in entries.iter().enumerate() {
            if !e.shape.is_scalar() || e.dim != dim {
                return Err(Error::ShapeMismatch("entries must be scalar series on the same torus".into()));
            }
            for (k, v) in &e.coeffs {
                let slot = out.coeffs.entry(k.clone()).or_insert_with(|| vec![ZERO; shape.len()]);
                slot[idx] += v[0];
            }
        }
        Ok(out)
    }

    pub fn reshape(mut self, shape: Shape) -> Result<Self> {
        if shape.len() != self.shape.len() {
            return Err(Error::ShapeMismatch(format!("cannot reshape {:?} to {shape:?}", self.shape)));
        }
        self.shape = shape;
        Ok(self)
    }

    /// Coefficientwise maximum distance to `other` (missing modes count as zero).
    pub fn max_coeff_distance(&self, other: &Self) -> f64 {
        let mut worst: f64 = 0.0;
        for (k, v) in &self.coeffs {
            match other.coeffs.get(k) {
                Some(w) => v.iter().zip(w).for_each(|(a, b)| worst = worst.max((a - b).norm())),
                None => v.iter().for_each(|a| worst = worst.max(a.norm())),
            }
        }
        for (k, w) in &other.coeffs {
            if !self.coeffs.contains_key(k) {
                w.iter().for_each(|b| worst = worst.max(b.norm()));
            }
        }
        worst
    }
}

/// On-disk form of a [`FourierSeries`].
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct SeriesRecord {
    pub d: usize,
    pub rows: usize,
    pub cols: usize,
    pub rho: f64,
    pub real: bool,
    pub coeffs: Vec<ModeRecord>,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct ModeRecord {
    pub k: Vec<i32>,
    pub re: Vec<f64>,
    pub im: Vec<f64>,
}

impl From<FourierSeries> for SeriesRecord {
    fn from(s: FourierSeries) -> Self {
        SeriesRecord {
            d: s.dim,
            rows: s.shape.rows,
            cols: s.shape.cols,
            rho: s.rho,
            real: s.real,
            coeffs: s
                .coeffs
                .iter()
                .map(|(k, v)| ModeRecord {
                    k: k.to_vec(),
                    re: v.iter().map(|c| c.re).collect(),
                    im: v.iter().map(|c| c.im).collect(),
                })
                .collect(),
        }
    }
}

impl TryFrom<SeriesRecord> for FourierSeries {
    type Error = Error;

    fn try_from(r: SeriesRecord) -> Result<Self> {
        let shape = Shape { rows: r.rows, cols: r.cols };
        let mut s = FourierSeries::zero(r.d, shape, r.rho);
        s.real = r.real;
        for m in r.coeffs {
            if m.re.len() != m.im.len() {
                return Err(Error::ShapeMismatch(format!("mode {:?}: re and im lengths differ", m.k)));
            }
            let v: Vec<Complex64> = m.re.iter().zip(&m.im).map(|(&a, &b)| Complex64::new(a, b)).collect();
            s.insert(&m.k, &v)?;
        }
        Ok(s)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn c(re: f64, im: f64) -> Complex64 {
        Complex64::new(re, im)
    }

    fn cos1(d: usize) -> FourierSeries {
        // cos(theta_1) on T^d
        let mut k: Mode = zero_mode(d);
        k[0] = 1;
        let mut s = FourierSeries::zero(d, Shape::SCALAR, 1.0);
        s.insert(&k, &[c(0.5, 0.0)]).unwrap();
        s.insert(&neg_mode(&k), &[c(0.5, 0.0)]).unwrap();
        s
    }

    #[test]
    fn cosine_norm_at_unit_width_is_e() {
        let n = cos1(1).majorant_norm(1.0).unwrap();
        assert!((n - std::f64::consts::E).abs() < 1e-15);
        assert!((n - 2.718282).abs() < 1e-6);
    }

    #[test]
    fn norm_beyond_declared_width_is_rejected() {
        assert!(matches!(cos1(1).majorant_norm(1.5), Err(Error::WidthViolation { .. })));
    }

    #[test]
    fn cosine_squared_has_half_mean() {
        let s = cos1(1);
        let p = s.mul(&s, &Truncation::new(10, 4)).unwrap();
        assert!((p.mean()[0] - c(0.5, 0.0)).norm() < 1e-16);
        assert!((p.coeff(&[2]).unwrap()[0] - c(0.25, 0.0)).norm() < 1e-16);
    }

    #[test]
    fn integrating_cosine_gives_sine() {
        let v = cos1(2).integrate_along(&[1.0, 0.5], 1e-14).unwrap();
        let th = [0.7, 0.1];
        assert!((v.eval_real(&th)[0] - 0.7f64.sin()).abs() < 1e-15);
        assert!(v.reality_defect() < 1e-16);
    }

    #[test]
    fn integration_rejects_nonzero_mean() {
        let s = FourierSeries::constant(1, Shape::SCALAR, vec![c(1.0, 0.0)], 1.0).unwrap();
        assert!(matches!(s.integrate_along(&[1.0], 1e-14), Err(Error::NonzeroMean { .. })));
    }

    #[test]
    fn divisor_below_floor_reports_mode() {
        let s = cos1(2);
        let err = s.integrate_along(&[1.0, 0.0], 1e-14);
        // <k,w> = 1 for k = (1,0); this passes
        assert!(err.is_ok());
        let mut t = FourierSeries::zero(2, Shape::SCALAR, 1.0);
        t.insert(&[1, -1], &[c(1.0, 0.0)]).unwrap();
        match t.integrate_along(&[1.0, 1.0], 1e-14) {
            Err(Error::SmallDivisor { k, .. }) => assert_eq!(k, vec![1, -1]),
            other => panic!("expected small divisor, got {other:?}"),
        }
    }

    #[test]
    fn matrix_products_respect_shapes() {
        let a = FourierSeries::from_real_matrix(1, &DMatrix::from_row_slice(2, 2, &[1.0, 2.0, 3.0, 4.0]), 1.0);
        let v = FourierSeries::from_real_vector(1, &[1.0, -1.0], 1.0);
        let av = a.mul(&v, &Truncation::new(5, 2)).unwrap();
        assert_eq!(av.shape(), Shape::vector(2));
        assert_eq!(av.mean(), vec![c(-1.0, 0.0), c(-1.0, 0.0)]);
        assert!(v.mul(&a, &Truncation::new(5, 2)).is_err());
    }

    #[test]
    fn realify_symmetrises() {
        let mut s = FourierSeries::zero(1, Shape::SCALAR, 1.0);
        s.insert(&[1], &[c(1.0, 1.0)]).unwrap();
        s.insert(&[-1], &[c(1.0, -0.5)]).unwrap();
        assert!(s.reality_defect() > 0.1);
        s.realify();
        assert!(s.reality_defect() == 0.0);
        assert_eq!(s.coeff(&[1]).unwrap()[0], c(1.0, 0.75));
    }

    #[test]
    fn record_round_trip() {
        let mut s = cos1(2);
        s.insert(&[3, -1], &[c(1e-3, 2.5e-7)]).unwrap();
        let r: SeriesRecord = s.clone().into();
        let t = FourierSeries::try_from(r).unwrap();
        assert_eq!(s, t);
    }
}
