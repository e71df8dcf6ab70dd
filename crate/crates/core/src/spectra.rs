//! Eigen-decomposition of real matrices with simple nonzero spectrum, the
//! spectral constants `beta0`, `mu`, `mu_star`, `alpha`, and the check that a
//! nearby matrix keeps a well-conditioned eigenbasis.
//!
//! Conventions: eigenvalues are sorted by real part, then by decreasing
//! imaginary part. Each eigenvector column has unit max-norm and its first
//! entry of maximal modulus is real and positive. Eigenvectors of a complex
//! conjugate pair are exact conjugates of each other.

use nalgebra::{DMatrix, SVD};
use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Relative tolerance below which two eigenvalues are considered equal.
const COLLISION_TOL: f64 = 1e-9;
/// Relative tolerance below which an eigenvalue is considered zero.
const ZERO_TOL: f64 = 1e-12;

/// Eigenbasis `C` of a real matrix `A` with `C^{-1} A C = diag(lambdas)`.
#[derive(Clone, Debug, PartialEq)]
pub struct SpectralFrame {
    pub a: DMatrix<f64>,
    pub lambdas: Vec<Complex64>,
    pub c: DMatrix<Complex64>,
    pub c_inv: DMatrix<Complex64>,
    /// `max(|C|, |C^{-1}|)` of this frame.
    pub beta: f64,
    /// `beta` of the reference frame.
    pub beta0: f64,
    pub mu: f64,
    pub mu_star: f64,
    pub alpha: f64,
}

/// Serializable summary of a [`SpectralFrame`].
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct FrameSummary {
    pub lambdas_re: Vec<f64>,
    pub lambdas_im: Vec<f64>,
    pub beta: f64,
    pub beta0: f64,
    pub mu: f64,
    pub mu_star: f64,
    pub alpha: f64,
}

impl SpectralFrame {
    pub fn n(&self) -> usize {
        self.lambdas.len()
    }

    pub fn summary(&self) -> FrameSummary {
        FrameSummary {
            lambdas_re: self.lambdas.iter().map(|l| l.re).collect(),
            lambdas_im: self.lambdas.iter().map(|l| l.im).collect(),
            beta: self.beta,
            beta0: self.beta0,
            mu: self.mu,
            mu_star: self.mu_star,
            alpha: self.alpha,
        }
    }

    /// `|C^{-1} A C - diag(lambdas)|` in the induced infinity norm.
    pub fn diagonalization_defect(&self) -> f64 {
        let a = self.a.map(|x| Complex64::new(x, 0.0));
        let mut d = &self.c_inv * a * &self.c;
        for (i, l) in self.lambdas.iter().enumerate() {
            d[(i, i)] -= l;
        }
        complex_norm_inf(&d)
    }
}

/// Induced infinity norm of a complex matrix.
pub fn complex_norm_inf(m: &DMatrix<Complex64>) -> f64 {
    m.row_iter().map(|r| r.iter().map(|c| c.norm()).sum::<f64>()).fold(0.0, f64::max)
}

/// Induced infinity norm of a real matrix.
pub fn real_norm_inf(m: &DMatrix<f64>) -> f64 {
    m.row_iter().map(|r| r.iter().map(|c| c.abs()).sum::<f64>()).fold(0.0, f64::max)
}

fn sort_key(a: &Complex64, b: &Complex64) -> std::cmp::Ordering {
    a.re.total_cmp(&b.re).then(b.im.total_cmp(&a.im))
}

/// Scales `v` to unit max-norm with its first maximal entry real positive.
fn normalize_column(v: &mut [Complex64]) {
    let top = v.iter().map(|c| c.norm()).fold(0.0, f64::max);
    let p = v.iter().position(|c| c.norm() >= top * (1.0 - 1e-12)).unwrap_or(0);
    let phase = v[p].conj() / (v[p].norm() * top);
    for c in v.iter_mut() {
        *c *= phase;
    }
    v[p] = Complex64::new(v[p].re, 0.0);
}

fn null_vector(a: &DMatrix<Complex64>, lambda: Complex64) -> Vec<Complex64> {
    let n = a.nrows();
    let mut m = a.clone();
    for i in 0..n {
        m[(i, i)] -= lambda;
    }
    let svd = SVD::new(m, false, true);
    let vt = svd.v_t.expect("right singular vectors were requested");
    let sv = &svd.singular_values;
    let idx = (0..sv.len()).min_by(|&i, &j| sv[i].total_cmp(&sv[j])).unwrap_or(0);
    (0..n).map(|j| vt[(idx, j)].conj()).collect()
}

/// Sorted eigenvalues and normalized eigenvector columns.
fn eigen_pairs(a: &DMatrix<f64>) -> Result<(Vec<Complex64>, DMatrix<Complex64>)> {
    let n = a.nrows();
    if n == 0 || a.ncols() != n {
        return Err(Error::ShapeMismatch(format!("expected a nonempty square matrix, got {}x{}", a.nrows(), a.ncols())));
    }
    if a.iter().any(|x| !x.is_finite()) {
        return Err(Error::InvalidInput("matrix has non-finite entries".into()));
    }
    let scale = real_norm_inf(a).max(1.0);
    let mut lambdas: Vec<Complex64> = a.clone().complex_eigenvalues().iter().copied().collect();
    for l in lambdas.iter_mut() {
        if l.im.abs() <= 1e-14 * scale {
            l.im = 0.0;
        }
    }
    lambdas.sort_by(sort_key);
    for (i, l) in lambdas.iter().enumerate() {
        if l.norm() <= ZERO_TOL * scale {
            return Err(Error::SingularSpectrum { i, modulus: l.norm() });
        }
    }
    for i in 0..n {
        for j in i + 1..n {
            let gap = (lambdas[i] - lambdas[j]).norm();
            if gap <= COLLISION_TOL * scale {
                return Err(Error::DegenerateSpectrum { i, j, gap });
            }
        }
    }
    let ac = a.map(|x| Complex64::new(x, 0.0));
    let mut cols: Vec<Option<Vec<Complex64>>> = vec![None; n];
    for i in 0..n {
        if cols[i].is_some() {
            continue;
        }
        let l = lambdas[i];
        let mut v = null_vector(&ac, l);
        normalize_column(&mut v);
        if l.im == 0.0 {
            v.iter_mut().for_each(|c| c.im = 0.0);
            normalize_column(&mut v);
        } else {
            let partner = (0..n)
                .filter(|&j| j != i && cols[j].is_none())
                .min_by(|&p, &q| (lambdas[p] - l.conj()).norm().total_cmp(&(lambdas[q] - l.conj()).norm()));
            if let Some(j) = partner {
                if (lambdas[j] - l.conj()).norm() <= 1e-10 * scale {
                    lambdas[j] = l.conj();
                    cols[j] = Some(v.iter().map(|c| c.conj()).collect());
                }
            }
        }
        cols[i] = Some(v);
    }
    let mut c = DMatrix::zeros(n, n);
    for (j, col) in cols.into_iter().enumerate() {
        for (i, x) in col.expect("every column is filled").into_iter().enumerate() {
            c[(i, j)] = x;
        }
    }
    Ok((lambdas, c))
}

fn invert(c: &DMatrix<Complex64>) -> Result<DMatrix<Complex64>> {
    c.clone()
        .lu()
        .try_inverse()
        .ok_or_else(|| Error::ConclusionViolation("eigenvector matrix is singular".into()))
}

fn spectral_extremes(lambdas: &[Complex64]) -> (f64, f64) {
    let mut lo = f64::INFINITY;
    let mut hi: f64 = 0.0;
    for (i, a) in lambdas.iter().enumerate() {
        lo = lo.min(a.norm());
        hi = hi.max(a.norm());
        for b in &lambdas[i + 1..] {
            lo = lo.min((a - b).norm());
            hi = hi.max((a - b).norm());
        }
    }
    (lo, hi)
}

/// Diagonalizes `a` and derives the spectral constants; `margin_fraction`
/// in `(0, 1]` shrinks `mu` below half the smallest modulus or gap.
pub fn diagonalize(a: &DMatrix<f64>, margin_fraction: f64) -> Result<SpectralFrame> {
    if !(margin_fraction > 0.0 && margin_fraction <= 1.0) {
        return Err(Error::InvalidInput(format!("margin fraction must lie in (0, 1], got {margin_fraction}")));
    }
    let (lambdas, c) = eigen_pairs(a)?;
    let c_inv = invert(&c)?;
    let n = lambdas.len();
    let beta0 = complex_norm_inf(&c).max(complex_norm_inf(&c_inv));
    let (lo, hi) = spectral_extremes(&lambdas);
    let mu = margin_fraction * 0.5 * lo;
    let mu_star = 1.01 * hi;
    let alpha = 2.0 * mu / ((3 * n - 1) as f64 * beta0 * beta0);
    let frame = SpectralFrame { a: a.clone(), lambdas, c, c_inv, beta: beta0, beta0, mu, mu_star, alpha };
    let defect = frame.diagonalization_defect();
    if defect > 1e-10 * real_norm_inf(a).max(1.0) {
        return Err(Error::ConclusionViolation(format!("diagonalization defect {defect:e}")));
    }
    Ok(frame)
}

/// Eigenbasis of `a_new` inside the ball `|a_new - A| < alpha` around the
/// reference frame, matched to the reference eigenvalues by nearest
/// neighbour and phase-aligned to the reference columns.
///
/// Fails if `a_new` is outside the ball or if the conclusions
/// `|lambda| > mu`, `|lambda_i - lambda_j| > mu`, `max(|C|, |C^{-1}|) <= 2 beta0`
/// do not hold.
pub fn perturbation_check(frame0: &SpectralFrame, a_new: &DMatrix<f64>) -> Result<SpectralFrame> {
    let distance = real_norm_inf(&(a_new - &frame0.a));
    if distance >= frame0.alpha {
        return Err(Error::OutsideBall { distance, alpha: frame0.alpha });
    }
    if distance == 0.0 {
        return Ok(frame0.clone());
    }
    let (lambdas, c) = eigen_pairs(a_new)?;
    let n = lambdas.len();
    // greedy global nearest-neighbour matching
    let mut assign = vec![usize::MAX; n];
    let mut used = vec![false; n];
    for _ in 0..n {
        let mut best = (f64::INFINITY, 0, 0);
        for (i, l0) in frame0.lambdas.iter().enumerate() {
            if assign[i] != usize::MAX {
                continue;
            }
            for (j, l) in lambdas.iter().enumerate() {
                if !used[j] && (l - l0).norm() < best.0 {
                    best = ((l - l0).norm(), i, j);
                }
            }
        }
        assign[best.1] = best.2;
        used[best.2] = true;
    }
    let mut matched = Vec::with_capacity(n);
    let mut cm = DMatrix::zeros(n, n);
    for i in 0..n {
        let j = assign[i];
        matched.push(lambdas[j]);
        let ref_col = frame0.c.column(i);
        let col = c.column(j);
        let overlap: Complex64 = ref_col.iter().zip(col.iter()).map(|(r, x)| r.conj() * x).sum();
        let phase = if overlap.norm() > 0.0 { overlap.conj() / overlap.norm() } else { Complex64::new(1.0, 0.0) };
        for r in 0..n {
            cm[(r, i)] = col[r] * phase;
        }
    }
    let c_inv = invert(&cm)?;
    let beta = complex_norm_inf(&cm).max(complex_norm_inf(&c_inv));
    for (i, l) in matched.iter().enumerate() {
        if l.norm() <= frame0.mu {
            return Err(Error::ConclusionViolation(format!("|lambda_{i}| = {} <= mu = {}", l.norm(), frame0.mu)));
        }
        for (j, m) in matched.iter().enumerate().skip(i + 1) {
            if (l - m).norm() <= frame0.mu {
                return Err(Error::ConclusionViolation(format!("|lambda_{i} - lambda_{j}| <= mu = {}", frame0.mu)));
            }
        }
    }
    if beta > 2.0 * frame0.beta0 {
        return Err(Error::ConclusionViolation(format!("max(|C|, |C^-1|) = {beta} > 2 beta0 = {}", 2.0 * frame0.beta0)));
    }
    Ok(SpectralFrame {
        a: a_new.clone(),
        lambdas: matched,
        c: cm,
        c_inv,
        beta,
        beta0: frame0.beta0,
        mu: frame0.mu,
        mu_star: frame0.mu_star,
        alpha: frame0.alpha,
    })
}

/// Eigenvalue moduli and gaps of `a_m` against the window `(mu, mu_star)`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MarginReport {
    pub min_value: f64,
    pub max_value: f64,
    pub holds: bool,
}

pub fn gerschgorin_margins(frame: &SpectralFrame, a_m: &DMatrix<f64>) -> MarginReport {
    let lambdas: Vec<Complex64> = a_m.clone().complex_eigenvalues().iter().copied().collect();
    let (lo, hi) = spectral_extremes(&lambdas);
    MarginReport { min_value: lo, max_value: hi, holds: lo > frame.mu && hi < frame.mu_star }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn rot() -> DMatrix<f64> {
        DMatrix::from_row_slice(2, 2, &[0.0, 1.0, -1.0, 0.0])
    }

    #[test]
    fn rotation_generator_constants() {
        let f = diagonalize(&rot(), 0.8).unwrap();
        assert_eq!(f.lambdas, vec![Complex64::new(0.0, 1.0), Complex64::new(0.0, -1.0)]);
        assert!((f.c[(0, 0)] - Complex64::new(1.0, 0.0)).norm() < 1e-14);
        assert!((f.c[(1, 0)] - Complex64::new(0.0, 1.0)).norm() < 1e-14);
        assert!((f.c[(1, 1)] - Complex64::new(0.0, -1.0)).norm() < 1e-14);
        assert!((f.beta0 - 2.0).abs() < 1e-14);
        assert!((f.mu - 0.4).abs() < 1e-14);
        assert!((f.alpha - 0.04).abs() < 1e-14);
        assert!((f.mu_star - 2.02).abs() < 1e-14);
    }

    #[test]
    fn diagonal_matrix_has_identity_basis() {
        let f = diagonalize(&DMatrix::from_diagonal(&nalgebra::DVector::from_vec(vec![1.0, 2.0])), 1.0).unwrap();
        assert_eq!(f.lambdas, vec![Complex64::new(1.0, 0.0), Complex64::new(2.0, 0.0)]);
        assert!((f.c.clone() - DMatrix::identity(2, 2)).norm() < 1e-14);
        assert!((f.beta0 - 1.0).abs() < 1e-14);
    }

    #[test]
    fn repeated_and_zero_eigenvalues_are_rejected() {
        assert!(matches!(diagonalize(&DMatrix::identity(2, 2), 0.8), Err(Error::DegenerateSpectrum { .. })));
        let z = DMatrix::from_row_slice(2, 2, &[0.0, 0.0, 0.0, 1.0]);
        assert!(matches!(diagonalize(&z, 0.8), Err(Error::SingularSpectrum { .. })));
    }

    #[test]
    fn unperturbed_matrix_reproduces_frame() {
        let f = diagonalize(&rot(), 0.8).unwrap();
        assert_eq!(perturbation_check(&f, &rot()).unwrap(), f);
    }

    #[test]
    fn far_matrix_is_outside_ball() {
        let f = diagonalize(&rot(), 0.8).unwrap();
        let far = rot() + DMatrix::from_element(2, 2, 0.05);
        assert!(matches!(perturbation_check(&f, &far), Err(Error::OutsideBall { .. })));
    }

    #[test]
    fn small_perturbation_keeps_order_and_phase() {
        let f = diagonalize(&rot(), 0.8).unwrap();
        let near = rot() + DMatrix::from_row_slice(2, 2, &[0.003, -0.002, 0.001, 0.004]);
        let g = perturbation_check(&f, &near).unwrap();
        assert!(g.lambdas[0].im > 0.0 && g.lambdas[1].im < 0.0);
        assert!(g.diagonalization_defect() < 1e-13);
        assert!((g.c.clone() - f.c.clone()).norm() < 0.05);
    }
}
