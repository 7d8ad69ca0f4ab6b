//! Symmetric eigendecomposition of Gram matrices, ordered by sign.
//!
//! A [`GramSpectrum`] stores `K = V diag(sigma) V^T` with
//! `sigma_1 >= ... >= sigma_p > 0 = ... = 0 > sigma_{m-q+1} >= ... >= sigma_m`.
//! Eigenvalues with `|sigma| <= zero_tol` are stored as exact zeros. The
//! cutoff defaults to `m * eps * max|sigma|`.
//!
//! Within a repeated eigenvalue the basis is whatever the (deterministic)
//! backend returns; what downstream code relies on is basis-independent.

mod jacobi;

pub use jacobi::jacobi_eigen;

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::config::Tolerances;
use crate::error::{Error, Result};
use crate::stats::{linear_fit, LinearFit};

/// Backend for [`sym_eig_with`].
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum EigenMethod {
    /// Householder tridiagonalization with a divide-and-conquer tridiagonal
    /// solver (via `faer`), run sequentially.
    #[default]
    Dense,
    /// Cyclic Jacobi sweeps.
    Jacobi,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GramSpectrum {
    /// Orthogonal; column `i` pairs with `values[i]`.
    pub vectors: DMatrix<f64>,
    pub values: DVector<f64>,
    /// Number of positive eigenvalues (`p`).
    pub positive: usize,
    /// Number of negative eigenvalues (`q`).
    pub negative: usize,
    pub zero_tol: f64,
}

/// The `{p, q, zero_tol}` sidecar written next to exported spectra.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SpectrumSidecar {
    pub p: usize,
    pub q: usize,
    pub zero_tol: f64,
}

impl GramSpectrum {
    /// Builds a spectrum from unsorted eigenpairs: sorts descending, snaps
    /// tiny values to zero and fixes eigenvector signs (largest-magnitude
    /// entry positive, first index on ties).
    ///
    /// `zero_tol = None` uses `scale * m * eps * max|sigma|`.
    pub fn from_eigenpairs(
        values: DVector<f64>,
        vectors: DMatrix<f64>,
        zero_tol: Option<f64>,
        scale: f64,
    ) -> Result<GramSpectrum> {
        let m = values.len();
        if vectors.nrows() != m || vectors.ncols() != m {
            return Err(Error::arg(format!(
                "eigenvector matrix is {}x{} for {m} eigenvalues",
                vectors.nrows(),
                vectors.ncols()
            )));
        }
        if !values.iter().all(|v| v.is_finite()) {
            return Err(Error::Numeric("eigenvalues are not finite".into()));
        }
        let max_abs = values.iter().fold(0.0f64, |acc, v| acc.max(v.abs()));
        let zero_tol = zero_tol.unwrap_or(scale * m as f64 * f64::EPSILON * max_abs);

        let mut order: Vec<usize> = (0..m).collect();
        order.sort_by(|&a, &b| values[b].total_cmp(&values[a]).then(a.cmp(&b)));

        let mut sorted_vals = DVector::zeros(m);
        let mut sorted_vecs = DMatrix::zeros(m, m);
        for (dst, &src) in order.iter().enumerate() {
            let v = values[src];
            sorted_vals[dst] = if v.abs() <= zero_tol { 0.0 } else { v };
            let mut col = vectors.column(src).clone_owned();
            let pivot = col
                .iter()
                .enumerate()
                .fold((0usize, 0.0f64), |(bi, bv), (i, x)| {
                    if x.abs() > bv {
                        (i, x.abs())
                    } else {
                        (bi, bv)
                    }
                })
                .0;
            if col[pivot] < 0.0 {
                col.neg_mut();
            }
            sorted_vecs.set_column(dst, &col);
        }
        let positive = sorted_vals.iter().filter(|&&v| v > 0.0).count();
        let negative = sorted_vals.iter().filter(|&&v| v < 0.0).count();
        Ok(GramSpectrum {
            vectors: sorted_vecs,
            values: sorted_vals,
            positive,
            negative,
            zero_tol,
        })
    }

    pub fn dim(&self) -> usize {
        self.values.len()
    }

    pub fn zeros(&self) -> usize {
        self.dim() - self.positive - self.negative
    }

    pub fn is_full_rank(&self) -> bool {
        self.zeros() == 0
    }

    pub fn sigma_max(&self) -> f64 {
        self.values[0]
    }

    pub fn sigma_min(&self) -> f64 {
        self.values[self.dim() - 1]
    }

    /// Condition number `sigma_1 / sigma_p` of the positive block; 1 if empty.
    pub fn positive_condition(&self) -> f64 {
        if self.positive == 0 {
            1.0
        } else {
            self.values[0] / self.values[self.positive - 1]
        }
    }

    /// Condition number `sigma_m / sigma_{m-q+1}` of the negative block; 1 if empty.
    pub fn negative_condition(&self) -> f64 {
        if self.negative == 0 {
            1.0
        } else {
            let m = self.dim();
            self.values[m - 1] / self.values[m - self.negative]
        }
    }

    pub fn sidecar(&self) -> SpectrumSidecar {
        SpectrumSidecar {
            p: self.positive,
            q: self.negative,
            zero_tol: self.zero_tol,
        }
    }

    /// `V^T y`.
    pub fn coordinates(&self, y: &DVector<f64>) -> DVector<f64> {
        self.vectors.tr_mul(y)
    }

    /// `V v`.
    pub fn from_coordinates(&self, w: &DVector<f64>) -> DVector<f64> {
        &self.vectors * w
    }

    /// `V diag(f(sigma_i)) V^T`.
    pub fn spectral_map(&self, f: impl Fn(f64) -> f64) -> DMatrix<f64> {
        let mut scaled = self.vectors.clone();
        for (j, &s) in self.values.iter().enumerate() {
            let fs = f(s);
            scaled.column_mut(j).scale_mut(fs);
        }
        scaled * self.vectors.transpose()
    }

    pub fn reconstruct(&self) -> DMatrix<f64> {
        self.spectral_map(|s| s)
    }
}

/// Eigendecomposition with the default backend and tolerances.
pub fn sym_eig(k: &DMatrix<f64>) -> Result<GramSpectrum> {
    sym_eig_with(k, EigenMethod::default(), &Tolerances::default())
}

pub fn sym_eig_with(
    k: &DMatrix<f64>,
    method: EigenMethod,
    tol: &Tolerances,
) -> Result<GramSpectrum> {
    let m = k.nrows();
    if m == 0 || k.ncols() != m {
        return Err(Error::arg(format!(
            "expected a non-empty square matrix, got {}x{}",
            k.nrows(),
            k.ncols()
        )));
    }
    if !k.iter().all(|v| v.is_finite()) {
        return Err(Error::arg("matrix contains non-finite values"));
    }
    let scale = k.amax().max(1.0);
    let mut asym = 0.0f64;
    for i in 0..m {
        for j in (i + 1)..m {
            asym = asym.max((k[(i, j)] - k[(j, i)]).abs());
        }
    }
    if asym > tol.symmetry * scale {
        return Err(Error::arg(format!(
            "matrix is not symmetric: max|K - K^T| = {asym:.3e}"
        )));
    }

    let (values, vectors) = match method {
        EigenMethod::Jacobi => jacobi_eigen(k, tol.jacobi_offdiag, tol.jacobi_max_sweeps)?,
        EigenMethod::Dense => dense_eigen(k)?,
    };
    GramSpectrum::from_eigenpairs(values, vectors, None, tol.zero_tol_scale)
}

fn dense_eigen(k: &DMatrix<f64>) -> Result<(DVector<f64>, DMatrix<f64>)> {
    let m = k.nrows();
    // symmetrize exactly so the lower-triangle read is faithful
    let fk = faer::Mat::<f64>::from_fn(m, m, |i, j| 0.5 * (k[(i, j)] + k[(j, i)]));
    let evd = fk
        .self_adjoint_eigen(faer::Side::Lower)
        .map_err(|e| Error::Numeric(format!("symmetric eigensolver failed: {e:?}")))?;
    let s = evd.S().column_vector();
    let u = evd.U();
    let values = DVector::from_fn(m, |i, _| s[i]);
    let vectors = DMatrix::from_fn(m, m, |i, j| u[(i, j)]);
    Ok((values, vectors))
}

/// Moore–Penrose pseudo-inverse `V diag(1/sigma_i or 0) V^T`.
pub fn pseudo_inverse(s: &GramSpectrum) -> DMatrix<f64> {
    s.spectral_map(|v| if v == 0.0 { 0.0 } else { 1.0 / v })
}

/// Positive decomposition `K = K_plus - K_minus` with both parts PSD.
pub fn positive_split(s: &GramSpectrum) -> (DMatrix<f64>, DMatrix<f64>) {
    let plus = s.spectral_map(|v| v.max(0.0));
    let minus = s.spectral_map(|v| (-v).max(0.0));
    (plus, minus)
}

/// One sample size in an eigenvalue-growth series.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DecayPoint {
    pub m: usize,
    pub sigma_max: f64,
    pub sigma_min: f64,
    /// `sigma_1 / sigma_p` at this size.
    pub cond_pos: f64,
    /// `sigma_m / sigma_{m-q+1}` at this size.
    pub cond_neg: f64,
}

impl DecayPoint {
    pub fn new(m: usize, sigma_max: f64, sigma_min: f64) -> DecayPoint {
        DecayPoint {
            m,
            sigma_max,
            sigma_min,
            cond_pos: 1.0,
            cond_neg: 1.0,
        }
    }

    pub fn from_spectrum(s: &GramSpectrum) -> DecayPoint {
        DecayPoint {
            m: s.dim(),
            sigma_max: s.sigma_max(),
            sigma_min: s.sigma_min(),
            cond_pos: s.positive_condition(),
            cond_neg: s.negative_condition(),
        }
    }
}

/// Power-law fits `sigma_1 ~ c1 m^eta1` and `sigma_m ~ cm m^eta2`.
///
/// `cond_pos` / `cond_neg` are the largest block condition numbers seen in the series.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EigenDecayFit {
    pub eta1: f64,
    pub eta2: f64,
    pub c1: f64,
    /// Negative.
    pub cm: f64,
    pub cond_pos: f64,
    pub cond_neg: f64,
    pub r2_pos: f64,
    pub r2_neg: f64,
}

impl EigenDecayFit {
    /// `min(eta1, eta2)`.
    pub fn eta(&self) -> f64 {
        self.eta1.min(self.eta2)
    }
}

pub fn fit_eigen_decay(series: &[DecayPoint]) -> Result<EigenDecayFit> {
    if series.len() < 3 {
        return Err(Error::arg(format!(
            "eigen-decay fit needs at least 3 sample sizes, got {}",
            series.len()
        )));
    }
    for p in series {
        if p.m == 0 {
            return Err(Error::arg("sample size must be positive"));
        }
        if !(p.sigma_max > 0.0) {
            return Err(Error::arg(format!(
                "largest eigenvalue must be positive (m = {}, sigma_1 = {})",
                p.m, p.sigma_max
            )));
        }
        if !(p.sigma_min < 0.0) {
            return Err(Error::arg(format!(
                "smallest eigenvalue must be negative (m = {}, sigma_m = {})",
                p.m, p.sigma_min
            )));
        }
    }
    let log_m: Vec<f64> = series.iter().map(|p| (p.m as f64).ln()).collect();
    let log_pos: Vec<f64> = series.iter().map(|p| p.sigma_max.ln()).collect();
    let log_neg: Vec<f64> = series.iter().map(|p| (-p.sigma_min).ln()).collect();
    let pos: LinearFit = linear_fit(&log_m, &log_pos)?;
    let neg: LinearFit = linear_fit(&log_m, &log_neg)?;
    Ok(EigenDecayFit {
        eta1: pos.slope,
        eta2: neg.slope,
        c1: pos.intercept.exp(),
        cm: -neg.intercept.exp(),
        cond_pos: series.iter().map(|p| p.cond_pos).fold(1.0, f64::max),
        cond_neg: series.iter().map(|p| p.cond_neg).fold(1.0, f64::max),
        r2_pos: pos.r2,
        r2_neg: neg.r2,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    fn diag(v: &[f64]) -> DMatrix<f64> {
        DMatrix::from_diagonal(&DVector::from_row_slice(v))
    }

    #[test]
    fn identity_spectrum() {
        let s = sym_eig(&DMatrix::identity(3, 3)).unwrap();
        assert_eq!(s.values.as_slice(), &[1.0, 1.0, 1.0]);
        assert_eq!((s.positive, s.negative), (3, 0));
    }

    #[test]
    fn diagonal_with_zero_and_negative() {
        for method in [EigenMethod::Dense, EigenMethod::Jacobi] {
            let s = sym_eig_with(&diag(&[2.0, 0.0, -1.0]), method, &Tolerances::default()).unwrap();
            assert_abs_diff_eq!(s.values[0], 2.0, epsilon = 1e-14);
            assert_eq!(s.values[1], 0.0);
            assert_abs_diff_eq!(s.values[2], -1.0, epsilon = 1e-14);
            assert_eq!((s.positive, s.negative, s.zeros()), (1, 1, 1));
        }
    }

    #[test]
    fn off_diagonal_pair() {
        let k = DMatrix::from_row_slice(2, 2, &[0.0, 1.0, 1.0, 0.0]);
        let s = sym_eig(&k).unwrap();
        assert_abs_diff_eq!(s.values[0], 1.0, epsilon = 1e-14);
        assert_abs_diff_eq!(s.values[1], -1.0, epsilon = 1e-14);
    }

    #[test]
    fn rejects_asymmetric_and_nonfinite() {
        let k = DMatrix::from_row_slice(2, 2, &[1.0, 0.5, 0.4, 1.0]);
        assert!(matches!(sym_eig(&k), Err(Error::Argument(_))));
        let k = DMatrix::from_row_slice(1, 1, &[f64::NAN]);
        assert!(sym_eig(&k).is_err());
    }

    #[test]
    fn pseudo_inverse_of_diagonal() {
        let s = sym_eig(&diag(&[2.0, 0.0, -1.0])).unwrap();
        let pinv = pseudo_inverse(&s);
        assert_abs_diff_eq!(pinv, diag(&[0.5, 0.0, -1.0]), epsilon = 1e-14);
    }

    #[test]
    fn pseudo_inverse_rank_one() {
        let k = DMatrix::from_element(2, 2, 1.0);
        let s = sym_eig(&k).unwrap();
        assert_eq!(s.zeros(), 1);
        let pinv = pseudo_inverse(&s);
        assert_abs_diff_eq!(pinv, DMatrix::from_element(2, 2, 0.25), epsilon = 1e-14);
        assert_abs_diff_eq!(&k * &pinv * &k, k, epsilon = 1e-14);
    }

    #[test]
    fn split_of_diagonal() {
        let s = sym_eig(&diag(&[2.0, -3.0])).unwrap();
        let (plus, minus) = positive_split(&s);
        assert_abs_diff_eq!(plus, diag(&[2.0, 0.0]), epsilon = 1e-14);
        assert_abs_diff_eq!(minus, diag(&[0.0, 3.0]), epsilon = 1e-14);
        let psd = sym_eig(&DMatrix::identity(4, 4)).unwrap();
        assert_eq!(positive_split(&psd).1, DMatrix::zeros(4, 4));
    }

    #[test]
    fn exact_power_law_fit() {
        let series: Vec<DecayPoint> = [100usize, 200, 400, 800]
            .iter()
            .map(|&m| {
                let mf = m as f64;
                DecayPoint::new(m, 2.0 * mf.powf(0.9), -0.5 * mf.powf(0.7))
            })
            .collect();
        let fit = fit_eigen_decay(&series).unwrap();
        assert_abs_diff_eq!(fit.eta1, 0.9, epsilon = 1e-10);
        assert_abs_diff_eq!(fit.eta2, 0.7, epsilon = 1e-10);
        assert_abs_diff_eq!(fit.c1, 2.0, epsilon = 1e-9);
        assert_abs_diff_eq!(fit.cm, -0.5, epsilon = 1e-9);
        assert_abs_diff_eq!(fit.r2_pos, 1.0, epsilon = 1e-12);
        assert_abs_diff_eq!(fit.r2_neg, 1.0, epsilon = 1e-12);
        assert_abs_diff_eq!(fit.eta(), 0.7, epsilon = 1e-10);
    }

    #[test]
    fn decay_fit_errors() {
        let two = [
            DecayPoint::new(10, 1.0, -1.0),
            DecayPoint::new(20, 2.0, -2.0),
        ];
        assert!(fit_eigen_decay(&two).is_err());
        let bad = [
            DecayPoint::new(10, 1.0, -1.0),
            DecayPoint::new(20, 2.0, 0.0),
            DecayPoint::new(40, 3.0, -2.0),
        ];
        assert!(fit_eigen_decay(&bad).is_err());
        let bad = [
            DecayPoint::new(10, 1.0, -1.0),
            DecayPoint::new(20, -2.0, -1.0),
            DecayPoint::new(40, 3.0, -2.0),
        ];
        assert!(fit_eigen_decay(&bad).is_err());
    }

    #[test]
    fn condition_numbers() {
        let s = sym_eig(&diag(&[4.0, 1.0, 0.0, -2.0, -6.0])).unwrap();
        assert_abs_diff_eq!(s.positive_condition(), 4.0, epsilon = 1e-12);
        assert_abs_diff_eq!(s.negative_condition(), 3.0, epsilon = 1e-12);
    }
}
