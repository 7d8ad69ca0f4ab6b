//! Numerical tolerances shared by the spectral routines and the solvers.

use serde::{Deserialize, Serialize};

/// Every tolerance the library uses, in one place.
///
/// The CLI exposes overrides for these and echoes the resolved values in
/// `config-echo.json`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct Tolerances {
    /// Allowed asymmetry `max|K - K^T|`, relative to `max(1, max|K|)`.
    pub symmetry: f64,
    /// Jacobi stops once the off-diagonal Frobenius norm falls below
    /// `jacobi_offdiag * ||K||_F`.
    pub jacobi_offdiag: f64,
    pub jacobi_max_sweeps: usize,
    /// Multiplier on `m * eps * max|sigma|` for the zero-eigenvalue cutoff.
    pub zero_tol_scale: f64,
    /// Secular root finder stops when `|psi - target| <= secular_rel * target`.
    pub secular_rel: f64,
    /// Step tolerance on the multiplier, relative to `max(1, |mu|)`.
    pub secular_step: f64,
    pub secular_max_iter: usize,
    /// `mu` closer than this (relative) to a pole is rejected by `secular_value`.
    pub pole_rel: f64,
    /// A pole weight `|sigma_j z_j|` below `hard_case_rel * ||sigma z||` counts as zero.
    pub hard_case_rel: f64,
    /// Relative constraint residual below which a solution is reported on the sphere.
    pub boundary_rel: f64,
}

impl Default for Tolerances {
    fn default() -> Self {
        Tolerances {
            symmetry: 1e-10,
            jacobi_offdiag: 1e-12,
            jacobi_max_sweeps: 100,
            zero_tol_scale: 1.0,
            secular_rel: 1e-13,
            secular_step: 1e-12,
            secular_max_iter: 200,
            pole_rel: 1e-14,
            hard_case_rel: 1e-14,
            boundary_rel: 1e-6,
        }
    }
}
