//! Sphere-constrained regularized least squares with indefinite kernels.
//!
//! The main entry points are [`solver::solve_rkks_sphere`], which returns the
//! global minimizer of
//! `(1/m)||K alpha - y||^2 + lambda alpha^T K alpha` on the sphere
//! `alpha^T K^2 alpha = m r^2` for any symmetric (possibly indefinite) Gram
//! matrix, and [`solver::solve_t_reg_sphere`] for the covariance regularizer
//! `(lambda/m) alpha^T K^2 alpha`.
//!
//! ```
//! use krein_ridge::{gram, solve_rkks_sphere, KernelSpec};
//! use nalgebra::{DMatrix, DVector};
//!
//! let x = DMatrix::from_row_slice(3, 1, &[0.0, 0.5, 2.0]);
//! let y = DVector::from_vec(vec![1.0, 0.2, -0.4]);
//! let k = gram(&KernelSpec::LOG, &x).unwrap();
//! let sol = solve_rkks_sphere(&k, &y, 0.1, 1.0).unwrap();
//! assert!(sol.on_boundary);
//! ```

// `!(x > 0.0)` is used on purpose so that NaN takes the error path.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod config;
pub mod error;
pub mod experiments;
pub mod io;
pub mod kernels;
pub mod plot;
pub mod rng;
pub mod solver;
pub mod spectral;
pub mod stats;
pub mod theory;

pub use config::Tolerances;
pub use error::{Error, Result};
pub use kernels::{cross_gram, gram, kernel_eval, Dataset, KernelSpec};
pub use solver::{
    build_g, build_g_tilde, predict, secular_value, solve_rkks_sphere, solve_rkks_with,
    solve_t_reg_sphere, solve_t_reg_with, Regularizer, SphereProblem, SphereSolution,
};
pub use spectral::{
    fit_eigen_decay, positive_split, pseudo_inverse, sym_eig, EigenDecayFit, EigenMethod,
    GramSpectrum,
};
pub use theory::{
    henrici_certificate, hypothesis_error, theta_rate, theta_rkhs, RateParams, ThetaResult,
};
