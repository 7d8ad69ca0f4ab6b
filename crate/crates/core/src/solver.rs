//! Globally optimal solutions of the sphere-constrained least-squares problems
//!
//! ```text
//! min_alpha (1/m)||K alpha - y||^2 + lambda * R(alpha)   s.t.  alpha^T K^2 alpha = m r^2
//! ```
//!
//! with the indefinite regularizer `R = alpha^T K alpha` ([`solve_rkks_sphere`])
//! or the covariance regularizer `R = (1/m) alpha^T K^2 alpha` ([`solve_t_reg_sphere`]).
//!
//! For the indefinite regularizer the stationary points are
//! `alpha = (1/m) (lambda I - mu K)^+ y`. Writing `z = V^T y`, the constraint
//! becomes the secular equation
//!
//! ```text
//! psi(mu) = sum_{sigma_i != 0} (sigma_i z_i)^2 / (lambda - mu sigma_i)^2 = m^3 r^2,
//! ```
//!
//! and the global minimizer is the unique root below the leftmost pole
//! `mu_pole = min_{sigma_i != 0} lambda / sigma_i`, where the Lagrangian
//! Hessian `K (lambda I - mu K)` is PSD. The root is found in the shifted
//! variable `t = mu_pole - mu > 0` so the pole term is evaluated without
//! cancellation.

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::config::Tolerances;
use crate::error::{Error, Result};
use crate::kernels::{cross_gram, KernelSpec};
use crate::spectral::{pseudo_inverse, sym_eig_with, EigenMethod, GramSpectrum};

/// Which regularizer a solution was computed for.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Regularizer {
    /// `lambda alpha^T K alpha` (indefinite).
    Rkks,
    /// `(lambda/m) alpha^T K^2 alpha` (nonnegative).
    T,
}

/// Inputs of the sphere-constrained problem expressed in the eigenbasis of `K`.
#[derive(Debug, Clone)]
pub struct SphereProblem<'a> {
    pub spectrum: &'a GramSpectrum,
    /// `V^T y`.
    pub z: DVector<f64>,
    pub y_norm: f64,
    pub lambda: f64,
    pub r: f64,
}

impl<'a> SphereProblem<'a> {
    pub fn new(spectrum: &'a GramSpectrum, y: &DVector<f64>, lambda: f64, r: f64) -> Result<Self> {
        if y.len() != spectrum.dim() {
            return Err(Error::arg(format!(
                "y has length {} but K is {}x{}",
                y.len(),
                spectrum.dim(),
                spectrum.dim()
            )));
        }
        if !y.iter().all(|v| v.is_finite()) {
            return Err(Error::arg("y contains non-finite values"));
        }
        if !(lambda.is_finite() && lambda > 0.0) {
            return Err(Error::arg(format!("lambda must be positive, got {lambda}")));
        }
        if !(r.is_finite() && r > 0.0) {
            return Err(Error::arg(format!("r must be positive, got {r}")));
        }
        Ok(SphereProblem {
            spectrum,
            z: spectrum.coordinates(y),
            y_norm: y.norm(),
            lambda,
            r,
        })
    }

    pub fn m(&self) -> usize {
        self.spectrum.dim()
    }

    /// `m^3 r^2`, the value `psi` must reach.
    pub fn target(&self) -> f64 {
        let m = self.m() as f64;
        m * m * m * self.r * self.r
    }

    /// `-||y|| / (m sqrt(m) r)`, the multiplier of the covariance-regularized problem.
    pub fn mu_tilde(&self) -> f64 {
        let m = self.m() as f64;
        -self.y_norm / (m * m.sqrt() * self.r)
    }

    /// Index of the eigenvalue defining the leftmost pole, if `K != 0`.
    fn pole_index(&self) -> Option<usize> {
        let s = self.spectrum;
        if s.negative > 0 {
            Some(s.dim() - s.negative)
        } else if s.positive > 0 {
            Some(0)
        } else {
            None
        }
    }

    /// `min_{sigma != 0} lambda / sigma`.
    pub fn mu_pole(&self) -> Option<f64> {
        self.pole_index()
            .map(|j| self.lambda / self.spectrum.values[j])
    }
}

/// `psi(mu)`. Errors when `mu` sits on a pole.
pub fn secular_value(problem: &SphereProblem<'_>, mu: f64) -> Result<f64> {
    secular_value_with(problem, mu, &Tolerances::default())
}

pub fn secular_value_with(problem: &SphereProblem<'_>, mu: f64, tol: &Tolerances) -> Result<f64> {
    if !mu.is_finite() {
        return Err(Error::arg("mu must be finite"));
    }
    let lambda = problem.lambda;
    let mut psi = 0.0;
    for (&sigma, &z) in problem.spectrum.values.iter().zip(problem.z.iter()) {
        if sigma == 0.0 {
            continue;
        }
        let pole = lambda / sigma;
        if (mu - pole).abs() <= tol.pole_rel * pole.abs() {
            return Err(Error::arg(format!(
                "mu = {mu:e} coincides with the pole lambda/sigma = {pole:e}"
            )));
        }
        let denom = lambda - mu * sigma;
        psi += (sigma * z).powi(2) / (denom * denom);
    }
    Ok(psi)
}

/// Solution of either sphere-constrained problem.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SphereSolution {
    #[serde(with = "crate::io::dvector_serde")]
    pub alpha: DVector<f64>,
    /// Lagrangian eigenvalue (`mu` or `mu_tilde`).
    pub mu: f64,
    pub objective: f64,
    /// `(alpha^T K^2 alpha - m r^2) / (m r^2)`.
    pub constraint_residual: f64,
    /// `alpha^T K alpha`; can be negative.
    pub krein_reg: f64,
    /// `(1/m) alpha^T K^2 alpha`.
    pub t_reg: f64,
    pub on_boundary: bool,
    /// Whether the unconstrained objective is convex (`(1/m)K^2 + lambda K` PSD).
    pub convex_flag: bool,
    pub regularizer: Regularizer,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub warning: Option<String>,
}

/// Eigen-coordinates `w = V^T alpha` plus the summary numbers computed from them.
fn assemble(
    problem: &SphereProblem<'_>,
    coords: DVector<f64>,
    mu: f64,
    regularizer: Regularizer,
    tol: &Tolerances,
) -> SphereSolution {
    let s = problem.spectrum;
    let m = problem.m() as f64;
    let lambda = problem.lambda;
    let mut misfit = 0.0;
    let mut krein = 0.0;
    let mut k2 = 0.0;
    for ((&sigma, &w), &z) in s.values.iter().zip(coords.iter()).zip(problem.z.iter()) {
        misfit += (sigma * w - z).powi(2);
        krein += sigma * w * w;
        k2 += (sigma * w).powi(2);
    }
    let t_reg = k2 / m;
    let objective = match regularizer {
        Regularizer::Rkks => misfit / m + lambda * krein,
        Regularizer::T => misfit / m + lambda * t_reg,
    };
    let target = m * problem.r * problem.r;
    let constraint_residual = (k2 - target) / target;
    let convex_flag = match regularizer {
        Regularizer::Rkks => s.values.iter().all(|&v| v * (v / m + lambda) >= 0.0),
        Regularizer::T => true,
    };
    SphereSolution {
        alpha: s.from_coordinates(&coords),
        mu,
        objective,
        constraint_residual,
        krein_reg: krein,
        t_reg,
        on_boundary: constraint_residual.abs() <= tol.boundary_rel,
        convex_flag,
        regularizer,
        warning: None,
    }
}

/// Solves the indefinite-regularized problem for a Gram matrix.
pub fn solve_rkks_sphere(
    k: &DMatrix<f64>,
    y: &DVector<f64>,
    lambda: f64,
    r: f64,
) -> Result<SphereSolution> {
    let tol = Tolerances::default();
    let spectrum = sym_eig_with(k, EigenMethod::default(), &tol)?;
    solve_rkks_with(&spectrum, y, lambda, r, &tol)
}

/// Solves the indefinite-regularized problem given a precomputed spectrum.
pub fn solve_rkks_with(
    spectrum: &GramSpectrum,
    y: &DVector<f64>,
    lambda: f64,
    r: f64,
    tol: &Tolerances,
) -> Result<SphereSolution> {
    let problem = SphereProblem::new(spectrum, y, lambda, r)?;
    let root = secular_root(&problem, tol)?;
    let m = problem.m() as f64;
    let s = problem.spectrum;
    let coords = DVector::from_fn(s.dim(), |i, _| {
        let sigma = s.values[i];
        let z = problem.z[i];
        if sigma == 0.0 {
            // pseudo-inverse of (lambda I - mu K) acts as 1/lambda on ker K
            z / (m * lambda)
        } else {
            z / (m * root.denom(i, sigma))
        }
    });
    let mut sol = assemble(&problem, coords, root.mu, Regularizer::Rkks, tol);
    if let Some(w) = root.warning {
        sol.warning = Some(w);
    }
    Ok(sol)
}

/// Root of the secular equation, kept in the shifted variable.
struct SecularRoot {
    mu: f64,
    t: f64,
    /// `lambda - mu_pole sigma_i`, exactly zero on the pole group.
    offsets: Vec<f64>,
    warning: Option<String>,
}

impl SecularRoot {
    /// `lambda - mu sigma_i` evaluated as `offset_i + t sigma_i`.
    fn denom(&self, i: usize, sigma: f64) -> f64 {
        self.offsets[i] + self.t * sigma
    }
}

/// Evaluates `psi` and `d psi / d t` at shift `t`.
fn psi_shifted(values: &DVector<f64>, weights: &[f64], offsets: &[f64], t: f64) -> (f64, f64) {
    let mut psi = 0.0;
    let mut dpsi = 0.0;
    for ((&sigma, &w), &d) in values.iter().zip(weights).zip(offsets) {
        if sigma == 0.0 || w == 0.0 {
            continue;
        }
        let den = d + t * sigma;
        let inv = 1.0 / den;
        let term = w * inv * inv;
        psi += term;
        dpsi -= 2.0 * term * sigma * inv;
    }
    (psi, dpsi)
}

fn secular_root(problem: &SphereProblem<'_>, tol: &Tolerances) -> Result<SecularRoot> {
    let s = problem.spectrum;
    let lambda = problem.lambda;
    let Some(j) = problem.pole_index() else {
        return Err(Error::DegenerateData("K has no nonzero eigenvalue".into()));
    };
    let sigma_pole = s.values[j];
    let mu_pole = lambda / sigma_pole;
    let weights: Vec<f64> = s
        .values
        .iter()
        .zip(problem.z.iter())
        .map(|(&sigma, &z)| {
            if sigma == 0.0 {
                0.0
            } else {
                (sigma * z).powi(2)
            }
        })
        .collect();
    let total: f64 = weights.iter().sum();
    if total.sqrt() <= f64::EPSILON * s.values.amax() * problem.y_norm || total == 0.0 {
        return Err(Error::DegenerateData(
            "y is orthogonal to every eigenvector with nonzero eigenvalue".into(),
        ));
    }
    let offsets: Vec<f64> = s
        .values
        .iter()
        .map(|&sigma| {
            if sigma == sigma_pole {
                0.0
            } else {
                lambda - mu_pole * sigma
            }
        })
        .collect();
    let target = problem.target();

    let pole_weight: f64 = s
        .values
        .iter()
        .zip(&weights)
        .filter(|(&sigma, _)| sigma == sigma_pole)
        .map(|(_, &w)| w)
        .sum();
    let mut t_lo = 0.0;
    if pole_weight.sqrt() <= tol.hard_case_rel * total.sqrt() {
        let trimmed: Vec<f64> = s
            .values
            .iter()
            .zip(&weights)
            .map(|(&sigma, &w)| if sigma == sigma_pole { 0.0 } else { w })
            .collect();
        let (sup_psi, _) = psi_shifted(&s.values, &trimmed, &offsets, 0.0);
        if sup_psi <= target {
            return Err(Error::HardCase {
                mu_pole,
                sup_psi,
                target,
            });
        }
    }

    // Upper end of the bracket: start from the perturbation estimate
    // mu_tilde - mu_tilde^2 and double until psi drops below the target.
    let mu_tilde = problem.mu_tilde();
    let safety = mu_pole.abs().max(mu_tilde.abs()).max(f64::MIN_POSITIVE);
    let mu_lo = (mu_tilde - mu_tilde * mu_tilde).min(mu_pole) - safety;
    let mut t_hi = mu_pole - mu_lo;
    let mut expansions = 0;
    loop {
        let (psi, _) = psi_shifted(&s.values, &weights, &offsets, t_hi);
        if psi < target {
            break;
        }
        t_hi *= 2.0;
        expansions += 1;
        if expansions > 2000 || !t_hi.is_finite() {
            return Err(Error::Numeric(
                "could not bracket the secular root from below".into(),
            ));
        }
    }

    // Safeguarded Newton on h(t) = psi(t)^(-1/2) - target^(-1/2), which is
    // close to affine near the pole.
    let inv_sqrt_target = 1.0 / target.sqrt();
    let mut t = t_hi;
    let mut warning = None;
    let mut iter = 0;
    loop {
        let (psi, dpsi) = psi_shifted(&s.values, &weights, &offsets, t);
        let resid = (psi - target) / target;
        if resid.abs() <= tol.secular_rel {
            break;
        }
        if psi > target {
            t_lo = t;
        } else {
            t_hi = t;
        }
        let width = t_hi - t_lo;
        if width <= 4.0 * f64::EPSILON * t_hi {
            break;
        }
        if iter == tol.secular_max_iter {
            if resid.abs() <= tol.boundary_rel {
                warning = Some(format!(
                    "secular iteration cap reached with relative residual {resid:.3e}"
                ));
                break;
            }
            return Err(Error::Numeric(format!(
                "secular iteration did not converge in {} iterations: relative residual {resid:.3e}",
                tol.secular_max_iter
            )));
        }
        iter += 1;

        let h = psi.powf(-0.5) - inv_sqrt_target;
        let dh = -0.5 * psi.powf(-1.5) * dpsi;
        let newton = t - h / dh;
        let next = if newton.is_finite() && newton > t_lo && newton < t_hi {
            newton
        } else if t_lo > 0.0 && t_hi / t_lo > 4.0 {
            (t_lo * t_hi).sqrt()
        } else {
            0.5 * (t_lo + t_hi)
        };
        let step = (next - t).abs();
        t = next;
        let mu = mu_pole - t;
        if step <= tol.secular_step * mu.abs().max(1.0) * f64::EPSILON {
            break;
        }
    }
    Ok(SecularRoot {
        mu: mu_pole - t,
        t,
        offsets,
        warning,
    })
}

/// Solves the covariance-regularized problem for a Gram matrix.
pub fn solve_t_reg_sphere(
    k: &DMatrix<f64>,
    y: &DVector<f64>,
    lambda: f64,
    r: f64,
) -> Result<SphereSolution> {
    let tol = Tolerances::default();
    let spectrum = sym_eig_with(k, EigenMethod::default(), &tol)?;
    solve_t_reg_with(&spectrum, y, lambda, r, &tol)
}

/// `mu_tilde = -||y|| / (m sqrt(m) r)` and `alpha = -(1/(m mu_tilde)) K^+ y`.
///
/// When `y` has a component outside the range of `K` the closed form does
/// not reach the sphere; the solution is returned with `on_boundary = false`
/// and a warning.
pub fn solve_t_reg_with(
    spectrum: &GramSpectrum,
    y: &DVector<f64>,
    lambda: f64,
    r: f64,
    tol: &Tolerances,
) -> Result<SphereSolution> {
    let problem = SphereProblem::new(spectrum, y, lambda, r)?;
    if problem.y_norm == 0.0 {
        return Err(Error::DegenerateData("y is identically zero".into()));
    }
    let m = problem.m() as f64;
    let mu_tilde = problem.mu_tilde();
    let coords = DVector::from_fn(spectrum.dim(), |i, _| {
        let sigma = spectrum.values[i];
        if sigma == 0.0 {
            0.0
        } else {
            -problem.z[i] / (m * mu_tilde * sigma)
        }
    });
    let mut sol = assemble(&problem, coords, mu_tilde, Regularizer::T, tol);
    if !sol.on_boundary {
        let msg = format!(
            "y has a component outside range(K); constraint residual {:.3e}",
            sol.constraint_residual
        );
        log::warn!("{msg}");
        sol.warning = Some(msg);
    }
    Ok(sol)
}

/// Dispatches on the regularizer.
pub fn solve_with(
    regularizer: Regularizer,
    spectrum: &GramSpectrum,
    y: &DVector<f64>,
    lambda: f64,
    r: f64,
    tol: &Tolerances,
) -> Result<SphereSolution> {
    match regularizer {
        Regularizer::Rkks => solve_rkks_with(spectrum, y, lambda, r, tol),
        Regularizer::T => solve_t_reg_with(spectrum, y, lambda, r, tol),
    }
}

/// The `2m x 2m` matrix `[[lambda K^+, -I], [-y y^T / (m^3 r^2), lambda K^+]]`
/// whose smallest real eigenvalue is the multiplier `mu`.
pub fn build_g(s: &GramSpectrum, y: &DVector<f64>, lambda: f64, r: f64) -> Result<DMatrix<f64>> {
    let m = s.dim();
    if y.len() != m {
        return Err(Error::arg("y length does not match the spectrum"));
    }
    let lk = pseudo_inverse(s) * lambda;
    let mf = m as f64;
    let outer = (y * y.transpose()) / (mf * mf * mf * r * r);
    let mut g = DMatrix::zeros(2 * m, 2 * m);
    g.view_mut((0, 0), (m, m)).copy_from(&lk);
    g.view_mut((m, m), (m, m)).copy_from(&lk);
    g.view_mut((0, m), (m, m)).fill_with_identity();
    g.view_mut((0, m), (m, m)).neg_mut();
    g.view_mut((m, 0), (m, m)).copy_from(&(-outer));
    Ok(g)
}

/// The `lambda`-free variant `[[0, -I], [-y y^T / (m^3 r^2), 0]]`.
pub fn build_g_tilde(y: &DVector<f64>, r: f64) -> DMatrix<f64> {
    let m = y.len();
    let mf = m as f64;
    let outer = (y * y.transpose()) / (mf * mf * mf * r * r);
    let mut g = DMatrix::zeros(2 * m, 2 * m);
    g.view_mut((0, m), (m, m)).fill_with_identity();
    g.view_mut((0, m), (m, m)).neg_mut();
    g.view_mut((m, 0), (m, m)).copy_from(&(-outer));
    g
}

/// Unit vector `v` with `G v = mu v` when `mu` solves the secular equation
/// (full-rank `K`): `a = V diag(sigma^2 z / (lambda - mu sigma)^2)`,
/// `b = (lambda K^+ - mu I) a`.
pub fn g_eigenvector(s: &GramSpectrum, y: &DVector<f64>, lambda: f64, mu: f64) -> DVector<f64> {
    let m = s.dim();
    let z = s.coordinates(y);
    let a_coords = DVector::from_fn(m, |i, _| {
        let sigma = s.values[i];
        if sigma == 0.0 {
            z[i] / (mu * mu)
        } else {
            (sigma * sigma * z[i]) / (lambda - mu * sigma).powi(2)
        }
    });
    let b_coords = DVector::from_fn(m, |i, _| {
        let sigma = s.values[i];
        let shift = if sigma == 0.0 { 0.0 } else { lambda / sigma };
        (shift - mu) * a_coords[i]
    });
    let mut v = DVector::zeros(2 * m);
    v.rows_mut(0, m).copy_from(&s.from_coordinates(&a_coords));
    v.rows_mut(m, m).copy_from(&s.from_coordinates(&b_coords));
    let n = v.norm();
    v / n
}

/// `f(x) = sum_i alpha_i k(x_i, x)` for every row of `x_new`.
pub fn predict(
    alpha: &DVector<f64>,
    spec: &KernelSpec,
    x_train: &DMatrix<f64>,
    x_new: &DMatrix<f64>,
) -> Result<DVector<f64>> {
    if alpha.len() != x_train.nrows() {
        return Err(Error::arg(format!(
            "alpha has length {} but there are {} training points",
            alpha.len(),
            x_train.nrows()
        )));
    }
    if x_new.nrows() == 0 {
        return Ok(DVector::zeros(0));
    }
    let c = cross_gram(spec, x_new, x_train)?;
    Ok(c * alpha)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::spectral::sym_eig;
    use approx::assert_abs_diff_eq;

    fn diag(v: &[f64]) -> DMatrix<f64> {
        DMatrix::from_diagonal(&DVector::from_row_slice(v))
    }

    #[test]
    fn secular_at_identity() {
        let s = sym_eig(&DMatrix::identity(3, 3)).unwrap();
        let y = DVector::from_vec(vec![1.0, -2.0, 0.5]);
        let p = SphereProblem::new(&s, &y, 0.3, 1.0).unwrap();
        assert_abs_diff_eq!(
            secular_value(&p, 0.0).unwrap(),
            y.norm_squared() / 0.09,
            epsilon = 1e-10
        );
        let zero = DVector::zeros(3);
        let p0 = SphereProblem::new(&s, &zero, 0.3, 1.0).unwrap();
        assert_eq!(secular_value(&p0, -5.0).unwrap(), 0.0);
    }

    #[test]
    fn secular_two_term_value() {
        // eigenvector basis is the identity, so z = y
        let s = sym_eig(&diag(&[1.0, -1.0])).unwrap();
        let y = DVector::from_vec(vec![1.0, 1.0]);
        let p = SphereProblem::new(&s, &y, 0.1, 1.0).unwrap();
        let expected = 1.0 / (1.1f64 * 1.1) + 1.0 / (0.9f64 * 0.9);
        assert_abs_diff_eq!(secular_value(&p, -1.0).unwrap(), expected, epsilon = 1e-12);
        assert_abs_diff_eq!(expected, 2.0610, epsilon = 1e-4);
    }

    #[test]
    fn secular_rejects_poles() {
        let s = sym_eig(&diag(&[2.0, -1.0])).unwrap();
        let y = DVector::from_vec(vec![1.0, 1.0]);
        let p = SphereProblem::new(&s, &y, 0.5, 1.0).unwrap();
        assert!(secular_value(&p, 0.25).is_err());
        assert!(secular_value(&p, -0.5).is_err());
        assert!(secular_value(&p, 0.0).is_ok());
    }

    #[test]
    fn identity_closed_form() {
        let m = 4usize;
        let y = DVector::from_vec(vec![0.3, -1.0, 2.0, 0.7]);
        let (lambda, r) = (0.2, 1.5);
        let sol = solve_rkks_sphere(&DMatrix::identity(m, m), &y, lambda, r).unwrap();
        let mf = m as f64;
        let mu = lambda - y.norm() / (mf.powf(1.5) * r);
        assert_abs_diff_eq!(sol.mu, mu, epsilon = 1e-12);
        let alpha = &y * (mf.sqrt() * r / y.norm());
        assert_abs_diff_eq!(sol.alpha, alpha, epsilon = 1e-12);
        assert!(sol.on_boundary);
        assert_abs_diff_eq!(sol.t_reg, r * r, epsilon = 1e-10);
    }

    #[test]
    fn t_reg_scalar_example() {
        let k = DMatrix::from_element(1, 1, 2.0);
        let y = DVector::from_element(1, 3.0);
        let sol = solve_t_reg_sphere(&k, &y, 0.1, 1.0).unwrap();
        assert_abs_diff_eq!(sol.mu, -3.0, epsilon = 1e-14);
        assert_abs_diff_eq!(sol.alpha[0], 0.5, epsilon = 1e-14);
        assert_abs_diff_eq!(sol.constraint_residual, 0.0, epsilon = 1e-14);
        assert!(sol.on_boundary);
    }

    #[test]
    fn t_reg_identity_example() {
        let y = DVector::from_element(4, 1.0);
        let sol = solve_t_reg_sphere(&DMatrix::identity(4, 4), &y, 0.1, 1.0).unwrap();
        assert_abs_diff_eq!(sol.mu, -0.25, epsilon = 1e-15);
        assert_abs_diff_eq!(sol.alpha, y, epsilon = 1e-14);
    }

    #[test]
    fn t_reg_rank_deficient_warns() {
        let k = diag(&[1.0, 0.0]);
        let y = DVector::from_vec(vec![1.0, 1.0]);
        let sol = solve_t_reg_sphere(&k, &y, 0.1, 1.0).unwrap();
        assert!(!sol.on_boundary);
        assert!(sol.warning.is_some());
    }

    #[test]
    fn zero_y_is_degenerate() {
        let y = DVector::zeros(3);
        let k = DMatrix::identity(3, 3);
        assert!(matches!(
            solve_t_reg_sphere(&k, &y, 0.1, 1.0),
            Err(Error::DegenerateData(_))
        ));
        assert!(matches!(
            solve_rkks_sphere(&k, &y, 0.1, 1.0),
            Err(Error::DegenerateData(_))
        ));
    }

    #[test]
    fn hard_case_is_reported() {
        // pole sits at the negative eigenvalue, which y does not excite, and
        // the remaining weight is too small to reach the sphere
        let k = diag(&[1.0, -1.0]);
        let y = DVector::from_vec(vec![1e-3, 0.0]);
        match solve_rkks_sphere(&k, &y, 0.1, 1.0) {
            Err(Error::HardCase {
                mu_pole,
                sup_psi,
                target,
            }) => {
                assert_abs_diff_eq!(mu_pole, -0.1, epsilon = 1e-15);
                assert!(sup_psi < target);
            }
            other => panic!("expected hard case, got {other:?}"),
        }
        // a large enough off-pole weight still has a root
        let y = DVector::from_vec(vec![10.0, 0.0]);
        let sol = solve_rkks_sphere(&k, &y, 0.1, 1.0).unwrap();
        assert!(sol.on_boundary);
        assert!(sol.mu < -0.1);
    }

    #[test]
    fn g_matrix_scalar_blocks() {
        let s = sym_eig(&DMatrix::identity(1, 1)).unwrap();
        let g = build_g(&s, &DVector::from_element(1, 1.0), 1.0, 1.0).unwrap();
        assert_eq!(g, DMatrix::from_row_slice(2, 2, &[1.0, -1.0, -1.0, 1.0]));
    }

    #[test]
    fn g_tilde_square_is_block_diagonal() {
        let y = DVector::from_vec(vec![1.0, 2.0, -1.0]);
        let r = 0.7;
        let g = build_g_tilde(&y, r);
        let g2 = &g * &g;
        let scale = 27.0 * r * r;
        let outer = (&y * y.transpose()) / scale;
        assert_abs_diff_eq!(
            g2.view((0, 0), (3, 3)).clone_owned(),
            outer,
            epsilon = 1e-15
        );
        assert_abs_diff_eq!(
            g2.view((3, 3), (3, 3)).clone_owned(),
            outer,
            epsilon = 1e-15
        );
        let mut v = DVector::zeros(6);
        v.rows_mut(0, 3).copy_from(&y);
        assert_abs_diff_eq!(&g2 * &v, &v * (y.norm_squared() / scale), epsilon = 1e-14);
    }

    #[test]
    fn predict_shapes_and_values() {
        let x = DMatrix::from_row_slice(2, 2, &[0.0, 0.0, 1.0, 1.0]);
        let zero = DVector::zeros(2);
        assert_eq!(
            predict(&zero, &KernelSpec::LOG, &x, &x).unwrap(),
            DVector::zeros(2)
        );
        let one = DMatrix::from_row_slice(1, 2, &[0.0, 0.0]);
        let alpha = DVector::from_element(1, 2.0);
        let f = predict(&alpha, &KernelSpec::LOG, &one, &x).unwrap();
        assert_abs_diff_eq!(f[0], 0.0);
        assert_abs_diff_eq!(f[1], -2.0 * (1.0 + 2f64.sqrt()).ln(), epsilon = 1e-14);
        assert!(predict(&DVector::zeros(3), &KernelSpec::LOG, &x, &x).is_err());
    }
}
