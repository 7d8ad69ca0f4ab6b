//! Computable pieces of the convergence analysis: clipping, the two
//! regularizer inner products, the hypothesis-error decomposition, the
//! Henrici certificate for the multiplier, and the learning-rate exponents.

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::config::Tolerances;
use crate::error::{Error, Result};
use crate::solver::{solve_rkks_with, solve_t_reg_with, SphereProblem, SphereSolution};
use crate::spectral::{sym_eig_with, EigenDecayFit, EigenMethod, GramSpectrum};

/// Elementwise clip to `[-b, b]`.
pub fn project(values: &DVector<f64>, b: f64) -> Result<DVector<f64>> {
    if !(b > 0.0) {
        return Err(Error::arg(format!("clip level must be positive, got {b}")));
    }
    Ok(values.map(|v| v.clamp(-b, b)))
}

/// Clip level and target bound used for risk estimation.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ProjectionBound {
    pub b: f64,
    pub m_star: f64,
}

impl ProjectionBound {
    pub fn new(b: f64, m_star: f64) -> Result<Self> {
        if !(m_star >= 1.0) {
            return Err(Error::arg(format!("M* must be at least 1, got {m_star}")));
        }
        if b < m_star {
            return Err(Error::arg(format!("clip level {b} is below M* = {m_star}")));
        }
        Ok(ProjectionBound { b, m_star })
    }
}

fn check_shapes(alpha: &DVector<f64>, k: &DMatrix<f64>) -> Result<()> {
    if !k.is_square() || k.nrows() != alpha.len() {
        return Err(Error::arg(format!(
            "alpha has length {} but K is {}x{}",
            alpha.len(),
            k.nrows(),
            k.ncols()
        )));
    }
    Ok(())
}

/// `alpha^T K alpha`; negative values are possible for indefinite `K`.
pub fn krein_inner(alpha: &DVector<f64>, k: &DMatrix<f64>) -> Result<f64> {
    check_shapes(alpha, k)?;
    Ok(alpha.dot(&(k * alpha)))
}

/// `(1/m) ||K alpha||^2`.
pub fn t_inner(alpha: &DVector<f64>, k: &DMatrix<f64>) -> Result<f64> {
    check_shapes(alpha, k)?;
    if alpha.is_empty() {
        return Ok(0.0);
    }
    Ok((k * alpha).norm_squared() / alpha.len() as f64)
}

/// Outcome of the perturbation check for `mu`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct HenriciCertificate {
    /// `varsigma + sqrt(varsigma)` with `varsigma = ||y||^2 / (m^3 r^2)`.
    pub bound: f64,
    /// Distance from `mu` to the nearest eigenvalue of the unperturbed block matrix.
    pub gap: f64,
    pub passed: bool,
}

/// Compares `mu` with the eigenvalues `{lambda/sigma_i}` (plus `0` when `K`
/// is singular) of the block-triangular part of `G`.
pub fn henrici_certificate(
    s: &GramSpectrum,
    y: &DVector<f64>,
    lambda: f64,
    r: f64,
    mu: f64,
) -> HenriciCertificate {
    let m = s.dim() as f64;
    let varsigma = y.norm_squared() / (m * m * m * r * r);
    let bound = varsigma + varsigma.sqrt();
    let mut gap = if s.is_full_rank() {
        f64::INFINITY
    } else {
        mu.abs()
    };
    for &sigma in s.values.iter().filter(|&&v| v != 0.0) {
        gap = gap.min((mu - lambda / sigma).abs());
    }
    HenriciCertificate {
        bound,
        gap,
        passed: gap <= bound,
    }
}

/// Closed-form and direct hypothesis-error values for one instance.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HypothesisErrorReport {
    pub m: usize,
    pub lambda: f64,
    pub r: f64,
    #[serde(rename = "P")]
    pub p: f64,
    #[serde(rename = "P1")]
    pub p1: f64,
    #[serde(rename = "P2")]
    pub p2: f64,
    /// Objective difference recomputed from the two coefficient vectors.
    pub direct_diff: f64,
    pub mu: f64,
    pub mu_tilde: f64,
    pub henrici_bound: f64,
    pub henrici_gap: f64,
    /// Right-hand side of the hypothesis-error bound, when decay constants were supplied.
    #[serde(default)]
    pub bound_rhs: Option<f64>,
}

impl HypothesisErrorReport {
    pub const CSV_HEADER: [&'static str; 11] = [
        "m",
        "lambda",
        "r",
        "P",
        "P1",
        "P2",
        "mu",
        "mu_tilde",
        "henrici_bound",
        "henrici_gap",
        "bound_rhs",
    ];

    pub fn henrici_passed(&self) -> bool {
        self.henrici_gap <= self.henrici_bound
    }

    pub fn csv_row(&self) -> Vec<String> {
        let f = |v: f64| format!("{v:.16e}");
        vec![
            self.m.to_string(),
            f(self.lambda),
            f(self.r),
            f(self.p),
            f(self.p1),
            f(self.p2),
            f(self.mu),
            f(self.mu_tilde),
            f(self.henrici_bound),
            f(self.henrici_gap),
            self.bound_rhs.map(f).unwrap_or_default(),
        ]
    }
}

/// Both solutions plus the report.
#[derive(Debug, Clone)]
pub struct HypothesisError {
    pub report: HypothesisErrorReport,
    pub rkks: SphereSolution,
    pub t_reg: SphereSolution,
}

/// Hypothesis error for a Gram matrix.
pub fn hypothesis_error(
    k: &DMatrix<f64>,
    y: &DVector<f64>,
    lambda: f64,
    r: f64,
) -> Result<HypothesisErrorReport> {
    let tol = Tolerances::default();
    let s = sym_eig_with(k, EigenMethod::default(), &tol)?;
    Ok(hypothesis_error_with(&s, Some(k), y, lambda, r, &tol)?.report)
}

/// Hypothesis error from a spectrum. The direct difference uses explicit
/// products with `k` (reconstructed from the spectrum when `None`).
pub fn hypothesis_error_with(
    s: &GramSpectrum,
    k: Option<&DMatrix<f64>>,
    y: &DVector<f64>,
    lambda: f64,
    r: f64,
    tol: &Tolerances,
) -> Result<HypothesisError> {
    let rkks = solve_rkks_with(s, y, lambda, r, tol)?;
    let t_reg = solve_t_reg_with(s, y, lambda, r, tol)?;
    let problem = SphereProblem::new(s, y, lambda, r)?;
    let m = s.dim();
    let mf = m as f64;
    let mu = rkks.mu;
    let mu_tilde = problem.mu_tilde();

    let mut range_sq = 0.0;
    let mut p2 = 0.0;
    for (&sigma, &z) in s.values.iter().zip(problem.z.iter()) {
        if sigma == 0.0 {
            continue;
        }
        range_sq += z * z;
        p2 += sigma * z * z / (lambda - mu * sigma);
    }
    let p1 = -2.0 * range_sq / (mf * mf * mu_tilde);
    let p2 = -2.0 * p2 / (mf * mf);

    let owned;
    let k = match k {
        Some(k) => k,
        None => {
            owned = s.reconstruct();
            &owned
        }
    };
    let objective = |alpha: &DVector<f64>| {
        let ka = k * alpha;
        (&ka - y).norm_squared() / mf + lambda * ka.norm_squared() / mf
    };
    let direct_diff = objective(&rkks.alpha) - objective(&t_reg.alpha);

    let cert = henrici_certificate(s, y, lambda, r, mu);
    Ok(HypothesisError {
        report: HypothesisErrorReport {
            m,
            lambda,
            r,
            p: p1 + p2,
            p1,
            p2,
            direct_diff,
            mu,
            mu_tilde,
            henrici_bound: cert.bound,
            henrici_gap: cert.gap,
            bound_rhs: None,
        },
        rkks,
        t_reg,
    })
}

/// Constants entering the hypothesis-error bound `P <= C m^(-Theta_1)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct HypothesisBound {
    pub constant: f64,
    pub theta1: f64,
    pub rhs: f64,
}

/// `C = 2Mr + 2M^2(-c_m/C_2 + M^2/r^2 + C_1/c_1)` and `Theta_1 = min{1, gamma+eta-1}`.
///
/// `output_bound` is `M`; the decay fit provides `c_1, c_m, eta` and the
/// condition numbers `C_1, C_2`.
pub fn hypothesis_bound(
    fit: &EigenDecayFit,
    output_bound: f64,
    r: f64,
    gamma: f64,
    m: usize,
) -> Result<HypothesisBound> {
    if !(output_bound >= 0.0 && r > 0.0) {
        return Err(Error::arg(
            "output bound must be nonnegative and r positive",
        ));
    }
    let eta = fit.eta();
    if gamma + eta <= 1.0 {
        return Err(Error::arg(format!(
            "the hypothesis-error bound needs gamma + eta > 1 (gamma = {gamma}, eta = {eta})"
        )));
    }
    let big_m = output_bound;
    let constant = 2.0 * big_m * r
        + 2.0
            * big_m
            * big_m
            * (-fit.cm / fit.cond_neg + big_m * big_m / (r * r) + fit.cond_pos / fit.c1);
    let theta1 = 1f64.min(gamma + eta - 1.0);
    Ok(HypothesisBound {
        constant,
        theta1,
        rhs: constant * (m as f64).powf(-theta1),
    })
}

/// Computed multiplier against the leading-order estimate `mu ~ mu_tilde` and
/// the interval the perturbation argument allows.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MuDiagnostic {
    pub mu: f64,
    pub predicted: f64,
    pub lower: f64,
    pub upper: f64,
    pub within: bool,
}

/// Interval `[min d + mu_tilde - mu_tilde^2, max d - mu_tilde + mu_tilde^2]`
/// over the unperturbed eigenvalues `d` closest to zero on each side.
pub fn mu_diagnostic(
    s: &GramSpectrum,
    y: &DVector<f64>,
    lambda: f64,
    r: f64,
    mu: f64,
) -> Result<MuDiagnostic> {
    let problem = SphereProblem::new(s, y, lambda, r)?;
    let mt = problem.mu_tilde();
    let spread = -mt + mt * mt;
    let n = s.dim();
    let neg_pole = if s.negative > 0 {
        lambda / s.values[n - s.negative]
    } else {
        0.0
    };
    let pos_pole = if s.positive > 0 {
        lambda / s.values[s.positive - 1]
    } else {
        0.0
    };
    let lower = neg_pole.min(0.0) - spread;
    let upper = pos_pole.max(0.0) + spread;
    Ok(MuDiagnostic {
        mu,
        predicted: mt,
        lower,
        upper,
        within: mu >= lower && mu <= upper,
    })
}

/// Inputs of the learning-rate exponents.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RateParams {
    pub gamma: f64,
    pub beta: f64,
    pub s: f64,
    pub eta: f64,
    pub epsilon: f64,
}

impl RateParams {
    pub fn new(gamma: f64, beta: f64, s: f64, eta: f64, epsilon: f64) -> Self {
        RateParams {
            gamma,
            beta,
            s,
            eta,
            epsilon,
        }
    }

    /// Parses `gamma,beta,s,eta,eps`.
    pub fn parse(text: &str) -> Result<Self> {
        let parts: Vec<&str> = text.split(',').map(str::trim).collect();
        if parts.len() != 5 {
            return Err(Error::arg(format!(
                "expected gamma,beta,s,eta,eps but got {} values",
                parts.len()
            )));
        }
        let mut v = [0.0; 5];
        for (slot, p) in v.iter_mut().zip(&parts) {
            *slot = p
                .parse()
                .map_err(|_| Error::arg(format!("'{p}' is not a number")))?;
        }
        Ok(RateParams::new(v[0], v[1], v[2], v[3], v[4]))
    }

    /// Upper end of the admissible epsilon window, `1/s - (gamma + s gamma - 1)(2 + s)`.
    pub fn epsilon_limit(&self) -> f64 {
        1.0 / self.s - (self.gamma + self.s * self.gamma - 1.0) * (2.0 + self.s)
    }

    fn check_ranges(&self) -> Result<()> {
        let RateParams {
            gamma,
            beta,
            s,
            eta,
            epsilon,
        } = *self;
        if !(gamma > 0.0 && gamma <= 1.0) {
            return Err(Error::arg(format!("gamma must lie in (0, 1], got {gamma}")));
        }
        if !(beta > 0.0 && beta <= 1.0) {
            return Err(Error::arg(format!("beta must lie in (0, 1], got {beta}")));
        }
        if !(s > 0.0 && s.is_finite()) {
            return Err(Error::arg(format!("s must be positive, got {s}")));
        }
        if !(eta > 0.0 && eta.is_finite()) {
            return Err(Error::arg(format!("eta must be positive, got {eta}")));
        }
        let limit = self.epsilon_limit();
        if !(epsilon > 0.0 && epsilon < limit) {
            return Err(Error::arg(format!(
                "epsilon window violated: need 0 < epsilon < 1/s - (gamma + s*gamma - 1)(2 + s) = {limit}, \
                 got epsilon = {epsilon}"
            )));
        }
        Ok(())
    }

    fn check_eta_window(&self) -> Result<()> {
        let lower = 0f64.max(1.0 - 2.0 / self.s);
        if self.eta >= 1.0 || (self.eta > lower && self.eta < 1.0) {
            Ok(())
        } else {
            Err(Error::arg(format!(
                "eta window violated: need max{{0, 1 - 2/s}} = {lower} < eta < 1 or eta >= 1, got eta = {}",
                self.eta
            )))
        }
    }
}

/// Which formula produced an exponent.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RateRegime {
    Krein,
    /// `eta >= 1`: the rate reduces to the RKHS expression.
    Rkhs,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ThetaResult {
    pub theta: f64,
    /// Index of the term attaining the minimum, in formula order.
    pub active_term: usize,
    pub regime: RateRegime,
    /// `theta > 0`, i.e. the bound is an actual rate.
    pub valid: bool,
}

fn argmin(terms: &[f64]) -> (f64, usize) {
    let mut best = (terms[0], 0);
    for (i, &t) in terms.iter().enumerate().skip(1) {
        if t < best.0 {
            best = (t, i);
        }
    }
    best
}

/// Five-term exponent; delegates to [`theta_rkhs`] when `eta >= 1`.
pub fn theta_rate(p: &RateParams) -> Result<ThetaResult> {
    p.check_ranges()?;
    p.check_eta_window()?;
    if p.eta >= 1.0 {
        return theta_rkhs(p);
    }
    let RateParams {
        gamma: g,
        beta: b,
        s,
        eta,
        epsilon: e,
    } = *p;
    let terms = [
        g * b,
        g + eta - 1.0,
        (2.0 - s * g * (1.0 - b)) / (2.0 * (1.0 + s)),
        (2.0 - s * (1.0 - eta)) / (2.0 * (1.0 + s)),
        (1.0 - s * (g + s * g - 1.0) * (2.0 + s) - s * e) / (1.0 + s),
    ];
    let (theta, active_term) = argmin(&terms);
    Ok(ThetaResult {
        theta,
        active_term,
        regime: RateRegime::Krein,
        valid: theta > 0.0,
    })
}

/// Three-term exponent (independent of `eta`).
pub fn theta_rkhs(p: &RateParams) -> Result<ThetaResult> {
    p.check_ranges()?;
    let RateParams {
        gamma: g,
        beta: b,
        s,
        epsilon: e,
        ..
    } = *p;
    let terms = [
        g * b,
        (2.0 - s * g * (1.0 - b)) / (2.0 * (1.0 + s)),
        (1.0 - (s * g * (1.0 + s) - s) * (2.0 + s) - s * e) / (1.0 + s),
    ];
    let (theta, active_term) = argmin(&terms);
    Ok(ThetaResult {
        theta,
        active_term,
        regime: RateRegime::Rkhs,
        valid: theta > 0.0,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::spectral::sym_eig;
    use approx::assert_abs_diff_eq;

    #[test]
    fn projection_branches() {
        let v = DVector::from_vec(vec![0.5, -0.2]);
        assert_eq!(project(&v, 1.0).unwrap(), v);
        let w = DVector::from_vec(vec![3.0, -7.0]);
        let c = project(&w, 2.0).unwrap();
        assert_eq!(c, DVector::from_vec(vec![2.0, -2.0]));
        assert_eq!(project(&c, 2.0).unwrap(), c);
        assert!(project(&w, 0.0).is_err());
    }

    #[test]
    fn inner_products_on_indefinite_diag() {
        let k = DMatrix::from_diagonal(&DVector::from_vec(vec![1.0, -1.0]));
        let a = DVector::from_vec(vec![0.0, 1.0]);
        assert_eq!(krein_inner(&a, &k).unwrap(), -1.0);
        assert_eq!(t_inner(&a, &k).unwrap(), 0.5);
        let zero = DVector::zeros(2);
        assert_eq!(krein_inner(&zero, &k).unwrap(), 0.0);
        assert_eq!(t_inner(&zero, &k).unwrap(), 0.0);
        assert!(t_inner(&DVector::zeros(3), &k).is_err());
    }

    #[test]
    fn henrici_identity_saturates() {
        let m = 5;
        let s = sym_eig(&DMatrix::identity(m, m)).unwrap();
        let y: DVector<f64> = DVector::from_vec(vec![1.0, 2.0, -1.0, 0.5, 0.3]);
        let (lambda, r) = (0.1, 1.0);
        let mf = m as f64;
        let mt = -y.norm() / (mf * mf.sqrt() * r);
        let cert = henrici_certificate(&s, &y, lambda, r, lambda + mt);
        let vs = y.norm_squared() / (mf.powi(3) * r * r);
        assert_abs_diff_eq!(cert.gap, vs.sqrt(), epsilon = 1e-15);
        assert_abs_diff_eq!(cert.bound, vs + vs.sqrt(), epsilon = 1e-15);
        assert!(cert.passed);
    }

    #[test]
    fn hypothesis_error_identity_vanishes() {
        let k = DMatrix::identity(4, 4);
        let y = DVector::from_vec(vec![1.0, -0.5, 0.2, 2.0]);
        let rep = hypothesis_error(&k, &y, 0.1, 1.0).unwrap();
        assert_abs_diff_eq!(rep.p, 0.0, epsilon = 1e-12);
        assert_abs_diff_eq!(rep.direct_diff, 0.0, epsilon = 1e-12);
    }

    #[test]
    fn hypothesis_error_two_by_two() {
        let k = DMatrix::from_diagonal(&DVector::from_vec(vec![1.0, -1.0]));
        let y = DVector::from_vec(vec![1.0, 1.0]);
        let rep = hypothesis_error(&k, &y, 0.1, 1.0).unwrap();
        assert!(rep.p >= -1e-8);
        assert_abs_diff_eq!(rep.p, rep.direct_diff, epsilon = 1e-8);
        assert!(rep.henrici_passed());
    }

    #[test]
    fn theta_small_s_limit() {
        let eps = 1e-9;
        let p = RateParams::new(1.0, 1.0, 1e-6, 1.0, eps);
        assert_abs_diff_eq!(theta_rate(&p).unwrap().theta, 1.0, epsilon = 1e-3);
        let p = RateParams::new(1.0, 1.0, 1e-6, 0.5, eps);
        let t = theta_rate(&p).unwrap();
        assert_abs_diff_eq!(t.theta, 0.5, epsilon = 1e-3);
        assert_eq!(t.active_term, 1);
        assert_eq!(t.regime, RateRegime::Krein);
    }

    #[test]
    fn theta_eta_independence_above_one() {
        let a = theta_rate(&RateParams::new(0.8, 0.6, 0.3, 1.0, 0.01)).unwrap();
        let b = theta_rate(&RateParams::new(0.8, 0.6, 0.3, 3.0, 0.01)).unwrap();
        assert_eq!(a.theta, b.theta);
        assert_eq!(a.regime, RateRegime::Rkhs);
    }

    #[test]
    fn theta_rejects_bad_windows() {
        let err = theta_rate(&RateParams::new(1.0, 1.0, 1.0, 1.0, 5.0)).unwrap_err();
        assert!(err.to_string().contains("epsilon window"));
        let err = theta_rate(&RateParams::new(0.2, 1.0, 4.0, 0.25, 1e-3)).unwrap_err();
        assert!(err.to_string().contains("eta window"), "{err}");
        assert!(RateParams::parse("1,2,3").is_err());
        assert_eq!(RateParams::parse("1, 1, 0.5, 1, 0.01").unwrap().s, 0.5);
    }
}
