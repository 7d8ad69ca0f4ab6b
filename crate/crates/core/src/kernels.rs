//! Kernel functions and Gram matrices.
//!
//! Four indefinite kernels (spherical polynomial, TL1, Delta-Gauss, log) plus
//! a Gaussian baseline, which is PSD and exercises the degenerate paths of
//! the solvers. The norm in the log kernel is the Euclidean norm.

use std::fmt;
use std::str::FromStr;

use nalgebra::{DMatrix, DVector};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Rows passed to the spherical polynomial kernel must have unit norm within this.
pub const UNIT_NORM_TOL: f64 = 1e-10;

/// A kernel family together with its hyper-parameters.
///
/// Serializes as `{"family": "...", "params": {...}}`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "family", content = "params", rename_all = "snake_case")]
pub enum KernelSpec {
    /// `(1 + <x, x'>)^degree` on the unit sphere.
    SphericalPolynomial { degree: u32 },
    /// `max(tau - ||x - x'||_1, 0)`.
    Tl1 { tau: f64 },
    /// `exp(-||x - x'||^2 / tau1) - exp(-||x - x'||^2 / tau2)`.
    DeltaGauss { tau1: f64, tau2: f64 },
    /// `-log(1 + ||x - x'||_2)`.
    Log {},
    /// Baseline: `exp(-||x - x'||^2 / (2 sigma^2))`.
    Gaussian { sigma: f64 },
    /// Test fixture: 1 on identical points, 0 otherwise, so `K = I` on distinct points.
    Identity {},
}

impl KernelSpec {
    pub const LOG: KernelSpec = KernelSpec::Log {};

    /// The hyper-parameters used in the eigen-spectrum experiments for a
    /// `dim`-dimensional input: degree 10, `tau = 0.7 d`, `(tau1, tau2) = (1, 0.1)`.
    pub fn with_defaults(name: &str, dim: usize) -> Result<KernelSpec> {
        let spec = match normalize_name(name).as_str() {
            "sp" | "spherical_polynomial" => KernelSpec::SphericalPolynomial { degree: 10 },
            "tl1" => KernelSpec::Tl1 {
                tau: 0.7 * dim as f64,
            },
            "delta_gauss" | "dg" => KernelSpec::DeltaGauss {
                tau1: 1.0,
                tau2: 0.1,
            },
            "log" => KernelSpec::Log {},
            "gaussian" | "rbf" => KernelSpec::Gaussian { sigma: 1.0 },
            "identity" | "identity_test" => KernelSpec::Identity {},
            other => return Err(Error::arg(format!("unknown kernel family '{other}'"))),
        };
        Ok(spec)
    }

    /// Parses `name` or `name:key=value,key=value`, filling unspecified
    /// parameters from [`KernelSpec::with_defaults`].
    pub fn parse(text: &str, dim: usize) -> Result<KernelSpec> {
        let (name, params) = match text.split_once(':') {
            Some((n, p)) => (n, p),
            None => (text, ""),
        };
        let mut spec = KernelSpec::with_defaults(name, dim)?;
        for item in params.split(',').filter(|s| !s.trim().is_empty()) {
            let (key, value) = item
                .split_once('=')
                .ok_or_else(|| Error::arg(format!("kernel parameter '{item}' is not key=value")))?;
            let value: f64 = value
                .trim()
                .parse()
                .map_err(|_| Error::arg(format!("kernel parameter '{item}' is not a number")))?;
            match (&mut spec, key.trim()) {
                (KernelSpec::SphericalPolynomial { degree }, "degree" | "p") => {
                    if value.fract() != 0.0 || value < 1.0 {
                        return Err(Error::arg(
                            "spherical polynomial degree must be an integer >= 1",
                        ));
                    }
                    *degree = value as u32;
                }
                (KernelSpec::Tl1 { tau }, "tau") => *tau = value,
                (KernelSpec::DeltaGauss { tau1, .. }, "tau1") => *tau1 = value,
                (KernelSpec::DeltaGauss { tau2, .. }, "tau2") => *tau2 = value,
                (KernelSpec::Gaussian { sigma }, "sigma") => *sigma = value,
                (_, key) => {
                    return Err(Error::arg(format!(
                        "kernel '{}' has no parameter '{key}'",
                        spec.family_name()
                    )))
                }
            }
        }
        spec.validate()?;
        Ok(spec)
    }

    pub fn validate(&self) -> Result<()> {
        let positive = |name: &str, v: f64| {
            if v.is_finite() && v > 0.0 {
                Ok(())
            } else {
                Err(Error::arg(format!(
                    "{name} must be a positive finite number, got {v}"
                )))
            }
        };
        match *self {
            KernelSpec::SphericalPolynomial { degree } => {
                if degree == 0 {
                    return Err(Error::arg("spherical polynomial degree must be >= 1"));
                }
                Ok(())
            }
            KernelSpec::Tl1 { tau } => positive("tau", tau),
            KernelSpec::DeltaGauss { tau1, tau2 } => {
                positive("tau1", tau1)?;
                positive("tau2", tau2)
            }
            KernelSpec::Gaussian { sigma } => positive("sigma", sigma),
            KernelSpec::Log {} | KernelSpec::Identity {} => Ok(()),
        }
    }

    pub fn family_name(&self) -> &'static str {
        match self {
            KernelSpec::SphericalPolynomial { .. } => "spherical_polynomial",
            KernelSpec::Tl1 { .. } => "tl1",
            KernelSpec::DeltaGauss { .. } => "delta_gauss",
            KernelSpec::Log {} => "log",
            KernelSpec::Gaussian { .. } => "gaussian",
            KernelSpec::Identity {} => "identity",
        }
    }

    /// Short identifier including parameters, used in result files.
    pub fn id(&self) -> String {
        self.to_string()
    }

    pub fn requires_unit_sphere(&self) -> bool {
        matches!(self, KernelSpec::SphericalPolynomial { .. })
    }

    #[inline]
    fn eval_unchecked(&self, x: &[f64], y: &[f64]) -> f64 {
        match *self {
            KernelSpec::SphericalPolynomial { degree } => {
                let dot: f64 = x.iter().zip(y).map(|(a, b)| a * b).sum();
                (1.0 + dot).powi(degree as i32)
            }
            KernelSpec::Tl1 { tau } => {
                let l1: f64 = x.iter().zip(y).map(|(a, b)| (a - b).abs()).sum();
                (tau - l1).max(0.0)
            }
            KernelSpec::DeltaGauss { tau1, tau2 } => {
                let d2 = sq_dist(x, y);
                (-d2 / tau1).exp() - (-d2 / tau2).exp()
            }
            KernelSpec::Log {} => -(1.0 + sq_dist(x, y).sqrt()).ln(),
            KernelSpec::Gaussian { sigma } => (-sq_dist(x, y) / (2.0 * sigma * sigma)).exp(),
            KernelSpec::Identity {} => {
                if x == y {
                    1.0
                } else {
                    0.0
                }
            }
        }
    }
}

impl fmt::Display for KernelSpec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match *self {
            KernelSpec::SphericalPolynomial { degree } => write!(f, "sp:degree={degree}"),
            KernelSpec::Tl1 { tau } => write!(f, "tl1:tau={tau}"),
            KernelSpec::DeltaGauss { tau1, tau2 } => {
                write!(f, "delta_gauss:tau1={tau1},tau2={tau2}")
            }
            KernelSpec::Log {} => write!(f, "log"),
            KernelSpec::Gaussian { sigma } => write!(f, "gaussian:sigma={sigma}"),
            KernelSpec::Identity {} => write!(f, "identity"),
        }
    }
}

fn normalize_name(name: &str) -> String {
    name.trim().to_ascii_lowercase().replace('-', "_")
}

#[inline]
fn sq_dist(x: &[f64], y: &[f64]) -> f64 {
    x.iter().zip(y).map(|(a, b)| (a - b) * (a - b)).sum()
}

fn check_point(name: &str, x: &[f64]) -> Result<()> {
    if x.iter().all(|v| v.is_finite()) {
        Ok(())
    } else {
        Err(Error::arg(format!("{name} contains non-finite values")))
    }
}

/// Evaluates `k(x, x')`.
pub fn kernel_eval(spec: &KernelSpec, x: &[f64], x_prime: &[f64]) -> Result<f64> {
    if x.len() != x_prime.len() {
        return Err(Error::arg(format!(
            "dimension mismatch: {} vs {}",
            x.len(),
            x_prime.len()
        )));
    }
    check_point("x", x)?;
    check_point("x'", x_prime)?;
    Ok(spec.eval_unchecked(x, x_prime))
}

/// Row-major copy of the rows of `x`.
fn rows_of(x: &DMatrix<f64>) -> Vec<Vec<f64>> {
    (0..x.nrows())
        .map(|i| x.row(i).iter().copied().collect())
        .collect()
}

fn check_points(spec: &KernelSpec, x: &DMatrix<f64>) -> Result<()> {
    if x.nrows() == 0 || x.ncols() == 0 {
        return Err(Error::arg(
            "point matrix must have at least one row and one column",
        ));
    }
    if !x.iter().all(|v| v.is_finite()) {
        return Err(Error::arg("point matrix contains non-finite values"));
    }
    if spec.requires_unit_sphere() {
        for (i, row) in x.row_iter().enumerate() {
            let norm = row.norm();
            if (norm - 1.0).abs() > UNIT_NORM_TOL {
                return Err(Error::arg(format!(
                    "spherical polynomial kernel needs unit-norm rows; row {i} has norm {norm} \
                     (normalize the data to the unit sphere first)"
                )));
            }
        }
    }
    Ok(())
}

/// Gram matrix `K_ij = k(x_i, x_j)` over the rows of `x`. Bit-exactly symmetric.
pub fn gram(spec: &KernelSpec, x: &DMatrix<f64>) -> Result<DMatrix<f64>> {
    spec.validate()?;
    check_points(spec, x)?;
    let rows = rows_of(x);
    let m = rows.len();
    // upper triangle, one row per task
    let upper: Vec<Vec<f64>> = (0..m)
        .into_par_iter()
        .map(|i| {
            (i..m)
                .map(|j| spec.eval_unchecked(&rows[i], &rows[j]))
                .collect()
        })
        .collect();
    let mut k = DMatrix::zeros(m, m);
    for (i, vals) in upper.iter().enumerate() {
        for (off, &v) in vals.iter().enumerate() {
            let j = i + off;
            k[(i, j)] = v;
            k[(j, i)] = v;
        }
    }
    Ok(k)
}

/// Cross-kernel matrix `C_ij = k(a_i, b_j)`.
pub fn cross_gram(spec: &KernelSpec, a: &DMatrix<f64>, b: &DMatrix<f64>) -> Result<DMatrix<f64>> {
    spec.validate()?;
    if a.ncols() != b.ncols() {
        return Err(Error::arg(format!(
            "dimension mismatch: {} vs {} columns",
            a.ncols(),
            b.ncols()
        )));
    }
    check_points(spec, a)?;
    check_points(spec, b)?;
    let ra = rows_of(a);
    let rb = rows_of(b);
    let vals: Vec<Vec<f64>> = ra
        .par_iter()
        .map(|x| rb.iter().map(|y| spec.eval_unchecked(x, y)).collect())
        .collect();
    Ok(DMatrix::from_fn(ra.len(), rb.len(), |i, j| vals[i][j]))
}

/// A labelled sample: rows of `x` are points, `y` are targets.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Dataset {
    pub x: DMatrix<f64>,
    pub y: DVector<f64>,
    pub name: String,
}

impl Dataset {
    pub fn new(x: DMatrix<f64>, y: DVector<f64>, name: impl Into<String>) -> Result<Dataset> {
        if x.nrows() == 0 || x.ncols() == 0 {
            return Err(Error::arg("dataset needs m >= 1 rows and d >= 1 columns"));
        }
        if x.nrows() != y.len() {
            return Err(Error::arg(format!(
                "dataset has {} points but {} targets",
                x.nrows(),
                y.len()
            )));
        }
        if !x.iter().chain(y.iter()).all(|v| v.is_finite()) {
            return Err(Error::arg("dataset contains non-finite values"));
        }
        Ok(Dataset {
            x,
            y,
            name: name.into(),
        })
    }

    pub fn len(&self) -> usize {
        self.x.nrows()
    }

    pub fn is_empty(&self) -> bool {
        self.x.nrows() == 0
    }

    pub fn dim(&self) -> usize {
        self.x.ncols()
    }

    /// Scales every row to unit Euclidean norm. Zero rows are rejected.
    pub fn normalize_to_sphere(&mut self) -> Result<()> {
        for i in 0..self.x.nrows() {
            let norm = self.x.row(i).norm();
            if norm == 0.0 {
                return Err(Error::arg(format!(
                    "row {i} is zero and cannot be normalized"
                )));
            }
            self.x.row_mut(i).scale_mut(1.0 / norm);
        }
        Ok(())
    }

    /// Standardizes every column to zero mean and unit variance
    /// (constant columns are only centered).
    pub fn z_score(&mut self) {
        let m = self.x.nrows() as f64;
        for j in 0..self.x.ncols() {
            let mean = self.x.column(j).sum() / m;
            let var = self
                .x
                .column(j)
                .iter()
                .map(|v| (v - mean).powi(2))
                .sum::<f64>()
                / m;
            let sd = var.sqrt();
            for v in self.x.column_mut(j).iter_mut() {
                *v -= mean;
                if sd > 0.0 {
                    *v /= sd;
                }
            }
        }
    }

    /// Keeps the listed rows, in order.
    pub fn select(&self, rows: &[usize]) -> Dataset {
        Dataset {
            x: self.x.select_rows(rows),
            y: DVector::from_iterator(rows.len(), rows.iter().map(|&i| self.y[i])),
            name: self.name.clone(),
        }
    }
}

impl FromStr for KernelSpec {
    type Err = Error;

    /// Parses with `d = 1` for dimension-dependent defaults; prefer
    /// [`KernelSpec::parse`] when the data dimension is known.
    fn from_str(s: &str) -> Result<Self> {
        KernelSpec::parse(s, 1)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    #[test]
    fn log_kernel_vanishes_on_the_diagonal() {
        let x = [0.3, -1.2, 4.0];
        assert_eq!(kernel_eval(&KernelSpec::LOG, &x, &x).unwrap(), 0.0);
    }

    #[test]
    fn delta_gauss_vanishes_on_the_diagonal() {
        let spec = KernelSpec::DeltaGauss {
            tau1: 1.0,
            tau2: 0.1,
        };
        let x = [0.5, 0.5];
        assert_eq!(kernel_eval(&spec, &x, &x).unwrap(), 0.0);
    }

    #[test]
    fn tl1_peaks_at_tau_and_truncates() {
        let spec = KernelSpec::with_defaults("tl1", 10).unwrap();
        assert_eq!(spec, KernelSpec::Tl1 { tau: 7.0 });
        let x = vec![0.0; 10];
        assert_abs_diff_eq!(kernel_eval(&spec, &x, &x).unwrap(), 7.0, epsilon = 1e-12);
        let far: Vec<f64> = (0..10).map(|i| if i < 7 { 1.0 } else { 0.0 }).collect();
        assert_eq!(kernel_eval(&spec, &x, &far).unwrap(), 0.0);
        let farther = vec![1.0; 10];
        assert_eq!(kernel_eval(&spec, &x, &farther).unwrap(), 0.0);
    }

    #[test]
    fn spherical_polynomial_on_a_unit_vector() {
        let spec = KernelSpec::with_defaults("sp", 3).unwrap();
        let x = [0.6, 0.0, 0.8];
        assert_abs_diff_eq!(kernel_eval(&spec, &x, &x).unwrap(), 1024.0, epsilon = 1e-9);
    }

    #[test]
    fn eval_rejects_bad_points() {
        assert!(kernel_eval(&KernelSpec::LOG, &[1.0], &[1.0, 2.0]).is_err());
        assert!(kernel_eval(&KernelSpec::LOG, &[f64::NAN], &[1.0]).is_err());
        assert!(kernel_eval(&KernelSpec::LOG, &[1.0], &[f64::INFINITY]).is_err());
    }

    #[test]
    fn gram_rejects_unnormalized_rows_for_sp() {
        let spec = KernelSpec::SphericalPolynomial { degree: 2 };
        let x = DMatrix::from_row_slice(2, 2, &[1.0, 1.0, 0.0, 1.0]);
        let err = gram(&spec, &x).unwrap_err();
        assert!(err.to_string().contains("unit-norm"));
        let mut ds = Dataset::new(x, DVector::from_vec(vec![1.0, 2.0]), "t").unwrap();
        ds.normalize_to_sphere().unwrap();
        assert!(gram(&spec, &ds.x).is_ok());
    }

    #[test]
    fn delta_gauss_gram_is_traceless() {
        let x = DMatrix::from_fn(30, 4, |i, j| {
            ((i * 7 + j * 3) % 11) as f64 / 11.0 + 0.01 * i as f64
        });
        let k = gram(
            &KernelSpec::DeltaGauss {
                tau1: 1.0,
                tau2: 0.1,
            },
            &x,
        )
        .unwrap();
        assert_eq!(k.trace(), 0.0);
        assert_eq!(k, k.transpose());
    }

    #[test]
    fn kernel_spec_json_shape() {
        let spec = KernelSpec::DeltaGauss {
            tau1: 1.0,
            tau2: 0.1,
        };
        let json = serde_json::to_value(spec).unwrap();
        assert_eq!(json["family"], "delta_gauss");
        assert_eq!(json["params"]["tau2"], 0.1);
        let back: KernelSpec = serde_json::from_value(json).unwrap();
        assert_eq!(back, spec);
        let log: KernelSpec = serde_json::from_str(r#"{"family":"log","params":{}}"#).unwrap();
        assert_eq!(log, KernelSpec::LOG);
    }

    #[test]
    fn parse_with_overrides() {
        let spec = KernelSpec::parse("delta-gauss:tau1=2,tau2=0.5", 3).unwrap();
        assert_eq!(
            spec,
            KernelSpec::DeltaGauss {
                tau1: 2.0,
                tau2: 0.5
            }
        );
        assert!(KernelSpec::parse("gaussian:sigma=-1", 3).is_err());
        assert!(KernelSpec::parse("log:tau=1", 3).is_err());
        assert!(KernelSpec::parse("nope", 3).is_err());
        assert!(KernelSpec::parse("sp:degree=0", 3).is_err());
    }

    #[test]
    fn z_score_centers_columns() {
        let x = DMatrix::from_row_slice(3, 2, &[1.0, 5.0, 2.0, 5.0, 3.0, 5.0]);
        let mut ds = Dataset::new(x, DVector::from_vec(vec![0.0; 3]), "z").unwrap();
        ds.z_score();
        assert_abs_diff_eq!(ds.x.column(0).sum(), 0.0, epsilon = 1e-12);
        assert_abs_diff_eq!(ds.x.column(1).sum(), 0.0, epsilon = 1e-12);
    }
}
