//! Desk-scale experiments: eigenvalue spectra across sample sizes, learning
//! curves with fitted log-log slopes, cross-validation of `(lambda, r)` and
//! Monte-Carlo excess-risk estimation.
//!
//! Every random draw comes from [`crate::rng::stream`] keyed by
//! `(seed, purpose, m, trial)`, so outputs do not depend on thread count.

use nalgebra::{DMatrix, DVector};
use rand::seq::SliceRandom;
use rand::Rng;
use rand_distr::StandardNormal;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::config::Tolerances;
use crate::error::{Error, Result};
use crate::io::{fmt_f64, Tabular};
use crate::kernels::{cross_gram, gram, Dataset, KernelSpec};
use crate::rng::{stream, Purpose, Stream};
use crate::solver::{solve_with, Regularizer};
use crate::spectral::{
    fit_eigen_decay, sym_eig_with, DecayPoint, EigenDecayFit, EigenMethod, GramSpectrum,
};
use crate::stats::{linear_fit, mean_std};

/// Distribution of the inputs.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "law", rename_all = "snake_case")]
pub enum InputLaw {
    /// Uniform on `[-1, 1]^dim`.
    UniformCube { dim: usize },
    /// Uniform on the unit sphere in `R^dim`.
    UniformSphere { dim: usize },
}

impl InputLaw {
    pub fn dim(&self) -> usize {
        match *self {
            InputLaw::UniformCube { dim } | InputLaw::UniformSphere { dim } => dim,
        }
    }

    pub fn sample(&self, n: usize, rng: &mut Stream) -> DMatrix<f64> {
        let d = self.dim();
        let mut x = DMatrix::zeros(n, d);
        match self {
            InputLaw::UniformCube { .. } => {
                for i in 0..n {
                    for j in 0..d {
                        x[(i, j)] = rng.random_range(-1.0..1.0);
                    }
                }
            }
            InputLaw::UniformSphere { .. } => {
                for i in 0..n {
                    loop {
                        for j in 0..d {
                            x[(i, j)] = rng.sample(StandardNormal);
                        }
                        let norm = x.row(i).norm();
                        if norm > 1e-12 {
                            x.row_mut(i).scale_mut(1.0 / norm);
                            break;
                        }
                    }
                }
            }
        }
        x
    }
}

/// The regression function `f_rho`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum TargetFunction {
    /// `sum_j c_j k(x, a_j)`.
    KernelExpansion {
        kernel: KernelSpec,
        anchors: Vec<Vec<f64>>,
        coeffs: Vec<f64>,
    },
    Constant {
        value: f64,
    },
}

impl TargetFunction {
    pub fn eval(&self, x: &DMatrix<f64>) -> Result<DVector<f64>> {
        match self {
            TargetFunction::Constant { value } => Ok(DVector::from_element(x.nrows(), *value)),
            TargetFunction::KernelExpansion {
                kernel,
                anchors,
                coeffs,
            } => {
                if anchors.len() != coeffs.len() || anchors.is_empty() {
                    return Err(Error::arg(
                        "kernel expansion needs one coefficient per anchor",
                    ));
                }
                let d = anchors[0].len();
                if anchors.iter().any(|a| a.len() != d) || d != x.ncols() {
                    return Err(Error::arg(format!(
                        "target anchors have dimension {d} but inputs have {}",
                        x.ncols()
                    )));
                }
                let a = DMatrix::from_fn(anchors.len(), d, |i, j| anchors[i][j]);
                let c = DVector::from_column_slice(coeffs);
                Ok(cross_gram(kernel, x, &a)? * c)
            }
        }
    }
}

/// A known regression problem: inputs, target function and additive Gaussian noise.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SyntheticTarget {
    pub f_rho: TargetFunction,
    pub noise_sigma: f64,
    pub input_law: InputLaw,
    /// Bound on `|f_rho|`, also the clip level for risk estimates.
    pub m_star: f64,
}

/// Points used to check `|f_rho| <= M*` at construction.
pub const SUP_CHECK_POINTS: usize = 20_000;

impl SyntheticTarget {
    pub fn new(
        f_rho: TargetFunction,
        noise_sigma: f64,
        input_law: InputLaw,
        m_star: f64,
    ) -> Result<Self> {
        if !(noise_sigma >= 0.0 && noise_sigma.is_finite()) {
            return Err(Error::arg(format!(
                "noise sigma must be >= 0, got {noise_sigma}"
            )));
        }
        if !(m_star >= 1.0 && m_star.is_finite()) {
            return Err(Error::arg(format!("M* must be >= 1, got {m_star}")));
        }
        if input_law.dim() == 0 {
            return Err(Error::arg("input dimension must be positive"));
        }
        let t = SyntheticTarget {
            f_rho,
            noise_sigma,
            input_law,
            m_star,
        };
        let sup = t.sampled_sup(SUP_CHECK_POINTS)?;
        if sup > m_star {
            return Err(Error::arg(format!(
                "target exceeds its bound: sampled sup |f| = {sup} > M* = {m_star}"
            )));
        }
        Ok(t)
    }

    /// Largest `|f_rho|` over a fixed dense sample of the input law.
    pub fn sampled_sup(&self, n: usize) -> Result<f64> {
        let mut rng = stream(0, Purpose::Target, n, 0);
        let x = self.input_law.sample(n, &mut rng);
        Ok(self.f_rho.eval(&x)?.amax())
    }

    /// Gaussian-kernel expansion over `DEFAULT_ANCHORS` random anchors in the
    /// cube `[-1, 1]^DEFAULT_DIM`, scaled so the sampled sup equals `DEFAULT_SUP`.
    pub fn default_target() -> SyntheticTarget {
        Self::kernel_expansion(
            InputLaw::UniformCube { dim: DEFAULT_DIM },
            KernelSpec::Gaussian {
                sigma: DEFAULT_TARGET_WIDTH,
            },
            DEFAULT_ANCHORS,
            DEFAULT_NOISE,
            DEFAULT_TARGET_SEED,
        )
        .expect("default target is valid")
    }

    /// Random expansion `sum_j c_j k(x, a_j)` with anchors drawn from `law`
    /// and standard normal coefficients, rescaled to sampled sup `DEFAULT_SUP`.
    pub fn kernel_expansion(
        law: InputLaw,
        kernel: KernelSpec,
        anchors: usize,
        noise_sigma: f64,
        seed: u64,
    ) -> Result<Self> {
        if anchors == 0 {
            return Err(Error::arg("need at least one anchor"));
        }
        let mut rng = stream(seed, Purpose::Target, anchors, 1);
        let a = law.sample(anchors, &mut rng);
        let coeffs: Vec<f64> = (0..anchors).map(|_| rng.sample(StandardNormal)).collect();
        let anchors: Vec<Vec<f64>> = a.row_iter().map(|r| r.iter().copied().collect()).collect();
        let raw = SyntheticTarget {
            f_rho: TargetFunction::KernelExpansion {
                kernel,
                anchors: anchors.clone(),
                coeffs: coeffs.clone(),
            },
            noise_sigma,
            input_law: law,
            m_star: 1.0,
        };
        let sup = raw.sampled_sup(SUP_CHECK_POINTS)?;
        if sup == 0.0 {
            return Err(Error::arg("target expansion is identically zero"));
        }
        let scale = DEFAULT_SUP / sup;
        SyntheticTarget::new(
            TargetFunction::KernelExpansion {
                kernel,
                anchors,
                coeffs: coeffs.iter().map(|c| c * scale).collect(),
            },
            noise_sigma,
            law,
            1.0,
        )
    }
}

pub const DEFAULT_DIM: usize = 5;
pub const DEFAULT_ANCHORS: usize = 10;
pub const DEFAULT_NOISE: f64 = 0.1;
pub const DEFAULT_TARGET_WIDTH: f64 = 1.0;
pub const DEFAULT_SUP: f64 = 0.8;
pub const DEFAULT_TARGET_SEED: u64 = 20_190_901;

/// `m` i.i.d. draws `y = f_rho(x) + noise`.
pub fn generate(target: &SyntheticTarget, m: usize, seed: u64) -> Result<Dataset> {
    let mut rng = stream(seed, Purpose::Data, m, 0);
    generate_with(target, m, &mut rng)
}

pub fn generate_with(target: &SyntheticTarget, m: usize, rng: &mut Stream) -> Result<Dataset> {
    if m == 0 {
        return Err(Error::arg("need m >= 1 samples"));
    }
    let x = target.input_law.sample(m, rng);
    let mut y = target.f_rho.eval(&x)?;
    if target.noise_sigma > 0.0 {
        for v in y.iter_mut() {
            let e: f64 = rng.sample(StandardNormal);
            *v += target.noise_sigma * e;
        }
    }
    Dataset::new(x, y, "synthetic")
}

/// Monte-Carlo mean with its standard error.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RiskEstimate {
    pub mean: f64,
    pub std_error: f64,
}

impl RiskEstimate {
    fn from_squares(sq: &[f64]) -> RiskEstimate {
        let (mean, sd) = mean_std(sq);
        RiskEstimate {
            mean,
            std_error: sd / (sq.len() as f64).sqrt(),
        }
    }
}

pub const MIN_MC_POINTS: usize = 1000;

/// `E (pi_{M*}(f(x)) - f_rho(x))^2` over fresh inputs.
pub fn excess_risk(
    alpha: &DVector<f64>,
    train: &Dataset,
    spec: &KernelSpec,
    target: &SyntheticTarget,
    n_mc: usize,
    seed: u64,
) -> Result<RiskEstimate> {
    let mut rng = stream(seed, Purpose::MonteCarlo, train.len(), 0);
    Ok(excess_risk_both(alpha, train, spec, target, n_mc, &mut rng)?.0)
}

/// Clipped and unclipped risk estimates on the same Monte-Carlo draws.
pub fn excess_risk_both(
    alpha: &DVector<f64>,
    train: &Dataset,
    spec: &KernelSpec,
    target: &SyntheticTarget,
    n_mc: usize,
    rng: &mut Stream,
) -> Result<(RiskEstimate, RiskEstimate)> {
    if n_mc < MIN_MC_POINTS {
        return Err(Error::arg(format!(
            "need at least {MIN_MC_POINTS} Monte-Carlo points, got {n_mc}"
        )));
    }
    if alpha.len() != train.len() {
        return Err(Error::arg("alpha length does not match the training set"));
    }
    let x = target.input_law.sample(n_mc, rng);
    let truth = target.f_rho.eval(&x)?;
    let pred = cross_gram(spec, &x, &train.x)? * alpha;
    let b = target.m_star;
    let clipped: Vec<f64> = pred
        .iter()
        .zip(truth.iter())
        .map(|(p, t)| (p.clamp(-b, b) - t).powi(2))
        .collect();
    let raw: Vec<f64> = pred
        .iter()
        .zip(truth.iter())
        .map(|(p, t)| (p - t).powi(2))
        .collect();
    Ok((
        RiskEstimate::from_squares(&clipped),
        RiskEstimate::from_squares(&raw),
    ))
}

/// One trial of a learning-curve experiment.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExperimentRecord {
    pub m: usize,
    pub trial: usize,
    pub excess_risk: f64,
    pub mc_std_error: f64,
    pub lambda: f64,
    pub r: f64,
    pub kernel: String,
}

impl Tabular for ExperimentRecord {
    fn header() -> Vec<&'static str> {
        vec![
            "m",
            "trial",
            "excess_risk",
            "mc_std_error",
            "lambda",
            "r",
            "kernel",
        ]
    }

    fn row(&self) -> Vec<String> {
        vec![
            self.m.to_string(),
            self.trial.to_string(),
            fmt_f64(self.excess_risk),
            fmt_f64(self.mc_std_error),
            fmt_f64(self.lambda),
            fmt_f64(self.r),
            self.kernel.clone(),
        ]
    }
}

/// Least-squares line through `(log m, log mean risk)`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RateFit {
    pub slope: f64,
    pub intercept: f64,
    pub r2: f64,
    pub m_grid: Vec<usize>,
    pub mean_risks: Vec<f64>,
    pub std_risks: Vec<f64>,
}

pub fn fit_rate(m_grid: &[usize], mean_risks: &[f64], std_risks: &[f64]) -> Result<RateFit> {
    if m_grid.len() != mean_risks.len() || m_grid.len() != std_risks.len() {
        return Err(Error::arg("rate fit: grid and risk lengths differ"));
    }
    if mean_risks.iter().any(|&r| !(r > 0.0)) {
        return Err(Error::Experiment(
            "rate fit needs strictly positive mean risks".into(),
        ));
    }
    let lx: Vec<f64> = m_grid.iter().map(|&m| (m as f64).ln()).collect();
    let ly: Vec<f64> = mean_risks.iter().map(|r| r.ln()).collect();
    let fit = linear_fit(&lx, &ly)?;
    Ok(RateFit {
        slope: fit.slope,
        intercept: fit.intercept,
        r2: fit.r2,
        m_grid: m_grid.to_vec(),
        mean_risks: mean_risks.to_vec(),
        std_risks: std_risks.to_vec(),
    })
}

/// How the sphere radius is chosen across the grid.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "rule", rename_all = "snake_case")]
pub enum RRule {
    Fixed {
        r: f64,
    },
    /// Cross-validate `r` once at the smallest `m` (with `lambda = m^-gamma`), then hold it fixed.
    Cv {
        r_grid: Vec<f64>,
        folds: usize,
    },
}

impl Default for RRule {
    fn default() -> Self {
        RRule::Cv {
            r_grid: vec![0.1, 0.2, 0.3, 0.4, 0.5, 0.6, 0.8, 1.0],
            folds: 5,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RateConfig {
    pub kernel: KernelSpec,
    pub target: SyntheticTarget,
    pub m_grid: Vec<usize>,
    pub gamma: f64,
    pub r_rule: RRule,
    pub trials: usize,
    pub seed: u64,
    pub n_mc: usize,
    pub regularizer: Regularizer,
    #[serde(default)]
    pub tolerances: Tolerances,
}

impl RateConfig {
    pub fn new(kernel: KernelSpec, target: SyntheticTarget) -> Self {
        RateConfig {
            kernel,
            target,
            m_grid: vec![50, 100, 200, 400, 800],
            gamma: 1.0,
            r_rule: RRule::default(),
            trials: 100,
            seed: 0,
            n_mc: 2000,
            regularizer: Regularizer::Rkks,
            tolerances: Tolerances::default(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RateOutcome {
    pub fit: RateFit,
    pub r: f64,
    pub skipped: usize,
    pub cv: Option<CvResult>,
    #[serde(skip)]
    pub records: Vec<ExperimentRecord>,
}

pub const MAX_SKIP_FRACTION: f64 = 0.2;

/// Learning curve with `lambda = m^-gamma` and a fixed radius.
pub fn rate_experiment(cfg: &RateConfig) -> Result<RateOutcome> {
    let tol = cfg.tolerances;
    if cfg.m_grid.len() < 4 || cfg.m_grid.windows(2).any(|w| w[0] >= w[1]) {
        return Err(Error::arg(
            "m grid must be strictly increasing with at least 4 sizes",
        ));
    }
    if cfg.trials < 10 {
        return Err(Error::arg(format!(
            "need at least 10 trials, got {}",
            cfg.trials
        )));
    }
    if !(cfg.gamma > 0.0) {
        return Err(Error::arg("gamma must be positive"));
    }
    cfg.kernel.validate()?;

    let (r, cv) = match &cfg.r_rule {
        RRule::Fixed { r } => (*r, None),
        RRule::Cv { r_grid, folds } => {
            let m0 = cfg.m_grid[0];
            let mut rng = stream(cfg.seed, Purpose::Calibration, m0, 0);
            let data = generate_with(&cfg.target, m0, &mut rng)?;
            let lambda = (m0 as f64).powf(-cfg.gamma);
            let opts = CvOptions {
                regularizer: cfg.regularizer,
                clip: Some(cfg.target.m_star),
                tolerances: tol,
            };
            let res = cv_select_with(
                &cfg.kernel,
                &data,
                &[lambda],
                r_grid,
                *folds,
                cfg.seed,
                &opts,
            )?;
            log::info!("calibrated r = {} for {}", res.r, cfg.kernel.id());
            (res.r, Some(res))
        }
    };
    if !(r > 0.0) {
        return Err(Error::arg("r must be positive"));
    }

    let mut records = Vec::new();
    let mut means = Vec::new();
    let mut stds = Vec::new();
    let mut skipped = 0usize;
    for &m in &cfg.m_grid {
        let lambda = (m as f64).powf(-cfg.gamma);
        let results: Vec<(usize, Result<ExperimentRecord>)> = (0..cfg.trials)
            .into_par_iter()
            .map(|trial| (trial, run_trial(cfg, m, trial, lambda, r, &tol)))
            .collect();
        let mut risks = Vec::new();
        for (trial, res) in results {
            match res {
                Ok(rec) => {
                    risks.push(rec.excess_risk);
                    records.push(rec);
                }
                Err(e) => {
                    log::warn!("m = {m}, trial {trial} skipped: {e}");
                    skipped += 1;
                }
            }
        }
        if ((cfg.trials - risks.len()) as f64) > MAX_SKIP_FRACTION * cfg.trials as f64 {
            return Err(Error::Experiment(format!(
                "{} of {} trials failed at m = {m}",
                cfg.trials - risks.len(),
                cfg.trials
            )));
        }
        let (mean, sd) = mean_std(&risks);
        means.push(mean);
        stds.push(sd);
    }
    let fit = fit_rate(&cfg.m_grid, &means, &stds)?;
    Ok(RateOutcome {
        fit,
        r,
        skipped,
        cv,
        records,
    })
}

fn run_trial(
    cfg: &RateConfig,
    m: usize,
    trial: usize,
    lambda: f64,
    r: f64,
    tol: &Tolerances,
) -> Result<ExperimentRecord> {
    let mut data_rng = stream(cfg.seed, Purpose::Data, m, trial);
    let data = generate_with(&cfg.target, m, &mut data_rng)?;
    let k = gram(&cfg.kernel, &data.x)?;
    let s = sym_eig_with(&k, EigenMethod::default(), tol)?;
    let sol = solve_with(cfg.regularizer, &s, &data.y, lambda, r, tol)?;
    let mut mc_rng = stream(cfg.seed, Purpose::MonteCarlo, m, trial);
    let (risk, _) = excess_risk_both(
        &sol.alpha,
        &data,
        &cfg.kernel,
        &cfg.target,
        cfg.n_mc,
        &mut mc_rng,
    )?;
    Ok(ExperimentRecord {
        m,
        trial,
        excess_risk: risk.mean,
        mc_std_error: risk.std_error,
        lambda,
        r,
        kernel: cfg.kernel.id(),
    })
}

/// Held-out squared error on a real dataset, used where `f_rho` is unknown.
/// Reported as a proxy for the excess risk.
pub fn proxy_rate_experiment(
    kernel: &KernelSpec,
    data: &Dataset,
    m_grid: &[usize],
    gamma: f64,
    r: f64,
    trials: usize,
    seed: u64,
) -> Result<RateFit> {
    let tol = Tolerances::default();
    let n = data.len();
    if m_grid.len() < 2 || m_grid.windows(2).any(|w| w[0] >= w[1]) {
        return Err(Error::arg("m grid must be strictly increasing"));
    }
    if *m_grid.last().unwrap() >= n {
        return Err(Error::arg(format!(
            "largest m must leave held-out points (dataset has {n})"
        )));
    }
    let mut means = Vec::new();
    let mut stds = Vec::new();
    for &m in m_grid {
        let lambda = (m as f64).powf(-gamma);
        let mut errs = Vec::new();
        for trial in 0..trials {
            let mut rng = stream(seed, Purpose::Data, m, trial);
            let mut idx: Vec<usize> = (0..n).collect();
            idx.shuffle(&mut rng);
            let (tr, te) = idx.split_at(m);
            let train = data.select(tr);
            let test = data.select(te);
            let k = gram(kernel, &train.x)?;
            let s = sym_eig_with(&k, EigenMethod::default(), &tol)?;
            match solve_with(Regularizer::Rkks, &s, &train.y, lambda, r, &tol) {
                Ok(sol) => {
                    let pred = cross_gram(kernel, &test.x, &train.x)? * &sol.alpha;
                    errs.push((pred - &test.y).norm_squared() / test.len() as f64);
                }
                Err(e) => log::warn!("proxy trial m = {m}, trial {trial} skipped: {e}"),
            }
        }
        if errs.is_empty() {
            return Err(Error::Experiment(format!(
                "every proxy trial failed at m = {m}"
            )));
        }
        let (mean, sd) = mean_std(&errs);
        means.push(mean);
        stds.push(sd);
    }
    fit_rate(m_grid, &means, &stds)
}

/// Input for [`spectrum_experiment`].
#[derive(Debug, Clone, Copy)]
pub enum DataSource<'a> {
    /// Subsample rows without replacement.
    Dataset(&'a Dataset),
    /// Fresh draws.
    Law(InputLaw),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SpectrumRow {
    pub m: usize,
    pub sigma_max: f64,
    pub sigma_min: f64,
    pub p: usize,
    pub q: usize,
}

impl Tabular for SpectrumRow {
    fn header() -> Vec<&'static str> {
        vec!["m", "sigma_max", "sigma_min", "p", "q"]
    }

    fn row(&self) -> Vec<String> {
        vec![
            self.m.to_string(),
            fmt_f64(self.sigma_max),
            fmt_f64(self.sigma_min),
            self.p.to_string(),
            self.q.to_string(),
        ]
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SpectrumTable {
    pub kernel: String,
    pub rows: Vec<SpectrumRow>,
    /// Present when every size has both a positive and a negative eigenvalue.
    pub fit: Option<EigenDecayFit>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub fit_note: Option<String>,
    /// Full decomposition per size.
    #[serde(skip)]
    pub spectra: Vec<GramSpectrum>,
}

pub fn spectrum_experiment(
    kernel: &KernelSpec,
    source: DataSource<'_>,
    m_grid: &[usize],
    seed: u64,
) -> Result<SpectrumTable> {
    spectrum_experiment_with(kernel, source, m_grid, seed, &Tolerances::default())
}

pub fn spectrum_experiment_with(
    kernel: &KernelSpec,
    source: DataSource<'_>,
    m_grid: &[usize],
    seed: u64,
    tol: &Tolerances,
) -> Result<SpectrumTable> {
    if m_grid.is_empty() || m_grid.contains(&0) {
        return Err(Error::arg("m grid must be nonempty with positive sizes"));
    }
    let mut rows = Vec::new();
    let mut points = Vec::new();
    let mut spectra = Vec::new();
    for &m in m_grid {
        let mut rng = stream(seed, Purpose::Data, m, 0);
        let x = match source {
            DataSource::Law(law) => law.sample(m, &mut rng),
            DataSource::Dataset(d) => {
                if m > d.len() {
                    return Err(Error::arg(format!(
                        "m = {m} exceeds the {} available points",
                        d.len()
                    )));
                }
                let mut idx = rand::seq::index::sample(&mut rng, d.len(), m).into_vec();
                idx.sort_unstable();
                d.x.select_rows(&idx)
            }
        };
        let k = gram(kernel, &x)?;
        let s = sym_eig_with(&k, EigenMethod::default(), tol)?;
        rows.push(SpectrumRow {
            m,
            sigma_max: s.sigma_max(),
            sigma_min: s.sigma_min(),
            p: s.positive,
            q: s.negative,
        });
        points.push(DecayPoint::from_spectrum(&s));
        spectra.push(s);
    }
    let (fit, fit_note) = match fit_eigen_decay(&points) {
        Ok(f) => (Some(f), None),
        Err(e) => (None, Some(e.to_string())),
    };
    Ok(SpectrumTable {
        kernel: kernel.id(),
        rows,
        fit,
        fit_note,
        spectra,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CvOptions {
    pub regularizer: Regularizer,
    /// Clip level for held-out predictions; `None` disables clipping.
    pub clip: Option<f64>,
    pub tolerances: Tolerances,
}

impl Default for CvOptions {
    fn default() -> Self {
        CvOptions {
            regularizer: Regularizer::Rkks,
            clip: Some(1.0),
            tolerances: Tolerances::default(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CvCell {
    pub lambda: f64,
    pub r: f64,
    pub risk: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub failure: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CvResult {
    pub lambda: f64,
    pub r: f64,
    pub risk: f64,
    pub table: Vec<CvCell>,
}

pub fn cv_select(
    kernel: &KernelSpec,
    data: &Dataset,
    lambda_grid: &[f64],
    r_grid: &[f64],
    folds: usize,
    seed: u64,
) -> Result<CvResult> {
    cv_select_with(
        kernel,
        data,
        lambda_grid,
        r_grid,
        folds,
        seed,
        &CvOptions::default(),
    )
}

/// k-fold CV over the `(lambda, r)` grid. The table is ordered by
/// `(lambda, r)` ascending and ties go to the first cell in that order.
pub fn cv_select_with(
    kernel: &KernelSpec,
    data: &Dataset,
    lambda_grid: &[f64],
    r_grid: &[f64],
    folds: usize,
    seed: u64,
    opts: &CvOptions,
) -> Result<CvResult> {
    let tol = opts.tolerances;
    let n = data.len();
    if folds < 2 || folds > n {
        return Err(Error::arg(format!(
            "folds must lie in [2, {n}], got {folds}"
        )));
    }
    if lambda_grid.is_empty() || r_grid.is_empty() {
        return Err(Error::arg("CV grids must be nonempty"));
    }
    if lambda_grid
        .iter()
        .chain(r_grid)
        .any(|v| !(v.is_finite() && *v > 0.0))
    {
        return Err(Error::arg("CV grid values must be positive"));
    }
    let mut lambdas = lambda_grid.to_vec();
    let mut radii = r_grid.to_vec();
    lambdas.sort_by(f64::total_cmp);
    radii.sort_by(f64::total_cmp);

    let mut rng = stream(seed, Purpose::Folds, n, 0);
    let mut perm: Vec<usize> = (0..n).collect();
    perm.shuffle(&mut rng);

    let cells = lambdas.len() * radii.len();
    let mut sse = vec![0.0; cells];
    let mut failure: Vec<Option<String>> = vec![None; cells];
    for f in 0..folds {
        let lo = f * n / folds;
        let hi = (f + 1) * n / folds;
        let mut test_idx = perm[lo..hi].to_vec();
        let mut train_idx: Vec<usize> = perm[..lo].iter().chain(&perm[hi..]).copied().collect();
        test_idx.sort_unstable();
        train_idx.sort_unstable();
        let train = data.select(&train_idx);
        let test = data.select(&test_idx);
        let k = gram(kernel, &train.x)?;
        let s = sym_eig_with(&k, EigenMethod::default(), &tol)?;
        let cross = cross_gram(kernel, &test.x, &train.x)?;
        for (li, &lambda) in lambdas.iter().enumerate() {
            for (ri, &r) in radii.iter().enumerate() {
                let c = li * radii.len() + ri;
                if failure[c].is_some() {
                    continue;
                }
                match solve_with(opts.regularizer, &s, &train.y, lambda, r, &tol) {
                    Ok(sol) => {
                        let pred = &cross * &sol.alpha;
                        sse[c] += pred
                            .iter()
                            .zip(test.y.iter())
                            .map(|(p, y)| {
                                let p = opts.clip.map_or(*p, |b| p.clamp(-b, b));
                                (p - y).powi(2)
                            })
                            .sum::<f64>();
                    }
                    Err(e) => failure[c] = Some(e.to_string()),
                }
            }
        }
    }

    let mut table = Vec::with_capacity(cells);
    let mut best: Option<(f64, f64, f64)> = None;
    for (li, &lambda) in lambdas.iter().enumerate() {
        for (ri, &r) in radii.iter().enumerate() {
            let c = li * radii.len() + ri;
            let risk = failure[c].is_none().then(|| sse[c] / n as f64);
            if let Some(v) = risk {
                if best.is_none_or(|(b, _, _)| v < b) {
                    best = Some((v, lambda, r));
                }
            }
            table.push(CvCell {
                lambda,
                r,
                risk,
                failure: failure[c].clone(),
            });
        }
    }
    let (risk, lambda, r) = best.ok_or_else(|| Error::Experiment("every CV cell failed".into()))?;
    Ok(CvResult {
        lambda,
        r,
        risk,
        table,
    })
}
