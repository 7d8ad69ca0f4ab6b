//! Self-checks against brute-force oracles and algebraic identities.

use clap::Args;
use krein_ridge::io::write_json;
use krein_ridge::rng::{stream, Purpose, Stream};
use krein_ridge::solver::SphereProblem;
use krein_ridge::spectral::{pseudo_inverse, sym_eig_with, EigenMethod};
use krein_ridge::theory::{henrici_certificate, hypothesis_error_with};
use krein_ridge::{solve_rkks_with, solve_t_reg_with, Error, Tolerances};
use nalgebra::{DMatrix, DVector};
use rand::Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::{Command, Ctx, Status};

const ORACLE_SLACK: f64 = 1e-3;
const RESIDUAL_TOL: f64 = 1e-6;
const IDENTITY_TOL: f64 = 1e-8;
const PINV_TOL: f64 = 1e-10;
const MU_TILDE_TOL: f64 = 1e-12;

#[derive(Args, Debug, Clone, Serialize, Deserialize)]
pub struct VerifyArgs {
    /// Problem size; the grid oracle runs for m <= 3.
    #[arg(long, default_value_t = 3)]
    pub m: usize,
    #[arg(long, default_value_t = 50)]
    pub trials: usize,
    /// Grid points for the sphere oracle.
    #[arg(long, default_value_t = 1_000_000)]
    pub grid: usize,
    /// Negative control: shift mu by ten times the perturbation bound before certifying.
    #[arg(long)]
    pub perturb_mu: bool,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
struct CheckRow {
    check: String,
    passed: usize,
    total: usize,
    /// Worst observed value of the checked quantity.
    worst: f64,
}

impl CheckRow {
    fn new(check: &str) -> Self {
        CheckRow {
            check: check.into(),
            passed: 0,
            total: 0,
            worst: f64::NEG_INFINITY,
        }
    }

    fn record(&mut self, ok: bool, value: f64) {
        self.total += 1;
        self.passed += usize::from(ok);
        if value.is_nan() || value > self.worst {
            self.worst = value;
        }
    }

    fn ok(&self) -> bool {
        self.passed == self.total
    }
}

/// Random symmetric indefinite matrix with eigenvalues bounded away from zero.
fn instance(rng: &mut Stream, m: usize, tol: &Tolerances) -> krein_ridge::Result<DMatrix<f64>> {
    for _ in 0..1000 {
        let a = DMatrix::from_fn(m, m, |_, _| rng.sample::<f64, _>(StandardNormal));
        let k = (&a + a.transpose()) * 0.5;
        let s = sym_eig_with(&k, EigenMethod::Jacobi, tol)?;
        let indefinite = m == 1 || (s.positive > 0 && s.negative > 0);
        if indefinite && s.values.iter().all(|v| v.abs() > 0.05) {
            return Ok(k);
        }
    }
    Err(Error::Numeric(
        "could not draw a well-conditioned indefinite instance".into(),
    ))
}

/// Unit vectors on a grid of `S^{m-1}`, `m <= 3`, stored as padded triples.
fn unit_directions(m: usize, n: usize) -> Vec<[f64; 3]> {
    match m {
        1 => vec![[1.0, 0.0, 0.0], [-1.0, 0.0, 0.0]],
        2 => (0..n)
            .map(|i| {
                let t = std::f64::consts::TAU * i as f64 / n as f64;
                [t.cos(), t.sin(), 0.0]
            })
            .collect(),
        _ => {
            // Fibonacci lattice on the 2-sphere
            let golden = std::f64::consts::PI * (3.0 - 5f64.sqrt());
            (0..n)
                .map(|i| {
                    let z = 1.0 - 2.0 * (i as f64 + 0.5) / n as f64;
                    let rho = (1.0 - z * z).sqrt();
                    let t = golden * i as f64;
                    [rho * t.cos(), rho * t.sin(), z]
                })
                .collect()
        }
    }
}

/// Minimum of the objective over `K alpha = sqrt(m) r u`, `u` on a grid of the unit sphere.
fn grid_oracle(k: &DMatrix<f64>, y: &DVector<f64>, lambda: f64, r: f64, dirs: &[[f64; 3]]) -> f64 {
    let m = y.len();
    let mf = m as f64;
    let kinv = k.clone().try_inverse().expect("instance is nonsingular");
    let scale = mf.sqrt() * r;
    let mut best = f64::INFINITY;
    for u in dirs {
        let mut fit = 0.0;
        let mut reg = 0.0;
        for i in 0..m {
            let vi = scale * u[i];
            fit += (vi - y[i]) * (vi - y[i]);
            for j in 0..m {
                reg += vi * kinv[(i, j)] * scale * u[j];
            }
        }
        best = best.min(fit / mf + lambda * reg);
    }
    best
}

pub fn run(args: &mut VerifyArgs, ctx: &Ctx) -> krein_ridge::Result<Status> {
    if args.m == 0 || args.trials == 0 {
        return Err(Error::Argument("--m and --trials must be positive".into()));
    }
    ctx.echo(Command::Verify(args.clone()))?;
    let tol = &ctx.tolerances;
    let m = args.m;
    let dirs = (m <= 3).then(|| unit_directions(m, args.grid));

    let mut oracle = CheckRow::new("grid oracle");
    let mut residual = CheckRow::new("constraint residual");
    let mut henrici = CheckRow::new(if args.perturb_mu {
        "henrici (perturbed mu)"
    } else {
        "henrici certificate"
    });
    let mut p_sign = CheckRow::new("P >= 0");
    let mut p_split = CheckRow::new("P1 + P2 = direct");
    let mut mu_tilde = CheckRow::new("mu_tilde closed form");
    let mut pinv = CheckRow::new("moore-penrose");

    for trial in 0..args.trials {
        let mut rng = stream(ctx.seed, Purpose::Instance, m, trial);
        let k = instance(&mut rng, m, tol)?;
        let y = DVector::from_fn(m, |_, _| rng.sample::<f64, _>(StandardNormal));
        let lambda = if trial % 2 == 0 { 0.01 } else { 0.1 };
        let r = 1.0;
        let s = sym_eig_with(&k, EigenMethod::Dense, tol)?;

        let sol = solve_rkks_with(&s, &y, lambda, r, tol)?;
        residual.record(
            sol.constraint_residual.abs() <= RESIDUAL_TOL,
            sol.constraint_residual.abs(),
        );
        if let Some(d) = &dirs {
            let best = grid_oracle(&k, &y, lambda, r, d);
            let excess = sol.objective - best;
            oracle.record(excess <= ORACLE_SLACK, excess);
        }

        let cert = henrici_certificate(&s, &y, lambda, r, sol.mu);
        let cert = if args.perturb_mu {
            henrici_certificate(&s, &y, lambda, r, sol.mu - 10.0 * cert.bound)
        } else {
            cert
        };
        henrici.record(cert.passed, cert.gap / cert.bound);

        let h = hypothesis_error_with(&s, Some(&k), &y, lambda, r, tol)?.report;
        p_sign.record(h.p >= -IDENTITY_TOL, -h.p);
        let gap = (h.p - h.direct_diff).abs() / h.direct_diff.abs().max(1.0);
        p_split.record(gap <= IDENTITY_TOL, gap);

        let t = solve_t_reg_with(&s, &y, lambda, r, tol)?;
        let problem = SphereProblem::new(&s, &y, lambda, r)?;
        let mf = m as f64;
        let err = (problem.mu_tilde() + y.norm() / (mf * mf.sqrt() * r)).abs();
        let ok = err <= MU_TILDE_TOL && t.constraint_residual.abs() <= RESIDUAL_TOL;
        mu_tilde.record(ok, err);

        // a singular variant: drop the smallest-magnitude eigenvalue
        let mut values = s.values.clone();
        let j = values.iamin();
        values[j] = 0.0;
        let ks = &s.vectors * DMatrix::from_diagonal(&values) * s.vectors.transpose();
        let ks = (&ks + ks.transpose()) * 0.5;
        let ss = sym_eig_with(&ks, EigenMethod::Dense, tol)?;
        let kp = pseudo_inverse(&ss);
        let rel = |a: &DMatrix<f64>, b: &DMatrix<f64>| (a - b).norm() / b.norm().max(1.0);
        let worst = [
            rel(&(&ks * &kp * &ks), &ks),
            rel(&(&kp * &ks * &kp), &kp),
            rel(&(&ks * &kp).transpose(), &(&ks * &kp)),
            rel(&(&kp * &ks).transpose(), &(&kp * &ks)),
        ]
        .into_iter()
        .fold(0.0, f64::max);
        pinv.record(worst <= PINV_TOL, worst);
    }

    let mut rows = vec![residual, henrici, p_sign, p_split, mu_tilde, pinv];
    if dirs.is_some() {
        rows.insert(0, oracle);
    } else {
        println!("grid oracle skipped: only available for m <= 3");
    }
    println!(
        "{:<24} {:>8} {:>8} {:>12}  status",
        "check", "passed", "total", "worst"
    );
    for row in &rows {
        println!(
            "{:<24} {:>8} {:>8} {:>12.3e}  {}",
            row.check,
            row.passed,
            row.total,
            row.worst,
            if row.ok() { "PASS" } else { "FAIL" }
        );
    }
    write_json(&rows, &ctx.path("verify.json"))?;
    Ok(if rows.iter().all(CheckRow::ok) {
        Status::Ok
    } else {
        Status::ChecksFailed
    })
}
