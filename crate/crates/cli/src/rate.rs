use clap::Args;
use krein_ridge::experiments::{
    fit_rate, proxy_rate_experiment, rate_experiment, CvResult, RRule, RateConfig, RateFit,
    SyntheticTarget, DEFAULT_ANCHORS, DEFAULT_DIM, DEFAULT_NOISE, DEFAULT_TARGET_SEED,
    DEFAULT_TARGET_WIDTH,
};
use krein_ridge::io::{write_csv, write_json};
use krein_ridge::plot::{Chart, Series};
use krein_ridge::theory::{theta_rate, RateParams, ThetaResult};
use krein_ridge::{Error, KernelSpec, Regularizer};
use serde::{Deserialize, Serialize};

use crate::config::{parse_kernel, parse_reg, parse_theory, DataArgs, KernelChoice, LawKind};
use crate::{Command, Ctx, Status};

/// Slope the planted self-test must reproduce.
const PLANTED_SLOPE: f64 = -0.5;
const PLANTED_TOL: f64 = 1e-12;

#[derive(Args, Debug, Clone, Serialize, Deserialize)]
pub struct TargetArgs {
    /// Input law of the synthetic target.
    #[arg(long, value_enum, default_value = "cube")]
    pub law: LawKind,
    #[arg(long, default_value_t = DEFAULT_DIM)]
    pub dim: usize,
    /// Number of Gaussian anchors in the target expansion.
    #[arg(long, default_value_t = DEFAULT_ANCHORS)]
    pub anchors: usize,
    /// Standard deviation of the additive label noise.
    #[arg(long, default_value_t = DEFAULT_NOISE)]
    pub noise: f64,
    /// Gaussian width of the target expansion.
    #[arg(long, default_value_t = DEFAULT_TARGET_WIDTH)]
    pub target_width: f64,
    #[arg(long, default_value_t = DEFAULT_TARGET_SEED)]
    pub target_seed: u64,
}

#[derive(Args, Debug, Clone, Serialize, Deserialize)]
pub struct RateArgs {
    #[arg(long, default_value = "delta_gauss", value_parser = parse_kernel)]
    pub kernel: KernelChoice,
    #[arg(long, value_delimiter = ',', default_values_t = [50, 100, 200, 400, 800])]
    pub m: Vec<usize>,
    /// `lambda = m^-gamma`.
    #[arg(long, default_value_t = 1.0)]
    pub gamma: f64,
    /// Fixed radius; without it `r` is cross-validated once at the smallest m.
    #[arg(long)]
    pub r: Option<f64>,
    #[arg(long, value_delimiter = ',', default_values_t = [0.1, 0.2, 0.3, 0.4, 0.5, 0.6, 0.8, 1.0])]
    pub r_grid: Vec<f64>,
    #[arg(long, default_value_t = 5)]
    pub folds: usize,
    #[arg(long, default_value_t = 100)]
    pub trials: usize,
    /// Monte-Carlo points per excess-risk estimate.
    #[arg(long, default_value_t = 2000)]
    pub n_mc: usize,
    #[arg(long = "reg", default_value = "rkks", value_parser = parse_reg)]
    pub reg: Regularizer,
    #[command(flatten)]
    pub target: TargetArgs,
    /// Real dataset: report held-out MSE ("proxy risk") instead of excess risk; needs `--r`.
    #[command(flatten)]
    pub input: DataArgs,
    /// Overlay the theoretical exponent for `gamma,beta,s,eta,eps`.
    #[arg(long, value_parser = parse_theory)]
    pub theory: Option<RateParams>,
    /// Self-test of the slope fit on exact `m^-1/2` risks; runs no experiment.
    #[arg(long)]
    pub planted: bool,
    #[arg(long)]
    pub plot: bool,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
struct RateReport {
    kernel: String,
    /// `excess`, `proxy` or `planted`.
    risk: String,
    fit: RateFit,
    r: Option<f64>,
    skipped: usize,
    cv: Option<CvResult>,
    theory: Option<ThetaResult>,
}

pub fn run(args: &mut RateArgs, ctx: &Ctx) -> krein_ridge::Result<Status> {
    // fail fast on an inadmissible theory tuple
    let theory = args.theory.as_ref().map(theta_rate).transpose()?;

    if args.planted {
        ctx.echo(Command::Rate(args.clone()))?;
        return planted(args, ctx, theory);
    }

    let data = args.input.load()?;
    let dim = data.as_ref().map_or(args.target.dim, |d| d.dim());
    let kernel = args.kernel.resolve(dim)?;
    let report = match &data {
        Some(d) => {
            let r = args
                .r
                .ok_or_else(|| Error::Argument("a dataset rate run needs a fixed --r".into()))?;
            ctx.echo(Command::Rate(args.clone()))?;
            let fit =
                proxy_rate_experiment(&kernel, d, &args.m, args.gamma, r, args.trials, ctx.seed)?;
            RateReport {
                kernel: kernel.id(),
                risk: "proxy".into(),
                fit,
                r: Some(r),
                skipped: 0,
                cv: None,
                theory,
            }
        }
        None => {
            let cfg = synthetic_config(args, kernel, ctx)?;
            ctx.echo(Command::Rate(args.clone()))?;
            let out = rate_experiment(&cfg)?;
            write_csv(&out.records, &ctx.path("records.csv"))?;
            RateReport {
                kernel: kernel.id(),
                risk: "excess".into(),
                fit: out.fit,
                r: Some(out.r),
                skipped: out.skipped,
                cv: out.cv,
                theory,
            }
        }
    };
    finish(&report, args, ctx)?;
    Ok(Status::Ok)
}

fn synthetic_config(
    args: &RateArgs,
    kernel: KernelSpec,
    ctx: &Ctx,
) -> krein_ridge::Result<RateConfig> {
    let t = &args.target;
    let target = SyntheticTarget::kernel_expansion(
        t.law.law(t.dim),
        KernelSpec::Gaussian {
            sigma: t.target_width,
        },
        t.anchors,
        t.noise,
        t.target_seed,
    )?;
    let mut cfg = RateConfig::new(kernel, target);
    cfg.m_grid = args.m.clone();
    cfg.gamma = args.gamma;
    cfg.r_rule = match args.r {
        Some(r) => RRule::Fixed { r },
        None => RRule::Cv {
            r_grid: args.r_grid.clone(),
            folds: args.folds,
        },
    };
    cfg.trials = args.trials;
    cfg.seed = ctx.seed;
    cfg.n_mc = args.n_mc;
    cfg.regularizer = args.reg;
    cfg.tolerances = ctx.tolerances;
    Ok(cfg)
}

fn planted(args: &RateArgs, ctx: &Ctx, theory: Option<ThetaResult>) -> krein_ridge::Result<Status> {
    let risks: Vec<f64> = args
        .m
        .iter()
        .map(|&m| 3.0 * (m as f64).powf(PLANTED_SLOPE))
        .collect();
    let fit = fit_rate(&args.m, &risks, &vec![0.0; risks.len()])?;
    let ok = (fit.slope - PLANTED_SLOPE).abs() <= PLANTED_TOL;
    let report = RateReport {
        kernel: "planted".into(),
        risk: "planted".into(),
        fit,
        r: None,
        skipped: 0,
        cv: None,
        theory,
    };
    finish(&report, args, ctx)?;
    if ok {
        println!("planted self-test: PASS");
        Ok(Status::Ok)
    } else {
        println!("planted self-test: FAIL (slope {:.17e})", report.fit.slope);
        Ok(Status::ChecksFailed)
    }
}

fn finish(report: &RateReport, args: &RateArgs, ctx: &Ctx) -> krein_ridge::Result<()> {
    write_json(report, &ctx.path("ratefit.json"))?;
    let f = &report.fit;
    println!("{:>6} {:>14} {:>14}", "m", "mean_risk", "std");
    for ((m, mean), sd) in f.m_grid.iter().zip(&f.mean_risks).zip(&f.std_risks) {
        println!("{m:>6} {mean:>14.6e} {sd:>14.6e}");
    }
    println!(
        "slope = {:.4}, r2 = {:.4} ({} risk)",
        f.slope, f.r2, report.risk
    );
    if let Some(t) = &report.theory {
        println!(
            "theoretical exponent = {:.4} ({:?} regime)",
            t.theta, t.regime
        );
    }

    if args.plot {
        let ms: Vec<f64> = f.m_grid.iter().map(|&m| m as f64).collect();
        let mut chart =
            Chart::new(format!("learning curve, {}", report.kernel), "m", "risk").log_log();
        chart.push(Series::new("observed", ms.clone(), f.mean_risks.clone()));
        let line: Vec<f64> = ms
            .iter()
            .map(|m| (f.intercept + f.slope * m.ln()).exp())
            .collect();
        chart.push(Series::new(format!("fit, slope {:.3}", f.slope), ms.clone(), line).dashed());
        if let Some(t) = &report.theory {
            // anchored at the first observed point
            let (m0, r0) = (ms[0], f.mean_risks[0]);
            let th: Vec<f64> = ms.iter().map(|m| r0 * (m / m0).powf(-t.theta)).collect();
            chart.push(Series::new(format!("theory, m^-{:.3}", t.theta), ms, th).dashed());
        }
        chart.write(&ctx.path("rate.svg"))?;
    }
    Ok(())
}
