//! Learning curve on the default synthetic target.
//!
//! Environment overrides: `KERNEL` (e.g. `delta_gauss`, `log`), `TRIALS`,
//! `DIM`, `WIDTH` (target Gaussian width), `LAW` (`cube`/`sphere`),
//! `R` (fixed radius; CV when unset), `NOISE`, `SEED`, `GRID`.

use krein_ridge::experiments::{
    rate_experiment, InputLaw, RRule, RateConfig, SyntheticTarget, DEFAULT_ANCHORS,
};
use krein_ridge::KernelSpec;

fn env<T: std::str::FromStr>(key: &str, default: T) -> T {
    std::env::var(key)
        .ok()
        .and_then(|v| v.parse().ok())
        .unwrap_or(default)
}

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let dim: usize = env("DIM", krein_ridge::experiments::DEFAULT_DIM);
    let law = match std::env::var("LAW").as_deref() {
        Ok("sphere") => InputLaw::UniformSphere { dim },
        _ => InputLaw::UniformCube { dim },
    };
    let width: f64 = env("WIDTH", krein_ridge::experiments::DEFAULT_TARGET_WIDTH);
    let noise: f64 = env("NOISE", krein_ridge::experiments::DEFAULT_NOISE);
    let target = SyntheticTarget::kernel_expansion(
        law,
        KernelSpec::Gaussian { sigma: width },
        DEFAULT_ANCHORS,
        noise,
        env("TSEED", krein_ridge::experiments::DEFAULT_TARGET_SEED),
    )?;
    let kernel = KernelSpec::with_defaults(
        &std::env::var("KERNEL").unwrap_or_else(|_| "delta_gauss".into()),
        dim,
    )?;
    let mut cfg = RateConfig::new(kernel, target);
    cfg.trials = env("TRIALS", 20);
    cfg.seed = env("SEED", 0);
    if let Ok(g) = std::env::var("GRID") {
        cfg.m_grid = g.split(',').map(|v| v.parse().unwrap()).collect();
    }
    if let Ok(r) = std::env::var("R") {
        cfg.r_rule = RRule::Fixed { r: r.parse()? };
    }
    let t = std::time::Instant::now();
    let out = rate_experiment(&cfg)?;
    println!(
        "kernel={} r={:.3} slope={:.4} r2={:.4} risks={:?} ({:.1}s)",
        cfg.kernel.id(),
        out.r,
        out.fit.slope,
        out.fit.r2,
        out.fit
            .mean_risks
            .iter()
            .map(|v| format!("{v:.4e}"))
            .collect::<Vec<_>>(),
        t.elapsed().as_secs_f64()
    );
    Ok(())
}
