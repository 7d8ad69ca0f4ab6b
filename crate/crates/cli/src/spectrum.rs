use clap::Args;
use krein_ridge::experiments::{spectrum_experiment_with, DataSource};
use krein_ridge::io::{write_csv, write_json, write_spectrum};
use krein_ridge::plot::{Chart, Series};
use serde::{Deserialize, Serialize};

use crate::config::{parse_kernel, DataArgs, KernelChoice, LawKind};
use crate::{Command, Ctx, Status};

#[derive(Args, Debug, Clone, Serialize, Deserialize)]
pub struct SpectrumArgs {
    /// Kernel name with optional parameters, e.g. `tl1:tau=3.5`.
    #[arg(long, default_value = "log", value_parser = parse_kernel)]
    pub kernel: KernelChoice,
    #[command(flatten)]
    pub input: DataArgs,
    /// Input law without `--data` (default: sphere for sphere-only kernels, else cube).
    #[arg(long, value_enum)]
    pub law: Option<LawKind>,
    /// Input dimension without `--data`.
    #[arg(long, default_value_t = 5)]
    pub dim: usize,
    /// Sample sizes.
    #[arg(long, value_delimiter = ',', default_values_t = [50, 100, 200, 400, 800])]
    pub m: Vec<usize>,
    /// Also write SVG charts.
    #[arg(long)]
    pub plot: bool,
}

pub fn run(args: &mut SpectrumArgs, ctx: &Ctx) -> krein_ridge::Result<Status> {
    let data = args.input.load()?;
    let dim = data.as_ref().map_or(args.dim, |d| d.dim());
    let kernel = args.kernel.resolve(dim)?;
    let source = match &data {
        Some(d) => DataSource::Dataset(d),
        None => {
            let law = *args.law.get_or_insert(if kernel.requires_unit_sphere() {
                LawKind::Sphere
            } else {
                LawKind::Cube
            });
            DataSource::Law(law.law(args.dim))
        }
    };
    ctx.echo(Command::Spectrum(args.clone()))?;

    let table = spectrum_experiment_with(&kernel, source, &args.m, ctx.seed, &ctx.tolerances)?;
    write_csv(&table.rows, &ctx.path("spectrum.csv"))?;
    write_json(&table, &ctx.path("spectrum.json"))?;
    for s in &table.spectra {
        write_spectrum(s, &ctx.path(&format!("eigenvalues/m{}.csv", s.dim())))?;
    }

    println!(
        "{:>6} {:>14} {:>14} {:>6} {:>6}",
        "m", "sigma_max", "sigma_min", "p", "q"
    );
    for r in &table.rows {
        println!(
            "{:>6} {:>14.6e} {:>14.6e} {:>6} {:>6}",
            r.m, r.sigma_max, r.sigma_min, r.p, r.q
        );
    }
    match (&table.fit, &table.fit_note) {
        (Some(f), _) => println!(
            "decay fit: eta1 = {:.4} (r2 {:.3}), eta2 = {:.4} (r2 {:.3})",
            f.eta1, f.r2_pos, f.eta2, f.r2_neg
        ),
        (None, Some(note)) => println!("decay fit unavailable: {note}"),
        (None, None) => {}
    }

    if args.plot {
        let ms: Vec<f64> = table.rows.iter().map(|r| r.m as f64).collect();
        let mut decay = Chart::new(
            format!("eigenvalue growth, {}", table.kernel),
            "m",
            "|sigma|",
        )
        .log_log();
        decay.push(Series::new(
            "sigma_max",
            ms.clone(),
            table.rows.iter().map(|r| r.sigma_max).collect(),
        ));
        decay.push(
            Series::new(
                "|sigma_min|",
                ms,
                table.rows.iter().map(|r| -r.sigma_min).collect(),
            )
            .dashed(),
        );
        decay.write(&ctx.path("spectrum-decay.svg"))?;

        let mut dist = Chart::new(
            format!("sorted eigenvalues, {}", table.kernel),
            "index",
            "sigma",
        );
        for s in &table.spectra {
            let idx: Vec<f64> = (1..=s.dim()).map(|i| i as f64).collect();
            dist.push(Series::new(
                format!("m = {}", s.dim()),
                idx,
                s.values.iter().copied().collect(),
            ));
        }
        dist.write(&ctx.path("eigenvalues.svg"))?;
    }
    Ok(Status::Ok)
}
