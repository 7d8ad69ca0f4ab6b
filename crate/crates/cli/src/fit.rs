use std::path::{Path, PathBuf};

use clap::Args;
use krein_ridge::io::{fmt_f64, write_csv, write_json, Tabular};
use krein_ridge::solver::solve_with;
use krein_ridge::spectral::{sym_eig_with, EigenMethod};
use krein_ridge::{gram, predict, Error, Regularizer};
use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::config::{parse_eigen, parse_kernel, parse_reg, DataArgs, KernelChoice};
use crate::{Command, Ctx, Status};

#[derive(Args, Debug, Clone, Serialize, Deserialize)]
pub struct FitArgs {
    /// Regularizer: rkks (alpha^T K alpha) or t ((1/m) alpha^T K^2 alpha).
    #[arg(long = "reg", default_value = "rkks", value_parser = parse_reg)]
    pub reg: Regularizer,
    /// Kernel for `--data`.
    #[arg(long, value_parser = parse_kernel)]
    pub kernel: Option<KernelChoice>,
    #[command(flatten)]
    pub input: DataArgs,
    /// Precomputed Gram matrix (CSV or whitespace separated, no header); needs `--y`.
    #[arg(long, conflicts_with = "data")]
    pub gram: Option<PathBuf>,
    /// Targets for `--gram`, separated by commas, spaces or newlines.
    #[arg(long, requires = "gram")]
    pub y: Option<PathBuf>,
    /// Extra points to predict at, in the format of `--data` (labels are echoed).
    #[arg(long, requires = "data")]
    pub predict: Option<PathBuf>,
    #[arg(long)]
    pub lambda: Option<f64>,
    #[arg(long)]
    pub r: Option<f64>,
    /// Eigensolver backend: dense or jacobi.
    #[arg(long, default_value = "dense", value_parser = parse_eigen)]
    pub eigen: EigenMethod,
}

#[derive(Debug, Clone)]
struct PredictionRow {
    set: &'static str,
    index: usize,
    prediction: f64,
    label: Option<f64>,
}

impl Tabular for PredictionRow {
    fn header() -> Vec<&'static str> {
        vec!["set", "index", "prediction", "label"]
    }

    fn row(&self) -> Vec<String> {
        vec![
            self.set.to_string(),
            self.index.to_string(),
            fmt_f64(self.prediction),
            self.label.map(fmt_f64).unwrap_or_default(),
        ]
    }
}

fn numbers(path: &Path) -> krein_ridge::Result<Vec<Vec<f64>>> {
    let text = std::fs::read_to_string(path).map_err(|e| Error::Io {
        path: path.to_path_buf(),
        source: e,
    })?;
    let mut rows = Vec::new();
    for (i, line) in text.lines().enumerate() {
        let line = line.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let row: Result<Vec<f64>, _> = line
            .split(|c: char| c == ',' || c.is_whitespace())
            .filter(|t| !t.is_empty())
            .map(str::parse::<f64>)
            .collect();
        rows.push(row.map_err(|e| Error::Parse {
            path: path.to_path_buf(),
            line: i + 1,
            message: e.to_string(),
        })?);
    }
    if rows.is_empty() {
        return Err(Error::Parse {
            path: path.to_path_buf(),
            line: 1,
            message: "empty file".into(),
        });
    }
    Ok(rows)
}

fn read_matrix(path: &Path) -> krein_ridge::Result<DMatrix<f64>> {
    let rows = numbers(path)?;
    let n = rows.len();
    if let Some(bad) = rows.iter().position(|r| r.len() != n) {
        return Err(Error::Argument(format!(
            "{}: Gram matrix must be square, row {} has {} entries for {n} rows",
            path.display(),
            bad + 1,
            rows[bad].len()
        )));
    }
    Ok(DMatrix::from_row_iterator(n, n, rows.into_iter().flatten()))
}

fn read_vector(path: &Path) -> krein_ridge::Result<DVector<f64>> {
    Ok(DVector::from_vec(numbers(path)?.concat()))
}

pub fn run(args: &mut FitArgs, ctx: &Ctx) -> krein_ridge::Result<Status> {
    let lambda = args
        .lambda
        .ok_or_else(|| Error::Argument("fit needs --lambda".into()))?;
    let r = args
        .r
        .ok_or_else(|| Error::Argument("fit needs --r".into()))?;

    // (gram, y, training data for prediction)
    let (k, y, train) = if let Some(gpath) = &args.gram {
        let ypath = args
            .y
            .as_ref()
            .ok_or_else(|| Error::Argument("--gram needs --y".into()))?;
        (read_matrix(gpath)?, read_vector(ypath)?, None)
    } else {
        let data = args.input.load()?.ok_or_else(|| {
            Error::Argument("fit needs either --data with --kernel or --gram with --y".into())
        })?;
        let choice = args
            .kernel
            .as_mut()
            .ok_or_else(|| Error::Argument("--data needs --kernel".into()))?;
        let spec = choice.resolve(data.dim())?;
        (gram(&spec, &data.x)?, data.y.clone(), Some((spec, data)))
    };
    if y.len() != k.nrows() {
        return Err(Error::Argument(format!(
            "y has {} entries but the Gram matrix is {}x{}",
            y.len(),
            k.nrows(),
            k.ncols()
        )));
    }
    ctx.echo(Command::Fit(args.clone()))?;

    let s = sym_eig_with(&k, args.eigen, &ctx.tolerances)?;
    let sol = solve_with(args.reg, &s, &y, lambda, r, &ctx.tolerances)?;
    write_json(&sol, &ctx.path("solution.json"))?;

    let fitted = &k * &sol.alpha;
    let mut rows: Vec<PredictionRow> = fitted
        .iter()
        .zip(y.iter())
        .enumerate()
        .map(|(index, (&prediction, &label))| PredictionRow {
            set: "train",
            index,
            prediction,
            label: Some(label),
        })
        .collect();
    if let (Some(path), Some((spec, data))) = (&args.predict, &train) {
        let new = krein_ridge::io::load(&args.input.source(path)?)?;
        let pred = predict(&sol.alpha, spec, &data.x, &new.x)?;
        rows.extend(pred.iter().zip(new.y.iter()).enumerate().map(
            |(index, (&prediction, &label))| PredictionRow {
                set: "new",
                index,
                prediction,
                label: Some(label),
            },
        ));
    }
    write_csv(&rows, &ctx.path("predictions.csv"))?;

    println!("{}", serde_json::to_string_pretty(&sol)?);
    Ok(Status::Ok)
}
