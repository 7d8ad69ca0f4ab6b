//! Resolved run configuration, `--config` merging and tolerance overrides.

use std::path::{Path, PathBuf};
use std::str::FromStr;

use clap::{Args, ValueEnum};
use krein_ridge::experiments::InputLaw;
use krein_ridge::io::{DataFormat, DatasetSource, Normalize};
use krein_ridge::spectral::EigenMethod;
use krein_ridge::theory::RateParams;
use krein_ridge::{Error, KernelSpec, Regularizer, Tolerances};
use serde::{Deserialize, Serialize};
use serde_json::Value;

use crate::Command;

/// A kernel given either by name (`log`, `tl1:tau=2`) or as a resolved spec.
///
/// Names are resolved once the input dimension is known, and the echo
/// always records the resolved spec.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum KernelChoice {
    Spec(KernelSpec),
    Name(String),
}

impl KernelChoice {
    pub fn resolve(&mut self, dim: usize) -> krein_ridge::Result<KernelSpec> {
        let spec = match self {
            KernelChoice::Spec(s) => {
                s.validate()?;
                *s
            }
            KernelChoice::Name(n) => KernelSpec::parse(n, dim)?,
        };
        *self = KernelChoice::Spec(spec);
        Ok(spec)
    }
}

pub fn parse_kernel(s: &str) -> Result<KernelChoice, String> {
    // reject unknown families at parse time; parameters are checked on resolve
    let family = s.split(':').next().unwrap_or_default();
    KernelSpec::with_defaults(family, 1).map_err(|e| e.to_string())?;
    Ok(KernelChoice::Name(s.to_string()))
}

pub fn parse_reg(s: &str) -> Result<Regularizer, String> {
    match s {
        "rkks" | "krein" => Ok(Regularizer::Rkks),
        "t" | "t-reg" | "covariance" => Ok(Regularizer::T),
        other => Err(format!(
            "unknown regularizer '{other}' (expected rkks or t)"
        )),
    }
}

pub fn parse_eigen(s: &str) -> Result<EigenMethod, String> {
    match s {
        "dense" => Ok(EigenMethod::Dense),
        "jacobi" => Ok(EigenMethod::Jacobi),
        other => Err(format!(
            "unknown eigensolver '{other}' (expected dense or jacobi)"
        )),
    }
}

pub fn parse_normalize(s: &str) -> Result<Normalize, String> {
    Normalize::from_str(s).map_err(|e| e.to_string())
}

pub fn parse_format(s: &str) -> Result<DataFormat, String> {
    match s {
        "csv" => Ok(DataFormat::Csv),
        "svmlight" | "libsvm" | "svm" => Ok(DataFormat::Svmlight),
        other => Err(format!(
            "unknown data format '{other}' (expected csv or svmlight)"
        )),
    }
}

pub fn parse_theory(s: &str) -> Result<RateParams, String> {
    RateParams::parse(s).map_err(|e| e.to_string())
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum LawKind {
    /// Uniform on `[-1, 1]^d`.
    Cube,
    /// Uniform on the unit sphere.
    Sphere,
}

impl LawKind {
    pub fn law(self, dim: usize) -> InputLaw {
        match self {
            LawKind::Cube => InputLaw::UniformCube { dim },
            LawKind::Sphere => InputLaw::UniformSphere { dim },
        }
    }
}

/// Dataset flags shared by the commands that read files.
#[derive(Args, Debug, Clone, Default, Serialize, Deserialize)]
pub struct DataArgs {
    /// Dataset file (CSV or svmlight).
    #[arg(long)]
    pub data: Option<PathBuf>,
    /// File format; inferred from the extension when omitted.
    #[arg(long, value_parser = parse_format)]
    pub format: Option<DataFormat>,
    /// CSV label column (0-based, default last).
    #[arg(long)]
    pub label_column: Option<usize>,
    /// Row preprocessing: none, unit-sphere or z-score.
    #[arg(long, default_value = "none", value_parser = parse_normalize)]
    pub normalize: Normalize,
    /// Shorthand for `--normalize unit-sphere`.
    #[arg(long)]
    pub normalize_sphere: bool,
    /// svmlight feature dimension (default: largest index seen).
    #[arg(long)]
    pub svm_dim: Option<usize>,
}

impl DataArgs {
    pub fn source(&self, path: &Path) -> krein_ridge::Result<DatasetSource> {
        let mut src = DatasetSource::infer(path);
        if let Some(f) = self.format {
            src.format = f;
        }
        src.label_column = self.label_column;
        src.dim = self.svm_dim;
        src.normalize = match (self.normalize_sphere, self.normalize) {
            (false, n) => n,
            (true, Normalize::None | Normalize::UnitSphere) => Normalize::UnitSphere,
            (true, other) => {
                return Err(Error::Argument(format!(
                    "--normalize-sphere conflicts with --normalize {other:?}"
                )))
            }
        };
        Ok(src)
    }

    pub fn load(&self) -> krein_ridge::Result<Option<krein_ridge::Dataset>> {
        match &self.data {
            None => Ok(None),
            Some(p) => krein_ridge::io::load(&self.source(p)?).map(Some),
        }
    }
}

/// Everything needed to reproduce a run; written to `config-echo.json`.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct RunConfig {
    pub version: String,
    pub seed: u64,
    pub output_dir: PathBuf,
    pub threads: Option<usize>,
    pub tolerances: Tolerances,
    pub command: Command,
}

/// Recursively overwrites `base` with the entries of `overlay`.
pub fn merge(base: &mut Value, overlay: Value) {
    match (base, overlay) {
        (Value::Object(b), Value::Object(o)) => {
            for (k, v) in o {
                merge(b.entry(k).or_insert(Value::Null), v);
            }
        }
        (b, o) => *b = o,
    }
}

/// Applies a config file on top of the flag-derived configuration.
pub fn overlay_file(cfg: RunConfig, path: &Path) -> krein_ridge::Result<RunConfig> {
    let text = std::fs::read_to_string(path).map_err(|e| Error::Io {
        path: path.to_path_buf(),
        source: e,
    })?;
    let overlay: Value = serde_json::from_str(&text)
        .map_err(|e| Error::Serialization(format!("{}: {e}", path.display())))?;
    let ours = cfg.command.name();
    if let Some(theirs) = overlay.pointer("/command/name").and_then(Value::as_str) {
        if theirs != ours {
            return Err(Error::Argument(format!(
                "{} configures command '{theirs}' but '{ours}' was invoked",
                path.display()
            )));
        }
    }
    let mut base = serde_json::to_value(&cfg)?;
    merge(&mut base, overlay);
    serde_json::from_value(base)
        .map_err(|e| Error::Serialization(format!("{}: {e}", path.display())))
}

/// Parses `name=value` pairs onto the default tolerances.
pub fn apply_tolerance_overrides(
    tol: Tolerances,
    items: &[String],
) -> krein_ridge::Result<Tolerances> {
    let mut v = serde_json::to_value(tol)?;
    let obj = v
        .as_object_mut()
        .expect("tolerances serialize as an object");
    for item in items {
        let (key, value) = item.split_once('=').ok_or_else(|| {
            Error::Argument(format!("tolerance override '{item}' is not name=value"))
        })?;
        let key = key.trim().replace('-', "_");
        if !obj.contains_key(&key) {
            let known: Vec<&str> = obj.keys().map(String::as_str).collect();
            return Err(Error::Argument(format!(
                "unknown tolerance '{key}' (known: {})",
                known.join(", ")
            )));
        }
        let parsed: Value = serde_json::from_str(value.trim()).map_err(|_| {
            Error::Argument(format!("tolerance '{key}' needs a number, got '{value}'"))
        })?;
        if !parsed.is_number() {
            return Err(Error::Argument(format!(
                "tolerance '{key}' needs a number, got '{value}'"
            )));
        }
        obj.insert(key, parsed);
    }
    serde_json::from_value(v).map_err(|e| Error::Argument(format!("tolerance override: {e}")))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn merge_overwrites_leaves_only() {
        let mut a = serde_json::json!({"x": 1, "n": {"p": 1, "q": 2}});
        merge(&mut a, serde_json::json!({"n": {"q": 5}, "y": true}));
        assert_eq!(
            a,
            serde_json::json!({"x": 1, "n": {"p": 1, "q": 5}, "y": true})
        );
    }

    #[test]
    fn tolerance_overrides() {
        let t = apply_tolerance_overrides(
            Tolerances::default(),
            &["secular-rel=1e-10".into(), "jacobi_max_sweeps=7".into()],
        )
        .unwrap();
        assert_eq!(t.secular_rel, 1e-10);
        assert_eq!(t.jacobi_max_sweeps, 7);
        assert!(apply_tolerance_overrides(Tolerances::default(), &["nope=1".into()]).is_err());
        assert!(
            apply_tolerance_overrides(Tolerances::default(), &["pole_rel=abc".into()]).is_err()
        );
    }

    #[test]
    fn kernel_choice_round_trips_both_forms() {
        let named: KernelChoice = serde_json::from_str("\"tl1:tau=2\"").unwrap();
        assert_eq!(named, KernelChoice::Name("tl1:tau=2".into()));
        let spec: KernelChoice = serde_json::from_str(r#"{"family":"log","params":{}}"#).unwrap();
        assert_eq!(spec, KernelChoice::Spec(KernelSpec::LOG));
        let mut k = named;
        assert_eq!(k.resolve(3).unwrap(), KernelSpec::Tl1 { tau: 2.0 });
        assert!(matches!(k, KernelChoice::Spec(_)));
    }
}
