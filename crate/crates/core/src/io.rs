//! Dataset loading (CSV, svmlight) and result persistence.

use std::fs::File;
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::{Path, PathBuf};

use nalgebra::{DMatrix, DVector};
use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::kernels::Dataset;
use crate::spectral::GramSpectrum;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DataFormat {
    Csv,
    Svmlight,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Normalize {
    #[default]
    None,
    UnitSphere,
    ZScore,
}

impl std::str::FromStr for Normalize {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "none" => Ok(Normalize::None),
            "unit-sphere" => Ok(Normalize::UnitSphere),
            "z-score" => Ok(Normalize::ZScore),
            other => Err(Error::arg(format!(
                "unknown normalization '{other}' (expected none, unit-sphere or z-score)"
            ))),
        }
    }
}

/// Where and how to read a dataset.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DatasetSource {
    pub format: DataFormat,
    pub path: PathBuf,
    /// CSV label column (0-based); the last column when absent.
    #[serde(default)]
    pub label_column: Option<usize>,
    #[serde(default)]
    pub normalize: Normalize,
    /// svmlight feature dimension; inferred from the largest index when absent.
    #[serde(default)]
    pub dim: Option<usize>,
}

impl DatasetSource {
    pub fn csv(path: impl Into<PathBuf>) -> Self {
        DatasetSource {
            format: DataFormat::Csv,
            path: path.into(),
            label_column: None,
            normalize: Normalize::None,
            dim: None,
        }
    }

    pub fn svmlight(path: impl Into<PathBuf>) -> Self {
        DatasetSource {
            format: DataFormat::Svmlight,
            ..DatasetSource::csv(path)
        }
    }

    /// Picks the format from the file extension (`.svm`, `.svmlight`, `.libsvm` or CSV).
    pub fn infer(path: impl Into<PathBuf>) -> Self {
        let path = path.into();
        let svm = matches!(
            path.extension().and_then(|e| e.to_str()),
            Some("svm" | "svmlight" | "libsvm")
        );
        if svm {
            DatasetSource::svmlight(path)
        } else {
            DatasetSource::csv(path)
        }
    }
}

pub fn load(source: &DatasetSource) -> Result<Dataset> {
    let file = File::open(&source.path).map_err(|e| Error::io(&source.path, e))?;
    let reader = BufReader::new(file);
    let name = source
        .path
        .file_stem()
        .and_then(|s| s.to_str())
        .unwrap_or("data")
        .to_string();
    let mut data = match source.format {
        DataFormat::Csv => parse_csv(reader, &source.path, source.label_column, name)?,
        DataFormat::Svmlight => parse_svmlight(reader, &source.path, source.dim, name)?,
    };
    match source.normalize {
        Normalize::None => {}
        Normalize::UnitSphere => data.normalize_to_sphere()?,
        Normalize::ZScore => data.z_score(),
    }
    Ok(data)
}

fn parse_err(path: &Path, line: usize, message: impl Into<String>) -> Error {
    Error::Parse {
        path: path.to_path_buf(),
        line,
        message: message.into(),
    }
}

/// Numeric CSV. A first row that does not parse as numbers is taken as a header.
fn parse_csv(
    reader: impl std::io::Read,
    path: &Path,
    label_column: Option<usize>,
    name: String,
) -> Result<Dataset> {
    let mut rdr = csv::ReaderBuilder::new()
        .has_headers(false)
        .flexible(true)
        .trim(csv::Trim::All)
        .comment(Some(b'#'))
        .from_reader(reader);
    let mut rows: Vec<Vec<f64>> = Vec::new();
    let mut width = None;
    for (idx, record) in rdr.records().enumerate() {
        let record = record.map_err(|e| {
            let line = e.position().map(|p| p.line() as usize).unwrap_or(idx + 1);
            parse_err(path, line, e.to_string())
        })?;
        let line = record
            .position()
            .map(|p| p.line() as usize)
            .unwrap_or(idx + 1);
        if record.iter().all(|f| f.is_empty()) {
            continue;
        }
        let parsed: std::result::Result<Vec<f64>, _> =
            record.iter().map(str::parse::<f64>).collect();
        let values = match parsed {
            Ok(v) => v,
            Err(_) if rows.is_empty() && width.is_none() => {
                // header row
                width = Some(record.len());
                continue;
            }
            Err(_) => {
                let bad = record
                    .iter()
                    .find(|f| f.parse::<f64>().is_err())
                    .unwrap_or("");
                return Err(parse_err(path, line, format!("'{bad}' is not a number")));
            }
        };
        if let Some(w) = width {
            if values.len() != w {
                return Err(parse_err(
                    path,
                    line,
                    format!("expected {w} fields, found {}", values.len()),
                ));
            }
        }
        if values.iter().any(|v| !v.is_finite()) {
            return Err(parse_err(path, line, "non-finite value"));
        }
        width = Some(values.len());
        rows.push(values);
    }
    if rows.is_empty() {
        return Err(parse_err(path, 0, "empty file"));
    }
    let w = rows[0].len();
    if w < 2 {
        return Err(parse_err(
            path,
            1,
            "need at least one feature column and a label column",
        ));
    }
    let label = label_column.unwrap_or(w - 1);
    if label >= w {
        return Err(Error::arg(format!(
            "label column {label} out of range for {w} columns in {}",
            path.display()
        )));
    }
    let m = rows.len();
    let x = DMatrix::from_fn(m, w - 1, |i, j| rows[i][if j < label { j } else { j + 1 }]);
    let y = DVector::from_fn(m, |i, _| rows[i][label]);
    Dataset::new(x, y, name)
}

/// `<label> <index>:<value> ...` with 1-based indices; `#` starts a comment.
fn parse_svmlight(
    reader: impl BufRead,
    path: &Path,
    dim: Option<usize>,
    name: String,
) -> Result<Dataset> {
    let mut labels = Vec::new();
    let mut entries: Vec<Vec<(usize, f64)>> = Vec::new();
    let mut max_index = 0usize;
    for (idx, line) in reader.lines().enumerate() {
        let lineno = idx + 1;
        let line = line.map_err(|e| Error::io(path, e))?;
        let content = line.split('#').next().unwrap_or("").trim();
        if content.is_empty() {
            continue;
        }
        let mut tokens = content.split_whitespace();
        let label_tok = tokens.next().unwrap_or("");
        let label: f64 = label_tok
            .parse()
            .map_err(|_| parse_err(path, lineno, format!("bad label '{label_tok}'")))?;
        let mut row = Vec::new();
        let mut last = 0usize;
        for tok in tokens {
            let (i, v) = tok.split_once(':').ok_or_else(|| {
                parse_err(path, lineno, format!("expected index:value, got '{tok}'"))
            })?;
            let i: usize = i
                .parse()
                .map_err(|_| parse_err(path, lineno, format!("bad index '{i}'")))?;
            if i == 0 {
                return Err(parse_err(path, lineno, "indices are 1-based"));
            }
            if i <= last {
                return Err(parse_err(
                    path,
                    lineno,
                    "indices must be strictly increasing",
                ));
            }
            last = i;
            let v: f64 = v
                .parse()
                .map_err(|_| parse_err(path, lineno, format!("bad value '{v}'")))?;
            if !v.is_finite() || !label.is_finite() {
                return Err(parse_err(path, lineno, "non-finite value"));
            }
            max_index = max_index.max(i);
            row.push((i, v));
        }
        labels.push(label);
        entries.push(row);
    }
    if labels.is_empty() {
        return Err(parse_err(path, 0, "empty file"));
    }
    let d = match dim {
        Some(d) if d < max_index => {
            return Err(Error::arg(format!(
                "feature index {max_index} exceeds declared dimension {d} in {}",
                path.display()
            )))
        }
        Some(d) => d,
        None => max_index.max(1),
    };
    let mut x = DMatrix::zeros(labels.len(), d);
    for (r, row) in entries.iter().enumerate() {
        for &(i, v) in row {
            x[(r, i - 1)] = v;
        }
    }
    Dataset::new(x, DVector::from_vec(labels), name)
}

/// Output formats for result tables.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ResultFormat {
    Csv,
    Json,
}

/// A record type with a fixed CSV column order.
pub trait Tabular {
    fn header() -> Vec<&'static str>;
    fn row(&self) -> Vec<String>;
}

/// Full-precision float formatting used in every CSV output.
pub fn fmt_f64(v: f64) -> String {
    format!("{v:.16e}")
}

fn create(path: &Path) -> Result<BufWriter<File>> {
    if let Some(parent) = path.parent() {
        if !parent.as_os_str().is_empty() {
            std::fs::create_dir_all(parent).map_err(|e| Error::io(parent, e))?;
        }
    }
    Ok(BufWriter::new(
        File::create(path).map_err(|e| Error::io(path, e))?,
    ))
}

pub fn write_csv<T: Tabular>(records: &[T], path: &Path) -> Result<()> {
    let mut w = csv::Writer::from_writer(create(path)?);
    let wrap = |e: csv::Error| Error::io(path, std::io::Error::other(e));
    w.write_record(T::header()).map_err(wrap)?;
    for r in records {
        w.write_record(r.row()).map_err(wrap)?;
    }
    w.flush().map_err(|e| Error::io(path, e))?;
    Ok(())
}

/// Reads a CSV written by [`write_csv`] back into typed records.
pub fn read_csv<T: DeserializeOwned>(path: &Path) -> Result<Vec<T>> {
    let mut rdr =
        csv::Reader::from_path(path).map_err(|e| Error::io(path, std::io::Error::other(e)))?;
    let mut out = Vec::new();
    for (i, rec) in rdr.deserialize().enumerate() {
        out.push(rec.map_err(|e: csv::Error| parse_err(path, i + 2, e.to_string()))?);
    }
    Ok(out)
}

pub fn write_json<T: Serialize + ?Sized>(value: &T, path: &Path) -> Result<()> {
    let mut w = create(path)?;
    serde_json::to_writer_pretty(&mut w, value)?;
    writeln!(w).map_err(|e| Error::io(path, e))?;
    w.flush().map_err(|e| Error::io(path, e))?;
    Ok(())
}

pub fn read_json<T: DeserializeOwned>(path: &Path) -> Result<T> {
    let f = File::open(path).map_err(|e| Error::io(path, e))?;
    serde_json::from_reader(BufReader::new(f))
        .map_err(|e| Error::Serialization(format!("{}: {e}", path.display())))
}

pub fn save_results<T: Tabular + Serialize>(
    records: &[T],
    path: &Path,
    format: ResultFormat,
) -> Result<()> {
    match format {
        ResultFormat::Csv => write_csv(records, path),
        ResultFormat::Json => write_json(records, path),
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SpectrumEntry {
    pub index: usize,
    pub sigma: f64,
}

impl Tabular for SpectrumEntry {
    fn header() -> Vec<&'static str> {
        vec!["index", "sigma"]
    }

    fn row(&self) -> Vec<String> {
        vec![self.index.to_string(), fmt_f64(self.sigma)]
    }
}

/// Writes `index,sigma` (1-based, descending) and a `{p, q, zero_tol}` sidecar
/// next to it with a `.json` extension.
pub fn write_spectrum(s: &GramSpectrum, csv_path: &Path) -> Result<PathBuf> {
    let entries: Vec<SpectrumEntry> = s
        .values
        .iter()
        .enumerate()
        .map(|(i, &sigma)| SpectrumEntry {
            index: i + 1,
            sigma,
        })
        .collect();
    write_csv(&entries, csv_path)?;
    let sidecar = csv_path.with_extension("json");
    write_json(&s.sidecar(), &sidecar)?;
    Ok(sidecar)
}

/// Serializes a `DVector` as a plain JSON array.
pub mod dvector_serde {
    use nalgebra::DVector;
    use serde::{Deserialize, Deserializer, Serialize, Serializer};

    pub fn serialize<S: Serializer>(v: &DVector<f64>, s: S) -> Result<S::Ok, S::Error> {
        v.as_slice().serialize(s)
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<DVector<f64>, D::Error> {
        Ok(DVector::from_vec(Vec::<f64>::deserialize(d)?))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn load_str(
        text: &str,
        source: impl Fn(PathBuf) -> DatasetSource,
        ext: &str,
    ) -> Result<Dataset> {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join(format!("d.{ext}"));
        std::fs::write(&path, text).unwrap();
        load(&source(path))
    }

    #[test]
    fn csv_label_column() {
        let d = load_str(
            "1.0,2.0,0.5\n",
            |p| DatasetSource {
                label_column: Some(2),
                ..DatasetSource::csv(p)
            },
            "csv",
        )
        .unwrap();
        assert_eq!(d.x, DMatrix::from_row_slice(1, 2, &[1.0, 2.0]));
        assert_eq!(d.y, DVector::from_vec(vec![0.5]));
    }

    #[test]
    fn csv_header_and_middle_label() {
        let d = load_str(
            "a,label,b\n1,5,2\n3,6,4\n",
            |p| DatasetSource {
                label_column: Some(1),
                ..DatasetSource::csv(p)
            },
            "csv",
        )
        .unwrap();
        assert_eq!(d.x, DMatrix::from_row_slice(2, 2, &[1.0, 2.0, 3.0, 4.0]));
        assert_eq!(d.y, DVector::from_vec(vec![5.0, 6.0]));
    }

    #[test]
    fn csv_errors_carry_line_numbers() {
        let err = load_str("1,2,3\n4,x,6\n", DatasetSource::csv, "csv").unwrap_err();
        match err {
            Error::Parse { line, .. } => assert_eq!(line, 2),
            other => panic!("{other:?}"),
        }
        let err = load_str("1,2,3\n4,5\n", DatasetSource::csv, "csv").unwrap_err();
        assert!(matches!(err, Error::Parse { line: 2, .. }), "{err:?}");
        assert!(load_str("", DatasetSource::csv, "csv")
            .unwrap_err()
            .to_string()
            .contains("empty"));
    }

    #[test]
    fn svmlight_line() {
        let d = load_str(
            "1 1:0.5 3:2.0\n",
            |p| DatasetSource {
                dim: Some(3),
                ..DatasetSource::svmlight(p)
            },
            "svm",
        )
        .unwrap();
        assert_eq!(d.x, DMatrix::from_row_slice(1, 3, &[0.5, 0.0, 2.0]));
        assert_eq!(d.y[0], 1.0);
        let err = load_str("1 1:0.5\n-1 0:1\n", DatasetSource::svmlight, "svm").unwrap_err();
        assert!(matches!(err, Error::Parse { line: 2, .. }));
    }

    #[test]
    fn unit_sphere_normalization() {
        let d = load_str(
            "3,4,1\n1,1,0\n0,2,1\n",
            |p| DatasetSource {
                normalize: Normalize::UnitSphere,
                ..DatasetSource::csv(p)
            },
            "csv",
        )
        .unwrap();
        for row in d.x.row_iter() {
            assert!((row.norm() - 1.0).abs() <= 1e-12);
        }
    }

    #[test]
    fn missing_file_names_path() {
        let err = load(&DatasetSource::csv("/nonexistent/file.csv")).unwrap_err();
        assert!(err.to_string().contains("/nonexistent/file.csv"));
        assert!(err.is_usage());
    }

    #[test]
    fn empty_records_give_header_only() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("s.csv");
        write_csv::<SpectrumEntry>(&[], &path).unwrap();
        assert_eq!(std::fs::read_to_string(&path).unwrap(), "index,sigma\n");
    }

    #[test]
    fn spectrum_round_trip() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("spectrum.csv");
        let k = DMatrix::from_diagonal(&DVector::from_vec(vec![2.0, 0.0, -1.0 / 3.0]));
        let s = crate::spectral::sym_eig(&k).unwrap();
        let sidecar = write_spectrum(&s, &path).unwrap();
        let back: Vec<SpectrumEntry> = read_csv(&path).unwrap();
        assert_eq!(back.len(), 3);
        assert_eq!(back[2].sigma, -1.0 / 3.0);
        let meta: serde_json::Value = read_json(&sidecar).unwrap();
        assert_eq!(meta["p"], 1);
        assert_eq!(meta["q"], 1);
    }
}
