//! Datasets, loading, preprocessing and the labeled/unlabeled partition.

mod pool;
mod rng;
mod standardize;
mod synthetic;

use std::collections::BTreeSet;
use std::fs;
use std::io::{self, Write};
use std::path::Path;

use thiserror::Error;

use crate::model::{Label, Sample};

pub use pool::{split_and_seed, PoolState};
pub use rng::{stream_id, Rng};
pub use standardize::{standardize, Standardizer};
pub use synthetic::{make_synthetic, SyntheticSpec};

#[derive(Debug, Error)]
pub enum DataError {
    #[error("{path}: {source}")]
    Io {
        path: String,
        #[source]
        source: io::Error,
    },
    #[error("line {line}: {message}")]
    Parse { line: usize, message: String },
    #[error("unsupported label set {0:?}; expected {{-1,+1}}, {{0,1}} or {{1,2}}")]
    LabelSet(Vec<String>),
    #[error("dataset '{0}' has a single class")]
    SingleClass(String),
    #[error("dataset '{name}' has a non-finite value at row {row}, column {col}")]
    NonFinite {
        name: String,
        row: usize,
        col: usize,
    },
    #[error("dataset '{0}' is empty")]
    Empty(String),
    #[error("shape mismatch: {0}")]
    Shape(String),
    #[error("dataset '{name}' needs at least 2 instances per class, has {pos} positive and {neg} negative")]
    TooFewPerClass {
        name: String,
        pos: usize,
        neg: usize,
    },
    #[error("index {0} is not in the unlabeled pool")]
    NotInPool(usize),
    #[error("covariance is not symmetric positive definite")]
    NotPositiveDefinite,
    #[error("invalid synthetic spec: {0}")]
    Synthetic(String),
    #[error("dataset '{name}' is {dim}-dimensional; a 2-D dataset is required")]
    NotTwoDimensional { name: String, dim: usize },
}

/// On-disk dataset formats.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Format {
    /// `<label> <idx>:<val> ...` with 1-based indices.
    Libsvm,
    /// Optional header row, label in the last column.
    Csv,
}

impl Format {
    /// `.csv` files are CSV; everything else is treated as libsvm.
    pub fn from_path(path: &Path) -> Format {
        match path.extension().and_then(|e| e.to_str()) {
            Some(ext) if ext.eq_ignore_ascii_case("csv") => Format::Csv,
            _ => Format::Libsvm,
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            Format::Libsvm => "libsvm",
            Format::Csv => "csv",
        }
    }

    pub fn parse(s: &str) -> Option<Format> {
        match s.to_ascii_lowercase().as_str() {
            "libsvm" | "svmlight" => Some(Format::Libsvm),
            "csv" => Some(Format::Csv),
            _ => None,
        }
    }
}

/// Dense feature matrix with +1/-1 labels.
#[derive(Debug, Clone, PartialEq)]
pub struct Dataset {
    name: String,
    dim: usize,
    features: Vec<f64>,
    labels: Vec<Label>,
}

impl Dataset {
    /// Build from a row-major matrix. Requires finite entries and both classes.
    pub fn new(
        name: impl Into<String>,
        features: Vec<f64>,
        dim: usize,
        labels: Vec<Label>,
    ) -> Result<Self, DataError> {
        let name = name.into();
        if labels.is_empty() {
            return Err(DataError::Empty(name));
        }
        if dim == 0 || features.len() != labels.len() * dim {
            return Err(DataError::Shape(format!(
                "{} values for {} rows of dimension {dim}",
                features.len(),
                labels.len()
            )));
        }
        if let Some(pos) = features.iter().position(|v| !v.is_finite()) {
            return Err(DataError::NonFinite {
                name,
                row: pos / dim,
                col: pos % dim,
            });
        }
        let ds = Self {
            name,
            dim,
            features,
            labels,
        };
        let (pos, neg) = ds.class_counts();
        if pos == 0 || neg == 0 {
            return Err(DataError::SingleClass(ds.name));
        }
        Ok(ds)
    }

    pub fn name(&self) -> &str {
        &self.name
    }

    pub fn with_name(mut self, name: impl Into<String>) -> Self {
        self.name = name.into();
        self
    }

    pub fn len(&self) -> usize {
        self.labels.len()
    }

    pub fn is_empty(&self) -> bool {
        self.labels.is_empty()
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn row(&self, i: usize) -> &[f64] {
        &self.features[i * self.dim..(i + 1) * self.dim]
    }

    pub fn label(&self, i: usize) -> Label {
        self.labels[i]
    }

    pub fn labels(&self) -> &[Label] {
        &self.labels
    }

    pub fn features(&self) -> &[f64] {
        &self.features
    }

    pub fn sample(&self, i: usize) -> Sample<'_> {
        Sample::new(self.row(i), self.labels[i])
    }

    /// `(positives, negatives)`.
    pub fn class_counts(&self) -> (usize, usize) {
        let pos = self.labels.iter().filter(|l| **l == Label::Pos).count();
        (pos, self.labels.len() - pos)
    }

    /// Every label negated.
    pub fn with_flipped_labels(&self) -> Dataset {
        Dataset {
            labels: self.labels.iter().map(|l| l.flipped()).collect(),
            ..self.clone()
        }
    }

    /// Write as dense libsvm (every index present), shortest round-trip floats.
    pub fn write_libsvm<W: Write>(&self, mut out: W) -> io::Result<()> {
        for i in 0..self.len() {
            let label = match self.labels[i] {
                Label::Pos => "+1",
                Label::Neg => "-1",
            };
            write!(out, "{label}")?;
            for (j, v) in self.row(i).iter().enumerate() {
                write!(out, " {}:{}", j + 1, v)?;
            }
            out.write_all(b"\n")?;
        }
        Ok(())
    }
}

/// Load a dataset, naming it after the file stem.
pub fn load(path: &Path, format: Format) -> Result<Dataset, DataError> {
    let text = fs::read_to_string(path).map_err(|source| DataError::Io {
        path: path.display().to_string(),
        source,
    })?;
    let name = path
        .file_stem()
        .and_then(|s| s.to_str())
        .unwrap_or("dataset")
        .to_string();
    parse(&text, format, name)
}

/// Parse dataset text in the given format.
pub fn parse(text: &str, format: Format, name: impl Into<String>) -> Result<Dataset, DataError> {
    let (rows, raw_labels) = match format {
        Format::Libsvm => parse_libsvm(text)?,
        Format::Csv => parse_csv(text)?,
    };
    let name = name.into();
    if rows.is_empty() {
        return Err(DataError::Empty(name));
    }
    let labels = remap_labels(&raw_labels, &name)?;
    let dim = rows.iter().map(Vec::len).max().unwrap_or(0);
    if dim == 0 {
        return Err(DataError::Shape("no feature columns".into()));
    }
    let mut features = Vec::with_capacity(rows.len() * dim);
    for mut r in rows {
        r.resize(dim, 0.0);
        features.extend(r);
    }
    Dataset::new(name, features, dim, labels)
}

type Parsed = (Vec<Vec<f64>>, Vec<(usize, String)>);

fn parse_number(tok: &str, line: usize) -> Result<f64, DataError> {
    tok.parse::<f64>().map_err(|_| DataError::Parse {
        line,
        message: format!("invalid number '{tok}'"),
    })
}

fn parse_libsvm(text: &str) -> Result<Parsed, DataError> {
    let mut rows = Vec::new();
    let mut labels = Vec::new();
    for (i, raw) in text.lines().enumerate() {
        let line_no = i + 1;
        let line = raw.split('#').next().unwrap_or("").trim();
        if line.is_empty() {
            continue;
        }
        let mut toks = line.split_whitespace();
        let label = toks.next().unwrap_or_default();
        let mut row: Vec<f64> = Vec::new();
        let mut last = 0usize;
        for tok in toks {
            let (idx, val) = tok.split_once(':').ok_or_else(|| DataError::Parse {
                line: line_no,
                message: format!("expected <index>:<value>, got '{tok}'"),
            })?;
            let idx: usize = idx.parse().map_err(|_| DataError::Parse {
                line: line_no,
                message: format!("invalid feature index '{idx}'"),
            })?;
            if idx == 0 {
                return Err(DataError::Parse {
                    line: line_no,
                    message: "feature indices are 1-based".into(),
                });
            }
            if idx <= last {
                return Err(DataError::Parse {
                    line: line_no,
                    message: format!("feature index {idx} is not increasing"),
                });
            }
            last = idx;
            let v = parse_number(val, line_no)?;
            if !v.is_finite() {
                return Err(DataError::Parse {
                    line: line_no,
                    message: format!("non-finite value '{val}'"),
                });
            }
            row.resize(idx, 0.0);
            row[idx - 1] = v;
        }
        rows.push(row);
        labels.push((line_no, label.to_string()));
    }
    Ok((rows, labels))
}

fn parse_csv(text: &str) -> Result<Parsed, DataError> {
    let mut rows = Vec::new();
    let mut labels = Vec::new();
    let mut width = None;
    let mut first = true;
    for (i, raw) in text.lines().enumerate() {
        let line_no = i + 1;
        let line = raw.trim();
        if line.is_empty() {
            continue;
        }
        let fields: Vec<&str> = line.split(',').map(str::trim).collect();
        if first {
            first = false;
            if fields.iter().any(|f| f.parse::<f64>().is_err()) {
                width = Some(fields.len());
                continue;
            }
        }
        if fields.len() < 2 {
            return Err(DataError::Parse {
                line: line_no,
                message: "expected at least one feature and a label".into(),
            });
        }
        match width {
            Some(w) if w != fields.len() => {
                return Err(DataError::Parse {
                    line: line_no,
                    message: format!("expected {w} fields, found {}", fields.len()),
                })
            }
            None => width = Some(fields.len()),
            _ => {}
        }
        let (label, feats) = fields.split_last().expect("non-empty");
        let row = feats
            .iter()
            .map(|f| {
                let v = parse_number(f, line_no)?;
                if v.is_finite() {
                    Ok(v)
                } else {
                    Err(DataError::Parse {
                        line: line_no,
                        message: format!("non-finite value '{f}'"),
                    })
                }
            })
            .collect::<Result<Vec<_>, _>>()?;
        rows.push(row);
        labels.push((line_no, label.to_string()));
    }
    Ok((rows, labels))
}

/// Map raw labels onto +1/-1.
///
/// `{-1, +1}` is taken as is; `{0, 1}` maps 0 to -1 and 1 to +1; `{1, 2}`
/// maps 1 to +1 and 2 to -1.
fn remap_labels(raw: &[(usize, String)], name: &str) -> Result<Vec<Label>, DataError> {
    let mut values = Vec::with_capacity(raw.len());
    for (line, tok) in raw {
        let v = parse_number(tok, *line)?;
        if v.fract() != 0.0 {
            return Err(DataError::Parse {
                line: *line,
                message: format!("label '{tok}' is not an integer"),
            });
        }
        values.push(v as i64);
    }
    let distinct: BTreeSet<i64> = values.iter().copied().collect();
    if distinct.len() < 2 {
        return Err(DataError::SingleClass(name.to_string()));
    }
    let set: Vec<i64> = distinct.iter().copied().collect();
    let map = |v: i64| -> Label {
        match set.as_slice() {
            [-1, 1] => Label::from_sign(v as f64).expect("checked"),
            [0, 1] => {
                if v == 1 {
                    Label::Pos
                } else {
                    Label::Neg
                }
            }
            _ => {
                if v == 1 {
                    Label::Pos
                } else {
                    Label::Neg
                }
            }
        }
    };
    match set.as_slice() {
        [-1, 1] => {}
        [0, 1] => log::info!("{name}: remapping labels 0/1 to -1/+1"),
        [1, 2] => log::info!("{name}: remapping labels 1/2 to +1/-1"),
        _ => {
            return Err(DataError::LabelSet(
                set.iter().map(|v| v.to_string()).collect(),
            ))
        }
    }
    Ok(values.into_iter().map(map).collect())
}
