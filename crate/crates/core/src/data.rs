//! Datasets: the synthetic two-score hiring set and schema-driven CSV
//! ingestion, both min-max normalized into `[0, 1]`.

use std::collections::HashMap;
use std::io::Read;
use std::path::Path;

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Error)]
pub enum DataError {
    #[error("invalid dataset: {0}")]
    Invalid(String),
    #[error("invalid synthetic parameters: {0}")]
    InvalidParams(String),
    #[error("column `{0}` not found")]
    MissingColumn(String),
    #[error("row {row}: {message}")]
    BadRow { row: usize, message: String },
    #[error("no usable rows ({dropped} dropped)")]
    NoRows { dropped: usize },
    #[error("split leaves an empty partition (m = {m}, test_fraction = {fraction})")]
    EmptySplit { m: usize, fraction: f64 },
    #[error(transparent)]
    Csv(#[from] csv::Error),
    #[error(transparent)]
    Io(#[from] std::io::Error),
    #[error("schema: {0}")]
    Schema(#[from] serde_json::Error),
}

/// Features in `[0, 1]`, binary labels and binary sensitive attributes.
#[derive(Debug, Clone, PartialEq)]
pub struct TabularDataset {
    features: Vec<Vec<f64>>,
    labels: Vec<u8>,
    sensitive: Vec<u8>,
    feature_names: Vec<String>,
}

impl TabularDataset {
    pub fn new(
        features: Vec<Vec<f64>>,
        labels: Vec<u8>,
        sensitive: Vec<u8>,
        feature_names: Vec<String>,
    ) -> Result<Self, DataError> {
        let m = features.len();
        if m == 0 {
            return Err(DataError::Invalid("dataset has no rows".into()));
        }
        if labels.len() != m || sensitive.len() != m {
            return Err(DataError::Invalid(format!(
                "{m} feature rows, {} labels, {} sensitive values",
                labels.len(),
                sensitive.len()
            )));
        }
        let n = feature_names.len();
        if n == 0 {
            return Err(DataError::Invalid("dataset has no features".into()));
        }
        for (i, row) in features.iter().enumerate() {
            if row.len() != n {
                return Err(DataError::Invalid(format!(
                    "row {i} has {} features, expected {n}",
                    row.len()
                )));
            }
            if let Some(v) = row.iter().find(|v| !(0.0..=1.0).contains(*v)) {
                return Err(DataError::Invalid(format!(
                    "row {i} has feature value {v} outside [0, 1]"
                )));
            }
        }
        if let Some(i) = labels.iter().position(|&y| y > 1) {
            return Err(DataError::Invalid(format!("label {i} is not binary")));
        }
        if let Some(i) = sensitive.iter().position(|&s| s > 1) {
            return Err(DataError::Invalid(format!(
                "sensitive value {i} is not binary"
            )));
        }
        Ok(Self {
            features,
            labels,
            sensitive,
            feature_names,
        })
    }

    pub fn len(&self) -> usize {
        self.features.len()
    }

    pub fn is_empty(&self) -> bool {
        self.features.is_empty()
    }

    pub fn n_features(&self) -> usize {
        self.feature_names.len()
    }

    pub fn features(&self) -> &[Vec<f64>] {
        &self.features
    }

    pub fn row(&self, i: usize) -> &[f64] {
        &self.features[i]
    }

    pub fn labels(&self) -> &[u8] {
        &self.labels
    }

    pub fn sensitive(&self) -> &[u8] {
        &self.sensitive
    }

    pub fn feature_names(&self) -> &[String] {
        &self.feature_names
    }

    fn subset(&self, idx: &[usize]) -> Self {
        Self {
            features: idx.iter().map(|&i| self.features[i].clone()).collect(),
            labels: idx.iter().map(|&i| self.labels[i]).collect(),
            sensitive: idx.iter().map(|&i| self.sensitive[i]).collect(),
            feature_names: self.feature_names.clone(),
        }
    }

    /// Writes `features..., y, s` with a header row.
    pub fn write_csv<W: std::io::Write>(&self, out: W) -> Result<(), DataError> {
        let mut w = csv::Writer::from_writer(out);
        let mut header: Vec<&str> = self.feature_names.iter().map(String::as_str).collect();
        header.extend(["y", "s"]);
        w.write_record(&header)?;
        for i in 0..self.len() {
            let mut rec: Vec<String> = self.features[i].iter().map(|v| v.to_string()).collect();
            rec.push(self.labels[i].to_string());
            rec.push(self.sensitive[i].to_string());
            w.write_record(&rec)?;
        }
        w.flush()?;
        Ok(())
    }
}

/// Linear decision rule `a₁x₁ + a₂x₂ > c` used to label synthetic points.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Boundary {
    pub a1: f64,
    pub a2: f64,
    pub c: f64,
}

/// Parameters of the synthetic two-group hiring data.
///
/// Points are uniform on the unit square and labelled by [`Boundary`]
/// before group B is shifted up by `shift` and group A down by `shift`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct Unfair2dParams {
    pub m: usize,
    pub seed: u64,
    pub shift: f64,
    pub boundary: Boundary,
    /// Probability that a sample belongs to group B (`s = 1`).
    pub group_prob: f64,
}

impl Default for Unfair2dParams {
    fn default() -> Self {
        Self {
            m: 2000,
            seed: 0,
            shift: 0.1,
            boundary: Boundary {
                a1: 1.0,
                a2: 1.0,
                c: 1.0,
            },
            group_prob: 0.5,
        }
    }
}

impl Unfair2dParams {
    pub fn validate(&self) -> Result<(), DataError> {
        let bad = |msg: String| Err(DataError::InvalidParams(msg));
        if self.m == 0 {
            return bad("m must be at least 1".into());
        }
        if !(self.shift.is_finite() && (0.0..0.5).contains(&self.shift)) {
            return bad(format!("shift must lie in [0, 0.5), got {}", self.shift));
        }
        let b = self.boundary;
        if !(b.a1.is_finite() && b.a2.is_finite() && b.c.is_finite()) {
            return bad("boundary coefficients must be finite".into());
        }
        if b.a1 == 0.0 && b.a2 == 0.0 {
            return bad("boundary normal (a1, a2) must be nonzero".into());
        }
        if !(0.0..=1.0).contains(&self.group_prob) {
            return bad(format!(
                "group_prob must lie in [0, 1], got {}",
                self.group_prob
            ));
        }
        Ok(())
    }
}

pub fn generate_unfair2d(p: &Unfair2dParams) -> Result<TabularDataset, DataError> {
    p.validate()?;
    let mut rng = ChaCha8Rng::seed_from_u64(p.seed);
    let mut features = Vec::with_capacity(p.m);
    let mut labels = Vec::with_capacity(p.m);
    let mut sensitive = Vec::with_capacity(p.m);
    for _ in 0..p.m {
        let x1: f64 = rng.random();
        let x2: f64 = rng.random();
        let in_b = rng.random::<f64>() < p.group_prob;
        let y = u8::from(p.boundary.a1 * x1 + p.boundary.a2 * x2 > p.boundary.c);
        let shift = if in_b { p.shift } else { -p.shift };
        features.push(vec![
            (x1 + shift).clamp(0.0, 1.0),
            (x2 + shift).clamp(0.0, 1.0),
        ]);
        labels.push(y);
        sensitive.push(u8::from(in_b));
    }
    TabularDataset::new(
        features,
        labels,
        sensitive,
        vec!["x1".to_string(), "x2".to_string()],
    )
}

/// Per-column `(x − min)/(max − min)`; constant columns map to 0.5.
pub fn min_max_normalize(rows: &[Vec<f64>]) -> Vec<Vec<f64>> {
    let Some(first) = rows.first() else {
        return Vec::new();
    };
    let n = first.len();
    let mut lo = vec![f64::INFINITY; n];
    let mut hi = vec![f64::NEG_INFINITY; n];
    for row in rows {
        for (j, &v) in row.iter().enumerate() {
            lo[j] = lo[j].min(v);
            hi[j] = hi[j].max(v);
        }
    }
    rows.iter()
        .map(|row| {
            row.iter()
                .enumerate()
                .map(|(j, &v)| {
                    let range = hi[j] - lo[j];
                    if range > 0.0 {
                        ((v - lo[j]) / range).clamp(0.0, 1.0)
                    } else {
                        0.5
                    }
                })
                .collect()
        })
        .collect()
}

/// Seeded shuffle split into `⌈m(1 − f)⌉` training rows and the rest.
pub fn train_test_split(
    d: &TabularDataset,
    test_fraction: f64,
    seed: u64,
) -> Result<(TabularDataset, TabularDataset), DataError> {
    let m = d.len();
    if !(test_fraction > 0.0 && test_fraction < 1.0) || m < 2 {
        return Err(DataError::EmptySplit {
            m,
            fraction: test_fraction,
        });
    }
    let n_train = (m as f64 * (1.0 - test_fraction)).ceil() as usize;
    if n_train == 0 || n_train >= m {
        return Err(DataError::EmptySplit {
            m,
            fraction: test_fraction,
        });
    }
    let mut idx: Vec<usize> = (0..m).collect();
    idx.shuffle(&mut ChaCha8Rng::seed_from_u64(seed));
    let (train, test) = idx.split_at(n_train);
    Ok((d.subset(train), d.subset(test)))
}

/// Maps a CSV column to a binary value by literal membership.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BinaryColumn {
    pub column: String,
    /// Trimmed cell values that map to 1; everything else maps to 0.
    pub positive: Vec<String>,
    #[serde(default)]
    pub invert: bool,
}

impl BinaryColumn {
    fn map(&self, cell: &str) -> u8 {
        let hit = self.positive.iter().any(|p| p == cell.trim());
        u8::from(hit != self.invert)
    }
}

fn default_true() -> bool {
    true
}

fn default_delimiter() -> char {
    ','
}

/// Which columns of a CSV file to read and how to binarize them.
///
/// Without a header row, columns are addressed by zero-based index.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DatasetSchema {
    pub features: Vec<String>,
    pub label: BinaryColumn,
    pub sensitive: BinaryColumn,
    #[serde(default = "default_true")]
    pub has_header: bool,
    #[serde(default = "default_delimiter")]
    pub delimiter: char,
    /// Fail on unparseable feature cells instead of dropping the row.
    #[serde(default)]
    pub strict: bool,
}

impl DatasetSchema {
    pub fn from_json(text: &str) -> Result<Self, DataError> {
        Ok(serde_json::from_str(text)?)
    }

    pub fn from_path(path: impl AsRef<Path>) -> Result<Self, DataError> {
        Self::from_json(&std::fs::read_to_string(path)?)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct LoadedDataset {
    pub dataset: TabularDataset,
    /// Rows skipped for missing or unparseable values.
    pub dropped: usize,
}

pub fn load_csv(
    path: impl AsRef<Path>,
    schema: &DatasetSchema,
) -> Result<LoadedDataset, DataError> {
    read_csv(std::fs::File::open(path)?, schema)
}

pub fn read_csv<R: Read>(input: R, schema: &DatasetSchema) -> Result<LoadedDataset, DataError> {
    if !schema.delimiter.is_ascii() {
        return Err(DataError::Invalid(format!(
            "delimiter {:?} is not a single ASCII character",
            schema.delimiter
        )));
    }
    let mut reader = csv::ReaderBuilder::new()
        .has_headers(schema.has_header)
        .delimiter(schema.delimiter as u8)
        .flexible(true)
        .from_reader(input);

    let lookup: HashMap<String, usize> = if schema.has_header {
        reader
            .headers()?
            .iter()
            .enumerate()
            .map(|(i, h)| (h.trim().to_string(), i))
            .collect()
    } else {
        HashMap::new()
    };
    let resolve = |name: &str| -> Result<usize, DataError> {
        if schema.has_header {
            lookup
                .get(name)
                .copied()
                .ok_or_else(|| DataError::MissingColumn(name.to_string()))
        } else {
            name.trim()
                .parse()
                .map_err(|_| DataError::MissingColumn(name.to_string()))
        }
    };
    let feature_cols = schema
        .features
        .iter()
        .map(|f| resolve(f))
        .collect::<Result<Vec<_>, _>>()?;
    let label_col = resolve(&schema.label.column)?;
    let sensitive_col = resolve(&schema.sensitive.column)?;

    let mut raw = Vec::new();
    let mut labels = Vec::new();
    let mut sensitive = Vec::new();
    let mut dropped = 0;
    for (i, record) in reader.records().enumerate() {
        let record = record?;
        let row_no = i + 1 + usize::from(schema.has_header);
        let cell = |c: usize| {
            record
                .get(c)
                .map(str::trim)
                .filter(|s| !s.is_empty() && *s != "?")
        };
        let parsed: Option<Vec<f64>> = feature_cols
            .iter()
            .map(|&c| {
                cell(c)
                    .and_then(|s| s.parse::<f64>().ok())
                    .filter(|v| v.is_finite())
            })
            .collect();
        let (Some(values), Some(y), Some(s)) = (parsed, cell(label_col), cell(sensitive_col))
        else {
            if schema.strict {
                return Err(DataError::BadRow {
                    row: row_no,
                    message: "missing or non-numeric value in a selected column".into(),
                });
            }
            dropped += 1;
            continue;
        };
        raw.push(values);
        labels.push(schema.label.map(y));
        sensitive.push(schema.sensitive.map(s));
    }
    if raw.is_empty() {
        return Err(DataError::NoRows { dropped });
    }
    let dataset = TabularDataset::new(
        min_max_normalize(&raw),
        labels,
        sensitive,
        schema.features.clone(),
    )?;
    Ok(LoadedDataset { dataset, dropped })
}
