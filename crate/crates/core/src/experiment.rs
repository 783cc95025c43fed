//! Radius sweeps: train one model per (solver, radius), audit it on the
//! train and test splits, and write plot-ready CSV plus a JSON summary.

use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Deserializer, Serialize};
use thiserror::Error;

use crate::data::{
    generate_unfair2d, load_csv, train_test_split, Boundary, DataError, DatasetSchema,
    TabularDataset, Unfair2dParams,
};
use crate::fairness::{fairness_report, FairnessError, FairnessReport, Gap};
use crate::inner::SolverKind;
use crate::trainer::{benchmark_epochs, evaluate, train, TimingTable, TrainConfig, TrainError};

/// Environment variable that overrides the configured output directory.
pub const OUT_DIR_ENV: &str = "FAIRTRS_OUT_DIR";

pub const FAIRNESS_HEADER: &str =
    "solver,radius,split,ind,sep_y0,sep_y1,suf_yhat0,suf_yhat1,accuracy";

#[derive(Debug, Error)]
pub enum SweepError {
    #[error("config: {0}")]
    Parse(String),
    #[error("invalid config: {0}")]
    Invalid(String),
    #[error(transparent)]
    Data(#[from] DataError),
    #[error(transparent)]
    Fairness(#[from] FairnessError),
    #[error("{solver} at radius {radius}: {source}")]
    Train {
        solver: SolverKind,
        radius: f64,
        #[source]
        source: TrainError,
    },
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
}

impl SweepError {
    /// 2 for inner-solver or divergence failures, 1 for everything else.
    pub fn exit_code(&self) -> i32 {
        match self {
            SweepError::Train { source, .. } if source.is_solver_failure() => 2,
            _ => 1,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SyntheticSource {
    pub m: usize,
    pub test_m: usize,
    pub seed: u64,
    /// Defaults to `seed + 1`.
    pub test_seed: Option<u64>,
    pub shift: f64,
    pub boundary: Boundary,
    pub group_prob: f64,
}

impl Default for SyntheticSource {
    fn default() -> Self {
        let p = Unfair2dParams::default();
        Self {
            m: p.m,
            test_m: 2000,
            seed: p.seed,
            test_seed: None,
            shift: p.shift,
            boundary: p.boundary,
            group_prob: p.group_prob,
        }
    }
}

impl SyntheticSource {
    fn params(&self, m: usize, seed: u64) -> Unfair2dParams {
        Unfair2dParams {
            m,
            seed,
            shift: self.shift,
            boundary: self.boundary,
            group_prob: self.group_prob,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CsvSource {
    pub path: PathBuf,
    /// Path to a schema JSON file.
    pub schema: PathBuf,
    #[serde(default = "default_test_fraction")]
    pub test_fraction: f64,
    #[serde(default)]
    pub split_seed: u64,
}

fn default_test_fraction() -> f64 {
    0.2
}

/// Where the data comes from. The bare string `"synthetic"` selects the
/// synthetic set with default parameters.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", deny_unknown_fields)]
pub enum DatasetSource {
    Synthetic(SyntheticSource),
    Csv(CsvSource),
}

impl Default for DatasetSource {
    fn default() -> Self {
        DatasetSource::Synthetic(SyntheticSource::default())
    }
}

fn dataset_source<'de, D: Deserializer<'de>>(de: D) -> Result<DatasetSource, D::Error> {
    use serde::de::Error;
    let value = serde_json::Value::deserialize(de)?;
    match value {
        serde_json::Value::String(s) if s == "synthetic" => Ok(DatasetSource::default()),
        serde_json::Value::String(s) => Err(D::Error::custom(format!(
            "unknown dataset `{s}` (expected \"synthetic\", {{\"synthetic\": {{..}}}} or {{\"csv\": {{..}}}})"
        ))),
        other => serde_json::from_value(other).map_err(D::Error::custom),
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct EmitFlags {
    pub fairness: bool,
    pub accuracy: bool,
    pub timing: bool,
}

impl Default for EmitFlags {
    fn default() -> Self {
        Self {
            fairness: true,
            accuracy: true,
            timing: true,
        }
    }
}

pub fn default_radii() -> Vec<f64> {
    (10..=20).map(|k| f64::from(k) / 100.0).collect()
}

fn default_solvers() -> Vec<SolverKind> {
    vec![SolverKind::Trs, SolverKind::Pgd, SolverKind::Random]
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SweepConfig {
    #[serde(deserialize_with = "dataset_source", default)]
    pub dataset: DatasetSource,
    #[serde(default = "default_radii")]
    pub radii: Vec<f64>,
    /// Robust solvers to sweep; the NONE baseline always runs.
    #[serde(default = "default_solvers")]
    pub solvers: Vec<SolverKind>,
    /// Shared training settings; `radius` and `solver` are set per cell.
    #[serde(default)]
    pub train: TrainConfig,
    #[serde(default = "default_output_dir")]
    pub output_dir: PathBuf,
    #[serde(default)]
    pub emit: EmitFlags,
    #[serde(default = "default_threshold")]
    pub threshold: f64,
}

fn default_output_dir() -> PathBuf {
    PathBuf::from("out")
}

fn default_threshold() -> f64 {
    0.5
}

impl Default for SweepConfig {
    fn default() -> Self {
        Self {
            dataset: DatasetSource::default(),
            radii: default_radii(),
            solvers: default_solvers(),
            train: TrainConfig::default(),
            output_dir: default_output_dir(),
            emit: EmitFlags::default(),
            threshold: default_threshold(),
        }
    }
}

impl SweepConfig {
    /// Checks constraints and materializes derived defaults.
    pub fn validate(mut self) -> Result<Self, SweepError> {
        let bad = |m: String| Err(SweepError::Invalid(m));
        if let Some(r) = self.radii.iter().find(|r| !(r.is_finite() && **r >= 0.0)) {
            return bad(format!("radii must be finite and nonnegative, got {r}"));
        }
        if let Some(w) = self.radii.windows(2).find(|w| w[1] <= w[0]) {
            return bad(format!(
                "radii must be strictly increasing ({} then {})",
                w[0], w[1]
            ));
        }
        let mut seen = Vec::new();
        for &s in &self.solvers {
            if s != SolverKind::None && !seen.contains(&s) {
                seen.push(s);
            }
        }
        self.solvers = seen;
        if !self.solvers.is_empty() && self.radii.is_empty() {
            return bad("robust solvers need at least one radius".into());
        }
        if self.train.radius != 0.0 || self.train.solver != SolverKind::None {
            return bad(
                "train.radius and train.solver are set per cell by radii and solvers".into(),
            );
        }
        self.train
            .validate()
            .map_err(|e| SweepError::Invalid(e.to_string()))?;
        if !(self.threshold > 0.0 && self.threshold < 1.0) {
            return bad(format!(
                "threshold must lie in (0, 1), got {}",
                self.threshold
            ));
        }
        match &mut self.dataset {
            DatasetSource::Synthetic(s) => {
                s.test_seed.get_or_insert(s.seed.wrapping_add(1));
                s.params(s.m, s.seed).validate()?;
                s.params(s.test_m, s.seed).validate()?;
            }
            DatasetSource::Csv(c) => {
                if !(c.test_fraction > 0.0 && c.test_fraction < 1.0) {
                    return bad(format!(
                        "csv.test_fraction must lie in (0, 1), got {}",
                        c.test_fraction
                    ));
                }
            }
        }
        Ok(self)
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("config serializes")
    }
}

/// Parses and validates a JSON sweep config. Errors name the offending
/// field path and position.
pub fn parse_config(text: &str) -> Result<SweepConfig, SweepError> {
    let de = &mut serde_json::Deserializer::from_str(text);
    let cfg: SweepConfig = serde_path_to_error::deserialize(de).map_err(|e| {
        let path = e.path().to_string();
        let inner = e.into_inner();
        if path == "." {
            SweepError::Parse(inner.to_string())
        } else {
            SweepError::Parse(format!("{path}: {inner}"))
        }
    })?;
    cfg.validate()
}

/// Flag beats environment beats config file.
pub fn resolve_output_dir(flag: Option<&Path>, env: Option<&str>, file: &Path) -> PathBuf {
    flag.map(Path::to_path_buf)
        .or_else(|| env.filter(|s| !s.is_empty()).map(PathBuf::from))
        .unwrap_or_else(|| file.to_path_buf())
}

#[derive(Debug, Clone, PartialEq)]
pub struct Splits {
    pub train: TabularDataset,
    pub test: TabularDataset,
    /// Rows dropped while reading CSV input.
    pub dropped: usize,
}

pub fn load_splits(source: &DatasetSource) -> Result<Splits, SweepError> {
    match source {
        DatasetSource::Synthetic(s) => Ok(Splits {
            train: generate_unfair2d(&s.params(s.m, s.seed))?,
            test: generate_unfair2d(&s.params(s.test_m, s.test_seed.unwrap_or(s.seed + 1)))?,
            dropped: 0,
        }),
        DatasetSource::Csv(c) => {
            let schema = DatasetSchema::from_path(&c.schema)?;
            let loaded = load_csv(&c.path, &schema)?;
            let (train, test) = train_test_split(&loaded.dataset, c.test_fraction, c.split_seed)?;
            Ok(Splits {
                train,
                test,
                dropped: loaded.dropped,
            })
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum Split {
    Train,
    Test,
}

impl Split {
    pub fn as_str(self) -> &'static str {
        match self {
            Split::Train => "train",
            Split::Test => "test",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SweepRow {
    pub solver: SolverKind,
    pub radius: f64,
    pub split: Split,
    pub fairness: FairnessReport,
    pub accuracy: f64,
    pub mean_epoch_seconds: f64,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize)]
pub struct SweepReport {
    pub rows: Vec<SweepRow>,
}

impl SweepReport {
    pub fn find(&self, solver: SolverKind, radius: f64, split: Split) -> Option<&SweepRow> {
        self.rows
            .iter()
            .find(|r| r.solver == solver && r.radius == radius && r.split == split)
    }

    pub fn baseline(&self, split: Split) -> Option<&SweepRow> {
        self.find(SolverKind::None, 0.0, split)
    }

    pub fn timing(&self) -> TimingTable {
        TimingTable {
            rows: self
                .rows
                .iter()
                .filter(|r| r.split == Split::Train)
                .map(|r| crate::trainer::TimingRow {
                    solver: r.solver,
                    radius: r.radius,
                    mean_epoch_seconds: r.mean_epoch_seconds,
                    epochs: 0,
                })
                .collect(),
        }
    }
}

fn fmt_gap(g: Option<Gap>) -> String {
    g.map_or_else(|| "NA".to_string(), |g| format!("{:.6}", g.value()))
}

/// Four significant digits in scientific notation.
fn fmt_sig4(x: f64) -> String {
    format!("{x:.3e}")
}

pub fn fairness_csv(report: &SweepReport) -> String {
    let mut out = String::from(FAIRNESS_HEADER);
    out.push('\n');
    for r in &report.rows {
        let f = &r.fairness;
        let _ = writeln!(
            out,
            "{},{},{},{},{},{},{},{},{:.6}",
            r.solver,
            r.radius,
            r.split.as_str(),
            fmt_gap(f.independence),
            fmt_gap(f.separation_y0),
            fmt_gap(f.separation_y1),
            fmt_gap(f.sufficiency_yhat0),
            fmt_gap(f.sufficiency_yhat1),
            r.accuracy
        );
    }
    out
}

pub fn accuracy_csv(report: &SweepReport) -> String {
    let mut out = String::from("solver,radius,train_accuracy,test_accuracy\n");
    for r in report.rows.iter().filter(|r| r.split == Split::Train) {
        let test = report
            .find(r.solver, r.radius, Split::Test)
            .map_or_else(|| "NA".to_string(), |t| format!("{:.6}", t.accuracy));
        let _ = writeln!(out, "{},{},{:.6},{}", r.solver, r.radius, r.accuracy, test);
    }
    out
}

pub fn timing_csv(table: &TimingTable) -> String {
    let mut out = String::from("solver,radius,mean_epoch_seconds,pgd_trs_ratio\n");
    for r in &table.rows {
        let ratio = match r.solver {
            SolverKind::Pgd => table.pgd_trs_ratio(r.radius),
            _ => None,
        };
        let _ = writeln!(
            out,
            "{},{},{},{}",
            r.solver,
            r.radius,
            fmt_sig4(r.mean_epoch_seconds),
            ratio.map_or_else(|| "NA".to_string(), fmt_sig4)
        );
    }
    out
}

#[derive(Serialize)]
struct Summary<'a> {
    config: &'a SweepConfig,
    train_size: usize,
    test_size: usize,
    dropped_rows: usize,
    complete: bool,
    rows: &'a [SweepRow],
}

fn write_file(dir: &Path, name: &str, contents: &str) -> Result<(), SweepError> {
    let path = dir.join(name);
    fs::write(&path, contents).map_err(|source| SweepError::Io { path, source })
}

/// Writes the enabled CSV files and `summary.json` into `cfg.output_dir`.
pub fn write_outputs(
    cfg: &SweepConfig,
    splits: &Splits,
    report: &SweepReport,
    complete: bool,
) -> Result<(), SweepError> {
    let dir = &cfg.output_dir;
    fs::create_dir_all(dir).map_err(|source| SweepError::Io {
        path: dir.clone(),
        source,
    })?;
    if cfg.emit.fairness {
        write_file(dir, "fairness.csv", &fairness_csv(report))?;
    }
    if cfg.emit.accuracy {
        write_file(dir, "accuracy.csv", &accuracy_csv(report))?;
    }
    if cfg.emit.timing {
        write_file(dir, "timing.csv", &timing_csv(&report.timing()))?;
    }
    let summary = Summary {
        config: cfg,
        train_size: splits.train.len(),
        test_size: splits.test.len(),
        dropped_rows: splits.dropped,
        complete,
        rows: &report.rows,
    };
    let json = serde_json::to_string_pretty(&summary).expect("summary serializes");
    write_file(dir, "summary.json", &(json + "\n"))
}

/// The (solver, radius) cells of a sweep, baseline first.
pub fn cells(cfg: &SweepConfig) -> Vec<(SolverKind, f64)> {
    let mut out = vec![(SolverKind::None, 0.0)];
    for &s in &cfg.solvers {
        out.extend(cfg.radii.iter().map(|&r| (s, r)));
    }
    out
}

/// Trains and audits every cell in memory, without writing files.
pub fn sweep_in_memory(
    cfg: &SweepConfig,
    splits: &Splits,
    report: &mut SweepReport,
) -> Result<(), SweepError> {
    let threads = if cfg.emit.timing {
        1
    } else {
        cfg.train.threads
    };
    for (solver, radius) in cells(cfg) {
        let tc = TrainConfig {
            radius,
            solver,
            threads,
            ..cfg.train.clone()
        };
        let wrap = |source| SweepError::Train {
            solver,
            radius,
            source,
        };
        let (model, history) = train(&splits.train, &tc).map_err(wrap)?;
        for (split, data) in [(Split::Train, &splits.train), (Split::Test, &splits.test)] {
            let ev = evaluate(&model, data, cfg.threshold).map_err(wrap)?;
            report.rows.push(SweepRow {
                solver,
                radius,
                split,
                fairness: fairness_report(&ev.preds, data.labels(), data.sensitive())?,
                accuracy: ev.accuracy,
                mean_epoch_seconds: history.mean_epoch_seconds(),
            });
        }
    }
    Ok(())
}

/// Runs the full sweep and writes its outputs. On a training failure the
/// rows finished so far are written (with `complete: false`) before the
/// error is returned.
pub fn run_sweep(cfg: &SweepConfig) -> Result<SweepReport, SweepError> {
    let splits = load_splits(&cfg.dataset)?;
    let mut report = SweepReport::default();
    match sweep_in_memory(cfg, &splits, &mut report) {
        Ok(()) => {
            write_outputs(cfg, &splits, &report, true)?;
            Ok(report)
        }
        Err(e) => {
            write_outputs(cfg, &splits, &report, false)?;
            Err(e)
        }
    }
}

/// Single-threaded epoch timings on the training split.
pub fn run_bench(cfg: &SweepConfig) -> Result<TimingTable, SweepError> {
    let splits = load_splits(&cfg.dataset)?;
    let mut solvers = vec![SolverKind::None];
    solvers.extend(cfg.solvers.iter().copied());
    benchmark_epochs(&splits.train, &cfg.radii, &solvers, &cfg.train).map_err(|source| {
        SweepError::Train {
            solver: SolverKind::None,
            radius: 0.0,
            source,
        }
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn minimal_config_gets_defaults() {
        let cfg = parse_config(r#"{"dataset": "synthetic"}"#).unwrap();
        assert_eq!(cfg.radii.len(), 11);
        assert_eq!(cfg.radii[0], 0.1);
        assert_eq!(cfg.radii[10], 0.2);
        assert_eq!(cfg.radii[3], 0.13);
        assert_eq!(cfg.train.learning_rate, 0.01);
        assert_eq!(cfg.train.epochs, 10);
        let DatasetSource::Synthetic(s) = &cfg.dataset else {
            panic!("expected synthetic");
        };
        assert_eq!((s.m, s.test_m, s.test_seed), (2000, 2000, Some(1)));
        assert_eq!(cfg, parse_config("{}").unwrap());
    }

    #[test]
    fn rejects_bad_configs() {
        let err = |t: &str| parse_config(t).unwrap_err().to_string();
        assert!(err(r#"{"radii": [0.2, 0.1]}"#).contains("strictly increasing"));
        assert!(err(r#"{"radii": [0.1, 0.1]}"#).contains("strictly increasing"));
        assert!(err(r#"{"radii": [-0.1]}"#).contains("nonnegative"));
        assert!(err(r#"{"solvers": ["TRS", "NEWTON"]}"#).contains("solvers[1]"));
        assert!(err(r#"{"bogus": 1}"#).contains("bogus"));
        assert!(err(r#"{"train": {"epochs": 0}}"#).contains("epochs"));
        assert!(err(r#"{"train": {"lr": 0.1}}"#).contains("train"));
        assert!(err(r#"{"train": {"radius": 0.1}}"#).contains("per cell"));
        assert!(err(r#"{"dataset": "mnist"}"#).contains("mnist"));
        assert!(err(r#"{"dataset": {"synthetic": {"shift": 0.7}}}"#).contains("shift"));
        assert!(err(r#"{"radii": []}"#).contains("at least one radius"));
        assert!(matches!(parse_config("{"), Err(SweepError::Parse(_))));
    }

    #[test]
    fn round_trip() {
        for text in [
            "{}",
            r#"{"radii": [0.0, 0.5], "solvers": ["PGD"], "train": {"pgd": {"step": {"fixed": 0.3}}}}"#,
            r#"{"dataset": {"csv": {"path": "a.csv", "schema": "s.json"}}, "emit": {"timing": false}}"#,
        ] {
            let cfg = parse_config(text).unwrap();
            assert_eq!(parse_config(&cfg.to_json()).unwrap(), cfg);
        }
    }

    #[test]
    fn baseline_is_implicit_and_deduplicated() {
        let cfg = parse_config(r#"{"solvers": ["NONE", "TRS", "TRS"], "radii": [0.1]}"#).unwrap();
        assert_eq!(cfg.solvers, vec![SolverKind::Trs]);
        assert_eq!(
            cells(&cfg),
            vec![(SolverKind::None, 0.0), (SolverKind::Trs, 0.1)]
        );
        let only = parse_config(r#"{"solvers": ["NONE"], "radii": []}"#).unwrap();
        assert_eq!(cells(&only), vec![(SolverKind::None, 0.0)]);
    }

    #[test]
    fn output_dir_precedence() {
        let file = Path::new("from_file");
        assert_eq!(resolve_output_dir(None, None, file), file);
        assert_eq!(
            resolve_output_dir(None, Some("env"), file),
            Path::new("env")
        );
        assert_eq!(resolve_output_dir(None, Some(""), file), file);
        assert_eq!(
            resolve_output_dir(Some(Path::new("flag")), Some("env"), file),
            Path::new("flag")
        );
    }

    #[test]
    fn csv_formatting() {
        let rep = SweepReport {
            rows: vec![SweepRow {
                solver: SolverKind::Trs,
                radius: 0.12,
                split: Split::Test,
                fairness: FairnessReport {
                    independence: Gap::between(1, 2, 1, 4),
                    separation_y0: None,
                    separation_y1: Gap::between(0, 1, 0, 1),
                    sufficiency_yhat0: None,
                    sufficiency_yhat1: Gap::between(2, 3, 1, 3),
                },
                accuracy: 0.75,
                mean_epoch_seconds: 0.001234567,
            }],
        };
        assert_eq!(
            fairness_csv(&rep),
            format!("{FAIRNESS_HEADER}\nTRS,0.12,test,0.250000,NA,0.000000,NA,0.333333,0.750000\n")
        );
        assert_eq!(fmt_sig4(0.001234567), "1.235e-3");
    }
}
