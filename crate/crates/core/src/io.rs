//! Dataset files, train/test splitting and the results CSV.
//!
//! A dataset is a plain manifest plus one CSV per task:
//!
//! ```text
//! # comments and blank lines are ignored
//! d: 617
//! task: isolet1.csv
//! task: isolet2.csv
//! ```
//!
//! Task paths are relative to the manifest. Task files have no header; each
//! line holds `d` feature values followed by the response.
//!
//! Results are written as CSV (schema version [`RESULTS_SCHEMA_VERSION`])
//! with header [`RESULTS_HEADER`]. Inapplicable fields are left empty and
//! floats use the shortest decimal form that parses back to the same value.

use std::fs;
use std::path::{Path, PathBuf};

use ndarray::{Array1, Array2};

use crate::error::{MtflError, Result};
use crate::model::{Task, TaskDataset};
use crate::rng::{ceil_count, SeededStream};

pub const RESULTS_SCHEMA_VERSION: u32 = 1;
pub const RESULTS_HEADER: [&str; 10] = [
    "algorithm",
    "seed",
    "stage",
    "lambda",
    "theta",
    "tau",
    "l21_error",
    "nmse",
    "amse",
    "objective",
];

/// `key: value` lines with their 1-based line numbers. Blank lines and lines
/// starting with `#` are skipped.
pub fn parse_key_values(text: &str, path: &Path) -> Result<Vec<(usize, String, String)>> {
    let mut out = Vec::new();
    for (idx, raw) in text.lines().enumerate() {
        let line = raw.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let (key, value) = line.split_once(':').ok_or_else(|| MtflError::Parse {
            path: path.to_path_buf(),
            line: idx + 1,
            message: format!("expected `key: value`, found `{line}`"),
        })?;
        out.push((idx + 1, key.trim().to_string(), value.trim().to_string()));
    }
    Ok(out)
}

/// Loads a dataset from its manifest. Tasks keep manifest order.
pub fn load_dataset(manifest: impl AsRef<Path>) -> Result<TaskDataset> {
    let manifest = manifest.as_ref();
    let text = fs::read_to_string(manifest).map_err(|e| MtflError::io(manifest, e))?;
    let base = manifest.parent().unwrap_or_else(|| Path::new("."));

    let mut d: Option<usize> = None;
    let mut task_paths = Vec::new();
    for (line, key, value) in parse_key_values(&text, manifest)? {
        let parse_err = |message: String| MtflError::Parse {
            path: manifest.to_path_buf(),
            line,
            message,
        };
        match key.as_str() {
            "d" => {
                if d.is_some() {
                    return Err(parse_err("duplicate `d` entry".into()));
                }
                let value: usize = value
                    .parse()
                    .map_err(|_| parse_err(format!("`d` must be a positive integer, got `{value}`")))?;
                if value == 0 {
                    return Err(parse_err("`d` must be at least 1".into()));
                }
                d = Some(value);
            }
            "task" => {
                if d.is_none() {
                    return Err(parse_err("`d` must be declared before any task".into()));
                }
                task_paths.push(base.join(value));
            }
            other => return Err(parse_err(format!("unknown manifest key `{other}`"))),
        }
    }
    let d = d.ok_or_else(|| MtflError::Parse {
        path: manifest.to_path_buf(),
        line: 0,
        message: "manifest does not declare `d`".into(),
    })?;
    if task_paths.is_empty() {
        return Err(MtflError::Parse {
            path: manifest.to_path_buf(),
            line: 0,
            message: "manifest lists no tasks".into(),
        });
    }

    let tasks = task_paths
        .iter()
        .map(|p| load_task(p, d))
        .collect::<Result<Vec<_>>>()?;
    TaskDataset::new(tasks)
}

fn load_task(path: &Path, d: usize) -> Result<Task> {
    let file = fs::File::open(path).map_err(|e| MtflError::io(path, e))?;
    let mut reader = csv::ReaderBuilder::new()
        .has_headers(false)
        .flexible(true)
        .trim(csv::Trim::All)
        .from_reader(file);

    let mut features = Vec::new();
    let mut responses = Vec::new();
    for record in reader.records() {
        let record = record.map_err(|e| MtflError::Parse {
            path: path.to_path_buf(),
            line: e.position().map_or(0, |p| p.line() as usize),
            message: e.to_string(),
        })?;
        let line = record.position().map_or(0, |p| p.line() as usize);
        if record.len() == 1 && record[0].is_empty() {
            continue;
        }
        if record.len() != d + 1 {
            return Err(MtflError::Parse {
                path: path.to_path_buf(),
                line,
                message: format!(
                    "expected {} columns ({d} features and a response), found {}",
                    d + 1,
                    record.len()
                ),
            });
        }
        for (col, field) in record.iter().enumerate() {
            let value: f64 = field.parse().map_err(|_| MtflError::Parse {
                path: path.to_path_buf(),
                line,
                message: format!("column {}: `{field}` is not a number", col + 1),
            })?;
            if col < d {
                features.push(value);
            } else {
                responses.push(value);
            }
        }
    }
    let n = responses.len();
    if n == 0 {
        return Err(MtflError::Parse {
            path: path.to_path_buf(),
            line: 0,
            message: "task file has no samples".into(),
        });
    }
    let x = Array2::from_shape_vec((n, d), features)
        .map_err(|e| MtflError::Dimension(format!("{}: {e}", path.display())))?;
    Ok(Task {
        x,
        y: Array1::from(responses),
    })
}

/// Writes `manifest.txt` and `task_XXX.csv` files into `dir` and returns the
/// manifest path. Loading the manifest gives back the same numbers.
pub fn export_dataset(data: &TaskDataset, dir: impl AsRef<Path>) -> Result<PathBuf> {
    let dir = dir.as_ref();
    fs::create_dir_all(dir).map_err(|e| MtflError::io(dir, e))?;
    let mut manifest = format!("d: {}\n", data.d());
    for (i, task) in data.tasks().iter().enumerate() {
        let name = format!("task_{:03}.csv", i + 1);
        let path = dir.join(&name);
        let mut writer = csv::WriterBuilder::new()
            .has_headers(false)
            .from_path(&path)
            .map_err(|e| csv_io(&path, e))?;
        for (row, y) in task.x.rows().into_iter().zip(task.y.iter()) {
            let fields: Vec<String> = row
                .iter()
                .chain(std::iter::once(y))
                .map(|v| format_float(*v))
                .collect();
            writer.write_record(&fields).map_err(|e| csv_io(&path, e))?;
        }
        writer.flush().map_err(|e| MtflError::io(&path, e))?;
        manifest.push_str(&format!("task: {name}\n"));
    }
    let manifest_path = dir.join("manifest.txt");
    fs::write(&manifest_path, manifest).map_err(|e| MtflError::io(&manifest_path, e))?;
    Ok(manifest_path)
}

fn csv_io(path: &Path, e: csv::Error) -> MtflError {
    MtflError::io(path, std::io::Error::other(e))
}

/// Shortest round-trip decimal form (`inf` for infinity).
pub fn format_float(v: f64) -> String {
    format!("{v:?}")
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SplitSpec {
    /// Fraction of each task's samples used for training, in `(0, 1)`.
    pub train_ratio: f64,
    pub seed: u64,
}

/// Per-task random split. Each task contributes `ceil(train_ratio * n_i)`
/// samples, drawn without replacement, to the training set and the rest to
/// the test set; both keep the original sample order.
pub fn split(data: &TaskDataset, spec: &SplitSpec) -> Result<(TaskDataset, TaskDataset)> {
    if !(spec.train_ratio > 0.0 && spec.train_ratio < 1.0) {
        return Err(MtflError::InvalidParameter(format!(
            "train ratio must lie in (0, 1), got {}",
            spec.train_ratio
        )));
    }
    let mut rng = SeededStream::new(spec.seed);
    let mut train = Vec::with_capacity(data.m());
    let mut test = Vec::with_capacity(data.m());
    for (i, task) in data.tasks().iter().enumerate() {
        let n = task.n();
        let k = ceil_count(spec.train_ratio, n);
        if k == 0 || k >= n {
            return Err(MtflError::InvalidParameter(format!(
                "train ratio {} leaves task {i} ({n} samples) with {k} training and {} test samples",
                spec.train_ratio,
                n - k.min(n)
            )));
        }
        let mut in_train = vec![false; n];
        for idx in rng.sample_without_replacement(n, k) {
            in_train[idx] = true;
        }
        let (tr, te): (Vec<usize>, Vec<usize>) = (0..n).partition(|&r| in_train[r]);
        train.push(take_rows(task, &tr));
        test.push(take_rows(task, &te));
    }
    Ok((TaskDataset::new(train)?, TaskDataset::new(test)?))
}

fn take_rows(task: &Task, rows: &[usize]) -> Task {
    Task {
        x: task.x.select(ndarray::Axis(0), rows),
        y: task.y.select(ndarray::Axis(0), rows),
    }
}

/// One line of the results CSV.
#[derive(Debug, Clone, PartialEq)]
pub struct ResultRow {
    pub algorithm: String,
    pub seed: u64,
    pub stage: Option<usize>,
    pub lambda: Option<f64>,
    pub theta: Option<f64>,
    pub tau: Option<f64>,
    pub l21_error: Option<f64>,
    pub nmse: Option<f64>,
    pub amse: Option<f64>,
    pub objective: Option<f64>,
}

impl ResultRow {
    pub fn new(algorithm: impl Into<String>, seed: u64) -> Self {
        ResultRow {
            algorithm: algorithm.into(),
            seed,
            stage: None,
            lambda: None,
            theta: None,
            tau: None,
            l21_error: None,
            nmse: None,
            amse: None,
            objective: None,
        }
    }

    fn fields(&self) -> Vec<String> {
        let f = |v: Option<f64>| v.map(format_float).unwrap_or_default();
        vec![
            self.algorithm.clone(),
            self.seed.to_string(),
            self.stage.map(|s| s.to_string()).unwrap_or_default(),
            f(self.lambda),
            f(self.theta),
            f(self.tau),
            f(self.l21_error),
            f(self.nmse),
            f(self.amse),
            f(self.objective),
        ]
    }
}

/// Serializes rows to CSV bytes, header first.
pub fn results_to_csv(rows: &[ResultRow]) -> Result<Vec<u8>> {
    let mut writer = csv::Writer::from_writer(Vec::new());
    let to_err = |e: csv::Error| MtflError::io("<memory>", std::io::Error::other(e));
    writer.write_record(RESULTS_HEADER).map_err(to_err)?;
    for row in rows {
        writer.write_record(row.fields()).map_err(to_err)?;
    }
    writer
        .into_inner()
        .map_err(|e| MtflError::io("<memory>", std::io::Error::other(e.to_string())))
}

pub fn write_results(rows: &[ResultRow], path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    let bytes = results_to_csv(rows)?;
    fs::write(path, bytes).map_err(|e| MtflError::io(path, e))
}

pub fn read_results(path: impl AsRef<Path>) -> Result<Vec<ResultRow>> {
    let path = path.as_ref();
    let mut reader = csv::Reader::from_path(path).map_err(|e| csv_io(path, e))?;
    let header = reader.headers().map_err(|e| csv_io(path, e))?.clone();
    if header.iter().ne(RESULTS_HEADER.iter().copied()) {
        return Err(MtflError::Parse {
            path: path.to_path_buf(),
            line: 1,
            message: "unexpected results header".into(),
        });
    }
    let mut rows = Vec::new();
    for record in reader.records() {
        let record = record.map_err(|e| csv_io(path, e))?;
        let line = record.position().map_or(0, |p| p.line() as usize);
        let bad = |message: String| MtflError::Parse {
            path: path.to_path_buf(),
            line,
            message,
        };
        let opt_f64 = |i: usize| -> Result<Option<f64>> {
            let s = &record[i];
            if s.is_empty() {
                Ok(None)
            } else {
                s.parse()
                    .map(Some)
                    .map_err(|_| bad(format!("`{s}` in column {} is not a number", RESULTS_HEADER[i])))
            }
        };
        rows.push(ResultRow {
            algorithm: record[0].to_string(),
            seed: record[1]
                .parse()
                .map_err(|_| bad(format!("bad seed `{}`", &record[1])))?,
            stage: if record[2].is_empty() {
                None
            } else {
                Some(record[2].parse().map_err(|_| bad(format!("bad stage `{}`", &record[2])))?)
            },
            lambda: opt_f64(3)?,
            theta: opt_f64(4)?,
            tau: opt_f64(5)?,
            l21_error: opt_f64(6)?,
            nmse: opt_f64(7)?,
            amse: opt_f64(8)?,
            objective: opt_f64(9)?,
        });
    }
    Ok(rows)
}
