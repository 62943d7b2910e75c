//! Dataset ingestion, preprocessing, partitioning, and synthesis.

use std::collections::BTreeMap;
use std::path::Path;

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Error)]
pub enum DataError {
    #[error("target column '{0}' not found in header")]
    MissingTarget(String),
    #[error("non-numeric feature value '{value}' at row {row}, column '{column}'")]
    NonNumericFeature {
        row: usize,
        column: String,
        value: String,
    },
    #[error("no usable rows after preprocessing")]
    EmptyDataset,
    #[error("fold count {k} invalid for {n} rows (need 2 <= k <= n)")]
    BadFoldCount { k: usize, n: usize },
    #[error("bad shape: {0}")]
    BadShape(String),
    #[error("csv read failed: {0}")]
    Csv(#[from] csv::Error),
    #[error("io error: {0}")]
    Io(#[from] std::io::Error),
}

/// A fully preprocessed tabular classification dataset.
///
/// Immutable after construction; safe to share across threads.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct Dataset {
    pub feature_names: Vec<String>,
    /// n rows by d columns.
    pub x: Vec<Vec<f64>>,
    /// Class indices in `[0, class_names.len())`.
    pub y: Vec<usize>,
    pub class_names: Vec<String>,
}

impl Dataset {
    pub fn n_rows(&self) -> usize {
        self.x.len()
    }

    pub fn n_features(&self) -> usize {
        self.feature_names.len()
    }

    pub fn n_classes(&self) -> usize {
        self.class_names.len()
    }

    /// Rows of `x` and `y` selected by index (indices may repeat).
    pub fn subset(&self, indices: &[usize]) -> (Vec<Vec<f64>>, Vec<usize>) {
        let xs = indices.iter().map(|&i| self.x[i].clone()).collect();
        let ys = indices.iter().map(|&i| self.y[i]).collect();
        (xs, ys)
    }
}

/// Row-to-fold assignment for k-fold cross validation.
#[derive(Debug, Clone)]
pub struct FoldPlan {
    pub k: usize,
    /// `assignments[row]` is the fold index in `[0, k)`.
    pub assignments: Vec<usize>,
}

impl FoldPlan {
    /// Row indices held out by fold `fold`, and the remaining training rows.
    pub fn split(&self, fold: usize) -> (Vec<usize>, Vec<usize>) {
        let mut train = Vec::new();
        let mut eval = Vec::new();
        for (row, &f) in self.assignments.iter().enumerate() {
            if f == fold {
                eval.push(row);
            } else {
                train.push(row);
            }
        }
        (train, eval)
    }
}

/// Indices of a bootstrap resample or split.
#[derive(Debug, Clone)]
pub struct SampleIndices {
    pub indices: Vec<usize>,
}

/// Load a CSV with a header row. All non-target columns must be numeric;
/// empty cells are treated as missing and imputed with the column median.
/// Rows with a missing target are dropped. Target labels are encoded in
/// first-appearance order.
pub fn load_csv(path: &Path, target_column: &str) -> Result<Dataset, DataError> {
    let mut reader = csv::ReaderBuilder::new()
        .has_headers(true)
        .flexible(false)
        .from_path(path)?;

    let headers: Vec<String> = reader.headers()?.iter().map(|s| s.trim().to_string()).collect();
    let target_idx = headers
        .iter()
        .position(|h| h == target_column)
        .ok_or_else(|| DataError::MissingTarget(target_column.to_string()))?;

    let feature_names: Vec<String> = headers
        .iter()
        .enumerate()
        .filter(|(i, _)| *i != target_idx)
        .map(|(_, h)| h.clone())
        .collect();
    let d = feature_names.len();

    let mut rows: Vec<Vec<Option<f64>>> = Vec::new();
    let mut labels: Vec<String> = Vec::new();
    for (row_idx, record) in reader.records().enumerate() {
        let record = record?;
        let target = record.get(target_idx).unwrap_or("").trim();
        if target.is_empty() {
            continue; // missing target: drop the row
        }
        let mut row = Vec::with_capacity(d);
        let mut col = 0;
        for (i, cell) in record.iter().enumerate() {
            if i == target_idx {
                continue;
            }
            let cell = cell.trim();
            if cell.is_empty() {
                row.push(None);
            } else {
                let v: f64 = cell.parse().map_err(|_| DataError::NonNumericFeature {
                    row: row_idx,
                    column: feature_names[col].clone(),
                    value: cell.to_string(),
                })?;
                row.push(Some(v));
            }
            col += 1;
        }
        rows.push(row);
        labels.push(target.to_string());
    }
    if rows.is_empty() {
        return Err(DataError::EmptyDataset);
    }

    // median imputation per column
    let mut medians = vec![0.0; d];
    for j in 0..d {
        let mut present: Vec<f64> = rows.iter().filter_map(|r| r[j]).collect();
        if !present.is_empty() {
            present.sort_by(|a, b| a.total_cmp(b));
            medians[j] = crate::stats::quantile_sorted(&present, 0.5);
        }
    }
    let x: Vec<Vec<f64>> = rows
        .into_iter()
        .map(|r| {
            r.into_iter()
                .enumerate()
                .map(|(j, v)| v.unwrap_or(medians[j]))
                .collect()
        })
        .collect();

    // encode labels in first-appearance order
    let mut class_ids: BTreeMap<String, usize> = BTreeMap::new();
    let mut class_names: Vec<String> = Vec::new();
    let mut y = Vec::with_capacity(labels.len());
    for label in labels {
        let id = *class_ids.entry(label.clone()).or_insert_with(|| {
            class_names.push(label.clone());
            class_names.len() - 1
        });
        y.push(id);
    }

    Ok(Dataset {
        feature_names,
        x,
        y,
        class_names,
    })
}

/// Per-column min-max scaling into [0, 1]. Constant columns map to all zeros.
/// Idempotent.
pub fn normalize(ds: &Dataset) -> Dataset {
    let n = ds.n_rows();
    let d = ds.n_features();
    let mut out = ds.clone();
    for j in 0..d {
        let mut lo = f64::INFINITY;
        let mut hi = f64::NEG_INFINITY;
        for i in 0..n {
            lo = lo.min(ds.x[i][j]);
            hi = hi.max(ds.x[i][j]);
        }
        let range = hi - lo;
        for i in 0..n {
            out.x[i][j] = if range > 0.0 {
                (ds.x[i][j] - lo) / range
            } else {
                0.0
            };
        }
    }
    out
}

/// Shuffled k-fold assignment with fold sizes within one of each other.
pub fn kfold(n: usize, k: usize, seed: u64) -> Result<FoldPlan, DataError> {
    if k < 2 || k > n {
        return Err(DataError::BadFoldCount { k, n });
    }
    let mut order: Vec<usize> = (0..n).collect();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    order.shuffle(&mut rng);

    let mut assignments = vec![0usize; n];
    let base = n / k;
    let extra = n % k;
    let mut pos = 0;
    for fold in 0..k {
        let size = base + usize::from(fold < extra);
        for _ in 0..size {
            assignments[order[pos]] = fold;
            pos += 1;
        }
    }
    Ok(FoldPlan { k, assignments })
}

/// n indices drawn uniformly with replacement.
pub fn bootstrap(n: usize, seed: u64) -> SampleIndices {
    assert!(n >= 1, "bootstrap of empty dataset");
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let indices = (0..n).map(|_| rng.gen_range(0..n)).collect();
    SampleIndices { indices }
}

/// Synthetic classification data. Labels are cut from a random linear
/// combination of the first `informative` features; the remaining columns
/// are independent noise. Returns the dataset plus the informative indices.
pub fn synthetic_data(
    n: usize,
    d: usize,
    informative: usize,
    classes: usize,
    seed: u64,
) -> Result<(Dataset, Vec<usize>), DataError> {
    if informative == 0 || informative > d {
        return Err(DataError::BadShape(format!(
            "informative must be in [1, {d}], got {informative}"
        )));
    }
    if classes < 2 {
        return Err(DataError::BadShape(format!(
            "need at least 2 classes, got {classes}"
        )));
    }
    if n < classes {
        return Err(DataError::BadShape(format!(
            "need at least {classes} rows for {classes} classes, got {n}"
        )));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);

    // weights bounded away from zero so every informative column matters
    let weights: Vec<f64> = (0..informative)
        .map(|_| {
            let sign = if rng.gen_bool(0.5) { 1.0 } else { -1.0 };
            sign * rng.gen_range(0.5..1.5)
        })
        .collect();

    let mut x = Vec::with_capacity(n);
    let mut scores = Vec::with_capacity(n);
    for _ in 0..n {
        let row: Vec<f64> = (0..d).map(|_| rng.gen_range(0.0..1.0)).collect();
        let score: f64 = (0..informative).map(|j| weights[j] * row[j]).sum();
        scores.push(score);
        x.push(row);
    }

    // class thresholds at equally spaced score quantiles
    let mut sorted = scores.clone();
    sorted.sort_by(|a, b| a.total_cmp(b));
    let cuts: Vec<f64> = (1..classes)
        .map(|c| crate::stats::quantile_sorted(&sorted, c as f64 / classes as f64))
        .collect();
    let y: Vec<usize> = scores
        .iter()
        .map(|&s| cuts.iter().take_while(|&&c| s > c).count())
        .collect();

    let feature_names = (0..d).map(|j| format!("feature_{j}")).collect();
    let class_names = (0..classes).map(|c| format!("class_{c}")).collect();
    let ds = Dataset {
        feature_names,
        x,
        y,
        class_names,
    };
    Ok((ds, (0..informative).collect()))
}
