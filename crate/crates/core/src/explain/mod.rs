//! Model-agnostic feature-importance quantifiers and the importance tensor.

mod lime;
mod permutation;
mod shapley;

pub use lime::lime_tabular;
pub use permutation::permutation_importance;
pub use shapley::{shapley_exact, shapley_values_instance, TargetPolicy};

use std::fmt;
use std::io::Write;
use std::path::Path;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::data::{bootstrap, kfold, Dataset};
use crate::models::{train_with_classes, ModelError, ModelSpec, TrainedClassifier};
use crate::stats::mix_seed;

#[derive(Debug, Error)]
pub enum ExplainError {
    #[error("shape mismatch: {0}")]
    ShapeMismatch(String),
    #[error("exact Shapley enumeration limited to 16 features, got {0}")]
    TooManyFeatures(usize),
    #[error("background set is empty")]
    EmptyBackground,
    #[error("all proximity weights vanished (kernel too narrow)")]
    DegenerateKernel,
    #[error("need at least {need} samples, got {got}")]
    TooFewSamples { need: usize, got: usize },
    #[error(transparent)]
    Model(#[from] ModelError),
    #[error("cell (model={model}, technique={technique}, repetition={repetition}): {source}")]
    Cell {
        model: String,
        technique: Technique,
        repetition: usize,
        #[source]
        source: Box<ExplainError>,
    },
    #[error("tensor format error at row {row}: {message}")]
    Format { row: usize, message: String },
    #[error("io error: {0}")]
    Io(#[from] std::io::Error),
    #[error("csv error: {0}")]
    Csv(#[from] csv::Error),
    #[error("{0}")]
    Data(#[from] crate::data::DataError),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Technique {
    Pi,
    Shap,
    Lime,
}

impl Technique {
    pub fn parse(s: &str) -> Option<Self> {
        match s.to_ascii_lowercase().as_str() {
            "pi" | "permutation" | "permutation_importance" => Some(Self::Pi),
            "shap" | "shapley" => Some(Self::Shap),
            "lime" => Some(Self::Lime),
            _ => None,
        }
    }

    pub fn name(&self) -> &'static str {
        match self {
            Self::Pi => "pi",
            Self::Shap => "shap",
            Self::Lime => "lime",
        }
    }

    pub const ALL: [Technique; 3] = [Self::Pi, Self::Shap, Self::Lime];
}

impl fmt::Display for Technique {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

/// Pre-normalization importance magnitudes from one quantifier.
#[derive(Debug, Clone)]
pub struct RawImportance {
    pub technique: Technique,
    pub values: Vec<f64>,
}

/// Min-max normalization into [0, 1]; a constant vector maps to all zeros.
pub fn normalize_importance(values: &[f64]) -> Vec<f64> {
    let lo = values.iter().copied().fold(f64::INFINITY, f64::min);
    let hi = values.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let range = hi - lo;
    if range > 0.0 {
        values.iter().map(|v| (v - lo) / range).collect()
    } else {
        vec![0.0; values.len()]
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TensorEntry {
    pub model: String,
    pub technique: Technique,
    pub repetition: usize,
    pub values: Vec<f64>,
}

/// Normalized importance vectors indexed by (model, technique, repetition).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ImportanceTensor {
    pub feature_names: Vec<String>,
    pub entries: Vec<TensorEntry>,
}

impl ImportanceTensor {
    pub fn n_features(&self) -> usize {
        self.feature_names.len()
    }

    /// Source vectors matching the given filters (`None` = all).
    pub fn select(
        &self,
        model_filter: Option<&[String]>,
        technique_filter: Option<&[Technique]>,
    ) -> Vec<&TensorEntry> {
        self.entries
            .iter()
            .filter(|e| {
                model_filter.is_none_or(|ms| ms.contains(&e.model))
                    && technique_filter.is_none_or(|ts| ts.contains(&e.technique))
            })
            .collect()
    }

    /// Interchange CSV: `model,technique,repetition,<feature...>`.
    pub fn write_csv<W: Write>(&self, mut w: W) -> Result<(), ExplainError> {
        write!(w, "model,technique,repetition")?;
        for name in &self.feature_names {
            write!(w, ",{name}")?;
        }
        writeln!(w)?;
        for e in &self.entries {
            write!(w, "{},{},{}", e.model, e.technique, e.repetition)?;
            for v in &e.values {
                write!(w, ",{v:.4}")?;
            }
            writeln!(w)?;
        }
        Ok(())
    }

    pub fn save_csv(&self, path: &Path) -> Result<(), ExplainError> {
        let mut buf = Vec::new();
        self.write_csv(&mut buf)?;
        std::fs::write(path, buf)?;
        Ok(())
    }

    pub fn load_csv(path: &Path) -> Result<Self, ExplainError> {
        // open explicitly so missing files surface as IO, not CSV, errors
        let file = std::fs::File::open(path)?;
        let mut reader = csv::ReaderBuilder::new().has_headers(true).from_reader(file);
        let headers: Vec<String> = reader.headers()?.iter().map(|s| s.trim().to_string()).collect();
        if headers.len() < 4
            || headers[0] != "model"
            || headers[1] != "technique"
            || headers[2] != "repetition"
        {
            return Err(ExplainError::Format {
                row: 0,
                message: "header must start with model,technique,repetition and name at least one feature"
                    .into(),
            });
        }
        let feature_names: Vec<String> = headers[3..].to_vec();
        let d = feature_names.len();
        let mut entries = Vec::new();
        for (i, record) in reader.records().enumerate() {
            let record = record?;
            let row = i + 1;
            if record.len() != d + 3 {
                return Err(ExplainError::Format {
                    row,
                    message: format!("expected {} columns, got {}", d + 3, record.len()),
                });
            }
            let technique = Technique::parse(&record[1]).ok_or_else(|| ExplainError::Format {
                row,
                message: format!("unknown technique '{}'", &record[1]),
            })?;
            let repetition: usize = record[2].trim().parse().map_err(|_| ExplainError::Format {
                row,
                message: format!("bad repetition '{}'", &record[2]),
            })?;
            let mut values = Vec::with_capacity(d);
            for (j, cell) in record.iter().skip(3).enumerate() {
                let v: f64 = cell.trim().parse().map_err(|_| ExplainError::Format {
                    row,
                    message: format!("non-numeric value '{}' in column '{}'", cell, feature_names[j]),
                })?;
                if !v.is_finite() {
                    return Err(ExplainError::Format {
                        row,
                        message: format!("non-finite value in column '{}'", feature_names[j]),
                    });
                }
                values.push(v);
            }
            entries.push(TensorEntry {
                model: record[0].trim().to_string(),
                technique,
                repetition,
                values,
            });
        }
        if entries.is_empty() {
            return Err(ExplainError::Format {
                row: 0,
                message: "tensor has no rows".into(),
            });
        }
        Ok(ImportanceTensor {
            feature_names,
            entries,
        })
    }
}

/// How evaluation subsets (used to compute coefficients) are produced.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub enum RepetitionMode {
    /// k repetitions; repetition r trains on all folds but r and explains fold r.
    KFold { k: usize },
    /// Each repetition trains on a bootstrap resample and explains the
    /// out-of-bag rows.
    Bootstrap { repetitions: usize },
    /// One repetition with the given fraction held out for explaining.
    Holdout { eval_fraction: f64 },
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ExplainConfig {
    /// Permutations per feature for permutation importance.
    pub pi_repeats: usize,
    /// Background rows subsampled from the training split for Shapley.
    pub shap_background: usize,
    /// Explained instances per cell for Shapley.
    pub shap_max_explain: usize,
    pub lime_samples: usize,
    /// Explained instances per cell for LIME.
    pub lime_max_explain: usize,
    /// Defaults to 0.75 * sqrt(d) when unset.
    pub kernel_width: Option<f64>,
    pub ridge_lambda: f64,
}

impl Default for ExplainConfig {
    fn default() -> Self {
        Self {
            pi_repeats: 5,
            shap_background: 25,
            shap_max_explain: 10,
            lime_samples: 1000,
            lime_max_explain: 10,
            kernel_width: None,
            ridge_lambda: 1.0,
        }
    }
}

fn subsample(indices: &[usize], limit: usize, seed: u64) -> Vec<usize> {
    use rand::seq::SliceRandom;
    use rand::SeedableRng;
    if indices.len() <= limit {
        return indices.to_vec();
    }
    let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
    let mut picked: Vec<usize> = indices
        .choose_multiple(&mut rng, limit)
        .copied()
        .collect();
    picked.sort_unstable();
    picked
}

/// (train indices, evaluation indices) of one repetition.
type IndexSplit = (Vec<usize>, Vec<usize>);

fn repetition_splits(
    n: usize,
    mode: RepetitionMode,
    seed: u64,
) -> Result<Vec<IndexSplit>, ExplainError> {
    match mode {
        RepetitionMode::KFold { k } => {
            let plan = kfold(n, k, mix_seed(seed, &[b"tensor-folds"]))?;
            Ok((0..k).map(|f| plan.split(f)).collect())
        }
        RepetitionMode::Bootstrap { repetitions } => {
            let mut splits = Vec::with_capacity(repetitions);
            for r in 0..repetitions {
                let sample =
                    bootstrap(n, mix_seed(seed, &[b"boot", &(r as u64).to_le_bytes()])).indices;
                let mut in_bag = vec![false; n];
                for &i in &sample {
                    in_bag[i] = true;
                }
                let oob: Vec<usize> = (0..n).filter(|&i| !in_bag[i]).collect();
                // tiny datasets can have an empty out-of-bag set
                let eval = if oob.is_empty() { (0..n).collect() } else { oob };
                splits.push((sample, eval));
            }
            Ok(splits)
        }
        RepetitionMode::Holdout { eval_fraction } => {
            if !(eval_fraction > 0.0 && eval_fraction < 1.0) {
                return Err(ExplainError::ShapeMismatch(format!(
                    "holdout fraction must be in (0,1), got {eval_fraction}"
                )));
            }
            use rand::seq::SliceRandom;
            use rand::SeedableRng;
            let mut order: Vec<usize> = (0..n).collect();
            let mut rng =
                rand_chacha::ChaCha8Rng::seed_from_u64(mix_seed(seed, &[b"holdout"]));
            order.shuffle(&mut rng);
            let n_eval = ((n as f64 * eval_fraction).round() as usize).clamp(1, n - 1);
            let eval = order[..n_eval].to_vec();
            let train = order[n_eval..].to_vec();
            Ok(vec![(train, eval)])
        }
    }
}

fn column_stds(x: &[Vec<f64>]) -> Vec<f64> {
    let d = x[0].len();
    (0..d)
        .map(|j| {
            let col: Vec<f64> = x.iter().map(|r| r[j]).collect();
            crate::stats::sample_std(&col)
        })
        .collect()
}

fn compute_cell(
    model: &TrainedClassifier,
    technique: Technique,
    train_x: &[Vec<f64>],
    eval_x: &[Vec<f64>],
    eval_y: &[usize],
    config: &ExplainConfig,
    cell_seed: u64,
) -> Result<RawImportance, ExplainError> {
    match technique {
        Technique::Pi => permutation_importance(model, eval_x, eval_y, config.pi_repeats, cell_seed),
        Technique::Shap => {
            let bg_rows: Vec<usize> = (0..train_x.len()).collect();
            let bg_idx = subsample(&bg_rows, config.shap_background, mix_seed(cell_seed, &[b"bg"]));
            let background: Vec<Vec<f64>> = bg_idx.iter().map(|&i| train_x[i].clone()).collect();
            let ex_rows: Vec<usize> = (0..eval_x.len()).collect();
            let ex_idx = subsample(&ex_rows, config.shap_max_explain, mix_seed(cell_seed, &[b"ex"]));
            let explained: Vec<Vec<f64>> = ex_idx.iter().map(|&i| eval_x[i].clone()).collect();
            shapley_exact(model, &explained, &background, TargetPolicy::PredictedClass)
        }
        Technique::Lime => {
            let ex_rows: Vec<usize> = (0..eval_x.len()).collect();
            let ex_idx = subsample(&ex_rows, config.lime_max_explain, mix_seed(cell_seed, &[b"ex"]));
            let explained: Vec<Vec<f64>> = ex_idx.iter().map(|&i| eval_x[i].clone()).collect();
            let stds = column_stds(train_x);
            let d = train_x[0].len();
            let kw = config.kernel_width.unwrap_or(0.75 * (d as f64).sqrt());
            lime_tabular(
                model,
                &explained,
                &stds,
                config.lime_samples,
                kw,
                config.ridge_lambda,
                cell_seed,
            )
        }
    }
}

/// One normalized importance vector per (model, technique, repetition).
/// Models are re-trained per repetition on the training split so that
/// coefficients always come from rows the model did not fit on.
pub fn compute_tensor(
    model_specs: &[(String, ModelSpec)],
    techniques: &[Technique],
    ds: &Dataset,
    mode: RepetitionMode,
    config: &ExplainConfig,
    seed: u64,
) -> Result<ImportanceTensor, ExplainError> {
    let splits = repetition_splits(ds.n_rows(), mode, seed)?;
    let n_classes = ds.n_classes();

    let cells: Vec<(usize, usize)> = (0..model_specs.len())
        .flat_map(|m| (0..splits.len()).map(move |r| (m, r)))
        .collect();

    let mut results: Vec<Vec<TensorEntry>> = cells
        .par_iter()
        .map(|&(mi, rep)| {
            let (name, spec) = &model_specs[mi];
            let (train_idx, eval_idx) = &splits[rep];
            let (tx, ty) = ds.subset(train_idx);
            let (ex, ey) = ds.subset(eval_idx);
            let train_seed = mix_seed(seed, &[name.as_bytes(), b"train", &(rep as u64).to_le_bytes()]);
            let model = train_with_classes(spec, &tx, &ty, n_classes, train_seed).map_err(|e| {
                ExplainError::Cell {
                    model: name.clone(),
                    technique: Technique::Pi,
                    repetition: rep,
                    source: Box::new(e.into()),
                }
            })?;
            let mut entries = Vec::with_capacity(techniques.len());
            for &technique in techniques {
                let cell_seed = mix_seed(
                    seed,
                    &[
                        name.as_bytes(),
                        technique.name().as_bytes(),
                        &(rep as u64).to_le_bytes(),
                    ],
                );
                let raw = compute_cell(&model, technique, &tx, &ex, &ey, config, cell_seed)
                    .map_err(|e| ExplainError::Cell {
                        model: name.clone(),
                        technique,
                        repetition: rep,
                        source: Box::new(e),
                    })?;
                entries.push(TensorEntry {
                    model: name.clone(),
                    technique,
                    repetition: rep,
                    values: normalize_importance(&raw.values),
                });
            }
            Ok::<_, ExplainError>(entries)
        })
        .collect::<Result<Vec<_>, _>>()?;

    // deterministic order regardless of scheduling
    let mut entries: Vec<TensorEntry> = results.drain(..).flatten().collect();
    entries.sort_by(|a, b| {
        (a.model.as_str(), a.technique.name(), a.repetition).cmp(&(
            b.model.as_str(),
            b.technique.name(),
            b.repetition,
        ))
    });

    Ok(ImportanceTensor {
        feature_names: ds.feature_names.clone(),
        entries,
    })
}
