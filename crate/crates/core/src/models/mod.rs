//! Classifier families, training, grid-search tuning, and evaluation.

mod logistic;
mod nn;
mod svm;
mod tree;

pub use logistic::LogisticModel;
pub use nn::NeuralNet;
pub use svm::{BinarySvm, SvmModel};
pub use tree::{DecisionTree, Forest, SplitCriterion};

use std::collections::BTreeMap;
use std::fmt;
use std::path::Path;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::data::{kfold, Dataset};
use crate::stats::mix_seed;

#[derive(Debug, Error)]
pub enum ModelError {
    #[error("hyperparameter grid is empty")]
    EmptyGrid,
    #[error("training diverged (non-finite loss) with hyperparameters {0:?}")]
    TrainingDiverged(ParamMap),
    #[error("shape mismatch: {0}")]
    ShapeMismatch(String),
    #[error("training labels contain fewer than 2 classes")]
    ClassCountTooLow,
    #[error("bad hyperparameter: {0}")]
    BadHyperparameter(String),
    #[error("{0}")]
    Data(#[from] crate::data::DataError),
    #[error("model io failed: {0}")]
    Io(#[from] std::io::Error),
    #[error("model (de)serialization failed: {0}")]
    Serde(#[from] serde_json::Error),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum ModelFamily {
    LogisticRegression,
    RandomForest,
    SvmRbf,
    NeuralNetwork,
}

impl ModelFamily {
    pub fn parse(s: &str) -> Option<Self> {
        match s.to_ascii_lowercase().as_str() {
            "lr" | "logistic" | "logistic_regression" => Some(Self::LogisticRegression),
            "rf" | "random_forest" => Some(Self::RandomForest),
            "svm" | "svm_rbf" => Some(Self::SvmRbf),
            "nn" | "neural_network" => Some(Self::NeuralNetwork),
            _ => None,
        }
    }

    pub fn name(&self) -> &'static str {
        match self {
            Self::LogisticRegression => "logistic_regression",
            Self::RandomForest => "random_forest",
            Self::SvmRbf => "svm_rbf",
            Self::NeuralNetwork => "neural_network",
        }
    }

    pub const ALL: [ModelFamily; 4] = [
        Self::LogisticRegression,
        Self::RandomForest,
        Self::SvmRbf,
        Self::NeuralNetwork,
    ];

    /// Default hyperparameter grid searched when the user does not supply one.
    pub fn default_grid(&self) -> Grid {
        let mut g = Grid::new();
        match self {
            Self::LogisticRegression => {
                g.insert("lr".into(), vec![ParamValue::Float(0.01), ParamValue::Float(0.1)]);
                g.insert(
                    "epochs".into(),
                    vec![ParamValue::Int(200), ParamValue::Int(500)],
                );
            }
            Self::RandomForest => {
                g.insert(
                    "trees".into(),
                    vec![ParamValue::Int(100), ParamValue::Int(300)],
                );
                g.insert("min_leaf".into(), vec![ParamValue::Int(1), ParamValue::Int(5)]);
                g.insert(
                    "criterion".into(),
                    vec![
                        ParamValue::Text("gini".into()),
                        ParamValue::Text("entropy".into()),
                    ],
                );
                g.insert(
                    "bootstrap".into(),
                    vec![ParamValue::Bool(true), ParamValue::Bool(false)],
                );
            }
            Self::SvmRbf => {
                g.insert(
                    "c_reg".into(),
                    vec![
                        ParamValue::Float(0.1),
                        ParamValue::Float(1.0),
                        ParamValue::Float(10.0),
                    ],
                );
                g.insert(
                    "gamma".into(),
                    vec![
                        ParamValue::Float(0.01),
                        ParamValue::Float(0.1),
                        ParamValue::Float(1.0),
                    ],
                );
            }
            Self::NeuralNetwork => {
                g.insert(
                    "lr".into(),
                    vec![ParamValue::Float(0.001), ParamValue::Float(0.01)],
                );
                g.insert("batch".into(), vec![ParamValue::Int(2), ParamValue::Int(16)]);
                g.insert("epochs".into(), vec![ParamValue::Int(25), ParamValue::Int(100)]);
            }
        }
        g
    }

    /// A single sensible operating point, used when tuning is skipped.
    pub fn default_spec(&self) -> ModelSpec {
        let mut params = ParamMap::new();
        match self {
            Self::LogisticRegression => {
                params.insert("lr".into(), ParamValue::Float(0.1));
                params.insert("epochs".into(), ParamValue::Int(500));
            }
            Self::RandomForest => {
                params.insert("trees".into(), ParamValue::Int(100));
                params.insert("min_leaf".into(), ParamValue::Int(2));
                params.insert("criterion".into(), ParamValue::Text("entropy".into()));
                params.insert("bootstrap".into(), ParamValue::Bool(true));
            }
            Self::SvmRbf => {
                params.insert("c_reg".into(), ParamValue::Float(1.0));
                params.insert("gamma".into(), ParamValue::Float(0.5));
            }
            Self::NeuralNetwork => {
                params.insert("lr".into(), ParamValue::Float(0.05));
                params.insert("batch".into(), ParamValue::Int(16));
                params.insert("epochs".into(), ParamValue::Int(100));
            }
        }
        ModelSpec {
            family: *self,
            params,
        }
    }
}

impl fmt::Display for ModelFamily {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum ParamValue {
    Bool(bool),
    Int(i64),
    Float(f64),
    Text(String),
}

impl fmt::Display for ParamValue {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            ParamValue::Bool(b) => write!(f, "{b}"),
            ParamValue::Int(i) => write!(f, "{i}"),
            ParamValue::Float(x) => write!(f, "{x}"),
            ParamValue::Text(s) => f.write_str(s),
        }
    }
}

impl ParamValue {
    fn as_f64(&self) -> Option<f64> {
        match self {
            ParamValue::Float(x) => Some(*x),
            ParamValue::Int(i) => Some(*i as f64),
            _ => None,
        }
    }

    fn as_usize(&self) -> Option<usize> {
        match self {
            ParamValue::Int(i) if *i >= 0 => Some(*i as usize),
            _ => None,
        }
    }

    fn as_bool(&self) -> Option<bool> {
        match self {
            ParamValue::Bool(b) => Some(*b),
            _ => None,
        }
    }

    /// Parse "true", "300", "0.1", or free text, preferring the narrowest type.
    pub fn parse(s: &str) -> ParamValue {
        if let Ok(b) = s.parse::<bool>() {
            return ParamValue::Bool(b);
        }
        if let Ok(i) = s.parse::<i64>() {
            return ParamValue::Int(i);
        }
        if let Ok(x) = s.parse::<f64>() {
            return ParamValue::Float(x);
        }
        ParamValue::Text(s.to_string())
    }
}

pub type ParamMap = BTreeMap<String, ParamValue>;
pub type Grid = BTreeMap<String, Vec<ParamValue>>;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModelSpec {
    pub family: ModelFamily,
    pub params: ParamMap,
}

fn get_f64(p: &ParamMap, key: &str, default: f64) -> Result<f64, ModelError> {
    match p.get(key) {
        None => Ok(default),
        Some(v) => v
            .as_f64()
            .ok_or_else(|| ModelError::BadHyperparameter(format!("{key} must be numeric"))),
    }
}

fn get_usize(p: &ParamMap, key: &str, default: usize) -> Result<usize, ModelError> {
    match p.get(key) {
        None => Ok(default),
        Some(v) => v
            .as_usize()
            .ok_or_else(|| ModelError::BadHyperparameter(format!("{key} must be a non-negative integer"))),
    }
}

fn get_bool(p: &ParamMap, key: &str, default: bool) -> Result<bool, ModelError> {
    match p.get(key) {
        None => Ok(default),
        Some(v) => v
            .as_bool()
            .ok_or_else(|| ModelError::BadHyperparameter(format!("{key} must be a bool"))),
    }
}

fn check_known(p: &ParamMap, known: &[&str]) -> Result<(), ModelError> {
    for key in p.keys() {
        if !known.contains(&key.as_str()) {
            return Err(ModelError::BadHyperparameter(format!(
                "unknown hyperparameter '{key}'"
            )));
        }
    }
    Ok(())
}

/// Fitted model state. Immutable after training; safe to share across threads.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(tag = "kind")]
pub enum FittedState {
    Logistic(LogisticModel),
    Forest(Forest),
    Svm(SvmModel),
    Nn(NeuralNet),
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct TrainedClassifier {
    pub spec: ModelSpec,
    pub n_features: usize,
    pub n_classes: usize,
    pub state: FittedState,
}

const MODEL_FORMAT_VERSION: u32 = 1;

#[derive(Serialize, Deserialize)]
struct PersistedModel {
    format_version: u32,
    model: TrainedClassifier,
}

impl TrainedClassifier {
    /// Class-probability predictions, one row per input row.
    /// Rows sum to 1 within 1e-9 and all entries are non-negative.
    pub fn predict_proba(&self, x: &[Vec<f64>]) -> Result<Vec<Vec<f64>>, ModelError> {
        for row in x {
            if row.len() != self.n_features {
                return Err(ModelError::ShapeMismatch(format!(
                    "expected {} features, got {}",
                    self.n_features,
                    row.len()
                )));
            }
        }
        let probs = match &self.state {
            FittedState::Logistic(m) => m.predict_proba(x),
            FittedState::Forest(m) => m.predict_proba(x),
            FittedState::Svm(m) => m.predict_proba(x),
            FittedState::Nn(m) => m.predict_proba(x),
        };
        Ok(probs)
    }

    pub fn predict(&self, x: &[Vec<f64>]) -> Result<Vec<usize>, ModelError> {
        Ok(self
            .predict_proba(x)?
            .iter()
            .map(|row| crate::stats::argmax(row))
            .collect())
    }

    pub fn save_json(&self, path: &Path) -> Result<(), ModelError> {
        let doc = PersistedModel {
            format_version: MODEL_FORMAT_VERSION,
            model: self.clone(),
        };
        std::fs::write(path, serde_json::to_string_pretty(&doc)?)?;
        Ok(())
    }

    pub fn load_json(path: &Path) -> Result<Self, ModelError> {
        let doc: PersistedModel = serde_json::from_str(&std::fs::read_to_string(path)?)?;
        if doc.format_version != MODEL_FORMAT_VERSION {
            return Err(ModelError::BadHyperparameter(format!(
                "unsupported model format version {}",
                doc.format_version
            )));
        }
        Ok(doc.model)
    }
}

/// Train a classifier. The class count is taken from the labels
/// (`max(y) + 1`); at least two distinct classes must be present.
pub fn train(
    spec: &ModelSpec,
    x: &[Vec<f64>],
    y: &[usize],
    seed: u64,
) -> Result<TrainedClassifier, ModelError> {
    let c = y.iter().max().map_or(0, |m| m + 1);
    train_with_classes(spec, x, y, c, seed)
}

/// Train with an explicit class count (used by cross validation, where a
/// training subset can miss a class that still exists globally).
pub fn train_with_classes(
    spec: &ModelSpec,
    x: &[Vec<f64>],
    y: &[usize],
    n_classes: usize,
    seed: u64,
) -> Result<TrainedClassifier, ModelError> {
    if x.is_empty() || x.len() != y.len() {
        return Err(ModelError::ShapeMismatch(format!(
            "{} rows of features vs {} labels",
            x.len(),
            y.len()
        )));
    }
    let d = x[0].len();
    if d == 0 || x.iter().any(|r| r.len() != d) {
        return Err(ModelError::ShapeMismatch("ragged feature matrix".into()));
    }
    let mut seen = vec![false; n_classes];
    for &yi in y {
        if yi >= n_classes {
            return Err(ModelError::ShapeMismatch(format!(
                "label {yi} out of range for {n_classes} classes"
            )));
        }
        seen[yi] = true;
    }
    if seen.iter().filter(|&&s| s).count() < 2 {
        return Err(ModelError::ClassCountTooLow);
    }

    let p = &spec.params;
    let state = match spec.family {
        ModelFamily::LogisticRegression => {
            check_known(p, &["lr", "epochs"])?;
            let lr = get_f64(p, "lr", 0.1)?;
            let epochs = get_usize(p, "epochs", 500)?;
            FittedState::Logistic(
                logistic::fit(x, y, n_classes, lr, epochs)
                    .ok_or_else(|| ModelError::TrainingDiverged(p.clone()))?,
            )
        }
        ModelFamily::RandomForest => {
            check_known(p, &["trees", "min_leaf", "criterion", "bootstrap", "max_depth"])?;
            let trees = get_usize(p, "trees", 100)?.max(1);
            let min_leaf = get_usize(p, "min_leaf", 1)?.max(1);
            let criterion = match p.get("criterion") {
                None => SplitCriterion::Gini,
                Some(ParamValue::Text(s)) => SplitCriterion::parse(s).ok_or_else(|| {
                    ModelError::BadHyperparameter(format!("unknown split criterion '{s}'"))
                })?,
                Some(_) => {
                    return Err(ModelError::BadHyperparameter(
                        "criterion must be 'gini' or 'entropy'".into(),
                    ))
                }
            };
            let bootstrap = get_bool(p, "bootstrap", true)?;
            let max_depth = get_usize(p, "max_depth", usize::MAX)?;
            FittedState::Forest(tree::fit_forest(
                x, y, n_classes, trees, min_leaf, criterion, bootstrap, max_depth, seed,
            ))
        }
        ModelFamily::SvmRbf => {
            check_known(p, &["c_reg", "gamma"])?;
            let c_reg = get_f64(p, "c_reg", 1.0)?;
            let gamma = get_f64(p, "gamma", 0.1)?;
            if c_reg <= 0.0 || gamma <= 0.0 {
                return Err(ModelError::BadHyperparameter(
                    "c_reg and gamma must be positive".into(),
                ));
            }
            FittedState::Svm(svm::fit_ovr(x, y, n_classes, c_reg, gamma, seed))
        }
        ModelFamily::NeuralNetwork => {
            check_known(p, &["lr", "batch", "epochs", "hidden"])?;
            let lr = get_f64(p, "lr", 0.01)?;
            let batch = get_usize(p, "batch", 16)?.max(1);
            let epochs = get_usize(p, "epochs", 100)?;
            let hidden = get_usize(p, "hidden", 16)?.max(1);
            FittedState::Nn(
                nn::fit(x, y, n_classes, hidden, lr, batch, epochs, seed)
                    .ok_or_else(|| ModelError::TrainingDiverged(p.clone()))?,
            )
        }
    };

    Ok(TrainedClassifier {
        spec: spec.clone(),
        n_features: d,
        n_classes,
        state,
    })
}

/// Accuracy and macro-F1 of argmax predictions against true labels.
/// Classes absent from both truth and predictions are skipped; a class
/// present in truth but never predicted correctly contributes F1 = 0.
pub fn evaluate(
    m: &TrainedClassifier,
    x: &[Vec<f64>],
    y: &[usize],
) -> Result<(f64, f64), ModelError> {
    if x.len() != y.len() {
        return Err(ModelError::ShapeMismatch(format!(
            "{} rows vs {} labels",
            x.len(),
            y.len()
        )));
    }
    let preds = m.predict(x)?;
    Ok(accuracy_macro_f1(&preds, y, m.n_classes))
}

pub fn accuracy_macro_f1(preds: &[usize], y: &[usize], n_classes: usize) -> (f64, f64) {
    let n = y.len();
    let correct = preds.iter().zip(y).filter(|(p, t)| p == t).count();
    let accuracy = correct as f64 / n as f64;

    let mut f1_sum = 0.0;
    let mut counted = 0;
    for c in 0..n_classes {
        let tp = preds
            .iter()
            .zip(y)
            .filter(|(&p, &t)| p == c && t == c)
            .count() as f64;
        let fp = preds
            .iter()
            .zip(y)
            .filter(|(&p, &t)| p == c && t != c)
            .count() as f64;
        let fn_ = preds
            .iter()
            .zip(y)
            .filter(|(&p, &t)| p != c && t == c)
            .count() as f64;
        if tp + fp + fn_ == 0.0 {
            continue; // class absent everywhere
        }
        let denom = 2.0 * tp + fp + fn_;
        f1_sum += if denom > 0.0 { 2.0 * tp / denom } else { 0.0 };
        counted += 1;
    }
    let macro_f1 = if counted > 0 { f1_sum / counted as f64 } else { 0.0 };
    (accuracy, macro_f1)
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct GridPointScore {
    pub params: ParamMap,
    pub mean_accuracy: f64,
    pub mean_f1: f64,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct CVReport {
    pub best_params: ParamMap,
    pub fold_accuracy: Vec<f64>,
    pub fold_f1: Vec<f64>,
    pub mean_accuracy: f64,
    pub mean_f1: f64,
    /// CV score of every grid point evaluated, in enumeration order.
    pub evaluated: Vec<GridPointScore>,
}

fn enumerate_grid(grid: &Grid) -> Vec<ParamMap> {
    let keys: Vec<&String> = grid.keys().collect();
    let mut points = vec![ParamMap::new()];
    for key in keys {
        let values = &grid[key];
        let mut next = Vec::with_capacity(points.len() * values.len());
        for point in &points {
            for v in values {
                let mut p = point.clone();
                p.insert(key.clone(), v.clone());
                next.push(p);
            }
        }
        points = next;
    }
    points
}

/// Exhaustive grid search with k-fold cross validation. The winner has the
/// highest mean accuracy (ties: higher mean F1, then first in enumeration
/// order) and is refit on the full dataset.
pub fn grid_search(
    family: ModelFamily,
    grid: &Grid,
    ds: &Dataset,
    k: usize,
    seed: u64,
) -> Result<(TrainedClassifier, CVReport), ModelError> {
    if grid.is_empty() || grid.values().any(|v| v.is_empty()) {
        return Err(ModelError::EmptyGrid);
    }
    let points = enumerate_grid(grid);
    let plan = kfold(ds.n_rows(), k, seed)?;
    let n_classes = ds.n_classes();

    let splits: Vec<(Vec<usize>, Vec<usize>)> = (0..k).map(|f| plan.split(f)).collect();

    // (grid point x fold) cells are independent; aggregate per point afterwards
    // per grid point: (fold accuracies, fold F1 scores)
    type FoldScores = (Vec<f64>, Vec<f64>);
    let results: Vec<Result<FoldScores, ModelError>> = points
        .par_iter()
        .enumerate()
        .map(|(pi, params)| {
            let spec = ModelSpec {
                family,
                params: params.clone(),
            };
            let mut accs = Vec::with_capacity(k);
            let mut f1s = Vec::with_capacity(k);
            for (fi, (train_idx, eval_idx)) in splits.iter().enumerate() {
                let (tx, ty) = ds.subset(train_idx);
                let (ex, ey) = ds.subset(eval_idx);
                let cell_seed = mix_seed(seed, &[&(pi as u64).to_le_bytes(), &(fi as u64).to_le_bytes()]);
                let model = train_with_classes(&spec, &tx, &ty, n_classes, cell_seed)?;
                let (acc, f1) = evaluate(&model, &ex, &ey)?;
                accs.push(acc);
                f1s.push(f1);
            }
            Ok((accs, f1s))
        })
        .collect();

    let mut evaluated = Vec::with_capacity(points.len());
    let mut per_point_folds = Vec::with_capacity(points.len());
    for (params, result) in points.iter().zip(results) {
        let (accs, f1s) = result?;
        let mean_accuracy = crate::stats::mean(&accs);
        let mean_f1 = crate::stats::mean(&f1s);
        evaluated.push(GridPointScore {
            params: params.clone(),
            mean_accuracy,
            mean_f1,
        });
        per_point_folds.push((accs, f1s));
    }

    let mut best = 0;
    for i in 1..evaluated.len() {
        let (a, b) = (&evaluated[i], &evaluated[best]);
        if a.mean_accuracy > b.mean_accuracy
            || (a.mean_accuracy == b.mean_accuracy && a.mean_f1 > b.mean_f1)
        {
            best = i;
        }
    }

    let winner_spec = ModelSpec {
        family,
        params: points[best].clone(),
    };
    let refit_seed = mix_seed(seed, &[b"refit", &(best as u64).to_le_bytes()]);
    let model = train_with_classes(&winner_spec, &ds.x, &ds.y, n_classes, refit_seed)?;

    let (fold_accuracy, fold_f1) = per_point_folds[best].clone();
    let report = CVReport {
        best_params: points[best].clone(),
        mean_accuracy: evaluated[best].mean_accuracy,
        mean_f1: evaluated[best].mean_f1,
        fold_accuracy,
        fold_f1,
        evaluated,
    };
    Ok((model, report))
}

#[cfg(test)]
mod tests;
