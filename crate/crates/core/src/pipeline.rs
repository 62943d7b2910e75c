//! End-to-end orchestration: preprocess, optimize models, compute the
//! importance tensor, fuse, and emit all artifacts with a checksummed
//! manifest.

use std::collections::BTreeMap;
use std::fs;
use std::path::{Path, PathBuf};
use std::time::Instant;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};
use thiserror::Error;

use crate::data::{load_csv, normalize, synthetic_data, DataError, Dataset};
use crate::explain::{
    compute_tensor, ExplainConfig, ExplainError, ImportanceTensor, RepetitionMode, Technique,
};
use crate::fuse::{fuse_methods, FuseError, FuseParams, FusedImportance, FusionMethod};
use crate::fuzzy::{fuzzy_report, FuzzyError, FuzzyReport};
use crate::models::{grid_search, CVReport, ModelError, ModelFamily, ModelSpec};
use crate::plot::{bar_chart_svg, mf_chart_svg};
use crate::stats::mix_seed;

#[derive(Debug, Error)]
pub enum PipelineError {
    #[error("configuration error: {0}")]
    Config(String),
    #[error("preprocess stage: {0}")]
    Data(#[from] DataError),
    #[error("optimize stage, model {model}: {source}")]
    Model {
        model: String,
        #[source]
        source: ModelError,
    },
    #[error("importance stage: {0}")]
    Explain(#[from] ExplainError),
    #[error("fusion stage: {0}")]
    Fuse(#[from] FuseError),
    #[error("fuzzy stage: {0}")]
    Fuzzy(#[from] FuzzyError),
    #[error("output stage: {0}")]
    Io(#[from] std::io::Error),
}

impl PipelineError {
    /// Process exit code: 2 config, 3 data/io, 4 training, 5 fusion.
    pub fn exit_code(&self) -> i32 {
        match self {
            PipelineError::Config(_) => 2,
            PipelineError::Data(_) | PipelineError::Io(_) => 3,
            // bad tensor files are data problems; failures inside a cell
            // (training or explaining) count as training errors
            PipelineError::Explain(
                ExplainError::Format { .. }
                | ExplainError::Io(_)
                | ExplainError::Csv(_)
                | ExplainError::Data(_),
            ) => 3,
            PipelineError::Model { .. } | PipelineError::Explain(_) => 4,
            PipelineError::Fuse(_) | PipelineError::Fuzzy(_) => 5,
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum DataSource {
    Csv { path: PathBuf, target: String },
    Synthetic {
        rows: usize,
        features: usize,
        informative: usize,
        classes: usize,
    },
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct RunConfig {
    pub source: DataSource,
    pub models: Vec<ModelFamily>,
    pub techniques: Vec<Technique>,
    pub methods: Vec<FusionMethod>,
    /// Folds for hyperparameter cross-validation (when `tune` is set).
    pub folds: usize,
    /// How importance repetitions are produced.
    pub repetition: RepetitionMode,
    pub tune: bool,
    /// Drop a feature when its |Pearson r| against an earlier kept feature
    /// exceeds this threshold.
    pub corr_threshold: Option<f64>,
    pub fuse: FuseParams,
    pub explain: ExplainConfig,
    /// Emit fuzzy linguistic labels and MF charts.
    pub fuzzy: bool,
    pub seed: u64,
    pub out_dir: PathBuf,
}

impl RunConfig {
    fn repetitions(&self) -> usize {
        match self.repetition {
            RepetitionMode::KFold { k } => k,
            RepetitionMode::Bootstrap { repetitions } => repetitions,
            RepetitionMode::Holdout { .. } => 1,
        }
    }

    pub fn validate(&self) -> Result<(), PipelineError> {
        let err = |m: String| Err(PipelineError::Config(m));
        if self.models.is_empty() {
            return err("at least one model is required".into());
        }
        if self.techniques.is_empty() {
            return err("at least one technique is required".into());
        }
        if self.methods.is_empty() {
            return err("at least one fusion method is required".into());
        }
        if self.folds < 2 {
            return err(format!("folds must be >= 2, got {}", self.folds));
        }
        match self.repetition {
            RepetitionMode::KFold { k } if k < 2 => {
                return err(format!("kfold repetition needs k >= 2, got {k}"));
            }
            RepetitionMode::Bootstrap { repetitions: 0 } => {
                return err("bootstrap repetition needs at least 1 repetition".into());
            }
            RepetitionMode::Holdout { eval_fraction } if !(0.0..1.0).contains(&eval_fraction) || eval_fraction == 0.0 => {
                return err(format!(
                    "holdout fraction must be in (0, 1), got {eval_fraction}"
                ));
            }
            _ => {}
        }
        if !(0.0 < self.fuse.num_features && self.fuse.num_features <= 1.0) {
            return err(format!(
                "num_features must be in (0, 1], got {}",
                self.fuse.num_features
            ));
        }
        if !(0.0 < self.fuse.alpha && self.fuse.alpha < 1.0) {
            return err(format!("alpha must be in (0, 1), got {}", self.fuse.alpha));
        }
        if let Some(t) = self.corr_threshold {
            if !(0.0 < t && t <= 1.0) {
                return err(format!("corr threshold must be in (0, 1], got {t}"));
            }
        }
        // membership functions need >= 3 samples per (feature, model)
        if self.fuzzy && self.techniques.len() * self.repetitions() < 3 {
            return err(format!(
                "fuzzy labels need techniques x repetitions >= 3, got {} x {}",
                self.techniques.len(),
                self.repetitions()
            ));
        }
        let needed = self
            .methods
            .iter()
            .map(|m| m.min_sources())
            .max()
            .unwrap_or(2);
        let sources = self.models.len() * self.techniques.len() * self.repetitions();
        if sources < needed {
            return err(format!(
                "the requested fusion methods need at least {needed} sources; \
                 models x techniques x repetitions = {sources}"
            ));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ModelReport {
    pub model: String,
    pub spec: ModelSpec,
    /// Present when hyperparameters were tuned.
    pub cv: Option<CVReport>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct RunManifest {
    pub config: RunConfig,
    pub models: Vec<ModelReport>,
    /// Relative path -> SHA-256 of every emitted file (except this manifest).
    pub files: BTreeMap<String, String>,
    pub timings_ms: BTreeMap<String, u64>,
}

fn pearson(a: &[f64], b: &[f64]) -> f64 {
    let ma = crate::stats::mean(a);
    let mb = crate::stats::mean(b);
    let mut cov = 0.0;
    let mut va = 0.0;
    let mut vb = 0.0;
    for (x, y) in a.iter().zip(b) {
        cov += (x - ma) * (y - mb);
        va += (x - ma) * (x - ma);
        vb += (y - mb) * (y - mb);
    }
    if va == 0.0 || vb == 0.0 {
        return 0.0;
    }
    cov / (va * vb).sqrt()
}

/// Drop every feature whose |Pearson r| with an earlier kept feature exceeds
/// the threshold. Returns the reduced dataset and the dropped names.
pub fn drop_correlated(ds: &Dataset, threshold: f64) -> (Dataset, Vec<String>) {
    let d = ds.n_features();
    let columns: Vec<Vec<f64>> = (0..d)
        .map(|j| ds.x.iter().map(|row| row[j]).collect())
        .collect();
    let mut kept: Vec<usize> = Vec::new();
    let mut dropped = Vec::new();
    for j in 0..d {
        if kept
            .iter()
            .any(|&i| pearson(&columns[i], &columns[j]).abs() > threshold)
        {
            dropped.push(ds.feature_names[j].clone());
        } else {
            kept.push(j);
        }
    }
    let reduced = Dataset {
        feature_names: kept.iter().map(|&j| ds.feature_names[j].clone()).collect(),
        x: ds
            .x
            .iter()
            .map(|row| kept.iter().map(|&j| row[j]).collect())
            .collect(),
        y: ds.y.clone(),
        class_names: ds.class_names.clone(),
    };
    (reduced, dropped)
}

/// Per-(feature, model) coefficient samples pooled across techniques and
/// repetitions, as consumed by the fuzzy stage.
pub fn tensor_samples(
    tensor: &ImportanceTensor,
) -> BTreeMap<String, BTreeMap<String, Vec<f64>>> {
    let mut samples: BTreeMap<String, BTreeMap<String, Vec<f64>>> = BTreeMap::new();
    for (j, feature) in tensor.feature_names.iter().enumerate() {
        let by_model = samples.entry(feature.clone()).or_default();
        for entry in &tensor.entries {
            by_model
                .entry(entry.model.clone())
                .or_default()
                .push(entry.values[j]);
        }
    }
    samples
}

/// Dataset as CSV: feature columns plus a `target` column of class names.
pub fn write_dataset_csv(ds: &Dataset, path: &Path) -> Result<(), PipelineError> {
    let mut w = csv::Writer::from_path(path).map_err(DataError::from)?;
    let mut header: Vec<String> = ds.feature_names.clone();
    header.push("target".into());
    w.write_record(&header).map_err(DataError::from)?;
    for (row, &label) in ds.x.iter().zip(&ds.y) {
        let mut record: Vec<String> = row.iter().map(|v| format!("{v}")).collect();
        record.push(ds.class_names[label].clone());
        w.write_record(&record).map_err(DataError::from)?;
    }
    w.flush()?;
    Ok(())
}

fn sha256_hex(bytes: &[u8]) -> String {
    let mut h = Sha256::new();
    h.update(bytes);
    format!("{:x}", h.finalize())
}

struct OutputWriter {
    root: PathBuf,
    files: BTreeMap<String, String>,
}

impl OutputWriter {
    fn write(&mut self, rel: &str, bytes: &[u8]) -> Result<(), PipelineError> {
        let path = self.root.join(rel);
        if let Some(parent) = path.parent() {
            fs::create_dir_all(parent)?;
        }
        fs::write(&path, bytes)?;
        self.files.insert(rel.to_string(), sha256_hex(bytes));
        Ok(())
    }
}

fn safe_file_stem(name: &str) -> String {
    name.chars()
        .map(|c| if c.is_ascii_alphanumeric() { c } else { '_' })
        .collect()
}

fn load_source(source: &DataSource, seed: u64) -> Result<Dataset, PipelineError> {
    match source {
        DataSource::Csv { path, target } => Ok(load_csv(path, target)?),
        DataSource::Synthetic {
            rows,
            features,
            informative,
            classes,
        } => {
            let (ds, _) = synthetic_data(
                *rows,
                *features,
                *informative,
                *classes,
                mix_seed(seed, &[b"synth"]),
            )?;
            Ok(ds)
        }
    }
}

/// Run all four stages and write every artifact under `config.out_dir`.
pub fn run_pipeline(config: &RunConfig) -> Result<RunManifest, PipelineError> {
    config.validate()?;
    let mut timings: BTreeMap<String, u64> = BTreeMap::new();

    // stage 1: preprocess
    let t0 = Instant::now();
    let mut ds = load_source(&config.source, config.seed)?;
    if let Some(threshold) = config.corr_threshold {
        let (reduced, _) = drop_correlated(&ds, threshold);
        if reduced.n_features() == 0 {
            return Err(PipelineError::Config(
                "correlation filter dropped every feature".into(),
            ));
        }
        ds = reduced;
    }
    let ds = normalize(&ds);
    timings.insert("preprocess".into(), t0.elapsed().as_millis() as u64);

    // stage 2: optimize models
    let t1 = Instant::now();
    let mut specs: Vec<(String, ModelSpec)> = Vec::new();
    let mut reports: Vec<ModelReport> = Vec::new();
    for &family in &config.models {
        let name = family.name().to_string();
        let (spec, cv) = if config.tune {
            let grid = family.default_grid();
            let tune_seed = mix_seed(config.seed, &[name.as_bytes(), b"tune"]);
            let (model, report) =
                grid_search(family, &grid, &ds, config.folds, tune_seed).map_err(|e| {
                    PipelineError::Model {
                        model: name.clone(),
                        source: e,
                    }
                })?;
            (model.spec, Some(report))
        } else {
            (family.default_spec(), None)
        };
        reports.push(ModelReport {
            model: name.clone(),
            spec: spec.clone(),
            cv,
        });
        specs.push((name, spec));
    }
    timings.insert("optimize".into(), t1.elapsed().as_millis() as u64);

    // stage 3: importance tensor
    let t2 = Instant::now();
    let mut tensor = compute_tensor(
        &specs,
        &config.techniques,
        &ds,
        config.repetition,
        &config.explain,
        config.seed,
    )?;
    // round to the table precision so that re-fusing the emitted tensor CSV
    // reproduces this run's fused outputs exactly
    for entry in &mut tensor.entries {
        for v in &mut entry.values {
            *v = (*v * 1e4).round() / 1e4;
        }
    }
    timings.insert("importance".into(), t2.elapsed().as_millis() as u64);

    // stage 4: fusion
    let t3 = Instant::now();
    let sources: Vec<Vec<f64>> = tensor.entries.iter().map(|e| e.values.clone()).collect();
    let fused = fuse_methods(&tensor.feature_names, &sources, &config.methods, &config.fuse)?;
    let fuzzy = if config.fuzzy {
        Some(fuzzy_report(&tensor_samples(&tensor))?)
    } else {
        None
    };
    timings.insert("fusion".into(), t3.elapsed().as_millis() as u64);

    // stage 5: artifacts
    let t4 = Instant::now();
    fs::create_dir_all(&config.out_dir)?;
    let mut out = OutputWriter {
        root: config.out_dir.clone(),
        files: BTreeMap::new(),
    };

    let mut raw = Vec::new();
    tensor.write_csv(&mut raw)?;
    out.write("importance_raw.csv", &raw)?;

    let mut fused_csv = Vec::new();
    fused.write_csv(&mut fused_csv)?;
    out.write("fused.csv", &fused_csv)?;

    out.write(
        "model_reports.json",
        serde_json::to_string_pretty(&reports)
            .map_err(std::io::Error::other)?
            .as_bytes(),
    )?;

    for (method, values) in &fused.methods {
        let svg = bar_chart_svg(method.name(), &fused.feature_names, values);
        out.write(
            &format!("plots/fused_{}.svg", safe_file_stem(method.name())),
            svg.as_bytes(),
        )?;
    }

    if let Some(report) = &fuzzy {
        out.write(
            "fuzzy_memberships.json",
            serde_json::to_string_pretty(report)
                .map_err(std::io::Error::other)?
                .as_bytes(),
        )?;
        for (feature, entry) in &report.per_feature {
            let svg = mf_chart_svg(feature, &entry.mfs);
            out.write(
                &format!("plots/mf_{}.svg", safe_file_stem(feature)),
                svg.as_bytes(),
            )?;
        }
    }
    timings.insert("artifacts".into(), t4.elapsed().as_millis() as u64);

    let manifest = RunManifest {
        config: config.clone(),
        models: reports,
        files: out.files,
        timings_ms: timings,
    };
    fs::write(
        config.out_dir.join("manifest.json"),
        serde_json::to_string_pretty(&manifest).map_err(std::io::Error::other)?,
    )?;
    Ok(manifest)
}

/// Fuse an externally supplied tensor CSV, skipping stages 1-3. The fuzzy
/// report is produced when every (feature, model) pair has >= 3 samples.
pub fn fuse_only(
    tensor_path: &Path,
    methods: &[FusionMethod],
    params: &FuseParams,
    fuzzy: bool,
) -> Result<(FusedImportance, Option<FuzzyReport>), PipelineError> {
    let tensor = ImportanceTensor::load_csv(tensor_path)?;
    let sources: Vec<Vec<f64>> = tensor.entries.iter().map(|e| e.values.clone()).collect();
    let fused = fuse_methods(&tensor.feature_names, &sources, methods, params)?;
    let report = if fuzzy {
        Some(fuzzy_report(&tensor_samples(&tensor))?)
    } else {
        None
    };
    Ok((fused, report))
}

/// Verify that every file listed in a manifest exists with the recorded
/// checksum. Returns the relative paths that fail.
pub fn verify_manifest(manifest: &RunManifest, root: &Path) -> Vec<String> {
    let mut bad = Vec::new();
    for (rel, expect) in &manifest.files {
        match fs::read(root.join(rel)) {
            Ok(bytes) if &sha256_hex(&bytes) == expect => {}
            _ => bad.push(rel.clone()),
        }
    }
    bad
}
