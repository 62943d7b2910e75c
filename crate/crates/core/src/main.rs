use std::collections::HashMap;
use std::path::PathBuf;
use std::process::ExitCode;
use std::str::FromStr;

use clap::{Args, Parser, Subcommand};

use fi_fuse::data::synthetic_data;
use fi_fuse::explain::{ExplainConfig, RepetitionMode, Technique};
use fi_fuse::fuse::{FuseParams, FusionMethod};
use fi_fuse::models::ModelFamily;
use fi_fuse::pipeline::{
    fuse_only, run_pipeline, write_dataset_csv, DataSource, PipelineError, RunConfig,
};
use fi_fuse::plot::bar_chart_svg;
use fi_fuse::stats::mix_seed;

#[derive(Parser)]
#[command(
    name = "fi-fuse",
    version,
    about = "Ensemble feature importance with crisp and fuzzy decision fusion"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run the full pipeline: preprocess, optimize, explain, fuse.
    Run(Box<RunArgs>),
    /// Apply fusion methods to an existing importance tensor CSV.
    Fuse(FuseArgs),
    /// Generate a synthetic classification dataset CSV.
    Synth(SynthArgs),
}

/// Every option can also appear in `--config` as `key = value` (keys match
/// the long flag names, `-` and `_` interchangeable); flags win over the
/// config file.
#[derive(Args)]
struct RunArgs {
    /// Flat key = value config file.
    #[arg(long)]
    config: Option<PathBuf>,

    /// Input CSV path (mutually exclusive with the synth-* options).
    #[arg(long)]
    data: Option<PathBuf>,
    /// Name of the target column in the input CSV.
    #[arg(long)]
    target: Option<String>,

    /// Generate a synthetic dataset with this many rows instead of reading a CSV.
    #[arg(long)]
    synth_rows: Option<usize>,
    #[arg(long)]
    synth_features: Option<usize>,
    #[arg(long)]
    synth_informative: Option<usize>,
    #[arg(long)]
    synth_classes: Option<usize>,

    /// Comma-separated model list: lr,rf,svm,nn.
    #[arg(long)]
    models: Option<String>,
    /// Comma-separated technique list: pi,shap,lime.
    #[arg(long)]
    techniques: Option<String>,
    /// Comma-separated fusion methods, or "all".
    #[arg(long)]
    fusion: Option<String>,

    /// Cross-validation folds for hyperparameter tuning.
    #[arg(long)]
    folds: Option<usize>,
    /// Repetition mode for importance computation: kfold | bootstrap | holdout.
    #[arg(long)]
    repetition: Option<String>,
    /// Repetitions for bootstrap mode.
    #[arg(long)]
    repetitions: Option<usize>,
    /// Held-out fraction for holdout mode, in (0, 1).
    #[arg(long)]
    holdout_fraction: Option<f64>,

    /// Fraction of top ranks the majority vote considers, in (0, 1].
    #[arg(long)]
    num_features: Option<f64>,
    /// Significance level for the tau test and the rank-correlation gate.
    #[arg(long)]
    alpha: Option<f64>,
    #[arg(long)]
    seed: Option<u64>,
    /// Output directory.
    #[arg(long)]
    out: Option<PathBuf>,

    /// Tune hyperparameters by grid search (defaults to fixed operating points).
    #[arg(long)]
    tune: bool,
    /// Drop features whose |Pearson r| with an earlier feature exceeds this.
    #[arg(long)]
    corr_drop: Option<f64>,
    /// Skip fuzzy labels and MF charts.
    #[arg(long)]
    no_fuzzy: bool,

    /// Permutations per feature for permutation importance.
    #[arg(long)]
    pi_repeats: Option<usize>,
    /// Background rows for Shapley values.
    #[arg(long)]
    shap_background: Option<usize>,
    /// Explained instances per cell for Shapley.
    #[arg(long)]
    shap_max_explain: Option<usize>,
    /// Perturbation samples per explained instance for the local surrogate.
    #[arg(long)]
    lime_samples: Option<usize>,
    /// Explained instances per cell for the local surrogate.
    #[arg(long)]
    lime_max_explain: Option<usize>,
    /// Proximity kernel width (defaults to 0.75 * sqrt(d)).
    #[arg(long)]
    kernel_width: Option<f64>,
    /// Ridge penalty of the local surrogate.
    #[arg(long)]
    ridge_lambda: Option<f64>,
}

#[derive(Args)]
struct FuseArgs {
    /// Importance tensor CSV (header: model,technique,repetition,<features>).
    #[arg(long)]
    tensor: PathBuf,
    /// Comma-separated fusion methods, or "all".
    #[arg(long, default_value = "all")]
    methods: String,
    #[arg(long, default_value_t = 0.05)]
    alpha: f64,
    #[arg(long, default_value_t = 1.0)]
    num_features: f64,
    /// Skip the fuzzy report.
    #[arg(long)]
    no_fuzzy: bool,
    /// Output directory.
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args)]
struct SynthArgs {
    #[arg(long, default_value_t = 500)]
    rows: usize,
    #[arg(long, default_value_t = 6)]
    features: usize,
    #[arg(long, default_value_t = 3)]
    informative: usize,
    #[arg(long, default_value_t = 3)]
    classes: usize,
    #[arg(long)]
    seed: u64,
    /// Output CSV path.
    #[arg(long)]
    out: PathBuf,
}

fn config_error(msg: String) -> PipelineError {
    PipelineError::Config(msg)
}

fn load_config_file(path: &PathBuf) -> Result<HashMap<String, String>, PipelineError> {
    let text = std::fs::read_to_string(path)
        .map_err(|e| config_error(format!("cannot read config {}: {e}", path.display())))?;
    let mut map = HashMap::new();
    for (i, line) in text.lines().enumerate() {
        let line = line.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let (key, value) = line
            .split_once('=')
            .ok_or_else(|| config_error(format!("config line {}: expected key = value", i + 1)))?;
        map.insert(key.trim().replace('-', "_"), value.trim().to_string());
    }
    Ok(map)
}

/// Flag value if given, else the config-file value, else None.
fn setting<T: FromStr>(
    flag: Option<T>,
    cfg: &HashMap<String, String>,
    key: &str,
) -> Result<Option<T>, PipelineError> {
    if flag.is_some() {
        return Ok(flag);
    }
    match cfg.get(key) {
        Some(raw) => raw
            .parse()
            .map(Some)
            .map_err(|_| config_error(format!("config key {key}: cannot parse {raw:?}"))),
        None => Ok(None),
    }
}

fn bool_setting(
    flag: bool,
    cfg: &HashMap<String, String>,
    key: &str,
) -> Result<bool, PipelineError> {
    if flag {
        return Ok(true);
    }
    Ok(setting::<bool>(None, cfg, key)?.unwrap_or(false))
}

fn parse_list<T, F: Fn(&str) -> Option<T>>(
    raw: &str,
    what: &str,
    parse: F,
) -> Result<Vec<T>, PipelineError> {
    raw.split(',')
        .map(str::trim)
        .filter(|s| !s.is_empty())
        .map(|s| parse(s).ok_or_else(|| config_error(format!("unknown {what}: {s}"))))
        .collect()
}

fn parse_methods(raw: &str) -> Result<Vec<FusionMethod>, PipelineError> {
    if raw.trim() == "all" {
        return Ok(FusionMethod::ALL.to_vec());
    }
    parse_list(raw, "fusion method", FusionMethod::parse)
}

fn build_run_config(args: RunArgs) -> Result<RunConfig, PipelineError> {
    let cfg = match &args.config {
        Some(path) => load_config_file(path)?,
        None => HashMap::new(),
    };

    let data = setting(args.data, &cfg, "data")?;
    let synth_rows = setting(args.synth_rows, &cfg, "synth_rows")?;
    let source = match (data, synth_rows) {
        (Some(_), Some(_)) => {
            return Err(config_error(
                "--data and --synth-rows are mutually exclusive".into(),
            ));
        }
        (Some(path), None) => DataSource::Csv {
            path,
            target: setting(args.target, &cfg, "target")?
                .ok_or_else(|| config_error("--target is required with --data".into()))?,
        },
        (None, Some(rows)) => DataSource::Synthetic {
            rows,
            features: setting(args.synth_features, &cfg, "synth_features")?.unwrap_or(6),
            informative: setting(args.synth_informative, &cfg, "synth_informative")?.unwrap_or(3),
            classes: setting(args.synth_classes, &cfg, "synth_classes")?.unwrap_or(3),
        },
        (None, None) => {
            return Err(config_error(
                "either --data or --synth-rows is required".into(),
            ));
        }
    };

    let models = parse_list(
        &setting(args.models, &cfg, "models")?.unwrap_or_else(|| "lr,rf,svm,nn".into()),
        "model",
        ModelFamily::parse,
    )?;
    let techniques = parse_list(
        &setting(args.techniques, &cfg, "techniques")?.unwrap_or_else(|| "pi,shap,lime".into()),
        "technique",
        Technique::parse,
    )?;
    let methods = parse_methods(
        &setting(args.fusion, &cfg, "fusion")?.unwrap_or_else(|| "all".into()),
    )?;

    let folds = setting(args.folds, &cfg, "folds")?.unwrap_or(5);
    let repetition = match setting(args.repetition, &cfg, "repetition")?
        .unwrap_or_else(|| "kfold".into())
        .as_str()
    {
        "kfold" => RepetitionMode::KFold { k: folds },
        "bootstrap" => RepetitionMode::Bootstrap {
            repetitions: setting(args.repetitions, &cfg, "repetitions")?.unwrap_or(10),
        },
        "holdout" => RepetitionMode::Holdout {
            eval_fraction: setting(args.holdout_fraction, &cfg, "holdout_fraction")?
                .unwrap_or(0.3),
        },
        other => {
            return Err(config_error(format!(
                "repetition must be kfold, bootstrap, or holdout, got {other}"
            )));
        }
    };

    let defaults = ExplainConfig::default();
    let explain = ExplainConfig {
        pi_repeats: setting(args.pi_repeats, &cfg, "pi_repeats")?.unwrap_or(defaults.pi_repeats),
        shap_background: setting(args.shap_background, &cfg, "shap_background")?
            .unwrap_or(defaults.shap_background),
        shap_max_explain: setting(args.shap_max_explain, &cfg, "shap_max_explain")?
            .unwrap_or(defaults.shap_max_explain),
        lime_samples: setting(args.lime_samples, &cfg, "lime_samples")?
            .unwrap_or(defaults.lime_samples),
        lime_max_explain: setting(args.lime_max_explain, &cfg, "lime_max_explain")?
            .unwrap_or(defaults.lime_max_explain),
        kernel_width: setting(args.kernel_width, &cfg, "kernel_width")?.or(defaults.kernel_width),
        ridge_lambda: setting(args.ridge_lambda, &cfg, "ridge_lambda")?
            .unwrap_or(defaults.ridge_lambda),
    };

    Ok(RunConfig {
        source,
        models,
        techniques,
        methods,
        folds,
        repetition,
        tune: bool_setting(args.tune, &cfg, "tune")?,
        corr_threshold: setting(args.corr_drop, &cfg, "corr_drop")?,
        fuse: FuseParams {
            alpha: setting(args.alpha, &cfg, "alpha")?.unwrap_or(0.05),
            num_features: setting(args.num_features, &cfg, "num_features")?.unwrap_or(1.0),
        },
        explain,
        fuzzy: !bool_setting(args.no_fuzzy, &cfg, "no_fuzzy")?,
        seed: setting(args.seed, &cfg, "seed")?
            .ok_or_else(|| config_error("--seed is required".into()))?,
        out_dir: setting(args.out, &cfg, "out")?
            .ok_or_else(|| config_error("--out is required".into()))?,
    })
}

fn cmd_run(args: RunArgs) -> Result<(), PipelineError> {
    let config = build_run_config(args)?;
    let manifest = run_pipeline(&config)?;
    println!(
        "wrote {} files to {}",
        manifest.files.len() + 1,
        config.out_dir.display()
    );
    Ok(())
}

fn cmd_fuse(args: FuseArgs) -> Result<(), PipelineError> {
    let methods = parse_methods(&args.methods)?;
    let params = FuseParams {
        alpha: args.alpha,
        num_features: args.num_features,
    };
    let (fused, fuzzy) = fuse_only(&args.tensor, &methods, &params, !args.no_fuzzy)?;

    std::fs::create_dir_all(&args.out)?;
    fused
        .save_csv(&args.out.join("fused.csv"))
        .map_err(PipelineError::Fuse)?;
    let mut written = 1;
    if let Some(report) = fuzzy {
        std::fs::write(
            args.out.join("fuzzy_memberships.json"),
            serde_json::to_string_pretty(&report).map_err(std::io::Error::other)?,
        )?;
        written += 1;
    }
    for (method, values) in &fused.methods {
        let svg = bar_chart_svg(method.name(), &fused.feature_names, values);
        let dir = args.out.join("plots");
        std::fs::create_dir_all(&dir)?;
        std::fs::write(dir.join(format!("fused_{}.svg", method.name())), svg)?;
        written += 1;
    }
    println!("wrote {written} files to {}", args.out.display());
    Ok(())
}

fn cmd_synth(args: SynthArgs) -> Result<(), PipelineError> {
    let (ds, informative) = synthetic_data(
        args.rows,
        args.features,
        args.informative,
        args.classes,
        mix_seed(args.seed, &[b"synth"]),
    )?;
    write_dataset_csv(&ds, &args.out)?;
    let names: Vec<&str> = informative
        .iter()
        .map(|&j| ds.feature_names[j].as_str())
        .collect();
    println!(
        "wrote {} rows to {} (informative: {})",
        ds.n_rows(),
        args.out.display(),
        names.join(", ")
    );
    Ok(())
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = match cli.command {
        Command::Run(args) => cmd_run(*args),
        Command::Fuse(args) => cmd_fuse(args),
        Command::Synth(args) => cmd_synth(args),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            let mut source = std::error::Error::source(&e);
            while let Some(s) = source {
                eprintln!("  caused by: {s}");
                source = s.source();
            }
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
