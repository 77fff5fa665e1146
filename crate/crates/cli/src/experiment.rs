//! The `run` command: data, fold plan, training and the run-directory reports.

use std::path::Path;

use qrecover::data::{load_csv, synth_recovery, Dataset};
use qrecover::eval::{aggregate_curves, cross_validate, derive_seed, kfold_split, loocv_plan, CurveSummary, FoldPlan, FoldRun};
use qrecover::hybrid::{count_params, ModelKind};
use qrecover::checkpoint::Checkpoint;
use serde::{Deserialize, Serialize};

use crate::config::{delimiter_byte, load_config, seed_to_toml, DataSource, ExperimentConfig, ProtocolKind};
use crate::report::{csv_writer, prepare_dir, write_json};
use crate::{CliError, RunArgs};

pub const RUN_FORMAT: &str = "qrecover-run";
pub const CONFIG_FILE: &str = "config.toml";
pub const RMSE_FILE: &str = "rmse.csv";
pub const RESIDUALS_FILE: &str = "residuals.csv";
pub const SUMMARY_FILE: &str = "summary.json";

/// Stream tag for the fold-assignment shuffle; fold models use tags `2i`, `2i + 1`.
const PLAN_TAG: u64 = u64::MAX;

pub fn checkpoint_file(fold: usize) -> String {
    format!("checkpoint_fold{fold}.json")
}

pub fn load_dataset(cfg: &ExperimentConfig) -> Result<Dataset, CliError> {
    match cfg.data.source {
        DataSource::Synth => Ok(synth_recovery(cfg.data.n_obs, cfg.data.n_features, cfg.data.seed)?),
        DataSource::Csv => {
            let path = cfg.data.path.as_deref().ok_or_else(|| CliError::Usage("data.path is not set".into()))?;
            if !path.is_file() {
                return Err(CliError::Usage(format!("MissingFile: {}", path.display())));
            }
            let delim = delimiter_byte(&cfg.data.delimiter)?;
            load_csv(path, &cfg.data.target_column, delim).map_err(|e| match e {
                qrecover::Error::NonNumericCell { .. } | qrecover::Error::EmptyFile(_) | qrecover::Error::Csv(_) => {
                    CliError::Usage(format!("{}: {e}", path.display()))
                }
                other => other.into(),
            })
        }
    }
}

pub fn plan_seed(cfg: &ExperimentConfig) -> u64 {
    derive_seed(cfg.run.seed, PLAN_TAG)
}

pub fn fold_plan(cfg: &ExperimentConfig, n_obs: usize) -> Result<FoldPlan, CliError> {
    Ok(match cfg.protocol.kind {
        ProtocolKind::Cv => kfold_split(n_obs, cfg.protocol.k, plan_seed(cfg))?,
        ProtocolKind::Loocv => loocv_plan(n_obs)?,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Curves {
    pub test_mean: Vec<f64>,
    pub test_std: Vec<f64>,
    pub train_mean: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Provenance {
    pub seed: u64,
    pub plan_seed: u64,
    pub fold_model_seeds: Vec<u64>,
    pub fold_shuffle_seeds: Vec<u64>,
    pub data_source: DataSource,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub data_path: Option<String>,
    pub data_seed: Option<u64>,
    pub n_obs: usize,
    pub n_features: usize,
    pub fold_sizes: Vec<usize>,
    pub threads: usize,
    pub engine_version: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunSummary {
    pub format: String,
    pub model: ModelKind,
    pub param_count: usize,
    pub protocol: ProtocolKind,
    pub folds: usize,
    pub epochs: usize,
    pub best_avg_rmse: f64,
    /// 1-based.
    pub best_epoch: usize,
    pub avg_std: f64,
    pub final_avg_rmse: f64,
    pub mean_epoch_seconds: f64,
    pub noisy: bool,
    pub curves: Curves,
    pub provenance: Provenance,
}

/// Trains every fold of the configured protocol.
pub fn run_protocol(cfg: &ExperimentConfig, ds: &Dataset, plan: &FoldPlan) -> Result<Vec<FoldRun>, CliError> {
    let spec = cfg.model.spec(ds.n_features);
    let runs = cross_validate(ds, plan, &spec, &cfg.train_config(0), cfg.data.scaling, cfg.run.seed)?;
    if let Some(r) = runs.iter().find(|r| r.history.test_rmse.iter().any(|x| !x.is_finite())) {
        return Err(CliError::Runtime(format!("training diverged on fold {}", r.fold)));
    }
    Ok(runs)
}

pub fn summarize(cfg: &ExperimentConfig, ds: &Dataset, plan: &FoldPlan, runs: &[FoldRun]) -> Result<RunSummary, CliError> {
    let spec = cfg.model.spec(ds.n_features);
    let test: Vec<Vec<f64>> = runs.iter().map(|r| r.history.test_rmse.clone()).collect();
    let train: Vec<Vec<f64>> = runs.iter().map(|r| r.history.train_rmse.clone()).collect();
    let CurveSummary {
        mean,
        std,
        best_epoch,
        best_mean,
        avg_std,
    } = aggregate_curves(&test)?;
    let train_mean = aggregate_curves(&train)?.mean;
    let seconds: Vec<f64> = runs.iter().flat_map(|r| r.history.seconds.iter().copied()).collect();
    let k = plan.k as u64;
    Ok(RunSummary {
        format: RUN_FORMAT.into(),
        model: spec.kind,
        param_count: count_params(&spec)?,
        protocol: cfg.protocol.kind,
        folds: plan.k,
        epochs: mean.len(),
        best_avg_rmse: best_mean,
        best_epoch,
        avg_std,
        final_avg_rmse: *mean.last().unwrap_or(&f64::NAN),
        mean_epoch_seconds: seconds.iter().sum::<f64>() / seconds.len().max(1) as f64,
        noisy: cfg.noise.is_some(),
        curves: Curves {
            test_mean: mean,
            test_std: std,
            train_mean,
        },
        provenance: Provenance {
            seed: cfg.run.seed,
            plan_seed: match cfg.protocol.kind {
                ProtocolKind::Cv => plan_seed(cfg),
                ProtocolKind::Loocv => 0,
            },
            fold_model_seeds: (0..k).map(|f| derive_seed(cfg.run.seed, 2 * f)).collect(),
            fold_shuffle_seeds: (0..k).map(|f| derive_seed(cfg.run.seed, 2 * f + 1)).collect(),
            data_source: cfg.data.source,
            data_path: cfg.data.path.as_ref().map(|p| p.display().to_string()),
            data_seed: (cfg.data.source == DataSource::Synth).then_some(cfg.data.seed),
            n_obs: ds.n_obs,
            n_features: ds.n_features,
            fold_sizes: plan.fold_sizes(),
            threads: cfg.train.threads,
            engine_version: env!("CARGO_PKG_VERSION").into(),
        },
    })
}

/// Writes config, per-epoch RMSE, residuals, summary and checkpoints into `dir`.
pub fn write_reports(dir: &Path, cfg: &ExperimentConfig, runs: &[FoldRun], summary: &RunSummary) -> Result<(), CliError> {
    std::fs::write(dir.join(CONFIG_FILE), cfg.to_toml()?)?;

    let mut w = csv_writer(&dir.join(RMSE_FILE))?;
    w.write_record(["fold", "epoch", "train_rmse", "test_rmse", "seconds"])?;
    for r in runs {
        let h = &r.history;
        for e in 0..h.epochs() {
            w.serialize((r.fold, e + 1, h.train_rmse[e], h.test_rmse[e], h.seconds[e]))?;
        }
    }
    w.flush()?;

    let mut w = csv_writer(&dir.join(RESIDUALS_FILE))?;
    w.write_record(["observation_id", "fold", "epoch", "residual"])?;
    for r in runs {
        let h = &r.history;
        for (e, res) in h.test_residuals.iter().enumerate() {
            for (obs, v) in h.test_rows.iter().zip(res) {
                w.serialize((obs, r.fold, e + 1, v))?;
            }
        }
    }
    w.flush()?;

    write_json(&dir.join(SUMMARY_FILE), summary)?;
    if cfg.run.checkpoints {
        for r in runs {
            Checkpoint::capture(&r.model, r.history.epochs(), Some(r.history.rng_state)).save(&dir.join(checkpoint_file(r.fold)))?;
        }
    }
    Ok(())
}

pub fn resolve_config(args: &RunArgs, env_seed: Option<&str>) -> Result<ExperimentConfig, CliError> {
    let mut overrides = args.overrides.clone();
    if let Some(seed) = args.seed {
        overrides.push(format!("run.seed={}", seed_to_toml(seed)?));
    }
    if let Some(t) = args.threads {
        overrides.push(format!("train.threads={t}"));
    }
    if let Some(o) = &args.output {
        let quoted = toml::Value::String(o.display().to_string()).to_string();
        overrides.push(format!("run.output={quoted}"));
    }
    load_config(args.config.as_deref(), env_seed, &overrides)
}

pub fn cmd_run(args: &RunArgs, env_seed: Option<&str>) -> Result<(), CliError> {
    let cfg = resolve_config(args, env_seed)?;
    let ds = load_dataset(&cfg)?;
    let spec = cfg.model.spec(ds.n_features);
    spec.validate()?;
    let plan = fold_plan(&cfg, ds.n_obs)?;
    prepare_dir(&cfg.run.output, args.force)?;
    if !args.quiet {
        eprintln!(
            "{}: {} params, {} folds x {} epochs on {} x {}",
            spec.kind,
            count_params(&spec)?,
            plan.k,
            cfg.train.epochs,
            ds.n_obs,
            ds.n_features
        );
    }
    let runs = run_protocol(&cfg, &ds, &plan)?;
    let summary = summarize(&cfg, &ds, &plan, &runs)?;
    write_reports(&cfg.run.output, &cfg, &runs, &summary)?;
    if !args.quiet {
        eprintln!(
            "best avg test RMSE {:.4} at epoch {} (avg std {:.4}); reports in {}",
            summary.best_avg_rmse,
            summary.best_epoch,
            summary.avg_std,
            cfg.run.output.display()
        );
    }
    Ok(())
}
