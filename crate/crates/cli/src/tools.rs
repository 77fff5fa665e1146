//! `paramcount`, `gen-data` and `noise-eval`.

use std::io::Write;
use std::path::PathBuf;

use qrecover::checkpoint::Checkpoint;
use qrecover::data::{histogram, local_modes, standardize, synth_recovery, target_moments, TargetMoments, SYNTH_MAX};
use qrecover::hybrid::{count_params, predict_with, ModelKind, ModelSpec};
use qrecover::noise::NoiseParams;
use serde::{Deserialize, Serialize};

use crate::config::{delimiter_byte, load_config, seed_to_toml};
use crate::experiment::{checkpoint_file, fold_plan, load_dataset, CONFIG_FILE};
use crate::report::{check_file, csv_writer, prepare_dir, provenance_path, write_json};
use crate::{CliError, GenDataArgs, NoiseEvalArgs, ParamcountArgs};

/// One row of the published parameter-count tables.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct TableRow {
    pub table: &'static str,
    pub kind: ModelKind,
    /// Second hidden width for the FNN, qubit count otherwise.
    pub setting: usize,
}

pub const TABLE_ROWS: [TableRow; 17] = {
    const fn row(table: &'static str, kind: ModelKind, setting: usize) -> TableRow {
        TableRow { table, kind, setting }
    }
    [
        row("5", ModelKind::Fnn, 8),
        row("5", ModelKind::QmlAngle, 8),
        row("5", ModelKind::QmlAmplitude, 8),
        row("8", ModelKind::Fnn, 8),
        row("8", ModelKind::Fnn, 16),
        row("8", ModelKind::Fnn, 128),
        row("8", ModelKind::Fnn, 512),
        row("8", ModelKind::Fnn, 2048),
        row("8", ModelKind::Fnn, 8192),
        row("8", ModelKind::QmlAmplitude, 8),
        row("9", ModelKind::QmlAngle, 6),
        row("9", ModelKind::QmlAngle, 7),
        row("9", ModelKind::QmlAngle, 8),
        row("9", ModelKind::QmlAngle, 10),
        row("9", ModelKind::QmlAngle, 12),
        row("9", ModelKind::QmlAngle, 14),
        row("9", ModelKind::QmlAmplitude, 8),
    ]
};

pub fn table_spec(row: &TableRow) -> ModelSpec {
    let mut spec = ModelSpec::new(row.kind);
    match row.kind {
        ModelKind::Fnn => spec.fnn_second_hidden = row.setting,
        _ => spec.n_qubits = row.setting,
    }
    spec
}

pub fn cmd_paramcount(args: &ParamcountArgs, out: &mut impl Write) -> Result<(), CliError> {
    if args.table {
        writeln!(out, "table,kind,setting,param_count")?;
        for row in &TABLE_ROWS {
            let n = count_params(&table_spec(row))?;
            writeln!(out, "{},{},{},{}", row.table, row.kind, row.setting, n)?;
        }
        return Ok(());
    }
    let spec = ModelSpec {
        kind: args.kind.parse()?,
        input_dim: args.input_dim,
        hidden_dim: args.hidden,
        n_qubits: args.qubits,
        fnn_second_hidden: args.second_hidden,
        pqc_layers: args.layers,
        ..ModelSpec::default()
    };
    writeln!(out, "{}", count_params(&spec)?)?;
    Ok(())
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DataProvenance {
    pub generator: String,
    pub seed: u64,
    pub n_obs: usize,
    pub n_features: usize,
    pub delimiter: String,
    pub moments: TargetMoments,
    /// Centres of the local maxima of a 20-bin histogram over `[0, 1.1]`.
    pub modes: Vec<f64>,
    pub mean_in_range: bool,
    pub std_in_range: bool,
    pub engine_version: String,
}

pub fn cmd_gen_data(args: &GenDataArgs, env_seed: Option<&str>) -> Result<(), CliError> {
    let seed = match (args.seed, env_seed) {
        (Some(s), _) => s,
        (None, Some(raw)) => raw
            .trim()
            .parse()
            .map_err(|_| CliError::Usage(format!("QRECOVER_SEED={raw:?} is not an unsigned integer")))?,
        (None, None) => 0,
    };
    seed_to_toml(seed)?;
    let delim = delimiter_byte(&args.delimiter)?;
    let prov_path = provenance_path(&args.output);
    check_file(&args.output, args.force)?;
    check_file(&prov_path, args.force)?;
    let ds = synth_recovery(args.n_obs, args.n_features, seed)?;
    ds.write_csv(&args.output, delim)?;
    let moments = target_moments(&ds.targets);
    let bins = 20;
    let counts = histogram(&ds.targets, bins, 0.0, SYNTH_MAX);
    let modes = local_modes(&counts, 3)
        .into_iter()
        .map(|b| (b as f64 + 0.5) * SYNTH_MAX / bins as f64)
        .collect();
    let prov = DataProvenance {
        generator: "synth-recovery".into(),
        seed,
        n_obs: ds.n_obs,
        n_features: ds.n_features,
        delimiter: args.delimiter.clone(),
        mean_in_range: (0.43..=0.53).contains(&moments.mean),
        std_in_range: (0.28..=0.38).contains(&moments.std),
        moments,
        modes,
        engine_version: env!("CARGO_PKG_VERSION").into(),
    };
    write_json(&prov_path, &prov)?;
    println!(
        "wrote {} ({} x {}, target mean {:.4}, std {:.4})",
        args.output.display(),
        ds.n_obs,
        ds.n_features + 1,
        prov.moments.mean,
        prov.moments.std
    );
    Ok(())
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NoiseRow {
    pub scale: f64,
    pub noise: NoiseParams,
    pub rmse: f64,
    pub rmse_delta: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NoiseReport {
    pub run_dir: String,
    pub fold: usize,
    pub rows: usize,
    pub seed: u64,
    pub noiseless_rmse: f64,
    pub results: Vec<NoiseRow>,
}

fn rmse(preds: &[f64], targets: &[f64]) -> f64 {
    (preds.iter().zip(targets).map(|(p, t)| (p - t) * (p - t)).sum::<f64>() / preds.len() as f64).sqrt()
}

pub fn cmd_noise_eval(args: &NoiseEvalArgs) -> Result<(), CliError> {
    let cfg_path = args.run_dir.join(CONFIG_FILE);
    if !cfg_path.is_file() {
        return Err(CliError::Usage(format!("MissingFile: {}", cfg_path.display())));
    }
    let cfg = load_config(Some(&cfg_path), None, &[])?;
    let ckpt_path = args.run_dir.join(checkpoint_file(args.fold));
    if !ckpt_path.is_file() {
        return Err(CliError::Usage(format!("MissingFile: {}", ckpt_path.display())));
    }
    let model = Checkpoint::load(&ckpt_path)?.restore()?;
    if !model.spec.kind.is_quantum() {
        return Err(CliError::Usage(format!("noise-eval needs a quantum model, checkpoint holds {}", model.spec.kind)));
    }
    if let Some(s) = args.scales.iter().find(|s| !(**s >= 0.0)) {
        return Err(CliError::Usage(format!("invalid noise scale {s}")));
    }
    let base = cfg.noise.clone().unwrap_or_default();
    for s in &args.scales {
        base.scaled(*s).validate()?;
    }

    let ds = load_dataset(&cfg)?;
    let plan = fold_plan(&cfg, ds.n_obs)?;
    if args.fold >= plan.k {
        return Err(CliError::Usage(format!("fold {} out of range (run has {} folds)", args.fold, plan.k)));
    }
    let scaled = standardize(&ds, &plan.train_rows(args.fold), cfg.data.scaling)?;
    let mut rows = plan.test_rows(args.fold);
    if let Some(m) = args.max_rows {
        rows.truncate(m.max(1));
    }
    let subset = scaled.subset(&rows);
    let targets: Vec<f64> = (0..subset.len()).map(|i| subset.target(i)).collect();
    let clean = rmse(&predict_with(&model, &subset, None)?, &targets);
    let mut results = Vec::new();
    for &s in &args.scales {
        let noise = base.scaled(s);
        let r = rmse(&predict_with(&model, &subset, Some(&noise))?, &targets);
        println!("scale {s}: rmse {r:.6} (noiseless {clean:.6})");
        results.push(NoiseRow {
            scale: s,
            noise,
            rmse: r,
            rmse_delta: r - clean,
        });
    }

    let out: PathBuf = args.output.clone().unwrap_or_else(|| args.run_dir.join("noise_eval"));
    prepare_dir(&out, args.force)?;
    let mut w = csv_writer(&out.join("noise_eval.csv"))?;
    w.write_record([
        "scale",
        "p_depol_1q",
        "p_depol_2q",
        "p_amp_damp",
        "p_dephase",
        "p_readout",
        "rmse",
        "rmse_delta",
    ])?;
    for r in &results {
        let n = &r.noise;
        w.serialize((r.scale, n.p_depol_1q, n.p_depol_2q, n.p_amp_damp, n.p_dephase, n.p_readout, r.rmse, r.rmse_delta))?;
    }
    w.flush()?;
    write_json(
        &out.join("noise_eval.json"),
        &NoiseReport {
            run_dir: args.run_dir.display().to_string(),
            fold: args.fold,
            rows: rows.len(),
            seed: cfg.run.seed,
            noiseless_rmse: clean,
            results,
        },
    )?;
    Ok(())
}
