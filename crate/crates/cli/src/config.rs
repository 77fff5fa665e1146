//! Experiment configuration: a sectioned TOML file, optionally overridden by
//! the `QRECOVER_SEED` environment variable and then by command-line flags.

use std::path::{Path, PathBuf};

use qrecover::data::{Scaling, DEFAULT_TARGET};
use qrecover::hybrid::{ModelKind, ModelSpec, TrainConfig};
use qrecover::noise::NoiseParams;
use serde::{Deserialize, Serialize};

use crate::CliError;

pub const SEED_ENV: &str = "QRECOVER_SEED";

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ExperimentConfig {
    pub run: RunSection,
    pub model: ModelSection,
    pub train: TrainSection,
    pub data: DataSection,
    pub protocol: ProtocolSection,
    pub compare: CompareSection,
    /// Present only for noisy experiments. Keys default to the hardware-calibrated values.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub noise: Option<NoiseParams>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct RunSection {
    pub seed: u64,
    pub output: PathBuf,
    /// Write one checkpoint per fold.
    pub checkpoints: bool,
}

impl Default for RunSection {
    fn default() -> Self {
        RunSection {
            seed: 0,
            output: PathBuf::from("run"),
            checkpoints: true,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ModelSection {
    pub kind: ModelKind,
    pub hidden_dim: usize,
    pub n_qubits: usize,
    pub fnn_second_hidden: usize,
    pub pqc_layers: usize,
    pub leaky_slope: f64,
}

impl Default for ModelSection {
    fn default() -> Self {
        let s = ModelSpec::default();
        ModelSection {
            kind: s.kind,
            hidden_dim: s.hidden_dim,
            n_qubits: s.n_qubits,
            fnn_second_hidden: s.fnn_second_hidden,
            pqc_layers: s.pqc_layers,
            leaky_slope: s.leaky_slope,
        }
    }
}

impl ModelSection {
    /// The model spec for a dataset with `input_dim` features.
    pub fn spec(&self, input_dim: usize) -> ModelSpec {
        ModelSpec {
            kind: self.kind,
            input_dim,
            hidden_dim: self.hidden_dim,
            n_qubits: self.n_qubits,
            fnn_second_hidden: self.fnn_second_hidden,
            pqc_layers: self.pqc_layers,
            leaky_slope: self.leaky_slope,
            seed: 0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct TrainSection {
    pub epochs: usize,
    pub batch_size: usize,
    pub learning_rate: f64,
    pub threads: usize,
    /// When false, every `seconds` column is zero so reports are byte-reproducible.
    pub record_timing: bool,
}

impl Default for TrainSection {
    fn default() -> Self {
        let t = TrainConfig::default();
        TrainSection {
            epochs: t.epochs,
            batch_size: t.batch_size,
            learning_rate: t.learning_rate,
            threads: t.threads,
            record_timing: t.record_timing,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum DataSource {
    #[default]
    Synth,
    Csv,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct DataSection {
    pub source: DataSource,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub path: Option<PathBuf>,
    pub target_column: String,
    pub delimiter: String,
    pub n_obs: usize,
    pub n_features: usize,
    pub seed: u64,
    pub scaling: Scaling,
}

impl Default for DataSection {
    fn default() -> Self {
        DataSection {
            source: DataSource::Synth,
            path: None,
            target_column: DEFAULT_TARGET.to_string(),
            delimiter: ",".to_string(),
            n_obs: 1725,
            n_features: 256,
            seed: 0,
            scaling: Scaling::Zscore,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ProtocolKind {
    #[default]
    Cv,
    Loocv,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ProtocolSection {
    pub kind: ProtocolKind,
    /// Fold count for `cv`; ignored by `loocv`.
    pub k: usize,
}

impl Default for ProtocolSection {
    fn default() -> Self {
        ProtocolSection {
            kind: ProtocolKind::Cv,
            k: 4,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct CompareSection {
    pub threshold: f64,
}

impl Default for CompareSection {
    fn default() -> Self {
        CompareSection {
            threshold: qrecover::eval::DEFAULT_THRESHOLD,
        }
    }
}

/// Delimiter string to a single byte.
pub fn delimiter_byte(s: &str) -> Result<u8, CliError> {
    match s.as_bytes() {
        [b] if b.is_ascii() => Ok(*b),
        _ if s == "\\t" => Ok(b'\t'),
        _ => Err(CliError::Usage(format!("delimiter must be one ASCII character, got {s:?}"))),
    }
}

impl ExperimentConfig {
    pub fn validate(&self) -> Result<(), CliError> {
        match (self.data.source, &self.data.path) {
            (DataSource::Csv, None) => return Err(CliError::Usage("data.source = \"csv\" needs data.path".into())),
            (DataSource::Synth, Some(_)) => {
                return Err(CliError::Usage(
                    "data.path is set but data.source = \"synth\"; pick exactly one data source".into(),
                ))
            }
            _ => {}
        }
        delimiter_byte(&self.data.delimiter)?;
        if self.protocol.kind == ProtocolKind::Cv && self.protocol.k < 2 {
            return Err(CliError::Usage(format!("protocol.k = {} must be at least 2", self.protocol.k)));
        }
        if self.noise.is_some() && !self.model.kind.is_quantum() {
            return Err(CliError::Usage("a [noise] section needs a quantum model kind".into()));
        }
        if !(self.compare.threshold > 0.0) {
            return Err(CliError::Usage("compare.threshold must be positive".into()));
        }
        self.train_config(0).validate()?;
        self.model.spec(self.data.n_features).validate()?;
        Ok(())
    }

    pub fn train_config(&self, shuffle_seed: u64) -> TrainConfig {
        TrainConfig {
            epochs: self.train.epochs,
            batch_size: self.train.batch_size,
            learning_rate: self.train.learning_rate,
            shuffle_seed,
            threads: self.train.threads,
            record_timing: self.train.record_timing,
            noise: self.noise.clone(),
        }
    }

    pub fn to_toml(&self) -> Result<String, CliError> {
        toml::to_string(self).map_err(|e| CliError::Runtime(format!("cannot serialize config: {e}")))
    }
}

/// Layered configuration: file, then environment seed, then `key=value`
/// overrides (dotted keys, TOML literal values; bare words are strings).
pub fn load_config(file: Option<&Path>, env_seed: Option<&str>, overrides: &[String]) -> Result<ExperimentConfig, CliError> {
    let text = match file {
        Some(p) => std::fs::read_to_string(p)
            .map_err(|e| CliError::Usage(format!("MissingFile: cannot read config {}: {e}", p.display())))?,
        None => String::new(),
    };
    let origin = file.map(|p| p.display().to_string()).unwrap_or_else(|| "<defaults>".into());
    // Parse the file alone first so diagnostics carry its line numbers.
    toml::from_str::<ExperimentConfig>(&text).map_err(|e| CliError::Usage(format!("{origin}: {e}")))?;
    let mut table: toml::Table = toml::from_str(&text).map_err(|e| CliError::Usage(format!("{origin}: {e}")))?;

    if let Some(raw) = env_seed {
        let seed: u64 = raw
            .trim()
            .parse()
            .map_err(|_| CliError::Usage(format!("{SEED_ENV}={raw:?} is not an unsigned integer")))?;
        set_path(&mut table, "run.seed", toml::Value::Integer(seed_to_toml(seed)?))?;
    }
    for item in overrides {
        let (key, value) = item
            .split_once('=')
            .ok_or_else(|| CliError::Usage(format!("override {item:?} is not key=value")))?;
        set_path(&mut table, key.trim(), parse_literal(value.trim()))?;
    }
    let cfg: ExperimentConfig = toml::Value::Table(table)
        .try_into()
        .map_err(|e: toml::de::Error| CliError::Usage(format!("after overrides: {e}")))?;
    cfg.validate()?;
    Ok(cfg)
}

pub(crate) fn seed_to_toml(seed: u64) -> Result<i64, CliError> {
    i64::try_from(seed).map_err(|_| CliError::Usage(format!("seed {seed} exceeds {}", i64::MAX)))
}

fn parse_literal(raw: &str) -> toml::Value {
    toml::from_str::<toml::Table>(&format!("v = {raw}"))
        .ok()
        .and_then(|mut t| t.remove("v"))
        .unwrap_or_else(|| toml::Value::String(raw.to_string()))
}

fn set_path(table: &mut toml::Table, key: &str, value: toml::Value) -> Result<(), CliError> {
    let mut parts: Vec<&str> = key.split('.').collect();
    let leaf = parts.pop().filter(|s| !s.is_empty()).ok_or_else(|| CliError::Usage(format!("empty key in {key:?}")))?;
    let mut cur = table;
    for part in parts {
        let entry = cur.entry(part.to_string()).or_insert_with(|| toml::Value::Table(toml::Table::new()));
        cur = entry
            .as_table_mut()
            .ok_or_else(|| CliError::Usage(format!("`{part}` in {key:?} is not a section")))?;
    }
    cur.insert(leaf.to_string(), value);
    Ok(())
}
