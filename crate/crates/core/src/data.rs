//! Datasets: CSV ingestion, per-fold feature scaling, padding, and the
//! synthetic recovery-rate generator.

use std::path::Path;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Beta, Bernoulli, Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::{Error, Result};

pub const DEFAULT_TARGET: &str = "recovery_rate";

/// Per-feature affine map `x -> (x - shift) / scale` fitted on training rows.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Scaler {
    pub shift: Vec<f64>,
    pub scale: Vec<f64>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Scaling {
    #[default]
    Zscore,
    Minmax,
    None,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Dataset {
    pub n_obs: usize,
    pub n_features: usize,
    /// `[n_obs, n_features]`, row-major.
    pub features: Vec<f64>,
    pub targets: Vec<f64>,
    pub feature_names: Vec<String>,
    pub target_name: String,
    pub scaler: Option<Scaler>,
}

impl Dataset {
    pub fn new(features: Vec<f64>, n_features: usize, targets: Vec<f64>, feature_names: Vec<String>) -> Result<Self> {
        let n_obs = targets.len();
        if n_obs == 0 {
            return Err(Error::EmptyBatch);
        }
        if features.len() != n_obs * n_features || feature_names.len() != n_features {
            return Err(Error::Shape(format!(
                "{} cells / {} names for {n_obs} rows x {n_features} features",
                features.len(),
                feature_names.len()
            )));
        }
        if let Some(pos) = features.iter().chain(&targets).position(|v| !v.is_finite()) {
            return Err(Error::Shape(format!("non-finite value at flat position {pos}")));
        }
        Ok(Dataset {
            n_obs,
            n_features,
            features,
            targets,
            feature_names,
            target_name: DEFAULT_TARGET.to_string(),
            scaler: None,
        })
    }

    pub fn row(&self, i: usize) -> &[f64] {
        &self.features[i * self.n_features..(i + 1) * self.n_features]
    }

    pub fn subset(&self, rows: &[usize]) -> Subset<'_> {
        Subset {
            dataset: self,
            rows: rows.to_vec(),
        }
    }

    pub fn all(&self) -> Subset<'_> {
        self.subset(&(0..self.n_obs).collect::<Vec<_>>())
    }

    /// Writes the dataset with a header row; the target is the last column.
    pub fn write_csv(&self, path: &Path, delimiter: u8) -> Result<()> {
        let mut w = csv::WriterBuilder::new().delimiter(delimiter).from_path(path)?;
        let mut header: Vec<&str> = self.feature_names.iter().map(String::as_str).collect();
        header.push(&self.target_name);
        w.write_record(&header)?;
        let mut record = Vec::with_capacity(self.n_features + 1);
        for i in 0..self.n_obs {
            record.clear();
            record.extend(self.row(i).iter().map(|v| v.to_string()));
            record.push(self.targets[i].to_string());
            w.write_record(&record)?;
        }
        w.flush()?;
        Ok(())
    }
}

/// Row selection over a dataset.
#[derive(Debug, Clone)]
pub struct Subset<'a> {
    pub dataset: &'a Dataset,
    pub rows: Vec<usize>,
}

impl Subset<'_> {
    pub fn len(&self) -> usize {
        self.rows.len()
    }

    pub fn is_empty(&self) -> bool {
        self.rows.is_empty()
    }

    pub fn input(&self, i: usize) -> &[f64] {
        self.dataset.row(self.rows[i])
    }

    pub fn target(&self, i: usize) -> f64 {
        self.dataset.targets[self.rows[i]]
    }
}

/// Reads a headed CSV; every non-target column becomes a feature.
pub fn load_csv(path: &Path, target_column: &str, delimiter: u8) -> Result<Dataset> {
    let mut reader = csv::ReaderBuilder::new()
        .delimiter(delimiter)
        .has_headers(true)
        .from_path(path)?;
    let headers = reader.headers()?.clone();
    if headers.is_empty() {
        return Err(Error::EmptyFile(path.to_path_buf()));
    }
    let target_idx = headers
        .iter()
        .position(|h| h.trim() == target_column)
        .ok_or_else(|| Error::MissingColumn(target_column.to_string()))?;
    let feature_names: Vec<String> = headers
        .iter()
        .enumerate()
        .filter(|&(i, _)| i != target_idx)
        .map(|(_, h)| h.trim().to_string())
        .collect();

    let mut features = Vec::new();
    let mut targets = Vec::new();
    for (row, record) in reader.records().enumerate() {
        let record = record?;
        for (col, cell) in record.iter().enumerate() {
            let trimmed = cell.trim();
            let value: f64 = trimmed
                .parse()
                .ok()
                .filter(|v: &f64| v.is_finite())
                .ok_or_else(|| Error::NonNumericCell {
                    row,
                    col: headers.get(col).unwrap_or("?").to_string(),
                    value: cell.to_string(),
                })?;
            if col == target_idx {
                targets.push(value);
            } else {
                features.push(value);
            }
        }
    }
    if targets.is_empty() {
        return Err(Error::EmptyFile(path.to_path_buf()));
    }
    let mut ds = Dataset::new(features, feature_names.len(), targets, feature_names)?;
    ds.target_name = target_column.to_string();
    Ok(ds)
}

/// Fits a scaler on `train_rows` and applies it to every row.
///
/// Features that are constant on the training rows pass through unchanged.
pub fn standardize(ds: &Dataset, train_rows: &[usize], scaling: Scaling) -> Result<Dataset> {
    if train_rows.is_empty() {
        return Err(Error::EmptyBatch);
    }
    let d = ds.n_features;
    let m = train_rows.len() as f64;
    let (shift, scale) = match scaling {
        Scaling::None => (vec![0.0; d], vec![1.0; d]),
        Scaling::Zscore => {
            let mut mean = vec![0.0; d];
            for &r in train_rows {
                for (acc, v) in mean.iter_mut().zip(ds.row(r)) {
                    *acc += v;
                }
            }
            mean.iter_mut().for_each(|v| *v /= m);
            let mut var = vec![0.0; d];
            for &r in train_rows {
                for ((acc, v), mu) in var.iter_mut().zip(ds.row(r)).zip(&mean) {
                    *acc += (v - mu) * (v - mu);
                }
            }
            let std = var
                .iter()
                .map(|v| {
                    let s = (v / m).sqrt();
                    if s > 1e-12 { s } else { 1.0 }
                })
                .collect();
            let shift = mean
                .iter()
                .zip(&var)
                .map(|(&mu, &v)| if (v / m).sqrt() > 1e-12 { mu } else { 0.0 })
                .collect();
            (shift, std)
        }
        Scaling::Minmax => {
            let mut lo = vec![f64::INFINITY; d];
            let mut hi = vec![f64::NEG_INFINITY; d];
            for &r in train_rows {
                for (j, &v) in ds.row(r).iter().enumerate() {
                    lo[j] = lo[j].min(v);
                    hi[j] = hi[j].max(v);
                }
            }
            let range: Vec<f64> = lo.iter().zip(&hi).map(|(l, h)| h - l).collect();
            let shift = lo.iter().zip(&range).map(|(&l, &r)| if r > 1e-12 { l } else { 0.0 }).collect();
            let scale = range.iter().map(|&r| if r > 1e-12 { r } else { 1.0 }).collect();
            (shift, scale)
        }
    };
    let mut out = ds.clone();
    for row in out.features.chunks_exact_mut(d) {
        for ((v, s), c) in row.iter_mut().zip(&shift).zip(&scale) {
            *v = (*v - s) / c;
        }
    }
    out.scaler = Some(Scaler { shift, scale });
    Ok(out)
}

/// Zero-pads to the next power of two.
pub fn pad_pow2(x: &[f64]) -> Vec<f64> {
    let mut out = x.to_vec();
    out.resize(x.len().max(1).next_power_of_two(), 0.0);
    out
}

/// Moments of a generated target vector.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TargetMoments {
    pub mean: f64,
    pub std: f64,
    pub min: f64,
    pub max: f64,
    pub median: f64,
}

pub fn target_moments(targets: &[f64]) -> TargetMoments {
    let n = targets.len() as f64;
    let mean = targets.iter().sum::<f64>() / n;
    let std = (targets.iter().map(|t| (t - mean) * (t - mean)).sum::<f64>() / n).sqrt();
    let mut sorted = targets.to_vec();
    sorted.sort_by(f64::total_cmp);
    let mid = sorted.len() / 2;
    let median = if sorted.len() % 2 == 0 {
        (sorted[mid - 1] + sorted[mid]) / 2.0
    } else {
        sorted[mid]
    };
    TargetMoments {
        mean,
        std,
        min: sorted[0],
        max: sorted[sorted.len() - 1],
        median,
    }
}

/// Upper clip of synthetic recovery rates.
pub const SYNTH_MAX: f64 = 1.1;
const BLOCK: usize = 8;
const BLOCK_CORRELATION: f64 = 0.9;

/// Generates a recovery-rate-like dataset.
///
/// Features: Gaussian blocks of eight sharing a latent factor (correlation
/// 0.9 within a block), with every eighth column replaced by a 0/1 dummy
/// thresholded from its block factor. The target is a two-component Beta
/// mixture (modes near 0.1 and 1.0) whose mixing logit is a nonlinear
/// function of the first ten block means, clipped to `[0, 1.1]`.
pub fn synth_recovery(n_obs: usize, n_features: usize, seed: u64) -> Result<Dataset> {
    if n_obs < 10 {
        return Err(Error::Spec(format!("synthetic data needs at least 10 rows, got {n_obs}")));
    }
    if n_features < 2 {
        return Err(Error::Spec(format!("synthetic data needs at least 2 features, got {n_features}")));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let n_blocks = n_features.div_ceil(BLOCK);
    let dummy_rate: Vec<f64> = (0..n_blocks).map(|b| 0.15 + 0.3 * ((b * 7) % 5) as f64 / 4.0).collect();
    let low = Beta::new(1.6, 6.0).expect("valid beta");
    let high = Beta::new(5.5, 1.5).expect("valid beta");

    let mut features = Vec::with_capacity(n_obs * n_features);
    let mut targets = Vec::with_capacity(n_obs);
    let mut row = vec![0.0; n_features];
    for _ in 0..n_obs {
        for b in 0..n_blocks {
            let factor: f64 = rng.sample(StandardNormal);
            for j in b * BLOCK..((b + 1) * BLOCK).min(n_features) {
                let noise: f64 = rng.sample(StandardNormal);
                row[j] = BLOCK_CORRELATION * factor + (1.0 - BLOCK_CORRELATION * BLOCK_CORRELATION).sqrt() * noise;
            }
            let dummy_col = (b + 1) * BLOCK - 1;
            if dummy_col < n_features && n_features >= BLOCK {
                let flip = Bernoulli::new(0.1).expect("valid p").sample(&mut rng);
                let base = factor > quantile_threshold(dummy_rate[b]);
                row[dummy_col] = if base ^ flip { 1.0 } else { 0.0 };
            }
        }
        let logit = mixing_logit(&row);
        let p_high = 1.0 / (1.0 + (-logit).exp());
        let y = if rng.random::<f64>() < p_high {
            SYNTH_MAX * high.sample(&mut rng)
        } else {
            low.sample(&mut rng)
        };
        features.extend_from_slice(&row);
        targets.push(y.clamp(0.0, SYNTH_MAX));
    }
    let names = (0..n_features).map(|j| format!("x{j:03}")).collect();
    Dataset::new(features, n_features, targets, names)
}

/// Normal quantile at `1 - rate` by bisection on the CDF; generator-only.
fn quantile_threshold(rate: f64) -> f64 {
    use statrs::function::erf::erfc;
    let upper_tail = |x: f64| 0.5 * erfc(x / std::f64::consts::SQRT_2);
    let (mut lo, mut hi) = (-8.0, 8.0);
    for _ in 0..80 {
        let mid = 0.5 * (lo + hi);
        if upper_tail(mid) > rate {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    0.5 * (lo + hi)
}

/// Mean of the continuous columns of block `b` (taken modulo the block count).
fn block_signal(x: &[f64], b: usize) -> f64 {
    let n_blocks = x.len().div_ceil(BLOCK);
    let start = (b % n_blocks) * BLOCK;
    let end = (start + BLOCK).min(x.len());
    let cont = if end - start == BLOCK { BLOCK - 1 } else { end - start };
    x[start..start + cont].iter().sum::<f64>() / cont as f64
}

fn block_dummy(x: &[f64], b: usize) -> f64 {
    let col = (b * BLOCK + BLOCK - 1) % x.len();
    if x.len() >= BLOCK && x[col] > 0.5 {
        1.0
    } else {
        0.0
    }
}

fn mixing_logit(x: &[f64]) -> f64 {
    let f = |b| block_signal(x, b);
    4.0 * (-0.2 + 0.9 * f(0) - 0.7 * f(1) + 0.6 * f(2) * f(3) + 0.8 * (f(4) * f(5) * f(6)).tanh() + 0.5 * (1.5 * f(7)).sin()
        - 0.4 * f(8)
        + 0.3 * f(9)
        + 0.3 * (block_dummy(x, 10) - 0.5))
}

/// Equal-width bin counts over `[lo, hi]`; out-of-range values land in the
/// edge bins.
pub fn histogram(values: &[f64], bins: usize, lo: f64, hi: f64) -> Vec<usize> {
    let mut counts = vec![0usize; bins];
    let width = (hi - lo) / bins as f64;
    for &v in values {
        let b = (((v - lo) / width).floor().max(0.0) as usize).min(bins - 1);
        counts[b] += 1;
    }
    counts
}

/// Indices of bins that are strictly higher than every bin within `radius`
/// on either side (plateaus count once, at their left edge).
pub fn local_modes(counts: &[usize], radius: usize) -> Vec<usize> {
    (0..counts.len())
        .filter(|&i| {
            let lo = i.saturating_sub(radius);
            let hi = (i + radius).min(counts.len() - 1);
            counts[i] > 0
                && (lo..i).all(|j| counts[j] < counts[i])
                && (i + 1..=hi).all(|j| counts[j] <= counts[i])
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::io::Write;

    fn csv_file(body: &str) -> tempfile::NamedTempFile {
        let mut f = tempfile::NamedTempFile::new().unwrap();
        f.write_all(body.as_bytes()).unwrap();
        f
    }

    #[test]
    fn load_small_csv() {
        let f = csv_file("a,b,recovery_rate\n1,2,0.5\n3,4,0.25\n5,6,1.0\n");
        let ds = load_csv(f.path(), DEFAULT_TARGET, b',').unwrap();
        assert_eq!((ds.n_obs, ds.n_features), (3, 2));
        assert_eq!(ds.row(1), &[3.0, 4.0]);
        assert_eq!(ds.targets, vec![0.5, 0.25, 1.0]);
        assert_eq!(ds.feature_names, vec!["a", "b"]);
    }

    #[test]
    fn load_errors() {
        let f = csv_file("a,b\n1,2\n");
        assert!(matches!(load_csv(f.path(), DEFAULT_TARGET, b','), Err(Error::MissingColumn(c)) if c == DEFAULT_TARGET));
        let f = csv_file("a,b,recovery_rate\n1,2,0.5\n3,abc,0.1\n");
        match load_csv(f.path(), DEFAULT_TARGET, b',') {
            Err(Error::NonNumericCell { row, col, value }) => {
                assert_eq!((row, col.as_str(), value.as_str()), (1, "b", "abc"));
            }
            other => panic!("unexpected {other:?}"),
        }
        let f = csv_file("a,b,recovery_rate\n1,,0.5\n");
        assert!(matches!(load_csv(f.path(), DEFAULT_TARGET, b','), Err(Error::NonNumericCell { row: 0, .. })));
        let f = csv_file("a,recovery_rate\n");
        assert!(matches!(load_csv(f.path(), DEFAULT_TARGET, b','), Err(Error::EmptyFile(_))));
        let f = csv_file("");
        assert!(load_csv(f.path(), DEFAULT_TARGET, b',').is_err());
    }

    #[test]
    fn semicolon_delimiter() {
        let f = csv_file("a;y\n1.5;0.2\n2.5;0.3\n");
        let ds = load_csv(f.path(), "y", b';').unwrap();
        assert_eq!(ds.features, vec![1.5, 2.5]);
    }

    #[test]
    fn standardize_examples() {
        let ds = Dataset::new(vec![0.0, 5.0, 2.0, 5.0, 7.0, 5.0], 2, vec![0.0; 3], vec!["a".into(), "b".into()]).unwrap();
        let out = standardize(&ds, &[0, 1], Scaling::Zscore).unwrap();
        assert_eq!(out.row(0)[0], -1.0);
        assert_eq!(out.row(1)[0], 1.0);
        // Column b is constant on the training rows.
        assert_eq!(out.row(0)[1], 5.0);
        assert_eq!(out.row(2)[1], 5.0);
        let sc = out.scaler.as_ref().unwrap();
        assert_eq!(sc.scale[1], 1.0);
        assert!(standardize(&ds, &[], Scaling::Zscore).is_err());
    }

    #[test]
    fn minmax_maps_train_range_to_unit() {
        let ds = Dataset::new(vec![1.0, 3.0, 5.0], 1, vec![0.0; 3], vec!["a".into()]).unwrap();
        let out = standardize(&ds, &[0, 2], Scaling::Minmax).unwrap();
        assert_eq!(out.features, vec![0.0, 0.5, 1.0]);
        let none = standardize(&ds, &[0], Scaling::None).unwrap();
        assert_eq!(none.features, ds.features);
    }

    #[test]
    fn pad_examples() {
        assert_eq!(pad_pow2(&vec![1.0; 256]).len(), 256);
        assert_eq!(pad_pow2(&[1.0, 2.0, 3.0]), vec![1.0, 2.0, 3.0, 0.0]);
        let p = pad_pow2(&[1.0; 5]);
        assert_eq!(p.len(), 8);
        assert!(p[5..].iter().all(|&v| v == 0.0));
        assert_eq!(pad_pow2(&[2.0]), vec![2.0]);
    }

    #[test]
    fn synth_bounds_and_determinism() {
        let a = synth_recovery(200, 16, 9).unwrap();
        let b = synth_recovery(200, 16, 9).unwrap();
        assert_eq!(a, b);
        assert!(a.targets.iter().all(|&t| (0.0..=SYNTH_MAX).contains(&t)));
        assert!(synth_recovery(9, 16, 0).is_err());
        assert!(synth_recovery(100, 1, 0).is_err());
        // Dummies are exactly 0/1.
        assert!((0..a.n_obs).all(|i| a.row(i)[7] == 0.0 || a.row(i)[7] == 1.0));
    }

    #[test]
    fn threshold_matches_rate() {
        let t = quantile_threshold(0.5);
        assert!(t.abs() < 1e-9);
        assert!((quantile_threshold(0.1587) - 1.0).abs() < 1e-3);
    }
}
