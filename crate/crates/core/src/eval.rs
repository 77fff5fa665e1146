//! Cross-validation plans, curve aggregation and Diebold-Mariano tests.

use rand::seq::SliceRandom;
use rand::{RngCore, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use statrs::function::erf::erfc;

use crate::data::{standardize, Dataset, Scaling};
use crate::hybrid::{build_model, train, HybridModel, ModelSpec, TrainConfig, TrainHistory};
use crate::{Error, Result};

/// Two-sided 5% critical value of the standard normal.
pub const DEFAULT_THRESHOLD: f64 = 1.959964;

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct FoldPlan {
    pub n_observations: usize,
    pub k: usize,
    /// Test fold of every observation.
    pub assignments: Vec<usize>,
}

impl FoldPlan {
    /// Observation ids held out in `fold`, ascending.
    pub fn test_rows(&self, fold: usize) -> Vec<usize> {
        (0..self.n_observations).filter(|&i| self.assignments[i] == fold).collect()
    }

    pub fn train_rows(&self, fold: usize) -> Vec<usize> {
        (0..self.n_observations).filter(|&i| self.assignments[i] != fold).collect()
    }

    pub fn fold_sizes(&self) -> Vec<usize> {
        let mut sizes = vec![0; self.k];
        for &f in &self.assignments {
            sizes[f] += 1;
        }
        sizes
    }
}

/// Seeded shuffle followed by contiguous chunks; the first `n % k` folds get
/// one extra observation.
pub fn kfold_split(n: usize, k: usize, seed: u64) -> Result<FoldPlan> {
    if k < 2 || n < k {
        return Err(Error::Split { n, k });
    }
    let mut order: Vec<usize> = (0..n).collect();
    order.shuffle(&mut ChaCha8Rng::seed_from_u64(seed));
    let (base, extra) = (n / k, n % k);
    let mut assignments = vec![0; n];
    let mut pos = 0;
    for fold in 0..k {
        let size = base + usize::from(fold < extra);
        for &obs in &order[pos..pos + size] {
            assignments[obs] = fold;
        }
        pos += size;
    }
    Ok(FoldPlan {
        n_observations: n,
        k,
        assignments,
    })
}

/// Leave-one-out: fold `i` holds out observation `i`.
pub fn loocv_plan(n: usize) -> Result<FoldPlan> {
    if n < 2 {
        return Err(Error::Split { n, k: n });
    }
    Ok(FoldPlan {
        n_observations: n,
        k: n,
        assignments: (0..n).collect(),
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DmResult {
    pub dm_statistic: f64,
    pub p_value: f64,
    pub mean_diff: f64,
    pub n: usize,
}

/// Standard normal CDF.
pub fn normal_cdf(x: f64) -> f64 {
    0.5 * erfc(-x / std::f64::consts::SQRT_2)
}

/// Two-sided p-value of a standard normal statistic.
pub fn two_sided_p(stat: f64) -> f64 {
    if stat.is_infinite() {
        return 0.0;
    }
    erfc(stat.abs() / std::f64::consts::SQRT_2).min(1.0)
}

/// Diebold-Mariano test on absolute residuals. Negative statistics favor `a`.
pub fn dm_test(residuals_a: &[f64], residuals_b: &[f64]) -> Result<DmResult> {
    if residuals_a.len() != residuals_b.len() {
        return Err(Error::Shape(format!(
            "residual vectors differ in length ({} vs {})",
            residuals_a.len(),
            residuals_b.len()
        )));
    }
    let m = residuals_a.len();
    if m < 2 {
        return Err(Error::Shape(format!("need at least 2 paired residuals, got {m}")));
    }
    let d: Vec<f64> = residuals_a.iter().zip(residuals_b).map(|(a, b)| a.abs() - b.abs()).collect();
    let mean = d.iter().sum::<f64>() / m as f64;
    if d.iter().all(|&x| x == d[0]) {
        return if d[0] == 0.0 {
            Ok(DmResult {
                dm_statistic: 0.0,
                p_value: 1.0,
                mean_diff: 0.0,
                n: m,
            })
        } else {
            Err(Error::DegenerateVariance { mean_diff: mean })
        };
    }
    let var = d.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (m - 1) as f64;
    let dm = mean / (var / m as f64).sqrt();
    Ok(DmResult {
        dm_statistic: dm,
        p_value: two_sided_p(dm),
        mean_diff: mean,
        n: m,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Verdict {
    ABetter,
    BBetter,
    NotSignificant,
}

impl Verdict {
    pub fn classify(dm: f64, threshold: f64) -> Self {
        if dm < -threshold {
            Verdict::ABetter
        } else if dm > threshold {
            Verdict::BBetter
        } else {
            Verdict::NotSignificant
        }
    }

    pub fn as_str(self) -> &'static str {
        match self {
            Verdict::ABetter => "a-better",
            Verdict::BBetter => "b-better",
            Verdict::NotSignificant => "not-significant",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GridCell {
    pub fold: usize,
    pub epoch: usize,
    pub result: DmResult,
    pub verdict: Verdict,
    /// The differences were constant and non-zero; the statistic is `+-inf`.
    pub degenerate: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SignificanceGrid {
    pub folds: usize,
    pub epochs: usize,
    pub threshold: f64,
    /// Row-major by fold, then epoch.
    pub cells: Vec<GridCell>,
}

impl SignificanceGrid {
    pub fn cell(&self, fold: usize, epoch: usize) -> &GridCell {
        &self.cells[fold * self.epochs + epoch]
    }

    pub fn count(&self, verdict: Verdict) -> usize {
        self.cells.iter().filter(|c| c.verdict == verdict).count()
    }
}

/// DM test for every `(fold, epoch)`; inputs are indexed `[fold][epoch][obs]`.
///
/// A constant non-zero difference is treated as an infinitely significant
/// result in its direction rather than aborting the grid.
pub fn significance_grid(a: &[Vec<Vec<f64>>], b: &[Vec<Vec<f64>>], threshold: f64) -> Result<SignificanceGrid> {
    if a.is_empty() {
        return Err(Error::EmptyBatch);
    }
    if a.len() != b.len() {
        return Err(Error::Shape(format!("{} folds vs {} folds", a.len(), b.len())));
    }
    let epochs = a[0].len();
    let mut cells = Vec::with_capacity(a.len() * epochs);
    for (fold, (fa, fb)) in a.iter().zip(b).enumerate() {
        if fa.len() != epochs || fb.len() != epochs {
            return Err(Error::Shape(format!(
                "fold {fold} has {} / {} epochs, expected {epochs}",
                fa.len(),
                fb.len()
            )));
        }
        for (epoch, (ra, rb)) in fa.iter().zip(fb).enumerate() {
            let (result, degenerate) = match dm_test(ra, rb) {
                Ok(r) => (r, false),
                Err(Error::DegenerateVariance { mean_diff }) => (
                    DmResult {
                        dm_statistic: f64::INFINITY.copysign(mean_diff),
                        p_value: 0.0,
                        mean_diff,
                        n: ra.len(),
                    },
                    true,
                ),
                Err(e) => return Err(e),
            };
            cells.push(GridCell {
                fold,
                epoch,
                verdict: Verdict::classify(result.dm_statistic, threshold),
                result,
                degenerate,
            });
        }
    }
    Ok(SignificanceGrid {
        folds: a.len(),
        epochs,
        threshold,
        cells,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CurveSummary {
    pub mean: Vec<f64>,
    /// Population standard deviation across folds.
    pub std: Vec<f64>,
    /// 1-based epoch of the lowest mean.
    pub best_epoch: usize,
    pub best_mean: f64,
    /// Mean over epochs of `std`.
    pub avg_std: f64,
}

/// Pointwise mean and spread of per-fold curves.
pub fn aggregate_curves(curves: &[Vec<f64>]) -> Result<CurveSummary> {
    let first = curves.first().ok_or(Error::EmptyBatch)?;
    let epochs = first.len();
    if epochs == 0 {
        return Err(Error::EmptyBatch);
    }
    if let Some(bad) = curves.iter().find(|c| c.len() != epochs) {
        return Err(Error::Shape(format!("curve of {} epochs, expected {epochs}", bad.len())));
    }
    let k = curves.len() as f64;
    let mean: Vec<f64> = (0..epochs).map(|e| curves.iter().map(|c| c[e]).sum::<f64>() / k).collect();
    let std: Vec<f64> = (0..epochs)
        .map(|e| (curves.iter().map(|c| (c[e] - mean[e]).powi(2)).sum::<f64>() / k).sqrt())
        .collect();
    let (best_idx, best_mean) = mean
        .iter()
        .copied()
        .enumerate()
        .fold((0, f64::INFINITY), |(bi, bv), (i, v)| if v < bv { (i, v) } else { (bi, bv) });
    let avg_std = std.iter().sum::<f64>() / epochs as f64;
    Ok(CurveSummary {
        mean,
        std,
        best_epoch: best_idx + 1,
        best_mean,
        avg_std,
    })
}

/// [`aggregate_curves`] over the test-RMSE curves of per-fold histories.
pub fn aggregate_histories(histories: &[TrainHistory]) -> Result<CurveSummary> {
    let curves: Vec<Vec<f64>> = histories.iter().map(|h| h.test_rmse.clone()).collect();
    aggregate_curves(&curves)
}

/// Independent child seed number `tag` of `base`.
pub fn derive_seed(base: u64, tag: u64) -> u64 {
    let mut rng = ChaCha8Rng::seed_from_u64(base);
    rng.set_stream(tag);
    rng.next_u64()
}

/// Outcome of one cross-validation fold.
#[derive(Debug, Clone)]
pub struct FoldRun {
    pub fold: usize,
    pub model: HybridModel,
    pub history: TrainHistory,
}

/// Trains a fresh model on every fold of `plan`.
///
/// Features are rescaled with statistics of each fold's training rows. Fold
/// `i` initializes its model from `derive_seed(seed, 2i)` and shuffles with
/// `derive_seed(seed, 2i + 1)`, so models of different kinds trained with
/// the same seed see identical splits and batch orders.
pub fn cross_validate(
    ds: &Dataset,
    plan: &FoldPlan,
    spec: &ModelSpec,
    config: &TrainConfig,
    scaling: Scaling,
    seed: u64,
) -> Result<Vec<FoldRun>> {
    if plan.n_observations != ds.n_obs {
        return Err(Error::Shape(format!(
            "fold plan covers {} rows, dataset has {}",
            plan.n_observations, ds.n_obs
        )));
    }
    (0..plan.k)
        .map(|fold| {
            let train_rows = plan.train_rows(fold);
            let test_rows = plan.test_rows(fold);
            let scaled = standardize(ds, &train_rows, scaling)?;
            let fold_spec = ModelSpec {
                seed: derive_seed(seed, 2 * fold as u64),
                ..spec.clone()
            };
            let fold_config = TrainConfig {
                shuffle_seed: derive_seed(seed, 2 * fold as u64 + 1),
                ..config.clone()
            };
            let mut model = build_model(&fold_spec)?;
            let history = train(&mut model, &scaled.subset(&train_rows), &scaled.subset(&test_rows), &fold_config)?;
            Ok(FoldRun { fold, model, history })
        })
        .collect()
}
