//! The `compare` command: per-(fold, epoch) Diebold-Mariano grid of two runs.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use qrecover::eval::{significance_grid, SignificanceGrid, Verdict};
use serde::{Deserialize, Serialize};

use crate::experiment::{Provenance, RunSummary, RESIDUALS_FILE, SUMMARY_FILE};
use crate::report::{csv_writer, prepare_dir, write_json};
use crate::{CliError, CompareArgs};

pub const GRID_FILE: &str = "significance.csv";
pub const COMPARISON_FILE: &str = "comparison.json";

#[derive(Debug, Clone, Copy, Deserialize)]
struct ResidualRow {
    observation_id: usize,
    fold: usize,
    epoch: usize,
    residual: f64,
}

/// Residuals keyed by `(fold, epoch)`, each sorted by observation id.
#[derive(Debug, Clone, PartialEq)]
pub struct ResidualTable {
    pub cells: BTreeMap<(usize, usize), Vec<(usize, f64)>>,
}

impl ResidualTable {
    pub fn folds(&self) -> Vec<usize> {
        let mut f: Vec<usize> = self.cells.keys().map(|k| k.0).collect();
        f.dedup();
        f
    }

    pub fn epochs(&self) -> Vec<usize> {
        let mut e: Vec<usize> = self.cells.keys().map(|k| k.1).collect();
        e.sort_unstable();
        e.dedup();
        e
    }
}

/// A run directory (its residuals.csv) or a residual CSV path.
pub fn residual_csv(path: &Path) -> PathBuf {
    if path.is_dir() {
        path.join(RESIDUALS_FILE)
    } else {
        path.to_path_buf()
    }
}

pub fn read_residuals(path: &Path) -> Result<ResidualTable, CliError> {
    let file = residual_csv(path);
    if !file.is_file() {
        return Err(CliError::Usage(format!("MissingFile: {}", file.display())));
    }
    let mut rdr = csv::Reader::from_path(&file)?;
    let mut cells: BTreeMap<(usize, usize), Vec<(usize, f64)>> = BTreeMap::new();
    for row in rdr.deserialize() {
        let r: ResidualRow = row.map_err(|e| CliError::Usage(format!("{}: {e}", file.display())))?;
        cells.entry((r.fold, r.epoch)).or_default().push((r.observation_id, r.residual));
    }
    if cells.is_empty() {
        return Err(CliError::Usage(format!("{}: no residual rows", file.display())));
    }
    for ((fold, epoch), v) in cells.iter_mut() {
        v.sort_by_key(|p| p.0);
        if v.windows(2).any(|w| w[0].0 == w[1].0) {
            return Err(CliError::Usage(format!(
                "{}: duplicate observation in fold {fold}, epoch {epoch}",
                file.display()
            )));
        }
    }
    Ok(ResidualTable { cells })
}

/// Residual cube `[fold][epoch][obs]` of two tables on a shared protocol.
///
/// When every fold holds one observation (LOOCV) the folds are pooled into a
/// single row of the grid so each test has the full sample.
pub fn align(a: &ResidualTable, b: &ResidualTable) -> Result<(Vec<Vec<Vec<f64>>>, Vec<Vec<Vec<f64>>>, bool), CliError> {
    let (fa, fb) = (a.folds(), b.folds());
    if fa != fb {
        return Err(CliError::ProtocolMismatch(format!("fold sets differ ({} vs {} folds)", fa.len(), fb.len())));
    }
    let (ea, eb) = (a.epochs(), b.epochs());
    if ea != eb {
        return Err(CliError::ProtocolMismatch(format!("epoch counts differ ({} vs {})", ea.len(), eb.len())));
    }
    for (key, va) in &a.cells {
        let vb = b.cells.get(key).ok_or_else(|| {
            CliError::ProtocolMismatch(format!("fold {} epoch {} missing from B", key.0, key.1))
        })?;
        if va.len() != vb.len() || va.iter().zip(vb).any(|(x, y)| x.0 != y.0) {
            return Err(CliError::ProtocolMismatch(format!(
                "fold {} holds different observations in A and B",
                key.0
            )));
        }
    }
    if a.cells.len() != fa.len() * ea.len() || b.cells.len() != a.cells.len() {
        return Err(CliError::ProtocolMismatch("folds were trained for different epochs".into()));
    }
    let pooled = fa.len() > 1 && a.cells.values().all(|v| v.len() == 1);
    let cube = |t: &ResidualTable| -> Vec<Vec<Vec<f64>>> {
        if pooled {
            vec![ea
                .iter()
                .map(|&e| fa.iter().flat_map(|&f| t.cells[&(f, e)].iter().map(|p| p.1)).collect())
                .collect()]
        } else {
            fa.iter()
                .map(|&f| ea.iter().map(|&e| t.cells[&(f, e)].iter().map(|p| p.1).collect()).collect())
                .collect()
        }
    };
    Ok((cube(a), cube(b), pooled))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct VerdictCounts {
    pub a_better: usize,
    pub b_better: usize,
    pub not_significant: usize,
    pub degenerate: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Comparison {
    pub a: String,
    pub b: String,
    pub threshold: f64,
    pub pooled_folds: bool,
    pub folds: usize,
    pub epochs: usize,
    pub counts: VerdictCounts,
    pub provenance_a: Option<Provenance>,
    pub provenance_b: Option<Provenance>,
}

fn provenance_of(path: &Path) -> Option<Provenance> {
    let text = std::fs::read_to_string(path.join(SUMMARY_FILE)).ok()?;
    serde_json::from_str::<RunSummary>(&text).ok().map(|s| s.provenance)
}

pub fn write_grid(path: &Path, grid: &SignificanceGrid, fold_ids: &[usize], epoch_ids: &[usize], pooled: bool) -> Result<(), CliError> {
    let mut w = csv_writer(path)?;
    w.write_record(["fold", "epoch", "dm", "p", "verdict"])?;
    for c in &grid.cells {
        let fold = if pooled { "all".to_string() } else { fold_ids[c.fold].to_string() };
        w.write_record([
            fold,
            epoch_ids[c.epoch].to_string(),
            c.result.dm_statistic.to_string(),
            c.result.p_value.to_string(),
            c.verdict.as_str().to_string(),
        ])?;
    }
    w.flush()?;
    Ok(())
}

pub fn cmd_compare(args: &CompareArgs) -> Result<(), CliError> {
    if !(args.threshold > 0.0) {
        return Err(CliError::Usage("--threshold must be positive".into()));
    }
    let a = read_residuals(&args.a)?;
    let b = read_residuals(&args.b)?;
    let (ca, cb, pooled) = align(&a, &b)?;
    let grid = significance_grid(&ca, &cb, args.threshold)?;
    prepare_dir(&args.output, args.force)?;
    write_grid(&args.output.join(GRID_FILE), &grid, &a.folds(), &a.epochs(), pooled)?;
    let counts = VerdictCounts {
        a_better: grid.count(Verdict::ABetter),
        b_better: grid.count(Verdict::BBetter),
        not_significant: grid.count(Verdict::NotSignificant),
        degenerate: grid.cells.iter().filter(|c| c.degenerate).count(),
    };
    let summary = Comparison {
        a: args.a.display().to_string(),
        b: args.b.display().to_string(),
        threshold: args.threshold,
        pooled_folds: pooled,
        folds: grid.folds,
        epochs: grid.epochs,
        counts: counts.clone(),
        provenance_a: provenance_of(&args.a),
        provenance_b: provenance_of(&args.b),
    };
    write_json(&args.output.join(COMPARISON_FILE), &summary)?;
    println!(
        "{} cells: a-better {}, b-better {}, not-significant {} (|DM| > {})",
        grid.cells.len(),
        counts.a_better,
        counts.b_better,
        counts.not_significant,
        args.threshold
    );
    Ok(())
}
