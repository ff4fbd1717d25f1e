//! Files written by the commands.

use std::path::Path;

use serde::{Deserialize, Serialize};

use wtca::{BasisSet, SolverTrace, Weights};

use crate::config::{Method, RunConfig};
use crate::error::{CliError, CliResult};
use crate::train::Trained;

pub const WEIGHTS_VERSION: u32 = 1;

/// Contents of `weights.json`. Everything needed to evaluate the weights and to
/// retrain them bit for bit.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct WeightsFile {
    pub version: u32,
    pub method: Method,
    pub instance: String,
    pub sigma: f64,
    pub rho: f64,
    pub lambda: f64,
    pub features: usize,
    pub basis_seed: u64,
    pub solver_seed: u64,
    pub iterations_run: usize,
    pub layout: Vec<usize>,
    pub blocks: Vec<Vec<f64>>,
    /// PO weights before the post-regression.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub raw_blocks: Option<Vec<Vec<f64>>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub nu: Option<Vec<f64>>,
    #[serde(default)]
    pub warnings: Vec<String>,
    pub basis: BasisSet,
    pub config: RunConfig,
}

fn blocks(w: &Weights) -> Vec<Vec<f64>> {
    (0..w.num_blocks()).map(|t| w.block(t).to_vec()).collect()
}

impl WeightsFile {
    pub fn new(cfg: &RunConfig, instance: &str, basis: BasisSet, trained: &Trained) -> Self {
        Self {
            version: WEIGHTS_VERSION,
            method: cfg.method.name,
            instance: instance.to_string(),
            sigma: cfg.method.sigma,
            rho: cfg.method.rho,
            lambda: cfg.method.lambda,
            features: cfg.method.features,
            basis_seed: cfg.method.basis_seed,
            solver_seed: cfg.solver.seed,
            iterations_run: trained.iterations_run,
            layout: trained.weights.layout(),
            blocks: blocks(&trained.weights),
            raw_blocks: trained.raw.as_ref().map(blocks),
            nu: trained.nu.clone(),
            warnings: trained.warnings.clone(),
            basis,
            config: cfg.clone(),
        }
    }

    pub fn load(path: &Path) -> CliResult<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| CliError::config(format!("{}: {e}", path.display())))?;
        if text.trim().is_empty() {
            return Err(CliError::config(format!("{}: empty weights file", path.display())));
        }
        let file: Self = serde_json::from_str(&text).map_err(|e| CliError::config(format!("{}: {e}", path.display())))?;
        if file.version != WEIGHTS_VERSION {
            return Err(CliError::config(format!("{}: unsupported weights version {}", path.display(), file.version)));
        }
        Ok(file)
    }

    /// The weights, checked against the stored layout and basis.
    pub fn weights(&self) -> CliResult<Weights> {
        let w = Weights::from_blocks(self.blocks.clone());
        if w.layout() != self.layout {
            return Err(CliError::config(format!("weights of {} do not match their layout", self.instance)));
        }
        w.check_layout(&self.basis.layout())?;
        if !w.all_finite() {
            return Err(CliError::Numeric(format!("weights of {} are not finite", self.instance)));
        }
        Ok(w)
    }
}

pub fn write_json<T: Serialize>(path: &Path, value: &T) -> CliResult<()> {
    let mut text = serde_json::to_string_pretty(value)?;
    text.push('\n');
    std::fs::write(path, text)?;
    Ok(())
}

pub fn write_trace(path: &Path, trace: &SolverTrace<f64>) -> CliResult<()> {
    let mut w = csv::Writer::from_path(path)?;
    w.write_record(["k", "objective_estimate", "grad_norm", "wall_ms"])?;
    for r in &trace.rows {
        w.serialize((r.k, r.objective_estimate, r.grad_norm, r.wall_ms))?;
    }
    w.flush()?;
    Ok(())
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum BoundKind {
    Lower,
    Upper,
    Exact,
}

/// One line of `bounds.csv`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct BoundRow {
    pub method: String,
    pub instance: String,
    pub bound: BoundKind,
    pub mean: f64,
    pub se: f64,
    pub paths: usize,
    pub inner_samples: usize,
    pub wall_s: f64,
    /// `(best UB - LB) / best UB` on lower rows.
    pub best_ub_gap: Option<f64>,
    /// `(UB - best UB) / best UB` on upper rows.
    pub ub_excess: Option<f64>,
}

/// Fills the gap columns, where the best upper bound of an instance is the
/// smallest upper bound over all its rows.
pub fn fill_gaps(rows: &mut [BoundRow]) {
    let best = |inst: &str, rows: &[BoundRow]| {
        rows.iter().filter(|r| r.instance == inst && r.bound == BoundKind::Upper).map(|r| r.mean).reduce(f64::min)
    };
    let bests: Vec<Option<f64>> = rows.iter().map(|r| best(&r.instance, rows)).collect();
    for (r, b) in rows.iter_mut().zip(bests) {
        let ratio = |v: f64| b.filter(|b| *b != 0.0).map(|b| v / b);
        r.best_ub_gap = None;
        r.ub_excess = None;
        match r.bound {
            BoundKind::Lower => r.best_ub_gap = b.and_then(|b| ratio(b - r.mean)),
            BoundKind::Upper => r.ub_excess = b.and_then(|b| ratio(r.mean - b)),
            BoundKind::Exact => {}
        }
    }
}

pub fn write_bounds(path: &Path, rows: &[BoundRow]) -> CliResult<()> {
    let mut w = csv::Writer::from_path(path)?;
    for r in rows {
        w.serialize(r)?;
    }
    if rows.is_empty() {
        w.write_record(["method", "instance", "bound", "mean", "se", "paths", "inner_samples", "wall_s", "best_ub_gap", "ub_excess"])?;
    }
    w.flush()?;
    Ok(())
}

pub fn read_bounds(path: &Path) -> CliResult<Vec<BoundRow>> {
    let mut r = csv::Reader::from_path(path)?;
    Ok(r.deserialize().collect::<Result<_, _>>()?)
}
