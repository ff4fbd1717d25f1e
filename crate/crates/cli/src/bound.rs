//! Lower and upper bound estimation and the `bound` command.

use std::path::{Path, PathBuf};
use std::time::Instant;

use serde::{Deserialize, Serialize};

use wtca::bounds::{lower_bound, upper_bound, PolicySpec};
use wtca::mdp::{exact_value, DEFAULT_STATE_CAP};
use wtca::{BasisSet, MdpInstance, Weights};

use crate::config::{build_instance, EvaluationConfig, RunConfig};
use crate::error::{CliError, CliResult};
use crate::output::{fill_gaps, write_bounds, write_json, BoundKind, BoundRow, WeightsFile};

/// Greedy-policy lower bound and dual upper bound of `weights` on one
/// evaluation path set. The policy draws its inner samples from the next seed.
pub fn evaluate(
    method: &str,
    label: &str,
    weights: &Weights,
    inst: &MdpInstance,
    basis: &BasisSet,
    eval: &EvaluationConfig,
) -> CliResult<[BoundRow; 2]> {
    let row = |bound, mean, se, wall_s| BoundRow {
        method: method.to_string(),
        instance: label.to_string(),
        bound,
        mean,
        se,
        paths: eval.paths,
        inner_samples: eval.inner_samples,
        wall_s,
        best_ub_gap: None,
        ub_excess: None,
    };
    let start = Instant::now();
    let policy = PolicySpec::new(weights.clone(), eval.inner_samples, eval.seed.wrapping_add(1))?;
    let lb = lower_bound(&policy, inst, basis, eval.paths, eval.seed)?;
    let lower = row(BoundKind::Lower, lb.mean, lb.std_error, start.elapsed().as_secs_f64());
    let start = Instant::now();
    let ub = upper_bound(weights, inst, basis, eval.paths, eval.inner_samples, eval.seed)?;
    let upper = row(BoundKind::Upper, ub.mean, ub.std_error, start.elapsed().as_secs_f64());
    Ok([lower, upper])
}

/// The optimal value of a finite instance as a bound row.
pub fn exact_row(label: &str, inst: &MdpInstance) -> CliResult<Option<BoundRow>> {
    if inst.finite_chain().is_none() {
        return Ok(None);
    }
    let start = Instant::now();
    let v = exact_value(inst, DEFAULT_STATE_CAP)?.value;
    Ok(Some(BoundRow {
        method: "exact".into(),
        instance: label.to_string(),
        bound: BoundKind::Exact,
        mean: v,
        se: 0.0,
        paths: 0,
        inner_samples: 0,
        wall_s: start.elapsed().as_secs_f64(),
        best_ub_gap: None,
        ub_excess: None,
    }))
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct BoundSummary {
    pub instance: String,
    pub evaluation: EvaluationConfig,
    pub weights: Vec<PathBuf>,
    pub rows: Vec<BoundRow>,
}

/// `bound`: evaluates each weights file on the instance of `cfg` and writes
/// `bounds.csv` and `summary.json`.
pub fn cmd_bound(cfg: &RunConfig, weights: &[PathBuf], out: &Path) -> CliResult<BoundSummary> {
    if weights.is_empty() {
        return Err(CliError::config("no weights files given"));
    }
    let inst = build_instance(&cfg.instance)?;
    let label = inst.name().to_string();
    let mut rows = Vec::new();
    for path in weights {
        let file = WeightsFile::load(path)?;
        if file.instance != label {
            return Err(CliError::config(format!("{}: weights are for {}, the configuration describes {label}", path.display(), file.instance)));
        }
        file.basis.check(&inst).map_err(|e| CliError::config(format!("{}: {e}", path.display())))?;
        let w = file.weights()?;
        log::info!("evaluating {} weights from {}", file.method.as_str(), path.display());
        rows.extend(evaluate(file.method.as_str(), &label, &w, &inst, &file.basis, &cfg.evaluation)?);
    }
    rows.extend(exact_row(&label, &inst)?);
    fill_gaps(&mut rows);
    std::fs::create_dir_all(out)?;
    write_bounds(&out.join("bounds.csv"), &rows)?;
    let summary = BoundSummary { instance: label, evaluation: cfg.evaluation.clone(), weights: weights.to_vec(), rows };
    write_json(&out.join("summary.json"), &summary)?;
    Ok(summary)
}
