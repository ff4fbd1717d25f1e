//! Training of the three methods and the `train` command.

use std::path::Path;
use std::sync::Arc;
use std::time::{Duration, Instant};

use serde::{Deserialize, Serialize};

use wtca::bases::WeightMatrix;
use wtca::bounds::{lsm_fit, po_post_regression, upper_bound};
use wtca::formulations::{curvature, curvature_from_lipschitz, estimate_wtca_lipschitz, Formulation, ObjectiveSpec};
use wtca::solver::{run, BlockPartition, PoOracle, WtcaOracle};
use wtca::{BasisSet, SolverConfig, SolverTrace, Weights};

use crate::config::{build_basis, CurvatureKind, Method, PartitionKind, Problem, RunConfig};
use crate::error::{CliError, CliResult};
use crate::output::{write_json, write_trace, WeightsFile};

/// Weights produced by one method, with the solver diagnostics when it ran.
#[derive(Clone, Debug)]
pub struct Trained {
    pub weights: Weights,
    /// Solver output of PO before the post-regression.
    pub raw: Option<Weights>,
    pub trace: SolverTrace<f64>,
    pub iterations_run: usize,
    pub nu: Option<Vec<f64>>,
    pub warnings: Vec<String>,
    pub wall_seconds: f64,
}

fn formulation(method: Method) -> Option<Formulation> {
    match method {
        Method::Wtca => Some(Formulation::Wtca),
        Method::Po => Some(Formulation::Po),
        Method::Lsm => None,
    }
}

fn partition(kind: PartitionKind, horizon: usize) -> BlockPartition {
    match kind {
        PartitionKind::Stagewise => BlockPartition::stagewise(horizon),
        PartitionKind::Single => BlockPartition::single(horizon),
    }
}

/// Curvature weights per solver block.
pub fn curvature_weights(cfg: &RunConfig, spec: &ObjectiveSpec, n: usize, tau: usize) -> CliResult<Vec<f64>> {
    let s = &cfg.solver;
    if let Some(nu) = &s.nu {
        if nu.len() != n {
            return Err(CliError::field("solver.nu", format!("needs {n} entries, got {}", nu.len())));
        }
        return Ok(nu.clone());
    }
    let horizon = spec.instance.horizon();
    let nu = match s.curvature {
        CurvatureKind::ClosedForm => curvature(spec, n, tau)?.nu,
        CurvatureKind::Estimated => {
            let wtca_spec = ObjectiveSpec { formulation: Formulation::Wtca, ..spec.clone() };
            let table = estimate_wtca_lipschitz(&wtca_spec, s.curvature_samples, s.seed)?;
            let table = if n == horizon { table } else { table.iter().map(|row| vec![row.iter().sum::<f64>()]).collect() };
            curvature_from_lipschitz(&table, None, tau)?.nu
        }
    };
    Ok(nu.iter().map(|v| v * s.curvature_scale).collect())
}

/// Trains `cfg.method` on `problem` with the temperature `sigma`.
pub fn train(cfg: &RunConfig, problem: &Problem, sigma: f64, keep_snapshots: bool) -> CliResult<Trained> {
    let start = Instant::now();
    let inst = &problem.instance;
    let basis = &problem.basis;
    let m = &cfg.method;
    let s = &cfg.solver;
    let Some(formulation) = formulation(m.name) else {
        let weights = lsm_fit(inst, basis, m.regression_paths, s.seed)?;
        return Ok(Trained {
            weights,
            raw: None,
            trace: SolverTrace::default(),
            iterations_run: 0,
            nu: None,
            warnings: Vec::new(),
            wall_seconds: start.elapsed().as_secs_f64(),
        });
    };
    let layout = basis.layout();
    if s.iterations == Some(0) {
        let msg = "zero iterations requested; returning zero weights".to_string();
        log::warn!("{msg}");
        return Ok(Trained {
            weights: WeightMatrix::zeros(&layout),
            raw: None,
            trace: SolverTrace::default(),
            iterations_run: 0,
            nu: None,
            warnings: vec![msg],
            wall_seconds: start.elapsed().as_secs_f64(),
        });
    }
    let spec = ObjectiveSpec::new(formulation, sigma, basis.clone(), inst.clone(), m.inner_samples, s.radius)?;
    let part = partition(s.partition, inst.horizon());
    let n = part.len();
    let tau = s.tau.unwrap_or(n);
    if tau > n {
        return Err(CliError::field("solver.tau", format!("must not exceed the block count {n}")));
    }
    let nu = curvature_weights(cfg, &spec, n, tau)?;
    let mut sc = SolverConfig::new(s.iterations.unwrap_or(usize::MAX), part, tau, nu.clone(), s.seed);
    sc.radius = s.radius;
    sc.cadence = s.cadence;
    sc.trace_samples = s.trace_samples;
    sc.keep_snapshots = keep_snapshots;
    sc.time_budget = s.budget_seconds.map(Duration::from_secs_f64);
    let out = match formulation {
        Formulation::Wtca => run(&WtcaOracle { spec }, &sc)?,
        Formulation::Po => run(&PoOracle { spec }, &sc)?,
    };
    let (weights, raw) = match formulation {
        Formulation::Wtca => (out.averaged, None),
        Formulation::Po => (po_post_regression(&out.averaged, inst, basis, m.regression_paths, m.inner_samples, s.seed)?, Some(out.averaged)),
    };
    Ok(Trained {
        weights,
        raw,
        trace: out.trace,
        iterations_run: out.iterations_run,
        nu: Some(nu),
        warnings: out.warnings,
        wall_seconds: start.elapsed().as_secs_f64(),
    })
}

/// One point of a hyperparameter sweep.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct GridResult {
    pub sigma: f64,
    pub rho: f64,
    pub lambda: f64,
    pub iterations_run: usize,
    pub validation_upper_bound: f64,
    pub validation_std_error: f64,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct TrainSummary {
    pub method: Method,
    pub instance: String,
    pub iterations_run: usize,
    pub wall_seconds: f64,
    pub warnings: Vec<String>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub grid: Vec<GridResult>,
    /// Configuration that reproduces the weights exactly: the iteration count
    /// replaces any time budget and the chosen grid point replaces the grid.
    pub reproduce: RunConfig,
}

/// Trains with the configured grid, if any, and returns the selected problem,
/// weights and the configuration that reproduces them.
pub fn train_selected(cfg: &RunConfig) -> CliResult<(Problem, Trained, RunConfig, Vec<GridResult>)> {
    let base = cfg.problem()?;
    let Some(grid) = cfg.grid.as_ref() else {
        let trained = train(cfg, &base, cfg.method.sigma, false)?;
        let repro = reproduce(cfg, &trained);
        return Ok((base, trained, repro, Vec::new()));
    };
    let points = grid.points(&cfg.method);
    let count = points.len() as f64;
    let share = |v: f64| v / count;
    let mut best: Option<(f64, Problem, Trained, RunConfig)> = None;
    let mut results = Vec::new();
    for (sigma, rho, lambda) in points {
        let mut c = cfg.clone();
        c.grid = None;
        c.method.sigma = sigma;
        c.method.rho = rho;
        c.method.lambda = lambda;
        c.solver.budget_seconds = c.solver.budget_seconds.map(share);
        let basis = build_basis(&c.instance, &base.instance, &c.method, rho, lambda)?;
        let problem = Problem { instance: base.instance.clone(), basis: Arc::new(basis) };
        let trained = train(&c, &problem, sigma, false)?;
        let ub = upper_bound(
            &trained.weights,
            &problem.instance,
            &problem.basis,
            grid.validation_paths,
            cfg.evaluation.inner_samples,
            grid.validation_seed,
        )?;
        log::info!("grid point sigma={sigma} rho={rho} lambda={lambda}: validation UB {:.6} ({:.6})", ub.mean, ub.std_error);
        results.push(GridResult {
            sigma,
            rho,
            lambda,
            iterations_run: trained.iterations_run,
            validation_upper_bound: ub.mean,
            validation_std_error: ub.std_error,
        });
        if best.as_ref().is_none_or(|b| ub.mean < b.0) {
            let repro = reproduce(&c, &trained);
            best = Some((ub.mean, problem, trained, repro));
        }
    }
    let (_, problem, trained, repro) = best.expect("grid has at least one point");
    Ok((problem, trained, repro, results))
}

fn reproduce(cfg: &RunConfig, trained: &Trained) -> RunConfig {
    let mut c = cfg.clone();
    c.grid = None;
    if c.method.name != Method::Lsm {
        c.solver.iterations = Some(trained.iterations_run);
        c.solver.budget_seconds = None;
    }
    c
}

pub fn weights_file(cfg: &RunConfig, problem: &Problem, trained: &Trained) -> WeightsFile {
    WeightsFile::new(cfg, problem.instance.name(), (*problem.basis).clone(), trained)
}

/// `train`: writes `weights.json`, `trace.csv`, `summary.json` and `config.toml`.
pub fn cmd_train(cfg: &RunConfig, out: &Path) -> CliResult<TrainSummary> {
    std::fs::create_dir_all(out)?;
    let (problem, trained, repro, grid) = train_selected(cfg)?;
    for w in &trained.warnings {
        eprintln!("warning: {w}");
    }
    write_json(&out.join("weights.json"), &weights_file(&repro, &problem, &trained))?;
    write_trace(&out.join("trace.csv"), &trained.trace)?;
    let summary = TrainSummary {
        method: cfg.method.name,
        instance: problem.instance.name().to_string(),
        iterations_run: trained.iterations_run,
        wall_seconds: trained.wall_seconds,
        warnings: trained.warnings.clone(),
        grid,
        reproduce: repro.clone(),
    };
    write_json(&out.join("summary.json"), &summary)?;
    std::fs::write(out.join("config.toml"), repro.to_toml()?)?;
    Ok(summary)
}

/// Basis stored alongside weights must match the layout of the weights.
pub fn check_basis(basis: &BasisSet, weights: &Weights) -> CliResult<()> {
    weights.check_layout(&basis.layout()).map_err(CliError::from)
}
