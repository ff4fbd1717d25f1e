//! Benchmark suites: every method on every instance with equal training budgets.

use std::fmt;
use std::path::Path;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use wtca::benches::{BermudanParams, FixtureSpec, SyntheticCurves};
use wtca::bounds::po_post_regression;

use crate::bound::{evaluate, exact_row};
use crate::config::{
    CurvatureKind, EthanolInstance, EvaluationConfig, InstanceConfig, Method, MethodConfig, PartitionKind, Problem, RunConfig,
    SolverSection,
};
use crate::error::{CliError, CliResult};
use crate::output::{fill_gaps, write_bounds, write_json, BoundRow};
use crate::train::{train, weights_file};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum Suite {
    #[serde(rename = "bermudan-T36")]
    BermudanT36,
    #[serde(rename = "bermudan-T100")]
    BermudanT100,
    #[serde(rename = "ethanol-T24")]
    EthanolT24,
    #[serde(rename = "ethanol-T36")]
    EthanolT36,
    #[serde(rename = "fixtures")]
    Fixtures,
}

impl Suite {
    pub const ALL: [Suite; 5] = [Self::BermudanT36, Self::BermudanT100, Self::EthanolT24, Self::EthanolT36, Self::Fixtures];

    pub fn name(self) -> &'static str {
        match self {
            Self::BermudanT36 => "bermudan-T36",
            Self::BermudanT100 => "bermudan-T100",
            Self::EthanolT24 => "ethanol-T24",
            Self::EthanolT36 => "ethanol-T36",
            Self::Fixtures => "fixtures",
        }
    }

    /// Training budget per method and instance when none is given.
    pub fn default_budget(self) -> f64 {
        match self {
            Self::Fixtures => 2.0,
            _ => 60.0,
        }
    }
}

impl fmt::Display for Suite {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Suite {
    type Err = CliError;

    fn from_str(s: &str) -> CliResult<Self> {
        Self::ALL
            .into_iter()
            .find(|x| x.name() == s)
            .ok_or_else(|| CliError::config(format!("unknown suite '{s}', expected one of {}", Self::ALL.map(Suite::name).join(", "))))
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct BenchOptions {
    /// Training seconds per method and instance.
    pub budget_seconds: Option<f64>,
    pub paths: usize,
    pub inner_samples: usize,
    /// Keep only instances whose label contains one of these strings.
    pub instances: Vec<String>,
    /// Evaluate the bounds every `cadence` iterations; zero disables the convergence file.
    pub cadence: usize,
    /// Paths per bound in the convergence file.
    pub convergence_paths: usize,
    pub seed: u64,
}

impl Default for BenchOptions {
    fn default() -> Self {
        Self { budget_seconds: None, paths: 100_000, inner_samples: 500, instances: Vec::new(), cadence: 0, convergence_paths: 2_000, seed: 5 }
    }
}

/// One instance of a suite with the configuration of each method.
#[derive(Clone, Debug)]
pub struct BenchCase {
    pub label: String,
    pub runs: Vec<RunConfig>,
}

struct Tuning {
    features: usize,
    sigma: f64,
    rho: f64,
    lambda: f64,
    curvature_scale: f64,
    regression_paths: usize,
}

fn runs(instance: InstanceConfig, tuning: &Tuning, budget: f64, cadence: usize, eval: &EvaluationConfig) -> Vec<RunConfig> {
    [Method::Lsm, Method::Po, Method::Wtca]
        .into_iter()
        .map(|name| {
            let (partition, tau) = match name {
                Method::Po => (PartitionKind::Single, Some(1)),
                _ => (PartitionKind::Stagewise, None),
            };
            RunConfig {
                instance: instance.clone(),
                method: MethodConfig {
                    name,
                    sigma: tuning.sigma,
                    features: tuning.features,
                    rho: tuning.rho,
                    lambda: tuning.lambda,
                    basis_seed: 7,
                    inner_samples: 100,
                    regression_paths: tuning.regression_paths,
                },
                solver: SolverSection {
                    budget_seconds: Some(budget),
                    partition,
                    tau,
                    seed: 11,
                    cadence,
                    trace_samples: 32,
                    curvature: CurvatureKind::Estimated,
                    curvature_scale: tuning.curvature_scale,
                    ..SolverSection::default()
                },
                evaluation: eval.clone(),
                grid: None,
            }
        })
        .collect()
}

/// Instances and method configurations of `suite`.
pub fn cases(suite: Suite, opts: &BenchOptions) -> Vec<BenchCase> {
    let budget = opts.budget_seconds.unwrap_or(suite.default_budget());
    let eval = EvaluationConfig { paths: opts.paths, inner_samples: opts.inner_samples, seed: opts.seed };
    let mut out = Vec::new();
    let mut push = |label: String, instance: InstanceConfig, tuning: &Tuning| {
        out.push(BenchCase { label, runs: runs(instance, tuning, budget, opts.cadence, &eval) });
    };
    match suite {
        Suite::BermudanT36 | Suite::BermudanT100 => {
            let horizon = if suite == Suite::BermudanT36 { 36 } else { 100 };
            let tuning = Tuning { features: 50, sigma: 1.0, rho: 1e-3, lambda: 1.0, curvature_scale: 1e-4, regression_paths: 50_000 };
            for assets in [4, 8, 16] {
                for initial in [90.0, 100.0, 110.0] {
                    let p = BermudanParams { assets, initial, horizon, ..Default::default() };
                    push(format!("bermudan-N{assets}-T{horizon}-w{initial}"), InstanceConfig::Bermudan(p), &tuning);
                }
            }
        }
        Suite::EthanolT24 | Suite::EthanolT36 => {
            let horizon = if suite == Suite::EthanolT24 { 24 } else { 36 };
            let tuning = Tuning { features: 50, sigma: 0.1, rho: 1e-2, lambda: 1.0, curvature_scale: 1e-4, regression_paths: 10_000 };
            for start_month in [0, 3, 6, 9] {
                let e = EthanolInstance {
                    horizon,
                    rate: 0.03,
                    manifest: None,
                    synthetic: SyntheticCurves { start_month, ..Default::default() },
                };
                push(format!("ethanol-T{horizon}-m{start_month}"), InstanceConfig::Ethanol(e), &tuning);
            }
        }
        Suite::Fixtures => {
            let tuning = Tuning { features: 0, sigma: 0.01, rho: 1.0, lambda: 1.0, curvature_scale: 1.0, regression_paths: 10_000 };
            let specs = [
                ("two-stage", FixtureSpec::TwoStageStopping),
                ("stopping-chain", FixtureSpec::stopping_chain()),
                ("switching", FixtureSpec::Switching { horizon: 5, atoms: 3, gamma: 0.95, seed: 1 }),
                ("random-1", FixtureSpec::Random { horizon: 4, max_states: 3, max_actions: 3, max_atoms: 3, gamma: 0.9, seed: 1 }),
                ("random-2", FixtureSpec::Random { horizon: 5, max_states: 4, max_actions: 3, max_atoms: 2, gamma: 0.9, seed: 2 }),
            ];
            for (label, spec) in specs {
                push(label.to_string(), InstanceConfig::Fixture(spec), &tuning);
            }
        }
    }
    if !opts.instances.is_empty() {
        out.retain(|c| opts.instances.iter().any(|f| c.label.contains(f.as_str())));
    }
    out
}

/// One line of `convergence.csv`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ConvergenceRow {
    pub instance: String,
    pub method: String,
    pub iteration: usize,
    pub ub: f64,
    pub ub_se: f64,
    pub lb: f64,
    pub lb_se: f64,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct MethodReport {
    pub method: Method,
    pub iterations_run: usize,
    pub train_seconds: f64,
    pub warnings: Vec<String>,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct CaseReport {
    pub instance: String,
    pub methods: Vec<MethodReport>,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct BenchSummary {
    pub suite: Suite,
    pub options: BenchOptions,
    pub cases: Vec<CaseReport>,
    pub rows: Vec<BoundRow>,
}

fn convergence(
    case: &BenchCase,
    cfg: &RunConfig,
    problem: &Problem,
    trace: &wtca::SolverTrace<f64>,
    opts: &BenchOptions,
) -> CliResult<Vec<ConvergenceRow>> {
    let eval = EvaluationConfig { paths: opts.convergence_paths, inner_samples: opts.inner_samples, seed: opts.seed };
    let mut rows = Vec::new();
    for r in &trace.rows {
        let Some((_, beta)) = trace.snapshots.iter().find(|(k, _)| *k == r.k) else {
            continue;
        };
        let beta = match cfg.method.name {
            Method::Po => po_post_regression(
                beta,
                &problem.instance,
                &problem.basis,
                opts.convergence_paths.max(cfg.method.regression_paths.min(10_000)),
                cfg.method.inner_samples,
                cfg.solver.seed,
            )?,
            _ => beta.clone(),
        };
        let [lb, ub] = evaluate(cfg.method.name.as_str(), &case.label, &beta, &problem.instance, &problem.basis, &eval)?;
        rows.push(ConvergenceRow {
            instance: case.label.clone(),
            method: cfg.method.name.as_str().to_string(),
            iteration: r.k,
            ub: ub.mean,
            ub_se: ub.se,
            lb: lb.mean,
            lb_se: lb.se,
        });
    }
    Ok(rows)
}

/// `bench`: trains and evaluates every method on every instance of `suite`,
/// writing `bounds.csv`, `convergence.csv`, `summary.json` and the weights
/// under `<out>/<suite>/`.
pub fn cmd_bench(suite: Suite, opts: &BenchOptions, out: &Path) -> CliResult<BenchSummary> {
    let cases = cases(suite, opts);
    if cases.is_empty() {
        return Err(CliError::config(format!("no instance of {suite} matches {:?}", opts.instances)));
    }
    let dir = out.join(suite.name());
    std::fs::create_dir_all(dir.join("weights"))?;
    let mut rows = Vec::new();
    let mut conv = Vec::new();
    let mut reports = Vec::new();
    for case in &cases {
        log::info!("{suite}: {}", case.label);
        let mut methods = Vec::new();
        let mut problem_for_exact = None;
        for cfg in &case.runs {
            cfg.validate()?;
            let problem = cfg.problem()?;
            let trained = train(cfg, &problem, cfg.method.sigma, opts.cadence > 0)?;
            log::info!("  {} trained: {} iterations in {:.1}s", cfg.method.name.as_str(), trained.iterations_run, trained.wall_seconds);
            let file = weights_file(cfg, &problem, &trained);
            write_json(&dir.join("weights").join(format!("{}-{}.json", case.label, cfg.method.name.as_str())), &file)?;
            rows.extend(evaluate(cfg.method.name.as_str(), &case.label, &trained.weights, &problem.instance, &problem.basis, &cfg.evaluation)?);
            if opts.cadence > 0 {
                conv.extend(convergence(case, cfg, &problem, &trained.trace, opts)?);
            }
            methods.push(MethodReport {
                method: cfg.method.name,
                iterations_run: trained.iterations_run,
                train_seconds: trained.wall_seconds,
                warnings: trained.warnings.clone(),
            });
            problem_for_exact.get_or_insert(problem);
        }
        if let Some(p) = problem_for_exact {
            rows.extend(exact_row(&case.label, &p.instance)?);
        }
        reports.push(CaseReport { instance: case.label.clone(), methods });
    }
    fill_gaps(&mut rows);
    write_bounds(&dir.join("bounds.csv"), &rows)?;
    let mut w = csv::Writer::from_path(dir.join("convergence.csv"))?;
    w.write_record(["instance", "method", "iteration", "ub", "ub_se", "lb", "lb_se"])?;
    for r in &conv {
        w.serialize((&r.instance, &r.method, r.iteration, r.ub, r.ub_se, r.lb, r.lb_se))?;
    }
    w.flush()?;
    let summary = BenchSummary { suite, options: opts.clone(), cases: reports, rows };
    write_json(&dir.join("summary.json"), &summary)?;
    Ok(summary)
}
