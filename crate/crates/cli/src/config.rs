//! Run configuration read from a TOML file.
//!
//! ```toml
//! [instance]
//! family = "bermudan"      # bermudan | ethanol | fixture | finite
//! assets = 4               # Bermudan fields default to the standard option
//! horizon = 36
//!
//! [method]
//! name = "wtca"            # wtca | po | lsm
//! sigma = 1.0              # smoothing temperature
//! features = 50            # random Fourier features (or tabulated features on finite instances)
//! rho = 1e-3               # Fourier bandwidth
//! lambda = 1.0             # price scale of the features
//! basis_seed = 7
//! inner_samples = 100      # training draws of the next exogenous state
//! regression_paths = 10000 # paths for LSM and the PO post-regression
//!
//! [solver]
//! iterations = 100000      # or budget_seconds = 60.0
//! partition = "stagewise"  # stagewise (n = T) | single (n = 1)
//! tau = 36                 # blocks updated per iteration, defaults to n
//! radius = 1e4
//! seed = 11
//! cadence = 0              # trace every `cadence` iterations, 0 = off
//! curvature = "estimated"  # estimated | closed_form
//! curvature_scale = 1e-4
//!
//! [evaluation]
//! paths = 100000
//! inner_samples = 500
//! seed = 5
//! ```

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use wtca::benches::{
    bermudan_basis, build_bermudan, build_ethanol, ethanol_basis, indicator_basis, make_finite_fixture, random_tabulated_basis,
    synthetic_ethanol_data, BermudanParams, EthanolManifest, EthanolParams, FixtureSpec, SyntheticCurves,
};
use wtca::mdp::FiniteMdpDoc;
use wtca::{BasisSet, MdpInstance};

use crate::error::{CliError, CliResult};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    pub instance: InstanceConfig,
    pub method: MethodConfig,
    #[serde(default)]
    pub solver: SolverSection,
    #[serde(default)]
    pub evaluation: EvaluationConfig,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub grid: Option<GridConfig>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "family", rename_all = "snake_case")]
pub enum InstanceConfig {
    Bermudan(BermudanParams),
    Ethanol(EthanolInstance),
    /// A built-in finite fixture, e.g. `kind = "stopping_chain"`.
    Fixture(FixtureSpec),
    /// A finite instance document in JSON.
    Finite { path: PathBuf },
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct EthanolInstance {
    pub horizon: usize,
    /// Annualized rate; the monthly discount is `exp(-rate / 12)`.
    #[serde(default = "default_rate")]
    pub rate: f64,
    /// Manifest naming curve and loading CSV files. Synthetic data when absent.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub manifest: Option<PathBuf>,
    #[serde(default)]
    pub synthetic: SyntheticCurves,
}

fn default_rate() -> f64 {
    0.03
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Method {
    Wtca,
    Po,
    Lsm,
}

impl Method {
    pub fn as_str(self) -> &'static str {
        match self {
            Self::Wtca => "wtca",
            Self::Po => "po",
            Self::Lsm => "lsm",
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MethodConfig {
    pub name: Method,
    #[serde(default = "one")]
    pub sigma: f64,
    /// Random Fourier features on the option and production instances; on
    /// finite instances `0` selects indicator features and a positive count
    /// random tabulated features.
    #[serde(default)]
    pub features: usize,
    #[serde(default = "default_rho")]
    pub rho: f64,
    #[serde(default = "one")]
    pub lambda: f64,
    #[serde(default)]
    pub basis_seed: u64,
    #[serde(default = "default_inner")]
    pub inner_samples: usize,
    #[serde(default = "default_regression_paths")]
    pub regression_paths: usize,
}

fn one() -> f64 {
    1.0
}

fn default_rho() -> f64 {
    1e-3
}

fn default_inner() -> usize {
    wtca::formulations::DEFAULT_INNER_SAMPLES
}

fn default_regression_paths() -> usize {
    10_000
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PartitionKind {
    Stagewise,
    Single,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CurvatureKind {
    /// Monte Carlo block Lipschitz constants of the WTCA components.
    Estimated,
    /// The conservative closed-form weights.
    ClosedForm,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SolverSection {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub iterations: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub budget_seconds: Option<f64>,
    #[serde(default = "default_partition")]
    pub partition: PartitionKind,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub tau: Option<usize>,
    #[serde(default = "default_radius")]
    pub radius: f64,
    #[serde(default)]
    pub seed: u64,
    #[serde(default)]
    pub cadence: usize,
    #[serde(default = "default_trace_samples")]
    pub trace_samples: usize,
    #[serde(default = "default_curvature")]
    pub curvature: CurvatureKind,
    #[serde(default = "one")]
    pub curvature_scale: f64,
    #[serde(default = "default_curvature_samples")]
    pub curvature_samples: usize,
    /// Explicit curvature weights, one per solver block; overrides `curvature`.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub nu: Option<Vec<f64>>,
}

fn default_partition() -> PartitionKind {
    PartitionKind::Stagewise
}

fn default_radius() -> f64 {
    wtca::formulations::DEFAULT_RADIUS
}

fn default_trace_samples() -> usize {
    64
}

fn default_curvature() -> CurvatureKind {
    CurvatureKind::Estimated
}

fn default_curvature_samples() -> usize {
    200
}

impl Default for SolverSection {
    fn default() -> Self {
        Self {
            iterations: None,
            budget_seconds: None,
            partition: default_partition(),
            tau: None,
            radius: default_radius(),
            seed: 0,
            cadence: 0,
            trace_samples: default_trace_samples(),
            curvature: default_curvature(),
            curvature_scale: 1.0,
            curvature_samples: default_curvature_samples(),
            nu: None,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct EvaluationConfig {
    #[serde(default = "default_paths")]
    pub paths: usize,
    #[serde(default = "default_eval_inner")]
    pub inner_samples: usize,
    #[serde(default = "default_eval_seed")]
    pub seed: u64,
}

fn default_paths() -> usize {
    100_000
}

fn default_eval_inner() -> usize {
    500
}

fn default_eval_seed() -> u64 {
    5
}

impl Default for EvaluationConfig {
    fn default() -> Self {
        Self { paths: default_paths(), inner_samples: default_eval_inner(), seed: default_eval_seed() }
    }
}

/// Hyperparameter grid. Every combination is trained on an equal share of the
/// budget and the one with the lowest upper bound on a separate validation
/// path set is kept.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GridConfig {
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub sigma: Vec<f64>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub rho: Vec<f64>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub lambda: Vec<f64>,
    #[serde(default = "default_validation_paths")]
    pub validation_paths: usize,
    #[serde(default = "default_validation_seed")]
    pub validation_seed: u64,
}

fn default_validation_paths() -> usize {
    2_000
}

fn default_validation_seed() -> u64 {
    1_000_003
}

impl GridConfig {
    /// `(sigma, rho, lambda)` combinations, with the method values filling empty axes.
    pub fn points(&self, m: &MethodConfig) -> Vec<(f64, f64, f64)> {
        let axis = |v: &Vec<f64>, d: f64| if v.is_empty() { vec![d] } else { v.clone() };
        let mut out = Vec::new();
        for &s in &axis(&self.sigma, m.sigma) {
            for &r in &axis(&self.rho, m.rho) {
                for &l in &axis(&self.lambda, m.lambda) {
                    out.push((s, r, l));
                }
            }
        }
        out
    }
}

fn positive(path: &str, v: f64) -> CliResult<()> {
    if v > 0.0 && v.is_finite() {
        Ok(())
    } else {
        Err(CliError::field(path, format!("must be positive and finite, got {v}")))
    }
}

fn at_least(path: &str, v: usize, min: usize) -> CliResult<()> {
    if v >= min {
        Ok(())
    } else {
        Err(CliError::field(path, format!("must be at least {min}, got {v}")))
    }
}

impl RunConfig {
    pub fn from_toml(text: &str) -> CliResult<Self> {
        let cfg: Self = toml::from_str(text).map_err(|e| CliError::config(e.to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    /// Reads the file and resolves relative data paths against its directory.
    pub fn load(path: &Path) -> CliResult<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| CliError::config(format!("{}: {e}", path.display())))?;
        let mut cfg = Self::from_toml(&text).map_err(|e| match e {
            CliError::Config(m) => CliError::Config(format!("{}: {m}", path.display())),
            other => other,
        })?;
        // absolute, so that the resolved copy written next to the outputs still works
        let dir = path.parent().filter(|d| !d.as_os_str().is_empty()).unwrap_or(Path::new("."));
        let dir = std::path::absolute(dir)?;
        cfg.resolve_paths(&dir);
        Ok(cfg)
    }

    pub fn resolve_paths(&mut self, dir: &Path) {
        let fix = |p: &mut PathBuf| {
            if p.is_relative() {
                *p = dir.join(&*p);
            }
        };
        match &mut self.instance {
            InstanceConfig::Ethanol(e) => {
                if let Some(m) = e.manifest.as_mut() {
                    fix(m);
                }
            }
            InstanceConfig::Finite { path } => fix(path),
            _ => {}
        }
    }

    pub fn to_toml(&self) -> CliResult<String> {
        toml::to_string_pretty(self).map_err(|e| CliError::config(e.to_string()))
    }

    pub fn is_finite_instance(&self) -> bool {
        matches!(self.instance, InstanceConfig::Fixture(_) | InstanceConfig::Finite { .. })
    }

    pub fn validate(&self) -> CliResult<()> {
        let m = &self.method;
        positive("method.sigma", m.sigma)?;
        positive("method.rho", m.rho)?;
        positive("method.lambda", m.lambda)?;
        at_least("method.inner_samples", m.inner_samples, 1)?;
        at_least("method.regression_paths", m.regression_paths, 2)?;
        if !self.is_finite_instance() {
            at_least("method.features", m.features, 1)?;
        }
        let s = &self.solver;
        if m.name != Method::Lsm {
            match (s.iterations, s.budget_seconds) {
                (None, None) => return Err(CliError::field("solver", "set iterations or budget_seconds")),
                (Some(1), _) => return Err(CliError::field("solver.iterations", "must be 0 or at least 2, got 1")),
                (_, Some(b)) => positive("solver.budget_seconds", b)?,
                _ => {}
            }
        }
        positive("solver.radius", s.radius)?;
        positive("solver.curvature_scale", s.curvature_scale)?;
        at_least("solver.curvature_samples", s.curvature_samples, 1)?;
        if s.cadence > 0 {
            at_least("solver.trace_samples", s.trace_samples, 1)?;
        }
        if let Some(t) = s.tau {
            at_least("solver.tau", t, 1)?;
            if s.partition == PartitionKind::Single && t != 1 {
                return Err(CliError::field("solver.tau", "must be 1 with a single block"));
            }
        }
        if let Some(nu) = &s.nu {
            for (i, v) in nu.iter().enumerate() {
                positive(&format!("solver.nu[{i}]"), *v)?;
            }
        }
        let e = &self.evaluation;
        at_least("evaluation.paths", e.paths, 2)?;
        at_least("evaluation.inner_samples", e.inner_samples, 1)?;
        if let Some(g) = &self.grid {
            for (name, v) in [("sigma", &g.sigma), ("rho", &g.rho), ("lambda", &g.lambda)] {
                for (i, x) in v.iter().enumerate() {
                    positive(&format!("grid.{name}[{i}]"), *x)?;
                }
            }
            at_least("grid.validation_paths", g.validation_paths, 2)?;
            if g.validation_seed == e.seed {
                return Err(CliError::field("grid.validation_seed", "must differ from evaluation.seed"));
            }
        }
        if let InstanceConfig::Ethanol(eth) = &self.instance {
            at_least("instance.horizon", eth.horizon, 1)?;
            positive("instance.rate", eth.rate)?;
        }
        Ok(())
    }
}

/// An instance together with the feature set of a method.
#[derive(Clone)]
pub struct Problem {
    pub instance: std::sync::Arc<MdpInstance>,
    pub basis: std::sync::Arc<BasisSet>,
}

/// Builds the instance described by `cfg`.
pub fn build_instance(cfg: &InstanceConfig) -> CliResult<MdpInstance> {
    Ok(match cfg {
        InstanceConfig::Bermudan(p) => build_bermudan(p)?,
        InstanceConfig::Ethanol(e) => build_ethanol(&ethanol_params(e)?)?,
        InstanceConfig::Fixture(spec) => make_finite_fixture(spec)?,
        InstanceConfig::Finite { path } => {
            let text = std::fs::read_to_string(path).map_err(|e| CliError::field("instance.path", format!("{}: {e}", path.display())))?;
            FiniteMdpDoc::from_json(&text)?.to_instance()?
        }
    })
}

pub fn ethanol_params(e: &EthanolInstance) -> CliResult<EthanolParams> {
    match &e.manifest {
        Some(path) => {
            let (_, mut params) = EthanolManifest::load(path)?;
            if params.horizon != e.horizon {
                params = EthanolParams { costs: params.costs.clone(), ..EthanolParams::new(e.horizon, e.rate, &params.data)? };
            }
            params.rate = e.rate;
            params.validate()?;
            Ok(params)
        }
        None => {
            // longer horizons repeat the second year of a 24-month curve
            let data = if e.horizon > 24 {
                synthetic_ethanol_data(24, &e.synthetic)?.extend(e.horizon)?
            } else {
                synthetic_ethanol_data(e.horizon, &e.synthetic)?
            };
            Ok(EthanolParams::new(e.horizon, e.rate, &data)?)
        }
    }
}

/// Builds the basis of `method` (with `rho`, `lambda` overriding the method's) on `instance`.
pub fn build_basis(cfg: &InstanceConfig, instance: &MdpInstance, method: &MethodConfig, rho: f64, lambda: f64) -> CliResult<BasisSet> {
    Ok(match cfg {
        InstanceConfig::Bermudan(p) => bermudan_basis(p, method.features, rho, lambda, method.basis_seed)?,
        InstanceConfig::Ethanol(e) => ethanol_basis(&ethanol_params(e)?, method.features, rho, lambda, method.basis_seed)?,
        InstanceConfig::Fixture(_) | InstanceConfig::Finite { .. } => {
            if method.features == 0 {
                indicator_basis(instance)?
            } else {
                random_tabulated_basis(instance, method.features, method.basis_seed)?
            }
        }
    })
}

impl RunConfig {
    pub fn problem(&self) -> CliResult<Problem> {
        let instance = build_instance(&self.instance)?;
        let basis = build_basis(&self.instance, &instance, &self.method, self.method.rho, self.method.lambda)?;
        Ok(Problem { instance: std::sync::Arc::new(instance), basis: std::sync::Arc::new(basis) })
    }
}
