//! Generalized parallel stochastic block coordinate descent.
//!
//! `n = tau = T` stagewise blocks gives the parallel method, `n = tau = 1`
//! plain projected SGD, and `tau < n` samples uniform size-`tau` block subsets.

mod oracles;

use std::time::{Duration, Instant};

use rand::seq::index;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

pub use oracles::{PoOracle, WtcaOracle};

use crate::bases::WeightMatrix;
use crate::error::{invalid, Error, Result};
use crate::scalar::Real;
use crate::seed::{self, Purpose};

/// `alpha_k = 1 / (2 sqrt(k + 1))`.
pub fn step_size<F: Real>(k: usize) -> F {
    F::one() / (F::of(2.0) * F::of((k + 1) as f64).sqrt())
}

/// `theta_k = n^2 alpha_{k-1} - (n^2 - tau^2) alpha_k`.
pub fn averaging_weight<F: Real>(k: usize, n: usize, tau: usize) -> F {
    let n2 = F::of((n * n) as f64);
    let t2 = F::of((tau * tau) as f64);
    n2 * step_size::<F>(k - 1) - (n2 - t2) * step_size::<F>(k)
}

/// Componentwise clamp into `[-R, R]`.
pub fn project_block<F: Real>(slice: &mut [F], radius: F) {
    for v in slice.iter_mut() {
        *v = v.max(-radius).min(radius);
    }
}

/// Uniform subset of `tau` out of `n` blocks, sorted.
pub fn sample_blocks<R: rand::Rng + ?Sized>(rng: &mut R, n: usize, tau: usize) -> Vec<usize> {
    if tau >= n {
        return (0..n).collect();
    }
    let mut s = index::sample(rng, n, tau).into_vec();
    s.sort_unstable();
    s
}

/// Solver blocks as groups of stage blocks.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct BlockPartition {
    groups: Vec<Vec<usize>>,
}

impl BlockPartition {
    pub fn stagewise(horizon: usize) -> Self {
        Self { groups: (0..horizon).map(|t| vec![t]).collect() }
    }

    pub fn single(horizon: usize) -> Self {
        Self { groups: vec![(0..horizon).collect()] }
    }

    pub fn custom(groups: Vec<Vec<usize>>, horizon: usize) -> Result<Self> {
        let mut seen = vec![false; horizon];
        for g in &groups {
            for &t in g {
                if t >= horizon || seen[t] {
                    return Err(invalid("partition groups must cover each stage block exactly once"));
                }
                seen[t] = true;
            }
        }
        if seen.iter().any(|s| !s) {
            return Err(invalid("partition groups must cover each stage block exactly once"));
        }
        Ok(Self { groups })
    }

    pub fn len(&self) -> usize {
        self.groups.len()
    }

    pub fn is_empty(&self) -> bool {
        self.groups.is_empty()
    }

    pub fn group(&self, i: usize) -> &[usize] {
        &self.groups[i]
    }
}

/// Stochastic first-order oracle over stage-blocked weights.
pub trait Oracle<F: Real>: Sync {
    fn layout(&self) -> Vec<usize>;

    /// Adds the stochastic gradient of the stage blocks in `blocks` at `beta`,
    /// for the sample keyed by `sample_seed`, into `out`. Returns the sampled
    /// objective when it was computed as a by-product.
    fn gradient(&self, beta: &WeightMatrix<F>, blocks: &[usize], sample_seed: u64, out: &mut WeightMatrix<F>)
        -> Result<Option<F>>;

    /// Sampled objective value for the sample keyed by `sample_seed`.
    fn objective(&self, beta: &WeightMatrix<F>, sample_seed: u64) -> Result<F>;
}

#[derive(Clone, Debug)]
pub struct SolverConfig<F> {
    pub iterations: usize,
    pub partition: BlockPartition,
    pub tau: usize,
    pub nu: Vec<F>,
    pub radius: F,
    pub seed: u64,
    /// Trace every `cadence` iterations; zero disables the trace.
    pub cadence: usize,
    pub trace_samples: usize,
    pub keep_snapshots: bool,
    pub time_budget: Option<Duration>,
    pub initial: Option<WeightMatrix<F>>,
}

impl<F: Real> SolverConfig<F> {
    pub fn new(iterations: usize, partition: BlockPartition, tau: usize, nu: Vec<F>, seed: u64) -> Self {
        Self {
            iterations,
            partition,
            tau,
            nu,
            radius: F::of(crate::formulations::DEFAULT_RADIUS),
            seed,
            cadence: 0,
            trace_samples: 64,
            keep_snapshots: false,
            time_budget: None,
            initial: None,
        }
    }

    pub fn validate(&self) -> Result<()> {
        let n = self.partition.len();
        if self.iterations < 2 {
            return Err(invalid(format!("iteration limit must be at least 2, got {}", self.iterations)));
        }
        if n == 0 || self.tau == 0 || self.tau > n {
            return Err(invalid(format!("need 1 <= tau <= n, got tau = {} and n = {n}", self.tau)));
        }
        if self.nu.len() != n {
            return Err(Error::DimensionMismatch { context: "curvature weights".into(), expected: n, got: self.nu.len() });
        }
        if self.nu.iter().any(|v| !(*v > F::zero()) || !v.is_finite()) {
            return Err(invalid("curvature weights must be positive and finite"));
        }
        if !(self.radius > F::zero()) {
            return Err(invalid("box radius must be positive"));
        }
        Ok(())
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TraceRow<F> {
    pub k: usize,
    pub objective_estimate: F,
    pub grad_norm: F,
    pub wall_ms: f64,
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct SolverTrace<F> {
    pub rows: Vec<TraceRow<F>>,
    /// Averaged iterates at the traced iterations, when requested.
    pub snapshots: Vec<(usize, WeightMatrix<F>)>,
}

#[derive(Clone, Debug)]
pub struct SolverOutput<F> {
    pub averaged: WeightMatrix<F>,
    pub last: WeightMatrix<F>,
    pub trace: SolverTrace<F>,
    /// Index `K` of the final iterate actually produced.
    pub iterations_run: usize,
    pub warnings: Vec<String>,
}

fn mini_batch_objective<F: Real, O: Oracle<F>>(oracle: &O, beta: &WeightMatrix<F>, master: u64, k: usize, samples: usize) -> Result<F> {
    let vals: Vec<Result<F>> = (0..samples)
        .into_par_iter()
        .map(|j| oracle.objective(beta, seed::derive(master, Purpose::Trace, &[k as u64, j as u64])))
        .collect();
    let mut s = F::zero();
    for v in vals {
        s = s + v?;
    }
    Ok(s / F::of(samples.max(1) as f64))
}

/// Runs the method from `beta^1` (zero unless given) for `K - 1` updates and
/// returns the `theta`-weighted average of `beta^2, ..., beta^K`.
pub fn run<F: Real, O: Oracle<F>>(oracle: &O, config: &SolverConfig<F>) -> Result<SolverOutput<F>> {
    config.validate()?;
    let layout = oracle.layout();
    let n = config.partition.len();
    let stage_count = layout.len();
    if config.partition.groups.iter().flatten().any(|&t| t >= stage_count) {
        return Err(invalid("partition refers to a stage block the oracle does not have"));
    }
    let mut beta = match &config.initial {
        Some(b) => {
            b.check_layout(&layout)?;
            b.clone()
        }
        None => WeightMatrix::zeros(&layout),
    };
    for t in 0..stage_count {
        project_block(beta.block_mut(t), config.radius);
    }
    let mut acc = WeightMatrix::zeros(&layout);
    let mut wsum = F::zero();
    let mut grad = WeightMatrix::zeros(&layout);
    let mut trace = SolverTrace { rows: Vec::new(), snapshots: Vec::new() };
    let start = Instant::now();
    let mut k_last = 1;

    for k in 1..config.iterations {
        let selected = if config.tau == n {
            (0..n).collect::<Vec<_>>()
        } else {
            sample_blocks(&mut seed::stream(config.seed, Purpose::Blocks, &[k as u64]), n, config.tau)
        };
        let mut stage_blocks: Vec<usize> = selected.iter().flat_map(|&i| config.partition.group(i).iter().copied()).collect();
        stage_blocks.sort_unstable();
        grad.fill(F::zero());
        let sample_seed = seed::derive(config.seed, Purpose::Path, &[k as u64]);
        oracle
            .gradient(&beta, &stage_blocks, sample_seed, &mut grad)
            .map_err(|e| Error::Oracle { iteration: k, detail: e.to_string() })?;
        if !grad.all_finite() {
            return Err(Error::NonFinite { iteration: k, detail: "stochastic gradient".into() });
        }
        let alpha = step_size::<F>(k);
        for &i in &selected {
            let step = alpha / config.nu[i];
            for &t in config.partition.group(i) {
                let g = grad.block(t).to_vec();
                let b = beta.block_mut(t);
                for (bv, gv) in b.iter_mut().zip(&g) {
                    *bv = *bv - step * *gv;
                }
                project_block(b, config.radius);
            }
        }
        // beta now holds beta^{k+1}
        let theta = averaging_weight::<F>(k + 1, n, config.tau);
        acc.axpy(theta, &beta);
        wsum = wsum + theta;
        k_last = k + 1;

        // a budget stop traces the final iterate, so a rerun with `K = iterations_run` matches
        let out_of_time = config.time_budget.is_some_and(|b| start.elapsed() >= b);
        let traced = config.cadence > 0 && (k_last % config.cadence == 0 || k_last == config.iterations || out_of_time);
        if traced {
            let mut avg = acc.clone();
            avg.scale(F::one() / wsum);
            let obj = mini_batch_objective(oracle, &avg, config.seed, k_last, config.trace_samples)?;
            trace.rows.push(TraceRow {
                k: k_last,
                objective_estimate: obj,
                grad_norm: grad.norm(),
                wall_ms: start.elapsed().as_secs_f64() * 1e3,
            });
            if config.keep_snapshots {
                trace.snapshots.push((k_last, avg));
            }
        }
        if out_of_time {
            break;
        }
    }

    let mut averaged = acc;
    averaged.scale(F::one() / wsum);
    let mut warnings = Vec::new();
    let limit = F::of(0.9) * config.radius;
    if averaged.max_abs() > limit || beta.max_abs() > limit {
        let msg = "a weight exceeds 0.9 of the box radius; the box may be cutting off the optimum".to_string();
        log::warn!("{msg}");
        warnings.push(msg);
    }
    Ok(SolverOutput { averaged, last: beta, trace, iterations_run: k_last, warnings })
}

/// Estimate of `E ||G - E G||^2` in the `nu`-weighted dual norm at `beta`.
pub fn variance_diagnostic<F: Real, O: Oracle<F>>(
    oracle: &O,
    beta: &WeightMatrix<F>,
    partition: &BlockPartition,
    nu: &[F],
    samples: usize,
    seed: u64,
) -> Result<F> {
    let layout = oracle.layout();
    let all: Vec<usize> = (0..layout.len()).collect();
    let grads: Vec<Result<WeightMatrix<F>>> = (0..samples)
        .into_par_iter()
        .map(|j| {
            let mut g = WeightMatrix::zeros(&layout);
            oracle.gradient(beta, &all, seed::derive(seed, Purpose::Path, &[j as u64]), &mut g)?;
            Ok(g)
        })
        .collect();
    let grads: Vec<WeightMatrix<F>> = grads.into_iter().collect::<Result<_>>()?;
    let mut mean = WeightMatrix::zeros(&layout);
    let inv = F::one() / F::of(samples as f64);
    for g in &grads {
        mean.axpy(inv, g);
    }
    let mut total = F::zero();
    for g in &grads {
        for i in 0..partition.len() {
            let mut s = F::zero();
            for &t in partition.group(i) {
                for (a, b) in g.block(t).iter().zip(mean.block(t)) {
                    s = s + (*a - *b) * (*a - *b);
                }
            }
            total = total + s / nu[i];
        }
    }
    Ok(total * inv)
}
