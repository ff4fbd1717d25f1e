//! Greedy-policy lower bounds, dual upper bounds, the least squares Monte
//! Carlo fitter and the post-regression of pathwise weights.

pub mod regression;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::bases::{vfa_fast, BasisSet, WeightMatrix};
use crate::error::{invalid, Error, Result};
use crate::formulations::{po_hard_value, po_hard_values, po_tables};
use crate::mdp::{ExoPoint, ExogenousPath, MdpInstance};
use crate::seed::{self, Purpose, Stream, StreamFamily};
use regression::least_squares;

/// Monte Carlo mean, standard error (`std / sqrt(P)`) and path count.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct BoundEstimate {
    pub mean: f64,
    pub std_error: f64,
    pub paths: usize,
}

/// Pairwise summation, stable under reordering of work across threads.
pub fn pairwise_sum(v: &[f64]) -> f64 {
    if v.len() <= 8 {
        return v.iter().sum();
    }
    let mid = v.len() / 2;
    pairwise_sum(&v[..mid]) + pairwise_sum(&v[mid..])
}

impl BoundEstimate {
    pub fn from_samples(values: &[f64]) -> Result<Self> {
        let p = values.len();
        if p < 2 {
            return Err(invalid("a bound estimate needs at least two paths"));
        }
        let mean = pairwise_sum(values) / p as f64;
        let dev: Vec<f64> = values.iter().map(|v| (v - mean) * (v - mean)).collect();
        let var = pairwise_sum(&dev) / (p - 1) as f64;
        Ok(Self { mean, std_error: (var / p as f64).sqrt(), paths: p })
    }

    /// Per-path sample variance.
    pub fn sample_variance(&self) -> f64 {
        self.std_error * self.std_error * self.paths as f64
    }
}

/// Weights, inner-sample count and seed of a greedy policy.
#[derive(Clone, Debug, PartialEq)]
pub struct PolicySpec {
    pub weights: WeightMatrix<f64>,
    pub inner_samples: usize,
    pub seed: u64,
}

impl PolicySpec {
    pub fn new(weights: WeightMatrix<f64>, inner_samples: usize, seed: u64) -> Result<Self> {
        if inner_samples == 0 {
            return Err(invalid("policy needs at least one inner sample"));
        }
        Ok(Self { weights, inner_samples, seed })
    }
}

/// `argmax_a r_t(x, w, a) + gamma E[V_hat_{t+1}(h(x, a), w') | w_t]`, one set of
/// inner draws shared by every candidate; ties go to the first action.
pub fn greedy_action(
    policy: &PolicySpec,
    inst: &MdpInstance,
    basis: &BasisSet,
    t: usize,
    x: usize,
    w_t: &ExoPoint,
    rng: &mut Stream,
) -> Result<usize> {
    let acts = inst.endogenous().feasible(t, x);
    if acts.is_empty() {
        return Err(invalid(format!("no feasible action at stage {t}, state {x}")));
    }
    if acts.len() == 1 {
        return Ok(acts[0]);
    }
    let next = inst.next_states(t, w_t, policy.inner_samples, rng);
    let nx = inst.endogenous().num_states();
    let mut cont: Vec<Option<f64>> = vec![None; nx];
    let mut buf = Vec::new();
    let gamma = inst.gamma();
    let mut best = f64::NEG_INFINITY;
    let mut arg = acts[0];
    for &a in acts {
        let xn = inst.endogenous().successor(x, a);
        let c = *cont[xn].get_or_insert_with(|| {
            next.points
                .iter()
                .zip(&next.weights)
                .map(|(p, q)| q * vfa_fast(basis, &policy.weights, t + 1, xn, p, &mut buf))
                .sum()
        });
        let q = inst.reward(t, x, a, w_t) + gamma * c;
        if q > best {
            best = q;
            arg = a;
        }
    }
    Ok(arg)
}

/// Discounted reward of the greedy policy along one path.
pub fn rollout(policy: &PolicySpec, inst: &MdpInstance, basis: &BasisSet, path: &ExogenousPath, inner: &StreamFamily) -> Result<f64> {
    let mut x = inst.initial_state();
    let mut total = 0.0;
    let mut disc = 1.0;
    for t in 0..inst.horizon() {
        let w = path.at(t);
        let a = greedy_action(policy, inst, basis, t, x, w, &mut inner.at(t))?;
        total += disc * inst.reward(t, x, a, w);
        x = inst.endogenous().successor(x, a);
        disc *= inst.gamma();
    }
    Ok(total)
}

/// Outer evaluation path `i` of `seed`, shared by both bound estimators.
pub fn evaluation_path(inst: &MdpInstance, seed: u64, i: usize) -> ExogenousPath {
    inst.sample_path_with(&mut seed::stream(seed, Purpose::Evaluation, &[i as u64]))
}

fn check_weights(basis: &BasisSet, beta: &WeightMatrix<f64>, inst: &MdpInstance) -> Result<()> {
    basis.check(inst)?;
    beta.check_layout(&basis.layout())
}

/// Mean greedy-policy value over `paths` outer paths.
pub fn lower_bound(policy: &PolicySpec, inst: &MdpInstance, basis: &BasisSet, paths: usize, seed: u64) -> Result<BoundEstimate> {
    check_weights(basis, &policy.weights, inst)?;
    let vals: Vec<Result<f64>> = (0..paths)
        .into_par_iter()
        .map(|i| {
            let path = evaluation_path(inst, seed, i);
            rollout(policy, inst, basis, &path, &StreamFamily::new(policy.seed, Purpose::Policy, &[i as u64]))
        })
        .collect();
    BoundEstimate::from_samples(&vals.into_iter().collect::<Result<Vec<_>>>()?)
}

/// `gamma (V_hat_{t+1}(h(x,a), w_{t+1}) - E_hat[V_hat_{t+1}(h(x,a), .) | w_t])`.
#[allow(clippy::too_many_arguments)]
pub fn dual_penalty(
    beta: &WeightMatrix<f64>,
    inst: &MdpInstance,
    basis: &BasisSet,
    t: usize,
    x: usize,
    a: usize,
    w_t: &ExoPoint,
    w_next: &ExoPoint,
    m: usize,
    rng: &mut Stream,
) -> Result<f64> {
    let xn = inst.endogenous_step(t, x, a)?;
    if t + 1 >= inst.horizon() {
        return Ok(0.0);
    }
    let mut buf = Vec::new();
    let next = inst.next_states(t, w_t, m, rng);
    let mean: f64 = next
        .points
        .iter()
        .zip(&next.weights)
        .map(|(p, q)| q * vfa_fast(basis, beta, t + 1, xn, p, &mut buf))
        .sum();
    Ok(inst.gamma() * (vfa_fast(basis, beta, t + 1, xn, w_next, &mut buf) - mean))
}

/// Mean penalized anticipative value over `paths` outer paths with `m` inner draws.
pub fn upper_bound(
    beta: &WeightMatrix<f64>,
    inst: &MdpInstance,
    basis: &BasisSet,
    paths: usize,
    m: usize,
    seed: u64,
) -> Result<BoundEstimate> {
    check_weights(basis, beta, inst)?;
    if m == 0 {
        return Err(invalid("upper bound needs at least one inner sample"));
    }
    let vals: Vec<Result<f64>> = (0..paths)
        .into_par_iter()
        .map(|i| {
            let path = evaluation_path(inst, seed, i);
            let tables = po_tables(inst, basis, beta, &path, m, &StreamFamily::new(seed, Purpose::Dual, &[i as u64]))?;
            Ok(po_hard_value(&tables))
        })
        .collect();
    BoundEstimate::from_samples(&vals.into_iter().collect::<Result<Vec<_>>>()?)
}

fn regression_paths(inst: &MdpInstance, paths: usize, seed: u64) -> Vec<ExogenousPath> {
    (0..paths)
        .into_par_iter()
        .map(|i| inst.sample_path_with(&mut seed::stream(seed, Purpose::Regression, &[i as u64])))
        .collect()
}

fn check_rows(basis: &BasisSet, paths: usize) -> Result<()> {
    for t in 0..basis.horizon() {
        let required = basis.group_len(t) + 1;
        if paths < required {
            return Err(Error::Regression { stage: t, rows: paths, required });
        }
    }
    Ok(())
}

/// Regresses `targets[k]` on the stage features of `(states[k], path points)`,
/// pooling every state. Rows with all-zero features carry no information and
/// are skipped.
fn fit_stage(basis: &BasisSet, t: usize, samples: &[(usize, &ExoPoint, f64)]) -> Vec<f64> {
    let len = basis.block_len(t);
    let mut rows = Vec::with_capacity(samples.len());
    let mut y = Vec::with_capacity(samples.len());
    let mut buf = vec![0.0; len];
    let mut active = vec![false; len];
    for &(x, w, target) in samples {
        basis.evaluate_into(t, x, w, &mut buf);
        if buf.iter().all(|v| *v == 0.0) {
            continue;
        }
        for (a, v) in active.iter_mut().zip(&buf) {
            *a |= *v != 0.0;
        }
        rows.push(buf.clone());
        y.push(target);
    }
    if rows.is_empty() {
        return vec![0.0; len];
    }
    // Drop columns that are identically zero so the pivoted QR works on the live ones.
    let live: Vec<usize> = (0..len).filter(|&j| active[j]).collect();
    let reduced: Vec<Vec<f64>> = rows.iter().map(|r| live.iter().map(|&j| r[j]).collect()).collect();
    let ls = least_squares(&reduced, &y);
    let mut out = vec![0.0; len];
    for (k, &j) in live.iter().enumerate() {
        out[j] = ls.coefficients[k];
    }
    out
}

/// Least squares Monte Carlo: backward over stages, regress the discounted
/// stage-`(t+1)` approximation on stage-`t` features to get continuation values,
/// then regress the Bellman targets `max_a r + continuation` on the same features.
pub fn lsm_fit(inst: &MdpInstance, basis: &BasisSet, paths: usize, seed: u64) -> Result<WeightMatrix<f64>> {
    basis.check(inst)?;
    check_rows(basis, paths)?;
    let layout = basis.layout();
    let mut beta = WeightMatrix::zeros(&layout);
    let sample = regression_paths(inst, paths, seed);
    let gamma = inst.gamma();
    let nx = inst.endogenous().num_states();
    for t in (0..inst.horizon()).rev() {
        let states = inst.stage_states(t);
        let mut cont: Vec<Option<Vec<f64>>> = vec![None; nx];
        let mut buf = Vec::new();
        for &x in &states {
            for &a in inst.endogenous().feasible(t, x) {
                let xn = inst.endogenous().successor(x, a);
                if cont[xn].is_some() {
                    continue;
                }
                if t + 1 == inst.horizon() {
                    cont[xn] = Some(vec![0.0; paths]);
                    continue;
                }
                let samples: Vec<(usize, &ExoPoint, f64)> = sample
                    .iter()
                    .map(|p| (xn, p.at(t), gamma * vfa_fast(basis, &beta, t + 1, xn, p.at(t + 1), &mut buf)))
                    .collect();
                let coef = fit_stage(basis, t, &samples);
                let mut phi = vec![0.0; layout[t]];
                let fitted = sample
                    .iter()
                    .map(|p| {
                        basis.evaluate_into(t, xn, p.at(t), &mut phi);
                        crate::bases::dot(&coef, &phi)
                    })
                    .collect();
                cont[xn] = Some(fitted);
            }
        }
        let mut samples = Vec::with_capacity(paths * states.len());
        for &x in &states {
            for (i, p) in sample.iter().enumerate() {
                let w = p.at(t);
                let target = inst
                    .endogenous()
                    .feasible(t, x)
                    .iter()
                    .map(|&a| inst.reward(t, x, a, w) + cont[inst.endogenous().successor(x, a)].as_ref().unwrap()[i])
                    .fold(f64::NEG_INFINITY, f64::max);
                samples.push((x, w, target));
            }
        }
        let coef = fit_stage(basis, t, &samples);
        beta.block_mut(t).copy_from_slice(&coef);
    }
    Ok(beta)
}

/// Refits stage weights by regressing, on fresh paths, the hard penalized
/// value-to-go `J_t(x)` induced by `beta_po` onto `phi_t(x, w_t)`.
pub fn po_post_regression(
    beta_po: &WeightMatrix<f64>,
    inst: &MdpInstance,
    basis: &BasisSet,
    paths: usize,
    inner_samples: usize,
    seed: u64,
) -> Result<WeightMatrix<f64>> {
    check_weights(basis, beta_po, inst)?;
    check_rows(basis, paths)?;
    let sample = regression_paths(inst, paths, seed);
    let values: Vec<Result<Vec<Vec<f64>>>> = sample
        .par_iter()
        .enumerate()
        .map(|(i, p)| {
            let tables = po_tables(inst, basis, beta_po, p, inner_samples, &StreamFamily::new(seed, Purpose::Dual, &[i as u64]))?;
            Ok(po_hard_values(&tables))
        })
        .collect();
    let values: Vec<Vec<Vec<f64>>> = values.into_iter().collect::<Result<_>>()?;
    anticipative_regression(inst, basis, &sample, &values)
}

/// Regresses stage values `values[i][t][x]` (time-0 money) along `sample`.
pub fn anticipative_regression(
    inst: &MdpInstance,
    basis: &BasisSet,
    sample: &[ExogenousPath],
    values: &[Vec<Vec<f64>>],
) -> Result<WeightMatrix<f64>> {
    let mut beta = WeightMatrix::zeros(&basis.layout());
    for t in 0..inst.horizon() {
        let undisc = inst.gamma().powi(-(t as i32));
        let mut samples = Vec::new();
        for x in inst.stage_states(t) {
            for (p, v) in sample.iter().zip(values) {
                let j = v[t][x];
                if j.is_finite() {
                    samples.push((x, p.at(t), j * undisc));
                }
            }
        }
        let coef = fit_stage(basis, t, &samples);
        beta.block_mut(t).copy_from_slice(&coef);
    }
    Ok(beta)
}
