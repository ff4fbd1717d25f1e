#![allow(dead_code)]

use std::sync::Arc;

use rand::Rng;
use wtca::bases::{BasisSet, WeightMatrix};
use wtca::benches::{indicator_basis, make_finite_fixture, random_tabulated_basis, BermudanParams, FixtureSpec};
use wtca::bounds::dual_penalty;
use wtca::formulations::{exact_wtca, Formulation, ObjectiveSpec};
use wtca::mdp::{exact_value, ExogenousPath, MdpInstance, DEFAULT_STATE_CAP};
use wtca::seed::{self, Purpose};
use wtca::Weights;

pub fn random_fixture(seed: u64, horizon: usize) -> MdpInstance {
    make_finite_fixture(&FixtureSpec::Random { horizon, max_states: 3, max_actions: 3, max_atoms: 3, gamma: 0.9, seed }).unwrap()
}

pub fn random_weights<R: Rng>(layout: &[usize], scale: f64, rng: &mut R) -> Weights {
    let mut w = Weights::zeros(layout);
    for v in w.as_mut_slice() {
        *v = rng.random_range(-scale..scale);
    }
    w
}

/// A random fixture with a tabulated basis, random weights and a sampled path.
pub struct Case {
    pub inst: Arc<MdpInstance>,
    pub basis: Arc<BasisSet>,
    pub beta: Weights,
    pub path: ExogenousPath,
}

pub fn random_case(seed: u64) -> Case {
    let mut rng = seed::stream(seed, Purpose::Fixture, &[99]);
    let horizon = rng.random_range(1..=6);
    let inst = Arc::new(random_fixture(seed, horizon));
    let features = rng.random_range(1..=4);
    let basis = Arc::new(random_tabulated_basis(&inst, features, seed).unwrap());
    let beta = random_weights(&basis.layout(), 1.0, &mut rng);
    let path = inst.sample_path(seed);
    Case { inst, basis, beta, path }
}

pub fn spec(case: &Case, formulation: Formulation, sigma: f64) -> ObjectiveSpec {
    ObjectiveSpec::new(formulation, sigma, case.basis.clone(), case.inst.clone(), 1, 1e4).unwrap()
}

/// Every feasible action sequence from `x_0` with its per-stage pairs and
/// penalized discounted value `sum_t gamma^t (r_t - penalty_t)`.
pub fn enumerate_sequences(inst: &MdpInstance, basis: &BasisSet, beta: &Weights, path: &ExogenousPath) -> Vec<(Vec<(usize, usize)>, f64)> {
    fn rec(
        inst: &MdpInstance,
        basis: &BasisSet,
        beta: &Weights,
        path: &ExogenousPath,
        t: usize,
        x: usize,
        prefix: &mut Vec<(usize, usize)>,
        value: f64,
        out: &mut Vec<(Vec<(usize, usize)>, f64)>,
    ) {
        if t == inst.horizon() {
            out.push((prefix.clone(), value));
            return;
        }
        let disc = inst.gamma().powi(t as i32);
        for &a in inst.endogenous().feasible(t, x) {
            let w = path.at(t);
            let pen = if t + 1 < inst.horizon() {
                let mut rng = seed::stream(0, Purpose::Dual, &[]);
                dual_penalty(beta, inst, basis, t, x, a, w, path.at(t + 1), 1, &mut rng).unwrap()
            } else {
                0.0
            };
            let v = value + disc * (inst.reward(t, x, a, w) - pen);
            prefix.push((x, a));
            rec(inst, basis, beta, path, t + 1, inst.endogenous().successor(x, a), prefix, v, out);
            prefix.pop();
        }
    }
    let mut out = Vec::new();
    rec(inst, basis, beta, path, 0, inst.initial_state(), &mut Vec::new(), 0.0, &mut out);
    out
}

/// Log-sum-exp at temperature `sigma` computed directly, with the max shift.
pub fn brute_lse(values: &[f64], sigma: f64) -> f64 {
    let m = values.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    m + sigma * values.iter().map(|v| ((v - m) / sigma).exp()).sum::<f64>().ln()
}

/// Weights with `V_hat_t(x, atom) = V*_t(x, atom)` on an indicator basis.
pub fn optimal_indicator_weights(inst: &MdpInstance) -> (BasisSet, Weights, f64) {
    let basis = indicator_basis(inst).unwrap();
    let sol = exact_value(inst, DEFAULT_STATE_CAP).unwrap();
    let mut beta = Weights::zeros(&basis.layout());
    let chain = inst.finite_chain().unwrap();
    for t in 0..inst.horizon() {
        let k = chain.num_atoms(t);
        let block = beta.block_mut(t);
        for x in 0..inst.endogenous().num_states() {
            for i in 0..k {
                block[x * k + i] = sol.values[t][x][i];
            }
        }
    }
    (basis, beta, sol.value)
}

/// Accelerated projected-free gradient method on the exact smoothed WTCA
/// objective with backtracking, used as the reference optimum.
pub fn reference_optimum(spec: &ObjectiveSpec, iterations: usize) -> (f64, Weights) {
    let layout = spec.layout();
    let mut x = Weights::zeros(&layout);
    let mut y = x.clone();
    let mut t = 1.0f64;
    let mut lip = 1.0f64;
    let (mut fx, _) = exact_wtca(spec, &x, true).unwrap();
    for _ in 0..iterations {
        let (fy, gy) = exact_wtca(spec, &y, true).unwrap();
        loop {
            let mut z = y.clone();
            z.axpy(-1.0 / lip, &gy);
            let (fz, _) = exact_wtca(spec, &z, true).unwrap();
            let mut d = z.clone();
            d.axpy(-1.0, &y);
            if fz <= fy + gy.dot(&d) + 0.5 * lip * d.dot(&d) + 1e-15 {
                let restart = fz > fx;
                let tn = if restart { 1.0 } else { (1.0 + (1.0 + 4.0 * t * t).sqrt()) / 2.0 };
                let mut step = z.clone();
                step.axpy(-1.0, &x);
                let mut yn = z.clone();
                if !restart {
                    yn.axpy((t - 1.0) / tn, &step);
                }
                x = z;
                fx = fz;
                y = yn;
                t = tn;
                lip *= 0.9;
                break;
            }
            lip *= 2.0;
        }
    }
    (fx, x)
}

/// Bermudan price on a recombining binomial tree with `per` steps between
/// exercise dates; exercise and knock-out are checked on exercise dates only.
pub fn binomial_bermudan(p: &BermudanParams, per: usize) -> f64 {
    assert_eq!(p.assets, 1);
    let dates = p.horizon - 1;
    let n = dates * per;
    let dt = p.dt / per as f64;
    let u = (p.volatility * dt.sqrt()).exp();
    let d = 1.0 / u;
    let q = ((p.rate * dt).exp() - d) / (u - d);
    let disc = (-p.rate * dt).exp();
    let price = |i: usize, j: usize| p.initial * u.powi(j as i32) * d.powi((i - j) as i32);
    let exercise = |s: f64, cont: f64| if s >= p.barrier { 0.0 } else { cont.max(s - p.strike) };
    let mut v: Vec<f64> = (0..=n).map(|j| exercise(price(n, j), 0.0)).collect();
    for i in (0..n).rev() {
        for j in 0..=i {
            v[j] = disc * (q * v[j + 1] + (1.0 - q) * v[j]);
        }
        v.truncate(i + 1);
        if i % per == 0 {
            for (j, slot) in v.iter_mut().enumerate() {
                *slot = exercise(price(i, j), *slot);
            }
        }
    }
    v[0]
}

pub fn max_abs_diff(a: &WeightMatrix<f64>, b: &WeightMatrix<f64>) -> f64 {
    a.as_slice().iter().zip(b.as_slice()).map(|(x, y)| (x - y).abs()).fold(0.0, f64::max)
}
