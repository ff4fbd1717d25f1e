use rayon::prelude::*;

use super::affine::{AffineFamily, AffineTerm};
use super::smoothing::{hard_max, log_sum_exp, softmax};
use super::ObjectiveSpec;
use crate::bases::{vfa_fast, WeightMatrix};
use crate::error::{Error, Result};
use crate::mdp::{ExoPoint, ExogenousPath};
use crate::seed::{Stream, StreamFamily};

/// Stage-`t` family: one term per pair with intercept `r_t`, slice `-phi_t(x, w_t)`
/// in block `t` (absent at `t = 0`) and `gamma E[phi_{t+1}(h(x, a)) | w_t]` in
/// block `t + 1` (absent at the last stage). Scale `gamma^t`.
pub fn wtca_component(spec: &ObjectiveSpec, t: usize, w_t: &ExoPoint, rng: &mut Stream) -> AffineFamily {
    let inst = &spec.instance;
    let basis = &spec.basis;
    let gamma = inst.gamma();
    let pairs = inst.enumerate_pairs(t);
    let last = t + 1 >= inst.horizon();
    let next = inst.next_states(t, w_t, spec.inner_samples, rng);
    let nx = inst.endogenous().num_states();
    let mut phi: Vec<Option<Vec<f64>>> = vec![None; nx];
    let mut ephi: Vec<Option<Vec<f64>>> = vec![None; nx];
    let mut terms = Vec::with_capacity(pairs.len());
    for &(x, a) in &pairs {
        let mut slices = Vec::with_capacity(2);
        if t >= 1 {
            let f = phi[x].get_or_insert_with(|| {
                let mut v = vec![0.0; basis.block_len(t)];
                basis.evaluate_into(t, x, w_t, &mut v);
                v.iter_mut().for_each(|z| *z = -*z);
                v
            });
            slices.push((t, f.clone()));
        }
        if !last {
            let xn = inst.endogenous().successor(x, a);
            let e = ephi[xn].get_or_insert_with(|| {
                let mut v = vec![0.0; basis.block_len(t + 1)];
                basis.expected_features(t + 1, xn, &next, &mut v);
                v.iter_mut().for_each(|z| *z *= gamma);
                v
            });
            slices.push((t + 1, e.clone()));
        }
        terms.push(AffineTerm { intercept: inst.reward(t, x, a, w_t), slices });
    }
    AffineFamily { component: t, scale: gamma.powi(t as i32), pairs, terms }
}

/// Components whose support meets `blocks`: `{i - 1, i}` for each block `i`.
pub fn wtca_components_for_blocks(horizon: usize, blocks: Option<&[usize]>) -> Vec<usize> {
    match blocks {
        None => (0..horizon).collect(),
        Some(bl) => {
            let mut c: Vec<usize> = bl
                .iter()
                .flat_map(|&i| [i.checked_sub(1), Some(i)])
                .flatten()
                .filter(|&t| t < horizon)
                .collect();
            c.sort_unstable();
            c.dedup();
            c
        }
    }
}

/// Adds the stochastic gradient of the smoothed WTCA objective along `path`
/// into `out`, restricted to `blocks` when given. Stage `t` draws its inner
/// samples from `inner.at(t)`. Returns the sum of the computed component values,
/// which is the sampled objective when every block is requested.
pub fn wtca_gradient_into(
    spec: &ObjectiveSpec,
    beta: &WeightMatrix<f64>,
    path: &ExogenousPath,
    inner: &StreamFamily,
    blocks: Option<&[usize]>,
    out: &mut WeightMatrix<f64>,
) -> Result<f64> {
    let horizon = spec.instance.horizon();
    if path.len() != horizon {
        return Err(Error::DimensionMismatch { context: "path length".into(), expected: horizon, got: path.len() });
    }
    let comps = wtca_components_for_blocks(horizon, blocks);
    let sigma = spec.sigma;
    let parts: Vec<Result<(f64, Vec<(usize, Vec<f64>)>)>> = comps
        .par_iter()
        .map(|&t| {
            let mut rng = inner.at(t);
            let fam = wtca_component(spec, t, path.at(t), &mut rng);
            if fam.is_empty() {
                return Err(Error::EmptyFamily(t));
            }
            let v = fam.values(beta);
            let mut p = vec![0.0; v.len()];
            softmax(&v, sigma, &mut p);
            let mut grads: Vec<(usize, Vec<f64>)> = Vec::new();
            for b in fam.support() {
                if blocks.is_some_and(|bl| !bl.contains(&b)) {
                    continue;
                }
                let mut g = vec![0.0; beta.block_len(b)];
                for (term, &pu) in fam.terms.iter().zip(&p) {
                    if let Some((_, s)) = term.slices.iter().find(|(sb, _)| *sb == b) {
                        for (o, x) in g.iter_mut().zip(s) {
                            *o += fam.scale * pu * x;
                        }
                    }
                }
                grads.push((b, g));
            }
            Ok((fam.scale * log_sum_exp(&v, sigma), grads))
        })
        .collect();
    let mut total = 0.0;
    for part in parts {
        let (val, grads) = part?;
        total += val;
        for (b, g) in grads {
            for (o, x) in out.block_mut(b).iter_mut().zip(&g) {
                *o += x;
            }
        }
    }
    Ok(total)
}

/// Full stochastic gradient and sampled smoothed objective along one path.
pub fn wtca_stochastic_gradient(
    spec: &ObjectiveSpec,
    beta: &WeightMatrix<f64>,
    path: &ExogenousPath,
    inner: &StreamFamily,
) -> Result<(WeightMatrix<f64>, f64)> {
    beta.check_layout(&spec.layout())?;
    let mut g = WeightMatrix::zeros(&spec.layout());
    let v = wtca_gradient_into(spec, beta, path, inner, None, &mut g)?;
    Ok((g, v))
}

/// `max_{(x,a) in U_t} r + gamma E[V_hat_{t+1}(h(x,a))] - V_hat_t(x, w_t)`.
pub fn hard_delta(spec: &ObjectiveSpec, beta: &WeightMatrix<f64>, t: usize, w_t: &ExoPoint, rng: &mut Stream) -> Result<f64> {
    beta.check_layout(&spec.layout())?;
    let fam = wtca_component(spec, t, w_t, rng);
    if fam.is_empty() {
        return Err(Error::EmptyFamily(t));
    }
    let (m, _) = hard_max(&fam.values(beta));
    if t == 0 {
        let mut buf = Vec::new();
        Ok(m - vfa_fast(&spec.basis, beta, 0, spec.instance.initial_state(), w_t, &mut buf))
    } else {
        Ok(m)
    }
}
