use super::smoothing::{hard_max, log_add, log_sum_exp};
use super::ObjectiveSpec;
use crate::bases::{dot, BasisSet, WeightMatrix};
use crate::error::{Error, Result};
use crate::mdp::{ExogenousPath, MdpInstance};
use crate::seed::StreamFamily;

/// Penalized stage data along one path.
#[derive(Clone, Debug)]
pub struct PoStage {
    pub pairs: Vec<(usize, usize)>,
    pub successors: Vec<usize>,
    /// `gamma^t (r_t - penalty_t)` per pair.
    pub gains: Vec<f64>,
    /// Block-`(t+1)` coefficients `gamma^{t+1} (E[phi_{t+1} | w_t] - phi_{t+1}(w_{t+1}))`;
    /// empty at the last stage.
    pub rows: Vec<Vec<f64>>,
}

#[derive(Clone, Debug)]
pub struct PoTables {
    pub stages: Vec<PoStage>,
    pub states: usize,
    pub x0: usize,
}

/// Builds the penalized anticipative problem along `path`, with conditional
/// expectations from `m` inner draws of `inner.at(t)` (exact on finite chains).
pub fn po_tables(
    inst: &MdpInstance,
    basis: &BasisSet,
    beta: &WeightMatrix<f64>,
    path: &ExogenousPath,
    m: usize,
    inner: &StreamFamily,
) -> Result<PoTables> {
    let horizon = inst.horizon();
    if path.len() != horizon {
        return Err(Error::DimensionMismatch { context: "path length".into(), expected: horizon, got: path.len() });
    }
    beta.check_layout(&basis.layout())?;
    let gamma = inst.gamma();
    let nx = inst.endogenous().num_states();
    let mut stages = Vec::with_capacity(horizon);
    for t in 0..horizon {
        let w = path.at(t);
        let pairs = inst.enumerate_pairs(t);
        let successors: Vec<usize> = pairs.iter().map(|&(x, a)| inst.endogenous().successor(x, a)).collect();
        let disc = gamma.powi(t as i32);
        let mut gains: Vec<f64> = pairs.iter().map(|&(x, a)| disc * inst.reward(t, x, a, w)).collect();
        let mut rows = Vec::new();
        if t + 1 < horizon {
            let next = inst.next_states(t, w, m, &mut inner.at(t));
            let len = basis.block_len(t + 1);
            let coef = disc * gamma;
            let mut by_state: Vec<Option<Vec<f64>>> = vec![None; nx];
            let mut buf = vec![0.0; len];
            for &xn in &successors {
                if by_state[xn].is_none() {
                    let mut e = vec![0.0; len];
                    basis.expected_features(t + 1, xn, &next, &mut e);
                    basis.evaluate_into(t + 1, xn, path.at(t + 1), &mut buf);
                    for (ev, b) in e.iter_mut().zip(&buf) {
                        *ev = coef * (*ev - b);
                    }
                    by_state[xn] = Some(e);
                }
            }
            for (u, &xn) in successors.iter().enumerate() {
                let row = by_state[xn].clone().unwrap();
                gains[u] += dot(beta.block(t + 1), &row);
                rows.push(row);
            }
        }
        stages.push(PoStage { pairs, successors, gains, rows });
    }
    Ok(PoTables { stages, states: nx, x0: inst.initial_state() })
}

fn backward(tables: &PoTables, combine: impl Fn(&[f64]) -> f64) -> Vec<Vec<f64>> {
    let horizon = tables.stages.len();
    let mut v = vec![vec![f64::NEG_INFINITY; tables.states]; horizon + 1];
    v[horizon] = vec![0.0; tables.states];
    for t in (0..horizon).rev() {
        let st = &tables.stages[t];
        let mut cands: Vec<Vec<f64>> = vec![Vec::new(); tables.states];
        for (u, &(x, _)) in st.pairs.iter().enumerate() {
            cands[x].push(st.gains[u] + v[t + 1][st.successors[u]]);
        }
        for x in 0..tables.states {
            if !cands[x].is_empty() {
                v[t][x] = combine(&cands[x]);
            }
        }
    }
    v
}

/// Soft value `soft_V_0(x_0)` of the penalized problem.
pub fn po_soft_value_tables(tables: &PoTables, sigma: f64) -> f64 {
    backward(tables, |c| log_sum_exp(c, sigma))[0][tables.x0]
}

/// Hard penalized DP value.
pub fn po_hard_value(tables: &PoTables) -> f64 {
    backward(tables, |c| hard_max(c).0)[0][tables.x0]
}

/// Hard penalized values `J_t(x)` for every stage, in time-0 money; `J_T = 0`.
pub fn po_hard_values(tables: &PoTables) -> Vec<Vec<f64>> {
    backward(tables, |c| hard_max(c).0)
}

/// Marginal Gibbs mass `p_t(x, a)` of each stage pair at temperature `sigma`.
pub fn po_marginals(tables: &PoTables, sigma: f64) -> Vec<Vec<f64>> {
    let horizon = tables.stages.len();
    let v = backward(tables, |c| log_sum_exp(c, sigma));
    let log_z = v[0][tables.x0] / sigma;
    let mut alpha = vec![f64::NEG_INFINITY; tables.states];
    alpha[tables.x0] = 0.0;
    let mut out = Vec::with_capacity(horizon);
    for t in 0..horizon {
        let st = &tables.stages[t];
        let mut incoming: Vec<Vec<f64>> = vec![Vec::new(); tables.states];
        let mut p = Vec::with_capacity(st.pairs.len());
        for (u, &(x, _)) in st.pairs.iter().enumerate() {
            let fwd = alpha[x] + st.gains[u] / sigma;
            let xn = st.successors[u];
            p.push((fwd + v[t + 1][xn] / sigma - log_z).exp());
            incoming[xn].push(fwd);
        }
        alpha = incoming.iter().map(|c| log_add(c)).collect();
        out.push(p);
    }
    out
}

/// Adds `sum_t sum_u p_t(u) row_t(u)` into block `t + 1` of `out`.
pub fn po_gradient_from_tables(tables: &PoTables, marginals: &[Vec<f64>], out: &mut WeightMatrix<f64>) {
    for (t, st) in tables.stages.iter().enumerate() {
        if st.rows.is_empty() {
            continue;
        }
        let block = out.block_mut(t + 1);
        for (row, &p) in st.rows.iter().zip(&marginals[t]) {
            if p == 0.0 {
                continue;
            }
            for (o, r) in block.iter_mut().zip(row) {
                *o += p * r;
            }
        }
    }
}

/// Smoothed penalized value along one path with training inner draws.
pub fn po_soft_value(spec: &ObjectiveSpec, beta: &WeightMatrix<f64>, path: &ExogenousPath, inner: &StreamFamily) -> Result<f64> {
    let tables = po_tables(&spec.instance, &spec.basis, beta, path, spec.inner_samples, inner)?;
    Ok(po_soft_value_tables(&tables, spec.sigma))
}

/// Gradient of the smoothed PO objective along one path and its value.
pub fn po_stochastic_gradient(
    spec: &ObjectiveSpec,
    beta: &WeightMatrix<f64>,
    path: &ExogenousPath,
    inner: &StreamFamily,
) -> Result<(WeightMatrix<f64>, f64)> {
    let tables = po_tables(&spec.instance, &spec.basis, beta, path, spec.inner_samples, inner)?;
    let marg = po_marginals(&tables, spec.sigma);
    let mut g = WeightMatrix::zeros(&spec.layout());
    po_gradient_from_tables(&tables, &marg, &mut g);
    Ok((g, po_soft_value_tables(&tables, spec.sigma)))
}

/// Hard penalized anticipative value with `m_eval` inner draws per stage.
pub fn po_exact_inner(
    inst: &MdpInstance,
    basis: &BasisSet,
    beta: &WeightMatrix<f64>,
    path: &ExogenousPath,
    m_eval: usize,
    inner: &StreamFamily,
) -> Result<f64> {
    Ok(po_hard_value(&po_tables(inst, basis, beta, path, m_eval, inner)?))
}
