use super::{ExogenousPath, MdpInstance};
use crate::error::{invalid, Error, Result};

pub const DEFAULT_STATE_CAP: usize = 1_000_000;

/// Backward-induction tables on a finite chain.
#[derive(Clone, Debug)]
pub struct ExactSolution {
    /// `values[t][x][atom]`; `values[T]` is identically zero.
    pub values: Vec<Vec<Vec<f64>>>,
    /// `policy[t][x][atom]`, first maximizer in action order.
    pub policy: Vec<Vec<Vec<Option<usize>>>>,
    pub value: f64,
}

pub fn exact_value(inst: &MdpInstance, cap: usize) -> Result<ExactSolution> {
    let chain = inst.finite_chain().ok_or_else(|| invalid("exact value needs a finite exogenous chain"))?;
    let t_len = inst.horizon();
    let nx = inst.endogenous().num_states();
    let triples: u128 = (0..t_len).map(|t| (nx * chain.num_atoms(t)) as u128).sum();
    if triples > cap as u128 {
        return Err(Error::SizeCap { what: "(stage, state, atom) triples".into(), needed: triples, cap: cap as u128 });
    }
    let gamma = inst.gamma();
    let mut values: Vec<Vec<Vec<f64>>> = vec![Vec::new(); t_len + 1];
    let mut policy: Vec<Vec<Vec<Option<usize>>>> = vec![Vec::new(); t_len];
    values[t_len] = vec![vec![0.0]; nx];
    for t in (0..t_len).rev() {
        let n = chain.num_atoms(t);
        let mut vt = vec![vec![0.0; n]; nx];
        let mut pt = vec![vec![None; n]; nx];
        for x in 0..nx {
            for i in 0..n {
                let point = chain.point(t, i);
                let mut best = f64::NEG_INFINITY;
                let mut arg = None;
                for &a in inst.endogenous().feasible(t, x) {
                    let xn = inst.endogenous().successor(x, a);
                    let cont = if t + 1 < t_len {
                        chain.row(t, i).iter().zip(&values[t + 1][xn]).map(|(p, v)| p * v).sum::<f64>()
                    } else {
                        0.0
                    };
                    let q = inst.reward(t, x, a, &point) + gamma * cont;
                    if q > best {
                        best = q;
                        arg = Some(a);
                    }
                }
                vt[x][i] = if arg.is_some() { best } else { 0.0 };
                pt[x][i] = arg;
            }
        }
        values[t] = vt;
        policy[t] = pt;
    }
    let value = values[0][inst.initial_state()][chain.initial()];
    Ok(ExactSolution { values, policy, value })
}

/// Marginal law of the atom index at each stage.
pub fn stage_marginals(inst: &MdpInstance) -> Result<Vec<Vec<f64>>> {
    let chain = inst.finite_chain().ok_or_else(|| invalid("marginals need a finite exogenous chain"))?;
    let mut out = Vec::with_capacity(inst.horizon());
    let mut cur = vec![0.0; chain.num_atoms(0)];
    cur[chain.initial()] = 1.0;
    out.push(cur.clone());
    for t in 0..inst.horizon() - 1 {
        let mut nxt = vec![0.0; chain.num_atoms(t + 1)];
        for (i, &p) in cur.iter().enumerate() {
            if p > 0.0 {
                for (j, &q) in chain.row(t, i).iter().enumerate() {
                    nxt[j] += p * q;
                }
            }
        }
        out.push(nxt.clone());
        cur = nxt;
    }
    Ok(out)
}

#[derive(Clone, Debug)]
pub struct WeightedPath {
    pub probability: f64,
    pub path: ExogenousPath,
}

/// Every positive-probability path of a finite chain.
pub fn enumerate_paths(inst: &MdpInstance, cap: usize) -> Result<Vec<WeightedPath>> {
    let chain = inst.finite_chain().ok_or_else(|| invalid("path enumeration needs a finite exogenous chain"))?;
    let mut frontier = vec![(1.0f64, vec![chain.initial()])];
    for t in 0..inst.horizon() - 1 {
        let mut next = Vec::new();
        for (p, atoms) in &frontier {
            let i = *atoms.last().unwrap();
            for (j, &q) in chain.row(t, i).iter().enumerate() {
                if q > 0.0 {
                    let mut a = atoms.clone();
                    a.push(j);
                    next.push((p * q, a));
                }
            }
            if next.len() > cap {
                return Err(Error::SizeCap { what: "exogenous paths".into(), needed: next.len() as u128, cap: cap as u128 });
            }
        }
        frontier = next;
    }
    Ok(frontier
        .into_iter()
        .map(|(probability, atoms)| WeightedPath {
            probability,
            path: ExogenousPath { points: atoms.iter().enumerate().map(|(t, &i)| chain.point(t, i)).collect() },
        })
        .collect())
}
