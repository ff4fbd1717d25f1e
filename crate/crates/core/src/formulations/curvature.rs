use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use super::wtca::wtca_component;
use super::{Formulation, ObjectiveSpec};
use crate::error::{invalid, Result};
use crate::seed::{self, Purpose};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CurvatureProvenance {
    ClosedFormWtca,
    ClosedFormPo,
    UserSupplied,
    Estimated,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CurvatureWeights {
    pub nu: Vec<f64>,
    pub provenance: CurvatureProvenance,
}

impl CurvatureWeights {
    pub fn user(nu: Vec<f64>) -> Result<Self> {
        if nu.is_empty() || nu.iter().any(|&v| !(v > 0.0) || !v.is_finite()) {
            return Err(invalid("curvature weights must be positive and finite"));
        }
        Ok(Self { nu, provenance: CurvatureProvenance::UserSupplied })
    }

    /// Multiplies every weight by `s`, keeping the provenance.
    pub fn scaled(&self, s: f64) -> Self {
        Self { nu: self.nu.iter().map(|v| v * s).collect(), provenance: self.provenance }
    }
}

fn coupling_factor(kappa: f64, n: usize, tau: usize) -> f64 {
    1.0 + (kappa - 1.0) * (tau as f64 - 1.0) / (n.max(2) - 1) as f64
}

/// Closed-form ESO weights for a single block (`n = 1`) or one block per stage (`n = T`).
pub fn curvature(spec: &ObjectiveSpec, n: usize, tau: usize) -> Result<CurvatureWeights> {
    let inst = &spec.instance;
    let horizon = inst.horizon();
    if n != 1 && n != horizon {
        return Err(invalid(format!("closed-form curvature needs n = 1 or n = T = {horizon}, got n = {n}")));
    }
    if tau == 0 || tau > n {
        return Err(invalid(format!("sampling size tau = {tau} must lie in [1, {n}]")));
    }
    let gamma = inst.gamma();
    let sigma = spec.sigma;
    match spec.formulation {
        Formulation::Wtca => {
            let comp: Vec<f64> = (0..horizon)
                .map(|t| gamma.powi(t as i32) * (1.0 + gamma * gamma) * inst.enumerate_pairs(t).len() as f64 / sigma)
                .collect();
            let nu = if n == 1 {
                vec![comp.iter().sum()]
            } else {
                let f = coupling_factor(2.0, n, tau);
                (0..horizon)
                    .map(|i| {
                        let prev = if i >= 1 { comp[i - 1] } else { 0.0 };
                        f * (prev + comp[i])
                    })
                    .collect()
            };
            Ok(CurvatureWeights { nu, provenance: CurvatureProvenance::ClosedFormWtca })
        }
        Formulation::Po => {
            let seqs = inst.count_action_sequences();
            // 1 / (1 - gamma^2) bounds the discounted sum; a unit discount uses T
            let tail = if gamma < 1.0 { 1.0 / (1.0 - gamma * gamma) } else { horizon as f64 };
            let nu = if n == 1 {
                vec![4.0 * tau as f64 * gamma * gamma * seqs * tail / sigma]
            } else if tau == n {
                (0..horizon).map(|i| 4.0 * horizon as f64 * gamma.powi(2 * i as i32) * seqs / sigma).collect()
            } else {
                vec![4.0 * tau as f64 * gamma * gamma * seqs * tail / sigma; n]
            };
            Ok(CurvatureWeights { nu, provenance: CurvatureProvenance::ClosedFormPo })
        }
    }
}

/// `nu_i = sum_j (1 + (kappa_j - 1)(tau - 1) / max(1, n - 1)) L_{ji}` from a
/// component-by-block Lipschitz table. `kappa_j` defaults to the number of
/// blocks with positive `L_{ji}`.
pub fn curvature_from_lipschitz(lipschitz: &[Vec<f64>], kappa: Option<&[usize]>, tau: usize) -> Result<CurvatureWeights> {
    let n = lipschitz.first().map_or(0, Vec::len);
    if n == 0 || lipschitz.iter().any(|r| r.len() != n) {
        return Err(invalid("Lipschitz table must be a nonempty rectangle"));
    }
    if tau == 0 || tau > n {
        return Err(invalid(format!("sampling size tau = {tau} must lie in [1, {n}]")));
    }
    let mut nu = vec![0.0; n];
    for (j, row) in lipschitz.iter().enumerate() {
        let k = match kappa {
            Some(k) => k[j] as f64,
            None => row.iter().filter(|&&l| l > 0.0).count().max(1) as f64,
        };
        let f = coupling_factor(k, n, tau);
        for (i, &l) in row.iter().enumerate() {
            nu[i] += f * l;
        }
    }
    let top = nu.iter().copied().fold(0.0, f64::max);
    if !(top > 0.0) {
        return Err(invalid("every Lipschitz constant is zero"));
    }
    // Blocks no component touches get a harmless positive weight.
    for v in nu.iter_mut() {
        if *v <= 0.0 {
            *v = top;
        }
    }
    Ok(CurvatureWeights { nu, provenance: CurvatureProvenance::UserSupplied })
}

/// Monte Carlo estimate of `L_{ti} = gamma^t / sigma * E ||A_t^{(i)}||^2` for the
/// WTCA components, with spectral norms of the block-restricted term matrices.
pub fn estimate_wtca_lipschitz(spec: &ObjectiveSpec, samples: usize, seed: u64) -> Result<Vec<Vec<f64>>> {
    let inst = &spec.instance;
    let horizon = inst.horizon();
    if samples == 0 {
        return Err(invalid("need at least one sample"));
    }
    let mut acc = vec![vec![0.0; horizon]; horizon];
    for s in 0..samples {
        let path = inst.sample_path_with(&mut seed::stream(seed, Purpose::Path, &[s as u64]));
        for (t, row) in acc.iter_mut().enumerate() {
            let mut rng = seed::stream(seed, Purpose::Inner, &[s as u64, t as u64]);
            let fam = wtca_component(spec, t, path.at(t), &mut rng);
            for b in fam.support() {
                let slices: Vec<&Vec<f64>> = fam
                    .terms
                    .iter()
                    .filter_map(|term| term.slices.iter().find(|(sb, _)| *sb == b).map(|(_, v)| v))
                    .collect();
                let k = slices.len();
                let gram: DMatrix<f64> = DMatrix::from_fn(k, k, |u, v| slices[u].iter().zip(slices[v]).map(|(a, c)| a * c).sum::<f64>());
                let top = gram.symmetric_eigenvalues().iter().copied().fold(0.0, f64::max);
                row[b] += fam.scale * top / spec.sigma;
            }
        }
    }
    for row in acc.iter_mut() {
        row.iter_mut().for_each(|v| *v /= samples as f64);
    }
    Ok(acc)
}
