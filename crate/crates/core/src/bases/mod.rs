//! Basis functions, value-function approximations and conditional feature
//! expectations.

mod fourier;
mod weights;

pub use fourier::{sample_fourier, sample_fourier_with, ThetaSet};
pub use weights::WeightMatrix;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::mdp::{ExoPoint, MdpInstance, NextStates};
use crate::seed::Stream;

/// Bermudan max-call features: constant, scaled payoff and Fourier terms on the
/// asset prices. All features vanish once the option is exercised or knocked out.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct BermudanBasis {
    pub horizon: usize,
    pub assets: usize,
    pub strike: f64,
    pub barrier: f64,
    pub lambda: f64,
    pub theta: ThetaSet,
}

/// Ethanol features: constant, every forward price and Fourier terms, one
/// weight group per endogenous state (operational, mothballed, abandoned).
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EthanolBasis {
    pub horizon: usize,
    pub lambda: f64,
    /// Per-commodity price caps in the order of the exogenous vector.
    pub price_caps: [f64; 3],
    /// Fourier sets per stage, of dimension `3 (T - t)`.
    pub thetas: Vec<ThetaSet>,
}

/// One-hot features over `(x, atom)` on a finite chain.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct IndicatorBasis {
    pub states: usize,
    pub atoms: Vec<usize>,
}

/// Explicit feature table `table[t][x][atom]` on a finite chain.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TabulatedBasis {
    pub table: Vec<Vec<Vec<Vec<f64>>>>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum BasisSet {
    Bermudan(BermudanBasis),
    Ethanol(EthanolBasis),
    Indicator(IndicatorBasis),
    Tabulated(TabulatedBasis),
}

pub const ETHANOL_ABANDONED: usize = 2;

impl EthanolBasis {
    /// Features per endogenous group at stage `t`: `3 (T - t) + 1 + count`.
    pub fn group_len(&self, t: usize) -> usize {
        1 + 3 * (self.horizon - t) + self.thetas[t].len()
    }
}

impl TabulatedBasis {
    /// Rescales every vector so that the largest norm in the table is at most one.
    pub fn normalized(mut self) -> Self {
        let m = self
            .table
            .iter()
            .flatten()
            .flatten()
            .map(|v| v.iter().map(|a| a * a).sum::<f64>().sqrt())
            .fold(0.0, f64::max);
        if m > 1.0 {
            for v in self.table.iter_mut().flatten().flatten() {
                v.iter_mut().for_each(|a| *a /= m);
            }
        }
        self
    }
}

impl BasisSet {
    pub fn horizon(&self) -> usize {
        match self {
            BasisSet::Bermudan(b) => b.horizon,
            BasisSet::Ethanol(b) => b.horizon,
            BasisSet::Indicator(b) => b.atoms.len(),
            BasisSet::Tabulated(b) => b.table.len(),
        }
    }

    pub fn block_len(&self, t: usize) -> usize {
        match self {
            BasisSet::Bermudan(b) => 2 + b.theta.len(),
            BasisSet::Ethanol(b) => 3 * b.group_len(t),
            BasisSet::Indicator(b) => b.states * b.atoms[t],
            BasisSet::Tabulated(b) => b.table[t].first().and_then(|r| r.first()).map_or(0, Vec::len),
        }
    }

    /// Features carried by a single endogenous state at stage `t`.
    pub fn group_len(&self, t: usize) -> usize {
        match self {
            BasisSet::Ethanol(b) => b.group_len(t),
            BasisSet::Indicator(b) => b.atoms[t],
            _ => self.block_len(t),
        }
    }

    pub fn layout(&self) -> Vec<usize> {
        (0..self.horizon()).map(|t| self.block_len(t)).collect()
    }

    /// Divisor applied to raw features at stage `t`.
    pub fn normalizer(&self, t: usize) -> f64 {
        match self {
            BasisSet::Bermudan(b) => ((2 + b.theta.len()) as f64).sqrt(),
            BasisSet::Ethanol(b) => (b.group_len(t) as f64).sqrt(),
            BasisSet::Indicator(_) | BasisSet::Tabulated(_) => 1.0,
        }
    }

    /// Checks the basis against an instance's horizon and exogenous dimensions.
    pub fn check(&self, inst: &MdpInstance) -> Result<()> {
        if self.horizon() != inst.horizon() {
            return Err(Error::DimensionMismatch {
                context: "basis horizon".into(),
                expected: inst.horizon(),
                got: self.horizon(),
            });
        }
        let w0 = inst.initial_point();
        self.evaluate(0, inst.initial_state(), &w0).map(|_| ())
    }

    /// `phi_t(x, w)` with input validation.
    pub fn evaluate(&self, t: usize, x: usize, w: &ExoPoint) -> Result<Vec<f64>> {
        if t >= self.horizon() {
            return Err(Error::DimensionMismatch { context: "stage".into(), expected: self.horizon(), got: t });
        }
        match self {
            BasisSet::Bermudan(b) => {
                if w.values.len() != b.assets + 1 {
                    return Err(Error::DimensionMismatch {
                        context: "Bermudan state".into(),
                        expected: b.assets + 1,
                        got: w.values.len(),
                    });
                }
            }
            BasisSet::Ethanol(b) => {
                let need = 3 * (b.horizon - t);
                if w.values.len() != need {
                    return Err(Error::DimensionMismatch { context: "ethanol curves".into(), expected: need, got: w.values.len() });
                }
            }
            BasisSet::Indicator(b) => {
                let n = b.atoms[t];
                match w.atom {
                    Some(i) if i < n && x < b.states => {}
                    _ => return Err(Error::DimensionMismatch { context: "indicator atom".into(), expected: n, got: w.atom.unwrap_or(usize::MAX) }),
                }
            }
            BasisSet::Tabulated(b) => {
                let n = b.table[t].get(x).map_or(0, Vec::len);
                match w.atom {
                    Some(i) if i < n => {}
                    _ => return Err(Error::DimensionMismatch { context: "tabulated atom".into(), expected: n, got: w.atom.unwrap_or(usize::MAX) }),
                }
            }
        }
        let mut out = vec![0.0; self.block_len(t)];
        self.evaluate_into(t, x, w, &mut out);
        Ok(out)
    }

    /// Overwrites `out` (of length `block_len(t)`) with `phi_t(x, w)`.
    pub fn evaluate_into(&self, t: usize, x: usize, w: &ExoPoint, out: &mut [f64]) {
        out.iter_mut().for_each(|v| *v = 0.0);
        match self {
            BasisSet::Bermudan(b) => {
                let n = b.assets;
                let knocked = w.values[n] > 0.5;
                if x != 0 || knocked {
                    return;
                }
                let prices = &w.values[..n];
                let best = prices.iter().copied().fold(f64::NEG_INFINITY, f64::max);
                let cap = b.barrier - b.strike;
                let payoff = (best - b.strike).max(0.0);
                let scale = 1.0 / self.normalizer(t);
                out[0] = scale;
                out[1] = (b.lambda * payoff / cap).min(1.0) * scale;
                for q in 0..b.theta.len() {
                    out[2 + q] = b.theta.eval(q, prices) * scale;
                }
            }
            BasisSet::Ethanol(b) => {
                if x >= ETHANOL_ABANDONED {
                    return;
                }
                let g = b.group_len(t);
                let scale = 1.0 / self.normalizer(t);
                let seg = &mut out[x * g..(x + 1) * g];
                let per = b.horizon - t;
                seg[0] = scale;
                for (k, &p) in w.values.iter().enumerate() {
                    let cap = b.price_caps[k / per];
                    seg[1 + k] = (b.lambda * p / cap).clamp(-1.0, 1.0) * scale;
                }
                let th = &b.thetas[t];
                for q in 0..th.len() {
                    seg[1 + 3 * per + q] = th.eval(q, &w.values) * scale;
                }
            }
            BasisSet::Indicator(b) => {
                let i = w.atom.expect("indicator basis needs atoms");
                out[x * b.atoms[t] + i] = 1.0;
            }
            BasisSet::Tabulated(b) => {
                let i = w.atom.expect("tabulated basis needs atoms");
                out.copy_from_slice(&b.table[t][x][i]);
            }
        }
    }

    /// Probability-weighted sum of `phi_{t_next}(x_next, .)` over `next`.
    pub fn expected_features(&self, t_next: usize, x_next: usize, next: &NextStates, out: &mut [f64]) {
        out.iter_mut().for_each(|v| *v = 0.0);
        let mut buf = vec![0.0; out.len()];
        for (p, &q) in next.points.iter().zip(&next.weights) {
            self.evaluate_into(t_next, x_next, p, &mut buf);
            for (o, b) in out.iter_mut().zip(&buf) {
                *o += q * b;
            }
        }
    }
}

/// Estimate of `E[phi_{t+1}(x_next, w_{t+1}) | w_t]`; exact on finite chains.
/// Empty at the last stage, where `phi_T` is absent.
pub fn conditional_expectation(
    basis: &BasisSet,
    inst: &MdpInstance,
    t: usize,
    x_next: usize,
    w_t: &ExoPoint,
    m: usize,
    rng: &mut Stream,
) -> Vec<f64> {
    if t + 1 >= inst.horizon() {
        return Vec::new();
    }
    let next = inst.next_states(t, w_t, m, rng);
    let mut out = vec![0.0; basis.block_len(t + 1)];
    basis.expected_features(t + 1, x_next, &next, &mut out);
    out
}

/// `V_hat_t(x, w) = beta_t . phi_t(x, w)`, zero at `t = T`.
pub fn vfa(basis: &BasisSet, beta: &WeightMatrix<f64>, t: usize, x: usize, w: &ExoPoint) -> Result<f64> {
    if t == basis.horizon() {
        return Ok(0.0);
    }
    beta.check_layout(&basis.layout())?;
    let phi = basis.evaluate(t, x, w)?;
    Ok(dot(beta.block(t), &phi))
}

#[inline]
pub(crate) fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

/// Evaluates `V_hat_t` without shape checks; zero at `t = T`.
pub(crate) fn vfa_fast(basis: &BasisSet, beta: &WeightMatrix<f64>, t: usize, x: usize, w: &ExoPoint, buf: &mut Vec<f64>) -> f64 {
    if t >= basis.horizon() {
        return 0.0;
    }
    buf.resize(basis.block_len(t), 0.0);
    basis.evaluate_into(t, x, w, buf);
    dot(beta.block(t), buf)
}
