use rand::Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use crate::error::{invalid, Result};
use crate::seed::{self, Purpose};

/// Random Fourier parameters; each row is `(theta_0, theta_1, ..., theta_dim)`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ThetaSet {
    pub rho: f64,
    pub dim: usize,
    pub thetas: Vec<Vec<f64>>,
}

impl ThetaSet {
    pub fn len(&self) -> usize {
        self.thetas.len()
    }

    pub fn is_empty(&self) -> bool {
        self.thetas.is_empty()
    }

    /// `cos(theta_0 + theta . w)` for feature `q`; `w` may be longer than `dim`.
    #[inline]
    pub fn eval(&self, q: usize, w: &[f64]) -> f64 {
        let th = &self.thetas[q];
        let mut s = th[0];
        for (a, b) in th[1..].iter().zip(w) {
            s += a * b;
        }
        s.cos()
    }

    pub fn from_json(text: &str) -> Result<Self> {
        Ok(serde_json::from_str(text)?)
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string(self)?)
    }
}

/// `theta_0 ~ U[-pi, pi]`, the remaining entries `N(0, rho)` (`rho` is a variance).
pub fn sample_fourier(seed: u64, rho: f64, count: usize, dim: usize) -> Result<ThetaSet> {
    sample_fourier_with(&mut seed::stream(seed, Purpose::Basis, &[dim as u64]), rho, count, dim)
}

pub fn sample_fourier_with<R: Rng + ?Sized>(rng: &mut R, rho: f64, count: usize, dim: usize) -> Result<ThetaSet> {
    if !(rho > 0.0) || !rho.is_finite() {
        return Err(invalid(format!("Fourier bandwidth must be positive, got {rho}")));
    }
    let normal = Normal::new(0.0, rho.sqrt()).map_err(|e| invalid(e.to_string()))?;
    let thetas = (0..count)
        .map(|_| {
            let mut th = Vec::with_capacity(dim + 1);
            th.push(rng.random_range(-std::f64::consts::PI..=std::f64::consts::PI));
            for _ in 0..dim {
                th.push(normal.sample(rng));
            }
            th
        })
        .collect();
    Ok(ThetaSet { rho, dim, thetas })
}
