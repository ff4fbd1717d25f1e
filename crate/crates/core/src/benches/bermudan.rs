use std::sync::Arc;

use rand::RngCore;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::bases::{sample_fourier, BasisSet, BermudanBasis};
use crate::error::{invalid, Result};
use crate::mdp::{EndogenousSpace, ExoPoint, ExogenousModel, ExogenousSimulator, MdpInstance, RewardFn};

pub const ALIVE: usize = 0;
pub const INACTIVE: usize = 1;
pub const STOP: usize = 0;
pub const CONTINUE: usize = 1;
pub const NOOP: usize = 2;

/// Multi-asset Bermudan max-call with an up-and-out barrier.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct BermudanParams {
    pub assets: usize,
    pub initial: f64,
    pub strike: f64,
    pub barrier: f64,
    /// Years between exercise dates.
    pub dt: f64,
    pub volatility: f64,
    pub rate: f64,
    pub horizon: usize,
}

impl Default for BermudanParams {
    fn default() -> Self {
        Self { assets: 4, initial: 100.0, strike: 100.0, barrier: 170.0, dt: 1.0 / 12.0, volatility: 0.2, rate: 0.05, horizon: 36 }
    }
}

impl BermudanParams {
    pub fn validate(&self) -> Result<()> {
        let pos = [self.initial, self.strike, self.barrier, self.dt, self.volatility, self.rate];
        if self.assets == 0 || self.horizon == 0 || pos.iter().any(|v| !(*v > 0.0) || !v.is_finite()) {
            return Err(invalid("Bermudan parameters must be positive"));
        }
        if self.barrier <= self.strike {
            return Err(invalid(format!("barrier {} must exceed strike {}", self.barrier, self.strike)));
        }
        Ok(())
    }

    pub fn gamma(&self) -> f64 {
        (-self.rate * self.dt).exp()
    }

    /// `(max_q w_q - strike)^+` on the price part of `w`.
    pub fn payoff(&self, prices: &[f64]) -> f64 {
        let best = prices.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        (best - self.strike).max(0.0)
    }
}

/// Whether the option can still be exercised at `(x, w)`. The exogenous vector
/// carries the barrier flag in its last coordinate.
pub fn is_live(x: usize, w: &[f64]) -> bool {
    x == ALIVE && w.last().is_some_and(|f| *f < 0.5)
}

struct Gbm {
    assets: usize,
    initial: f64,
    barrier: f64,
    drift: f64,
    diffusion: f64,
}

impl ExogenousSimulator for Gbm {
    fn initial(&self) -> Vec<f64> {
        let mut w = vec![self.initial; self.assets];
        w.push(if self.initial >= self.barrier { 1.0 } else { 0.0 });
        w
    }

    fn step(&self, _t: usize, w: &[f64], rng: &mut dyn RngCore) -> Vec<f64> {
        let n = self.assets;
        let mut out = Vec::with_capacity(n + 1);
        let mut hit = w[n] > 0.5;
        for &p in &w[..n] {
            let z: f64 = StandardNormal.sample(rng);
            let q = p * (self.drift + self.diffusion * z).exp();
            hit |= q >= self.barrier;
            out.push(q);
        }
        out.push(if hit { 1.0 } else { 0.0 });
        out
    }
}

struct BermudanRewards {
    strike: f64,
    assets: usize,
}

impl RewardFn for BermudanRewards {
    fn reward(&self, _t: usize, x: usize, a: usize, w: &ExoPoint) -> f64 {
        if a != STOP || !is_live(x, &w.values) {
            return 0.0;
        }
        let best = w.values[..self.assets].iter().copied().fold(f64::NEG_INFINITY, f64::max);
        (best - self.strike).max(0.0)
    }
}

/// Builds the option instance. The endogenous state is 0 until the holder
/// stops; knock-out is recorded in the exogenous flag and zeroes every later
/// reward and feature.
pub fn build_bermudan(params: &BermudanParams) -> Result<MdpInstance> {
    params.validate()?;
    let space = EndogenousSpace::stationary(
        vec!["alive".into(), "inactive".into()],
        vec!["stop".into(), "continue".into(), "noop".into()],
        vec![vec![STOP, CONTINUE], vec![NOOP]],
        vec![vec![Some(INACTIVE), Some(ALIVE), None], vec![None, None, Some(INACTIVE)]],
        params.horizon,
    )?;
    let sim = Gbm {
        assets: params.assets,
        initial: params.initial,
        barrier: params.barrier,
        drift: (params.rate - 0.5 * params.volatility * params.volatility) * params.dt,
        diffusion: params.volatility * params.dt.sqrt(),
    };
    MdpInstance::new(
        format!("bermudan-N{}-T{}-w{}", params.assets, params.horizon, params.initial),
        params.horizon,
        params.gamma(),
        space,
        ALIVE,
        Arc::new(BermudanRewards { strike: params.strike, assets: params.assets }),
        ExogenousModel::Simulated(Arc::new(sim)),
    )
}

/// Constant, scaled payoff and `fourier` random features on the prices.
pub fn bermudan_basis(params: &BermudanParams, fourier: usize, rho: f64, lambda: f64, seed: u64) -> Result<BasisSet> {
    params.validate()?;
    if !(lambda > 0.0) {
        return Err(invalid(format!("payoff scale must be positive, got {lambda}")));
    }
    let theta = sample_fourier(seed, rho, fourier, params.assets)?;
    Ok(BasisSet::Bermudan(BermudanBasis {
        horizon: params.horizon,
        assets: params.assets,
        strike: params.strike,
        barrier: params.barrier,
        lambda,
        theta,
    }))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn discount_and_payoff() {
        let p = BermudanParams { assets: 2, ..Default::default() };
        assert!((p.gamma() - 0.995842).abs() < 5e-7);
        let inst = build_bermudan(&p).unwrap();
        let w = ExoPoint::continuous(vec![120.0, 90.0, 0.0]);
        assert_eq!(inst.reward(3, ALIVE, STOP, &w), 20.0);
        assert_eq!(inst.reward(3, ALIVE, CONTINUE, &w), 0.0);
        let knocked = ExoPoint::continuous(vec![120.0, 90.0, 1.0]);
        assert_eq!(inst.reward(3, ALIVE, STOP, &knocked), 0.0);
    }

    #[test]
    fn pair_order() {
        let inst = build_bermudan(&BermudanParams::default()).unwrap();
        assert_eq!(inst.enumerate_pairs(0), vec![(ALIVE, STOP), (ALIVE, CONTINUE)]);
        assert_eq!(inst.enumerate_pairs(4), vec![(ALIVE, STOP), (ALIVE, CONTINUE), (INACTIVE, NOOP)]);
        assert_eq!(inst.endogenous_step(2, ALIVE, CONTINUE).unwrap(), ALIVE);
    }

    #[test]
    fn rejects_low_barrier() {
        let p = BermudanParams { barrier: 90.0, ..Default::default() };
        assert!(build_bermudan(&p).is_err());
    }
}
