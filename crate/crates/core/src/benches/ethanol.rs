use std::io::{Read, Write};
use std::path::{Path, PathBuf};
use std::sync::Arc;

use rand::RngCore;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::bases::{BasisSet, EthanolBasis, ThetaSet};
use crate::error::{invalid, Error, Result};
use crate::mdp::{EndogenousSpace, ExoPoint, ExogenousModel, ExogenousSimulator, MdpInstance, RewardFn};
use crate::seed::{self, Purpose};

/// Commodity order inside every exogenous vector.
pub const COMMODITIES: [&str; 3] = ["corn", "natural_gas", "ethanol"];
pub const CORN: usize = 0;
pub const GAS: usize = 1;
pub const ETHANOL: usize = 2;

pub const OPERATIONAL: usize = 0;
pub const MOTHBALLED: usize = 1;
pub const ABANDONED: usize = 2;

pub const ABANDON: usize = 0;
pub const PRODUCE: usize = 1;
pub const SUSPEND: usize = 2;
pub const MOTHBALL: usize = 3;
pub const REACTIVATE: usize = 4;

/// Operating costs in $MM, conversion rates and capacity.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct EthanolCosts {
    pub mothball: f64,
    pub reactivate: f64,
    pub produce: f64,
    pub suspend: f64,
    pub keep_mothballed: f64,
    pub salvage: f64,
    /// Bushels of corn per gallon.
    pub corn_rate: f64,
    /// MMBtu of gas per gallon.
    pub gas_rate: f64,
    /// Million gallons per stage.
    pub capacity: f64,
}

impl Default for EthanolCosts {
    fn default() -> Self {
        Self {
            mothball: 0.50,
            reactivate: 2.50,
            produce: 2.25,
            suspend: 0.5208,
            keep_mothballed: 0.02917,
            salvage: 0.0,
            corn_rate: 0.36,
            gas_rate: 0.035,
            capacity: 8.33,
        }
    }
}

/// Initial forward curves and factor loadings `eta[c][t][s][l]`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EthanolData {
    pub horizon: usize,
    pub factors: usize,
    /// `curves[c][s]`, maturity `s` in `0..horizon`.
    pub curves: Vec<Vec<f64>>,
    /// Flattened `[c][t][s][l]`; entries with `s < t` are unused.
    pub loadings: Vec<f64>,
}

impl EthanolData {
    fn index(&self, c: usize, t: usize, s: usize) -> usize {
        ((c * self.horizon + t) * self.horizon + s) * self.factors
    }

    pub fn loading(&self, c: usize, t: usize, s: usize) -> &[f64] {
        let i = self.index(c, t, s);
        &self.loadings[i..i + self.factors]
    }

    pub fn loading_mut(&mut self, c: usize, t: usize, s: usize) -> &mut [f64] {
        let i = self.index(c, t, s);
        &mut self.loadings[i..i + self.factors]
    }

    pub fn zeros(horizon: usize, factors: usize) -> Self {
        Self {
            horizon,
            factors,
            curves: vec![vec![0.0; horizon]; 3],
            loadings: vec![0.0; 3 * horizon * horizon * factors],
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.horizon == 0 || self.factors == 0 {
            return Err(Error::Malformed("ethanol data needs a positive horizon and factor count".into()));
        }
        if self.curves.len() != 3 || self.curves.iter().any(|c| c.len() != self.horizon) {
            return Err(Error::Malformed(format!("expected three curves of length {}", self.horizon)));
        }
        if self.curves.iter().flatten().any(|p| !(*p > 0.0) || !p.is_finite()) {
            return Err(Error::Malformed("forward prices must be positive".into()));
        }
        if self.loadings.len() != 3 * self.horizon * self.horizon * self.factors {
            return Err(Error::Malformed("loading tensor has the wrong size".into()));
        }
        if self.loadings.iter().any(|v| !v.is_finite()) {
            return Err(Error::Malformed("loadings must be finite".into()));
        }
        Ok(())
    }

    /// Lengthens the data by repeating the last twelve maturities of a
    /// 24-month calibration (maturity `s >= 24` reuses `12 + (s - 12) mod 12`).
    pub fn extend(&self, horizon: usize) -> Result<Self> {
        if horizon <= self.horizon {
            return self.truncate(horizon);
        }
        if self.horizon < 24 {
            return Err(invalid(format!("extension needs at least 24 maturities, have {}", self.horizon)));
        }
        let src = |s: usize| if s < 24 { s } else { 12 + (s - 12) % 12 };
        let mut out = Self::zeros(horizon, self.factors);
        for c in 0..3 {
            for s in 0..horizon {
                out.curves[c][s] = self.curves[c][src(s)];
            }
            for t in 0..horizon {
                for s in t..horizon {
                    let s2 = src(s);
                    let t2 = t.saturating_sub(s - s2).min(s2);
                    let row = self.loading(c, t2, s2).to_vec();
                    out.loading_mut(c, t, s).copy_from_slice(&row);
                }
            }
        }
        Ok(out)
    }

    pub fn truncate(&self, horizon: usize) -> Result<Self> {
        if horizon == 0 || horizon > self.horizon {
            return Err(invalid(format!("cannot truncate {} maturities to {horizon}", self.horizon)));
        }
        let mut out = Self::zeros(horizon, self.factors);
        for c in 0..3 {
            out.curves[c].copy_from_slice(&self.curves[c][..horizon]);
            for t in 0..horizon {
                for s in t..horizon {
                    let row = self.loading(c, t, s).to_vec();
                    out.loading_mut(c, t, s).copy_from_slice(&row);
                }
            }
        }
        Ok(out)
    }

    /// Reads `commodity,maturity,price` and `commodity,stage,maturity,factor,value`
    /// tables. The horizon is the number of maturities listed.
    pub fn read_csv<R1: Read, R2: Read>(curves: R1, loadings: R2) -> Result<Self> {
        let mut curve_rows: Vec<(usize, usize, f64)> = Vec::new();
        for rec in csv::Reader::from_reader(curves).deserialize::<(String, usize, f64)>() {
            let (c, s, p) = rec?;
            curve_rows.push((commodity_index(&c)?, s, p));
        }
        let mut load_rows: Vec<(usize, usize, usize, usize, f64)> = Vec::new();
        for rec in csv::Reader::from_reader(loadings).deserialize::<(String, usize, usize, usize, f64)>() {
            let (c, t, s, l, v) = rec?;
            load_rows.push((commodity_index(&c)?, t, s, l, v));
        }
        let horizon = curve_rows.iter().map(|r| r.1 + 1).max().unwrap_or(0);
        let factors = load_rows.iter().map(|r| r.3 + 1).max().unwrap_or(0);
        if horizon == 0 || factors == 0 {
            return Err(Error::Malformed("empty curve or loading table".into()));
        }
        let mut data = Self::zeros(horizon, factors);
        let mut seen = vec![vec![false; horizon]; 3];
        for (c, s, p) in curve_rows {
            if seen[c][s] {
                return Err(Error::Malformed(format!("duplicate price for {} maturity {s}", COMMODITIES[c])));
            }
            seen[c][s] = true;
            data.curves[c][s] = p;
        }
        if seen.iter().flatten().any(|v| !v) {
            return Err(Error::Malformed("every commodity needs a price at every maturity".into()));
        }
        for (c, t, s, l, v) in load_rows {
            if t >= horizon || s >= horizon || s < t {
                return Err(Error::Malformed(format!("loading at stage {t} maturity {s} is out of range")));
            }
            data.loading_mut(c, t, s)[l] = v;
        }
        data.validate()?;
        Ok(data)
    }

    pub fn write_csv<W1: Write, W2: Write>(&self, curves: W1, loadings: W2) -> Result<()> {
        let mut w = csv::Writer::from_writer(curves);
        w.write_record(["commodity", "maturity", "price"])?;
        for (c, name) in COMMODITIES.iter().enumerate() {
            for s in 0..self.horizon {
                w.serialize((name, s, self.curves[c][s]))?;
            }
        }
        w.flush()?;
        let mut w = csv::Writer::from_writer(loadings);
        w.write_record(["commodity", "stage", "maturity", "factor", "value"])?;
        for (c, name) in COMMODITIES.iter().enumerate() {
            for t in 0..self.horizon {
                for s in t..self.horizon {
                    for (l, v) in self.loading(c, t, s).iter().enumerate() {
                        w.serialize((name, t, s, l, v))?;
                    }
                }
            }
        }
        w.flush()?;
        Ok(())
    }

    pub fn load(curves: &Path, loadings: &Path) -> Result<Self> {
        Self::read_csv(std::fs::File::open(curves)?, std::fs::File::open(loadings)?)
    }
}

fn commodity_index(name: &str) -> Result<usize> {
    let key = name.trim().to_ascii_lowercase();
    match key.as_str() {
        "corn" | "c" => Ok(CORN),
        "natural_gas" | "ng" | "gas" => Ok(GAS),
        "ethanol" | "e" => Ok(ETHANOL),
        _ => Err(Error::Malformed(format!("unknown commodity '{name}'"))),
    }
}

/// Knobs of the synthetic term-structure generator.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SyntheticCurves {
    /// Calendar month of maturity 0, `0` = January.
    pub start_month: usize,
    /// Annualized spot volatilities per commodity.
    pub volatility: [f64; 3],
    /// Share of variance carried by the common factors.
    pub common_share: f64,
    /// Long-maturity volatility as a fraction of the spot volatility.
    pub long_vol_ratio: f64,
    /// Monthly geometric decay of the short-maturity excess volatility.
    pub decay: f64,
    /// Relative size of the slope factors.
    pub slope: f64,
}

impl Default for SyntheticCurves {
    fn default() -> Self {
        Self { start_month: 0, volatility: [0.30, 0.45, 0.35], common_share: 0.5, long_vol_ratio: 0.5, decay: 0.85, slope: 0.3 }
    }
}

/// Seasonal forward curves and eight-factor loadings: common level and slope,
/// then a level and slope factor per commodity. Volatility decays
/// geometrically in time to maturity.
pub fn synthetic_ethanol_data(horizon: usize, knobs: &SyntheticCurves) -> Result<EthanolData> {
    if horizon == 0 {
        return Err(invalid("horizon must be positive"));
    }
    if !(0.0..=1.0).contains(&knobs.common_share) || !(0.0..1.0).contains(&knobs.decay) {
        return Err(invalid("common share must lie in [0,1] and decay in [0,1)"));
    }
    let factors = 8;
    let mut data = EthanolData::zeros(horizon, factors);
    let two_pi = 2.0 * std::f64::consts::PI;
    for s in 0..horizon {
        let month = ((knobs.start_month + s) % 12) as f64;
        data.curves[CORN][s] = 6.0 + 0.3 * (two_pi * (month - 6.0) / 12.0).cos() + 0.01 * s as f64;
        data.curves[GAS][s] = 4.0 + 0.6 * (two_pi * month / 12.0).cos();
        data.curves[ETHANOL][s] = 2.5 + 0.1 * (two_pi * (month - 7.0) / 12.0).cos();
    }
    let common = knobs.common_share.sqrt();
    let own = (1.0 - knobs.common_share).sqrt();
    let span = horizon.saturating_sub(1).max(1) as f64;
    for c in 0..3 {
        let monthly = knobs.volatility[c] / 12f64.sqrt();
        for t in 0..horizon {
            for s in t..horizon {
                let tau = (s - t) as f64;
                let vol = monthly * (knobs.long_vol_ratio + (1.0 - knobs.long_vol_ratio) * knobs.decay.powf(tau));
                let tilt = knobs.slope * (2.0 * tau / span - 1.0);
                let mut raw = [0.0; 8];
                raw[0] = common;
                raw[1] = common * tilt;
                raw[2 + 2 * c] = own;
                raw[3 + 2 * c] = own * tilt;
                let norm = raw.iter().map(|v| v * v).sum::<f64>().sqrt();
                for (dst, v) in data.loading_mut(c, t, s).iter_mut().zip(raw) {
                    *dst = vol * v / norm;
                }
            }
        }
    }
    Ok(data)
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EthanolParams {
    pub horizon: usize,
    /// Annualized risk-free rate; stages are months.
    pub rate: f64,
    #[serde(default)]
    pub costs: EthanolCosts,
    pub data: EthanolData,
}

impl EthanolParams {
    /// Parameters on data truncated or extended to `horizon`.
    pub fn new(horizon: usize, rate: f64, data: &EthanolData) -> Result<Self> {
        let data = if data.horizon == horizon { data.clone() } else { data.extend(horizon)? };
        let p = Self { horizon, rate, costs: EthanolCosts::default(), data };
        p.validate()?;
        Ok(p)
    }

    pub fn gamma(&self) -> f64 {
        (-self.rate / 12.0).exp()
    }

    pub fn validate(&self) -> Result<()> {
        self.data.validate()?;
        if self.data.horizon < self.horizon {
            return Err(Error::Malformed(format!("curves cover {} maturities, horizon is {}", self.data.horizon, self.horizon)));
        }
        if self.horizon == 0 || !(self.rate > 0.0) {
            return Err(invalid("ethanol horizon and rate must be positive"));
        }
        let c = &self.costs;
        if c.keep_mothballed >= c.suspend {
            return Err(invalid("mothball upkeep must be below the suspension cost"));
        }
        if [c.mothball, c.reactivate, c.produce, c.suspend, c.keep_mothballed, c.corn_rate, c.gas_rate, c.capacity]
            .iter()
            .any(|v| !(*v >= 0.0) || !v.is_finite())
        {
            return Err(invalid("ethanol costs must be finite and nonnegative"));
        }
        Ok(())
    }

    /// `(spot ethanol - corn_rate spot corn - gas_rate spot gas) capacity - produce`.
    pub fn production_margin(&self, corn: f64, gas: f64, ethanol: f64) -> f64 {
        let c = &self.costs;
        (ethanol - c.corn_rate * corn - c.gas_rate * gas) * c.capacity - c.produce
    }
}

/// Manifest naming the data files and parameters of one instance.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EthanolManifest {
    #[serde(default)]
    pub name: Option<String>,
    pub curves: PathBuf,
    pub loadings: PathBuf,
    pub horizon: usize,
    pub rate: f64,
    #[serde(default)]
    pub costs: EthanolCosts,
}

impl EthanolManifest {
    /// Reads the manifest and its data files, resolved against the manifest's directory.
    pub fn load(path: &Path) -> Result<(Self, EthanolParams)> {
        let text = std::fs::read_to_string(path)?;
        let manifest: Self = serde_json::from_str(&text)?;
        let dir = path.parent().unwrap_or(Path::new("."));
        let data = EthanolData::load(&dir.join(&manifest.curves), &dir.join(&manifest.loadings))?;
        let mut params = EthanolParams::new(manifest.horizon, manifest.rate, &data)?;
        params.costs = manifest.costs.clone();
        params.validate()?;
        Ok((manifest, params))
    }
}

struct Curves {
    horizon: usize,
    factors: usize,
    initial: Vec<f64>,
    /// Per stage `t`, the loading rows and `0.5 |eta|^2` of each surviving
    /// maturity, commodity-major.
    steps: Vec<Vec<(Vec<f64>, f64)>>,
}

impl ExogenousSimulator for Curves {
    fn initial(&self) -> Vec<f64> {
        self.initial.clone()
    }

    fn step(&self, t: usize, w: &[f64], rng: &mut dyn RngCore) -> Vec<f64> {
        let per = self.horizon - t;
        let z: Vec<f64> = (0..self.factors).map(|_| StandardNormal.sample(&mut *rng)).collect();
        let mut out = Vec::with_capacity(3 * (per - 1));
        let rows = &self.steps[t];
        for c in 0..3 {
            for k in 1..per {
                let (eta, half) = &rows[c * (per - 1) + k - 1];
                let shock: f64 = eta.iter().zip(&z).map(|(a, b)| a * b).sum();
                out.push(w[c * per + k] * (shock - half).exp());
            }
        }
        out
    }
}

struct EthanolRewards {
    params: EthanolParams,
}

impl RewardFn for EthanolRewards {
    fn reward(&self, _t: usize, x: usize, a: usize, w: &ExoPoint) -> f64 {
        let c = &self.params.costs;
        match (x, a) {
            (OPERATIONAL, PRODUCE) => {
                let per = w.values.len() / 3;
                self.params.production_margin(w.values[0], w.values[per], w.values[2 * per])
            }
            (OPERATIONAL, SUSPEND) => -c.suspend,
            (OPERATIONAL, MOTHBALL) => -c.mothball,
            (MOTHBALLED, MOTHBALL) => -c.keep_mothballed,
            (MOTHBALLED, REACTIVATE) => -c.reactivate,
            (OPERATIONAL, ABANDON) | (MOTHBALLED, ABANDON) => c.salvage,
            _ => 0.0,
        }
    }
}

/// Builds the merchant production instance. The exogenous state at stage `t`
/// concatenates the corn, gas and ethanol curves for maturities `t..T`.
pub fn build_ethanol(params: &EthanolParams) -> Result<MdpInstance> {
    params.validate()?;
    let horizon = params.horizon;
    let data = &params.data;
    let mut feasible = Vec::with_capacity(horizon);
    for t in 0..horizon {
        if t + 1 == horizon {
            feasible.push(vec![vec![ABANDON], vec![ABANDON], vec![ABANDON]]);
        } else {
            feasible.push(vec![vec![ABANDON, PRODUCE, SUSPEND, MOTHBALL], vec![ABANDON, MOTHBALL, REACTIVATE], vec![ABANDON]]);
        }
    }
    let o = Some(OPERATIONAL);
    let m = Some(MOTHBALLED);
    let a = Some(ABANDONED);
    let next = vec![vec![a, o, o, m, None], vec![a, None, None, m, o], vec![a, None, None, None, None]];
    let space = EndogenousSpace::new(
        vec!["O".into(), "M".into(), "A".into()],
        vec!["A".into(), "P".into(), "S".into(), "M".into(), "R".into()],
        feasible,
        next,
    )?;
    let mut initial = Vec::with_capacity(3 * horizon);
    for c in 0..3 {
        initial.extend_from_slice(&data.curves[c][..horizon]);
    }
    let steps = (0..horizon)
        .map(|t| {
            let mut rows = Vec::new();
            for c in 0..3 {
                for s in t + 1..horizon {
                    let eta = data.loading(c, t, s).to_vec();
                    let half = 0.5 * eta.iter().map(|v| v * v).sum::<f64>();
                    rows.push((eta, half));
                }
            }
            rows
        })
        .collect();
    let sim = Curves { horizon, factors: data.factors, initial, steps };
    MdpInstance::new(
        format!("ethanol-T{horizon}"),
        horizon,
        params.gamma(),
        space,
        OPERATIONAL,
        Arc::new(EthanolRewards { params: params.clone() }),
        ExogenousModel::Simulated(Arc::new(sim)),
    )
}

/// Constant, every forward price and `fourier` random features per operating
/// mode. One coefficient vector per feature is drawn over all `3T` maturities
/// and truncated to the curves still alive at each stage.
pub fn ethanol_basis(params: &EthanolParams, fourier: usize, rho: f64, lambda: f64, seed: u64) -> Result<BasisSet> {
    params.validate()?;
    if !(lambda > 0.0) {
        return Err(invalid(format!("price scale must be positive, got {lambda}")));
    }
    let horizon = params.horizon;
    let full = crate::bases::sample_fourier_with(
        &mut seed::stream(seed, Purpose::Basis, &[3 * horizon as u64]),
        rho,
        fourier,
        3 * horizon,
    )?;
    let thetas = (0..horizon)
        .map(|t| {
            let per = horizon - t;
            let rows = full
                .thetas
                .iter()
                .map(|th| {
                    let mut row = vec![th[0]];
                    for c in 0..3 {
                        row.extend_from_slice(&th[1 + c * horizon..1 + c * horizon + per]);
                    }
                    row
                })
                .collect();
            ThetaSet { rho, dim: 3 * per, thetas: rows }
        })
        .collect();
    let mut caps = [0.0; 3];
    for (c, cap) in caps.iter_mut().enumerate() {
        *cap = 2.0 * params.data.curves[c][..horizon].iter().copied().fold(0.0, f64::max);
    }
    Ok(BasisSet::Ethanol(EthanolBasis { horizon, lambda, price_caps: caps, thetas }))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn params(horizon: usize) -> EthanolParams {
        let data = synthetic_ethanol_data(24, &SyntheticCurves::default()).unwrap();
        EthanolParams::new(horizon, 0.003, &data).unwrap()
    }

    #[test]
    fn production_margin() {
        let p = params(24);
        assert!((p.production_margin(6.0, 4.0, 2.5) + 0.584).abs() < 1e-12);
    }

    #[test]
    fn pairs_and_transitions() {
        let inst = build_ethanol(&params(6)).unwrap();
        assert_eq!(inst.enumerate_pairs(2).len(), 8);
        assert_eq!(inst.enumerate_pairs(0).len(), 4);
        assert_eq!(inst.enumerate_pairs(5).len(), 3);
        assert_eq!(inst.endogenous_step(1, OPERATIONAL, MOTHBALL).unwrap(), MOTHBALLED);
        assert!(inst.endogenous_step(1, MOTHBALLED, PRODUCE).is_err());
        let w = inst.initial_point();
        assert!((inst.reward(0, MOTHBALLED, MOTHBALL, &w) + 0.02917).abs() < 1e-15);
        assert_eq!(inst.reward(0, ABANDONED, ABANDON, &w), 0.0);
    }

    #[test]
    fn curve_dimension_shrinks() {
        let inst = build_ethanol(&params(5)).unwrap();
        let path = inst.sample_path(3);
        for t in 0..5 {
            assert_eq!(path.at(t).values.len(), 3 * (5 - t));
        }
    }

    #[test]
    fn extension_repeats_second_year() {
        let data = synthetic_ethanol_data(24, &SyntheticCurves { start_month: 4, ..Default::default() }).unwrap();
        let long = data.extend(36).unwrap();
        for c in 0..3 {
            for s in 24..36 {
                assert_eq!(long.curves[c][s], data.curves[c][s - 12]);
                assert_eq!(long.loading(c, 20, s), data.loading(c, 8, s - 12));
            }
            assert_eq!(long.loading(c, 3, 10), data.loading(c, 3, 10));
        }
    }

    #[test]
    fn csv_round_trip() {
        let data = synthetic_ethanol_data(4, &SyntheticCurves::default()).unwrap();
        let (mut a, mut b) = (Vec::new(), Vec::new());
        data.write_csv(&mut a, &mut b).unwrap();
        let back = EthanolData::read_csv(a.as_slice(), b.as_slice()).unwrap();
        assert_eq!(back, data);
        assert!(EthanolData::read_csv("commodity,maturity,price\nbarley,0,1.0\n".as_bytes(), b.as_slice()).is_err());
    }
}
