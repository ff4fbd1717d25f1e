//! Finite-horizon MDPs with deterministic endogenous transitions and an
//! action-independent exogenous Markov process.

mod exact;
mod finite;

use std::sync::Arc;

use rand::Rng;
use rand::RngCore;

use crate::error::{invalid, Error, Result};
use crate::seed::{self, Purpose, Stream};

pub use exact::{enumerate_paths, exact_value, stage_marginals, ExactSolution, WeightedPath, DEFAULT_STATE_CAP};
pub use finite::{FiniteAction, FiniteMdpDoc, FiniteStage, FiniteState, TableRewards};

/// Endogenous labels, state-dependent action sets and the transition map `h`.
#[derive(Clone, Debug)]
pub struct EndogenousSpace {
    state_labels: Vec<String>,
    action_labels: Vec<String>,
    /// `feasible[t][x]` lists action ids in enumeration order.
    feasible: Vec<Vec<Vec<usize>>>,
    /// `next[x][a]`, `None` when `a` is never feasible at `x`.
    next: Vec<Vec<Option<usize>>>,
}

impl EndogenousSpace {
    /// `feasible[t][x]` gives action ids per stage; `next[x][a]` the successor.
    pub fn new(
        state_labels: Vec<String>,
        action_labels: Vec<String>,
        feasible: Vec<Vec<Vec<usize>>>,
        next: Vec<Vec<Option<usize>>>,
    ) -> Result<Self> {
        let nx = state_labels.len();
        let na = action_labels.len();
        if nx == 0 || na == 0 {
            return Err(invalid("endogenous space needs at least one state and one action"));
        }
        if next.len() != nx || next.iter().any(|row| row.len() != na) {
            return Err(Error::ShapeMismatch("transition table must be |X| x |A|".into()));
        }
        for (t, stage) in feasible.iter().enumerate() {
            if stage.len() != nx {
                return Err(Error::ShapeMismatch(format!("stage {t}: feasibility lists one entry per state")));
            }
            for (x, acts) in stage.iter().enumerate() {
                for &a in acts {
                    match next[x].get(a) {
                        Some(Some(nx2)) if *nx2 < nx => {}
                        _ => return Err(invalid(format!("stage {t}: action {a} at state {x} has no successor"))),
                    }
                }
            }
        }
        Ok(Self { state_labels, action_labels, feasible, next })
    }

    /// Same feasibility at every stage.
    pub fn stationary(
        state_labels: Vec<String>,
        action_labels: Vec<String>,
        feasible: Vec<Vec<usize>>,
        next: Vec<Vec<Option<usize>>>,
        horizon: usize,
    ) -> Result<Self> {
        Self::new(state_labels, action_labels, vec![feasible; horizon], next)
    }

    pub fn num_states(&self) -> usize {
        self.state_labels.len()
    }

    pub fn num_actions(&self) -> usize {
        self.action_labels.len()
    }

    pub fn state_label(&self, x: usize) -> &str {
        &self.state_labels[x]
    }

    pub fn action_label(&self, a: usize) -> &str {
        &self.action_labels[a]
    }

    pub fn state_index(&self, label: &str) -> Option<usize> {
        self.state_labels.iter().position(|l| l == label)
    }

    pub fn action_index(&self, label: &str) -> Option<usize> {
        self.action_labels.iter().position(|l| l == label)
    }

    pub fn feasible(&self, t: usize, x: usize) -> &[usize] {
        &self.feasible[t][x]
    }

    pub fn is_feasible(&self, t: usize, x: usize, a: usize) -> bool {
        self.feasible.get(t).and_then(|s| s.get(x)).is_some_and(|acts| acts.contains(&a))
    }

    /// `h(x, a)` without a feasibility check.
    pub fn successor(&self, x: usize, a: usize) -> usize {
        self.next[x][a].expect("successor of a feasible pair")
    }
}

/// An exogenous state: its coordinates and, on finite chains, the atom index.
#[derive(Clone, Debug, PartialEq)]
pub struct ExoPoint {
    pub values: Vec<f64>,
    pub atom: Option<usize>,
}

impl ExoPoint {
    pub fn continuous(values: Vec<f64>) -> Self {
        Self { values, atom: None }
    }
}

/// `w_0, ..., w_{T-1}`.
#[derive(Clone, Debug, PartialEq)]
pub struct ExogenousPath {
    pub points: Vec<ExoPoint>,
}

impl ExogenousPath {
    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    pub fn at(&self, t: usize) -> &ExoPoint {
        &self.points[t]
    }
}

/// Simulator of a continuous exogenous process.
pub trait ExogenousSimulator: Send + Sync {
    fn initial(&self) -> Vec<f64>;

    /// Draws `w_{t+1}` given `w_t`.
    fn step(&self, t: usize, w: &[f64], rng: &mut dyn RngCore) -> Vec<f64>;
}

/// Stage-indexed discrete Markov chain.
#[derive(Clone, Debug)]
pub struct FiniteChain {
    atoms: Vec<Vec<Vec<f64>>>,
    transitions: Vec<Vec<Vec<f64>>>,
    initial: usize,
}

impl FiniteChain {
    /// `atoms[t][i]` are the support points and `transitions[t]` maps stage `t`
    /// to stage `t + 1` (one fewer matrix than stages).
    pub fn new(atoms: Vec<Vec<Vec<f64>>>, transitions: Vec<Vec<Vec<f64>>>, initial: usize) -> Result<Self> {
        if atoms.is_empty() {
            return Err(invalid("finite chain needs at least one stage"));
        }
        if transitions.len() + 1 != atoms.len() {
            return Err(Error::ShapeMismatch(format!(
                "{} stages need {} transition matrices, got {}",
                atoms.len(),
                atoms.len() - 1,
                transitions.len()
            )));
        }
        if initial >= atoms[0].len() {
            return Err(invalid(format!("initial atom {initial} out of range")));
        }
        for (t, p) in transitions.iter().enumerate() {
            if p.len() != atoms[t].len() {
                return Err(Error::ShapeMismatch(format!("transition {t} has {} rows", p.len())));
            }
            for (i, row) in p.iter().enumerate() {
                if row.len() != atoms[t + 1].len() {
                    return Err(Error::ShapeMismatch(format!("transition {t} row {i} has {} columns", row.len())));
                }
                if row.iter().any(|&q| !(q >= 0.0) || !q.is_finite()) {
                    return Err(invalid(format!("transition {t} row {i} has a negative or non-finite entry")));
                }
                let s: f64 = row.iter().sum();
                if (s - 1.0).abs() > 1e-12 {
                    return Err(invalid(format!("transition {t} row {i} sums to {s}")));
                }
            }
        }
        Ok(Self { atoms, transitions, initial })
    }

    pub fn stages(&self) -> usize {
        self.atoms.len()
    }

    pub fn num_atoms(&self, t: usize) -> usize {
        self.atoms[t].len()
    }

    pub fn atom(&self, t: usize, i: usize) -> &[f64] {
        &self.atoms[t][i]
    }

    pub fn point(&self, t: usize, i: usize) -> ExoPoint {
        ExoPoint { values: self.atoms[t][i].clone(), atom: Some(i) }
    }

    /// Row `i` of the stage-`t` transition matrix.
    pub fn row(&self, t: usize, i: usize) -> &[f64] {
        &self.transitions[t][i]
    }

    pub fn initial(&self) -> usize {
        self.initial
    }

    pub fn atoms(&self) -> &[Vec<Vec<f64>>] {
        &self.atoms
    }

    pub fn transitions(&self) -> &[Vec<Vec<f64>>] {
        &self.transitions
    }

    fn sample_next(&self, t: usize, i: usize, u: f64) -> usize {
        let row = &self.transitions[t][i];
        let mut acc = 0.0;
        let mut last = 0;
        for (j, &q) in row.iter().enumerate() {
            if q > 0.0 {
                last = j;
                acc += q;
                if u < acc {
                    return j;
                }
            }
        }
        last
    }
}

#[derive(Clone)]
pub enum ExogenousModel {
    Simulated(Arc<dyn ExogenousSimulator>),
    Finite(FiniteChain),
}

impl std::fmt::Debug for ExogenousModel {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            ExogenousModel::Simulated(_) => f.write_str("Simulated"),
            ExogenousModel::Finite(c) => f.debug_tuple("Finite").field(c).finish(),
        }
    }
}

/// Reward function `r_t(x, w, a)`.
pub trait RewardFn: Send + Sync {
    fn reward(&self, t: usize, x: usize, a: usize, w: &ExoPoint) -> f64;
}

/// Weighted next-stage exogenous states used to form `E[. | w_t]`.
#[derive(Clone, Debug, Default)]
pub struct NextStates {
    pub points: Vec<ExoPoint>,
    pub weights: Vec<f64>,
}

impl NextStates {
    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }
}

#[derive(Clone)]
pub struct MdpInstance {
    name: String,
    horizon: usize,
    gamma: f64,
    endogenous: EndogenousSpace,
    x0: usize,
    rewards: Arc<dyn RewardFn>,
    exogenous: ExogenousModel,
}

impl std::fmt::Debug for MdpInstance {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("MdpInstance")
            .field("name", &self.name)
            .field("horizon", &self.horizon)
            .field("gamma", &self.gamma)
            .field("x0", &self.x0)
            .finish_non_exhaustive()
    }
}

impl MdpInstance {
    pub fn new(
        name: impl Into<String>,
        horizon: usize,
        gamma: f64,
        endogenous: EndogenousSpace,
        x0: usize,
        rewards: Arc<dyn RewardFn>,
        exogenous: ExogenousModel,
    ) -> Result<Self> {
        if horizon == 0 {
            return Err(invalid("horizon must be positive"));
        }
        let unit_ok = matches!(exogenous, ExogenousModel::Finite(_));
        if !(gamma > 0.0 && (gamma < 1.0 || (unit_ok && gamma == 1.0))) {
            return Err(invalid(format!("discount {gamma} must lie strictly inside (0,1)")));
        }
        if endogenous.feasible.len() != horizon {
            return Err(Error::ShapeMismatch(format!(
                "feasibility given for {} stages, horizon is {horizon}",
                endogenous.feasible.len()
            )));
        }
        if x0 >= endogenous.num_states() {
            return Err(invalid(format!("initial endogenous state {x0} out of range")));
        }
        if let ExogenousModel::Finite(chain) = &exogenous {
            if chain.stages() != horizon {
                return Err(Error::ShapeMismatch(format!(
                    "finite chain has {} stages, horizon is {horizon}",
                    chain.stages()
                )));
            }
        }
        let inst = Self { name: name.into(), horizon, gamma, endogenous, x0, rewards, exogenous };
        for (t, x) in inst.reachable_states() {
            if inst.endogenous.feasible(t, x).is_empty() {
                return Err(invalid(format!("no feasible action at reachable state {x} of stage {t}")));
            }
        }
        Ok(inst)
    }

    pub fn name(&self) -> &str {
        &self.name
    }

    pub fn horizon(&self) -> usize {
        self.horizon
    }

    pub fn gamma(&self) -> f64 {
        self.gamma
    }

    pub fn endogenous(&self) -> &EndogenousSpace {
        &self.endogenous
    }

    pub fn initial_state(&self) -> usize {
        self.x0
    }

    pub fn exogenous(&self) -> &ExogenousModel {
        &self.exogenous
    }

    pub fn finite_chain(&self) -> Option<&FiniteChain> {
        match &self.exogenous {
            ExogenousModel::Finite(c) => Some(c),
            ExogenousModel::Simulated(_) => None,
        }
    }

    pub fn with_gamma(&self, gamma: f64) -> Result<Self> {
        Self::new(
            self.name.clone(),
            self.horizon,
            gamma,
            self.endogenous.clone(),
            self.x0,
            self.rewards.clone(),
            self.exogenous.clone(),
        )
    }

    pub fn reward(&self, t: usize, x: usize, a: usize, w: &ExoPoint) -> f64 {
        self.rewards.reward(t, x, a, w)
    }

    pub fn initial_point(&self) -> ExoPoint {
        match &self.exogenous {
            ExogenousModel::Simulated(sim) => ExoPoint::continuous(sim.initial()),
            ExogenousModel::Finite(c) => c.point(0, c.initial()),
        }
    }

    /// `h(x, a)`, rejecting infeasible actions.
    pub fn endogenous_step(&self, t: usize, x: usize, a: usize) -> Result<usize> {
        if t >= self.horizon || !self.endogenous.is_feasible(t, x, a) {
            return Err(Error::Infeasible { stage: t, state: x, action: a });
        }
        Ok(self.endogenous.successor(x, a))
    }

    /// The ordered pair set `U_t`: feasible `(x, a)` by state then action;
    /// only `x_0` at stage 0.
    pub fn enumerate_pairs(&self, t: usize) -> Vec<(usize, usize)> {
        let states: Vec<usize> = if t == 0 { vec![self.x0] } else { (0..self.endogenous.num_states()).collect() };
        let mut out = Vec::new();
        for x in states {
            for &a in self.endogenous.feasible(t, x) {
                out.push((x, a));
            }
        }
        out
    }

    /// Endogenous states considered at stage `t`.
    pub fn stage_states(&self, t: usize) -> Vec<usize> {
        if t == 0 {
            vec![self.x0]
        } else {
            (0..self.endogenous.num_states()).filter(|&x| !self.endogenous.feasible(t, x).is_empty()).collect()
        }
    }

    /// `(t, x)` reachable from `x_0`.
    pub fn reachable_states(&self) -> Vec<(usize, usize)> {
        let nx = self.endogenous.num_states();
        let mut out = Vec::new();
        let mut cur = vec![false; nx];
        cur[self.x0] = true;
        for t in 0..self.horizon {
            let mut nxt = vec![false; nx];
            for x in 0..nx {
                if !cur[x] {
                    continue;
                }
                out.push((t, x));
                for &a in self.endogenous.feasible(t, x) {
                    nxt[self.endogenous.successor(x, a)] = true;
                }
            }
            cur = nxt;
        }
        out
    }

    /// Number of feasible action sequences from `x_0`.
    pub fn count_action_sequences(&self) -> f64 {
        let nx = self.endogenous.num_states();
        let mut count = vec![1.0f64; nx];
        for t in (0..self.horizon).rev() {
            let mut prev = vec![0.0f64; nx];
            for (x, slot) in prev.iter_mut().enumerate() {
                *slot = self.endogenous.feasible(t, x).iter().map(|&a| count[self.endogenous.successor(x, a)]).sum();
            }
            count = prev;
        }
        count[self.x0]
    }

    /// Draws `w_{t+1}` from `w_t`.
    pub fn step_exogenous<R: Rng + ?Sized>(&self, t: usize, w: &ExoPoint, rng: &mut R) -> ExoPoint {
        match &self.exogenous {
            ExogenousModel::Simulated(sim) => {
                let mut adapter = RngAdapter(rng);
                ExoPoint::continuous(sim.step(t, &w.values, &mut adapter))
            }
            ExogenousModel::Finite(c) => {
                let i = w.atom.expect("finite chain points carry an atom index");
                let u: f64 = rng.random();
                c.point(t + 1, c.sample_next(t, i, u))
            }
        }
    }

    /// Next-stage states for conditional expectations at stage `t`: the exact
    /// atoms on finite chains, otherwise `m` equally weighted draws. Empty at
    /// the last stage.
    pub fn next_states(&self, t: usize, w: &ExoPoint, m: usize, rng: &mut Stream) -> NextStates {
        if t + 1 >= self.horizon {
            return NextStates::default();
        }
        match &self.exogenous {
            ExogenousModel::Finite(c) => {
                let i = w.atom.expect("finite chain points carry an atom index");
                let mut out = NextStates::default();
                for (j, &q) in c.row(t, i).iter().enumerate() {
                    if q > 0.0 {
                        out.points.push(c.point(t + 1, j));
                        out.weights.push(q);
                    }
                }
                out
            }
            ExogenousModel::Simulated(_) => {
                let m = m.max(1);
                let points: Vec<ExoPoint> = (0..m).map(|_| self.step_exogenous(t, w, rng)).collect();
                NextStates { points, weights: vec![1.0 / m as f64; m] }
            }
        }
    }

    pub fn sample_path_with<R: Rng + ?Sized>(&self, rng: &mut R) -> ExogenousPath {
        let mut points = Vec::with_capacity(self.horizon);
        points.push(self.initial_point());
        for t in 0..self.horizon - 1 {
            let next = self.step_exogenous(t, &points[t], rng);
            points.push(next);
        }
        ExogenousPath { points }
    }

    /// Path drawn from the `Path` substream of `seed`.
    pub fn sample_path(&self, seed: u64) -> ExogenousPath {
        self.sample_path_with(&mut seed::stream(seed, Purpose::Path, &[]))
    }
}

struct RngAdapter<'a, R: ?Sized>(&'a mut R);

impl<R: RngCore + ?Sized> RngCore for RngAdapter<'_, R> {
    fn next_u32(&mut self) -> u32 {
        self.0.next_u32()
    }

    fn next_u64(&mut self) -> u64 {
        self.0.next_u64()
    }

    fn fill_bytes(&mut self, dst: &mut [u8]) {
        self.0.fill_bytes(dst)
    }
}
