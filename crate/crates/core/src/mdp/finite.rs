use std::sync::Arc;

use serde::{Deserialize, Serialize};

use super::{EndogenousSpace, ExoPoint, ExogenousModel, FiniteChain, MdpInstance, RewardFn};
use crate::error::{invalid, Error, Result};

/// Reward table `r[t][x][a][atom]`; a row of length one applies to every atom.
#[derive(Clone, Debug)]
pub struct TableRewards {
    table: Vec<Vec<Vec<Vec<f64>>>>,
}

impl TableRewards {
    pub fn new(table: Vec<Vec<Vec<Vec<f64>>>>) -> Self {
        Self { table }
    }

    pub fn constant(horizon: usize, states: usize, actions: usize, value: f64) -> Self {
        Self { table: vec![vec![vec![vec![value]; actions]; states]; horizon] }
    }
}

impl RewardFn for TableRewards {
    fn reward(&self, t: usize, x: usize, a: usize, w: &ExoPoint) -> f64 {
        let row = &self.table[t][x][a];
        if row.len() == 1 {
            row[0]
        } else {
            row[w.atom.expect("table rewards need atom-indexed points")]
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct FiniteStage {
    pub atoms: Vec<Vec<f64>>,
    /// Row-stochastic map to the next stage; empty at the last stage.
    #[serde(default)]
    pub transition: Vec<Vec<f64>>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct FiniteAction {
    pub label: String,
    pub next: String,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct FiniteState {
    pub label: String,
    pub actions: Vec<FiniteAction>,
}

/// JSON form of a finite-support instance.
///
/// `rewards[t][x][k][atom]` is indexed by the `k`-th action listed for state `x`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct FiniteMdpDoc {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub name: Option<String>,
    #[serde(rename = "T")]
    pub horizon: usize,
    pub gamma: f64,
    pub stages: Vec<FiniteStage>,
    pub endogenous: Vec<FiniteState>,
    #[serde(default)]
    pub initial_state: usize,
    #[serde(default)]
    pub initial_atom: usize,
    pub rewards: Vec<Vec<Vec<Vec<f64>>>>,
}

impl FiniteMdpDoc {
    pub fn from_json(text: &str) -> Result<Self> {
        Ok(serde_json::from_str(text)?)
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }

    pub fn to_instance(&self) -> Result<MdpInstance> {
        let t_len = self.horizon;
        if self.stages.len() != t_len {
            return Err(Error::ShapeMismatch(format!("{} stages listed for T = {t_len}", self.stages.len())));
        }
        let state_labels: Vec<String> = self.endogenous.iter().map(|s| s.label.clone()).collect();
        let mut action_labels: Vec<String> = Vec::new();
        for s in &self.endogenous {
            for a in &s.actions {
                if !action_labels.contains(&a.label) {
                    action_labels.push(a.label.clone());
                }
            }
        }
        let nx = state_labels.len();
        let na = action_labels.len();
        let mut next = vec![vec![None; na]; nx];
        let mut feasible = vec![Vec::new(); nx];
        for (x, s) in self.endogenous.iter().enumerate() {
            for a in &s.actions {
                let ai = action_labels.iter().position(|l| *l == a.label).unwrap();
                let to = state_labels
                    .iter()
                    .position(|l| *l == a.next)
                    .ok_or_else(|| invalid(format!("unknown successor state '{}'", a.next)))?;
                if next[x][ai].is_some() {
                    return Err(invalid(format!("state '{}' lists action '{}' twice", s.label, a.label)));
                }
                next[x][ai] = Some(to);
                feasible[x].push(ai);
            }
        }
        let space = EndogenousSpace::stationary(state_labels, action_labels, feasible.clone(), next, t_len)?;

        let atoms: Vec<Vec<Vec<f64>>> = self.stages.iter().map(|s| s.atoms.clone()).collect();
        let transitions: Vec<Vec<Vec<f64>>> =
            self.stages.iter().take(t_len.saturating_sub(1)).map(|s| s.transition.clone()).collect();
        let chain = FiniteChain::new(atoms, transitions, self.initial_atom)?;

        if self.rewards.len() != t_len {
            return Err(Error::ShapeMismatch(format!("rewards list {} stages", self.rewards.len())));
        }
        let mut table = vec![vec![vec![vec![0.0]; na]; nx]; t_len];
        for t in 0..t_len {
            if self.rewards[t].len() != nx {
                return Err(Error::ShapeMismatch(format!("stage {t}: rewards list {} states", self.rewards[t].len())));
            }
            for x in 0..nx {
                let row = &self.rewards[t][x];
                if row.len() != feasible[x].len() {
                    return Err(Error::ShapeMismatch(format!("stage {t} state {x}: rewards list {} actions", row.len())));
                }
                for (k, &a) in feasible[x].iter().enumerate() {
                    let r = &row[k];
                    if r.len() != 1 && r.len() != chain.num_atoms(t) {
                        return Err(Error::ShapeMismatch(format!(
                            "stage {t} state {x} action {k}: {} rewards for {} atoms",
                            r.len(),
                            chain.num_atoms(t)
                        )));
                    }
                    table[t][x][a] = r.clone();
                }
            }
        }
        MdpInstance::new(
            self.name.clone().unwrap_or_else(|| "finite".into()),
            t_len,
            self.gamma,
            space,
            self.initial_state,
            Arc::new(TableRewards::new(table)),
            ExogenousModel::Finite(chain),
        )
    }

    /// Serializes a finite-chain instance whose action sets do not vary by stage.
    pub fn from_instance(inst: &MdpInstance) -> Result<Self> {
        let chain = inst.finite_chain().ok_or_else(|| invalid("instance has no finite exogenous chain"))?;
        let space = inst.endogenous();
        let t_len = inst.horizon();
        let nx = space.num_states();
        for t in 1..t_len {
            for x in 0..nx {
                if space.feasible(t, x) != space.feasible(0, x) {
                    return Err(invalid("action sets vary by stage; the JSON form needs stationary sets"));
                }
            }
        }
        let endogenous = (0..nx)
            .map(|x| FiniteState {
                label: space.state_label(x).to_string(),
                actions: space
                    .feasible(0, x)
                    .iter()
                    .map(|&a| FiniteAction {
                        label: space.action_label(a).to_string(),
                        next: space.state_label(space.successor(x, a)).to_string(),
                    })
                    .collect(),
            })
            .collect();
        let stages = (0..t_len)
            .map(|t| FiniteStage {
                atoms: chain.atoms()[t].clone(),
                transition: if t + 1 < t_len { chain.transitions()[t].clone() } else { Vec::new() },
            })
            .collect();
        let rewards = (0..t_len)
            .map(|t| {
                (0..nx)
                    .map(|x| {
                        space
                            .feasible(0, x)
                            .iter()
                            .map(|&a| (0..chain.num_atoms(t)).map(|i| inst.reward(t, x, a, &chain.point(t, i))).collect())
                            .collect()
                    })
                    .collect()
            })
            .collect();
        Ok(Self {
            name: Some(inst.name().to_string()),
            horizon: t_len,
            gamma: inst.gamma(),
            stages,
            endogenous,
            initial_state: inst.initial_state(),
            initial_atom: chain.initial(),
            rewards,
        })
    }
}
