//! Finite instance documents: emitting built-in fixtures and validating files.

use std::path::Path;

use serde::{Deserialize, Serialize};

use wtca::benches::{make_finite_fixture, FixtureSpec};
use wtca::mdp::{exact_value, FiniteMdpDoc, DEFAULT_STATE_CAP};

use crate::error::{CliError, CliResult};

/// Size options of `fixture emit`; each kind reads the fields it needs.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct FixtureOptions {
    pub horizon: usize,
    pub atoms: usize,
    pub states: usize,
    pub actions: usize,
    pub gamma: f64,
    pub payoff_scale: f64,
    pub seed: u64,
    pub rewards: Vec<f64>,
}

impl Default for FixtureOptions {
    fn default() -> Self {
        Self { horizon: 5, atoms: 4, states: 3, actions: 3, gamma: 0.95, payoff_scale: 0.05, seed: 0, rewards: vec![1.0, 1.0, 1.0] }
    }
}

pub const FIXTURE_KINDS: [&str; 5] = ["two_stage_stopping", "single_action", "stopping_chain", "switching", "random"];

pub fn fixture_spec(kind: &str, o: &FixtureOptions) -> CliResult<FixtureSpec> {
    Ok(match kind {
        "two_stage_stopping" => FixtureSpec::TwoStageStopping,
        "single_action" => FixtureSpec::SingleAction { gamma: o.gamma, rewards: o.rewards.clone() },
        "stopping_chain" => {
            FixtureSpec::StoppingChain { horizon: o.horizon, atoms: o.atoms, gamma: o.gamma, payoff_scale: o.payoff_scale, initial: None }
        }
        "switching" => FixtureSpec::Switching { horizon: o.horizon, atoms: o.atoms, gamma: o.gamma, seed: o.seed },
        "random" => FixtureSpec::Random {
            horizon: o.horizon,
            max_states: o.states,
            max_actions: o.actions,
            max_atoms: o.atoms,
            gamma: o.gamma,
            seed: o.seed,
        },
        _ => return Err(CliError::config(format!("unknown fixture kind '{kind}', expected one of {}", FIXTURE_KINDS.join(", ")))),
    })
}

/// The JSON document of a built-in fixture.
pub fn emit(spec: &FixtureSpec) -> CliResult<String> {
    let inst = make_finite_fixture(spec)?;
    Ok(FiniteMdpDoc::from_instance(&inst)?.to_json()?)
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Validation {
    pub name: String,
    pub horizon: usize,
    pub gamma: f64,
    pub value: f64,
}

/// Parses and builds a finite instance document and solves it exactly.
pub fn validate(path: &Path) -> CliResult<Validation> {
    let text = std::fs::read_to_string(path).map_err(|e| CliError::config(format!("{}: {e}", path.display())))?;
    let inst = FiniteMdpDoc::from_json(&text)
        .and_then(|d| d.to_instance())
        .map_err(|e| CliError::config(format!("{}: {e}", path.display())))?;
    let value = exact_value(&inst, DEFAULT_STATE_CAP)?.value;
    Ok(Validation { name: inst.name().to_string(), horizon: inst.horizon(), gamma: inst.gamma(), value })
}
