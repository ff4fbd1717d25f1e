//! The Bermudan option and ethanol production benchmarks, plus small
//! finite-support fixtures with exact solutions.

pub mod bermudan;
pub mod ethanol;

pub use bermudan::{bermudan_basis, build_bermudan, BermudanParams};
pub use ethanol::{
    build_ethanol, ethanol_basis, synthetic_ethanol_data, EthanolCosts, EthanolData, EthanolManifest, EthanolParams,
    SyntheticCurves,
};
pub use fixtures::{indicator_basis, make_finite_fixture, random_tabulated_basis, FixtureSpec};
