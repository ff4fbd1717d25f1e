//! Weakly time-coupled approximations for finite-horizon MDPs.
//!
//! The crate fits linear value-function approximations `V_t = beta_t . phi_t`
//! by minimizing smoothed WTCA or pathwise (PO) objectives with a parallel
//! stochastic block coordinate method, fits least squares Monte Carlo as a
//! baseline, and estimates greedy-policy lower bounds and information
//! relaxation upper bounds.
//!
//! Kernels, weight storage and the solver are generic over [`Real`]; the
//! aliases below fix the scalar to `f64`.

// `!(x > 0.0)` is deliberate: NaN must fail positivity checks
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod bases;
pub mod benches;
pub mod bounds;
pub mod error;
pub mod formulations;
pub mod mdp;
pub mod scalar;
pub mod seed;
pub mod solver;

pub use error::{Error, Result};
pub use scalar::Real;

pub use bases::{BasisSet, ThetaSet};
pub use bounds::{BoundEstimate, PolicySpec};
pub use formulations::{CurvatureWeights, Formulation, ObjectiveSpec};
pub use mdp::{ExoPoint, ExogenousModel, ExogenousPath, MdpInstance};
pub use solver::{BlockPartition, SolverOutput, SolverTrace};

pub type Weights = bases::WeightMatrix<f64>;
pub type Weights32 = bases::WeightMatrix<f32>;
pub type SolverConfig = solver::SolverConfig<f64>;
