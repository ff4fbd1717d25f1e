//! WTCA and PO objectives as smoothed max-of-affine families, their values,
//! stochastic gradients and ESO curvature weights.

mod affine;
mod curvature;
mod exact;
mod po;
pub mod smoothing;
mod wtca;

use std::sync::Arc;

use serde::{Deserialize, Serialize};

pub use affine::{lse, lse_accumulate, lse_gradient, lse_weights, AffineFamily, AffineTerm};
pub use curvature::{
    curvature, curvature_from_lipschitz, estimate_wtca_lipschitz, CurvatureProvenance, CurvatureWeights,
};
pub use exact::{exact_po, exact_wtca};
pub use po::{
    po_exact_inner, po_gradient_from_tables, po_hard_value, po_hard_values, po_marginals, po_soft_value, po_soft_value_tables,
    po_stochastic_gradient, po_tables, PoStage, PoTables,
};
pub use wtca::{hard_delta, wtca_component, wtca_components_for_blocks, wtca_gradient_into, wtca_stochastic_gradient};

use crate::bases::BasisSet;
use crate::error::{invalid, Result};
use crate::mdp::MdpInstance;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Formulation {
    Wtca,
    Po,
}

pub const DEFAULT_INNER_SAMPLES: usize = 100;
pub const DEFAULT_RADIUS: f64 = 1e4;

/// A smoothed objective: formulation, temperature, basis, instance, training
/// inner-sample count and box radius.
#[derive(Clone, Debug)]
pub struct ObjectiveSpec {
    pub formulation: Formulation,
    pub sigma: f64,
    pub basis: Arc<BasisSet>,
    pub instance: Arc<MdpInstance>,
    pub inner_samples: usize,
    pub radius: f64,
}

impl ObjectiveSpec {
    pub fn new(
        formulation: Formulation,
        sigma: f64,
        basis: Arc<BasisSet>,
        instance: Arc<MdpInstance>,
        inner_samples: usize,
        radius: f64,
    ) -> Result<Self> {
        if !(sigma > 0.0) || !sigma.is_finite() {
            return Err(invalid(format!("smoothing parameter must be positive, got {sigma}")));
        }
        if !(radius > 0.0) {
            return Err(invalid(format!("box radius must be positive, got {radius}")));
        }
        if inner_samples == 0 {
            return Err(invalid("inner sample count must be at least one"));
        }
        basis.check(&instance)?;
        Ok(Self { formulation, sigma, basis, instance, inner_samples, radius })
    }

    pub fn layout(&self) -> Vec<usize> {
        self.basis.layout()
    }
}
