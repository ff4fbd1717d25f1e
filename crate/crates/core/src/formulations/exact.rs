use super::affine::{lse_gradient, AffineFamily};
use super::po::{po_gradient_from_tables, po_hard_value, po_marginals, po_soft_value_tables, po_tables};
use super::smoothing::hard_max;
use super::wtca::wtca_component;
use super::ObjectiveSpec;
use crate::bases::WeightMatrix;
use crate::error::{invalid, Result};
use crate::mdp::{enumerate_paths, stage_marginals};
use crate::seed::{self, Purpose, StreamFamily};

fn component_at(spec: &ObjectiveSpec, t: usize, atom: usize) -> Result<AffineFamily> {
    let chain = spec.instance.finite_chain().ok_or_else(|| invalid("exact objectives need a finite chain"))?;
    let mut unused = seed::stream(0, Purpose::Inner, &[]);
    Ok(wtca_component(spec, t, &chain.point(t, atom), &mut unused))
}

/// Exact WTCA objective and (sub)gradient on a finite chain; smoothed at the
/// spec's temperature or the hard maximum.
pub fn exact_wtca(spec: &ObjectiveSpec, beta: &WeightMatrix<f64>, smoothed: bool) -> Result<(f64, WeightMatrix<f64>)> {
    beta.check_layout(&spec.layout())?;
    let marg = stage_marginals(&spec.instance)?;
    let mut value = 0.0;
    let mut grad = WeightMatrix::zeros(&spec.layout());
    for (t, q) in marg.iter().enumerate() {
        for (i, &p) in q.iter().enumerate() {
            if p <= 0.0 {
                continue;
            }
            let fam = component_at(spec, t, i)?;
            if smoothed {
                value += p * super::affine::lse(&fam, beta, spec.sigma)?;
                for (b, g) in lse_gradient(&fam, beta, spec.sigma)? {
                    for (o, v) in grad.block_mut(b).iter_mut().zip(&g) {
                        *o += p * v;
                    }
                }
            } else {
                let (m, u) = hard_max(&fam.values(beta));
                value += p * fam.scale * m;
                for (b, s) in &fam.terms[u].slices {
                    for (o, v) in grad.block_mut(*b).iter_mut().zip(s) {
                        *o += p * fam.scale * v;
                    }
                }
            }
        }
    }
    Ok((value, grad))
}

/// Exact PO objective on a finite chain by path enumeration, with the smoothed
/// gradient (zero when `smoothed` is false).
pub fn exact_po(spec: &ObjectiveSpec, beta: &WeightMatrix<f64>, smoothed: bool) -> Result<(f64, WeightMatrix<f64>)> {
    let paths = enumerate_paths(&spec.instance, 1_000_000)?;
    let unused = StreamFamily::new(0, Purpose::Dual, &[]);
    let mut value = 0.0;
    let mut grad = WeightMatrix::zeros(&spec.layout());
    for wp in &paths {
        let tables = po_tables(&spec.instance, &spec.basis, beta, &wp.path, 1, &unused)?;
        if smoothed {
            value += wp.probability * po_soft_value_tables(&tables, spec.sigma);
            let marg = po_marginals(&tables, spec.sigma);
            let mut g = WeightMatrix::zeros(&spec.layout());
            po_gradient_from_tables(&tables, &marg, &mut g);
            grad.axpy(wp.probability, &g);
        } else {
            value += wp.probability * po_hard_value(&tables);
        }
    }
    Ok((value, grad))
}
