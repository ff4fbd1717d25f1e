use super::Oracle;
use crate::bases::WeightMatrix;
use crate::error::Result;
use crate::formulations::{po_gradient_from_tables, po_marginals, po_soft_value_tables, po_tables, wtca_gradient_into, ObjectiveSpec};
use crate::mdp::ExogenousPath;
use crate::seed::{self, Purpose, StreamFamily};

fn draw(spec: &ObjectiveSpec, sample_seed: u64) -> (ExogenousPath, StreamFamily) {
    let path = spec.instance.sample_path_with(&mut seed::stream(sample_seed, Purpose::Path, &[]));
    (path, StreamFamily::new(sample_seed, Purpose::Inner, &[]))
}

/// Smoothed WTCA objective; each block gradient touches only components `t - 1` and `t`.
#[derive(Clone, Debug)]
pub struct WtcaOracle {
    pub spec: ObjectiveSpec,
}

impl Oracle<f64> for WtcaOracle {
    fn layout(&self) -> Vec<usize> {
        self.spec.layout()
    }

    fn gradient(&self, beta: &WeightMatrix<f64>, blocks: &[usize], sample_seed: u64, out: &mut WeightMatrix<f64>) -> Result<Option<f64>> {
        let (path, inner) = draw(&self.spec, sample_seed);
        let all = blocks.len() == self.spec.instance.horizon();
        let v = wtca_gradient_into(&self.spec, beta, &path, &inner, if all { None } else { Some(blocks) }, out)?;
        Ok(all.then_some(v))
    }

    fn objective(&self, beta: &WeightMatrix<f64>, sample_seed: u64) -> Result<f64> {
        let (path, inner) = draw(&self.spec, sample_seed);
        let mut scratch = WeightMatrix::zeros(&self.spec.layout());
        wtca_gradient_into(&self.spec, beta, &path, &inner, None, &mut scratch)
    }
}

/// Smoothed PO objective; one component over every block.
#[derive(Clone, Debug)]
pub struct PoOracle {
    pub spec: ObjectiveSpec,
}

impl Oracle<f64> for PoOracle {
    fn layout(&self) -> Vec<usize> {
        self.spec.layout()
    }

    fn gradient(&self, beta: &WeightMatrix<f64>, blocks: &[usize], sample_seed: u64, out: &mut WeightMatrix<f64>) -> Result<Option<f64>> {
        let (path, inner) = draw(&self.spec, sample_seed);
        let tables = po_tables(&self.spec.instance, &self.spec.basis, beta, &path, self.spec.inner_samples, &inner)?;
        let marg = po_marginals(&tables, self.spec.sigma);
        let mut g = WeightMatrix::zeros(&self.spec.layout());
        po_gradient_from_tables(&tables, &marg, &mut g);
        for &b in blocks {
            for (o, v) in out.block_mut(b).iter_mut().zip(g.block(b)) {
                *o += v;
            }
        }
        Ok(Some(po_soft_value_tables(&tables, self.spec.sigma)))
    }

    fn objective(&self, beta: &WeightMatrix<f64>, sample_seed: u64) -> Result<f64> {
        let (path, inner) = draw(&self.spec, sample_seed);
        let tables = po_tables(&self.spec.instance, &self.spec.basis, beta, &path, self.spec.inner_samples, &inner)?;
        Ok(po_soft_value_tables(&tables, self.spec.sigma))
    }
}
