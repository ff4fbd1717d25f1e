use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::scalar::Real;

/// Stage-blocked weights `beta = (beta_0, ..., beta_{T-1})`, stored contiguously.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct WeightMatrix<F> {
    offsets: Vec<usize>,
    data: Vec<F>,
}

impl<F: Real> WeightMatrix<F> {
    pub fn zeros(layout: &[usize]) -> Self {
        let mut offsets = Vec::with_capacity(layout.len() + 1);
        let mut acc = 0;
        offsets.push(0);
        for &b in layout {
            acc += b;
            offsets.push(acc);
        }
        Self { offsets, data: vec![F::zero(); acc] }
    }

    pub fn from_blocks(blocks: Vec<Vec<F>>) -> Self {
        let layout: Vec<usize> = blocks.iter().map(Vec::len).collect();
        let mut w = Self::zeros(&layout);
        for (t, b) in blocks.into_iter().enumerate() {
            w.block_mut(t).copy_from_slice(&b);
        }
        w
    }

    pub fn num_blocks(&self) -> usize {
        self.offsets.len() - 1
    }

    pub fn layout(&self) -> Vec<usize> {
        self.offsets.windows(2).map(|w| w[1] - w[0]).collect()
    }

    pub fn block_len(&self, t: usize) -> usize {
        self.offsets[t + 1] - self.offsets[t]
    }

    pub fn block(&self, t: usize) -> &[F] {
        &self.data[self.offsets[t]..self.offsets[t + 1]]
    }

    pub fn block_mut(&mut self, t: usize) -> &mut [F] {
        let (a, b) = (self.offsets[t], self.offsets[t + 1]);
        &mut self.data[a..b]
    }

    pub fn as_slice(&self) -> &[F] {
        &self.data
    }

    pub fn as_mut_slice(&mut self) -> &mut [F] {
        &mut self.data
    }

    pub fn len(&self) -> usize {
        self.data.len()
    }

    pub fn is_empty(&self) -> bool {
        self.data.is_empty()
    }

    pub fn fill(&mut self, v: F) {
        self.data.iter_mut().for_each(|x| *x = v);
    }

    pub fn same_shape(&self, other: &Self) -> bool {
        self.offsets == other.offsets
    }

    pub fn check_layout(&self, layout: &[usize]) -> Result<()> {
        if self.layout() != layout {
            return Err(Error::ShapeMismatch(format!(
                "weight blocks {:?} do not match basis blocks {:?}",
                self.layout(),
                layout
            )));
        }
        Ok(())
    }

    /// `self += s * other`.
    pub fn axpy(&mut self, s: F, other: &Self) {
        debug_assert!(self.same_shape(other));
        for (a, &b) in self.data.iter_mut().zip(&other.data) {
            *a = *a + s * b;
        }
    }

    pub fn scale(&mut self, s: F) {
        self.data.iter_mut().for_each(|x| *x = *x * s);
    }

    pub fn dot(&self, other: &Self) -> F {
        self.data.iter().zip(&other.data).map(|(&a, &b)| a * b).sum()
    }

    pub fn norm(&self) -> F {
        self.dot(self).sqrt()
    }

    pub fn block_norm_sq(&self, t: usize) -> F {
        self.block(t).iter().map(|&v| v * v).sum()
    }

    pub fn max_abs(&self) -> F {
        self.data.iter().fold(F::zero(), |m, &v| m.max(v.abs()))
    }

    pub fn all_finite(&self) -> bool {
        self.data.iter().all(|v| v.is_finite())
    }

    pub fn cast<G: Real>(&self) -> WeightMatrix<G> {
        WeightMatrix {
            offsets: self.offsets.clone(),
            data: self.data.iter().map(|&v| G::of(v.to_f64_lossy())).collect(),
        }
    }
}
