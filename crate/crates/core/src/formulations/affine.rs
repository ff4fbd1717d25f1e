use super::smoothing::{hard_max, log_sum_exp, softmax};
use crate::bases::WeightMatrix;
use crate::error::{Error, Result};

/// One affine term `a(u) . beta + b(u)`, with `a(u)` stored as block slices.
#[derive(Clone, Debug, PartialEq)]
pub struct AffineTerm {
    pub intercept: f64,
    pub slices: Vec<(usize, Vec<f64>)>,
}

impl AffineTerm {
    pub fn value(&self, beta: &WeightMatrix<f64>) -> f64 {
        self.intercept + self.slices.iter().map(|(b, s)| crate::bases::dot(beta.block(*b), s)).sum::<f64>()
    }
}

/// Component `c * max_u (a(u) . beta + b(u))` before smoothing.
#[derive(Clone, Debug, PartialEq)]
pub struct AffineFamily {
    pub component: usize,
    pub scale: f64,
    /// The `(x, a)` pair behind each term.
    pub pairs: Vec<(usize, usize)>,
    pub terms: Vec<AffineTerm>,
}

impl AffineFamily {
    pub fn len(&self) -> usize {
        self.terms.len()
    }

    pub fn is_empty(&self) -> bool {
        self.terms.is_empty()
    }

    /// Blocks that carry a coefficient slice in some term.
    pub fn support(&self) -> Vec<usize> {
        let mut s: Vec<usize> = self.terms.iter().flat_map(|t| t.slices.iter().map(|(b, _)| *b)).collect();
        s.sort_unstable();
        s.dedup();
        s
    }

    pub fn values(&self, beta: &WeightMatrix<f64>) -> Vec<f64> {
        self.terms.iter().map(|t| t.value(beta)).collect()
    }

    /// `c * max_u (...)` and the first maximizing term.
    pub fn hard_max(&self, beta: &WeightMatrix<f64>) -> Result<(f64, usize)> {
        if self.is_empty() {
            return Err(Error::EmptyFamily(self.component));
        }
        let (m, i) = hard_max(&self.values(beta));
        Ok((self.scale * m, i))
    }
}

/// `sigma * c * log sum_u exp((a(u) . beta + b(u)) / sigma)`.
pub fn lse(family: &AffineFamily, beta: &WeightMatrix<f64>, sigma: f64) -> Result<f64> {
    if family.is_empty() {
        return Err(Error::EmptyFamily(family.component));
    }
    Ok(family.scale * log_sum_exp(&family.values(beta), sigma))
}

/// Softmax weights of the family at temperature `sigma`.
pub fn lse_weights(family: &AffineFamily, beta: &WeightMatrix<f64>, sigma: f64) -> Result<Vec<f64>> {
    if family.is_empty() {
        return Err(Error::EmptyFamily(family.component));
    }
    let v = family.values(beta);
    let mut p = vec![0.0; v.len()];
    softmax(&v, sigma, &mut p);
    Ok(p)
}

/// Gradient `c * sum_u p_u a(u)` as per-block slices, in support order.
pub fn lse_gradient(family: &AffineFamily, beta: &WeightMatrix<f64>, sigma: f64) -> Result<Vec<(usize, Vec<f64>)>> {
    let p = lse_weights(family, beta, sigma)?;
    let mut out: Vec<(usize, Vec<f64>)> = Vec::new();
    for (term, &pu) in family.terms.iter().zip(&p) {
        for (b, s) in &term.slices {
            let pos = match out.iter().position(|(ob, _)| ob == b) {
                Some(i) => i,
                None => {
                    out.push((*b, vec![0.0; s.len()]));
                    out.len() - 1
                }
            };
            for (o, v) in out[pos].1.iter_mut().zip(s) {
                *o += family.scale * pu * v;
            }
        }
    }
    out.sort_by_key(|(b, _)| *b);
    Ok(out)
}

/// Adds the gradient into `out` (restricted to `blocks` when given) and returns the lse value.
pub fn lse_accumulate(
    family: &AffineFamily,
    beta: &WeightMatrix<f64>,
    sigma: f64,
    blocks: Option<&[usize]>,
    out: &mut WeightMatrix<f64>,
) -> Result<f64> {
    if family.is_empty() {
        return Err(Error::EmptyFamily(family.component));
    }
    let v = family.values(beta);
    let mut p = vec![0.0; v.len()];
    softmax(&v, sigma, &mut p);
    for (term, &pu) in family.terms.iter().zip(&p) {
        for (b, s) in &term.slices {
            if blocks.is_some_and(|bl| !bl.contains(b)) {
                continue;
            }
            for (o, x) in out.block_mut(*b).iter_mut().zip(s) {
                *o += family.scale * pu * x;
            }
        }
    }
    Ok(family.scale * log_sum_exp(&v, sigma))
}
