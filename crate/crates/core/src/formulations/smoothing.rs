//! Log-sum-exp kernels with the max-shift trick.

use crate::scalar::Real;

/// First maximizer and its value; `(-inf, 0)` on an empty slice.
pub fn hard_max<F: Real>(values: &[F]) -> (F, usize) {
    let mut best = F::neg_infinity();
    let mut arg = 0;
    for (i, &v) in values.iter().enumerate() {
        if v > best {
            best = v;
            arg = i;
        }
    }
    (best, arg)
}

/// `sigma * log(sum_u exp(v_u / sigma))`.
pub fn log_sum_exp<F: Real>(values: &[F], sigma: F) -> F {
    let (m, _) = hard_max(values);
    if !m.is_finite() {
        return m;
    }
    let s: F = values.iter().map(|&v| ((v - m) / sigma).exp()).sum();
    m + sigma * s.ln()
}

/// Softmax of `values / sigma` written into `out`.
pub fn softmax<F: Real>(values: &[F], sigma: F, out: &mut [F]) {
    let (m, _) = hard_max(values);
    let mut s = F::zero();
    for (o, &v) in out.iter_mut().zip(values) {
        *o = ((v - m) / sigma).exp();
        s = s + *o;
    }
    for o in out.iter_mut() {
        *o = *o / s;
    }
}

/// `log(sum exp(x_i))` of raw log-weights, `-inf` for an empty or all `-inf` input.
pub fn log_add<F: Real>(values: &[F]) -> F {
    log_sum_exp(values, F::one())
}
