//! Least squares by Householder QR with column-norm pivoting.

/// Columns whose pivot falls below this fraction of the leading pivot are dropped.
pub const RANK_TOLERANCE: f64 = 1e-10;

#[derive(Clone, Debug, PartialEq)]
pub struct LeastSquares {
    pub coefficients: Vec<f64>,
    pub rank: usize,
    pub residual_norm: f64,
}

/// Minimizes `||X b - y||` for `X` given as rows. Columns beyond the numerical
/// rank get zero weight.
pub fn least_squares(rows: &[Vec<f64>], y: &[f64]) -> LeastSquares {
    let m = rows.len();
    let n = rows.first().map_or(0, Vec::len);
    assert_eq!(y.len(), m, "one target per row");
    let mut cols: Vec<Vec<f64>> = (0..n).map(|j| rows.iter().map(|r| r[j]).collect()).collect();
    let mut rhs = y.to_vec();
    let mut perm: Vec<usize> = (0..n).collect();
    let mut diag = vec![0.0; n.min(m)];
    let mut rank = 0;
    let mut lead = 0.0;
    for k in 0..n.min(m) {
        let (p, best) = (k..n)
            .map(|j| (j, cols[j][k..].iter().map(|v| v * v).sum::<f64>()))
            .fold((k, -1.0), |acc, c| if c.1 > acc.1 { c } else { acc });
        cols.swap(k, p);
        perm.swap(k, p);
        let norm = best.sqrt();
        if k == 0 {
            lead = norm;
        }
        if norm <= RANK_TOLERANCE * lead || norm == 0.0 {
            break;
        }
        let x0 = cols[k][k];
        let alpha = if x0 >= 0.0 { -norm } else { norm };
        let mut v: Vec<f64> = cols[k][k..].to_vec();
        v[0] -= alpha;
        let vnorm2: f64 = v.iter().map(|a| a * a).sum();
        if vnorm2 > 0.0 {
            let apply = |c: &mut [f64]| {
                let s: f64 = v.iter().zip(c.iter()).map(|(a, b)| a * b).sum::<f64>() * 2.0 / vnorm2;
                for (ci, vi) in c.iter_mut().zip(&v) {
                    *ci -= s * vi;
                }
            };
            for col in cols.iter_mut().skip(k + 1) {
                apply(&mut col[k..]);
            }
            apply(&mut rhs[k..]);
        }
        diag[k] = alpha;
        rank = k + 1;
    }
    let mut z = vec![0.0; n];
    for i in (0..rank).rev() {
        let mut s = rhs[i];
        for j in i + 1..rank {
            s -= cols[j][i] * z[j];
        }
        z[i] = s / diag[i];
    }
    let residual_norm = rhs[rank..].iter().map(|v| v * v).sum::<f64>().sqrt();
    let mut coefficients = vec![0.0; n];
    for (k, &j) in perm.iter().enumerate() {
        coefficients[j] = z[k];
    }
    LeastSquares { coefficients, rank, residual_norm }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn exact_fit_and_rank_deficiency() {
        let rows: Vec<Vec<f64>> = (0..20).map(|i| vec![1.0, i as f64, 2.0 * i as f64, (i * i) as f64]).collect();
        let y: Vec<f64> = rows.iter().map(|r| 3.0 - r[1] + 0.5 * r[3]).collect();
        let ls = least_squares(&rows, &y);
        assert_eq!(ls.rank, 3);
        assert!(ls.residual_norm < 1e-9);
        let fitted: Vec<f64> = rows.iter().map(|r| r.iter().zip(&ls.coefficients).map(|(a, b)| a * b).sum()).collect();
        for (f, t) in fitted.iter().zip(&y) {
            assert!((f - t).abs() < 1e-9);
        }
        assert_eq!(ls.coefficients.iter().filter(|c| **c == 0.0).count(), 1);
    }

    #[test]
    fn zero_targets_give_zero_weights() {
        let rows = vec![vec![1.0, 0.3], vec![1.0, -0.2], vec![1.0, 0.9]];
        let ls = least_squares(&rows, &[0.0; 3]);
        assert!(ls.coefficients.iter().all(|c| *c == 0.0));
    }
}
