//! Gaussian-graphical-model utilities: the sufficient statistic that the
//! exchangeable sampler must conserve, multivariate normal sampling,
//! covariance standardization, and the KL separation bound used to scale
//! signal strengths.

use crate::data::{DataMatrix, SquareMatrix};
use crate::error::{Error, Result};
use crate::graph::{Graph, PrecisionMatrix};
use crate::linalg::{chol_inverse, cholesky, solve_lower_transpose};
use rand::Rng;
use rand_distr::StandardNormal;
use std::collections::BTreeMap;

/// The statistic `ψ_G(x) = (1^T x, (x^T x)_{ij} for i = j or (i,j) ∈ E)`.
///
/// Gram entries are keyed upper-triangular (`i <= j`); the key set is exactly
/// the diagonal plus the edge set of the graph the statistic was built from.
#[derive(Clone, Debug)]
pub struct SufficientStatistic {
    pub column_sums: Vec<f64>,
    pub gram_entries: BTreeMap<(usize, usize), f64>,
}

/// Evaluate `ψ_G(x)`.
pub fn sufficient_statistic(x: &DataMatrix, g: &Graph) -> Result<SufficientStatistic> {
    let p = x.n_cols();
    if p != g.num_nodes() {
        return Err(Error::invalid(format!(
            "data has {p} columns but graph has {} nodes",
            g.num_nodes()
        )));
    }
    let column_sums: Vec<f64> = (0..p).map(|j| x.column(j).iter().sum()).collect();
    let mut gram_entries = BTreeMap::new();
    for i in 0..p {
        let ci = x.column(i);
        gram_entries.insert((i, i), crate::linalg::sq_norm(ci));
        for &j in g.neighbors(i) {
            if j > i {
                gram_entries.insert((i, j), crate::linalg::dot(ci, x.column(j)));
            }
        }
    }
    Ok(SufficientStatistic { column_sums, gram_entries })
}

/// True iff every entry of `a` and `b` agrees within
/// `rel_tol * max(|a|, |b|, 1)`. Errors if the key sets differ.
pub fn stats_close(
    a: &SufficientStatistic,
    b: &SufficientStatistic,
    rel_tol: f64,
) -> Result<bool> {
    if a.column_sums.len() != b.column_sums.len() {
        return Err(Error::invalid("sufficient statistics have different dimensions"));
    }
    if a.gram_entries.len() != b.gram_entries.len()
        || !a.gram_entries.keys().eq(b.gram_entries.keys())
    {
        return Err(Error::invalid("sufficient statistics have different key sets"));
    }
    let close = |x: f64, y: f64| (x - y).abs() <= rel_tol * x.abs().max(y.abs()).max(1.0);
    let sums_ok = a
        .column_sums
        .iter()
        .zip(&b.column_sums)
        .all(|(&x, &y)| close(x, y));
    let gram_ok = a
        .gram_entries
        .iter()
        .zip(&b.gram_entries)
        .all(|((_, &x), (_, &y))| close(x, y));
    Ok(sums_ok && gram_ok)
}

/// Draw `n` i.i.d. rows from `N_p(mean, Ω^{-1})`.
///
/// Each row solves `L^T x = z` with `Ω = L L^T` and `z` standard normal, so
/// `cov(x) = (L L^T)^{-1} = Ω^{-1}`.
pub fn mvn_sample<R: Rng>(
    n: usize,
    mean: &[f64],
    precision: &PrecisionMatrix,
    rng: &mut R,
) -> Result<DataMatrix> {
    let p = precision.dim();
    if mean.len() != p {
        return Err(Error::invalid("mean length does not match precision dimension"));
    }
    let l = cholesky(precision.as_matrix())?;
    let mut rows = Vec::with_capacity(n);
    let mut z = vec![0.0; p];
    for _ in 0..n {
        for zi in z.iter_mut() {
            *zi = rng.sample(StandardNormal);
        }
        let mut x = solve_lower_transpose(&l, &z);
        for (xi, mi) in x.iter_mut().zip(mean) {
            *xi += mi;
        }
        rows.push(x);
    }
    DataMatrix::from_rows(&rows)
}

/// Rescale `Ω` so that `diag(Ω^{-1}) = 1`.
///
/// With `Σ = Ω^{-1}` and `D = diag(√Σ_ii)`, the standardized precision is
/// `D Ω D` (the exact inverse of `D^{-1} Σ D^{-1}`), so the zero pattern is
/// preserved entry for entry.
pub fn standardize_to_unit_variances(precision: &PrecisionMatrix) -> Result<PrecisionMatrix> {
    let p = precision.dim();
    let l = cholesky(precision.as_matrix())?;
    let sigma = chol_inverse(&l);
    let d: Vec<f64> = (0..p).map(|i| sigma.get(i, i).sqrt()).collect();
    let mut out = SquareMatrix::zeros(p);
    for i in 0..p {
        for j in 0..p {
            out.set(i, j, precision.get(i, j) * d[i] * d[j]);
        }
    }
    PrecisionMatrix::new(out)
}

/// `η₋(s) = -½ log(1 - s²)`, the per-edge KL separation lower bound.
pub fn kl_lower_bound(s: f64) -> Result<f64> {
    if !(s.abs() < 1.0) {
        return Err(Error::invalid(format!("kl_lower_bound needs |s| < 1, got {s}")));
    }
    Ok(-0.5 * (-s * s).ln_1p())
}

/// Maximum-likelihood (1/n, mean-centered) sample covariance.
pub fn sample_covariance(x: &DataMatrix) -> SquareMatrix {
    let n = x.n_rows();
    let p = x.n_cols();
    let means: Vec<f64> = (0..p)
        .map(|j| x.column(j).iter().sum::<f64>() / n as f64)
        .collect();
    let mut s = SquareMatrix::zeros(p);
    for i in 0..p {
        let ci = x.column(i);
        for j in i..p {
            let cj = x.column(j);
            let mut acc = 0.0;
            for t in 0..n {
                acc += (ci[t] - means[i]) * (cj[t] - means[j]);
            }
            let v = acc / n as f64;
            s.set(i, j, v);
            s.set(j, i, v);
        }
    }
    s
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::graph::band_graph_precision;
    use crate::rng::stream_rng;
    use approx::assert_abs_diff_eq;

    fn path_graph(p: usize) -> Graph {
        Graph::from_edge_list(p, &(0..p - 1).map(|i| (i, i + 1)).collect::<Vec<_>>()).unwrap()
    }

    #[test]
    fn sufficient_statistic_examples() {
        let g = path_graph(4);
        let zero = DataMatrix::from_rows(&vec![vec![0.0; 4]; 5]).unwrap();
        let s = sufficient_statistic(&zero, &g).unwrap();
        assert!(s.column_sums.iter().all(|&v| v == 0.0));
        assert!(s.gram_entries.values().all(|&v| v == 0.0));

        let empty = Graph::empty(4);
        let s = sufficient_statistic(&zero, &empty).unwrap();
        assert_eq!(s.gram_entries.len(), 4); // diagonal only
        assert!(s.gram_entries.keys().all(|&(i, j)| i == j));
    }

    #[test]
    fn sufficient_statistic_matches_brute_force_gram() {
        let mut rng = stream_rng(11, 0);
        let rows: Vec<Vec<f64>> = (0..5)
            .map(|_| (0..4).map(|_| rng.sample::<f64, _>(StandardNormal)).collect())
            .collect();
        let x = DataMatrix::from_rows(&rows).unwrap();
        let g = path_graph(4);
        let s = sufficient_statistic(&x, &g).unwrap();
        for (&(i, j), &v) in &s.gram_entries {
            let brute: f64 = (0..5).map(|t| rows[t][i] * rows[t][j]).sum();
            assert_abs_diff_eq!(v, brute, epsilon = 1e-12);
        }
        for j in 0..4 {
            let brute: f64 = (0..5).map(|t| rows[t][j]).sum();
            assert_abs_diff_eq!(s.column_sums[j], brute, epsilon = 1e-12);
        }
    }

    #[test]
    fn stats_close_behaviour() {
        let g = path_graph(3);
        let x = DataMatrix::from_rows(&[vec![1.0, 2.0, 3.0], vec![0.5, -1.0, 2.0]]).unwrap();
        let a = sufficient_statistic(&x, &g).unwrap();
        let mut b = a.clone();
        assert!(stats_close(&a, &b, 1e-12).unwrap());
        *b.gram_entries.get_mut(&(0, 1)).unwrap() += 1e-3;
        assert!(!stats_close(&a, &b, 1e-8).unwrap());

        // key mismatch errors out
        let other = sufficient_statistic(&x, &Graph::empty(3)).unwrap();
        assert!(stats_close(&a, &other, 1e-8).is_err());
    }

    #[test]
    fn sufficient_statistic_row_permutation_invariant() {
        let g = path_graph(4);
        let rows = vec![
            vec![1.0, 0.0, 2.0, -1.0],
            vec![0.0, 1.0, 1.0, 3.0],
            vec![2.0, 2.0, 0.0, 0.5],
        ];
        let x = DataMatrix::from_rows(&rows).unwrap();
        let mut shuffled = rows.clone();
        shuffled.swap(0, 2);
        let y = DataMatrix::from_rows(&shuffled).unwrap();
        let a = sufficient_statistic(&x, &g).unwrap();
        let b = sufficient_statistic(&y, &g).unwrap();
        assert!(stats_close(&a, &b, 1e-12).unwrap());
    }

    #[test]
    fn mvn_sample_moments_and_determinism() {
        let om = PrecisionMatrix::new(SquareMatrix::identity(3)).unwrap();
        let mut rng = stream_rng(5, 0);
        let x = mvn_sample(10_000, &[0.0; 3], &om, &mut rng).unwrap();
        for j in 0..3 {
            let mean = x.column(j).iter().sum::<f64>() / 10_000.0;
            assert!(mean.abs() < 4.0 / 100.0, "column {j} mean {mean}");
        }

        let mut four_i = SquareMatrix::identity(2);
        four_i.scale(4.0);
        let om4 = PrecisionMatrix::new(four_i).unwrap();
        let mut rng = stream_rng(6, 0);
        let x = mvn_sample(10_000, &[0.0; 2], &om4, &mut rng).unwrap();
        for j in 0..2 {
            let var = x.column(j).iter().map(|v| v * v).sum::<f64>() / 10_000.0;
            assert!((var - 0.25).abs() < 0.025, "column {j} variance {var}");
        }

        // bit-identical repeat under the same stream
        let om = PrecisionMatrix::new(SquareMatrix::identity(2)).unwrap();
        let a = mvn_sample(5, &[1.0, -1.0], &om, &mut stream_rng(9, 3)).unwrap();
        let b = mvn_sample(5, &[1.0, -1.0], &om, &mut stream_rng(9, 3)).unwrap();
        for j in 0..2 {
            assert_eq!(a.column(j), b.column(j));
        }
    }

    #[test]
    fn mvn_sample_recovers_precision_entrywise() {
        let (_, om) = band_graph_precision(4, 1, 0.15).unwrap();
        let mut rng = stream_rng(21, 0);
        let x = mvn_sample(40_000, &[0.0; 4], &om, &mut rng).unwrap();
        let s = sample_covariance(&x);
        let l = cholesky(&s).unwrap();
        let est = chol_inverse(&l);
        // entries of the inverse sample covariance concentrate at rate ~ 1/sqrt(n)
        for i in 0..4 {
            for j in 0..4 {
                assert!(
                    (est.get(i, j) - om.get(i, j)).abs() < 0.05,
                    "entry ({i},{j}): est {} vs true {}",
                    est.get(i, j),
                    om.get(i, j)
                );
            }
        }
    }

    #[test]
    fn standardize_examples() {
        let mut four_i = SquareMatrix::identity(3);
        four_i.scale(4.0);
        let om = PrecisionMatrix::new(four_i).unwrap();
        let std = standardize_to_unit_variances(&om).unwrap();
        for i in 0..3 {
            assert_abs_diff_eq!(std.get(i, i), 1.0, epsilon = 1e-12);
        }

        // random band: diagonal of the explicit inverse equals 1
        let (_, om) = band_graph_precision(8, 2, 0.15).unwrap();
        let std = standardize_to_unit_variances(&om).unwrap();
        let sigma = chol_inverse(&cholesky(std.as_matrix()).unwrap());
        for i in 0..8 {
            assert_abs_diff_eq!(sigma.get(i, i), 1.0, epsilon = 1e-8);
        }
        // zero pattern preserved
        for i in 0..8 {
            for j in 0..8 {
                assert_eq!(om.get(i, j) == 0.0, std.get(i, j) == 0.0);
            }
        }
        // idempotence
        let again = standardize_to_unit_variances(&std).unwrap();
        for i in 0..8 {
            for j in 0..8 {
                assert_abs_diff_eq!(again.get(i, j), std.get(i, j), epsilon = 1e-10);
            }
        }
    }

    #[test]
    fn kl_lower_bound_examples() {
        assert_eq!(kl_lower_bound(0.0).unwrap(), 0.0);
        assert_abs_diff_eq!(kl_lower_bound(0.2).unwrap(), 0.020411, epsilon = 1e-4);
        let mut prev = 0.0;
        for k in 1..20 {
            let v = kl_lower_bound(k as f64 * 0.05).unwrap();
            assert!(v > prev);
            prev = v;
        }
        assert!(kl_lower_bound(1.0).is_err());
        assert!(kl_lower_bound(-1.2).is_err());
    }

    #[test]
    fn sample_covariance_hand_check() {
        let x = DataMatrix::from_rows(&[vec![1.0, 2.0], vec![3.0, 0.0]]).unwrap();
        let s = sample_covariance(&x);
        // means (2, 1); centered rows (-1, 1), (1, -1)
        assert_abs_diff_eq!(s.get(0, 0), 1.0, epsilon = 1e-15);
        assert_abs_diff_eq!(s.get(1, 1), 1.0, epsilon = 1e-15);
        assert_abs_diff_eq!(s.get(0, 1), -1.0, epsilon = 1e-15);
    }
}
