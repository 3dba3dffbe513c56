//! Modified graphical lasso: Gaussian log-likelihood with an entrywise ℓ1
//! penalty applied only to off-diagonal entries *outside* a given edge set,
//!
//! ```text
//! min_{Ω ≻ 0}  tr(Σ̂ Ω) − log det Ω + λ Σ_{(i,j)∉E, i≠j} √(Σ̂_ii Σ̂_jj) |Ω_ij|
//! ```
//!
//! so edge entries and the diagonal are free while non-edges are shrunk
//! toward zero. Solved by the classical blockwise coordinate descent on the
//! covariance estimate `W`, with an inner cyclic-coordinate-descent lasso per
//! column.

use crate::data::SquareMatrix;
use crate::error::{Error, Result};
use crate::graph::{Graph, PrecisionMatrix};
use crate::linalg::{chol_inverse, chol_log_det, cholesky};

/// One modified-glasso instance.
#[derive(Clone, Debug)]
pub struct GlassoProblem<'a> {
    pub sample_cov: &'a SquareMatrix,
    /// Edges (plus the diagonal) are unpenalized.
    pub graph: &'a Graph,
    /// Penalty scale; entry (i,j) is penalized at `λ √(Σ̂_ii Σ̂_jj)`.
    pub lambda: f64,
    /// Sweep convergence tolerance relative to `mean |Σ̂ off-diagonal|`.
    pub tol: f64,
    /// Maximum outer sweeps.
    pub max_iter: usize,
}

impl<'a> GlassoProblem<'a> {
    pub fn new(sample_cov: &'a SquareMatrix, graph: &'a Graph, lambda: f64) -> GlassoProblem<'a> {
        GlassoProblem { sample_cov, graph, lambda, tol: 1e-4, max_iter: 200 }
    }
}

/// Default penalty scale `2 √(log p / n)`, the usual rate for sparse
/// precision estimation.
pub fn default_lambda(p: usize, n: usize) -> f64 {
    2.0 * ((p as f64).ln() / n as f64).sqrt()
}

/// Solver output.
#[derive(Clone, Debug)]
pub struct GlassoFit {
    pub omega: PrecisionMatrix,
    /// The estimated covariance `W ≈ Ω̂^{-1}` maintained by the solver;
    /// useful as a warm start for related problems.
    pub cov: SquareMatrix,
    pub converged: bool,
    pub sweeps: usize,
}

fn penalty_matrix(sigma: &SquareMatrix, graph: &Graph, lambda: f64) -> SquareMatrix {
    let p = sigma.dim();
    let mut rho = SquareMatrix::zeros(p);
    for i in 0..p {
        for j in (i + 1)..p {
            if !graph.has_edge(i, j) {
                let v = lambda * (sigma.get(i, i) * sigma.get(j, j)).sqrt();
                rho.set(i, j, v);
                rho.set(j, i, v);
            }
        }
    }
    rho
}

/// Inner lasso for one column: minimize
/// `½ βᵀ W11 β − s12ᵀ β + Σ_k ρ_k |β_k|` by cyclic coordinate descent.
/// Index maps: the `p-1` entries skip column `j` of the full problem.
#[allow(clippy::too_many_arguments)]
fn column_lasso(
    w: &SquareMatrix,
    s12: &[f64],
    rho12: &[f64],
    skip: usize,
    beta: &mut [f64],
    thr: f64,
    max_sweeps: usize,
) {
    let p = w.dim();
    let full_index = |k: usize| if k < skip { k } else { k + 1 };
    for _ in 0..max_sweeps {
        let mut max_delta = 0.0f64;
        for k in 0..p - 1 {
            let fk = full_index(k);
            let wkk = w.get(fk, fk);
            if wkk <= 0.0 {
                continue;
            }
            // gradient contribution sum_{l != k} W11_{kl} beta_l
            let mut dot = 0.0;
            let wrow = w.row(fk);
            for l in 0..p - 1 {
                if l != k && beta[l] != 0.0 {
                    dot += wrow[full_index(l)] * beta[l];
                }
            }
            let z = s12[k] - dot;
            let new = crate::regress::soft_threshold(z, rho12[k]) / wkk;
            let delta = new - beta[k];
            if delta != 0.0 {
                beta[k] = new;
                max_delta = max_delta.max(delta.abs() * wkk);
            }
        }
        if max_delta < thr {
            break;
        }
    }
}

fn objective(
    sigma: &SquareMatrix,
    rho: &SquareMatrix,
    omega: &SquareMatrix,
) -> Result<f64> {
    let p = sigma.dim();
    let l = cholesky(omega)?;
    let mut tr = 0.0;
    let mut pen = 0.0;
    for i in 0..p {
        for j in 0..p {
            tr += sigma.get(i, j) * omega.get(j, i);
            pen += rho.get(i, j) * omega.get(i, j).abs();
        }
    }
    Ok(tr - chol_log_det(&l) + pen)
}

fn recover_omega(w: &SquareMatrix, betas: &[Vec<f64>]) -> SquareMatrix {
    let p = w.dim();
    let mut omega = SquareMatrix::zeros(p);
    for j in 0..p {
        let beta = &betas[j];
        let full_index = |k: usize| if k < j { k } else { k + 1 };
        // w12^T beta with w12 = W[-j, j]
        let mut dot = 0.0;
        for k in 0..p - 1 {
            dot += w.get(full_index(k), j) * beta[k];
        }
        let theta_jj = 1.0 / (w.get(j, j) - dot);
        omega.set(j, j, theta_jj);
        for k in 0..p - 1 {
            omega.set(full_index(k), j, -beta[k] * theta_jj);
        }
    }
    omega.symmetrize();
    omega
}

/// Solve the modified graphical lasso. `warm_start` seeds the covariance
/// iterate `W` (typically the `cov` of a previous fit on closely related
/// data); correctness does not depend on it because the objective is
/// strictly convex.
pub fn solve(problem: &GlassoProblem, warm_start: Option<&SquareMatrix>) -> Result<GlassoFit> {
    let sigma = problem.sample_cov;
    let p = sigma.dim();
    if p == 0 {
        return Err(Error::invalid("empty covariance"));
    }
    if problem.graph.num_nodes() != p {
        return Err(Error::invalid("graph size does not match covariance"));
    }
    if problem.lambda < 0.0 {
        return Err(Error::invalid("glasso penalty must be nonnegative"));
    }
    let scale = sigma.trace() / p as f64;
    if scale <= 0.0 || !sigma.is_finite() {
        return Err(Error::invalid("covariance must be finite with positive trace"));
    }

    // regularize a non-PD sample covariance up front
    let mut sigma_reg = sigma.clone();
    if cholesky(&sigma_reg).is_err() {
        let eps = 1e-8 * scale;
        loop {
            for i in 0..p {
                sigma_reg.set(i, i, sigma_reg.get(i, i) + eps);
            }
            if cholesky(&sigma_reg).is_ok() {
                break;
            }
        }
    }

    let rho = penalty_matrix(&sigma_reg, problem.graph, problem.lambda);
    let fully_unpenalized =
        problem.lambda == 0.0 || problem.graph.edge_count() == p * (p - 1) / 2;
    if fully_unpenalized {
        // the unpenalized MLE is the plain inverse
        let l = cholesky(&sigma_reg)?;
        let mut omega = chol_inverse(&l);
        omega.symmetrize();
        return Ok(GlassoFit {
            omega: PrecisionMatrix::new(omega)?,
            cov: sigma_reg,
            converged: true,
            sweeps: 0,
        });
    }

    let mut w = match warm_start {
        Some(ws) if ws.dim() == p && cholesky(ws).is_ok() => {
            let mut w = ws.clone();
            // the diagonal of W is pinned to the sample diagonal
            for i in 0..p {
                w.set(i, i, sigma_reg.get(i, i));
            }
            if cholesky(&w).is_ok() {
                w
            } else {
                sigma_reg.clone()
            }
        }
        _ => sigma_reg.clone(),
    };

    // convergence threshold: mean |off-diagonal of sigma| (diagonal mean if
    // the off-diagonal is identically zero)
    let mut off_sum = 0.0;
    for i in 0..p {
        for j in 0..p {
            if i != j {
                off_sum += sigma_reg.get(i, j).abs();
            }
        }
    }
    let off_mean = if p > 1 { off_sum / (p * (p - 1)) as f64 } else { 0.0 };
    let thr = problem.tol * if off_mean > 0.0 { off_mean } else { scale };

    let mut betas: Vec<Vec<f64>> = vec![vec![0.0; p - 1]; p];
    let mut s12 = vec![0.0; p - 1];
    let mut rho12 = vec![0.0; p - 1];
    let mut converged = false;
    let mut sweeps = 0;
    #[cfg(debug_assertions)]
    let mut prev_obj = f64::INFINITY;
    while sweeps < problem.max_iter {
        sweeps += 1;
        let mut max_change = 0.0f64;
        for j in 0..p {
            let full_index = |k: usize| if k < j { k } else { k + 1 };
            for k in 0..p - 1 {
                s12[k] = sigma_reg.get(full_index(k), j);
                rho12[k] = rho.get(full_index(k), j);
            }
            column_lasso(&w, &s12, &rho12, j, &mut betas[j], thr * 0.1, 200);
            // w12 = W11 beta
            for k in 0..p - 1 {
                let fk = full_index(k);
                let mut v = 0.0;
                let wrow = w.row(fk);
                for l in 0..p - 1 {
                    if betas[j][l] != 0.0 {
                        v += wrow[full_index(l)] * betas[j][l];
                    }
                }
                max_change = max_change.max((v - w.get(fk, j)).abs());
                w.set(fk, j, v);
                w.set(j, fk, v);
            }
        }
        #[cfg(debug_assertions)]
        {
            // the penalized objective should trend downward; the blockwise
            // scheme is ascent on the dual, so allow a small wiggle
            if let Ok(obj) = objective(&sigma_reg, &rho, &recover_omega(&w, &betas)) {
                debug_assert!(
                    obj <= prev_obj + 1e-4 * (1.0 + prev_obj.abs()),
                    "glasso objective rose: {prev_obj} -> {obj}"
                );
                prev_obj = obj;
            }
        }
        if max_change < thr {
            converged = true;
            break;
        }
    }

    // one recovery pass so every beta is consistent with the final W
    for j in 0..p {
        let full_index = |k: usize| if k < j { k } else { k + 1 };
        for k in 0..p - 1 {
            s12[k] = sigma_reg.get(full_index(k), j);
            rho12[k] = rho.get(full_index(k), j);
        }
        column_lasso(&w, &s12, &rho12, j, &mut betas[j], thr * 0.1, 200);
        for k in 0..p - 1 {
            let fk = full_index(k);
            let mut v = 0.0;
            for l in 0..p - 1 {
                if betas[j][l] != 0.0 {
                    v += w.get(fk, full_index(l)) * betas[j][l];
                }
            }
            w.set(fk, j, v);
            w.set(j, fk, v);
        }
    }
    let omega = recover_omega(&w, &betas);
    let omega = PrecisionMatrix::new(omega)
        .map_err(|_| Error::numerical("glasso produced a non-positive-definite estimate"))?;
    Ok(GlassoFit { omega, cov: w, converged, sweeps })
}

/// Profile log-likelihood `n (log det Ω − tr(Σ̂ Ω))`, dropping the
/// data-independent additive constant `−n p log(2π) / 2`-style terms. This is
/// the quantity maximized by the (penalized) MLE and the GLR statistic's raw
/// value.
pub fn penalized_profile_loglik(
    sample_cov: &SquareMatrix,
    omega: &PrecisionMatrix,
    n: usize,
) -> Result<f64> {
    let p = sample_cov.dim();
    if omega.dim() != p {
        return Err(Error::invalid("dimension mismatch"));
    }
    let l = cholesky(omega.as_matrix())?;
    let mut tr = 0.0;
    for i in 0..p {
        for j in 0..p {
            tr += sample_cov.get(i, j) * omega.get(j, i);
        }
    }
    Ok(n as f64 * (chol_log_det(&l) - tr))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::ggm::{mvn_sample, sample_covariance};
    use crate::graph::{band_graph_precision, Graph};
    use crate::linalg::jacobi_eigenvalues;
    use crate::rng::stream_rng;
    use approx::assert_abs_diff_eq;

    fn sample_cov_from_band(p: usize, n: usize, seed: u64) -> (Graph, SquareMatrix) {
        let (g, om) = band_graph_precision(p, 2, 0.15).unwrap();
        let x = mvn_sample(n, &vec![0.0; p], &om, &mut stream_rng(seed, 0)).unwrap();
        (g, sample_covariance(&x))
    }

    #[test]
    fn zero_penalty_is_plain_inverse() {
        let (g, s) = sample_cov_from_band(6, 40, 1);
        let fit = solve(&GlassoProblem::new(&s, &g, 0.0), None).unwrap();
        let l = cholesky(&s).unwrap();
        let inv = chol_inverse(&l);
        for i in 0..6 {
            for j in 0..6 {
                let expect = inv.get(i, j);
                assert!(
                    (fit.omega.get(i, j) - expect).abs() <= 1e-6 * expect.abs().max(1.0),
                    "entry ({i},{j})"
                );
            }
        }
        assert!(fit.converged);
    }

    #[test]
    fn huge_penalty_zeroes_non_edges() {
        let (g, s) = sample_cov_from_band(6, 60, 2);
        let fit = solve(&GlassoProblem::new(&s, &g, 1e6), None).unwrap();
        for (i, j) in g.non_edge_pairs() {
            assert!(
                fit.omega.get(i, j).abs() < 1e-8,
                "penalized entry ({i},{j}) = {}",
                fit.omega.get(i, j)
            );
        }
        // edge entries survive
        let alive = g.edges().iter().filter(|&&(i, j)| fit.omega.get(i, j) != 0.0).count();
        assert!(alive == g.edge_count(), "{alive} of {} edge entries nonzero", g.edge_count());
    }

    #[test]
    fn kkt_conditions_at_solution() {
        let (g, s) = sample_cov_from_band(5, 80, 3);
        let lambda = 0.1;
        let problem = GlassoProblem::new(&s, &g, lambda);
        let fit = solve(&problem, None).unwrap();
        // verify against the explicit inverse of omega-hat, not the solver's W
        let l = cholesky(fit.omega.as_matrix()).unwrap();
        let winv = chol_inverse(&l);
        let scale = s.trace() / 5.0;
        let tol = problem.tol * scale * 10.0;
        for i in 0..5 {
            for j in 0..5 {
                let resid = s.get(i, j) - winv.get(i, j);
                if i == j || g.has_edge(i, j) {
                    assert!(resid.abs() <= tol, "unpenalized KKT ({i},{j}): {resid}");
                } else {
                    let bound = lambda * (s.get(i, i) * s.get(j, j)).sqrt();
                    assert!(resid.abs() <= bound + tol, "penalized KKT ({i},{j}): {resid}");
                    let om = fit.omega.get(i, j);
                    if om.abs() > 1e-7 {
                        // at an active penalized entry the residual sits on the
                        // boundary with the right sign
                        assert!(
                            (resid + bound * om.signum()).abs() <= tol,
                            "sign consistency ({i},{j}): resid {resid}, om {om}"
                        );
                    }
                }
            }
        }
    }

    #[test]
    fn warm_start_agrees_with_cold_start() {
        let (g, s) = sample_cov_from_band(6, 50, 4);
        let problem = GlassoProblem::new(&s, &g, 0.08);
        let cold = solve(&problem, None).unwrap();
        let (_, s2) = sample_cov_from_band(6, 50, 5);
        let problem2 = GlassoProblem::new(&s2, &g, 0.08);
        let warm = solve(&problem2, Some(&cold.cov)).unwrap();
        let cold2 = solve(&problem2, None).unwrap();
        for i in 0..6 {
            for j in 0..6 {
                assert_abs_diff_eq!(warm.omega.get(i, j), cold2.omega.get(i, j), epsilon = 2e-4);
            }
        }
    }

    #[test]
    fn non_pd_covariance_is_regularized() {
        // n < p makes the sample covariance singular
        let (g, om) = band_graph_precision(8, 1, 0.1).unwrap();
        let x = mvn_sample(5, &[0.0; 8], &om, &mut stream_rng(6, 0)).unwrap();
        let s = sample_covariance(&x);
        assert!(cholesky(&s).is_err());
        let fit = solve(&GlassoProblem::new(&s, &g, 0.3), None).unwrap();
        assert!(cholesky(fit.omega.as_matrix()).is_ok());
    }

    #[test]
    fn profile_loglik_examples() {
        let (_, s) = sample_cov_from_band(4, 50, 7);
        let n = 50;
        // identity: n (0 - tr sigma)
        let id = PrecisionMatrix::new(SquareMatrix::identity(4)).unwrap();
        assert_abs_diff_eq!(
            penalized_profile_loglik(&s, &id, n).unwrap(),
            n as f64 * (-s.trace()),
            epsilon = 1e-10
        );
        // the MLE sigma^{-1} beats a scaled version
        let l = cholesky(&s).unwrap();
        let mut inv = chol_inverse(&l);
        inv.symmetrize();
        let mle = PrecisionMatrix::new(inv.clone()).unwrap();
        let mut scaled = inv.clone();
        scaled.scale(1.1);
        let worse = PrecisionMatrix::new(scaled).unwrap();
        let at_mle = penalized_profile_loglik(&s, &mle, n).unwrap();
        let at_scaled = penalized_profile_loglik(&s, &worse, n).unwrap();
        assert!(at_mle >= at_scaled);
        // eigen-decomposition oracle for log det
        let eig = jacobi_eigenvalues(&inv);
        let logdet: f64 = eig.iter().map(|e| e.ln()).sum();
        let mut tr = 0.0;
        for i in 0..4 {
            for j in 0..4 {
                tr += s.get(i, j) * inv.get(j, i);
            }
        }
        assert_abs_diff_eq!(at_mle, n as f64 * (logdet - tr), epsilon = 1e-8 * at_mle.abs());
    }

    #[test]
    fn objective_helper_matches_parts() {
        let (g, s) = sample_cov_from_band(4, 60, 8);
        let rho = penalty_matrix(&s, &g, 0.2);
        let id = SquareMatrix::identity(4);
        // omega = I: tr(sigma) - 0 + 0 (identity has no off-diagonal)
        assert_abs_diff_eq!(objective(&s, &rho, &id).unwrap(), s.trace(), epsilon = 1e-12);
    }
}
