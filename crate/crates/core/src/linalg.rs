//! Dense least-squares kernels and small symmetric-matrix routines.
//!
//! The central type is [`QrProjector`]: a thin Householder QR factorization
//! with column pivoting of `[1_n | design]`. The intercept column is always
//! prepended internally — callers never supply it. One factorization serves
//! any number of responses (fitted values, residuals, coefficients), which is
//! what the residual-rotation sampler and the pairwise statistics rely on:
//! factor once, project twice.
//!
//! Pivot/rank rule: a column is dropped when its remaining norm falls below
//! 1e-12 x (largest initial column norm).

use crate::data::SquareMatrix;
use crate::error::{Error, Result};

const RANK_TOL: f64 = 1e-12;

/// Result of a least-squares fit.
#[derive(Clone, Debug)]
pub struct LsFit {
    /// Projection of the response onto span(intercept, design columns).
    pub fitted: Vec<f64>,
    /// `response - fitted`.
    pub residual: Vec<f64>,
    /// Numerical rank of the augmented design (intercept included).
    pub rank: usize,
    /// Number of caller-supplied design columns (intercept not counted).
    pub design_cols: usize,
}

/// Pivoted Householder QR of `[1_n | design]`, reusable across responses.
pub struct QrProjector {
    n: usize,
    k: usize, // augmented column count
    rank: usize,
    /// n x k column-major; R on/above the diagonal, Householder vectors
    /// (implicit leading 1) below it.
    a: Vec<f64>,
    tau: Vec<f64>,
    /// perm[t] = augmented-design column stored at pivot position t.
    perm: Vec<usize>,
}

impl QrProjector {
    /// Factor `[1_n | cols]`. All columns must have length `n >= 1`.
    pub fn factor(n: usize, cols: &[&[f64]]) -> Result<QrProjector> {
        if n == 0 {
            return Err(Error::invalid("least squares needs at least one row"));
        }
        let k = cols.len() + 1;
        let mut a = Vec::with_capacity(n * k);
        a.extend(std::iter::repeat(1.0).take(n));
        for (j, c) in cols.iter().enumerate() {
            if c.len() != n {
                return Err(Error::invalid(format!(
                    "design column {} has length {}, expected {}",
                    j,
                    c.len(),
                    n
                )));
            }
            a.extend_from_slice(*c);
        }

        let mut tau = vec![0.0; k];
        let mut perm: Vec<usize> = (0..k).collect();
        let max_init_norm = (0..k)
            .map(|j| norm2(&a[j * n..(j + 1) * n]))
            .fold(0.0f64, f64::max);
        let tol = RANK_TOL * max_init_norm;

        let steps = k.min(n);
        let mut rank = steps;
        for t in 0..steps {
            // exact remaining norms (k is small everywhere in this crate)
            let mut best = t;
            let mut best_norm = 0.0f64;
            for j in t..k {
                let nj = norm2(&a[j * n + t..(j + 1) * n]);
                if nj > best_norm {
                    best_norm = nj;
                    best = j;
                }
            }
            if best_norm < tol || best_norm == 0.0 {
                rank = t;
                break;
            }
            if best != t {
                for i in 0..n {
                    a.swap(t * n + i, best * n + i);
                }
                perm.swap(t, best);
            }
            // Householder reflector for column t, rows t..n
            let (col_t, rest) = {
                let (head, tail) = a.split_at_mut((t + 1) * n);
                (&mut head[t * n..], tail)
            };
            let x0 = col_t[t];
            let sigma = best_norm;
            let alpha = if x0 >= 0.0 { -sigma } else { sigma };
            let u0 = x0 - alpha;
            // ||u||^2 = 2 sigma (sigma + |x0|), stable for either sign
            let unorm2 = 2.0 * sigma * (sigma + x0.abs());
            let beta = 2.0 * u0 * u0 / unorm2;
            col_t[t] = alpha;
            for v in col_t[t + 1..].iter_mut() {
                *v /= u0;
            }
            tau[t] = beta;
            // apply to trailing columns
            let w = &col_t[t + 1..];
            for j in 0..(k - t - 1) {
                let cj = &mut rest[j * n..(j + 1) * n];
                let mut s = cj[t];
                for (wi, ci) in w.iter().zip(cj[t + 1..].iter()) {
                    s += wi * ci;
                }
                s *= beta;
                cj[t] -= s;
                for (wi, ci) in w.iter().zip(cj[t + 1..].iter_mut()) {
                    *ci -= s * wi;
                }
            }
        }

        Ok(QrProjector { n, k, rank, a, tau, perm })
    }

    pub fn n_rows(&self) -> usize {
        self.n
    }

    /// Rank of the augmented design (intercept included).
    pub fn rank(&self) -> usize {
        self.rank
    }

    /// Augmented-design column indices dropped by pivoting (0 = intercept).
    pub fn dropped(&self) -> &[usize] {
        &self.perm[self.rank..]
    }

    fn apply_qt(&self, w: &mut [f64]) {
        let n = self.n;
        for t in 0..self.rank {
            let col = &self.a[t * n..(t + 1) * n];
            let mut s = w[t];
            for (ci, wi) in col[t + 1..].iter().zip(w[t + 1..].iter()) {
                s += ci * wi;
            }
            s *= self.tau[t];
            w[t] -= s;
            for (ci, wi) in col[t + 1..].iter().zip(w[t + 1..].iter_mut()) {
                *wi -= s * ci;
            }
        }
    }

    fn apply_q(&self, w: &mut [f64]) {
        let n = self.n;
        for t in (0..self.rank).rev() {
            let col = &self.a[t * n..(t + 1) * n];
            let mut s = w[t];
            for (ci, wi) in col[t + 1..].iter().zip(w[t + 1..].iter()) {
                s += ci * wi;
            }
            s *= self.tau[t];
            w[t] -= s;
            for (ci, wi) in col[t + 1..].iter().zip(w[t + 1..].iter_mut()) {
                *wi -= s * ci;
            }
        }
    }

    /// Orthogonal projection of `y` onto the column span: `(fitted, residual)`.
    pub fn project(&self, y: &[f64]) -> (Vec<f64>, Vec<f64>) {
        assert_eq!(y.len(), self.n, "response length mismatch");
        let mut w = y.to_vec();
        self.apply_qt(&mut w);
        for v in w[self.rank..].iter_mut() {
            *v = 0.0;
        }
        self.apply_q(&mut w);
        let residual: Vec<f64> = y.iter().zip(w.iter()).map(|(yi, fi)| yi - fi).collect();
        (w, residual)
    }

    /// Residual only (saves one vector when the fit is not needed).
    pub fn residual(&self, y: &[f64]) -> Vec<f64> {
        let (_, r) = self.project(y);
        r
    }

    /// Least-squares coefficients in augmented order (index 0 = intercept).
    /// Pivoted-out columns get coefficient 0.
    pub fn coefficients(&self, y: &[f64]) -> Vec<f64> {
        let n = self.n;
        let mut w = y.to_vec();
        self.apply_qt(&mut w);
        // back-substitute R[0..rank, 0..rank] beta = w[0..rank]
        let mut beta_piv = vec![0.0; self.rank];
        for t in (0..self.rank).rev() {
            let mut s = w[t];
            for j in (t + 1)..self.rank {
                s -= self.a[j * n + t] * beta_piv[j];
            }
            beta_piv[t] = s / self.a[t * n + t];
        }
        let mut beta = vec![0.0; self.k];
        for (t, &b) in beta_piv.iter().enumerate() {
            beta[self.perm[t]] = b;
        }
        beta
    }

    /// Diagonal of `(A^T A)^{-1}` restricted to the kept columns, in augmented
    /// order; dropped columns get NaN. `A = [1 | design]` after pivoting.
    pub fn xtx_inverse_diag(&self) -> Vec<f64> {
        let n = self.n;
        let r = self.rank;
        // rows of R^{-1}: solve R^T column by column is equivalent; compute
        // R^{-1} explicitly (r is small).
        let mut rinv = vec![0.0; r * r]; // row-major upper triangular
        for j in (0..r).rev() {
            rinv[j * r + j] = 1.0 / self.a[j * n + j];
            for i in (0..j).rev() {
                let mut s = 0.0;
                for t in (i + 1)..=j {
                    s += self.a[t * n + i] * rinv[t * r + j];
                }
                rinv[i * r + j] = -s / self.a[i * n + i];
            }
        }
        let mut diag = vec![f64::NAN; self.k];
        for t in 0..r {
            let mut s = 0.0;
            for j in t..r {
                s += rinv[t * r + j] * rinv[t * r + j];
            }
            diag[self.perm[t]] = s;
        }
        diag
    }
}

/// Least squares of `response` on `[1_n | design]`.
pub fn least_squares(response: &[f64], design: &[&[f64]]) -> Result<LsFit> {
    let qr = QrProjector::factor(response.len(), design)?;
    let (fitted, residual) = qr.project(response);
    Ok(LsFit { fitted, residual, rank: qr.rank(), design_cols: design.len() })
}

/// `||P_outer y||^2 - ||P_inner y||^2` where each projection includes the
/// intercept; clamped to be nonnegative. Caller guarantees the inner span is
/// contained in the outer span.
pub fn projection_difference_sq(
    response: &[f64],
    inner: &[&[f64]],
    outer: &[&[f64]],
) -> Result<f64> {
    let fit_in = least_squares(response, inner)?;
    let fit_out = least_squares(response, outer)?;
    let diff = sq_norm(&fit_in.residual) - sq_norm(&fit_out.residual);
    Ok(diff.max(0.0))
}

#[inline]
pub(crate) fn sq_norm(v: &[f64]) -> f64 {
    v.iter().map(|x| x * x).sum()
}

#[inline]
pub(crate) fn norm2(v: &[f64]) -> f64 {
    sq_norm(v).sqrt()
}

#[inline]
pub(crate) fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

// ---------------------------------------------------------------------------
// symmetric positive-definite helpers
// ---------------------------------------------------------------------------

/// Cholesky factor L (lower triangular) with A = L L^T.
pub fn cholesky(a: &SquareMatrix) -> Result<SquareMatrix> {
    let p = a.dim();
    let mut l = SquareMatrix::zeros(p);
    for i in 0..p {
        for j in 0..=i {
            let mut s = a.get(i, j);
            for t in 0..j {
                s -= l.get(i, t) * l.get(j, t);
            }
            if i == j {
                if s <= 0.0 || !s.is_finite() {
                    return Err(Error::numerical(format!(
                        "Cholesky breakdown at pivot {i} (value {s:.3e}); matrix not positive definite"
                    )));
                }
                l.set(i, i, s.sqrt());
            } else {
                l.set(i, j, s / l.get(j, j));
            }
        }
    }
    Ok(l)
}

/// log det A from its Cholesky factor.
pub fn chol_log_det(l: &SquareMatrix) -> f64 {
    (0..l.dim()).map(|i| l.get(i, i).ln()).sum::<f64>() * 2.0
}

/// Solve L x = b (forward substitution).
pub fn solve_lower(l: &SquareMatrix, b: &[f64]) -> Vec<f64> {
    let p = l.dim();
    let mut x = b.to_vec();
    for i in 0..p {
        let mut s = x[i];
        for j in 0..i {
            s -= l.get(i, j) * x[j];
        }
        x[i] = s / l.get(i, i);
    }
    x
}

/// Solve L^T x = b (back substitution with the lower factor).
pub fn solve_lower_transpose(l: &SquareMatrix, b: &[f64]) -> Vec<f64> {
    let p = l.dim();
    let mut x = b.to_vec();
    for i in (0..p).rev() {
        let mut s = x[i];
        for j in (i + 1)..p {
            s -= l.get(j, i) * x[j];
        }
        x[i] = s / l.get(i, i);
    }
    x
}

/// Solve A x = b given A = L L^T.
pub fn chol_solve(l: &SquareMatrix, b: &[f64]) -> Vec<f64> {
    solve_lower_transpose(l, &solve_lower(l, b))
}

/// Symmetric inverse of A from its Cholesky factor.
pub fn chol_inverse(l: &SquareMatrix) -> SquareMatrix {
    let p = l.dim();
    let mut inv = SquareMatrix::zeros(p);
    let mut e = vec![0.0; p];
    for j in 0..p {
        e[j] = 1.0;
        let col = chol_solve(l, &e);
        e[j] = 0.0;
        for i in 0..p {
            inv.set(i, j, col[i]);
        }
    }
    inv.symmetrize();
    inv
}

/// Eigenvalues of a symmetric matrix by the cyclic Jacobi method, ascending.
pub fn jacobi_eigenvalues(a: &SquareMatrix) -> Vec<f64> {
    let p = a.dim();
    let mut m = a.clone();
    m.symmetrize();
    let scale: f64 = (0..p)
        .map(|i| m.row(i).iter().map(|v| v * v).sum::<f64>())
        .sum::<f64>()
        .sqrt()
        .max(f64::MIN_POSITIVE);
    for _sweep in 0..100 {
        let mut off = 0.0;
        for i in 0..p {
            for j in (i + 1)..p {
                off += m.get(i, j) * m.get(i, j);
            }
        }
        if off.sqrt() <= 1e-13 * scale {
            break;
        }
        for i in 0..p {
            for j in (i + 1)..p {
                let apq = m.get(i, j);
                if apq.abs() <= 1e-300 {
                    continue;
                }
                let app = m.get(i, i);
                let aqq = m.get(j, j);
                let theta = (aqq - app) / (2.0 * apq);
                let t = if theta >= 0.0 {
                    1.0 / (theta + (1.0 + theta * theta).sqrt())
                } else {
                    -1.0 / (-theta + (1.0 + theta * theta).sqrt())
                };
                let c = 1.0 / (1.0 + t * t).sqrt();
                let s = t * c;
                for k in 0..p {
                    let aki = m.get(k, i);
                    let akj = m.get(k, j);
                    m.set(k, i, c * aki - s * akj);
                    m.set(k, j, s * aki + c * akj);
                }
                for k in 0..p {
                    let aik = m.get(i, k);
                    let ajk = m.get(j, k);
                    m.set(i, k, c * aik - s * ajk);
                    m.set(j, k, s * aik + c * ajk);
                }
            }
        }
    }
    let mut eig: Vec<f64> = (0..p).map(|i| m.get(i, i)).collect();
    eig.sort_by(|x, y| x.partial_cmp(y).unwrap());
    eig
}
