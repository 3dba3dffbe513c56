//! Regression fitters backing the CRT statistics: OLS with t-statistics,
//! logistic regression by IRLS, and lasso (squared error or logistic) by
//! coordinate descent with optional K-fold cross-validation.
//!
//! Conventions shared by everything here:
//! - the intercept is always included and never penalized;
//! - lasso losses are `(1/2n)·RSS` (gaussian) and `(1/n)·NLL` (logistic), so
//!   `λ` is comparable across sample sizes;
//! - lasso predictors are standardized internally to population variance 1
//!   and coefficients are mapped back to the original scale.

use crate::data::SquareMatrix;
use crate::error::{Error, Result};
use crate::linalg::{cholesky, chol_solve, QrProjector};
use crate::rng::stream_rng;
use rand::seq::SliceRandom;

/// Response family for penalized fits.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Family {
    Gaussian,
    Logistic,
}

/// Output of any fitter in this module. `coefficients` excludes the
/// intercept, which is reported separately.
#[derive(Clone, Debug)]
pub struct FitSummary {
    pub intercept: f64,
    pub coefficients: Vec<f64>,
    /// Per-coefficient t-statistics; OLS only.
    pub t_statistics: Option<Vec<f64>>,
    /// Linear-scale fits for gaussian fits, probabilities for logistic.
    pub fitted_values: Vec<f64>,
    /// Residual sum of squares; gaussian fits only.
    pub rss: Option<f64>,
    /// `-2 log L`; logistic fits only.
    pub deviance: Option<f64>,
    /// Penalty actually used; lasso fits only.
    pub lambda: Option<f64>,
    /// λ path examined; cross-validated fits only.
    pub lambda_path: Option<Vec<f64>>,
    /// Pivoting dropped at least one column (its coefficient and t are 0).
    pub rank_deficient: bool,
    /// Residual variance is exactly zero, so t-statistics are sentinels.
    pub degenerate: bool,
    pub converged: bool,
}

impl FitSummary {
    fn base(n: usize) -> FitSummary {
        FitSummary {
            intercept: 0.0,
            coefficients: Vec::new(),
            t_statistics: None,
            fitted_values: vec![0.0; n],
            rss: None,
            deviance: None,
            lambda: None,
            lambda_path: None,
            rank_deficient: false,
            degenerate: false,
            converged: true,
        }
    }
}

const T_SENTINEL: f64 = 1e9;

/// OLS of `y` on `[1 | design]` with per-coefficient t-statistics.
pub fn ols_with_tstats(y: &[f64], design: &[&[f64]]) -> Result<FitSummary> {
    let n = y.len();
    let k = design.len();
    if n < k + 2 {
        return Err(Error::invalid(format!(
            "OLS with t-statistics needs n > k + 1 (n = {n}, k = {k})"
        )));
    }
    let qr = QrProjector::factor(n, design)?;
    let (fitted, residual) = qr.project(y);
    let beta = qr.coefficients(y);
    let rss = crate::linalg::sq_norm(&residual);
    let df = n - qr.rank();
    let rank_deficient = qr.rank() < k + 1;
    let scale = crate::linalg::sq_norm(y).max(1.0);
    let degenerate = df == 0 || rss <= 1e-24 * scale;
    let sigma2 = if degenerate { 0.0 } else { rss / df as f64 };
    let diag = qr.xtx_inverse_diag();
    let mut tstats = Vec::with_capacity(k);
    for j in 1..=k {
        let b = beta[j];
        let t = if diag[j].is_nan() {
            0.0 // pivoted out
        } else if degenerate {
            if b == 0.0 {
                0.0
            } else {
                b.signum() * T_SENTINEL
            }
        } else {
            b / (sigma2 * diag[j]).sqrt()
        };
        tstats.push(t);
    }
    let mut out = FitSummary::base(n);
    out.intercept = beta[0];
    out.coefficients = beta[1..].to_vec();
    out.t_statistics = Some(tstats);
    out.fitted_values = fitted;
    out.rss = Some(rss);
    out.rank_deficient = rank_deficient;
    out.degenerate = degenerate;
    Ok(out)
}

#[inline]
fn log1pexp(eta: f64) -> f64 {
    // ln(1 + e^eta), stable for |eta| large
    if eta > 0.0 {
        eta + (-eta).exp().ln_1p()
    } else {
        eta.exp().ln_1p()
    }
}

#[inline]
fn sigmoid(eta: f64) -> f64 {
    1.0 / (1.0 + (-eta).exp())
}

const ETA_CAP: f64 = 30.0;

fn bernoulli_deviance(y: &[f64], eta: &[f64]) -> f64 {
    2.0 * y
        .iter()
        .zip(eta)
        .map(|(&yi, &e)| log1pexp(e) - yi * e)
        .sum::<f64>()
}

fn check_binary(y: &[f64]) -> Result<()> {
    if y.iter().any(|&v| v != 0.0 && v != 1.0) {
        return Err(Error::invalid("logistic response must be coded 0/1"));
    }
    Ok(())
}

/// Logistic regression of `y ∈ {0,1}` on `[1 | design]` by IRLS with
/// step-halving. At most 25 iterations; non-convergence (including complete
/// separation, where the linear predictor cap engages) is reported through
/// `converged = false` on the returned capped iterate.
pub fn logistic_irls(y: &[f64], design: &[&[f64]]) -> Result<FitSummary> {
    logistic_irls_impl(y, design, None)
}

pub(crate) fn logistic_irls_impl(
    y: &[f64],
    design: &[&[f64]],
    mut trace: Option<&mut Vec<f64>>,
) -> Result<FitSummary> {
    let n = y.len();
    let k = design.len();
    if n <= k {
        return Err(Error::invalid(format!(
            "logistic regression needs n > k (n = {n}, k = {k})"
        )));
    }
    check_binary(y)?;
    for (j, c) in design.iter().enumerate() {
        if c.len() != n {
            return Err(Error::invalid(format!("design column {j} has wrong length")));
        }
    }

    let dim = k + 1;
    let mut beta = vec![0.0; dim];
    let eta_of = |beta: &[f64]| -> Vec<f64> {
        (0..n)
            .map(|i| {
                let mut e = beta[0];
                for (j, c) in design.iter().enumerate() {
                    e += beta[j + 1] * c[i];
                }
                e.clamp(-ETA_CAP, ETA_CAP)
            })
            .collect()
    };

    let mut eta = eta_of(&beta);
    let mut dev = bernoulli_deviance(y, &eta);
    if let Some(t) = trace.as_deref_mut() {
        t.push(dev);
    }
    let mut converged = false;
    for _ in 0..25 {
        let probs: Vec<f64> = eta.iter().map(|&e| sigmoid(e)).collect();
        // assemble the weighted normal equations X^T W X, X^T W z
        let mut a = SquareMatrix::zeros(dim);
        let mut b = vec![0.0; dim];
        for i in 0..n {
            let w = (probs[i] * (1.0 - probs[i])).max(1e-10);
            let z = eta[i] + (y[i] - probs[i]) / w;
            let mut xi = Vec::with_capacity(dim);
            xi.push(1.0);
            for c in design {
                xi.push(c[i]);
            }
            for r in 0..dim {
                for c in r..dim {
                    a.set(r, c, a.get(r, c) + w * xi[r] * xi[c]);
                }
                b[r] += w * xi[r] * z;
            }
        }
        for r in 0..dim {
            for c in 0..r {
                a.set(r, c, a.get(c, r));
            }
        }
        let l = match cholesky(&a) {
            Ok(l) => l,
            Err(_) => {
                // near-singular weighted design: ridge it slightly
                let bump = 1e-10 * (0..dim).map(|i| a.get(i, i)).fold(1.0, f64::max);
                for i in 0..dim {
                    a.set(i, i, a.get(i, i) + bump);
                }
                cholesky(&a)?
            }
        };
        let proposal = chol_solve(&l, &b);

        // step-halving keeps the deviance monotone
        let mut step = 1.0;
        let mut accepted = false;
        for _ in 0..20 {
            let cand: Vec<f64> = beta
                .iter()
                .zip(&proposal)
                .map(|(&old, &new)| old + step * (new - old))
                .collect();
            let cand_eta = eta_of(&cand);
            let cand_dev = bernoulli_deviance(y, &cand_eta);
            if cand_dev <= dev + 1e-12 {
                let done = (dev - cand_dev).abs() < 1e-10 * (1.0 + dev);
                beta = cand;
                eta = cand_eta;
                dev = cand_dev;
                accepted = true;
                if let Some(t) = trace.as_deref_mut() {
                    t.push(dev);
                }
                if done {
                    converged = true;
                }
                break;
            }
            step *= 0.5;
        }
        if !accepted {
            // even the smallest step fails to improve: the iterate is at the
            // optimum to within float precision
            converged = true;
            break;
        }
        if converged {
            break;
        }
    }

    let mut out = FitSummary::base(n);
    out.intercept = beta[0];
    out.coefficients = beta[1..].to_vec();
    out.fitted_values = eta.iter().map(|&e| sigmoid(e)).collect();
    out.deviance = Some(dev);
    out.converged = converged;
    Ok(out)
}

#[inline]
pub(crate) fn soft_threshold(z: f64, lambda: f64) -> f64 {
    if z > lambda {
        z - lambda
    } else if z < -lambda {
        z + lambda
    } else {
        0.0
    }
}

/// Column means and population standard deviations used by the internal
/// lasso standardization. Constant columns get scale 1 (their coefficient
/// stays 0 under any positive penalty).
struct Standardizer {
    means: Vec<f64>,
    scales: Vec<f64>,
}

impl Standardizer {
    fn fit(design: &[&[f64]]) -> Standardizer {
        let n = design.first().map_or(0, |c| c.len()).max(1);
        let means: Vec<f64> = design.iter().map(|c| c.iter().sum::<f64>() / n as f64).collect();
        let scales: Vec<f64> = design
            .iter()
            .zip(&means)
            .map(|(c, &m)| {
                let v = c.iter().map(|&x| (x - m) * (x - m)).sum::<f64>() / n as f64;
                let s = v.sqrt();
                if s > 1e-12 * (1.0 + m.abs()) {
                    s
                } else {
                    1.0
                }
            })
            .collect();
        Standardizer { means, scales }
    }

    fn transform(&self, design: &[&[f64]]) -> Vec<Vec<f64>> {
        design
            .iter()
            .enumerate()
            .map(|(j, c)| {
                c.iter()
                    .map(|&x| (x - self.means[j]) / self.scales[j])
                    .collect()
            })
            .collect()
    }
}

const LASSO_TOL: f64 = 1e-8;
const LASSO_MAX_SWEEPS: usize = 1000;

/// One gaussian coordinate-descent solve on standardized data, warm-started
/// from `beta`. `xs` columns have mean 0 and population variance 1 (or are
/// constant-zero); `yc` is the centered response. Returns sweeps used.
fn lasso_gaussian_path_step(
    xs: &[Vec<f64>],
    yc: &[f64],
    lambda: f64,
    beta: &mut [f64],
    resid: &mut [f64],
) -> (bool, usize) {
    let n = yc.len() as f64;
    let k = xs.len();
    let mut sweeps = 0;
    loop {
        // full sweep
        sweeps += 1;
        let mut max_delta = full_sweep_gaussian(xs, lambda, beta, resid, n, None);
        if max_delta < LASSO_TOL {
            return (true, sweeps);
        }
        if sweeps >= LASSO_MAX_SWEEPS {
            return (false, sweeps);
        }
        // iterate on the active set until stable, then re-check with a full sweep
        let active: Vec<usize> = (0..k).filter(|&j| beta[j] != 0.0).collect();
        loop {
            sweeps += 1;
            max_delta = full_sweep_gaussian(xs, lambda, beta, resid, n, Some(&active));
            if max_delta < LASSO_TOL || sweeps >= LASSO_MAX_SWEEPS {
                break;
            }
        }
        if sweeps >= LASSO_MAX_SWEEPS {
            return (false, sweeps);
        }
    }
}

fn full_sweep_gaussian(
    xs: &[Vec<f64>],
    lambda: f64,
    beta: &mut [f64],
    resid: &mut [f64],
    n: f64,
    subset: Option<&[usize]>,
) -> f64 {
    let mut max_delta = 0.0f64;
    let indices: Box<dyn Iterator<Item = usize>> = match subset {
        Some(s) => Box::new(s.iter().copied()),
        None => Box::new(0..xs.len()),
    };
    for j in indices {
        let xj = &xs[j];
        let old = beta[j];
        let mut rho = 0.0;
        for (xi, ri) in xj.iter().zip(resid.iter()) {
            rho += xi * ri;
        }
        rho = rho / n + old; // because columns have unit population variance
        let new = soft_threshold(rho, lambda);
        if new != old {
            let d = new - old;
            for (xi, ri) in xj.iter().zip(resid.iter_mut()) {
                *ri -= d * xi;
            }
            beta[j] = new;
            max_delta = max_delta.max(d.abs());
        }
    }
    max_delta
}

/// Lasso by coordinate descent at a single `λ`.
pub fn lasso_cd(y: &[f64], design: &[&[f64]], lambda: f64, family: Family) -> Result<FitSummary> {
    if lambda < 0.0 {
        return Err(Error::invalid("lasso penalty must be nonnegative"));
    }
    let n = y.len();
    if n == 0 {
        return Err(Error::invalid("lasso needs at least one observation"));
    }
    for (j, c) in design.iter().enumerate() {
        if c.len() != n {
            return Err(Error::invalid(format!("design column {j} has wrong length")));
        }
    }
    if family == Family::Logistic {
        check_binary(y)?;
    }
    let std = Standardizer::fit(design);
    let xs = std.transform(design);
    let mut beta_std = vec![0.0; design.len()];
    let fit = match family {
        Family::Gaussian => {
            let ybar = y.iter().sum::<f64>() / n as f64;
            let yc: Vec<f64> = y.iter().map(|&v| v - ybar).collect();
            let mut resid = yc.clone();
            let (converged, _) =
                lasso_gaussian_path_step(&xs, &yc, lambda, &mut beta_std, &mut resid);
            finish_gaussian_lasso(y, design, &std, &beta_std, ybar, lambda, converged)
        }
        Family::Logistic => {
            let mut b0 = 0.0;
            let converged = lasso_logistic_irls(&xs, y, lambda, &mut b0, &mut beta_std);
            finish_logistic_lasso(y, design, &std, &beta_std, b0, lambda, converged)
        }
    };
    Ok(fit)
}

fn finish_gaussian_lasso(
    y: &[f64],
    design: &[&[f64]],
    std: &Standardizer,
    beta_std: &[f64],
    ybar: f64,
    lambda: f64,
    converged: bool,
) -> FitSummary {
    let n = y.len();
    let coefficients: Vec<f64> = beta_std
        .iter()
        .zip(&std.scales)
        .map(|(&b, &s)| b / s)
        .collect();
    let intercept =
        ybar - coefficients.iter().zip(&std.means).map(|(&b, &m)| b * m).sum::<f64>();
    let mut fitted = vec![intercept; n];
    for (j, c) in design.iter().enumerate() {
        let b = coefficients[j];
        if b != 0.0 {
            for (f, &x) in fitted.iter_mut().zip(c.iter()) {
                *f += b * x;
            }
        }
    }
    let rss: f64 = y.iter().zip(&fitted).map(|(&yi, &fi)| (yi - fi) * (yi - fi)).sum();
    let mut out = FitSummary::base(n);
    out.intercept = intercept;
    out.coefficients = coefficients;
    out.fitted_values = fitted;
    out.rss = Some(rss);
    out.lambda = Some(lambda);
    out.converged = converged;
    out
}

fn finish_logistic_lasso(
    y: &[f64],
    design: &[&[f64]],
    std: &Standardizer,
    beta_std: &[f64],
    b0_std: f64,
    lambda: f64,
    converged: bool,
) -> FitSummary {
    let n = y.len();
    let coefficients: Vec<f64> = beta_std
        .iter()
        .zip(&std.scales)
        .map(|(&b, &s)| b / s)
        .collect();
    let intercept =
        b0_std - coefficients.iter().zip(&std.means).map(|(&b, &m)| b * m).sum::<f64>();
    let mut eta = vec![intercept; n];
    for (j, c) in design.iter().enumerate() {
        let b = coefficients[j];
        if b != 0.0 {
            for (e, &x) in eta.iter_mut().zip(c.iter()) {
                *e += b * x;
            }
        }
    }
    for e in eta.iter_mut() {
        *e = e.clamp(-ETA_CAP, ETA_CAP);
    }
    let dev = bernoulli_deviance(y, &eta);
    let mut out = FitSummary::base(n);
    out.intercept = intercept;
    out.coefficients = coefficients;
    out.fitted_values = eta.iter().map(|&e| sigmoid(e)).collect();
    out.deviance = Some(dev);
    out.lambda = Some(lambda);
    out.converged = converged;
    out
}

/// Penalized logistic fit on standardized predictors: outer quadratic
/// approximation, inner weighted coordinate descent.
fn lasso_logistic_irls(xs: &[Vec<f64>], y: &[f64], lambda: f64, b0: &mut f64, beta: &mut [f64]) -> bool {
    let n = y.len();
    let nf = n as f64;
    let k = xs.len();
    let eta_of = |b0: f64, beta: &[f64]| -> Vec<f64> {
        (0..n)
            .map(|i| {
                let mut e = b0;
                for j in 0..k {
                    if beta[j] != 0.0 {
                        e += beta[j] * xs[j][i];
                    }
                }
                e.clamp(-ETA_CAP, ETA_CAP)
            })
            .collect()
    };
    let mut eta = eta_of(*b0, beta);
    let mut dev = bernoulli_deviance(y, &eta);
    for _outer in 0..100 {
        let probs: Vec<f64> = eta.iter().map(|&e| sigmoid(e)).collect();
        let w: Vec<f64> = probs.iter().map(|&p| (p * (1.0 - p)).max(1e-5)).collect();
        let z: Vec<f64> = (0..n).map(|i| eta[i] + (y[i] - probs[i]) / w[i]).collect();
        // weighted CD on the quadratic surrogate
        let mut resid: Vec<f64> = (0..n)
            .map(|i| {
                let mut r = z[i] - *b0;
                for j in 0..k {
                    if beta[j] != 0.0 {
                        r -= beta[j] * xs[j][i];
                    }
                }
                r
            })
            .collect();
        let wsum: f64 = w.iter().sum();
        for _sweep in 0..100 {
            let mut max_delta = 0.0f64;
            // intercept update (unpenalized)
            let num: f64 = w.iter().zip(&resid).map(|(&wi, &ri)| wi * ri).sum();
            let d0 = num / wsum;
            if d0 != 0.0 {
                *b0 += d0;
                for r in resid.iter_mut() {
                    *r -= d0;
                }
                max_delta = max_delta.max(d0.abs());
            }
            for j in 0..k {
                let xj = &xs[j];
                let old = beta[j];
                let mut num = 0.0;
                let mut den = 0.0;
                for i in 0..n {
                    num += w[i] * xj[i] * resid[i];
                    den += w[i] * xj[i] * xj[i];
                }
                if den <= 0.0 {
                    continue;
                }
                let rho = num / nf + (den / nf) * old;
                let new = soft_threshold(rho, lambda) / (den / nf);
                if new != old {
                    let d = new - old;
                    for i in 0..n {
                        resid[i] -= d * xj[i];
                    }
                    beta[j] = new;
                    max_delta = max_delta.max(d.abs());
                }
            }
            if max_delta < LASSO_TOL {
                break;
            }
        }
        let new_eta = eta_of(*b0, beta);
        let new_dev = bernoulli_deviance(y, &new_eta);
        let done = (dev - new_dev).abs() < 1e-8 * (1.0 + dev);
        eta = new_eta;
        dev = new_dev;
        if done {
            return true;
        }
    }
    false
}

/// Smallest `λ` at which all penalized coefficients are zero.
fn lambda_max(xs: &[Vec<f64>], y: &[f64]) -> f64 {
    let n = y.len() as f64;
    let ybar = y.iter().sum::<f64>() / n;
    xs.iter()
        .map(|c| {
            let g: f64 = c.iter().zip(y).map(|(&x, &yi)| x * (yi - ybar)).sum();
            (g / n).abs()
        })
        .fold(0.0, f64::max)
}

const CV_PATH_LEN: usize = 50;

/// K-fold cross-validated lasso. Returns the selected `λ` and the full-data
/// refit at that `λ`. Fold assignment is a seeded shuffle; identical seeds
/// give identical selections.
pub fn lasso_cv(
    y: &[f64],
    design: &[&[f64]],
    family: Family,
    folds: usize,
    seed: u64,
) -> Result<(f64, FitSummary)> {
    let n = y.len();
    if folds < 2 || n < folds {
        return Err(Error::invalid(format!(
            "cross-validation needs n >= folds >= 2 (n = {n}, folds = {folds})"
        )));
    }
    let spread = {
        let ybar = y.iter().sum::<f64>() / n as f64;
        y.iter().map(|&v| (v - ybar).abs()).fold(0.0, f64::max)
    };
    if spread == 0.0 {
        return Err(Error::invalid("cross-validation response is constant"));
    }
    if family == Family::Logistic {
        check_binary(y)?;
    }
    if design.is_empty() {
        // intercept-only model: nothing to tune
        let fit = match family {
            Family::Gaussian => {
                let ybar = y.iter().sum::<f64>() / n as f64;
                let mut out = FitSummary::base(n);
                out.intercept = ybar;
                out.fitted_values = vec![ybar; n];
                out.rss = Some(y.iter().map(|&v| (v - ybar) * (v - ybar)).sum());
                out.lambda = Some(0.0);
                out
            }
            Family::Logistic => {
                let mut out = logistic_irls(y, &[])?;
                out.lambda = Some(0.0);
                out
            }
        };
        return Ok((0.0, fit));
    }

    let std = Standardizer::fit(design);
    let xs = std.transform(design);
    let lmax = lambda_max(&xs, y).max(1e-12);
    let path: Vec<f64> = (0..CV_PATH_LEN)
        .map(|t| lmax * (1e-3f64).powf(t as f64 / (CV_PATH_LEN - 1) as f64))
        .collect();

    // seeded shuffled fold assignment
    let mut indices: Vec<usize> = (0..n).collect();
    indices.shuffle(&mut stream_rng(seed, 0));
    let mut fold_of = vec![0usize; n];
    for (pos, &i) in indices.iter().enumerate() {
        fold_of[i] = pos % folds;
    }

    let mut cv_loss = vec![0.0f64; path.len()];
    for f in 0..folds {
        let train: Vec<usize> = (0..n).filter(|&i| fold_of[i] != f).collect();
        let test: Vec<usize> = (0..n).filter(|&i| fold_of[i] == f).collect();
        let ytr: Vec<f64> = train.iter().map(|&i| y[i]).collect();
        let xtr: Vec<Vec<f64>> = design
            .iter()
            .map(|c| train.iter().map(|&i| c[i]).collect())
            .collect();
        // standardize within the training fold, warm-start down the path
        let refs: Vec<&[f64]> = xtr.iter().map(|c| c.as_slice()).collect();
        let std_f = Standardizer::fit(&refs);
        let xs_f = std_f.transform(&refs);
        let ntr = ytr.len() as f64;
        match family {
            Family::Gaussian => {
                let ybar = ytr.iter().sum::<f64>() / ntr;
                let yc: Vec<f64> = ytr.iter().map(|&v| v - ybar).collect();
                let mut beta = vec![0.0; design.len()];
                let mut resid = yc.clone();
                for (t, &lam) in path.iter().enumerate() {
                    lasso_gaussian_path_step(&xs_f, &yc, lam, &mut beta, &mut resid);
                    // held-out squared error on the original scale
                    let mut loss = 0.0;
                    for &i in &test {
                        let mut pred = ybar;
                        for (j, b) in beta.iter().enumerate() {
                            if *b != 0.0 {
                                pred += b * (design[j][i] - std_f.means[j]) / std_f.scales[j];
                            }
                        }
                        loss += (y[i] - pred) * (y[i] - pred);
                    }
                    cv_loss[t] += loss;
                }
            }
            Family::Logistic => {
                let mut b0 = 0.0;
                let mut beta = vec![0.0; design.len()];
                for (t, &lam) in path.iter().enumerate() {
                    lasso_logistic_irls(&xs_f, &ytr, lam, &mut b0, &mut beta);
                    let mut loss = 0.0;
                    for &i in &test {
                        let mut e = b0;
                        for (j, b) in beta.iter().enumerate() {
                            if *b != 0.0 {
                                e += b * (design[j][i] - std_f.means[j]) / std_f.scales[j];
                            }
                        }
                        let e = e.clamp(-ETA_CAP, ETA_CAP);
                        loss += 2.0 * (log1pexp(e) - y[i] * e);
                    }
                    cv_loss[t] += loss;
                }
            }
        }
    }

    // argmin; ties resolve to the larger lambda (earlier path index)
    let mut best = 0;
    for t in 1..path.len() {
        if cv_loss[t] < cv_loss[best] {
            best = t;
        }
    }
    let lam = path[best];

    // full-data refit, warm-started along the path for speed
    let mut fit = match family {
        Family::Gaussian => {
            let ybar = y.iter().sum::<f64>() / n as f64;
            let yc: Vec<f64> = y.iter().map(|&v| v - ybar).collect();
            let mut beta = vec![0.0; design.len()];
            let mut resid = yc.clone();
            let mut converged = true;
            for &lam_t in path.iter().take(best + 1) {
                let (ok, _) = lasso_gaussian_path_step(&xs, &yc, lam_t, &mut beta, &mut resid);
                converged = ok;
            }
            finish_gaussian_lasso(y, design, &std, &beta, ybar, lam, converged)
        }
        Family::Logistic => {
            let mut b0 = 0.0;
            let mut beta = vec![0.0; design.len()];
            let mut converged = true;
            for &lam_t in path.iter().take(best + 1) {
                converged = lasso_logistic_irls(&xs, y, lam_t, &mut b0, &mut beta);
            }
            finish_logistic_lasso(y, design, &std, &beta, b0, lam, converged)
        }
    };
    fit.lambda_path = Some(path);
    Ok((lam, fit))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::stream_rng;
    use approx::assert_abs_diff_eq;
    use rand::Rng;
    use rand_distr::StandardNormal;

    fn randn(n: usize, seed: u64, stream: u64) -> Vec<f64> {
        let mut rng = stream_rng(seed, stream);
        (0..n).map(|_| rng.sample(StandardNormal)).collect()
    }

    #[test]
    fn ols_single_predictor_matches_correlation_identity() {
        let n = 30;
        let x = randn(n, 1, 0);
        let noise = randn(n, 1, 1);
        let y: Vec<f64> = x.iter().zip(&noise).map(|(&a, &e)| 0.7 * a + e).collect();
        let fit = ols_with_tstats(&y, &[&x]).unwrap();
        // t = sqrt(n-2) r / sqrt(1 - r^2)
        let xbar = x.iter().sum::<f64>() / n as f64;
        let ybar = y.iter().sum::<f64>() / n as f64;
        let (mut sxy, mut sxx, mut syy) = (0.0, 0.0, 0.0);
        for i in 0..n {
            sxy += (x[i] - xbar) * (y[i] - ybar);
            sxx += (x[i] - xbar) * (x[i] - xbar);
            syy += (y[i] - ybar) * (y[i] - ybar);
        }
        let r = sxy / (sxx * syy).sqrt();
        let t_expect = ((n - 2) as f64).sqrt() * r / (1.0 - r * r).sqrt();
        let t = fit.t_statistics.as_ref().unwrap()[0];
        assert_abs_diff_eq!(t, t_expect, epsilon = 1e-9 * t_expect.abs());
        assert!(!fit.rank_deficient && !fit.degenerate);
    }

    #[test]
    fn ols_permuting_columns_permutes_tstats() {
        let n = 25;
        let a = randn(n, 2, 0);
        let b = randn(n, 2, 1);
        let y = randn(n, 2, 2);
        let f1 = ols_with_tstats(&y, &[&a, &b]).unwrap();
        let f2 = ols_with_tstats(&y, &[&b, &a]).unwrap();
        let t1 = f1.t_statistics.unwrap();
        let t2 = f2.t_statistics.unwrap();
        assert_abs_diff_eq!(t1[0], t2[1], epsilon = 1e-10);
        assert_abs_diff_eq!(t1[1], t2[0], epsilon = 1e-10);
    }

    #[test]
    fn ols_degenerate_and_rank_deficient_flags() {
        let n = 12;
        let x = randn(n, 3, 0);
        let y: Vec<f64> = x.iter().map(|&v| 2.0 * v + 1.0).collect();
        let fit = ols_with_tstats(&y, &[&x]).unwrap();
        assert!(fit.degenerate);
        assert_eq!(fit.t_statistics.unwrap()[0], T_SENTINEL);

        let dup: Vec<f64> = x.iter().map(|&v| -3.0 * v).collect();
        let y2 = randn(n, 3, 1);
        let fit = ols_with_tstats(&y2, &[&x, &dup]).unwrap();
        assert!(fit.rank_deficient);
        let ts = fit.t_statistics.unwrap();
        assert_eq!(ts.iter().filter(|t| **t == 0.0).count(), 1);

        assert!(ols_with_tstats(&[1.0, 2.0], &[&[1.0, 2.0]]).is_err()); // n <= k+1
    }

    #[test]
    fn logistic_intercept_only_closed_form() {
        let y = [0.0, 0.0, 1.0, 1.0];
        let fit = logistic_irls(&y, &[]).unwrap();
        assert_abs_diff_eq!(fit.deviance.unwrap(), 8.0 * (2.0f64).ln(), epsilon = 1e-6);
        assert_abs_diff_eq!(fit.intercept, 0.0, epsilon = 1e-6);
        assert!(fit.converged);
    }

    #[test]
    fn logistic_all_zeros_caps_out() {
        let y = [0.0; 8];
        let fit = logistic_irls(&y, &[]).unwrap();
        assert!(fit.deviance.unwrap() < 1e-8, "deviance {}", fit.deviance.unwrap());
        assert!(fit.fitted_values.iter().all(|&p| p < 1e-9));
    }

    #[test]
    fn logistic_deviance_monotone_with_step_halving() {
        let n = 40;
        let x = randn(n, 4, 0);
        let mut rng = stream_rng(4, 1);
        let y: Vec<f64> = x
            .iter()
            .map(|&v| if rng.random::<f64>() < sigmoid(1.5 * v) { 1.0 } else { 0.0 })
            .collect();
        let mut trace = Vec::new();
        let fit = logistic_irls_impl(&y, &[&x], Some(&mut trace)).unwrap();
        assert!(fit.converged);
        for w in trace.windows(2) {
            assert!(w[1] <= w[0] + 1e-12, "deviance rose: {} -> {}", w[0], w[1]);
        }
        // matches a crude gradient-descent oracle on the same NLL
        let (b0, b1) = (fit.intercept, fit.coefficients[0]);
        let grad: f64 = x
            .iter()
            .zip(&y)
            .map(|(&xi, &yi)| (sigmoid(b0 + b1 * xi) - yi) * xi)
            .sum();
        assert!(grad.abs() < 1e-5 * n as f64, "score not zero: {grad}");
    }

    #[test]
    fn logistic_rejects_non_binary() {
        assert!(logistic_irls(&[0.0, 0.5, 1.0], &[]).is_err());
    }

    #[test]
    fn lasso_null_threshold_and_unpenalized_limit() {
        let n = 50;
        let x = randn(n, 5, 0);
        let y = randn(n, 5, 1);
        // lambda at/above the max gradient: all penalized coefficients zero
        let std = Standardizer::fit(&[&x]);
        let xs = std.transform(&[&x]);
        let lmax = lambda_max(&xs, &y);
        let fit = lasso_cd(&y, &[&x], lmax * 1.0001, Family::Gaussian).unwrap();
        assert_eq!(fit.coefficients[0], 0.0);

        // lambda = 0 matches OLS
        let x2 = randn(n, 5, 2);
        let ols = ols_with_tstats(&y, &[&x, &x2]).unwrap();
        let fit = lasso_cd(&y, &[&x, &x2], 0.0, Family::Gaussian).unwrap();
        for (a, b) in fit.coefficients.iter().zip(&ols.coefficients) {
            assert_abs_diff_eq!(*a, *b, epsilon = 1e-6);
        }
        assert_abs_diff_eq!(fit.intercept, ols.intercept, epsilon = 1e-6);
    }

    #[test]
    fn lasso_orthonormal_design_is_soft_threshold() {
        // build two exactly orthogonal centered columns with population var 1
        let n = 8;
        let a: Vec<f64> = (0..n).map(|i| if i < 4 { 1.0 } else { -1.0 }).collect();
        let b: Vec<f64> = (0..n).map(|i| if i % 2 == 0 { 1.0 } else { -1.0 }).collect();
        // both already have mean 0, population variance 1, and a.b = 0
        let y = randn(n, 6, 0);
        let lam = 0.11;
        let fit = lasso_cd(&y, &[&a, &b], lam, Family::Gaussian).unwrap();
        let ols = ols_with_tstats(&y, &[&a, &b]).unwrap();
        for j in 0..2 {
            let expect = soft_threshold(ols.coefficients[j], lam);
            assert_abs_diff_eq!(fit.coefficients[j], expect, epsilon = 1e-7);
        }
    }

    #[test]
    fn lasso_kkt_conditions_hold() {
        let n = 60;
        let cols: Vec<Vec<f64>> = (0..6).map(|j| randn(n, 7, j as u64)).collect();
        let signal: Vec<f64> = (0..n)
            .map(|i| 1.4 * cols[0][i] - 0.8 * cols[3][i])
            .collect();
        let noise = randn(n, 8, 0);
        let y: Vec<f64> = signal.iter().zip(&noise).map(|(s, e)| s + e).collect();
        let refs: Vec<&[f64]> = cols.iter().map(|c| c.as_slice()).collect();
        let lam = 0.15;
        let fit = lasso_cd(&y, &refs, lam, Family::Gaussian).unwrap();
        // KKT on the standardized scale the solver used
        let std = Standardizer::fit(&refs);
        let xs = std.transform(&refs);
        let resid: Vec<f64> = y.iter().zip(&fit.fitted_values).map(|(a, b)| a - b).collect();
        for (j, xj) in xs.iter().enumerate() {
            let g: f64 =
                xj.iter().zip(&resid).map(|(&x, &r)| x * r).sum::<f64>() / n as f64;
            let beta_std = fit.coefficients[j] * std.scales[j];
            if beta_std == 0.0 {
                assert!(g.abs() <= lam + 1e-6, "KKT violated at zero coef {j}: |g| = {}", g.abs());
            } else {
                assert_abs_diff_eq!(g, lam * beta_std.signum(), epsilon = 1e-6);
            }
        }
    }

    #[test]
    fn lasso_logistic_runs_and_shrinks() {
        let n = 80;
        let x = randn(n, 9, 0);
        let junk = randn(n, 9, 1);
        let mut rng = stream_rng(9, 2);
        let y: Vec<f64> = x
            .iter()
            .map(|&v| if rng.random::<f64>() < sigmoid(2.0 * v) { 1.0 } else { 0.0 })
            .collect();
        let fit = lasso_cd(&y, &[&x, &junk], 0.05, Family::Logistic).unwrap();
        assert!(fit.coefficients[0] > 0.5, "signal coef {}", fit.coefficients[0]);
        assert!(fit.coefficients[1].abs() < 0.3, "noise coef {}", fit.coefficients[1]);
        let strong = lasso_cd(&y, &[&x, &junk], 10.0, Family::Logistic).unwrap();
        assert_eq!(strong.coefficients, vec![0.0, 0.0]);
    }

    #[test]
    fn lasso_cv_sanity() {
        let n = 60;
        // strong single predictor
        let x = randn(n, 10, 0);
        let junk: Vec<Vec<f64>> = (1..5).map(|j| randn(n, 10, j as u64)).collect();
        let y: Vec<f64> = x.iter().map(|&v| 3.0 * v).zip(randn(n, 11, 0)).map(|(s, e)| s + 0.3 * e).collect();
        let mut cols: Vec<&[f64]> = vec![&x];
        cols.extend(junk.iter().map(|c| c.as_slice()));
        let (lam, fit) = lasso_cv(&y, &cols, Family::Gaussian, 5, 42).unwrap();
        assert!(fit.coefficients[0].abs() > 1.0, "signal missed: {:?}", fit.coefficients);
        assert!(lam > 0.0);
        // determinism
        let (lam2, _) = lasso_cv(&y, &cols, Family::Gaussian, 5, 42).unwrap();
        assert_eq!(lam, lam2);

        // pure noise: near-empty models in most runs
        let mut sparse_runs = 0;
        for seed in 0..10u64 {
            let noise_y = randn(n, 20 + seed, 3);
            let (_, f) = lasso_cv(&noise_y, &cols, Family::Gaussian, 5, seed).unwrap();
            if f.coefficients.iter().filter(|b| **b != 0.0).count() <= 2 {
                sparse_runs += 1;
            }
        }
        assert!(sparse_runs >= 9, "only {sparse_runs}/10 runs were near-empty");
    }

    #[test]
    fn lasso_cv_rejects_bad_inputs() {
        let y = [1.0; 10];
        let x = randn(10, 30, 0);
        assert!(lasso_cv(&y, &[&x], Family::Gaussian, 5, 0).is_err()); // constant y
        let y2 = randn(10, 31, 0);
        assert!(lasso_cv(&y2, &[&x], Family::Gaussian, 1, 0).is_err()); // folds < 2
        assert!(lasso_cv(&y2, &[&x], Family::Gaussian, 11, 0).is_err()); // folds > n
    }

    #[test]
    fn lasso_cv_empty_design_returns_intercept_only() {
        let y = randn(12, 33, 0);
        let (lam, fit) = lasso_cv(&y, &[], Family::Gaussian, 4, 1).unwrap();
        assert_eq!(lam, 0.0);
        let ybar = y.iter().sum::<f64>() / 12.0;
        assert_abs_diff_eq!(fit.intercept, ybar, epsilon = 1e-12);
    }

    #[test]
    fn row_duplication_leaves_gaussian_fits_unchanged() {
        let n = 20;
        let x = randn(n, 40, 0);
        let y = randn(n, 40, 1);
        let fit1 = lasso_cd(&y, &[&x], 0.07, Family::Gaussian).unwrap();
        let x2: Vec<f64> = x.iter().chain(x.iter()).copied().collect();
        let y2: Vec<f64> = y.iter().chain(y.iter()).copied().collect();
        let fit2 = lasso_cd(&y2, &[&x2], 0.07, Family::Gaussian).unwrap();
        assert_abs_diff_eq!(fit1.coefficients[0], fit2.coefficients[0], epsilon = 1e-7);

        let o1 = ols_with_tstats(&y, &[&x]).unwrap();
        let o2 = ols_with_tstats(&y2, &[&x2]).unwrap();
        assert_abs_diff_eq!(o1.coefficients[0], o2.coefficients[0], epsilon = 1e-10);
    }
}
