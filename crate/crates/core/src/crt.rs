//! The graphical conditional randomization test: exact finite-sample tests of
//! `H0: Y ⊥ X_T | X_{−T}` using exchangeable copies that rotate only the
//! target columns.
//!
//! Statistics follow three templates: full-model fits (`LM-SST`, `LM-SSR`,
//! `GLM-Dev`), distilled fits where the response is first regressed on
//! `X_{−T}` once and the fitted values are reused for every copy (`GLM-L1-D`,
//! `GLM-L1-R-SST`, `LM-L1-R-SSR`), and arbitrary user closures. All are
//! oriented so that larger values mean stronger evidence against `H0`.

use std::sync::Arc;

use crate::data::DataMatrix;
use crate::error::{Error, Result};
use crate::gof_test::TestResult;
use crate::graph::Graph;
use crate::linalg::{least_squares, sq_norm};
use crate::pvalue::conservative_pvalue;
use crate::regress::{lasso_cv, logistic_irls, ols_with_tstats, Family};
use crate::sampler::{map_copies, SamplerConfig};
use crate::special::f_cdf;

/// Signature for user-supplied statistics: `(response, covariate matrix) →
/// value`. The harness never reveals whether the matrix is the original.
pub type CustomStat = Arc<dyn Fn(&[f64], &DataMatrix) -> Result<f64> + Send + Sync>;

/// Test statistic for the conditional randomization test.
#[derive(Clone)]
pub enum CrtStatistic {
    /// Sum over `j ∈ T` of squared OLS t-statistics from the full design.
    LmSst,
    /// Negated residual sum of squares of the full-design OLS fit.
    LmSsr,
    /// Negated deviance of the full-design logistic fit (binary response).
    GlmDev,
    /// Distilled: negated deviance of a logistic fit on `[Ŷ_0 | X_T]`.
    GlmL1D,
    /// Distilled: squared t-statistics of OLS of `y − Ŷ_0` on `X_T`.
    GlmL1RSst,
    /// Distilled: negated RSS of OLS of `y − Ŷ_0` on `X_T`.
    LmL1RSsr,
    /// Arbitrary statistic; larger must mean more evidence against `H0`.
    Custom(CustomStat),
}

impl std::fmt::Debug for CrtStatistic {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.name())
    }
}

impl PartialEq for CrtStatistic {
    fn eq(&self, other: &Self) -> bool {
        match (self, other) {
            (CrtStatistic::Custom(a), CrtStatistic::Custom(b)) => Arc::ptr_eq(a, b),
            _ => std::mem::discriminant(self) == std::mem::discriminant(other),
        }
    }
}

impl CrtStatistic {
    pub fn name(&self) -> &'static str {
        match self {
            CrtStatistic::LmSst => "lm-sst",
            CrtStatistic::LmSsr => "lm-ssr",
            CrtStatistic::GlmDev => "glm-dev",
            CrtStatistic::GlmL1D => "glm-l1-d",
            CrtStatistic::GlmL1RSst => "glm-l1-r-sst",
            CrtStatistic::LmL1RSsr => "lm-l1-r-ssr",
            CrtStatistic::Custom(_) => "custom",
        }
    }

    /// Inverse of [`CrtStatistic::name`] for the built-in statistics.
    pub fn from_name(name: &str) -> Option<CrtStatistic> {
        Some(match name {
            "lm-sst" => CrtStatistic::LmSst,
            "lm-ssr" => CrtStatistic::LmSsr,
            "glm-dev" => CrtStatistic::GlmDev,
            "glm-l1-d" => CrtStatistic::GlmL1D,
            "glm-l1-r-sst" => CrtStatistic::GlmL1RSst,
            "lm-l1-r-ssr" => CrtStatistic::LmL1RSsr,
            _ => return None,
        })
    }

    /// True for statistics that only make sense for a 0/1 response.
    pub fn requires_binary(&self) -> bool {
        matches!(
            self,
            CrtStatistic::GlmDev | CrtStatistic::GlmL1D | CrtStatistic::GlmL1RSst
        )
    }

    fn is_distilled(&self) -> bool {
        matches!(
            self,
            CrtStatistic::GlmL1D | CrtStatistic::GlmL1RSst | CrtStatistic::LmL1RSsr
        )
    }
}

/// One conditional randomization test instance.
#[derive(Clone, Debug)]
pub struct CrtProblem {
    pub y: Vec<f64>,
    pub x: DataMatrix,
    /// Nonempty target set `T` (0-based columns of `x`).
    pub target_set: Vec<usize>,
    pub graph: Graph,
    pub statistic: CrtStatistic,
    pub sampler: SamplerConfig,
    /// Folds for the cross-validated distillation fit.
    pub cv_folds: usize,
}

impl CrtProblem {
    pub fn new(
        y: Vec<f64>,
        x: DataMatrix,
        target_set: Vec<usize>,
        graph: Graph,
        statistic: CrtStatistic,
        sampler: SamplerConfig,
    ) -> CrtProblem {
        CrtProblem { y, x, target_set, graph, statistic, sampler, cv_folds: 5 }
    }
}

fn is_binary(y: &[f64]) -> bool {
    y.iter().all(|&v| v == 0.0 || v == 1.0)
}

/// Precomputed state shared across all copy evaluations.
struct CrtEvaluator<'a> {
    problem: &'a CrtProblem,
    /// Fitted values `Ŷ_0` from the distillation fit (response scale).
    y0: Option<Vec<f64>>,
    /// `y − Ŷ_0`.
    resid: Option<Vec<f64>>,
}

impl CrtEvaluator<'_> {
    fn value(&self, m: &DataMatrix) -> Result<f64> {
        let pr = self.problem;
        let y = &pr.y;
        let t = &pr.target_set;
        match &pr.statistic {
            CrtStatistic::LmSst => {
                let cols: Vec<&[f64]> = (0..m.n_cols()).map(|j| m.column(j)).collect();
                let fit = ols_with_tstats(y, &cols)?;
                let ts = fit.t_statistics.expect("OLS provides t-statistics");
                Ok(t.iter().map(|&j| ts[j] * ts[j]).sum())
            }
            CrtStatistic::LmSsr => {
                let cols: Vec<&[f64]> = (0..m.n_cols()).map(|j| m.column(j)).collect();
                let fit = least_squares(y, &cols)?;
                Ok(-sq_norm(&fit.residual))
            }
            CrtStatistic::GlmDev => {
                let cols: Vec<&[f64]> = (0..m.n_cols()).map(|j| m.column(j)).collect();
                let fit = logistic_irls(y, &cols)?;
                Ok(-fit.deviance.expect("IRLS provides deviance"))
            }
            CrtStatistic::GlmL1D => {
                let y0 = self.y0.as_ref().expect("distilled");
                let mut cols: Vec<&[f64]> = vec![y0];
                cols.extend(t.iter().map(|&j| m.column(j)));
                let fit = logistic_irls(y, &cols)?;
                Ok(-fit.deviance.expect("IRLS provides deviance"))
            }
            CrtStatistic::GlmL1RSst | CrtStatistic::LmL1RSsr => {
                let r = self.resid.as_ref().expect("distilled");
                let cols: Vec<&[f64]> = t.iter().map(|&j| m.column(j)).collect();
                if matches!(pr.statistic, CrtStatistic::GlmL1RSst) {
                    let fit = ols_with_tstats(r, &cols)?;
                    let ts = fit.t_statistics.expect("OLS provides t-statistics");
                    Ok(ts.iter().map(|&v| v * v).sum())
                } else {
                    let fit = least_squares(r, &cols)?;
                    Ok(-sq_norm(&fit.residual))
                }
            }
            CrtStatistic::Custom(f) => f(y, m),
        }
    }
}

fn validate_problem(pr: &CrtProblem) -> Result<()> {
    let n = pr.x.n_rows();
    let p = pr.x.n_cols();
    if pr.y.len() != n {
        return Err(Error::invalid(format!(
            "response has {} entries but data has {n} rows",
            pr.y.len()
        )));
    }
    if !pr.y.iter().all(|v| v.is_finite()) {
        return Err(Error::invalid("response contains non-finite values"));
    }
    if pr.graph.num_nodes() != p {
        return Err(Error::invalid("graph size does not match data columns"));
    }
    if pr.target_set.is_empty() {
        return Err(Error::invalid("target set must be non-empty"));
    }
    let mut seen = vec![false; p];
    for &j in &pr.target_set {
        if j >= p {
            return Err(Error::invalid(format!("target column {j} out of range")));
        }
        if seen[j] {
            return Err(Error::invalid(format!("target set repeats column {j}")));
        }
        seen[j] = true;
    }
    if pr.statistic.requires_binary() && !is_binary(&pr.y) {
        return Err(Error::invalid(format!(
            "statistic {} requires a binary 0/1 response",
            pr.statistic.name()
        )));
    }
    let t_len = pr.target_set.len();
    match pr.statistic {
        CrtStatistic::LmSst | CrtStatistic::LmSsr => {
            if n <= p + 1 {
                return Err(Error::invalid(format!(
                    "full-design statistic needs n > p + 1 (n = {n}, p = {p})"
                )));
            }
        }
        CrtStatistic::GlmDev => {
            if n <= p {
                return Err(Error::invalid(format!(
                    "glm-dev needs n > p (n = {n}, p = {p})"
                )));
            }
        }
        CrtStatistic::GlmL1D | CrtStatistic::GlmL1RSst | CrtStatistic::LmL1RSsr => {
            if n <= t_len + 2 {
                return Err(Error::invalid(format!(
                    "distilled statistic needs n > |T| + 2 (n = {n}, |T| = {t_len})"
                )));
            }
        }
        CrtStatistic::Custom(_) => {}
    }
    Ok(())
}

/// Run Algorithm 4: generate copies rotating only `X_T`, evaluate the
/// statistic on the original and each copy, and report the conservative
/// one-sided Monte Carlo p-value.
pub fn run_crt(problem: &CrtProblem) -> Result<TestResult> {
    validate_problem(problem)?;
    let g = &problem.graph;
    let t = &problem.target_set;

    let mut sampler = problem.sampler.clone();
    match &sampler.order {
        None => {
            let mut order = t.clone();
            order.sort_by_key(|&i| (g.degree(i), i));
            sampler.order = Some(order);
        }
        Some(order) => {
            let mut a = order.clone();
            let mut b = t.clone();
            a.sort_unstable();
            b.sort_unstable();
            if a != b {
                return Err(Error::invalid(
                    "sampler order must be a permutation of the target set",
                ));
            }
        }
    }

    let mut warnings = Vec::new();
    let (y0, resid) = if problem.statistic.is_distilled() {
        let family = match problem.statistic {
            CrtStatistic::LmL1RSsr => Family::Gaussian,
            _ => Family::Logistic,
        };
        let rest = problem.x.drop_columns(t);
        let cols: Vec<&[f64]> = (0..rest.n_cols()).map(|j| rest.column(j)).collect();
        let (_, fit) = lasso_cv(&problem.y, &cols, family, problem.cv_folds, sampler.seed)?;
        if !fit.converged {
            warnings.push("distillation fit did not converge".to_string());
        }
        let y0 = fit.fitted_values;
        let resid: Vec<f64> = problem.y.iter().zip(&y0).map(|(&a, &b)| a - b).collect();
        (Some(y0), Some(resid))
    } else {
        (None, None)
    };

    let evaluator = CrtEvaluator { problem, y0, resid };
    let observed = evaluator.value(&problem.x)?;
    let copy_values = map_copies(&problem.x, g, &sampler, |_, m| evaluator.value(m))?;
    let p = conservative_pvalue(observed, &copy_values)?;
    Ok(TestResult {
        observed,
        copy_values,
        pvalue: p,
        seed: sampler.seed,
        warnings,
    })
}

/// Bonferroni combination `min(1, |T| · min_i pVal_i)`.
pub fn bonferroni_combine(pvals: &[f64]) -> Result<f64> {
    if pvals.is_empty() {
        return Err(Error::invalid("cannot combine an empty p-value list"));
    }
    let mut min = f64::INFINITY;
    for &p in pvals {
        if !(p > 0.0 && p <= 1.0) {
            return Err(Error::invalid(format!("p-value {p} outside (0, 1]")));
        }
        min = min.min(p);
    }
    Ok((pvals.len() as f64 * min).min(1.0))
}

/// Per-variable CRT results plus their Bonferroni combination.
#[derive(Clone, Debug)]
pub struct PerVariableCrt {
    /// `(column, p-value)` for each singleton test, in target-set order.
    pub per_variable: Vec<(usize, f64)>,
    /// Bonferroni combination of the per-variable p-values.
    pub combined: f64,
}

/// Bonferroni-per-variable mode: run the CRT once per target column with
/// `T = {i}` and combine with [`bonferroni_combine`]. Each singleton run gets
/// its own seed so the runs mimic independent analyses.
pub fn run_crt_per_variable(problem: &CrtProblem) -> Result<PerVariableCrt> {
    validate_problem(problem)?;
    let mut per_variable = Vec::with_capacity(problem.target_set.len());
    for (k, &i) in problem.target_set.iter().enumerate() {
        let mut sub = problem.clone();
        sub.target_set = vec![i];
        sub.sampler.order = None;
        sub.sampler.seed = problem.sampler.seed.wrapping_add(k as u64 + 1);
        let r = run_crt(&sub)?;
        per_variable.push((i, r.pvalue));
    }
    let combined = bonferroni_combine(
        &per_variable.iter().map(|&(_, p)| p).collect::<Vec<f64>>(),
    )?;
    Ok(PerVariableCrt { per_variable, combined })
}

/// Classical nested-model F-test of `H0: β_T = 0` in the full linear model.
pub fn f_test_baseline(y: &[f64], x: &DataMatrix, t_set: &[usize]) -> Result<f64> {
    let n = x.n_rows();
    let p = x.n_cols();
    if y.len() != n {
        return Err(Error::invalid("response length does not match data rows"));
    }
    if t_set.is_empty() {
        return Err(Error::invalid("target set must be non-empty"));
    }
    for &j in t_set {
        if j >= p {
            return Err(Error::invalid(format!("target column {j} out of range")));
        }
    }
    if n <= p + 1 {
        return Err(Error::invalid(format!("F-test needs n > p + 1 (n = {n}, p = {p})")));
    }
    let full_cols: Vec<&[f64]> = (0..p).map(|j| x.column(j)).collect();
    let reduced = x.drop_columns(t_set);
    let red_cols: Vec<&[f64]> = (0..reduced.n_cols()).map(|j| reduced.column(j)).collect();
    let fit_full = least_squares(y, &full_cols)?;
    let fit_red = least_squares(y, &red_cols)?;
    if fit_full.rank < p + 1 {
        return Err(Error::invalid("full design is rank deficient"));
    }
    let rss1 = sq_norm(&fit_full.residual);
    let rss0 = sq_norm(&fit_red.residual);
    let d1 = t_set.len() as f64;
    let d2 = (n - p - 1) as f64;
    let f = ((rss0 - rss1).max(0.0) / d1) / (rss1 / d2);
    if !f.is_finite() {
        return Err(Error::numerical("degenerate F statistic (zero residual)"));
    }
    Ok(1.0 - f_cdf(f, d1, d2)?)
}
