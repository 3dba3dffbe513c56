//! Goodness-of-fit statistics for a hypothesized graph.
//!
//! Two families:
//! - **pairwise residual correlations** over non-edges (PRC with the union
//!   neighborhood, ERC with each node's own neighborhood), aggregated as a
//!   truncated sum of squared z-scores, optionally weighted;
//! - **F-statistics** for adding one extra column to each node's neighborhood
//!   regression (`F_Σ`, `F_max`, and the localized `F_Σ`), plus the
//!   `ℓ1`-penalized likelihood-ratio statistic `GLR-ℓ1`.
//!
//! All statistics are pure functions of the data matrix; sums run in a fixed
//! index order so results are bit-reproducible.

use crate::data::{DataMatrix, SquareMatrix};
use crate::error::{Error, Result};
use crate::ggm::sample_covariance;
use crate::glasso::{self, GlassoProblem};
use crate::graph::Graph;
use crate::linalg::{dot, norm2, sq_norm, QrProjector};
use crate::special::{normal_cdf, normal_inv_cdf, student_t_cdf};

/// Default truncation level δ for the z-score sums: a pair contributes only
/// when its z-score clears the upper-tail cut `Φ⁻¹(1−δ)`.
pub const DEFAULT_DELTA: f64 = 0.05;
/// z-score cap applied when a pair p-value underflows to 0.
pub const Z_CLAMP: f64 = 38.0;
/// Value reported by an F-statistic whose denominator is numerically zero.
pub const PHI_SENTINEL: f64 = 1e18;

/// Everything computed for one non-edge pair by PRC or ERC.
#[derive(Clone, Copy, Debug)]
pub struct PairQuantities {
    /// Residual correlation (γ̂ for PRC, γ̃ for ERC).
    pub gamma: f64,
    /// Test statistic on its reference scale (t̂ for PRC, ξ̃ for ERC).
    pub stat: f64,
    /// Two-sided p-value.
    pub p: f64,
    /// z-score `−Φ⁻¹(p/2)`, clamped to [`Z_CLAMP`].
    pub z: f64,
    /// Conditioning-set size (`|N_i ∪ N_j|` for PRC, `min(|N_i|,|N_j|)` for ERC).
    pub u: usize,
}

/// Statistic value plus bookkeeping about skipped pairs/terms.
#[derive(Clone, Debug)]
pub struct StatDetail {
    pub value: f64,
    /// Pairs (or F-terms) that entered the computation.
    pub used: usize,
    /// Pairs skipped because the sample-size precondition failed.
    pub skipped: usize,
}

impl StatDetail {
    /// True when every candidate term had to be skipped (value forced to 0).
    pub fn all_skipped(&self) -> bool {
        self.used == 0 && self.skipped > 0
    }
}

fn z_from_p(p: f64) -> f64 {
    match normal_inv_cdf(p / 2.0) {
        Ok(q) => (-q).min(Z_CLAMP),
        Err(_) => Z_CLAMP, // p underflowed to 0
    }
}

const GAMMA_CLAMP: f64 = 1.0 - 1e-12;

/// PRC quantities for one non-edge pair: residuals of `x_i` and `x_j` on
/// `[1 | x_{N_i ∪ N_j}]`, the correlation t-test on `n − 2 − u` degrees of
/// freedom.
pub fn prc_pair_quantities(
    x: &DataMatrix,
    g: &Graph,
    i: usize,
    j: usize,
) -> Result<PairQuantities> {
    let n = x.n_rows();
    let mut union: Vec<usize> = g.neighbors(i).to_vec();
    for &v in g.neighbors(j) {
        if !union.contains(&v) {
            union.push(v);
        }
    }
    union.sort_unstable();
    let u = union.len();
    if n <= u + 2 {
        return Err(Error::invalid(format!(
            "pair ({i},{j}) needs n > u + 2 (n = {n}, u = {u})"
        )));
    }
    let cols: Vec<&[f64]> = union.iter().map(|&v| x.column(v)).collect();
    let qr = QrProjector::factor(n, &cols)?;
    let ri = qr.residual(x.column(i));
    let rj = qr.residual(x.column(j));
    let (ni, nj) = (norm2(&ri), norm2(&rj));
    let scale = norm2(x.column(i)).max(norm2(x.column(j))).max(1.0);
    let gamma = if ni < 1e-14 * scale || nj < 1e-14 * scale {
        0.0
    } else {
        (dot(&ri, &rj) / (ni * nj)).clamp(-GAMMA_CLAMP, GAMMA_CLAMP)
    };
    let dof = (n - 2 - u) as f64;
    let t = dof.sqrt() * gamma / (1.0 - gamma * gamma).sqrt();
    let p = 2.0 * student_t_cdf(-t.abs(), dof)?;
    Ok(PairQuantities { gamma, stat: t, p, z: z_from_p(p), u })
}

/// ERC quantities for one non-edge pair, from per-node own-neighborhood
/// residuals supplied by the caller (they are shared across all pairs).
fn erc_pair_from_residuals(
    ri: &[f64],
    rj: &[f64],
    scale: f64,
    u: usize,
    n: usize,
) -> Result<PairQuantities> {
    if n <= u + 2 {
        return Err(Error::invalid("pair needs n > u + 2"));
    }
    let (ni, nj) = (norm2(ri), norm2(rj));
    let gamma = if ni < 1e-14 * scale || nj < 1e-14 * scale {
        0.0
    } else {
        (dot(ri, rj) / (ni * nj)).clamp(-GAMMA_CLAMP, GAMMA_CLAMP)
    };
    // Fisher transform on n - 2 - u effective observations
    let xi = 0.5 * ((n - 2 - u) as f64).sqrt() * ((1.0 + gamma) / (1.0 - gamma)).ln();
    let p = 2.0 * normal_cdf(-xi.abs());
    Ok(PairQuantities { gamma, stat: xi, p, z: z_from_p(p), u })
}

fn check_weights(weights: &SquareMatrix, p: usize) -> Result<()> {
    if weights.dim() != p {
        return Err(Error::invalid(format!(
            "weight matrix is {}x{} but data has {p} columns",
            weights.dim(),
            weights.dim()
        )));
    }
    if weights.asymmetry() > 1e-12 {
        return Err(Error::invalid("weight matrix must be symmetric"));
    }
    for i in 0..p {
        for j in 0..p {
            if !(weights.get(i, j) >= 0.0) {
                return Err(Error::invalid("weights must be nonnegative"));
            }
        }
    }
    Ok(())
}

fn pair_sum(
    x: &DataMatrix,
    g: &Graph,
    delta: f64,
    weights: Option<&SquareMatrix>,
    erc: bool,
) -> Result<StatDetail> {
    let p = x.n_cols();
    let n = x.n_rows();
    if p != g.num_nodes() {
        return Err(Error::invalid("data and graph dimensions differ"));
    }
    if !(delta > 0.0 && delta < 1.0) {
        return Err(Error::invalid(format!("truncation delta = {delta} outside (0,1)")));
    }
    if let Some(w) = weights {
        check_weights(w, p)?;
    }
    // Truncation is a cut on the z-score itself: a pair enters the sum only
    // when z >= Φ⁻¹(1−δ), i.e. its one-sided tail probability is ≤ δ.
    let z_cut = -normal_inv_cdf(delta)?;

    // per-node own-neighborhood residuals, shared by every ERC pair
    let own_residuals: Option<Vec<Vec<f64>>> = if erc {
        let mut rs = Vec::with_capacity(p);
        for i in 0..p {
            if n > g.degree(i) + 1 {
                let cols: Vec<&[f64]> = g.neighbors(i).iter().map(|&v| x.column(v)).collect();
                let qr = QrProjector::factor(n, &cols)?;
                rs.push(qr.residual(x.column(i)));
            } else {
                rs.push(Vec::new()); // saturated; pairs touching it resolve via u
            }
        }
        Some(rs)
    } else {
        None
    };

    let mut value = 0.0;
    let mut used = 0;
    let mut skipped = 0;
    for (i, j) in g.non_edge_pairs() {
        let quantities = if let Some(rs) = &own_residuals {
            let u = g.degree(i).min(g.degree(j));
            if n <= u + 2 || rs[i].is_empty() || rs[j].is_empty() {
                skipped += 1;
                continue;
            }
            let scale = norm2(x.column(i)).max(norm2(x.column(j))).max(1.0);
            erc_pair_from_residuals(&rs[i], &rs[j], scale, u, n)?
        } else {
            match prc_pair_quantities(x, g, i, j) {
                Ok(q) => q,
                Err(Error::Invalid(_)) => {
                    skipped += 1;
                    continue;
                }
                Err(e) => return Err(e),
            }
        };
        used += 1;
        if quantities.z >= z_cut {
            let w = weights.map_or(1.0, |w| w.get(i, j));
            value += w * quantities.z * quantities.z;
        }
    }
    Ok(StatDetail { value, used, skipped })
}

/// `T_PRC`: truncated sum of squared z-scores from partial residual
/// correlations over all non-edges; a pair enters when `z ≥ Φ⁻¹(1−δ)`.
pub fn prc(x: &DataMatrix, g: &Graph, delta: f64) -> Result<f64> {
    Ok(pair_sum(x, g, delta, None, false)?.value)
}

pub fn prc_detailed(
    x: &DataMatrix,
    g: &Graph,
    delta: f64,
    weights: Option<&SquareMatrix>,
) -> Result<StatDetail> {
    pair_sum(x, g, delta, weights, false)
}

/// `T_ERC`: as PRC but with each node's own-neighborhood residuals and the
/// Fisher z-transform.
pub fn erc(x: &DataMatrix, g: &Graph, delta: f64) -> Result<f64> {
    Ok(pair_sum(x, g, delta, None, true)?.value)
}

pub fn erc_detailed(
    x: &DataMatrix,
    g: &Graph,
    delta: f64,
    weights: Option<&SquareMatrix>,
) -> Result<StatDetail> {
    pair_sum(x, g, delta, weights, true)
}

/// Weighted variants `Σ w_ij z_ij²` over the same truncated pair set.
pub fn prc_weighted(
    x: &DataMatrix,
    g: &Graph,
    delta: f64,
    weights: &SquareMatrix,
) -> Result<f64> {
    Ok(pair_sum(x, g, delta, Some(weights), false)?.value)
}

pub fn erc_weighted(
    x: &DataMatrix,
    g: &Graph,
    delta: f64,
    weights: &SquareMatrix,
) -> Result<f64> {
    Ok(pair_sum(x, g, delta, Some(weights), true)?.value)
}

/// The banded weighting scheme: weight `inside` for `|i − j| <= width`,
/// `outside` elsewhere (diagonal unused).
pub fn banded_weights(p: usize, width: usize, inside: f64, outside: f64) -> SquareMatrix {
    let mut w = SquareMatrix::zeros(p);
    for i in 0..p {
        for j in 0..p {
            let v = if i.abs_diff(j) <= width { inside } else { outside };
            w.set(i, j, v);
        }
    }
    w
}

/// Classical F-statistic for adding columns `a_set` to the regression of
/// `x_i` on `[1 | x_{N_i}]`:
/// `φ_A = [ (RSS_N − RSS_{N∪A}) / |A| ] / [ RSS_{N∪A} / (n − h_i − |A|) ]`
/// with `h_i = |N_i| + 1`.
pub fn fisher_phi(x: &DataMatrix, i: usize, neighbors: &[usize], a_set: &[usize]) -> Result<f64> {
    let n = x.n_rows();
    let h = neighbors.len() + 1;
    if a_set.is_empty() {
        return Err(Error::invalid("fisher_phi needs a non-empty added set"));
    }
    for &a in a_set {
        if a == i || neighbors.contains(&a) || a >= x.n_cols() {
            return Err(Error::invalid(format!("added column {a} invalid for node {i}")));
        }
    }
    if n <= h + a_set.len() {
        return Err(Error::invalid(format!(
            "fisher_phi needs n > h_i + |A| (n = {n}, h = {h}, |A| = {})",
            a_set.len()
        )));
    }
    let inner: Vec<&[f64]> = neighbors.iter().map(|&v| x.column(v)).collect();
    let mut outer = inner.clone();
    outer.extend(a_set.iter().map(|&a| x.column(a)));
    let qr_in = QrProjector::factor(n, &inner)?;
    let qr_out = QrProjector::factor(n, &outer)?;
    let rss_in = sq_norm(&qr_in.residual(x.column(i)));
    let rss_out = sq_norm(&qr_out.residual(x.column(i)));
    let num = (rss_in - rss_out).max(0.0) / a_set.len() as f64;
    let den = rss_out / (n - h - a_set.len()) as f64;
    if den < 1e-14 * num.max(1.0) {
        return Ok(PHI_SENTINEL);
    }
    Ok(num / den)
}

/// All singleton F-statistics at node `i`: `(a, φ_{{a}}(x_i))` for every
/// non-neighbor `a`, computed from a single QR factorization of
/// `[1 | x_{N_i}]` plus one extra projection per candidate.
/// Requires `n > h_i + 1`.
pub(crate) fn singleton_phis(x: &DataMatrix, g: &Graph, i: usize) -> Result<Vec<(usize, f64)>> {
    let n = x.n_rows();
    let p = x.n_cols();
    let neighbors = g.neighbors(i);
    let h = neighbors.len() + 1;
    if n <= h + 1 {
        return Err(Error::invalid(format!(
            "node {i} needs n > h_i + 1 (n = {n}, h = {h})"
        )));
    }
    let cols: Vec<&[f64]> = neighbors.iter().map(|&v| x.column(v)).collect();
    let qr = QrProjector::factor(n, &cols)?;
    let ri = qr.residual(x.column(i));
    let rss_i = sq_norm(&ri);
    let dof = (n - h - 1) as f64;
    let mut out = Vec::with_capacity(p - h);
    for a in 0..p {
        if a == i || g.has_edge(i, a) {
            continue;
        }
        let rho = qr.residual(x.column(a));
        let rho_sq = sq_norm(&rho);
        let phi = if rho_sq < 1e-20 * sq_norm(x.column(a)).max(1.0) {
            // x_a adds nothing beyond the neighborhood span
            0.0
        } else {
            let c = dot(&ri, &rho);
            let num = (c * c / rho_sq).min(rss_i);
            let den = (rss_i - num) / dof;
            if den < 1e-14 * num.max(1.0) {
                PHI_SENTINEL
            } else {
                num / den
            }
        };
        out.push((a, phi));
    }
    Ok(out)
}

/// Shared engine for the F-statistics: for every node `i` in `nodes`, score
/// each singleton addition via [`singleton_phis`]. `combine` folds the φ
/// values in fixed `(i, a)` order.
fn f_scan<F>(x: &DataMatrix, g: &Graph, nodes: &[usize], mut combine: F) -> Result<StatDetail>
where
    F: FnMut(f64) -> f64,
{
    let n = x.n_rows();
    let p = x.n_cols();
    if p != g.num_nodes() {
        return Err(Error::invalid("data and graph dimensions differ"));
    }
    let mut used = 0;
    let mut skipped = 0;
    let mut last = 0.0;
    for &i in nodes {
        if i >= p {
            return Err(Error::invalid(format!("node {i} out of range")));
        }
        if n <= g.degree(i) + 2 {
            skipped += p - 1 - g.degree(i);
            continue;
        }
        for (_, phi) in singleton_phis(x, g, i)? {
            used += 1;
            last = combine(phi);
        }
    }
    Ok(StatDetail { value: if used == 0 { 0.0 } else { last }, used, skipped })
}

/// `T_FΣ`: sum of `fisher_phi` over all singleton additions at every node.
pub fn f_sum(x: &DataMatrix, g: &Graph) -> Result<f64> {
    f_sum_detailed(x, g).map(|d| d.value)
}

pub fn f_sum_detailed(x: &DataMatrix, g: &Graph) -> Result<StatDetail> {
    let nodes: Vec<usize> = (0..g.num_nodes()).collect();
    let mut acc = 0.0;
    f_scan(x, g, &nodes, |phi| {
        acc += phi;
        acc
    })
}

/// `T_Fmax`: maximum of the same φ collection (0 when the collection is
/// empty).
pub fn f_max(x: &DataMatrix, g: &Graph) -> Result<f64> {
    let nodes: Vec<usize> = (0..g.num_nodes()).collect();
    let mut best = 0.0f64;
    let detail = f_scan(x, g, &nodes, |phi| {
        best = best.max(phi);
        best
    })?;
    Ok(detail.value)
}

/// Localized `T_FΣ`: the same double sum restricted to nodes in `t_set`.
pub fn f_sum_local(x: &DataMatrix, g: &Graph, t_set: &[usize]) -> Result<f64> {
    f_sum_local_detailed(x, g, t_set).map(|d| d.value)
}

pub fn f_sum_local_detailed(x: &DataMatrix, g: &Graph, t_set: &[usize]) -> Result<StatDetail> {
    let mut acc = 0.0;
    f_scan(x, g, t_set, |phi| {
        acc += phi;
        acc
    })
}

/// `T_GLR-ℓ1`: profile log-likelihood of the modified-glasso estimate,
/// `n (log det Ω̂ − tr(Σ̂ Ω̂))`. `warm_cov` optionally seeds the solver with
/// the covariance iterate from a related fit.
pub fn glr_l1(x: &DataMatrix, g: &Graph, lambda: f64) -> Result<f64> {
    glr_l1_warm(x, g, lambda, None)
}

pub fn glr_l1_warm(
    x: &DataMatrix,
    g: &Graph,
    lambda: f64,
    warm_cov: Option<&SquareMatrix>,
) -> Result<f64> {
    let sigma = sample_covariance(x);
    let fit = glasso::solve(&GlassoProblem::new(&sigma, g, lambda), warm_cov)?;
    glasso::penalized_profile_loglik(&sigma, &fit.omega, x.n_rows())
}

/// Which statistic a [`GofStatistic`] computes.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum GofStatKind {
    Prc,
    Erc,
    PrcWeighted,
    ErcWeighted,
    FSum,
    FMax,
    FSumLocal,
    GlrL1,
}

/// A configured statistic: kind plus its knobs.
#[derive(Clone, Debug)]
pub struct GofStatistic {
    pub kind: GofStatKind,
    /// Truncation level for the pairwise statistics (one-sided tail level of
    /// the z-score cut).
    pub delta: f64,
    /// Required by the weighted kinds.
    pub weights: Option<SquareMatrix>,
    /// Required by `FSumLocal`.
    pub local_set: Option<Vec<usize>>,
    /// Penalty for `GlrL1`; defaults to `√(log p / n)` at evaluation time.
    pub glasso_lambda: Option<f64>,
}

impl GofStatistic {
    pub fn new(kind: GofStatKind) -> GofStatistic {
        GofStatistic {
            kind,
            delta: DEFAULT_DELTA,
            weights: None,
            local_set: None,
            glasso_lambda: None,
        }
    }

    pub fn with_delta(mut self, delta: f64) -> GofStatistic {
        self.delta = delta;
        self
    }

    pub fn with_weights(mut self, weights: SquareMatrix) -> GofStatistic {
        self.weights = Some(weights);
        self
    }

    pub fn with_local_set(mut self, t_set: Vec<usize>) -> GofStatistic {
        self.local_set = Some(t_set);
        self
    }

    pub fn with_glasso_lambda(mut self, lambda: f64) -> GofStatistic {
        self.glasso_lambda = Some(lambda);
        self
    }

    /// Human-readable statistic name for reports.
    pub fn name(&self) -> &'static str {
        match self.kind {
            GofStatKind::Prc => "prc",
            GofStatKind::Erc => "erc",
            GofStatKind::PrcWeighted => "prc-w",
            GofStatKind::ErcWeighted => "erc-w",
            GofStatKind::FSum => "fsum",
            GofStatKind::FMax => "fmax",
            GofStatKind::FSumLocal => "fsum-local",
            GofStatKind::GlrL1 => "glr-l1",
        }
    }

    /// Build the reusable evaluator: validates configuration against the data
    /// shape and precomputes any state shared across copies (currently the
    /// glasso warm start from the observed data).
    pub fn prepare(&self, x: &DataMatrix, g: &Graph) -> Result<GofEvaluator<'_>> {
        let p = x.n_cols();
        match self.kind {
            GofStatKind::PrcWeighted | GofStatKind::ErcWeighted => {
                let w = self
                    .weights
                    .as_ref()
                    .ok_or_else(|| Error::invalid("weighted statistic needs a weight matrix"))?;
                check_weights(w, p)?;
            }
            GofStatKind::FSumLocal => {
                let t = self
                    .local_set
                    .as_ref()
                    .ok_or_else(|| Error::invalid("local statistic needs a node set"))?;
                for &i in t {
                    if i >= p {
                        return Err(Error::invalid(format!("local-set node {i} out of range")));
                    }
                }
            }
            _ => {}
        }
        let mut evaluator = GofEvaluator {
            stat: self,
            lambda: self
                .glasso_lambda
                .unwrap_or_else(|| glasso::default_lambda(p, x.n_rows())),
            warm_cov: None,
        };
        if self.kind == GofStatKind::GlrL1 {
            let sigma = sample_covariance(x);
            let fit = glasso::solve(&GlassoProblem::new(&sigma, g, evaluator.lambda), None)?;
            evaluator.warm_cov = Some(fit.cov);
        }
        Ok(evaluator)
    }
}

/// Reusable, thread-safe evaluator produced by [`GofStatistic::prepare`].
pub struct GofEvaluator<'a> {
    stat: &'a GofStatistic,
    lambda: f64,
    warm_cov: Option<SquareMatrix>,
}

impl GofEvaluator<'_> {
    /// Evaluate the statistic on one matrix (observed data or a copy).
    pub fn value(&self, x: &DataMatrix, g: &Graph) -> Result<f64> {
        let s = self.stat;
        match s.kind {
            GofStatKind::Prc => prc(x, g, s.delta),
            GofStatKind::Erc => erc(x, g, s.delta),
            GofStatKind::PrcWeighted => {
                prc_weighted(x, g, s.delta, s.weights.as_ref().expect("validated"))
            }
            GofStatKind::ErcWeighted => {
                erc_weighted(x, g, s.delta, s.weights.as_ref().expect("validated"))
            }
            GofStatKind::FSum => f_sum(x, g),
            GofStatKind::FMax => f_max(x, g),
            GofStatKind::FSumLocal => {
                f_sum_local(x, g, s.local_set.as_ref().expect("validated"))
            }
            GofStatKind::GlrL1 => glr_l1_warm(x, g, self.lambda, self.warm_cov.as_ref()),
        }
    }

    /// Detailed evaluation (used for the observed matrix to surface skipped
    /// pairs as warnings).
    pub fn detail(&self, x: &DataMatrix, g: &Graph) -> Result<StatDetail> {
        let s = self.stat;
        match s.kind {
            GofStatKind::Prc | GofStatKind::PrcWeighted => {
                prc_detailed(x, g, s.delta, s.weights.as_ref())
            }
            GofStatKind::Erc | GofStatKind::ErcWeighted => {
                erc_detailed(x, g, s.delta, s.weights.as_ref())
            }
            GofStatKind::FSum => f_sum_detailed(x, g),
            GofStatKind::FMax => {
                let mut best = 0.0f64;
                let nodes: Vec<usize> = (0..g.num_nodes()).collect();
                f_scan(x, g, &nodes, |phi| {
                    best = best.max(phi);
                    best
                })
            }
            GofStatKind::FSumLocal => {
                f_sum_local_detailed(x, g, s.local_set.as_ref().expect("validated"))
            }
            GofStatKind::GlrL1 => {
                let value = glr_l1_warm(x, g, self.lambda, self.warm_cov.as_ref())?;
                Ok(StatDetail { value, used: 1, skipped: 0 })
            }
        }
    }
}
