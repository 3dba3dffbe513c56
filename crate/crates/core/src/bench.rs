//! Scenario generators and the Monte Carlo size/power harness.
//!
//! Each scenario family fixes a data-generating process and a tested null
//! hypothesis; [`run_power_study`] replays it `R` times with independent
//! substreams and reports per-method rejection proportions. Every family has
//! a knob setting under which the tested null is exactly true (`k0 = k`,
//! `delete_prob = 0`, `q0 = q`, or `theta = 0`), so size checks use the same
//! machinery as power runs.

use rand::seq::SliceRandom;
use rand::Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::baselines::{bonf_gof, m1p1_gof};
use crate::crt::{f_test_baseline, run_crt, run_crt_per_variable, CrtProblem, CrtStatistic};
use crate::data::DataMatrix;
use crate::error::{Error, Result};
use crate::ggm::{mvn_sample, standardize_to_unit_variances};
use crate::gof_stats::{banded_weights, GofStatKind, GofStatistic};
use crate::graph::{
    band_graph_precision, delete_edges_randomly, erdos_renyi_precision, hub_graph_precision,
    Graph,
};
use crate::pvalue::conservative_pvalue;
use crate::rng::stream_rng;
use crate::sampler::{exchangeable_copies, SamplerConfig};
use crate::special::normal_inv_cdf;

/// Which data-generating process a scenario uses.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ScenarioFamily {
    GofBand,
    GofHub,
    GofEr,
    CrtLinear,
    CrtLogistic,
    CrtNonlinear,
    CrtNonlinearBinary,
}

fn default_copies() -> usize {
    100
}
fn default_iterations() -> usize {
    3
}
fn default_alpha() -> f64 {
    0.05
}

/// One benchmark scenario. Unknown keys in a config file are rejected with
/// the full list of valid ones.
#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScenarioConfig {
    pub family: ScenarioFamily,
    pub p: usize,
    pub n: usize,
    /// Number of exchangeable copies (M).
    #[serde(default = "default_copies")]
    pub copies: usize,
    /// Markov chain passes (L).
    #[serde(default = "default_iterations")]
    pub iterations: usize,
    /// Replications (R).
    pub replications: usize,
    #[serde(default = "default_alpha")]
    pub alpha: f64,
    pub seed: u64,
    /// Band/ER signal magnitude.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub s: Option<f64>,
    /// True band bandwidth K.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub k: Option<usize>,
    /// Hypothesized band bandwidth K₀.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub k0: Option<usize>,
    /// Hub diagonal boost ξ.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub xi: Option<f64>,
    /// ER edge probability of the true graph.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub q: Option<f64>,
    /// ER edge probability of the hypothesized subgraph.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub q0: Option<f64>,
    /// Edge-deletion probability for the hub null graph (default 0.7).
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub delete_prob: Option<f64>,
    /// CRT signal strength θ.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub theta: Option<f64>,
}

/// A method the harness can run inside a scenario.
#[derive(Clone, Debug, PartialEq)]
pub enum Method {
    /// MC-GoF with one of the library statistics.
    Gof(GofStatKind),
    /// Bonferroni partial-correlation baseline.
    BonfGof,
    /// The M¹P₁ baseline.
    M1P1,
    /// Joint G-CRT with the given statistic.
    Crt(CrtStatistic),
    /// Per-variable singleton G-CRTs combined with the Bonferroni rule.
    CrtBonfPerVariable(CrtStatistic),
    /// Classical nested-model F-test.
    FTest,
}

impl Method {
    pub fn name(&self) -> String {
        match self {
            Method::Gof(kind) => GofStatistic::new(*kind).name().to_string(),
            Method::BonfGof => "bonf".to_string(),
            Method::M1P1 => "m1p1".to_string(),
            Method::Crt(s) => s.name().to_string(),
            Method::CrtBonfPerVariable(s) => format!("bonf-{}", s.name()),
            Method::FTest => "f-test".to_string(),
        }
    }

    pub fn is_gof(&self) -> bool {
        matches!(self, Method::Gof(_) | Method::BonfGof | Method::M1P1)
    }
}

/// Parse a method name as used in config files and on the command line.
pub fn parse_method(name: &str) -> Result<Method> {
    let gof = |k| Ok(Method::Gof(k));
    match name {
        "prc" => gof(GofStatKind::Prc),
        "erc" => gof(GofStatKind::Erc),
        "prc-w" => gof(GofStatKind::PrcWeighted),
        "erc-w" => gof(GofStatKind::ErcWeighted),
        "fsum" => gof(GofStatKind::FSum),
        "fmax" => gof(GofStatKind::FMax),
        "glr-l1" => gof(GofStatKind::GlrL1),
        "bonf" => Ok(Method::BonfGof),
        "m1p1" => Ok(Method::M1P1),
        "f-test" => Ok(Method::FTest),
        _ => {
            if let Some(stat) = CrtStatistic::from_name(name) {
                return Ok(Method::Crt(stat));
            }
            if let Some(rest) = name.strip_prefix("bonf-") {
                if let Some(stat) = CrtStatistic::from_name(rest) {
                    return Ok(Method::CrtBonfPerVariable(stat));
                }
            }
            Err(Error::invalid(format!(
                "unknown method '{name}' (expected one of: prc, erc, prc-w, erc-w, fsum, \
                 fmax, glr-l1, bonf, m1p1, lm-sst, lm-ssr, glm-dev, glm-l1-d, glm-l1-r-sst, \
                 lm-l1-r-ssr, bonf-<crt-stat>, f-test)"
            )))
        }
    }
}

/// A benchmark file: one scenario plus the methods to run in it. Unknown
/// keys are rejected by the flattened [`ScenarioConfig`].
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct BenchSpec {
    #[serde(flatten)]
    pub scenario: ScenarioConfig,
    pub methods: Vec<String>,
}

const CONFIG_KEYS: &[&str] = &[
    "family", "p", "n", "copies", "iterations", "replications", "alpha", "seed", "s", "k",
    "k0", "xi", "q", "q0", "delete_prob", "theta", "methods",
];

/// Parse a TOML benchmark config. Unknown keys are rejected with the full
/// list of valid ones (serde's own check does not fire through `flatten`).
pub fn parse_bench_config(text: &str) -> Result<(ScenarioConfig, Vec<Method>)> {
    let table: toml::Table =
        text.parse().map_err(|e| Error::parse(format!("bench config: {e}")))?;
    for key in table.keys() {
        if !CONFIG_KEYS.contains(&key.as_str()) {
            return Err(Error::parse(format!(
                "bench config: unknown key '{key}' (valid keys: {})",
                CONFIG_KEYS.join(", ")
            )));
        }
    }
    let spec: BenchSpec =
        table.try_into().map_err(|e| Error::parse(format!("bench config: {e}")))?;
    let methods: Result<Vec<Method>> =
        spec.methods.iter().map(|m| parse_method(m)).collect();
    Ok((spec.scenario, methods?))
}

/// One GoF replication's inputs: data plus the hypothesized (null) graph.
#[derive(Clone, Debug)]
pub struct GofInstance {
    pub x: DataMatrix,
    /// Graph of the generating precision matrix.
    pub true_graph: Graph,
    /// Graph under test.
    pub null_graph: Graph,
}

/// One CRT replication's inputs.
#[derive(Clone, Debug)]
pub struct CrtInstance {
    pub x: DataMatrix,
    pub y: Vec<f64>,
    pub target: Vec<usize>,
    pub graph: Graph,
}

/// Band-graph GoF scenario: data from `band(p, k, s)`, null graph
/// `band(p, k0)`.
pub fn gen_gof_band<R: Rng>(
    p: usize,
    n: usize,
    k: usize,
    k0: usize,
    s: f64,
    rng: &mut R,
) -> Result<GofInstance> {
    let (true_graph, omega) = band_graph_precision(p, k, s)?;
    let (null_graph, _) = band_graph_precision(p, k0, s)?;
    let x = mvn_sample(n, &vec![0.0; p], &omega, rng)?;
    Ok(GofInstance { x, true_graph, null_graph })
}

/// Hub-graph GoF scenario (group size 10): the null graph deletes each hub
/// edge independently with probability `delete_prob`.
pub fn gen_gof_hub<R: Rng>(
    p: usize,
    n: usize,
    xi: f64,
    delete_prob: f64,
    rng: &mut R,
) -> Result<GofInstance> {
    let (true_graph, omega) = hub_graph_precision(p, 10, xi)?;
    let null_graph = delete_edges_randomly(&true_graph, delete_prob, rng)?;
    let x = mvn_sample(n, &vec![0.0; p], &omega, rng)?;
    Ok(GofInstance { x, true_graph, null_graph })
}

/// Erdős–Rényi GoF scenario: a fresh random precision per replication; the
/// null graph keeps each true edge with probability `q0 / q`.
pub fn gen_gof_er<R: Rng>(
    p: usize,
    n: usize,
    q: f64,
    q0: f64,
    s: f64,
    rng: &mut R,
) -> Result<GofInstance> {
    if !(q0 > 0.0 && q0 <= q) {
        return Err(Error::invalid(format!("need 0 < q0 <= q (q0 = {q0}, q = {q})")));
    }
    let (true_graph, omega) = erdos_renyi_precision(p, q, s, rng)?;
    let null_graph = delete_edges_randomly(&true_graph, 1.0 - q0 / q, rng)?;
    let x = mvn_sample(n, &vec![0.0; p], &omega, rng)?;
    Ok(GofInstance { x, true_graph, null_graph })
}

/// Covariates shared by every CRT scenario: a freshly permuted band graph
/// (`K = 6`, `s = 0.2`) whose precision is standardized so `Ω⁻¹` has unit
/// diagonal.
pub fn gen_crt_covariates<R: Rng>(p: usize, n: usize, rng: &mut R) -> Result<(DataMatrix, Graph)> {
    let (_, omega) = band_graph_precision(p, 6, 0.2)?;
    let omega = standardize_to_unit_variances(&omega)?;
    let mut perm: Vec<usize> = (0..p).collect();
    perm.shuffle(rng);
    let omega = omega.permute(&perm)?;
    let graph = omega.support_graph();
    let x = mvn_sample(n, &vec![0.0; p], &omega, rng)?;
    Ok((x, graph))
}

/// Number of leading covariates carrying signal in the regression scenarios.
const SIGNAL_COVARIATES: usize = 20;
/// The tested target set `T = {1, ..., 8}` (0-based `0..8`).
const TARGET_LEN: usize = 8;

fn linear_coefficients<R: Rng>(p: usize, theta: f64, rng: &mut R) -> Vec<f64> {
    let lo = 1.0 / (SIGNAL_COVARIATES as f64).sqrt();
    let hi = 2.0 * lo;
    let mut beta = vec![0.0; p];
    for b in beta.iter_mut().take(SIGNAL_COVARIATES) {
        *b = rng.random_range(lo..hi);
    }
    for b in beta.iter_mut().take(TARGET_LEN) {
        *b *= theta;
    }
    beta
}

fn check_crt_dims(p: usize) -> Result<()> {
    if p < SIGNAL_COVARIATES {
        return Err(Error::invalid(format!(
            "CRT scenarios need p >= {SIGNAL_COVARIATES} (got {p})"
        )));
    }
    Ok(())
}

/// Linear response: `y = Xβ + ε` with β's first 20 entries uniform on
/// `(1/√20, 2/√20)`, the first 8 scaled by θ.
pub fn gen_linear_scenario<R: Rng>(
    p: usize,
    n: usize,
    theta: f64,
    rng: &mut R,
) -> Result<CrtInstance> {
    check_crt_dims(p)?;
    let (x, graph) = gen_crt_covariates(p, n, rng)?;
    let beta = linear_coefficients(p, theta, rng);
    let mut y = Vec::with_capacity(n);
    for r in 0..n {
        let eta: f64 = (0..p).map(|j| beta[j] * x.get(r, j)).sum();
        let eps: f64 = rng.sample(rand_distr::StandardNormal);
        y.push(eta + eps);
    }
    Ok(CrtInstance { x, y, target: (0..TARGET_LEN).collect(), graph })
}

fn sigmoid(t: f64) -> f64 {
    1.0 / (1.0 + (-t).exp())
}

/// Logistic response: same coefficients as the linear scenario,
/// `y ~ Bernoulli(σ(Xᵀβ))`.
pub fn gen_logistic_scenario<R: Rng>(
    p: usize,
    n: usize,
    theta: f64,
    rng: &mut R,
) -> Result<CrtInstance> {
    check_crt_dims(p)?;
    let (x, graph) = gen_crt_covariates(p, n, rng)?;
    let beta = linear_coefficients(p, theta, rng);
    let mut y = Vec::with_capacity(n);
    for r in 0..n {
        let eta: f64 = (0..p).map(|j| beta[j] * x.get(r, j)).sum();
        y.push(if rng.random::<f64>() < sigmoid(eta) { 1.0 } else { 0.0 });
    }
    Ok(CrtInstance { x, y, target: (0..TARGET_LEN).collect(), graph })
}

/// The 14-term nonlinear basis: seven nonlinear forms on `x_1..x_10`
/// followed by the same forms on `x_11..x_20`.
pub fn nonlinear_basis(x: &[f64]) -> Vec<f64> {
    assert!(x.len() >= SIGNAL_COVARIATES, "basis needs at least 20 coordinates");
    let block = |o: usize| -> [f64; 7] {
        [
            x[o] * x[o] / 2.0,
            1.0 / (1.0 + x[o + 1] * x[o + 1]),
            (std::f64::consts::PI * x[o + 2]).cos(),
            (std::f64::consts::PI * x[o + 3]).sin(),
            x[o + 4] * x[o + 5],
            (x[o + 6] * x[o + 7]).sin(),
            (std::f64::consts::PI * x[o + 8]).sin() / (4.0 + x[o + 9] * x[o + 9]),
        ]
    };
    let mut out = Vec::with_capacity(14);
    out.extend_from_slice(&block(0));
    out.extend_from_slice(&block(10));
    out
}

/// Nonlinear Gaussian response: `y = B(x)ᵀβ + ε` over the
/// [`nonlinear_basis`], with `β = (θ, ..., θ, 1, ..., 1)` (seven of each).
pub fn gen_nonlinear_scenario<R: Rng>(
    p: usize,
    n: usize,
    theta: f64,
    rng: &mut R,
) -> Result<CrtInstance> {
    check_crt_dims(p)?;
    let (x, graph) = gen_crt_covariates(p, n, rng)?;
    let mut y = Vec::with_capacity(n);
    for r in 0..n {
        let row = x.row(r);
        let b = nonlinear_basis(&row);
        let eta: f64 = b
            .iter()
            .enumerate()
            .map(|(k, &v)| if k < 7 { theta * v } else { v })
            .sum();
        let eps: f64 = rng.sample(rand_distr::StandardNormal);
        y.push(eta + eps);
    }
    Ok(CrtInstance { x, y, target: (0..TARGET_LEN).collect(), graph })
}

fn step_bounds() -> (f64, f64) {
    static BOUNDS: std::sync::OnceLock<(f64, f64)> = std::sync::OnceLock::new();
    *BOUNDS.get_or_init(|| {
        (
            normal_inv_cdf(1.0 / 3.0).expect("fixed quantile"),
            normal_inv_cdf(2.0 / 3.0).expect("fixed quantile"),
        )
    })
}

/// Step function `b(x) = (1{x<l} − 2·1{l≤x≤u} + 1{x>u})/4` with `l, u` the
/// 1/3 and 2/3 standard normal quantiles.
pub fn step_transform(x: f64) -> f64 {
    let (l, u) = step_bounds();
    if x < l {
        0.25
    } else if x <= u {
        -0.5
    } else {
        0.25
    }
}

/// Binary nonlinear response: `z = b(x_{1..20})` componentwise via
/// [`step_transform`], `y ~ Bernoulli(σ(zᵀβ))` with β's first 10 coordinates
/// θ and the remaining 10 equal to 1.
pub fn gen_nonlinear_binary_scenario<R: Rng>(
    p: usize,
    n: usize,
    theta: f64,
    rng: &mut R,
) -> Result<CrtInstance> {
    check_crt_dims(p)?;
    let (x, graph) = gen_crt_covariates(p, n, rng)?;
    let mut y = Vec::with_capacity(n);
    for r in 0..n {
        let eta: f64 = (0..SIGNAL_COVARIATES)
            .map(|j| {
                let z = step_transform(x.get(r, j));
                if j < 10 {
                    theta * z
                } else {
                    z
                }
            })
            .sum();
        y.push(if rng.random::<f64>() < sigmoid(eta) { 1.0 } else { 0.0 });
    }
    Ok(CrtInstance { x, y, target: (0..TARGET_LEN).collect(), graph })
}

/// Rejection summary for one method in one scenario.
#[derive(Clone, Debug, Serialize)]
pub struct MethodReport {
    pub method: String,
    pub rejections: usize,
    /// Replications where the method errored (excluded from the proportion).
    pub failures: usize,
    pub proportion: f64,
    pub standard_error: f64,
}

/// Full study output: config echo plus one row per method.
#[derive(Clone, Debug, Serialize)]
pub struct PowerReport {
    pub config: ScenarioConfig,
    pub methods: Vec<MethodReport>,
    pub elapsed_seconds: f64,
}

#[derive(Clone, Copy)]
enum Outcome {
    Reject,
    Accept,
    Failed,
}

fn knob(v: Option<f64>, name: &str) -> Result<f64> {
    v.ok_or_else(|| Error::invalid(format!("scenario requires knob '{name}'")))
}

fn knob_usize(v: Option<usize>, name: &str) -> Result<usize> {
    v.ok_or_else(|| Error::invalid(format!("scenario requires knob '{name}'")))
}

fn validate_config(cfg: &ScenarioConfig) -> Result<()> {
    if cfg.replications == 0 {
        return Err(Error::invalid("replications must be at least 1"));
    }
    if cfg.copies == 0 || cfg.iterations == 0 {
        return Err(Error::invalid("copies and iterations must be at least 1"));
    }
    if !(cfg.alpha > 0.0 && cfg.alpha < 1.0) {
        return Err(Error::invalid(format!("alpha = {} outside (0, 1)", cfg.alpha)));
    }
    match cfg.family {
        ScenarioFamily::GofBand => {
            knob(cfg.s, "s")?;
            knob_usize(cfg.k, "k")?;
            knob_usize(cfg.k0, "k0")?;
        }
        ScenarioFamily::GofHub => {
            knob(cfg.xi, "xi")?;
        }
        ScenarioFamily::GofEr => {
            knob(cfg.s, "s")?;
            knob(cfg.q, "q")?;
            knob(cfg.q0, "q0")?;
        }
        _ => {
            knob(cfg.theta, "theta")?;
        }
    }
    Ok(())
}

fn gen_gof_instance<R: Rng>(cfg: &ScenarioConfig, rng: &mut R) -> Result<GofInstance> {
    match cfg.family {
        ScenarioFamily::GofBand => gen_gof_band(
            cfg.p,
            cfg.n,
            cfg.k.expect("validated"),
            cfg.k0.expect("validated"),
            cfg.s.expect("validated"),
            rng,
        ),
        ScenarioFamily::GofHub => gen_gof_hub(
            cfg.p,
            cfg.n,
            cfg.xi.expect("validated"),
            cfg.delete_prob.unwrap_or(0.7),
            rng,
        ),
        ScenarioFamily::GofEr => gen_gof_er(
            cfg.p,
            cfg.n,
            cfg.q.expect("validated"),
            cfg.q0.expect("validated"),
            cfg.s.expect("validated"),
            rng,
        ),
        _ => unreachable!("not a GoF family"),
    }
}

fn gen_crt_instance<R: Rng>(cfg: &ScenarioConfig, rng: &mut R) -> Result<CrtInstance> {
    let theta = cfg.theta.expect("validated");
    match cfg.family {
        ScenarioFamily::CrtLinear => gen_linear_scenario(cfg.p, cfg.n, theta, rng),
        ScenarioFamily::CrtLogistic => gen_logistic_scenario(cfg.p, cfg.n, theta, rng),
        ScenarioFamily::CrtNonlinear => gen_nonlinear_scenario(cfg.p, cfg.n, theta, rng),
        ScenarioFamily::CrtNonlinearBinary => {
            gen_nonlinear_binary_scenario(cfg.p, cfg.n, theta, rng)
        }
        _ => unreachable!("not a CRT family"),
    }
}

fn gof_statistic_for(kind: GofStatKind, p: usize) -> GofStatistic {
    let stat = GofStatistic::new(kind);
    match kind {
        // the banded 0.8/0.2 weighting scheme from the weighted-variant study
        GofStatKind::PrcWeighted | GofStatKind::ErcWeighted => {
            stat.with_weights(banded_weights(p, 6, 0.8, 0.2))
        }
        _ => stat,
    }
}

fn gof_replication(cfg: &ScenarioConfig, methods: &[Method], rep: u64) -> Vec<Outcome> {
    let mut rng = stream_rng(cfg.seed, rep + 1);
    let inst = match gen_gof_instance(cfg, &mut rng) {
        Ok(i) => i,
        Err(_) => return vec![Outcome::Failed; methods.len()],
    };
    let sampler_seed: u64 = rng.random();
    let sampler = SamplerConfig::new(sampler_seed)
        .with_copies(cfg.copies)
        .with_iterations(cfg.iterations);
    // one copy ensemble shared by all MC statistics in this replication
    let needs_copies = methods.iter().any(|m| matches!(m, Method::Gof(_)));
    let copies = if needs_copies {
        match exchangeable_copies(&inst.x, &inst.null_graph, &sampler) {
            Ok(c) => c,
            Err(_) => return vec![Outcome::Failed; methods.len()],
        }
    } else {
        Vec::new()
    };
    methods
        .iter()
        .map(|method| {
            let decision: Result<bool> = match method {
                Method::Gof(kind) => {
                    let stat = gof_statistic_for(*kind, cfg.p);
                    (|| {
                        let ev = stat.prepare(&inst.x, &inst.null_graph)?;
                        let t0 = ev.value(&inst.x, &inst.null_graph)?;
                        let mut tm = Vec::with_capacity(copies.len());
                        for c in &copies {
                            tm.push(ev.value(c, &inst.null_graph)?);
                        }
                        Ok(conservative_pvalue(t0, &tm)? <= cfg.alpha)
                    })()
                }
                Method::BonfGof => {
                    bonf_gof(&inst.x, &inst.null_graph, cfg.alpha).map(|r| r.reject())
                }
                Method::M1P1 => {
                    m1p1_gof(&inst.x, &inst.null_graph, cfg.alpha).map(|r| r.reject())
                }
                _ => Err(Error::invalid("CRT method in a GoF scenario")),
            };
            match decision {
                Ok(true) => Outcome::Reject,
                Ok(false) => Outcome::Accept,
                Err(_) => Outcome::Failed,
            }
        })
        .collect()
}

fn crt_replication(cfg: &ScenarioConfig, methods: &[Method], rep: u64) -> Vec<Outcome> {
    let mut rng = stream_rng(cfg.seed, rep + 1);
    let inst = match gen_crt_instance(cfg, &mut rng) {
        Ok(i) => i,
        Err(_) => return vec![Outcome::Failed; methods.len()],
    };
    let sampler_seed: u64 = rng.random();
    let sampler = SamplerConfig::new(sampler_seed)
        .with_copies(cfg.copies)
        .with_iterations(cfg.iterations);
    methods
        .iter()
        .map(|method| {
            let decision: Result<bool> = match method {
                Method::Crt(stat) => {
                    let problem = CrtProblem::new(
                        inst.y.clone(),
                        inst.x.clone(),
                        inst.target.clone(),
                        inst.graph.clone(),
                        stat.clone(),
                        sampler.clone(),
                    );
                    run_crt(&problem).map(|r| r.pvalue <= cfg.alpha)
                }
                Method::CrtBonfPerVariable(stat) => {
                    let problem = CrtProblem::new(
                        inst.y.clone(),
                        inst.x.clone(),
                        inst.target.clone(),
                        inst.graph.clone(),
                        stat.clone(),
                        sampler.clone(),
                    );
                    run_crt_per_variable(&problem).map(|r| r.combined <= cfg.alpha)
                }
                Method::FTest => {
                    f_test_baseline(&inst.y, &inst.x, &inst.target).map(|p| p <= cfg.alpha)
                }
                _ => Err(Error::invalid("GoF method in a CRT scenario")),
            };
            match decision {
                Ok(true) => Outcome::Reject,
                Ok(false) => Outcome::Accept,
                Err(_) => Outcome::Failed,
            }
        })
        .collect()
}

/// Run `cfg.replications` independent replications of the scenario, applying
/// every method to the same data within each replication.
pub fn run_power_study(cfg: &ScenarioConfig, methods: &[Method]) -> Result<PowerReport> {
    validate_config(cfg)?;
    let is_gof = matches!(
        cfg.family,
        ScenarioFamily::GofBand | ScenarioFamily::GofHub | ScenarioFamily::GofEr
    );
    for m in methods {
        if m.is_gof() != is_gof {
            return Err(Error::invalid(format!(
                "method '{}' does not fit family {:?}",
                m.name(),
                cfg.family
            )));
        }
    }
    if methods.is_empty() {
        return Err(Error::invalid("no methods to run"));
    }

    let start = std::time::Instant::now();
    let outcomes: Vec<Vec<Outcome>> = (0..cfg.replications as u64)
        .into_par_iter()
        .map(|rep| {
            if is_gof {
                gof_replication(cfg, methods, rep)
            } else {
                crt_replication(cfg, methods, rep)
            }
        })
        .collect();

    let mut reports = Vec::with_capacity(methods.len());
    for (k, method) in methods.iter().enumerate() {
        let mut rejections = 0;
        let mut failures = 0;
        for row in &outcomes {
            match row[k] {
                Outcome::Reject => rejections += 1,
                Outcome::Accept => {}
                Outcome::Failed => failures += 1,
            }
        }
        let effective = cfg.replications - failures;
        let proportion = if effective > 0 {
            rejections as f64 / effective as f64
        } else {
            f64::NAN
        };
        let standard_error = if effective > 0 {
            (proportion * (1.0 - proportion) / effective as f64).sqrt()
        } else {
            f64::NAN
        };
        reports.push(MethodReport {
            method: method.name(),
            rejections,
            failures,
            proportion,
            standard_error,
        });
    }
    Ok(PowerReport {
        config: cfg.clone(),
        methods: reports,
        elapsed_seconds: start.elapsed().as_secs_f64(),
    })
}
