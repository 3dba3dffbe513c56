//! Command-line front end for the `ggmtest` library.
//!
//! Results are printed to stdout as a single JSON object (or JSONL for
//! `bench`); everything else goes to stderr. Exit codes: 0 success, 1 I/O or
//! parse failure, 2 usage/precondition violation, 3 numerical failure. Every
//! stochastic subcommand requires an explicit `--seed`.

use std::io::Read as _;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand};
use serde::{Deserialize, Serialize};

use ggmtest::bench::{parse_bench_config, run_power_study, ScenarioFamily};
use ggmtest::ggm::stats_close;
use ggmtest::io::{read_data_csv, read_response_csv, read_weights_csv, write_data_csv};
use ggmtest::{
    exchangeable_copies, run_crt, run_crt_per_variable, run_gof, sufficient_statistic,
    CrtProblem, CrtStatistic, Error, GofStatKind, GofStatistic, GofTestSpec, Graph,
    PvalueMode, Result, SamplerConfig,
};

#[derive(Parser)]
#[command(name = "ggmtest", version, about = "Exact Monte Carlo tests for Gaussian graphical models")]
struct Cli {
    /// Worker threads for parallel sections (default: all cores).
    #[arg(long, global = true, value_name = "N")]
    threads: Option<usize>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Write exchangeable copies of a dataset plus a conservation manifest.
    Sample(SampleArgs),
    /// Goodness-of-fit test of a graph against data.
    Gof(GofArgs),
    /// Conditional randomization test of a response given target columns.
    Crt(CrtArgs),
    /// Run a benchmark scenario from a TOML config.
    Bench(BenchArgs),
    /// Check that a JSON result (or JSONL report) is well-formed.
    Validate(ValidateArgs),
}

#[derive(Args)]
struct SampleArgs {
    /// Data CSV (rows = observations, columns = variables).
    #[arg(long)]
    data: PathBuf,
    /// Graph edge list: one 1-based "i j" pair per line, '#' comments.
    #[arg(long)]
    graph: PathBuf,
    /// Number of copies M.
    #[arg(long, default_value_t = 100)]
    copies: usize,
    /// Markov chain passes L.
    #[arg(long, default_value_t = 3)]
    iters: usize,
    /// Node update order, 1-based spec like "3,1,2" (default: index order).
    #[arg(long)]
    order: Option<String>,
    /// RNG seed (required; there is no wall-clock default).
    #[arg(long)]
    seed: u64,
    /// Output directory for copy_NNN.csv files and manifest.json.
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args)]
struct GofArgs {
    /// Data CSV.
    #[arg(long)]
    data: PathBuf,
    /// Graph edge list under test.
    #[arg(long)]
    graph: PathBuf,
    /// Statistic: prc | erc | prc-w | erc-w | fsum | fmax | glr-l1.
    #[arg(long)]
    stat: String,
    /// Weights CSV (required by prc-w / erc-w).
    #[arg(long)]
    weights: Option<PathBuf>,
    /// Local node set, 1-based spec like "1-5,9": resample only these nodes
    /// (fsum restricts its sum to them).
    #[arg(long)]
    local: Option<String>,
    /// P-value rule: cons | rand | two.
    #[arg(long, default_value = "cons")]
    mode: String,
    /// Number of copies M.
    #[arg(long, default_value_t = 100)]
    copies: usize,
    /// Markov chain passes L.
    #[arg(long, default_value_t = 3)]
    iters: usize,
    /// RNG seed (required; there is no wall-clock default).
    #[arg(long)]
    seed: u64,
}

#[derive(Args)]
struct CrtArgs {
    /// Covariate CSV.
    #[arg(long)]
    data: PathBuf,
    /// Response CSV (single column).
    #[arg(long)]
    response: PathBuf,
    /// Covariate graph edge list.
    #[arg(long)]
    graph: PathBuf,
    /// Target set T, 1-based spec like "1-8,12".
    #[arg(long)]
    target: String,
    /// Statistic: lm-sst | lm-ssr | glm-dev | glm-l1-d | glm-l1-r-sst |
    /// lm-l1-r-ssr.
    #[arg(long)]
    stat: String,
    /// Test each target column separately and Bonferroni-combine.
    #[arg(long)]
    bonferroni_per_variable: bool,
    /// Number of copies M.
    #[arg(long, default_value_t = 100)]
    copies: usize,
    /// Markov chain passes L.
    #[arg(long, default_value_t = 3)]
    iters: usize,
    /// RNG seed (required; there is no wall-clock default).
    #[arg(long)]
    seed: u64,
}

#[derive(Args)]
struct BenchArgs {
    /// TOML scenario config (family, sizes, knobs, methods, seed).
    config: PathBuf,
    /// Write JSONL records here instead of stdout.
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct ValidateArgs {
    /// JSON or JSONL file; "-" or omitted reads stdin.
    input: Option<PathBuf>,
}

/// GoF result payload; field order is the output order.
#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct GofReport {
    statistic: String,
    observed: f64,
    pvalue: f64,
    copies: usize,
    iterations: usize,
    seed: u64,
    mode: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    local: Option<Vec<usize>>,
    warnings: Vec<String>,
}

/// Joint CRT result payload.
#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct CrtReport {
    statistic: String,
    /// 1-based target columns, echoing the input convention.
    target: Vec<usize>,
    observed: f64,
    pvalue: f64,
    copies: usize,
    iterations: usize,
    seed: u64,
    warnings: Vec<String>,
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct PerVariableEntry {
    /// 1-based column.
    column: usize,
    pvalue: f64,
}

/// Bonferroni-per-variable CRT result payload.
#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct PerVariableReport {
    statistic: String,
    target: Vec<usize>,
    mode: String,
    per_variable: Vec<PerVariableEntry>,
    combined_pvalue: f64,
    copies: usize,
    iterations: usize,
    seed: u64,
}

/// One flat JSONL record per (scenario, method). No timestamps: reruns with
/// the same config produce byte-identical reports.
#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct BenchRecord {
    family: String,
    p: usize,
    n: usize,
    copies: usize,
    iterations: usize,
    replications: usize,
    alpha: f64,
    seed: u64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    s: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    k: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    k0: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    xi: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    q: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    q0: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    delete_prob: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    theta: Option<f64>,
    method: String,
    rejections: usize,
    failures: usize,
    proportion: f64,
    standard_error: f64,
}

/// Manifest written next to the copies by `sample`.
#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct SampleManifest {
    n: usize,
    p: usize,
    copies: usize,
    iterations: usize,
    seed: u64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    order: Option<Vec<usize>>,
    /// True iff every copy reproduced the sufficient statistic of the input
    /// to 1e-8 relative accuracy.
    psi_match: bool,
    files: Vec<String>,
}

fn to_json<T: Serialize>(value: &T) -> String {
    serde_json::to_string(value).expect("JSON serialization of plain records cannot fail")
}

/// Parse a 1-based index spec like "1-8,12" into 0-based indices, preserving
/// order and rejecting duplicates.
fn parse_index_spec(spec: &str) -> Result<Vec<usize>> {
    let one = |tok: &str| -> Result<usize> {
        let v: usize = tok
            .trim()
            .parse()
            .map_err(|_| Error::Invalid(format!("index spec {spec:?}: bad entry {tok:?}")))?;
        if v == 0 {
            return Err(Error::Invalid(format!("index spec {spec:?}: indices are 1-based")));
        }
        Ok(v)
    };
    let mut out = Vec::new();
    for part in spec.split(',') {
        let part = part.trim();
        let (lo, hi) = match part.split_once('-') {
            Some((a, b)) => (one(a)?, one(b)?),
            None => {
                let v = one(part)?;
                (v, v)
            }
        };
        if lo > hi {
            return Err(Error::Invalid(format!(
                "index spec {spec:?}: descending range {lo}-{hi}"
            )));
        }
        out.extend((lo..=hi).map(|v| v - 1));
    }
    let mut seen = std::collections::HashSet::new();
    for &v in &out {
        if !seen.insert(v) {
            return Err(Error::Invalid(format!(
                "index spec {spec:?}: duplicate index {}",
                v + 1
            )));
        }
    }
    Ok(out)
}

fn one_based(zero_based: &[usize]) -> Vec<usize> {
    zero_based.iter().map(|&v| v + 1).collect()
}

fn read_graph(path: &Path, p: usize) -> Result<Graph> {
    let text = std::fs::read_to_string(path)?;
    Graph::parse_edge_list(&text, p)
}

fn parse_gof_stat(name: &str) -> Result<GofStatKind> {
    Ok(match name {
        "prc" => GofStatKind::Prc,
        "erc" => GofStatKind::Erc,
        "prc-w" => GofStatKind::PrcWeighted,
        "erc-w" => GofStatKind::ErcWeighted,
        "fsum" => GofStatKind::FSum,
        "fmax" => GofStatKind::FMax,
        "glr-l1" => GofStatKind::GlrL1,
        _ => {
            return Err(Error::Invalid(format!(
                "unknown GoF statistic '{name}' (expected prc, erc, prc-w, erc-w, fsum, \
                 fmax, glr-l1)"
            )))
        }
    })
}

fn parse_mode(name: &str) -> Result<PvalueMode> {
    Ok(match name {
        "cons" => PvalueMode::ConservativeOneSided,
        "rand" => PvalueMode::RandomizedOneSided,
        "two" => PvalueMode::RandomizedTwoSided,
        _ => {
            return Err(Error::Invalid(format!(
                "unknown p-value mode '{name}' (expected cons, rand, two)"
            )))
        }
    })
}

fn cmd_sample(a: &SampleArgs) -> Result<()> {
    let x = read_data_csv(&a.data)?;
    let g = read_graph(&a.graph, x.n_cols())?;
    let mut sampler = SamplerConfig::new(a.seed)
        .with_copies(a.copies)
        .with_iterations(a.iters);
    let order = a.order.as_deref().map(parse_index_spec).transpose()?;
    if let Some(o) = &order {
        sampler = sampler.with_order(o.clone());
    }
    let copies = exchangeable_copies(&x, &g, &sampler)?;

    std::fs::create_dir_all(&a.out)?;
    let width = a.copies.to_string().len().max(3);
    let psi0 = sufficient_statistic(&x, &g)?;
    let mut psi_match = true;
    let mut files = Vec::with_capacity(copies.len());
    for (m, copy) in copies.iter().enumerate() {
        psi_match &= stats_close(&psi0, &sufficient_statistic(copy, &g)?, 1e-8)?;
        let name = format!("copy_{:0width$}.csv", m + 1);
        write_data_csv(&a.out.join(&name), copy)?;
        files.push(name);
    }
    let manifest = SampleManifest {
        n: x.n_rows(),
        p: x.n_cols(),
        copies: a.copies,
        iterations: a.iters,
        seed: a.seed,
        order: order.as_deref().map(one_based),
        psi_match,
        files,
    };
    let json = to_json(&manifest);
    std::fs::write(a.out.join("manifest.json"), format!("{json}\n"))?;
    println!("{json}");
    Ok(())
}

fn cmd_gof(a: &GofArgs) -> Result<()> {
    let x = read_data_csv(&a.data)?;
    let g = read_graph(&a.graph, x.n_cols())?;
    let mut kind = parse_gof_stat(&a.stat)?;
    let weighted = matches!(kind, GofStatKind::PrcWeighted | GofStatKind::ErcWeighted);
    if weighted && a.weights.is_none() {
        return Err(Error::Invalid(format!("--stat {} requires --weights", a.stat)));
    }
    if !weighted && a.weights.is_some() {
        return Err(Error::Invalid("--weights only applies to prc-w and erc-w".into()));
    }
    let local = a.local.as_deref().map(parse_index_spec).transpose()?;
    if local.is_some() && kind == GofStatKind::FSum {
        // the localized statistic is the natural pairing for a local test
        kind = GofStatKind::FSumLocal;
    }
    let mut stat = GofStatistic::new(kind);
    if let Some(w) = &a.weights {
        stat = stat.with_weights(read_weights_csv(w)?);
    }
    let stat_name = stat.name().to_string();
    let sampler = SamplerConfig::new(a.seed)
        .with_copies(a.copies)
        .with_iterations(a.iters);
    let mut spec = GofTestSpec::new(g, stat, sampler).with_mode(parse_mode(&a.mode)?);
    if let Some(t) = &local {
        spec = spec.with_local_set(t.clone());
    }
    let result = run_gof(&x, &spec)?;
    let report = GofReport {
        statistic: stat_name,
        observed: result.observed,
        pvalue: result.pvalue,
        copies: a.copies,
        iterations: a.iters,
        seed: a.seed,
        mode: a.mode.clone(),
        local: local.as_deref().map(one_based),
        warnings: result.warnings,
    };
    println!("{}", to_json(&report));
    Ok(())
}

fn cmd_crt(a: &CrtArgs) -> Result<()> {
    let x = read_data_csv(&a.data)?;
    let y = read_response_csv(&a.response)?;
    let g = read_graph(&a.graph, x.n_cols())?;
    let target = parse_index_spec(&a.target)?;
    let stat = CrtStatistic::from_name(&a.stat).ok_or_else(|| {
        Error::Invalid(format!(
            "unknown CRT statistic '{}' (expected lm-sst, lm-ssr, glm-dev, glm-l1-d, \
             glm-l1-r-sst, lm-l1-r-ssr)",
            a.stat
        ))
    })?;
    let sampler = SamplerConfig::new(a.seed)
        .with_copies(a.copies)
        .with_iterations(a.iters);
    let problem = CrtProblem::new(y, x, target.clone(), g, stat.clone(), sampler);
    if a.bonferroni_per_variable {
        let r = run_crt_per_variable(&problem)?;
        let report = PerVariableReport {
            statistic: stat.name().to_string(),
            target: one_based(&target),
            mode: "bonferroni-per-variable".to_string(),
            per_variable: r
                .per_variable
                .iter()
                .map(|&(col, pvalue)| PerVariableEntry { column: col + 1, pvalue })
                .collect(),
            combined_pvalue: r.combined,
            copies: a.copies,
            iterations: a.iters,
            seed: a.seed,
        };
        println!("{}", to_json(&report));
    } else {
        let r = run_crt(&problem)?;
        let report = CrtReport {
            statistic: stat.name().to_string(),
            target: one_based(&target),
            observed: r.observed,
            pvalue: r.pvalue,
            copies: a.copies,
            iterations: a.iters,
            seed: a.seed,
            warnings: r.warnings,
        };
        println!("{}", to_json(&report));
    }
    Ok(())
}

fn family_name(f: ScenarioFamily) -> &'static str {
    match f {
        ScenarioFamily::GofBand => "gof_band",
        ScenarioFamily::GofHub => "gof_hub",
        ScenarioFamily::GofEr => "gof_er",
        ScenarioFamily::CrtLinear => "crt_linear",
        ScenarioFamily::CrtLogistic => "crt_logistic",
        ScenarioFamily::CrtNonlinear => "crt_nonlinear",
        ScenarioFamily::CrtNonlinearBinary => "crt_nonlinear_binary",
    }
}

fn cmd_bench(a: &BenchArgs) -> Result<()> {
    let text = std::fs::read_to_string(&a.config)?;
    let (cfg, methods) = parse_bench_config(&text)?;
    let report = run_power_study(&cfg, &methods)?;
    let mut lines = String::new();
    for m in &report.methods {
        let record = BenchRecord {
            family: family_name(cfg.family).to_string(),
            p: cfg.p,
            n: cfg.n,
            copies: cfg.copies,
            iterations: cfg.iterations,
            replications: cfg.replications,
            alpha: cfg.alpha,
            seed: cfg.seed,
            s: cfg.s,
            k: cfg.k,
            k0: cfg.k0,
            xi: cfg.xi,
            q: cfg.q,
            q0: cfg.q0,
            delete_prob: cfg.delete_prob,
            theta: cfg.theta,
            method: m.method.clone(),
            rejections: m.rejections,
            failures: m.failures,
            proportion: m.proportion,
            standard_error: m.standard_error,
        };
        lines.push_str(&to_json(&record));
        lines.push('\n');
    }
    match &a.out {
        Some(path) => std::fs::write(path, &lines)?,
        None => print!("{lines}"),
    }
    eprintln!(
        "{} method(s) x {} replications in {:.1}s",
        report.methods.len(),
        cfg.replications,
        report.elapsed_seconds
    );
    Ok(())
}

/// Name of the first recognized record shape, if any.
fn classify(value: &serde_json::Value) -> Option<&'static str> {
    if serde_json::from_value::<GofReport>(value.clone()).is_ok() {
        return Some("gof");
    }
    if serde_json::from_value::<CrtReport>(value.clone()).is_ok() {
        return Some("crt");
    }
    if serde_json::from_value::<PerVariableReport>(value.clone()).is_ok() {
        return Some("crt-per-variable");
    }
    if serde_json::from_value::<BenchRecord>(value.clone()).is_ok() {
        return Some("bench-record");
    }
    if serde_json::from_value::<SampleManifest>(value.clone()).is_ok() {
        return Some("sample-manifest");
    }
    None
}

fn cmd_validate(a: &ValidateArgs) -> Result<()> {
    let text = match &a.input {
        Some(path) if path.as_os_str() != "-" => std::fs::read_to_string(path)?,
        _ => {
            let mut buf = String::new();
            std::io::stdin().read_to_string(&mut buf)?;
            buf
        }
    };
    // a single (possibly pretty-printed) JSON value, else one value per line
    let values: Vec<serde_json::Value> = match serde_json::from_str(&text) {
        Ok(v) => vec![v],
        Err(_) => {
            let mut vs = Vec::new();
            for (lineno, line) in text.lines().enumerate() {
                let line = line.trim();
                if line.is_empty() {
                    continue;
                }
                vs.push(serde_json::from_str(line).map_err(|e| {
                    Error::Parse(format!("line {}: {e}", lineno + 1))
                })?);
            }
            vs
        }
    };
    if values.is_empty() {
        return Err(Error::Parse("no JSON input".to_string()));
    }
    let mut kinds: Vec<&'static str> = Vec::new();
    for (i, v) in values.iter().enumerate() {
        let kind = classify(v).ok_or_else(|| {
            Error::Parse(format!("record {}: not a recognized ggmtest result", i + 1))
        })?;
        if !kinds.contains(&kind) {
            kinds.push(kind);
        }
    }
    println!(
        "{}",
        to_json(&serde_json::json!({
            "valid": true,
            "records": values.len(),
            "kinds": kinds,
        }))
    );
    Ok(())
}

fn exit_code(e: &Error) -> i32 {
    match e {
        Error::Io(_) | Error::Parse(_) => 1,
        Error::Invalid(_) => 2,
        Error::Numerical(_) => 3,
    }
}

fn main() {
    let cli = Cli::parse();
    if let Some(threads) = cli.threads {
        if let Err(e) = rayon::ThreadPoolBuilder::new().num_threads(threads).build_global() {
            eprintln!("error: {e}");
            std::process::exit(2);
        }
    }
    let result = match &cli.command {
        Command::Sample(a) => cmd_sample(a),
        Command::Gof(a) => cmd_gof(a),
        Command::Crt(a) => cmd_crt(a),
        Command::Bench(a) => cmd_bench(a),
        Command::Validate(a) => cmd_validate(a),
    };
    if let Err(e) = result {
        eprintln!("error: {e}");
        std::process::exit(exit_code(&e));
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn index_spec_parses_ranges_and_singletons() {
        assert_eq!(parse_index_spec("1-8,12").unwrap(), vec![0, 1, 2, 3, 4, 5, 6, 7, 11]);
        assert_eq!(parse_index_spec("3").unwrap(), vec![2]);
        assert_eq!(parse_index_spec("2, 4-5").unwrap(), vec![1, 3, 4]);
        assert_eq!(parse_index_spec("5-5").unwrap(), vec![4]);
    }

    #[test]
    fn index_spec_rejects_malformed_input() {
        for bad in ["0", "0-3", "", " ", "3-1", "1,1", "1-4,2", "a", "1-", "-2", "1.5"] {
            assert!(parse_index_spec(bad).is_err(), "accepted {bad:?}");
        }
    }

    #[test]
    fn classify_distinguishes_record_kinds() {
        let gof = GofReport {
            statistic: "fsum".into(),
            observed: 1.0,
            pvalue: 0.5,
            copies: 10,
            iterations: 3,
            seed: 1,
            mode: "cons".into(),
            local: None,
            warnings: vec![],
        };
        let v: serde_json::Value = serde_json::from_str(&to_json(&gof)).unwrap();
        assert_eq!(classify(&v), Some("gof"));

        let crt = CrtReport {
            statistic: "lm-sst".into(),
            target: vec![1, 2],
            observed: 1.0,
            pvalue: 0.5,
            copies: 10,
            iterations: 3,
            seed: 1,
            warnings: vec![],
        };
        let v: serde_json::Value = serde_json::from_str(&to_json(&crt)).unwrap();
        assert_eq!(classify(&v), Some("crt"));

        assert_eq!(classify(&serde_json::json!({"hello": 1})), None);
    }
}
