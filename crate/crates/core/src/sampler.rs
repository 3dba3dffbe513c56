//! Exchangeable copies of GGM data by residual rotation.
//!
//! `residual_rotation` is the one-column update: regress `X_i` on the
//! intercept plus its neighbor columns, keep the fitted part, and replace the
//! residual with a uniformly random vector of the same length in the same
//! orthogonal complement. Because the fitted part and the residual norm are
//! conserved, so is the sufficient statistic `ψ_G`.
//!
//! `exchangeable_copies` composes rotations into the hub-and-spokes
//! construction: `L` forward passes over the order `I` produce a hub matrix,
//! and `M` independent backward chains (reversed `I`, `L` passes each) start
//! from that hub. The result is `M` copies that are exchangeable with the
//! input conditional on `ψ_G` — exactly, not asymptotically.

use crate::data::DataMatrix;
use crate::error::{Error, Result};
use crate::graph::Graph;
use crate::linalg::{norm2, QrProjector};
use crate::rng::{stream_rng, StreamRng};
use rand::Rng;
use rand_distr::StandardNormal;
use rayon::prelude::*;

/// Tuning knobs for [`exchangeable_copies`].
#[derive(Clone, Debug)]
pub struct SamplerConfig {
    /// Number of copies `M`.
    pub num_copies: usize,
    /// Passes `L` over the order in each direction.
    pub iterations: usize,
    /// Update order `I`: distinct node ids, a permutation of the subset being
    /// resampled. `None` means all nodes in index order.
    pub order: Option<Vec<usize>>,
    /// Master seed; every random draw in the construction derives from it.
    pub seed: u64,
}

impl SamplerConfig {
    /// The defaults used throughout the experiments: `M = 100`, `L = 3`,
    /// full index order.
    pub fn new(seed: u64) -> SamplerConfig {
        SamplerConfig { num_copies: 100, iterations: 3, order: None, seed }
    }

    pub fn with_copies(mut self, m: usize) -> SamplerConfig {
        self.num_copies = m;
        self
    }

    pub fn with_iterations(mut self, l: usize) -> SamplerConfig {
        self.iterations = l;
        self
    }

    pub fn with_order(mut self, order: Vec<usize>) -> SamplerConfig {
        self.order = Some(order);
        self
    }
}

/// Nodes sorted by ascending degree (ties by id), a useful update order when
/// a few nodes have much larger neighborhoods than the rest.
pub fn degree_ascending_order(g: &Graph) -> Vec<usize> {
    let mut order: Vec<usize> = (0..g.num_nodes()).collect();
    order.sort_by_key(|&i| (g.degree(i), i));
    order
}

const DEGENERATE_TOL: f64 = 1e-12;

/// One residual rotation of column `i` given its neighbor set; returns the
/// replacement column. Draws exactly `n` standard normals from `rng`.
pub fn residual_rotation<R: Rng>(
    x: &DataMatrix,
    i: usize,
    neighbors: &[usize],
    rng: &mut R,
) -> Result<Vec<f64>> {
    let n = x.n_rows();
    let p = x.n_cols();
    if i >= p {
        return Err(Error::invalid(format!("column {i} out of range for p = {p}")));
    }
    for &j in neighbors {
        if j >= p || j == i {
            return Err(Error::invalid(format!(
                "invalid neighbor {j} for column {i} (p = {p})"
            )));
        }
    }
    if n <= neighbors.len() + 1 {
        return Err(Error::invalid(format!(
            "residual rotation needs n > |N_i| + 1 (n = {n}, |N_i| = {})",
            neighbors.len()
        )));
    }
    // Always consume n draws so the stream position is independent of the
    // degenerate-residual branches below.
    let e: Vec<f64> = (0..n).map(|_| rng.sample(StandardNormal)).collect();

    let cols: Vec<&[f64]> = neighbors.iter().map(|&j| x.column(j)).collect();
    let qr = QrProjector::factor(n, &cols)?;
    let xi = x.column(i);
    let (fitted, resid) = qr.project(xi);
    let r_norm = norm2(&resid);
    if r_norm < DEGENERATE_TOL * norm2(xi) {
        return Ok(xi.to_vec());
    }
    let fresh = qr.residual(&e);
    let fresh_norm = norm2(&fresh);
    if fresh_norm < DEGENERATE_TOL * norm2(&e) {
        return Ok(xi.to_vec());
    }
    let scale = r_norm / fresh_norm;
    Ok(fitted
        .iter()
        .zip(&fresh)
        .map(|(f, r)| f + r * scale)
        .collect())
}

fn rotate_in_place(
    x: &mut DataMatrix,
    i: usize,
    neighbors: &[usize],
    rng: &mut StreamRng,
) -> Result<()> {
    let col = residual_rotation(x, i, neighbors, rng)?;
    x.set_column(i, &col);
    Ok(())
}

fn validate(x: &DataMatrix, g: &Graph, cfg: &SamplerConfig) -> Result<Vec<usize>> {
    let p = x.n_cols();
    if p != g.num_nodes() {
        return Err(Error::invalid(format!(
            "data has {p} columns but graph has {} nodes",
            g.num_nodes()
        )));
    }
    if cfg.num_copies == 0 {
        return Err(Error::invalid("num_copies must be at least 1"));
    }
    if cfg.iterations == 0 {
        return Err(Error::invalid("iterations must be at least 1"));
    }
    let order: Vec<usize> = match &cfg.order {
        Some(o) => o.clone(),
        None => (0..p).collect(),
    };
    let mut seen = vec![false; p];
    for &i in &order {
        if i >= p {
            return Err(Error::invalid(format!("order entry {i} out of range for p = {p}")));
        }
        if seen[i] {
            return Err(Error::invalid(format!("order repeats node {i}")));
        }
        seen[i] = true;
    }
    let needed = order.iter().map(|&i| g.degree(i)).max().unwrap_or(0) + 1;
    if x.n_rows() <= needed {
        return Err(Error::invalid(format!(
            "sample size n = {} too small: need n > 1 + max neighborhood size = {}",
            x.n_rows(),
            needed
        )));
    }
    Ok(order)
}

/// Run the hub-and-spokes construction and apply `f` to each finished copy.
///
/// Chains run in parallel; chain `m` (1-based) draws from rng stream `m` of
/// the master seed, the forward hub pass from stream 0, so results are
/// deterministic regardless of scheduling. Results are returned in copy
/// order.
pub fn map_copies<T, F>(x: &DataMatrix, g: &Graph, cfg: &SamplerConfig, f: F) -> Result<Vec<T>>
where
    T: Send,
    F: Fn(usize, &DataMatrix) -> Result<T> + Sync,
{
    let order = validate(x, g, cfg)?;

    let mut hub = x.clone();
    let mut hub_rng = stream_rng(cfg.seed, 0);
    for _ in 0..cfg.iterations {
        for &i in &order {
            rotate_in_place(&mut hub, i, g.neighbors(i), &mut hub_rng)?;
        }
    }

    (1..=cfg.num_copies)
        .into_par_iter()
        .map(|m| {
            let mut y = hub.clone();
            let mut rng = stream_rng(cfg.seed, m as u64);
            for _ in 0..cfg.iterations {
                for &i in order.iter().rev() {
                    rotate_in_place(&mut y, i, g.neighbors(i), &mut rng)?;
                }
            }
            f(m - 1, &y)
        })
        .collect()
}

/// Materialize all `M` exchangeable copies.
pub fn exchangeable_copies(
    x: &DataMatrix,
    g: &Graph,
    cfg: &SamplerConfig,
) -> Result<Vec<DataMatrix>> {
    map_copies(x, g, cfg, |_, y| Ok(y.clone()))
}
