//! Undirected graphs and the synthetic precision-matrix families used in the
//! experiments (band, hub, Erdős–Rényi), plus their "null" modifications.
//!
//! Node ids are 0-based everywhere in memory. The text edge-list format is
//! 1-based (one `i j` pair per line, `#` comments), matching the usual
//! conventions of published adjacency lists; conversion happens only at the
//! I/O boundary.

use crate::data::SquareMatrix;
use crate::error::{Error, Result};
use crate::linalg::{cholesky, jacobi_eigenvalues};
use rand::Rng;

/// Undirected graph on `p` nodes with sorted adjacency lists.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Graph {
    p: usize,
    neighbors: Vec<Vec<usize>>,
}

impl Graph {
    /// Graph with no edges.
    pub fn empty(p: usize) -> Graph {
        Graph { p, neighbors: vec![Vec::new(); p] }
    }

    /// Build from an edge list; edges are deduplicated and symmetrized.
    pub fn from_edge_list(p: usize, edges: &[(usize, usize)]) -> Result<Graph> {
        let mut sets: Vec<Vec<usize>> = vec![Vec::new(); p];
        for &(i, j) in edges {
            if i >= p || j >= p {
                return Err(Error::invalid(format!(
                    "edge ({i}, {j}) out of range for p = {p}"
                )));
            }
            if i == j {
                return Err(Error::invalid(format!("self-loop at node {i}")));
            }
            sets[i].push(j);
            sets[j].push(i);
        }
        for s in sets.iter_mut() {
            s.sort_unstable();
            s.dedup();
        }
        Ok(Graph { p, neighbors: sets })
    }

    /// Number of nodes.
    pub fn num_nodes(&self) -> usize {
        self.p
    }

    /// Sorted neighbor list of node `i`.
    pub fn neighbors(&self, i: usize) -> &[usize] {
        &self.neighbors[i]
    }

    pub fn degree(&self, i: usize) -> usize {
        self.neighbors[i].len()
    }

    pub fn has_edge(&self, i: usize, j: usize) -> bool {
        self.neighbors[i].binary_search(&j).is_ok()
    }

    /// All edges as (i, j) with i < j, lexicographically sorted.
    pub fn edges(&self) -> Vec<(usize, usize)> {
        let mut out = Vec::new();
        for i in 0..self.p {
            for &j in &self.neighbors[i] {
                if j > i {
                    out.push((i, j));
                }
            }
        }
        out
    }

    pub fn edge_count(&self) -> usize {
        self.neighbors.iter().map(|n| n.len()).sum::<usize>() / 2
    }

    /// All non-adjacent pairs (i, j) with i < j, lexicographically sorted.
    pub fn non_edge_pairs(&self) -> Vec<(usize, usize)> {
        let mut out = Vec::new();
        for i in 0..self.p {
            for j in (i + 1)..self.p {
                if !self.has_edge(i, j) {
                    out.push((i, j));
                }
            }
        }
        out
    }

    /// Relabeled graph: node `k` of the result is node `perm[k]` of `self`.
    pub fn permute(&self, perm: &[usize]) -> Result<Graph> {
        if perm.len() != self.p {
            return Err(Error::invalid("permutation length does not match node count"));
        }
        let mut inv = vec![usize::MAX; self.p];
        for (new, &old) in perm.iter().enumerate() {
            if old >= self.p || inv[old] != usize::MAX {
                return Err(Error::invalid("not a permutation"));
            }
            inv[old] = new;
        }
        let edges: Vec<(usize, usize)> =
            self.edges().iter().map(|&(a, b)| (inv[a], inv[b])).collect();
        Graph::from_edge_list(self.p, &edges)
    }

    /// Parse the 1-based text edge-list format.
    pub fn parse_edge_list(text: &str, p: usize) -> Result<Graph> {
        let mut edges = Vec::new();
        for (lineno, line) in text.lines().enumerate() {
            let line = line.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            let mut parts = line.split_whitespace();
            let (a, b) = match (parts.next(), parts.next(), parts.next()) {
                (Some(a), Some(b), None) => (a, b),
                _ => {
                    return Err(Error::parse(format!(
                        "edge list line {}: expected exactly two node ids, got {line:?}",
                        lineno + 1
                    )))
                }
            };
            let parse_id = |tok: &str| -> Result<usize> {
                let v: usize = tok.parse().map_err(|_| {
                    Error::parse(format!(
                        "edge list line {}: invalid node id {tok:?}",
                        lineno + 1
                    ))
                })?;
                if v == 0 {
                    return Err(Error::parse(format!(
                        "edge list line {}: node ids are 1-based (got 0)",
                        lineno + 1
                    )));
                }
                Ok(v - 1)
            };
            edges.push((parse_id(a)?, parse_id(b)?));
        }
        Graph::from_edge_list(p, &edges)
    }

    /// Render the 1-based text edge-list format.
    pub fn to_edge_list_string(&self) -> String {
        let mut s = String::new();
        for (i, j) in self.edges() {
            s.push_str(&format!("{} {}\n", i + 1, j + 1));
        }
        s
    }
}

/// Largest node degree (`d` in the sample-size conditions).
pub fn max_degree(g: &Graph) -> usize {
    (0..g.num_nodes()).map(|i| g.degree(i)).max().unwrap_or(0)
}

/// Symmetric positive-definite precision matrix, validated on construction.
#[derive(Clone, Debug)]
pub struct PrecisionMatrix {
    m: SquareMatrix,
}

impl PrecisionMatrix {
    /// Validate symmetry (within 1e-12 relative) and positive definiteness
    /// (by Cholesky success).
    pub fn new(m: SquareMatrix) -> Result<PrecisionMatrix> {
        let scale = (0..m.dim()).map(|i| m.get(i, i).abs()).fold(1.0f64, f64::max);
        if m.asymmetry() > 1e-12 * scale {
            return Err(Error::invalid("precision matrix is not symmetric"));
        }
        cholesky(&m).map_err(|_| {
            Error::numerical("precision matrix is not positive definite")
        })?;
        Ok(PrecisionMatrix { m })
    }

    pub fn dim(&self) -> usize {
        self.m.dim()
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.m.get(i, j)
    }

    pub fn as_matrix(&self) -> &SquareMatrix {
        &self.m
    }

    pub fn into_matrix(self) -> SquareMatrix {
        self.m
    }

    /// Graph of the off-diagonal nonzero pattern.
    pub fn support_graph(&self) -> Graph {
        let p = self.dim();
        let mut edges = Vec::new();
        for i in 0..p {
            for j in (i + 1)..p {
                if self.get(i, j) != 0.0 {
                    edges.push((i, j));
                }
            }
        }
        Graph::from_edge_list(p, &edges).expect("valid by construction")
    }

    /// Entrywise relabeling matching [`Graph::permute`].
    pub fn permute(&self, perm: &[usize]) -> Result<PrecisionMatrix> {
        let p = self.dim();
        if perm.len() != p {
            return Err(Error::invalid("permutation length does not match dimension"));
        }
        let mut out = SquareMatrix::zeros(p);
        for i in 0..p {
            for j in 0..p {
                out.set(i, j, self.get(perm[i], perm[j]));
            }
        }
        PrecisionMatrix::new(out)
    }
}

/// Band graph: `ω_ii = 1`, `ω_ij = s` whenever `1 ≤ |i − j| ≤ K`.
pub fn band_graph_precision(p: usize, k: usize, s: f64) -> Result<(Graph, PrecisionMatrix)> {
    if p < 2 {
        return Err(Error::invalid("band graph needs p >= 2"));
    }
    if k == 0 || k >= p {
        return Err(Error::invalid(format!("bandwidth K = {k} must satisfy 1 <= K < p")));
    }
    if !(s > 0.0 && s < 1.0) {
        return Err(Error::invalid(format!("band signal s = {s} out of range")));
    }
    let mut m = SquareMatrix::identity(p);
    let mut edges = Vec::new();
    for i in 0..p {
        for j in (i + 1)..p.min(i + k + 1) {
            m.set(i, j, s);
            m.set(j, i, s);
            edges.push((i, j));
        }
    }
    let omega = PrecisionMatrix::new(m).map_err(|_| {
        Error::numerical(format!(
            "band precision (p = {p}, K = {k}, s = {s}) is not positive definite"
        ))
    })?;
    Ok((Graph::from_edge_list(p, &edges)?, omega))
}

/// Hub graph: nodes split into groups of size `h`; the first node of each
/// group is a hub joined to every other group member with unit weight, and
/// `ω_ii = Σ_{j≠i} |ω_ij| + ξ`.
pub fn hub_graph_precision(p: usize, h: usize, xi: f64) -> Result<(Graph, PrecisionMatrix)> {
    if h < 2 || p == 0 || p % h != 0 {
        return Err(Error::invalid(format!(
            "hub graph needs group size h >= 2 dividing p (got p = {p}, h = {h})"
        )));
    }
    if !(xi > 0.0) {
        return Err(Error::invalid("hub noise xi must be positive"));
    }
    let mut m = SquareMatrix::zeros(p);
    let mut edges = Vec::new();
    for g in 0..(p / h) {
        let hub = g * h;
        for leaf in (hub + 1)..(hub + h) {
            m.set(hub, leaf, 1.0);
            m.set(leaf, hub, 1.0);
            edges.push((hub, leaf));
        }
    }
    for i in 0..p {
        let row_abs: f64 = (0..p).filter(|&j| j != i).map(|j| m.get(i, j).abs()).sum();
        m.set(i, i, row_abs + xi);
    }
    Ok((Graph::from_edge_list(p, &edges)?, PrecisionMatrix::new(m)?))
}

/// Erdős–Rényi precision: `A` has unit diagonal and off-diagonals
/// `u_ij δ_ij` with `δ_ij ~ Bernoulli(q)`, `u_ij ~ U(s/2, 3s/2)`; then
/// `Ω = A + (|λ_min(A)| + 0.05) I`. The shift is applied as printed even when
/// `λ_min(A) > 0`.
pub fn erdos_renyi_precision<R: Rng>(
    p: usize,
    q: f64,
    s: f64,
    rng: &mut R,
) -> Result<(Graph, PrecisionMatrix)> {
    if p < 2 {
        return Err(Error::invalid("ER graph needs p >= 2"));
    }
    if !(q > 0.0 && q < 1.0) {
        return Err(Error::invalid(format!("edge probability q = {q} must be in (0, 1)")));
    }
    if !(s > 0.0) {
        return Err(Error::invalid("ER signal s must be positive"));
    }
    let mut a = SquareMatrix::identity(p);
    let mut edges = Vec::new();
    for i in 0..p {
        for j in (i + 1)..p {
            if rng.random_bool(q) {
                let u = rng.random_range(s / 2.0..s * 1.5);
                a.set(i, j, u);
                a.set(j, i, u);
                edges.push((i, j));
            }
        }
    }
    let lambda_min = jacobi_eigenvalues(&a)[0];
    let shift = lambda_min.abs() + 0.05;
    for i in 0..p {
        a.set(i, i, a.get(i, i) + shift);
    }
    Ok((Graph::from_edge_list(p, &edges)?, PrecisionMatrix::new(a)?))
}

/// Independently delete each edge with probability `prob`.
pub fn delete_edges_randomly<R: Rng>(g: &Graph, prob: f64, rng: &mut R) -> Result<Graph> {
    if !(0.0..=1.0).contains(&prob) {
        return Err(Error::invalid(format!("delete probability {prob} outside [0, 1]")));
    }
    let kept: Vec<(usize, usize)> = g
        .edges()
        .into_iter()
        .filter(|_| !rng.random_bool(prob))
        .collect();
    Graph::from_edge_list(g.num_nodes(), &kept)
}
