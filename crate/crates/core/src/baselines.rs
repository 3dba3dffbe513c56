//! Deterministic goodness-of-fit baselines: the Bonferroni-corrected partial
//! correlation test and the single-collection multiple-testing procedure
//! M¹P₁. Both are pure functions of the data — no Monte Carlo copies.

use crate::data::DataMatrix;
use crate::error::{Error, Result};
use crate::gof_stats::{prc_pair_quantities, singleton_phis};
use crate::graph::Graph;
use crate::special::f_upper_quantile;

/// Outcome of a baseline test at level α.
#[derive(Clone, Debug)]
pub enum BaselineResult {
    Bonferroni {
        reject: bool,
        /// `min(1, K · min p_ij)` over all non-edge pairs.
        adjusted_pvalue: f64,
        /// `K`: total number of non-edge pairs.
        pairs: usize,
        /// Pairs whose sample-size precondition failed.
        skipped: usize,
    },
    M1P1 {
        reject: bool,
        /// `sup_i sup_A (φ_A − F̄⁻¹(α_A))`; positive means reject.
        max_margin: f64,
    },
}

impl BaselineResult {
    pub fn reject(&self) -> bool {
        match *self {
            BaselineResult::Bonferroni { reject, .. } => reject,
            BaselineResult::M1P1 { reject, .. } => reject,
        }
    }
}

fn check_alpha(alpha: f64) -> Result<()> {
    if !(alpha > 0.0 && alpha < 1.0) {
        return Err(Error::invalid(format!("alpha = {alpha} outside (0, 1)")));
    }
    Ok(())
}

/// Bonferroni partial-correlation test: adjusted p-value
/// `min(1, K · min_{(i,j) non-edge} p_ij)` with `p_ij` the PRC pair p-value.
/// A complete graph yields a vacuous accept with adjusted p-value 1.
pub fn bonf_gof(x: &DataMatrix, g: &Graph, alpha: f64) -> Result<BaselineResult> {
    check_alpha(alpha)?;
    if x.n_cols() != g.num_nodes() {
        return Err(Error::invalid("data and graph dimensions differ"));
    }
    let pairs: Vec<(usize, usize)> = g.non_edge_pairs();
    let k = pairs.len();
    if k == 0 {
        return Ok(BaselineResult::Bonferroni {
            reject: false,
            adjusted_pvalue: 1.0,
            pairs: 0,
            skipped: 0,
        });
    }
    let mut min_p = f64::INFINITY;
    let mut skipped = 0;
    for (i, j) in pairs {
        match prc_pair_quantities(x, g, i, j) {
            Ok(q) => min_p = min_p.min(q.p),
            Err(Error::Invalid(_)) => skipped += 1,
            Err(e) => return Err(e),
        }
    }
    if skipped == k {
        return Err(Error::invalid(
            "every non-edge pair was skipped (sample too small for the Bonferroni test)",
        ));
    }
    let adjusted = (k as f64 * min_p).min(1.0);
    Ok(BaselineResult::Bonferroni {
        reject: adjusted <= alpha,
        adjusted_pvalue: adjusted,
        pairs: k,
        skipped,
    })
}

/// M¹P₁: per node `i`, compare each singleton F-statistic `φ_{{a}}` against
/// the upper quantile `F̄⁻¹_{1, n−h_i−1}(α_i / (p − h_i))` with `α_i = α/p`;
/// reject when any statistic exceeds its threshold.
pub fn m1p1_gof(x: &DataMatrix, g: &Graph, alpha: f64) -> Result<BaselineResult> {
    check_alpha(alpha)?;
    let p = x.n_cols();
    let n = x.n_rows();
    if p != g.num_nodes() {
        return Err(Error::invalid("data and graph dimensions differ"));
    }
    let mut max_margin = f64::NEG_INFINITY;
    let mut any_candidates = false;
    for i in 0..p {
        let h = g.degree(i) + 1;
        if n <= h + 1 {
            return Err(Error::invalid(format!(
                "node {i} needs n > h_i + 1 (n = {n}, h = {h})"
            )));
        }
        let candidates = p - h; // singletons outside {i} ∪ N_i
        if candidates == 0 {
            continue; // node already fully connected, nothing to test
        }
        any_candidates = true;
        let alpha_a = alpha / (p as f64) / (candidates as f64);
        let threshold = f_upper_quantile(alpha_a, 1.0, (n - h - 1) as f64)?;
        for (_, phi) in singleton_phis(x, g, i)? {
            max_margin = max_margin.max(phi - threshold);
        }
    }
    if !any_candidates {
        // complete graph: vacuous accept
        return Ok(BaselineResult::M1P1 { reject: false, max_margin: f64::NEG_INFINITY });
    }
    Ok(BaselineResult::M1P1 { reject: max_margin > 0.0, max_margin })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::ggm::mvn_sample;
    use crate::graph::band_graph_precision;
    use crate::rng::stream_rng;
    use approx::assert_abs_diff_eq;

    #[test]
    fn bonferroni_on_complete_graph_is_vacuous() {
        let g = Graph::from_edge_list(3, &[(0, 1), (0, 2), (1, 2)]).unwrap();
        let (_, om) = band_graph_precision(3, 1, 0.1).unwrap();
        let x = mvn_sample(20, &[0.0; 3], &om, &mut stream_rng(1, 0)).unwrap();
        match bonf_gof(&x, &g, 0.05).unwrap() {
            BaselineResult::Bonferroni { reject, adjusted_pvalue, pairs, .. } => {
                assert!(!reject);
                assert_eq!(adjusted_pvalue, 1.0);
                assert_eq!(pairs, 0);
            }
            _ => panic!("wrong variant"),
        }
    }

    #[test]
    fn bonferroni_matches_pair_composition() {
        // single non-edge (1,2): adjusted p equals that pair's p-value
        let g = Graph::from_edge_list(3, &[(0, 1), (0, 2)]).unwrap();
        let (_, om) = band_graph_precision(3, 1, 0.15).unwrap();
        let x = mvn_sample(25, &[0.0; 3], &om, &mut stream_rng(2, 0)).unwrap();
        let q = prc_pair_quantities(&x, &g, 1, 2).unwrap();
        match bonf_gof(&x, &g, 0.05).unwrap() {
            BaselineResult::Bonferroni { adjusted_pvalue, pairs, .. } => {
                assert_eq!(pairs, 1);
                assert_abs_diff_eq!(adjusted_pvalue, q.p.min(1.0), epsilon = 1e-15);
            }
            _ => panic!("wrong variant"),
        }

        // empty graph on 5 nodes: K = 10, adjusted = min(1, 10 · min p)
        let e = Graph::empty(5);
        let (_, om5) = band_graph_precision(5, 1, 0.1).unwrap();
        let y = mvn_sample(30, &[0.0; 5], &om5, &mut stream_rng(3, 0)).unwrap();
        let mut min_p = f64::INFINITY;
        for (i, j) in e.non_edge_pairs() {
            min_p = min_p.min(prc_pair_quantities(&y, &e, i, j).unwrap().p);
        }
        match bonf_gof(&y, &e, 0.05).unwrap() {
            BaselineResult::Bonferroni { adjusted_pvalue, pairs, .. } => {
                assert_eq!(pairs, 10);
                assert_abs_diff_eq!(adjusted_pvalue, (10.0 * min_p).min(1.0), epsilon = 1e-15);
                assert!(adjusted_pvalue <= 1.0);
            }
            _ => panic!("wrong variant"),
        }
    }

    #[test]
    fn m1p1_accepts_orthogonal_data() {
        // mutually orthogonal, mean-zero columns: every φ_A is exactly 0
        let x = DataMatrix::from_columns(&[
            vec![1.0, 1.0, -1.0, -1.0],
            vec![1.0, -1.0, 1.0, -1.0],
            vec![1.0, -1.0, -1.0, 1.0],
        ])
        .unwrap();
        let g = Graph::empty(3);
        match m1p1_gof(&x, &g, 0.05).unwrap() {
            BaselineResult::M1P1 { reject, max_margin } => {
                assert!(!reject);
                assert!(max_margin < 0.0, "margins are −threshold, got {max_margin}");
            }
            _ => panic!("wrong variant"),
        }
    }

    #[test]
    fn m1p1_rejects_planted_dependence() {
        // x1 = x0 + tiny noise but the graph claims independence
        let mut rng = stream_rng(4, 0);
        let (_, om) = band_graph_precision(2, 1, 0.1).unwrap();
        let base = mvn_sample(30, &[0.0, 0.0], &om, &mut rng).unwrap();
        let c0: Vec<f64> = base.column(0).to_vec();
        let c1: Vec<f64> = c0.iter().enumerate().map(|(k, &v)| v + 1e-3 * (k as f64).sin()).collect();
        let x = DataMatrix::from_columns(&[c0, c1]).unwrap();
        let g = Graph::empty(2);
        assert!(m1p1_gof(&x, &g, 0.05).unwrap().reject());
    }

    #[test]
    fn m1p1_complete_graph_is_vacuous() {
        let g = Graph::from_edge_list(3, &[(0, 1), (0, 2), (1, 2)]).unwrap();
        let (_, om) = band_graph_precision(3, 1, 0.1).unwrap();
        let x = mvn_sample(20, &[0.0; 3], &om, &mut stream_rng(5, 0)).unwrap();
        assert!(!m1p1_gof(&x, &g, 0.05).unwrap().reject());
    }

    #[test]
    fn null_sizes_are_controlled() {
        // light calibration check; the acceptance suite runs the full one
        let (g, om) = band_graph_precision(8, 1, 0.15).unwrap();
        let reps = 200;
        let mut bonf_rej = 0;
        let mut m1p1_rej = 0;
        for r in 0..reps {
            let x = mvn_sample(30, &[0.0; 8], &om, &mut stream_rng(100, r)).unwrap();
            if bonf_gof(&x, &g, 0.05).unwrap().reject() {
                bonf_rej += 1;
            }
            if m1p1_gof(&x, &g, 0.05).unwrap().reject() {
                m1p1_rej += 1;
            }
        }
        // α + 3·SE at α = 0.05, R = 200 → ≈ 0.096
        let bound = (0.05 + 3.0 * (0.05f64 * 0.95 / reps as f64).sqrt()) * reps as f64;
        assert!(
            (bonf_rej as f64) <= bound,
            "Bonferroni size {bonf_rej}/{reps} above bound {bound:.1}"
        );
        assert!(
            (m1p1_rej as f64) <= bound,
            "M1P1 size {m1p1_rej}/{reps} above bound {bound:.1}"
        );
    }

    #[test]
    fn input_validation() {
        let (g, om) = band_graph_precision(4, 1, 0.1).unwrap();
        let x = mvn_sample(20, &[0.0; 4], &om, &mut stream_rng(6, 0)).unwrap();
        assert!(bonf_gof(&x, &g, 0.0).is_err());
        assert!(bonf_gof(&x, &g, 1.0).is_err());
        assert!(m1p1_gof(&x, &g, -0.1).is_err());
        let wrong = Graph::empty(5);
        assert!(bonf_gof(&x, &wrong, 0.05).is_err());
        // n too small for a node's regression
        let tiny = mvn_sample(3, &[0.0; 4], &om, &mut stream_rng(7, 0)).unwrap();
        assert!(m1p1_gof(&tiny, &g, 0.05).is_err());
    }
}
