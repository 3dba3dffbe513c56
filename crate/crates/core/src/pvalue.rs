//! Monte Carlo p-values from exchangeable statistic values.
//!
//! All three constructions share the same input: the observed statistic `T_0`
//! and the `M` values computed on the exchangeable copies. Exchangeability
//! makes the conservative version super-uniform and the randomized versions
//! exactly uniform on `{1/(M+1), ..., 1}` when ties have probability zero.

use crate::error::{Error, Result};
use rand::Rng;

/// Which p-value construction to use.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum PvalueMode {
    /// `(1 + #{T_m >= T_0}) / (M + 1)`; never anti-conservative.
    ConservativeOneSided,
    /// Ties broken uniformly: `(S + #{T_m > T_0}) / (M + 1)`,
    /// `S ~ U{1, ..., kappa + 1}` with `kappa` the tie count.
    RandomizedOneSided,
    /// Two-sided with random tie-breaking, clamped to 1 (the printed formula
    /// can exceed 1).
    RandomizedTwoSided,
}

fn counts(t0: f64, copies: &[f64]) -> Result<(usize, usize, usize)> {
    if copies.is_empty() {
        return Err(Error::invalid("p-value needs at least one copy statistic"));
    }
    if !t0.is_finite() || copies.iter().any(|v| !v.is_finite()) {
        return Err(Error::numerical("p-value inputs must be finite"));
    }
    let mut greater = 0;
    let mut less = 0;
    let mut ties = 0;
    for &t in copies {
        if t > t0 {
            greater += 1;
        } else if t < t0 {
            less += 1;
        } else {
            ties += 1;
        }
    }
    Ok((greater, less, ties))
}

/// `(1 + #{T_m >= T_0}) / (M + 1)`.
pub fn conservative_pvalue(t0: f64, copies: &[f64]) -> Result<f64> {
    let (greater, _, ties) = counts(t0, copies)?;
    Ok((1 + greater + ties) as f64 / (copies.len() + 1) as f64)
}

/// `(S + #{T_m > T_0}) / (M + 1)` with `S` uniform on `{1, ..., kappa + 1}`.
pub fn randomized_pvalue<R: Rng>(t0: f64, copies: &[f64], rng: &mut R) -> Result<f64> {
    let (greater, _, ties) = counts(t0, copies)?;
    let s = rng.random_range(1..=(ties + 1));
    Ok((s + greater) as f64 / (copies.len() + 1) as f64)
}

/// `min(1, 2 (S + min(#greater, #less)) / (M + 1))` with `S` as above.
pub fn two_sided_pvalue<R: Rng>(t0: f64, copies: &[f64], rng: &mut R) -> Result<f64> {
    let (greater, less, ties) = counts(t0, copies)?;
    let s = rng.random_range(1..=(ties + 1));
    let raw = 2.0 * (s + greater.min(less)) as f64 / (copies.len() + 1) as f64;
    Ok(raw.min(1.0))
}

/// Dispatch on [`PvalueMode`]. The rng is consumed only by the randomized
/// modes.
pub fn pvalue<R: Rng>(mode: PvalueMode, t0: f64, copies: &[f64], rng: &mut R) -> Result<f64> {
    match mode {
        PvalueMode::ConservativeOneSided => conservative_pvalue(t0, copies),
        PvalueMode::RandomizedOneSided => randomized_pvalue(t0, copies, rng),
        PvalueMode::RandomizedTwoSided => two_sided_pvalue(t0, copies, rng),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::stream_rng;
    use approx::assert_abs_diff_eq;

    #[test]
    fn conservative_examples() {
        assert_abs_diff_eq!(conservative_pvalue(5.0, &[1.0, 2.0, 3.0, 4.0]).unwrap(), 0.2);
        assert_abs_diff_eq!(conservative_pvalue(1.0, &[1.0, 1.0, 1.0]).unwrap(), 1.0);
        assert_abs_diff_eq!(conservative_pvalue(2.0, &[3.0, 3.0, 1.0]).unwrap(), 0.75);
        assert!(conservative_pvalue(1.0, &[]).is_err());
        assert!(conservative_pvalue(f64::NAN, &[1.0]).is_err());
    }

    #[test]
    fn randomized_examples() {
        let mut rng = stream_rng(1, 0);
        // strict maximum, no ties: S = 1 forced
        let p = randomized_pvalue(9.0, &[1.0, 2.0, 3.0, 4.0], &mut rng).unwrap();
        assert_abs_diff_eq!(p, 0.2);
        // t0 = 1, copies = (1): S in {1, 2} each with probability 1/2
        let mut half = 0;
        let draws = 4000;
        for _ in 0..draws {
            let p = randomized_pvalue(1.0, &[1.0], &mut rng).unwrap();
            assert!(p == 0.5 || p == 1.0);
            if p == 0.5 {
                half += 1;
            }
        }
        let frac = half as f64 / draws as f64;
        assert!((frac - 0.5).abs() < 0.03, "S=1 fraction {frac}");
    }

    #[test]
    fn randomized_is_exactly_uniform_for_continuous_inputs() {
        // M = 2, all three values i.i.d. continuous: p uniform on {1/3, 2/3, 1}
        let mut rng = stream_rng(2, 0);
        let draws = 10_000;
        let mut counts = [0usize; 3];
        for _ in 0..draws {
            let t0: f64 = rng.random();
            let copies = [rng.random::<f64>(), rng.random::<f64>()];
            let p = randomized_pvalue(t0, &copies, &mut rng).unwrap();
            let cell = (p * 3.0).round() as usize - 1;
            counts[cell] += 1;
        }
        let sigma3 = 3.0 * (1.0 / 3.0 * 2.0 / 3.0 / draws as f64).sqrt();
        for c in counts {
            let frac = c as f64 / draws as f64;
            assert!((frac - 1.0 / 3.0).abs() < sigma3, "cell frequency {frac}");
        }
    }

    #[test]
    fn two_sided_examples() {
        let mut rng = stream_rng(3, 0);
        // strict maximum among M = 9: min side 0, S = 1 -> 2/(M+1)
        let copies: Vec<f64> = (0..9).map(|i| i as f64).collect();
        let p = two_sided_pvalue(100.0, &copies, &mut rng).unwrap();
        assert_abs_diff_eq!(p, 0.2);
        // median of three distinct values, M = 2: raw 4/3 clamps to 1
        let p = two_sided_pvalue(2.0, &[1.0, 3.0], &mut rng).unwrap();
        assert_abs_diff_eq!(p, 1.0);
    }

    #[test]
    fn two_sided_level_alpha_validity() {
        let mut rng = stream_rng(4, 0);
        let alpha = 0.05;
        let m = 99;
        let draws = 20_000;
        let mut rejects = 0;
        for _ in 0..draws {
            let t0: f64 = rng.random();
            let copies: Vec<f64> = (0..m).map(|_| rng.random()).collect();
            if two_sided_pvalue(t0, &copies, &mut rng).unwrap() <= alpha {
                rejects += 1;
            }
        }
        let rate = rejects as f64 / draws as f64;
        let slack = 3.0 * (alpha * (1.0 - alpha) / draws as f64).sqrt();
        assert!(rate <= alpha + slack, "two-sided rejection rate {rate}");
    }

    #[test]
    fn super_uniformity_all_modes() {
        let m = 19;
        let draws = 5_000;
        for (mode_idx, mode) in [
            PvalueMode::ConservativeOneSided,
            PvalueMode::RandomizedOneSided,
            PvalueMode::RandomizedTwoSided,
        ]
        .into_iter()
        .enumerate()
        {
            let mut rng = stream_rng(5, mode_idx as u64);
            for alpha in [0.01, 0.05, 0.1, 0.25] {
                let mut rng_inner = rng.clone();
                let mut rejects = 0;
                for _ in 0..draws {
                    let t0: f64 = rng_inner.random();
                    let copies: Vec<f64> = (0..m).map(|_| rng_inner.random()).collect();
                    if pvalue(mode, t0, &copies, &mut rng_inner).unwrap() <= alpha {
                        rejects += 1;
                    }
                }
                let rate = rejects as f64 / draws as f64;
                let slack = 3.0 * (alpha * (1.0 - alpha) / draws as f64).sqrt();
                assert!(
                    rate <= alpha + slack,
                    "mode {mode:?} alpha {alpha}: rate {rate}"
                );
                rng = rng_inner;
            }
        }
    }

    #[test]
    fn randomized_never_exceeds_conservative() {
        let mut rng = stream_rng(6, 0);
        for _ in 0..500 {
            let t0 = (rng.random::<f64>() * 4.0).round();
            let copies: Vec<f64> = (0..7).map(|_| (rng.random::<f64>() * 4.0).round()).collect();
            let cons = conservative_pvalue(t0, &copies).unwrap();
            let rand = randomized_pvalue(t0, &copies, &mut rng).unwrap();
            assert!(rand <= cons + 1e-15, "randomized {rand} > conservative {cons}");
        }
    }

    #[test]
    fn conservative_is_permutation_invariant() {
        let copies = [3.0, 1.0, 4.0, 1.0, 5.0];
        let mut shuffled = copies;
        shuffled.reverse();
        assert_eq!(
            conservative_pvalue(2.5, &copies).unwrap(),
            conservative_pvalue(2.5, &shuffled).unwrap()
        );
    }
}
