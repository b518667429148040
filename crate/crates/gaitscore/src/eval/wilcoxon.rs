//! Two-sided Wilcoxon signed-rank test for paired samples.
//!
//! Zero differences are dropped, absolute differences are ranked with
//! average ranks on ties, and the reported statistic is the negative-rank
//! sum. For up to 25 effective pairs the p-value comes from the exact null
//! distribution of the rank sum over all sign patterns (computed by
//! subset-sum counting, which enumerates the same distribution without
//! walking all 2^n patterns); beyond that a normal approximation with tie
//! correction and continuity correction takes over.

use crate::error::{GaitError, Result};
use statrs::distribution::{ContinuousCDF, Normal};

/// Largest effective sample size handled by the exact branch.
pub const EXACT_LIMIT: usize = 25;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct WilcoxonResult {
    /// Negative-rank sum.
    pub statistic: f64,
    /// Two-sided p-value.
    pub p_value: f64,
    /// Pairs remaining after dropping zero differences.
    pub n_effective: usize,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum WilcoxonMode {
    /// Exact for `n <= EXACT_LIMIT`, normal approximation above.
    Auto,
    Exact,
    Approx,
}

/// Convenience wrapper for [`wilcoxon_signed_rank_mode`] with automatic
/// branch selection.
pub fn wilcoxon_signed_rank(a: &[f64], b: &[f64]) -> Result<WilcoxonResult> {
    wilcoxon_signed_rank_mode(a, b, WilcoxonMode::Auto)
}

pub fn wilcoxon_signed_rank_mode(
    a: &[f64],
    b: &[f64],
    mode: WilcoxonMode,
) -> Result<WilcoxonResult> {
    if a.len() != b.len() {
        return Err(GaitError::shape("paired samples", a.len(), b.len()));
    }
    let diffs: Vec<f64> = a
        .iter()
        .zip(b)
        .map(|(x, y)| x - y)
        .filter(|d| *d != 0.0)
        .collect();
    if diffs.iter().any(|d| !d.is_finite()) {
        return Err(GaitError::InvalidInput("non-finite difference".into()));
    }
    let n = diffs.len();
    if n == 0 {
        // no signal at all
        return Ok(WilcoxonResult {
            statistic: 0.0,
            p_value: 1.0,
            n_effective: 0,
        });
    }
    if n < 5 {
        return Err(GaitError::InvalidInput(format!(
            "need at least 5 nonzero differences, got {}",
            n
        )));
    }

    // rank |d| ascending with average ranks for ties
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&i, &j| diffs[i].abs().total_cmp(&diffs[j].abs()));
    let mut ranks = vec![0.0; n];
    let mut tie_sizes = Vec::new();
    let mut i = 0;
    while i < n {
        let mut j = i;
        while j + 1 < n && diffs[order[j + 1]].abs() == diffs[order[i]].abs() {
            j += 1;
        }
        let avg = (i + j + 2) as f64 / 2.0; // ranks are 1-based
        for &idx in &order[i..=j] {
            ranks[idx] = avg;
        }
        tie_sizes.push(j - i + 1);
        i = j + 1;
    }

    let w_minus: f64 = diffs
        .iter()
        .zip(&ranks)
        .filter(|(d, _)| **d < 0.0)
        .map(|(_, r)| r)
        .sum();
    let total = n as f64 * (n + 1) as f64 / 2.0;
    let w_plus = total - w_minus;
    let w_min = w_minus.min(w_plus);

    let use_exact = match mode {
        WilcoxonMode::Auto => n <= EXACT_LIMIT,
        WilcoxonMode::Exact => true,
        WilcoxonMode::Approx => false,
    };

    let p_value = if use_exact {
        exact_p(&ranks, w_min)
    } else {
        approx_p(n, &tie_sizes, w_min)
    };

    Ok(WilcoxonResult {
        statistic: w_minus,
        p_value,
        n_effective: n,
    })
}

/// Exact two-sided p: twice the null probability that a signed-rank sum is
/// at most `w_min`. Average ranks are half-integers, so doubling makes all
/// sums integral and a subset-sum count over the doubled ranks gives the
/// full distribution.
fn exact_p(ranks: &[f64], w_min: f64) -> f64 {
    let n = ranks.len();
    let ranks2: Vec<usize> = ranks.iter().map(|r| (r * 2.0).round() as usize).collect();
    let total2: usize = ranks2.iter().sum();
    let threshold2 = (w_min * 2.0).round() as usize;

    // counts[s] = number of sign patterns whose negative-rank doubled sum is s
    let mut counts = vec![0u64; total2 + 1];
    counts[0] = 1;
    for &r in &ranks2 {
        for s in (r..=total2).rev() {
            counts[s] += counts[s - r];
        }
    }
    let below: u64 = counts[..=threshold2.min(total2)].iter().sum();
    let all = 2u64.pow(n as u32);
    ((2.0 * below as f64) / all as f64).min(1.0)
}

/// Normal approximation with tie correction and continuity correction.
fn approx_p(n: usize, tie_sizes: &[usize], w_min: f64) -> f64 {
    let nf = n as f64;
    let mean = nf * (nf + 1.0) / 4.0;
    let tie_term: f64 = tie_sizes
        .iter()
        .map(|&t| {
            let t = t as f64;
            (t * t * t - t) / 48.0
        })
        .sum();
    let var = nf * (nf + 1.0) * (2.0 * nf + 1.0) / 24.0 - tie_term;
    if var <= 0.0 {
        return 1.0;
    }
    let z = (w_min - mean + 0.5) / var.sqrt();
    let normal = Normal::new(0.0, 1.0).expect("unit normal");
    (2.0 * normal.cdf(z)).clamp(f64::MIN_POSITIVE, 1.0)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng;

    /// Brute-force oracle: walk all 2^n sign patterns of the ranked
    /// magnitudes and count patterns at least as extreme.
    fn enumerate_p(ranks: &[f64], w_min: f64) -> f64 {
        let n = ranks.len();
        let mut below = 0u64;
        for pattern in 0u64..(1 << n) {
            let w_neg: f64 = (0..n)
                .filter(|&i| pattern & (1 << i) != 0)
                .map(|i| ranks[i])
                .sum();
            if w_neg <= w_min + 1e-9 {
                below += 1;
            }
        }
        ((2.0 * below as f64) / (1u64 << n) as f64).min(1.0)
    }

    fn ranks_of(diffs: &[f64]) -> Vec<f64> {
        let n = diffs.len();
        let mut order: Vec<usize> = (0..n).collect();
        order.sort_by(|&i, &j| diffs[i].abs().total_cmp(&diffs[j].abs()));
        let mut ranks = vec![0.0; n];
        let mut i = 0;
        while i < n {
            let mut j = i;
            while j + 1 < n && diffs[order[j + 1]].abs() == diffs[order[i]].abs() {
                j += 1;
            }
            let avg = (i + j + 2) as f64 / 2.0;
            for &idx in &order[i..=j] {
                ranks[idx] = avg;
            }
            i = j + 1;
        }
        ranks
    }

    #[test]
    fn identical_samples_give_p_one() {
        let a = [1.0, 2.0, 3.0, 4.0, 5.0, 6.0];
        let r = wilcoxon_signed_rank(&a, &a).unwrap();
        assert_eq!(r.p_value, 1.0);
        assert_eq!(r.n_effective, 0);
    }

    #[test]
    fn all_positive_distinct_differences() {
        // n = 6, every difference positive: W- = 0, exact two-sided
        // p = 2 / 2^6 = 0.03125
        let a = [2.0, 4.0, 6.0, 8.0, 10.0, 12.0];
        let b = [1.0, 2.0, 3.0, 4.0, 5.0, 6.0];
        let r = wilcoxon_signed_rank(&a, &b).unwrap();
        assert_eq!(r.statistic, 0.0);
        assert!((r.p_value - 0.03125).abs() < 1e-12, "p {}", r.p_value);
    }

    #[test]
    fn too_few_nonzero_differences() {
        let a = [1.0, 2.0, 3.0, 4.0, 5.0];
        let b = [1.0, 2.0, 3.0, 4.0, 4.0];
        assert!(wilcoxon_signed_rank(&a, &b).is_err());
    }

    #[test]
    fn unequal_lengths_rejected() {
        assert!(wilcoxon_signed_rank(&[1.0, 2.0], &[1.0]).is_err());
    }

    #[test]
    fn exact_matches_sign_pattern_enumeration() {
        let mut rng = rng::stream(60, "wilcoxon_enum", 0);
        for trial in 0..1000 {
            let n = 5 + rng::uniform_usize(&mut rng, 6); // 5..=10
            let mut a = Vec::with_capacity(n);
            let mut b = Vec::with_capacity(n);
            for _ in 0..n {
                let base = rng::uniform(&mut rng, -3.0, 3.0);
                a.push(base + rng::uniform(&mut rng, -2.0, 2.0));
                // occasional ties in |d| via duplicated magnitudes
                b.push(base);
            }
            let r = wilcoxon_signed_rank_mode(&a, &b, WilcoxonMode::Exact).unwrap();
            let diffs: Vec<f64> = a
                .iter()
                .zip(&b)
                .map(|(x, y)| x - y)
                .filter(|d| *d != 0.0)
                .collect();
            let ranks = ranks_of(&diffs);
            let total: f64 = ranks.iter().sum();
            let w_min = r.statistic.min(total - r.statistic);
            let want = enumerate_p(&ranks, w_min);
            assert!(
                (r.p_value - want).abs() < 1e-9,
                "trial {}: p {} vs enumeration {}",
                trial,
                r.p_value,
                want
            );
        }
    }

    #[test]
    fn exact_handles_tied_magnitudes() {
        let a = [3.0, 3.0, 5.0, 1.0, 2.0, 9.0, 4.0];
        let b = [1.0, 1.0, 2.0, 3.0, 5.0, 2.0, 1.0];
        let r = wilcoxon_signed_rank_mode(&a, &b, WilcoxonMode::Exact).unwrap();
        let diffs: Vec<f64> = a.iter().zip(&b).map(|(x, y)| x - y).collect();
        let ranks = ranks_of(&diffs);
        let total: f64 = ranks.iter().sum();
        let w_min = r.statistic.min(total - r.statistic);
        assert!((r.p_value - enumerate_p(&ranks, w_min)).abs() < 1e-9);
    }

    #[test]
    fn exact_and_approx_agree_at_the_boundary() {
        let mut rng = rng::stream(61, "wilcoxon_boundary", 0);
        for _ in 0..50 {
            let n = 26;
            let mut a = Vec::with_capacity(n);
            let mut b = Vec::with_capacity(n);
            for _ in 0..n {
                a.push(rng::uniform(&mut rng, -1.0, 1.5));
                b.push(rng::uniform(&mut rng, -1.0, 1.0));
            }
            let exact = wilcoxon_signed_rank_mode(&a, &b, WilcoxonMode::Exact).unwrap();
            let approx = wilcoxon_signed_rank_mode(&a, &b, WilcoxonMode::Approx).unwrap();
            assert!(
                (exact.p_value - approx.p_value).abs() < 0.02,
                "exact {} vs approx {}",
                exact.p_value,
                approx.p_value
            );
        }
    }

    #[test]
    fn symmetric_differences_are_insignificant() {
        let a = [1.0, 2.0, 3.0, 4.0, 5.0, 6.0, 7.0, 8.0];
        let b = [2.0, 1.0, 4.0, 3.0, 6.0, 5.0, 8.0, 7.0];
        let r = wilcoxon_signed_rank(&a, &b).unwrap();
        assert!(r.p_value > 0.9);
    }
}
