use serde::Serialize;
use statrs::distribution::{ContinuousCDF, Normal};

use super::StatsError;

/// Largest per-sample size for which [`RankSumMethod::Auto`] uses the exact
/// permutation distribution.
const EXACT_MAX_N: usize = 8;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum RankSumMethod {
    /// Exact permutation distribution (conditional on ties) for small
    /// samples, otherwise the normal approximation.
    #[default]
    Auto,
    /// Normal approximation with continuity and tie correction, always.
    Normal,
}

/// One-sided Mann-Whitney / Wilcoxon rank-sum result. The alternative is
/// that the first sample is stochastically greater than the second.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RankSumResult {
    /// Number of (first, second) pairs with first > second, ties counted 1/2.
    pub u_statistic: f64,
    pub z: f64,
    pub p_one_sided: f64,
    pub n1: usize,
    pub n2: usize,
    pub exact: bool,
    pub ties: bool,
    /// Every pooled value is identical; p is 0.5.
    pub all_ties: bool,
}

pub fn rank_sum_one_sided(greater: &[f64], lesser: &[f64]) -> Result<RankSumResult, StatsError> {
    rank_sum_with(greater, lesser, RankSumMethod::Auto)
}

pub fn rank_sum_with(greater: &[f64], lesser: &[f64], method: RankSumMethod) -> Result<RankSumResult, StatsError> {
    let (n1, n2) = (greater.len(), lesser.len());
    if n1 == 0 {
        return Err(StatsError::EmptySample("greater"));
    }
    if n2 == 0 {
        return Err(StatsError::EmptySample("lesser"));
    }
    let n = n1 + n2;
    let mut pooled: Vec<(f64, bool)> =
        greater.iter().map(|&v| (v, true)).chain(lesser.iter().map(|&v| (v, false))).collect();
    pooled.sort_by(|a, b| a.0.total_cmp(&b.0));

    // midranks; tie_term accumulates sum(t^3 - t) over tie groups
    let mut doubled_ranks: Vec<usize> = Vec::with_capacity(n);
    let mut doubled_first = 0usize;
    let mut rank_sum_first = 0.0;
    let mut tie_term = 0.0;
    let mut i = 0;
    while i < n {
        let mut j = i + 1;
        while j < n && pooled[j].0 == pooled[i].0 {
            j += 1;
        }
        let t = (j - i) as f64;
        let midrank = (i + 1 + j) as f64 / 2.0;
        let firsts = pooled[i..j].iter().filter(|e| e.1).count();
        rank_sum_first += firsts as f64 * midrank;
        doubled_ranks.extend(std::iter::repeat_n(i + 1 + j, j - i));
        doubled_first += firsts * (i + 1 + j);
        if j - i > 1 {
            tie_term += t * t * t - t;
        }
        i = j;
    }
    let (n1f, n2f, nf) = (n1 as f64, n2 as f64, n as f64);
    let u = rank_sum_first - n1f * (n1f + 1.0) / 2.0;
    let mean = n1f * n2f / 2.0;
    let var = n1f * n2f / 12.0 * ((nf + 1.0) - tie_term / (nf * (nf - 1.0)));
    let ties = tie_term > 0.0;
    if !(var > 0.0) {
        return Ok(RankSumResult {
            u_statistic: u,
            z: 0.0,
            p_one_sided: 0.5,
            n1,
            n2,
            exact: false,
            ties,
            all_ties: true,
        });
    }
    let z = (u - mean - 0.5) / var.sqrt();
    let use_exact = method == RankSumMethod::Auto && n1 <= EXACT_MAX_N && n2 <= EXACT_MAX_N;
    let p = if use_exact && !ties {
        exact_upper_tail(n1, n2, u.round() as usize)
    } else if use_exact {
        exact_upper_tail_scores(&doubled_ranks, n1, doubled_first)
    } else {
        Normal::standard().sf(z)
    };
    Ok(RankSumResult {
        u_statistic: u,
        z,
        p_one_sided: p.clamp(0.0, 1.0),
        n1,
        n2,
        exact: use_exact,
        ties,
        all_ties: false,
    })
}

/// P(U >= u) under the null for tie-free samples of sizes `n1`, `n2`.
///
/// Counts arrangements by placing the largest pooled element: if it belongs
/// to the first sample it beats all `n2` others.
pub fn exact_upper_tail(n1: usize, n2: usize, u: usize) -> f64 {
    let max_u = n1 * n2;
    if u > max_u {
        return 0.0;
    }
    // counts[i][j] is the U distribution for sizes (i, j)
    let mut counts: Vec<Vec<Vec<f64>>> = vec![vec![Vec::new(); n2 + 1]; n1 + 1];
    for i in 0..=n1 {
        for j in 0..=n2 {
            let mut dist = vec![0.0; i * j + 1];
            if i == 0 || j == 0 {
                dist[0] = 1.0;
            } else {
                for (k, &c) in counts[i - 1][j].iter().enumerate() {
                    dist[k + j] += c;
                }
                for (k, &c) in counts[i][j - 1].iter().enumerate() {
                    dist[k] += c;
                }
            }
            counts[i][j] = dist;
        }
    }
    let dist = &counts[n1][n2];
    let total: f64 = dist.iter().sum();
    dist[u..].iter().sum::<f64>() / total
}

/// Fraction of size-`k` subsets of `scores` whose sum is at least `observed`.
/// With doubled midranks as scores this is the exact tie-conditional upper
/// tail of the rank sum.
pub fn exact_upper_tail_scores(scores: &[usize], k: usize, observed: usize) -> f64 {
    let max_sum: usize = scores.iter().sum();
    // ways[j][s]: subsets of size j with score sum s
    let mut ways = vec![vec![0.0f64; max_sum + 1]; k + 1];
    ways[0][0] = 1.0;
    for &sc in scores {
        for j in (1..=k).rev() {
            for s in (sc..=max_sum).rev() {
                ways[j][s] += ways[j - 1][s - sc];
            }
        }
    }
    let total: f64 = ways[k].iter().sum();
    ways[k].iter().skip(observed).sum::<f64>() / total
}
