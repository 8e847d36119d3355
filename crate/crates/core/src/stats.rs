//! Descriptive statistics, regression metrics and the nonparametric tests
//! used to compare acquisition scenarios.
//!
//! Conventions: sample standard deviation (n - 1), quantiles by linear
//! interpolation between order statistics, average ranks for ties.

use serde::{Deserialize, Serialize};
use statrs::distribution::{ChiSquared, ContinuousCDF, Normal, StudentsT};
use thiserror::Error;

/// Largest effective sample size for which the Wilcoxon p-value is exact.
pub const WILCOXON_EXACT_MAX_N: usize = 25;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum StatsError {
    #[error("invalid input: {0}")]
    InvalidInput(String),
    #[error("statistic undefined: {0}")]
    Undefined(String),
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SummaryRow {
    pub n: usize,
    pub mean: f64,
    pub mae: f64,
    pub median: f64,
    pub std: f64,
    pub min: f64,
    pub q25: f64,
    pub q75: f64,
    pub max: f64,
    pub iqr: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum TestMethod {
    Wilcoxon,
    Friedman,
    Spearman,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TestResult {
    pub statistic: f64,
    pub p_value: f64,
    pub method: TestMethod,
    pub n: usize,
}

/// MSE, MAE and R². `r2` is `None` when the actual values have zero variance.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RegressionMetrics {
    pub mse: f64,
    pub mae: f64,
    pub r2: Option<f64>,
}

fn check_finite(values: &[f64], what: &str) -> Result<(), StatsError> {
    if values.iter().any(|v| !v.is_finite()) {
        return Err(StatsError::InvalidInput(format!("{what} contains non-finite values")));
    }
    Ok(())
}

/// Linear-interpolation quantile of already sorted data.
pub fn quantile_sorted(sorted: &[f64], q: f64) -> f64 {
    debug_assert!(!sorted.is_empty());
    let pos = q.clamp(0.0, 1.0) * (sorted.len() - 1) as f64;
    let lo = pos.floor() as usize;
    let hi = pos.ceil() as usize;
    let frac = pos - lo as f64;
    sorted[lo] + (sorted[hi] - sorted[lo]) * frac
}

pub fn mean(values: &[f64]) -> f64 {
    values.iter().sum::<f64>() / values.len() as f64
}

pub fn median(values: &[f64]) -> f64 {
    let mut v = values.to_vec();
    v.sort_by(f64::total_cmp);
    quantile_sorted(&v, 0.5)
}

pub fn summarize(values: &[f64]) -> Result<SummaryRow, StatsError> {
    if values.is_empty() {
        return Err(StatsError::InvalidInput("cannot summarize an empty list".into()));
    }
    check_finite(values, "values")?;
    let mut sorted = values.to_vec();
    sorted.sort_by(f64::total_cmp);
    let n = values.len();
    let mean = mean(&sorted);
    let mae = sorted.iter().map(|v| v.abs()).sum::<f64>() / n as f64;
    let std = if n > 1 {
        (sorted.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1) as f64).sqrt()
    } else {
        0.0
    };
    let q25 = quantile_sorted(&sorted, 0.25);
    let q75 = quantile_sorted(&sorted, 0.75);
    Ok(SummaryRow {
        n,
        mean,
        mae,
        median: quantile_sorted(&sorted, 0.5),
        std,
        min: sorted[0],
        q25,
        q75,
        max: sorted[n - 1],
        iqr: q75 - q25,
    })
}

pub fn regression_metrics(actual: &[f64], predicted: &[f64]) -> Result<RegressionMetrics, StatsError> {
    if actual.is_empty() || actual.len() != predicted.len() {
        return Err(StatsError::InvalidInput(format!(
            "need equal nonzero lengths, got {} and {}",
            actual.len(),
            predicted.len()
        )));
    }
    check_finite(actual, "actual")?;
    check_finite(predicted, "predicted")?;
    let n = actual.len() as f64;
    let mut ss_res = 0.0;
    let mut abs = 0.0;
    for (a, p) in actual.iter().zip(predicted) {
        ss_res += (a - p).powi(2);
        abs += (a - p).abs();
    }
    let m = mean(actual);
    let ss_tot: f64 = actual.iter().map(|a| (a - m).powi(2)).sum();
    Ok(RegressionMetrics {
        mse: ss_res / n,
        mae: abs / n,
        r2: (ss_tot > 0.0).then(|| 1.0 - ss_res / ss_tot),
    })
}

/// Average (mid) ranks starting at 1, plus the sizes of tie groups.
pub fn average_ranks(values: &[f64]) -> (Vec<f64>, Vec<usize>) {
    let mut order: Vec<usize> = (0..values.len()).collect();
    order.sort_by(|&a, &b| values[a].total_cmp(&values[b]));
    let mut ranks = vec![0.0; values.len()];
    let mut ties = Vec::new();
    let mut i = 0;
    while i < order.len() {
        let mut j = i + 1;
        while j < order.len() && values[order[j]] == values[order[i]] {
            j += 1;
        }
        let rank = (i + j + 1) as f64 / 2.0;
        for &k in &order[i..j] {
            ranks[k] = rank;
        }
        if j - i > 1 {
            ties.push(j - i);
        }
        i = j;
    }
    (ranks, ties)
}

fn tie_sum(ties: &[usize]) -> f64 {
    ties.iter().map(|&t| (t * t * t - t) as f64).sum()
}

/// Paired Wilcoxon signed-rank test on `a - b`.
///
/// Zero differences are dropped. The statistic is `min(W+, W-)`. The
/// two-sided p-value is exact (full sign-flip distribution, ties included)
/// up to [`WILCOXON_EXACT_MAX_N`] nonzero differences and otherwise uses the
/// normal approximation with tie and continuity corrections.
pub fn wilcoxon_signed_rank(a: &[f64], b: &[f64]) -> Result<TestResult, StatsError> {
    if a.is_empty() || a.len() != b.len() {
        return Err(StatsError::InvalidInput(format!(
            "paired samples need equal nonzero lengths, got {} and {}",
            a.len(),
            b.len()
        )));
    }
    check_finite(a, "a")?;
    check_finite(b, "b")?;
    let diffs: Vec<f64> = a.iter().zip(b).map(|(x, y)| x - y).filter(|d| *d != 0.0).collect();
    let n = diffs.len();
    if n == 0 {
        return Ok(TestResult { statistic: 0.0, p_value: 1.0, method: TestMethod::Wilcoxon, n: 0 });
    }
    let abs: Vec<f64> = diffs.iter().map(|d| d.abs()).collect();
    let (ranks, ties) = average_ranks(&abs);
    let w_plus: f64 = diffs.iter().zip(&ranks).filter(|(d, _)| **d > 0.0).map(|(_, r)| r).sum();
    let total = (n * (n + 1)) as f64 / 2.0;
    let w_minus = total - w_plus;
    let w = w_plus.min(w_minus);

    let p = if n <= WILCOXON_EXACT_MAX_N {
        exact_signed_rank_p(&ranks, w)
    } else {
        let mean = total / 2.0;
        let var = (n * (n + 1) * (2 * n + 1)) as f64 / 24.0 - tie_sum(&ties) / 48.0;
        if var <= 0.0 {
            1.0
        } else {
            let z = ((w - mean + 0.5) / var.sqrt()).min(0.0);
            let normal = Normal::new(0.0, 1.0).unwrap();
            (2.0 * normal.cdf(z)).min(1.0)
        }
    };
    Ok(TestResult { statistic: w, p_value: p, method: TestMethod::Wilcoxon, n })
}

/// `min(1, 2 P(W+ <= w))` under independent random signs on the given ranks.
/// Ranks are multiples of 1/2, so the distribution is tabulated over doubled
/// ranks.
fn exact_signed_rank_p(ranks: &[f64], w: f64) -> f64 {
    let doubled: Vec<usize> = ranks.iter().map(|r| (r * 2.0).round() as usize).collect();
    let max: usize = doubled.iter().sum();
    let mut counts = vec![0.0_f64; max + 1];
    counts[0] = 1.0;
    let mut reach = 0;
    for &r in &doubled {
        for s in (0..=reach).rev() {
            if counts[s] != 0.0 {
                counts[s + r] += counts[s];
            }
        }
        reach += r;
    }
    let limit = (w * 2.0).round() as usize;
    let below: f64 = counts[..=limit.min(max)].iter().sum();
    let total = 2f64.powi(ranks.len() as i32);
    (2.0 * below / total).min(1.0)
}

/// Friedman test over `n` subjects (rows) and `k` conditions (columns),
/// with within-row average ranks and the tie-corrected chi-square statistic
/// on `k - 1` degrees of freedom.
///
/// The p-value is exact over all within-row permutations while there are at
/// most [`FRIEDMAN_EXACT_MAX_PERMUTATIONS`] of them, and the chi-square upper
/// tail otherwise.
pub fn friedman(matrix: &[Vec<f64>]) -> Result<TestResult, StatsError> {
    let n = matrix.len();
    if n < 2 {
        return Err(StatsError::InvalidInput(format!("need at least 2 subjects, got {n}")));
    }
    let k = matrix[0].len();
    if k < 2 {
        return Err(StatsError::InvalidInput(format!("need at least 2 conditions, got {k}")));
    }
    let mut rank_sums = vec![0.0; k];
    let mut row_ranks = Vec::with_capacity(n);
    let mut ties_total = 0.0;
    for (i, row) in matrix.iter().enumerate() {
        if row.len() != k {
            return Err(StatsError::InvalidInput(format!(
                "row {i} has {} entries, expected {k}",
                row.len()
            )));
        }
        check_finite(row, "matrix row")?;
        let (ranks, ties) = average_ranks(row);
        for (s, r) in rank_sums.iter_mut().zip(&ranks) {
            *s += r;
        }
        ties_total += tie_sum(&ties);
        row_ranks.push(ranks);
    }
    let (nf, kf) = (n as f64, k as f64);
    let raw = 12.0 / (nf * kf * (kf + 1.0)) * rank_sums.iter().map(|r| r * r).sum::<f64>() - 3.0 * nf * (kf + 1.0);
    let denom = 1.0 - ties_total / (nf * (kf * kf * kf - kf));
    let chi2 = if denom <= 1e-12 { 0.0 } else { (raw / denom).max(0.0) };
    let p = if chi2 == 0.0 {
        1.0
    } else if let Some(p) = exact_friedman_p(&row_ranks, &rank_sums) {
        p
    } else {
        ChiSquared::new(kf - 1.0).unwrap().sf(chi2).clamp(0.0, 1.0)
    };
    Ok(TestResult { statistic: chi2, p_value: p, method: TestMethod::Friedman, n })
}

/// Largest `(k!)^n` for which the Friedman p-value is enumerated exactly.
pub const FRIEDMAN_EXACT_MAX_PERMUTATIONS: u64 = 100_000;

fn permutations(items: &[f64]) -> Vec<Vec<f64>> {
    if items.len() <= 1 {
        return vec![items.to_vec()];
    }
    let mut out = Vec::new();
    for i in 0..items.len() {
        let mut rest = items.to_vec();
        let head = rest.remove(i);
        for mut tail in permutations(&rest) {
            tail.insert(0, head);
            out.push(tail);
        }
    }
    out
}

/// Share of within-row permutations whose sum of squared rank sums reaches
/// the observed one. The statistic is monotone in that sum because the tie
/// correction is fixed by each row's multiset of ranks.
fn exact_friedman_p(rows: &[Vec<f64>], observed: &[f64]) -> Option<f64> {
    let k = observed.len();
    let per_row: u64 = (1..=k as u64).product();
    let total = per_row.checked_pow(rows.len() as u32)?;
    if total > FRIEDMAN_EXACT_MAX_PERMUTATIONS {
        return None;
    }
    let target = observed.iter().map(|r| r * r).sum::<f64>() - 1e-9;
    let perms: Vec<Vec<Vec<f64>>> = rows.iter().map(|r| permutations(r)).collect();
    fn walk(perms: &[Vec<Vec<f64>>], sums: &mut [f64], target: f64) -> u64 {
        let Some((first, rest)) = perms.split_first() else {
            return u64::from(sums.iter().map(|r| r * r).sum::<f64>() >= target);
        };
        let mut hits = 0;
        for p in first {
            sums.iter_mut().zip(p).for_each(|(s, r)| *s += r);
            hits += walk(rest, sums, target);
            sums.iter_mut().zip(p).for_each(|(s, r)| *s -= r);
        }
        hits
    }
    let hits = walk(&perms, &mut vec![0.0; k], target);
    Some(hits as f64 / total as f64)
}

fn pearson(x: &[f64], y: &[f64]) -> Option<f64> {
    let mx = mean(x);
    let my = mean(y);
    let mut sxy = 0.0;
    let mut sxx = 0.0;
    let mut syy = 0.0;
    for (a, b) in x.iter().zip(y) {
        sxy += (a - mx) * (b - my);
        sxx += (a - mx).powi(2);
        syy += (b - my).powi(2);
    }
    if sxx == 0.0 || syy == 0.0 {
        return None;
    }
    Some((sxy / (sxx * syy).sqrt()).clamp(-1.0, 1.0))
}

/// Spearman rank correlation with a two-sided t-approximation p-value.
pub fn spearman(x: &[f64], y: &[f64]) -> Result<TestResult, StatsError> {
    if x.len() != y.len() || x.len() < 3 {
        return Err(StatsError::InvalidInput(format!(
            "need equal lengths of at least 3, got {} and {}",
            x.len(),
            y.len()
        )));
    }
    check_finite(x, "x")?;
    check_finite(y, "y")?;
    let (rx, _) = average_ranks(x);
    let (ry, _) = average_ranks(y);
    let rho = pearson(&rx, &ry).ok_or_else(|| StatsError::Undefined("zero rank variance".into()))?;
    let n = x.len();
    let p = if rho.abs() >= 1.0 {
        0.0
    } else {
        let df = (n - 2) as f64;
        let t = rho * (df / (1.0 - rho * rho)).sqrt();
        if n == 3 && t.is_infinite() {
            0.0
        } else {
            let dist = StudentsT::new(0.0, 1.0, df).unwrap();
            (2.0 * dist.sf(t.abs())).clamp(0.0, 1.0)
        }
    };
    Ok(TestResult { statistic: rho, p_value: p, method: TestMethod::Spearman, n })
}

/// Bonferroni adjustment: `min(1, m * p)`.
pub fn bonferroni(p_values: &[f64], m: usize) -> Result<Vec<f64>, StatsError> {
    if m < p_values.len() {
        return Err(StatsError::InvalidInput(format!(
            "family size {m} smaller than {} p-values",
            p_values.len()
        )));
    }
    Ok(p_values.iter().map(|p| (p * m as f64).min(1.0)).collect())
}

/// One half-open distance bin `[lo, hi)`; `hi == None` is the overflow bin.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DistanceBin {
    pub lo: f64,
    pub hi: Option<f64>,
    /// `None` marks an empty bin.
    pub summary: Option<SummaryRow>,
    pub values: Vec<f64>,
}

/// Groups `errors` by the matching `distances` into `[edges[i], edges[i+1])`
/// bins plus an overflow bin at or beyond the last edge. Distances below the
/// first edge are ignored.
pub fn bin_by_distance(errors: &[f64], distances: &[f64], edges: &[f64]) -> Result<Vec<DistanceBin>, StatsError> {
    if errors.len() != distances.len() {
        return Err(StatsError::InvalidInput(format!(
            "{} errors but {} distances",
            errors.len(),
            distances.len()
        )));
    }
    if edges.is_empty() || edges.windows(2).any(|w| w[0] >= w[1]) {
        return Err(StatsError::InvalidInput("bin edges must be strictly increasing".into()));
    }
    let mut bins: Vec<DistanceBin> = edges
        .iter()
        .enumerate()
        .map(|(i, &lo)| DistanceBin { lo, hi: edges.get(i + 1).copied(), summary: None, values: Vec::new() })
        .collect();
    for (&e, &d) in errors.iter().zip(distances) {
        if d < edges[0] || !d.is_finite() {
            continue;
        }
        let idx = edges.partition_point(|&edge| edge <= d) - 1;
        bins[idx].values.push(e);
    }
    for bin in &mut bins {
        if !bin.values.is_empty() {
            bin.summary = Some(summarize(&bin.values)?);
        }
    }
    Ok(bins)
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    #[test]
    fn summarize_examples() {
        let s = summarize(&[1.0, 2.0, 3.0, 4.0, 5.0]).unwrap();
        assert_eq!((s.median, s.q25, s.q75, s.iqr), (3.0, 2.0, 4.0, 2.0));
        assert_abs_diff_eq!(s.std, 2.5_f64.sqrt(), epsilon = 1e-12);
        let c = summarize(&[7.5; 6]).unwrap();
        assert_eq!((c.std, c.iqr, c.mean, c.median), (0.0, 0.0, 7.5, 7.5));
        assert!(summarize(&[]).is_err());
        let signed = summarize(&[-2.0, 1.0, 4.0]).unwrap();
        assert_abs_diff_eq!(signed.mae, 7.0 / 3.0, epsilon = 1e-12);
        assert_abs_diff_eq!(signed.mean, 1.0, epsilon = 1e-12);
    }

    #[test]
    fn regression_examples() {
        let m = regression_metrics(&[1.0, 2.0, 3.0], &[1.0, 2.0, 3.0]).unwrap();
        assert_eq!((m.mse, m.mae, m.r2), (0.0, 0.0, Some(1.0)));
        let m = regression_metrics(&[1.0, 2.0, 3.0], &[2.0, 2.0, 2.0]).unwrap();
        assert_abs_diff_eq!(m.mse, 2.0 / 3.0, epsilon = 1e-15);
        assert_abs_diff_eq!(m.mae, 2.0 / 3.0, epsilon = 1e-15);
        assert_abs_diff_eq!(m.r2.unwrap(), 0.0, epsilon = 1e-15);
        let m = regression_metrics(&[4.0, 4.0], &[3.0, 5.0]).unwrap();
        assert_eq!(m.r2, None);
        assert!(regression_metrics(&[1.0], &[1.0, 2.0]).is_err());
    }

    #[test]
    fn ranks_average_ties() {
        let (r, ties) = average_ranks(&[10.0, 20.0, 10.0, 30.0]);
        assert_eq!(r, vec![1.5, 3.0, 1.5, 4.0]);
        assert_eq!(ties, vec![2]);
    }

    #[test]
    fn wilcoxon_examples() {
        let same = wilcoxon_signed_rank(&[1.0, 2.0], &[1.0, 2.0]).unwrap();
        assert_eq!((same.p_value, same.n), (1.0, 0));
        let r = wilcoxon_signed_rank(&[1.0, 2.0, 3.0], &[0.0, 0.0, 0.0]).unwrap();
        assert_eq!(r.statistic, 0.0);
        assert_abs_diff_eq!(r.p_value, 0.25, epsilon = 1e-15);
        assert!(wilcoxon_signed_rank(&[1.0], &[]).is_err());
    }

    #[test]
    fn wilcoxon_large_sample_uses_normal() {
        let a: Vec<f64> = (1..=40).map(|i| i as f64).collect();
        let b = vec![0.0; 40];
        let r = wilcoxon_signed_rank(&a, &b).unwrap();
        assert_eq!(r.statistic, 0.0);
        assert!(r.p_value < 1e-6);
    }

    #[test]
    fn friedman_examples() {
        let tied = vec![vec![1.0, 1.0, 1.0]; 4];
        let r = friedman(&tied).unwrap();
        assert_eq!((r.statistic, r.p_value), (0.0, 1.0));
        let ordered = vec![vec![1.0, 2.0, 3.0], vec![4.0, 5.0, 6.0], vec![0.1, 0.2, 0.3]];
        let r = friedman(&ordered).unwrap();
        assert_abs_diff_eq!(r.statistic, 6.0, epsilon = 1e-12);
        // only the 6 permutations sharing one ordering across all rows reach it
        assert_abs_diff_eq!(r.p_value, 6.0 / 216.0, epsilon = 1e-12);
        let big = vec![vec![1.0, 2.0, 3.0, 4.0]; 5];
        let r = friedman(&big).unwrap();
        assert_abs_diff_eq!(r.statistic, 15.0, epsilon = 1e-12);
        assert_abs_diff_eq!(r.p_value, ChiSquared::new(3.0).unwrap().sf(15.0), epsilon = 1e-12);
        assert!(friedman(&[vec![1.0, 2.0], vec![1.0]]).is_err());
    }

    #[test]
    fn spearman_examples() {
        let x = [1.0, 2.0, 3.0, 4.0];
        assert_eq!(spearman(&x, &[2.0, 4.0, 8.0, 16.0]).unwrap().statistic, 1.0);
        assert_eq!(spearman(&x, &[4.0, 3.0, 2.0, 1.0]).unwrap().statistic, -1.0);
        assert_abs_diff_eq!(spearman(&x, &[2.0, 1.0, 4.0, 3.0]).unwrap().statistic, 0.6, epsilon = 1e-12);
        assert!(matches!(spearman(&x, &[1.0; 4]), Err(StatsError::Undefined(_))));
    }

    #[test]
    fn bonferroni_examples() {
        assert_eq!(bonferroni(&[0.01], 4).unwrap(), vec![0.04]);
        assert_eq!(bonferroni(&[0.5], 4).unwrap(), vec![1.0]);
        let adj = bonferroni(&[0.001, 0.02, 0.2], 3).unwrap();
        for (a, e) in adj.iter().zip([0.003, 0.06, 0.6]) {
            assert_abs_diff_eq!(*a, e, epsilon = 1e-15);
        }
        assert!(bonferroni(&[0.1, 0.2], 1).is_err());
    }

    #[test]
    fn distance_bins() {
        let bins = bin_by_distance(&[1.0, 2.0, 3.0, 4.0], &[5.0, 15.0, 25.0, 35.0], &[0.0, 10.0, 20.0, 30.0]).unwrap();
        assert_eq!(bins.len(), 4);
        assert!(bins.iter().all(|b| b.values.len() == 1));
        assert_eq!(bins[3].hi, None);
        let edge = bin_by_distance(&[9.0], &[10.0], &[0.0, 10.0, 20.0, 30.0]).unwrap();
        assert_eq!(edge[1].values, vec![9.0]);
        assert!(edge[0].summary.is_none());
    }
}
