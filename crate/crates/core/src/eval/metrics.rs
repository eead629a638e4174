use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Rank agreement between a prediction and a ground-truth vector.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MetricSet {
    pub spearman: f64,
    pub kendall_tau: f64,
    /// Size of the overlap of the two top-`k` sets.
    pub hits_at_k: f64,
    pub k: usize,
    pub mae: f64,
}

/// Ranks starting at 1; tied values share the mean of their positions.
pub fn average_ranks(x: &[f64]) -> Vec<f64> {
    let mut order: Vec<usize> = (0..x.len()).collect();
    order.sort_by(|&a, &b| x[a].total_cmp(&x[b]));
    let mut ranks = vec![0.0; x.len()];
    let mut i = 0;
    while i < order.len() {
        let mut j = i;
        while j + 1 < order.len() && x[order[j + 1]] == x[order[i]] {
            j += 1;
        }
        let rank = (i + j) as f64 / 2.0 + 1.0;
        for &idx in &order[i..=j] {
            ranks[idx] = rank;
        }
        i = j + 1;
    }
    ranks
}

/// Pearson correlation; `NaN` when either side has zero variance.
pub fn pearson(x: &[f64], y: &[f64]) -> f64 {
    let n = x.len() as f64;
    let mx = x.iter().sum::<f64>() / n;
    let my = y.iter().sum::<f64>() / n;
    let (mut sxy, mut sxx, mut syy) = (0.0, 0.0, 0.0);
    for (a, b) in x.iter().zip(y) {
        let (da, db) = (a - mx, b - my);
        sxy += da * db;
        sxx += da * da;
        syy += db * db;
    }
    if sxx == 0.0 || syy == 0.0 {
        return f64::NAN;
    }
    sxy / (sxx * syy).sqrt()
}

pub fn spearman(x: &[f64], y: &[f64]) -> f64 {
    pearson(&average_ranks(x), &average_ranks(y))
}

fn tied_pairs(sorted: &[f64]) -> u64 {
    let mut total = 0;
    let mut run = 1u64;
    for w in sorted.windows(2) {
        if w[0] == w[1] {
            run += 1;
        } else {
            total += run * (run - 1) / 2;
            run = 1;
        }
    }
    total + run * (run - 1) / 2
}

/// Sorts `v` ascending and returns the number of inversions removed.
fn merge_count(v: &mut [f64], buf: &mut Vec<f64>) -> u64 {
    let n = v.len();
    if n < 2 {
        return 0;
    }
    let mid = n / 2;
    let mut swaps = merge_count(&mut v[..mid], buf) + merge_count(&mut v[mid..], buf);
    buf.clear();
    let (mut i, mut j) = (0, mid);
    while i < mid && j < n {
        if v[j] < v[i] {
            buf.push(v[j]);
            swaps += (mid - i) as u64;
            j += 1;
        } else {
            buf.push(v[i]);
            i += 1;
        }
    }
    buf.extend_from_slice(&v[i..mid]);
    buf.extend_from_slice(&v[j..n]);
    v.copy_from_slice(buf);
    swaps
}

/// Kendall tau-b in `O(n log n)` (Knight's algorithm).
pub fn kendall_tau_b(x: &[f64], y: &[f64]) -> f64 {
    let n = x.len() as u64;
    let mut order: Vec<usize> = (0..x.len()).collect();
    order.sort_by(|&a, &b| x[a].total_cmp(&x[b]).then(y[a].total_cmp(&y[b])));
    let xs: Vec<f64> = order.iter().map(|&i| x[i]).collect();
    let mut ys: Vec<f64> = order.iter().map(|&i| y[i]).collect();

    let pairs = n * (n - 1) / 2;
    let x_ties = tied_pairs(&xs);
    // pairs tied on both coordinates
    let mut joint = 0;
    let mut run = 1u64;
    for i in 1..order.len() {
        if xs[i] == xs[i - 1] && ys[i] == ys[i - 1] {
            run += 1;
        } else {
            joint += run * (run - 1) / 2;
            run = 1;
        }
    }
    joint += run * (run - 1) / 2;

    let mut buf = Vec::with_capacity(ys.len());
    let swaps = merge_count(&mut ys, &mut buf);
    let y_ties = tied_pairs(&ys);
    let concordant_minus_discordant =
        pairs as f64 - x_ties as f64 - y_ties as f64 + joint as f64 - 2.0 * swaps as f64;
    let denom = ((pairs - x_ties) as f64 * (pairs - y_ties) as f64).sqrt();
    if denom == 0.0 {
        return f64::NAN;
    }
    concordant_minus_discordant / denom
}

/// Indices of the `k` largest values; ties go to the smaller index.
pub fn top_k(x: &[f64], k: usize) -> Vec<usize> {
    let mut order: Vec<usize> = (0..x.len()).collect();
    order.sort_by(|&a, &b| x[b].total_cmp(&x[a]).then(a.cmp(&b)));
    order.truncate(k);
    order
}

pub fn hits_at_k(pred: &[f64], truth: &[f64], k: usize) -> usize {
    let truth_top = top_k(truth, k);
    top_k(pred, k)
        .into_iter()
        .filter(|i| truth_top.contains(i))
        .count()
}

pub fn mean_absolute_error(pred: &[f64], truth: &[f64]) -> f64 {
    pred.iter()
        .zip(truth)
        .map(|(p, t)| (p - t).abs())
        .sum::<f64>()
        / pred.len() as f64
}

/// Spearman, Kendall tau-b, hits@k and MAE of `pred` against `truth`.
///
/// A constant vector leaves both correlations undefined: they are reported
/// as `NaN` with a warning.
pub fn rank_metrics(pred: &[f64], truth: &[f64], k: usize) -> Result<MetricSet> {
    if pred.len() != truth.len() {
        return Err(Error::ShapeMismatch {
            op: "rank_metrics",
            expected: format!("{} predictions", truth.len()),
            found: pred.len().to_string(),
        });
    }
    if pred.len() < 2 {
        return Err(Error::InvalidArgument(
            "rank metrics need at least two nodes".into(),
        ));
    }
    if let Some(bad) = pred.iter().chain(truth).find(|v| !v.is_finite()) {
        return Err(Error::NonFinite(format!("rank_metrics input {bad}")));
    }
    let spearman = spearman(pred, truth);
    if spearman.is_nan() {
        log::warn!("constant prediction or ground truth: rank correlations are undefined");
    }
    Ok(MetricSet {
        spearman,
        kendall_tau: kendall_tau_b(pred, truth),
        hits_at_k: hits_at_k(pred, truth, k) as f64,
        k,
        mae: mean_absolute_error(pred, truth),
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn identity_and_reversal() {
        let m = rank_metrics(&[3.0, 1.0, 2.0], &[3.0, 1.0, 2.0], 2).unwrap();
        assert_eq!(m.spearman, 1.0);
        assert_eq!(m.kendall_tau, 1.0);
        assert_eq!(m.hits_at_k, 2.0);
        assert_eq!(m.mae, 0.0);
        let m = rank_metrics(&[1.0, 2.0, 3.0, 4.0], &[40.0, 30.0, 20.0, 10.0], 2).unwrap();
        assert_eq!(m.spearman, -1.0);
        assert_eq!(m.kendall_tau, -1.0);
        assert_eq!(m.hits_at_k, 0.0);
    }

    #[test]
    fn one_adjacent_swap() {
        let s = spearman(&[1.0, 2.0, 3.0, 5.0, 4.0], &[1.0, 2.0, 3.0, 4.0, 5.0]);
        assert!((s - 0.9).abs() < 1e-12);
    }

    #[test]
    fn tied_ranks() {
        assert_eq!(
            average_ranks(&[2.0, 1.0, 2.0, 5.0]),
            vec![2.5, 1.0, 2.5, 4.0]
        );
        // x = [1,1,2], y = [1,2,3]: one tied pair in x, two concordant pairs
        let t = kendall_tau_b(&[1.0, 1.0, 2.0], &[1.0, 2.0, 3.0]);
        assert!((t - 2.0 / (2.0f64 * 3.0).sqrt()).abs() < 1e-15);
    }

    #[test]
    fn constant_truth_is_nan() {
        let m = rank_metrics(&[1.0, 2.0, 3.0], &[1.0, 1.0, 1.0], 2).unwrap();
        assert!(m.spearman.is_nan());
        assert!(m.kendall_tau.is_nan());
        assert_eq!(m.mae, 1.0);
    }

    #[test]
    fn errors() {
        assert!(rank_metrics(&[1.0, 2.0], &[1.0], 1).is_err());
        assert!(rank_metrics(&[1.0], &[1.0], 1).is_err());
        assert!(rank_metrics(&[1.0, f64::NAN], &[1.0, 2.0], 1).is_err());
    }

    #[test]
    fn top_k_breaks_ties_by_index() {
        assert_eq!(top_k(&[1.0, 3.0, 3.0, 2.0], 2), vec![1, 2]);
        assert_eq!(top_k(&[5.0, 5.0, 5.0], 2), vec![0, 1]);
        assert_eq!(top_k(&[1.0, 2.0], 5), vec![1, 0]);
        assert_eq!(
            hits_at_k(&[1.0, 3.0, 3.0, 2.0], &[0.0, 9.0, 1.0, 8.0], 2),
            1
        );
    }
}
