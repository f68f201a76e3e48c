//! Correlation and error statistics.

use crate::error::{Error, Result};
use crate::prediction::compensated_sum;

fn check_pair(pred: &[f64], gt: &[f64], min_len: usize) -> Result<()> {
    if pred.len() != gt.len() {
        return Err(Error::LengthMismatch {
            left: pred.len(),
            right: gt.len(),
        });
    }
    if pred.len() < min_len {
        return Err(Error::DegenerateInput("too few samples"));
    }
    Ok(())
}

fn is_constant(v: &[f64]) -> bool {
    v.windows(2).all(|w| w[0] == w[1])
}

fn mean(v: &[f64]) -> f64 {
    compensated_sum(v.iter().copied()) / v.len() as f64
}

/// 1-based ranks; tied values share the average of the ranks they span.
pub fn average_ranks(values: &[f64]) -> Vec<f64> {
    let mut order: Vec<usize> = (0..values.len()).collect();
    order.sort_by(|&a, &b| values[a].total_cmp(&values[b]));
    let mut ranks = vec![0.0; values.len()];
    let mut start = 0;
    while start < order.len() {
        let mut end = start + 1;
        while end < order.len() && values[order[end]] == values[order[start]] {
            end += 1;
        }
        // ranks start+1 ..= end
        let rank = (start + 1 + end) as f64 / 2.0;
        for &i in &order[start..end] {
            ranks[i] = rank;
        }
        start = end;
    }
    ranks
}

fn pearson_unchecked(x: &[f64], y: &[f64]) -> f64 {
    let (mx, my) = (mean(x), mean(y));
    let sxy = compensated_sum(x.iter().zip(y).map(|(a, b)| (a - mx) * (b - my)));
    let sxx = compensated_sum(x.iter().map(|a| (a - mx) * (a - mx)));
    let syy = compensated_sum(y.iter().map(|b| (b - my) * (b - my)));
    (sxy / (sxx * syy).sqrt()).clamp(-1.0, 1.0)
}

/// Pearson linear correlation coefficient.
pub fn plcc(pred: &[f64], gt: &[f64]) -> Result<f64> {
    check_pair(pred, gt, 2)?;
    if is_constant(pred) || is_constant(gt) {
        return Err(Error::DegenerateInput("constant input"));
    }
    Ok(pearson_unchecked(pred, gt))
}

/// Spearman rank correlation, computed as the Pearson correlation of average
/// ranks. Without ties this equals `1 - 6 Σd² / (K (K² - 1))`.
pub fn srocc(pred: &[f64], gt: &[f64]) -> Result<f64> {
    check_pair(pred, gt, 2)?;
    if is_constant(pred) || is_constant(gt) {
        return Err(Error::DegenerateInput("constant input"));
    }
    Ok(pearson_unchecked(&average_ranks(pred), &average_ranks(gt)))
}

pub fn rmse(pred: &[f64], gt: &[f64]) -> Result<f64> {
    check_pair(pred, gt, 1)?;
    let sse = compensated_sum(pred.iter().zip(gt).map(|(p, g)| (p - g) * (p - g)));
    Ok((sse / pred.len() as f64).sqrt())
}

/// Median; the mean of the two central values for even counts.
pub fn median(values: &[f64]) -> Option<f64> {
    if values.is_empty() {
        return None;
    }
    let mut v = values.to_vec();
    v.sort_by(f64::total_cmp);
    let n = v.len();
    Some(if n % 2 == 1 {
        v[n / 2]
    } else {
        (v[n / 2 - 1] + v[n / 2]) / 2.0
    })
}
