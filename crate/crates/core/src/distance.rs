//! Feature distances.
//!
//! Vectors are stored as `f32` but every accumulation runs in `f64`.

use std::fmt;

use crate::error::{Error, Result};

/// Norms below this are treated as zero by [`cosine_distance`].
pub const ZERO_NORM: f64 = 1e-12;

/// A distance between two feature vectors of equal length.
pub trait Metric: Send + Sync + fmt::Debug {
    /// Name used to select the metric on the command line.
    fn name(&self) -> &'static str;

    fn distance(&self, u: &[f32], v: &[f32]) -> Result<f64>;
}

fn same_len(u: &[f32], v: &[f32]) -> Result<()> {
    if u.len() != v.len() {
        return Err(Error::LengthMismatch {
            left: u.len(),
            right: v.len(),
        });
    }
    Ok(())
}

/// `1 - u·v / (|u| |v|)`, in `[0, 2]`.
///
/// A vector with norm below [`ZERO_NORM`] has no direction; such pairs get the
/// maximal distance 2 so they never win a nearest-neighbour search.
pub fn cosine_distance(u: &[f32], v: &[f32]) -> Result<f64> {
    same_len(u, v)?;
    let (mut dot, mut nu, mut nv) = (0.0f64, 0.0f64, 0.0f64);
    for (&a, &b) in u.iter().zip(v) {
        let (a, b) = (a as f64, b as f64);
        dot += a * b;
        nu += a * a;
        nv += b * b;
    }
    let (nu, nv) = (nu.sqrt(), nv.sqrt());
    if nu < ZERO_NORM || nv < ZERO_NORM {
        return Ok(2.0);
    }
    Ok((1.0 - dot / (nu * nv)).clamp(0.0, 2.0))
}

pub fn euclidean_distance(u: &[f32], v: &[f32]) -> Result<f64> {
    same_len(u, v)?;
    Ok(u.iter()
        .zip(v)
        .map(|(&a, &b)| {
            let d = a as f64 - b as f64;
            d * d
        })
        .sum::<f64>()
        .sqrt())
}

pub fn manhattan_distance(u: &[f32], v: &[f32]) -> Result<f64> {
    same_len(u, v)?;
    Ok(u.iter().zip(v).map(|(&a, &b)| (a as f64 - b as f64).abs()).sum())
}

fn softmax(logits: &[f32]) -> Vec<f64> {
    let max = logits.iter().fold(f64::NEG_INFINITY, |m, &x| m.max(x as f64));
    let exps: Vec<f64> = logits.iter().map(|&x| (x as f64 - max).exp()).collect();
    let total: f64 = exps.iter().sum();
    exps.into_iter().map(|e| e / total).collect()
}

/// Jensen-Shannon divergence, in bits, between the softmax distributions of
/// two logit vectors. The result lies in `[0, 1]`.
pub fn js_divergence(u_logits: &[f32], v_logits: &[f32]) -> Result<f64> {
    same_len(u_logits, v_logits)?;
    if u_logits.is_empty() {
        return Err(Error::LengthMismatch { left: 0, right: 0 });
    }
    let p = softmax(u_logits);
    let q = softmax(v_logits);
    let (mut kl_p, mut kl_q) = (0.0f64, 0.0f64);
    for (&pi, &qi) in p.iter().zip(&q) {
        let m = 0.5 * (pi + qi);
        if pi > 0.0 {
            kl_p += pi * (pi / m).log2();
        }
        if qi > 0.0 {
            kl_q += qi * (qi / m).log2();
        }
    }
    Ok((0.5 * kl_p + 0.5 * kl_q).clamp(0.0, 1.0))
}

#[derive(Debug, Default, Clone, Copy)]
pub struct Cosine;

#[derive(Debug, Default, Clone, Copy)]
pub struct Euclidean;

#[derive(Debug, Default, Clone, Copy)]
pub struct Manhattan;

/// Applies softmax to whatever is stored, so stores meant for this metric
/// should carry pre-classifier logits.
#[derive(Debug, Default, Clone, Copy)]
pub struct JsDivergence;

impl Metric for Cosine {
    fn name(&self) -> &'static str {
        "cosine"
    }
    fn distance(&self, u: &[f32], v: &[f32]) -> Result<f64> {
        cosine_distance(u, v)
    }
}

impl Metric for Euclidean {
    fn name(&self) -> &'static str {
        "euclidean"
    }
    fn distance(&self, u: &[f32], v: &[f32]) -> Result<f64> {
        euclidean_distance(u, v)
    }
}

impl Metric for Manhattan {
    fn name(&self) -> &'static str {
        "manhattan"
    }
    fn distance(&self, u: &[f32], v: &[f32]) -> Result<f64> {
        manhattan_distance(u, v)
    }
}

impl Metric for JsDivergence {
    fn name(&self) -> &'static str {
        "js"
    }
    fn distance(&self, u: &[f32], v: &[f32]) -> Result<f64> {
        js_divergence(u, v)
    }
}
