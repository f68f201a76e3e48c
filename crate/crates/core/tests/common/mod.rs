//! Shared fixtures and independent oracles for the integration tests.
//!
//! The oracles here deliberately avoid the library's code paths: plain f64
//! loops, full sorts, textbook formulas.

#![allow(dead_code)]

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use rfiqa::store::{build_store, FeatureRecord, FeatureStore, StoreManifest, StoreMode};

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

pub fn random_vec(rng: &mut impl Rng, dim: usize) -> Vec<f32> {
    (0..dim).map(|_| rng.random_range(-1.0f32..1.0)).collect()
}

/// A synthetic store with `n_groups` groups of 1..=`max_per_group` distorted
/// records each, random dimensions and scores.
pub fn random_synthetic_store(rng: &mut impl Rng, n_groups: usize, max_per_group: usize) -> FeatureStore {
    let ds = rng.random_range(2..=12);
    let dd = rng.random_range(2..=12);
    let mut records = Vec::new();
    for g in 0..n_groups {
        let gid = format!("g{g:03}");
        records.push(FeatureRecord::pristine(gid.clone(), random_vec(rng, ds)));
        for r in 0..rng.random_range(1..=max_per_group) {
            let mos = rng.random_range(0.0..100.0);
            records.push(FeatureRecord::distorted(
                format!("{gid}_d{r:02}"),
                gid.clone(),
                random_vec(rng, ds),
                random_vec(rng, dd),
                mos,
            ));
        }
    }
    build_store(records, StoreManifest::new("random", StoreMode::Synthetic, ds, dd)).unwrap()
}

pub fn oracle_metric(name: &str, u: &[f32], v: &[f32]) -> f64 {
    let u: Vec<f64> = u.iter().map(|&x| x as f64).collect();
    let v: Vec<f64> = v.iter().map(|&x| x as f64).collect();
    match name {
        "cosine" => {
            let dot: f64 = u.iter().zip(&v).map(|(a, b)| a * b).sum();
            let nu = u.iter().map(|a| a * a).sum::<f64>().sqrt();
            let nv = v.iter().map(|a| a * a).sum::<f64>().sqrt();
            if nu < 1e-12 || nv < 1e-12 {
                2.0
            } else {
                1.0 - dot / (nu * nv)
            }
        }
        "euclidean" => u.iter().zip(&v).map(|(a, b)| (a - b) * (a - b)).sum::<f64>().sqrt(),
        "manhattan" => u.iter().zip(&v).map(|(a, b)| (a - b).abs()).sum(),
        "js" => {
            let softmax = |x: &[f64]| {
                let m = x.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
                let e: Vec<f64> = x.iter().map(|a| (a - m).exp()).collect();
                let s: f64 = e.iter().sum();
                e.into_iter().map(|a| a / s).collect::<Vec<_>>()
            };
            let (p, q) = (softmax(&u), softmax(&v));
            let kl = |a: &[f64], b: &[f64]| -> f64 {
                a.iter()
                    .zip(b)
                    .filter(|(x, _)| **x > 0.0)
                    .map(|(x, y)| x * (x / y).log2())
                    .sum()
            };
            let m: Vec<f64> = p.iter().zip(&q).map(|(a, b)| 0.5 * (a + b)).collect();
            0.5 * kl(&p, &m) + 0.5 * kl(&q, &m)
        }
        other => panic!("no oracle for {other}"),
    }
}

/// (record id, group id, d_s, d_d) by exhaustive scoring and a full sort.
pub type OracleHit = (String, String, f64, f64);

pub fn oracle_hierarchical(
    store: &FeatureStore,
    metric: &str,
    q_sem: &[f32],
    q_dist: &[f32],
    k_prime: usize,
    k_double_prime: usize,
    exclude: Option<&str>,
) -> Vec<OracleHit> {
    let records = store.records();
    let mut groups: Vec<(f64, usize, &str)> = records
        .iter()
        .enumerate()
        .filter(|(_, r)| !r.is_distorted() && Some(r.group_id.as_str()) != exclude)
        .filter(|(_, r)| records.iter().any(|d| d.is_distorted() && d.group_id == r.group_id))
        .map(|(i, r)| (oracle_metric(metric, q_sem, &r.semantic), i, r.group_id.as_str()))
        .collect();
    groups.sort_by(|a, b| a.0.partial_cmp(&b.0).unwrap().then(a.1.cmp(&b.1)));
    let mut out = Vec::new();
    for &(d_s, _, gid) in groups.iter().take(k_prime) {
        let mut members: Vec<(f64, usize)> = records
            .iter()
            .enumerate()
            .filter(|(_, r)| r.is_distorted() && r.group_id == gid)
            .map(|(i, r)| (oracle_metric(metric, q_dist, &r.distortion), i))
            .collect();
        members.sort_by(|a, b| a.0.partial_cmp(&b.0).unwrap().then(a.1.cmp(&b.1)));
        for &(d_d, i) in members.iter().take(k_double_prime) {
            out.push((records[i].record_id.clone(), gid.to_string(), d_s, d_d));
        }
    }
    out
}

pub fn oracle_flat(
    store: &FeatureStore,
    metric: &str,
    q_sem: &[f32],
    q_dist: &[f32],
    k: usize,
    exclude: Option<&str>,
) -> Vec<OracleHit> {
    let q: Vec<f32> = q_sem.iter().chain(q_dist).copied().collect();
    let mut scored: Vec<(f64, usize)> = store
        .records()
        .iter()
        .enumerate()
        .filter(|(_, r)| r.is_distorted() && Some(r.group_id.as_str()) != exclude)
        .map(|(i, r)| {
            let v: Vec<f32> = r.semantic.iter().chain(&r.distortion).copied().collect();
            (oracle_metric(metric, &q, &v), i)
        })
        .collect();
    scored.sort_by(|a, b| a.0.partial_cmp(&b.0).unwrap().then(a.1.cmp(&b.1)));
    scored
        .into_iter()
        .take(k)
        .map(|(d, i)| {
            let r = &store.records()[i];
            (r.record_id.clone(), r.group_id.clone(), d, 0.0)
        })
        .collect()
}

/// Spearman correlation by the rank-difference formula; valid without ties.
pub fn oracle_srocc_no_ties(x: &[f64], y: &[f64]) -> f64 {
    let rank = |v: &[f64]| {
        let mut idx: Vec<usize> = (0..v.len()).collect();
        idx.sort_by(|&a, &b| v[a].partial_cmp(&v[b]).unwrap());
        let mut r = vec![0.0; v.len()];
        for (pos, &i) in idx.iter().enumerate() {
            r[i] = (pos + 1) as f64;
        }
        r
    };
    let (rx, ry) = (rank(x), rank(y));
    let n = x.len() as f64;
    let d2: f64 = rx.iter().zip(&ry).map(|(a, b)| (a - b) * (a - b)).sum();
    1.0 - 6.0 * d2 / (n * (n * n - 1.0))
}

/// Pearson correlation from two-pass covariance.
pub fn oracle_plcc(x: &[f64], y: &[f64]) -> f64 {
    let n = x.len() as f64;
    let mx = x.iter().sum::<f64>() / n;
    let my = y.iter().sum::<f64>() / n;
    let mut sxy = 0.0;
    let mut sxx = 0.0;
    let mut syy = 0.0;
    for (a, b) in x.iter().zip(y) {
        sxy += (a - mx) * (b - my);
        sxx += (a - mx) * (a - mx);
        syy += (b - my) * (b - my);
    }
    sxy / (sxx * syy).sqrt()
}

pub fn oracle_rmse(x: &[f64], y: &[f64]) -> f64 {
    let mut s = 0.0;
    for (a, b) in x.iter().zip(y) {
        s += (a - b) * (a - b);
    }
    (s / x.len() as f64).sqrt()
}

pub fn median(v: &[f64]) -> f64 {
    let mut s = v.to_vec();
    s.sort_by(|a, b| a.partial_cmp(b).unwrap());
    let n = s.len();
    if n % 2 == 1 {
        s[n / 2]
    } else {
        0.5 * (s[n / 2 - 1] + s[n / 2])
    }
}
