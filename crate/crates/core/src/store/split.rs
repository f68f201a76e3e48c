//! Seeded train/test partitioning.
//!
//! Shuffles use ChaCha8 (from `rand_chacha`, whose output stream is
//! value-stable across releases) seeded with `seed_from_u64(seed)`, driving a
//! Fisher-Yates pass that draws the swap index for position `i` as
//! `(next_u64() * (i + 1)) >> 64`. The same seed therefore reproduces the same
//! partition on every platform.
//!
//! Units are sorted by id before shuffling, so a partition depends only on
//! the ids present and the seed, never on the store's record order.

use rand::{RngCore, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::{FeatureStore, StoreMode};
use crate::error::{Error, Result};

pub struct SplitRng(ChaCha8Rng);

impl SplitRng {
    pub fn new(seed: u64) -> Self {
        Self(ChaCha8Rng::seed_from_u64(seed))
    }

    /// Uniform index in `0..bound` by multiply-shift.
    pub fn below(&mut self, bound: usize) -> usize {
        ((self.0.next_u64() as u128 * bound as u128) >> 64) as usize
    }

    pub fn shuffle<T>(&mut self, items: &mut [T]) {
        for i in (1..items.len()).rev() {
            let j = self.below(i + 1);
            items.swap(i, j);
        }
    }
}

/// Group indices sorted by group id.
fn group_units(store: &FeatureStore, nonempty_only: bool) -> Vec<usize> {
    let groups = store.groups();
    let mut order: Vec<usize> = (0..groups.len())
        .filter(|&g| !nonempty_only || !groups[g].distorted.is_empty())
        .collect();
    order.sort_by(|&a, &b| groups[a].id.cmp(&groups[b].id));
    order
}

/// Distorted record positions sorted by record id.
fn record_units(store: &FeatureStore) -> Vec<usize> {
    let records = store.records();
    let mut order: Vec<usize> = (0..records.len())
        .filter(|&i| records[i].is_distorted())
        .collect();
    order.sort_by(|&a, &b| records[a].record_id.cmp(&records[b].record_id));
    order
}

/// Distorted record ids on each side, in canonical store order.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Split {
    pub train: Vec<String>,
    pub test: Vec<String>,
}

/// Partitions the distorted records of `store`.
///
/// Synthetic stores are split by pristine group so that no content appears on
/// both sides; authentic stores are split record-wise. The first
/// `round(train_fraction * n)` shuffled units go to the training side.
pub fn split_dataset(store: &FeatureStore, train_fraction: f64, seed: u64) -> Result<Split> {
    if !(train_fraction > 0.0 && train_fraction < 1.0) {
        return Err(Error::InvalidFraction(train_fraction));
    }
    if store.is_empty() {
        return Err(Error::EmptyStore);
    }
    let mut rng = SplitRng::new(seed);
    let mut train_mask = vec![false; store.len()];

    match store.mode() {
        StoreMode::Synthetic => {
            let mut order = group_units(store, false);
            rng.shuffle(&mut order);
            let n_train = (train_fraction * order.len() as f64).round() as usize;
            for &g in &order[..n_train] {
                for &r in &store.groups()[g].distorted {
                    train_mask[r] = true;
                }
            }
        }
        StoreMode::Authentic => {
            let mut order = record_units(store);
            rng.shuffle(&mut order);
            let n_train = (train_fraction * order.len() as f64).round() as usize;
            for &r in &order[..n_train] {
                train_mask[r] = true;
            }
        }
    }

    let mut split = Split {
        train: Vec::new(),
        test: Vec::new(),
    };
    for (rec, &is_train) in store.records().iter().zip(&train_mask) {
        if !rec.is_distorted() {
            continue;
        }
        if is_train {
            split.train.push(rec.record_id.clone());
        } else {
            split.test.push(rec.record_id.clone());
        }
    }
    if split.train.is_empty() {
        return Err(Error::EmptySplit("train"));
    }
    if split.test.is_empty() {
        return Err(Error::EmptySplit("test"));
    }
    Ok(split)
}

/// Keeps a seeded `fraction` of a retrieval pool: whole groups in synthetic
/// stores, single records in authentic ones. At least one unit is kept.
pub fn subsample_pool(store: &FeatureStore, fraction: f64, seed: u64) -> Result<Vec<String>> {
    if !(fraction > 0.0 && fraction <= 1.0) {
        return Err(Error::InvalidFraction(fraction));
    }
    let all: Vec<String> = store.distorted().map(|r| r.record_id.clone()).collect();
    if fraction == 1.0 {
        return Ok(all);
    }
    let mut rng = SplitRng::new(seed);
    let mut keep = vec![false; store.len()];
    match store.mode() {
        StoreMode::Synthetic => {
            let mut order = group_units(store, true);
            rng.shuffle(&mut order);
            let n = ((fraction * order.len() as f64).round() as usize).max(1);
            for &g in &order[..n] {
                for &r in &store.groups()[g].distorted {
                    keep[r] = true;
                }
            }
        }
        StoreMode::Authentic => {
            let mut order = record_units(store);
            rng.shuffle(&mut order);
            let n = ((fraction * order.len() as f64).round() as usize).max(1);
            for &r in &order[..n] {
                keep[r] = true;
            }
        }
    }
    Ok(store
        .records()
        .iter()
        .zip(&keep)
        .filter(|(_, &k)| k)
        .map(|(r, _)| r.record_id.clone())
        .collect())
}
