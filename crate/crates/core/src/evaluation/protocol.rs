//! Repeated split-and-predict evaluation.
//!
//! Each repeat `r` splits the store with seed `base_seed + r`, uses the
//! training side as the retrieval pool, predicts every test record and
//! scores the predictions. Repeats run in parallel; results are assembled in
//! repeat order so the report never depends on scheduling.

use std::collections::BTreeMap;
use std::fmt::Write as _;

use rayon::prelude::*;
use sha2::{Digest, Sha256};

use super::logistic::fit_logistic5;
use super::stats::{median, plcc, rmse, srocc};
use crate::error::{Error, Result};
use crate::prediction::{predict, Aggregator};
use crate::retrieval::{Query, RetrievalConfig};
use crate::store::{split_dataset, subsample_pool, FeatureStore, Split};

/// Mixed into the repeat seed when subsampling the retrieval pool.
const POOL_SEED_SALT: u64 = 0x005E_ED0F_F00D;

#[derive(Clone, Debug, PartialEq)]
pub struct ProtocolParams {
    pub train_fraction: f64,
    pub n_repeats: usize,
    pub base_seed: u64,
    /// Fraction of the training side kept as retrieval pool.
    pub pool_fraction: f64,
    /// Also report PLCC after a five-parameter logistic mapping.
    pub fit_logistic: bool,
}

impl Default for ProtocolParams {
    fn default() -> Self {
        Self {
            train_fraction: 0.8,
            n_repeats: 15,
            base_seed: 0,
            pool_fraction: 1.0,
            fit_logistic: false,
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct RepeatMetrics {
    pub srocc: f64,
    pub plcc: f64,
    pub rmse: f64,
    pub plcc_fitted: Option<f64>,
}

#[derive(Clone, Debug, PartialEq)]
pub struct RepeatRow {
    pub repeat: usize,
    pub seed: u64,
    pub n_test: usize,
    /// `Err` holds the reason a repeat was excluded from the medians.
    pub outcome: std::result::Result<RepeatMetrics, String>,
}

#[derive(Clone, Debug, PartialEq)]
pub struct EvalReport {
    pub repeats: Vec<RepeatRow>,
    pub median_srocc: f64,
    pub median_plcc: f64,
    pub median_rmse: f64,
    pub median_plcc_fitted: Option<f64>,
    pub failed_repeats: usize,
    pub per_distortion: BTreeMap<String, f64>,
    pub params: ProtocolParams,
    pub config: String,
    pub aggregation: &'static str,
    /// Dataset name, mode, dimensions and reduction factor of the store.
    pub store_snapshot: String,
}

/// Predicted and ground-truth scores for the test side of one split.
#[derive(Clone, Debug, Default)]
pub struct SplitPredictions {
    pub record_ids: Vec<String>,
    pub predicted: Vec<f64>,
    pub ground_truth: Vec<f64>,
}

/// Predicts every test record of `split` from its training side. Test records
/// are visited in record-id order; each query excludes its own group.
pub fn predict_split(
    store: &FeatureStore,
    split: &Split,
    config: &RetrievalConfig,
    aggregator: &dyn Aggregator,
    pool_fraction: f64,
    pool_seed: u64,
) -> Result<SplitPredictions> {
    let mut pool = store.subset(&split.train)?;
    if pool_fraction < 1.0 {
        let kept = subsample_pool(&pool, pool_fraction, pool_seed)?;
        pool = pool.subset(&kept)?;
    }
    let mut test: Vec<&str> = split.test.iter().map(String::as_str).collect();
    test.sort_unstable();

    let scored: Vec<(f64, f64)> = test
        .par_iter()
        .map(|id| {
            let rec = store
                .record(id)
                .ok_or_else(|| Error::UnknownRecord(id.to_string()))?;
            let query_config = config.clone().excluding(Some(rec.group_id.as_str()));
            let result = predict(&pool, &Query::from_record(rec), &query_config, aggregator)?;
            Ok((result.score, rec.score()))
        })
        .collect::<Result<_>>()?;

    let (predicted, ground_truth) = scored.into_iter().unzip();
    Ok(SplitPredictions {
        record_ids: test.into_iter().map(str::to_string).collect(),
        predicted,
        ground_truth,
    })
}

fn score_repeat(p: &SplitPredictions, fit_logistic: bool) -> Result<RepeatMetrics> {
    let s = srocc(&p.predicted, &p.ground_truth)?;
    let l = plcc(&p.predicted, &p.ground_truth)?;
    let r = rmse(&p.predicted, &p.ground_truth)?;
    let plcc_fitted = if fit_logistic {
        // raw PLCC stands in when the fit fails
        Some(match fit_logistic5(&p.predicted, &p.ground_truth) {
            Ok(fit) => plcc(&fit.mapped, &p.ground_truth).unwrap_or(l),
            Err(_) => l,
        })
    } else {
        None
    };
    Ok(RepeatMetrics {
        srocc: s,
        plcc: l,
        rmse: r,
        plcc_fitted,
    })
}

pub fn store_snapshot(store: &FeatureStore) -> String {
    let m = store.manifest();
    format!(
        "dataset={};store_mode={};semantic_dim={};distortion_dim={};reduction_factor={}",
        m.dataset_name,
        m.mode.as_str(),
        m.semantic_dim,
        m.distortion_dim,
        m.reduction_factor
    )
}

pub fn run_protocol(
    store: &FeatureStore,
    config: &RetrievalConfig,
    aggregator: &dyn Aggregator,
    params: &ProtocolParams,
) -> Result<EvalReport> {
    if params.n_repeats == 0 {
        return Err(Error::InvalidConfig("n_repeats must be >= 1".into()));
    }
    config.validate()?;

    let repeats: Vec<RepeatRow> = (0..params.n_repeats)
        .into_par_iter()
        .map(|r| {
            let seed = params.base_seed.wrapping_add(r as u64);
            let split = split_dataset(store, params.train_fraction, seed)?;
            let preds = predict_split(
                store,
                &split,
                config,
                aggregator,
                params.pool_fraction,
                seed ^ POOL_SEED_SALT,
            )?;
            let outcome = match score_repeat(&preds, params.fit_logistic) {
                Ok(m) => Ok(m),
                Err(Error::DegenerateInput(why)) => Err(why.to_string()),
                Err(e) => return Err(e),
            };
            Ok(RepeatRow {
                repeat: r,
                seed,
                n_test: preds.predicted.len(),
                outcome,
            })
        })
        .collect::<Result<_>>()?;

    let ok: Vec<&RepeatMetrics> = repeats.iter().filter_map(|r| r.outcome.as_ref().ok()).collect();
    if ok.is_empty() {
        return Err(Error::NoSuccessfulRepeats);
    }
    let col = |f: fn(&RepeatMetrics) -> f64| -> f64 {
        median(&ok.iter().map(|m| f(m)).collect::<Vec<_>>()).unwrap()
    };
    let fitted: Vec<f64> = ok.iter().filter_map(|m| m.plcc_fitted).collect();

    Ok(EvalReport {
        median_srocc: col(|m| m.srocc),
        median_plcc: col(|m| m.plcc),
        median_rmse: col(|m| m.rmse),
        median_plcc_fitted: median(&fitted),
        failed_repeats: repeats.len() - ok.len(),
        repeats,
        per_distortion: BTreeMap::new(),
        params: params.clone(),
        config: config.describe(),
        aggregation: aggregator.name(),
        store_snapshot: store_snapshot(store),
    })
}

/// SROCC within each distortion type on the test side of a single split.
/// Types whose subset has fewer than two distinct values are left out.
pub fn per_distortion_breakdown(
    store: &FeatureStore,
    config: &RetrievalConfig,
    aggregator: &dyn Aggregator,
    train_fraction: f64,
    seed: u64,
) -> Result<BTreeMap<String, f64>> {
    let split = split_dataset(store, train_fraction, seed)?;
    let preds = predict_split(store, &split, config, aggregator, 1.0, 0)?;
    Ok(breakdown_by_type(store, &preds))
}

/// Groups scored predictions by the records' distortion type tags.
pub fn breakdown_by_type(store: &FeatureStore, preds: &SplitPredictions) -> BTreeMap<String, f64> {
    let mut by_type: BTreeMap<&str, (Vec<f64>, Vec<f64>)> = BTreeMap::new();
    for (i, id) in preds.record_ids.iter().enumerate() {
        let Some(kind) = store.record(id).and_then(|r| r.distortion_type.as_deref()) else {
            continue;
        };
        let entry = by_type.entry(kind).or_default();
        entry.0.push(preds.predicted[i]);
        entry.1.push(preds.ground_truth[i]);
    }
    by_type
        .into_iter()
        .filter_map(|(kind, (p, g))| srocc(&p, &g).ok().map(|s| (kind.to_string(), s)))
        .collect()
}

fn fmt_opt(v: Option<f64>) -> String {
    v.map(|x| format!("{x:.6}")).unwrap_or_default()
}

impl EvalReport {
    /// Full configuration string, hashed into the report header.
    pub fn config_line(&self) -> String {
        let p = &self.params;
        format!(
            "{};aggregate={};train_fraction={};repeats={};pool_fraction={};fit_logistic={};{}",
            self.config,
            self.aggregation,
            p.train_fraction,
            p.n_repeats,
            p.pool_fraction,
            p.fit_logistic,
            self.store_snapshot
        )
    }

    /// CSV rendering: comment header, one row per repeat, a `median` row and
    /// optional `distortion:<type>` rows.
    pub fn to_csv(&self) -> String {
        let config = self.config_line();
        let mut out = String::new();
        let _ = writeln!(
            out,
            "# {} {} seed={} config_hash={}",
            env!("CARGO_PKG_NAME"),
            env!("CARGO_PKG_VERSION"),
            self.params.base_seed,
            config_hash(&config)
        );
        let _ = writeln!(out, "# config={config}");
        out.push_str("row,seed,n_test,srocc,plcc,rmse,plcc_fitted,status\n");
        for row in &self.repeats {
            match &row.outcome {
                Ok(m) => {
                    let _ = writeln!(
                        out,
                        "{},{},{},{:.6},{:.6},{:.6},{},ok",
                        row.repeat,
                        row.seed,
                        row.n_test,
                        m.srocc,
                        m.plcc,
                        m.rmse,
                        fmt_opt(m.plcc_fitted)
                    );
                }
                Err(why) => {
                    let _ = writeln!(
                        out,
                        "{},{},{},,,,,failed: {}",
                        row.repeat,
                        row.seed,
                        row.n_test,
                        why.replace(',', ";")
                    );
                }
            }
        }
        let _ = writeln!(
            out,
            "median,,{},{:.6},{:.6},{:.6},{},failed={}",
            self.repeats.len() - self.failed_repeats,
            self.median_srocc,
            self.median_plcc,
            self.median_rmse,
            fmt_opt(self.median_plcc_fitted),
            self.failed_repeats
        );
        for (kind, s) in &self.per_distortion {
            let _ = writeln!(
                out,
                "distortion:{},{},,{:.6},,,,ok",
                kind.replace(',', ";"),
                self.params.base_seed,
                s
            );
        }
        out
    }
}

/// First 16 hex digits of the SHA-256 of `text`.
pub fn config_hash(text: &str) -> String {
    let digest = Sha256::digest(text.as_bytes());
    hex::encode(&digest[..8])
}
