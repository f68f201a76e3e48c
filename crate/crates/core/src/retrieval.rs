//! Exact nearest-neighbour retrieval of similar annotated instances.
//!
//! The hierarchical mode first ranks pristine references by semantic
//! distance, then ranks the distorted versions of each selected reference by
//! distortion distance. The flat mode ranks every distorted record on the
//! concatenation of both feature vectors, which is what authentic stores
//! (no references) require.
//!
//! Ties are broken by canonical record order so results never depend on hash
//! or memory layout.

use std::fmt;
use std::sync::Arc;

use crate::distance::{Cosine, Metric};
use crate::error::{Error, Result};
use crate::store::{FeatureRecord, FeatureStore, StoreMode};

/// Feature vectors of the image being assessed.
#[derive(Clone, Copy, Debug)]
pub struct Query<'a> {
    pub semantic: &'a [f32],
    pub distortion: &'a [f32],
}

impl<'a> Query<'a> {
    pub fn new(semantic: &'a [f32], distortion: &'a [f32]) -> Self {
        Self {
            semantic,
            distortion,
        }
    }

    pub fn from_record(record: &'a FeatureRecord) -> Self {
        Self::new(&record.semantic, &record.distortion)
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct RetrievedInstance {
    pub record_id: String,
    pub group_id: String,
    pub mos: f64,
    /// Semantic distance to the instance's pristine parent. In flat mode this
    /// holds the single concatenated-feature distance.
    pub d_s: f64,
    /// Distortion distance; always 0 in flat mode.
    pub d_d: f64,
}

impl RetrievedInstance {
    pub fn total_distance(&self) -> f64 {
        self.d_s + self.d_d
    }
}

/// A pristine group selected by the semantic stage.
#[derive(Clone, Debug, PartialEq)]
pub struct PristineMatch {
    pub group_id: String,
    pub d_s: f64,
}

/// One way of turning a query into a list of retrieved instances.
pub trait RetrievalMode: Send + Sync + fmt::Debug {
    fn name(&self) -> &'static str;

    fn retrieve(
        &self,
        store: &FeatureStore,
        query: &Query<'_>,
        config: &RetrievalConfig,
    ) -> Result<Vec<RetrievedInstance>>;
}

#[derive(Clone)]
pub struct RetrievalConfig {
    /// Number of pristine groups kept by the semantic stage.
    pub k_prime: usize,
    /// Number of distorted records kept per group by the distortion stage.
    pub k_double_prime: usize,
    pub metric: Arc<dyn Metric>,
    pub mode: Arc<dyn RetrievalMode>,
    /// Group never returned. In authentic stores groups are single records,
    /// so this excludes one record.
    pub exclude_group: Option<String>,
}

impl RetrievalConfig {
    /// Cosine distance, hierarchical mode, no exclusion.
    pub fn new(k_prime: usize, k_double_prime: usize) -> Result<Self> {
        let config = Self {
            k_prime,
            k_double_prime,
            metric: Arc::new(Cosine),
            mode: Arc::new(Hierarchical),
            exclude_group: None,
        };
        config.validate()?;
        Ok(config)
    }

    pub fn with_metric(mut self, metric: Arc<dyn Metric>) -> Self {
        self.metric = metric;
        self
    }

    pub fn with_mode(mut self, mode: Arc<dyn RetrievalMode>) -> Self {
        self.mode = mode;
        self
    }

    pub fn excluding(mut self, group: Option<impl Into<String>>) -> Self {
        self.exclude_group = group.map(Into::into);
        self
    }

    pub fn validate(&self) -> Result<()> {
        if self.k_prime == 0 || self.k_double_prime == 0 {
            return Err(Error::InvalidConfig(
                "k_prime and k_double_prime must be >= 1".into(),
            ));
        }
        Ok(())
    }

    /// Stable one-line description, used in report headers.
    pub fn describe(&self) -> String {
        format!(
            "k_prime={};k_double_prime={};metric={};mode={};exclude_group={}",
            self.k_prime,
            self.k_double_prime,
            self.metric.name(),
            self.mode.name(),
            self.exclude_group.as_deref().unwrap_or("")
        )
    }
}

impl fmt::Debug for RetrievalConfig {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.describe())
    }
}

fn expect_dim(context: &str, expected: usize, actual: usize) -> Result<()> {
    if expected != actual {
        return Err(Error::DimensionMismatch {
            context: context.to_string(),
            expected,
            actual,
        });
    }
    Ok(())
}

/// Sorts `(distance, canonical position, payload)` ascending and keeps `k`.
fn top_k<T>(mut scored: Vec<(f64, usize, T)>, k: usize) -> Vec<(f64, usize, T)> {
    scored.sort_by(|a, b| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1)));
    scored.truncate(k);
    scored
}

/// Semantic stage: the `k_prime` pristine groups closest to `query_semantic`.
///
/// Only groups with a pristine record and at least one distorted record are
/// eligible. Fewer than `k_prime` matches are returned when fewer groups are
/// eligible.
pub fn retrieve_pristine(
    store: &FeatureStore,
    query_semantic: &[f32],
    k_prime: usize,
    metric: &dyn Metric,
    exclude_group: Option<&str>,
) -> Result<Vec<PristineMatch>> {
    if store.mode() != StoreMode::Synthetic {
        return Err(Error::WrongMode {
            expected: "synthetic",
        });
    }
    expect_dim(
        "query semantic vector",
        store.manifest().semantic_dim,
        query_semantic.len(),
    )?;
    let records = store.records();
    let mut scored = Vec::with_capacity(store.groups().len());
    for group in store.groups() {
        let Some(p) = group.pristine else { continue };
        if group.distorted.is_empty() || exclude_group == Some(group.id.as_str()) {
            continue;
        }
        let d = metric.distance(query_semantic, &records[p].semantic)?;
        scored.push((d, p, group.id.as_str()));
    }
    if scored.is_empty() {
        return Err(Error::NoEligibleGroups);
    }
    Ok(top_k(scored, k_prime)
        .into_iter()
        .map(|(d_s, _, id)| PristineMatch {
            group_id: id.to_string(),
            d_s,
        })
        .collect())
}

/// Distortion stage: the `k_double_prime` distorted records of `group_id`
/// closest to `query_distortion`. Returned instances carry `d_s = 0`; the
/// caller fills in the group's semantic distance.
pub fn retrieve_distorted(
    store: &FeatureStore,
    group_id: &str,
    query_distortion: &[f32],
    k_double_prime: usize,
    metric: &dyn Metric,
) -> Result<Vec<RetrievedInstance>> {
    let group = store
        .group(group_id)
        .ok_or_else(|| Error::UnknownGroup(group_id.to_string()))?;
    expect_dim(
        "query distortion vector",
        store.manifest().distortion_dim,
        query_distortion.len(),
    )?;
    let records = store.records();
    let mut scored = Vec::with_capacity(group.distorted.len());
    for &r in &group.distorted {
        let d = metric.distance(query_distortion, &records[r].distortion)?;
        scored.push((d, r, ()));
    }
    Ok(top_k(scored, k_double_prime)
        .into_iter()
        .map(|(d_d, r, ())| {
            let rec = &records[r];
            RetrievedInstance {
                record_id: rec.record_id.clone(),
                group_id: rec.group_id.clone(),
                mos: rec.score(),
                d_s: 0.0,
                d_d,
            }
        })
        .collect())
}

/// Two-stage retrieval: up to `k_prime * k_double_prime` instances, grouped by
/// ascending semantic distance and, within a group, ascending distortion
/// distance.
pub fn retrieve_hierarchical(
    store: &FeatureStore,
    query: &Query<'_>,
    config: &RetrievalConfig,
) -> Result<Vec<RetrievedInstance>> {
    config.validate()?;
    let metric = config.metric.as_ref();
    let pristine = retrieve_pristine(
        store,
        query.semantic,
        config.k_prime,
        metric,
        config.exclude_group.as_deref(),
    )?;
    let mut out = Vec::with_capacity(pristine.len() * config.k_double_prime);
    for m in pristine {
        let mut found = retrieve_distorted(
            store,
            &m.group_id,
            query.distortion,
            config.k_double_prime,
            metric,
        )?;
        for inst in &mut found {
            inst.d_s = m.d_s;
        }
        out.extend(found);
    }
    Ok(out)
}

/// Single-stage retrieval on concatenated `semantic ‖ distortion` vectors
/// over every distorted record. Keeps `k_prime * k_double_prime` instances.
pub fn retrieve_flat_concat(
    store: &FeatureStore,
    query: &Query<'_>,
    config: &RetrievalConfig,
) -> Result<Vec<RetrievedInstance>> {
    config.validate()?;
    let manifest = store.manifest();
    expect_dim("query semantic vector", manifest.semantic_dim, query.semantic.len())?;
    expect_dim(
        "query distortion vector",
        manifest.distortion_dim,
        query.distortion.len(),
    )?;
    let exclude = config.exclude_group.as_deref();
    let q: Vec<f32> = [query.semantic, query.distortion].concat();
    let mut buf = Vec::with_capacity(q.len());
    let mut scored = Vec::new();
    for (pos, rec) in store.records().iter().enumerate() {
        if !rec.is_distorted() || exclude == Some(rec.group_id.as_str()) {
            continue;
        }
        buf.clear();
        buf.extend_from_slice(&rec.semantic);
        buf.extend_from_slice(&rec.distortion);
        let d = config.metric.distance(&q, &buf)?;
        scored.push((d, pos, rec));
    }
    if scored.is_empty() {
        return Err(Error::NoEligibleGroups);
    }
    let k = config.k_prime.saturating_mul(config.k_double_prime);
    Ok(top_k(scored, k)
        .into_iter()
        .map(|(d, _, rec)| RetrievedInstance {
            record_id: rec.record_id.clone(),
            group_id: rec.group_id.clone(),
            mos: rec.score(),
            d_s: d,
            d_d: 0.0,
        })
        .collect())
}

#[derive(Debug, Default, Clone, Copy)]
pub struct Hierarchical;

#[derive(Debug, Default, Clone, Copy)]
pub struct FlatConcat;

impl RetrievalMode for Hierarchical {
    fn name(&self) -> &'static str {
        "hierarchical"
    }

    fn retrieve(
        &self,
        store: &FeatureStore,
        query: &Query<'_>,
        config: &RetrievalConfig,
    ) -> Result<Vec<RetrievedInstance>> {
        retrieve_hierarchical(store, query, config)
    }
}

impl RetrievalMode for FlatConcat {
    fn name(&self) -> &'static str {
        "flat"
    }

    fn retrieve(
        &self,
        store: &FeatureStore,
        query: &Query<'_>,
        config: &RetrievalConfig,
    ) -> Result<Vec<RetrievedInstance>> {
        retrieve_flat_concat(store, query, config)
    }
}
