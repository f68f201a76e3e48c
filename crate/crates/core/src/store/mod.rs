//! Annotated feature stores.
//!
//! A store holds one [`FeatureRecord`] per image. In synthetic stores the
//! records are grouped under the pristine image they were derived from; in
//! authentic stores every record is a distorted singleton. Stores are
//! immutable once built and can be shared freely across threads.

mod format;
mod split;

use std::collections::{BTreeMap, HashMap, HashSet};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub use format::{load_store, parse_store, save_store, FORMAT_VERSION, MAGIC, MANIFEST_FILE, VECTORS_FILE};
pub use split::{split_dataset, subsample_pool, Split, SplitRng};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Role {
    Pristine,
    Distorted,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum StoreMode {
    /// Distorted images grouped under their pristine reference.
    Synthetic,
    /// In-the-wild images without references; each record is its own group.
    Authentic,
}

impl StoreMode {
    pub fn as_str(self) -> &'static str {
        match self {
            StoreMode::Synthetic => "synthetic",
            StoreMode::Authentic => "authentic",
        }
    }
}

/// Direction of the opinion scores. Metadata only; scores are never flipped.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ScorePolarity {
    HigherBetter,
    LowerBetter,
}

#[derive(Clone, Debug, PartialEq)]
pub struct FeatureRecord {
    pub record_id: String,
    pub group_id: String,
    pub role: Role,
    pub semantic: Vec<f32>,
    /// May be empty for pristine records.
    pub distortion: Vec<f32>,
    pub mos: Option<f64>,
    pub distortion_type: Option<String>,
    pub distortion_level: Option<u32>,
}

impl FeatureRecord {
    pub fn pristine(id: impl Into<String>, semantic: Vec<f32>) -> Self {
        let id = id.into();
        Self {
            group_id: id.clone(),
            record_id: id,
            role: Role::Pristine,
            semantic,
            distortion: Vec::new(),
            mos: None,
            distortion_type: None,
            distortion_level: None,
        }
    }

    pub fn distorted(
        id: impl Into<String>,
        group_id: impl Into<String>,
        semantic: Vec<f32>,
        distortion: Vec<f32>,
        mos: f64,
    ) -> Self {
        Self {
            record_id: id.into(),
            group_id: group_id.into(),
            role: Role::Distorted,
            semantic,
            distortion,
            mos: Some(mos),
            distortion_type: None,
            distortion_level: None,
        }
    }

    pub fn with_distortion_tag(mut self, kind: impl Into<String>, level: u32) -> Self {
        self.distortion_type = Some(kind.into());
        self.distortion_level = Some(level);
        self
    }

    pub fn is_distorted(&self) -> bool {
        self.role == Role::Distorted
    }

    /// Opinion score of a distorted record. Validated at build time.
    pub fn score(&self) -> f64 {
        self.mos.unwrap_or(f64::NAN)
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct StoreManifest {
    pub dataset_name: String,
    pub mode: StoreMode,
    pub score_polarity: ScorePolarity,
    pub semantic_dim: usize,
    pub distortion_dim: usize,
    pub reduction_factor: usize,
    pub format_version: u32,
    /// Free-form exporter metadata (extractor names, crop seeds, level bin edges).
    #[serde(default, skip_serializing_if = "BTreeMap::is_empty")]
    pub metadata: BTreeMap<String, serde_json::Value>,
}

impl StoreManifest {
    pub fn new(
        dataset_name: impl Into<String>,
        mode: StoreMode,
        semantic_dim: usize,
        distortion_dim: usize,
    ) -> Self {
        Self {
            dataset_name: dataset_name.into(),
            mode,
            score_polarity: ScorePolarity::HigherBetter,
            semantic_dim,
            distortion_dim,
            reduction_factor: 1,
            format_version: FORMAT_VERSION,
            metadata: BTreeMap::new(),
        }
    }

    fn validate(&self) -> Result<()> {
        if self.semantic_dim == 0 || self.distortion_dim == 0 {
            return Err(Error::InvalidManifest(
                "semantic_dim and distortion_dim must be positive".into(),
            ));
        }
        if self.reduction_factor == 0 {
            return Err(Error::InvalidManifest("reduction_factor must be >= 1".into()));
        }
        Ok(())
    }
}

/// A pristine group: the reference record (synthetic stores only) and the
/// indices of its distorted records in canonical order.
#[derive(Clone, Debug, PartialEq)]
pub struct Group {
    pub id: String,
    pub pristine: Option<usize>,
    pub distorted: Vec<usize>,
}

#[derive(Clone, Debug)]
pub struct FeatureStore {
    records: Vec<FeatureRecord>,
    groups: Vec<Group>,
    group_index: HashMap<String, usize>,
    record_index: HashMap<String, usize>,
    manifest: StoreManifest,
}

impl PartialEq for FeatureStore {
    fn eq(&self, other: &Self) -> bool {
        self.manifest == other.manifest && self.records == other.records
    }
}

fn check_dim(record: &FeatureRecord, what: &str, expected: usize, actual: usize) -> Result<()> {
    if expected != actual {
        return Err(Error::DimensionMismatch {
            context: format!("{} vector of `{}`", what, record.record_id),
            expected,
            actual,
        });
    }
    Ok(())
}

/// Validates `records` against `manifest` and indexes them by group.
/// Insertion order becomes the canonical record order.
pub fn build_store(records: Vec<FeatureRecord>, manifest: StoreManifest) -> Result<FeatureStore> {
    if records.is_empty() {
        return Err(Error::EmptyStore);
    }
    manifest.validate()?;

    let mut record_index = HashMap::with_capacity(records.len());
    let mut group_index: HashMap<String, usize> = HashMap::new();
    let mut groups: Vec<Group> = Vec::new();

    for (idx, rec) in records.iter().enumerate() {
        if record_index.insert(rec.record_id.clone(), idx).is_some() {
            return Err(Error::DuplicateRecordId(rec.record_id.clone()));
        }
        check_dim(rec, "semantic", manifest.semantic_dim, rec.semantic.len())?;
        match rec.role {
            Role::Distorted => {
                check_dim(rec, "distortion", manifest.distortion_dim, rec.distortion.len())?;
                if !rec.mos.is_some_and(f64::is_finite) {
                    return Err(Error::MissingMos(rec.record_id.clone()));
                }
            }
            Role::Pristine => {
                if manifest.mode == StoreMode::Authentic {
                    return Err(Error::PristineInAuthentic(rec.record_id.clone()));
                }
                if !rec.distortion.is_empty() {
                    check_dim(rec, "distortion", manifest.distortion_dim, rec.distortion.len())?;
                }
                if rec.mos.is_some_and(|m| !m.is_finite()) {
                    return Err(Error::MissingMos(rec.record_id.clone()));
                }
            }
        }
        if rec.semantic.iter().chain(&rec.distortion).any(|x| !x.is_finite()) {
            return Err(Error::NonFiniteFeature(rec.record_id.clone()));
        }
        if rec.distortion_level == Some(0) {
            return Err(Error::InvalidManifest(format!(
                "record `{}` has distortion level 0, levels start at 1",
                rec.record_id
            )));
        }

        let gidx = *group_index.entry(rec.group_id.clone()).or_insert_with(|| {
            groups.push(Group {
                id: rec.group_id.clone(),
                pristine: None,
                distorted: Vec::new(),
            });
            groups.len() - 1
        });
        let group = &mut groups[gidx];
        match rec.role {
            Role::Pristine => {
                if group.pristine.replace(idx).is_some() {
                    return Err(Error::DuplicatePristine(rec.group_id.clone()));
                }
            }
            Role::Distorted => group.distorted.push(idx),
        }
    }

    if manifest.mode == StoreMode::Synthetic {
        for group in &groups {
            if group.pristine.is_none() {
                let first = &records[group.distorted[0]];
                return Err(Error::OrphanDistortedRecord {
                    record_id: first.record_id.clone(),
                    group_id: group.id.clone(),
                });
            }
        }
    }

    Ok(FeatureStore {
        records,
        groups,
        group_index,
        record_index,
        manifest,
    })
}

impl FeatureStore {
    pub fn manifest(&self) -> &StoreManifest {
        &self.manifest
    }

    pub fn mode(&self) -> StoreMode {
        self.manifest.mode
    }

    pub fn records(&self) -> &[FeatureRecord] {
        &self.records
    }

    pub fn len(&self) -> usize {
        self.records.len()
    }

    pub fn is_empty(&self) -> bool {
        self.records.is_empty()
    }

    /// Groups in order of first appearance.
    pub fn groups(&self) -> &[Group] {
        &self.groups
    }

    pub fn group(&self, id: &str) -> Option<&Group> {
        self.group_index.get(id).map(|&i| &self.groups[i])
    }

    pub fn record(&self, id: &str) -> Option<&FeatureRecord> {
        self.record_index.get(id).map(|&i| &self.records[i])
    }

    pub fn record_position(&self, id: &str) -> Option<usize> {
        self.record_index.get(id).copied()
    }

    /// Distorted records in canonical order.
    pub fn distorted(&self) -> impl Iterator<Item = &FeatureRecord> {
        self.records.iter().filter(|r| r.is_distorted())
    }

    pub fn distorted_count(&self) -> usize {
        self.distorted().count()
    }

    /// Builds a new store holding the listed distorted records, the pristine
    /// records of their groups, and nothing else. Canonical order is kept.
    pub fn subset<S: AsRef<str>>(&self, distorted_ids: &[S]) -> Result<FeatureStore> {
        let keep: HashSet<&str> = distorted_ids.iter().map(AsRef::as_ref).collect();
        for id in &keep {
            if self.record(id).is_none() {
                return Err(Error::UnknownRecord((*id).to_string()));
            }
        }
        let kept_groups: HashSet<&str> = self
            .distorted()
            .filter(|r| keep.contains(r.record_id.as_str()))
            .map(|r| r.group_id.as_str())
            .collect();
        let records = self
            .records
            .iter()
            .filter(|r| match r.role {
                Role::Distorted => keep.contains(r.record_id.as_str()),
                Role::Pristine => kept_groups.contains(r.group_id.as_str()),
            })
            .cloned()
            .collect();
        build_store(records, self.manifest.clone())
    }

    /// Returns a copy with the given records in a new canonical order.
    pub fn reordered(&self, order: &[usize]) -> Result<FeatureStore> {
        let records = order.iter().map(|&i| self.records[i].clone()).collect();
        build_store(records, self.manifest.clone())
    }
}

/// One-dimensional max pooling with window and stride `factor`. A trailing
/// partial window is kept, so the output has `ceil(len / factor)` entries.
pub fn max_pool(v: &[f32], factor: usize) -> Vec<f32> {
    v.chunks(factor)
        .map(|w| w.iter().copied().fold(f32::NEG_INFINITY, f32::max))
        .collect()
}

/// Max-pools every stored vector by `factor` and scales the manifest's
/// reduction factor accordingly.
pub fn reduce_features(store: &FeatureStore, factor: usize) -> Result<FeatureStore> {
    if factor == 0 {
        return Err(Error::InvalidFactor(factor));
    }
    if factor == 1 {
        return Ok(store.clone());
    }
    let records = store
        .records
        .iter()
        .map(|r| FeatureRecord {
            semantic: max_pool(&r.semantic, factor),
            distortion: max_pool(&r.distortion, factor),
            ..r.clone()
        })
        .collect();
    let mut manifest = store.manifest.clone();
    manifest.semantic_dim = manifest.semantic_dim.div_ceil(factor);
    manifest.distortion_dim = manifest.distortion_dim.div_ceil(factor);
    manifest.reduction_factor *= factor;
    build_store(records, manifest)
}
