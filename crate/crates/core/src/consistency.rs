//! Content-distortion consistency analysis.
//!
//! Measures whether semantically similar pristine images receive similar
//! quality judgements under identical distortions: for pairs of pristine
//! groups it relates the cosine similarity of their semantic vectors to the
//! SROCC between opinion scores of their distorted versions, aligned by
//! `(distortion_type, distortion_level)` tag.

use std::collections::{BTreeMap, HashMap};
use std::fs::File;
use std::io::{self, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::distance::cosine_distance;
use crate::error::{Error, Result};
use crate::evaluation::{fit_logistic5, plcc, rmse, srocc};
use crate::store::{FeatureStore, StoreMode};

/// Which side's top-n list contains the other group.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum TopNMembership {
    /// `group_b` is among the top-n of `group_a` only.
    First,
    /// `group_a` is among the top-n of `group_b` only.
    Second,
    Both,
}

#[derive(Clone, Debug, PartialEq)]
pub struct SimilarPair {
    pub group_a: String,
    pub group_b: String,
    pub similarity: f64,
    pub membership: TopNMembership,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ConsistencyPoint {
    pub group_a: String,
    pub group_b: String,
    pub semantic_similarity: f64,
    pub aligned_srocc: f64,
    pub n_aligned: usize,
}

type AlignKey<'a> = (&'a str, u32);

fn alignment_table<'a>(store: &'a FeatureStore, group_id: &str) -> Result<BTreeMap<AlignKey<'a>, f64>> {
    let group = store
        .group(group_id)
        .ok_or_else(|| Error::UnknownGroup(group_id.to_string()))?;
    let mut table = BTreeMap::new();
    for &r in &group.distorted {
        let rec = &store.records()[r];
        if let (Some(kind), Some(level)) = (rec.distortion_type.as_deref(), rec.distortion_level) {
            table.entry((kind, level)).or_insert(rec.score());
        }
    }
    Ok(table)
}

fn pristine_groups(store: &FeatureStore) -> Result<Vec<(usize, &str)>> {
    if store.mode() != StoreMode::Synthetic {
        return Err(Error::WrongMode {
            expected: "synthetic",
        });
    }
    let groups: Vec<(usize, &str)> = store
        .groups()
        .iter()
        .filter_map(|g| g.pristine.map(|p| (p, g.id.as_str())))
        .collect();
    if groups.len() < 2 {
        return Err(Error::InsufficientGroups(groups.len()));
    }
    Ok(groups)
}

/// For every pristine group, its `top_n` most similar other groups by cosine
/// similarity of semantic vectors. Each unordered pair appears once, with
/// `group_a` the earlier group in canonical order; the result is sorted by
/// descending similarity.
pub fn pristine_similarity_pairs(store: &FeatureStore, top_n: usize) -> Result<Vec<SimilarPair>> {
    let groups = pristine_groups(store)?;
    let records = store.records();
    let n = groups.len();
    let mut sim = vec![vec![0.0f64; n]; n];
    for i in 0..n {
        for j in (i + 1)..n {
            let d = cosine_distance(&records[groups[i].0].semantic, &records[groups[j].0].semantic)?;
            sim[i][j] = 1.0 - d;
            sim[j][i] = 1.0 - d;
        }
    }

    // (i, j) with i < j -> (i lists j, j lists i)
    let mut pairs: BTreeMap<(usize, usize), (bool, bool)> = BTreeMap::new();
    for (i, row) in sim.iter().enumerate() {
        let mut others: Vec<usize> = (0..n).filter(|&j| j != i).collect();
        others.sort_by(|&a, &b| row[b].total_cmp(&row[a]).then(a.cmp(&b)));
        for &j in others.iter().take(top_n) {
            let key = (i.min(j), i.max(j));
            let entry = pairs.entry(key).or_default();
            if i < j {
                entry.0 = true;
            } else {
                entry.1 = true;
            }
        }
    }

    let mut out: Vec<((usize, usize), SimilarPair)> = pairs
        .into_iter()
        .map(|((i, j), (first, second))| {
            let membership = match (first, second) {
                (true, true) => TopNMembership::Both,
                (true, false) => TopNMembership::First,
                _ => TopNMembership::Second,
            };
            (
                (i, j),
                SimilarPair {
                    group_a: groups[i].1.to_string(),
                    group_b: groups[j].1.to_string(),
                    similarity: sim[i][j],
                    membership,
                },
            )
        })
        .collect();
    out.sort_by(|a, b| b.1.similarity.total_cmp(&a.1.similarity).then(a.0.cmp(&b.0)));
    Ok(out.into_iter().map(|(_, p)| p).collect())
}

/// SROCC between the opinion scores of two groups' distorted records that
/// share a `(distortion_type, distortion_level)` tag, with the number of
/// aligned cells.
pub fn aligned_quality_correlation(
    store: &FeatureStore,
    group_a: &str,
    group_b: &str,
) -> Result<(f64, usize)> {
    let ta = alignment_table(store, group_a)?;
    let tb = alignment_table(store, group_b)?;
    let (mut xa, mut xb) = (Vec::new(), Vec::new());
    for (key, &mos) in &ta {
        if let Some(&other) = tb.get(key) {
            xa.push(mos);
            xb.push(other);
        }
    }
    if xa.len() < 2 {
        return Err(Error::InsufficientAlignment {
            group_a: group_a.to_string(),
            group_b: group_b.to_string(),
            n_aligned: xa.len(),
        });
    }
    Ok((srocc(&xa, &xb)?, xa.len()))
}

/// Similarity pairs joined with their aligned quality correlation. Pairs
/// without a defined correlation (too few aligned cells, constant scores)
/// are skipped.
pub fn consistency_points(store: &FeatureStore, top_n: usize) -> Result<Vec<ConsistencyPoint>> {
    let mut points = Vec::new();
    for pair in pristine_similarity_pairs(store, top_n)? {
        match aligned_quality_correlation(store, &pair.group_a, &pair.group_b) {
            Ok((aligned_srocc, n_aligned)) => points.push(ConsistencyPoint {
                group_a: pair.group_a,
                group_b: pair.group_b,
                semantic_similarity: pair.similarity,
                aligned_srocc,
                n_aligned,
            }),
            Err(Error::InsufficientAlignment { .. } | Error::DegenerateInput(_)) => {}
            Err(e) => return Err(e),
        }
    }
    Ok(points)
}

#[derive(Clone, Debug, PartialEq)]
pub struct SiEvaluation {
    pub srocc: f64,
    /// After logistic mapping (raw if the fit fails).
    pub plcc: f64,
    /// After logistic mapping (raw if the fit fails).
    pub rmse: f64,
    pub n: usize,
}

/// Uses the aligned record of a partner group as the prediction for every
/// distorted record of each paired group. SROCC is computed on raw
/// predictions; PLCC and RMSE after a five-parameter logistic mapping.
pub fn si_predictor_eval(
    store: &FeatureStore,
    pairing: &BTreeMap<String, String>,
) -> Result<SiEvaluation> {
    let mut predicted = Vec::new();
    let mut truth = Vec::new();
    for (group_id, partner) in pairing {
        let group = store
            .group(group_id)
            .ok_or_else(|| Error::UnknownGroup(group_id.clone()))?;
        let table = alignment_table(store, partner)?;
        for &r in &group.distorted {
            let rec = &store.records()[r];
            let key = rec.distortion_type.as_deref().zip(rec.distortion_level);
            let Some(&si_mos) = key.and_then(|k| table.get(&k)) else {
                return Err(Error::MissingAlignment {
                    record_id: rec.record_id.clone(),
                    partner: partner.clone(),
                });
            };
            predicted.push(si_mos);
            truth.push(rec.score());
        }
    }
    let s = srocc(&predicted, &truth)?;
    let mapped = match fit_logistic5(&predicted, &truth) {
        Ok(fit) => fit.mapped,
        Err(Error::FitDiverged) => predicted.clone(),
        Err(e) => return Err(e),
    };
    Ok(SiEvaluation {
        srocc: s,
        plcc: plcc(&mapped, &truth)?,
        rmse: rmse(&mapped, &truth)?,
        n: predicted.len(),
    })
}

/// Parses a `group,partner` CSV (header optional, `#` comments allowed).
pub fn parse_pairing(text: &str) -> Result<BTreeMap<String, String>> {
    let mut reader = csv::ReaderBuilder::new()
        .has_headers(false)
        .comment(Some(b'#'))
        .trim(csv::Trim::All)
        .from_reader(text.as_bytes());
    let mut map = BTreeMap::new();
    for row in reader.records() {
        let row = row.map_err(|e| Error::InvalidConfig(format!("pairing file: {e}")))?;
        if row.len() != 2 {
            return Err(Error::InvalidConfig(format!(
                "pairing file: expected 2 columns, found {}",
                row.len()
            )));
        }
        if &row[0] == "group" && &row[1] == "partner" {
            continue;
        }
        map.insert(row[0].to_string(), row[1].to_string());
    }
    Ok(map)
}

/// Writes scatter points as CSV, sorted by descending similarity, after a
/// `#`-prefixed comment line.
pub fn write_scatter<W: Write>(points: &[ConsistencyPoint], comment: &str, mut w: W) -> Result<()> {
    writeln!(w, "# {comment}")?;
    let mut sorted: Vec<&ConsistencyPoint> = points.iter().collect();
    sorted.sort_by(|a, b| {
        b.semantic_similarity
            .total_cmp(&a.semantic_similarity)
            .then_with(|| a.group_a.cmp(&b.group_a))
            .then_with(|| a.group_b.cmp(&b.group_b))
    });
    let mut writer = csv::Writer::from_writer(w);
    for p in sorted {
        writer.serialize(p).map_err(csv_err)?;
    }
    writer.flush()?;
    Ok(())
}

pub fn emit_scatter(points: &[ConsistencyPoint], path: impl AsRef<Path>, comment: &str) -> Result<()> {
    if points.is_empty() {
        return Err(Error::DegenerateInput("no scatter points"));
    }
    let file = File::create(path)?;
    write_scatter(points, comment, io::BufWriter::new(file))
}

pub fn parse_scatter(text: &str) -> Result<Vec<ConsistencyPoint>> {
    let mut reader = csv::ReaderBuilder::new()
        .comment(Some(b'#'))
        .from_reader(text.as_bytes());
    reader
        .deserialize()
        .map(|row| row.map_err(csv_err))
        .collect()
}

fn csv_err(e: csv::Error) -> Error {
    match e.into_kind() {
        csv::ErrorKind::Io(io) => Error::Io(io),
        other => Error::CorruptManifest(format!("{other:?}")),
    }
}

/// Pairs each group with its most semantically similar other group that
/// carries every one of its distortion tags. Groups without such a partner
/// are left out.
pub fn nearest_aligned_pairing(store: &FeatureStore) -> Result<BTreeMap<String, String>> {
    let groups = pristine_groups(store)?;
    let records = store.records();
    let tables: HashMap<&str, BTreeMap<AlignKey<'_>, f64>> = groups
        .iter()
        .map(|&(_, id)| alignment_table(store, id).map(|t| (id, t)))
        .collect::<Result<_>>()?;
    let mut pairing = BTreeMap::new();
    for &(pi, gi) in &groups {
        let mut best: Option<(f64, &str)> = None;
        for &(pj, gj) in &groups {
            if gi == gj || !tables[gi].keys().all(|k| tables[gj].contains_key(k)) {
                continue;
            }
            let s = 1.0 - cosine_distance(&records[pi].semantic, &records[pj].semantic)?;
            if best.is_none_or(|(b, _)| s > b) {
                best = Some((s, gj));
            }
        }
        if let Some((_, partner)) = best {
            pairing.insert(gi.to_string(), partner.to_string());
        }
    }
    Ok(pairing)
}
