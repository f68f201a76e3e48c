//! On-disk store layout.
//!
//! A store directory holds two files:
//!
//! * `manifest.json`: the [`StoreManifest`] fields plus one entry per record in
//!   canonical order with its identity, role, score, distortion tags and the
//!   byte offsets of its vectors inside `vectors.bin`.
//! * `vectors.bin`: the 8-byte magic `RFIQAFS1`, a little-endian `u32` format
//!   version, then for every record its semantic vector followed by its
//!   distortion vector, packed as little-endian `f32`.
//!
//! Offsets are absolute byte positions in `vectors.bin` and must match the
//! packed layout exactly.

use std::fs;
use std::io::{BufWriter, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::{build_store, FeatureRecord, FeatureStore, Role, StoreManifest};
use crate::error::{Error, Result};

pub const MAGIC: &[u8; 8] = b"RFIQAFS1";
pub const FORMAT_VERSION: u32 = 1;
pub const MANIFEST_FILE: &str = "manifest.json";
pub const VECTORS_FILE: &str = "vectors.bin";

const HEADER_LEN: u64 = 12;

#[derive(Serialize, Deserialize)]
struct ManifestFile {
    #[serde(flatten)]
    manifest: StoreManifest,
    records: Vec<RecordEntry>,
}

#[derive(Serialize, Deserialize)]
struct RecordEntry {
    record_id: String,
    group_id: String,
    role: Role,
    mos: Option<f64>,
    distortion_type: Option<String>,
    distortion_level: Option<u32>,
    semantic_offset: u64,
    distortion_offset: u64,
    distortion_len: usize,
}

pub fn save_store(store: &FeatureStore, dir: impl AsRef<Path>) -> Result<()> {
    let dir = dir.as_ref();
    fs::create_dir_all(dir)?;

    let mut entries = Vec::with_capacity(store.len());
    let mut vectors = BufWriter::new(fs::File::create(dir.join(VECTORS_FILE))?);
    vectors.write_all(MAGIC)?;
    vectors.write_all(&store.manifest().format_version.to_le_bytes())?;
    let mut cursor = HEADER_LEN;
    for rec in store.records() {
        let semantic_offset = cursor;
        for x in &rec.semantic {
            vectors.write_all(&x.to_le_bytes())?;
        }
        cursor += 4 * rec.semantic.len() as u64;
        let distortion_offset = cursor;
        for x in &rec.distortion {
            vectors.write_all(&x.to_le_bytes())?;
        }
        cursor += 4 * rec.distortion.len() as u64;
        entries.push(RecordEntry {
            record_id: rec.record_id.clone(),
            group_id: rec.group_id.clone(),
            role: rec.role,
            mos: rec.mos,
            distortion_type: rec.distortion_type.clone(),
            distortion_level: rec.distortion_level,
            semantic_offset,
            distortion_offset,
            distortion_len: rec.distortion.len(),
        });
    }
    vectors.flush()?;

    let file = ManifestFile {
        manifest: store.manifest().clone(),
        records: entries,
    };
    let mut text = serde_json::to_string_pretty(&file)
        .map_err(|e| Error::InvalidManifest(e.to_string()))?;
    text.push('\n');
    fs::write(dir.join(MANIFEST_FILE), text)?;
    Ok(())
}

pub fn load_store(dir: impl AsRef<Path>) -> Result<FeatureStore> {
    let dir = dir.as_ref();
    let text = fs::read_to_string(dir.join(MANIFEST_FILE))?;
    let bytes = fs::read(dir.join(VECTORS_FILE))?;
    parse_store(&text, &bytes)
}

/// Decodes a store from the manifest text and the raw vectors file.
pub fn parse_store(manifest_text: &str, bytes: &[u8]) -> Result<FeatureStore> {
    if bytes.len() < HEADER_LEN as usize || &bytes[..8] != MAGIC {
        return Err(Error::BadMagic);
    }
    let version = u32::from_le_bytes(bytes[8..12].try_into().unwrap());
    if version != FORMAT_VERSION {
        return Err(Error::UnsupportedVersion(version));
    }

    let file: ManifestFile =
        serde_json::from_str(manifest_text).map_err(|e| Error::CorruptManifest(e.to_string()))?;
    if file.manifest.format_version != version {
        return Err(Error::UnsupportedVersion(file.manifest.format_version));
    }

    let ds = file.manifest.semantic_dim;
    let total = bytes.len() as u64;
    let mut cursor = HEADER_LEN;
    let mut records = Vec::with_capacity(file.records.len());
    for entry in file.records {
        if entry.semantic_offset != cursor {
            return Err(Error::CorruptManifest(format!(
                "record `{}`: semantic offset {} but expected {}",
                entry.record_id, entry.semantic_offset, cursor
            )));
        }
        let semantic_end = cursor + 4 * ds as u64;
        if entry.distortion_offset != semantic_end {
            return Err(Error::CorruptManifest(format!(
                "record `{}`: distortion offset {} but expected {}",
                entry.record_id, entry.distortion_offset, semantic_end
            )));
        }
        let end = semantic_end + 4 * entry.distortion_len as u64;
        if end > total {
            return Err(Error::CorruptManifest(format!(
                "record `{}` extends past the end of the vectors file ({} > {} bytes)",
                entry.record_id, end, total
            )));
        }
        let semantic = decode_f32(&bytes[cursor as usize..semantic_end as usize]);
        let distortion = decode_f32(&bytes[semantic_end as usize..end as usize]);
        cursor = end;
        records.push(FeatureRecord {
            record_id: entry.record_id,
            group_id: entry.group_id,
            role: entry.role,
            semantic,
            distortion,
            mos: entry.mos,
            distortion_type: entry.distortion_type,
            distortion_level: entry.distortion_level,
        });
    }
    if cursor != total {
        return Err(Error::CorruptManifest(format!(
            "vectors file has {} bytes but the manifest accounts for {}",
            total, cursor
        )));
    }
    build_store(records, file.manifest)
}

fn decode_f32(bytes: &[u8]) -> Vec<f32> {
    bytes
        .chunks_exact(4)
        .map(|c| f32::from_le_bytes(c.try_into().unwrap()))
        .collect()
}
