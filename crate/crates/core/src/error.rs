use std::io;

use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("duplicate record id `{0}`")]
    DuplicateRecordId(String),

    #[error("dimension mismatch for {context}: expected {expected}, got {actual}")]
    DimensionMismatch {
        context: String,
        expected: usize,
        actual: usize,
    },

    #[error("distorted record `{record_id}` references group `{group_id}` which has no pristine record")]
    OrphanDistortedRecord { record_id: String, group_id: String },

    #[error("group `{0}` has more than one pristine record")]
    DuplicatePristine(String),

    #[error("distorted record `{0}` has no finite opinion score")]
    MissingMos(String),

    #[error("record `{0}` contains a non-finite feature value")]
    NonFiniteFeature(String),

    #[error("pristine record `{0}` is not allowed in an authentic store")]
    PristineInAuthentic(String),

    #[error("store has no records")]
    EmptyStore,

    #[error("invalid manifest: {0}")]
    InvalidManifest(String),

    #[error("I/O error: {0}")]
    Io(#[from] io::Error),

    #[error("bad magic in vectors file")]
    BadMagic,

    #[error("unsupported store format version {0}")]
    UnsupportedVersion(u32),

    #[error("CorruptManifest: {0}")]
    CorruptManifest(String),

    #[error("invalid reduction factor {0}, must be >= 1")]
    InvalidFactor(usize),

    #[error("invalid fraction {0}, must lie in (0, 1)")]
    InvalidFraction(f64),

    #[error("split leaves the {0} side without distorted records")]
    EmptySplit(&'static str),

    #[error("vector length mismatch: {left} vs {right}")]
    LengthMismatch { left: usize, right: usize },

    #[error("no eligible groups to retrieve from")]
    NoEligibleGroups,

    #[error("unknown group `{0}`")]
    UnknownGroup(String),

    #[error("unknown record `{0}`")]
    UnknownRecord(String),

    #[error("operation requires a {expected} store")]
    WrongMode { expected: &'static str },

    #[error("no instances to aggregate")]
    EmptyInstanceList,

    #[error("degenerate input: {0}")]
    DegenerateInput(&'static str),

    #[error("logistic fit diverged")]
    FitDiverged,

    #[error("need at least two pristine groups, found {0}")]
    InsufficientGroups(usize),

    #[error("groups `{group_a}` and `{group_b}` share only {n_aligned} aligned distortions")]
    InsufficientAlignment {
        group_a: String,
        group_b: String,
        n_aligned: usize,
    },

    #[error("record `{record_id}` has no aligned counterpart in group `{partner}`")]
    MissingAlignment { record_id: String, partner: String },

    #[error("unknown {kind} `{name}` (available: {available})")]
    UnknownStrategy {
        kind: &'static str,
        name: String,
        available: String,
    },

    #[error("invalid configuration: {0}")]
    InvalidConfig(String),

    #[error("every repeat failed")]
    NoSuccessfulRepeats,
}
