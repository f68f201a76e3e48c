//! Regression-free blind image quality prediction.
//!
//! A query image is scored by retrieving annotated images that resemble it in
//! both content and distortion from a [`store::FeatureStore`], then averaging
//! their opinion scores. No quality regressor is trained; the store of
//! feature vectors and scores is the whole model.
//!
//! ```
//! use rfiqa::prediction::{predict, WeightedAverage};
//! use rfiqa::retrieval::{Query, RetrievalConfig};
//! use rfiqa::synth::{planted_store, PlantedSpec};
//!
//! let store = planted_store(&PlantedSpec::toy());
//! let query = store.record("toy_g003_t1_l2").unwrap();
//! let config = RetrievalConfig::new(4, 1)?.excluding(Some(query.group_id.clone()));
//! let result = predict(&store, &Query::from_record(query), &config, &WeightedAverage)?;
//! assert_eq!(result.instances.len(), 4);
//! # Ok::<(), rfiqa::Error>(())
//! ```

pub mod cli;
pub mod consistency;
pub mod distance;
pub mod error;
pub mod evaluation;
pub mod prediction;
pub mod registry;
pub mod retrieval;
pub mod store;
pub mod synth;

pub use error::{Error, Result};
pub use registry::Strategies;
