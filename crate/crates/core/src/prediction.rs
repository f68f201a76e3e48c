//! Turning retrieved instances into a quality score.

use std::fmt;

use crate::error::{Error, Result};
use crate::retrieval::{Query, RetrievalConfig, RetrievedInstance};
use crate::store::FeatureStore;

/// Added to every distance before inversion so an exact duplicate (distance
/// zero) dominates without dividing by zero.
pub const WEIGHT_EPSILON: f64 = 1e-12;

/// Neumaier-compensated sum.
pub(crate) fn compensated_sum(values: impl IntoIterator<Item = f64>) -> f64 {
    let mut sum = 0.0f64;
    let mut comp = 0.0f64;
    for v in values {
        let t = sum + v;
        if sum.abs() >= v.abs() {
            comp += (sum - t) + v;
        } else {
            comp += (v - t) + sum;
        }
        sum = t;
    }
    sum + comp
}

fn mos_range(instances: &[RetrievedInstance]) -> (f64, f64) {
    instances.iter().fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), i| {
        (lo.min(i.mos), hi.max(i.mos))
    })
}

pub trait Aggregator: Send + Sync + fmt::Debug {
    fn name(&self) -> &'static str;

    fn aggregate(&self, instances: &[RetrievedInstance]) -> Result<f64>;
}

/// Arithmetic mean of the retrieved opinion scores. The divisor is the number
/// of instances actually retrieved.
pub fn aggregate_simple(instances: &[RetrievedInstance]) -> Result<f64> {
    if instances.is_empty() {
        return Err(Error::EmptyInstanceList);
    }
    let mean = compensated_sum(instances.iter().map(|i| i.mos)) / instances.len() as f64;
    let (lo, hi) = mos_range(instances);
    Ok(mean.clamp(lo, hi))
}

/// Inverse-distance weighted mean with weights `1 / (d_s + d_d + ε)`.
pub fn aggregate_weighted(instances: &[RetrievedInstance]) -> Result<f64> {
    if instances.is_empty() {
        return Err(Error::EmptyInstanceList);
    }
    let weights: Vec<f64> = instances
        .iter()
        .map(|i| 1.0 / (i.total_distance() + WEIGHT_EPSILON))
        .collect();
    let num = compensated_sum(weights.iter().zip(instances).map(|(w, i)| w * i.mos));
    let den = compensated_sum(weights.iter().copied());
    let (lo, hi) = mos_range(instances);
    Ok((num / den).clamp(lo, hi))
}

#[derive(Debug, Default, Clone, Copy)]
pub struct SimpleAverage;

#[derive(Debug, Default, Clone, Copy)]
pub struct WeightedAverage;

impl Aggregator for SimpleAverage {
    fn name(&self) -> &'static str {
        "simple"
    }
    fn aggregate(&self, instances: &[RetrievedInstance]) -> Result<f64> {
        aggregate_simple(instances)
    }
}

impl Aggregator for WeightedAverage {
    fn name(&self) -> &'static str {
        "weighted"
    }
    fn aggregate(&self, instances: &[RetrievedInstance]) -> Result<f64> {
        aggregate_weighted(instances)
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct PredictionResult {
    pub score: f64,
    pub instances: Vec<RetrievedInstance>,
    pub aggregation: &'static str,
}

/// Retrieves with `config.mode` and aggregates with `aggregator`. A pool
/// with nothing eligible to retrieve is reported as `EmptyInstanceList`.
pub fn predict(
    store: &FeatureStore,
    query: &Query<'_>,
    config: &RetrievalConfig,
    aggregator: &dyn Aggregator,
) -> Result<PredictionResult> {
    let instances = match config.mode.retrieve(store, query, config) {
        Err(Error::NoEligibleGroups) => return Err(Error::EmptyInstanceList),
        other => other?,
    };
    let score = aggregator.aggregate(&instances)?;
    Ok(PredictionResult {
        score,
        instances,
        aggregation: aggregator.name(),
    })
}
