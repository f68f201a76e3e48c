//! Name-keyed registries of interchangeable strategies.
//!
//! Distance metrics, retrieval modes and score aggregators are each a trait
//! object family. [`Strategies::builtin`] registers the stock
//! implementations; callers may register more before resolving names coming
//! from configuration or the command line.

use std::sync::Arc;

use crate::distance::{Cosine, Euclidean, JsDivergence, Manhattan, Metric};
use crate::error::{Error, Result};
use crate::prediction::{Aggregator, SimpleAverage, WeightedAverage};
use crate::retrieval::{FlatConcat, Hierarchical, RetrievalMode};

pub struct Registry<T: ?Sized> {
    kind: &'static str,
    entries: Vec<(String, Arc<T>)>,
}

impl<T: ?Sized> Registry<T> {
    pub fn new(kind: &'static str) -> Self {
        Self {
            kind,
            entries: Vec::new(),
        }
    }

    /// Registers `item` under `name`, replacing any earlier entry.
    pub fn register(&mut self, name: impl Into<String>, item: Arc<T>) {
        let name = name.into();
        match self.entries.iter_mut().find(|(n, _)| *n == name) {
            Some(slot) => slot.1 = item,
            None => self.entries.push((name, item)),
        }
    }

    pub fn get(&self, name: &str) -> Result<Arc<T>> {
        self.entries
            .iter()
            .find(|(n, _)| n == name)
            .map(|(_, item)| Arc::clone(item))
            .ok_or_else(|| Error::UnknownStrategy {
                kind: self.kind,
                name: name.to_string(),
                available: self.names().join(", "),
            })
    }

    /// Registered names in registration order.
    pub fn names(&self) -> Vec<&str> {
        self.entries.iter().map(|(n, _)| n.as_str()).collect()
    }
}

pub struct Strategies {
    pub metrics: Registry<dyn Metric>,
    pub modes: Registry<dyn RetrievalMode>,
    pub aggregators: Registry<dyn Aggregator>,
}

impl Strategies {
    pub fn empty() -> Self {
        Self {
            metrics: Registry::new("metric"),
            modes: Registry::new("retrieval mode"),
            aggregators: Registry::new("aggregation"),
        }
    }

    pub fn builtin() -> Self {
        let mut s = Self::empty();
        let metrics: [Arc<dyn Metric>; 4] = [
            Arc::new(Cosine),
            Arc::new(Euclidean),
            Arc::new(Manhattan),
            Arc::new(JsDivergence),
        ];
        for m in metrics {
            s.metrics.register(m.name(), m);
        }
        let modes: [Arc<dyn RetrievalMode>; 2] = [Arc::new(Hierarchical), Arc::new(FlatConcat)];
        for m in modes {
            s.modes.register(m.name(), m);
        }
        let aggregators: [Arc<dyn Aggregator>; 2] =
            [Arc::new(SimpleAverage), Arc::new(WeightedAverage)];
        for a in aggregators {
            s.aggregators.register(a.name(), a);
        }
        s
    }
}

impl Default for Strategies {
    fn default() -> Self {
        Self::builtin()
    }
}
