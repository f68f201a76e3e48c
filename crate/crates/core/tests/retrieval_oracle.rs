mod common;

use rand::Rng;

use common::*;
use rfiqa::distance::Cosine;
use rfiqa::prediction::{predict, SimpleAverage, WeightedAverage};
use rfiqa::retrieval::{
    retrieve_distorted, retrieve_flat_concat, retrieve_hierarchical, retrieve_pristine, FlatConcat,
    Query, RetrievalConfig,
};
use rfiqa::store::{build_store, FeatureRecord, StoreManifest, StoreMode};
use rfiqa::synth::authentic_store;
use rfiqa::Error;
use std::sync::Arc;

#[test]
fn pristine_stage_matches_sort_oracle_on_50_groups() {
    let mut rng = rng(200);
    for _ in 0..20 {
        let store = random_synthetic_store(&mut rng, 50, 3);
        let q = random_vec(&mut rng, store.manifest().semantic_dim);
        let got = retrieve_pristine(&store, &q, 10, &Cosine, None).unwrap();
        let mut want: Vec<(f64, usize, String)> = store
            .groups()
            .iter()
            .map(|g| {
                let p = g.pristine.unwrap();
                (oracle_metric("cosine", &q, &store.records()[p].semantic), p, g.id.clone())
            })
            .collect();
        want.sort_by(|a, b| a.0.partial_cmp(&b.0).unwrap().then(a.1.cmp(&b.1)));
        assert_eq!(got.len(), 10);
        for (g, w) in got.iter().zip(&want) {
            assert_eq!(g.group_id, w.2);
            assert!((g.d_s - w.0).abs() < 1e-9);
        }
    }
}

#[test]
fn distortion_stage_matches_sort_oracle() {
    let mut rng = rng(201);
    for _ in 0..50 {
        let store = random_synthetic_store(&mut rng, 3, 24);
        let group = &store.groups()[rng.random_range(0..3)];
        let q = random_vec(&mut rng, store.manifest().distortion_dim);
        let got = retrieve_distorted(&store, &group.id, &q, 3, &Cosine).unwrap();
        let mut want: Vec<(f64, usize)> = group
            .distorted
            .iter()
            .map(|&i| (oracle_metric("cosine", &q, &store.records()[i].distortion), i))
            .collect();
        want.sort_by(|a, b| a.0.partial_cmp(&b.0).unwrap().then(a.1.cmp(&b.1)));
        assert_eq!(got.len(), want.len().min(3));
        for (g, w) in got.iter().zip(&want) {
            assert_eq!(g.record_id, store.records()[w.1].record_id);
            assert!((g.d_d - w.0).abs() < 1e-9);
        }
    }
}

#[test]
fn two_stage_matches_oracle_on_25_groups() {
    let mut rng = rng(202);
    let store = random_synthetic_store(&mut rng, 25, 24);
    for _ in 0..50 {
        let qs = random_vec(&mut rng, store.manifest().semantic_dim);
        let qd = random_vec(&mut rng, store.manifest().distortion_dim);
        let config = RetrievalConfig::new(10, 1).unwrap();
        let got = retrieve_hierarchical(&store, &Query::new(&qs, &qd), &config).unwrap();
        let want = oracle_hierarchical(&store, "cosine", &qs, &qd, 10, 1, None);
        assert_eq!(got.len(), 10);
        for (g, w) in got.iter().zip(&want) {
            assert_eq!((&g.record_id, &g.group_id), (&w.0, &w.1));
            assert!((g.d_s - w.2).abs() < 1e-9 && (g.d_d - w.3).abs() < 1e-9);
        }
        // distances ascend by group, siblings share their group's d_s
        assert!(got.windows(2).all(|p| p[0].d_s <= p[1].d_s));
    }
}

#[test]
fn flat_mode_on_authentic_store() {
    let store = authentic_store(200, 9);
    let mut rng = rng(203);
    for _ in 0..30 {
        let q = &store.records()[rng.random_range(0..200)];
        let config = RetrievalConfig::new(15, 1)
            .unwrap()
            .with_mode(Arc::new(FlatConcat))
            .excluding(Some(q.record_id.clone()));
        let got = retrieve_flat_concat(&store, &Query::from_record(q), &config).unwrap();
        assert_eq!(got.len(), 15);
        assert!(got.iter().all(|i| i.record_id != q.record_id && i.d_d == 0.0));
        assert!(got.windows(2).all(|p| p[0].d_s <= p[1].d_s));
        let want = oracle_flat(&store, "cosine", &q.semantic, &q.distortion, 15, Some(&q.record_id));
        for (g, w) in got.iter().zip(&want) {
            assert_eq!(g.record_id, w.0);
            assert!((g.d_s - w.2).abs() < 1e-9);
        }
    }
}

#[test]
fn retrieval_is_deterministic() {
    let mut rng = rng(204);
    let store = random_synthetic_store(&mut rng, 30, 10);
    let qs = random_vec(&mut rng, store.manifest().semantic_dim);
    let qd = random_vec(&mut rng, store.manifest().distortion_dim);
    let config = RetrievalConfig::new(5, 3).unwrap();
    let a = retrieve_hierarchical(&store, &Query::new(&qs, &qd), &config).unwrap();
    let b = retrieve_hierarchical(&store, &Query::new(&qs, &qd), &config).unwrap();
    assert_eq!(a, b);
}

#[test]
fn self_retrieval_returns_own_score() {
    let store = random_synthetic_store(&mut rng(205), 10, 5);
    let config = RetrievalConfig::new(1, 1).unwrap();
    for r in store.distorted() {
        // the pristine stage matches the record's own group only when its
        // semantic vector equals the pristine one; use the pristine vector
        let group = store.group(&r.group_id).unwrap();
        let pristine = &store.records()[group.pristine.unwrap()];
        let result = predict(&store, &Query::new(&pristine.semantic, &r.distortion), &config, &WeightedAverage).unwrap();
        assert_eq!(result.score, r.score());
        assert_eq!(result.instances[0].record_id, r.record_id);
    }
}

#[test]
fn empty_pool_is_a_prediction_failure() {
    let records = vec![
        FeatureRecord::pristine("a", vec![1.0, 0.0]),
        FeatureRecord::distorted("a1", "a", vec![1.0, 0.0], vec![0.5], 3.0),
    ];
    let store = build_store(records, StoreManifest::new("one", StoreMode::Synthetic, 2, 1)).unwrap();
    let config = RetrievalConfig::new(3, 1).unwrap().excluding(Some("a"));
    let q = Query::from_record(store.record("a1").unwrap());
    assert!(matches!(
        predict(&store, &q, &config, &SimpleAverage),
        Err(Error::EmptyInstanceList)
    ));
}
