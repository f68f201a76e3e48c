//! Planted feature stores with known quality structure.
//!
//! Used for smoke tests, documentation and the acceptance suite. Feature
//! vectors are non-negative and made of smooth bumps, resembling pooled CNN
//! activations closely enough that max-pool reduction keeps them apart.
//!
//! * Semantic vectors: every group belongs to a content archetype. An
//!   archetype is a sum of Gaussian bumps at random positions; a group
//!   perturbs its archetype multiplicatively, and each distorted record adds
//!   a little noise on top of its group's vector.
//! * Distortion vectors: the vector is split into one block per distortion
//!   type, and the level selects the position of a bump inside that block.
//! * Scores: `mos = f(archetype, type, level) + N(0, (noise_frac * range)²)`
//!   where `range` is the spread of the noise-free table `f`.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};

use crate::store::{build_store, FeatureRecord, FeatureStore, StoreManifest, StoreMode};

#[derive(Clone, Debug)]
pub struct PlantedSpec {
    pub name: String,
    pub n_groups: usize,
    pub n_archetypes: usize,
    pub n_types: usize,
    pub n_levels: usize,
    pub semantic_dim: usize,
    pub distortion_dim: usize,
    /// Score noise standard deviation as a fraction of the score range.
    pub noise_frac: f64,
    /// Extra score noise (fraction of range) applied to one distortion type.
    pub noisy_type: Option<(usize, f64)>,
    pub seed: u64,
}

impl PlantedSpec {
    /// 50 groups of 20 distorted records (4 types x 5 levels), 10 archetypes.
    pub fn acceptance() -> Self {
        Self {
            name: "planted".into(),
            n_groups: 50,
            n_archetypes: 10,
            n_types: 4,
            n_levels: 5,
            semantic_dim: 512,
            distortion_dim: 512,
            noise_frac: 0.1,
            noisy_type: None,
            seed: 2024,
        }
    }

    /// The small fixture shipped with the repository: 8 groups x 6 records.
    pub fn toy() -> Self {
        Self {
            name: "toy".into(),
            n_groups: 8,
            n_archetypes: 2,
            n_types: 2,
            n_levels: 3,
            semantic_dim: 32,
            distortion_dim: 24,
            noise_frac: 0.05,
            noisy_type: None,
            seed: 7,
        }
    }

    pub fn records_per_group(&self) -> usize {
        self.n_types * self.n_levels
    }
}

fn bump(v: &mut [f32], center: f64, width: f64, amp: f64) {
    for (i, x) in v.iter_mut().enumerate() {
        let z = (i as f64 - center) / width;
        *x += (amp * (-0.5 * z * z).exp()) as f32;
    }
}

fn type_name(t: usize) -> String {
    format!("type{t:02}")
}

/// Builds a store from `spec`. Identical specs give identical stores.
pub fn planted_store(spec: &PlantedSpec) -> FeatureStore {
    let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
    let std_normal = Normal::new(0.0, 1.0).unwrap();
    let ds = spec.semantic_dim;
    let dd = spec.distortion_dim;

    let archetypes: Vec<Vec<f32>> = (0..spec.n_archetypes)
        .map(|_| {
            let mut v = vec![0.02f32; ds];
            for _ in 0..3 {
                let center = rng.random_range(0.0..ds as f64);
                let amp = rng.random_range(0.5..1.5);
                bump(&mut v, center, (ds as f64 / 48.0).max(1.0), amp);
            }
            v
        })
        .collect();

    let block = dd / spec.n_types.max(1);
    let distortion_profile = |t: usize, l: usize| -> Vec<f32> {
        let mut v = vec![0.01f32; dd];
        let center = t as f64 * block as f64 + (l as f64 + 0.5) * block as f64 / spec.n_levels as f64;
        let width = (block as f64 / (6.0 * spec.n_levels as f64)).max(0.5);
        bump(&mut v, center, width, 1.0);
        v
    };

    // noise-free score table
    let arch_sensitivity: Vec<f64> = (0..spec.n_archetypes).map(|_| rng.random_range(0.85..1.15)).collect();
    let arch_offset: Vec<f64> = (0..spec.n_archetypes).map(|_| rng.random_range(-4.0..4.0)).collect();
    let type_severity: Vec<f64> = (0..spec.n_types).map(|_| rng.random_range(0.75..1.0)).collect();
    let quality = |a: usize, t: usize, l: usize| -> f64 {
        let level = (l + 1) as f64 / spec.n_levels as f64;
        85.0 + arch_offset[a] - 60.0 * level * type_severity[t] * arch_sensitivity[a]
    };
    let (mut lo, mut hi) = (f64::INFINITY, f64::NEG_INFINITY);
    for a in 0..spec.n_archetypes {
        for t in 0..spec.n_types {
            for l in 0..spec.n_levels {
                let q = quality(a, t, l);
                lo = lo.min(q);
                hi = hi.max(q);
            }
        }
    }
    let range = hi - lo;

    let mut records = Vec::new();
    for g in 0..spec.n_groups {
        let a = g % spec.n_archetypes;
        let gid = format!("{}_g{g:03}", spec.name);
        let pristine: Vec<f32> = archetypes[a]
            .iter()
            .map(|&x| (x * (1.0 + 0.05 * std_normal.sample(&mut rng) as f32)).max(0.0))
            .collect();
        records.push(FeatureRecord::pristine(gid.clone(), pristine.clone()));
        for t in 0..spec.n_types {
            for l in 0..spec.n_levels {
                let semantic: Vec<f32> = pristine
                    .iter()
                    .map(|&x| (x + 0.01 * std_normal.sample(&mut rng) as f32).max(0.0))
                    .collect();
                let distortion: Vec<f32> = distortion_profile(t, l)
                    .into_iter()
                    .map(|x| (x + 0.01 * std_normal.sample(&mut rng) as f32).max(0.0))
                    .collect();
                let mut sigma = spec.noise_frac * range;
                if let Some((noisy, extra)) = spec.noisy_type {
                    if noisy == t {
                        sigma = (sigma * sigma + (extra * range).powi(2)).sqrt();
                    }
                }
                let mos = quality(a, t, l) + sigma * std_normal.sample(&mut rng);
                records.push(
                    FeatureRecord::distorted(format!("{gid}_t{t}_l{}", l + 1), gid.clone(), semantic, distortion, mos)
                        .with_distortion_tag(type_name(t), (l + 1) as u32),
                );
            }
        }
    }
    build_store(records, StoreManifest::new(spec.name.clone(), StoreMode::Synthetic, ds, dd))
        .expect("planted records are consistent")
}

/// A store for the consistency analysis: each group mixes two unrelated
/// score tables with weight `w`, and its semantic direction rotates with `w`,
/// so semantically close groups share score patterns.
pub fn interpolated_store(n_groups: usize, seed: u64) -> FeatureStore {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let std_normal = Normal::new(0.0, 1.0).unwrap();
    let (n_types, n_levels, ds) = (6usize, 4usize, 64usize);
    let dd = n_types * 8;
    let cells = n_types * n_levels;
    let table_a: Vec<f64> = (0..cells).map(|_| rng.random_range(0.0..100.0)).collect();
    let table_b: Vec<f64> = (0..cells).map(|_| rng.random_range(0.0..100.0)).collect();

    let mut records = Vec::new();
    for g in 0..n_groups {
        let w = g as f64 / (n_groups - 1).max(1) as f64;
        let theta = w * std::f64::consts::FRAC_PI_2;
        let mut semantic = vec![0.0f32; ds];
        semantic[0] = theta.cos() as f32;
        semantic[1] = theta.sin() as f32;
        for x in semantic.iter_mut().skip(2) {
            *x = (0.02 * std_normal.sample(&mut rng)) as f32;
        }
        let gid = format!("mix_g{g:03}");
        records.push(FeatureRecord::pristine(gid.clone(), semantic.clone()));
        for t in 0..n_types {
            for l in 0..n_levels {
                let cell = t * n_levels + l;
                let mut distortion = vec![0.0f32; dd];
                distortion[t * 8 + l] = 1.0;
                let mos = (1.0 - w) * table_a[cell] + w * table_b[cell] + 3.0 * std_normal.sample(&mut rng);
                records.push(
                    FeatureRecord::distorted(
                        format!("{gid}_t{t}_l{}", l + 1),
                        gid.clone(),
                        semantic.clone(),
                        distortion,
                        mos,
                    )
                    .with_distortion_tag(type_name(t), (l + 1) as u32),
                );
            }
        }
    }
    build_store(records, StoreManifest::new("interpolated", StoreMode::Synthetic, ds, dd))
        .expect("interpolated records are consistent")
}

/// An authentic-mode store: singleton records whose score follows a smooth
/// function of their features.
pub fn authentic_store(n_records: usize, seed: u64) -> FeatureStore {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let (ds, dd) = (16usize, 8usize);
    let records = (0..n_records)
        .map(|i| {
            let content: f64 = rng.random_range(0.0..1.0);
            let degradation: f64 = rng.random_range(0.0..1.0);
            let mut semantic = vec![0.05f32; ds];
            bump(&mut semantic, content * ds as f64, 1.5, 1.0);
            let mut distortion = vec![0.05f32; dd];
            bump(&mut distortion, degradation * dd as f64, 1.0, 1.0);
            let mos = 5.0 - 3.5 * degradation - 0.5 * content + rng.random_range(-0.1..0.1);
            let id = format!("wild{i:05}");
            FeatureRecord::distorted(id.clone(), id, semantic, distortion, mos)
        })
        .collect();
    build_store(records, StoreManifest::new("wild", StoreMode::Authentic, ds, dd))
        .expect("authentic records are consistent")
}
