//! Seeded synthetic galleries with the shape of a real one: a catalog of
//! images, a purchase log and an embedding file.
//!
//! Items belong to `clusters` groups in embedding space and vary within a
//! group along a few shared latent directions. Each user picks one
//! cluster, anchors on one of its items and buys from that anchor's nearest
//! neighbors over several sessions, so purchase histories are predictable from
//! embeddings. The images are random textures unrelated to the clusters,
//! which makes explicit visual features uninformative by construction.

use std::path::{Path, PathBuf};

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};

use crate::eval::TransactionLog;
use crate::store::{write_embeddings_csv, Catalog, CatalogEntry, FeatureKind, FeatureStore};
use crate::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SynthConfig {
    pub clusters: usize,
    pub items: usize,
    pub users: usize,
    /// Embedding width.
    pub dim: usize,
    /// Side length of the square images.
    pub image_size: u32,
    /// Size of the neighborhood a user buys from.
    pub neighborhood: usize,
    pub max_sessions: usize,
    pub max_items_per_session: usize,
    /// Standard deviation of cluster center coordinates.
    pub center_scale: f64,
    /// Number of latent style directions items vary along within a cluster.
    pub latent_dim: usize,
    /// Isotropic noise added on top of the latent style.
    pub noise: f64,
    pub seed: u64,
}

impl Default for SynthConfig {
    fn default() -> Self {
        Self {
            clusters: 2,
            items: 100,
            users: 50,
            dim: 64,
            image_size: 32,
            neighborhood: 8,
            max_sessions: 4,
            max_items_per_session: 2,
            center_scale: 3.0,
            latent_dim: 4,
            noise: 0.25,
            seed: 0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SynthFiles {
    pub catalog: PathBuf,
    pub transactions: PathBuf,
    pub embeddings: PathBuf,
}

/// In-memory synthetic dataset.
#[derive(Debug, Clone)]
pub struct SynthDataset {
    pub embeddings: FeatureStore,
    /// Cluster of each item, in store order.
    pub item_clusters: Vec<usize>,
    pub log: TransactionLog,
    /// RGB texture of each item, `image_size²·3` bytes.
    pub images: Vec<Vec<u8>>,
    pub image_size: u32,
}

pub fn item_id(i: usize) -> String {
    format!("item_{i:04}")
}

fn validate(config: &SynthConfig) -> Result<()> {
    let bad = |msg: &str| Err(Error::Contract(msg.to_string()));
    if config.clusters == 0 {
        return bad("at least one cluster is required");
    }
    if config.items < config.clusters {
        return bad("need at least one item per cluster");
    }
    if !(config.center_scale >= 0.0 && config.noise >= 0.0) {
        return bad("center scale and noise must be non-negative");
    }
    if config.dim == 0 {
        return bad("embedding dimension must be positive");
    }
    if config.image_size < 3 {
        return bad("images must be at least 3x3");
    }
    if config.neighborhood == 0 || config.max_sessions == 0 || config.max_items_per_session == 0 {
        return bad("neighborhood, sessions and items per session must be positive");
    }
    Ok(())
}

pub fn generate(config: &SynthConfig) -> Result<SynthDataset> {
    validate(config)?;
    let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
    let unit = Normal::new(0.0, 1.0).unwrap();

    let centers: Vec<Vec<f64>> = (0..config.clusters)
        .map(|_| (0..config.dim).map(|_| config.center_scale * unit.sample(&mut rng)).collect())
        .collect();
    let styles: Vec<Vec<f64>> =
        (0..config.dim).map(|_| (0..config.latent_dim).map(|_| unit.sample(&mut rng)).collect()).collect();
    let item_clusters: Vec<usize> = (0..config.items).map(|i| i % config.clusters).collect();
    let mut data = Vec::with_capacity(config.items * config.dim);
    for &c in &item_clusters {
        let z: Vec<f64> = (0..config.latent_dim).map(|_| unit.sample(&mut rng)).collect();
        for (center, style) in centers[c].iter().zip(&styles) {
            let v =
                center + style.iter().zip(&z).map(|(a, b)| a * b).sum::<f64>() + config.noise * unit.sample(&mut rng);
            // Post-ReLU activations are non-negative.
            data.push(v.max(0.0));
        }
    }
    let ids: Vec<String> = (0..config.items).map(item_id).collect();
    let embeddings = FeatureStore::new(FeatureKind::Embedding, config.dim, ids.clone(), data, vec![], None)?;

    let mut records = Vec::new();
    for u in 0..config.users {
        let user = format!("user_{u:03}");
        let cluster = rng.random_range(0..config.clusters);
        let members: Vec<usize> = (0..config.items).filter(|&i| item_clusters[i] == cluster).collect();
        let anchor = members[rng.random_range(0..members.len())];
        let mut near = members.clone();
        let dist = |i: usize| -> f64 {
            embeddings.row(i).iter().zip(embeddings.row(anchor)).map(|(a, b)| (a - b) * (a - b)).sum()
        };
        near.sort_by(|&a, &b| dist(a).total_cmp(&dist(b)).then(a.cmp(&b)));
        near.truncate(config.neighborhood);
        near.shuffle(&mut rng);

        let sessions = rng.random_range(1..=config.max_sessions);
        let mut pool = near.into_iter();
        for s in 0..sessions {
            let size = rng.random_range(1..=config.max_items_per_session);
            let basket: Vec<usize> = pool.by_ref().take(size).collect();
            if basket.is_empty() {
                break;
            }
            for i in basket {
                records.push((user.clone(), s as u64 + 1, ids[i].clone()));
            }
        }
    }
    let log = TransactionLog::from_records(records)?;

    let n_px = (config.image_size * config.image_size) as usize;
    let images = (0..config.items)
        .map(|_| {
            let base: [f64; 3] =
                [rng.random_range(0.0..255.0), rng.random_range(0.0..255.0), rng.random_range(0.0..255.0)];
            let amplitude: f64 = rng.random_range(5.0..120.0);
            let mut px = Vec::with_capacity(n_px * 3);
            for _ in 0..n_px {
                for b in base {
                    let v = b + amplitude * rng.random_range(-1.0..1.0);
                    px.push(v.round().clamp(0.0, 255.0) as u8);
                }
            }
            px
        })
        .collect();

    Ok(SynthDataset { embeddings, item_clusters, log, images, image_size: config.image_size })
}

/// Generates a dataset and writes `catalog.csv`, `transactions.csv`,
/// `embeddings.csv` and `images/item_NNNN.png` under `dir`.
pub fn write_dataset(config: &SynthConfig, dir: impl AsRef<Path>) -> Result<SynthFiles> {
    let dir = dir.as_ref();
    let dataset = generate(config)?;
    let image_dir = dir.join("images");
    std::fs::create_dir_all(&image_dir).map_err(|e| Error::io(&image_dir, e))?;

    let mut entries = Vec::with_capacity(dataset.images.len());
    for (i, px) in dataset.images.iter().enumerate() {
        let id = item_id(i);
        let path = image_dir.join(format!("{id}.png"));
        image::RgbImage::from_raw(dataset.image_size, dataset.image_size, px.clone())
            .expect("image buffer sized from config")
            .save(&path)
            .map_err(|e| Error::Decode { path: path.clone(), message: e.to_string() })?;
        entries.push(CatalogEntry {
            title: Some(format!("Synthetic work {i} (cluster {})", dataset.item_clusters[i])),
            item_id: id,
            path,
        });
    }

    let files = SynthFiles {
        catalog: dir.join("catalog.csv"),
        transactions: dir.join("transactions.csv"),
        embeddings: dir.join("embeddings.csv"),
    };
    Catalog::new(entries)?.save(&files.catalog)?;
    dataset.log.save(&files.transactions)?;
    write_embeddings_csv(&dataset.embeddings, &files.embeddings)?;
    Ok(files)
}
