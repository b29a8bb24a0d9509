//! Named-config ablation runs over a shared dataset.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::Result;
use crate::formats::sha256_bytes;

use super::scene::generate_dataset;
use super::train::{train, RunConfig};

/// One named configuration in an ablation grid.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AblationConfig {
    pub name: String,
    #[serde(flatten)]
    pub run: RunConfig,
}

/// One result row.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AblationRow {
    pub name: String,
    pub map: f64,
    pub corloc: f64,
    pub dataset_sha256: String,
}

/// Stable fingerprint of the dataset a config trains on.
pub fn dataset_hash(seed: u64, n_images: usize) -> String {
    let scenes = generate_dataset(seed, n_images);
    let mut bytes = Vec::new();
    for scene in &scenes {
        bytes.extend_from_slice(scene.image_id.as_bytes());
        for c in 0..3 {
            for &v in scene.raster.channel(c) {
                bytes.extend_from_slice(&v.to_le_bytes());
            }
        }
        for o in &scene.objects {
            bytes.extend_from_slice(&(o.class as u64).to_le_bytes());
            for v in [o.bbox.x1, o.bbox.y1, o.bbox.x2, o.bbox.y2] {
                bytes.extend_from_slice(&v.to_le_bytes());
            }
        }
    }
    sha256_bytes(&bytes)
}

/// Runs every config (in parallel; each run is single-threaded inside) and
/// returns rows in config order.
pub fn ablation_grid(configs: &[AblationConfig]) -> Result<Vec<AblationRow>> {
    configs
        .par_iter()
        .map(|c| {
            let outcome = train(&c.run)?;
            Ok(AblationRow {
                name: c.name.clone(),
                map: outcome.eval_metrics.map,
                corloc: outcome.train_metrics.corloc,
                dataset_sha256: dataset_hash(c.run.dataset_seed, c.run.num_images),
            })
        })
        .collect()
}

/// Renders rows as an aligned text table.
pub fn format_table(rows: &[AblationRow]) -> String {
    let name_w = rows
        .iter()
        .map(|r| r.name.len())
        .max()
        .unwrap_or(4)
        .max("config".len());
    let mut out = format!("{:<name_w$}  {:>8}  {:>8}  dataset\n", "config", "mAP", "CorLoc");
    for r in rows {
        out.push_str(&format!(
            "{:<name_w$}  {:>8.4}  {:>8.4}  {}\n",
            r.name,
            r.map,
            r.corloc,
            &r.dataset_sha256[..12]
        ));
    }
    out
}
