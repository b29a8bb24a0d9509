//! Proposal generation for the harness: a fixed multi-scale sliding grid, a
//! segmentation-driven proposer, or proposals ingested from the interchange
//! format.

use std::collections::{BTreeMap, BTreeSet};
use std::path::PathBuf;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::formats::read_proposals;
use crate::geometry::{iou, BoundingBox, ProposalSet};
use crate::raster::ImageRaster;
use crate::segmentation::segment;

use super::scene::{SyntheticScene, OBJECT_SHAPES};

/// Where proposals come from.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", tag = "mode")]
pub enum ProposalMode {
    /// Multi-scale sliding windows on a fixed stride.
    Grid,
    /// Bounding boxes of superpixels and of adjacent superpixel pairs.
    Segments,
    /// Read from a proposal interchange file.
    File { path: PathBuf },
}

/// Grid stride in pixels.
pub const GRID_STRIDE: usize = 8;

/// Sliding-window shapes `(width, height)`; the object shapes of the
/// synthetic benchmark.
pub const GRID_SHAPES: [(usize, usize); 5] = OBJECT_SHAPES;

/// Number of grid windows of one shape on one axis of length `side`.
pub fn grid_positions(side: usize, extent: usize) -> usize {
    if extent > side {
        0
    } else {
        (side - extent) / GRID_STRIDE + 1
    }
}

/// All sliding windows over a `width x height` image: every shape at every
/// stride-aligned position fully inside the image.
pub fn propose_grid(width: usize, height: usize) -> Vec<BoundingBox> {
    let mut boxes = Vec::new();
    for &(w, h) in &GRID_SHAPES {
        for ky in 0..grid_positions(height, h) {
            for kx in 0..grid_positions(width, w) {
                let x1 = (kx * GRID_STRIDE) as f64;
                let y1 = (ky * GRID_STRIDE) as f64;
                boxes.push(
                    BoundingBox::new(x1, y1, x1 + w as f64, y1 + h as f64)
                        .expect("grid boxes are valid"),
                );
            }
        }
    }
    boxes
}

/// Proposals from a superpixel map: the bounding box of every segment plus
/// the joint bounding box of every pair of adjacent segments, deduplicated.
pub fn propose_segments(img: &ImageRaster, k: f64, sigma: f64, min_size: usize) -> Result<Vec<BoundingBox>> {
    let map = segment(img, k, sigma, min_size)?;
    let n = map.segment_count();
    let (w, h) = (map.width(), map.height());

    let mut extents: Vec<(usize, usize, usize, usize)> = vec![(w, h, 0, 0); n];
    for y in 0..h {
        for x in 0..w {
            let l = map.label(x, y) as usize;
            let e = &mut extents[l];
            e.0 = e.0.min(x);
            e.1 = e.1.min(y);
            e.2 = e.2.max(x + 1);
            e.3 = e.3.max(y + 1);
        }
    }

    let mut adjacent: BTreeSet<(usize, usize)> = BTreeSet::new();
    for y in 0..h {
        for x in 0..w {
            let l = map.label(x, y) as usize;
            if x + 1 < w {
                let r = map.label(x + 1, y) as usize;
                if r != l {
                    adjacent.insert((l.min(r), l.max(r)));
                }
            }
            if y + 1 < h {
                let d = map.label(x, y + 1) as usize;
                if d != l {
                    adjacent.insert((l.min(d), l.max(d)));
                }
            }
        }
    }

    let mut seen: BTreeSet<(usize, usize, usize, usize)> = BTreeSet::new();
    let mut boxes = Vec::new();
    let mut push = |rect: (usize, usize, usize, usize), boxes: &mut Vec<BoundingBox>| {
        if rect.2 > rect.0 && rect.3 > rect.1 && seen.insert(rect) {
            boxes.push(
                BoundingBox::new(rect.0 as f64, rect.1 as f64, rect.2 as f64, rect.3 as f64)
                    .expect("segment extents are valid"),
            );
        }
    };
    for &e in &extents {
        push(e, &mut boxes);
    }
    for &(a, b) in &adjacent {
        let (ea, eb) = (extents[a], extents[b]);
        push(
            (
                ea.0.min(eb.0),
                ea.1.min(eb.1),
                ea.2.max(eb.2),
                ea.3.max(eb.3),
            ),
            &mut boxes,
        );
    }
    Ok(boxes)
}

/// Proposals read from an interchange file, keyed by image id.
pub struct FileProposals {
    by_image: BTreeMap<String, ProposalSet>,
}

impl FileProposals {
    pub fn load(path: &std::path::Path, strict: bool) -> Result<Self> {
        let sets = read_proposals(path, strict)?;
        let by_image = sets
            .into_iter()
            .map(|s| (s.image_id.clone(), s))
            .collect();
        Ok(Self { by_image })
    }

    pub fn get(&self, image_id: &str) -> Result<ProposalSet> {
        self.by_image
            .get(image_id)
            .cloned()
            .ok_or_else(|| Error::UnknownImageId(image_id.to_string()))
    }
}

/// Generates the proposal set for one scene under the given mode.
pub fn propose(
    scene: &SyntheticScene,
    mode: &ProposalMode,
    file: Option<&FileProposals>,
) -> Result<ProposalSet> {
    match mode {
        ProposalMode::Grid => ProposalSet::new(
            scene.image_id.clone(),
            propose_grid(scene.raster.width(), scene.raster.height()),
        ),
        ProposalMode::Segments => ProposalSet::new(
            scene.image_id.clone(),
            propose_segments(&scene.raster, 300.0, 0.8, 20)?,
        ),
        ProposalMode::File { path } => match file {
            Some(loaded) => loaded.get(&scene.image_id),
            None => FileProposals::load(path, false)?.get(&scene.image_id),
        },
    }
}

/// Fraction of ground-truth objects covered by some proposal at IoU above
/// `threshold`.
pub fn proposal_recall(
    scenes: &[SyntheticScene],
    proposals: &[ProposalSet],
    threshold: f64,
) -> f64 {
    let mut covered = 0usize;
    let mut total = 0usize;
    for (scene, set) in scenes.iter().zip(proposals) {
        for obj in &scene.objects {
            total += 1;
            if set.boxes.iter().any(|b| iou(b, &obj.bbox) > threshold) {
                covered += 1;
            }
        }
    }
    if total == 0 {
        return 0.0;
    }
    covered as f64 / total as f64
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::harness::scene::generate_dataset;

    #[test]
    fn grid_count_matches_closed_form() {
        let boxes = propose_grid(96, 96);
        let expected: usize = GRID_SHAPES
            .iter()
            .map(|&(w, h)| grid_positions(96, w) * grid_positions(96, h))
            .sum();
        assert_eq!(boxes.len(), expected);
        // spelled out: shapes (20,20),(20,30),(30,20),(30,30),(42,42) at
        // stride 8 on 96x96 give 100 + 90 + 90 + 81 + 49 windows
        assert_eq!(expected, 410);
    }

    #[test]
    fn grid_recall_meets_frozen_bound() {
        let scenes = generate_dataset(5, 60);
        let proposals: Vec<ProposalSet> = scenes
            .iter()
            .map(|s| propose(s, &ProposalMode::Grid, None).unwrap())
            .collect();
        let recall = proposal_recall(&scenes, &proposals, 0.5);
        // measured 1.00 on seeds 1..10 with the lattice-aligned generator;
        // frozen regression floor
        assert!(recall >= 0.95, "grid recall {recall}");
    }

    #[test]
    fn segment_proposals_cover_solid_objects() {
        let scenes = generate_dataset(9, 10);
        let mut covered = 0;
        let mut total = 0;
        for scene in &scenes {
            let set = propose(scene, &ProposalMode::Segments, None).unwrap();
            for obj in &scene.objects {
                total += 1;
                if set.boxes.iter().any(|b| iou(b, &obj.bbox) > 0.5) {
                    covered += 1;
                }
            }
        }
        // solid-color objects segment out cleanly; allow a little slack
        assert!(
            covered as f64 >= 0.8 * total as f64,
            "segment recall {covered}/{total}"
        );
    }

    #[test]
    fn file_mode_round_trips_and_rejects_unknown_ids() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("p.jsonl");
        let scenes = generate_dataset(2, 2);
        let sets: Vec<ProposalSet> = scenes
            .iter()
            .map(|s| propose(s, &ProposalMode::Grid, None).unwrap())
            .collect();
        crate::formats::write_proposals(&path, &sets).unwrap();

        let mode = ProposalMode::File { path: path.clone() };
        let loaded = FileProposals::load(&path, true).unwrap();
        for (scene, expected) in scenes.iter().zip(&sets) {
            let got = propose(scene, &mode, Some(&loaded)).unwrap();
            assert_eq!(&got, expected);
        }
        assert!(matches!(
            loaded.get("no_such_image"),
            Err(Error::UnknownImageId(_))
        ));
    }
}
