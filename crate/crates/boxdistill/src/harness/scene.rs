//! Synthetic detection scenes: colored rectangles and ellipses on a noisy
//! background, with ground truth kept aside for evaluation only.

use rand::Rng;
use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::geometry::BoundingBox;
use crate::raster::ImageRaster;

/// Number of foreground classes in the synthetic benchmark.
pub const NUM_CLASSES: usize = 4;

/// Class names: a color-shape category each.
pub const CLASS_NAMES: [&str; NUM_CLASSES] =
    ["red-rect", "green-ellipse", "blue-rect", "yellow-ellipse"];

const CLASS_COLORS: [[f64; 3]; NUM_CLASSES] = [
    [0.85, 0.15, 0.15],
    [0.15, 0.80, 0.20],
    [0.15, 0.25, 0.85],
    [0.90, 0.85, 0.10],
];

/// Scene side length in pixels.
pub const SCENE_SIDE: usize = 96;

/// Object shapes `(width, height)`. These sit on the same 8-pixel lattice the
/// grid proposer uses, so sliding windows can reach every object; a +-1 pixel
/// jitter on position and size keeps the task from being pure lookup.
pub const OBJECT_SHAPES: [(usize, usize); 5] = [(20, 20), (20, 30), (30, 20), (30, 30), (42, 42)];

const PLACEMENT_LATTICE: usize = 8;
const EDGE_MARGIN: usize = 8;
const OBJECT_GAP: f64 = 2.0;

/// One ground-truth object: dataset class (0-based) and its box.
#[derive(Debug, Clone, PartialEq)]
pub struct GtObject {
    pub class: usize,
    pub bbox: BoundingBox,
}

/// A generated scene with its image-level labels and held-back ground truth.
#[derive(Debug, Clone, PartialEq)]
pub struct SyntheticScene {
    pub image_id: String,
    pub raster: ImageRaster,
    pub objects: Vec<GtObject>,
}

impl SyntheticScene {
    /// Image-level indicator over the foreground classes.
    pub fn labels(&self) -> Vec<bool> {
        let mut labels = vec![false; NUM_CLASSES];
        for obj in &self.objects {
            labels[obj.class] = true;
        }
        labels
    }
}

fn jitter(rng: &mut ChaCha8Rng) -> i64 {
    rng.gen_range(-1i64..=1)
}

/// Generates `n_images` scenes deterministically from `seed`.
pub fn generate_dataset(seed: u64, n_images: usize) -> Vec<SyntheticScene> {
    assert!(n_images >= 1);
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..n_images)
        .map(|i| generate_scene(&mut rng, format!("img_{i:04}")))
        .collect()
}

fn generate_scene(rng: &mut ChaCha8Rng, image_id: String) -> SyntheticScene {
    let side = SCENE_SIDE;
    let mut raster = ImageRaster::filled(side, side, [0.45, 0.45, 0.45]);

    // textured background: low-amplitude per-pixel noise
    for y in 0..side {
        for x in 0..side {
            for c in 0..3 {
                let v = 0.45 + rng.gen_range(-0.04..0.04);
                raster.set(c, x, y, v);
            }
        }
    }

    let n_objects = rng.gen_range(1..=3usize);
    let mut objects: Vec<GtObject> = Vec::new();
    for _ in 0..n_objects {
        let class = rng.gen_range(0..NUM_CLASSES);
        let (bw, bh) = OBJECT_SHAPES[rng.gen_range(0..OBJECT_SHAPES.len())];

        // lattice placement with a pixel of jitter; keep away from borders
        let mut placed = None;
        for _attempt in 0..40 {
            let max_kx = (side - EDGE_MARGIN - bw) / PLACEMENT_LATTICE;
            let max_ky = (side - EDGE_MARGIN - bh) / PLACEMENT_LATTICE;
            let x1 = (rng.gen_range(1..=max_kx) * PLACEMENT_LATTICE) as i64 + jitter(rng);
            let y1 = (rng.gen_range(1..=max_ky) * PLACEMENT_LATTICE) as i64 + jitter(rng);
            let w = bw as i64 + jitter(rng);
            let h = bh as i64 + jitter(rng);
            let bbox = BoundingBox::new(
                x1 as f64,
                y1 as f64,
                (x1 + w) as f64,
                (y1 + h) as f64,
            )
            .expect("constructed boxes are valid");
            let separated = objects.iter().all(|o| {
                let grown = BoundingBox::new(
                    bbox.x1 - OBJECT_GAP,
                    bbox.y1 - OBJECT_GAP,
                    bbox.x2 + OBJECT_GAP,
                    bbox.y2 + OBJECT_GAP,
                )
                .unwrap();
                grown.intersection_area(&o.bbox) == 0.0
            });
            if separated {
                placed = Some(bbox);
                break;
            }
        }
        let Some(bbox) = placed else {
            continue; // scene too crowded; keep what fits
        };

        // per-object color jitter around the class color
        let mut color = CLASS_COLORS[class];
        for c in color.iter_mut() {
            *c = (*c + rng.gen_range(-0.06..0.06)).clamp(0.02, 0.98);
        }
        let ellipse = class == 1 || class == 3;
        paint_object(&mut raster, rng, &bbox, color, ellipse);
        objects.push(GtObject { class, bbox });
    }
    debug_assert!(!objects.is_empty());

    SyntheticScene {
        image_id,
        raster,
        objects,
    }
}

fn paint_object(
    raster: &mut ImageRaster,
    rng: &mut ChaCha8Rng,
    bbox: &BoundingBox,
    color: [f64; 3],
    ellipse: bool,
) {
    let (cx, cy) = bbox.center();
    let (rx, ry) = (bbox.width() / 2.0, bbox.height() / 2.0);
    let x1 = bbox.x1.max(0.0) as usize;
    let y1 = bbox.y1.max(0.0) as usize;
    let x2 = (bbox.x2 as usize).min(raster.width());
    let y2 = (bbox.y2 as usize).min(raster.height());
    for y in y1..y2 {
        for x in x1..x2 {
            if ellipse {
                let dx = (x as f64 + 0.5 - cx) / rx;
                let dy = (y as f64 + 0.5 - cy) / ry;
                if dx * dx + dy * dy > 1.0 {
                    continue;
                }
            }
            for c in 0..3 {
                let v = color[c] + rng.gen_range(-0.02..0.02);
                raster.set(c, x, y, v);
            }
        }
    }
}
