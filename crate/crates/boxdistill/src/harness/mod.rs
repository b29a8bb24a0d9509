//! Desk-scale training harness: synthetic scenes, linear heads over
//! handcrafted features, the full distillation training loop, and
//! CorLoc/mAP evaluation.

pub mod ablate;
pub mod eval;
pub mod features;
pub mod infer;
pub mod model;
pub mod propose;
pub mod scene;
pub mod train;

pub use ablate::{ablation_grid, AblationConfig, AblationRow};
pub use eval::{evaluate, Detection, Metrics};
pub use features::{FeatureContext, FEATURE_DIM};
pub use infer::infer;
pub use model::ModelParams;
pub use propose::{propose, propose_grid, propose_segments, ProposalMode};
pub use scene::{generate_dataset, GtObject, SyntheticScene, CLASS_NAMES, NUM_CLASSES};
pub use train::{prepare_images, train, train_prepared, PreparedImage, RunConfig, TrainOutcome};
