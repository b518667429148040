//! Gait severity scoring from 3D skeleton sequences.
//!
//! The pipeline ingests per-frame person detections and 3D pose sequences,
//! tracks the walking participant, extracts location/viewpoint-robust
//! features (pairwise joint distances plus two-scale motion), and classifies
//! each exam into one of four severity classes with a small temporal
//! convolutional network trained under a hybrid ordinal-focal objective.
//! Evaluation runs participant-level leave-one-out cross-validation with
//! sub-clip voting.
//!
//! Entry points, roughly in pipeline order:
//!
//! - [`tracker`]: SORT-style tracking over bounding-box streams and
//!   participant selection.
//! - [`pose`]: pose sequence model, normalization, clipping, augmentation,
//!   file I/O, and a deterministic synthetic gait generator.
//! - [`features`]: joint-collection-distance and two-scale motion features.
//! - [`net`]: the classifier, its from-scratch forward/backward passes,
//!   Adam, and checkpointing.
//! - [`losses`]: focal, ordinal, and hybrid objectives with exact gradients.
//! - [`eval`]: leave-one-out cross-validation, voting, metrics, and the
//!   Wilcoxon signed-rank test.
//! - [`cli`]: the `gaitscore` command-line surface.
//!
//! Every run is reproducible: all randomness flows from a single `u64` seed
//! through the counter-based generator in [`rng`].

pub mod cli;
pub mod error;
pub mod eval;
pub mod features;
pub mod losses;
pub mod net;
pub mod pose;
pub mod rng;
pub mod tracker;

pub use error::{GaitError, Result};

/// Number of severity classes handled by the pipeline (scores 0 through 3).
pub const NUM_CLASSES: usize = 4;
