//! Entropy-gated ensemble selection for semantic segmentation.
//!
//! Each ensemble member emits a per-pixel class distribution. A member takes
//! part in the combined prediction for a pixel only when the Shannon entropy
//! of its distribution falls below that member's threshold. The threshold
//! vector is fitted with a Comprehensive Learning Particle Swarm Optimizer
//! that maximizes the class-averaged Dice coefficient on out-of-fold
//! (stacked) training predictions.
//!
//! Module map:
//!
//! * [`io`]: PTEN probability tensors, PGM label masks, dataset manifests
//!   and threshold documents.
//! * [`fusion`]: entropy, member selection, gated combination, class
//!   assignment.
//! * [`metrics`]: per-class and averaged Dice over flattened corpora.
//! * [`clpso`]: the swarm optimizer over a box.
//! * [`pipeline`]: prediction-matrix assembly, fitness wiring, training,
//!   segmentation, synthetic predictors and the grid oracle.
//! * [`testfns`]: analytic benchmark functions used to calibrate the swarm.

pub mod clpso;
pub mod fusion;
pub mod io;
pub mod metrics;
pub mod pipeline;
pub mod testfns;

pub use clpso::{Bounds, LearningProbMode, SwarmConfig, SwarmOutcome, SwarmTrace};
pub use fusion::{entropy, fuse_pixel, fuse_stack, select, FusedPixel, FusedStack, ThresholdVector};
pub use io::{DatasetManifest, FormatError, LabelMask, ProbabilityStack, ThresholdDocument};
pub use metrics::{dice_average, dice_per_class, ConfusionCounts, DiceReport};
pub use pipeline::{PipelineError, PredictionMatrix};
