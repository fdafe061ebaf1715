//! Tooling for hierarchical, multi-step image manipulation datasets.
//!
//! The crate covers the whole life cycle of a sequential localization
//! dataset:
//!
//! * [`mask`]: three-label pixel masks, region algebra, stepwise F1 and
//!   morphological boundaries.
//! * [`tree`]: manipulation trees built by deepest-container insertion.
//! * [`synth`]: synthetic copy-move composites and their trees.
//! * [`sampler`]: reverse leaf sampling into containment-monotone mask
//!   sequences, plus the two-step decomposition of one-shot masks.
//! * [`hss`]: the monotonic-alignment dynamic program, its brute-force
//!   oracle, the length penalty and the final score.
//! * [`dataset`]: the on-disk manifest layout.
//! * [`perturb`]: deterministic prediction perturbations for exercising
//!   the metric without a model.

pub mod dataset;
mod error;
pub mod hss;
pub mod mask;
pub mod oracle;
pub mod perturb;
pub mod pnm;
pub mod rng;
pub mod sampler;
pub mod synth;
pub mod tree;

pub use error::{Error, Result};
pub use hss::{hss_score, length_penalty, monotonic_match, F1Matrix, HssConfig, HssReport};
pub use mask::{Mask, PixelLabel, RegionMask};
pub use sampler::{MaskSequence, PathSet, SequenceStep};
pub use synth::{ImageBuffer, SynthConfig, SynthSample};
pub use tree::{ManipulationTree, NodeId, TreeNode};
