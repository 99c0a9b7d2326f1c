//! Answer-grounding consistency engine.
//!
//! Given several candidate answers to one visual question, each with a
//! segmentation mask and a sentence embedding, decide whether the answers
//! refer to a single image region or to several. The crate is `no_std`
//! (it needs `alloc`) and performs no IO; file formats, providers backed by
//! files or HTTP, and the command line live in the `groundcheck` crate.
//!
//! * [`geometry`]: binary masks, polygon rasterization, RLE, IoU, visual agreement.
//! * [`semantics`]: answer normalization, filtration, numeric detection, cosine similarity.
//! * [`reasoning`]: the staged consistency decision and its trace.
//! * [`provider`]: the interfaces for answer proposal, grounding and embedding.
//! * [`pipeline`]: proposal → grounding → embedding → decision.
//! * [`evaluation`]: precision/recall/F1 on the "single" class and threshold sweeps.
#![no_std]

extern crate alloc;

pub mod evaluation;
pub mod geometry;
pub mod pipeline;
pub mod provider;
pub mod reasoning;
pub mod semantics;

pub use evaluation::{evaluate, EvalReport, Prediction};
pub use geometry::{iou, BitMask, Polygon, RleMask};
pub use pipeline::{run_pipeline, Evidence};
pub use provider::{GroundingInstance, Subset};
pub use reasoning::{decide_consistency, Branch, ConsistencyDecision, Grounding, ReasoningConfig};
pub use semantics::{AnswerCandidate, Embedding};
