//! Adaptive high-resolution multi-image preprocessing pipeline.
//!
//! The crate covers the full preprocessing path for multi-image
//! vision-language inputs:
//!
//! 1. [`allocator`] — distribute a global tile budget across input images
//!    proportionally to their pixel area.
//! 2. [`partitioner`] — pick the best rows×cols crop grid per image, pad and
//!    resize onto the grid canvas, split into fixed-size tiles, and produce a
//!    resized global view.
//! 3. [`shuffler`] — lossless pixel-shuffle compression of per-tile feature
//!    sequences, plus a deterministic mock encoder and the FTEN tensor file
//!    format ([`ften`]).
//! 4. [`sequencer`] — interleaved image/text token layout with `<Img>` /
//!    `</Img>` markers and budget accounting.
//! 5. [`datagen`] — multi-turn multi-image instruction-data assembly, table
//!    splitting and rendering, and dataset deduplication.
//! 6. [`metrics`] — ANLS and exact-match evaluation.

pub mod allocator;
pub mod datagen;
pub mod ften;
pub mod geometry;
pub mod metrics;
pub mod partitioner;
pub mod sequencer;
pub mod shuffler;

pub use allocator::{AllocationPlan, ImageSpec};
pub use geometry::EncoderGeometry;
pub use partitioner::{GridConfig, TileSet};
pub use sequencer::TokenSequence;
pub use shuffler::FeatureTensor;
