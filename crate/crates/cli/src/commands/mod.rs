pub mod annotate;
pub mod datagen;
pub mod encode;
pub mod eval;
pub mod plan;
pub mod sequence;
pub mod tile;
