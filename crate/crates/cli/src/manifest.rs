//! The manifest: the single source of truth linking images, allocations,
//! grids, tiles, and tensor files across pipeline stages.
//!
//! Every command loads the manifest through [`Manifest::load`], which
//! recomputes the totals from the per-image entries and rejects the file if
//! they disagree. The JSON schema is documented in `docs/manifest-schema.md`.

use std::fs;
use std::path::{Path, PathBuf};

use mosaic_core::allocator::Ratio;
use mosaic_core::partitioner::ContentRect;
use mosaic_core::shuffler::ShuffleLayout;
use mosaic_core::EncoderGeometry;
use serde::{Deserialize, Serialize};
use thiserror::Error;

pub const MANIFEST_VERSION: u32 = 1;

#[derive(Debug, Error)]
pub enum ManifestError {
    #[error("cannot read manifest {path}: {source}")]
    Read {
        path: String,
        source: std::io::Error,
    },
    #[error("cannot parse manifest {path}: {source}")]
    Parse {
        path: String,
        source: serde_json::Error,
    },
    #[error("unsupported manifest version {0}")]
    Version(u32),
    #[error("manifest geometry is invalid: {0}")]
    Geometry(#[from] mosaic_core::geometry::GeometryError),
    #[error("manifest totals are inconsistent: recomputed {want:?}, stored {got:?}")]
    Totals { want: Totals, got: Totals },
    #[error("image {id:?}: grid {rows}x{cols} exceeds its allocation {s_alloc}")]
    GridOverAllocation {
        id: String,
        rows: u32,
        cols: u32,
        s_alloc: usize,
    },
    #[error("image {id:?}: canvas {canvas_h}x{canvas_w} does not match grid x tile resolution")]
    CanvasMismatch {
        id: String,
        canvas_h: u32,
        canvas_w: u32,
    },
    #[error("i/o error: {0}")]
    Io(#[from] std::io::Error),
    #[error("serialize error: {0}")]
    Json(#[from] serde_json::Error),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct GridShape {
    pub rows: u32,
    pub cols: u32,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct CanvasShape {
    pub h: u32,
    pub w: u32,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ManifestImage {
    pub id: String,
    pub path: PathBuf,
    pub height_px: u32,
    pub width_px: u32,
    pub s_initial: usize,
    pub s_alloc: usize,
    pub grid: GridShape,
    pub canvas: CanvasShape,
    pub content_rect: ContentRect,
    /// True when the (1,1) grid collapsed the sub-tile into the global view.
    pub dedup_single_tile: bool,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub tile_paths: Vec<PathBuf>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub global_tile_path: Option<PathBuf>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub tensor_paths: Vec<PathBuf>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub tensor_dims: Option<[usize; 3]>,
}

impl ManifestImage {
    /// Sub-tiles this image contributes (zero when deduplicated).
    pub fn sub_tile_count(&self) -> usize {
        if self.dedup_single_tile {
            0
        } else {
            (self.grid.rows * self.grid.cols) as usize
        }
    }

    /// Tiles that get encoded: sub-tiles plus the global view.
    pub fn emitted_tiles(&self) -> usize {
        self.sub_tile_count() + 1
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct Totals {
    pub sub_tiles: usize,
    pub global_tiles: usize,
    /// Post-shuffle visual tokens across all emitted tiles.
    pub feature_tokens: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Manifest {
    pub version: u32,
    pub geometry: EncoderGeometry,
    #[serde(default)]
    pub shuffle_layout: ShuffleLayout,
    pub budget: usize,
    pub alpha: Ratio,
    pub images: Vec<ManifestImage>,
    pub totals: Totals,
}

impl Manifest {
    /// Recompute totals from the per-image entries and the geometry.
    pub fn compute_totals(&self) -> Totals {
        let per_tile = self.geometry.features_per_tile();
        let sub_tiles = self.images.iter().map(ManifestImage::sub_tile_count).sum();
        let global_tiles = self.images.len();
        let feature_tokens = self
            .images
            .iter()
            .map(|img| img.emitted_tiles() * per_tile)
            .sum();
        Totals {
            sub_tiles,
            global_tiles,
            feature_tokens,
        }
    }

    /// Refresh the stored totals after editing entries.
    pub fn refresh_totals(&mut self) {
        self.totals = self.compute_totals();
    }

    /// Validate structural invariants and the totals self-consistency check.
    pub fn validate(&self) -> Result<(), ManifestError> {
        if self.version != MANIFEST_VERSION {
            return Err(ManifestError::Version(self.version));
        }
        self.geometry.validate()?;
        let v = self.geometry.tile_resolution;
        for img in &self.images {
            if (img.grid.rows * img.grid.cols) as usize > img.s_alloc {
                return Err(ManifestError::GridOverAllocation {
                    id: img.id.clone(),
                    rows: img.grid.rows,
                    cols: img.grid.cols,
                    s_alloc: img.s_alloc,
                });
            }
            if img.canvas.h != img.grid.rows * v || img.canvas.w != img.grid.cols * v {
                return Err(ManifestError::CanvasMismatch {
                    id: img.id.clone(),
                    canvas_h: img.canvas.h,
                    canvas_w: img.canvas.w,
                });
            }
        }
        let want = self.compute_totals();
        if want != self.totals {
            return Err(ManifestError::Totals {
                want,
                got: self.totals,
            });
        }
        Ok(())
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self, ManifestError> {
        let path = path.as_ref();
        let text = fs::read_to_string(path).map_err(|source| ManifestError::Read {
            path: path.display().to_string(),
            source,
        })?;
        let manifest: Manifest =
            serde_json::from_str(&text).map_err(|source| ManifestError::Parse {
                path: path.display().to_string(),
                source,
            })?;
        manifest.validate()?;
        Ok(manifest)
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<(), ManifestError> {
        self.validate()?;
        let mut text = serde_json::to_string_pretty(self)?;
        text.push('\n');
        fs::write(path, text)?;
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn sample() -> Manifest {
        let geometry = EncoderGeometry::default();
        let images = vec![ManifestImage {
            id: "a".into(),
            path: "a.png".into(),
            height_px: 728,
            width_px: 1092,
            s_initial: 6,
            s_alloc: 6,
            grid: GridShape { rows: 2, cols: 3 },
            canvas: CanvasShape { h: 728, w: 1092 },
            content_rect: ContentRect {
                x: 0,
                y: 0,
                w: 1092,
                h: 728,
            },
            dedup_single_tile: false,
            tile_paths: vec![],
            global_tile_path: None,
            tensor_paths: vec![],
            tensor_dims: None,
        }];
        let mut manifest = Manifest {
            version: MANIFEST_VERSION,
            geometry,
            shuffle_layout: ShuffleLayout::Block2d,
            budget: 50,
            alpha: Ratio::ONE,
            images,
            totals: Totals {
                sub_tiles: 0,
                global_tiles: 0,
                feature_tokens: 0,
            },
        };
        manifest.refresh_totals();
        manifest
    }

    #[test]
    fn totals_recompute_from_entries() {
        let manifest = sample();
        assert_eq!(
            manifest.totals,
            Totals {
                sub_tiles: 6,
                global_tiles: 1,
                feature_tokens: 7 * 169
            }
        );
        manifest.validate().unwrap();
    }

    #[test]
    fn tampered_totals_rejected_on_load() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("m.json");
        let mut manifest = sample();
        manifest.save(&path).unwrap();
        Manifest::load(&path).unwrap();

        manifest.totals.feature_tokens += 1;
        let text = serde_json::to_string(&manifest).unwrap();
        std::fs::write(&path, text).unwrap();
        assert!(matches!(
            Manifest::load(&path).unwrap_err(),
            ManifestError::Totals { .. }
        ));
    }

    #[test]
    fn dedup_entry_counts_only_global() {
        let mut manifest = sample();
        manifest.images[0].dedup_single_tile = true;
        manifest.images[0].grid = GridShape { rows: 1, cols: 1 };
        manifest.images[0].canvas = CanvasShape { h: 364, w: 364 };
        manifest.refresh_totals();
        assert_eq!(
            manifest.totals,
            Totals {
                sub_tiles: 0,
                global_tiles: 1,
                feature_tokens: 169
            }
        );
    }

    #[test]
    fn grid_over_allocation_rejected() {
        let mut manifest = sample();
        manifest.images[0].s_alloc = 5;
        manifest.refresh_totals();
        assert!(matches!(
            manifest.validate().unwrap_err(),
            ManifestError::GridOverAllocation { .. }
        ));
    }

    #[test]
    fn roundtrip_is_byte_stable() {
        let dir = tempfile::tempdir().unwrap();
        let a = dir.path().join("a.json");
        let b = dir.path().join("b.json");
        let manifest = sample();
        manifest.save(&a).unwrap();
        Manifest::load(&a).unwrap().save(&b).unwrap();
        assert_eq!(std::fs::read(&a).unwrap(), std::fs::read(&b).unwrap());
    }
}
