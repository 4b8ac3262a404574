//! Encoder geometry: tile resolution, patch size, and shuffle factor.

use serde::{Deserialize, Serialize};
use thiserror::Error;

/// Geometry of the (mocked) vision encoder and the feature compression stage.
///
/// The defaults model a 364×364 encoder with 14-pixel patches, which emits a
/// 26×26 = 676 feature grid of dimension 1152 per tile, compressed 4× by
/// pixel shuffling down to 169 features of dimension 4608.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct EncoderGeometry {
    /// Side length of one square tile, in pixels.
    pub tile_resolution: u32,
    /// Side length of one square patch, in pixels.
    pub patch_size: u32,
    /// Raw feature-sequence length per tile, `(tile_resolution / patch_size)²`.
    pub raw_features_per_tile: usize,
    /// Dimension of each raw feature vector.
    pub feature_dim: usize,
    /// Pixel-shuffle compression factor; must be a perfect square.
    pub shuffle_factor: usize,
}

#[derive(Debug, Error, PartialEq, Eq)]
pub enum GeometryError {
    #[error("tile resolution {tile} is not divisible by patch size {patch}")]
    TileNotDivisible { tile: u32, patch: u32 },
    #[error("raw features per tile must be {expected} for tile {tile} / patch {patch}, got {got}")]
    FeatureCountMismatch {
        expected: usize,
        got: usize,
        tile: u32,
        patch: u32,
    },
    #[error("shuffle factor {0} is not a perfect square")]
    NotPerfectSquare(usize),
    #[error("feature grid side {side} is not divisible by shuffle block side {block}")]
    GridNotShuffleable { side: usize, block: usize },
    #[error("geometry fields must be positive")]
    ZeroField,
}

impl Default for EncoderGeometry {
    fn default() -> Self {
        Self {
            tile_resolution: 364,
            patch_size: 14,
            raw_features_per_tile: 676,
            feature_dim: 1152,
            shuffle_factor: 4,
        }
    }
}

impl EncoderGeometry {
    /// Build a geometry, checking all invariants.
    pub fn new(
        tile_resolution: u32,
        patch_size: u32,
        feature_dim: usize,
        shuffle_factor: usize,
    ) -> Result<Self, GeometryError> {
        if tile_resolution == 0 || patch_size == 0 || feature_dim == 0 || shuffle_factor == 0 {
            return Err(GeometryError::ZeroField);
        }
        if !tile_resolution.is_multiple_of(patch_size) {
            return Err(GeometryError::TileNotDivisible {
                tile: tile_resolution,
                patch: patch_size,
            });
        }
        let side = (tile_resolution / patch_size) as usize;
        let geometry = Self {
            tile_resolution,
            patch_size,
            raw_features_per_tile: side * side,
            feature_dim,
            shuffle_factor,
        };
        geometry.validate()?;
        Ok(geometry)
    }

    /// Check all structural invariants, for geometries built field-by-field
    /// (e.g. deserialized from a manifest or config file).
    pub fn validate(&self) -> Result<(), GeometryError> {
        if self.tile_resolution == 0
            || self.patch_size == 0
            || self.raw_features_per_tile == 0
            || self.feature_dim == 0
            || self.shuffle_factor == 0
        {
            return Err(GeometryError::ZeroField);
        }
        if !self.tile_resolution.is_multiple_of(self.patch_size) {
            return Err(GeometryError::TileNotDivisible {
                tile: self.tile_resolution,
                patch: self.patch_size,
            });
        }
        let side = (self.tile_resolution / self.patch_size) as usize;
        if side * side != self.raw_features_per_tile {
            return Err(GeometryError::FeatureCountMismatch {
                expected: side * side,
                got: self.raw_features_per_tile,
                tile: self.tile_resolution,
                patch: self.patch_size,
            });
        }
        let block = integer_sqrt(self.shuffle_factor)
            .ok_or(GeometryError::NotPerfectSquare(self.shuffle_factor))?;
        if !side.is_multiple_of(block) {
            return Err(GeometryError::GridNotShuffleable { side, block });
        }
        Ok(())
    }

    /// Feature-grid side length per tile (26 for the defaults).
    pub fn grid_side(&self) -> usize {
        (self.tile_resolution / self.patch_size) as usize
    }

    /// Feature-sequence length per tile after pixel shuffling.
    pub fn features_per_tile(&self) -> usize {
        self.raw_features_per_tile / self.shuffle_factor
    }

    /// Feature dimension after pixel shuffling.
    pub fn shuffled_dim(&self) -> usize {
        self.feature_dim * self.shuffle_factor
    }

    /// Same geometry with a different shuffle factor.
    pub fn with_shuffle_factor(mut self, shuffle_factor: usize) -> Result<Self, GeometryError> {
        self.shuffle_factor = shuffle_factor;
        self.validate()?;
        Ok(self)
    }
}

/// Exact integer square root, `None` if `n` is not a perfect square.
pub(crate) fn integer_sqrt(n: usize) -> Option<usize> {
    let root = (n as f64).sqrt().round() as usize;
    (root * root == n).then_some(root)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn default_geometry_matches_encoder_constants() {
        let g = EncoderGeometry::default();
        assert_eq!(g.grid_side(), 26);
        assert_eq!(g.raw_features_per_tile, 676);
        assert_eq!(g.features_per_tile(), 169);
        assert_eq!(g.shuffled_dim(), 4608);
        g.validate().unwrap();
    }

    #[test]
    fn rejects_non_square_shuffle_factor() {
        let err = EncoderGeometry::new(364, 14, 1152, 3).unwrap_err();
        assert_eq!(err, GeometryError::NotPerfectSquare(3));
    }

    #[test]
    fn rejects_indivisible_tile() {
        let err = EncoderGeometry::new(365, 14, 1152, 4).unwrap_err();
        assert!(matches!(err, GeometryError::TileNotDivisible { .. }));
    }

    #[test]
    fn rejects_unshuffleable_grid() {
        // 42/14 = 3, block side 2 does not divide 3.
        let err = EncoderGeometry::new(42, 14, 64, 4).unwrap_err();
        assert!(matches!(err, GeometryError::GridNotShuffleable { .. }));
    }

    #[test]
    fn shuffle_factor_one_is_identity_shape() {
        let g = EncoderGeometry::new(364, 14, 1152, 1).unwrap();
        assert_eq!(g.features_per_tile(), 676);
        assert_eq!(g.shuffled_dim(), 1152);
    }

    #[test]
    fn integer_sqrt_detects_squares() {
        assert_eq!(integer_sqrt(1), Some(1));
        assert_eq!(integer_sqrt(4), Some(2));
        assert_eq!(integer_sqrt(9), Some(3));
        assert_eq!(integer_sqrt(16), Some(4));
        assert_eq!(integer_sqrt(2), None);
        assert_eq!(integer_sqrt(8), None);
    }
}
