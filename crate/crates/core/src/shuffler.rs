//! Pixel-shuffle compression of visual feature sequences.
//!
//! Shuffling merges each `s×s` spatial block of features (`n = s²`) into one
//! feature of `n·d` dimensions, shrinking the sequence length by `n` without
//! discarding any values. [`pixel_unshuffle`] is the exact inverse, used to
//! prove losslessness. [`mock_encode`] stands in for a frozen vision encoder
//! so the pipeline can run end-to-end deterministically.

use image::RgbImage;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::geometry::{integer_sqrt, EncoderGeometry};

/// An `(L, d)` feature sequence with its 2-D grid shape, row-major.
#[derive(Debug, Clone, PartialEq)]
pub struct FeatureTensor {
    pub grid_h: usize,
    pub grid_w: usize,
    pub dim: usize,
    values: Vec<f32>,
}

/// How "adjacent" features are grouped when shuffling.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ShuffleLayout {
    /// Merge s×s spatial blocks (s = √n). The grid shape is preserved
    /// (divided by s on each side) and the operation is invertible.
    #[default]
    Block2d,
    /// Merge runs of n consecutive features along the row-major sequence.
    /// The output is a flat (1, L/n) sequence; the 2-D shape is not kept.
    Run1d,
}

#[derive(Debug, Error, PartialEq, Eq)]
pub enum ShapeError {
    #[error("shuffle factor {0} is not a perfect square")]
    NotPerfectSquare(usize),
    #[error("grid {grid_h}x{grid_w} is not divisible by block side {block}")]
    GridNotDivisible {
        grid_h: usize,
        grid_w: usize,
        block: usize,
    },
    #[error("sequence length {len} is not divisible by {n}")]
    LengthNotDivisible { len: usize, n: usize },
    #[error("feature dim {dim} is not divisible by {n}")]
    DimNotDivisible { dim: usize, n: usize },
    #[error("value buffer holds {got} floats, shape needs {want}")]
    LengthMismatch { want: usize, got: usize },
    #[error("non-finite value at index {0}")]
    NonFinite(usize),
    #[error("tile is {got_w}x{got_h}, encoder expects {want}x{want}")]
    WrongTileSize { want: u32, got_w: u32, got_h: u32 },
    #[error("shuffle factor must be nonzero")]
    ZeroFactor,
}

impl FeatureTensor {
    /// Build a tensor, checking the value count and finiteness.
    pub fn new(
        grid_h: usize,
        grid_w: usize,
        dim: usize,
        values: Vec<f32>,
    ) -> Result<Self, ShapeError> {
        let want = grid_h * grid_w * dim;
        if values.len() != want {
            return Err(ShapeError::LengthMismatch {
                want,
                got: values.len(),
            });
        }
        if let Some(i) = values.iter().position(|v| !v.is_finite()) {
            return Err(ShapeError::NonFinite(i));
        }
        Ok(Self {
            grid_h,
            grid_w,
            dim,
            values,
        })
    }

    /// Sequence length `L = grid_h · grid_w`.
    pub fn len(&self) -> usize {
        self.grid_h * self.grid_w
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn values(&self) -> &[f32] {
        &self.values
    }

    /// The feature vector at grid position (y, x).
    pub fn feature(&self, y: usize, x: usize) -> &[f32] {
        let start = (y * self.grid_w + x) * self.dim;
        &self.values[start..start + self.dim]
    }
}

/// Compress a feature sequence by merging s×s blocks into single features.
pub fn pixel_shuffle(t: &FeatureTensor, n: usize) -> Result<FeatureTensor, ShapeError> {
    pixel_shuffle_with_layout(t, n, ShuffleLayout::Block2d)
}

/// Invert [`pixel_shuffle`]: split each feature back into its s×s block.
pub fn pixel_unshuffle(t: &FeatureTensor, n: usize) -> Result<FeatureTensor, ShapeError> {
    pixel_unshuffle_with_layout(t, n, ShuffleLayout::Block2d)
}

pub fn pixel_shuffle_with_layout(
    t: &FeatureTensor,
    n: usize,
    layout: ShuffleLayout,
) -> Result<FeatureTensor, ShapeError> {
    if n == 0 {
        return Err(ShapeError::ZeroFactor);
    }
    match layout {
        ShuffleLayout::Block2d => {
            let s = integer_sqrt(n).ok_or(ShapeError::NotPerfectSquare(n))?;
            if !t.grid_h.is_multiple_of(s) || !t.grid_w.is_multiple_of(s) {
                return Err(ShapeError::GridNotDivisible {
                    grid_h: t.grid_h,
                    grid_w: t.grid_w,
                    block: s,
                });
            }
            let (out_h, out_w, out_d) = (t.grid_h / s, t.grid_w / s, t.dim * n);
            let mut values = Vec::with_capacity(t.values.len());
            for y in 0..out_h {
                for x in 0..out_w {
                    for dy in 0..s {
                        for dx in 0..s {
                            values.extend_from_slice(t.feature(y * s + dy, x * s + dx));
                        }
                    }
                }
            }
            FeatureTensor::new(out_h, out_w, out_d, values)
        }
        ShuffleLayout::Run1d => {
            let len = t.len();
            if !len.is_multiple_of(n) {
                return Err(ShapeError::LengthNotDivisible { len, n });
            }
            // Row-major values are already in run order; only the shape moves.
            FeatureTensor::new(1, len / n, t.dim * n, t.values.clone())
        }
    }
}

pub fn pixel_unshuffle_with_layout(
    t: &FeatureTensor,
    n: usize,
    layout: ShuffleLayout,
) -> Result<FeatureTensor, ShapeError> {
    if n == 0 {
        return Err(ShapeError::ZeroFactor);
    }
    if !t.dim.is_multiple_of(n) {
        return Err(ShapeError::DimNotDivisible { dim: t.dim, n });
    }
    match layout {
        ShuffleLayout::Block2d => {
            let s = integer_sqrt(n).ok_or(ShapeError::NotPerfectSquare(n))?;
            let (out_h, out_w, out_d) = (t.grid_h * s, t.grid_w * s, t.dim / n);
            let mut values = vec![0.0f32; t.values.len()];
            for y in 0..t.grid_h {
                for x in 0..t.grid_w {
                    let packed = t.feature(y, x);
                    for dy in 0..s {
                        for dx in 0..s {
                            let chunk = (dy * s + dx) * out_d;
                            let dst = ((y * s + dy) * out_w + (x * s + dx)) * out_d;
                            values[dst..dst + out_d].copy_from_slice(&packed[chunk..chunk + out_d]);
                        }
                    }
                }
            }
            FeatureTensor::new(out_h, out_w, out_d, values)
        }
        ShuffleLayout::Run1d => FeatureTensor::new(1, t.len() * n, t.dim / n, t.values.clone()),
    }
}

/// Deterministic stand-in for a frozen vision encoder.
///
/// Each patch yields a feature vector of the normalized channel means in the
/// first three components, the patch row/column indices in the next two, and
/// zeros in the remainder, so identical tiles always encode identically.
pub fn mock_encode(
    tile: &RgbImage,
    geometry: &EncoderGeometry,
) -> Result<FeatureTensor, ShapeError> {
    let v = geometry.tile_resolution;
    let (w, h) = tile.dimensions();
    if w != v || h != v {
        return Err(ShapeError::WrongTileSize {
            want: v,
            got_w: w,
            got_h: h,
        });
    }
    let patch = geometry.patch_size;
    let side = geometry.grid_side();
    let d = geometry.feature_dim;
    let px_per_patch = (patch * patch) as f32;
    let mut values = Vec::with_capacity(side * side * d);
    for py in 0..side {
        for px in 0..side {
            let mut sums = [0.0f32; 3];
            for dy in 0..patch {
                for dx in 0..patch {
                    let p = tile.get_pixel(px as u32 * patch + dx, py as u32 * patch + dy);
                    sums[0] += p[0] as f32;
                    sums[1] += p[1] as f32;
                    sums[2] += p[2] as f32;
                }
            }
            let mut feature = vec![0.0f32; d];
            for (slot, sum) in feature.iter_mut().zip(sums.iter()) {
                *slot = sum / px_per_patch / 255.0;
            }
            if d > 3 {
                feature[3] = py as f32;
            }
            if d > 4 {
                feature[4] = px as f32;
            }
            values.extend_from_slice(&feature);
        }
    }
    FeatureTensor::new(side, side, d, values)
}

#[cfg(test)]
mod tests {
    use super::*;
    use image::Rgb;
    use proptest::prelude::*;

    fn tensor(grid_h: usize, grid_w: usize, dim: usize, values: Vec<f32>) -> FeatureTensor {
        FeatureTensor::new(grid_h, grid_w, dim, values).unwrap()
    }

    #[test]
    fn shuffle_two_by_two_definition() {
        let t = tensor(2, 2, 1, vec![1.0, 2.0, 3.0, 4.0]);
        let out = pixel_shuffle(&t, 4).unwrap();
        assert_eq!((out.grid_h, out.grid_w, out.dim), (1, 1, 4));
        assert_eq!(out.values(), &[1.0, 2.0, 3.0, 4.0]);
    }

    #[test]
    fn shuffle_default_geometry_shapes() {
        let g = EncoderGeometry::default();
        let t = tensor(26, 26, 1152, vec![0.5; 26 * 26 * 1152]);
        let out = pixel_shuffle(&t, g.shuffle_factor).unwrap();
        assert_eq!((out.grid_h, out.grid_w), (13, 13));
        assert_eq!(out.len(), 169);
        assert_eq!(out.dim, 4608);
    }

    #[test]
    fn shuffle_block_order_matches_index_oracle() {
        // 4×4 grid, d=2, n=4: verify every output position against a direct
        // index computation over all 16 input positions.
        let d = 2;
        let values: Vec<f32> = (0..4 * 4 * d).map(|i| i as f32).collect();
        let t = tensor(4, 4, d, values);
        let out = pixel_shuffle(&t, 4).unwrap();
        for y in 0..2 {
            for x in 0..2 {
                let mut expected = Vec::new();
                for dy in 0..2 {
                    for dx in 0..2 {
                        expected.extend_from_slice(t.feature(y * 2 + dy, x * 2 + dx));
                    }
                }
                assert_eq!(out.feature(y, x), expected.as_slice(), "at ({y},{x})");
            }
        }
        assert_eq!(
            out.feature(0, 0),
            [
                t.feature(0, 0),
                t.feature(0, 1),
                t.feature(1, 0),
                t.feature(1, 1)
            ]
            .concat()
            .as_slice()
        );
    }

    #[test]
    fn unshuffle_inverts_definition_case() {
        let t = tensor(2, 2, 1, vec![1.0, 2.0, 3.0, 4.0]);
        let back = pixel_unshuffle(&pixel_shuffle(&t, 4).unwrap(), 4).unwrap();
        assert_eq!(back, t);
    }

    #[test]
    fn unshuffle_restores_default_shapes() {
        let t = tensor(13, 13, 4608, vec![1.0; 13 * 13 * 4608]);
        let out = pixel_unshuffle(&t, 4).unwrap();
        assert_eq!((out.grid_h, out.grid_w, out.dim), (26, 26, 1152));
    }

    #[test]
    fn shuffle_rejects_bad_shapes() {
        let t = tensor(3, 3, 2, vec![0.0; 18]);
        assert_eq!(
            pixel_shuffle(&t, 3).unwrap_err(),
            ShapeError::NotPerfectSquare(3)
        );
        assert!(matches!(
            pixel_shuffle(&t, 4).unwrap_err(),
            ShapeError::GridNotDivisible { .. }
        ));
        let t = tensor(1, 1, 3, vec![0.0; 3]);
        assert!(matches!(
            pixel_unshuffle(&t, 4).unwrap_err(),
            ShapeError::DimNotDivisible { .. }
        ));
    }

    #[test]
    fn rejects_non_finite_values() {
        let err = FeatureTensor::new(1, 2, 1, vec![1.0, f32::NAN]).unwrap_err();
        assert_eq!(err, ShapeError::NonFinite(1));
    }

    #[test]
    fn run1d_layout_flattens_sequence() {
        let t = tensor(2, 2, 1, vec![1.0, 2.0, 3.0, 4.0]);
        let out = pixel_shuffle_with_layout(&t, 2, ShuffleLayout::Run1d).unwrap();
        assert_eq!((out.grid_h, out.grid_w, out.dim), (1, 2, 2));
        assert_eq!(out.values(), &[1.0, 2.0, 3.0, 4.0]);
        let back = pixel_unshuffle_with_layout(&out, 2, ShuffleLayout::Run1d).unwrap();
        assert_eq!(back.values(), t.values());
        assert_eq!(back.len(), t.len());
    }

    #[test]
    fn mock_encode_default_grid() {
        let g = EncoderGeometry::default();
        let tile = RgbImage::from_pixel(364, 364, Rgb([0, 0, 0]));
        let t = mock_encode(&tile, &g).unwrap();
        assert_eq!((t.grid_h, t.grid_w), (26, 26));
        assert_eq!(t.len(), 676);
        // All-black tile: channel-mean components are all zero.
        for y in 0..26 {
            for x in 0..26 {
                assert_eq!(&t.feature(y, x)[..3], &[0.0, 0.0, 0.0]);
            }
        }
    }

    #[test]
    fn mock_encode_distinguishes_tiles() {
        let g = EncoderGeometry::new(28, 14, 8, 4).unwrap();
        let a = mock_encode(&RgbImage::from_pixel(28, 28, Rgb([10, 20, 30])), &g).unwrap();
        let b = mock_encode(&RgbImage::from_pixel(28, 28, Rgb([10, 20, 31])), &g).unwrap();
        assert_ne!(a.values(), b.values());
        // Same tile twice encodes identically.
        let a2 = mock_encode(&RgbImage::from_pixel(28, 28, Rgb([10, 20, 30])), &g).unwrap();
        assert_eq!(a.values(), a2.values());
    }

    #[test]
    fn mock_encode_rejects_wrong_tile_size() {
        let g = EncoderGeometry::default();
        let tile = RgbImage::new(100, 364);
        assert!(matches!(
            mock_encode(&tile, &g).unwrap_err(),
            ShapeError::WrongTileSize { .. }
        ));
    }

    fn small_grid_strategy() -> impl Strategy<Value = (usize, usize, usize, usize)> {
        // (s, grid_h multiplier, grid_w multiplier, dim)
        (
            prop_oneof![Just(2usize), Just(3), Just(4)],
            1usize..=8,
            1usize..=8,
            1usize..=64,
        )
    }

    proptest! {
        /// unshuffle ∘ shuffle is the identity, bit for bit.
        #[test]
        fn shuffle_roundtrip_lossless(
            (s, mh, mw, d) in small_grid_strategy(),
            seed in any::<u64>(),
        ) {
            let (gh, gw) = (s * mh, s * mw);
            let n = s * s;
            let mut state = seed;
            let values: Vec<f32> = (0..gh * gw * d)
                .map(|_| {
                    // xorshift; map to a finite float in [0, 1)
                    state ^= state << 13;
                    state ^= state >> 7;
                    state ^= state << 17;
                    (state >> 40) as f32 / (1u64 << 24) as f32
                })
                .collect();
            let t = tensor(gh, gw, d, values);
            let out = pixel_shuffle(&t, n).unwrap();
            prop_assert_eq!(out.len() * n, t.len());
            prop_assert_eq!(out.dim, t.dim * n);
            let back = pixel_unshuffle(&out, n).unwrap();
            prop_assert!(back == t, "round trip not bit-identical");
        }

        /// Shuffling permutes values; the multiset is unchanged.
        #[test]
        fn shuffle_conserves_values(
            (s, mh, mw, d) in small_grid_strategy(),
        ) {
            let (gh, gw) = (s * mh.min(4), s * mw.min(4));
            let values: Vec<f32> = (0..gh * gw * d).map(|i| i as f32).collect();
            let t = tensor(gh, gw, d, values.clone());
            let out = pixel_shuffle(&t, s * s).unwrap();
            let mut a = values;
            let mut b = out.values().to_vec();
            a.sort_by(f32::total_cmp);
            b.sort_by(f32::total_cmp);
            prop_assert_eq!(a, b);
        }
    }
}
