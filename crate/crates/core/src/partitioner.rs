//! Grid search, padding, and tiling of images into fixed-size sub-images.
//!
//! For an image that was allocated `S'` tiles, the grid search enumerates all
//! `(rows, cols)` with `rows · cols ≤ S'` and picks the one maximizing the
//! effective resolution: the aspect-preserved scaled-fit area on the candidate
//! canvas, capped at the source's own area so upscaling earns no credit. The
//! chosen canvas is filled by a centered, aspect-preserving resize over black
//! padding and then split into `v×v` tiles in row-major order. A direct
//! (non-aspect-preserving) resize of the original to `v×v` provides the
//! global view.

use image::imageops::{self, FilterType};
use image::{Rgb, RgbImage};
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::geometry::EncoderGeometry;

/// Placement of the scaled source content inside a grid canvas.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct ContentRect {
    pub x: u32,
    pub y: u32,
    pub w: u32,
    pub h: u32,
}

/// A chosen rows×cols crop configuration for one image.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct GridConfig {
    pub rows: u32,
    pub cols: u32,
    pub canvas_h: u32,
    pub canvas_w: u32,
    pub source_h: u32,
    pub source_w: u32,
    /// Centered, aspect-preserved placement of the scaled source.
    pub content_rect: ContentRect,
    /// Scaled-fit pixel area, capped at the source area.
    pub effective_resolution: u64,
    /// Canvas area not covered by effective resolution.
    pub wasted_area: u64,
}

impl GridConfig {
    pub fn tile_count(&self) -> usize {
        (self.rows * self.cols) as usize
    }

    /// Tile side length, recovered from the canvas.
    pub fn tile_resolution(&self) -> u32 {
        self.canvas_h / self.rows
    }
}

/// All tiles produced for one image: the grid sub-tiles plus the global view.
pub struct TileSet {
    pub image_id: String,
    pub grid: GridConfig,
    /// Row-major `v×v` crops of the padded canvas. Empty when the grid is
    /// (1,1): the single sub-tile would duplicate the global view.
    pub sub_tiles: Vec<RgbImage>,
    /// The whole source resized directly to `v×v`.
    pub global_tile: RgbImage,
}

impl TileSet {
    /// Number of tiles emitted for encoding (sub-tiles plus the global view).
    pub fn emitted_tiles(&self) -> usize {
        self.sub_tiles.len() + 1
    }

    /// True when the (1,1) grid collapsed the sub-tile into the global view.
    pub fn dedup_single_tile(&self) -> bool {
        self.grid.rows == 1 && self.grid.cols == 1
    }
}

#[derive(Debug, Error, PartialEq, Eq)]
pub enum PartitionError {
    #[error("image has zero area ({width}x{height})")]
    InvalidImage { width: u32, height: u32 },
    #[error("canvas is {got_w}x{got_h}, grid expects {want_w}x{want_h}")]
    InvalidCanvas {
        want_w: u32,
        want_h: u32,
        got_w: u32,
        got_h: u32,
    },
    #[error("image is {got_w}x{got_h}, grid was built for {want_w}x{want_h}")]
    SourceMismatch {
        want_w: u32,
        want_h: u32,
        got_w: u32,
        got_h: u32,
    },
}

/// Aspect-preserving fit of `(h, w)` into `(target_h, target_w)`, floored.
///
/// Exact integer arithmetic: the limiting side is found by cross
/// multiplication and the other side is scaled by an integer ratio, so no
/// floating-point rounding can perturb the result.
fn scaled_fit(h: u32, w: u32, target_h: u32, target_w: u32) -> (u64, u64) {
    let (h, w, th, tw) = (h as u64, w as u64, target_h as u64, target_w as u64);
    if th * w <= tw * h {
        // Height-limited: content height hits target_h first.
        (th, w * th / h)
    } else {
        (h * tw / w, tw)
    }
}

/// Find the rows×cols grid maximizing effective resolution under `s_alloc`.
///
/// Ties are broken by minimum wasted area, then fewest tiles, then squarest
/// grid, then fewest rows, making the search fully deterministic.
pub fn search_grid(
    height_px: u32,
    width_px: u32,
    s_alloc: usize,
    geometry: &EncoderGeometry,
) -> GridConfig {
    assert!(s_alloc >= 1, "s_alloc must be at least 1");
    let v = geometry.tile_resolution;
    let source_area = height_px as u64 * width_px as u64;

    let mut best: Option<(GridConfig, (u64, u64, u32, u32))> = None;
    for rows in 1..=s_alloc as u32 {
        for cols in 1..=(s_alloc as u32 / rows) {
            let canvas_h = rows * v;
            let canvas_w = cols * v;
            let (fit_h, fit_w) = scaled_fit(height_px, width_px, canvas_h, canvas_w);
            let effective = (fit_h * fit_w).min(source_area);
            let wasted = canvas_h as u64 * canvas_w as u64 - effective;
            let tie_key = (wasted, (rows * cols) as u64, rows.abs_diff(cols), rows);
            let better = match &best {
                None => true,
                Some((cfg, best_key)) => {
                    effective > cfg.effective_resolution
                        || (effective == cfg.effective_resolution && tie_key < *best_key)
                }
            };
            if better {
                let rect_w = (fit_w as u32).max(1).min(canvas_w);
                let rect_h = (fit_h as u32).max(1).min(canvas_h);
                let config = GridConfig {
                    rows,
                    cols,
                    canvas_h,
                    canvas_w,
                    source_h: height_px,
                    source_w: width_px,
                    content_rect: ContentRect {
                        x: (canvas_w - rect_w) / 2,
                        y: (canvas_h - rect_h) / 2,
                        w: rect_w,
                        h: rect_h,
                    },
                    effective_resolution: effective,
                    wasted_area: wasted,
                };
                best = Some((config, tie_key));
            }
        }
    }
    best.expect("at least the (1,1) grid is always a candidate")
        .0
}

/// Scale the source onto the grid canvas, centered over black padding.
pub fn pad_resize(image: &RgbImage, grid: &GridConfig) -> Result<RgbImage, PartitionError> {
    let (w, h) = image.dimensions();
    if w == 0 || h == 0 {
        return Err(PartitionError::InvalidImage {
            width: w,
            height: h,
        });
    }
    if w != grid.source_w || h != grid.source_h {
        return Err(PartitionError::SourceMismatch {
            want_w: grid.source_w,
            want_h: grid.source_h,
            got_w: w,
            got_h: h,
        });
    }
    let rect = grid.content_rect;
    let content = if (rect.w, rect.h) == (w, h) {
        image.clone()
    } else {
        imageops::resize(image, rect.w, rect.h, FilterType::Triangle)
    };
    let mut canvas = RgbImage::from_pixel(grid.canvas_w, grid.canvas_h, Rgb([0, 0, 0]));
    imageops::replace(&mut canvas, &content, rect.x as i64, rect.y as i64);
    Ok(canvas)
}

/// Split a canvas into rows×cols tiles of `v×v`, row-major.
pub fn split_tiles(canvas: &RgbImage, grid: &GridConfig) -> Result<Vec<RgbImage>, PartitionError> {
    let (w, h) = canvas.dimensions();
    if w != grid.canvas_w || h != grid.canvas_h {
        return Err(PartitionError::InvalidCanvas {
            want_w: grid.canvas_w,
            want_h: grid.canvas_h,
            got_w: w,
            got_h: h,
        });
    }
    let v = grid.tile_resolution();
    let mut tiles = Vec::with_capacity(grid.tile_count());
    for row in 0..grid.rows {
        for col in 0..grid.cols {
            tiles.push(imageops::crop_imm(canvas, col * v, row * v, v, v).to_image());
        }
    }
    Ok(tiles)
}

/// Full per-image pipeline: grid search, pad/resize, split, global view.
pub fn partition(
    image: &RgbImage,
    image_id: impl Into<String>,
    s_alloc: usize,
    geometry: &EncoderGeometry,
) -> Result<TileSet, PartitionError> {
    let (w, h) = image.dimensions();
    if w == 0 || h == 0 {
        return Err(PartitionError::InvalidImage {
            width: w,
            height: h,
        });
    }
    let v = geometry.tile_resolution;
    let grid = search_grid(h, w, s_alloc, geometry);
    let sub_tiles = if grid.rows == 1 && grid.cols == 1 {
        Vec::new()
    } else {
        let canvas = pad_resize(image, &grid)?;
        split_tiles(&canvas, &grid)?
    };
    let global_tile = if (w, h) == (v, v) {
        image.clone()
    } else {
        imageops::resize(image, v, v, FilterType::Triangle)
    };
    Ok(TileSet {
        image_id: image_id.into(),
        grid,
        sub_tiles,
        global_tile,
    })
}
