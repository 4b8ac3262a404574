//! Sub-image budget allocation across multiple input images.
//!
//! Each image `i` of size `h × w` starts with an initial tile count
//! `floor(h/v) · floor(w/v)` for tile side `v`. When the counts collectively
//! exceed the global budget `M` they are scaled down by `α = M / ΣSᵢ` and
//! floored. Every image keeps at least one tile, and a deterministic repair
//! pass restores feasibility when that clamp pushes the total back over `M`.

use std::collections::HashSet;
use std::path::PathBuf;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::geometry::EncoderGeometry;

/// Identity and pixel geometry of one input image.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ImageSpec {
    pub id: String,
    pub height_px: u32,
    pub width_px: u32,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub source_path: Option<PathBuf>,
}

impl ImageSpec {
    pub fn new(id: impl Into<String>, height_px: u32, width_px: u32) -> Self {
        Self {
            id: id.into(),
            height_px,
            width_px,
            source_path: None,
        }
    }

    pub fn with_path(mut self, path: impl Into<PathBuf>) -> Self {
        self.source_path = Some(path.into());
        self
    }
}

/// Exact rational scale factor `M / ΣSᵢ`, kept as a reduced fraction so
/// serialized plans are bit-stable.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct Ratio {
    pub numerator: u64,
    pub denominator: u64,
}

impl Ratio {
    pub const ONE: Ratio = Ratio {
        numerator: 1,
        denominator: 1,
    };

    pub fn new(numerator: u64, denominator: u64) -> Self {
        assert!(denominator != 0, "ratio denominator must be nonzero");
        let g = gcd(numerator, denominator);
        Self {
            numerator: numerator / g,
            denominator: denominator / g,
        }
    }

    pub fn to_f64(self) -> f64 {
        self.numerator as f64 / self.denominator as f64
    }

    pub fn is_one(self) -> bool {
        self.numerator == self.denominator
    }
}

fn gcd(a: u64, b: u64) -> u64 {
    let (mut a, mut b) = (a.max(1), b);
    while b != 0 {
        (a, b) = (b, a % b);
    }
    a
}

/// Per-image slice of an [`AllocationPlan`].
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ImageAllocation {
    pub image_id: String,
    /// Unclamped initial count `floor(h/v) · floor(w/v)`; may be zero.
    pub s_initial: usize,
    /// Final allocated sub-image count; always ≥ 1.
    pub s_alloc: usize,
}

/// The solved budget distribution for one multi-image request.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AllocationPlan {
    pub budget: usize,
    pub alpha: Ratio,
    pub per_image: Vec<ImageAllocation>,
    pub geometry: EncoderGeometry,
}

impl AllocationPlan {
    pub fn total_allocated(&self) -> usize {
        self.per_image.iter().map(|a| a.s_alloc).sum()
    }
}

#[derive(Debug, Error, PartialEq, Eq)]
pub enum AllocError {
    #[error("no input images")]
    EmptyInput,
    #[error("budget {budget} is below the minimum of one tile per image ({image_count} images)")]
    BudgetTooSmall { budget: usize, image_count: usize },
    #[error("duplicate image id {0:?}")]
    DuplicateId(String),
    #[error("image {id:?} has a zero dimension ({height_px}x{width_px})")]
    InvalidDimensions {
        id: String,
        height_px: u32,
        width_px: u32,
    },
}

/// Initial tile counts `floor(h/v) · floor(w/v)` per image, unclamped.
///
/// Counts of zero (image smaller than one tile in either dimension) are valid
/// outputs here; [`allocate`] is responsible for clamping.
pub fn initial_counts(images: &[ImageSpec], geometry: &EncoderGeometry) -> Vec<usize> {
    let v = geometry.tile_resolution;
    images
        .iter()
        .map(|img| ((img.height_px / v) * (img.width_px / v)) as usize)
        .collect()
}

/// Scale already-clamped counts down to the budget.
///
/// If `Σ counts ≤ budget` the counts pass through with `α = 1`. Otherwise each
/// count becomes `floor(α · count)` with `α = budget / Σ counts`, re-clamped to
/// at least one. The floor is computed in integer arithmetic
/// (`count · budget / Σ`) so it is exact.
pub fn scale_counts(counts: &[usize], budget: usize) -> Result<(Ratio, Vec<usize>), AllocError> {
    if budget < counts.len() {
        return Err(AllocError::BudgetTooSmall {
            budget,
            image_count: counts.len(),
        });
    }
    debug_assert!(counts.iter().all(|&c| c >= 1), "counts must be pre-clamped");
    let total: u64 = counts.iter().map(|&c| c as u64).sum();
    if total <= budget as u64 {
        return Ok((Ratio::ONE, counts.to_vec()));
    }
    let alpha = Ratio::new(budget as u64, total);
    let scaled = counts
        .iter()
        .map(|&c| (((c as u64 * budget as u64) / total) as usize).max(1))
        .collect();
    Ok((alpha, scaled))
}

/// Compute the full allocation plan for a set of images under a tile budget.
///
/// Composition of [`initial_counts`], a clamp to ≥ 1, [`scale_counts`], and an
/// overflow repair loop: while the total exceeds the budget, the largest count
/// strictly greater than one is decremented, ties broken by lowest image index.
pub fn allocate(
    images: &[ImageSpec],
    geometry: &EncoderGeometry,
    budget: usize,
) -> Result<AllocationPlan, AllocError> {
    if images.is_empty() {
        return Err(AllocError::EmptyInput);
    }
    if budget < images.len() {
        return Err(AllocError::BudgetTooSmall {
            budget,
            image_count: images.len(),
        });
    }
    let mut seen = HashSet::new();
    for img in images {
        if img.height_px == 0 || img.width_px == 0 {
            return Err(AllocError::InvalidDimensions {
                id: img.id.clone(),
                height_px: img.height_px,
                width_px: img.width_px,
            });
        }
        if !seen.insert(img.id.as_str()) {
            return Err(AllocError::DuplicateId(img.id.clone()));
        }
    }

    let initial = initial_counts(images, geometry);
    let clamped: Vec<usize> = initial.iter().map(|&c| c.max(1)).collect();
    let (alpha, mut alloc) = scale_counts(&clamped, budget)?;

    // The re-clamp inside scale_counts can push the total back above the
    // budget; shave tiles off the largest allocations until it fits. The loop
    // terminates because budget ≥ image count and every count stays ≥ 1.
    while alloc.iter().sum::<usize>() > budget {
        let target = alloc
            .iter()
            .enumerate()
            .filter(|(_, &c)| c > 1)
            .max_by(|(ai, ac), (bi, bc)| ac.cmp(bc).then(bi.cmp(ai)))
            .map(|(i, _)| i)
            .expect("total > budget >= len implies some count > 1");
        alloc[target] -= 1;
    }

    let per_image = images
        .iter()
        .zip(initial.iter().zip(alloc.iter()))
        .map(|(img, (&s_initial, &s_alloc))| ImageAllocation {
            image_id: img.id.clone(),
            s_initial,
            s_alloc,
        })
        .collect();

    Ok(AllocationPlan {
        budget,
        alpha,
        per_image,
        geometry: geometry.clone(),
    })
}
