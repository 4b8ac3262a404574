//! `mosaic plan` — solve the tile allocation and per-image grid.

use std::path::{Path, PathBuf};

use mosaic_core::allocator::{allocate, ImageSpec};
use mosaic_core::partitioner::search_grid;

use crate::config::Settings;
use crate::error::CliError;
use crate::manifest::{CanvasShape, GridShape, Manifest, ManifestImage, Totals, MANIFEST_VERSION};

const IMAGE_EXTENSIONS: [&str; 3] = ["png", "jpg", "jpeg"];

/// Expand files and directories into a sorted list of image paths.
fn collect_images(inputs: &[PathBuf]) -> Result<Vec<PathBuf>, CliError> {
    let mut files = Vec::new();
    for input in inputs {
        if input.is_dir() {
            let mut entries: Vec<PathBuf> = std::fs::read_dir(input)
                .map_err(|e| CliError::io(format!("cannot list {}: {e}", input.display())))?
                .collect::<Result<Vec<_>, _>>()?
                .into_iter()
                .map(|e| e.path())
                .filter(|p| {
                    p.extension()
                        .and_then(|e| e.to_str())
                        .is_some_and(|e| IMAGE_EXTENSIONS.contains(&e.to_lowercase().as_str()))
                })
                .collect();
            entries.sort();
            files.extend(entries);
        } else if input.is_file() {
            files.push(input.clone());
        } else {
            return Err(CliError::io(format!(
                "no such image path: {}",
                input.display()
            )));
        }
    }
    Ok(files)
}

fn id_for(path: &Path) -> String {
    path.file_stem()
        .map(|s| s.to_string_lossy().into_owned())
        .unwrap_or_else(|| path.display().to_string())
}

pub fn run(inputs: &[PathBuf], out: &Path, settings: &Settings) -> Result<(), CliError> {
    let files = collect_images(inputs)?;
    let mut specs = Vec::with_capacity(files.len());
    for path in &files {
        let (width, height) = image::image_dimensions(path)
            .map_err(|e| CliError::io(format!("cannot read {}: {e}", path.display())))?;
        specs.push(ImageSpec::new(id_for(path), height, width).with_path(path.clone()));
    }

    let plan = allocate(&specs, &settings.geometry, settings.budget)?;

    let images = plan
        .per_image
        .iter()
        .zip(specs.iter())
        .map(|(alloc, spec)| {
            let grid = search_grid(
                spec.height_px,
                spec.width_px,
                alloc.s_alloc,
                &settings.geometry,
            );
            ManifestImage {
                id: alloc.image_id.clone(),
                path: spec.source_path.clone().expect("plan sets source paths"),
                height_px: spec.height_px,
                width_px: spec.width_px,
                s_initial: alloc.s_initial,
                s_alloc: alloc.s_alloc,
                grid: GridShape {
                    rows: grid.rows,
                    cols: grid.cols,
                },
                canvas: CanvasShape {
                    h: grid.canvas_h,
                    w: grid.canvas_w,
                },
                content_rect: grid.content_rect,
                dedup_single_tile: grid.rows == 1 && grid.cols == 1,
                tile_paths: Vec::new(),
                global_tile_path: None,
                tensor_paths: Vec::new(),
                tensor_dims: None,
            }
        })
        .collect();

    let mut manifest = Manifest {
        version: MANIFEST_VERSION,
        geometry: settings.geometry.clone(),
        shuffle_layout: settings.shuffle_layout,
        budget: plan.budget,
        alpha: plan.alpha,
        images,
        totals: Totals {
            sub_tiles: 0,
            global_tiles: 0,
            feature_tokens: 0,
        },
    };
    manifest.refresh_totals();
    manifest.save(out)?;

    println!(
        "planned {} images under budget {} (alpha = {}/{}): {} sub-tiles + {} global views, {} feature tokens",
        manifest.images.len(),
        manifest.budget,
        manifest.alpha.numerator,
        manifest.alpha.denominator,
        manifest.totals.sub_tiles,
        manifest.totals.global_tiles,
        manifest.totals.feature_tokens,
    );
    for img in &manifest.images {
        println!(
            "  {}: {}x{} S={} S'={} grid {}x{}{}",
            img.id,
            img.height_px,
            img.width_px,
            img.s_initial,
            img.s_alloc,
            img.grid.rows,
            img.grid.cols,
            if img.dedup_single_tile {
                " (global only)"
            } else {
                ""
            },
        );
    }
    Ok(())
}
