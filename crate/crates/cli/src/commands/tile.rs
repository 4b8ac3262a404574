//! `mosaic tile` — write the padded, split tiles for every planned image.

use std::path::{Path, PathBuf};

use mosaic_core::partitioner::partition;
use rayon::prelude::*;

use crate::config::Settings;
use crate::error::{CliError, EXIT_SHAPE};
use crate::manifest::{Manifest, ManifestImage};

struct TileOutput {
    tile_paths: Vec<PathBuf>,
    global_tile_path: PathBuf,
}

fn tile_one(
    entry: &ManifestImage,
    manifest: &Manifest,
    out: &Path,
) -> Result<TileOutput, CliError> {
    let raster = image::open(&entry.path)
        .map_err(|e| CliError::io(format!("cannot read {}: {e}", entry.path.display())))?
        .to_rgb8();
    let set = partition(&raster, entry.id.clone(), entry.s_alloc, &manifest.geometry)?;
    if (set.grid.rows, set.grid.cols) != (entry.grid.rows, entry.grid.cols) {
        return Err(CliError::new(
            EXIT_SHAPE,
            format!(
                "image {:?} re-partitioned to grid {}x{}, manifest says {}x{} (image changed since plan?)",
                entry.id, set.grid.rows, set.grid.cols, entry.grid.rows, entry.grid.cols
            ),
        ));
    }

    let mut tile_paths = Vec::with_capacity(set.sub_tiles.len());
    for (i, tile) in set.sub_tiles.iter().enumerate() {
        let row = i as u32 / set.grid.cols;
        let col = i as u32 % set.grid.cols;
        let path = out.join(format!("{}_r{row}c{col}.png", entry.id));
        tile.save(&path)
            .map_err(|e| CliError::io(format!("cannot write {}: {e}", path.display())))?;
        tile_paths.push(path);
    }
    let global_tile_path = out.join(format!("{}_g.png", entry.id));
    set.global_tile
        .save(&global_tile_path)
        .map_err(|e| CliError::io(format!("cannot write {}: {e}", global_tile_path.display())))?;
    Ok(TileOutput {
        tile_paths,
        global_tile_path,
    })
}

pub fn run(manifest_path: &Path, out: &Path, settings: &Settings) -> Result<(), CliError> {
    let mut manifest = Manifest::load(manifest_path)?;
    std::fs::create_dir_all(out)?;

    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(settings.workers)
        .build()
        .map_err(|e| CliError::usage(e.to_string()))?;
    let outputs: Vec<TileOutput> = pool.install(|| {
        manifest
            .images
            .par_iter()
            .map(|entry| tile_one(entry, &manifest, out))
            .collect::<Result<Vec<_>, _>>()
    })?;

    for (entry, output) in manifest.images.iter_mut().zip(outputs) {
        entry.tile_paths = output.tile_paths;
        entry.global_tile_path = Some(output.global_tile_path);
    }
    manifest.refresh_totals();
    manifest.save(manifest_path)?;

    println!(
        "tiled {} images into {} sub-tiles + {} global views under {}",
        manifest.images.len(),
        manifest.totals.sub_tiles,
        manifest.totals.global_tiles,
        out.display(),
    );
    Ok(())
}
