//! `mosaic encode` — mock-encode every tile and write shuffled FTEN tensors.

use std::path::{Path, PathBuf};

use mosaic_core::ften;
use mosaic_core::shuffler::{mock_encode, pixel_shuffle_with_layout, FeatureTensor};
use rayon::prelude::*;

use crate::config::Settings;
use crate::error::CliError;
use crate::manifest::{Manifest, ManifestImage};

struct EncodeOutput {
    tensor_paths: Vec<PathBuf>,
    dims: [usize; 3],
}

fn encode_tile(
    tile_path: &Path,
    out: &Path,
    manifest: &Manifest,
) -> Result<(PathBuf, FeatureTensor), CliError> {
    let raster = image::open(tile_path)
        .map_err(|e| CliError::io(format!("cannot read {}: {e}", tile_path.display())))?
        .to_rgb8();
    let raw = mock_encode(&raster, &manifest.geometry)?;
    let shuffled = pixel_shuffle_with_layout(
        &raw,
        manifest.geometry.shuffle_factor,
        manifest.shuffle_layout,
    )?;
    let stem = tile_path
        .file_stem()
        .map(|s| s.to_string_lossy().into_owned())
        .unwrap_or_else(|| "tile".to_string());
    let tensor_path = out.join(format!("{stem}.ften"));
    ften::write_tensor_file(&tensor_path, &shuffled)?;
    Ok((tensor_path, shuffled))
}

fn encode_image(
    entry: &ManifestImage,
    manifest: &Manifest,
    out: &Path,
) -> Result<EncodeOutput, CliError> {
    let global = entry.global_tile_path.as_deref().ok_or_else(|| {
        CliError::io(format!(
            "image {:?} has no tiles on disk; run `mosaic tile` first",
            entry.id
        ))
    })?;
    let mut tensor_paths = Vec::with_capacity(entry.tile_paths.len() + 1);
    let mut dims = None;
    for tile_path in entry
        .tile_paths
        .iter()
        .map(PathBuf::as_path)
        .chain([global])
    {
        let (tensor_path, tensor) = encode_tile(tile_path, out, manifest)?;
        dims = Some([tensor.grid_h, tensor.grid_w, tensor.dim]);
        tensor_paths.push(tensor_path);
    }
    Ok(EncodeOutput {
        tensor_paths,
        dims: dims.expect("every image has at least the global tile"),
    })
}

pub fn run(manifest_path: &Path, out: &Path, settings: &Settings) -> Result<(), CliError> {
    let mut manifest = Manifest::load(manifest_path)?;
    // The manifest geometry stays authoritative for tile and patch sizes;
    // only the compression choices are encode-time parameters.
    manifest.geometry = manifest
        .geometry
        .clone()
        .with_shuffle_factor(settings.geometry.shuffle_factor)?;
    manifest.shuffle_layout = settings.shuffle_layout;
    std::fs::create_dir_all(out)?;

    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(settings.workers)
        .build()
        .map_err(|e| CliError::usage(e.to_string()))?;
    let outputs: Vec<EncodeOutput> = pool.install(|| {
        manifest
            .images
            .par_iter()
            .map(|entry| encode_image(entry, &manifest, out))
            .collect::<Result<Vec<_>, _>>()
    })?;

    let tensor_count: usize = outputs.iter().map(|o| o.tensor_paths.len()).sum();
    for (entry, output) in manifest.images.iter_mut().zip(outputs) {
        entry.tensor_paths = output.tensor_paths;
        entry.tensor_dims = Some(output.dims);
    }
    manifest.refresh_totals();
    manifest.save(manifest_path)?;

    if let Some(dims) = manifest.images.first().and_then(|i| i.tensor_dims) {
        println!(
            "encoded {tensor_count} tiles to {} as ({}, {}, {}) float32 tensors, {} feature tokens total",
            out.display(),
            dims[0],
            dims[1],
            dims[2],
            manifest.totals.feature_tokens,
        );
    }
    Ok(())
}
