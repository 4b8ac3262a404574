//! `mosaic sequence` — assemble the interleaved token layout and gate it
//! against the sequence budget.

use std::io::BufRead;
use std::path::Path;

use mosaic_core::sequencer::{
    assemble_from_counts, check_budget, serialize_sequence, BudgetVerdict, ImageTileCount,
    TextInsert,
};

use crate::config::Settings;
use crate::error::{CliError, EXIT_OVERFLOW};
use crate::manifest::Manifest;

fn read_text_inserts(path: &Path) -> Result<Vec<TextInsert>, CliError> {
    let file = std::fs::File::open(path)
        .map_err(|e| CliError::io(format!("cannot read {}: {e}", path.display())))?;
    let mut inserts = Vec::new();
    for line in std::io::BufReader::new(file).lines() {
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        inserts.push(serde_json::from_str::<TextInsert>(&line)?);
    }
    Ok(inserts)
}

pub fn run(
    manifest_path: &Path,
    text: Option<&Path>,
    out: &Path,
    settings: &Settings,
) -> Result<(), CliError> {
    let manifest = Manifest::load(manifest_path)?;
    let texts = match text {
        Some(path) => read_text_inserts(path)?,
        None => Vec::new(),
    };
    let counts: Vec<ImageTileCount> = manifest
        .images
        .iter()
        .map(|img| ImageTileCount {
            image_id: img.id.clone(),
            emitted_tiles: img.emitted_tiles(),
        })
        .collect();
    let sequence = assemble_from_counts(&counts, &texts, &manifest.geometry)?;
    std::fs::write(out, serialize_sequence(&sequence))?;

    println!(
        "sequence: {} segments, {} feature tokens (exact), {} total tokens (text estimated), budget {}",
        sequence.segments.len(),
        sequence.feature_tokens,
        sequence.total_tokens,
        settings.max_tokens,
    );
    match check_budget(&sequence, settings.max_tokens) {
        BudgetVerdict::Ok => Ok(()),
        BudgetVerdict::Exceeded { overflow } => Err(CliError::new(
            EXIT_OVERFLOW,
            format!(
                "sequence exceeds the {}-token budget by {overflow} feature tokens",
                settings.max_tokens
            ),
        )),
    }
}
