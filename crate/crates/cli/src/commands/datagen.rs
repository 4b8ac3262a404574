//! `mosaic datagen` — instruction-data construction subcommands.

use std::io::BufRead;
use std::path::Path;

use mosaic_core::datagen::{
    assemble_multiturn, dedup as dedup_instances, read_instances, render_table, split_table,
    write_instances, DatagenError, TableSpec,
};

use crate::error::CliError;

pub fn assemble(
    instances_path: &Path,
    k: usize,
    seed: u64,
    count: usize,
    out: &Path,
) -> Result<(), CliError> {
    let pool = read_instances(instances_path)?;
    let mut assembled = Vec::with_capacity(count);
    for i in 0..count {
        assembled.push(assemble_multiturn(&pool, k, seed.wrapping_add(i as u64))?);
    }
    write_instances(out, &assembled)?;
    println!(
        "assembled {count} samples of {k} images each from {} inputs (seed {seed}) -> {}",
        pool.len(),
        out.display(),
    );
    Ok(())
}

fn read_tables(path: &Path) -> Result<Vec<TableSpec>, CliError> {
    let file = std::fs::File::open(path)
        .map_err(|e| CliError::io(format!("cannot read {}: {e}", path.display())))?;
    let mut tables = Vec::new();
    for line in std::io::BufReader::new(file).lines() {
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        tables.push(serde_json::from_str::<TableSpec>(&line)?);
    }
    Ok(tables)
}

fn save_render(table: &TableSpec, path: &Path) -> Result<RenderOutcome, CliError> {
    match render_table(table) {
        Ok(img) => {
            img.save(path)
                .map_err(|e| CliError::io(format!("cannot write {}: {e}", path.display())))?;
            Ok(RenderOutcome::Rendered)
        }
        Err(DatagenError::FilteredOut { .. }) => Ok(RenderOutcome::Filtered),
        Err(DatagenError::EmptyTable) => Ok(RenderOutcome::Skipped),
        Err(e) => Err(e.into()),
    }
}

enum RenderOutcome {
    Rendered,
    Filtered,
    Skipped,
}

pub fn tables(tables_path: &Path, split: bool, seed: u64, out: &Path) -> Result<(), CliError> {
    let tables = read_tables(tables_path)?;
    std::fs::create_dir_all(out)?;
    let (mut rendered, mut filtered, mut skipped) = (0usize, 0usize, 0usize);
    for (i, table) in tables.iter().enumerate() {
        let outcomes = if split {
            match split_table(table, seed.wrapping_add(i as u64)) {
                Ok((a, b, _)) => vec![
                    save_render(&a, &out.join(format!("table{i:04}_a.png")))?,
                    save_render(&b, &out.join(format!("table{i:04}_b.png")))?,
                ],
                Err(DatagenError::TooSmall { .. }) => {
                    skipped += 1;
                    continue;
                }
                Err(e) => return Err(e.into()),
            }
        } else {
            vec![save_render(table, &out.join(format!("table{i:04}.png")))?]
        };
        for outcome in outcomes {
            match outcome {
                RenderOutcome::Rendered => rendered += 1,
                RenderOutcome::Filtered => filtered += 1,
                RenderOutcome::Skipped => skipped += 1,
            }
        }
    }
    println!(
        "rendered {rendered} table images to {} ({filtered} filtered by the 20-row rule, {skipped} skipped)",
        out.display(),
    );
    Ok(())
}

pub fn dedup(instances_path: &Path, out: &Path) -> Result<(), CliError> {
    let pool = read_instances(instances_path)?;
    let before = pool.len();
    let kept = dedup_instances(pool);
    println!(
        "dedup: kept {} of {before} instances -> {}",
        kept.len(),
        out.display()
    );
    write_instances(out, &kept)?;
    Ok(())
}
