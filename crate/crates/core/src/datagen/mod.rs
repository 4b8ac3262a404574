//! Construction of text-rich multi-image instruction data.
//!
//! Pipelines covered here: assembling multi-turn multi-image samples from
//! single-image instances, splitting tables into sub-tables and rendering
//! them as images, and content-hash deduplication. Every randomized operation
//! is seeded and byte-deterministic.

mod font;
mod render;

pub use render::{render_table, TableStyle};

use std::fs::{self, File};
use std::io::{self, BufRead, BufReader, BufWriter, Write};
use std::path::{Path, PathBuf};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};
use thiserror::Error;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Role {
    User,
    Assistant,
}

/// One conversation turn.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Turn {
    pub role: Role,
    pub text: String,
}

impl Turn {
    pub fn user(text: impl Into<String>) -> Self {
        Self {
            role: Role::User,
            text: text.into(),
        }
    }

    pub fn assistant(text: impl Into<String>) -> Self {
        Self {
            role: Role::Assistant,
            text: text.into(),
        }
    }
}

/// Where an image's bytes live.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ImageLocation {
    /// Path relative to the instance file (or absolute).
    Path(PathBuf),
    /// Raw bytes carried inline, base64 in the serialized form.
    Inline(#[serde(with = "base64_bytes")] Vec<u8>),
}

/// An image reference with its byte digest cached at construction time, so
/// hashing and deduplication stay pure.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ImageRef {
    pub location: ImageLocation,
    pub sha256: String,
}

impl ImageRef {
    pub fn inline(bytes: Vec<u8>) -> Self {
        let sha256 = sha256_hex(&bytes);
        Self {
            location: ImageLocation::Inline(bytes),
            sha256,
        }
    }

    /// Reference a file by path, digesting its current contents.
    pub fn from_file(path: impl Into<PathBuf>) -> io::Result<Self> {
        let path = path.into();
        let bytes = fs::read(&path)?;
        Ok(Self {
            location: ImageLocation::Path(path),
            sha256: sha256_hex(&bytes),
        })
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Default, Serialize, Deserialize)]
pub struct Meta {
    pub source_dataset: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub seed: Option<u64>,
    pub content_hash: String,
}

/// One training sample: ordered images plus alternating user/assistant turns.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct InstructionInstance {
    pub images: Vec<ImageRef>,
    pub turns: Vec<Turn>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub rationale: Option<String>,
    pub meta: Meta,
}

impl InstructionInstance {
    pub fn new(images: Vec<ImageRef>, turns: Vec<Turn>, source_dataset: impl Into<String>) -> Self {
        let content_hash = content_hash(&images, &turns);
        Self {
            images,
            turns,
            rationale: None,
            meta: Meta {
                source_dataset: source_dataset.into(),
                seed: None,
                content_hash,
            },
        }
    }

    /// Recompute the content hash after mutating images or turns.
    pub fn rehash(&mut self) {
        self.meta.content_hash = content_hash(&self.images, &self.turns);
    }
}

#[derive(Debug, Error)]
pub enum DatagenError {
    #[error("need {need} instances, got {have}")]
    NotEnoughInstances { have: usize, need: usize },
    #[error("assembly arity {0} is outside [2, 4]")]
    BadArity(usize),
    #[error("position {position} is invalid for {total} images")]
    BadIndex { position: usize, total: usize },
    #[error("instance is not assemblable: {0}")]
    MalformedInstance(String),
    #[error("table needs at least 2 data rows and 2 columns to split, has {rows}x{cols}")]
    TooSmall { rows: usize, cols: usize },
    #[error("table has {rows} data rows, over the 20-row rendering limit")]
    FilteredOut { rows: usize },
    #[error("table has no content to render")]
    EmptyTable,
    #[error("row {row} has {got} cells, header has {want}")]
    RaggedRow { row: usize, want: usize, got: usize },
    #[error("i/o error: {0}")]
    Io(#[from] io::Error),
    #[error("record parse error: {0}")]
    Json(#[from] serde_json::Error),
}

/// Trim and collapse internal whitespace runs; case is preserved.
pub fn normalize_text(text: &str) -> String {
    text.split_whitespace().collect::<Vec<_>>().join(" ")
}

pub fn sha256_hex(bytes: &[u8]) -> String {
    let digest = Sha256::digest(bytes);
    let mut out = String::with_capacity(64);
    for b in digest {
        out.push_str(&format!("{b:02x}"));
    }
    out
}

/// Digest of the per-image byte digests (in order) and the normalized turn
/// texts. Two instances with the same text but different image bytes hash
/// differently.
pub fn content_hash(images: &[ImageRef], turns: &[Turn]) -> String {
    let mut hasher = Sha256::new();
    for img in images {
        hasher.update(img.sha256.as_bytes());
        hasher.update([0u8]);
    }
    for turn in turns {
        hasher.update(match turn.role {
            Role::User => b"u",
            Role::Assistant => b"a",
        });
        hasher.update(normalize_text(&turn.text).as_bytes());
        hasher.update([0u8]);
    }
    let mut out = String::with_capacity(64);
    for b in hasher.finalize() {
        out.push_str(&format!("{b:02x}"));
    }
    out
}

/// Referring-phrase template inventory, extensible through configuration.
///
/// Ordinal templates apply at any position; side templates only when the
/// sample has exactly two images.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ReferringTemplates {
    /// Patterns containing `{ordinal}`.
    pub ordinal: Vec<String>,
    /// Patterns containing `{side}`; usable only when total = 2.
    pub side: Vec<String>,
}

const ORDINALS: [&str; 4] = ["first", "second", "third", "fourth"];

impl Default for ReferringTemplates {
    fn default() -> Self {
        Self {
            ordinal: vec!["In the {ordinal} image, ".to_string()],
            side: vec!["From the image on the {side}, ".to_string()],
        }
    }
}

impl ReferringTemplates {
    /// All phrases applicable to `position` out of `total`.
    pub fn candidates(&self, position: usize, total: usize) -> Result<Vec<String>, DatagenError> {
        if position == 0 || position > total || !(2..=4).contains(&total) {
            return Err(DatagenError::BadIndex { position, total });
        }
        let mut out: Vec<String> = self
            .ordinal
            .iter()
            .map(|t| t.replace("{ordinal}", ORDINALS[position - 1]))
            .collect();
        if total == 2 {
            let side = if position == 1 { "left" } else { "right" };
            out.extend(self.side.iter().map(|t| t.replace("{side}", side)));
        }
        Ok(out)
    }
}

/// Seeded choice of a referring phrase for one image position.
pub fn referring_phrase(position: usize, total: usize, seed: u64) -> Result<String, DatagenError> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    referring_phrase_with(&ReferringTemplates::default(), position, total, &mut rng)
}

fn referring_phrase_with(
    templates: &ReferringTemplates,
    position: usize,
    total: usize,
    rng: &mut impl Rng,
) -> Result<String, DatagenError> {
    let candidates = templates.candidates(position, total)?;
    Ok(candidates[rng.random_range(0..candidates.len())].clone())
}

fn check_assemblable(instance: &InstructionInstance) -> Result<(), DatagenError> {
    if instance.images.len() != 1 {
        return Err(DatagenError::MalformedInstance(format!(
            "expected exactly 1 image, found {}",
            instance.images.len()
        )));
    }
    if instance.turns.len() < 2 || !instance.turns.len().is_multiple_of(2) {
        return Err(DatagenError::MalformedInstance(format!(
            "expected alternating QA pairs, found {} turns",
            instance.turns.len()
        )));
    }
    for (i, turn) in instance.turns.iter().enumerate() {
        let expected = if i % 2 == 0 {
            Role::User
        } else {
            Role::Assistant
        };
        if turn.role != expected {
            return Err(DatagenError::MalformedInstance(format!(
                "turn {i} must be {expected:?}"
            )));
        }
    }
    Ok(())
}

/// Combine `k` single-image instances into one multi-image multi-turn sample.
///
/// Instances are drawn without replacement in seeded order; their images are
/// concatenated and their QA pairs stacked in the same order, with each user
/// turn prefixed by a referring phrase for its image position.
pub fn assemble_multiturn(
    instances: &[InstructionInstance],
    k: usize,
    seed: u64,
) -> Result<InstructionInstance, DatagenError> {
    assemble_multiturn_with(instances, k, seed, &ReferringTemplates::default())
}

pub fn assemble_multiturn_with(
    instances: &[InstructionInstance],
    k: usize,
    seed: u64,
    templates: &ReferringTemplates,
) -> Result<InstructionInstance, DatagenError> {
    if !(2..=4).contains(&k) {
        return Err(DatagenError::BadArity(k));
    }
    if instances.len() < k {
        return Err(DatagenError::NotEnoughInstances {
            have: instances.len(),
            need: k,
        });
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let chosen = rand::seq::index::sample(&mut rng, instances.len(), k);

    let mut images = Vec::with_capacity(k);
    let mut turns = Vec::new();
    let mut sources: Vec<&str> = Vec::new();
    for (position, idx) in chosen.iter().enumerate() {
        let inst = &instances[idx];
        check_assemblable(inst)?;
        images.push(inst.images[0].clone());
        if !sources.contains(&inst.meta.source_dataset.as_str()) {
            sources.push(&inst.meta.source_dataset);
        }
        for turn in &inst.turns {
            turns.push(match turn.role {
                Role::User => {
                    let prefix = referring_phrase_with(templates, position + 1, k, &mut rng)?;
                    Turn::user(format!("{prefix}{}", turn.text))
                }
                Role::Assistant => turn.clone(),
            });
        }
    }

    let mut out = InstructionInstance::new(images, turns, sources.join("+"));
    out.meta.seed = Some(seed);
    Ok(out)
}

/// A table to be split and rendered.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct TableSpec {
    pub header: Vec<String>,
    pub rows: Vec<Vec<String>>,
    #[serde(default)]
    pub style_id: u8,
}

impl TableSpec {
    pub fn column_count(&self) -> usize {
        self.header.len()
    }

    pub(crate) fn check_rect(&self) -> Result<(), DatagenError> {
        let want = self.header.len();
        for (row, cells) in self.rows.iter().enumerate() {
            if cells.len() != want {
                return Err(DatagenError::RaggedRow {
                    row,
                    want,
                    got: cells.len(),
                });
            }
        }
        Ok(())
    }
}

/// Which way a table was split.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SplitAxis {
    Rows,
    Columns,
}

/// Split a table into two sub-tables along a seeded axis and pivot.
///
/// A row split keeps the full header in both halves; a column split keeps all
/// rows with disjoint column subsets. The halves always reconstruct the
/// original exactly.
pub fn split_table(
    table: &TableSpec,
    seed: u64,
) -> Result<(TableSpec, TableSpec, SplitAxis), DatagenError> {
    table.check_rect()?;
    let (rows, cols) = (table.rows.len(), table.column_count());
    if rows < 2 || cols < 2 {
        return Err(DatagenError::TooSmall { rows, cols });
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let axis = if rng.random_bool(0.5) {
        SplitAxis::Rows
    } else {
        SplitAxis::Columns
    };
    match axis {
        SplitAxis::Rows => {
            let pivot = rng.random_range(1..rows);
            let first = TableSpec {
                header: table.header.clone(),
                rows: table.rows[..pivot].to_vec(),
                style_id: table.style_id,
            };
            let second = TableSpec {
                header: table.header.clone(),
                rows: table.rows[pivot..].to_vec(),
                style_id: table.style_id,
            };
            Ok((first, second, axis))
        }
        SplitAxis::Columns => {
            let pivot = rng.random_range(1..cols);
            let take = |range: std::ops::Range<usize>| TableSpec {
                header: table.header[range.clone()].to_vec(),
                rows: table
                    .rows
                    .iter()
                    .map(|r| r[range.clone()].to_vec())
                    .collect(),
                style_id: table.style_id,
            };
            Ok((take(0..pivot), take(pivot..cols), axis))
        }
    }
}

/// Drop exact duplicates by content hash, keeping the first occurrence.
pub fn dedup(instances: Vec<InstructionInstance>) -> Vec<InstructionInstance> {
    let mut seen = std::collections::HashSet::new();
    instances
        .into_iter()
        .filter(|inst| seen.insert(inst.meta.content_hash.clone()))
        .collect()
}

/// Write instances as line-delimited JSON records.
pub fn write_instances(
    path: impl AsRef<Path>,
    instances: &[InstructionInstance],
) -> Result<(), DatagenError> {
    let mut w = BufWriter::new(File::create(path)?);
    for inst in instances {
        serde_json::to_writer(&mut w, inst)?;
        w.write_all(b"\n")?;
    }
    w.flush()?;
    Ok(())
}

/// Read line-delimited instance records; blank lines are skipped.
pub fn read_instances(path: impl AsRef<Path>) -> Result<Vec<InstructionInstance>, DatagenError> {
    let reader = BufReader::new(File::open(path)?);
    let mut out = Vec::new();
    for line in reader.lines() {
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        out.push(serde_json::from_str(&line)?);
    }
    Ok(out)
}

mod base64_bytes {
    use base64::engine::general_purpose::STANDARD;
    use base64::Engine;
    use serde::{Deserialize, Deserializer, Serializer};

    pub fn serialize<S: Serializer>(bytes: &[u8], serializer: S) -> Result<S::Ok, S::Error> {
        serializer.serialize_str(&STANDARD.encode(bytes))
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(deserializer: D) -> Result<Vec<u8>, D::Error> {
        let text = String::deserialize(deserializer)?;
        STANDARD.decode(&text).map_err(serde::de::Error::custom)
    }
}
