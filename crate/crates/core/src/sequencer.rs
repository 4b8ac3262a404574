//! Interleaved image/text token layout and sequence budget accounting.
//!
//! Each image is rendered as `Image {i}: <Img> <features> </Img>` where
//! `<Img>` and `</Img>` are special one-token markers and the feature block
//! counts one token per (post-shuffle) visual feature. Visual token counts
//! are exact; text and header counts come from a pluggable estimator and are
//! approximate, so the budget verdict is taken on the visual tokens.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::allocator::AllocationPlan;
use crate::geometry::EncoderGeometry;
use crate::partitioner::TileSet;

/// Default LM sequence budget.
pub const DEFAULT_MAX_TOKENS: usize = 8192;

/// Tokens consumed by each of `<Img>` and `</Img>`.
pub const MARKER_TOKENS: usize = 1;

pub const IMG_OPEN: &str = "<Img>";
pub const IMG_CLOSE: &str = "</Img>";

/// Estimates how many LM tokens a text span costs.
///
/// The real tokenizer is out of scope; the default estimator counts
/// whitespace-separated words and is documented as approximate.
pub trait TokenEstimator {
    fn count_tokens(&self, text: &str) -> usize;
}

/// Word-count estimator: one token per whitespace-separated word.
#[derive(Debug, Clone, Copy, Default)]
pub struct WhitespaceEstimator;

impl TokenEstimator for WhitespaceEstimator {
    fn count_tokens(&self, text: &str) -> usize {
        text.split_whitespace().count()
    }
}

/// One element of the interleaved layout.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Segment {
    Text {
        text: String,
        token_count: usize,
    },
    ImageHeader {
        image_id: Option<String>,
        text: String,
        token_count: usize,
    },
    ImgOpen {
        image_id: Option<String>,
    },
    FeatureBlock {
        image_id: Option<String>,
        token_count: usize,
    },
    ImgClose {
        image_id: Option<String>,
    },
}

impl Segment {
    pub fn token_count(&self) -> usize {
        match self {
            Segment::Text { token_count, .. }
            | Segment::ImageHeader { token_count, .. }
            | Segment::FeatureBlock { token_count, .. } => *token_count,
            Segment::ImgOpen { .. } | Segment::ImgClose { .. } => MARKER_TOKENS,
        }
    }
}

/// A fully assembled interleaved sequence with token accounting.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct TokenSequence {
    pub segments: Vec<Segment>,
    /// Sum of all segment token counts, including estimated text tokens.
    pub total_tokens: usize,
    /// Sum of feature-block tokens only; exact by construction.
    pub feature_tokens: usize,
    pub max_tokens: usize,
}

/// Text to interleave before/after images. `position` counts how many images
/// precede the text: 0 places it before the first image, `k` after the k-th.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct TextInsert {
    pub position: usize,
    pub text: String,
}

/// Tile accounting for one image, enough to size its feature block.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ImageTileCount {
    pub image_id: String,
    /// Tiles that will be encoded: sub-tiles plus the global view.
    pub emitted_tiles: usize,
}

#[derive(Debug, Error, PartialEq, Eq)]
pub enum SequenceError {
    #[error("feature block for image {0:?} would be empty")]
    EmptyBlock(String),
    #[error("plan lists {plan} images but {tilesets} tile sets were supplied")]
    PlanMismatch { plan: usize, tilesets: usize },
    #[error("tile set {tileset:?} does not match plan entry {plan:?}")]
    PlanOrderMismatch { plan: String, tileset: String },
    #[error("image index must be >= 1")]
    ZeroIndex,
    #[error("malformed sequence: {0}")]
    Malformed(String),
}

/// Budget verdict for a sequence; never a crash.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum BudgetVerdict {
    Ok,
    Exceeded { overflow: usize },
}

impl BudgetVerdict {
    pub fn is_ok(self) -> bool {
        matches!(self, BudgetVerdict::Ok)
    }
}

/// Render the segment run for the i-th image: header, `<Img>`, one feature
/// block, `</Img>`.
pub fn render_image_segment(
    index: usize,
    feature_tokens: usize,
) -> Result<Vec<Segment>, SequenceError> {
    render_segments_for(
        index,
        Some(index.to_string()),
        feature_tokens,
        &WhitespaceEstimator,
    )
}

fn render_segments_for(
    index: usize,
    image_id: Option<String>,
    feature_tokens: usize,
    estimator: &dyn TokenEstimator,
) -> Result<Vec<Segment>, SequenceError> {
    if index == 0 {
        return Err(SequenceError::ZeroIndex);
    }
    if feature_tokens == 0 {
        return Err(SequenceError::EmptyBlock(
            image_id.unwrap_or_else(|| index.to_string()),
        ));
    }
    let header = format!("Image {index}: ");
    Ok(vec![
        Segment::ImageHeader {
            image_id: image_id.clone(),
            token_count: estimator.count_tokens(&header),
            text: header,
        },
        Segment::ImgOpen {
            image_id: image_id.clone(),
        },
        Segment::FeatureBlock {
            image_id: image_id.clone(),
            token_count: feature_tokens,
        },
        Segment::ImgClose { image_id },
    ])
}

/// Assemble a sequence from per-image tile counts.
///
/// Images appear in input order; each contributes
/// `emitted_tiles × geometry.features_per_tile()` feature tokens. Text inserts
/// are placed by their position, stably, with out-of-range positions clamped
/// to the end.
pub fn assemble_from_counts(
    images: &[ImageTileCount],
    texts: &[TextInsert],
    geometry: &EncoderGeometry,
) -> Result<TokenSequence, SequenceError> {
    assemble_from_counts_with(images, texts, geometry, &WhitespaceEstimator)
}

pub fn assemble_from_counts_with(
    images: &[ImageTileCount],
    texts: &[TextInsert],
    geometry: &EncoderGeometry,
    estimator: &dyn TokenEstimator,
) -> Result<TokenSequence, SequenceError> {
    let per_tile = geometry.features_per_tile();
    let mut segments = Vec::new();
    let push_texts = |segments: &mut Vec<Segment>, position: usize| {
        for t in texts
            .iter()
            .filter(|t| t.position.min(images.len()) == position)
        {
            segments.push(Segment::Text {
                token_count: estimator.count_tokens(&t.text),
                text: t.text.clone(),
            });
        }
    };
    push_texts(&mut segments, 0);
    for (i, img) in images.iter().enumerate() {
        let feature_tokens = img.emitted_tiles * per_tile;
        segments.extend(render_segments_for(
            i + 1,
            Some(img.image_id.clone()),
            feature_tokens,
            estimator,
        )?);
        push_texts(&mut segments, i + 1);
    }
    let total_tokens = segments.iter().map(Segment::token_count).sum();
    let feature_tokens = segments
        .iter()
        .filter(|s| matches!(s, Segment::FeatureBlock { .. }))
        .map(Segment::token_count)
        .sum();
    Ok(TokenSequence {
        segments,
        total_tokens,
        feature_tokens,
        max_tokens: DEFAULT_MAX_TOKENS,
    })
}

/// Assemble a sequence from an allocation plan and its realized tile sets.
pub fn assemble_sequence(
    plan: &AllocationPlan,
    tilesets: &[TileSet],
    texts: &[TextInsert],
    geometry: &EncoderGeometry,
) -> Result<TokenSequence, SequenceError> {
    if plan.per_image.len() != tilesets.len() {
        return Err(SequenceError::PlanMismatch {
            plan: plan.per_image.len(),
            tilesets: tilesets.len(),
        });
    }
    let counts: Vec<ImageTileCount> = plan
        .per_image
        .iter()
        .zip(tilesets.iter())
        .map(|(alloc, ts)| {
            if alloc.image_id != ts.image_id {
                return Err(SequenceError::PlanOrderMismatch {
                    plan: alloc.image_id.clone(),
                    tileset: ts.image_id.clone(),
                });
            }
            Ok(ImageTileCount {
                image_id: ts.image_id.clone(),
                emitted_tiles: ts.emitted_tiles(),
            })
        })
        .collect::<Result<_, _>>()?;
    assemble_from_counts(&counts, texts, geometry)
}

/// Check the exact visual-feature token total against the budget.
///
/// Text and marker counts are heuristic estimates and are reported through
/// `total_tokens` but not gated here; the feature total is exact.
pub fn check_budget(seq: &TokenSequence, max_tokens: usize) -> BudgetVerdict {
    if seq.feature_tokens <= max_tokens {
        BudgetVerdict::Ok
    } else {
        BudgetVerdict::Exceeded {
            overflow: seq.feature_tokens - max_tokens,
        }
    }
}

/// Line-delimited serialized form: literal text lines, `<Img>`, `</Img>`, and
/// `<feat:{count}>` placeholders. Backslashes and newlines inside text are
/// escaped so each segment stays on one line.
pub fn serialize_sequence(seq: &TokenSequence) -> String {
    let mut out = String::new();
    for segment in &seq.segments {
        match segment {
            Segment::Text { text, .. } | Segment::ImageHeader { text, .. } => {
                out.push_str(&escape_line(text));
            }
            Segment::ImgOpen { .. } => out.push_str(IMG_OPEN),
            Segment::FeatureBlock { token_count, .. } => {
                out.push_str(&format!("<feat:{token_count}>"));
            }
            Segment::ImgClose { .. } => out.push_str(IMG_CLOSE),
        }
        out.push('\n');
    }
    out
}

/// Parse the line-delimited form back, validating marker structure.
///
/// Header lines are indistinguishable from ordinary text when parsing, so
/// they come back as `Text` segments; token accounting is re-estimated.
pub fn parse_sequence(
    input: &str,
    estimator: &dyn TokenEstimator,
) -> Result<TokenSequence, SequenceError> {
    let mut segments = Vec::new();
    for line in input.lines() {
        if line == IMG_OPEN {
            segments.push(Segment::ImgOpen { image_id: None });
        } else if line == IMG_CLOSE {
            segments.push(Segment::ImgClose { image_id: None });
        } else if let Some(count) = line
            .strip_prefix("<feat:")
            .and_then(|rest| rest.strip_suffix('>'))
        {
            let token_count = count
                .parse::<usize>()
                .map_err(|_| SequenceError::Malformed(format!("bad feature count {count:?}")))?;
            segments.push(Segment::FeatureBlock {
                image_id: None,
                token_count,
            });
        } else {
            let text = unescape_line(line);
            segments.push(Segment::Text {
                token_count: estimator.count_tokens(&text),
                text,
            });
        }
    }
    let total_tokens = segments.iter().map(Segment::token_count).sum();
    let feature_tokens = segments
        .iter()
        .filter(|s| matches!(s, Segment::FeatureBlock { .. }))
        .map(Segment::token_count)
        .sum();
    let seq = TokenSequence {
        segments,
        total_tokens,
        feature_tokens,
        max_tokens: DEFAULT_MAX_TOKENS,
    };
    validate_structure(&seq)?;
    Ok(seq)
}

/// Check marker well-formedness: every `<Img>` is closed by `</Img>` for the
/// same image with exactly one feature block in between, and feature blocks
/// never appear outside markers.
pub fn validate_structure(seq: &TokenSequence) -> Result<(), SequenceError> {
    let mut open: Option<(&Option<String>, bool)> = None;
    for segment in &seq.segments {
        match (segment, &mut open) {
            (Segment::ImgOpen { image_id }, None) => open = Some((image_id, false)),
            (Segment::ImgOpen { .. }, Some(_)) => {
                return Err(SequenceError::Malformed("nested <Img>".into()));
            }
            (Segment::FeatureBlock { image_id, .. }, Some((open_id, seen))) => {
                if image_id != *open_id {
                    return Err(SequenceError::Malformed(
                        "feature block for a different image".into(),
                    ));
                }
                if *seen {
                    return Err(SequenceError::Malformed(
                        "multiple feature blocks in one <Img>".into(),
                    ));
                }
                *seen = true;
            }
            (Segment::FeatureBlock { .. }, None) => {
                return Err(SequenceError::Malformed(
                    "feature block outside <Img>".into(),
                ));
            }
            (Segment::ImgClose { image_id }, Some((open_id, seen))) => {
                if image_id != *open_id {
                    return Err(SequenceError::Malformed("mismatched </Img>".into()));
                }
                if !*seen {
                    return Err(SequenceError::Malformed("empty <Img> block".into()));
                }
                open = None;
            }
            (Segment::ImgClose { .. }, None) => {
                return Err(SequenceError::Malformed("</Img> without <Img>".into()));
            }
            (Segment::Text { .. } | Segment::ImageHeader { .. }, Some(_)) => {
                return Err(SequenceError::Malformed("text inside <Img>".into()));
            }
            (Segment::Text { .. } | Segment::ImageHeader { .. }, None) => {}
        }
    }
    if open.is_some() {
        return Err(SequenceError::Malformed("unclosed <Img>".into()));
    }
    Ok(())
}

fn escape_line(text: &str) -> String {
    text.replace('\\', "\\\\").replace('\n', "\\n")
}

fn unescape_line(line: &str) -> String {
    let mut out = String::with_capacity(line.len());
    let mut chars = line.chars();
    while let Some(c) = chars.next() {
        if c == '\\' {
            match chars.next() {
                Some('n') => out.push('\n'),
                Some('\\') => out.push('\\'),
                Some(other) => {
                    out.push('\\');
                    out.push(other);
                }
                None => out.push('\\'),
            }
        } else {
            out.push(c);
        }
    }
    out
}
