//! CLI error carrying a stable exit code.
//!
//! Exit codes: 0 ok, 2 budget too small, 3 I/O, 4 shape/format violation,
//! 5 sequence budget overflow, 6 missing credential, 7 empty input,
//! 1 everything else.

use mosaic_annotator::AnnotatorError;
use mosaic_core::allocator::AllocError;
use mosaic_core::datagen::DatagenError;
use mosaic_core::ften::FtenError;
use mosaic_core::geometry::GeometryError;
use mosaic_core::metrics::MetricsError;
use mosaic_core::partitioner::PartitionError;
use mosaic_core::sequencer::SequenceError;
use mosaic_core::shuffler::ShapeError;

use crate::config::ConfigError;
use crate::manifest::ManifestError;

pub const EXIT_BUDGET: i32 = 2;
pub const EXIT_IO: i32 = 3;
pub const EXIT_SHAPE: i32 = 4;
pub const EXIT_OVERFLOW: i32 = 5;
pub const EXIT_CREDENTIAL: i32 = 6;
pub const EXIT_EMPTY: i32 = 7;

#[derive(Debug)]
pub struct CliError {
    pub code: i32,
    pub message: String,
}

impl CliError {
    pub fn new(code: i32, message: impl Into<String>) -> Self {
        Self {
            code,
            message: message.into(),
        }
    }

    pub fn usage(message: impl Into<String>) -> Self {
        Self::new(1, message)
    }

    pub fn io(message: impl Into<String>) -> Self {
        Self::new(EXIT_IO, message)
    }
}

impl From<AllocError> for CliError {
    fn from(e: AllocError) -> Self {
        let code = match &e {
            AllocError::BudgetTooSmall { .. } => EXIT_BUDGET,
            AllocError::EmptyInput => EXIT_EMPTY,
            _ => 1,
        };
        Self::new(code, e.to_string())
    }
}

impl From<PartitionError> for CliError {
    fn from(e: PartitionError) -> Self {
        Self::new(EXIT_SHAPE, e.to_string())
    }
}

impl From<ShapeError> for CliError {
    fn from(e: ShapeError) -> Self {
        Self::new(EXIT_SHAPE, e.to_string())
    }
}

impl From<FtenError> for CliError {
    fn from(e: FtenError) -> Self {
        let code = match &e {
            FtenError::Io(_) => EXIT_IO,
            _ => EXIT_SHAPE,
        };
        Self::new(code, e.to_string())
    }
}

impl From<GeometryError> for CliError {
    fn from(e: GeometryError) -> Self {
        Self::new(EXIT_SHAPE, e.to_string())
    }
}

impl From<SequenceError> for CliError {
    fn from(e: SequenceError) -> Self {
        Self::new(1, e.to_string())
    }
}

impl From<MetricsError> for CliError {
    fn from(e: MetricsError) -> Self {
        let code = match &e {
            MetricsError::EmptyEval => EXIT_EMPTY,
            MetricsError::NoGold => 1,
        };
        Self::new(code, e.to_string())
    }
}

impl From<DatagenError> for CliError {
    fn from(e: DatagenError) -> Self {
        let code = match &e {
            DatagenError::Io(_) => EXIT_IO,
            _ => 1,
        };
        Self::new(code, e.to_string())
    }
}

impl From<AnnotatorError> for CliError {
    fn from(e: AnnotatorError) -> Self {
        let code = match &e {
            AnnotatorError::MissingCredential(_) => EXIT_CREDENTIAL,
            AnnotatorError::Io(_) => EXIT_IO,
            _ => 1,
        };
        Self::new(code, e.to_string())
    }
}

impl From<ManifestError> for CliError {
    fn from(e: ManifestError) -> Self {
        let code = match &e {
            ManifestError::Read { .. } | ManifestError::Io(_) => EXIT_IO,
            _ => EXIT_SHAPE,
        };
        Self::new(code, e.to_string())
    }
}

impl From<ConfigError> for CliError {
    fn from(e: ConfigError) -> Self {
        Self::usage(e.to_string())
    }
}

impl From<std::io::Error> for CliError {
    fn from(e: std::io::Error) -> Self {
        Self::io(e.to_string())
    }
}

impl From<serde_json::Error> for CliError {
    fn from(e: serde_json::Error) -> Self {
        Self::usage(format!("record parse error: {e}"))
    }
}

impl From<image::ImageError> for CliError {
    fn from(e: image::ImageError) -> Self {
        Self::io(e.to_string())
    }
}
