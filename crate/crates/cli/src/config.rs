//! Configuration loading with precedence: CLI flag > env var > config file >
//! built-in default.
//!
//! Built-in defaults: tile resolution 364, patch size 14, shuffle factor 4,
//! budget 50, max tokens 8192. The config file is TOML; its path comes from
//! `--config` or `MOSAIC_CONFIG`.

use std::env;
use std::path::Path;

use mosaic_annotator::EndpointConfig;
use mosaic_core::geometry::GeometryError;
use mosaic_core::shuffler::ShuffleLayout;
use mosaic_core::EncoderGeometry;
use serde::{Deserialize, Serialize};

pub const ENV_CONFIG: &str = "MOSAIC_CONFIG";
pub const ENV_BUDGET: &str = "MOSAIC_BUDGET";
pub const ENV_TILE_RESOLUTION: &str = "MOSAIC_TILE_RESOLUTION";
pub const ENV_SHUFFLE_N: &str = "MOSAIC_SHUFFLE_N";
pub const ENV_MAX_TOKENS: &str = "MOSAIC_MAX_TOKENS";

/// On-disk config file shape; every section is optional.
#[derive(Debug, Clone, Default, Serialize, Deserialize)]
#[serde(default)]
pub struct ConfigFile {
    pub geometry: GeometrySection,
    pub pipeline: PipelineSection,
    pub endpoint: Option<EndpointConfig>,
}

#[derive(Debug, Clone, Default, Serialize, Deserialize)]
#[serde(default)]
pub struct GeometrySection {
    pub tile_resolution: Option<u32>,
    pub patch_size: Option<u32>,
    pub feature_dim: Option<usize>,
    pub shuffle_factor: Option<usize>,
    pub shuffle_layout: Option<ShuffleLayout>,
}

#[derive(Debug, Clone, Default, Serialize, Deserialize)]
#[serde(default)]
pub struct PipelineSection {
    pub budget: Option<usize>,
    pub max_tokens: Option<usize>,
    pub workers: Option<usize>,
}

/// Fully resolved settings used by the commands.
#[derive(Debug, Clone)]
pub struct Settings {
    pub geometry: EncoderGeometry,
    pub shuffle_layout: ShuffleLayout,
    pub budget: usize,
    pub max_tokens: usize,
    pub workers: usize,
    pub endpoint: EndpointConfig,
}

/// CLI-level overrides, filled from clap flags.
#[derive(Debug, Clone, Default)]
pub struct Overrides {
    pub tile_resolution: Option<u32>,
    pub budget: Option<usize>,
    pub shuffle_factor: Option<usize>,
    pub max_tokens: Option<usize>,
    pub workers: Option<usize>,
}

#[derive(Debug, thiserror::Error)]
pub enum ConfigError {
    #[error("cannot read config {path}: {source}")]
    Read {
        path: String,
        source: std::io::Error,
    },
    #[error("cannot parse config {path}: {source}")]
    Parse {
        path: String,
        source: toml::de::Error,
    },
    #[error("env var {name} holds {value:?}, expected an integer")]
    BadEnv { name: String, value: String },
    #[error(transparent)]
    Geometry(#[from] GeometryError),
}

fn env_usize(name: &str) -> Result<Option<usize>, ConfigError> {
    match env::var(name) {
        Ok(value) => value
            .parse::<usize>()
            .map(Some)
            .map_err(|_| ConfigError::BadEnv {
                name: name.to_string(),
                value,
            }),
        Err(_) => Ok(None),
    }
}

pub fn load_config_file(path: Option<&Path>) -> Result<ConfigFile, ConfigError> {
    let path = match path {
        Some(p) => Some(p.to_path_buf()),
        None => env::var(ENV_CONFIG).ok().map(Into::into),
    };
    let Some(path) = path else {
        return Ok(ConfigFile::default());
    };
    let text = std::fs::read_to_string(&path).map_err(|source| ConfigError::Read {
        path: path.display().to_string(),
        source,
    })?;
    toml::from_str(&text).map_err(|source| ConfigError::Parse {
        path: path.display().to_string(),
        source,
    })
}

/// Resolve the final settings from all four precedence levels.
pub fn resolve(file: &ConfigFile, overrides: &Overrides) -> Result<Settings, ConfigError> {
    let tile_resolution = overrides
        .tile_resolution
        .or(env_usize(ENV_TILE_RESOLUTION)?.map(|v| v as u32))
        .or(file.geometry.tile_resolution)
        .unwrap_or(364);
    let patch_size = file.geometry.patch_size.unwrap_or(14);
    let feature_dim = file.geometry.feature_dim.unwrap_or(1152);
    let shuffle_factor = overrides
        .shuffle_factor
        .or(env_usize(ENV_SHUFFLE_N)?)
        .or(file.geometry.shuffle_factor)
        .unwrap_or(4);
    let geometry = EncoderGeometry::new(tile_resolution, patch_size, feature_dim, shuffle_factor)?;
    Ok(Settings {
        geometry,
        shuffle_layout: file.geometry.shuffle_layout.unwrap_or_default(),
        budget: overrides
            .budget
            .or(env_usize(ENV_BUDGET)?)
            .or(file.pipeline.budget)
            .unwrap_or(50),
        max_tokens: overrides
            .max_tokens
            .or(env_usize(ENV_MAX_TOKENS)?)
            .or(file.pipeline.max_tokens)
            .unwrap_or(mosaic_core::sequencer::DEFAULT_MAX_TOKENS),
        workers: overrides.workers.or(file.pipeline.workers).unwrap_or(0),
        endpoint: file.endpoint.clone().unwrap_or_default(),
    })
}
