//! Offline contour dataset and search index construction.
//!
//! A dataset directory holds `manifest.tsv` and an `images/` folder of
//! contour PNGs, one per (model, viewpoint).

mod build;
mod manifest;

pub use build::{build_contour_dataset, build_search_index, load_index, model_contour, DatasetConfig};
pub use manifest::{manifest_hash, DatasetManifest, ManifestEntry, Reject, MANIFEST_FILE};

use thiserror::Error;

use crate::contour::ContourError;
use crate::render::RenderError;
use crate::retrieval::RetrievalError;

#[derive(Debug, Error)]
pub enum DatasetError {
    #[error("no meshes found under {0}")]
    EmptyModelDir(String),
    #[error("no usable meshes under {dir} ({rejected} rejected)")]
    NoUsableModels { dir: String, rejected: usize },
    #[error("manifest line {line}: {message}")]
    Manifest { line: usize, message: String },
    #[error("missing dataset image {0}")]
    MissingImage(String),
    #[error("path {0:?} cannot be stored in the manifest")]
    UnstorablePath(String),
    #[error("invalid configuration: {0}")]
    Config(String),
    #[error("{path}: {message}")]
    Io { path: String, message: String },
    #[error(transparent)]
    Render(#[from] RenderError),
    #[error(transparent)]
    Contour(#[from] ContourError),
    #[error(transparent)]
    Retrieval(#[from] RetrievalError),
}

impl DatasetError {
    fn io(path: &std::path::Path, e: impl std::fmt::Display) -> DatasetError {
        DatasetError::Io {
            path: path.display().to_string(),
            message: e.to_string(),
        }
    }
}
