//! Sketch retrieval: gradient-orientation descriptors, a k-means visual
//! vocabulary, and a tf-idf inverted index ranked by cosine similarity.

mod descriptor;
mod index;
mod search;
mod vocabulary;

pub use descriptor::{
    describe_sketch, local_descriptor, sample_keypoints, DescriptorParams, GradientField, Keypoint, LocalDescriptor,
};
pub use index::{idf, rank_by_model, weight_vector, ImageRef, InvertedIndex, Posting, RetrievalHit};
pub use search::{IndexParams, ModelRecord, SearchIndex, INDEX_MAGIC, INDEX_VERSION};
pub use vocabulary::{build_vocabulary, Vocabulary};

use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum RetrievalError {
    #[error("sketch has no ink")]
    BlankSketch,
    #[error("sketch produced no usable descriptors")]
    NoDescriptors,
    #[error("descriptor sample of {have} is smaller than vocabulary size {need}")]
    SampleTooSmall { have: usize, need: usize },
    #[error("dimension mismatch: expected {expected}, found {found}")]
    DimensionMismatch { expected: usize, found: usize },
    #[error("every histogram in the corpus is empty")]
    EmptyCorpus,
    #[error("invalid parameters: {0}")]
    InvalidParams(String),
    #[error("not an index file (bad magic)")]
    BadMagic,
    #[error("unsupported index version {found}; this build reads version {supported}")]
    UnsupportedVersion { found: u32, supported: u32 },
    #[error("index file is truncated")]
    Truncated,
    #[error("index file is corrupt: {0}")]
    Corrupt(String),
    #[error("index is stale: built for manifest {expected}, current manifest is {found}")]
    Stale { expected: String, found: String },
    #[error("i/o error: {0}")]
    Io(String),
}

impl From<std::io::Error> for RetrievalError {
    fn from(e: std::io::Error) -> Self {
        RetrievalError::Io(e.to_string())
    }
}
