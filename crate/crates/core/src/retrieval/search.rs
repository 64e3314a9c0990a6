//! A queryable index bundle and its on-disk format.
//!
//! File layout, all integers and floats little-endian:
//!
//! ```text
//! SKIDX\n
//! version 1\n
//! header <byte length>\n
//! <JSON header>\n
//! idf          k × f64
//! centroids    k × dim × f64
//! postings     k × (u32 count, count × (u32 image, f64 weight))
//! ```
//!
//! The JSON header carries the build parameters, the model table, the image
//! table and the manifest hash.

use std::path::Path;

use serde::{Deserialize, Serialize};

use super::descriptor::{describe_sketch, DescriptorParams};
use super::index::{rank_by_model, ImageRef, InvertedIndex, Posting, RetrievalHit};
use super::vocabulary::Vocabulary;
use super::RetrievalError;
use crate::raster::SketchImage;

pub const INDEX_MAGIC: &[u8; 6] = b"SKIDX\n";
pub const INDEX_VERSION: u32 = 1;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct IndexParams {
    pub descriptor: DescriptorParams,
    pub keypoint_seed: u64,
    pub vocabulary_size: usize,
    pub kmeans_iterations: usize,
    pub vocabulary_seed: u64,
    /// Upper bound on descriptors fed to k-means.
    pub training_sample: usize,
}

impl Default for IndexParams {
    fn default() -> Self {
        IndexParams {
            descriptor: DescriptorParams::default(),
            keypoint_seed: 7,
            vocabulary_size: 256,
            kmeans_iterations: 25,
            vocabulary_seed: 11,
            training_sample: 20_000,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ModelRecord {
    pub id: u32,
    pub name: String,
    pub category: String,
    pub mesh_path: String,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SearchIndex {
    pub params: IndexParams,
    pub vocabulary: Vocabulary,
    pub index: InvertedIndex,
    pub models: Vec<ModelRecord>,
    pub manifest_hash: String,
}

#[derive(Serialize, Deserialize)]
struct Header {
    vocabulary_size: usize,
    dim: usize,
    params: IndexParams,
    manifest_hash: String,
    models: Vec<ModelRecord>,
    images: Vec<ImageRef>,
}

impl SearchIndex {
    pub fn model(&self, id: u32) -> Option<&ModelRecord> {
        self.models.iter().find(|m| m.id == id)
    }

    /// Visual-word counts of a sketch under this index's parameters.
    pub fn histogram(&self, sketch: &SketchImage) -> Result<Vec<u32>, RetrievalError> {
        let descs = describe_sketch(sketch, &self.params.descriptor, self.params.keypoint_seed)?;
        if descs.is_empty() {
            return Err(RetrievalError::NoDescriptors);
        }
        self.vocabulary.quantize(&descs)
    }

    pub fn image_scores(&self, sketch: &SketchImage) -> Result<Vec<f64>, RetrievalError> {
        self.index.image_scores(&self.histogram(sketch)?)
    }

    pub fn query(&self, sketch: &SketchImage, topk: usize) -> Result<Vec<RetrievalHit>, RetrievalError> {
        let scores = self.image_scores(sketch)?;
        Ok(rank_by_model(&scores, self.index.images(), topk))
    }

    pub fn check_manifest(&self, hash: &str) -> Result<(), RetrievalError> {
        if self.manifest_hash != hash {
            return Err(RetrievalError::Stale {
                expected: self.manifest_hash.clone(),
                found: hash.to_string(),
            });
        }
        Ok(())
    }

    pub fn to_bytes(&self) -> Vec<u8> {
        let header = Header {
            vocabulary_size: self.vocabulary.len(),
            dim: self.vocabulary.dim(),
            params: self.params,
            manifest_hash: self.manifest_hash.clone(),
            models: self.models.clone(),
            images: self.index.images().to_vec(),
        };
        let json = serde_json::to_vec(&header).expect("header is plain data");
        let mut out = Vec::new();
        out.extend_from_slice(INDEX_MAGIC);
        out.extend_from_slice(format!("version {INDEX_VERSION}\nheader {}\n", json.len()).as_bytes());
        out.extend_from_slice(&json);
        out.push(b'\n');
        for v in self.index.idf_values() {
            out.extend_from_slice(&v.to_le_bytes());
        }
        for v in self.vocabulary.centroids().iter().flatten() {
            out.extend_from_slice(&v.to_le_bytes());
        }
        for list in self.index.postings() {
            out.extend_from_slice(&(list.len() as u32).to_le_bytes());
            for p in list {
                out.extend_from_slice(&p.image.to_le_bytes());
                out.extend_from_slice(&p.weight.to_le_bytes());
            }
        }
        out
    }

    pub fn from_bytes(bytes: &[u8]) -> Result<SearchIndex, RetrievalError> {
        if !bytes.starts_with(INDEX_MAGIC) {
            return Err(if INDEX_MAGIC.starts_with(bytes) {
                RetrievalError::Truncated
            } else {
                RetrievalError::BadMagic
            });
        }
        let mut r = Reader {
            bytes,
            pos: INDEX_MAGIC.len(),
        };
        let version_line = r.line()?;
        let found = version_line
            .strip_prefix("version ")
            .and_then(|v| v.parse::<u32>().ok())
            .ok_or_else(|| RetrievalError::Corrupt(format!("bad version line {version_line:?}")))?;
        if found != INDEX_VERSION {
            return Err(RetrievalError::UnsupportedVersion {
                found,
                supported: INDEX_VERSION,
            });
        }
        let header_line = r.line()?;
        let header_len = header_line
            .strip_prefix("header ")
            .and_then(|v| v.parse::<usize>().ok())
            .ok_or_else(|| RetrievalError::Corrupt(format!("bad header line {header_line:?}")))?;
        let header: Header = serde_json::from_slice(r.take(header_len)?)
            .map_err(|e| RetrievalError::Corrupt(format!("header: {e}")))?;
        if r.take(1)? != b"\n" {
            return Err(RetrievalError::Corrupt("header not newline-terminated".into()));
        }

        let (k, dim) = (header.vocabulary_size, header.dim);
        let idf = (0..k).map(|_| r.f64()).collect::<Result<Vec<_>, _>>()?;
        let mut centroids = Vec::with_capacity(k);
        for _ in 0..k {
            centroids.push((0..dim).map(|_| r.f64()).collect::<Result<Vec<_>, _>>()?);
        }
        let mut postings = Vec::with_capacity(k);
        for _ in 0..k {
            let n = r.u32()? as usize;
            // Each posting is 12 bytes; check before allocating.
            if r.remaining() < n.saturating_mul(12) {
                return Err(RetrievalError::Truncated);
            }
            let mut list = Vec::with_capacity(n);
            for _ in 0..n {
                list.push(Posting {
                    image: r.u32()?,
                    weight: r.f64()?,
                });
            }
            postings.push(list);
        }
        if r.remaining() != 0 {
            return Err(RetrievalError::Corrupt(format!("{} trailing bytes", r.remaining())));
        }
        let vocabulary = Vocabulary::from_centroids(centroids)?;
        let index = InvertedIndex::from_parts(idf, postings, header.images)?;
        if vocabulary.dim() != header.params.descriptor.dim() {
            return Err(RetrievalError::Corrupt("vocabulary dimension disagrees with descriptor params".into()));
        }
        Ok(SearchIndex {
            params: header.params,
            vocabulary,
            index,
            models: header.models,
            manifest_hash: header.manifest_hash,
        })
    }

    pub fn save(&self, path: &Path) -> Result<(), RetrievalError> {
        Ok(std::fs::write(path, self.to_bytes())?)
    }

    pub fn load(path: &Path) -> Result<SearchIndex, RetrievalError> {
        SearchIndex::from_bytes(&std::fs::read(path)?)
    }
}

struct Reader<'a> {
    bytes: &'a [u8],
    pos: usize,
}

impl<'a> Reader<'a> {
    fn remaining(&self) -> usize {
        self.bytes.len() - self.pos
    }

    fn take(&mut self, n: usize) -> Result<&'a [u8], RetrievalError> {
        if self.remaining() < n {
            return Err(RetrievalError::Truncated);
        }
        let s = &self.bytes[self.pos..self.pos + n];
        self.pos += n;
        Ok(s)
    }

    fn line(&mut self) -> Result<&'a str, RetrievalError> {
        let rest = &self.bytes[self.pos..];
        let end = rest.iter().position(|&b| b == b'\n').ok_or(RetrievalError::Truncated)?;
        self.pos += end + 1;
        std::str::from_utf8(&rest[..end]).map_err(|_| RetrievalError::Corrupt("non-UTF-8 text line".into()))
    }

    fn u32(&mut self) -> Result<u32, RetrievalError> {
        Ok(u32::from_le_bytes(self.take(4)?.try_into().expect("4 bytes")))
    }

    fn f64(&mut self) -> Result<f64, RetrievalError> {
        Ok(f64::from_le_bytes(self.take(8)?.try_into().expect("8 bytes")))
    }
}
