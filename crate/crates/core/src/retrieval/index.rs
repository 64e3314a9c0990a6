//! tf-idf inverted index over quantized contour images.

use serde::{Deserialize, Serialize};

use super::RetrievalError;

/// Which model and view a dataset image was rendered from.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct ImageRef {
    pub model: u32,
    pub view: u32,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Posting {
    pub image: u32,
    pub weight: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RetrievalHit {
    pub model_id: u32,
    pub best_view: u32,
    pub similarity: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct InvertedIndex {
    idf: Vec<f64>,
    postings: Vec<Vec<Posting>>,
    images: Vec<ImageRef>,
}

/// `ln(N / (1 + df)) + 1`.
pub fn idf(n_images: usize, df: usize) -> f64 {
    (n_images as f64 / (1.0 + df as f64)).ln() + 1.0
}

/// tf·idf, L2-normalized; all zeros for an empty histogram.
pub fn weight_vector(tf: &[u32], idf: &[f64]) -> Vec<f64> {
    let mut w: Vec<f64> = tf.iter().zip(idf).map(|(&t, &i)| t as f64 * i).collect();
    let norm = w.iter().map(|v| v * v).sum::<f64>().sqrt();
    if norm > 0.0 {
        w.iter_mut().for_each(|v| *v /= norm);
    }
    w
}

impl InvertedIndex {
    pub fn build(histograms: &[Vec<u32>], images: Vec<ImageRef>) -> Result<InvertedIndex, RetrievalError> {
        if histograms.is_empty() {
            return Err(RetrievalError::EmptyCorpus);
        }
        if histograms.len() != images.len() {
            return Err(RetrievalError::InvalidParams(format!(
                "{} histograms for {} images",
                histograms.len(),
                images.len()
            )));
        }
        let k = histograms[0].len();
        if let Some(bad) = histograms.iter().find(|h| h.len() != k) {
            return Err(RetrievalError::DimensionMismatch {
                expected: k,
                found: bad.len(),
            });
        }
        if histograms.iter().all(|h| h.iter().all(|&t| t == 0)) {
            return Err(RetrievalError::EmptyCorpus);
        }
        let n = histograms.len();
        let idf: Vec<f64> = (0..k)
            .map(|t| idf(n, histograms.iter().filter(|h| h[t] > 0).count()))
            .collect();
        let mut postings = vec![Vec::new(); k];
        for (img, h) in histograms.iter().enumerate() {
            for (t, w) in weight_vector(h, &idf).into_iter().enumerate() {
                if w != 0.0 {
                    postings[t].push(Posting {
                        image: img as u32,
                        weight: w,
                    });
                }
            }
        }
        Ok(InvertedIndex { idf, postings, images })
    }

    pub fn from_parts(
        idf: Vec<f64>,
        postings: Vec<Vec<Posting>>,
        images: Vec<ImageRef>,
    ) -> Result<InvertedIndex, RetrievalError> {
        if idf.len() != postings.len() {
            return Err(RetrievalError::Corrupt(format!(
                "{} idf entries for {} posting lists",
                idf.len(),
                postings.len()
            )));
        }
        if let Some(p) = postings.iter().flatten().find(|p| p.image as usize >= images.len()) {
            return Err(RetrievalError::Corrupt(format!("posting references image {}", p.image)));
        }
        Ok(InvertedIndex { idf, postings, images })
    }

    pub fn vocabulary_size(&self) -> usize {
        self.idf.len()
    }

    pub fn idf_values(&self) -> &[f64] {
        &self.idf
    }

    pub fn postings(&self) -> &[Vec<Posting>] {
        &self.postings
    }

    pub fn images(&self) -> &[ImageRef] {
        &self.images
    }

    /// Cosine similarity of the query against every image, via postings.
    pub fn image_scores(&self, tf: &[u32]) -> Result<Vec<f64>, RetrievalError> {
        if tf.len() != self.idf.len() {
            return Err(RetrievalError::DimensionMismatch {
                expected: self.idf.len(),
                found: tf.len(),
            });
        }
        let q = weight_vector(tf, &self.idf);
        let mut scores = vec![0.0; self.images.len()];
        for (t, &wq) in q.iter().enumerate() {
            if wq == 0.0 {
                continue;
            }
            for p in &self.postings[t] {
                scores[p.image as usize] += wq * p.weight;
            }
        }
        Ok(scores)
    }

    /// Best `topk` models, each scored by its best-matching view.
    ///
    /// Ordered by similarity descending, then model id ascending.
    pub fn rank_models(&self, tf: &[u32], topk: usize) -> Result<Vec<RetrievalHit>, RetrievalError> {
        let scores = self.image_scores(tf)?;
        Ok(rank_by_model(&scores, &self.images, topk))
    }
}

pub fn rank_by_model(scores: &[f64], images: &[ImageRef], topk: usize) -> Vec<RetrievalHit> {
    let mut best: std::collections::BTreeMap<u32, RetrievalHit> = Default::default();
    for (s, img) in scores.iter().zip(images) {
        let s = s.clamp(0.0, 1.0);
        let entry = best.entry(img.model).or_insert(RetrievalHit {
            model_id: img.model,
            best_view: img.view,
            similarity: s,
        });
        if s > entry.similarity || (s == entry.similarity && img.view < entry.best_view) {
            entry.similarity = s;
            entry.best_view = img.view;
        }
    }
    let mut hits: Vec<RetrievalHit> = best.into_values().collect();
    hits.sort_by(|a, b| b.similarity.total_cmp(&a.similarity).then(a.model_id.cmp(&b.model_id)));
    hits.truncate(topk);
    hits
}
