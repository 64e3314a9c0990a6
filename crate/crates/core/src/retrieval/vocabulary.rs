//! Visual vocabulary: k-means over local descriptors and nearest-word quantization.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::descriptor::LocalDescriptor;
use super::RetrievalError;

#[derive(Debug, Clone, PartialEq)]
pub struct Vocabulary {
    dim: usize,
    centroids: Vec<Vec<f64>>,
}

fn dist2(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum()
}

impl Vocabulary {
    pub fn from_centroids(centroids: Vec<Vec<f64>>) -> Result<Vocabulary, RetrievalError> {
        let dim = centroids.first().map(Vec::len).ok_or(RetrievalError::InvalidParams("empty vocabulary".into()))?;
        if centroids.len() < 2 {
            return Err(RetrievalError::InvalidParams("vocabulary needs at least 2 words".into()));
        }
        if dim == 0 {
            return Err(RetrievalError::InvalidParams("zero-dimensional vocabulary".into()));
        }
        if let Some(bad) = centroids.iter().find(|c| c.len() != dim) {
            return Err(RetrievalError::DimensionMismatch {
                expected: dim,
                found: bad.len(),
            });
        }
        if centroids.iter().flatten().any(|v| !v.is_finite()) {
            return Err(RetrievalError::InvalidParams("non-finite centroid".into()));
        }
        Ok(Vocabulary { dim, centroids })
    }

    pub fn len(&self) -> usize {
        self.centroids.len()
    }

    pub fn is_empty(&self) -> bool {
        self.centroids.is_empty()
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn centroids(&self) -> &[Vec<f64>] {
        &self.centroids
    }

    /// Index of the closest word; ties go to the lowest index.
    pub fn nearest(&self, v: &[f64]) -> usize {
        nearest_centroid(&self.centroids, v).0
    }

    /// Word histogram of a descriptor set, length `self.len()`.
    pub fn quantize(&self, descriptors: &[LocalDescriptor]) -> Result<Vec<u32>, RetrievalError> {
        let mut tf = vec![0u32; self.len()];
        for d in descriptors {
            if d.dim() != self.dim {
                return Err(RetrievalError::DimensionMismatch {
                    expected: self.dim,
                    found: d.dim(),
                });
            }
            tf[self.nearest(&d.0)] += 1;
        }
        Ok(tf)
    }
}

fn nearest_centroid(centroids: &[Vec<f64>], v: &[f64]) -> (usize, f64) {
    let mut best = (0, f64::INFINITY);
    for (i, c) in centroids.iter().enumerate() {
        let d = dist2(c, v);
        if d < best.1 {
            best = (i, d);
        }
    }
    best
}

/// k-means++ seeding followed by at most `iterations` Lloyd rounds.
///
/// A cluster that loses all members is reseeded with the point farthest from
/// its assigned centroid. Fully determined by `seed`.
pub fn build_vocabulary(
    sample: &[LocalDescriptor],
    k: usize,
    iterations: usize,
    seed: u64,
) -> Result<Vocabulary, RetrievalError> {
    if k < 2 {
        return Err(RetrievalError::InvalidParams("vocabulary needs at least 2 words".into()));
    }
    if sample.len() < k {
        return Err(RetrievalError::SampleTooSmall {
            have: sample.len(),
            need: k,
        });
    }
    let dim = sample[0].dim();
    if let Some(bad) = sample.iter().find(|d| d.dim() != dim) {
        return Err(RetrievalError::DimensionMismatch {
            expected: dim,
            found: bad.dim(),
        });
    }
    let points: Vec<&[f64]> = sample.iter().map(|d| d.0.as_slice()).collect();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);

    let mut centroids: Vec<Vec<f64>> = Vec::with_capacity(k);
    centroids.push(points[rng.random_range(0..points.len())].to_vec());
    let mut d2: Vec<f64> = points.iter().map(|p| dist2(p, &centroids[0])).collect();
    while centroids.len() < k {
        let total: f64 = d2.iter().sum();
        let pick = if total > 0.0 {
            let mut r = rng.random::<f64>() * total;
            let mut chosen = d2.iter().rposition(|&d| d > 0.0).expect("positive total");
            for (i, &d) in d2.iter().enumerate() {
                if d > 0.0 && r < d {
                    chosen = i;
                    break;
                }
                r -= d;
            }
            chosen
        } else {
            rng.random_range(0..points.len())
        };
        let c = points[pick].to_vec();
        for (d, p) in d2.iter_mut().zip(&points) {
            *d = d.min(dist2(p, &c));
        }
        centroids.push(c);
    }

    let mut assign = vec![usize::MAX; points.len()];
    let mut dist = vec![0.0; points.len()];
    for _ in 0..iterations {
        let mut changed = false;
        for (i, p) in points.iter().enumerate() {
            let (c, d) = nearest_centroid(&centroids, p);
            changed |= assign[i] != c;
            assign[i] = c;
            dist[i] = d;
        }
        if !changed {
            break;
        }

        let mut sums = vec![vec![0.0; dim]; k];
        let mut counts = vec![0usize; k];
        for (p, &c) in points.iter().zip(&assign) {
            counts[c] += 1;
            sums[c].iter_mut().zip(p.iter()).for_each(|(s, v)| *s += v);
        }
        for c in 0..k {
            if counts[c] > 0 {
                let n = counts[c] as f64;
                centroids[c] = sums[c].iter().map(|s| s / n).collect();
                continue;
            }
            let far = (0..points.len())
                .fold(None::<usize>, |best, i| match best {
                    Some(b) if dist[b] >= dist[i] => Some(b),
                    _ => Some(i),
                })
                .expect("non-empty sample");
            centroids[c] = points[far].to_vec();
            // Each point seeds at most one empty cluster per round.
            dist[far] = -1.0;
        }
    }
    Vocabulary::from_centroids(centroids)
}
