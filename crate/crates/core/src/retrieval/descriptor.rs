//! Gradient-orientation tile descriptors sampled on sketch strokes.

use std::f64::consts::PI;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::RetrievalError;
use crate::raster::SketchImage;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct Keypoint {
    pub x: usize,
    pub y: usize,
}

/// Layout of a local descriptor: a `patch`-pixel window split into
/// `tiles × tiles` cells, each holding a `bins`-bin orientation histogram.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct DescriptorParams {
    pub keypoints: usize,
    pub patch: usize,
    pub tiles: usize,
    pub bins: usize,
}

impl Default for DescriptorParams {
    fn default() -> Self {
        DescriptorParams {
            keypoints: 500,
            patch: 32,
            tiles: 4,
            bins: 4,
        }
    }
}

impl DescriptorParams {
    pub fn dim(&self) -> usize {
        self.tiles * self.tiles * self.bins
    }

    pub fn validate(&self) -> Result<(), RetrievalError> {
        if self.keypoints == 0 || self.tiles == 0 || self.bins == 0 {
            return Err(RetrievalError::InvalidParams("keypoints, tiles and bins must be positive".into()));
        }
        if self.patch == 0 || self.patch % (2 * self.tiles) != 0 {
            return Err(RetrievalError::InvalidParams(format!(
                "patch {} must be a positive multiple of 2 x tiles ({})",
                self.patch,
                2 * self.tiles
            )));
        }
        Ok(())
    }
}

/// L2-normalized descriptor, or all zeros when the patch saw no gradient.
#[derive(Debug, Clone, PartialEq)]
pub struct LocalDescriptor(pub Vec<f64>);

impl LocalDescriptor {
    pub fn is_empty(&self) -> bool {
        self.0.iter().all(|&v| v == 0.0)
    }

    pub fn dim(&self) -> usize {
        self.0.len()
    }
}

/// Up to `m` distinct ink pixels drawn uniformly with a seeded generator;
/// every ink pixel when there are no more than `m`.
pub fn sample_keypoints(sketch: &SketchImage, m: usize, seed: u64) -> Result<Vec<Keypoint>, RetrievalError> {
    let ink = sketch.ink_pixels();
    if ink.is_empty() {
        return Err(RetrievalError::BlankSketch);
    }
    let to_kp = |&(x, y): &(usize, usize)| Keypoint { x, y };
    if ink.len() <= m {
        return Ok(ink.iter().map(to_kp).collect());
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    Ok(rand::seq::index::sample(&mut rng, ink.len(), m)
        .into_iter()
        .map(|i| to_kp(&ink[i]))
        .collect())
}

/// Sobel response of the ink mask, quantized to orientation bins.
///
/// Covers the image plus a one-pixel ring; everything further out is zero.
pub struct GradientField {
    width: i64,
    height: i64,
    bins: usize,
    cells: Vec<(u8, f64)>,
}

impl GradientField {
    pub fn new(sketch: &SketchImage, bins: usize) -> GradientField {
        let (w, h) = (sketch.width() as i64, sketch.height() as i64);
        let ink = |x: i64, y: i64| -> f64 { if sketch.get_signed(x, y) { 1.0 } else { 0.0 } };
        let bin_width = PI / bins as f64;
        let mut cells = Vec::with_capacity(((w + 2) * (h + 2)) as usize);
        for y in -1..=h {
            for x in -1..=w {
                let gx = (ink(x + 1, y - 1) + 2.0 * ink(x + 1, y) + ink(x + 1, y + 1))
                    - (ink(x - 1, y - 1) + 2.0 * ink(x - 1, y) + ink(x - 1, y + 1));
                let gy = (ink(x - 1, y + 1) + 2.0 * ink(x, y + 1) + ink(x + 1, y + 1))
                    - (ink(x - 1, y - 1) + 2.0 * ink(x, y - 1) + ink(x + 1, y - 1));
                let mag = (gx * gx + gy * gy).sqrt();
                if mag == 0.0 {
                    cells.push((0, 0.0));
                    continue;
                }
                // Orientation modulo 180°, bins centered on multiples of 180°/bins.
                let theta = gy.atan2(gx).rem_euclid(PI);
                let bin = ((theta / bin_width).round() as usize) % bins;
                cells.push((bin as u8, mag));
            }
        }
        GradientField {
            width: w,
            height: h,
            bins,
            cells,
        }
    }

    fn at(&self, x: i64, y: i64) -> (u8, f64) {
        if x < -1 || y < -1 || x > self.width || y > self.height {
            return (0, 0.0);
        }
        self.cells[((y + 1) * (self.width + 2) + (x + 1)) as usize]
    }

    /// Descriptor of the window `[kp - patch/2, kp + patch/2)` in both axes.
    pub fn describe(&self, kp: Keypoint, params: &DescriptorParams) -> LocalDescriptor {
        debug_assert_eq!(self.bins, params.bins);
        let half = (params.patch / 2) as i64;
        let cell = (params.patch / params.tiles) as i64;
        let mut values = vec![0.0; params.dim()];
        for dy in -half..half {
            let ty = ((dy + half) / cell) as usize;
            for dx in -half..half {
                let (bin, mag) = self.at(kp.x as i64 + dx, kp.y as i64 + dy);
                if mag == 0.0 {
                    continue;
                }
                let tx = ((dx + half) / cell) as usize;
                values[(ty * params.tiles + tx) * params.bins + bin as usize] += mag;
            }
        }
        let norm = values.iter().map(|v| v * v).sum::<f64>().sqrt();
        if norm > 0.0 {
            values.iter_mut().for_each(|v| *v /= norm);
        }
        LocalDescriptor(values)
    }
}

pub fn local_descriptor(sketch: &SketchImage, kp: Keypoint, params: &DescriptorParams) -> LocalDescriptor {
    GradientField::new(sketch, params.bins).describe(kp, params)
}

/// Non-empty descriptors at the seeded keypoints of a sketch.
pub fn describe_sketch(
    sketch: &SketchImage,
    params: &DescriptorParams,
    seed: u64,
) -> Result<Vec<LocalDescriptor>, RetrievalError> {
    params.validate()?;
    let keypoints = sample_keypoints(sketch, params.keypoints, seed)?;
    let field = GradientField::new(sketch, params.bins);
    Ok(keypoints
        .into_iter()
        .map(|kp| field.describe(kp, params))
        .filter(|d| !d.is_empty())
        .collect())
}
