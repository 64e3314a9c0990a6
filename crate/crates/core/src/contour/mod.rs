//! Contour extraction: grayscale, median filter, threshold, border following,
//! and redrawing the traced borders as a sketch-sized image.

mod draw;
mod trace;

pub use draw::rasterize_contours;
pub use trace::{trace_contours, Contour};

use image::RgbImage;
use thiserror::Error;

use crate::raster::{BinaryImage, GrayImage, RasterError, SketchImage};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum ContourError {
    #[error("median kernel size must be odd and positive, got {0}")]
    EvenKernel(usize),
    #[error("contour point ({x}, {y}) outside {width}x{height} canvas")]
    OutOfBounds {
        x: i64,
        y: i64,
        width: usize,
        height: usize,
    },
    #[error("stroke width must be positive")]
    ZeroStroke,
    #[error(transparent)]
    Raster(#[from] RasterError),
}

/// Pipeline knobs shared by dataset construction and interactive extraction.
#[derive(Debug, Clone, Copy, PartialEq, serde::Serialize, serde::Deserialize)]
pub struct ContourParams {
    pub median_k: usize,
    pub threshold: u8,
    pub stroke: usize,
}

impl Default for ContourParams {
    fn default() -> Self {
        ContourParams {
            median_k: 3,
            threshold: 128,
            stroke: 1,
        }
    }
}

/// `round(0.299 R + 0.587 G + 0.114 B)`.
pub fn luma([r, g, b]: [u8; 3]) -> u8 {
    let y = 0.299 * r as f64 + 0.587 * g as f64 + 0.114 * b as f64;
    y.round().clamp(0.0, 255.0) as u8
}

pub fn to_grayscale(rgb: &RgbImage) -> GrayImage {
    let pixels = rgb.pixels().map(|p| luma(p.0)).collect();
    GrayImage::from_pixels(rgb.width() as usize, rgb.height() as usize, pixels)
        .expect("dimensions come from a valid image")
}

/// k×k median with edge replication at the borders.
pub fn median_filter(img: &GrayImage, k: usize) -> Result<GrayImage, ContourError> {
    if k == 0 || k % 2 == 0 {
        return Err(ContourError::EvenKernel(k));
    }
    let (w, h) = (img.width(), img.height());
    let r = (k / 2) as i64;
    let clamp = |v: i64, n: usize| v.clamp(0, n as i64 - 1) as usize;
    let mut window = Vec::with_capacity(k * k);
    let mut out = Vec::with_capacity(w * h);
    for y in 0..h as i64 {
        for x in 0..w as i64 {
            window.clear();
            for dy in -r..=r {
                let sy = clamp(y + dy, h);
                for dx in -r..=r {
                    window.push(img.get(clamp(x + dx, w), sy));
                }
            }
            let mid = window.len() / 2;
            out.push(*window.select_nth_unstable(mid).1);
        }
    }
    Ok(GrayImage::from_pixels(w, h, out)?)
}

/// Pixels strictly darker than `threshold` become ink.
pub fn binarize(img: &GrayImage, threshold: u8) -> BinaryImage {
    let pixels = img.pixels().iter().map(|&v| v < threshold).collect();
    BinaryImage::from_pixels(img.width(), img.height(), pixels).expect("same dimensions")
}

/// Decodes a PNG and marks pixels darker than `threshold` as ink.
pub fn sketch_from_png(bytes: &[u8], threshold: u8) -> Result<SketchImage, ContourError> {
    Ok(binarize(&crate::raster::decode_png_gray(bytes)?, threshold))
}

/// Full chain from a rendered view to an editable sketch at canvas size.
///
/// When the canvas differs from the render, contour points are rescaled and
/// joined with line segments so strokes stay connected.
pub fn extract_model_contour(
    rendered: &RgbImage,
    canvas_w: usize,
    canvas_h: usize,
    params: &ContourParams,
) -> Result<SketchImage, ContourError> {
    let gray = to_grayscale(rendered);
    let filtered = median_filter(&gray, params.median_k)?;
    let mask = binarize(&filtered, params.threshold);
    let mut contours = trace_contours(&mask);
    let (rw, rh) = (mask.width(), mask.height());
    if (rw, rh) != (canvas_w, canvas_h) {
        let sx = canvas_w as f64 / rw as f64;
        let sy = canvas_h as f64 / rh as f64;
        let map = |v: i64, s: f64, n: usize| (((v as f64 + 0.5) * s - 0.5).round() as i64).clamp(0, n as i64 - 1);
        for c in &mut contours {
            for p in &mut c.points {
                *p = (map(p.0, sx, canvas_w), map(p.1, sy, canvas_h));
            }
        }
    }
    rasterize_contours(&contours, canvas_w, canvas_h, params.stroke)
}
