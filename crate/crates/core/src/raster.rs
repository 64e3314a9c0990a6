//! Row-major 8-bit and binary rasters, with PNG encoding.
//!
//! Ink convention everywhere: dark strokes on a light background. In a
//! [`BinaryImage`] `true` is ink; encoded as PNG, ink is 0 and background 255.

use std::io::Cursor;

use image::{ImageFormat, Luma, Rgb, RgbImage};
use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum RasterError {
    #[error("image dimensions must be at least 1x1, got {0}x{1}")]
    EmptyDimensions(usize, usize),
    #[error("pixel buffer holds {actual} values, {width}x{height} needs {expected}", expected = width * height)]
    BufferSize {
        width: usize,
        height: usize,
        actual: usize,
    },
    #[error("not a decodable PNG: {0}")]
    Decode(String),
    #[error("PNG encoding failed: {0}")]
    Encode(String),
}

fn check_dims(width: usize, height: usize, len: usize) -> Result<(), RasterError> {
    if width == 0 || height == 0 {
        return Err(RasterError::EmptyDimensions(width, height));
    }
    if width * height != len {
        return Err(RasterError::BufferSize {
            width,
            height,
            actual: len,
        });
    }
    Ok(())
}

#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct GrayImage {
    width: usize,
    height: usize,
    pixels: Vec<u8>,
}

impl GrayImage {
    pub fn new(width: usize, height: usize, fill: u8) -> Result<Self, RasterError> {
        Self::from_pixels(width, height, vec![fill; width * height])
    }

    pub fn from_pixels(width: usize, height: usize, pixels: Vec<u8>) -> Result<Self, RasterError> {
        check_dims(width, height, pixels.len())?;
        Ok(GrayImage {
            width,
            height,
            pixels,
        })
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn pixels(&self) -> &[u8] {
        &self.pixels
    }

    pub fn get(&self, x: usize, y: usize) -> u8 {
        self.pixels[y * self.width + x]
    }

    pub fn set(&mut self, x: usize, y: usize, value: u8) {
        self.pixels[y * self.width + x] = value;
    }

    pub fn to_png(&self) -> Result<Vec<u8>, RasterError> {
        let img = image::GrayImage::from_raw(self.width as u32, self.height as u32, self.pixels.clone())
            .expect("dimensions checked at construction");
        let mut out = Cursor::new(Vec::new());
        img.write_to(&mut out, ImageFormat::Png)
            .map_err(|e| RasterError::Encode(e.to_string()))?;
        Ok(out.into_inner())
    }

    /// Expands to RGB (each channel equal to the intensity).
    pub fn to_rgb(&self) -> RgbImage {
        RgbImage::from_fn(self.width as u32, self.height as u32, |x, y| {
            let v = self.get(x as usize, y as usize);
            Rgb([v, v, v])
        })
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct BinaryImage {
    width: usize,
    height: usize,
    pixels: Vec<bool>,
}

/// A user drawing or an extracted model contour: `true` pixels are ink strokes.
pub type SketchImage = BinaryImage;

impl BinaryImage {
    pub fn new(width: usize, height: usize) -> Result<Self, RasterError> {
        Self::from_pixels(width, height, vec![false; width * height])
    }

    pub fn from_pixels(width: usize, height: usize, pixels: Vec<bool>) -> Result<Self, RasterError> {
        check_dims(width, height, pixels.len())?;
        Ok(BinaryImage {
            width,
            height,
            pixels,
        })
    }

    pub fn from_fn(
        width: usize,
        height: usize,
        f: impl Fn(usize, usize) -> bool,
    ) -> Result<Self, RasterError> {
        check_dims(width, height, width * height)?;
        let mut pixels = Vec::with_capacity(width * height);
        for y in 0..height {
            for x in 0..width {
                pixels.push(f(x, y));
            }
        }
        Ok(BinaryImage {
            width,
            height,
            pixels,
        })
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn pixels(&self) -> &[bool] {
        &self.pixels
    }

    pub fn get(&self, x: usize, y: usize) -> bool {
        self.pixels[y * self.width + x]
    }

    /// Out-of-bounds reads are background.
    pub fn get_signed(&self, x: i64, y: i64) -> bool {
        x >= 0
            && y >= 0
            && (x as usize) < self.width
            && (y as usize) < self.height
            && self.pixels[y as usize * self.width + x as usize]
    }

    pub fn set(&mut self, x: usize, y: usize, value: bool) {
        self.pixels[y * self.width + x] = value;
    }

    pub fn ink_count(&self) -> usize {
        self.pixels.iter().filter(|&&p| p).count()
    }

    pub fn is_blank(&self) -> bool {
        !self.pixels.iter().any(|&p| p)
    }

    /// Ink pixel coordinates in row-major order.
    pub fn ink_pixels(&self) -> Vec<(usize, usize)> {
        self.pixels
            .iter()
            .enumerate()
            .filter(|(_, &p)| p)
            .map(|(i, _)| (i % self.width, i / self.width))
            .collect()
    }

    /// Ink 0, background 255.
    pub fn to_gray(&self) -> GrayImage {
        GrayImage {
            width: self.width,
            height: self.height,
            pixels: self.pixels.iter().map(|&p| if p { 0 } else { 255 }).collect(),
        }
    }

    pub fn to_png(&self) -> Result<Vec<u8>, RasterError> {
        self.to_gray().to_png()
    }

    pub fn flip_horizontal(&self) -> BinaryImage {
        let mut out = self.clone();
        for y in 0..self.height {
            for x in 0..self.width {
                out.set(self.width - 1 - x, y, self.get(x, y));
            }
        }
        out
    }
}

fn decode(bytes: &[u8]) -> Result<image::DynamicImage, RasterError> {
    image::load_from_memory_with_format(bytes, ImageFormat::Png)
        .map_err(|e| RasterError::Decode(e.to_string()))
}

fn flatten_over_white(img: &image::DynamicImage) -> RgbImage {
    let rgba = img.to_rgba8();
    RgbImage::from_fn(rgba.width(), rgba.height(), |x, y| {
        let p = rgba.get_pixel(x, y).0;
        let a = p[3] as u32;
        let over = |c: u8| ((c as u32 * a + 255 * (255 - a) + 127) / 255) as u8;
        Rgb([over(p[0]), over(p[1]), over(p[2])])
    })
}

/// Decodes any PNG to RGB; transparent pixels are composited over white so an
/// empty RGBA canvas reads as background.
pub fn decode_png_rgb(bytes: &[u8]) -> Result<RgbImage, RasterError> {
    Ok(flatten_over_white(&decode(bytes)?))
}

/// Decodes a PNG to 8-bit gray. Single-channel files are taken verbatim,
/// anything else is flattened over white and converted with the luma weights.
pub fn decode_png_gray(bytes: &[u8]) -> Result<GrayImage, RasterError> {
    let luma = match decode(bytes)? {
        image::DynamicImage::ImageLuma8(l) => l,
        other => {
            let rgb = flatten_over_white(&other);
            image::GrayImage::from_fn(rgb.width(), rgb.height(), |x, y| {
                Luma([crate::contour::luma(rgb.get_pixel(x, y).0)])
            })
        }
    };
    GrayImage::from_pixels(luma.width() as usize, luma.height() as usize, luma.into_raw())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn dimension_checks() {
        assert!(GrayImage::new(0, 4, 0).is_err());
        assert!(matches!(
            BinaryImage::from_pixels(2, 2, vec![true; 3]),
            Err(RasterError::BufferSize { actual: 3, .. })
        ));
    }

    #[test]
    fn png_round_trip_is_exact() {
        let img = BinaryImage::from_fn(7, 5, |x, y| (x * y) % 3 == 0).unwrap();
        let png = img.to_png().unwrap();
        let gray = decode_png_gray(&png).unwrap();
        assert_eq!(gray, img.to_gray());
    }

    #[test]
    fn transparent_canvas_reads_as_white() {
        let rgba = image::RgbaImage::from_pixel(4, 4, image::Rgba([0, 0, 0, 0]));
        let mut out = Cursor::new(Vec::new());
        rgba.write_to(&mut out, ImageFormat::Png).unwrap();
        let rgb = decode_png_rgb(&out.into_inner()).unwrap();
        assert!(rgb.pixels().all(|p| p.0 == [255, 255, 255]));
    }

    #[test]
    fn garbage_is_not_png() {
        assert!(matches!(decode_png_rgb(b"hello"), Err(RasterError::Decode(_))));
    }

    #[test]
    fn flip() {
        let img = BinaryImage::from_fn(3, 1, |x, _| x == 0).unwrap();
        assert_eq!(img.flip_horizontal().pixels(), &[false, false, true]);
    }
}
