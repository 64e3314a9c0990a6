use super::{Contour, ContourError};
use crate::raster::SketchImage;

/// Draws each contour as a closed polyline with a square pen of `stroke` pixels.
pub fn rasterize_contours(
    contours: &[Contour],
    width: usize,
    height: usize,
    stroke: usize,
) -> Result<SketchImage, ContourError> {
    if stroke == 0 {
        return Err(ContourError::ZeroStroke);
    }
    let mut img = SketchImage::new(width, height)?;
    for c in contours {
        if let Some(&(x, y)) = c
            .points
            .iter()
            .find(|&&(x, y)| x < 0 || y < 0 || x >= width as i64 || y >= height as i64)
        {
            return Err(ContourError::OutOfBounds { x, y, width, height });
        }
    }

    let lo = -((stroke as i64 - 1) / 2);
    let hi = lo + stroke as i64;
    let mut stamp = |x: i64, y: i64| {
        for sy in y + lo..y + hi {
            for sx in x + lo..x + hi {
                if sx >= 0 && sy >= 0 && (sx as usize) < width && (sy as usize) < height {
                    img.set(sx as usize, sy as usize, true);
                }
            }
        }
    };
    for c in contours {
        let n = c.points.len();
        for k in 0..n {
            line(c.points[k], c.points[(k + 1) % n], &mut stamp);
        }
    }
    Ok(img)
}

/// Bresenham segment, both endpoints included.
fn line((x0, y0): (i64, i64), (x1, y1): (i64, i64), plot: &mut impl FnMut(i64, i64)) {
    let dx = (x1 - x0).abs();
    let dy = -(y1 - y0).abs();
    let sx = if x0 < x1 { 1 } else { -1 };
    let sy = if y0 < y1 { 1 } else { -1 };
    let (mut x, mut y, mut err) = (x0, y0, dx + dy);
    loop {
        plot(x, y);
        if x == x1 && y == y1 {
            break;
        }
        let e2 = 2 * err;
        if e2 >= dy {
            err += dy;
            x += sx;
        }
        if e2 <= dx {
            err += dx;
            y += sy;
        }
    }
}
