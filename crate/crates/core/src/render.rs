//! Orthographic silhouette rasterization and point projection.
//!
//! Pixel convention: origin at the top-left corner, x right, y down; pixel
//! `(i, j)` is sampled at its center `(i + 0.5, j + 0.5)`. A shape is fit to
//! the image by centering its projected bounding box and scaling it uniformly
//! so it spans the image minus `margin` on each side.

use thiserror::Error;

use crate::geometry::{PointCloud, TriangleMesh, Vec3, Viewpoint};
use crate::raster::BinaryImage;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum RenderError {
    #[error("nothing to render")]
    Empty,
    #[error("image must be at least {min}x{min}, got {width}x{height}")]
    TooSmall { width: usize, height: usize, min: usize },
    #[error("margin {0} outside [0, 0.5)")]
    BadMargin(f64),
    #[error("projection is degenerate (all vertices collinear in the image plane)")]
    DegenerateProjection,
}

pub const MIN_RENDER_SIZE: usize = 16;
pub const DEFAULT_MARGIN: f64 = 0.1;

/// Orthonormal camera axes with `right × up = forward`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CameraFrame {
    pub right: Vec3,
    pub up: Vec3,
    pub forward: Vec3,
}

impl CameraFrame {
    /// Camera-plane coordinates `(right·p, up·p)`.
    pub fn project(&self, p: &Vec3) -> (f64, f64) {
        (self.right.dot(p), self.up.dot(p))
    }
}

pub fn camera_basis(view: &Viewpoint) -> CameraFrame {
    let forward = -view.direction.normalize();
    let seed = if view.direction.z.abs() > 0.999 {
        Vec3::x()
    } else {
        Vec3::z()
    };
    let up = (seed - forward * seed.dot(&forward)).normalize();
    let right = up.cross(&forward);
    CameraFrame { right, up, forward }
}

/// Maps camera-plane coordinates to continuous pixel coordinates.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ViewFit {
    pub frame: CameraFrame,
    pub center: (f64, f64),
    pub scale: f64,
    pub width: usize,
    pub height: usize,
}

impl ViewFit {
    /// Fits the projected bounding box of `points` into the image minus `margin`.
    /// A zero-extent set (a single point) keeps unit scale and is centered.
    pub fn fit(
        points: &[Vec3],
        view: &Viewpoint,
        width: usize,
        height: usize,
        margin: f64,
    ) -> Result<ViewFit, RenderError> {
        if points.is_empty() {
            return Err(RenderError::Empty);
        }
        if !(0.0..0.5).contains(&margin) {
            return Err(RenderError::BadMargin(margin));
        }
        if width == 0 || height == 0 {
            return Err(RenderError::TooSmall {
                width,
                height,
                min: 1,
            });
        }
        let frame = camera_basis(view);
        let (mut lo_x, mut lo_y) = (f64::INFINITY, f64::INFINITY);
        let (mut hi_x, mut hi_y) = (f64::NEG_INFINITY, f64::NEG_INFINITY);
        for p in points {
            let (x, y) = frame.project(p);
            lo_x = lo_x.min(x);
            hi_x = hi_x.max(x);
            lo_y = lo_y.min(y);
            hi_y = hi_y.max(y);
        }
        let span_w = width as f64 * (1.0 - 2.0 * margin);
        let span_h = height as f64 * (1.0 - 2.0 * margin);
        let (ext_x, ext_y) = (hi_x - lo_x, hi_y - lo_y);
        let scale = match (ext_x > 0.0, ext_y > 0.0) {
            (true, true) => (span_w / ext_x).min(span_h / ext_y),
            (true, false) => span_w / ext_x,
            (false, true) => span_h / ext_y,
            (false, false) => 1.0,
        };
        Ok(ViewFit {
            frame,
            center: ((lo_x + hi_x) * 0.5, (lo_y + hi_y) * 0.5),
            scale,
            width,
            height,
        })
    }

    pub fn to_pixel(&self, p: &Vec3) -> (f64, f64) {
        let (x, y) = self.frame.project(p);
        (
            self.width as f64 * 0.5 + (x - self.center.0) * self.scale,
            self.height as f64 * 0.5 - (y - self.center.1) * self.scale,
        )
    }
}

/// Filled silhouette (union of projected triangles, no depth test), fit to the mesh itself.
pub fn rasterize_silhouette(
    mesh: &TriangleMesh,
    view: &Viewpoint,
    width: usize,
    height: usize,
    margin: f64,
) -> Result<BinaryImage, RenderError> {
    check_size(width, height)?;
    if mesh.vertices.is_empty() || mesh.faces.is_empty() {
        return Err(RenderError::Empty);
    }
    let fit = ViewFit::fit(&mesh.vertices, view, width, height, margin)?;
    rasterize_with_fit(mesh, &fit)
}

/// Silhouette under an externally supplied fit, so several shapes can share one frame.
pub fn rasterize_with_fit(mesh: &TriangleMesh, fit: &ViewFit) -> Result<BinaryImage, RenderError> {
    if mesh.faces.is_empty() {
        return Err(RenderError::Empty);
    }
    let projected: Vec<(f64, f64)> = mesh.vertices.iter().map(|v| fit.to_pixel(v)).collect();
    if collinear(&projected) {
        return Err(RenderError::DegenerateProjection);
    }

    let (w, h) = (fit.width, fit.height);
    let mut img = BinaryImage::new(w, h).expect("size checked");
    for face in &mesh.faces {
        let [a, b, c] = face.map(|i| projected[i]);
        let area = edge(a, b, c);
        if area == 0.0 || !area.is_finite() {
            continue;
        }
        let x0 = a.0.min(b.0).min(c.0).floor().max(0.0) as usize;
        let y0 = a.1.min(b.1).min(c.1).floor().max(0.0) as usize;
        let x1 = (a.0.max(b.0).max(c.0).ceil().max(0.0) as usize).min(w);
        let y1 = (a.1.max(b.1).max(c.1).ceil().max(0.0) as usize).min(h);
        for y in y0..y1 {
            for x in x0..x1 {
                let p = (x as f64 + 0.5, y as f64 + 0.5);
                if inside(a, b, c, p, area) {
                    img.set(x, y, true);
                }
            }
        }
    }
    Ok(img)
}

/// Continuous pixel coordinates of each point, fit to the cloud.
pub fn project_points(
    cloud: &PointCloud,
    view: &Viewpoint,
    width: usize,
    height: usize,
    margin: f64,
) -> Result<Vec<(f64, f64)>, RenderError> {
    let fit = ViewFit::fit(&cloud.points, view, width, height, margin)?;
    Ok(cloud.points.iter().map(|p| fit.to_pixel(p)).collect())
}

fn check_size(width: usize, height: usize) -> Result<(), RenderError> {
    if width < MIN_RENDER_SIZE || height < MIN_RENDER_SIZE {
        return Err(RenderError::TooSmall {
            width,
            height,
            min: MIN_RENDER_SIZE,
        });
    }
    Ok(())
}

/// Twice the signed area of (a, b, p).
fn edge(a: (f64, f64), b: (f64, f64), p: (f64, f64)) -> f64 {
    (b.0 - a.0) * (p.1 - a.1) - (b.1 - a.1) * (p.0 - a.0)
}

/// Inclusive point-in-triangle test for either winding.
fn inside(a: (f64, f64), b: (f64, f64), c: (f64, f64), p: (f64, f64), area: f64) -> bool {
    let e0 = edge(a, b, p);
    let e1 = edge(b, c, p);
    let e2 = edge(c, a, p);
    if area > 0.0 {
        e0 >= 0.0 && e1 >= 0.0 && e2 >= 0.0
    } else {
        e0 <= 0.0 && e1 <= 0.0 && e2 <= 0.0
    }
}

fn collinear(points: &[(f64, f64)]) -> bool {
    let Some(&p0) = points.first() else {
        return true;
    };
    let dist2 = |a: (f64, f64), b: (f64, f64)| (a.0 - b.0).powi(2) + (a.1 - b.1).powi(2);
    let Some(&p1) = points.iter().max_by(|a, b| dist2(p0, **a).total_cmp(&dist2(p0, **b))) else {
        return true;
    };
    let len = dist2(p0, p1).sqrt();
    if len < 1e-9 {
        return true;
    }
    // Distance from the p0-p1 line, in pixels.
    !points.iter().any(|&p| (edge(p0, p1, p) / len).abs() > 1e-6)
}
