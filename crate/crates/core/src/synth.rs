//! Procedural meshes in five categories, used as a self-contained corpus.
//!
//! Every shape is tessellated to a roughly uniform vertex spacing of about
//! 1.6% of its bounding-box diagonal, so its vertex set is a dense sample of
//! its surface. No shape has a rotational symmetry.

use std::f64::consts::{PI, TAU};
use std::fmt;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::geometry::{write_mesh_off, TriangleMesh, Vec3};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Category {
    Teacup,
    Chair,
    Table,
    Vase,
    Animal,
}

impl Category {
    pub const ALL: [Category; 5] = [
        Category::Teacup,
        Category::Chair,
        Category::Table,
        Category::Vase,
        Category::Animal,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Category::Teacup => "teacup",
            Category::Chair => "chair",
            Category::Table => "table",
            Category::Vase => "vase",
            Category::Animal => "animal",
        }
    }
}

impl fmt::Display for Category {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Category {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        Category::ALL
            .into_iter()
            .find(|c| c.name() == s)
            .ok_or_else(|| format!("unknown category {s:?}"))
    }
}

const SPACING: f64 = 0.012;

struct Builder {
    vertices: Vec<Vec3>,
    faces: Vec<[usize; 3]>,
    h: f64,
}

impl Builder {
    fn new(diagonal: f64) -> Builder {
        Builder {
            vertices: Vec::new(),
            faces: Vec::new(),
            h: SPACING * diagonal,
        }
    }

    fn segments(&self, length: f64, min: usize) -> usize {
        ((length / self.h).ceil() as usize).max(min)
    }

    /// Quad grid over `[0,1]²`, optionally closed in `u`.
    fn grid(&mut self, nu: usize, nv: usize, wrap_u: bool, f: impl Fn(f64, f64) -> Vec3) {
        let cols = if wrap_u { nu } else { nu + 1 };
        let base = self.vertices.len();
        for j in 0..=nv {
            for i in 0..cols {
                self.vertices.push(f(i as f64 / nu as f64, j as f64 / nv as f64));
            }
        }
        for j in 0..nv {
            for i in 0..nu {
                let i1 = if wrap_u { (i + 1) % nu } else { i + 1 };
                let a = base + j * cols + i;
                let b = base + j * cols + i1;
                let c = base + (j + 1) * cols + i1;
                let d = base + (j + 1) * cols + i;
                self.faces.push([a, b, c]);
                self.faces.push([a, c, d]);
            }
        }
    }

    fn patch(&mut self, origin: Vec3, eu: Vec3, ev: Vec3) {
        let (nu, nv) = (self.segments(eu.norm(), 1), self.segments(ev.norm(), 1));
        self.grid(nu, nv, false, |u, v| origin + eu * u + ev * v);
    }

    fn cuboid(&mut self, center: Vec3, half: Vec3) {
        let (x, y, z) = (Vec3::x() * 2.0 * half.x, Vec3::y() * 2.0 * half.y, Vec3::z() * 2.0 * half.z);
        let lo = center - half;
        let hi = center + half;
        self.patch(lo, y, x);
        self.patch(lo + z, x, y);
        self.patch(lo, x, z);
        self.patch(Vec3::new(lo.x, hi.y, lo.z), z, x);
        self.patch(lo, z, y);
        self.patch(Vec3::new(hi.x, lo.y, lo.z), y, z);
    }

    fn ellipsoid(&mut self, center: Vec3, r: Vec3) {
        let rmax = r.max();
        let (nu, nv) = (self.segments(TAU * rmax, 8), self.segments(PI * rmax, 4));
        self.grid(nu, nv, true, |u, v| {
            let (th, ph) = (u * TAU, v * PI);
            center + Vec3::new(r.x * ph.sin() * th.cos(), r.y * ph.sin() * th.sin(), r.z * ph.cos())
        });
    }

    /// Revolves an `(r, z)` polyline about the z axis with an elliptical
    /// cross-section `(a·r, b·r)`.
    fn revolve(&mut self, profile: &[(f64, f64)], center: Vec3, a: f64, b: f64) {
        let mut cum = vec![0.0];
        for w in profile.windows(2) {
            let d = ((w[1].0 - w[0].0).hypot(w[1].1 - w[0].1)) * a.max(b).max(1.0);
            cum.push(cum.last().unwrap() + d);
        }
        let total = *cum.last().unwrap();
        let rmax = profile.iter().map(|p| p.0).fold(0.0, f64::max) * a.max(b);
        let (nu, nv) = (self.segments(TAU * rmax, 8), self.segments(total, 2));
        let at = |s: f64| {
            let s = s * total;
            let k = cum.partition_point(|&c| c <= s).clamp(1, profile.len() - 1);
            let span = cum[k] - cum[k - 1];
            let t = if span > 0.0 { ((s - cum[k - 1]) / span).clamp(0.0, 1.0) } else { 0.0 };
            let (p, q) = (profile[k - 1], profile[k]);
            (p.0 + (q.0 - p.0) * t, p.1 + (q.1 - p.1) * t)
        };
        self.grid(nu, nv, true, |u, v| {
            let (r, z) = at(v);
            let th = u * TAU;
            center + Vec3::new(a * r * th.cos(), b * r * th.sin(), z)
        });
    }

    /// Circular tube swept along `path(t)`, `t ∈ [0,1]`, with flat end caps.
    fn tube(&mut self, path: impl Fn(f64) -> Vec3, radius: f64) {
        let length: f64 = (0..200).map(|i| (path((i + 1) as f64 / 200.0) - path(i as f64 / 200.0)).norm()).sum();
        let nv = self.segments(length, 1);
        let nu = self.segments(TAU * radius, 8);
        let centers: Vec<Vec3> = (0..=nv).map(|j| path(j as f64 / nv as f64)).collect();
        let tangents: Vec<Vec3> = (0..=nv)
            .map(|j| (centers[(j + 1).min(nv)] - centers[j.saturating_sub(1)]).normalize())
            .collect();
        // Parallel-transported normals avoid twisting along bends.
        let t0 = tangents[0];
        let seed = if t0.x.abs() < 0.9 { Vec3::x() } else { Vec3::y() };
        let mut normals = vec![(seed - t0 * seed.dot(&t0)).normalize()];
        for t in &tangents[1..] {
            let prev = normals.last().unwrap();
            normals.push((prev - t * prev.dot(t)).normalize());
        }
        let ring = |j: usize, u: f64| {
            let (n, t) = (normals[j], tangents[j]);
            let b = t.cross(&n);
            let th = u * TAU;
            centers[j] + (n * th.cos() + b * th.sin()) * radius
        };
        self.grid(nu, nv, true, |u, v| ring((v * nv as f64).round() as usize, u));
        let nr = self.segments(radius, 1);
        for j in [0, nv] {
            self.grid(nu, nr, true, |u, v| centers[j] + (ring(j, u) - centers[j]) * v);
        }
    }

    fn segment(&mut self, a: Vec3, b: Vec3, radius: f64) {
        self.tube(|t| a + (b - a) * t, radius);
    }

    fn finish(self) -> TriangleMesh {
        TriangleMesh::new(self.vertices, self.faces).expect("generated faces index generated vertices")
    }
}

fn diag(x: f64, y: f64, z: f64) -> f64 {
    (x * x + y * y + z * z).sqrt()
}

/// One shape of `category`; `variant` perturbs its proportions deterministically.
pub fn generate(category: Category, variant: u64) -> TriangleMesh {
    let mut rng = ChaCha8Rng::seed_from_u64(variant.wrapping_mul(0x9E37_79B9_7F4A_7C15) ^ category as u64);
    let mut j = move |spread: f64| 1.0 + rng.random_range(-spread..=spread);
    match category {
        Category::Teacup => teacup(j(0.12), j(0.12), j(0.1), j(0.2)),
        Category::Chair => chair(j(0.12), j(0.12), j(0.15), j(0.15)),
        Category::Table => table(j(0.15), j(0.15), j(0.12), j(0.2)),
        Category::Vase => vase(j(0.12), j(0.12), j(0.12), j(0.2)),
        Category::Animal => animal(j(0.12), j(0.15), j(0.15), j(0.2)),
    }
}

fn teacup(width: f64, height: f64, ellipse: f64, handle: f64) -> TriangleMesh {
    let (w, hgt) = (0.5 * width, 0.6 * height);
    let b = 0.78 * ellipse;
    let mut m = Builder::new(diag(2.0 * w + 0.3 * handle, 2.0 * w * b, hgt));
    let profile = [
        (0.0, 0.0),
        (0.64 * w, 0.0),
        (0.72 * w, 0.08 * hgt),
        (0.96 * w, 0.9 * hgt),
        (w, hgt),
        (0.92 * w, hgt),
        (0.88 * w, 0.9 * hgt),
        (0.6 * w, 0.14 * hgt),
        (0.0, 0.14 * hgt),
    ];
    m.revolve(&profile, Vec3::zeros(), 1.0, b);
    let (cx, cz, rx, rz) = (0.9 * w, 0.5 * hgt, 0.5 * w * handle, 0.34 * hgt);
    m.tube(
        |t| {
            let a = (-0.45 + 0.9 * t) * PI;
            Vec3::new(cx + rx * a.cos(), 0.0, cz + rz * a.sin())
        },
        0.12 * w,
    );
    m.finish()
}

fn chair(width: f64, depth: f64, back: f64, seat: f64) -> TriangleMesh {
    let (hw, hd, sz, top) = (0.25 * width, 0.24 * depth, 0.45 * seat, 0.45 * seat + 0.5 * back);
    let mut m = Builder::new(diag(2.0 * hw + 0.06, 2.0 * hd, top));
    let leg = 0.025;
    m.cuboid(Vec3::new(0.0, 0.0, sz), Vec3::new(hw, hd, 0.03));
    for (sx, sy) in [(1.0, 1.0), (1.0, -1.0), (-1.0, 1.0), (-1.0, -1.0)] {
        let (x, y) = (sx * (hw - 0.04), sy * (hd - 0.04));
        m.segment(Vec3::new(x, y, 0.0), Vec3::new(x, y, sz - 0.03), leg);
    }
    let by = -(hd - 0.03);
    for x in [-(hw - 0.04), hw - 0.04] {
        m.segment(Vec3::new(x, by, sz + 0.03), Vec3::new(x, by, top - 0.02), leg);
    }
    m.cuboid(Vec3::new(0.0, by, top - 0.06), Vec3::new(hw, 0.02, 0.06));
    m.cuboid(Vec3::new(0.0, by, 0.5 * (sz + top)), Vec3::new(hw - 0.04, 0.015, 0.03));
    // One armrest only.
    let ax = hw + 0.01;
    m.cuboid(Vec3::new(ax, -0.1 * hd, sz + 0.2), Vec3::new(0.03, 0.8 * hd, 0.02));
    m.segment(Vec3::new(ax, 0.55 * hd, sz + 0.03), Vec3::new(ax, 0.55 * hd, sz + 0.18), 0.02);
    m.finish()
}

fn table(length: f64, width: f64, height: f64, drawer: f64) -> TriangleMesh {
    let (hl, hw, top) = (0.8 * length, 0.45 * width, 0.72 * height);
    let mut m = Builder::new(diag(2.0 * hl, 2.0 * hw, top + 0.03));
    m.cuboid(Vec3::new(0.0, 0.0, top), Vec3::new(hl, hw, 0.03));
    let (lx, ly) = (hl - 0.08, hw - 0.07);
    for (sx, sy) in [(1.0, 1.0), (1.0, -1.0), (-1.0, 1.0), (-1.0, -1.0)] {
        m.segment(Vec3::new(sx * lx, sy * ly, 0.0), Vec3::new(sx * lx, sy * ly, top - 0.03), 0.035);
    }
    // Drawer under one end and a stretcher at the other.
    let dw = 0.3 * drawer;
    m.cuboid(Vec3::new(lx - 0.06 - dw, 0.0, top - 0.1), Vec3::new(dw, 0.8 * hw, 0.07));
    m.segment(Vec3::new(-lx, -ly, 0.22 * top), Vec3::new(-lx, ly, 0.22 * top), 0.025);
    m.finish()
}

fn vase(height: f64, belly: f64, ellipse: f64, handle: f64) -> TriangleMesh {
    let (hgt, r) = (height, 0.32 * belly);
    let b = 0.7 * ellipse;
    let mut m = Builder::new(diag(2.0 * r + 0.15 * handle, 2.0 * r * b, hgt));
    let profile = [
        (0.0, 0.0),
        (0.56 * r, 0.0),
        (0.62 * r, 0.02 * hgt),
        (0.94 * r, 0.25 * hgt),
        (r, 0.4 * hgt),
        (0.7 * r, 0.7 * hgt),
        (0.38 * r, 0.85 * hgt),
        (0.44 * r, 0.95 * hgt),
        (0.5 * r, hgt),
        (0.4 * r, hgt),
        (0.32 * r, 0.9 * hgt),
        (0.0, 0.9 * hgt),
    ];
    m.revolve(&profile, Vec3::zeros(), 1.0, b);
    // Single side handle from neck to shoulder.
    let (z0, z1) = (0.82 * hgt, 0.5 * hgt);
    let reach = 0.42 * r * handle;
    m.tube(
        |t| {
            let z = z0 + (z1 - z0) * t;
            let radius_here = if t < 0.5 { 0.42 * r + (0.9 * r - 0.42 * r) * t * 2.0 } else { 0.9 * r };
            Vec3::new(-(radius_here + reach * (PI * t).sin()), 0.0, z)
        },
        0.035 * hgt,
    );
    m.finish()
}

fn animal(body: f64, legs: f64, neck: f64, tail: f64) -> TriangleMesh {
    let (bl, lh) = (0.45 * body, 0.45 * legs);
    let bz = lh + 0.1;
    let mut m = Builder::new(diag(2.0 * bl + 0.5, 0.4, bz + 0.45 * neck));
    m.ellipsoid(Vec3::new(0.0, 0.0, bz), Vec3::new(bl, 0.2, 0.17));
    let head = Vec3::new(bl + 0.12, 0.0, bz + 0.28 * neck);
    m.segment(Vec3::new(bl - 0.1, 0.0, bz + 0.05), head - Vec3::new(0.05, 0.0, 0.05), 0.07);
    m.ellipsoid(head + Vec3::new(0.04, 0.0, 0.0), Vec3::new(0.16, 0.1, 0.1));
    for sy in [-1.0, 1.0] {
        m.ellipsoid(head + Vec3::new(-0.03, 0.06 * sy, 0.11), Vec3::new(0.03, 0.02, 0.06));
    }
    for (x, y) in [(0.65, 0.11), (0.65, -0.11), (-0.65, 0.11), (-0.7, -0.11)] {
        let top = Vec3::new(x * bl, y, bz - 0.08);
        m.segment(top, Vec3::new(x * bl + 0.02, y, 0.0), 0.045);
    }
    let root = Vec3::new(-bl + 0.02, 0.0, bz + 0.04);
    let tl = 0.3 * tail;
    m.tube(|t| root + Vec3::new(-tl * t, 0.06 * (PI * t).sin(), 0.12 * t * t), 0.025);
    m.finish()
}

/// Writes `per_category` variants of every category as
/// `<dir>/<category>/<category>_<nn>.off`.
pub fn write_corpus(dir: &Path, per_category: usize, seed: u64) -> std::io::Result<Vec<PathBuf>> {
    let mut paths = Vec::new();
    for c in Category::ALL {
        let sub = dir.join(c.name());
        std::fs::create_dir_all(&sub)?;
        for i in 0..per_category {
            let path = sub.join(format!("{}_{i:02}.off", c.name()));
            std::fs::write(&path, write_mesh_off(&generate(c, seed * 1000 + i as u64)))?;
            paths.push(path);
        }
    }
    Ok(paths)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::{parse_off, Aabb};
    use crate::icp::nearest_linear;

    #[test]
    fn shapes_are_dense_and_reasonably_sized() {
        for c in Category::ALL {
            let mesh = generate(c, 0);
            let (normalized, _) = mesh.normalized().unwrap();
            let n = normalized.vertices.len();
            assert!((1000..40_000).contains(&n), "{c}: {n} vertices");
            assert!(normalized.surface_area() > 0.1, "{c}");
            let d = Aabb::from_points(&normalized.vertices).unwrap().diagonal();
            assert!((d - 1.0).abs() < 1e-9);
        }
    }

    #[test]
    fn vertices_cover_the_surface() {
        // Surface samples lie close to some vertex.
        for c in Category::ALL {
            let (mesh, _) = generate(c, 0).normalized().unwrap();
            let samples = crate::geometry::sample_surface(&mesh, 300, 1).unwrap();
            let rms = (samples
                .points
                .iter()
                .map(|p| nearest_linear(&mesh.vertices, p).unwrap().1)
                .sum::<f64>()
                / 300.0)
                .sqrt();
            assert!(rms < 0.012, "{c}: rms {rms}");
        }
    }

    #[test]
    fn variants_differ_and_repeat() {
        for c in Category::ALL {
            assert_eq!(generate(c, 3), generate(c, 3));
            assert_ne!(generate(c, 3).vertices, generate(c, 4).vertices);
        }
    }

    #[test]
    fn names_round_trip() {
        for c in Category::ALL {
            assert_eq!(c.name().parse::<Category>().unwrap(), c);
        }
        assert!("sofa".parse::<Category>().is_err());
    }

    #[test]
    fn corpus_layout() {
        let dir = tempfile::tempdir().unwrap();
        let paths = write_corpus(dir.path(), 2, 0).unwrap();
        assert_eq!(paths.len(), 10);
        assert!(dir.path().join("vase/vase_01.off").exists());
        let back = parse_off(&std::fs::read(&paths[0]).unwrap()).unwrap();
        assert_eq!(back, generate(Category::Teacup, 0));
    }
}
