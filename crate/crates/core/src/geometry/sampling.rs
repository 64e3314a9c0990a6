use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::{GeometryError, PointCloud, TriangleMesh};

/// Area-weighted uniform samples on the mesh surface, deterministic per seed.
pub fn sample_surface(mesh: &TriangleMesh, n: usize, seed: u64) -> Result<PointCloud, GeometryError> {
    let mut cumulative = Vec::with_capacity(mesh.faces.len());
    let mut total = 0.0;
    for f in 0..mesh.faces.len() {
        total += mesh.triangle_area(f);
        cumulative.push(total);
    }
    if !(total > 0.0) {
        return Err(GeometryError::Degenerate);
    }

    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let points = (0..n)
        .map(|_| {
            let target = rng.random::<f64>() * total;
            let face = cumulative.partition_point(|&c| c <= target).min(cumulative.len() - 1);
            let [a, b, c] = mesh.triangle(face);
            let r1: f64 = rng.random::<f64>().sqrt();
            let r2: f64 = rng.random();
            a * (1.0 - r1) + b * (r1 * (1.0 - r2)) + c * (r1 * r2)
        })
        .collect();
    Ok(PointCloud::new(points))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::Vec3;

    fn unit_square() -> TriangleMesh {
        TriangleMesh::new(
            vec![
                Vec3::new(0.0, 0.0, 0.0),
                Vec3::new(1.0, 0.0, 0.0),
                Vec3::new(1.0, 1.0, 0.0),
                Vec3::new(0.0, 1.0, 0.0),
            ],
            vec![[0, 1, 2], [0, 2, 3]],
        )
        .unwrap()
    }

    #[test]
    fn samples_lie_on_surface_and_are_deterministic() {
        let mesh = unit_square();
        let a = sample_surface(&mesh, 500, 9).unwrap();
        assert_eq!(a, sample_surface(&mesh, 500, 9).unwrap());
        assert_ne!(a, sample_surface(&mesh, 500, 10).unwrap());
        for p in &a.points {
            assert!(p.z == 0.0 && (0.0..=1.0).contains(&p.x) && (0.0..=1.0).contains(&p.y));
        }
    }

    #[test]
    fn sampling_is_area_weighted() {
        // Two triangles of area 1/2 and 1/8: expect an 80/20 split.
        let mesh = TriangleMesh::new(
            vec![
                Vec3::new(0.0, 0.0, 0.0),
                Vec3::new(1.0, 0.0, 0.0),
                Vec3::new(0.0, 1.0, 0.0),
                Vec3::new(0.0, 0.0, 5.0),
                Vec3::new(0.5, 0.0, 5.0),
                Vec3::new(0.0, 0.5, 5.0),
            ],
            vec![[0, 1, 2], [3, 4, 5]],
        )
        .unwrap();
        let cloud = sample_surface(&mesh, 20_000, 1).unwrap();
        let high = cloud.points.iter().filter(|p| p.z > 1.0).count() as f64 / 20_000.0;
        assert!((high - 0.2).abs() < 0.015, "fraction {high}");
    }

    #[test]
    fn faceless_mesh_is_degenerate() {
        let mesh = TriangleMesh { faces: vec![], ..unit_square() };
        assert_eq!(sample_surface(&mesh, 10, 0).unwrap_err(), GeometryError::Degenerate);
    }
}
