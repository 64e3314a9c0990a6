use std::collections::BTreeSet;

use nalgebra::{Matrix3, Rotation3, Unit};
use proptest::prelude::*;

use sketchloop_core::contour::{median_filter, trace_contours};
use sketchloop_core::geometry::{
    apply_transform, fibonacci_viewpoints, normalize_unit, parse_off, PointCloud, RigidTransform, Vec3,
};
use sketchloop_core::icp::{icp, nearest_neighbor_pairs, rigid_fit, IcpParams};
use sketchloop_core::raster::{BinaryImage, GrayImage};
use sketchloop_core::retrieval::{rank_by_model, weight_vector, ImageRef, InvertedIndex};

fn vec3(r: f64) -> impl Strategy<Value = Vec3> {
    (-r..r, -r..r, -r..r).prop_map(|(x, y, z)| Vec3::new(x, y, z))
}

fn rotation() -> impl Strategy<Value = Matrix3<f64>> {
    (vec3(1.0), -3.1..3.1f64).prop_map(|(axis, angle)| {
        let axis = if axis.norm() < 1e-3 { Vec3::z() } else { axis };
        Rotation3::from_axis_angle(&Unit::new_normalize(axis), angle).into_inner()
    })
}

fn transform() -> impl Strategy<Value = RigidTransform> {
    (rotation(), vec3(5.0)).prop_map(|(r, t)| RigidTransform::new(r, t).unwrap())
}

fn off_text(verts: &[Vec3], faces: &[[usize; 3]]) -> String {
    let mut s = format!("OFF\n{} {} 0\n", verts.len(), faces.len());
    for v in verts {
        s += &format!("{} {} {}\n", v.x, v.y, v.z);
    }
    for f in faces {
        s += &format!("3 {} {} {}\n", f[0], f[1], f[2]);
    }
    s
}

/// Ink pixels with a 4-neighbour outside the ink.
fn border_pixels(img: &BinaryImage) -> BTreeSet<(i64, i64)> {
    img.ink_pixels()
        .into_iter()
        .map(|(x, y)| (x as i64, y as i64))
        .filter(|&(x, y)| {
            [(1, 0), (-1, 0), (0, 1), (0, -1)]
                .iter()
                .any(|&(dx, dy)| !img.get_signed(x + dx, y + dy))
        })
        .collect()
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn parsed_meshes_respect_face_bounds(
        verts in prop::collection::vec(vec3(2.0), 3..20),
        faces in prop::collection::vec([0usize..25, 0usize..25, 0usize..25], 1..20),
        cut in 0usize..400,
        flip in prop::option::of((0usize..400, any::<u8>())),
    ) {
        let mut bytes = off_text(&verts, &faces).into_bytes();
        if let Some((at, b)) = flip {
            let at = at % bytes.len();
            bytes[at] = b;
        }
        bytes.truncate(cut.max(1).min(bytes.len()));
        if let Ok(mesh) = parse_off(&bytes) {
            prop_assert!(mesh.vertices.len() >= 3);
            for f in &mesh.faces {
                prop_assert!(f.iter().all(|&i| i < mesh.vertices.len()));
            }
            prop_assert!(mesh.vertices.iter().all(|v| v.iter().all(|c| c.is_finite())));
        }
    }

    #[test]
    fn normalize_unit_is_idempotent(points in prop::collection::vec(vec3(50.0), 2..100)) {
        prop_assume!(points.iter().any(|p| (p - points[0]).norm() > 1e-3));
        let (once, _) = normalize_unit(&points).unwrap();
        let (twice, _) = normalize_unit(&once).unwrap();
        for (a, b) in once.iter().zip(&twice) {
            prop_assert!((a - b).abs().max() <= 1e-9);
        }
    }

    #[test]
    fn transforms_are_rigid_and_compose(t1 in transform(), t2 in transform(), pts in prop::collection::vec(vec3(3.0), 2..40)) {
        let moved = apply_transform(&t1, &pts);
        for i in 0..pts.len() {
            for j in i + 1..pts.len() {
                prop_assert!(((moved[i] - moved[j]).norm() - (pts[i] - pts[j]).norm()).abs() < 1e-9);
            }
        }
        let both = t2.compose(&t1);
        for p in &pts {
            prop_assert!((both.apply_point(p) - t2.apply_point(&t1.apply_point(p))).norm() < 1e-9);
            prop_assert!((t1.inverse().apply_point(&t1.apply_point(p)) - p).norm() < 1e-9);
        }
    }

    #[test]
    fn rigid_fit_is_proper_even_for_planar_sets(
        pts in prop::collection::vec((-1.0..1.0f64, -1.0..1.0f64), 3..40),
        noise in prop::collection::vec(vec3(0.3), 40),
        t in transform(),
    ) {
        // Planar source, noisy target: reflections would fit better if allowed.
        let src: Vec<Vec3> = pts.iter().map(|&(x, y)| Vec3::new(x, y, 0.0)).collect();
        let dst: Vec<Vec3> = src.iter().zip(&noise).map(|(p, n)| t.apply_point(p) + n).collect();
        if let Ok(fit) = rigid_fit(&src, &dst) {
            prop_assert!((fit.rotation.determinant() - 1.0).abs() < 1e-9);
            prop_assert!(fit.validate().is_ok());
        }
    }

    #[test]
    fn kd_pairs_equal_linear_scan(
        model in prop::collection::vec(vec3(1.0), 1..300),
        controls in prop::collection::vec(vec3(1.2), 1..100),
    ) {
        let pairs = nearest_neighbor_pairs(&PointCloud::new(controls.clone()), &PointCloud::new(model.clone())).unwrap();
        for (c, p) in controls.iter().zip(&pairs.pairs) {
            let mut best = (0, f64::INFINITY);
            for (i, m) in model.iter().enumerate() {
                let d = (c - m).norm();
                if d < best.1 {
                    best = (i, d);
                }
            }
            prop_assert_eq!((p.model_index, p.distance), best);
            prop_assert!(((p.control - p.model).norm() - p.distance).abs() < 1e-9);
        }
    }

    #[test]
    fn median_of_constant_image_is_identity(w in 1usize..20, h in 1usize..20, v in any::<u8>(), k in prop::sample::select(vec![1usize, 3, 5, 7])) {
        let img = GrayImage::new(w, h, v).unwrap();
        prop_assert_eq!(median_filter(&img, k).unwrap(), img);
    }

    #[test]
    fn traced_borders_match_enumeration(w in 1usize..24, h in 1usize..24, bits in prop::collection::vec(any::<bool>(), 576)) {
        let img = BinaryImage::from_fn(w, h, |x, y| bits[y * 24 + x]).unwrap();
        let contours = trace_contours(&img);
        let traced: BTreeSet<(i64, i64)> = contours.iter().flat_map(|c| c.points.iter().copied()).collect();
        prop_assert_eq!(traced, border_pixels(&img));
        for c in &contours {
            let n = c.points.len();
            for k in 0..n {
                let (a, b) = (c.points[k], c.points[(k + 1) % n]);
                prop_assert!((a.0 - b.0).abs() <= 1 && (a.1 - b.1).abs() <= 1);
            }
        }
    }

    #[test]
    fn index_scores_are_bounded_and_symmetric(
        hists in prop::collection::vec(prop::collection::vec(0u32..6, 12), 2..30),
    ) {
        prop_assume!(hists.iter().flatten().any(|&t| t > 0));
        let images: Vec<ImageRef> = (0..hists.len()).map(|i| ImageRef { model: (i % 4) as u32, view: i as u32 }).collect();
        let index = InvertedIndex::build(&hists, images.clone()).unwrap();
        prop_assert!(index.idf_values().iter().all(|&v| v > 0.0));
        prop_assert!(index.postings().iter().flatten().all(|p| p.weight > 0.0));
        let scores: Vec<Vec<f64>> = hists.iter().map(|h| index.image_scores(h).unwrap()).collect();
        for (a, row) in scores.iter().enumerate() {
            let w = weight_vector(&hists[a], index.idf_values());
            let norm: f64 = w.iter().map(|x| x * x).sum::<f64>().sqrt();
            prop_assert!(norm == 0.0 || (norm - 1.0).abs() < 1e-6);
            for (b, &s) in row.iter().enumerate() {
                prop_assert!((-1e-12..=1.0 + 1e-12).contains(&s));
                prop_assert!((s - scores[b][a]).abs() < 1e-9);
            }
            let hits = rank_by_model(row, &images, 10);
            prop_assert!(hits.windows(2).all(|p| p[0].similarity >= p[1].similarity));
            for h in &hits {
                let best = row.iter().zip(&images).filter(|(_, i)| i.model == h.model_id).map(|(s, _)| s.clamp(0.0, 1.0)).fold(0.0, f64::max);
                prop_assert_eq!(h.similarity, best);
            }
        }
    }

    #[test]
    fn viewpoints_are_unit_and_balanced(n in 50usize..400) {
        let views = fibonacci_viewpoints(n).unwrap();
        prop_assert_eq!(views.len(), n);
        let mut sum = Vec3::zeros();
        for v in &views {
            prop_assert!((v.direction.norm() - 1.0).abs() < 1e-9);
            sum += v.direction;
        }
        prop_assert!((sum / n as f64).norm() < 0.05);
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]

    #[test]
    fn icp_is_monotone_rigid_and_deterministic(
        model in prop::collection::vec(vec3(0.5), 50..400),
        t in (rotation(), vec3(0.2)),
        take in 10usize..50,
        seed in any::<u64>(),
    ) {
        // Keep the motion modest so the cloud is a genuine subset view.
        let small = Rotation3::from_matrix_unchecked(t.0).scaled_axis() * 0.1;
        let r = Rotation3::new(small).into_inner();
        let cloud: Vec<Vec3> = model.iter().take(take).map(|p| r * p + t.1).collect();
        let params = IcpParams { n_control: 20, seed, ..IcpParams::default() };
        let res = icp(&PointCloud::new(model.clone()), &PointCloud::new(cloud.clone()), &params).unwrap();
        prop_assert!(res.history.windows(2).all(|w| w[1] <= w[0] + 1e-12));
        prop_assert!(res.error >= 0.0 && res.iterations <= params.max_iters);
        prop_assert!(res.transform.validate().is_ok());
        let moved = apply_transform(&res.transform, &model[..10]);
        for i in 0..10 {
            for j in i + 1..10 {
                prop_assert!(((moved[i] - moved[j]).norm() - (model[i] - model[j]).norm()).abs() < 1e-9);
            }
        }
        let again = icp(&PointCloud::new(model), &PointCloud::new(cloud), &params).unwrap();
        prop_assert_eq!(again.to_record(), res.to_record());
    }
}
