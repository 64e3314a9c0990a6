//! Rigid alignment of a model to a point cloud by iterative closest point.

mod kdtree;

pub use kdtree::{nearest_linear, KdTree};

use nalgebra::Matrix3;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::geometry::{centroid, sample_surface, Aabb, GeometryError, PointCloud, RigidTransform, TriangleMesh, Vec3};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum IcpError {
    #[error("empty point set")]
    Empty,
    #[error("rigid fit needs at least 3 pairs, got {0}")]
    TooFewPairs(usize),
    #[error("degenerate fit: points are collinear or coincident")]
    DegenerateFit,
    #[error("model has zero extent")]
    ZeroExtent,
    #[error("invalid parameters: {0}")]
    InvalidParams(String),
    #[error("malformed alignment record: {0}")]
    Record(String),
    #[error(transparent)]
    Geometry(#[from] GeometryError),
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct IcpParams {
    pub n_control: usize,
    pub max_iters: usize,
    pub tol: f64,
    pub seed: u64,
    /// Re-estimate the model scale after every rigid step.
    #[serde(default = "yes")]
    pub refine_scale: bool,
}

fn yes() -> bool {
    true
}

impl Default for IcpParams {
    fn default() -> Self {
        IcpParams {
            n_control: 2000,
            max_iters: 50,
            tol: 1e-6,
            seed: 0,
            refine_scale: true,
        }
    }
}

impl IcpParams {
    pub fn validate(&self) -> Result<(), IcpError> {
        if self.n_control < 3 {
            return Err(IcpError::InvalidParams("n_control must be at least 3".into()));
        }
        if self.max_iters == 0 {
            return Err(IcpError::InvalidParams("max_iters must be at least 1".into()));
        }
        if !(self.tol > 0.0) {
            return Err(IcpError::InvalidParams("tol must be positive".into()));
        }
        Ok(())
    }
}

/// Control point paired with its nearest model point.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Correspondence {
    pub control: Vec3,
    pub model: Vec3,
    pub model_index: usize,
    pub distance: f64,
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct CorrespondenceSet {
    pub pairs: Vec<Correspondence>,
}

impl CorrespondenceSet {
    pub fn rms(&self) -> f64 {
        if self.pairs.is_empty() {
            return 0.0;
        }
        (self.pairs.iter().map(|p| p.distance * p.distance).sum::<f64>() / self.pairs.len() as f64).sqrt()
    }
}

/// Up to `n` cloud points drawn without replacement; the whole cloud when it is no larger.
pub fn select_control_points(cloud: &PointCloud, n: usize, seed: u64) -> Result<PointCloud, IcpError> {
    if cloud.is_empty() {
        return Err(IcpError::Empty);
    }
    if cloud.len() <= n {
        return Ok(cloud.clone());
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let picked = rand::seq::index::sample(&mut rng, cloud.len(), n);
    Ok(PointCloud::new(picked.into_iter().map(|i| cloud.points[i]).collect()))
}

fn pairs_with_tree(controls: &[Vec3], model: &[Vec3], tree: &KdTree) -> CorrespondenceSet {
    let pairs = controls
        .par_iter()
        .map(|c| {
            let (j, _) = tree.nearest(c).expect("non-empty model");
            Correspondence {
                control: *c,
                model: model[j],
                model_index: j,
                distance: (c - model[j]).norm(),
            }
        })
        .collect();
    CorrespondenceSet { pairs }
}

/// Exact nearest model point for every control point (ties go to the lowest index).
pub fn nearest_neighbor_pairs(controls: &PointCloud, model_pts: &PointCloud) -> Result<CorrespondenceSet, IcpError> {
    if controls.is_empty() || model_pts.is_empty() {
        return Err(IcpError::Empty);
    }
    let tree = KdTree::new(&model_pts.points);
    Ok(pairs_with_tree(&controls.points, &model_pts.points, &tree))
}

/// Least-squares rotation and translation taking `source[i]` onto `target[i]` (Kabsch).
pub fn rigid_fit(source: &[Vec3], target: &[Vec3]) -> Result<RigidTransform, IcpError> {
    let n = source.len().min(target.len());
    if n < 3 {
        return Err(IcpError::TooFewPairs(n));
    }
    let (source, target) = (&source[..n], &target[..n]);
    let p_bar = centroid(source).expect("non-empty");
    let q_bar = centroid(target).expect("non-empty");
    let mut h = Matrix3::zeros();
    for (p, q) in source.iter().zip(target) {
        h += (p - p_bar) * (q - q_bar).transpose();
    }
    let svd = h.svd(true, true);
    let mut sv: Vec<f64> = svd.singular_values.iter().copied().collect();
    sv.sort_by(|a, b| b.total_cmp(a));
    // Rank ≤ 1 leaves rotation about the common line undetermined.
    if !(sv[0] > 0.0) || sv[1] <= sv[0] * 1e-12 {
        return Err(IcpError::DegenerateFit);
    }
    let u = svd.u.expect("requested");
    let v = svd.v_t.expect("requested").transpose();
    let d = (v * u.transpose()).determinant().signum();
    let r = v * Matrix3::from_diagonal(&Vec3::new(1.0, 1.0, d)) * u.transpose();
    let t = q_bar - r * p_bar;
    Ok(RigidTransform::new(r, t)?)
}

/// Ratio of the cloud's bounding-box diagonal to the model's.
pub fn prescale_model(model_pts: &PointCloud, cloud: &PointCloud) -> Result<f64, IcpError> {
    let m = Aabb::from_points(&model_pts.points).ok_or(IcpError::Empty)?;
    let c = Aabb::from_points(&cloud.points).ok_or(IcpError::Empty)?;
    let (md, cd) = (m.diagonal(), c.diagonal());
    if !(md > 0.0) || !md.is_finite() || !(cd > 0.0) || !cd.is_finite() {
        return Err(IcpError::ZeroExtent);
    }
    Ok(cd / md)
}

/// Scales points by `s` about `pivot`.
pub fn scale_about(points: &[Vec3], pivot: &Vec3, s: f64) -> Vec<Vec3> {
    points.iter().map(|p| pivot + (p - pivot) * s).collect()
}

/// Least-squares uniform scale and translation `y -> s (y - m̄) + c̄` taking
/// `model[i]` toward `controls[i]`; `None` when the model points coincide.
fn scale_fit(model: &[Vec3], controls: &[Vec3]) -> Option<(f64, Vec3, Vec3)> {
    let m_bar = centroid(model)?;
    let c_bar = centroid(controls)?;
    let (mut num, mut den) = (0.0, 0.0);
    for (m, c) in model.iter().zip(controls) {
        num += (c - c_bar).dot(&(m - m_bar));
        den += (m - m_bar).norm_squared();
    }
    let s = num / den;
    (den > 0.0 && s.is_finite() && s > 0.0).then_some((s, m_bar, c_bar))
}

#[derive(Debug, Clone, PartialEq)]
pub struct IcpResult {
    /// Maps the prescaled model into the cloud frame.
    pub transform: RigidTransform,
    pub error: f64,
    pub iterations: usize,
    pub converged: bool,
    pub prescale: f64,
    /// Centroid of the model points; prescaling happens about it.
    pub pivot: Vec3,
    /// RMS correspondence distance at each iteration.
    pub history: Vec<f64>,
}

impl IcpResult {
    /// Full model-to-cloud map: prescale about the pivot, then the rigid transform.
    pub fn model_to_cloud(&self, p: &Vec3) -> Vec3 {
        self.transform.apply_point(&(self.pivot + (p - self.pivot) * self.prescale))
    }

    /// Fixed-order text record with 17 significant digits per real.
    pub fn to_record(&self) -> String {
        let r = &self.transform.rotation;
        let t = &self.transform.translation;
        let f = |v: f64| format!("{v:.16e}");
        let rot: Vec<String> = (0..3).flat_map(|i| (0..3).map(move |j| r[(i, j)])).map(f).collect();
        format!(
            "rotation {}\ntranslation {} {} {}\nprescale {}\npivot {} {} {}\nerror {}\niterations {}\nconverged {}\n",
            rot.join(" "),
            f(t.x),
            f(t.y),
            f(t.z),
            f(self.prescale),
            f(self.pivot.x),
            f(self.pivot.y),
            f(self.pivot.z),
            f(self.error),
            self.iterations,
            self.converged
        )
    }
}

/// Parsed form of [`IcpResult::to_record`].
#[derive(Debug, Clone, PartialEq)]
pub struct IcpRecord {
    pub transform: RigidTransform,
    pub prescale: f64,
    pub pivot: Vec3,
    pub error: f64,
    pub iterations: usize,
    pub converged: bool,
}

pub fn parse_icp_record(text: &str) -> Result<IcpRecord, IcpError> {
    let bad = |m: &str| IcpError::Record(m.to_string());
    let mut lines = text.lines();
    let mut field = |name: &str| -> Result<Vec<String>, IcpError> {
        let line = lines.next().ok_or_else(|| bad(&format!("missing {name}")))?;
        let mut parts = line.split_whitespace();
        if parts.next() != Some(name) {
            return Err(bad(&format!("expected {name}, got {line:?}")));
        }
        Ok(parts.map(str::to_string).collect())
    };
    let reals = |v: Vec<String>, n: usize, name: &str| -> Result<Vec<f64>, IcpError> {
        let out: Vec<f64> = v.iter().map(|s| s.parse::<f64>()).collect::<Result<_, _>>().map_err(|_| bad(name))?;
        if out.len() != n {
            return Err(bad(&format!("{name} needs {n} values")));
        }
        Ok(out)
    };
    let rot = reals(field("rotation")?, 9, "rotation")?;
    let tr = reals(field("translation")?, 3, "translation")?;
    let prescale = reals(field("prescale")?, 1, "prescale")?[0];
    let pv = reals(field("pivot")?, 3, "pivot")?;
    let error = reals(field("error")?, 1, "error")?[0];
    let iterations = field("iterations")?
        .first()
        .and_then(|s| s.parse().ok())
        .ok_or_else(|| bad("iterations"))?;
    let converged = field("converged")?
        .first()
        .and_then(|s| s.parse().ok())
        .ok_or_else(|| bad("converged"))?;
    let transform = RigidTransform::new(Matrix3::from_row_slice(&rot), Vec3::new(tr[0], tr[1], tr[2]))?;
    Ok(IcpRecord {
        transform,
        prescale,
        pivot: Vec3::new(pv[0], pv[1], pv[2]),
        error,
        iterations,
        converged,
    })
}

/// Point set standing in for a mesh during alignment: its vertices when
/// there are at least 1000, otherwise the vertices topped up to 2000 with
/// seeded area-weighted surface samples.
pub fn model_points_for_icp(mesh: &TriangleMesh, seed: u64) -> Result<PointCloud, IcpError> {
    const DENSE: usize = 1000;
    const TARGET: usize = 2000;
    if mesh.vertices.len() >= DENSE {
        return Ok(PointCloud::new(mesh.vertices.clone()));
    }
    let extra = sample_surface(mesh, TARGET - mesh.vertices.len(), seed)?;
    let mut points = mesh.vertices.clone();
    points.extend(extra.points);
    Ok(PointCloud::new(points))
}

/// Aligns `model_pts` to `cloud`.
///
/// The model is first scaled about its centroid by the bounding-box ratio,
/// then moved so the centroids coincide. Control points are drawn once. Each
/// iteration pairs controls with their nearest transformed model points,
/// records the RMS distance, and stops once it changes by less than `tol`;
/// otherwise a rigid fit of the pairs is composed onto the transform and,
/// with `refine_scale`, the scale is corrected by a least-squares fit of the
/// same pairs. Neither step can raise the residual, so the recorded errors
/// never increase. The returned transform and scale are the ones the final
/// error was measured with.
pub fn icp(model_pts: &PointCloud, cloud: &PointCloud, params: &IcpParams) -> Result<IcpResult, IcpError> {
    params.validate()?;
    if model_pts.is_empty() || cloud.is_empty() {
        return Err(IcpError::Empty);
    }
    let mut prescale = prescale_model(model_pts, cloud)?;
    let pivot = centroid(&model_pts.points).expect("non-empty");
    let controls = select_control_points(cloud, params.n_control, params.seed)?;
    let mut transform = RigidTransform::from_translation(centroid(&cloud.points).expect("non-empty") - pivot);

    let mut history: Vec<f64> = Vec::new();
    let mut converged = false;
    for i in 1..=params.max_iters {
        let moved: Vec<Vec3> = model_pts
            .points
            .iter()
            .map(|p| transform.apply_point(&(pivot + (p - pivot) * prescale)))
            .collect();
        let tree = KdTree::new(&moved);
        let pairs = pairs_with_tree(&controls.points, &moved, &tree);
        let error = pairs.rms();
        let previous = history.last().copied();
        history.push(error);
        if previous.is_some_and(|e| (error - e).abs() < params.tol) {
            converged = true;
            break;
        }
        if i == params.max_iters {
            break;
        }
        let source: Vec<Vec3> = pairs.pairs.iter().map(|p| p.model).collect();
        let step = match rigid_fit(&source, &controls.points) {
            Ok(t) => t,
            Err(IcpError::DegenerateFit | IcpError::TooFewPairs(_)) => break,
            Err(e) => return Err(e),
        };
        transform = step.compose(&transform);
        if !params.refine_scale {
            continue;
        }
        let fitted: Vec<Vec3> = source.iter().map(|p| step.apply_point(p)).collect();
        if let Some((s, m_bar, c_bar)) = scale_fit(&fitted, &controls.points) {
            // s (R (pivot + k (x - pivot)) + t - m̄) + c̄ = R (pivot + s k (x - pivot)) + t'
            let r = transform.rotation;
            let t = (r * pivot) * (s - 1.0) + transform.translation * s - m_bar * s + c_bar;
            transform = RigidTransform::new(r, t)?;
            prescale *= s;
        }
    }
    Ok(IcpResult {
        transform,
        error: *history.last().expect("at least one iteration"),
        iterations: history.len(),
        converged,
        prescale,
        pivot,
        history,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use nalgebra::{Rotation3, Unit};
    use rand::{Rng, SeedableRng};
    use rand_distr::{Distribution, Normal};

    fn random_rotation(rng: &mut ChaCha8Rng, max_angle: f64) -> Matrix3<f64> {
        let axis = Unit::new_normalize(Vec3::new(
            rng.random_range(-1.0..1.0),
            rng.random_range(-1.0..1.0),
            rng.random_range(-1.0..1.0),
        ));
        Rotation3::from_axis_angle(&axis, rng.random_range(0.0..max_angle)).into_inner()
    }

    fn random_points(rng: &mut ChaCha8Rng, n: usize) -> Vec<Vec3> {
        (0..n)
            .map(|_| Vec3::new(rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0)))
            .collect()
    }

    fn ssr(t: &RigidTransform, src: &[Vec3], dst: &[Vec3]) -> f64 {
        src.iter().zip(dst).map(|(p, q)| (t.apply_point(p) - q).norm_squared()).sum()
    }

    #[test]
    fn control_selection() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let small = PointCloud::new(random_points(&mut rng, 500));
        assert_eq!(select_control_points(&small, 2000, 3).unwrap(), small);
        let big = PointCloud::new(random_points(&mut rng, 10_000));
        let a = select_control_points(&big, 2000, 3).unwrap();
        assert_eq!(a.len(), 2000);
        let distinct: std::collections::HashSet<_> =
            a.points.iter().map(|p| (p.x.to_bits(), p.y.to_bits(), p.z.to_bits())).collect();
        assert_eq!(distinct.len(), 2000);
        assert_eq!(a, select_control_points(&big, 2000, 3).unwrap());
        assert_eq!(select_control_points(&PointCloud::default(), 5, 0).unwrap_err(), IcpError::Empty);
    }

    #[test]
    fn pairs_against_linear_scan() {
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let controls = PointCloud::new(random_points(&mut rng, 200));
        let model = PointCloud::new(random_points(&mut rng, 300));
        let set = nearest_neighbor_pairs(&controls, &model).unwrap();
        for (c, pair) in controls.points.iter().zip(&set.pairs) {
            let (j, d2) = nearest_linear(&model.points, c).unwrap();
            assert_eq!(pair.model_index, j);
            assert!((pair.distance - d2.sqrt()).abs() < 1e-9);
            assert!((pair.distance - (pair.control - pair.model).norm()).abs() < 1e-9);
        }
        let same = nearest_neighbor_pairs(&controls, &controls).unwrap();
        assert!(same.pairs.iter().enumerate().all(|(i, p)| p.model_index == i && p.distance == 0.0));
        let one = PointCloud::new(vec![Vec3::new(0.3, 0.1, 0.0)]);
        assert!(nearest_neighbor_pairs(&controls, &one).unwrap().pairs.iter().all(|p| p.model_index == 0));
        assert_eq!(nearest_neighbor_pairs(&PointCloud::default(), &one).unwrap_err(), IcpError::Empty);
    }

    #[test]
    fn fit_identity_and_known_motion() {
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        let src = random_points(&mut rng, 30);
        let id = rigid_fit(&src, &src).unwrap();
        assert!((id.rotation - Matrix3::identity()).norm() < 1e-12);
        assert!(id.translation.norm() < 1e-12);
        for _ in 0..50 {
            let r0 = random_rotation(&mut rng, std::f64::consts::PI);
            let t0 = Vec3::new(rng.random_range(-2.0..2.0), rng.random(), rng.random());
            let dst: Vec<Vec3> = src.iter().map(|p| r0 * p + t0).collect();
            let fit = rigid_fit(&src, &dst).unwrap();
            assert!((fit.rotation - r0).norm() < 1e-9);
            assert!((fit.translation - t0).norm() < 1e-9);
        }
    }

    #[test]
    fn noisy_fit_beats_random_transforms() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let noise = Normal::new(0.0, 0.05).unwrap();
        let src = random_points(&mut rng, 40);
        let r0 = random_rotation(&mut rng, 1.0);
        let dst: Vec<Vec3> = src
            .iter()
            .map(|p| r0 * p + Vec3::new(noise.sample(&mut rng), noise.sample(&mut rng), noise.sample(&mut rng)))
            .collect();
        let fit = rigid_fit(&src, &dst).unwrap();
        let best = ssr(&fit, &src, &dst);
        for _ in 0..1000 {
            // Perturb around the optimum so the competitors are close calls.
            let dr = random_rotation(&mut rng, 0.05);
            let dt = Vec3::new(noise.sample(&mut rng), noise.sample(&mut rng), noise.sample(&mut rng)) * 0.1;
            let other = RigidTransform::new(dr * fit.rotation, fit.translation + dt).unwrap();
            assert!(best <= ssr(&other, &src, &dst));
        }
    }

    #[test]
    fn planar_points_never_reflect() {
        let mut rng = ChaCha8Rng::seed_from_u64(6);
        for _ in 0..100 {
            let src: Vec<Vec3> = (0..10).map(|_| Vec3::new(rng.random(), rng.random(), 0.0)).collect();
            // Mirror image through the plane's normal is the same planar set.
            let r0 = random_rotation(&mut rng, 3.0);
            let dst: Vec<Vec3> = src.iter().map(|p| r0 * Vec3::new(p.x, -p.y, 0.0)).collect();
            let fit = rigid_fit(&src, &dst).unwrap();
            assert!((fit.rotation.determinant() - 1.0).abs() < 1e-9);
        }
    }

    #[test]
    fn fit_errors() {
        let line: Vec<Vec3> = (0..5).map(|i| Vec3::new(i as f64, 2.0 * i as f64, 0.0)).collect();
        assert_eq!(rigid_fit(&line, &line).unwrap_err(), IcpError::DegenerateFit);
        assert_eq!(rigid_fit(&line[..2], &line[..2]).unwrap_err(), IcpError::TooFewPairs(2));
    }

    #[test]
    fn prescale_ratio() {
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        let cloud = PointCloud::new(random_points(&mut rng, 50));
        assert_eq!(prescale_model(&cloud, &cloud).unwrap(), 1.0);
        let doubled = PointCloud::new(cloud.points.iter().map(|p| p * 2.0).collect());
        let s = prescale_model(&doubled, &cloud).unwrap();
        assert!((s - 0.5).abs() < 1e-12);
        let pivot = doubled.centroid().unwrap();
        let scaled = scale_about(&doubled.points, &pivot, s);
        let diag = |p: &[Vec3]| Aabb::from_points(p).unwrap().diagonal();
        assert!((diag(&scaled) - diag(&cloud.points)).abs() < 1e-9);
        let flat = PointCloud::new(vec![Vec3::zeros(); 4]);
        assert_eq!(prescale_model(&flat, &cloud).unwrap_err(), IcpError::ZeroExtent);
    }

    fn blob(rng: &mut ChaCha8Rng, n: usize) -> Vec<Vec3> {
        // Anisotropic, asymmetric cluster so the pose is well determined.
        (0..n)
            .map(|_| {
                let p = Vec3::new(rng.random_range(-0.4..0.4), rng.random_range(-0.2..0.2), rng.random_range(-0.1..0.1));
                p + Vec3::new(0.0, p.x * p.x, 0.3 * p.x * p.y)
            })
            .collect()
    }

    #[test]
    fn self_alignment_converges_immediately() {
        let mut rng = ChaCha8Rng::seed_from_u64(8);
        let pts = PointCloud::new(blob(&mut rng, 800));
        let res = icp(&pts, &pts, &IcpParams::default()).unwrap();
        assert!(res.error < 1e-9);
        assert!(res.converged && res.iterations <= 2);
        assert!((res.prescale - 1.0).abs() < 1e-12);
    }

    #[test]
    fn recovers_a_small_motion_with_monotone_error() {
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        let model = blob(&mut rng, 3000);
        let r0 = Rotation3::from_axis_angle(&Vec3::z_axis(), 0.3).into_inner();
        let t0 = Vec3::new(0.1, -0.05, 0.02);
        let cloud: Vec<Vec3> = model.iter().take(400).map(|p| r0 * p + t0).collect();
        let res = icp(&PointCloud::new(model.clone()), &PointCloud::new(cloud), &IcpParams::default()).unwrap();
        assert!(res.error < 1e-6, "error {}", res.error);
        assert!((res.transform.rotation - r0).norm() < 1e-4);
        assert!((res.transform.translation - t0).norm() < 1e-4);
        assert!(res.history.windows(2).all(|w| w[1] <= w[0] + 1e-12));
        assert!(res.iterations <= 50);
        // Determinism.
        let again = icp(
            &PointCloud::new(model.clone()),
            &PointCloud::new(model.iter().take(400).map(|p| r0 * p + t0).collect()),
            &IcpParams::default(),
        )
        .unwrap();
        assert_eq!(again, res);
        assert_eq!(again.to_record(), res.to_record());
    }

    #[test]
    fn large_scale_gap_is_prescaled() {
        let mut rng = ChaCha8Rng::seed_from_u64(10);
        let model: Vec<Vec3> = blob(&mut rng, 2000).iter().map(|p| p * 3.0).collect();
        let cloud: Vec<Vec3> = model.iter().take(300).map(|p| p / 3.0 + Vec3::new(0.05, 0.0, 0.0)).collect();
        let res = icp(&PointCloud::new(model.clone()), &PointCloud::new(cloud.clone()), &IcpParams::default()).unwrap();
        assert!(res.prescale < 0.5 && res.prescale > 0.25);
        let mapped = res.model_to_cloud(&model[0]);
        assert!((mapped - cloud[0]).norm() < 0.05);
    }

    #[test]
    fn rigidity_and_record_round_trip() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        let model = blob(&mut rng, 1500);
        let r0 = random_rotation(&mut rng, 0.4);
        let cloud: Vec<Vec3> = model.iter().step_by(5).map(|p| r0 * p).collect();
        let res = icp(&PointCloud::new(model.clone()), &PointCloud::new(cloud), &IcpParams::default()).unwrap();
        assert!((res.transform.rotation.determinant() - 1.0).abs() < 1e-9);
        for k in 0..100 {
            let (a, b) = (model[k], model[k + 700]);
            let (ta, tb) = (res.transform.apply_point(&a), res.transform.apply_point(&b));
            assert!(((ta - tb).norm() - (a - b).norm()).abs() < 1e-9);
        }
        let text = res.to_record();
        assert_eq!(text.lines().count(), 7);
        let rec = parse_icp_record(&text).unwrap();
        assert_eq!(rec.transform, res.transform);
        assert_eq!(rec.error, res.error);
        assert_eq!((rec.iterations, rec.converged, rec.prescale), (res.iterations, res.converged, res.prescale));
        assert_eq!(rec.pivot, res.pivot);
        assert!(parse_icp_record("rotation 1 2\n").is_err());
    }

    #[test]
    fn small_meshes_are_topped_up() {
        let mesh = TriangleMesh::new(
            vec![Vec3::zeros(), Vec3::x(), Vec3::y(), Vec3::z()],
            vec![[0, 1, 2], [0, 1, 3], [0, 2, 3], [1, 2, 3]],
        )
        .unwrap();
        let pts = model_points_for_icp(&mesh, 1).unwrap();
        assert_eq!(pts.len(), 2000);
        assert_eq!(&pts.points[..4], &mesh.vertices[..]);
        assert_eq!(pts, model_points_for_icp(&mesh, 1).unwrap());
    }

    #[test]
    fn params_are_validated() {
        let pts = PointCloud::new(vec![Vec3::zeros(), Vec3::x(), Vec3::y()]);
        for p in [
            IcpParams { n_control: 2, ..Default::default() },
            IcpParams { max_iters: 0, ..Default::default() },
            IcpParams { tol: 0.0, ..Default::default() },
        ] {
            assert!(matches!(icp(&pts, &pts, &p), Err(IcpError::InvalidParams(_))));
        }
    }
}
