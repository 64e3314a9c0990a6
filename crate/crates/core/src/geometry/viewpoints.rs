use std::f64::consts::PI;

use super::{GeometryError, Vec3};

/// A unit view direction; the camera sits along `direction` and looks back at the origin.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Viewpoint {
    pub index: usize,
    pub direction: Vec3,
}

impl Viewpoint {
    /// Normalizes `direction`; `None` for zero or non-finite input.
    pub fn from_direction(index: usize, direction: Vec3) -> Option<Viewpoint> {
        let norm = direction.norm();
        if !(norm.is_finite() && norm > 1e-12) {
            return None;
        }
        Some(Viewpoint {
            index,
            direction: direction / norm,
        })
    }

    pub fn negated(&self) -> Viewpoint {
        Viewpoint {
            index: self.index,
            direction: -self.direction,
        }
    }
}

/// `n` directions on the spherical Fibonacci lattice, pole to pole.
///
/// Heights are evenly spaced in `[-1, 1]` and azimuths advance by the golden
/// angle, so the set is deterministic and close to uniform for any `n`.
pub fn fibonacci_viewpoints(n: usize) -> Result<Vec<Viewpoint>, GeometryError> {
    if n == 0 {
        return Err(GeometryError::ZeroViewpoints);
    }
    if n == 1 {
        return Ok(vec![Viewpoint {
            index: 0,
            direction: Vec3::z(),
        }]);
    }
    let golden_angle = PI * (3.0 - 5f64.sqrt());
    Ok((0..n)
        .map(|i| {
            let z = 1.0 - 2.0 * i as f64 / (n - 1) as f64;
            let r = (1.0 - z * z).max(0.0).sqrt();
            let phi = golden_angle * i as f64;
            let d = Vec3::new(r * phi.cos(), r * phi.sin(), z);
            Viewpoint {
                index: i,
                direction: d / d.norm(),
            }
        })
        .collect())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn lattice_of_102_is_unit_and_spread() {
        let views = fibonacci_viewpoints(102).unwrap();
        assert_eq!(views.len(), 102);
        for (i, v) in views.iter().enumerate() {
            assert_eq!(v.index, i);
            assert!((v.direction.norm() - 1.0).abs() < 1e-9);
        }
        // Brute force over all pairs.
        let mut min_angle = f64::INFINITY;
        for i in 0..views.len() {
            for j in 0..i {
                let cos = views[i].direction.dot(&views[j].direction).clamp(-1.0, 1.0);
                min_angle = min_angle.min(cos.acos().to_degrees());
            }
        }
        assert!(min_angle > 10.0, "min separation {min_angle}°");
    }

    #[test]
    fn single_view_is_the_pole() {
        let views = fibonacci_viewpoints(1).unwrap();
        assert_eq!(views.len(), 1);
        assert_eq!(views[0].direction, Vec3::z());
    }

    #[test]
    fn zero_views_is_an_error() {
        assert_eq!(fibonacci_viewpoints(0).unwrap_err(), GeometryError::ZeroViewpoints);
    }

    #[test]
    fn coverage_is_balanced() {
        for n in [50, 64, 102, 257, 1000] {
            let views = fibonacci_viewpoints(n).unwrap();
            let mean = views.iter().fold(Vec3::zeros(), |acc, v| acc + v.direction) / n as f64;
            assert!(mean.norm() < 0.05, "n={n}: centroid norm {}", mean.norm());
        }
    }

    #[test]
    fn deterministic() {
        assert_eq!(fibonacci_viewpoints(102).unwrap(), fibonacci_viewpoints(102).unwrap());
    }

    #[test]
    fn from_direction_rejects_zero() {
        assert!(Viewpoint::from_direction(0, Vec3::zeros()).is_none());
        let v = Viewpoint::from_direction(3, Vec3::new(0.0, 3.0, 4.0)).unwrap();
        assert!((v.direction - Vec3::new(0.0, 0.6, 0.8)).norm() < 1e-15);
    }
}
