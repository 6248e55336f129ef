//! Infinite oriented planes `{ x : normal · x = distance }`.

use nalgebra::Vector3;

/// Plane with unit normal; `distance` is the signed offset along the normal.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Plane3 {
    normal: Vector3<f64>,
    distance: f64,
}

impl Plane3 {
    /// Normalizes the given normal; `distance` is rescaled accordingly.
    pub fn new(normal: Vector3<f64>, distance: f64) -> Self {
        let n = normal.norm();
        assert!(n > 1e-12, "plane normal must be nonzero");
        Self {
            normal: normal / n,
            distance: distance / n,
        }
    }

    /// Plane through three points; normal follows the right-hand rule.
    pub fn from_points(a: &Vector3<f64>, b: &Vector3<f64>, c: &Vector3<f64>) -> Option<Self> {
        let n = (b - a).cross(&(c - a));
        if n.norm() < 1e-12 {
            return None;
        }
        let n = n.normalize();
        Some(Self {
            normal: n,
            distance: n.dot(a),
        })
    }

    pub fn normal(&self) -> Vector3<f64> {
        self.normal
    }

    pub fn distance(&self) -> f64 {
        self.distance
    }

    pub fn signed_distance(&self, p: &Vector3<f64>) -> f64 {
        self.normal.dot(p) - self.distance
    }

    /// Same plane with the normal flipped toward the given point
    /// (so the point sees the front side).
    pub fn oriented_toward(&self, p: &Vector3<f64>) -> Plane3 {
        if self.signed_distance(p) < 0.0 {
            Plane3 {
                normal: -self.normal,
                distance: -self.distance,
            }
        } else {
            *self
        }
    }

    /// Same plane normalized so that `distance >= 0`.
    pub fn with_nonnegative_distance(&self) -> Plane3 {
        if self.distance < 0.0 {
            Plane3 {
                normal: -self.normal,
                distance: -self.distance,
            }
        } else {
            *self
        }
    }
}
