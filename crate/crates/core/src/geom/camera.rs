//! Unified (Mei) omnidirectional projection with plumb-bob distortion.

use nalgebra::{Matrix2, Matrix2x3, Matrix3, Vector2, Vector3};
use serde::{Deserialize, Serialize};

use super::{GeomError, GeomResult};

/// Unified projection model: a point is normalized onto the unit sphere,
/// shifted by the mirror parameter `xi` along +z, perspective-divided,
/// distorted with Brown's plumb-bob model and finally mapped to pixels with
/// generalized focal lengths. `xi = 0` with zero distortion reduces to an
/// ideal pinhole. We fix the Mei convention in which `gamma` already folds
/// the mirror geometry into the focal length.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CameraModel {
    pub xi: f64,
    pub gamma1: f64,
    pub gamma2: f64,
    pub u0: f64,
    pub v0: f64,
    pub k1: f64,
    pub k2: f64,
    pub k3: f64,
    pub p1: f64,
    pub p2: f64,
    pub width: u32,
    pub height: u32,
}

const NEWTON_ITERS: usize = 50;
const NEWTON_TOL: f64 = 1e-10;
const MIN_SHIFTED_Z: f64 = 1e-9;

impl CameraModel {
    /// Distortion-free model, pinhole when `xi = 0`.
    pub fn ideal(xi: f64, gamma: f64, u0: f64, v0: f64, width: u32, height: u32) -> Self {
        Self {
            xi,
            gamma1: gamma,
            gamma2: gamma,
            u0,
            v0,
            k1: 0.0,
            k2: 0.0,
            k3: 0.0,
            p1: 0.0,
            p2: 0.0,
            width,
            height,
        }
    }

    /// Projects a camera-frame point to a pixel. The result may fall outside
    /// the image bounds; the caller decides whether that matters.
    pub fn project(&self, point: &Vector3<f64>) -> GeomResult<Vector2<f64>> {
        let norm = point.norm();
        if norm < 1e-300 {
            return Err(GeomError::BehindProjectionPoint);
        }
        let zs = point[2] / norm + self.xi;
        if zs <= MIN_SHIFTED_Z {
            return Err(GeomError::BehindProjectionPoint);
        }
        let x = point[0] / norm / zs;
        let y = point[1] / norm / zs;
        let (xd, yd) = self.distort(x, y);
        Ok(Vector2::new(
            self.gamma1 * xd + self.u0,
            self.gamma2 * yd + self.v0,
        ))
    }

    /// Projection together with its 2x3 Jacobian w.r.t. the camera-frame point.
    pub fn project_with_jacobian(
        &self,
        point: &Vector3<f64>,
    ) -> GeomResult<(Vector2<f64>, Matrix2x3<f64>)> {
        let norm = point.norm();
        if norm < 1e-300 {
            return Err(GeomError::BehindProjectionPoint);
        }
        let s = *point / norm;
        let zs = s[2] + self.xi;
        if zs <= MIN_SHIFTED_Z {
            return Err(GeomError::BehindProjectionPoint);
        }
        // d(s)/d(point) = (I - s sᵀ) / norm
        let j_sphere = (Matrix3::identity() - s * s.transpose()) / norm;
        // m = (s.x/zs, s.y/zs)
        let x = s[0] / zs;
        let y = s[1] / zs;
        let j_div = Matrix2x3::new(
            1.0 / zs,
            0.0,
            -s[0] / (zs * zs),
            0.0,
            1.0 / zs,
            -s[1] / (zs * zs),
        );
        let (xd, yd) = self.distort(x, y);
        let j_dist = self.distort_jacobian(x, y);
        let j_affine = Matrix2::new(self.gamma1, 0.0, 0.0, self.gamma2);
        let pixel = Vector2::new(self.gamma1 * xd + self.u0, self.gamma2 * yd + self.v0);
        Ok((pixel, j_affine * j_dist * j_div * j_sphere))
    }

    /// Back-projects a pixel to a unit ray in the camera frame.
    ///
    /// The distortion is inverted with a damped Newton iteration on the
    /// normalized plane; the mirror shift is undone with the closed-form
    /// sphere intersection.
    pub fn unproject(&self, pixel: &Vector2<f64>) -> GeomResult<Vector3<f64>> {
        let mx = (pixel[0] - self.u0) / self.gamma1;
        let my = (pixel[1] - self.v0) / self.gamma2;
        let (x, y) = self.undistort(mx, my)?;
        let r2 = x * x + y * y;
        let disc = 1.0 + (1.0 - self.xi * self.xi) * r2;
        if disc < 0.0 {
            return Err(GeomError::OutsideValidCone);
        }
        let factor = (self.xi + disc.sqrt()) / (1.0 + r2);
        let ray = Vector3::new(factor * x, factor * y, factor - self.xi);
        Ok(ray.normalize())
    }

    /// True when the pixel lies inside the image rectangle.
    pub fn in_bounds(&self, pixel: &Vector2<f64>) -> bool {
        pixel[0] >= 0.0
            && pixel[1] >= 0.0
            && pixel[0] <= (self.width - 1) as f64
            && pixel[1] <= (self.height - 1) as f64
    }

    /// Model for a pyramid level downscaled by `2^level`.
    pub fn scaled(&self, level: u32) -> CameraModel {
        let s = 1.0 / f64::from(1u32 << level);
        CameraModel {
            gamma1: self.gamma1 * s,
            gamma2: self.gamma2 * s,
            u0: self.u0 * s,
            v0: self.v0 * s,
            width: (self.width >> level).max(1),
            height: (self.height >> level).max(1),
            ..*self
        }
    }

    /// Plumb-bob distortion on the normalized plane.
    pub fn distort(&self, x: f64, y: f64) -> (f64, f64) {
        let r2 = x * x + y * y;
        let radial = 1.0 + r2 * (self.k1 + r2 * (self.k2 + r2 * self.k3));
        let xd = x * radial + 2.0 * self.p1 * x * y + self.p2 * (r2 + 2.0 * x * x);
        let yd = y * radial + self.p1 * (r2 + 2.0 * y * y) + 2.0 * self.p2 * x * y;
        (xd, yd)
    }

    fn distort_jacobian(&self, x: f64, y: f64) -> Matrix2<f64> {
        let r2 = x * x + y * y;
        let radial = 1.0 + r2 * (self.k1 + r2 * (self.k2 + r2 * self.k3));
        let dradial_dr2 = self.k1 + 2.0 * self.k2 * r2 + 3.0 * self.k3 * r2 * r2;
        let dxx = radial + x * dradial_dr2 * 2.0 * x + 2.0 * self.p1 * y + 6.0 * self.p2 * x;
        let dxy = x * dradial_dr2 * 2.0 * y + 2.0 * self.p1 * x + 2.0 * self.p2 * y;
        let dyx = y * dradial_dr2 * 2.0 * x + 2.0 * self.p1 * x + 2.0 * self.p2 * y;
        let dyy = radial + y * dradial_dr2 * 2.0 * y + 6.0 * self.p1 * y + 2.0 * self.p2 * x;
        Matrix2::new(dxx, dxy, dyx, dyy)
    }

    fn undistort(&self, mx: f64, my: f64) -> GeomResult<(f64, f64)> {
        if self.k1 == 0.0 && self.k2 == 0.0 && self.k3 == 0.0 && self.p1 == 0.0 && self.p2 == 0.0 {
            return Ok((mx, my));
        }
        let target = Vector2::new(mx, my);
        let mut p = target;
        let mut err = {
            let (dx, dy) = self.distort(p[0], p[1]);
            (Vector2::new(dx, dy) - target).norm_squared()
        };
        for _ in 0..NEWTON_ITERS {
            let (dx, dy) = self.distort(p[0], p[1]);
            let residual = Vector2::new(dx, dy) - target;
            if residual.norm() < NEWTON_TOL {
                return Ok((p[0], p[1]));
            }
            let jac = self.distort_jacobian(p[0], p[1]);
            let step = match jac.try_inverse() {
                Some(inv) => inv * residual,
                None => return Err(GeomError::DistortionInversionDiverged(NEWTON_ITERS)),
            };
            // Damping: halve the step until the residual shrinks.
            let mut alpha = 1.0;
            let mut accepted = false;
            for _ in 0..8 {
                let cand = p - step * alpha;
                let (cx, cy) = self.distort(cand[0], cand[1]);
                let cand_err = (Vector2::new(cx, cy) - target).norm_squared();
                if cand_err < err {
                    p = cand;
                    err = cand_err;
                    accepted = true;
                    break;
                }
                alpha *= 0.5;
            }
            if !accepted {
                return Err(GeomError::DistortionInversionDiverged(NEWTON_ITERS));
            }
        }
        let (dx, dy) = self.distort(p[0], p[1]);
        if (Vector2::new(dx, dy) - target).norm() < NEWTON_TOL {
            Ok((p[0], p[1]))
        } else {
            Err(GeomError::DistortionInversionDiverged(NEWTON_ITERS))
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;
    use rand::{Rng, SeedableRng};

    fn fisheye() -> CameraModel {
        CameraModel {
            xi: 0.9,
            gamma1: 420.0,
            gamma2: 415.0,
            u0: 512.0,
            v0: 510.0,
            k1: -0.1,
            k2: 0.01,
            k3: 0.0,
            p1: 0.0005,
            p2: -0.0003,
            width: 1024,
            height: 1024,
        }
    }

    #[test]
    fn optical_axis_hits_principal_point() {
        let cam = CameraModel::ideal(0.0, 500.0, 320.0, 240.0, 640, 480);
        let px = cam.project(&Vector3::new(0.0, 0.0, 1.0)).unwrap();
        assert_relative_eq!(px[0], 320.0, epsilon = 1e-12);
        assert_relative_eq!(px[1], 240.0, epsilon = 1e-12);

        let cam = CameraModel::ideal(1.0, 400.0, 512.0, 512.0, 1024, 1024);
        let px = cam.project(&Vector3::new(0.0, 0.0, 1.0)).unwrap();
        assert_relative_eq!(px[0], 512.0, epsilon = 1e-12);
        assert_relative_eq!(px[1], 512.0, epsilon = 1e-12);
    }

    /// Independent straight-line transcription of the Mei/Brown composition:
    /// sphere normalization, xi shift, perspective divide, plumb bob, affine.
    fn project_reference(cam: &CameraModel, p: &Vector3<f64>) -> Vector2<f64> {
        let n = (p[0] * p[0] + p[1] * p[1] + p[2] * p[2]).sqrt();
        let (sx, sy, sz) = (p[0] / n, p[1] / n, p[2] / n);
        let x = sx / (sz + cam.xi);
        let y = sy / (sz + cam.xi);
        let r2 = x * x + y * y;
        let rad = 1.0 + cam.k1 * r2 + cam.k2 * r2 * r2 + cam.k3 * r2 * r2 * r2;
        let xd = x * rad + 2.0 * cam.p1 * x * y + cam.p2 * (r2 + 2.0 * x * x);
        let yd = y * rad + cam.p1 * (r2 + 2.0 * y * y) + 2.0 * cam.p2 * x * y;
        Vector2::new(cam.gamma1 * xd + cam.u0, cam.gamma2 * yd + cam.v0)
    }

    #[test]
    fn matches_reference_composition_off_axis() {
        let cam = fisheye();
        let p = Vector3::new(0.4, -0.7, 1.3);
        let got = cam.project(&p).unwrap();
        let want = project_reference(&cam, &p);
        assert!((got - want).norm() < 1e-9, "{got:?} vs {want:?}");
    }

    #[test]
    fn behind_cone_is_rejected() {
        let cam = CameraModel::ideal(0.0, 500.0, 320.0, 240.0, 640, 480);
        assert_eq!(
            cam.project(&Vector3::new(0.0, 0.0, -1.0)),
            Err(GeomError::BehindProjectionPoint)
        );
        // xi = 1 accepts points slightly past 90 degrees off-axis.
        let wide = CameraModel::ideal(1.0, 100.0, 512.0, 512.0, 1024, 1024);
        assert!(wide.project(&Vector3::new(1.0, 0.0, -0.2)).is_ok());
    }

    #[test]
    fn principal_point_unprojects_to_axis() {
        let cam = fisheye();
        let ray = cam.unproject(&Vector2::new(cam.u0, cam.v0)).unwrap();
        assert!((ray - Vector3::new(0.0, 0.0, 1.0)).norm() < 1e-12);
    }

    #[test]
    fn unproject_project_round_trip_random_rays() {
        let cam = fisheye();
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(11);
        let mut tested = 0;
        while tested < 1000 {
            let dir = Vector3::new(
                rng.gen::<f64>() * 2.0 - 1.0,
                rng.gen::<f64>() * 2.0 - 1.0,
                rng.gen::<f64>(),
            );
            if dir.norm() < 1e-3 {
                continue;
            }
            let dir = dir.normalize();
            let Ok(px) = cam.project(&dir) else { continue };
            if !cam.in_bounds(&px) {
                continue;
            }
            let ray = cam.unproject(&px).unwrap();
            let angle = ray.cross(&dir).norm().atan2(ray.dot(&dir));
            assert!(angle < 1e-8, "angular error {angle}");
            tested += 1;
        }
    }

    #[test]
    fn project_unproject_round_trip_on_pixels() {
        let cam = fisheye();
        for v in (50..1000).step_by(97) {
            for u in (50..1000).step_by(89) {
                let px = Vector2::new(u as f64, v as f64);
                let Ok(ray) = cam.unproject(&px) else { continue };
                let back = cam.project(&(ray * 3.7)).unwrap();
                assert!((back - px).norm() < 1e-6, "{px:?} -> {back:?}");
            }
        }
    }

    #[test]
    fn wide_field_angle_preserved() {
        // xi = 1, no distortion: a pixel at 85 degrees field angle maps back
        // to a ray at 85 degrees from the optical axis.
        let cam = CameraModel::ideal(1.0, 60.0, 512.0, 512.0, 1024, 1024);
        let theta: f64 = 85f64.to_radians();
        let dir = Vector3::new(theta.sin(), 0.0, theta.cos());
        let px = cam.project(&dir).unwrap();
        let ray = cam.unproject(&px).unwrap();
        let angle = ray[2].acos();
        assert_relative_eq!(angle, theta, epsilon = 1e-6);
    }

    #[test]
    fn xi_zero_reduces_to_pinhole() {
        let cam = CameraModel::ideal(0.0, 500.0, 320.0, 240.0, 640, 480);
        let p = Vector3::new(0.3, -0.2, 2.0);
        let px = cam.project(&p).unwrap();
        assert_relative_eq!(px[0], 500.0 * p[0] / p[2] + 320.0, epsilon = 1e-12);
        assert_relative_eq!(px[1], 500.0 * p[1] / p[2] + 240.0, epsilon = 1e-12);
    }

    #[test]
    fn projection_jacobian_matches_finite_differences() {
        let cam = fisheye();
        let p = Vector3::new(0.3, -0.5, 1.1);
        let (_, jac) = cam.project_with_jacobian(&p).unwrap();
        let eps = 1e-7;
        for axis in 0..3 {
            let mut dp = p;
            dp[axis] += eps;
            let hi = cam.project(&dp).unwrap();
            let mut dm = p;
            dm[axis] -= eps;
            let lo = cam.project(&dm).unwrap();
            let num = (hi - lo) / (2.0 * eps);
            assert!((num[0] - jac[(0, axis)]).abs() < 1e-4);
            assert!((num[1] - jac[(1, axis)]).abs() < 1e-4);
        }
    }

    #[test]
    fn scaled_model_halves_pixels() {
        let cam = fisheye();
        let half = cam.scaled(1);
        let p = Vector3::new(0.2, 0.1, 1.0);
        let a = cam.project(&p).unwrap();
        let b = half.project(&p).unwrap();
        assert!((a * 0.5 - b).norm() < 1e-12);
    }
}
