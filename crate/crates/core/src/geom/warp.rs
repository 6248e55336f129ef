//! Plane-induced warping between fisheye views.

use nalgebra::Vector2;

use super::{CameraModel, GeomError, GeomResult, Plane3, RigidPose};

/// Warps a pixel of the reference camera into another camera under the
/// hypothesis that the observed surface lies on `plane` (expressed in the
/// reference camera frame).
///
/// Implemented as ray-plane intersection followed by reprojection instead of
/// an explicit homography matrix, which keeps it exact on fisheye images with
/// no undistortion step. `relative_pose` maps reference-camera coordinates
/// into the other camera's frame.
pub fn warp_via_plane(
    ref_cam: &CameraModel,
    ref_pixel: &Vector2<f64>,
    plane: &Plane3,
    relative_pose: &RigidPose,
    other_cam: &CameraModel,
) -> GeomResult<Vector2<f64>> {
    let ray = ref_cam.unproject(ref_pixel)?;
    let plane = plane.with_nonnegative_distance();
    let denom = plane.normal().dot(&ray);
    if denom <= 1e-9 {
        return Err(GeomError::NoIntersection);
    }
    let depth = plane.distance() / denom;
    if depth <= 0.0 {
        return Err(GeomError::NoIntersection);
    }
    let point_ref = ray * depth;
    let point_other = relative_pose.transform_point(&point_ref);
    other_cam.project(&point_other)
}

#[cfg(test)]
mod tests {
    use super::*;
    use nalgebra::Vector3;

    fn cam() -> CameraModel {
        CameraModel {
            xi: 0.8,
            gamma1: 350.0,
            gamma2: 355.0,
            u0: 320.0,
            v0: 240.0,
            k1: -0.05,
            k2: 0.004,
            k3: 0.0,
            p1: 0.0002,
            p2: -0.0004,
            width: 640,
            height: 480,
        }
    }

    #[test]
    fn identity_pose_returns_input_pixel() {
        let c = cam();
        let plane = Plane3::new(Vector3::new(0.1, -0.2, 1.0), 4.0);
        let px = Vector2::new(200.0, 300.0);
        let out = warp_via_plane(&c, &px, &plane, &RigidPose::identity(), &c).unwrap();
        assert!((out - px).norm() < 1e-8, "{out:?}");
    }

    #[test]
    fn agrees_with_direct_projection_of_plane_point() {
        let c = cam();
        let plane = Plane3::new(Vector3::new(0.05, 0.1, 1.0), 6.0);
        let rel = RigidPose::from_axis_angle(
            Vector3::new(0.1, 0.9, 0.2),
            0.3,
            Vector3::new(0.4, -0.1, 0.2),
        );

        // Build a scene point on the plane, project it into the reference
        // camera, and check the warp reproduces its direct projection.
        let ray = c.unproject(&Vector2::new(410.0, 205.0)).unwrap();
        let depth = plane.distance() / plane.normal().dot(&ray);
        let point = ray * depth;
        let ref_px = c.project(&point).unwrap();
        let direct = c.project(&rel.transform_point(&point)).unwrap();
        let warped = warp_via_plane(&c, &ref_px, &plane, &rel, &c).unwrap();
        assert!((warped - direct).norm() < 1e-8);
    }

    #[test]
    fn parallel_ray_has_no_intersection() {
        let c = CameraModel::ideal(0.0, 400.0, 320.0, 240.0, 640, 480);
        // Plane parallel to the optical axis; the central ray never meets it.
        let plane = Plane3::new(Vector3::x(), 2.0);
        let err = warp_via_plane(
            &c,
            &Vector2::new(320.0, 240.0),
            &plane,
            &RigidPose::identity(),
            &c,
        )
        .unwrap_err();
        assert_eq!(err, GeomError::NoIntersection);
    }
}
