//! Fiducial target pose from multi-camera corner detections.

use nalgebra::{DMatrix, DVector, Matrix3, Rotation3, UnitQuaternion, Vector2};

use crate::geom::{CameraRig, RigidPose};
use crate::solver::{huber_weight, levenberg_marquardt, LmOptions};
use crate::world::FiducialTarget;

use super::{CalibError, CalibResult, HUBER_PX};

/// Per-camera corner detections: `(corner_id, pixel)`.
pub type CornerDetections = Vec<(u32, Vector2<f64>)>;

/// Estimates the target pose in the rig body frame by a planar fit from the
/// best single camera followed by Levenberg-Marquardt over the 6-DoF pose
/// with all cameras' reprojection residuals. Returns the pose and the RMS
/// reprojection error in pixels.
///
/// Only the target's grid geometry is read; its world pose is ignored.
pub fn estimate_target_pose(
    rig: &CameraRig,
    target: &FiducialTarget,
    detections: &[CornerDetections],
) -> CalibResult<(RigidPose, f64)> {
    assert_eq!(detections.len(), rig.len(), "one detection list per camera");
    let total: usize = detections.iter().map(|d| d.len()).sum();
    if total < 6 {
        return Err(CalibError::InsufficientCorners {
            needed: 6,
            got: total,
        });
    }
    // Collinearity gate on the observed corners' board coordinates.
    let mut board_pts = Vec::with_capacity(total);
    for dets in detections {
        for &(id, _) in dets {
            let p = target.corner_local(id);
            board_pts.push(Vector2::new(p[0], p[1]));
        }
    }
    if planar_spread_ratio(&board_pts) < 1e-3 {
        return Err(CalibError::DegenerateConfiguration);
    }

    // Initialization from the camera seeing the most corners.
    let best_cam = (0..rig.len())
        .max_by_key(|&c| detections[c].len())
        .expect("rig is nonempty");
    let init_in_cam = planar_pose_init(rig, target, best_cam, &detections[best_cam])?;
    let init = rig.camera(best_cam).extrinsic.inverse().compose(&init_in_cam);

    refine_target_pose(rig, target, detections, &init)
}

/// LM refinement of a target pose in the body frame over all cameras.
/// The pose is parametrized as a twist relative to `init`, which keeps the
/// logarithm well away from the pi-rotation singularity.
pub(crate) fn refine_target_pose(
    rig: &CameraRig,
    target: &FiducialTarget,
    detections: &[CornerDetections],
    init: &RigidPose,
) -> CalibResult<(RigidPose, f64)> {
    let base = *init;
    let pose_of = move |p: &DVector<f64>| {
        base.compose(&RigidPose::se3_exp(&nalgebra::Vector6::new(
            p[0], p[1], p[2], p[3], p[4], p[5],
        )))
    };

    let total: usize = detections.iter().map(|d| d.len()).sum();
    let eval = |params: &DVector<f64>| {
        let pose = pose_of(params);
        let mut residuals = DVector::zeros(2 * total);
        let mut jacobian = DMatrix::zeros(2 * total, 6);
        let mut row = 0;
        for (ci, dets) in detections.iter().enumerate() {
            let cam = rig.camera(ci);
            for &(id, observed) in dets {
                let local = target.corner_local(id);
                let p_body = pose.transform_point(&local);
                let p_cam = cam.extrinsic.transform_point(&p_body);
                let (pixel, j_proj) = cam.model.project_with_jacobian(&p_cam).ok()?;
                let r = pixel - observed;
                let w = huber_weight(r.norm(), HUBER_PX).sqrt();
                let j_point = pose.boxplus_point_jacobian(&local);
                let j = j_proj * cam.extrinsic.rotation_matrix() * j_point * w;
                residuals[row] = r[0] * w;
                residuals[row + 1] = r[1] * w;
                jacobian.view_mut((row, 0), (2, 6)).copy_from(&j);
                row += 2;
            }
        }
        Some((residuals, jacobian))
    };

    let retract = |params: &DVector<f64>, step: &DVector<f64>| {
        let twist = nalgebra::Vector6::new(step[0], step[1], step[2], step[3], step[4], step[5]);
        let relative = base.inverse().compose(&pose_of(params).boxplus(&twist));
        let rel_twist = relative
            .se3_log()
            .expect("relative target-pose update stays small");
        DVector::from_iterator(6, rel_twist.iter().copied())
    };

    let (params, report) =
        levenberg_marquardt(DVector::zeros(6), eval, retract, &LmOptions::default());
    if !report.converged && report.final_cost > report.initial_cost {
        return Err(CalibError::NoConvergence);
    }
    let pose = pose_of(&params);

    // Unweighted RMS at the solution.
    let mut sum = 0.0;
    let mut n = 0usize;
    for (ci, dets) in detections.iter().enumerate() {
        let cam = rig.camera(ci);
        for &(id, observed) in dets {
            let p_cam = cam
                .extrinsic
                .transform_point(&pose.transform_point(&target.corner_local(id)));
            if let Ok(pixel) = cam.model.project(&p_cam) {
                sum += (pixel - observed).norm_squared();
                n += 1;
            }
        }
    }
    if n == 0 {
        return Err(CalibError::NoConvergence);
    }
    Ok((pose, (sum / n as f64).sqrt()))
}

/// Ratio of the smallest to largest scatter eigenvalue of 2D points;
/// near zero for collinear sets.
fn planar_spread_ratio(points: &[Vector2<f64>]) -> f64 {
    let n = points.len() as f64;
    let mean = points.iter().fold(Vector2::zeros(), |a, p| a + p) / n;
    let mut cov = nalgebra::Matrix2::<f64>::zeros();
    for p in points {
        let d = p - mean;
        cov += d * d.transpose();
    }
    cov /= n;
    let eig = cov.symmetric_eigenvalues();
    let (lo, hi) = (eig[0].min(eig[1]), eig[0].max(eig[1]));
    if hi <= 0.0 {
        0.0
    } else {
        lo / hi
    }
}

/// Planar pose (target -> camera) from a homography fit on the unprojected
/// rays of one camera's detections.
fn planar_pose_init(
    rig: &CameraRig,
    target: &FiducialTarget,
    camera_index: usize,
    detections: &CornerDetections,
) -> CalibResult<RigidPose> {
    let model = &rig.camera(camera_index).model;
    let mut board = Vec::new();
    let mut normalized = Vec::new();
    for &(id, pixel) in detections {
        let Ok(ray) = model.unproject(&pixel) else {
            continue;
        };
        if ray[2] < 0.05 {
            continue; // beyond the pinhole-equivalent hemisphere
        }
        let local = target.corner_local(id);
        board.push(Vector2::new(local[0], local[1]));
        normalized.push(Vector2::new(ray[0] / ray[2], ray[1] / ray[2]));
    }
    if board.len() < 4 {
        return Err(CalibError::InsufficientCorners {
            needed: 4,
            got: board.len(),
        });
    }
    if planar_spread_ratio(&board) < 1e-3 {
        return Err(CalibError::DegenerateConfiguration);
    }

    // DLT homography board plane -> normalized image plane.
    let n = board.len();
    let mut a = DMatrix::<f64>::zeros(2 * n, 9);
    for i in 0..n {
        let (x, y) = (board[i][0], board[i][1]);
        let (u, v) = (normalized[i][0], normalized[i][1]);
        let row0 = [-x, -y, -1.0, 0.0, 0.0, 0.0, u * x, u * y, u];
        let row1 = [0.0, 0.0, 0.0, -x, -y, -1.0, v * x, v * y, v];
        for j in 0..9 {
            a[(2 * i, j)] = row0[j];
            a[(2 * i + 1, j)] = row1[j];
        }
    }
    let svd = a.svd(false, true);
    let v_t = svd.v_t.ok_or(CalibError::DegenerateConfiguration)?;
    let h = v_t.row(v_t.nrows() - 1);
    let mut hm = Matrix3::new(h[0], h[1], h[2], h[3], h[4], h[5], h[6], h[7], h[8]);

    // Scale and cheirality: the target must sit in front of the camera.
    if hm[(2, 2)] < 0.0 {
        hm = -hm;
    }
    let h1 = hm.column(0).into_owned();
    let h2 = hm.column(1).into_owned();
    let h3 = hm.column(2).into_owned();
    let lambda = 2.0 / (h1.norm() + h2.norm());
    let r1 = h1 * lambda;
    let r2 = h2 * lambda;
    let r3 = r1.cross(&r2);
    let t = h3 * lambda;
    let r_approx = Matrix3::from_columns(&[r1, r2, r3]);
    let svd = r_approx.svd(true, true);
    let (u, vt) = (svd.u.unwrap(), svd.v_t.unwrap());
    let mut r = u * vt;
    if r.determinant() < 0.0 {
        let mut u2 = u;
        u2.column_mut(2).neg_mut();
        r = u2 * vt;
    }
    let q = UnitQuaternion::from_rotation_matrix(&Rotation3::from_matrix_unchecked(r));
    Ok(RigidPose::new(q, t))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::world::rigs::standard_rig_sized;
    use crate::world::simulate_target_detections;
    use nalgebra::Vector3;

    fn facing_target(x: f64, y: f64) -> FiducialTarget {
        // Front face (+z of the target) looking back toward -x world.
        let rot = UnitQuaternion::from_rotation_matrix(&Rotation3::from_matrix_unchecked(
            Matrix3::new(0.0, 0.0, -1.0, 1.0, 0.0, 0.0, 0.0, -1.0, 0.0),
        ));
        FiducialTarget {
            rows: 5,
            cols: 6,
            tag_size: 0.16,
            spacing: 0.05,
            pose: RigidPose::new(rot, Vector3::new(x, y, 2.2)),
        }
    }

    fn group_by_camera(
        rig: &CameraRig,
        dets: &[crate::world::TargetDetection],
    ) -> Vec<CornerDetections> {
        let mut out = vec![Vec::new(); rig.len()];
        for d in dets {
            out[d.camera_index].push((d.corner_id, d.pixel));
        }
        out
    }

    #[test]
    fn noiseless_pose_recovered_exactly() {
        let rig = standard_rig_sized(256);
        let target = facing_target(5.0, 0.6);
        let body = RigidPose::identity();
        let dets = simulate_target_detections(&target, &rig, &body, 0.0, 1);
        let grouped = group_by_camera(&rig, &dets);
        let (pose, rms) = estimate_target_pose(&rig, &target, &grouped).unwrap();
        // Ground truth target -> body equals target -> world here.
        assert!(pose.translation_distance_to(&target.pose) < 1e-6, "t err");
        assert!(pose.rotation_angle_to(&target.pose) < 1e-6, "r err");
        assert!(rms < 1e-6, "rms {rms}");
    }

    #[test]
    fn noisy_two_camera_split_view() {
        // Board close enough that no single front camera sees all of it;
        // the two outer cameras each contribute a different part.
        let rig = standard_rig_sized(256);
        let tilt = UnitQuaternion::from_axis_angle(&Vector3::z_axis(), 0.25)
            * UnitQuaternion::from_axis_angle(&Vector3::x_axis(), 0.15);
        let mut target = facing_target(2.45, -0.65);
        target.rows = 6;
        target.cols = 7;
        target.pose = RigidPose::new(tilt * target.pose.rotation(), target.pose.translation());
        let body = RigidPose::identity();
        let dets = simulate_target_detections(&target, &rig, &body, 0.3, 7);
        let mut grouped = group_by_camera(&rig, &dets);
        let cam_a = rig.index_of("nir_front_0").unwrap();
        let cam_b = rig.index_of("nir_front_4").unwrap();
        for (ci, dets) in grouped.iter_mut().enumerate() {
            if ci != cam_a && ci != cam_b {
                dets.clear();
            }
        }
        let ids_a: std::collections::BTreeSet<u32> =
            grouped[cam_a].iter().map(|(id, _)| *id).collect();
        let ids_b: std::collections::BTreeSet<u32> =
            grouped[cam_b].iter().map(|(id, _)| *id).collect();
        assert!(ids_a.len() >= 40 && ids_b.len() >= 40);
        assert!(ids_a.len() < target.corner_count() as usize);
        assert!(ids_b.len() < target.corner_count() as usize);
        let (pose, _) = estimate_target_pose(&rig, &target, &grouped).unwrap();
        assert!(
            pose.translation_distance_to(&target.pose) < 5e-3,
            "t err {}",
            pose.translation_distance_to(&target.pose)
        );
        assert!(
            pose.rotation_angle_to(&target.pose).to_degrees() < 0.05,
            "r err {}",
            pose.rotation_angle_to(&target.pose).to_degrees()
        );
    }

    #[test]
    fn collinear_corners_rejected() {
        let rig = standard_rig_sized(256);
        let target = facing_target(5.0, 0.0);
        let body = RigidPose::identity();
        let dets = simulate_target_detections(&target, &rig, &body, 0.0, 1);
        let mut grouped = group_by_camera(&rig, &dets);
        // Keep only corners from the first row of tags, first corner of each:
        // all of them share y = 0 on the board (collinear).
        for dets in grouped.iter_mut() {
            dets.retain(|(id, _)| id % 4 == 0 && id / 4 < target.cols);
        }
        let total: usize = grouped.iter().map(|d| d.len()).sum();
        assert!(total >= 6, "need enough collinear corners, got {total}");
        assert_eq!(
            estimate_target_pose(&rig, &target, &grouped),
            Err(CalibError::DegenerateConfiguration)
        );
    }

    #[test]
    fn too_few_corners_rejected() {
        let rig = standard_rig_sized(256);
        let target = facing_target(5.0, 0.0);
        let dets = simulate_target_detections(&target, &rig, &RigidPose::identity(), 0.0, 1);
        let mut grouped = group_by_camera(&rig, &dets);
        for dets in grouped.iter_mut() {
            dets.truncate(1);
        }
        let mut kept = 0;
        for dets in grouped.iter_mut() {
            if kept >= 5 {
                dets.clear();
            } else {
                kept += dets.len();
            }
        }
        assert!(matches!(
            estimate_target_pose(&rig, &target, &grouped),
            Err(CalibError::InsufficientCorners { .. })
        ));
    }
}
