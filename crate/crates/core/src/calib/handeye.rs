//! Hand-eye calibration between a pose sensor (GNSS/INS) and the camera rig:
//! linear AX = XB initialization from relative motions, then reprojection
//! refinement holding INS poses and inter-camera extrinsics fixed.

use nalgebra::{
    DMatrix, DVector, Matrix3, Matrix4, Matrix6, Quaternion, UnitQuaternion, Vector3, Vector6,
};

use crate::geom::{CameraRig, RigidPose};
use crate::solver::huber_weight;

use super::{CalibError, CalibResult, HUBER_PX};

/// Solves `A_i X = X B_i` where `A_i` are relative motions of the INS and
/// `B_i` relative motions of the camera, both from consecutive pose pairs.
/// Returns `X` mapping camera coordinates into the INS frame.
///
/// The rotation comes from a linear quaternion least-squares problem; the
/// translation from `(R_Ai - I) t = R_X t_Bi - t_Ai`, which assumes metric
/// (stereo) visual odometry. Feeding scaled monocular poses biases the
/// translation estimate; the rotation stays correct either way.
pub fn handeye_initialize(
    cam_poses: &[RigidPose],
    ins_poses: &[RigidPose],
) -> CalibResult<RigidPose> {
    assert_eq!(cam_poses.len(), ins_poses.len(), "pose streams must align");
    if cam_poses.len() < 4 {
        return Err(CalibError::InsufficientPairs {
            needed: 3,
            got: cam_poses.len().saturating_sub(1),
        });
    }
    let mut motions = Vec::new();
    for i in 1..cam_poses.len() {
        let b = cam_poses[i - 1].inverse().compose(&cam_poses[i]);
        let a = ins_poses[i - 1].inverse().compose(&ins_poses[i]);
        motions.push((a, b));
    }
    if motions.len() < 3 {
        return Err(CalibError::InsufficientPairs {
            needed: 3,
            got: motions.len(),
        });
    }

    // Rotation observability: relative-rotation axes must span >= 2
    // directions (max pairwise axis angle > 5 degrees).
    let axes: Vec<Vector3<f64>> = motions
        .iter()
        .filter_map(|(a, _)| a.rotation().axis_angle())
        .filter(|(_, angle)| *angle > 0.2f64.to_radians())
        .map(|(axis, _)| axis.into_inner())
        .collect();
    let mut max_axis_angle = 0.0f64;
    for i in 0..axes.len() {
        for j in (i + 1)..axes.len() {
            let c = axes[i].dot(&axes[j]).abs().clamp(0.0, 1.0);
            max_axis_angle = max_axis_angle.max(c.acos());
        }
    }
    if max_axis_angle <= 5f64.to_radians() {
        return Err(CalibError::DegenerateMotion);
    }

    // Stack (L(q_A) - R(q_B)) q_X = 0 and take the smallest singular vector.
    let mut m = DMatrix::<f64>::zeros(4 * motions.len(), 4);
    for (i, (a, b)) in motions.iter().enumerate() {
        let block = quat_left(&a.rotation()) - quat_right(&b.rotation());
        m.view_mut((4 * i, 0), (4, 4)).copy_from(&block);
    }
    let svd = m.svd(false, true);
    let v_t = svd.v_t.ok_or(CalibError::DegenerateMotion)?;
    let q = v_t.row(v_t.nrows() - 1);
    let rot_x = UnitQuaternion::from_quaternion(Quaternion::new(q[0], q[1], q[2], q[3]));

    // Translation least squares with a rank check: planar (single-axis)
    // motion leaves one direction unobservable.
    let n = motions.len();
    let mut c = DMatrix::<f64>::zeros(3 * n, 3);
    let mut w = DVector::<f64>::zeros(3 * n);
    for (i, (a, b)) in motions.iter().enumerate() {
        let block = a.rotation_matrix() - Matrix3::identity();
        c.view_mut((3 * i, 0), (3, 3)).copy_from(&block);
        let rhs = rot_x * b.translation() - a.translation();
        w.rows_mut(3 * i, 3).copy_from(&rhs);
    }
    let svd = c.clone().svd(true, true);
    let smin = svd.singular_values.iter().copied().fold(f64::MAX, f64::min);
    let smax = svd.singular_values.iter().copied().fold(0.0f64, f64::max);
    if smax <= 0.0 || smin < 1e-6 * smax.max(1.0) {
        return Err(CalibError::DegenerateMotion);
    }
    let t = svd
        .solve(&w, 1e-12)
        .map_err(|_| CalibError::DegenerateMotion)?;
    Ok(RigidPose::new(rot_x, Vector3::new(t[0], t[1], t[2])))
}

fn quat_left(q: &UnitQuaternion<f64>) -> Matrix4<f64> {
    let (w, x, y, z) = (q.w, q.i, q.j, q.k);
    Matrix4::new(
        w, -x, -y, -z, //
        x, w, -z, y, //
        y, z, w, -x, //
        z, -y, x, w,
    )
}

fn quat_right(q: &UnitQuaternion<f64>) -> Matrix4<f64> {
    let (w, x, y, z) = (q.w, q.i, q.j, q.k);
    Matrix4::new(
        w, -x, -y, -z, //
        x, w, z, -y, //
        y, -z, w, x, //
        z, y, -x, w,
    )
}

/// One feature track: world landmark observed in several frames/cameras.
#[derive(Debug, Clone)]
pub struct HandeyeTrack {
    /// (frame index, camera index, pixel).
    pub observations: Vec<(usize, usize, nalgebra::Vector2<f64>)>,
    /// Initial landmark estimate in the world frame.
    pub initial_point: Vector3<f64>,
}

#[derive(Debug, Clone)]
pub struct HandeyeRefineOutcome {
    /// Refined rig -> INS transform.
    pub pose: RigidPose,
    pub rms_px: f64,
    /// Raised when the rig-transform normal matrix is near-singular
    /// (e.g. all tracks on one distant frontal plane).
    pub condition_warning: bool,
    /// min/max eigenvalue ratio of the reduced 6x6 normal matrix.
    pub condition_ratio: f64,
    pub iterations: usize,
}

const CONDITION_WARN_RATIO: f64 = 1e-9;

/// Refines the rig -> INS transform jointly with the track landmarks by
/// minimizing reprojection error, holding the INS poses and the rig's
/// inter-camera extrinsics exactly fixed. `X` maps rig-body coordinates into
/// the INS frame: `T_world_body(k) = T_world_ins(k) * X`.
pub fn handeye_refine(
    rig: &CameraRig,
    tracks: &[HandeyeTrack],
    ins_poses: &[RigidPose],
    initial: &RigidPose,
) -> CalibResult<HandeyeRefineOutcome> {
    let usable = tracks
        .iter()
        .filter(|t| t.observations.len() >= 3)
        .count();
    if usable < 50 {
        return Err(CalibError::InsufficientTracks {
            needed: 50,
            got: usable,
        });
    }
    let tracks: Vec<&HandeyeTrack> = tracks
        .iter()
        .filter(|t| t.observations.len() >= 3)
        .collect();

    let mut x = *initial;
    let mut points: Vec<Vector3<f64>> = tracks.iter().map(|t| t.initial_point).collect();

    let world_to_ins: Vec<RigidPose> = ins_poses.iter().map(|p| p.inverse()).collect();

    let cost_of = |x: &RigidPose, points: &[Vector3<f64>]| -> Option<f64> {
        let x_inv = x.inverse();
        let mut cost = 0.0;
        for (ti, track) in tracks.iter().enumerate() {
            for &(frame, cam_idx, observed) in &track.observations {
                let cam = rig.camera(cam_idx);
                let p_ins = world_to_ins[frame].transform_point(&points[ti]);
                let p_body = x_inv.transform_point(&p_ins);
                let p_cam = cam.extrinsic.transform_point(&p_body);
                let pixel = cam.model.project(&p_cam).ok()?;
                let r = (pixel - observed).norm();
                let w = huber_weight(r, HUBER_PX);
                cost += w * r * r;
            }
        }
        Some(cost)
    };

    let mut cost = cost_of(&x, &points).ok_or(CalibError::NoConvergence)?;
    let mut lambda = 1e-3;
    let mut iterations = 0;
    let mut last_hxx = Matrix6::<f64>::zeros();

    for _ in 0..50 {
        iterations += 1;
        // Build the Schur-complement normal equations: rig block + one 3x3
        // block per landmark.
        let x_inv = x.inverse();
        let mut h_xx = Matrix6::<f64>::zeros();
        let mut b_x = Vector6::<f64>::zeros();
        let mut h_ll: Vec<Matrix3<f64>> = vec![Matrix3::zeros(); points.len()];
        let mut b_l: Vec<Vector3<f64>> = vec![Vector3::zeros(); points.len()];
        let mut h_xl: Vec<nalgebra::Matrix6x3<f64>> =
            vec![nalgebra::Matrix6x3::zeros(); points.len()];
        let mut valid = true;

        for (ti, track) in tracks.iter().enumerate() {
            for &(frame, cam_idx, observed) in &track.observations {
                let cam = rig.camera(cam_idx);
                let p_ins = world_to_ins[frame].transform_point(&points[ti]);
                let p_body = x_inv.transform_point(&p_ins);
                let p_cam = cam.extrinsic.transform_point(&p_body);
                let Ok((pixel, j_proj)) = cam.model.project_with_jacobian(&p_cam) else {
                    valid = false;
                    break;
                };
                let r = pixel - observed;
                let w = huber_weight(r.norm(), HUBER_PX).sqrt();
                // d p_body / d twist of X (right-multiplicative): exp(-d)
                // acting on p_body gives [-I | [p_body]x].
                let mut j_x_body = nalgebra::Matrix3x6::<f64>::zeros();
                j_x_body
                    .fixed_view_mut::<3, 3>(0, 0)
                    .copy_from(&(-Matrix3::identity()));
                j_x_body
                    .fixed_view_mut::<3, 3>(0, 3)
                    .copy_from(&skew(&p_body));
                let r_ext = cam.extrinsic.rotation_matrix();
                let j_x = j_proj * r_ext * j_x_body * w;
                // d p_cam / d landmark.
                let j_l = j_proj
                    * (r_ext * x_inv.rotation_matrix() * world_to_ins[frame].rotation_matrix())
                    * w;
                let rw = r * w;

                h_xx += j_x.transpose() * j_x;
                b_x += j_x.transpose() * rw;
                h_ll[ti] += j_l.transpose() * j_l;
                b_l[ti] += j_l.transpose() * rw;
                h_xl[ti] += j_x.transpose() * j_l;
            }
            if !valid {
                break;
            }
        }
        if !valid {
            return Err(CalibError::NoConvergence);
        }
        last_hxx = h_xx;

        let g = b_x.norm();
        if g < 1e-10 {
            break;
        }

        let mut stepped = false;
        for _ in 0..10 {
            let mut h_xx_d = h_xx;
            for i in 0..6 {
                h_xx_d[(i, i)] += lambda * h_xx[(i, i)].max(1e-12);
            }
            let mut reduced_h = h_xx_d;
            let mut reduced_b = b_x;
            let mut ll_inv = Vec::with_capacity(points.len());
            let mut ok = true;
            for ti in 0..points.len() {
                let mut hll = h_ll[ti];
                for i in 0..3 {
                    hll[(i, i)] += lambda * h_ll[ti][(i, i)].max(1e-12);
                }
                let Some(inv) = hll.try_inverse() else {
                    ok = false;
                    break;
                };
                reduced_h -= h_xl[ti] * inv * h_xl[ti].transpose();
                reduced_b -= h_xl[ti] * inv * b_l[ti];
                ll_inv.push(inv);
            }
            if !ok {
                lambda *= 10.0;
                continue;
            }
            let Some(chol) = reduced_h.cholesky() else {
                lambda *= 10.0;
                continue;
            };
            let dx = chol.solve(&(-reduced_b));
            let new_x = x.boxplus(&dx);
            let mut new_points = points.clone();
            for ti in 0..points.len() {
                let dl = ll_inv[ti] * (-b_l[ti] - h_xl[ti].transpose() * dx);
                new_points[ti] += dl;
            }
            match cost_of(&new_x, &new_points) {
                Some(new_cost) if new_cost < cost => {
                    x = new_x;
                    points = new_points;
                    cost = new_cost;
                    lambda = (lambda / 10.0).max(1e-12);
                    stepped = true;
                }
                _ => {
                    lambda *= 10.0;
                    continue;
                }
            }
            break;
        }
        if !stepped {
            break;
        }
    }

    // Condition diagnostic on the rig block of the final normal matrix.
    let eig = last_hxx.symmetric_eigenvalues();
    let min = eig.iter().copied().fold(f64::MAX, f64::min).max(0.0);
    let max = eig.iter().copied().fold(0.0f64, f64::max);
    let ratio = if max > 0.0 { min / max } else { 0.0 };

    let mut n_obs = 0usize;
    for t in &tracks {
        n_obs += t.observations.len();
    }
    let rms = (cost / n_obs as f64).sqrt();

    Ok(HandeyeRefineOutcome {
        pose: x,
        rms_px: rms,
        condition_warning: ratio < CONDITION_WARN_RATIO,
        condition_ratio: ratio,
        iterations,
    })
}

fn skew(w: &Vector3<f64>) -> Matrix3<f64> {
    Matrix3::new(0.0, -w[2], w[1], w[2], 0.0, -w[0], -w[1], w[0], 0.0)
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn random_pose(rng: &mut ChaCha8Rng, rot_scale: f64, t_scale: f64) -> RigidPose {
        let axis = Vector3::new(
            rng.gen::<f64>() - 0.5,
            rng.gen::<f64>() - 0.5,
            rng.gen::<f64>() - 0.5,
        );
        let angle = (rng.gen::<f64>() - 0.5) * rot_scale;
        let t = Vector3::new(
            rng.gen::<f64>() - 0.5,
            rng.gen::<f64>() - 0.5,
            rng.gen::<f64>() - 0.5,
        ) * t_scale;
        RigidPose::from_axis_angle(axis, angle, t)
    }

    #[test]
    fn identity_link_identical_streams() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let mut poses = vec![RigidPose::identity()];
        for _ in 0..6 {
            let step = random_pose(&mut rng, 1.0, 1.0);
            let last = *poses.last().unwrap();
            poses.push(last.compose(&step));
        }
        let x = handeye_initialize(&poses, &poses).unwrap();
        assert!(x.translation().norm() < 1e-9);
        assert!(x.rotation().angle() < 1e-9);
    }

    #[test]
    fn forward_constructed_link_recovered() {
        let mut rng = ChaCha8Rng::seed_from_u64(6);
        let x_true = random_pose(&mut rng, 1.2, 0.8);
        // Build camera poses, then INS poses via T_ins_k = T_cam_k * X^-1
        // conjugation on relative motions: A = X B X^-1.
        let mut cam = vec![RigidPose::identity()];
        for _ in 0..8 {
            let step = random_pose(&mut rng, 1.0, 1.5);
            let last = *cam.last().unwrap();
            cam.push(last.compose(&step));
        }
        let ins: Vec<RigidPose> = cam.iter().map(|c| c.compose(&x_true.inverse())).collect();
        let x = handeye_initialize(&cam, &ins).unwrap();
        assert!(
            x.translation_distance_to(&x_true) < 1e-9,
            "t err {}",
            x.translation_distance_to(&x_true)
        );
        assert!(x.rotation_angle_to(&x_true) < 1e-9);
    }

    #[test]
    fn equivariance_under_constant_offset() {
        // Conjugating the camera stream by a fixed pose Y maps the solution
        // X to X * Y^-1.
        let mut rng = ChaCha8Rng::seed_from_u64(16);
        let x_true = random_pose(&mut rng, 1.0, 0.6);
        let y = random_pose(&mut rng, 0.8, 0.5);
        let mut cam = vec![RigidPose::identity()];
        for _ in 0..8 {
            let step = random_pose(&mut rng, 1.0, 1.2);
            let last = *cam.last().unwrap();
            cam.push(last.compose(&step));
        }
        let ins: Vec<RigidPose> = cam.iter().map(|c| c.compose(&x_true.inverse())).collect();
        let cam_conj: Vec<RigidPose> = cam.iter().map(|c| c.compose(&y)).collect();
        let x = handeye_initialize(&cam_conj, &ins).unwrap();
        let expected = x_true.compose(&y);
        assert!(x.translation_distance_to(&expected) < 1e-9);
        assert!(x.rotation_angle_to(&expected) < 1e-9);
    }

    #[test]
    fn yaw_only_motion_is_degenerate() {
        let mut cam = Vec::new();
        for i in 0..8 {
            let yaw = 0.3 * i as f64;
            cam.push(RigidPose::from_axis_angle(
                Vector3::z(),
                yaw,
                Vector3::new(i as f64, (i as f64).sin(), 0.0),
            ));
        }
        let x_true = RigidPose::from_axis_angle(Vector3::x(), 0.4, Vector3::new(0.2, 0.1, 0.5));
        let ins: Vec<RigidPose> = cam.iter().map(|c| c.compose(&x_true.inverse())).collect();
        assert_eq!(
            handeye_initialize(&cam, &ins),
            Err(CalibError::DegenerateMotion)
        );
    }

    #[test]
    fn too_few_poses_rejected() {
        let poses = vec![RigidPose::identity(); 3];
        assert!(matches!(
            handeye_initialize(&poses, &poses),
            Err(CalibError::InsufficientPairs { .. })
        ));
    }
}
