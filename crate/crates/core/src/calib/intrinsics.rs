//! Joint refinement of one camera's intrinsics and the per-frame target
//! poses from fiducial detections.

use nalgebra::{DMatrix, DVector, Vector2, Vector3, Vector6};

use crate::geom::{CameraModel, CameraRig, RigCamera, RigidPose};
use crate::solver::{huber_weight, levenberg_marquardt, LmOptions};
use crate::world::FiducialTarget;

use super::target::CornerDetections;
use super::{CalibError, CalibResult, HUBER_PX};

/// Intrinsic parameter order inside the joint parameter vector. `k3` is
/// deliberately NOT refined: (gamma, xi, k1, k2, k3) form a gauge family
/// that reproduces the same projection, so the sixth radial coefficient is
/// held at its initial value (0 by default) to keep the rest identifiable.
const N_INTRINSICS: usize = 9;

fn pack_model(m: &CameraModel) -> [f64; N_INTRINSICS] {
    [
        m.xi, m.gamma1, m.gamma2, m.u0, m.v0, m.k1, m.k2, m.p1, m.p2,
    ]
}

fn unpack_model(base: &CameraModel, p: &[f64]) -> CameraModel {
    CameraModel {
        xi: p[0],
        gamma1: p[1],
        gamma2: p[2],
        u0: p[3],
        v0: p[4],
        k1: p[5],
        k2: p[6],
        p1: p[7],
        p2: p[8],
        ..*base
    }
}

/// Refines `initial` over >= 10 frames of single-camera detections by joint
/// Levenberg-Marquardt on (intrinsics, per-frame target pose). Frames must
/// span at least 3 target orientations more than 10 degrees apart; planar
/// calibration degenerates otherwise.
pub fn calibrate_intrinsics(
    initial: &CameraModel,
    target: &FiducialTarget,
    frames: &[CornerDetections],
) -> CalibResult<CameraModel> {
    if frames.len() < 10 {
        return Err(CalibError::InsufficientMotion);
    }

    // Initial per-frame poses (target -> camera) via the planar fit run with
    // the initial intrinsics on a single-camera rig.
    let proxy_rig = CameraRig::new(vec![RigCamera {
        label: "cam".into(),
        model: *initial,
        extrinsic: RigidPose::identity(),
    }]);
    let mut poses = Vec::with_capacity(frames.len());
    for dets in frames {
        let (pose, _) = super::target::estimate_target_pose(&proxy_rig, target, &[dets.clone()])?;
        poses.push(pose);
    }

    // Orientation spread gate: need 3 frames whose target normals pairwise
    // differ by more than 10 degrees.
    let normals: Vec<Vector3<f64>> = poses
        .iter()
        .map(|p| p.transform_vector(&Vector3::z()))
        .collect();
    let thresh = 10f64.to_radians().cos();
    let mut found = false;
    'outer: for i in 0..normals.len() {
        for j in (i + 1)..normals.len() {
            if normals[i].dot(&normals[j]) >= thresh {
                continue;
            }
            for k in (j + 1)..normals.len() {
                if normals[i].dot(&normals[k]) < thresh && normals[j].dot(&normals[k]) < thresh {
                    found = true;
                    break 'outer;
                }
            }
        }
    }
    if !found {
        return Err(CalibError::InsufficientMotion);
    }

    let n_frames = frames.len();
    let n_params = N_INTRINSICS + 6 * n_frames;
    let total: usize = frames.iter().map(|f| f.len()).sum();

    let mut init_params = DVector::zeros(n_params);
    for (i, v) in pack_model(initial).iter().enumerate() {
        init_params[i] = *v;
    }
    // Per-frame poses are twists relative to their initial estimates; the
    // relative motion stays far from the pi-rotation singularity.
    let bases = poses;
    let decode_pose = |params: &DVector<f64>, f: usize| {
        let o = N_INTRINSICS + 6 * f;
        bases[f].compose(&RigidPose::se3_exp(&Vector6::new(
            params[o],
            params[o + 1],
            params[o + 2],
            params[o + 3],
            params[o + 4],
            params[o + 5],
        )))
    };

    let eval = |params: &DVector<f64>| {
        let model = unpack_model(initial, params.as_slice());
        if model.gamma1 <= 0.0 || model.gamma2 <= 0.0 || model.xi < 0.0 {
            return None;
        }
        let mut residuals = DVector::zeros(2 * total);
        let mut jacobian = DMatrix::zeros(2 * total, n_params);
        let mut row = 0;
        for (f, dets) in frames.iter().enumerate() {
            let pose = decode_pose(params, f);
            for &(id, observed) in dets {
                let local = target.corner_local(id);
                let p_cam = pose.transform_point(&local);
                let (pixel, j_proj) = model.project_with_jacobian(&p_cam).ok()?;
                let r = pixel - observed;
                let w = huber_weight(r.norm(), HUBER_PX).sqrt();
                residuals[row] = r[0] * w;
                residuals[row + 1] = r[1] * w;

                // Intrinsics block: central differences per parameter.
                let packed = pack_model(&model);
                for pi in 0..N_INTRINSICS {
                    let step = intrinsic_step(pi, packed[pi]);
                    let mut hi = packed;
                    hi[pi] += step;
                    let mut lo = packed;
                    lo[pi] -= step;
                    let m_hi = unpack_model(initial, &hi);
                    let m_lo = unpack_model(initial, &lo);
                    let (p_hi, p_lo) = match (m_hi.project(&p_cam), m_lo.project(&p_cam)) {
                        (Ok(a), Ok(b)) => (a, b),
                        _ => return None,
                    };
                    let d: Vector2<f64> = (p_hi - p_lo) / (2.0 * step);
                    jacobian[(row, pi)] = d[0] * w;
                    jacobian[(row + 1, pi)] = d[1] * w;
                }

                // Pose block (right-multiplicative twist).
                let j_pose = j_proj * pose.boxplus_point_jacobian(&local) * w;
                jacobian
                    .view_mut((row, N_INTRINSICS + 6 * f), (2, 6))
                    .copy_from(&j_pose);
                row += 2;
            }
        }
        Some((residuals, jacobian))
    };

    let retract = |params: &DVector<f64>, step: &DVector<f64>| {
        let mut out = params.clone();
        for i in 0..N_INTRINSICS {
            out[i] += step[i];
        }
        for f in 0..n_frames {
            let o = N_INTRINSICS + 6 * f;
            let twist = Vector6::new(
                step[o],
                step[o + 1],
                step[o + 2],
                step[o + 3],
                step[o + 4],
                step[o + 5],
            );
            let relative = bases[f]
                .inverse()
                .compose(&decode_pose(params, f).boxplus(&twist));
            let rel_twist = relative
                .se3_log()
                .expect("relative frame-pose update stays small");
            for i in 0..6 {
                out[o + i] = rel_twist[i];
            }
        }
        out
    };

    let opts = LmOptions {
        max_iters: 300,
        gradient_tol: 1e-12,
        cost_tol: 1e-18,
        ..LmOptions::default()
    };
    let (params, report) = levenberg_marquardt(init_params, eval, retract, &opts);
    if report.final_cost.is_infinite() {
        return Err(CalibError::NoConvergence);
    }
    Ok(unpack_model(initial, params.as_slice()))
}

/// Finite-difference step sized to each intrinsic's scale.
fn intrinsic_step(index: usize, value: f64) -> f64 {
    match index {
        1 | 2 | 3 | 4 => (value.abs() * 1e-6).max(1e-6), // gammas, principal point
        _ => 1e-6,
    }
}
