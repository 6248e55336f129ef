//! Vehicle rig presets. Body frame: x forward, y left, z up.
//! Camera frames: z optical axis, x right in the image, y down.

use nalgebra::{Matrix3, Rotation3, UnitQuaternion, Vector3};

use crate::geom::{CameraModel, CameraRig, RigCamera, RigidPose};

/// Extrinsic (body -> camera) for a camera at `center` looking along the
/// body-frame direction `forward`, image up aligned with world up.
pub fn look_extrinsic(center: Vector3<f64>, forward: Vector3<f64>) -> RigidPose {
    let up = Vector3::z();
    let z_cam = forward.normalize();
    let x_cam = z_cam.cross(&up).normalize();
    let y_cam = z_cam.cross(&x_cam);
    let rot = Matrix3::from_rows(&[x_cam.transpose(), y_cam.transpose(), z_cam.transpose()]);
    let q = UnitQuaternion::from_rotation_matrix(&Rotation3::from_matrix_unchecked(rot));
    RigidPose::new(q, q * -center)
}

fn nir_model(width: u32) -> CameraModel {
    let w = f64::from(width);
    CameraModel {
        xi: 1.0,
        gamma1: w * 0.8,
        gamma2: w * 0.8,
        u0: (w - 1.0) / 2.0,
        v0: (w - 1.0) / 2.0,
        k1: -0.02,
        k2: 0.002,
        k3: 0.0,
        p1: 5e-4,
        p2: -5e-4,
        width,
        height: width,
    }
}

/// The 16-camera surround rig: five NIR cameras across the front for
/// wide-baseline stereo, a stereo pair on each side and three at the rear,
/// plus four corner color cameras used for visualization only.
pub fn standard_rig_sized(width: u32) -> CameraRig {
    let model = nir_model(width);
    let mut cams = Vec::new();
    // Front row, left (+y) to right (-y).
    for (i, y) in [0.8, 0.4, 0.0, -0.4, -0.8].iter().enumerate() {
        cams.push(RigCamera {
            label: format!("nir_front_{i}"),
            model,
            extrinsic: look_extrinsic(Vector3::new(2.0, *y, 1.6), Vector3::x()),
        });
    }
    for (i, y) in [0.5, 0.0, -0.5].iter().enumerate() {
        cams.push(RigCamera {
            label: format!("nir_rear_{i}"),
            model,
            extrinsic: look_extrinsic(Vector3::new(-2.0, *y, 1.6), -Vector3::x()),
        });
    }
    for (i, x) in [0.5, -0.5].iter().enumerate() {
        cams.push(RigCamera {
            label: format!("nir_left_{i}"),
            model,
            extrinsic: look_extrinsic(Vector3::new(*x, 0.9, 1.6), Vector3::y()),
        });
    }
    for (i, x) in [0.5, -0.5].iter().enumerate() {
        cams.push(RigCamera {
            label: format!("nir_right_{i}"),
            model,
            extrinsic: look_extrinsic(Vector3::new(*x, -0.9, 1.6), -Vector3::y()),
        });
    }
    for (label, y, dir_y) in [
        ("color_fl", 1.0, 0.5),
        ("color_fr", -1.0, -0.5),
    ] {
        cams.push(RigCamera {
            label: label.into(),
            model,
            extrinsic: look_extrinsic(
                Vector3::new(2.0, y, 1.5),
                Vector3::new(1.0, dir_y, 0.0),
            ),
        });
    }
    for (label, y, dir_y) in [
        ("color_rl", 1.0, 0.5),
        ("color_rr", -1.0, -0.5),
    ] {
        cams.push(RigCamera {
            label: label.into(),
            model,
            extrinsic: look_extrinsic(
                Vector3::new(-2.0, y, 1.5),
                Vector3::new(-1.0, dir_y, 0.0),
            ),
        });
    }
    CameraRig::new(cams)
}

pub fn standard_rig() -> CameraRig {
    standard_rig_sized(256)
}

/// Stereo pair labels used by odometry: one pair per vehicle side.
pub fn stereo_pair_labels() -> [(&'static str, &'static str); 4] {
    [
        ("nir_front_1", "nir_front_3"),
        ("nir_rear_0", "nir_rear_2"),
        ("nir_left_0", "nir_left_1"),
        ("nir_right_0", "nir_right_1"),
    ]
}

/// One camera per vehicle side, used to stitch panoramas.
pub fn panorama_labels() -> [&'static str; 4] {
    ["nir_front_2", "nir_left_0", "nir_rear_1", "nir_right_0"]
}

/// Roof-corner LiDAR mounts (sensor -> body, x forward, z up).
pub fn lidar_mounts() -> Vec<RigidPose> {
    [
        Vector3::new(2.0, 1.0, 1.8),
        Vector3::new(2.0, -1.0, 1.8),
        Vector3::new(-2.0, 1.0, 1.8),
        Vector3::new(-2.0, -1.0, 1.8),
    ]
    .into_iter()
    .map(|c| RigidPose::new(UnitQuaternion::identity(), c))
    .collect()
}

/// Small forward-looking stereo rig for unit tests.
pub fn forward_stereo_rig() -> CameraRig {
    let model = CameraModel {
        xi: 0.6,
        gamma1: 95.0,
        gamma2: 95.0,
        u0: 79.5,
        v0: 79.5,
        k1: -0.01,
        k2: 0.001,
        k3: 0.0,
        p1: 2e-4,
        p2: -2e-4,
        width: 160,
        height: 160,
    };
    CameraRig::new(vec![
        RigCamera {
            label: "left".into(),
            model,
            extrinsic: look_extrinsic(Vector3::new(0.0, 0.3, 0.0), Vector3::x()),
        },
        RigCamera {
            label: "right".into(),
            model,
            extrinsic: look_extrinsic(Vector3::new(0.0, -0.3, 0.0), Vector3::x()),
        },
    ])
}
