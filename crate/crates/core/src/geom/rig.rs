//! Multi-camera rigs: camera models plus fixed body-frame extrinsics.

use serde::{Deserialize, Serialize};

use super::{CameraModel, RigidPose};

/// One camera of a rig. `extrinsic` maps body-frame points into the camera
/// frame (`p_cam = extrinsic * p_body`).
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct RigCamera {
    pub label: String,
    pub model: CameraModel,
    pub extrinsic: RigidPose,
}

/// Fixed set of cameras; extrinsics are immutable after construction.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct CameraRig {
    cameras: Vec<RigCamera>,
}

impl CameraRig {
    pub fn new(cameras: Vec<RigCamera>) -> Self {
        assert!(!cameras.is_empty(), "a rig needs at least one camera");
        Self { cameras }
    }

    pub fn len(&self) -> usize {
        self.cameras.len()
    }

    pub fn is_empty(&self) -> bool {
        self.cameras.is_empty()
    }

    pub fn camera(&self, index: usize) -> &RigCamera {
        &self.cameras[index]
    }

    pub fn cameras(&self) -> &[RigCamera] {
        &self.cameras
    }

    pub fn index_of(&self, label: &str) -> Option<usize> {
        self.cameras.iter().position(|c| c.label == label)
    }

    /// Camera-in-world pose for a given body-in-world pose:
    /// `T_world_cam = T_world_body * extrinsicᵢ⁻¹`.
    pub fn camera_pose_in_world(&self, body_in_world: &RigidPose, index: usize) -> RigidPose {
        body_in_world.compose(&self.cameras[index].extrinsic.inverse())
    }

    /// Transforms a world point into camera `index` coordinates.
    pub fn world_to_camera(
        &self,
        body_in_world: &RigidPose,
        index: usize,
        p_world: &nalgebra::Vector3<f64>,
    ) -> nalgebra::Vector3<f64> {
        let p_body = body_in_world.inverse().transform_point(p_world);
        self.cameras[index].extrinsic.transform_point(&p_body)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use nalgebra::Vector3;

    #[test]
    fn world_camera_consistency() {
        let cam = CameraModel::ideal(0.5, 300.0, 256.0, 256.0, 512, 512);
        let extrinsic = RigidPose::from_axis_angle(
            Vector3::y(),
            0.4,
            Vector3::new(0.1, -0.2, 0.05),
        );
        let rig = CameraRig::new(vec![RigCamera {
            label: "front".into(),
            model: cam,
            extrinsic,
        }]);
        let body = RigidPose::from_axis_angle(Vector3::z(), 1.1, Vector3::new(5.0, 2.0, 0.0));
        let p_world = Vector3::new(8.0, 3.0, 1.0);

        let direct = rig.world_to_camera(&body, 0, &p_world);
        let via_pose = rig
            .camera_pose_in_world(&body, 0)
            .inverse()
            .transform_point(&p_world);
        assert!((direct - via_pose).norm() < 1e-12);
    }
}
