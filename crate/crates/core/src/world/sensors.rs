//! Simulated LiDAR, gyro and GNSS/INS streams.

use nalgebra::Vector3;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};

use crate::geom::RigidPose;

use super::render::raycast;
use super::scene::Scene;
use super::trajectory::Trajectory;

/// Angular scan pattern: `rings` elevation steps by `azimuths` yaw steps.
#[derive(Debug, Clone, Copy)]
pub struct LidarPattern {
    pub rings: u32,
    pub azimuths: u32,
    pub elevation_min_rad: f64,
    pub elevation_max_rad: f64,
}

impl Default for LidarPattern {
    fn default() -> Self {
        Self {
            rings: 16,
            azimuths: 360,
            elevation_min_rad: -15f64.to_radians(),
            elevation_max_rad: 15f64.to_radians(),
        }
    }
}

/// Ray-casts the pattern from `sensor_pose` (sensor -> world) and returns
/// hit points in the sensor frame with Gaussian range noise.
pub fn simulate_lidar(
    scene: &Scene,
    sensor_pose: &RigidPose,
    pattern: &LidarPattern,
    noise_m: f64,
    seed: u64,
) -> Vec<Vector3<f64>> {
    assert!(pattern.rings > 0 && pattern.azimuths > 0, "pattern must be nonempty");
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let normal = Normal::new(0.0, noise_m.max(1e-300)).unwrap();
    let origin = sensor_pose.translation();
    let mut points = Vec::new();
    for ring in 0..pattern.rings {
        let f = if pattern.rings == 1 {
            0.5
        } else {
            f64::from(ring) / f64::from(pattern.rings - 1)
        };
        let elevation = pattern.elevation_min_rad
            + f * (pattern.elevation_max_rad - pattern.elevation_min_rad);
        for az in 0..pattern.azimuths {
            let theta = 2.0 * std::f64::consts::PI * f64::from(az) / f64::from(pattern.azimuths);
            let dir_sensor = Vector3::new(
                elevation.cos() * theta.cos(),
                elevation.cos() * theta.sin(),
                elevation.sin(),
            );
            let dir_world = sensor_pose.transform_vector(&dir_sensor);
            if let Some(hit) = raycast(scene, &origin, &dir_world, 0.0) {
                let mut range = hit.t;
                if noise_m > 0.0 {
                    range += normal.sample(&mut rng);
                }
                points.push(dir_sensor * range);
            }
        }
    }
    points
}

/// Gyro sample: timestamp and body-frame angular velocity, rad/s.
pub type GyroSample = (f64, Vector3<f64>);

/// Body-frame angular velocity from the interpolated trajectory rotation
/// derivative, plus a constant bias and Gaussian noise.
pub fn simulate_imu(
    trajectory: &Trajectory,
    rate: f64,
    gyro_noise: f64,
    gyro_bias: Vector3<f64>,
    seed: u64,
) -> Vec<GyroSample> {
    assert!(rate >= trajectory.rate, "IMU rate must be >= trajectory rate");
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let normal = Normal::new(0.0, gyro_noise.max(1e-300)).unwrap();
    let duration = trajectory.duration();
    let steps = (duration * rate).round() as usize;
    let h = (0.05 / rate).min(1e-4);
    let mut out = Vec::with_capacity(steps + 1);
    for i in 0..=steps {
        let t = i as f64 / rate;
        let t0 = (t - h).max(0.0);
        let t1 = (t + h).min(duration);
        let r0 = trajectory.pose_at(t0).rotation();
        let r1 = trajectory.pose_at(t1).rotation();
        let delta = r0.inverse() * r1;
        let omega = match delta.axis_angle() {
            Some((axis, angle)) => axis.into_inner() * (angle / (t1 - t0)),
            None => Vector3::zeros(),
        };
        let mut w = omega + gyro_bias;
        if gyro_noise > 0.0 {
            w += Vector3::new(
                normal.sample(&mut rng),
                normal.sample(&mut rng),
                normal.sample(&mut rng),
            );
        }
        out.push((t, w));
    }
    out
}

/// Ground-truth poses perturbed by Gaussian position noise and small random
/// rotations; noise is independent sample to sample.
pub fn simulate_gnss_ins(
    trajectory: &Trajectory,
    pos_noise_m: f64,
    rot_noise_rad: f64,
    seed: u64,
) -> Vec<(f64, RigidPose)> {
    assert!(pos_noise_m >= 0.0 && rot_noise_rad >= 0.0);
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let pos = Normal::new(0.0, pos_noise_m.max(1e-300)).unwrap();
    let rot = Normal::new(0.0, rot_noise_rad.max(1e-300)).unwrap();
    trajectory
        .samples
        .iter()
        .map(|&(t, pose)| {
            let mut p = pose;
            if pos_noise_m > 0.0 || rot_noise_rad > 0.0 {
                let dt = Vector3::new(
                    pos.sample(&mut rng),
                    pos.sample(&mut rng),
                    pos.sample(&mut rng),
                );
                let dw = Vector3::new(
                    rot.sample(&mut rng),
                    rot.sample(&mut rng),
                    rot.sample(&mut rng),
                );
                let twist = nalgebra::Vector6::new(0.0, 0.0, 0.0, dw[0], dw[1], dw[2]);
                p = RigidPose::new(
                    (pose.rotation() * RigidPose::se3_exp(&twist).rotation()).into(),
                    pose.translation() + dt,
                );
            }
            (t, p)
        })
        .collect()
}
