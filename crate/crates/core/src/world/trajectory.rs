//! Analytic vehicle trajectories with interpolation.

use nalgebra::{UnitQuaternion, Vector3};
use serde::{Deserialize, Serialize};

use crate::geom::RigidPose;

use super::WorldError;

/// Time-ordered body-in-world poses sampled at a fixed rate.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct Trajectory {
    pub samples: Vec<(f64, RigidPose)>,
    pub rate: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub enum TrajectoryKind {
    Straight,
    /// Constant-radius left turn.
    Arc { radius: f64 },
    /// Left arc for the first half, right arc for the second.
    SCurve { radius: f64 },
    /// Closed circle whose circumference equals the requested length.
    Loop,
}

/// Generates a trajectory of the given arc length. The body x-axis stays
/// tangent to the motion (x forward, y left, z up).
pub fn generate_trajectory(
    kind: TrajectoryKind,
    length: f64,
    speed: f64,
    rate: f64,
) -> Result<Trajectory, WorldError> {
    if length <= 0.0 || speed <= 0.0 || rate <= 0.0 {
        return Err(WorldError::InvalidConfig(
            "length, speed and rate must be positive".into(),
        ));
    }
    if let TrajectoryKind::Arc { radius } | TrajectoryKind::SCurve { radius } = kind {
        if radius <= 0.0 {
            return Err(WorldError::InvalidConfig("radius must be positive".into()));
        }
    }
    let duration = length / speed;
    let steps = (duration * rate).round() as usize;
    let mut samples = Vec::with_capacity(steps + 1);
    for i in 0..=steps {
        let t = i as f64 / rate;
        let s = (speed * t).min(length);
        let (position, heading) = pose_on_curve(kind, length, s);
        let rotation = UnitQuaternion::from_axis_angle(&Vector3::z_axis(), heading);
        samples.push((t, RigidPose::new(rotation, position)));
    }
    Ok(Trajectory { samples, rate })
}

/// Position and heading after arc length `s` along the curve.
fn pose_on_curve(kind: TrajectoryKind, total: f64, s: f64) -> (Vector3<f64>, f64) {
    match kind {
        TrajectoryKind::Straight => (Vector3::new(s, 0.0, 0.0), 0.0),
        TrajectoryKind::Arc { radius } => {
            let theta = s / radius;
            (
                Vector3::new(radius * theta.sin(), radius * (1.0 - theta.cos()), 0.0),
                theta,
            )
        }
        TrajectoryKind::SCurve { radius } => {
            let half = total / 2.0;
            if s <= half {
                let theta = s / radius;
                (
                    Vector3::new(radius * theta.sin(), radius * (1.0 - theta.cos()), 0.0),
                    theta,
                )
            } else {
                let theta_half = half / radius;
                let mid = Vector3::new(
                    radius * theta_half.sin(),
                    radius * (1.0 - theta_half.cos()),
                    0.0,
                );
                let phi = (s - half) / radius;
                // Right turn starting from heading theta_half.
                let h0 = theta_half;
                let dx = radius * (h0.sin() - (h0 - phi).sin());
                let dy = radius * ((h0 - phi).cos() - h0.cos());
                (mid + Vector3::new(dx, dy, 0.0), h0 - phi)
            }
        }
        TrajectoryKind::Loop => {
            let radius = total / (2.0 * std::f64::consts::PI);
            let theta = s / radius;
            (
                Vector3::new(radius * theta.sin(), radius * (1.0 - theta.cos()), 0.0),
                theta,
            )
        }
    }
}

impl Trajectory {
    pub fn duration(&self) -> f64 {
        self.samples.last().map(|(t, _)| *t).unwrap_or(0.0)
    }

    /// Linear/slerp interpolated pose; clamps outside the time range.
    pub fn pose_at(&self, t: f64) -> RigidPose {
        let samples = &self.samples;
        if samples.is_empty() {
            return RigidPose::identity();
        }
        if t <= samples[0].0 {
            return samples[0].1;
        }
        if t >= samples[samples.len() - 1].0 {
            return samples[samples.len() - 1].1;
        }
        let idx = samples
            .partition_point(|(ts, _)| *ts <= t)
            .min(samples.len() - 1);
        let (t0, p0) = samples[idx - 1];
        let (t1, p1) = samples[idx];
        let alpha = (t - t0) / (t1 - t0);
        let translation = p0.translation() * (1.0 - alpha) + p1.translation() * alpha;
        let rotation = p0.rotation().slerp(&p1.rotation(), alpha);
        RigidPose::new(rotation, translation)
    }

    pub fn path_length(&self) -> f64 {
        self.samples
            .windows(2)
            .map(|w| w[0].1.translation_distance_to(&w[1].1))
            .sum()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    #[test]
    fn straight_run_lands_at_length() {
        let tr = generate_trajectory(TrajectoryKind::Straight, 100.0, 10.0, 10.0).unwrap();
        assert_eq!(tr.samples.len(), 101);
        let last = tr.samples.last().unwrap().1;
        assert!((last.translation() - Vector3::new(100.0, 0.0, 0.0)).norm() < 1e-9);
    }

    #[test]
    fn loop_closes() {
        let tr = generate_trajectory(TrajectoryKind::Loop, 200.0, 5.0, 20.0).unwrap();
        let first = tr.samples.first().unwrap().1;
        let last = tr.samples.last().unwrap().1;
        assert!(first.translation_distance_to(&last) < 1e-9);
        assert!(first.rotation_angle_to(&last) < 1e-9);
    }

    #[test]
    fn arc_heading_matches_arclength_over_radius() {
        let radius = 30.0;
        let tr = generate_trajectory(TrajectoryKind::Arc { radius }, 60.0, 6.0, 10.0).unwrap();
        let last = tr.samples.last().unwrap().1;
        let expected = 60.0 / radius;
        assert_relative_eq!(last.rotation().angle(), expected, epsilon = 1e-9);
    }

    #[test]
    fn s_curve_is_continuous() {
        let tr = generate_trajectory(TrajectoryKind::SCurve { radius: 25.0 }, 100.0, 5.0, 50.0)
            .unwrap();
        for w in tr.samples.windows(2) {
            let step = w[0].1.translation_distance_to(&w[1].1);
            assert!(step < 0.2, "discontinuity: {step}");
        }
        // Net heading change of a symmetric s-curve is zero.
        let last = tr.samples.last().unwrap().1;
        assert!(last.rotation().angle() < 1e-9);
    }

    #[test]
    fn body_x_axis_is_tangent() {
        let tr = generate_trajectory(TrajectoryKind::Arc { radius: 20.0 }, 40.0, 4.0, 20.0).unwrap();
        for w in tr.samples.windows(2) {
            let dir = (w[1].1.translation() - w[0].1.translation()).normalize();
            let fwd = w[0].1.transform_vector(&Vector3::x());
            assert!(dir.dot(&fwd) > 0.99);
        }
    }

    #[test]
    fn interpolation_hits_samples() {
        let tr = generate_trajectory(TrajectoryKind::Arc { radius: 10.0 }, 20.0, 2.0, 5.0).unwrap();
        for &(t, pose) in &tr.samples {
            let p = tr.pose_at(t);
            assert!(pose.translation_distance_to(&p) < 1e-12);
        }
        let mid = tr.pose_at(0.1);
        assert!(mid.translation_distance_to(&tr.samples[0].1) > 0.0);
    }
}
