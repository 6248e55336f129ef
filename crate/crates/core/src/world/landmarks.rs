//! Synthetic landmarks with descriptors. These replace a feature detector:
//! geometry comes from the scene surfaces and every landmark carries a
//! seeded descriptor so matching has a ground-truth answer.

use nalgebra::{Vector2, Vector3};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};

use crate::geom::{CameraRig, RigidPose};

use super::render::raycast;
use super::scene::Scene;

/// Descriptor length used by the synthetic feature pipeline.
pub const DESCRIPTOR_DIM: usize = 32;

#[derive(Debug, Clone)]
pub struct Landmark {
    pub position: Vector3<f64>,
    pub descriptor: Vec<f32>,
}

/// Samples `count` landmarks on scene quad surfaces (area-weighted), each
/// with a unit-norm seeded descriptor. Points sit a hair off the surface so
/// the visibility raycast hits the surface right behind them.
pub fn sample_landmarks(scene: &Scene, count: usize, seed: u64) -> Vec<Landmark> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed ^ 0x1a2b);
    let areas: Vec<f64> = scene.quads.iter().map(|q| q.area()).collect();
    let total: f64 = areas.iter().sum();
    let mut out = Vec::with_capacity(count);
    for _ in 0..count {
        let mut pick = rng.gen::<f64>() * total;
        let mut qi = 0;
        for (i, a) in areas.iter().enumerate() {
            if pick <= *a {
                qi = i;
                break;
            }
            pick -= a;
        }
        let quad = &scene.quads[qi];
        let a = rng.gen::<f64>();
        let b = rng.gen::<f64>();
        let position = quad.point_at(a, b) + quad.normal() * 1e-4;
        let mut descriptor: Vec<f32> = (0..DESCRIPTOR_DIM)
            .map(|_| rng.gen::<f32>() * 2.0 - 1.0)
            .collect();
        let norm = descriptor.iter().map(|x| x * x).sum::<f32>().sqrt();
        descriptor.iter_mut().for_each(|x| *x /= norm);
        out.push(Landmark {
            position,
            descriptor,
        });
    }
    out
}

/// One simulated feature observation in one camera.
#[derive(Debug, Clone)]
pub struct Feature {
    pub pixel: Vector2<f64>,
    pub descriptor: Vec<f32>,
    /// Ground-truth landmark index; `None` for decoys. Test oracles only —
    /// the reconstruction pipeline never reads it.
    pub landmark_id: Option<usize>,
}

#[derive(Debug, Clone, Copy)]
pub struct FeatureNoise {
    pub pixel_sigma: f64,
    pub descriptor_sigma: f32,
    /// Fraction of decoy features added per camera, relative to the number
    /// of true observations.
    pub decoy_fraction: f64,
}

impl FeatureNoise {
    pub fn noiseless() -> Self {
        Self {
            pixel_sigma: 0.0,
            descriptor_sigma: 0.0,
            decoy_fraction: 0.0,
        }
    }
}

/// Projects visible landmarks into every camera of the rig at `body_pose`.
/// Occlusion is decided with the shared scene raycaster. Returns one feature
/// list per camera.
pub fn simulate_features(
    scene: &Scene,
    landmarks: &[Landmark],
    rig: &CameraRig,
    body_pose: &RigidPose,
    noise: &FeatureNoise,
    seed: u64,
) -> Vec<Vec<Feature>> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let px_noise = Normal::new(0.0, noise.pixel_sigma.max(1e-300)).unwrap();
    let desc_noise = Normal::new(0.0, f64::from(noise.descriptor_sigma.max(1e-30))).unwrap();
    let mut per_camera = Vec::with_capacity(rig.len());
    for ci in 0..rig.len() {
        let cam = rig.camera(ci);
        let cam_pose = rig.camera_pose_in_world(body_pose, ci);
        let origin = cam_pose.translation();
        let world_to_cam = cam_pose.inverse();
        let mut features = Vec::new();
        for (li, lm) in landmarks.iter().enumerate() {
            let p_cam = world_to_cam.transform_point(&lm.position);
            let Ok(mut pixel) = cam.model.project(&p_cam) else {
                continue;
            };
            if !cam.model.in_bounds(&pixel) {
                continue;
            }
            // Occlusion: the nearest scene hit along the ray must be the
            // surface carrying this landmark.
            let dir = (lm.position - origin).normalize();
            let dist = (lm.position - origin).norm();
            if let Some(hit) = raycast(scene, &origin, &dir, 0.0) {
                if hit.t < dist - 1e-3 {
                    continue;
                }
            }
            if noise.pixel_sigma > 0.0 {
                pixel[0] += px_noise.sample(&mut rng);
                pixel[1] += px_noise.sample(&mut rng);
            }
            let mut descriptor = lm.descriptor.clone();
            if noise.descriptor_sigma > 0.0 {
                for d in descriptor.iter_mut() {
                    *d += desc_noise.sample(&mut rng) as f32;
                }
                let n = descriptor.iter().map(|x| x * x).sum::<f32>().sqrt();
                descriptor.iter_mut().for_each(|x| *x /= n);
            }
            features.push(Feature {
                pixel,
                descriptor,
                landmark_id: Some(li),
            });
        }
        let decoys = (features.len() as f64 * noise.decoy_fraction).round() as usize;
        for _ in 0..decoys {
            let pixel = Vector2::new(
                rng.gen::<f64>() * f64::from(cam.model.width - 1),
                rng.gen::<f64>() * f64::from(cam.model.height - 1),
            );
            let mut descriptor: Vec<f32> = (0..DESCRIPTOR_DIM)
                .map(|_| rng.gen::<f32>() * 2.0 - 1.0)
                .collect();
            let n = descriptor.iter().map(|x| x * x).sum::<f32>().sqrt();
            descriptor.iter_mut().for_each(|x| *x /= n);
            features.push(Feature {
                pixel,
                descriptor,
                landmark_id: None,
            });
        }
        per_camera.push(features);
    }
    per_camera
}
