//! Synthetic scene geometry: textured quads, a mandatory ground plane and
//! translating box-shaped dynamic objects.

use nalgebra::Vector3;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::noise::fractal_noise;
use super::WorldError;

/// Procedural texture parameters for one surface.
#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
pub struct TextureParams {
    pub seed: u64,
    /// Mean intensity in [0, 1].
    pub mean: f64,
    /// Peak-to-peak contrast around the mean.
    pub contrast: f64,
    /// Base noise frequency, cycles per meter.
    pub base_scale: f64,
    pub octaves: u32,
}

impl TextureParams {
    /// Intensity in [0, 1] at surface coordinates (meters).
    pub fn intensity(&self, s: f64, t: f64) -> f64 {
        let n = fractal_noise(s, t, self.base_scale, self.octaves, self.seed);
        (self.mean + (n - 0.5) * self.contrast).clamp(0.0, 1.0)
    }
}

/// Textured rectangle: `origin + a*edge_u + b*edge_v` for a, b in [0, 1].
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct Quad {
    pub origin: Vector3<f64>,
    pub edge_u: Vector3<f64>,
    pub edge_v: Vector3<f64>,
    pub texture: TextureParams,
}

impl Quad {
    pub fn normal(&self) -> Vector3<f64> {
        self.edge_u.cross(&self.edge_v).normalize()
    }

    pub fn center(&self) -> Vector3<f64> {
        self.origin + 0.5 * self.edge_u + 0.5 * self.edge_v
    }

    pub fn area(&self) -> f64 {
        self.edge_u.cross(&self.edge_v).norm()
    }

    /// Point at local coordinates (a, b) in [0, 1]^2.
    pub fn point_at(&self, a: f64, b: f64) -> Vector3<f64> {
        self.origin + a * self.edge_u + b * self.edge_v
    }
}

/// Axis-aligned box translating along a straight line, textured per face.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct DynamicObject {
    pub half_extents: Vector3<f64>,
    /// Center position at t = 0.
    pub start: Vector3<f64>,
    /// Linear velocity, m/s.
    pub velocity: Vector3<f64>,
    pub texture: TextureParams,
    pub label: ObjectClass,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum ObjectClass {
    Human,
    Vehicle,
}

impl DynamicObject {
    pub fn center_at(&self, time: f64) -> Vector3<f64> {
        self.start + self.velocity * time
    }
}

/// Deterministic synthetic environment. `quads[0]` is the ground plane.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct Scene {
    pub quads: Vec<Quad>,
    pub dynamic_objects: Vec<DynamicObject>,
    pub seed: u64,
}

/// Corridor-style scene layout parameters.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SceneConfig {
    /// Corridor extent along +x, meters (facades cover [x_start, x_start+length]).
    pub corridor_length: f64,
    pub corridor_start_x: f64,
    /// Full corridor width; facades sit at y = +-width/2.
    pub corridor_width: f64,
    /// Number of facade quads per side.
    pub facade_count: u32,
    pub facade_height: f64,
    /// Ground plane half-extent, meters.
    pub ground_half_extent: f64,
    pub mean_intensity: f64,
    pub contrast: f64,
    pub texture_base_scale: f64,
    pub texture_octaves: u32,
    /// Facades whose center x falls in this range get zero contrast
    /// (deliberate low-texture region for invalid-pixel tests).
    pub matte_span_x: Option<(f64, f64)>,
    pub dynamic_objects: Vec<DynamicObject>,
}

impl Default for SceneConfig {
    fn default() -> Self {
        Self {
            corridor_length: 120.0,
            corridor_start_x: -10.0,
            corridor_width: 8.0,
            facade_count: 24,
            facade_height: 5.0,
            ground_half_extent: 400.0,
            mean_intensity: 0.55,
            contrast: 0.75,
            texture_base_scale: 0.35,
            texture_octaves: 3,
            matte_span_x: None,
            dynamic_objects: Vec::new(),
        }
    }
}

/// Builds the corridor scene: a ground plane plus `facade_count` vertical
/// quads per side flanking the corridor. Deterministic in (config, seed).
pub fn generate_scene(config: &SceneConfig, seed: u64) -> Result<Scene, WorldError> {
    if config.corridor_length <= 0.0
        || config.corridor_width <= 0.0
        || config.facade_height <= 0.0
        || config.ground_half_extent <= 0.0
    {
        return Err(WorldError::InvalidConfig(
            "corridor extents must be positive".into(),
        ));
    }
    if !(0.0..=1.0).contains(&config.mean_intensity) || config.contrast < 0.0 {
        return Err(WorldError::InvalidConfig(
            "texture parameters out of range".into(),
        ));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed ^ 0x5ce9e);
    let mut quads = Vec::new();

    let tex = |rng: &mut ChaCha8Rng, contrast: f64| TextureParams {
        seed: rng.gen(),
        mean: config.mean_intensity,
        contrast,
        base_scale: config.texture_base_scale,
        octaves: config.texture_octaves,
    };

    // Ground plane at z = 0, normal +z.
    let g = config.ground_half_extent;
    quads.push(Quad {
        origin: Vector3::new(-g, -g, 0.0),
        edge_u: Vector3::new(2.0 * g, 0.0, 0.0),
        edge_v: Vector3::new(0.0, 2.0 * g, 0.0),
        texture: tex(&mut rng, config.contrast),
    });

    let half_width = config.corridor_width / 2.0;
    if config.facade_count > 0 {
        let span = config.corridor_length / f64::from(config.facade_count);
        for side in [-1.0, 1.0] {
            for i in 0..config.facade_count {
                let x0 = config.corridor_start_x + f64::from(i) * span;
                let jitter = rng.gen::<f64>() * 0.2 * span;
                let width = span - jitter;
                let height = config.facade_height * (0.8 + 0.4 * rng.gen::<f64>());
                let center_x = x0 + width / 2.0;
                let contrast = match config.matte_span_x {
                    Some((lo, hi)) if center_x >= lo && center_x <= hi => 0.0,
                    _ => config.contrast,
                };
                // Vertical quad in the x-z plane at y = side * half_width,
                // edge_u along +x, edge_v along +z.
                quads.push(Quad {
                    origin: Vector3::new(x0, side * half_width, 0.0),
                    edge_u: Vector3::new(width, 0.0, 0.0),
                    edge_v: Vector3::new(0.0, 0.0, height),
                    texture: tex(&mut rng, contrast),
                });
            }
        }
    }

    Ok(Scene {
        quads,
        dynamic_objects: config.dynamic_objects.clone(),
        seed,
    })
}
