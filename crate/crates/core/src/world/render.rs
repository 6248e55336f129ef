//! Fisheye raycast renderer. One shared intersection routine feeds the
//! intensity images, the ground-truth depth maps and the dynamic-object
//! silhouettes, so they can never disagree.

use nalgebra::{Vector2, Vector3};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use rayon::prelude::*;

use crate::geom::{CameraModel, CameraRig, RigidPose};
use crate::img::{DepthImage, GrayImage, GRAY_MAX};

use super::scene::{ObjectClass, Scene};

/// Constant intensity assigned to rays that miss all geometry.
pub const SKY_INTENSITY: f64 = 0.05;

/// Global rendering profile; the night analog dims the scene and adds
/// image noise without modeling illumination physics.
#[derive(Debug, Clone, Copy)]
pub struct RenderProfile {
    pub intensity_scale: f64,
    pub noise_sigma: f64,
}

impl RenderProfile {
    pub fn day() -> Self {
        Self {
            intensity_scale: 1.0,
            noise_sigma: 0.0,
        }
    }

    pub fn night_analog() -> Self {
        Self {
            intensity_scale: 0.35,
            noise_sigma: 0.015,
        }
    }
}

impl Default for RenderProfile {
    fn default() -> Self {
        Self::day()
    }
}

/// Cached per-pixel unit rays for one camera model.
pub struct RayGrid {
    pub width: u32,
    pub height: u32,
    rays: Vec<Option<Vector3<f64>>>,
}

impl RayGrid {
    pub fn new(model: &CameraModel) -> Self {
        let rays = (0..model.height as u64 * model.width as u64)
            .into_par_iter()
            .map(|i| {
                let u = (i % model.width as u64) as f64;
                let v = (i / model.width as u64) as f64;
                model.unproject(&Vector2::new(u, v)).ok()
            })
            .collect();
        Self {
            width: model.width,
            height: model.height,
            rays,
        }
    }

    #[inline]
    pub fn ray(&self, u: u32, v: u32) -> Option<Vector3<f64>> {
        self.rays[v as usize * self.width as usize + u as usize]
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum SurfaceRef {
    Quad(usize),
    Object { index: usize, face: u8 },
}

#[derive(Debug, Clone, Copy)]
pub struct Hit {
    /// Distance along the unit ray, meters.
    pub t: f64,
    pub surface: SurfaceRef,
    /// Texture coordinates on the surface, meters.
    pub s: f64,
    pub tt: f64,
}

/// Nearest intersection of a world-frame ray with the scene at `time`.
pub fn raycast(scene: &Scene, origin: &Vector3<f64>, dir: &Vector3<f64>, time: f64) -> Option<Hit> {
    let mut best: Option<Hit> = None;
    let mut consider = |hit: Hit| {
        if best.map_or(true, |b| hit.t < b.t) {
            best = Some(hit);
        }
    };
    for (qi, quad) in scene.quads.iter().enumerate() {
        let n = quad.edge_u.cross(&quad.edge_v);
        let denom = n.dot(dir);
        if denom.abs() < 1e-12 {
            continue;
        }
        let t = n.dot(&(quad.origin - origin)) / denom;
        if t <= 1e-6 {
            continue;
        }
        let p = origin + dir * t;
        let rel = p - quad.origin;
        let a = rel.dot(&quad.edge_u) / quad.edge_u.norm_squared();
        let b = rel.dot(&quad.edge_v) / quad.edge_v.norm_squared();
        if (0.0..=1.0).contains(&a) && (0.0..=1.0).contains(&b) {
            consider(Hit {
                t,
                surface: SurfaceRef::Quad(qi),
                s: a * quad.edge_u.norm(),
                tt: b * quad.edge_v.norm(),
            });
        }
    }
    for (oi, obj) in scene.dynamic_objects.iter().enumerate() {
        let center = obj.center_at(time);
        if let Some(hit) = intersect_box(origin, dir, &center, &obj.half_extents, oi) {
            consider(hit);
        }
    }
    best
}

/// Slab-method ray/axis-aligned-box intersection returning the entry face.
fn intersect_box(
    origin: &Vector3<f64>,
    dir: &Vector3<f64>,
    center: &Vector3<f64>,
    half: &Vector3<f64>,
    index: usize,
) -> Option<Hit> {
    let rel = origin - center;
    let mut t_near = f64::NEG_INFINITY;
    let mut t_far = f64::INFINITY;
    let mut near_axis = 0usize;
    let mut near_sign = 1.0f64;
    for axis in 0..3 {
        if dir[axis].abs() < 1e-12 {
            if rel[axis].abs() > half[axis] {
                return None;
            }
            continue;
        }
        let inv = 1.0 / dir[axis];
        let mut t1 = (-half[axis] - rel[axis]) * inv;
        let mut t2 = (half[axis] - rel[axis]) * inv;
        let mut sign = -1.0;
        if t1 > t2 {
            std::mem::swap(&mut t1, &mut t2);
            sign = 1.0;
        }
        if t1 > t_near {
            t_near = t1;
            near_axis = axis;
            near_sign = sign;
        }
        t_far = t_far.min(t2);
        if t_near > t_far {
            return None;
        }
    }
    if t_near <= 1e-6 || !t_near.is_finite() {
        return None;
    }
    let p = rel + dir * t_near;
    let (a_axis, b_axis) = match near_axis {
        0 => (1, 2),
        1 => (0, 2),
        _ => (0, 1),
    };
    let face = (near_axis * 2) as u8 + if near_sign > 0.0 { 1 } else { 0 };
    Some(Hit {
        t: t_near,
        surface: SurfaceRef::Object { index, face },
        s: p[a_axis] + half[a_axis],
        tt: p[b_axis] + half[b_axis],
    })
}

fn hit_intensity(scene: &Scene, hit: &Hit) -> f64 {
    match hit.surface {
        SurfaceRef::Quad(qi) => scene.quads[qi].texture.intensity(hit.s, hit.tt),
        SurfaceRef::Object { index, face } => {
            let tex = &scene.dynamic_objects[index].texture;
            let face_tex = super::scene::TextureParams {
                seed: tex.seed ^ u64::from(face).wrapping_mul(0x9e37),
                ..*tex
            };
            face_tex.intensity(hit.s, hit.tt)
        }
    }
}

/// One rendered camera view with all ground-truth side channels.
pub struct RenderedView {
    pub image: GrayImage,
    pub depth: DepthImage,
    /// Index into `scene.dynamic_objects` for pixels covered by an object.
    pub object_ids: Vec<Option<u16>>,
}

/// Pixel-space silhouette bounds of one dynamic object in one view.
#[derive(Debug, Clone, Copy)]
pub struct ObjectSilhouette {
    pub object_index: usize,
    pub class: ObjectClass,
    pub min_u: u32,
    pub min_v: u32,
    pub max_u: u32,
    pub max_v: u32,
}

/// Renderer with per-camera ray caches. Rendering is pure: identical inputs
/// give bit-identical images.
pub struct Renderer<'a> {
    pub scene: &'a Scene,
    pub rig: &'a CameraRig,
    pub profile: RenderProfile,
    grids: Vec<RayGrid>,
}

impl<'a> Renderer<'a> {
    pub fn new(scene: &'a Scene, rig: &'a CameraRig, profile: RenderProfile) -> Self {
        let grids = rig.cameras().iter().map(|c| RayGrid::new(&c.model)).collect();
        Self {
            scene,
            rig,
            profile,
            grids,
        }
    }

    /// Renders intensity, depth and object ids in a single raycast pass.
    pub fn render_full(&self, body_pose: &RigidPose, camera_index: usize, time: f64) -> RenderedView {
        let cam = self.rig.camera(camera_index);
        let cam_pose = self.rig.camera_pose_in_world(body_pose, camera_index);
        let origin = cam_pose.translation();
        let rot = cam_pose.rotation();
        let grid = &self.grids[camera_index];
        let (w, h) = (cam.model.width, cam.model.height);

        struct PixelOut {
            intensity: f64,
            depth: f32,
            valid: bool,
            object: Option<u16>,
        }

        let pixels: Vec<PixelOut> = (0..w as u64 * h as u64)
            .into_par_iter()
            .map(|i| {
                let u = (i % w as u64) as u32;
                let v = (i / w as u64) as u32;
                let Some(ray_cam) = grid.ray(u, v) else {
                    return PixelOut {
                        intensity: SKY_INTENSITY,
                        depth: 0.0,
                        valid: false,
                        object: None,
                    };
                };
                let ray_world = rot * ray_cam;
                match raycast(self.scene, &origin, &ray_world, time) {
                    Some(hit) => PixelOut {
                        intensity: hit_intensity(self.scene, &hit),
                        depth: (hit.t * ray_cam[2]) as f32,
                        valid: true,
                        object: match hit.surface {
                            SurfaceRef::Object { index, .. } => Some(index as u16),
                            SurfaceRef::Quad(_) => None,
                        },
                    },
                    None => PixelOut {
                        intensity: SKY_INTENSITY,
                        depth: 0.0,
                        valid: false,
                        object: None,
                    },
                }
            })
            .collect();

        // Image noise is drawn sequentially so the result stays reproducible.
        let mut noise_rng = ChaCha8Rng::seed_from_u64(
            self.scene
                .seed
                .wrapping_mul(0x9e3779b97f4a7c15)
                .wrapping_add((camera_index as u64) << 32)
                .wrapping_add(time.to_bits().rotate_left(17)),
        );
        let normal = Normal::new(0.0, self.profile.noise_sigma.max(1e-300)).unwrap();

        let mut image = GrayImage::new(w, h);
        let mut depth = DepthImage::new_invalid(w, h);
        let mut object_ids = vec![None; pixels.len()];
        for (i, px) in pixels.iter().enumerate() {
            let mut intensity = px.intensity * self.profile.intensity_scale;
            if self.profile.noise_sigma > 0.0 {
                intensity += normal.sample(&mut noise_rng);
            }
            let q = (intensity * f64::from(GRAY_MAX)).round().clamp(0.0, f64::from(GRAY_MAX));
            image.values[i] = q as u16;
            if px.valid {
                depth.depth[i] = px.depth;
                depth.valid[i] = true;
            }
            object_ids[i] = px.object;
        }
        RenderedView {
            image,
            depth,
            object_ids,
        }
    }

    pub fn render_image(&self, body_pose: &RigidPose, camera_index: usize, time: f64) -> GrayImage {
        self.render_full(body_pose, camera_index, time).image
    }

    pub fn ground_truth_depth(
        &self,
        body_pose: &RigidPose,
        camera_index: usize,
        time: f64,
    ) -> DepthImage {
        self.render_full(body_pose, camera_index, time).depth
    }

    /// Axis-aligned bounds of each visible dynamic object's silhouette,
    /// dilated by `margin` pixels and clamped to the image.
    pub fn object_silhouettes(&self, view: &RenderedView, margin: u32) -> Vec<ObjectSilhouette> {
        let w = view.image.width;
        let h = view.image.height;
        let mut bounds: Vec<Option<(u32, u32, u32, u32)>> =
            vec![None; self.scene.dynamic_objects.len()];
        for (i, id) in view.object_ids.iter().enumerate() {
            if let Some(obj) = id {
                let u = (i % w as usize) as u32;
                let v = (i / w as usize) as u32;
                let entry = &mut bounds[*obj as usize];
                match entry {
                    Some((min_u, min_v, max_u, max_v)) => {
                        *min_u = (*min_u).min(u);
                        *min_v = (*min_v).min(v);
                        *max_u = (*max_u).max(u);
                        *max_v = (*max_v).max(v);
                    }
                    None => *entry = Some((u, v, u, v)),
                }
            }
        }
        bounds
            .into_iter()
            .enumerate()
            .filter_map(|(idx, b)| {
                b.map(|(min_u, min_v, max_u, max_v)| ObjectSilhouette {
                    object_index: idx,
                    class: self.scene.dynamic_objects[idx].label,
                    min_u: min_u.saturating_sub(margin),
                    min_v: min_v.saturating_sub(margin),
                    max_u: (max_u + margin).min(w - 1),
                    max_v: (max_v + margin).min(h - 1),
                })
            })
            .collect()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geom::RigCamera;
    use crate::world::scene::{DynamicObject, Quad, TextureParams};

    fn test_rig() -> CameraRig {
        let model = CameraModel::ideal(1.0, 60.0, 64.0, 64.0, 128, 128);
        CameraRig::new(vec![RigCamera {
            label: "front".into(),
            model,
            extrinsic: look_forward_extrinsic(),
        }])
    }

    /// Camera at body origin looking along body +x (z_cam = +x body,
    /// x_cam = -y body, y_cam = -z body).
    fn look_forward_extrinsic() -> RigidPose {
        let rot = nalgebra::UnitQuaternion::from_rotation_matrix(
            &nalgebra::Rotation3::from_matrix_unchecked(nalgebra::Matrix3::new(
                0.0, -1.0, 0.0, //
                0.0, 0.0, -1.0, //
                1.0, 0.0, 0.0,
            )),
        );
        RigidPose::new(rot, Vector3::zeros())
    }

    fn wall_scene(distance: f64) -> Scene {
        Scene {
            quads: vec![
                // Ground far below so it never shows up.
                Quad {
                    origin: Vector3::new(-100.0, -100.0, -50.0),
                    edge_u: Vector3::new(200.0, 0.0, 0.0),
                    edge_v: Vector3::new(0.0, 200.0, 0.0),
                    texture: TextureParams {
                        seed: 1,
                        mean: 0.5,
                        contrast: 0.5,
                        base_scale: 0.4,
                        octaves: 3,
                    },
                },
                // Fronto-parallel wall at x = distance (normal -x toward camera).
                Quad {
                    origin: Vector3::new(distance, -30.0, -30.0),
                    edge_u: Vector3::new(0.0, 60.0, 0.0),
                    edge_v: Vector3::new(0.0, 0.0, 60.0),
                    texture: TextureParams {
                        seed: 2,
                        mean: 0.5,
                        contrast: 0.6,
                        base_scale: 0.4,
                        octaves: 3,
                    },
                },
            ],
            dynamic_objects: vec![],
            seed: 7,
        }
    }

    #[test]
    fn empty_scene_renders_uniform_sky() {
        let scene = Scene {
            quads: vec![],
            dynamic_objects: vec![],
            seed: 0,
        };
        let rig = test_rig();
        let renderer = Renderer::new(&scene, &rig, RenderProfile::day());
        let view = renderer.render_full(&RigidPose::identity(), 0, 0.0);
        let expected = (SKY_INTENSITY * f64::from(GRAY_MAX)).round() as u16;
        assert!(view.image.values.iter().all(|&v| v == expected));
        assert_eq!(view.depth.valid_count(), 0);
    }

    #[test]
    fn wall_depth_matches_analytic_distance() {
        let scene = wall_scene(5.0);
        let rig = test_rig();
        let renderer = Renderer::new(&scene, &rig, RenderProfile::day());
        let view = renderer.render_full(&RigidPose::identity(), 0, 0.0);
        // Center pixel looks straight down +x at the wall 5 m ahead.
        let d = view.depth.depth_at(64, 64).unwrap();
        assert!((f64::from(d) - 5.0).abs() < 1e-6, "depth {d}");
        // Every valid wall pixel has camera-frame z depth exactly 5.
        let mut wall_pixels = 0;
        for v in 0..128 {
            for u in 0..128 {
                if let Some(d) = view.depth.depth_at(u, v) {
                    if (f64::from(d) - 5.0).abs() < 1e-6 {
                        wall_pixels += 1;
                    }
                }
            }
        }
        assert!(wall_pixels > 5000, "only {wall_pixels} wall pixels");
    }

    #[test]
    fn rendering_is_deterministic() {
        let scene = wall_scene(4.0);
        let rig = test_rig();
        let renderer = Renderer::new(&scene, &rig, RenderProfile::night_analog());
        let body = RigidPose::identity();
        let a = renderer.render_image(&body, 0, 0.25);
        let b = renderer.render_image(&body, 0, 0.25);
        assert_eq!(a, b);
    }

    #[test]
    fn dynamic_object_occludes_wall() {
        let mut scene = wall_scene(10.0);
        scene.dynamic_objects.push(DynamicObject {
            half_extents: Vector3::new(0.5, 1.0, 1.0),
            start: Vector3::new(5.0, 0.0, 0.0),
            velocity: Vector3::new(0.0, 1.0, 0.0),
            texture: TextureParams {
                seed: 9,
                mean: 0.8,
                contrast: 0.3,
                base_scale: 1.0,
                octaves: 2,
            },
            label: ObjectClass::Vehicle,
        });
        let rig = test_rig();
        let renderer = Renderer::new(&scene, &rig, RenderProfile::day());
        let view = renderer.render_full(&RigidPose::identity(), 0, 0.0);
        let center = view.depth.depth_at(64, 64).unwrap();
        assert!((f64::from(center) - 4.5).abs() < 1e-6, "object front at 4.5 m, got {center}");
        assert_eq!(view.object_ids[64 * 128 + 64], Some(0));

        // At t = 2 s the object has moved 2 m sideways; the silhouette moves.
        let later = renderer.render_full(&RigidPose::identity(), 0, 2.0);
        let sil0 = renderer.object_silhouettes(&view, 0);
        let sil2 = renderer.object_silhouettes(&later, 0);
        assert_eq!(sil0.len(), 1);
        assert_eq!(sil2.len(), 1);
        assert_ne!(sil0[0].min_u, sil2[0].min_u);
    }

    #[test]
    fn silhouette_bounds_cover_exactly_the_object_pixels() {
        let mut scene = wall_scene(10.0);
        scene.dynamic_objects.push(DynamicObject {
            half_extents: Vector3::new(0.4, 0.6, 0.8),
            start: Vector3::new(6.0, 1.0, 0.2),
            velocity: Vector3::zeros(),
            texture: TextureParams {
                seed: 5,
                mean: 0.7,
                contrast: 0.3,
                base_scale: 1.0,
                octaves: 2,
            },
            label: ObjectClass::Human,
        });
        let rig = test_rig();
        let renderer = Renderer::new(&scene, &rig, RenderProfile::day());
        let view = renderer.render_full(&RigidPose::identity(), 0, 0.0);
        let sil = renderer.object_silhouettes(&view, 0)[0];
        for (i, id) in view.object_ids.iter().enumerate() {
            if id.is_some() {
                let u = (i % 128) as u32;
                let v = (i / 128) as u32;
                assert!(u >= sil.min_u && u <= sil.max_u);
                assert!(v >= sil.min_v && v <= sil.max_v);
            }
        }
        // The bounds are tight: each edge touches at least one object pixel.
        let touches = |pred: &dyn Fn(u32, u32) -> bool| {
            view.object_ids.iter().enumerate().any(|(i, id)| {
                id.is_some() && pred((i % 128) as u32, (i / 128) as u32)
            })
        };
        assert!(touches(&|u, _| u == sil.min_u));
        assert!(touches(&|u, _| u == sil.max_u));
        assert!(touches(&|_, v| v == sil.min_v));
        assert!(touches(&|_, v| v == sil.max_v));
    }
}
