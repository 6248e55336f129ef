//! Truncated signed distance volume: projective integration of depth
//! images and raycast surface extraction.

use nalgebra::{Vector2, Vector3};
use rayon::prelude::*;

use crate::geom::{CameraModel, RigidPose};
use crate::img::DepthImage;

#[derive(Debug, Clone, Copy)]
pub struct TsdfVolumeConfig {
    pub origin: Vector3<f64>,
    pub voxel_size: f64,
    pub dims: (usize, usize, usize),
    /// Truncation distance; defaults to 4 voxel sizes when `None`.
    pub truncation: Option<f64>,
    pub max_weight: f32,
}

impl TsdfVolumeConfig {
    pub fn new(origin: Vector3<f64>, voxel_size: f64, dims: (usize, usize, usize)) -> Self {
        Self {
            origin,
            voxel_size,
            dims,
            truncation: None,
            max_weight: 64.0,
        }
    }
}

/// Dense axis-aligned voxel grid of (tsdf, weight) pairs. The signed
/// distance is measured along the camera ray's z (projective TSDF),
/// negative inside objects, positive outside, zero on surfaces, clamped
/// to the truncation band.
#[derive(Debug, Clone)]
pub struct TsdfVolume {
    pub origin: Vector3<f64>,
    pub voxel_size: f64,
    pub dims: (usize, usize, usize),
    pub truncation: f64,
    pub max_weight: f32,
    pub tsdf: Vec<f32>,
    pub weight: Vec<f32>,
}

impl TsdfVolume {
    pub fn new(config: &TsdfVolumeConfig) -> Self {
        let n = config.dims.0 * config.dims.1 * config.dims.2;
        Self {
            origin: config.origin,
            voxel_size: config.voxel_size,
            dims: config.dims,
            truncation: config.truncation.unwrap_or(4.0 * config.voxel_size),
            max_weight: config.max_weight,
            tsdf: vec![0.0; n],
            weight: vec![0.0; n],
        }
    }

    #[inline]
    pub fn index(&self, x: usize, y: usize, z: usize) -> usize {
        x + self.dims.0 * (y + self.dims.1 * z)
    }

    #[inline]
    pub fn voxel_center(&self, x: usize, y: usize, z: usize) -> Vector3<f64> {
        self.origin
            + Vector3::new(
                (x as f64 + 0.5) * self.voxel_size,
                (y as f64 + 0.5) * self.voxel_size,
                (z as f64 + 0.5) * self.voxel_size,
            )
    }

    /// Trilinear TSDF sample at a world point; `None` when any of the eight
    /// surrounding voxels is unobserved or out of bounds.
    pub fn sample(&self, p: &Vector3<f64>) -> Option<f64> {
        let g = (p - self.origin) / self.voxel_size - Vector3::new(0.5, 0.5, 0.5);
        let (gx, gy, gz) = (g[0], g[1], g[2]);
        if !(gx >= 0.0 && gy >= 0.0 && gz >= 0.0) {
            return None;
        }
        let (x0, y0, z0) = (gx.floor() as usize, gy.floor() as usize, gz.floor() as usize);
        if x0 + 1 >= self.dims.0 || y0 + 1 >= self.dims.1 || z0 + 1 >= self.dims.2 {
            return None;
        }
        let (fx, fy, fz) = (gx - x0 as f64, gy - y0 as f64, gz - z0 as f64);
        let mut value = 0.0;
        for dz in 0..2 {
            for dy in 0..2 {
                for dx in 0..2 {
                    let idx = self.index(x0 + dx, y0 + dy, z0 + dz);
                    if self.weight[idx] <= 0.0 {
                        return None;
                    }
                    let w = (if dx == 0 { 1.0 - fx } else { fx })
                        * (if dy == 0 { 1.0 - fy } else { fy })
                        * (if dz == 0 { 1.0 - fz } else { fz });
                    value += w * f64::from(self.tsdf[idx]);
                }
            }
        }
        Some(value)
    }

    /// Count of voxels with weight above zero and |tsdf| below the given
    /// fraction of the truncation (near-surface voxels).
    pub fn surface_voxel_count(&self, tsdf_fraction: f64) -> usize {
        let band = (self.truncation * tsdf_fraction) as f32;
        self.tsdf
            .iter()
            .zip(&self.weight)
            .filter(|(t, w)| **w > 0.0 && t.abs() < band)
            .count()
    }
}

/// Integrates one depth image taken from `cam_pose` (camera -> world) into
/// the volume: for every voxel in the frustum the projective signed
/// distance `d(pixel) - z_voxel` is truncated and fused by weighted
/// averaging with unit sample weight.
pub fn tsdf_integrate(
    volume: &mut TsdfVolume,
    depth: &DepthImage,
    cam: &CameraModel,
    cam_pose_world: &RigidPose,
) {
    let world_to_cam = cam_pose_world.inverse();
    let tau = volume.truncation;
    let (nx, ny, _nz) = volume.dims;
    let max_weight = volume.max_weight;
    let origin = volume.origin;
    let voxel = volume.voxel_size;

    // Parallel over z-slabs: each slab owns a disjoint slice of the grid.
    let slab = nx * ny;
    volume
        .tsdf
        .par_chunks_mut(slab)
        .zip(volume.weight.par_chunks_mut(slab))
        .enumerate()
        .for_each(|(z, (tsdf_slab, weight_slab))| {
            for y in 0..ny {
                for x in 0..nx {
                    let center = origin
                        + Vector3::new(
                            (x as f64 + 0.5) * voxel,
                            (y as f64 + 0.5) * voxel,
                            (z as f64 + 0.5) * voxel,
                        );
                    let p_cam = world_to_cam.transform_point(&center);
                    if p_cam[2] <= 1e-6 {
                        continue;
                    }
                    let Ok(px) = cam.project(&p_cam) else { continue };
                    let u = px[0].round();
                    let v = px[1].round();
                    if u < 0.0
                        || v < 0.0
                        || u > f64::from(cam.width - 1)
                        || v > f64::from(cam.height - 1)
                    {
                        continue;
                    }
                    let i = depth.idx(u as u32, v as u32);
                    if !depth.valid[i] {
                        continue;
                    }
                    let sdf = f64::from(depth.depth[i]) - p_cam[2];
                    if sdf < -tau {
                        continue;
                    }
                    let s = sdf.clamp(-tau, tau) as f32;
                    let idx = x + nx * y;
                    let w = weight_slab[idx];
                    tsdf_slab[idx] = (tsdf_slab[idx] * w + s) / (w + 1.0);
                    weight_slab[idx] = (w + 1.0).min(max_weight);
                }
            }
        });
}

/// Raycasts the volume from a camera: marches each pixel ray in steps of
/// 0.75 * truncation through observed voxels and locates the +/- zero
/// crossing by linear interpolation of trilinear samples. Depths are
/// z-coordinates in the camera frame, like every other `DepthImage`.
pub fn raycast_volume(
    volume: &TsdfVolume,
    cam: &CameraModel,
    cam_pose_world: &RigidPose,
) -> DepthImage {
    let (w, h) = (cam.width, cam.height);
    let origin = cam_pose_world.translation();
    let rot = cam_pose_world.rotation();
    let step = 0.75 * volume.truncation;
    let extent = Vector3::new(
        volume.dims.0 as f64,
        volume.dims.1 as f64,
        volume.dims.2 as f64,
    ) * volume.voxel_size;
    let t_max = (extent.norm() + (volume.origin - origin).norm()) * 1.05;

    let results: Vec<Option<(f32, f64)>> = (0..w as usize * h as usize)
        .into_par_iter()
        .map(|i| {
            let u = (i % w as usize) as f64;
            let v = (i / w as usize) as f64;
            let ray_cam = cam.unproject(&Vector2::new(u, v)).ok()?;
            let dir = rot * ray_cam;
            let mut t = volume.voxel_size;
            let mut prev: Option<(f64, f64)> = None;
            while t < t_max {
                let p = origin + dir * t;
                match volume.sample(&p) {
                    Some(value) => {
                        if let Some((t_prev, v_prev)) = prev {
                            if v_prev > 0.0 && value <= 0.0 {
                                let alpha = v_prev / (v_prev - value);
                                let t_cross = t_prev + alpha * (t - t_prev);
                                let depth = t_cross * ray_cam[2];
                                if depth > 0.0 {
                                    return Some((depth as f32, value));
                                }
                                return None;
                            }
                        }
                        prev = Some((t, value));
                        // Inside the positive band we can skip proportionally
                        // to the distance from the surface.
                        t += if value > volume.truncation * 0.9 {
                            step.max(value * 0.5)
                        } else {
                            step * 0.5
                        };
                    }
                    None => {
                        prev = None;
                        t += step;
                    }
                }
            }
            None
        })
        .collect();

    let mut out = DepthImage::new_invalid(w, h);
    for (i, r) in results.iter().enumerate() {
        if let Some((d, _)) = r {
            out.depth[i] = *d;
            out.valid[i] = true;
        }
    }
    out
}
