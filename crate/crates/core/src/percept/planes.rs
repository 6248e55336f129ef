//! Depth-hypothesis plane sets for the sweep.

use crate::geom::Plane3;
use nalgebra::Vector3;

use super::{PerceptError, PerceptResult};

/// Fronto-parallel planes in the reference camera frame with inverse depths
/// sampled uniformly on [1/z_max, 1/z_min]; planes are ordered by
/// increasing depth (decreasing inverse depth).
#[derive(Debug, Clone)]
pub struct PlaneSet {
    pub planes: Vec<Plane3>,
    pub z_min: f64,
    pub z_max: f64,
}

impl PlaneSet {
    pub fn len(&self) -> usize {
        self.planes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.planes.is_empty()
    }

    pub fn depth(&self, index: usize) -> f64 {
        self.planes[index].distance()
    }

    pub fn inverse_depth(&self, index: usize) -> f64 {
        1.0 / self.depth(index)
    }

    /// Uniform inverse-depth spacing between consecutive planes.
    pub fn inverse_depth_step(&self) -> f64 {
        if self.planes.len() < 2 {
            return 0.0;
        }
        (1.0 / self.z_min - 1.0 / self.z_max) / (self.planes.len() - 1) as f64
    }
}

pub fn build_plane_set(z_min: f64, z_max: f64, count: usize) -> PerceptResult<PlaneSet> {
    if !(z_min > 0.0) || !z_max.is_finite() || z_min >= z_max {
        return Err(PerceptError::InvalidRange(format!(
            "need 0 < z_min < z_max < inf, got [{z_min}, {z_max}]"
        )));
    }
    if count < 2 {
        return Err(PerceptError::InvalidRange(format!(
            "need at least 2 planes, got {count}"
        )));
    }
    let inv_min = 1.0 / z_max;
    let inv_max = 1.0 / z_min;
    let planes = (0..count)
        .map(|i| {
            let inv = inv_max + (inv_min - inv_max) * i as f64 / (count - 1) as f64;
            Plane3::new(Vector3::z(), 1.0 / inv)
        })
        .collect();
    Ok(PlaneSet {
        planes,
        z_min,
        z_max,
    })
}
