//! Dynamic-object masking of depth images.

use crate::img::DepthImage;
use crate::world::ObjectClass;

/// Axis-aligned 2D detection box in one camera, clamped to the image.
#[derive(Debug, Clone, Copy)]
pub struct BoundingBox2D {
    pub camera_index: usize,
    pub min_u: u32,
    pub min_v: u32,
    pub max_u: u32,
    pub max_v: u32,
    pub class: ObjectClass,
}

impl BoundingBox2D {
    /// Clamps corners to the image and orders them; panics on empty boxes.
    pub fn clamped(
        camera_index: usize,
        min: (u32, u32),
        max: (u32, u32),
        width: u32,
        height: u32,
        class: ObjectClass,
    ) -> Self {
        assert!(min.0 <= max.0 && min.1 <= max.1, "box corners must be ordered");
        Self {
            camera_index,
            min_u: min.0.min(width - 1),
            min_v: min.1.min(height - 1),
            max_u: max.0.min(width - 1),
            max_v: max.1.min(height - 1),
            class,
        }
    }

    pub fn contains(&self, u: u32, v: u32) -> bool {
        u >= self.min_u && u <= self.max_u && v >= self.min_v && v <= self.max_v
    }
}

/// Invalidates every depth pixel inside any of the boxes; all other pixels
/// are left untouched.
pub fn mask_dynamic(depth: &DepthImage, boxes: &[BoundingBox2D]) -> DepthImage {
    let mut out = depth.clone();
    for b in boxes {
        for v in b.min_v..=b.max_v.min(depth.height - 1) {
            for u in b.min_u..=b.max_u.min(depth.width - 1) {
                out.invalidate(u, v);
            }
        }
    }
    out
}
