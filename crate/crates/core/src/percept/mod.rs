//! Perception: plane-sweeping stereo on raw fisheye images, dynamic-object
//! masking, TSDF fusion and raycast surface extraction.

mod mask;
mod planes;
mod sweep;
mod tsdf;

pub mod pipeline;

pub use crate::img::DepthImage;
pub use mask::{mask_dynamic, BoundingBox2D};
pub use planes::{build_plane_set, PlaneSet};
pub use sweep::{plane_sweep, plane_sweep_sparse, SweepOptions, SweepView};
pub use tsdf::{raycast_volume, tsdf_integrate, TsdfVolume, TsdfVolumeConfig};

use thiserror::Error;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum PerceptError {
    #[error("invalid depth range: {0}")]
    InvalidRange(String),
    #[error("plane sweep needs at least one non-reference view")]
    NoViews,
    #[error("frame {frame}: {source}")]
    Stage {
        frame: usize,
        #[source]
        source: Box<PerceptError>,
    },
}

pub type PerceptResult<T> = Result<T, PerceptError>;
