//! Vision-only vehicle localization and perception at desk scale.
//!
//! The crate is organised around a deterministic synthetic world ([`world`])
//! that provides ground truth for every downstream stage: multi-sensor
//! calibration ([`calib`]), direct multi-camera odometry ([`odom`]),
//! satellite-prior particle-filter localization ([`satloc`]), sparse-map
//! reconstruction and 6-DoF localization ([`maploc`]), and fisheye
//! plane-sweep stereo plus TSDF fusion ([`percept`]). The [`harness`] module
//! ties the stages together behind file-based dataset interfaces and the
//! `avk` command line tool.

pub mod geom;
pub mod img;
pub mod solver;
pub mod world;
pub mod calib;
// pub mod odom;
// pub mod satloc;
// pub mod maploc;
pub mod percept;
// pub mod harness;
