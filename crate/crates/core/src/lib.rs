//! Bidirectional-motion 4D Gaussian fields.
//!
//! A [`Scene`] is a sequence of keyframes, each holding Gaussians anchored at
//! the keyframe time with forward and backward linear and angular velocities.
//! The crate transfers those Gaussians to arbitrary query times, renders them
//! with a tile-based software splatter, simulates the degradation patterns of
//! monocular reconstruction, separates static from dynamic primitives by
//! visibility-gated motion over the whole clip, and reads/writes all of it.

#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod camera;
pub mod degrade;
pub mod dynamics;
pub mod error;
pub mod grid;
pub mod io;
pub mod model;
pub mod motion;
pub mod raster;
pub mod rotation;
pub mod trajectory;

pub use camera::{back_project, project_point, CameraPose, Intrinsics};
pub use error::{Error, FormatError, Result};
pub use grid::Grid;
pub use model::{Gaussian4D, KeyframeField, Scene};
pub use rotation::{axis_angle_to_quat, quat_mul, Quat};

/// World-space 3-vector used throughout the crate.
pub type Vec3 = nalgebra::Vector3<f64>;
/// Pixel-space 2-vector.
pub type Vec2 = nalgebra::Vector2<f64>;
/// 3x3 matrix.
pub type Mat3 = nalgebra::Matrix3<f64>;
