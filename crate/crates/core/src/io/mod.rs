//! File formats, the synthetic scene generator and image metrics.

pub mod image;
pub mod manifest;
pub mod metrics;
pub mod pack;
pub mod ply;
pub mod sidecar;
pub mod synth;

pub use self::image::{
    read_depth_pfm, read_mask_png, read_rgb_png, write_depth_pfm, write_gray_png, write_mask_png, write_plucker_pfm,
    write_rgb_png,
};
pub use manifest::{read_scene, read_trajectory, write_scene, write_trajectory};
pub use metrics::{psnr, ssim};
pub use ply::{read_ply, write_ply};
pub use synth::{synth_scene, GroundTruth, MotionKind, MotionMix, SynthSpec};

use std::path::Path;

use crate::FormatError;

pub(crate) fn write_bytes(path: &Path, bytes: &[u8]) -> Result<(), FormatError> {
    std::fs::write(path, bytes).map_err(|e| FormatError::io(path, e))
}

pub(crate) fn read_bytes(path: &Path) -> Result<Vec<u8>, FormatError> {
    std::fs::read(path).map_err(|e| FormatError::io(path, e))
}

pub(crate) fn create_dir(path: &Path) -> Result<(), FormatError> {
    std::fs::create_dir_all(path).map_err(|e| FormatError::io(path, e))
}
