//! Directory layouts for rendered frames and degradation packs.
//!
//! Frame `i` of a render directory is `frame_{i:04}_rgb.png`,
//! `frame_{i:04}_depth.pfm` and `frame_{i:04}_opacity.png`. A degradation
//! pack adds `_mask.png`, `_plucker_dir.pfm` and `_plucker_moment.pfm` per
//! frame and a `pack.json` manifest.

use std::path::Path;

use serde::{Deserialize, Serialize};

use super::image::{write_depth_pfm, write_gray_png, write_mask_png, write_plucker_pfm, write_rgb_png};
use super::manifest::{write_json, write_trajectory, FORMAT_VERSION};
use crate::degrade::DegradationPack;
use crate::raster::RenderTarget;
use crate::{CameraPose, Result};

pub const PACK_FORMAT: &str = "splat4d-degradation";

pub fn frame_stem(index: usize) -> String {
    format!("frame_{index:04}")
}

/// Writes the rgb, depth and opacity buffers of one rendered frame.
pub fn write_render_frame(dir: &Path, index: usize, target: &RenderTarget) -> Result<()> {
    let stem = frame_stem(index);
    write_rgb_png(&dir.join(format!("{stem}_rgb.png")), &target.rgb)?;
    write_depth_pfm(&dir.join(format!("{stem}_depth.pfm")), &target.depth)?;
    write_gray_png(&dir.join(format!("{stem}_opacity.png")), &target.acc_opacity)?;
    Ok(())
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct PackFrameEntry {
    pub time: f64,
    pub original_pose: CameraPose,
    pub novel_pose: CameraPose,
    pub culled: usize,
    pub mean_displacement: f64,
    pub rgb: String,
    pub depth: String,
    pub mask: String,
    pub plucker_dir: String,
    pub plucker_moment: String,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct PackManifest {
    pub format: String,
    pub version: u32,
    pub mode: String,
    pub kernel: usize,
    pub seed: u64,
    pub novel_trajectory: String,
    pub frames: Vec<PackFrameEntry>,
}

/// Writes every frame of `pack` plus `pack.json` and `novel_trajectory.json`.
pub fn write_degradation_pack(dir: &Path, pack: &DegradationPack, mode: &str, kernel: usize, seed: u64) -> Result<()> {
    super::create_dir(dir)?;
    let mut frames = Vec::with_capacity(pack.frames.len());
    for (i, f) in pack.frames.iter().enumerate() {
        let stem = frame_stem(i);
        let entry = PackFrameEntry {
            time: f.time,
            original_pose: f.original_pose,
            novel_pose: f.novel_pose,
            culled: f.culled,
            mean_displacement: f.mean_displacement,
            rgb: format!("{stem}_rgb.png"),
            depth: format!("{stem}_depth.pfm"),
            mask: format!("{stem}_mask.png"),
            plucker_dir: format!("{stem}_plucker_dir.pfm"),
            plucker_moment: format!("{stem}_plucker_moment.pfm"),
        };
        write_rgb_png(&dir.join(&entry.rgb), &f.rgb)?;
        write_depth_pfm(&dir.join(&entry.depth), &f.depth)?;
        write_mask_png(&dir.join(&entry.mask), &f.mask)?;
        write_plucker_pfm(
            &dir.join(&entry.plucker_dir),
            &dir.join(&entry.plucker_moment),
            &f.plucker,
        )?;
        frames.push(entry);
    }
    let novel_trajectory = "novel_trajectory.json".to_string();
    write_trajectory(&dir.join(&novel_trajectory), &pack.novel)?;
    let manifest = PackManifest {
        format: PACK_FORMAT.into(),
        version: FORMAT_VERSION,
        mode: mode.into(),
        kernel,
        seed,
        novel_trajectory,
        frames,
    };
    write_json(&dir.join("pack.json"), &manifest)?;
    Ok(())
}
