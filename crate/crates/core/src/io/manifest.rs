//! Scene manifests and trajectory files (JSON).

use std::path::{Path, PathBuf};

use serde::{de::DeserializeOwned, Deserialize, Serialize};

use super::ply::{read_ply, write_ply};
use crate::trajectory::Trajectory;
use crate::{CameraPose, Error, FormatError, Intrinsics, KeyframeField, Result, Scene};

pub const SCENE_FORMAT: &str = "splat4d-scene";
pub const TRAJECTORY_FORMAT: &str = "splat4d-trajectory";
pub const FORMAT_VERSION: u32 = 1;
/// File name of the manifest inside a scene directory.
pub const MANIFEST_NAME: &str = "scene.json";

#[derive(Debug, Clone, Serialize, Deserialize)]
struct KeyframeEntry {
    time: f64,
    camera: CameraPose,
    file: String,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
struct SceneManifest {
    format: String,
    version: u32,
    intrinsics: Intrinsics,
    keyframes: Vec<KeyframeEntry>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
struct TrajectoryFile {
    format: String,
    version: u32,
    intrinsics: Intrinsics,
    poses: Vec<CameraPose>,
}

pub(crate) fn to_json<T: Serialize>(value: &T) -> String {
    let mut s = serde_json::to_string_pretty(value).expect("serializable value");
    s.push('\n');
    s
}

pub(crate) fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<(), FormatError> {
    super::write_bytes(path, to_json(value).as_bytes())
}

/// Parses a versioned JSON document after checking its `format` and `version` fields.
pub(crate) fn read_versioned<T: DeserializeOwned>(path: &Path, format: &str, version: u32) -> Result<T, FormatError> {
    let bytes = super::read_bytes(path)?;
    let value: serde_json::Value =
        serde_json::from_slice(&bytes).map_err(|e| FormatError::malformed(path, e.to_string()))?;
    match value.get("format").and_then(|f| f.as_str()) {
        Some(f) if f == format => {}
        Some(f) => {
            return Err(FormatError::malformed(
                path,
                format!("expected format `{format}`, found `{f}`"),
            ))
        }
        None => return Err(FormatError::malformed(path, "missing `format` field")),
    }
    match value.get("version") {
        Some(v) if v.as_u64() == Some(version as u64) => {}
        Some(v) => {
            return Err(FormatError::VersionMismatch {
                path: path.into(),
                found: v.to_string(),
                expected: version.to_string(),
            })
        }
        None => return Err(FormatError::malformed(path, "missing `version` field")),
    }
    serde_json::from_value(value).map_err(|e| FormatError::malformed(path, e.to_string()))
}

fn invariant(path: &Path, e: Error) -> Error {
    match e {
        Error::Format(f) => Error::Format(f),
        other => FormatError::Invariant {
            path: path.into(),
            message: other.to_string(),
        }
        .into(),
    }
}

/// Keyframe file name by index.
pub fn keyframe_file_name(index: usize) -> String {
    format!("kf_{index:04}.ply")
}

/// Writes `scene` as `dir/scene.json` plus one PLY per keyframe.
pub fn write_scene(dir: &Path, scene: &Scene) -> Result<()> {
    scene.validate()?;
    super::create_dir(dir)?;
    let mut keyframes = Vec::with_capacity(scene.keyframes.len());
    for (i, kf) in scene.keyframes.iter().enumerate() {
        let file = keyframe_file_name(i);
        write_ply(&dir.join(&file), &kf.gaussians)?;
        keyframes.push(KeyframeEntry {
            time: kf.time,
            camera: kf.camera,
            file,
        });
    }
    let manifest = SceneManifest {
        format: SCENE_FORMAT.into(),
        version: FORMAT_VERSION,
        intrinsics: scene.intrinsics,
        keyframes,
    };
    write_json(&dir.join(MANIFEST_NAME), &manifest)?;
    Ok(())
}

/// Manifest path for a scene directory or a manifest file.
pub fn manifest_path(path: &Path) -> PathBuf {
    if path.is_dir() {
        path.join(MANIFEST_NAME)
    } else {
        path.to_path_buf()
    }
}

/// Loads a scene from its directory or manifest path and validates it.
pub fn read_scene(path: &Path) -> Result<Scene> {
    let manifest_file = manifest_path(path);
    let manifest: SceneManifest = read_versioned(&manifest_file, SCENE_FORMAT, FORMAT_VERSION)?;
    let base = manifest_file.parent().unwrap_or(Path::new("."));
    let mut keyframes = Vec::with_capacity(manifest.keyframes.len());
    for entry in &manifest.keyframes {
        if entry.time != entry.camera.time {
            return Err(FormatError::Invariant {
                path: manifest_file.clone(),
                message: format!(
                    "keyframe time {} differs from its camera time {}",
                    entry.time, entry.camera.time
                ),
            }
            .into());
        }
        let file = base.join(&entry.file);
        let gaussians = read_ply(&file)?;
        keyframes.push(KeyframeField::new(entry.camera, gaussians).map_err(|e| invariant(&manifest_file, e))?);
    }
    Scene::new(manifest.intrinsics, keyframes).map_err(|e| invariant(&manifest_file, e))
}

pub fn write_trajectory(path: &Path, traj: &Trajectory) -> Result<()> {
    traj.validate()?;
    write_json(
        path,
        &TrajectoryFile {
            format: TRAJECTORY_FORMAT.into(),
            version: FORMAT_VERSION,
            intrinsics: traj.intrinsics,
            poses: traj.poses.clone(),
        },
    )?;
    Ok(())
}

pub fn read_trajectory(path: &Path) -> Result<Trajectory> {
    let file: TrajectoryFile = read_versioned(path, TRAJECTORY_FORMAT, FORMAT_VERSION)?;
    Trajectory::new(file.poses, file.intrinsics).map_err(|e| invariant(path, e))
}
