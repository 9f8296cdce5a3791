//! Global motion tracking and static/dynamic separation.
//!
//! The motion score of a Gaussian is the largest composited velocity it is
//! seen carrying over the whole clip: it is carried to every keyframe time,
//! depth-tested against that frame's render, and the velocity buffers are
//! sampled at its pixel. Objects that rest for part of the clip still score
//! their peak speed.

use rayon::prelude::*;

use crate::dynamics::transfer;
use crate::raster::{render, visible_pixel, RenderOptions, RenderTarget};
use crate::{CameraPose, Error, Gaussian4D, Intrinsics, Result, Scene};

/// Composited velocity magnitude seen at `g`'s pixel, or 0 when `g` is hidden.
///
/// `frame_render` must be a render of the full scene from `pose`.
pub fn frame_velocity_magnitude(
    g: &Gaussian4D,
    frame_render: &RenderTarget,
    pose: &CameraPose,
    k: &Intrinsics,
    eps_rel: f64,
) -> f64 {
    match visible_pixel(&g.mu, pose, k, frame_render, eps_rel, 0.0, f64::INFINITY) {
        Some((x, y)) => frame_render
            .vel_fwd
            .get(x, y)
            .norm()
            .max(frame_render.vel_bwd.get(x, y).norm()),
        None => 0.0,
    }
}

/// Each keyframe's Gaussians rendered from its own camera.
pub fn keyframe_renders(scene: &Scene, opts: &RenderOptions) -> Result<Vec<RenderTarget>> {
    scene
        .keyframes
        .iter()
        .map(|kf| render(&kf.gaussians, &kf.camera, &scene.intrinsics, opts))
        .collect()
}

/// Per-Gaussian motion scores, indexed `[keyframe][gaussian]`.
pub fn global_motion(scene: &Scene, eps_rel: f64) -> Result<Vec<Vec<f64>>> {
    global_motion_with(scene, eps_rel, &RenderOptions::for_intrinsics(&scene.intrinsics))
}

pub fn global_motion_with(scene: &Scene, eps_rel: f64, opts: &RenderOptions) -> Result<Vec<Vec<f64>>> {
    if !(eps_rel > 0.0) {
        return Err(Error::InvalidArgument(format!(
            "eps_rel must be positive, got {eps_rel}"
        )));
    }
    let renders = keyframe_renders(scene, opts)?;
    Ok(scene
        .keyframes
        .iter()
        .map(|kf| {
            kf.gaussians
                .par_iter()
                .map(|g| {
                    scene
                        .keyframes
                        .iter()
                        .zip(&renders)
                        .map(|(frame, target)| {
                            let moved = transfer(g, kf.time, frame.time);
                            frame_velocity_magnitude(&moved, target, &frame.camera, &scene.intrinsics, eps_rel)
                        })
                        .fold(0.0, f64::max)
                })
                .collect()
        })
        .collect())
}

/// Static and dynamic index sets per keyframe.
#[derive(Debug, Clone, PartialEq)]
pub struct SeparationResult {
    pub static_ids: Vec<Vec<usize>>,
    pub dynamic_ids: Vec<Vec<usize>>,
    /// Motion score per keyframe and Gaussian.
    pub m: Vec<Vec<f64>>,
    pub eta: f64,
}

impl SeparationResult {
    /// Thresholds precomputed scores; `m > eta` is dynamic.
    pub fn from_scores(m: Vec<Vec<f64>>, eta: f64) -> Result<Self> {
        if !(eta >= 0.0) {
            return Err(Error::InvalidArgument(format!("eta must be non-negative, got {eta}")));
        }
        let (static_ids, dynamic_ids) = m
            .iter()
            .map(|scores| (0..scores.len()).partition(|&i| !(scores[i] > eta)))
            .unzip();
        Ok(Self {
            static_ids,
            dynamic_ids,
            m,
            eta,
        })
    }

    pub fn static_count(&self) -> usize {
        self.static_ids.iter().map(Vec::len).sum()
    }

    pub fn dynamic_count(&self) -> usize {
        self.dynamic_ids.iter().map(Vec::len).sum()
    }

    pub fn is_dynamic(&self, keyframe: usize, index: usize) -> bool {
        self.m[keyframe][index] > self.eta
    }
}

/// Splits the scene's Gaussians by global motion score against `eta`.
pub fn separate(scene: &Scene, eta: f64, eps_rel: f64) -> Result<SeparationResult> {
    if !(eta >= 0.0) {
        return Err(Error::InvalidArgument(format!("eta must be non-negative, got {eta}")));
    }
    SeparationResult::from_scores(global_motion(scene, eps_rel)?, eta)
}

/// Scale-adaptive default threshold: 1% of the scene diagonal per unit time.
pub fn default_eta(scene: &Scene) -> f64 {
    0.01 * scene.diagonal()
}

/// Baseline that looks at one keyframe only: each Gaussian's own stored speed.
pub fn instantaneous_separation(scene: &Scene, keyframe: usize, eta: f64) -> Result<Vec<bool>> {
    let kf = scene.keyframes.get(keyframe).ok_or_else(|| {
        Error::InvalidArgument(format!(
            "keyframe {keyframe} out of range for {} keyframes",
            scene.keyframes.len()
        ))
    })?;
    Ok(kf.gaussians.iter().map(|g| g.max_speed() > eta).collect())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::{KeyframeField, Vec3};

    fn k() -> Intrinsics {
        Intrinsics::centered(20.0, 16, 16)
    }

    #[test]
    fn lone_gaussian_reads_its_speed() {
        let g = Gaussian4D::isotropic(Vec3::new(0.0, 0.0, 4.0), 0.3, Vec3::repeat(0.5), 1.0)
            .with_velocity(Vec3::new(3.0, 4.0, 0.0), Vec3::zeros());
        let pose = CameraPose::identity(0.0);
        let k = Intrinsics::centered(20.0, 15, 15);
        let target = render(&[g], &pose, &k, &RenderOptions::for_intrinsics(&k)).unwrap();
        let m = frame_velocity_magnitude(&g, &target, &pose, &k, 0.01);
        assert!((m - 5.0).abs() < 1e-9, "{m}");
    }

    #[test]
    fn hidden_gaussian_scores_zero() {
        let front = Gaussian4D::isotropic(Vec3::new(0.0, 0.0, 2.0), 0.5, Vec3::repeat(0.5), 1.0);
        let back = Gaussian4D::isotropic(Vec3::new(0.0, 0.0, 6.0), 0.3, Vec3::repeat(0.5), 1.0)
            .with_velocity(Vec3::new(9.0, 0.0, 0.0), Vec3::zeros());
        let pose = CameraPose::identity(0.0);
        let target = render(&[front, back], &pose, &k(), &RenderOptions::for_intrinsics(&k())).unwrap();
        assert_eq!(frame_velocity_magnitude(&back, &target, &pose, &k(), 0.01), 0.0);
    }

    #[test]
    fn threshold_boundary_is_static() {
        let r = SeparationResult::from_scores(vec![vec![0.0, 0.5, 0.7]], 0.5).unwrap();
        assert_eq!(r.static_ids, vec![vec![0, 1]]);
        assert_eq!(r.dynamic_ids, vec![vec![2]]);
        assert!(SeparationResult::from_scores(vec![], -1.0).is_err());
    }

    #[test]
    fn static_scene_scores_zero() {
        let g = Gaussian4D::isotropic(Vec3::new(0.0, 0.0, 4.0), 0.3, Vec3::repeat(0.5), 1.0);
        let kfs = (0..3)
            .map(|i| KeyframeField::new(CameraPose::identity(i as f64), vec![g]).unwrap())
            .collect();
        let scene = Scene::new(k(), kfs).unwrap();
        let m = global_motion(&scene, 0.01).unwrap();
        assert!(m.iter().flatten().all(|&v| v == 0.0));
        let s = separate(&scene, 0.0, 0.01).unwrap();
        assert_eq!(s.dynamic_count(), 0);
        assert_eq!(instantaneous_separation(&scene, 1, 0.0).unwrap(), vec![false]);
        assert!(instantaneous_separation(&scene, 7, 0.0).is_err());
    }
}
