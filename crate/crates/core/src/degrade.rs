//! Degradation patterns of monocular reconstruction, simulated on a clean field.
//!
//! Three patterns are produced by moving to a perturbed camera and coming
//! back: occlusion holes (Gaussians hidden from the perturbed view are culled),
//! flying edge pixels (Gaussians are pushed onto a box-filtered depth map of
//! the perturbed view) and broader distortion (the same with a wider kernel).
//! The modified Gaussians are rendered back into the original cameras.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use crate::dynamics::{interpolate_field, InterpConfig};
use crate::raster::{binarize_mask, render, visible_pixel, RenderOptions, RenderTarget};
use crate::trajectory::{plucker_map, Trajectory};
use crate::{axis_angle_to_quat, CameraPose, Error, Gaussian4D, Grid, Intrinsics, Quat, Result, Scene, Vec3};

/// Pixels below this accumulated opacity are left out of the depth filter.
pub const FILTER_MIN_OPACITY: f64 = 1e-3;

/// Random camera-path transform.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PerturbConfig {
    /// Camera center offsets have a norm drawn uniformly from
    /// `[min_translation, max_translation]`, world units.
    pub min_translation: f64,
    pub max_translation: f64,
    /// Restricts offset directions to the camera's image plane.
    pub lateral_only: bool,
    /// Upper bound on the extra rotation angle, radians.
    pub max_rotation: f64,
    /// Slerp factor toward the exact look-at orientation, in `[0, 1]`.
    pub lookat_blend: f64,
    pub seed: u64,
}

impl PerturbConfig {
    /// Offsets of norm at most `max_translation` and rotations of at most
    /// `max_rotation`, re-aimed at the scene center.
    pub fn new(max_translation: f64, max_rotation: f64, seed: u64) -> Self {
        Self {
            min_translation: 0.0,
            max_translation,
            lateral_only: false,
            max_rotation,
            lookat_blend: 1.0,
            seed,
        }
    }

    /// Leaves every pose unchanged.
    pub fn none() -> Self {
        Self {
            lookat_blend: 0.0,
            ..Self::new(0.0, 0.0, 0)
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.min_translation >= 0.0
            && self.max_translation >= self.min_translation
            && self.max_translation.is_finite())
        {
            return Err(Error::InvalidArgument(format!(
                "translation bounds must satisfy 0 <= min <= max, got [{}, {}]",
                self.min_translation, self.max_translation
            )));
        }
        if !(self.max_rotation >= 0.0 && self.max_rotation.is_finite()) {
            return Err(Error::InvalidArgument(format!(
                "max_rotation must be non-negative, got {}",
                self.max_rotation
            )));
        }
        if !(0.0..=1.0).contains(&self.lookat_blend) {
            return Err(Error::InvalidArgument(format!(
                "lookat_blend must lie in [0, 1], got {}",
                self.lookat_blend
            )));
        }
        Ok(())
    }
}

/// Random stream for frame `frame`; independent of evaluation order.
pub fn frame_rng(seed: u64, frame: usize) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(frame as u64);
    rng
}

fn random_unit(rng: &mut impl Rng) -> Vec3 {
    let z: f64 = rng.gen_range(-1.0..=1.0);
    let phi: f64 = rng.gen_range(0.0..std::f64::consts::TAU);
    let r = (1.0 - z * z).max(0.0).sqrt();
    Vec3::new(r * phi.cos(), r * phi.sin(), z)
}

/// World-to-camera rotation that keeps `quat`'s roll as far as possible while
/// pointing the optical axis from `position` at `target`.
pub fn look_at(quat: Quat, position: &Vec3, target: &Vec3) -> Result<Quat> {
    let dir = target - position;
    if dir.norm() < 1e-6 {
        return Err(Error::DegenerateLookAt {
            x: position.x,
            y: position.y,
            z: position.z,
        });
    }
    let forward = quat.to_matrix().row(2).transpose();
    let swing = Quat::between(forward, dir.normalize());
    Ok((quat * swing.conjugate()).normalized())
}

/// Offsets, re-aims and jitters every pose of `traj`. Timestamps are kept
/// and the same seed always yields the same trajectory.
pub fn perturb_trajectory(traj: &Trajectory, scene_center: &Vec3, cfg: &PerturbConfig) -> Result<Trajectory> {
    cfg.validate()?;
    let poses = traj
        .poses
        .iter()
        .enumerate()
        .map(|(i, pose)| {
            let mut rng = frame_rng(cfg.seed, i);
            let mut dir = random_unit(&mut rng);
            let length = cfg.min_translation + (cfg.max_translation - cfg.min_translation) * rng.gen::<f64>();
            let axis = random_unit(&mut rng);
            let angle = cfg.max_rotation * rng.gen::<f64>();
            if cfg.lateral_only {
                dir.z = 0.0;
                dir = if dir.norm() > 1e-12 { dir.normalize() } else { Vec3::x() };
            }
            let offset = if length > 0.0 {
                pose.rotation().transpose() * dir * length
            } else {
                Vec3::zeros()
            };

            let origin = pose.center();
            if (origin - scene_center).norm() < 1e-6 {
                return Err(Error::DegenerateLookAt {
                    x: origin.x,
                    y: origin.y,
                    z: origin.z,
                });
            }
            let moved = origin + offset;
            let mut quat = pose.quat;
            if cfg.lookat_blend > 0.0 {
                let aimed = look_at(quat, &moved, scene_center)?;
                quat = quat.slerp(aimed, cfg.lookat_blend);
            }
            if angle > 0.0 {
                quat = axis_angle_to_quat(axis * angle) * quat;
            }
            if offset == Vec3::zeros() && quat == pose.quat {
                return Ok(*pose);
            }
            Ok(CameraPose::from_center(quat, moved, pose.time))
        })
        .collect::<Result<Vec<_>>>()?;
    Trajectory::new(poses, traj.intrinsics)
}

fn median(values: &mut [f64]) -> f64 {
    values.sort_by(f64::total_cmp);
    let n = values.len();
    if n % 2 == 1 {
        values[n / 2]
    } else {
        0.5 * (values[n / 2 - 1] + values[n / 2])
    }
}

/// Per-axis median of Gaussian centers.
pub fn scene_center(gaussians: &[Gaussian4D]) -> Result<Vec3> {
    if gaussians.is_empty() {
        return Err(Error::InvalidArgument("scene center of an empty Gaussian set".into()));
    }
    let axis = |f: fn(&Vec3) -> f64| -> f64 {
        let mut v: Vec<f64> = gaussians.iter().map(|g| f(&g.mu)).collect();
        median(&mut v)
    };
    Ok(Vec3::new(axis(|p| p.x), axis(|p| p.y), axis(|p| p.z)))
}

/// Partition of Gaussian indices by visibility.
#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct CullResult {
    pub kept: Vec<usize>,
    pub culled: Vec<usize>,
}

/// Which Gaussians of `gaussians` pass the depth test in `target`.
fn visible_flags(
    gaussians: &[Gaussian4D],
    pose: &CameraPose,
    k: &Intrinsics,
    target: &RenderTarget,
    eps_rel: f64,
    opts: &RenderOptions,
) -> Vec<Option<(usize, usize)>> {
    gaussians
        .par_iter()
        .map(|g| visible_pixel(&g.mu, pose, k, target, eps_rel, opts.near, opts.far))
        .collect()
}

/// Keeps the Gaussians visible from at least one of `novel_poses`.
///
/// Each pose renders the full set; a Gaussian is visible there if its center
/// lands in frame within `(near, far)` and no deeper than the rendered depth
/// times `1 + eps_rel`.
pub fn cull_invisible(
    gaussians: &[Gaussian4D],
    novel_poses: &[CameraPose],
    k: &Intrinsics,
    eps_rel: f64,
    opts: &RenderOptions,
) -> Result<CullResult> {
    if novel_poses.is_empty() {
        return Err(Error::InvalidArgument("culling needs at least one pose".into()));
    }
    if !(eps_rel > 0.0) {
        return Err(Error::InvalidArgument(format!(
            "eps_rel must be positive, got {eps_rel}"
        )));
    }
    let mut seen = vec![false; gaussians.len()];
    for pose in novel_poses {
        let target = render(gaussians, pose, k, opts)?;
        for (s, v) in seen
            .iter_mut()
            .zip(visible_flags(gaussians, pose, k, &target, eps_rel, opts))
        {
            *s |= v.is_some();
        }
    }
    let (kept, culled): (Vec<usize>, Vec<usize>) = (0..gaussians.len()).partition(|&i| seen[i]);
    Ok(CullResult { kept, culled })
}

/// Box filter of `depth` over a `kernel x kernel` window clipped to the image,
/// averaging only pixels with `acc >= min_opacity`. Pixels whose window holds
/// no such pixel come back as `None`.
pub fn box_filter_depth(
    depth: &Grid<f64>,
    acc: &Grid<f64>,
    kernel: usize,
    min_opacity: f64,
) -> Result<Grid<Option<f64>>> {
    check_kernel(kernel)?;
    if depth.dims() != acc.dims() {
        return Err(Error::DimensionMismatch {
            expected_width: depth.width(),
            expected_height: depth.height(),
            width: acc.width(),
            height: acc.height(),
        });
    }
    let (w, h) = depth.dims();
    let half = kernel / 2;
    let rows: Vec<Vec<Option<f64>>> = (0..h)
        .into_par_iter()
        .map(|y| {
            let (y0, y1) = (y.saturating_sub(half), (y + half).min(h - 1));
            (0..w)
                .map(|x| {
                    let (x0, x1) = (x.saturating_sub(half), (x + half).min(w - 1));
                    let (mut sum, mut n) = (0.0, 0usize);
                    let (mut lo, mut hi) = (f64::INFINITY, f64::NEG_INFINITY);
                    for yy in y0..=y1 {
                        for xx in x0..=x1 {
                            if *acc.get(xx, yy) >= min_opacity {
                                let d = *depth.get(xx, yy);
                                sum += d;
                                n += 1;
                                lo = lo.min(d);
                                hi = hi.max(d);
                            }
                        }
                    }
                    (n > 0).then(|| (sum / n as f64).clamp(lo, hi))
                })
                .collect()
        })
        .collect();
    Ok(Grid::from_vec(w, h, rows.concat()))
}

fn check_kernel(kernel: usize) -> Result<()> {
    if kernel == 0 || kernel.is_multiple_of(2) {
        return Err(Error::InvalidArgument(format!(
            "filter kernel must be odd and positive, got {kernel}"
        )));
    }
    Ok(())
}

/// Gaussians after the average geometry filter, with per-Gaussian displacement.
#[derive(Debug, Clone, PartialEq)]
pub struct FilterResult {
    pub gaussians: Vec<Gaussian4D>,
    pub displacement: Vec<f64>,
    /// Number of Gaussians that passed the visibility test.
    pub visible: usize,
}

impl FilterResult {
    /// Mean displacement over all Gaussians.
    pub fn mean_displacement(&self) -> f64 {
        if self.displacement.is_empty() {
            0.0
        } else {
            self.displacement.iter().sum::<f64>() / self.displacement.len() as f64
        }
    }
}

/// Pushes visible Gaussians along their novel-view rays by the change the
/// box filter makes to the rendered depth at their pixel.
///
/// A visible Gaussian at camera depth `d` over pixel `p` moves to depth
/// `d + Dbar[p] - D[p]`, so a Gaussian lying on the rendered surface lands
/// exactly on the filtered surface, projected pixels are preserved, and a
/// 1x1 kernel leaves every position bitwise unchanged. Invisible Gaussians
/// and all non-position attributes are untouched.
pub fn average_geometry_filter(
    gaussians: &[Gaussian4D],
    novel_pose: &CameraPose,
    k: &Intrinsics,
    kernel: usize,
    eps_rel: f64,
    opts: &RenderOptions,
) -> Result<FilterResult> {
    check_kernel(kernel)?;
    let target = render(gaussians, novel_pose, k, opts)?;
    let filtered = box_filter_depth(&target.depth, &target.acc_opacity, kernel, FILTER_MIN_OPACITY)?;
    let view = novel_pose.rotation();
    let flags = visible_flags(gaussians, novel_pose, k, &target, eps_rel, opts);
    let visible = flags.iter().filter(|f| f.is_some()).count();
    let moved: Vec<(Gaussian4D, f64)> = gaussians
        .par_iter()
        .zip(&flags)
        .map(|(g, flag)| {
            let Some((x, y)) = *flag else {
                return (*g, 0.0);
            };
            let Some(smooth) = *filtered.get(x, y) else {
                return (*g, 0.0);
            };
            let raw = *target.depth.get(x, y);
            let cam = view * g.mu + novel_pose.trans;
            let depth = (cam.z + (smooth - raw)).max(opts.near);
            if depth == cam.z {
                return (*g, 0.0);
            }
            let cam2 = cam * (depth / cam.z);
            let mu = view.transpose() * (cam2 - novel_pose.trans);
            (Gaussian4D { mu, ..*g }, (mu - g.mu).norm())
        })
        .collect();
    let (gaussians, displacement) = moved.into_iter().unzip();
    Ok(FilterResult {
        gaussians,
        displacement,
        visible,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum DegradeMode {
    Culling,
    Filter,
    /// Cull first, then filter the survivors.
    Both,
}

impl std::str::FromStr for DegradeMode {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "cull" | "culling" => Ok(DegradeMode::Culling),
            "filter" => Ok(DegradeMode::Filter),
            "both" => Ok(DegradeMode::Both),
            other => Err(Error::InvalidArgument(format!("unknown degrade mode `{other}`"))),
        }
    }
}

/// Knobs shared by every frame of a degradation run.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DegradeOptions {
    pub eps_rel: f64,
    pub mask_threshold: f64,
    pub interp: InterpConfig,
    pub render: RenderOptions,
}

impl DegradeOptions {
    pub fn for_intrinsics(k: &Intrinsics) -> Self {
        Self {
            eps_rel: 0.01,
            mask_threshold: 0.5,
            interp: InterpConfig::default(),
            render: RenderOptions::for_intrinsics(k),
        }
    }
}

/// Condition buffers for one original-trajectory frame.
#[derive(Debug, Clone, PartialEq)]
pub struct DegradedFrame {
    pub time: f64,
    pub original_pose: CameraPose,
    pub novel_pose: CameraPose,
    pub rgb: Grid<Vec3>,
    pub depth: Grid<f64>,
    pub acc_opacity: Grid<f64>,
    pub mask: Grid<bool>,
    /// Plücker map of the original camera.
    pub plucker: Grid<[f64; 6]>,
    pub culled: usize,
    pub mean_displacement: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct DegradationPack {
    pub frames: Vec<DegradedFrame>,
    pub novel: Trajectory,
}

/// Degrades each frame of `original` and renders it back into the original camera.
///
/// Per frame, the field is interpolated at the frame time, culled and/or
/// filtered against that frame's perturbed pose, and rendered from the
/// original pose. The scene center used for re-aiming is the per-axis median
/// of all keyframe Gaussians.
pub fn simulate_degradation(
    scene: &Scene,
    original: &Trajectory,
    cfg: &PerturbConfig,
    kernel: usize,
    mode: DegradeMode,
    opts: &DegradeOptions,
) -> Result<DegradationPack> {
    check_kernel(kernel)?;
    opts.render.validate()?;
    let all: Vec<Gaussian4D> = scene.all_gaussians().copied().collect();
    let center = scene_center(&all)?;
    let novel = perturb_trajectory(original, &center, cfg)?;
    let k = original.intrinsics;

    let frames = original
        .poses
        .par_iter()
        .zip(&novel.poses)
        .map(|(orig, moved)| {
            let mut gs = interpolate_field(scene, orig.time, &opts.interp)?;
            let mut culled = 0;
            let mut mean_displacement = 0.0;
            if matches!(mode, DegradeMode::Culling | DegradeMode::Both) {
                let split = cull_invisible(&gs, std::slice::from_ref(moved), &k, opts.eps_rel, &opts.render)?;
                culled = split.culled.len();
                gs = split.kept.iter().map(|&i| gs[i]).collect();
            }
            if matches!(mode, DegradeMode::Filter | DegradeMode::Both) {
                let filtered = average_geometry_filter(&gs, moved, &k, kernel, opts.eps_rel, &opts.render)?;
                mean_displacement = filtered.mean_displacement();
                gs = filtered.gaussians;
            }
            let target = render(&gs, orig, &k, &opts.render)?;
            let mask = binarize_mask(&target.acc_opacity, opts.mask_threshold)?;
            let plucker = plucker_map(orig, &k, opts.render.width, opts.render.height)?;
            Ok(DegradedFrame {
                time: orig.time,
                original_pose: *orig,
                novel_pose: *moved,
                rgb: target.rgb,
                depth: target.depth,
                acc_opacity: target.acc_opacity,
                mask,
                plucker,
                culled,
                mean_displacement,
            })
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(DegradationPack { frames, novel })
}
