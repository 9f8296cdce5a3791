//! Camera paths: procedural generation, smoothing and Plücker ray maps.

use rayon::prelude::*;

use crate::{axis_angle_to_quat, CameraPose, Error, Grid, Intrinsics, Quat, Result, Vec3};

/// Ordered camera poses with strictly increasing timestamps.
#[derive(Debug, Clone, PartialEq)]
pub struct Trajectory {
    pub poses: Vec<CameraPose>,
    pub intrinsics: Intrinsics,
}

impl Trajectory {
    pub fn new(poses: Vec<CameraPose>, intrinsics: Intrinsics) -> Result<Self> {
        let traj = Self { poses, intrinsics };
        traj.validate()?;
        Ok(traj)
    }

    pub fn validate(&self) -> Result<()> {
        self.intrinsics.validate()?;
        for (i, p) in self.poses.iter().enumerate() {
            p.validate().map_err(|e| Error::Invariant(format!("pose {i}: {e}")))?;
        }
        for w in self.poses.windows(2) {
            if !(w[1].time > w[0].time) {
                return Err(Error::Invariant(format!(
                    "trajectory times must strictly increase ({} then {})",
                    w[0].time, w[1].time
                )));
            }
        }
        Ok(())
    }

    pub fn len(&self) -> usize {
        self.poses.len()
    }

    pub fn is_empty(&self) -> bool {
        self.poses.is_empty()
    }

    pub fn times(&self) -> Vec<f64> {
        self.poses.iter().map(|p| p.time).collect()
    }

    pub fn centers(&self) -> Vec<Vec3> {
        self.poses.iter().map(|p| p.center()).collect()
    }

    /// Polyline length through the camera centers.
    pub fn path_length(&self) -> f64 {
        self.centers().windows(2).map(|w| (w[1] - w[0]).norm()).sum()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum PathKind {
    PanLeft,
    PanRight,
    MoveLeft,
    MoveRight,
    Orbit,
    DollyIn,
    DollyOut,
}

impl std::str::FromStr for PathKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Ok(match s {
            "pan-left" => PathKind::PanLeft,
            "pan-right" => PathKind::PanRight,
            "move-left" => PathKind::MoveLeft,
            "move-right" => PathKind::MoveRight,
            "orbit" => PathKind::Orbit,
            "dolly-in" => PathKind::DollyIn,
            "dolly-out" => PathKind::DollyOut,
            other => return Err(Error::InvalidArgument(format!("unknown path kind `{other}`"))),
        })
    }
}

/// Parametric camera path starting at `base`, one pose per unit of time.
///
/// `magnitude` is the total angle in radians for pans and orbits and the
/// total distance for moves and dollies. Pans turn about the camera's up
/// axis, moves slide along its right axis, dollies along its optical axis,
/// and orbits revolve about `center` around the base camera's up axis.
pub fn make_path(
    kind: PathKind,
    base: &CameraPose,
    magnitude: f64,
    frames: usize,
    center: &Vec3,
    intrinsics: &Intrinsics,
) -> Result<Trajectory> {
    if frames < 2 {
        return Err(Error::InvalidArgument(format!(
            "a path needs at least 2 frames, got {frames}"
        )));
    }
    if !(magnitude >= 0.0) || !magnitude.is_finite() {
        return Err(Error::InvalidArgument(format!(
            "path magnitude must be non-negative, got {magnitude}"
        )));
    }
    let origin = base.center();
    let up = base.up();
    if kind == PathKind::Orbit && (origin - center).norm() < 1e-6 {
        return Err(Error::InvalidArgument("orbit center coincides with the camera".into()));
    }
    let mut poses = Vec::with_capacity(frames);
    for i in 0..frames {
        let s = i as f64 / (frames - 1) as f64;
        let time = base.time + i as f64;
        if i == 0 {
            poses.push(CameraPose { time, ..*base });
            continue;
        }
        let pose = match kind {
            PathKind::PanLeft | PathKind::PanRight => {
                // Positive turn about camera +y swings the view to the right.
                let sign = if kind == PathKind::PanRight { 1.0 } else { -1.0 };
                let turn = axis_angle_to_quat(Vec3::y() * (sign * magnitude * s));
                let quat = (turn.conjugate() * base.quat).normalized();
                CameraPose::from_center(quat, origin, time)
            }
            PathKind::MoveLeft | PathKind::MoveRight => {
                let sign = if kind == PathKind::MoveRight { 1.0 } else { -1.0 };
                let c = origin + base.right() * (sign * magnitude * s);
                CameraPose::from_center(base.quat, c, time)
            }
            PathKind::DollyIn | PathKind::DollyOut => {
                let sign = if kind == PathKind::DollyIn { 1.0 } else { -1.0 };
                let c = origin + base.forward() * (sign * magnitude * s);
                CameraPose::from_center(base.quat, c, time)
            }
            PathKind::Orbit => {
                let spin = axis_angle_to_quat(up * (magnitude * s));
                let c = center + spin.rotate(origin - center);
                let quat = base.quat * spin.conjugate();
                CameraPose::from_center(quat, c, time)
            }
        };
        poses.push(pose);
    }
    Trajectory::new(poses, *intrinsics)
}

/// Box-filters camera centers and orientations over an odd `window`.
///
/// Windows are truncated at the ends. Orientations use the normalized mean
/// of quaternions sign-aligned to the window's center sample, which is
/// accurate for the small angular spreads of camera shake but not for
/// spreads beyond 90 degrees.
pub fn smooth_trajectory(traj: &Trajectory, window: usize) -> Result<Trajectory> {
    if window == 0 || window.is_multiple_of(2) {
        return Err(Error::InvalidArgument(format!(
            "smoothing window must be odd and positive, got {window}"
        )));
    }
    if window == 1 {
        return Ok(traj.clone());
    }
    let half = window / 2;
    let n = traj.poses.len();
    let centers = traj.centers();
    let poses = (0..n)
        .map(|i| {
            let lo = i.saturating_sub(half);
            let hi = (i + half).min(n - 1);
            let count = (hi - lo + 1) as f64;
            let c = centers[lo..=hi].iter().sum::<Vec3>() / count;
            let pivot = traj.poses[i].quat;
            let mut sum = Quat::new(0.0, 0.0, 0.0, 0.0);
            for p in &traj.poses[lo..=hi] {
                let q = if p.quat.dot(pivot) < 0.0 { -p.quat } else { p.quat };
                sum = Quat::new(sum.w + q.w, sum.x + q.x, sum.y + q.y, sum.z + q.z);
            }
            CameraPose::from_center(sum.normalized(), c, traj.poses[i].time)
        })
        .collect();
    Trajectory::new(poses, traj.intrinsics)
}

/// Root of the summed squared second differences of the camera centers.
pub fn jerk_norm(traj: &Trajectory) -> f64 {
    traj.centers()
        .windows(3)
        .map(|w| (w[2] - 2.0 * w[1] + w[0]).norm_squared())
        .sum::<f64>()
        .sqrt()
}

/// Per-pixel world ray `(d, o x d)` with unit direction `d` and camera
/// origin `o`, at `width x height` (intrinsics rescaled to that size).
pub fn plucker_map(pose: &CameraPose, k: &Intrinsics, width: usize, height: usize) -> Result<Grid<[f64; 6]>> {
    if width == 0 || height == 0 {
        return Err(Error::InvalidArgument("plucker map size must be positive".into()));
    }
    let k = k.scaled_to(width, height);
    let to_world = pose.rotation().transpose();
    let origin = pose.center();
    let rows: Vec<Vec<[f64; 6]>> = (0..height)
        .into_par_iter()
        .map(|y| {
            (0..width)
                .map(|x| {
                    let d = (to_world * k.unproject_dir(x as f64, y as f64)).normalize();
                    let m = origin.cross(&d);
                    [d.x, d.y, d.z, m.x, m.y, m.z]
                })
                .collect()
        })
        .collect();
    Ok(Grid::from_vec(width, height, rows.concat()))
}
