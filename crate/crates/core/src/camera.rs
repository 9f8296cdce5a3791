//! Pinhole camera model.
//!
//! Pixel coordinates put integer values at pixel centers: pixel `(i, j)`
//! covers `[i - 0.5, i + 0.5) x [j - 0.5, j + 0.5)`. Camera space is x right,
//! y down, z forward.

use serde::{Deserialize, Serialize};

use crate::{Error, Grid, Mat3, Quat, Result, Vec2, Vec3};

/// Depths with magnitude below this are clamped before the perspective divide.
pub const MIN_DEPTH: f64 = 1e-9;

/// World-to-camera rigid transform `c = R p + t`, stamped with a time.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CameraPose {
    pub quat: Quat,
    pub trans: Vec3,
    pub time: f64,
}

impl CameraPose {
    pub fn new(quat: Quat, trans: Vec3, time: f64) -> Result<Self> {
        let pose = Self { quat, trans, time };
        pose.validate()?;
        Ok(pose)
    }

    pub fn identity(time: f64) -> Self {
        Self {
            quat: Quat::IDENTITY,
            trans: Vec3::zeros(),
            time,
        }
    }

    /// Pose with world-to-camera rotation `quat` whose optical center sits at `center`.
    pub fn from_center(quat: Quat, center: Vec3, time: f64) -> Self {
        let trans = -(quat.to_matrix() * center);
        Self { quat, trans, time }
    }

    pub fn validate(&self) -> Result<()> {
        if !self.quat.is_unit(1e-6) {
            return Err(Error::Invariant(format!(
                "camera quaternion norm {} is not 1",
                self.quat.norm()
            )));
        }
        let finite = self.quat.to_array().iter().all(|v| v.is_finite())
            && self.trans.iter().all(|v| v.is_finite())
            && self.time.is_finite();
        if !finite {
            return Err(Error::Invariant("camera pose has non-finite fields".into()));
        }
        Ok(())
    }

    pub fn rotation(&self) -> Mat3 {
        self.quat.to_matrix()
    }

    pub fn to_camera(&self, p: &Vec3) -> Vec3 {
        self.rotation() * p + self.trans
    }

    pub fn to_world(&self, c: &Vec3) -> Vec3 {
        self.rotation().transpose() * (c - self.trans)
    }

    /// Optical center in world coordinates.
    pub fn center(&self) -> Vec3 {
        -(self.rotation().transpose() * self.trans)
    }

    /// Optical axis (camera +z) in world coordinates.
    pub fn forward(&self) -> Vec3 {
        self.rotation().row(2).transpose()
    }

    /// Camera +x in world coordinates.
    pub fn right(&self) -> Vec3 {
        self.rotation().row(0).transpose()
    }

    /// Camera up (camera -y) in world coordinates.
    pub fn up(&self) -> Vec3 {
        -self.rotation().row(1).transpose()
    }
}

/// Pinhole intrinsics for a `width x height` image.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Intrinsics {
    pub fx: f64,
    pub fy: f64,
    pub cx: f64,
    pub cy: f64,
    pub width: usize,
    pub height: usize,
}

impl Intrinsics {
    pub fn new(fx: f64, fy: f64, cx: f64, cy: f64, width: usize, height: usize) -> Result<Self> {
        let k = Self {
            fx,
            fy,
            cx,
            cy,
            width,
            height,
        };
        k.validate()?;
        Ok(k)
    }

    /// Centered principal point with the given focal length.
    pub fn centered(focal: f64, width: usize, height: usize) -> Self {
        Self {
            fx: focal,
            fy: focal,
            cx: (width as f64 - 1.0) * 0.5,
            cy: (height as f64 - 1.0) * 0.5,
            width,
            height,
        }
    }

    pub fn validate(&self) -> Result<()> {
        let ok = self.fx.is_finite()
            && self.fy.is_finite()
            && self.fx > 0.0
            && self.fy > 0.0
            && self.width > 0
            && self.height > 0
            && self.cx >= 0.0
            && self.cx < self.width as f64
            && self.cy >= 0.0
            && self.cy < self.height as f64;
        if ok {
            Ok(())
        } else {
            Err(Error::Invariant(format!("invalid intrinsics {self:?}")))
        }
    }

    /// Same field of view rendered at another resolution.
    pub fn scaled_to(&self, width: usize, height: usize) -> Intrinsics {
        if width == self.width && height == self.height {
            return *self;
        }
        let sx = width as f64 / self.width as f64;
        let sy = height as f64 / self.height as f64;
        Intrinsics {
            fx: self.fx * sx,
            fy: self.fy * sy,
            cx: (self.cx + 0.5) * sx - 0.5,
            cy: (self.cy + 0.5) * sy - 0.5,
            width,
            height,
        }
    }

    /// Camera-space direction (z = 1) through a continuous pixel coordinate.
    pub fn unproject_dir(&self, u: f64, v: f64) -> Vec3 {
        Vec3::new((u - self.cx) / self.fx, (v - self.cy) / self.fy, 1.0)
    }

    /// Nearest pixel of a continuous coordinate, if inside the image.
    pub fn pixel_of(&self, p: &Vec2) -> Option<(usize, usize)> {
        let x = p.x.round();
        let y = p.y.round();
        if x >= 0.0 && y >= 0.0 && x < self.width as f64 && y < self.height as f64 {
            Some((x as usize, y as usize))
        } else {
            None
        }
    }
}

/// Clamp a camera depth away from zero, keeping its sign.
#[inline]
pub(crate) fn safe_depth(z: f64) -> f64 {
    if z.abs() < MIN_DEPTH {
        if z < 0.0 {
            -MIN_DEPTH
        } else {
            MIN_DEPTH
        }
    } else {
        z
    }
}

/// Projects a world point; returns the continuous pixel and the camera depth.
///
/// Points behind the camera come back with depth <= 0 and a mirrored pixel;
/// callers filter on depth.
pub fn project_point(p: &Vec3, pose: &CameraPose, k: &Intrinsics) -> (Vec2, f64) {
    let c = pose.to_camera(p);
    let z = safe_depth(c.z);
    let pixel = Vec2::new(k.fx * c.x / z + k.cx, k.fy * c.y / z + k.cy);
    (pixel, c.z)
}

/// World point seen at pixel `(u, v)` at camera depth `depth`.
pub fn unproject_pixel(u: f64, v: f64, depth: f64, pose: &CameraPose, k: &Intrinsics) -> Vec3 {
    pose.to_world(&(k.unproject_dir(u, v) * depth))
}

/// Lifts every pixel with positive depth to a world point, row-major order.
pub fn back_project(depth_map: &Grid<f64>, pose: &CameraPose, k: &Intrinsics) -> Result<Vec<Vec3>> {
    if depth_map.dims() != (k.width, k.height) {
        return Err(Error::DimensionMismatch {
            expected_width: k.width,
            expected_height: k.height,
            width: depth_map.width(),
            height: depth_map.height(),
        });
    }
    let mut points = Vec::new();
    for y in 0..k.height {
        for (x, &d) in depth_map.row(y).iter().enumerate() {
            if d > 0.0 {
                points.push(unproject_pixel(x as f64, y as f64, d, pose, k));
            }
        }
    }
    Ok(points)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn k100() -> Intrinsics {
        Intrinsics::new(100.0, 100.0, 50.0, 50.0, 100, 100).unwrap()
    }

    #[test]
    fn principal_axis_projects_to_center() {
        let (px, d) = project_point(&Vec3::new(0.0, 0.0, 2.0), &CameraPose::identity(0.0), &k100());
        assert_eq!(px, Vec2::new(50.0, 50.0));
        assert_eq!(d, 2.0);
    }

    #[test]
    fn pinhole_offset() {
        let (px, d) = project_point(&Vec3::new(1.0, 0.0, 2.0), &CameraPose::identity(0.0), &k100());
        assert_eq!(px, Vec2::new(100.0, 50.0));
        assert_eq!(d, 2.0);
    }

    #[test]
    fn behind_camera_reports_negative_depth() {
        let (px, d) = project_point(&Vec3::new(0.0, 0.0, -1.0), &CameraPose::identity(0.0), &k100());
        assert_eq!(d, -1.0);
        assert!(px.x.is_finite() && px.y.is_finite());
        let (px, d) = project_point(&Vec3::new(1.0, 1.0, 0.0), &CameraPose::identity(0.0), &k100());
        assert_eq!(d, 0.0);
        assert!(px.x.is_finite());
    }

    #[test]
    fn uniform_depth_gives_plane() {
        let k = Intrinsics::new(10.0, 10.0, 2.0, 2.0, 5, 4).unwrap();
        let depth = Grid::new(5, 4, 2.0);
        let pts = back_project(&depth, &CameraPose::identity(0.0), &k).unwrap();
        assert_eq!(pts.len(), 20);
        assert!(pts.iter().all(|p| (p.z - 2.0).abs() < 1e-15));
    }

    #[test]
    fn zero_depth_is_empty_and_mismatch_errors() {
        let k = Intrinsics::new(10.0, 10.0, 2.0, 2.0, 5, 4).unwrap();
        let pose = CameraPose::identity(0.0);
        assert!(back_project(&Grid::new(5, 4, 0.0), &pose, &k).unwrap().is_empty());
        assert!(matches!(
            back_project(&Grid::new(4, 5, 1.0), &pose, &k),
            Err(Error::DimensionMismatch { .. })
        ));
    }

    #[test]
    fn intrinsics_validation() {
        assert!(Intrinsics::new(0.0, 1.0, 0.0, 0.0, 4, 4).is_err());
        assert!(Intrinsics::new(1.0, 1.0, 4.0, 0.0, 4, 4).is_err());
        assert!(Intrinsics::new(1.0, 1.0, 3.9, 0.0, 4, 4).is_ok());
    }

    #[test]
    fn scaling_keeps_field_of_view() {
        let k = Intrinsics::centered(20.0, 16, 8);
        let k2 = k.scaled_to(32, 16);
        assert_eq!(k2.fx, 40.0);
        assert_eq!(k2.cx, 15.5);
        assert_eq!(k2.cy, 7.5);
        let p = Vec3::new(0.3, -0.2, 3.0);
        let pose = CameraPose::identity(0.0);
        let (a, _) = project_point(&p, &pose, &k);
        let (b, _) = project_point(&p, &pose, &k2);
        assert!(((a.x + 0.5) * 2.0 - 0.5 - b.x).abs() < 1e-12);
    }

    #[test]
    fn center_and_axes() {
        let q = crate::axis_angle_to_quat(Vec3::new(0.1, 0.7, -0.2));
        let c = Vec3::new(1.0, 2.0, 3.0);
        let pose = CameraPose::from_center(q, c, 0.0);
        assert!((pose.center() - c).norm() < 1e-12);
        assert!((pose.to_camera(&(c + pose.forward())) - Vec3::z()).norm() < 1e-12);
        assert!((pose.to_camera(&(c + pose.up())) + Vec3::y()).norm() < 1e-12);
    }
}
