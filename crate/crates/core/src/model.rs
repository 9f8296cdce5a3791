//! Scene data model: 4D Gaussians grouped into keyframes.

use crate::{CameraPose, Error, Intrinsics, Quat, Result, Vec3};

/// One primitive anchored at its keyframe time.
///
/// Linear velocities are world units per unit of scene time; angular
/// velocities are axis-angle radians per unit of scene time. Both are in the
/// world frame. Appearance is a single linear RGB color.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Gaussian4D {
    pub mu: Vec3,
    pub alpha: f64,
    pub rot: Quat,
    pub scale: Vec3,
    pub color: Vec3,
    /// Life span in the open interval (0, 1).
    pub tau: f64,
    pub v_fwd: Vec3,
    pub v_bwd: Vec3,
    pub w_fwd: Vec3,
    pub w_bwd: Vec3,
}

impl Gaussian4D {
    /// Motionless isotropic Gaussian with life span 0.5.
    pub fn isotropic(mu: Vec3, radius: f64, color: Vec3, alpha: f64) -> Self {
        Self {
            mu,
            alpha,
            rot: Quat::IDENTITY,
            scale: Vec3::repeat(radius),
            color,
            tau: 0.5,
            v_fwd: Vec3::zeros(),
            v_bwd: Vec3::zeros(),
            w_fwd: Vec3::zeros(),
            w_bwd: Vec3::zeros(),
        }
    }

    pub fn with_velocity(mut self, v_fwd: Vec3, v_bwd: Vec3) -> Self {
        self.v_fwd = v_fwd;
        self.v_bwd = v_bwd;
        self
    }

    pub fn with_angular_velocity(mut self, w_fwd: Vec3, w_bwd: Vec3) -> Self {
        self.w_fwd = w_fwd;
        self.w_bwd = w_bwd;
        self
    }

    pub fn with_tau(mut self, tau: f64) -> Self {
        self.tau = tau;
        self
    }

    /// Checks the per-primitive invariants and names the first one broken.
    pub fn validate(&self) -> Result<()> {
        self.check().map_err(Error::Invariant)
    }

    pub(crate) fn check(&self) -> std::result::Result<(), String> {
        let vectors = [
            ("mu", &self.mu),
            ("scale", &self.scale),
            ("color", &self.color),
            ("v_fwd", &self.v_fwd),
            ("v_bwd", &self.v_bwd),
            ("w_fwd", &self.w_fwd),
            ("w_bwd", &self.w_bwd),
        ];
        for (name, v) in vectors {
            if !v.iter().all(|c| c.is_finite()) {
                return Err(format!("{name} must be finite"));
            }
        }
        if !self.rot.to_array().iter().all(|c| c.is_finite()) {
            return Err("rot must be finite".into());
        }
        if !self.rot.is_unit(1e-6) {
            return Err(format!("|rot| = 1 required, got {}", self.rot.norm()));
        }
        if !(0.0..=1.0).contains(&self.alpha) {
            return Err(format!("alpha in [0, 1] required, got {}", self.alpha));
        }
        if !(self.tau > 0.0 && self.tau < 1.0) {
            return Err(format!("tau in (0, 1) required, got {}", self.tau));
        }
        if !self.scale.iter().all(|&s| s > 0.0) {
            return Err(format!("scale > 0 required, got {:?}", self.scale.as_slice()));
        }
        Ok(())
    }

    /// Largest of the forward and backward linear speeds.
    pub fn max_speed(&self) -> f64 {
        self.v_fwd.norm().max(self.v_bwd.norm())
    }
}

/// Gaussians anchored at one keyframe, together with that frame's camera.
#[derive(Debug, Clone, PartialEq)]
pub struct KeyframeField {
    pub time: f64,
    pub gaussians: Vec<Gaussian4D>,
    pub camera: CameraPose,
}

impl KeyframeField {
    /// Builds a field stamped with the camera's time.
    pub fn new(camera: CameraPose, gaussians: Vec<Gaussian4D>) -> Result<Self> {
        let field = Self {
            time: camera.time,
            gaussians,
            camera,
        };
        field.validate()?;
        Ok(field)
    }

    pub fn validate(&self) -> Result<()> {
        self.camera.validate()?;
        if self.time != self.camera.time {
            return Err(Error::Invariant(format!(
                "keyframe time {} differs from camera time {}",
                self.time, self.camera.time
            )));
        }
        for (i, g) in self.gaussians.iter().enumerate() {
            g.check().map_err(|m| Error::Invariant(format!("gaussian {i}: {m}")))?;
        }
        Ok(())
    }
}

/// Ordered keyframes sharing one set of intrinsics.
#[derive(Debug, Clone, PartialEq)]
pub struct Scene {
    pub intrinsics: Intrinsics,
    pub keyframes: Vec<KeyframeField>,
}

impl Scene {
    pub fn new(intrinsics: Intrinsics, keyframes: Vec<KeyframeField>) -> Result<Self> {
        let scene = Self { intrinsics, keyframes };
        scene.validate()?;
        Ok(scene)
    }

    pub fn validate(&self) -> Result<()> {
        self.intrinsics.validate()?;
        if self.keyframes.is_empty() {
            return Err(Error::Invariant("scene needs at least one keyframe".into()));
        }
        for (k, kf) in self.keyframes.iter().enumerate() {
            kf.validate()
                .map_err(|e| Error::Invariant(format!("keyframe {k}: {e}")))?;
        }
        for pair in self.keyframes.windows(2) {
            if !(pair[1].time > pair[0].time) {
                return Err(Error::Invariant(format!(
                    "keyframe times must strictly increase ({} then {})",
                    pair[0].time, pair[1].time
                )));
            }
        }
        Ok(())
    }

    pub fn start_time(&self) -> f64 {
        self.keyframes[0].time
    }

    pub fn end_time(&self) -> f64 {
        self.keyframes[self.keyframes.len() - 1].time
    }

    pub fn times(&self) -> Vec<f64> {
        self.keyframes.iter().map(|k| k.time).collect()
    }

    pub fn gaussian_count(&self) -> usize {
        self.keyframes.iter().map(|k| k.gaussians.len()).sum()
    }

    pub fn all_gaussians(&self) -> impl Iterator<Item = &Gaussian4D> {
        self.keyframes.iter().flat_map(|k| k.gaussians.iter())
    }

    /// Index of the keyframe whose time equals `t` exactly, if any.
    pub fn keyframe_at(&self, t: f64) -> Option<usize> {
        self.keyframes.iter().position(|k| k.time == t)
    }

    /// Diagonal of the axis-aligned box around all Gaussian centers.
    pub fn diagonal(&self) -> f64 {
        let mut lo = Vec3::repeat(f64::INFINITY);
        let mut hi = Vec3::repeat(f64::NEG_INFINITY);
        for g in self.all_gaussians() {
            lo = lo.inf(&g.mu);
            hi = hi.sup(&g.mu);
        }
        if lo.x > hi.x {
            return 0.0;
        }
        (hi - lo).norm()
    }
}
