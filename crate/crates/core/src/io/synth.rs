//! Synthetic scenes with known motion, used as test oracles.
//!
//! Every object is a flat square sprite of `grid x grid` isotropic Gaussians
//! facing a camera at the origin that looks down +z. Gaussian `i` is the same
//! particle in every keyframe, so ground truth is indexed by `i` alone.
//! Stored velocities are chord displacements between neighboring keyframes
//! (continuous derivatives at the two ends), so transferring a keyframe to its
//! neighbor reproduces the true position.

use std::path::Path;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::{
    axis_angle_to_quat, CameraPose, Error, FormatError, Gaussian4D, Intrinsics, KeyframeField, Quat, Result, Scene,
    Vec3,
};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum MotionKind {
    Static,
    /// Constant velocity.
    Linear,
    /// Constant spin about the sprite normal through its center.
    Rotating,
    /// At rest until `switch_time`, then constant velocity.
    HalfStatic,
}

/// How motion kinds are assigned to the dynamic objects.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum MotionMix {
    Linear,
    Rotating,
    HalfStatic,
    /// Cycles linear, rotating, half-static.
    Mixed,
}

impl MotionMix {
    fn kind(self, i: usize) -> MotionKind {
        match self {
            MotionMix::Linear => MotionKind::Linear,
            MotionMix::Rotating => MotionKind::Rotating,
            MotionMix::HalfStatic => MotionKind::HalfStatic,
            MotionMix::Mixed => [MotionKind::Linear, MotionKind::Rotating, MotionKind::HalfStatic][i % 3],
        }
    }
}

impl std::str::FromStr for MotionMix {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "linear" => Ok(MotionMix::Linear),
            "rotating" => Ok(MotionMix::Rotating),
            "half-static" => Ok(MotionMix::HalfStatic),
            "mixed" => Ok(MotionMix::Mixed),
            other => Err(Error::InvalidArgument(format!("unknown motion kind `{other}`"))),
        }
    }
}

/// Generator parameters. As JSON, missing fields take their defaults.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SynthSpec {
    pub static_objects: usize,
    pub dynamic_objects: usize,
    pub motion: MotionMix,
    /// Keyframes at times 0, 1, ..., `keyframes - 1`.
    pub keyframes: usize,
    /// Gaussians per sprite side.
    pub grid: usize,
    /// Sprite side length.
    pub object_size: f64,
    /// Range of sprite depths.
    pub near_depth: f64,
    pub far_depth: f64,
    /// Translation speed of moving objects, world units per unit time.
    pub speed: f64,
    /// Spin rate of rotating objects, radians per unit time.
    pub spin: f64,
    /// Adds a static wall behind everything that fills the view.
    pub background: bool,
    pub background_grid: usize,
    pub width: usize,
    pub height: usize,
    pub focal: f64,
    pub tau: f64,
    pub alpha: f64,
    pub seed: u64,
}

impl Default for SynthSpec {
    fn default() -> Self {
        Self {
            static_objects: 2,
            dynamic_objects: 2,
            motion: MotionMix::Mixed,
            keyframes: 6,
            grid: 8,
            object_size: 1.0,
            near_depth: 4.0,
            far_depth: 8.0,
            speed: 0.3,
            spin: 0.3,
            background: true,
            background_grid: 32,
            width: 64,
            height: 48,
            focal: 60.0,
            tau: 0.5,
            alpha: 0.9,
            seed: 0,
        }
    }
}

impl SynthSpec {
    pub fn validate(&self) -> Result<()> {
        let fail = |m: String| Err(Error::InvalidArgument(m));
        if self.keyframes == 0 {
            return fail("at least one keyframe is required".into());
        }
        if self.grid == 0 || (self.background && self.background_grid == 0) {
            return fail("sprite grids must be non-empty".into());
        }
        if !(self.object_size > 0.0 && self.object_size.is_finite()) {
            return fail(format!("object size must be positive, got {}", self.object_size));
        }
        if !(self.near_depth > 0.0 && self.far_depth >= self.near_depth && self.far_depth.is_finite()) {
            return fail(format!(
                "depth range must satisfy 0 < near <= far, got [{}, {}]",
                self.near_depth, self.far_depth
            ));
        }
        if !(self.speed.is_finite() && self.spin.is_finite()) {
            return fail("speed and spin must be finite".into());
        }
        if !(self.tau > 0.0 && self.tau < 1.0) {
            return fail(format!("tau must lie in (0, 1), got {}", self.tau));
        }
        if !(self.alpha > 0.0 && self.alpha <= 1.0) {
            return fail(format!("alpha must lie in (0, 1], got {}", self.alpha));
        }
        Intrinsics::centered(self.focal, self.width, self.height).validate()
    }

    pub fn intrinsics(&self) -> Intrinsics {
        Intrinsics::centered(self.focal, self.width, self.height)
    }

    pub fn times(&self) -> Vec<f64> {
        (0..self.keyframes).map(|k| k as f64).collect()
    }
}

/// Motion law and particles of one sprite.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ObjectTruth {
    pub kind: MotionKind,
    pub dynamic: bool,
    pub background: bool,
    /// Center at time 0.
    pub center: Vec3,
    pub velocity: Vec3,
    pub spin: f64,
    pub switch_time: f64,
    pub half_size: f64,
    /// Particle offsets from the center in the sprite frame.
    pub offsets: Vec<Vec3>,
    pub first_index: usize,
}

impl ObjectTruth {
    pub fn center_at(&self, t: f64) -> Vec3 {
        match self.kind {
            MotionKind::Linear => self.center + self.velocity * t,
            MotionKind::HalfStatic => self.center + self.velocity * (t - self.switch_time).max(0.0),
            MotionKind::Static | MotionKind::Rotating => self.center,
        }
    }

    pub fn rotation_at(&self, t: f64) -> Quat {
        match self.kind {
            MotionKind::Rotating => axis_angle_to_quat(Vec3::new(0.0, 0.0, self.spin * t)),
            _ => Quat::IDENTITY,
        }
    }

    pub fn point_at(&self, j: usize, t: f64) -> Vec3 {
        self.center_at(t) + self.rotation_at(t).rotate(self.offsets[j])
    }

    /// Time derivative of particle `j`, from the right when `right` is set.
    fn point_rate(&self, j: usize, t: f64, right: bool) -> Vec3 {
        match self.kind {
            MotionKind::Static => Vec3::zeros(),
            MotionKind::Linear => self.velocity,
            MotionKind::HalfStatic => {
                if t > self.switch_time || (right && t == self.switch_time) {
                    self.velocity
                } else {
                    Vec3::zeros()
                }
            }
            MotionKind::Rotating => Vec3::new(0.0, 0.0, self.spin).cross(&self.rotation_at(t).rotate(self.offsets[j])),
        }
    }

    fn spin_vector(&self) -> Vec3 {
        match self.kind {
            MotionKind::Rotating => Vec3::new(0.0, 0.0, self.spin),
            _ => Vec3::zeros(),
        }
    }

    /// Parameter `s` in `(0, 1)` where segment `a -> b` crosses this sprite at time `t`.
    pub fn segment_hit(&self, a: &Vec3, b: &Vec3, t: f64) -> Option<f64> {
        let rot = self.rotation_at(t);
        let c = self.center_at(t);
        let n = rot.rotate(Vec3::z());
        let denom = n.dot(&(b - a));
        if denom.abs() < 1e-15 {
            return None;
        }
        let s = n.dot(&(c - a)) / denom;
        if !(s > 1e-9 && s < 1.0 - 1e-9) {
            return None;
        }
        let local = rot.conjugate().rotate(a + (b - a) * s - c);
        (local.x.abs() <= self.half_size && local.y.abs() <= self.half_size).then_some(s)
    }
}

/// Everything the generator knows about its scene.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GroundTruth {
    pub times: Vec<f64>,
    pub objects: Vec<ObjectTruth>,
    /// Object of each Gaussian index.
    pub object_of: Vec<usize>,
    /// `occluded[k][i]`: another sprite blocks the line of sight from keyframe
    /// `k`'s camera to Gaussian `i`.
    pub occluded: Vec<Vec<bool>>,
}

impl GroundTruth {
    pub fn gaussian_count(&self) -> usize {
        self.object_of.len()
    }

    pub fn is_dynamic(&self, i: usize) -> bool {
        self.objects[self.object_of[i]].dynamic
    }

    pub fn labels(&self) -> Vec<bool> {
        (0..self.gaussian_count()).map(|i| self.is_dynamic(i)).collect()
    }

    /// True position of Gaussian `i` at any time.
    pub fn position(&self, i: usize, t: f64) -> Vec3 {
        let o = &self.objects[self.object_of[i]];
        o.point_at(i - o.first_index, t)
    }

    pub fn dynamic_objects(&self) -> usize {
        self.objects.iter().filter(|o| o.dynamic).count()
    }

    pub fn static_objects(&self) -> usize {
        self.objects.iter().filter(|o| !o.dynamic).count()
    }

    /// Does any sprite other than `i`'s own cross the segment `from -> position(i, t)`?
    pub fn blocked(&self, i: usize, from: &Vec3, t: f64) -> bool {
        let p = self.position(i, t);
        let own = self.object_of[i];
        self.objects
            .iter()
            .enumerate()
            .any(|(j, o)| j != own && o.segment_hit(from, &p, t).is_some())
    }
}

fn sprite_offsets(grid: usize, half: f64) -> (Vec<Vec3>, f64) {
    let spacing = 2.0 * half / grid as f64;
    let mut out = Vec::with_capacity(grid * grid);
    for r in 0..grid {
        for c in 0..grid {
            out.push(Vec3::new(
                (c as f64 + 0.5) * spacing - half,
                (r as f64 + 0.5) * spacing - half,
                0.0,
            ));
        }
    }
    (out, spacing)
}

/// Builds a scene and its ground truth; the same spec always gives the same output.
pub fn synth_scene(spec: &SynthSpec) -> Result<(Scene, GroundTruth)> {
    spec.validate()?;
    let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
    let k = spec.intrinsics();
    let half = 0.5 * spec.object_size;
    let mut objects = Vec::new();
    let mut colors = Vec::new();
    let mut radii = Vec::new();
    let mut next_index = 0;

    let total = spec.static_objects + spec.dynamic_objects;
    for n in 0..total {
        let dynamic = n >= spec.static_objects;
        let kind = if dynamic {
            spec.motion.kind(n - spec.static_objects)
        } else {
            MotionKind::Static
        };
        let z = rng.gen_range(spec.near_depth..=spec.far_depth);
        let reach_x = 0.5 * z * (k.width as f64 / 2.0) / k.fx;
        let reach_y = 0.5 * z * (k.height as f64 / 2.0) / k.fy;
        let center = Vec3::new(rng.gen_range(-reach_x..=reach_x), rng.gen_range(-reach_y..=reach_y), z);
        let heading = rng.gen_range(0.0..std::f64::consts::TAU);
        let velocity = match kind {
            MotionKind::Linear | MotionKind::HalfStatic => Vec3::new(heading.cos(), heading.sin(), 0.0) * spec.speed,
            _ => Vec3::zeros(),
        };
        let color = Vec3::new(
            rng.gen_range(0.2..0.9),
            rng.gen_range(0.2..0.9),
            rng.gen_range(0.2..0.9),
        );
        let (offsets, spacing) = sprite_offsets(spec.grid, half);
        let count = offsets.len();
        objects.push(ObjectTruth {
            kind,
            dynamic,
            background: false,
            center,
            velocity,
            spin: if kind == MotionKind::Rotating { spec.spin } else { 0.0 },
            switch_time: (spec.keyframes / 2) as f64,
            half_size: half,
            offsets,
            first_index: next_index,
        });
        colors.push(color);
        radii.push(0.6 * spacing);
        next_index += count;
    }
    if spec.background {
        let z = spec.far_depth + 4.0;
        let wall_half = 1.2 * z * (k.width.max(k.height) as f64 / 2.0) / k.fx.min(k.fy);
        let (offsets, spacing) = sprite_offsets(spec.background_grid, wall_half);
        let count = offsets.len();
        objects.push(ObjectTruth {
            kind: MotionKind::Static,
            dynamic: false,
            background: true,
            center: Vec3::new(0.0, 0.0, z),
            velocity: Vec3::zeros(),
            spin: 0.0,
            switch_time: 0.0,
            half_size: wall_half,
            offsets,
            first_index: next_index,
        });
        colors.push(Vec3::new(0.35, 0.4, 0.45));
        radii.push(0.6 * spacing);
        next_index += count;
    }

    let times = spec.times();
    let last = times.len() - 1;
    let mut object_of = Vec::with_capacity(next_index);
    for (n, o) in objects.iter().enumerate() {
        object_of.extend(std::iter::repeat_n(n, o.offsets.len()));
    }

    let mut keyframes = Vec::with_capacity(times.len());
    for (ki, &t) in times.iter().enumerate() {
        let mut gaussians = Vec::with_capacity(next_index);
        for (n, o) in objects.iter().enumerate() {
            let rot_now = o.rotation_at(t);
            for j in 0..o.offsets.len() {
                let p = o.point_at(j, t);
                let (v_fwd, w_fwd) = if ki < last {
                    let dt = times[ki + 1] - t;
                    let step = rot_now.conjugate() * o.rotation_at(times[ki + 1]);
                    ((o.point_at(j, times[ki + 1]) - p) / dt, step.to_axis_angle() / dt)
                } else {
                    (o.point_rate(j, t, true), o.spin_vector())
                };
                let (v_bwd, w_bwd) = if ki > 0 {
                    let dt = t - times[ki - 1];
                    let step = rot_now.conjugate() * o.rotation_at(times[ki - 1]);
                    ((o.point_at(j, times[ki - 1]) - p) / dt, step.to_axis_angle() / dt)
                } else {
                    (-o.point_rate(j, t, false), -o.spin_vector())
                };
                let g = Gaussian4D {
                    rot: rot_now,
                    ..Gaussian4D::isotropic(p, radii[n], colors[n], spec.alpha)
                }
                .with_velocity(v_fwd, v_bwd)
                .with_angular_velocity(w_fwd, w_bwd)
                .with_tau(spec.tau);
                gaussians.push(g);
            }
        }
        keyframes.push(KeyframeField::new(CameraPose::identity(t), gaussians)?);
    }
    let scene = Scene::new(k, keyframes)?;

    let mut truth = GroundTruth {
        times: times.clone(),
        objects,
        object_of,
        occluded: Vec::new(),
    };
    truth.occluded = scene
        .keyframes
        .iter()
        .map(|kf| {
            let eye = kf.camera.center();
            (0..next_index).map(|i| truth.blocked(i, &eye, kf.time)).collect()
        })
        .collect();
    Ok((scene, truth))
}

pub fn write_ground_truth(path: &Path, truth: &GroundTruth) -> Result<(), FormatError> {
    super::manifest::write_json(path, truth)
}

pub fn read_ground_truth(path: &Path) -> Result<GroundTruth, FormatError> {
    let bytes = super::read_bytes(path)?;
    serde_json::from_slice(&bytes).map_err(|e| FormatError::malformed(path, e.to_string()))
}
