//! Moving keyframe Gaussians through time.
//!
//! A Gaussian anchored at time `t` reaches a query time `t_q` by linear
//! motion along its forward (`t_q >= t`) or backward velocity, rotates by the
//! matching angular velocity, and fades out with the normalized temporal
//! distance according to its life span.

use std::collections::HashMap;

use rayon::prelude::*;

use crate::{axis_angle_to_quat, quat_mul, Error, Gaussian4D, Quat, Result, Scene, Vec3};

/// Which anchors contribute Gaussians between two keyframes.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum InterpMode {
    /// Only the nearer keyframe; ties go to the earlier one.
    NearestOnly,
    /// Both bracketing keyframes, each faded by its own temporal distance.
    #[default]
    UnionBoth,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct InterpConfig {
    /// Opacity decay speed.
    pub gamma: f64,
    pub mode: InterpMode,
}

impl Default for InterpConfig {
    fn default() -> Self {
        Self {
            gamma: 4.0,
            mode: InterpMode::UnionBoth,
        }
    }
}

impl InterpConfig {
    pub fn new(gamma: f64, mode: InterpMode) -> Result<Self> {
        let cfg = Self { gamma, mode };
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn validate(&self) -> Result<()> {
        if self.gamma > 0.0 && self.gamma.is_finite() {
            Ok(())
        } else {
            Err(Error::InvalidArgument(format!(
                "gamma must be positive, got {}",
                self.gamma
            )))
        }
    }
}

/// Center of `g` (anchored at `t`) moved to `t_q`.
pub fn interpolate_position(g: &Gaussian4D, t: f64, t_q: f64) -> Vec3 {
    let dt = (t_q - t).abs();
    if t_q >= t {
        g.mu + g.v_fwd * dt
    } else {
        g.mu + g.v_bwd * dt
    }
}

/// Rotation of `g` (anchored at `t`) advanced to `t_q`.
pub fn interpolate_rotation(g: &Gaussian4D, t: f64, t_q: f64) -> Quat {
    let dt = (t_q - t).abs();
    let w = if t_q >= t { g.w_fwd } else { g.w_bwd };
    let step = w * dt;
    if step == Vec3::zeros() {
        return g.rot;
    }
    quat_mul(g.rot, axis_angle_to_quat(step))
}

/// Opacity after fading over normalized temporal distance `d` in `[0, 1]`.
pub fn interpolate_opacity(g: &Gaussian4D, d: f64, cfg: &InterpConfig) -> Result<f64> {
    if !(0.0..=1.0).contains(&d) {
        return Err(Error::InvalidArgument(format!(
            "normalized distance must lie in [0, 1], got {d}"
        )));
    }
    Ok(decayed_opacity(g, d, cfg.gamma))
}

#[inline]
fn decayed_opacity(g: &Gaussian4D, d: f64, gamma: f64) -> f64 {
    g.alpha * (-gamma * d.powf(1.0 / (1.0 - g.tau))).exp()
}

/// `|t_q - t|` relative to the length of the keyframe interval holding `t_q`.
pub fn normalized_distance(t_q: f64, t: f64, interval: (f64, f64)) -> Result<f64> {
    let (start, end) = interval;
    if !(end > start) {
        return Err(Error::DegenerateInterval { start, end });
    }
    if !(start <= t_q && t_q <= end) {
        return Err(Error::InvalidArgument(format!(
            "query time {t_q} is outside the interval [{start}, {end}]"
        )));
    }
    Ok(((t_q - t).abs() / (end - start)).min(1.0))
}

/// Position and rotation of `g` carried from `t` to `t_q`; opacity untouched.
pub fn transfer(g: &Gaussian4D, t: f64, t_q: f64) -> Gaussian4D {
    Gaussian4D {
        mu: interpolate_position(g, t, t_q),
        rot: interpolate_rotation(g, t, t_q),
        ..*g
    }
}

/// Full transfer including the opacity fade for distance `d`.
fn transfer_faded(g: &Gaussian4D, t: f64, t_q: f64, d: f64, gamma: f64) -> Gaussian4D {
    Gaussian4D {
        alpha: decayed_opacity(g, d, gamma),
        ..transfer(g, t, t_q)
    }
}

/// The Gaussian field at time `t_q`.
///
/// At a keyframe time the keyframe's Gaussians are returned unchanged. In
/// between, Gaussians of the bracketing keyframes (both, or only the nearer
/// one, per `cfg.mode`) are transferred to `t_q`. Times outside the scene
/// range are rejected.
pub fn interpolate_field(scene: &Scene, t_q: f64, cfg: &InterpConfig) -> Result<Vec<Gaussian4D>> {
    cfg.validate()?;
    let (start, end) = (scene.start_time(), scene.end_time());
    if !(start <= t_q && t_q <= end) {
        return Err(Error::TimeOutOfRange { time: t_q, start, end });
    }
    if let Some(k) = scene.keyframe_at(t_q) {
        return Ok(scene.keyframes[k].gaussians.clone());
    }
    let k = scene
        .keyframes
        .windows(2)
        .position(|w| w[0].time < t_q && t_q < w[1].time)
        .expect("time inside range but not bracketed");
    let (a, b) = (&scene.keyframes[k], &scene.keyframes[k + 1]);
    let interval = (a.time, b.time);
    let d_a = normalized_distance(t_q, a.time, interval)?;
    let d_b = normalized_distance(t_q, b.time, interval)?;

    let carry = |kf: &crate::KeyframeField, d: f64| -> Vec<Gaussian4D> {
        kf.gaussians
            .par_iter()
            .map(|g| transfer_faded(g, kf.time, t_q, d, cfg.gamma))
            .collect()
    };
    Ok(match cfg.mode {
        InterpMode::UnionBoth => {
            let mut out = carry(a, d_a);
            out.extend(carry(b, d_b));
            out
        }
        InterpMode::NearestOnly => {
            if t_q - a.time <= b.time - t_q {
                carry(a, d_a)
            } else {
                carry(b, d_b)
            }
        }
    })
}

fn check_index_sets(scene: &Scene, ids: &[Vec<usize>]) -> Result<()> {
    if ids.len() != scene.keyframes.len() {
        return Err(Error::InvalidArgument(format!(
            "expected {} index sets, got {}",
            scene.keyframes.len(),
            ids.len()
        )));
    }
    for (k, (set, kf)) in ids.iter().zip(&scene.keyframes).enumerate() {
        if let Some(&bad) = set.iter().find(|&&i| i >= kf.gaussians.len()) {
            return Err(Error::IndexOutOfRange {
                keyframe: k,
                index: bad,
                len: kf.gaussians.len(),
            });
        }
    }
    Ok(())
}

/// Union of the selected static Gaussians of every keyframe, left at their anchors.
pub fn aggregate_static(scene: &Scene, static_ids: &[Vec<usize>]) -> Result<Vec<Gaussian4D>> {
    check_index_sets(scene, static_ids)?;
    Ok(scene
        .keyframes
        .iter()
        .zip(static_ids)
        .flat_map(|(kf, ids)| ids.iter().map(move |&i| kf.gaussians[i]))
        .collect())
}

/// Keeps the first Gaussian falling in each cubic cell of side `cell`.
///
/// Aggregation itself never deduplicates; this is an opt-in post-process.
pub fn dedup_voxel(gaussians: &[Gaussian4D], cell: f64) -> Result<Vec<Gaussian4D>> {
    if !(cell > 0.0) {
        return Err(Error::InvalidArgument(format!(
            "voxel cell size must be positive, got {cell}"
        )));
    }
    let mut seen = std::collections::HashSet::new();
    Ok(gaussians
        .iter()
        .filter(|g| seen.insert(cell_key(&g.mu, cell)))
        .copied()
        .collect())
}

/// Selected dynamic Gaussians of the `window` keyframes nearest `t_ref`,
/// each carried to `t_ref`. Output follows keyframe order.
pub fn aggregate_dynamic(
    scene: &Scene,
    dynamic_ids: &[Vec<usize>],
    t_ref: f64,
    window: usize,
) -> Result<Vec<Gaussian4D>> {
    check_index_sets(scene, dynamic_ids)?;
    let mut order: Vec<usize> = (0..scene.keyframes.len()).collect();
    order.sort_by(|&a, &b| {
        let da = (scene.keyframes[a].time - t_ref).abs();
        let db = (scene.keyframes[b].time - t_ref).abs();
        da.total_cmp(&db).then(a.cmp(&b))
    });
    order.truncate(window);
    order.sort_unstable();
    Ok(order
        .into_iter()
        .flat_map(|k| {
            let kf = &scene.keyframes[k];
            dynamic_ids[k]
                .iter()
                .map(move |&i| transfer(&kf.gaussians[i], kf.time, t_ref))
        })
        .collect())
}

/// A chain of associated Gaussians over consecutive keyframes.
#[derive(Debug, Clone, PartialEq)]
pub struct Track3D {
    /// Keyframe of the first entry.
    pub start_keyframe: usize,
    /// Gaussian index within each successive keyframe.
    pub indices: Vec<usize>,
    /// Anchor position of each entry.
    pub positions: Vec<Vec3>,
}

impl Track3D {
    pub fn len(&self) -> usize {
        self.indices.len()
    }

    pub fn is_empty(&self) -> bool {
        self.indices.is_empty()
    }

    /// Keyframe of entry `i`.
    pub fn keyframe(&self, i: usize) -> usize {
        self.start_keyframe + i
    }
}

fn cell_key(p: &Vec3, cell: f64) -> (i64, i64, i64) {
    (
        (p.x / cell).floor() as i64,
        (p.y / cell).floor() as i64,
        (p.z / cell).floor() as i64,
    )
}

/// Uniform hash grid over a point set for fixed-radius nearest queries.
struct PointGrid<'a> {
    cell: f64,
    points: &'a [Vec3],
    cells: HashMap<(i64, i64, i64), Vec<usize>>,
}

impl<'a> PointGrid<'a> {
    fn new(points: &'a [Vec3], cell: f64) -> Self {
        let mut cells: HashMap<_, Vec<usize>> = HashMap::new();
        for (i, p) in points.iter().enumerate() {
            cells.entry(cell_key(p, cell)).or_default().push(i);
        }
        Self { cell, points, cells }
    }

    /// Nearest point within `radius` (inclusive); ties pick the smallest index.
    fn nearest(&self, q: &Vec3, radius: f64) -> Option<(usize, f64)> {
        let (cx, cy, cz) = cell_key(q, self.cell);
        let mut best: Option<(usize, f64)> = None;
        for dx in -1..=1i64 {
            for dy in -1..=1i64 {
                for dz in -1..=1i64 {
                    let key = (cx.saturating_add(dx), cy.saturating_add(dy), cz.saturating_add(dz));
                    let Some(bucket) = self.cells.get(&key) else {
                        continue;
                    };
                    for &j in bucket {
                        let d = (self.points[j] - q).norm();
                        if d > radius {
                            continue;
                        }
                        best = match best {
                            Some((bj, bd)) if bd < d || (bd == d && bj < j) => Some((bj, bd)),
                            _ => Some((j, d)),
                        };
                    }
                }
            }
        }
        best
    }
}

/// Links Gaussians across consecutive keyframes by forward-predicted position.
///
/// Each Gaussian of keyframe `k` is advanced to `T_{k+1}` with its forward
/// velocity and matched to the nearest Gaussian of keyframe `k+1` within
/// `radius`. A target claimed by several predictions goes to the closest one
/// (ties to the smaller index); the others end their tracks. Every Gaussian
/// belongs to exactly one track, so unmatched Gaussians start new ones.
pub fn track_3d(scene: &Scene, radius: f64) -> Result<Vec<Track3D>> {
    if !(radius > 0.0) {
        return Err(Error::InvalidArgument(format!(
            "tracking radius must be positive, got {radius}"
        )));
    }
    if scene.keyframes.len() < 2 {
        return Err(Error::TooFewKeyframes {
            needed: 2,
            have: scene.keyframes.len(),
        });
    }
    let first = &scene.keyframes[0];
    let mut tracks: Vec<Track3D> = first
        .gaussians
        .iter()
        .enumerate()
        .map(|(i, g)| Track3D {
            start_keyframe: 0,
            indices: vec![i],
            positions: vec![g.mu],
        })
        .collect();
    let mut current: Vec<usize> = (0..tracks.len()).collect();

    for k in 0..scene.keyframes.len() - 1 {
        let (a, b) = (&scene.keyframes[k], &scene.keyframes[k + 1]);
        let targets: Vec<Vec3> = b.gaussians.iter().map(|g| g.mu).collect();
        let grid = PointGrid::new(&targets, radius);
        let candidates: Vec<Option<(usize, f64)>> = a
            .gaussians
            .par_iter()
            .map(|g| grid.nearest(&interpolate_position(g, a.time, b.time), radius))
            .collect();

        // Resolve competing claims on each target.
        let mut claim: Vec<Option<(usize, f64)>> = vec![None; targets.len()];
        for (i, cand) in candidates.iter().enumerate() {
            if let Some((j, d)) = *cand {
                match claim[j] {
                    Some((_, bd)) if bd <= d => {}
                    _ => claim[j] = Some((i, d)),
                }
            }
        }

        let mut next = Vec::with_capacity(targets.len());
        for (j, c) in claim.iter().enumerate() {
            let track = match c {
                Some((i, _)) => current[*i],
                None => {
                    tracks.push(Track3D {
                        start_keyframe: k + 1,
                        indices: Vec::new(),
                        positions: Vec::new(),
                    });
                    tracks.len() - 1
                }
            };
            tracks[track].indices.push(j);
            tracks[track].positions.push(targets[j]);
            next.push(track);
        }
        current = next;
    }
    // Tracks started later were appended after earlier ones; order by start.
    tracks.sort_by_key(|t| (t.start_keyframe, t.indices[0]));
    Ok(tracks)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::{CameraPose, Intrinsics, KeyframeField};
    use std::f64::consts::{FRAC_PI_4, PI};

    fn base() -> Gaussian4D {
        Gaussian4D::isotropic(Vec3::zeros(), 0.1, Vec3::new(0.5, 0.5, 0.5), 0.8)
    }

    fn scene_of(fields: Vec<(f64, Vec<Gaussian4D>)>) -> Scene {
        let kfs = fields
            .into_iter()
            .map(|(t, gs)| KeyframeField::new(CameraPose::identity(t), gs).unwrap())
            .collect();
        Scene::new(Intrinsics::centered(20.0, 16, 16), kfs).unwrap()
    }

    #[test]
    fn static_gaussian_does_not_move() {
        let g = base();
        for tq in [-3.0, 0.0, 0.25, 7.0] {
            assert_eq!(interpolate_position(&g, 1.0, tq), g.mu);
        }
    }

    #[test]
    fn forward_and_backward_positions() {
        let g = base().with_velocity(Vec3::new(1.0, 2.0, 3.0), Vec3::zeros());
        assert_eq!(interpolate_position(&g, 0.0, 0.5), Vec3::new(0.5, 1.0, 1.5));
        let mut g = base().with_velocity(Vec3::zeros(), Vec3::new(-2.0, 0.0, 0.0));
        g.mu = Vec3::new(1.0, 1.0, 1.0);
        assert_eq!(interpolate_position(&g, 4.0, 3.0), Vec3::new(-1.0, 1.0, 1.0));
    }

    #[test]
    fn rotation_half_angle() {
        let g = base().with_angular_velocity(Vec3::new(0.0, 0.0, PI), Vec3::zeros());
        let q = interpolate_rotation(&g, 0.0, 0.5);
        let expected = Quat::new(FRAC_PI_4.cos(), 0.0, 0.0, FRAC_PI_4.sin());
        assert!((q.w - expected.w).abs() < 1e-12 && (q.z - expected.z).abs() < 1e-12);
        assert_eq!(interpolate_rotation(&base(), 0.0, 0.5), base().rot);
    }

    #[test]
    fn opacity_examples() {
        let cfg = InterpConfig::new(2.0, InterpMode::UnionBoth).unwrap();
        let g = base().with_tau(0.5);
        assert_eq!(interpolate_opacity(&g, 0.0, &cfg).unwrap(), g.alpha);
        let a = interpolate_opacity(&g, 0.5, &cfg).unwrap();
        assert!((a - 0.8 * (-0.5f64).exp()).abs() < 1e-15);
        assert!((a - 0.48522).abs() < 1e-5);
        let long = base().with_tau(0.999);
        let a = interpolate_opacity(&long, 0.5, &InterpConfig::default()).unwrap();
        assert!((a - long.alpha).abs() < 1e-6);
        assert!(interpolate_opacity(&g, 1.5, &cfg).is_err());
        assert!(interpolate_opacity(&g, -0.1, &cfg).is_err());
        assert!(interpolate_opacity(&g, f64::NAN, &cfg).is_err());
    }

    #[test]
    fn opacity_knife_edge_at_full_distance() {
        let cfg = InterpConfig::default();
        for tau in [0.01, 0.5, 0.999] {
            let g = base().with_tau(tau);
            let a = interpolate_opacity(&g, 1.0, &cfg).unwrap();
            assert!((a - g.alpha * (-cfg.gamma).exp()).abs() < 1e-12);
        }
    }

    #[test]
    fn normalized_distance_cases() {
        assert_eq!(normalized_distance(2.0, 2.0, (2.0, 6.0)).unwrap(), 0.0);
        assert_eq!(normalized_distance(4.0, 2.0, (2.0, 6.0)).unwrap(), 0.5);
        assert_eq!(normalized_distance(2.0, 6.0, (2.0, 6.0)).unwrap(), 1.0);
        assert!(matches!(
            normalized_distance(2.0, 2.0, (2.0, 2.0)),
            Err(Error::DegenerateInterval { .. })
        ));
    }

    #[test]
    fn gamma_must_be_positive() {
        assert!(InterpConfig::new(0.0, InterpMode::NearestOnly).is_err());
    }

    #[test]
    fn field_at_keyframe_is_identity() {
        let g = base().with_velocity(Vec3::x(), -Vec3::x());
        let s = scene_of(vec![(0.0, vec![g]), (2.0, vec![g, g])]);
        for mode in [InterpMode::NearestOnly, InterpMode::UnionBoth] {
            let cfg = InterpConfig { gamma: 4.0, mode };
            assert_eq!(interpolate_field(&s, 0.0, &cfg).unwrap(), vec![g]);
            assert_eq!(interpolate_field(&s, 2.0, &cfg).unwrap(), vec![g, g]);
        }
        let single = scene_of(vec![(5.0, vec![g])]);
        assert_eq!(
            interpolate_field(&single, 5.0, &InterpConfig::default()).unwrap(),
            vec![g]
        );
    }

    #[test]
    fn field_modes_and_range() {
        let a = base().with_velocity(Vec3::x(), Vec3::zeros());
        let b = base().with_velocity(Vec3::zeros(), -Vec3::x());
        let s = scene_of(vec![(0.0, vec![a]), (4.0, vec![b, b])]);
        let union = interpolate_field(&s, 1.0, &InterpConfig::default()).unwrap();
        assert_eq!(union.len(), 3);
        let near = InterpConfig {
            mode: InterpMode::NearestOnly,
            ..Default::default()
        };
        assert_eq!(interpolate_field(&s, 1.0, &near).unwrap().len(), 1);
        assert_eq!(interpolate_field(&s, 3.0, &near).unwrap().len(), 2);
        // Midpoint tie goes to the earlier keyframe.
        let mid = interpolate_field(&s, 2.0, &near).unwrap();
        assert_eq!(mid.len(), 1);
        assert_eq!(mid[0].mu, Vec3::new(2.0, 0.0, 0.0));
        assert!(matches!(
            interpolate_field(&s, 4.5, &near),
            Err(Error::TimeOutOfRange { .. })
        ));
        assert!(interpolate_field(&s, -0.1, &near).is_err());
    }

    #[test]
    fn aggregation() {
        let g = base();
        let s = scene_of(vec![(0.0, vec![g, g]), (1.0, vec![g]), (2.0, vec![g])]);
        let all = aggregate_static(&s, &[vec![0], vec![0], vec![0]]).unwrap();
        assert_eq!(all.len(), 3);
        assert_eq!(dedup_voxel(&all, 0.5).unwrap().len(), 1);
        assert!(matches!(
            aggregate_static(&s, &[vec![2], vec![], vec![]]),
            Err(Error::IndexOutOfRange { index: 2, .. })
        ));
        assert!(aggregate_dynamic(&s, &[vec![0], vec![0], vec![0]], 1.0, 0)
            .unwrap()
            .is_empty());
        let one = aggregate_dynamic(&s, &[vec![1], vec![0], vec![0]], 0.0, 1).unwrap();
        assert_eq!(one, vec![g]);
    }

    #[test]
    fn tracking_single_mover() {
        let v = Vec3::new(0.5, 0.0, 0.0);
        let gs: Vec<_> = (0..4)
            .map(|k| {
                let mut g = base().with_velocity(v, -v);
                g.mu = Vec3::new(k as f64 * 0.5, 0.0, 2.0);
                (k as f64, vec![g])
            })
            .collect();
        let tracks = track_3d(&scene_of(gs), 0.1).unwrap();
        assert_eq!(tracks.len(), 1);
        assert_eq!(tracks[0].indices, vec![0, 0, 0, 0]);
    }

    #[test]
    fn tracking_requires_two_keyframes() {
        let s = scene_of(vec![(0.0, vec![base()])]);
        assert!(matches!(track_3d(&s, 1.0), Err(Error::TooFewKeyframes { .. })));
        let s = scene_of(vec![(0.0, vec![base()]), (1.0, vec![base()])]);
        assert!(track_3d(&s, 0.0).is_err());
    }

    #[test]
    fn contested_target_goes_to_closest() {
        let mut a = base();
        a.mu = Vec3::new(0.0, 0.0, 0.0);
        let mut b = base();
        b.mu = Vec3::new(0.3, 0.0, 0.0);
        let mut t = base();
        t.mu = Vec3::new(0.25, 0.0, 0.0);
        let s = scene_of(vec![(0.0, vec![a, b]), (1.0, vec![t])]);
        let tracks = track_3d(&s, 1.0).unwrap();
        assert_eq!(tracks.len(), 2);
        let long: Vec<_> = tracks.iter().filter(|t| t.len() == 2).collect();
        assert_eq!(long.len(), 1);
        assert_eq!(long[0].indices, vec![1, 0]);
    }
}
