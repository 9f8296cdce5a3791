#![allow(dead_code)]

use rand::Rng;
use splat4d::{axis_angle_to_quat, CameraPose, Gaussian4D, Intrinsics, KeyframeField, Quat, Scene, Vec3};

pub fn random_unit(rng: &mut impl Rng) -> Vec3 {
    loop {
        let v = Vec3::new(
            rng.gen_range(-1.0..1.0),
            rng.gen_range(-1.0..1.0),
            rng.gen_range(-1.0..1.0),
        );
        let n = v.norm();
        if n > 1e-3 && n <= 1.0 {
            return v / n;
        }
    }
}

pub fn random_quat(rng: &mut impl Rng) -> Quat {
    let q = Quat::new(
        rng.gen_range(-1.0..1.0),
        rng.gen_range(-1.0..1.0),
        rng.gen_range(-1.0..1.0),
        rng.gen_range(-1.0..1.0),
    );
    if q.norm() < 1e-3 {
        return Quat::IDENTITY;
    }
    q.normalized()
}

pub fn random_vec(rng: &mut impl Rng, r: f64) -> Vec3 {
    Vec3::new(rng.gen_range(-r..=r), rng.gen_range(-r..=r), rng.gen_range(-r..=r))
}

/// Anisotropic Gaussian somewhere in front of an identity camera.
pub fn random_gaussian(rng: &mut impl Rng) -> Gaussian4D {
    Gaussian4D {
        mu: Vec3::new(
            rng.gen_range(-1.5..1.5),
            rng.gen_range(-1.5..1.5),
            rng.gen_range(2.0..6.0),
        ),
        alpha: rng.gen_range(0.05..1.0),
        rot: random_quat(rng),
        scale: Vec3::new(
            rng.gen_range(0.03..0.5),
            rng.gen_range(0.03..0.5),
            rng.gen_range(0.03..0.5),
        ),
        color: Vec3::new(rng.gen(), rng.gen(), rng.gen()),
        tau: rng.gen_range(0.01..0.99),
        v_fwd: random_vec(rng, 1.0),
        v_bwd: random_vec(rng, 1.0),
        w_fwd: random_vec(rng, 1.0),
        w_bwd: random_vec(rng, 1.0),
    }
}

/// Fronto-parallel square of `grid x grid` isotropic Gaussians.
pub fn sprite(center: Vec3, half: f64, grid: usize, color: Vec3, alpha: f64) -> Vec<Gaussian4D> {
    rect_sprite(
        center.x - half,
        center.x + half,
        center.y - half,
        center.y + half,
        center.z,
        2.0 * half / grid as f64,
        color,
        alpha,
    )
}

/// Fronto-parallel rectangle `[x0, x1] x [y0, y1]` at depth `z`, filled at `spacing`.
#[allow(clippy::too_many_arguments)]
pub fn rect_sprite(
    x0: f64,
    x1: f64,
    y0: f64,
    y1: f64,
    z: f64,
    spacing: f64,
    color: Vec3,
    alpha: f64,
) -> Vec<Gaussian4D> {
    let nx = ((x1 - x0) / spacing).round().max(1.0) as usize;
    let ny = ((y1 - y0) / spacing).round().max(1.0) as usize;
    let (sx, sy) = ((x1 - x0) / nx as f64, (y1 - y0) / ny as f64);
    let mut out = Vec::with_capacity(nx * ny);
    for r in 0..ny {
        for c in 0..nx {
            let p = Vec3::new(x0 + (c as f64 + 0.5) * sx, y0 + (r as f64 + 0.5) * sy, z);
            out.push(Gaussian4D::isotropic(p, 0.6 * sx.max(sy), color, alpha));
        }
    }
    out
}

/// One keyframe at time 0 seen from the identity camera.
pub fn still_scene(k: Intrinsics, gaussians: Vec<Gaussian4D>) -> Scene {
    Scene::new(
        k,
        vec![KeyframeField::new(CameraPose::identity(0.0), gaussians).unwrap()],
    )
    .unwrap()
}

pub fn random_pose(rng: &mut impl Rng, time: f64) -> CameraPose {
    let rot = axis_angle_to_quat(random_vec(rng, 0.2));
    CameraPose::from_center(rot, random_vec(rng, 0.3), time)
}

pub fn pool(threads: usize) -> rayon::ThreadPool {
    rayon::ThreadPoolBuilder::new().num_threads(threads).build().unwrap()
}

/// Every `f64` of a scene as raw bits, in a fixed order.
pub fn scene_bits(s: &Scene) -> Vec<u64> {
    let k = &s.intrinsics;
    let mut out: Vec<u64> = [k.fx, k.fy, k.cx, k.cy].iter().map(|v| v.to_bits()).collect();
    out.push(k.width as u64);
    out.push(k.height as u64);
    for kf in &s.keyframes {
        let c = &kf.camera;
        out.push(kf.time.to_bits());
        out.extend(c.quat.to_array().iter().chain(c.trans.iter()).map(|v| v.to_bits()));
        out.push(c.time.to_bits());
        out.push(kf.gaussians.len() as u64);
        for g in &kf.gaussians {
            let vals =
                g.mu.iter()
                    .chain([g.alpha].iter())
                    .chain(g.rot.to_array().iter())
                    .chain(g.scale.iter())
                    .chain(g.color.iter())
                    .chain([g.tau].iter())
                    .chain(g.v_fwd.iter())
                    .chain(g.v_bwd.iter())
                    .chain(g.w_fwd.iter())
                    .chain(g.w_bwd.iter())
                    .map(|v| v.to_bits())
                    .collect::<Vec<_>>();
            out.extend(vals);
        }
    }
    out
}

/// Largest absolute difference across two equally sized sample lists.
pub fn max_abs_diff(a: impl IntoIterator<Item = f64>, b: impl IntoIterator<Item = f64>) -> f64 {
    a.into_iter().zip(b).map(|(x, y)| (x - y).abs()).fold(0.0, f64::max)
}

pub fn rgb_samples(g: &splat4d::Grid<Vec3>) -> Vec<f64> {
    g.data().iter().flat_map(|p| [p.x, p.y, p.z]).collect()
}
