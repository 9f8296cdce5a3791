//! Tile-based software splatting.
//!
//! Gaussians are projected with the perspective Jacobian, sorted once per
//! frame by camera depth, and composited front to back. Tiles only decide
//! which Gaussians a pixel has to look at; the compositing order per pixel is
//! always the global depth order, so results do not depend on tile size or
//! thread count.

mod oracle;

pub use oracle::render_oracle;

use rayon::prelude::*;

use crate::camera::safe_depth;
use crate::{CameraPose, Error, Gaussian4D, Grid, Intrinsics, Mat3, Result, Vec2, Vec3};

/// Accumulated opacity below which the depth buffer reports 0.
pub const DEPTH_MIN_OPACITY: f64 = 1e-4;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RenderOptions {
    pub width: usize,
    pub height: usize,
    pub near: f64,
    pub far: f64,
    pub tile_size: usize,
    /// Per-Gaussian weights below this are skipped.
    pub alpha_min: f64,
    /// Added to the diagonal of every projected covariance, in pixels squared.
    pub dilation: f64,
    /// Compositing stops once transmittance drops below this.
    pub min_transmittance: f64,
}

impl RenderOptions {
    /// Defaults at the native resolution of `k`.
    pub fn for_intrinsics(k: &Intrinsics) -> Self {
        Self {
            width: k.width,
            height: k.height,
            near: 0.01,
            far: 1.0e4,
            tile_size: 16,
            alpha_min: 1.0 / 255.0,
            dilation: 0.3,
            min_transmittance: 1e-4,
        }
    }

    pub fn with_size(mut self, width: usize, height: usize) -> Self {
        self.width = width;
        self.height = height;
        self
    }

    pub fn validate(&self) -> Result<()> {
        let problem = if self.width == 0 || self.height == 0 {
            Some("image size must be positive".to_string())
        } else if !(self.near > 0.0) {
            Some(format!("near must be positive, got {}", self.near))
        } else if !(self.far > self.near) {
            Some(format!("far ({}) must exceed near ({})", self.far, self.near))
        } else if self.tile_size == 0 {
            Some("tile size must be positive".to_string())
        } else if !(self.alpha_min > 0.0 && self.alpha_min < 1.0) {
            Some(format!("alpha_min must lie in (0, 1), got {}", self.alpha_min))
        } else if !(self.dilation >= 0.0) {
            Some(format!("dilation must be non-negative, got {}", self.dilation))
        } else if !(self.min_transmittance >= 0.0 && self.min_transmittance < 1.0) {
            Some(format!(
                "min_transmittance must lie in [0, 1), got {}",
                self.min_transmittance
            ))
        } else {
            None
        };
        match problem {
            Some(p) => Err(Error::InvalidArgument(p)),
            None => Ok(()),
        }
    }
}

/// Counters from one render call.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct RenderStats {
    pub input: usize,
    pub drawn: usize,
    pub clipped: usize,
    pub out_of_view: usize,
    /// Skipped because the projected covariance was not invertible.
    pub degenerate: usize,
}

/// All buffers produced by one render call.
#[derive(Debug, Clone, PartialEq)]
pub struct RenderTarget {
    pub rgb: Grid<Vec3>,
    /// Expected camera depth, normalized by accumulated opacity.
    pub depth: Grid<f64>,
    pub acc_opacity: Grid<f64>,
    /// Composited world-frame forward velocity.
    pub vel_fwd: Grid<Vec3>,
    /// Composited world-frame backward velocity.
    pub vel_bwd: Grid<Vec3>,
    pub stats: RenderStats,
}

impl RenderTarget {
    pub fn blank(width: usize, height: usize) -> Self {
        Self {
            rgb: Grid::new(width, height, Vec3::zeros()),
            depth: Grid::new(width, height, 0.0),
            acc_opacity: Grid::new(width, height, 0.0),
            vel_fwd: Grid::new(width, height, Vec3::zeros()),
            vel_bwd: Grid::new(width, height, Vec3::zeros()),
            stats: RenderStats::default(),
        }
    }

    pub fn width(&self) -> usize {
        self.rgb.width()
    }

    pub fn height(&self) -> usize {
        self.rgb.height()
    }
}

/// Screen-space footprint of one Gaussian.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Projected {
    /// Index into the input slice.
    pub index: usize,
    pub mean: Vec2,
    /// Covariance entries `[xx, xy, yy]`.
    pub cov: [f64; 3],
    /// Inverse covariance entries `[xx, xy, yy]`.
    pub conic: [f64; 3],
    pub depth: f64,
    pub alpha: f64,
    pub color: Vec3,
    pub v_fwd: Vec3,
    pub v_bwd: Vec3,
}

impl Projected {
    /// Compositing weight at pixel `(px, py)` before transmittance.
    #[inline]
    pub fn weight_at(&self, px: f64, py: f64) -> f64 {
        let dx = px - self.mean.x;
        let dy = py - self.mean.y;
        let [a, b, c] = self.conic;
        let q = a * dx * dx + 2.0 * b * dx * dy + c * dy * dy;
        self.alpha * (-0.5 * q).exp()
    }

    /// Inclusive pixel box outside which the weight is below `alpha_min`.
    fn support(&self, alpha_min: f64, width: usize, height: usize) -> Option<[usize; 4]> {
        if self.alpha < alpha_min {
            return None;
        }
        let q = 2.0 * (self.alpha / alpha_min).ln();
        let rx = (q * self.cov[0]).sqrt() + 1.0;
        let ry = (q * self.cov[2]).sqrt() + 1.0;
        let x0 = (self.mean.x - rx).ceil().max(0.0);
        let y0 = (self.mean.y - ry).ceil().max(0.0);
        let x1 = (self.mean.x + rx).floor().min(width as f64 - 1.0);
        let y1 = (self.mean.y + ry).floor().min(height as f64 - 1.0);
        if x0 > x1 || y0 > y1 {
            return None;
        }
        Some([x0 as usize, y0 as usize, x1 as usize, y1 as usize])
    }
}

/// Why a Gaussian was not projected.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Rejection {
    /// Camera depth outside `(near, far)`.
    Clipped,
    /// Mean more than three standard deviations outside the image.
    OutOfView,
    /// Projected covariance determinant below 1e-12.
    Degenerate,
}

/// World covariance `R diag(s^2) R^T` of a Gaussian.
pub fn covariance_3d(g: &Gaussian4D) -> Mat3 {
    let m = g.rot.to_matrix() * Mat3::from_diagonal(&g.scale);
    m * m.transpose()
}

/// Projects one Gaussian into the image described by `k`, `opts.width`
/// and `opts.height` (intrinsics are rescaled to that size).
pub fn project_gaussian(
    g: &Gaussian4D,
    pose: &CameraPose,
    k: &Intrinsics,
    opts: &RenderOptions,
) -> std::result::Result<Projected, Rejection> {
    let k = k.scaled_to(opts.width, opts.height);
    project_scaled(0, g, pose, &pose.rotation(), &k, opts)
}

fn project_scaled(
    index: usize,
    g: &Gaussian4D,
    pose: &CameraPose,
    view: &Mat3,
    k: &Intrinsics,
    opts: &RenderOptions,
) -> std::result::Result<Projected, Rejection> {
    let c = view * g.mu + pose.trans;
    if !(c.z > opts.near && c.z < opts.far) {
        return Err(Rejection::Clipped);
    }
    let z = safe_depth(c.z);
    let cov_cam = view * covariance_3d(g) * view.transpose();
    let j = nalgebra::Matrix2x3::new(
        k.fx / z,
        0.0,
        -k.fx * c.x / (z * z),
        0.0,
        k.fy / z,
        -k.fy * c.y / (z * z),
    );
    let cov2 = j * cov_cam * j.transpose();
    let xx = cov2[(0, 0)] + opts.dilation;
    let xy = 0.5 * (cov2[(0, 1)] + cov2[(1, 0)]);
    let yy = cov2[(1, 1)] + opts.dilation;
    let det = xx * yy - xy * xy;
    if !(det >= 1e-12) {
        return Err(Rejection::Degenerate);
    }
    let mean = Vec2::new(k.fx * c.x / z + k.cx, k.fy * c.y / z + k.cy);
    let (sx, sy) = (3.0 * xx.sqrt(), 3.0 * yy.sqrt());
    let outside = mean.x < -0.5 - sx
        || mean.x > k.width as f64 - 0.5 + sx
        || mean.y < -0.5 - sy
        || mean.y > k.height as f64 - 0.5 + sy;
    if outside {
        return Err(Rejection::OutOfView);
    }
    Ok(Projected {
        index,
        mean,
        cov: [xx, xy, yy],
        conic: [yy / det, -xy / det, xx / det],
        depth: c.z,
        alpha: g.alpha,
        color: g.color,
        v_fwd: g.v_fwd,
        v_bwd: g.v_bwd,
    })
}

/// Projects every Gaussian and returns the survivors sorted front to back
/// (ties by input index), together with the rejection counts.
pub fn project_sorted(
    gaussians: &[Gaussian4D],
    pose: &CameraPose,
    k: &Intrinsics,
    opts: &RenderOptions,
) -> (Vec<Projected>, RenderStats) {
    let k = k.scaled_to(opts.width, opts.height);
    let view = pose.rotation();
    let results: Vec<_> = gaussians
        .par_iter()
        .enumerate()
        .map(|(i, g)| project_scaled(i, g, pose, &view, &k, opts))
        .collect();
    let mut stats = RenderStats {
        input: gaussians.len(),
        ..Default::default()
    };
    let mut projected = Vec::with_capacity(results.len());
    for r in results {
        match r {
            Ok(p) => projected.push(p),
            Err(Rejection::Clipped) => stats.clipped += 1,
            Err(Rejection::OutOfView) => stats.out_of_view += 1,
            Err(Rejection::Degenerate) => stats.degenerate += 1,
        }
    }
    stats.drawn = projected.len();
    projected.sort_by(|a, b| a.depth.total_cmp(&b.depth).then(a.index.cmp(&b.index)));
    (projected, stats)
}

#[derive(Clone, Copy)]
struct PixelAccum {
    rgb: Vec3,
    depth: f64,
    vf: Vec3,
    vb: Vec3,
    transmittance: f64,
}

impl PixelAccum {
    fn new() -> Self {
        Self {
            rgb: Vec3::zeros(),
            depth: 0.0,
            vf: Vec3::zeros(),
            vb: Vec3::zeros(),
            transmittance: 1.0,
        }
    }

    #[inline]
    fn accumulate(&mut self, p: &Projected, w: f64) {
        let weight = w * self.transmittance;
        self.rgb += p.color * weight;
        self.depth += p.depth * weight;
        self.vf += p.v_fwd * weight;
        self.vb += p.v_bwd * weight;
        self.transmittance *= 1.0 - w;
    }
}

/// Tile-local copy of what the per-pixel loop reads for every candidate.
struct Candidate {
    box_: [f64; 4],
    mean: Vec2,
    conic: [f64; 3],
    alpha: f64,
    order: u32,
}

/// Per-tile output, row-major within the tile.
struct TileOut {
    x0: usize,
    y0: usize,
    w: usize,
    pixels: Vec<PixelAccum>,
}

/// Renders `gaussians` from `pose`. Intrinsics are rescaled to
/// `opts.width x opts.height`, so a larger size renders the same view at
/// higher resolution.
pub fn render(
    gaussians: &[Gaussian4D],
    pose: &CameraPose,
    k: &Intrinsics,
    opts: &RenderOptions,
) -> Result<RenderTarget> {
    opts.validate()?;
    let (width, height) = (opts.width, opts.height);
    let (projected, stats) = project_sorted(gaussians, pose, k, opts);

    let ts = opts.tile_size;
    let tiles_x = width.div_ceil(ts);
    let tiles_y = height.div_ceil(ts);
    let mut bins: Vec<Vec<u32>> = vec![Vec::new(); tiles_x * tiles_y];
    let supports: Vec<Option<[usize; 4]>> = projected
        .iter()
        .map(|p| p.support(opts.alpha_min, width, height))
        .collect();
    for (order, support) in supports.iter().enumerate() {
        let Some([x0, y0, x1, y1]) = *support else {
            continue;
        };
        for ty in y0 / ts..=y1 / ts {
            for tx in x0 / ts..=x1 / ts {
                bins[ty * tiles_x + tx].push(order as u32);
            }
        }
    }

    let tiles: Vec<TileOut> = bins
        .par_iter()
        .enumerate()
        .map(|(t, bin)| {
            let (tx, ty) = (t % tiles_x, t / tiles_x);
            let x0 = tx * ts;
            let y0 = ty * ts;
            let w = ts.min(width - x0);
            let h = ts.min(height - y0);
            let candidates: Vec<Candidate> = bin
                .iter()
                .map(|&o| {
                    let p = &projected[o as usize];
                    let [bx0, by0, bx1, by1] = supports[o as usize].expect("binned Gaussians have support");
                    Candidate {
                        box_: [bx0 as f64, by0 as f64, bx1 as f64, by1 as f64],
                        mean: p.mean,
                        conic: p.conic,
                        alpha: p.alpha,
                        order: o,
                    }
                })
                .collect();
            let mut pixels = vec![PixelAccum::new(); w * h];
            for (i, acc) in pixels.iter_mut().enumerate() {
                let px = (x0 + i % w) as f64;
                let py = (y0 + i / w) as f64;
                for c in &candidates {
                    // Outside the support box the weight is below alpha_min.
                    if px < c.box_[0] || px > c.box_[2] || py < c.box_[1] || py > c.box_[3] {
                        continue;
                    }
                    if acc.transmittance < opts.min_transmittance {
                        break;
                    }
                    let dx = px - c.mean.x;
                    let dy = py - c.mean.y;
                    let [a, b, cc] = c.conic;
                    let q = a * dx * dx + 2.0 * b * dx * dy + cc * dy * dy;
                    let wgt = c.alpha * (-0.5 * q).exp();
                    if wgt >= opts.alpha_min {
                        acc.accumulate(&projected[c.order as usize], wgt);
                    }
                }
            }
            TileOut { x0, y0, w, pixels }
        })
        .collect();

    let mut target = RenderTarget::blank(width, height);
    target.stats = stats;
    for tile in tiles {
        for (i, acc) in tile.pixels.iter().enumerate() {
            let (x, y) = (tile.x0 + i % tile.w, tile.y0 + i / tile.w);
            write_pixel(&mut target, x, y, acc);
        }
    }
    Ok(target)
}

fn write_pixel(target: &mut RenderTarget, x: usize, y: usize, acc: &PixelAccum) {
    let opacity = (1.0 - acc.transmittance).clamp(0.0, 1.0);
    target.rgb.set(x, y, acc.rgb.map(|c| c.clamp(0.0, 1.0)));
    target.acc_opacity.set(x, y, opacity);
    let depth = if opacity >= DEPTH_MIN_OPACITY {
        acc.depth / opacity
    } else {
        0.0
    };
    target.depth.set(x, y, depth);
    target.vel_fwd.set(x, y, acc.vf);
    target.vel_bwd.set(x, y, acc.vb);
}

/// Observed-region mask: `true` where accumulated opacity reaches `threshold`.
pub fn binarize_mask(acc_opacity: &Grid<f64>, threshold: f64) -> Result<Grid<bool>> {
    if !(threshold > 0.0 && threshold < 1.0) {
        return Err(Error::InvalidArgument(format!(
            "mask threshold must lie in (0, 1), got {threshold}"
        )));
    }
    Ok(acc_opacity.map(|&a| a >= threshold))
}

/// Depth-test visibility of a world point against a rendered depth buffer.
///
/// Returns the nearest pixel if the point projects in frame with camera
/// depth in `(near, far)` and no deeper than `D[p] * (1 + eps_rel)`.
/// `k` is the camera's native intrinsics; it is rescaled to the target size.
pub fn visible_pixel(
    p: &Vec3,
    pose: &CameraPose,
    k: &Intrinsics,
    target: &RenderTarget,
    eps_rel: f64,
    near: f64,
    far: f64,
) -> Option<(usize, usize)> {
    let k = k.scaled_to(target.width(), target.height());
    let (px, d) = crate::project_point(p, pose, &k);
    if !(d > near && d < far) {
        return None;
    }
    let (x, y) = k.pixel_of(&px)?;
    let surface = *target.depth.get(x, y);
    (d <= surface * (1.0 + eps_rel)).then_some((x, y))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn k() -> Intrinsics {
        Intrinsics::centered(20.0, 16, 16)
    }

    fn opts() -> RenderOptions {
        RenderOptions::for_intrinsics(&k())
    }

    #[test]
    fn isotropic_on_axis_projects_isotropic() {
        let g = Gaussian4D::isotropic(Vec3::new(0.0, 0.0, 3.0), 0.2, Vec3::repeat(1.0), 0.5);
        let p = project_gaussian(&g, &CameraPose::identity(0.0), &k(), &opts()).unwrap();
        assert!((p.cov[0] - p.cov[2]).abs() < 1e-6);
        assert!(p.cov[1].abs() < 1e-6);
    }

    #[test]
    fn focal_doubling_doubles_footprint() {
        let g = Gaussian4D::isotropic(Vec3::new(0.0, 0.0, 3.0), 0.2, Vec3::repeat(1.0), 0.5);
        let pose = CameraPose::identity(0.0);
        let mut k2 = k();
        k2.fx *= 2.0;
        let a = project_gaussian(&g, &pose, &k(), &opts()).unwrap();
        let b = project_gaussian(&g, &pose, &k2, &opts()).unwrap();
        let sa = (a.cov[0] - 0.3).sqrt();
        let sb = (b.cov[0] - 0.3).sqrt();
        assert!((sb - 2.0 * sa).abs() < 1e-9);
    }

    #[test]
    fn clipping_and_view_rejection() {
        let pose = CameraPose::identity(0.0);
        let near = Gaussian4D::isotropic(Vec3::new(0.0, 0.0, 0.001), 0.1, Vec3::zeros(), 0.5);
        assert_eq!(project_gaussian(&near, &pose, &k(), &opts()), Err(Rejection::Clipped));
        let far_side = Gaussian4D::isotropic(Vec3::new(50.0, 0.0, 1.0), 0.01, Vec3::zeros(), 0.5);
        assert_eq!(
            project_gaussian(&far_side, &pose, &k(), &opts()),
            Err(Rejection::OutOfView)
        );
    }

    #[test]
    fn degenerate_covariance_is_counted() {
        let mut o = opts();
        o.dilation = 0.0;
        let mut g = Gaussian4D::isotropic(Vec3::new(0.0, 0.0, 2.0), 1e-9, Vec3::zeros(), 0.5);
        g.scale = Vec3::new(1.0, 1e-12, 1.0);
        let t = render(&[g], &CameraPose::identity(0.0), &k(), &o).unwrap();
        assert_eq!(t.stats.degenerate, 1);
        assert_eq!(t.stats.drawn, 0);
    }

    #[test]
    fn empty_scene_is_black() {
        let t = render(&[], &CameraPose::identity(0.0), &k(), &opts()).unwrap();
        assert!(t.rgb.data().iter().all(|c| *c == Vec3::zeros()));
        assert!(t.acc_opacity.data().iter().all(|&a| a == 0.0));
    }

    #[test]
    fn opaque_wall_saturates() {
        let c = Vec3::new(0.2, 0.6, 0.9);
        let g = Gaussian4D::isotropic(Vec3::new(0.0, 0.0, 2.0), 50.0, c, 1.0);
        let t = render(&[g], &CameraPose::identity(0.0), &k(), &opts()).unwrap();
        for (rgb, a) in t.rgb.data().iter().zip(t.acc_opacity.data()) {
            assert!((rgb - c).amax() < 1e-3);
            assert!(*a >= 0.99);
        }
        assert!(t.depth.data().iter().all(|d| (d - 2.0).abs() < 1e-9));
    }

    #[test]
    fn mask_threshold_convention() {
        let acc = Grid::from_vec(3, 1, vec![0.0, 0.5, 0.7]);
        assert_eq!(binarize_mask(&acc, 0.5).unwrap().data(), &[false, true, true]);
        assert!(binarize_mask(&Grid::new(2, 2, 0.0), 0.5)
            .unwrap()
            .data()
            .iter()
            .all(|m| !m));
        assert!(binarize_mask(&acc, 1.0).is_err());
    }

    #[test]
    fn invalid_options() {
        let mut o = opts();
        o.near = 0.0;
        assert!(render(&[], &CameraPose::identity(0.0), &k(), &o).is_err());
        let mut o = opts();
        o.far = o.near;
        assert!(o.validate().is_err());
    }
}
