use super::{project_sorted, write_pixel, PixelAccum, RenderOptions, RenderTarget};
use crate::{CameraPose, Gaussian4D, Intrinsics, Result};

/// Reference renderer: every pixel walks every projected Gaussian in depth
/// order. Same contract as [`super::render`], no tiling and no threads.
pub fn render_oracle(
    gaussians: &[Gaussian4D],
    pose: &CameraPose,
    k: &Intrinsics,
    opts: &RenderOptions,
) -> Result<RenderTarget> {
    opts.validate()?;
    let (sorted, stats) = project_sorted(gaussians, pose, k, opts);
    let mut target = RenderTarget::blank(opts.width, opts.height);
    target.stats = stats;
    for y in 0..opts.height {
        for x in 0..opts.width {
            let (px, py) = (x as f64, y as f64);
            let mut acc = PixelAccum::new();
            for p in &sorted {
                if acc.transmittance < opts.min_transmittance {
                    break;
                }
                let w = p.weight_at(px, py);
                if w < opts.alpha_min {
                    continue;
                }
                let weight = w * acc.transmittance;
                acc.rgb += p.color * weight;
                acc.depth += p.depth * weight;
                acc.vf += p.v_fwd * weight;
                acc.vb += p.v_bwd * weight;
                acc.transmittance *= 1.0 - w;
            }
            write_pixel(&mut target, x, y, &acc);
        }
    }
    Ok(target)
}
