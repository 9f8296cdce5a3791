//! Image buffers on disk: 8-bit PNG for colors and masks, PFM for floats.

use std::path::Path;

use image::{GrayImage, ImageBuffer, Luma, Rgb, RgbImage};

use crate::{FormatError, Grid, Vec3};

/// Quantizes a `[0, 1]` value to a byte, clamping out-of-range input.
pub fn to_byte(v: f64) -> u8 {
    (v.clamp(0.0, 1.0) * 255.0).round() as u8
}

fn image_err(path: &Path, e: image::ImageError) -> FormatError {
    match e {
        image::ImageError::IoError(io) => FormatError::io(path, io),
        other => FormatError::malformed(path, other.to_string()),
    }
}

pub fn write_rgb_png(path: &Path, rgb: &Grid<Vec3>) -> Result<(), FormatError> {
    let img: RgbImage = ImageBuffer::from_fn(rgb.width() as u32, rgb.height() as u32, |x, y| {
        let c = rgb.get(x as usize, y as usize);
        Rgb([to_byte(c.x), to_byte(c.y), to_byte(c.z)])
    });
    img.save(path).map_err(|e| image_err(path, e))
}

/// Single-channel `[0, 1]` buffer as 8-bit grayscale (used for opacity).
pub fn write_gray_png(path: &Path, values: &Grid<f64>) -> Result<(), FormatError> {
    let img: GrayImage = ImageBuffer::from_fn(values.width() as u32, values.height() as u32, |x, y| {
        Luma([to_byte(*values.get(x as usize, y as usize))])
    });
    img.save(path).map_err(|e| image_err(path, e))
}

/// Mask as 8-bit grayscale, `true` = 255 and `false` = 0.
pub fn write_mask_png(path: &Path, mask: &Grid<bool>) -> Result<(), FormatError> {
    let img: GrayImage = ImageBuffer::from_fn(mask.width() as u32, mask.height() as u32, |x, y| {
        Luma([if *mask.get(x as usize, y as usize) { 255 } else { 0 }])
    });
    img.save(path).map_err(|e| image_err(path, e))
}

/// Any PNG as RGB in `[0, 1]`; grayscale is replicated across channels.
pub fn read_rgb_png(path: &Path) -> Result<Grid<Vec3>, FormatError> {
    let img = image::open(path).map_err(|e| image_err(path, e))?.to_rgb8();
    let (w, h) = img.dimensions();
    Ok(Grid::from_fn(w as usize, h as usize, |x, y| {
        let p = img.get_pixel(x as u32, y as u32);
        Vec3::new(p[0] as f64, p[1] as f64, p[2] as f64) / 255.0
    }))
}

/// Grayscale PNG where any byte of at least 128 reads as `true`.
pub fn read_mask_png(path: &Path) -> Result<Grid<bool>, FormatError> {
    let img = image::open(path).map_err(|e| image_err(path, e))?.to_luma8();
    let (w, h) = img.dimensions();
    Ok(Grid::from_fn(w as usize, h as usize, |x, y| {
        img.get_pixel(x as u32, y as u32)[0] >= 128
    }))
}

fn encode_pfm(
    tag: &str,
    width: usize,
    height: usize,
    channels: usize,
    value: impl Fn(usize, usize, usize) -> f32,
) -> Vec<u8> {
    let mut out = format!("{tag}\n{width} {height}\n-1.0\n").into_bytes();
    out.reserve(width * height * channels * 4);
    for y in (0..height).rev() {
        for x in 0..width {
            for c in 0..channels {
                out.extend_from_slice(&value(x, y, c).to_le_bytes());
            }
        }
    }
    out
}

/// Depth as single-channel little-endian PFM (`f32`).
pub fn write_depth_pfm(path: &Path, depth: &Grid<f64>) -> Result<(), FormatError> {
    let bytes = encode_pfm("Pf", depth.width(), depth.height(), 1, |x, y, _| {
        *depth.get(x, y) as f32
    });
    super::write_bytes(path, &bytes)
}

/// Three-channel PFM from `f32` triples.
pub fn write_pfm3(path: &Path, values: &Grid<[f32; 3]>) -> Result<(), FormatError> {
    let bytes = encode_pfm("PF", values.width(), values.height(), 3, |x, y, c| values.get(x, y)[c]);
    super::write_bytes(path, &bytes)
}

/// A Plücker map as two three-channel PFMs: ray directions and moments.
pub fn write_plucker_pfm(dir_path: &Path, moment_path: &Path, plucker: &Grid<[f64; 6]>) -> Result<(), FormatError> {
    let part = |off: usize| plucker.map(|p| [p[off] as f32, p[off + 1] as f32, p[off + 2] as f32]);
    write_pfm3(dir_path, &part(0))?;
    write_pfm3(moment_path, &part(3))
}

/// Parses a PFM file into channel-interleaved rows, top row first.
pub fn decode_pfm(path: &Path, bytes: &[u8]) -> Result<(usize, usize, usize, Vec<f32>), FormatError> {
    let bad = |m: &str| FormatError::malformed(path, m.to_string());
    let mut fields = Vec::with_capacity(4);
    let mut pos = 0;
    while fields.len() < 4 {
        while pos < bytes.len() && bytes[pos].is_ascii_whitespace() {
            pos += 1;
        }
        let start = pos;
        while pos < bytes.len() && !bytes[pos].is_ascii_whitespace() {
            pos += 1;
        }
        if start == pos {
            return Err(bad("truncated header"));
        }
        fields.push(std::str::from_utf8(&bytes[start..pos]).map_err(|_| bad("header is not text"))?);
    }
    // Exactly one whitespace byte separates the header from the raster.
    pos += 1;
    let channels = match fields[0] {
        "Pf" => 1,
        "PF" => 3,
        other => return Err(FormatError::malformed(path, format!("unknown PFM tag `{other}`"))),
    };
    let width: usize = fields[1].parse().map_err(|_| bad("bad width"))?;
    let height: usize = fields[2].parse().map_err(|_| bad("bad height"))?;
    let scale: f64 = fields[3].parse().map_err(|_| bad("bad scale"))?;
    if scale == 0.0 || !scale.is_finite() {
        return Err(bad("bad scale"));
    }
    let little = scale < 0.0;
    let n = width * height * channels;
    let body = bytes.get(pos..).unwrap_or(&[]);
    if body.len() != n * 4 {
        return Err(FormatError::malformed(
            path,
            format!("expected {} bytes of samples, found {}", n * 4, body.len()),
        ));
    }
    let samples: Vec<f32> = body
        .chunks_exact(4)
        .map(|c| {
            let b = [c[0], c[1], c[2], c[3]];
            if little {
                f32::from_le_bytes(b)
            } else {
                f32::from_be_bytes(b)
            }
        })
        .collect();
    let row = width * channels;
    let mut top_down = Vec::with_capacity(n);
    for y in (0..height).rev() {
        top_down.extend_from_slice(&samples[y * row..(y + 1) * row]);
    }
    Ok((width, height, channels, top_down))
}

/// Reads a single-channel PFM exactly as stored.
pub fn read_depth_pfm(path: &Path) -> Result<Grid<f32>, FormatError> {
    let (w, h, c, data) = decode_pfm(path, &super::read_bytes(path)?)?;
    if c != 1 {
        return Err(FormatError::malformed(path, "expected a single-channel PFM"));
    }
    Ok(Grid::from_vec(w, h, data))
}

pub fn read_pfm3(path: &Path) -> Result<Grid<[f32; 3]>, FormatError> {
    let (w, h, c, data) = decode_pfm(path, &super::read_bytes(path)?)?;
    if c != 3 {
        return Err(FormatError::malformed(path, "expected a three-channel PFM"));
    }
    Ok(Grid::from_vec(
        w,
        h,
        data.chunks_exact(3).map(|p| [p[0], p[1], p[2]]).collect(),
    ))
}
