//! Per-keyframe Gaussian files: binary little-endian PLY.
//!
//! One `vertex` element, one record per Gaussian. The writer emits every
//! property as `double`; the reader finds properties by name, accepts
//! `float` or `double`, and ignores unknown ones.

use std::path::Path;

use crate::{FormatError, Gaussian4D, Quat, Vec3};

pub const PLY_VERSION: u32 = 1;
const MAGIC_COMMENT: &str = "splat4d-gaussians version";

/// Property names in file order.
pub const PROPERTIES: [&str; 27] = [
    "x", "y", "z", "alpha", "rot_w", "rot_x", "rot_y", "rot_z", "scale_0", "scale_1", "scale_2", "red", "green",
    "blue", "tau", "v_fwd_x", "v_fwd_y", "v_fwd_z", "v_bwd_x", "v_bwd_y", "v_bwd_z", "w_fwd_x", "w_fwd_y", "w_fwd_z",
    "w_bwd_x", "w_bwd_y", "w_bwd_z",
];

fn to_record(g: &Gaussian4D) -> [f64; 27] {
    let v = |a: &Vec3| [a.x, a.y, a.z];
    let mut r = [0.0; 27];
    r[0..3].copy_from_slice(&v(&g.mu));
    r[3] = g.alpha;
    r[4..8].copy_from_slice(&g.rot.to_array());
    r[8..11].copy_from_slice(&v(&g.scale));
    r[11..14].copy_from_slice(&v(&g.color));
    r[14] = g.tau;
    r[15..18].copy_from_slice(&v(&g.v_fwd));
    r[18..21].copy_from_slice(&v(&g.v_bwd));
    r[21..24].copy_from_slice(&v(&g.w_fwd));
    r[24..27].copy_from_slice(&v(&g.w_bwd));
    r
}

fn from_record(r: &[f64; 27]) -> Gaussian4D {
    let v = |i: usize| Vec3::new(r[i], r[i + 1], r[i + 2]);
    Gaussian4D {
        mu: v(0),
        alpha: r[3],
        rot: Quat::new(r[4], r[5], r[6], r[7]),
        scale: v(8),
        color: v(11),
        tau: r[14],
        v_fwd: v(15),
        v_bwd: v(18),
        w_fwd: v(21),
        w_bwd: v(24),
    }
}

/// Encodes Gaussians as a PLY byte buffer.
pub fn encode_ply(gaussians: &[Gaussian4D]) -> Vec<u8> {
    let mut header = String::from("ply\nformat binary_little_endian 1.0\n");
    header.push_str(&format!("comment {MAGIC_COMMENT} {PLY_VERSION}\ncomment sh_degree 0\n"));
    header.push_str(&format!("element vertex {}\n", gaussians.len()));
    for name in PROPERTIES {
        header.push_str(&format!("property double {name}\n"));
    }
    header.push_str("end_header\n");
    let mut out = header.into_bytes();
    out.reserve(gaussians.len() * 27 * 8);
    for g in gaussians {
        for value in to_record(g) {
            out.extend_from_slice(&value.to_le_bytes());
        }
    }
    out
}

pub fn write_ply(path: &Path, gaussians: &[Gaussian4D]) -> Result<(), FormatError> {
    super::write_bytes(path, &encode_ply(gaussians))
}

#[derive(Clone, Copy)]
enum Scalar {
    F32,
    F64,
}

impl Scalar {
    fn size(self) -> usize {
        match self {
            Scalar::F32 => 4,
            Scalar::F64 => 8,
        }
    }
}

/// Decodes and validates a PLY buffer. `path` is only used in errors.
pub fn decode_ply(path: &Path, bytes: &[u8]) -> Result<Vec<Gaussian4D>, FormatError> {
    let bad = |msg: String| FormatError::malformed(path, msg);
    let end = b"end_header\n";
    let header_len = bytes
        .windows(end.len())
        .position(|w| w == end)
        .ok_or_else(|| bad("no end_header line".into()))?
        + end.len();
    let header = std::str::from_utf8(&bytes[..header_len]).map_err(|_| bad("header is not text".into()))?;
    let mut lines = header.lines();
    if lines.next() != Some("ply") {
        return Err(bad("missing `ply` magic".into()));
    }

    let mut version = None;
    let mut count = None;
    let mut props: Vec<(String, Scalar)> = Vec::new();
    for line in lines {
        let words: Vec<&str> = line.split_whitespace().collect();
        match words.as_slice() {
            ["format", "binary_little_endian", "1.0"] => {}
            ["format", other @ ..] => return Err(bad(format!("unsupported format `{}`", other.join(" ")))),
            ["comment", rest @ ..] => {
                let text = rest.join(" ");
                if let Some(v) = text.strip_prefix(MAGIC_COMMENT) {
                    version = Some(v.trim().to_string());
                }
            }
            ["element", "vertex", n] => {
                count = Some(n.parse::<usize>().map_err(|_| bad(format!("bad vertex count `{n}`")))?);
            }
            ["element", name, ..] => return Err(bad(format!("unexpected element `{name}`"))),
            ["property", ty, name] => {
                let scalar = match *ty {
                    "float" | "float32" => Scalar::F32,
                    "double" | "float64" => Scalar::F64,
                    other => return Err(bad(format!("property `{name}` has unsupported type `{other}`"))),
                };
                props.push((name.to_string(), scalar));
            }
            ["end_header"] => break,
            [] => {}
            _ => return Err(bad(format!("unexpected header line `{line}`"))),
        }
    }

    let version = version.ok_or_else(|| bad("missing format version comment".into()))?;
    if version != PLY_VERSION.to_string() {
        return Err(FormatError::VersionMismatch {
            path: path.into(),
            found: version,
            expected: PLY_VERSION.to_string(),
        });
    }
    let count = count.ok_or_else(|| bad("missing vertex element".into()))?;

    let mut offsets = [(0usize, Scalar::F64); 27];
    for (slot, name) in offsets.iter_mut().zip(PROPERTIES) {
        let mut at = 0;
        let mut found = None;
        for (n, s) in &props {
            if n == name {
                found = Some((at, *s));
                break;
            }
            at += s.size();
        }
        *slot = found.ok_or_else(|| FormatError::MissingProperty {
            path: path.into(),
            name: name.into(),
        })?;
    }
    let stride: usize = props.iter().map(|(_, s)| s.size()).sum();
    let body = &bytes[header_len..];
    if body.len() != count * stride {
        return Err(bad(format!(
            "expected {} bytes of vertex data, found {}",
            count * stride,
            body.len()
        )));
    }

    body.chunks_exact(stride.max(1))
        .take(count)
        .enumerate()
        .map(|(i, rec)| {
            let mut r = [0.0; 27];
            for (j, &(at, s)) in offsets.iter().enumerate() {
                let value = match s {
                    Scalar::F32 => f32::from_le_bytes(rec[at..at + 4].try_into().unwrap()) as f64,
                    Scalar::F64 => f64::from_le_bytes(rec[at..at + 8].try_into().unwrap()),
                };
                if !value.is_finite() {
                    return Err(FormatError::NonFinite {
                        path: path.into(),
                        field: format!("vertex {i} {}", PROPERTIES[j]),
                    });
                }
                r[j] = value;
            }
            let g = from_record(&r);
            g.check().map_err(|message| FormatError::Invariant {
                path: path.into(),
                message: format!("vertex {i}: {message}"),
            })?;
            Ok(g)
        })
        .collect()
}

pub fn read_ply(path: &Path) -> Result<Vec<Gaussian4D>, FormatError> {
    decode_ply(path, &super::read_bytes(path)?)
}
