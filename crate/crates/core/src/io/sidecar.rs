//! Line-oriented text sidecars for separation results and 3D tracks.
//!
//! Separation:
//!
//! ```text
//! splat4d-separation 1
//! eta <eta>
//! keyframes <K>
//! keyframe <k> <n>
//! <index> static|dynamic <m>
//! ```
//!
//! Tracks: one `track_id frame gaussian_index x y z` line per track point.

use std::fmt::Write as _;
use std::path::Path;

use crate::dynamics::Track3D;
use crate::motion::SeparationResult;
use crate::FormatError;

pub const SEPARATION_HEADER: &str = "splat4d-separation";
pub const SEPARATION_VERSION: u32 = 1;

pub fn format_separation(r: &SeparationResult) -> String {
    let mut s = format!(
        "{SEPARATION_HEADER} {SEPARATION_VERSION}\neta {}\nkeyframes {}\n",
        r.eta,
        r.m.len()
    );
    for (k, scores) in r.m.iter().enumerate() {
        let _ = writeln!(s, "keyframe {k} {}", scores.len());
        for (i, m) in scores.iter().enumerate() {
            let label = if *m > r.eta { "dynamic" } else { "static" };
            let _ = writeln!(s, "{i} {label} {m}");
        }
    }
    s
}

pub fn write_separation(path: &Path, r: &SeparationResult) -> Result<(), FormatError> {
    super::write_bytes(path, format_separation(r).as_bytes())
}

pub fn parse_separation(path: &Path, text: &str) -> Result<SeparationResult, FormatError> {
    let bad = |line: usize, m: String| FormatError::malformed(path, format!("line {}: {m}", line + 1));
    let mut lines = text.lines().enumerate();
    let mut next = |what: &str| {
        lines
            .next()
            .ok_or_else(|| FormatError::malformed(path, format!("missing {what}")))
    };

    let (_, head) = next("header")?;
    match head.split_whitespace().collect::<Vec<_>>().as_slice() {
        [SEPARATION_HEADER, v] if *v == SEPARATION_VERSION.to_string() => {}
        [SEPARATION_HEADER, v] => {
            return Err(FormatError::VersionMismatch {
                path: path.into(),
                found: v.to_string(),
                expected: SEPARATION_VERSION.to_string(),
            })
        }
        _ => return Err(bad(0, "not a separation sidecar".into())),
    }
    let field = |(n, line): (usize, &str), key: &str| -> Result<String, FormatError> {
        line.strip_prefix(key)
            .and_then(|r| r.strip_prefix(' '))
            .map(str::to_string)
            .ok_or_else(|| bad(n, format!("expected `{key}`")))
    };
    let l = next("eta")?;
    let eta: f64 = field(l, "eta")?.parse().map_err(|_| bad(l.0, "bad eta".into()))?;
    let l = next("keyframe count")?;
    let count: usize = field(l, "keyframes")?
        .parse()
        .map_err(|_| bad(l.0, "bad keyframe count".into()))?;
    let mut m = Vec::with_capacity(count);
    for k in 0..count {
        let l = next("keyframe block")?;
        let words: Vec<String> = field(l, "keyframe")?.split_whitespace().map(str::to_string).collect();
        let n: usize = match words.as_slice() {
            [idx, n] if idx.parse::<usize>() == Ok(k) => n.parse().map_err(|_| bad(l.0, "bad count".into()))?,
            _ => return Err(bad(l.0, format!("expected keyframe {k}"))),
        };
        let mut scores = Vec::with_capacity(n);
        for i in 0..n {
            let (ln, line) = next("score line")?;
            let words: Vec<&str> = line.split_whitespace().collect();
            let score = match words.as_slice() {
                [idx, "static" | "dynamic", v] if idx.parse::<usize>() == Ok(i) => {
                    v.parse::<f64>().map_err(|_| bad(ln, "bad score".into()))?
                }
                _ => return Err(bad(ln, format!("expected score line for Gaussian {i}"))),
            };
            if !score.is_finite() {
                return Err(FormatError::NonFinite {
                    path: path.into(),
                    field: format!("keyframe {k} gaussian {i}"),
                });
            }
            scores.push(score);
        }
        m.push(scores);
    }
    SeparationResult::from_scores(m, eta).map_err(|e| FormatError::Invariant {
        path: path.into(),
        message: e.to_string(),
    })
}

pub fn read_separation(path: &Path) -> Result<SeparationResult, FormatError> {
    let bytes = super::read_bytes(path)?;
    let text = String::from_utf8(bytes).map_err(|_| FormatError::malformed(path, "not UTF-8"))?;
    parse_separation(path, &text)
}

pub fn format_tracks(tracks: &[Track3D]) -> String {
    let mut s = String::new();
    for (id, t) in tracks.iter().enumerate() {
        for (j, (idx, p)) in t.indices.iter().zip(&t.positions).enumerate() {
            let _ = writeln!(s, "{id} {} {idx} {} {} {}", t.keyframe(j), p.x, p.y, p.z);
        }
    }
    s
}

pub fn write_tracks(path: &Path, tracks: &[Track3D]) -> Result<(), FormatError> {
    super::write_bytes(path, format_tracks(tracks).as_bytes())
}

/// One parsed track line.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TrackPoint {
    pub track: usize,
    pub frame: usize,
    pub index: usize,
    pub position: crate::Vec3,
}

pub fn parse_tracks(path: &Path, text: &str) -> Result<Vec<TrackPoint>, FormatError> {
    text.lines()
        .enumerate()
        .filter(|(_, l)| !l.trim().is_empty())
        .map(|(n, line)| {
            let bad = || FormatError::malformed(path, format!("line {}: expected `track frame index x y z`", n + 1));
            let w: Vec<&str> = line.split_whitespace().collect();
            if w.len() != 6 {
                return Err(bad());
            }
            let u = |s: &str| s.parse::<usize>().map_err(|_| bad());
            let f = |s: &str| s.parse::<f64>().map_err(|_| bad());
            Ok(TrackPoint {
                track: u(w[0])?,
                frame: u(w[1])?,
                index: u(w[2])?,
                position: crate::Vec3::new(f(w[3])?, f(w[4])?, f(w[5])?),
            })
        })
        .collect()
}
