//! Text file formats for clips and normalization stats.
//!
//! Clip: `#mofill-clip v1 fps=<int> joints=22 frames=<T>` followed by T lines
//! of 69 comma-separated values (one frame per line; transposed to rows×T on
//! load). Stats: `#mofill-stats v1` followed by a mean line and a std line.
//! Values print in Rust's shortest round-trip form, so save→load is
//! value-identical.

use super::{default_rig, NormStats, PoseClip, POSE_ROWS};
use crate::error::{Error, Result};
use std::fmt::Write as _;
use std::path::Path;

/// Writes via a sibling tmp file + rename so partial files are never visible.
pub fn write_atomic(path: &Path, bytes: &[u8]) -> Result<()> {
    let mut tmp_name = path.file_name().map(|n| n.to_os_string()).ok_or_else(|| {
        Error::invalid(format!("cannot write to `{}`: no file name", path.display()))
    })?;
    tmp_name.push(".tmp");
    let tmp = path.with_file_name(tmp_name);
    std::fs::write(&tmp, bytes)?;
    std::fs::rename(&tmp, path)?;
    Ok(())
}

fn parse_err(path: &Path, line: usize, msg: impl Into<String>) -> Error {
    Error::Parse {
        path: path.display().to_string(),
        line,
        msg: msg.into(),
    }
}

fn join_values(buf: &mut String, values: impl Iterator<Item = f64>) {
    let mut first = true;
    for v in values {
        if !first {
            buf.push(',');
        }
        write!(buf, "{v}").expect("string write");
        first = false;
    }
    buf.push('\n');
}

pub fn write_clip(clip: &PoseClip, path: &Path) -> Result<()> {
    let t = clip.frames();
    let mut buf = String::with_capacity(t * POSE_ROWS * 8 + 64);
    writeln!(
        buf,
        "#mofill-clip v1 fps={} joints=22 frames={}",
        clip.fps, t
    )
    .expect("string write");
    for frame in 0..t {
        join_values(&mut buf, (0..POSE_ROWS).map(|r| clip.at(r, frame)));
    }
    write_atomic(path, buf.as_bytes())
}

pub fn read_clip(path: &Path) -> Result<PoseClip> {
    let text = std::fs::read_to_string(path)?;
    let mut lines = text.lines();
    let header = lines.next().ok_or_else(|| parse_err(path, 1, "empty file"))?;
    let fields: Vec<&str> = header.split_whitespace().collect();
    if fields.len() != 5 || fields[0] != "#mofill-clip" || fields[1] != "v1" {
        return Err(parse_err(path, 1, "expected `#mofill-clip v1 fps=… joints=22 frames=…`"));
    }
    let field_u64 = |idx: usize, key: &str| -> Result<u64> {
        fields[idx]
            .strip_prefix(key)
            .and_then(|v| v.parse::<u64>().ok())
            .ok_or_else(|| parse_err(path, 1, format!("bad `{key}…` field: `{}`", fields[idx])))
    };
    let fps = field_u64(2, "fps=")?;
    let joints = field_u64(3, "joints=")?;
    let frames = field_u64(4, "frames=")? as usize;
    if joints != 22 {
        return Err(parse_err(path, 1, format!("unsupported joint count {joints} (need 22)")));
    }
    if fps == 0 || fps > u32::MAX as u64 {
        return Err(parse_err(path, 1, format!("bad fps {fps}")));
    }
    let mut clip = PoseClip::zeros(frames, fps as u32, default_rig());
    let mut frame = 0usize;
    for (i, line) in lines.enumerate() {
        if line.is_empty() {
            continue;
        }
        if frame >= frames {
            return Err(parse_err(path, i + 2, format!("more than {frames} data lines")));
        }
        let mut count = 0usize;
        for (r, tok) in line.split(',').enumerate() {
            if r >= POSE_ROWS {
                return Err(parse_err(path, i + 2, "more than 69 values on line"));
            }
            let v: f64 = tok.trim().parse().map_err(|_| {
                parse_err(path, i + 2, format!("bad value `{}` in column {}", tok.trim(), r + 1))
            })?;
            clip.set(r, frame, v);
            count += 1;
        }
        if count != POSE_ROWS {
            return Err(parse_err(path, i + 2, format!("expected 69 values, got {count}")));
        }
        frame += 1;
    }
    if frame != frames {
        return Err(parse_err(
            path,
            frame + 2,
            format!("expected {frames} data lines, got {frame}"),
        ));
    }
    Ok(clip)
}

pub fn write_stats(stats: &NormStats, path: &Path) -> Result<()> {
    stats.validate()?;
    let mut buf = String::with_capacity(POSE_ROWS * 16 + 32);
    buf.push_str("#mofill-stats v1\n");
    join_values(&mut buf, stats.mean.iter().copied());
    join_values(&mut buf, stats.std.iter().copied());
    write_atomic(path, buf.as_bytes())
}

pub fn read_stats(path: &Path) -> Result<NormStats> {
    let text = std::fs::read_to_string(path)?;
    let mut lines = text.lines();
    let header = lines.next().ok_or_else(|| parse_err(path, 1, "empty file"))?;
    if header.trim() != "#mofill-stats v1" {
        return Err(parse_err(path, 1, "expected `#mofill-stats v1`"));
    }
    let mut read_row = |lineno: usize| -> Result<Vec<f64>> {
        let line = lines
            .next()
            .ok_or_else(|| parse_err(path, lineno, "missing stats line"))?;
        let vals: Vec<f64> = line
            .split(',')
            .map(|tok| tok.trim().parse::<f64>())
            .collect::<std::result::Result<_, _>>()
            .map_err(|e| parse_err(path, lineno, format!("bad value: {e}")))?;
        if vals.len() != POSE_ROWS {
            return Err(parse_err(path, lineno, format!("expected 69 values, got {}", vals.len())));
        }
        Ok(vals)
    };
    let mean = read_row(2)?;
    let std = read_row(3)?;
    let stats = NormStats { mean, std };
    stats.validate()?;
    Ok(stats)
}
