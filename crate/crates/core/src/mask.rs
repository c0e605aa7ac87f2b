//! Input perturbations: gap masks, joint-drop masks, per-frame drops,
//! Gaussian noise, and the curriculum schedule driving gap lengths.

use crate::error::{Error, Result};
use crate::motion::{PoseClip, JOINTS, POSE_ROWS};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use std::fmt::Write as _;
use std::path::Path;

/// 69×T binary mask, `[r*T+t]`; 0 marks removed entries.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct FeatureMask {
    entries: Vec<u8>,
    frames: usize,
}

impl FeatureMask {
    pub fn ones(frames: usize) -> Self {
        FeatureMask {
            entries: vec![1; POSE_ROWS * frames],
            frames,
        }
    }

    pub fn frames(&self) -> usize {
        self.frames
    }

    #[inline]
    pub fn at(&self, row: usize, t: usize) -> u8 {
        self.entries[row * self.frames + t]
    }

    #[inline]
    pub fn set(&mut self, row: usize, t: usize, v: u8) {
        debug_assert!(v <= 1);
        self.entries[row * self.frames + t] = v;
    }

    pub fn data(&self) -> &[u8] {
        &self.entries
    }

    /// Zeroes all 69 rows over columns `[start, start+len)`.
    pub fn zero_columns(&mut self, start: usize, len: usize) {
        for r in 0..POSE_ROWS {
            for t in start..start + len {
                self.set(r, t, 0);
            }
        }
    }

    /// Zeroes joint `j`'s three coordinate rows over all frames.
    pub fn zero_joint(&mut self, j: usize) {
        for r in 3 * j..3 * j + 3 {
            for t in 0..self.frames {
                self.set(r, t, 0);
            }
        }
    }

    pub fn count_zeros(&self) -> usize {
        self.entries.iter().filter(|&&v| v == 0).count()
    }
}

/// Exactly one perturbation kind is active per application.
#[derive(Clone, Copy, Debug, PartialEq)]
pub enum PerturbationSpec {
    Gap { lambda: usize, tau: usize },
    JointDrop { count: usize },
    FrameDrop { p: f64 },
    Gaussian { sigma: f64 },
}

impl PerturbationSpec {
    pub fn validate(&self) -> Result<()> {
        match *self {
            PerturbationSpec::Gap { .. } => Ok(()),
            PerturbationSpec::JointDrop { count } => {
                if (1..=3).contains(&count) {
                    Ok(())
                } else {
                    Err(Error::invalid(format!(
                        "joint drop count must be 1, 2 or 3, got {count}"
                    )))
                }
            }
            PerturbationSpec::FrameDrop { p } => {
                if (0.0..=1.0).contains(&p) {
                    Ok(())
                } else {
                    Err(Error::invalid(format!("frame drop probability {p} outside [0,1]")))
                }
            }
            PerturbationSpec::Gaussian { sigma } => {
                if sigma >= 0.0 {
                    Ok(())
                } else {
                    Err(Error::invalid(format!("noise level {sigma} must be ≥ 0")))
                }
            }
        }
    }
}

// ── curriculum ───────────────────────────────────────────────────────────────

/// Gap-length distribution parameters at a training epoch.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct CurriculumState {
    pub epoch: usize,
    /// Mean gap length, frames.
    pub mu_e: usize,
    /// Gap-length std, frames.
    pub sigma: f64,
    /// Hard cap on sampled gap lengths.
    pub mu_max: usize,
}

pub const CURRICULUM_SIGMA: f64 = 10.0;
pub const CURRICULUM_MU_MAX: usize = 120;

/// μₑ = min(10 + 10·⌊epoch/5⌋, 120).
pub fn curriculum_mu(epoch: usize) -> usize {
    (10 + 10 * (epoch / 5)).min(CURRICULUM_MU_MAX)
}

impl CurriculumState {
    pub fn at_epoch(epoch: usize) -> Self {
        Self::with_mu(epoch, curriculum_mu(epoch))
    }

    /// Explicit mean, for schedules that rescale the epoch axis.
    pub fn with_mu(epoch: usize, mu_e: usize) -> Self {
        CurriculumState {
            epoch,
            mu_e,
            sigma: CURRICULUM_SIGMA,
            mu_max: CURRICULUM_MU_MAX,
        }
    }
}

// ── mask constructors ────────────────────────────────────────────────────────

/// Directly constructed gap: columns `[tau, tau+lambda)` zeroed in all rows.
pub fn gap_mask(frames: usize, lambda: usize, tau: usize) -> Result<FeatureMask> {
    if tau + lambda > frames {
        return Err(Error::invalid(format!(
            "gap {tau}..{} exceeds clip length {frames}",
            tau + lambda
        )));
    }
    let mut mask = FeatureMask::ones(frames);
    mask.zero_columns(tau, lambda);
    Ok(mask)
}

/// Samples λ ~ round(N(μₑ, σ²)) clamped to [1, min(μ_max, T−1)] and
/// τ ~ U{0..=T−λ}; returns the gap mask together with (λ, τ).
pub fn sample_gap_mask(
    frames: usize,
    state: &CurriculumState,
    seed: u64,
) -> Result<(FeatureMask, usize, usize)> {
    if frames <= 1 {
        return Err(Error::invalid(format!(
            "cannot place a gap in a {frames}-frame clip"
        )));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let normal = Normal::new(state.mu_e as f64, state.sigma)
        .map_err(|e| Error::invalid(format!("bad gap distribution: {e}")))?;
    let draw: f64 = normal.sample(&mut rng);
    let lambda = (draw.round() as i64).clamp(1, state.mu_max.min(frames - 1) as i64) as usize;
    let tau = rng.random_range(0..=frames - lambda);
    Ok((gap_mask(frames, lambda, tau)?, lambda, tau))
}

/// Drops 1, 2 or 3 distinct joints (all three coordinate rows) over the whole
/// clip; velocity rows are never dropped.
pub fn sample_joint_drop_mask(frames: usize, seed: u64) -> FeatureMask {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let k = rng.random_range(1..=3usize);
    let mut mask = FeatureMask::ones(frames);
    for idx in rand::seq::index::sample(&mut rng, JOINTS, k) {
        mask.zero_joint(idx);
    }
    mask
}

/// Per (joint, frame) Bernoulli(p) drop of that joint's 3 rows in that column.
pub fn sample_frame_drop_mask(frames: usize, p: f64, seed: u64) -> Result<FeatureMask> {
    PerturbationSpec::FrameDrop { p }.validate()?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut mask = FeatureMask::ones(frames);
    for j in 0..JOINTS {
        for t in 0..frames {
            if rng.random::<f64>() < p {
                for r in 3 * j..3 * j + 3 {
                    mask.set(r, t, 0);
                }
            }
        }
    }
    Ok(mask)
}

/// Adds N(0, σ²) to the joint rows of an (already normalized) clip; velocity
/// rows pass through untouched.
pub fn add_gaussian_noise(clip: &PoseClip, sigma: f64, seed: u64) -> Result<PoseClip> {
    PerturbationSpec::Gaussian { sigma }.validate()?;
    let normal = Normal::new(0.0, sigma)
        .map_err(|e| Error::invalid(format!("bad noise distribution: {e}")))?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut out = clip.clone();
    for r in 0..3 * JOINTS {
        for v in out.row_mut(r) {
            *v += normal.sample(&mut rng);
        }
    }
    Ok(out)
}

/// X̃ = X ⊙ M.
pub fn apply_mask(clip: &PoseClip, mask: &FeatureMask) -> Result<PoseClip> {
    if mask.frames() != clip.frames() {
        return Err(Error::shape(
            "apply_mask",
            [POSE_ROWS, mask.frames()],
            [POSE_ROWS, clip.frames()],
        ));
    }
    let mut out = clip.clone();
    for (v, &m) in out.data_mut().iter_mut().zip(mask.data()) {
        *v *= m as f64;
    }
    Ok(out)
}

// ── file format ──────────────────────────────────────────────────────────────

/// `#mofill-mask v1 joints=22 frames=<T>` + T lines of 69 comma-separated
/// {0,1} values (one frame per line, mirroring the clip format).
pub fn write_mask(mask: &FeatureMask, path: &Path) -> Result<()> {
    let t = mask.frames();
    let mut buf = String::with_capacity(t * POSE_ROWS * 2 + 48);
    writeln!(buf, "#mofill-mask v1 joints=22 frames={t}").expect("string write");
    for frame in 0..t {
        for r in 0..POSE_ROWS {
            if r > 0 {
                buf.push(',');
            }
            buf.push(if mask.at(r, frame) == 0 { '0' } else { '1' });
        }
        buf.push('\n');
    }
    crate::motion::io::write_atomic(path, buf.as_bytes())
}

pub fn read_mask(path: &Path) -> Result<FeatureMask> {
    let parse_err = |line: usize, msg: String| Error::Parse {
        path: path.display().to_string(),
        line,
        msg,
    };
    let text = std::fs::read_to_string(path)?;
    let mut lines = text.lines();
    let header = lines
        .next()
        .ok_or_else(|| parse_err(1, "empty file".into()))?;
    let fields: Vec<&str> = header.split_whitespace().collect();
    if fields.len() != 4 || fields[0] != "#mofill-mask" || fields[1] != "v1" || fields[2] != "joints=22"
    {
        return Err(parse_err(1, "expected `#mofill-mask v1 joints=22 frames=…`".into()));
    }
    let frames: usize = fields[3]
        .strip_prefix("frames=")
        .and_then(|v| v.parse().ok())
        .ok_or_else(|| parse_err(1, format!("bad `frames=…` field: `{}`", fields[3])))?;
    let mut mask = FeatureMask::ones(frames);
    let mut frame = 0usize;
    for (i, line) in lines.enumerate() {
        if line.is_empty() {
            continue;
        }
        if frame >= frames {
            return Err(parse_err(i + 2, format!("more than {frames} data lines")));
        }
        let mut count = 0usize;
        for (r, tok) in line.split(',').enumerate() {
            let v = match tok.trim() {
                "0" => 0,
                "1" => 1,
                other => return Err(parse_err(i + 2, format!("mask value `{other}` is not 0/1"))),
            };
            if r >= POSE_ROWS {
                return Err(parse_err(i + 2, "more than 69 values on line".into()));
            }
            mask.set(r, frame, v);
            count += 1;
        }
        if count != POSE_ROWS {
            return Err(parse_err(i + 2, format!("expected 69 values, got {count}")));
        }
        frame += 1;
    }
    if frame != frames {
        return Err(parse_err(
            frame + 2,
            format!("expected {frames} data lines, got {frame}"),
        ));
    }
    Ok(mask)
}
