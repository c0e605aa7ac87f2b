//! Pose-matrix representation, normalization, windowing, synthetic clips, and
//! root-trajectory integration.
//!
//! A clip is a 69×T matrix: rows 0..66 hold 22 joints' (x,y,z) in a
//! character-local frame (hip floor-projection at the origin, facing = +x,
//! y up), rows 66/67 the floor-plane translational velocity (x,z components,
//! cm/frame), row 68 the rotational velocity about the up axis (rad/frame).
//! Velocities are relative to the previous frame; global placement is
//! recovered by [`integrate_trajectory`].

pub mod io;
pub mod skeleton;
pub mod synth;

pub use skeleton::{default_rig, SkeletonSpec};
pub use synth::{synth_generate, synth_generate_frames, MotionFamily};

use crate::error::{Error, Result};
use crate::tensor::{Real, Tensor4};
use std::sync::Arc;

pub const POSE_ROWS: usize = 69;
pub const JOINTS: usize = 22;
pub const VEL_X_ROW: usize = 66;
pub const VEL_Z_ROW: usize = 67;
pub const VEL_ROT_ROW: usize = 68;

/// Rows with std below this floor normalize with std 1 instead.
pub const STD_FLOOR: f64 = 1e-4;

/// One motion clip: 69 feature rows × T frames, stored row-major (`[r*T+t]`)
/// in f64 so file round-trips and bone checks are exact.
#[derive(Clone, Debug, PartialEq)]
pub struct PoseClip {
    features: Vec<f64>,
    frames: usize,
    pub fps: u32,
    pub skeleton: Arc<SkeletonSpec>,
}

impl PoseClip {
    pub fn zeros(frames: usize, fps: u32, skeleton: Arc<SkeletonSpec>) -> Self {
        PoseClip {
            features: vec![0.0; POSE_ROWS * frames],
            frames,
            fps,
            skeleton,
        }
    }

    pub fn from_vec(
        features: Vec<f64>,
        frames: usize,
        fps: u32,
        skeleton: Arc<SkeletonSpec>,
    ) -> Result<Self> {
        if features.len() != POSE_ROWS * frames {
            return Err(Error::shape(
                "PoseClip::from_vec",
                [features.len()],
                [POSE_ROWS * frames],
            ));
        }
        Ok(PoseClip {
            features,
            frames,
            fps,
            skeleton,
        })
    }

    pub fn frames(&self) -> usize {
        self.frames
    }

    #[inline]
    pub fn at(&self, row: usize, t: usize) -> f64 {
        debug_assert!(row < POSE_ROWS && t < self.frames);
        self.features[row * self.frames + t]
    }

    #[inline]
    pub fn set(&mut self, row: usize, t: usize, v: f64) {
        debug_assert!(row < POSE_ROWS && t < self.frames);
        self.features[row * self.frames + t] = v;
    }

    pub fn row(&self, row: usize) -> &[f64] {
        &self.features[row * self.frames..(row + 1) * self.frames]
    }

    pub fn row_mut(&mut self, row: usize) -> &mut [f64] {
        &mut self.features[row * self.frames..(row + 1) * self.frames]
    }

    pub fn data(&self) -> &[f64] {
        &self.features
    }

    pub fn data_mut(&mut self) -> &mut [f64] {
        &mut self.features
    }

    /// Joint `j`'s local position at frame `t`.
    pub fn joint(&self, j: usize, t: usize) -> [f64; 3] {
        [self.at(3 * j, t), self.at(3 * j + 1, t), self.at(3 * j + 2, t)]
    }

    pub fn set_joint(&mut self, j: usize, t: usize, p: [f64; 3]) {
        self.set(3 * j, t, p[0]);
        self.set(3 * j + 1, t, p[1]);
        self.set(3 * j + 2, t, p[2]);
    }

    /// 1×1×69×T tensor view for the network.
    pub fn to_tensor<T: Real>(&self) -> Tensor4<T> {
        let data = self.features.iter().map(|&v| T::from_f64(v)).collect();
        Tensor4::from_vec([1, 1, POSE_ROWS, self.frames], data)
            .expect("clip length invariant")
    }

    /// Rebuilds a clip from a 1×1×69×T tensor, inheriting fps/skeleton.
    pub fn from_tensor<T: Real>(&self, tensor: &Tensor4<T>) -> Result<PoseClip> {
        let s = tensor.shape();
        if s[0] != 1 || s[1] != 1 || s[2] != POSE_ROWS {
            return Err(Error::shape(
                "PoseClip::from_tensor",
                s,
                [1, 1, POSE_ROWS, s[3]],
            ));
        }
        Ok(PoseClip {
            features: tensor.data().iter().map(|v| v.as_f64()).collect(),
            frames: s[3],
            fps: self.fps,
            skeleton: self.skeleton.clone(),
        })
    }
}

// ── normalization ────────────────────────────────────────────────────────────

#[derive(Clone, Debug, PartialEq)]
pub struct NormStats {
    pub mean: Vec<f64>,
    pub std: Vec<f64>,
}

impl NormStats {
    pub fn validate(&self) -> Result<()> {
        if self.mean.len() != POSE_ROWS || self.std.len() != POSE_ROWS {
            return Err(Error::shape(
                "NormStats",
                [self.mean.len(), self.std.len()],
                [POSE_ROWS, POSE_ROWS],
            ));
        }
        if self.std.iter().any(|&s| !(s > 0.0)) {
            return Err(Error::invalid("NormStats: std entries must be positive"));
        }
        Ok(())
    }
}

/// Per-row mean/std over all frames of all clips (population std, floored).
pub fn compute_norm_stats(clips: &[PoseClip]) -> Result<NormStats> {
    if clips.is_empty() {
        return Err(Error::invalid("compute_norm_stats: empty clip list"));
    }
    let total: usize = clips.iter().map(|c| c.frames()).sum();
    let mut mean = vec![0.0f64; POSE_ROWS];
    for clip in clips {
        for r in 0..POSE_ROWS {
            mean[r] += clip.row(r).iter().sum::<f64>();
        }
    }
    for m in &mut mean {
        *m /= total as f64;
    }
    let mut std = vec![0.0f64; POSE_ROWS];
    for clip in clips {
        for r in 0..POSE_ROWS {
            std[r] += clip.row(r).iter().map(|&v| (v - mean[r]) * (v - mean[r])).sum::<f64>();
        }
    }
    for s in &mut std {
        *s = (*s / total as f64).sqrt();
        if *s < STD_FLOOR {
            *s = 1.0;
        }
    }
    Ok(NormStats { mean, std })
}

pub fn normalize(clip: &PoseClip, stats: &NormStats) -> Result<PoseClip> {
    stats.validate()?;
    let mut out = clip.clone();
    for r in 0..POSE_ROWS {
        let (m, s) = (stats.mean[r], stats.std[r]);
        for v in out.row_mut(r) {
            *v = (*v - m) / s;
        }
    }
    Ok(out)
}

pub fn denormalize(clip: &PoseClip, stats: &NormStats) -> Result<PoseClip> {
    stats.validate()?;
    let mut out = clip.clone();
    for r in 0..POSE_ROWS {
        let (m, s) = (stats.mean[r], stats.std[r]);
        for v in out.row_mut(r) {
            *v = *v * s + m;
        }
    }
    Ok(out)
}

/// Overlapping windows of `window` frames at `stride`; remainder dropped.
/// A sequence shorter than the window yields an empty list.
pub fn window_clips(sequence: &PoseClip, window: usize, stride: usize) -> Result<Vec<PoseClip>> {
    if window == 0 || stride == 0 {
        return Err(Error::invalid("window_clips: window and stride must be ≥ 1"));
    }
    let t = sequence.frames();
    if t < window {
        return Ok(Vec::new());
    }
    let count = (t - window) / stride + 1;
    let mut out = Vec::with_capacity(count);
    for i in 0..count {
        let start = i * stride;
        let mut w = PoseClip::zeros(window, sequence.fps, sequence.skeleton.clone());
        for r in 0..POSE_ROWS {
            w.row_mut(r).copy_from_slice(&sequence.row(r)[start..start + window]);
        }
        out.push(w);
    }
    Ok(out)
}

// ── trajectory ───────────────────────────────────────────────────────────────

/// Per-frame global root position in the floor plane plus heading (radians).
#[derive(Clone, Debug, PartialEq)]
pub struct Trajectory {
    pub x: Vec<f64>,
    pub z: Vec<f64>,
    pub heading: Vec<f64>,
}

/// Rotation about the up axis applied to floor-plane coordinates.
#[inline]
pub fn rotate_heading(theta: f64, x: f64, z: f64) -> (f64, f64) {
    let (s, c) = theta.sin_cos();
    (x * c + z * s, -x * s + z * c)
}

/// Integrates the velocity rows: pₜ = pₜ₋₁ + R(θₜ₋₁)·tₜ, θₜ = θₜ₋₁ + γₜ,
/// starting from the origin with heading 0 before the first frame. Ten unit
/// forward steps therefore land at x = 10.
pub fn integrate_trajectory(clip: &PoseClip) -> Trajectory {
    let t = clip.frames();
    let (mut px, mut pz, mut th) = (0.0f64, 0.0f64, 0.0f64);
    let mut out = Trajectory {
        x: Vec::with_capacity(t),
        z: Vec::with_capacity(t),
        heading: Vec::with_capacity(t),
    };
    for i in 0..t {
        let (dx, dz) = rotate_heading(th, clip.at(VEL_X_ROW, i), clip.at(VEL_Z_ROW, i));
        px += dx;
        pz += dz;
        th += clip.at(VEL_ROT_ROW, i);
        out.x.push(px);
        out.z.push(pz);
        out.heading.push(th);
    }
    out
}

/// Inverse of [`integrate_trajectory`]: recovers the velocity rows
/// (vx, vz, γ) from a global path.
pub fn derive_velocities(traj: &Trajectory) -> (Vec<f64>, Vec<f64>, Vec<f64>) {
    let t = traj.x.len();
    let (mut vx, mut vz, mut g) = (Vec::with_capacity(t), Vec::with_capacity(t), Vec::with_capacity(t));
    let (mut px, mut pz, mut th) = (0.0f64, 0.0f64, 0.0f64);
    for i in 0..t {
        let (dx, dz) = (traj.x[i] - px, traj.z[i] - pz);
        let (lx, lz) = rotate_heading(-th, dx, dz);
        vx.push(lx);
        vz.push(lz);
        g.push(traj.heading[i] - th);
        px = traj.x[i];
        pz = traj.z[i];
        th = traj.heading[i];
    }
    (vx, vz, g)
}

/// Global 3-D joint positions, `[t*22 + j]`: local offsets rotated by the
/// integrated heading and shifted by the integrated root position.
pub fn to_global_positions(clip: &PoseClip) -> Vec<[f64; 3]> {
    let traj = integrate_trajectory(clip);
    let t = clip.frames();
    let mut out = Vec::with_capacity(t * JOINTS);
    for i in 0..t {
        for j in 0..JOINTS {
            let p = clip.joint(j, i);
            let (gx, gz) = rotate_heading(traj.heading[i], p[0], p[2]);
            out.push([gx + traj.x[i], p[1], gz + traj.z[i]]);
        }
    }
    out
}
