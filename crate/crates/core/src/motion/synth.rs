//! Procedural clip generation.
//!
//! Clips are built velocities-first: per-frame root velocities come from
//! closed-form gait programs and the pose rows from forward kinematics over
//! the rig, so bone lengths are exact by construction and trajectory
//! integration is consistent with the stored velocity rows by definition.

use super::skeleton::{default_rig, SkeletonSpec};
use super::{PoseClip, JOINTS, VEL_ROT_ROW, VEL_X_ROW, VEL_Z_ROW};
use crate::error::{Error, Result};
use crate::seeds::derive_seed;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use std::f64::consts::TAU;
use std::fmt;
use std::str::FromStr;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum MotionFamily {
    Walk,
    Run,
    Wave,
    Squat,
    Idle,
    /// Uniform per-clip choice among the five concrete families.
    Mixed,
}

impl FromStr for MotionFamily {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "walk" => Ok(MotionFamily::Walk),
            "run" => Ok(MotionFamily::Run),
            "wave" => Ok(MotionFamily::Wave),
            "squat" => Ok(MotionFamily::Squat),
            "idle" => Ok(MotionFamily::Idle),
            "mixed" => Ok(MotionFamily::Mixed),
            other => Err(Error::invalid(format!(
                "unknown motion family `{other}` (expected walk|run|wave|squat|idle|mixed)"
            ))),
        }
    }
}

impl fmt::Display for MotionFamily {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let s = match self {
            MotionFamily::Walk => "walk",
            MotionFamily::Run => "run",
            MotionFamily::Wave => "wave",
            MotionFamily::Squat => "squat",
            MotionFamily::Idle => "idle",
            MotionFamily::Mixed => "mixed",
        };
        f.write_str(s)
    }
}

/// `count` clips of the default training size (240 frames at 30 fps).
pub fn synth_generate(family: MotionFamily, count: usize, seed: u64) -> Vec<PoseClip> {
    synth_generate_frames(family, count, 240, 30, seed).expect("default size is valid")
}

pub fn synth_generate_frames(
    family: MotionFamily,
    count: usize,
    frames: usize,
    fps: u32,
    seed: u64,
) -> Result<Vec<PoseClip>> {
    if frames == 0 || fps == 0 {
        return Err(Error::invalid("synth_generate: frames and fps must be ≥ 1"));
    }
    Ok((0..count)
        .map(|i| {
            let mut rng = ChaCha8Rng::seed_from_u64(derive_seed(seed, i as u64));
            let concrete = match family {
                MotionFamily::Mixed => [
                    MotionFamily::Walk,
                    MotionFamily::Run,
                    MotionFamily::Wave,
                    MotionFamily::Squat,
                    MotionFamily::Idle,
                ][rng.random_range(0..5)],
                f => f,
            };
            generate_one(concrete, frames, fps, &mut rng)
        })
        .collect())
}

// ── vector helpers ───────────────────────────────────────────────────────────

type V3 = [f64; 3];

fn add(a: V3, b: V3) -> V3 {
    [a[0] + b[0], a[1] + b[1], a[2] + b[2]]
}

fn sub(a: V3, b: V3) -> V3 {
    [a[0] - b[0], a[1] - b[1], a[2] - b[2]]
}

fn scale(v: V3, s: f64) -> V3 {
    [v[0] * s, v[1] * s, v[2] * s]
}

fn dot(a: V3, b: V3) -> f64 {
    a[0] * b[0] + a[1] * b[1] + a[2] * b[2]
}

fn norm(v: V3) -> f64 {
    dot(v, v).sqrt()
}

fn unit(v: V3) -> V3 {
    scale(v, 1.0 / norm(v))
}

// ── forward kinematics ───────────────────────────────────────────────────────

/// Places the child of edge `e` at parent + unit(dir)·rest_length.
fn place(j: &mut [V3; JOINTS], rig: &SkeletonSpec, e: usize, dir: V3) {
    let (p, c) = rig.edges[e];
    j[c] = add(j[p], scale(unit(dir), rig.rest_lengths[e]));
}

/// Spine chain (edges 0..=4) with a forward lean and lateral sway.
fn spine_chain(j: &mut [V3; JOINTS], rig: &SkeletonSpec, lean_x: f64, sway_z: f64) {
    let lower = [lean_x, 1.0, sway_z];
    let upper = [lean_x * 0.5, 1.0, sway_z * 0.5];
    place(j, rig, 0, lower);
    place(j, rig, 1, lower);
    place(j, rig, 2, upper);
    place(j, rig, 3, upper);
    place(j, rig, 4, [lean_x * 0.2, 1.0, 0.0]);
}

/// Hanging arm with sagittal swing. `base` is the shoulder edge index
/// (5 = left, 9 = right), `side` +1 for left / −1 for right.
fn arm_swing(
    j: &mut [V3; JOINTS],
    rig: &SkeletonSpec,
    base: usize,
    side: f64,
    swing: f64,
    elbow_bend: f64,
) {
    place(j, rig, base, [0.0, -0.12, side]);
    place(j, rig, base + 1, [swing.sin(), -swing.cos(), side * 0.06]);
    let a2 = swing + elbow_bend;
    place(j, rig, base + 2, [a2.sin(), -a2.cos(), side * 0.06]);
    place(j, rig, base + 3, [a2.sin(), -a2.cos(), side * 0.06]);
}

/// Arm with explicit segment directions (raised/held poses).
fn arm_directed(
    j: &mut [V3; JOINTS],
    rig: &SkeletonSpec,
    base: usize,
    side: f64,
    upper: V3,
    fore: V3,
) {
    place(j, rig, base, [0.0, -0.12, side]);
    place(j, rig, base + 1, upper);
    place(j, rig, base + 2, fore);
    place(j, rig, base + 3, fore);
}

/// Swinging leg. `base` is the pelvis edge index (13 = left, 17 = right).
/// Knee flexion folds the shank backwards relative to the thigh.
fn leg_swing(
    j: &mut [V3; JOINTS],
    rig: &SkeletonSpec,
    base: usize,
    side: f64,
    thigh: f64,
    knee_bend: f64,
    foot_pitch: f64,
) {
    place(j, rig, base, [0.0, 0.0, side]);
    place(j, rig, base + 1, [thigh.sin(), -thigh.cos(), side * 0.03]);
    let shank = thigh - knee_bend;
    place(j, rig, base + 2, [shank.sin(), -shank.cos(), side * 0.03]);
    place(j, rig, base + 3, [foot_pitch.cos(), -foot_pitch.sin(), side * 0.05]);
}

/// Two-bone leg IK: pelvis corner → knee → ankle with exact segment lengths,
/// ankle pulled toward the sagittal target (forward x, height y) as far as
/// reach allows, knee displaced forward.
fn leg_ik(
    j: &mut [V3; JOINTS],
    rig: &SkeletonSpec,
    base: usize,
    side: f64,
    ankle_x: f64,
    ankle_y: f64,
) {
    place(j, rig, base, [0.0, 0.0, side]);
    let (_, pelvis_idx) = rig.edges[base];
    let p = j[pelvis_idx];
    let (l1, l2) = (rig.rest_lengths[base + 1], rig.rest_lengths[base + 2]);
    let target = [ankle_x, ankle_y, p[2]];
    let dvec = sub(target, p);
    let d_raw = norm(dvec);
    let d = d_raw.clamp((l1 - l2).abs() + 0.5, (l1 + l2) * 0.9995);
    let a = add(p, scale(dvec, d / d_raw));
    let along = (l1 * l1 - l2 * l2 + d * d) / (2.0 * d);
    let h = (l1 * l1 - along * along).max(0.0).sqrt();
    let u = scale(sub(a, p), 1.0 / d);
    let fwd = [1.0, 0.0, 0.0];
    let perp = unit(sub(fwd, scale(u, dot(fwd, u))));
    let knee = add(add(p, scale(u, along)), scale(perp, h));
    let (_, knee_idx) = rig.edges[base + 1];
    let (_, ankle_idx) = rig.edges[base + 2];
    j[knee_idx] = knee;
    j[ankle_idx] = a;
    place(j, rig, base + 3, [0.95, -0.35, side * 0.1]);
}

fn write_frame(clip: &mut PoseClip, t: usize, joints: &[V3; JOINTS], vx: f64, vz: f64, g: f64) {
    for (jj, p) in joints.iter().enumerate() {
        clip.set_joint(jj, t, *p);
    }
    clip.set(VEL_X_ROW, t, vx);
    clip.set(VEL_Z_ROW, t, vz);
    clip.set(VEL_ROT_ROW, t, g);
}

// ── families ─────────────────────────────────────────────────────────────────

fn uniform(rng: &mut ChaCha8Rng, lo: f64, hi: f64) -> f64 {
    lo + rng.random::<f64>() * (hi - lo)
}

struct GaitRanges {
    freq: (f64, f64),
    speed: (f64, f64), // cm/s
    bob: (f64, f64),
    thigh: (f64, f64),
    knee: (f64, f64),
    arm: (f64, f64),
    elbow: (f64, f64),
    lean: (f64, f64),
    pulse: (f64, f64),
    sway_vel: (f64, f64), // cm/s
}

const WALK: GaitRanges = GaitRanges {
    freq: (1.3, 1.9),
    speed: (100.0, 145.0),
    bob: (1.0, 2.0),
    thigh: (0.38, 0.52),
    knee: (0.35, 0.60),
    arm: (0.25, 0.40),
    elbow: (0.15, 0.30),
    lean: (0.02, 0.07),
    pulse: (0.08, 0.18),
    sway_vel: (6.0, 15.0),
};

const RUN: GaitRanges = GaitRanges {
    freq: (2.2, 2.9),
    speed: (250.0, 360.0),
    bob: (2.5, 4.5),
    thigh: (0.60, 0.85),
    knee: (0.80, 1.20),
    arm: (0.50, 0.75),
    elbow: (0.80, 1.10),
    lean: (0.08, 0.15),
    pulse: (0.15, 0.30),
    sway_vel: (9.0, 24.0),
};

fn gait_clip(ranges: &GaitRanges, frames: usize, fps: u32, rng: &mut ChaCha8Rng) -> PoseClip {
    let rig = default_rig();
    let mut clip = PoseClip::zeros(frames, fps, rig.clone());
    let fpsf = fps as f64;

    let f = uniform(rng, ranges.freq.0, ranges.freq.1);
    let phase0 = uniform(rng, 0.0, TAU);
    let speed = uniform(rng, ranges.speed.0, ranges.speed.1) / fpsf;
    let hip0 = uniform(rng, 86.0, 90.0);
    let bob = uniform(rng, ranges.bob.0, ranges.bob.1);
    let thigh_amp = uniform(rng, ranges.thigh.0, ranges.thigh.1);
    let knee_amp = uniform(rng, ranges.knee.0, ranges.knee.1);
    let arm_amp = uniform(rng, ranges.arm.0, ranges.arm.1);
    let elbow0 = uniform(rng, ranges.elbow.0, ranges.elbow.1);
    let lean = uniform(rng, ranges.lean.0, ranges.lean.1);
    let pulse = uniform(rng, ranges.pulse.0, ranges.pulse.1);
    let sway_vel = uniform(rng, ranges.sway_vel.0, ranges.sway_vel.1) / fpsf;
    let turn0 = uniform(rng, -0.006, 0.006);
    let turn_amp = uniform(rng, 0.0, 0.003);
    let turn_freq = uniform(rng, 0.05, 0.15);
    let turn_phase = uniform(rng, 0.0, TAU);

    let mut joints = [[0.0f64; 3]; JOINTS];
    for t in 0..frames {
        let time = t as f64 / fpsf;
        let phi = TAU * f * time + phase0;
        joints[0] = [0.0, hip0 + bob * (2.0 * phi).sin(), 0.0];
        spine_chain(&mut joints, &rig, lean, 0.03 * phi.sin());
        let thigh_l = thigh_amp * phi.sin();
        let thigh_r = -thigh_l;
        let knee_l = knee_amp * (0.5 + 0.5 * (phi + 1.2).sin());
        let knee_r = knee_amp * (0.5 + 0.5 * (phi + TAU / 2.0 + 1.2).sin());
        leg_swing(&mut joints, &rig, 13, 1.0, thigh_l, knee_l, 0.25 + 0.15 * (phi + 0.8).sin());
        leg_swing(&mut joints, &rig, 17, -1.0, thigh_r, knee_r, 0.25 + 0.15 * (phi + TAU / 2.0 + 0.8).sin());
        arm_swing(&mut joints, &rig, 5, 1.0, -arm_amp * phi.sin(), elbow0);
        arm_swing(&mut joints, &rig, 9, -1.0, arm_amp * phi.sin(), elbow0);
        let vx = speed * (1.0 + pulse * (2.0 * phi + 0.7).sin());
        let vz = sway_vel * phi.sin();
        let g = turn0 + turn_amp * (TAU * turn_freq * time + turn_phase).sin();
        write_frame(&mut clip, t, &joints, vx, vz, g);
    }
    clip
}

fn wave_clip(frames: usize, fps: u32, rng: &mut ChaCha8Rng) -> PoseClip {
    let rig = default_rig();
    let mut clip = PoseClip::zeros(frames, fps, rig.clone());
    let fpsf = fps as f64;
    let fw = uniform(rng, 1.2, 2.2);
    let phase0 = uniform(rng, 0.0, TAU);
    let hip0 = uniform(rng, 86.0, 90.0);
    let beta0 = uniform(rng, -0.15, 0.15);
    let beta_amp = uniform(rng, 0.35, 0.6);
    let breath_f = uniform(rng, 0.2, 0.35);
    let upper = unit([0.2, 0.75, -0.6]);

    let mut joints = [[0.0f64; 3]; JOINTS];
    for t in 0..frames {
        let time = t as f64 / fpsf;
        let phi_w = TAU * fw * time + phase0;
        let phi_b = TAU * breath_f * time;
        joints[0] = [0.0, hip0 + 0.3 * phi_b.sin(), 0.0];
        spine_chain(&mut joints, &rig, 0.03 + 0.01 * phi_b.sin(), 0.01 * phi_w.sin());
        leg_swing(&mut joints, &rig, 13, 1.0, 0.02, 0.05, 0.25);
        leg_swing(&mut joints, &rig, 17, -1.0, -0.02, 0.05, 0.25);
        arm_swing(&mut joints, &rig, 5, 1.0, 0.03 * phi_b.sin(), 0.15);
        let beta = beta0 + beta_amp * phi_w.sin();
        let fore = unit([beta.sin() + 0.1, beta.cos(), -0.2]);
        arm_directed(&mut joints, &rig, 9, -1.0, upper, fore);
        write_frame(&mut clip, t, &joints, 0.0, 0.0, 0.0);
    }
    clip
}

fn squat_clip(frames: usize, fps: u32, rng: &mut ChaCha8Rng) -> PoseClip {
    let rig = default_rig();
    let mut clip = PoseClip::zeros(frames, fps, rig.clone());
    let fpsf = fps as f64;
    let f = uniform(rng, 0.35, 0.6);
    let phase0 = uniform(rng, 0.0, TAU);
    let depth = uniform(rng, 18.0, 32.0);
    let hip0 = uniform(rng, 86.0, 89.0);

    let mut joints = [[0.0f64; 3]; JOINTS];
    for t in 0..frames {
        let time = t as f64 / fpsf;
        let phi = TAU * f * time + phase0;
        let frac = 0.5 * (1.0 - phi.cos());
        joints[0] = [0.0, hip0 - depth * frac, 0.0];
        spine_chain(&mut joints, &rig, 0.05 + 0.30 * frac, 0.0);
        leg_ik(&mut joints, &rig, 13, 1.0, 2.0, 7.0);
        leg_ik(&mut joints, &rig, 17, -1.0, 2.0, 7.0);
        // arms rise to horizontal as the squat deepens
        let up = unit([0.2 + 0.9 * frac, -(1.0 - 0.95 * frac), 0.1]);
        let up_r = unit([0.2 + 0.9 * frac, -(1.0 - 0.95 * frac), -0.1]);
        arm_directed(&mut joints, &rig, 5, 1.0, up, up);
        arm_directed(&mut joints, &rig, 9, -1.0, up_r, up_r);
        write_frame(&mut clip, t, &joints, 0.0, 0.0, 0.0);
    }
    clip
}

fn idle_clip(frames: usize, fps: u32, rng: &mut ChaCha8Rng) -> PoseClip {
    let rig = default_rig();
    let mut clip = PoseClip::zeros(frames, fps, rig.clone());
    let fpsf = fps as f64;
    let breath_f = uniform(rng, 0.2, 0.35);
    let phase0 = uniform(rng, 0.0, TAU);
    let hip0 = uniform(rng, 87.0, 90.0);

    let mut joints = [[0.0f64; 3]; JOINTS];
    for t in 0..frames {
        let phi_b = TAU * breath_f * (t as f64 / fpsf) + phase0;
        joints[0] = [0.0, hip0 + 0.25 * phi_b.sin(), 0.0];
        spine_chain(&mut joints, &rig, 0.02 + 0.01 * phi_b.sin(), 0.008 * (phi_b * 0.7).sin());
        leg_swing(&mut joints, &rig, 13, 1.0, 0.01 * phi_b.sin(), 0.03, 0.25);
        leg_swing(&mut joints, &rig, 17, -1.0, -0.01 * phi_b.sin(), 0.03, 0.25);
        arm_swing(&mut joints, &rig, 5, 1.0, 0.012 * phi_b.sin(), 0.10);
        arm_swing(&mut joints, &rig, 9, -1.0, -0.012 * phi_b.sin(), 0.10);
        write_frame(&mut clip, t, &joints, 0.0, 0.0, 0.0);
    }
    clip
}

fn generate_one(family: MotionFamily, frames: usize, fps: u32, rng: &mut ChaCha8Rng) -> PoseClip {
    match family {
        MotionFamily::Walk => gait_clip(&WALK, frames, fps, rng),
        MotionFamily::Run => gait_clip(&RUN, frames, fps, rng),
        MotionFamily::Wave => wave_clip(frames, fps, rng),
        MotionFamily::Squat => squat_clip(frames, fps, rng),
        MotionFamily::Idle => idle_clip(frames, fps, rng),
        MotionFamily::Mixed => unreachable!("resolved per clip before dispatch"),
    }
}
