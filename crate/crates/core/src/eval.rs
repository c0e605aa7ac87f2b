//! Metrics: 3D joint error, bone-length distributions, gap/context sweeps,
//! and inference timing. All error numbers are centimeters.

use crate::error::{Error, Result};
use crate::model::{forward, ModelWeights};
use crate::motion::skeleton::SkeletonSpec;
use crate::motion::{to_global_positions, NormStats, PoseClip, JOINTS};
use crate::tasks::{infill, GapSet};
use crate::tensor::Real;
use std::fmt::Write as _;
use std::time::Instant;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum ErrorScope {
    Full,
    GapOnly,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Alignment {
    RootAligned,
    Global,
}

/// Pooled per-joint Euclidean error over the selected frames.
#[derive(Clone, Debug)]
pub struct ErrorReport {
    pub mean: f64,
    pub std: f64,
    /// Frames that entered the pool (each contributes 22 joint terms).
    pub frames: usize,
    pub scope: ErrorScope,
    pub alignment: Alignment,
}

impl ErrorReport {
    /// Pool several reports as if their frame-joint terms were one sample.
    pub fn pool(reports: &[ErrorReport]) -> Result<ErrorReport> {
        let first = reports
            .first()
            .ok_or_else(|| Error::invalid("nothing to pool"))?;
        let mut n = 0.0f64;
        let mut sum = 0.0;
        let mut sumsq = 0.0;
        for r in reports {
            if r.scope != first.scope || r.alignment != first.alignment {
                return Err(Error::invalid("cannot pool reports of mixed scope/alignment"));
            }
            let k = (r.frames * JOINTS) as f64;
            n += k;
            sum += r.mean * k;
            sumsq += (r.std * r.std + r.mean * r.mean) * k;
        }
        let mean = sum / n;
        let var = (sumsq / n - mean * mean).max(0.0);
        Ok(ErrorReport {
            mean,
            std: var.sqrt(),
            frames: reports.iter().map(|r| r.frames).sum(),
            scope: first.scope,
            alignment: first.alignment,
        })
    }
}

fn pooled_stats(errors: &[f64]) -> (f64, f64) {
    let n = errors.len() as f64;
    let mean = errors.iter().sum::<f64>() / n;
    let var = errors.iter().map(|e| (e - mean) * (e - mean)).sum::<f64>() / n;
    (mean, var.sqrt())
}

fn selected_frames(frames: usize, scope: ErrorScope, gaps: Option<&GapSet>) -> Result<Vec<usize>> {
    match scope {
        ErrorScope::Full => Ok((0..frames).collect()),
        ErrorScope::GapOnly => {
            let gaps = gaps.ok_or_else(|| {
                Error::invalid("gap_only scope needs the gap set that was infilled")
            })?;
            let sel: Vec<usize> = (0..frames).filter(|&t| gaps.covers(t)).collect();
            if sel.is_empty() {
                return Err(Error::invalid("gap set selects no frames"));
            }
            Ok(sel)
        }
    }
}

/// Mean/std of per-joint Euclidean distance between two clips' root-relative
/// poses (rows 0..66; velocity rows are ignored). The representation is
/// root-relative already, so this is the root-aligned comparison.
pub fn joint_error(
    pred: &PoseClip,
    truth: &PoseClip,
    scope: ErrorScope,
    gaps: Option<&GapSet>,
) -> Result<ErrorReport> {
    if pred.frames() != truth.frames() {
        return Err(Error::shape(
            "joint_error",
            [1, 1, 69, pred.frames()],
            [1, 1, 69, truth.frames()],
        ));
    }
    let sel = selected_frames(pred.frames(), scope, gaps)?;
    let mut errors = Vec::with_capacity(sel.len() * JOINTS);
    for &t in &sel {
        for j in 0..JOINTS {
            let p = pred.joint(j, t);
            let q = truth.joint(j, t);
            let d = [p[0] - q[0], p[1] - q[1], p[2] - q[2]];
            errors.push((d[0] * d[0] + d[1] * d[1] + d[2] * d[2]).sqrt());
        }
    }
    let (mean, std) = pooled_stats(&errors);
    Ok(ErrorReport {
        mean,
        std,
        frames: sel.len(),
        scope,
        alignment: Alignment::RootAligned,
    })
}

/// Joint error in world space: both clips' root trajectories are integrated
/// from their velocity rows, so heading/position drift counts. Reported
/// separately from the root-aligned numbers, never mixed with them.
pub fn global_joint_error(pred: &PoseClip, truth: &PoseClip) -> Result<ErrorReport> {
    if pred.frames() != truth.frames() {
        return Err(Error::shape(
            "global_joint_error",
            [1, 1, 69, pred.frames()],
            [1, 1, 69, truth.frames()],
        ));
    }
    let gp = to_global_positions(pred);
    let gt = to_global_positions(truth);
    let mut errors = Vec::with_capacity(gp.len());
    for (p, q) in gp.iter().zip(&gt) {
        let d = [p[0] - q[0], p[1] - q[1], p[2] - q[2]];
        errors.push((d[0] * d[0] + d[1] * d[1] + d[2] * d[2]).sqrt());
    }
    let (mean, std) = pooled_stats(&errors);
    Ok(ErrorReport {
        mean,
        std,
        frames: pred.frames(),
        scope: ErrorScope::Full,
        alignment: Alignment::Global,
    })
}

/// Distribution of one bone's length over all frames of a clip set.
#[derive(Clone, Debug)]
pub struct BoneReport {
    /// (parent, child) joint indices of the edge.
    pub edge: (usize, usize),
    pub name: &'static str,
    pub rig_length: f64,
    pub median: f64,
    pub q1: f64,
    pub q3: f64,
    pub min: f64,
    pub max: f64,
}

/// Linear-interpolation quantile on a sorted slice (position p·(n−1)).
fn quantile(sorted: &[f64], p: f64) -> f64 {
    let pos = p * (sorted.len() - 1) as f64;
    let lo = pos.floor() as usize;
    let frac = pos - lo as f64;
    if lo + 1 < sorted.len() {
        sorted[lo] * (1.0 - frac) + sorted[lo + 1] * frac
    } else {
        sorted[lo]
    }
}

pub fn bone_length_stats(clips: &[PoseClip], skeleton: &SkeletonSpec) -> Result<Vec<BoneReport>> {
    if clips.is_empty() || clips.iter().any(|c| c.frames() == 0) {
        return Err(Error::invalid("bone stats need at least one non-empty clip"));
    }
    let mut reports = Vec::with_capacity(skeleton.edges.len());
    for (e, &(parent, child)) in skeleton.edges.iter().enumerate() {
        let mut lengths = Vec::new();
        for clip in clips {
            for t in 0..clip.frames() {
                let p = clip.joint(parent, t);
                let c = clip.joint(child, t);
                let d = [c[0] - p[0], c[1] - p[1], c[2] - p[2]];
                lengths.push((d[0] * d[0] + d[1] * d[1] + d[2] * d[2]).sqrt());
            }
        }
        lengths.sort_by(|a, b| a.partial_cmp(b).unwrap());
        reports.push(BoneReport {
            edge: (parent, child),
            name: skeleton.joint_names[child],
            rig_length: skeleton.rest_lengths[e],
            median: quantile(&lengths, 0.5),
            q1: quantile(&lengths, 0.25),
            q3: quantile(&lengths, 0.75),
            min: lengths[0],
            max: *lengths.last().unwrap(),
        });
    }
    Ok(reports)
}

#[derive(Clone, Debug)]
pub struct SweepRow {
    /// Gap size for gap sweeps, context length for context sweeps.
    pub value: usize,
    pub report: ErrorReport,
}

/// One centered gap per size per clip, infilled and scored over the gap
/// frames only (a size of 0 scores plain reconstruction over all frames).
pub fn sweep_gaps<T: Real>(
    weights: &ModelWeights<T>,
    stats: &NormStats,
    clips: &[PoseClip],
    gap_sizes: &[usize],
) -> Result<Vec<SweepRow>> {
    if clips.is_empty() {
        return Err(Error::invalid("gap sweep needs clips"));
    }
    let mut rows = Vec::with_capacity(gap_sizes.len());
    for &gap in gap_sizes {
        let mut reports = Vec::with_capacity(clips.len());
        for clip in clips {
            let gaps = GapSet::centered(clip.frames(), gap)?;
            let out = infill(clip, &gaps, weights, stats, false)?;
            let report = if gaps.is_empty() {
                joint_error(&out, clip, ErrorScope::Full, None)?
            } else {
                joint_error(&out, clip, ErrorScope::GapOnly, Some(&gaps))?
            };
            reports.push(report);
        }
        rows.push(SweepRow {
            value: gap,
            report: ErrorReport::pool(&reports)?,
        });
    }
    Ok(rows)
}

/// Fixed gap, shrinking known context: each clip is cropped to
/// `context + gap + context` centered frames before infilling.
pub fn sweep_context<T: Real>(
    weights: &ModelWeights<T>,
    stats: &NormStats,
    clips: &[PoseClip],
    contexts: &[usize],
    gap: usize,
) -> Result<Vec<SweepRow>> {
    if clips.is_empty() {
        return Err(Error::invalid("context sweep needs clips"));
    }
    if gap == 0 {
        return Err(Error::invalid("context sweep needs a non-zero gap"));
    }
    let mut rows = Vec::with_capacity(contexts.len());
    for &context in contexts {
        if context == 0 {
            return Err(Error::invalid("context of 0 leaves the gap unanchored"));
        }
        let total = 2 * context + gap;
        let mut reports = Vec::with_capacity(clips.len());
        for clip in clips {
            if clip.frames() < total {
                return Err(Error::invalid(format!(
                    "clip of {} frames cannot host context {context} around a {gap}-frame gap",
                    clip.frames()
                )));
            }
            let start = (clip.frames() - total) / 2;
            let mut cropped = PoseClip::zeros(total, clip.fps, clip.skeleton.clone());
            for r in 0..69 {
                for t in 0..total {
                    cropped.set(r, t, clip.at(r, start + t));
                }
            }
            let gaps = GapSet::new(vec![(context, gap)], total)?;
            let out = infill(&cropped, &gaps, weights, stats, false)?;
            reports.push(joint_error(&out, &cropped, ErrorScope::GapOnly, Some(&gaps))?);
        }
        rows.push(SweepRow {
            value: context,
            report: ErrorReport::pool(&reports)?,
        });
    }
    Ok(rows)
}

#[derive(Clone, Debug)]
pub struct BenchRow {
    pub frames: usize,
    pub total_ms: f64,
    pub per_frame_ms: f64,
}

/// Median forward-pass wall time over `runs` timed passes (one warmup pass
/// is discarded) on a deterministic dummy clip per length.
pub fn benchmark_inference<T: Real>(
    weights: &ModelWeights<T>,
    lengths: &[usize],
    runs: usize,
) -> Result<Vec<BenchRow>> {
    if runs == 0 {
        return Err(Error::invalid("benchmark needs at least one run"));
    }
    let mut rows = Vec::with_capacity(lengths.len());
    for &frames in lengths {
        if frames == 0 {
            return Err(Error::invalid("cannot benchmark a zero-length clip"));
        }
        let mut x = crate::tensor::Tensor4::<T>::zeros(1, 1, weights.config.input_rows, frames);
        for (i, v) in x.data_mut().iter_mut().enumerate() {
            *v = T::from_f64(((i % 97) as f64 - 48.0) / 48.0);
        }
        let _ = forward(&x, weights)?;
        let mut times = Vec::with_capacity(runs);
        for _ in 0..runs {
            let start = Instant::now();
            let _ = forward(&x, weights)?;
            times.push(start.elapsed().as_secs_f64() * 1e3);
        }
        times.sort_by(|a, b| a.partial_cmp(b).unwrap());
        let total_ms = times[times.len() / 2];
        rows.push(BenchRow {
            frames,
            total_ms,
            per_frame_ms: total_ms / frames as f64,
        });
    }
    Ok(rows)
}

// ── CSV emitters ─────────────────────────────────────────────────────────────

pub fn sweep_csv(label: &str, rows: &[SweepRow]) -> String {
    let mut s = format!("{label},mean_cm,std_cm,frames\n");
    for r in rows {
        let _ = writeln!(
            s,
            "{},{:.6},{:.6},{}",
            r.value, r.report.mean, r.report.std, r.report.frames
        );
    }
    s
}

pub fn bone_csv(rows: &[BoneReport]) -> String {
    let mut s = String::from("bone,rig_cm,median_cm,q1_cm,q3_cm,min_cm,max_cm\n");
    for r in rows {
        let _ = writeln!(
            s,
            "{},{:.6},{:.6},{:.6},{:.6},{:.6},{:.6}",
            r.name, r.rig_length, r.median, r.q1, r.q3, r.min, r.max
        );
    }
    s
}

pub fn bench_csv(rows: &[BenchRow]) -> String {
    let mut s = String::from("frames,total_ms,per_frame_ms\n");
    for r in rows {
        let _ = writeln!(s, "{},{:.3},{:.6}", r.frames, r.total_ms, r.per_frame_ms);
    }
    s
}
