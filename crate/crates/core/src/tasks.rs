//! Inference tasks over a trained model, plus the non-learned baselines
//! they are compared against.
//!
//! Every task follows the same shape: normalize with the training stats,
//! blank out whatever is missing, run one forward pass (any clip length),
//! denormalize. Nothing here post-processes the network output.

use crate::error::{Error, Result};
use crate::mask::{add_gaussian_noise, apply_mask, sample_frame_drop_mask, FeatureMask, PerturbationSpec};
use crate::model::{forward, Arch, ModelConfig, ModelWeights};
use crate::motion::{denormalize, normalize, NormStats, PoseClip, JOINTS, POSE_ROWS};
use crate::tensor::{Real, Tensor4};

/// Sorted, non-overlapping `(start, length)` gaps inside `[0, frames)`.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct GapSet {
    gaps: Vec<(usize, usize)>,
}

impl GapSet {
    pub fn new(mut gaps: Vec<(usize, usize)>, frames: usize) -> Result<Self> {
        gaps.sort_unstable();
        for &(start, len) in &gaps {
            if len == 0 {
                return Err(Error::invalid(format!("zero-length gap at frame {start}")));
            }
            if start >= frames || start + len > frames {
                return Err(Error::invalid(format!(
                    "gap {start}+{len} leaves the clip's {frames} frames"
                )));
            }
        }
        for w in gaps.windows(2) {
            let ((a, la), (b, _)) = (w[0], w[1]);
            if a + la > b {
                return Err(Error::invalid(format!(
                    "gaps {a}+{la} and starting {b} overlap"
                )));
            }
        }
        Ok(GapSet { gaps })
    }

    pub fn empty() -> Self {
        GapSet { gaps: Vec::new() }
    }

    /// One gap of `len` frames centered in the clip; `len = 0` means no gap.
    pub fn centered(frames: usize, len: usize) -> Result<Self> {
        if len == 0 {
            return Ok(Self::empty());
        }
        if len >= frames {
            return Err(Error::invalid(format!(
                "centered gap of {len} does not fit {frames} frames"
            )));
        }
        GapSet::new(vec![((frames - len) / 2, len)], frames)
    }

    pub fn gaps(&self) -> &[(usize, usize)] {
        &self.gaps
    }

    pub fn is_empty(&self) -> bool {
        self.gaps.is_empty()
    }

    pub fn covers(&self, t: usize) -> bool {
        self.gaps
            .iter()
            .any(|&(start, len)| t >= start && t < start + len)
    }

    /// Index of the gap containing `[start, start+len)` entirely, if any.
    fn containing(&self, start: usize, len: usize) -> Option<usize> {
        self.gaps
            .iter()
            .position(|&(gs, gl)| start >= gs && start + len <= gs + gl)
    }

    fn mask(&self, frames: usize) -> FeatureMask {
        let mut m = FeatureMask::ones(frames);
        for &(start, len) in &self.gaps {
            m.zero_columns(start, len);
        }
        m
    }
}

fn check_task_input<T: Real>(clip: &PoseClip, weights: &ModelWeights<T>) -> Result<()> {
    if weights.config.input_rows != POSE_ROWS {
        return Err(Error::invalid(format!(
            "model expects {} input rows, clips carry {POSE_ROWS}",
            weights.config.input_rows
        )));
    }
    if clip.frames() == 0 {
        return Err(Error::invalid("empty clip"));
    }
    Ok(())
}

/// Core of every task: run the normalized, masked clip through `net` and
/// denormalize. Split out so tests can substitute an identity network.
pub(crate) fn reconstruct_with<T, F>(masked: &PoseClip, stats: &NormStats, net: F) -> Result<PoseClip>
where
    T: Real,
    F: FnOnce(&Tensor4<T>) -> Result<Tensor4<T>>,
{
    let out = net(&masked.to_tensor::<T>())?;
    denormalize(&masked.from_tensor(&out)?, stats)
}

fn splice_known(result: &mut PoseClip, original: &PoseClip, gaps: &GapSet) {
    for t in 0..original.frames() {
        if !gaps.covers(t) {
            for r in 0..POSE_ROWS {
                result.set(r, t, original.at(r, t));
            }
        }
    }
}

pub(crate) fn infill_with<T, F>(
    clip: &PoseClip,
    gaps: &GapSet,
    stats: &NormStats,
    keep_known: bool,
    net: F,
) -> Result<PoseClip>
where
    T: Real,
    F: FnOnce(&Tensor4<T>) -> Result<Tensor4<T>>,
{
    let normalized = normalize(clip, stats)?;
    let masked = apply_mask(&normalized, &gaps.mask(clip.frames()))?;
    let mut result = reconstruct_with(&masked, stats, net)?;
    if keep_known {
        splice_known(&mut result, clip, gaps);
    }
    Ok(result)
}

/// Fill the gaps of `clip` in a single forward pass. By default the whole
/// clip is the network's reconstruction; `keep_known` splices the original
/// frames back outside the gaps.
pub fn infill<T: Real>(
    clip: &PoseClip,
    gaps: &GapSet,
    weights: &ModelWeights<T>,
    stats: &NormStats,
    keep_known: bool,
) -> Result<PoseClip> {
    check_task_input(clip, weights)?;
    GapSet::new(gaps.gaps.clone(), clip.frames())?;
    infill_with(clip, gaps, stats, keep_known, |x| forward(x, weights))
}

/// A denoising run: the network's output and the corrupted clip it saw
/// (denormalized, so for frame drops this is exactly the leave-at-mean
/// baseline).
pub struct DenoiseResult {
    pub recovered: PoseClip,
    pub corrupted: PoseClip,
}

/// Corrupt `clip` per `perturbation` (in the normalized domain, where the
/// network operates) and reconstruct it. Pass `None` to treat `clip` as
/// already corrupted.
pub fn denoise<T: Real>(
    clip: &PoseClip,
    perturbation: Option<(&PerturbationSpec, u64)>,
    weights: &ModelWeights<T>,
    stats: &NormStats,
) -> Result<DenoiseResult> {
    check_task_input(clip, weights)?;
    let normalized = normalize(clip, stats)?;
    let corrupted_norm = match perturbation {
        None => normalized,
        Some((spec, seed)) => {
            spec.validate()?;
            match *spec {
                PerturbationSpec::Gaussian { sigma } => {
                    add_gaussian_noise(&normalized, sigma, seed)?
                }
                PerturbationSpec::FrameDrop { p } => {
                    let mask = sample_frame_drop_mask(clip.frames(), p, seed)?;
                    apply_mask(&normalized, &mask)?
                }
                _ => {
                    return Err(Error::invalid(
                        "denoise handles gaussian and frame_drop perturbations only",
                    ))
                }
            }
        }
    };
    let recovered = reconstruct_with(&corrupted_norm, stats, |x| forward(x, weights))?;
    Ok(DenoiseResult {
        recovered,
        corrupted: denormalize(&corrupted_norm, stats)?,
    })
}

/// Blank the three rows of each listed joint over the whole clip and
/// reconstruct. An empty list degenerates to plain reconstruction.
pub fn recover_joints<T: Real>(
    clip: &PoseClip,
    joints: &[usize],
    weights: &ModelWeights<T>,
    stats: &NormStats,
) -> Result<PoseClip> {
    check_task_input(clip, weights)?;
    if joints.len() > 3 {
        return Err(Error::invalid(format!(
            "at most 3 joints can be dropped, got {}",
            joints.len()
        )));
    }
    for (i, &j) in joints.iter().enumerate() {
        if j >= JOINTS {
            return Err(Error::invalid(format!("joint index {j} out of range")));
        }
        if joints[..i].contains(&j) {
            return Err(Error::invalid(format!("joint {j} listed twice")));
        }
    }
    let normalized = normalize(clip, stats)?;
    let mut mask = FeatureMask::ones(clip.frames());
    for &j in joints {
        mask.zero_joint(j);
    }
    let masked = apply_mask(&normalized, &mask)?;
    reconstruct_with(&masked, stats, |x| forward(x, weights))
}

/// A tertiary input for [`blend_tertiary`]: pin `joints` to the poses of
/// `source` over `[start, start+len)` inside one of the declared gaps.
/// Source frame `i` lands on target frame `start + i`.
#[derive(Clone, Debug)]
pub struct BlendConstraint {
    pub joints: Vec<usize>,
    pub source: PoseClip,
    pub start: usize,
    pub len: usize,
}

pub const MIN_CONSTRAINT_FRAMES: usize = 5;

impl BlendConstraint {
    fn validate(&self, gaps: &GapSet) -> Result<()> {
        if self.joints.is_empty() {
            return Err(Error::invalid("constraint needs at least one joint"));
        }
        for (i, &j) in self.joints.iter().enumerate() {
            if j >= JOINTS {
                return Err(Error::invalid(format!("constraint joint {j} out of range")));
            }
            if self.joints[..i].contains(&j) {
                return Err(Error::invalid(format!("constraint joint {j} listed twice")));
            }
        }
        if self.len < MIN_CONSTRAINT_FRAMES {
            return Err(Error::invalid(format!(
                "constraints below {MIN_CONSTRAINT_FRAMES} frames are treated as noise; got {}",
                self.len
            )));
        }
        if gaps.containing(self.start, self.len).is_none() {
            return Err(Error::invalid(format!(
                "constraint {}+{} lies outside every declared gap",
                self.start, self.len
            )));
        }
        if self.source.frames() < self.len {
            return Err(Error::invalid(format!(
                "constraint source has {} frames, needs {}",
                self.source.frames(),
                self.len
            )));
        }
        Ok(())
    }
}

/// Infill with tertiary inputs: gaps are blanked, then each constraint's
/// joints are written back (normalized with the same stats) over its
/// interval, so the network blends context and constraint in one pass.
pub fn blend_tertiary<T: Real>(
    clip: &PoseClip,
    gaps: &GapSet,
    constraints: &[BlendConstraint],
    weights: &ModelWeights<T>,
    stats: &NormStats,
) -> Result<PoseClip> {
    check_task_input(clip, weights)?;
    GapSet::new(gaps.gaps.clone(), clip.frames())?;
    for c in constraints {
        c.validate(gaps)?;
    }
    let normalized = normalize(clip, stats)?;
    let mut masked = apply_mask(&normalized, &gaps.mask(clip.frames()))?;
    for c in constraints {
        let source_norm = normalize(&c.source, stats)?;
        for i in 0..c.len {
            for &j in &c.joints {
                for k in 0..3 {
                    masked.set(3 * j + k, c.start + i, source_norm.at(3 * j + k, i));
                }
            }
        }
    }
    reconstruct_with(&masked, stats, |x| forward(x, weights))
}

/// Per-row linear interpolation across each gap — the classical baseline.
/// Frames outside the gaps are returned untouched.
pub fn linear_interp(clip: &PoseClip, gaps: &GapSet) -> Result<PoseClip> {
    let frames = clip.frames();
    GapSet::new(gaps.gaps.clone(), frames)?;
    let mut out = clip.clone();
    for &(start, len) in gaps.gaps() {
        if start == 0 || start + len == frames {
            return Err(Error::invalid(format!(
                "gap {start}+{len} touches the clip boundary; interpolation needs a known frame on each side"
            )));
        }
        for r in 0..POSE_ROWS {
            let a = clip.at(r, start - 1);
            let b = clip.at(r, start + len);
            for i in 0..len {
                let w = (i + 1) as f64 / (len + 1) as f64;
                out.set(r, start + i, a + (b - a) * w);
            }
        }
    }
    Ok(out)
}

/// The ablation architecture: one strided conv per unit, no pooling.
pub fn vanilla_ae_config() -> ModelConfig {
    ModelConfig {
        arch: Arch::Vanilla,
        ..ModelConfig::default()
    }
}
