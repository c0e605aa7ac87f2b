//! Curriculum training loop.
//!
//! One epoch = one pass over the training clips in a seed-shuffled order,
//! with a fresh perturbation drawn per clip per epoch. The loss is mean ℓ1
//! between the network output and the COMPLETE normalized clip over every
//! entry — never gap-only. Given a master seed the whole run (weights, log)
//! is bit-deterministic; wall-clock seconds are the one excluded column.

use crate::error::{Error, Result};
use crate::eval::{sweep_gaps, SweepRow};
use crate::mask::{
    apply_mask, curriculum_mu, gap_mask, sample_gap_mask, sample_joint_drop_mask, CurriculumState,
};
use crate::model::{backward, build, forward_cached, io::save_weights, ModelConfig, ModelWeights};
use crate::motion::io::write_atomic;
use crate::motion::{compute_norm_stats, normalize, NormStats, PoseClip, POSE_ROWS};
use crate::nn::{l1_with_grad, OptimConfig};
use crate::seeds::derive_seed;
use crate::tensor::Tensor4;
use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use std::path::{Path, PathBuf};
use std::time::Instant;

// Disjoint RNG streams under the master seed.
const STREAM_SPLIT: u64 = 0x5eed_0001;
const STREAM_SHUFFLE: u64 = 0x5eed_0002;
const STREAM_PERTURB: u64 = 0x5eed_0003;
const STREAM_VAL: u64 = 0x5eed_0004;
const STREAM_INIT: u64 = 0x5eed_0005;

#[derive(Clone, Debug)]
pub struct TrainConfig {
    pub epochs: usize,
    pub batch_size: usize,
    pub optim: OptimConfig,
    pub seed: u64,
    /// Scheduled gap curriculum. When off, every gap has `fixed_gap` frames
    /// (0 disables gap masking entirely).
    pub curriculum: bool,
    pub fixed_gap: usize,
    /// Probability a sample gets a gap mask instead of a joint drop.
    pub mix_ratio: f64,
    pub validation_fraction: f64,
    /// Checkpoint every k epochs into `checkpoint_dir`; 0 = never.
    pub checkpoint_every: usize,
    pub checkpoint_dir: Option<PathBuf>,
    pub model: ModelConfig,
}

impl Default for TrainConfig {
    fn default() -> Self {
        TrainConfig {
            epochs: 30,
            batch_size: 16,
            optim: OptimConfig::default(),
            seed: 1,
            curriculum: true,
            fixed_gap: 60,
            mix_ratio: 0.5,
            validation_fraction: 0.1,
            checkpoint_every: 0,
            checkpoint_dir: None,
            model: ModelConfig::default(),
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<()> {
        if self.epochs == 0 {
            return Err(Error::invalid("epochs must be ≥ 1"));
        }
        if self.batch_size == 0 {
            return Err(Error::invalid("batch size must be ≥ 1"));
        }
        if !(self.validation_fraction > 0.0 && self.validation_fraction < 1.0) {
            return Err(Error::invalid(format!(
                "validation fraction {} outside (0,1)",
                self.validation_fraction
            )));
        }
        if !(0.0..=1.0).contains(&self.mix_ratio) {
            return Err(Error::invalid(format!(
                "mix ratio {} outside [0,1]",
                self.mix_ratio
            )));
        }
        if self.checkpoint_every > 0 && self.checkpoint_dir.is_none() {
            return Err(Error::invalid("checkpointing requires a directory"));
        }
        self.optim.validate()?;
        self.model.validate()
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct EpochRecord {
    pub epoch: usize,
    pub train_loss: f64,
    pub val_loss: f64,
    pub mu_e: usize,
    pub seconds: f64,
}

#[derive(Clone, Debug, Default, PartialEq)]
pub struct TrainLog {
    pub records: Vec<EpochRecord>,
}

impl TrainLog {
    pub fn to_csv(&self) -> String {
        let mut s = String::from("epoch,train_loss,val_loss,mu_e,seconds\n");
        for r in &self.records {
            s.push_str(&format!(
                "{},{:.9},{:.9},{},{:.3}\n",
                r.epoch, r.train_loss, r.val_loss, r.mu_e, r.seconds
            ));
        }
        s
    }
}

pub struct TrainOutcome {
    pub weights: ModelWeights<f32>,
    pub log: TrainLog,
    pub stats: NormStats,
    /// Corpus indices held out for validation.
    pub val_indices: Vec<usize>,
}

/// Gap-length mean for an epoch. The published schedule steps by 10 every
/// 5 epochs over a 60-epoch ramp; shorter runs compress the ramp
/// proportionally so the full 10→120 range is still visited.
pub fn scheduled_mu(epoch: usize, total_epochs: usize) -> usize {
    if total_epochs >= 60 {
        curriculum_mu(epoch)
    } else {
        (10 + 10 * (12 * epoch / total_epochs)).min(120)
    }
}

/// Mask one normalized clip for training: gap vs joint drop per mix ratio.
fn perturb_sample(
    normalized: &PoseClip,
    mu_e: usize,
    curriculum: bool,
    epoch: usize,
    mix_ratio: f64,
    sample_seed: u64,
) -> Result<PoseClip> {
    let mut rng = ChaCha8Rng::seed_from_u64(sample_seed);
    let take_gap = rng.random_bool(mix_ratio);
    let mask_seed: u64 = rng.random();
    let frames = normalized.frames();
    let mask = if take_gap {
        if curriculum {
            let state = CurriculumState::with_mu(epoch, mu_e);
            sample_gap_mask(frames, &state, mask_seed)?.0
        } else if mu_e == 0 {
            return Ok(normalized.clone());
        } else {
            let lambda = mu_e.min(frames - 1);
            let tau = ChaCha8Rng::seed_from_u64(mask_seed).random_range(0..=frames - lambda);
            gap_mask(frames, lambda, tau)?
        }
    } else {
        sample_joint_drop_mask(frames, mask_seed)
    };
    apply_mask(normalized, &mask)
}

/// Stack clips into one `[B,1,69,T]` tensor.
fn batch_tensor(clips: &[&PoseClip]) -> Tensor4<f32> {
    let frames = clips[0].frames();
    let mut t = Tensor4::zeros(clips.len(), 1, POSE_ROWS, frames);
    let per = POSE_ROWS * frames;
    let data = t.data_mut();
    for (n, clip) in clips.iter().enumerate() {
        for (i, &v) in clip.data().iter().enumerate() {
            data[n * per + i] = v as f32;
        }
    }
    t
}

fn checkpoint_file(dir: &Path, epoch: usize) -> PathBuf {
    dir.join(format!("checkpoint_epoch{epoch:04}.mofw"))
}

/// Atomically write weights and the log so far; never leaves partial files.
pub fn checkpoint(
    weights: &ModelWeights<f32>,
    log: &TrainLog,
    dir: &Path,
) -> Result<PathBuf> {
    std::fs::create_dir_all(dir)?;
    let path = checkpoint_file(dir, weights.trained_epochs as usize);
    save_weights(weights, &path)?;
    write_atomic(&dir.join("train_log.csv"), log.to_csv().as_bytes())?;
    Ok(path)
}

pub fn train(corpus: &[PoseClip], config: &TrainConfig) -> Result<TrainOutcome> {
    let weights = build::<f32>(&config.model, derive_seed(config.seed, STREAM_INIT))?;
    train_from(corpus, config, weights)
}

/// Continue training from a loaded checkpoint. The same corpus, config, and
/// seed reproduce the uninterrupted run's remaining epochs bit-exactly.
pub fn resume(
    corpus: &[PoseClip],
    config: &TrainConfig,
    weights: ModelWeights<f32>,
) -> Result<TrainOutcome> {
    if weights.config != config.model {
        return Err(Error::invalid(
            "checkpoint architecture differs from the configured model",
        ));
    }
    if weights.trained_epochs as usize >= config.epochs {
        return Err(Error::invalid(format!(
            "checkpoint already covers {} of {} epochs",
            weights.trained_epochs, config.epochs
        )));
    }
    train_from(corpus, config, weights)
}

fn train_from(
    corpus: &[PoseClip],
    config: &TrainConfig,
    mut weights: ModelWeights<f32>,
) -> Result<TrainOutcome> {
    config.validate()?;
    if corpus.is_empty() {
        return Err(Error::invalid("corpus is empty"));
    }
    let frames = corpus[0].frames();
    if frames < 2 {
        return Err(Error::invalid("clips must have at least 2 frames"));
    }
    if corpus.iter().any(|c| c.frames() != frames) {
        return Err(Error::invalid("all corpus clips must share one length"));
    }

    // held-out split — stats come from the training side only
    let mut indices: Vec<usize> = (0..corpus.len()).collect();
    let mut split_rng = ChaCha8Rng::seed_from_u64(derive_seed(config.seed, STREAM_SPLIT));
    indices.shuffle(&mut split_rng);
    let val_count = ((corpus.len() as f64 * config.validation_fraction).floor() as usize)
        .min(corpus.len() - 1);
    let val_indices: Vec<usize> = indices[..val_count].to_vec();
    let mut train_indices: Vec<usize> = indices[val_count..].to_vec();
    train_indices.sort_unstable();

    let train_clips: Vec<&PoseClip> = train_indices.iter().map(|&i| &corpus[i]).collect();
    let owned: Vec<PoseClip> = train_clips.iter().map(|&c| c.clone()).collect();
    let stats = compute_norm_stats(&owned)?;

    let normalized: Vec<PoseClip> = corpus
        .iter()
        .map(|c| normalize(c, &stats))
        .collect::<Result<_>>()?;

    let perturb_root = derive_seed(config.seed, STREAM_PERTURB);
    let val_root = derive_seed(config.seed, STREAM_VAL);
    let shuffle_root = derive_seed(config.seed, STREAM_SHUFFLE);

    let mut log = TrainLog::default();
    let start_epoch = weights.trained_epochs as usize;
    for epoch in start_epoch..config.epochs {
        let started = Instant::now();
        let mu_e = if config.curriculum {
            scheduled_mu(epoch, config.epochs)
        } else {
            config.fixed_gap
        };

        let mut order = train_indices.clone();
        let mut epoch_rng = ChaCha8Rng::seed_from_u64(derive_seed(shuffle_root, epoch as u64));
        order.shuffle(&mut epoch_rng);

        let mut loss_sum = 0.0f64;
        let mut loss_terms = 0usize;
        for (batch_no, chunk) in order.chunks(config.batch_size).enumerate() {
            let mut masked = Vec::with_capacity(chunk.len());
            for &idx in chunk {
                let sample_seed =
                    derive_seed(perturb_root, ((epoch as u64) << 32) | idx as u64);
                masked.push(perturb_sample(
                    &normalized[idx],
                    mu_e,
                    config.curriculum,
                    epoch,
                    config.mix_ratio,
                    sample_seed,
                )?);
            }
            let inputs = batch_tensor(&masked.iter().collect::<Vec<_>>());
            let targets =
                batch_tensor(&chunk.iter().map(|&i| &normalized[i]).collect::<Vec<_>>());

            let cache = forward_cached(&inputs, &weights)?;
            let (loss, grad) = l1_with_grad(cache.output(), &targets)?;
            let loss = loss as f64;
            if !loss.is_finite() {
                return Err(Error::NonFiniteLoss {
                    epoch,
                    batch: batch_no,
                    loss,
                });
            }
            let (_, enc_grads, dec_grads) = backward(&weights, &cache, &grad)?;
            weights.encoder.apply_grads(&enc_grads, &config.optim)?;
            weights.decoder.apply_grads(&dec_grads, &config.optim)?;
            loss_sum += loss * chunk.len() as f64;
            loss_terms += chunk.len();
        }
        let train_loss = loss_sum / loss_terms as f64;

        // validation under the same objective, fresh masks per epoch
        let val_loss = if val_indices.is_empty() {
            f64::NAN
        } else {
            let mut sum = 0.0;
            let mut terms = 0usize;
            for chunk in val_indices.chunks(config.batch_size) {
                let mut masked = Vec::with_capacity(chunk.len());
                for &idx in chunk {
                    let sample_seed =
                        derive_seed(val_root, ((epoch as u64) << 32) | idx as u64);
                    masked.push(perturb_sample(
                        &normalized[idx],
                        mu_e,
                        config.curriculum,
                        epoch,
                        config.mix_ratio,
                        sample_seed,
                    )?);
                }
                let inputs = batch_tensor(&masked.iter().collect::<Vec<_>>());
                let targets =
                    batch_tensor(&chunk.iter().map(|&i| &normalized[i]).collect::<Vec<_>>());
                let out = crate::model::forward(&inputs, &weights)?;
                let (loss, _) = l1_with_grad(&out, &targets)?;
                sum += loss as f64 * chunk.len() as f64;
                terms += chunk.len();
            }
            sum / terms as f64
        };

        weights.trained_epochs = (epoch + 1) as u32;
        log.records.push(EpochRecord {
            epoch,
            train_loss,
            val_loss,
            mu_e,
            seconds: started.elapsed().as_secs_f64(),
        });

        if config.checkpoint_every > 0 && (epoch + 1) % config.checkpoint_every == 0 {
            let dir = config.checkpoint_dir.as_ref().unwrap();
            checkpoint(&weights, &log, dir)?;
        }
    }

    Ok(TrainOutcome {
        weights,
        log,
        stats,
        val_indices,
    })
}

/// Table-1-style validation: per gap length, a centered gap is infilled on
/// each clip and scored over the gap frames only (0 = full reconstruction).
pub fn evaluate_epoch(
    weights: &ModelWeights<f32>,
    stats: &NormStats,
    validation: &[PoseClip],
    gap_lengths: &[usize],
) -> Result<Vec<SweepRow>> {
    sweep_gaps(weights, stats, validation, gap_lengths)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::io::load_weights;
    use crate::motion::synth::{synth_generate_frames, MotionFamily};

    fn tiny_corpus(n: usize, frames: usize, seed: u64) -> Vec<PoseClip> {
        synth_generate_frames(MotionFamily::Mixed, n, frames, 30, seed).unwrap()
    }

    fn tiny_config(epochs: usize) -> TrainConfig {
        TrainConfig {
            epochs,
            batch_size: 4,
            seed: 7,
            ..TrainConfig::default()
        }
    }

    #[test]
    fn config_validation() {
        assert!(TrainConfig::default().validate().is_ok());
        assert!(TrainConfig { epochs: 0, ..TrainConfig::default() }.validate().is_err());
        assert!(TrainConfig { batch_size: 0, ..TrainConfig::default() }.validate().is_err());
        assert!(TrainConfig { validation_fraction: 0.0, ..TrainConfig::default() }
            .validate()
            .is_err());
        assert!(TrainConfig { validation_fraction: 1.0, ..TrainConfig::default() }
            .validate()
            .is_err());
        assert!(TrainConfig { mix_ratio: 1.5, ..TrainConfig::default() }.validate().is_err());
        assert!(TrainConfig { checkpoint_every: 5, ..TrainConfig::default() }
            .validate()
            .is_err());
    }

    #[test]
    fn schedule_compresses_short_runs_and_keeps_long_ones() {
        // 60+ epochs: the published 10-per-5-epochs staircase
        assert_eq!(scheduled_mu(0, 60), 10);
        assert_eq!(scheduled_mu(5, 60), 20);
        assert_eq!(scheduled_mu(55, 60), 120);
        assert_eq!(scheduled_mu(200, 200), 120);
        // 30 epochs: same ramp, twice the slope
        assert_eq!(scheduled_mu(0, 30), 10);
        assert_eq!(scheduled_mu(2, 30), 10);
        assert_eq!(scheduled_mu(3, 30), 20);
        assert_eq!(scheduled_mu(29, 30), 120);
        // the ramp starts at 10, never decreases, and tops out at 120
        // whenever there are at least 12 epochs to host the 12 levels
        for epochs in [5usize, 12, 30, 59] {
            assert_eq!(scheduled_mu(0, epochs), 10);
            if epochs >= 12 {
                assert_eq!(scheduled_mu(epochs - 1, epochs), 120);
            }
            for e in 1..epochs {
                assert!(scheduled_mu(e, epochs) >= scheduled_mu(e - 1, epochs));
            }
        }
    }

    #[test]
    fn fixed_seed_gives_bit_identical_log_and_weights() {
        let corpus = tiny_corpus(12, 64, 3);
        let cfg = tiny_config(2);
        let a = train(&corpus, &cfg).unwrap();
        let b = train(&corpus, &cfg).unwrap();
        assert_eq!(a.log.records.len(), 2);
        for (ra, rb) in a.log.records.iter().zip(&b.log.records) {
            assert_eq!(ra.train_loss.to_bits(), rb.train_loss.to_bits());
            assert_eq!(ra.val_loss.to_bits(), rb.val_loss.to_bits());
            assert_eq!(ra.mu_e, rb.mu_e);
        }
        for (pa, pb) in a.weights.param_layers().zip(b.weights.param_layers()) {
            assert_eq!(pa.weights.data(), pb.weights.data());
            assert_eq!(pa.adam_m.data(), pb.adam_m.data());
        }
        assert_eq!(a.val_indices, b.val_indices);
    }

    #[test]
    fn loss_decreases_on_a_tiny_run() {
        let corpus = tiny_corpus(8, 64, 11);
        let cfg = TrainConfig {
            epochs: 6,
            batch_size: 4,
            seed: 2,
            curriculum: false,
            fixed_gap: 0,
            mix_ratio: 1.0, // always the (empty) gap branch → pure reconstruction
            ..TrainConfig::default()
        };
        let out = train(&corpus, &cfg).unwrap();
        let first = out.log.records.first().unwrap().train_loss;
        let last = out.log.records.last().unwrap().train_loss;
        assert!(
            last < first,
            "reconstruction loss should drop: {first} → {last}"
        );
    }

    #[test]
    fn one_clip_zero_gap_is_plain_reconstruction_training() {
        let corpus = tiny_corpus(2, 64, 5);
        let cfg = TrainConfig {
            epochs: 1,
            batch_size: 1,
            seed: 9,
            curriculum: false,
            fixed_gap: 0,
            mix_ratio: 1.0,
            ..TrainConfig::default()
        };
        let out = train(&corpus, &cfg).unwrap();
        assert_eq!(out.log.records.len(), 1);
        assert!(out.log.records[0].train_loss.is_finite());
        assert_eq!(out.log.records[0].mu_e, 0);
    }

    #[test]
    fn checkpoints_land_on_multiples_and_resume_is_bit_exact() {
        let dir = tempfile::tempdir().unwrap();
        let corpus = tiny_corpus(10, 64, 17);
        let cfg = TrainConfig {
            epochs: 6,
            batch_size: 4,
            seed: 21,
            checkpoint_every: 2,
            checkpoint_dir: Some(dir.path().to_path_buf()),
            ..TrainConfig::default()
        };
        let full = train(&corpus, &cfg).unwrap();
        for epoch in [2usize, 4, 6] {
            assert!(checkpoint_file(dir.path(), epoch).exists(), "epoch {epoch}");
        }
        assert!(!checkpoint_file(dir.path(), 3).exists());

        // resume from the epoch-2 checkpoint and compare against the
        // uninterrupted run
        let loaded = load_weights(&checkpoint_file(dir.path(), 2)).unwrap();
        assert_eq!(loaded.trained_epochs, 2);
        let resumed = resume(&corpus, &cfg, loaded).unwrap();
        assert_eq!(resumed.log.records.len(), 4);
        for (r, f) in resumed.log.records.iter().zip(&full.log.records[2..]) {
            assert_eq!(r.epoch, f.epoch);
            assert_eq!(r.train_loss.to_bits(), f.train_loss.to_bits());
            assert_eq!(r.val_loss.to_bits(), f.val_loss.to_bits());
        }
        for (pr, pf) in resumed.weights.param_layers().zip(full.weights.param_layers()) {
            assert_eq!(pr.weights.data(), pf.weights.data());
            assert_eq!(pr.adam_v.data(), pf.adam_v.data());
            assert_eq!(pr.step, pf.step);
        }
        // a fully-covered checkpoint cannot resume
        let done = resumed.weights;
        assert!(resume(&corpus, &cfg, done).is_err());
    }

    #[test]
    fn corpus_validation() {
        let cfg = tiny_config(1);
        assert!(train(&[], &cfg).is_err());
        let mut corpus = tiny_corpus(4, 64, 1);
        corpus.push(tiny_corpus(1, 32, 2).remove(0));
        assert!(train(&corpus, &cfg).is_err());
    }

    #[test]
    fn log_csv_has_expected_header_and_rows() {
        let corpus = tiny_corpus(6, 64, 23);
        let out = train(&corpus, &tiny_config(2)).unwrap();
        let csv = out.log.to_csv();
        assert!(csv.starts_with("epoch,train_loss,val_loss,mu_e,seconds\n"));
        assert_eq!(csv.lines().count(), 3);
    }

    #[test]
    fn evaluate_epoch_scores_gap_lengths() {
        let corpus = tiny_corpus(20, 64, 29);
        let cfg = tiny_config(1);
        let out = train(&corpus, &cfg).unwrap();
        let val: Vec<PoseClip> = out.val_indices.iter().map(|&i| corpus[i].clone()).collect();
        assert_eq!(val.len(), 2);
        let rows = evaluate_epoch(&out.weights, &out.stats, &val, &[0, 8]).unwrap();
        assert_eq!(rows.len(), 2);
        assert!(rows.iter().all(|r| r.report.mean.is_finite() && r.report.mean > 0.0));
        assert!(evaluate_epoch(&out.weights, &out.stats, &val, &[64]).is_err());
    }
}
