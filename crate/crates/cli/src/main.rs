//! `mofill` command-line front end.
//!
//! Exit codes: 0 success, 1 usage error, 2 data/model/IO error. All file
//! outputs are written atomically.

mod config;
mod svg;

use clap::{Parser, Subcommand};
use config::RunConfig;
use mofill::eval::{
    bench_csv, benchmark_inference, bone_csv, bone_length_stats, global_joint_error, joint_error,
    sweep_context, sweep_gaps, sweep_csv, ErrorReport, ErrorScope,
};
use mofill::mask::PerturbationSpec;
use mofill::model::io::{load_weights, save_weights};
use mofill::model::ModelWeights;
use mofill::motion::io::{read_clip, read_stats, write_atomic, write_clip, write_stats};
use mofill::motion::synth::{synth_generate_frames, MotionFamily};
use mofill::motion::{NormStats, PoseClip};
use mofill::tasks::{
    blend_tertiary, denoise, infill, linear_interp, recover_joints, vanilla_ae_config,
    BlendConstraint, GapSet,
};
use mofill::train::{train, TrainConfig};
use std::fmt;
use std::path::{Path, PathBuf};

#[derive(Debug)]
pub enum AppError {
    Usage(String),
    Data(String),
}

impl AppError {
    pub fn usage(msg: impl Into<String>) -> Self {
        AppError::Usage(msg.into())
    }
    pub fn data(msg: impl Into<String>) -> Self {
        AppError::Data(msg.into())
    }
}

impl fmt::Display for AppError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            AppError::Usage(m) | AppError::Data(m) => f.write_str(m),
        }
    }
}

impl From<mofill::Error> for AppError {
    fn from(e: mofill::Error) -> Self {
        AppError::Data(e.to_string())
    }
}

#[derive(Parser)]
#[command(name = "mofill", version, about = "Motion infilling over 69-row pose matrices")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Generate synthetic clips into a directory
    GenData {
        /// walk | run | wave | squat | idle | mixed
        #[arg(long)]
        family: String,
        #[arg(long)]
        count: usize,
        #[arg(long, default_value_t = 1)]
        seed: u64,
        #[arg(long)]
        out: PathBuf,
        #[arg(long, default_value_t = 240)]
        frames: usize,
        #[arg(long, default_value_t = 30)]
        fps: u32,
    },
    /// Train a model on a directory of clips
    Train {
        /// key=value config file; command-line flags override it
        #[arg(long)]
        config: Option<PathBuf>,
        #[arg(long)]
        data: Option<PathBuf>,
        /// Weight file to write; stats land next to it as <out>.stats
        #[arg(long)]
        out: Option<PathBuf>,
        #[arg(long)]
        epochs: Option<usize>,
        #[arg(long)]
        batch: Option<usize>,
        #[arg(long)]
        lr: Option<f64>,
        #[arg(long)]
        seed: Option<u64>,
        /// Disable the gap curriculum (use --fixed-gap instead)
        #[arg(long)]
        no_curriculum: bool,
        #[arg(long)]
        fixed_gap: Option<usize>,
        #[arg(long)]
        mix: Option<f64>,
        #[arg(long)]
        val_fraction: Option<f64>,
        #[arg(long)]
        checkpoint_every: Option<usize>,
        #[arg(long)]
        checkpoint_dir: Option<PathBuf>,
        /// Train the single-conv-per-unit ablation architecture
        #[arg(long)]
        vanilla: bool,
        #[arg(long)]
        stats: Option<PathBuf>,
    },
    /// Fill gaps in a clip
    Infill {
        #[arg(long)]
        clip: PathBuf,
        /// Gap as start:length; repeat for multiple gaps
        #[arg(long)]
        gap: Vec<String>,
        #[arg(long)]
        weights: PathBuf,
        #[arg(long)]
        stats: Option<PathBuf>,
        #[arg(long)]
        out: PathBuf,
        /// Keep original frames outside the gaps instead of the full reconstruction
        #[arg(long)]
        keep_known: bool,
        /// Write the linear-interpolation baseline here as well
        #[arg(long)]
        baseline_out: Option<PathBuf>,
    },
    /// Corrupt (or accept a corrupted clip) and reconstruct
    Denoise {
        #[arg(long)]
        clip: PathBuf,
        /// gaussian | frame-drop (omit with --pre-corrupted)
        #[arg(long)]
        kind: Option<String>,
        #[arg(long, default_value_t = 1.0)]
        sigma: f64,
        #[arg(long, default_value_t = 0.3)]
        p: f64,
        #[arg(long, default_value_t = 1)]
        seed: u64,
        /// Treat the input clip as already corrupted
        #[arg(long)]
        pre_corrupted: bool,
        #[arg(long)]
        weights: PathBuf,
        #[arg(long)]
        stats: Option<PathBuf>,
        #[arg(long)]
        out: PathBuf,
        /// Also write the corrupted input (the leave-at-mean baseline for frame drops)
        #[arg(long)]
        corrupted_out: Option<PathBuf>,
    },
    /// Reconstruct a clip with whole joints blanked
    Recover {
        #[arg(long)]
        clip: PathBuf,
        /// Comma-separated joint indices, 1–3 of them
        #[arg(long)]
        joints: String,
        #[arg(long)]
        weights: PathBuf,
        #[arg(long)]
        stats: Option<PathBuf>,
        #[arg(long)]
        out: PathBuf,
    },
    /// Infill with tertiary constraints pinned inside the gaps
    Blend {
        #[arg(long)]
        clip: PathBuf,
        #[arg(long)]
        gap: Vec<String>,
        /// joints=10,11,12;source=arm.csv;start=100;len=15 — repeatable
        #[arg(long)]
        constraint: Vec<String>,
        #[arg(long)]
        weights: PathBuf,
        #[arg(long)]
        stats: Option<PathBuf>,
        #[arg(long)]
        out: PathBuf,
    },
    /// Error reports: pred-vs-truth, bone lengths, or model sweeps
    Eval {
        #[arg(long)]
        pred: Option<PathBuf>,
        #[arg(long)]
        truth: Option<PathBuf>,
        #[arg(long)]
        gap: Vec<String>,
        /// full | gap
        #[arg(long, default_value = "full")]
        scope: String,
        /// Integrate trajectories and compare in world space as well
        #[arg(long)]
        global: bool,
        /// Bone-length statistics of --pred (file or directory)
        #[arg(long)]
        bones: bool,
        #[arg(long)]
        weights: Option<PathBuf>,
        #[arg(long)]
        stats: Option<PathBuf>,
        /// Clip directory for sweeps
        #[arg(long)]
        data: Option<PathBuf>,
        /// Comma-separated gap sizes, e.g. 5,20,80,250
        #[arg(long)]
        sweep_gaps: Option<String>,
        /// Comma-separated context lengths, e.g. 1,5,10,25,50
        #[arg(long)]
        sweep_contexts: Option<String>,
        /// Gap size for the context sweep
        #[arg(long, default_value_t = 80)]
        context_gap: usize,
        /// Write CSV here instead of stdout
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Time forward passes per clip length
    Bench {
        #[arg(long)]
        weights: PathBuf,
        /// Comma-separated frame counts, e.g. 240,480,1927
        #[arg(long, default_value = "240,480,1927")]
        lengths: String,
        #[arg(long, default_value_t = 5)]
        runs: usize,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Render a clip as a stick-figure strip
    ExportSvg {
        #[arg(long)]
        clip: PathBuf,
        #[arg(long)]
        gap: Vec<String>,
        #[arg(long, default_value_t = 10)]
        stride: usize,
        #[arg(long)]
        out: PathBuf,
    },
}

fn main() {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            use clap::error::ErrorKind;
            let code = match e.kind() {
                ErrorKind::DisplayHelp | ErrorKind::DisplayVersion => 0,
                _ => 1,
            };
            let _ = e.print();
            std::process::exit(code);
        }
    };
    match run(cli) {
        Ok(()) => {}
        Err(AppError::Usage(msg)) => {
            eprintln!("usage error: {msg}");
            std::process::exit(1);
        }
        Err(AppError::Data(msg)) => {
            eprintln!("error: {msg}");
            std::process::exit(2);
        }
    }
}

fn init_threads() -> Result<(), AppError> {
    if let Ok(raw) = std::env::var("MOFILL_THREADS") {
        let n: usize = raw
            .parse()
            .ok()
            .filter(|&n| n >= 1)
            .ok_or_else(|| AppError::usage(format!("MOFILL_THREADS must be a positive integer, got `{raw}`")))?;
        // a second build_global in one process is a no-op; ignore that case
        let _ = rayon::ThreadPoolBuilder::new().num_threads(n).build_global();
    }
    Ok(())
}

// ── shared plumbing ──────────────────────────────────────────────────────────

fn load_clip_file(path: &Path) -> Result<PoseClip, AppError> {
    read_clip(path).map_err(|e| AppError::data(format!("{}: {e}", path.display())))
}

fn load_weights_file(path: &Path) -> Result<ModelWeights<f32>, AppError> {
    load_weights(path).map_err(|e| AppError::data(format!("{}: {e}", path.display())))
}

fn default_stats_path(weights: &Path) -> PathBuf {
    PathBuf::from(format!("{}.stats", weights.display()))
}

fn load_stats_file(weights: &Path, explicit: Option<&PathBuf>) -> Result<NormStats, AppError> {
    let path = explicit
        .cloned()
        .unwrap_or_else(|| default_stats_path(weights));
    read_stats(&path).map_err(|e| AppError::data(format!("{}: {e}", path.display())))
}

fn load_clip_dir(dir: &Path) -> Result<Vec<PoseClip>, AppError> {
    let entries =
        std::fs::read_dir(dir).map_err(|e| AppError::data(format!("{}: {e}", dir.display())))?;
    let mut paths: Vec<PathBuf> = entries
        .filter_map(|e| e.ok().map(|e| e.path()))
        .filter(|p| p.extension().is_some_and(|x| x == "csv"))
        .collect();
    paths.sort();
    if paths.is_empty() {
        return Err(AppError::data(format!(
            "{}: no .csv clips found",
            dir.display()
        )));
    }
    paths.iter().map(|p| load_clip_file(p)).collect()
}

fn parse_gaps(specs: &[String], frames: usize) -> Result<GapSet, AppError> {
    let mut pairs = Vec::with_capacity(specs.len());
    for s in specs {
        let (a, b) = s
            .split_once(':')
            .ok_or_else(|| AppError::usage(format!("gap `{s}` is not start:length")))?;
        let start = a.trim().parse().map_err(|_| {
            AppError::usage(format!("gap `{s}`: bad start `{a}`"))
        })?;
        let len = b.trim().parse().map_err(|_| {
            AppError::usage(format!("gap `{s}`: bad length `{b}`"))
        })?;
        pairs.push((start, len));
    }
    GapSet::new(pairs, frames).map_err(|e| AppError::usage(e.to_string()))
}

fn parse_usize_list(raw: &str, what: &str) -> Result<Vec<usize>, AppError> {
    raw.split(',')
        .map(|s| {
            s.trim()
                .parse()
                .map_err(|_| AppError::usage(format!("{what}: bad entry `{s}`")))
        })
        .collect()
}

fn emit(text: &str, out: Option<&PathBuf>) -> Result<(), AppError> {
    match out {
        None => {
            print!("{text}");
            Ok(())
        }
        Some(path) => {
            write_atomic(path, text.as_bytes())
                .map_err(|e| AppError::data(format!("{}: {e}", path.display())))
        }
    }
}

fn save_clip(clip: &PoseClip, path: &Path) -> Result<(), AppError> {
    write_clip(clip, path).map_err(|e| AppError::data(format!("{}: {e}", path.display())))
}

fn report_csv(report: &ErrorReport, label: &str) -> String {
    format!(
        "scope,mean_cm,std_cm,frames\n{label},{:.6},{:.6},{}\n",
        report.mean, report.std, report.frames
    )
}

// ── command bodies ───────────────────────────────────────────────────────────

fn run(cli: Cli) -> Result<(), AppError> {
    init_threads()?;
    match cli.command {
        Command::GenData { family, count, seed, out, frames, fps } => {
            let family: MotionFamily = family
                .parse()
                .map_err(|e: mofill::Error| AppError::usage(e.to_string()))?;
            let clips = synth_generate_frames(family, count, frames, fps, seed)?;
            std::fs::create_dir_all(&out)
                .map_err(|e| AppError::data(format!("{}: {e}", out.display())))?;
            for (i, clip) in clips.iter().enumerate() {
                save_clip(clip, &out.join(format!("{family}_{i:04}.csv")))?;
            }
            println!("wrote {count} {family} clips ({frames} frames) to {}", out.display());
            Ok(())
        }

        Command::Train {
            config, data, out, epochs, batch, lr, seed, no_curriculum, fixed_gap,
            mix, val_fraction, checkpoint_every, checkpoint_dir, vanilla, stats,
        } => {
            let file = match &config {
                Some(path) => RunConfig::load(path)?,
                None => RunConfig::default(),
            };
            let mut cfg = TrainConfig::default();
            if let Some(v) = file.usize_key("epochs")? { cfg.epochs = v; }
            if let Some(v) = file.usize_key("batch_size")? { cfg.batch_size = v; }
            if let Some(v) = file.f64_key("learning_rate")? { cfg.optim.learning_rate = v; }
            if let Some(v) = file.u64_key("seed")? { cfg.seed = v; }
            if let Some(v) = file.bool_key("curriculum")? { cfg.curriculum = v; }
            if let Some(v) = file.usize_key("fixed_gap")? { cfg.fixed_gap = v; }
            if let Some(v) = file.f64_key("mix_ratio")? { cfg.mix_ratio = v; }
            if let Some(v) = file.f64_key("validation_fraction")? { cfg.validation_fraction = v; }
            if let Some(v) = file.usize_key("checkpoint_every")? { cfg.checkpoint_every = v; }
            if let Some(v) = file.path_key("checkpoint_dir") { cfg.checkpoint_dir = Some(v); }
            if let Some(v) = file.arch_key()? { cfg.model.arch = v; }

            if let Some(v) = epochs { cfg.epochs = v; }
            if let Some(v) = batch { cfg.batch_size = v; }
            if let Some(v) = lr { cfg.optim.learning_rate = v; }
            if let Some(v) = seed { cfg.seed = v; }
            if no_curriculum { cfg.curriculum = false; }
            if let Some(v) = fixed_gap { cfg.fixed_gap = v; }
            if let Some(v) = mix { cfg.mix_ratio = v; }
            if let Some(v) = val_fraction { cfg.validation_fraction = v; }
            if let Some(v) = checkpoint_every { cfg.checkpoint_every = v; }
            if let Some(v) = checkpoint_dir { cfg.checkpoint_dir = Some(v); }
            if vanilla { cfg.model = vanilla_ae_config(); }
            cfg.validate().map_err(|e| AppError::usage(e.to_string()))?;

            let data = data
                .or_else(|| file.path_key("data"))
                .ok_or_else(|| AppError::usage("train needs --data (or data= in the config)"))?;
            let out = out
                .or_else(|| file.path_key("out"))
                .ok_or_else(|| AppError::usage("train needs --out (or out= in the config)"))?;
            let stats_path = stats
                .or_else(|| file.path_key("stats"))
                .unwrap_or_else(|| default_stats_path(&out));

            let corpus = load_clip_dir(&data)?;
            println!(
                "training on {} clips for {} epochs (batch {}, seed {})",
                corpus.len(),
                cfg.epochs,
                cfg.batch_size,
                cfg.seed
            );
            let outcome = train(&corpus, &cfg)?;
            save_weights(&outcome.weights, &out)?;
            write_stats(&outcome.stats, &stats_path)?;
            let log_path = PathBuf::from(format!("{}.log.csv", out.display()));
            write_atomic(&log_path, outcome.log.to_csv().as_bytes())?;
            let last = outcome.log.records.last().unwrap();
            println!(
                "done: train_loss {:.6}, val_loss {:.6}; weights {}, stats {}, log {}",
                last.train_loss,
                last.val_loss,
                out.display(),
                stats_path.display(),
                log_path.display()
            );
            Ok(())
        }

        Command::Infill { clip, gap, weights, stats, out, keep_known, baseline_out } => {
            let clip_data = load_clip_file(&clip)?;
            let gaps = parse_gaps(&gap, clip_data.frames())?;
            let w = load_weights_file(&weights)?;
            let s = load_stats_file(&weights, stats.as_ref())?;
            let result = infill(&clip_data, &gaps, &w, &s, keep_known)?;
            save_clip(&result, &out)?;
            if let Some(bpath) = baseline_out {
                let baseline = linear_interp(&clip_data, &gaps)?;
                save_clip(&baseline, &bpath)?;
            }
            Ok(())
        }

        Command::Denoise {
            clip, kind, sigma, p, seed, pre_corrupted, weights, stats, out, corrupted_out,
        } => {
            if pre_corrupted && kind.is_some() {
                return Err(AppError::usage(
                    "--pre-corrupted and --kind are mutually exclusive",
                ));
            }
            let spec = if pre_corrupted {
                None
            } else {
                let kind = kind.ok_or_else(|| {
                    AppError::usage("denoise needs --kind gaussian|frame-drop (or --pre-corrupted)")
                })?;
                Some(match kind.as_str() {
                    "gaussian" => PerturbationSpec::Gaussian { sigma },
                    "frame-drop" => PerturbationSpec::FrameDrop { p },
                    other => {
                        return Err(AppError::usage(format!(
                            "unknown noise kind `{other}` (gaussian, frame-drop)"
                        )))
                    }
                })
            };
            let clip_data = load_clip_file(&clip)?;
            let w = load_weights_file(&weights)?;
            let s = load_stats_file(&weights, stats.as_ref())?;
            let result = denoise(&clip_data, spec.as_ref().map(|sp| (sp, seed)), &w, &s)?;
            save_clip(&result.recovered, &out)?;
            if let Some(cpath) = corrupted_out {
                save_clip(&result.corrupted, &cpath)?;
            }
            Ok(())
        }

        Command::Recover { clip, joints, weights, stats, out } => {
            let joints = parse_usize_list(&joints, "--joints")?;
            let clip_data = load_clip_file(&clip)?;
            let w = load_weights_file(&weights)?;
            let s = load_stats_file(&weights, stats.as_ref())?;
            let result = recover_joints(&clip_data, &joints, &w, &s)
                .map_err(|e| AppError::usage(e.to_string()))?;
            save_clip(&result, &out)
        }

        Command::Blend { clip, gap, constraint, weights, stats, out } => {
            let clip_data = load_clip_file(&clip)?;
            let gaps = parse_gaps(&gap, clip_data.frames())?;
            let constraints = constraint
                .iter()
                .map(|raw| parse_constraint(raw))
                .collect::<Result<Vec<_>, _>>()?;
            let w = load_weights_file(&weights)?;
            let s = load_stats_file(&weights, stats.as_ref())?;
            let result = blend_tertiary(&clip_data, &gaps, &constraints, &w, &s)?;
            save_clip(&result, &out)
        }

        Command::Eval {
            pred, truth, gap, scope, global, bones, weights, stats, data,
            sweep_gaps: sweep_gap_list, sweep_contexts, context_gap, out,
        } => {
            let sweeping = sweep_gap_list.is_some() || sweep_contexts.is_some();
            let modes = [truth.is_some(), bones, sweeping];
            if modes.iter().filter(|&&m| m).count() != 1 {
                return Err(AppError::usage(
                    "eval wants exactly one of: --pred+--truth, --bones, or a sweep",
                ));
            }

            if bones {
                let pred = pred.ok_or_else(|| AppError::usage("--bones needs --pred"))?;
                let clips = if pred.is_dir() {
                    load_clip_dir(&pred)?
                } else {
                    vec![load_clip_file(&pred)?]
                };
                let rig = clips[0].skeleton.clone();
                let rows = bone_length_stats(&clips, &rig)?;
                return emit(&bone_csv(&rows), out.as_ref());
            }

            if sweeping {
                let weights = weights.ok_or_else(|| AppError::usage("sweeps need --weights"))?;
                let data = data.ok_or_else(|| AppError::usage("sweeps need --data"))?;
                let w = load_weights_file(&weights)?;
                let s = load_stats_file(&weights, stats.as_ref())?;
                let clips = load_clip_dir(&data)?;
                let mut text = String::new();
                if let Some(raw) = sweep_gap_list {
                    let sizes = parse_usize_list(&raw, "--sweep-gaps")?;
                    let rows = sweep_gaps(&w, &s, &clips, &sizes)?;
                    text.push_str(&sweep_csv("gap", &rows));
                }
                if let Some(raw) = sweep_contexts {
                    let contexts = parse_usize_list(&raw, "--sweep-contexts")?;
                    let rows = sweep_context(&w, &s, &clips, &contexts, context_gap)?;
                    text.push_str(&sweep_csv("context", &rows));
                }
                return emit(&text, out.as_ref());
            }

            let pred = pred.ok_or_else(|| AppError::usage("eval needs --pred"))?;
            let truth = truth.unwrap();
            let pred_clip = load_clip_file(&pred)?;
            let truth_clip = load_clip_file(&truth)?;
            let report = match scope.as_str() {
                "full" => joint_error(&pred_clip, &truth_clip, ErrorScope::Full, None)?,
                "gap" => {
                    if gap.is_empty() {
                        return Err(AppError::usage("--scope gap needs at least one --gap"));
                    }
                    let gaps = parse_gaps(&gap, truth_clip.frames())?;
                    joint_error(&pred_clip, &truth_clip, ErrorScope::GapOnly, Some(&gaps))?
                }
                other => {
                    return Err(AppError::usage(format!(
                        "unknown scope `{other}` (full, gap)"
                    )))
                }
            };
            let mut text = report_csv(&report, &scope);
            if global {
                let g = global_joint_error(&pred_clip, &truth_clip)?;
                text.push_str(&format!("global,{:.6},{:.6},{}\n", g.mean, g.std, g.frames));
            }
            emit(&text, out.as_ref())
        }

        Command::Bench { weights, lengths, runs, out } => {
            let lengths = parse_usize_list(&lengths, "--lengths")?;
            let w = load_weights_file(&weights)?;
            let rows = benchmark_inference(&w, &lengths, runs)?;
            emit(&bench_csv(&rows), out.as_ref())
        }

        Command::ExportSvg { clip, gap, stride, out } => {
            let clip_data = load_clip_file(&clip)?;
            let gaps = parse_gaps(&gap, clip_data.frames())?;
            let text = svg::render_clip_svg(&clip_data, &gaps, stride)?;
            write_atomic(&out, text.as_bytes())
                .map_err(|e| AppError::data(format!("{}: {e}", out.display())))
        }
    }
}

/// `joints=10,11,12;source=arm.csv;start=100;len=15`
fn parse_constraint(raw: &str) -> Result<BlendConstraint, AppError> {
    let (mut joints, mut source, mut start, mut len) = (None, None, None, None);
    for part in raw.split(';') {
        let (key, value) = part
            .split_once('=')
            .ok_or_else(|| AppError::usage(format!("constraint part `{part}` is not key=value")))?;
        match key.trim() {
            "joints" => joints = Some(parse_usize_list(value, "constraint joints")?),
            "source" => source = Some(PathBuf::from(value.trim())),
            "start" => {
                start = Some(value.trim().parse::<usize>().map_err(|_| {
                    AppError::usage(format!("constraint start `{value}` is not a frame index"))
                })?)
            }
            "len" => {
                len = Some(value.trim().parse::<usize>().map_err(|_| {
                    AppError::usage(format!("constraint len `{value}` is not a frame count"))
                })?)
            }
            other => {
                return Err(AppError::usage(format!(
                    "unknown constraint key `{other}` (joints, source, start, len)"
                )))
            }
        }
    }
    let source = source.ok_or_else(|| AppError::usage("constraint needs source=<clip>"))?;
    Ok(BlendConstraint {
        joints: joints.ok_or_else(|| AppError::usage("constraint needs joints=..."))?,
        source: load_clip_file(&source)?,
        start: start.ok_or_else(|| AppError::usage("constraint needs start=..."))?,
        len: len.ok_or_else(|| AppError::usage("constraint needs len=..."))?,
    })
}
