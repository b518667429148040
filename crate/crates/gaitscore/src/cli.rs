//! Command-line surface: `track`, `train`, `evaluate`, `score`, `synth`,
//! and `gradcheck`.
//!
//! Configuration precedence is command-line flags, then keys from the
//! `--config` TOML file, then built-in defaults. Every command is
//! deterministic given its configuration and seed, and all file writes are
//! atomic (write-then-rename). Set `GAITSCORE_LOG=info` (or `debug`) for
//! progress output.

use crate::error::{GaitError, Result};
use crate::eval::{
    self, confusion_csv, loocv, metrics, prepare_exam, render_kv, render_table, EvalReport,
    LoocvConfig, PrepConfig,
};
use crate::losses::{LossConfig, LossMode};
use crate::net::{
    gradient_check, load_checkpoint, save_checkpoint, train, GradCheckReport, ModelSpec, NetInput,
    TrainConfig,
};
use crate::pose::{
    self, atomic_write, read_pose_file, write_pose_file, PoseFile, DEFAULT_LAYOUT,
};
use crate::rng;
use crate::tracker::{read_detections, select_participant, track_frames, write_tracks, TrackerConfig};
use clap::{Parser, Subcommand};
use rand_chacha::rand_core::RngCore;
use serde::Deserialize;
use std::path::{Path, PathBuf};

#[derive(Parser, Debug)]
#[command(name = "gaitscore", version, about = "Gait severity scoring from 3D skeleton sequences")]
pub struct Cli {
    /// TOML config file; flags override its keys.
    #[arg(long, global = true)]
    pub config: Option<PathBuf>,
    /// Master seed; required for train, evaluate, and synth.
    #[arg(long, global = true)]
    pub seed: Option<u64>,
    /// Clip window length in frames.
    #[arg(long, global = true)]
    pub window: Option<usize>,
    /// Training epochs.
    #[arg(long, global = true)]
    pub epochs: Option<usize>,
    /// Mini-batch size.
    #[arg(long, global = true)]
    pub batch: Option<usize>,
    /// Filters per embedding branch.
    #[arg(long, global = true)]
    pub filters: Option<usize>,
    /// Training objective: ce, focal, ordinal, or focal+ordinal.
    #[arg(long, global = true)]
    pub loss: Option<String>,
    /// Ordinal term weight.
    #[arg(long, global = true)]
    pub lambda: Option<f64>,
    /// Focal weighting factor.
    #[arg(long, global = true)]
    pub alpha: Option<f64>,
    /// Focal focusing parameter.
    #[arg(long, global = true)]
    pub gamma: Option<f64>,
    /// Parallel fold workers for evaluate.
    #[arg(long, global = true)]
    pub workers: Option<usize>,
    /// Output path (file or directory, command dependent).
    #[arg(long, global = true)]
    pub out: Option<PathBuf>,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Subcommand, Debug)]
pub enum Command {
    /// Track the participant through a bounding-box detections file.
    Track {
        detections: PathBuf,
        #[arg(long)]
        iou_min: Option<f64>,
        #[arg(long)]
        max_age: Option<usize>,
        #[arg(long)]
        min_hits: Option<usize>,
    },
    /// Train a classifier on labeled pose files (files or directories).
    Train { inputs: Vec<PathBuf> },
    /// Leave-one-out cross-validation over labeled pose files.
    Evaluate { inputs: Vec<PathBuf> },
    /// Score one exam with a trained checkpoint.
    Score {
        exam: PathBuf,
        #[arg(long)]
        ckpt: PathBuf,
    },
    /// Generate a synthetic labeled dataset.
    Synth {
        /// Exams per severity class.
        #[arg(long, default_value_t = 10)]
        per_class: usize,
        /// Frames per exam.
        #[arg(long, default_value_t = 250)]
        duration: usize,
    },
    /// Verify training gradients against finite differences.
    Gradcheck,
}

/// Keys accepted in the `--config` TOML file. Every key mirrors a flag.
#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
struct FileConfig {
    seed: Option<u64>,
    window: Option<usize>,
    min_tail: Option<usize>,
    epochs: Option<usize>,
    batch: Option<usize>,
    filters: Option<usize>,
    loss: Option<String>,
    lambda: Option<f64>,
    alpha: Option<f64>,
    gamma: Option<f64>,
    workers: Option<usize>,
    lr_start: Option<f64>,
    lr_end: Option<f64>,
    iou_min: Option<f64>,
    max_age: Option<usize>,
    min_hits: Option<usize>,
    crops_per_exam: Option<usize>,
    crop_fraction: Option<f64>,
}

/// Fully resolved configuration (flags over file keys over defaults).
#[derive(Debug, Clone)]
pub struct RunConfig {
    pub seed: Option<u64>,
    pub window: usize,
    pub min_tail: usize,
    pub epochs: usize,
    pub batch: usize,
    pub filters: usize,
    pub loss_mode: LossMode,
    pub loss: LossConfig,
    pub lr_start: f64,
    pub lr_end: f64,
    pub workers: usize,
    pub tracker: TrackerConfig,
    pub crops_per_exam: usize,
    pub crop_fraction: f64,
    pub out: Option<PathBuf>,
}

impl RunConfig {
    fn resolve(cli: &Cli) -> Result<RunConfig> {
        let file: FileConfig = match &cli.config {
            Some(path) => {
                let text = std::fs::read_to_string(path).map_err(|e| {
                    GaitError::InvalidInput(format!("config {}: {}", path.display(), e))
                })?;
                toml::from_str(&text)
                    .map_err(|e| GaitError::InvalidInput(format!("config: {}", e)))?
            }
            None => FileConfig::default(),
        };

        let loss_name = cli
            .loss
            .clone()
            .or(file.loss)
            .unwrap_or_else(|| "focal+ordinal".to_string());
        let loss_mode: LossMode = loss_name.parse()?;

        let defaults_prep = PrepConfig::default();
        let cfg = RunConfig {
            seed: cli.seed.or(file.seed),
            window: cli.window.or(file.window).unwrap_or(defaults_prep.window),
            min_tail: file.min_tail.unwrap_or(defaults_prep.min_tail),
            epochs: cli.epochs.or(file.epochs).unwrap_or(600),
            batch: cli.batch.or(file.batch).unwrap_or(64),
            filters: cli
                .filters
                .or(file.filters)
                .unwrap_or(crate::net::DEFAULT_FILTERS),
            loss_mode,
            loss: LossConfig {
                alpha: cli.alpha.or(file.alpha).unwrap_or(0.25),
                gamma: cli.gamma.or(file.gamma).unwrap_or(2.0),
                lambda: cli.lambda.or(file.lambda).unwrap_or(1.0),
                n_classes: crate::NUM_CLASSES,
            },
            lr_start: file.lr_start.unwrap_or(1e-3),
            lr_end: file.lr_end.unwrap_or(1e-6),
            workers: cli.workers.or(file.workers).unwrap_or(1),
            tracker: TrackerConfig {
                iou_min: file.iou_min.unwrap_or(0.3),
                max_age: file.max_age.unwrap_or(5),
                min_hits: file.min_hits.unwrap_or(3),
            },
            crops_per_exam: file.crops_per_exam.unwrap_or(defaults_prep.crops_per_exam),
            crop_fraction: file.crop_fraction.unwrap_or(defaults_prep.crop_fraction),
            out: cli.out.clone(),
        };
        Ok(cfg)
    }

    fn require_seed(&self, command: &str) -> Result<u64> {
        self.seed.ok_or_else(|| {
            GaitError::InvalidInput(format!("--seed is required for {}", command))
        })
    }

    fn prep(&self) -> PrepConfig {
        PrepConfig {
            window: self.window,
            min_tail: self.min_tail,
            crops_per_exam: self.crops_per_exam,
            crop_fraction: self.crop_fraction,
            sparse_classes: PrepConfig::default().sparse_classes,
        }
    }

    fn train_config(&self, seed: u64) -> TrainConfig {
        TrainConfig {
            epochs: self.epochs,
            batch_size: self.batch,
            lr_start: self.lr_start,
            lr_end: self.lr_end,
            seed,
            loss_mode: self.loss_mode,
            loss: self.loss,
        }
    }
}

/// Entry point used by the binary.
pub fn run(cli: Cli) -> Result<()> {
    let cfg = RunConfig::resolve(&cli)?;
    match &cli.command {
        Command::Track {
            detections,
            iou_min,
            max_age,
            min_hits,
        } => {
            let tracker_cfg = TrackerConfig {
                iou_min: iou_min.unwrap_or(cfg.tracker.iou_min),
                max_age: max_age.unwrap_or(cfg.tracker.max_age),
                min_hits: min_hits.unwrap_or(cfg.tracker.min_hits),
            };
            let out = cfg
                .out
                .clone()
                .unwrap_or_else(|| detections.with_extension("tracks.csv"));
            let id = cmd_track(detections, &out, &tracker_cfg)?;
            println!("participant track {}", id);
            println!("tracks written to {}", out.display());
        }
        Command::Train { inputs } => {
            let seed = cfg.require_seed("train")?;
            let out = cfg.out.clone().unwrap_or_else(|| PathBuf::from("model.ckpt"));
            let history = cmd_train(inputs, &out, seed, &cfg)?;
            println!(
                "trained for {} epochs (final mean loss {:.6}); checkpoint at {}",
                history.len(),
                history.last().copied().unwrap_or(f64::NAN),
                out.display()
            );
        }
        Command::Evaluate { inputs } => {
            let seed = cfg.require_seed("evaluate")?;
            let out_dir = cfg.out.clone().unwrap_or_else(|| PathBuf::from("."));
            let report = cmd_evaluate(inputs, &out_dir, seed, &cfg)?;
            print!("{}", render_table(&report));
            println!("reports written to {}", out_dir.display());
        }
        Command::Score { exam, ckpt } => {
            let (label, probs) = cmd_score(exam, ckpt, &cfg)?;
            println!("score {}", label);
            println!(
                "probabilities {}",
                probs
                    .iter()
                    .map(|p| format!("{:.4}", p))
                    .collect::<Vec<_>>()
                    .join(" ")
            );
        }
        Command::Synth {
            per_class,
            duration,
        } => {
            let seed = cfg.require_seed("synth")?;
            let out_dir = cfg.out.clone().unwrap_or_else(|| PathBuf::from("synth"));
            let files = cmd_synth(*per_class, *duration, seed, &out_dir)?;
            println!("wrote {} exams to {}", files.len(), out_dir.display());
        }
        Command::Gradcheck => {
            let report = cmd_gradcheck(cfg.seed.unwrap_or(1))?;
            print!("{}", format_gradcheck(&report));
            if !report.pass {
                return Err(GaitError::InvalidInput(
                    "gradient check failed".into(),
                ));
            }
        }
    }
    Ok(())
}

/// Runs the tracker over a detections file, writes the track file, and
/// returns the selected participant's track id.
pub fn cmd_track(detections: &Path, out: &Path, cfg: &TrackerConfig) -> Result<u64> {
    let frames = read_detections(detections)?;
    if frames.iter().all(|f| f.is_empty()) {
        return Err(GaitError::NoDetections);
    }
    let tracks = track_frames(&frames, cfg)?;
    let participant = select_participant(&tracks, frames.len())?;
    let id = participant.id;
    write_tracks(out, &tracks)?;
    Ok(id)
}

fn collect_pose_paths(inputs: &[PathBuf]) -> Result<Vec<PathBuf>> {
    let mut paths = Vec::new();
    for input in inputs {
        if input.is_dir() {
            let mut entries: Vec<PathBuf> = std::fs::read_dir(input)?
                .filter_map(|e| e.ok())
                .map(|e| e.path())
                .filter(|p| p.extension().is_some_and(|ext| ext == "pose"))
                .collect();
            entries.sort();
            paths.extend(entries);
        } else if input.exists() {
            paths.push(input.clone());
        } else {
            return Err(GaitError::InvalidInput(format!(
                "input {} does not exist",
                input.display()
            )));
        }
    }
    if paths.is_empty() {
        return Err(GaitError::InvalidInput("no pose files found".into()));
    }
    Ok(paths)
}

fn load_exams(inputs: &[PathBuf]) -> Result<Vec<PoseFile>> {
    collect_pose_paths(inputs)?
        .iter()
        .map(|p| {
            read_pose_file(p).map_err(|e| {
                GaitError::InvalidInput(format!("{}: {}", p.display(), e))
            })
        })
        .collect()
}

/// Trains one model on every labeled exam and writes a checkpoint.
/// Returns the per-epoch loss history.
pub fn cmd_train(inputs: &[PathBuf], out: &Path, seed: u64, cfg: &RunConfig) -> Result<Vec<f64>> {
    let exams = load_exams(inputs)?;
    let n_joints = exams[0].layout.n_joints;
    for f in &exams {
        if f.seq.label.is_none() {
            return Err(GaitError::InvalidInput(format!(
                "exam {} is missing a label",
                f.seq.subject_id
            )));
        }
        if f.layout.n_joints != n_joints {
            return Err(GaitError::shape(
                format!("exam {}", f.seq.subject_id),
                format!("{} joints", n_joints),
                format!("{} joints", f.layout.n_joints),
            ));
        }
    }

    let prep = cfg.prep();
    let mut prepared = Vec::with_capacity(exams.len());
    for (i, f) in exams.iter().enumerate() {
        let crop_seed = rng::stream(seed, "crop_seed", i as u64).next_u64();
        prepared.push(prepare_exam(f, &prep, crop_seed)?);
    }
    let mut items: Vec<(&NetInput, usize)> = Vec::new();
    for exam in &prepared {
        let label = exam.label.expect("checked above") as usize;
        for input in exam.clips.iter().chain(&exam.crops) {
            items.push((input, label));
        }
    }
    log::info!(
        "training on {} clips from {} exams",
        items.len(),
        exams.len()
    );

    let spec = ModelSpec::new(n_joints, cfg.filters);
    let outcome = train(&items, &spec, &cfg.train_config(seed))?;
    for (e, loss) in outcome.loss_history.iter().enumerate() {
        log::debug!("epoch {:>4} mean loss {:.6}", e, loss);
    }
    save_checkpoint(out, &outcome.model, None)?;
    Ok(outcome.loss_history)
}

/// Leave-one-out evaluation; writes `report.txt`, `report.kv`,
/// `confusion.csv`, and `predictions.csv` into `out_dir`.
pub fn cmd_evaluate(
    inputs: &[PathBuf],
    out_dir: &Path,
    seed: u64,
    cfg: &RunConfig,
) -> Result<EvalReport> {
    let exams = load_exams(inputs)?;
    let loocv_cfg = LoocvConfig {
        prep: cfg.prep(),
        filters: cfg.filters,
        train: cfg.train_config(seed),
        workers: cfg.workers,
    };
    let folds = loocv(&exams, &loocv_cfg)?;
    let report = metrics(&folds);

    std::fs::create_dir_all(out_dir)?;
    atomic_write(&out_dir.join("report.txt"), render_table(&report).as_bytes())?;
    atomic_write(&out_dir.join("report.kv"), render_kv(&report).as_bytes())?;
    atomic_write(
        &out_dir.join("confusion.csv"),
        confusion_csv(&report).as_bytes(),
    )?;

    // per-exam predictions, for paired statistical comparisons
    let mut pred = String::from("subject,true,predicted,p0,p1,p2,p3\n");
    for f in &folds {
        pred.push_str(&format!(
            "{},{},{},{:.6},{:.6},{:.6},{:.6}\n",
            f.subject_id,
            f.true_label,
            f.predicted,
            f.exam_prob[0],
            f.exam_prob[1],
            f.exam_prob[2],
            f.exam_prob[3]
        ));
    }
    atomic_write(&out_dir.join("predictions.csv"), pred.as_bytes())?;

    Ok(report)
}

/// Scores a single exam with a trained checkpoint: predicted class plus
/// the exam-level probability vector.
pub fn cmd_score(exam: &Path, ckpt: &Path, cfg: &RunConfig) -> Result<(usize, Vec<f64>)> {
    let checkpoint = load_checkpoint(ckpt)?;
    let file = read_pose_file(exam)?;
    if file.layout.n_joints != checkpoint.model.spec.n_joints {
        return Err(GaitError::shape(
            "exam joints",
            checkpoint.model.spec.n_joints,
            file.layout.n_joints,
        ));
    }
    let prep = PrepConfig {
        crops_per_exam: 0,
        ..cfg.prep()
    };
    let prepared = prepare_exam(&file, &prep, 0)?;
    let clip_probs: Vec<Vec<f64>> = prepared
        .clips
        .iter()
        .map(|input| checkpoint.model.forward(input).map(|f| f.probs))
        .collect::<Result<_>>()?;
    let (label, probs) = eval::vote(&clip_probs)?;
    Ok((label, probs))
}

/// Generates `per_class` synthetic exams for each severity class and
/// writes them as pose files. Returns the written paths.
pub fn cmd_synth(
    per_class: usize,
    duration: usize,
    seed: u64,
    out_dir: &Path,
) -> Result<Vec<PathBuf>> {
    if per_class == 0 {
        return Err(GaitError::InvalidInput("per_class must be >= 1".into()));
    }
    std::fs::create_dir_all(out_dir)?;
    let mut written = Vec::new();
    for class in 0..crate::NUM_CLASSES as u8 {
        for idx in 0..per_class {
            let subject_seed =
                rng::stream(seed, "synth_subject", ((class as u64) << 32) | idx as u64).next_u64();
            let mut seq = pose::synth_gait(class, &DEFAULT_LAYOUT, duration, subject_seed)?;
            seq.subject_id = format!("c{}s{:03}", class, idx);
            let path = out_dir.join(format!("c{}_{:03}.pose", class, idx));
            write_pose_file(&path, &seq, &DEFAULT_LAYOUT)?;
            written.push(path);
        }
    }
    Ok(written)
}

/// Finite-difference gradient verification on the reference tiny model.
pub fn cmd_gradcheck(seed: u64) -> Result<GradCheckReport> {
    gradient_check(&ModelSpec::new(6, 4), 16, seed, 1e-4, 1e-4)
}

fn format_gradcheck(report: &GradCheckReport) -> String {
    let mut out = String::new();
    for t in &report.tensors {
        out.push_str(&format!(
            "{:<16} {:>6} params  max rel err {:.3e}  {}\n",
            t.name,
            t.checked,
            t.max_rel,
            if t.max_rel <= report.tolerance {
                "ok"
            } else {
                "FAIL"
            }
        ));
    }
    out.push_str(&format!(
        "gradient check {} (worst {:.3e}, tolerance {:.1e}, step {:.1e})\n",
        if report.pass { "PASS" } else { "FAIL" },
        report.max_rel(),
        report.tolerance,
        report.step
    ));
    out
}
