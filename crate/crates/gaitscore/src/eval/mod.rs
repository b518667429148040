//! Participant-level leave-one-out evaluation.
//!
//! Every exam becomes one fold: its clips and crops are excluded from that
//! fold's training set as a whole, a fresh model is trained on everything
//! else, and the held-out exam is scored by majority vote over its clips.
//! Metrics follow the usual per-class / macro-average conventions; AUC is
//! rank-based one-vs-rest pooled across folds.

mod report;
mod wilcoxon;

pub use report::{confusion_csv, render_kv, render_table};
pub use wilcoxon::{
    wilcoxon_signed_rank, wilcoxon_signed_rank_mode, WilcoxonMode, WilcoxonResult, EXACT_LIMIT,
};

use crate::error::{GaitError, Result};
use crate::features;
use crate::losses::argmax;
use crate::net::{train, ModelSpec, NetInput, TrainConfig};
use crate::pose::{augment_crops, clip_sequence, normalize_center, PoseFile};
use crate::rng;
use crate::NUM_CLASSES;
use rand_chacha::rand_core::RngCore;

/// Preprocessing knobs shared by training and evaluation.
#[derive(Debug, Clone, PartialEq)]
pub struct PrepConfig {
    pub window: usize,
    pub min_tail: usize,
    /// Temporal crops added per exam of a sparse class.
    pub crops_per_exam: usize,
    pub crop_fraction: f64,
    /// Classes that receive crop augmentation.
    pub sparse_classes: Vec<u8>,
}

impl Default for PrepConfig {
    fn default() -> Self {
        PrepConfig {
            window: crate::pose::DEFAULT_WINDOW,
            min_tail: crate::pose::DEFAULT_MIN_TAIL,
            crops_per_exam: 2,
            crop_fraction: crate::pose::DEFAULT_CROP_FRACTION,
            sparse_classes: vec![2, 3],
        }
    }
}

/// One exam ready for the network: featurized clips plus crop augmentations.
#[derive(Debug, Clone)]
pub struct PreparedExam {
    pub subject_id: String,
    pub label: Option<u8>,
    /// Clip features; used for both training and held-out scoring.
    pub clips: Vec<NetInput>,
    /// Crop features; training only.
    pub crops: Vec<NetInput>,
}

/// Normalizes, clips, augments, and featurizes one exam. Crops are drawn
/// round-robin from the exam's clips under `crop_seed`.
pub fn prepare_exam(file: &PoseFile, prep: &PrepConfig, crop_seed: u64) -> Result<PreparedExam> {
    let normalized = normalize_center(&file.seq, &file.layout)?;
    let clips = clip_sequence(&normalized, prep.window, prep.min_tail)?;

    let mut crop_clips = Vec::new();
    if let Some(label) = file.seq.label {
        if prep.sparse_classes.contains(&label) {
            for i in 0..prep.crops_per_exam {
                let source = &clips[i % clips.len()];
                let mut crop =
                    augment_crops(source, 1, prep.crop_fraction, crop_seed.wrapping_add(i as u64))?;
                crop_clips.append(&mut crop);
            }
        }
    }

    let featurize = |clips: &[crate::pose::Clip]| -> Result<Vec<NetInput>> {
        clips
            .iter()
            .map(|c| NetInput::from_features(&features::extract(c)?))
            .collect()
    };

    Ok(PreparedExam {
        subject_id: file.seq.subject_id.clone(),
        label: file.seq.label,
        clips: featurize(&clips)?,
        crops: featurize(&crop_clips)?,
    })
}

/// Exam-level decision from per-clip probabilities: majority vote over clip
/// argmax labels, ties broken by the larger summed probability among the
/// tied classes. Also returns the mean probability vector.
pub fn vote(clip_probs: &[Vec<f64>]) -> Result<(usize, Vec<f64>)> {
    let first = clip_probs
        .first()
        .ok_or_else(|| GaitError::InvalidInput("no clip probabilities to vote on".into()))?;
    let c = first.len();
    let mut counts = vec![0usize; c];
    let mut sums = vec![0.0; c];
    for probs in clip_probs {
        if probs.len() != c {
            return Err(GaitError::shape("clip probabilities", c, probs.len()));
        }
        counts[argmax(probs)] += 1;
        for (s, p) in sums.iter_mut().zip(probs) {
            *s += p;
        }
    }
    let top = *counts.iter().max().expect("nonempty");
    let winner = (0..c)
        .filter(|&k| counts[k] == top)
        .max_by(|&a, &b| sums[a].total_cmp(&sums[b]))
        .expect("nonempty");
    let mean: Vec<f64> = sums.iter().map(|s| s / clip_probs.len() as f64).collect();
    Ok((winner, mean))
}

/// Outcome of one leave-one-out fold.
#[derive(Debug, Clone)]
pub struct FoldResult {
    pub subject_id: String,
    pub true_label: usize,
    pub predicted: usize,
    /// Probability vector per held-out clip.
    pub clip_probs: Vec<Vec<f64>>,
    /// Mean probability vector over the exam's clips.
    pub exam_prob: Vec<f64>,
    pub warning: Option<String>,
}

/// Cross-validation configuration.
#[derive(Debug, Clone, PartialEq)]
pub struct LoocvConfig {
    pub prep: PrepConfig,
    pub filters: usize,
    pub train: TrainConfig,
    /// Folds run in parallel when > 1; results aggregate in fold order
    /// either way.
    pub workers: usize,
}

impl LoocvConfig {
    pub fn with_seed(seed: u64) -> Self {
        LoocvConfig {
            prep: PrepConfig::default(),
            filters: crate::net::DEFAULT_FILTERS,
            train: TrainConfig::with_seed(seed),
            workers: 1,
        }
    }
}

/// Runs participant-level leave-one-out cross-validation: one fold per
/// exam, training on all other exams' clips and crops.
pub fn loocv(exams: &[PoseFile], cfg: &LoocvConfig) -> Result<Vec<FoldResult>> {
    cfg.train.validate()?;
    if exams.len() < 2 {
        return Err(GaitError::InvalidInput(
            "leave-one-out needs at least 2 exams".into(),
        ));
    }
    let n_joints = exams[0].layout.n_joints;
    let mut class_seen = [false; NUM_CLASSES];
    for f in exams {
        if f.layout.n_joints != n_joints {
            return Err(GaitError::shape(
                format!("exam {}", f.seq.subject_id),
                format!("{} joints", n_joints),
                format!("{} joints", f.layout.n_joints),
            ));
        }
        match f.seq.label {
            Some(l) => class_seen[l as usize] = true,
            None => {
                return Err(GaitError::InvalidInput(format!(
                    "exam {} has no label",
                    f.seq.subject_id
                )))
            }
        }
    }
    if let Some(missing) = class_seen.iter().position(|seen| !seen) {
        return Err(GaitError::InvalidInput(format!(
            "class {} absent from the dataset",
            missing
        )));
    }

    let prepared: Vec<PreparedExam> = exams
        .iter()
        .enumerate()
        .map(|(i, f)| {
            let crop_seed = rng::stream(cfg.train.seed, "crop_seed", i as u64).next_u64();
            prepare_exam(f, &cfg.prep, crop_seed)
        })
        .collect::<Result<_>>()?;

    let spec = ModelSpec::new(n_joints, cfg.filters);
    let run_fold = |i: usize| -> Result<FoldResult> {
        let held = &prepared[i];
        let mut items: Vec<(&NetInput, usize)> = Vec::new();
        let mut present = [false; NUM_CLASSES];
        for (j, exam) in prepared.iter().enumerate() {
            if j == i {
                continue;
            }
            let label = exam.label.expect("validated above") as usize;
            present[label] = true;
            for input in exam.clips.iter().chain(&exam.crops) {
                items.push((input, label));
            }
        }
        let true_label = held.label.expect("validated above") as usize;
        let warning = if present[true_label] {
            None
        } else {
            Some(format!(
                "fold {}: class {} absent from training set",
                held.subject_id, true_label
            ))
        };
        if let Some(w) = &warning {
            log::warn!("{}", w);
        }

        let fold_cfg = TrainConfig {
            seed: rng::stream(cfg.train.seed, "fold_seed", i as u64).next_u64(),
            ..cfg.train.clone()
        };
        let outcome = train(&items, &spec, &fold_cfg)?;
        let clip_probs: Vec<Vec<f64>> = held
            .clips
            .iter()
            .map(|input| outcome.model.forward(input).map(|f| f.probs))
            .collect::<Result<_>>()?;
        let (predicted, exam_prob) = vote(&clip_probs)?;
        log::info!(
            "fold {:>3} ({}): true {} predicted {}",
            i,
            held.subject_id,
            true_label,
            predicted
        );
        Ok(FoldResult {
            subject_id: held.subject_id.clone(),
            true_label,
            predicted,
            clip_probs,
            exam_prob,
            warning,
        })
    };

    if cfg.workers > 1 {
        use rayon::prelude::*;
        let pool = rayon::ThreadPoolBuilder::new()
            .num_threads(cfg.workers)
            .build()
            .map_err(|e| GaitError::InvalidInput(format!("worker pool: {}", e)))?;
        pool.install(|| {
            (0..prepared.len())
                .into_par_iter()
                .map(run_fold)
                .collect::<Result<Vec<_>>>()
        })
    } else {
        (0..prepared.len()).map(run_fold).collect()
    }
}

/// Per-class evaluation numbers.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ClassMetrics {
    pub f1: f64,
    pub auc: f64,
    pub precision: f64,
    pub recall: f64,
}

/// Aggregated evaluation results over all folds.
#[derive(Debug, Clone)]
pub struct EvalReport {
    /// Rows: true class; columns: predicted class.
    pub confusion: Vec<Vec<usize>>,
    pub per_class: Vec<ClassMetrics>,
    pub macro_avg: ClassMetrics,
    /// Mean of per-class recalls.
    pub balanced_accuracy: f64,
    pub n_exams: usize,
    pub warnings: Vec<String>,
}

/// Rank-based AUC: probability that a positive's score exceeds a
/// negative's, ties counting one half. Returns 0.5 when either side is
/// empty (chance level).
pub fn rank_auc(pos: &[f64], neg: &[f64]) -> f64 {
    if pos.is_empty() || neg.is_empty() {
        return 0.5;
    }
    let mut favorable = 0.0;
    for p in pos {
        for n in neg {
            favorable += if p > n {
                1.0
            } else if p == n {
                0.5
            } else {
                0.0
            };
        }
    }
    favorable / (pos.len() * neg.len()) as f64
}

/// Computes the evaluation report from fold outcomes.
pub fn metrics(folds: &[FoldResult]) -> EvalReport {
    let c = NUM_CLASSES;
    let mut confusion = vec![vec![0usize; c]; c];
    for f in folds {
        confusion[f.true_label][f.predicted] += 1;
    }

    let mut per_class = Vec::with_capacity(c);
    for k in 0..c {
        let tp = confusion[k][k];
        let fp: usize = (0..c).filter(|&t| t != k).map(|t| confusion[t][k]).sum();
        let fn_: usize = (0..c).filter(|&p| p != k).map(|p| confusion[k][p]).sum();
        let precision = if tp + fp == 0 {
            0.0
        } else {
            tp as f64 / (tp + fp) as f64
        };
        let recall = if tp + fn_ == 0 {
            0.0
        } else {
            tp as f64 / (tp + fn_) as f64
        };
        let f1 = if precision + recall == 0.0 {
            0.0
        } else {
            2.0 * precision * recall / (precision + recall)
        };

        let pos: Vec<f64> = folds
            .iter()
            .filter(|f| f.true_label == k)
            .map(|f| f.exam_prob[k])
            .collect();
        let neg: Vec<f64> = folds
            .iter()
            .filter(|f| f.true_label != k)
            .map(|f| f.exam_prob[k])
            .collect();
        let auc = rank_auc(&pos, &neg);

        per_class.push(ClassMetrics {
            f1,
            auc,
            precision,
            recall,
        });
    }

    let mean = |get: fn(&ClassMetrics) -> f64| -> f64 {
        per_class.iter().map(get).sum::<f64>() / c as f64
    };
    let macro_avg = ClassMetrics {
        f1: mean(|m| m.f1),
        auc: mean(|m| m.auc),
        precision: mean(|m| m.precision),
        recall: mean(|m| m.recall),
    };

    EvalReport {
        confusion,
        per_class,
        macro_avg,
        balanced_accuracy: macro_avg.recall,
        n_exams: folds.len(),
        warnings: folds.iter().filter_map(|f| f.warning.clone()).collect(),
    }
}
