//! Classification objectives: focal, ordinal, and their hybrid.
//!
//! The focal term down-weights well-classified samples by `(1 - p_t)^gamma`
//! to keep easy examples from dominating under class imbalance. The ordinal
//! term scales cross-entropy by `(1 + w) / C`, where `w` is the absolute
//! distance between the true label and the current argmax prediction, so
//! mistakes farther down the severity scale cost more. The hybrid objective
//! is `focal + lambda * ordinal`.
//!
//! `w` comes from a non-differentiable argmax and is treated as a constant
//! per sample: no gradient flows through it.

use crate::error::{GaitError, Result};

/// Probabilities are clamped to `[EPS, 1 - EPS]` before taking logs.
pub const EPS: f64 = 1e-12;
/// Tolerance for the "probabilities sum to one" input check.
const SUM_TOL: f64 = 1e-6;

/// Hyperparameters of the hybrid objective.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LossConfig {
    pub alpha: f64,
    pub gamma: f64,
    pub lambda: f64,
    pub n_classes: usize,
}

impl Default for LossConfig {
    fn default() -> Self {
        LossConfig {
            alpha: 0.25,
            gamma: 2.0,
            lambda: 1.0,
            n_classes: crate::NUM_CLASSES,
        }
    }
}

impl LossConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.alpha > 0.0) || !(self.gamma >= 0.0) || !(self.lambda >= 0.0) {
            return Err(GaitError::InvalidInput(format!(
                "bad loss parameters alpha={} gamma={} lambda={}",
                self.alpha, self.gamma, self.lambda
            )));
        }
        if self.n_classes < 2 {
            return Err(GaitError::InvalidInput("need at least 2 classes".into()));
        }
        Ok(())
    }
}

/// Which objective drives training.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum LossMode {
    /// Plain cross-entropy.
    Ce,
    /// Focal loss only.
    Focal,
    /// Ordinal loss only.
    Ordinal,
    /// `focal + lambda * ordinal`.
    FocalOrdinal,
}

impl std::str::FromStr for LossMode {
    type Err = GaitError;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "ce" => Ok(LossMode::Ce),
            "focal" => Ok(LossMode::Focal),
            "ordinal" => Ok(LossMode::Ordinal),
            "focal+ordinal" => Ok(LossMode::FocalOrdinal),
            other => Err(GaitError::InvalidInput(format!(
                "unknown loss mode '{}' (expected ce|focal|ordinal|focal+ordinal)",
                other
            ))),
        }
    }
}

impl std::fmt::Display for LossMode {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            LossMode::Ce => "ce",
            LossMode::Focal => "focal",
            LossMode::Ordinal => "ordinal",
            LossMode::FocalOrdinal => "focal+ordinal",
        })
    }
}

/// A class label with its one-hot encoding.
#[derive(Debug, Clone, PartialEq)]
pub struct LabelPair {
    pub onehot: Vec<f64>,
    pub label: usize,
}

impl LabelPair {
    pub fn new(label: usize, n_classes: usize) -> Result<Self> {
        if label >= n_classes {
            return Err(GaitError::InvalidInput(format!(
                "label {} out of range for {} classes",
                label, n_classes
            )));
        }
        let mut onehot = vec![0.0; n_classes];
        onehot[label] = 1.0;
        Ok(LabelPair { onehot, label })
    }
}

/// Index of the largest probability, smallest index on ties.
pub fn argmax(p: &[f64]) -> usize {
    let mut best = 0;
    for (i, &v) in p.iter().enumerate().skip(1) {
        if v > p[best] {
            best = i;
        }
    }
    best
}

fn check_probs(p: &[f64], n_classes: usize) -> Result<()> {
    if p.len() != n_classes {
        return Err(GaitError::shape("probabilities", n_classes, p.len()));
    }
    let sum: f64 = p.iter().sum();
    if !sum.is_finite() || (sum - 1.0).abs() > SUM_TOL || p.iter().any(|&v| v < 0.0) {
        return Err(GaitError::InvalidInput(format!(
            "not a probability vector (sum {})",
            sum
        )));
    }
    Ok(())
}

fn clamp(p: f64) -> f64 {
    p.clamp(EPS, 1.0 - EPS)
}

/// Focal loss: `-alpha * (1 - p_t)^gamma * ln(p_t)` for true class `t`.
pub fn focal(y: &LabelPair, p: &[f64], cfg: &LossConfig) -> Result<f64> {
    cfg.validate()?;
    check_probs(p, cfg.n_classes)?;
    let pt = clamp(p[y.label]);
    Ok(-cfg.alpha * (1.0 - pt).powf(cfg.gamma) * pt.ln())
}

/// Ordinal loss: `-((1 + w) / C) * ln(p_t)` with `w = |label - predicted|`.
///
/// `predicted` must be the argmax of `p` (smallest index on ties).
pub fn ordinal(y: &LabelPair, p: &[f64], predicted: usize, cfg: &LossConfig) -> Result<f64> {
    cfg.validate()?;
    check_probs(p, cfg.n_classes)?;
    if predicted >= cfg.n_classes {
        return Err(GaitError::InvalidInput(format!(
            "predicted label {} out of range",
            predicted
        )));
    }
    let w = y.label.abs_diff(predicted) as f64;
    let pt = clamp(p[y.label]);
    Ok(-((1.0 + w) / cfg.n_classes as f64) * pt.ln())
}

/// Hybrid loss value with exact gradients.
#[derive(Debug, Clone)]
pub struct HybridLoss {
    pub value: f64,
    /// Gradient with respect to the probability vector.
    pub grad_p: Vec<f64>,
    /// Gradient with respect to the logits, assuming `p = softmax(logits)`.
    pub grad_logits: Vec<f64>,
}

/// `focal + lambda * ordinal` with gradients under the stop-gradient-on-`w`
/// convention.
pub fn hybrid(y: &LabelPair, p: &[f64], cfg: &LossConfig) -> Result<HybridLoss> {
    mode_loss(LossMode::FocalOrdinal, y, p, cfg)
}

/// Loss value and gradients for any training mode. All modes reduce to a
/// scalar function of the true-class probability once `w` is frozen, so one
/// gradient path serves them all.
pub fn mode_loss(mode: LossMode, y: &LabelPair, p: &[f64], cfg: &LossConfig) -> Result<HybridLoss> {
    cfg.validate()?;
    check_probs(p, cfg.n_classes)?;
    let t = y.label;
    let pt = clamp(p[t]);
    let w = y.label.abs_diff(argmax(p)) as f64;
    let c = cfg.n_classes as f64;

    // value and d(value)/d(p_t) per component
    let ce_v = -pt.ln();
    let ce_g = -1.0 / pt;
    let focal_v = cfg.alpha * (1.0 - pt).powf(cfg.gamma) * ce_v;
    let focal_g = if cfg.gamma == 0.0 {
        cfg.alpha * ce_g
    } else {
        cfg.alpha
            * ((1.0 - pt).powf(cfg.gamma) * ce_g
                + cfg.gamma * (1.0 - pt).powf(cfg.gamma - 1.0) * pt.ln())
    };
    let ord_scale = (1.0 + w) / c;
    let ord_v = ord_scale * ce_v;
    let ord_g = ord_scale * ce_g;

    let (value, gt) = match mode {
        LossMode::Ce => (ce_v, ce_g),
        LossMode::Focal => (focal_v, focal_g),
        LossMode::Ordinal => (ord_v, ord_g),
        LossMode::FocalOrdinal => (focal_v + cfg.lambda * ord_v, focal_g + cfg.lambda * ord_g),
    };

    let mut grad_p = vec![0.0; cfg.n_classes];
    grad_p[t] = gt;
    // chain through softmax: dL/dz_j = g_t * p_t * (delta_tj - p_j)
    let grad_logits = (0..cfg.n_classes)
        .map(|j| {
            let delta = if j == t { 1.0 } else { 0.0 };
            gt * pt * (delta - p[j])
        })
        .collect();

    Ok(HybridLoss {
        value,
        grad_p,
        grad_logits,
    })
}
