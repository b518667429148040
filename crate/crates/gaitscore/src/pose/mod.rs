//! Pose-sequence data model and preprocessing.
//!
//! A [`PoseSequence`] is a time series of 3D joint sets for one exam.
//! Preprocessing normalizes each sequence (mid-hip at the origin, unit mean
//! torso length), cuts it into fixed-length [`Clip`]s, and optionally
//! augments sparse classes with temporal crops.

mod io;
mod synth;

pub use io::{atomic_write, read_pose_file, write_pose_file, PoseFile};
pub use synth::synth_gait;

use crate::error::{GaitError, Result};
use crate::rng;

/// Default clip window length, in frames.
pub const DEFAULT_WINDOW: usize = 200;
/// Default minimum usable sequence/tail length, in frames.
pub const DEFAULT_MIN_TAIL: usize = 100;
/// Default temporal crop fraction for augmentation.
pub const DEFAULT_CROP_FRACTION: f64 = 0.8;

/// A single 3D joint position.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Joint3D {
    pub x: f64,
    pub y: f64,
    pub z: f64,
}

impl Joint3D {
    pub fn new(x: f64, y: f64, z: f64) -> Self {
        Joint3D { x, y, z }
    }

    pub fn is_finite(&self) -> bool {
        self.x.is_finite() && self.y.is_finite() && self.z.is_finite()
    }

    pub fn dist(&self, other: &Joint3D) -> f64 {
        let dx = self.x - other.x;
        let dy = self.y - other.y;
        let dz = self.z - other.z;
        (dx * dx + dy * dy + dz * dz).sqrt()
    }
}

/// All joints of one frame, ordered by the skeleton layout.
#[derive(Debug, Clone, PartialEq)]
pub struct PoseFrame {
    pub joints: Vec<Joint3D>,
}

impl PoseFrame {
    pub fn new(joints: Vec<Joint3D>) -> Self {
        PoseFrame { joints }
    }
}

/// Names the joint indices the pipeline needs to locate on any skeleton.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct SkeletonLayout {
    pub n_joints: usize,
    pub hip_left_idx: usize,
    pub hip_right_idx: usize,
    pub neck_idx: usize,
}

impl SkeletonLayout {
    pub fn validate(&self) -> Result<()> {
        let idx = [self.hip_left_idx, self.hip_right_idx, self.neck_idx];
        if idx.iter().any(|&i| i >= self.n_joints) {
            return Err(GaitError::InvalidInput(format!(
                "layout indices {:?} out of range for {} joints",
                idx, self.n_joints
            )));
        }
        if idx[0] == idx[1] || idx[0] == idx[2] || idx[1] == idx[2] {
            return Err(GaitError::InvalidInput(
                "layout indices must be distinct".into(),
            ));
        }
        if self.n_joints < 2 {
            return Err(GaitError::InvalidInput("need at least 2 joints".into()));
        }
        Ok(())
    }
}

/// The built-in 24-joint skeleton (pelvis-rooted, SMPL-style ordering).
pub const DEFAULT_LAYOUT: SkeletonLayout = SkeletonLayout {
    n_joints: 24,
    hip_left_idx: 1,
    hip_right_idx: 2,
    neck_idx: 12,
};

/// One exam: K frames of 3D joints with subject identity and optional label.
#[derive(Debug, Clone, PartialEq)]
pub struct PoseSequence {
    pub frames: Vec<PoseFrame>,
    pub fps: f64,
    pub subject_id: String,
    pub label: Option<u8>,
}

impl PoseSequence {
    /// Checks the structural invariants: at least one frame, consistent
    /// joint counts, finite coordinates, label in range.
    pub fn validate(&self) -> Result<()> {
        if self.frames.is_empty() {
            return Err(GaitError::TooShort { got: 0, min: 1 });
        }
        if !(self.fps.is_finite() && self.fps > 0.0) {
            return Err(GaitError::InvalidInput(format!("bad fps {}", self.fps)));
        }
        let n = self.frames[0].joints.len();
        if n < 2 {
            return Err(GaitError::InvalidInput("need at least 2 joints".into()));
        }
        for (k, frame) in self.frames.iter().enumerate() {
            if frame.joints.len() != n {
                return Err(GaitError::shape(
                    format!("frame {}", k),
                    format!("{} joints", n),
                    format!("{} joints", frame.joints.len()),
                ));
            }
            if let Some(j) = frame.joints.iter().position(|j| !j.is_finite()) {
                return Err(GaitError::InvalidInput(format!(
                    "non-finite joint {} in frame {}",
                    j, k
                )));
            }
        }
        if let Some(label) = self.label {
            if label > 3 {
                return Err(GaitError::InvalidInput(format!(
                    "label {} out of range 0..=3",
                    label
                )));
            }
        }
        Ok(())
    }

    pub fn n_joints(&self) -> usize {
        self.frames.first().map_or(0, |f| f.joints.len())
    }

    pub fn len(&self) -> usize {
        self.frames.len()
    }

    pub fn is_empty(&self) -> bool {
        self.frames.is_empty()
    }
}

/// A fixed-length window of a parent exam; inherits subject and label.
#[derive(Debug, Clone, PartialEq)]
pub struct Clip {
    pub frames: Vec<PoseFrame>,
    pub subject_id: String,
    pub label: Option<u8>,
}

impl Clip {
    pub fn len(&self) -> usize {
        self.frames.len()
    }

    pub fn is_empty(&self) -> bool {
        self.frames.is_empty()
    }

    pub fn n_joints(&self) -> usize {
        self.frames.first().map_or(0, |f| f.joints.len())
    }
}

fn mid_hip(frame: &PoseFrame, layout: &SkeletonLayout) -> Joint3D {
    let l = frame.joints[layout.hip_left_idx];
    let r = frame.joints[layout.hip_right_idx];
    Joint3D::new((l.x + r.x) / 2.0, (l.y + r.y) / 2.0, (l.z + r.z) / 2.0)
}

/// Centers every frame's mid-hip at the origin and rescales the whole
/// sequence so the mean mid-hip-to-neck (torso) length is 1.
///
/// Idempotent: a sequence that is already centered with unit torso comes
/// back unchanged.
pub fn normalize_center(seq: &PoseSequence, layout: &SkeletonLayout) -> Result<PoseSequence> {
    seq.validate()?;
    layout.validate()?;
    if layout.n_joints != seq.n_joints() {
        return Err(GaitError::shape(
            "layout",
            format!("{} joints", seq.n_joints()),
            format!("{} joints", layout.n_joints),
        ));
    }

    let mean_torso = seq
        .frames
        .iter()
        .map(|f| mid_hip(f, layout).dist(&f.joints[layout.neck_idx]))
        .sum::<f64>()
        / seq.frames.len() as f64;
    if mean_torso <= f64::EPSILON {
        return Err(GaitError::DegenerateInput(format!(
            "zero mean torso length for subject {}",
            seq.subject_id
        )));
    }

    let scale = 1.0 / mean_torso;
    let frames = seq
        .frames
        .iter()
        .map(|f| {
            let c = mid_hip(f, layout);
            PoseFrame::new(
                f.joints
                    .iter()
                    .map(|j| Joint3D::new((j.x - c.x) * scale, (j.y - c.y) * scale, (j.z - c.z) * scale))
                    .collect(),
            )
        })
        .collect();

    Ok(PoseSequence {
        frames,
        fps: seq.fps,
        subject_id: seq.subject_id.clone(),
        label: seq.label,
    })
}

/// Cuts a sequence into clips of exactly `window` frames.
///
/// Non-overlapping windows tile from frame 0; any leftover frames are
/// covered by one extra window aligned to the sequence end (which may
/// overlap the previous window), so every frame index in `[0, K)` appears
/// in some clip. A sequence shorter than `window` but at least `min_tail`
/// frames long yields a single clip padded by repeating its last frame.
pub fn clip_sequence(seq: &PoseSequence, window: usize, min_tail: usize) -> Result<Vec<Clip>> {
    if window == 0 {
        return Err(GaitError::InvalidInput("window must be positive".into()));
    }
    let k = seq.len();
    if k < min_tail {
        return Err(GaitError::TooShort { got: k, min: min_tail });
    }

    let make = |frames: Vec<PoseFrame>| Clip {
        frames,
        subject_id: seq.subject_id.clone(),
        label: seq.label,
    };

    if k < window {
        let mut frames = seq.frames.clone();
        let last = frames[k - 1].clone();
        frames.resize(window, last);
        return Ok(vec![make(frames)]);
    }

    let mut clips = Vec::new();
    let mut start = 0;
    while start + window <= k {
        clips.push(make(seq.frames[start..start + window].to_vec()));
        start += window;
    }
    if start < k {
        clips.push(make(seq.frames[k - window..k].to_vec()));
    }
    Ok(clips)
}

/// Generates `n_crops` temporal crops of a clip for augmentation.
///
/// Each crop takes `round(W * crop_fraction)` consecutive frames at a
/// seeded-uniform random offset and re-pads to the full window length by
/// repeating its last frame. Deterministic for a fixed seed.
pub fn augment_crops(
    clip: &Clip,
    n_crops: usize,
    crop_fraction: f64,
    seed: u64,
) -> Result<Vec<Clip>> {
    if !(crop_fraction > 0.0 && crop_fraction <= 1.0) {
        return Err(GaitError::InvalidInput(format!(
            "crop_fraction {} outside (0, 1]",
            crop_fraction
        )));
    }
    let w = clip.len();
    if w == 0 {
        return Err(GaitError::TooShort { got: 0, min: 1 });
    }
    let crop_len = ((w as f64 * crop_fraction).round() as usize).clamp(1, w);

    let mut rng = rng::stream(seed, "augment_crops", 0);
    let mut out = Vec::with_capacity(n_crops);
    for _ in 0..n_crops {
        let offset = rng::uniform_usize(&mut rng, w - crop_len + 1);
        let mut frames = clip.frames[offset..offset + crop_len].to_vec();
        let last = frames[crop_len - 1].clone();
        frames.resize(w, last);
        out.push(Clip {
            frames,
            subject_id: clip.subject_id.clone(),
            label: clip.label,
        });
    }
    Ok(out)
}
