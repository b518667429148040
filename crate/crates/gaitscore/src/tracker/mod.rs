//! SORT-style multi-object tracking over bounding-box detections.
//!
//! Each frame: predict all live tracks forward, match predictions to
//! detections by IoU through the Hungarian solver, update matched tracks,
//! spawn tracks for unmatched detections, and retire tracks that have gone
//! unmatched for longer than `max_age`. The walking participant is then the
//! track that accumulated the most boxes.

mod hungarian;
mod io;
mod kalman;

pub use hungarian::hungarian_assign;
pub use io::{read_detections, write_tracks};
pub use kalman::KalmanBoxState;

use crate::error::{GaitError, Result};

/// Axis-aligned box in pixel coordinates with a detector confidence.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BoundingBox {
    pub x1: f64,
    pub y1: f64,
    pub x2: f64,
    pub y2: f64,
    pub score: f64,
}

impl BoundingBox {
    pub fn validate(&self) -> Result<()> {
        let vals = [self.x1, self.y1, self.x2, self.y2, self.score];
        if vals.iter().any(|v| !v.is_finite()) {
            return Err(GaitError::InvalidInput("non-finite box".into()));
        }
        if self.x2 <= self.x1 || self.y2 <= self.y1 {
            return Err(GaitError::InvalidInput(format!(
                "empty box [{}, {}, {}, {}]",
                self.x1, self.y1, self.x2, self.y2
            )));
        }
        Ok(())
    }

    pub fn area(&self) -> f64 {
        (self.x2 - self.x1) * (self.y2 - self.y1)
    }
}

/// Intersection over union of two boxes, in `[0, 1]`.
pub fn iou(a: &BoundingBox, b: &BoundingBox) -> f64 {
    let ix = (a.x2.min(b.x2) - a.x1.max(b.x1)).max(0.0);
    let iy = (a.y2.min(b.y2) - a.y1.max(b.y1)).max(0.0);
    let inter = ix * iy;
    if inter <= 0.0 {
        return 0.0;
    }
    inter / (a.area() + b.area() - inter)
}

/// Tracker thresholds.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TrackerConfig {
    /// Minimum IoU for a prediction/detection pair to count as a match.
    pub iou_min: f64,
    /// Frames a track may coast unmatched before it is retired.
    pub max_age: usize,
    /// Matches required before a track is reported.
    pub min_hits: usize,
}

impl Default for TrackerConfig {
    fn default() -> Self {
        TrackerConfig {
            iou_min: 0.3,
            max_age: 5,
            min_hits: 3,
        }
    }
}

impl TrackerConfig {
    pub fn validate(&self) -> Result<()> {
        if !(0.0..=1.0).contains(&self.iou_min) {
            return Err(GaitError::InvalidInput(format!(
                "iou_min {} outside [0, 1]",
                self.iou_min
            )));
        }
        if self.min_hits == 0 {
            return Err(GaitError::InvalidInput("min_hits must be >= 1".into()));
        }
        Ok(())
    }
}

/// One tracked identity: filter state, lifecycle counters, and the matched
/// detections that built it.
#[derive(Debug, Clone)]
pub struct Track {
    pub id: u64,
    pub kalman: KalmanBoxState,
    /// Number of matched detections.
    pub hits: usize,
    /// Frames since birth.
    pub age: usize,
    /// Frames since the last matched detection.
    pub time_since_update: usize,
    /// Matched detections as `(frame_idx, detection box)`.
    pub history: Vec<(usize, BoundingBox)>,
}

impl Track {
    fn new(id: u64, frame_idx: usize, det: BoundingBox) -> Self {
        Track {
            id,
            kalman: KalmanBoxState::from_box(&det),
            hits: 1,
            age: 0,
            time_since_update: 0,
            history: vec![(frame_idx, det)],
        }
    }
}

/// Runs the tracker over per-frame detection lists (frame 0 first).
///
/// Returns every track that reached `min_hits` matches, sorted by id.
/// Identical inputs always produce identical tracks.
pub fn track_frames(detections: &[Vec<BoundingBox>], cfg: &TrackerConfig) -> Result<Vec<Track>> {
    cfg.validate()?;
    for dets in detections {
        for d in dets {
            d.validate()?;
        }
    }

    let mut active: Vec<Track> = Vec::new();
    let mut retired: Vec<Track> = Vec::new();
    let mut next_id: u64 = 1;

    for (frame_idx, dets) in detections.iter().enumerate() {
        for t in active.iter_mut() {
            t.kalman.predict();
            t.age += 1;
            t.time_since_update += 1;
        }

        let mut det_matched = vec![false; dets.len()];
        if !active.is_empty() && !dets.is_empty() {
            let predictions: Vec<BoundingBox> =
                active.iter().map(|t| t.kalman.to_box(0.0)).collect();
            let cost: Vec<Vec<f64>> = predictions
                .iter()
                .map(|p| dets.iter().map(|d| -iou(p, d)).collect())
                .collect();
            for (ti, di) in hungarian_assign(&cost) {
                if iou(&predictions[ti], &dets[di]) >= cfg.iou_min {
                    let t = &mut active[ti];
                    t.kalman.update(&dets[di]);
                    t.hits += 1;
                    t.time_since_update = 0;
                    t.history.push((frame_idx, dets[di]));
                    det_matched[di] = true;
                }
            }
        }

        for (di, det) in dets.iter().enumerate() {
            if !det_matched[di] {
                active.push(Track::new(next_id, frame_idx, *det));
                next_id += 1;
            }
        }

        let mut still_active = Vec::with_capacity(active.len());
        for t in active.drain(..) {
            if t.time_since_update > cfg.max_age {
                retired.push(t);
            } else {
                still_active.push(t);
            }
        }
        active = still_active;
    }

    let mut tracks: Vec<Track> = retired
        .into_iter()
        .chain(active)
        .filter(|t| t.hits >= cfg.min_hits)
        .collect();
    tracks.sort_by_key(|t| t.id);
    Ok(tracks)
}

/// Picks the participant: the track with the most matched boxes, ties
/// broken by smaller id. `n_frames` is only used to report coverage.
pub fn select_participant(tracks: &[Track], n_frames: usize) -> Result<&Track> {
    let best = tracks
        .iter()
        .fold(None::<&Track>, |best, t| match best {
            None => Some(t),
            Some(b) => {
                if t.history.len() > b.history.len()
                    || (t.history.len() == b.history.len() && t.id < b.id)
                {
                    Some(t)
                } else {
                    Some(b)
                }
            }
        })
        .ok_or(GaitError::NoParticipant)?;
    if n_frames > 0 {
        log::debug!(
            "participant track {} covers {}/{} frames",
            best.id,
            best.history.len(),
            n_frames
        );
    }
    Ok(best)
}
