//! Detection and track file formats.
//!
//! Detections: one record per line, `frame_idx, x1, y1, x2, y2, score`,
//! comma-separated (whitespace tolerated). Frames with no detections may
//! simply be absent. Track output uses the same fields plus `track_id`.

use super::{BoundingBox, Track};
use crate::error::{GaitError, Result};
use crate::pose::atomic_write;
use std::fs;
use std::path::Path;

fn parse_err(line: usize, msg: impl Into<String>) -> GaitError {
    GaitError::Parse {
        line,
        msg: msg.into(),
    }
}

/// Reads a detections file into per-frame lists indexed from frame 0.
///
/// The result has `max frame_idx + 1` entries; unlisted frames are empty.
pub fn read_detections(path: &Path) -> Result<Vec<Vec<BoundingBox>>> {
    let text = fs::read_to_string(path)?;
    let mut records: Vec<(usize, BoundingBox)> = Vec::new();
    for (i, raw) in text.lines().enumerate() {
        let lineno = i + 1;
        let line = raw.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let toks: Vec<&str> = line
            .split(|c: char| c == ',' || c.is_whitespace())
            .filter(|t| !t.is_empty())
            .collect();
        if toks.len() != 6 {
            return Err(parse_err(
                lineno,
                format!("expected 6 fields (frame, x1, y1, x2, y2, score), got {}", toks.len()),
            ));
        }
        let frame_idx: usize = toks[0]
            .parse()
            .map_err(|_| parse_err(lineno, format!("bad frame index '{}'", toks[0])))?;
        let mut vals = [0.0f64; 5];
        for (v, tok) in vals.iter_mut().zip(&toks[1..]) {
            *v = tok
                .parse()
                .map_err(|_| parse_err(lineno, format!("bad number '{}'", tok)))?;
            if !v.is_finite() {
                return Err(parse_err(lineno, format!("non-finite value '{}'", tok)));
            }
        }
        let b = BoundingBox {
            x1: vals[0],
            y1: vals[1],
            x2: vals[2],
            y2: vals[3],
            score: vals[4],
        };
        b.validate()
            .map_err(|e| parse_err(lineno, e.to_string()))?;
        records.push((frame_idx, b));
    }

    let n_frames = records.iter().map(|(f, _)| f + 1).max().unwrap_or(0);
    let mut frames = vec![Vec::new(); n_frames];
    for (f, b) in records {
        frames[f].push(b);
    }
    Ok(frames)
}

/// Writes tracks as detection records extended with the track id,
/// ordered by frame then track id.
pub fn write_tracks(path: &Path, tracks: &[Track]) -> Result<()> {
    let mut rows: Vec<(usize, u64, BoundingBox)> = tracks
        .iter()
        .flat_map(|t| t.history.iter().map(move |&(f, b)| (f, t.id, b)))
        .collect();
    rows.sort_by_key(|&(f, id, _)| (f, id));
    let mut out = String::new();
    for (f, id, b) in rows {
        out.push_str(&format!(
            "{},{:?},{:?},{:?},{:?},{:?},{}\n",
            f, b.x1, b.y1, b.x2, b.y2, b.score, id
        ));
    }
    atomic_write(path, out.as_bytes())
}
