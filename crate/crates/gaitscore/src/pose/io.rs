//! Pose exam file format.
//!
//! One text document per exam. Header lines come first, one `key value`
//! pair per line:
//!
//! ```text
//! fps 30
//! n_joints 24
//! layout hip_left=1 hip_right=2 neck=12
//! subject_id subj-007
//! label 2
//! ```
//!
//! `label` is optional; everything else is required. The body holds K rows,
//! one frame per row, with `n_joints` x/y/z triples of decimal reals
//! separated by whitespace and/or commas. NaN and infinity are rejected.

use super::{Joint3D, PoseFrame, PoseSequence, SkeletonLayout};
use crate::error::{GaitError, Result};
use std::fs;
use std::io::Write as _;
use std::path::Path;

/// A parsed pose file: the sequence plus the layout its header declared.
#[derive(Debug, Clone)]
pub struct PoseFile {
    pub seq: PoseSequence,
    pub layout: SkeletonLayout,
}

fn parse_err(line: usize, msg: impl Into<String>) -> GaitError {
    GaitError::Parse {
        line,
        msg: msg.into(),
    }
}

fn parse_finite(tok: &str, line: usize) -> Result<f64> {
    let v: f64 = tok
        .parse()
        .map_err(|_| parse_err(line, format!("bad number '{}'", tok)))?;
    if !v.is_finite() {
        return Err(parse_err(line, format!("non-finite value '{}'", tok)));
    }
    Ok(v)
}

fn parse_layout(rest: &str, line: usize) -> Result<(usize, usize, usize)> {
    let mut hip_left = None;
    let mut hip_right = None;
    let mut neck = None;
    for part in rest.split_whitespace() {
        let (key, val) = part
            .split_once('=')
            .ok_or_else(|| parse_err(line, format!("layout entry '{}' is not key=index", part)))?;
        let idx: usize = val
            .parse()
            .map_err(|_| parse_err(line, format!("bad layout index '{}'", val)))?;
        match key {
            "hip_left" => hip_left = Some(idx),
            "hip_right" => hip_right = Some(idx),
            "neck" => neck = Some(idx),
            other => return Err(parse_err(line, format!("unknown layout key '{}'", other))),
        }
    }
    match (hip_left, hip_right, neck) {
        (Some(l), Some(r), Some(n)) => Ok((l, r, n)),
        _ => Err(parse_err(line, "layout needs hip_left, hip_right and neck")),
    }
}

/// Parses the exam file format described in the module docs.
pub fn read_pose_file(path: &Path) -> Result<PoseFile> {
    let text = fs::read_to_string(path)?;
    parse_pose_text(&text)
}

pub(crate) fn parse_pose_text(text: &str) -> Result<PoseFile> {
    let mut fps = None;
    let mut n_joints = None;
    let mut layout_idx = None;
    let mut subject_id = None;
    let mut label = None;
    let mut frames = Vec::new();

    for (i, raw) in text.lines().enumerate() {
        let lineno = i + 1;
        let line = raw.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let starts_numeric = line
            .chars()
            .next()
            .is_some_and(|c| c.is_ascii_digit() || c == '-' || c == '+' || c == '.');
        if !starts_numeric {
            let (key, rest) = line.split_once(char::is_whitespace).unwrap_or((line, ""));
            let rest = rest.trim();
            match key {
                "fps" => {
                    let v = parse_finite(rest, lineno)?;
                    if v <= 0.0 {
                        return Err(parse_err(lineno, "fps must be positive"));
                    }
                    fps = Some(v);
                }
                "n_joints" => {
                    n_joints = Some(
                        rest.parse::<usize>()
                            .map_err(|_| parse_err(lineno, format!("bad n_joints '{}'", rest)))?,
                    );
                }
                "layout" => layout_idx = Some(parse_layout(rest, lineno)?),
                "subject_id" => {
                    if rest.is_empty() {
                        return Err(parse_err(lineno, "empty subject_id"));
                    }
                    subject_id = Some(rest.to_string());
                }
                "label" => {
                    let v = rest
                        .parse::<u8>()
                        .map_err(|_| parse_err(lineno, format!("bad label '{}'", rest)))?;
                    if v > 3 {
                        return Err(parse_err(lineno, format!("label {} out of range 0..=3", v)));
                    }
                    label = Some(v);
                }
                other => return Err(parse_err(lineno, format!("unknown header key '{}'", other))),
            }
            continue;
        }

        // Data row.
        let n = n_joints.ok_or_else(|| parse_err(lineno, "data row before n_joints header"))?;
        let toks: Vec<&str> = line
            .split(|c: char| c.is_whitespace() || c == ',')
            .filter(|t| !t.is_empty())
            .collect();
        if toks.len() != 3 * n {
            return Err(parse_err(
                lineno,
                format!("expected {} values ({} joints), got {}", 3 * n, n, toks.len()),
            ));
        }
        let mut joints = Vec::with_capacity(n);
        for triple in toks.chunks(3) {
            joints.push(Joint3D::new(
                parse_finite(triple[0], lineno)?,
                parse_finite(triple[1], lineno)?,
                parse_finite(triple[2], lineno)?,
            ));
        }
        frames.push(PoseFrame::new(joints));
    }

    let fps = fps.ok_or_else(|| parse_err(0, "missing fps header"))?;
    let n_joints = n_joints.ok_or_else(|| parse_err(0, "missing n_joints header"))?;
    let (hip_left_idx, hip_right_idx, neck_idx) =
        layout_idx.ok_or_else(|| parse_err(0, "missing layout header"))?;
    let subject_id = subject_id.ok_or_else(|| parse_err(0, "missing subject_id header"))?;

    let layout = SkeletonLayout {
        n_joints,
        hip_left_idx,
        hip_right_idx,
        neck_idx,
    };
    layout.validate()?;

    let seq = PoseSequence {
        frames,
        fps,
        subject_id,
        label,
    };
    seq.validate()?;
    if seq.n_joints() != n_joints {
        return Err(GaitError::shape(
            "pose body",
            format!("{} joints", n_joints),
            format!("{} joints", seq.n_joints()),
        ));
    }
    Ok(PoseFile { seq, layout })
}

/// Writes an exam in the canonical file format (atomic write-then-rename).
pub fn write_pose_file(path: &Path, seq: &PoseSequence, layout: &SkeletonLayout) -> Result<()> {
    seq.validate()?;
    layout.validate()?;
    let mut out = String::new();
    out.push_str(&format!("fps {}\n", seq.fps));
    out.push_str(&format!("n_joints {}\n", layout.n_joints));
    out.push_str(&format!(
        "layout hip_left={} hip_right={} neck={}\n",
        layout.hip_left_idx, layout.hip_right_idx, layout.neck_idx
    ));
    out.push_str(&format!("subject_id {}\n", seq.subject_id));
    if let Some(label) = seq.label {
        out.push_str(&format!("label {}\n", label));
    }
    for frame in &seq.frames {
        let mut row = String::with_capacity(frame.joints.len() * 24);
        for (i, j) in frame.joints.iter().enumerate() {
            if i > 0 {
                row.push(' ');
            }
            // {:?} prints the shortest representation that round-trips f64
            row.push_str(&format!("{:?} {:?} {:?}", j.x, j.y, j.z));
        }
        out.push_str(&row);
        out.push('\n');
    }
    atomic_write(path, out.as_bytes())
}

/// Writes `bytes` to `path` via a temporary file in the same directory, so
/// an interrupted run never leaves a truncated artifact behind.
pub fn atomic_write(path: &Path, bytes: &[u8]) -> Result<()> {
    let dir = path.parent().filter(|p| !p.as_os_str().is_empty());
    let mut tmp = match dir {
        Some(d) => tempfile::NamedTempFile::new_in(d)?,
        None => tempfile::NamedTempFile::new_in(".")?,
    };
    tmp.write_all(bytes)?;
    tmp.flush()?;
    tmp.persist(path)
        .map_err(|e| GaitError::Io(e.error))?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::super::{synth_gait, DEFAULT_LAYOUT};
    use super::*;

    #[test]
    fn round_trip() {
        let seq = synth_gait(1, &DEFAULT_LAYOUT, 40, 123).unwrap();
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("exam.pose");
        write_pose_file(&path, &seq, &DEFAULT_LAYOUT).unwrap();
        let back = read_pose_file(&path).unwrap();
        assert_eq!(back.layout, DEFAULT_LAYOUT);
        assert_eq!(back.seq, seq);
    }

    const HEADER: &str = "fps 30\nn_joints 3\nlayout hip_left=0 hip_right=1 neck=2\nsubject_id a\n";

    #[test]
    fn rejects_nan_and_inf() {
        let text = format!("{HEADER}1 2 3 4 5 6 7 8 NaN\n");
        assert!(matches!(
            parse_pose_text(&text),
            Err(GaitError::Parse { line: 5, .. })
        ));
        let text2 = format!("{HEADER}1 2 3 4 5 6 7 8 inf\n");
        assert!(parse_pose_text(&text2).is_err());
    }

    #[test]
    fn rejects_wrong_arity_with_line_number() {
        let text = format!("{HEADER}1 2 3 4 5 6 7 8 9\n1 2 3\n");
        match parse_pose_text(&text) {
            Err(GaitError::Parse { line, .. }) => assert_eq!(line, 6),
            other => panic!("expected parse error, got {:?}", other),
        }
    }

    #[test]
    fn accepts_commas_and_comments() {
        let text = "# exam\nfps 25\nn_joints 3\nlayout hip_left=0 hip_right=1 neck=2\nsubject_id s1\nlabel 3\n1,2,3, 4,5,6, 7,8,9\n1 2 3 4 5 6 7 8 12\n";
        let pf = parse_pose_text(text).unwrap();
        assert_eq!(pf.seq.len(), 2);
        assert_eq!(pf.seq.label, Some(3));
        assert_eq!(pf.seq.frames[1].joints[2].z, 12.0);
    }

    #[test]
    fn missing_header_is_an_error() {
        let text = "fps 30\nn_joints 3\nsubject_id a\n1 2 3 4 5 6 7 8 9\n";
        assert!(parse_pose_text(text).is_err());
    }

    #[test]
    fn layout_must_be_in_range() {
        let text = "fps 30\nn_joints 3\nlayout hip_left=0 hip_right=1 neck=5\nsubject_id a\n1 2 3 4 5 6 7 8 9\n";
        assert!(parse_pose_text(text).is_err());
    }
}
