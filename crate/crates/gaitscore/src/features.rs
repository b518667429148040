//! Location/viewpoint-robust input features.
//!
//! Two representations are computed per clip: joint-collection distances
//! (per-frame pairwise Euclidean distances between all joints, upper
//! triangle flattened) and two-scale motion (frame differences at stride 1
//! and stride 2). Distances are invariant to rigid motion of the whole
//! skeleton; frame differences are invariant to any constant offset.

use crate::error::{GaitError, Result};
use crate::pose::Clip;

/// Flattened upper-triangular pairwise distance vector for one frame.
pub type JcdFrame = Vec<f64>;
/// Per-joint 3D displacement vectors for one motion step.
pub type MotionFrame = Vec<[f64; 3]>;

/// The three network input branches for one clip.
#[derive(Debug, Clone, PartialEq)]
pub struct FeatureTensor {
    /// K frames of pairwise distances, each of length `n*(n-1)/2`.
    pub jcd: Vec<JcdFrame>,
    /// K-1 stride-1 displacement frames.
    pub slow: Vec<MotionFrame>,
    /// Stride-2 displacements sampled at every other frame;
    /// `floor((K-1)/2)` entries.
    pub fast: Vec<MotionFrame>,
}

impl FeatureTensor {
    pub fn n_frames(&self) -> usize {
        self.jcd.len()
    }

    pub fn jcd_dim(&self) -> usize {
        self.jcd.first().map_or(0, |f| f.len())
    }

    pub fn n_joints(&self) -> usize {
        self.slow.first().map_or(0, |f| f.len())
    }
}

/// Number of joint pairs for `n` joints.
pub fn pair_count(n: usize) -> usize {
    n * (n - 1) / 2
}

/// Per-frame pairwise joint distances, upper triangle (i < j) flattened in
/// row-major pair order: (0,1), (0,2), ..., (0,n-1), (1,2), ...
pub fn jcd(clip: &Clip) -> Vec<JcdFrame> {
    let n = clip.n_joints();
    clip.frames
        .iter()
        .map(|frame| {
            let mut row = Vec::with_capacity(pair_count(n));
            for i in 0..n {
                for j in (i + 1)..n {
                    row.push(frame.joints[i].dist(&frame.joints[j]));
                }
            }
            row
        })
        .collect()
}

/// Two-scale motion: `slow[k] = S_{k+1} - S_k` for every frame, and
/// `fast[k] = S_{k+2} - S_k` for every other frame starting at the first.
pub fn motion(clip: &Clip) -> Result<(Vec<MotionFrame>, Vec<MotionFrame>)> {
    let k = clip.len();
    if k < 3 {
        return Err(GaitError::TooShort { got: k, min: 3 });
    }
    let diff = |a: usize, b: usize| -> MotionFrame {
        clip.frames[b]
            .joints
            .iter()
            .zip(&clip.frames[a].joints)
            .map(|(jb, ja)| [jb.x - ja.x, jb.y - ja.y, jb.z - ja.z])
            .collect()
    };
    let slow: Vec<MotionFrame> = (0..k - 1).map(|t| diff(t, t + 1)).collect();
    let fast: Vec<MotionFrame> = (0..(k - 1) / 2).map(|t| diff(2 * t, 2 * t + 2)).collect();
    Ok((slow, fast))
}

/// Computes all feature branches for a clip.
pub fn extract(clip: &Clip) -> Result<FeatureTensor> {
    let (slow, fast) = motion(clip)?;
    Ok(FeatureTensor {
        jcd: jcd(clip),
        slow,
        fast,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::pose::{Clip, Joint3D, PoseFrame};
    use crate::rng;

    fn clip_from(frames: Vec<Vec<[f64; 3]>>) -> Clip {
        Clip {
            frames: frames
                .into_iter()
                .map(|js| {
                    PoseFrame::new(js.into_iter().map(|p| Joint3D::new(p[0], p[1], p[2])).collect())
                })
                .collect(),
            subject_id: "t".into(),
            label: Some(0),
        }
    }

    fn random_clip(rng: &mut rand_chacha::ChaCha8Rng, k: usize, n: usize) -> Clip {
        clip_from(
            (0..k)
                .map(|_| {
                    (0..n)
                        .map(|_| {
                            [
                                rng::uniform(rng, -1.0, 1.0),
                                rng::uniform(rng, -1.0, 1.0),
                                rng::uniform(rng, -1.0, 1.0),
                            ]
                        })
                        .collect()
                })
                .collect(),
        )
    }

    /// Rotation matrix about an arbitrary axis (Rodrigues form).
    fn rotation(axis: [f64; 3], angle: f64) -> [[f64; 3]; 3] {
        let norm = (axis[0].powi(2) + axis[1].powi(2) + axis[2].powi(2)).sqrt();
        let (x, y, z) = (axis[0] / norm, axis[1] / norm, axis[2] / norm);
        let (s, c) = angle.sin_cos();
        let t = 1.0 - c;
        [
            [t * x * x + c, t * x * y - s * z, t * x * z + s * y],
            [t * x * y + s * z, t * y * y + c, t * y * z - s * x],
            [t * x * z - s * y, t * y * z + s * x, t * z * z + c],
        ]
    }

    fn transform(clip: &Clip, r: &[[f64; 3]; 3], t: [f64; 3]) -> Clip {
        Clip {
            frames: clip
                .frames
                .iter()
                .map(|f| {
                    PoseFrame::new(
                        f.joints
                            .iter()
                            .map(|j| {
                                Joint3D::new(
                                    r[0][0] * j.x + r[0][1] * j.y + r[0][2] * j.z + t[0],
                                    r[1][0] * j.x + r[1][1] * j.y + r[1][2] * j.z + t[1],
                                    r[2][0] * j.x + r[2][1] * j.y + r[2][2] * j.z + t[2],
                                )
                            })
                            .collect(),
                    )
                })
                .collect(),
            subject_id: clip.subject_id.clone(),
            label: clip.label,
        }
    }

    #[test]
    fn coincident_joints_give_zero() {
        let clip = clip_from(vec![vec![[1.0, 2.0, 3.0]; 5]; 4]);
        for row in jcd(&clip) {
            assert_eq!(row.len(), pair_count(5));
            assert!(row.iter().all(|&d| d == 0.0));
        }
    }

    #[test]
    fn jcd_dim_for_24_joints() {
        assert_eq!(pair_count(24), 276);
        let clip = clip_from(vec![vec![[0.0; 3]; 24]; 3]);
        assert_eq!(jcd(&clip)[0].len(), 276);
    }

    #[test]
    fn three_four_five_triangle() {
        let clip = clip_from(vec![vec![[0.0, 0.0, 0.0], [3.0, 4.0, 0.0]]]);
        assert_eq!(jcd(&clip)[0], vec![5.0]);
    }

    #[test]
    fn pair_order_is_row_major() {
        // joints on a line at x = 0, 1, 3: pairs (0,1)=1, (0,2)=3, (1,2)=2
        let clip = clip_from(vec![vec![[0.0, 0.0, 0.0], [1.0, 0.0, 0.0], [3.0, 0.0, 0.0]]]);
        assert_eq!(jcd(&clip)[0], vec![1.0, 3.0, 2.0]);
    }

    #[test]
    fn static_clip_has_zero_motion() {
        let clip = clip_from(vec![vec![[1.0, 2.0, 3.0], [4.0, 5.0, 6.0]]; 10]);
        let (slow, fast) = motion(&clip).unwrap();
        assert!(slow.iter().flatten().flatten().all(|&v| v == 0.0));
        assert!(fast.iter().flatten().flatten().all(|&v| v == 0.0));
    }

    #[test]
    fn uniform_translation_motion() {
        let k = 12;
        let frames: Vec<Vec<[f64; 3]>> = (0..k)
            .map(|t| vec![[t as f64, 0.0, 0.0], [t as f64 + 5.0, 1.0, 2.0]])
            .collect();
        let clip = clip_from(frames);
        let (slow, fast) = motion(&clip).unwrap();
        for frame in &slow {
            for d in frame {
                assert_eq!(*d, [1.0, 0.0, 0.0]);
            }
        }
        for frame in &fast {
            for d in frame {
                assert_eq!(*d, [2.0, 0.0, 0.0]);
            }
        }
    }

    #[test]
    fn motion_lengths_for_k200() {
        let mut rng = rng::stream(1, "motion_len", 0);
        let clip = random_clip(&mut rng, 200, 4);
        let (slow, fast) = motion(&clip).unwrap();
        assert_eq!(slow.len(), 199);
        assert_eq!(fast.len(), 99);
    }

    #[test]
    fn motion_too_short() {
        let clip = clip_from(vec![vec![[0.0; 3]; 2]; 2]);
        assert!(matches!(
            motion(&clip),
            Err(GaitError::TooShort { got: 2, min: 3 })
        ));
    }

    #[test]
    fn jcd_invariant_under_rigid_transforms() {
        let mut rng = rng::stream(99, "jcd_inv", 0);
        let clip = random_clip(&mut rng, 8, 6);
        let base = jcd(&clip);
        for _ in 0..200 {
            let axis = [
                rng::uniform(&mut rng, -1.0, 1.0),
                rng::uniform(&mut rng, -1.0, 1.0),
                rng::uniform(&mut rng, -1.0, 1.0),
            ];
            let angle = rng::uniform(&mut rng, 0.0, std::f64::consts::TAU);
            let t = [
                rng::uniform(&mut rng, -100.0, 100.0),
                rng::uniform(&mut rng, -100.0, 100.0),
                rng::uniform(&mut rng, -100.0, 100.0),
            ];
            let moved = transform(&clip, &rotation(axis, angle), t);
            for (a, b) in base.iter().zip(jcd(&moved)) {
                for (x, y) in a.iter().zip(b) {
                    assert!((x - y).abs() < 1e-9, "distance changed: {} vs {}", x, y);
                }
            }
        }
    }

    #[test]
    fn motion_invariant_under_constant_offset() {
        let mut rng = rng::stream(5, "motion_offset", 0);
        let clip = random_clip(&mut rng, 10, 5);
        let (slow_a, fast_a) = motion(&clip).unwrap();
        let moved = transform(
            &clip,
            &rotation([0.0, 0.0, 1.0], 0.0),
            [17.0, -4.0, 256.0],
        );
        let (slow_b, fast_b) = motion(&moved).unwrap();
        for (fa, fb) in slow_a.iter().zip(&slow_b).chain(fast_a.iter().zip(&fast_b)) {
            for (da, db) in fa.iter().zip(fb) {
                for c in 0..3 {
                    assert!((da[c] - db[c]).abs() < 1e-12);
                }
            }
        }
    }

    #[test]
    fn jcd_triangle_inequality() {
        let mut rng = rng::stream(12, "jcd_tri", 0);
        let n = 6;
        let clip = random_clip(&mut rng, 5, n);
        let feats = jcd(&clip);
        let idx = |i: usize, j: usize| -> usize {
            // flattened upper-triangle index for i < j
            i * n - i * (i + 1) / 2 + (j - i - 1)
        };
        for row in &feats {
            for a in 0..n {
                for b in (a + 1)..n {
                    for c in (b + 1)..n {
                        let ab = row[idx(a, b)];
                        let bc = row[idx(b, c)];
                        let ac = row[idx(a, c)];
                        assert!(ab + bc >= ac - 1e-12);
                        assert!(ab + ac >= bc - 1e-12);
                        assert!(ac + bc >= ab - 1e-12);
                    }
                }
            }
        }
    }

    #[test]
    fn reversed_clip_negates_reversed_slow_motion() {
        let mut rng = rng::stream(21, "motion_rev", 0);
        let clip = random_clip(&mut rng, 9, 4);
        let mut rev = clip.clone();
        rev.frames.reverse();
        let (slow, _) = motion(&clip).unwrap();
        let (slow_rev, _) = motion(&rev).unwrap();
        let n = slow.len();
        for t in 0..n {
            for (a, b) in slow_rev[t].iter().zip(&slow[n - 1 - t]) {
                for c in 0..3 {
                    assert_eq!(a[c], -b[c]);
                }
            }
        }
    }
}
