//! Constant-velocity Kalman filter over bounding boxes.
//!
//! State is `(u, v, s, r, du, dv, ds)`: box center, area, aspect ratio, and
//! the velocities of the first three. Aspect ratio is modeled as constant.

use super::BoundingBox;

const DIM: usize = 7;
const OBS: usize = 4;

type Mat = [[f64; DIM]; DIM];

// Process noise: unit on the observed states, small on velocities,
// smaller still on area velocity.
const PROCESS_NOISE: [f64; DIM] = [1.0, 1.0, 1.0, 1.0, 1e-2, 1e-2, 1e-4];
// Measurement noise: center is trusted more than area/aspect.
const MEASUREMENT_NOISE: [f64; OBS] = [1.0, 1.0, 10.0, 10.0];
// Initial variance: moderate on observed states, large on unobserved velocities.
const INIT_VARIANCE: [f64; DIM] = [10.0, 10.0, 10.0, 10.0, 1e4, 1e4, 1e4];

/// Kalman state for one tracked box.
#[derive(Debug, Clone, PartialEq)]
pub struct KalmanBoxState {
    /// State mean `(u, v, s, r, du, dv, ds)`.
    pub x: [f64; DIM],
    /// State covariance; kept symmetric by construction.
    pub p: Mat,
}

fn measurement(b: &BoundingBox) -> [f64; OBS] {
    let w = b.x2 - b.x1;
    let h = b.y2 - b.y1;
    [
        (b.x1 + b.x2) / 2.0,
        (b.y1 + b.y2) / 2.0,
        w * h,
        w / h,
    ]
}

fn symmetrize(p: &mut Mat) {
    for i in 0..DIM {
        for j in (i + 1)..DIM {
            let m = (p[i][j] + p[j][i]) / 2.0;
            p[i][j] = m;
            p[j][i] = m;
        }
    }
}

/// Invert a 4x4 matrix by Gauss-Jordan elimination with partial pivoting.
fn invert4(a: [[f64; OBS]; OBS]) -> [[f64; OBS]; OBS] {
    let mut aug = [[0.0; 2 * OBS]; OBS];
    for i in 0..OBS {
        aug[i][..OBS].copy_from_slice(&a[i]);
        aug[i][OBS + i] = 1.0;
    }
    for col in 0..OBS {
        let pivot = (col..OBS)
            .max_by(|&i, &j| aug[i][col].abs().total_cmp(&aug[j][col].abs()))
            .unwrap();
        aug.swap(col, pivot);
        let d = aug[col][col];
        debug_assert!(d.abs() > 0.0, "singular innovation covariance");
        for v in aug[col].iter_mut() {
            *v /= d;
        }
        for row in 0..OBS {
            if row != col {
                let f = aug[row][col];
                if f != 0.0 {
                    for k in 0..2 * OBS {
                        aug[row][k] -= f * aug[col][k];
                    }
                }
            }
        }
    }
    let mut inv = [[0.0; OBS]; OBS];
    for i in 0..OBS {
        inv[i].copy_from_slice(&aug[i][OBS..]);
    }
    inv
}

impl KalmanBoxState {
    /// Initializes a state from a first detection with zero velocities.
    pub fn from_box(b: &BoundingBox) -> Self {
        let z = measurement(b);
        let mut x = [0.0; DIM];
        x[..OBS].copy_from_slice(&z);
        let mut p = [[0.0; DIM]; DIM];
        for i in 0..DIM {
            p[i][i] = INIT_VARIANCE[i];
        }
        KalmanBoxState { x, p }
    }

    /// Advances the state one frame under the constant-velocity model.
    pub fn predict(&mut self) {
        // keep the area positive: freeze area velocity if it would go negative
        if self.x[2] + self.x[6] <= 0.0 {
            self.x[6] = 0.0;
        }
        self.x[0] += self.x[4];
        self.x[1] += self.x[5];
        self.x[2] += self.x[6];

        // P = F P F' + Q with F = I + shift(4->0, 5->1, 6->2)
        let p = self.p;
        let mut fp = p;
        for j in 0..DIM {
            fp[0][j] += p[4][j];
            fp[1][j] += p[5][j];
            fp[2][j] += p[6][j];
        }
        let mut next = fp;
        for i in 0..DIM {
            next[i][0] += fp[i][4];
            next[i][1] += fp[i][5];
            next[i][2] += fp[i][6];
        }
        for i in 0..DIM {
            next[i][i] += PROCESS_NOISE[i];
        }
        symmetrize(&mut next);
        self.p = next;
    }

    /// Folds one measurement into the state.
    pub fn update(&mut self, b: &BoundingBox) {
        let z = measurement(b);

        // Innovation; H selects the first four state components.
        let mut y = [0.0; OBS];
        for i in 0..OBS {
            y[i] = z[i] - self.x[i];
        }

        // S = HPH' + R is the top-left 4x4 block of P plus R.
        let mut s = [[0.0; OBS]; OBS];
        for i in 0..OBS {
            for j in 0..OBS {
                s[i][j] = self.p[i][j];
            }
            s[i][i] += MEASUREMENT_NOISE[i];
        }
        let s_inv = invert4(s);

        // K = P H' S^-1 (DIM x OBS); P H' is the first four columns of P.
        let mut k = [[0.0; OBS]; DIM];
        for i in 0..DIM {
            for j in 0..OBS {
                let mut acc = 0.0;
                for l in 0..OBS {
                    acc += self.p[i][l] * s_inv[l][j];
                }
                k[i][j] = acc;
            }
        }

        for i in 0..DIM {
            let mut acc = 0.0;
            for j in 0..OBS {
                acc += k[i][j] * y[j];
            }
            self.x[i] += acc;
        }

        // P = (I - K H) P; K H only touches the first four columns.
        let p = self.p;
        let mut next = p;
        for i in 0..DIM {
            for j in 0..DIM {
                let mut acc = 0.0;
                for l in 0..OBS {
                    acc += k[i][l] * p[l][j];
                }
                next[i][j] -= acc;
            }
        }
        symmetrize(&mut next);
        self.p = next;
    }

    /// Converts the state mean back to a box. `score` is carried through
    /// unchanged since the filter does not model it.
    pub fn to_box(&self, score: f64) -> BoundingBox {
        let s = self.x[2].max(f64::EPSILON);
        let r = self.x[3].max(f64::EPSILON);
        let w = (s * r).sqrt();
        let h = s / w;
        BoundingBox {
            x1: self.x[0] - w / 2.0,
            y1: self.x[1] - h / 2.0,
            x2: self.x[0] + w / 2.0,
            y2: self.x[1] + h / 2.0,
            score,
        }
    }
}
