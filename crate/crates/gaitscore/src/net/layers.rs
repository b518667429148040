//! Building blocks of the temporal classifier.
//!
//! Activations live in [`Mat`], a time-major matrix (one row per frame).
//! Every layer comes as a forward/backward pair; backward consumes the
//! cached forward inputs and the upstream gradient.

/// Dense row-major matrix; rows index time, columns index channels.
#[derive(Debug, Clone, PartialEq)]
pub struct Mat {
    pub t: usize,
    pub c: usize,
    pub data: Vec<f64>,
}

impl Mat {
    pub fn zeros(t: usize, c: usize) -> Self {
        Mat {
            t,
            c,
            data: vec![0.0; t * c],
        }
    }

    pub fn from_rows(rows: Vec<Vec<f64>>) -> Self {
        let t = rows.len();
        let c = rows.first().map_or(0, |r| r.len());
        debug_assert!(rows.iter().all(|r| r.len() == c));
        Mat {
            t,
            c,
            data: rows.into_iter().flatten().collect(),
        }
    }

    #[inline]
    pub fn row(&self, i: usize) -> &[f64] {
        &self.data[i * self.c..(i + 1) * self.c]
    }

    #[inline]
    pub fn row_mut(&mut self, i: usize) -> &mut [f64] {
        &mut self.data[i * self.c..(i + 1) * self.c]
    }

    /// Keeps only the first `t` rows.
    pub fn truncated(&self, t: usize) -> Mat {
        debug_assert!(t <= self.t);
        Mat {
            t,
            c: self.c,
            data: self.data[..t * self.c].to_vec(),
        }
    }
}

/// A named parameter tensor with an explicit shape.
#[derive(Debug, Clone, PartialEq)]
pub struct Tensor {
    pub shape: Vec<usize>,
    pub data: Vec<f64>,
}

impl Tensor {
    pub fn zeros(shape: Vec<usize>) -> Self {
        let n = shape.iter().product();
        Tensor {
            shape,
            data: vec![0.0; n],
        }
    }

    pub fn numel(&self) -> usize {
        self.data.len()
    }
}

/// Temporal convolution with symmetric zero padding; output length equals
/// input length. Weights are `[kernel, c_in, c_out]`, bias `[c_out]`.
pub fn conv1d_forward(x: &Mat, w: &Tensor, b: &Tensor) -> Mat {
    let (k, c_in, c_out) = (w.shape[0], w.shape[1], w.shape[2]);
    debug_assert_eq!(x.c, c_in);
    debug_assert_eq!(b.data.len(), c_out);
    let pad = (k - 1) / 2;
    let mut out = Mat::zeros(x.t, c_out);
    for t in 0..x.t {
        let orow = out.row_mut(t);
        orow.copy_from_slice(&b.data);
        for kk in 0..k {
            let src = t + kk;
            if src < pad || src - pad >= x.t {
                continue;
            }
            let xrow = x.row(src - pad);
            let wk = &w.data[kk * c_in * c_out..(kk + 1) * c_in * c_out];
            for (wrow, &xv) in wk.chunks_exact(c_out).zip(xrow) {
                for (o, wv) in orow.iter_mut().zip(wrow) {
                    *o += xv * wv;
                }
            }
        }
    }
    out
}

/// Gradients of [`conv1d_forward`]. Returns `(dx, dw, db)`; `dx` is skipped
/// when `need_dx` is false (the first layer of each branch).
pub fn conv1d_backward(
    x: &Mat,
    w: &Tensor,
    dout: &Mat,
    need_dx: bool,
) -> (Option<Mat>, Tensor, Tensor) {
    let (k, c_in, c_out) = (w.shape[0], w.shape[1], w.shape[2]);
    let pad = (k - 1) / 2;
    let mut dx = if need_dx {
        Some(Mat::zeros(x.t, c_in))
    } else {
        None
    };
    let mut dw = Tensor::zeros(w.shape.clone());
    let mut db = Tensor::zeros(vec![c_out]);

    for t in 0..dout.t {
        let drow = dout.row(t);
        for (dbv, dv) in db.data.iter_mut().zip(drow) {
            *dbv += dv;
        }
        for kk in 0..k {
            let src = t + kk;
            if src < pad || src - pad >= x.t {
                continue;
            }
            let xi = src - pad;
            let xrow = x.row(xi);
            let dwk = &mut dw.data[kk * c_in * c_out..(kk + 1) * c_in * c_out];
            for (dwrow, &xv) in dwk.chunks_exact_mut(c_out).zip(xrow) {
                for (dwv, dv) in dwrow.iter_mut().zip(drow) {
                    *dwv += xv * dv;
                }
            }
            if let Some(dx) = dx.as_mut() {
                let wk = &w.data[kk * c_in * c_out..(kk + 1) * c_in * c_out];
                let dxrow = dx.row_mut(xi);
                for (wrow, dxv) in wk.chunks_exact(c_out).zip(dxrow.iter_mut()) {
                    let mut acc = 0.0;
                    for (wv, dv) in wrow.iter().zip(drow) {
                        acc += wv * dv;
                    }
                    *dxv += acc;
                }
            }
        }
    }
    (dx, dw, db)
}

/// Leaky rectifier, elementwise.
pub fn leaky_relu_forward(z: &Mat, slope: f64) -> Mat {
    Mat {
        t: z.t,
        c: z.c,
        data: z
            .data
            .iter()
            .map(|&v| if v >= 0.0 { v } else { slope * v })
            .collect(),
    }
}

/// Backward through the rectifier given the cached pre-activation `z`.
pub fn leaky_relu_backward(z: &Mat, dout: &Mat, slope: f64) -> Mat {
    debug_assert_eq!(z.data.len(), dout.data.len());
    Mat {
        t: z.t,
        c: z.c,
        data: z
            .data
            .iter()
            .zip(&dout.data)
            .map(|(&v, &d)| if v >= 0.0 { d } else { slope * d })
            .collect(),
    }
}

/// Temporal max-pool with window and stride 2 (floor). Inputs shorter than
/// two frames pass through unchanged. `winners` records the source row of
/// each output element for the backward pass.
pub fn maxpool2_forward(x: &Mat) -> (Mat, Vec<u32>) {
    if x.t < 2 {
        let winners = (0..x.t * x.c).map(|i| (i / x.c) as u32).collect();
        return (x.clone(), winners);
    }
    let out_t = x.t / 2;
    let mut out = Mat::zeros(out_t, x.c);
    let mut winners = vec![0u32; out_t * x.c];
    for t in 0..out_t {
        let a = x.row(2 * t);
        let b = x.row(2 * t + 1);
        let orow = out.row_mut(t);
        let wrow = &mut winners[t * x.c..(t + 1) * x.c];
        for ci in 0..x.c {
            if b[ci] > a[ci] {
                orow[ci] = b[ci];
                wrow[ci] = (2 * t + 1) as u32;
            } else {
                orow[ci] = a[ci];
                wrow[ci] = (2 * t) as u32;
            }
        }
    }
    (out, winners)
}

pub fn maxpool2_backward(in_t: usize, c: usize, winners: &[u32], dout: &Mat) -> Mat {
    let mut dx = Mat::zeros(in_t, c);
    for t in 0..dout.t {
        let drow = dout.row(t);
        let wrow = &winners[t * c..(t + 1) * c];
        for ci in 0..c {
            dx.data[wrow[ci] as usize * c + ci] += drow[ci];
        }
    }
    dx
}

/// Global average pool over time.
pub fn gap_forward(x: &Mat) -> Vec<f64> {
    let mut out = vec![0.0; x.c];
    for t in 0..x.t {
        for (o, v) in out.iter_mut().zip(x.row(t)) {
            *o += v;
        }
    }
    let inv = 1.0 / x.t as f64;
    for o in out.iter_mut() {
        *o *= inv;
    }
    out
}

pub fn gap_backward(in_t: usize, dout: &[f64]) -> Mat {
    let mut dx = Mat::zeros(in_t, dout.len());
    let inv = 1.0 / in_t as f64;
    for t in 0..in_t {
        for (d, g) in dx.row_mut(t).iter_mut().zip(dout) {
            *d = g * inv;
        }
    }
    dx
}

/// Fully connected layer; weights `[c_in, c_out]`.
pub fn dense_forward(x: &[f64], w: &Tensor, b: &Tensor) -> Vec<f64> {
    let (c_in, c_out) = (w.shape[0], w.shape[1]);
    debug_assert_eq!(x.len(), c_in);
    let mut out = b.data.clone();
    for (ci, &xv) in x.iter().enumerate() {
        let wrow = &w.data[ci * c_out..(ci + 1) * c_out];
        for (o, wv) in out.iter_mut().zip(wrow) {
            *o += xv * wv;
        }
    }
    out
}

pub fn dense_backward(x: &[f64], w: &Tensor, dout: &[f64]) -> (Vec<f64>, Tensor, Tensor) {
    let (c_in, c_out) = (w.shape[0], w.shape[1]);
    let mut dx = vec![0.0; c_in];
    let mut dw = Tensor::zeros(w.shape.clone());
    for ci in 0..c_in {
        let wrow = &w.data[ci * c_out..(ci + 1) * c_out];
        let dwrow = &mut dw.data[ci * c_out..(ci + 1) * c_out];
        let mut acc = 0.0;
        for ((wv, dwv), dv) in wrow.iter().zip(dwrow.iter_mut()).zip(dout) {
            acc += wv * dv;
            *dwv += x[ci] * dv;
        }
        dx[ci] = acc;
    }
    let db = Tensor {
        shape: vec![c_out],
        data: dout.to_vec(),
    };
    (dx, dw, db)
}

/// Numerically stable softmax.
pub fn softmax(z: &[f64]) -> Vec<f64> {
    let m = z.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    let e: Vec<f64> = z.iter().map(|v| (v - m).exp()).collect();
    let s: f64 = e.iter().sum();
    e.into_iter().map(|v| v / s).collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng;
    use rand_chacha::ChaCha8Rng;

    const FD_H: f64 = 1e-5;
    const FD_TOL: f64 = 1e-6;

    fn rand_mat(rng: &mut ChaCha8Rng, t: usize, c: usize) -> Mat {
        Mat {
            t,
            c,
            data: (0..t * c).map(|_| rng::uniform(rng, -1.0, 1.0)).collect(),
        }
    }

    fn rand_tensor(rng: &mut ChaCha8Rng, shape: Vec<usize>) -> Tensor {
        let n: usize = shape.iter().product();
        Tensor {
            shape,
            data: (0..n).map(|_| rng::uniform(rng, -1.0, 1.0)).collect(),
        }
    }

    fn close(a: f64, b: f64) -> bool {
        (a - b).abs() / a.abs().max(b.abs()).max(1e-3) < FD_TOL
    }

    /// Scalar objective: random linear functional of the layer output.
    fn weighted_sum(out: &Mat, coef: &[f64]) -> f64 {
        out.data.iter().zip(coef).map(|(a, b)| a * b).sum()
    }

    #[test]
    fn conv1d_fd_check() {
        let mut rng = rng::stream(1, "conv_fd", 0);
        for k in [1usize, 3] {
            let (t, c_in, c_out) = (6, 4, 3);
            let x = rand_mat(&mut rng, t, c_in);
            let w = rand_tensor(&mut rng, vec![k, c_in, c_out]);
            let b = rand_tensor(&mut rng, vec![c_out]);
            let coef: Vec<f64> = (0..t * c_out).map(|_| rng::uniform(&mut rng, -1.0, 1.0)).collect();

            let dout = Mat {
                t,
                c: c_out,
                data: coef.clone(),
            };
            let (dx, dw, db) = conv1d_backward(&x, &w, &dout, true);
            let dx = dx.unwrap();

            let loss = |x: &Mat, w: &Tensor, b: &Tensor| -> f64 {
                weighted_sum(&conv1d_forward(x, w, b), &coef)
            };
            for i in 0..x.data.len() {
                let mut xp = x.clone();
                xp.data[i] += FD_H;
                let mut xm = x.clone();
                xm.data[i] -= FD_H;
                let fd = (loss(&xp, &w, &b) - loss(&xm, &w, &b)) / (2.0 * FD_H);
                assert!(close(dx.data[i], fd), "k={} dx[{}]: {} vs {}", k, i, dx.data[i], fd);
            }
            for i in 0..w.data.len() {
                let mut wp = w.clone();
                wp.data[i] += FD_H;
                let mut wm = w.clone();
                wm.data[i] -= FD_H;
                let fd = (loss(&x, &wp, &b) - loss(&x, &wm, &b)) / (2.0 * FD_H);
                assert!(close(dw.data[i], fd), "k={} dw[{}]: {} vs {}", k, i, dw.data[i], fd);
            }
            for i in 0..b.data.len() {
                let mut bp = b.clone();
                bp.data[i] += FD_H;
                let mut bm = b.clone();
                bm.data[i] -= FD_H;
                let fd = (loss(&x, &w, &bp) - loss(&x, &w, &bm)) / (2.0 * FD_H);
                assert!(close(db.data[i], fd), "k={} db[{}]", k, i);
            }
        }
    }

    #[test]
    fn conv1d_padding_keeps_length() {
        let mut rng = rng::stream(2, "conv_len", 0);
        let x = rand_mat(&mut rng, 7, 3);
        let w = rand_tensor(&mut rng, vec![3, 3, 5]);
        let b = rand_tensor(&mut rng, vec![5]);
        let out = conv1d_forward(&x, &w, &b);
        assert_eq!(out.t, 7);
        assert_eq!(out.c, 5);
    }

    #[test]
    fn leaky_relu_fd_check() {
        let mut rng = rng::stream(3, "lrelu_fd", 0);
        let z = rand_mat(&mut rng, 4, 5);
        let coef: Vec<f64> = (0..20).map(|_| rng::uniform(&mut rng, -1.0, 1.0)).collect();
        let dout = Mat {
            t: 4,
            c: 5,
            data: coef.clone(),
        };
        let dz = leaky_relu_backward(&z, &dout, 0.1);
        for i in 0..z.data.len() {
            let mut zp = z.clone();
            zp.data[i] += FD_H;
            let mut zm = z.clone();
            zm.data[i] -= FD_H;
            let fd = (weighted_sum(&leaky_relu_forward(&zp, 0.1), &coef)
                - weighted_sum(&leaky_relu_forward(&zm, 0.1), &coef))
                / (2.0 * FD_H);
            assert!(close(dz.data[i], fd), "dz[{}]: {} vs {}", i, dz.data[i], fd);
        }
    }

    #[test]
    fn maxpool_fd_check() {
        let mut rng = rng::stream(4, "pool_fd", 0);
        let x = rand_mat(&mut rng, 7, 3);
        let (out, winners) = maxpool2_forward(&x);
        assert_eq!(out.t, 3);
        let coef: Vec<f64> = (0..out.data.len()).map(|_| rng::uniform(&mut rng, -1.0, 1.0)).collect();
        let dout = Mat {
            t: out.t,
            c: out.c,
            data: coef.clone(),
        };
        let dx = maxpool2_backward(x.t, x.c, &winners, &dout);
        for i in 0..x.data.len() {
            let mut xp = x.clone();
            xp.data[i] += FD_H;
            let mut xm = x.clone();
            xm.data[i] -= FD_H;
            let fd = (weighted_sum(&maxpool2_forward(&xp).0, &coef)
                - weighted_sum(&maxpool2_forward(&xm).0, &coef))
                / (2.0 * FD_H);
            assert!(close(dx.data[i], fd), "dx[{}]: {} vs {}", i, dx.data[i], fd);
        }
    }

    #[test]
    fn maxpool_passthrough_below_two_frames() {
        let mut rng = rng::stream(5, "pool_short", 0);
        let x = rand_mat(&mut rng, 1, 4);
        let (out, winners) = maxpool2_forward(&x);
        assert_eq!(out, x);
        assert_eq!(winners, vec![0, 0, 0, 0]);
        let dout = rand_mat(&mut rng, 1, 4);
        let dx = maxpool2_backward(1, 4, &winners, &dout);
        assert_eq!(dx, dout);
    }

    #[test]
    fn gap_fd_check() {
        let mut rng = rng::stream(6, "gap_fd", 0);
        let x = rand_mat(&mut rng, 5, 3);
        let coef: Vec<f64> = (0..3).map(|_| rng::uniform(&mut rng, -1.0, 1.0)).collect();
        let dx = gap_backward(x.t, &coef);
        let loss = |x: &Mat| -> f64 {
            gap_forward(x).iter().zip(&coef).map(|(a, b)| a * b).sum()
        };
        for i in 0..x.data.len() {
            let mut xp = x.clone();
            xp.data[i] += FD_H;
            let mut xm = x.clone();
            xm.data[i] -= FD_H;
            let fd = (loss(&xp) - loss(&xm)) / (2.0 * FD_H);
            assert!(close(dx.data[i], fd));
        }
    }

    #[test]
    fn dense_fd_check() {
        let mut rng = rng::stream(7, "dense_fd", 0);
        let x: Vec<f64> = (0..6).map(|_| rng::uniform(&mut rng, -1.0, 1.0)).collect();
        let w = rand_tensor(&mut rng, vec![6, 4]);
        let b = rand_tensor(&mut rng, vec![4]);
        let coef: Vec<f64> = (0..4).map(|_| rng::uniform(&mut rng, -1.0, 1.0)).collect();
        let (dx, dw, db) = dense_backward(&x, &w, &coef);
        let loss = |x: &[f64], w: &Tensor, b: &Tensor| -> f64 {
            dense_forward(x, w, b).iter().zip(&coef).map(|(a, c)| a * c).sum()
        };
        for i in 0..x.len() {
            let mut xp = x.clone();
            xp[i] += FD_H;
            let mut xm = x.clone();
            xm[i] -= FD_H;
            let fd = (loss(&xp, &w, &b) - loss(&xm, &w, &b)) / (2.0 * FD_H);
            assert!(close(dx[i], fd));
        }
        for i in 0..w.data.len() {
            let mut wp = w.clone();
            wp.data[i] += FD_H;
            let mut wm = w.clone();
            wm.data[i] -= FD_H;
            let fd = (loss(&x, &wp, &b) - loss(&x, &wm, &b)) / (2.0 * FD_H);
            assert!(close(dw.data[i], fd));
        }
        for i in 0..b.data.len() {
            let mut bp = b.clone();
            bp.data[i] += FD_H;
            let mut bm = b.clone();
            bm.data[i] -= FD_H;
            let fd = (loss(&x, &w, &bp) - loss(&x, &w, &bm)) / (2.0 * FD_H);
            assert!(close(db.data[i], fd));
        }
    }

    #[test]
    fn softmax_normalizes_and_shift_invariant() {
        let mut rng = rng::stream(8, "softmax", 0);
        for _ in 0..200 {
            let z: Vec<f64> = (0..4).map(|_| rng::uniform(&mut rng, -5.0, 5.0)).collect();
            let p = softmax(&z);
            assert!((p.iter().sum::<f64>() - 1.0).abs() < 1e-12);
            assert!(p.iter().all(|&v| v > 0.0));
            let shift = rng::uniform(&mut rng, -10.0, 10.0);
            let zs: Vec<f64> = z.iter().map(|v| v + shift).collect();
            for (a, b) in p.iter().zip(softmax(&zs)) {
                assert!((a - b).abs() < 1e-9);
            }
        }
    }
}
