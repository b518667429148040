//! The gait classifier: a small three-branch temporal convolutional network.
//!
//! Each feature branch (distances, slow motion, fast motion) is embedded by
//! a pointwise convolution followed by a kernel-3 convolution, both under a
//! leaky rectifier. The distance and slow branches are then max-pooled by 2
//! so all branches share the fast branch's time base, concatenated along
//! channels, and run through three conv/pool blocks. Global average pooling
//! and a dense layer produce one logit per severity class; softmax turns
//! the logits into probabilities.
//!
//! Forward and backward passes are written out by hand in 64-bit floats;
//! [`gradient_check`] verifies every parameter gradient against central
//! finite differences.

mod checkpoint;
mod gradcheck;
mod layers;
mod optim;
mod train;

pub use checkpoint::{load_checkpoint, save_checkpoint, Checkpoint};
pub use gradcheck::{gradient_check, GradCheckReport, TensorCheck};
pub use layers::{softmax, Mat, Tensor};
pub use optim::{adam_step, AdamState, ADAM_BETA1, ADAM_BETA2, ADAM_EPS};
pub use train::{lr_schedule, train, TrainConfig, TrainOutcome};

use crate::error::{GaitError, Result};
use crate::features::FeatureTensor;
use crate::rng;
use layers::{
    conv1d_backward, conv1d_forward, dense_backward, dense_forward, gap_backward, gap_forward,
    leaky_relu_backward, leaky_relu_forward, maxpool2_backward, maxpool2_forward,
};

/// Negative-side slope of the leaky rectifier.
pub const LRELU_SLOPE: f64 = 0.1;

/// Default number of filters per embedding branch.
pub const DEFAULT_FILTERS: usize = 32;

/// Architecture hyperparameters; everything else about the layer stack is
/// fixed.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct ModelSpec {
    pub n_joints: usize,
    pub filters: usize,
    pub n_classes: usize,
}

impl ModelSpec {
    pub fn new(n_joints: usize, filters: usize) -> Self {
        ModelSpec {
            n_joints,
            filters,
            n_classes: crate::NUM_CLASSES,
        }
    }

    /// Distance-branch input width: one entry per joint pair.
    pub fn jcd_dim(&self) -> usize {
        self.n_joints * (self.n_joints - 1) / 2
    }

    /// Motion-branch input width: xyz per joint.
    pub fn motion_dim(&self) -> usize {
        3 * self.n_joints
    }

    /// Parameter tensors in declared order: `(name, shape)`.
    pub fn tensor_shapes(&self) -> Vec<(&'static str, Vec<usize>)> {
        let f = self.filters;
        vec![
            ("jcd.embed1.w", vec![1, self.jcd_dim(), f]),
            ("jcd.embed1.b", vec![f]),
            ("jcd.embed2.w", vec![3, f, f]),
            ("jcd.embed2.b", vec![f]),
            ("slow.embed1.w", vec![1, self.motion_dim(), f]),
            ("slow.embed1.b", vec![f]),
            ("slow.embed2.w", vec![3, f, f]),
            ("slow.embed2.b", vec![f]),
            ("fast.embed1.w", vec![1, self.motion_dim(), f]),
            ("fast.embed1.b", vec![f]),
            ("fast.embed2.w", vec![3, f, f]),
            ("fast.embed2.b", vec![f]),
            ("backbone1.w", vec![3, 3 * f, 2 * f]),
            ("backbone1.b", vec![2 * f]),
            ("backbone2.w", vec![3, 2 * f, 2 * f]),
            ("backbone2.b", vec![2 * f]),
            ("backbone3.w", vec![3, 2 * f, 4 * f]),
            ("backbone3.b", vec![4 * f]),
            ("head.w", vec![4 * f, self.n_classes]),
            ("head.b", vec![self.n_classes]),
        ]
    }

    pub fn param_count(&self) -> usize {
        self.tensor_shapes()
            .iter()
            .map(|(_, s)| s.iter().product::<usize>())
            .sum()
    }

    /// Canonical description string; its hash guards checkpoints.
    pub fn canonical(&self) -> String {
        format!(
            "gaitscore.model.v1;n_joints={};filters={};classes={};slope={}",
            self.n_joints, self.filters, self.n_classes, LRELU_SLOPE
        )
    }

    pub fn spec_hash(&self) -> u64 {
        rng::fnv1a(self.canonical().as_bytes())
    }
}

/// All parameter tensors in declared order.
#[derive(Debug, Clone, PartialEq)]
pub struct Parameters {
    pub tensors: Vec<Tensor>,
}

impl Parameters {
    pub fn zeros(spec: &ModelSpec) -> Self {
        Parameters {
            tensors: spec
                .tensor_shapes()
                .into_iter()
                .map(|(_, shape)| Tensor::zeros(shape))
                .collect(),
        }
    }

    /// Fan-in-scaled uniform init for weights, zeros for biases. Draws
    /// happen in declared tensor order from one seeded stream.
    pub fn init(spec: &ModelSpec, seed: u64) -> Self {
        let mut rng = rng::stream(seed, "model_init", 0);
        let tensors = spec
            .tensor_shapes()
            .into_iter()
            .map(|(_, shape)| {
                let mut t = Tensor::zeros(shape.clone());
                if shape.len() > 1 {
                    let fan_in: usize = shape[..shape.len() - 1].iter().product();
                    let lim = 1.0 / (fan_in as f64).sqrt();
                    for v in t.data.iter_mut() {
                        *v = rng::uniform(&mut rng, -lim, lim);
                    }
                }
                t
            })
            .collect();
        Parameters { tensors }
    }

    pub fn param_count(&self) -> usize {
        self.tensors.iter().map(Tensor::numel).sum()
    }
}

/// Per-parameter gradients; mirrors [`Parameters`] exactly.
#[derive(Debug, Clone, PartialEq)]
pub struct Gradients {
    pub tensors: Vec<Tensor>,
}

impl Gradients {
    pub fn zeros(spec: &ModelSpec) -> Self {
        Gradients {
            tensors: Parameters::zeros(spec).tensors,
        }
    }

    pub fn add_assign(&mut self, other: &Gradients) {
        for (a, b) in self.tensors.iter_mut().zip(&other.tensors) {
            for (x, y) in a.data.iter_mut().zip(&b.data) {
                *x += y;
            }
        }
    }

    pub fn scale(&mut self, s: f64) {
        for t in self.tensors.iter_mut() {
            for v in t.data.iter_mut() {
                *v *= s;
            }
        }
    }
}

/// The classifier: spec plus parameters.
#[derive(Debug, Clone, PartialEq)]
pub struct Model {
    pub spec: ModelSpec,
    pub params: Parameters,
}

impl Model {
    pub fn init(spec: ModelSpec, seed: u64) -> Self {
        Model {
            params: Parameters::init(&spec, seed),
            spec,
        }
    }

    pub fn param_count(&self) -> usize {
        self.params.param_count()
    }
}

/// Feature branches flattened into time-major matrices, ready for the
/// network. Built once per clip and reused across epochs.
#[derive(Debug, Clone, PartialEq)]
pub struct NetInput {
    pub jcd: Mat,
    pub slow: Mat,
    pub fast: Mat,
}

impl NetInput {
    /// Flattens a [`FeatureTensor`]; motion frames become rows of
    /// `3 * n_joints` values in joint-major order.
    pub fn from_features(f: &FeatureTensor) -> Result<NetInput> {
        let k = f.jcd.len();
        if k < 3 {
            return Err(GaitError::TooShort { got: k, min: 3 });
        }
        if f.slow.len() != k - 1 {
            return Err(GaitError::shape("slow branch", k - 1, f.slow.len()));
        }
        if f.fast.len() != (k - 1) / 2 {
            return Err(GaitError::shape("fast branch", (k - 1) / 2, f.fast.len()));
        }
        let flatten = |frames: &[crate::features::MotionFrame]| -> Mat {
            Mat::from_rows(
                frames
                    .iter()
                    .map(|fr| fr.iter().flat_map(|d| d.iter().copied()).collect())
                    .collect(),
            )
        };
        Ok(NetInput {
            jcd: Mat::from_rows(f.jcd.clone()),
            slow: flatten(&f.slow),
            fast: flatten(&f.fast),
        })
    }

    pub fn n_frames(&self) -> usize {
        self.jcd.t
    }
}

struct BranchCache {
    z1: Mat,
    a1: Mat,
    z2: Mat,
    /// Pool winners and pre-pool length; `None` for the unpooled branch.
    pool: Option<(Vec<u32>, usize)>,
    out: Mat,
}

struct BlockCache {
    z: Mat,
    winners: Vec<u32>,
    out: Mat,
}

/// Cached activations from one forward pass; consumed by [`Model::backward`].
pub struct ForwardPass<'a> {
    input: &'a NetInput,
    branches: [BranchCache; 3],
    cat: Mat,
    blocks: [BlockCache; 3],
    pooled_feat: Vec<f64>,
    pub logits: Vec<f64>,
    pub probs: Vec<f64>,
}

impl Model {
    fn check_input(&self, input: &NetInput) -> Result<()> {
        let spec = &self.spec;
        if input.jcd.c != spec.jcd_dim() {
            return Err(GaitError::shape("jcd branch", spec.jcd_dim(), input.jcd.c));
        }
        if input.slow.c != spec.motion_dim() {
            return Err(GaitError::shape(
                "slow branch",
                spec.motion_dim(),
                input.slow.c,
            ));
        }
        if input.fast.c != spec.motion_dim() {
            return Err(GaitError::shape(
                "fast branch",
                spec.motion_dim(),
                input.fast.c,
            ));
        }
        let k = input.jcd.t;
        if k < 3 {
            return Err(GaitError::TooShort { got: k, min: 3 });
        }
        if input.slow.t != k - 1 {
            return Err(GaitError::shape("slow branch", k - 1, input.slow.t));
        }
        if input.fast.t != (k - 1) / 2 {
            return Err(GaitError::shape("fast branch", (k - 1) / 2, input.fast.t));
        }
        Ok(())
    }

    fn branch_forward(&self, x: &Mat, tensor_base: usize, pool: bool, out_len: usize) -> BranchCache {
        let p = &self.params.tensors;
        let z1 = conv1d_forward(x, &p[tensor_base], &p[tensor_base + 1]);
        let a1 = leaky_relu_forward(&z1, LRELU_SLOPE);
        let z2 = conv1d_forward(&a1, &p[tensor_base + 2], &p[tensor_base + 3]);
        let a2 = leaky_relu_forward(&z2, LRELU_SLOPE);
        let (pooled, pool_cache) = if pool {
            let pre_len = a2.t;
            let (o, winners) = maxpool2_forward(&a2);
            (o, Some((winners, pre_len)))
        } else {
            (a2, None)
        };
        // align to the common time base; at most one trailing row is dropped
        let out = if pooled.t > out_len {
            pooled.truncated(out_len)
        } else {
            pooled
        };
        BranchCache {
            z1,
            a1,
            z2,
            pool: pool_cache,
            out,
        }
    }

    /// Runs the network on one clip's features, returning the cached
    /// activations together with logits and class probabilities.
    pub fn forward<'a>(&self, input: &'a NetInput) -> Result<ForwardPass<'a>> {
        self.check_input(input)?;
        let k = input.jcd.t;
        let out_len = (k - 1) / 2;

        let jcd = self.branch_forward(&input.jcd, 0, true, out_len);
        let slow = self.branch_forward(&input.slow, 4, true, out_len);
        let fast = self.branch_forward(&input.fast, 8, false, out_len);

        let f = self.spec.filters;
        let mut cat = Mat::zeros(out_len, 3 * f);
        for t in 0..out_len {
            let row = cat.row_mut(t);
            row[..f].copy_from_slice(jcd.out.row(t));
            row[f..2 * f].copy_from_slice(slow.out.row(t));
            row[2 * f..].copy_from_slice(fast.out.row(t));
        }

        let p = &self.params.tensors;
        let mut blocks: Vec<BlockCache> = Vec::with_capacity(3);
        for b in 0..3 {
            let input_mat: &Mat = if b == 0 { &cat } else { &blocks[b - 1].out };
            let z = conv1d_forward(input_mat, &p[12 + 2 * b], &p[13 + 2 * b]);
            let a = leaky_relu_forward(&z, LRELU_SLOPE);
            let (out, winners) = maxpool2_forward(&a);
            blocks.push(BlockCache { z, winners, out });
        }

        let pooled_feat = gap_forward(&blocks[2].out);
        let logits = dense_forward(&pooled_feat, &p[18], &p[19]);
        let probs = softmax(&logits);

        let mut it = blocks.into_iter();
        let (b0, b1, b2) = (it.next().unwrap(), it.next().unwrap(), it.next().unwrap());
        Ok(ForwardPass {
            input,
            branches: [jcd, slow, fast],
            cat,
            blocks: [b0, b1, b2],
            pooled_feat,
            logits,
            probs,
        })
    }

    fn branch_backward(
        &self,
        x: &Mat,
        cache: &BranchCache,
        tensor_base: usize,
        dout: &Mat,
        grads: &mut Gradients,
    ) {
        let p = &self.params.tensors;
        // undo the truncation: rows dropped in forward get zero gradient
        let da2 = match &cache.pool {
            Some((winners, pre_len)) => {
                let pooled_len = if *pre_len < 2 { *pre_len } else { pre_len / 2 };
                let mut dpool = Mat::zeros(pooled_len, dout.c);
                dpool.data[..dout.data.len()].copy_from_slice(&dout.data);
                maxpool2_backward(*pre_len, dout.c, winners, &dpool)
            }
            None => dout.clone(),
        };
        let dz2 = leaky_relu_backward(&cache.z2, &da2, LRELU_SLOPE);
        let (da1, dw2, db2) = conv1d_backward(&cache.a1, &p[tensor_base + 2], &dz2, true);
        let dz1 = leaky_relu_backward(&cache.z1, &da1.unwrap(), LRELU_SLOPE);
        let (_, dw1, db1) = conv1d_backward(x, &p[tensor_base], &dz1, false);

        grads.tensors[tensor_base] = dw1;
        grads.tensors[tensor_base + 1] = db1;
        grads.tensors[tensor_base + 2] = dw2;
        grads.tensors[tensor_base + 3] = db2;
    }

    /// Backpropagates a loss gradient on the logits through the cached
    /// forward pass, returning gradients for every parameter.
    pub fn backward(&self, fwd: &ForwardPass<'_>, dlogits: &[f64]) -> Result<Gradients> {
        if dlogits.len() != self.spec.n_classes {
            return Err(GaitError::shape(
                "logits",
                self.spec.n_classes,
                dlogits.len(),
            ));
        }
        let p = &self.params.tensors;
        let mut grads = Gradients::zeros(&self.spec);

        let (dgap, dw_head, db_head) = dense_backward(&fwd.pooled_feat, &p[18], dlogits);
        grads.tensors[18] = dw_head;
        grads.tensors[19] = db_head;

        let mut dcur = gap_backward(fwd.blocks[2].out.t, &dgap);
        for b in (0..3).rev() {
            let blk = &fwd.blocks[b];
            let da = maxpool2_backward(blk.z.t, blk.z.c, &blk.winners, &dcur);
            let dz = leaky_relu_backward(&blk.z, &da, LRELU_SLOPE);
            let input: &Mat = if b == 0 { &fwd.cat } else { &fwd.blocks[b - 1].out };
            let (dx, dw, db) = conv1d_backward(input, &p[12 + 2 * b], &dz, true);
            grads.tensors[12 + 2 * b] = dw;
            grads.tensors[13 + 2 * b] = db;
            dcur = dx.unwrap();
        }

        // split the concatenated gradient back into branches
        let f = self.spec.filters;
        let out_len = dcur.t;
        let split = |lo: usize| -> Mat {
            let mut m = Mat::zeros(out_len, f);
            for t in 0..out_len {
                m.row_mut(t).copy_from_slice(&dcur.row(t)[lo..lo + f]);
            }
            m
        };
        let d_jcd = split(0);
        let d_slow = split(f);
        let d_fast = split(2 * f);

        self.branch_backward(&fwd.input.jcd, &fwd.branches[0], 0, &d_jcd, &mut grads);
        self.branch_backward(&fwd.input.slow, &fwd.branches[1], 4, &d_slow, &mut grads);
        self.branch_backward(&fwd.input.fast, &fwd.branches[2], 8, &d_fast, &mut grads);

        Ok(grads)
    }
}

#[cfg(test)]
pub(crate) fn random_input(spec: &ModelSpec, k: usize, seed: u64) -> NetInput {
    let mut rng = rng::stream(seed, "net_input", 0);
    let mut mk = |t: usize, c: usize| Mat {
        t,
        c,
        data: (0..t * c)
            .map(|_| rng::uniform(&mut rng, -1.0, 1.0))
            .collect(),
    };
    NetInput {
        jcd: mk(k, spec.jcd_dim()),
        slow: mk(k - 1, spec.motion_dim()),
        fast: mk((k - 1) / 2, spec.motion_dim()),
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn default_spec_parameter_count() {
        // counted once from the layer shapes:
        //   jcd embed: 276*32 + 32 + 3*32*32 + 32
        //   slow/fast embeds: (72*32 + 32 + 3*32*32 + 32) each
        //   backbone: 3*96*64 + 64, 3*64*64 + 64, 3*64*128 + 128
        //   head: 128*4 + 4
        let spec = ModelSpec::new(24, 32);
        assert_eq!(spec.param_count(), 78_916);
        let model = Model::init(spec, 0);
        assert_eq!(model.param_count(), 78_916);
    }

    #[test]
    fn forward_probs_sum_to_one() {
        let spec = ModelSpec::new(6, 4);
        let model = Model::init(spec, 3);
        let input = random_input(&spec, 16, 1);
        let fwd = model.forward(&input).unwrap();
        let sum: f64 = fwd.probs.iter().sum();
        assert!((sum - 1.0).abs() < 1e-6);
        assert_eq!(fwd.probs.len(), 4);
    }

    #[test]
    fn zero_input_gives_uniform_probs() {
        let spec = ModelSpec::new(6, 4);
        let model = Model::init(spec, 7); // biases start at zero
        let input = NetInput {
            jcd: Mat::zeros(16, spec.jcd_dim()),
            slow: Mat::zeros(15, spec.motion_dim()),
            fast: Mat::zeros(7, spec.motion_dim()),
        };
        let fwd = model.forward(&input).unwrap();
        for p in &fwd.probs {
            assert!((p - 0.25).abs() < 1e-12);
        }
    }

    #[test]
    fn forward_is_deterministic() {
        let spec = ModelSpec::new(6, 4);
        let model = Model::init(spec, 11);
        let input = random_input(&spec, 20, 2);
        let a = model.forward(&input).unwrap();
        let b = model.forward(&input).unwrap();
        assert_eq!(a.probs, b.probs);
        assert_eq!(a.logits, b.logits);
    }

    #[test]
    fn shape_errors_name_the_branch() {
        let spec = ModelSpec::new(6, 4);
        let model = Model::init(spec, 0);
        let mut input = random_input(&spec, 16, 3);
        input.slow = Mat::zeros(15, 5);
        match model.forward(&input) {
            Err(GaitError::ShapeMismatch { place, .. }) => assert_eq!(place, "slow branch"),
            other => panic!("expected shape error, got {:?}", other.map(|_| ())),
        }
    }

    #[test]
    fn zero_loss_gradient_gives_zero_parameter_gradients() {
        let spec = ModelSpec::new(6, 4);
        let model = Model::init(spec, 5);
        let input = random_input(&spec, 16, 4);
        let fwd = model.forward(&input).unwrap();
        let grads = model.backward(&fwd, &[0.0; 4]).unwrap();
        for t in &grads.tensors {
            assert!(t.data.iter().all(|&v| v == 0.0));
        }
    }

    #[test]
    fn batch_gradient_mean_of_duplicates_matches_single() {
        let spec = ModelSpec::new(6, 4);
        let model = Model::init(spec, 6);
        let input = random_input(&spec, 16, 5);
        let fwd = model.forward(&input).unwrap();
        let dlogits = [0.3, -0.1, 0.2, -0.4];
        let single = model.backward(&fwd, &dlogits).unwrap();

        // duplicated sample in a batch of two, each scaled by 1/2
        let half: Vec<f64> = dlogits.iter().map(|v| v / 2.0).collect();
        let mut acc = model.backward(&fwd, &half).unwrap();
        let again = model.backward(&fwd, &half).unwrap();
        acc.add_assign(&again);
        for (a, b) in acc.tensors.iter().zip(&single.tensors) {
            for (x, y) in a.data.iter().zip(&b.data) {
                assert!((x - y).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn handles_minimum_length_input() {
        let spec = ModelSpec::new(6, 4);
        let model = Model::init(spec, 8);
        let input = random_input(&spec, 3, 6); // shortest legal clip
        let fwd = model.forward(&input).unwrap();
        assert!((fwd.probs.iter().sum::<f64>() - 1.0).abs() < 1e-9);
        let grads = model.backward(&fwd, &[0.1, -0.2, 0.05, 0.05]).unwrap();
        assert_eq!(grads.tensors.len(), 20);
    }
}
