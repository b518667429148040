//! Finite-difference verification of the analytic gradients.
//!
//! Runs the full network composed with the hybrid loss and compares every
//! parameter's analytic gradient against a central finite difference. This
//! is the correctness anchor for the whole training stack.

use super::{Mat, Model, ModelSpec, NetInput};
use crate::error::Result;
use crate::losses::{mode_loss, LabelPair, LossConfig, LossMode};
use crate::rng;

/// Worst relative error seen in one parameter tensor.
#[derive(Debug, Clone)]
pub struct TensorCheck {
    pub name: String,
    pub max_rel: f64,
    pub checked: usize,
}

#[derive(Debug, Clone)]
pub struct GradCheckReport {
    pub tensors: Vec<TensorCheck>,
    pub tolerance: f64,
    pub step: f64,
    pub pass: bool,
}

impl GradCheckReport {
    pub fn max_rel(&self) -> f64 {
        self.tensors.iter().map(|t| t.max_rel).fold(0.0, f64::max)
    }
}

/// Relative error with a floor so near-zero gradients compare absolutely.
fn rel_err(a: f64, b: f64) -> f64 {
    (a - b).abs() / a.abs().max(b.abs()).max(1e-6)
}

fn deterministic_input(spec: &ModelSpec, k_frames: usize, seed: u64) -> NetInput {
    let mut rng = rng::stream(seed, "gradcheck_input", 0);
    let mut mk = |t: usize, c: usize, lo: f64, hi: f64| Mat {
        t,
        c,
        data: (0..t * c)
            .map(|_| rng::uniform(&mut rng, lo, hi))
            .collect(),
    };
    NetInput {
        jcd: mk(k_frames, spec.jcd_dim(), 0.0, 2.0),
        slow: mk(k_frames - 1, spec.motion_dim(), -1.0, 1.0),
        fast: mk((k_frames - 1) / 2, spec.motion_dim(), -1.0, 1.0),
    }
}

/// Checks every parameter of a model under the hybrid loss against central
/// finite differences with step `h`. Passes when all relative errors stay
/// within `tol`.
pub fn gradient_check(
    spec: &ModelSpec,
    k_frames: usize,
    seed: u64,
    h: f64,
    tol: f64,
) -> Result<GradCheckReport> {
    let mut model = Model::init(*spec, seed);
    let input = deterministic_input(spec, k_frames, seed ^ 0x5eed);
    let label = LabelPair::new((seed as usize) % spec.n_classes, spec.n_classes)?;
    let loss_cfg = LossConfig::default();

    let fwd = model.forward(&input)?;
    let loss = mode_loss(LossMode::FocalOrdinal, &label, &fwd.probs, &loss_cfg)?;
    let analytic = model.backward(&fwd, &loss.grad_logits)?;

    let names: Vec<&'static str> = spec.tensor_shapes().into_iter().map(|(n, _)| n).collect();
    let mut tensors = Vec::with_capacity(names.len());
    let mut pass = true;

    for ti in 0..analytic.tensors.len() {
        let mut max_rel = 0.0f64;
        let n = model.params.tensors[ti].data.len();
        for pi in 0..n {
            let orig = model.params.tensors[ti].data[pi];

            model.params.tensors[ti].data[pi] = orig + h;
            let plus = scalar_loss(&model, &input, &label, &loss_cfg)?;
            model.params.tensors[ti].data[pi] = orig - h;
            let minus = scalar_loss(&model, &input, &label, &loss_cfg)?;
            model.params.tensors[ti].data[pi] = orig;

            let fd = (plus - minus) / (2.0 * h);
            let a = analytic.tensors[ti].data[pi];
            max_rel = max_rel.max(rel_err(a, fd));
        }
        if max_rel > tol {
            pass = false;
        }
        tensors.push(TensorCheck {
            name: names[ti].to_string(),
            max_rel,
            checked: n,
        });
    }

    Ok(GradCheckReport {
        tensors,
        tolerance: tol,
        step: h,
        pass,
    })
}

fn scalar_loss(
    model: &Model,
    input: &NetInput,
    label: &LabelPair,
    cfg: &LossConfig,
) -> Result<f64> {
    let fwd = model.forward(input)?;
    Ok(mode_loss(LossMode::FocalOrdinal, label, &fwd.probs, cfg)?.value)
}
