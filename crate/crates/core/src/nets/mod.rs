//! MLPs, low-rank MLPs, the hypernetwork→target composition and the
//! hard-constraint output wrappers.

pub mod batched;
mod constraint;
mod forward;
pub mod kernel;
mod spec;

pub use constraint::{
    beta_left, hard_bc, hard_bc_both_ends, hard_ic, BoundaryKind, ConstraintConfig, ConstraintMode,
};
pub use forward::{decode_params, forward, forward_layers, materialize_dense, ParamVector, TargetNet};
pub(crate) use forward::check_len;
pub use kernel::{seed_inputs, Channels, JetKernel, ValueKernel};
pub use spec::{
    dense_param_count, lowrank_param_count, Activation, HypernetSpec, Layer, LayerKind, LowRankMlpSpec, MlpSpec,
    NetSpec,
};

use rand::Rng;

use crate::autodiff::Real;
use crate::error::Result;
use crate::problems::ICSample;

fn glorot<R: Rng>(rng: &mut R, fan_in: usize, fan_out: usize) -> f64 {
    let bound = (6.0 / (fan_in + fan_out) as f64).sqrt();
    rng.gen_range(-bound..=bound)
}

/// Fan-in/fan-out uniform weights, zero biases. Low-rank factors are scaled
/// so that `A·B` has the variance of a dense `1/d_in` initialization.
pub fn init_params<N: NetSpec, R: Rng>(spec: &N, rng: &mut R) -> ParamVector {
    let mut p = vec![0.0; spec.param_count()];
    for layer in spec.layers() {
        let w = &mut p[layer.offset..layer.offset + layer.weight_count()];
        match layer.kind {
            LayerKind::Dense => {
                for v in w.iter_mut() {
                    *v = glorot(rng, layer.d_in, layer.d_out);
                }
            }
            LayerKind::LowRank { rank } => {
                let (a, b) = w.split_at_mut(layer.d_out * rank);
                let ba = (3.0 / rank as f64).sqrt();
                let bb = (3.0 / layer.d_in as f64).sqrt();
                for v in a.iter_mut() {
                    *v = rng.gen_range(-ba..=ba);
                }
                for v in b.iter_mut() {
                    *v = rng.gen_range(-bb..=bb);
                }
            }
        }
    }
    ParamVector(p)
}

/// Hypernetwork initialization. Hidden layers use [`init_params`]; the output
/// layer weights are scaled by 0.01 and its bias holds a freshly initialized
/// target parameter vector whose output layer is zeroed. Every initial target
/// network therefore has healthy hidden features and a raw output close to
/// zero, so the initial constrained model is close to the initial-condition
/// blend.
pub fn init_hypernet<R: Rng>(spec: &HypernetSpec, rng: &mut R) -> ParamVector {
    let mut p = init_params(&spec.hyper, rng);
    let layers = spec.hyper.layers();
    let out = layers.last().expect("hypernetwork has an output layer");
    for v in &mut p.0[out.offset..out.offset + out.weight_count()] {
        *v *= 0.01;
    }
    let mut theta0 = init_params(&spec.target, rng);
    let t_out = *spec.target.layers().last().expect("target output layer");
    for v in &mut theta0.0[t_out.offset..] {
        *v = 0.0;
    }
    p.0[out.bias_offset()..out.bias_offset() + out.d_out].copy_from_slice(theta0.as_slice());
    p
}

/// Target parameters for one initial condition: `θ = H_Φ(sensors)`.
pub fn hyper_output<S: Real>(spec: &HypernetSpec, hyper_params: &[S], sensors: &[f64]) -> Result<Vec<S>> {
    let input: Vec<S> = sensors.iter().map(|&v| S::lift(v)).collect();
    forward(&spec.hyper, hyper_params, &input)
}

/// Full pipeline at one point: hypernetwork, reshape, target network on
/// `(t, x)`, constraint wrappers.
pub fn npr_eval<S: Real>(
    spec: &HypernetSpec,
    hyper_params: &[S],
    sensors: &[f64],
    t: S,
    x: S,
    constraints: &ConstraintConfig,
    u0: &ICSample,
) -> Result<S> {
    let theta = hyper_output(spec, hyper_params, sensors)?;
    let raw = forward(&spec.target, &theta, &[t, x])?[0];
    Ok(constraints.apply(raw, t, x, u0.eval(x), u0.boundary_values()))
}
