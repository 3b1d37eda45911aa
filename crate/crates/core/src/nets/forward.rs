use serde::{Deserialize, Serialize};

use super::spec::{Activation, HypernetSpec, Layer, LayerKind, LowRankMlpSpec, MlpSpec, NetSpec};
use crate::autodiff::Real;
use crate::error::{Error, Result};

/// Flat parameter array in canonical layout: per layer, weights row-major
/// (`A` then `B` for low-rank transitions) followed by the bias.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ParamVector(pub Vec<f64>);

impl ParamVector {
    pub fn zeros(n: usize) -> Self {
        Self(vec![0.0; n])
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.0
    }

    pub fn as_mut_slice(&mut self) -> &mut [f64] {
        &mut self.0
    }
}

impl From<Vec<f64>> for ParamVector {
    fn from(v: Vec<f64>) -> Self {
        Self(v)
    }
}

#[inline]
fn activate<S: Real>(act: Activation, z: S) -> S {
    match act {
        Activation::Sin => z.sin(),
        Activation::Tanh => z.tanh(),
        Activation::Relu => z.relu(),
    }
}

/// Forward pass over a precomputed layer list. Low-rank transitions compute
/// `A(Bh)` without forming `AB`.
pub fn forward_layers<S: Real>(layers: &[Layer], act: Activation, params: &[S], input: &[S]) -> Vec<S> {
    let mut h: Vec<S> = input.to_vec();
    for layer in layers {
        let w = &params[layer.offset..];
        let bias = &params[layer.bias_offset()..layer.bias_offset() + layer.d_out];
        let mut z: Vec<S> = match layer.kind {
            LayerKind::Dense => (0..layer.d_out)
                .map(|o| {
                    let row = &w[o * layer.d_in..(o + 1) * layer.d_in];
                    dot(row, &h, bias[o])
                })
                .collect(),
            LayerKind::LowRank { rank } => {
                let a = &w[..layer.d_out * rank];
                let b = &w[layer.d_out * rank..layer.d_out * rank + rank * layer.d_in];
                let mid: Vec<S> = (0..rank)
                    .map(|k| dot(&b[k * layer.d_in..(k + 1) * layer.d_in], &h, S::lift(0.0)))
                    .collect();
                (0..layer.d_out)
                    .map(|o| dot(&a[o * rank..(o + 1) * rank], &mid, bias[o]))
                    .collect()
            }
        };
        if layer.activated {
            for v in z.iter_mut() {
                *v = activate(act, *v);
            }
        }
        h = z;
    }
    h
}

#[inline]
fn dot<S: Real>(w: &[S], h: &[S], init: S) -> S {
    w.iter().zip(h).fold(init, |acc, (&wi, &hi)| acc + wi * hi)
}

/// Checked forward pass for any MLP spec.
pub fn forward<S: Real, N: NetSpec>(spec: &N, params: &[S], input: &[S]) -> Result<Vec<S>> {
    check_len("parameters", spec.param_count(), params.len())?;
    check_len("input", spec.d_input(), input.len())?;
    Ok(forward_layers(&spec.layers(), spec.activation(), params, input))
}

pub(crate) fn check_len(what: &'static str, expected: usize, got: usize) -> Result<()> {
    if expected != got {
        return Err(Error::Length { what, expected, got });
    }
    Ok(())
}

/// Target network decoded from a hypernetwork output.
#[derive(Clone, Debug, PartialEq)]
pub struct TargetNet {
    pub spec: LowRankMlpSpec,
    pub params: ParamVector,
}

impl TargetNet {
    pub fn eval<S: Real>(&self, t: S, x: S) -> S {
        let p: Vec<S> = self.params.0.iter().map(|&v| S::lift(v)).collect();
        forward_layers(&self.spec.layers(), self.spec.activation(), &p, &[t, x])[0]
    }

    /// Flat parameters in canonical layout.
    pub fn encode(&self) -> Vec<f64> {
        self.params.0.clone()
    }

    /// Materialize `W_i = A_i·B_i`, giving an equivalent dense MLP.
    pub fn unfold(&self) -> (MlpSpec, ParamVector) {
        materialize_dense(&self.spec, self.params.as_slice())
    }
}

/// Reshape a flat vector into a target network.
pub fn decode_params(flat: &[f64], spec: &HypernetSpec) -> Result<TargetNet> {
    check_len("target parameters", spec.target.param_count(), flat.len())?;
    Ok(TargetNet {
        spec: spec.target,
        params: ParamVector(flat.to_vec()),
    })
}

/// Dense counterpart of a low-rank network: identical input/output layers,
/// hidden transitions replaced by the explicit products `A_i B_i`.
pub fn materialize_dense(spec: &LowRankMlpSpec, params: &[f64]) -> (MlpSpec, ParamVector) {
    let dense_spec = spec.base;
    let mut out = Vec::with_capacity(dense_spec.param_count());
    for layer in spec.layers() {
        let w = &params[layer.offset..layer.offset + layer.weight_count()];
        match layer.kind {
            LayerKind::Dense => out.extend_from_slice(w),
            LayerKind::LowRank { rank } => {
                let (a, b) = w.split_at(layer.d_out * rank);
                for o in 0..layer.d_out {
                    for i in 0..layer.d_in {
                        let mut acc = 0.0;
                        for k in 0..rank {
                            acc += a[o * rank + k] * b[k * layer.d_in + i];
                        }
                        out.push(acc);
                    }
                }
            }
        }
        out.extend_from_slice(&params[layer.bias_offset()..layer.bias_offset() + layer.d_out]);
    }
    (dense_spec, ParamVector(out))
}
