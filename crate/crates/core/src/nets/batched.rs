//! Batched dense MLP forward/backward on row-major `batch × features` arrays.
//! Used for the hypernetwork and the DeepONet branch, whose inputs carry no
//! space-time derivatives.

use ndarray::linalg::general_mat_mul;
use ndarray::{Array2, ArrayView2, ArrayViewMut2, Axis};

use super::spec::{Activation, Layer, MlpSpec, NetSpec};

/// Activations retained from a batched forward pass.
#[derive(Clone, Debug)]
pub struct BatchCache {
    /// Input to each layer (`batch × d_in`).
    inputs: Vec<Array2<f64>>,
    /// Pre-activations of each activated layer.
    pre: Vec<Array2<f64>>,
    pub output: Array2<f64>,
}

fn weights<'a>(layer: &Layer, params: &'a [f64]) -> ArrayView2<'a, f64> {
    ArrayView2::from_shape((layer.d_out, layer.d_in), &params[layer.offset..layer.offset + layer.weight_count()])
        .expect("layer weights shape")
}

fn activate(act: Activation, z: &Array2<f64>) -> Array2<f64> {
    z.mapv(|v| act.apply(v))
}

pub fn batch_forward(spec: &MlpSpec, params: &[f64], input: ArrayView2<f64>) -> BatchCache {
    let layers = spec.layers();
    let mut inputs = Vec::with_capacity(layers.len());
    let mut pre = Vec::with_capacity(layers.len());
    let mut h = input.to_owned();
    for layer in &layers {
        let w = weights(layer, params);
        let bias = ndarray::ArrayView1::from(&params[layer.bias_offset()..layer.bias_offset() + layer.d_out]);
        let mut z = h.dot(&w.t());
        z += &bias;
        inputs.push(h);
        if layer.activated {
            h = activate(spec.activation, &z);
            pre.push(z);
        } else {
            h = z;
        }
    }
    BatchCache {
        inputs,
        pre,
        output: h,
    }
}

/// Parameter gradient given `d loss / d output` (`batch × d_output`).
pub fn batch_backward(spec: &MlpSpec, params: &[f64], cache: &BatchCache, out_grad: Array2<f64>) -> Vec<f64> {
    let layers = spec.layers();
    let mut grad = vec![0.0; spec.param_count()];
    let mut g = out_grad;
    for (li, layer) in layers.iter().enumerate().rev() {
        if layer.activated {
            let z = &cache.pre[li];
            let act = spec.activation;
            ndarray::Zip::from(&mut g).and(z).for_each(|gv, &zv| *gv *= act.derivatives(zv)[1]);
        }
        let (gw, rest) = grad[layer.offset..].split_at_mut(layer.weight_count());
        let mut gw = ArrayViewMut2::from_shape((layer.d_out, layer.d_in), gw).expect("grad shape");
        general_mat_mul(1.0, &g.t(), &cache.inputs[li], 0.0, &mut gw);
        for (b, s) in rest[..layer.d_out].iter_mut().zip(g.sum_axis(Axis(0))) {
            *b = s;
        }
        if li > 0 {
            g = g.dot(&weights(layer, params));
        }
    }
    grad
}
