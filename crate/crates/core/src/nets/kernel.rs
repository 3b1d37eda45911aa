//! Fused forward/backward for small MLPs evaluated at one `(t, x)` point.
//!
//! Every unit carries four channels: value, `∂_t`, `∂_x`, `∂_xx`. Affine maps
//! act on all channels (the bias only on the value channel); activations apply
//! the second-order chain rule. The reverse pass accumulates parameter
//! gradients from adjoints on the four output channels. This is the training
//! hot path; the generic tape route in [`crate::autodiff`] is its oracle.

use super::spec::{Activation, Layer, LayerKind, NetSpec};

/// `[value, ∂_t, ∂_x, ∂_xx]`.
pub type Channels = [f64; 4];

/// Channels of the coordinate pair `(t, x)` seeded for the kernel.
pub fn seed_inputs(t: f64, x: f64) -> [Channels; 2] {
    [[t, 1.0, 0.0, 0.0], [x, 0.0, 1.0, 0.0]]
}

#[derive(Clone, Debug)]
struct LayerCache {
    input: Vec<Channels>,
    mid: Vec<Channels>,
    pre: Vec<Channels>,
    sigma: Vec<[f64; 4]>,
}

/// Reusable workspace for one network architecture.
#[derive(Clone, Debug)]
pub struct JetKernel {
    layers: Vec<Layer>,
    act: Activation,
    cache: Vec<LayerCache>,
    output: Vec<Channels>,
    adj: Vec<Channels>,
    adj_next: Vec<Channels>,
    adj_mid: Vec<Channels>,
}

#[inline]
fn axpy(acc: &mut Channels, w: f64, h: &Channels) {
    acc[0] += w * h[0];
    acc[1] += w * h[1];
    acc[2] += w * h[2];
    acc[3] += w * h[3];
}

#[inline]
fn cdot(a: &Channels, b: &Channels) -> f64 {
    a[0] * b[0] + a[1] * b[1] + a[2] * b[2] + a[3] * b[3]
}

impl JetKernel {
    pub fn new<N: NetSpec>(spec: &N) -> Self {
        let layers = spec.layers();
        let cache = layers
            .iter()
            .map(|l| LayerCache {
                input: vec![[0.0; 4]; l.d_in],
                mid: match l.kind {
                    LayerKind::LowRank { rank } => vec![[0.0; 4]; rank],
                    LayerKind::Dense => Vec::new(),
                },
                pre: vec![[0.0; 4]; l.d_out],
                sigma: vec![[0.0; 4]; if l.activated { l.d_out } else { 0 }],
            })
            .collect();
        let widest = layers.iter().map(|l| l.d_in.max(l.d_out)).max().unwrap_or(1);
        let d_out = layers.last().map_or(1, |l| l.d_out);
        Self {
            act: spec.activation(),
            cache,
            output: vec![[0.0; 4]; d_out],
            adj: vec![[0.0; 4]; widest],
            adj_next: vec![[0.0; 4]; widest],
            adj_mid: vec![[0.0; 4]; widest],
            layers,
        }
    }

    pub fn param_count(&self) -> usize {
        self.layers.last().map_or(0, |l| l.offset + l.param_count())
    }

    /// Forward pass; returns the output channels.
    pub fn forward(&mut self, params: &[f64], input: &[Channels]) -> &[Channels] {
        debug_assert_eq!(params.len(), self.param_count());
        let n = self.layers.len();
        for li in 0..n {
            let layer = self.layers[li];
            let (done, rest) = self.cache.split_at_mut(li);
            let cache = &mut rest[0];
            if li == 0 {
                cache.input.copy_from_slice(input);
            } else {
                let prev = &done[li - 1];
                let prev_layer = &self.layers[li - 1];
                self_activate(prev_layer, prev, &mut cache.input);
            }
            let w = &params[layer.offset..];
            let bias = &params[layer.bias_offset()..layer.bias_offset() + layer.d_out];
            match layer.kind {
                LayerKind::Dense => {
                    for o in 0..layer.d_out {
                        let row = &w[o * layer.d_in..(o + 1) * layer.d_in];
                        let mut acc = [bias[o], 0.0, 0.0, 0.0];
                        for (wi, hi) in row.iter().zip(&cache.input) {
                            axpy(&mut acc, *wi, hi);
                        }
                        cache.pre[o] = acc;
                    }
                }
                LayerKind::LowRank { rank } => {
                    let a = &w[..layer.d_out * rank];
                    let b = &w[layer.d_out * rank..layer.d_out * rank + rank * layer.d_in];
                    for k in 0..rank {
                        let row = &b[k * layer.d_in..(k + 1) * layer.d_in];
                        let mut acc = [0.0; 4];
                        for (wi, hi) in row.iter().zip(&cache.input) {
                            axpy(&mut acc, *wi, hi);
                        }
                        cache.mid[k] = acc;
                    }
                    for o in 0..layer.d_out {
                        let row = &a[o * rank..(o + 1) * rank];
                        let mut acc = [bias[o], 0.0, 0.0, 0.0];
                        for (wi, yi) in row.iter().zip(&cache.mid) {
                            axpy(&mut acc, *wi, yi);
                        }
                        cache.pre[o] = acc;
                    }
                }
            }
            if layer.activated {
                for (s, z) in cache.sigma.iter_mut().zip(&cache.pre) {
                    *s = self.act.derivatives(z[0]);
                }
            }
        }
        let last = &self.layers[n - 1];
        self_activate(last, &self.cache[n - 1], &mut self.output);
        &self.output
    }

    /// Reverse pass for the most recent [`forward`](Self::forward) call.
    /// Accumulates into `grad` (same layout as the parameters).
    pub fn backward(&mut self, params: &[f64], out_adj: &[Channels], grad: &mut [f64]) {
        let n = self.layers.len();
        self.adj[..out_adj.len()].copy_from_slice(out_adj);
        for li in (0..n).rev() {
            let layer = self.layers[li];
            let cache = &self.cache[li];
            // Adjoint of the pre-activation, in place.
            if layer.activated {
                for o in 0..layer.d_out {
                    let g = self.adj[o];
                    let z = cache.pre[o];
                    let [_, s1, s2, s3] = cache.sigma[o];
                    self.adj[o] = [
                        g[0] * s1 + g[1] * s2 * z[1] + g[2] * s2 * z[2] + g[3] * (s2 * z[3] + s3 * z[2] * z[2]),
                        g[1] * s1,
                        g[2] * s1 + 2.0 * g[3] * s2 * z[2],
                        g[3] * s1,
                    ];
                }
            }
            let bo = layer.bias_offset();
            for o in 0..layer.d_out {
                grad[bo + o] += self.adj[o][0];
            }
            let need_input_adj = li > 0;
            let w = &params[layer.offset..];
            let gw = &mut grad[layer.offset..];
            match layer.kind {
                LayerKind::Dense => {
                    for a in self.adj_next[..layer.d_in].iter_mut() {
                        *a = [0.0; 4];
                    }
                    for o in 0..layer.d_out {
                        let zb = self.adj[o];
                        let base = o * layer.d_in;
                        for i in 0..layer.d_in {
                            gw[base + i] += cdot(&zb, &cache.input[i]);
                            if need_input_adj {
                                axpy(&mut self.adj_next[i], w[base + i], &zb);
                            }
                        }
                    }
                }
                LayerKind::LowRank { rank } => {
                    let a_len = layer.d_out * rank;
                    for y in self.adj_mid[..rank].iter_mut() {
                        *y = [0.0; 4];
                    }
                    for o in 0..layer.d_out {
                        let zb = self.adj[o];
                        for k in 0..rank {
                            gw[o * rank + k] += cdot(&zb, &cache.mid[k]);
                            axpy(&mut self.adj_mid[k], w[o * rank + k], &zb);
                        }
                    }
                    for a in self.adj_next[..layer.d_in].iter_mut() {
                        *a = [0.0; 4];
                    }
                    for k in 0..rank {
                        let yb = self.adj_mid[k];
                        let base = a_len + k * layer.d_in;
                        for i in 0..layer.d_in {
                            gw[base + i] += cdot(&yb, &cache.input[i]);
                            if need_input_adj {
                                axpy(&mut self.adj_next[i], w[base + i], &yb);
                            }
                        }
                    }
                }
            }
            if need_input_adj {
                std::mem::swap(&mut self.adj, &mut self.adj_next);
            }
        }
    }
}

/// Post-activation channels of a layer from its cached pre-activations.
#[inline]
fn self_activate(layer: &Layer, cache: &LayerCache, out: &mut [Channels]) {
    if !layer.activated {
        out.copy_from_slice(&cache.pre);
        return;
    }
    for ((o, z), s) in out.iter_mut().zip(&cache.pre).zip(&cache.sigma) {
        let [s0, s1, s2, _] = *s;
        *o = [s0, s1 * z[1], s1 * z[2], s1 * z[3] + s2 * z[2] * z[2]];
    }
}

/// Value-only forward pass with reusable buffers, for dense grid evaluation.
#[derive(Clone, Debug)]
pub struct ValueKernel {
    layers: Vec<Layer>,
    act: Activation,
    a: Vec<f64>,
    b: Vec<f64>,
    mid: Vec<f64>,
}

impl ValueKernel {
    pub fn new<N: NetSpec>(spec: &N) -> Self {
        let layers = spec.layers();
        let widest = layers.iter().map(|l| l.d_in.max(l.d_out)).max().unwrap_or(1);
        Self {
            act: spec.activation(),
            a: vec![0.0; widest],
            b: vec![0.0; widest],
            mid: vec![0.0; widest],
            layers,
        }
    }

    pub fn eval(&mut self, params: &[f64], input: &[f64]) -> &[f64] {
        self.a[..input.len()].copy_from_slice(input);
        let mut d = input.len();
        for layer in &self.layers {
            let w = &params[layer.offset..];
            let bias = &params[layer.bias_offset()..layer.bias_offset() + layer.d_out];
            let h = &self.a[..d];
            match layer.kind {
                LayerKind::Dense => {
                    for o in 0..layer.d_out {
                        let row = &w[o * layer.d_in..(o + 1) * layer.d_in];
                        self.b[o] = bias[o] + row.iter().zip(h).map(|(w, h)| w * h).sum::<f64>();
                    }
                }
                LayerKind::LowRank { rank } => {
                    let (a, b) = w.split_at(layer.d_out * rank);
                    for k in 0..rank {
                        let row = &b[k * layer.d_in..(k + 1) * layer.d_in];
                        self.mid[k] = row.iter().zip(h).map(|(w, h)| w * h).sum::<f64>();
                    }
                    for o in 0..layer.d_out {
                        let row = &a[o * rank..(o + 1) * rank];
                        self.b[o] = bias[o] + row.iter().zip(&self.mid[..rank]).map(|(w, y)| w * y).sum::<f64>();
                    }
                }
            }
            if layer.activated {
                for v in self.b[..layer.d_out].iter_mut() {
                    *v = self.act.apply(*v);
                }
            }
            std::mem::swap(&mut self.a, &mut self.b);
            d = layer.d_out;
        }
        &self.a[..d]
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::autodiff::{directional_derivs, grad, Jet2, Real, Var};
    use crate::nets::forward::forward_layers;
    use crate::nets::spec::MlpSpec;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn jet_channels<N: NetSpec>(spec: &N, params: &[f64], t: f64, x: f64) -> Vec<Channels> {
        let layers = spec.layers();
        (0..spec.d_output())
            .map(|k| {
                let d = directional_derivs(
                    |tj: Jet2<f64>, xj: Jet2<f64>| {
                        let p: Vec<Jet2<f64>> = params.iter().map(|&v| Jet2::constant(v)).collect();
                        forward_layers(&layers, spec.activation(), &p, &[tj, xj])[k]
                    },
                    t,
                    x,
                );
                [d.u, d.u_t, d.u_x, d.u_xx]
            })
            .collect()
    }

    #[test]
    fn kernel_forward_matches_jets() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        for trial in 0..30 {
            let act = [Activation::Sin, Activation::Tanh][trial % 2];
            let base = MlpSpec::new(2, rng.gen_range(1..4), rng.gen_range(1..4), rng.gen_range(2..9), act);
            let p: Vec<f64> = (0..base.param_count()).map(|_| rng.gen_range(-1.0..1.0)).collect();
            let (t, x) = (rng.gen::<f64>(), rng.gen::<f64>());
            let mut k = JetKernel::new(&base);
            let out = k.forward(&p, &seed_inputs(t, x)).to_vec();
            let expect = jet_channels(&base, &p, t, x);
            for (a, b) in out.iter().zip(&expect) {
                for c in 0..4 {
                    assert!((a[c] - b[c]).abs() < 1e-12, "{a:?} vs {b:?}");
                }
            }
            let mut vk = ValueKernel::new(&base);
            let v = vk.eval(&p, &[t, x]);
            for (a, b) in v.iter().zip(&expect) {
                assert!((a - b[0]).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn kernel_backward_matches_tape() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        for trial in 0..20 {
            let act = [Activation::Sin, Activation::Tanh][trial % 2];
            let dh = rng.gen_range(2..7);
            let spec = MlpSpec::new(2, 2, rng.gen_range(1..4), dh, act).low_rank(rng.gen_range(1..=dh));
            let p: Vec<f64> = (0..spec.param_count()).map(|_| rng.gen_range(-1.0..1.0)).collect();
            let (t, x) = (rng.gen::<f64>(), rng.gen::<f64>());
            let w: Vec<Channels> = (0..2).map(|_| [rng.gen(), rng.gen(), rng.gen(), rng.gen()]).collect();

            let mut k = JetKernel::new(&spec);
            k.forward(&p, &seed_inputs(t, x));
            let mut g = vec![0.0; p.len()];
            k.backward(&p, &w, &mut g);

            let layers = spec.layers();
            let expect = grad(
                |pv: &[Var]| {
                    let mut total = Var::constant(0.0);
                    for (out, wk) in w.iter().enumerate() {
                        let d = directional_derivs(
                            |tj: Jet2<Var>, xj: Jet2<Var>| {
                                let pj: Vec<Jet2<Var>> = pv.iter().map(|&v| Jet2::constant(v)).collect();
                                forward_layers(&layers, act, &pj, &[tj, xj])[out]
                            },
                            Var::constant(t),
                            Var::constant(x),
                        );
                        total = total
                            + d.u.scale(wk[0])
                            + d.u_t.scale(wk[1])
                            + d.u_x.scale(wk[2])
                            + d.u_xx.scale(wk[3]);
                    }
                    total
                },
                &p,
            )
            .unwrap();
            for (a, b) in g.iter().zip(&expect) {
                assert!((a - b).abs() < 1e-11 * (1.0 + b.abs()), "{a} vs {b}");
            }
        }
    }
}
