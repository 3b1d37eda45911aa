//! Fused loss-and-gradient evaluation over a batch of queries.
//!
//! Sensor-dependent networks (hypernetwork, DeepONet branch) run once per
//! batch on `ndarray` matrices; the small coordinate networks run per query
//! through [`JetKernel`]. Work is split into fixed-size chunks whose partial
//! results are combined in chunk order, so results do not depend on the
//! number of worker threads.

use std::ops::Range;

use ndarray::Array2;
use rayon::prelude::*;

use super::{Model, ModelSpec};
use crate::autodiff::Jet2;
use crate::error::{Error, Result};
use crate::nets::batched::{batch_backward, batch_forward};
use crate::nets::{check_len, seed_inputs, Channels, ConstraintConfig, JetKernel, NetSpec};
use crate::problems::ICSample;

/// One evaluation point for the initial condition `ics[ic]`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Query {
    pub ic: usize,
    pub t: f64,
    pub x: f64,
}

/// Initial conditions and the points at which the model is queried for them.
/// Queries are kept sorted by initial-condition index.
#[derive(Clone, Debug, PartialEq)]
pub struct Batch {
    pub ics: Vec<ICSample>,
    queries: Vec<Query>,
    ranges: Vec<Range<usize>>,
}

impl Batch {
    pub fn new(ics: Vec<ICSample>, mut queries: Vec<Query>) -> Result<Self> {
        if let Some(q) = queries.iter().find(|q| q.ic >= ics.len()) {
            return Err(Error::Length {
                what: "query initial-condition index",
                expected: ics.len(),
                got: q.ic,
            });
        }
        queries.sort_by_key(|q| q.ic);
        let mut ranges = vec![0..0; ics.len()];
        let mut start = 0;
        for (i, range) in ranges.iter_mut().enumerate() {
            let end = start + queries[start..].iter().take_while(|q| q.ic == i).count();
            *range = start..end;
            start = end;
        }
        Ok(Self { ics, queries, ranges })
    }

    /// The `k`-th initial condition paired with the `k`-th point.
    pub fn paired(ics: Vec<ICSample>, points: &[(f64, f64)]) -> Result<Self> {
        check_len("batch points", ics.len(), points.len())?;
        let queries = points
            .iter()
            .enumerate()
            .map(|(ic, &(t, x))| Query { ic, t, x })
            .collect();
        Self::new(ics, queries)
    }

    pub fn queries(&self) -> &[Query] {
        &self.queries
    }

    pub fn queries_for(&self, ic: usize) -> &[Query] {
        &self.queries[self.ranges[ic].clone()]
    }

    pub fn len(&self) -> usize {
        self.queries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.queries.is_empty()
    }
}

const IC_CHUNK: usize = 16;
const QUERY_CHUNK: usize = 64;

/// Apply the output wrapper to raw channels. Returns the wrapped channels and
/// the channels of the multiplier `m` in `û = m·raw + c`.
pub fn wrap_channels(cfg: &ConstraintConfig, ic: &ICSample, t: f64, x: f64, raw: &Channels) -> (Channels, Channels) {
    let b = ic.boundary_values();
    let (mt, ct) = cfg.affine_coefficients(Jet2::variable(t), Jet2::constant(x), Jet2::constant(ic.eval(x)), b);
    let (mx, cx) = cfg.affine_coefficients(Jet2::constant(t), Jet2::variable(x), ic.eval(Jet2::variable(x)), b);
    let m = [mx.val, mt.d1, mx.d1, mx.d2];
    let c = [cx.val, ct.d1, cx.d1, cx.d2];
    let [r, rt, rx, rxx] = *raw;
    let u = [
        m[0] * r + c[0],
        m[1] * r + m[0] * rt + c[1],
        m[2] * r + m[0] * rx + c[2],
        m[3] * r + 2.0 * m[2] * rx + m[0] * rxx + c[3],
    ];
    (u, m)
}

/// Adjoint of [`wrap_channels`] with respect to the raw channels.
#[inline]
fn unwrap_adjoint(m: &Channels, ub: &Channels) -> Channels {
    [
        ub[0] * m[0] + ub[1] * m[1] + ub[2] * m[2] + ub[3] * m[3],
        ub[1] * m[0],
        ub[2] * m[0] + 2.0 * ub[3] * m[2],
        ub[3] * m[0],
    ]
}

fn sensor_matrix(ics: &[ICSample], d_enc: usize) -> Array2<f64> {
    let mut flat = Vec::with_capacity(ics.len() * d_enc);
    for ic in ics {
        flat.extend(ic.discretize(d_enc));
    }
    Array2::from_shape_vec((ics.len(), d_enc), flat).expect("sensor matrix shape")
}

fn add_into(acc: &mut [f64], part: &[f64]) {
    for (a, p) in acc.iter_mut().zip(part) {
        *a += p;
    }
}

impl Model {
    /// `Σ_q ℓ(û(q))` and its gradient with respect to the model parameters.
    ///
    /// `point` receives a query, its initial condition and the wrapped
    /// channels `[û, û_t, û_x, û_xx]`, and returns the point loss together with
    /// its partials with respect to those channels.
    pub fn loss_and_grad<F>(&self, params: &[f64], batch: &Batch, point: F) -> Result<(f64, Vec<f64>)>
    where
        F: Fn(&Query, &ICSample, &Channels) -> (f64, Channels) + Sync,
    {
        check_len("model parameters", self.param_count(), params.len())?;
        let cfg = self.constraints;
        let (loss, grad) = match &self.spec {
            ModelSpec::Npr(spec) => {
                let p = spec.target.param_count();
                let sensors = sensor_matrix(&batch.ics, spec.d_enc());
                let cache = batch_forward(&spec.hyper, params, sensors.view());
                let theta = cache.output.as_slice().expect("contiguous hypernetwork output");
                let mut g_theta = Array2::<f64>::zeros((batch.ics.len(), p));
                let sums: Vec<f64> = g_theta
                    .as_slice_mut()
                    .expect("contiguous gradient")
                    .par_chunks_mut(IC_CHUNK * p)
                    .enumerate()
                    .map(|(c, g_chunk)| {
                        let mut kernel = JetKernel::new(&spec.target);
                        let mut sum = 0.0;
                        for (k, g_row) in g_chunk.chunks_mut(p).enumerate() {
                            let i = c * IC_CHUNK + k;
                            let th = &theta[i * p..(i + 1) * p];
                            let ic = &batch.ics[i];
                            for q in batch.queries_for(i) {
                                let raw = kernel.forward(th, &seed_inputs(q.t, q.x))[0];
                                let (u, m) = wrap_channels(&cfg, ic, q.t, q.x, &raw);
                                let (v, ub) = point(q, ic, &u);
                                sum += v;
                                kernel.backward(th, &[unwrap_adjoint(&m, &ub)], g_row);
                            }
                        }
                        sum
                    })
                    .collect();
                let grad = batch_backward(&spec.hyper, params, &cache, g_theta);
                (sums.iter().sum(), grad)
            }
            ModelSpec::Deeponet(spec) => {
                let (trunk_p, branch_p) = spec.split(params);
                let lat = spec.p_lat;
                let sensors = sensor_matrix(&batch.ics, spec.d_enc());
                let cache = batch_forward(&spec.branch, branch_p, sensors.view());
                let b_all = cache.output.as_slice().expect("contiguous branch output");
                let mut g_b = Array2::<f64>::zeros((batch.ics.len(), lat));
                let parts: Vec<(f64, Vec<f64>)> = g_b
                    .as_slice_mut()
                    .expect("contiguous gradient")
                    .par_chunks_mut(IC_CHUNK * lat)
                    .enumerate()
                    .map(|(c, g_chunk)| {
                        let mut kernel = JetKernel::new(&spec.trunk);
                        let mut g_trunk = vec![0.0; trunk_p.len()];
                        let mut adj = vec![[0.0; 4]; lat];
                        let mut sum = 0.0;
                        for (k, g_row) in g_chunk.chunks_mut(lat).enumerate() {
                            let i = c * IC_CHUNK + k;
                            let b = &b_all[i * lat..(i + 1) * lat];
                            let ic = &batch.ics[i];
                            for q in batch.queries_for(i) {
                                let tr = kernel.forward(trunk_p, &seed_inputs(q.t, q.x));
                                let mut raw = [0.0; 4];
                                for (bk, tk) in b.iter().zip(tr) {
                                    for ch in 0..4 {
                                        raw[ch] += bk * tk[ch];
                                    }
                                }
                                let (u, m) = wrap_channels(&cfg, ic, q.t, q.x, &raw);
                                let (v, ub) = point(q, ic, &u);
                                sum += v;
                                let rb = unwrap_adjoint(&m, &ub);
                                for ((a, gb), (bk, tk)) in adj.iter_mut().zip(g_row.iter_mut()).zip(b.iter().zip(tr))
                                {
                                    *a = [bk * rb[0], bk * rb[1], bk * rb[2], bk * rb[3]];
                                    *gb += rb[0] * tk[0] + rb[1] * tk[1] + rb[2] * tk[2] + rb[3] * tk[3];
                                }
                                kernel.backward(trunk_p, &adj, &mut g_trunk);
                            }
                        }
                        (sum, g_trunk)
                    })
                    .collect();
                let mut grad = vec![0.0; params.len()];
                let mut total = 0.0;
                for (s, g) in &parts {
                    total += s;
                    add_into(&mut grad[..trunk_p.len()], g);
                }
                let g_branch = batch_backward(&spec.branch, branch_p, &cache, g_b);
                grad[trunk_p.len()..].copy_from_slice(&g_branch);
                (total, grad)
            }
            ModelSpec::DensePinn(spec) => {
                let parts: Vec<(f64, Vec<f64>)> = batch
                    .queries
                    .par_chunks(QUERY_CHUNK)
                    .map(|qs| {
                        let mut kernel = JetKernel::new(spec);
                        let mut g = vec![0.0; params.len()];
                        let mut sum = 0.0;
                        for q in qs {
                            let ic = &batch.ics[q.ic];
                            let raw = kernel.forward(params, &seed_inputs(q.t, q.x))[0];
                            let (u, m) = wrap_channels(&cfg, ic, q.t, q.x, &raw);
                            let (v, ub) = point(q, ic, &u);
                            sum += v;
                            kernel.backward(params, &[unwrap_adjoint(&m, &ub)], &mut g);
                        }
                        (sum, g)
                    })
                    .collect();
                let mut grad = vec![0.0; params.len()];
                let mut total = 0.0;
                for (s, g) in &parts {
                    total += s;
                    add_into(&mut grad, g);
                }
                (total, grad)
            }
        };
        if !loss.is_finite() {
            return Err(Error::NonFinite {
                what: "batch loss".into(),
                value: loss,
            });
        }
        if let Some(bad) = grad.iter().find(|v| !v.is_finite()) {
            return Err(Error::NonFinite {
                what: "parameter gradient".into(),
                value: *bad,
            });
        }
        Ok((loss, grad))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::autodiff::{directional_derivs, grad, Real, Var};
    use crate::model::tests::sample_models;
    use crate::problems::IbvpSpec;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn random_batch(rng: &mut ChaCha8Rng, n_ic: usize, per_ic: usize) -> Batch {
        let ics: Vec<ICSample> = (0..n_ic)
            .map(|_| crate::problems::sample_fourier_ic(2, 1.0, rng))
            .collect();
        let mut queries = Vec::new();
        for _ in 0..per_ic {
            for ic in (0..n_ic).rev() {
                queries.push(Query {
                    ic,
                    t: rng.gen(),
                    x: rng.gen(),
                });
            }
        }
        Batch::new(ics, queries).unwrap()
    }

    #[test]
    fn batch_groups_queries() {
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        let b = random_batch(&mut rng, 4, 3);
        for i in 0..4 {
            assert_eq!(b.queries_for(i).len(), 3);
            assert!(b.queries_for(i).iter().all(|q| q.ic == i));
        }
        assert!(Batch::new(vec![ICSample::constant(1.0)], vec![Query { ic: 1, t: 0.0, x: 0.0 }]).is_err());
        assert!(Batch::paired(vec![ICSample::constant(1.0)], &[]).is_err());
    }

    #[test]
    fn wrapped_channels_match_jets() {
        let ic = ICSample::Fourier {
            a0: 0.2,
            sin: vec![0.7, -0.3],
            cos: vec![0.1, 0.4],
        };
        let raw_fn = |t: Jet2<f64>, x: Jet2<f64>| (t.scale(1.3) + x.scale(2.1)).sin() + x * x * t;
        for cfg in [
            IbvpSpec::heat(0.05).constraints(true, true),
            IbvpSpec::heat(0.05).constraints(true, false),
            IbvpSpec::burgers().constraints(false, true),
            IbvpSpec::burgers().constraints(true, true),
        ] {
            let (t, x) = (0.37, 0.61);
            let r = directional_derivs(raw_fn, t, x);
            let (u, _) = wrap_channels(&cfg, &ic, t, x, &[r.u, r.u_t, r.u_x, r.u_xx]);
            let e = directional_derivs(
                |tj, xj| cfg.apply(raw_fn(tj, xj), tj, xj, ic.eval(xj), ic.boundary_values()),
                t,
                x,
            );
            let expect = [e.u, e.u_t, e.u_x, e.u_xx];
            for c in 0..4 {
                assert!((u[c] - expect[c]).abs() < 1e-12, "{u:?} vs {expect:?}");
            }
        }
    }

    #[test]
    fn fused_gradient_matches_tape_for_every_model() {
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        let w: Channels = [0.3, -1.1, 0.7, 0.25];
        for model in sample_models() {
            let p = model.init(&mut rng);
            // Perturb so that no layer sits at its special initialization.
            let p: Vec<f64> = p.0.iter().map(|v| v + rng.gen_range(-0.05..0.05)).collect();
            let batch = random_batch(&mut rng, 3, 2);
            let (loss, g) = model
                .loss_and_grad(&p, &batch, |_, _, u| {
                    let v = w[0] * u[0] + w[1] * u[1] + w[2] * u[2] + w[3] * u[3];
                    (v, w)
                })
                .unwrap();

            let mut expect_loss = 0.0;
            let expect = grad(
                |pv: &[Var]| {
                    let pj: Vec<Jet2<Var>> = pv.iter().map(|&v| Jet2::constant(v)).collect();
                    let mut total = Var::constant(0.0);
                    for q in batch.queries() {
                        let ic = &batch.ics[q.ic];
                        let d = directional_derivs(
                            |tj, xj| model.eval_generic(&pj, ic, tj, xj).unwrap(),
                            Var::constant(q.t),
                            Var::constant(q.x),
                        );
                        total = total + d.u.scale(w[0]) + d.u_t.scale(w[1]) + d.u_x.scale(w[2]) + d.u_xx.scale(w[3]);
                    }
                    total
                },
                &p,
            )
            .unwrap();
            for q in batch.queries() {
                let ic = &batch.ics[q.ic];
                let d = directional_derivs(
                    |tj: Jet2<f64>, xj| {
                        let pj: Vec<Jet2<f64>> = p.iter().map(|&v| Jet2::constant(v)).collect();
                        model.eval_generic(&pj, ic, tj, xj).unwrap()
                    },
                    q.t,
                    q.x,
                );
                expect_loss += w[0] * d.u + w[1] * d.u_t + w[2] * d.u_x + w[3] * d.u_xx;
            }
            assert!((loss - expect_loss).abs() < 1e-10 * (1.0 + expect_loss.abs()));
            for (a, b) in g.iter().zip(&expect) {
                assert!((a - b).abs() < 1e-9 * (1.0 + b.abs()), "{:?}: {a} vs {b}", model.kind());
            }
        }
    }

    #[test]
    fn non_finite_loss_is_reported() {
        let model = &sample_models()[2];
        let p = model.init(&mut ChaCha8Rng::seed_from_u64(0));
        let batch = Batch::paired(vec![ICSample::constant(1.0)], &[(0.5, 0.5)]).unwrap();
        let r = model.loss_and_grad(p.as_slice(), &batch, |_, _, _| (f64::NAN, [0.0; 4]));
        assert!(matches!(r, Err(Error::NonFinite { .. })));
    }
}
