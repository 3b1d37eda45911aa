//! Physics-informed loss components, their minibatches, and two evaluation
//! routes: a fused one over [`Model::loss_and_grad`] used for training and a
//! generic one over [`Real`] scalars used as its reference.

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::autodiff::{try_directional_derivs, Jet2, Real};
use crate::error::{Error, Result};
use crate::model::{Batch, Model};
use crate::nets::{BoundaryKind, Channels};
use crate::problems::{sample_collocation, ICSample, IbvpSpec, IcFamily};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum LossKind {
    Mae,
    Mse,
}

impl LossKind {
    /// `(ℓ(d), ℓ'(d))`.
    #[inline]
    pub fn eval(self, d: f64) -> (f64, f64) {
        match self {
            LossKind::Mae => (d.abs(), if d > 0.0 { 1.0 } else if d < 0.0 { -1.0 } else { 0.0 }),
            LossKind::Mse => (d * d, 2.0 * d),
        }
    }

    pub fn eval_generic<S: Real>(self, d: S) -> S {
        match self {
            LossKind::Mae => d.abs(),
            LossKind::Mse => d.square(),
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Term {
    Pde,
    Ic,
    Bc,
}

impl Term {
    pub const ALL: [Term; 3] = [Term::Pde, Term::Ic, Term::Bc];

    pub fn index(self) -> usize {
        self as usize
    }
}

/// Where training initial conditions come from.
#[derive(Clone, Debug, PartialEq)]
pub enum IcSource {
    Family(IcFamily),
    Fixed(ICSample),
}

impl IcSource {
    pub fn sample<R: Rng>(&self, n: usize, rng: &mut R) -> Vec<ICSample> {
        match self {
            IcSource::Family(f) => (0..n).map(|_| f.sample(rng)).collect(),
            IcSource::Fixed(ic) => vec![ic.clone(); n],
        }
    }
}

/// Minibatch for one loss component: `n` initial conditions, each paired with
/// one point. PDE points are uniform in `[0, T] × [0, 1]`; IC points lie on
/// `t = 0`; BC points lie on a uniformly chosen Dirichlet boundary.
pub fn sample_term_batch<R: Rng>(
    term: Term,
    source: &IcSource,
    ibvp: &IbvpSpec,
    n: usize,
    rng: &mut R,
) -> Result<Batch> {
    let ics = source.sample(n, rng);
    let points: Vec<(f64, f64)> = match term {
        Term::Pde => sample_collocation(n, ibvp.t_final, rng),
        Term::Ic => (0..n).map(|_| (0.0, rng.gen_range(0.0..=1.0))).collect(),
        Term::Bc => (0..n)
            .map(|_| {
                let t = rng.gen_range(0.0..=ibvp.t_final);
                let x = match ibvp.bc_kind() {
                    BoundaryKind::DirichletBothEnds => {
                        if rng.gen::<bool>() {
                            1.0
                        } else {
                            0.0
                        }
                    }
                    BoundaryKind::DirichletLeft => 0.0,
                };
                (t, x)
            })
            .collect(),
    };
    Batch::paired(ics, &points)
}

/// Mean loss of one component and its parameter gradient via the fused route.
pub fn term_loss_and_grad(
    term: Term,
    model: &Model,
    params: &[f64],
    ibvp: &IbvpSpec,
    batch: &Batch,
    kind: LossKind,
) -> Result<(f64, Vec<f64>)> {
    if batch.is_empty() {
        return Err(Error::Config("empty loss batch".into()));
    }
    let inv_n = 1.0 / batch.len() as f64;
    match term {
        Term::Pde => model.loss_and_grad(params, batch, |_, _, u: &Channels| {
            let (r, dr) = ibvp.residual_with_partials(u);
            let (l, dl) = kind.eval(r);
            let s = dl * inv_n;
            (l * inv_n, [dr[0] * s, dr[1] * s, dr[2] * s, dr[3] * s])
        }),
        Term::Ic | Term::Bc => model.loss_and_grad(params, batch, |q, ic, u: &Channels| {
            let (l, dl) = kind.eval(u[0] - ic.eval(q.x));
            (l * inv_n, [dl * inv_n, 0.0, 0.0, 0.0])
        }),
    }
}

fn lift_params<S: Real>(params: &[S]) -> Vec<Jet2<S>> {
    params.iter().map(|&p| Jet2::constant(p)).collect()
}

/// Mean PDE residual loss through the generic scalar route.
pub fn loss_pde<S: Real>(model: &Model, params: &[S], ibvp: &IbvpSpec, batch: &Batch, kind: LossKind) -> Result<S> {
    let lifted = lift_params(params);
    let mut total = S::lift(0.0);
    for (k, q) in batch.queries().iter().enumerate() {
        let ic = &batch.ics[q.ic];
        let d = try_directional_derivs(
            |t, x| model.eval_generic(&lifted, ic, t, x),
            S::lift(q.t),
            S::lift(q.x),
        )?;
        let r = ibvp.residual(d.u, d.u_t, d.u_x, d.u_xx);
        if !r.value().is_finite() {
            return Err(Error::NonFinite {
                what: format!("residual at batch element {k}"),
                value: r.value(),
            });
        }
        total = total + kind.eval_generic(r);
    }
    Ok(total.scale(1.0 / batch.len() as f64))
}

/// Mean deviation `û(t, x) − u₀(x)` at the batch points; used for both the
/// initial-condition loss (points on `t = 0`) and the boundary loss (points on
/// the Dirichlet boundary, where the boundary data equals `u₀` there).
pub fn loss_supervised<S: Real>(model: &Model, params: &[S], batch: &Batch, kind: LossKind) -> Result<S> {
    let mut total = S::lift(0.0);
    for q in batch.queries() {
        let ic = &batch.ics[q.ic];
        let u = model.eval_generic(params, ic, S::lift(q.t), S::lift(q.x))?;
        total = total + kind.eval_generic(u.add_const(-ic.eval(q.x)));
    }
    Ok(total.scale(1.0 / batch.len() as f64))
}

pub fn loss_ic<S: Real>(model: &Model, params: &[S], batch: &Batch, kind: LossKind) -> Result<S> {
    loss_supervised(model, params, batch, kind)
}

pub fn loss_bc<S: Real>(model: &Model, params: &[S], batch: &Batch, kind: LossKind) -> Result<S> {
    loss_supervised(model, params, batch, kind)
}
