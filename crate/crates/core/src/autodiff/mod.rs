//! Derivative machinery: jets for `(t, x)` derivatives of network outputs and
//! a reverse-mode tape for parameter gradients.
//!
//! The two compose: `Jet2<Var>` carries `u`, `u_t`, `u_x`, `u_xx` as tape
//! variables, so a loss built from PDE residuals can be differentiated with
//! respect to every parameter that fed the network.

mod jet;
mod scalar;
mod tape;

pub use jet::{jet_seed, Direction, Jet2};
pub use scalar::Real;
pub use tape::{grad, value_and_grad, Adjoints, Tape, Var};

use crate::error::Error;

/// Value and the space-time derivatives a first-order-in-time, second-order-
/// in-space residual needs.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct SpaceTimeDerivs<S> {
    pub u: S,
    pub u_t: S,
    pub u_x: S,
    pub u_xx: S,
}

/// Evaluate `net` twice: seeded along `t` (for `u_t`) and along `x` (for `u_x`,
/// `u_xx`). The results stay differentiable in whatever `S` carries.
pub fn directional_derivs<S, F>(net: F, t: S, x: S) -> SpaceTimeDerivs<S>
where
    S: Real,
    F: Fn(Jet2<S>, Jet2<S>) -> Jet2<S>,
{
    let along_t = net(Jet2::variable(t), Jet2::constant(x));
    let along_x = net(Jet2::constant(t), Jet2::variable(x));
    SpaceTimeDerivs {
        u: along_x.val,
        u_t: along_t.d1,
        u_x: along_x.d1,
        u_xx: along_x.d2,
    }
}

/// Fallible variant of [`directional_derivs`].
pub fn try_directional_derivs<S, F>(net: F, t: S, x: S) -> Result<SpaceTimeDerivs<S>, Error>
where
    S: Real,
    F: Fn(Jet2<S>, Jet2<S>) -> Result<Jet2<S>, Error>,
{
    let along_t = net(Jet2::variable(t), Jet2::constant(x))?;
    let along_x = net(Jet2::constant(t), Jet2::variable(x))?;
    Ok(SpaceTimeDerivs {
        u: along_x.val,
        u_t: along_t.d1,
        u_x: along_x.d1,
        u_xx: along_x.d2,
    })
}
