//! Output reparametrizations that satisfy initial and Dirichlet boundary data
//! by construction.

use serde::{Deserialize, Serialize};

use crate::autodiff::Real;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ConstraintMode {
    Hardcoded,
    Soft,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum BoundaryKind {
    /// `u(t,0) = u₀(0)`, `u(t,1) = u₀(1)`.
    DirichletBothEnds,
    /// `u(t,0) = u₀(0)` only.
    DirichletLeft,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct ConstraintConfig {
    pub t_final: f64,
    pub ic_mode: ConstraintMode,
    pub bc_mode: ConstraintMode,
    pub bc_kind: BoundaryKind,
}

/// `(t/T)·raw + ((T−t)/T)·u₀(x)`. At `t = 0` the raw output is multiplied by
/// an exact zero.
#[inline]
pub fn hard_ic<S: Real>(raw: S, u0_at_x: S, t: S, t_final: f64) -> S {
    let tf = S::lift(t_final);
    (t / tf) * raw + ((tf - t) / tf) * u0_at_x
}

/// `(1 − β)·raw + β·u_b` for a blend value `β = β(x)`.
#[inline]
pub fn hard_bc<S: Real>(raw: S, u_b_at_t: S, beta: S) -> S {
    (S::lift(1.0) - beta) * raw + beta * u_b_at_t
}

/// Blend for a single Dirichlet end at `x = 0`.
#[inline]
pub fn beta_left<S: Real>(x: S) -> S {
    S::lift(1.0) - x
}

/// Both ends pinned: `raw·x(1−x) + (1−x)·u_L + x·u_R`.
#[inline]
pub fn hard_bc_both_ends<S: Real>(raw: S, x: S, left: f64, right: f64) -> S {
    let one = S::lift(1.0);
    raw * x * (one - x) + (one - x) * S::lift(left) + x * S::lift(right)
}

impl ConstraintConfig {
    pub fn hardcoded(t_final: f64, bc_kind: BoundaryKind) -> Self {
        Self {
            t_final,
            ic_mode: ConstraintMode::Hardcoded,
            bc_mode: ConstraintMode::Hardcoded,
            bc_kind,
        }
    }

    pub fn ic_hardcoded(&self) -> bool {
        self.ic_mode == ConstraintMode::Hardcoded
    }

    pub fn bc_hardcoded(&self) -> bool {
        self.bc_mode == ConstraintMode::Hardcoded
    }

    /// Wrap a raw network output. The boundary blend is applied first and the
    /// initial-condition blend outermost, so `t = 0` reproduces `u₀` exactly.
    ///
    /// `u0_at_x` is the initial condition evaluated at `x` (carrying whatever
    /// derivative information `S` holds); `boundary` is `(u₀(0), u₀(1))`.
    pub fn apply<S: Real>(&self, raw: S, t: S, x: S, u0_at_x: S, boundary: (f64, f64)) -> S {
        let inner = if self.bc_hardcoded() {
            match self.bc_kind {
                BoundaryKind::DirichletBothEnds => hard_bc_both_ends(raw, x, boundary.0, boundary.1),
                BoundaryKind::DirichletLeft => hard_bc(raw, S::lift(boundary.0), beta_left(x)),
            }
        } else {
            raw
        };
        if self.ic_hardcoded() {
            hard_ic(inner, u0_at_x, t, self.t_final)
        } else {
            inner
        }
    }

    /// The wrapper is affine in the raw output: returns `(m, c)` with
    /// `apply(raw) = m·raw + c`.
    pub fn affine_coefficients<S: Real>(&self, t: S, x: S, u0_at_x: S, boundary: (f64, f64)) -> (S, S) {
        let c = self.apply(S::lift(0.0), t, x, u0_at_x, boundary);
        let m = self.apply(S::lift(1.0), t, x, u0_at_x, boundary) - c;
        (m, c)
    }

    /// Boundary points where Dirichlet data is imposed.
    pub fn boundary_points(&self) -> &'static [f64] {
        match self.bc_kind {
            BoundaryKind::DirichletBothEnds => &[0.0, 1.0],
            BoundaryKind::DirichletLeft => &[0.0],
        }
    }
}
