//! Initial boundary value problems on `[0, T] × [0, 1]`: the heat equation
//! with Dirichlet data at both ends and the inviscid Burgers equation with
//! Dirichlet data at `x = 0`.

mod ic;

pub use ic::{sample_affine_ic, sample_fourier_ic, ICSample, IcFamily, TrigFn, TrigTerm};

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::autodiff::Real;
use crate::error::{Error, Result};
use crate::nets::{BoundaryKind, ConstraintConfig, ConstraintMode};

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "equation", rename_all = "snake_case")]
pub enum Equation {
    /// `∂_t u = κ ∂_xx u`.
    Heat { kappa: f64 },
    /// `∂_t u = −u ∂_x u`.
    Burgers,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct IbvpSpec {
    pub equation: Equation,
    pub t_final: f64,
    pub ic_family: IcFamily,
}

pub const DEFAULT_KAPPA: f64 = 0.05;

impl IbvpSpec {
    pub fn heat(kappa: f64) -> Self {
        Self {
            equation: Equation::Heat { kappa },
            t_final: 1.0,
            ic_family: IcFamily::fourier_default(),
        }
    }

    pub fn burgers() -> Self {
        Self {
            equation: Equation::Burgers,
            t_final: 1.0,
            ic_family: IcFamily::affine_default(),
        }
    }

    pub fn bc_kind(&self) -> BoundaryKind {
        match self.equation {
            Equation::Heat { .. } => BoundaryKind::DirichletBothEnds,
            Equation::Burgers => BoundaryKind::DirichletLeft,
        }
    }

    pub fn needs_second_derivative(&self) -> bool {
        matches!(self.equation, Equation::Heat { .. })
    }

    pub fn constraints(&self, hardcode_ic: bool, hardcode_bc: bool) -> ConstraintConfig {
        let mode = |hard| if hard { ConstraintMode::Hardcoded } else { ConstraintMode::Soft };
        ConstraintConfig {
            t_final: self.t_final,
            ic_mode: mode(hardcode_ic),
            bc_mode: mode(hardcode_bc),
            bc_kind: self.bc_kind(),
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.t_final > 0.0) {
            return Err(Error::Config(format!("t_final must be > 0, got {}", self.t_final)));
        }
        if let Equation::Heat { kappa } = self.equation {
            if !(kappa > 0.0) {
                return Err(Error::Config(format!("kappa must be > 0, got {kappa}")));
            }
        }
        self.ic_family.validate()
    }

    /// `∂_t u − 𝒩(u)`.
    pub fn residual<S: Real>(&self, u: S, u_t: S, u_x: S, u_xx: S) -> S {
        match self.equation {
            Equation::Heat { kappa } => u_t - u_xx.scale(kappa),
            Equation::Burgers => u_t + u * u_x,
        }
    }

    /// Residual value and its partials with respect to `(u, u_t, u_x, u_xx)`.
    #[inline]
    pub fn residual_with_partials(&self, u: &[f64; 4]) -> (f64, [f64; 4]) {
        let [v, vt, vx, vxx] = *u;
        match self.equation {
            Equation::Heat { kappa } => (vt - kappa * vxx, [0.0, 1.0, 0.0, -kappa]),
            Equation::Burgers => (vt + v * vx, [vx, 1.0, v, 0.0]),
        }
    }
}

/// `n` i.i.d. uniform points `(t, x)` in `[0, T] × [0, 1]`.
pub fn sample_collocation<R: Rng>(n: usize, t_final: f64, rng: &mut R) -> Vec<(f64, f64)> {
    (0..n)
        .map(|_| (rng.gen_range(0.0..=t_final), rng.gen_range(0.0..=1.0)))
        .collect()
}
