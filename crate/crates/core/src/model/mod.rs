//! The three trainable operator models behind one interface: the hypernetwork
//! (NPR), the DeepONet baseline and a plain dense PINN bound to a single
//! initial condition (the fine-tuning target).

mod engine;

pub use engine::{wrap_channels, Batch, Query};

use rand::Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::autodiff::Real;
use crate::deeponet::{deeponet_eval, DeepONetSpec};
use crate::error::{Error, Result};
use crate::nets::{
    check_len, forward, init_hypernet, init_params, npr_eval, ConstraintConfig, HypernetSpec, MlpSpec, NetSpec,
    ParamVector, ValueKernel,
};
use crate::problems::ICSample;
use crate::reference::FieldGrid;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ModelKind {
    Npr,
    Deeponet,
    DensePinn,
}

impl ModelKind {
    pub fn as_str(self) -> &'static str {
        match self {
            ModelKind::Npr => "npr",
            ModelKind::Deeponet => "deeponet",
            ModelKind::DensePinn => "dense_pinn",
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum ModelSpec {
    Npr(HypernetSpec),
    Deeponet(DeepONetSpec),
    /// A conventional PINN `(t, x) ↦ u`; the initial condition is supplied at
    /// evaluation time instead of through sensors.
    DensePinn(MlpSpec),
}

/// An architecture plus the output wrappers it is trained and evaluated with.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Model {
    pub spec: ModelSpec,
    pub constraints: ConstraintConfig,
}

impl Model {
    pub fn new(spec: ModelSpec, constraints: ConstraintConfig) -> Self {
        Self { spec, constraints }
    }

    pub fn kind(&self) -> ModelKind {
        match self.spec {
            ModelSpec::Npr(_) => ModelKind::Npr,
            ModelSpec::Deeponet(_) => ModelKind::Deeponet,
            ModelSpec::DensePinn(_) => ModelKind::DensePinn,
        }
    }

    pub fn param_count(&self) -> usize {
        match &self.spec {
            ModelSpec::Npr(s) => s.hyper.param_count(),
            ModelSpec::Deeponet(s) => s.param_count(),
            ModelSpec::DensePinn(s) => s.param_count(),
        }
    }

    /// Number of sensors, or `None` when the model takes no sensor input.
    pub fn d_enc(&self) -> Option<usize> {
        match &self.spec {
            ModelSpec::Npr(s) => Some(s.d_enc()),
            ModelSpec::Deeponet(s) => Some(s.d_enc()),
            ModelSpec::DensePinn(_) => None,
        }
    }

    pub fn validate(&self) -> Result<()> {
        match &self.spec {
            ModelSpec::Npr(s) => s.validate()?,
            ModelSpec::Deeponet(s) => s.validate()?,
            ModelSpec::DensePinn(s) => {
                s.validate()?;
                if s.d_input != 2 || s.d_output != 1 {
                    return Err(Error::Config("dense PINN must map (t, x) to a scalar".into()));
                }
            }
        }
        if !(self.constraints.t_final > 0.0) {
            return Err(Error::Config("constraint horizon must be > 0".into()));
        }
        Ok(())
    }

    pub fn init<R: Rng>(&self, rng: &mut R) -> ParamVector {
        match &self.spec {
            ModelSpec::Npr(s) => init_hypernet(s, rng),
            ModelSpec::Deeponet(s) => {
                let mut p = init_params(&s.trunk, rng).0;
                p.extend(init_params(&s.branch, rng).0);
                ParamVector(p)
            }
            ModelSpec::DensePinn(s) => init_params(s, rng),
        }
    }

    /// Constrained model output at one point, generic over the scalar type.
    /// This is the slow reference route used to check the fused engine.
    pub fn eval_generic<S: Real>(&self, params: &[S], ic: &ICSample, t: S, x: S) -> Result<S> {
        match &self.spec {
            ModelSpec::Npr(s) => {
                let sensors = ic.discretize(s.d_enc());
                npr_eval(s, params, &sensors, t, x, &self.constraints, ic)
            }
            ModelSpec::Deeponet(s) => {
                let sensors = ic.discretize(s.d_enc());
                deeponet_eval(s, params, &sensors, t, x, &self.constraints, ic)
            }
            ModelSpec::DensePinn(s) => {
                let raw = forward(s, params, &[t, x])?[0];
                Ok(self.constraints.apply(raw, t, x, ic.eval(x), ic.boundary_values()))
            }
        }
    }

    /// Tabulate the constrained model for one initial condition on an
    /// `nt × nx` grid over `[0, T] × [0, 1]`.
    pub fn field(&self, params: &[f64], ic: &ICSample, nt: usize, nx: usize) -> Result<FieldGrid> {
        check_len("model parameters", self.param_count(), params.len())?;
        if nt < 1 || nx < 1 {
            return Err(Error::Grid(format!("empty grid {nt}×{nx}")));
        }
        let mut grid = FieldGrid::new(self.constraints.t_final, nt, nx);
        let u0: Vec<f64> = grid.x_vals.iter().map(|&x| ic.eval(x)).collect();
        let boundary = ic.boundary_values();
        let cfg = self.constraints;

        // A coordinate network with its parameters, plus the branch latent
        // vector when the raw output is a dot product.
        let (theta, branch_out);
        let (proto, coord_params, branch): (ValueKernel, &[f64], Option<&[f64]>) = match &self.spec {
            ModelSpec::Npr(s) => {
                theta = forward(&s.hyper, params, &ic.discretize(s.d_enc()))?;
                (ValueKernel::new(&s.target), theta.as_slice(), None)
            }
            ModelSpec::Deeponet(s) => {
                let (trunk_p, branch_p) = s.split(params);
                branch_out = forward(&s.branch, branch_p, &ic.discretize(s.d_enc()))?;
                (ValueKernel::new(&s.trunk), trunk_p, Some(branch_out.as_slice()))
            }
            ModelSpec::DensePinn(s) => (ValueKernel::new(s), params, None),
        };

        let t_vals = grid.t_vals.clone();
        let x_vals = grid.x_vals.clone();
        grid.values.par_chunks_mut(nx).enumerate().for_each(|(i, row)| {
            let mut kernel = proto.clone();
            let t = t_vals[i];
            for (j, out) in row.iter_mut().enumerate() {
                let x = x_vals[j];
                let y = kernel.eval(coord_params, &[t, x]);
                let raw = match branch {
                    Some(b) => y.iter().zip(b).map(|(a, b)| a * b).sum(),
                    None => y[0],
                };
                *out = cfg.apply(raw, t, x, u0[j], boundary);
            }
        });
        if let Some(bad) = grid.values.iter().find(|v| !v.is_finite()) {
            return Err(Error::NonFinite {
                what: "model field".into(),
                value: *bad,
            });
        }
        Ok(grid)
    }
}
