//! Physics-informed DeepONet baseline: a branch network encodes the sensor
//! vector, a trunk network encodes `(t, x)`, and the raw output is their dot
//! product.

use serde::{Deserialize, Serialize};

use crate::autodiff::Real;
use crate::error::{Error, Result};
use crate::nets::{check_len, dense_param_count, forward, Activation, ConstraintConfig, MlpSpec, NetSpec};
use crate::problems::ICSample;

/// Parameters are laid out trunk first, then branch.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct DeepONetSpec {
    pub branch: MlpSpec,
    pub trunk: MlpSpec,
    pub p_lat: usize,
}

/// Latent width consistent with every published DeepONet parameter count.
pub const DEFAULT_P_LAT: usize = 32;

impl DeepONetSpec {
    /// Branch `d_enc → (branch_hidden × n_hidden) → p_lat`, trunk
    /// `2 → (trunk_hidden × n_hidden) → p_lat`.
    pub fn new(
        d_enc: usize,
        n_hidden: usize,
        branch_hidden: usize,
        trunk_hidden: usize,
        p_lat: usize,
        activation: Activation,
    ) -> Self {
        Self {
            branch: MlpSpec::new(d_enc, p_lat, n_hidden, branch_hidden, activation),
            trunk: MlpSpec::new(2, p_lat, n_hidden, trunk_hidden, activation),
            p_lat,
        }
    }

    pub fn d_enc(&self) -> usize {
        self.branch.d_input
    }

    pub fn trunk_len(&self) -> usize {
        self.trunk.param_count()
    }

    pub fn param_count(&self) -> usize {
        self.trunk.param_count() + self.branch.param_count()
    }

    /// `(trunk, branch)` parameter slices.
    pub fn split<'a, S>(&self, params: &'a [S]) -> (&'a [S], &'a [S]) {
        params.split_at(self.trunk_len())
    }

    pub fn validate(&self) -> Result<()> {
        self.branch.validate()?;
        self.trunk.validate()?;
        if self.branch.d_output != self.p_lat || self.trunk.d_output != self.p_lat {
            return Err(Error::Config(format!(
                "branch and trunk outputs ({}, {}) must equal p_lat = {}",
                self.branch.d_output, self.trunk.d_output, self.p_lat
            )));
        }
        if self.trunk.d_input != 2 {
            return Err(Error::Config("trunk network must take (t, x)".into()));
        }
        Ok(())
    }
}

/// `(n_trunk, n_branch)`.
pub fn deeponet_param_counts(spec: &DeepONetSpec) -> (usize, usize) {
    (dense_param_count(&spec.trunk), dense_param_count(&spec.branch))
}

/// Unconstrained output `trunk(t, x) · branch(sensors)`.
pub fn deeponet_raw<S: Real>(spec: &DeepONetSpec, params: &[S], sensors: &[f64], t: S, x: S) -> Result<S> {
    check_len("deeponet parameters", spec.param_count(), params.len())?;
    let (trunk_p, branch_p) = spec.split(params);
    let input: Vec<S> = sensors.iter().map(|&v| S::lift(v)).collect();
    let b = forward(&spec.branch, branch_p, &input)?;
    let tr = forward(&spec.trunk, trunk_p, &[t, x])?;
    Ok(b.iter().zip(&tr).fold(S::lift(0.0), |acc, (&bk, &tk)| acc + bk * tk))
}

/// Constrained DeepONet output at one point, with the same wrappers as the
/// hypernetwork model.
pub fn deeponet_eval<S: Real>(
    spec: &DeepONetSpec,
    params: &[S],
    sensors: &[f64],
    t: S,
    x: S,
    constraints: &ConstraintConfig,
    u0: &ICSample,
) -> Result<S> {
    let raw = deeponet_raw(spec, params, sensors, t, x)?;
    Ok(constraints.apply(raw, t, x, u0.eval(x), u0.boundary_values()))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::nets::{init_params, BoundaryKind};
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn published_counts() {
        let heat = DeepONetSpec::new(32, 4, 64, 32, 32, Activation::Sin);
        assert_eq!(deeponet_param_counts(&heat), (4320, 16672));
        let burgers = DeepONetSpec::new(32, 4, 128, 64, 32, Activation::Sin);
        assert_eq!(deeponet_param_counts(&burgers), (14752, 57888));
        let minimal = DeepONetSpec {
            branch: MlpSpec::new(1, 1, 1, 1, Activation::Sin),
            trunk: MlpSpec::new(1, 1, 1, 1, Activation::Sin),
            p_lat: 1,
        };
        assert_eq!(deeponet_param_counts(&minimal), (4, 4));
    }

    #[test]
    fn zero_branch_gives_zero_raw_output() {
        let spec = DeepONetSpec::new(5, 2, 6, 4, 3, Activation::Sin);
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let mut p = init_params(&spec.trunk, &mut rng).0;
        p.extend(vec![0.0; spec.branch.param_count()]);
        let sensors: Vec<f64> = (0..5).map(|_| rng.gen()).collect();
        for _ in 0..10 {
            let (t, x) = (rng.gen::<f64>(), rng.gen::<f64>());
            assert_eq!(deeponet_raw(&spec, &p, &sensors, t, x).unwrap(), 0.0);
        }
    }

    #[test]
    fn matches_manual_dot_product() {
        let spec = DeepONetSpec::new(4, 2, 7, 5, 3, Activation::Tanh);
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let p: Vec<f64> = (0..spec.param_count()).map(|_| rng.gen_range(-1.0..1.0)).collect();
        let sensors = [0.1, -0.4, 0.8, 1.2];
        let (t, x) = (0.3, 0.6);
        let tr = forward(&spec.trunk, &p[..spec.trunk_len()], &[t, x]).unwrap();
        let br = forward(&spec.branch, &p[spec.trunk_len()..], &sensors).unwrap();
        let manual: f64 = tr.iter().zip(&br).map(|(a, b)| a * b).sum();
        assert_eq!(deeponet_raw(&spec, &p, &sensors, t, x).unwrap(), manual);

        let ic = ICSample::Affine {
            slope: -0.5,
            intercept: 1.5,
        };
        let cfg = ConstraintConfig::hardcoded(1.0, BoundaryKind::DirichletLeft);
        assert_eq!(deeponet_eval(&spec, &p, &sensors, 0.0, x, &cfg, &ic).unwrap(), ic.eval(x));
    }

    #[test]
    fn single_latent_is_a_product_of_scalar_nets() {
        let spec = DeepONetSpec::new(3, 1, 4, 4, 1, Activation::Sin);
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let p: Vec<f64> = (0..spec.param_count()).map(|_| rng.gen_range(-1.0..1.0)).collect();
        let s = [0.2, 0.5, 0.9];
        let b = forward(&spec.branch, &p[spec.trunk_len()..], &s).unwrap()[0];
        let tr = forward(&spec.trunk, &p[..spec.trunk_len()], &[0.4, 0.7]).unwrap()[0];
        assert_eq!(deeponet_raw(&spec, &p, &s, 0.4, 0.7).unwrap(), b * tr);
    }

    #[test]
    fn length_checks() {
        let spec = DeepONetSpec::new(3, 1, 4, 4, 2, Activation::Sin);
        assert!(matches!(
            deeponet_raw(&spec, &[0.0; 3], &[0.0; 3], 0.0, 0.0),
            Err(Error::Length { .. })
        ));
        assert!(spec.validate().is_ok());
        let mut bad = spec;
        bad.p_lat = 3;
        assert!(bad.validate().is_err());
    }
}
