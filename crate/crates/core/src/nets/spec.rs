use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Activation {
    Sin,
    Tanh,
    Relu,
}

impl Activation {
    /// `σ(z)` and its first three derivatives.
    #[inline]
    pub fn derivatives(self, z: f64) -> [f64; 4] {
        match self {
            Activation::Sin => {
                let (s, c) = z.sin_cos();
                [s, c, -s, -c]
            }
            Activation::Tanh => {
                let t = z.tanh();
                let d1 = 1.0 - t * t;
                let d2 = -2.0 * t * d1;
                let d3 = -2.0 * d1 * d1 + 4.0 * t * t * d1;
                [t, d1, d2, d3]
            }
            Activation::Relu => {
                if z > 0.0 {
                    [z, 1.0, 0.0, 0.0]
                } else {
                    [0.0, 0.0, 0.0, 0.0]
                }
            }
        }
    }

    #[inline]
    pub fn apply(self, z: f64) -> f64 {
        match self {
            Activation::Sin => z.sin(),
            Activation::Tanh => z.tanh(),
            Activation::Relu => z.max(0.0),
        }
    }
}

/// Dense MLP: `n_hidden` hidden layers of width `d_hidden`, linear output.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct MlpSpec {
    pub d_input: usize,
    pub d_output: usize,
    pub n_hidden: usize,
    pub d_hidden: usize,
    pub activation: Activation,
}

/// MLP whose hidden-to-hidden weights are factored as `A·B` with inner
/// dimension `rank`.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct LowRankMlpSpec {
    pub base: MlpSpec,
    pub rank: usize,
}

/// Hypernetwork producing the flat parameters of a low-rank target network
/// from `hyper.d_input` sensor values.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct HypernetSpec {
    pub hyper: MlpSpec,
    pub target: LowRankMlpSpec,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum LayerKind {
    /// `W` is `d_out × d_in`, row-major.
    Dense,
    /// `A` is `d_out × rank`, `B` is `rank × d_in`, both row-major.
    LowRank { rank: usize },
}

/// One affine map plus optional activation, located at `offset` in the flat
/// parameter vector. Biases follow the weights.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct Layer {
    pub kind: LayerKind,
    pub d_in: usize,
    pub d_out: usize,
    pub activated: bool,
    pub offset: usize,
}

impl Layer {
    pub fn weight_count(&self) -> usize {
        match self.kind {
            LayerKind::Dense => self.d_in * self.d_out,
            LayerKind::LowRank { rank } => rank * (self.d_in + self.d_out),
        }
    }

    pub fn param_count(&self) -> usize {
        self.weight_count() + self.d_out
    }

    pub fn bias_offset(&self) -> usize {
        self.offset + self.weight_count()
    }
}

fn build_layers(spec: &MlpSpec, rank: Option<usize>) -> Vec<Layer> {
    let mut layers = Vec::with_capacity(spec.n_hidden + 1);
    let mut offset = 0;
    let mut push = |kind, d_in, d_out, activated| {
        let l = Layer {
            kind,
            d_in,
            d_out,
            activated,
            offset,
        };
        offset += l.param_count();
        layers.push(l);
    };
    push(LayerKind::Dense, spec.d_input, spec.d_hidden, true);
    for _ in 1..spec.n_hidden {
        let kind = match rank {
            Some(rank) => LayerKind::LowRank { rank },
            None => LayerKind::Dense,
        };
        push(kind, spec.d_hidden, spec.d_hidden, true);
    }
    push(LayerKind::Dense, spec.d_hidden, spec.d_output, false);
    layers
}

/// Shared view of dense and low-rank MLP architectures.
pub trait NetSpec {
    fn layers(&self) -> Vec<Layer>;
    fn activation(&self) -> Activation;
    fn d_input(&self) -> usize;
    fn d_output(&self) -> usize;
    fn param_count(&self) -> usize;
    fn validate(&self) -> Result<()>;
}

impl MlpSpec {
    pub fn new(d_input: usize, d_output: usize, n_hidden: usize, d_hidden: usize, activation: Activation) -> Self {
        Self {
            d_input,
            d_output,
            n_hidden,
            d_hidden,
            activation,
        }
    }

    pub fn low_rank(self, rank: usize) -> LowRankMlpSpec {
        LowRankMlpSpec { base: self, rank }
    }
}

impl NetSpec for MlpSpec {
    fn layers(&self) -> Vec<Layer> {
        build_layers(self, None)
    }
    fn activation(&self) -> Activation {
        self.activation
    }
    fn d_input(&self) -> usize {
        self.d_input
    }
    fn d_output(&self) -> usize {
        self.d_output
    }
    fn param_count(&self) -> usize {
        dense_param_count(self)
    }
    fn validate(&self) -> Result<()> {
        if self.d_input == 0 || self.d_output == 0 || self.d_hidden == 0 || self.n_hidden == 0 {
            return Err(Error::Config(format!("all MLP dimensions must be ≥ 1: {self:?}")));
        }
        Ok(())
    }
}

impl NetSpec for LowRankMlpSpec {
    fn layers(&self) -> Vec<Layer> {
        build_layers(&self.base, Some(self.rank))
    }
    fn activation(&self) -> Activation {
        self.base.activation
    }
    fn d_input(&self) -> usize {
        self.base.d_input
    }
    fn d_output(&self) -> usize {
        self.base.d_output
    }
    fn param_count(&self) -> usize {
        lowrank_param_count(self)
    }
    fn validate(&self) -> Result<()> {
        self.base.validate()?;
        if self.rank == 0 || self.rank > self.base.d_hidden {
            return Err(Error::Config(format!(
                "rank must satisfy 1 ≤ r ≤ d_hidden = {}, got {}",
                self.base.d_hidden, self.rank
            )));
        }
        Ok(())
    }
}

impl HypernetSpec {
    /// Hypernetwork with `d_enc` sensor inputs whose output width matches the
    /// target's parameter count.
    pub fn new(d_enc: usize, n_hidden: usize, d_hidden: usize, activation: Activation, target: LowRankMlpSpec) -> Self {
        Self {
            hyper: MlpSpec::new(d_enc, lowrank_param_count(&target), n_hidden, d_hidden, activation),
            target,
        }
    }

    pub fn d_enc(&self) -> usize {
        self.hyper.d_input
    }

    pub fn validate(&self) -> Result<()> {
        self.hyper.validate()?;
        self.target.validate()?;
        if self.hyper.d_output != lowrank_param_count(&self.target) {
            return Err(Error::Config(format!(
                "hypernetwork output {} does not match target parameter count {}",
                self.hyper.d_output,
                lowrank_param_count(&self.target)
            )));
        }
        if self.target.base.d_input != 2 || self.target.base.d_output != 1 {
            return Err(Error::Config("target network must map (t, x) to a scalar".into()));
        }
        Ok(())
    }
}

pub fn dense_param_count(spec: &MlpSpec) -> usize {
    let MlpSpec {
        d_input: di,
        d_output: d_o,
        n_hidden: nh,
        d_hidden: dh,
        ..
    } = *spec;
    di * dh + dh + (nh - 1) * (dh * dh + dh) + dh * d_o + d_o
}

pub fn lowrank_param_count(spec: &LowRankMlpSpec) -> usize {
    let MlpSpec {
        d_input: di,
        d_output: d_o,
        n_hidden: nh,
        d_hidden: dh,
        ..
    } = spec.base;
    let r = spec.rank;
    di * dh + dh + (nh - 1) * (2 * r * dh + dh) + dh * d_o + d_o
}
