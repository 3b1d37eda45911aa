//! Run configuration read from TOML files. Every field has a default; the
//! defaults reproduce the published hyperparameter table.

use std::path::{Path, PathBuf};

use npr_core::deeponet::{DeepONetSpec, DEFAULT_P_LAT};
use npr_core::eval::{FinetuneConfig, DEFAULT_EVAL_ICS, DEFAULT_GRID, EVAL_SEED};
use npr_core::model::{ModelKind, ModelSpec};
use npr_core::nets::{Activation, HypernetSpec, MlpSpec, NetSpec};
use npr_core::problems::{IbvpSpec, IcFamily, DEFAULT_KAPPA};
use npr_core::training::TrainConfig;
use serde::{Deserialize, Serialize};

use crate::error::{CliError, Result};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum EquationKind {
    Heat,
    Burgers,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ProblemConfig {
    pub equation: EquationKind,
    pub kappa: f64,
    pub t_final: f64,
    pub fourier_n: usize,
    pub fourier_c: f64,
    pub fourier_shrink: bool,
    pub a_low: f64,
    pub a_high: f64,
    pub b_low: f64,
    pub b_high: f64,
}

impl Default for ProblemConfig {
    fn default() -> Self {
        Self {
            equation: EquationKind::Heat,
            kappa: DEFAULT_KAPPA,
            t_final: 1.0,
            fourier_n: 3,
            fourier_c: 2.0,
            fourier_shrink: false,
            a_low: -1.0,
            a_high: 0.0,
            b_low: 1.0,
            b_high: 2.0,
        }
    }
}

impl ProblemConfig {
    pub fn ibvp(&self) -> IbvpSpec {
        let mut spec = match self.equation {
            EquationKind::Heat => IbvpSpec::heat(self.kappa),
            EquationKind::Burgers => IbvpSpec::burgers(),
        };
        spec.t_final = self.t_final;
        spec.ic_family = match self.equation {
            EquationKind::Heat => IcFamily::Fourier {
                n: self.fourier_n,
                c: self.fourier_c,
                shrink: self.fourier_shrink,
            },
            EquationKind::Burgers => IcFamily::Affine {
                a_low: self.a_low,
                a_high: self.a_high,
                b_low: self.b_low,
                b_high: self.b_high,
            },
        };
        spec
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ArchKind {
    Npr,
    Deeponet,
}

impl std::str::FromStr for ArchKind {
    type Err = String;
    fn from_str(s: &str) -> Result<Self, String> {
        match s {
            "npr" => Ok(ArchKind::Npr),
            "deeponet" => Ok(ArchKind::Deeponet),
            other => Err(format!("unknown model {other:?}, expected npr or deeponet")),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ModelConfig {
    pub kind: ArchKind,
    pub activation: Activation,
    pub d_enc: usize,
    pub hyper_layers: usize,
    pub hyper_hidden: usize,
    pub target_layers: usize,
    pub target_hidden: usize,
    pub rank: usize,
    pub deeponet_layers: usize,
    /// Defaults to 64 for heat and 128 for Burgers.
    pub branch_hidden: Option<usize>,
    /// Defaults to 32 for heat and 64 for Burgers.
    pub trunk_hidden: Option<usize>,
    pub p_lat: usize,
}

impl Default for ModelConfig {
    fn default() -> Self {
        Self {
            kind: ArchKind::Npr,
            activation: Activation::Sin,
            d_enc: 32,
            hyper_layers: 4,
            hyper_hidden: 64,
            target_layers: 4,
            target_hidden: 32,
            rank: 4,
            deeponet_layers: 4,
            branch_hidden: None,
            trunk_hidden: None,
            p_lat: DEFAULT_P_LAT,
        }
    }
}

impl ModelConfig {
    pub fn spec(&self, equation: EquationKind) -> ModelSpec {
        match self.kind {
            ArchKind::Npr => {
                let target =
                    MlpSpec::new(2, 1, self.target_layers, self.target_hidden, self.activation).low_rank(self.rank);
                ModelSpec::Npr(HypernetSpec::new(
                    self.d_enc,
                    self.hyper_layers,
                    self.hyper_hidden,
                    self.activation,
                    target,
                ))
            }
            ArchKind::Deeponet => {
                let (branch, trunk) = match equation {
                    EquationKind::Heat => (64, 32),
                    EquationKind::Burgers => (128, 64),
                };
                ModelSpec::Deeponet(DeepONetSpec::new(
                    self.d_enc,
                    self.deeponet_layers,
                    self.branch_hidden.unwrap_or(branch),
                    self.trunk_hidden.unwrap_or(trunk),
                    self.p_lat,
                    self.activation,
                ))
            }
        }
    }

    pub fn model_kind(&self) -> ModelKind {
        match self.kind {
            ArchKind::Npr => ModelKind::Npr,
            ArchKind::Deeponet => ModelKind::Deeponet,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct EvalConfig {
    pub n_ics: usize,
    pub seed: u64,
    pub nt: usize,
    pub nx: usize,
    pub export_fields: bool,
}

impl Default for EvalConfig {
    fn default() -> Self {
        Self {
            n_ics: DEFAULT_EVAL_ICS,
            seed: EVAL_SEED,
            nt: DEFAULT_GRID,
            nx: DEFAULT_GRID,
            export_fields: true,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct OutputConfig {
    pub dir: PathBuf,
    /// Progress CSV row interval.
    pub progress_every: usize,
}

impl Default for OutputConfig {
    fn default() -> Self {
        Self {
            dir: PathBuf::from("runs/default"),
            progress_every: 100,
        }
    }
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunConfig {
    pub problem: ProblemConfig,
    pub model: ModelConfig,
    pub train: TrainConfig,
    pub eval: EvalConfig,
    pub finetune: FinetuneConfig,
    pub output: OutputConfig,
}

fn check(ok: bool, path: &str, reason: impl Into<String>) -> Result<()> {
    if ok {
        Ok(())
    } else {
        Err(CliError::config(path, reason))
    }
}

fn nested(path: &str, r: npr_core::Result<()>) -> Result<()> {
    r.map_err(|e| CliError::config(path, e.to_string()))
}

impl RunConfig {
    pub fn from_toml(text: &str) -> Result<Self> {
        let cfg: RunConfig = toml::from_str(text).map_err(|e| CliError::config("config", e.message().to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| CliError::io(format!("reading config {}", path.display()), e))?;
        let cfg: RunConfig = toml::from_str(&text).map_err(|e| CliError::config(path.display().to_string(), e.to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn ibvp(&self) -> IbvpSpec {
        self.problem.ibvp()
    }

    pub fn model_spec(&self) -> ModelSpec {
        self.model.spec(self.problem.equation)
    }

    /// Check everything before any compute, reporting the offending field.
    pub fn validate(&self) -> Result<()> {
        let p = &self.problem;
        check(p.t_final > 0.0, "problem.t_final", "must be > 0")?;
        if p.equation == EquationKind::Heat {
            check(p.kappa > 0.0 && p.kappa.is_finite(), "problem.kappa", "must be > 0")?;
        }
        nested("problem", self.ibvp().validate())?;

        let m = &self.model;
        check(m.d_enc >= 2, "model.d_enc", "at least two sensors are required")?;
        check(m.hyper_hidden >= 1, "model.hyper_hidden", "must be ≥ 1")?;
        check(m.target_hidden >= 1, "model.target_hidden", "must be ≥ 1")?;
        if m.kind == ArchKind::Npr {
            check(m.target_layers >= 1, "model.target_layers", "must be ≥ 1")?;
            check(
                m.rank >= 1 && m.rank <= m.target_hidden,
                "model.rank",
                format!("must lie in 1..={} (the target hidden width), got {}", m.target_hidden, m.rank),
            )?;
        } else {
            check(m.p_lat >= 1, "model.p_lat", "must be ≥ 1")?;
        }
        nested("model", self.model_spec_validate())?;

        let t = &self.train;
        check(t.batch_pde >= 1, "train.batch_pde", "must be ≥ 1")?;
        check(t.lr_peak > 0.0 && t.lr_peak.is_finite(), "train.lr_peak", "must be > 0")?;
        check(t.warmup_frac > 0.0 && t.warmup_frac < 1.0, "train.warmup_frac", "must lie in (0, 1)")?;
        nested("train", t.validate())?;

        let e = &self.eval;
        check(e.n_ics >= 1, "eval.n_ics", "must be ≥ 1")?;
        check(e.nt >= 2 && e.nx >= 2, "eval", "grid must be at least 2×2")?;
        nested("finetune", self.finetune.validate())?;
        check(self.output.progress_every >= 1, "output.progress_every", "must be ≥ 1")?;
        Ok(())
    }

    fn model_spec_validate(&self) -> npr_core::Result<()> {
        match self.model_spec() {
            ModelSpec::Npr(s) => s.validate(),
            ModelSpec::Deeponet(s) => s.validate(),
            ModelSpec::DensePinn(s) => s.validate(),
        }
    }
}

/// Configurations shipped with the tool.
pub mod bundled {
    pub const BURGERS_DESK: &str = include_str!("../configs/burgers_desk.cfg");
    pub const HEAT_DESK: &str = include_str!("../configs/heat_desk.cfg");
    pub const BURGERS_FULL: &str = include_str!("../configs/burgers_full.cfg");
    pub const HEAT_FULL: &str = include_str!("../configs/heat_full.cfg");
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn empty_file_gives_defaults() {
        assert_eq!(RunConfig::from_toml("").unwrap(), RunConfig::default());
    }

    #[test]
    fn bundled_configs_parse() {
        for text in [
            bundled::BURGERS_DESK,
            bundled::HEAT_DESK,
            bundled::BURGERS_FULL,
            bundled::HEAT_FULL,
        ] {
            RunConfig::from_toml(text).unwrap();
        }
    }

    #[test]
    fn errors_name_the_field() {
        let err = RunConfig::from_toml("[model]\ntarget_hidden = 8\nrank = 9\n").unwrap_err();
        assert!(err.to_string().contains("model.rank"), "{err}");
        let err = RunConfig::from_toml("[train]\nlr_peak = -1.0\n").unwrap_err();
        assert!(err.to_string().contains("train.lr_peak"), "{err}");
        let err = RunConfig::from_toml("[model]\nbogus = 1\n").unwrap_err();
        assert!(err.to_string().contains("bogus"), "{err}");
        let err = RunConfig::from_toml("[problem]\nkappa = 0.0\n").unwrap_err();
        assert!(err.to_string().contains("problem.kappa"), "{err}");
    }

    #[test]
    fn deeponet_widths_follow_the_equation() {
        let mut cfg = RunConfig::default();
        cfg.model.kind = ArchKind::Deeponet;
        let ModelSpec::Deeponet(heat) = cfg.model_spec() else { panic!() };
        assert_eq!((heat.branch.d_hidden, heat.trunk.d_hidden), (64, 32));
        cfg.problem.equation = EquationKind::Burgers;
        let ModelSpec::Deeponet(b) = cfg.model_spec() else { panic!() };
        assert_eq!((b.branch.d_hidden, b.trunk.d_hidden), (128, 64));
    }
}
