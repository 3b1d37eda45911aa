//! Minibatch training with periodic gradient-norm loss balancing, Adam and a
//! warmup + linear-decay learning-rate schedule.

mod adam;
mod losses;

pub use adam::{adam_step, AdamState, BETA1, BETA2, EPSILON};
pub use losses::{
    loss_bc, loss_ic, loss_pde, loss_supervised, sample_term_batch, term_loss_and_grad, IcSource, LossKind, Term,
};

use std::io::Write;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::checkpoint::Checkpoint;
use crate::error::{Error, Result};
use crate::model::{Model, ModelSpec};
use crate::nets::ParamVector;
use crate::problems::IbvpSpec;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TrainConfig {
    pub n_steps: usize,
    pub batch_pde: usize,
    pub batch_ic: usize,
    pub batch_bc: usize,
    pub lr_peak: f64,
    pub warmup_frac: f64,
    pub weight_update_every: usize,
    pub loss_kind: LossKind,
    pub seed: u64,
    pub hardcode_ic: bool,
    pub hardcode_bc: bool,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self {
            n_steps: 65536,
            batch_pde: 2048,
            batch_ic: 256,
            batch_bc: 256,
            lr_peak: 1e-3,
            warmup_frac: 0.1,
            weight_update_every: 100,
            loss_kind: LossKind::Mae,
            seed: 0,
            hardcode_ic: true,
            hardcode_bc: true,
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(Error::Config(m));
        if self.batch_pde == 0 || self.batch_ic == 0 || self.batch_bc == 0 {
            return bad("batch sizes must be ≥ 1".into());
        }
        if !(self.warmup_frac > 0.0 && self.warmup_frac < 1.0) {
            return bad(format!("warmup_frac must lie in (0, 1), got {}", self.warmup_frac));
        }
        if !(self.lr_peak > 0.0) || !self.lr_peak.is_finite() {
            return bad(format!("lr_peak must be > 0, got {}", self.lr_peak));
        }
        if self.weight_update_every == 0 {
            return bad("weight_update_every must be ≥ 1".into());
        }
        Ok(())
    }

    pub fn schedule(&self) -> Schedule {
        Schedule::WarmupLinearDecay {
            peak: self.lr_peak,
            warmup_frac: self.warmup_frac,
            n_steps: self.n_steps,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub enum Schedule {
    /// Linear ramp `0 → peak` over the first `warmup_frac · n_steps` steps,
    /// then linear decay to 0 at `n_steps`.
    WarmupLinearDecay { peak: f64, warmup_frac: f64, n_steps: usize },
    Constant(f64),
}

impl Schedule {
    pub fn lr_at(&self, step: usize) -> f64 {
        match *self {
            Schedule::Constant(lr) => lr,
            Schedule::WarmupLinearDecay {
                peak,
                warmup_frac,
                n_steps,
            } => {
                let n = n_steps as f64;
                let warm = warmup_frac * n;
                let s = step as f64;
                if s <= warm {
                    if warm == 0.0 {
                        peak
                    } else {
                        peak * s / warm
                    }
                } else {
                    (peak * (n - s) / (n - warm)).max(0.0)
                }
            }
        }
    }
}

pub fn lr_at(step: usize, cfg: &TrainConfig) -> f64 {
    cfg.schedule().lr_at(step)
}

/// `[λ_PDE, λ_IC, λ_BC]`. Hardcoded components are fixed at zero.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct LossWeights(pub [f64; 3]);

impl LossWeights {
    pub fn initial(active: [bool; 3]) -> Self {
        Self(active.map(|a| if a { 1.0 } else { 0.0 }))
    }

    pub fn get(&self, term: Term) -> f64 {
        self.0[term.index()]
    }
}

/// `λ_i = M / g_i` with `M = Σ g_i` over active components (`Some` norms).
/// A zero norm keeps that component's previous weight; inactive components
/// get weight zero.
pub fn update_loss_weights(prev: LossWeights, norms: [Option<f64>; 3]) -> Result<LossWeights> {
    let mut total = 0.0;
    for g in norms.iter().flatten() {
        if !g.is_finite() || *g < 0.0 {
            return Err(Error::NonFinite {
                what: "loss-component gradient norm".into(),
                value: *g,
            });
        }
        total += g;
    }
    let mut out = [0.0; 3];
    for (k, g) in norms.iter().enumerate() {
        out[k] = match g {
            None => 0.0,
            Some(g) if *g == 0.0 => prev.0[k],
            Some(g) => total / g,
        };
    }
    Ok(LossWeights(out))
}

/// Progress of one optimization step.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct StepRecord {
    pub step: usize,
    pub lr: f64,
    pub weights: LossWeights,
    /// Component losses; `None` for hardcoded components.
    pub losses: [Option<f64>; 3],
    pub total: f64,
}

pub trait ProgressSink {
    fn record(&mut self, rec: &StepRecord) -> Result<()>;
}

/// Discards progress.
pub struct NullSink;

impl ProgressSink for NullSink {
    fn record(&mut self, _: &StepRecord) -> Result<()> {
        Ok(())
    }
}

impl ProgressSink for Vec<StepRecord> {
    fn record(&mut self, rec: &StepRecord) -> Result<()> {
        self.push(*rec);
        Ok(())
    }
}

/// CSV stream `step,lr,lambda_pde,lambda_ic,lambda_bc,loss_pde,loss_ic,loss_bc,loss_total`,
/// one row every `every` steps (and always the last step).
pub struct CsvSink<W: Write> {
    out: W,
    every: usize,
    last_step: usize,
    header_written: bool,
}

impl<W: Write> CsvSink<W> {
    pub fn new(out: W, every: usize, last_step: usize) -> Self {
        Self {
            out,
            every: every.max(1),
            last_step,
            header_written: false,
        }
    }

    pub fn into_inner(self) -> W {
        self.out
    }
}

impl<W: Write> ProgressSink for CsvSink<W> {
    fn record(&mut self, r: &StepRecord) -> Result<()> {
        if !self.header_written {
            writeln!(
                self.out,
                "step,lr,lambda_pde,lambda_ic,lambda_bc,loss_pde,loss_ic,loss_bc,loss_total"
            )?;
            self.header_written = true;
        }
        if r.step % self.every != 0 && r.step != self.last_step {
            return Ok(());
        }
        let l = |v: Option<f64>| v.map_or(String::new(), |v| v.to_string());
        writeln!(
            self.out,
            "{},{},{},{},{},{},{},{},{}",
            r.step,
            r.lr,
            r.weights.0[0],
            r.weights.0[1],
            r.weights.0[2],
            l(r.losses[0]),
            l(r.losses[1]),
            l(r.losses[2]),
            r.total
        )?;
        Ok(())
    }
}

/// Settings of the optimization loop shared by training and fine-tuning.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct LoopConfig {
    pub n_steps: usize,
    pub batch: [usize; 3],
    pub schedule: Schedule,
    pub weight_update_every: usize,
    pub loss_kind: LossKind,
}

impl LoopConfig {
    pub fn from_train(cfg: &TrainConfig) -> Self {
        Self {
            n_steps: cfg.n_steps,
            batch: [cfg.batch_pde, cfg.batch_ic, cfg.batch_bc],
            schedule: cfg.schedule(),
            weight_update_every: cfg.weight_update_every,
            loss_kind: cfg.loss_kind,
        }
    }
}

fn norm(v: &[f64]) -> f64 {
    v.iter().map(|x| x * x).sum::<f64>().sqrt()
}

fn diverged(step: usize, e: Error) -> Error {
    match e {
        Error::NonFinite { what, value } => Error::Diverged {
            step,
            reason: format!("non-finite {what}: {value}"),
        },
        other => other,
    }
}

/// Gradient norms of every active component on fresh batches.
pub fn component_gradient_norms(
    model: &Model,
    params: &[f64],
    ibvp: &IbvpSpec,
    source: &IcSource,
    lc: &LoopConfig,
    rng: &mut ChaCha8Rng,
) -> Result<[Option<f64>; 3]> {
    let active = active_terms(model);
    let mut norms = [None; 3];
    for term in Term::ALL {
        if !active[term.index()] {
            continue;
        }
        let batch = sample_term_batch(term, source, ibvp, lc.batch[term.index()], rng)?;
        let (_, g) = term_loss_and_grad(term, model, params, ibvp, &batch, lc.loss_kind)?;
        norms[term.index()] = Some(norm(&g));
    }
    Ok(norms)
}

/// `[PDE, IC, BC]` components that contribute to the loss.
pub fn active_terms(model: &Model) -> [bool; 3] {
    [true, !model.constraints.ic_hardcoded(), !model.constraints.bc_hardcoded()]
}

/// Run `lc.n_steps` optimization steps from `params`, following the training
/// algorithm: for step `i = 1..=N`, refresh loss weights when `i` is a
/// multiple of the update frequency, draw fresh batches, form the weighted
/// loss and take an Adam step at `lr(i)`.
pub fn optimize(
    model: &Model,
    ibvp: &IbvpSpec,
    source: &IcSource,
    params: &mut [f64],
    lc: &LoopConfig,
    rng: &mut ChaCha8Rng,
    sink: &mut dyn ProgressSink,
) -> Result<LossWeights> {
    let active = active_terms(model);
    let n_active = active.iter().filter(|&&a| a).count();
    let mut weights = LossWeights::initial(active);
    let mut adam = AdamState::new(params.len());
    let mut total_grad = vec![0.0; params.len()];
    for i in 1..=lc.n_steps {
        if i % lc.weight_update_every == 0 && n_active > 1 {
            let norms = component_gradient_norms(model, params, ibvp, source, lc, rng).map_err(|e| diverged(i, e))?;
            weights = update_loss_weights(weights, norms).map_err(|e| diverged(i, e))?;
        }
        total_grad.iter_mut().for_each(|g| *g = 0.0);
        let mut losses = [None; 3];
        let mut total = 0.0;
        for term in Term::ALL {
            if !active[term.index()] {
                continue;
            }
            let batch = sample_term_batch(term, source, ibvp, lc.batch[term.index()], rng)?;
            let (l, g) =
                term_loss_and_grad(term, model, params, ibvp, &batch, lc.loss_kind).map_err(|e| diverged(i, e))?;
            let w = weights.get(term);
            total += w * l;
            for (a, b) in total_grad.iter_mut().zip(&g) {
                *a += w * b;
            }
            losses[term.index()] = Some(l);
        }
        let lr = lc.schedule.lr_at(i);
        adam_step(&mut adam, params, &total_grad, lr).map_err(|e| diverged(i, e))?;
        sink.record(&StepRecord {
            step: i,
            lr,
            weights,
            losses,
            total,
        })?;
    }
    Ok(weights)
}

/// Train `spec` on `ibvp` from a seeded initialization.
pub fn train(ibvp: &IbvpSpec, spec: ModelSpec, cfg: &TrainConfig, sink: &mut dyn ProgressSink) -> Result<Checkpoint> {
    ibvp.validate()?;
    cfg.validate()?;
    let model = Model::new(spec, ibvp.constraints(cfg.hardcode_ic, cfg.hardcode_bc));
    model.validate()?;
    if let Some(d) = model.d_enc() {
        if d < 2 {
            return Err(Error::Config("at least two sensors are required".into()));
        }
    } else {
        return Err(Error::Config("operator training needs a sensor-based model".into()));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let mut params: ParamVector = model.init(&mut rng);
    let source = IcSource::Family(ibvp.ic_family);
    optimize(
        &model,
        ibvp,
        &source,
        params.as_mut_slice(),
        &LoopConfig::from_train(cfg),
        &mut rng,
        sink,
    )?;
    Ok(Checkpoint {
        model,
        ibvp: *ibvp,
        params,
        seed: cfg.seed,
        steps: cfg.n_steps,
        ic: None,
    })
}
