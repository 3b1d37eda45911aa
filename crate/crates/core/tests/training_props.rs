use std::f64::consts::PI;

use npr_core::model::{Batch, Model, ModelSpec};
use npr_core::nets::{Activation, HypernetSpec, MlpSpec};
use npr_core::problems::{ICSample, IbvpSpec, TrigFn, TrigTerm};
use npr_core::training::{
    component_gradient_norms, optimize, sample_term_batch, term_loss_and_grad, train, update_loss_weights,
    IcSource, LoopConfig, LossKind, LossWeights, NullSink, Schedule, StepRecord, Term, TrainConfig,
};
use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn tiny_npr() -> ModelSpec {
    let target = MlpSpec::new(2, 1, 2, 8, Activation::Sin).low_rank(2);
    ModelSpec::Npr(HypernetSpec::new(8, 2, 16, Activation::Sin, target))
}

fn tiny_config(seed: u64, n_steps: usize) -> TrainConfig {
    TrainConfig {
        n_steps,
        batch_pde: 16,
        batch_ic: 16,
        batch_bc: 16,
        seed,
        ..TrainConfig::default()
    }
}

fn fixed_pde_loss(model: &Model, params: &[f64], ibvp: &IbvpSpec) -> f64 {
    let mut rng = ChaCha8Rng::seed_from_u64(99);
    let batch = sample_term_batch(Term::Pde, &IcSource::Family(ibvp.ic_family), ibvp, 1024, &mut rng).unwrap();
    term_loss_and_grad(Term::Pde, model, params, ibvp, &batch, LossKind::Mae).unwrap().0
}

#[test]
fn tiny_burgers_run_lowers_the_loss_for_five_seeds() {
    let ibvp = IbvpSpec::burgers();
    for seed in 0..5 {
        let init = train(&ibvp, tiny_npr(), &tiny_config(seed, 0), &mut NullSink).unwrap();
        let mut records: Vec<StepRecord> = Vec::new();
        let done = train(&ibvp, tiny_npr(), &tiny_config(seed, 64), &mut records).unwrap();
        assert_eq!(records.len(), 64);
        let before = fixed_pde_loss(&init.model, init.params.as_slice(), &ibvp);
        let after = fixed_pde_loss(&done.model, done.params.as_slice(), &ibvp);
        assert!(after < before, "seed {seed}: {before} -> {after}");
        assert!(records.iter().all(|r| r.total.is_finite()));
    }
}

#[test]
fn zero_steps_returns_the_initialization() {
    let ibvp = IbvpSpec::heat(0.05);
    let ck = train(&ibvp, tiny_npr(), &tiny_config(5, 0), &mut NullSink).unwrap();
    let fresh = ck.model.init(&mut ChaCha8Rng::seed_from_u64(5));
    assert_eq!(ck.params, fresh);
    assert_eq!(ck.steps, 0);
}

#[test]
fn training_is_reproducible() {
    let ibvp = IbvpSpec::burgers();
    let cfg = TrainConfig {
        hardcode_bc: false,
        ..tiny_config(8, 12)
    };
    let a = train(&ibvp, tiny_npr(), &cfg, &mut NullSink).unwrap();
    let b = train(&ibvp, tiny_npr(), &cfg, &mut NullSink).unwrap();
    assert_eq!(a.to_bytes().unwrap(), b.to_bytes().unwrap());
}

proptest! {
    #[test]
    fn refreshed_weights_equalize_weighted_norms(
        g in proptest::collection::vec(1e-6f64..1e6, 3),
        active in proptest::collection::vec(any::<bool>(), 3),
    ) {
        let norms: [Option<f64>; 3] = std::array::from_fn(|k| (k == 0 || active[k]).then_some(g[k]));
        let w = update_loss_weights(LossWeights([1.0; 3]), norms).unwrap();
        let m: f64 = norms.iter().flatten().sum();
        for k in 0..3 {
            match norms[k] {
                Some(gk) => prop_assert!((w.0[k] * gk - m).abs() <= 1e-10 * m),
                None => prop_assert_eq!(w.0[k], 0.0),
            }
        }
    }

    #[test]
    fn scaling_one_component_keeps_weighted_norms_equal(
        g in proptest::collection::vec(1e-3f64..1e3, 3),
        k in 1e-3f64..1e3,
        which in 0usize..3,
    ) {
        let mut scaled = [g[0], g[1], g[2]];
        scaled[which] *= k;
        let w = update_loss_weights(LossWeights([1.0; 3]), scaled.map(Some)).unwrap();
        let products: Vec<f64> = (0..3).map(|i| w.0[i] * scaled[i]).collect();
        for p in &products {
            prop_assert!((p - products[0]).abs() <= 1e-10 * products[0]);
        }
    }
}

#[test]
fn live_refresh_equalizes_weighted_norms() {
    let ibvp = IbvpSpec::heat(0.05);
    let model = Model::new(tiny_npr(), ibvp.constraints(false, false));
    let mut rng = ChaCha8Rng::seed_from_u64(1);
    let mut params = model.init(&mut rng);
    let source = IcSource::Family(ibvp.ic_family);
    let lc = LoopConfig {
        n_steps: 5,
        batch: [32, 32, 32],
        schedule: Schedule::Constant(1e-3),
        weight_update_every: 100,
        loss_kind: LossKind::Mae,
    };
    optimize(&model, &ibvp, &source, params.as_mut_slice(), &lc, &mut rng, &mut NullSink).unwrap();

    let mut probe = rng.clone();
    let norms = component_gradient_norms(&model, params.as_slice(), &ibvp, &source, &lc, &mut probe).unwrap();
    assert!(norms.iter().all(|g| g.is_some_and(|g| g > 0.0)));
    let w = update_loss_weights(LossWeights([1.0; 3]), norms).unwrap();
    let m: f64 = norms.iter().flatten().sum();
    for k in 0..3 {
        let p = w.0[k] * norms[k].unwrap();
        assert!((p - m).abs() <= 1e-10 * m, "component {k}: {p} vs {m}");
    }

    // the loop applies exactly these weights from the refresh step onward
    let lc_refresh = LoopConfig {
        n_steps: 1,
        weight_update_every: 1,
        ..lc
    };
    let mut after = params.clone();
    let mut replay = rng.clone();
    let applied = optimize(&model, &ibvp, &source, after.as_mut_slice(), &lc_refresh, &mut replay, &mut NullSink).unwrap();
    assert_eq!(applied, w);
}

#[test]
fn every_hypernetwork_parameter_influences_the_residual_loss() {
    let ibvp = IbvpSpec::burgers();
    let model = Model::new(tiny_npr(), ibvp.constraints(true, true));
    let mut rng = ChaCha8Rng::seed_from_u64(4);
    let params = model.init(&mut rng).0;
    let batch = sample_term_batch(Term::Pde, &IcSource::Family(ibvp.ic_family), &ibvp, 64, &mut rng).unwrap();
    let loss = |p: &[f64]| term_loss_and_grad(Term::Pde, &model, p, &ibvp, &batch, LossKind::Mse).unwrap().0;
    let base = loss(&params);
    let (_, g) = term_loss_and_grad(Term::Pde, &model, &params, &ibvp, &batch, LossKind::Mse).unwrap();
    for i in 0..params.len() {
        let mut p = params.clone();
        p[i] += 1e-3 * params[i].abs().max(0.1);
        assert_ne!(loss(&p), base, "parameter {i} has no effect");
        assert_ne!(g[i], 0.0, "parameter {i} receives no gradient");
    }
}

#[test]
fn overfit_network_has_small_residual_on_a_known_heat_solution() {
    let ibvp = IbvpSpec::heat(0.05);
    let ic = ICSample::Trig {
        constant: 0.0,
        slope: 0.0,
        terms: vec![TrigTerm {
            amplitude: 1.0,
            func: TrigFn::Sin,
            freq: PI,
            phase: 0.0,
        }],
    };
    let model = Model::new(
        ModelSpec::DensePinn(MlpSpec::new(2, 1, 2, 24, Activation::Sin)),
        ibvp.constraints(true, true),
    );
    let mut rng = ChaCha8Rng::seed_from_u64(0);
    let mut params = model.init(&mut rng);
    let n_steps = 12000;
    let lc = LoopConfig {
        n_steps,
        batch: [128, 1, 1],
        schedule: Schedule::WarmupLinearDecay {
            peak: 3e-3,
            warmup_frac: 0.05,
            n_steps,
        },
        weight_update_every: 100,
        loss_kind: LossKind::Mse,
    };
    let source = IcSource::Fixed(ic.clone());
    optimize(&model, &ibvp, &source, params.as_mut_slice(), &lc, &mut rng, &mut NullSink).unwrap();

    let mut eval_rng = ChaCha8Rng::seed_from_u64(77);
    let points: Vec<(f64, f64)> = (0..2048).map(|_| (eval_rng.gen_range(0.0..=1.0), eval_rng.gen_range(0.0..=1.0))).collect();
    let batch = Batch::paired(vec![ic.clone(); points.len()], &points).unwrap();
    let (mae, _) = term_loss_and_grad(Term::Pde, &model, params.as_slice(), &ibvp, &batch, LossKind::Mae).unwrap();
    assert!(mae <= 1e-3, "residual MAE {mae}");

    let exact = |t: f64, x: f64| (-0.05 * PI * PI * t).exp() * (PI * x).sin();
    let field = model.field(params.as_slice(), &ic, 21, 21).unwrap();
    for (i, &t) in field.t_vals.iter().enumerate() {
        for (j, &x) in field.x_vals.iter().enumerate() {
            assert!((field.get(i, j) - exact(t, x)).abs() < 1e-2);
        }
    }
}
