//! Hard-constraint identities over random architectures, parameters and
//! initial conditions.

use npr_core::deeponet::DeepONetSpec;
use npr_core::model::{Model, ModelSpec};
use npr_core::nets::{Activation, HypernetSpec, MlpSpec};
use npr_core::problems::{ICSample, IbvpSpec, TrigFn, TrigTerm};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn random_model(ibvp: &IbvpSpec, rng: &mut ChaCha8Rng) -> Model {
    let c = ibvp.constraints(true, true);
    let width = rng.gen_range(2..=8);
    let n_hidden = rng.gen_range(1..=3);
    let d_enc = rng.gen_range(2..=12);
    let spec = match rng.gen_range(0..3) {
        0 => {
            let target = MlpSpec::new(2, 1, n_hidden, width, Activation::Sin).low_rank(rng.gen_range(1..=width));
            ModelSpec::Npr(HypernetSpec::new(d_enc, 1, 6, Activation::Sin, target))
        }
        1 => ModelSpec::Deeponet(DeepONetSpec::new(d_enc, n_hidden, width, width, 4, Activation::Sin)),
        _ => ModelSpec::DensePinn(MlpSpec::new(2, 1, n_hidden, width, Activation::Sin)),
    };
    Model::new(spec, c)
}

fn random_ic(ibvp: &IbvpSpec, rng: &mut ChaCha8Rng) -> ICSample {
    if rng.gen_bool(0.7) {
        ibvp.ic_family.sample(rng)
    } else {
        ICSample::Trig {
            constant: rng.gen_range(-2.0..2.0),
            slope: rng.gen_range(-5.0..5.0),
            terms: vec![TrigTerm {
                amplitude: rng.gen_range(-3.0..3.0),
                func: if rng.gen() { TrigFn::Sin } else { TrigFn::Cos },
                freq: rng.gen_range(0.0..15.0),
                phase: rng.gen_range(-1.0..1.0),
            }],
        }
    }
}

#[test]
fn constraints_hold_on_random_configurations() {
    let mut rng = ChaCha8Rng::seed_from_u64(2024);
    for case in 0..1000 {
        let ibvp = if case % 2 == 0 { IbvpSpec::heat(0.05) } else { IbvpSpec::burgers() };
        let model = random_model(&ibvp, &mut rng);
        let mut params = model.init(&mut rng);
        let scale = rng.gen_range(1.0..20.0);
        params.as_mut_slice().iter_mut().for_each(|p| *p *= scale);
        let ic = random_ic(&ibvp, &mut rng);
        let (left, right) = ic.boundary_values();

        let x = rng.gen_range(0.0..=1.0);
        let u = model.eval_generic(params.as_slice(), &ic, 0.0, x).unwrap();
        assert_eq!(u, ic.eval(x), "case {case}: IC leak at x={x}");

        let t = rng.gen_range(0.0..=ibvp.t_final);
        let ub = model.eval_generic(params.as_slice(), &ic, t, 0.0).unwrap();
        assert!((ub - left).abs() <= 1e-13 * left.abs().max(1.0), "case {case}: left boundary {ub} vs {left}");
        if model.constraints.boundary_points().contains(&1.0) {
            let ub = model.eval_generic(params.as_slice(), &ic, t, 1.0).unwrap();
            assert!((ub - right).abs() <= 1e-13 * right.abs().max(1.0), "case {case}: right boundary");
        }

        let grid = model.field(params.as_slice(), &ic, 4, 9).unwrap();
        for (j, &xj) in grid.x_vals.iter().enumerate() {
            assert_eq!(grid.get(0, j), ic.eval(xj), "case {case}: tabulated IC leak");
        }
        for i in 0..grid.nt() {
            assert!((grid.get(i, 0) - left).abs() <= 1e-13 * left.abs().max(1.0));
        }
    }
}
