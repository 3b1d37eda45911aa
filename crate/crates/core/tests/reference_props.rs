use npr_core::autodiff::{directional_derivs, Jet2, Real};
use npr_core::problems::{sample_fourier_ic, IbvpSpec};
use npr_core::reference::{burgers_exact, heat_fd_solve, DEFAULT_SUBSTEPS};
use proptest::prelude::*;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]

    #[test]
    fn heat_solution_respects_the_maximum_principle(seed in any::<u64>(), kappa in 0.01f64..0.2) {
        let ic = sample_fourier_ic(3, 2.0, &mut ChaCha8Rng::seed_from_u64(seed));
        let field = heat_fd_solve(&ic, kappa, 1.0, 101, 101, DEFAULT_SUBSTEPS).unwrap();
        let (lo0, hi0) = field.row(0).iter().fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), &v| (lo.min(v), hi.max(v)));
        let slack = 1e-3 * (hi0 - lo0).max(1e-12);
        let (lo, hi) = field.min_max();
        prop_assert!(lo >= lo0 - slack && hi <= hi0 + slack, "range [{lo}, {hi}] escapes [{lo0}, {hi0}]");
    }

    #[test]
    fn burgers_exact_solves_the_equation_at_smooth_points(
        a in -1.0f64..0.0, b in 1.0f64..2.0, t in 0.0f64..0.99, x in 0.0f64..1.0
    ) {
        let ibvp = IbvpSpec::burgers();
        // left of the kink the boundary value b is transported unchanged;
        // right of it the solution is affine in x
        let affine_branch = (a * x + b) / (a * t + 1.0) < b - 1e-9;
        let u = |t: Jet2<f64>, x: Jet2<f64>| {
            if affine_branch {
                x.scale(a).add_const(b) / t.scale(a).add_const(1.0)
            } else {
                Jet2::constant(b) + t.scale(0.0)
            }
        };
        let d = directional_derivs(u, t, x);
        prop_assert!((d.u - burgers_exact(a, b, t, x).unwrap()).abs() < 1e-12);
        let r = ibvp.residual(d.u, d.u_t, d.u_x, d.u_xx);
        prop_assert!(r.abs() <= 1e-8, "residual {r}");
    }
}
