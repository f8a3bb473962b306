use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use fronttrack::certify::{sample_invariant_region, Certificates};
use fronttrack::config::{random_bv, RunConfig};
use fronttrack::diagnostics::{dominated_curve, dominates, tv_along_curve, weighted_entropy_integral, SpaceLikeCurve};
use fronttrack::engine::{glimm_of, EngineConfig, FrontSolution, PiecewiseConstant};
use fronttrack::frontsolvers::{accurate_solve, FanParams, IdSource, RhSpeeds};
use fronttrack::run::evolve_data;
use fronttrack::system::{IsentropicEuler, State, System2x2};
use fronttrack::wavecurves::{compose, solve_riemann, RiemannOptions};
use fronttrack::weight::build_weight;
use fronttrack::wild::GridSolution;

fn sys() -> IsentropicEuler {
    IsentropicEuler::default_gamma2()
}

fn state() -> impl Strategy<Value = State> {
    (0.5f64..3.0, -1.0f64..1.0).prop_map(|(r, v)| State::from_primitive(r, v))
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(200))]

    #[test]
    fn riemann_round_trip(u in state(), s1 in -0.2f64..0.2, s2 in -0.2f64..0.2) {
        let e = sys();
        let (_, up) = compose(&e, u, s1, s2).unwrap();
        let fan = solve_riemann(&e, u, up, &RiemannOptions::default()).unwrap();
        prop_assert!((fan.sigma1 - s1).abs() < 1e-7);
        prop_assert!((fan.sigma2 - s2).abs() < 1e-7);
        prop_assert!(fan.residual <= 1e-10);
    }

    #[test]
    fn relative_entropy_is_quadratic(a in state(), b in state()) {
        let e = sys();
        let certs = Certificates::compute(&e).unwrap();
        let r = e.relative_entropy(a, b).unwrap();
        let d2 = a.dist(&b).powi(2);
        prop_assert!(r >= 0.0);
        prop_assert!(r >= certs.c_star * d2 * (1.0 - 1e-9));
        prop_assert!(r <= certs.c_star_star * d2 * (1.0 + 1e-9));
    }

    #[test]
    fn accurate_fan_chains_states_in_speed_order(u in state(), s1 in -0.2f64..0.2, s2 in -0.2f64..0.2) {
        let e = sys();
        let (_, up) = compose(&e, u, s1, s2).unwrap();
        let lh = 2.0 * e.speed_bound();
        let fan = accurate_solve(&e, u, up, &FanParams::new(0.05, lh), (0.0, 0.0), &RhSpeeds(&e), &mut IdSource::starting_at(0)).unwrap();
        let mut left = u;
        for w in fan.fronts.windows(2) {
            prop_assert!(w[0].speed <= w[1].speed);
        }
        for f in &fan.fronts {
            prop_assert_eq!(f.left, left);
            left = f.right;
        }
        prop_assert!(left.dist(&up) <= 1e-12);
    }

    #[test]
    fn l1_distance_is_a_metric(xs in prop::collection::vec(-1.0f64..1.0, 1..5), ys in prop::collection::vec(-1.0f64..1.0, 1..5)) {
        let mk = |mut b: Vec<f64>, shift: f64| {
            b.sort_by(f64::total_cmp);
            b.dedup();
            let states = (0..=b.len()).map(|k| State::new(1.0 + shift + 0.1 * k as f64, 0.05 * k as f64)).collect();
            PiecewiseConstant { breakpoints: b, states }
        };
        let p = mk(xs, 0.0);
        let q = mk(ys, 0.02);
        let r = PiecewiseConstant::constant(State::new(1.1, 0.0));
        let d = |a: &PiecewiseConstant, b: &PiecewiseConstant| a.l1_distance(b, -2.0, 2.0);
        prop_assert!((d(&p, &q) - d(&q, &p)).abs() < 1e-14);
        prop_assert!(d(&p, &p) == 0.0);
        prop_assert!(d(&p, &q) <= d(&p, &r) + d(&r, &q) + 1e-14);
    }

    #[test]
    fn shrinking_window_lowers_entropy_integral(seed in 0u64..1000, lo in -0.9f64..-0.1, hi in 0.1f64..0.9, shrink in 0.0f64..0.09) {
        let e = sys();
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let grid = GridSolution {
            x0: -1.0,
            dx: 0.05,
            time: 0.0,
            cells: (0..40).map(|_| State::from_primitive(rng.gen_range(0.8..1.2), rng.gen_range(-0.1..0.1))).collect(),
        };
        let psi = random_bv(&e, State::new(1.0, 0.0), 5, 0.2, (-1.0, 1.0), seed).unwrap();
        let sol = FrontSolution::init(&e, &psi, &EngineConfig::default()).unwrap();
        let w = build_weight(&sol.fronts, 0.0, &glimm_of(&sol.fronts, 10.0), 0.5).unwrap();
        let big = weighted_entropy_integral(&e, &grid, &psi, &w, (lo, hi)).unwrap();
        let small = weighted_entropy_integral(&e, &grid, &psi, &w, (lo + shrink, hi - shrink)).unwrap();
        prop_assert!(small <= big + 1e-15);
    }

    #[test]
    fn dominated_curves_are_dominated(a in -1.0f64..0.0, len in 0.5f64..2.0, t0 in 0.05f64..0.2, slope in -0.9f64..0.9, f1 in 0.0f64..0.5, f2 in 0.5f64..1.0, theta in 0.0f64..0.99) {
        let lh = 10.0;
        let b = a + len;
        let outer = SpaceLikeCurve::new(vec![a, 0.5 * (a + b), b], vec![t0, t0 + slope * 0.5 * len / lh, t0], lh).unwrap();
        let inner = dominated_curve(&outer, a + f1 * len, a + f2 * len, theta, lh).unwrap();
        prop_assert!(dominates(&outer, &inner, lh));
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(16))]

    #[test]
    fn evolutions_keep_glimm_and_weight_invariants(seed in 0u64..10_000) {
        let e = sys();
        let data = random_bv(&e, State::new(1.0, 0.0), 8, 0.2, (-1.0, 1.0), seed).unwrap();
        let mut cfg = RunConfig::default();
        cfg.engine.t_end = 2.0;
        let ev = evolve_data(&e, &cfg, data).unwrap();
        prop_assert!(ev.lq_monotone);
        prop_assert_eq!(ev.window_violations, 0);
        prop_assert!(ev.weight_increase_max() <= 1e-12);
        prop_assert!(ev.sup_tv() <= 2.0 * ev.tv0());
    }

    #[test]
    fn horizontal_curve_tv_matches_snapshot(seed in 0u64..10_000, frac in 0.05f64..0.95) {
        let e = sys();
        let data = random_bv(&e, State::new(1.0, 0.0), 6, 0.2, (-1.0, 1.0), seed).unwrap();
        let mut sol = FrontSolution::init(&e, &data, &EngineConfig::default()).unwrap();
        sol.advance(1.5).unwrap();
        let t = frac * 1.5;
        let tv = tv_along_curve(&sol, &SpaceLikeCurve::horizontal(-20.0, 20.0, t)).unwrap();
        let snap = sol.snapshot(t).unwrap();
        prop_assert!((tv - snap.data.total_variation()).abs() <= 1e-12);
    }
}

#[test]
fn relative_flux_lipschitz_bounds_hold_on_fresh_samples() {
    let e = sys();
    let certs = Certificates::compute(&e).unwrap();
    let bx = e.params.state_box;
    let mut rng = ChaCha8Rng::seed_from_u64(42);
    let (mut rq, mut re) = (0.0f64, 0.0f64);
    for _ in 0..10_000 {
        let a = sample_invariant_region(&e, &mut rng);
        let b1 = bx.point(rng.gen(), rng.gen());
        let b2 = bx.point(rng.gen(), rng.gen());
        let d = b1.dist(&b2);
        if d < 1e-9 || a.rho <= 0.0 {
            continue;
        }
        let dq = e.relative_entropy_flux(a, b1).unwrap() - e.relative_entropy_flux(a, b2).unwrap();
        let de = e.relative_entropy(a, b1).unwrap() - e.relative_entropy(a, b2).unwrap();
        rq = rq.max(dq.abs() / d / certs.lip_q);
        re = re.max(de.abs() / d / certs.lip_eta);
    }
    assert!(rq <= 1.0 && re <= 1.0, "fresh/certified ratios {rq} {re}");
}
