use invlearn::level_sets::{inradius_in_union, sample_in_ball};
use invlearn::plants::{self, NumericalPlant};
use invlearn::*;
use proptest::prelude::*;
use std::sync::OnceLock;

fn numerical_controller(policy: FallbackPolicy) -> ControllerConfig {
    let trajs = plants::collect_numerical_dataset(0).unwrap();
    let ds = build_merged(&trajs, 2, Delay::One).unwrap();
    let kernel: Kernel = IsotropicKernel::squared_exponential(1.0, 2.0 * std::f64::consts::SQRT_2)
        .unwrap()
        .into();
    let model = Interpolant::fit(kernel, &ds, 0.0).unwrap();
    let bounds = BoundSet::numerical_benchmark();
    let families = [0.1, 0.2, 0.3, 0.4, 0.5, 1.0, 1.5, 2.0, 3.0]
        .iter()
        .map(|&d| build_level_family(&ds, &bounds, d, 20).unwrap())
        .collect();
    ControllerConfig::new(ds, model, bounds, families, policy).unwrap()
}

fn shared() -> &'static ControllerConfig {
    static CFG: OnceLock<ControllerConfig> = OnceLock::new();
    CFG.get_or_init(|| numerical_controller(FallbackPolicy::BestSlack))
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn gamma_inverse_never_overshoots(
        l_f in 0.1f64..10.0,
        l_c in 0.01f64..5.0,
        gamma_bound in 0.0f64..3.0,
        ell in 0.1f64..5.0,
        log_r in -8.0f64..3.0,
        two in any::<bool>(),
    ) {
        let delay = if two { Delay::Two } else { Delay::One };
        let b = BoundSet::new(
            l_f, l_c, gamma_bound, delay,
            EtaMode::SquaredExponentialClosedForm { length_scale: ell },
            GammaMode::Composed,
        ).unwrap();
        let r = 10f64.powf(log_r);
        let e = b.gamma_inverse(r).unwrap();
        let g = b.gamma(e).unwrap();
        prop_assert!(g <= r);
        prop_assert!(r - g <= 1e-10 * r.max(1.0));
    }

    #[test]
    fn grid_index_matches_scan(
        centers in proptest::collection::vec(proptest::collection::vec(-2.0f64..2.0, 3), 1..60),
        radii in proptest::collection::vec(0.01f64..0.8, 60),
        queries in proptest::collection::vec(proptest::collection::vec(-2.5f64..2.5, 3), 20),
    ) {
        let balls: Vec<Ball> = centers.iter().zip(&radii).map(|(c, &r)| Ball::new(c.clone(), r)).collect();
        let scan = BallIndex::with_threshold(balls.clone(), usize::MAX);
        let grid = BallIndex::with_threshold(balls.clone(), 0);
        for q in &queries {
            prop_assert_eq!(scan.covering(q), grid.covering(q));
            prop_assert_eq!(grid.inradius(q), inradius_in_union(q, &balls));
        }
    }

    #[test]
    fn inradius_ball_stays_in_union(
        centers in proptest::collection::vec(proptest::collection::vec(-1.0f64..1.0, 2), 1..8),
        radii in proptest::collection::vec(0.1f64..1.0, 8),
        seed in any::<u64>(),
    ) {
        let balls: Vec<Ball> = centers.iter().zip(&radii).map(|(c, &r)| Ball::new(c.clone(), r)).collect();
        let mut rng = plants::rng_stream(seed, 0);
        let p = sample_in_ball(&mut rng, &balls[0].center, balls[0].radius * 0.99);
        if let Some(r) = inradius_in_union(&p, &balls) {
            for _ in 0..50 {
                let q = sample_in_ball(&mut rng, &p, r);
                prop_assert!(balls.iter().any(|b| b.contains(&q)));
            }
        }
    }

    #[test]
    fn feasible_inputs_keep_output_in_range(
        y1 in -1.0f64..=1.0, y0 in -1.0f64..=1.0, up in 0.0f64..=1.0, s in 4.0f64..=16.0,
    ) {
        let zeta = [y1, y0, up];
        let u = NumericalPlant::input_for_radicand(&zeta, s);
        let y = NumericalPlant.step(&zeta, u).unwrap();
        prop_assert!((-1.0..=1.0).contains(&y));
        prop_assert!((NumericalPlant::inverse_oracle(&[y, y1, y0, up]) - u).abs() <= 1e-12);
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]

    // Certified steps land in the level below, from any feasible start.
    #[test]
    fn certified_steps_descend(y1 in -1.0f64..=1.0, y0 in -1.0f64..=1.0, up in 0.0f64..=1.0) {
        let cfg = shared();
        let mut rng = plants::rng_stream(0, 0);
        let run = closed_loop(cfg, &NumericalPlant, &[y1, y0, up], 10, 0.0, &mut rng).unwrap();
        prop_assert_eq!(run.descent_violations(), 0);
        for s in &run.steps {
            prop_assert!(NumericalPlant.output_feasible(s.y_next));
            if s.certificate.certified {
                prop_assert!(s.certificate.slack >= 0.0);
            }
        }
    }
}

#[test]
fn nearest_neighbor_fallback_is_also_descent_safe() {
    let cfg = numerical_controller(FallbackPolicy::NearestNeighbor);
    for a in [-1.0, -0.5, 0.0, 0.5, 1.0] {
        let mut rng = plants::rng_stream(0, 0);
        let run = closed_loop(&cfg, &NumericalPlant, &[a, a, 0.0], 10, 0.0, &mut rng).unwrap();
        assert_eq!(run.descent_violations(), 0);
    }
}

#[test]
fn family_dumps_round_trip_and_audit() {
    let cfg = shared();
    for fam in cfg.families() {
        let back = LevelFamily::from_text(&fam.to_text(), cfg.dataset()).unwrap();
        assert_eq!(back.levels(), fam.levels());
        assert_eq!(back.truncated_at(), fam.truncated_at());
        assert!(back.audit(cfg.dataset(), cfg.bounds(), 20, 1).passed());
    }
}

#[test]
fn model_dump_round_trips_predictions() {
    let cfg = shared();
    let model = cfg.interpolant();
    let back = Interpolant::from_text(&model.to_text()).unwrap();
    for r in cfg.dataset().records().iter().step_by(17) {
        assert_eq!(model.predict(&r.xi).unwrap(), back.predict(&r.xi).unwrap());
    }
}
