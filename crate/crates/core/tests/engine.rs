use brw_core::calibration::solve_theta;
use brw_core::engine::{step, EngineConfig, PopulationState, Walk};
use brw_core::offspring::{CountLaw, OffspringSpec, StepLaw};
use brw_core::rng::{tags, StreamKey};
use proptest::prelude::*;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

fn reference() -> OffspringSpec {
    OffspringSpec::product(CountLaw::new([(1, 0.5), (2, 0.5)]).unwrap(), StepLaw::uniform(&[-1, 1]).unwrap())
}

fn product_spec() -> impl Strategy<Value = OffspringSpec> {
    let counts = proptest::collection::btree_set(1u64..5, 1..3);
    let steps = proptest::collection::btree_set(-3i64..=3, 1..4);
    (counts, steps).prop_map(|(c, s)| {
        let c: Vec<u64> = c.into_iter().collect();
        let s: Vec<i64> = s.into_iter().collect();
        let w = 1.0 / c.len() as f64;
        OffspringSpec::product(CountLaw::new(c.iter().map(|&k| (k, w))).unwrap(), StepLaw::uniform(&s).unwrap())
    })
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn step_stays_in_reach(
        spec in product_spec(),
        pop in proptest::collection::vec((-20i64..20, 1u64..50), 1..6),
        seed in any::<u64>(),
    ) {
        let state = PopulationState::from_counts(0, 0, pop).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let next = step(&state, &spec, &EngineConfig::exact(), &mut rng).unwrap();
        let (lo, hi) = (state.min_position().unwrap(), state.max_position().unwrap());
        for (site, _) in next.occupied() {
            prop_assert!(site >= lo + spec.min_displacement() && site <= hi + spec.max_displacement());
        }
        let counts: Vec<u64> = spec.total_count_law().iter().map(|a| a.0).collect();
        let (cmin, cmax) = (*counts.iter().min().unwrap(), *counts.iter().max().unwrap());
        prop_assert!(next.total() >= cmin * state.total() && next.total() <= cmax * state.total());
        prop_assert_eq!(next.total(), next.births_last_step());
        prop_assert_eq!(next.generation(), 1);
    }

    #[test]
    fn single_child_walk_keeps_one_particle(seed in any::<u64>(), n in 1u64..200) {
        let spec = OffspringSpec::product(CountLaw::constant(1).unwrap(), StepLaw::uniform(&[-2, 1]).unwrap());
        let mut walk = Walk::new(&spec, EngineConfig::exact(), 0, StreamKey::new(seed, 0, tags::SINGLE)).unwrap();
        for rec in walk.run(n).unwrap() {
            prop_assert_eq!(rec.total, 1);
            prop_assert_eq!(rec.max, rec.min);
        }
    }
}

#[test]
fn walks_replay_from_their_key() {
    let spec = reference();
    let key = StreamKey::new(99, 4, tags::SINGLE);
    let a = Walk::new(&spec, EngineConfig::exact(), 0, key).unwrap().run(60).unwrap();
    let b = Walk::new(&spec, EngineConfig::exact(), 0, key).unwrap().run(60).unwrap();
    assert_eq!(a, b);
    let c = Walk::new(&spec, EngineConfig::exact(), 0, StreamKey::new(99, 5, tags::SINGLE)).unwrap().run(60).unwrap();
    assert_ne!(a, c);
}

#[test]
fn frontier_tracks_exact_maximum() {
    let spec = reference();
    let calib = solve_theta(&spec, 1e-12).unwrap();
    let w = EngineConfig::default_window(&calib, &spec);
    for replica in 0..50 {
        let key = StreamKey::new(7, replica, tags::SINGLE);
        let exact = Walk::new(&spec, EngineConfig::exact(), 0, key).unwrap().run(40).unwrap();
        let front = Walk::new(&spec, EngineConfig::frontier(w), 0, key).unwrap().run(40).unwrap();
        let maxes = |r: &[brw_core::engine::GenerationRecord]| r.iter().map(|g| g.max).collect::<Vec<_>>();
        assert_eq!(maxes(&exact), maxes(&front), "replica {replica}");
    }
}

#[test]
fn long_frontier_run_is_cheap() {
    let spec = reference();
    let mut walk = Walk::new(&spec, EngineConfig::frontier(27), 0, StreamKey::new(1, 0, tags::SINGLE)).unwrap();
    let t = std::time::Instant::now();
    for _ in 0..200_000 {
        walk.advance().unwrap();
    }
    let state = walk.state().clone();
    assert!(state.occupied_sites() <= 28);
    assert!(!state.truncation_log().is_empty());
    assert!(t.elapsed().as_secs() < 60);
    let speed = state.max_position().unwrap() as f64 / 200_000.0;
    assert!((speed - calib_speed()).abs() < 0.01, "speed {speed}");
    drop(walk);
    drop(state);
}

fn calib_speed() -> f64 {
    solve_theta(&reference(), 1e-12).unwrap().kappa_prime_at
}

#[test]
fn count_cap_holds_in_exact_mode() {
    let spec = OffspringSpec::product(CountLaw::constant(4).unwrap(), StepLaw::dirac(0));
    let config = EngineConfig { count_cap: 1 << 20, ..EngineConfig::exact() };
    let mut walk = Walk::new(&spec, config, 0, StreamKey::new(3, 0, tags::SINGLE)).unwrap();
    for _ in 0..30 {
        walk.advance().unwrap();
    }
    assert_eq!(walk.state().count_at(0), 1 << 20);
    assert!(walk.state().is_saturated());
}
