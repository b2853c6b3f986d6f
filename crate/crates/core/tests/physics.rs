use bounce_core::sim::{simulate, step, WorldConfig, WorldState};
use proptest::prelude::*;

#[test]
fn energy_is_conserved_over_4000_steps() {
    for seed in 0..5 {
        let cfg = WorldConfig {
            seed,
            ..Default::default()
        };
        let states = simulate(&cfg, 4000).unwrap();
        let e0 = states[0].kinetic_energy();
        for s in &states {
            assert!(((s.kinetic_energy() - e0) / e0).abs() < 1e-9, "seed {seed}");
            assert!(s.inside_walls(&cfg), "seed {seed}");
        }
    }
}

#[test]
fn head_on_swap_is_exact() {
    let cfg = WorldConfig {
        n_balls: 2,
        radius: 1.2,
        ..Default::default()
    };
    let state = WorldState {
        positions: vec![[3.5, 5.0], [6.5, 5.0]],
        velocities: vec![[1.0, 0.0], [-1.0, 0.0]],
    };
    let next = step(&state, &cfg);
    assert_eq!(next.velocities, vec![[-1.0, 0.0], [1.0, 0.0]]);
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(40))]

    #[test]
    fn worlds_stay_valid(seed in any::<u64>(), n_balls in 1usize..5, speed in 0.05f64..1.0) {
        let cfg = WorldConfig { seed, n_balls, speed, radius: 1.0, ..Default::default() };
        let states = simulate(&cfg, 300).unwrap();
        let e0 = states[0].kinetic_energy();
        for s in &states {
            prop_assert!(s.inside_walls(&cfg));
            prop_assert!(s.min_pair_distance() >= 2.0 * cfg.radius - 1e-6);
            prop_assert!(((s.kinetic_energy() - e0) / e0).abs() < 1e-9);
        }
    }

    #[test]
    fn simulation_is_deterministic(seed in any::<u64>()) {
        let cfg = WorldConfig { seed, ..Default::default() };
        prop_assert_eq!(simulate(&cfg, 50).unwrap(), simulate(&cfg, 50).unwrap());
    }
}
