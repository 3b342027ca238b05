mod common;

use common::{random_mdp, random_reward};
use powermdp::mdp::{evaluate_policy, optimal_solution, optimal_value};
use powermdp::power::{optimality_probability, power, OptTarget, RewardDistributionSpec, Sampling};
use powermdp::visit::{enumerate_visit_functions, non_dominated_set, visit_distribution};
use powermdp::{bundled, Policy, RewardFunction, RewardlessMdp};
use proptest::prelude::*;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

/// P(up is optimal at s1) in closed form for the CDF-x² reward distribution.
fn impossibility_closed_form(g: f64) -> f64 {
    0.5 + (g - g * g) / 9.0
}

#[test]
fn impossibility_matches_its_closed_form() {
    let m = bundled::load("impossibility_graphical").unwrap();
    let spec = RewardDistributionSpec::parse("cdfpow:2", &m).unwrap();
    let (s1, up) = (m.state_index("s1").unwrap(), m.action_index("up").unwrap());
    for g in [0.25, 0.5, 0.75] {
        let e = optimality_probability(&m, s1, &OptTarget::Action(up), g, &spec, &Sampling::new(200_000, 2)).unwrap();
        assert!(e.covers(impossibility_closed_form(g)), "γ={g}: {e}");
    }
}

#[test]
fn json_round_trip_preserves_every_bundled_mdp() {
    for name in bundled::names() {
        let m = bundled::load(name).unwrap();
        let back = RewardlessMdp::from_json_str(&m.to_json_string()).unwrap();
        assert_eq!(m, back, "{name}");
    }
}

#[test]
fn same_seed_same_estimate() {
    let m = bundled::load("case_study").unwrap();
    let s = m.state_index("l_sw").unwrap();
    let uni = RewardDistributionSpec::uniform();
    let a = power(&m, s, 0.4, &uni, &Sampling::new(3000, 11)).unwrap();
    let b = power(&m, s, 0.4, &uni, &Sampling::new(3000, 11)).unwrap();
    let c = power(&m, s, 0.4, &uni, &Sampling::new(3000, 12)).unwrap();
    assert_eq!(a.estimate.to_bits(), b.estimate.to_bits());
    assert_ne!(a.estimate.to_bits(), c.estimate.to_bits());
}

#[test]
fn power_limits_approach_the_endpoints() {
    let m = bundled::load("case_study").unwrap();
    let s = m.state_index("l_sw").unwrap();
    let uni = RewardDistributionSpec::uniform();
    let sampling = Sampling::new(20_000, 1);
    let at = |g: f64| power(&m, s, g, &uni, &sampling).unwrap().estimate;
    assert!((at(1e-4) - at(0.0)).abs() < 0.01);
    assert!((at(1.0 - 1e-4) - at(1.0)).abs() < 0.01);
}

#[test]
fn nondominated_functions_attain_every_optimum() {
    let mut rng = ChaCha8Rng::seed_from_u64(21);
    for _ in 0..30 {
        let m = random_mdp(&mut rng, 4, 3, false);
        let nd = non_dominated_set(&enumerate_visit_functions(&m, 0).unwrap()).unwrap();
        for _ in 0..10 {
            let r = random_reward(&mut rng, m.n_states());
            let v = optimal_value(&m, &RewardFunction::state(r.clone()), 0.5).unwrap()[0];
            let best = nd
                .functions
                .iter()
                .map(|f| f.at_half().iter().zip(&r).map(|(x, y)| x * y).sum::<f64>())
                .fold(f64::NEG_INFINITY, f64::max);
            assert!((v - best).abs() < 1e-9);
        }
    }
}

fn mdp_strategy() -> impl Strategy<Value = (RewardlessMdp, Vec<f64>, f64)> {
    (any::<u64>(), 0.0..0.99f64).prop_map(|(seed, g)| {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let m = random_mdp(&mut rng, 5, 3, false);
        let r = random_reward(&mut rng, m.n_states());
        (m, r, g)
    })
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn optimal_value_dominates_every_policy((m, r, g) in mdp_strategy()) {
        let rf = RewardFunction::state(r);
        let v = optimal_value(&m, &rf, g).unwrap();
        for pi in Policy::enumerate(&m).take(200) {
            let vp = evaluate_policy(&m, &pi, &rf, g).unwrap();
            prop_assert!(vp.iter().zip(&v).all(|(a, b)| *a <= b + 1e-9));
        }
        let sol = optimal_solution(&m, &rf, g, None).unwrap();
        let vs = evaluate_policy(&m, &sol.policy, &rf, g).unwrap();
        prop_assert!(vs.iter().zip(&v).all(|(a, b)| (a - b).abs() < 1e-9));
    }

    #[test]
    fn visit_mass_is_geometric((m, _r, g) in mdp_strategy()) {
        let pi = Policy::constant(&m, 0);
        for s in 0..m.n_states() {
            let f = visit_distribution(&m, &pi, s, g).unwrap();
            prop_assert!((f.iter().sum::<f64>() * (1.0 - g) - 1.0).abs() < 1e-9);
            prop_assert!(f.iter().all(|&x| x >= -1e-12));
        }
    }

    #[test]
    fn power_lies_within_reward_bounds((m, _r, g) in mdp_strategy()) {
        prop_assume!(g > 0.01);
        let e = power(&m, 0, g, &RewardDistributionSpec::uniform(), &Sampling::new(200, 0)).unwrap();
        prop_assert!((0.0..=1.0 + 1e-12).contains(&e.estimate));
    }
}
