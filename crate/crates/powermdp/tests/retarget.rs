use powermdp::power::orbit::OrbitMode;
use powermdp::retarget::{decision_prob, orbit_tendency_check, DecisionRule, OutcomeProblem};
use proptest::prelude::*;

fn spread_rules() -> Vec<DecisionRule> {
    vec![
        DecisionRule::Boltzmann { temperature: 0.7 },
        DecisionRule::BestOfK { k: 3 },
        DecisionRule::Quantilizer { q: 0.5, base: None },
        DecisionRule::UniformRandom,
        DecisionRule::FractionOptimal,
    ]
}

fn unit_problem(n: usize) -> OutcomeProblem {
    let vectors = (0..n).map(|i| (0..n).map(|k| if k == i { 1.0 } else { 0.0 }).collect()).collect();
    OutcomeProblem::new(vectors, vec![0], (1..n).collect()).unwrap()
}

#[test]
fn stubborn_rule_is_not_retargetable() {
    let p = OutcomeProblem::cards();
    let t = orbit_tendency_check(&DecisionRule::Stubborn { index: 2 }, &p, &[10.0, 5.0, 0.0], 1, OrbitMode::Exact).unwrap();
    assert_eq!(t.b_greater, 0);
    assert!(!t.holds);
}

#[test]
fn anti_argmax_prefers_the_larger_set_too() {
    let p = OutcomeProblem::cards();
    let t = orbit_tendency_check(&DecisionRule::AntiArgmax, &p, &[10.0, 5.0, 0.0], 2, OrbitMode::Exact).unwrap();
    assert_eq!((t.b_greater, t.a_greater), (4, 2));
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn singleton_probabilities_sum_to_one(u in prop::collection::vec(-5.0..5.0f64, 4)) {
        let p = unit_problem(4);
        for rule in spread_rules() {
            let total: f64 = (0..4).map(|i| decision_prob(&rule, &[i], &p, &u).unwrap()).sum();
            prop_assert!((total - 1.0).abs() < 1e-9, "{rule:?}: {total}");
        }
    }

    #[test]
    fn relabelling_outcomes_with_their_utilities_changes_nothing(
        u in prop::collection::vec(-5.0..5.0f64, 4),
        perm in Just((0..4).collect::<Vec<usize>>()).prop_shuffle(),
    ) {
        let p = unit_problem(4);
        let v: Vec<f64> = (0..4).map(|k| u[perm[k]]).collect();
        for rule in spread_rules() {
            for i in 0..4 {
                // outcome i under v has the utility that outcome perm[i] has under u
                let a = decision_prob(&rule, &[i], &p, &v).unwrap();
                let b = decision_prob(&rule, &[perm[i]], &p, &u).unwrap();
                prop_assert!((a - b).abs() < 1e-12, "{rule:?}");
            }
        }
    }

    #[test]
    fn set_probability_is_the_sum_over_members(u in prop::collection::vec(-5.0..5.0f64, 4)) {
        let p = unit_problem(4);
        for rule in spread_rules() {
            let whole = decision_prob(&rule, &[1, 2, 3], &p, &u).unwrap();
            let parts: f64 = (1..4).map(|i| decision_prob(&rule, &[i], &p, &u).unwrap()).sum();
            prop_assert!((whole - parts).abs() < 1e-9, "{rule:?}");
        }
    }
}
