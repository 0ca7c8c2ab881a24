mod common;

use common::{enumerate_policies, random_mdp, rng};
use proptest::prelude::*;
use stapu::mdp::{
    max_reach, max_reach_with, nested_vi, validate, Diagnostic, Mdp, MdpBuilder, ModelJson, SolverOptions, StateSet,
};
use stapu::Error;

fn sets(n: usize, target: &[usize], avoid: &[usize]) -> (StateSet, StateSet) {
    (StateSet::from_indices(n, target.iter().copied()), StateSet::from_indices(n, avoid.iter().copied()))
}

#[test]
fn value_iteration_matches_policy_enumeration() {
    let mut r = rng(2024);
    for case in 0..200 {
        let (m, target, avoid) = random_mdp(&mut r, 6);
        let (t, a) = sets(m.num_states(), &target, &avoid);
        let (v, policy) = max_reach(&m, &t, &a).unwrap();
        let oracle = enumerate_policies(&m, &target, &avoid);
        for s in 0..m.num_states() {
            assert!((v[s] - oracle[s]).abs() <= 1e-6, "case {case} state {s}: {} vs {}", v[s], oracle[s]);
            if v[s] > 0.0 && !t.contains(s) && !a.contains(s) {
                assert!(policy.action(s).is_some());
            }
        }
    }
}

#[test]
fn endpoints_are_exact() {
    let mut r = rng(7);
    for _ in 0..200 {
        let (m, target, avoid) = random_mdp(&mut r, 6);
        let (t, a) = sets(m.num_states(), &target, &avoid);
        let sol = max_reach_with(&m, &t, &a, &SolverOptions::default()).unwrap();
        let oracle = enumerate_policies(&m, &target, &avoid);
        for s in 0..m.num_states() {
            assert_eq!(sol.prob0.contains(s), oracle[s] < 1e-12, "prob0 at {s}");
            assert_eq!(sol.prob1.contains(s), oracle[s] > 1.0 - 1e-12, "prob1 at {s}");
            if sol.prob0.contains(s) {
                assert_eq!(sol.values[s], 0.0);
            }
            if sol.prob1.contains(s) {
                assert_eq!(sol.values[s], 1.0);
            }
        }
    }
}

#[test]
fn policy_achieves_value() {
    // Evaluating the extracted policy as a chain gives back the value.
    let mut r = rng(99);
    for _ in 0..100 {
        let (m, target, avoid) = random_mdp(&mut r, 6);
        let n = m.num_states();
        let (t, a) = sets(n, &target, &avoid);
        let (v, policy) = max_reach(&m, &t, &a).unwrap();
        let mut p = vec![vec![0.0; n]; n];
        for s in 0..n {
            if let Some(act) = policy.action(s) {
                for &(u, q) in &m.choice(s, act).unwrap().outcomes {
                    p[s][u] += q;
                }
            }
        }
        let tset: Vec<bool> = (0..n).map(|s| t.contains(s)).collect();
        let aset: Vec<bool> = (0..n).map(|s| a.contains(s)).collect();
        let achieved = common::chain_reach(&p, &tset, &aset);
        for s in 0..n {
            assert!((achieved[s] - v[s]).abs() <= 1e-6, "state {s}: {} vs {}", achieved[s], v[s]);
        }
    }
}

#[test]
fn divergence_is_reported() {
    let mut b = MdpBuilder::new(3);
    b.transition(0, "a", &[(0, 0.999), (1, 0.0005), (2, 0.0005)]);
    let m = b.build().unwrap();
    let opts = SolverOptions { epsilon: 1e-12, max_iterations: 10 };
    let err = max_reach_with(&m, &StateSet::from_indices(3, [1]), &StateSet::empty(3), &opts).unwrap_err();
    assert!(matches!(err, Error::Divergence { .. }));
    assert_eq!(err.exit_code(), 2);
}

#[test]
fn ties_go_to_lowest_action() {
    let mut b = MdpBuilder::new(3);
    b.transition(0, "first", &[(1, 1.0)]).transition(0, "second", &[(2, 1.0)]);
    let m = b.build().unwrap();
    let (_, pi) = max_reach(&m, &StateSet::from_indices(3, [1, 2]), &StateSet::empty(3)).unwrap();
    assert_eq!(m.action_name(pi.action(0).unwrap()), "first");
}

#[test]
fn model_json_schema() {
    let text = r#"{
        "states": 3, "initial": 0, "atoms": ["p"],
        "labels": {"2": ["p"]}, "failure_state": 1,
        "actions": ["go"],
        "trans": [{"from": 0, "action": "go", "outcomes": [{"to": 2, "p": 0.9}, {"to": 1, "p": 0.1}], "cost": 2.0}]
    }"#;
    let json: ModelJson = serde_json::from_str(text).unwrap();
    let m = Mdp::from_json(&json).unwrap();
    assert_eq!(m.failure_state(), Some(1));
    assert!(m.has_costs());
    assert_eq!(m.label(2).collect::<Vec<_>>(), ["p"]);
    let back = serde_json::to_value(m.to_json()).unwrap();
    assert_eq!(back["trans"][0]["cost"], 2.0);
    assert_eq!(back["failure_state"], 1);

    let bad = text.replace("0.1}", "0.2}");
    let json: ModelJson = serde_json::from_str(&bad).unwrap();
    assert!(matches!(Mdp::from_json(&json), Err(Error::Model(_))));
    let unchecked = Mdp::from_json_unchecked(&json).unwrap();
    assert!(validate(&unchecked).iter().any(|d| matches!(d, Diagnostic::ProbabilitySum { .. })));
}

#[test]
fn nested_costs_agree_with_probabilities() {
    let mut r = rng(5);
    for _ in 0..50 {
        let (m, target, avoid) = random_mdp(&mut r, 6);
        let (t, a) = sets(m.num_states(), &target, &avoid);
        let (v, _) = max_reach(&m, &t, &a).unwrap();
        let (p, c, _) = nested_vi(&m, &t, &a).unwrap();
        for s in 0..m.num_states() {
            assert!((p[s] - v[s]).abs() <= 1e-9);
            assert!(c[s] >= 0.0);
        }
    }
}

proptest! {
    #[test]
    fn values_are_probabilities(seed in any::<u64>()) {
        let mut r = rng(seed);
        let (m, target, avoid) = random_mdp(&mut r, 6);
        let (t, a) = sets(m.num_states(), &target, &avoid);
        let (v, _) = max_reach(&m, &t, &a).unwrap();
        for s in 0..m.num_states() {
            prop_assert!((0.0..=1.0).contains(&v[s]));
            if t.contains(s) { prop_assert_eq!(v[s], 1.0); }
            if a.contains(s) { prop_assert_eq!(v[s], 0.0); }
        }
    }

    #[test]
    fn enlarging_target_never_lowers_values(seed in any::<u64>(), extra in 0usize..6) {
        let mut r = rng(seed);
        let (m, target, avoid) = random_mdp(&mut r, 6);
        let n = m.num_states();
        let (t, a) = sets(n, &target, &avoid);
        let (v, _) = max_reach(&m, &t, &a).unwrap();
        let mut bigger = target.clone();
        if extra < n && !avoid.contains(&extra) { bigger.push(extra); }
        let (t2, _) = sets(n, &bigger, &avoid);
        let (w, _) = max_reach(&m, &t2, &a).unwrap();
        for s in 0..n { prop_assert!(w[s] >= v[s] - 2e-6); }
    }
}
