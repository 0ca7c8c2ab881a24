mod common;

use common::visit_all;
use proptest::prelude::*;
use stapu::logic::Mission;
use stapu::mdp::max_reach;
use stapu::product::local_product;
use stapu::workbench::{gen_map, graph_instance, task_atoms, MapSpec};

#[test]
fn product_value_matches_visit_oracle() {
    for seed in 0..40u64 {
        let tasks = 1 + (seed % 3) as usize;
        let (models, mission) = graph_instance(5 + (seed % 4) as usize, 1, tasks, seed).unwrap();
        let pm = local_product(&models[0], &mission).unwrap();
        let (v, _) = max_reach(pm.mdp(), &pm.accepting_states(), &pm.violating_states()).unwrap();
        let oracle = visit_all(&models[0], &task_atoms(tasks));
        assert!((v[0] - oracle).abs() <= 1e-6, "seed {seed}: {} vs {oracle}", v[0]);
    }
}

#[test]
fn safety_violations_are_absorbing() {
    let spec = MapSpec::random(9, 2, 0.2, 2, 3).unwrap();
    let mut json = gen_map(&spec).unwrap().to_json();
    json.atoms.push("h".into());
    json.labels.entry("4".into()).or_default().push("h".into());
    let m = stapu::mdp::Mdp::from_json(&json).unwrap();
    let mission = Mission::parse(&["F p1", "F p2"], Some("G !h")).unwrap();
    let pm = local_product(&m, &mission).unwrap();
    let bad = pm.violating_states();
    assert!(bad.iter().count() > 0);
    for s in bad.iter() {
        assert_eq!(pm.state(s).s, 4);
        assert_eq!(pm.mdp().choices(s).len(), 0);
    }
    assert_eq!(pm.full_size(), 2 * pm.full_size_without_safety());
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn transitions_keep_map_probabilities(seed in 0u64..10_000, nodes in 4usize..12, tasks in 1usize..4) {
        let spec = MapSpec::random(nodes, 2, 0.3, tasks, seed).unwrap();
        let m = gen_map(&spec).unwrap();
        let pm = local_product(&m, &stapu::workbench::reach_mission(tasks, None).unwrap()).unwrap();
        for i in 0..pm.num_states() {
            let ps = pm.state(i);
            prop_assert_eq!(pm.index_of(ps), Some(i));
            let here = pm.mdp().choices(i);
            let there = m.choices(ps.s);
            prop_assert_eq!(here.len(), there.len());
            for (c, d) in here.iter().zip(there) {
                prop_assert_eq!(c.action, d.action);
                for (&(t, p), &(u, q)) in c.outcomes.iter().zip(&d.outcomes) {
                    prop_assert_eq!(pm.state(t).s, u);
                    prop_assert_eq!(p, q);
                }
            }
        }
    }
}
