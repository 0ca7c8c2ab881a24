use std::collections::BTreeMap;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::realloc::{JointPolicy, NodeKind};

/// Steps after which a rollout is abandoned and counted as a failure.
pub const MAX_ROLLOUT_STEPS: usize = 1_000_000;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SimReport {
    pub runs: usize,
    pub successes: usize,
    pub failures: usize,
    /// Runs ending in a reallocation point nobody addressed.
    pub unaddressed: usize,
    pub frequency: f64,
    pub std_error: f64,
    /// How often each addressed reallocation node was passed through.
    pub realloc_triggers: BTreeMap<usize, usize>,
}

/// Seeded Monte Carlo rollouts of a joint policy from its initial node.
pub fn simulate(jp: &JointPolicy, runs: usize, seed: u64) -> SimReport {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut report = SimReport {
        runs,
        successes: 0,
        failures: 0,
        unaddressed: 0,
        frequency: 0.0,
        std_error: 0.0,
        realloc_triggers: BTreeMap::new(),
    };
    if jp.nodes.is_empty() {
        return report;
    }
    for _ in 0..runs {
        let mut node = 0;
        let mut steps = 0;
        loop {
            let n = &jp.nodes[node];
            match n.kind {
                NodeKind::Complete => {
                    report.successes += 1;
                    break;
                }
                NodeKind::Violated | NodeKind::Dead => {
                    report.failures += 1;
                    break;
                }
                NodeKind::Realloc { addressed: false, .. } => {
                    report.unaddressed += 1;
                    break;
                }
                NodeKind::Realloc { addressed: true, .. } => {
                    *report.realloc_triggers.entry(node).or_default() += 1;
                }
                NodeKind::Transient => {}
            }
            steps += 1;
            if n.next.is_empty() || steps > MAX_ROLLOUT_STEPS {
                report.failures += 1;
                break;
            }
            let u: f64 = rng.gen();
            let mut acc = 0.0;
            node = n.next.last().expect("edge").to;
            for e in &n.next {
                acc += e.p;
                if u < acc {
                    node = e.to;
                    break;
                }
            }
        }
    }
    if runs > 0 {
        let f = report.successes as f64 / runs as f64;
        report.frequency = f;
        report.std_error = (f * (1.0 - f) / runs as f64).sqrt();
    }
    report
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::logic::Mission;
    use crate::mdp::{Mdp, MdpBuilder};
    use crate::realloc::{run_stapu_with_realloc, Budget};

    fn line(f: f64) -> Mdp {
        let mut b = MdpBuilder::new(4);
        b.failure_state(3).label(2, "g").transition(0, "go", &[(1, 1.0)]);
        if f > 0.0 {
            b.transition(1, "go", &[(2, 1.0 - f), (3, f)]);
        } else {
            b.transition(1, "go", &[(2, 1.0)]);
        }
        b.build().unwrap()
    }

    #[test]
    fn deterministic_success() {
        let mission = Mission::parse(&["F g"], None).unwrap();
        let (jp, _) = run_stapu_with_realloc(&[line(0.0)], &mission, &Budget::unlimited()).unwrap();
        let r = simulate(&jp, 1000, 1);
        assert_eq!(r.frequency, 1.0);
        assert_eq!(r.std_error, 0.0);
    }

    #[test]
    fn budget_zero_and_full() {
        let mission = Mission::parse(&["F g"], None).unwrap();
        let models = [line(0.1), line(0.1)];
        let (jp0, _) = run_stapu_with_realloc(&models, &mission, &Budget::reallocations(0)).unwrap();
        let r0 = simulate(&jp0, 20_000, 3);
        assert!((r0.frequency - 0.9).abs() < 4.0 * (0.09f64 / 20_000.0).sqrt());
        assert_eq!(r0.successes + r0.failures + r0.unaddressed, 20_000);
        let (jp, _) = run_stapu_with_realloc(&models, &mission, &Budget::unlimited()).unwrap();
        let r = simulate(&jp, 20_000, 3);
        assert!((r.frequency - 0.99).abs() < 4.0 * (0.0099f64 / 20_000.0).sqrt());
        assert!(!r.realloc_triggers.is_empty());
        assert_eq!(simulate(&jp, 500, 9), simulate(&jp, 500, 9));
    }
}
