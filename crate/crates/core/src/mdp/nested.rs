use super::model::Mdp;
use super::solve::{extract_policy, max_reach_with, predecessors, Policy, SolverOptions, StateSet, ValueVector, POLICY_TOLERANCE};
use crate::error::{Error, Result};

/// Result of nested value iteration.
#[derive(Clone, Debug)]
pub struct NestedSolution {
    pub probabilities: ValueVector,
    pub costs: ValueVector,
    pub policy: Policy,
}

/// Nested value iteration: maximise the probability of reaching `target`
/// while avoiding `avoid`, then among the probability-optimal actions
/// minimise the expected cumulative cost until absorption.
///
/// Absorbing states for the cost phase are the target, the avoid set and
/// every state with maximal probability 0; they cost nothing.
pub fn nested_vi(m: &Mdp, target: &StateSet, avoid: &StateSet) -> Result<(ValueVector, ValueVector, Policy)> {
    let sol = nested_vi_with(m, target, avoid, &SolverOptions::default())?;
    Ok((sol.probabilities, sol.costs, sol.policy))
}

pub fn nested_vi_with(m: &Mdp, target: &StateSet, avoid: &StateSet, opts: &SolverOptions) -> Result<NestedSolution> {
    let n = m.num_states();
    let reach = max_reach_with(m, target, avoid, opts)?;
    let p = &reach.values;
    let active: Vec<usize> = (0..n).filter(|&s| p[s] > 0.0 && !target.contains(s) && !avoid.contains(s)).collect();
    let is_active = {
        let mut flags = vec![false; n];
        for &s in &active {
            flags[s] = true;
        }
        flags
    };

    // Probability-optimal choices per active state.
    let best: Vec<f64> = (0..n)
        .map(|s| m.choices(s).iter().map(|c| c.expect(p)).fold(f64::NEG_INFINITY, f64::max))
        .collect();
    let prob_optimal = |s: usize, c: &super::Choice| c.expect(p) >= best[s] - POLICY_TOLERANCE;

    // Start from the cost of the probability-optimal policy, which is proper,
    // and improve downwards. Descending from a proper policy keeps zero-cost
    // cycles from masquerading as optimal.
    let mut cost = vec![0.0; n];
    let start = &reach.policy;
    let mut iterations = 0;
    loop {
        iterations += 1;
        let mut delta: f64 = 0.0;
        for &s in &active {
            let c = m.choice(s, start.action(s).expect("active state without action")).unwrap();
            let new = c.cost + c.expect(&cost);
            delta = delta.max((new - cost[s]).abs());
            cost[s] = new;
        }
        if delta < opts.epsilon * (1.0 + max_abs(&cost)) * 1e-3 {
            break;
        }
        if iterations >= opts.max_iterations {
            return Err(Error::Divergence { iterations, delta });
        }
    }
    iterations = 0;
    loop {
        iterations += 1;
        let mut delta: f64 = 0.0;
        for &s in &active {
            let new = m
                .choices(s)
                .iter()
                .filter(|c| prob_optimal(s, c))
                .map(|c| c.cost + c.expect(&cost))
                .fold(cost[s], f64::min);
            delta = delta.max((new - cost[s]).abs());
            cost[s] = new;
        }
        if delta < opts.epsilon * (1.0 + max_abs(&cost)) * 1e-3 {
            break;
        }
        if iterations >= opts.max_iterations {
            return Err(Error::Divergence { iterations, delta });
        }
    }

    let absorbing = |s: usize| target.contains(s) || avoid.contains(s);
    let preds = predecessors(m, &absorbing);
    let cost_ref = &cost;
    let optimal = |s: usize, c: &super::Choice| {
        prob_optimal(s, c) && c.cost + c.expect(cost_ref) <= cost_ref[s] + POLICY_TOLERANCE * (1.0 + cost_ref[s].abs())
    };
    let policy = extract_policy(m, target, &preds, &|s| is_active[s], &optimal);
    Ok(NestedSolution { probabilities: reach.values, costs: ValueVector(cost), policy })
}

fn max_abs(v: &[f64]) -> f64 {
    v.iter().fold(0.0, |a, &x| a.max(x.abs()))
}
