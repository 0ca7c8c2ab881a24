//! Full synchronous multi-agent MDP over joint map states, the shared DFA
//! vector and joint actions. Used as the optimality reference.

use std::collections::HashMap;
use std::sync::Arc;

use crate::error::{Error, Result};
use crate::logic::Mission;
use crate::mdp::{max_reach_with, Choice, Mdp, Policy, SolverOptions, StateSet};
use crate::product::{LabelMasks, RobotModel};

/// Default bound on the combinatorial joint state count.
pub const DEFAULT_CEILING: u128 = 10_000_000;

/// Name of the per-robot wait action inside joint action names.
pub const IDLE_ACTION: &str = "idle";

#[derive(Clone, Debug)]
pub struct MamdpModel {
    mdp: Mdp,
    /// `(s_1, ..., s_n, q...)` per state.
    states: Vec<(Vec<usize>, Vec<usize>)>,
    accepting: StateSet,
    violating: StateSet,
    full_size: u128,
    full_size_without_safety: u128,
}

impl MamdpModel {
    pub fn mdp(&self) -> &Mdp {
        &self.mdp
    }

    pub fn state(&self, i: usize) -> (&[usize], &[usize]) {
        (&self.states[i].0, &self.states[i].1)
    }

    pub fn num_states(&self) -> usize {
        self.states.len()
    }

    pub fn num_transitions(&self) -> usize {
        self.mdp.num_transitions()
    }

    pub fn full_size(&self) -> u128 {
        self.full_size
    }

    pub fn full_size_without_safety(&self) -> u128 {
        self.full_size_without_safety
    }

    pub fn accepting(&self) -> &StateSet {
        &self.accepting
    }

    pub fn violating(&self) -> &StateSet {
        &self.violating
    }
}

/// `prod_i |S_i| * prod |Q|` over operational map states, with and without the
/// safety automaton.
pub fn mamdp_full_size(robots: &[RobotModel]) -> (u128, u128) {
    let maps: u128 = robots.iter().map(|r| r.mdp.operational_states() as u128).product();
    let (with, without) = robots.first().map_or((1, 1), |r| r.automata.automata_size());
    (maps * with, maps * without)
}

/// Build the joint model of `models` for `mission`, refusing when the full
/// state count exceeds `ceiling`.
pub fn build_mamdp(models: &[Mdp], mission: &Mission, ceiling: u128) -> Result<MamdpModel> {
    let automata = Arc::new(mission.compile()?);
    let robots = models
        .iter()
        .map(|m| RobotModel::new(Arc::new(m.clone()), automata.clone()))
        .collect::<Result<Vec<_>>>()?;
    build_mamdp_from(&robots, ceiling)
}

/// Every robot may wait in place in any state, so joint actions are the
/// cross product of each robot's enabled actions plus idle.
pub fn build_mamdp_from(robots: &[RobotModel], ceiling: u128) -> Result<MamdpModel> {
    let n = robots.len();
    if n == 0 {
        return Err(Error::Mission("no robots".into()));
    }
    let (full_size, full_size_without_safety) = mamdp_full_size(robots);
    if full_size > ceiling {
        return Err(Error::CeilingExceeded { size: full_size, ceiling });
    }
    let automata = robots[0].automata.clone();
    let width = automata.width();
    let advance = |q: &[usize], s: &[usize]| {
        let masks = LabelMasks::union(robots.iter().zip(s).map(|(r, &t)| (&r.masks, t)), width);
        automata.advance(q, &masks)
    };

    let s0: Vec<usize> = robots.iter().map(|r| r.mdp.initial()).collect();
    let q0 = advance(&automata.initial(), &s0);
    let mut states = vec![(s0.clone(), q0.clone())];
    let mut index: HashMap<(Vec<usize>, Vec<usize>), usize> = HashMap::from([((s0, q0), 0)]);
    let mut actions: Vec<String> = Vec::new();
    let mut action_ids: HashMap<Vec<Option<usize>>, usize> = HashMap::new();
    let mut choices: Vec<Vec<Choice>> = Vec::new();

    let mut next = 0;
    while next < states.len() {
        let (s, q) = states[next].clone();
        let mut out = Vec::new();
        if automata.safety_ok(&q) && !automata.all_tasks_accepting(&q) {
            // Per-robot options: enabled choices then idle.
            let options: Vec<Vec<Option<&Choice>>> = (0..n)
                .map(|i| robots[i].mdp.choices(s[i]).iter().map(Some).chain([None]).collect())
                .collect();
            let mut pick = vec![0usize; n];
            'joint: loop {
                let joint: Vec<Option<&Choice>> = (0..n).map(|i| options[i][pick[i]]).collect();
                let key: Vec<Option<usize>> = joint.iter().map(|c| c.map(|c| c.action)).collect();
                let action = *action_ids.entry(key).or_insert_with(|| {
                    let name = joint
                        .iter()
                        .enumerate()
                        .map(|(i, c)| c.map_or(IDLE_ACTION, |c| robots[i].mdp.action_name(c.action)))
                        .collect::<Vec<_>>()
                        .join("|");
                    actions.push(name);
                    actions.len() - 1
                });
                let cost = joint.iter().flatten().map(|c| c.cost).sum();
                let mut outcomes: Vec<(usize, f64)> = Vec::new();
                let lists: Vec<Vec<(usize, f64)>> = (0..n)
                    .map(|i| joint[i].map_or_else(|| vec![(s[i], 1.0)], |c| c.outcomes.clone()))
                    .collect();
                let mut sub = vec![0usize; n];
                'outcome: loop {
                    let mut p = 1.0;
                    let t: Vec<usize> = (0..n)
                        .map(|i| {
                            let (t, pi) = lists[i][sub[i]];
                            p *= pi;
                            t
                        })
                        .collect();
                    let qt = advance(&q, &t);
                    let key = (t, qt);
                    let id = match index.get(&key) {
                        Some(&id) => id,
                        None => {
                            states.push(key.clone());
                            index.insert(key, states.len() - 1);
                            states.len() - 1
                        }
                    };
                    match outcomes.iter_mut().find(|(x, _)| *x == id) {
                        Some(o) => o.1 += p,
                        None => outcomes.push((id, p)),
                    }
                    for k in (0..n).rev() {
                        sub[k] += 1;
                        if sub[k] < lists[k].len() {
                            continue 'outcome;
                        }
                        sub[k] = 0;
                    }
                    break;
                }
                out.push(Choice { action, outcomes, cost });
                for k in (0..n).rev() {
                    pick[k] += 1;
                    if pick[k] < options[k].len() {
                        continue 'joint;
                    }
                    pick[k] = 0;
                }
                break;
            }
        }
        choices.push(out);
        next += 1;
    }
    let accepting = StateSet::from_fn(states.len(), |i| automata.is_complete(&states[i].1));
    let violating = StateSet::from_fn(states.len(), |i| !automata.safety_ok(&states[i].1));
    let mdp = Mdp::from_parts(0, actions, Vec::new(), Vec::new(), None, choices);
    Ok(MamdpModel { mdp, states, accepting, violating, full_size, full_size_without_safety })
}

/// Optimal probability of completing the mission from the joint initial state.
pub fn solve_mamdp(mm: &MamdpModel) -> Result<(f64, Policy)> {
    solve_mamdp_with(mm, &SolverOptions::default())
}

pub fn solve_mamdp_with(mm: &MamdpModel, opts: &SolverOptions) -> Result<(f64, Policy)> {
    let sol = max_reach_with(&mm.mdp, &mm.accepting, &mm.violating, opts)?;
    Ok((sol.values[0], sol.policy))
}
