//! Sequential team MDP joined by switch transitions, STAPU solving, and
//! extraction of per-robot policy segments and the task allocation.

use std::collections::{BTreeMap, HashMap, VecDeque};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::logic::Mission;
use crate::mdp::{max_reach_with, nested_vi_with, Choice, Mdp, Policy, SolverOptions, StateSet, ValueVector};
use crate::product::{ProductMdp, ProductState, RobotModel};

/// Name of the switch action in the team model.
pub const SWITCH_ACTION: &str = "zeta";

/// A team state: the robot currently planned for and its product state.
#[derive(Clone, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct TeamState {
    pub robot: usize,
    #[serde(flatten)]
    pub ps: ProductState,
}

/// Union of the robots' local products, planned one robot after the other.
///
/// Robots are visited in ring order starting from `start`. The switch action
/// moves from robot `i` to robot `i + 1 (mod n)`, keeps every DFA component
/// and places the next robot at its entry map state. It is enabled only where
/// every component is initial or accepting, never from the last robot of the
/// ring, and never from a failure state the robot fell into while being
/// planned for (a robot that is already failed at its entry hands over).
#[derive(Clone, Debug)]
pub struct TeamMdp {
    mdp: Mdp,
    states: Vec<TeamState>,
    index: HashMap<TeamState, usize>,
    robots: Vec<RobotModel>,
    entries: Vec<ProductState>,
    order: Vec<usize>,
    switch: usize,
    accepting: StateSet,
    violating: StateSet,
}

/// Build the team MDP for the initial STAPU problem: planning starts with the
/// first robot at `entries[0]`.
pub fn build_team(products: &[ProductMdp], entries: &[ProductState]) -> Result<TeamMdp> {
    let robots: Vec<RobotModel> = products.iter().map(|p| p.robot().clone()).collect();
    TeamMdp::build(&robots, entries, 0)
}

impl TeamMdp {
    /// Build a team MDP whose planning starts with robot `start` at
    /// `entries[start]`; only the map state of the other entries is used.
    pub fn build(robots: &[RobotModel], entries: &[ProductState], start: usize) -> Result<TeamMdp> {
        let n = robots.len();
        if n == 0 {
            return Err(Error::Mission("a team needs at least one robot".into()));
        }
        if entries.len() != n || start >= n {
            return Err(Error::Mission(format!("expected {n} entry states and a start robot below {n}")));
        }
        let automata = &robots[0].automata;
        for r in robots {
            if r.automata.mission != automata.mission {
                return Err(Error::Mission("robot products were built from different missions".into()));
            }
        }
        for (i, e) in entries.iter().enumerate() {
            if e.s >= robots[i].mdp.num_states() {
                return Err(Error::Mission(format!("entry map state {} is not a state of robot {i}", e.s)));
            }
        }
        let q0 = &entries[start].q;
        if q0.len() != automata.width() || q0.iter().enumerate().any(|(k, &q)| q >= automata.dfa(k).num_states()) {
            return Err(Error::Mission("entry DFA vector does not fit the mission automata".into()));
        }

        // Team actions: robot actions by name in declaration order, switch last.
        let mut actions: Vec<String> = Vec::new();
        let mut local_to_team: Vec<Vec<usize>> = Vec::with_capacity(n);
        for r in robots {
            let mut map = Vec::with_capacity(r.mdp.actions().len());
            for a in r.mdp.actions() {
                if a == SWITCH_ACTION {
                    return Err(Error::Model(format!("action name `{SWITCH_ACTION}` is reserved")));
                }
                let id = match actions.iter().position(|x| x == a) {
                    Some(id) => id,
                    None => {
                        actions.push(a.clone());
                        actions.len() - 1
                    }
                };
                map.push(id);
            }
            local_to_team.push(map);
        }
        let switch = actions.len();
        actions.push(SWITCH_ACTION.to_string());

        let order: Vec<usize> = (0..n).map(|k| (start + k) % n).collect();
        let last = order[n - 1];

        let init = TeamState { robot: start, ps: entries[start].clone() };
        let mut states = vec![init.clone()];
        let mut index = HashMap::from([(init, 0usize)]);
        let mut choices: Vec<Vec<Choice>> = Vec::new();
        let mut next = 0;
        let intern = |ts: TeamState, states: &mut Vec<TeamState>, index: &mut HashMap<TeamState, usize>| -> usize {
            *index.entry(ts.clone()).or_insert_with(|| {
                states.push(ts);
                states.len() - 1
            })
        };
        while next < states.len() {
            let TeamState { robot: i, ps } = states[next].clone();
            let robot = &robots[i];
            let mut out = Vec::new();
            if robot.automata.safety_ok(&ps.q) && !robot.automata.all_tasks_accepting(&ps.q) {
                for c in robot.mdp.choices(ps.s) {
                    let outcomes = robot
                        .successors(&ps, c)
                        .map(|(succ, p)| (intern(TeamState { robot: i, ps: succ }, &mut states, &mut index), p))
                        .collect();
                    out.push(Choice { action: local_to_team[i][c.action], outcomes, cost: c.cost });
                }
                let failed_here = robot.mdp.is_failure(ps.s) && !robot.mdp.is_failure(entries[i].s);
                if i != last && !failed_here && robot.automata.switchable(&ps.q) {
                    let j = (i + 1) % n;
                    let target = TeamState { robot: j, ps: ProductState { s: entries[j].s, q: ps.q.clone() } };
                    let t = intern(target, &mut states, &mut index);
                    out.push(Choice { action: switch, outcomes: vec![(t, 1.0)], cost: 0.0 });
                }
            }
            choices.push(out);
            next += 1;
        }
        let accepting = StateSet::from_fn(states.len(), |k| automata.is_complete(&states[k].ps.q));
        let violating = StateSet::from_fn(states.len(), |k| !automata.safety_ok(&states[k].ps.q));
        let mdp = Mdp::from_parts(0, actions, Vec::new(), Vec::new(), None, choices);
        Ok(TeamMdp {
            mdp,
            states,
            index,
            robots: robots.to_vec(),
            entries: entries.to_vec(),
            order,
            switch,
            accepting,
            violating,
        })
    }

    pub fn mdp(&self) -> &Mdp {
        &self.mdp
    }

    pub fn robots(&self) -> &[RobotModel] {
        &self.robots
    }

    pub fn state(&self, i: usize) -> &TeamState {
        &self.states[i]
    }

    pub fn index_of(&self, ts: &TeamState) -> Option<usize> {
        self.index.get(ts).copied()
    }

    pub fn num_states(&self) -> usize {
        self.states.len()
    }

    pub fn num_transitions(&self) -> usize {
        self.mdp.num_transitions()
    }

    /// Sum of the robots' combinatorial product sizes.
    pub fn full_size(&self) -> u128 {
        self.robots.iter().map(|r| r.full_size().0).sum()
    }

    pub fn full_size_without_safety(&self) -> u128 {
        self.robots.iter().map(|r| r.full_size().1).sum()
    }

    pub fn switch_action(&self) -> usize {
        self.switch
    }

    pub fn start_robot(&self) -> usize {
        self.order[0]
    }

    pub fn ring_order(&self) -> &[usize] {
        &self.order
    }

    pub fn entries(&self) -> &[ProductState] {
        &self.entries
    }

    pub fn accepting(&self) -> &StateSet {
        &self.accepting
    }

    pub fn violating(&self) -> &StateSet {
        &self.violating
    }

    /// All switch edges as (source state, target state) pairs.
    pub fn switch_edges(&self) -> impl Iterator<Item = (&TeamState, &TeamState)> + '_ {
        (0..self.states.len()).flat_map(move |s| {
            self.mdp
                .choice(s, self.switch)
                .map(|c| (&self.states[s], &self.states[c.outcomes[0].0]))
        })
    }

    /// Copy of the model without any switch transition.
    pub fn without_switches(&self) -> TeamMdp {
        let mut g = self.clone();
        let choices = (0..self.states.len())
            .map(|s| self.mdp.choices(s).iter().filter(|c| c.action != self.switch).cloned().collect())
            .collect();
        g.mdp = Mdp::from_parts(0, self.mdp.actions().to_vec(), Vec::new(), Vec::new(), None, choices);
        g
    }
}

/// Task allocation: the robot completing each task, `None` when the task is
/// never completed under the team policy.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Allocation(pub Vec<Option<usize>>);

impl Allocation {
    pub fn robot_of(&self, task: usize) -> Option<usize> {
        self.0[task]
    }

    pub fn tasks_of(&self, robot: usize) -> Vec<usize> {
        (0..self.0.len()).filter(|&k| self.0[k] == Some(robot)).collect()
    }

    pub fn unallocated(&self) -> Vec<usize> {
        (0..self.0.len()).filter(|&k| self.0[k].is_none()).collect()
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SegmentChoice {
    pub state: ProductState,
    pub action: String,
}

/// The part of the team policy executed by one robot, in its own product.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RobotSegment {
    pub robot: usize,
    pub entry: ProductState,
    pub choices: Vec<SegmentChoice>,
}

impl RobotSegment {
    pub fn lookup(&self) -> HashMap<&ProductState, &str> {
        self.choices.iter().map(|c| (&c.state, c.action.as_str())).collect()
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SwitchRecord {
    pub robot: usize,
    pub state: ProductState,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SwitchReport {
    pub switches: Vec<SwitchRecord>,
    pub single_switch: bool,
}

/// Solution of one STAPU instance.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct StapuSolution {
    pub value: f64,
    /// Expected cumulative cost when solved with costs.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub cost: Option<f64>,
    pub allocation: Allocation,
    pub segments: Vec<RobotSegment>,
    pub switch_report: SwitchReport,
    pub start_robot: usize,
    pub team_states: usize,
    pub team_transitions: usize,
    pub team_full_size: u128,
}

#[derive(Clone, Copy, Debug, Default)]
pub struct StapuOptions {
    pub solver: SolverOptions,
    /// Break probability ties by expected cost (nested value iteration).
    pub minimise_cost: bool,
}

/// Solve a team MDP by maximal reachability to the team accepting set.
pub fn solve_stapu(g: &TeamMdp) -> Result<StapuSolution> {
    solve_stapu_with(g, &StapuOptions::default())
}

pub fn solve_stapu_with(g: &TeamMdp, opts: &StapuOptions) -> Result<StapuSolution> {
    let (values, policy, cost) = if opts.minimise_cost {
        let sol = nested_vi_with(&g.mdp, &g.accepting, &g.violating, &opts.solver)?;
        let c = sol.costs[0];
        (sol.probabilities, sol.policy, Some(c))
    } else {
        let sol = max_reach_with(&g.mdp, &g.accepting, &g.violating, &opts.solver)?;
        (sol.values, sol.policy, None)
    };
    Ok(extract_solution(g, &values, &policy, cost))
}

fn extract_solution(g: &TeamMdp, values: &ValueVector, policy: &Policy, cost: Option<f64>) -> StapuSolution {
    let automata = &g.robots[0].automata;
    let m = automata.num_tasks();

    // Allocation along the failure-free execution of the policy.
    let mut allocation = vec![None; m];
    let mut cur = 0usize;
    let mut seen = vec![false; g.states.len()];
    loop {
        seen[cur] = true;
        let ts = &g.states[cur];
        for (k, slot) in allocation.iter_mut().enumerate() {
            if slot.is_none() && automata.task_accepting(&ts.ps.q, k) {
                *slot = Some(ts.robot);
            }
        }
        let Some(a) = policy.action(cur) else { break };
        let c = g.mdp.choice(cur, a).expect("policy action enabled");
        let robot = &g.robots[ts.robot].mdp;
        let next = c
            .outcomes
            .iter()
            .filter(|&&(t, _)| !robot.is_failure(g.states[t].ps.s) || g.states[t].robot != ts.robot)
            .fold(None, |best: Option<(usize, f64)>, &(t, p)| match best {
                Some((_, bp)) if bp >= p => best,
                _ => Some((t, p)),
            });
        match next {
            Some((t, _)) if !seen[t] => cur = t,
            _ => break,
        }
    }

    // Per-robot segments over everything reachable under the policy.
    let mut segments: BTreeMap<usize, RobotSegment> = BTreeMap::new();
    let mut switches = Vec::new();
    let mut reached = vec![false; g.states.len()];
    reached[0] = true;
    let mut queue = VecDeque::from([0usize]);
    while let Some(s) = queue.pop_front() {
        let ts = &g.states[s];
        let seg = segments.entry(ts.robot).or_insert_with(|| RobotSegment {
            robot: ts.robot,
            entry: ts.ps.clone(),
            choices: Vec::new(),
        });
        let Some(a) = policy.action(s) else { continue };
        if a == g.switch {
            switches.push(SwitchRecord { robot: ts.robot, state: ts.ps.clone() });
        } else {
            seg.choices.push(SegmentChoice { state: ts.ps.clone(), action: g.mdp.action_name(a).to_string() });
        }
        for &(t, _) in &g.mdp.choice(s, a).expect("policy action enabled").outcomes {
            if !reached[t] {
                reached[t] = true;
                queue.push_back(t);
            }
        }
    }
    let mut per_robot = vec![0usize; g.robots.len()];
    for sw in &switches {
        per_robot[sw.robot] += 1;
    }
    let single_switch = per_robot.iter().all(|&c| c <= 1);

    StapuSolution {
        value: values[0],
        cost,
        allocation: Allocation(allocation),
        segments: segments.into_values().collect(),
        switch_report: SwitchReport { switches, single_switch },
        start_robot: g.start_robot(),
        team_states: g.num_states(),
        team_transitions: g.num_transitions(),
        team_full_size: g.full_size(),
    }
}

/// Every enabled action is deterministic, or moves to one successor and
/// otherwise to the designated failure state.
pub fn check_class(m: &Mdp) -> bool {
    (0..m.num_states()).all(|s| {
        m.choices(s).iter().all(|c| match c.outcomes.as_slice() {
            [(_, p)] => (p - 1.0).abs() <= crate::mdp::PROB_SUM_TOLERANCE,
            [(a, _), (b, _)] => m.is_failure(*a) != m.is_failure(*b),
            _ => false,
        })
    })
}

/// At most one state per robot, among those reachable under the team
/// policy, chooses the switch action.
pub fn check_single_switch(sol: &StapuSolution) -> bool {
    sol.switch_report.single_switch
}

/// Warnings for task formulas sharing atomic propositions. This is a
/// sufficient syntactic independence check only; safety is not compared.
pub fn validate_mission_decomposition(mission: &Mission) -> Vec<String> {
    let atoms: Vec<_> = mission.tasks.iter().map(|t| t.atoms()).collect();
    let mut out = Vec::new();
    for i in 0..atoms.len() {
        for j in i + 1..atoms.len() {
            let shared: Vec<&String> = atoms[i].intersection(&atoms[j]).collect();
            if !shared.is_empty() {
                out.push(format!(
                    "tasks {} (`{}`) and {} (`{}`) share propositions {:?}",
                    i + 1,
                    mission.tasks[i],
                    j + 1,
                    mission.tasks[j],
                    shared
                ));
            }
        }
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::mdp::MdpBuilder;
    use std::sync::Arc;

    /// Star map: start 0 with spokes to 1 and 2; leaving 0 towards `p` fails
    /// with `fail_p`. State 3 is the failure state.
    fn robot(fail_p: f64, fail_q: f64) -> Mdp {
        let mut b = MdpBuilder::new(4);
        b.failure_state(3).label(1, "p").label(2, "q");
        let go = |b: &mut MdpBuilder, t: usize, f: f64, name: &str| {
            if f > 0.0 {
                b.transition(0, name, &[(t, 1.0 - f), (3, f)]);
            } else {
                b.transition(0, name, &[(t, 1.0)]);
            }
        };
        go(&mut b, 1, fail_p, "to_p");
        go(&mut b, 2, fail_q, "to_q");
        b.transition(1, "back", &[(0, 1.0)]).transition(2, "back", &[(0, 1.0)]);
        b.build().unwrap()
    }

    fn team(models: &[Mdp], mission: &Mission) -> TeamMdp {
        let automata = Arc::new(mission.compile().unwrap());
        let robots: Vec<RobotModel> =
            models.iter().map(|m| RobotModel::new(Arc::new(m.clone()), automata.clone()).unwrap()).collect();
        let entries: Vec<ProductState> = robots.iter().map(|r| r.initial_state()).collect();
        TeamMdp::build(&robots, &entries, 0).unwrap()
    }

    #[test]
    fn identical_robots_tie_goes_to_first() {
        let mission = Mission::parse(&["F p"], None).unwrap();
        let g = team(&[robot(0.1, 0.0), robot(0.1, 0.0)], &mission);
        let sol = solve_stapu(&g).unwrap();
        assert!((sol.value - 0.9).abs() < 1e-12);
        assert_eq!(sol.allocation.robot_of(0), Some(0));
        assert!(check_single_switch(&sol));
    }

    #[test]
    fn better_robot_gets_task() {
        let mission = Mission::parse(&["F p"], None).unwrap();
        let g = team(&[robot(0.1, 0.0), robot(0.5, 0.0)], &mission);
        let sol = solve_stapu(&g).unwrap();
        assert!((sol.value - 0.9).abs() < 1e-12);
        assert_eq!(sol.allocation.robot_of(0), Some(0));
        let g = team(&[robot(0.5, 0.0), robot(0.1, 0.0)], &mission);
        let sol = solve_stapu(&g).unwrap();
        assert!((sol.value - 0.9).abs() < 1e-12);
        assert_eq!(sol.allocation.robot_of(0), Some(1));
    }

    #[test]
    fn tasks_are_split_when_each_robot_can_do_one() {
        // Robot 0 can only reach p, robot 1 only q.
        let mut b0 = MdpBuilder::new(3);
        b0.label(1, "p").label(2, "q").transition(0, "go", &[(1, 1.0)]);
        let mut b1 = MdpBuilder::new(3);
        b1.label(1, "p").label(2, "q").transition(0, "go", &[(2, 1.0)]);
        let mission = Mission::parse(&["F p", "F q"], None).unwrap();
        let g = team(&[b0.build().unwrap(), b1.build().unwrap()], &mission);
        let sol = solve_stapu(&g).unwrap();
        assert!((sol.value - 1.0).abs() < 1e-12);
        assert_eq!(sol.allocation, Allocation(vec![Some(0), Some(1)]));
    }

    #[test]
    fn team_size_is_sum_of_products() {
        let mission = Mission::parse(&["F p", "F q"], None).unwrap();
        let g = team(&[robot(0.1, 0.1), robot(0.1, 0.1)], &mission);
        // 3 operational states * 2 * 2 per robot.
        assert_eq!(g.full_size(), 24);
        assert!(g.num_states() as u128 <= g.full_size() + 8);
    }

    #[test]
    fn switches_preserve_dfa_and_follow_ring() {
        let mission = Mission::parse(&["F p", "F q"], Some("G !h")).unwrap();
        let mut m = robot(0.1, 0.2);
        let mut json = m.to_json();
        json.atoms.push("h".into());
        m = Mdp::from_json(&json).unwrap();
        let g = team(&[m.clone(), m.clone(), m], &mission);
        let mut count = 0;
        for (from, to) in g.switch_edges() {
            count += 1;
            assert_eq!(from.ps.q, to.ps.q);
            assert_eq!(to.robot, (from.robot + 1) % 3);
            assert_ne!(from.robot, 2, "no switch out of the last robot of the ring");
            assert_eq!(to.ps.s, 0);
        }
        assert!(count > 0);
    }

    #[test]
    fn single_robot_has_no_switch_and_matches_product() {
        let mission = Mission::parse(&["F p", "F q"], None).unwrap();
        let m = robot(0.1, 0.2);
        let g = team(&[m.clone()], &mission);
        assert_eq!(g.switch_edges().count(), 0);
        let sol = solve_stapu(&g).unwrap();
        let pm = crate::product::local_product(&m, &mission).unwrap();
        let (v, _) = crate::mdp::max_reach(pm.mdp(), &pm.accepting_states(), &pm.violating_states()).unwrap();
        assert!((sol.value - v[0]).abs() < 1e-9);
        assert!((sol.value - 0.72).abs() < 1e-9);
        assert!(check_single_switch(&sol));
    }

    #[test]
    fn class_check() {
        let mut b = MdpBuilder::new(3);
        b.failure_state(2).transition(0, "a", &[(1, 0.9), (2, 0.1)]).transition(1, "b", &[(0, 1.0)]);
        assert!(check_class(&b.build().unwrap()));
        let mut b = MdpBuilder::new(3);
        b.failure_state(2).transition(0, "a", &[(1, 0.5), (0, 0.5)]);
        assert!(!check_class(&b.build().unwrap()));
    }

    #[test]
    fn two_switch_policy_is_flagged() {
        let mut sol = solve_stapu(&team(
            &[robot(0.1, 0.0), robot(0.1, 0.0)],
            &Mission::parse(&["F p"], None).unwrap(),
        ))
        .unwrap();
        let rec = SwitchRecord { robot: 0, state: ProductState { s: 0, q: vec![0] } };
        sol.switch_report.switches = vec![rec.clone(), SwitchRecord { state: ProductState { s: 1, q: vec![0] }, ..rec }];
        sol.switch_report.single_switch = false;
        assert!(!check_single_switch(&sol));
    }

    #[test]
    fn decomposition_warnings() {
        assert!(validate_mission_decomposition(&Mission::parse(&["F p1", "F p2"], None).unwrap()).is_empty());
        assert_eq!(validate_mission_decomposition(&Mission::parse(&["F p", "p U q"], None).unwrap()).len(), 1);
        assert!(validate_mission_decomposition(&Mission::parse(&["F p"], Some("G !p")).unwrap()).is_empty());
    }
}
