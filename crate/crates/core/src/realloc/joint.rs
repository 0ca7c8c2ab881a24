use std::collections::{HashMap, VecDeque};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::product::{LabelMasks, ProductState, RobotModel};
use crate::team::{check_class, check_single_switch, solve_stapu_with, StapuOptions, StapuSolution, TeamMdp};

/// What a robot is doing in a joint state.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Activity {
    Executing,
    Done,
    Failed,
}

/// Map state per robot, one shared DFA vector, and per-robot activity.
#[derive(Clone, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct JointState {
    pub s: Vec<usize>,
    pub q: Vec<usize>,
    pub activity: Vec<Activity>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum NodeKind {
    Transient,
    /// Every task accepting, safety intact.
    Complete,
    /// Safety violated.
    Violated,
    /// Mission incomplete with no robot left executing.
    Dead,
    /// A robot has just failed with the mission incomplete. Once addressed
    /// the node has a single edge to the root of the grafted continuation.
    Realloc { robot: usize, addressed: bool },
}

impl NodeKind {
    pub fn is_absorbing(&self) -> bool {
        match self {
            NodeKind::Transient => false,
            NodeKind::Realloc { addressed, .. } => !addressed,
            _ => true,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct JointEdge {
    pub to: usize,
    pub p: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct JointNode {
    pub state: JointState,
    /// Plan whose segments the robots follow here.
    pub plan: usize,
    /// Each robot's own view of the DFA vector, used to look up its segment.
    pub local: Vec<Vec<usize>>,
    /// Action per robot; `None` means idle.
    pub actions: Vec<Option<String>>,
    #[serde(flatten)]
    pub kind: NodeKind,
    pub next: Vec<JointEdge>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PlanInfo {
    /// Node this plan continues from; `None` for the initial plan.
    pub from: Option<usize>,
    pub start_robot: usize,
    pub value: f64,
}

#[derive(Clone, Debug)]
struct Plan {
    solution: StapuSolution,
    lookup: Vec<HashMap<ProductState, usize>>,
    root_failed: Vec<bool>,
}

/// The synchronised chain of all robots executing their segments in lockstep,
/// including every grafted continuation. Node 0 is the initial joint state.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct JointPolicy {
    pub robots: usize,
    pub plans: Vec<PlanInfo>,
    pub nodes: Vec<JointNode>,
    #[serde(skip)]
    internal: Vec<Plan>,
    #[serde(skip)]
    index: HashMap<(usize, JointState, Vec<Vec<usize>>), usize>,
}

/// A joint state where a robot has newly failed with tasks outstanding.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ReallocPoint {
    pub node: usize,
    pub state: JointState,
    pub robot: usize,
    pub probability: f64,
    pub addressed: bool,
}

/// Absorption probabilities of the chain from its initial node.
#[derive(Clone, Copy, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct Outcome {
    pub success: f64,
    pub failure: f64,
    pub unaddressed: f64,
}

impl Outcome {
    pub fn total(&self) -> f64 {
        self.success + self.failure + self.unaddressed
    }
}

/// Synchronise an initial STAPU solution into a joint policy.
pub fn synchronize(sol: &StapuSolution, robots: &[RobotModel]) -> Result<JointPolicy> {
    if robots.is_empty() {
        return Err(Error::Mission("no robots".into()));
    }
    let mut jp = JointPolicy { robots: robots.len(), plans: Vec::new(), nodes: Vec::new(), internal: Vec::new(), index: HashMap::new() };
    let s: Vec<usize> = robots.iter().map(|r| r.mdp.initial()).collect();
    let automata = &robots[0].automata;
    let masks = LabelMasks::union(robots.iter().zip(&s).map(|(r, &s)| (&r.masks, s)), automata.width());
    let q = automata.advance(&automata.initial(), &masks);
    jp.add_plan(sol, robots, None, s, q)?;
    Ok(jp)
}

impl JointPolicy {
    pub fn num_nodes(&self) -> usize {
        self.nodes.len()
    }

    pub fn node(&self, i: usize) -> &JointNode {
        &self.nodes[i]
    }

    /// Number of grafted continuations.
    pub fn reallocations(&self) -> usize {
        self.plans.len().saturating_sub(1)
    }

    /// Probability of reaching each node from node 0. Exact forward
    /// propagation in topological order; chains with cycles fall back to
    /// iterating the occupation measure, which is exact for absorbing nodes.
    pub fn reach_probabilities(&self) -> Vec<f64> {
        let n = self.nodes.len();
        let mut indeg = vec![0usize; n];
        for node in &self.nodes {
            for e in &node.next {
                indeg[e.to] += 1;
            }
        }
        let mut order = Vec::with_capacity(n);
        let mut queue: VecDeque<usize> = (0..n).filter(|&i| indeg[i] == 0).collect();
        while let Some(i) = queue.pop_front() {
            order.push(i);
            for e in &self.nodes[i].next {
                indeg[e.to] -= 1;
                if indeg[e.to] == 0 {
                    queue.push_back(e.to);
                }
            }
        }
        let mut prob = vec![0.0; n];
        if n == 0 {
            return prob;
        }
        prob[0] = 1.0;
        if order.len() == n {
            for &i in &order {
                let p = prob[i];
                if p == 0.0 {
                    continue;
                }
                for e in &self.nodes[i].next {
                    prob[e.to] += p * e.p;
                }
            }
            return prob;
        }
        for _ in 0..crate::mdp::MAX_ITERATIONS {
            let mut next = vec![0.0; n];
            next[0] = 1.0;
            for (i, node) in self.nodes.iter().enumerate() {
                for e in &node.next {
                    next[e.to] += prob[i] * e.p;
                }
            }
            let delta = next.iter().zip(&prob).fold(0.0f64, |d, (a, b)| d.max((a - b).abs()));
            prob = next;
            if delta < 1e-12 {
                break;
            }
        }
        prob
    }

    /// Success, failure and unaddressed mass of the current chain.
    pub fn outcome(&self) -> Outcome {
        let prob = self.reach_probabilities();
        let mut out = Outcome::default();
        for (node, p) in self.nodes.iter().zip(&prob) {
            match node.kind {
                NodeKind::Complete => out.success += p,
                NodeKind::Violated | NodeKind::Dead => out.failure += p,
                NodeKind::Realloc { addressed: false, .. } => out.unaddressed += p,
                _ => {}
            }
        }
        out
    }

    fn add_plan(
        &mut self,
        sol: &StapuSolution,
        robots: &[RobotModel],
        from: Option<usize>,
        s: Vec<usize>,
        q: Vec<usize>,
    ) -> Result<usize> {
        if !check_single_switch(sol) {
            return Err(Error::Unsupported("team policy switches more than once out of a robot".into()));
        }
        for (i, r) in robots.iter().enumerate() {
            if !check_class(&r.mdp) {
                return Err(Error::Unsupported(format!(
                    "robot {i} has actions that are neither deterministic nor succeed-or-fail"
                )));
            }
        }
        let n = robots.len();
        let mut lookup = vec![HashMap::new(); n];
        let mut local = vec![q.clone(); n];
        for seg in &sol.segments {
            let r = &robots[seg.robot];
            local[seg.robot] = seg.entry.q.clone();
            for c in &seg.choices {
                let a = r.mdp.action_id(&c.action).ok_or_else(|| {
                    Error::Mission(format!("robot {} has no action `{}`", seg.robot, c.action))
                })?;
                lookup[seg.robot].insert(c.state.clone(), a);
            }
        }
        let root_failed: Vec<bool> = (0..n).map(|i| robots[i].mdp.is_failure(s[i])).collect();
        let plan = self.internal.len();
        self.internal.push(Plan { solution: sol.clone(), lookup, root_failed });
        self.plans.push(PlanInfo { from, start_robot: sol.start_robot, value: sol.value });
        let activity = (0..n).map(|i| self.activity_of(plan, robots, i, s[i], &local[i])).collect();
        let root = self.intern(plan, JointState { s, q, activity }, local, robots);
        if let Some(node) = from {
            self.nodes[node].next = vec![JointEdge { to: root, p: 1.0 }];
            if let NodeKind::Realloc { addressed, .. } = &mut self.nodes[node].kind {
                *addressed = true;
            }
        }
        self.expand(root, robots);
        Ok(plan)
    }

    fn activity_of(&self, plan: usize, robots: &[RobotModel], i: usize, s: usize, local: &[usize]) -> Activity {
        if robots[i].mdp.is_failure(s) {
            Activity::Failed
        } else if self.internal[plan].lookup[i].contains_key(&ProductState { s, q: local.to_vec() }) {
            Activity::Executing
        } else {
            Activity::Done
        }
    }

    fn intern(&mut self, plan: usize, state: JointState, local: Vec<Vec<usize>>, robots: &[RobotModel]) -> usize {
        let key = (plan, state, local);
        if let Some(&i) = self.index.get(&key) {
            return i;
        }
        let (plan, state, local) = key.clone();
        let automata = &robots[0].automata;
        let p = &self.internal[plan];
        let newly_failed =
            (0..state.s.len()).find(|&i| state.activity[i] == Activity::Failed && !p.root_failed[i]);
        let kind = if !automata.safety_ok(&state.q) {
            NodeKind::Violated
        } else if automata.all_tasks_accepting(&state.q) {
            NodeKind::Complete
        } else if let Some(robot) = newly_failed {
            NodeKind::Realloc { robot, addressed: false }
        } else if !state.activity.contains(&Activity::Executing) {
            NodeKind::Dead
        } else {
            NodeKind::Transient
        };
        let actions = (0..state.s.len())
            .map(|i| match (&kind, state.activity[i]) {
                (NodeKind::Transient, Activity::Executing) => {
                    let a = p.lookup[i][&ProductState { s: state.s[i], q: local[i].clone() }];
                    Some(robots[i].mdp.action_name(a).to_string())
                }
                _ => None,
            })
            .collect();
        self.nodes.push(JointNode { state, plan, local, actions, kind, next: Vec::new() });
        self.index.insert(key, self.nodes.len() - 1);
        self.nodes.len() - 1
    }

    /// Breadth-first expansion of every transient node reachable from `root`.
    fn expand(&mut self, root: usize, robots: &[RobotModel]) {
        let automata = robots[0].automata.clone();
        let width = automata.width();
        let mut queue = VecDeque::from([root]);
        let mut seen = HashMap::from([(root, ())]);
        while let Some(id) = queue.pop_front() {
            if self.nodes[id].kind != NodeKind::Transient || !self.nodes[id].next.is_empty() {
                continue;
            }
            let node = self.nodes[id].clone();
            let plan = node.plan;
            // Per-robot outcome lists; idle robots stay put.
            let options: Vec<Vec<(usize, f64)>> = (0..self.robots)
                .map(|i| match &node.actions[i] {
                    Some(a) => {
                        let a = robots[i].mdp.action_id(a).expect("segment action");
                        robots[i].mdp.choice(node.state.s[i], a).expect("enabled action").outcomes.clone()
                    }
                    None => vec![(node.state.s[i], 1.0)],
                })
                .collect();
            let mut edges: Vec<JointEdge> = Vec::new();
            let mut pick = vec![0usize; self.robots];
            loop {
                let mut p = 1.0;
                let mut s = Vec::with_capacity(self.robots);
                for i in 0..self.robots {
                    let (t, pi) = options[i][pick[i]];
                    p *= pi;
                    s.push(t);
                }
                let masks = LabelMasks::union(robots.iter().zip(&s).map(|(r, &t)| (&r.masks, t)), width);
                let q = automata.advance(&node.state.q, &masks);
                let mut local = node.local.clone();
                let mut activity = node.state.activity.clone();
                for i in 0..self.robots {
                    if node.actions[i].is_some() {
                        local[i] = robots[i].advance(&node.local[i], s[i]);
                        activity[i] = self.activity_of(plan, robots, i, s[i], &local[i]);
                    }
                }
                let to = self.intern(plan, JointState { s, q, activity }, local, robots);
                match edges.iter_mut().find(|e| e.to == to) {
                    Some(e) => e.p += p,
                    None => edges.push(JointEdge { to, p }),
                }
                if seen.insert(to, ()).is_none() {
                    queue.push_back(to);
                }
                // Next combination, last robot fastest.
                let mut k = self.robots;
                loop {
                    if k == 0 {
                        break;
                    }
                    k -= 1;
                    pick[k] += 1;
                    if pick[k] < options[k].len() {
                        break;
                    }
                    pick[k] = 0;
                    if k == 0 {
                        k = usize::MAX;
                        break;
                    }
                }
                if k == usize::MAX {
                    break;
                }
            }
            self.nodes[id].next = edges;
        }
    }

    /// Solution that produced a plan.
    pub fn plan_solution(&self, plan: usize) -> Option<&StapuSolution> {
        self.internal.get(plan).map(|p| &p.solution)
    }
}

/// Unaddressed reallocation points, most probable first; ties keep
/// discovery order.
pub fn find_realloc_points(jp: &JointPolicy) -> Vec<ReallocPoint> {
    let prob = jp.reach_probabilities();
    let mut out: Vec<ReallocPoint> = jp
        .nodes
        .iter()
        .enumerate()
        .filter_map(|(i, node)| match node.kind {
            NodeKind::Realloc { robot, addressed: false } if prob[i] > 0.0 => Some(ReallocPoint {
                node: i,
                state: node.state.clone(),
                robot,
                probability: prob[i],
                addressed: false,
            }),
            _ => None,
        })
        .collect();
    out.sort_by(|a, b| b.probability.total_cmp(&a.probability).then(a.node.cmp(&b.node)));
    out
}

/// Solve the STAPU instance rooted at a reallocation point: planning starts
/// with the failed robot at its current state and the shared DFA vector, and
/// switches hand over to the other robots at their current map states.
pub fn solve_realloc(point: &ReallocPoint, robots: &[RobotModel], opts: &StapuOptions) -> Result<StapuSolution> {
    if point.addressed {
        return Err(Error::Mission(format!("reallocation point at node {} was already addressed", point.node)));
    }
    let entries: Vec<ProductState> =
        point.state.s.iter().map(|&s| ProductState { s, q: point.state.q.clone() }).collect();
    let g = TeamMdp::build(robots, &entries, point.robot)?;
    solve_stapu_with(&g, opts)
}

/// Replace the absorbing reallocation node by the synchronised continuation
/// of `sol`. Prefix probabilities are unchanged.
pub fn graft(jp: &mut JointPolicy, point: &ReallocPoint, sol: &StapuSolution, robots: &[RobotModel]) -> Result<usize> {
    match jp.nodes.get(point.node).map(|n| &n.kind) {
        Some(NodeKind::Realloc { addressed: false, .. }) => {}
        _ => return Err(Error::Mission(format!("node {} is not an open reallocation point", point.node))),
    }
    let state = jp.nodes[point.node].state.clone();
    jp.add_plan(sol, robots, Some(point.node), state.s, state.q)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::logic::Mission;
    use crate::mdp::{Mdp, MdpBuilder};
    use crate::team::solve_stapu;
    use std::sync::Arc;

    /// 0 -> 1 -> 2 with the task at 2; leaving 1 fails with `f`. 3 is s_⊥.
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

    fn robots(models: &[Mdp], mission: &Mission) -> Vec<RobotModel> {
        let automata = Arc::new(mission.compile().unwrap());
        models.iter().map(|m| RobotModel::new(Arc::new(m.clone()), automata.clone()).unwrap()).collect()
    }

    fn initial(rs: &[RobotModel]) -> JointPolicy {
        let entries: Vec<_> = rs.iter().map(|r| r.initial_state()).collect();
        let sol = solve_stapu(&TeamMdp::build(rs, &entries, 0).unwrap()).unwrap();
        synchronize(&sol, rs).unwrap()
    }

    #[test]
    fn one_failure_point() {
        let rs = robots(&[line(0.1), line(0.1)], &Mission::parse(&["F g"], None).unwrap());
        let jp = initial(&rs);
        let out = jp.outcome();
        assert!((out.success - 0.9).abs() < 1e-12);
        assert!((out.unaddressed - 0.1).abs() < 1e-12);
        let pts = find_realloc_points(&jp);
        assert_eq!(pts.len(), 1);
        assert_eq!(pts[0].robot, 0);
        assert!((pts[0].probability - 0.1).abs() < 1e-12);
        // Robot 1 idles throughout.
        assert!(jp.nodes.iter().all(|n| n.actions[1].is_none()));
    }

    #[test]
    fn realloc_value_from_current_position() {
        let rs = robots(&[line(0.1), line(0.1)], &Mission::parse(&["F g"], None).unwrap());
        let mut jp = initial(&rs);
        let pt = find_realloc_points(&jp).remove(0);
        let sol = solve_realloc(&pt, &rs, &StapuOptions::default()).unwrap();
        assert!((sol.value - 0.9).abs() < 1e-12);
        assert_eq!(sol.allocation.robot_of(0), Some(1));
        graft(&mut jp, &pt, &sol, &rs).unwrap();
        let out = jp.outcome();
        assert!((out.success - 0.99).abs() < 1e-12);
        assert!((out.total() - 1.0).abs() < 1e-12);
        assert!(graft(&mut jp, &pt, &sol, &rs).is_err());
    }

    #[test]
    fn everyone_failed_gives_zero() {
        let rs = robots(&[line(0.1), line(0.1)], &Mission::parse(&["F g"], None).unwrap());
        let pt = ReallocPoint {
            node: 0,
            state: JointState { s: vec![3, 3], q: vec![0], activity: vec![Activity::Failed; 2] },
            robot: 0,
            probability: 1.0,
            addressed: false,
        };
        let sol = solve_realloc(&pt, &rs, &StapuOptions::default()).unwrap();
        assert_eq!(sol.value, 0.0);
    }

    #[test]
    fn already_done_is_absorbing() {
        let mut m = line(0.1).to_json();
        m.initial = 2;
        let m = Mdp::from_json_unchecked(&m).unwrap();
        let rs = robots(&[m.clone(), m], &Mission::parse(&["F g"], None).unwrap());
        let jp = initial(&rs);
        assert_eq!(jp.nodes.len(), 1);
        assert_eq!(jp.nodes[0].kind, NodeKind::Complete);
        assert_eq!(jp.outcome().success, 1.0);
    }

    #[test]
    fn points_are_sorted() {
        // Two tasks, each robot holds one; failure 0.1 for robot 0, 0.05 for robot 1.
        let mk = |f: f64, atom: &str| {
            let mut b = MdpBuilder::new(3);
            b.failure_state(2).atom("a").atom("b").label(1, atom).transition(0, "go", &[(1, 1.0 - f), (2, f)]);
            b.build().unwrap()
        };
        let rs = robots(&[mk(0.1, "a"), mk(0.05, "b")], &Mission::parse(&["F a", "F b"], None).unwrap());
        let jp = initial(&rs);
        let pts = find_realloc_points(&jp);
        let probs: Vec<f64> = pts.iter().map(|p| p.probability).collect();
        // Simultaneous failure is attributed to robot 0.
        assert_eq!(pts.len(), 3);
        assert!((probs[0] - 0.1 * 0.95).abs() < 1e-12);
        assert!((probs[1] - 0.9 * 0.05).abs() < 1e-12);
        assert!((probs[2] - 0.1 * 0.05).abs() < 1e-12);
        assert_eq!(pts[2].robot, 0);
        assert!((jp.outcome().total() - 1.0).abs() < 1e-12);
    }

    #[test]
    fn json_round_trip() {
        let rs = robots(&[line(0.1), line(0.1)], &Mission::parse(&["F g"], None).unwrap());
        let jp = initial(&rs);
        let text = serde_json::to_string(&jp).unwrap();
        let back: JointPolicy = serde_json::from_str(&text).unwrap();
        assert_eq!(back.nodes, jp.nodes);
        assert_eq!(back.outcome(), jp.outcome());
    }
}
