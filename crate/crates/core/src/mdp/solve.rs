use std::collections::VecDeque;
use std::ops::Deref;

use serde::{Deserialize, Serialize};

use super::model::{Choice, Mdp};
use crate::error::{Error, Result};

pub const DEFAULT_EPSILON: f64 = 1e-6;
pub const MAX_ITERATIONS: usize = 100_000;
/// Q-values within this distance of the best one count as optimal.
pub const POLICY_TOLERANCE: f64 = 1e-9;

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct SolverOptions {
    /// Absolute convergence threshold on the largest per-sweep change.
    pub epsilon: f64,
    pub max_iterations: usize,
}

impl Default for SolverOptions {
    fn default() -> Self {
        SolverOptions { epsilon: DEFAULT_EPSILON, max_iterations: MAX_ITERATIONS }
    }
}

/// Membership bitmap over the states of a model.
#[derive(Clone, Debug, PartialEq, Eq, Default)]
pub struct StateSet(Vec<bool>);

impl StateSet {
    pub fn empty(n: usize) -> StateSet {
        StateSet(vec![false; n])
    }

    pub fn from_indices(n: usize, states: impl IntoIterator<Item = usize>) -> StateSet {
        let mut set = StateSet::empty(n);
        for s in states {
            set.insert(s);
        }
        set
    }

    pub fn from_fn(n: usize, f: impl Fn(usize) -> bool) -> StateSet {
        StateSet((0..n).map(f).collect())
    }

    pub fn insert(&mut self, s: usize) {
        self.0[s] = true;
    }

    pub fn remove(&mut self, s: usize) {
        self.0[s] = false;
    }

    pub fn contains(&self, s: usize) -> bool {
        self.0[s]
    }

    pub fn universe(&self) -> usize {
        self.0.len()
    }

    pub fn count(&self) -> usize {
        self.0.iter().filter(|&&b| b).count()
    }

    pub fn iter(&self) -> impl Iterator<Item = usize> + '_ {
        self.0.iter().enumerate().filter(|(_, &b)| b).map(|(i, _)| i)
    }

    pub fn is_disjoint(&self, other: &StateSet) -> bool {
        self.0.iter().zip(&other.0).all(|(a, b)| !(a & b))
    }
}

/// Per-state values: probabilities in `[0, 1]` or expected costs.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ValueVector(pub Vec<f64>);

impl Deref for ValueVector {
    type Target = [f64];
    fn deref(&self) -> &[f64] {
        &self.0
    }
}

/// Memoryless policy: the chosen action per state, where one is defined.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Policy(pub Vec<Option<usize>>);

impl Policy {
    pub fn action(&self, s: usize) -> Option<usize> {
        self.0[s]
    }

    pub fn defined(&self) -> impl Iterator<Item = (usize, usize)> + '_ {
        self.0.iter().enumerate().filter_map(|(s, a)| a.map(|a| (s, a)))
    }
}

#[derive(Clone, Debug)]
pub struct ReachSolution {
    pub values: ValueVector,
    pub policy: Policy,
    pub iterations: usize,
    /// States with value exactly 0 and exactly 1 found by graph analysis.
    pub prob0: StateSet,
    pub prob1: StateSet,
}

/// Predecessor lists: for every state, the (source, choice index) pairs that
/// reach it with positive probability. Target and avoid states are treated
/// as absorbing and contribute no edges.
pub(crate) fn predecessors(m: &Mdp, absorbing: &dyn Fn(usize) -> bool) -> Vec<Vec<(u32, u32)>> {
    let mut preds: Vec<Vec<(u32, u32)>> = vec![Vec::new(); m.num_states()];
    for s in 0..m.num_states() {
        if absorbing(s) {
            continue;
        }
        for (ci, c) in m.choices(s).iter().enumerate() {
            for &(t, p) in &c.outcomes {
                if p > 0.0 {
                    preds[t].push((s as u32, ci as u32));
                }
            }
        }
    }
    for p in &mut preds {
        p.dedup();
    }
    preds
}

/// States that reach `target` with positive probability under some policy
/// without passing through `avoid`.
fn can_reach(target: &StateSet, avoid: &StateSet, preds: &[Vec<(u32, u32)>]) -> StateSet {
    let mut reach = target.clone();
    let mut queue: VecDeque<usize> = target.iter().collect();
    while let Some(t) = queue.pop_front() {
        for &(s, _) in &preds[t] {
            let s = s as usize;
            if !reach.contains(s) && !avoid.contains(s) {
                reach.insert(s);
                queue.push_back(s);
            }
        }
    }
    reach
}

/// States from which some policy reaches `target` almost surely.
fn almost_sure(m: &Mdp, target: &StateSet, candidates: &StateSet, preds: &[Vec<(u32, u32)>]) -> StateSet {
    let mut u = candidates.clone();
    loop {
        let mut w = target.clone();
        let mut queue: VecDeque<usize> = target.iter().collect();
        while let Some(t) = queue.pop_front() {
            for &(s, ci) in &preds[t] {
                let s = s as usize;
                if w.contains(s) || !u.contains(s) {
                    continue;
                }
                let c = &m.choices(s)[ci as usize];
                if c.outcomes.iter().all(|&(x, _)| u.contains(x)) {
                    w.insert(s);
                    queue.push_back(s);
                }
            }
        }
        if w == u {
            return u;
        }
        u = w;
    }
}

/// Maximal probability of reaching `target` while never entering `avoid`,
/// with a policy attaining it.
pub fn max_reach(m: &Mdp, target: &StateSet, avoid: &StateSet) -> Result<(ValueVector, Policy)> {
    let sol = max_reach_with(m, target, avoid, &SolverOptions::default())?;
    Ok((sol.values, sol.policy))
}

/// [`max_reach`] with explicit solver options and diagnostics.
///
/// Values exactly 0 and 1 are fixed by graph precomputation; the rest are
/// computed by Gauss-Seidel value iteration from zero. Avoid states are
/// absorbing with value 0 and target states absorbing with value 1.
pub fn max_reach_with(m: &Mdp, target: &StateSet, avoid: &StateSet, opts: &SolverOptions) -> Result<ReachSolution> {
    let n = m.num_states();
    if target.universe() != n || avoid.universe() != n {
        return Err(Error::Model("state set does not match the model".into()));
    }
    if !target.is_disjoint(avoid) {
        return Err(Error::Model("target and avoid sets overlap".into()));
    }
    let absorbing = |s: usize| target.contains(s) || avoid.contains(s);
    let preds = predecessors(m, &absorbing);
    let reach = can_reach(target, avoid, &preds);
    let prob1 = almost_sure(m, target, &reach, &preds);
    let prob0 = StateSet::from_fn(n, |s| !reach.contains(s));

    // Interval iteration: a lower bound from 0 and an upper bound from 1,
    // the latter deflated on end components so it cannot get stuck above the
    // true value. The midpoint is within epsilon once the gap is below 2 eps.
    let mut lo = vec![0.0; n];
    for s in prob1.iter() {
        lo[s] = 1.0;
    }
    let unknown: Vec<usize> = (0..n).filter(|&s| reach.contains(s) && !prob1.contains(s)).collect();
    let mut hi = lo.clone();
    for &s in &unknown {
        hi[s] = 1.0;
    }
    let inside = StateSet::from_indices(n, unknown.iter().copied());
    let ecs = end_components(m, &unknown, &inside);
    let mut member = vec![usize::MAX; n];
    for (k, ec) in ecs.iter().enumerate() {
        for &s in ec {
            member[s] = k;
        }
    }
    let mut iterations = 0;
    loop {
        iterations += 1;
        sweep(m, &unknown, &mut lo, f64::max);
        sweep(m, &unknown, &mut hi, f64::max);
        deflate(m, &ecs, &member, &mut hi);
        let gap = unknown.iter().fold(0.0f64, |g, &s| g.max(hi[s] - lo[s]));
        if gap < 2.0 * opts.epsilon {
            break;
        }
        if iterations >= opts.max_iterations {
            return Err(Error::Divergence { iterations, delta: gap });
        }
    }
    let mut v = lo;
    for &s in &unknown {
        v[s] = 0.5 * (v[s] + hi[s]);
    }

    let eligible = |s: usize| v[s] > 0.0 && !absorbing(s);
    let best: Vec<f64> = (0..n)
        .map(|s| m.choices(s).iter().map(|c| c.expect(&v)).fold(f64::NEG_INFINITY, f64::max))
        .collect();
    let policy = extract_policy(m, target, &preds, &eligible, &|s, c| c.expect(&v) >= best[s] - POLICY_TOLERANCE);
    Ok(ReachSolution { values: ValueVector(v), policy, iterations, prob0, prob1 })
}

/// Maximal end components of the sub-MDP restricted to `states`: sets in
/// which some policy can stay forever, using only choices whose outcomes all
/// lie in the set.
fn end_components(m: &Mdp, states: &[usize], inside: &StateSet) -> Vec<Vec<usize>> {
    let n = m.num_states();
    let mut active = inside.clone();
    let mut comp = vec![0usize; n];
    loop {
        let kept = |s: usize, c: &Choice, comp: &[usize], active: &StateSet| {
            c.outcomes.iter().all(|&(t, _)| active.contains(t) && comp[t] == comp[s])
        };
        let live: Vec<usize> = states.iter().copied().filter(|&s| active.contains(s)).collect();
        let succ = |s: usize| -> Vec<usize> {
            m.choices(s)
                .iter()
                .filter(|c| kept(s, c, &comp, &active))
                .flat_map(|c| c.outcomes.iter().map(|&(t, _)| t))
                .collect()
        };
        let scc = strongly_connected(n, &live, succ);
        let mut changed = false;
        for &s in &live {
            if !m.choices(s).iter().any(|c| kept(s, c, &scc, &active)) {
                active.remove(s);
                changed = true;
            }
        }
        let distinct = |c: &[usize]| live.iter().map(|&s| c[s]).collect::<std::collections::BTreeSet<_>>().len();
        let refined = distinct(&scc) != distinct(&comp);
        comp = scc;
        if !changed && !refined {
            break;
        }
    }
    let mut groups: std::collections::BTreeMap<usize, Vec<usize>> = Default::default();
    for &s in states {
        if active.contains(s) {
            groups.entry(comp[s]).or_default().push(s);
        }
    }
    groups.into_values().collect()
}

/// Component index per state (iterative Tarjan) over `nodes`.
fn strongly_connected(n: usize, nodes: &[usize], succ: impl Fn(usize) -> Vec<usize>) -> Vec<usize> {
    let mut index = vec![usize::MAX; n];
    let mut low = vec![0usize; n];
    let mut on_stack = vec![false; n];
    let mut comp = vec![usize::MAX; n];
    let member = StateSet::from_indices(n, nodes.iter().copied());
    let mut stack = Vec::new();
    let mut counter = 0;
    let mut comps = 0;
    for &root in nodes {
        if index[root] != usize::MAX {
            continue;
        }
        let mut call: Vec<(usize, Vec<usize>, usize)> = vec![(root, succ(root), 0)];
        index[root] = counter;
        low[root] = counter;
        counter += 1;
        stack.push(root);
        on_stack[root] = true;
        while let Some((v, next, i)) = call.last_mut() {
            let v = *v;
            if *i < next.len() {
                let w = next[*i];
                *i += 1;
                if !member.contains(w) {
                    continue;
                }
                if index[w] == usize::MAX {
                    index[w] = counter;
                    low[w] = counter;
                    counter += 1;
                    stack.push(w);
                    on_stack[w] = true;
                    let ws = succ(w);
                    call.push((w, ws, 0));
                } else if on_stack[w] {
                    low[v] = low[v].min(index[w]);
                }
            } else {
                call.pop();
                if let Some((u, _, _)) = call.last() {
                    low[*u] = low[*u].min(low[v]);
                }
                if low[v] == index[v] {
                    loop {
                        let w = stack.pop().expect("tarjan stack");
                        on_stack[w] = false;
                        comp[w] = comps;
                        if w == v {
                            break;
                        }
                    }
                    comps += 1;
                }
            }
        }
    }
    comp
}

/// Cap the upper bound inside each end component by its best exit.
fn deflate(m: &Mdp, ecs: &[Vec<usize>], member: &[usize], hi: &mut [f64]) {
    for (k, ec) in ecs.iter().enumerate() {
        let best_exit = ec
            .iter()
            .flat_map(|&s| m.choices(s).iter())
            .filter(|c| c.outcomes.iter().any(|&(t, _)| member[t] != k))
            .map(|c| c.expect(hi))
            .fold(0.0, f64::max);
        for &s in ec {
            hi[s] = hi[s].min(best_exit);
        }
    }
}

/// One Gauss-Seidel sweep of `v[s] = pick_a(cost_a + E_a[v])` over `states`,
/// returning the largest change. Used for both max-probability and
/// min-cost updates.
pub(crate) fn sweep(m: &Mdp, states: &[usize], v: &mut [f64], pick: fn(f64, f64) -> f64) -> f64 {
    let mut delta: f64 = 0.0;
    for &s in states {
        let mut acc: Option<f64> = None;
        for c in m.choices(s) {
            let q = c.expect(v);
            acc = Some(acc.map_or(q, |a| pick(a, q)));
        }
        let new = acc.unwrap_or(0.0);
        delta = delta.max((new - v[s]).abs());
        v[s] = new;
    }
    delta
}

/// Choose, in every eligible state, the lowest-indexed optimal action that
/// makes progress towards `target`.
///
/// Progress is measured by the breadth-first distance to `target` in the
/// graph of optimal choices, which rules out optimal-looking actions that
/// cycle forever. States without any such action fall back to the lowest
/// optimal action.
pub(crate) fn extract_policy(
    m: &Mdp,
    target: &StateSet,
    preds: &[Vec<(u32, u32)>],
    eligible: &dyn Fn(usize) -> bool,
    optimal: &dyn Fn(usize, &Choice) -> bool,
) -> Policy {
    let n = m.num_states();
    let mut rank = vec![usize::MAX; n];
    let mut queue: VecDeque<usize> = VecDeque::new();
    for t in target.iter() {
        rank[t] = 0;
        queue.push_back(t);
    }
    while let Some(t) = queue.pop_front() {
        for &(s, ci) in &preds[t] {
            let s = s as usize;
            if rank[s] == usize::MAX && eligible(s) && optimal(s, &m.choices(s)[ci as usize]) {
                rank[s] = rank[t] + 1;
                queue.push_back(s);
            }
        }
    }
    let policy = (0..n)
        .map(|s| {
            if !eligible(s) {
                return None;
            }
            let mut opt = m.choices(s).iter().filter(|c| optimal(s, c));
            let progressing = m
                .choices(s)
                .iter()
                .filter(|c| optimal(s, c))
                .find(|c| rank[s] != usize::MAX && c.outcomes.iter().any(|&(t, _)| rank[t] == rank[s] - 1));
            progressing.or_else(|| opt.next()).map(|c| c.action)
        })
        .collect();
    Policy(policy)
}
