use std::collections::{BTreeSet, VecDeque};

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::logic::Mission;
use crate::mdp::{Mdp, MdpBuilder};

/// A topological map: undirected edges between nodes, failure points with
/// their failure probability, and atom placement.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MapSpec {
    pub nodes: usize,
    pub edges: Vec<(usize, usize)>,
    pub start: usize,
    /// Node and probability of failing on any move out of it.
    pub failure_points: Vec<(usize, f64)>,
    /// Atom and the node it labels.
    pub atoms: Vec<(String, usize)>,
    pub seed: u64,
}

/// Edges of a `rows x cols` grid, row-major node numbering.
pub fn grid_edges(rows: usize, cols: usize) -> Vec<(usize, usize)> {
    let mut edges = Vec::new();
    for r in 0..rows {
        for c in 0..cols {
            let v = r * cols + c;
            if c + 1 < cols {
                edges.push((v, v + 1));
            }
            if r + 1 < rows {
                edges.push((v, v + cols));
            }
        }
    }
    edges
}

/// Most square `rows x cols` factorisation with `rows <= cols`; 30 gives 5 x 6.
pub fn grid_shape(nodes: usize) -> (usize, usize) {
    let mut rows = (nodes as f64).sqrt() as usize;
    while rows > 1 && !nodes.is_multiple_of(rows) {
        rows -= 1;
    }
    let rows = rows.max(1);
    (rows, nodes / rows)
}

/// Task atom names `p1..pm`.
pub fn task_atoms(m: usize) -> Vec<String> {
    (1..=m).map(|k| format!("p{k}")).collect()
}

/// Mission `F p1, ..., F pm` with an optional safety formula.
pub fn reach_mission(m: usize, safety: Option<&str>) -> Result<Mission> {
    let tasks: Vec<String> = task_atoms(m).iter().map(|a| format!("F {a}")).collect();
    let refs: Vec<&str> = tasks.iter().map(String::as_str).collect();
    Mission::parse(&refs, safety)
}

impl MapSpec {
    /// Grid map with seeded placement: tasks `p1..pm` on distinct nodes other
    /// than the start, and failure points drawn from a separate stream so the
    /// first `k` points are the same for every `k`.
    pub fn random(nodes: usize, failpoints: usize, pfail: f64, tasks: usize, seed: u64) -> Result<MapSpec> {
        if nodes < 2 || tasks >= nodes || failpoints > nodes {
            return Err(Error::Model(format!(
                "cannot place {tasks} tasks and {failpoints} failure points on {nodes} nodes"
            )));
        }
        if !(pfail > 0.0 && pfail < 1.0) {
            return Err(Error::Model(format!("failure probability {pfail} outside (0, 1)")));
        }
        let (rows, cols) = grid_shape(nodes);
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut order: Vec<usize> = (0..nodes).collect();
        order.shuffle(&mut rng);
        let start = order[0];
        let atoms = task_atoms(tasks).into_iter().zip(order[1..=tasks].iter().copied()).collect();
        let mut fp_rng = ChaCha8Rng::seed_from_u64(seed ^ 0x9e37_79b9_7f4a_7c15);
        let mut fp: Vec<usize> = (0..nodes).collect();
        fp.shuffle(&mut fp_rng);
        let failure_points = fp[..failpoints].iter().map(|&v| (v, pfail)).collect();
        Ok(MapSpec { nodes, edges: grid_edges(rows, cols), start, failure_points, atoms, seed })
    }

    pub fn with_start(&self, start: usize) -> MapSpec {
        MapSpec { start, ..self.clone() }
    }

    fn check(&self) -> Result<()> {
        if self.nodes == 0 || self.start >= self.nodes {
            return Err(Error::Model("map start outside the node range".into()));
        }
        let mut adj = vec![Vec::new(); self.nodes];
        for &(u, v) in &self.edges {
            if u >= self.nodes || v >= self.nodes || u == v {
                return Err(Error::Model(format!("bad edge ({u}, {v})")));
            }
            adj[u].push(v);
            adj[v].push(u);
        }
        let mut seen = vec![false; self.nodes];
        seen[0] = true;
        let mut queue = VecDeque::from([0]);
        while let Some(u) = queue.pop_front() {
            for &v in &adj[u] {
                if !seen[v] {
                    seen[v] = true;
                    queue.push_back(v);
                }
            }
        }
        if seen.contains(&false) {
            return Err(Error::Model("map graph is disconnected".into()));
        }
        for &(v, p) in &self.failure_points {
            if v >= self.nodes || !(p > 0.0 && p < 1.0) {
                return Err(Error::Model(format!("bad failure point {v} with probability {p}")));
            }
        }
        for (a, v) in &self.atoms {
            if *v >= self.nodes {
                return Err(Error::Model(format!("atom `{a}` placed outside the map")));
            }
        }
        Ok(())
    }
}

/// MDP of a map: node `v` is state `v`, state `nodes` is the failure state.
/// Each edge gives one move action `to_<w>` in each direction; moves out of a
/// failure point reach their target with `1 - p` and fail with `p`.
pub fn gen_map(spec: &MapSpec) -> Result<Mdp> {
    spec.check()?;
    let n = spec.nodes;
    let mut adj: Vec<BTreeSet<usize>> = vec![BTreeSet::new(); n];
    for &(u, v) in &spec.edges {
        adj[u].insert(v);
        adj[v].insert(u);
    }
    let fail: Vec<f64> = {
        let mut f = vec![0.0; n];
        for &(v, p) in &spec.failure_points {
            f[v] = p;
        }
        f
    };
    let mut b = MdpBuilder::new(n + 1);
    b.initial(spec.start).failure_state(n);
    for w in 0..n {
        b.action(&format!("to_{w}"));
    }
    for (a, v) in &spec.atoms {
        b.label(*v, a);
    }
    for u in 0..n {
        for &w in &adj[u] {
            let name = format!("to_{w}");
            if fail[u] > 0.0 {
                b.transition(u, &name, &[(w, 1.0 - fail[u]), (n, fail[u])]);
            } else {
                b.transition(u, &name, &[(w, 1.0)]);
            }
        }
    }
    b.build()
}

/// Small tree-shaped instance for exact comparisons: tasks sit on leaves and
/// robots start on inner nodes, so no robot's route to a task passes another
/// task. Failure probabilities are drawn per failure point.
pub fn tree_instance(nodes: usize, robots: usize, tasks: usize, seed: u64) -> Result<(Vec<Mdp>, Mission)> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    for _ in 0..1000 {
        let mut edges = Vec::new();
        let mut degree = vec![0usize; nodes];
        for v in 1..nodes {
            let u = rng.gen_range(0..v);
            edges.push((u, v));
            degree[u] += 1;
            degree[v] += 1;
        }
        let mut leaves: Vec<usize> = (0..nodes).filter(|&v| degree[v] == 1).collect();
        let inner: Vec<usize> = (0..nodes).filter(|&v| degree[v] > 1).collect();
        if leaves.len() < tasks || inner.is_empty() {
            continue;
        }
        leaves.shuffle(&mut rng);
        let atoms = task_atoms(tasks).into_iter().zip(leaves.iter().copied()).collect();
        let mut pool: Vec<usize> = (0..nodes).collect();
        let fp_count = rng.gen_range(1..=pool.len().min(4));
        pool.shuffle(&mut rng);
        let failure_points = pool[..fp_count].iter().map(|&v| (v, rng.gen_range(1..=5) as f64 / 10.0)).collect();
        let spec = MapSpec { nodes, edges, start: inner[0], failure_points, atoms, seed };
        let models = (0..robots)
            .map(|_| gen_map(&spec.with_start(*inner.choose(&mut rng).expect("inner node"))))
            .collect::<Result<Vec<_>>>()?;
        return Ok((models, reach_mission(tasks, None)?));
    }
    Err(Error::Model(format!("no tree with {tasks} leaves on {nodes} nodes")))
}

/// Small connected graph (random tree plus a few chords) with tasks anywhere
/// except robot starts.
pub fn graph_instance(nodes: usize, robots: usize, tasks: usize, seed: u64) -> Result<(Vec<Mdp>, Mission)> {
    if tasks >= nodes {
        return Err(Error::Model(format!("cannot place {tasks} tasks on {nodes} nodes")));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut edges: BTreeSet<(usize, usize)> = (1..nodes).map(|v| (rng.gen_range(0..v), v)).collect();
    for _ in 0..rng.gen_range(0..=nodes / 2) {
        let u = rng.gen_range(0..nodes);
        let v = rng.gen_range(0..nodes);
        if u != v {
            edges.insert((u.min(v), u.max(v)));
        }
    }
    let mut order: Vec<usize> = (0..nodes).collect();
    order.shuffle(&mut rng);
    let atoms: Vec<(String, usize)> = task_atoms(tasks).into_iter().zip(order[..tasks].iter().copied()).collect();
    let free = &order[tasks..];
    let fp_count = rng.gen_range(1..=nodes.min(4));
    let mut pool: Vec<usize> = (0..nodes).collect();
    pool.shuffle(&mut rng);
    let failure_points = pool[..fp_count].iter().map(|&v| (v, rng.gen_range(1..=5) as f64 / 10.0)).collect();
    let spec = MapSpec { nodes, edges: edges.into_iter().collect(), start: free[0], failure_points, atoms, seed };
    let models = (0..robots)
        .map(|_| gen_map(&spec.with_start(*free.choose(&mut rng).expect("free node"))))
        .collect::<Result<Vec<_>>>()?;
    Ok((models, reach_mission(tasks, None)?))
}

/// Benchmark instance: one seeded grid map shared by every robot, robots on
/// distinct start nodes free of tasks where possible.
pub fn bench_instance(
    nodes: usize,
    robots: usize,
    tasks: usize,
    failpoints: usize,
    pfail: f64,
    seed: u64,
    safety: Option<&str>,
) -> Result<(Vec<Mdp>, Mission)> {
    let spec = MapSpec::random(nodes, failpoints, pfail, tasks, seed)?;
    let taken: BTreeSet<usize> = spec.atoms.iter().map(|(_, v)| *v).collect();
    let mut rng = ChaCha8Rng::seed_from_u64(seed.wrapping_add(1));
    let mut free: Vec<usize> = (0..nodes).filter(|v| *v != spec.start && !taken.contains(v)).collect();
    free.shuffle(&mut rng);
    let mut starts = vec![spec.start];
    starts.extend(free.iter().copied().take(robots.saturating_sub(1)));
    while starts.len() < robots {
        starts.push(spec.start);
    }
    let mut models = starts.iter().map(|&s| gen_map(&spec.with_start(s))).collect::<Result<Vec<_>>>()?;
    if let Some(f) = safety {
        // Safety atoms are declared on every model, unplaced unless the map names them.
        let atoms = crate::logic::parse(f)?.atoms();
        for m in &mut models {
            let mut json = m.to_json();
            for a in atoms.iter().cloned() {
                if !json.atoms.contains(&a) {
                    json.atoms.push(a);
                }
            }
            *m = Mdp::from_json(&json)?;
        }
    }
    Ok((models, reach_mission(tasks, safety)?))
}
