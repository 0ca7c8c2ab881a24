//! Independent reference implementations shared by the integration tests.
//! Nothing here calls into the solver paths it is used to check.

#![allow(dead_code)]

use std::collections::BTreeSet;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use stapu::logic::{classify, Formula, Fragment};
use stapu::mdp::{Mdp, MdpBuilder};

// ---------------------------------------------------------------------------
// Finite-trace semantics.

/// Truth of `f` at position `i` of a finite trace of letters (bitmasks over
/// `atoms`). Position `trace.len()` is the end of the trace. In strong mode
/// every pending obligation fails at the end (good prefixes); in weak mode
/// every atom still holds there (prefixes that are not bad).
pub fn eval(f: &Formula, trace: &[u32], atoms: &[String], i: usize, strong: bool) -> bool {
    let n = trace.len();
    let holds = |a: &str| {
        let bit = atoms.iter().position(|x| x == a).expect("atom");
        trace[i] & (1 << bit) != 0
    };
    match f {
        Formula::True => true,
        Formula::False => false,
        Formula::Atom(a) => if i == n { !strong } else { holds(a) },
        Formula::NegAtom(a) => if i == n { !strong } else { !holds(a) },
        Formula::And(cs) => cs.iter().all(|c| eval(c, trace, atoms, i, strong)),
        Formula::Or(cs) => cs.iter().any(|c| eval(c, trace, atoms, i, strong)),
        Formula::Next(c) => eval(c, trace, atoms, (i + 1).min(n), strong),
        Formula::Eventually(c) => (i..=n).any(|j| eval(c, trace, atoms, j, strong)),
        Formula::Always(c) => (i..=n).all(|j| eval(c, trace, atoms, j, strong)),
        Formula::Until(a, b) => {
            (i..=n).any(|j| eval(b, trace, atoms, j, strong) && (i..j).all(|k| eval(a, trace, atoms, k, strong)))
        }
    }
}

/// Whether a finite trace should be accepted: a good prefix for co-safe
/// formulas, not a bad prefix for safe ones.
pub fn oracle_accepts(f: &Formula, fragment: Fragment, trace: &[u32], atoms: &[String]) -> bool {
    match fragment {
        Fragment::Safe => eval(f, trace, atoms, 0, false),
        _ => eval(f, trace, atoms, 0, true),
    }
}

/// Formulas over `a`, `b`, `c` up to operator depth 3 built from the
/// literals `a`, `b`, `c`, `!a`, `true`:
/// depth 1: every unary operator over a literal and every binary operator
///   over two literals;
/// depth 2: every unary operator over a depth-1 formula and every binary
///   operator between a depth-1 formula and a literal, both orders;
/// depth 3: every unary operator over a depth-2 formula, and every binary
///   operator between a unary-rooted depth-2 formula and a literal.
/// Only syntactically co-safe or safe formulas are kept; duplicates by
/// printed form are dropped.
pub fn formula_family() -> Vec<Formula> {
    let leaves = vec![Formula::atom("a"), Formula::atom("b"), Formula::atom("c"), Formula::neg_atom("a"), Formula::True];
    let unary = |f: &Formula| vec![Formula::next(f.clone()), Formula::eventually(f.clone()), Formula::always(f.clone())];
    let binary = |x: &Formula, y: &Formula| {
        vec![Formula::and(x.clone(), y.clone()), Formula::or(x.clone(), y.clone()), Formula::until(x.clone(), y.clone())]
    };
    let mut d1 = Vec::new();
    for x in &leaves {
        d1.extend(unary(x));
        for y in &leaves {
            d1.extend(binary(x, y));
        }
    }
    let mut d2 = Vec::new();
    let mut d2_unary = Vec::new();
    for x in &d1 {
        let u = unary(x);
        d2_unary.extend(u.iter().cloned());
        d2.extend(u);
        for y in &leaves {
            d2.extend(binary(x, y));
            d2.extend(binary(y, x));
        }
    }
    let mut d3 = Vec::new();
    for x in &d2 {
        d3.extend(unary(x));
    }
    for x in &d2_unary {
        for y in &leaves {
            d3.extend(binary(x, y));
            d3.extend(binary(y, x));
        }
    }
    let mut seen = BTreeSet::new();
    let mut out = Vec::new();
    for f in leaves.into_iter().chain(d1).chain(d2).chain(d3) {
        if classify(&f) == Fragment::Neither || !seen.insert(f.to_string()) {
            continue;
        }
        out.push(f);
    }
    out
}

/// Visit every trace over `letters` letters of length at most `max_len`,
/// calling `visit(trace)` on each (including the empty trace).
pub fn for_each_trace(letters: u32, max_len: usize, visit: &mut impl FnMut(&[u32])) {
    fn go(letters: u32, max_len: usize, trace: &mut Vec<u32>, visit: &mut impl FnMut(&[u32])) {
        visit(trace);
        if trace.len() == max_len {
            return;
        }
        for l in 0..letters {
            trace.push(l);
            go(letters, max_len, trace, visit);
            trace.pop();
        }
    }
    go(letters, max_len, &mut Vec::new(), visit);
}

// ---------------------------------------------------------------------------
// Reachability by exhaustive memoryless policy enumeration.

/// Random MDP with at most `max_states` states and at most two actions per
/// state, plus random target and avoid sets.
pub fn random_mdp(rng: &mut ChaCha8Rng, max_states: usize) -> (Mdp, Vec<usize>, Vec<usize>) {
    let n = rng.gen_range(1..=max_states);
    let mut b = MdpBuilder::new(n);
    for s in 0..n {
        let k = rng.gen_range(0..=2);
        for a in 0..k {
            let support = rng.gen_range(1..=3.min(n));
            let mut targets: Vec<usize> = (0..n).collect();
            for i in 0..support {
                let j = rng.gen_range(i..n);
                targets.swap(i, j);
            }
            let weights: Vec<u32> = (0..support).map(|_| rng.gen_range(1..=10)).collect();
            let total: u32 = weights.iter().sum();
            let outcomes: Vec<(usize, f64)> =
                targets[..support].iter().zip(&weights).map(|(&t, &w)| (t, w as f64 / total as f64)).collect();
            b.transition(s, if a == 0 { "a" } else { "b" }, &outcomes);
        }
    }
    let target: Vec<usize> = (0..n).filter(|_| rng.gen_bool(0.3)).collect();
    let avoid: Vec<usize> = (0..n).filter(|s| !target.contains(s) && rng.gen_bool(0.15)).collect();
    (b.build_unchecked().expect("random model"), target, avoid)
}

/// Reachability probabilities of the Markov chain `p` (row-stochastic or
/// substochastic), solved exactly by Gaussian elimination on the states that
/// can reach the target.
pub fn chain_reach(p: &[Vec<f64>], target: &[bool], avoid: &[bool]) -> Vec<f64> {
    let n = p.len();
    // Graph-backward closure of the target.
    let mut can = target.to_vec();
    loop {
        let mut changed = false;
        for s in 0..n {
            if !can[s] && !avoid[s] && (0..n).any(|t| p[s][t] > 0.0 && can[t]) {
                can[s] = true;
                changed = true;
            }
        }
        if !changed {
            break;
        }
    }
    let unknown: Vec<usize> = (0..n).filter(|&s| can[s] && !target[s]).collect();
    let k = unknown.len();
    let mut a = vec![vec![0.0; k + 1]; k];
    for (r, &s) in unknown.iter().enumerate() {
        a[r][r] = 1.0;
        for t in 0..n {
            if target[t] {
                a[r][k] += p[s][t];
            } else if let Some(c) = unknown.iter().position(|&u| u == t) {
                a[r][c] -= p[s][t];
            }
        }
    }
    for col in 0..k {
        let piv = (col..k).max_by(|&i, &j| a[i][col].abs().total_cmp(&a[j][col].abs())).unwrap();
        a.swap(col, piv);
        let d = a[col][col];
        for x in a[col].iter_mut() {
            *x /= d;
        }
        for r in 0..k {
            if r != col && a[r][col] != 0.0 {
                let f = a[r][col];
                for c in 0..=k {
                    a[r][c] -= f * a[col][c];
                }
            }
        }
    }
    let mut x: Vec<f64> = (0..n).map(|s| if target[s] { 1.0 } else { 0.0 }).collect();
    for (r, &s) in unknown.iter().enumerate() {
        x[s] = a[r][k];
    }
    x
}

/// Per-state maximum over every memoryless deterministic policy.
pub fn enumerate_policies(m: &Mdp, target: &[usize], avoid: &[usize]) -> Vec<f64> {
    let n = m.num_states();
    let tset: Vec<bool> = (0..n).map(|s| target.contains(&s)).collect();
    let aset: Vec<bool> = (0..n).map(|s| avoid.contains(&s)).collect();
    let counts: Vec<usize> = (0..n).map(|s| m.choices(s).len().max(1)).collect();
    let mut best = vec![0.0f64; n];
    let mut pick = vec![0usize; n];
    loop {
        let mut p = vec![vec![0.0; n]; n];
        for s in 0..n {
            if tset[s] || aset[s] {
                continue;
            }
            if let Some(c) = m.choices(s).get(pick[s]) {
                for &(t, q) in &c.outcomes {
                    p[s][t] += q;
                }
            }
        }
        let v = chain_reach(&p, &tset, &aset);
        for s in 0..n {
            best[s] = best[s].max(v[s]);
        }
        let mut k = 0;
        loop {
            if k == n {
                return best;
            }
            pick[k] += 1;
            if pick[k] < counts[k] {
                break;
            }
            pick[k] = 0;
            k += 1;
        }
    }
}

// ---------------------------------------------------------------------------
// Single-robot reach of a set of `F atom` tasks, solved directly on
// (map state, visited-atom mask) pairs.

/// Maximal probability that one robot, starting from its initial state,
/// visits every atom in `atoms`. Bellman iteration from zero to a fixpoint.
pub fn visit_all(m: &Mdp, atoms: &[String]) -> f64 {
    let k = atoms.len();
    if k == 0 {
        return 1.0;
    }
    let full = (1usize << k) - 1;
    let bits = |s: usize| {
        let mut b = 0usize;
        for a in m.label(s) {
            if let Some(i) = atoms.iter().position(|x| x == a) {
                b |= 1 << i;
            }
        }
        b
    };
    let n = m.num_states();
    let mut v = vec![vec![0.0f64; full + 1]; n];
    for s in 0..n {
        v[s][full] = 1.0;
    }
    for _ in 0..100_000 {
        let mut delta = 0.0f64;
        for s in 0..n {
            for mask in 0..full {
                let best = m
                    .choices(s)
                    .iter()
                    .map(|c| c.outcomes.iter().map(|&(t, p)| p * v[t][mask | bits(t)]).sum::<f64>())
                    .fold(0.0, f64::max);
                delta = delta.max((best - v[s][mask]).abs());
                v[s][mask] = best;
            }
        }
        if delta < 1e-14 {
            break;
        }
    }
    let s0 = m.initial();
    v[s0][bits(s0)]
}

/// Best allocation by brute force: the best product over every allocation of the
/// `F p_k` tasks to robots of the robots' independent success probabilities.
pub fn best_allocation(models: &[Mdp], tasks: &[String]) -> f64 {
    let n = models.len();
    let m = tasks.len();
    let mut best = 0.0f64;
    let mut assign = vec![0usize; m];
    loop {
        let mut value = 1.0;
        for (r, model) in models.iter().enumerate() {
            let mine: Vec<String> = (0..m).filter(|&k| assign[k] == r).map(|k| tasks[k].clone()).collect();
            value *= visit_all(model, &mine);
        }
        best = best.max(value);
        let mut k = 0;
        loop {
            if k == m {
                return best;
            }
            assign[k] += 1;
            if assign[k] < n {
                break;
            }
            assign[k] = 0;
            k += 1;
        }
    }
}

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

// ---------------------------------------------------------------------------
// Hand-built instances.

/// 0 -> 1 -> 2 with the task `g` at 2; leaving 1 fails with `f`; 3 is s_⊥.
pub fn corridor(f: f64) -> Mdp {
    let mut b = MdpBuilder::new(4);
    b.failure_state(3).label(2, "g").transition(0, "go", &[(1, 1.0)]);
    if f > 0.0 {
        b.transition(1, "go", &[(2, 1.0 - f), (3, f)]);
    } else {
        b.transition(1, "go", &[(2, 1.0)]);
    }
    b.build().expect("corridor")
}
