use std::collections::{BTreeMap, HashMap, VecDeque};

use serde::{Deserialize, Serialize};

use super::formula::{classify, Formula, Fragment};
use crate::error::{Error, Result};

/// More relevant atoms than this would make the transition table unwieldy.
pub const MAX_DFA_ATOMS: usize = 16;

/// Deterministic finite automaton over the subsets of its relevant atoms.
///
/// Letters are bitmasks: bit `i` is set when `atoms[i]` holds. The table is
/// total: every state has exactly `2^atoms.len()` successors.
#[derive(Clone, Debug, PartialEq)]
pub struct Dfa {
    atoms: Vec<String>,
    initial: usize,
    accepting: Vec<bool>,
    trans: Vec<Vec<usize>>,
    fragment: Fragment,
    names: Vec<String>,
}

/// Simplify a formula into the canonical form used as progression state key.
///
/// Conjunctions and disjunctions are flattened, constants absorbed, children
/// sorted by the structural order and deduplicated. Temporal operators over
/// constants collapse (`X true = true`, `false U b = b`, ...).
pub fn canonical(f: &Formula) -> Formula {
    match f {
        Formula::True | Formula::False | Formula::Atom(_) | Formula::NegAtom(_) => f.clone(),
        Formula::And(cs) => junction(cs, true),
        Formula::Or(cs) => junction(cs, false),
        Formula::Next(c) => match canonical(c) {
            k @ (Formula::True | Formula::False) => k,
            c => Formula::next(c),
        },
        Formula::Eventually(c) => match canonical(c) {
            k @ (Formula::True | Formula::False) => k,
            c => Formula::eventually(c),
        },
        Formula::Always(c) => match canonical(c) {
            k @ (Formula::True | Formula::False) => k,
            c => Formula::always(c),
        },
        Formula::Until(a, b) => match (canonical(a), canonical(b)) {
            (_, k @ (Formula::True | Formula::False)) => k,
            (Formula::False, b) => b,
            (a, b) => Formula::until(a, b),
        },
    }
}

/// Boolean combinations are kept as a reduced disjunctive normal form over
/// their non-boolean parts: clauses are sorted sets and clauses absorbed by a
/// smaller one are removed. Literals are left alone (`a & !a` still holds on
/// the empty trace of a safe formula). Progression only ever produces boolean
/// combinations of the formula's finite closure, so this keeps the state set
/// finite.
fn junction(children: &[Formula], conj: bool) -> Formula {
    let parts: Vec<Vec<Vec<Formula>>> = children.iter().map(|c| dnf(&canonical(c))).collect();
    let clauses = if conj {
        parts.into_iter().fold(vec![Vec::new()], |acc, part| {
            let mut out = Vec::with_capacity(acc.len() * part.len());
            for a in &acc {
                for b in &part {
                    out.push(a.iter().chain(b).cloned().collect());
                }
            }
            out
        })
    } else {
        parts.into_iter().flatten().collect()
    };
    from_dnf(clauses)
}

fn dnf(f: &Formula) -> Vec<Vec<Formula>> {
    match f {
        Formula::True => vec![Vec::new()],
        Formula::False => Vec::new(),
        Formula::Or(cs) => cs.iter().flat_map(dnf).collect(),
        Formula::And(cs) => vec![cs.clone()],
        other => vec![vec![other.clone()]],
    }
}

fn from_dnf(clauses: Vec<Vec<Formula>>) -> Formula {
    let mut clauses: Vec<Vec<Formula>> = clauses
        .into_iter()
        .map(|mut c| {
            c.sort();
            c.dedup();
            c
        })
        .collect();
    clauses.sort_by(|a, b| a.len().cmp(&b.len()).then_with(|| a.cmp(b)));
    clauses.dedup();
    let mut kept: Vec<Vec<Formula>> = Vec::new();
    for c in clauses {
        if !kept.iter().any(|k| k.iter().all(|l| c.binary_search(l).is_ok())) {
            kept.push(c);
        }
    }
    kept.sort();
    let mut terms: Vec<Formula> = kept
        .into_iter()
        .map(|mut c| match c.len() {
            0 => Formula::True,
            1 => c.pop().unwrap(),
            _ => Formula::And(c),
        })
        .collect();
    match terms.len() {
        0 => Formula::False,
        1 => terms.pop().unwrap(),
        _ => Formula::Or(terms),
    }
}

/// One progression step: the obligation left for the rest of the trace after
/// reading a letter where exactly the atoms accepted by `holds` are true.
pub fn progress(f: &Formula, holds: &impl Fn(&str) -> bool) -> Formula {
    let raw = match f {
        Formula::True => Formula::True,
        Formula::False => Formula::False,
        Formula::Atom(p) => bool_formula(holds(p)),
        Formula::NegAtom(p) => bool_formula(!holds(p)),
        Formula::And(cs) => Formula::And(cs.iter().map(|c| progress(c, holds)).collect()),
        Formula::Or(cs) => Formula::Or(cs.iter().map(|c| progress(c, holds)).collect()),
        Formula::Next(c) => (**c).clone(),
        Formula::Eventually(c) => Formula::or(progress(c, holds), f.clone()),
        Formula::Always(c) => Formula::and(progress(c, holds), f.clone()),
        Formula::Until(a, b) => {
            Formula::or(progress(b, holds), Formula::and(progress(a, holds), f.clone()))
        }
    };
    canonical(&raw)
}

fn bool_formula(b: bool) -> Formula {
    if b {
        Formula::True
    } else {
        Formula::False
    }
}

/// Compile a safe or co-safe formula into a DFA by formula progression.
pub fn compile(f: &Formula) -> Result<Dfa> {
    compile_as(f, classify(f))
}

/// Compile with an explicit acceptance mode. Co-safe automata accept exactly
/// when the remaining obligation is `true`; safe automata accept everything
/// except the `false` trap.
pub fn compile_as(f: &Formula, fragment: Fragment) -> Result<Dfa> {
    let fits = match fragment {
        Fragment::CoSafe => f.is_cosafe(),
        Fragment::Safe => f.is_safe(),
        Fragment::Neither => false,
    };
    if !fits {
        return Err(Error::Classification {
            formula: f.to_string(),
            found: classify(f).to_string(),
            expected: match fragment {
                Fragment::Safe => "safe".into(),
                _ => "co-safe".into(),
            },
        });
    }
    let atoms: Vec<String> = f.atoms().into_iter().collect();
    if atoms.len() > MAX_DFA_ATOMS {
        return Err(Error::Mission(format!(
            "formula `{f}` mentions {} atoms, at most {MAX_DFA_ATOMS} are supported",
            atoms.len()
        )));
    }
    let letters = 1usize << atoms.len();

    let start = canonical(f);
    let mut ids: HashMap<Formula, usize> = HashMap::new();
    let mut states = vec![start.clone()];
    ids.insert(start, 0);
    let mut trans: Vec<Vec<usize>> = Vec::new();
    let mut next = 0;
    while next < states.len() {
        let current = states[next].clone();
        let mut row = Vec::with_capacity(letters);
        for mask in 0..letters {
            let holds = |p: &str| {
                atoms
                    .binary_search_by(|a| a.as_str().cmp(p))
                    .map(|i| mask >> i & 1 == 1)
                    .unwrap_or(false)
            };
            let succ = progress(&current, &holds);
            let id = *ids.entry(succ.clone()).or_insert_with(|| {
                states.push(succ);
                states.len() - 1
            });
            row.push(id);
        }
        trans.push(row);
        next += 1;
    }

    let accepting = states
        .iter()
        .map(|s| match fragment {
            Fragment::Safe => *s != Formula::False,
            _ => *s == Formula::True,
        })
        .collect();
    Ok(Dfa {
        atoms,
        initial: 0,
        accepting,
        trans,
        fragment,
        names: states.iter().map(|s| s.to_string()).collect(),
    })
}

impl Dfa {
    pub fn num_states(&self) -> usize {
        self.trans.len()
    }

    pub fn initial(&self) -> usize {
        self.initial
    }

    pub fn atoms(&self) -> &[String] {
        &self.atoms
    }

    pub fn fragment(&self) -> Fragment {
        self.fragment
    }

    pub fn is_accepting(&self, q: usize) -> bool {
        self.accepting[q]
    }

    pub fn accepting_states(&self) -> impl Iterator<Item = usize> + '_ {
        (0..self.num_states()).filter(|&q| self.accepting[q])
    }

    /// Human-readable description of a state (its progression formula).
    pub fn state_name(&self, q: usize) -> &str {
        &self.names[q]
    }

    /// Successor on a letter given as a bitmask over `atoms()`.
    pub fn step(&self, q: usize, mask: u32) -> usize {
        self.trans[q][mask as usize]
    }

    /// Project a label (any set of atom names) onto this automaton's atoms.
    pub fn mask_of<'a>(&self, label: impl IntoIterator<Item = &'a str>) -> u32 {
        let mut mask = 0u32;
        for p in label {
            if let Ok(i) = self.atoms.binary_search_by(|a| a.as_str().cmp(p)) {
                mask |= 1 << i;
            }
        }
        mask
    }

    /// Run the automaton over a sequence of labels starting from the initial state.
    pub fn run<'a, L>(&self, trace: impl IntoIterator<Item = L>) -> usize
    where
        L: IntoIterator<Item = &'a str>,
    {
        trace.into_iter().fold(self.initial, |q, label| self.step(q, self.mask_of(label)))
    }

    pub fn accepts<'a, L>(&self, trace: impl IntoIterator<Item = L>) -> bool
    where
        L: IntoIterator<Item = &'a str>,
    {
        self.accepting[self.run(trace)]
    }

    /// True if the state loops to itself on every letter.
    pub fn is_absorbing(&self, q: usize) -> bool {
        self.trans[q].iter().all(|&t| t == q)
    }

    /// Minimal equivalent automaton by Moore partition refinement.
    ///
    /// Unreachable states are dropped and the result is renumbered in
    /// breadth-first order from the initial state.
    pub fn minimize(&self) -> Dfa {
        let letters = 1usize << self.atoms.len();
        let order = self.bfs_order();
        let mut class: Vec<usize> = vec![usize::MAX; self.num_states()];
        for &q in &order {
            class[q] = usize::from(self.accepting[q]);
        }
        let mut count = order.iter().map(|&q| class[q]).collect::<std::collections::BTreeSet<_>>().len();
        loop {
            let mut sigs: BTreeMap<(usize, Vec<usize>), usize> = BTreeMap::new();
            let mut refined = vec![usize::MAX; self.num_states()];
            for &q in &order {
                let sig = (class[q], (0..letters).map(|a| class[self.trans[q][a]]).collect::<Vec<_>>());
                let next_id = sigs.len();
                refined[q] = *sigs.entry(sig).or_insert(next_id);
            }
            let new_count = sigs.len();
            class = refined;
            if new_count == count {
                break;
            }
            count = new_count;
        }

        // Renumber classes in BFS order of their first member.
        let mut renumber: HashMap<usize, usize> = HashMap::new();
        let mut reps = Vec::new();
        for &q in &order {
            renumber.entry(class[q]).or_insert_with(|| {
                reps.push(q);
                reps.len() - 1
            });
        }
        let trans = reps
            .iter()
            .map(|&q| (0..letters).map(|a| renumber[&class[self.trans[q][a]]]).collect())
            .collect();
        Dfa {
            atoms: self.atoms.clone(),
            initial: renumber[&class[self.initial]],
            accepting: reps.iter().map(|&q| self.accepting[q]).collect(),
            trans,
            fragment: self.fragment,
            names: reps.iter().map(|&q| self.names[q].clone()).collect(),
        }
    }

    fn bfs_order(&self) -> Vec<usize> {
        let mut seen = vec![false; self.num_states()];
        let mut order = vec![self.initial];
        seen[self.initial] = true;
        let mut queue = VecDeque::from([self.initial]);
        while let Some(q) = queue.pop_front() {
            for &t in &self.trans[q] {
                if !seen[t] {
                    seen[t] = true;
                    order.push(t);
                    queue.push_back(t);
                }
            }
        }
        order
    }

    pub fn to_json(&self) -> DfaJson {
        let mut trans = Vec::new();
        for (from, row) in self.trans.iter().enumerate() {
            for (mask, &to) in row.iter().enumerate() {
                let label = (0..self.atoms.len())
                    .filter(|i| mask >> i & 1 == 1)
                    .map(|i| self.atoms[i].clone())
                    .collect();
                trans.push(DfaEdge { from, label, to });
            }
        }
        DfaJson {
            states: (0..self.num_states()).collect(),
            initial: self.initial,
            accepting: self.accepting_states().collect(),
            atoms: self.atoms.clone(),
            trans,
        }
    }

    /// Rebuild an automaton from its serialized form. The acceptance mode is
    /// not part of the file format and must be supplied.
    pub fn from_json(json: &DfaJson, fragment: Fragment) -> Result<Dfa> {
        let index: HashMap<usize, usize> = json.states.iter().enumerate().map(|(i, &s)| (s, i)).collect();
        let lookup = |id: usize| {
            index
                .get(&id)
                .copied()
                .ok_or_else(|| Error::Model(format!("dfa refers to unknown state {id}")))
        };
        let mut atoms = json.atoms.clone();
        atoms.sort();
        atoms.dedup();
        let letters = 1usize << atoms.len();
        let mut trans = vec![vec![usize::MAX; letters]; json.states.len()];
        let mut accepting = vec![false; json.states.len()];
        for &a in &json.accepting {
            accepting[lookup(a)?] = true;
        }
        let mut dfa = Dfa {
            atoms,
            initial: lookup(json.initial)?,
            accepting,
            trans: Vec::new(),
            fragment,
            names: json.states.iter().map(|s| s.to_string()).collect(),
        };
        for e in &json.trans {
            let mask = dfa.mask_of(e.label.iter().map(String::as_str)) as usize;
            trans[lookup(e.from)?][mask] = lookup(e.to)?;
        }
        if trans.iter().flatten().any(|&t| t == usize::MAX) {
            return Err(Error::Model("dfa transition table is not total".into()));
        }
        dfa.trans = trans;
        Ok(dfa)
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DfaJson {
    pub states: Vec<usize>,
    pub initial: usize,
    pub accepting: Vec<usize>,
    pub atoms: Vec<String>,
    pub trans: Vec<DfaEdge>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DfaEdge {
    pub from: usize,
    pub label: Vec<String>,
    pub to: usize,
}
