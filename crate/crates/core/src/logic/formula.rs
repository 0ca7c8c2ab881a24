use std::collections::BTreeSet;
use std::fmt;

/// LTL formula in positive normal form. Negation only occurs on atoms.
///
/// The derived `Ord` is the structural total order used to canonicalize
/// conjunctions and disjunctions.
#[derive(Clone, Debug, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum Formula {
    True,
    False,
    Atom(String),
    NegAtom(String),
    And(Vec<Formula>),
    Or(Vec<Formula>),
    Next(Box<Formula>),
    Eventually(Box<Formula>),
    Always(Box<Formula>),
    Until(Box<Formula>, Box<Formula>),
}

/// Syntactic fragment of a PNF formula.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, serde::Serialize, serde::Deserialize)]
pub enum Fragment {
    CoSafe,
    Safe,
    Neither,
}

impl fmt::Display for Fragment {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Fragment::CoSafe => write!(f, "co-safe"),
            Fragment::Safe => write!(f, "safe"),
            Fragment::Neither => write!(f, "neither safe nor co-safe"),
        }
    }
}

impl Formula {
    pub fn atom(name: &str) -> Formula {
        Formula::Atom(name.to_string())
    }

    pub fn neg_atom(name: &str) -> Formula {
        Formula::NegAtom(name.to_string())
    }

    pub fn and(a: Formula, b: Formula) -> Formula {
        Formula::And(vec![a, b])
    }

    pub fn or(a: Formula, b: Formula) -> Formula {
        Formula::Or(vec![a, b])
    }

    pub fn next(f: Formula) -> Formula {
        Formula::Next(Box::new(f))
    }

    pub fn eventually(f: Formula) -> Formula {
        Formula::Eventually(Box::new(f))
    }

    pub fn always(f: Formula) -> Formula {
        Formula::Always(Box::new(f))
    }

    pub fn until(a: Formula, b: Formula) -> Formula {
        Formula::Until(Box::new(a), Box::new(b))
    }

    /// Sorted set of atomic propositions occurring in the formula.
    pub fn atoms(&self) -> BTreeSet<String> {
        let mut out = BTreeSet::new();
        self.collect_atoms(&mut out);
        out
    }

    fn collect_atoms(&self, out: &mut BTreeSet<String>) {
        match self {
            Formula::True | Formula::False => {}
            Formula::Atom(p) | Formula::NegAtom(p) => {
                out.insert(p.clone());
            }
            Formula::And(cs) | Formula::Or(cs) => cs.iter().for_each(|c| c.collect_atoms(out)),
            Formula::Next(c) | Formula::Eventually(c) | Formula::Always(c) => c.collect_atoms(out),
            Formula::Until(a, b) => {
                a.collect_atoms(out);
                b.collect_atoms(out);
            }
        }
    }

    fn any_node(&self, pred: &impl Fn(&Formula) -> bool) -> bool {
        if pred(self) {
            return true;
        }
        match self {
            Formula::And(cs) | Formula::Or(cs) => cs.iter().any(|c| c.any_node(pred)),
            Formula::Next(c) | Formula::Eventually(c) | Formula::Always(c) => c.any_node(pred),
            Formula::Until(a, b) => a.any_node(pred) || b.any_node(pred),
            _ => false,
        }
    }

    /// Only X, F and U temporal operators occur.
    pub fn is_cosafe(&self) -> bool {
        !self.any_node(&|f| matches!(f, Formula::Always(_)))
    }

    /// Only G and X temporal operators occur.
    pub fn is_safe(&self) -> bool {
        !self.any_node(&|f| matches!(f, Formula::Eventually(_) | Formula::Until(..)))
    }

    /// Nesting depth of operators; literals and constants have depth 0.
    pub fn depth(&self) -> usize {
        match self {
            Formula::True | Formula::False | Formula::Atom(_) | Formula::NegAtom(_) => 0,
            Formula::And(cs) | Formula::Or(cs) => 1 + cs.iter().map(Formula::depth).max().unwrap_or(0),
            Formula::Next(c) | Formula::Eventually(c) | Formula::Always(c) => 1 + c.depth(),
            Formula::Until(a, b) => 1 + a.depth().max(b.depth()),
        }
    }

    fn precedence(&self) -> u8 {
        match self {
            Formula::Or(_) => 1,
            Formula::And(_) => 2,
            Formula::Until(..) => 3,
            Formula::Next(_) | Formula::Eventually(_) | Formula::Always(_) => 4,
            _ => 5,
        }
    }

    fn fmt_child(&self, child: &Formula, min_prec: u8, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if child.precedence() < min_prec {
            write!(f, "({child})")
        } else {
            write!(f, "{child}")
        }
    }
}

impl fmt::Display for Formula {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Formula::True => write!(f, "true"),
            Formula::False => write!(f, "false"),
            Formula::Atom(p) => write!(f, "{p}"),
            Formula::NegAtom(p) => write!(f, "!{p}"),
            Formula::And(cs) | Formula::Or(cs) => {
                let (sep, prec) = if matches!(self, Formula::And(_)) {
                    (" & ", 2)
                } else {
                    (" | ", 1)
                };
                if cs.is_empty() {
                    return write!(f, "{}", if prec == 2 { "true" } else { "false" });
                }
                for (i, c) in cs.iter().enumerate() {
                    if i > 0 {
                        write!(f, "{sep}")?;
                    }
                    // Nested operators of the same kind are parenthesized so that
                    // printing and re-parsing keeps the tree shape.
                    self.fmt_child(c, prec + 1, f)?;
                }
                Ok(())
            }
            Formula::Next(c) => {
                write!(f, "X ")?;
                self.fmt_child(c, 4, f)
            }
            Formula::Eventually(c) => {
                write!(f, "F ")?;
                self.fmt_child(c, 4, f)
            }
            Formula::Always(c) => {
                write!(f, "G ")?;
                self.fmt_child(c, 4, f)
            }
            Formula::Until(a, b) => {
                self.fmt_child(a, 4, f)?;
                write!(f, " U ")?;
                self.fmt_child(b, 3, f)
            }
        }
    }
}

/// Normalize a formula: nested conjunctions and disjunctions are flattened
/// into n-ary nodes. Negation is already restricted to atoms by construction.
pub fn to_pnf(f: &Formula) -> Formula {
    match f {
        Formula::And(cs) => Formula::And(flatten(cs, true)),
        Formula::Or(cs) => Formula::Or(flatten(cs, false)),
        Formula::Next(c) => Formula::next(to_pnf(c)),
        Formula::Eventually(c) => Formula::eventually(to_pnf(c)),
        Formula::Always(c) => Formula::always(to_pnf(c)),
        Formula::Until(a, b) => Formula::until(to_pnf(a), to_pnf(b)),
        other => other.clone(),
    }
}

fn flatten(children: &[Formula], conj: bool) -> Vec<Formula> {
    let mut out = Vec::with_capacity(children.len());
    for c in children {
        match (to_pnf(c), conj) {
            (Formula::And(inner), true) | (Formula::Or(inner), false) => out.extend(inner),
            (other, _) => out.push(other),
        }
    }
    out
}

/// Syntactic classification. Formulas without any temporal operator other
/// than X belong to both fragments and are reported as co-safe.
pub fn classify(f: &Formula) -> Fragment {
    if f.is_cosafe() {
        Fragment::CoSafe
    } else if f.is_safe() {
        Fragment::Safe
    } else {
        Fragment::Neither
    }
}
