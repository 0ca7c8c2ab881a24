use std::collections::HashMap;

use crate::error::{Error, Result};

/// Tolerance on outcome probability sums.
pub const PROB_SUM_TOLERANCE: f64 = 1e-9;

/// One enabled action in a state with its outcome distribution.
#[derive(Clone, Debug, PartialEq)]
pub struct Choice {
    pub action: usize,
    pub outcomes: Vec<(usize, f64)>,
    pub cost: f64,
}

impl Choice {
    /// Expected value of `v` over the outcome distribution.
    pub fn expect(&self, v: &[f64]) -> f64 {
        self.outcomes.iter().map(|&(t, p)| p * v[t]).sum()
    }
}

/// Explicit-state MDP with sparse per-(state, action) outcome lists.
///
/// Choices of a state are kept sorted by action index, which is the
/// declaration order of the actions.
#[derive(Clone, Debug)]
pub struct Mdp {
    initial: usize,
    actions: Vec<String>,
    atoms: Vec<String>,
    labels: Vec<Vec<usize>>,
    failure: Option<usize>,
    choices: Vec<Vec<Choice>>,
    has_costs: bool,
}

impl Mdp {
    /// Assemble a model from parts. Choices are sorted by action; no
    /// probability checks are made here (see [`crate::mdp::validate`]).
    pub fn from_parts(
        initial: usize,
        actions: Vec<String>,
        atoms: Vec<String>,
        labels: Vec<Vec<usize>>,
        failure: Option<usize>,
        mut choices: Vec<Vec<Choice>>,
    ) -> Mdp {
        for cs in &mut choices {
            cs.sort_by_key(|c| c.action);
        }
        let has_costs = choices.iter().flatten().any(|c| c.cost != 0.0);
        let labels = if labels.is_empty() { vec![Vec::new(); choices.len()] } else { labels };
        Mdp { initial, actions, atoms, labels, failure, choices, has_costs }
    }

    pub fn num_states(&self) -> usize {
        self.choices.len()
    }

    /// States other than the designated failure state.
    pub fn operational_states(&self) -> usize {
        self.num_states() - usize::from(self.failure.is_some())
    }

    pub fn initial(&self) -> usize {
        self.initial
    }

    pub fn actions(&self) -> &[String] {
        &self.actions
    }

    pub fn action_name(&self, a: usize) -> &str {
        &self.actions[a]
    }

    pub fn action_id(&self, name: &str) -> Option<usize> {
        self.actions.iter().position(|a| a == name)
    }

    pub fn atoms(&self) -> &[String] {
        &self.atoms
    }

    pub fn label(&self, s: usize) -> impl Iterator<Item = &str> + Clone + '_ {
        self.labels[s].iter().map(move |&i| self.atoms[i].as_str())
    }

    pub fn label_ids(&self, s: usize) -> &[usize] {
        &self.labels[s]
    }

    pub fn failure_state(&self) -> Option<usize> {
        self.failure
    }

    pub fn is_failure(&self, s: usize) -> bool {
        self.failure == Some(s)
    }

    pub fn choices(&self, s: usize) -> &[Choice] {
        &self.choices[s]
    }

    pub fn choice(&self, s: usize, action: usize) -> Option<&Choice> {
        let cs = &self.choices[s];
        cs.binary_search_by_key(&action, |c| c.action).ok().map(|i| &cs[i])
    }

    pub fn has_costs(&self) -> bool {
        self.has_costs
    }

    /// Number of (state, action, successor) triples.
    pub fn num_transitions(&self) -> usize {
        self.choices.iter().flatten().map(|c| c.outcomes.len()).sum()
    }

    /// Copy of the model with a different initial state.
    pub fn with_initial(&self, s: usize) -> Result<Mdp> {
        if s >= self.num_states() {
            return Err(Error::Model(format!("initial state {s} out of range")));
        }
        let mut m = self.clone();
        m.initial = s;
        Ok(m)
    }
}

/// Incremental construction of an [`Mdp`] by action and atom names.
#[derive(Clone, Debug, Default)]
pub struct MdpBuilder {
    num_states: usize,
    initial: usize,
    actions: Vec<String>,
    action_ids: HashMap<String, usize>,
    atoms: Vec<String>,
    labels: Vec<Vec<String>>,
    failure: Option<usize>,
    trans: Vec<PendingTransition>,
}

/// (from, action, outcomes, cost)
type PendingTransition = (usize, String, Vec<(usize, f64)>, f64);

impl MdpBuilder {
    pub fn new(num_states: usize) -> MdpBuilder {
        MdpBuilder { num_states, labels: vec![Vec::new(); num_states], ..Default::default() }
    }

    pub fn initial(&mut self, s: usize) -> &mut Self {
        self.initial = s;
        self
    }

    pub fn atom(&mut self, name: &str) -> &mut Self {
        if !self.atoms.iter().any(|a| a == name) {
            self.atoms.push(name.to_string());
        }
        self
    }

    pub fn label(&mut self, s: usize, atom: &str) -> &mut Self {
        self.atom(atom);
        if s < self.labels.len() && !self.labels[s].iter().any(|a| a == atom) {
            self.labels[s].push(atom.to_string());
        }
        self
    }

    pub fn failure_state(&mut self, s: usize) -> &mut Self {
        self.failure = Some(s);
        self
    }

    /// Declare an action; declaration order fixes the tie-breaking order.
    pub fn action(&mut self, name: &str) -> &mut Self {
        if !self.action_ids.contains_key(name) {
            self.action_ids.insert(name.to_string(), self.actions.len());
            self.actions.push(name.to_string());
        }
        self
    }

    pub fn transition(&mut self, s: usize, action: &str, outcomes: &[(usize, f64)]) -> &mut Self {
        self.transition_with_cost(s, action, outcomes, 0.0)
    }

    pub fn transition_with_cost(
        &mut self,
        s: usize,
        action: &str,
        outcomes: &[(usize, f64)],
        cost: f64,
    ) -> &mut Self {
        self.action(action);
        self.trans.push((s, action.to_string(), outcomes.to_vec(), cost));
        self
    }

    /// Build without checking probabilities. Indices and duplicate
    /// (state, action) pairs are still rejected.
    pub fn build_unchecked(&self) -> Result<Mdp> {
        let n = self.num_states;
        let check = |s: usize, what: &str| {
            if s >= n {
                Err(Error::Model(format!("{what} {s} out of range for {n} states")))
            } else {
                Ok(())
            }
        };
        check(self.initial, "initial state")?;
        if let Some(f) = self.failure {
            check(f, "failure state")?;
        }
        let mut atoms = self.atoms.clone();
        atoms.sort();
        let labels = self
            .labels
            .iter()
            .map(|l| {
                let mut ids: Vec<usize> = l.iter().map(|a| atoms.binary_search(a).unwrap()).collect();
                ids.sort_unstable();
                ids
            })
            .collect();
        let mut choices: Vec<Vec<Choice>> = vec![Vec::new(); n];
        for (s, action, outcomes, cost) in &self.trans {
            check(*s, "source state")?;
            for &(t, _) in outcomes {
                check(t, "successor state")?;
            }
            if *cost < 0.0 || !cost.is_finite() {
                return Err(Error::Model(format!("negative or non-finite cost at state {s}, action {action}")));
            }
            let a = self.action_ids[action];
            if choices[*s].iter().any(|c| c.action == a) {
                return Err(Error::Model(format!("duplicate transition for state {s}, action {action}")));
            }
            let mut merged: Vec<(usize, f64)> = Vec::with_capacity(outcomes.len());
            for &(t, p) in outcomes {
                match merged.iter_mut().find(|(u, _)| *u == t) {
                    Some(e) => e.1 += p,
                    None => merged.push((t, p)),
                }
            }
            choices[*s].push(Choice { action: a, outcomes: merged, cost: *cost });
        }
        Ok(Mdp::from_parts(self.initial, self.actions.clone(), atoms, labels, self.failure, choices))
    }

    /// Build and reject malformed probability distributions.
    pub fn build(&self) -> Result<Mdp> {
        let m = self.build_unchecked()?;
        super::validate::ensure_well_formed(&m)?;
        Ok(m)
    }
}
