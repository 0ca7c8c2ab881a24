//! Local product of one robot's MDP with every automaton of a mission.

use std::collections::{HashMap, VecDeque};
use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::logic::{Mission, MissionAutomata};
use crate::mdp::{Choice, Mdp, StateSet};

/// A product state: map state plus one DFA state per mission component.
#[derive(Clone, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct ProductState {
    pub s: usize,
    pub q: Vec<usize>,
}

/// Per-state DFA letters of a robot model, one mask per mission component.
#[derive(Clone, Debug)]
pub struct LabelMasks {
    width: usize,
    masks: Vec<u32>,
}

impl LabelMasks {
    pub fn new(m: &Mdp, automata: &MissionAutomata) -> LabelMasks {
        let width = automata.width();
        let mut masks = Vec::with_capacity(m.num_states() * width);
        for s in 0..m.num_states() {
            masks.extend(automata.masks(m.label(s)));
        }
        LabelMasks { width, masks }
    }

    pub fn of(&self, s: usize) -> &[u32] {
        &self.masks[s * self.width..(s + 1) * self.width]
    }

    /// Letters for the union of the labels of several states.
    pub fn union<'a>(tables: impl IntoIterator<Item = (&'a LabelMasks, usize)>, width: usize) -> Vec<u32> {
        let mut out = vec![0u32; width];
        for (t, s) in tables {
            for (o, m) in out.iter_mut().zip(t.of(s)) {
                *o |= m;
            }
        }
        out
    }
}

/// A robot model paired with a compiled mission. Shared by every model
/// built on top of the robot (local product, team MDP, joint chains).
#[derive(Clone, Debug)]
pub struct RobotModel {
    pub mdp: Arc<Mdp>,
    pub automata: Arc<MissionAutomata>,
    pub masks: LabelMasks,
}

impl RobotModel {
    pub fn new(mdp: Arc<Mdp>, automata: Arc<MissionAutomata>) -> Result<RobotModel> {
        for atom in automata.mission.atoms() {
            if !mdp.atoms().contains(&atom) {
                return Err(Error::Mission(format!("atom `{atom}` is not in the robot model's propositions")));
            }
        }
        let masks = LabelMasks::new(&mdp, &automata);
        Ok(RobotModel { mdp, automata, masks })
    }

    /// DFA vector after observing the label of `s` from `q`.
    pub fn advance(&self, q: &[usize], s: usize) -> Vec<usize> {
        self.automata.advance(q, self.masks.of(s))
    }

    /// Product state for standing at `s` before any label has been read:
    /// the initial label is applied once.
    pub fn initial_state(&self) -> ProductState {
        let s = self.mdp.initial();
        ProductState { s, q: self.advance(&self.automata.initial(), s) }
    }

    /// Successors of a product state under a map choice.
    pub fn successors<'a>(&'a self, ps: &'a ProductState, c: &'a Choice) -> impl Iterator<Item = (ProductState, f64)> + 'a {
        c.outcomes.iter().map(move |&(t, p)| (ProductState { s: t, q: self.advance(&ps.q, t) }, p))
    }

    /// Combinatorial product size over operational (non-failure) map states,
    /// with and without the safety automaton.
    pub fn full_size(&self) -> (u128, u128) {
        let (with, without) = self.automata.automata_size();
        let ops = self.mdp.operational_states() as u128;
        (ops * with, ops * without)
    }
}

/// Reachable fragment of `M x A_1 x ... x A_m x A_safe`.
#[derive(Clone, Debug)]
pub struct ProductMdp {
    mdp: Mdp,
    states: Vec<ProductState>,
    index: HashMap<ProductState, usize>,
    robot: RobotModel,
}

/// Build the local product of a robot model with a mission.
pub fn local_product(m: &Mdp, mission: &Mission) -> Result<ProductMdp> {
    let automata = Arc::new(mission.compile()?);
    ProductMdp::build(RobotModel::new(Arc::new(m.clone()), automata)?)
}

impl ProductMdp {
    /// Breadth-first exploration from the initial tuple; indices follow
    /// discovery order. Safety-violating states are absorbing.
    pub fn build(robot: RobotModel) -> Result<ProductMdp> {
        let init = robot.initial_state();
        let mut states = vec![init.clone()];
        let mut index = HashMap::from([(init, 0usize)]);
        let mut choices: Vec<Vec<Choice>> = Vec::new();
        let mut labels = Vec::new();
        let mut queue = VecDeque::from([0usize]);
        while let Some(i) = queue.pop_front() {
            let ps = states[i].clone();
            let mut out = Vec::new();
            if robot.automata.safety_ok(&ps.q) {
                for c in robot.mdp.choices(ps.s) {
                    let mut outcomes = Vec::with_capacity(c.outcomes.len());
                    for (succ, p) in robot.successors(&ps, c) {
                        let id = *index.entry(succ.clone()).or_insert_with(|| {
                            states.push(succ);
                            queue.push_back(states.len() - 1);
                            states.len() - 1
                        });
                        outcomes.push((id, p));
                    }
                    out.push(Choice { action: c.action, outcomes, cost: c.cost });
                }
            }
            if choices.len() <= i {
                choices.resize(i + 1, Vec::new());
                labels.resize(i + 1, Vec::new());
            }
            choices[i] = out;
            labels[i] = robot.mdp.label_ids(ps.s).to_vec();
        }
        let mdp = Mdp::from_parts(
            0,
            robot.mdp.actions().to_vec(),
            robot.mdp.atoms().to_vec(),
            labels,
            None,
            choices,
        );
        Ok(ProductMdp { mdp, states, index, robot })
    }

    pub fn mdp(&self) -> &Mdp {
        &self.mdp
    }

    pub fn robot(&self) -> &RobotModel {
        &self.robot
    }

    pub fn automata(&self) -> &MissionAutomata {
        &self.robot.automata
    }

    pub fn source(&self) -> &Mdp {
        &self.robot.mdp
    }

    pub fn state(&self, i: usize) -> &ProductState {
        &self.states[i]
    }

    pub fn index_of(&self, ps: &ProductState) -> Option<usize> {
        self.index.get(ps).copied()
    }

    pub fn num_states(&self) -> usize {
        self.states.len()
    }

    /// `|S| * prod |Q|` over operational map states, including the safety factor.
    pub fn full_size(&self) -> u128 {
        self.robot.full_size().0
    }

    pub fn full_size_without_safety(&self) -> u128 {
        self.robot.full_size().1
    }

    /// States where every task is accepting and safety holds.
    pub fn accepting_states(&self) -> StateSet {
        StateSet::from_fn(self.states.len(), |i| self.robot.automata.is_complete(&self.states[i].q))
    }

    /// States where the safety automaton sits in its trap.
    pub fn violating_states(&self) -> StateSet {
        StateSet::from_fn(self.states.len(), |i| !self.robot.automata.safety_ok(&self.states[i].q))
    }

    /// States where task `k` is accepting.
    pub fn task_accepting_states(&self, k: usize) -> StateSet {
        StateSet::from_fn(self.states.len(), |i| self.robot.automata.task_accepting(&self.states[i].q, k))
    }
}
