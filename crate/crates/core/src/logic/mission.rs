use serde::{Deserialize, Serialize};

use super::dfa::{compile_as, Dfa};
use super::formula::{Formula, Fragment};
use super::parser::parse;
use crate::error::{Error, Result};

/// A set of co-safe tasks together with an optional safety constraint.
#[derive(Clone, Debug, PartialEq)]
pub struct Mission {
    pub tasks: Vec<Formula>,
    pub safety: Option<Formula>,
}

/// On-disk form: `{"tasks":["F p1",...],"safety":"G !p"|null}`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MissionJson {
    pub tasks: Vec<String>,
    #[serde(default)]
    pub safety: Option<String>,
}

impl Mission {
    pub fn new(tasks: Vec<Formula>, safety: Option<Formula>) -> Result<Mission> {
        let m = Mission { tasks, safety };
        m.validate()?;
        Ok(m)
    }

    /// Parse task and safety formulas from text.
    pub fn parse(tasks: &[&str], safety: Option<&str>) -> Result<Mission> {
        let tasks = tasks.iter().map(|t| parse(t)).collect::<Result<Vec<_>>>()?;
        let safety = safety.map(parse).transpose()?;
        Mission::new(tasks, safety)
    }

    pub fn from_json(json: &MissionJson) -> Result<Mission> {
        let tasks: Vec<&str> = json.tasks.iter().map(String::as_str).collect();
        Mission::parse(&tasks, json.safety.as_deref())
    }

    pub fn to_json(&self) -> MissionJson {
        MissionJson {
            tasks: self.tasks.iter().map(|t| t.to_string()).collect(),
            safety: self.safety.as_ref().map(|s| s.to_string()),
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.tasks.is_empty() {
            return Err(Error::Mission("a mission needs at least one task".into()));
        }
        for t in &self.tasks {
            if !t.is_cosafe() {
                return Err(Error::Classification {
                    formula: t.to_string(),
                    found: super::classify(t).to_string(),
                    expected: "co-safe".into(),
                });
            }
        }
        if let Some(s) = &self.safety {
            if !s.is_safe() {
                return Err(Error::Classification {
                    formula: s.to_string(),
                    found: super::classify(s).to_string(),
                    expected: "safe".into(),
                });
            }
        }
        Ok(())
    }

    pub fn atoms(&self) -> std::collections::BTreeSet<String> {
        let mut out = std::collections::BTreeSet::new();
        for t in self.tasks.iter().chain(self.safety.iter()) {
            out.extend(t.atoms());
        }
        out
    }

    /// Compile every formula to a minimized DFA.
    pub fn compile(&self) -> Result<MissionAutomata> {
        self.validate()?;
        let tasks = self
            .tasks
            .iter()
            .map(|t| compile_as(t, Fragment::CoSafe).map(|d| d.minimize()))
            .collect::<Result<Vec<_>>>()?;
        let safety = self
            .safety
            .as_ref()
            .map(|s| compile_as(s, Fragment::Safe).map(|d| d.minimize()))
            .transpose()?;
        Ok(MissionAutomata { mission: self.clone(), tasks, safety })
    }
}

/// The compiled automata of a mission. DFA state vectors are laid out as
/// `[q_task_1, ..., q_task_m, q_safe]`, the last entry present only when the
/// mission has a safety formula.
#[derive(Clone, Debug)]
pub struct MissionAutomata {
    pub mission: Mission,
    pub tasks: Vec<Dfa>,
    pub safety: Option<Dfa>,
}

impl MissionAutomata {
    pub fn num_tasks(&self) -> usize {
        self.tasks.len()
    }

    /// Number of DFA components (tasks plus safety when present).
    pub fn width(&self) -> usize {
        self.tasks.len() + usize::from(self.safety.is_some())
    }

    pub fn dfa(&self, k: usize) -> &Dfa {
        if k < self.tasks.len() {
            &self.tasks[k]
        } else {
            self.safety.as_ref().expect("component index out of range")
        }
    }

    pub fn dfas(&self) -> impl Iterator<Item = &Dfa> {
        self.tasks.iter().chain(self.safety.iter())
    }

    pub fn initial(&self) -> Vec<usize> {
        self.dfas().map(Dfa::initial).collect()
    }

    /// Per-component letter masks for a label given as atom names.
    pub fn masks<'a>(&self, label: impl IntoIterator<Item = &'a str> + Clone) -> Vec<u32> {
        self.dfas().map(|d| d.mask_of(label.clone())).collect()
    }

    /// Advance every component on its letter mask.
    pub fn advance(&self, q: &[usize], masks: &[u32]) -> Vec<usize> {
        self.dfas().enumerate().map(|(k, d)| d.step(q[k], masks[k])).collect()
    }

    pub fn task_accepting(&self, q: &[usize], k: usize) -> bool {
        self.tasks[k].is_accepting(q[k])
    }

    pub fn all_tasks_accepting(&self, q: &[usize]) -> bool {
        (0..self.tasks.len()).all(|k| self.task_accepting(q, k))
    }

    pub fn safety_ok(&self, q: &[usize]) -> bool {
        match &self.safety {
            Some(d) => d.is_accepting(q[self.tasks.len()]),
            None => true,
        }
    }

    /// Tasks accepting and safety not violated.
    pub fn is_complete(&self, q: &[usize]) -> bool {
        self.all_tasks_accepting(q) && self.safety_ok(q)
    }

    /// Every component is either at its initial state or accepting, which is
    /// where a switch between robots is allowed.
    pub fn switchable(&self, q: &[usize]) -> bool {
        self.dfas()
            .enumerate()
            .all(|(k, d)| q[k] == d.initial() || d.is_accepting(q[k]))
    }

    /// Product of the DFA sizes, with and without the safety factor.
    pub fn automata_size(&self) -> (u128, u128) {
        let tasks: u128 = self.tasks.iter().map(|d| d.num_states() as u128).product();
        let with = tasks * self.safety.as_ref().map_or(1, |d| d.num_states() as u128);
        (with, tasks)
    }
}
