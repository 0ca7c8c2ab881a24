use std::collections::BTreeMap;
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::model::{Mdp, MdpBuilder};
use crate::error::{Error, Result};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ModelJson {
    pub states: usize,
    pub initial: usize,
    #[serde(default)]
    pub atoms: Vec<String>,
    #[serde(default)]
    pub labels: BTreeMap<String, Vec<String>>,
    #[serde(default)]
    pub failure_state: Option<usize>,
    #[serde(default)]
    pub actions: Vec<String>,
    pub trans: Vec<TransJson>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TransJson {
    pub from: usize,
    pub action: String,
    pub outcomes: Vec<OutcomeJson>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub cost: Option<f64>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct OutcomeJson {
    pub to: usize,
    pub p: f64,
}

impl ModelJson {
    fn builder(&self) -> Result<MdpBuilder> {
        let mut b = MdpBuilder::new(self.states);
        b.initial(self.initial);
        for a in &self.atoms {
            b.atom(a);
        }
        for a in &self.actions {
            b.action(a);
        }
        if let Some(f) = self.failure_state {
            b.failure_state(f);
        }
        for (key, atoms) in &self.labels {
            let s: usize = key
                .parse()
                .map_err(|_| Error::Model(format!("label key `{key}` is not a state index")))?;
            if s >= self.states {
                return Err(Error::Model(format!("label for state {s} out of range")));
            }
            for a in atoms {
                if !self.atoms.contains(a) {
                    return Err(Error::Model(format!("label atom `{a}` not declared in atoms")));
                }
                b.label(s, a);
            }
        }
        for t in &self.trans {
            if !self.actions.is_empty() && !self.actions.contains(&t.action) {
                return Err(Error::Model(format!("action `{}` not declared in actions", t.action)));
            }
            let outcomes: Vec<(usize, f64)> = t.outcomes.iter().map(|o| (o.to, o.p)).collect();
            b.transition_with_cost(t.from, &t.action, &outcomes, t.cost.unwrap_or(0.0));
        }
        Ok(b)
    }
}

impl Mdp {
    /// Load a model, rejecting malformed probability distributions.
    pub fn from_json(json: &ModelJson) -> Result<Mdp> {
        json.builder()?.build()
    }

    /// Load without probability checks, for diagnostics.
    pub fn from_json_unchecked(json: &ModelJson) -> Result<Mdp> {
        json.builder()?.build_unchecked()
    }

    pub fn to_json(&self) -> ModelJson {
        let mut labels = BTreeMap::new();
        for s in 0..self.num_states() {
            let l: Vec<String> = self.label(s).map(str::to_string).collect();
            if !l.is_empty() {
                labels.insert(s.to_string(), l);
            }
        }
        let mut trans = Vec::new();
        for s in 0..self.num_states() {
            for c in self.choices(s) {
                trans.push(TransJson {
                    from: s,
                    action: self.action_name(c.action).to_string(),
                    outcomes: c.outcomes.iter().map(|&(to, p)| OutcomeJson { to, p }).collect(),
                    cost: self.has_costs().then_some(c.cost),
                });
            }
        }
        ModelJson {
            states: self.num_states(),
            initial: self.initial(),
            atoms: self.atoms().to_vec(),
            labels,
            failure_state: self.failure_state(),
            actions: self.actions().to_vec(),
            trans,
        }
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Mdp> {
        let text = std::fs::read_to_string(path)?;
        Mdp::from_json(&serde_json::from_str(&text)?)
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        std::fs::write(path, serde_json::to_string_pretty(&self.to_json())?)?;
        Ok(())
    }
}
