use std::collections::VecDeque;
use std::fmt;

use super::model::{Mdp, PROB_SUM_TOLERANCE};
use crate::error::{Error, Result};

#[derive(Clone, Debug, PartialEq)]
pub enum Diagnostic {
    ProbabilitySum { state: usize, action: String, sum: f64 },
    ProbabilityRange { state: usize, action: String, successor: usize, p: f64 },
    Unreachable { state: usize },
    FailureNotAbsorbing { state: usize, action: String, successor: usize },
}

impl Diagnostic {
    /// Malformed distributions are errors; the rest are warnings.
    pub fn is_error(&self) -> bool {
        matches!(self, Diagnostic::ProbabilitySum { .. } | Diagnostic::ProbabilityRange { .. })
    }
}

impl fmt::Display for Diagnostic {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Diagnostic::ProbabilitySum { state, action, sum } => {
                write!(f, "state {state}, action {action}: outcome probabilities sum to {sum}")
            }
            Diagnostic::ProbabilityRange { state, action, successor, p } => {
                write!(f, "state {state}, action {action}: probability {p} to {successor} outside (0,1]")
            }
            Diagnostic::Unreachable { state } => write!(f, "state {state} is unreachable"),
            Diagnostic::FailureNotAbsorbing { state, action, successor } => {
                write!(f, "failure state {state} leaves to {successor} under {action}")
            }
        }
    }
}

/// Report probability violations, unreachable states and a non-absorbing
/// failure state.
pub fn validate(m: &Mdp) -> Vec<Diagnostic> {
    let mut out = Vec::new();
    for s in 0..m.num_states() {
        for c in m.choices(s) {
            let action = m.action_name(c.action).to_string();
            for &(t, p) in &c.outcomes {
                if !(p > 0.0 && p <= 1.0 + PROB_SUM_TOLERANCE) {
                    out.push(Diagnostic::ProbabilityRange { state: s, action: action.clone(), successor: t, p });
                }
            }
            let sum: f64 = c.outcomes.iter().map(|o| o.1).sum();
            if (sum - 1.0).abs() > PROB_SUM_TOLERANCE {
                out.push(Diagnostic::ProbabilitySum { state: s, action: action.clone(), sum });
            }
            if m.is_failure(s) {
                for &(t, _) in c.outcomes.iter().filter(|o| o.0 != s) {
                    out.push(Diagnostic::FailureNotAbsorbing { state: s, action: action.clone(), successor: t });
                }
            }
        }
    }
    let mut seen = vec![false; m.num_states()];
    seen[m.initial()] = true;
    let mut queue = VecDeque::from([m.initial()]);
    while let Some(s) = queue.pop_front() {
        for c in m.choices(s) {
            for &(t, _) in &c.outcomes {
                if !seen[t] {
                    seen[t] = true;
                    queue.push_back(t);
                }
            }
        }
    }
    for (s, _) in seen.iter().enumerate().filter(|(_, &r)| !r) {
        // The failure state of a failure-free model is legitimately unreachable.
        if !m.is_failure(s) {
            out.push(Diagnostic::Unreachable { state: s });
        }
    }
    out
}

pub(crate) fn ensure_well_formed(m: &Mdp) -> Result<()> {
    let errors: Vec<String> = validate(m)
        .into_iter()
        .filter(|d| d.is_error() || matches!(d, Diagnostic::FailureNotAbsorbing { .. }))
        .map(|d| d.to_string())
        .collect();
    if errors.is_empty() {
        Ok(())
    } else {
        Err(Error::Model(errors.join("; ")))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::mdp::MdpBuilder;

    #[test]
    fn well_formed_model_has_empty_report() {
        let mut b = MdpBuilder::new(3);
        b.failure_state(2).transition(0, "go", &[(1, 0.9), (2, 0.1)]).transition(1, "stay", &[(1, 1.0)]);
        assert!(validate(&b.build().unwrap()).is_empty());
    }

    #[test]
    fn probability_sum_violation_is_named() {
        let mut b = MdpBuilder::new(2);
        b.transition(0, "go", &[(0, 0.5), (1, 0.4)]);
        let m = b.build_unchecked().unwrap();
        let report = validate(&m);
        assert!(report.iter().any(|d| matches!(
            d,
            Diagnostic::ProbabilitySum { state: 0, action, .. } if action == "go"
        )));
        assert!(b.build().is_err());
    }

    #[test]
    fn failure_state_must_be_absorbing() {
        let mut b = MdpBuilder::new(2);
        b.failure_state(1).transition(0, "go", &[(1, 1.0)]).transition(1, "escape", &[(0, 1.0)]);
        let report = validate(&b.build_unchecked().unwrap());
        assert_eq!(
            report,
            vec![Diagnostic::FailureNotAbsorbing { state: 1, action: "escape".into(), successor: 0 }]
        );
        assert!(b.build().is_err());
    }

    #[test]
    fn unreachable_states_are_warnings() {
        let mut b = MdpBuilder::new(3);
        b.transition(0, "go", &[(1, 1.0)]);
        let m = b.build().unwrap();
        assert_eq!(validate(&m), vec![Diagnostic::Unreachable { state: 2 }]);
    }
}
