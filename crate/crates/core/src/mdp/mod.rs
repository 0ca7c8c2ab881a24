//! Explicit-state MDPs, maximal reachability by value iteration, nested
//! value iteration for costs, and model diagnostics.

mod io;
mod model;
mod nested;
mod solve;
mod validate;

pub use io::{ModelJson, OutcomeJson, TransJson};
pub use model::{Choice, Mdp, MdpBuilder, PROB_SUM_TOLERANCE};
pub use nested::{nested_vi, nested_vi_with, NestedSolution};
pub use solve::{
    max_reach, max_reach_with, Policy, ReachSolution, SolverOptions, StateSet, ValueVector, DEFAULT_EPSILON,
    MAX_ITERATIONS, POLICY_TOLERANCE,
};
pub use validate::{validate, Diagnostic};
