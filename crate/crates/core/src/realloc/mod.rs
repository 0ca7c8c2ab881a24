//! Joint execution of per-robot policy segments as a synchronised Markov
//! chain, detection of reallocation states, and the anytime reallocation
//! loop that grafts the continuation of new STAPU solves onto the chain.

mod anytime;
mod joint;

pub use anytime::{run_stapu_with_realloc, run_with, Budget, GuaranteeReport, IterationLog, Timing};
pub use joint::{
    find_realloc_points, graft, solve_realloc, synchronize, Activity, JointEdge, JointNode, JointPolicy, JointState,
    NodeKind, Outcome, PlanInfo, ReallocPoint,
};
