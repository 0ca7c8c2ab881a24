//! LTL front end: parsing, normalization, classification and compilation of
//! safe and co-safe formulas into deterministic finite automata.

mod dfa;
mod formula;
mod mission;
mod parser;

pub use dfa::{canonical, compile, compile_as, progress, Dfa, DfaEdge, DfaJson, MAX_DFA_ATOMS};
pub use formula::{classify, to_pnf, Formula, Fragment};
pub use mission::{Mission, MissionAutomata, MissionJson};
pub use parser::parse;
