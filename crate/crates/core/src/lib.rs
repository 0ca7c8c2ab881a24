//! Simultaneous task allocation and planning under uncertainty for teams of
//! robots modelled as MDPs, with missions given as co-safe task formulas and
//! an optional safety formula.
//!
//! The pipeline is: compile the mission ([`logic`]), build each robot's local
//! product ([`product`]), join the products into a sequential team model with
//! switch transitions and solve it ([`team`]), then synchronise the robots'
//! policies into a joint chain and reallocate tasks at failure states in
//! decreasing order of probability ([`realloc`]). [`baseline`] solves the full
//! multi-agent MDP for comparison and [`workbench`] holds map generation,
//! simulation and benchmarking.

pub mod baseline;
pub mod error;
pub mod logic;
pub mod mdp;
pub mod product;
pub mod realloc;
pub mod team;
pub mod workbench;

pub use error::{Error, Result};
