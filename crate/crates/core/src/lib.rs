//! Timed Transition Models: parsing, flattening, state-space exploration,
//! LTL model checking under fairness, and simulation.

pub mod checker;
pub mod elaborator;
pub mod lts;
pub mod simulator;
pub mod syntax;
