//! Placement and routing of service function chains.
//!
//! The crate holds the network model, a constraint validator, an exact
//! search for the single-flow and global reallocation problems, the greedy
//! allocators, a scenario generator and an event-driven controller loop.

pub mod exact;
pub mod formulation;
pub mod graph;
pub mod heuristics;
pub mod io;
pub mod model;
pub mod orchestrator;
pub mod trafficgen;
