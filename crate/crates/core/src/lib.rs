//! Deterministic CONGEST simulator and a memory-bounded distributed
//! minimum spanning tree / forest and partwise aggregation algorithm.

pub mod cli;
pub mod cycle;
pub mod engine;
pub mod error;
pub mod graph;
pub mod phase1;
pub mod phase2;
pub mod pwa;
pub mod routing;
pub mod slots;
pub mod spanning;
pub mod state;

pub use error::Error;
