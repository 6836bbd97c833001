//! An exact agenda-based A* parsing engine that searches the space of whole
//! subtrees. Rule productions are scored by a supertag-factored local model
//! plus a non-positive recursive neural global score, so the local model's
//! outside heuristic stays admissible and the first complete parse popped is
//! the argmax. Training minimizes agenda violations so search stays both
//! correct and fast.

pub mod error;
pub mod global_model;
pub mod grammar;
pub mod hypergraph;
pub mod local_model;

pub use error::{Error, Result};
