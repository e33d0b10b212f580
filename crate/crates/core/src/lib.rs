//! Random walks on directed covers of base graphs.
//!
//! The cover of a base graph `G` rooted at `i0` is the tree of all finite
//! directed paths of `G` starting at `i0`. A nearest-neighbour walk on the
//! cover steps back towards the root with probability `p(-i)` and forward to
//! a child labelled `j` with probability `p(i,j)`, where `i` is the label of
//! the current vertex. This crate
//!
//! * builds base graphs from JSON specs or named generators ([`graph`]),
//! * estimates the spectral quantities governing recurrence ([`spectral`]),
//! * simulates the walk lazily on the cover ([`walk`]),
//! * simulates the coupled multi-type branching process ([`branching`]),
//! * solves the first-passage generating functions and derives speed,
//!   entropy and dimension of the harmonic measure ([`generating`]).

pub mod branching;
pub mod generating;
pub mod graph;
pub mod rng;
pub mod spectral;
pub mod walk;

pub use graph::{validate_spec, BaseGraph, GeneratorSpec, GraphError, GraphSpec, VertexId};

/// Version string embedded in every report.
pub const VERSION: &str = env!("CARGO_PKG_VERSION");
