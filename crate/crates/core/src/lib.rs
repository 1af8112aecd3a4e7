//! Descent methods for vector optimization where the objectives are ordered by
//! a polyhedral cone `K = {y : A y >= 0}`.
//!
//! * [`cone`]: the cone, its partial order and transform-matrix utilities.
//! * [`problems`]: the benchmark objectives with analytic Jacobians.
//! * [`subproblem`]: minimum-norm direction subproblems.
//! * [`stepsize`]: Barzilai-Borwein scalars and vector line searches.
//! * [`solver`]: the iteration drivers and their traces.
//! * [`analysis`]: condition numbers, rate and merit-function checks.
//! * [`bench`]: the seeded benchmark harness behind the `vopt` binary.

pub mod analysis;
pub mod bench;
pub mod cone;
pub mod error;
pub mod problems;
pub mod solver;
pub mod stepsize;
pub mod subproblem;

pub use cone::PolyhedralCone;
pub use error::{Error, Result};
pub use problems::{StartPair, VectorProblem};
pub use solver::{run, Algorithm, SolveTrace, SolverConfig, Termination};
