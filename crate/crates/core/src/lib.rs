//! Randomized Frank-Wolfe for l1-constrained least squares, with
//! coordinate-descent baselines, a regularization-path driver and a dense
//! reference solver.
//!
//! The constrained problem is `min 1/2 ||X a - y||^2 s.t. ||a||_1 <= delta`;
//! the penalized one is `min 1/2 ||X a - y||^2 + lambda ||a||_1`.

// `!(x > 0.0)` is how NaN gets rejected along with out-of-range values.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod cd;
pub mod dataset;
pub mod error;
pub mod fw;
pub mod oracle;
pub mod path;
pub mod problem;
pub mod report;
pub mod sampling;
pub mod sparse;
pub mod verify;

pub use cd::{solve_penalized, CdOptions, CdOrder, CdProblem};
pub use dataset::{Dataset, StandardizeMode, SyntheticSpec};
pub use error::{Error, Result};
pub use fw::{FwOptions, FwProblem, FwRun, StopRule, TraceLevel, TraceRow};
pub use path::{run_path, GridSpec, PathOptions, PathResult, SolverKind};
pub use problem::{LassoData, Solution, StopReason};
pub use sampling::{SamplingMode, SamplingPlan};
pub use sparse::{OpCounter, SparseColumnMatrix};

/// Seed used whenever none is given, so default runs are reproducible.
pub const DEFAULT_SEED: u64 = 20_150_707;
