//! Learning a bound predicate from labelled search states.

pub mod lp;
pub mod milp;
pub mod model;
mod simplex;
pub mod solve;
pub mod terms;

pub use lp::{export_lp, read_lp, LpObjective, LpSummary};
pub use milp::{encode_milp, encode_points, MilpProblem, DEFAULT_BIG_M, DEFAULT_EPSILON, WEIGHT_BOUND};
pub use model::{load_model, model_bounds, save_model, ConstraintModel, Evaluation, ModelMeta};
pub use solve::{solve, solve_with, CoverageReport, SolveOptions};
pub use terms::{weighted_sum, Term, TermSpec};
