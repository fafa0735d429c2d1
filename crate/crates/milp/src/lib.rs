//! Mixed-integer linear modelling with a deterministic built-in solver.
//!
//! ```
//! use lngplan_milp::{ModelBuilder, Sense, Comparator, solve, SolveOptions};
//!
//! let mut b = ModelBuilder::new(Sense::Maximize);
//! let x = b.binary("x").unwrap();
//! let y = b.binary("y").unwrap();
//! b.constraint("cap", [(x, 5.0), (y, 4.0)], Comparator::Le, 8.0);
//! b.objective(x, 6.0);
//! b.objective(y, 10.0);
//! let sol = solve(&b.finish(), &SolveOptions::default());
//! assert_eq!(sol.objective, 10.0);
//! ```

mod external;
mod lp_format;
mod model;
mod solve;

pub use external::{assignment_from_names, parse_solution_file, ExternalSolver};
pub use lp_format::{export_lp, lp_names, parse_lp};
pub use model::{
    Comparator, Constraint, ConstraintSpec, MilpModel, ModelBuilder, ModelSpec, Sense, VarId,
    VarKind, VarSpec, Variable,
};
pub use solve::{solve, MilpSolution, SolveOptions, SolveStatus};

#[derive(Debug, thiserror::Error)]
pub enum MilpError {
    #[error("duplicate variable `{0}`")]
    DuplicateVariable(String),
    #[error("unknown variable `{0}`")]
    UnknownVariable(String),
    #[error("variable `{name}` has invalid bounds [{lower}, {upper}]")]
    InvalidBounds { name: String, lower: f64, upper: f64 },
    #[error("LP parse error at line {line}: {message}")]
    Parse { line: usize, message: String },
    #[error("external solver: {0}")]
    External(String),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}
