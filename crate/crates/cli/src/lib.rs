//! Problem files, reports and the `gtmp` command line.

pub mod cli;
pub mod problem;
pub mod report;
pub mod run;
pub mod verify;

pub use cli::run_cli;
pub use problem::{parse_problem, Mode, Problem, ProblemError, ProblemFile};
pub use report::Report;
pub use run::run_problem;
pub use verify::{verify_report, Verification};
