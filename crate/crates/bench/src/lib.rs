//! Benchmark harness for the IMEX-DG solver: test cases, runs, profiles and
//! scaling sweeps.

pub mod case;
pub mod output;
pub mod report;
pub mod run;

pub use case::{BackgroundState, Case, RunConfig};
pub use run::{run_case, simulate, RunOutcome, Summary};
