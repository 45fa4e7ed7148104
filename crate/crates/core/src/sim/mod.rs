//! Scenario loading, the slot loop binding gNB and RIC, the built-in
//! experiments and artifact post-processing.

pub mod builtin;
pub mod engine;
pub mod report;
pub mod scenario;
pub mod tcp;

pub use builtin::{builtin, builtin_scenarios, exp1, exp2, EXP1_NAME, EXP2_NAME, EXP2_STEPS, SLICE_1, SLICE_2};
pub use engine::{ric_runtime, run, RunError, RunReport};
pub use report::{report, verify, Artifacts, ReportError, RunSummary, VerifyReport, Window};
pub use scenario::{load_scenario, Action, BlerMode, Issue, RicSettings, Scenario, ScenarioError, TimedEvent};
pub use tcp::{run_tcp, serve_ric};
