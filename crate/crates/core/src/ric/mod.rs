//! Near-RT RIC: KPM store, the slicing xApp and the runtime that hosts both.

pub mod runtime;
pub mod store;
pub mod xapp;

pub use runtime::{ControlLog, ControlLogRow, LoggedOutcome, RicRuntime, CONTROL_LOG_HEADER};
pub use store::{KpmStore, SeriesKey, StoreError, DEFAULT_RETENTION_S};
pub use xapp::{slicing_xapp_tick, RicSchedule, SlicingXappConfig, XappError, XappPlan};
