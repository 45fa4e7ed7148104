//! Two-tier downlink MAC scheduler: inter-slice PRB budgeting from RRM
//! policies, then proportional fair across the flows of each slice.

pub mod budget;
pub mod scheduler;

pub use budget::{compute_slice_budgets, BudgetError, SliceBudget, SliceDemand, SliceState, PF_EPSILON};
pub use scheduler::{
    apply_rrm_policies, apply_rrm_policy, schedule_slot, slice_demands, update_pf_averages, Allocation, CellParams,
    Grant, MacScheduler, SchedulerError, SliceUsage, DEFAULT_PF_ALPHA,
};
