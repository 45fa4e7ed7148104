//! RAN slicing xApp: every control period, the slice with the lowest recent
//! throughput gets the large max ratio and the one with the highest gets the
//! small one.

use std::collections::BTreeMap;

use crate::e2::RicControlBody;
use crate::model::{RrmPolicyRatio, Snssai};

use super::store::{KpmStore, StoreError};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SlicingXappConfig {
    pub control_period_s: f64,
    pub window_s: f64,
    pub low_max_pct: u8,
    pub high_max_pct: u8,
    pub enabled: bool,
}

impl Default for SlicingXappConfig {
    fn default() -> Self {
        Self { control_period_s: 10.0, window_s: 5.0, low_max_pct: 90, high_max_pct: 10, enabled: true }
    }
}

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum XappError {
    #[error("slicing xApp needs at least 2 slices, have {0}")]
    NotEnoughSlices(usize),
    #[error("invalid xApp config: {0}")]
    InvalidConfig(String),
    #[error(transparent)]
    Store(#[from] StoreError),
}

impl SlicingXappConfig {
    pub fn control_period_ms(&self) -> u64 {
        (self.control_period_s * 1000.0).round() as u64
    }

    pub fn validate(&self) -> Result<(), XappError> {
        let bad = |m: String| Err(XappError::InvalidConfig(m));
        if !(self.control_period_s.is_finite() && self.control_period_ms() >= 1) {
            return bad(format!("control_period_s must be at least 1 ms, got {}", self.control_period_s));
        }
        if !(self.window_s > 0.0 && self.window_s <= self.control_period_s) {
            return bad(format!("window_s must be in (0, control_period_s], got {}", self.window_s));
        }
        if self.low_max_pct > 100 || self.high_max_pct > 100 {
            return bad("max percentages must be within 0..=100".into());
        }
        Ok(())
    }

    /// Both max values must stay at or above every min the slices can have,
    /// so the xApp never produces a policy the gNB rejects.
    pub fn check_against_min(&self, snssai: Snssai, min_pct: u8) -> Result<(), XappError> {
        let floor = self.low_max_pct.min(self.high_max_pct);
        if floor < min_pct {
            return Err(XappError::InvalidConfig(format!(
                "xApp max {floor}% is below slice {snssai} min {min_pct}%"
            )));
        }
        Ok(())
    }
}

/// Computes the control for one tick. Slices that never reported count as
/// zero throughput. Ties rank by ascending S-NSSAI, the first ranked being
/// the "lowest". Slices between the two extremes are left out of the message.
pub fn slicing_xapp_tick(
    store: &KpmStore,
    slices: &BTreeMap<Snssai, RrmPolicyRatio>,
    cfg: &SlicingXappConfig,
    now_ms: u64,
    ran_node_id: &str,
) -> Result<RicControlBody, XappError> {
    if slices.len() < 2 {
        return Err(XappError::NotEnoughSlices(slices.len()));
    }
    let mut ranked = Vec::with_capacity(slices.len());
    for &s in slices.keys() {
        let avg = match store.avg_slice_throughput(s, now_ms, cfg.window_s) {
            Ok(v) => v,
            Err(StoreError::UnknownSlice(_)) => 0.0,
            Err(e) => return Err(e.into()),
        };
        ranked.push((avg, s));
    }
    ranked.sort_by(|a, b| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1)));
    let low = ranked[0].1;
    let high = ranked[ranked.len() - 1].1;
    let mut entries: Vec<(Snssai, RrmPolicyRatio)> = [(low, cfg.low_max_pct), (high, cfg.high_max_pct)]
        .into_iter()
        .map(|(s, max)| (s, RrmPolicyRatio { max_pct: max, ..slices[&s] }))
        .collect();
    entries.sort_by_key(|e| e.0);
    Ok(RicControlBody { ran_node_id: ran_node_id.to_string(), entries })
}

/// Timed changes the RIC must mirror: xApp on/off switches and policy
/// updates the gNB applies on its own. Times are the virtual instants the
/// gNB applies them, in ms.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct RicSchedule {
    pub toggles: Vec<(u64, bool)>,
    pub policies: Vec<(u64, Snssai, RrmPolicyRatio)>,
}

/// Decides, from indication timestamps alone, when the slicing xApp fires.
/// Both ends run the same plan, which is what lets a remote gNB wait for
/// exactly the controls the RIC is going to send.
#[derive(Debug, Clone)]
pub struct XappPlan {
    cfg: SlicingXappConfig,
    schedule: RicSchedule,
    applied_toggles: usize,
    applied_policies: usize,
    next_tick_ms: u64,
    slice_count: usize,
}

impl XappPlan {
    pub fn new(cfg: SlicingXappConfig, mut schedule: RicSchedule, slice_count: usize) -> Self {
        schedule.toggles.sort_by_key(|t| t.0);
        schedule.policies.sort_by_key(|p| p.0);
        let next_tick_ms = cfg.control_period_ms();
        Self { cfg, schedule, applied_toggles: 0, applied_policies: 0, next_tick_ms, slice_count }
    }

    pub fn config(&self) -> &SlicingXappConfig {
        &self.cfg
    }

    pub fn enabled(&self) -> bool {
        self.cfg.enabled
    }

    /// Advances to an indication stamped `now_ms`. Scheduled changes strictly
    /// before `now_ms` take effect first; returns the policy updates among them
    /// and whether the xApp fires at this indication.
    pub fn advance(&mut self, now_ms: u64) -> (Vec<(Snssai, RrmPolicyRatio)>, bool) {
        while let Some(&(t, on)) = self.schedule.toggles.get(self.applied_toggles) {
            if t >= now_ms {
                break;
            }
            self.cfg.enabled = on;
            self.applied_toggles += 1;
        }
        let mut updates = Vec::new();
        while let Some(&(t, s, p)) = self.schedule.policies.get(self.applied_policies) {
            if t >= now_ms {
                break;
            }
            updates.push((s, p));
            self.applied_policies += 1;
        }
        let due = now_ms >= self.next_tick_ms;
        if due {
            let period = self.cfg.control_period_ms();
            self.next_tick_ms = (now_ms / period + 1) * period;
        }
        (updates, due && self.cfg.enabled && self.slice_count >= 2)
    }
}
