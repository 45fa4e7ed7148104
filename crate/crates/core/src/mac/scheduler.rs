//! Intra-slice tier and the per-cell scheduler state machine.

use std::collections::BTreeMap;

use super::budget::{compute_slice_budgets, fill_shared_pool, BudgetError, SliceBudget, SliceDemand, SliceState, PF_EPSILON};
use crate::model::{
    validate_cell_config, FlowKey, PduSession, RrmPolicyRatio, SliceConfig, Snssai, UeContext, Violation,
    ViolationCode,
};
use crate::phy::{LinkModel, Numerology, PhyError, TrafficProfile};

pub const DEFAULT_PF_ALPHA: f64 = 0.01;

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum SchedulerError {
    #[error("invalid cell configuration: {}", join(.0))]
    InvalidConfig(Vec<Violation>),
    #[error("unknown slice {0}")]
    UnknownSlice(Snssai),
    #[error("invalid policy: {}", join(.0))]
    InvalidPolicy(Vec<Violation>),
    #[error("unknown flow ue {} pdu {}", .0.ue_id, .0.pdu_id)]
    UnknownFlow(FlowKey),
    #[error("unknown ue {0}")]
    UnknownUe(u32),
    #[error("pf smoothing factor {0} must lie in (0, 1)")]
    InvalidAlpha(f64),
    #[error(transparent)]
    Budget(#[from] BudgetError),
    #[error(transparent)]
    Phy(#[from] PhyError),
}

fn join(v: &[Violation]) -> String {
    v.iter().map(ToString::to_string).collect::<Vec<_>>().join("; ")
}

impl SchedulerError {
    /// Violation list carried by the error, for control failure replies.
    pub fn violations(&self) -> Vec<Violation> {
        match self {
            SchedulerError::InvalidConfig(v) | SchedulerError::InvalidPolicy(v) => v.clone(),
            SchedulerError::UnknownSlice(s) => {
                vec![Violation::new(ViolationCode::UnknownSlice, format!("slice {s} not configured"))]
            }
            other => vec![Violation::new(ViolationCode::PercentOutOfRange, other.to_string())],
        }
    }
}

/// Static cell parameters the slot computation needs.
#[derive(Debug, Clone, PartialEq)]
pub struct CellParams {
    pub total_prbs: u32,
    pub slot_s: f64,
    pub pf_alpha: f64,
    pub link: LinkModel,
}

impl CellParams {
    pub fn new(numerology: Numerology, link: LinkModel, pf_alpha: f64) -> Self {
        Self { total_prbs: numerology.total_prbs(), slot_s: numerology.slot_duration_s(), pf_alpha, link }
    }

    fn rate_per_prb(&self, bytes_per_prb: u64) -> f64 {
        bytes_per_prb as f64 * 8.0 / self.slot_s
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Grant {
    pub ue_id: u32,
    pub pdu_id: u8,
    pub snssai: Snssai,
    pub prbs: u32,
    pub tb_bytes: u64,
}

impl Grant {
    pub fn key(&self) -> FlowKey {
        FlowKey { ue_id: self.ue_id, pdu_id: self.pdu_id }
    }
}

/// Per-slice bookkeeping for one slot, kept for verification.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SliceUsage {
    pub budget: SliceBudget,
    pub demand_prbs: u64,
    pub used_prbs: u32,
    pub cap_prbs: u32,
    pub guarantee_prbs: u32,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Allocation {
    pub slot_index: u64,
    pub grants: Vec<Grant>,
    pub slices: Vec<SliceUsage>,
}

impl Allocation {
    pub fn total_prbs(&self) -> u32 {
        self.grants.iter().map(|g| g.prbs).sum()
    }
}

/// Per-slice demand derived from backlogs: PRBs to drain every flow, and the
/// rate those PRBs would carry with each flow capped at the whole cell.
pub fn slice_demands(
    cell: &CellParams,
    slices: &[SliceState],
    ues: &[UeContext],
) -> Result<BTreeMap<Snssai, SliceDemand>, PhyError> {
    let mut out: BTreeMap<Snssai, SliceDemand> =
        slices.iter().map(|s| (s.snssai(), SliceDemand::default())).collect();
    for ue in ues {
        let bpp = cell.link.bytes_per_prb(ue.mcs)?;
        for f in &ue.sessions {
            if f.backlog_bytes == 0 {
                continue;
            }
            if let Some(d) = out.get_mut(&f.snssai) {
                let need = f.backlog_bytes.div_ceil(bpp);
                d.prbs += need;
                d.rate_bps += need.min(u64::from(cell.total_prbs)) as f64 * cell.rate_per_prb(bpp);
            }
        }
    }
    Ok(out)
}

struct FlowFill {
    key: FlowKey,
    snssai: Snssai,
    bpp: u64,
    rate: f64,
    backlog: u64,
    decayed_avg: f64,
    prbs: u32,
}

impl FlowFill {
    fn wants_more(&self) -> bool {
        self.backlog > u64::from(self.prbs) * self.bpp
    }

    fn tb_bytes(&self) -> u64 {
        self.backlog.min(u64::from(self.prbs) * self.bpp)
    }
}

/// Hands out `budget` PRBs inside one slice, one at a time, to the flow with
/// the highest `r_inst / projected_avg`, where the projected average already
/// counts PRBs granted earlier in this slot. Returns PRBs used.
fn fill_slice(cell: &CellParams, flows: &mut [FlowFill], budget: u32) -> u32 {
    let alpha = cell.pf_alpha;
    let mut used = 0;
    while used < budget {
        let mut best: Option<(usize, f64)> = None;
        for (i, f) in flows.iter().enumerate() {
            if !f.wants_more() {
                continue;
            }
            let projected = f.decayed_avg + alpha * f.tb_bytes() as f64 * 8.0 / cell.slot_s;
            let metric = f.rate / projected.max(PF_EPSILON);
            // flows are in (ue_id, pdu_id) order, strict > keeps the first on ties
            if best.is_none_or(|(_, m)| metric > m) {
                best = Some((i, metric));
            }
        }
        let Some((i, _)) = best else { break };
        flows[i].prbs += 1;
        used += 1;
    }
    used
}

/// Runs both tiers for one slot. Deterministic in its inputs.
pub fn schedule_slot(
    slot_index: u64,
    cell: &CellParams,
    slices: &[SliceState],
    ues: &[UeContext],
) -> Result<Allocation, SchedulerError> {
    let n = cell.total_prbs;
    let demand = slice_demands(cell, slices, ues)?;
    let mut budgets = compute_slice_budgets(slices, &demand, n)?;

    let mut fills: Vec<FlowFill> = Vec::new();
    let mut ue_order: Vec<&UeContext> = ues.iter().collect();
    ue_order.sort_by_key(|u| u.ue_id);
    for ue in ue_order {
        let bpp = cell.link.bytes_per_prb(ue.mcs)?;
        let mut sessions: Vec<&PduSession> = ue.sessions.iter().collect();
        sessions.sort_by_key(|s| s.pdu_id);
        for s in sessions {
            fills.push(FlowFill {
                key: s.key(),
                snssai: s.snssai,
                bpp,
                rate: cell.rate_per_prb(bpp),
                backlog: s.backlog_bytes,
                decayed_avg: (1.0 - cell.pf_alpha) * s.pf_avg_bps,
                prbs: 0,
            });
        }
    }
    let mut by_slice: BTreeMap<Snssai, Vec<FlowFill>> = BTreeMap::new();
    for f in fills {
        by_slice.entry(f.snssai).or_default().push(f);
    }

    let mut used = vec![0u32; budgets.len()];
    for (i, b) in budgets.iter().enumerate() {
        if let Some(flows) = by_slice.get_mut(&b.snssai) {
            used[i] = fill_slice(cell, flows, b.granted_prbs);
        }
    }

    // Give back unused non-dedicated budget and re-run the shared-pool stage once.
    let mut gave_back = vec![false; budgets.len()];
    for ((b, &u), flag) in budgets.iter_mut().zip(&used).zip(gave_back.iter_mut()) {
        let keep = u.max(b.dedicated_prbs).min(b.granted_prbs);
        if keep < b.granted_prbs {
            b.granted_prbs = keep;
            *flag = true;
        }
    }
    if gave_back.iter().any(|&g| g) {
        let pool = n.saturating_sub(budgets.iter().map(|b| b.granted_prbs).sum());
        let state_of: BTreeMap<Snssai, &SliceState> = slices.iter().map(|s| (s.snssai(), s)).collect();
        let mut want = Vec::with_capacity(budgets.len());
        let mut caps = Vec::with_capacity(budgets.len());
        let mut avgs = Vec::with_capacity(budgets.len());
        for ((b, &u), &back) in budgets.iter().zip(&used).zip(&gave_back) {
            let st = state_of[&b.snssai];
            let mut d = demand[&b.snssai];
            if back {
                // backlogs already covered
                d.prbs = d.prbs.min(u64::from(u));
            }
            want.push(d);
            caps.push(st.policy().max_prbs(n));
            avgs.push(st.pf_avg_bps);
        }
        let before: Vec<u32> = budgets.iter().map(|b| b.granted_prbs).collect();
        fill_shared_pool(&mut budgets, pool, &want, &caps, &avgs);
        for (i, b) in budgets.iter().enumerate() {
            let extra = b.granted_prbs - before[i];
            if extra > 0 {
                if let Some(flows) = by_slice.get_mut(&b.snssai) {
                    used[i] += fill_slice(cell, flows, extra);
                }
            }
        }
    }

    let mut grants = Vec::new();
    let mut usage = Vec::with_capacity(budgets.len());
    let policy_of: BTreeMap<Snssai, RrmPolicyRatio> = slices.iter().map(|s| (s.snssai(), s.policy())).collect();
    for (i, b) in budgets.iter().enumerate() {
        if let Some(flows) = by_slice.get(&b.snssai) {
            grants.extend(flows.iter().filter(|f| f.prbs > 0).map(|f| Grant {
                ue_id: f.key.ue_id,
                pdu_id: f.key.pdu_id,
                snssai: f.snssai,
                prbs: f.prbs,
                tb_bytes: f.tb_bytes(),
            }));
        }
        let p = policy_of[&b.snssai];
        usage.push(SliceUsage {
            budget: *b,
            demand_prbs: demand[&b.snssai].prbs,
            used_prbs: used[i],
            cap_prbs: p.max_prbs(n),
            guarantee_prbs: p.min_prbs(n),
        });
    }
    Ok(Allocation { slot_index, grants, slices: usage })
}

/// EWMA update of flow and slice averages from the bytes scheduled this slot.
/// Flows and slices without a grant decay toward zero.
pub fn update_pf_averages(
    allocation: &Allocation,
    ues: &mut [UeContext],
    slices: &mut [SliceState],
    alpha: f64,
    slot_s: f64,
) {
    let served: BTreeMap<FlowKey, u64> = allocation.grants.iter().map(|g| (g.key(), g.tb_bytes)).collect();
    let mut slice_served: BTreeMap<Snssai, u64> = BTreeMap::new();
    for g in &allocation.grants {
        *slice_served.entry(g.snssai).or_default() += g.tb_bytes;
    }
    for ue in ues.iter_mut() {
        for f in &mut ue.sessions {
            let bytes = served.get(&f.key()).copied().unwrap_or(0);
            f.pf_avg_bps = ewma(f.pf_avg_bps, bytes as f64 * 8.0 / slot_s, alpha);
        }
    }
    for s in slices.iter_mut() {
        let bytes = slice_served.get(&s.snssai()).copied().unwrap_or(0);
        s.pf_avg_bps = ewma(s.pf_avg_bps, bytes as f64 * 8.0 / slot_s, alpha);
    }
}

pub fn ewma(avg: f64, sample: f64, alpha: f64) -> f64 {
    (1.0 - alpha) * avg + alpha * sample
}

/// Replaces the policy of one slice. The cell-wide dedicated sum is checked
/// against the other slices' current policies; PF state is kept.
pub fn apply_rrm_policy(
    slices: &mut [SliceState],
    snssai: Snssai,
    policy: RrmPolicyRatio,
) -> Result<(), SchedulerError> {
    apply_rrm_policies(slices, &[(snssai, policy)])
}

/// Applies several policy updates atomically: either all of them take effect
/// or none does.
pub fn apply_rrm_policies(
    slices: &mut [SliceState],
    entries: &[(Snssai, RrmPolicyRatio)],
) -> Result<(), SchedulerError> {
    let mut proposed: Vec<SliceConfig> = slices.iter().map(|s| s.config).collect();
    for &(snssai, policy) in entries {
        let Some(c) = proposed.iter_mut().find(|c| c.snssai == snssai) else {
            return Err(SchedulerError::UnknownSlice(snssai));
        };
        c.policy = policy;
    }
    let violations = validate_cell_config(&proposed, &[]);
    if !violations.is_empty() {
        return Err(SchedulerError::InvalidPolicy(violations));
    }
    for (s, c) in slices.iter_mut().zip(proposed) {
        s.config = c;
    }
    Ok(())
}

/// Scheduler state of one cell: slices with their PF state and the UEs with
/// their sessions. Advanced one slot at a time by the simulation loop.
#[derive(Debug, Clone)]
pub struct MacScheduler {
    cell: CellParams,
    slices: Vec<SliceState>,
    ues: Vec<UeContext>,
}

impl MacScheduler {
    pub fn new(
        numerology: Numerology,
        slices: Vec<SliceConfig>,
        ues: Vec<UeContext>,
        link: LinkModel,
        pf_alpha: f64,
    ) -> Result<Self, SchedulerError> {
        if !(pf_alpha > 0.0 && pf_alpha < 1.0) {
            return Err(SchedulerError::InvalidAlpha(pf_alpha));
        }
        let violations = validate_cell_config(&slices, &ues);
        if !violations.is_empty() {
            return Err(SchedulerError::InvalidConfig(violations));
        }
        let mut slices: Vec<SliceState> = slices.into_iter().map(SliceState::new).collect();
        slices.sort_by_key(|s| s.snssai());
        let mut ues = ues;
        ues.sort_by_key(|u| u.ue_id);
        for ue in &mut ues {
            ue.sessions.sort_by_key(|s| s.pdu_id);
        }
        Ok(Self { cell: CellParams::new(numerology, link, pf_alpha), slices, ues })
    }

    pub fn cell(&self) -> &CellParams {
        &self.cell
    }

    pub fn total_prbs(&self) -> u32 {
        self.cell.total_prbs
    }

    pub fn slices(&self) -> &[SliceState] {
        &self.slices
    }

    pub fn slice_configs(&self) -> Vec<SliceConfig> {
        self.slices.iter().map(|s| s.config).collect()
    }

    pub fn ues(&self) -> &[UeContext] {
        &self.ues
    }

    pub fn ues_mut(&mut self) -> &mut [UeContext] {
        &mut self.ues
    }

    pub fn flow_mut(&mut self, key: FlowKey) -> Option<&mut PduSession> {
        self.ues
            .iter_mut()
            .find(|u| u.ue_id == key.ue_id)
            .and_then(|u| u.sessions.iter_mut().find(|s| s.pdu_id == key.pdu_id))
    }

    pub fn schedule(&self, slot_index: u64) -> Result<Allocation, SchedulerError> {
        schedule_slot(slot_index, &self.cell, &self.slices, &self.ues)
    }

    pub fn update_pf(&mut self, allocation: &Allocation) {
        update_pf_averages(allocation, &mut self.ues, &mut self.slices, self.cell.pf_alpha, self.cell.slot_s);
    }

    pub fn apply_rrm_policy(&mut self, snssai: Snssai, policy: RrmPolicyRatio) -> Result<(), SchedulerError> {
        apply_rrm_policy(&mut self.slices, snssai, policy)
    }

    pub fn apply_rrm_policies(&mut self, entries: &[(Snssai, RrmPolicyRatio)]) -> Result<(), SchedulerError> {
        apply_rrm_policies(&mut self.slices, entries)
    }

    /// Adds a PDU session after checking the resulting cell configuration.
    pub fn establish_pdu(
        &mut self,
        ue_id: u32,
        pdu_id: u8,
        snssai: Snssai,
        traffic: TrafficProfile,
    ) -> Result<(), SchedulerError> {
        traffic.validate()?;
        let idx = self.ues.iter().position(|u| u.ue_id == ue_id).ok_or(SchedulerError::UnknownUe(ue_id))?;
        let mut candidate = self.ues.clone();
        candidate[idx].sessions.push(PduSession::new(ue_id, pdu_id, snssai, traffic));
        let violations = validate_cell_config(&self.slice_configs(), &candidate);
        if !violations.is_empty() {
            return Err(SchedulerError::InvalidConfig(violations));
        }
        let ue = &mut self.ues[idx];
        ue.sessions.push(PduSession::new(ue_id, pdu_id, snssai, traffic));
        ue.sessions.sort_by_key(|s| s.pdu_id);
        Ok(())
    }

    pub fn release_pdu(&mut self, ue_id: u32, pdu_id: u8) -> Result<PduSession, SchedulerError> {
        let key = FlowKey { ue_id, pdu_id };
        let ue = self.ues.iter_mut().find(|u| u.ue_id == ue_id).ok_or(SchedulerError::UnknownFlow(key))?;
        let pos = ue.sessions.iter().position(|s| s.pdu_id == pdu_id).ok_or(SchedulerError::UnknownFlow(key))?;
        Ok(ue.sessions.remove(pos))
    }

    pub fn set_traffic(&mut self, ue_id: u32, pdu_id: u8, traffic: TrafficProfile) -> Result<(), SchedulerError> {
        traffic.validate()?;
        let key = FlowKey { ue_id, pdu_id };
        let flow = self.flow_mut(key).ok_or(SchedulerError::UnknownFlow(key))?;
        flow.traffic = traffic;
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn cell(prbs: u32) -> CellParams {
        CellParams::new(Numerology::new(30, prbs).unwrap(), LinkModel::default(), DEFAULT_PF_ALPHA)
    }

    fn slice(sst: u8, ded: u8, min: u8, max: u8) -> SliceConfig {
        SliceConfig::new(Snssai::sst_only(sst), RrmPolicyRatio::new(ded, min, max))
    }

    fn full_buffer_ue(ue_id: u32, sst: u8, mcs: u8, pin: u64) -> UeContext {
        let mut ue = UeContext::new(ue_id, 100 + ue_id as u16, mcs, 0.0).with_session(
            1,
            Snssai::sst_only(sst),
            TrafficProfile::full_buffer(),
        );
        ue.sessions[0].backlog_bytes = pin;
        ue
    }

    #[test]
    fn single_flow_takes_whole_cell() {
        let c = cell(106);
        let slices = vec![SliceState::new(slice(1, 0, 0, 100))];
        let ues = vec![full_buffer_ue(1, 1, 20, 1_000_000)];
        let a = schedule_slot(0, &c, &slices, &ues).unwrap();
        assert_eq!(a.grants.len(), 1);
        assert_eq!(a.grants[0].prbs, 106);
        let bpp = c.link.bytes_per_prb(20).unwrap();
        assert_eq!(a.grants[0].tb_bytes, 106 * bpp);
    }

    #[test]
    fn small_backlog_limits_grant() {
        let c = cell(106);
        let slices = vec![SliceState::new(slice(1, 0, 0, 100))];
        let mut ues = vec![full_buffer_ue(1, 1, 20, 0)];
        let bpp = c.link.bytes_per_prb(20).unwrap();
        ues[0].sessions[0].backlog_bytes = 2 * bpp + 1;
        let a = schedule_slot(0, &c, &slices, &ues).unwrap();
        assert_eq!(a.grants[0].prbs, 3);
        assert_eq!(a.grants[0].tb_bytes, 2 * bpp + 1);
    }

    #[test]
    fn idle_cell_has_no_grants() {
        let c = cell(50);
        let slices = vec![SliceState::new(slice(1, 20, 20, 100))];
        let a = schedule_slot(0, &c, &slices, &[]).unwrap();
        assert!(a.grants.is_empty());
        assert_eq!(a.slices[0].budget.granted_prbs, 10);
        assert_eq!(a.slices[0].used_prbs, 0);
    }

    #[test]
    fn min_guarantee_each_slot() {
        let c = cell(100);
        let mut slices = vec![SliceState::new(slice(1, 0, 0, 100)), SliceState::new(slice(2, 0, 40, 100))];
        let mut ues = vec![full_buffer_ue(1, 1, 20, 1_000_000), full_buffer_ue(2, 1, 20, 1_000_000), full_buffer_ue(3, 2, 20, 1_000_000)];
        for slot in 0..2000 {
            let a = schedule_slot(slot, &c, &slices, &ues).unwrap();
            assert!(a.slices[1].used_prbs >= 40, "slot {slot}: {:?}", a.slices[1]);
            assert!(a.total_prbs() <= 100);
            update_pf_averages(&a, &mut ues, &mut slices, c.pf_alpha, c.slot_s);
        }
    }

    #[test]
    fn pf_splits_identical_flows_evenly() {
        let c = cell(20);
        let mut slices = vec![SliceState::new(slice(1, 0, 0, 100))];
        let mut ues = vec![full_buffer_ue(1, 1, 15, 1_000_000), full_buffer_ue(2, 1, 15, 1_000_000)];
        let mut total = [0u64; 2];
        for slot in 0..1000 {
            let a = schedule_slot(slot, &c, &slices, &ues).unwrap();
            for g in &a.grants {
                total[(g.ue_id - 1) as usize] += u64::from(g.prbs);
            }
            update_pf_averages(&a, &mut ues, &mut slices, c.pf_alpha, c.slot_s);
        }
        for t in total {
            assert!((t as f64 - 10_000.0).abs() <= 200.0, "{total:?}");
        }
    }

    #[test]
    fn ewma_examples() {
        assert_eq!(ewma(0.0, 1e6, 0.01), 1e4);
        assert!((ewma(1e6, 0.0, 0.01) - 9.9e5).abs() < 1e-6);
        let mut avg = 0.0;
        for _ in 0..5000 {
            avg = ewma(avg, 3e6, 0.01);
        }
        assert!((avg - 3e6).abs() < 1.0);
    }

    #[test]
    fn update_decays_unscheduled_flows() {
        let mut ues = vec![full_buffer_ue(1, 1, 10, 0)];
        ues[0].sessions[0].pf_avg_bps = 1e6;
        let mut slices = vec![SliceState::new(slice(1, 0, 0, 100))];
        slices[0].pf_avg_bps = 1e6;
        let a = Allocation { slot_index: 0, grants: vec![], slices: vec![] };
        update_pf_averages(&a, &mut ues, &mut slices, 0.01, 0.0005);
        assert!((ues[0].sessions[0].pf_avg_bps - 9.9e5).abs() < 1e-6);
        assert!((slices[0].pf_avg_bps - 9.9e5).abs() < 1e-6);
    }

    #[test]
    fn update_from_grant() {
        let mut ues = vec![full_buffer_ue(1, 1, 10, 0)];
        let mut slices = vec![SliceState::new(slice(1, 0, 0, 100))];
        // 62.5 bytes in 0.5 ms = 1 Mbps; use 125 bytes in 1 ms
        let g = Grant { ue_id: 1, pdu_id: 1, snssai: Snssai::sst_only(1), prbs: 1, tb_bytes: 125 };
        let a = Allocation { slot_index: 0, grants: vec![g], slices: vec![] };
        update_pf_averages(&a, &mut ues, &mut slices, 0.01, 0.001);
        assert!((ues[0].sessions[0].pf_avg_bps - 1e4).abs() < 1e-9);
        assert!((slices[0].pf_avg_bps - 1e4).abs() < 1e-9);
    }

    #[test]
    fn policy_updates() {
        let mut slices = vec![SliceState::new(slice(1, 0, 0, 90)), SliceState::new(slice(2, 0, 0, 10))];
        slices[1].pf_avg_bps = 5.0;
        apply_rrm_policy(&mut slices, Snssai::sst_only(2), RrmPolicyRatio::new(0, 0, 90)).unwrap();
        assert_eq!(slices[1].policy().max_pct, 90);
        assert_eq!(slices[1].pf_avg_bps, 5.0);

        let before = slices.clone();
        apply_rrm_policy(&mut slices, Snssai::sst_only(2), RrmPolicyRatio::new(0, 0, 90)).unwrap();
        assert_eq!(before, slices);

        let err = apply_rrm_policy(&mut slices, Snssai::sst_only(1), RrmPolicyRatio::new(0, 50, 40)).unwrap_err();
        assert!(matches!(&err, SchedulerError::InvalidPolicy(v) if v[0].code == ViolationCode::MinExceedsMax));
        assert_eq!(before, slices);

        let err = apply_rrm_policy(&mut slices, Snssai::sst_only(7), RrmPolicyRatio::unconstrained()).unwrap_err();
        assert_eq!(err, SchedulerError::UnknownSlice(Snssai::sst_only(7)));
    }

    #[test]
    fn policy_updates_are_atomic() {
        let mut slices = vec![SliceState::new(slice(1, 0, 0, 100)), SliceState::new(slice(2, 0, 0, 100))];
        let before = slices.clone();
        let err = apply_rrm_policies(
            &mut slices,
            &[(Snssai::sst_only(1), RrmPolicyRatio::new(60, 60, 100)), (Snssai::sst_only(2), RrmPolicyRatio::new(60, 60, 100))],
        )
        .unwrap_err();
        assert!(matches!(&err, SchedulerError::InvalidPolicy(v) if v[0].code == ViolationCode::DedicatedSumExceeds100));
        assert_eq!(before, slices);
    }

    #[test]
    fn new_budget_applies_next_slot() {
        let c = cell(106);
        let mut slices = vec![SliceState::new(slice(1, 0, 0, 90)), SliceState::new(slice(2, 0, 0, 10))];
        let ues = vec![full_buffer_ue(1, 1, 20, 1_000_000), full_buffer_ue(2, 2, 20, 1_000_000)];
        let a = schedule_slot(0, &c, &slices, &ues).unwrap();
        assert_eq!((a.slices[0].used_prbs, a.slices[1].used_prbs), (95, 10));
        apply_rrm_policies(
            &mut slices,
            &[(Snssai::sst_only(1), RrmPolicyRatio::new(0, 0, 10)), (Snssai::sst_only(2), RrmPolicyRatio::new(0, 0, 90))],
        )
        .unwrap();
        let a = schedule_slot(1, &c, &slices, &ues).unwrap();
        assert_eq!((a.slices[0].used_prbs, a.slices[1].used_prbs), (10, 95));
    }

    #[test]
    fn constructor_agrees_with_validation() {
        let bad = vec![slice(1, 50, 40, 100)];
        let err = MacScheduler::new(Numerology::mhz40(), bad, vec![], LinkModel::default(), 0.01).unwrap_err();
        assert!(matches!(err, SchedulerError::InvalidConfig(_)));
        assert!(matches!(
            MacScheduler::new(Numerology::mhz40(), vec![slice(1, 0, 0, 100)], vec![], LinkModel::default(), 1.0),
            Err(SchedulerError::InvalidAlpha(_))
        ));
    }

    #[test]
    fn session_lifecycle() {
        let mut m = MacScheduler::new(
            Numerology::mhz40(),
            vec![slice(1, 0, 0, 100), slice(2, 0, 0, 100)],
            vec![UeContext::new(1, 10, 10, 0.0)],
            LinkModel::default(),
            0.01,
        )
        .unwrap();
        m.establish_pdu(1, 1, Snssai::sst_only(1), TrafficProfile::full_buffer()).unwrap();
        m.establish_pdu(1, 2, Snssai::sst_only(2), TrafficProfile::full_buffer()).unwrap();
        assert!(matches!(
            m.establish_pdu(1, 2, Snssai::sst_only(1), TrafficProfile::off()),
            Err(SchedulerError::InvalidConfig(_))
        ));
        assert!(matches!(
            m.establish_pdu(1, 3, Snssai::sst_only(9), TrafficProfile::off()),
            Err(SchedulerError::InvalidConfig(_))
        ));
        m.set_traffic(1, 2, TrafficProfile::off()).unwrap();
        let released = m.release_pdu(1, 1).unwrap();
        assert_eq!(released.pdu_id, 1);
        assert!(m.release_pdu(1, 1).is_err());
        assert_eq!(m.ues()[0].sessions.len(), 1);
    }
}
