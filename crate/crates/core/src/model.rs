//! Domain types shared by the scheduler, the E2 codec, the RIC and the
//! simulation harness: slice identities, RRM policies, UEs, PDU sessions and
//! telemetry records.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;

use crate::phy::{TrafficProfile, MAX_MCS};

/// Largest value of the 24-bit slice differentiator.
pub const SD_MAX: u32 = 0x00FF_FFFF;

/// A UE may be subscribed to at most this many distinct slices.
pub const MAX_SLICES_PER_UE: usize = 8;

/// Slice identity: an 8-bit slice/service type plus an optional 24-bit
/// slice differentiator.
///
/// Ordering is `(sst, sd)` with an absent SD sorting before any present SD.
/// This is the tie-break order used everywhere in the scheduler and the xApps.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct Snssai {
    sst: u8,
    sd: Option<u32>,
}

impl Snssai {
    pub const fn new(sst: u8, sd: Option<u32>) -> Result<Self, InvalidSnssai> {
        match sd {
            Some(v) if v > SD_MAX => Err(InvalidSnssai(v)),
            _ => Ok(Self { sst, sd }),
        }
    }

    /// Slice without a differentiator.
    pub const fn sst_only(sst: u8) -> Self {
        Self { sst, sd: None }
    }

    pub fn sst(&self) -> u8 {
        self.sst
    }

    pub fn sd(&self) -> Option<u32> {
        self.sd
    }
}

impl fmt::Display for Snssai {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self.sd {
            Some(sd) => write!(f, "{}:{}", self.sst, sd),
            None => write!(f, "{}", self.sst),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, thiserror::Error)]
#[error("slice differentiator {0} does not fit in 24 bits")]
pub struct InvalidSnssai(pub u32);

/// Dedicated / minimum / maximum PRB percentages of one slice.
///
/// Fields are public so that invalid policies can be represented and reported;
/// [`RrmPolicyRatio::violations`] checks `0 <= ded <= min <= max <= 100`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct RrmPolicyRatio {
    pub dedicated_pct: u8,
    pub min_pct: u8,
    pub max_pct: u8,
}

impl RrmPolicyRatio {
    pub const fn new(dedicated_pct: u8, min_pct: u8, max_pct: u8) -> Self {
        Self { dedicated_pct, min_pct, max_pct }
    }

    /// No reservation, no guarantee, no cap.
    pub const fn unconstrained() -> Self {
        Self::new(0, 0, 100)
    }

    /// Ordering violations of this policy, attributed to `snssai`.
    pub fn violations(&self, snssai: Snssai) -> Vec<Violation> {
        let mut out = Vec::new();
        if self.dedicated_pct > 100 || self.min_pct > 100 || self.max_pct > 100 {
            out.push(Violation::new(
                ViolationCode::PercentOutOfRange,
                format!("slice {snssai}: ratios must be within 0..=100"),
            ));
        }
        if self.dedicated_pct > self.min_pct {
            out.push(Violation::new(
                ViolationCode::DedicatedExceedsMin,
                format!(
                    "slice {snssai}: dedicated {} > min {}",
                    self.dedicated_pct, self.min_pct
                ),
            ));
        }
        if self.min_pct > self.max_pct {
            out.push(Violation::new(
                ViolationCode::MinExceedsMax,
                format!("slice {snssai}: min {} > max {}", self.min_pct, self.max_pct),
            ));
        }
        out
    }

    pub fn is_valid(&self) -> bool {
        self.violations(Snssai::sst_only(0)).is_empty()
    }

    /// `floor(pct / 100 * total)` in exact integer arithmetic.
    pub fn prbs_for(pct: u8, total_prbs: u32) -> u32 {
        (u64::from(pct) * u64::from(total_prbs) / 100) as u32
    }

    pub fn dedicated_prbs(&self, total_prbs: u32) -> u32 {
        Self::prbs_for(self.dedicated_pct, total_prbs)
    }

    pub fn min_prbs(&self, total_prbs: u32) -> u32 {
        Self::prbs_for(self.min_pct, total_prbs)
    }

    pub fn max_prbs(&self, total_prbs: u32) -> u32 {
        Self::prbs_for(self.max_pct, total_prbs)
    }
}

impl Default for RrmPolicyRatio {
    fn default() -> Self {
        Self::unconstrained()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct SliceConfig {
    pub snssai: Snssai,
    pub policy: RrmPolicyRatio,
}

impl SliceConfig {
    pub fn new(snssai: Snssai, policy: RrmPolicyRatio) -> Self {
        Self { snssai, policy }
    }
}

/// One PDU session of a UE: the per-slice traffic endpoint the scheduler
/// serves.
#[derive(Debug, Clone, PartialEq)]
pub struct PduSession {
    pub ue_id: u32,
    pub pdu_id: u8,
    pub snssai: Snssai,
    pub traffic: TrafficProfile,
    pub backlog_bytes: u64,
    /// EWMA of the served rate, bits per second.
    pub pf_avg_bps: f64,
    /// Fractional bytes carried between slots by constant-bit-rate sources.
    pub(crate) cbr_credit: f64,
}

impl PduSession {
    pub fn new(ue_id: u32, pdu_id: u8, snssai: Snssai, traffic: TrafficProfile) -> Self {
        Self {
            ue_id,
            pdu_id,
            snssai,
            traffic,
            backlog_bytes: 0,
            pf_avg_bps: 0.0,
            cbr_credit: 0.0,
        }
    }

    pub fn key(&self) -> FlowKey {
        FlowKey { ue_id: self.ue_id, pdu_id: self.pdu_id }
    }
}

/// `(ue_id, pdu_id)`, unique per cell. Ordered for tie-breaking.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct FlowKey {
    pub ue_id: u32,
    pub pdu_id: u8,
}

#[derive(Debug, Clone, PartialEq)]
pub struct UeContext {
    pub ue_id: u32,
    pub rnti: u16,
    pub mcs: u8,
    pub target_bler: f64,
    pub sessions: Vec<PduSession>,
}

impl UeContext {
    pub fn new(ue_id: u32, rnti: u16, mcs: u8, target_bler: f64) -> Self {
        Self { ue_id, rnti, mcs, target_bler, sessions: Vec::new() }
    }

    pub fn with_session(mut self, pdu_id: u8, snssai: Snssai, traffic: TrafficProfile) -> Self {
        self.sessions.push(PduSession::new(self.ue_id, pdu_id, snssai, traffic));
        self
    }

    pub fn distinct_slices(&self) -> BTreeSet<Snssai> {
        self.sessions.iter().map(|s| s.snssai).collect()
    }
}

/// Per-flow telemetry for one reporting period.
#[derive(Debug, Clone, PartialEq)]
pub struct KpmRecord {
    pub timestamp_ms: u64,
    pub rnti: u16,
    pub snssai: Snssai,
    pub pdu_id: u8,
    pub mcs: u8,
    pub bler: f64,
    pub dl_thp_bps: f64,
    pub dl_prbs: u64,
}

/// Machine-readable reason a configuration or policy was rejected.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum ViolationCode {
    DuplicateSnssai,
    PercentOutOfRange,
    DedicatedExceedsMin,
    MinExceedsMax,
    DedicatedSumExceeds100,
    TooManySlicesPerUe,
    DuplicateRnti,
    DuplicateUeId,
    DuplicatePduSession,
    InvalidPduId,
    InvalidRnti,
    InvalidMcs,
    InvalidBler,
    UnknownSlice,
    SessionUeMismatch,
}

impl ViolationCode {
    pub const ALL: [ViolationCode; 15] = [
        ViolationCode::DuplicateSnssai,
        ViolationCode::PercentOutOfRange,
        ViolationCode::DedicatedExceedsMin,
        ViolationCode::MinExceedsMax,
        ViolationCode::DedicatedSumExceeds100,
        ViolationCode::TooManySlicesPerUe,
        ViolationCode::DuplicateRnti,
        ViolationCode::DuplicateUeId,
        ViolationCode::DuplicatePduSession,
        ViolationCode::InvalidPduId,
        ViolationCode::InvalidRnti,
        ViolationCode::InvalidMcs,
        ViolationCode::InvalidBler,
        ViolationCode::UnknownSlice,
        ViolationCode::SessionUeMismatch,
    ];

    pub fn as_str(&self) -> &'static str {
        match self {
            ViolationCode::DuplicateSnssai => "DuplicateSnssai",
            ViolationCode::PercentOutOfRange => "PercentOutOfRange",
            ViolationCode::DedicatedExceedsMin => "DedicatedExceedsMin",
            ViolationCode::MinExceedsMax => "MinExceedsMax",
            ViolationCode::DedicatedSumExceeds100 => "DedicatedSumExceeds100",
            ViolationCode::TooManySlicesPerUe => "TooManySlicesPerUe",
            ViolationCode::DuplicateRnti => "DuplicateRnti",
            ViolationCode::DuplicateUeId => "DuplicateUeId",
            ViolationCode::DuplicatePduSession => "DuplicatePduSession",
            ViolationCode::InvalidPduId => "InvalidPduId",
            ViolationCode::InvalidRnti => "InvalidRnti",
            ViolationCode::InvalidMcs => "InvalidMcs",
            ViolationCode::InvalidBler => "InvalidBler",
            ViolationCode::UnknownSlice => "UnknownSlice",
            ViolationCode::SessionUeMismatch => "SessionUeMismatch",
        }
    }

    pub fn parse(s: &str) -> Option<Self> {
        Self::ALL.into_iter().find(|c| c.as_str() == s)
    }
}

impl fmt::Display for ViolationCode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct Violation {
    pub code: ViolationCode,
    pub detail: String,
}

impl Violation {
    pub fn new(code: ViolationCode, detail: impl Into<String>) -> Self {
        Self { code, detail: detail.into() }
    }
}

impl fmt::Display for Violation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}: {}", self.code, self.detail)
    }
}

/// Checks slice and UE configuration of one cell.
///
/// Returns every violation found, sorted, so the result does not depend on the
/// order of either input list. An empty result means the configuration is
/// admissible.
pub fn validate_cell_config(slices: &[SliceConfig], ues: &[UeContext]) -> Vec<Violation> {
    let mut out = BTreeSet::new();

    let mut seen = BTreeMap::new();
    for s in slices {
        *seen.entry(s.snssai).or_insert(0usize) += 1;
        out.extend(s.policy.violations(s.snssai));
    }
    for (snssai, n) in &seen {
        if *n > 1 {
            out.insert(Violation::new(
                ViolationCode::DuplicateSnssai,
                format!("slice {snssai} declared {n} times"),
            ));
        }
    }
    let ded_sum: u32 = slices.iter().map(|s| u32::from(s.policy.dedicated_pct)).sum();
    if ded_sum > 100 {
        out.insert(Violation::new(
            ViolationCode::DedicatedSumExceeds100,
            format!("dedicated ratios sum to {ded_sum}"),
        ));
    }

    let mut rntis = BTreeMap::new();
    let mut ue_ids = BTreeMap::new();
    let mut flows = BTreeMap::new();
    for ue in ues {
        *rntis.entry(ue.rnti).or_insert(0usize) += 1;
        *ue_ids.entry(ue.ue_id).or_insert(0usize) += 1;
        if ue.rnti == 0 {
            out.insert(Violation::new(ViolationCode::InvalidRnti, format!("ue {}: rnti 0", ue.ue_id)));
        }
        if ue.mcs > MAX_MCS {
            out.insert(Violation::new(
                ViolationCode::InvalidMcs,
                format!("ue {}: mcs {} outside 0..={MAX_MCS}", ue.ue_id, ue.mcs),
            ));
        }
        if !(0.0..1.0).contains(&ue.target_bler) {
            out.insert(Violation::new(
                ViolationCode::InvalidBler,
                format!("ue {}: target bler {} outside [0, 1)", ue.ue_id, ue.target_bler),
            ));
        }
        let n_slices = ue.distinct_slices().len();
        if n_slices > MAX_SLICES_PER_UE {
            out.insert(Violation::new(
                ViolationCode::TooManySlicesPerUe,
                format!("ue {}: {n_slices} distinct slices", ue.ue_id),
            ));
        }
        for s in &ue.sessions {
            if s.ue_id != ue.ue_id {
                out.insert(Violation::new(
                    ViolationCode::SessionUeMismatch,
                    format!("ue {}: session {} owned by ue {}", ue.ue_id, s.pdu_id, s.ue_id),
                ));
            }
            if !(1..=15).contains(&s.pdu_id) {
                out.insert(Violation::new(
                    ViolationCode::InvalidPduId,
                    format!("ue {}: pdu id {} outside 1..=15", ue.ue_id, s.pdu_id),
                ));
            }
            if !seen.contains_key(&s.snssai) {
                out.insert(Violation::new(
                    ViolationCode::UnknownSlice,
                    format!("ue {} pdu {}: slice {} not configured", ue.ue_id, s.pdu_id, s.snssai),
                ));
            }
            *flows.entry((ue.ue_id, s.pdu_id)).or_insert(0usize) += 1;
        }
    }
    for (rnti, n) in rntis {
        if n > 1 {
            out.insert(Violation::new(ViolationCode::DuplicateRnti, format!("rnti {rnti} used {n} times")));
        }
    }
    for (ue_id, n) in ue_ids {
        if n > 1 {
            out.insert(Violation::new(ViolationCode::DuplicateUeId, format!("ue {ue_id} declared {n} times")));
        }
    }
    for ((ue_id, pdu_id), n) in flows {
        if n > 1 {
            out.insert(Violation::new(
                ViolationCode::DuplicatePduSession,
                format!("ue {ue_id} pdu {pdu_id} declared {n} times"),
            ));
        }
    }

    out.into_iter().collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::phy::TrafficProfile;

    fn slice(sst: u8, ded: u8, min: u8, max: u8) -> SliceConfig {
        SliceConfig::new(Snssai::sst_only(sst), RrmPolicyRatio::new(ded, min, max))
    }

    fn codes(v: &[Violation]) -> Vec<ViolationCode> {
        v.iter().map(|v| v.code).collect()
    }

    #[test]
    fn sd_range() {
        assert!(Snssai::new(1, Some(SD_MAX)).is_ok());
        assert_eq!(Snssai::new(1, Some(SD_MAX + 1)), Err(InvalidSnssai(SD_MAX + 1)));
    }

    #[test]
    fn absent_sd_distinct_from_zero() {
        let a = Snssai::new(1, None).unwrap();
        let b = Snssai::new(1, Some(0)).unwrap();
        assert_ne!(a, b);
        assert!(a < b);
    }

    #[test]
    fn unconstrained_pair_is_valid() {
        let v = validate_cell_config(&[slice(1, 0, 0, 100), slice(2, 0, 0, 100)], &[]);
        assert!(v.is_empty(), "{v:?}");
    }

    #[test]
    fn dedicated_above_min() {
        let v = validate_cell_config(&[slice(1, 50, 40, 100)], &[]);
        assert_eq!(codes(&v), vec![ViolationCode::DedicatedExceedsMin]);
    }

    #[test]
    fn nine_slices_on_one_ue() {
        let slices: Vec<_> = (0..9).map(|i| slice(i, 0, 0, 100)).collect();
        let mut ue = UeContext::new(1, 100, 10, 0.0);
        for i in 0..9u8 {
            ue = ue.with_session(i + 1, Snssai::sst_only(i), TrafficProfile::full_buffer());
        }
        let v = validate_cell_config(&slices, &[ue]);
        assert_eq!(codes(&v), vec![ViolationCode::TooManySlicesPerUe]);
    }

    #[test]
    fn eight_slices_on_one_ue_ok() {
        let slices: Vec<_> = (0..8).map(|i| slice(i, 0, 0, 100)).collect();
        let mut ue = UeContext::new(1, 100, 10, 0.0);
        for i in 0..8u8 {
            ue = ue.with_session(i + 1, Snssai::sst_only(i), TrafficProfile::full_buffer());
        }
        assert!(validate_cell_config(&slices, &[ue]).is_empty());
    }

    #[test]
    fn reports_all_violations() {
        let slices = [slice(1, 60, 60, 100), slice(1, 50, 70, 60)];
        let ues = [UeContext::new(1, 5, 10, 0.0), UeContext::new(2, 5, 40, 1.0)];
        let v = validate_cell_config(&slices, &ues);
        let c = codes(&v);
        for want in [
            ViolationCode::DuplicateSnssai,
            ViolationCode::MinExceedsMax,
            ViolationCode::DedicatedSumExceeds100,
            ViolationCode::DuplicateRnti,
            ViolationCode::InvalidMcs,
            ViolationCode::InvalidBler,
        ] {
            assert!(c.contains(&want), "missing {want}: {c:?}");
        }
    }

    #[test]
    fn session_checks() {
        let ue = UeContext::new(1, 5, 10, 0.0)
            .with_session(0, Snssai::sst_only(1), TrafficProfile::off())
            .with_session(3, Snssai::sst_only(9), TrafficProfile::off())
            .with_session(3, Snssai::sst_only(1), TrafficProfile::off());
        let v = validate_cell_config(&[slice(1, 0, 0, 100)], &[ue]);
        assert_eq!(
            codes(&v),
            vec![
                ViolationCode::DuplicatePduSession,
                ViolationCode::InvalidPduId,
                ViolationCode::UnknownSlice
            ]
        );
    }

    #[test]
    fn ratio_to_prbs_floors() {
        assert_eq!(RrmPolicyRatio::prbs_for(90, 106), 95);
        assert_eq!(RrmPolicyRatio::prbs_for(10, 106), 10);
        assert_eq!(RrmPolicyRatio::prbs_for(90, 273), 245);
        assert_eq!(RrmPolicyRatio::prbs_for(10, 273), 27);
        assert_eq!(RrmPolicyRatio::prbs_for(100, 273), 273);
    }
}
