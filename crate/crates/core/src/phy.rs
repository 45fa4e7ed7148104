//! Numerology, MCS to capacity mapping, BLER model and traffic sources.

use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::model::PduSession;

pub const MAX_MCS: u8 = 28;

const SUBCARRIERS_PER_PRB: f64 = 12.0;
const SYMBOLS_PER_SLOT: f64 = 14.0;

/// Spectral efficiency (bits per resource element) per MCS index, PDSCH MCS
/// index table 1 of 3GPP TS 38.214 (Table 5.1.3.1-1, up to 64QAM).
pub const SE_TABLE: [f64; 29] = [
    0.2344, 0.3066, 0.3770, 0.4902, 0.6016, 0.7402, 0.8770, 1.0273, 1.1758, 1.3262, // 0-9
    1.3281, 1.4766, 1.6953, 1.9141, 2.1602, 2.4063, 2.5703, // 10-16, 16QAM
    2.5664, 2.7305, 3.0293, 3.3223, 3.6094, 3.9023, 4.2129, 4.5234, 4.8164, 5.1152, 5.3320,
    5.5547, // 17-28, 64QAM
];

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum PhyError {
    #[error("mcs {0} outside 0..={max}", max = MAX_MCS)]
    InvalidMcs(u8),
    #[error("unsupported subcarrier spacing {0} kHz")]
    InvalidScs(u32),
    #[error("cell must have at least one PRB")]
    ZeroPrbs,
    #[error("invalid traffic profile: {0}")]
    InvalidTraffic(String),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Numerology {
    scs_khz: u32,
    total_prbs: u32,
}

impl Numerology {
    pub fn new(scs_khz: u32, total_prbs: u32) -> Result<Self, PhyError> {
        if !matches!(scs_khz, 15 | 30 | 60) {
            return Err(PhyError::InvalidScs(scs_khz));
        }
        if total_prbs == 0 {
            return Err(PhyError::ZeroPrbs);
        }
        Ok(Self { scs_khz, total_prbs })
    }

    /// 40 MHz carrier, 106 PRBs at 30 kHz.
    pub const fn mhz40() -> Self {
        Self { scs_khz: 30, total_prbs: 106 }
    }

    /// 100 MHz carrier, 273 PRBs at 30 kHz.
    pub const fn mhz100() -> Self {
        Self { scs_khz: 30, total_prbs: 273 }
    }

    pub fn preset(name: &str) -> Option<Self> {
        match name {
            "40MHz" => Some(Self::mhz40()),
            "100MHz" => Some(Self::mhz100()),
            _ => None,
        }
    }

    pub fn preset_name(&self) -> Option<&'static str> {
        match (self.scs_khz, self.total_prbs) {
            (30, 106) => Some("40MHz"),
            (30, 273) => Some("100MHz"),
            _ => None,
        }
    }

    pub fn scs_khz(&self) -> u32 {
        self.scs_khz
    }

    pub fn total_prbs(&self) -> u32 {
        self.total_prbs
    }

    /// mu such that scs = 15 * 2^mu kHz.
    pub fn mu(&self) -> u32 {
        (self.scs_khz / 15).trailing_zeros()
    }

    pub fn slots_per_ms(&self) -> u32 {
        1 << self.mu()
    }

    pub fn slot_duration_ms(&self) -> f64 {
        1.0 / f64::from(self.slots_per_ms())
    }

    pub fn slot_duration_s(&self) -> f64 {
        self.slot_duration_ms() / 1000.0
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum TrafficKind {
    FullBuffer,
    Cbr { rate_bps: f64 },
    Off,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TrafficProfile {
    pub kind: TrafficKind,
    pub start_s: Option<f64>,
    pub stop_s: Option<f64>,
}

impl TrafficProfile {
    pub fn full_buffer() -> Self {
        Self { kind: TrafficKind::FullBuffer, start_s: None, stop_s: None }
    }

    pub fn cbr(rate_bps: f64) -> Self {
        Self { kind: TrafficKind::Cbr { rate_bps }, start_s: None, stop_s: None }
    }

    pub fn off() -> Self {
        Self { kind: TrafficKind::Off, start_s: None, stop_s: None }
    }

    pub fn between(mut self, start_s: Option<f64>, stop_s: Option<f64>) -> Self {
        self.start_s = start_s;
        self.stop_s = stop_s;
        self
    }

    pub fn validate(&self) -> Result<(), PhyError> {
        if let TrafficKind::Cbr { rate_bps } = self.kind {
            if !(rate_bps.is_finite() && rate_bps > 0.0) {
                return Err(PhyError::InvalidTraffic(format!("cbr rate {rate_bps} must be > 0")));
            }
        }
        for t in [self.start_s, self.stop_s].into_iter().flatten() {
            if !(t.is_finite() && t >= 0.0) {
                return Err(PhyError::InvalidTraffic(format!("time {t} must be >= 0")));
            }
        }
        if let (Some(a), Some(b)) = (self.start_s, self.stop_s) {
            if a >= b {
                return Err(PhyError::InvalidTraffic(format!("start {a} must precede stop {b}")));
            }
        }
        Ok(())
    }

    pub fn is_active(&self, now_s: f64) -> bool {
        self.start_s.is_none_or(|t| now_s >= t) && self.stop_s.is_none_or(|t| now_s < t)
    }
}

/// Analytic per-PRB capacity model.
#[derive(Debug, Clone, PartialEq)]
pub struct LinkModel {
    pub se_table: [f64; 29],
    pub overhead_fraction: f64,
}

impl Default for LinkModel {
    fn default() -> Self {
        Self { se_table: SE_TABLE, overhead_fraction: 0.14 }
    }
}

impl LinkModel {
    pub fn spectral_efficiency(&self, mcs: u8) -> Result<f64, PhyError> {
        self.se_table.get(usize::from(mcs)).copied().ok_or(PhyError::InvalidMcs(mcs))
    }

    /// Bytes one PRB carries in one slot at `mcs`, never less than one.
    pub fn bytes_per_prb(&self, mcs: u8) -> Result<u64, PhyError> {
        let se = self.spectral_efficiency(mcs)?;
        let bits = SUBCARRIERS_PER_PRB * SYMBOLS_PER_SLOT * se * (1.0 - self.overhead_fraction);
        Ok(((bits / 8.0).floor() as u64).max(1))
    }

    /// Backlog a full-buffer source is pinned to: enough to fill the whole
    /// cell at the highest MCS.
    pub fn full_buffer_pin(&self, total_prbs: u32) -> u64 {
        let best = self.bytes_per_prb(MAX_MCS).expect("max mcs is in table");
        u64::from(total_prbs) * best
    }
}

pub fn bytes_per_prb(mcs: u8, link: &LinkModel) -> Result<u64, PhyError> {
    link.bytes_per_prb(mcs)
}

/// Adds one slot worth of arrivals to every flow's backlog.
pub fn step_traffic(flows: &mut [PduSession], now_s: f64, slot_s: f64, pin_bytes: u64) {
    for f in flows {
        step_flow(f, now_s, slot_s, pin_bytes);
    }
}

pub(crate) fn step_flow(f: &mut PduSession, now_s: f64, slot_s: f64, pin_bytes: u64) {
    if !f.traffic.is_active(now_s) {
        return;
    }
    match f.traffic.kind {
        TrafficKind::FullBuffer => f.backlog_bytes = f.backlog_bytes.max(pin_bytes),
        TrafficKind::Cbr { rate_bps } => {
            f.cbr_credit += rate_bps * slot_s / 8.0;
            let whole = f.cbr_credit.floor();
            f.cbr_credit -= whole;
            f.backlog_bytes += whole as u64;
        }
        TrafficKind::Off => {}
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct BlerOutcome {
    pub delivered: u64,
    pub requeued: u64,
}

/// Transport-block error model. Stochastic mode is always seeded.
#[derive(Debug, Clone)]
pub enum BlerModel {
    /// Scales every TB by `1 - bler`.
    Deterministic,
    /// Whole-TB Bernoulli failures.
    Stochastic(ChaCha8Rng),
}

impl BlerModel {
    pub fn stochastic(seed: u64) -> Self {
        BlerModel::Stochastic(ChaCha8Rng::seed_from_u64(seed))
    }

    pub fn apply(&mut self, tb_bytes: u64, target_bler: f64) -> BlerOutcome {
        let bler = target_bler.clamp(0.0, 1.0);
        let delivered = match self {
            BlerModel::Deterministic => {
                ((tb_bytes as f64) * (1.0 - bler)).round().min(tb_bytes as f64) as u64
            }
            BlerModel::Stochastic(rng) => {
                if bler > 0.0 && rng.gen_bool(bler) {
                    0
                } else {
                    tb_bytes
                }
            }
        };
        BlerOutcome { delivered, requeued: tb_bytes - delivered }
    }
}
