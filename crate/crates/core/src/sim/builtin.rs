//! The two reference experiments as ready-made scenarios.

use crate::model::{RrmPolicyRatio, SliceConfig, Snssai, UeContext};
use crate::phy::{Numerology, TrafficProfile};
use crate::ric::SlicingXappConfig;

use super::scenario::{Action, BlerMode, RicSettings, Scenario, TimedEvent};

pub const EXP1_NAME: &str = "exp1_slicing_control";
pub const EXP2_NAME: &str = "exp2_min_prb_multislice";

/// Slice 1 and slice 2 of both experiments.
pub const SLICE_1: Snssai = snssai(1);
pub const SLICE_2: Snssai = snssai(2);

const fn snssai(sd: u32) -> Snssai {
    match Snssai::new(1, Some(sd)) {
        Ok(s) => s,
        Err(_) => panic!("sd fits"),
    }
}

const MCS: u8 = 20;

fn base(name: &str, numerology: Numerology, duration_s: f64) -> Scenario {
    Scenario {
        name: name.into(),
        numerology,
        duration_s,
        slices: vec![],
        ues: vec![],
        timeline: vec![],
        xapp: RicSettings::default(),
        seed: 1,
        pf_alpha: crate::mac::DEFAULT_PF_ALPHA,
        bler_mode: BlerMode::Deterministic,
    }
}

/// Two slices, one full-buffer UE each, slicing xApp flipping the 90/10 max
/// ratios every 10 s.
pub fn exp1(numerology: Numerology) -> Scenario {
    let mut s = base(EXP1_NAME, numerology, 100.0);
    s.slices = vec![
        SliceConfig::new(SLICE_1, RrmPolicyRatio::new(0, 0, 90)),
        SliceConfig::new(SLICE_2, RrmPolicyRatio::new(0, 0, 10)),
    ];
    s.ues = vec![
        UeContext::new(1, 0x4601, MCS, 0.0).with_session(1, SLICE_1, TrafficProfile::full_buffer()),
        UeContext::new(2, 0x4602, MCS, 0.0).with_session(1, SLICE_2, TrafficProfile::full_buffer()),
    ];
    s.xapp.slicing = SlicingXappConfig::default();
    s
}

/// Minimum-ratio staircase on slice 2 while UEs come and go:
///
/// | step | time     | change                               |
/// |------|----------|--------------------------------------|
/// | 1    | 0-20 s   | UE1 has a PDU on each slice          |
/// | 2    | 20-40 s  | UE2 joins slice 1                    |
/// | 3    | 40-60 s  | slice 2 min 80 %                     |
/// | 4    | 60-80 s  | slice 2 min 40 %                     |
/// | 5    | 80-100 s | UE1 stops, UE2 alone on slice 1      |
/// | 6    | 100-120 s| UE2 stops, cell idle                 |
pub fn exp2(numerology: Numerology) -> Scenario {
    let mut s = base(EXP2_NAME, numerology, 120.0);
    let open = RrmPolicyRatio::new(0, 0, 100);
    s.slices = vec![SliceConfig::new(SLICE_1, open), SliceConfig::new(SLICE_2, open)];
    s.ues = vec![
        UeContext::new(1, 0x4601, MCS, 0.0)
            .with_session(1, SLICE_1, TrafficProfile::full_buffer())
            .with_session(2, SLICE_2, TrafficProfile::full_buffer()),
        UeContext::new(2, 0x4602, MCS, 0.0),
    ];
    let ev = |t_s: f64, action: Action| TimedEvent { t_s, action };
    s.timeline = vec![
        ev(20.0, Action::EstablishPdu { ue_id: 2, pdu_id: 1, snssai: SLICE_1, traffic: TrafficProfile::full_buffer() }),
        ev(40.0, Action::SetPolicy { snssai: SLICE_2, policy: RrmPolicyRatio::new(0, 80, 100) }),
        ev(60.0, Action::SetPolicy { snssai: SLICE_2, policy: RrmPolicyRatio::new(0, 40, 100) }),
        ev(80.0, Action::SetTraffic { ue_id: 1, pdu_id: 1, traffic: TrafficProfile::off() }),
        ev(80.0, Action::SetTraffic { ue_id: 1, pdu_id: 2, traffic: TrafficProfile::off() }),
        ev(100.0, Action::SetTraffic { ue_id: 2, pdu_id: 1, traffic: TrafficProfile::off() }),
    ];
    s
}

/// Step boundaries of [`exp2`], in seconds.
pub const EXP2_STEPS: [(f64, f64); 6] =
    [(0.0, 20.0), (20.0, 40.0), (40.0, 60.0), (60.0, 80.0), (80.0, 100.0), (100.0, 120.0)];

/// Looks up a built-in by short name (`exp1`, `exp2`) or full name.
pub fn builtin(name: &str, numerology: Numerology) -> Option<Scenario> {
    match name {
        "exp1" | EXP1_NAME => Some(exp1(numerology)),
        "exp2" | EXP2_NAME => Some(exp2(numerology)),
        _ => None,
    }
}

pub fn builtin_scenarios() -> Vec<Scenario> {
    vec![exp1(Numerology::mhz40()), exp2(Numerology::mhz40())]
}
