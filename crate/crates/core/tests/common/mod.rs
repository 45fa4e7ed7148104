//! Shared by the integration tests and the acceptance runner: an independent
//! brute-force budget oracle, E2 message generators and the codec fuzz driver.
#![allow(dead_code)]

pub mod experiments;

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use proptest::prelude::*;
use proptest::test_runner::{Config, TestCaseError, TestRunner};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use slicesim::e2::{
    decode, encode, ControlFailure, E2Body, E2Message, FrameDecoder, MsgType, RicControlBody, RicIndicationBody,
    SetupRequest, SetupResponse, SubscriptionRequest, SubscriptionResponse,
};
use slicesim::mac::{compute_slice_budgets, SliceDemand, SliceState};
use slicesim::model::{KpmRecord, RrmPolicyRatio, SliceConfig, Snssai, UeContext, Violation, ViolationCode};
use slicesim::phy::{Numerology, TrafficProfile};
use slicesim::sim::{self, BlerMode, RicSettings, Scenario};

// ---- budget oracle ----

#[derive(Debug, Clone)]
pub struct BudgetCase {
    pub total: u32,
    /// Deliberately unsorted; the implementation must order by S-NSSAI.
    pub slices: Vec<(Snssai, RrmPolicyRatio, u64, f64, f64)>,
}

fn floor_pct(pct: u8, n: u32) -> u64 {
    u64::from(pct) * u64::from(n) / 100
}

/// Stage by stage, one PRB at a time, no sorting tricks. Returns granted PRBs
/// keyed by S-NSSAI.
pub fn oracle(case: &BudgetCase) -> BTreeMap<Snssai, u64> {
    let n = case.total;
    let mut rows = case.slices.clone();
    rows.sort_by_key(|r| r.0);

    let mut granted: Vec<u64> = rows.iter().map(|r| floor_pct(r.1.dedicated_pct, n)).collect();
    let mut pool = u64::from(n).saturating_sub(granted.iter().sum());

    let short: Vec<u64> = rows
        .iter()
        .zip(&granted)
        .map(|(r, &g)| {
            if r.2 == 0 {
                0
            } else {
                floor_pct(r.1.min_pct, n).min(r.2).min(floor_pct(r.1.max_pct, n)).saturating_sub(g)
            }
        })
        .collect();
    let need: u64 = short.iter().sum();
    if need <= pool {
        for (g, s) in granted.iter_mut().zip(&short) {
            *g += s;
        }
        pool -= need;
    } else {
        // Hamilton apportionment: exact quotas pool*s/need, floors first, then
        // leftover units to the largest fractional part, lower S-NSSAI first.
        let mut given = vec![0u64; rows.len()];
        for i in 0..rows.len() {
            given[i] = pool * short[i] / need;
        }
        let mut left = pool - given.iter().sum::<u64>();
        let mut taken = vec![false; rows.len()];
        while left > 0 {
            let mut best: Option<usize> = None;
            for i in 0..rows.len() {
                if taken[i] {
                    continue;
                }
                let frac = pool * short[i] % need;
                if best.is_none_or(|b| frac > pool * short[b] % need) {
                    best = Some(i);
                }
            }
            let b = best.expect("leftover below slice count");
            taken[b] = true;
            given[b] += 1;
            left -= 1;
        }
        for (g, x) in granted.iter_mut().zip(given) {
            *g += x;
        }
        pool = 0;
    }

    while pool > 0 {
        let mut best: Option<(usize, f64)> = None;
        for (i, r) in rows.iter().enumerate() {
            let limit = r.2.min(floor_pct(r.1.max_pct, n));
            if granted[i] >= limit {
                continue;
            }
            let metric = r.3 / r.4.max(1e-3);
            if best.is_none_or(|(_, m)| metric > m) {
                best = Some((i, metric));
            }
        }
        let Some((i, _)) = best else { break };
        granted[i] += 1;
        pool -= 1;
    }
    rows.iter().map(|r| r.0).zip(granted).collect()
}

pub fn implementation(case: &BudgetCase) -> BTreeMap<Snssai, u64> {
    let states: Vec<SliceState> = case
        .slices
        .iter()
        .map(|&(s, p, _, _, avg)| {
            let mut st = SliceState::new(SliceConfig::new(s, p));
            st.pf_avg_bps = avg;
            st
        })
        .collect();
    let demand: BTreeMap<Snssai, SliceDemand> =
        case.slices.iter().map(|&(s, _, d, rate, _)| (s, SliceDemand::new(d, rate))).collect();
    compute_slice_budgets(&states, &demand, case.total)
        .expect("nonzero cell")
        .into_iter()
        .map(|b| (b.snssai, u64::from(b.granted_prbs)))
        .collect()
}

fn policy_strategy() -> impl Strategy<Value = RrmPolicyRatio> {
    proptest::array::uniform3(0u8..=10).prop_map(|mut v| {
        v.sort_unstable();
        RrmPolicyRatio::new(v[0] * 10, v[1] * 10, v[2] * 10)
    })
}

/// Small value sets so that metric ties and zero averages come up often.
const RATES: [f64; 4] = [0.0, 1e6, 2e6, 4.5e7];
const AVGS: [f64; 4] = [0.0, 5e5, 1e6, 2e7];

pub fn budget_case_strategy() -> impl Strategy<Value = BudgetCase> {
    (8u32..=24)
        .prop_flat_map(|n| {
            let slice = (policy_strategy(), 0usize..3, 0usize..RATES.len(), 0usize..AVGS.len());
            (Just(n), proptest::collection::vec(slice, 1..=3), any::<u64>())
        })
        .prop_filter("dedicated shares fit the cell", |(_, v, _)| {
            v.iter().map(|s| u32::from(s.0.dedicated_pct)).sum::<u32>() <= 100
        })
        .prop_map(|(n, v, shuffle)| {
            let ids = [Snssai::sst_only(1), Snssai::new(1, Some(7)).unwrap(), Snssai::sst_only(2)];
            let mut slices: Vec<_> = v
                .into_iter()
                .zip(ids)
                .map(|((p, d, r, a), id)| (id, p, [0, u64::from(n / 2), u64::from(n)][d], RATES[r], AVGS[a]))
                .collect();
            let k = (shuffle % slices.len() as u64) as usize;
            slices.rotate_left(k);
            BudgetCase { total: n, slices }
        })
}

/// Runs the oracle comparison over `cases` generated configurations.
pub fn check_budget_oracle(cases: u32) -> Result<(), String> {
    let mut runner = TestRunner::new(Config { cases, failure_persistence: None, ..Config::default() });
    runner
        .run(&budget_case_strategy(), |case| {
            let want = oracle(&case);
            let got = implementation(&case);
            if want != got {
                return Err(TestCaseError::fail(format!("{case:?}: oracle {want:?}, implementation {got:?}")));
            }
            Ok(())
        })
        .map_err(|e| e.to_string())
}

// ---- E2 messages ----

fn snssai_strategy() -> impl Strategy<Value = Snssai> {
    (any::<u8>(), proptest::option::of(0u32..=0x00FF_FFFF)).prop_map(|(sst, sd)| Snssai::new(sst, sd).unwrap())
}

fn any_policy() -> impl Strategy<Value = RrmPolicyRatio> {
    (0u8..=100, 0u8..=100, 0u8..=100).prop_map(|(a, b, c)| RrmPolicyRatio::new(a, b, c))
}

fn text() -> impl Strategy<Value = String> {
    prop_oneof![
        "[a-z0-9-]{1,12}",
        any::<String>(),
        "[\"\\\\/\\x00-\\x1f\u{7f}\u{e9}\u{1F4E1}]{0,6}",
    ]
}

fn distinct<K: Ord + Copy, V>(v: Vec<(K, V)>) -> Vec<(K, V)> {
    let mut seen = std::collections::BTreeSet::new();
    v.into_iter().filter(|(k, _)| seen.insert(*k)).collect()
}

fn record_strategy() -> impl Strategy<Value = KpmRecord> {
    (
        any::<u64>(),
        1u16..=u16::MAX,
        snssai_strategy(),
        1u8..=15,
        0u8..=28,
        0u64..=1_000_000,
        0u64..=1_000_000_000_000_000,
        any::<u64>(),
    )
        .prop_map(|(ts, rnti, snssai, pdu_id, mcs, bler, thp, prbs)| KpmRecord {
            timestamp_ms: ts,
            rnti,
            snssai,
            pdu_id,
            mcs,
            bler: bler as f64 / 1e6,
            dl_thp_bps: thp as f64 / 1e6,
            dl_prbs: prbs,
        })
}

fn violation_strategy() -> impl Strategy<Value = Violation> {
    let codes = [
        ViolationCode::PercentOutOfRange,
        ViolationCode::DedicatedExceedsMin,
        ViolationCode::MinExceedsMax,
        ViolationCode::DedicatedSumExceeds100,
        ViolationCode::UnknownSlice,
        ViolationCode::DuplicateSnssai,
    ];
    (proptest::sample::select(codes.to_vec()), text()).prop_map(|(c, d)| Violation::new(c, d))
}

pub fn body_strategy() -> impl Strategy<Value = E2Body> {
    prop_oneof![
        (text(), 1u32..=u32::from(u16::MAX), proptest::collection::vec((snssai_strategy(), any_policy()), 0..4))
            .prop_map(|(id, n, s)| E2Body::E2SetupRequest(SetupRequest {
                ran_node_id: id,
                total_prbs: n,
                slices: distinct(s).into_iter().map(|(s, p)| SliceConfig::new(s, p)).collect(),
            })),
        text().prop_map(|ric_id| E2Body::E2SetupResponse(SetupResponse { ric_id })),
        (1u32..).prop_map(|p| E2Body::RicSubscriptionRequest(SubscriptionRequest { report_period_ms: p })),
        (1u32..).prop_map(|p| E2Body::RicSubscriptionResponse(SubscriptionResponse { report_period_ms: p })),
        (text(), proptest::collection::vec(record_strategy(), 1..5))
            .prop_map(|(id, records)| E2Body::RicIndication(RicIndicationBody { ran_node_id: id, records })),
        (text(), proptest::collection::vec((snssai_strategy(), any_policy()), 1..4)).prop_map(|(id, e)| {
            E2Body::RicControlRequest(RicControlBody { ran_node_id: id, entries: distinct(e) })
        }),
        Just(E2Body::RicControlAck),
        proptest::collection::vec(violation_strategy(), 0..3)
            .prop_map(|violations| E2Body::RicControlFailure(ControlFailure { violations })),
    ]
}

pub fn message_strategy() -> impl Strategy<Value = E2Message> {
    (any::<u64>(), body_strategy()).prop_map(|(txn, body)| E2Message::new(txn, body))
}

pub fn check_codec_roundtrip(cases: u32) -> Result<(), String> {
    let mut runner = TestRunner::new(Config { cases, failure_persistence: None, ..Config::default() });
    runner
        .run(&message_strategy(), |m| {
            let bytes = encode(&m).map_err(|e| TestCaseError::fail(e.to_string()))?;
            let back = decode(&bytes).map_err(|e| TestCaseError::fail(format!("{m:?}: {e}")))?;
            prop_assert_eq!(&back, &m);
            prop_assert_eq!(encode(&back).unwrap(), bytes);
            Ok(())
        })
        .map_err(|e| e.to_string())
}

// ---- golden frames ----

pub fn golden_dir() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("tests/fixtures/golden")
}

fn s(sst: u8, sd: Option<u32>) -> Snssai {
    Snssai::new(sst, sd).unwrap()
}

/// The messages the fixture generator writes, built through the Rust types.
pub fn golden_messages() -> Vec<(&'static str, MsgType, E2Message)> {
    let record = |rnti, sd, prbs, bler, thp| KpmRecord {
        timestamp_ms: 1500,
        rnti,
        snssai: s(1, Some(sd)),
        pdu_id: 1,
        mcs: 20,
        bler,
        dl_thp_bps: thp,
        dl_prbs: prbs,
    };
    vec![
        (
            "setup_request",
            MsgType::E2SetupRequest,
            E2Message::new(
                1,
                E2Body::E2SetupRequest(SetupRequest {
                    ran_node_id: "gnb-sim".into(),
                    total_prbs: 106,
                    slices: vec![
                        SliceConfig::new(s(1, Some(1)), RrmPolicyRatio::new(0, 0, 90)),
                        SliceConfig::new(s(1, Some(2)), RrmPolicyRatio::new(0, 0, 10)),
                        SliceConfig::new(s(1, None), RrmPolicyRatio::new(10, 20, 100)),
                    ],
                }),
            ),
        ),
        (
            "setup_response",
            MsgType::E2SetupResponse,
            E2Message::new(1, E2Body::E2SetupResponse(SetupResponse { ric_id: "ric-sim".into() })),
        ),
        (
            "subscription_request",
            MsgType::RicSubscriptionRequest,
            E2Message::new(1, E2Body::RicSubscriptionRequest(SubscriptionRequest { report_period_ms: 500 })),
        ),
        (
            "subscription_response",
            MsgType::RicSubscriptionResponse,
            E2Message::new(1, E2Body::RicSubscriptionResponse(SubscriptionResponse { report_period_ms: 500 })),
        ),
        (
            "indication",
            MsgType::RicIndication,
            E2Message::new(
                7,
                E2Body::RicIndication(RicIndicationBody {
                    ran_node_id: "gnb-sim".into(),
                    records: vec![
                        record(0x4601, 1, 95_000, 0.0, 50_880_000.0),
                        record(0x4602, 2, 10_000, 0.125, 5356.123456),
                    ],
                }),
            ),
        ),
        (
            "control_request",
            MsgType::RicControlRequest,
            E2Message::new(
                3,
                E2Body::RicControlRequest(RicControlBody {
                    ran_node_id: "gnb-sim".into(),
                    entries: vec![
                        (s(1, Some(1)), RrmPolicyRatio::new(0, 0, 10)),
                        (s(1, Some(2)), RrmPolicyRatio::new(0, 0, 90)),
                    ],
                }),
            ),
        ),
        ("control_ack", MsgType::RicControlAck, E2Message::new(3, E2Body::RicControlAck)),
        (
            "control_failure",
            MsgType::RicControlFailure,
            E2Message::new(
                4,
                E2Body::RicControlFailure(ControlFailure {
                    violations: vec![Violation::new(ViolationCode::MinExceedsMax, "slice 1:2: min 80 > max 10")],
                }),
            ),
        ),
    ]
}

pub fn check_goldens() -> Result<usize, String> {
    let mut checked = 0;
    for (name, t, msg) in golden_messages() {
        let path = golden_dir().join(format!("{name}.bin"));
        let want = std::fs::read(&path).map_err(|e| format!("{}: {e}", path.display()))?;
        let got = encode(&msg).map_err(|e| format!("{name}: {e}"))?;
        if got != want {
            return Err(format!(
                "{name}: encoded {:?}, fixture {:?}",
                String::from_utf8_lossy(&got),
                String::from_utf8_lossy(&want)
            ));
        }
        let back = decode(&want).map_err(|e| format!("{name}: {e}"))?;
        if back != msg || back.msg_type() != t {
            return Err(format!("{name}: decoded {back:?}"));
        }
        checked += 1;
    }
    Ok(checked)
}

// ---- fuzzing ----

/// Mutation kinds applied to a valid frame, plus pure noise.
fn fuzz_frame(rng: &mut ChaCha8Rng, seeds: &[Vec<u8>]) -> Vec<u8> {
    let mut f = seeds[rng.gen_range(0..seeds.len())].clone();
    match rng.gen_range(0..6) {
        0 => {
            let len = rng.gen_range(0..64);
            (0..len).map(|_| rng.gen()).collect()
        }
        1 => {
            for _ in 0..rng.gen_range(1..4) {
                let i = rng.gen_range(0..f.len());
                f[i] = rng.gen();
            }
            f
        }
        2 => {
            f.truncate(rng.gen_range(0..f.len()));
            f
        }
        3 => {
            // keep the header consistent so the JSON layer sees the damage
            let i = rng.gen_range(4..f.len());
            f.insert(i, *b"{}[],:\"\\0123456789.-eE tfn".get(rng.gen_range(0..26)).unwrap());
            let len = (f.len() - 4) as u32;
            f[..4].copy_from_slice(&len.to_be_bytes());
            f
        }
        4 => {
            let len: u32 = rng.gen();
            f[..4].copy_from_slice(&len.to_be_bytes());
            f
        }
        _ => {
            let i = rng.gen_range(4..f.len());
            let j = rng.gen_range(i..f.len());
            f.drain(i..j);
            let len = (f.len() - 4) as u32;
            f[..4].copy_from_slice(&len.to_be_bytes());
            f
        }
    }
}

/// Decodes `count` fuzzed frames one by one and as a single stream. Returns
/// how many decoded successfully; a panic propagates to the caller.
pub fn fuzz_decode(count: u64, seed: u64) -> u64 {
    let seeds: Vec<Vec<u8>> = golden_messages().iter().map(|(_, _, m)| encode(m).unwrap()).collect();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut ok = 0;
    let mut stream = FrameDecoder::new();
    for i in 0..count {
        let frame = fuzz_frame(&mut rng, &seeds);
        if decode(&frame).is_ok() {
            ok += 1;
        }
        if i % 64 == 0 {
            stream.push(&frame);
            while let Ok(Some(_)) = stream.next_message() {}
            stream = FrameDecoder::new();
        }
    }
    ok
}

// ---- PF fairness ----

/// One unconstrained slice, two identical full-buffer flows on separate UEs,
/// 10^4 slots at 30 kHz.
pub fn pf_scenario() -> Scenario {
    let slice = Snssai::sst_only(1);
    Scenario {
        name: "pf_two_flows".into(),
        numerology: Numerology::mhz40(),
        duration_s: 5.0,
        slices: vec![SliceConfig::new(slice, RrmPolicyRatio::unconstrained())],
        ues: (1..=2)
            .map(|id| UeContext::new(id, 0x4600 + id as u16, 20, 0.0).with_session(1, slice, TrafficProfile::full_buffer()))
            .collect(),
        timeline: vec![],
        xapp: RicSettings::default(),
        seed: 1,
        pf_alpha: slicesim::mac::DEFAULT_PF_ALPHA,
        bler_mode: BlerMode::Deterministic,
    }
}

/// Returns (slots, served bits of each flow).
pub fn pf_run(dir: &Path) -> (u64, Vec<u64>) {
    let r = sim::run(&pf_scenario(), dir).expect("pf run");
    (r.slots, r.served_bits.values().copied().collect())
}
