//! Slot-stepped simulation of one gNB coupled to the RIC over E2.
//!
//! Each slot: timeline events due at its start, traffic arrivals, scheduling,
//! BLER, PF update. Every report period the gNB sends a KPM indication and
//! then services the RIC until every control the slicing xApp issues for
//! that indication has been applied. Virtual time only advances in the loop,
//! so a run is a pure function of the scenario and its seed.

use std::collections::BTreeMap;
use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};
use std::time::{Duration, Instant};

use crate::e2::json::{format_real, quantize, Json};
use crate::e2::{
    duplex_pipe, E2Error, GnbHandler, GnbSession, MsgType, PipeTransport, RicControlBody, RicIndicationBody,
    RicSession, SetupRequest, SubscriptionRequest, SubscriptionResponse, Transport, DEFAULT_HANDSHAKE_TIMEOUT,
};
use crate::mac::{MacScheduler, SchedulerError};
use crate::model::{FlowKey, KpmRecord, Snssai, Violation};
use crate::phy::{step_traffic, BlerModel, LinkModel};
use crate::ric::{ControlLog, KpmStore, RicRuntime, XappPlan};

use super::scenario::{Action, BlerMode, Scenario, ScenarioError};

pub const PRBS_HEADER: [&str; 4] = ["frame_ms", "sst", "sd", "mean_prbs"];
pub const THROUGHPUT_HEADER: [&str; 6] = ["t_ms", "ue_id", "pdu_id", "sst", "sd", "bps"];
pub const SLOTS_HEADER: [&str; 9] = ["slot", "sst", "sd", "granted", "used", "dedicated", "cap", "guarantee", "demand"];

pub const PRBS_CSV: &str = "prbs.csv";
pub const THROUGHPUT_CSV: &str = "throughput.csv";
pub const CONTROL_LOG_CSV: &str = "control_log.csv";
pub const SLOTS_CSV: &str = "slots.csv";
pub const SCENARIO_JSON: &str = "scenario.json";
pub const RUN_JSON: &str = "run.json";

pub const RAN_NODE_ID: &str = "gnb-sim";
pub const RIC_ID: &str = "ric-sim";

/// How long a gNB in lockstep waits for an expected RIC message.
pub const LOCKSTEP_TIMEOUT: Duration = Duration::from_secs(30);

#[derive(Debug, thiserror::Error)]
pub enum RunError {
    #[error(transparent)]
    Scenario(#[from] ScenarioError),
    #[error("scheduler: {0}")]
    Scheduler(#[from] SchedulerError),
    #[error("E2: {0}")]
    E2(#[from] E2Error),
    #[error("i/o: {0}")]
    Io(#[from] std::io::Error),
    #[error("csv: {0}")]
    Csv(#[from] csv::Error),
    #[error("timeline event at {t_s} s ({action}) failed: {source}")]
    Event { t_s: f64, action: &'static str, source: SchedulerError },
    #[error("gNB and RIC disagree: {0}")]
    Lockstep(String),
    #[error("RIC process: {0}")]
    RicProcess(String),
}

/// Summary of a finished run.
#[derive(Debug, Clone)]
pub struct RunReport {
    pub out_dir: PathBuf,
    pub artifacts: Vec<PathBuf>,
    pub slots: u64,
    pub frames: u64,
    pub indications: u64,
    pub controls_applied: u64,
    pub controls_rejected: u64,
    /// Bits delivered per flow over the whole run.
    pub served_bits: BTreeMap<FlowKey, u64>,
    /// Present for in-process runs; TCP runs leave it to the RIC process.
    pub control_log: Option<ControlLog>,
    pub wall_time: Duration,
}

/// gNB-side control plane: applies RIC requests to the scheduler.
pub(crate) struct Gnb {
    mac: MacScheduler,
    report_period_ms: Option<u32>,
    controls_applied: u64,
    controls_rejected: u64,
}

impl GnbHandler for Gnb {
    fn on_subscription(&mut self, req: &SubscriptionRequest) -> SubscriptionResponse {
        self.report_period_ms = Some(req.report_period_ms);
        SubscriptionResponse { report_period_ms: req.report_period_ms }
    }

    fn on_control(&mut self, body: &RicControlBody) -> Result<(), Vec<Violation>> {
        match self.mac.apply_rrm_policies(&body.entries) {
            Ok(()) => {
                self.controls_applied += 1;
                Ok(())
            }
            Err(e) => {
                self.controls_rejected += 1;
                Err(e.violations())
            }
        }
    }
}

impl Gnb {
    fn controls(&self) -> u64 {
        self.controls_applied + self.controls_rejected
    }
}

/// The RIC as seen from the gNB loop.
pub(crate) trait RicPeer {
    type T: Transport;
    /// Lets the RIC react to what the gNB just sent, and services the RIC
    /// until `expected_controls` control requests have been handled.
    fn pump(&mut self, gnb: &mut GnbSession<Self::T>, state: &mut Gnb, expected_controls: u64) -> Result<(), RunError>;
    fn finish(self, gnb: GnbSession<Self::T>, state: &mut Gnb) -> Result<Option<ControlLog>, RunError>;
}

/// RIC running in this process over an in-memory pipe, serviced
/// synchronously after every gNB message.
pub(crate) struct InProcessRic {
    session: RicSession<PipeTransport>,
    runtime: RicRuntime,
}

impl InProcessRic {
    fn drain(&mut self, gnb: &mut GnbSession<PipeTransport>, state: &mut Gnb) -> Result<(), RunError> {
        loop {
            let a = self.session.dispatch_ready(&mut self.runtime)?;
            let b = gnb.dispatch_ready(state)?;
            if a == 0 && b == 0 {
                return Ok(());
            }
        }
    }
}

impl RicPeer for InProcessRic {
    type T = PipeTransport;

    fn pump(
        &mut self,
        gnb: &mut GnbSession<PipeTransport>,
        state: &mut Gnb,
        expected_controls: u64,
    ) -> Result<(), RunError> {
        let before = state.controls();
        self.drain(gnb, state)?;
        let got = state.controls() - before;
        if got != expected_controls {
            return Err(RunError::Lockstep(format!("expected {expected_controls} controls, RIC sent {got}")));
        }
        Ok(())
    }

    fn finish(mut self, mut gnb: GnbSession<PipeTransport>, state: &mut Gnb) -> Result<Option<ControlLog>, RunError> {
        self.drain(&mut gnb, state)?;
        Ok(Some(self.runtime.into_control_log()))
    }
}

/// RIC in another process: the gNB blocks for each expected control.
pub(crate) struct RemoteRic<T>(pub(crate) std::marker::PhantomData<T>);

impl<T: Transport> RicPeer for RemoteRic<T> {
    type T = T;

    fn pump(&mut self, gnb: &mut GnbSession<T>, state: &mut Gnb, expected_controls: u64) -> Result<(), RunError> {
        let mut got = 0;
        while got < expected_controls {
            match gnb.dispatch_one(state, Some(LOCKSTEP_TIMEOUT))? {
                Some(MsgType::RicControlRequest) => got += 1,
                Some(_) => {}
                None => return Err(RunError::Lockstep("timed out waiting for a RIC control request".into())),
            }
        }
        Ok(())
    }

    fn finish(self, _gnb: GnbSession<T>, _state: &mut Gnb) -> Result<Option<ControlLog>, RunError> {
        Ok(None)
    }
}

/// RIC runtime configured from a scenario; identical for both transports.
pub fn ric_runtime(scenario: &Scenario) -> RicRuntime {
    RicRuntime::new(RIC_ID, KpmStore::new(scenario.xapp.retention_s), scenario.xapp_plan())
}

fn setup_request(mac: &MacScheduler) -> SetupRequest {
    SetupRequest { ran_node_id: RAN_NODE_ID.into(), total_prbs: mac.total_prbs(), slices: mac.slice_configs() }
}

fn build_mac(scenario: &Scenario) -> Result<MacScheduler, RunError> {
    Ok(MacScheduler::new(
        scenario.numerology,
        scenario.slices.clone(),
        scenario.ues.clone(),
        LinkModel::default(),
        scenario.pf_alpha,
    )?)
}

/// Runs `scenario` with the RIC in-process and writes every artifact to
/// `out_dir`.
pub fn run(scenario: &Scenario, out_dir: &Path) -> Result<RunReport, RunError> {
    let started = Instant::now();
    prepare_out_dir(scenario, out_dir)?;
    let mac = build_mac(scenario)?;
    let (gnb_end, ric_end) = duplex_pipe();
    let pending = GnbSession::start(gnb_end, setup_request(&mac))?;
    let mut runtime = ric_runtime(scenario);
    let (mut ric, _) = RicSession::accept(ric_end, &mut runtime, DEFAULT_HANDSHAKE_TIMEOUT)?;
    let (mut session, _) = pending.finish(DEFAULT_HANDSHAKE_TIMEOUT)?;
    ric.subscribe(scenario.xapp.report_period_ms)?;
    let mut gnb = Gnb { mac, report_period_ms: None, controls_applied: 0, controls_rejected: 0 };
    session.dispatch_ready(&mut gnb)?;
    let peer = InProcessRic { session: ric, runtime };
    simulate(scenario, out_dir, session, gnb, peer, started, "in_process")
}

/// gNB half of a two-process run: connects to a RIC already listening and
/// waits for its subscription before starting the clock.
pub(crate) fn run_connected<T: Transport>(
    scenario: &Scenario,
    out_dir: &Path,
    transport: T,
    started: Instant,
) -> Result<RunReport, RunError> {
    let mac = build_mac(scenario)?;
    let (mut session, _) = GnbSession::connect(transport, setup_request(&mac), DEFAULT_HANDSHAKE_TIMEOUT)?;
    let mut gnb = Gnb { mac, report_period_ms: None, controls_applied: 0, controls_rejected: 0 };
    let deadline = Instant::now() + DEFAULT_HANDSHAKE_TIMEOUT;
    while gnb.report_period_ms.is_none() {
        if Instant::now() >= deadline {
            return Err(E2Error::Timeout(DEFAULT_HANDSHAKE_TIMEOUT, "RIC subscription").into());
        }
        session.dispatch_one(&mut gnb, Some(deadline - Instant::now()))?;
    }
    simulate(scenario, out_dir, session, gnb, RemoteRic(std::marker::PhantomData), started, "tcp")
}

/// Creates `out_dir` and writes the normalized scenario into it.
pub(crate) fn prepare_out_dir(scenario: &Scenario, out_dir: &Path) -> Result<(), RunError> {
    std::fs::create_dir_all(out_dir)?;
    std::fs::write(out_dir.join(SCENARIO_JSON), scenario.to_json().to_canonical() + "\n")?;
    Ok(())
}

#[derive(Default, Clone, Copy)]
struct FlowAcc {
    delivered: u64,
    tb: u64,
    failed: u64,
    prbs: u64,
}

fn sd_field(s: Snssai) -> String {
    s.sd().map(|v| v.to_string()).unwrap_or_default()
}

fn csv_writer(path: &Path, header: &[&str]) -> Result<csv::Writer<BufWriter<File>>, RunError> {
    let mut w = csv::Writer::from_writer(BufWriter::new(File::create(path)?));
    w.write_record(header)?;
    Ok(w)
}

fn simulate<P: RicPeer>(
    scenario: &Scenario,
    out_dir: &Path,
    mut session: GnbSession<P::T>,
    mut gnb: Gnb,
    mut peer: P,
    started: Instant,
    mode: &str,
) -> Result<RunReport, RunError> {
    let numerology = scenario.numerology;
    let slot_s = numerology.slot_duration_s();
    let slots_per_ms = u64::from(numerology.slots_per_ms());
    let slots_per_frame = 10 * slots_per_ms;
    let total_slots = scenario.total_slots();
    let pin = gnb.mac.cell().link.full_buffer_pin(gnb.mac.total_prbs());
    let mut bler = match scenario.bler_mode {
        BlerMode::Deterministic => BlerModel::Deterministic,
        BlerMode::Stochastic => BlerModel::stochastic(scenario.seed),
    };
    let mut gnb_plan: XappPlan = scenario.xapp_plan();

    let mut prbs_csv = csv_writer(&out_dir.join(PRBS_CSV), &PRBS_HEADER)?;
    let mut thp_csv = csv_writer(&out_dir.join(THROUGHPUT_CSV), &THROUGHPUT_HEADER)?;
    let mut slots_csv = csv_writer(&out_dir.join(SLOTS_CSV), &SLOTS_HEADER)?;

    let event_slots: Vec<u64> = scenario.timeline.iter().map(|e| scenario.event_slot(e.t_s)).collect();
    let mut next_event = 0;
    let mut applied_events = Vec::new();
    let mut frame_used: BTreeMap<Snssai, u64> = gnb.mac.slices().iter().map(|s| (s.snssai(), 0)).collect();
    let mut acc: BTreeMap<FlowKey, FlowAcc> = BTreeMap::new();
    let mut served_bits: BTreeMap<FlowKey, u64> = BTreeMap::new();
    let (mut frames, mut indications) = (0u64, 0u64);

    for k in 0..total_slots {
        while next_event < scenario.timeline.len() && event_slots[next_event] <= k {
            let e = &scenario.timeline[next_event];
            apply_event(&mut gnb.mac, &e.action).map_err(|source| RunError::Event {
                t_s: e.t_s,
                action: e.action.name(),
                source,
            })?;
            applied_events.push((e.t_s, k, e.action.name()));
            next_event += 1;
        }

        let now_s = k as f64 * slot_s;
        for ue in gnb.mac.ues_mut() {
            step_traffic(&mut ue.sessions, now_s, slot_s, pin);
        }
        let alloc = gnb.mac.schedule(k)?;
        for g in &alloc.grants {
            let target = gnb.mac.ues().iter().find(|u| u.ue_id == g.ue_id).map_or(0.0, |u| u.target_bler);
            let out = bler.apply(g.tb_bytes, target);
            let flow = gnb.mac.flow_mut(g.key()).expect("grant for live flow");
            flow.backlog_bytes = flow.backlog_bytes.saturating_sub(out.delivered);
            let a = acc.entry(g.key()).or_default();
            a.delivered += out.delivered;
            a.tb += g.tb_bytes;
            a.failed += out.requeued;
            a.prbs += u64::from(g.prbs);
            *served_bits.entry(g.key()).or_default() += out.delivered * 8;
        }
        gnb.mac.update_pf(&alloc);

        for u in &alloc.slices {
            let s = u.budget.snssai;
            slots_csv.write_record([
                k.to_string(),
                s.sst().to_string(),
                sd_field(s),
                u.budget.granted_prbs.to_string(),
                u.used_prbs.to_string(),
                u.budget.dedicated_prbs.to_string(),
                u.cap_prbs.to_string(),
                u.guarantee_prbs.to_string(),
                u.demand_prbs.to_string(),
            ])?;
            *frame_used.entry(s).or_default() += u64::from(u.used_prbs);
        }

        let end = k + 1;
        if end % slots_per_frame == 0 {
            let frame_ms = (end - slots_per_frame) / slots_per_ms;
            for (s, used) in frame_used.iter_mut() {
                let mean = quantize(*used as f64 / slots_per_frame as f64);
                prbs_csv.write_record([frame_ms.to_string(), s.sst().to_string(), sd_field(*s), format_real(mean)])?;
                *used = 0;
            }
            frames += 1;
        }

        let Some(period_ms) = gnb.report_period_ms else { continue };
        let report_slots = u64::from(period_ms) * slots_per_ms;
        if end % report_slots != 0 {
            continue;
        }
        let ts = end / slots_per_ms;
        let period_s = f64::from(period_ms) / 1000.0;
        let mut records = Vec::new();
        for ue in gnb.mac.ues() {
            for f in &ue.sessions {
                let a = acc.get(&f.key()).copied().unwrap_or_default();
                let thp = quantize(a.delivered as f64 * 8.0 / period_s);
                let bler_measured = if a.tb == 0 { 0.0 } else { quantize(a.failed as f64 / a.tb as f64) };
                thp_csv.write_record([
                    ts.to_string(),
                    ue.ue_id.to_string(),
                    f.pdu_id.to_string(),
                    f.snssai.sst().to_string(),
                    sd_field(f.snssai),
                    format_real(thp),
                ])?;
                records.push(KpmRecord {
                    timestamp_ms: ts,
                    rnti: ue.rnti,
                    snssai: f.snssai,
                    pdu_id: f.pdu_id,
                    mcs: ue.mcs,
                    bler: bler_measured,
                    dl_thp_bps: thp,
                    dl_prbs: a.prbs,
                });
            }
        }
        acc.clear();
        if records.is_empty() {
            continue;
        }
        session.send_indication(RicIndicationBody { ran_node_id: RAN_NODE_ID.into(), records })?;
        indications += 1;
        let (_, fires) = gnb_plan.advance(ts);
        peer.pump(&mut session, &mut gnb, u64::from(fires))?;
    }

    let control_log = peer.finish(session, &mut gnb)?;
    prbs_csv.flush()?;
    thp_csv.flush()?;
    slots_csv.flush()?;
    let mut artifacts: Vec<PathBuf> =
        [SCENARIO_JSON, PRBS_CSV, THROUGHPUT_CSV, SLOTS_CSV].iter().map(|f| out_dir.join(f)).collect();
    if let Some(log) = &control_log {
        log.save(&out_dir.join(CONTROL_LOG_CSV))?;
        artifacts.push(out_dir.join(CONTROL_LOG_CSV));
    }
    let report = RunReport {
        out_dir: out_dir.to_path_buf(),
        artifacts,
        slots: total_slots,
        frames,
        indications,
        controls_applied: gnb.controls_applied,
        controls_rejected: gnb.controls_rejected,
        served_bits,
        control_log,
        wall_time: started.elapsed(),
    };
    write_run_json(scenario, &report, &applied_events, mode)?;
    Ok(report)
}

fn apply_event(mac: &mut MacScheduler, action: &Action) -> Result<(), SchedulerError> {
    match *action {
        Action::EstablishPdu { ue_id, pdu_id, snssai, traffic } => mac.establish_pdu(ue_id, pdu_id, snssai, traffic),
        Action::ReleasePdu { ue_id, pdu_id } => mac.release_pdu(ue_id, pdu_id).map(|_| ()),
        Action::SetTraffic { ue_id, pdu_id, traffic } => mac.set_traffic(ue_id, pdu_id, traffic),
        Action::SetPolicy { snssai, policy } => mac.apply_rrm_policy(snssai, policy),
        // the RIC follows these through its own copy of the timeline
        Action::EnableXapp | Action::DisableXapp => Ok(()),
    }
}

fn write_run_json(
    scenario: &Scenario,
    r: &RunReport,
    events: &[(f64, u64, &'static str)],
    mode: &str,
) -> Result<(), RunError> {
    let served: Vec<Json> = r
        .served_bits
        .iter()
        .map(|(k, bits)| Json::object().field("ue_id", k.ue_id).field("pdu_id", k.pdu_id).field("bits", *bits).build())
        .collect();
    let events: Vec<Json> = events
        .iter()
        .map(|&(t, slot, a)| Json::object().field("t_s", t).field("slot", slot).field("action", a).build())
        .collect();
    let doc = Json::object()
        .field("scenario", scenario.name.as_str())
        .field("seed", scenario.seed)
        .field("mode", mode)
        .field("slots", r.slots)
        .field("frames", r.frames)
        .field("indications", r.indications)
        .field("controls_applied", r.controls_applied)
        .field("controls_rejected", r.controls_rejected)
        .field("events", events)
        .field("served_bits", served)
        .build();
    let mut f = File::create(r.out_dir.join(RUN_JSON))?;
    writeln!(f, "{}", doc.to_canonical())?;
    Ok(())
}
