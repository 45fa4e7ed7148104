//! RIC event loop state: KPM ingestion, slicing ticks on the indication
//! clock and the control log.

use std::collections::BTreeMap;
use std::io::Write;
use std::path::Path;

use crate::e2::{ControlOutcome, RicControlBody, RicHandler, RicIndicationBody, SetupRequest, SetupResponse};
use crate::model::{RrmPolicyRatio, Snssai};

use super::store::{KpmStore, StoreError};
use super::xapp::{slicing_xapp_tick, XappError, XappPlan};

pub const CONTROL_LOG_HEADER: [&str; 6] = ["timestamp_ms", "snssai", "ded", "min", "max", "outcome"];

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum LoggedOutcome {
    Pending,
    Ack,
    /// Violation codes reported by the gNB.
    Failure(Vec<String>),
}

impl LoggedOutcome {
    pub fn as_field(&self) -> String {
        match self {
            LoggedOutcome::Pending => "pending".into(),
            LoggedOutcome::Ack => "ack".into(),
            LoggedOutcome::Failure(codes) => format!("failure:{}", codes.join(";")),
        }
    }
}

/// One policy entry of one control request.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ControlLogRow {
    pub timestamp_ms: u64,
    pub snssai: Snssai,
    pub policy: RrmPolicyRatio,
    pub outcome: LoggedOutcome,
}

#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct ControlLog {
    rows: Vec<ControlLogRow>,
    /// txn -> row range of that request
    by_txn: BTreeMap<u64, (usize, usize)>,
}

impl ControlLog {
    pub fn rows(&self) -> &[ControlLogRow] {
        &self.rows
    }

    /// Number of control requests logged.
    pub fn messages(&self) -> usize {
        self.by_txn.len()
    }

    pub fn record_sent(&mut self, txn: u64, timestamp_ms: u64, body: &RicControlBody) {
        let start = self.rows.len();
        self.rows.extend(body.entries.iter().map(|&(snssai, policy)| ControlLogRow {
            timestamp_ms,
            snssai,
            policy,
            outcome: LoggedOutcome::Pending,
        }));
        self.by_txn.insert(txn, (start, self.rows.len()));
    }

    pub fn record_outcome(&mut self, txn: u64, outcome: &ControlOutcome) {
        let Some(&(a, b)) = self.by_txn.get(&txn) else { return };
        let logged = match outcome {
            ControlOutcome::Ack => LoggedOutcome::Ack,
            ControlOutcome::Failure(v) => {
                let mut codes: Vec<String> = v.iter().map(|v| v.code.as_str().to_string()).collect();
                codes.dedup();
                LoggedOutcome::Failure(codes)
            }
        };
        for row in &mut self.rows[a..b] {
            row.outcome = logged.clone();
        }
    }

    /// `(timestamp, slice, policy)` of every acknowledged entry.
    pub fn policy_sequence(&self) -> Vec<(u64, Snssai, RrmPolicyRatio)> {
        self.rows.iter().filter(|r| r.outcome == LoggedOutcome::Ack).map(|r| (r.timestamp_ms, r.snssai, r.policy)).collect()
    }

    pub fn write_csv(&self, w: impl Write) -> csv::Result<()> {
        let mut out = csv::Writer::from_writer(w);
        out.write_record(CONTROL_LOG_HEADER)?;
        for r in &self.rows {
            out.write_record([
                r.timestamp_ms.to_string(),
                r.snssai.to_string(),
                r.policy.dedicated_pct.to_string(),
                r.policy.min_pct.to_string(),
                r.policy.max_pct.to_string(),
                r.outcome.as_field(),
            ])?;
        }
        out.flush()?;
        Ok(())
    }

    pub fn save(&self, path: &Path) -> csv::Result<()> {
        self.write_csv(std::fs::File::create(path)?)
    }
}

/// RIC side of a session: hosts the KPM xApp (store ingestion) and the
/// slicing xApp (ticks driven by [`XappPlan`]).
#[derive(Debug, Clone)]
pub struct RicRuntime {
    ric_id: String,
    ran_node_id: String,
    store: KpmStore,
    plan: XappPlan,
    /// The RIC's view of each slice's policy.
    slices: BTreeMap<Snssai, RrmPolicyRatio>,
    clock_ms: u64,
    in_flight: BTreeMap<u64, RicControlBody>,
    log: ControlLog,
    rejected_records: Vec<StoreError>,
    xapp_errors: Vec<(u64, XappError)>,
    report_period_ms: Option<u32>,
}

impl RicRuntime {
    pub fn new(ric_id: impl Into<String>, store: KpmStore, plan: XappPlan) -> Self {
        Self {
            ric_id: ric_id.into(),
            ran_node_id: String::new(),
            store,
            plan,
            slices: BTreeMap::new(),
            clock_ms: 0,
            in_flight: BTreeMap::new(),
            log: ControlLog::default(),
            rejected_records: Vec::new(),
            xapp_errors: Vec::new(),
            report_period_ms: None,
        }
    }

    pub fn clock_ms(&self) -> u64 {
        self.clock_ms
    }

    pub fn store(&self) -> &KpmStore {
        &self.store
    }

    pub fn slices(&self) -> &BTreeMap<Snssai, RrmPolicyRatio> {
        &self.slices
    }

    pub fn control_log(&self) -> &ControlLog {
        &self.log
    }

    pub fn rejected_records(&self) -> &[StoreError] {
        &self.rejected_records
    }

    pub fn xapp_errors(&self) -> &[(u64, XappError)] {
        &self.xapp_errors
    }

    pub fn report_period_ms(&self) -> Option<u32> {
        self.report_period_ms
    }

    pub fn into_control_log(self) -> ControlLog {
        self.log
    }
}

impl RicHandler for RicRuntime {
    fn on_setup(&mut self, req: &SetupRequest) -> SetupResponse {
        self.ran_node_id = req.ran_node_id.clone();
        self.slices = req.slices.iter().map(|s| (s.snssai, s.policy)).collect();
        SetupResponse { ric_id: self.ric_id.clone() }
    }

    fn on_subscribed(&mut self, resp: &crate::e2::SubscriptionResponse) {
        self.report_period_ms = Some(resp.report_period_ms);
    }

    fn on_indication(&mut self, body: &RicIndicationBody) -> Vec<RicControlBody> {
        self.rejected_records.extend(self.store.ingest(&body.records));
        let Some(now) = body.records.iter().map(|r| r.timestamp_ms).max() else { return Vec::new() };
        self.clock_ms = self.clock_ms.max(now);
        let (updates, fire) = self.plan.advance(self.clock_ms);
        for (s, p) in updates {
            self.slices.insert(s, p);
        }
        if !fire {
            return Vec::new();
        }
        match slicing_xapp_tick(&self.store, &self.slices, self.plan.config(), self.clock_ms, &self.ran_node_id) {
            Ok(c) => vec![c],
            Err(e) => {
                self.xapp_errors.push((self.clock_ms, e));
                Vec::new()
            }
        }
    }

    fn on_control_sent(&mut self, txn: u64, body: &RicControlBody) {
        self.log.record_sent(txn, self.clock_ms, body);
        self.in_flight.insert(txn, body.clone());
    }

    fn on_control_outcome(&mut self, txn: u64, outcome: ControlOutcome) {
        self.log.record_outcome(txn, &outcome);
        if let (Some(body), ControlOutcome::Ack) = (self.in_flight.remove(&txn), &outcome) {
            self.slices.extend(body.entries.iter().copied());
        }
    }
}
