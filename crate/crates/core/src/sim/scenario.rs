//! Scenario documents: one JSON object describing the cell, its UEs, a
//! timeline of events and the RIC configuration.
//!
//! Input may use any whitespace and key order; [`Scenario::to_json`] gives the
//! normalized form with every default filled in.

use std::fmt;
use std::path::Path;

use crate::e2::codec::{policy_from, policy_json, slice_from, slice_json, snssai_from, snssai_json};
use crate::e2::json::{as_real, as_str, line_col, parse, Fields, Json, JsonError, Node};
use crate::mac::DEFAULT_PF_ALPHA;
use crate::model::{
    validate_cell_config, PduSession, RrmPolicyRatio, SliceConfig, Snssai, UeContext, Violation,
};
use crate::phy::{Numerology, TrafficKind, TrafficProfile, MAX_MCS};
use crate::ric::{RicSchedule, SlicingXappConfig, XappPlan, DEFAULT_RETENTION_S};

pub const DEFAULT_REPORT_PERIOD_MS: u32 = 500;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum BlerMode {
    #[default]
    Deterministic,
    Stochastic,
}

impl BlerMode {
    pub fn as_str(&self) -> &'static str {
        match self {
            BlerMode::Deterministic => "deterministic",
            BlerMode::Stochastic => "stochastic",
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum Action {
    EstablishPdu { ue_id: u32, pdu_id: u8, snssai: Snssai, traffic: TrafficProfile },
    ReleasePdu { ue_id: u32, pdu_id: u8 },
    SetTraffic { ue_id: u32, pdu_id: u8, traffic: TrafficProfile },
    SetPolicy { snssai: Snssai, policy: RrmPolicyRatio },
    EnableXapp,
    DisableXapp,
}

impl Action {
    pub fn name(&self) -> &'static str {
        match self {
            Action::EstablishPdu { .. } => "establish_pdu",
            Action::ReleasePdu { .. } => "release_pdu",
            Action::SetTraffic { .. } => "set_traffic",
            Action::SetPolicy { .. } => "set_policy",
            Action::EnableXapp => "enable_xapp",
            Action::DisableXapp => "disable_xapp",
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct TimedEvent {
    pub t_s: f64,
    pub action: Action,
}

/// RIC-side settings: the KPM subscription and the slicing xApp.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RicSettings {
    pub slicing: SlicingXappConfig,
    pub report_period_ms: u32,
    pub retention_s: f64,
}

impl Default for RicSettings {
    fn default() -> Self {
        Self {
            slicing: SlicingXappConfig { enabled: false, ..SlicingXappConfig::default() },
            report_period_ms: DEFAULT_REPORT_PERIOD_MS,
            retention_s: DEFAULT_RETENTION_S,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Scenario {
    pub name: String,
    pub numerology: Numerology,
    pub duration_s: f64,
    pub slices: Vec<SliceConfig>,
    pub ues: Vec<UeContext>,
    /// Sorted by time; events with equal times keep their document order.
    pub timeline: Vec<TimedEvent>,
    pub xapp: RicSettings,
    pub seed: u64,
    pub pf_alpha: f64,
    pub bler_mode: BlerMode,
}

/// One reason a scenario is rejected.
#[derive(Debug, Clone, PartialEq)]
pub enum Issue {
    /// Cell configuration violation, initially (`None`) or after the timeline
    /// event at the given time.
    Config { at_s: Option<f64>, violation: Violation },
    Event { index: usize, reason: String },
    Setting(String),
}

impl fmt::Display for Issue {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Issue::Config { at_s: None, violation } => write!(f, "{violation}"),
            Issue::Config { at_s: Some(t), violation } => write!(f, "at t={t} s: {violation}"),
            Issue::Event { index, reason } => write!(f, "timeline[{index}]: {reason}"),
            Issue::Setting(s) => f.write_str(s),
        }
    }
}

#[derive(Debug, thiserror::Error)]
pub enum ScenarioError {
    #[error("parse error at line {line}, column {column} (byte {offset}): {reason}")]
    Parse { line: usize, column: usize, offset: usize, reason: String },
    #[error("invalid scenario: {}", .0.iter().map(ToString::to_string).collect::<Vec<_>>().join("; "))]
    Validation(Vec<Issue>),
    #[error("cannot read scenario: {0}")]
    Io(#[from] std::io::Error),
}

impl ScenarioError {
    pub fn issues(&self) -> &[Issue] {
        match self {
            ScenarioError::Validation(v) => v,
            _ => &[],
        }
    }
}

pub fn load_scenario(path: &Path) -> Result<Scenario, ScenarioError> {
    Scenario::parse(&std::fs::read(path)?)
}

impl Scenario {
    /// Parses and cross-validates a scenario document.
    pub fn parse(input: &[u8]) -> Result<Self, ScenarioError> {
        let to_parse_error = |e: JsonError| {
            let (line, column) = line_col(input, e.offset);
            ScenarioError::Parse { line, column, offset: e.offset, reason: e.reason }
        };
        let root = parse(input).map_err(to_parse_error)?;
        let mut s = from_node(&root).map_err(to_parse_error)?;
        s.timeline.sort_by(|a, b| a.t_s.total_cmp(&b.t_s));
        let issues = s.validate();
        if !issues.is_empty() {
            return Err(ScenarioError::Validation(issues));
        }
        Ok(s)
    }

    pub fn slot_s(&self) -> f64 {
        self.numerology.slot_duration_s()
    }

    pub fn total_slots(&self) -> u64 {
        (self.duration_s / self.slot_s()).round() as u64
    }

    /// First slot boundary at or after `t_s`.
    pub fn event_slot(&self, t_s: f64) -> u64 {
        (t_s / self.slot_s() - 1e-9).ceil().max(0.0) as u64
    }

    /// Instant, in whole ms rounded down, at which an event takes effect.
    /// Integer indication timestamps compare against it exactly.
    pub fn event_ms(&self, t_s: f64) -> u64 {
        (self.event_slot(t_s) as f64 * self.numerology.slot_duration_ms()).floor() as u64
    }

    /// Timeline entries the RIC mirrors to stay consistent with the gNB.
    pub fn ric_schedule(&self) -> RicSchedule {
        let mut sched = RicSchedule::default();
        for e in &self.timeline {
            let t = self.event_ms(e.t_s);
            match e.action {
                Action::EnableXapp => sched.toggles.push((t, true)),
                Action::DisableXapp => sched.toggles.push((t, false)),
                Action::SetPolicy { snssai, policy } => sched.policies.push((t, snssai, policy)),
                _ => {}
            }
        }
        sched
    }

    pub fn xapp_plan(&self) -> XappPlan {
        XappPlan::new(self.xapp.slicing, self.ric_schedule(), self.slices.len())
    }

    pub fn xapp_ever_enabled(&self) -> bool {
        self.xapp.slicing.enabled || self.timeline.iter().any(|e| e.action == Action::EnableXapp)
    }

    /// All issues found; empty means the scenario can run. The timeline is
    /// replayed against a copy of the cell so every event is checked in the
    /// state it will meet.
    pub fn validate(&self) -> Vec<Issue> {
        let mut issues = Vec::new();
        if !(self.duration_s.is_finite() && self.duration_s > 0.0) {
            issues.push(Issue::Setting(format!("duration_s must be > 0, got {}", self.duration_s)));
        }
        if !(self.pf_alpha > 0.0 && self.pf_alpha < 1.0) {
            issues.push(Issue::Setting(format!("pf_alpha must lie in (0, 1), got {}", self.pf_alpha)));
        }
        if self.xapp.report_period_ms == 0 {
            issues.push(Issue::Setting("report_period_ms must be > 0".into()));
        }
        if !(self.xapp.retention_s > 0.0) {
            issues.push(Issue::Setting("retention_s must be > 0".into()));
        }
        let mut slices = self.slices.clone();
        let mut ues = self.ues.clone();
        for ue in &ues {
            for f in &ue.sessions {
                if let Err(e) = f.traffic.validate() {
                    issues.push(Issue::Setting(format!("ue {} pdu {}: {e}", ue.ue_id, f.pdu_id)));
                }
            }
        }
        issues.extend(validate_cell_config(&slices, &ues).into_iter().map(|v| Issue::Config { at_s: None, violation: v }));

        let ever_enabled = self.xapp_ever_enabled();
        if ever_enabled {
            if let Err(e) = self.xapp.slicing.validate() {
                issues.push(Issue::Setting(e.to_string()));
            }
            for s in &slices {
                if let Err(e) = self.xapp.slicing.check_against_min(s.snssai, s.policy.min_pct) {
                    issues.push(Issue::Setting(e.to_string()));
                }
            }
        }

        for (index, e) in self.timeline.iter().enumerate() {
            let bad = |reason: String| Issue::Event { index, reason };
            if !(e.t_s.is_finite() && e.t_s >= 0.0 && e.t_s <= self.duration_s) {
                issues.push(bad(format!("t_s {} outside [0, {}]", e.t_s, self.duration_s)));
                continue;
            }
            let flow_exists =
                |ues: &[UeContext], u: u32, p: u8| ues.iter().any(|x| x.ue_id == u && x.sessions.iter().any(|s| s.pdu_id == p));
            match &e.action {
                Action::EstablishPdu { ue_id, pdu_id, snssai, traffic } => {
                    if let Err(err) = traffic.validate() {
                        issues.push(bad(err.to_string()));
                    }
                    match ues.iter_mut().find(|u| u.ue_id == *ue_id) {
                        Some(u) => u.sessions.push(PduSession::new(*ue_id, *pdu_id, *snssai, *traffic)),
                        None => {
                            issues.push(bad(format!("establish_pdu for undeclared ue {ue_id}")));
                            continue;
                        }
                    }
                }
                Action::ReleasePdu { ue_id, pdu_id } => {
                    if !flow_exists(&ues, *ue_id, *pdu_id) {
                        issues.push(bad(format!("release_pdu of unknown session ue {ue_id} pdu {pdu_id}")));
                        continue;
                    }
                    for u in ues.iter_mut().filter(|u| u.ue_id == *ue_id) {
                        u.sessions.retain(|s| s.pdu_id != *pdu_id);
                    }
                    continue;
                }
                Action::SetTraffic { ue_id, pdu_id, traffic } => {
                    if let Err(err) = traffic.validate() {
                        issues.push(bad(err.to_string()));
                    }
                    if !flow_exists(&ues, *ue_id, *pdu_id) {
                        issues.push(bad(format!("set_traffic on unknown session ue {ue_id} pdu {pdu_id}")));
                    }
                    continue;
                }
                Action::SetPolicy { snssai, policy } => {
                    let Some(s) = slices.iter_mut().find(|s| s.snssai == *snssai) else {
                        issues.push(bad(format!("set_policy on undeclared slice {snssai}")));
                        continue;
                    };
                    s.policy = *policy;
                    if ever_enabled {
                        if let Err(err) = self.xapp.slicing.check_against_min(*snssai, policy.min_pct) {
                            issues.push(bad(err.to_string()));
                        }
                    }
                }
                Action::EnableXapp | Action::DisableXapp => continue,
            }
            issues.extend(
                validate_cell_config(&slices, &ues)
                    .into_iter()
                    .map(|v| Issue::Config { at_s: Some(e.t_s), violation: v }),
            );
        }
        dedup_issues(issues)
    }

    /// Normalized document with all defaults present.
    pub fn to_json(&self) -> Json {
        let numerology = match self.numerology.preset_name() {
            Some(p) => Json::object().field("preset", p).build(),
            None => Json::object()
                .field("scs_khz", self.numerology.scs_khz())
                .field("total_prbs", self.numerology.total_prbs())
                .build(),
        };
        let x = &self.xapp;
        Json::object()
            .field("name", self.name.as_str())
            .field("numerology", numerology)
            .field("duration_s", self.duration_s)
            .field("slices", self.slices.iter().map(slice_json).collect::<Vec<_>>())
            .field("ues", self.ues.iter().map(ue_json).collect::<Vec<_>>())
            .field("timeline", self.timeline.iter().map(event_json).collect::<Vec<_>>())
            .field(
                "xapp",
                Json::object()
                    .field("enabled", x.slicing.enabled)
                    .field("control_period_s", x.slicing.control_period_s)
                    .field("window_s", x.slicing.window_s)
                    .field("low_max_pct", x.slicing.low_max_pct)
                    .field("high_max_pct", x.slicing.high_max_pct)
                    .field("report_period_ms", x.report_period_ms)
                    .field("retention_s", x.retention_s)
                    .build(),
            )
            .field("seed", self.seed)
            .field("pf_alpha", self.pf_alpha)
            .field("bler_mode", self.bler_mode.as_str())
            .build()
    }
}

fn dedup_issues(issues: Vec<Issue>) -> Vec<Issue> {
    let mut out: Vec<Issue> = Vec::with_capacity(issues.len());
    for i in issues {
        // a violation persisting across events is reported once, at its first appearance
        let repeat = match &i {
            Issue::Config { violation, .. } => out.iter().any(|o| matches!(o, Issue::Config { violation: v, .. } if v == violation)),
            _ => false,
        };
        if !repeat {
            out.push(i);
        }
    }
    out
}

fn traffic_json(t: &TrafficProfile) -> Json {
    let (kind, rate) = match t.kind {
        TrafficKind::FullBuffer => ("full_buffer", None),
        TrafficKind::Cbr { rate_bps } => ("cbr", Some(rate_bps)),
        TrafficKind::Off => ("off", None),
    };
    Json::object()
        .field("kind", kind)
        .opt("rate_bps", rate)
        .opt("start_s", t.start_s)
        .opt("stop_s", t.stop_s)
        .build()
}

fn ue_json(u: &UeContext) -> Json {
    let sessions: Vec<Json> = u
        .sessions
        .iter()
        .map(|s| {
            Json::object()
                .field("pdu_id", s.pdu_id)
                .field("snssai", snssai_json(s.snssai))
                .field("traffic", traffic_json(&s.traffic))
                .build()
        })
        .collect();
    Json::object()
        .field("ue_id", u.ue_id)
        .field("rnti", u.rnti)
        .field("mcs", u.mcs)
        .field("target_bler", u.target_bler)
        .field("sessions", sessions)
        .build()
}

fn event_json(e: &TimedEvent) -> Json {
    let b = Json::object().field("t_s", e.t_s).field("action", e.action.name());
    match &e.action {
        Action::EstablishPdu { ue_id, pdu_id, snssai, traffic } => b
            .field("ue_id", *ue_id)
            .field("pdu_id", *pdu_id)
            .field("snssai", snssai_json(*snssai))
            .field("traffic", traffic_json(traffic)),
        Action::ReleasePdu { ue_id, pdu_id } => b.field("ue_id", *ue_id).field("pdu_id", *pdu_id),
        Action::SetTraffic { ue_id, pdu_id, traffic } => {
            b.field("ue_id", *ue_id).field("pdu_id", *pdu_id).field("traffic", traffic_json(traffic))
        }
        Action::SetPolicy { snssai, policy } => b.field("snssai", snssai_json(*snssai)).field("policy", policy_json(*policy)),
        Action::EnableXapp | Action::DisableXapp => b,
    }
    .build()
}

fn err(n: &Node, reason: impl Into<String>) -> JsonError {
    JsonError { offset: n.offset, reason: reason.into() }
}

fn from_node(root: &Node) -> Result<Scenario, JsonError> {
    let f = Fields::of(root)?;
    f.only(&[
        "name", "numerology", "duration_s", "slices", "ues", "timeline", "xapp", "seed", "pf_alpha", "bler_mode",
    ])?;
    let numerology = numerology_from(f.req("numerology")?)?;
    let slices = f.array("slices")?.iter().map(slice_from).collect::<Result<Vec<_>, _>>()?;
    let ues = f.opt_array("ues")?.unwrap_or_default().iter().map(ue_from).collect::<Result<Vec<_>, _>>()?;
    let timeline =
        f.opt_array("timeline")?.unwrap_or_default().iter().map(event_from).collect::<Result<Vec<_>, _>>()?;
    let xapp = match f.get("xapp") {
        Some(n) => xapp_from(n)?,
        None => RicSettings::default(),
    };
    let bler_mode = match f.opt_str("bler_mode")? {
        None | Some("deterministic") => BlerMode::Deterministic,
        Some("stochastic") => BlerMode::Stochastic,
        Some(other) => return Err(err(f.req("bler_mode")?, format!("unknown bler_mode \"{other}\""))),
    };
    Ok(Scenario {
        name: f.opt_str("name")?.unwrap_or("unnamed").to_string(),
        numerology,
        duration_s: f.real("duration_s")?,
        slices,
        ues,
        timeline,
        xapp,
        seed: f.opt_uint("seed", u64::MAX)?.unwrap_or(0),
        pf_alpha: f.opt_real("pf_alpha")?.unwrap_or(DEFAULT_PF_ALPHA),
        bler_mode,
    })
}

fn numerology_from(n: &Node) -> Result<Numerology, JsonError> {
    let f = Fields::of(n)?;
    if let Some(p) = f.get("preset") {
        f.only(&["preset"])?;
        let name = as_str(p, "preset")?;
        return Numerology::preset(name).ok_or_else(|| err(p, format!("unknown numerology preset \"{name}\"")));
    }
    f.only(&["scs_khz", "total_prbs"])?;
    Numerology::new(f.uint("scs_khz", u64::from(u32::MAX))? as u32, f.uint("total_prbs", u64::from(u32::MAX))? as u32)
        .map_err(|e| err(n, e.to_string()))
}

fn traffic_from(n: &Node) -> Result<TrafficProfile, JsonError> {
    let f = Fields::of(n)?;
    f.only(&["kind", "rate_bps", "start_s", "stop_s"])?;
    let kind = match f.str("kind")? {
        "full_buffer" => TrafficKind::FullBuffer,
        "cbr" => TrafficKind::Cbr { rate_bps: f.real("rate_bps")? },
        "off" => TrafficKind::Off,
        other => return Err(err(f.req("kind")?, format!("unknown traffic kind \"{other}\""))),
    };
    if !matches!(kind, TrafficKind::Cbr { .. }) && f.get("rate_bps").is_some() {
        return Err(err(f.req("rate_bps")?, "rate_bps only applies to cbr traffic"));
    }
    Ok(TrafficProfile { kind, start_s: f.opt_real("start_s")?, stop_s: f.opt_real("stop_s")? })
}

fn ue_from(n: &Node) -> Result<UeContext, JsonError> {
    let f = Fields::of(n)?;
    f.only(&["ue_id", "rnti", "mcs", "target_bler", "sessions"])?;
    let ue_id = f.uint("ue_id", u64::from(u32::MAX))? as u32;
    let mut ue = UeContext::new(
        ue_id,
        f.uint("rnti", u64::from(u16::MAX))? as u16,
        f.uint("mcs", u64::from(MAX_MCS))? as u8,
        f.opt_real("target_bler")?.unwrap_or(0.0),
    );
    for s in f.opt_array("sessions")?.unwrap_or_default() {
        let sf = Fields::of(s)?;
        sf.only(&["pdu_id", "snssai", "traffic"])?;
        ue = ue.with_session(
            sf.uint("pdu_id", 255)? as u8,
            snssai_from(sf.req("snssai")?)?,
            match sf.get("traffic") {
                Some(t) => traffic_from(t)?,
                None => TrafficProfile::full_buffer(),
            },
        );
    }
    Ok(ue)
}

fn event_from(n: &Node) -> Result<TimedEvent, JsonError> {
    let f = Fields::of(n)?;
    let t_s = as_real(f.req("t_s")?, "t_s")?;
    let action_name = f.str("action")?;
    let ue_pdu = || -> Result<(u32, u8), JsonError> {
        Ok((f.uint("ue_id", u64::from(u32::MAX))? as u32, f.uint("pdu_id", 255)? as u8))
    };
    let action = match action_name {
        "establish_pdu" => {
            f.only(&["t_s", "action", "ue_id", "pdu_id", "snssai", "traffic"])?;
            let (ue_id, pdu_id) = ue_pdu()?;
            let traffic = match f.get("traffic") {
                Some(t) => traffic_from(t)?,
                None => TrafficProfile::full_buffer(),
            };
            Action::EstablishPdu { ue_id, pdu_id, snssai: snssai_from(f.req("snssai")?)?, traffic }
        }
        "release_pdu" => {
            f.only(&["t_s", "action", "ue_id", "pdu_id"])?;
            let (ue_id, pdu_id) = ue_pdu()?;
            Action::ReleasePdu { ue_id, pdu_id }
        }
        "set_traffic" => {
            f.only(&["t_s", "action", "ue_id", "pdu_id", "traffic"])?;
            let (ue_id, pdu_id) = ue_pdu()?;
            Action::SetTraffic { ue_id, pdu_id, traffic: traffic_from(f.req("traffic")?)? }
        }
        "set_policy" => {
            f.only(&["t_s", "action", "snssai", "policy"])?;
            Action::SetPolicy { snssai: snssai_from(f.req("snssai")?)?, policy: policy_from(f.req("policy")?)? }
        }
        "enable_xapp" => {
            f.only(&["t_s", "action"])?;
            Action::EnableXapp
        }
        "disable_xapp" => {
            f.only(&["t_s", "action"])?;
            Action::DisableXapp
        }
        other => return Err(err(f.req("action")?, format!("unknown action \"{other}\""))),
    };
    Ok(TimedEvent { t_s, action })
}

fn xapp_from(n: &Node) -> Result<RicSettings, JsonError> {
    let f = Fields::of(n)?;
    f.only(&[
        "enabled",
        "control_period_s",
        "window_s",
        "low_max_pct",
        "high_max_pct",
        "report_period_ms",
        "retention_s",
    ])?;
    let d = SlicingXappConfig::default();
    let pct = |k: &str, def: u8| -> Result<u8, JsonError> { Ok(f.opt_uint(k, 100)?.map_or(def, |v| v as u8)) };
    Ok(RicSettings {
        slicing: SlicingXappConfig {
            enabled: f.opt_bool("enabled")?.unwrap_or(true),
            control_period_s: f.opt_real("control_period_s")?.unwrap_or(d.control_period_s),
            window_s: f.opt_real("window_s")?.unwrap_or(d.window_s),
            low_max_pct: pct("low_max_pct", d.low_max_pct)?,
            high_max_pct: pct("high_max_pct", d.high_max_pct)?,
        },
        report_period_ms: f.opt_uint("report_period_ms", u64::from(u32::MAX))?.map_or(DEFAULT_REPORT_PERIOD_MS, |v| v as u32),
        retention_s: f.opt_real("retention_s")?.unwrap_or(DEFAULT_RETENTION_S),
    })
}
