//! Reading run artifacts back: invariant verification and windowed summaries.

use std::collections::BTreeMap;
use std::fmt;
use std::path::{Path, PathBuf};

use crate::e2::json::Json;
use crate::model::{FlowKey, Snssai};

use super::engine::{
    CONTROL_LOG_CSV, PRBS_CSV, PRBS_HEADER, SCENARIO_JSON, SLOTS_CSV, SLOTS_HEADER, THROUGHPUT_CSV, THROUGHPUT_HEADER,
};
use super::scenario::{load_scenario, Scenario, ScenarioError};

pub const REPORT_JSON: &str = "report.json";

/// Slack for comparing six-decimal CSV reals.
const REAL_TOL: f64 = 1e-6;

#[derive(Debug, thiserror::Error)]
pub enum ReportError {
    #[error(transparent)]
    Scenario(#[from] ScenarioError),
    #[error("{path}: {source}")]
    Csv { path: PathBuf, source: csv::Error },
    #[error("{path} line {line}: {reason}")]
    Format { path: PathBuf, line: u64, reason: String },
    #[error("i/o: {0}")]
    Io(#[from] std::io::Error),
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FrameRow {
    pub frame_ms: u64,
    pub snssai: Snssai,
    pub mean_prbs: f64,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ThroughputRow {
    pub t_ms: u64,
    pub flow: FlowKey,
    pub snssai: Snssai,
    pub bps: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct SlotRow {
    pub slot: u64,
    pub snssai: Snssai,
    pub granted: u32,
    pub used: u32,
    pub dedicated: u32,
    pub cap: u32,
    pub guarantee: u32,
    pub demand: u64,
}

struct Table {
    path: PathBuf,
    reader: csv::Reader<std::fs::File>,
}

impl Table {
    fn open(dir: &Path, name: &str, header: &[&str]) -> Result<Self, ReportError> {
        let path = dir.join(name);
        let mut reader =
            csv::Reader::from_path(&path).map_err(|source| ReportError::Csv { path: path.clone(), source })?;
        let got = reader.headers().map_err(|source| ReportError::Csv { path: path.clone(), source })?.clone();
        if got.iter().ne(header.iter().copied()) {
            return Err(ReportError::Format { path, line: 1, reason: format!("header {got:?}, expected {header:?}") });
        }
        Ok(Self { path, reader })
    }

    /// Calls `f` with each record's fields and line number.
    fn each(mut self, mut f: impl FnMut(&csv::StringRecord, &Field) -> Result<(), String>) -> Result<(), ReportError> {
        let mut rec = csv::StringRecord::new();
        loop {
            match self.reader.read_record(&mut rec) {
                Ok(false) => return Ok(()),
                Ok(true) => {
                    let line = rec.position().map_or(0, |p| p.line());
                    f(&rec, &Field).map_err(|reason| ReportError::Format { path: self.path.clone(), line, reason })?;
                }
                Err(source) => return Err(ReportError::Csv { path: self.path.clone(), source }),
            }
        }
    }
}

/// Field parsing helpers for [`Table::each`].
struct Field;

impl Field {
    fn num<T: std::str::FromStr>(&self, r: &csv::StringRecord, i: usize, name: &str) -> Result<T, String> {
        let raw = r.get(i).ok_or_else(|| format!("missing {name}"))?;
        raw.parse().map_err(|_| format!("bad {name} {raw:?}"))
    }

    fn real(&self, r: &csv::StringRecord, i: usize, name: &str) -> Result<f64, String> {
        let v: f64 = self.num(r, i, name)?;
        if v.is_finite() {
            Ok(v)
        } else {
            Err(format!("non-finite {name}"))
        }
    }

    fn snssai(&self, r: &csv::StringRecord, i: usize) -> Result<Snssai, String> {
        let sst: u8 = self.num(r, i, "sst")?;
        let sd = match r.get(i + 1) {
            Some("") | None => None,
            Some(_) => Some(self.num::<u32>(r, i + 1, "sd")?),
        };
        Snssai::new(sst, sd).map_err(|e| e.to_string())
    }
}

/// Artifacts of one run directory.
#[derive(Debug, Clone)]
pub struct Artifacts {
    pub dir: PathBuf,
    pub scenario: Scenario,
    pub frames: Vec<FrameRow>,
    pub throughput: Vec<ThroughputRow>,
}

impl Artifacts {
    pub fn load(dir: &Path) -> Result<Self, ReportError> {
        let scenario = load_scenario(&dir.join(SCENARIO_JSON))?;
        let mut frames = Vec::new();
        Table::open(dir, PRBS_CSV, &PRBS_HEADER)?.each(|r, f| {
            frames.push(FrameRow {
                frame_ms: f.num(r, 0, "frame_ms")?,
                snssai: f.snssai(r, 1)?,
                mean_prbs: f.real(r, 3, "mean_prbs")?,
            });
            Ok(())
        })?;
        let mut throughput = Vec::new();
        Table::open(dir, THROUGHPUT_CSV, &THROUGHPUT_HEADER)?.each(|r, f| {
            throughput.push(ThroughputRow {
                t_ms: f.num(r, 0, "t_ms")?,
                flow: FlowKey { ue_id: f.num(r, 1, "ue_id")?, pdu_id: f.num(r, 2, "pdu_id")? },
                snssai: f.snssai(r, 3)?,
                bps: f.real(r, 5, "bps")?,
            });
            Ok(())
        })?;
        Ok(Self { dir: dir.to_path_buf(), scenario, frames, throughput })
    }

    /// Means over frames starting in `[start_s, end_s)` and reports stamped in
    /// `(start_s, end_s]`.
    pub fn window(&self, start_s: f64, end_s: f64) -> Window {
        let (a, b) = ((start_s * 1000.0).round() as u64, (end_s * 1000.0).round() as u64);
        let mut slices: BTreeMap<Snssai, SliceStats> =
            self.scenario.slices.iter().map(|s| (s.snssai, SliceStats::default())).collect();
        let mut frame_counts: BTreeMap<Snssai, u64> = BTreeMap::new();
        for r in self.frames.iter().filter(|r| r.frame_ms >= a && r.frame_ms < b) {
            slices.entry(r.snssai).or_default().mean_prbs += r.mean_prbs;
            *frame_counts.entry(r.snssai).or_default() += 1;
        }
        for (s, n) in &frame_counts {
            slices.get_mut(s).expect("inserted above").mean_prbs /= *n as f64;
        }
        let mut slice_per_ts: BTreeMap<Snssai, BTreeMap<u64, f64>> = BTreeMap::new();
        let mut flows: BTreeMap<FlowKey, (f64, u64)> = BTreeMap::new();
        for r in self.throughput.iter().filter(|r| r.t_ms > a && r.t_ms <= b) {
            *slice_per_ts.entry(r.snssai).or_default().entry(r.t_ms).or_default() += r.bps;
            let e = flows.entry(r.flow).or_default();
            e.0 += r.bps;
            e.1 += 1;
        }
        // the denominator counts every report in the window, so a slice
        // without flows for part of it averages in zeros
        let reports: std::collections::BTreeSet<u64> =
            self.throughput.iter().filter(|r| r.t_ms > a && r.t_ms <= b).map(|r| r.t_ms).collect();
        for (s, per_ts) in slice_per_ts {
            slices.entry(s).or_default().mean_bps = per_ts.values().sum::<f64>() / reports.len() as f64;
        }
        Window {
            start_s,
            end_s,
            slices,
            flows: flows.into_iter().map(|(k, (sum, n))| (k, sum / n as f64)).collect(),
        }
    }

    pub fn total_prbs(&self) -> u32 {
        self.scenario.numerology.total_prbs()
    }
}

#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct SliceStats {
    pub mean_prbs: f64,
    pub mean_bps: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Window {
    pub start_s: f64,
    pub end_s: f64,
    pub slices: BTreeMap<Snssai, SliceStats>,
    pub flows: BTreeMap<FlowKey, f64>,
}

impl Window {
    pub fn share(&self, s: Snssai, total_prbs: u32) -> f64 {
        self.slices.get(&s).map_or(0.0, |x| x.mean_prbs) / f64::from(total_prbs)
    }

    fn to_json(&self) -> Json {
        let slices: Vec<Json> = self
            .slices
            .iter()
            .map(|(s, st)| {
                Json::object()
                    .field("snssai", crate::e2::codec::snssai_json(*s))
                    .field("mean_prbs", crate::e2::json::quantize(st.mean_prbs))
                    .field("mean_bps", crate::e2::json::quantize(st.mean_bps))
                    .build()
            })
            .collect();
        let flows: Vec<Json> = self
            .flows
            .iter()
            .map(|(k, bps)| {
                Json::object()
                    .field("ue_id", k.ue_id)
                    .field("pdu_id", k.pdu_id)
                    .field("mean_bps", crate::e2::json::quantize(*bps))
                    .build()
            })
            .collect();
        Json::object()
            .field("start_s", self.start_s)
            .field("end_s", self.end_s)
            .field("slices", slices)
            .field("flows", flows)
            .build()
    }
}

/// Result of re-checking the scheduler invariants from the CSV artifacts.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct VerifyReport {
    pub slots_checked: u64,
    pub frames_checked: u64,
    /// Slots where the guarantees of all slices with demand could not be met
    /// together; the guarantee check is skipped for those.
    pub oversubscribed_slots: u64,
    pub guarantee_violations: u64,
    pub violations: Vec<String>,
}

impl VerifyReport {
    pub fn is_clean(&self) -> bool {
        self.violations.is_empty()
    }
}

impl fmt::Display for VerifyReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        writeln!(
            f,
            "checked {} slots, {} frames ({} oversubscribed slots): {} violations",
            self.slots_checked,
            self.frames_checked,
            self.oversubscribed_slots,
            self.violations.len()
        )?;
        for v in self.violations.iter().take(20) {
            writeln!(f, "  {v}")?;
        }
        if self.violations.len() > 20 {
            writeln!(f, "  ... {} more", self.violations.len() - 20)?;
        }
        Ok(())
    }
}

/// Re-checks per slot: total granted and used PRBs within the cell, each
/// slice within its cap, used within granted, and saturated slices at or
/// above their guarantee. Per frame: `prbs.csv` means match the slot data,
/// stay within the frame's largest cap and sum to at most the cell.
pub fn verify(dir: &Path) -> Result<VerifyReport, ReportError> {
    let scenario = load_scenario(&dir.join(SCENARIO_JSON))?;
    let n = scenario.numerology.total_prbs();
    let slots_per_frame = 10 * u64::from(scenario.numerology.slots_per_ms());
    let mut rep = VerifyReport::default();

    let mut frame_used: BTreeMap<(u64, Snssai), (u64, u32)> = BTreeMap::new();
    let mut current: Vec<SlotRow> = Vec::new();
    let check_slot = |rows: &mut Vec<SlotRow>, rep: &mut VerifyReport| {
        if rows.is_empty() {
            return;
        }
        let slot = rows[0].slot;
        rep.slots_checked += 1;
        let granted: u32 = rows.iter().map(|r| r.granted).sum();
        let used: u32 = rows.iter().map(|r| r.used).sum();
        if granted > n {
            rep.violations.push(format!("slot {slot}: granted {granted} > {n} PRBs"));
        }
        if used > n {
            rep.violations.push(format!("slot {slot}: used {used} > {n} PRBs"));
        }
        let saturated = |r: &SlotRow| r.demand >= u64::from(r.guarantee) && r.guarantee > 0;
        let needed: u32 = rows.iter().map(|r| if saturated(r) { r.guarantee.max(r.dedicated) } else { r.dedicated }).sum();
        let feasible = needed <= n;
        if !feasible {
            rep.oversubscribed_slots += 1;
        }
        for r in rows.iter() {
            let s = r.snssai;
            if r.granted > r.cap.max(r.dedicated) {
                rep.violations.push(format!("slot {slot} slice {s}: granted {} > cap {}", r.granted, r.cap));
            }
            if r.used > r.granted {
                rep.violations.push(format!("slot {slot} slice {s}: used {} > granted {}", r.used, r.granted));
            }
            if r.granted < r.dedicated {
                rep.violations.push(format!("slot {slot} slice {s}: granted {} < dedicated {}", r.granted, r.dedicated));
            }
            if feasible && saturated(r) && r.used < r.guarantee {
                rep.guarantee_violations += 1;
                rep.violations.push(format!("slot {slot} slice {s}: used {} < guarantee {}", r.used, r.guarantee));
            }
        }
        rows.clear();
    };
    Table::open(dir, SLOTS_CSV, &SLOTS_HEADER)?.each(|r, f| {
        let row = SlotRow {
            slot: f.num(r, 0, "slot")?,
            snssai: f.snssai(r, 1)?,
            granted: f.num(r, 3, "granted")?,
            used: f.num(r, 4, "used")?,
            dedicated: f.num(r, 5, "dedicated")?,
            cap: f.num(r, 6, "cap")?,
            guarantee: f.num(r, 7, "guarantee")?,
            demand: f.num(r, 8, "demand")?,
        };
        if current.first().is_some_and(|c| c.slot != row.slot) {
            check_slot(&mut current, &mut rep);
        }
        let e = frame_used.entry((row.slot / slots_per_frame, row.snssai)).or_default();
        e.0 += u64::from(row.used);
        e.1 = e.1.max(row.cap.max(row.dedicated));
        current.push(row);
        Ok(())
    })?;
    check_slot(&mut current, &mut rep);

    let slots_per_ms = u64::from(scenario.numerology.slots_per_ms());
    let mut frame_sum: BTreeMap<u64, f64> = BTreeMap::new();
    let mut frame_errors = Vec::new();
    Table::open(dir, PRBS_CSV, &PRBS_HEADER)?.each(|r, f| {
        let frame_ms: u64 = f.num(r, 0, "frame_ms")?;
        let s = f.snssai(r, 1)?;
        let mean = f.real(r, 3, "mean_prbs")?;
        let frame = frame_ms * slots_per_ms / slots_per_frame;
        *frame_sum.entry(frame_ms).or_default() += mean;
        match frame_used.get(&(frame, s)) {
            None => frame_errors.push(format!("frame {frame_ms} ms slice {s}: no slot data")),
            Some(&(used, cap)) => {
                let expect = used as f64 / slots_per_frame as f64;
                if mean > f64::from(cap) + REAL_TOL {
                    frame_errors.push(format!("frame {frame_ms} ms slice {s}: mean {mean} > cap {cap}"));
                }
                if (mean - expect).abs() > REAL_TOL {
                    frame_errors.push(format!("frame {frame_ms} ms slice {s}: mean {mean} != slot data {expect}"));
                }
            }
        }
        Ok(())
    })?;
    rep.frames_checked = frame_sum.len() as u64;
    for (frame_ms, sum) in frame_sum {
        if sum > f64::from(n) + REAL_TOL {
            frame_errors.push(format!("frame {frame_ms} ms: slice means sum to {sum} > {n}"));
        }
    }
    rep.violations.extend(frame_errors);
    Ok(rep)
}

/// Windowed summary of a run plus its verification.
#[derive(Debug, Clone)]
pub struct RunSummary {
    pub scenario: String,
    pub total_prbs: u32,
    pub periods: Vec<Window>,
    pub steps: Vec<Window>,
    pub control_messages: usize,
    pub verify: VerifyReport,
}

impl RunSummary {
    pub fn to_json(&self) -> Json {
        Json::object()
            .field("scenario", self.scenario.as_str())
            .field("total_prbs", self.total_prbs)
            .field("control_periods", self.periods.iter().map(Window::to_json).collect::<Vec<_>>())
            .field("steps", self.steps.iter().map(Window::to_json).collect::<Vec<_>>())
            .field("control_messages", self.control_messages as u64)
            .field("slots_checked", self.verify.slots_checked)
            .field("guarantee_violations", self.verify.guarantee_violations)
            .field("invariant_violations", self.verify.violations.len() as u64)
            .build()
    }
}

impl fmt::Display for RunSummary {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        writeln!(f, "{} ({} PRBs), {} control messages", self.scenario, self.total_prbs, self.control_messages)?;
        for (title, windows) in [("control periods", &self.periods), ("timeline steps", &self.steps)] {
            writeln!(f, "{title}:")?;
            for w in windows {
                write!(f, "  {:>6.1}-{:<6.1}s", w.start_s, w.end_s)?;
                for (s, st) in &w.slices {
                    write!(f, "  [{s}] {:7.2} PRB {:9.3} Mbps", st.mean_prbs, st.mean_bps / 1e6)?;
                }
                writeln!(f)?;
            }
        }
        write!(f, "{}", self.verify)
    }
}

/// Builds the summary, writes `report.json` next to the artifacts and
/// returns it. Timeline steps are delimited by the distinct event times.
pub fn report(dir: &Path) -> Result<RunSummary, ReportError> {
    let art = Artifacts::load(dir)?;
    let s = &art.scenario;
    let period = s.xapp.slicing.control_period_s;
    let mut periods = Vec::new();
    let mut t = 0.0;
    while t < s.duration_s - 1e-9 {
        let end = (t + period).min(s.duration_s);
        periods.push(art.window(t, end));
        t = end;
    }
    let mut cuts: Vec<f64> = vec![0.0];
    for e in &s.timeline {
        if e.t_s > 0.0 && e.t_s < s.duration_s && cuts.last().is_some_and(|&c| e.t_s > c) {
            cuts.push(e.t_s);
        }
    }
    cuts.push(s.duration_s);
    let steps = cuts.windows(2).map(|w| art.window(w[0], w[1])).collect();
    let control_messages = count_control_messages(&dir.join(CONTROL_LOG_CSV))?;
    let summary = RunSummary {
        scenario: s.name.clone(),
        total_prbs: art.total_prbs(),
        periods,
        steps,
        control_messages,
        verify: verify(dir)?,
    };
    std::fs::write(dir.join(REPORT_JSON), summary.to_json().to_canonical() + "\n")?;
    Ok(summary)
}

/// Distinct control requests in a control log: rows sharing a timestamp
/// belong to one request.
fn count_control_messages(path: &Path) -> Result<usize, ReportError> {
    if !path.exists() {
        return Ok(0);
    }
    let mut r = csv::Reader::from_path(path).map_err(|source| ReportError::Csv { path: path.to_path_buf(), source })?;
    let mut stamps = std::collections::BTreeSet::new();
    for rec in r.records() {
        let rec = rec.map_err(|source| ReportError::Csv { path: path.to_path_buf(), source })?;
        stamps.insert(rec.get(0).unwrap_or_default().to_string());
    }
    Ok(stamps.len())
}
