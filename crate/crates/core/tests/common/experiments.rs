//! Checks of the built-in experiments, computed straight from the CSV
//! artifacts rather than through the crate's report module.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};
use std::process::Command;

use slicesim::phy::Numerology;
use slicesim::sim::{self, RunReport};

pub const SLICE_1: (u8, u32) = (1, 1);
pub const SLICE_2: (u8, u32) = (1, 2);

pub fn bin() -> &'static str {
    env!("CARGO_BIN_EXE_slicesim")
}

fn records(path: &Path) -> Vec<csv::StringRecord> {
    let mut r = csv::Reader::from_path(path).unwrap_or_else(|e| panic!("{}: {e}", path.display()));
    r.records().map(|x| x.unwrap()).collect()
}

fn slice_of(r: &csv::StringRecord, sst: usize) -> (u8, u32) {
    (r[sst].parse().unwrap(), r[sst + 1].parse().unwrap_or(u32::MAX))
}

/// Mean per-frame PRBs of each slice over frames starting in `[a_ms, b_ms)`.
pub fn mean_prbs(dir: &Path, a_ms: u64, b_ms: u64) -> BTreeMap<(u8, u32), f64> {
    let mut acc: BTreeMap<(u8, u32), (f64, u32)> = BTreeMap::new();
    for r in records(&dir.join("prbs.csv")) {
        let t: u64 = r[0].parse().unwrap();
        if t >= a_ms && t < b_ms {
            let e = acc.entry(slice_of(&r, 1)).or_default();
            e.0 += r[3].parse::<f64>().unwrap();
            e.1 += 1;
        }
    }
    acc.into_iter().map(|(k, (s, n))| (k, s / f64::from(n))).collect()
}

/// Per-report throughput rows: `(t_ms, ue_id, pdu_id, slice, bps)`.
pub fn throughput(dir: &Path) -> Vec<(u64, u32, u8, (u8, u32), f64)> {
    records(&dir.join("throughput.csv"))
        .iter()
        .map(|r| (r[0].parse().unwrap(), r[1].parse().unwrap(), r[2].parse().unwrap(), slice_of(r, 3), r[5].parse().unwrap()))
        .collect()
}

/// Mean over reports stamped in `(a_ms, b_ms]` of the slice's summed flow
/// throughput.
pub fn slice_bps(dir: &Path, slice: (u8, u32), a_ms: u64, b_ms: u64) -> f64 {
    let mut per_ts: BTreeMap<u64, f64> = BTreeMap::new();
    for (t, _, _, s, bps) in throughput(dir) {
        if t > a_ms && t <= b_ms {
            *per_ts.entry(t).or_default() += if s == slice { bps } else { 0.0 };
        }
    }
    per_ts.values().sum::<f64>() / per_ts.len().max(1) as f64
}

pub fn flow_bps(dir: &Path, ue: u32, pdu: u8, a_ms: u64, b_ms: u64) -> f64 {
    let v: Vec<f64> =
        throughput(dir).into_iter().filter(|r| r.1 == ue && r.2 == pdu && r.0 > a_ms && r.0 <= b_ms).map(|r| r.4).collect();
    v.iter().sum::<f64>() / v.len().max(1) as f64
}

/// `(timestamp_ms, snssai, ded, min, max, outcome)` rows of the control log.
pub fn control_rows(dir: &Path) -> Vec<Vec<String>> {
    records(&dir.join("control_log.csv")).iter().map(|r| r.iter().map(str::to_owned).collect()).collect()
}

pub fn run_builtin(name: &str, prbs: u32, dir: &Path) -> RunReport {
    let s = sim::builtin(name, Numerology::new(30, prbs).unwrap()).unwrap();
    sim::run(&s, dir).unwrap_or_else(|e| panic!("{name} at {prbs} PRBs: {e}"))
}

/// Runs `slicesim verify --out dir`; returns its stdout on success.
pub fn cli_verify(dir: &Path) -> Result<String, String> {
    let out = Command::new(bin()).arg("verify").arg("--out").arg(dir).output().map_err(|e| e.to_string())?;
    let text = String::from_utf8_lossy(&out.stdout).into_owned();
    if out.status.success() {
        Ok(text)
    } else {
        Err(format!("exit {:?}: {text}{}", out.status.code(), String::from_utf8_lossy(&out.stderr)))
    }
}

/// Experiment 1: per 10 s period, skipping the first second, each slice
/// sits within `tol` of its target and the high slice alternates.
pub fn check_exp1(dir: &Path, prbs: u32, tol: f64) -> Result<String, String> {
    let (lo, hi) = (f64::from(prbs * 10 / 100), f64::from(prbs * 90 / 100));
    let mut worst: f64 = 0.0;
    let mut prev_high = None;
    for k in 0..10u64 {
        let m = mean_prbs(dir, k * 10_000 + 1000, (k + 1) * 10_000);
        let (a, b) = (m.get(&SLICE_1).copied().unwrap_or(0.0), m.get(&SLICE_2).copied().unwrap_or(0.0));
        let high = if a > b { SLICE_1 } else { SLICE_2 };
        let (h, l) = if a > b { (a, b) } else { (b, a) };
        if (h - hi).abs() > tol || (l - lo).abs() > tol {
            return Err(format!("period {k}: {h:.2}/{l:.2} PRBs, targets {hi}/{lo} +-{tol}"));
        }
        if prev_high == Some(high) {
            return Err(format!("period {k}: slice {high:?} high twice in a row"));
        }
        prev_high = Some(high);
        worst = worst.max((h - hi).abs()).max((l - lo).abs());
    }
    Ok(format!("10 periods alternate {hi}/{lo}, worst deviation {worst:.2} PRB"))
}

/// Experiment 2 staircase over the six 20 s steps.
pub fn check_exp2(dir: &Path, prbs: u32) -> Result<String, String> {
    let n = f64::from(prbs);
    let step = |i: u64| (i * 20_000, (i + 1) * 20_000);
    let share = |i: u64| {
        let (a, b) = step(i);
        mean_prbs(dir, a, b).get(&SLICE_2).copied().unwrap_or(0.0) / n
    };
    let thp2 = |i: u64| {
        let (a, b) = step(i);
        slice_bps(dir, SLICE_2, a, b)
    };
    let (a0, b0) = step(0);
    let (p1, p2) = (flow_bps(dir, 1, 1, a0, b0), flow_bps(dir, 1, 2, a0, b0));
    if !(p1 > 0.0 && (p1 / p2 - 1.0).abs() <= 0.10) {
        return Err(format!("step 1: UE1 PDU throughputs {p1:.0} and {p2:.0} differ by more than 10%"));
    }
    if !(thp2(1) < thp2(0)) {
        return Err(format!("step 2: slice-2 throughput {:.0} not below step 1 {:.0}", thp2(1), thp2(0)));
    }
    let (s3, s4) = (share(2), share(3));
    if s3 < 0.80 - 0.01 {
        return Err(format!("step 3: slice-2 share {s3:.4} < 0.79"));
    }
    if !(s4 >= 0.40 - 0.01 && s4 < s3) {
        return Err(format!("step 4: slice-2 share {s4:.4} outside [0.39, {s3:.4})"));
    }
    Ok(format!(
        "step1 PDUs {:.2}/{:.2} Mbps, step2 slice-2 {:.2} < {:.2} Mbps, step3 share {s3:.4}, step4 share {s4:.4}",
        p1 / 1e6,
        p2 / 1e6,
        thp2(1) / 1e6,
        thp2(0) / 1e6
    ))
}

/// Every CSV artifact in `a` is byte-identical to its counterpart in `b`.
pub fn same_csvs(a: &Path, b: &Path) -> Result<usize, String> {
    let mut names: Vec<PathBuf> = std::fs::read_dir(a)
        .map_err(|e| e.to_string())?
        .map(|e| e.unwrap().path())
        .filter(|p| p.extension().is_some_and(|x| x == "csv"))
        .collect();
    names.sort();
    for p in &names {
        let name = p.file_name().unwrap();
        let (x, y) = (std::fs::read(p).unwrap(), std::fs::read(b.join(name)).map_err(|e| e.to_string())?);
        if x != y {
            return Err(format!("{} differs", name.to_string_lossy()));
        }
    }
    Ok(names.len())
}
