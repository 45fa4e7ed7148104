//! Acceptance criteria 1-8. Each prints one line; the process fails if any
//! criterion does.

mod common;

use std::panic::{catch_unwind, AssertUnwindSafe};
use std::path::{Path, PathBuf};
use std::process::{Command, ExitCode};
use std::time::{Duration, Instant};

use common::experiments as ex;

const EXP1_TOL_106: f64 = 3.0;
const EXP1_TOL_273: f64 = 5.0;
const EXP1_WALL_LIMIT: Duration = Duration::from_secs(60);
const PF_RATIO_TOL: f64 = 0.02;
const ORACLE_CASES: u32 = 10_000;
const ROUNDTRIP_CASES: u32 = 10_000;
const FUZZ_FRAMES: u64 = 1_000_000;

type Outcome = Result<String, String>;

fn guarded(f: impl FnOnce() -> Outcome) -> Outcome {
    catch_unwind(AssertUnwindSafe(f)).unwrap_or_else(|p| {
        let msg = p.downcast_ref::<String>().cloned().or_else(|| p.downcast_ref::<&str>().map(|s| s.to_string()));
        Err(format!("panicked: {}", msg.unwrap_or_default()))
    })
}

struct Runs {
    root: tempfile::TempDir,
    dirs: Vec<PathBuf>,
}

impl Runs {
    fn dir(&mut self, name: &str) -> PathBuf {
        let d = self.root.path().join(name);
        self.dirs.push(d.clone());
        d
    }
}

fn exp1(runs: &mut Runs, name: &str, prbs: u32, tol: f64) -> Outcome {
    let d = runs.dir(name);
    let started = Instant::now();
    ex::run_builtin("exp1", prbs, &d);
    let wall = started.elapsed();
    let detail = ex::check_exp1(&d, prbs, tol)?;
    if wall >= EXP1_WALL_LIMIT {
        return Err(format!("{detail}; wall time {:.1} s over limit", wall.as_secs_f64()));
    }
    Ok(format!("{detail}, wall {:.2} s", wall.as_secs_f64()))
}

fn tcp_matches(runs: &mut Runs, reference: &Path) -> Outcome {
    let d = runs.dir("exp1_tcp");
    let o = Command::new(ex::bin())
        .args(["builtin", "exp1", "--tcp", "--out"])
        .arg(&d)
        .env("E2_PORT", "0")
        .output()
        .map_err(|e| e.to_string())?;
    if !o.status.success() {
        return Err(format!("tcp run failed: {}", String::from_utf8_lossy(&o.stderr)));
    }
    let (a, b) = (ex::control_rows(reference), ex::control_rows(&d));
    if a != b {
        return Err(format!("control logs differ: in-process {} rows, tcp {} rows", a.len(), b.len()));
    }
    Ok(format!("tcp control log matches ({} rows)", a.len()))
}

fn main() -> ExitCode {
    let mut runs = Runs { root: tempfile::tempdir().expect("tempdir"), dirs: vec![] };
    let mut results: Vec<(u8, &str, Outcome)> = Vec::new();

    results.push((1, "exp1 at 106 PRBs", guarded(|| exp1(&mut runs, "exp1_106", 106, EXP1_TOL_106))));
    results.push((2, "exp1 at 273 PRBs", guarded(|| exp1(&mut runs, "exp1_273", 273, EXP1_TOL_273))));
    results.push((
        3,
        "exp2 staircase",
        guarded(|| {
            let d = runs.dir("exp2");
            ex::run_builtin("exp2", 106, &d);
            ex::check_exp2(&d, 106)
        }),
    ));
    results.push((
        4,
        "budget oracle",
        guarded(|| common::check_budget_oracle(ORACLE_CASES).map(|()| format!("{ORACLE_CASES} cases match"))),
    ));
    let pf = guarded(|| {
        let d = runs.dir("pf");
        let (slots, served) = common::pf_run(&d);
        let ratio = served[0] as f64 / served[1] as f64;
        let line = format!("{slots} slots, throughput ratio {ratio:.4}");
        if (ratio - 1.0).abs() <= PF_RATIO_TOL {
            Ok(line)
        } else {
            Err(line)
        }
    });
    let codec = guarded(|| {
        common::check_codec_roundtrip(ROUNDTRIP_CASES)?;
        let goldens = common::check_goldens()?;
        let survived = common::fuzz_decode(FUZZ_FRAMES, 0xacce97);
        Ok(format!(
            "{ROUNDTRIP_CASES} roundtrips, {goldens} golden frames, {FUZZ_FRAMES} fuzzed frames without a crash ({survived} still valid)"
        ))
    });
    let determinism = guarded(|| {
        let mut notes = Vec::new();
        for name in ["exp1", "exp2"] {
            let (a, b) = (runs.dir(&format!("{name}_det_a")), runs.dir(&format!("{name}_det_b")));
            ex::run_builtin(name, 106, &a);
            ex::run_builtin(name, 106, &b);
            let n = ex::same_csvs(&a, &b).map_err(|e| format!("{name}: {e}"))?;
            notes.push(format!("{name} {n} CSVs identical"));
        }
        let reference = runs.root.path().join("exp1_det_a");
        notes.push(tcp_matches(&mut runs, &reference)?);
        Ok(notes.join(", "))
    });

    // every run above goes through the CLI verifier
    let verify = guarded(|| {
        let mut slots = 0u64;
        for d in &runs.dirs {
            let text = ex::cli_verify(d).map_err(|e| format!("{}: {e}", d.display()))?;
            slots += text.split_whitespace().nth(1).and_then(|n| n.parse::<u64>().ok()).unwrap_or(0);
        }
        Ok(format!("{} runs, {slots} slots, 0 violations", runs.dirs.len()))
    });
    results.push((5, "scheduler invariants", verify));
    results.push((6, "PF fairness", pf));
    results.push((7, "codec", codec));
    results.push((8, "determinism", determinism));
    results.sort_by_key(|r| r.0);

    let mut failed = 0;
    for (n, name, outcome) in &results {
        match outcome {
            Ok(detail) => println!("criterion {n} ({name}): PASS - {detail}"),
            Err(detail) => {
                failed += 1;
                println!("criterion {n} ({name}): FAIL - {detail}");
            }
        }
    }
    println!("acceptance: {} of {} criteria pass", results.len() - failed, results.len());
    if failed == 0 {
        ExitCode::SUCCESS
    } else {
        ExitCode::FAILURE
    }
}
