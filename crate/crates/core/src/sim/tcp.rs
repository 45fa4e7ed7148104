//! Two-process mode: the RIC runs as a child process on a TCP socket and the
//! gNB drives it in lockstep.

use std::io::{BufRead, BufReader, Write};
use std::net::{TcpListener, TcpStream};
use std::path::Path;
use std::process::{Child, Command, Stdio};
use std::time::{Duration, Instant};

use crate::e2::{run_ric_endpoint, TcpTransport, DEFAULT_HANDSHAKE_TIMEOUT};
use crate::ric::ControlLog;

use super::engine::{prepare_out_dir, ric_runtime, run_connected, RunError, RunReport, CONTROL_LOG_CSV, SCENARIO_JSON};
use super::scenario::Scenario;

/// How long the RIC waits for the gNB to connect.
pub const ACCEPT_TIMEOUT: Duration = Duration::from_secs(30);

/// First line the RIC process prints, followed by the bound address.
pub const LISTENING_PREFIX: &str = "listening ";

/// RIC process body: binds `127.0.0.1:port` (0 picks a free port), announces
/// the address on `announce`, serves one gNB until it disconnects and writes
/// the control log into `out_dir`.
pub fn serve_ric(scenario: &Scenario, out_dir: &Path, port: u16, announce: &mut impl Write) -> Result<ControlLog, RunError> {
    let listener = TcpListener::bind(("127.0.0.1", port))?;
    writeln!(announce, "{LISTENING_PREFIX}{}", listener.local_addr()?)?;
    announce.flush()?;
    listener.set_nonblocking(true)?;
    let deadline = Instant::now() + ACCEPT_TIMEOUT;
    let stream = loop {
        match listener.accept() {
            Ok((s, _)) => break s,
            Err(e) if e.kind() == std::io::ErrorKind::WouldBlock => {
                if Instant::now() >= deadline {
                    return Err(RunError::RicProcess("no gNB connected".into()));
                }
                std::thread::sleep(Duration::from_millis(5));
            }
            Err(e) => return Err(e.into()),
        }
    };
    stream.set_nonblocking(false)?;
    let mut runtime = ric_runtime(scenario);
    run_ric_endpoint(TcpTransport::new(stream)?, &mut runtime, scenario.xapp.report_period_ms, DEFAULT_HANDSHAKE_TIMEOUT)?;
    std::fs::create_dir_all(out_dir)?;
    runtime.control_log().save(&out_dir.join(CONTROL_LOG_CSV))?;
    Ok(runtime.into_control_log())
}

struct KillOnDrop(Option<Child>);

impl Drop for KillOnDrop {
    fn drop(&mut self) {
        if let Some(c) = self.0.as_mut() {
            let _ = c.kill();
            let _ = c.wait();
        }
    }
}

/// Runs `scenario` with the RIC in a child process started as
/// `ric_exe ric-serve --scenario <out>/scenario.json --out <out>`. The child
/// inherits `E2_PORT`.
pub fn run_tcp(scenario: &Scenario, out_dir: &Path, ric_exe: &Path) -> Result<RunReport, RunError> {
    let started = Instant::now();
    prepare_out_dir(scenario, out_dir)?;
    let child = Command::new(ric_exe)
        .arg("ric-serve")
        .arg("--scenario")
        .arg(out_dir.join(SCENARIO_JSON))
        .arg("--out")
        .arg(out_dir)
        .stdin(Stdio::null())
        .stdout(Stdio::piped())
        .spawn()?;
    let mut guard = KillOnDrop(Some(child));
    let stdout = guard.0.as_mut().and_then(|c| c.stdout.take()).expect("stdout piped");
    let mut line = String::new();
    BufReader::new(stdout).read_line(&mut line)?;
    let addr = line
        .trim()
        .strip_prefix(LISTENING_PREFIX)
        .ok_or_else(|| RunError::RicProcess(format!("unexpected announcement {line:?}")))?
        .to_string();
    let stream = TcpStream::connect(&addr)?;
    let mut report = run_connected(scenario, out_dir, TcpTransport::new(stream)?, started)?;
    let status = guard.0.take().expect("child present").wait()?;
    if !status.success() {
        return Err(RunError::RicProcess(format!("exited with {status}")));
    }
    report.artifacts.push(out_dir.join(CONTROL_LOG_CSV));
    report.wall_time = started.elapsed();
    Ok(report)
}
