use std::io::Write;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{bail, Context};
use clap::{Parser, Subcommand};
use slicesim::e2::e2_port_from_env;
use slicesim::phy::Numerology;
use slicesim::sim::{self, load_scenario, Scenario, ScenarioError};

// Output may go to a closed pipe (`| head`); that is not an error.
macro_rules! say {
    ($($t:tt)*) => {{ let _ = writeln!(std::io::stdout(), $($t)*); }};
}
macro_rules! say_raw {
    ($($t:tt)*) => {{ let _ = write!(std::io::stdout(), $($t)*); }};
}

#[derive(Parser)]
#[command(name = "slicesim", version, about = "Sliced gNB scheduler with a closed-loop RIC, on a virtual clock")]
struct Cli {
    #[command(subcommand)]
    command: Cmd,
}

#[derive(Subcommand)]
enum Cmd {
    /// Run a scenario file and write CSV artifacts.
    Run {
        #[arg(long)]
        scenario: PathBuf,
        #[arg(long)]
        out: PathBuf,
        /// Overrides the scenario seed.
        #[arg(long)]
        seed: Option<u64>,
        /// Run the RIC as a separate process over TCP (port from E2_PORT).
        #[arg(long)]
        tcp: bool,
    },
    /// Run a built-in experiment.
    Builtin {
        #[arg(value_parser = ["exp1", "exp2"])]
        name: String,
        #[arg(long)]
        out: PathBuf,
        /// Cell bandwidth in PRBs at 30 kHz.
        #[arg(long, default_value_t = 106)]
        prbs: u32,
        #[arg(long)]
        seed: Option<u64>,
        #[arg(long)]
        tcp: bool,
    },
    /// Check a scenario and print its normalized form.
    Validate {
        #[arg(long)]
        scenario: PathBuf,
    },
    /// Re-check scheduler invariants over a run's CSV artifacts.
    Verify {
        #[arg(long)]
        out: PathBuf,
    },
    /// Summarize a run per control period and timeline step.
    Report {
        #[arg(long)]
        out: PathBuf,
    },
    #[command(hide = true)]
    RicServe {
        #[arg(long)]
        scenario: PathBuf,
        #[arg(long)]
        out: PathBuf,
        #[arg(long)]
        port: Option<u16>,
    },
}

fn execute(mut scenario: Scenario, out: &Path, seed: Option<u64>, tcp: bool) -> anyhow::Result<ExitCode> {
    if let Some(s) = seed {
        scenario.seed = s;
    }
    let report = if tcp {
        let exe = std::env::current_exe().context("locating own executable")?;
        sim::run_tcp(&scenario, out, &exe)?
    } else {
        sim::run(&scenario, out)?
    };
    say!(
        "{}: {} slots, {} indications, {} controls applied, {} rejected, {:.2} s",
        scenario.name,
        report.slots,
        report.indications,
        report.controls_applied,
        report.controls_rejected,
        report.wall_time.as_secs_f64()
    );
    for a in &report.artifacts {
        say!("  {}", a.display());
    }
    Ok(ExitCode::SUCCESS)
}

fn main_inner() -> anyhow::Result<ExitCode> {
    match Cli::parse().command {
        Cmd::Run { scenario, out, seed, tcp } => {
            let s = load_scenario(&scenario).with_context(|| format!("loading {}", scenario.display()))?;
            execute(s, &out, seed, tcp)
        }
        Cmd::Builtin { name, out, prbs, seed, tcp } => {
            let numerology = Numerology::new(30, prbs)?;
            let Some(s) = sim::builtin(&name, numerology) else { bail!("unknown built-in {name}") };
            execute(s, &out, seed, tcp)
        }
        Cmd::Validate { scenario } => match load_scenario(&scenario) {
            Ok(s) => {
                say!("{}", s.to_json().to_canonical());
                Ok(ExitCode::SUCCESS)
            }
            Err(ScenarioError::Validation(issues)) => {
                eprintln!("{}: {} issue(s)", scenario.display(), issues.len());
                for i in issues {
                    eprintln!("  {i}");
                }
                Ok(ExitCode::FAILURE)
            }
            Err(e) => Err(e).with_context(|| format!("loading {}", scenario.display())),
        },
        Cmd::Verify { out } => {
            let rep = sim::verify(&out)?;
            say_raw!("{rep}");
            Ok(if rep.is_clean() { ExitCode::SUCCESS } else { ExitCode::FAILURE })
        }
        Cmd::Report { out } => {
            let summary = sim::report(&out)?;
            say_raw!("{summary}");
            Ok(if summary.verify.is_clean() { ExitCode::SUCCESS } else { ExitCode::FAILURE })
        }
        Cmd::RicServe { scenario, out, port } => {
            let s = load_scenario(&scenario)?;
            let port = port.unwrap_or_else(e2_port_from_env);
            sim::serve_ric(&s, &out, port, &mut std::io::stdout())?;
            Ok(ExitCode::SUCCESS)
        }
    }
}

fn main() -> ExitCode {
    match main_inner() {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(2)
        }
    }
}
