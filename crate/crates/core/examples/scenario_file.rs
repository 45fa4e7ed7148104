//! Loads a JSON scenario, runs it and prints the per-period summary.
//!
//! ```text
//! cargo run --release --example scenario_file -- [scenario.json] [out_dir]
//! ```

use std::path::PathBuf;

use slicesim::sim::{self, ScenarioError};

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let mut args = std::env::args().skip(1);
    let path: PathBuf = args
        .next()
        .map_or_else(|| PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("examples/scenarios/three_slices.json"), PathBuf::from);
    let out: PathBuf = args.next().map_or_else(|| std::env::temp_dir().join("slicesim-scenario"), PathBuf::from);

    let scenario = match sim::load_scenario(&path) {
        Ok(s) => s,
        Err(ScenarioError::Validation(issues)) => {
            for i in &issues {
                eprintln!("{}: {i}", path.display());
            }
            std::process::exit(1);
        }
        Err(e) => return Err(e.into()),
    };
    let run = sim::run(&scenario, &out)?;
    println!("{} indications, {} controls applied, {} rejected", run.indications, run.controls_applied, run.controls_rejected);
    print!("{}", sim::report(&out)?);
    Ok(())
}
