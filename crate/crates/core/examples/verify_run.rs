//! Re-checks a run's artifacts, then corrupts one frame and checks again.
//!
//! ```text
//! cargo run --example verify_run
//! ```

use slicesim::phy::Numerology;
use slicesim::sim;

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let dir = std::env::temp_dir().join("slicesim-verify");
    let mut scenario = sim::exp1(Numerology::mhz40());
    scenario.duration_s = 2.0;
    sim::run(&scenario, &dir)?;
    println!("clean run:\n{}", sim::verify(&dir)?);

    // claim slice 1:2 used 40 PRBs in the first frame; its cap is 10
    let prbs = dir.join("prbs.csv");
    let text = std::fs::read_to_string(&prbs)?.replacen("0,1,2,10.0", "0,1,2,40.0", 1);
    std::fs::write(&prbs, text)?;
    println!("after tampering:\n{}", sim::verify(&dir)?);
    Ok(())
}
