//! Experiment 2: a minimum-ratio staircase on slice 2 while UEs join and
//! leave.
//!
//! ```text
//! cargo run --release --example exp2 -- [out_dir]
//! ```

use std::path::PathBuf;

use slicesim::phy::Numerology;
use slicesim::sim::{self, EXP2_STEPS, SLICE_1, SLICE_2};

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let out: PathBuf =
        std::env::args().nth(1).map_or_else(|| std::env::temp_dir().join("slicesim-exp2"), PathBuf::from);
    let scenario = sim::exp2(Numerology::mhz40());
    sim::run(&scenario, &out)?;
    let art = sim::Artifacts::load(&out)?;
    let n = art.total_prbs();

    println!("step  window      slice-2 share   slice 1 Mbps   slice 2 Mbps   per-flow Mbps");
    for (i, &(a, b)) in EXP2_STEPS.iter().enumerate() {
        let w = art.window(a, b);
        let flows: Vec<String> =
            w.flows.iter().map(|(k, bps)| format!("{}.{}={:.1}", k.ue_id, k.pdu_id, bps / 1e6)).collect();
        println!(
            "{:>4}  {:>3}-{:<3} s   {:>13.4}   {:>12.2}   {:>12.2}   {}",
            i + 1,
            a,
            b,
            w.share(SLICE_2, n),
            w.slices[&SLICE_1].mean_bps / 1e6,
            w.slices[&SLICE_2].mean_bps / 1e6,
            flows.join(" ")
        );
    }
    Ok(())
}
