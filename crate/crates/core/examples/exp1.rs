//! Experiment 1: the slicing xApp swaps the 90 % and 10 % max ratios of two
//! saturated slices every 10 s.
//!
//! ```text
//! cargo run --release --example exp1 -- [prbs] [out_dir]
//! ```

use std::path::PathBuf;

use slicesim::phy::Numerology;
use slicesim::sim::{self, SLICE_1, SLICE_2};

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let mut args = std::env::args().skip(1);
    let prbs: u32 = args.next().map(|a| a.parse()).transpose()?.unwrap_or(106);
    let out: PathBuf = args.next().map_or_else(|| std::env::temp_dir().join("slicesim-exp1"), PathBuf::from);

    let scenario = sim::exp1(Numerology::new(30, prbs)?);
    let run = sim::run(&scenario, &out)?;
    println!(
        "{} slots in {:.2} s, {} controls applied, artifacts in {}",
        run.slots,
        run.wall_time.as_secs_f64(),
        run.controls_applied,
        out.display()
    );

    let art = sim::Artifacts::load(&out)?;
    println!("period      slice {SLICE_1}   slice {SLICE_2}   (mean PRBs per frame, first second skipped)");
    for k in 0..10 {
        let start = f64::from(k) * 10.0;
        let w = art.window(start + 1.0, start + 10.0);
        println!(
            "{:>3}-{:<3} s  {:>10.2}   {:>10.2}",
            start,
            start + 10.0,
            w.slices[&SLICE_1].mean_prbs,
            w.slices[&SLICE_2].mean_prbs
        );
    }
    Ok(())
}
