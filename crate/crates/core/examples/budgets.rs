//! Inter-slice budgets for a few hand-picked policy mixes.
//!
//! ```text
//! cargo run --example budgets
//! ```

use std::collections::BTreeMap;

use slicesim::mac::{compute_slice_budgets, SliceDemand, SliceState};
use slicesim::model::{RrmPolicyRatio, SliceConfig, Snssai};

struct Case {
    title: &'static str,
    total: u32,
    // (sst, (ded, min, max), demand PRBs, pf average bps)
    slices: &'static [(u8, (u8, u8, u8), u64, f64)],
}

const CASES: &[Case] = &[
    Case { title: "caps only, both saturated", total: 106, slices: &[(1, (0, 0, 90), 106, 1e6), (2, (0, 0, 10), 106, 1e6)] },
    Case {
        title: "idle slice keeps its dedicated PRBs",
        total: 106,
        slices: &[(1, (20, 20, 100), 0, 0.0), (2, (0, 0, 100), 106, 1e6)],
    },
    Case {
        title: "guarantees oversubscribed, split by largest remainder",
        total: 106,
        slices: &[(1, (0, 70, 100), 106, 1e6), (2, (0, 50, 100), 106, 1e6)],
    },
    Case {
        title: "shared pool favours the starved slice",
        total: 106,
        slices: &[(1, (0, 0, 100), 106, 5e7), (2, (0, 0, 60), 106, 1e6), (3, (10, 10, 100), 4, 1e6)],
    },
];

fn main() {
    for c in CASES {
        let states: Vec<SliceState> = c
            .slices
            .iter()
            .map(|&(sst, (d, lo, hi), _, avg)| {
                let mut s = SliceState::new(SliceConfig::new(Snssai::sst_only(sst), RrmPolicyRatio::new(d, lo, hi)));
                s.pf_avg_bps = avg;
                s
            })
            .collect();
        // the metric numerator: rate at the demanded PRBs, one unit per PRB here
        let demand: BTreeMap<Snssai, SliceDemand> =
            c.slices.iter().map(|&(sst, _, d, _)| (Snssai::sst_only(sst), SliceDemand::new(d, d as f64 * 1e6))).collect();
        let budgets = compute_slice_budgets(&states, &demand, c.total).expect("nonzero cell");

        println!("{} ({} PRBs)", c.title, c.total);
        for (b, &(_, (d, lo, hi), want, _)) in budgets.iter().zip(c.slices) {
            println!(
                "  slice {:<3} policy {d:>3}/{lo:>3}/{hi:>3}  demand {want:>3}  ->  {:>3} PRBs ({} dedicated)",
                b.snssai.to_string(),
                b.granted_prbs,
                b.dedicated_prbs
            );
        }
        println!("  total {}", budgets.iter().map(|b| b.granted_prbs).sum::<u32>());
    }
}
