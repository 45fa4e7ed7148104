//! Proportional fair inside one slice, driven slot by slot through the
//! scheduler API: two full-buffer UEs at different MCS.
//!
//! ```text
//! cargo run --example pf_fairness -- [slots]
//! ```

use slicesim::mac::{MacScheduler, DEFAULT_PF_ALPHA};
use slicesim::model::{RrmPolicyRatio, SliceConfig, Snssai, UeContext};
use slicesim::phy::{step_traffic, LinkModel, Numerology, TrafficProfile};

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let slots: u64 = std::env::args().nth(1).map(|s| s.parse()).transpose()?.unwrap_or(20_000);
    let numerology = Numerology::mhz40();
    let link = LinkModel::default();
    let slice = Snssai::sst_only(1);
    let ues = vec![
        UeContext::new(1, 0x4601, 27, 0.0).with_session(1, slice, TrafficProfile::full_buffer()),
        UeContext::new(2, 0x4602, 9, 0.0).with_session(1, slice, TrafficProfile::full_buffer()),
    ];
    let mut mac = MacScheduler::new(
        numerology,
        vec![SliceConfig::new(slice, RrmPolicyRatio::unconstrained())],
        ues,
        link.clone(),
        DEFAULT_PF_ALPHA,
    )?;
    let slot_s = numerology.slot_duration_s();
    let pin = link.full_buffer_pin(numerology.total_prbs());

    let mut prbs = [0u64; 2];
    let mut bytes = [0u64; 2];
    for k in 0..slots {
        for ue in mac.ues_mut() {
            step_traffic(&mut ue.sessions, k as f64 * slot_s, slot_s, pin);
        }
        let alloc = mac.schedule(k)?;
        for g in &alloc.grants {
            let i = (g.ue_id - 1) as usize;
            prbs[i] += u64::from(g.prbs);
            bytes[i] += g.tb_bytes;
            let flow = mac.flow_mut(g.key()).expect("granted flow exists");
            flow.backlog_bytes = flow.backlog_bytes.saturating_sub(g.tb_bytes);
        }
        mac.update_pf(&alloc);
    }

    let secs = slots as f64 * slot_s;
    for (i, ue) in mac.ues().iter().enumerate() {
        println!(
            "ue {} mcs {:>2}: {:5.1}% of PRBs, {:7.2} Mbps, pf average {:7.2} Mbps",
            ue.ue_id,
            ue.mcs,
            100.0 * prbs[i] as f64 / (prbs[0] + prbs[1]) as f64,
            bytes[i] as f64 * 8.0 / secs / 1e6,
            ue.sessions[0].pf_avg_bps / 1e6
        );
    }
    Ok(())
}
