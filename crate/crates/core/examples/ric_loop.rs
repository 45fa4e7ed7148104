//! A RIC on a real TCP socket driving a toy gNB whose slice throughput
//! simply follows the max ratio it was last given.
//!
//! ```text
//! cargo run --example ric_loop
//! ```

use std::collections::BTreeMap;
use std::net::{TcpListener, TcpStream};
use std::time::Duration;

use slicesim::e2::{
    run_ric_endpoint, GnbHandler, GnbSession, RicControlBody, RicIndicationBody, SetupRequest, SubscriptionRequest,
    SubscriptionResponse, TcpTransport,
};
use slicesim::model::{KpmRecord, RrmPolicyRatio, SliceConfig, Snssai, Violation};
use slicesim::ric::{KpmStore, RicRuntime, RicSchedule, SlicingXappConfig, XappPlan};

const WAIT: Duration = Duration::from_secs(5);
// rate one percent of the cell carries
const BPS_PER_PCT: f64 = 1e6;

struct ToyGnb {
    policies: BTreeMap<Snssai, RrmPolicyRatio>,
    period_ms: u32,
}

impl GnbHandler for ToyGnb {
    fn on_subscription(&mut self, req: &SubscriptionRequest) -> SubscriptionResponse {
        self.period_ms = req.report_period_ms;
        SubscriptionResponse { report_period_ms: req.report_period_ms }
    }

    fn on_control(&mut self, body: &RicControlBody) -> Result<(), Vec<Violation>> {
        let bad: Vec<Violation> = body.entries.iter().flat_map(|(s, p)| p.violations(*s)).collect();
        if !bad.is_empty() {
            return Err(bad);
        }
        self.policies.extend(body.entries.iter().copied());
        Ok(())
    }
}

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let listener = TcpListener::bind("127.0.0.1:0")?;
    let addr = listener.local_addr()?;
    println!("RIC listening on {addr}");
    let ric = std::thread::spawn(move || {
        let (stream, _) = listener.accept().expect("gNB connects");
        let plan = XappPlan::new(SlicingXappConfig::default(), RicSchedule::default(), 2);
        let mut rt = RicRuntime::new("ric-example", KpmStore::new(60.0), plan);
        run_ric_endpoint(TcpTransport::new(stream).expect("socket"), &mut rt, 500, WAIT).expect("session");
        rt
    });

    let s1 = Snssai::new(1, Some(1))?;
    let s2 = Snssai::new(1, Some(2))?;
    let mut gnb = ToyGnb {
        policies: [(s1, RrmPolicyRatio::new(0, 0, 90)), (s2, RrmPolicyRatio::new(0, 0, 10))].into(),
        period_ms: 0,
    };
    let setup = SetupRequest {
        ran_node_id: "toy-gnb".into(),
        total_prbs: 106,
        slices: gnb.policies.iter().map(|(s, p)| SliceConfig::new(*s, *p)).collect(),
    };
    let (mut session, resp) = GnbSession::connect(TcpTransport::new(TcpStream::connect(addr)?)?, setup, WAIT)?;
    println!("setup accepted by {}", resp.ric_id);
    session.dispatch_one(&mut gnb, Some(WAIT))?;
    println!("subscribed, one report every {} ms", gnb.period_ms);

    let mut ts = 0;
    while ts < 60_000 {
        ts += u64::from(gnb.period_ms);
        let records = gnb
            .policies
            .iter()
            .enumerate()
            .map(|(i, (s, p))| KpmRecord {
                timestamp_ms: ts,
                rnti: 0x4601 + i as u16,
                snssai: *s,
                pdu_id: 1,
                mcs: 20,
                bler: 0.0,
                dl_thp_bps: f64::from(p.max_pct) * BPS_PER_PCT,
                dl_prbs: 0,
            })
            .collect();
        session.send_indication(RicIndicationBody { ran_node_id: "toy-gnb".into(), records })?;
        // the xApp answers every 10 s of report time; wait for it then
        if ts % 10_000 == 0 {
            session.dispatch_one(&mut gnb, Some(WAIT))?;
            let view: Vec<String> = gnb.policies.iter().map(|(s, p)| format!("{s} max {}%", p.max_pct)).collect();
            println!("t={:>3} s  {}", ts / 1000, view.join(", "));
        }
    }
    drop(session);

    let rt = ric.join().expect("RIC thread");
    println!("\ncontrol log ({} messages):", rt.control_log().messages());
    rt.control_log().write_csv(std::io::stdout())?;
    Ok(())
}
