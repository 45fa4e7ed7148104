//! E2 frames: encode, decode, stream reassembly and the strict checks.
//!
//! ```text
//! cargo run --example e2_codec
//! ```

use slicesim::e2::{decode, encode, E2Body, E2Message, FrameDecoder, RicControlBody, HEADER_LEN};
use slicesim::model::{RrmPolicyRatio, Snssai};

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let s1 = Snssai::new(1, Some(1))?;
    let s2 = Snssai::new(1, Some(2))?;
    let msg = E2Message::new(
        3,
        E2Body::RicControlRequest(RicControlBody {
            ran_node_id: "gnb-sim".into(),
            entries: vec![(s1, RrmPolicyRatio::new(0, 0, 10)), (s2, RrmPolicyRatio::new(0, 0, 90))],
        }),
    );
    let frame = encode(&msg)?;
    println!("header {:02x?}", &frame[..HEADER_LEN]);
    println!("payload {}", std::str::from_utf8(&frame[HEADER_LEN..])?);
    assert_eq!(decode(&frame)?, msg);

    // three frames fed one byte at a time
    let ack = encode(&E2Message::new(3, E2Body::RicControlAck))?;
    let stream: Vec<u8> = [frame.clone(), ack.clone(), frame.clone()].concat();
    let mut dec = FrameDecoder::new();
    let mut seen = Vec::new();
    for b in &stream {
        dec.push(std::slice::from_ref(b));
        while let Some(m) = dec.next_message()? {
            seen.push(m.msg_type());
        }
    }
    println!("reassembled {seen:?}");

    // rejected inputs, each with its offset
    let mut spaced = frame.clone();
    spaced.insert(HEADER_LEN + 1, b' ');
    let len = (spaced.len() - HEADER_LEN) as u32;
    spaced[..HEADER_LEN].copy_from_slice(&len.to_be_bytes());
    let bad_policy = String::from_utf8(frame[HEADER_LEN..].to_vec())?.replace("\"max_pct\":90", "\"max_pct\":900");
    let mut bad_frame = (bad_policy.len() as u32).to_be_bytes().to_vec();
    bad_frame.extend(bad_policy.as_bytes());
    for (what, bytes) in [
        ("truncated", frame[..frame.len() - 2].to_vec()),
        ("extra whitespace", spaced),
        ("percentage out of range", bad_frame),
        ("trailing bytes", [frame.as_slice(), b"x"].concat()),
    ] {
        println!("{what:>24}: {}", decode(&bytes).expect_err("must be rejected"));
    }
    Ok(())
}
