//! E2-style messages and their wire form.
//!
//! ```text
//! +----------------------+------------------------------------+
//! | length L (u32, BE)   | L bytes of canonical UTF-8 JSON    |
//! +----------------------+------------------------------------+
//! ```
//!
//! The JSON object always has `msg_type` and `transaction_id`; body fields sit
//! next to them at the top level. Decoding is strict and only accepts the
//! canonical encoding, so `encode` is a bijection onto accepted frames.

use std::collections::BTreeSet;
use std::fmt;

use super::json::{self, as_array, as_uint, is_on_grid, Fields, Json, JsonError, Node};
use crate::model::{KpmRecord, RrmPolicyRatio, SliceConfig, Snssai, Violation, ViolationCode, SD_MAX};
use crate::phy::MAX_MCS;

pub const HEADER_LEN: usize = 4;
/// Frames larger than this are rejected before any allocation.
pub const MAX_FRAME_LEN: usize = 4 * 1024 * 1024;

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum MsgType {
    E2SetupRequest,
    E2SetupResponse,
    RicSubscriptionRequest,
    RicSubscriptionResponse,
    RicIndication,
    RicControlRequest,
    RicControlAck,
    RicControlFailure,
}

impl MsgType {
    pub const ALL: [MsgType; 8] = [
        MsgType::E2SetupRequest,
        MsgType::E2SetupResponse,
        MsgType::RicSubscriptionRequest,
        MsgType::RicSubscriptionResponse,
        MsgType::RicIndication,
        MsgType::RicControlRequest,
        MsgType::RicControlAck,
        MsgType::RicControlFailure,
    ];

    pub fn as_str(&self) -> &'static str {
        match self {
            MsgType::E2SetupRequest => "E2SetupRequest",
            MsgType::E2SetupResponse => "E2SetupResponse",
            MsgType::RicSubscriptionRequest => "RicSubscriptionRequest",
            MsgType::RicSubscriptionResponse => "RicSubscriptionResponse",
            MsgType::RicIndication => "RicIndication",
            MsgType::RicControlRequest => "RicControlRequest",
            MsgType::RicControlAck => "RicControlAck",
            MsgType::RicControlFailure => "RicControlFailure",
        }
    }

    pub fn parse(s: &str) -> Option<Self> {
        Self::ALL.into_iter().find(|t| t.as_str() == s)
    }

    /// Request type a response answers, `None` for initiating messages.
    pub fn answers(&self) -> Option<MsgType> {
        match self {
            MsgType::E2SetupResponse => Some(MsgType::E2SetupRequest),
            MsgType::RicSubscriptionResponse => Some(MsgType::RicSubscriptionRequest),
            MsgType::RicControlAck | MsgType::RicControlFailure => Some(MsgType::RicControlRequest),
            _ => None,
        }
    }

    pub fn is_response(&self) -> bool {
        self.answers().is_some()
    }

    /// Whether the gNB side originates this message.
    pub fn sent_by_gnb(&self) -> bool {
        matches!(
            self,
            MsgType::E2SetupRequest
                | MsgType::RicSubscriptionResponse
                | MsgType::RicIndication
                | MsgType::RicControlAck
                | MsgType::RicControlFailure
        )
    }
}

impl fmt::Display for MsgType {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SetupRequest {
    pub ran_node_id: String,
    pub total_prbs: u32,
    pub slices: Vec<SliceConfig>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SetupResponse {
    pub ric_id: String,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct SubscriptionRequest {
    pub report_period_ms: u32,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct SubscriptionResponse {
    pub report_period_ms: u32,
}

#[derive(Debug, Clone, PartialEq)]
pub struct RicIndicationBody {
    pub ran_node_id: String,
    pub records: Vec<KpmRecord>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct RicControlBody {
    pub ran_node_id: String,
    pub entries: Vec<(Snssai, RrmPolicyRatio)>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ControlFailure {
    pub violations: Vec<Violation>,
}

#[derive(Debug, Clone, PartialEq)]
pub enum E2Body {
    E2SetupRequest(SetupRequest),
    E2SetupResponse(SetupResponse),
    RicSubscriptionRequest(SubscriptionRequest),
    RicSubscriptionResponse(SubscriptionResponse),
    RicIndication(RicIndicationBody),
    RicControlRequest(RicControlBody),
    RicControlAck,
    RicControlFailure(ControlFailure),
}

impl E2Body {
    pub fn msg_type(&self) -> MsgType {
        match self {
            E2Body::E2SetupRequest(_) => MsgType::E2SetupRequest,
            E2Body::E2SetupResponse(_) => MsgType::E2SetupResponse,
            E2Body::RicSubscriptionRequest(_) => MsgType::RicSubscriptionRequest,
            E2Body::RicSubscriptionResponse(_) => MsgType::RicSubscriptionResponse,
            E2Body::RicIndication(_) => MsgType::RicIndication,
            E2Body::RicControlRequest(_) => MsgType::RicControlRequest,
            E2Body::RicControlAck => MsgType::RicControlAck,
            E2Body::RicControlFailure(_) => MsgType::RicControlFailure,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct E2Message {
    pub transaction_id: u64,
    pub body: E2Body,
}

impl E2Message {
    pub fn new(transaction_id: u64, body: E2Body) -> Self {
        Self { transaction_id, body }
    }

    pub fn msg_type(&self) -> MsgType {
        self.body.msg_type()
    }
}

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
#[error("invalid message: {0}")]
pub struct InvalidMessage(pub String);

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum DecodeError {
    #[error("truncated frame: need at least {needed} bytes")]
    Truncated { needed: usize },
    #[error("malformed frame at byte {offset}: {reason}")]
    Malformed { offset: usize, reason: String },
    #[error("unknown message type \"{0}\"")]
    UnknownType(String),
}

impl DecodeError {
    fn malformed(offset: usize, reason: impl Into<String>) -> Self {
        DecodeError::Malformed { offset, reason: reason.into() }
    }

    fn from_json(e: JsonError) -> Self {
        DecodeError::Malformed { offset: e.offset + HEADER_LEN, reason: e.reason }
    }
}

// ---- encoding ----

pub fn snssai_json(s: Snssai) -> Json {
    Json::object().field("sst", s.sst()).opt("sd", s.sd()).build()
}

pub fn policy_json(p: RrmPolicyRatio) -> Json {
    Json::object()
        .field("dedicated_pct", p.dedicated_pct)
        .field("min_pct", p.min_pct)
        .field("max_pct", p.max_pct)
        .build()
}

pub fn slice_json(s: &SliceConfig) -> Json {
    Json::object().field("snssai", snssai_json(s.snssai)).field("policy", policy_json(s.policy)).build()
}

fn record_json(r: &KpmRecord) -> Json {
    Json::object()
        .field("timestamp_ms", r.timestamp_ms)
        .field("rnti", r.rnti)
        .field("snssai", snssai_json(r.snssai))
        .field("pdu_id", r.pdu_id)
        .field("mcs", r.mcs)
        .field("bler", r.bler)
        .field("dl_thp_bps", r.dl_thp_bps)
        .field("dl_prbs", r.dl_prbs)
        .build()
}

fn violation_json(v: &Violation) -> Json {
    Json::object().field("code", v.code.as_str()).field("detail", v.detail.as_str()).build()
}

fn message_json(m: &E2Message) -> Json {
    let b = Json::object().field("msg_type", m.msg_type().as_str()).field("transaction_id", m.transaction_id);
    match &m.body {
        E2Body::E2SetupRequest(r) => b
            .field("ran_node_id", r.ran_node_id.as_str())
            .field("total_prbs", r.total_prbs)
            .field("slices", r.slices.iter().map(slice_json).collect::<Vec<_>>()),
        E2Body::E2SetupResponse(r) => b.field("ric_id", r.ric_id.as_str()),
        E2Body::RicSubscriptionRequest(r) => b.field("report_period_ms", r.report_period_ms),
        E2Body::RicSubscriptionResponse(r) => b.field("report_period_ms", r.report_period_ms),
        E2Body::RicIndication(r) => b
            .field("ran_node_id", r.ran_node_id.as_str())
            .field("records", r.records.iter().map(record_json).collect::<Vec<_>>()),
        E2Body::RicControlRequest(r) => b.field("ran_node_id", r.ran_node_id.as_str()).field(
            "entries",
            r.entries
                .iter()
                .map(|(s, p)| Json::object().field("snssai", snssai_json(*s)).field("policy", policy_json(*p)).build())
                .collect::<Vec<_>>(),
        ),
        E2Body::RicControlAck => b,
        E2Body::RicControlFailure(r) => {
            b.field("violations", r.violations.iter().map(violation_json).collect::<Vec<_>>())
        }
    }
    .build()
}

fn check_policy_range(p: &RrmPolicyRatio) -> Result<(), InvalidMessage> {
    if p.dedicated_pct > 100 || p.min_pct > 100 || p.max_pct > 100 {
        return Err(InvalidMessage(format!("policy percentage above 100: {p:?}")));
    }
    Ok(())
}

fn check_distinct(snssais: impl Iterator<Item = Snssai>) -> Result<(), InvalidMessage> {
    let mut seen = BTreeSet::new();
    for s in snssais {
        if !seen.insert(s) {
            return Err(InvalidMessage(format!("slice {s} listed twice")));
        }
    }
    Ok(())
}

/// Checks the type invariants `encode` requires.
pub fn validate(m: &E2Message) -> Result<(), InvalidMessage> {
    match &m.body {
        E2Body::E2SetupRequest(r) => {
            if r.total_prbs == 0 || r.total_prbs > u32::from(u16::MAX) {
                return Err(InvalidMessage(format!("total_prbs {} out of range", r.total_prbs)));
            }
            check_distinct(r.slices.iter().map(|s| s.snssai))?;
            r.slices.iter().try_for_each(|s| check_policy_range(&s.policy))
        }
        E2Body::E2SetupResponse(_) | E2Body::RicControlAck => Ok(()),
        E2Body::RicSubscriptionRequest(SubscriptionRequest { report_period_ms })
        | E2Body::RicSubscriptionResponse(SubscriptionResponse { report_period_ms }) => {
            if *report_period_ms == 0 {
                return Err(InvalidMessage("report period must be positive".into()));
            }
            Ok(())
        }
        E2Body::RicIndication(r) => {
            if r.records.is_empty() {
                return Err(InvalidMessage("indication without records".into()));
            }
            for rec in &r.records {
                if !(1..=15).contains(&rec.pdu_id) || rec.rnti == 0 || rec.mcs > MAX_MCS {
                    return Err(InvalidMessage(format!("record field out of range: {rec:?}")));
                }
                if !(is_on_grid(rec.bler) && (0.0..=1.0).contains(&rec.bler)) {
                    return Err(InvalidMessage(format!("bler {} not a 6-digit real in [0, 1]", rec.bler)));
                }
                if !(is_on_grid(rec.dl_thp_bps) && rec.dl_thp_bps >= 0.0) {
                    return Err(InvalidMessage(format!("throughput {} not a 6-digit real >= 0", rec.dl_thp_bps)));
                }
            }
            Ok(())
        }
        E2Body::RicControlRequest(r) => {
            if r.entries.is_empty() {
                return Err(InvalidMessage("control without entries".into()));
            }
            check_distinct(r.entries.iter().map(|(s, _)| *s))?;
            r.entries.iter().try_for_each(|(_, p)| check_policy_range(p))
        }
        E2Body::RicControlFailure(_) => Ok(()),
    }
}

/// Canonical JSON of a message, without the length prefix.
pub fn to_canonical_json(m: &E2Message) -> Result<String, InvalidMessage> {
    validate(m)?;
    Ok(message_json(m).to_canonical())
}

pub fn encode(m: &E2Message) -> Result<Vec<u8>, InvalidMessage> {
    let payload = to_canonical_json(m)?;
    if payload.len() > MAX_FRAME_LEN {
        return Err(InvalidMessage(format!("encoded size {} exceeds frame limit", payload.len())));
    }
    let mut out = Vec::with_capacity(HEADER_LEN + payload.len());
    out.extend_from_slice(&(payload.len() as u32).to_be_bytes());
    out.extend_from_slice(payload.as_bytes());
    Ok(out)
}

// ---- decoding ----

pub fn snssai_from(n: &Node) -> Result<Snssai, JsonError> {
    let f = Fields::of(n)?;
    f.only(&["sst", "sd"])?;
    let sst = f.uint("sst", 255)? as u8;
    let sd = f.opt_uint("sd", u64::from(SD_MAX))?.map(|v| v as u32);
    Ok(Snssai::new(sst, sd).expect("range checked"))
}

pub fn policy_from(n: &Node) -> Result<RrmPolicyRatio, JsonError> {
    let f = Fields::of(n)?;
    f.only(&["dedicated_pct", "min_pct", "max_pct"])?;
    Ok(RrmPolicyRatio::new(
        f.uint("dedicated_pct", 100)? as u8,
        f.uint("min_pct", 100)? as u8,
        f.uint("max_pct", 100)? as u8,
    ))
}

pub fn slice_from(n: &Node) -> Result<SliceConfig, JsonError> {
    let f = Fields::of(n)?;
    f.only(&["snssai", "policy"])?;
    Ok(SliceConfig::new(snssai_from(f.req("snssai")?)?, policy_from(f.req("policy")?)?))
}

fn ranged(n: &Node, what: &str, min: u64, max: u64) -> Result<u64, JsonError> {
    let v = as_uint(n, what, max)?;
    if v < min {
        return Err(JsonError { offset: n.offset, reason: format!("\"{what}\": {v} out of range {min}..={max}") });
    }
    Ok(v)
}

fn record_from(n: &Node) -> Result<KpmRecord, JsonError> {
    let f = Fields::of(n)?;
    f.only(&["timestamp_ms", "rnti", "snssai", "pdu_id", "mcs", "bler", "dl_thp_bps", "dl_prbs"])?;
    let bler_node = f.req("bler")?;
    let bler = f.real("bler")?;
    if !(0.0..=1.0).contains(&bler) {
        return Err(JsonError { offset: bler_node.offset, reason: format!("bler {bler} outside [0, 1]") });
    }
    let thp_node = f.req("dl_thp_bps")?;
    let thp = f.real("dl_thp_bps")?;
    if thp < 0.0 {
        return Err(JsonError { offset: thp_node.offset, reason: format!("throughput {thp} negative") });
    }
    Ok(KpmRecord {
        timestamp_ms: f.uint("timestamp_ms", u64::MAX)?,
        rnti: ranged(f.req("rnti")?, "rnti", 1, u64::from(u16::MAX))? as u16,
        snssai: snssai_from(f.req("snssai")?)?,
        pdu_id: ranged(f.req("pdu_id")?, "pdu_id", 1, 15)? as u8,
        mcs: f.uint("mcs", u64::from(MAX_MCS))? as u8,
        bler,
        dl_thp_bps: thp,
        dl_prbs: f.uint("dl_prbs", u64::MAX)?,
    })
}

fn violation_from(n: &Node) -> Result<Violation, JsonError> {
    let f = Fields::of(n)?;
    f.only(&["code", "detail"])?;
    let code_node = f.req("code")?;
    let code = f.str("code")?;
    let code = ViolationCode::parse(code)
        .ok_or_else(|| JsonError { offset: code_node.offset, reason: format!("unknown violation code \"{code}\"") })?;
    Ok(Violation::new(code, f.str("detail")?))
}

fn body_from(t: MsgType, f: &Fields<'_>) -> Result<E2Body, JsonError> {
    const HEAD: [&str; 2] = ["msg_type", "transaction_id"];
    let allow = |extra: &[&str]| -> Result<(), JsonError> {
        let all: Vec<&str> = HEAD.iter().chain(extra).copied().collect();
        f.only(&all)
    };
    Ok(match t {
        MsgType::E2SetupRequest => {
            allow(&["ran_node_id", "total_prbs", "slices"])?;
            E2Body::E2SetupRequest(SetupRequest {
                ran_node_id: f.str("ran_node_id")?.to_owned(),
                total_prbs: ranged(f.req("total_prbs")?, "total_prbs", 1, u64::from(u16::MAX))? as u32,
                slices: f.array("slices")?.iter().map(slice_from).collect::<Result<_, _>>()?,
            })
        }
        MsgType::E2SetupResponse => {
            allow(&["ric_id"])?;
            E2Body::E2SetupResponse(SetupResponse { ric_id: f.str("ric_id")?.to_owned() })
        }
        MsgType::RicSubscriptionRequest => {
            allow(&["report_period_ms"])?;
            E2Body::RicSubscriptionRequest(SubscriptionRequest {
                report_period_ms: ranged(f.req("report_period_ms")?, "report_period_ms", 1, u64::from(u32::MAX))?
                    as u32,
            })
        }
        MsgType::RicSubscriptionResponse => {
            allow(&["report_period_ms"])?;
            E2Body::RicSubscriptionResponse(SubscriptionResponse {
                report_period_ms: ranged(f.req("report_period_ms")?, "report_period_ms", 1, u64::from(u32::MAX))?
                    as u32,
            })
        }
        MsgType::RicIndication => {
            allow(&["ran_node_id", "records"])?;
            E2Body::RicIndication(RicIndicationBody {
                ran_node_id: f.str("ran_node_id")?.to_owned(),
                records: f.array("records")?.iter().map(record_from).collect::<Result<_, _>>()?,
            })
        }
        MsgType::RicControlRequest => {
            allow(&["ran_node_id", "entries"])?;
            let entries = f
                .array("entries")?
                .iter()
                .map(|n| {
                    let e = Fields::of(n)?;
                    e.only(&["snssai", "policy"])?;
                    Ok((snssai_from(e.req("snssai")?)?, policy_from(e.req("policy")?)?))
                })
                .collect::<Result<_, JsonError>>()?;
            E2Body::RicControlRequest(RicControlBody { ran_node_id: f.str("ran_node_id")?.to_owned(), entries })
        }
        MsgType::RicControlAck => {
            allow(&[])?;
            E2Body::RicControlAck
        }
        MsgType::RicControlFailure => {
            allow(&["violations"])?;
            E2Body::RicControlFailure(ControlFailure {
                violations: as_array(f.req("violations")?, "violations")?
                    .iter()
                    .map(violation_from)
                    .collect::<Result<_, _>>()?,
            })
        }
    })
}

/// Decodes the JSON payload of one frame. `payload` excludes the header.
fn decode_payload(payload: &[u8]) -> Result<E2Message, DecodeError> {
    let root = json::parse(payload).map_err(DecodeError::from_json)?;
    let f = Fields::of(&root).map_err(DecodeError::from_json)?;
    let type_node = f.req("msg_type").map_err(DecodeError::from_json)?;
    let type_name = json::as_str(type_node, "msg_type").map_err(DecodeError::from_json)?;
    let t = MsgType::parse(type_name).ok_or_else(|| DecodeError::UnknownType(type_name.to_owned()))?;
    let transaction_id = f.uint("transaction_id", u64::MAX).map_err(DecodeError::from_json)?;
    let body = body_from(t, &f).map_err(DecodeError::from_json)?;
    let msg = E2Message { transaction_id, body };

    let canonical = to_canonical_json(&msg).map_err(|e| DecodeError::malformed(HEADER_LEN, e.0))?;
    if canonical.as_bytes() != payload {
        let at = canonical.bytes().zip(payload).position(|(a, b)| a != *b).unwrap_or(canonical.len().min(payload.len()));
        return Err(DecodeError::malformed(HEADER_LEN + at, "non-canonical encoding"));
    }
    Ok(msg)
}

/// Decodes the first frame in `bytes`, returning the message and the number
/// of bytes it occupied.
pub fn decode_prefix(bytes: &[u8]) -> Result<(E2Message, usize), DecodeError> {
    if bytes.len() < HEADER_LEN {
        return Err(DecodeError::Truncated { needed: HEADER_LEN });
    }
    let len = u32::from_be_bytes(bytes[..HEADER_LEN].try_into().expect("4 bytes")) as usize;
    if len > MAX_FRAME_LEN {
        return Err(DecodeError::malformed(0, format!("frame length {len} exceeds limit {MAX_FRAME_LEN}")));
    }
    let total = HEADER_LEN + len;
    if bytes.len() < total {
        return Err(DecodeError::Truncated { needed: total });
    }
    Ok((decode_payload(&bytes[HEADER_LEN..total])?, total))
}

/// Decodes exactly one frame; bytes after it are an error.
pub fn decode(bytes: &[u8]) -> Result<E2Message, DecodeError> {
    let (msg, used) = decode_prefix(bytes)?;
    if used != bytes.len() {
        return Err(DecodeError::malformed(used, "trailing bytes after frame"));
    }
    Ok(msg)
}

/// Reassembles frames from an arbitrarily chunked byte stream.
#[derive(Debug, Default)]
pub struct FrameDecoder {
    buf: Vec<u8>,
}

impl FrameDecoder {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn push(&mut self, bytes: &[u8]) {
        self.buf.extend_from_slice(bytes);
    }

    pub fn buffered(&self) -> usize {
        self.buf.len()
    }

    /// Next complete message, `Ok(None)` if more bytes are needed.
    /// A malformed frame is consumed so the stream can be inspected further.
    pub fn next_message(&mut self) -> Result<Option<E2Message>, DecodeError> {
        match decode_prefix(&self.buf) {
            Ok((msg, used)) => {
                self.buf.drain(..used);
                Ok(Some(msg))
            }
            Err(DecodeError::Truncated { .. }) => Ok(None),
            Err(e) => {
                if self.buf.len() >= HEADER_LEN {
                    let len = u32::from_be_bytes(self.buf[..HEADER_LEN].try_into().expect("4 bytes")) as usize;
                    let skip = (HEADER_LEN + len).min(self.buf.len());
                    self.buf.drain(..skip);
                }
                Err(e)
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn ack(txn: u64) -> E2Message {
        E2Message::new(txn, E2Body::RicControlAck)
    }

    #[test]
    fn control_ack_golden() {
        let bytes = encode(&ack(7)).unwrap();
        let json = br#"{"msg_type":"RicControlAck","transaction_id":7}"#;
        assert_eq!(&bytes[..4], &(json.len() as u32).to_be_bytes());
        assert_eq!(&bytes[..4], &[0, 0, 0, 47]);
        assert_eq!(&bytes[4..], json);
    }

    #[test]
    fn empty_input_truncated() {
        assert_eq!(decode(&[]), Err(DecodeError::Truncated { needed: 4 }));
        assert_eq!(decode(&[0, 0, 0, 10, b'{']), Err(DecodeError::Truncated { needed: 14 }));
    }

    #[test]
    fn unknown_type() {
        let json = br#"{"msg_type":"Bogus","transaction_id":1}"#;
        let mut frame = (json.len() as u32).to_be_bytes().to_vec();
        frame.extend_from_slice(json);
        assert_eq!(decode(&frame), Err(DecodeError::UnknownType("Bogus".into())));
    }

    fn frame(json: &str) -> Vec<u8> {
        let mut f = (json.len() as u32).to_be_bytes().to_vec();
        f.extend_from_slice(json.as_bytes());
        f
    }

    fn malformed_reason(json: &str) -> String {
        match decode(&frame(json)) {
            Err(DecodeError::Malformed { reason, .. }) => reason,
            other => panic!("expected malformed, got {other:?}"),
        }
    }

    #[test]
    fn strictness() {
        assert!(malformed_reason(r#"{"msg_type":"RicControlAck","transaction_id":7,"transaction_id":8}"#).contains("duplicate"));
        assert!(malformed_reason(r#"{"msg_type":"RicControlAck"}"#).contains("missing"));
        assert!(malformed_reason(r#"{"msg_type":"RicControlAck","transaction_id":7}x"#).contains("trailing"));
        assert!(malformed_reason(r#"{"msg_type":"RicControlAck","transaction_id":7} "#).contains("non-canonical"));
        assert!(malformed_reason(r#"{"msg_type":"RicControlAck","transaction_id":-7}"#).contains("range"));
        assert!(malformed_reason(r#"{"msg_type":"RicControlAck","transaction_id":7,"x":1}"#).contains("unknown field"));
        assert!(malformed_reason(r#"{"transaction_id":7,"msg_type":"RicControlAck"}"#).contains("non-canonical"));
        assert!(malformed_reason(r#"{"msg_type":"RicSubscriptionRequest","report_period_ms":0,"transaction_id":1}"#)
            .contains("range"));
        assert!(malformed_reason(
            r#"{"entries":[{"policy":{"dedicated_pct":0,"max_pct":101,"min_pct":0},"snssai":{"sst":1}}],"msg_type":"RicControlRequest","ran_node_id":"g","transaction_id":1}"#
        )
        .contains("range"));
    }

    #[test]
    fn offsets_point_into_frame() {
        let json = r#"{"msg_type":"RicControlAck","transaction_id":7,"transaction_id":8}"#;
        let Err(DecodeError::Malformed { offset, .. }) = decode(&frame(json)) else { panic!() };
        assert_eq!(offset, 4 + json.find(r#""transaction_id":8"#).unwrap());
    }

    #[test]
    fn trailing_after_frame() {
        let mut bytes = encode(&ack(1)).unwrap();
        bytes.push(0);
        assert!(matches!(decode(&bytes), Err(DecodeError::Malformed { .. })));
        let (m, used) = decode_prefix(&bytes).unwrap();
        assert_eq!((m, used), (ack(1), bytes.len() - 1));
    }

    #[test]
    fn oversize_length_rejected_early() {
        assert!(matches!(decode(&[0xff, 0xff, 0xff, 0xff]), Err(DecodeError::Malformed { offset: 0, .. })));
    }

    #[test]
    fn encode_rejects_invalid() {
        let empty = E2Message::new(1, E2Body::RicIndication(RicIndicationBody { ran_node_id: "g".into(), records: vec![] }));
        assert!(encode(&empty).is_err());
        let s = Snssai::sst_only(1);
        let dup = E2Message::new(
            1,
            E2Body::RicControlRequest(RicControlBody {
                ran_node_id: "g".into(),
                entries: vec![(s, RrmPolicyRatio::unconstrained()), (s, RrmPolicyRatio::unconstrained())],
            }),
        );
        assert!(encode(&dup).is_err());
        let off_grid = E2Message::new(
            1,
            E2Body::RicIndication(RicIndicationBody {
                ran_node_id: "g".into(),
                records: vec![KpmRecord {
                    timestamp_ms: 0,
                    rnti: 1,
                    snssai: s,
                    pdu_id: 1,
                    mcs: 1,
                    bler: 0.1234567,
                    dl_thp_bps: 1.0,
                    dl_prbs: 0,
                }],
            }),
        );
        assert!(encode(&off_grid).is_err());
    }

    #[test]
    fn frame_decoder_chunking() {
        let msgs = [ack(1), ack(2), ack(3)];
        let stream: Vec<u8> = msgs.iter().flat_map(|m| encode(m).unwrap()).collect();
        let mut d = FrameDecoder::new();
        let mut out = vec![];
        for b in &stream {
            d.push(std::slice::from_ref(b));
            while let Some(m) = d.next_message().unwrap() {
                out.push(m);
            }
        }
        assert_eq!(out, msgs);
        assert_eq!(d.buffered(), 0);
    }
}
