//! Session layer: transports, the E2 setup handshake and transaction
//! bookkeeping on top of the frame codec.

use std::collections::{BTreeMap, BTreeSet};
use std::io::{ErrorKind, Read, Write};
use std::net::TcpStream;
use std::sync::mpsc;
use std::time::{Duration, Instant};

use super::codec::{
    encode, ControlFailure, DecodeError, E2Body, E2Message, FrameDecoder, InvalidMessage, MsgType,
    RicControlBody, RicIndicationBody, SetupRequest, SetupResponse, SubscriptionRequest, SubscriptionResponse,
};
use crate::model::Violation;

pub const DEFAULT_HANDSHAKE_TIMEOUT: Duration = Duration::from_secs(5);
pub const DEFAULT_E2_PORT: u16 = 36421;

/// Port from `E2_PORT`, falling back to the default.
pub fn e2_port_from_env() -> u16 {
    std::env::var("E2_PORT").ok().and_then(|v| v.parse().ok()).unwrap_or(DEFAULT_E2_PORT)
}

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum E2Error {
    #[error("E2 setup not completed within {0:?}")]
    HandshakeTimeout(Duration),
    #[error("protocol violation: {0}")]
    ProtocolViolation(String),
    #[error("transport closed")]
    TransportClosed,
    #[error("timed out after {0:?} waiting for {1}")]
    Timeout(Duration, &'static str),
    #[error(transparent)]
    Decode(#[from] DecodeError),
    #[error(transparent)]
    Invalid(#[from] InvalidMessage),
    #[error("transport i/o error: {0}")]
    Io(String),
}

/// Reliable, ordered byte stream.
pub trait Transport {
    fn send(&mut self, bytes: &[u8]) -> Result<(), E2Error>;
    /// Next chunk of bytes. `wait = None` polls without blocking; `Ok(None)`
    /// means nothing arrived in time.
    fn recv(&mut self, wait: Option<Duration>) -> Result<Option<Vec<u8>>, E2Error>;
}

/// One end of an in-process duplex pipe.
#[derive(Debug)]
pub struct PipeTransport {
    tx: mpsc::Sender<Vec<u8>>,
    rx: mpsc::Receiver<Vec<u8>>,
}

pub fn duplex_pipe() -> (PipeTransport, PipeTransport) {
    let (a_tx, b_rx) = mpsc::channel();
    let (b_tx, a_rx) = mpsc::channel();
    (PipeTransport { tx: a_tx, rx: a_rx }, PipeTransport { tx: b_tx, rx: b_rx })
}

impl Transport for PipeTransport {
    fn send(&mut self, bytes: &[u8]) -> Result<(), E2Error> {
        self.tx.send(bytes.to_vec()).map_err(|_| E2Error::TransportClosed)
    }

    fn recv(&mut self, wait: Option<Duration>) -> Result<Option<Vec<u8>>, E2Error> {
        match wait {
            None => match self.rx.try_recv() {
                Ok(b) => Ok(Some(b)),
                Err(mpsc::TryRecvError::Empty) => Ok(None),
                Err(mpsc::TryRecvError::Disconnected) => Err(E2Error::TransportClosed),
            },
            Some(d) => match self.rx.recv_timeout(d) {
                Ok(b) => Ok(Some(b)),
                Err(mpsc::RecvTimeoutError::Timeout) => Ok(None),
                Err(mpsc::RecvTimeoutError::Disconnected) => Err(E2Error::TransportClosed),
            },
        }
    }
}

#[derive(Debug)]
pub struct TcpTransport {
    stream: TcpStream,
    buf: Vec<u8>,
}

impl TcpTransport {
    pub fn new(stream: TcpStream) -> Result<Self, E2Error> {
        stream.set_nodelay(true).map_err(io_err)?;
        Ok(Self { stream, buf: vec![0; 64 * 1024] })
    }
}

fn io_err(e: std::io::Error) -> E2Error {
    E2Error::Io(e.to_string())
}

impl Transport for TcpTransport {
    fn send(&mut self, bytes: &[u8]) -> Result<(), E2Error> {
        self.stream.set_nonblocking(false).map_err(io_err)?;
        self.stream.write_all(bytes).map_err(|e| match e.kind() {
            ErrorKind::BrokenPipe | ErrorKind::ConnectionReset => E2Error::TransportClosed,
            _ => io_err(e),
        })
    }

    fn recv(&mut self, wait: Option<Duration>) -> Result<Option<Vec<u8>>, E2Error> {
        match wait {
            None => self.stream.set_nonblocking(true).map_err(io_err)?,
            Some(d) => {
                self.stream.set_nonblocking(false).map_err(io_err)?;
                self.stream.set_read_timeout(Some(d.max(Duration::from_millis(1)))).map_err(io_err)?;
            }
        }
        match self.stream.read(&mut self.buf) {
            Ok(0) => Err(E2Error::TransportClosed),
            Ok(n) => Ok(Some(self.buf[..n].to_vec())),
            Err(e) if matches!(e.kind(), ErrorKind::WouldBlock | ErrorKind::TimedOut | ErrorKind::Interrupted) => {
                Ok(None)
            }
            Err(e) if matches!(e.kind(), ErrorKind::ConnectionReset | ErrorKind::ConnectionAborted) => {
                Err(E2Error::TransportClosed)
            }
            Err(e) => Err(io_err(e)),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Role {
    Gnb,
    Ric,
}

/// Framing plus transaction rules shared by both roles:
/// initiating messages carry strictly increasing ids per sender, every
/// response echoes an outstanding request id of the matching type, and only
/// setup messages may flow before the setup exchange completes.
#[derive(Debug)]
pub struct Endpoint<T> {
    role: Role,
    transport: T,
    decoder: FrameDecoder,
    next_txn: u64,
    /// Our requests awaiting a response.
    outstanding: BTreeMap<u64, MsgType>,
    /// Peer requests we still owe a response.
    owed: BTreeMap<u64, MsgType>,
    peer_last_txn: Option<u64>,
    established: bool,
}

impl<T: Transport> Endpoint<T> {
    pub fn new(role: Role, transport: T) -> Self {
        Self {
            role,
            transport,
            decoder: FrameDecoder::new(),
            next_txn: 1,
            outstanding: BTreeMap::new(),
            owed: BTreeMap::new(),
            peer_last_txn: None,
            established: false,
        }
    }

    pub fn role(&self) -> Role {
        self.role
    }

    pub fn is_established(&self) -> bool {
        self.established
    }

    pub fn outstanding(&self) -> impl Iterator<Item = (u64, MsgType)> + '_ {
        self.outstanding.iter().map(|(k, v)| (*k, *v))
    }

    pub fn into_transport(self) -> T {
        self.transport
    }

    fn check_direction(&self, t: MsgType, outgoing: bool) -> Result<(), E2Error> {
        let gnb_side = matches!(self.role, Role::Gnb) == outgoing;
        if t.sent_by_gnb() != gnb_side {
            let who = if outgoing { "local" } else { "peer" };
            return Err(E2Error::ProtocolViolation(format!("{t} not allowed from {who} {:?} side", self.role)));
        }
        if !self.established && !matches!(t, MsgType::E2SetupRequest | MsgType::E2SetupResponse) {
            return Err(E2Error::ProtocolViolation(format!("{t} before E2 setup completed")));
        }
        Ok(())
    }

    fn write(&mut self, msg: &E2Message) -> Result<(), E2Error> {
        let frame = encode(msg)?;
        self.transport.send(&frame)
    }

    /// Sends an initiating message with a fresh transaction id.
    pub fn send_initiating(&mut self, body: E2Body) -> Result<u64, E2Error> {
        let t = body.msg_type();
        if t.is_response() {
            return Err(E2Error::ProtocolViolation(format!("{t} is a response")));
        }
        self.check_direction(t, true)?;
        let txn = self.next_txn;
        self.write(&E2Message::new(txn, body))?;
        self.next_txn += 1;
        if t != MsgType::RicIndication {
            self.outstanding.insert(txn, t);
        }
        Ok(txn)
    }

    pub fn respond(&mut self, txn: u64, body: E2Body) -> Result<(), E2Error> {
        let t = body.msg_type();
        let Some(request) = t.answers() else {
            return Err(E2Error::ProtocolViolation(format!("{t} is not a response")));
        };
        self.check_direction(t, true)?;
        match self.owed.get(&txn) {
            Some(&r) if r == request => {}
            _ => return Err(E2Error::ProtocolViolation(format!("no pending {request} with transaction {txn}"))),
        }
        self.write(&E2Message::new(txn, body))?;
        self.owed.remove(&txn);
        if t == MsgType::E2SetupResponse {
            self.established = true;
        }
        Ok(())
    }

    fn admit(&mut self, msg: &E2Message) -> Result<(), E2Error> {
        let t = msg.msg_type();
        self.check_direction(t, false)?;
        let txn = msg.transaction_id;
        if let Some(request) = t.answers() {
            match self.outstanding.get(&txn) {
                Some(&r) if r == request => {
                    self.outstanding.remove(&txn);
                }
                _ => {
                    return Err(E2Error::ProtocolViolation(format!(
                        "{t} with transaction {txn} matches no outstanding {request}"
                    )))
                }
            }
            if t == MsgType::E2SetupResponse {
                self.established = true;
            }
        } else {
            if self.peer_last_txn.is_some_and(|last| txn <= last) {
                return Err(E2Error::ProtocolViolation(format!("transaction id {txn} not increasing")));
            }
            self.peer_last_txn = Some(txn);
            if t != MsgType::RicIndication {
                self.owed.insert(txn, t);
            }
        }
        Ok(())
    }

    /// Next inbound message. `wait = None` only consumes what already arrived.
    pub fn recv(&mut self, wait: Option<Duration>) -> Result<Option<E2Message>, E2Error> {
        let deadline = wait.map(|d| Instant::now() + d);
        loop {
            if let Some(msg) = self.decoder.next_message()? {
                self.admit(&msg)?;
                return Ok(Some(msg));
            }
            let remaining = match deadline {
                None => None,
                Some(d) => {
                    let now = Instant::now();
                    if now >= d {
                        return Ok(None);
                    }
                    Some(d - now)
                }
            };
            match self.transport.recv(remaining)? {
                Some(bytes) => self.decoder.push(&bytes),
                None if deadline.is_none() => return Ok(None),
                None => {}
            }
        }
    }
}

/// gNB-side reactions to RIC requests.
pub trait GnbHandler {
    fn on_subscription(&mut self, req: &SubscriptionRequest) -> SubscriptionResponse;
    /// Applies a policy update, or returns the violations that rejected it.
    fn on_control(&mut self, body: &RicControlBody) -> Result<(), Vec<Violation>>;
}

#[derive(Debug, Clone, PartialEq)]
pub enum ControlOutcome {
    Ack,
    Failure(Vec<Violation>),
}

/// RIC-side reactions to gNB messages.
pub trait RicHandler {
    fn on_setup(&mut self, req: &SetupRequest) -> SetupResponse;
    fn on_subscribed(&mut self, _resp: &SubscriptionResponse) {}
    /// Returns control requests to send in reply to this report.
    fn on_indication(&mut self, body: &RicIndicationBody) -> Vec<RicControlBody>;
    fn on_control_sent(&mut self, _txn: u64, _body: &RicControlBody) {}
    fn on_control_outcome(&mut self, txn: u64, outcome: ControlOutcome);
}

/// gNB that has sent its setup request and waits for the answer.
#[derive(Debug)]
pub struct PendingSetup<T> {
    ep: Endpoint<T>,
}

impl<T: Transport> PendingSetup<T> {
    pub fn finish(mut self, timeout: Duration) -> Result<(GnbSession<T>, SetupResponse), E2Error> {
        let deadline = Instant::now() + timeout;
        loop {
            let now = Instant::now();
            if now >= deadline {
                return Err(E2Error::HandshakeTimeout(timeout));
            }
            match self.ep.recv(Some(deadline - now))? {
                Some(E2Message { body: E2Body::E2SetupResponse(r), .. }) => {
                    return Ok((GnbSession { ep: self.ep }, r));
                }
                Some(other) => {
                    return Err(E2Error::ProtocolViolation(format!("expected E2SetupResponse, got {}", other.msg_type())))
                }
                None => {}
            }
        }
    }
}

#[derive(Debug)]
pub struct GnbSession<T> {
    ep: Endpoint<T>,
}

impl<T: Transport> GnbSession<T> {
    /// Sends the setup request without waiting; see [`PendingSetup::finish`].
    pub fn start(transport: T, setup: SetupRequest) -> Result<PendingSetup<T>, E2Error> {
        let mut ep = Endpoint::new(Role::Gnb, transport);
        ep.send_initiating(E2Body::E2SetupRequest(setup))?;
        Ok(PendingSetup { ep })
    }

    pub fn connect(transport: T, setup: SetupRequest, timeout: Duration) -> Result<(Self, SetupResponse), E2Error> {
        Self::start(transport, setup)?.finish(timeout)
    }

    pub fn send_indication(&mut self, body: RicIndicationBody) -> Result<u64, E2Error> {
        self.ep.send_initiating(E2Body::RicIndication(body))
    }

    /// Handles one inbound message, waiting up to `wait` for it. Returns the
    /// message type handled.
    pub fn dispatch_one(
        &mut self,
        handler: &mut impl GnbHandler,
        wait: Option<Duration>,
    ) -> Result<Option<MsgType>, E2Error> {
        let Some(msg) = self.ep.recv(wait)? else { return Ok(None) };
        let t = msg.msg_type();
        match msg.body {
            E2Body::RicSubscriptionRequest(req) => {
                let resp = handler.on_subscription(&req);
                self.ep.respond(msg.transaction_id, E2Body::RicSubscriptionResponse(resp))?;
            }
            E2Body::RicControlRequest(body) => {
                let reply = match handler.on_control(&body) {
                    Ok(()) => E2Body::RicControlAck,
                    Err(violations) => E2Body::RicControlFailure(ControlFailure { violations }),
                };
                self.ep.respond(msg.transaction_id, reply)?;
            }
            other => {
                return Err(E2Error::ProtocolViolation(format!("unexpected {} at gNB", other.msg_type())));
            }
        }
        Ok(Some(t))
    }

    /// Handles everything already received.
    pub fn dispatch_ready(&mut self, handler: &mut impl GnbHandler) -> Result<usize, E2Error> {
        let mut n = 0;
        while self.dispatch_one(handler, None)?.is_some() {
            n += 1;
        }
        Ok(n)
    }

    pub fn endpoint(&self) -> &Endpoint<T> {
        &self.ep
    }

    pub fn into_transport(self) -> T {
        self.ep.into_transport()
    }
}

#[derive(Debug)]
pub struct RicSession<T> {
    ep: Endpoint<T>,
    controls: BTreeSet<u64>,
}

impl<T: Transport> RicSession<T> {
    /// Waits for the gNB's setup request and answers it.
    pub fn accept(
        transport: T,
        handler: &mut impl RicHandler,
        timeout: Duration,
    ) -> Result<(Self, SetupRequest), E2Error> {
        let mut ep = Endpoint::new(Role::Ric, transport);
        let deadline = Instant::now() + timeout;
        loop {
            let now = Instant::now();
            if now >= deadline {
                return Err(E2Error::HandshakeTimeout(timeout));
            }
            match ep.recv(Some(deadline - now))? {
                Some(E2Message { transaction_id, body: E2Body::E2SetupRequest(req) }) => {
                    let resp = handler.on_setup(&req);
                    ep.respond(transaction_id, E2Body::E2SetupResponse(resp))?;
                    return Ok((Self { ep, controls: BTreeSet::new() }, req));
                }
                Some(other) => {
                    return Err(E2Error::ProtocolViolation(format!("expected E2SetupRequest, got {}", other.msg_type())))
                }
                None => {}
            }
        }
    }

    pub fn subscribe(&mut self, report_period_ms: u32) -> Result<u64, E2Error> {
        self.ep.send_initiating(E2Body::RicSubscriptionRequest(SubscriptionRequest { report_period_ms }))
    }

    pub fn send_control(&mut self, body: RicControlBody) -> Result<u64, E2Error> {
        let txn = self.ep.send_initiating(E2Body::RicControlRequest(body))?;
        self.controls.insert(txn);
        Ok(txn)
    }

    /// Controls sent and not yet answered.
    pub fn pending_controls(&self) -> usize {
        self.controls.len()
    }

    pub fn dispatch_one(
        &mut self,
        handler: &mut impl RicHandler,
        wait: Option<Duration>,
    ) -> Result<Option<MsgType>, E2Error> {
        let Some(msg) = self.ep.recv(wait)? else { return Ok(None) };
        let t = msg.msg_type();
        match msg.body {
            E2Body::RicSubscriptionResponse(r) => handler.on_subscribed(&r),
            E2Body::RicIndication(body) => {
                for control in handler.on_indication(&body) {
                    let txn = self.send_control(control.clone())?;
                    handler.on_control_sent(txn, &control);
                }
            }
            E2Body::RicControlAck => {
                self.controls.remove(&msg.transaction_id);
                handler.on_control_outcome(msg.transaction_id, ControlOutcome::Ack);
            }
            E2Body::RicControlFailure(f) => {
                self.controls.remove(&msg.transaction_id);
                handler.on_control_outcome(msg.transaction_id, ControlOutcome::Failure(f.violations));
            }
            other => {
                return Err(E2Error::ProtocolViolation(format!("unexpected {} at RIC", other.msg_type())));
            }
        }
        Ok(Some(t))
    }

    pub fn dispatch_ready(&mut self, handler: &mut impl RicHandler) -> Result<usize, E2Error> {
        let mut n = 0;
        while self.dispatch_one(handler, None)?.is_some() {
            n += 1;
        }
        Ok(n)
    }

    pub fn endpoint(&self) -> &Endpoint<T> {
        &self.ep
    }
}

/// RIC event loop for a connection: setup, subscription, then dispatch until
/// the gNB closes the stream.
pub fn run_ric_endpoint<T: Transport>(
    transport: T,
    handler: &mut impl RicHandler,
    report_period_ms: u32,
    handshake_timeout: Duration,
) -> Result<(), E2Error> {
    let (mut session, _) = RicSession::accept(transport, handler, handshake_timeout)?;
    session.subscribe(report_period_ms)?;
    loop {
        match session.dispatch_one(handler, Some(Duration::from_secs(3600))) {
            Ok(_) => {}
            Err(E2Error::TransportClosed) => return Ok(()),
            Err(e) => return Err(e),
        }
    }
}
