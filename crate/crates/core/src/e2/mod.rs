//! E2 interface: canonical JSON framing, the message set and the session
//! rules both ends enforce.

pub mod codec;
pub mod endpoint;
pub mod json;

pub use codec::{
    decode, decode_prefix, encode, ControlFailure, DecodeError, E2Body, E2Message, FrameDecoder, InvalidMessage,
    MsgType, RicControlBody, RicIndicationBody, SetupRequest, SetupResponse, SubscriptionRequest,
    SubscriptionResponse, HEADER_LEN, MAX_FRAME_LEN,
};
pub use endpoint::{
    duplex_pipe, e2_port_from_env, run_ric_endpoint, ControlOutcome, E2Error, Endpoint, GnbHandler, GnbSession,
    PendingSetup, PipeTransport, RicHandler, RicSession, Role, TcpTransport, Transport, DEFAULT_E2_PORT,
    DEFAULT_HANDSHAKE_TIMEOUT,
};
