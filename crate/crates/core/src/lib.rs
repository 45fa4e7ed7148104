//! Sliced 5G downlink MAC scheduler under closed-loop control of a near-real-time
//! RIC, simulated on a virtual slot clock.
//!
//! Layers, bottom up:
//!
//! - [`model`]: slice identities, RRM policy ratios, UEs and PDU sessions,
//!   configuration validation.
//! - [`phy`]: numerology, MCS to bytes-per-PRB, BLER and traffic sources.
//! - [`mac`]: the two-tier scheduler (per-slice budgets, then per-PRB
//!   proportional fair inside each slice).
//! - [`e2`]: length-prefixed canonical JSON frames and the E2 session rules.
//! - [`ric`]: KPM store, slicing xApp and the RIC runtime.
//! - [`sim`]: scenarios, the simulation loop, built-in experiments and
//!   artifact verification.

pub mod e2;
pub mod mac;
pub mod model;
pub mod phy;
pub mod ric;
pub mod sim;
