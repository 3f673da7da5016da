//! Power allocation for NOMA-based optical wireless networks.
//!
//! The crate covers the VLC channel model with imperfect CSI, NOMA rate
//! expressions under SIC, random linear network coding over GF(2^8), a
//! small dense network library, the NAF and DDPG agents, classic baselines
//! and a reproducible experiment harness.

#![allow(
    clippy::neg_cmp_op_on_partial_ord,
    clippy::needless_range_loop,
    clippy::suspicious_arithmetic_impl,
    clippy::suspicious_op_assign_impl
)]

pub mod agent;
pub mod baselines;
pub mod channel;
pub mod env;
pub mod error;
pub mod harness;
pub mod nn;
pub mod projection;
pub mod rates;
pub mod rlnc;
pub mod scenario;
pub mod seed;

pub use channel::{AccessPoint, ChannelEstimate, ReceiverProfile, UserState};
pub use error::{Error, Result};
pub use harness::{Method, MethodResult, RunManifest};
pub use rates::{GroupLink, NoiseModel, PowerAllocation, RateReport};
pub use scenario::{AgentMode, Scenario};
pub use seed::SeedStreams;
