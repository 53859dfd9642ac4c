//! Rejection-proof mechanisms for multi-agent kidney exchange.
//!
//! The crate models agent-partitioned compatibility graphs, enumerates cycles
//! and chains, solves exchange-packing programs exactly and implements three
//! mechanisms: the social optimum, MaxInt and the maximum rejection-proof
//! solution (computed by row generation). Strategic behaviour (withholding and
//! rejection) can be simulated and summarized by the experiment harness.

pub mod engine;
pub mod error;
pub mod exchange;
pub mod experiment;
pub mod fixtures;
pub mod generate;
pub mod io;
pub mod market;
pub mod mechanisms;
pub mod model;
pub mod oracle;
pub mod par;
pub mod reduction;
pub mod strategies;
pub mod weight;

pub use error::{Error, Result};
pub use exchange::{enumerate_exchanges, Exchange, ExchangeKind, Owner};
pub use market::{Market, Solution};
pub use model::{
    validate_instance, AgentId, ExchangeId, Instance, InstanceBuilder, RawInstance, VertexId,
    VertexKind, WeightMode,
};
pub use par::Execution;
pub use weight::Weight;
