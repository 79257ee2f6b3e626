//! Discrete-time simulation and analysis of entanglement routing over
//! quantum repeater networks with time-multiplexed links.
//!
//! The model runs in rounds of `k` time slots. During the external phase each
//! edge attempts one entanglement link per slot (success probability `p`),
//! and surviving links — memories decohere — form a snapshot. In the internal
//! phase repeaters pair up link endpoints with Bell-state measurements
//! (success probability `q` per swap), splicing links into end-to-end chains
//! between the two consumers, alice and bob.
//!
//! Modules:
//! - [`topology`]: networks, metrics, edge-disjoint path finding
//! - [`linkgen`]: external phase and decoherence
//! - [`routing`]: swap decisions (dynamic and static) and chain tracing
//! - [`oracle`]: exhaustive and greedy per-snapshot capacity references
//! - [`analytic`]: closed-form rates and bounds
//! - [`montecarlo`]: seeded, parallel rate estimation and sweeps

#![forbid(unsafe_code)]

pub mod analytic;
pub mod error;
pub mod linkgen;
pub mod montecarlo;
pub mod oracle;
pub mod rng;
pub mod routing;
pub mod topology;

pub use error::{Error, Result};
