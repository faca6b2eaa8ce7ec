//! Resource-aware split federated learning.
//!
//! A global dense "super-network" is sliced into contiguous encoder prefixes
//! sized to each client's memory and latency. Clients train their prefix with
//! a fusion of two gradients: one from a small local classifier head and one
//! returned by the server, which runs the rest of the network. Training keeps
//! going on the local head alone when the server does not answer in time, and
//! the prefixes are merged back with depth- and loss-weighted, layer-aligned
//! averaging.
//!
//! The crate also ships a deterministic simulator ([`sim`]) that runs the
//! whole protocol on synthetic non-IID data and accounts communication bytes
//! and simulated wall time, plus the configuration and preset machinery used
//! by the `hetsplit` binary.

pub mod aggregation;
pub mod allocation;
pub mod config;
pub mod error;
pub mod metrics;
pub mod nn;
pub mod presets;
pub mod report;
pub mod rng;
pub mod sim;
pub mod supernet;
pub mod tpgf;

pub use aggregation::{AggWeight, AggregationConfig, ClientReport};
pub use allocation::{AllocationConfig, ClientProfile};
pub use config::{ExperimentConfig, Mode};
pub use error::{Error, Result};
pub use metrics::RoundMetrics;
pub use nn::{Activation, DenseLayer, GradientSet, Tensor};
pub use supernet::{ClientHead, SuperNet};
pub use tpgf::{ClientState, ConnectivityOracle, FusionRule, FusionWeights, StepMode, StepOutcome};
