//! One client training step: local supervision, server supervision, and the
//! fused encoder update, with a local-only fallback when the server times out.

mod connectivity;
mod fusion;
pub(crate) mod step;

pub use connectivity::{ConnectivityOracle, LinkStatus};
pub use fusion::{fuse, fusion_weight, FusionRule, FusionWeights};
pub use step::{
    fallback_step, phase1_local, phase2_server, tpgf_step, Batch, ClientState, LocalPhase, ServerPhase,
    StepMode, StepOutcome, TpgfConfig,
};

/// Seconds a client waits for the server before training locally.
pub const DEFAULT_TIMEOUT_S: f64 = 5.0;
