use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::nn::GradientSet;

/// Convex weights for the local and server-derived encoder gradients.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FusionWeights {
    pub client: f64,
    pub server: f64,
}

impl FusionWeights {
    pub fn from_client(client: f64) -> Self {
        Self { client, server: 1.0 - client }
    }
}

/// Depth-and-loss client weight:
///
/// `w_c = d_i/(d_i+d_s) * (L_c+eps)^-1 / ((L_c+eps)^-1 + (L_s+eps)^-1)`, `w_s = 1 - w_c`.
pub fn fusion_weight(
    client_loss: f64,
    server_loss: f64,
    client_depth: usize,
    server_depth: usize,
    epsilon: f64,
) -> FusionWeights {
    FusionWeights::from_client(
        depth_factor(client_depth, server_depth) * reliability_factor(client_loss, server_loss, epsilon),
    )
}

fn depth_factor(client_depth: usize, server_depth: usize) -> f64 {
    client_depth as f64 / (client_depth + server_depth) as f64
}

fn reliability_factor(client_loss: f64, server_loss: f64, epsilon: f64) -> f64 {
    let inv_c = 1.0 / (client_loss + epsilon);
    let inv_s = 1.0 / (server_loss + epsilon);
    inv_c / (inv_c + inv_s)
}

/// Which factors of the client weight are active. `Full` is the standard rule;
/// the others exist for ablations and equivalence checks.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum FusionRule {
    #[default]
    Full,
    /// Loss factor removed: `w_c = d_i / (d_i + d_s)`.
    DepthOnly,
    /// Depth factor removed: `w_c` is the inverse-loss share alone.
    LossOnly,
    /// `w_c = w_s = 1/2`.
    Equal,
    /// Constant client weight in `[0, 1]`.
    Fixed(f64),
}

impl FusionRule {
    pub fn weights(
        self,
        client_loss: f64,
        server_loss: f64,
        client_depth: usize,
        server_depth: usize,
        epsilon: f64,
    ) -> FusionWeights {
        match self {
            FusionRule::Full => fusion_weight(client_loss, server_loss, client_depth, server_depth, epsilon),
            FusionRule::DepthOnly => FusionWeights::from_client(depth_factor(client_depth, server_depth)),
            FusionRule::LossOnly => {
                FusionWeights::from_client(reliability_factor(client_loss, server_loss, epsilon))
            }
            FusionRule::Equal => FusionWeights::from_client(0.5),
            FusionRule::Fixed(w) => FusionWeights::from_client(w),
        }
    }

    pub fn name(self) -> String {
        match self {
            FusionRule::Full => "full".into(),
            FusionRule::DepthOnly => "depth_only".into(),
            FusionRule::LossOnly => "loss_only".into(),
            FusionRule::Equal => "equal".into(),
            FusionRule::Fixed(w) => format!("fixed({w})"),
        }
    }

    pub fn validate(self) -> Result<()> {
        match self {
            FusionRule::Fixed(w) if !(0.0..=1.0).contains(&w) => {
                Err(Error::config("tpgf.fusion", format!("fixed client weight {w} outside [0, 1]")))
            }
            _ => Ok(()),
        }
    }
}

/// `w_c * g_client + w_s * g_server`, elementwise.
pub fn fuse(g_client: &GradientSet, g_server: &GradientSet, w: FusionWeights) -> Result<GradientSet> {
    if !g_client.is_aligned_with(g_server) {
        return Err(Error::Shape(format!(
            "cannot fuse gradients over [{}, {}) and [{}, {})",
            g_client.start,
            g_client.end(),
            g_server.start,
            g_server.end()
        )));
    }
    let mut out = g_client.clone();
    out.scale(w.client);
    out.axpy(w.server, g_server)?;
    Ok(out)
}
