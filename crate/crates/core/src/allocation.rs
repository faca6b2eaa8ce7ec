//! Memory/latency profiles and the composite depth rule
//! `d = clamp(floor(alpha*m) + floor(beta*(lat_max - lat)/(lat_max - lat_min + eps)), 1, L-1)`.

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::nn::DenseLayer;
use crate::rng::{derive_seed, stream_rng, Stream};
use crate::supernet::{ClientHead, SuperNet};

pub const MEMORY_RANGE_GB: (f64, f64) = (2.0, 16.0);
pub const LATENCY_RANGE_MS: (f64, f64) = (20.0, 200.0);

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ClientProfile {
    pub memory_gb: f64,
    pub latency_ms: f64,
}

impl ClientProfile {
    pub fn validate(&self) -> Result<()> {
        if !(self.memory_gb.is_finite() && self.memory_gb > 0.0) {
            return Err(Error::Input(format!("memory must be positive, got {}", self.memory_gb)));
        }
        if !(self.latency_ms.is_finite() && self.latency_ms > 0.0) {
            return Err(Error::Input(format!("latency must be positive, got {}", self.latency_ms)));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AllocationConfig {
    /// Layers per GB of memory.
    pub alpha: f64,
    /// Layers granted to the fastest client.
    pub beta: f64,
    pub epsilon: f64,
    pub total_layers: usize,
}

impl AllocationConfig {
    pub fn with_layers(total_layers: usize) -> Self {
        Self { alpha: 0.5, beta: 4.0, epsilon: 1e-8, total_layers }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.alpha >= 0.0 && self.alpha.is_finite()) {
            return Err(Error::config("allocation.alpha", "must be finite and >= 0"));
        }
        if !(self.beta >= 0.0 && self.beta.is_finite()) {
            return Err(Error::config("allocation.beta", "must be finite and >= 0"));
        }
        if !(self.epsilon > 0.0 && self.epsilon.is_finite()) {
            return Err(Error::config("allocation.epsilon", "must be finite and > 0"));
        }
        if self.total_layers < 2 {
            return Err(Error::config("layer_dims", "need at least two encoder layers"));
        }
        Ok(())
    }
}

/// Cohort latency extremes, fixed once at initialization.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LatencyBounds {
    pub min_ms: f64,
    pub max_ms: f64,
}

impl LatencyBounds {
    pub fn of(profiles: &[ClientProfile]) -> Option<Self> {
        let first = profiles.first()?;
        Some(profiles.iter().fold(
            Self { min_ms: first.latency_ms, max_ms: first.latency_ms },
            |b, p| Self { min_ms: b.min_ms.min(p.latency_ms), max_ms: b.max_ms.max(p.latency_ms) },
        ))
    }
}

/// Simulated one-off profiling: memory ~ U[2, 16] GB, latency ~ U[20, 200] ms.
pub fn measure_profiles(num_clients: usize, seed: u64) -> Vec<ClientProfile> {
    let mut rng = stream_rng(seed, Stream::Profiles, 0);
    (0..num_clients)
        .map(|_| ClientProfile {
            memory_gb: rng.random_range(MEMORY_RANGE_GB.0..=MEMORY_RANGE_GB.1),
            latency_ms: rng.random_range(LATENCY_RANGE_MS.0..=LATENCY_RANGE_MS.1),
        })
        .collect()
}

/// Memory and latency scores before clamping.
pub fn depth_scores(profile: &ClientProfile, bounds: LatencyBounds, cfg: &AllocationConfig) -> (f64, f64) {
    let memory = (cfg.alpha * profile.memory_gb).floor();
    let latency = (cfg.beta * (bounds.max_ms - profile.latency_ms)
        / (bounds.max_ms - bounds.min_ms + cfg.epsilon))
        .floor();
    (memory, latency)
}

pub fn compute_depth(profile: &ClientProfile, bounds: LatencyBounds, cfg: &AllocationConfig) -> Result<usize> {
    profile.validate()?;
    cfg.validate()?;
    if profile.latency_ms < bounds.min_ms || profile.latency_ms > bounds.max_ms {
        return Err(Error::Input(format!(
            "latency {} ms outside observed range [{}, {}]",
            profile.latency_ms, bounds.min_ms, bounds.max_ms
        )));
    }
    let (memory, latency) = depth_scores(profile, bounds, cfg);
    let cap = (cfg.total_layers - 1) as f64;
    Ok((memory + latency).clamp(1.0, cap) as usize)
}

/// One client's slice of the super-network.
#[derive(Debug, Clone, PartialEq)]
pub struct Allocation {
    pub depth: usize,
    pub prefix: Vec<DenseLayer>,
    pub head: ClientHead,
}

/// Assigns every client a depth, its encoder prefix and a fresh local head.
/// Heads are seeded per client from `seed`.
pub fn allocate_all(
    profiles: &[ClientProfile],
    cfg: &AllocationConfig,
    net: &SuperNet,
    seed: u64,
) -> Result<Vec<Allocation>> {
    let bounds = LatencyBounds::of(profiles).ok_or_else(|| Error::Input("no client profiles".into()))?;
    if cfg.total_layers != net.depth() {
        return Err(Error::Input(format!(
            "allocation configured for {} layers, network has {}",
            cfg.total_layers,
            net.depth()
        )));
    }
    profiles
        .iter()
        .enumerate()
        .map(|(i, p)| {
            let depth = compute_depth(p, bounds, cfg)?;
            Ok(Allocation {
                depth,
                prefix: net.slice_prefix(depth)?,
                head: net.make_client_head(depth, net.num_classes(), derive_seed(seed, Stream::Heads, i as u64))?,
            })
        })
        .collect()
}
