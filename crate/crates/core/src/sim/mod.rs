//! Deterministic round-based simulator: synthetic data, non-IID shards,
//! connectivity failures, byte and time accounting, and the round loop for
//! every training mode.

mod baseline;
mod clock;
mod data;
mod ledger;
mod partition;

use rand::seq::SliceRandom;
use serde::Serialize;

pub use baseline::baseline_sfl_step;
pub use clock::{ClockEvent, ClockEventKind, SimClock};
pub use data::{generate_dataset, generate_splits, Dataset, SyntheticTask};
pub use ledger::{account_bytes, ByteTotals, Channel, CommEvent, CommLedger, FRAME_HEADER_BYTES};
pub use partition::{dirichlet_partition, label_entropy, Shard};

use crate::aggregation::{aggregate_layer, aggregate_round, fused_loss, ClientReport};
use crate::allocation::{allocate_all, measure_profiles, ClientProfile};
use crate::config::{ExperimentConfig, Mode, ServerUpdate};
use crate::error::Result;
use crate::metrics::RoundMetrics;
use crate::nn::{accuracy, forward, DenseLayer};
use crate::rng::{stream_rng, SimRng, Stream};
use crate::supernet::SuperNet;
use crate::tpgf::{fallback_step, tpgf_step, ClientState, ConnectivityOracle, StepMode, StepOutcome};

/// Per-client, per-round server availability drawn from `seed`.
pub fn sample_connectivity(num_clients: usize, rounds: usize, availability_p: f64, seed: u64) -> ConnectivityOracle {
    ConnectivityOracle::sample(num_clients, rounds, availability_p, seed)
}

/// One client step as it happened.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct StepRecord {
    pub round: usize,
    pub step: usize,
    pub client: usize,
    #[serde(skip)]
    pub mode: StepMode,
    pub client_loss: Option<f64>,
    pub server_loss: Option<f64>,
    pub w_client: Option<f64>,
}

/// One client's contribution to one aggregation.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct AuditRecord {
    pub round: usize,
    pub client_id: usize,
    pub depth: usize,
    pub client_loss: f64,
    pub server_loss: Option<f64>,
    pub fused_loss: f64,
    pub weight: f64,
}

#[derive(Debug, Clone)]
pub struct ExperimentOutput {
    pub metrics: Vec<RoundMetrics>,
    pub profiles: Vec<ClientProfile>,
    pub depths: Vec<usize>,
    pub shard_sizes: Vec<usize>,
    pub net: SuperNet,
    pub clients: Vec<ClientState>,
    pub ledger: CommLedger,
    pub clock: SimClock,
    pub steps: Vec<StepRecord>,
    /// Filled only when aggregation auditing is enabled.
    pub audit: Vec<AuditRecord>,
    /// `(round, client)` pairs whose reports failed alignment.
    pub rejected: Vec<(usize, usize)>,
}

/// Cycles through a shard in reshuffled epochs.
struct ShardSampler {
    order: Vec<usize>,
    cursor: usize,
    rng: SimRng,
}

impl ShardSampler {
    fn new(indices: &[usize], rng: SimRng) -> Self {
        let mut s = Self { order: indices.to_vec(), cursor: 0, rng };
        s.order.shuffle(&mut s.rng);
        s
    }

    fn next(&mut self, batch_size: usize) -> Vec<usize> {
        let n = batch_size.min(self.order.len());
        let mut out = Vec::with_capacity(n);
        while out.len() < n {
            if self.cursor == self.order.len() {
                self.order.shuffle(&mut self.rng);
                self.cursor = 0;
            }
            out.push(self.order[self.cursor]);
            self.cursor += 1;
        }
        out
    }
}

#[derive(Default)]
struct RoundTally {
    steps: usize,
    updates: usize,
    client_losses: Vec<f64>,
    server_losses: Vec<f64>,
    path_s: f64,
}

fn mean(xs: &[f64]) -> Option<f64> {
    (!xs.is_empty()).then(|| xs.iter().sum::<f64>() / xs.len() as f64)
}

fn param_count(layers: &[DenseLayer]) -> usize {
    layers.iter().map(DenseLayer::param_count).sum()
}

fn path_accuracy(layers: &[&[DenseLayer]], test: &Dataset) -> Result<f64> {
    let mut x = test.features.clone();
    for part in layers {
        x = forward(part, &x)?.0;
    }
    Ok(accuracy(&x, &test.labels))
}

/// Runs a whole experiment and returns one metrics record per round plus the
/// final state. The result depends only on `cfg`.
pub fn run_experiment(cfg: &ExperimentConfig) -> Result<ExperimentOutput> {
    cfg.validate()?;
    let seed = cfg.seed;
    let n = cfg.num_clients;
    let (train, test) = generate_splits(
        cfg.dataset.num_classes,
        cfg.dataset.input_dim,
        cfg.dataset.train_size,
        cfg.dataset.test_size,
        cfg.dataset.cluster_spread,
        seed,
    )?;
    let shards = dirichlet_partition(&train, n, cfg.partition.concentration, cfg.partition.min_samples_per_client, seed)?;
    let mut net = SuperNet::build(&cfg.layer_dims, cfg.dataset.num_classes, seed)?;
    let profiles = match &cfg.allocation.profiles {
        Some(p) => p.clone(),
        None => measure_profiles(n, seed),
    };

    let mut clients: Vec<ClientState> = match cfg.mode {
        Mode::Sfl => {
            let split = cfg.sfl_split_depth();
            profiles
                .iter()
                .enumerate()
                .map(|(i, p)| Ok(ClientState::new(i, split, net.slice_prefix(split)?, None, *p)))
                .collect::<Result<_>>()?
        }
        Mode::Ssfl | Mode::Local => allocate_all(&profiles, &cfg.allocation_config(), &net, seed)?
            .into_iter()
            .zip(&profiles)
            .enumerate()
            .map(|(i, (a, p))| ClientState::new(i, a.depth, a.prefix, Some(a.head), *p))
            .collect(),
    };
    let depths: Vec<usize> = clients.iter().map(|c| c.depth).collect();

    let connectivity = match cfg.mode {
        Mode::Local => ConnectivityOracle::never(),
        Mode::Ssfl | Mode::Sfl => sample_connectivity(n, cfg.rounds, cfg.connectivity.availability_p, seed)
            .with_round_trips(profiles.iter().map(|p| 2.0 * p.latency_ms / 1000.0).collect()),
    };
    let mut samplers: Vec<ShardSampler> = shards
        .iter()
        .map(|s| ShardSampler::new(&s.indices, stream_rng(seed, Stream::ClientBatches, s.client_id as u64)))
        .collect();

    let tcfg = cfg.tpgf_config();
    let acfg = cfg.aggregation_config();
    let c0 = cfg.timing.compute_s_per_flop;
    let mut ledger = CommLedger::default();
    let mut clock = SimClock::default();
    let mut metrics = Vec::with_capacity(cfg.rounds);
    let mut steps = Vec::new();
    let mut audit = Vec::new();
    let mut rejected = Vec::new();

    let federated_server = cfg.mode == Mode::Sfl && cfg.sfl.server_update == ServerUpdate::Federated;
    for round in 0..cfg.rounds {
        let mut server_copies: Vec<SuperNet> =
            if federated_server { (0..n).map(|_| net.clone()).collect() } else { Vec::new() };
        let mut tally: Vec<RoundTally> = (0..n).map(|_| RoundTally::default()).collect();
        let mut fallback_steps = 0;
        for step in 0..cfg.steps_per_round {
            for (i, client) in clients.iter_mut().enumerate() {
                if shards[i].indices.is_empty() {
                    continue;
                }
                let batch = train.batch(&samplers[i].next(cfg.batch_size));
                if cfg.mode == Mode::Ssfl
                    && cfg.aggregation.resync_on_reconnect
                    && client.in_fallback
                    && connectivity.is_up(i, round)
                {
                    client.encoder = net.slice_prefix(client.depth)?;
                    ledger.record(round, i, Channel::Broadcast, account_bytes(param_count(&client.encoder)));
                }
                let out: StepOutcome = match cfg.mode {
                    Mode::Ssfl => tpgf_step(client, &mut net, &batch, &connectivity, round, step, &tcfg)?,
                    Mode::Sfl => {
                        let server = if federated_server { &mut server_copies[i] } else { &mut net };
                        baseline_sfl_step(client, server, &batch, &connectivity, round, step, &tcfg)?
                    }
                    Mode::Local => fallback_step(client, &batch, &tcfg)?,
                };
                let t = &mut tally[i];
                t.steps += 1;
                t.path_s += match out.mode {
                    StepMode::Full => {
                        t.updates += 1;
                        c0 * (out.client_flops + out.server_flops) as f64 + 2.0 * client.profile.latency_ms / 1000.0
                    }
                    StepMode::Fallback => {
                        t.updates += 1;
                        fallback_steps += 1;
                        c0 * out.client_flops as f64
                    }
                    StepMode::Stalled => tcfg.timeout_s,
                };
                t.client_losses.extend(out.client_loss);
                t.server_losses.extend(out.server_loss);
                if out.bytes_up > 0 {
                    ledger.record(round, i, Channel::Up, out.bytes_up);
                }
                if out.bytes_down > 0 {
                    ledger.record(round, i, Channel::Down, out.bytes_down);
                }
                steps.push(StepRecord {
                    round,
                    step,
                    client: i,
                    mode: out.mode,
                    client_loss: out.client_loss,
                    server_loss: out.server_loss,
                    w_client: out.w_client,
                });
            }
        }
        for (i, t) in tally.iter().enumerate() {
            if t.steps > 0 {
                clock.record(ClockEvent {
                    round,
                    client: Some(i),
                    kind: ClockEventKind::ClientPath,
                    duration_s: t.path_s,
                })?;
            }
        }

        let aggregation_params = match cfg.mode {
            Mode::Ssfl | Mode::Local => {
                let reports: Vec<ClientReport> = clients
                    .iter()
                    .zip(&tally)
                    .filter_map(|(c, t)| {
                        Some(ClientReport {
                            client_id: c.id,
                            depth: c.depth,
                            encoder: c.encoder.clone(),
                            client_loss: mean(&t.client_losses)?,
                            server_loss: mean(&t.server_losses),
                        })
                    })
                    .collect();
                let params: usize = reports.iter().map(|r| param_count(&r.encoder)).sum();
                if !reports.is_empty() {
                    let agg = aggregate_round(&reports, &mut net, &acfg)?;
                    rejected.extend(agg.rejected.iter().map(|&c| (round, c)));
                    if cfg.aggregation.audit {
                        let by_id = |id: usize| reports.iter().find(|r| r.client_id == id).expect("weighted report");
                        for w in &agg.weights {
                            let r = by_id(w.client_id);
                            audit.push(AuditRecord {
                                round,
                                client_id: r.client_id,
                                depth: r.depth,
                                client_loss: r.client_loss,
                                server_loss: r.server_loss,
                                fused_loss: fused_loss(r, net.depth(), acfg.epsilon),
                                weight: w.w,
                            });
                        }
                    }
                    for (id, prefix) in agg.broadcasts {
                        ledger.record(round, id, Channel::Broadcast, account_bytes(param_count(&prefix)));
                        clients[id].encoder = prefix;
                    }
                }
                params
            }
            Mode::Sfl => {
                let split = cfg.sfl_split_depth();
                let contributors: Vec<usize> = (0..n).filter(|&i| tally[i].updates > 0).collect();
                for layer in 0..split {
                    let contributions: Vec<(&DenseLayer, f64)> = contributors
                        .iter()
                        .map(|&i| (&clients[i].encoder[layer], shards[i].indices.len() as f64))
                        .collect();
                    if contributions.is_empty() {
                        continue;
                    }
                    let merged = aggregate_layer(&contributions, &net.encoder()[layer], 0.0)?;
                    net.encoder_mut()[layer] = merged;
                }
                if federated_server && !contributors.is_empty() {
                    let merged: Vec<DenseLayer> = (split..=net.depth())
                        .map(|layer| {
                            let contributions: Vec<(&DenseLayer, f64)> = contributors
                                .iter()
                                .map(|&i| (&server_copies[i].full_path()[layer], shards[i].indices.len() as f64))
                                .collect();
                            aggregate_layer(&contributions, &net.full_path()[layer], 0.0)
                        })
                        .collect::<Result<_>>()?;
                    net.server_path_mut(split)?.clone_from_slice(&merged);
                }
                for (i, client) in clients.iter_mut().enumerate() {
                    if !shards[i].indices.is_empty() {
                        client.encoder = net.slice_prefix(split)?;
                        ledger.record(round, i, Channel::Broadcast, account_bytes(param_count(&client.encoder)));
                    }
                }
                let server_params =
                    if federated_server { param_count(net.server_path(split)?) * contributors.len() } else { 0 };
                contributors.iter().map(|&i| param_count(&clients[i].encoder)).sum::<usize>() + server_params
            }
        };
        clock.record(ClockEvent {
            round,
            client: None,
            kind: ClockEventKind::Aggregation,
            duration_s: c0 * (2 * aggregation_params) as f64,
        })?;
        clock.close_round(round);

        let test_accuracy = path_accuracy(&[net.full_path()], &test)?;
        let client_accs: Vec<f64> = clients
            .iter()
            .filter(|c| !shards[c.id].indices.is_empty())
            .filter_map(|c| c.head.as_ref().map(|h| (c, h)))
            .map(|(c, h)| path_accuracy(&[&c.encoder, std::slice::from_ref(&h.layer)], &test))
            .collect::<Result<_>>()?;
        let client_means: Vec<f64> = tally.iter().filter_map(|t| mean(&t.client_losses)).collect();
        let server_means: Vec<f64> = tally.iter().filter_map(|t| mean(&t.server_losses)).collect();
        let totals = ledger.cumulative_through(round);
        metrics.push(RoundMetrics {
            round: round + 1,
            mode: cfg.mode,
            test_accuracy,
            cumulative_bytes_up: totals.up,
            cumulative_bytes_down: totals.down,
            cumulative_broadcast_bytes: totals.broadcast,
            simulated_time_s: clock.now_s(),
            fallback_step_count: fallback_steps,
            mean_client_loss: mean(&client_means),
            mean_server_loss: mean(&server_means),
            client_accuracy: mean(&client_accs),
        });
    }

    Ok(ExperimentOutput {
        metrics,
        profiles,
        depths,
        shard_sizes: shards.iter().map(|s| s.indices.len()).collect(),
        net,
        clients,
        ledger,
        clock,
        steps,
        audit,
        rejected,
    })
}
