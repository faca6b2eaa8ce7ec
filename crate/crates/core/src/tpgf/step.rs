use super::connectivity::{ConnectivityOracle, LinkStatus};
use super::fusion::{fuse, FusionRule};
use crate::allocation::ClientProfile;
use crate::error::{Error, Result};
use crate::nn::{
    backward, clip_l2, forward, sgd_step, softmax_cross_entropy, DenseLayer, ForwardCache, GradientSet, Tensor,
};
use crate::sim::account_bytes;
use crate::supernet::{ClientHead, SuperNet};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TpgfConfig {
    pub tau: f64,
    pub eta: f64,
    pub epsilon: f64,
    pub timeout_s: f64,
    pub rule: FusionRule,
}

impl Default for TpgfConfig {
    fn default() -> Self {
        Self { tau: 0.5, eta: 0.05, epsilon: 1e-8, timeout_s: super::DEFAULT_TIMEOUT_S, rule: FusionRule::Full }
    }
}

/// Per-client training state held on the device.
#[derive(Debug, Clone, PartialEq)]
pub struct ClientState {
    pub id: usize,
    pub depth: usize,
    pub encoder: Vec<DenseLayer>,
    /// Absent for baseline split learning, which has no local classifier.
    pub head: Option<ClientHead>,
    pub profile: ClientProfile,
    pub in_fallback: bool,
    pub last_client_loss: Option<f64>,
    pub last_server_loss: Option<f64>,
}

impl ClientState {
    pub fn new(id: usize, depth: usize, encoder: Vec<DenseLayer>, head: Option<ClientHead>, profile: ClientProfile) -> Self {
        Self {
            id,
            depth,
            encoder,
            head,
            profile,
            in_fallback: false,
            last_client_loss: None,
            last_server_loss: None,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Batch {
    pub features: Tensor,
    pub labels: Vec<usize>,
}

impl Batch {
    pub fn len(&self) -> usize {
        self.labels.len()
    }

    pub fn is_empty(&self) -> bool {
        self.labels.is_empty()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum StepMode {
    Full,
    Fallback,
    /// Baseline split learning only: no server reply, no update.
    Stalled,
}

#[derive(Debug, Clone, PartialEq)]
pub struct StepOutcome {
    pub mode: StepMode,
    /// Absent for baseline split learning, which has no local head.
    pub client_loss: Option<f64>,
    pub server_loss: Option<f64>,
    pub fused_grad_norm: f64,
    /// Client weight actually used, when gradients were fused.
    pub w_client: Option<f64>,
    pub bytes_up: u64,
    pub bytes_down: u64,
    pub client_flops: u64,
    pub server_flops: u64,
}

/// Output of local supervision.
#[derive(Debug, Clone)]
pub struct LocalPhase {
    pub client_loss: f64,
    /// Encoder gradient of the local loss, already clipped.
    pub g_client: GradientSet,
    pub smashed: Tensor,
    pub encoder_cache: ForwardCache,
    pub flops: u64,
}

#[derive(Debug, Clone)]
pub struct ServerPhase {
    pub server_loss: f64,
    /// Gradient of the server loss with respect to the smashed data.
    pub g_z: Tensor,
    pub flops: u64,
}

fn check_batch(batch: &Batch) -> Result<()> {
    if batch.is_empty() {
        return Err(Error::Input("empty batch".into()));
    }
    if batch.features.rows() != batch.len() {
        return Err(Error::Shape(format!(
            "{} feature rows for {} labels",
            batch.features.rows(),
            batch.len()
        )));
    }
    Ok(())
}

/// forward + backward of every layer, backward counted as twice the forward cost
pub(crate) fn train_flops(layers: &[DenseLayer], batch: usize) -> u64 {
    3 * layers.iter().map(|l| l.forward_flops(batch)).sum::<u64>()
}

/// Computes the smashed data and the local loss, takes an SGD step on the
/// head, and returns the clipped encoder gradient of the local loss. The
/// encoder itself is not modified.
pub fn phase1_local(client: &mut ClientState, batch: &Batch, cfg: &TpgfConfig) -> Result<LocalPhase> {
    check_batch(batch)?;
    let head = client
        .head
        .as_mut()
        .ok_or_else(|| Error::Input(format!("client {} has no local head", client.id)))?;
    let (smashed, encoder_cache) = forward(&client.encoder, &batch.features)?;
    let head_layers = std::slice::from_mut(&mut head.layer);
    let (logits, head_cache) = forward(head_layers, &smashed)?;
    let (client_loss, d_logits) = softmax_cross_entropy(&logits, &batch.labels)?;
    let (head_grads, d_smashed) = backward(head_layers, &head_cache, &d_logits)?;
    sgd_step(head_layers, &head_grads, cfg.eta)?;
    let (raw, _) = backward(&client.encoder, &encoder_cache, &d_smashed)?;
    let flops = train_flops(&client.encoder, batch.len()) + train_flops(head_layers, batch.len());
    Ok(LocalPhase { client_loss, g_client: clip_l2(&raw, cfg.tau), smashed, encoder_cache, flops })
}

/// Runs layers `d+1..=L` and the classifier on the smashed data, updates them
/// with SGD, and returns the loss and the gradient for the client. The loss
/// and `g_z` both come from the pre-update parameters.
pub fn phase2_server(
    server: &mut SuperNet,
    smashed: &Tensor,
    labels: &[usize],
    depth: usize,
    eta: f64,
) -> Result<ServerPhase> {
    let path = server.server_path_mut(depth)?;
    if smashed.cols() != path[0].in_dim() {
        return Err(Error::layer(
            depth,
            format!("smashed width {} does not match server input {}", smashed.cols(), path[0].in_dim()),
        ));
    }
    let (logits, cache) = forward(path, smashed)?;
    let (server_loss, d_logits) = softmax_cross_entropy(&logits, labels)?;
    let (grads, g_z) = backward(path, &cache, &d_logits)?;
    sgd_step(path, &grads, eta)?;
    Ok(ServerPhase { server_loss, g_z, flops: train_flops(path, labels.len()) })
}

pub(crate) fn upload_bytes(batch: &Batch, smashed: &Tensor) -> u64 {
    account_bytes(smashed.len() + batch.len())
}

/// Local-only update: local loss, head step, and an encoder step with the
/// clipped local gradient. The server is never contacted.
pub fn fallback_step(client: &mut ClientState, batch: &Batch, cfg: &TpgfConfig) -> Result<StepOutcome> {
    let local = phase1_local(client, batch, cfg)?;
    sgd_step(&mut client.encoder, &local.g_client, cfg.eta)?;
    client.in_fallback = true;
    client.last_client_loss = Some(local.client_loss);
    Ok(StepOutcome {
        mode: StepMode::Fallback,
        client_loss: Some(local.client_loss),
        server_loss: None,
        fused_grad_norm: local.g_client.global_norm(),
        w_client: None,
        bytes_up: 0,
        bytes_down: 0,
        client_flops: local.flops,
        server_flops: 0,
    })
}

/// One gradient-fusion step, or a fallback step if the server does not reply
/// within `cfg.timeout_s`.
pub fn tpgf_step(
    client: &mut ClientState,
    server: &mut SuperNet,
    batch: &Batch,
    connectivity: &ConnectivityOracle,
    round: usize,
    step: usize,
    cfg: &TpgfConfig,
) -> Result<StepOutcome> {
    if connectivity.status(client.id, round, step, cfg.timeout_s) == LinkStatus::TimedOut {
        return fallback_step(client, batch, cfg);
    }
    let depth = client.depth;
    let total = server.depth();
    let local = phase1_local(client, batch, cfg)?;
    let remote = phase2_server(server, &local.smashed, &batch.labels, depth, cfg.eta)?;
    let (g_server, _) = backward(&client.encoder, &local.encoder_cache, &remote.g_z)?;
    let w = cfg.rule.weights(local.client_loss, remote.server_loss, depth, total - depth, cfg.epsilon);
    let fused = fuse(&local.g_client, &g_server, w)?;
    sgd_step(&mut client.encoder, &fused, cfg.eta)?;

    client.in_fallback = false;
    client.last_client_loss = Some(local.client_loss);
    client.last_server_loss = Some(remote.server_loss);
    Ok(StepOutcome {
        mode: StepMode::Full,
        client_loss: Some(local.client_loss),
        server_loss: Some(remote.server_loss),
        fused_grad_norm: fused.global_norm(),
        w_client: Some(w.client),
        bytes_up: upload_bytes(batch, &local.smashed),
        bytes_down: account_bytes(remote.g_z.len()),
        // second encoder backward for the server gradient
        client_flops: local.flops + 2 * client.encoder.iter().map(|l| l.forward_flops(batch.len())).sum::<u64>(),
        server_flops: remote.flops,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::nn::{Activation, LayerGrad};
    use crate::rng::{stream_rng, Stream};
    use rand::Rng;

    fn setup(depth: usize) -> (ClientState, SuperNet, Batch) {
        let net = SuperNet::build(&[3, 5, 4, 4, 3], 3, 11).unwrap();
        let head = net.make_client_head(depth, 3, 5).unwrap();
        let client = ClientState::new(
            0,
            depth,
            net.slice_prefix(depth).unwrap(),
            Some(head),
            ClientProfile { memory_gb: 4.0, latency_ms: 50.0 },
        );
        let mut rng = stream_rng(1, Stream::Dataset, 0);
        let x: Vec<f64> = (0..6 * 3).map(|_| rng.random_range(-1.0..1.0)).collect();
        let batch = Batch { features: Tensor::new(vec![6, 3], x).unwrap(), labels: vec![0, 1, 2, 0, 1, 2] };
        (client, net, batch)
    }

    #[test]
    fn zero_head_gives_ln_c() {
        let (mut client, _, batch) = setup(2);
        let head = &mut client.head.as_mut().unwrap().layer;
        *head = DenseLayer::new(Tensor::zeros(vec![3, 4]), Tensor::zeros(vec![3]), Activation::Identity).unwrap();
        let local = phase1_local(&mut client, &batch, &TpgfConfig::default()).unwrap();
        assert!((local.client_loss - 3f64.ln()).abs() < 1e-12);
        assert!(local.g_client.global_norm() <= 0.5 + 1e-12);
    }

    #[test]
    fn uniform_server_logits_give_ln_c() {
        let (mut client, mut net, batch) = setup(1);
        let path = net.server_path_mut(1).unwrap();
        let last = path.len() - 1;
        path[last] =
            DenseLayer::new(Tensor::zeros(vec![3, 3]), Tensor::zeros(vec![3]), Activation::Identity).unwrap();
        let local = phase1_local(&mut client, &batch, &TpgfConfig::default()).unwrap();
        let remote = phase2_server(&mut net, &local.smashed, &batch.labels, 1, 0.05).unwrap();
        assert!((remote.server_loss - 3f64.ln()).abs() < 1e-12);
        assert_eq!(remote.g_z.shape(), local.smashed.shape());
    }

    #[test]
    fn server_rejects_wrong_split() {
        let (mut client, mut net, batch) = setup(2);
        let local = phase1_local(&mut client, &batch, &TpgfConfig::default()).unwrap();
        assert!(phase2_server(&mut net, &local.smashed, &batch.labels, 1, 0.05).is_err());
    }

    #[test]
    fn branch_selection() {
        let (mut client, mut net, batch) = setup(2);
        let cfg = TpgfConfig::default();
        let full = tpgf_step(&mut client, &mut net, &batch, &ConnectivityOracle::always(), 0, 0, &cfg).unwrap();
        assert_eq!(full.mode, StepMode::Full);
        assert!(full.server_loss.is_some() && full.bytes_down > 0);
        let fb = tpgf_step(&mut client, &mut net, &batch, &ConnectivityOracle::never(), 0, 1, &cfg).unwrap();
        assert_eq!(fb.mode, StepMode::Fallback);
        assert!(fb.server_loss.is_none());
        assert_eq!((fb.bytes_up, fb.bytes_down), (0, 0));
        assert!(client.in_fallback);
    }

    #[test]
    fn byte_counts_follow_message_sizes() {
        let (mut client, mut net, batch) = setup(2);
        let out = tpgf_step(&mut client, &mut net, &batch, &ConnectivityOracle::always(), 0, 0, &TpgfConfig::default())
            .unwrap();
        // 6x4 smashed + 6 labels up, 6x4 gradient down
        assert_eq!(out.bytes_up, (24 + 6) * 4 + 16);
        assert_eq!(out.bytes_down, 24 * 4 + 16);
    }

    #[test]
    fn fallback_leaves_server_untouched() {
        let (mut client, net, batch) = setup(2);
        let before = net.checksum();
        fallback_step(&mut client, &batch, &TpgfConfig::default()).unwrap();
        assert_eq!(net.checksum(), before);
    }

    #[test]
    fn client_without_head_cannot_run_locally() {
        let (mut client, _, batch) = setup(2);
        client.head = None;
        assert!(fallback_step(&mut client, &batch, &TpgfConfig::default()).is_err());
    }

    #[test]
    fn equal_gradients_make_weights_irrelevant() {
        let g = GradientSet {
            start: 0,
            layers: vec![LayerGrad {
                weights: Tensor::new(vec![1, 2], vec![0.3, -0.7]).unwrap(),
                bias: Tensor::new(vec![1], vec![1.1]).unwrap(),
            }],
        };
        for w in [0.0, 0.13, 0.5, 0.98, 1.0] {
            let f = fuse(&g, &g, super::super::FusionWeights::from_client(w)).unwrap();
            for (a, b) in f.entries().zip(g.entries()) {
                assert!((a - b).abs() < 1e-15);
            }
        }
    }
}
