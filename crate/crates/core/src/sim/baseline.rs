use crate::error::{Error, Result};
use crate::nn::{backward, forward, sgd_step};
use crate::supernet::SuperNet;
use crate::tpgf::step::{train_flops, upload_bytes};
use crate::tpgf::{phase2_server, Batch, ClientState, ConnectivityOracle, LinkStatus, StepMode, StepOutcome, TpgfConfig};

use super::ledger::account_bytes;

/// Plain split learning: the encoder is trained with the server's gradient
/// only. Without a server reply the step stalls and nothing is updated.
pub fn baseline_sfl_step(
    client: &mut ClientState,
    server: &mut SuperNet,
    batch: &Batch,
    connectivity: &ConnectivityOracle,
    round: usize,
    step: usize,
    cfg: &TpgfConfig,
) -> Result<StepOutcome> {
    if batch.is_empty() {
        return Err(Error::Input("empty batch".into()));
    }
    if connectivity.status(client.id, round, step, cfg.timeout_s) == LinkStatus::TimedOut {
        return Ok(StepOutcome {
            mode: StepMode::Stalled,
            client_loss: None,
            server_loss: None,
            fused_grad_norm: 0.0,
            w_client: None,
            bytes_up: 0,
            bytes_down: 0,
            client_flops: 0,
            server_flops: 0,
        });
    }
    let (smashed, cache) = forward(&client.encoder, &batch.features)?;
    let remote = phase2_server(server, &smashed, &batch.labels, client.depth, cfg.eta)?;
    let (grads, _) = backward(&client.encoder, &cache, &remote.g_z)?;
    sgd_step(&mut client.encoder, &grads, cfg.eta)?;
    client.last_server_loss = Some(remote.server_loss);
    Ok(StepOutcome {
        mode: StepMode::Full,
        client_loss: None,
        server_loss: Some(remote.server_loss),
        fused_grad_norm: grads.global_norm(),
        w_client: None,
        bytes_up: upload_bytes(batch, &smashed),
        bytes_down: account_bytes(remote.g_z.len()),
        client_flops: train_flops(&client.encoder, batch.len()),
        server_flops: remote.flops,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::allocation::ClientProfile;
    use crate::nn::Tensor;

    fn setup() -> (ClientState, SuperNet, Batch) {
        let net = SuperNet::build(&[3, 4, 4, 4], 2, 3).unwrap();
        let client =
            ClientState::new(0, 1, net.slice_prefix(1).unwrap(), None, ClientProfile { memory_gb: 4.0, latency_ms: 30.0 });
        let batch = Batch {
            features: Tensor::new(vec![2, 3], vec![0.5, -0.2, 1.0, 0.1, 0.3, -0.7]).unwrap(),
            labels: vec![0, 1],
        };
        (client, net, batch)
    }

    #[test]
    fn stalls_without_server() {
        let (mut client, mut net, batch) = setup();
        let (enc, sum) = (client.encoder.clone(), net.checksum());
        let out =
            baseline_sfl_step(&mut client, &mut net, &batch, &ConnectivityOracle::never(), 0, 0, &TpgfConfig::default())
                .unwrap();
        assert_eq!(out.mode, StepMode::Stalled);
        assert_eq!(client.encoder, enc);
        assert_eq!(net.checksum(), sum);
    }

    #[test]
    fn same_message_sizes_as_fusion_step() {
        let (mut client, mut net, batch) = setup();
        let out =
            baseline_sfl_step(&mut client, &mut net, &batch, &ConnectivityOracle::always(), 0, 0, &TpgfConfig::default())
                .unwrap();
        assert_eq!(out.bytes_up, account_bytes(2 * 4 + 2));
        assert_eq!(out.bytes_down, account_bytes(2 * 4));
        assert!(out.client_loss.is_none() && out.w_client.is_none());
    }
}
