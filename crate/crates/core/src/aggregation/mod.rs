//! End-of-round merge of client encoder prefixes into the global encoder.
//!
//! Each client gets a weight proportional to its depth share times its
//! inverse-loss share. Every encoder layer is then averaged over the clients
//! that hold it, pulled toward the server's copy with strength `lambda`:
//!
//! `theta_bar = (sum_i w_i theta_i + lambda theta_s) / (sum_i w_i + lambda)`

pub mod oracle;

use crate::error::{Error, Result};
use crate::nn::{DenseLayer, Tensor};
use crate::supernet::SuperNet;
use crate::tpgf::fusion_weight;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AggregationConfig {
    pub lambda: f64,
    pub epsilon: f64,
    /// Rescale weights to sum to one over each layer's contributors.
    pub renormalize_weights: bool,
}

impl Default for AggregationConfig {
    fn default() -> Self {
        Self { lambda: 0.01, epsilon: 1e-8, renormalize_weights: false }
    }
}

/// What a client hands in at the end of a round.
#[derive(Debug, Clone, PartialEq)]
pub struct ClientReport {
    pub client_id: usize,
    pub depth: usize,
    pub encoder: Vec<DenseLayer>,
    pub client_loss: f64,
    /// Present only if the client was supervised by the server this round.
    pub server_loss: Option<f64>,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AggWeight {
    pub client_id: usize,
    pub w: f64,
}

/// Client and server losses combined with the gradient-fusion weights;
/// the client loss alone when there is no server loss.
pub fn fused_loss(report: &ClientReport, total_layers: usize, epsilon: f64) -> f64 {
    match report.server_loss {
        None => report.client_loss,
        Some(server_loss) => {
            let w = fusion_weight(report.client_loss, server_loss, report.depth, total_layers - report.depth, epsilon);
            w.client * report.client_loss + w.server * server_loss
        }
    }
}

/// `w_i = d_i / sum_j d_j * (l_i + eps)^-1 / sum_j (l_j + eps)^-1` over the
/// whole cohort, with `l` the fused loss. The weights are not normalized.
pub fn client_weights(reports: &[ClientReport], total_layers: usize, cfg: &AggregationConfig) -> Vec<AggWeight> {
    let depth_sum: f64 = reports.iter().map(|r| r.depth as f64).sum();
    let inv: Vec<f64> = reports
        .iter()
        .map(|r| 1.0 / (fused_loss(r, total_layers, cfg.epsilon) + cfg.epsilon))
        .collect();
    let inv_sum: f64 = inv.iter().sum();
    reports
        .iter()
        .zip(&inv)
        .map(|(r, inv_i)| AggWeight { client_id: r.client_id, w: (r.depth as f64 / depth_sum) * (inv_i / inv_sum) })
        .collect()
}

/// Closed-form minimizer of `sum_i w_i |theta_i - x|^2 + lambda |theta_s - x|^2`.
///
/// With no contributors the server layer is returned unchanged.
pub fn aggregate_layer(
    contributions: &[(&DenseLayer, f64)],
    server_layer: &DenseLayer,
    lambda: f64,
) -> Result<DenseLayer> {
    if contributions.is_empty() {
        return Ok(server_layer.clone());
    }
    for (i, (layer, w)) in contributions.iter().enumerate() {
        if !layer.same_shape(server_layer) {
            return Err(Error::Shape(format!("contribution {i} does not match the server layer")));
        }
        if !(*w >= 0.0 && w.is_finite()) {
            return Err(Error::Input(format!("contribution {i} has weight {w}")));
        }
    }
    let total: f64 = contributions.iter().map(|(_, w)| w).sum::<f64>() + lambda;
    if total <= 0.0 {
        return Ok(server_layer.clone());
    }
    // Expand around an anchor so that unanimous inputs come back bit-exact:
    // the server value when it participates, else the first contributor.
    let anchor = if lambda > 0.0 { server_layer } else { contributions[0].0 };
    let blend = |pick: fn(&DenseLayer) -> &Tensor| -> Tensor {
        let mut out = pick(anchor).clone();
        let base = pick(anchor).data();
        let mut acc = vec![0.0; base.len()];
        for (layer, w) in contributions {
            for ((a, v), b) in acc.iter_mut().zip(pick(layer).data()).zip(base) {
                *a += w * (v - b);
            }
        }
        if lambda > 0.0 && !std::ptr::eq(anchor, server_layer) {
            for ((a, v), b) in acc.iter_mut().zip(pick(server_layer).data()).zip(base) {
                *a += lambda * (v - b);
            }
        }
        for (o, a) in out.data_mut().iter_mut().zip(acc) {
            *o += a / total;
        }
        out
    };
    Ok(DenseLayer {
        weights: blend(|l| &l.weights),
        bias: blend(|l| &l.bias),
        activation: server_layer.activation,
    })
}

#[derive(Debug, Clone, PartialEq)]
pub struct RoundAggregation {
    /// Cohort weights, in ascending client id.
    pub weights: Vec<AggWeight>,
    /// Reports dropped for not matching the global prefix of their depth.
    pub rejected: Vec<usize>,
    /// Fresh prefix for every accepted client, in ascending client id.
    pub broadcasts: Vec<(usize, Vec<DenseLayer>)>,
}

/// Layer-aligned aggregation of a round's reports into `net`'s encoder.
///
/// Misaligned reports are dropped and listed in `rejected`. Layer `l` is
/// averaged over the clients with depth `>= l + 1`; layers nobody holds keep
/// the server's value. Classifiers are never touched.
pub fn aggregate_round(reports: &[ClientReport], net: &mut SuperNet, cfg: &AggregationConfig) -> Result<RoundAggregation> {
    let mut accepted: Vec<&ClientReport> = Vec::with_capacity(reports.len());
    let mut rejected = Vec::new();
    for r in reports {
        if net.check_alignment(&r.encoder, r.depth) && r.client_loss.is_finite() {
            accepted.push(r);
        } else {
            rejected.push(r.client_id);
        }
    }
    accepted.sort_by_key(|r| r.client_id);
    rejected.sort_unstable();
    let owned: Vec<ClientReport> = accepted.iter().map(|r| (*r).clone()).collect();
    let weights = if owned.is_empty() { Vec::new() } else { client_weights(&owned, net.depth(), cfg) };

    for layer_idx in 0..net.depth() {
        let mut contributions: Vec<(&DenseLayer, f64)> = owned
            .iter()
            .zip(&weights)
            .filter(|(r, _)| r.depth > layer_idx)
            .map(|(r, w)| (&r.encoder[layer_idx], w.w))
            .collect();
        if contributions.is_empty() {
            continue;
        }
        if cfg.renormalize_weights {
            let sum: f64 = contributions.iter().map(|(_, w)| w).sum();
            if sum > 0.0 {
                contributions.iter_mut().for_each(|(_, w)| *w /= sum);
            }
        }
        let merged = aggregate_layer(&contributions, &net.encoder()[layer_idx], cfg.lambda)?;
        net.encoder_mut()[layer_idx] = merged;
    }

    let broadcasts = owned
        .iter()
        .map(|r| Ok((r.client_id, net.slice_prefix(r.depth)?)))
        .collect::<Result<Vec<_>>>()?;
    Ok(RoundAggregation { weights, rejected, broadcasts })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::nn::Activation;

    fn scalar(v: f64) -> DenseLayer {
        DenseLayer::new(Tensor::scalar_matrix(v), Tensor::new(vec![1], vec![v]).unwrap(), Activation::Relu).unwrap()
    }

    fn report(id: usize, depth: usize, loss: f64, server: Option<f64>) -> ClientReport {
        ClientReport { client_id: id, depth, encoder: Vec::new(), client_loss: loss, server_loss: server }
    }

    #[test]
    fn fused_loss_cases() {
        assert_eq!(fused_loss(&report(0, 3, 1.3, None), 12, 1e-8), 1.3);
        assert!((fused_loss(&report(0, 3, 0.7, Some(0.7)), 12, 1e-8) - 0.7).abs() < 1e-15);
        assert!((fused_loss(&report(0, 3, 2.0, Some(0.5)), 12, 1e-8) - 0.575).abs() < 1e-9);
    }

    #[test]
    fn weights_single_client() {
        let w = client_weights(&[report(4, 3, 0.9, None)], 12, &AggregationConfig::default());
        assert_eq!(w, vec![AggWeight { client_id: 4, w: 1.0 }]);
    }

    #[test]
    fn weights_depth_split() {
        let w = client_weights(&[report(0, 2, 1.0, None), report(1, 4, 1.0, None)], 12, &AggregationConfig::default());
        assert!((w[0].w - 1.0 / 6.0).abs() < 1e-15);
        assert!((w[1].w - 1.0 / 3.0).abs() < 1e-15);
    }

    #[test]
    fn weights_loss_split() {
        let cfg = AggregationConfig { epsilon: 1e-15, ..Default::default() };
        let w = client_weights(&[report(0, 5, 1.0, None), report(1, 5, 3.0, None)], 12, &cfg);
        assert!((w[0].w - 0.375).abs() < 1e-12);
        assert!((w[1].w - 0.125).abs() < 1e-12);
    }

    #[test]
    fn layer_single_source_without_regularizer() {
        let a = scalar(3.7);
        let out = aggregate_layer(&[(&a, 1.0)], &scalar(-2.0), 0.0).unwrap();
        assert_eq!(out, a);
    }

    #[test]
    fn layer_worked_example() {
        let (a, b) = (scalar(3.0), scalar(6.0));
        let out = aggregate_layer(&[(&a, 1.0 / 6.0), (&b, 1.0 / 3.0)], &scalar(0.0), 0.01).unwrap();
        let expected = (0.5 + 2.0) / 0.51;
        assert!((out.weights.data()[0] - expected).abs() < 1e-12);
        assert!((out.weights.data()[0] - 4.901961).abs() < 1e-6);
    }

    #[test]
    fn layer_regularizer_dominates() {
        let out = aggregate_layer(&[(&scalar(3.0), 0.5)], &scalar(2.0), 1e9).unwrap();
        assert!((out.weights.data()[0] - 2.0).abs() / 2.0 < 1e-6);
    }

    #[test]
    fn layer_empty_keeps_server() {
        let s = scalar(1.25);
        assert_eq!(aggregate_layer(&[], &s, 0.01).unwrap(), s);
    }

    #[test]
    fn layer_shape_mismatch() {
        let wide = DenseLayer::new(Tensor::zeros(vec![1, 2]), Tensor::zeros(vec![1]), Activation::Relu).unwrap();
        assert!(aggregate_layer(&[(&wide, 1.0)], &scalar(0.0), 0.01).is_err());
    }
}
