use rand::seq::SliceRandom;
use rand_distr::{Distribution, Gamma};

use super::data::Dataset;
use crate::error::{Error, Result};
use crate::rng::{stream_rng, Stream};

/// Indices of the training samples held by one client.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Shard {
    pub client_id: usize,
    pub indices: Vec<usize>,
}

/// Label-skewed split: for every class, client proportions are drawn from a
/// symmetric Dirichlet(`concentration`) and that class's samples are dealt out
/// accordingly. Smaller concentrations give more skewed shards.
///
/// With `min_per_client > 0`, samples are moved from the largest shard to any
/// shard below the minimum.
pub fn dirichlet_partition(
    ds: &Dataset,
    num_clients: usize,
    concentration: f64,
    min_per_client: usize,
    seed: u64,
) -> Result<Vec<Shard>> {
    if num_clients == 0 {
        return Err(Error::Input("need at least one client".into()));
    }
    if !(concentration > 0.0 && concentration.is_finite()) {
        return Err(Error::Input(format!("concentration must be positive, got {concentration}")));
    }
    if min_per_client * num_clients > ds.len() {
        return Err(Error::Input("not enough samples for the per-client minimum".into()));
    }
    let mut rng = stream_rng(seed, Stream::Partition, 0);
    let mut shards: Vec<Vec<usize>> = vec![Vec::new(); num_clients];
    let gamma = Gamma::new(concentration, 1.0).map_err(|e| Error::Input(e.to_string()))?;

    for class in 0..ds.num_classes {
        let mut idx: Vec<usize> = (0..ds.len()).filter(|&i| ds.labels[i] == class).collect();
        idx.shuffle(&mut rng);
        let mut props: Vec<f64> = (0..num_clients).map(|_| gamma.sample(&mut rng)).collect();
        let total: f64 = props.iter().sum();
        if total > 0.0 {
            props.iter_mut().for_each(|p| *p /= total);
        } else {
            props = vec![1.0 / num_clients as f64; num_clients];
        }
        let n = idx.len();
        let mut cum = 0.0;
        let mut start = 0;
        for (client, p) in props.iter().enumerate() {
            cum += p;
            let end = if client + 1 == num_clients { n } else { ((cum * n as f64).round() as usize).clamp(start, n) };
            shards[client].extend_from_slice(&idx[start..end]);
            start = end;
        }
    }

    while let Some(small) = (0..num_clients).find(|&c| shards[c].len() < min_per_client) {
        let large = (0..num_clients).max_by_key(|&c| (shards[c].len(), std::cmp::Reverse(c))).unwrap();
        let moved = shards[large].pop().expect("largest shard is non-empty");
        shards[small].push(moved);
    }

    Ok(shards
        .into_iter()
        .enumerate()
        .map(|(client_id, mut indices)| {
            indices.sort_unstable();
            Shard { client_id, indices }
        })
        .collect())
}

/// Shannon entropy (nats) of a shard's label histogram; 0 for an empty shard.
pub fn label_entropy(ds: &Dataset, shard: &Shard) -> f64 {
    let mut counts = vec![0usize; ds.num_classes];
    for &i in &shard.indices {
        counts[ds.labels[i]] += 1;
    }
    let n = shard.indices.len() as f64;
    if n == 0.0 {
        return 0.0;
    }
    counts
        .iter()
        .filter(|&&c| c > 0)
        .map(|&c| {
            let p = c as f64 / n;
            -p * p.ln()
        })
        .sum()
}
