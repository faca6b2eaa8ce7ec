//! Fixtures shared by the benchmarks.

use hetsplit_core::aggregation::ClientReport;
use hetsplit_core::nn::Tensor;
use hetsplit_core::sim::generate_dataset;
use hetsplit_core::tpgf::Batch;
use hetsplit_core::SuperNet;

pub const DIMS: [usize; 7] = [16, 32, 32, 32, 32, 32, 32];
pub const CLASSES: usize = 10;

pub fn network(seed: u64) -> SuperNet {
    SuperNet::build(&DIMS, CLASSES, seed).expect("valid dims")
}

pub fn batch(size: usize, seed: u64) -> Batch {
    let ds = generate_dataset(CLASSES, DIMS[0], size.max(10 * CLASSES), 1.0, seed).expect("valid task");
    ds.batch(&(0..size).collect::<Vec<_>>())
}

pub fn features(rows: usize, seed: u64) -> Tensor {
    batch(rows, seed).features
}

/// `n` reports with depths cycling through `1..L`, each a copy of a
/// differently seeded network's prefix.
pub fn reports(n: usize) -> Vec<ClientReport> {
    let depth_cap = DIMS.len() - 2;
    (0..n)
        .map(|i| {
            let depth = 1 + i % depth_cap;
            ClientReport {
                client_id: i,
                depth,
                encoder: network(100 + i as u64).slice_prefix(depth).expect("depth in range"),
                client_loss: 1.0 + 0.1 * i as f64,
                server_loss: Some(0.8),
            }
        })
        .collect()
}
