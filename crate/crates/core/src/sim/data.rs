use rand::seq::SliceRandom;
use rand_distr::{Distribution, StandardNormal};

use crate::error::{Error, Result};
use crate::nn::Tensor;
use crate::rng::{stream_rng, SimRng, Stream};
use crate::tpgf::Batch;

#[derive(Debug, Clone, PartialEq)]
pub struct Dataset {
    pub features: Tensor,
    pub labels: Vec<usize>,
    pub num_classes: usize,
}

impl Dataset {
    pub fn len(&self) -> usize {
        self.labels.len()
    }

    pub fn is_empty(&self) -> bool {
        self.labels.is_empty()
    }

    pub fn batch(&self, indices: &[usize]) -> Batch {
        Batch {
            features: self.features.gather_rows(indices),
            labels: indices.iter().map(|&i| self.labels[i]).collect(),
        }
    }

    pub fn class_counts(&self) -> Vec<usize> {
        let mut counts = vec![0; self.num_classes];
        for &y in &self.labels {
            counts[y] += 1;
        }
        counts
    }
}

/// Isotropic Gaussian blobs, one per class, with standard-normal centres.
#[derive(Debug, Clone, PartialEq)]
pub struct SyntheticTask {
    pub means: Vec<Vec<f64>>,
    pub spread: f64,
}

impl SyntheticTask {
    pub fn new(num_classes: usize, dim: usize, spread: f64, seed: u64) -> Self {
        let mut rng = stream_rng(seed, Stream::Dataset, 0);
        let means = (0..num_classes)
            .map(|_| (0..dim).map(|_| StandardNormal.sample(&mut rng)).collect())
            .collect();
        Self { means, spread }
    }

    /// `n` points with labels assigned round-robin and then shuffled, so every
    /// class gets `n / C` or `n / C + 1` points.
    pub fn sample(&self, n: usize, rng: &mut SimRng) -> Dataset {
        let c = self.means.len();
        let d = self.means[0].len();
        let mut labels: Vec<usize> = (0..n).map(|i| i % c).collect();
        labels.shuffle(rng);
        let mut data = Vec::with_capacity(n * d);
        for &y in &labels {
            for &m in &self.means[y] {
                let z: f64 = StandardNormal.sample(rng);
                data.push(m + self.spread * z);
            }
        }
        Dataset { features: Tensor::new(vec![n, d], data).expect("sample shape"), labels, num_classes: c }
    }
}

/// Training split of a seeded synthetic task.
pub fn generate_dataset(num_classes: usize, dim: usize, n: usize, spread: f64, seed: u64) -> Result<Dataset> {
    if num_classes < 2 || dim < 2 || n < 10 * num_classes {
        return Err(Error::Input(format!(
            "need C >= 2, D >= 2 and N >= 10C; got C={num_classes}, D={dim}, N={n}"
        )));
    }
    let task = SyntheticTask::new(num_classes, dim, spread, seed);
    Ok(task.sample(n, &mut stream_rng(seed, Stream::Dataset, 1)))
}

/// Training and held-out test splits drawn from the same task.
pub fn generate_splits(
    num_classes: usize,
    dim: usize,
    train: usize,
    test: usize,
    spread: f64,
    seed: u64,
) -> Result<(Dataset, Dataset)> {
    let train_set = generate_dataset(num_classes, dim, train, spread, seed)?;
    let task = SyntheticTask::new(num_classes, dim, spread, seed);
    let test_set = task.sample(test, &mut stream_rng(seed, Stream::TestSet, 0));
    Ok((train_set, test_set))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn deterministic() {
        assert_eq!(generate_dataset(4, 3, 80, 0.5, 9).unwrap(), generate_dataset(4, 3, 80, 0.5, 9).unwrap());
        assert_ne!(generate_dataset(4, 3, 80, 0.5, 9).unwrap(), generate_dataset(4, 3, 80, 0.5, 10).unwrap());
    }

    #[test]
    fn balanced_labels() {
        let ds = generate_dataset(10, 4, 1000, 1.0, 3).unwrap();
        for c in ds.class_counts() {
            assert!((c as f64 - 100.0).abs() < 10.0);
        }
    }

    #[test]
    fn preconditions() {
        assert!(generate_dataset(1, 4, 100, 1.0, 1).is_err());
        assert!(generate_dataset(4, 1, 100, 1.0, 1).is_err());
        assert!(generate_dataset(4, 4, 39, 1.0, 1).is_err());
    }

    #[test]
    fn zero_spread_is_nearest_mean_separable() {
        let task = SyntheticTask::new(5, 6, 0.0, 2);
        let ds = generate_dataset(5, 6, 200, 0.0, 2).unwrap();
        for r in 0..ds.len() {
            let x = ds.features.row(r);
            let nearest = (0..5)
                .min_by(|&a, &b| {
                    let da: f64 = task.means[a].iter().zip(x).map(|(m, v)| (m - v).powi(2)).sum();
                    let db: f64 = task.means[b].iter().zip(x).map(|(m, v)| (m - v).powi(2)).sum();
                    da.total_cmp(&db)
                })
                .unwrap();
            assert_eq!(nearest, ds.labels[r]);
        }
    }

    #[test]
    fn test_split_shares_means() {
        let (train, test) = generate_splits(3, 4, 60, 30, 0.0, 5).unwrap();
        let row_of = |ds: &Dataset, y: usize| ds.features.row(ds.labels.iter().position(|&l| l == y).unwrap()).to_vec();
        assert_eq!(row_of(&train, 1), row_of(&test, 1));
    }
}
