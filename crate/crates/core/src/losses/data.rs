use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};

use crate::error::{check_dim, CadenError, Result};
use crate::Scalar;

/// Labelled samples stored row-major.
#[derive(Debug, Clone, PartialEq)]
pub struct Dataset<S> {
    features: Vec<S>,
    labels: Vec<usize>,
    num_features: usize,
    num_classes: usize,
}

impl<S: Scalar> Dataset<S> {
    pub fn new(features: Vec<S>, labels: Vec<usize>, num_features: usize, num_classes: usize) -> Result<Self> {
        check_dim(labels.len() * num_features, features.len())?;
        if let Some(&bad) = labels.iter().find(|&&l| l >= num_classes) {
            return Err(CadenError::InvalidParameter(format!("label {bad} out of range for {num_classes} classes")));
        }
        Ok(Dataset { features, labels, num_features, num_classes })
    }

    pub fn len(&self) -> usize {
        self.labels.len()
    }

    pub fn is_empty(&self) -> bool {
        self.labels.is_empty()
    }

    pub fn num_features(&self) -> usize {
        self.num_features
    }

    pub fn num_classes(&self) -> usize {
        self.num_classes
    }

    pub fn labels(&self) -> &[usize] {
        &self.labels
    }

    pub fn sample(&self, k: usize) -> (&[S], usize) {
        let f = self.num_features;
        (&self.features[k * f..(k + 1) * f], self.labels[k])
    }

    pub fn samples(&self) -> impl Iterator<Item = (&[S], usize)> + '_ {
        self.features.chunks_exact(self.num_features.max(1)).zip(self.labels.iter().copied())
    }

    pub fn subset(&self, indices: &[usize]) -> Self {
        let f = self.num_features;
        let mut features = Vec::with_capacity(indices.len() * f);
        let mut labels = Vec::with_capacity(indices.len());
        for &k in indices {
            features.extend_from_slice(&self.features[k * f..(k + 1) * f]);
            labels.push(self.labels[k]);
        }
        Dataset { features, labels, num_features: f, num_classes: self.num_classes }
    }

    /// Seeded random shuffle into `parts` equal shards; the remainder goes to the last shard.
    pub fn partition(&self, parts: usize, seed: u64) -> Result<Vec<Self>> {
        if parts == 0 || parts > self.len() {
            return Err(CadenError::InvalidParameter(format!(
                "cannot split {} samples into {parts} shards",
                self.len()
            )));
        }
        let mut order: Vec<usize> = (0..self.len()).collect();
        order.shuffle(&mut ChaCha8Rng::seed_from_u64(seed));
        let base = self.len() / parts;
        Ok((0..parts)
            .map(|p| {
                let end = if p + 1 == parts { order.len() } else { (p + 1) * base };
                self.subset(&order[p * base..end])
            })
            .collect())
    }

    /// Splits off the last `fraction` of a seeded shuffle as a held-out set.
    pub fn train_test_split(&self, test_fraction: f64, seed: u64) -> (Self, Self) {
        let mut order: Vec<usize> = (0..self.len()).collect();
        order.shuffle(&mut ChaCha8Rng::seed_from_u64(seed));
        let n_test = ((self.len() as f64) * test_fraction).round() as usize;
        let (train, test) = order.split_at(self.len() - n_test.min(self.len()));
        (self.subset(train), self.subset(test))
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BlobSpec {
    pub samples: usize,
    pub classes: usize,
    pub features: usize,
    /// Standard deviation of the class centers around the origin.
    pub center_spread: f64,
    /// Within-class standard deviation.
    pub noise: f64,
}

impl Default for BlobSpec {
    fn default() -> Self {
        BlobSpec { samples: 600, classes: 3, features: 8, center_spread: 2.0, noise: 1.0 }
    }
}

/// Isotropic Gaussian clusters, one per class, with balanced labels `k mod classes`.
pub fn gaussian_blobs<S: Scalar>(spec: BlobSpec, seed: u64) -> Dataset<S> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let centers_dist = Normal::new(0.0, spec.center_spread).expect("finite spread");
    let noise = Normal::new(0.0, spec.noise).expect("finite noise");
    let centers: Vec<f64> = (0..spec.classes * spec.features).map(|_| centers_dist.sample(&mut rng)).collect();
    let mut features = Vec::with_capacity(spec.samples * spec.features);
    let mut labels = Vec::with_capacity(spec.samples);
    for k in 0..spec.samples {
        let c = k % spec.classes;
        for j in 0..spec.features {
            features.push(S::of(centers[c * spec.features + j] + noise.sample(&mut rng)));
        }
        labels.push(c);
    }
    Dataset { features, labels, num_features: spec.features, num_classes: spec.classes }
}
