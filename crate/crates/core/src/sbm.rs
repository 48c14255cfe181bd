//! Stochastic block model generator with block-aligned binary features.

use rand::Rng as _;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::graph::Graph;
use crate::numerics::DenseMatrix;
use crate::rng::seeded;

/// Graph and feature parameters. The feature space is split into one
/// equal-width segment per block; a node switches on each bit of its own
/// block's segment with probability `feature_on` and every other bit with
/// probability `feature_noise`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SbmSpec {
    pub block_sizes: Vec<usize>,
    pub p_in: f64,
    pub p_out: f64,
    pub feature_dim: usize,
    pub feature_on: f64,
    pub feature_noise: f64,
}

impl SbmSpec {
    pub fn two_blocks(n: usize, p_in: f64, p_out: f64) -> Self {
        Self {
            block_sizes: vec![n / 2, n - n / 2],
            p_in,
            p_out,
            ..Self::default()
        }
    }

    pub fn node_count(&self) -> usize {
        self.block_sizes.iter().sum()
    }

    pub fn validate(&self) -> Result<()> {
        if self.block_sizes.is_empty() || self.block_sizes.contains(&0) {
            return Err(Error::Config("SBM needs at least one non-empty block".into()));
        }
        for (name, p) in [
            ("p_in", self.p_in),
            ("p_out", self.p_out),
            ("feature_on", self.feature_on),
            ("feature_noise", self.feature_noise),
        ] {
            if !(0.0..=1.0).contains(&p) {
                return Err(Error::Config(format!("{name}={p} is not a probability")));
            }
        }
        if self.feature_dim < self.block_sizes.len() {
            return Err(Error::Config(format!(
                "feature_dim {} smaller than block count {}",
                self.feature_dim,
                self.block_sizes.len()
            )));
        }
        Ok(())
    }

    /// Block id of every node; blocks occupy consecutive id ranges.
    pub fn block_labels(&self) -> Vec<usize> {
        self.block_sizes
            .iter()
            .enumerate()
            .flat_map(|(b, &s)| std::iter::repeat_n(b, s))
            .collect()
    }
}

impl Default for SbmSpec {
    fn default() -> Self {
        Self {
            block_sizes: vec![50, 50],
            p_in: 0.3,
            p_out: 0.02,
            feature_dim: 16,
            feature_on: 0.3,
            feature_noise: 0.1,
        }
    }
}

/// Samples a graph; labels are block ids.
pub fn generate(spec: &SbmSpec, seed: u64) -> Result<Graph> {
    spec.validate()?;
    let labels = spec.block_labels();
    let n = labels.len();
    let mut rng = seeded(seed);
    let mut edges = Vec::new();
    for u in 0..n {
        for v in u + 1..n {
            let p = if labels[u] == labels[v] { spec.p_in } else { spec.p_out };
            if rng.gen_bool(p) {
                edges.push((u, v));
            }
        }
    }
    let blocks = spec.block_sizes.len();
    let width = spec.feature_dim / blocks;
    let features = DenseMatrix::from_fn(n, spec.feature_dim, |v, j| {
        let own = j / width == labels[v] && j < width * blocks;
        let p = if own { spec.feature_on } else { spec.feature_noise };
        if rng.gen_bool(p) {
            1.0
        } else {
            0.0
        }
    });
    Graph::from_edges(n, &edges, features, Some(labels))
}
