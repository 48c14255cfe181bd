//! Deep Q-learning attacker.
//!
//! A state is the current perturbed graph around a target `t`; an action
//! flips the pair `(t, v)` for a node `v` not edited before in the same
//! episode. Rewards are the embedding distortion gained by the step, measured
//! with the frozen unsupervised embedder. At test time only the Q-network is
//! evaluated: `B` greedy forward passes produce a budget-`B` attack.

mod infer;
mod qnet;
mod replay;
mod train;

use std::path::Path;

use serde::{Deserialize, Serialize};

pub use infer::{infer_attack, inference_timer, TimingRow};
pub use qnet::{action_repr, state_repr, NodeEmbeddings, QNetParams, QSample};
pub use replay::{ReplayBuffer, ReplayTuple};
pub use train::{epsilon, step_reward, train_dqn, train_dqn_with_pool, DqnTraining};

use crate::codec::{read_file, write_file, Decoder, Encoder};
use crate::error::{Error, Result};
use crate::gcn::{DenseLayer, GcnStack};
use crate::numerics::Parameters;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DqnConfig {
    /// Training episodes `L`.
    pub episodes: usize,
    /// Steps per episode `T`.
    pub steps: usize,
    /// Reward horizon `n` of the Q-function.
    pub n_step: usize,
    pub gamma: f64,
    pub replay_capacity: usize,
    pub batch_size: usize,
    /// Fraction of nodes eligible as training targets.
    pub target_fraction: f64,
    pub learning_rate: f64,
    /// Neighborhood radius for states and rewards.
    pub k: usize,
    pub gcn_layers: usize,
    pub gcn_hidden: usize,
    pub mlp_hidden: usize,
    pub epsilon_floor: f64,
    pub epsilon_decay: f64,
}

impl Default for DqnConfig {
    fn default() -> Self {
        Self {
            episodes: 100,
            steps: 10,
            n_step: 2,
            gamma: 0.99,
            replay_capacity: 5000,
            batch_size: 32,
            target_fraction: 0.4,
            learning_rate: 0.01,
            k: 2,
            gcn_layers: 2,
            gcn_hidden: 16,
            mlp_hidden: 16,
            epsilon_floor: 0.05,
            epsilon_decay: 0.9,
        }
    }
}

impl DqnConfig {
    pub fn validate(&self) -> Result<()> {
        let fail = |m: String| Err(Error::Config(m));
        if self.n_step == 0 || self.n_step > self.steps.max(1) {
            return fail(format!("n_step {} must be in 1..=steps ({})", self.n_step, self.steps));
        }
        if !(self.gamma > 0.0 && self.gamma <= 1.0) {
            return fail(format!("gamma {} outside (0, 1]", self.gamma));
        }
        if self.batch_size == 0 || self.replay_capacity < self.batch_size {
            return fail("replay capacity must be at least the (positive) batch size".into());
        }
        if !(self.target_fraction > 0.0 && self.target_fraction <= 1.0) {
            return fail(format!("target_fraction {} outside (0, 1]", self.target_fraction));
        }
        if self.k == 0 || self.gcn_layers == 0 || self.gcn_hidden == 0 || self.mlp_hidden == 0 {
            return fail("k and network sizes must be positive".into());
        }
        if self.learning_rate.partial_cmp(&0.0) != Some(std::cmp::Ordering::Greater) || !(0.0..=1.0).contains(&self.epsilon_floor) || !(0.0..=1.0).contains(&self.epsilon_decay) {
            return fail("learning rate must be positive and epsilon parameters in [0, 1]".into());
        }
        Ok(())
    }
}

/// A trained attacker: Q-network plus the hyperparameters it was trained
/// with.
#[derive(Debug, Clone, PartialEq)]
pub struct DqnAttacker {
    pub qnet: QNetParams,
    pub k: usize,
    pub n_step: usize,
    pub gamma: f64,
}

const ATTACKER_MAGIC: &[u8; 8] = b"NBDQNAT1";

impl DqnAttacker {
    /// Header `(feature_dim, gcn_layers, gcn_hidden, mlp_hidden, k, n, γ)`
    /// followed by every weight matrix.
    pub fn to_bytes(&self) -> Vec<u8> {
        let mut enc = Encoder::new(ATTACKER_MAGIC);
        enc.u64(self.qnet.feature_dim() as u64)
            .u64(self.qnet.gcn.layers.len() as u64)
            .u64(self.qnet.embed_dim() as u64)
            .u64(self.qnet.mlp_hidden() as u64)
            .u64(self.k as u64)
            .u64(self.n_step as u64)
            .f64(self.gamma);
        for t in self.qnet.tensors() {
            enc.matrix(t);
        }
        enc.finish()
    }

    pub fn from_bytes(bytes: &[u8], origin: &Path) -> Result<Self> {
        let mut dec = Decoder::new(bytes, ATTACKER_MAGIC, origin)?;
        let feature_dim = dec.usize()?;
        let layers = dec.usize()?;
        let hidden = dec.usize()?;
        let mlp = dec.usize()?;
        let k = dec.usize()?;
        let n_step = dec.usize()?;
        let gamma = dec.f64()?;
        if layers == 0 || layers > 64 {
            return Err(Error::format(origin, "implausible layer count"));
        }
        let mut gcn_layers = Vec::with_capacity(layers);
        for l in 0..layers {
            let weight = dec.matrix()?;
            let bias = dec.matrix()?;
            let in_dim = if l == 0 { feature_dim } else { hidden };
            if weight.shape() != (in_dim, hidden) || bias.shape() != (1, hidden) {
                return Err(Error::format(origin, format!("GCN layer {l} has wrong shape")));
            }
            gcn_layers.push(DenseLayer { weight, bias });
        }
        let w2 = dec.matrix()?;
        let w1 = dec.matrix()?;
        dec.finish()?;
        if w2.shape() != (3 * hidden, mlp) || w1.shape() != (mlp, 1) {
            return Err(Error::format(origin, "MLP head has wrong shape"));
        }
        Ok(Self {
            qnet: QNetParams {
                gcn: GcnStack { layers: gcn_layers },
                w2,
                w1,
            },
            k,
            n_step,
            gamma,
        })
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        write_file(path, &self.to_bytes())
    }

    pub fn load(path: &Path) -> Result<Self> {
        Self::from_bytes(&read_file(path)?, path)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::seeded;

    #[test]
    fn attacker_round_trips_exactly() {
        let a = DqnAttacker {
            qnet: QNetParams::new(5, 2, 4, 3, &mut seeded(1)),
            k: 2,
            n_step: 2,
            gamma: 0.99,
        };
        let bytes = a.to_bytes();
        assert_eq!(DqnAttacker::from_bytes(&bytes, Path::new("m")).unwrap(), a);
        assert!(DqnAttacker::from_bytes(&bytes[..bytes.len() - 1], Path::new("m")).is_err());
        let mut bad = bytes.clone();
        bad[0] = b'X';
        assert!(DqnAttacker::from_bytes(&bad, Path::new("m")).is_err());
    }

    #[test]
    fn config_validation() {
        assert!(DqnConfig::default().validate().is_ok());
        for bad in [
            DqnConfig { n_step: 11, ..DqnConfig::default() },
            DqnConfig { gamma: 0.0, ..DqnConfig::default() },
            DqnConfig { replay_capacity: 8, ..DqnConfig::default() },
            DqnConfig { target_fraction: 0.0, ..DqnConfig::default() },
        ] {
            assert!(bad.validate().is_err());
        }
    }
}
