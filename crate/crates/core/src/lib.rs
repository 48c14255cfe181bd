//! Targeted black-box edge-perturbation attacks on graph neural networks
//! driven by neighborhood distortion.
//!
//! The pipeline has four stages:
//!
//! 1. [`embed`] trains an unsupervised GIN whose frozen embeddings measure how
//!    far a node has moved from its original neighborhood ([`distortion`]).
//! 2. [`dqn`] trains a Q-network that picks edge flips around a target node,
//!    rewarded by that distortion.
//! 3. [`victim`] trains ordinary GNN models on a downstream task and measures
//!    the accuracy drop the attack causes.
//! 4. [`analysis`] correlates simple node and community properties with the
//!    distortion ranking, to study how detectable the attack is.
//!
//! [`oracle`] holds exact, greedy and naive reference attackers, and
//! [`pipeline`] wires all stages behind the `nbattack` binary.

pub mod analysis;
pub mod attack;
mod codec;
pub mod config;
pub mod distortion;
pub mod dqn;
pub mod embed;
pub mod error;
pub mod gcn;
pub mod graph;
pub mod io;
pub mod numerics;
pub mod oracle;
pub mod pipeline;
pub mod rng;
pub mod sbm;
pub mod victim;

pub use error::{Error, Result};
pub use graph::{EdgeEdit, EditSign, Graph, NodeSet};
