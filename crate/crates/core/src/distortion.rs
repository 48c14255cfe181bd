//! Embedding-space distortion `δ̂ = d_o − d_p`: mean distance from the target
//! to its original neighborhood minus mean distance to its perturbed
//! neighborhood, both measured in the embeddings of the perturbed graph.

use serde::{Deserialize, Serialize};

use crate::embed::{EmbeddingModel, EmbeddingTable};
use crate::error::{Error, Result};
use crate::graph::{Graph, NodeSet};
use crate::numerics::l2_distance;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DistortionScore {
    pub value: f64,
    pub d_o: f64,
    pub d_p: f64,
}

impl DistortionScore {
    fn new(d_o: f64, d_p: f64) -> Self {
        Self {
            value: d_o - d_p,
            d_o,
            d_p,
        }
    }
}

/// Mean L2 distance from row `t` to the rows in `s`.
pub fn mean_l2_to_set(z: &EmbeddingTable, t: usize, s: &NodeSet) -> Result<f64> {
    if s.is_empty() {
        return Err(Error::input("mean distance to an empty set"));
    }
    let n = z.node_count();
    if t >= n || s.iter().any(|u| u >= n) {
        return Err(Error::input("node outside the embedding table"));
    }
    let zt = z.row(t);
    Ok(s.iter().map(|u| l2_distance(zt, z.row(u))).sum::<f64>() / s.len() as f64)
}

/// How the target itself is treated when averaging.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
pub enum CenterPolicy {
    #[default]
    Exclude,
    Include,
}

fn side(z: &EmbeddingTable, t: usize, s: &NodeSet, policy: CenterPolicy) -> Result<f64> {
    let s = match policy {
        CenterPolicy::Exclude => s.without(t),
        CenterPolicy::Include => s.clone(),
    };
    if s.is_empty() {
        if t >= z.node_count() {
            return Err(Error::input("node outside the embedding table"));
        }
        return Ok(0.0);
    }
    mean_l2_to_set(z, t, &s)
}

/// `δ̂` with the default center exclusion.
pub fn embedding_distortion(z_pert: &EmbeddingTable, t: usize, n_orig: &NodeSet, n_pert: &NodeSet) -> Result<DistortionScore> {
    embedding_distortion_with(z_pert, t, n_orig, n_pert, CenterPolicy::Exclude)
}

pub fn embedding_distortion_with(
    z_pert: &EmbeddingTable,
    t: usize,
    n_orig: &NodeSet,
    n_pert: &NodeSet,
    policy: CenterPolicy,
) -> Result<DistortionScore> {
    Ok(DistortionScore::new(
        side(z_pert, t, n_orig, policy)?,
        side(z_pert, t, n_pert, policy)?,
    ))
}

/// Recomputes the frozen embedder on `perturbed` and scores the distortion
/// of `t`'s `k`-hop neighborhood relative to `original`.
pub fn distortion_between(
    model: &EmbeddingModel,
    original: &Graph,
    perturbed: &Graph,
    t: usize,
    k: usize,
) -> Result<DistortionScore> {
    let z = model.embed(perturbed)?;
    let n_orig = original.k_hop_neighborhood(t, k)?;
    let n_pert = perturbed.k_hop_neighborhood(t, k)?;
    embedding_distortion(&z, t, &n_orig, &n_pert)
}
